//! Kolmogorov-Arnold network layers with B-spline activations on edges,
//! matched MLP/ConvNet baselines, and a class-incremental continual-learning
//! harness for MNIST plus a 1D Gaussian-peaks local-plasticity study.
//!
//! The crate is organized bottom-up:
//!
//! - [`tensor`]: minimal dense N-d `f64` array with the batched linear
//!   algebra the layers need, plus a seeded, platform-stable RNG.
//! - [`spline`]: uniform B-spline knot grids, Cox-de Boor basis evaluation
//!   and differentiation, spline evaluation.
//! - [`layers`]: trainable layers with explicit forward/backward passes
//!   (KAN linear in its matrix form, dense, KAN convolution, classic
//!   convolution, max-pool, batch norm, losses).
//! - [`network`]: declarative architecture specs, instantiated networks,
//!   and bit-exact checkpointing.
//! - [`accounting`]: exact trainable-parameter counting for every
//!   architecture family, used for architecture matching and golden tests.
//! - [`data`]: MNIST IDX ingestion (raw or gzip), class-incremental task
//!   splitting, balanced test sets, and the synthetic Gaussian-peaks set.
//! - [`trainer`]: SGD/Adam optimization with per-task LR decay, the
//!   class-incremental protocol, the hyperparameter grid runner, and the
//!   sequential peaks study.
//! - [`plot`]: dependency-free SVG plots for accuracy curves and learned
//!   1D functions.

pub mod accounting;
pub mod data;
pub mod error;
pub mod layers;
pub mod network;
pub mod plot;
pub mod spline;
pub mod tensor;
pub mod trainer;

pub use error::{KanError, Result};
pub use tensor::{Rng, Tensor};
