//! Exact trainable-parameter counting for every architecture family.
//!
//! Each KAN edge carries `G + k` spline coefficients plus, depending on the
//! counting mode, the two scale factors, the output bias, and (full mode
//! only) four parameters tied to the symbolic front of the original
//! framework. Those four are accounted for architecture matching but never
//! instantiated, so [`LayerCount`] reports both the nominal figure and the
//! channel-aware / instantiated one where they differ.

use crate::error::{KanError, Result};
use crate::network::{ModelKind, NetworkSpec};
use serde::{Deserialize, Serialize};

/// Counting mode for KAN layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KanParamMode {
    /// Full framework: coefficients, both scales, bias, and the four
    /// symbolic-front parameters per connection.
    PykanFull,
    /// Efficient formulation: coefficients and both scales, no bias.
    Effkan,
    /// Continual learning with everything but the coefficients frozen.
    ClFixed,
    /// Continual learning with the spline scale also trainable.
    ClWsTrainable,
}

impl KanParamMode {
    /// Trainable parameters per connection, `G + k` plus the mode extras.
    fn per_edge(&self, m: usize) -> usize {
        match self {
            KanParamMode::PykanFull => m + 6,
            KanParamMode::Effkan => m + 2,
            KanParamMode::ClFixed => m,
            KanParamMode::ClWsTrainable => m + 1,
        }
    }

    /// Per-connection parameters a layer actually materializes (the four
    /// symbolic-front parameters are accounting-only).
    fn per_edge_instantiated(&self, m: usize) -> usize {
        match self {
            KanParamMode::PykanFull => m + 2,
            other => other.per_edge(m),
        }
    }
}

/// One layer's shape for counting purposes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerCountSpec {
    Dense {
        d_in: usize,
        d_out: usize,
    },
    KanLinear {
        d_in: usize,
        d_out: usize,
        grid_size: usize,
        order: usize,
        mode: KanParamMode,
    },
    Conv {
        n_f: usize,
        k_s: usize,
        c_in: usize,
    },
    KanConv {
        n_f: usize,
        k_s: usize,
        c_in: usize,
        grid_size: usize,
        order: usize,
        mode: KanParamMode,
    },
}

/// Exact counts for one layer. `nominal` follows the published per-family
/// formulas (which omit input channels for convolutions and include the
/// symbolic front for the full KAN mode); `actual` is what an instantiated
/// layer's trainable arrays sum to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerCount {
    pub nominal: u64,
    pub actual: u64,
}

/// Trainable-parameter count for one layer.
pub fn count_layer(spec: &LayerCountSpec) -> Result<LayerCount> {
    match *spec {
        LayerCountSpec::Dense { d_in, d_out } => {
            if d_in == 0 || d_out == 0 {
                return Err(KanError::InvalidConfig("dense: zero dimension".into()));
            }
            let n = (d_in * d_out + d_out) as u64;
            Ok(LayerCount {
                nominal: n,
                actual: n,
            })
        }
        LayerCountSpec::KanLinear {
            d_in,
            d_out,
            grid_size,
            order,
            mode,
        } => {
            if d_in == 0 || d_out == 0 {
                return Err(KanError::InvalidConfig("kan_linear: zero dimension".into()));
            }
            if grid_size < 1 {
                return Err(KanError::InvalidConfig(
                    "kan_linear: grid size must be >= 1".into(),
                ));
            }
            let m = grid_size + order;
            let edges = (d_in * d_out) as u64;
            let bias = if mode == KanParamMode::PykanFull {
                d_out as u64
            } else {
                0
            };
            Ok(LayerCount {
                nominal: edges * mode.per_edge(m) as u64 + bias,
                actual: edges * mode.per_edge_instantiated(m) as u64 + bias,
            })
        }
        LayerCountSpec::Conv { n_f, k_s, c_in } => {
            if n_f == 0 || k_s == 0 || c_in == 0 {
                return Err(KanError::InvalidConfig("conv: zero dimension".into()));
            }
            Ok(LayerCount {
                // published formula has no channel term
                nominal: (n_f * (k_s * k_s + 1)) as u64,
                actual: (n_f * c_in * k_s * k_s + n_f) as u64,
            })
        }
        LayerCountSpec::KanConv {
            n_f,
            k_s,
            c_in,
            grid_size,
            order,
            mode,
        } => {
            if n_f == 0 || k_s == 0 || c_in == 0 {
                return Err(KanError::InvalidConfig("kan_conv: zero dimension".into()));
            }
            if grid_size < 1 {
                return Err(KanError::InvalidConfig(
                    "kan_conv: grid size must be >= 1".into(),
                ));
            }
            if mode == KanParamMode::PykanFull {
                return Err(KanError::InvalidConfig(
                    "kan_conv: full mode with symbolic front is not defined for convolutions"
                        .into(),
                ));
            }
            let m = grid_size + order;
            let per = mode.per_edge(m) as u64;
            Ok(LayerCount {
                nominal: (n_f * k_s * k_s) as u64 * per,
                actual: (n_f * c_in * k_s * k_s) as u64 * per,
            })
        }
    }
}

/// Per-layer breakdown plus totals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCount {
    pub layers: Vec<(LayerCountSpec, LayerCount)>,
    pub nominal_total: u64,
    pub actual_total: u64,
}

/// Sums [`count_layer`] over a non-empty architecture.
pub fn count_network(specs: &[LayerCountSpec]) -> Result<NetworkCount> {
    if specs.is_empty() {
        return Err(KanError::InvalidConfig("empty architecture".into()));
    }
    let mut layers = Vec::with_capacity(specs.len());
    let mut nominal_total = 0u64;
    let mut actual_total = 0u64;
    for spec in specs {
        let count = count_layer(spec)?;
        nominal_total += count.nominal;
        actual_total += count.actual;
        layers.push((spec.clone(), count));
    }
    Ok(NetworkCount {
        layers,
        nominal_total,
        actual_total,
    })
}

/// Canonical counting mode for a KAN trainability pattern, when one exists.
pub fn kan_mode_from_flags(
    train_ws: bool,
    train_wb: bool,
    train_beta: bool,
    with_beta: bool,
) -> Result<KanParamMode> {
    match (train_ws, train_wb, train_beta, with_beta) {
        (true, true, true, true) => Ok(KanParamMode::PykanFull),
        (true, true, false, false) => Ok(KanParamMode::Effkan),
        (true, false, false, _) => Ok(KanParamMode::ClWsTrainable),
        (false, false, false, _) => Ok(KanParamMode::ClFixed),
        _ => Err(KanError::InvalidConfig(format!(
            "trainability pattern (w_s={train_ws}, w_b={train_wb}, beta={train_beta}) \
             has no canonical counting mode"
        ))),
    }
}

/// Counting specs for a declarative architecture, used to validate configs
/// before training and by the params report.
pub fn network_count_specs(spec: &NetworkSpec) -> Result<Vec<LayerCountSpec>> {
    spec.validate()?;
    let kan_mode = || kan_mode_from_flags(spec.train_ws, spec.train_wb, spec.train_beta, spec.with_beta);
    let mut out = Vec::new();
    match spec.model {
        ModelKind::Mlp => {
            for pair in spec.widths.windows(2) {
                out.push(LayerCountSpec::Dense {
                    d_in: pair[0],
                    d_out: pair[1],
                });
            }
        }
        ModelKind::Kan => {
            let mode = kan_mode()?;
            for pair in spec.widths.windows(2) {
                out.push(LayerCountSpec::KanLinear {
                    d_in: pair[0],
                    d_out: pair[1],
                    grid_size: spec.grid_size,
                    order: spec.order,
                    mode,
                });
            }
        }
        ModelKind::Convnet => {
            out.push(LayerCountSpec::Conv { n_f: 5, k_s: 3, c_in: 1 });
            out.push(LayerCountSpec::Conv { n_f: 5, k_s: 3, c_in: 5 });
            out.push(LayerCountSpec::Dense { d_in: 980, d_out: 161 });
            out.push(LayerCountSpec::Dense { d_in: 161, d_out: 10 });
        }
        ModelKind::Kanv => {
            let mode = kan_mode()?;
            out.push(LayerCountSpec::KanConv {
                n_f: 5, k_s: 3, c_in: 1,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::KanConv {
                n_f: 5, k_s: 3, c_in: 5,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::Dense { d_in: 980, d_out: 161 });
            out.push(LayerCountSpec::Dense { d_in: 161, d_out: 10 });
        }
        ModelKind::Convkan => {
            let mode = kan_mode()?;
            out.push(LayerCountSpec::Conv { n_f: 5, k_s: 3, c_in: 1 });
            out.push(LayerCountSpec::Conv { n_f: 5, k_s: 3, c_in: 5 });
            out.push(LayerCountSpec::KanLinear {
                d_in: 980, d_out: 20,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::KanLinear {
                d_in: 20, d_out: 10,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
        }
        ModelKind::Kkan => {
            let mode = kan_mode()?;
            out.push(LayerCountSpec::KanConv {
                n_f: 5, k_s: 3, c_in: 1,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::KanConv {
                n_f: 5, k_s: 3, c_in: 5,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::KanLinear {
                d_in: 980, d_out: 31,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
            out.push(LayerCountSpec::KanLinear {
                d_in: 31, d_out: 10,
                grid_size: spec.grid_size, order: spec.order, mode,
            });
        }
    }
    Ok(out)
}
