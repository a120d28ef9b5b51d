//! Dependency-free SVG plots: accuracy curves with dashed task boundaries,
//! and 1D function overlays for the peaks study. Output is deterministic
//! text, which keeps the plots diffable in tests.

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;

fn map_x(v: f64, lo: f64, hi: f64) -> f64 {
    MARGIN + (v - lo) / (hi - lo) * (WIDTH - 2.0 * MARGIN)
}

fn map_y(v: f64, lo: f64, hi: f64) -> f64 {
    HEIGHT - MARGIN - (v - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN)
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = if dashed {
        " stroke-dasharray=\"6,4\""
    } else {
        ""
    };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
        coords.join(" ")
    )
}

fn frame(title: &str, x_label: &str, y_label: &str) -> String {
    let x0 = MARGIN;
    let x1 = WIDTH - MARGIN;
    let y0 = HEIGHT - MARGIN;
    let y1 = MARGIN;
    format!(
        concat!(
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n",
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n",
            "<text x=\"{tx}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
            "<text x=\"{tx}\" y=\"{lx}\" text-anchor=\"middle\" font-size=\"12\">{x_label}</text>\n",
            "<text x=\"14\" y=\"{ty}\" text-anchor=\"middle\" font-size=\"12\" ",
            "transform=\"rotate(-90 14 {ty})\">{y_label}</text>\n",
        ),
        w = WIDTH,
        h = HEIGHT,
        x0 = x0,
        x1 = x1,
        y0 = y0,
        y1 = y1,
        tx = WIDTH / 2.0,
        lx = HEIGHT - 12.0,
        ty = HEIGHT / 2.0,
        title = title,
        x_label = x_label,
        y_label = y_label,
    )
}

/// Test-accuracy curve over epochs with dashed vertical lines where each new
/// task begins (epoch `epochs_per_task * t` for `t = 1 .. n_tasks-1`). Each
/// boundary line carries a `data-epoch` attribute for machine checking.
pub fn accuracy_svg(curve: &[f64], epochs_per_task: usize, n_tasks: usize, title: &str) -> String {
    let n = curve.len().max(1);
    let x_hi = n as f64;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    svg.push_str(&frame(title, "epoch", "test accuracy"));
    // y gridlines at 0.2 steps
    for i in 0..=5 {
        let v = i as f64 * 0.2;
        let y = map_y(v, 0.0, 1.0);
        svg.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y:.2}\" x2=\"{x1}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n<text x=\"{tx}\" y=\"{ty:.2}\" font-size=\"10\" text-anchor=\"end\">{v:.1}</text>\n",
            x0 = MARGIN,
            x1 = WIDTH - MARGIN,
            tx = MARGIN - 6.0,
            ty = y + 3.0,
        ));
    }
    // dashed task boundaries
    for t in 1..n_tasks {
        let boundary_epoch = epochs_per_task * t;
        let x = map_x(boundary_epoch as f64, 0.0, x_hi);
        svg.push_str(&format!(
            "<line data-epoch=\"{boundary_epoch}\" x1=\"{x:.2}\" y1=\"{y0}\" x2=\"{x:.2}\" y2=\"{y1}\" stroke=\"gray\" stroke-dasharray=\"5,5\"/>\n",
            y0 = HEIGHT - MARGIN,
            y1 = MARGIN,
        ));
    }
    let points: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .map(|(i, &acc)| (map_x((i + 1) as f64, 0.0, x_hi), map_y(acc, 0.0, 1.0)))
        .collect();
    svg.push_str(&polyline(&points, "#1f77b4", false));
    svg.push_str("</svg>\n");
    svg
}

/// Overlay of the learned 1D function against the ground truth.
pub fn function_overlay_svg(
    xs: &[f64],
    predictions: &[f64],
    targets: &[f64],
    title: &str,
) -> String {
    let y_lo = predictions
        .iter()
        .chain(targets)
        .cloned()
        .fold(f64::INFINITY, f64::min)
        .min(0.0);
    let y_hi = predictions
        .iter()
        .chain(targets)
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
        .max(1.0);
    let x_lo = xs.first().copied().unwrap_or(0.0);
    let x_hi = xs.last().copied().unwrap_or(1.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    svg.push_str(&frame(title, "x", "y"));
    let to_points = |ys: &[f64]| -> Vec<(f64, f64)> {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| (map_x(x, x_lo, x_hi), map_y(y, y_lo, y_hi)))
            .collect()
    };
    svg.push_str(&polyline(&to_points(targets), "#2ca02c", true));
    svg.push_str(&polyline(&to_points(predictions), "#d62728", false));
    svg.push_str(&format!(
        "<text x=\"{x}\" y=\"40\" font-size=\"11\" fill=\"#2ca02c\">target</text>\n<text x=\"{x}\" y=\"54\" font-size=\"11\" fill=\"#d62728\">learned</text>\n",
        x = WIDTH - MARGIN - 60.0
    ));
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_boundaries_sit_at_multiples_of_epochs_per_task() {
        let curve: Vec<f64> = (0..25).map(|i| i as f64 / 25.0).collect();
        let svg = accuracy_svg(&curve, 5, 5, "run");
        let boundaries: Vec<usize> = svg
            .lines()
            .filter_map(|l| {
                l.split("data-epoch=\"")
                    .nth(1)
                    .and_then(|s| s.split('"').next())
                    .and_then(|s| s.parse().ok())
            })
            .collect();
        assert_eq!(boundaries, vec![5, 10, 15, 20]);
    }

    #[test]
    fn svg_is_deterministic_and_well_formed() {
        let curve = vec![0.1, 0.2, 0.35];
        let a = accuracy_svg(&curve, 1, 3, "t");
        let b = accuracy_svg(&curve, 1, 3, "t");
        assert_eq!(a, b);
        assert!(a.starts_with("<svg"));
        assert!(a.trim_end().ends_with("</svg>"));

        let xs = vec![0.0, 0.5, 1.0];
        let overlay = function_overlay_svg(&xs, &[0.0, 1.0, 0.0], &[0.0, 0.9, 0.1], "peaks");
        assert!(overlay.contains("polyline"));
        assert!(overlay.trim_end().ends_with("</svg>"));
    }
}
