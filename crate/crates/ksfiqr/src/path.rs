//! Exhaustive-solver coefficients along a grid of penalty weights.

use std::fmt::Write as _;
use std::io::Write;

use ksfiqr_core::{fit_exhaustive, FitConfig, MultiEnvDataset, SupportMask};
use serde::Serialize;

use crate::{format_err, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub gamma: f64,
    /// Full-length coefficients, intercept first.
    pub beta: Vec<f64>,
    pub support: SupportMask,
    pub objective: f64,
}

/// Fits the exhaustive estimator at each `γ` in the given order; the rest
/// of `cfg` is held fixed.
pub fn solution_path(
    ds: &MultiEnvDataset,
    gammas: &[f64],
    cfg: &FitConfig,
) -> Result<Vec<PathPoint>> {
    if gammas.is_empty() {
        return Err(format_err("the penalty grid is empty"));
    }
    gammas
        .iter()
        .map(|&gamma| {
            let fit = fit_exhaustive(ds, &cfg.with_gamma(gamma))?;
            Ok(PathPoint {
                gamma,
                beta: fit.beta,
                support: fit.support,
                objective: fit.objective,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct PathRow {
    gamma: f64,
    coordinate: usize,
    value: f64,
}

/// Long format `gamma,coordinate,value`; coordinate 0 is the intercept.
pub fn write_path_csv<W: Write>(points: &[PathPoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for pt in points {
        for (coordinate, &value) in pt.beta.iter().enumerate() {
            wtr.serialize(PathRow {
                gamma: pt.gamma,
                coordinate,
                value,
            })?;
        }
    }
    wtr.flush()?;
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;
const PALETTE: [&str; 8] = [
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666",
];

/// Line chart of every covariate coefficient against the grid position.
/// Grid points are spaced evenly and labelled with their `γ`, which keeps
/// `γ = 0` and wide log ranges readable.
pub fn render_svg(points: &[PathPoint]) -> String {
    let covariates = points.first().map_or(0, |p| p.beta.len().saturating_sub(1));
    let values = points.iter().flat_map(|p| p.beta.iter().skip(1).copied());
    let (lo, hi) = values.fold((0.0f64, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let steps = points.len().saturating_sub(1).max(1) as f64;
    let x = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / steps;
    let y = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / span;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        svg,
        r##"<line x1="{MARGIN}" y1="{0:.2}" x2="{1}" y2="{0:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
        y(0.0),
        WIDTH - MARGIN
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{MARGIN},{MARGIN} {MARGIN},{0} {1},{0}" fill="none" stroke="#000"/>"##,
        HEIGHT - MARGIN,
        WIDTH - MARGIN
    );
    for (i, pt) in points.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            x(i),
            HEIGHT - MARGIN + 16.0,
            pt.gamma
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">γ</text>"#,
        WIDTH / 2.0,
        HEIGHT - 10.0
    );
    for (v, anchor) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{:.2}" text-anchor="end">{v:.3}</text>"#,
            MARGIN - 4.0,
            y(anchor) + 4.0
        );
    }
    for j in 1..=covariates {
        let colour = PALETTE[(j - 1) % PALETTE.len()];
        let coords: Vec<String> = points
            .iter()
            .enumerate()
            .map(|(i, p)| format!("{:.2},{:.2}", x(i), y(p.beta[j])))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            coords.join(" ")
        );
        if let Some(last) = points.last() {
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" fill="{colour}">x{j}</text>"#,
                x(points.len() - 1) + 4.0,
                y(last.beta[j]) + 4.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(gamma: f64, beta: Vec<f64>) -> PathPoint {
        let support = SupportMask::full(beta.len());
        PathPoint {
            gamma,
            beta,
            support,
            objective: 0.0,
        }
    }

    #[test]
    fn csv_is_long_format() {
        let pts = [point(0.0, vec![0.5, 1.0]), point(10.0, vec![0.25, -2.0])];
        let mut out = Vec::new();
        write_path_csv(&pts, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "gamma,coordinate,value\n0.0,0,0.5\n0.0,1,1.0\n10.0,0,0.25\n10.0,1,-2.0\n"
        );
    }

    #[test]
    fn svg_has_one_line_per_covariate() {
        let pts = [
            point(0.0, vec![0.0, 1.0, 2.0]),
            point(5.0, vec![0.0, 0.0, 2.5]),
        ];
        let svg = render_svg(&pts);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg.matches("stroke-width=\"1.5\"").count(), 2);
        assert!(svg.contains(">x2</text>"));
    }
}
