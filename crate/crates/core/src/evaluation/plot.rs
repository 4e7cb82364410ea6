use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::report::ReportRow;
use crate::error::{Error, Result};

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Evaluation(format!("plotting failed: {e}"))
}

/// Writes `robustness_blur.svg` and `robustness_jpeg.svg` (accuracy
/// against perturbation strength, one line per model) into `out_dir`.
/// Panels without rows are skipped.
pub fn plot_robustness(rows: &[ReportRow], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (kind, file, xlabel) in [
        ("blur", "robustness_blur.svg", "Gaussian blur sigma"),
        ("jpeg", "robustness_jpeg.svg", "JPEG quality"),
    ] {
        let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for r in rows.iter().filter(|r| r.perturbation_kind == kind) {
            if let Some(v) = r.perturbation_value {
                series
                    .entry(r.model.as_str())
                    .or_default()
                    .push((v, 100.0 * r.accuracy));
            }
        }
        if series.is_empty() {
            continue;
        }
        for pts in series.values_mut() {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
        let (xmin, xmax) = series
            .values()
            .flatten()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                (lo.min(p.0), hi.max(p.0))
            });
        let pad = ((xmax - xmin) * 0.05).max(0.5);
        let path = out_dir.join(file);
        {
            let root = SVGBackend::new(&path, (640, 420)).into_drawing_area();
            root.fill(&WHITE).map_err(plot_err)?;
            let mut chart = ChartBuilder::on(&root)
                .margin(12)
                .x_label_area_size(40)
                .y_label_area_size(50)
                .build_cartesian_2d((xmin - pad)..(xmax + pad), 0.0..100.0)
                .map_err(plot_err)?;
            chart
                .configure_mesh()
                .x_desc(xlabel)
                .y_desc("Accuracy (%)")
                .draw()
                .map_err(plot_err)?;
            for (i, (model, pts)) in series.iter().enumerate() {
                let color = PALETTE[i % PALETTE.len()];
                chart
                    .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
                    .map_err(plot_err)?
                    .label(*model)
                    .legend(move |(x, y)| {
                        PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2))
                    });
                chart
                    .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                    .map_err(plot_err)?;
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .position(SeriesLabelPosition::LowerLeft)
                .draw()
                .map_err(plot_err)?;
            root.present().map_err(plot_err)?;
        }
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(kind: &str, value: Option<f64>, model: &str, accuracy: f64) -> ReportRow {
        ReportRow {
            perturbation_kind: kind.into(),
            perturbation_value: value,
            model: model.into(),
            accuracy,
            f1_fake: accuracy,
            f1_real: accuracy,
            n: 10,
            degenerate: String::new(),
        }
    }

    #[test]
    fn writes_both_panels() {
        let mut rows = vec![row("clean", None, "fused", 1.0)];
        for (i, s) in [3.0, 5.0, 7.0].iter().enumerate() {
            rows.push(row("blur", Some(*s), "fused", 0.9 - 0.1 * i as f64));
            rows.push(row("blur", Some(*s), "spatial", 0.8 - 0.1 * i as f64));
        }
        rows.push(row("jpeg", Some(90.0), "fused", 0.7));
        let dir = tempfile::tempdir().unwrap();
        let files = plot_robustness(&rows, dir.path()).unwrap();
        assert_eq!(files.len(), 2);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("spatial"));

        let clean_only = plot_robustness(&rows[..1], dir.path()).unwrap();
        assert!(clean_only.is_empty());
    }
}
