use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalRow;
use crate::error::{Error, Result};

/// One CSV line of an evaluation or robustness report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub perturbation_kind: String,
    /// Blank for the clean row.
    pub perturbation_value: Option<f64>,
    pub model: String,
    pub accuracy: f64,
    pub f1_fake: f64,
    pub f1_real: f64,
    pub n: usize,
    /// Classes whose F1 had a zero precision or recall denominator,
    /// separated by `;`.
    pub degenerate: String,
}

impl From<&EvalRow> for ReportRow {
    fn from(row: &EvalRow) -> Self {
        let r = &row.report;
        let mut degenerate = Vec::new();
        if r.f1_fake_degenerate {
            degenerate.push("f1_fake");
        }
        if r.f1_real_degenerate {
            degenerate.push("f1_real");
        }
        ReportRow {
            perturbation_kind: row.perturbation.kind().to_string(),
            perturbation_value: row.perturbation.value(),
            model: row.model.clone(),
            accuracy: r.accuracy,
            f1_fake: r.f1_fake,
            f1_real: r.f1_real,
            n: r.n,
            degenerate: degenerate.join(";"),
        }
    }
}

/// Serializes `rows` with a header line to any writer.
pub fn write_report<W: std::io::Write>(writer: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

pub fn write_report_csv(path: &Path, rows: &[ReportRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_report(std::io::BufWriter::new(file), rows)
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!("checked is_io_error"),
        }
    } else {
        Error::Csv(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::evaluation::{MetricsReport, Perturbation};

    #[test]
    fn csv_round_trip() {
        let report =
            MetricsReport::from_labels(&[Label::Real, Label::Fake], &[Label::Fake, Label::Fake])
                .unwrap();
        let rows: Vec<ReportRow> = [
            Perturbation::Clean,
            Perturbation::Blur(3.0),
            Perturbation::Jpeg(90),
        ]
        .into_iter()
        .map(|p| {
            ReportRow::from(&EvalRow {
                perturbation: p,
                model: "frequency".into(),
                report,
            })
        })
        .collect();
        assert_eq!(rows[0].degenerate, "f1_real");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text
            .starts_with("perturbation_kind,perturbation_value,model,accuracy,f1_fake,f1_real,n"));
        assert!(text.contains("\nclean,,frequency,0.5,"));
        assert_eq!(read_report_csv(&path).unwrap(), rows);
        assert!(matches!(
            read_report_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }
}
