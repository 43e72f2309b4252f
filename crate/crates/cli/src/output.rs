//! CSV emission with a fixed numeric format so identical runs produce
//! byte-identical files.

use std::io::Write;
use std::path::Path;

use causalfair_core::error::{Error, Result};
use causalfair_core::propensity::PropensityScores;
use ndarray::Array1;

use crate::harness::{EstimatorSeRow, MetricsRow, TradeoffOutput};

/// Floats rendered at 12 significant digits, integers as integers.
pub fn fmt_float(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    format!("{v:.11e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

fn fmt_opt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

const METRICS_HEADER: [&str; 12] = [
    "method",
    "k",
    "trial",
    "loss",
    "md_pred",
    "md_probs",
    "discrim_pred",
    "infeasible",
    "infeasible_trials",
    "loss_se",
    "md_pred_se",
    "discrim_pred_se",
];

fn metrics_record(row: &MetricsRow) -> Vec<String> {
    vec![
        row.method.name().to_string(),
        fmt_opt_usize(row.method.k()),
        row.trial
            .map(|t| t.to_string())
            .unwrap_or_else(|| "mean".into()),
        fmt_opt(row.loss),
        fmt_opt(row.md_pred),
        fmt_opt(row.md_probs),
        fmt_opt(row.discrim_pred),
        row.infeasible.to_string(),
        fmt_opt_usize(row.infeasible_trials),
        fmt_opt(row.loss_se),
        fmt_opt(row.md_pred_se),
        fmt_opt(row.discrim_pred_se),
    ]
}

/// Writes aggregate rows, preceded by per-trial rows when `per_trial` is
/// set, to `out` (a file path or "-" handled by the caller via a writer).
pub fn write_metrics_csv<W: Write>(
    writer: W,
    output: &TradeoffOutput,
    per_trial: bool,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_HEADER).map_err(csv_error)?;
    if per_trial {
        for row in &output.per_trial {
            w.write_record(metrics_record(row)).map_err(csv_error)?;
        }
    }
    for row in &output.aggregated {
        w.write_record(metrics_record(row)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_estimator_csv<W: Write>(writer: W, rows: &[EstimatorSeRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["estimator", "k", "se", "trials_used"])
        .map_err(csv_error)?;
    for row in rows {
        w.write_record([
            row.estimator.to_string(),
            fmt_opt_usize(row.k),
            fmt_float(row.se),
            row.trials_used.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_scores_csv<W: Write>(
    writer: W,
    scores: &PropensityScores,
    s: &Array1<f64>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["s", "z"]).map_err(csv_error)?;
    for (si, zi) in s.iter().zip(scores.z.iter()) {
        w.write_record([format!("{}", *si as i64), fmt_float(*zi)])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn to_file<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(std::fs::File) -> Result<()>,
{
    let file = std::fs::File::create(path)?;
    write(file)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Validation(format!("csv write failed: {e}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_render_at_twelve_significant_digits() {
        assert_eq!(fmt_float(0.0), "0");
        assert_eq!(fmt_float(1.0), "1.00000000000e0");
        assert_eq!(fmt_float(-0.125), "-1.25000000000e-1");
        assert_eq!(fmt_float(123456789012345.0), "1.23456789012e14");
    }

    #[test]
    fn metrics_csv_has_one_header_and_aggregate_rows_by_default() {
        use causalfair_core::models::Method;
        let row = MetricsRow {
            method: Method::SingleMd,
            trial: None,
            loss: Some(1.5),
            md_pred: Some(0.0),
            md_probs: None,
            discrim_pred: Some(-4.0),
            infeasible: false,
            infeasible_trials: Some(0),
            loss_se: Some(0.1),
            md_pred_se: Some(0.0),
            discrim_pred_se: Some(0.2),
        };
        let output = TradeoffOutput {
            per_trial: vec![],
            aggregated: vec![row],
        };
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &output, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.trim_end().lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("method,k,trial,"));
        assert!(lines[1].starts_with("single_md,,mean,"));
    }
}
