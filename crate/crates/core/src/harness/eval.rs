//! Metric reports as CSV.

use std::path::Path;

use super::{csv_error, HarnessError};
use crate::image::ImageBuffer;
use crate::metrics::{evaluate, EvalOptions, MetricReport};

/// Scores `(name, reference, output)` triples; rows keep the input order.
pub fn evaluate_all<'a>(
    dataset: &str,
    items: impl IntoIterator<Item = (String, &'a ImageBuffer, &'a ImageBuffer)>,
    opts: EvalOptions,
) -> Result<MetricReport, HarnessError> {
    let mut report = MetricReport::default();
    for (name, reference, output) in items {
        report.push(evaluate(dataset, &name, reference, output, opts)?);
    }
    Ok(report)
}

/// One row per image plus the mean row.
pub fn write_metric_csv(report: &MetricReport, path: impl AsRef<Path>) -> Result<(), HarnessError> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in report.rows.iter().chain(report.aggregate().as_ref()) {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}
