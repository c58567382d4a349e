//! Instrumented restore runs: timing, query counts, table bytes.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{csv_error, HarnessError};
use crate::image::ImageBuffer;
use crate::metrics::{psnr, EvalOptions};
use crate::pipeline::{query_cost_model, restore_instrumented, PipelineConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub millis: f64,
    pub anchors: u64,
    pub lut_queries: u64,
    pub coeff_queries: u64,
    pub table_bytes: u64,
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

/// Restores one image, checks its query counts against the cost model and
/// scores it against `reference` when given.
pub fn bench_image(
    name: &str,
    input: &ImageBuffer,
    config: &PipelineConfig,
    reference: Option<&ImageBuffer>,
) -> Result<(BenchRow, ImageBuffer), HarnessError> {
    let start = Instant::now();
    let (out, stats) = restore_instrumented(input, config)?;
    let millis = start.elapsed().as_secs_f64() * 1e3;
    let cost = query_cost_model(config);
    let expected = (cost.lut_queries_per_pixel * stats.anchors, cost.coeff_queries_per_pixel * stats.anchors);
    if (stats.lut_queries, stats.coeff_queries) != expected {
        return Err(HarnessError::Invalid(format!(
            "{name}: counted ({}, {}) table/coefficient queries, cost model says ({}, {})",
            stats.lut_queries, stats.coeff_queries, expected.0, expected.1
        )));
    }
    let psnr = match reference {
        Some(r) => {
            let border = EvalOptions::for_scale(config.task.scale()).border;
            r.check_same_size(&out)?;
            Some(psnr(&r.shave(border), &out.shave(border))?)
        }
        None => None,
    };
    let row = BenchRow {
        image: name.to_string(),
        width: input.width(),
        height: input.height(),
        millis,
        anchors: stats.anchors,
        lut_queries: stats.lut_queries,
        coeff_queries: stats.coeff_queries,
        table_bytes: config.table_bytes(),
        psnr,
    };
    Ok((row, out))
}

impl BenchReport {
    pub fn push(&mut self, row: BenchRow) {
        self.rows.push(row);
    }

    /// Sums of time, anchors and queries; PSNR is averaged when every row has one.
    pub fn total(&self) -> BenchRow {
        let mut t = BenchRow {
            image: "total".into(),
            width: 0,
            height: 0,
            millis: 0.0,
            anchors: 0,
            lut_queries: 0,
            coeff_queries: 0,
            table_bytes: self.rows.first().map_or(0, |r| r.table_bytes),
            psnr: None,
        };
        for r in &self.rows {
            t.millis += r.millis;
            t.anchors += r.anchors;
            t.lut_queries += r.lut_queries;
            t.coeff_queries += r.coeff_queries;
        }
        if !self.rows.is_empty() && self.rows.iter().all(|r| r.psnr.is_some()) {
            t.psnr = Some(self.rows.iter().filter_map(|r| r.psnr).sum::<f64>() / self.rows.len() as f64);
        }
        t
    }

    /// CSV with one row per image followed by the total row.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), HarnessError> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        for r in self.rows.iter().chain(std::iter::once(&self.total())) {
            w.serialize(r).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| HarnessError::io(path, e))
    }
}
