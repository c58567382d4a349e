use std::sync::Arc;

use super::model::{TrainableLut, TrainableModel, TrainablePooling};
use super::TrainError;
use crate::lut::{Lut, PatchTable, QuantizedLut};
use crate::par::Execution;
use crate::pipeline::{PipelineConfig, PipelineError};
use crate::pooling::{softmax_in_place, CoeffLut, PoolingSpec};

/// Quantization summary of an export.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ExportReport {
    pub entries: usize,
    /// Largest `|dequantized - value|` over entries that fit the code range.
    pub max_error: f64,
    /// Entries outside the representable range, stored at the nearest bound.
    pub clamped: usize,
}

impl ExportReport {
    fn merge(&mut self, o: ExportReport) {
        self.entries += o.entries;
        self.max_error = self.max_error.max(o.max_error);
        self.clamped += o.clamped;
    }
}

/// Rounds every entry (in table units) to a `bit_depth` code.
pub fn export_table(t: &TrainableLut, bit_depth: u8, signed: bool) -> Result<(QuantizedLut, ExportReport), TrainError> {
    let lattice = t.lattice();
    let mut lut = QuantizedLut::new(lattice.q(), lattice.n(), t.m(), bit_depth, signed)?;
    let mut report = ExportReport {
        entries: t.params.len(),
        ..Default::default()
    };
    let mut codes = Vec::with_capacity(t.params.len());
    for i in 0..t.params.len() {
        let v = t.value(i);
        if !v.is_finite() {
            return Err(TrainError::Config(format!("entry {i} is not finite")));
        }
        let (code, clamped) = lut.quantize(v);
        if clamped {
            report.clamped += 1;
        } else {
            report.max_error = report.max_error.max((lut.dequantize(code) - v).abs());
        }
        codes.push(code);
    }
    lut = QuantizedLut::from_codes(lattice.q(), lattice.n(), t.m(), bit_depth, signed, codes)?;
    Ok((lut, report))
}

/// Stores `round(255 * softmax(logits))` per lattice point as unsigned
/// 8-bit weights. Errors are reported in code units.
pub fn export_coefficients(t: &TrainableLut) -> Result<(QuantizedLut, ExportReport), TrainError> {
    let lattice = t.lattice();
    let k = t.m();
    let mut codes = Vec::with_capacity(t.params.len());
    let mut report = ExportReport {
        entries: t.params.len(),
        ..Default::default()
    };
    let mut alpha = vec![0.0; k];
    for logits in t.params.values.chunks_exact(k) {
        for (a, &z) in alpha.iter_mut().zip(logits) {
            *a = z * t.scale();
        }
        softmax_in_place(&mut alpha);
        for &a in &alpha {
            let w = 255.0 * a;
            let code = w.round();
            report.max_error = report.max_error.max((code - w).abs());
            codes.push(code as u16);
        }
    }
    let lut = QuantizedLut::from_codes(lattice.q(), lattice.n(), k, 8, false, codes)?.with_orientations(k as u32);
    Ok((lut, report))
}

/// Integer tables of a trained model and the pipeline that reads them.
#[derive(Clone, Debug)]
pub struct ExportedModel {
    pub tables: Vec<QuantizedLut>,
    pub coefficients: Option<QuantizedLut>,
    pub report: ExportReport,
    pub config: PipelineConfig,
}

impl TrainableModel {
    /// Residual tables are signed (bias `2^(B-1)`); direct tables unsigned.
    pub fn export(&self, bit_depth: u8, execution: Execution) -> Result<ExportedModel, TrainError> {
        let mut report = ExportReport::default();
        let mut tables = Vec::new();
        for t in &self.tables {
            let (lut, r) = export_table(t, bit_depth, self.residual)?;
            report.merge(r);
            tables.push(lut);
        }
        let (pooling, coefficients) = match &self.pooling {
            TrainablePooling::Oap(c) => {
                let (lut, r) = export_coefficients(c)?;
                report.merge(r);
                let k = self.orientations.k();
                let coeff = CoeffLut::new(Lut::Quantized(lut.clone()), k).map_err(PipelineError::from)?;
                (PoolingSpec::Oap(coeff), Some(lut))
            }
            _ => (self.to_pipeline(execution)?.pooling, None),
        };
        let shared: Vec<Arc<dyn PatchTable>> = tables.iter().map(|t| Arc::new(t.clone()) as Arc<dyn PatchTable>).collect();
        let config = self.pipeline_with(shared, pooling, execution);
        Ok(ExportedModel {
            tables,
            coefficients,
            report,
            config,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn integral_entries_are_lossless() {
        let mut t = TrainableLut::zeros(6, 2, 3, 255.0).unwrap();
        for (i, v) in t.params.values.iter_mut().enumerate() {
            *v = ((i % 200) as f64 - 100.0) / 255.0;
        }
        let (lut, rep) = export_table(&t, 8, true).unwrap();
        assert_eq!(rep.clamped, 0);
        assert!(rep.max_error < 1e-9);
        for i in 0..t.params.len() {
            assert!((lut.get(i / 3, i % 3) - t.value(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn signed_bias_example() {
        let mut t = TrainableLut::zeros(6, 1, 1, 1.0).unwrap();
        t.params.values[0] = -3.4;
        let (lut, _) = export_table(&t, 8, true).unwrap();
        assert_eq!(lut.codes()[0], 125);
    }

    #[test]
    fn random_table_within_half_step() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let mut t = TrainableLut::zeros(5, 3, 2, 255.0).unwrap();
        t.params.values.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        let (lut, rep) = export_table(&t, 8, true).unwrap();
        assert_eq!(rep.clamped, 0);
        assert!(rep.max_error <= 0.5);
        for i in 0..t.params.len() {
            assert!((lut.get(i / 2, i % 2) - t.value(i)).abs() <= 0.5);
        }
        t.params.values[0] = 1.0;
        assert_eq!(export_table(&t, 8, true).unwrap().1.clamped, 1);
    }

    #[test]
    fn zero_logits_export_to_equal_weights() {
        let t = TrainableLut::zeros(5, 4, 4, 1.0).unwrap();
        let (lut, rep) = export_coefficients(&t).unwrap();
        assert!(lut.codes().iter().all(|&c| c == 64));
        assert_eq!(lut.orientations(), 4);
        assert!(rep.max_error <= 0.5);
        assert_eq!(lut.storage_bytes(), 26_244);
    }
}
