use super::{Lattice, LutError, QuantizedLut, RealLut};
use crate::par::{self, Execution};

/// Evaluates `oracle` once per lattice point, in point order.
///
/// The oracle receives the lattice intensities (`coord * 2^q`, so the top
/// point sits at 256) and writes `m` outputs. The first failing point, in
/// lattice order, is reported.
fn evaluate<F>(exec: Execution, lattice: Lattice, m: usize, oracle: &F) -> Result<Vec<f64>, LutError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), String> + Sync,
{
    let n = lattice.n();
    let rows = par::map_range(exec, lattice.num_points(), |point| {
        let coords = lattice.point_coords(point);
        let inputs: Vec<f64> = coords.iter().map(|&c| lattice.coord_value(c)).collect();
        debug_assert_eq!(inputs.len(), n);
        let mut out = vec![0.0; m];
        oracle(&inputs, &mut out)
            .map(|()| out)
            .map_err(|message| LutError::Oracle { coord: coords, message })
    });
    let mut values = Vec::with_capacity(lattice.num_points() * m);
    for row in rows {
        values.extend(row?);
    }
    Ok(values)
}

/// Bakes an oracle into a quantized table.
///
/// Outputs are rounded half away from zero and clamped to the representable
/// range; the number of clamped values is returned alongside the table.
pub fn bake<F>(
    oracle: F,
    q: u8,
    n: usize,
    m: usize,
    bit_depth: u8,
    signed: bool,
) -> Result<(QuantizedLut, usize), LutError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), String> + Sync,
{
    let mut lut = QuantizedLut::new(q, n, m, bit_depth, signed)?;
    let values = evaluate(Execution::Parallel, lut.lattice(), m, &oracle)?;
    let mut clamped = 0;
    for (flat, v) in values.into_iter().enumerate() {
        if lut.set(flat / m, flat % m, v) {
            clamped += 1;
        }
    }
    Ok((lut, clamped))
}

/// Bakes an oracle into a real-valued table (no quantization).
pub fn bake_real<F>(oracle: F, q: u8, n: usize, m: usize) -> Result<RealLut, LutError>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), String> + Sync,
{
    let lattice = Lattice::new(q, n)?;
    if m == 0 {
        return Err(LutError::Outputs);
    }
    let values = evaluate(Execution::Parallel, lattice, m, &oracle)?;
    RealLut::from_values(q, n, m, values)
}
