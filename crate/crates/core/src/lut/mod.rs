//! Lookup tables sampled on a regular lattice over 8-bit intensities.
//!
//! A table with sampling interval `q` places `2^(8-q) + 1` lattice points on
//! each of its `n` input axes (values `0, 2^q, 2*2^q, ..., 256`) and stores
//! `m` outputs per point, row-major over lattice coordinates with the `m`
//! outputs of one point contiguous. Queries blend the `2^n` corners of the
//! enclosing cell with multilinear weights.

mod bake;
mod format;

pub use bake::{bake, bake_real};
pub use format::{read_header, Header, Lut, FLAG_FLOAT, FLAG_SIGNED, FORMAT_VERSION, HEADER_LEN, MAGIC};

use thiserror::Error;

/// Largest supported input dimensionality.
pub const MAX_DIMS: usize = 8;
/// Corner count of a cell at [`MAX_DIMS`].
pub const MAX_CORNERS: usize = 1 << MAX_DIMS;

#[derive(Debug, Error)]
pub enum LutError {
    #[error("sampling interval exponent q={0} outside 1..=7")]
    Interval(u8),
    #[error("input dimensionality n={0} outside 1..={MAX_DIMS}")]
    Dims(usize),
    #[error("output count m must be at least 1")]
    Outputs,
    #[error("unsupported bit depth {0}")]
    BitDepth(u32),
    #[error("input {value} on axis {axis} is outside [0, 255]")]
    InputDomain { axis: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("oracle failed at lattice point {coord:?}: {message}")]
    Oracle { coord: Vec<usize>, message: String },
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    Version(u16),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch: header {stored:#010x}, payload {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("invalid header: {0}")]
    Header(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Byte count of a table: `(2^(8-q) + 1)^n * m * bit_depth / 8`.
pub fn storage_bytes(q: u8, n: usize, m: usize, bit_depth: u32) -> Result<u64, LutError> {
    if bit_depth == 0 || bit_depth % 8 != 0 {
        return Err(LutError::BitDepth(bit_depth));
    }
    let lattice = Lattice::new(q, n)?;
    if m == 0 {
        return Err(LutError::Outputs);
    }
    Ok(lattice.num_points() as u64 * m as u64 * u64::from(bit_depth / 8))
}

/// Geometry of the sampling lattice: interval exponent and input count.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    q: u8,
    n: usize,
    per_dim: usize,
}

impl Lattice {
    pub fn new(q: u8, n: usize) -> Result<Self, LutError> {
        if !(1..=7).contains(&q) {
            return Err(LutError::Interval(q));
        }
        if n == 0 || n > MAX_DIMS {
            return Err(LutError::Dims(n));
        }
        Ok(Self {
            q,
            n,
            per_dim: (1usize << (8 - q)) + 1,
        })
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Bin width `2^q` in intensity units.
    pub fn interval(&self) -> f64 {
        f64::from(1u32 << self.q)
    }

    /// Lattice points per axis, `2^(8-q) + 1`.
    pub fn points_per_dim(&self) -> usize {
        self.per_dim
    }

    pub fn num_points(&self) -> usize {
        self.per_dim.pow(self.n as u32)
    }

    /// Flat-index stride of axis `d` (axis 0 is most significant).
    pub fn stride(&self, d: usize) -> usize {
        self.per_dim.pow((self.n - 1 - d) as u32)
    }

    pub fn point_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.n);
        coords.iter().fold(0, |acc, &c| acc * self.per_dim + c)
    }

    pub fn point_coords(&self, mut index: usize) -> Vec<usize> {
        let mut coords = vec![0; self.n];
        for c in coords.iter_mut().rev() {
            *c = index % self.per_dim;
            index /= self.per_dim;
        }
        coords
    }

    /// Intensity at lattice coordinate `c` (the top coordinate maps to 256).
    pub fn coord_value(&self, c: usize) -> f64 {
        (c << self.q) as f64
    }

    fn split(&self, axis: usize, v: f64) -> Result<(usize, f64), LutError> {
        if !(0.0..=255.0).contains(&v) {
            return Err(LutError::InputDomain { axis, value: v });
        }
        let interval = self.interval();
        // v <= 255 keeps base <= 2^(8-q) - 1, so base + 1 is always a valid coordinate.
        let base = (v / interval).floor();
        Ok((base as usize, (v - base * interval) / interval))
    }

    fn check_len(&self, patch: &[f64]) -> Result<(), LutError> {
        if patch.len() != self.n {
            return Err(LutError::DimensionMismatch {
                expected: self.n,
                got: patch.len(),
            });
        }
        Ok(())
    }

    /// Splits a patch into its enclosing cell and per-axis fractions.
    pub fn decompose(&self, patch: &[f64]) -> Result<LatticeQuery, LutError> {
        self.check_len(patch)?;
        let mut base_index = Vec::with_capacity(self.n);
        let mut fractions = Vec::with_capacity(self.n);
        for (d, &v) in patch.iter().enumerate() {
            let (b, f) = self.split(d, v)?;
            base_index.push(b);
            fractions.push(f);
        }
        Ok(LatticeQuery {
            base_index,
            fractions,
        })
    }

    /// Lattice points and multilinear weights of the cell enclosing `patch`.
    ///
    /// Axes with a zero fraction contribute a single corner, so a patch on
    /// the lattice yields exactly one corner with weight 1.
    pub fn corners(&self, patch: &[f64]) -> Result<Corners, LutError> {
        self.check_len(patch)?;
        let mut corners = Corners::default();
        let mut base = 0usize;
        let mut fracs = [0.0f64; MAX_DIMS];
        for (d, &v) in patch.iter().enumerate() {
            let (b, f) = self.split(d, v)?;
            base = base * self.per_dim + b;
            fracs[d] = f;
        }
        corners.points[0] = base;
        corners.weights[0] = 1.0;
        corners.len = 1;
        for (d, &f) in fracs.iter().enumerate().take(self.n) {
            if f == 0.0 {
                continue;
            }
            let stride = self.stride(d);
            let len = corners.len;
            for c in 0..len {
                let w = corners.weights[c];
                corners.points[len + c] = corners.points[c] + stride;
                corners.weights[len + c] = w * f;
                corners.weights[c] = w * (1.0 - f);
            }
            corners.len = 2 * len;
        }
        Ok(corners)
    }
}

/// A patch decomposed into its enclosing cell.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeQuery {
    /// `floor(v / 2^q)` per axis.
    pub base_index: Vec<usize>,
    /// Position inside the cell per axis, in `[0, 1)`.
    pub fractions: Vec<f64>,
}

/// Corners of one interpolation cell with their blend weights.
#[derive(Clone, Debug)]
pub struct Corners {
    len: usize,
    points: [usize; MAX_CORNERS],
    weights: [f64; MAX_CORNERS],
}

impl Default for Corners {
    fn default() -> Self {
        Self {
            len: 0,
            points: [0; MAX_CORNERS],
            weights: [0.0; MAX_CORNERS],
        }
    }
}

impl Corners {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// `(lattice point index, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.points[..self.len]
            .iter()
            .copied()
            .zip(self.weights[..self.len].iter().copied())
    }
}

/// Read access to dequantized table values.
pub trait LatticeTable {
    fn lattice(&self) -> Lattice;
    /// Outputs per lattice point.
    fn outputs(&self) -> usize;
    /// Value at flat index `point * outputs + channel`.
    fn value(&self, flat: usize) -> f64;
}

/// Blends the values at `corners` into `out` (length `outputs`).
#[inline]
pub fn interpolate<T: LatticeTable + ?Sized>(table: &T, corners: &Corners, out: &mut [f64]) {
    let m = table.outputs();
    debug_assert_eq!(out.len(), m);
    out.fill(0.0);
    for (p, w) in corners.iter() {
        let base = p * m;
        for (c, o) in out.iter_mut().enumerate() {
            *o += w * table.value(base + c);
        }
    }
}

/// Multilinear query of `table` at `patch`, written into `out`.
pub fn query_into<T: LatticeTable + ?Sized>(
    table: &T,
    patch: &[f64],
    out: &mut [f64],
) -> Result<(), LutError> {
    if out.len() != table.outputs() {
        return Err(LutError::DimensionMismatch {
            expected: table.outputs(),
            got: out.len(),
        });
    }
    let corners = table.lattice().corners(patch)?;
    interpolate(table, &corners, out);
    Ok(())
}

/// Multilinear query of `table` at `patch`. Results are not clamped.
pub fn query<T: LatticeTable + ?Sized>(table: &T, patch: &[f64]) -> Result<Vec<f64>, LutError> {
    let mut out = vec![0.0; table.outputs()];
    query_into(table, patch, &mut out)?;
    Ok(out)
}

/// Anything that maps an `inputs()`-pixel patch to `outputs()` reals.
///
/// Pipelines hold stages as trait objects so stored tables, real-valued
/// tables and direct oracle functions are interchangeable.
pub trait PatchTable: Send + Sync {
    fn inputs(&self) -> usize;
    fn outputs(&self) -> usize;
    fn eval(&self, patch: &[f64], out: &mut [f64]) -> Result<(), LutError>;
    /// Bytes of table storage backing this map (0 for direct functions).
    fn storage_bytes(&self) -> u64 {
        0
    }
}

/// 8- or 16-bit table, optionally storing signed values with a midpoint bias.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedLut {
    lattice: Lattice,
    m: usize,
    bit_depth: u8,
    signed: bool,
    k: u32,
    codes: Vec<u16>,
}

impl QuantizedLut {
    /// A table whose every entry encodes the value 0.
    pub fn new(q: u8, n: usize, m: usize, bit_depth: u8, signed: bool) -> Result<Self, LutError> {
        let lattice = Lattice::new(q, n)?;
        if m == 0 {
            return Err(LutError::Outputs);
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(LutError::BitDepth(u32::from(bit_depth)));
        }
        let zero = if signed { 1u16 << (bit_depth - 1) } else { 0 };
        Ok(Self {
            lattice,
            m,
            bit_depth,
            signed,
            k: 0,
            codes: vec![zero; lattice.num_points() * m],
        })
    }

    pub fn from_codes(
        q: u8,
        n: usize,
        m: usize,
        bit_depth: u8,
        signed: bool,
        codes: Vec<u16>,
    ) -> Result<Self, LutError> {
        let mut lut = Self::new(q, n, m, bit_depth, signed)?;
        if codes.len() != lut.codes.len() {
            return Err(LutError::DimensionMismatch {
                expected: lut.codes.len(),
                got: codes.len(),
            });
        }
        let max = lut.max_code();
        if let Some(&c) = codes.iter().find(|&&c| u32::from(c) > max) {
            return Err(LutError::Header(format!(
                "code {c} exceeds {}-bit range",
                bit_depth
            )));
        }
        lut.codes = codes;
        Ok(lut)
    }

    /// Marks the table as a coefficient table serving `k` orientations.
    pub fn with_orientations(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn q(&self) -> u8 {
        self.lattice.q
    }

    pub fn n(&self) -> usize {
        self.lattice.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Orientation count for coefficient tables, 0 otherwise.
    pub fn orientations(&self) -> u32 {
        self.k
    }

    pub fn codes(&self) -> &[u16] {
        &self.codes
    }

    pub fn entry_count(&self) -> usize {
        self.codes.len()
    }

    pub fn storage_bytes(&self) -> u64 {
        (self.codes.len() * usize::from(self.bit_depth / 8)) as u64
    }

    fn max_code(&self) -> u32 {
        (1u32 << self.bit_depth) - 1
    }

    /// Code offset representing zero (`2^(B-1)` for signed tables).
    pub fn bias(&self) -> i32 {
        if self.signed {
            1 << (self.bit_depth - 1)
        } else {
            0
        }
    }

    /// Smallest and largest representable values.
    pub fn value_range(&self) -> (f64, f64) {
        let bias = f64::from(self.bias());
        (-bias, f64::from(self.max_code()) - bias)
    }

    /// Rounds half away from zero and clamps. The flag reports clamping.
    pub fn quantize(&self, value: f64) -> (u16, bool) {
        let (lo, hi) = self.value_range();
        let r = value.round();
        let clamped = r < lo || r > hi || r.is_nan();
        let r = if r.is_nan() { 0.0 } else { r.clamp(lo, hi) };
        ((r + f64::from(self.bias())) as u16, clamped)
    }

    pub fn dequantize(&self, code: u16) -> f64 {
        f64::from(i32::from(code) - self.bias())
    }

    pub fn get(&self, point: usize, channel: usize) -> f64 {
        self.dequantize(self.codes[point * self.m + channel])
    }

    /// Stores `value` (quantized). Returns whether it was clamped.
    pub fn set(&mut self, point: usize, channel: usize, value: f64) -> bool {
        let (code, clamped) = self.quantize(value);
        self.codes[point * self.m + channel] = code;
        clamped
    }
}

impl LatticeTable for QuantizedLut {
    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn outputs(&self) -> usize {
        self.m
    }

    #[inline]
    fn value(&self, flat: usize) -> f64 {
        self.dequantize(self.codes[flat])
    }
}

impl PatchTable for QuantizedLut {
    fn inputs(&self) -> usize {
        self.lattice.n
    }

    fn outputs(&self) -> usize {
        self.m
    }

    fn eval(&self, patch: &[f64], out: &mut [f64]) -> Result<(), LutError> {
        query_into(self, patch, out)
    }

    fn storage_bytes(&self) -> u64 {
        QuantizedLut::storage_bytes(self)
    }
}

/// Table with real-valued (f64) entries.
#[derive(Clone, Debug, PartialEq)]
pub struct RealLut {
    lattice: Lattice,
    m: usize,
    k: u32,
    values: Vec<f64>,
}

impl RealLut {
    pub fn zeros(q: u8, n: usize, m: usize) -> Result<Self, LutError> {
        let lattice = Lattice::new(q, n)?;
        if m == 0 {
            return Err(LutError::Outputs);
        }
        Ok(Self {
            lattice,
            m,
            k: 0,
            values: vec![0.0; lattice.num_points() * m],
        })
    }

    pub fn from_values(q: u8, n: usize, m: usize, values: Vec<f64>) -> Result<Self, LutError> {
        let mut lut = Self::zeros(q, n, m)?;
        if values.len() != lut.values.len() {
            return Err(LutError::DimensionMismatch {
                expected: lut.values.len(),
                got: values.len(),
            });
        }
        lut.values = values;
        Ok(lut)
    }

    pub fn with_orientations(mut self, k: u32) -> Self {
        self.k = k;
        self
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn orientations(&self) -> u32 {
        self.k
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Storage at 64 bits per value.
    pub fn storage_bytes(&self) -> u64 {
        (self.values.len() * 8) as u64
    }
}

impl LatticeTable for RealLut {
    fn lattice(&self) -> Lattice {
        self.lattice
    }

    fn outputs(&self) -> usize {
        self.m
    }

    #[inline]
    fn value(&self, flat: usize) -> f64 {
        self.values[flat]
    }
}

impl PatchTable for RealLut {
    fn inputs(&self) -> usize {
        self.lattice.n
    }

    fn outputs(&self) -> usize {
        self.m
    }

    fn eval(&self, patch: &[f64], out: &mut [f64]) -> Result<(), LutError> {
        query_into(self, patch, out)
    }

    fn storage_bytes(&self) -> u64 {
        RealLut::storage_bytes(self)
    }
}

/// A direct patch function used in place of a table (oracles, references).
pub struct FnTable<F> {
    n: usize,
    m: usize,
    f: F,
}

impl<F> FnTable<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    pub fn new(n: usize, m: usize, f: F) -> Self {
        Self { n, m, f }
    }
}

impl<F> PatchTable for FnTable<F>
where
    F: Fn(&[f64], &mut [f64]) + Send + Sync,
{
    fn inputs(&self) -> usize {
        self.n
    }

    fn outputs(&self) -> usize {
        self.m
    }

    fn eval(&self, patch: &[f64], out: &mut [f64]) -> Result<(), LutError> {
        if patch.len() != self.n {
            return Err(LutError::DimensionMismatch {
                expected: self.n,
                got: patch.len(),
            });
        }
        (self.f)(patch, out);
        Ok(())
    }
}
