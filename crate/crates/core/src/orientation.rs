//! Quarter-turn rotation group, kernel patterns and oriented table queries.
//!
//! Offsets are `(row, col)` displacements with rows growing downward. One
//! quarter turn maps `(dr, dc)` to `(-dc, dr)`. A table queried through
//! rotated offsets sees the neighbourhood in a rotated frame, so its output
//! block is mapped back by applying the same quarter turns to the block's
//! cell positions (about the block centre).

use std::collections::HashSet;

use thiserror::Error;

use crate::image::ImageBuffer;
use crate::lut::{LutError, PatchTable};

#[derive(Debug, Error)]
pub enum OrientationError {
    #[error("patch position ({row}, {col}) lies outside the {width}x{height} image")]
    OutOfBounds {
        row: isize,
        col: isize,
        width: usize,
        height: usize,
    },
    #[error("output block of {0} values is neither 1 nor a perfect square")]
    NotSquare(usize),
    #[error("invalid kernel pattern: {0}")]
    Pattern(String),
    #[error("invalid orientation set: {0}")]
    Orientations(String),
    #[error(transparent)]
    Lut(#[from] LutError),
}

/// A counter-clockwise rotation by a whole number of quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rotation(u8);

impl Rotation {
    pub const IDENTITY: Rotation = Rotation(0);

    pub fn new(quarter_turns: u8) -> Self {
        Rotation(quarter_turns % 4)
    }

    pub fn quarter_turns(self) -> u8 {
        self.0
    }

    pub fn inverse(self) -> Self {
        Rotation((4 - self.0) % 4)
    }

    pub fn then(self, other: Rotation) -> Self {
        Rotation((self.0 + other.0) % 4)
    }

    pub fn apply(self, (dr, dc): (isize, isize)) -> (isize, isize) {
        (0..self.0).fold((dr, dc), |(r, c), _| (-c, r))
    }
}

/// The rotations whose oriented predictions are fused.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrientationSet {
    rotations: Vec<Rotation>,
}

impl Default for OrientationSet {
    fn default() -> Self {
        Self::quarter_turns()
    }
}

impl OrientationSet {
    /// All four rotations, 0 to 270 degrees.
    pub fn quarter_turns() -> Self {
        Self {
            rotations: (0..4).map(Rotation).collect(),
        }
    }

    pub fn new(rotations: Vec<Rotation>) -> Result<Self, OrientationError> {
        if rotations.is_empty() {
            return Err(OrientationError::Orientations("empty".into()));
        }
        let unique: HashSet<_> = rotations.iter().collect();
        if unique.len() != rotations.len() {
            return Err(OrientationError::Orientations("duplicate rotation".into()));
        }
        Ok(Self { rotations })
    }

    /// The first `k` quarter turns.
    pub fn first(k: usize) -> Result<Self, OrientationError> {
        if !(1..=4).contains(&k) {
            return Err(OrientationError::Orientations(format!("k={k} outside 1..=4")));
        }
        Self::new((0..k as u8).map(Rotation).collect())
    }

    pub fn k(&self) -> usize {
        self.rotations.len()
    }

    pub fn rotations(&self) -> &[Rotation] {
        &self.rotations
    }
}

/// Pixel offsets read by a table, relative to the anchor.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KernelPattern {
    name: String,
    offsets: Vec<(isize, isize)>,
}

impl KernelPattern {
    pub fn new(name: impl Into<String>, offsets: Vec<(isize, isize)>) -> Result<Self, OrientationError> {
        let name = name.into();
        if !offsets.contains(&(0, 0)) {
            return Err(OrientationError::Pattern(format!("{name}: missing anchor (0, 0)")));
        }
        let unique: HashSet<_> = offsets.iter().collect();
        if unique.len() != offsets.len() {
            return Err(OrientationError::Pattern(format!("{name}: duplicate offset")));
        }
        Ok(Self { name, offsets })
    }

    /// 2x2 square: anchor, right, below, below-right.
    pub fn square() -> Self {
        Self::new("S", vec![(0, 0), (0, 1), (1, 0), (1, 1)]).unwrap()
    }

    /// Long-range diagonal.
    pub fn diagonal() -> Self {
        Self::new("D", vec![(0, 0), (1, 1), (2, 2), (3, 3)]).unwrap()
    }

    pub fn y_shape() -> Self {
        Self::new("Y", vec![(0, 0), (1, 1), (1, -1), (2, 0)]).unwrap()
    }

    /// Looks up a shipped pattern by name (`S`, `D`, `Y`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "S" | "s" => Some(Self::square()),
            "D" | "d" => Some(Self::diagonal()),
            "Y" | "y" => Some(Self::y_shape()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    pub fn n(&self) -> usize {
        self.offsets.len()
    }

    /// Largest offset magnitude along either axis; invariant under rotation.
    pub fn reach(&self) -> usize {
        self.offsets
            .iter()
            .map(|&(r, c)| r.unsigned_abs().max(c.unsigned_abs()))
            .max()
            .unwrap_or(0)
    }

    pub fn rotated_offsets(&self, rotation: Rotation) -> Vec<(isize, isize)> {
        self.offsets.iter().map(|&o| rotation.apply(o)).collect()
    }
}

/// Reads the pattern's pixels around `anchor` through rotated offsets.
pub fn rotate_patch(
    image: &ImageBuffer,
    anchor: (isize, isize),
    pattern: &KernelPattern,
    rotation: Rotation,
) -> Result<Vec<f64>, OrientationError> {
    pattern
        .offsets()
        .iter()
        .map(|&o| {
            let (dr, dc) = rotation.apply(o);
            let (row, col) = (anchor.0 + dr, anchor.1 + dc);
            image.get_checked(row, col).ok_or(OrientationError::OutOfBounds {
                row,
                col,
                width: image.width(),
                height: image.height(),
            })
        })
        .collect()
}

fn block_side(m: usize) -> Result<usize, OrientationError> {
    let side = (m as f64).sqrt().round() as usize;
    if side * side != m || m == 0 {
        return Err(OrientationError::NotSquare(m));
    }
    Ok(side)
}

/// Destination index of every cell of a rotated-frame output block.
///
/// Cell `(i, j)` of a `side x side` block moves to `(side-1-j, i)` per
/// quarter turn, the same rotation the patch offsets received.
pub fn block_permutation(m: usize, rotation: Rotation) -> Result<Vec<usize>, OrientationError> {
    let side = block_side(m)?;
    Ok((0..m)
        .map(|idx| {
            let (mut i, mut j) = (idx / side, idx % side);
            for _ in 0..rotation.quarter_turns() {
                (i, j) = (side - 1 - j, i);
            }
            i * side + j
        })
        .collect())
}

/// Maps a block produced in the rotated frame back to the image frame.
pub fn unrotate_output(block: &[f64], rotation: Rotation) -> Result<Vec<f64>, OrientationError> {
    let perm = block_permutation(block.len(), rotation)?;
    let mut out = vec![0.0; block.len()];
    for (src, &dst) in perm.iter().enumerate() {
        out[dst] = block[src];
    }
    Ok(out)
}

/// Rotate, query, and un-rotate once per orientation.
pub fn oriented_predictions(
    image: &ImageBuffer,
    anchor: (isize, isize),
    pattern: &KernelPattern,
    table: &dyn PatchTable,
    orientations: &OrientationSet,
) -> Result<Vec<Vec<f64>>, OrientationError> {
    if table.inputs() != pattern.n() {
        return Err(LutError::DimensionMismatch {
            expected: table.inputs(),
            got: pattern.n(),
        }
        .into());
    }
    let mut raw = vec![0.0; table.outputs()];
    orientations
        .rotations()
        .iter()
        .map(|&r| {
            let patch = rotate_patch(image, anchor, pattern, r)?;
            table.eval(&patch, &mut raw)?;
            unrotate_output(&raw, r)
        })
        .collect()
}
