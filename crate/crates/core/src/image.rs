//! Grayscale raster with real-valued working precision.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ImageError {
    #[error("image dimensions must be at least 1x1, got {width}x{height}")]
    Empty { width: usize, height: usize },
    #[error("pixel buffer holds {got} values, {width}x{height} needs {expected}")]
    BufferSize {
        width: usize,
        height: usize,
        expected: usize,
        got: usize,
    },
    #[error("image sizes differ: {0:?} vs {1:?}")]
    SizeMismatch((usize, usize), (usize, usize)),
}

/// Row-major grayscale image. Values are intensities on the 0..=255 scale.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Rounds half away from zero and clamps to `[0, 255]`.
pub fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Empty { width, height });
        }
        if data.len() != width * height {
            return Err(ImageError::BufferSize {
                width,
                height,
                expected: width * height,
                got: data.len(),
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self, ImageError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, ImageError> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, data)
    }

    pub fn from_u8(width: usize, height: usize, pixels: &[u8]) -> Result<Self, ImageError> {
        Self::new(width, height, pixels.iter().map(|&p| f64::from(p)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, v: f64) {
        self.data[row * self.width + col] = v;
    }

    /// Pixel at a signed position, or `None` outside the raster.
    pub fn get_checked(&self, row: isize, col: isize) -> Option<f64> {
        if row < 0 || col < 0 || row as usize >= self.height || col as usize >= self.width {
            None
        } else {
            Some(self.get(row as usize, col as usize))
        }
    }

    /// Pixel with coordinates clamped to the raster (replicate boundary).
    #[inline]
    pub fn get_clamped(&self, row: isize, col: isize) -> f64 {
        let r = row.clamp(0, self.height as isize - 1) as usize;
        let c = col.clamp(0, self.width as isize - 1) as usize;
        self.get(r, c)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Clamps to `[0, 255]` without rounding.
    pub fn clamped(&self) -> Self {
        self.map(|v| v.clamp(0.0, 255.0))
    }

    /// Clamps and rounds half away from zero.
    pub fn quantized(&self) -> Self {
        self.map(|v| f64::from(to_u8(v)))
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| to_u8(v)).collect()
    }

    /// Replicate-pads by `pad` pixels on every side.
    pub fn pad_replicate(&self, pad: usize) -> Self {
        let p = pad as isize;
        Self::from_fn(self.width + 2 * pad, self.height + 2 * pad, |r, c| {
            self.get_clamped(r as isize - p, c as isize - p)
        })
        .expect("padding keeps dimensions positive")
    }

    pub fn crop(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Self, ImageError> {
        if row + height > self.height || col + width > self.width {
            return Err(ImageError::SizeMismatch(
                (self.width, self.height),
                (col + width, row + height),
            ));
        }
        Self::from_fn(width, height, |r, c| self.get(row + r, col + c))
    }

    /// Removes `border` pixels from each side (no-op if the image is too small).
    pub fn shave(&self, border: usize) -> Self {
        if border == 0 || 2 * border >= self.width || 2 * border >= self.height {
            return self.clone();
        }
        self.crop(border, border, self.height - 2 * border, self.width - 2 * border)
            .expect("shave stays inside the image")
    }

    /// Rotates the raster 90 degrees counter-clockwise.
    pub fn rotate90(&self) -> Self {
        Self::from_fn(self.height, self.width, |r, c| self.get(c, self.width - 1 - r))
            .expect("rotation keeps dimensions positive")
    }

    /// Rotates counter-clockwise by `turns` quarter turns.
    pub fn rotate(&self, turns: u8) -> Self {
        (0..turns % 4).fold(self.clone(), |img, _| img.rotate90())
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |r, c| self.get(r, self.width - 1 - c))
            .expect("flip keeps dimensions positive")
    }

    /// Element `t` of the dihedral group: `t % 4` counter-clockwise quarter
    /// turns, preceded by a horizontal flip when `t >= 4`.
    pub fn dihedral(&self, t: u8) -> Self {
        let base = if t >= 4 { self.flip_horizontal() } else { self.clone() };
        base.rotate(t % 4)
    }

    pub fn check_same_size(&self, other: &Self) -> Result<(), ImageError> {
        if self.dims() != other.dims() {
            return Err(ImageError::SizeMismatch(self.dims(), other.dims()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_group() {
        let img = ImageBuffer::from_fn(3, 2, |r, c| (r * 3 + c) as f64).unwrap();
        let r = img.rotate90();
        assert_eq!(r.dims(), (2, 3));
        // top-right corner moves to the top-left
        assert_eq!(r.get(0, 0), img.get(0, 2));
        assert_eq!(r.get(2, 0), img.get(0, 0));
        assert_eq!(img.rotate(4), img);
        assert_eq!(img.dihedral(4).dihedral(4), img);
    }

    #[test]
    fn padding_replicates_edges() {
        let img = ImageBuffer::from_fn(2, 2, |r, c| (r * 2 + c) as f64).unwrap();
        let p = img.pad_replicate(2);
        assert_eq!(p.dims(), (6, 6));
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(5, 5), 3.0);
        assert_eq!(p.get(2, 3), 1.0);
    }

    #[test]
    fn quantization_rounds_half_away() {
        assert_eq!(to_u8(2.5), 3);
        assert_eq!(to_u8(-0.4), 0);
        assert_eq!(to_u8(300.0), 255);
        assert_eq!(to_u8(254.49), 254);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(ImageBuffer::new(0, 3, vec![]).is_err());
        assert!(ImageBuffer::new(2, 2, vec![0.0; 3]).is_err());
    }
}
