//! Binary PGM (P5) and PPM (P6) with 8-bit samples.

use std::fs;
use std::path::Path;

use super::HarnessError;
use crate::image::ImageBuffer;
use crate::metrics::rgb_to_y;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PnmImage {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub data: Vec<u8>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Format(msg.into())
}

/// Next header token, skipping whitespace and `#` comments.
fn token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8], HarnessError> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(bad("truncated PNM header"));
    }
    Ok(&bytes[start..*pos])
}

fn number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize, HarnessError> {
    let t = token(bytes, pos)?;
    std::str::from_utf8(t)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| bad(format!("invalid PNM {what}")))
}

pub fn decode(bytes: &[u8]) -> Result<PnmImage, HarnessError> {
    let mut pos = 0;
    let channels = match token(bytes, &mut pos)? {
        b"P5" => 1,
        b"P6" => 3,
        other => return Err(bad(format!("unsupported PNM magic {:?}", String::from_utf8_lossy(other)))),
    };
    let width = number(bytes, &mut pos, "width")?;
    let height = number(bytes, &mut pos, "height")?;
    let maxval = number(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(bad("PNM image has no pixels"));
    }
    if maxval != 255 {
        return Err(bad(format!("only 8-bit PNM (maxval 255) is supported, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let len = width * height * channels;
    let data = bytes
        .get(pos..pos + len)
        .ok_or_else(|| bad(format!("PNM raster truncated: need {len} bytes")))?;
    Ok(PnmImage {
        width,
        height,
        channels,
        data: data.to_vec(),
    })
}

pub fn encode(img: &PnmImage) -> Vec<u8> {
    let magic = if img.channels == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    out
}

pub fn read_pnm(path: impl AsRef<Path>) -> Result<PnmImage, HarnessError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode(&bytes).map_err(|e| HarnessError::Format(format!("{}: {e}", path.display())))
}

impl PnmImage {
    /// Grayscale working image; colour input is reduced to BT.601 luma.
    pub fn to_gray(&self) -> Result<ImageBuffer, HarnessError> {
        if self.channels == 3 {
            Ok(rgb_to_y(self.width, self.height, 3, &self.data)?)
        } else {
            Ok(ImageBuffer::from_u8(self.width, self.height, &self.data)?)
        }
    }

    pub fn from_gray(img: &ImageBuffer) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            channels: 1,
            data: img.to_u8(),
        }
    }
}

/// Reads a PGM or PPM as a grayscale (luma) image.
pub fn read_gray(path: impl AsRef<Path>) -> Result<ImageBuffer, HarnessError> {
    read_pnm(path)?.to_gray()
}

/// Writes an image as 8-bit PGM (rounded, clamped).
pub fn write_pgm(path: impl AsRef<Path>, img: &ImageBuffer) -> Result<(), HarnessError> {
    let path = path.as_ref();
    fs::write(path, encode(&PnmImage::from_gray(img))).map_err(|e| HarnessError::io(path, e))
}
