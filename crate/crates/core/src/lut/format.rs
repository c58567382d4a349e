//! Little-endian table container.
//!
//! ```text
//! offset  size  field
//!      0     4  magic "ALUT"
//!      4     2  format version (1)
//!      6     2  flags: bit0 signed (bias 2^(B-1)), bit1 IEEE float payload
//!      8     1  q
//!      9     1  n
//!     10     1  bit depth B
//!     11     1  reserved (0)
//!     12     4  m
//!     16     4  k (orientation count for coefficient tables, else 0)
//!     20     8  entry count ((2^(8-q)+1)^n * m)
//!     28     4  CRC-32 of the payload
//!     32     -  payload: entry count values of B/8 bytes each
//! ```
//!
//! Integer payloads hold 8- or 16-bit codes. Float payloads (bit depth 64)
//! hold f64 values and back real-valued tables and optimizer state.

use std::fs;
use std::io::Read;
use std::path::Path;

use super::{Lattice, LatticeTable, LutError, PatchTable, QuantizedLut, RealLut};

pub const MAGIC: [u8; 4] = *b"ALUT";
pub const FORMAT_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 32;
pub const FLAG_SIGNED: u16 = 1;
pub const FLAG_FLOAT: u16 = 1 << 1;

/// Decoded container header.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub flags: u16,
    pub q: u8,
    pub n: u8,
    pub bit_depth: u8,
    pub m: u32,
    pub k: u32,
    pub entry_count: u64,
    pub crc32: u32,
}

impl Header {
    pub fn is_signed(&self) -> bool {
        self.flags & FLAG_SIGNED != 0
    }

    pub fn is_float(&self) -> bool {
        self.flags & FLAG_FLOAT != 0
    }

    /// Payload length implied by the header.
    pub fn payload_bytes(&self) -> u64 {
        self.entry_count * u64::from(self.bit_depth / 8)
    }

    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(&MAGIC);
        b[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        b[6..8].copy_from_slice(&self.flags.to_le_bytes());
        b[8] = self.q;
        b[9] = self.n;
        b[10] = self.bit_depth;
        b[12..16].copy_from_slice(&self.m.to_le_bytes());
        b[16..20].copy_from_slice(&self.k.to_le_bytes());
        b[20..28].copy_from_slice(&self.entry_count.to_le_bytes());
        b[28..32].copy_from_slice(&self.crc32.to_le_bytes());
        b
    }

    /// Parses and validates the first [`HEADER_LEN`] bytes.
    pub fn parse(bytes: &[u8]) -> Result<Self, LutError> {
        if bytes.len() < HEADER_LEN {
            return Err(LutError::Truncated {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(LutError::BadMagic(magic));
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let version = u16_at(4);
        if version != FORMAT_VERSION {
            return Err(LutError::Version(version));
        }
        let header = Header {
            flags: u16_at(6),
            q: bytes[8],
            n: bytes[9],
            bit_depth: bytes[10],
            m: u32_at(12),
            k: u32_at(16),
            entry_count: u64::from_le_bytes(bytes[20..28].try_into().unwrap()),
            crc32: u32_at(28),
        };
        header.validate()?;
        Ok(header)
    }

    fn validate(&self) -> Result<(), LutError> {
        if self.flags & !(FLAG_SIGNED | FLAG_FLOAT) != 0 {
            return Err(LutError::Header(format!("unknown flags {:#06x}", self.flags)));
        }
        match (self.is_float(), self.bit_depth) {
            (true, 64) | (false, 8) | (false, 16) => {}
            (float, b) => {
                return Err(LutError::Header(format!(
                    "bit depth {b} invalid for {} payload",
                    if float { "float" } else { "integer" }
                )))
            }
        }
        if self.is_float() && self.is_signed() {
            return Err(LutError::Header("float payloads cannot be biased".into()));
        }
        let lattice = Lattice::new(self.q, usize::from(self.n))?;
        if self.m == 0 {
            return Err(LutError::Outputs);
        }
        let expected = lattice.num_points() as u64 * u64::from(self.m);
        if self.entry_count != expected {
            return Err(LutError::Header(format!(
                "entry count {} does not match lattice ({expected})",
                self.entry_count
            )));
        }
        Ok(())
    }
}

/// Reads only the header of a table file.
pub fn read_header(path: impl AsRef<Path>) -> Result<Header, LutError> {
    let mut buf = [0u8; HEADER_LEN];
    let mut file = fs::File::open(path)?;
    let mut filled = 0;
    while filled < HEADER_LEN {
        let got = file.read(&mut buf[filled..])?;
        if got == 0 {
            break;
        }
        filled += got;
    }
    Header::parse(&buf[..filled])
}

fn split_payload(bytes: &[u8]) -> Result<(Header, &[u8]), LutError> {
    let header = Header::parse(bytes)?;
    let payload = &bytes[HEADER_LEN..];
    let expected = header.payload_bytes() as usize;
    if payload.len() < expected {
        return Err(LutError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(LutError::Header(format!(
            "{} trailing bytes after payload",
            payload.len() - expected
        )));
    }
    let computed = crc32fast::hash(payload);
    if computed != header.crc32 {
        return Err(LutError::Checksum {
            stored: header.crc32,
            computed,
        });
    }
    Ok((header, payload))
}

fn assemble(mut header: Header, payload: Vec<u8>) -> Vec<u8> {
    header.crc32 = crc32fast::hash(&payload);
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
    out.extend_from_slice(&header.encode());
    out.extend(payload);
    out
}

impl QuantizedLut {
    pub fn header(&self) -> Header {
        Header {
            flags: if self.is_signed() { FLAG_SIGNED } else { 0 },
            q: self.q(),
            n: self.n() as u8,
            bit_depth: self.bit_depth(),
            m: self.m() as u32,
            k: self.orientations(),
            entry_count: self.entry_count() as u64,
            crc32: 0,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: Vec<u8> = match self.bit_depth() {
            8 => self.codes().iter().map(|&c| c as u8).collect(),
            _ => self.codes().iter().flat_map(|c| c.to_le_bytes()).collect(),
        };
        assemble(self.header(), payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LutError> {
        match Lut::from_bytes(bytes)? {
            Lut::Quantized(l) => Ok(l),
            Lut::Real(_) => Err(LutError::Header("expected an integer payload".into())),
        }
    }
}

impl RealLut {
    pub fn header(&self) -> Header {
        Header {
            flags: FLAG_FLOAT,
            q: self.lattice().q(),
            n: self.lattice().n() as u8,
            bit_depth: 64,
            m: self.m() as u32,
            k: self.orientations(),
            entry_count: self.values().len() as u64,
            crc32: 0,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.values().iter().flat_map(|v| v.to_le_bytes()).collect();
        assemble(self.header(), payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LutError> {
        match Lut::from_bytes(bytes)? {
            Lut::Real(l) => Ok(l),
            Lut::Quantized(_) => Err(LutError::Header("expected a float payload".into())),
        }
    }
}

/// A table loaded from a container of either payload kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Lut {
    Quantized(QuantizedLut),
    Real(RealLut),
}

impl Lut {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LutError> {
        let (h, payload) = split_payload(bytes)?;
        let (q, n, m) = (h.q, usize::from(h.n), h.m as usize);
        if h.is_float() {
            let values = payload
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            Ok(Lut::Real(RealLut::from_values(q, n, m, values)?.with_orientations(h.k)))
        } else {
            let codes = match h.bit_depth {
                8 => payload.iter().map(|&b| u16::from(b)).collect(),
                _ => payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]))
                    .collect(),
            };
            Ok(Lut::Quantized(
                QuantizedLut::from_codes(q, n, m, h.bit_depth, h.is_signed(), codes)?
                    .with_orientations(h.k),
            ))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Lut::Quantized(l) => l.to_bytes(),
            Lut::Real(l) => l.to_bytes(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, LutError> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), LutError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn header(&self) -> Header {
        match self {
            Lut::Quantized(l) => l.header(),
            Lut::Real(l) => l.header(),
        }
    }

    pub fn lattice(&self) -> Lattice {
        match self {
            Lut::Quantized(l) => l.lattice(),
            Lut::Real(l) => l.lattice(),
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Lut::Quantized(l) => l.m(),
            Lut::Real(l) => l.m(),
        }
    }

    pub fn orientations(&self) -> u32 {
        match self {
            Lut::Quantized(l) => l.orientations(),
            Lut::Real(l) => l.orientations(),
        }
    }

    /// Dequantized copy with real-valued storage.
    pub fn to_real(&self) -> RealLut {
        match self {
            Lut::Real(l) => l.clone(),
            Lut::Quantized(l) => {
                let values = (0..l.entry_count()).map(|i| l.value(i)).collect();
                RealLut::from_values(l.q(), l.n(), l.m(), values)
                    .expect("shape taken from a valid table")
                    .with_orientations(l.orientations())
            }
        }
    }
}

impl From<QuantizedLut> for Lut {
    fn from(l: QuantizedLut) -> Self {
        Lut::Quantized(l)
    }
}

impl From<RealLut> for Lut {
    fn from(l: RealLut) -> Self {
        Lut::Real(l)
    }
}

impl PatchTable for Lut {
    fn inputs(&self) -> usize {
        self.lattice().n()
    }

    fn outputs(&self) -> usize {
        self.m()
    }

    fn eval(&self, patch: &[f64], out: &mut [f64]) -> Result<(), LutError> {
        match self {
            Lut::Quantized(l) => l.eval(patch, out),
            Lut::Real(l) => l.eval(patch, out),
        }
    }

    fn storage_bytes(&self) -> u64 {
        match self {
            Lut::Quantized(l) => l.storage_bytes(),
            Lut::Real(l) => l.storage_bytes(),
        }
    }
}
