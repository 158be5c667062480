//! Raster file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "DOCR"
//! 4       2     version (u16, = 1)
//! 6       4     width (u32)
//! 10      4     height (u32)
//! 14      1     dtype: 1 = f32, 2 = u16, 3 = bit-packed mask
//! 15      1     reserved (0)
//! 16      ...   row-major payload
//! ```
//!
//! Every multi-byte field is little-endian. Masks pack pixels in row-major
//! order, eight per byte, least significant bit first, with the final byte
//! zero-padded.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{invalid, DociError, Result};

pub const MAGIC: &[u8; 4] = b"DOCR";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Dtype {
    F32 = 1,
    U16 = 2,
    Mask = 3,
}

impl Dtype {
    fn from_code(code: u8) -> Result<Self> {
        match code {
            1 => Ok(Dtype::F32),
            2 => Ok(Dtype::U16),
            3 => Ok(Dtype::Mask),
            other => Err(DociError::UnsupportedDtype(other)),
        }
    }

    pub fn payload_len(self, width: usize, height: usize) -> usize {
        let n = width * height;
        match self {
            Dtype::F32 => 4 * n,
            Dtype::U16 => 2 * n,
            Dtype::Mask => n.div_ceil(8),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::U16 => "u16",
            Dtype::Mask => "mask",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RasterData {
    F32(Array2<f32>),
    U16(Array2<u16>),
    Mask(Array2<bool>),
}

impl RasterData {
    pub fn dtype(&self) -> Dtype {
        match self {
            RasterData::F32(_) => Dtype::F32,
            RasterData::U16(_) => Dtype::U16,
            RasterData::Mask(_) => Dtype::Mask,
        }
    }

    /// `(height, width)`.
    pub fn dim(&self) -> (usize, usize) {
        match self {
            RasterData::F32(a) => a.dim(),
            RasterData::U16(a) => a.dim(),
            RasterData::Mask(a) => a.dim(),
        }
    }

    /// Narrow an `f64` raster to `f32`.
    pub fn from_f64(raster: &Array2<f64>) -> Self {
        RasterData::F32(raster.mapv(|v| v as f32))
    }

    pub fn to_f64(&self) -> Option<Array2<f64>> {
        match self {
            RasterData::F32(a) => Some(a.mapv(f64::from)),
            RasterData::U16(a) => Some(a.mapv(f64::from)),
            RasterData::Mask(_) => None,
        }
    }

    pub fn into_mask(self) -> Option<Array2<bool>> {
        match self {
            RasterData::Mask(m) => Some(m),
            _ => None,
        }
    }
}

pub fn encode(raster: &RasterData) -> Result<Vec<u8>> {
    let (h, w) = raster.dim();
    let (w32, h32) = (u32::try_from(w), u32::try_from(h));
    let (Ok(w32), Ok(h32)) = (w32, h32) else {
        return Err(invalid("raster dimensions exceed u32"));
    };
    let dtype = raster.dtype();
    let mut out = Vec::with_capacity(HEADER_LEN + dtype.payload_len(w, h));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.push(dtype as u8);
    out.push(0);
    match raster {
        RasterData::F32(a) => {
            if let Some(((row, col), _)) = a.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(DociError::NonFinite { row, col });
            }
            a.iter()
                .for_each(|v| out.extend_from_slice(&v.to_le_bytes()));
        }
        RasterData::U16(a) => a
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        RasterData::Mask(a) => {
            let mut packed = vec![0u8; dtype.payload_len(w, h)];
            for (i, &bit) in a.iter().enumerate() {
                if bit {
                    packed[i / 8] |= 1 << (i % 8);
                }
            }
            out.extend_from_slice(&packed);
        }
    }
    Ok(out)
}

/// Parse a raster; the buffer must hold exactly one header and payload.
pub fn decode(bytes: &[u8]) -> Result<RasterData> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(DociError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(DociError::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(DociError::UnsupportedVersion(version));
    }
    let w = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let dtype = Dtype::from_code(bytes[14])?;
    let expected = HEADER_LEN + dtype.payload_len(w, h);
    // A length mismatch in either direction means the file is not what the
    // header describes.
    if bytes.len() != expected {
        return Err(DociError::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    let payload = &bytes[HEADER_LEN..];
    let data = match dtype {
        Dtype::F32 => {
            let values: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(DociError::NonFinite {
                    row: i / w.max(1),
                    col: i % w.max(1),
                });
            }
            RasterData::F32(Array2::from_shape_vec((h, w), values).expect("length checked"))
        }
        Dtype::U16 => {
            let values = payload
                .chunks_exact(2)
                .map(|c| u16::from_le_bytes([c[0], c[1]]))
                .collect();
            RasterData::U16(Array2::from_shape_vec((h, w), values).expect("length checked"))
        }
        Dtype::Mask => {
            let values = (0..w * h)
                .map(|i| payload[i / 8] >> (i % 8) & 1 == 1)
                .collect();
            RasterData::Mask(Array2::from_shape_vec((h, w), values).expect("length checked"))
        }
    };
    Ok(data)
}

pub fn write_raster(path: impl AsRef<Path>, raster: &RasterData) -> Result<()> {
    fs::write(path, encode(raster)?)?;
    Ok(())
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<RasterData> {
    decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_by_two_f32_is_32_bytes() {
        let bytes = encode(&RasterData::F32(array![[1.0, 2.0], [3.0, 4.0]])).unwrap();
        assert_eq!(bytes.len(), 32);
        assert_eq!(&bytes[..4], b"DOCR");
        assert_eq!(&bytes[16..20], &1.0f32.to_le_bytes());
    }

    #[test]
    fn mask_packing() {
        let m = array![
            [true, false, true],
            [false, false, false],
            [false, false, true]
        ];
        let bytes = encode(&RasterData::Mask(m.clone())).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 2);
        assert_eq!(bytes[16], 0b0000_0101);
        assert_eq!(bytes[17], 0b0000_0001);
        assert_eq!(decode(&bytes).unwrap(), RasterData::Mask(m));
    }

    #[test]
    fn error_paths() {
        let good = encode(&RasterData::U16(array![[1, 2], [3, 4]])).unwrap();
        assert!(matches!(
            decode(&good[..good.len() - 1]),
            Err(DociError::TruncatedPayload { .. })
        ));
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(DociError::BadMagic)));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(
            decode(&bad),
            Err(DociError::UnsupportedVersion(2))
        ));
        let mut bad = good;
        bad[14] = 9;
        assert!(matches!(decode(&bad), Err(DociError::UnsupportedDtype(9))));
        assert!(encode(&RasterData::F32(array![[f32::NAN]])).is_err());
    }
}
