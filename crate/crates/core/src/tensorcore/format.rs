//! `OFFT1` model files.
//!
//! ```text
//! "OFFT" 0x01
//! repeated, in ModelParams::array_names() order:
//!     u16 name length, name bytes (UTF-8)
//!     u8 rank, rank × u32 dims
//!     f32 values, row-major
//! u32 CRC-32 of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use super::{ModelConfig, ModelParams, Real, Tensor};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"OFFT";
pub const FORMAT_VERSION: u8 = 1;

pub fn write_model<F: Real, W: Write>(params: &ModelParams<F>, mut w: W) -> Result<()> {
    let mut buf = Vec::with_capacity(16 + 4 * params.arrays().iter().map(|t| t.len()).sum::<usize>());
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    for (name, array) in ModelParams::<F>::array_names().iter().zip(params.arrays()) {
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.push(array.shape().len() as u8);
        for &d in array.shape() {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in array.data() {
            buf.extend_from_slice(&v.to_f32().unwrap().to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn read_model<F: Real, R: Read>(mut r: R) -> Result<ModelParams<F>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() < MAGIC.len() + 1 + 4 {
        return Err(Error::ModelFormat("file too short".into()));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(Error::ModelFormat(format!(
            "checksum mismatch: stored {stored:08x}, computed {actual:08x}"
        )));
    }
    if &body[..4] != MAGIC {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    if body[4] != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {}", body[4])));
    }

    let mut cur = Cursor { bytes: body, pos: 5 };
    let mut arrays = Vec::new();
    for expected in ModelParams::<F>::array_names() {
        let len = cur.u16()? as usize;
        let name =
            std::str::from_utf8(cur.take(len)?).map_err(|_| Error::ModelFormat("array name is not UTF-8".into()))?;
        if name != expected {
            return Err(Error::ModelFormat(format!(
                "expected array {expected:?}, found {name:?}"
            )));
        }
        let rank = cur.u8()? as usize;
        let shape = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = cur.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::ModelFormat("array too large".into()))?,
        )?;
        let data = raw
            .chunks_exact(4)
            .map(|c| F::from_f32(f32::from_le_bytes(c.try_into().unwrap())).unwrap())
            .collect();
        arrays.push(Tensor::from_vec(&shape, data)?);
    }
    if cur.pos != body.len() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", body.len() - cur.pos)));
    }
    ModelParams::from_arrays(arrays, ModelConfig::DEFAULT_DROPOUT)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelParams<f32> {
        ModelParams::init(ModelConfig::reduced(30), 12).unwrap()
    }

    #[test]
    fn round_trip_is_exact_in_f32() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(&buf[..5], b"OFFT\x01");
        assert_eq!(read_model::<f32, _>(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn layout_of_first_array() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        assert_eq!(u16::from_le_bytes([buf[5], buf[6]]), 9);
        assert_eq!(&buf[7..16], b"embedding");
        assert_eq!(buf[16], 2);
        assert_eq!(u32::from_le_bytes(buf[17..21].try_into().unwrap()), 30);
        assert_eq!(u32::from_le_bytes(buf[21..25].try_into().unwrap()), 8);
    }

    #[test]
    fn corruption_detected() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[40] ^= 0x01;
        assert!(matches!(
            read_model::<f32, _>(bad.as_slice()),
            Err(Error::ModelFormat(_))
        ));
        assert!(read_model::<f32, _>(&buf[..buf.len() - 1]).is_err());
        assert!(read_model::<f32, _>(&b"OFF"[..]).is_err());
    }
}
