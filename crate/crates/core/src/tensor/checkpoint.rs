//! Flat tensor container.
//!
//! ```text
//! magic    4 bytes   b"EQVT"
//! version  1 byte    0x01
//! record*  until EOF
//!   name_len  u64 LE
//!   name      name_len bytes, UTF-8
//!   rank      u64 LE
//!   extents   rank × u64 LE
//!   data      prod(extents) × f64 LE, row-major
//! ```

use std::io::{self, Read, Write};

use super::{NdArray, Scalar};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"EQVT";
pub const VERSION: u8 = 1;

/// Writes named arrays. Values are widened to `f64` on disk.
pub fn write_checkpoint<T: Scalar, W: Write>(mut out: W, records: &[(String, NdArray<T>)]) -> Result<()> {
    out.write_all(&MAGIC)?;
    out.write_all(&[VERSION])?;
    for (name, arr) in records {
        out.write_all(&(name.len() as u64).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(arr.rank() as u64).to_le_bytes())?;
        for &e in arr.shape() {
            out.write_all(&(e as u64).to_le_bytes())?;
        }
        for &v in arr.data() {
            out.write_all(&v.as_f64().to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_u64<R: Read>(r: &mut R) -> Result<Option<u64>> {
    let mut buf = [0u8; 8];
    let mut filled = 0;
    while filled < 8 {
        let n = r.read(&mut buf[filled..])?;
        if n == 0 {
            return if filled == 0 { Ok(None) } else { Err(Error::Checkpoint("truncated integer".into())) };
        }
        filled += n;
    }
    Ok(Some(u64::from_le_bytes(buf)))
}

fn need_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    read_u64(r)?.ok_or_else(|| Error::Checkpoint(format!("unexpected end of file reading {what}")))
}

fn truncated(e: io::Error) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated record".into())
    } else {
        Error::Io(e)
    }
}

/// Reads every record in file order.
pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<Vec<(String, NdArray<T>)>> {
    let mut header = [0u8; 5];
    input.read_exact(&mut header).map_err(truncated)?;
    if header[..4] != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    if header[4] != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", header[4])));
    }
    let mut records = Vec::new();
    while let Some(name_len) = read_u64(&mut input)? {
        let mut name = vec![0u8; name_len as usize];
        input.read_exact(&mut name).map_err(truncated)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("name is not UTF-8".into()))?;
        let rank = need_u64(&mut input, "rank")? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(need_u64(&mut input, "extent")? as usize);
        }
        let count: usize = shape.iter().product();
        let mut bytes = vec![0u8; count * 8];
        input.read_exact(&mut bytes).map_err(truncated)?;
        let data = bytes.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap()))).collect();
        records.push((name, NdArray::new(shape, data)?));
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn byte_layout_is_exact() {
        let arr = NdArray::<f64>::from_f64(vec![2], &[1.0, -2.0]).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("w".to_string(), arr)]).unwrap();
        let mut want = b"EQVT\x01".to_vec();
        want.extend(1u64.to_le_bytes());
        want.push(b'w');
        want.extend(1u64.to_le_bytes());
        want.extend(2u64.to_le_bytes());
        want.extend(1.0f64.to_le_bytes());
        want.extend((-2.0f64).to_le_bytes());
        assert_eq!(buf, want);
    }

    #[test]
    fn rejects_bad_headers_and_truncation() {
        assert!(read_checkpoint::<f64, _>(&b"NOPE\x01"[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"EQVT\x02"[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"EQ"[..]).is_err());
        let arr = NdArray::<f64>::zeros(vec![3]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &[("x".to_string(), arr)]).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_checkpoint::<f64, _>(&buf[..]).is_err());
    }

    #[test]
    fn empty_container_round_trips() {
        let mut buf = Vec::new();
        write_checkpoint::<f64, _>(&mut buf, &[]).unwrap();
        assert!(read_checkpoint::<f64, _>(&buf[..]).unwrap().is_empty());
    }
}
