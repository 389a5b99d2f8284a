//! Binary persistence of solution tables.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"ESTC1"  u32 version
//! u32 len, model name (UTF-8)
//! u32 len, field configuration (JSON)
//! u64 entry count
//! per entry: u64 global index, 32 x f64 (row-major, re/im interleaved)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::coupling::FieldConfig;
use crate::engine::SolutionTable;
use crate::error::{Error, Result};
use crate::lattice::point_of;
use crate::spinor::SpinorBlock;

pub const MAGIC: &[u8; 5] = b"ESTC1";
pub const VERSION: u32 = 1;

pub fn write_table<W: Write>(mut w: W, table: &SolutionTable) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    write_str(&mut w, &table.model_name)?;
    write_str(&mut w, &table.field.to_json())?;
    w.write_all(&(table.len() as u64).to_le_bytes())?;
    for (index, _, block) in table.iter() {
        w.write_all(&(index as u64).to_le_bytes())?;
        for v in block.to_reals() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_table<R: Read>(mut r: R) -> Result<SolutionTable> {
    let mut magic = [0u8; 5];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Format("not a solution file (bad magic)".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported solution file version {version}")));
    }
    let model_name = read_str(&mut r)?;
    let field = FieldConfig::from_json(&read_str(&mut r)?)
        .map_err(|e| Error::CorruptData(format!("field configuration: {e}")))?;
    let count = read_u64(&mut r)?;

    let mut blocks = Vec::with_capacity(count.min(1 << 20) as usize);
    let mut previous: Option<u64> = None;
    for _ in 0..count {
        let index = read_u64(&mut r)?;
        if previous.is_some_and(|p| p >= index) {
            return Err(Error::CorruptData("entries are not in strictly increasing index order".into()));
        }
        previous = Some(index);
        let index = i64::try_from(index)
            .map_err(|_| Error::CorruptData(format!("index {index} out of range")))?;
        let mut reals = [0.0f64; 32];
        for v in reals.iter_mut() {
            let mut b = [0u8; 8];
            r.read_exact(&mut b).map_err(truncated)?;
            *v = f64::from_le_bytes(b);
            if !v.is_finite() {
                return Err(Error::CorruptData(format!("non-finite value at index {index}")));
            }
        }
        blocks.push((point_of(index)?, SpinorBlock::from_reals(&reals)));
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::CorruptData("trailing bytes after last entry".into()));
    }
    SolutionTable::new(model_name, field, blocks)
}

pub fn save(path: impl AsRef<Path>, table: &SolutionTable) -> Result<()> {
    write_table(BufWriter::new(File::create(path)?), table)
}

pub fn load(path: impl AsRef<Path>) -> Result<SolutionTable> {
    read_table(BufReader::new(File::open(path)?))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::CorruptData("file is truncated".into())
    } else {
        Error::Io(e)
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<()> {
    let len = u32::try_from(s.len()).map_err(|_| Error::Overflow("string length"))?;
    w.write_all(&len.to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 24 {
        return Err(Error::CorruptData(format!("string length {len} is implausible")));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(truncated)?;
    String::from_utf8(b).map_err(|_| Error::CorruptData("string is not UTF-8".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::LatticePoint;
    use crate::spinor::C64;

    fn sample() -> SolutionTable {
        let cfg = FieldConfig::free([0.0, 0.0, 0.04], 1.2, 1.0).unwrap();
        let b = |k: f64| SpinorBlock::from_fn(|i, j| C64::new(k + i as f64, -(j as f64) * k));
        SolutionTable::new(
            "sample",
            cfg,
            [
                (LatticePoint::new(1, 0, 0, 1).unwrap(), b(2.0)),
                (LatticePoint::ORIGIN, b(1.0)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let t = sample();
        let mut buf = Vec::new();
        write_table(&mut buf, &t).unwrap();
        assert_eq!(buf.len(), 5 + 4 + 4 + 6 + 4 + t.field.to_json().len() + 8 + 2 * (8 + 256));
        let back = read_table(buf.as_slice()).unwrap();
        assert_eq!(back.model_name, "sample");
        assert_eq!(back.field, t.field);
        let a: Vec<_> = t.iter().map(|(i, p, b)| (i, *p, *b)).collect();
        let b: Vec<_> = back.iter().map(|(i, p, b)| (i, *p, *b)).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn corruption_is_detected() {
        let mut buf = Vec::new();
        write_table(&mut buf, &sample()).unwrap();

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(read_table(bad.as_slice()), Err(Error::Format(_))));

        let short = &buf[..buf.len() - 3];
        assert!(matches!(read_table(short), Err(Error::CorruptData(_))));

        let mut long = buf.clone();
        long.push(0);
        assert!(matches!(read_table(long.as_slice()), Err(Error::CorruptData(_))));

        let mut nan = buf.clone();
        let last = nan.len() - 8;
        nan[last..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(read_table(nan.as_slice()), Err(Error::CorruptData(_))));
    }
}
