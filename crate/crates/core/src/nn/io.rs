//! Weight file format, all integers little-endian:
//!
//! ```text
//! b"TSCW"  u32 version
//! u32 len, arch (utf-8)
//! u32 count
//! per parameter: u32 len, name (utf-8), u32 rows, u32 cols, rows*cols f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{Matrix, NnError, ParamStore};

const MAGIC: &[u8; 4] = b"TSCW";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn write_weights<W: Write>(store: &ParamStore, mut w: W) -> Result<(), NnError> {
    w.write_all(MAGIC)?;
    w.write_all(&WEIGHTS_VERSION.to_le_bytes())?;
    write_str(&mut w, store.arch())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for (name, m) in store.iter() {
        write_str(&mut w, name)?;
        w.write_all(&(m.rows() as u32).to_le_bytes())?;
        w.write_all(&(m.cols() as u32).to_le_bytes())?;
        for v in m.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_weights<R: Read>(mut r: R) -> Result<ParamStore, NnError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| NnError::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(NnError::Format("not a weight file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != WEIGHTS_VERSION {
        return Err(NnError::Format(format!("unsupported weight file version {version}")));
    }
    let mut store = ParamStore::new(read_str(&mut r)?);
    let count = read_u32(&mut r)?;
    for _ in 0..count {
        let name = read_str(&mut r)?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let n = rows.checked_mul(cols).filter(|&n| n <= 1 << 24).ok_or_else(|| NnError::Format("oversized matrix".into()))?;
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| NnError::Format("truncated data".into()))?;
            data.push(f64::from_le_bytes(buf));
        }
        store.insert(&name, Matrix::new(rows, cols, data)?)?;
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NnError::Format("trailing bytes".into()));
    }
    Ok(store)
}

pub fn weights_to_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_weights(store, &mut buf).expect("in-memory write");
    buf
}

pub fn save_weights(store: &ParamStore, path: &Path) -> Result<(), NnError> {
    std::fs::write(path, weights_to_bytes(store))?;
    Ok(())
}

pub fn load_weights(path: &Path) -> Result<ParamStore, NnError> {
    read_weights(std::fs::File::open(path)?)
}

fn write_str<W: Write>(w: &mut W, s: &str) -> Result<(), NnError> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| NnError::Format("truncated integer".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, NnError> {
    let len = read_u32(r)? as usize;
    if len > 4096 {
        return Err(NnError::Format("oversized string".into()));
    }
    let mut b = vec![0u8; len];
    r.read_exact(&mut b).map_err(|_| NnError::Format("truncated string".into()))?;
    String::from_utf8(b).map_err(|_| NnError::Format("invalid utf-8".into()))
}
