//! Little-endian primitives shared by the binary containers.

use crate::error::{Error, Result};
use std::io::{Read, Write};

pub(crate) fn put_u8(w: &mut impl Write, v: u8) -> std::io::Result<()> {
    w.write_all(&[v])
}

pub(crate) fn put_u32(w: &mut impl Write, v: u32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_i32(w: &mut impl Write, v: i32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_f32(w: &mut impl Write, v: f32) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

pub(crate) fn put_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    put_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())
}

pub(crate) fn put_f32s(w: &mut impl Write, v: &[f32]) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(v.len() * 4);
    for x in v {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    w.write_all(&buf)
}

fn short(e: std::io::Error) -> Error {
    Error::Format(format!("truncated container: {e}"))
}

pub(crate) fn get_bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(short)?;
    Ok(b)
}

pub(crate) fn get_u8(r: &mut impl Read) -> Result<u8> {
    Ok(get_bytes::<1>(r)?[0])
}

pub(crate) fn get_u32(r: &mut impl Read) -> Result<u32> {
    Ok(u32::from_le_bytes(get_bytes(r)?))
}

pub(crate) fn get_i32(r: &mut impl Read) -> Result<i32> {
    Ok(i32::from_le_bytes(get_bytes(r)?))
}

pub(crate) fn get_f32(r: &mut impl Read) -> Result<f32> {
    Ok(f32::from_le_bytes(get_bytes(r)?))
}

pub(crate) fn get_str(r: &mut impl Read) -> Result<String> {
    let n = get_u32(r)? as usize;
    if n > 1 << 24 {
        return Err(Error::Format(format!("string length {n} is implausible")));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b).map_err(short)?;
    String::from_utf8(b).map_err(|e| Error::Format(format!("invalid utf-8: {e}")))
}

pub(crate) fn get_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f32>> {
    let mut b = vec![0u8; n * 4];
    r.read_exact(&mut b).map_err(short)?;
    Ok(b.chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

pub(crate) fn expect_magic(r: &mut impl Read, magic: &[u8; 8]) -> Result<()> {
    let got: [u8; 8] = get_bytes(r)?;
    if &got != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&got),
            String::from_utf8_lossy(magic)
        )));
    }
    Ok(())
}

/// Write to a sibling temp file and rename over the target.
pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(d) = dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    static SEQ: std::sync::atomic::AtomicU64 = std::sync::atomic::AtomicU64::new(0);
    let seq = SEQ.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".tmp.{}.{}", std::process::id(), seq));
    let tmp = path.with_file_name(name);
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
