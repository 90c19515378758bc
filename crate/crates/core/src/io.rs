//! File formats: the binary field dump and the CSV/JSON artifact emitters.
//!
//! Field dump layout (all little-endian): magic `QCTG`, version u32 = 1,
//! n_q u32, n_p u32, then q_min q_max p_min p_max t ħ as six f64, a kind u32
//! (0 = wigner, 1 = classical), and n_q·n_p f64 values row-major with q as
//! the outer index. Round trips are bit exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{FieldKind, PhaseSpaceField, PhaseSpaceGrid};

pub const FIELD_MAGIC: &[u8; 4] = b"QCTG";
pub const FIELD_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic: not a field dump")]
    BadMagic,
    #[error("unsupported field dump version {0}")]
    VersionMismatch(u32),
    #[error("corrupt field dump: {0}")]
    Corrupt(&'static str),
}

pub fn write_field(field: &PhaseSpaceField, path: &Path) -> Result<(), FieldIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&FIELD_VERSION.to_le_bytes())?;
    w.write_all(&(field.grid.n_q as u32).to_le_bytes())?;
    w.write_all(&(field.grid.n_p as u32).to_le_bytes())?;
    for v in [
        field.grid.q_min,
        field.grid.q_max,
        field.grid.p_min,
        field.grid.p_max,
        field.t,
        field.hbar,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&field.kind.as_u32().to_le_bytes())?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_field(path: &Path) -> Result<PhaseSpaceField, FieldIoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(|_| FieldIoError::BadMagic)?;
    if &magic != FIELD_MAGIC {
        return Err(FieldIoError::BadMagic);
    }
    let version = read_u32(&mut r)?;
    if version != FIELD_VERSION {
        return Err(FieldIoError::VersionMismatch(version));
    }
    let n_q = read_u32(&mut r)? as usize;
    let n_p = read_u32(&mut r)? as usize;
    let q_min = read_f64(&mut r)?;
    let q_max = read_f64(&mut r)?;
    let p_min = read_f64(&mut r)?;
    let p_max = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let hbar = read_f64(&mut r)?;
    let kind = FieldKind::from_u32(read_u32(&mut r)?)
        .ok_or(FieldIoError::Corrupt("unknown field kind"))?;
    let grid = PhaseSpaceGrid::new(q_min, q_max, p_min, p_max, n_q, n_p)
        .map_err(|_| FieldIoError::Corrupt("invalid grid header"))?;
    let mut values = vec![0.0f64; grid.len()];
    let mut buf = [0u8; 8];
    for v in &mut values {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    // A valid dump ends exactly here.
    if r.read(&mut buf)? != 0 {
        return Err(FieldIoError::Corrupt("trailing bytes after field data"));
    }
    Ok(PhaseSpaceField {
        grid,
        values,
        t,
        hbar,
        kind,
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32, FieldIoError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64, FieldIoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// f64 in the shortest form that parses back to the identical bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// Slice CSV: header `q,f`, one row per grid node.
pub fn write_slice_csv(rows: &[(f64, f64)], path: &Path) -> Result<(), FieldIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q,f")?;
    for &(q, f) in rows {
        writeln!(w, "{},{}", fmt_f64(q), fmt_f64(f))?;
    }
    w.flush()?;
    Ok(())
}

/// Comparison CSV: header `q,f_classical,f_quantum`.
pub fn write_comparison_csv(
    rows: &[(f64, f64, f64)],
    path: &Path,
) -> Result<(), FieldIoError> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "q,f_classical,f_quantum")?;
    for &(q, fc, fq) in rows {
        writeln!(w, "{},{},{}", fmt_f64(q), fmt_f64(fc), fmt_f64(fq))?;
    }
    w.flush()?;
    Ok(())
}
