//! Basis-set reuse: an in-process cache keyed by layout and grid, and a binary file format.
//!
//! File layout (little endian): magic `PTBS`, format version `u32`, layout hash as a
//! length-prefixed UTF-8 string, grid spec (`nx`, `ny` as `u64`; `x_min`, `y_min`,
//! `spacing` as `f64`), basis count `u64`, then per basis a length-prefixed id, an RF flag
//! byte and `(nx+1)(ny+1)` values.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::sync::{Arc, Mutex};

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{solve_basis, BasisPotential, BasisSet, SolverError};
use crate::geometry::TrapLayout;
use crate::grid::{GridSpec, ScalarGrid};

const MAGIC: &[u8; 4] = b"PTBS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not a basis cache file")]
    BadMagic,
    #[error("cache format version {0} is not supported")]
    Version(u32),
    #[error("cache was built for a different layout or grid")]
    HashMismatch,
    #[error("corrupt cache file: {0}")]
    Corrupt(&'static str),
}

/// Hex SHA-256 over the layout, the grid and the solver format version.
pub fn layout_hash(layout: &TrapLayout, grid: &GridSpec) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(layout).expect("layout serializes"));
    h.update(grid.key().as_bytes());
    h.update(FORMAT_VERSION.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Solved basis sets shared between sweep workers.
#[derive(Debug, Default)]
pub struct BasisCache {
    inner: Mutex<HashMap<String, Arc<BasisSet>>>,
}

impl BasisCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_solve(&self, layout: &TrapLayout, grid: GridSpec, tol: f64) -> Result<Arc<BasisSet>, SolverError> {
        let key = layout_hash(layout, &grid);
        if let Some(hit) = self.inner.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let set = Arc::new(solve_basis(layout, grid, tol)?);
        self.inner.lock().expect("cache lock").insert(key, set.clone());
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn write_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u64).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> io::Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_str<R: Read>(r: &mut R) -> Result<String, CacheError> {
    let n = read_u64(r)? as usize;
    if n > 1 << 16 {
        return Err(CacheError::Corrupt("string length"));
    }
    let mut b = vec![0u8; n];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| CacheError::Corrupt("utf-8"))
}

pub fn write_cache<W: Write>(mut w: W, set: &BasisSet) -> Result<(), CacheError> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_str(&mut w, &set.layout_hash)?;
    let g = &set.grid;
    w.write_all(&(g.nx as u64).to_le_bytes())?;
    w.write_all(&(g.ny as u64).to_le_bytes())?;
    for v in [g.x_min, g.y_min, g.spacing] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&(set.bases.len() as u64).to_le_bytes())?;
    for b in &set.bases {
        write_str(&mut w, &b.electrode_id)?;
        w.write_all(&[u8::from(set.rf_ids.contains(&b.electrode_id))])?;
        for v in &b.values.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Read a cache file; `expected_hash` guards against stale files.
pub fn read_cache<R: Read>(mut r: R, expected_hash: Option<&str>) -> Result<BasisSet, CacheError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let mut vb = [0u8; 4];
    r.read_exact(&mut vb)?;
    let version = u32::from_le_bytes(vb);
    if version != FORMAT_VERSION {
        return Err(CacheError::Version(version));
    }
    let layout_hash = read_str(&mut r)?;
    if expected_hash.is_some_and(|h| h != layout_hash) {
        return Err(CacheError::HashMismatch);
    }
    let nx = read_u64(&mut r)? as usize;
    let ny = read_u64(&mut r)? as usize;
    let (x_min, y_min, spacing) = (read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?);
    let grid = GridSpec::new(nx, ny, x_min, y_min, spacing).map_err(|_| CacheError::Corrupt("grid"))?;
    let count = read_u64(&mut r)? as usize;
    if count > 1024 {
        return Err(CacheError::Corrupt("basis count"));
    }
    let mut bases = Vec::with_capacity(count);
    let mut rf_ids = Vec::new();
    for _ in 0..count {
        let id = read_str(&mut r)?;
        let mut flag = [0u8; 1];
        r.read_exact(&mut flag)?;
        if flag[0] == 1 {
            rf_ids.push(id.clone());
        }
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            values.push(read_f64(&mut r)?);
        }
        bases.push(BasisPotential { electrode_id: id, values: ScalarGrid { spec: grid, values } });
    }
    Ok(BasisSet { layout_hash, grid, rf_ids, bases })
}
