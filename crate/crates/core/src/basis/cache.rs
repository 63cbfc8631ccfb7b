//! Binary basis cache.
//!
//! Little-endian layout:
//!
//! | offset | size            | field                                  |
//! |--------|-----------------|----------------------------------------|
//! | 0      | 8               | magic `HAHNBAS\0`                      |
//! | 8      | 4               | format version (`u32`, currently 1)    |
//! | 12     | 1               | lattice kind (0 equidistant, 1 perturbed) |
//! | 13     | 3               | reserved, zero                         |
//! | 16     | 8               | `N` (`u64`), lattice has `N + 1` points |
//! | 24     | 8               | `M` (`u64`), max degree                |
//! | 32     | 8               | `orth_tol` (`f64`)                     |
//! | 40     | 8               | `achieved_orth_err` (`f64`)            |
//! | 48     | 8 (N+1)         | lattice points (`f64`)                 |
//! | ...    | 8 (N+1)(M+1)    | values, row-major: row `j` holds `Q^_0(x_j) .. Q^_M(x_j)` |
//! | ...    | 4 (M+1)         | sweeps per column (`u32`)              |
//!
//! All floats are stored as raw IEEE-754 bits, so a round trip is bit-exact.

use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use super::{build_basis, OrthoBasis};
use crate::error::{Error, Result};
use crate::lattice::{Lattice, LatticeKind};

pub const MAGIC: &[u8; 8] = b"HAHNBAS\0";
pub const FORMAT_VERSION: u32 = 1;

/// Environment variable naming a directory for persisted bases.
pub const CACHE_DIR_ENV: &str = "HAHNFIT_CACHE_DIR";

pub fn write_basis<W: Write>(basis: &OrthoBasis, mut out: W) -> Result<()> {
    let n = basis.len();
    let m = basis.max_degree() + 1;
    let mut buf = Vec::with_capacity(48 + 8 * n * (m + 1) + 4 * m);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    buf.push(match basis.kind() {
        LatticeKind::Equidistant => 0,
        LatticeKind::Perturbed => 1,
    });
    buf.extend_from_slice(&[0u8; 3]);
    buf.extend_from_slice(&(basis.upper() as u64).to_le_bytes());
    buf.extend_from_slice(&(basis.max_degree() as u64).to_le_bytes());
    buf.extend_from_slice(&basis.orth_tol().to_bits().to_le_bytes());
    buf.extend_from_slice(&basis.achieved_orth_err().to_bits().to_le_bytes());
    for x in basis.lattice().points() {
        buf.extend_from_slice(&x.to_bits().to_le_bytes());
    }
    for j in 0..n {
        for k in 0..m {
            buf.extend_from_slice(&basis.value(j, k).to_bits().to_le_bytes());
        }
    }
    for s in basis.sweeps() {
        buf.extend_from_slice(&s.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.data.len())
            .ok_or_else(|| Error::Cache("truncated file".into()))?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }
}

pub fn read_basis<R: Read>(mut input: R) -> Result<OrthoBasis> {
    let mut data = Vec::new();
    input.read_to_end(&mut data)?;
    let mut cur = Cursor { data: &data, pos: 0 };
    if cur.take(8)? != MAGIC {
        return Err(Error::Cache("bad magic".into()));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Cache(format!("unsupported format version {version}")));
    }
    let kind_byte = cur.take(4)?[0];
    let upper = cur.u64()? as usize;
    let max_degree = cur.u64()? as usize;
    if max_degree > upper {
        return Err(Error::Cache(format!("M = {max_degree} exceeds N = {upper}")));
    }
    let orth_tol = cur.f64()?;
    let achieved = cur.f64()?;
    let n = upper + 1;
    let m = max_degree + 1;
    let expected = 48 + 8 * n + 8 * n * m + 4 * m;
    if data.len() != expected {
        return Err(Error::Cache(format!(
            "size mismatch: {} bytes, expected {expected}",
            data.len()
        )));
    }
    let points = (0..n).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
    let lattice = Lattice::new(points)?;
    let stored_kind = match kind_byte {
        0 => LatticeKind::Equidistant,
        1 => LatticeKind::Perturbed,
        b => return Err(Error::Cache(format!("unknown lattice kind {b}"))),
    };
    if stored_kind != lattice.kind() {
        return Err(Error::Cache("lattice kind does not match stored points".into()));
    }
    let mut values = vec![0.0; n * m];
    for j in 0..n {
        for k in 0..m {
            values[k * n + j] = cur.f64()?;
        }
    }
    let sweeps = (0..m).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
    Ok(OrthoBasis::from_parts(
        lattice, max_degree, values, orth_tol, achieved, sweeps,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Key {
    shape: u64,
    len: usize,
    max_degree: usize,
    tol_bits: u64,
}

impl Key {
    fn file_name(&self) -> String {
        format!(
            "basis-{:016x}-n{}-m{}-tol{:016x}.bin",
            self.shape, self.len, self.max_degree, self.tol_bits
        )
    }
}

type Slot = Arc<Mutex<Option<Arc<OrthoBasis>>>>;

/// Shared cache of built bases keyed by lattice shape, degree and tolerance,
/// optionally backed by a directory on disk.
///
/// Lookups for the same key block on one another so a basis is built once.
#[derive(Default)]
pub struct BasisCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<Key, Slot>>,
}

impl BasisCache {
    pub fn in_memory() -> Self {
        BasisCache::default()
    }

    pub fn with_dir(dir: impl Into<PathBuf>) -> Self {
        BasisCache {
            dir: Some(dir.into()),
            slots: Mutex::default(),
        }
    }

    /// Disk-backed if [`CACHE_DIR_ENV`] is set, in-memory otherwise.
    pub fn from_env() -> Self {
        match std::env::var_os(CACHE_DIR_ENV) {
            Some(d) if !d.is_empty() => BasisCache::with_dir(d),
            _ => BasisCache::in_memory(),
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn len(&self) -> usize {
        self.slots.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get_or_build(
        &self,
        lattice: &Lattice,
        max_degree: usize,
        orth_tol: f64,
    ) -> Result<Arc<OrthoBasis>> {
        let key = Key {
            shape: lattice.shape_hash(),
            len: lattice.len(),
            max_degree,
            tol_bits: orth_tol.to_bits(),
        };
        let slot = {
            let mut slots = self.slots.lock().unwrap();
            slots.entry(key).or_default().clone()
        };
        let mut guard = slot.lock().unwrap();
        if let Some(b) = guard.as_ref() {
            return Ok(b.clone());
        }
        let basis = Arc::new(self.load_or_build(&key, lattice, max_degree, orth_tol)?);
        *guard = Some(basis.clone());
        Ok(basis)
    }

    fn load_or_build(
        &self,
        key: &Key,
        lattice: &Lattice,
        max_degree: usize,
        orth_tol: f64,
    ) -> Result<OrthoBasis> {
        let Some(dir) = &self.dir else {
            return build_basis(lattice, max_degree, orth_tol);
        };
        let path = dir.join(key.file_name());
        if let Ok(file) = fs::File::open(&path) {
            match read_basis(std::io::BufReader::new(file)) {
                Ok(b)
                    if b.max_degree() == max_degree
                        && b.orth_tol().to_bits() == orth_tol.to_bits()
                        && b.is_compatible(lattice) =>
                {
                    return Ok(b)
                }
                Ok(_) => log::warn!("ignoring stale cache entry {}", path.display()),
                Err(e) => log::warn!("ignoring unreadable cache entry {}: {e}", path.display()),
            }
        }
        let basis = build_basis(lattice, max_degree, orth_tol)?;
        fs::create_dir_all(dir)?;
        // Write to a temporary name first so concurrent processes never see
        // a partial file.
        let tmp = dir.join(format!("{}.tmp{}", key.file_name(), std::process::id()));
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            write_basis(&basis, &mut f)?;
            f.flush()?;
        }
        fs::rename(&tmp, &path)?;
        Ok(basis)
    }
}
