//! On-disk cache of tabulated kernels, keyed by a hash of everything they depend on.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use super::{KernelSet, ModeSet, SiteKernels, TimeGrid};
use crate::error::{Error, Result};
use crate::model::BathSpec;
use crate::varopt::Frame;

const MAGIC: &[u8; 4] = b"VPKS";
const VERSION: u32 = 1;

/// Hex SHA-256 of the baths, frame and grid. Debug output of f64 round-trips,
/// so equal keys mean bitwise-equal inputs.
pub fn cache_key(baths: &BathSpec, frame: &Frame, grid: &TimeGrid) -> String {
    let mut h = Sha256::new();
    h.update(VERSION.to_le_bytes());
    h.update(format!("{:?}", baths.sites()));
    h.update(format!("{:?}", frame.fractions));
    h.update(frame.beta.to_bits().to_le_bytes());
    h.update(grid.dt().to_bits().to_le_bytes());
    h.update((grid.n_steps() as u64).to_le_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("kernels-{key}.bin"))
}

fn put_u64(buf: &mut Vec<u8>, x: u64) {
    buf.extend_from_slice(&x.to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, xs: &[f64]) {
    put_u64(buf, xs.len() as u64);
    for x in xs {
        buf.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_complex(buf: &mut Vec<u8>, zs: &[Complex64]) {
    for z in zs {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
}

pub fn encode(kernels: &KernelSet) -> Vec<u8> {
    let (site_kernel, sets, modes) = kernels.parts();
    let grid = kernels.grid();
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&grid.dt().to_le_bytes());
    put_u64(&mut buf, grid.n_steps() as u64);
    put_u64(&mut buf, site_kernel.len() as u64);
    for &k in site_kernel {
        put_u64(&mut buf, k as u64);
    }
    put_u64(&mut buf, sets.len() as u64);
    for (set, m) in sets.iter().zip(modes) {
        put_f64s(&mut buf, m.omega());
        put_f64s(&mut buf, m.weight());
        put_complex(&mut buf, &set.zz);
        put_complex(&mut buf, &set.xy);
        put_complex(&mut buf, &set.yz);
    }
    buf
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.data.len() {
            return Err(Error::GridMismatch("truncated kernel cache".into()));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self, limit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n > limit {
            return Err(Error::GridMismatch("corrupt kernel cache".into()));
        }
        Ok(n)
    }

    fn f64s(&mut self) -> Result<Vec<f64>> {
        let n = self.len(self.data.len() / 8)?;
        (0..n).map(|_| self.f64()).collect()
    }

    fn complex(&mut self, n: usize) -> Result<Vec<Complex64>> {
        (0..n)
            .map(|_| Ok(Complex64::new(self.f64()?, self.f64()?)))
            .collect()
    }
}

pub fn decode(data: &[u8]) -> Result<KernelSet> {
    let mut r = Reader { data, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::GridMismatch("not a kernel cache file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::GridMismatch(format!("kernel cache version {version}")));
    }
    let dt = r.f64()?;
    let n_steps = r.u64()? as usize;
    let grid = TimeGrid::from_steps(dt, n_steps)?;
    let limit = data.len() / 8;
    let n_sites = r.len(limit)?;
    let site_kernel = (0..n_sites)
        .map(|_| r.u64().map(|k| k as usize))
        .collect::<Result<Vec<_>>>()?;
    let n_sets = r.len(limit)?;
    let mut sets = Vec::with_capacity(n_sets);
    let mut modes = Vec::with_capacity(n_sets);
    let ns = grid.n_samples();
    if ns > limit {
        return Err(Error::GridMismatch("corrupt kernel cache".into()));
    }
    for _ in 0..n_sets {
        let omega = r.f64s()?;
        let weight = r.f64s()?;
        modes.push(ModeSet::from_raw(omega, weight));
        sets.push(SiteKernels {
            zz: r.complex(ns)?,
            xy: r.complex(ns)?,
            yz: r.complex(ns)?,
        });
    }
    if r.pos != data.len() {
        return Err(Error::GridMismatch("trailing bytes in kernel cache".into()));
    }
    KernelSet::from_parts(grid, site_kernel, sets, modes)
}

/// Loads kernels if a cache file for `key` exists; unreadable files count as misses.
pub fn load(dir: &Path, key: &str) -> Option<KernelSet> {
    let path = cache_path(dir, key);
    let mut data = Vec::new();
    fs::File::open(&path).ok()?.read_to_end(&mut data).ok()?;
    match decode(&data) {
        Ok(k) => Some(k),
        Err(e) => {
            log::warn!("ignoring kernel cache {}: {e}", path.display());
            None
        }
    }
}

pub fn store(dir: &Path, key: &str, kernels: &KernelSet) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = cache_path(dir, key);
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(&encode(kernels)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
