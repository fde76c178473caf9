//! Trajectory CSV: `t_ps,p1..pN,re_rho_1_2,im_rho_1_2,...`, lab frame, 12 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::dynamics::{CMatrix, Trajectory};
use crate::error::{Error, Result};

pub fn header(n: usize) -> String {
    let mut cols = vec!["t_ps".to_string()];
    cols.extend((1..=n).map(|i| format!("p{i}")));
    for i in 1..=n {
        for j in i + 1..=n {
            cols.push(format!("re_rho_{i}_{j}"));
            cols.push(format!("im_rho_{i}_{j}"));
        }
    }
    cols.join(",")
}

fn row(t: f64, rho: &CMatrix) -> String {
    let n = rho.nrows();
    let mut fields = Vec::with_capacity(1 + n * n);
    fields.push(format!("{t:.11e}"));
    fields.extend((0..n).map(|i| format!("{:.11e}", rho[(i, i)].re)));
    for i in 0..n {
        for j in i + 1..n {
            fields.push(format!("{:.11e}", rho[(i, j)].re));
            fields.push(format!("{:.11e}", rho[(i, j)].im));
        }
    }
    fields.join(",")
}

pub fn write_csv<W: Write>(traj: &Trajectory, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{}", header(traj.n_sites()))?;
    for (t, rho) in traj.times.iter().zip(&traj.lab_states) {
        writeln!(w, "{}", row(*t, rho))?;
    }
    w.flush()
}

pub fn emit_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(traj, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Times and lab-frame states read back from a trajectory CSV.
pub fn read_csv(path: &Path) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let bad = |line: usize, msg: String| Error::InvalidInput(format!("{}:{line}: {msg}", path.display()));
    let head = lines
        .next()
        .ok_or_else(|| bad(1, "empty file".into()))?
        .map_err(|e| Error::io(path, e))?;
    let ncols = head.split(',').count();
    let n = (1..=64)
        .find(|&n| 1 + n * n == ncols)
        .ok_or_else(|| bad(1, format!("{ncols} columns do not match any site count")))?;
    if head != header(n) {
        return Err(bad(1, "unexpected header".into()));
    }
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let vals = line
            .split(',')
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(k + 2, e.to_string()))?;
        if vals.len() != ncols {
            return Err(bad(k + 2, format!("expected {ncols} fields, found {}", vals.len())));
        }
        let mut rho = CMatrix::zeros(n, n);
        for i in 0..n {
            rho[(i, i)] = Complex64::new(vals[1 + i], 0.0);
        }
        let mut c = 1 + n;
        for i in 0..n {
            for j in i + 1..n {
                let z = Complex64::new(vals[c], vals[c + 1]);
                rho[(i, j)] = z;
                rho[(j, i)] = z.conj();
                c += 2;
            }
        }
        times.push(vals[0]);
        states.push(rho);
    }
    Ok((times, states))
}
