use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Site energies and inter-site couplings (cm^-1) of a single-excitation network.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteNetwork {
    energies: Vec<f64>,
    couplings: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum NetworkDiagnostic {
    Empty,
    DimensionMismatch { energies: usize, rows: usize, cols: usize },
    NonFiniteEnergy { site: usize, value: f64 },
    NonFiniteCoupling { row: usize, col: usize, value: f64 },
    Asymmetric { row: usize, col: usize, upper: f64, lower: f64 },
    NonzeroDiagonal { site: usize, value: f64 },
}

impl fmt::Display for NetworkDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // sites are reported 1-based, matching config files
        match *self {
            NetworkDiagnostic::Empty => write!(f, "network has no sites"),
            NetworkDiagnostic::DimensionMismatch {
                energies,
                rows,
                cols,
            } => write!(
                f,
                "{energies} site energies but coupling matrix is {rows}x{cols}"
            ),
            NetworkDiagnostic::NonFiniteEnergy { site, value } => {
                write!(f, "energy of site {} is not finite ({value})", site + 1)
            }
            NetworkDiagnostic::NonFiniteCoupling { row, col, value } => write!(
                f,
                "coupling V[{},{}] is not finite ({value})",
                row + 1,
                col + 1
            ),
            NetworkDiagnostic::Asymmetric {
                row,
                col,
                upper,
                lower,
            } => write!(
                f,
                "coupling matrix not symmetric: V[{},{}] = {upper} but V[{},{}] = {lower}",
                row + 1,
                col + 1,
                col + 1,
                row + 1
            ),
            NetworkDiagnostic::NonzeroDiagonal { site, value } => write!(
                f,
                "coupling diagonal V[{},{}] = {value} must be zero (put it in the site energy)",
                site + 1,
                site + 1
            ),
        }
    }
}

/// Checks every structural requirement and reports all violations.
pub fn validate_network(
    energies: &[f64],
    couplings: &DMatrix<f64>,
) -> std::result::Result<(), Vec<NetworkDiagnostic>> {
    let mut diags = Vec::new();
    let n = energies.len();
    if n == 0 {
        diags.push(NetworkDiagnostic::Empty);
    }
    if couplings.nrows() != n || couplings.ncols() != n {
        diags.push(NetworkDiagnostic::DimensionMismatch {
            energies: n,
            rows: couplings.nrows(),
            cols: couplings.ncols(),
        });
        return Err(diags);
    }
    for (site, &e) in energies.iter().enumerate() {
        if !e.is_finite() {
            diags.push(NetworkDiagnostic::NonFiniteEnergy { site, value: e });
        }
    }
    for row in 0..n {
        for col in 0..n {
            let v = couplings[(row, col)];
            if !v.is_finite() {
                diags.push(NetworkDiagnostic::NonFiniteCoupling { row, col, value: v });
                continue;
            }
            if row == col && v != 0.0 {
                diags.push(NetworkDiagnostic::NonzeroDiagonal { site: row, value: v });
            }
            if row < col {
                let lower = couplings[(col, row)];
                if lower.is_finite() && lower != v {
                    diags.push(NetworkDiagnostic::Asymmetric {
                        row,
                        col,
                        upper: v,
                        lower,
                    });
                }
            }
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Seven-site FMO Hamiltonian (cm^-1); site energies on the diagonal.
pub const FMO7_HAMILTONIAN: [[f64; 7]; 7] = [
    [240.0, -87.7, 5.5, -5.9, 6.7, -13.7, -9.9],
    [-87.7, 315.0, 30.8, 8.2, 0.7, 11.8, 4.3],
    [5.5, 30.8, 0.0, -53.5, -2.2, -9.6, 6.0],
    [-5.9, 8.2, -53.5, 130.0, -70.7, -17.0, -63.3],
    [6.7, 0.7, -2.2, -70.7, 285.0, 81.1, -1.3],
    [-13.7, 11.8, -9.6, -17.0, 81.1, 435.0, 39.7],
    [-9.9, 4.3, 6.0, -63.3, -1.3, 39.7, 245.0],
];

impl SiteNetwork {
    pub fn new(energies: Vec<f64>, couplings: DMatrix<f64>) -> Result<Self> {
        validate_network(&energies, &couplings).map_err(Error::InvalidNetwork)?;
        Ok(SiteNetwork {
            energies,
            couplings,
        })
    }

    /// Builds a network from a full Hamiltonian matrix (energies on the diagonal).
    pub fn from_hamiltonian(h: &DMatrix<f64>) -> Result<Self> {
        let n = h.nrows();
        let energies = (0..n).map(|i| h[(i, i)]).collect();
        let mut couplings = h.clone();
        couplings.fill_diagonal(0.0);
        Self::new(energies, couplings)
    }

    pub fn fmo7() -> Self {
        let h = DMatrix::from_fn(7, 7, |r, c| FMO7_HAMILTONIAN[r][c]);
        Self::from_hamiltonian(&h).expect("FMO Hamiltonian is valid")
    }

    /// Nearest-neighbour chain with the given energies and couplings V_{n,n+1}.
    pub fn chain(energies: Vec<f64>, nearest: &[f64]) -> Result<Self> {
        let n = energies.len();
        if nearest.len() + 1 != n {
            return Err(Error::InvalidInput(format!(
                "chain of {n} sites needs {} couplings, got {}",
                n.saturating_sub(1),
                nearest.len()
            )));
        }
        let mut v = DMatrix::zeros(n, n);
        for (k, &c) in nearest.iter().enumerate() {
            v[(k, k + 1)] = c;
            v[(k + 1, k)] = c;
        }
        Self::new(energies, v)
    }

    pub fn n_sites(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    #[inline]
    pub fn coupling(&self, n: usize, m: usize) -> f64 {
        self.couplings[(n, m)]
    }

    pub fn hamiltonian(&self) -> DMatrix<f64> {
        let mut h = self.couplings.clone();
        for (i, &e) in self.energies.iter().enumerate() {
            h[(i, i)] = e;
        }
        h
    }

    pub fn with_scaled_couplings(&self, factor: f64) -> Result<Self> {
        Self::new(self.energies.clone(), &self.couplings * factor)
    }

    /// Largest |epsilon| or |V| entry; used to scale finite-difference steps.
    pub fn energy_scale(&self) -> f64 {
        self.energies
            .iter()
            .chain(self.couplings.iter())
            .fold(0.0f64, |a, &x| a.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmo_is_valid() {
        let h = DMatrix::from_fn(7, 7, |r, c| FMO7_HAMILTONIAN[r][c]);
        let energies: Vec<f64> = (0..7).map(|i| h[(i, i)]).collect();
        let mut v = h.clone();
        v.fill_diagonal(0.0);
        assert!(validate_network(&energies, &v).is_ok());
        let net = SiteNetwork::fmo7();
        assert_eq!(net.energies(), &[240.0, 315.0, 0.0, 130.0, 285.0, 435.0, 245.0]);
        assert_eq!(net.coupling(3, 6), -63.3);
    }

    #[test]
    fn asymmetry_is_diagnosed() {
        let mut v = DMatrix::zeros(2, 2);
        v[(0, 1)] = 20.0;
        v[(1, 0)] = 21.0;
        let diags = validate_network(&[0.0, 50.0], &v).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert!(matches!(
            diags[0],
            NetworkDiagnostic::Asymmetric { row: 0, col: 1, .. }
        ));
    }

    #[test]
    fn diagonal_coupling_is_diagnosed() {
        let mut v = DMatrix::zeros(2, 2);
        v[(1, 1)] = 3.0;
        let diags = validate_network(&[0.0, 50.0], &v).unwrap_err();
        assert!(matches!(
            diags[0],
            NetworkDiagnostic::NonzeroDiagonal { site: 1, .. }
        ));
    }

    #[test]
    fn all_violations_are_reported() {
        let mut v = DMatrix::zeros(3, 3);
        v[(0, 0)] = 1.0;
        v[(0, 2)] = 2.0;
        v[(1, 2)] = f64::NAN;
        let diags = validate_network(&[0.0, f64::INFINITY, 1.0], &v).unwrap_err();
        assert_eq!(diags.len(), 4, "{diags:?}");
    }

    #[test]
    fn dimension_mismatch() {
        let v = DMatrix::zeros(3, 3);
        let diags = validate_network(&[0.0, 1.0], &v).unwrap_err();
        assert!(matches!(diags[0], NetworkDiagnostic::DimensionMismatch { .. }));
    }
}
