//! Independent reference computations: tanh-sinh quadrature, exact
//! independent-boson dephasing, Gauss discretization of baths, exact
//! finite-mode dynamics and brute-force Fock-space correlators.

mod bath;
mod exact;
mod fock;
mod quadrature;

pub use bath::{
    discretize_bath, independent_boson_decoherence, reference_kernel, spectral_integral, FiniteBath, Mode,
    ORACLE_TOLERANCE,
};
pub use exact::{engine_on_finite_bath, finite_mode_exact, ExactTrajectory, MAX_DIMENSION, MAX_LEAKAGE};
pub use fock::{FockBath, FockSite};
pub use quadrature::{reference_quadrature, tanh_sinh, tanh_sinh_rule, Domain};

#[cfg(test)]
mod tests;
