//! Network, bath, and unit data model plus the engine's frequency quadrature.

mod bath;
mod network;
pub mod quad;
pub mod spectral;
pub mod units;

pub use bath::BathSpec;
pub use network::{validate_network, NetworkDiagnostic, SiteNetwork, FMO7_HAMILTONIAN};
pub use spectral::{
    coth_factor, coth_half, reorganization_energy, SpectralDensityFamily, TabulatedDensity,
};
pub use units::{UnitSystem, WAVENUMBER_TO_ANGULAR};
