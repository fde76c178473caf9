use crate::error::{Error, Result};
use crate::model::spectral::{reorganization_energy, SpectralDensityFamily};
use crate::model::units::UnitSystem;

/// Independent local baths, one spectral density per site, at a common temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct BathSpec {
    per_site: Vec<SpectralDensityFamily>,
    temperature: f64,
}

impl BathSpec {
    pub fn new(per_site: Vec<SpectralDensityFamily>, temperature: f64) -> Result<Self> {
        if per_site.is_empty() {
            return Err(Error::InvalidInput("bath list is empty".into()));
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::InvalidInput(format!(
                "temperature must be positive and finite (got {temperature} K); \
                 zero-temperature baths are not supported"
            )));
        }
        Ok(BathSpec {
            per_site,
            temperature,
        })
    }

    pub fn broadcast(family: SpectralDensityFamily, n_sites: usize, temperature: f64) -> Result<Self> {
        Self::new(vec![family; n_sites], temperature)
    }

    pub fn n_sites(&self) -> usize {
        self.per_site.len()
    }

    pub fn site(&self, n: usize) -> &SpectralDensityFamily {
        &self.per_site[n]
    }

    pub fn sites(&self) -> &[SpectralDensityFamily] {
        &self.per_site
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// beta in cm.
    pub fn beta(&self) -> f64 {
        UnitSystem::STANDARD.beta_wavenumber(self.temperature)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.per_site.clone(), temperature)
    }

    pub fn reorganization_energies(&self) -> Result<Vec<f64>> {
        self.per_site.iter().map(reorganization_energy).collect()
    }

    pub fn check_infrared(&self) -> Result<()> {
        for (n, fam) in self.per_site.iter().enumerate() {
            fam.check_infrared().map_err(|e| match e {
                Error::InfraredDivergence(msg) => {
                    Error::InfraredDivergence(format!("site {}: {msg}", n + 1))
                }
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn check_matches(&self, n_sites: usize) -> Result<()> {
        if self.per_site.len() != n_sites {
            return Err(Error::InvalidInput(format!(
                "{} baths for {n_sites} sites",
                self.per_site.len()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_temperature_rejected() {
        let j = SpectralDensityFamily::cubic(60.0, 200.0).unwrap();
        assert!(BathSpec::broadcast(j.clone(), 2, 0.0).is_err());
        assert!(BathSpec::broadcast(j, 2, -5.0).is_err());
    }
}
