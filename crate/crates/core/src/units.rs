use crate::error::{Error, Result};

/// Physical constants of the simulation. Defaults to Hartree atomic units
/// (ħ = m = 1), which every built-in parameter set assumes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitsConfig {
    pub hbar: f64,
    pub mass: f64,
}

impl Default for UnitsConfig {
    fn default() -> Self {
        UnitsConfig { hbar: 1.0, mass: 1.0 }
    }
}

impl UnitsConfig {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0) || !(mass > 0.0) {
            return Err(Error::invalid(format!(
                "hbar and mass must be strictly positive, got hbar = {hbar}, mass = {mass}"
            )));
        }
        Ok(UnitsConfig { hbar, mass })
    }
}
