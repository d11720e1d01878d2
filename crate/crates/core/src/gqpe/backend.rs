use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{build_direct_povm, DirectPovm, EnergyMeter, ExactEnergyMeter, GqpeCircuit, GqpeConfig, Measured};
use crate::error::Result;
use crate::models::{DensityMatrix, SpectralHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    #[default]
    Direct,
    Circuit,
}

/// A runtime-selected GQPE back end.
#[derive(Debug, Clone)]
pub enum Backend {
    Direct(DirectPovm),
    Circuit(GqpeCircuit),
    Exact(ExactEnergyMeter),
}

impl Backend {
    pub fn build(kind: BackendKind, h: &SpectralHamiltonian, cfg: &GqpeConfig) -> Result<Self> {
        Ok(match kind {
            BackendKind::Direct => Backend::Direct(build_direct_povm(h, cfg)?),
            BackendKind::Circuit => Backend::Circuit(GqpeCircuit::new(h, cfg)?),
        })
    }
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            Backend::Direct($m) => $e,
            Backend::Circuit($m) => $e,
            Backend::Exact($m) => $e,
        }
    };
}

impl EnergyMeter for Backend {
    fn hamiltonian(&self) -> &SpectralHamiltonian {
        dispatch!(self, m => m.hamiltonian())
    }

    fn lambda(&self) -> f64 {
        dispatch!(self, m => m.lambda())
    }

    fn check_alignment(&self, temperature: f64) -> Result<()> {
        dispatch!(self, m => m.check_alignment(temperature))
    }

    fn kraus_table(&self) -> (&[f64], &[Vec<f64>]) {
        dispatch!(self, m => m.kraus_table())
    }

    fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<Measured> {
        dispatch!(self, m => m.measure(rho, rng))
    }
}
