use num_complex::Complex64;
use rand::Rng;

use super::{
    cqft_matrix, frequency_grid, prepare_ancilla, sample_index, EnergyMeter, FrequencyGrid, GqpeConfig, Measured,
};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, ZERO};
use crate::models::{hermitize, DensityMatrix, SpectralHamiltonian};

/// Largest joint density matrix (entries) the simulator will allocate.
pub const DEFAULT_SIM_CAP: usize = 1 << 20;

/// Density-matrix simulation of the GQPE circuit on ancilla (x) system:
/// prepare |g>, inverse CQFT to the time register, controlled e^{-iHt_j},
/// CQFT back, measure the ancilla in the frequency basis.
#[derive(Debug, Clone)]
pub struct GqpeCircuit {
    h: SpectralHamiltonian,
    cfg: GqpeConfig,
    grid: FrequencyGrid,
    ancilla: Vec<Complex64>,
    cqft: CMatrix,
    evolutions: Vec<CMatrix>,
    kraus: Vec<CMatrix>,
    amps: Vec<Vec<f64>>,
}

impl GqpeCircuit {
    pub fn new(h: &SpectralHamiltonian, cfg: &GqpeConfig) -> Result<Self> {
        Self::with_cap(h, cfg, DEFAULT_SIM_CAP)
    }

    pub fn with_cap(h: &SpectralHamiltonian, cfg: &GqpeConfig, cap: usize) -> Result<Self> {
        if h.e_max() > cfg.omega_max {
            return Err(Error::SpectralBound {
                e_max: h.e_max(),
                omega_max: cfg.omega_max,
            });
        }
        let joint = cfg.grid_size().saturating_mul(h.dim());
        let entries = joint.saturating_mul(joint);
        if entries > cap {
            return Err(Error::SimulatorCap { entries, cap });
        }
        let grid = frequency_grid(cfg);
        let ancilla: Vec<Complex64> = prepare_ancilla(cfg).iter().cloned().collect();
        let cqft = cqft_matrix(cfg);
        let evolutions: Vec<CMatrix> = grid.times.iter().map(|&t| h.evolution(t)).collect();
        let mut circuit = Self {
            h: h.clone(),
            cfg: *cfg,
            grid,
            ancilla,
            cqft,
            evolutions,
            kraus: Vec::new(),
            amps: Vec::new(),
        };
        circuit.kraus = circuit.kraus_from_gates();
        circuit.amps = circuit
            .kraus
            .iter()
            .map(|k| {
                let ke = circuit.h.to_eigenbasis(k);
                (0..circuit.h.dim()).map(|a| ke[(a, a)].re).collect()
            })
            .collect();
        Ok(circuit)
    }

    pub fn config(&self) -> &GqpeConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Kraus operators K_l = (<w_l| (x) I) W (|g> (x) I).
    pub fn kraus_operators(&self) -> &[CMatrix] {
        &self.kraus
    }

    /// Pushes the isometry |g> (x) I through the three gate layers.
    fn kraus_from_gates(&self) -> Vec<CMatrix> {
        let n = self.grid.len();
        let d = self.h.dim();
        let mut x: Vec<CMatrix> = self.ancilla.iter().map(|&a| CMatrix::identity(d, d) * a).collect();
        x = self.ancilla_gate(&x, &self.cqft.adjoint());
        for (j, block) in x.iter_mut().enumerate() {
            *block = &self.evolutions[j] * &*block;
        }
        x = self.ancilla_gate(&x, &self.cqft);
        debug_assert_eq!(x.len(), n);
        x
    }

    /// (G (x) I) applied to a block column.
    fn ancilla_gate(&self, x: &[CMatrix], g: &CMatrix) -> Vec<CMatrix> {
        let d = self.h.dim();
        (0..x.len())
            .map(|l| {
                let mut acc = CMatrix::zeros(d, x[0].ncols());
                for (j, block) in x.iter().enumerate() {
                    let w = g[(l, j)];
                    if w != ZERO {
                        acc += block * w;
                    }
                }
                acc
            })
            .collect()
    }

    /// The full circuit unitary W on ancilla (x) system, ancilla as the first factor.
    pub fn unitary(&self) -> CMatrix {
        let n = self.grid.len();
        let d = self.h.dim();
        let mut cu = CMatrix::zeros(n * d, n * d);
        for (j, u) in self.evolutions.iter().enumerate() {
            cu.view_mut((j * d, j * d), (d, d)).copy_from(u);
        }
        let id = CMatrix::identity(d, d);
        let f = self.cqft.kronecker(&id);
        let fi = self.cqft.adjoint().kronecker(&id);
        f * cu * fi
    }

    /// Evolves |g><g| (x) rho through the circuit and returns the joint state.
    pub fn joint_state(&self, rho: &DensityMatrix) -> Result<CMatrix> {
        let d = self.h.dim();
        if rho.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: rho.dim(),
            });
        }
        let n = self.grid.len();
        let r = rho.matrix();
        let mut joint = CMatrix::zeros(n * d, n * d);
        for j in 0..n {
            for k in 0..n {
                let w = self.ancilla[j] * self.ancilla[k].conj();
                if w != ZERO {
                    joint.view_mut((j * d, k * d), (d, d)).copy_from(&(r * w));
                }
            }
        }
        let id = CMatrix::identity(d, d);
        let fi = self.cqft.adjoint().kronecker(&id);
        joint = &fi * joint * fi.adjoint();
        for j in 0..n {
            for k in 0..n {
                let block = joint.view((j * d, k * d), (d, d)).clone_owned();
                let next = &self.evolutions[j] * block * self.evolutions[k].adjoint();
                joint.view_mut((j * d, k * d), (d, d)).copy_from(&next);
            }
        }
        let f = self.cqft.kronecker(&id);
        Ok(&f * joint * f.adjoint())
    }

    /// Outcome probabilities tr(K_l rho K_l^dagger).
    pub fn outcome_distribution(&self, rho: &DensityMatrix) -> Vec<f64> {
        self.kraus
            .iter()
            .map(|k| (k * rho.matrix() * k.adjoint()).trace().re.max(0.0))
            .collect()
    }
}

/// Measures the frequency register of the simulated circuit and returns the
/// grid frequency with the system state conditioned on the outcome.
pub fn circuit_gqpe_measure<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    circuit: &GqpeCircuit,
    rng: &mut R,
) -> Result<Measured> {
    let joint = circuit.joint_state(rho)?;
    let d = circuit.h.dim();
    let n = circuit.grid.len();
    let probs: Vec<f64> = (0..n)
        .map(|l| joint.view((l * d, l * d), (d, d)).trace().re.max(0.0))
        .collect();
    let index = sample_index(&probs, rng)?;
    let block = joint.view((index * d, index * d), (d, d)).clone_owned() / Complex64::new(probs[index], 0.0);
    Ok(Measured {
        omega: circuit.grid.omegas[index],
        index,
        state: DensityMatrix::new_unchecked(hermitize(&block)),
    })
}

impl EnergyMeter for GqpeCircuit {
    fn hamiltonian(&self) -> &SpectralHamiltonian {
        &self.h
    }

    fn lambda(&self) -> f64 {
        self.cfg.lambda
    }

    fn check_alignment(&self, temperature: f64) -> Result<()> {
        self.cfg.check_shift_on_grid(temperature)
    }

    fn kraus_table(&self) -> (&[f64], &[Vec<f64>]) {
        (&self.grid.omegas, &self.amps)
    }

    fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<Measured> {
        circuit_gqpe_measure(rho, self, rng)
    }
}
