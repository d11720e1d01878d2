use rand::Rng;

use super::{frequency_grid, sample_index, EnergyMeter, FrequencyGrid, GqpeConfig, Measured};
use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::models::{hermitize, DensityMatrix, SpectralHamiltonian};

/// Applies a measurement whose Kraus operators are diagonal in the eigenbasis
/// of `h`, with amplitudes `amps[j][a]`. Returns the outcome index and the
/// normalized post-measurement state.
pub(crate) fn measure_diagonal<R: Rng + ?Sized>(
    h: &SpectralHamiltonian,
    amps: &[Vec<f64>],
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<(usize, DensityMatrix)> {
    if rho.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: rho.dim(),
        });
    }
    let r = h.to_eigenbasis(rho.matrix());
    let d = h.dim();
    let probs: Vec<f64> = amps
        .iter()
        .map(|row| (0..d).map(|a| row[a] * row[a] * r[(a, a)].re).sum::<f64>().max(0.0))
        .collect();
    let j = sample_index(&probs, rng)?;
    let row = &amps[j];
    let post = CMatrix::from_fn(d, d, |a, b| r[(a, b)] * (row[a] * row[b] / probs[j]));
    Ok((j, DensityMatrix::new_unchecked(hermitize(&h.from_eigenbasis(&post)))))
}

/// The exact GQPE measurement on the grid: M_j = sqrt(c_j(H)) with
/// c_j(E) = g(w_j - E) / sum_k g(w_k - E).
#[derive(Debug, Clone)]
pub struct DirectPovm {
    h: SpectralHamiltonian,
    cfg: GqpeConfig,
    grid: FrequencyGrid,
    weights: Vec<Vec<f64>>,
    amps: Vec<Vec<f64>>,
}

pub fn build_direct_povm(h: &SpectralHamiltonian, cfg: &GqpeConfig) -> Result<DirectPovm> {
    if h.e_max() > cfg.omega_max {
        return Err(Error::SpectralBound {
            e_max: h.e_max(),
            omega_max: cfg.omega_max,
        });
    }
    let grid = frequency_grid(cfg);
    let n = grid.len();
    let mut weights = vec![vec![0.0; h.dim()]; n];
    for (a, &e) in h.eigenvalues().iter().enumerate() {
        // normalize in log space; the Gaussian prefactor cancels
        let logs: Vec<f64> = grid.omegas.iter().map(|w| -cfg.lambda * (w - e) * (w - e)).collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        for (j, l) in logs.iter().enumerate() {
            weights[j][a] = (l - top).exp() / total;
        }
    }
    let amps = weights
        .iter()
        .map(|row| row.iter().map(|c| c.sqrt()).collect())
        .collect();
    Ok(DirectPovm {
        h: h.clone(),
        cfg: *cfg,
        grid,
        weights,
        amps,
    })
}

impl DirectPovm {
    pub fn config(&self) -> &GqpeConfig {
        &self.cfg
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// c_j(E_a) for every eigenvalue.
    pub fn weights(&self, j: usize) -> &[f64] {
        &self.weights[j]
    }

    /// The effect M_j^dagger M_j = c_j(H).
    pub fn effect(&self, j: usize) -> CMatrix {
        self.h.weighted_projectors(&self.weights[j])
    }

    /// The measurement operator M_j = sqrt(c_j(H)).
    pub fn operator(&self, j: usize) -> CMatrix {
        self.h.weighted_projectors(&self.amps[j])
    }

    /// Outcome probabilities tr(M_j rho M_j^dagger).
    pub fn probabilities(&self, rho: &DensityMatrix) -> Vec<f64> {
        let r = self.h.to_eigenbasis(rho.matrix());
        self.weights
            .iter()
            .map(|row| row.iter().enumerate().map(|(a, c)| c * r[(a, a)].re).sum())
            .collect()
    }
}

/// Samples an outcome of the direct POVM and applies the Lueders update.
pub fn povm_measure<R: Rng + ?Sized>(rho: &DensityMatrix, povm: &DirectPovm, rng: &mut R) -> Result<Measured> {
    let (index, state) = measure_diagonal(&povm.h, &povm.amps, rho, rng)?;
    Ok(Measured {
        omega: povm.grid.omegas[index],
        index,
        state,
    })
}

impl EnergyMeter for DirectPovm {
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
        povm_measure(rho, self, rng)
    }
}

/// Projective measurement onto the eigenspaces of H, reporting the exact
/// eigenvalue. This is the infinite-resolution limit of GQPE; `lambda` only
/// sets the acceptance shift 1/(2 lambda T) and must make it negligible.
#[derive(Debug, Clone)]
pub struct ExactEnergyMeter {
    h: SpectralHamiltonian,
    lambda: f64,
    levels: Vec<f64>,
    amps: Vec<Vec<f64>>,
}

/// Largest acceptance shift the exact meter tolerates.
const EXACT_SHIFT_TOL: f64 = 1e-8;

impl ExactEnergyMeter {
    pub fn new(h: &SpectralHamiltonian, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("{lambda} is not positive")));
        }
        let mut levels: Vec<f64> = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (a, &e) in h.eigenvalues().iter().enumerate() {
            match levels.last() {
                Some(&last) if (e - last).abs() <= 1e-9 * e.abs().max(1.0) => members.last_mut().unwrap().push(a),
                _ => {
                    levels.push(e);
                    members.push(vec![a]);
                }
            }
        }
        let amps = members
            .iter()
            .map(|m| (0..h.dim()).map(|a| if m.contains(&a) { 1.0 } else { 0.0 }).collect())
            .collect();
        Ok(Self {
            h: h.clone(),
            lambda,
            levels,
            amps,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }
}

impl EnergyMeter for ExactEnergyMeter {
    fn hamiltonian(&self) -> &SpectralHamiltonian {
        &self.h
    }

    fn lambda(&self) -> f64 {
        self.lambda
    }

    fn check_alignment(&self, temperature: f64) -> Result<()> {
        let shift = 1.0 / (2.0 * self.lambda * temperature);
        if shift > EXACT_SHIFT_TOL {
            return Err(Error::GridMismatch {
                temperature,
                ratio: shift,
            });
        }
        Ok(())
    }

    fn kraus_table(&self) -> (&[f64], &[Vec<f64>]) {
        (&self.levels, &self.amps)
    }

    fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<Measured> {
        let (index, state) = measure_diagonal(&self.h, &self.amps, rho, rng)?;
        Ok(Measured {
            omega: self.levels[index],
            index,
            state,
        })
    }
}
