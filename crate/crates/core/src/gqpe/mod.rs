//! Gaussian-filtered quantum phase estimation.
//!
//! A [`GqpeConfig`] ties the Gaussian filter width to a symmetric, zero-free
//! frequency grid. Energies are measured by one of the [`EnergyMeter`]
//! back ends: the exact grid POVM ([`DirectPovm`]), a density-matrix
//! simulation of the phase-estimation circuit ([`GqpeCircuit`]), or an
//! exact projective energy measurement ([`ExactEnergyMeter`], the
//! infinite-resolution limit).

mod backend;
mod circuit;
mod cqft;
mod povm;

pub use backend::{Backend, BackendKind};
pub use circuit::{circuit_gqpe_measure, GqpeCircuit, DEFAULT_SIM_CAP};
pub use cqft::{cqft_matrix, prepare_ancilla};
pub use povm::{build_direct_povm, povm_measure, DirectPovm, ExactEnergyMeter};

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{DensityMatrix, SpectralHamiltonian};
use crate::par::Exec;

/// Largest ancilla register the planner will hand out.
pub const DEFAULT_P_CAP: u32 = 16;

/// Relative tolerance for the grid-matching condition.
pub const MATCH_TOL: f64 = 1e-12;

/// g_lambda(w) = sqrt(lambda/pi) e^{-lambda w^2}.
pub fn gaussian_filter(omega: f64, lambda: f64) -> f64 {
    (lambda / PI).sqrt() * (-lambda * omega * omega).exp()
}

/// GQPE parameters: filter width, time window, register sizes and the
/// temperature the grid is matched to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GqpeConfig {
    pub lambda: f64,
    pub t_max: f64,
    pub p: u32,
    pub q: u32,
    pub z: u32,
    pub epsilon: f64,
    pub e_max: f64,
    pub temperature: f64,
    pub omega_max: f64,
}

impl GqpeConfig {
    /// Builds a config and checks every invariant, including grid matching
    /// `t_max = 2 pi lambda T / z`.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        lambda: f64,
        t_max: f64,
        p: u32,
        q: u32,
        z: u32,
        epsilon: f64,
        e_max: f64,
        temperature: f64,
    ) -> Result<Self> {
        let cfg = Self::new_unmatched(lambda, t_max, p, q, z, epsilon, e_max, temperature)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`GqpeConfig::new`] but without the grid-matching check; used for
    /// detuned negative controls.
    #[allow(clippy::too_many_arguments)]
    pub fn new_unmatched(
        lambda: f64,
        t_max: f64,
        p: u32,
        q: u32,
        z: u32,
        epsilon: f64,
        e_max: f64,
        temperature: f64,
    ) -> Result<Self> {
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if !positive(lambda) || !positive(t_max) || !positive(temperature) {
            return Err(Error::invalid(
                "gqpe config",
                "lambda, t_max and temperature must be positive",
            ));
        }
        if !(e_max >= 0.0) {
            return Err(Error::invalid("gqpe config", "e_max must be nonnegative"));
        }
        if p == 0 || p > 30 || q == 0 || q > p {
            return Err(Error::invalid(
                "gqpe config",
                format!("need 1 <= q <= p, got p={p} q={q}"),
            ));
        }
        if z == 0 {
            return Err(Error::invalid("gqpe config", "z must be a positive integer"));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::invalid("epsilon", format!("{epsilon} not in (0,1)")));
        }
        let omega_max = 2f64.powi(p as i32 - 1) * PI / t_max;
        if e_max > omega_max {
            return Err(Error::SpectralBound { e_max, omega_max });
        }
        Ok(Self {
            lambda,
            t_max,
            p,
            q,
            z,
            epsilon,
            e_max,
            temperature,
            omega_max,
        })
    }

    /// Rechecks every invariant (e.g. after deserializing).
    pub fn validate(&self) -> Result<()> {
        let fresh = Self::new_unmatched(
            self.lambda,
            self.t_max,
            self.p,
            self.q,
            self.z,
            self.epsilon,
            self.e_max,
            self.temperature,
        )?;
        if (fresh.omega_max - self.omega_max).abs() > MATCH_TOL * fresh.omega_max {
            return Err(Error::invalid("gqpe config", "omega_max inconsistent with p and t_max"));
        }
        let residual = self.matching_residual();
        if residual > MATCH_TOL {
            return Err(Error::GridMismatch {
                temperature: self.temperature,
                ratio: self.t_max / (2.0 * PI * self.lambda * self.temperature / self.z as f64),
            });
        }
        Ok(())
    }

    /// Relative deviation from `t_max = 2 pi lambda T / z`.
    pub fn matching_residual(&self) -> f64 {
        let target = 2.0 * PI * self.lambda * self.temperature / self.z as f64;
        (self.t_max - target).abs() / target
    }

    pub fn grid_size(&self) -> usize {
        1usize << self.p
    }

    /// Frequency spacing 2 omega_max / 2^p.
    pub fn spacing(&self) -> f64 {
        self.omega_max / 2f64.powi(self.p as i32 - 1)
    }

    /// The acceptance shift 1/(2 lambda T).
    pub fn shift(&self) -> f64 {
        1.0 / (2.0 * self.lambda * self.temperature)
    }

    /// Shift measured in grid steps; an integer when the shift lands on the grid.
    pub fn shift_in_steps(&self) -> f64 {
        self.shift() / self.spacing()
    }

    /// Errors unless the acceptance shift is an integer number of grid steps.
    pub fn check_shift_on_grid(&self, temperature: f64) -> Result<()> {
        let steps = self.shift_in_steps();
        let same_t = (temperature - self.temperature).abs() <= MATCH_TOL * self.temperature;
        if !same_t || steps < 0.5 || (steps - steps.round()).abs() > MATCH_TOL * steps.max(1.0) {
            return Err(Error::GridMismatch {
                temperature,
                ratio: steps,
            });
        }
        Ok(())
    }

    /// A copy with `t_max` scaled (grid matching broken on purpose).
    pub fn detuned(&self, factor: f64) -> Result<Self> {
        Self::new_unmatched(
            self.lambda,
            self.t_max * factor,
            self.p,
            self.q,
            self.z,
            self.epsilon,
            self.e_max,
            self.temperature,
        )
    }
}

/// Plans lambda, t_max, p and q for a target filter error.
///
/// lambda = z^2 ln(1/eps) / (2 pi^2 T^2) and t_max = z ln(1/eps) / (pi T), so
/// that t_max^2 / (2 lambda) = ln(1/eps) and t_max = 2 pi lambda T / z;
/// q = ceil(log2 ln(1/eps)), p = ceil(log2(E_max t_max + ln(1/eps))), and p is
/// raised until E_max <= omega_max.
pub fn plan_resources(epsilon: f64, e_max: f64, t_chain: f64, z: u32) -> Result<GqpeConfig> {
    plan_resources_capped(epsilon, e_max, t_chain, z, DEFAULT_P_CAP)
}

pub fn plan_resources_capped(epsilon: f64, e_max: f64, t_chain: f64, z: u32, p_cap: u32) -> Result<GqpeConfig> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::invalid("epsilon", format!("{epsilon} not in (0,1)")));
    }
    if !(e_max > 0.0 && e_max.is_finite()) {
        return Err(Error::invalid("e_max", format!("{e_max} is not positive")));
    }
    if !(t_chain > 0.0 && t_chain.is_finite()) {
        return Err(Error::invalid("temperature", format!("{t_chain} is not positive")));
    }
    if z == 0 {
        return Err(Error::invalid("z", "must be a positive integer"));
    }
    let log_inv = (1.0 / epsilon).ln();
    let zf = z as f64;
    let lambda = zf * zf * log_inv / (2.0 * PI * PI * t_chain * t_chain);
    let t_max = zf * log_inv / (PI * t_chain);
    let q = (log_inv.log2().ceil().max(1.0)) as u32;
    let mut p = ((e_max * t_max + log_inv).log2().ceil().max(1.0)) as u32;
    p = p.max(q);
    while e_max > 2f64.powi(p as i32 - 1) * PI / t_max {
        p += 1;
    }
    if p > p_cap {
        return Err(Error::Infeasible { p, cap: p_cap });
    }
    GqpeConfig::new(lambda, t_max, p, q, z, epsilon, e_max, t_chain)
}

/// The centered time and frequency grids, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    pub omegas: Vec<f64>,
    pub times: Vec<f64>,
    pub spacing: f64,
}

impl FrequencyGrid {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Index of a grid value, if `omega` lies on the grid to `tol * spacing`.
    pub fn index_of(&self, omega: f64, tol: f64) -> Option<usize> {
        let h = self.spacing / 2.0;
        let k = ((omega / h + self.len() as f64 - 1.0) / 2.0).round();
        if k < 0.0 || k >= self.len() as f64 {
            return None;
        }
        let j = k as usize;
        ((self.omegas[j] - omega).abs() <= tol * self.spacing).then_some(j)
    }
}

/// Odd multiples of half a step: value_j = (2j - 2^p + 1) * max / 2^p.
fn centered(p: u32, max: f64) -> Vec<f64> {
    let n = 1i64 << p;
    let h = max / n as f64;
    (0..n)
        .map(|j| {
            let k = 2 * j - n + 1;
            let v = k.unsigned_abs() as f64 * h;
            if k < 0 {
                -v
            } else {
                v
            }
        })
        .collect()
}

pub fn frequency_grid(cfg: &GqpeConfig) -> FrequencyGrid {
    FrequencyGrid {
        omegas: centered(cfg.p, cfg.omega_max),
        times: centered(cfg.p, cfg.t_max),
        spacing: cfg.spacing(),
    }
}

/// Frequencies of the truncated Gaussian register: the 2^q central grid points.
pub(crate) fn register_frequencies(cfg: &GqpeConfig, grid: &FrequencyGrid) -> Vec<f64> {
    let offset = (1usize << (cfg.p - 1)) - (1usize << (cfg.q - 1));
    grid.omegas[offset..offset + (1usize << cfg.q)].to_vec()
}

/// The filter realized by the finite circuit:
/// g~(w) = (sum_j sum_k e^{i(w~_k - w) t_j} / 2^p sqrt(g(w~_k)))^2.
#[derive(Debug, Clone)]
pub struct EffectiveFilter {
    times: Vec<f64>,
    register: Vec<(f64, f64)>,
}

pub fn effective_filter(cfg: &GqpeConfig) -> EffectiveFilter {
    let grid = frequency_grid(cfg);
    let register = register_frequencies(cfg, &grid)
        .into_iter()
        .map(|w| (w, gaussian_filter(w, cfg.lambda).sqrt()))
        .collect();
    EffectiveFilter {
        times: grid.times,
        register,
    }
}

impl EffectiveFilter {
    pub fn eval(&self, omega: f64) -> f64 {
        let n = self.times.len() as f64;
        let mut re = 0.0;
        let mut im = 0.0;
        for &(w, amp) in &self.register {
            for &t in &self.times {
                let (s, c) = ((w - omega) * t).sin_cos();
                re += c * amp;
                im += s * amp;
            }
        }
        let (re, im) = (re / n, im / n);
        re * re - im * im
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FilterSample {
    pub omega: f64,
    pub g: f64,
    pub g_tilde: f64,
    pub rel_err: f64,
}

/// Samples g and g~ on `points` evenly spaced frequencies over |w| <= E_max + omega_max.
pub fn filter_sweep(cfg: &GqpeConfig, points: usize, exec: Exec) -> Vec<FilterSample> {
    let filter = effective_filter(cfg);
    let g0 = gaussian_filter(0.0, cfg.lambda);
    let half = cfg.e_max + cfg.omega_max;
    let points = points.max(2);
    exec.map_indexed(points, |i| {
        let omega = -half + 2.0 * half * i as f64 / (points - 1) as f64;
        let g = gaussian_filter(omega, cfg.lambda);
        let g_tilde = filter.eval(omega);
        FilterSample {
            omega,
            g,
            g_tilde,
            rel_err: (g - g_tilde).abs() / g0,
        }
    })
}

/// Empirical filter error max |g - g~| / g(0) over |w| <= E_max + omega_max.
pub fn filter_error(cfg: &GqpeConfig, exec: Exec) -> f64 {
    // at least 64 samples per grid step
    let points = ((2.0 * (cfg.e_max + cfg.omega_max) / cfg.spacing()) * 64.0).ceil() as usize + 1;
    filter_sweep(cfg, points.max(4001), exec)
        .iter()
        .map(|s| s.rel_err)
        .fold(0.0, f64::max)
}

/// Outcome of an energy measurement.
#[derive(Debug, Clone)]
pub struct Measured {
    pub omega: f64,
    /// Outcome label (grid index, or eigenvalue group for exact measurement).
    pub index: usize,
    pub state: DensityMatrix,
}

/// Energy-measurement back end used by the quantum chain.
pub trait EnergyMeter: Sync {
    fn hamiltonian(&self) -> &SpectralHamiltonian;

    /// Filter width lambda, which sets the acceptance shift 1/(2 lambda T).
    fn lambda(&self) -> f64;

    /// Errors unless the acceptance shift maps the outcome grid onto itself.
    fn check_alignment(&self, temperature: f64) -> Result<()>;

    /// Possible outcomes and the Kraus amplitudes A_j(E_a) in the eigenbasis,
    /// `amps[j][a]`; every measurement operator is diagonal there.
    fn kraus_table(&self) -> (&[f64], &[Vec<f64>]);

    fn measure<R: Rng + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<Measured>;
}

/// Samples an index from nonnegative weights, skipping zero-weight outcomes.
pub(crate) fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 1e-300) {
        return Err(Error::ZeroProbability { total });
    }
    let x = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(i);
        if x < acc {
            return Ok(i);
        }
    }
    last.ok_or(Error::ZeroProbability { total })
}

#[cfg(test)]
mod tests;
