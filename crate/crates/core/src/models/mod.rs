//! Hamiltonians, observables, Gibbs states and proposal kernels shared by
//! the classical and quantum chains.

mod builders;
pub mod file;

pub use builders::{classical_ising, pauli, tfim};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};

/// Hermiticity / unitarity tolerance for validated inputs.
pub const TOL: f64 = 1e-10;

/// A classical system: a list of state energies at a fixed temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalSystem {
    energies: Vec<f64>,
    temperature: f64,
}

impl ClassicalSystem {
    pub fn new(energies: Vec<f64>, temperature: f64) -> Result<Self> {
        if energies.len() < 2 {
            return Err(Error::invalid("classical system", "needs at least two states"));
        }
        if let Some(e) = energies.iter().find(|e| !e.is_finite()) {
            return Err(Error::invalid("classical system", format!("non-finite energy {e}")));
        }
        check_temperature(temperature)?;
        Ok(Self { energies, temperature })
    }

    pub fn num_states(&self) -> usize {
        self.energies.len()
    }

    pub fn energy(&self, state: usize) -> f64 {
        self.energies[state]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        Self::new(self.energies.clone(), temperature)
    }

    /// Normalized Boltzmann distribution, computed relative to the minimum energy.
    pub fn boltzmann(&self) -> Vec<f64> {
        boltzmann_weights(&self.energies, self.temperature)
    }

    /// Exact thermal mean of the energy by enumeration.
    pub fn mean_energy(&self) -> f64 {
        self.boltzmann().iter().zip(&self.energies).map(|(w, e)| w * e).sum()
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid("temperature", format!("{t} is not positive and finite")));
    }
    Ok(())
}

pub fn boltzmann_weights(energies: &[f64], t: f64) -> Vec<f64> {
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e_min) / t).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Spectral form of a Hermitian matrix: ascending eigenvalues and the unitary of eigenvectors.
#[derive(Debug, Clone)]
pub struct SpectralHamiltonian {
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    e_max: f64,
}

/// Diagonalizes `h_matrix`; `e_max` is `max |E_a| + e_max_pad`.
pub fn build_spectral(h_matrix: &CMatrix, e_max_pad: f64) -> Result<SpectralHamiltonian> {
    if h_matrix.nrows() != h_matrix.ncols() {
        return Err(Error::DimensionMismatch {
            expected: h_matrix.nrows(),
            actual: h_matrix.ncols(),
        });
    }
    let residual = linalg::hermitian_residual(h_matrix);
    if residual > TOL {
        return Err(Error::NotHermitian { residual });
    }
    if !(e_max_pad >= 0.0) {
        return Err(Error::invalid("e_max_pad", format!("{e_max_pad} is negative")));
    }
    let (eigenvalues, eigenvectors) = linalg::eigh(h_matrix)?;
    if linalg::unitarity_residual(&eigenvectors) > TOL {
        return Err(Error::Eigensolver("eigenvectors not orthonormal".into()));
    }
    let e_max = eigenvalues.iter().fold(0.0_f64, |m, e| m.max(e.abs())) + e_max_pad;
    Ok(SpectralHamiltonian {
        eigenvalues,
        eigenvectors,
        e_max,
    })
}

impl SpectralHamiltonian {
    /// A Hamiltonian that is diagonal in the computational basis.
    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&CVector::from_iterator(
            energies.len(),
            energies.iter().map(|&e| c(e, 0.0)),
        ));
        build_spectral(&m, 0.0)
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn spectral_width(&self) -> f64 {
        self.eigenvalues[self.dim() - 1] - self.eigenvalues[0]
    }

    /// Reconstructs H from its spectral form.
    pub fn matrix(&self) -> CMatrix {
        self.function(|e| e)
    }

    /// f(H) = sum_a f(E_a) |psi_a><psi_a|.
    pub fn function(&self, f: impl Fn(f64) -> f64) -> CMatrix {
        linalg::spectral_function(&self.eigenvectors, &self.eigenvalues, f)
    }

    /// sum_a w_a |psi_a><psi_a|.
    pub fn weighted_projectors(&self, weights: &[f64]) -> CMatrix {
        linalg::spectral_weights(&self.eigenvectors, weights)
    }

    /// Rewrites an operator in the eigenbasis: V^dagger A V.
    pub fn to_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        self.eigenvectors.adjoint() * a * &self.eigenvectors
    }

    pub fn from_eigenbasis(&self, a: &CMatrix) -> CMatrix {
        &self.eigenvectors * a * self.eigenvectors.adjoint()
    }

    /// e^{-iHt}.
    pub fn evolution(&self, t: f64) -> CMatrix {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for (j, &e) in self.eigenvalues.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, -e * t);
            for i in 0..n {
                scaled[(i, j)] *= phase;
            }
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// A unit-trace, Hermitian, positive-semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates the density-matrix invariants to `TOL`.
    pub fn new(m: CMatrix) -> Result<Self> {
        let rho = DensityMatrix(m);
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix the caller already knows to be a state (e.g. a channel output).
    pub(crate) fn new_unchecked(m: CMatrix) -> Self {
        DensityMatrix(m)
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::invalid("density matrix", "not square"));
        }
        let residual = linalg::hermitian_residual(m);
        if residual > TOL {
            return Err(Error::NotHermitian { residual });
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TOL || tr.im.abs() > TOL {
            return Err(Error::invalid("density matrix", format!("trace {tr}")));
        }
        let (vals, _) = linalg::eigh(&hermitize(m))?;
        if vals[0] < -TOL {
            return Err(Error::invalid(
                "density matrix",
                format!("negative eigenvalue {:.3e}", vals[0]),
            ));
        }
        Ok(())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(CMatrix::identity(dim, dim) * c(1.0 / dim as f64, 0.0))
    }

    /// |psi><psi| for a (not necessarily normalized) vector.
    pub fn pure(psi: &CVector) -> Self {
        let norm2 = psi.norm_squared();
        DensityMatrix(psi * psi.adjoint() * c(1.0 / norm2, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// tr(rho A), real part.
    pub fn expectation(&self, a: &CMatrix) -> f64 {
        (&self.0 * a).trace().re
    }
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * c(0.5, 0.0)
}

/// B = sum_a beta_a |phi_a><phi_a| (x) I_r, acting on the first tensor factor.
#[derive(Debug, Clone)]
pub struct LocalObservable {
    basis: CMatrix,
    values: Vec<f64>,
    rest_dim: usize,
}

impl LocalObservable {
    pub fn new(basis: CMatrix, values: Vec<f64>, rest_dim: usize) -> Result<Self> {
        let m = basis.nrows();
        if basis.ncols() != m || m == 0 {
            return Err(Error::invalid("observable basis", "must be square"));
        }
        if values.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: values.len(),
            });
        }
        if rest_dim == 0 {
            return Err(Error::invalid("observable", "rest dimension must be positive"));
        }
        if linalg::unitarity_residual(&basis) > TOL {
            return Err(Error::invalid("observable basis", "not unitary"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("observable", "non-finite value"));
        }
        Ok(Self {
            basis,
            values,
            rest_dim,
        })
    }

    /// Computational-basis observable on an `m`-level subsystem.
    pub fn computational(values: Vec<f64>, rest_dim: usize) -> Result<Self> {
        let m = values.len();
        Self::new(CMatrix::identity(m, m), values, rest_dim)
    }

    pub fn subsystem_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rest_dim(&self) -> usize {
        self.rest_dim
    }

    pub fn dim(&self) -> usize {
        self.subsystem_dim() * self.rest_dim
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn basis_vector(&self, a: usize) -> CVector {
        self.basis.column(a).into_owned()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, a: usize) -> f64 {
        self.values[a]
    }

    /// |phi_a><phi_b| (x) I_r.
    pub fn transition_operator(&self, a: usize, b: usize) -> CMatrix {
        let outer = self.basis_vector(a) * self.basis_vector(b).adjoint();
        linalg::kron(&outer, &CMatrix::identity(self.rest_dim, self.rest_dim))
    }
}

/// Builds the full observable matrix sum_a beta_a |phi_a><phi_a| (x) I_r.
pub fn observable_matrix(b: &LocalObservable) -> CMatrix {
    let m = b.subsystem_dim();
    let mut sub = CMatrix::zeros(m, m);
    for (a, &beta) in b.values.iter().enumerate() {
        let phi = b.basis_vector(a);
        sub += &phi * phi.adjoint() * c(beta, 0.0);
    }
    linalg::kron(&sub, &CMatrix::identity(b.rest_dim, b.rest_dim))
}

/// Gibbs state e^{-H/t}/tr(e^{-H/t}), with weights taken relative to the ground energy.
pub fn gibbs_state(h: &SpectralHamiltonian, t: f64) -> Result<DensityMatrix> {
    check_temperature(t)?;
    let w = boltzmann_weights(h.eigenvalues(), t);
    Ok(DensityMatrix(hermitize(&h.weighted_projectors(&w))))
}

/// tr(rho_T obs).
pub fn gibbs_expectation(h: &SpectralHamiltonian, t: f64, obs: &CMatrix) -> Result<f64> {
    if obs.nrows() != h.dim() || obs.ncols() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            actual: obs.nrows(),
        });
    }
    Ok(gibbs_state(h, t)?.expectation(obs))
}

/// Symmetric, column-stochastic proposal probabilities P(a|b) = matrix[(a, b)].
#[derive(Debug, Clone)]
pub struct ProposalKernel {
    matrix: DMatrix<f64>,
    /// Per source column: cumulative (target, cdf) pairs over nonzero entries.
    cdf: Vec<Vec<(usize, f64)>>,
}

impl ProposalKernel {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        let k = matrix.nrows();
        if matrix.ncols() != k || k == 0 {
            return Err(Error::invalid("proposal kernel", "must be square"));
        }
        for b in 0..k {
            let mut sum = 0.0;
            for a in 0..k {
                let p = matrix[(a, b)];
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::invalid("proposal kernel", format!("entry {p} outside [0,1]")));
                }
                if (p - matrix[(b, a)]).abs() > 1e-12 {
                    return Err(Error::invalid("proposal kernel", format!("P({a}|{b}) != P({b}|{a})")));
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-12 {
                return Err(Error::invalid("proposal kernel", format!("column {b} sums to {sum}")));
            }
        }
        Ok(Self::build(matrix))
    }

    /// Skips validation; used by negative tests that need an asymmetric kernel.
    pub fn from_matrix_unchecked(matrix: DMatrix<f64>) -> Self {
        Self::build(matrix)
    }

    fn build(matrix: DMatrix<f64>) -> Self {
        let k = matrix.nrows();
        let cdf = (0..k)
            .map(|b| {
                let mut acc = 0.0;
                (0..k)
                    .filter(|&a| matrix[(a, b)] > 0.0)
                    .map(|a| {
                        acc += matrix[(a, b)];
                        (a, acc)
                    })
                    .collect()
            })
            .collect();
        Self { matrix, cdf }
    }

    /// Uniform over all k states, including staying put.
    pub fn uniform(k: usize) -> Result<Self> {
        Self::from_matrix(DMatrix::from_element(k, k, 1.0 / k as f64))
    }

    /// Uniform over the k - 1 other states; for k = 2 this is the flip.
    pub fn uniform_others(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("proposal kernel", "needs at least two states"));
        }
        let p = 1.0 / (k - 1) as f64;
        Self::from_matrix(DMatrix::from_fn(k, k, |a, b| if a == b { 0.0 } else { p }))
    }

    /// Single-bit flips on `bits` bits, each bit chosen uniformly.
    pub fn single_flip(bits: u32) -> Result<Self> {
        if bits == 0 {
            return Err(Error::invalid("proposal kernel", "needs at least one bit"));
        }
        let k = 1usize << bits;
        let p = 1.0 / bits as f64;
        Self::from_matrix(DMatrix::from_fn(
            k,
            k,
            |a, b| {
                if (a ^ b).count_ones() == 1 {
                    p
                } else {
                    0.0
                }
            },
        ))
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn prob(&self, to: usize, from: usize) -> f64 {
        self.matrix[(to, from)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Draws a target state from column `from` using a uniform `u` in [0, 1).
    pub fn sample(&self, from: usize, u: f64) -> usize {
        let col = &self.cdf[from];
        let total = col.last().map_or(1.0, |&(_, acc)| acc);
        let x = u * total;
        col.iter()
            .find(|&&(_, acc)| x < acc)
            .or(col.last())
            .map(|&(a, _)| a)
            .expect("kernel column has no support")
    }
}

/// Regularized Metropolis acceptance f(w) = (1 - delta) min{1, e^{-w/T}}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptanceFunction {
    delta: f64,
    temperature: f64,
}

impl AcceptanceFunction {
    pub const DEFAULT_DELTA: f64 = 0.05;

    pub fn new(delta: f64, temperature: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid("delta", format!("{delta} not in (0,1)")));
        }
        check_temperature(temperature)?;
        Ok(Self { delta, temperature })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn f(&self, omega: f64) -> f64 {
        let boltz = if omega <= 0.0 {
            1.0
        } else {
            (-omega / self.temperature).exp()
        };
        (1.0 - self.delta) * boltz
    }

    /// Delay surprisal s(w) = -ln(1 - f(w)), bounded by -ln(delta).
    pub fn s(&self, omega: f64) -> f64 {
        if omega <= 0.0 {
            // f = 1 - delta on the whole half-line
            return -self.delta.ln();
        }
        -(-self.f(omega)).ln_1p()
    }
}
