//! Dense complex linear algebra shared by the quantum modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entry of |A - A^dagger|.
pub fn hermitian_residual(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entry of |U^dagger U - I|.
pub fn unitarity_residual(u: &CMatrix) -> f64 {
    let prod = u.adjoint() * u;
    max_abs_diff(&prod, &CMatrix::identity(u.nrows(), u.ncols()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs(a: &CMatrix) -> f64 {
    a.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Eigendecomposition of a Hermitian matrix with eigenvalues sorted ascending.
pub fn eigh(a: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Eigensolver(format!("not a square matrix: {}x{}", n, a.ncols())));
    }
    let eig =
        SymmetricEigen::try_new(a.clone(), 1e-15, 10_000).ok_or_else(|| Error::Eigensolver("no convergence".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    Ok((values, vectors))
}

/// Trace distance 1/2 ||A - B||_1 between Hermitian matrices.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> f64 {
    let diff = a - b;
    let herm = (&diff + diff.adjoint()) * c(0.5, 0.0);
    match eigh(&herm) {
        Ok((vals, _)) => 0.5 * vals.iter().map(|v| v.abs()).sum::<f64>(),
        Err(_) => f64::NAN,
    }
}

/// Real part of the trace.
pub fn trace_re(a: &CMatrix) -> f64 {
    a.trace().re
}

/// V diag(w) V^dagger.
pub fn spectral_weights(vectors: &CMatrix, weights: &[f64]) -> CMatrix {
    let n = weights.len();
    let mut scaled = vectors.clone();
    for (j, &w) in weights.iter().enumerate() {
        for i in 0..n {
            scaled[(i, j)] *= w;
        }
    }
    scaled * vectors.adjoint()
}

/// Apply a function to the spectrum of a Hermitian matrix given its eigendecomposition.
pub fn spectral_function(vectors: &CMatrix, values: &[f64], f: impl Fn(f64) -> f64) -> CMatrix {
    let weights: Vec<f64> = values.iter().map(|&v| f(v)).collect();
    spectral_weights(vectors, &weights)
}
