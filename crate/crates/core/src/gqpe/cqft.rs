use num_complex::Complex64;

use super::{frequency_grid, gaussian_filter, register_frequencies, GqpeConfig};
use crate::linalg::{CMatrix, CVector, ZERO};

/// Centered QFT: entry (k, j) = e^{i w_k t_j} / 2^{p/2}, mapping the time
/// register onto the frequency register.
pub fn cqft_matrix(cfg: &GqpeConfig) -> CMatrix {
    let grid = frequency_grid(cfg);
    let n = grid.len();
    let norm = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(n, n, |k, j| Complex64::from_polar(norm, grid.omegas[k] * grid.times[j]))
}

/// The Gaussian ancilla state in the frequency basis: amplitudes proportional
/// to sqrt(g(w~_k)) on the 2^q central grid points, zero elsewhere.
pub fn prepare_ancilla(cfg: &GqpeConfig) -> CVector {
    let grid = frequency_grid(cfg);
    let offset = (1usize << (cfg.p - 1)) - (1usize << (cfg.q - 1));
    let mut psi = CVector::from_element(grid.len(), ZERO);
    for (k, w) in register_frequencies(cfg, &grid).into_iter().enumerate() {
        psi[offset + k] = Complex64::new(gaussian_filter(w, cfg.lambda).sqrt(), 0.0);
    }
    let norm = psi.norm();
    psi / Complex64::new(norm, 0.0)
}
