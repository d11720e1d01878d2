use super::{ClassicalSystem, ProposalKernel};
use crate::error::{Error, Result};
use crate::linalg::{c, kron, CMatrix, ONE, ZERO};

/// Single-qubit Pauli matrix by name ('I', 'X', 'Y', 'Z').
pub fn pauli(name: char) -> CMatrix {
    let entries = match name {
        'I' => [ONE, ZERO, ZERO, ONE],
        'X' => [ZERO, ONE, ONE, ZERO],
        'Y' => [ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO],
        'Z' => [ONE, ZERO, ZERO, -ONE],
        _ => panic!("unknown Pauli {name}"),
    };
    CMatrix::from_row_slice(2, 2, &entries)
}

/// Tensor product of single-site operators; site 0 is the first (most significant) factor.
fn site_product(sites: usize, ops: &[(usize, char)]) -> CMatrix {
    let mut out = CMatrix::identity(1, 1);
    for s in 0..sites {
        let name = ops.iter().find(|(i, _)| *i == s).map_or('I', |(_, p)| *p);
        out = kron(&out, &pauli(name));
    }
    out
}

/// Transverse-field Ising chain
/// H = -J sum Z_i Z_{i+1} - h sum X_i - h_z sum Z_i.
pub fn tfim(sites: usize, coupling: f64, field: f64, longitudinal: f64, periodic: bool) -> Result<CMatrix> {
    if sites == 0 || sites > 12 {
        return Err(Error::invalid("tfim", format!("{sites} sites outside 1..=12")));
    }
    let dim = 1usize << sites;
    let mut h = CMatrix::zeros(dim, dim);
    let bonds = if periodic && sites > 2 { sites } else { sites - 1 };
    for i in 0..bonds {
        h -= site_product(sites, &[(i, 'Z'), ((i + 1) % sites, 'Z')]) * c(coupling, 0.0);
    }
    for i in 0..sites {
        h -= site_product(sites, &[(i, 'X')]) * c(field, 0.0);
        if longitudinal != 0.0 {
            h -= site_product(sites, &[(i, 'Z')]) * c(longitudinal, 0.0);
        }
    }
    Ok(h)
}

/// Classical Ising model on a rows x cols lattice,
/// E(s) = -J sum_<ij> s_i s_j - h sum_i s_i with s_i = +1 for bit 0,
/// paired with the single-spin-flip proposal kernel.
pub fn classical_ising(
    rows: usize,
    cols: usize,
    coupling: f64,
    field: f64,
    periodic: bool,
    temperature: f64,
) -> Result<(ClassicalSystem, ProposalKernel)> {
    let n = rows * cols;
    if n == 0 || n > 16 {
        return Err(Error::invalid("classical ising", format!("{n} spins outside 1..=16")));
    }
    let mut bonds = Vec::new();
    for r in 0..rows {
        for col in 0..cols {
            let i = r * cols + col;
            if col + 1 < cols {
                bonds.push((i, i + 1));
            } else if periodic && cols > 2 {
                bonds.push((i, r * cols));
            }
            if r + 1 < rows {
                bonds.push((i, i + cols));
            } else if periodic && rows > 2 {
                bonds.push((i, col));
            }
        }
    }
    let spin = |state: usize, i: usize| if state >> i & 1 == 0 { 1.0 } else { -1.0 };
    let energies = (0..1usize << n)
        .map(|s| {
            let bond: f64 = bonds.iter().map(|&(i, j)| spin(s, i) * spin(s, j)).sum();
            let mag: f64 = (0..n).map(|i| spin(s, i)).sum();
            -coupling * bond - field * mag
        })
        .collect();
    let system = ClassicalSystem::new(energies, temperature)?;
    let kernel = ProposalKernel::single_flip(n as u32)?;
    Ok((system, kernel))
}

/// Dense diagonal matrix of classical energies, for commuting quantum instances.
pub(crate) fn diagonal_matrix(energies: &[f64]) -> CMatrix {
    let n = energies.len();
    CMatrix::from_fn(n, n, |i, j| if i == j { c(energies[i], 0.0) } else { ZERO })
}
