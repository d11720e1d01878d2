//! Brute-force branch superoperators of the quantum chain.
//!
//! Everything is written in the eigenbasis of H. A superoperator is a
//! d^2 x d^2 matrix acting on row-major vec(rho), so `S[(a,d),(b,c)]` is the
//! coefficient Q_{abcd} of |psi_a><psi_b| rho |psi_c><psi_d|. Branch n sums
//! over all grid tuples (j_0, ..., j_{n+1}) of
//! `w(omega) K_{j_{n+1}} L K_{j_n} ... L K_{j_0}`, where `K_j` is the GQPE
//! Kraus map, `L = sum_{c,d} P(c|d) X_cd . X_cd^dagger` the local update and
//! `w` the halting weight f_n e^{-S_0^n}.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::delay::SurprisalOracle;
use crate::error::{Error, Result};
use crate::gqpe::EnergyMeter;
use crate::linalg::{self, CMatrix, ZERO};
use crate::models::{boltzmann_weights, AcceptanceFunction, LocalObservable, ProposalKernel};
use crate::par::Exec;

/// Default cap on enumerated terms (grid tuples times d^2).
pub const TERM_GUARD: f64 = 1e8;

/// Branch superoperators Q^(0..=n_max) and the channel D of trajectories
/// still running after branch n_max.
#[derive(Debug, Clone)]
pub struct BranchSuperoperators {
    pub dim: usize,
    pub energies: Vec<f64>,
    pub branches: Vec<CMatrix>,
    pub delayed: CMatrix,
}

impl BranchSuperoperators {
    /// Q_{abcd} of branch n.
    pub fn q(&self, n: usize, a: usize, b: usize, c: usize, d: usize) -> Complex64 {
        let k = self.dim;
        self.branches[n][(a * k + d, b * k + c)]
    }

    /// Applies a superoperator to an eigenbasis matrix.
    pub fn apply(&self, sup: &CMatrix, rho: &CMatrix) -> CMatrix {
        let k = self.dim;
        let v = CMatrix::from_row_slice(k * k, 1, rho.transpose().as_slice());
        let out = sup * v;
        CMatrix::from_row_slice(k, k, out.as_slice())
    }

    /// sum_{n <= n_max} Q^(n).
    pub fn total(&self) -> CMatrix {
        self.branches
            .iter()
            .fold(CMatrix::zeros(self.dim.pow(2), self.dim.pow(2)), |acc, q| acc + q)
    }
}

struct Tables {
    d: usize,
    omegas: Vec<f64>,
    /// A_j(E_a) A_j(E_b), the diagonal of K_j, row-major in (a, b).
    kraus: Vec<Vec<f64>>,
    local: CMatrix,
}

fn build_tables<M: EnergyMeter>(meter: &M, b: &LocalObservable, p: &ProposalKernel) -> Result<Tables> {
    let h = meter.hamiltonian();
    let d = h.dim();
    if b.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: b.dim(),
        });
    }
    if p.size() != b.subsystem_dim() {
        return Err(Error::DimensionMismatch {
            expected: b.subsystem_dim(),
            actual: p.size(),
        });
    }
    let (omegas, amps) = meter.kraus_table();
    let kraus = amps
        .iter()
        .map(|row| {
            let mut diag = Vec::with_capacity(d * d);
            for a in 0..d {
                for bb in 0..d {
                    diag.push(row[a] * row[bb]);
                }
            }
            diag
        })
        .collect();
    let m = b.subsystem_dim();
    let mut local = CMatrix::zeros(d * d, d * d);
    for c in 0..m {
        for dd in 0..m {
            let w = p.prob(c, dd);
            if w == 0.0 {
                continue;
            }
            let x = h.to_eigenbasis(&b.transition_operator(c, dd));
            local += x.kronecker(&x.map(|z| z.conj())) * Complex64::new(w, 0.0);
        }
    }
    Ok(Tables {
        d,
        omegas: omegas.to_vec(),
        kraus,
        local,
    })
}

fn scale_rows(m: &CMatrix, diag: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (i, &w) in diag.iter().enumerate() {
        out.row_mut(i).scale_mut(w);
    }
    out
}

/// Enumerates the branch superoperators for n = 0..=n_max.
pub fn branch_superoperators<M: EnergyMeter>(
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
    exec: Exec,
) -> Result<BranchSuperoperators> {
    branch_superoperators_guarded(meter, b, p, af, n_max, exec, TERM_GUARD)
}

pub fn branch_superoperators_guarded<M: EnergyMeter>(
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
    exec: Exec,
    guard: f64,
) -> Result<BranchSuperoperators> {
    let tables = build_tables(meter, b, p)?;
    let d = tables.d;
    let grid = tables.omegas.len();
    let terms = (grid as f64).powi(n_max as i32 + 2) * (d * d) as f64;
    if terms > guard {
        return Err(Error::Guard { terms, limit: guard });
    }
    let shift = 1.0 / (2.0 * meter.lambda() * af.temperature());
    let zero = CMatrix::zeros(d * d, d * d);
    let per_root = exec.map_indexed(grid, |j0| {
        let mut acc = Accumulator {
            branches: vec![zero.clone(); n_max + 1],
            delayed: zero.clone(),
        };
        let start = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            d * d,
            tables.kraus[j0].iter().map(|&w| Complex64::new(w, 0.0)),
        ));
        if start.iter().any(|z| *z != ZERO) {
            let mut path = vec![tables.omegas[j0]];
            descend(&tables, af, shift, n_max, &mut path, &start, &mut acc);
        }
        acc
    });
    let mut branches = vec![zero.clone(); n_max + 1];
    let mut delayed = zero;
    for acc in per_root {
        for (total, part) in branches.iter_mut().zip(acc.branches) {
            *total += part;
        }
        delayed += acc.delayed;
    }
    Ok(BranchSuperoperators {
        dim: d,
        energies: meter.hamiltonian().eigenvalues().to_vec(),
        branches,
        delayed,
    })
}

struct Accumulator {
    branches: Vec<CMatrix>,
    delayed: CMatrix,
}

fn descend(
    tables: &Tables,
    af: &AcceptanceFunction,
    shift: f64,
    n_max: usize,
    path: &mut Vec<f64>,
    prefix: &CMatrix,
    acc: &mut Accumulator,
) {
    let moved = &tables.local * prefix;
    for (j, diag) in tables.kraus.iter().enumerate() {
        if diag.iter().all(|&w| w == 0.0) {
            continue;
        }
        let next = scale_rows(&moved, diag);
        path.push(tables.omegas[j]);
        let n = path.len() - 2;
        let mut oracle = SurprisalOracle::new(path, *af, shift);
        let halt = oracle.halting_weight();
        acc.branches[n] += &next * Complex64::new(halt, 0.0);
        if n == n_max {
            let delay = oracle.delay_weight();
            acc.delayed += &next * Complex64::new(delay, 0.0);
        } else {
            descend(tables, af, shift, n_max, path, &next, acc);
        }
        path.pop();
    }
}

/// Branch superoperator Q^(n) alone.
pub fn branch_superoperator_oracle<M: EnergyMeter>(
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n: usize,
) -> Result<CMatrix> {
    let all = branch_superoperators(meter, b, p, af, n, Exec::default())?;
    Ok(all.branches[n].clone())
}

#[derive(Debug, Clone, Serialize)]
pub struct BranchReport {
    pub n: usize,
    pub violation: f64,
    pub max_abs_q: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DetailedBalanceReport {
    pub max_violation: f64,
    pub max_abs_q: f64,
    /// max_violation / max_abs_q.
    pub relative_violation: f64,
    pub per_branch: Vec<BranchReport>,
    /// max_{b,c} |sum_a (sum_n Q^(n) + D)_{abca} - delta_bc|.
    pub trace_residual: f64,
    /// Probability of running past n_max, maximized over eigenstate inputs.
    pub tail: f64,
}

/// max over a,b,c,d of |Q_abcd e^{-E_bc/T} - conj(Q_badc) e^{-E_ad/T}|.
pub fn detailed_balance_violation(q: &CMatrix, energies: &[f64], t: f64) -> f64 {
    let k = energies.len();
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let pair = |x: usize, y: usize| (-((energies[x] + energies[y]) / 2.0 - e_min) / t).exp();
    let at = |a: usize, b: usize, c: usize, d: usize| q[(a * k + d, b * k + c)];
    let mut worst = 0.0_f64;
    for a in 0..k {
        for b in 0..k {
            for c in 0..k {
                for d in 0..k {
                    let lhs = at(a, b, c, d) * pair(b, c);
                    let rhs = at(b, a, d, c).conj() * pair(a, d);
                    worst = worst.max((lhs - rhs).norm());
                }
            }
        }
    }
    worst
}

fn trace_map(sup: &CMatrix, k: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(k, k, |b, c| (0..k).map(|a| sup[(a * k + a, b * k + c)]).sum())
}

pub fn db_report(ops: &BranchSuperoperators, t: f64) -> DetailedBalanceReport {
    let k = ops.dim;
    let per_branch: Vec<BranchReport> = ops
        .branches
        .iter()
        .enumerate()
        .map(|(n, q)| BranchReport {
            n,
            violation: detailed_balance_violation(q, &ops.energies, t),
            max_abs_q: linalg::max_abs(q),
        })
        .collect();
    let max_violation = per_branch.iter().map(|r| r.violation).fold(0.0, f64::max);
    let max_abs_q = per_branch.iter().map(|r| r.max_abs_q).fold(0.0, f64::max);
    let total = ops.total();
    let with_delay = trace_map(&(&total + &ops.delayed), k);
    let trace_residual = linalg::max_abs_diff(&with_delay, &CMatrix::identity(k, k));
    let halted = trace_map(&total, k);
    let tail = (0..k).map(|b| 1.0 - halted[(b, b)].re).fold(0.0, f64::max);
    DetailedBalanceReport {
        max_violation,
        max_abs_q,
        relative_violation: if max_abs_q > 0.0 {
            max_violation / max_abs_q
        } else {
            0.0
        },
        per_branch,
        trace_residual,
        tail,
    }
}

pub fn check_quantum_db<M: EnergyMeter>(
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
    exec: Exec,
) -> Result<DetailedBalanceReport> {
    let ops = branch_superoperators(meter, b, p, af, n_max, exec)?;
    Ok(db_report(&ops, af.temperature()))
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    /// Trace distance of sum_n Q^(n)(rho_T) + tail rho_T from rho_T.
    pub residual_best: f64,
    /// residual_best plus the tail mass (any placement of the tail).
    pub residual_worst: f64,
    /// 1 - tr sum_n Q^(n)(rho_T).
    pub tail: f64,
}

pub fn stationarity_report(ops: &BranchSuperoperators, t: f64) -> StationarityReport {
    let k = ops.dim;
    let pi = boltzmann_weights(&ops.energies, t);
    let rho_t = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        k,
        pi.iter().map(|&w| Complex64::new(w, 0.0)),
    ));
    let out = ops.apply(&ops.total(), &rho_t);
    let tail = 1.0 - out.trace().re;
    let repaired = &out + &rho_t * Complex64::new(tail, 0.0);
    let residual_best = linalg::trace_distance(&repaired, &rho_t);
    StationarityReport {
        residual_best,
        residual_worst: residual_best + tail.abs(),
        tail,
    }
}

pub fn check_stationarity<M: EnergyMeter>(
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
    exec: Exec,
) -> Result<StationarityReport> {
    let ops = branch_superoperators(meter, b, p, af, n_max, exec)?;
    Ok(stationarity_report(&ops, af.temperature()))
}
