//! Rejection-free classical Metropolis chain and its brute-force branch kernel.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::delay::SurprisalOracle;
use crate::error::{Error, PartialStep, Result};
use crate::ledger::DelayLedger;
use crate::models::{AcceptanceFunction, ClassicalSystem, ProposalKernel};
use crate::rng::RngStreams;

pub const DEFAULT_N_MAX: usize = 10_000;

/// Default cap on enumerated paths in the branch-kernel oracle.
pub const PATH_GUARD: f64 = 1e7;

pub fn eval_f(af: &AcceptanceFunction, omega: f64) -> f64 {
    af.f(omega)
}

pub fn eval_s(af: &AcceptanceFunction, omega: f64) -> f64 {
    af.s(omega)
}

/// Which uniform a step is asking for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Draw {
    Proposal,
    Acceptance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalStepRecord {
    /// Output state a_{n+1}.
    pub state: usize,
    /// Number of delayed branches before acceptance.
    pub branches: usize,
    /// a_0, ..., a_{n+1}.
    pub visited: Vec<usize>,
    pub accepted: bool,
}

/// One step of the rejection-free chain. Each branch draws a proposal
/// uniform and then a fresh acceptance uniform.
pub fn classical_step<R: Rng + ?Sized>(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    a0: usize,
    rng: &mut R,
    n_max: usize,
) -> Result<ClassicalStepRecord> {
    classical_step_with(sys, p, af, a0, n_max, |_| rng.random::<f64>())
}

/// `classical_step` with an explicit source of uniforms.
pub fn classical_step_with(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    a0: usize,
    n_max: usize,
    mut draw: impl FnMut(Draw) -> f64,
) -> Result<ClassicalStepRecord> {
    if a0 >= sys.num_states() || p.size() != sys.num_states() {
        return Err(Error::DimensionMismatch {
            expected: sys.num_states(),
            actual: a0.max(p.size()),
        });
    }
    if n_max < 1 {
        return Err(Error::invalid("n_max", "must be at least 1"));
    }
    let t = af.temperature();
    let mut visited = vec![a0];
    let mut ledger = DelayLedger::new(sys.energy(a0));
    for n in 0.. {
        let next = p.sample(visited[n], draw(Draw::Proposal));
        let u = draw(Draw::Acceptance);
        visited.push(next);
        ledger.push(sys.energy(next), af);
        if u <= af.f(ledger.halting_argument(t)) {
            return Ok(ClassicalStepRecord {
                state: next,
                branches: n,
                visited,
                accepted: true,
            });
        }
        if n >= n_max {
            return Err(Error::Truncated {
                n_max,
                partial: Box::new(PartialStep::Classical(ClassicalStepRecord {
                    state: next,
                    branches: n,
                    visited,
                    accepted: false,
                })),
            });
        }
    }
    unreachable!()
}

/// A chain that cycles through one or more proposal kernels, one kernel per step.
#[derive(Debug, Clone)]
pub struct ClassicalChain {
    pub system: ClassicalSystem,
    pub kernels: Vec<ProposalKernel>,
    pub acceptance: AcceptanceFunction,
    pub n_max: usize,
}

impl ClassicalChain {
    pub fn new(system: ClassicalSystem, kernel: ProposalKernel, acceptance: AcceptanceFunction) -> Self {
        Self {
            system,
            kernels: vec![kernel],
            acceptance,
            n_max: DEFAULT_N_MAX,
        }
    }

    /// Runs `steps` steps; step k draws from substream `(chain, k)` and uses
    /// kernel `k % kernels.len()`.
    pub fn run(
        &self,
        a_init: usize,
        steps: usize,
        streams: &RngStreams,
        chain: u64,
        mut sink: impl FnMut(usize, &ClassicalStepRecord) -> Result<()>,
    ) -> Result<usize> {
        if steps < 1 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        let mut state = a_init;
        for k in 0..steps {
            let kernel = &self.kernels[k % self.kernels.len()];
            let mut rng = streams.stream(chain, k as u64);
            let rec =
                classical_step(&self.system, kernel, &self.acceptance, state, &mut rng, self.n_max).map_err(|e| {
                    Error::AtStep {
                        step: k,
                        source: Box::new(e),
                    }
                })?;
            sink(k, &rec)?;
            state = rec.state;
        }
        Ok(state)
    }
}

/// Runs a single-kernel chain and collects the records.
#[allow(clippy::too_many_arguments)]
pub fn run_classical_chain(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    a_init: usize,
    steps: usize,
    streams: &RngStreams,
    chain: u64,
    n_max: usize,
) -> Result<Vec<ClassicalStepRecord>> {
    let mut chain_def = ClassicalChain::new(sys.clone(), p.clone(), *af);
    chain_def.n_max = n_max;
    let mut out = Vec::with_capacity(steps);
    chain_def.run(a_init, steps, streams, chain, |_, r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

fn path_guard(p: &ProposalKernel, n: usize) -> Result<()> {
    let support = (0..p.size())
        .map(|b| (0..p.size()).filter(|&a| p.prob(a, b) > 0.0).count())
        .max()
        .unwrap_or(0) as f64;
    let terms = p.size() as f64 * support.powi(n as i32 + 1);
    if terms > PATH_GUARD {
        return Err(Error::Guard {
            terms,
            limit: PATH_GUARD,
        });
    }
    Ok(())
}

/// Exact branch masses `P_M(n, a | b)`, stored at `(a, b)`, summed over all
/// intermediate paths a_1..a_n.
pub fn branch_kernel_oracle(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n: usize,
) -> Result<DMatrix<f64>> {
    path_guard(p, n)?;
    let k = sys.num_states();
    let mut out = DMatrix::zeros(k, k);
    let mut path = Vec::with_capacity(n + 2);
    for b in 0..k {
        path.clear();
        path.push(b);
        enumerate_paths(sys, p, af, n, &mut path, 1.0, &mut out);
    }
    Ok(out)
}

fn enumerate_paths(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n: usize,
    path: &mut Vec<usize>,
    weight: f64,
    out: &mut DMatrix<f64>,
) {
    let last = *path.last().unwrap();
    for next in 0..sys.num_states() {
        let w = weight * p.prob(next, last);
        if w == 0.0 {
            continue;
        }
        path.push(next);
        if path.len() == n + 2 {
            let energies: Vec<f64> = path.iter().map(|&a| sys.energy(a)).collect();
            let halt = SurprisalOracle::new(&energies, *af, 0.0).halting_weight();
            out[(next, path[0])] += w * halt;
        } else {
            enumerate_paths(sys, p, af, n, path, w, out);
        }
        path.pop();
    }
}

/// Max over n <= n_max and all pairs of |P_M(n,a|b) e^{-E_b/T} - P_M(n,b|a) e^{-E_a/T}|.
pub fn check_classical_db(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
) -> Result<f64> {
    let t = af.temperature();
    let e_min = sys.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let boltz: Vec<f64> = sys.energies().iter().map(|e| (-(e - e_min) / t).exp()).collect();
    let mut worst = 0.0_f64;
    for n in 0..=n_max {
        let m = branch_kernel_oracle(sys, p, af, n)?;
        for a in 0..sys.num_states() {
            for b in 0..sys.num_states() {
                worst = worst.max((m[(a, b)] * boltz[b] - m[(b, a)] * boltz[a]).abs());
            }
        }
    }
    Ok(worst)
}

/// Truncated total kernel and its stationarity residual.
#[derive(Debug, Clone, Serialize)]
pub struct ClassicalStationarity {
    /// max_b (1 - sum_{n <= n_max} sum_a P_M(n, a|b)).
    pub tail: f64,
    /// max_a |sum_b P_trunc(a|b) pi_b + pi_a tail_a - pi_a|.
    pub residual: f64,
}

pub fn check_classical_stationarity(
    sys: &ClassicalSystem,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
) -> Result<ClassicalStationarity> {
    let k = sys.num_states();
    let mut total = DMatrix::zeros(k, k);
    for n in 0..=n_max {
        total += branch_kernel_oracle(sys, p, af, n)?;
    }
    let pi = sys.boltzmann();
    let tails: Vec<f64> = (0..k).map(|b| 1.0 - total.column(b).sum()).collect();
    let residual = (0..k)
        .map(|a| {
            let flow: f64 = (0..k).map(|b| total[(a, b)] * pi[b]).sum();
            (flow + pi[a] * tails[a] - pi[a]).abs()
        })
        .fold(0.0, f64::max);
    Ok(ClassicalStationarity {
        tail: tails.iter().copied().fold(0.0, f64::max),
        residual,
    })
}
