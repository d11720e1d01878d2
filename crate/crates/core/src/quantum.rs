//! Measurement-based quantum Metropolis chain on density matrices.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PartialStep, Result};
use crate::gqpe::{sample_index, EnergyMeter};
use crate::ledger::QuantumDelayLedger;
use crate::linalg::{kron, CMatrix, ZERO};
use crate::models::{hermitize, AcceptanceFunction, DensityMatrix, LocalObservable, ProposalKernel};
use crate::rng::RngStreams;

pub use crate::classical::DEFAULT_N_MAX;

/// Smallest total outcome probability accepted by `measure_local`.
const MIN_PROBABILITY: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumStepRecord {
    /// First GQPE outcome, before the energy correction.
    pub omega0_raw: f64,
    pub omega0_corrected: f64,
    /// Subsystem outcome at branch 0.
    pub d0: usize,
    pub branches: usize,
    /// omega_0, ..., omega_{n+1}.
    pub omegas: Vec<f64>,
    /// (d_k, c_k) for every branch.
    pub outcomes: Vec<(usize, usize)>,
    /// Set when the step hit n_max under [`TruncationPolicy::Continue`].
    #[serde(default)]
    pub truncated: bool,
}

/// What a chain does when a step exceeds n_max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TruncationPolicy {
    /// Abort with [`Error::Truncated`].
    #[default]
    Fail,
    /// Emit the partial record flagged `truncated` and continue from the
    /// state reached at branch n_max.
    Continue,
}

/// Projects the first tensor factor onto a basis state `phi_d`, sampled with
/// probability tr[(<phi_d| (x) I) rho (|phi_d> (x) I)]. Returns `d` and the
/// normalized state of the rest factor.
pub fn measure_local<R: Rng + ?Sized>(
    rho: &DensityMatrix,
    b: &LocalObservable,
    rng: &mut R,
) -> Result<(usize, DensityMatrix)> {
    if rho.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: b.dim(),
            actual: rho.dim(),
        });
    }
    let blocks: Vec<CMatrix> = (0..b.subsystem_dim())
        .map(|d| conditional_block(rho.matrix(), b, d))
        .collect();
    let probs: Vec<f64> = blocks.iter().map(|m| m.trace().re.max(0.0)).collect();
    let total: f64 = probs.iter().sum();
    if total < MIN_PROBABILITY {
        return Err(Error::ZeroProbability { total });
    }
    let d = sample_index(&probs, rng)?;
    let rest = &blocks[d] / Complex64::new(probs[d], 0.0);
    Ok((d, DensityMatrix::new_unchecked(hermitize(&rest))))
}

/// (<phi_d| (x) I) rho (|phi_d> (x) I), unnormalized.
pub(crate) fn conditional_block(rho: &CMatrix, b: &LocalObservable, d: usize) -> CMatrix {
    let m = b.subsystem_dim();
    let r = b.rest_dim();
    let phi = b.basis_vector(d);
    let mut out = CMatrix::zeros(r, r);
    for x in 0..m {
        for y in 0..m {
            let w = phi[x].conj() * phi[y];
            if w == ZERO {
                continue;
            }
            out += rho.view((x * r, y * r), (r, r)) * w;
        }
    }
    out
}

/// |phi_c><phi_c| (x) rho_rest.
pub fn prepare_local(rho_rest: &DensityMatrix, c: usize, b: &LocalObservable) -> Result<DensityMatrix> {
    if c >= b.subsystem_dim() {
        return Err(Error::invalid("outcome", format!("{c} >= {}", b.subsystem_dim())));
    }
    if rho_rest.dim() != b.rest_dim() {
        return Err(Error::DimensionMismatch {
            expected: b.rest_dim(),
            actual: rho_rest.dim(),
        });
    }
    let phi = b.basis_vector(c);
    Ok(DensityMatrix::new_unchecked(kron(
        &(&phi * phi.adjoint()),
        rho_rest.matrix(),
    )))
}

/// omega_0 <- 1/(2 lambda t) + omega_0 e^{-1/(4 lambda t^2)}.
pub fn energy_correction(omega0: f64, lambda: f64, t: f64) -> f64 {
    1.0 / (2.0 * lambda * t) + omega0 * (-1.0 / (4.0 * lambda * t * t)).exp()
}

fn check_inputs<M: EnergyMeter>(
    rho: &DensityMatrix,
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    n_max: usize,
) -> Result<()> {
    let d = meter.hamiltonian().dim();
    for actual in [rho.dim(), b.dim()] {
        if actual != d {
            return Err(Error::DimensionMismatch { expected: d, actual });
        }
    }
    if p.size() != b.subsystem_dim() {
        return Err(Error::DimensionMismatch {
            expected: b.subsystem_dim(),
            actual: p.size(),
        });
    }
    if n_max < 1 {
        return Err(Error::invalid("n_max", "must be at least 1"));
    }
    meter.check_alignment(af.temperature())
}

/// One quantum Metropolis step. Returns the state after the final GQPE
/// measurement together with the step record.
pub fn quantum_step<M: EnergyMeter, R: Rng + ?Sized>(
    rho: &DensityMatrix,
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    rng: &mut R,
    n_max: usize,
) -> Result<(DensityMatrix, QuantumStepRecord)> {
    let (state, record) = step_inner(rho, meter, b, p, af, rng, n_max)?;
    if record.truncated {
        return Err(Error::Truncated {
            n_max,
            partial: Box::new(PartialStep::Quantum(record)),
        });
    }
    Ok((state, record))
}

fn step_inner<M: EnergyMeter, R: Rng + ?Sized>(
    rho: &DensityMatrix,
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    rng: &mut R,
    n_max: usize,
) -> Result<(DensityMatrix, QuantumStepRecord)> {
    check_inputs(rho, meter, b, p, af, n_max)?;
    let t = af.temperature();
    let lambda = meter.lambda();
    let shift = 1.0 / (2.0 * lambda * t);

    let first = meter.measure(rho, rng)?;
    let omega0 = first.omega;
    let mut state = first.state;
    let mut ledger = QuantumDelayLedger::new(omega0, shift);
    let mut outcomes = Vec::new();
    for n in 0.. {
        let (d, rest) = measure_local(&state, b, rng)?;
        let c = p.sample(d, rng.random::<f64>());
        outcomes.push((d, c));
        let prepared = prepare_local(&rest, c, b)?;
        let next = meter.measure(&prepared, rng)?;
        state = next.state;
        let u = rng.random::<f64>();
        ledger.push(next.omega, af);
        let halted = u <= af.f(ledger.halting_argument(t));
        if halted || n >= n_max {
            let record = QuantumStepRecord {
                omega0_raw: omega0,
                omega0_corrected: energy_correction(omega0, lambda, t),
                d0: outcomes[0].0,
                branches: n,
                omegas: ledger.omegas().to_vec(),
                outcomes,
                truncated: !halted,
            };
            return Ok((state, record));
        }
    }
    unreachable!()
}

/// A quantum chain that cycles through its proposal kernels, one per step.
#[derive(Debug, Clone)]
pub struct QuantumChain<M> {
    pub meter: M,
    pub observable: LocalObservable,
    pub kernels: Vec<ProposalKernel>,
    pub acceptance: AcceptanceFunction,
    pub n_max: usize,
    pub truncation: TruncationPolicy,
}

impl<M: EnergyMeter> QuantumChain<M> {
    pub fn new(meter: M, observable: LocalObservable, kernel: ProposalKernel, acceptance: AcceptanceFunction) -> Self {
        Self {
            meter,
            observable,
            kernels: vec![kernel],
            acceptance,
            n_max: DEFAULT_N_MAX,
            truncation: TruncationPolicy::Fail,
        }
    }

    /// Runs `steps` steps from `rho_init`; step k draws from substream
    /// `(chain, k)`. The sink sees each record and the state it produced.
    pub fn run(
        &self,
        rho_init: &DensityMatrix,
        steps: usize,
        streams: &RngStreams,
        chain: u64,
        mut sink: impl FnMut(usize, &QuantumStepRecord, &DensityMatrix) -> Result<()>,
    ) -> Result<DensityMatrix> {
        if steps < 1 {
            return Err(Error::invalid("steps", "must be at least 1"));
        }
        let mut rho = rho_init.clone();
        for k in 0..steps {
            let kernel = &self.kernels[k % self.kernels.len()];
            let mut rng = streams.stream(chain, k as u64);
            let step = match self.truncation {
                TruncationPolicy::Fail => quantum_step,
                TruncationPolicy::Continue => step_inner,
            };
            let (next, rec) = step(
                &rho,
                &self.meter,
                &self.observable,
                kernel,
                &self.acceptance,
                &mut rng,
                self.n_max,
            )
            .map_err(|e| Error::AtStep {
                step: k,
                source: Box::new(e),
            })?;
            sink(k, &rec, &next)?;
            rho = next;
        }
        Ok(rho)
    }
}

/// Runs a single-kernel chain and collects the records.
#[allow(clippy::too_many_arguments)]
pub fn run_quantum_chain<M: EnergyMeter + Clone>(
    rho_init: &DensityMatrix,
    meter: &M,
    b: &LocalObservable,
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    steps: usize,
    streams: &RngStreams,
    chain: u64,
    n_max: usize,
) -> Result<Vec<QuantumStepRecord>> {
    let mut qc = QuantumChain::new(meter.clone(), b.clone(), p.clone(), *af);
    qc.n_max = n_max;
    let mut out = Vec::with_capacity(steps);
    qc.run(rho_init, steps, streams, chain, |_, r, _| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Classical simulation of the quantum step on a commuting instance with
/// r = 1, where every eigenstate of H is a basis state of B: the chain sits
/// in a classical state `a`, each GQPE outcome j is drawn with probability
/// `probs[j][a]`, and the same four-line recursion decides acceptance.
#[allow(clippy::too_many_arguments)]
pub fn resolved_classical_step<R: Rng + ?Sized>(
    omegas: &[f64],
    probs: &[Vec<f64>],
    p: &ProposalKernel,
    af: &AcceptanceFunction,
    lambda: f64,
    a0: usize,
    rng: &mut R,
    n_max: usize,
) -> Result<(usize, QuantumStepRecord)> {
    let t = af.temperature();
    let shift = 1.0 / (2.0 * lambda * t);
    let column = |a: usize| probs.iter().map(|row| row[a]).collect::<Vec<f64>>();
    let omega0 = omegas[sample_index(&column(a0), rng)?];
    let mut ledger = QuantumDelayLedger::new(omega0, shift);
    let mut outcomes = Vec::new();
    let mut state = a0;
    for n in 0.. {
        let c = p.sample(state, rng.random::<f64>());
        outcomes.push((state, c));
        state = c;
        let omega = omegas[sample_index(&column(c), rng)?];
        let u = rng.random::<f64>();
        ledger.push(omega, af);
        let halted = u <= af.f(ledger.halting_argument(t));
        if halted || n >= n_max {
            let record = QuantumStepRecord {
                omega0_raw: omega0,
                omega0_corrected: energy_correction(omega0, lambda, t),
                d0: a0,
                branches: n,
                omegas: ledger.omegas().to_vec(),
                outcomes,
                truncated: !halted,
            };
            if !halted {
                return Err(Error::Truncated {
                    n_max,
                    partial: Box::new(PartialStep::Quantum(record)),
                });
            }
            return Ok((state, record));
        }
    }
    unreachable!()
}
