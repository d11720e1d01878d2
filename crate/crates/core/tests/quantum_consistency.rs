use qmetro::error::Error;
use qmetro::gqpe::{build_direct_povm, plan_resources, EnergyMeter};
use qmetro::linalg::{c, trace_distance, CMatrix};
use qmetro::models::{build_spectral, pauli, tfim, AcceptanceFunction, DensityMatrix, LocalObservable, ProposalKernel};
use qmetro::par::Exec;
use qmetro::qoracle::branch_superoperators;
use qmetro::quantum::{quantum_step, QuantumChain, TruncationPolicy};
use qmetro::rng::RngStreams;

// Averaging single-step outputs split by branch count must reproduce the
// oracle's branch superoperators applied to the same input.
#[test]
fn trajectories_match_branch_superoperators() {
    let hm = pauli('Z') + pauli('X') * c(0.6, 0.0);
    let h = build_spectral(&hm, 0.0).unwrap();
    let cfg = plan_resources(1e-1, h.e_max(), 1.0, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    let b = LocalObservable::computational(vec![1.0, -1.0], 1).unwrap();
    let p = ProposalKernel::uniform_others(2).unwrap();
    let af = AcceptanceFunction::new(0.05, 1.0).unwrap();
    let rho = DensityMatrix::new(CMatrix::from_row_slice(
        2,
        2,
        &[c(0.7, 0.0), c(0.2, -0.1), c(0.2, 0.1), c(0.3, 0.0)],
    ))
    .unwrap();

    let n_branch = 3;
    let ops = branch_superoperators(&povm, &b, &p, &af, n_branch - 1, Exec::Parallel).unwrap();
    let rho_eig = h.to_eigenbasis(rho.matrix());
    let expected: Vec<CMatrix> = ops.branches.iter().map(|q| ops.apply(q, &rho_eig)).collect();

    let samples = 100_000;
    let streams = RngStreams::new(5);
    // per branch and entry: sums of re, im and their squares
    let mut sum = vec![[0.0f64; 16]; n_branch];
    for k in 0..samples {
        let mut rng = streams.stream(0, k);
        let (out, n) = match quantum_step(&rho, &povm, &b, &p, &af, &mut rng, 500) {
            Ok((out, rec)) => (out, rec.branches),
            Err(Error::Truncated { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        if n >= n_branch {
            continue;
        }
        let m = h.to_eigenbasis(out.matrix());
        for i in 0..4 {
            let z = m[(i / 2, i % 2)];
            sum[n][i] += z.re;
            sum[n][4 + i] += z.im;
            sum[n][8 + i] += z.re * z.re;
            sum[n][12 + i] += z.im * z.im;
        }
    }
    let nf = samples as f64;
    for n in 0..n_branch {
        for i in 0..4 {
            let want = expected[n][(i / 2, i % 2)];
            for (part, target) in [(0, want.re), (4, want.im)] {
                let mean = sum[n][part + i] / nf;
                let var = sum[n][8 + part + i] / nf - mean * mean;
                let sigma = (var / nf).sqrt();
                assert!(
                    (mean - target).abs() <= 3.0 * sigma + 1e-12,
                    "branch {n} entry {i} part {part}: {mean} vs {target} (sigma {sigma})"
                );
            }
        }
    }
}

#[test]
fn high_temperature_output_is_nearly_maximally_mixed() {
    let hm = tfim(2, 1.0, 0.5, 0.25, false).unwrap();
    let h = build_spectral(&hm, 0.0).unwrap();
    let t = 100.0 * h.spectral_width();
    let cfg = plan_resources(1e-2, h.e_max(), t, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    // B spans the whole register: a one-qubit B leaves the other qubit
    // untouched when the GQPE barely resolves energies
    let b = LocalObservable::computational(vec![0.0, 1.0, 2.0, 3.0], 1).unwrap();
    let p = ProposalKernel::uniform_others(4).unwrap();
    let af = AcceptanceFunction::new(0.05, t).unwrap();
    let mut chain = QuantumChain::new(povm, b, p, af);
    chain.n_max = 300;
    chain.truncation = TruncationPolicy::Continue;

    let start = DensityMatrix::pure(&h.eigenvectors().column(0).into_owned());
    // the output rho is the trajectory ensemble; each snapshot is estimated
    // from independent chains
    let (chains, burn_in, snapshots) = (400, 100, 100);
    let streams = RngStreams::new(8);
    let per_chain = Exec::Parallel.map_indexed(chains, |i| {
        let mut states = Vec::with_capacity(snapshots);
        chain
            .run(&start, burn_in + snapshots, &streams, i as u64, |k, _, state| {
                if k >= burn_in {
                    states.push(state.matrix().clone());
                }
                Ok(())
            })
            .unwrap();
        states
    });
    let mixed = CMatrix::identity(4, 4) * c(0.25, 0.0);
    let mean_dist = (0..snapshots)
        .map(|k| {
            let rho = per_chain.iter().fold(CMatrix::zeros(4, 4), |acc, s| acc + &s[k]) * c(1.0 / chains as f64, 0.0);
            trace_distance(&rho, &mixed)
        })
        .sum::<f64>()
        / snapshots as f64;
    assert!(mean_dist <= 0.05, "mean trace distance {mean_dist}");
}

#[test]
fn meter_alignment_is_checked_before_sampling() {
    let h = build_spectral(&pauli('Z'), 0.0).unwrap();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    assert!(povm.check_alignment(1.0).is_ok());
    assert!(povm.check_alignment(1.3).is_err());
}
