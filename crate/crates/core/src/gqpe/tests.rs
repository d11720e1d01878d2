use super::*;
use crate::linalg::{c, max_abs_diff, unitarity_residual, CMatrix, CVector};
use crate::models::{build_spectral, gibbs_state, tfim};
use approx::assert_abs_diff_eq;
use proptest::prelude::{prop_assert, proptest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn qubit_z() -> SpectralHamiltonian {
    SpectralHamiltonian::diagonal(&[-1.0, 1.0]).unwrap()
}

fn tfim2() -> SpectralHamiltonian {
    build_spectral(&tfim(2, 1.0, 0.5, 0.0, false).unwrap(), 0.0).unwrap()
}

fn random_state(d: usize, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = CMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let m = &a * a.adjoint();
    let tr = m.trace();
    DensityMatrix::new(m / tr).unwrap()
}

fn eigenstate(h: &SpectralHamiltonian, a: usize) -> DensityMatrix {
    DensityMatrix::pure(&h.eigenvectors().column(a).into_owned())
}

fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

#[test]
fn gaussian_filter_values() {
    assert_abs_diff_eq!(
        gaussian_filter(0.0, 1.0),
        1.0 / std::f64::consts::PI.sqrt(),
        epsilon = 1e-15
    );
    let lambda = 0.7;
    // trapezoid on a wide interval integrates to one
    let h = 1e-3;
    let total: f64 = (-20_000..=20_000)
        .map(|i| gaussian_filter(i as f64 * h, lambda) * h)
        .sum();
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    assert_eq!(gaussian_filter(1.3, lambda), gaussian_filter(-1.3, lambda));
}

#[test]
fn planner_reference_values() {
    let cfg = plan_resources(1e-2, 4.0, 1.0, 1).unwrap();
    assert_abs_diff_eq!(cfg.lambda, 0.23333, epsilon = 1e-4);
    assert_abs_diff_eq!(cfg.lambda, 0.233_300_647_059_359_1, epsilon = 1e-12);
    assert_abs_diff_eq!(cfg.t_max, 1.465_871_197_758_855_7, epsilon = 1e-12);
    assert_eq!((cfg.p, cfg.q), (4, 3));
    assert!(cfg.omega_max >= 4.0);
    assert!(cfg.matching_residual() <= MATCH_TOL);
}

#[test]
fn planner_exactness_and_consistency() {
    for eps in [0.3, 1e-1, 1e-2, 1e-3, 1e-6] {
        for t in [0.2, 1.0, 3.0] {
            let cfg = plan_resources(eps, 2.0, t, 1).unwrap();
            assert_abs_diff_eq!(
                cfg.t_max * cfg.t_max / (2.0 * cfg.lambda),
                (1.0 / eps).ln(),
                epsilon = 1e-10
            );
            assert!(cfg.q <= cfg.p);
            assert!(cfg.e_max <= cfg.omega_max);
            // the acceptance shift is one grid step
            assert_abs_diff_eq!(cfg.shift_in_steps(), 1.0, epsilon = 1e-12);
            cfg.check_shift_on_grid(t).unwrap();
        }
    }
}

#[test]
fn planner_z_scaling() {
    let one = plan_resources(1e-2, 1.0, 1.0, 1).unwrap();
    let two = plan_resources(1e-2, 1.0, 1.0, 2).unwrap();
    assert_abs_diff_eq!(two.lambda, 4.0 * one.lambda, epsilon = 1e-12);
    assert_abs_diff_eq!(two.t_max, 2.0 * one.t_max, epsilon = 1e-12);
    assert!(two.matching_residual() <= MATCH_TOL);
    // spacing z/(2 lambda T): the shift is 1/z of a step and misses the grid
    assert_abs_diff_eq!(two.shift_in_steps(), 0.5, epsilon = 1e-12);
    assert!(matches!(two.check_shift_on_grid(1.0), Err(Error::GridMismatch { .. })));
}

#[test]
fn planner_rejects_bad_input() {
    assert!(matches!(plan_resources(0.0, 1.0, 1.0, 1), Err(Error::Invalid { .. })));
    assert!(matches!(plan_resources(1.0, 1.0, 1.0, 1), Err(Error::Invalid { .. })));
    assert!(matches!(plan_resources(0.1, 1.0, -1.0, 1), Err(Error::Invalid { .. })));
    assert!(matches!(plan_resources(0.1, 1.0, 1.0, 0), Err(Error::Invalid { .. })));
    assert!(matches!(
        plan_resources(0.1, 1e9, 1.0, 1),
        Err(Error::Infeasible { .. })
    ));
    assert!(matches!(
        plan_resources_capped(1e-2, 4.0, 1.0, 1, 3),
        Err(Error::Infeasible { p: 4, cap: 3 })
    ));
}

#[test]
fn config_validation() {
    let cfg = plan_resources(1e-2, 1.0, 1.0, 1).unwrap();
    let json = serde_json::to_string(&cfg).unwrap();
    let back: GqpeConfig = serde_json::from_str(&json).unwrap();
    back.validate().unwrap();
    let det = cfg.detuned(1.03).unwrap();
    assert!(matches!(det.validate(), Err(Error::GridMismatch { .. })));
    assert!(det.check_shift_on_grid(1.0).is_err());
    assert!(cfg.check_shift_on_grid(1.5).is_err());
    assert!(matches!(
        GqpeConfig::new(cfg.lambda, cfg.t_max, 1, 1, 1, 0.01, 10.0, 1.0),
        Err(Error::SpectralBound { .. })
    ));
    assert!(GqpeConfig::new(cfg.lambda, cfg.t_max, 3, 4, 1, 0.01, 1.0, 1.0).is_err());
}

#[test]
fn grid_is_symmetric_and_uniform() {
    for p in 1..=6 {
        let cfg = GqpeConfig::new_unmatched(0.3, 1.7, p, 1, 1, 0.1, 0.0, 1.0).unwrap();
        let g = frequency_grid(&cfg);
        let n = g.len();
        assert_eq!(n, 1 << p);
        for j in 0..n {
            assert_eq!(g.omegas[j], -g.omegas[n - 1 - j]);
            assert_eq!(g.times[j], -g.times[n - 1 - j]);
            assert!(g.omegas[j] != 0.0);
            assert_eq!(g.index_of(g.omegas[j], 1e-9), Some(j));
        }
        assert!(g.omegas.iter().sum::<f64>().abs() < 1e-12);
        for j in 1..n {
            assert_abs_diff_eq!(g.omegas[j] - g.omegas[j - 1], cfg.spacing(), epsilon = 1e-12);
        }
        assert_abs_diff_eq!(g.omegas[n - 1] + g.spacing / 2.0, cfg.omega_max, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cfg.omega_max * cfg.t_max,
            2f64.powi(p as i32 - 1) * std::f64::consts::PI,
            epsilon = 1e-12
        );
        assert_eq!(g.index_of(0.0, 1e-9), None);
    }
}

#[test]
fn grid_matches_bitwise_closed_form() {
    // t = -t_max sum_n (-1)^{j_n} / 2^n and w = -w_max sum_n (-1)^{j_n} / 2^{p-n+1}
    let p = 5;
    let cfg = GqpeConfig::new_unmatched(0.3, 1.7, p, 2, 1, 0.1, 0.0, 1.0).unwrap();
    let g = frequency_grid(&cfg);
    let mut times = Vec::new();
    let mut omegas = Vec::new();
    for j in 0..(1u32 << p) {
        let bit = |n: u32| ((j >> (p - n)) & 1) as i32;
        let sign = |n: u32| if bit(n) == 0 { 1.0 } else { -1.0 };
        times.push(-cfg.t_max * (1..=p).map(|n| sign(n) / 2f64.powi(n as i32)).sum::<f64>());
        omegas.push(-cfg.omega_max * (1..=p).map(|n| sign(n) / 2f64.powi((p - n + 1) as i32)).sum::<f64>());
    }
    omegas.sort_by(f64::total_cmp);
    for j in 0..g.len() {
        assert_abs_diff_eq!(times[j], g.times[j], epsilon = 1e-12);
        assert_abs_diff_eq!(omegas[j], g.omegas[j], epsilon = 1e-12);
    }
}

#[test]
fn cqft_is_unitary() {
    for p in 1..=7 {
        let cfg = GqpeConfig::new_unmatched(0.3, 1.1, p, 1, 1, 0.1, 0.0, 1.0).unwrap();
        assert!(unitarity_residual(&cqft_matrix(&cfg)) <= 1e-12, "p = {p}");
    }
}

#[test]
fn cqft_single_qubit() {
    let cfg = GqpeConfig::new_unmatched(0.3, 2.0, 1, 1, 1, 0.1, 0.0, 1.0).unwrap();
    let f = cqft_matrix(&cfg);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let phase = |x: f64| Complex::from_polar(s, x);
    let q = std::f64::consts::FRAC_PI_4;
    let expected = CMatrix::from_row_slice(2, 2, &[phase(q), phase(-q), phase(-q), phase(q)]);
    assert!(max_abs_diff(&f, &expected) < 1e-15);
}

type Complex = num_complex::Complex64;

#[test]
fn ancilla_state() {
    let cfg = plan_resources(1e-3, 1.0, 1.0, 1).unwrap();
    let psi = prepare_ancilla(&cfg);
    assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-14);
    let offset = (1 << (cfg.p - 1)) - (1 << (cfg.q - 1));
    let grid = frequency_grid(&cfg);
    let amp0 = psi[offset].re / gaussian_filter(grid.omegas[offset], cfg.lambda).sqrt();
    for (j, a) in psi.iter().enumerate() {
        let inside = j >= offset && j < offset + (1 << cfg.q);
        if inside {
            assert_abs_diff_eq!(
                a.re,
                amp0 * gaussian_filter(grid.omegas[j], cfg.lambda).sqrt(),
                epsilon = 1e-14
            );
        } else {
            assert_eq!(*a, Complex::new(0.0, 0.0));
        }
    }
}

#[test]
fn effective_filter_error_within_three_epsilon() {
    let mut last = f64::INFINITY;
    for eps in [1e-1, 1e-2, 1e-3] {
        let cfg = plan_resources(eps, 1.0, 1.0, 1).unwrap();
        let err = filter_error(&cfg, Exec::Sequential);
        assert!(err <= 3.0 * eps, "eps {eps}: {err}");
        assert!(err < last);
        last = err;
    }
}

#[test]
fn effective_filter_is_periodic() {
    let cfg = plan_resources(1e-2, 1.0, 1.0, 1).unwrap();
    let f = effective_filter(&cfg);
    for w in [-0.3, 0.0, 1.7, 5.1] {
        assert_abs_diff_eq!(f.eval(w), f.eval(w + 2.0 * cfg.omega_max), epsilon = 1e-12);
        assert_abs_diff_eq!(f.eval(w), f.eval(-w), epsilon = 1e-12);
    }
}

#[test]
fn sweep_is_mode_independent() {
    let cfg = plan_resources(1e-2, 1.0, 1.0, 1).unwrap();
    let a = filter_sweep(&cfg, 257, Exec::Sequential);
    let b = filter_sweep(&cfg, 257, Exec::Parallel);
    assert_eq!(a, b);
    assert_abs_diff_eq!(a[0].omega, -(cfg.e_max + cfg.omega_max), epsilon = 1e-12);
}

#[test]
fn direct_povm_is_complete() {
    for (h, eps) in [(qubit_z(), 1e-2), (tfim2(), 1e-3)] {
        let cfg = plan_resources(eps, h.e_max(), 1.0, 1).unwrap();
        let povm = build_direct_povm(&h, &cfg).unwrap();
        let mut sum = CMatrix::zeros(h.dim(), h.dim());
        for j in 0..povm.len() {
            let e = povm.effect(j);
            let m = povm.operator(j);
            assert!(max_abs_diff(&(m.adjoint() * &m), &e) < 1e-12);
            let (vals, _) = crate::linalg::eigh(&e).unwrap();
            assert!(vals[0] >= -1e-14);
            sum += e;
        }
        assert!(max_abs_diff(&sum, &CMatrix::identity(h.dim(), h.dim())) <= 1e-12);
    }
}

#[test]
fn direct_povm_eigenstate_distribution() {
    let h = tfim2();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    let grid = frequency_grid(&cfg);
    for a in 0..h.dim() {
        let e = h.eigenvalues()[a];
        let norm: f64 = grid.omegas.iter().map(|w| gaussian_filter(w - e, cfg.lambda)).sum();
        let probs = povm.probabilities(&eigenstate(&h, a));
        for (j, w) in grid.omegas.iter().enumerate() {
            assert_abs_diff_eq!(probs[j], gaussian_filter(w - e, cfg.lambda) / norm, epsilon = 1e-12);
        }
    }
}

#[test]
fn direct_povm_dephases_coherences() {
    let h = qubit_z();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    let plus = CVector::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
    let rho = DensityMatrix::pure(&plus);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = povm_measure(&rho, &povm, &mut rng).unwrap();
    let cj = povm.weights(out.index);
    let p = (cj[0] + cj[1]) / 2.0;
    let m = out.state.matrix();
    assert_abs_diff_eq!(m[(0, 0)].re, cj[0] / (2.0 * p), epsilon = 1e-12);
    assert_abs_diff_eq!(m[(0, 1)].re, (cj[0] * cj[1]).sqrt() / (2.0 * p), epsilon = 1e-12);
    assert_abs_diff_eq!(out.state.trace(), 1.0, epsilon = 1e-12);
    assert_eq!(Some(out.index), povm.grid().index_of(out.omega, 0.0));
}

#[test]
fn direct_povm_spectral_bound() {
    let h = SpectralHamiltonian::diagonal(&[-30.0, 30.0]).unwrap();
    let cfg = plan_resources(1e-2, 1.0, 1.0, 1).unwrap();
    assert!(matches!(build_direct_povm(&h, &cfg), Err(Error::SpectralBound { .. })));
    assert!(matches!(GqpeCircuit::new(&h, &cfg), Err(Error::SpectralBound { .. })));
}

#[test]
fn direct_povm_sampling_matches_probabilities() {
    let h = tfim2();
    let cfg = plan_resources(1e-1, h.e_max(), 1.0, 1).unwrap();
    let povm = build_direct_povm(&h, &cfg).unwrap();
    let rho = random_state(4, 9);
    let probs = povm.probabilities(&rho);
    let mut counts = vec![0usize; povm.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 20_000;
    for _ in 0..n {
        counts[povm_measure(&rho, &povm, &mut rng).unwrap().index] += 1;
    }
    for j in 0..povm.len() {
        let sigma = (probs[j] * (1.0 - probs[j]) / n as f64).sqrt();
        assert!((counts[j] as f64 / n as f64 - probs[j]).abs() <= 4.0 * sigma + 1e-12);
    }
}

#[test]
fn circuit_unitary_and_kraus_completeness() {
    let h = tfim2();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let circ = GqpeCircuit::new(&h, &cfg).unwrap();
    assert!(unitarity_residual(&circ.unitary()) < 1e-12);
    let mut sum = CMatrix::zeros(4, 4);
    for k in circ.kraus_operators() {
        sum += k.adjoint() * k;
        // every Kraus operator is a function of H
        let ke = h.to_eigenbasis(k);
        for a in 0..4 {
            for b in 0..4 {
                if a != b {
                    assert!(ke[(a, b)].norm() < 1e-12);
                }
            }
            assert!(ke[(a, a)].im.abs() < 1e-12);
        }
    }
    assert!(max_abs_diff(&sum, &CMatrix::identity(4, 4)) < 1e-12);
}

#[test]
fn circuit_kraus_matches_joint_simulation() {
    let h = tfim2();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let circ = GqpeCircuit::new(&h, &cfg).unwrap();
    let rho = random_state(4, 4);
    let joint = circ.joint_state(&rho).unwrap();
    assert_abs_diff_eq!(joint.trace().re, 1.0, epsilon = 1e-12);
    for (l, k) in circ.kraus_operators().iter().enumerate() {
        let block = joint.view((4 * l, 4 * l), (4, 4)).clone_owned();
        assert!(max_abs_diff(&block, &(k * rho.matrix() * k.adjoint())) < 1e-12);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let out = circuit_gqpe_measure(&rho, &circ, &mut rng).unwrap();
    let k = &circ.kraus_operators()[out.index];
    let unnorm = k * rho.matrix() * k.adjoint();
    let expected = &unnorm / unnorm.trace();
    assert!(max_abs_diff(out.state.matrix(), &expected) < 1e-12);
}

#[test]
fn circuit_matches_direct_povm() {
    for h in [qubit_z(), tfim2()] {
        for eps in [1e-1, 1e-2, 1e-3] {
            let cfg = plan_resources(eps, h.e_max(), 1.0, 1).unwrap();
            let povm = build_direct_povm(&h, &cfg).unwrap();
            let circ = GqpeCircuit::new(&h, &cfg).unwrap();
            let mut inputs: Vec<DensityMatrix> = (0..h.dim()).map(|a| eigenstate(&h, a)).collect();
            inputs.push(random_state(h.dim(), 5));
            inputs.push(gibbs_state(&h, 0.8).unwrap());
            for rho in &inputs {
                let d = tv(&povm.probabilities(rho), &circ.outcome_distribution(rho));
                assert!(d <= 5.0 * eps, "eps {eps}: tv {d}");
            }
        }
    }
}

#[test]
fn circuit_respects_simulator_cap() {
    let h = tfim2();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    assert!(matches!(
        GqpeCircuit::with_cap(&h, &cfg, 100),
        Err(Error::SimulatorCap {
            entries: 1024,
            cap: 100
        })
    ));
}

#[test]
fn exact_meter_reports_eigenvalues() {
    let h = SpectralHamiltonian::diagonal(&[0.5, -1.0, 0.5, 2.0]).unwrap();
    let meter = ExactEnergyMeter::new(&h, 1e12).unwrap();
    assert_eq!(meter.levels(), &[-1.0, 0.5, 2.0]);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for a in 0..4 {
        let out = meter.measure(&eigenstate(&h, a), &mut rng).unwrap();
        assert_eq!(out.omega, h.eigenvalues()[a]);
    }
    meter.check_alignment(1.0).unwrap();
    let coarse = ExactEnergyMeter::new(&h, 10.0).unwrap();
    assert!(coarse.check_alignment(1.0).is_err());
    // a degenerate level keeps its coherence
    let mixed = DensityMatrix::maximally_mixed(4);
    let out = meter.measure(&mixed, &mut rng).unwrap();
    assert_abs_diff_eq!(out.state.trace(), 1.0, epsilon = 1e-14);
}

#[test]
fn backend_dispatch() {
    let h = qubit_z();
    let cfg = plan_resources(1e-2, h.e_max(), 1.0, 1).unwrap();
    let direct = Backend::build(BackendKind::Direct, &h, &cfg).unwrap();
    let circuit = Backend::build(BackendKind::Circuit, &h, &cfg).unwrap();
    assert_eq!(direct.lambda(), cfg.lambda);
    let (w1, a1) = direct.kraus_table();
    let (w2, a2) = circuit.kraus_table();
    assert_eq!(w1, w2);
    assert_eq!(a1.len(), a2.len());
    direct.check_alignment(1.0).unwrap();
}

#[test]
fn sample_index_skips_zeros() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..1000 {
        let i = sample_index(&[0.0, 0.3, 0.0, 0.7, 0.0], &mut rng).unwrap();
        assert!(i == 1 || i == 3);
    }
    assert!(matches!(
        sample_index(&[0.0, 0.0], &mut rng),
        Err(Error::ZeroProbability { .. })
    ));
}

proptest! {
    #[test]
    fn povm_preserves_trace(seed in 0u64..1000, eps_exp in 1u32..4) {
        let h = tfim2();
        let eps = 10f64.powi(-(eps_exp as i32));
        let cfg = plan_resources(eps, h.e_max(), 1.0, 1).unwrap();
        let povm = build_direct_povm(&h, &cfg).unwrap();
        let rho = random_state(4, seed);
        let total: f64 = povm.probabilities(&rho).iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = povm_measure(&rho, &povm, &mut rng).unwrap();
        prop_assert!(out.state.validate().is_ok());
    }
}
