use qmetro::classical::{check_classical_db, check_classical_stationarity, ClassicalChain};
use qmetro::models::{classical_ising, AcceptanceFunction, ClassicalSystem, ProposalKernel};
use qmetro::par::Exec;
use qmetro::rng::RngStreams;
use qmetro::stats::estimate;

#[test]
fn ising_energy_matches_enumeration() {
    let (sys, kernel) = classical_ising(2, 3, 1.0, 0.0, true, 3.0).unwrap();
    let af = AcceptanceFunction::new(0.05, 3.0).unwrap();
    let chain = ClassicalChain::new(sys.clone(), kernel, af);
    let mut energies = Vec::new();
    chain
        .run(0, 60_000, &RngStreams::new(3), 0, |k, rec| {
            if k >= 5_000 {
                energies.push(sys.energy(rec.state));
            }
            Ok(())
        })
        .unwrap();
    let report = estimate("energy", &energies, Some(sys.mean_energy())).unwrap();
    assert!(report.z.unwrap().abs() <= 3.0, "{report:?}");
}

#[test]
fn visit_frequencies_match_boltzmann() {
    let sys = ClassicalSystem::new(vec![0.0, 0.4, 1.1, 2.0], 1.0).unwrap();
    let kernel = ProposalKernel::uniform_others(4).unwrap();
    let af = AcceptanceFunction::new(0.1, 1.0).unwrap();
    let chain = ClassicalChain::new(sys.clone(), kernel, af);
    let mut states = Vec::new();
    chain
        .run(3, 50_000, &RngStreams::new(4), 2, |_, rec| {
            states.push(rec.state);
            Ok(())
        })
        .unwrap();
    for (a, pi) in sys.boltzmann().into_iter().enumerate() {
        let ind: Vec<f64> = states.iter().map(|&s| (s == a) as u8 as f64).collect();
        let report = estimate("visits", &ind, Some(pi)).unwrap();
        assert!(report.z.unwrap().abs() <= 3.0, "state {a}: {report:?}");
    }
}

#[test]
fn random_systems_balance_every_branch() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
    for _ in 0..3 {
        let energies: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
        let sys = ClassicalSystem::new(energies, 1.0).unwrap();
        let kernel = ProposalKernel::uniform(4).unwrap();
        let af = AcceptanceFunction::new(0.05, 1.0).unwrap();
        assert!(check_classical_db(&sys, &kernel, &af, 4).unwrap() <= 1e-10);
        let st = check_classical_stationarity(&sys, &kernel, &af, 6).unwrap();
        assert!(st.residual <= 1e-10, "{st:?}");
    }
    assert!(!Exec::Sequential.is_parallel());
}
