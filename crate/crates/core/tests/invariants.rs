use bogolab_core::harness::fit_loglog;
use bogolab_core::manybody::Hamiltonian;
use bogolab_core::projectors::{count_decomposition, spectrum};
use bogolab_core::tensor::dot;
use bogolab_core::weights::{choose_cj, counting_violation, domination_violation};
use bogolab_core::{
    alpha_n, reduce_one_body, GeneratorKind, HartreeSolver, ManyBodyState, Model, OneBodyState, PaperWeights,
    PotentialSpec, Propagator, PropagatorOptions, SectorFamily, WeightVector, C64,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> impl Strategy<Value = (usize, usize)> {
    prop_oneof![Just((2, 2)), Just((3, 2)), Just((2, 3)), Just((3, 3)), Just((4, 2)), Just((2, 4))]
}

fn potential() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        (0.1..3.0f64, 0.3..2.0f64).prop_map(|(strength, width)| PotentialSpec::Gaussian { strength, width }),
        (0.1..3.0f64).prop_map(|strength| PotentialSpec::Delta { strength }),
    ]
}

fn model(l: usize, n: usize, spec: &PotentialSpec) -> Model {
    Model::on_lattice(1, l, n, 1.0, 0.02, 0.2, spec).unwrap()
}

fn setup(l: usize, n: usize, seed: u64) -> (ManyBodyState, OneBodyState, ManyBodyState) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = ManyBodyState::random_symmetric(l, n, &mut rng).unwrap();
    let phi = OneBodyState::random(l, &mut rng);
    let b = ManyBodyState::random_symmetric(l, n, &mut rng).unwrap();
    (a, phi, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn generators_are_hermitian((l, n) in shape(), spec in potential(), seed in any::<u64>()) {
        let ham = Hamiltonian::new(&model(l, n, &spec)).unwrap();
        let (a, phi, b) = setup(l, n, seed);
        for kind in [GeneratorKind::Full, GeneratorKind::MeanField, GeneratorKind::Tilde, GeneratorKind::Difference] {
            let ga = ham.apply(kind, a.as_slice(), Some(phi.as_slice())).unwrap();
            let gb = ham.apply(kind, b.as_slice(), Some(phi.as_slice())).unwrap();
            let lhs = dot(a.as_slice(), gb.as_slice().unwrap());
            let rhs = dot(b.as_slice(), ga.as_slice().unwrap()).conj();
            prop_assert!((lhs - rhs).norm() < 1e-12 * (1.0 + lhs.norm()), "{:?}: {lhs} vs {rhs}", kind);
        }
    }

    #[test]
    fn generators_preserve_exchange_symmetry((l, n) in shape(), spec in potential(), seed in any::<u64>()) {
        let ham = Hamiltonian::new(&model(l, n, &spec)).unwrap();
        let (a, phi, _) = setup(l, n, seed);
        for kind in [GeneratorKind::Full, GeneratorKind::Tilde] {
            let g = a.with_amps(ham.apply(kind, a.as_slice(), Some(phi.as_slice())).unwrap());
            prop_assert!(g.symmetry_residual() < 1e-12);
        }
    }

    #[test]
    fn full_evolution_is_unitary((l, n) in shape(), spec in potential(), seed in any::<u64>()) {
        let m = model(l, n, &spec);
        let (a, _, _) = setup(l, n, seed);
        let prop = Propagator::new(&m, PropagatorOptions::default()).unwrap();
        let traj = prop.evolve(&a, GeneratorKind::Full, None, 0.1).unwrap();
        let e0 = traj.stats[0].energy;
        for s in &traj.stats {
            prop_assert!((s.norm - 1.0).abs() < 1e-11);
            prop_assert!((s.energy - e0).abs() < 1e-9 * (1.0 + e0.abs()));
            prop_assert!(s.symmetry_residual < 1e-11);
        }
    }

    #[test]
    fn hartree_flow_conserves_norm_and_energy(l in 3usize..24, n in 2usize..40, spec in potential(), seed in any::<u64>()) {
        let m = Model::on_lattice(1, l, n, 1.0, 0.005, 0.2, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi0 = OneBodyState::random(l, &mut rng);
        let solver = HartreeSolver::new(&m);
        let traj = solver.evolve(&phi0, 0.2).unwrap();
        let e0 = solver.energy(phi0.as_slice());
        for f in &traj.frames {
            let norm = f.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        let e1 = solver.energy(traj.frames.last().unwrap().as_slice().unwrap());
        prop_assert!((e1 - e0).abs() < 1e-3 * (1.0 + e0.abs()), "{e0} -> {e1}");
    }

    #[test]
    fn count_projectors_resolve_identity((l, n) in shape(), seed in any::<u64>()) {
        let (a, phi, _) = setup(l, n, seed);
        let parts = count_decomposition(phi.as_slice(), &a).unwrap();
        let mut sum = vec![C64::new(0.0, 0.0); a.amps.len()];
        for p in &parts {
            sum.iter_mut().zip(p.iter()).for_each(|(s, x)| *s += x);
        }
        let err = sum.iter().zip(a.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-13);
        let ones = alpha_n(&WeightVector::ones(n), &a, phi.as_slice()).unwrap();
        prop_assert!((ones - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sector_round_trip_matches_spectrum((l, n) in shape(), seed in any::<u64>()) {
        let (a, phi, _) = setup(l, n, seed);
        let fam = SectorFamily::decompose(&a, phi.as_slice()).unwrap();
        let back = fam.reconstruct(n).unwrap();
        let err = back.as_slice().iter().zip(a.as_slice()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-12);
        let spec = spectrum(phi.as_slice(), &a).unwrap();
        for (m, s) in fam.masses().iter().zip(&spec.masses) {
            prop_assert!((m - s).abs() < 1e-12);
        }
        prop_assert!(fam.orthogonality_residual() < 1e-12);
    }

    #[test]
    fn one_body_density_is_a_state((l, n) in shape(), seed in any::<u64>()) {
        let (a, _, _) = setup(l, n, seed);
        let g = reduce_one_body(&a);
        prop_assert!((g.trace() - 1.0).abs() < 1e-12);
        prop_assert!(g.hermiticity_residual() < 1e-13);
        prop_assert!(g.eigenvalues().iter().all(|&x| x > -1e-12));
    }

    #[test]
    fn weights_dominate_at_integer_density(rho in 1u32..16, lambda in 1usize..200, j in 1u32..4) {
        let n = rho as usize * lambda;
        prop_assume!(n >= 2);
        let w = PaperWeights::new(n, rho as f64).unwrap();
        let c = choose_cj(&w, j).unwrap();
        prop_assert_eq!(domination_violation(&w, j, c), 0.0);
        for ell in 1..=j {
            prop_assert_eq!(counting_violation(&w, ell, j), 0.0);
        }
    }

    #[test]
    fn loglog_fit_recovers_exponent(slope in -3.0..3.0f64, amp in 0.01..100.0f64, x0 in 0.5..5.0f64) {
        let x: Vec<f64> = (0..5).map(|i| x0 * 1.7f64.powi(i)).collect();
        let y: Vec<f64> = x.iter().map(|v| amp * v.powf(slope)).collect();
        let f = fit_loglog(&x, &y).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-10);
        prop_assert!(f.residual < 1e-10);
    }
}
