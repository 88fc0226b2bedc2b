//! Acceptance run: every criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

mod common;

use std::path::PathBuf;
use std::time::Instant;

use bogolab_core::bogoliubov::kernel_bounds_along;
use bogolab_core::harness::{run, write_outputs, ExperimentPlan, Outcome, Status};
use bogolab_core::identities::{fuzz, Identity};
use bogolab_core::manybody::Hamiltonian;
use bogolab_core::projectors::gamma_abc;
use bogolab_core::weights::{choose_cj, counting_violation, cj_sequence, domination_violation};
use bogolab_core::{
    alpha_n, constant_d, densities_from_sectors, evolve_gamma_alpha, evolve_hierarchy, Envelope, ExcitationSplit,
    GeneratorKind, HartreeSolver, HierarchyOptions, ManyBodyState, Model, OneBodyState, PairDensities,
    PaperWeights, PotentialSpec, Propagator, PropagatorOptions, RateConstantForm, SectorFamily, WeightVector,
};
use common::{apply, even_table, l2_diff, max_diff, DenseModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const GAUSSIAN: PotentialSpec = PotentialSpec::Gaussian {
    strength: 1.0,
    width: 1.0,
};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn preset(name: &str) -> ExperimentPlan {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(format!("{name}.json"));
    ExperimentPlan::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn seeds(n: u64) -> Vec<u64> {
    (1000..1000 + n).collect()
}

fn c1_projector_identities() -> Verdict {
    let ids: Vec<Identity> = Identity::ALL.into_iter().filter(|i| *i != Identity::GammaA).collect();
    let mut worst = 0.0_f64;
    let mut failing = Vec::new();
    for (l, n) in [(3, 3), (4, 2)] {
        for check in fuzz(l, n, &seeds(50), &ids).unwrap() {
            worst = worst.max(check.max_residual);
            if !check.pass {
                failing.push(format!("{}@({l},{n})", check.identity.name()));
            }
        }
    }
    verdict(
        failing.is_empty(),
        format!("{} identities x 50 seeds at (3,3),(4,2): max residual {worst:.2e} (tol 1e-10) {failing:?}", ids.len()),
    )
}

fn c2_gamma_a() -> Verdict {
    let mut worst = 0.0_f64;
    let mut count = 0;
    for (l, n) in [(3, 3), (4, 2), (3, 4)] {
        for check in fuzz(l, n, &seeds(50), &[Identity::GammaA]).unwrap() {
            worst = worst.max(check.max_residual);
            count += check.samples;
        }
    }
    verdict(worst <= 1e-10, format!("|gamma_a| over {count} triples: max {worst:.2e} (tol 1e-10)"))
}

/// Residuals of centered differences of `α_N` against the γ sums at `t0`
/// for each `δ`, along the exact or the pair-projected dynamics.
fn derivative_residuals(kind: GeneratorKind, m: &WeightVector, deltas: &[f64]) -> (Vec<f64>, f64) {
    let (l, n, t0) = (3, 3, 0.25);
    let dt = deltas.iter().cloned().fold(f64::INFINITY, f64::min) / 40.0;
    let reach = deltas.iter().cloned().fold(0.0, f64::max);
    let steps0 = (t0 / dt).round() as usize;
    let t_end = (steps0 + (reach / dt).round() as usize) as f64 * dt;
    let model = Model::on_lattice(1, l, n, 1.0, dt, t_end, &GAUSSIAN).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let psi0 = ManyBodyState::random_symmetric(l, n, &mut rng).unwrap();
    let phi0 = OneBodyState::random(l, &mut rng);
    let traj = HartreeSolver::new(&model).evolve(&phi0, t_end).unwrap();
    let prop = Propagator::new(&model, PropagatorOptions::default()).unwrap();
    let psi = prop.evolve(&psi0, kind, Some(&traj), t_end).unwrap();
    let alpha = |i: usize| alpha_n(m, &psi.frames[i], traj.frames[i].as_slice().unwrap()).unwrap();
    let g = gamma_abc(m, &psi.frames[steps0], traj.frames[steps0].as_slice().unwrap(), &prop.ham).unwrap();
    let target = match kind {
        GeneratorKind::Full => g.sum(),
        _ => g.a + g.b,
    };
    let fd = |d: f64| {
        let k = (d / dt).round() as usize;
        (alpha(steps0 + k) - alpha(steps0 - k)) / (2.0 * d)
    };
    let res = deltas.iter().map(|&d| (fd(d) - target).abs()).collect();
    let d = deltas[deltas.len() - 1];
    let richardson = ((4.0 * fd(d) - fd(2.0 * d)) / 3.0 - target).abs();
    (res, richardson)
}

fn c3_derivative_identities() -> Verdict {
    let deltas = [4e-3, 2e-3, 1e-3];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let weights = [
        WeightVector::relative_count(3),
        WeightVector::new((0..=3).map(|_| rng.random::<f64>()).collect()).unwrap(),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [GeneratorKind::Full, GeneratorKind::Tilde] {
        for (wi, m) in weights.iter().enumerate() {
            let (res, rich) = derivative_residuals(kind, m, &deltas);
            let at = res[2];
            let floor = 1e-9;
            let ratios: Vec<f64> = res.windows(2).map(|w| w[0] / w[1]).collect();
            let second_order = res[1] < floor || (3.0..=5.0).contains(&ratios[0]);
            pass &= at < 1e-5 && second_order;
            parts.push(format!(
                "{}/m{wi}: res(1e-3) {at:.1e}, ratio {:.2}, richardson {rich:.1e}",
                kind.name(),
                ratios[0]
            ));
        }
    }
    verdict(pass, parts.join("; "))
}

fn c4_sector_round_trip() -> Verdict {
    let mut worst_mass = 0.0_f64;
    let mut worst_back = 0.0_f64;
    for (l, n) in [(3, 3), (4, 2), (3, 4), (2, 5)] {
        for seed in seeds(50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let psi = ManyBodyState::random_symmetric(l, n, &mut rng).unwrap();
            let phi = OneBodyState::random(l, &mut rng);
            let fam = SectorFamily::decompose(&psi, phi.as_slice()).unwrap();
            worst_mass = worst_mass.max((fam.total_mass() - 1.0).abs());
            let back = fam.reconstruct(n).unwrap();
            worst_back = worst_back.max(l2_diff(back.as_slice(), psi.as_slice()));
        }
    }
    verdict(
        worst_mass <= 1e-10 && worst_back <= 1e-10,
        format!("200 states: |sum mass - 1| {worst_mass:.1e}, reconstruct error {worst_back:.1e} (tol 1e-10)"),
    )
}

/// `|reconstruct(χ̃_T) - Ψ̃_T|` and how far `Ψ̃` moved, at step `dt`.
fn hierarchy_gap(dt: f64) -> (f64, f64) {
    let (m, n, t) = (3, 3, 1.0);
    let model = Model::on_lattice(1, m, n, 1.0, dt, t, &GAUSSIAN).unwrap();
    let phi0 = ExcitationSplit::lattice_bump(&model.lattice).phi0();
    let traj = HartreeSolver::new(&model).evolve(&phi0, t).unwrap();
    let psi0 = ManyBodyState::product(phi0.as_slice(), n).unwrap();
    let full = Propagator::new(&model, PropagatorOptions::default())
        .unwrap()
        .evolve(&psi0, GeneratorKind::Tilde, Some(&traj), t)
        .unwrap();
    let fam0 = SectorFamily::vacuum(phi0.as_slice(), n).unwrap();
    let hier = evolve_hierarchy(&fam0, &model, &traj, t, &HierarchyOptions::tilde(n)).unwrap();
    let back = hier.last().reconstruct(n).unwrap();
    (
        l2_diff(back.as_slice(), full.last().as_slice()),
        l2_diff(full.last().as_slice(), psi0.as_slice()),
    )
}

fn c5_hierarchy_vs_full_space() -> Verdict {
    let (coarse, _) = hierarchy_gap(0.0025);
    let (err, moved) = hierarchy_gap(0.00125);
    let order = (coarse / err).log2();
    verdict(
        err <= 1e-6,
        format!(
            "(M=3,N=3) T=1: |reconstruct - full| {err:.2e} at dt 0.00125 (tol 1e-6; state moved {moved:.2e}); \
             {coarse:.2e} at dt 0.0025, observed order {order:.2}"
        ),
    )
}

fn c6_bogoliubov_representations() -> Verdict {
    let (m, t, k_max) = (3, 1.0, 8);
    let model = Model::on_lattice(1, m, 3, 1.0, 0.005, t, &GAUSSIAN).unwrap();
    let phi0 = ExcitationSplit::lattice_bump(&model.lattice).phi0();
    let traj = HartreeSolver::new(&model).evolve(&phi0, t).unwrap();
    let fam0 = SectorFamily::vacuum(phi0.as_slice(), k_max).unwrap();
    let hier = evolve_hierarchy(&fam0, &model, &traj, t, &HierarchyOptions::bogoliubov(k_max)).unwrap();
    let from_sectors = densities_from_sectors(hier.last());
    let direct = evolve_gamma_alpha(&PairDensities::vacuum(m), &model, &traj, t, 1).unwrap();
    let err = from_sectors.distance(direct.last());
    let tail = hier.stats.last().unwrap().tail;
    let bounds = kernel_bounds_along(&model, &traj).unwrap();
    let k1 = bounds.iter().all(|b| b.k1_holds());
    let k2_sharp = bounds.iter().all(|b| b.k2_sharp_holds());
    let k2_printed = bounds.iter().all(|b| b.k2_printed_holds());
    let worst_printed = bounds.iter().map(|b| b.k2_hs / b.k2_bound_printed).fold(0.0, f64::max);
    verdict(
        err <= 1e-5 && k1 && k2_sharp && k2_printed,
        format!(
            "(gamma, alpha) distance {err:.2e} (tol 1e-5, k_max {k_max}, tail {tail:.1e}); \
             K1 bound {k1}, K2 sharp bound {k2_sharp}, K2 printed bound {k2_printed} (max ratio {worst_printed:.3})"
        ),
    )
}

fn describe_sweep(o: &Outcome) -> String {
    let pts: Vec<String> = o
        .points
        .iter()
        .filter_map(|p| p.summary)
        .map(|(rho, v)| format!("rho {rho}: {v:.4e}"))
        .collect();
    let slope = o.fit.as_ref().map_or("none".to_string(), |f| format!("{:.3}", f.slope));
    format!("{} | slope {slope}", pts.join(", "))
}

fn sweep_verdict(o: &Outcome) -> Verdict {
    let ok = o.points.iter().all(|p| p.status == Status::Ok);
    let decreasing = o.strictly_decreasing == Some(true);
    let slope = o.fit.as_ref().is_some_and(|f| f.slope < 0.0);
    verdict(
        ok && decreasing && slope,
        format!("{} | strictly decreasing {decreasing}", describe_sweep(o)),
    )
}

fn c10_weights_and_envelopes() -> Verdict {
    let rhos = [1u32, 2, 3, 4, 10];
    let checks: Vec<(f64, f64)> = rhos
        .iter()
        .flat_map(|&rho| (2..=10_000usize).map(move |n| (rho, n)))
        .filter(|&(rho, n)| n >= rho as usize)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(rho, n)| {
            let w = PaperWeights::new(n, rho as f64).unwrap();
            let mut dom = 0.0_f64;
            let mut cnt = 0.0_f64;
            for j in 1..=3 {
                let c = choose_cj(&w, j).unwrap();
                dom = dom.max(domination_violation(&w, j, c));
                for ell in 1..=j {
                    cnt = cnt.max(counting_violation(&w, ell, j));
                }
            }
            (dom, cnt)
        })
        .collect();
    let dom = checks.iter().map(|c| c.0).fold(0.0, f64::max);
    let cnt = checks.iter().map(|c| c.1).fold(0.0, f64::max);

    let mut slack = f64::INFINITY;
    for (m, n) in [(2, 4), (2, 8), (4, 8)] {
        let model = Model::on_lattice(1, m, n, 1.0, 0.01, 0.5, &GAUSSIAN).unwrap();
        let phi0 = ExcitationSplit::lattice_bump(&model.lattice).phi0();
        let traj = HartreeSolver::new(&model).evolve(&phi0, 0.5).unwrap();
        let w = PaperWeights::new(n, model.params.rho).unwrap();
        let c = cj_sequence(&w, 3).unwrap();
        for form in [RateConstantForm::Corollary, RateConstantForm::Remark] {
            let d = constant_d(&model.params, &model.potential.norms(), traj.sup_inf_norm, form).unwrap();
            let env = Envelope::new(d, c.clone(), model.params.lambda, model.params.rho).unwrap();
            for j in 1..=3 {
                for i in 0..=50 {
                    let t = i as f64 * 0.01;
                    slack = slack.min(env.gronwall_slack(j, t) / (1.0 + env.beta_derivative(j, t).abs()));
                }
            }
        }
    }

    let plan = preset("envelope");
    let out = run(&plan, None).unwrap();
    let mut worst_margin = f64::INFINITY;
    let mut t0_only = true;
    for p in &out.points {
        for r in &p.rows {
            let t: f64 = r[6].parse().unwrap();
            let m: f64 = r[11].parse::<f64>().unwrap().min(r[12].parse().unwrap());
            if t > 0.0 && m < 0.0 {
                t0_only = false;
            }
            worst_margin = worst_margin.min(m);
        }
    }
    verdict(
        dom == 0.0 && cnt == 0.0 && slack >= -1e-12,
        format!(
            "{} (N, rho) pairs up to N = 1e4: domination violation {dom:e}, counting violation {cnt:e}; \
             min relative Gronwall slack {slack:.1e}; envelope preset min margin {worst_margin:.3e} \
             (negative only at t = 0: {t0_only})",
            checks.len()
        ),
    )
}

fn c11_dense_oracles() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut gen_err = 0.0_f64;
    let mut kry_err = 0.0_f64;
    for (l, n) in [(3, 2), (2, 3)] {
        let dense = DenseModel::new(l, n, 0.9, even_table(l));
        let model = dense.model(0.05, 0.5);
        let ham = Hamiltonian::new(&model).unwrap();
        let phi = OneBodyState::random(l, &mut rng);
        let phi = phi.as_slice();
        let psi: Vec<_> = (0..l.pow(n as u32))
            .map(|_| bogolab_core::C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let h = dense.h();
        let ht = dense.h_tilde(phi);
        for (kind, mat) in [
            (GeneratorKind::Full, h.clone()),
            (GeneratorKind::MeanField, dense.h_mf(phi)),
            (GeneratorKind::Tilde, ht.clone()),
            (GeneratorKind::Difference, &h - &ht),
        ] {
            let got = ham.apply(kind, &psi, Some(phi)).unwrap();
            let want = apply(&mat, &psi);
            let scale = want.iter().map(|z| z.norm()).fold(1.0, f64::max);
            gen_err = gen_err.max(max_diff(got.as_slice().unwrap(), &want) / scale);
        }
        let psi0 = ManyBodyState::random_symmetric(l, n, &mut rng).unwrap();
        let prop = Propagator::new(&model, PropagatorOptions::default()).unwrap();
        let out = prop.evolve(&psi0, GeneratorKind::Full, None, 0.5).unwrap();
        kry_err = kry_err.max(l2_diff(out.last().as_slice(), &dense.evolve(&h, psi0.as_slice(), 0.5)));
        let phi0 = OneBodyState::random(l, &mut rng);
        let traj = HartreeSolver::new(&model).evolve(&phi0, 0.5).unwrap();
        let out = prop.evolve(&psi0, GeneratorKind::Tilde, Some(&traj), 0.5).unwrap();
        let mut want = psi0.as_slice().to_vec();
        for mid in &traj.midpoints {
            want = dense.evolve(&dense.h_tilde(mid.as_slice().unwrap()), &want, 0.05);
        }
        kry_err = kry_err.max(l2_diff(out.last().as_slice(), &want));
    }
    verdict(
        gen_err <= 1e-12 && kry_err <= 1e-9,
        format!("(3,2),(2,3): generator rel. error {gen_err:.1e} (tol 1e-12), Krylov vs dense exp {kry_err:.1e} (tol 1e-9)"),
    )
}

fn payload(plan: &ExperimentPlan, o: &Outcome) -> Vec<String> {
    let dir = tempfile::tempdir().unwrap();
    let (csv, _) = write_outputs(dir.path(), plan, o).unwrap();
    std::fs::read_to_string(csv)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string())
        .collect()
}

fn c12_determinism(previous: &[(&str, ExperimentPlan, Outcome)]) -> Verdict {
    let mut differing = Vec::new();
    let mut checked = Vec::new();
    for name in ["fuzz", "hartree", "envelope"] {
        let plan = preset(name).with_seed(5);
        let a = run(&plan, Some(1)).unwrap();
        let b = run(&plan, Some(2)).unwrap();
        if payload(&plan, &a) != payload(&plan, &b) {
            differing.push(name);
        }
        checked.push(name);
    }
    for (name, plan, first) in previous {
        let again = run(plan, None).unwrap();
        if payload(plan, first) != payload(plan, &again) {
            differing.push(name);
        }
        checked.push(name);
    }
    verdict(
        differing.is_empty(),
        format!("presets {checked:?} rerun: CSV payload differs for {differing:?}"),
    )
}

/// Criteria to run: the numeric arguments, or all of them.
fn selection() -> Vec<usize> {
    let picked: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    if picked.is_empty() {
        (1..=12).collect()
    } else {
        picked
    }
}

fn main() {
    let selected = selection();
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut record = |i: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        if !selected.contains(&i) {
            return;
        }
        let start = Instant::now();
        let v = f();
        println!(
            "criterion {i:>2} {} {name}: {} [{:.1} s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
        results.push((i, v));
    };

    record(1, "projector identities", &mut c1_projector_identities);
    record(2, "gamma_a vanishes", &mut c2_gamma_a);
    record(3, "derivative identities", &mut c3_derivative_identities);
    record(4, "sector round trip", &mut c4_sector_round_trip);
    record(5, "hierarchy vs full space", &mut c5_hierarchy_vs_full_space);
    record(6, "Bogoliubov representations", &mut c6_bogoliubov_representations);

    let mut sweeps = Vec::new();
    for (i, name, label) in [
        (7, "sweep-main", "pair-projected dynamics scaling"),
        (8, "sweep-bog", "Bogoliubov hierarchy scaling"),
        (9, "sweep-density", "micro/macro density scaling"),
    ] {
        record(i, label, &mut || {
            let plan = preset(name);
            let o = run(&plan, None).unwrap();
            let mut v = sweep_verdict(&o);
            if i == 8 {
                let triangle = o.points.iter().all(|p| p.status == Status::Ok);
                v.detail.push_str(&format!(", composite within triangle bound {triangle}"));
            }
            sweeps.push((name, plan, o));
            v
        });
    }

    record(10, "weights and envelopes", &mut c10_weights_and_envelopes);
    record(11, "dense oracles", &mut c11_dense_oracles);
    record(12, "determinism", &mut || c12_determinism(&sweeps));

    let failed: Vec<usize> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria pass{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() { String::new() } else { format!("; failing {failed:?}") }
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
