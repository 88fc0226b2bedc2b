use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::identities::{fuzz, Identity};
use crate::manybody::{norm_difference_sq, GeneratorKind, ManyBodyState, Propagator, PropagatorOptions};
use crate::model::{constant_d, Model};
use crate::observables::micro_macro_series;
use crate::onebody::{ExcitationSplit, HartreeSolver, HartreeTrajectory};
use crate::projectors::{alpha_n, WeightVector};
use crate::sectors::{evolve_hierarchy, HierarchyOptions, SectorFamily};
use crate::weights::{cj_sequence, envelope_report, Envelope, PaperWeights};

use super::fit::{fit_loglog, ScalingFit};
use super::plan::{ExperimentKind, ExperimentOptions, ExperimentPlan, GridPoint};
use super::report::Status;

/// Rows and bookkeeping of one grid point.
#[derive(Clone, Debug)]
pub struct PointResult {
    pub point: GridPoint,
    pub status: Status,
    pub error: Option<String>,
    pub warnings: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub runtime_s: f64,
    /// `(ρ, metric)` entering the scaling fit.
    pub summary: Option<(f64, f64)>,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub header: Vec<String>,
    pub points: Vec<PointResult>,
    pub fit: Option<ScalingFit>,
    pub fit_error: Option<String>,
    pub strictly_decreasing: Option<bool>,
}

impl Outcome {
    pub fn all_ok(&self) -> bool {
        self.points.iter().all(|p| p.status == Status::Ok)
    }

    /// `0` when every point succeeded, `2` otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.all_ok() {
            0
        } else {
            2
        }
    }
}

#[derive(Default)]
struct PointRun {
    rows: Vec<Vec<String>>,
    warnings: Vec<String>,
    checks_pass: bool,
    summary: Option<(f64, f64)>,
}

fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) || !x.is_finite() {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn header(kind: ExperimentKind) -> Vec<String> {
    let cols: &[&str] = match kind {
        ExperimentKind::IdentityFuzz => &[
            "point", "identity", "M", "N", "samples", "max_residual", "worst_seed", "tol", "pass",
        ],
        ExperimentKind::HartreeOnly => &["point", "d", "M", "N", "t", "norm", "energy", "sup_norm"],
        ExperimentKind::MainTheoremSweep => &[
            "point", "d", "M", "N", "lambda", "rho", "T", "err_sq", "err", "alpha_n_exact", "alpha_n_tilde",
        ],
        ExperimentKind::BogoliubovSweep => &[
            "point",
            "d",
            "M",
            "N",
            "lambda",
            "rho",
            "T",
            "k_max",
            "hier_diff_sq",
            "hier_diff",
            "composite_sq",
            "composite",
            "exact_vs_tilde_sq",
            "triangle_bound",
            "composite_ge_hier",
            "bog_tail",
        ],
        ExperimentKind::MicroMacroSweep => &[
            "point",
            "d",
            "M",
            "N",
            "lambda",
            "rho",
            "t",
            "epsilon_model",
            "trace_norm",
            "trace_micro",
            "overlap",
            "bridge",
        ],
        ExperimentKind::EnvelopeReport => &[
            "point",
            "d",
            "M",
            "N",
            "lambda",
            "rho",
            "t",
            "j",
            "alpha_exact",
            "alpha_tilde",
            "beta",
            "margin_exact",
            "margin_tilde",
            "violated",
        ],
    };
    cols.iter().map(|s| s.to_string()).collect()
}

/// `point, d, M, N, Λ, ρ` prefix.
fn prefix(p: &GridPoint, model: &Model) -> Vec<String> {
    vec![
        p.index.to_string(),
        p.config.d.to_string(),
        p.config.m.to_string(),
        p.config.n.to_string(),
        num(model.params.lambda),
        num(model.params.rho),
    ]
}

fn final_only() -> PropagatorOptions {
    PropagatorOptions {
        stride: usize::MAX,
        ..PropagatorOptions::default()
    }
}

fn exact_and_tilde(
    model: &Model,
    psi0: &ManyBodyState,
    traj: &HartreeTrajectory,
    opts: PropagatorOptions,
) -> Result<(Vec<ManyBodyState>, Vec<ManyBodyState>)> {
    let t = model.params.t_final;
    let prop = Propagator::new(model, opts)?;
    let ex = prop.evolve(psi0, GeneratorKind::Full, None, t)?;
    let ti = prop.evolve(psi0, GeneratorKind::Tilde, Some(traj), t)?;
    Ok((ex.frames, ti.frames))
}

fn step_of(model: &Model, time: f64) -> usize {
    (time / model.params.dt).round() as usize
}

fn run_fuzz(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let ids = match &opts.identities {
        None => Identity::ALL.to_vec(),
        Some(names) => names.iter().map(|s| Identity::parse(s)).collect::<Result<_>>()?,
    };
    let model = p.model()?;
    let base = p.config.seed.wrapping_mul(opts.samples as u64);
    let seeds: Vec<u64> = (0..opts.samples as u64).map(|i| base.wrapping_add(i)).collect();
    let checks = fuzz(model.sites(), model.n(), &seeds, &ids)?;
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                p.index.to_string(),
                c.identity.name().to_string(),
                p.config.m.to_string(),
                c.n.to_string(),
                c.samples.to_string(),
                num(c.max_residual),
                c.worst_seed.to_string(),
                num(c.tol),
                c.pass.to_string(),
            ]
        })
        .collect();
    Ok(PointRun {
        rows,
        checks_pass: checks.iter().all(|c| c.pass),
        ..PointRun::default()
    })
}

fn run_hartree(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let model = p.model()?;
    let solver = HartreeSolver::new(&model);
    let phi0 = opts.initial.build(&model);
    let traj = solver.evolve(&phi0, model.params.t_final)?;
    let stride = opts.stride.max(1);
    let rows = traj
        .frames
        .iter()
        .enumerate()
        .filter(|(n, _)| n % stride == 0 || *n == traj.steps())
        .map(|(n, f)| {
            let s = f.as_slice().unwrap();
            vec![
                p.index.to_string(),
                p.config.d.to_string(),
                p.config.m.to_string(),
                p.config.n.to_string(),
                num(n as f64 * traj.dt),
                num(crate::tensor::norm(s)),
                num(solver.energy(s)),
                num(crate::onebody::sup_norm(f)),
            ]
        })
        .collect();
    Ok(PointRun {
        rows,
        checks_pass: true,
        ..PointRun::default()
    })
}

fn run_main(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let model = p.model()?;
    let phi0 = opts.initial.build(&model);
    let traj = HartreeSolver::new(&model).evolve(&phi0, model.params.t_final)?;
    let psi0 = ManyBodyState::product(phi0.as_slice(), model.n())?;
    let (ex, ti) = exact_and_tilde(&model, &psi0, &traj, final_only())?;
    let (a, b) = (ex.last().unwrap(), ti.last().unwrap());
    let err_sq = norm_difference_sq(a.as_slice(), b.as_slice()).0;
    let phi_t = traj.frames.last().unwrap().as_slice().unwrap();
    let ncount = WeightVector::relative_count(model.n());
    let mut row = prefix(p, &model);
    row.extend([
        num(model.params.t_final),
        num(err_sq),
        num(err_sq.sqrt()),
        num(alpha_n(&ncount, a, phi_t)?),
        num(alpha_n(&ncount, b, phi_t)?),
    ]);
    Ok(PointRun {
        rows: vec![row],
        checks_pass: true,
        summary: Some((model.params.rho, err_sq)),
        ..PointRun::default()
    })
}

fn run_bogoliubov(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let model = p.model()?;
    let n = model.n();
    let t = model.params.t_final;
    let phi0 = opts.initial.build(&model);
    let traj = HartreeSolver::new(&model).evolve(&phi0, t)?;
    let psi0 = ManyBodyState::product(phi0.as_slice(), n)?;
    let exact = Propagator::new(&model, final_only())?.evolve(&psi0, GeneratorKind::Full, None, t)?;
    let exact = exact.last();
    let steps = model.params.steps_to(t)?.max(1);
    let tilde_opts = HierarchyOptions {
        stride: steps,
        ..HierarchyOptions::tilde(n)
    };
    let bog_opts = HierarchyOptions {
        stride: steps,
        ..HierarchyOptions::bogoliubov(opts.k_max)
    };
    let tilde = evolve_hierarchy(&SectorFamily::vacuum(phi0.as_slice(), n)?, &model, &traj, t, &tilde_opts)?;
    let bog = evolve_hierarchy(&SectorFamily::vacuum(phi0.as_slice(), opts.k_max)?, &model, &traj, t, &bog_opts)?;
    let hier_sq = tilde.last().distance_sq(bog.last());
    let psi_tilde = tilde.last().reconstruct(n)?;
    let psi_bog = bog.last().reconstruct(n)?;
    let composite_sq = norm_difference_sq(exact.as_slice(), psi_bog.as_slice()).0;
    let tilde_sq = norm_difference_sq(exact.as_slice(), psi_tilde.as_slice()).0;
    let triangle = tilde_sq.sqrt() + hier_sq.sqrt();
    let mut row = prefix(p, &model);
    row.extend([
        num(t),
        opts.k_max.to_string(),
        num(hier_sq),
        num(hier_sq.sqrt()),
        num(composite_sq),
        num(composite_sq.sqrt()),
        num(tilde_sq),
        num(triangle),
        (composite_sq >= hier_sq).to_string(),
        num(bog.stats.last().map_or(0.0, |s| s.tail)),
    ]);
    let mut warnings = tilde.warnings.clone();
    warnings.extend(bog.warnings.iter().cloned());
    Ok(PointRun {
        rows: vec![row],
        warnings,
        checks_pass: composite_sq.sqrt() <= triangle * (1.0 + 1e-9) + 1e-14,
        summary: Some((model.params.rho, hier_sq)),
    })
}

fn run_micro_macro(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let model = p.model()?;
    let split = ExcitationSplit::lattice_bump(&model.lattice);
    let popts = PropagatorOptions {
        stride: opts.stride.max(1),
        ..PropagatorOptions::default()
    };
    let series = micro_macro_series(&model, &split, opts.epsilon, model.params.t_final, popts)?;
    let label = serde_json::to_value(opts.epsilon)?.as_str().unwrap_or_default().to_string();
    let rows = series
        .iter()
        .map(|r| {
            let mut row = prefix(p, &model);
            row.extend([
                num(r.t),
                label.clone(),
                num(r.trace_norm),
                num(r.trace_micro),
                num(r.overlap),
                num(r.bridge),
            ]);
            row
        })
        .collect();
    let last = series.last().expect("series has the initial frame");
    Ok(PointRun {
        rows,
        checks_pass: series.iter().all(|r| r.bridge <= 1e-10),
        summary: Some((model.params.rho, last.trace_norm)),
        ..PointRun::default()
    })
}

fn run_envelope(p: &GridPoint, opts: &ExperimentOptions) -> Result<PointRun> {
    let model = p.model()?;
    let n = model.n();
    let t = model.params.t_final;
    let weights = PaperWeights::new(n, model.params.rho)?;
    let c = cj_sequence(&weights, opts.j_max)?;
    let phi0 = opts.initial.build(&model);
    let traj = HartreeSolver::new(&model).evolve(&phi0, t)?;
    let d = constant_d(&model.params, &model.potential.norms(), traj.sup_inf_norm, opts.rate_form)?;
    let env = Envelope::new(d, c, model.params.lambda, model.params.rho)?;
    let psi0 = ManyBodyState::product(phi0.as_slice(), n)?;
    let popts = PropagatorOptions {
        stride: opts.stride.max(1),
        ..PropagatorOptions::default()
    };
    let (ex, ti) = exact_and_tilde(&model, &psi0, &traj, popts)?;
    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    for j in 1..=opts.j_max {
        let w = weights.w_pow_vector(j);
        let series = ex
            .iter()
            .zip(&ti)
            .map(|(a, b)| {
                let phi = traj.frame(step_of(&model, a.time))?.as_slice().unwrap();
                Ok((a.time, alpha_n(&w, a, phi)?, alpha_n(&w, b, phi)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for r in envelope_report(j, &series, &env) {
            if r.violated && warnings.len() < 8 {
                warnings.push(format!("envelope j = {j} exceeded at t = {}", r.t));
            }
            let mut row = prefix(p, &model);
            row.extend([
                num(r.t),
                j.to_string(),
                num(r.alpha_exact),
                num(r.alpha_tilde),
                num(r.beta),
                num(r.margin_exact),
                num(r.margin_tilde),
                r.violated.to_string(),
            ]);
            rows.push(row);
        }
    }
    Ok(PointRun {
        rows,
        warnings,
        checks_pass: true,
        summary: None,
    })
}

/// Runs a single grid point; failures are returned in the result, never
/// propagated.
pub fn run_point(kind: ExperimentKind, point: &GridPoint, opts: &ExperimentOptions) -> PointResult {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(|| match kind {
        ExperimentKind::IdentityFuzz => run_fuzz(point, opts),
        ExperimentKind::HartreeOnly => run_hartree(point, opts),
        ExperimentKind::MainTheoremSweep => run_main(point, opts),
        ExperimentKind::BogoliubovSweep => run_bogoliubov(point, opts),
        ExperimentKind::MicroMacroSweep => run_micro_macro(point, opts),
        ExperimentKind::EnvelopeReport => run_envelope(point, opts),
    }));
    let runtime_s = start.elapsed().as_secs_f64();
    let result = match outcome {
        Ok(r) => r,
        Err(panic) => {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(Error::Config(format!("point panicked: {msg}")))
        }
    };
    match result {
        Ok(run) => PointResult {
            point: point.clone(),
            status: if run.checks_pass { Status::Ok } else { Status::CheckFailed },
            error: None,
            warnings: run.warnings,
            rows: run.rows,
            runtime_s,
            summary: run.summary,
        },
        Err(e) => PointResult {
            point: point.clone(),
            status: Status::Failed,
            error: Some(e.to_string()),
            warnings: Vec::new(),
            rows: Vec::new(),
            runtime_s,
            summary: None,
        },
    }
}

fn is_sweep(kind: ExperimentKind) -> bool {
    matches!(
        kind,
        ExperimentKind::MainTheoremSweep | ExperimentKind::BogoliubovSweep | ExperimentKind::MicroMacroSweep
    )
}

/// Runs every grid point on a pool of `jobs` threads (the plan's value, or
/// rayon's default when absent). Results keep grid order.
pub fn run(plan: &ExperimentPlan, jobs: Option<usize>) -> Result<Outcome> {
    plan.validate()?;
    let points = plan.points();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs.or(plan.jobs) {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let results: Vec<PointResult> = pool.install(|| {
        points
            .par_iter()
            .map(|p| run_point(plan.experiment, p, &plan.options))
            .collect()
    });
    let (mut fit, mut fit_error, mut strictly_decreasing) = (None, None, None);
    if is_sweep(plan.experiment) {
        let mut pairs: Vec<(f64, f64)> = results.iter().filter_map(|r| r.summary).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
        match fit_loglog(&x, &y) {
            Ok(f) => fit = Some(f),
            Err(e) => fit_error = Some(e.to_string()),
        }
        if pairs.len() >= 2 {
            strictly_decreasing = Some(pairs.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1));
        }
    }
    Ok(Outcome {
        header: header(plan.experiment),
        points: results,
        fit,
        fit_error,
        strictly_decreasing,
    })
}
