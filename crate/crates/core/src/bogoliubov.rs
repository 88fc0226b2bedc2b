//! Pair kernels `K⁽¹⁾`, `K⁽²⁾`, the one-body and pairing densities `(γ, α)`
//! and their closed quadratic evolution.

use std::io::Write;

use ndarray::{s, Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, frobenius, hermitian_eigen, operator_norm, rk4_step};
use crate::model::Model;
use crate::onebody::{check_normalized, HartreeSolver, HartreeTrajectory};
use crate::sectors::SectorFamily;
use crate::C64;

/// Drift of the structural invariants that aborts a `(γ, α)` run.
pub const INVARIANT_ABORT: f64 = 1e-6;

/// `K⁽¹⁾ = q K̃⁽¹⁾ q` and `K⁽²⁾ = (q ⊗ q) K̃⁽²⁾` with
/// `K̃⁽¹⁾(x,y) = Λ φ(x) v(x-y) φ̄(y)` and `K̃⁽²⁾(x,y) = Λ v(x-y) φ(x) φ(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernels {
    pub k1: Array2<C64>,
    pub k2: Array2<C64>,
}

impl Kernels {
    pub fn build(model: &Model, phi: &[C64]) -> Result<Self> {
        check_normalized(phi)?;
        let lat = &model.lattice;
        let l = lat.num_sites();
        if phi.len() != l {
            return Err(Error::Shape(format!("condensate has {} sites, lattice {l}", phi.len())));
        }
        let lam = model.params.lambda;
        let v = |x: usize, y: usize| model.potential.at(lat.displacement(x, y));
        let k1t = Array2::from_shape_fn((l, l), |(x, y)| phi[x] * phi[y].conj() * (lam * v(x, y)));
        let k2t = Array2::from_shape_fn((l, l), |(x, y)| phi[x] * phi[y] * (lam * v(x, y)));
        let q = Array2::from_shape_fn((l, l), |(x, y)| {
            let id = if x == y { 1.0 } else { 0.0 };
            C64::new(id, 0.0) - phi[x] * phi[y].conj()
        });
        Ok(Self {
            k1: q.dot(&k1t).dot(&q),
            k2: q.dot(&k2t).dot(&q.t()),
        })
    }

    pub fn is_zero(&self) -> bool {
        self.k1.iter().chain(self.k2.iter()).all(|z| *z == C64::new(0.0, 0.0))
    }

    pub fn bounds(&self, model: &Model, phi: &[C64]) -> KernelBounds {
        let norms = model.potential.norms();
        let lam = model.params.lambda;
        let sup = phi.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        KernelBounds {
            k1_op: operator_norm(&self.k1),
            k1_bound: lam * sup * sup * norms.l1,
            k2_hs: frobenius(&self.k2),
            k2_bound_printed: lam * sup * sup * norms.l2,
            k2_bound_sharp: lam * sup * norms.l2,
        }
    }
}

/// Kernel norms next to their bounds. Two bounds are given for `‖K⁽²⁾‖₂`:
/// `Λ‖φ‖∞²‖v‖₂` and `Λ‖φ‖∞‖v‖₂`; only the second holds in general.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelBounds {
    pub k1_op: f64,
    pub k1_bound: f64,
    pub k2_hs: f64,
    pub k2_bound_printed: f64,
    pub k2_bound_sharp: f64,
}

impl KernelBounds {
    const SLACK: f64 = 1e-12;

    pub fn k1_holds(&self) -> bool {
        self.k1_op <= self.k1_bound * (1.0 + Self::SLACK) + Self::SLACK
    }

    pub fn k2_printed_holds(&self) -> bool {
        self.k2_hs <= self.k2_bound_printed * (1.0 + Self::SLACK) + Self::SLACK
    }

    pub fn k2_sharp_holds(&self) -> bool {
        self.k2_hs <= self.k2_bound_sharp * (1.0 + Self::SLACK) + Self::SLACK
    }
}

/// Kernel bounds at every frame of a Hartree trajectory.
pub fn kernel_bounds_along(model: &Model, traj: &HartreeTrajectory) -> Result<Vec<KernelBounds>> {
    traj.frames
        .iter()
        .map(|phi| {
            let phi = phi.as_slice().unwrap();
            Ok(Kernels::build(model, phi)?.bounds(model, phi))
        })
        .collect()
}

/// `γ(x,y) = ⟨a*_y a_x⟩`, `α(x,y) = ⟨a_y a_x⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairDensities {
    pub gamma: Array2<C64>,
    pub alpha: Array2<C64>,
    pub time: f64,
}

impl PairDensities {
    pub fn vacuum(sites: usize) -> Self {
        Self {
            gamma: Array2::zeros((sites, sites)),
            alpha: Array2::zeros((sites, sites)),
            time: 0.0,
        }
    }

    pub fn sites(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn trace_gamma(&self) -> f64 {
        self.gamma.diag().iter().map(|z| z.re).sum()
    }

    pub fn alpha_hs(&self) -> f64 {
        frobenius(&self.alpha)
    }

    /// `‖γ - γ*‖_HS`.
    pub fn hermiticity_residual(&self) -> f64 {
        frobenius(&(&self.gamma - &adjoint(&self.gamma)))
    }

    /// `‖α - αᵀ‖_HS`.
    pub fn symmetry_residual(&self) -> f64 {
        frobenius(&(&self.alpha - &self.alpha.t()))
    }

    pub fn min_gamma_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.gamma).0[0]
    }

    /// `tr(γ + γ²) - tr(αα*)`, conserved by quadratic dynamics.
    pub fn purity_surrogate(&self) -> f64 {
        let g2: f64 = self.gamma.dot(&self.gamma).diag().iter().map(|z| z.re).sum();
        self.trace_gamma() + g2 - frobenius(&self.alpha).powi(2)
    }

    /// `‖γ - γ'‖_HS + ‖α - α'‖_HS`.
    pub fn distance(&self, other: &Self) -> f64 {
        frobenius(&(&self.gamma - &other.gamma)) + frobenius(&(&self.alpha - &other.alpha))
    }

    fn pack(&self) -> Array1<C64> {
        let l = self.sites();
        let mut v = Array1::zeros(2 * l * l);
        v.slice_mut(s![..l * l]).assign(&Array1::from_iter(self.gamma.iter().copied()));
        v.slice_mut(s![l * l..]).assign(&Array1::from_iter(self.alpha.iter().copied()));
        v
    }

    fn unpack(v: &Array1<C64>, l: usize, time: f64) -> Self {
        let g = Array2::from_shape_vec((l, l), v.slice(s![..l * l]).to_vec()).unwrap();
        let a = Array2::from_shape_vec((l, l), v.slice(s![l * l..]).to_vec()).unwrap();
        Self {
            gamma: g,
            alpha: a,
            time,
        }
    }
}

/// Densities of the Fock vector whose `k`-particle components are the
/// sectors of `family`:
/// `γ(x,y) = Σ_k k ∫ χ⁽ᵏ⁾(x,r) χ̄⁽ᵏ⁾(y,r) dr`,
/// `α(x,y) = Σ_k √((k+1)(k+2)) ∫ χ⁽ᵏ⁺²⁾(x,y,r) χ̄⁽ᵏ⁾(r) dr`.
pub fn densities_from_sectors(family: &SectorFamily) -> PairDensities {
    let l = family.sites;
    let mut out = PairDensities::vacuum(l);
    out.time = family.time;
    for (k, chi) in family.chis.iter().enumerate() {
        if k >= 1 {
            let rest = chi.len() / l;
            let m = chi.view().into_shape_with_order((l, rest)).unwrap();
            let g = m.dot(&m.t().mapv(|z| z.conj()));
            out.gamma.scaled_add(C64::new(k as f64, 0.0), &g);
        }
        if let Some(up) = family.chis.get(k + 2) {
            let rest = chi.len();
            let m = up.view().into_shape_with_order((l * l, rest)).unwrap();
            let a = m.dot(&chi.mapv(|z| z.conj()));
            let f = (((k + 1) * (k + 2)) as f64).sqrt();
            out.alpha
                .scaled_add(C64::new(f, 0.0), &a.into_shape_with_order((l, l)).unwrap());
        }
    }
    out
}

/// `iħ∂γ = [A, γ] + K⁽²⁾α* - α K⁽²⁾*`,
/// `iħ∂α = Aα + αAᵀ + K⁽²⁾ + K⁽²⁾γᵀ + γK⁽²⁾` with `A = h + K⁽¹⁾`.
pub fn gamma_alpha_rhs(a: &Array2<C64>, k2: &Array2<C64>, gamma: &Array2<C64>, alpha: &Array2<C64>) -> (Array2<C64>, Array2<C64>) {
    let dg = a.dot(gamma) - gamma.dot(a) + k2.dot(&adjoint(alpha)) - alpha.dot(&adjoint(k2));
    let da = a.dot(alpha) + alpha.dot(&a.t()) + k2 + &k2.dot(&gamma.t()) + gamma.dot(k2);
    (dg, da)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaAlphaStats {
    pub time: f64,
    pub trace_gamma: f64,
    pub alpha_hs: f64,
    pub purity: f64,
    pub hermiticity: f64,
    pub symmetry: f64,
}

impl GammaAlphaStats {
    fn of(d: &PairDensities) -> Self {
        Self {
            time: d.time,
            trace_gamma: d.trace_gamma(),
            alpha_hs: d.alpha_hs(),
            purity: d.purity_surrogate(),
            hermiticity: d.hermiticity_residual(),
            symmetry: d.symmetry_residual(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GammaAlphaTrajectory {
    pub frames: Vec<PairDensities>,
    pub stats: Vec<GammaAlphaStats>,
}

impl GammaAlphaTrajectory {
    pub fn last(&self) -> &PairDensities {
        self.frames.last().expect("trajectory has at least one frame")
    }

    /// `t, tr_gamma, alpha_hs, purity, hermiticity, symmetry`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "tr_gamma", "alpha_hs", "purity", "hermiticity", "symmetry"])?;
        for s in &self.stats {
            out.serialize((s.time, s.trace_gamma, s.alpha_hs, s.purity, s.hermiticity, s.symmetry))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// RK4 integration of the `(γ, α)` system with `h` and the kernels frozen
/// at each Hartree midpoint. Hermiticity of `γ` and symmetry of `α` are
/// checked, not re-imposed; drift above [`INVARIANT_ABORT`] is an error.
pub fn evolve_gamma_alpha(
    init: &PairDensities,
    model: &Model,
    traj: &HartreeTrajectory,
    t_final: f64,
    stride: usize,
) -> Result<GammaAlphaTrajectory> {
    let solver = HartreeSolver::new(model).with_dt(traj.dt);
    let steps = model.params.with_dt(traj.dt).steps_to(t_final)?;
    if steps > traj.steps() {
        return Err(Error::TrajectoryTooShort { step: steps - 1, dt: traj.dt });
    }
    let l = model.sites();
    if init.sites() != l {
        return Err(Error::Shape(format!("densities on {} sites, lattice {l}", init.sites())));
    }
    let stride = stride.max(1);
    let hbar = model.params.hbar;
    let mut cur = init.clone();
    let mut frames = vec![cur.clone()];
    let mut stats = vec![GammaAlphaStats::of(&cur)];
    for n in 0..steps {
        let mid = traj.midpoint(n)?.as_slice().unwrap();
        let ker = Kernels::build(model, mid)?;
        let a = solver.hartree_operator(mid) + &ker.k1;
        let f = |y: &Array1<C64>| {
            let d = PairDensities::unpack(y, l, 0.0);
            let (dg, da) = gamma_alpha_rhs(&a, &ker.k2, &d.gamma, &d.alpha);
            let mut v = PairDensities {
                gamma: dg,
                alpha: da,
                time: 0.0,
            }
            .pack();
            v.mapv_inplace(|z| z * C64::new(0.0, -1.0 / hbar));
            v
        };
        let next = rk4_step(&cur.pack(), traj.dt, f);
        cur = PairDensities::unpack(&next, l, (n + 1) as f64 * traj.dt);
        let st = GammaAlphaStats::of(&cur);
        let scale = 1.0 + cur.trace_gamma() + cur.alpha_hs();
        for (drift, what) in [(st.hermiticity, "gamma hermiticity"), (st.symmetry, "alpha symmetry")] {
            if !(drift <= INVARIANT_ABORT * scale) {
                return Err(Error::InvariantDrift { frame: n + 1, drift, what });
            }
        }
        if (n + 1) % stride == 0 || n + 1 == steps {
            frames.push(cur.clone());
            stats.push(st);
        }
    }
    Ok(GammaAlphaTrajectory { frames, stats })
}
