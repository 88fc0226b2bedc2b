//! Reduced one-body densities, the micro/macro excitation densities and
//! their trace-norm distance.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{adjoint, frobenius, hermitian_eigen, outer, trace_norm_hermitian};
use crate::manybody::{ManyBodyState, Propagator, PropagatorOptions, GeneratorKind};
use crate::model::Model;
use crate::onebody::{evolve_excitation, EpsilonModel, ExcitationSplit, HartreeSolver};
use crate::projectors::{alpha_n, WeightVector};
use crate::tensor::{self, norm};
use crate::C64;

/// A one-body density matrix together with its declared trace.
#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyDensity {
    pub matrix: Array2<C64>,
    pub normalization: f64,
}

impl OneBodyDensity {
    pub fn new(matrix: Array2<C64>) -> Self {
        let normalization = matrix.diag().iter().map(|z| z.re).sum();
        Self { matrix, normalization }
    }

    pub fn sites(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diag().iter().map(|z| z.re).sum()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        frobenius(&(&self.matrix - &adjoint(&self.matrix)))
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.matrix).0
    }

    /// Eigenvector of the largest eigenvalue.
    pub fn top_eigenvector(&self) -> Array1<C64> {
        let (_, vecs) = hermitian_eigen(&self.matrix);
        vecs.column(self.sites() - 1).to_owned()
    }
}

/// `γ⁽¹⁾(x,y) = Σ_r Ψ(x,r) Ψ̄(y,r)` over the first slot.
pub fn reduce_one_body(psi: &ManyBodyState) -> OneBodyDensity {
    let l = psi.sites;
    let rest = psi.amps.len() / l;
    let a = psi.as_slice();
    let rows: Vec<&[C64]> = (0..l).map(|x| &a[x * rest..(x + 1) * rest]).collect();
    let m = Array2::from_shape_fn((l, l), |(x, y)| tensor::dot(rows[y], rows[x]));
    OneBodyDensity::new(m)
}

fn coprojector(phi: &[C64]) -> Array2<C64> {
    let l = phi.len();
    Array2::from_shape_fn((l, l), |(x, y)| {
        let id = if x == y { 1.0 } else { 0.0 };
        C64::new(id, 0.0) - phi[x] * phi[y].conj()
    })
}

/// `Λ q γ⁽¹⁾ q` with `q = 1 - |φ^ref⟩⟨φ^ref|`.
pub fn micro_density(psi: &ManyBodyState, phi_ref: &[C64], lambda: f64) -> Result<OneBodyDensity> {
    crate::onebody::check_normalized(phi_ref)?;
    if phi_ref.len() != psi.sites {
        return Err(Error::Shape(format!(
            "reference has {} sites, state has {}",
            phi_ref.len(),
            psi.sites
        )));
    }
    let g = reduce_one_body(psi).matrix;
    let q = coprojector(phi_ref);
    Ok(OneBodyDensity::new(q.dot(&g).dot(&q).mapv(|z| z * lambda)))
}

/// `|ε⟩⟨ε|`.
pub fn macro_density(eps: &[C64]) -> OneBodyDensity {
    OneBodyDensity::new(outer(eps, eps))
}

/// `Tr|A - B|`.
pub fn trace_norm_diff(a: &OneBodyDensity, b: &OneBodyDensity) -> Result<f64> {
    if a.sites() != b.sites() {
        return Err(Error::Shape(format!("{} vs {} sites", a.sites(), b.sites())));
    }
    Ok(trace_norm_hermitian(&(&a.matrix - &b.matrix)))
}

/// `|⟨ε/‖ε‖, v⟩|²` with `v` the top eigenvector of `micro`; 0 when `ε = 0`.
pub fn top_overlap(micro: &OneBodyDensity, eps: &[C64]) -> f64 {
    let n = norm(eps);
    if n == 0.0 {
        return 0.0;
    }
    let v = micro.top_eigenvector();
    (tensor::dot(eps, v.as_slice().unwrap()) / n).norm_sqr()
}

/// One frame of the micro/macro comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MicroMacroRow {
    pub t: f64,
    pub trace_norm: f64,
    pub trace_micro: f64,
    pub overlap: f64,
    /// `|tr(q γ⁽¹⁾ q) - α_N(n, Ψ, φ^ref)|`.
    pub bridge: f64,
}

/// Exact evolution of `φ₀^{⊗N}` with `φ₀ = φ^ref + ε` compared, frame by
/// frame, against `Λ|ε_t⟩⟨ε_t|` with `ε_t` from `eps_model`. Frames every
/// `stride` steps.
pub fn micro_macro_series(
    model: &Model,
    split: &ExcitationSplit,
    eps_model: EpsilonModel,
    t_final: f64,
    opts: PropagatorOptions,
) -> Result<Vec<MicroMacroRow>> {
    let solver = HartreeSolver::new(model);
    let (eps, reference) = evolve_excitation(&solver, split, t_final, eps_model)?;
    let phi0 = split.phi0();
    let psi0 = ManyBodyState::product(phi0.as_slice(), model.n())?;
    let stride = opts.stride.max(1);
    let prop = Propagator::new(model, opts)?;
    let traj = prop.evolve(&psi0, GeneratorKind::Full, None, t_final)?;
    let lambda = model.params.lambda;
    let ncount = WeightVector::relative_count(model.n());
    let steps = reference.steps();
    traj.frames
        .iter()
        .enumerate()
        .map(|(i, psi)| {
            let n = (i * stride).min(steps);
            let r = reference.frame(n)?;
            let dir = r.mapv(|z| z / norm(r.as_slice().unwrap()));
            let dir = dir.as_slice().unwrap();
            let micro = micro_density(psi, dir, lambda)?;
            let e = eps[n].mapv(|z| z * lambda.sqrt());
            let e = e.as_slice().unwrap();
            let mac = macro_density(e);
            let bridge = (micro.trace() / lambda - alpha_n(&ncount, psi, dir)?).abs();
            Ok(MicroMacroRow {
                t: psi.time,
                trace_norm: trace_norm_diff(&micro, &mac)?,
                trace_micro: micro.trace(),
                overlap: top_overlap(&micro, e),
                bridge,
            })
        })
        .collect()
}
