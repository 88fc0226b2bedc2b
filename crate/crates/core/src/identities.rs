//! Randomized residual checks of the projector algebra and the counting
//! functionals.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manybody::{pair_parts, Hamiltonian, ManyBodyState};
use crate::model::{Model, PotentialSpec};
use crate::onebody::OneBodyState;
use crate::projectors::{
    apply_count, apply_p, apply_p_k, apply_q, apply_weighted, count_decomposition, gamma_abc, WeightVector, W12,
};
use crate::tensor::{self, norm};
use crate::C64;

/// Composite-identity tolerance.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Identity {
    /// `l̂m̂ = (lm)^ = m̂l̂`.
    Product,
    /// `m̂ p_j = p_j m̂`.
    PCommute,
    /// `m̂ P_k = P_k m̂`.
    PkCommute,
    /// `P_k P_l = δ_kl P_k` and `Σ_k P_k = 1`.
    PkProjector,
    /// `n̂ = N⁻¹ Σ_j q_j`.
    RelativeCount,
    /// `‖m̂ q₁Ψ‖² = ‖m̂ n̂^{1/2} Ψ‖²`.
    QOneNorm,
    /// `‖m̂ q₁q₂Ψ‖² ≤ N/(N-1) ‖m̂ n̂ Ψ‖²`, residual is the violation.
    QTwoBound,
    /// `Q_k f Q_j m̂ = Q_k m̂_{j-k} f Q_j`.
    Shift,
    /// `p₁ W₁₂ p₁ = 0`.
    WSandwich,
    /// `γ^a = 0`.
    GammaA,
}

impl Identity {
    pub const ALL: [Identity; 10] = [
        Identity::Product,
        Identity::PCommute,
        Identity::PkCommute,
        Identity::PkProjector,
        Identity::RelativeCount,
        Identity::QOneNorm,
        Identity::QTwoBound,
        Identity::Shift,
        Identity::WSandwich,
        Identity::GammaA,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Identity::Product => "product",
            Identity::PCommute => "p-commute",
            Identity::PkCommute => "pk-commute",
            Identity::PkProjector => "pk-projector",
            Identity::RelativeCount => "relative-count",
            Identity::QOneNorm => "q1-norm",
            Identity::QTwoBound => "q1q2-bound",
            Identity::Shift => "shift",
            Identity::WSandwich => "w-sandwich",
            Identity::GammaA => "gamma-a",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|i| i.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown identity `{s}`")))
    }
}

/// Random inputs for one seed: state, condensate, two weights, a pair
/// function and a Hamiltonian for `W₁₂`.
pub struct Sample {
    pub psi: ManyBodyState,
    pub phi: Vec<C64>,
    pub l: WeightVector,
    pub m: WeightVector,
    /// `f(x₁, x₂)` indexed `x₁ * L + x₂`.
    pub f: Vec<f64>,
    pub ham: Hamiltonian,
}

impl Sample {
    /// Draws a sample on a one-dimensional ring of `sites` sites.
    pub fn draw(sites: usize, n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config("identity checks need N >= 2".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let psi = ManyBodyState::random_symmetric(sites, n, &mut rng)?;
        let phi = OneBodyState::random(sites, &mut rng).amps.to_vec();
        let l = WeightVector::new((0..=n).map(|_| rng.random::<f64>()).collect())?;
        let m = WeightVector::new((0..=n).map(|_| rng.random::<f64>()).collect())?;
        let f = (0..sites * sites).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = PotentialSpec::Gaussian {
            strength: rng.random_range(0.5..2.0),
            width: rng.random_range(0.5..1.5),
        };
        let model = Model::on_lattice(1, sites, n, 1.0, 0.01, 0.01, &spec)?;
        let ham = Hamiltonian::new(&model)?;
        Ok(Self { psi, phi, l, m, f, ham })
    }

    fn wrap(&self, amps: Array1<C64>) -> ManyBodyState {
        self.psi.with_amps(amps)
    }
}

fn diff(a: &ManyBodyState, b: &ManyBodyState) -> f64 {
    norm((&a.amps - &b.amps).as_slice().unwrap())
}

/// Residual of one identity on one sample.
pub fn residual(id: Identity, s: &Sample) -> Result<f64> {
    let (psi, phi, m, l) = (&s.psi, s.phi.as_slice(), &s.m, &s.l);
    let n = psi.n;
    let lay = psi.layout();
    let r = match id {
        Identity::Product => {
            let lm = apply_weighted(&l.product(m), 0, phi, psi)?;
            let a = apply_weighted(l, 0, phi, &apply_weighted(m, 0, phi, psi)?)?;
            let b = apply_weighted(m, 0, phi, &apply_weighted(l, 0, phi, psi)?)?;
            diff(&a, &lm).max(diff(&b, &lm))
        }
        Identity::PCommute => {
            let mpsi = apply_weighted(m, 0, phi, psi)?;
            let mut worst: f64 = 0.0;
            for j in 0..n {
                let a = apply_weighted(m, 0, phi, &apply_p(j, phi, psi)?)?;
                let b = apply_p(j, phi, &mpsi)?;
                worst = worst.max(diff(&a, &b));
            }
            worst
        }
        Identity::PkCommute => {
            let mpsi = apply_weighted(m, 0, phi, psi)?;
            let mut worst: f64 = 0.0;
            for k in 0..=n as i64 {
                let a = apply_weighted(m, 0, phi, &apply_p_k(k, phi, psi)?)?;
                let b = apply_p_k(k, phi, &mpsi)?;
                worst = worst.max(diff(&a, &b));
            }
            worst
        }
        Identity::PkProjector => {
            let parts = count_decomposition(phi, psi)?;
            let total = parts.iter().fold(Array1::zeros(psi.amps.len()), |acc, p| acc + p);
            let mut worst = diff(&s.wrap(total), psi);
            for (k, pk) in parts.iter().enumerate() {
                let pk = s.wrap(pk.clone());
                for l in 0..=n {
                    let plk = apply_p_k(l as i64, phi, &pk)?;
                    let r = if l == k { diff(&plk, &pk) } else { plk.norm() };
                    worst = worst.max(r);
                }
            }
            worst
        }
        Identity::RelativeCount => {
            let a = apply_weighted(&WeightVector::relative_count(n), 0, phi, psi)?;
            let mut b = apply_count(phi, psi)?;
            b.amps.mapv_inplace(|z| z / n as f64);
            diff(&a, &b)
        }
        Identity::QOneNorm => {
            let lhs = apply_weighted(m, 0, phi, &apply_q(0, phi, psi)?)?.norm().powi(2);
            let half = WeightVector::relative_count(n).sqrt().product(m);
            let rhs = apply_weighted(&half, 0, phi, psi)?.norm().powi(2);
            (lhs - rhs).abs()
        }
        Identity::QTwoBound => {
            let qq = apply_q(1, phi, &apply_q(0, phi, psi)?)?;
            let lhs = apply_weighted(m, 0, phi, &qq)?.norm().powi(2);
            let mn = WeightVector::relative_count(n).product(m);
            let rhs = n as f64 / (n as f64 - 1.0) * apply_weighted(&mn, 0, phi, psi)?.norm().powi(2);
            (lhs - rhs).max(0.0)
        }
        Identity::Shift => {
            let q_parts = |x: &[C64]| {
                let [pp, pq, qp, qq] = pair_parts(x, lay, 0, 1, phi);
                [pp, pq + qp, qq]
            };
            let mpsi = apply_weighted(m, 0, phi, psi)?;
            let left_in = q_parts(mpsi.as_slice());
            let right_in = q_parts(psi.as_slice());
            let mut worst: f64 = 0.0;
            for j in 0..3 {
                let fl = tensor::multiply_pair(left_in[j].as_slice().unwrap(), lay, 0, 1, &s.f);
                let fr = tensor::multiply_pair(right_in[j].as_slice().unwrap(), lay, 0, 1, &s.f);
                let fl = q_parts(fl.as_slice().unwrap());
                for k in 0..3 {
                    let shifted = apply_weighted(m, j as i64 - k as i64, phi, &s.wrap(fr.clone()))?;
                    let rhs = &q_parts(shifted.as_slice())[k];
                    worst = worst.max(norm((&fl[k] - rhs).as_slice().unwrap()));
                }
            }
            worst
        }
        Identity::WSandwich => {
            let w = W12::build(&s.ham, phi)?;
            let p1 = apply_p(0, phi, psi)?;
            let wp = s.wrap(w.apply(p1.as_slice()));
            apply_p(0, phi, &wp)?.norm()
        }
        Identity::GammaA => gamma_abc(m, psi, phi, &s.ham)?.a.abs(),
    };
    Ok(r)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub identity: Identity,
    pub sites: usize,
    pub n: usize,
    pub samples: usize,
    pub max_residual: f64,
    pub worst_seed: u64,
    pub tol: f64,
    pub pass: bool,
}

/// Runs every identity in `ids` over `seeds`, in parallel over seeds, and
/// reports the worst residual per identity.
pub fn fuzz(sites: usize, n: usize, seeds: &[u64], ids: &[Identity]) -> Result<Vec<IdentityCheck>> {
    let per_seed: Vec<Vec<f64>> = seeds
        .par_iter()
        .map(|&seed| {
            let s = Sample::draw(sites, n, seed)?;
            ids.iter().map(|&id| residual(id, &s)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    Ok(ids
        .iter()
        .enumerate()
        .map(|(i, &identity)| {
            let (mut worst, mut worst_seed) = (0.0_f64, seeds.first().copied().unwrap_or(0));
            for (row, &seed) in per_seed.iter().zip(seeds) {
                if !(row[i] <= worst) {
                    worst = row[i];
                    worst_seed = seed;
                }
            }
            IdentityCheck {
                identity,
                sites,
                n,
                samples: seeds.len(),
                max_residual: worst,
                worst_seed,
                tol: IDENTITY_TOL,
                pass: worst <= IDENTITY_TOL,
            }
        })
        .collect())
}
