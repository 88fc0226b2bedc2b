//! Excitation weights `w`, `n`, `l_j`, the constants `c_j` and the
//! Gronwall envelopes `β_j`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::projectors::WeightVector;

/// Relative tolerance for the exhaustive domination checks.
const CHECK_TOL: f64 = 1e-12;

/// `w(k) = min((k+1)/ρ, 1)` and `n(k) = k/N` on `0..=N`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaperWeights {
    pub rho: f64,
    pub n: usize,
    pub lambda: f64,
}

impl PaperWeights {
    pub fn new(n: usize, rho: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("weights need N >= 2, got {n}")));
        }
        if !rho.is_finite() || rho < 1.0 {
            return Err(Error::Config(format!("weights need rho >= 1, got {rho}")));
        }
        Ok(Self {
            rho,
            n,
            lambda: n as f64 / rho,
        })
    }

    /// `w(k)`. The cap at 1 also covers `k = ⌊ρ⌋` when `ρ` is not an integer.
    pub fn w(&self, k: usize) -> f64 {
        ((k as f64 + 1.0) / self.rho).min(1.0)
    }

    pub fn w_pow(&self, k: usize, j: u32) -> f64 {
        self.w(k).powi(j as i32)
    }

    pub fn w_vector(&self) -> WeightVector {
        WeightVector::from_fn(self.n, |k| self.w(k)).expect("w is finite and positive")
    }

    pub fn w_pow_vector(&self, j: u32) -> WeightVector {
        self.w_vector().pow(j)
    }

    pub fn n_vector(&self) -> WeightVector {
        WeightVector::relative_count(self.n)
    }

    fn interior(&self, k: usize) -> bool {
        k as f64 <= self.rho
    }

    /// `l_j(k) = (c/ρ) w^{j-1}(k)` for `k ≤ ρ`, else 0.
    pub fn l(&self, k: usize, j: u32, c: f64) -> f64 {
        if self.interior(k) {
            c / self.rho * self.w_pow(k, j - 1)
        } else {
            0.0
        }
    }

    /// `max_{s ∈ {±1, ±2}} |w^j(k+s) - w^j(k)|`, neighbours outside `0..=N`
    /// ignored.
    pub fn max_difference(&self, k: usize, j: u32) -> f64 {
        let here = self.w_pow(k, j);
        [-2_i64, -1, 1, 2]
            .into_iter()
            .filter_map(|s| {
                let m = k as i64 + s;
                (0..=self.n as i64)
                    .contains(&m)
                    .then(|| (self.w_pow(m as usize, j) - here).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Smallest `c` with `l_j ≥ max_difference` on `0..=N`, without the
/// monotonicity adjustment of [`cj_sequence`]. Fails when a difference is
/// nonzero at some `k > ρ`, where `l_j` vanishes.
pub fn choose_cj(weights: &PaperWeights, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::Config("j must be >= 1".into()));
    }
    let top = ((weights.rho.ceil() as usize) + 2).min(weights.n);
    let mut c: f64 = 0.0;
    for k in 0..=top {
        let diff = weights.max_difference(k, j);
        if weights.interior(k) {
            c = c.max(weights.rho * diff / weights.w_pow(k, j - 1));
        } else if diff > CHECK_TOL {
            return Err(Error::Infeasible(format!(
                "|w^{j}(k±s) - w^{j}(k)| = {diff:e} at k = {k} > rho = {}, where l_{j} vanishes",
                weights.rho
            )));
        }
    }
    Ok(c)
}

/// `c_1, …, c_jmax` as the running maximum of [`choose_cj`], so the sequence
/// is nondecreasing; a strictly positive floor keeps `c_j > 0`.
pub fn cj_sequence(weights: &PaperWeights, j_max: u32) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(j_max as usize);
    let mut run = f64::MIN_POSITIVE;
    for j in 1..=j_max {
        run = run.max(choose_cj(weights, j)?);
        out.push(run);
    }
    Ok(out)
}

/// Worst violation over `k = 0..=N` of the four difference bounds and the two
/// auxiliary bounds `(k/N) l_j ≤ (c/N) w^j`, `(k/N)² l_j ≤ (c/(NΛ)) w^j`.
/// Returns 0 when all hold.
pub fn domination_violation(weights: &PaperWeights, j: u32, c: f64) -> f64 {
    let n = weights.n as f64;
    (0..=weights.n)
        .into_par_iter()
        .map(|k| {
            let l = weights.l(k, j, c);
            let wj = weights.w_pow(k, j);
            let x = k as f64 / n;
            let scale = 1.0 + l.abs();
            let diff = weights.max_difference(k, j) - l;
            let aux1 = x * l - c / n * wj;
            let aux2 = x * x * l - c / (n * weights.lambda) * wj;
            [diff, aux1, aux2]
                .into_iter()
                .map(|v| (v - CHECK_TOL * scale).max(0.0))
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Worst violation of `(k/N)^ℓ ≤ Λ^{-ℓ} w^ℓ(k) + w^j(k)` over `k = 0..=N`.
pub fn counting_violation(weights: &PaperWeights, ell: u32, j: u32) -> f64 {
    let n = weights.n as f64;
    (0..=weights.n)
        .into_par_iter()
        .map(|k| {
            let lhs = (k as f64 / n).powi(ell as i32);
            let rhs = weights.lambda.powi(-(ell as i32)) * weights.w_pow(k, ell) + weights.w_pow(k, j);
            (lhs - rhs - CHECK_TOL * rhs).max(0.0)
        })
        .reduce(|| 0.0, f64::max)
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// `β_j(t) = e^{D c_j t} (Λ/ρ)^j (D c_j t)^{j-1} / (j-1)!` for `j = 1..=c.len()`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Envelope {
    pub d: f64,
    pub c: Vec<f64>,
    pub lambda: f64,
    pub rho: f64,
}

impl Envelope {
    pub fn new(d: f64, c: Vec<f64>, lambda: f64, rho: f64) -> Result<Self> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Config(format!("D must be finite and >= 0, got {d}")));
        }
        if c.iter().any(|x| !x.is_finite() || *x <= 0.0) || c.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("c_j must be positive and nondecreasing".into()));
        }
        Ok(Self { d, c, lambda, rho })
    }

    pub fn j_max(&self) -> u32 {
        self.c.len() as u32
    }

    fn rate(&self, j: u32) -> f64 {
        self.d * self.c[j as usize - 1]
    }

    fn ratio(&self) -> f64 {
        self.lambda / self.rho
    }

    /// Evaluated in log space.
    pub fn beta(&self, j: u32, t: f64) -> f64 {
        assert!(j >= 1 && j <= self.j_max() && t >= 0.0);
        let a = self.rate(j) * t;
        let base = j as f64 * self.ratio().ln() + a;
        if j == 1 {
            return base.exp();
        }
        if a == 0.0 {
            return 0.0;
        }
        (base + (j - 1) as f64 * a.ln() - ln_factorial(j - 1)).exp()
    }

    /// `dβ_j/dt`.
    pub fn beta_derivative(&self, j: u32, t: f64) -> f64 {
        let a = self.rate(j);
        let own = a * self.beta(j, t);
        if j == 1 {
            return own;
        }
        let s = a * t;
        if j == 2 {
            return own + a * self.ratio().powi(2) * s.exp();
        }
        if s == 0.0 {
            return own;
        }
        let log = a.ln() + j as f64 * self.ratio().ln() + s + (j - 2) as f64 * s.ln() - ln_factorial(j - 2);
        own + log.exp()
    }

    /// `dβ_j/dt - D c_j (β_j + (Λ/ρ) β_{j-1})`, with `β_0 ≡ 0`.
    pub fn gronwall_slack(&self, j: u32, t: f64) -> f64 {
        let prev = if j >= 2 { self.beta(j - 1, t) } else { 0.0 };
        self.beta_derivative(j, t) - self.rate(j) * (self.beta(j, t) + self.ratio() * prev)
    }
}

/// One frame of a measured series against its envelope.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnvelopeRow {
    pub t: f64,
    pub j: u32,
    pub alpha_exact: f64,
    pub alpha_tilde: f64,
    pub beta: f64,
    pub margin_exact: f64,
    pub margin_tilde: f64,
    pub violated: bool,
}

/// Margins `β_j(t) - α_N(w^j)` per frame; `series[i] = (t, α(Ψ_t), α(Ψ̃_t))`.
pub fn envelope_report(j: u32, series: &[(f64, f64, f64)], env: &Envelope) -> Vec<EnvelopeRow> {
    series
        .iter()
        .map(|&(t, a, b)| {
            let beta = env.beta(j, t);
            EnvelopeRow {
                t,
                j,
                alpha_exact: a,
                alpha_tilde: b,
                beta,
                margin_exact: beta - a,
                margin_tilde: beta - b,
                violated: a > beta || b > beta,
            }
        })
        .collect()
}
