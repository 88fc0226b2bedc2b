//! Projectors `p_j`, `q_j`, `P_k`, weighted operators `m̂_d`, the counting
//! functional `α_N` and the functionals `γ^{a,b,c}`.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manybody::{pair_parts, Hamiltonian, ManyBodyState};
use crate::onebody::check_normalized;
use crate::tensor::{self, dot, norm_sq, Layout};
use crate::C64;

/// Weight function `m: {0..N} → [0, ∞)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("weight vector needs at least one entry".into()));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(Error::Config(format!("weights must be finite and >= 0, got {x}")));
        }
        Ok(Self { values })
    }

    pub fn from_fn<F: Fn(usize) -> f64>(n: usize, f: F) -> Result<Self> {
        Self::new((0..=n).map(f).collect())
    }

    /// `m ≡ 1`.
    pub fn ones(n: usize) -> Self {
        Self {
            values: vec![1.0; n + 1],
        }
    }

    /// `n(k) = k/N`.
    pub fn relative_count(n: usize) -> Self {
        Self {
            values: (0..=n).map(|k| k as f64 / n as f64).collect(),
        }
    }

    /// Largest index `N`.
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    /// Coefficient of `P_j` in `m̂_d`: `m(j + d)` when in range, else 0.
    pub fn shifted(&self, j: usize, d: i64) -> f64 {
        let k = j as i64 + d;
        if k < 0 || k > self.n() as i64 {
            0.0
        } else {
            self.values[k as usize]
        }
    }

    pub fn pow(&self, j: u32) -> Self {
        Self {
            values: self.values.iter().map(|x| x.powi(j as i32)).collect(),
        }
    }

    /// Pointwise product `l·m`.
    pub fn product(&self, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        }
    }

    pub fn sqrt(&self) -> Self {
        Self {
            values: self.values.iter().map(|x| x.sqrt()).collect(),
        }
    }
}

/// `masses[k] = ‖P_k Ψ‖²`.
#[derive(Clone, Debug, PartialEq)]
pub struct QCountSpectrum {
    pub masses: Vec<f64>,
}

impl QCountSpectrum {
    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `Σ_k m(k) masses[k]`.
    pub fn expectation(&self, m: &WeightVector) -> f64 {
        self.masses.iter().zip(m.values()).map(|(a, b)| a * b).sum()
    }
}

fn check_slot(psi: &ManyBodyState, slot: usize) -> Result<()> {
    if slot >= psi.n {
        return Err(Error::SlotOutOfRange { slot, n: psi.n });
    }
    Ok(())
}

fn check_phi(psi: &ManyBodyState, phi: &[C64]) -> Result<()> {
    if phi.len() != psi.sites {
        return Err(Error::Shape(format!(
            "condensate has {} sites, state has {}",
            phi.len(),
            psi.sites
        )));
    }
    check_normalized(phi)
}

/// `p_j Ψ`, slots counted from 0.
pub fn apply_p(slot: usize, phi: &[C64], psi: &ManyBodyState) -> Result<ManyBodyState> {
    check_slot(psi, slot)?;
    check_phi(psi, phi)?;
    Ok(psi.with_amps(tensor::project_slot(psi.as_slice(), psi.layout(), slot, phi)))
}

/// `q_j Ψ`.
pub fn apply_q(slot: usize, phi: &[C64], psi: &ManyBodyState) -> Result<ManyBodyState> {
    check_slot(psi, slot)?;
    check_phi(psi, phi)?;
    Ok(psi.with_amps(tensor::coproject_slot(psi.as_slice(), psi.layout(), slot, phi)))
}

fn count_raw(psi: &[C64], lay: Layout, phi: &[C64]) -> Array1<C64> {
    let mut out = Array1::from(psi.to_vec()) * C64::new(lay.slots as f64, 0.0);
    for j in 0..lay.slots {
        out -= &tensor::project_slot(psi, lay, j, phi);
    }
    out
}

/// `N̂_q Ψ = Σ_j q_j Ψ`.
pub fn apply_count(phi: &[C64], psi: &ManyBodyState) -> Result<ManyBodyState> {
    check_phi(psi, phi)?;
    Ok(psi.with_amps(count_raw(psi.as_slice(), psi.layout(), phi)))
}

/// `P_k Ψ` as the Lagrange polynomial `Π_{l≠k} (N̂_q - l)/(k - l)` in the
/// integer-valued count operator. Zero outside `0..=N`.
pub fn apply_p_k(k: i64, phi: &[C64], psi: &ManyBodyState) -> Result<ManyBodyState> {
    check_phi(psi, phi)?;
    let n = psi.n as i64;
    if k < 0 || k > n {
        return Ok(psi.with_amps(Array1::zeros(psi.amps.len())));
    }
    let lay = psi.layout();
    let mut cur = psi.amps.clone();
    for l in 0..=n {
        if l == k {
            continue;
        }
        let mut next = count_raw(cur.as_slice().unwrap(), lay, phi);
        next.zip_mut_with(&cur, |a, b| *a = (*a - b * l as f64) / (k - l) as f64);
        cur = next;
    }
    Ok(psi.with_amps(cur))
}

/// All `P_k Ψ`, `k = 0..=N`, from the defining sum over `p`/`q` patterns:
/// slot by slot, bucket `c` collects the patterns with `c` factors of `q`.
pub fn count_decomposition(phi: &[C64], psi: &ManyBodyState) -> Result<Vec<Array1<C64>>> {
    check_phi(psi, phi)?;
    let lay = psi.layout();
    let n = psi.n;
    let mut buckets: Vec<Array1<C64>> = vec![psi.amps.clone()];
    for j in 0..n {
        let mut next: Vec<Array1<C64>> = vec![Array1::zeros(psi.amps.len()); buckets.len() + 1];
        for (c, b) in buckets.iter().enumerate() {
            let p = tensor::project_slot(b.as_slice().unwrap(), lay, j, phi);
            let q = b - &p;
            next[c] += &p;
            next[c + 1] += &q;
        }
        buckets = next;
    }
    Ok(buckets)
}

pub fn spectrum(phi: &[C64], psi: &ManyBodyState) -> Result<QCountSpectrum> {
    let parts = count_decomposition(phi, psi)?;
    Ok(QCountSpectrum {
        masses: parts.iter().map(|p| norm_sq(p.as_slice().unwrap())).collect(),
    })
}

fn check_weight(m: &WeightVector, psi: &ManyBodyState) -> Result<()> {
    if m.n() != psi.n {
        return Err(Error::Shape(format!(
            "weight covers 0..={}, state has N = {}",
            m.n(),
            psi.n
        )));
    }
    Ok(())
}

fn combine(parts: &[Array1<C64>], coeff: impl Fn(usize) -> f64) -> Array1<C64> {
    let mut out = Array1::zeros(parts[0].len());
    for (j, p) in parts.iter().enumerate() {
        let c = coeff(j);
        if c != 0.0 {
            tensor::axpy(C64::new(c, 0.0), p.as_slice().unwrap(), out.as_slice_mut().unwrap());
        }
    }
    out
}

/// `m̂_d Ψ = Σ_j m(j + d) P_j Ψ`.
pub fn apply_weighted(m: &WeightVector, d: i64, phi: &[C64], psi: &ManyBodyState) -> Result<ManyBodyState> {
    check_weight(m, psi)?;
    let parts = count_decomposition(phi, psi)?;
    Ok(psi.with_amps(combine(&parts, |j| m.shifted(j, d))))
}

/// `α_N(m, Ψ, φ) = ⟨Ψ, m̂ Ψ⟩`.
pub fn alpha_n(m: &WeightVector, psi: &ManyBodyState, phi: &[C64]) -> Result<f64> {
    check_weight(m, psi)?;
    Ok(spectrum(phi, psi)?.expectation(m))
}

/// Multiplication by `W_{1,2}` on the first two slots.
#[derive(Clone, Debug)]
pub struct W12 {
    table: Vec<f64>,
    layout: Layout,
}

impl W12 {
    pub fn build(ham: &Hamiltonian, phi: &[C64]) -> Result<Self> {
        check_normalized(phi)?;
        if ham.layout().slots < 2 {
            return Err(Error::Config("W_{1,2} needs N >= 2".into()));
        }
        Ok(Self {
            table: ham.w_table(phi),
            layout: ham.layout(),
        })
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn apply(&self, psi: &[C64]) -> Array1<C64> {
        tensor::multiply_pair(psi, self.layout, 0, 1, &self.table)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaTerms {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl GammaTerms {
    pub fn sum(&self) -> f64 {
        self.a + self.b + self.c
    }
}

/// `γ^a = 2ħ⁻¹ Im⟨Ψ, (m̂ - m̂_{-1}) p₁q₂ W p₁p₂ Ψ⟩`,
/// `γ^b = ħ⁻¹ Im⟨Ψ, (m̂ - m̂_{-2}) q₁q₂ W p₁p₂ Ψ⟩`,
/// `γ^c = 2ħ⁻¹ Im⟨Ψ, (m̂ - m̂_{-1}) q₁q₂ W p₁q₂ Ψ⟩`.
pub fn gamma_abc(m: &WeightVector, psi: &ManyBodyState, phi: &[C64], ham: &Hamiltonian) -> Result<GammaTerms> {
    check_weight(m, psi)?;
    check_phi(psi, phi)?;
    let w = W12::build(ham, phi)?;
    let lay = psi.layout();
    let hbar = ham.model().params.hbar;
    let parts = count_decomposition(phi, psi)?;
    // (m̂ - m̂_{-d}) is Hermitian, so it is moved onto the bra
    let bra1 = combine(&parts, |j| m.get(j) - m.shifted(j, -1));
    let bra2 = combine(&parts, |j| m.get(j) - m.shifted(j, -2));
    let [pp, pq, _, _] = pair_parts(psi.as_slice(), lay, 0, 1, phi);
    let wpp = w.apply(pp.as_slice().unwrap());
    let wpq = w.apply(pq.as_slice().unwrap());
    let [_, pq_of_wpp, _, qq_of_wpp] = pair_parts(wpp.as_slice().unwrap(), lay, 0, 1, phi);
    let [_, _, _, qq_of_wpq] = pair_parts(wpq.as_slice().unwrap(), lay, 0, 1, phi);
    let im = |bra: &Array1<C64>, ket: &Array1<C64>| dot(bra.as_slice().unwrap(), ket.as_slice().unwrap()).im;
    Ok(GammaTerms {
        a: 2.0 / hbar * im(&bra1, &pq_of_wpp),
        b: 1.0 / hbar * im(&bra2, &qq_of_wpp),
        c: 2.0 / hbar * im(&bra1, &qq_of_wpq),
    })
}
