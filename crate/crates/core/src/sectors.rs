//! Excitation-sector decomposition `Ψ = Σ_k φ^{⊗(N-k)} ⊗_s χ⁽ᵏ⁾` and the
//! coupled sector equations of the pair-projected and Bogoliubov dynamics.

use std::io::Write;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bogoliubov::Kernels;
use crate::error::{Error, Result};
use crate::krylov::{expmv, KrylovOptions};
use crate::linalg::rk4_step;
use crate::manybody::{apply_one_body_all, dimension, Hamiltonian, ManyBodyState};
use crate::model::{Model, STATE_SPACE_CAP};
use crate::onebody::{check_normalized, HartreeSolver, HartreeTrajectory};
use crate::tensor::{self, build, dot, norm, norm_sq, Layout};
use crate::C64;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sectors `χ⁽⁰⁾, …, χ⁽ᵏᵐᵃˣ⁾` relative to a condensate; `χ⁽ᵏ⁾` has `k` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct SectorFamily {
    pub chis: Vec<Array1<C64>>,
    pub sites: usize,
    pub phi: Array1<C64>,
    pub time: f64,
}

impl SectorFamily {
    /// `χ⁽⁰⁾ = 1`, all other sectors zero.
    pub fn vacuum(phi: &[C64], k_max: usize) -> Result<Self> {
        check_normalized(phi)?;
        let l = phi.len();
        let mut total = 0usize;
        let mut chis = Vec::with_capacity(k_max + 1);
        for k in 0..=k_max {
            let len = tensor::checked_len(l, k).ok_or(Error::TooLarge {
                dim: usize::MAX,
                cap: STATE_SPACE_CAP,
            })?;
            total = total.saturating_add(len);
            if total > STATE_SPACE_CAP {
                return Err(Error::TooLarge {
                    dim: total,
                    cap: STATE_SPACE_CAP,
                });
            }
            chis.push(Array1::zeros(len));
        }
        chis[0][0] = C64::new(1.0, 0.0);
        Ok(Self {
            chis,
            sites: l,
            phi: Array1::from(phi.to_vec()),
            time: 0.0,
        })
    }

    /// `χ⁽ᵏ⁾ = √C(N,k) Π_{i≤k} q_i ∫ Π_{i>k} φ̄(x_i) Ψ`.
    pub fn decompose(psi: &ManyBodyState, phi: &[C64]) -> Result<Self> {
        check_normalized(phi)?;
        if phi.len() != psi.sites {
            return Err(Error::Shape(format!(
                "condensate has {} sites, state has {}",
                phi.len(),
                psi.sites
            )));
        }
        let n = psi.n;
        let l = psi.sites;
        let mut chis = vec![Array1::zeros(0); n + 1];
        // contract the trailing slots one at a time: after j contractions
        // `cur` has N - j slots
        let mut cur = psi.amps.clone();
        for j in 0..=n {
            let k = n - j;
            let lay = Layout::new(l, k);
            let q = tensor::coproject_all(cur.as_slice().unwrap(), lay, phi);
            chis[k] = q * C64::new(binomial(n, k).sqrt(), 0.0);
            if k > 0 {
                cur = tensor::contract_slot(cur.as_slice().unwrap(), lay, k - 1, phi);
            }
        }
        Ok(Self {
            chis,
            sites: l,
            phi: Array1::from(phi.to_vec()),
            time: psi.time,
        })
    }

    /// `Σ_{k≤N} C(N,k)^{1/2} Sym(χ⁽ᵏ⁾ ⊗ φ^{⊗(N-k)})`; sectors above `N` are dropped.
    pub fn reconstruct(&self, n: usize) -> Result<ManyBodyState> {
        let len = dimension(self.sites, n)?;
        let lay = Layout::new(self.sites, n);
        let phi = self.phi.as_slice().unwrap();
        let mut out = Array1::zeros(len);
        for (k, chi) in self.chis.iter().enumerate().take(n + 1) {
            if norm_sq(chi.as_slice().unwrap()) == 0.0 {
                continue;
            }
            let raw = tensor::kron(chi.as_slice().unwrap(), tensor::product_power(phi, n - k).as_slice().unwrap());
            let sym = tensor::symmetrize(raw.as_slice().unwrap(), lay);
            tensor::axpy(
                C64::new(binomial(n, k).sqrt(), 0.0),
                sym.as_slice().unwrap(),
                out.as_slice_mut().unwrap(),
            );
        }
        let mut s = ManyBodyState::new(out, self.sites, n)?;
        s.time = self.time;
        Ok(s)
    }

    pub fn k_max(&self) -> usize {
        self.chis.len() - 1
    }

    pub fn masses(&self) -> Vec<f64> {
        self.chis.iter().map(|c| norm_sq(c.as_slice().unwrap())).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// `max_{k, slot} ‖p_slot χ⁽ᵏ⁾‖`.
    pub fn orthogonality_residual(&self) -> f64 {
        let phi = self.phi.as_slice().unwrap();
        let mut worst: f64 = 0.0;
        for (k, chi) in self.chis.iter().enumerate() {
            let lay = Layout::new(self.sites, k);
            for slot in 0..k {
                let c = tensor::contract_slot(chi.as_slice().unwrap(), lay, slot, phi);
                worst = worst.max(norm(c.as_slice().unwrap()));
            }
        }
        worst
    }

    /// `max_k max_{i<j} ‖χ⁽ᵏ⁾ - χ⁽ᵏ⁾∘(i j)‖`.
    pub fn symmetry_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, chi) in self.chis.iter().enumerate() {
            let lay = Layout::new(self.sites, k);
            for i in 0..k {
                for j in i + 1..k {
                    let t = tensor::transpose_slots(chi.as_slice().unwrap(), lay, i, j);
                    worst = worst.max(norm((&t - chi).as_slice().unwrap()));
                }
            }
        }
        worst
    }

    /// `Σ_k ‖χ⁽ᵏ⁾ - χ'⁽ᵏ⁾‖²`, missing sectors counted as zero.
    pub fn distance_sq(&self, other: &Self) -> f64 {
        let top = self.chis.len().max(other.chis.len());
        (0..top)
            .map(|k| match (self.chis.get(k), other.chis.get(k)) {
                (Some(a), Some(b)) => norm_sq((a - b).as_slice().unwrap()),
                (Some(a), None) | (None, Some(a)) => norm_sq(a.as_slice().unwrap()),
                (None, None) => 0.0,
            })
            .sum()
    }

    fn offsets(&self) -> Vec<usize> {
        let mut off = vec![0];
        for c in &self.chis {
            off.push(off.last().unwrap() + c.len());
        }
        off
    }

    fn flatten(&self) -> Array1<C64> {
        let mut v = Vec::with_capacity(*self.offsets().last().unwrap());
        for c in &self.chis {
            v.extend(c.iter().copied());
        }
        Array1::from(v)
    }

    fn split(&self, flat: &Array1<C64>) -> Vec<Array1<C64>> {
        let off = self.offsets();
        (0..self.chis.len())
            .map(|k| flat.slice(ndarray::s![off[k]..off[k + 1]]).to_owned())
            .collect()
    }
}

/// Which sector equations to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HierarchyKind {
    /// Sector equations of the pair-projected dynamics for `N` particles.
    Tilde { n: usize },
    /// Fock-space Bogoliubov equations without combinatorial factors.
    Bogoliubov,
}

/// How the prefactor in front of `Σ_{i<j} K⁽²⁾(x_i,x_j) χ⁽ᵏ⁻²⁾` is read.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairSumReading {
    /// `½ Σ_{i≠j} = Σ_{i<j}`; the generator is Hermitian.
    #[default]
    Ordered,
    /// A literal extra `½` on `Σ_{i<j}`; not Hermitian, RK4 only.
    Unordered,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    #[default]
    Krylov,
    Rk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyOptions {
    pub kind: HierarchyKind,
    pub k_max: usize,
    #[serde(default)]
    pub reading: PairSumReading,
    #[serde(default)]
    pub stepper: Stepper,
    #[serde(default = "default_tail_warn")]
    pub tail_warn: f64,
    #[serde(default = "default_tail_error")]
    pub tail_error: f64,
    #[serde(default = "default_stride")]
    pub stride: usize,
}

fn default_tail_warn() -> f64 {
    1e-6
}

fn default_tail_error() -> f64 {
    1e-3
}

fn default_stride() -> usize {
    1
}

impl HierarchyOptions {
    /// Untruncated sector equations for `N` particles.
    pub fn tilde(n: usize) -> Self {
        Self {
            kind: HierarchyKind::Tilde { n },
            k_max: n,
            reading: PairSumReading::Ordered,
            stepper: Stepper::Krylov,
            tail_warn: default_tail_warn(),
            tail_error: default_tail_error(),
            stride: 1,
        }
    }

    /// Bogoliubov equations truncated at `k_max`.
    pub fn bogoliubov(k_max: usize) -> Self {
        Self {
            kind: HierarchyKind::Bogoliubov,
            k_max,
            ..Self::tilde(0)
        }
    }

    /// Whether sectors above `k_max` are dropped from a dynamics that
    /// would populate them.
    pub fn is_truncated(&self) -> bool {
        match self.kind {
            HierarchyKind::Tilde { n } => self.k_max < n,
            HierarchyKind::Bogoliubov => true,
        }
    }
}

/// Prefactors `(a_k, c_k, u_k)` of the one-body `K⁽¹⁾` term, the downward
/// `Σ_{i<j} K⁽²⁾` term and the upward `∫ K̄⁽²⁾ χ⁽ᵏ⁺²⁾` term.
pub fn prefactors(kind: HierarchyKind, reading: PairSumReading, k: usize) -> (f64, f64, f64) {
    let kf = k as f64;
    let down_pairs = if k >= 2 { 1.0 / (kf * (kf - 1.0)).sqrt() } else { 0.0 };
    let up_pairs = 0.5 * ((kf + 1.0) * (kf + 2.0)).sqrt();
    let (a, c, u) = match kind {
        HierarchyKind::Tilde { n } => {
            if k > n {
                return (0.0, 0.0, 0.0);
            }
            let nf = n as f64;
            let a = (nf - kf) / nf;
            let c = if k >= 2 {
                ((nf - kf + 2.0) * (nf - kf + 1.0)).sqrt() / nf * down_pairs
            } else {
                0.0
            };
            let u = if k + 2 <= n {
                ((nf - kf) * (nf - kf - 1.0)).sqrt() / nf * up_pairs
            } else {
                0.0
            };
            (a, c, u)
        }
        HierarchyKind::Bogoliubov => (1.0, down_pairs, up_pairs),
    };
    match reading {
        PairSumReading::Ordered => (a, c, u),
        PairSumReading::Unordered => (a, 0.5 * c, u),
    }
}

/// The sector generator `G` with `iħ∂χ = Gχ`, frozen at one condensate.
pub struct SectorGenerator {
    kind: HierarchyKind,
    reading: PairSumReading,
    sites: usize,
    h: Array2<C64>,
    kernels: Kernels,
    k2_flat: Vec<C64>,
}

/// The three contributions of one application of the generator besides
/// the Hartree part.
pub struct Channels {
    pub one_body: Vec<Array1<C64>>,
    pub exchange: Vec<Array1<C64>>,
    pub down: Vec<Array1<C64>>,
    pub up: Vec<Array1<C64>>,
}

impl SectorGenerator {
    pub fn new(kind: HierarchyKind, reading: PairSumReading, h: Array2<C64>, kernels: Kernels) -> Self {
        let sites = h.nrows();
        let k2_flat = kernels.k2.iter().copied().collect();
        Self {
            kind,
            reading,
            sites,
            h,
            kernels,
            k2_flat,
        }
    }

    /// Generator frozen at `phi` for the model's Hartree operator and kernels.
    pub fn at(model: &Model, solver: &HartreeSolver, phi: &[C64], kind: HierarchyKind, reading: PairSumReading) -> Result<Self> {
        let kernels = Kernels::build(model, phi)?;
        Ok(Self::new(kind, reading, solver.hartree_operator(phi), kernels))
    }

    fn one_body(&self, chi: &Array1<C64>, k: usize, m: &Array2<C64>) -> Array1<C64> {
        if k == 0 {
            return Array1::zeros(1);
        }
        tensor::apply_all_slots(chi.as_slice().unwrap(), Layout::new(self.sites, k), m)
    }

    /// `Σ_{i<j} K⁽²⁾(x_i,x_j) χ(x without x_i, x_j)` for `χ` with `k - 2` slots.
    fn pair_insert(&self, chi: &Array1<C64>, k: usize) -> Array1<C64> {
        let lay = Layout::new(self.sites, k);
        let mut out = Array1::zeros(lay.len());
        for i in 0..k {
            for j in i + 1..k {
                tensor::add_insert_pair(
                    chi.as_slice().unwrap(),
                    lay,
                    i,
                    j,
                    &self.k2_flat,
                    out.as_slice_mut().unwrap(),
                );
            }
        }
        out
    }

    /// `∫ K̄⁽²⁾(x,y) χ(…, x, y)` over the last two slots.
    fn pair_remove(&self, chi: &Array1<C64>) -> Array1<C64> {
        let l2 = self.sites * self.sites;
        build(chi.len() / l2, |r| {
            let row = &chi.as_slice().unwrap()[r * l2..(r + 1) * l2];
            self.k2_flat.iter().zip(row).map(|(a, b)| a.conj() * b).sum()
        })
    }

    /// Hartree part, `a_k K⁽¹⁾`, downward and upward contributions sector by
    /// sector.
    pub fn channels(&self, chis: &[Array1<C64>]) -> Channels {
        let top = chis.len() - 1;
        let parts: Vec<[Array1<C64>; 4]> = (0..=top)
            .into_par_iter()
            .map(|k| {
                let (a, c, u) = prefactors(self.kind, self.reading, k);
                let len = chis[k].len();
                let one = self.one_body(&chis[k], k, &self.h);
                let ex = if a != 0.0 {
                    self.one_body(&chis[k], k, &self.kernels.k1) * C64::new(a, 0.0)
                } else {
                    Array1::zeros(len)
                };
                let down = if c != 0.0 {
                    self.pair_insert(&chis[k - 2], k) * C64::new(c, 0.0)
                } else {
                    Array1::zeros(len)
                };
                let up = if u != 0.0 && k + 2 <= top {
                    self.pair_remove(&chis[k + 2]) * C64::new(u, 0.0)
                } else {
                    Array1::zeros(len)
                };
                [one, ex, down, up]
            })
            .collect();
        let mut ch = Channels {
            one_body: Vec::new(),
            exchange: Vec::new(),
            down: Vec::new(),
            up: Vec::new(),
        };
        for [a, b, c, d] in parts {
            ch.one_body.push(a);
            ch.exchange.push(b);
            ch.down.push(c);
            ch.up.push(d);
        }
        ch
    }

    pub fn apply(&self, chis: &[Array1<C64>]) -> Vec<Array1<C64>> {
        let ch = self.channels(chis);
        (0..chis.len())
            .map(|k| &ch.one_body[k] + &ch.exchange[k] + &ch.down[k] + &ch.up[k])
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SectorFrameStats {
    pub time: f64,
    pub masses: Vec<f64>,
    pub tail: f64,
    pub orthogonality: f64,
}

#[derive(Clone, Debug)]
pub struct SectorTrajectory {
    pub frames: Vec<SectorFamily>,
    pub stats: Vec<SectorFrameStats>,
    /// Largest `‖p χ‖` removed by the per-step re-projection.
    pub max_reprojection: f64,
    pub warnings: Vec<String>,
}

impl SectorTrajectory {
    pub fn last(&self) -> &SectorFamily {
        self.frames.last().expect("trajectory has at least one frame")
    }

    /// `t, mass_0..mass_kmax, tail, orthogonality`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let k_max = self.stats.first().map_or(0, |s| s.masses.len() - 1);
        let mut header = vec!["t".to_string()];
        header.extend((0..=k_max).map(|k| format!("mass_{k}")));
        header.push("tail".into());
        header.push("orthogonality".into());
        out.write_record(&header)?;
        for s in &self.stats {
            let mut row = vec![s.time.to_string()];
            row.extend(s.masses.iter().map(|m| m.to_string()));
            row.push(s.tail.to_string());
            row.push(s.orthogonality.to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn tail_mass(masses: &[f64], truncated: bool) -> f64 {
    if !truncated {
        return 0.0;
    }
    masses.iter().rev().take(2).sum()
}

/// Integrates the sector equations along a Hartree trajectory with the
/// generator frozen at each midpoint. After every step each sector is
/// projected back onto the complement of the new condensate.
pub fn evolve_hierarchy(
    family0: &SectorFamily,
    model: &Model,
    traj: &HartreeTrajectory,
    t_final: f64,
    opts: &HierarchyOptions,
) -> Result<SectorTrajectory> {
    if family0.k_max() != opts.k_max {
        return Err(Error::Config(format!(
            "family has k_max = {}, options ask for {}",
            family0.k_max(),
            opts.k_max
        )));
    }
    if let HierarchyKind::Tilde { n } = opts.kind {
        if opts.k_max > n {
            return Err(Error::Config(format!("k_max {} exceeds N = {n}", opts.k_max)));
        }
    }
    if opts.reading == PairSumReading::Unordered && opts.stepper == Stepper::Krylov {
        return Err(Error::Config("the unordered pair-sum reading is not Hermitian; use rk4".into()));
    }
    let steps = model.params.with_dt(traj.dt).steps_to(t_final)?;
    if steps > traj.steps() {
        return Err(Error::TrajectoryTooShort { step: steps - 1, dt: traj.dt });
    }
    let solver = HartreeSolver::new(model).with_dt(traj.dt);
    let hbar = model.params.hbar;
    let stride = opts.stride.max(1);
    let truncated = opts.is_truncated();
    let kopts = KrylovOptions::default();
    let mut cur = family0.clone();
    let stats_of = |f: &SectorFamily| {
        let masses = f.masses();
        SectorFrameStats {
            time: f.time,
            tail: tail_mass(&masses, truncated),
            masses,
            orthogonality: f.orthogonality_residual(),
        }
    };
    let mut frames = vec![cur.clone()];
    let mut stats = vec![stats_of(&cur)];
    let mut warnings = Vec::new();
    let mut warned = false;
    let mut max_reprojection: f64 = 0.0;
    for n in 0..steps {
        let mid = traj.midpoint(n)?.as_slice().unwrap();
        let gen = SectorGenerator::at(model, &solver, mid, opts.kind, opts.reading)?;
        let flat = cur.flatten();
        let apply = |v: &Array1<C64>| {
            let out = gen.apply(&cur.split(v));
            let mut f = Vec::with_capacity(v.len());
            for c in out {
                f.extend(c);
            }
            Array1::from(f)
        };
        let next = match opts.stepper {
            Stepper::Krylov => expmv(apply, &flat, traj.dt / hbar, &kopts, n)?.0,
            Stepper::Rk4 => rk4_step(&flat, traj.dt, |v| apply(v).mapv(|z| z * C64::new(0.0, -1.0 / hbar))),
        };
        let phi_next = traj.frame(n + 1)?;
        let chis = cur.split(&next);
        let mut reproj: f64 = 0.0;
        let chis: Vec<Array1<C64>> = chis
            .into_iter()
            .enumerate()
            .map(|(k, c)| {
                let q = tensor::coproject_all(c.as_slice().unwrap(), Layout::new(cur.sites, k), phi_next.as_slice().unwrap());
                reproj = reproj.max(norm((&c - &q).as_slice().unwrap()));
                q
            })
            .collect();
        max_reprojection = max_reprojection.max(reproj);
        cur = SectorFamily {
            chis,
            sites: cur.sites,
            phi: phi_next.clone(),
            time: (n + 1) as f64 * traj.dt,
        };
        let st = stats_of(&cur);
        if st.tail > opts.tail_error {
            return Err(Error::TailMass {
                tail: st.tail,
                threshold: opts.tail_error,
                time: cur.time,
            });
        }
        if st.tail > opts.tail_warn && !warned {
            warned = true;
            warnings.push(format!(
                "tail mass {:.3e} above {:.1e} at t = {}",
                st.tail, opts.tail_warn, cur.time
            ));
        }
        if (n + 1) % stride == 0 || n + 1 == steps {
            frames.push(cur.clone());
            stats.push(st);
        }
    }
    Ok(SectorTrajectory {
        frames,
        stats,
        max_reprojection,
        warnings,
    })
}

/// Static consistency of the sector equations with the full-space
/// pair-projected generator at one condensate, per sector `k`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChannelResidual {
    pub k: usize,
    /// `‖decompose((H̃ - Σ_j h_j)Ψ)_k‖`.
    pub reference: f64,
    /// `‖reference - exchange - down - up‖`.
    pub residual: f64,
    /// Scale each channel would need for an exact match with the other two
    /// held fixed; `1` when consistent, `NaN` for an empty channel.
    pub exchange_scale: f64,
    pub down_scale: f64,
    pub up_scale: f64,
}

/// Compares the non-Hartree part of the sector generator with the
/// decomposition of `(H̃ - Σ_j h_j) Ψ` for `Ψ = reconstruct(family)`.
pub fn channel_attribution(
    model: &Model,
    family: &SectorFamily,
    reading: PairSumReading,
) -> Result<Vec<ChannelResidual>> {
    let n = model.n();
    if family.k_max() != n {
        return Err(Error::Config("channel attribution needs the full family k = 0..=N".into()));
    }
    let phi = family.phi.as_slice().unwrap();
    let ham = Hamiltonian::new(model)?;
    let solver = HartreeSolver::new(model);
    let psi = family.reconstruct(n)?;
    let h = solver.hartree_operator(phi);
    let mut lhs = ham.apply_h_tilde(psi.as_slice(), phi)?;
    lhs -= &apply_one_body_all(&psi, &h);
    let reference = SectorFamily::decompose(&psi.with_amps(lhs), phi)?;
    let gen = SectorGenerator::new(HierarchyKind::Tilde { n }, reading, h, Kernels::build(model, phi)?);
    let ch = gen.channels(&family.chis);
    let scale = |c: &Array1<C64>, target: &Array1<C64>| {
        let cc = norm_sq(c.as_slice().unwrap());
        if cc == 0.0 {
            f64::NAN
        } else {
            dot(c.as_slice().unwrap(), target.as_slice().unwrap()).re / cc
        }
    };
    Ok((0..=n)
        .map(|k| {
            let r = &reference.chis[k];
            let (e, d, u) = (&ch.exchange[k], &ch.down[k], &ch.up[k]);
            ChannelResidual {
                k,
                reference: norm(r.as_slice().unwrap()),
                residual: norm((r - e - d - u).as_slice().unwrap()),
                exchange_scale: scale(e, &(r - d - u)),
                down_scale: scale(d, &(r - e - u)),
                up_scale: scale(u, &(r - e - d)),
            }
        })
        .collect())
}
