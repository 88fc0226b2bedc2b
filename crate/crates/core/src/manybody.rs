//! Full `N`-body states on the lattice and matrix-free generators:
//! the exact Hamiltonian `H`, the mean-field part, the pair-projected `H̃`
//! and their difference, with Lanczos time stepping.

use std::io::{Read, Write};
use std::sync::OnceLock;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::{expmv, KrylovOptions};
use crate::model::{Model, STATE_SPACE_CAP};
use crate::onebody::{check_normalized, convolve_density, HartreeTrajectory};
use crate::tensor::{self, build, checked_len, dot, norm, norm_sq, Layout};
use crate::C64;

const FRAME_MAGIC: &[u8; 8] = b"BOGOLAB1";

#[derive(Clone, Debug, PartialEq)]
pub struct ManyBodyState {
    pub amps: Array1<C64>,
    pub sites: usize,
    pub n: usize,
    pub time: f64,
}

impl ManyBodyState {
    pub fn new(amps: Array1<C64>, sites: usize, n: usize) -> Result<Self> {
        let len = dimension(sites, n)?;
        if amps.len() != len {
            return Err(Error::Shape(format!(
                "expected {len} amplitudes for {n} particles on {sites} sites, got {}",
                amps.len()
            )));
        }
        Ok(Self {
            amps,
            sites,
            n,
            time: 0.0,
        })
    }

    /// `φ^{⊗N}`.
    pub fn product(phi: &[C64], n: usize) -> Result<Self> {
        dimension(phi.len(), n)?;
        Self::new(tensor::product_power(phi, n), phi.len(), n)
    }

    /// Complex Gaussian tensor, symmetrized and normalized.
    pub fn random_symmetric<R: Rng>(sites: usize, n: usize, rng: &mut R) -> Result<Self> {
        let len = dimension(sites, n)?;
        let raw: Vec<C64> = (0..len)
            .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let mut amps = tensor::symmetrize(&raw, Layout::new(sites, n));
        let s = norm(amps.as_slice().unwrap());
        amps.mapv_inplace(|z| z / s);
        Self::new(amps, sites, n)
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.sites, self.n)
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amps.as_slice().unwrap()
    }

    pub fn norm(&self) -> f64 {
        norm(self.as_slice())
    }

    pub fn with_amps(&self, amps: Array1<C64>) -> Self {
        Self {
            amps,
            sites: self.sites,
            n: self.n,
            time: self.time,
        }
    }

    /// `max_{i<j} ‖Ψ - Ψ∘(i j)‖`.
    pub fn symmetry_residual(&self) -> f64 {
        let lay = self.layout();
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in i + 1..self.n {
                let t = tensor::transpose_slots(self.as_slice(), lay, i, j);
                let d: f64 = t
                    .iter()
                    .zip(self.amps.iter())
                    .map(|(a, b)| (a - b).norm_sqr())
                    .sum::<f64>()
                    .sqrt();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Raw frame: 32-byte header (magic, d, M, N, reserved, time) then
    /// little-endian `(re, im)` pairs.
    pub fn write_frame<W: Write>(&self, dim: usize, sites_per_dim: usize, mut w: W) -> Result<()> {
        w.write_all(FRAME_MAGIC)?;
        w.write_all(&(dim as u32).to_le_bytes())?;
        w.write_all(&(sites_per_dim as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&0u32.to_le_bytes())?;
        w.write_all(&self.time.to_le_bytes())?;
        for z in self.amps.iter() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_frame<R: Read>(mut r: R) -> Result<Self> {
        let mut head = [0u8; 32];
        r.read_exact(&mut head)?;
        if &head[..8] != FRAME_MAGIC {
            return Err(Error::Shape("bad frame magic".into()));
        }
        let u = |k: usize| u32::from_le_bytes(head[k..k + 4].try_into().unwrap()) as usize;
        let (d, m, n) = (u(8), u(12), u(16));
        let time = f64::from_le_bytes(head[24..32].try_into().unwrap());
        let sites = m.pow(d as u32);
        let len = dimension(sites, n)?;
        let mut buf = vec![0u8; len * 16];
        r.read_exact(&mut buf)?;
        let amps = (0..len)
            .map(|i| {
                let re = f64::from_le_bytes(buf[16 * i..16 * i + 8].try_into().unwrap());
                let im = f64::from_le_bytes(buf[16 * i + 8..16 * i + 16].try_into().unwrap());
                C64::new(re, im)
            })
            .collect();
        let mut s = Self::new(amps, sites, n)?;
        s.time = time;
        Ok(s)
    }
}

/// `sites^n`, rejected above the state-space cap.
pub fn dimension(sites: usize, n: usize) -> Result<usize> {
    match checked_len(sites, n) {
        Some(d) if d <= STATE_SPACE_CAP => Ok(d),
        Some(d) => Err(Error::TooLarge {
            dim: d,
            cap: STATE_SPACE_CAP,
        }),
        None => Err(Error::TooLarge {
            dim: usize::MAX,
            cap: STATE_SPACE_CAP,
        }),
    }
}

/// `‖A - B‖²` and the equivalent `2 Re⟨A, A - B⟩` for unit vectors.
pub fn norm_difference_sq(a: &[C64], b: &[C64]) -> (f64, f64) {
    let direct: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let via_overlap = 2.0 * (norm_sq(a) - dot(a, b).re);
    (direct, via_overlap)
}

/// Which generator drives an evolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    Full,
    MeanField,
    Tilde,
    Difference,
}

impl GeneratorKind {
    pub fn needs_trajectory(self) -> bool {
        !matches!(self, GeneratorKind::Full)
    }

    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::Full => "full",
            GeneratorKind::MeanField => "mean-field",
            GeneratorKind::Tilde => "tilde",
            GeneratorKind::Difference => "difference",
        }
    }
}

/// Matrix-free many-body operators for one model.
#[derive(Debug)]
pub struct Hamiltonian {
    model: Model,
    /// `v(x - y)` indexed `x * L + y`.
    pair_v: Vec<f64>,
    neighbors: Vec<Vec<usize>>,
    interaction: OnceLock<Vec<f64>>,
}

impl Hamiltonian {
    pub fn new(model: &Model) -> Result<Self> {
        dimension(model.sites(), model.n())?;
        let lat = &model.lattice;
        let l = lat.num_sites();
        let pair_v = (0..l * l)
            .map(|k| model.potential.at(lat.displacement(k / l, k % l)))
            .collect();
        let neighbors = (0..l).map(|x| lat.neighbors(x)).collect();
        Ok(Self {
            model: model.clone(),
            pair_v,
            neighbors,
            interaction: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn layout(&self) -> Layout {
        Layout::new(self.model.sites(), self.model.n())
    }

    pub fn pair_potential(&self) -> &[f64] {
        &self.pair_v
    }

    fn check(&self, psi: &[C64]) -> Result<()> {
        if psi.len() != self.layout().len() {
            return Err(Error::Shape(format!(
                "state has {} amplitudes, model needs {}",
                psi.len(),
                self.layout().len()
            )));
        }
        Ok(())
    }

    /// `ρ⁻¹ Σ_{j<k} v(x_j - x_k)` on every configuration.
    fn interaction_diagonal(&self) -> &[f64] {
        self.interaction.get_or_init(|| {
            let lay = self.layout();
            let l = lay.sites;
            let inv_rho = 1.0 / self.model.params.rho;
            let n = lay.slots;
            let mut digits = vec![0; n];
            (0..lay.len())
                .map(|i| {
                    lay.digits(i, &mut digits);
                    let mut s = 0.0;
                    for a in 0..n {
                        for b in a + 1..n {
                            s += self.pair_v[digits[a] * l + digits[b]];
                        }
                    }
                    s * inv_rho
                })
                .collect()
        })
    }

    /// `-ħ² Σ_j Δ_j` plus the diagonal `Σ_j u(x_j) + extra(config)`.
    fn kinetic_plus(&self, psi: &[C64], onsite: Option<&[f64]>, extra: Option<&[f64]>) -> Array1<C64> {
        let lay = self.layout();
        let l = lay.sites;
        let n = lay.slots;
        let h2 = self.model.params.hbar.powi(2);
        let diag0 = 2.0 * self.model.lattice.dim() as f64 * n as f64;
        build(lay.len(), |i| {
            let mut acc = psi[i] * diag0;
            let mut onsite_sum = 0.0;
            let mut rest = i;
            for j in (0..n).rev() {
                let s = lay.stride(j);
                let x = rest % l;
                rest /= l;
                for &y in &self.neighbors[x] {
                    acc -= psi[i - x * s + y * s];
                }
                if let Some(u) = onsite {
                    onsite_sum += u[x];
                }
            }
            let mut d = onsite_sum;
            if let Some(e) = extra {
                d += e[i];
            }
            acc * h2 + psi[i] * d
        })
    }

    pub fn apply_kinetic(&self, psi: &[C64]) -> Result<Array1<C64>> {
        self.check(psi)?;
        Ok(self.kinetic_plus(psi, None, None))
    }

    /// `H_N Ψ`.
    pub fn apply_h(&self, psi: &[C64]) -> Result<Array1<C64>> {
        self.check(psi)?;
        Ok(self.kinetic_plus(psi, None, Some(self.interaction_diagonal())))
    }

    /// `g[(v∗|φ|²) - μ]` on each site.
    pub fn mean_field_potential(&self, phi: &[C64]) -> Vec<f64> {
        let lat = &self.model.lattice;
        let c = convolve_density(lat, &self.model.potential, phi);
        let mu = 0.5 * c.iter().zip(phi).map(|(a, z)| a * z.norm_sqr()).sum::<f64>();
        let g = self.model.params.mean_field_coupling();
        c.into_iter().map(|x| g * (x - mu)).collect()
    }

    /// `Σ_j h_j^{H,φ} Ψ`.
    pub fn apply_h_mf(&self, psi: &[C64], phi: &[C64]) -> Result<Array1<C64>> {
        self.check(psi)?;
        check_normalized(phi)?;
        let u = self.mean_field_potential(phi);
        Ok(self.kinetic_plus(psi, Some(&u), None))
    }

    /// The pair channels of `H̃` as one dense `L² × L²` matrix on a
    /// coordinate pair, indexed as in [`tensor::add_pair_matrix`].
    pub fn tilde_pair_matrix(&self, phi: &[C64]) -> Vec<C64> {
        let l = self.model.sites();
        let inv_rho = 1.0 / self.model.params.rho;
        let p = |a: usize, b: usize| phi[a] * phi[b].conj();
        let q = |a: usize, b: usize| C64::new(if a == b { 1.0 } else { 0.0 }, 0.0) - p(a, b);
        // (A ⊗ B) V (C ⊗ D) summed over the four channels
        type Proj<'a> = &'a dyn Fn(usize, usize) -> C64;
        let channels: [[Proj; 4]; 4] = [[&p, &q, &q, &p], [&q, &p, &p, &q], [&p, &p, &q, &q], [&q, &q, &p, &p]];
        let l2 = l * l;
        let mut out = vec![C64::new(0.0, 0.0); l2 * l2];
        for [a, b, c, d] in channels {
            for e in 0..l {
                for f in 0..l {
                    let v = self.pair_v[e * l + f] * inv_rho;
                    if v == 0.0 {
                        continue;
                    }
                    let right: Vec<C64> = (0..l2).map(|cd| c(e, cd / l) * d(f, cd % l) * v).collect();
                    for ab in 0..l2 {
                        let left = a(ab / l, e) * b(ab % l, f);
                        let row = &mut out[ab * l2..(ab + 1) * l2];
                        row.iter_mut().zip(&right).for_each(|(o, r)| *o += left * r);
                    }
                }
            }
        }
        out
    }

    /// The four pair channels of `H̃` for every pair, without the mean-field
    /// part. Small lattices use the fused pair-matrix kernel.
    fn tilde_pairs(&self, psi: &[C64], phi: &[C64]) -> Array1<C64> {
        let lay = self.layout();
        if lay.sites * lay.sites <= FUSED_PAIR_MAX && lay.slots >= 3 {
            let mat = self.tilde_pair_matrix(phi);
            let mut out = Array1::zeros(psi.len());
            for i in 0..lay.slots {
                for j in i + 1..lay.slots {
                    tensor::add_pair_matrix(psi, lay, i, j, &mat, out.as_slice_mut().unwrap());
                }
            }
            return out;
        }
        self.tilde_pairs_projected(psi, phi)
    }

    /// Projector form of [`Self::tilde_pairs`], valid for any lattice size.
    fn tilde_pairs_projected(&self, psi: &[C64], phi: &[C64]) -> Array1<C64> {
        let lay = self.layout();
        let inv_rho = 1.0 / self.model.params.rho;
        let vtab: Vec<f64> = self.pair_v.iter().map(|v| v * inv_rho).collect();
        let mut out = Array1::zeros(psi.len());
        for i in 0..lay.slots {
            for j in i + 1..lay.slots {
                let [pp, pq, qp, qq] = pair_parts(psi, lay, i, j, phi);
                let mul = |x: &Array1<C64>| tensor::multiply_pair(x.as_slice().unwrap(), lay, i, j, &vtab);
                // p_i q_j v q_i p_j + q_i p_j v p_i q_j + p_i p_j v q_i q_j + q_i q_j v p_i p_j
                let x1 = mul(&qp);
                let x2 = mul(&pq);
                let x3 = mul(&qq);
                let x4 = mul(&pp);
                let y = &x1 + &project(&(&x3 - &x1), lay, j, phi);
                let z = &x4 + &project(&(&x2 - &x4), lay, j, phi);
                out += &z;
                out += &project(&(&y - &z), lay, i, phi);
            }
        }
        out
    }

    /// `H̃ Ψ` relative to the condensate `φ`.
    pub fn apply_h_tilde(&self, psi: &[C64], phi: &[C64]) -> Result<Array1<C64>> {
        let mut out = self.apply_h_mf(psi, phi)?;
        out += &self.tilde_pairs(psi, phi);
        Ok(out)
    }

    /// `(H - H̃) Ψ` as the difference of the two matrix-free actions.
    pub fn apply_difference(&self, psi: &[C64], phi: &[C64]) -> Result<Array1<C64>> {
        let h = self.apply_h(psi)?;
        let t = self.apply_h_tilde(psi, phi)?;
        Ok(h - t)
    }

    /// `W_{j,k}` indexed `x_j * L + x_k`.
    pub fn w_table(&self, phi: &[C64]) -> Vec<f64> {
        let lat = &self.model.lattice;
        let l = lat.num_sites();
        let c = convolve_density(lat, &self.model.potential, phi);
        let mu = 0.5 * c.iter().zip(phi).map(|(a, z)| a * z.norm_sqr()).sum::<f64>();
        let p = &self.model.params;
        let pref = p.lambda * (p.n_particles as f64 - 1.0);
        (0..l * l)
            .map(|k| {
                let (x, y) = (k / l, k % l);
                pref * (self.pair_v[k] - c[x] - c[y] + 2.0 * mu)
            })
            .collect()
    }

    /// `(H - H̃) Ψ` assembled from the five `q`-heavy channels of
    /// `(N(N-1))⁻¹ Σ_{j<k} W_{j,k}`: `qqWqq + pqWqq + qpWqq + qqWpq + qqWqp`.
    pub fn apply_difference_channels(&self, psi: &[C64], phi: &[C64]) -> Result<Array1<C64>> {
        self.check(psi)?;
        check_normalized(phi)?;
        let lay = self.layout();
        let n = lay.slots as f64;
        let w: Vec<f64> = self.w_table(phi).into_iter().map(|x| x / (n * (n - 1.0))).collect();
        let mut out = Array1::zeros(psi.len());
        for i in 0..lay.slots {
            for j in i + 1..lay.slots {
                let [_, pq, qp, qq] = pair_parts(psi, lay, i, j, phi);
                let a = tensor::multiply_pair(qq.as_slice().unwrap(), lay, i, j, &w);
                let b = tensor::multiply_pair((&pq + &qp).as_slice().unwrap(), lay, i, j, &w);
                // (1 - p_i p_j) A + q_i q_j B
                let pp_a = project(&project(&a, lay, i, phi), lay, j, phi);
                let bq = &b - &project(&b, lay, i, phi);
                let qq_b = &bq - &project(&bq, lay, j, phi);
                out += &a;
                out -= &pp_a;
                out += &qq_b;
            }
        }
        Ok(out)
    }

    /// Generator action; `phi` is required for every kind but the full one.
    pub fn apply(&self, kind: GeneratorKind, psi: &[C64], phi: Option<&[C64]>) -> Result<Array1<C64>> {
        let need = || phi.ok_or(Error::MissingTrajectory(kind.name()));
        match kind {
            GeneratorKind::Full => self.apply_h(psi),
            GeneratorKind::MeanField => self.apply_h_mf(psi, need()?),
            GeneratorKind::Tilde => self.apply_h_tilde(psi, need()?),
            GeneratorKind::Difference => self.apply_difference(psi, need()?),
        }
    }

    /// `⟨Ψ, H Ψ⟩`.
    pub fn energy(&self, psi: &[C64]) -> Result<f64> {
        let h = self.apply_h(psi)?;
        Ok(dot(psi, h.as_slice().unwrap()).re)
    }
}

fn project(x: &Array1<C64>, lay: Layout, slot: usize, phi: &[C64]) -> Array1<C64> {
    tensor::project_slot(x.as_slice().unwrap(), lay, slot, phi)
}

/// `[p_i p_j Ψ, p_i q_j Ψ, q_i p_j Ψ, q_i q_j Ψ]`.
pub fn pair_parts(psi: &[C64], lay: Layout, i: usize, j: usize, phi: &[C64]) -> [Array1<C64>; 4] {
    let a = tensor::project_slot(psi, lay, i, phi);
    let b = Array1::from(psi.to_vec()) - &a;
    let pp = project(&a, lay, j, phi);
    let pq = &a - &pp;
    let qp = project(&b, lay, j, phi);
    let qq = &b - &qp;
    [pp, pq, qp, qq]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagatorOptions {
    #[serde(default)]
    pub krylov_dim: Option<usize>,
    #[serde(default)]
    pub krylov_max_dim: Option<usize>,
    #[serde(default)]
    pub krylov_tol: Option<f64>,
    /// Keep every `stride`-th frame.
    #[serde(default = "one")]
    pub stride: usize,
}

fn one() -> usize {
    1
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        Self {
            krylov_dim: None,
            krylov_max_dim: None,
            krylov_tol: None,
            stride: 1,
        }
    }
}

impl PropagatorOptions {
    pub fn krylov(&self) -> KrylovOptions {
        let d = KrylovOptions::default();
        KrylovOptions {
            dim: self.krylov_dim.unwrap_or(d.dim),
            max_dim: self.krylov_max_dim.unwrap_or(d.max_dim),
            tol: self.krylov_tol.unwrap_or(d.tol),
            fail_tol: d.fail_tol,
        }
    }
}

/// Per-frame diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameStats {
    pub time: f64,
    pub norm: f64,
    pub energy: f64,
    pub symmetry_residual: f64,
    pub krylov_dim: usize,
}

#[derive(Clone, Debug)]
pub struct ManyBodyTrajectory {
    pub frames: Vec<ManyBodyState>,
    pub stats: Vec<FrameStats>,
}

impl ManyBodyTrajectory {
    pub fn last(&self) -> &ManyBodyState {
        self.frames.last().expect("trajectory has at least one frame")
    }
}

/// Largest `L²` for which the fused pair-matrix kernel beats the projector form.
const FUSED_PAIR_MAX: usize = 100;

/// Midpoint-frozen Lanczos propagation.
#[derive(Debug)]
pub struct Propagator {
    pub ham: Hamiltonian,
    pub opts: PropagatorOptions,
}

impl Propagator {
    pub fn new(model: &Model, opts: PropagatorOptions) -> Result<Self> {
        Ok(Self {
            ham: Hamiltonian::new(model)?,
            opts,
        })
    }

    /// One step `Ψ ← exp(-i dt G/ħ) Ψ` with `G` frozen at `phi_mid`.
    pub fn step(
        &self,
        psi: &Array1<C64>,
        kind: GeneratorKind,
        phi_mid: Option<&[C64]>,
        dt: f64,
        index: usize,
    ) -> Result<(Array1<C64>, usize)> {
        let hbar = self.ham.model.params.hbar;
        self.ham.check(psi.as_slice().unwrap())?;
        if kind.needs_trajectory() {
            check_normalized(phi_mid.ok_or(Error::MissingTrajectory(kind.name()))?)?;
        }
        let apply = |x: &Array1<C64>| {
            self.ham
                .apply(kind, x.as_slice().unwrap(), phi_mid)
                .expect("arguments validated before the Krylov loop")
        };
        let (out, stats) = expmv(apply, psi, dt / hbar, &self.opts.krylov(), index)?;
        Ok((out, stats.dim))
    }

    /// Evolves to `t_final` on the model's `dt` grid. `traj` must share that
    /// grid when the generator depends on the condensate.
    pub fn evolve(
        &self,
        psi0: &ManyBodyState,
        kind: GeneratorKind,
        traj: Option<&HartreeTrajectory>,
        t_final: f64,
    ) -> Result<ManyBodyTrajectory> {
        let dt = self.ham.model.params.dt;
        let steps = self.ham.model.params.steps_to(t_final)?;
        if kind.needs_trajectory() {
            let t = traj.ok_or(Error::MissingTrajectory(kind.name()))?;
            if (t.dt - dt).abs() > 1e-12 * dt {
                return Err(Error::Config(format!(
                    "hartree trajectory dt = {} differs from propagator dt = {dt}",
                    t.dt
                )));
            }
            if t.steps() < steps {
                return Err(Error::TrajectoryTooShort { step: t.steps(), dt });
            }
        }
        let stride = self.opts.stride.max(1);
        let mut cur = psi0.clone();
        cur.time = 0.0;
        let mut frames = vec![cur.clone()];
        let mut stats = vec![self.stats(&cur, 0)?];
        for n in 0..steps {
            let phi_mid = match (kind.needs_trajectory(), traj) {
                (true, Some(t)) => Some(t.midpoint(n)?.as_slice().unwrap()),
                _ => None,
            };
            let (next, kdim) = self.step(&cur.amps, kind, phi_mid, dt, n)?;
            cur = cur.with_amps(next);
            cur.time = (n + 1) as f64 * dt;
            if (n + 1) % stride == 0 || n + 1 == steps {
                frames.push(cur.clone());
                stats.push(self.stats(&cur, kdim)?);
            }
        }
        Ok(ManyBodyTrajectory { frames, stats })
    }

    fn stats(&self, psi: &ManyBodyState, krylov_dim: usize) -> Result<FrameStats> {
        Ok(FrameStats {
            time: psi.time,
            norm: psi.norm(),
            energy: self.ham.energy(psi.as_slice())?,
            symmetry_residual: psi.symmetry_residual(),
            krylov_dim,
        })
    }
}

/// Dense one-body matrix applied to every slot of a many-body state.
pub fn apply_one_body_all(psi: &ManyBodyState, m: &Array2<C64>) -> Array1<C64> {
    tensor::apply_all_slots(psi.as_slice(), psi.layout(), m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PotentialSpec;
    use crate::onebody::{HartreeSolver, OneBodyState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(m: usize, n: usize, spec: PotentialSpec) -> Model {
        Model::on_lattice(1, m, n, 1.0, 0.02, 0.2, &spec).unwrap()
    }

    #[test]
    fn norm_difference_examples() {
        let a = [C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
        let b = [C64::new(-0.6, 0.0), C64::new(0.0, -0.8)];
        let c = [C64::new(0.0, 0.8), C64::new(0.6, 0.0)];
        let (d, o) = norm_difference_sq(&a, &a);
        assert!(d.abs() < 1e-15 && o.abs() < 1e-15);
        let (d, o) = norm_difference_sq(&a, &b);
        assert!((d - 4.0).abs() < 1e-14 && (o - 4.0).abs() < 1e-14);
        let e = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let f = [C64::new(0.0, 0.0), C64::new(0.0, 1.0)];
        let (d, o) = norm_difference_sq(&e, &f);
        assert!((d - 2.0).abs() < 1e-15 && (o - 2.0).abs() < 1e-15);
        let _ = c;
    }

    #[test]
    fn same_site_pair_energy() {
        let m = Model::on_lattice(1, 2, 2, 1.0, 0.1, 1.0, &PotentialSpec::Delta { strength: 3.0 }).unwrap();
        let h = Hamiltonian::new(&m).unwrap();
        let mut psi = Array1::zeros(4);
        psi[0] = C64::new(1.0, 0.0);
        let diag = h.interaction_diagonal();
        // rho = 1
        assert_eq!(diag[0], 3.0);
        assert_eq!(diag[1], 0.0);
        let out = h.apply_h(psi.as_slice().unwrap()).unwrap();
        assert!((out[0] - C64::new(2.0 * 2.0 + 3.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn hermitian_generators() {
        let m = model(3, 3, PotentialSpec::Gaussian { strength: 1.3, width: 0.8 });
        let h = Hamiltonian::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = ManyBodyState::random_symmetric(3, 3, &mut rng).unwrap();
        let b = ManyBodyState::random_symmetric(3, 3, &mut rng).unwrap();
        let phi = ExcitationLike::phi();
        for kind in [GeneratorKind::Full, GeneratorKind::MeanField, GeneratorKind::Tilde, GeneratorKind::Difference] {
            let ha = h.apply(kind, a.as_slice(), Some(&phi)).unwrap();
            let hb = h.apply(kind, b.as_slice(), Some(&phi)).unwrap();
            let l = dot(b.as_slice(), ha.as_slice().unwrap());
            let r = dot(a.as_slice(), hb.as_slice().unwrap()).conj();
            assert!((l - r).norm() < 1e-12, "{kind:?}");
        }
    }

    struct ExcitationLike;
    impl ExcitationLike {
        fn phi() -> Vec<C64> {
            let v = [C64::new(0.5, 0.1), C64::new(0.3, -0.4), C64::new(0.6, 0.2)];
            let n: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            v.iter().map(|z| z / n).collect()
        }
    }

    #[test]
    fn difference_two_ways_agree() {
        let m = model(3, 3, PotentialSpec::Gaussian { strength: 0.9, width: 1.1 });
        let h = Hamiltonian::new(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = ManyBodyState::random_symmetric(3, 3, &mut rng).unwrap();
        let phi = ExcitationLike::phi();
        let a = h.apply_difference(psi.as_slice(), &phi).unwrap();
        let b = h.apply_difference_channels(psi.as_slice(), &phi).unwrap();
        let err = norm((&a - &b).as_slice().unwrap());
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn difference_vanishes_on_product_state() {
        let m = model(4, 3, PotentialSpec::Gaussian { strength: 1.0, width: 1.0 });
        let h = Hamiltonian::new(&m).unwrap();
        let phi = OneBodyState::uniform(4).amps;
        let psi = ManyBodyState::product(phi.as_slice().unwrap(), 3).unwrap();
        let d = h.apply_difference_channels(psi.as_slice(), phi.as_slice().unwrap()).unwrap();
        assert!(dot(psi.as_slice(), d.as_slice().unwrap()).norm() < 1e-13);
    }

    #[test]
    fn fused_pair_kernel_matches_projector_form() {
        let m = model(3, 4, PotentialSpec::Gaussian { strength: 1.3, width: 0.8 });
        let h = Hamiltonian::new(&m).unwrap();
        let phi = OneBodyState::new((0..3).map(|x| C64::new(1.0 + x as f64, 0.3 * x as f64)).collect()).normalized();
        let psi: Vec<C64> = (0..81).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let a = h.tilde_pairs(&psi, phi.as_slice());
        let b = h.tilde_pairs_projected(&psi, phi.as_slice());
        assert!(norm((&a - &b).as_slice().unwrap()) < 1e-13 * norm(b.as_slice().unwrap()));
    }

    #[test]
    fn tilde_requires_normalized_condensate() {
        let m = model(3, 2, PotentialSpec::Delta { strength: 1.0 });
        let h = Hamiltonian::new(&m).unwrap();
        let psi = Array1::from_elem(9, C64::new(1.0 / 3.0, 0.0));
        let bad = vec![C64::new(1.0, 0.0); 3];
        assert!(matches!(h.apply_h_tilde(psi.as_slice().unwrap(), &bad), Err(Error::NotNormalized { .. })));
        assert!(matches!(
            h.apply(GeneratorKind::Tilde, psi.as_slice().unwrap(), None),
            Err(Error::MissingTrajectory(_))
        ));
    }

    #[test]
    fn free_product_stays_product() {
        let m = Model::on_lattice(1, 5, 3, 1.0, 0.05, 0.5, &PotentialSpec::Delta { strength: 0.0 }).unwrap();
        let phi0 = OneBodyState::new((0..5).map(|x| C64::new(1.0 + x as f64, 0.5)).collect()).normalized();
        let prop = Propagator::new(&m, PropagatorOptions::default()).unwrap();
        let psi0 = ManyBodyState::product(phi0.as_slice(), 3).unwrap();
        let out = prop.evolve(&psi0, GeneratorKind::Full, None, 0.5).unwrap();
        let traj = HartreeSolver::new(&m).evolve(&phi0, 0.5).unwrap();
        let expect = ManyBodyState::product(traj.frames.last().unwrap().as_slice().unwrap(), 3).unwrap();
        let (d, _) = norm_difference_sq(out.last().as_slice(), expect.as_slice());
        assert!(d.sqrt() < 1e-9, "{d}");
    }

    #[test]
    fn frame_roundtrip_and_cap() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ManyBodyState::random_symmetric(3, 2, &mut rng).unwrap();
        s.time = 0.25;
        let mut buf = Vec::new();
        s.write_frame(1, 3, &mut buf).unwrap();
        assert_eq!(buf.len(), 32 + 9 * 16);
        let back = ManyBodyState::read_frame(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert!(matches!(dimension(10, 7), Err(Error::TooLarge { .. })));
    }
}
