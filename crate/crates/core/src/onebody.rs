//! One-body wavefunctions and the Hartree flow
//! `iħ∂φ = (-ħ²Δ + g[(v∗|φ|²) - μ])φ` with `g = (N-1)/ρ`.

use std::io::{Read, Write};
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Lattice, Model, Potential};
use crate::tensor::{dot, norm};
use crate::C64;

/// Per-step tolerance on `|‖φ‖ - ‖φ₀‖|`.
pub const NORM_DRIFT_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct OneBodyState {
    pub amps: Array1<C64>,
    pub time: f64,
}

impl OneBodyState {
    pub fn new(amps: Array1<C64>) -> Self {
        Self { amps, time: 0.0 }
    }

    /// Unit-norm constant state.
    pub fn uniform(sites: usize) -> Self {
        let a = 1.0 / (sites as f64).sqrt();
        Self::new(Array1::from_elem(sites, C64::new(a, 0.0)))
    }

    /// Unit vector on one site.
    pub fn point(sites: usize, site: usize) -> Self {
        let mut amps = Array1::zeros(sites);
        amps[site] = C64::new(1.0, 0.0);
        Self::new(amps)
    }

    /// Complex Gaussian vector, normalized.
    pub fn random<R: rand::Rng>(sites: usize, rng: &mut R) -> Self {
        let amps = Array1::from_shape_fn(sites, |_| {
            C64::new(rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal))
        });
        Self::new(amps).normalized()
    }

    pub fn normalized(mut self) -> Self {
        let n = self.norm();
        self.amps.mapv_inplace(|x| x / n);
        self
    }

    pub fn norm(&self) -> f64 {
        norm(self.amps.as_slice().unwrap())
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.amps)
    }

    pub fn as_slice(&self) -> &[C64] {
        self.amps.as_slice().unwrap()
    }

    pub fn is_finite(&self) -> bool {
        self.amps.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

pub fn sup_norm(a: &Array1<C64>) -> f64 {
    a.iter().fold(0.0, |m: f64, x| m.max(x.norm()))
}

/// Rejects states whose norm differs from one by more than `1e-10`.
pub fn check_normalized(phi: &[C64]) -> Result<()> {
    let n = norm(phi);
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm: n });
    }
    Ok(())
}

/// `(v∗|φ|²)(x) = Σ_y v(x-y)|φ(y)|²`.
pub fn convolve_density(lattice: &Lattice, v: &Potential, phi: &[C64]) -> Vec<f64> {
    let dens: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    convolve(lattice, v, &dens)
}

/// Periodic convolution of `v` with a real site function.
pub fn convolve(lattice: &Lattice, v: &Potential, f: &[f64]) -> Vec<f64> {
    let l = lattice.num_sites();
    (0..l)
        .map(|x| (0..l).map(|y| v.at(lattice.displacement(x, y)) * f[y]).sum())
        .collect()
}

/// `μ = ½ Σ (v∗|φ|²)|φ|²`.
pub fn chemical_potential(lattice: &Lattice, v: &Potential, phi: &[C64]) -> f64 {
    let c = convolve_density(lattice, v, phi);
    0.5 * c.iter().zip(phi).map(|(a, z)| a * z.norm_sqr()).sum::<f64>()
}

/// Dense `-Δ` for the periodic second-difference stencil.
pub fn laplacian_matrix(lattice: &Lattice) -> Array2<C64> {
    let l = lattice.num_sites();
    let mut m = Array2::zeros((l, l));
    for x in 0..l {
        m[[x, x]] += C64::new(2.0 * lattice.dim() as f64, 0.0);
        for y in lattice.neighbors(x) {
            m[[x, y]] -= C64::new(1.0, 0.0);
        }
    }
    m
}

/// Whether the mean-field potential carries the `-μ` shift.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    #[default]
    Subtracted,
    Unsubtracted,
}

/// Split-step integrator for the Hartree equation on one model.
#[derive(Clone)]
pub struct HartreeSolver {
    lattice: Lattice,
    potential: Potential,
    hbar: f64,
    coupling: f64,
    dt: f64,
    gauge: Gauge,
    kinetic: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for HartreeSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HartreeSolver")
            .field("coupling", &self.coupling)
            .field("dt", &self.dt)
            .field("gauge", &self.gauge)
            .finish()
    }
}

impl HartreeSolver {
    pub fn new(model: &Model) -> Self {
        let m = model.lattice.sites_per_dim();
        let mut planner = FftPlanner::new();
        Self {
            lattice: model.lattice.clone(),
            potential: model.potential.clone(),
            hbar: model.params.hbar,
            coupling: model.params.mean_field_coupling(),
            dt: model.params.dt,
            gauge: Gauge::Subtracted,
            kinetic: model.lattice.laplacian_eigenvalues(),
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn with_gauge(mut self, gauge: Gauge) -> Self {
        self.gauge = gauge;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    pub fn gauge(&self) -> Gauge {
        self.gauge
    }

    fn fft(&self, data: &mut [C64], forward: bool) {
        let m = self.lattice.sites_per_dim();
        let d = self.lattice.dim();
        let plan = if forward { &self.forward } else { &self.inverse };
        let l = data.len();
        let mut line = vec![C64::new(0.0, 0.0); m];
        for axis in 0..d {
            let stride = m.pow((d - 1 - axis) as u32);
            for start in 0..l {
                if !(start / stride).is_multiple_of(m) {
                    continue;
                }
                for (k, z) in line.iter_mut().enumerate() {
                    *z = data[start + k * stride];
                }
                plan.process(&mut line);
                for (k, z) in line.iter().enumerate() {
                    data[start + k * stride] = *z;
                }
            }
        }
        if !forward {
            let s = 1.0 / l as f64;
            data.iter_mut().for_each(|z| *z *= s);
        }
    }

    /// Exact free flow `exp(-iħ(-Δ)τ)` through the discrete Fourier basis.
    pub fn kinetic_flow(&self, phi: &mut [C64], tau: f64) {
        self.fft(phi, true);
        for (z, lam) in phi.iter_mut().zip(&self.kinetic) {
            *z *= C64::new(0.0, -self.hbar * lam * tau).exp();
        }
        self.fft(phi, false);
    }

    /// Mean-field potential `g[(v∗|φ|²) - μ]` (or without `μ`).
    pub fn mean_field_potential(&self, phi: &[C64]) -> Vec<f64> {
        let c = convolve_density(&self.lattice, &self.potential, phi);
        let mu = match self.gauge {
            Gauge::Subtracted => 0.5 * c.iter().zip(phi).map(|(a, z)| a * z.norm_sqr()).sum::<f64>(),
            Gauge::Unsubtracted => 0.0,
        };
        c.into_iter().map(|x| self.coupling * (x - mu)).collect()
    }

    fn potential_flow(&self, phi: &mut [C64], tau: f64) {
        let pot = self.mean_field_potential(phi);
        for (z, u) in phi.iter_mut().zip(pot) {
            *z *= C64::new(0.0, -u * tau / self.hbar).exp();
        }
    }

    /// One Strang step of length `tau`: half kinetic, full potential, half kinetic.
    pub fn strang(&self, phi: &Array1<C64>, tau: f64) -> Array1<C64> {
        let mut out = phi.clone();
        let s = out.as_slice_mut().unwrap();
        self.kinetic_flow(s, 0.5 * tau);
        self.potential_flow(s, tau);
        self.kinetic_flow(s, 0.5 * tau);
        out
    }

    /// Advances by one `dt`, checking norm conservation.
    pub fn step(&self, phi: &OneBodyState) -> Result<OneBodyState> {
        let before = phi.norm();
        let amps = self.strang(&phi.amps, self.dt);
        let time = phi.time + self.dt;
        let after = norm(amps.as_slice().unwrap());
        let drift = (after - before).abs();
        if drift > NORM_DRIFT_TOL || !after.is_finite() {
            return Err(Error::NormDrift { time, drift });
        }
        Ok(OneBodyState { amps, time })
    }

    /// Frames at every multiple of `dt` up to `t_final`, plus the
    /// half-step states used to freeze time-dependent generators.
    pub fn evolve(&self, phi0: &OneBodyState, t_final: f64) -> Result<HartreeTrajectory> {
        let steps = steps_for(t_final, self.dt)?;
        let mut frames = Vec::with_capacity(steps + 1);
        let mut midpoints = Vec::with_capacity(steps);
        let mut cur = OneBodyState {
            amps: phi0.amps.clone(),
            time: 0.0,
        };
        let mut sup = cur.sup_norm();
        for n in 0..steps {
            midpoints.push(self.strang(&cur.amps, 0.5 * self.dt));
            frames.push(cur.amps.clone());
            let mut next = self.step(&cur)?;
            next.time = (n + 1) as f64 * self.dt;
            sup = sup.max(next.sup_norm());
            cur = next;
        }
        frames.push(cur.amps);
        Ok(HartreeTrajectory {
            dt: self.dt,
            frames,
            midpoints,
            sup_inf_norm: sup,
        })
    }

    /// Dense `h^{H,φ}`.
    pub fn hartree_operator(&self, phi: &[C64]) -> Array2<C64> {
        let mut h = laplacian_matrix(&self.lattice).mapv(|x| x * self.hbar * self.hbar);
        for (x, u) in self.mean_field_potential(phi).into_iter().enumerate() {
            h[[x, x]] += C64::new(u, 0.0);
        }
        h
    }

    /// `ħ²⟨φ, -Δφ⟩ + (g/2) Σ (v∗|φ|²)|φ|²`.
    pub fn energy(&self, phi: &[C64]) -> f64 {
        let lap = laplacian_matrix(&self.lattice);
        let kin = (0..phi.len())
            .map(|x| {
                let row: C64 = (0..phi.len()).map(|y| lap[[x, y]] * phi[y]).sum();
                (phi[x].conj() * row).re
            })
            .sum::<f64>();
        let c = convolve_density(&self.lattice, &self.potential, phi);
        let inter: f64 = c.iter().zip(phi).map(|(a, z)| a * z.norm_sqr()).sum();
        self.hbar * self.hbar * kin + 0.5 * self.coupling * inter
    }

    /// Time derivative of the linearized flow around `phi_ref` applied to `eps`.
    pub fn linearized_rhs(&self, phi_ref: &[C64], eps: &[C64]) -> Array1<C64> {
        let lat = &self.lattice;
        let v = &self.potential;
        let l = phi_ref.len();
        let c = convolve_density(lat, v, phi_ref);
        let mu = 0.5 * c.iter().zip(phi_ref).map(|(a, z)| a * z.norm_sqr()).sum::<f64>();
        let drho: Vec<f64> = phi_ref
            .iter()
            .zip(eps)
            .map(|(p, e)| 2.0 * (p.conj() * e).re)
            .collect();
        let dc = convolve(lat, v, &drho);
        let dmu = match self.gauge {
            Gauge::Subtracted => c.iter().zip(&drho).map(|(a, b)| a * b).sum::<f64>(),
            Gauge::Unsubtracted => 0.0,
        };
        let mu = match self.gauge {
            Gauge::Subtracted => mu,
            Gauge::Unsubtracted => 0.0,
        };
        let lap = laplacian_matrix(lat);
        let h2 = self.hbar * self.hbar;
        Array1::from_shape_fn(l, |x| {
            let kin: C64 = (0..l).map(|y| lap[[x, y]] * eps[y]).sum();
            let val = kin * h2
                + eps[x] * self.coupling * (c[x] - mu)
                + phi_ref[x] * self.coupling * (dc[x] - dmu);
            val * C64::new(0.0, -1.0 / self.hbar)
        })
    }
}

fn steps_for(t: f64, dt: f64) -> Result<usize> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::Config(format!("final time must be >= 0, got {t}")));
    }
    let n = (t / dt).round();
    if (n * dt - t).abs() > 1e-9 * t.max(1.0) {
        return Err(Error::Config(format!("T = {t} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Hartree frames on the `dt` grid plus the half-step states.
#[derive(Clone, Debug, PartialEq)]
pub struct HartreeTrajectory {
    pub dt: f64,
    pub frames: Vec<Array1<C64>>,
    pub midpoints: Vec<Array1<C64>>,
    /// `sup_t ‖φ_t‖∞` over the frames.
    pub sup_inf_norm: f64,
}

impl HartreeTrajectory {
    pub fn steps(&self) -> usize {
        self.midpoints.len()
    }

    pub fn t_final(&self) -> f64 {
        self.steps() as f64 * self.dt
    }

    pub fn frame(&self, n: usize) -> Result<&Array1<C64>> {
        self.frames.get(n).ok_or(Error::TrajectoryTooShort { step: n, dt: self.dt })
    }

    pub fn midpoint(&self, n: usize) -> Result<&Array1<C64>> {
        self.midpoints
            .get(n)
            .ok_or(Error::TrajectoryTooShort { step: n, dt: self.dt })
    }

    /// Every `stride`-th frame and midpoint, with the step enlarged accordingly.
    /// Midpoints of the coarse grid are the frames in between when `stride` is even.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !stride.is_multiple_of(2) || !self.steps().is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "cannot coarsen {} steps by {stride}",
                self.steps()
            )));
        }
        let frames: Vec<_> = self.frames.iter().step_by(stride).cloned().collect();
        let midpoints = (0..self.steps() / stride)
            .map(|n| self.frames[n * stride + stride / 2].clone())
            .collect();
        Ok(Self {
            dt: self.dt * stride as f64,
            frames,
            midpoints,
            sup_inf_norm: self.sup_inf_norm,
        })
    }

    /// CSV with columns `t,kind,re_0,im_0,...`; frames and midpoints alternate.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let l = self.frames.first().map_or(0, |f| f.len());
        let mut wr = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "kind".to_string()];
        for x in 0..l {
            header.push(format!("re_{x}"));
            header.push(format!("im_{x}"));
        }
        wr.write_record(&header)?;
        let row = |t: f64, kind: &str, a: &Array1<C64>| {
            let mut r = vec![t.to_string(), kind.to_string()];
            for z in a {
                r.push(z.re.to_string());
                r.push(z.im.to_string());
            }
            r
        };
        for (n, f) in self.frames.iter().enumerate() {
            wr.write_record(row(n as f64 * self.dt, "frame", f))?;
            if let Some(m) = self.midpoints.get(n) {
                wr.write_record(row((n as f64 + 0.5) * self.dt, "midpoint", m))?;
            }
        }
        wr.flush()?;
        Ok(())
    }

    /// Reads back a trajectory written by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let mut frames = Vec::new();
        let mut midpoints = Vec::new();
        let mut times = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let t: f64 = parse(&rec[0])?;
            let vals: Vec<f64> = rec.iter().skip(2).map(parse).collect::<Result<_>>()?;
            let a = Array1::from_shape_fn(vals.len() / 2, |i| C64::new(vals[2 * i], vals[2 * i + 1]));
            match &rec[1] {
                "frame" => {
                    times.push(t);
                    frames.push(a)
                }
                "midpoint" => midpoints.push(a),
                other => return Err(Error::Shape(format!("unknown row kind {other}"))),
            }
        }
        if frames.is_empty() || midpoints.len() + 1 != frames.len() {
            return Err(Error::Shape("trajectory rows are inconsistent".into()));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        let sup = frames.iter().map(sup_norm).fold(0.0, f64::max);
        Ok(Self {
            dt,
            frames,
            midpoints,
            sup_inf_norm: sup,
        })
    }
}

fn parse(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Shape(format!("not a number: {s}")))
}

/// A flat reference condensate plus a localized excitation.
#[derive(Clone, Debug, PartialEq)]
pub struct ExcitationSplit {
    /// `√(1 - 1/Λ)` times the uniform unit state.
    pub phi_ref: Array1<C64>,
    /// Orthogonal to `phi_ref`, `‖ε‖² = 1/Λ`.
    pub eps: Array1<C64>,
    pub lambda: f64,
}

impl ExcitationSplit {
    /// Gaussian bump of width `max(1, ⌊M/8⌋)` sites centred at `M/2` in every
    /// direction, orthogonalized against the flat state.
    pub fn lattice_bump(lattice: &Lattice) -> Self {
        let l = lattice.num_sites();
        let m = lattice.sites_per_dim();
        let lambda = l as f64;
        let width = (m / 8).max(1) as f64;
        let center = vec![m / 2; lattice.dim()];
        let c0 = lattice.site(&center);
        let mut eps: Array1<C64> = (0..l)
            .map(|x| {
                let r2 = lattice.min_image_dist2(lattice.displacement(x, c0));
                C64::new((-r2 / (2.0 * width * width)).exp(), 0.0)
            })
            .collect();
        let u = OneBodyState::uniform(l).amps;
        let overlap = dot(u.as_slice().unwrap(), eps.as_slice().unwrap());
        eps.zip_mut_with(&u, |e, b| *e -= overlap * b);
        let n = norm(eps.as_slice().unwrap());
        let target = (1.0 / lambda).sqrt();
        eps.mapv_inplace(|z| z * (target / n));
        let a = (1.0 - 1.0 / lambda).sqrt();
        Self {
            phi_ref: u.mapv(|z| z * a),
            eps,
            lambda,
        }
    }

    /// `φ₀ = φ^ref₀ + ε₀` (unit norm).
    pub fn phi0(&self) -> OneBodyState {
        OneBodyState::new(&self.phi_ref + &self.eps)
    }

    /// Unit-norm direction of the reference state.
    pub fn reference_direction(&self) -> Array1<C64> {
        let n = norm(self.phi_ref.as_slice().unwrap());
        self.phi_ref.mapv(|z| z / n)
    }

    /// `Λ^{1/2} ε`.
    pub fn rescaled_eps(&self) -> Array1<C64> {
        let s = self.lambda.sqrt();
        self.eps.mapv(|z| z * s)
    }
}

/// How the macroscopic excitation is propagated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonModel {
    /// Linearization of the Hartree flow around the reference trajectory.
    #[default]
    Linearized,
    /// Difference of the two nonlinear Hartree trajectories.
    HartreeDifference,
}

/// `ε_t` on the `dt` grid up to `t_final` together with the reference frames.
pub fn evolve_excitation(
    solver: &HartreeSolver,
    split: &ExcitationSplit,
    t_final: f64,
    model: EpsilonModel,
) -> Result<(Vec<Array1<C64>>, HartreeTrajectory)> {
    let reference = solver.evolve(&OneBodyState::new(split.phi_ref.clone()), t_final)?;
    let eps = match model {
        EpsilonModel::HartreeDifference => {
            let full = solver.evolve(&split.phi0(), t_final)?;
            full.frames
                .iter()
                .zip(&reference.frames)
                .map(|(a, b)| a - b)
                .collect()
        }
        EpsilonModel::Linearized => {
            let dt = solver.dt();
            let mut out = vec![split.eps.clone()];
            let mut e = split.eps.clone();
            for n in 0..reference.steps() {
                let r0 = reference.frame(n)?.as_slice().unwrap();
                let rm = reference.midpoint(n)?.as_slice().unwrap();
                let r1 = reference.frame(n + 1)?.as_slice().unwrap();
                let k1 = solver.linearized_rhs(r0, e.as_slice().unwrap());
                let y = &e + &k1.mapv(|z| z * (0.5 * dt));
                let k2 = solver.linearized_rhs(rm, y.as_slice().unwrap());
                let y = &e + &k2.mapv(|z| z * (0.5 * dt));
                let k3 = solver.linearized_rhs(rm, y.as_slice().unwrap());
                let y = &e + &k3.mapv(|z| z * dt);
                let k4 = solver.linearized_rhs(r1, y.as_slice().unwrap());
                e = &e + &((&k1 + &(&k2 * 2.0) + &(&k3 * 2.0) + &k4) * (dt / 6.0));
                out.push(e.clone());
            }
            out
        }
    };
    Ok((eps, reference))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, PotentialSpec};

    fn model(m: usize, n: usize, v: Vec<f64>, dt: f64) -> Model {
        let lat = Lattice::new(1, m).unwrap();
        let params = ModelParams::on_lattice(&lat, n, 1.0, dt, 1.0).unwrap();
        let pot = Potential::from_values(&lat, v).unwrap();
        Model::new(lat, params, pot).unwrap()
    }

    #[test]
    fn convolution_examples() {
        let m = model(4, 4, vec![1.0, 2.0, 0.0, 2.0], 0.01);
        let u = OneBodyState::uniform(4);
        let c = convolve_density(&m.lattice, &m.potential, u.as_slice());
        for x in c {
            assert!((x - 1.25).abs() < 1e-15);
        }
        let mu = chemical_potential(&m.lattice, &m.potential, u.as_slice());
        assert!((mu - 0.625).abs() < 1e-15);

        let d = model(4, 4, vec![1.0, 0.0, 0.0, 0.0], 0.01);
        let p = OneBodyState::point(4, 2);
        assert!((chemical_potential(&d.lattice, &d.potential, p.as_slice()) - 0.5).abs() < 1e-15);
        let phi: Vec<C64> = (0..4).map(|i| C64::new(i as f64, 1.0)).collect();
        let c = convolve_density(&d.lattice, &d.potential, &phi);
        for (a, z) in c.iter().zip(&phi) {
            assert_eq!(*a, z.norm_sqr());
        }
    }

    #[test]
    fn free_plane_wave_is_exact() {
        let m = model(8, 2, vec![0.0; 8], 0.1);
        let s = HartreeSolver::new(&m);
        let k = 3.0;
        let phi: Array1<C64> = (0..8)
            .map(|x| C64::new(0.0, 2.0 * std::f64::consts::PI * k * x as f64 / 8.0).exp() / 8f64.sqrt())
            .collect();
        let lam = 4.0 * (std::f64::consts::PI * k / 8.0).sin().powi(2);
        let out = s.strang(&phi, 0.1);
        let ph = C64::new(0.0, -lam * 0.1).exp();
        for (a, b) in out.iter().zip(phi.iter()) {
            assert!((a - b * ph).norm() < 1e-14);
        }
    }

    #[test]
    fn uniform_state_only_rotates() {
        let v = vec![1.0, 2.0, 0.0, 2.0];
        let m = model(4, 3, v, 0.01);
        let s = HartreeSolver::new(&m);
        let traj = s.evolve(&OneBodyState::uniform(4), 0.5).unwrap();
        // (v∗|φ|²) - μ = S/(2M) with S = 5
        let omega = m.params.mean_field_coupling() * 5.0 / 8.0;
        let last = traj.frames.last().unwrap();
        let expect = C64::new(0.0, -omega * 0.5).exp() * 0.5;
        for z in last {
            assert!((z - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn multi_dimensional_fft_matches_dense() {
        let lat = Lattice::new(2, 3).unwrap();
        let params = ModelParams::on_lattice(&lat, 2, 1.0, 0.05, 1.0).unwrap();
        let m = Model::new(lat.clone(), params, Potential::zero(&lat)).unwrap();
        let s = HartreeSolver::new(&m);
        let phi: Array1<C64> = (0..9).map(|i| C64::new((i as f64).cos(), 0.1 * i as f64)).collect();
        let mut a = phi.clone();
        s.kinetic_flow(a.as_slice_mut().unwrap(), 0.3);
        let u = crate::linalg::expm_hermitian(&laplacian_matrix(&lat), 0.3);
        let b = crate::linalg::matvec(&u, phi.as_slice().unwrap());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn gauge_changes_only_a_global_phase() {
        let m = Model::on_lattice(1, 6, 4, 1.0, 0.01, 1.0, &PotentialSpec::Gaussian { strength: 1.5, width: 1.0 })
            .unwrap();
        let split = ExcitationSplit::lattice_bump(&m.lattice);
        let a = HartreeSolver::new(&m).evolve(&split.phi0(), 1.0).unwrap();
        let b = HartreeSolver::new(&m)
            .with_gauge(Gauge::Unsubtracted)
            .evolve(&split.phi0(), 1.0)
            .unwrap();
        for (x, y) in a.frames.last().unwrap().iter().zip(b.frames.last().unwrap()) {
            assert!((x.norm() - y.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn excitation_split_normalization() {
        let lat = Lattice::new(1, 16).unwrap();
        let s = ExcitationSplit::lattice_bump(&lat);
        let e2: f64 = s.eps.iter().map(|z| z.norm_sqr()).sum();
        assert!((e2 - 1.0 / 16.0).abs() < 1e-15);
        assert!(dot(s.phi_ref.as_slice().unwrap(), s.eps.as_slice().unwrap()).norm() < 1e-15);
        assert!((s.phi0().norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let m = Model::on_lattice(1, 4, 3, 1.0, 0.05, 0.2, &PotentialSpec::Delta { strength: 1.0 }).unwrap();
        let split = ExcitationSplit::lattice_bump(&m.lattice);
        let traj = HartreeSolver::new(&m).evolve(&split.phi0(), 0.2).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = HartreeTrajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.frames, traj.frames);
        assert_eq!(back.midpoints, traj.midpoints);
    }

    #[test]
    fn t_mismatch_rejected() {
        let m = model(4, 2, vec![0.0; 4], 0.3);
        assert!(HartreeSolver::new(&m).evolve(&OneBodyState::uniform(4), 1.0).is_err());
        let t = HartreeSolver::new(&m).evolve(&OneBodyState::uniform(4), 0.0).unwrap();
        assert_eq!(t.frames.len(), 1);
    }
}
