//! Lattice geometry, physical parameters and the pair potential.
//!
//! Space is a periodic hypercubic lattice with unit spacing, so sums over
//! sites play the role of integrals and the site count is the dimensionless
//! volume `Λ`. Sites are stored row-major: site `s = Σ c_i M^(d-1-i)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest many-body tensor (sites^particles) the exact propagators accept.
pub const STATE_SPACE_CAP: usize = 4_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dim: usize,
    sites_per_dim: usize,
    num_sites: usize,
    /// `disp[a * L + b]` is the site index of the displacement `a - b`.
    disp: Vec<usize>,
}

impl Lattice {
    pub fn new(dim: usize, sites_per_dim: usize) -> Result<Self> {
        if dim == 0 || sites_per_dim == 0 {
            return Err(Error::Config("lattice needs d >= 1 and M >= 1".into()));
        }
        let num_sites = sites_per_dim
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Config("lattice too large".into()))?;
        if num_sites < 2 {
            return Err(Error::Config(format!(
                "lattice must have at least 2 sites, got M^d = {num_sites}"
            )));
        }
        let mut lat = Self {
            dim,
            sites_per_dim,
            num_sites,
            disp: Vec::new(),
        };
        let mut disp = vec![0; num_sites * num_sites];
        for a in 0..num_sites {
            let ca = lat.coords(a);
            for b in 0..num_sites {
                let cb = lat.coords(b);
                let diff: Vec<usize> = ca
                    .iter()
                    .zip(&cb)
                    .map(|(&x, &y)| (x + sites_per_dim - y) % sites_per_dim)
                    .collect();
                disp[a * num_sites + b] = lat.site(&diff);
            }
        }
        lat.disp = disp;
        Ok(lat)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sites_per_dim(&self) -> usize {
        self.sites_per_dim
    }

    /// Total site count `M^d`.
    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        let m = self.sites_per_dim;
        let mut c = vec![0; self.dim];
        let mut s = site;
        for i in (0..self.dim).rev() {
            c[i] = s % m;
            s /= m;
        }
        c
    }

    pub fn site(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .fold(0, |acc, &c| acc * self.sites_per_dim + c % self.sites_per_dim)
    }

    /// Site index of the periodic displacement `a - b`.
    #[inline]
    pub fn displacement(&self, a: usize, b: usize) -> usize {
        self.disp[a * self.num_sites + b]
    }

    /// Site index of `-x`.
    pub fn reflect(&self, x: usize) -> usize {
        self.displacement(0, x)
    }

    /// The `2d` nearest neighbours of a site, in the order `+e_0, -e_0, +e_1, ...`.
    pub fn neighbors(&self, site: usize) -> Vec<usize> {
        let m = self.sites_per_dim;
        let c = self.coords(site);
        let mut out = Vec::with_capacity(2 * self.dim);
        for i in 0..self.dim {
            let mut up = c.clone();
            up[i] = (c[i] + 1) % m;
            let mut down = c.clone();
            down[i] = (c[i] + m - 1) % m;
            out.push(self.site(&up));
            out.push(self.site(&down));
        }
        out
    }

    /// Squared minimal-image length of the displacement stored at `site`.
    pub fn min_image_dist2(&self, site: usize) -> f64 {
        let m = self.sites_per_dim;
        self.coords(site)
            .into_iter()
            .map(|c| {
                let r = c.min(m - c) as f64;
                r * r
            })
            .sum()
    }

    /// Eigenvalues of `-Δ` (second-difference stencil), indexed like the
    /// sites of the discrete Fourier grid: `Σ_i 4 sin²(π k_i / M)`.
    pub fn laplacian_eigenvalues(&self) -> Vec<f64> {
        let m = self.sites_per_dim as f64;
        (0..self.num_sites)
            .map(|s| {
                self.coords(s)
                    .into_iter()
                    .map(|k| {
                        let x = (std::f64::consts::PI * k as f64 / m).sin();
                        4.0 * x * x
                    })
                    .sum()
            })
            .collect()
    }
}

/// Particle number, volume/density bookkeeping and integration controls.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub n_particles: usize,
    pub lambda: f64,
    pub rho: f64,
    pub hbar: f64,
    pub dt: f64,
    pub t_final: f64,
}

impl ModelParams {
    /// Builds parameters with `Λ` set to the lattice site count and `ρ = N/Λ`.
    pub fn on_lattice(
        lattice: &Lattice,
        n_particles: usize,
        hbar: f64,
        dt: f64,
        t_final: f64,
    ) -> Result<Self> {
        let lambda = lattice.num_sites() as f64;
        let p = Self::new(n_particles, lambda, n_particles as f64 / lambda, hbar, dt, t_final)?;
        Ok(p)
    }

    pub fn new(
        n_particles: usize,
        lambda: f64,
        rho: f64,
        hbar: f64,
        dt: f64,
        t_final: f64,
    ) -> Result<Self> {
        if n_particles < 2 {
            return Err(Error::Config(format!("need N >= 2, got {n_particles}")));
        }
        for (name, x) in [("Lambda", lambda), ("rho", rho), ("hbar", hbar), ("dt", dt)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {x}")));
            }
        }
        if !(t_final.is_finite() && t_final >= 0.0) {
            return Err(Error::Config(format!("T must be >= 0, got {t_final}")));
        }
        let n = n_particles as f64;
        if (lambda - n / rho).abs() > 1e-12 * lambda.max(1.0) {
            return Err(Error::Config(format!(
                "Lambda = {lambda} is not N/rho = {}",
                n / rho
            )));
        }
        Ok(Self {
            n_particles,
            lambda,
            rho,
            hbar,
            dt,
            t_final,
        })
    }

    /// Mean-field coupling `(N-1)/ρ` in front of the Hartree nonlinearity.
    pub fn mean_field_coupling(&self) -> f64 {
        (self.n_particles as f64 - 1.0) / self.rho
    }

    /// Number of `dt` steps needed to reach `t`.
    pub fn steps_to(&self, t: f64) -> Result<usize> {
        let n = (t / self.dt).round();
        if (n * self.dt - t).abs() > 1e-9 * t.max(1.0) {
            return Err(Error::Config(format!(
                "time {t} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(n as usize)
    }

    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    pub fn with_t_final(&self, t_final: f64) -> Self {
        Self {
            t_final,
            ..self.clone()
        }
    }
}

/// Pair potential sampled at every periodic displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    values: Vec<f64>,
    repulsive: bool,
}

impl Potential {
    pub fn from_values(lattice: &Lattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.num_sites() {
            return Err(Error::Potential(format!(
                "expected {} values, got {}",
                lattice.num_sites(),
                values.len()
            )));
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::Potential(format!("non-finite value {x}")));
        }
        for s in 0..values.len() {
            let r = lattice.reflect(s);
            if values[s] != values[r] {
                return Err(Error::Potential(format!(
                    "not even: v[{s}] = {} but v[-{s}] = {}",
                    values[s], values[r]
                )));
            }
        }
        let repulsive = values.iter().all(|&x| x >= 0.0);
        Ok(Self { values, repulsive })
    }

    pub fn zero(lattice: &Lattice) -> Self {
        Self {
            values: vec![0.0; lattice.num_sites()],
            repulsive: true,
        }
    }

    pub fn from_spec(lattice: &Lattice, spec: &PotentialSpec) -> Result<Self> {
        let l = lattice.num_sites();
        let values = match *spec {
            PotentialSpec::Gaussian { strength, width } => {
                if !(width > 0.0) {
                    return Err(Error::Potential("gaussian width must be positive".into()));
                }
                (0..l)
                    .map(|s| strength * (-lattice.min_image_dist2(s) / (2.0 * width * width)).exp())
                    .collect()
            }
            PotentialSpec::Box { strength, radius } => (0..l)
                .map(|s| {
                    if lattice.min_image_dist2(s).sqrt() <= radius + 1e-12 {
                        strength
                    } else {
                        0.0
                    }
                })
                .collect(),
            PotentialSpec::Delta { strength } => {
                let mut v = vec![0.0; l];
                v[0] = strength;
                v
            }
            PotentialSpec::Table { ref values } => values.clone(),
        };
        Self::from_values(lattice, values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `v` at the displacement with site index `s`.
    #[inline]
    pub fn at(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn is_repulsive(&self) -> bool {
        self.repulsive
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&x| x == 0.0)
    }

    pub fn norms(&self) -> PotentialNorms {
        potential_norms(self)
    }
}

/// Serializable description of a potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PotentialSpec {
    Gaussian { strength: f64, width: f64 },
    Box { strength: f64, radius: f64 },
    Delta { strength: f64 },
    Table { values: Vec<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PotentialNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl PotentialNorms {
    pub fn sum(&self) -> f64 {
        self.l1 + self.l2 + self.linf
    }
}

/// `‖v‖₁`, `‖v‖₂`, `‖v‖∞` over all displacements (unit spacing).
pub fn potential_norms(v: &Potential) -> PotentialNorms {
    let vals = v.values();
    PotentialNorms {
        l1: vals.iter().map(|x| x.abs()).sum(),
        l2: vals.iter().map(|x| x * x).sum::<f64>().sqrt(),
        linf: vals.iter().fold(0.0, |m: f64, x| m.max(x.abs())),
    }
}

/// Which closed form of the Gronwall rate constant to evaluate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RateConstantForm {
    /// `4 ħ⁻¹ (1 + √Λ sup‖φ_t‖∞)² (‖v‖₁ + ‖v‖₂ + ‖v‖∞)`.
    #[default]
    Corollary,
    /// `9 ħ⁻¹ (1 + M)² (‖v‖₁ + ‖v‖₂ + ‖v‖∞)` with `M = √Λ sup‖φ_t‖∞`.
    Remark,
}

/// The rate constant `D` driving the Gronwall envelopes. `phi_sup` is the
/// supremum of `‖φ_t‖∞` over the simulated trajectory.
pub fn constant_d(
    params: &ModelParams,
    norms: &PotentialNorms,
    phi_sup: f64,
    form: RateConstantForm,
) -> Result<f64> {
    if !phi_sup.is_finite() || phi_sup < 0.0 {
        return Err(Error::Config(format!("phi_sup must be finite and >= 0, got {phi_sup}")));
    }
    let m = params.lambda.sqrt() * phi_sup;
    let prefactor = match form {
        RateConstantForm::Corollary => 4.0,
        RateConstantForm::Remark => 9.0,
    };
    Ok(prefactor * (1.0 + m).powi(2) * norms.sum() / params.hbar)
}

fn default_dim() -> usize {
    1
}

fn default_hbar() -> f64 {
    1.0
}

/// JSON configuration of a single model instance. `Λ` and `ρ` are derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_dim")]
    pub d: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t: f64,
    pub potential: PotentialSpec,
    #[serde(default)]
    pub seed: u64,
}

impl ModelConfig {
    pub fn build(&self) -> Result<Model> {
        let lattice = Lattice::new(self.d, self.m)?;
        let potential = Potential::from_spec(&lattice, &self.potential)?;
        // provisional dt so that `default_dt` can see N and rho
        let params = ModelParams::on_lattice(&lattice, self.n, self.hbar, 1.0, self.t)?;
        let dt = match self.dt {
            Some(dt) => dt,
            None => default_dt(&lattice, &params, &potential),
        };
        let params = params.with_dt(dt);
        ModelParams::new(
            params.n_particles,
            params.lambda,
            params.rho,
            params.hbar,
            params.dt,
            params.t_final,
        )?;
        Ok(Model {
            lattice,
            params,
            potential,
        })
    }
}

/// `0.05 ħ / (4dħ² + (N-1)ρ⁻¹‖v‖∞)`.
pub fn default_dt(lattice: &Lattice, params: &ModelParams, v: &Potential) -> f64 {
    let h0 = 4.0 * lattice.dim() as f64 * params.hbar * params.hbar;
    let scale = h0 + params.mean_field_coupling() * v.norms().linf;
    0.05 * params.hbar / scale
}

/// Lattice, parameters and potential travelling together.
#[derive(Clone, Debug)]
pub struct Model {
    pub lattice: Lattice,
    pub params: ModelParams,
    pub potential: Potential,
}

impl Model {
    pub fn new(lattice: Lattice, params: ModelParams, potential: Potential) -> Result<Self> {
        if potential.values().len() != lattice.num_sites() {
            return Err(Error::Shape("potential does not match lattice".into()));
        }
        if (params.lambda - lattice.num_sites() as f64).abs() > 1e-12 * params.lambda {
            return Err(Error::Config(format!(
                "Lambda = {} must equal the site count {}",
                params.lambda,
                lattice.num_sites()
            )));
        }
        Ok(Self {
            lattice,
            params,
            potential,
        })
    }

    /// Convenience constructor: d-dimensional lattice with `m` sites per side.
    pub fn on_lattice(
        d: usize,
        m: usize,
        n: usize,
        hbar: f64,
        dt: f64,
        t_final: f64,
        spec: &PotentialSpec,
    ) -> Result<Self> {
        let lattice = Lattice::new(d, m)?;
        let params = ModelParams::on_lattice(&lattice, n, hbar, dt, t_final)?;
        let potential = Potential::from_spec(&lattice, spec)?;
        Self::new(lattice, params, potential)
    }

    pub fn sites(&self) -> usize {
        self.lattice.num_sites()
    }

    pub fn n(&self) -> usize {
        self.params.n_particles
    }

    pub fn with_params(&self, params: ModelParams) -> Self {
        Self {
            params,
            ..self.clone()
        }
    }

    pub fn with_potential(&self, potential: Potential) -> Self {
        Self {
            potential,
            ..self.clone()
        }
    }
}
