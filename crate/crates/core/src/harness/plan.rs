use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manybody::dimension;
use crate::model::{Model, ModelConfig, PotentialSpec, RateConstantForm};
use crate::onebody::{EpsilonModel, ExcitationSplit, OneBodyState};

/// A scalar or a list of values in a grid axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    IdentityFuzz,
    HartreeOnly,
    MainTheoremSweep,
    BogoliubovSweep,
    MicroMacroSweep,
    EnvelopeReport,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::IdentityFuzz => "identity-fuzz",
            ExperimentKind::HartreeOnly => "hartree-only",
            ExperimentKind::MainTheoremSweep => "main-theorem-sweep",
            ExperimentKind::BogoliubovSweep => "bogoliubov-sweep",
            ExperimentKind::MicroMacroSweep => "micro-macro-sweep",
            ExperimentKind::EnvelopeReport => "envelope-report",
        }
    }
}

fn default_dim() -> OneOrMany<usize> {
    OneOrMany::One(1)
}

fn default_hbar() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

fn default_seed() -> OneOrMany<u64> {
    OneOrMany::One(0)
}

fn default_dt() -> OneOrMany<Option<f64>> {
    OneOrMany::One(None)
}

/// Parameter axes; the grid is their Cartesian product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    #[serde(default = "default_dim")]
    pub d: OneOrMany<usize>,
    #[serde(rename = "M")]
    pub m: OneOrMany<usize>,
    #[serde(rename = "N")]
    pub n: OneOrMany<usize>,
    #[serde(default = "default_hbar")]
    pub hbar: OneOrMany<f64>,
    #[serde(default = "default_dt")]
    pub dt: OneOrMany<Option<f64>>,
    #[serde(rename = "T")]
    pub t: OneOrMany<f64>,
    pub potential: OneOrMany<PotentialSpec>,
    #[serde(default = "default_seed")]
    pub seed: OneOrMany<u64>,
}

/// Condensate the product initial state is built from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialCondensate {
    Uniform,
    /// Flat reference plus a localized excitation of weight `1/Λ`.
    #[default]
    Bump,
}

impl InitialCondensate {
    pub fn build(self, model: &Model) -> OneBodyState {
        match self {
            InitialCondensate::Uniform => OneBodyState::uniform(model.sites()),
            InitialCondensate::Bump => ExcitationSplit::lattice_bump(&model.lattice).phi0(),
        }
    }
}

fn default_samples() -> usize {
    50
}

fn default_k_max() -> usize {
    8
}

fn default_stride() -> usize {
    10
}

fn default_j_max() -> u32 {
    3
}

/// Per-experiment knobs; each experiment reads only the ones it uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentOptions {
    /// Random samples per grid point for the identity fuzz.
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Identity names; all when absent.
    #[serde(default)]
    pub identities: Option<Vec<String>>,
    /// Truncation of the Bogoliubov hierarchy.
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Steps between reported frames.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub initial: InitialCondensate,
    #[serde(default)]
    pub epsilon: EpsilonModel,
    #[serde(default = "default_j_max")]
    pub j_max: u32,
    #[serde(default)]
    pub rate_form: RateConstantForm,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all options have defaults")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub experiment: ExperimentKind,
    pub grid: Grid,
    #[serde(default)]
    pub options: ExperimentOptions,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

/// One point of the grid, addressable as a single-model configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPoint {
    pub index: usize,
    pub config: ModelConfig,
}

impl GridPoint {
    pub fn model(&self) -> Result<Model> {
        self.config.build()
    }
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    /// Replaces every seed axis value by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.grid.seed = OneOrMany::One(seed);
        self
    }

    /// Cartesian product in axis order `d, M, N, ħ, dt, T, potential, seed`.
    pub fn points(&self) -> Vec<GridPoint> {
        let g = &self.grid;
        let mut out = Vec::new();
        for d in g.d.values() {
            for m in g.m.values() {
                for n in g.n.values() {
                    for hbar in g.hbar.values() {
                        for dt in g.dt.values() {
                            for t in g.t.values() {
                                for potential in g.potential.values() {
                                    for seed in g.seed.values() {
                                        out.push(GridPoint {
                                            index: out.len(),
                                            config: ModelConfig {
                                                d,
                                                m,
                                                n,
                                                hbar,
                                                dt,
                                                t,
                                                potential: potential.clone(),
                                                seed,
                                            },
                                        });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Every point must build a valid model whose state space fits the cap.
    /// Identity fuzzing and Hartree-only runs never touch `N`-body states
    /// beyond their own checks.
    pub fn validate(&self) -> Result<()> {
        let points = self.points();
        if points.is_empty() {
            return Err(Error::Config("the parameter grid is empty".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if self.options.j_max == 0 {
            return Err(Error::Config("j_max must be >= 1".into()));
        }
        for p in &points {
            let model = p.model().map_err(|e| Error::Config(format!("grid point {}: {e}", p.index)))?;
            if self.experiment != ExperimentKind::HartreeOnly {
                dimension(model.sites(), model.n())
                    .map_err(|e| Error::Config(format!("grid point {}: {e}", p.index)))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = r#"{
        "experiment": "main-theorem-sweep",
        "grid": {"M": 4, "N": [4, 6, 8], "dt": 0.01, "T": 0.5,
                 "potential": {"kind": "gaussian", "strength": 1.0, "width": 1.0}},
        "options": {"stride": 5}
    }"#;

    #[test]
    fn grid_expands_in_order() {
        let plan = ExperimentPlan::from_json(PLAN).unwrap();
        let pts = plan.points();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts.iter().map(|p| p.config.n).collect::<Vec<_>>(), vec![4, 6, 8]);
        assert_eq!(pts[2].index, 2);
        assert_eq!(plan.options.k_max, 8);
        assert_eq!(plan.options.stride, 5);
    }

    #[test]
    fn rejects_bad_plans() {
        let bad = PLAN.replace("\"N\": [4, 6, 8]", "\"N\": [1]");
        assert!(matches!(ExperimentPlan::from_json(&bad), Err(Error::Config(_))));
        let big = PLAN.replace("\"N\": [4, 6, 8]", "\"N\": 12");
        assert!(matches!(ExperimentPlan::from_json(&big), Err(Error::Config(_))));
        let unknown = PLAN.replace("\"stride\"", "\"strid\"");
        assert!(ExperimentPlan::from_json(&unknown).is_err());
    }
}
