//! Exact, pair-correlated and Bogoliubov dynamics of a Bose gas on a
//! periodic lattice.
//!
//! The crate propagates the full `N`-body state, the pair-projected
//! dynamics, the excitation-sector hierarchies and the closed `(γ, α)`
//! system side by side, and provides the projector algebra and counting
//! functionals used to compare them.
//!
//! ```
//! use bogolab_core::{Model, PotentialSpec, OneBodyState, HartreeSolver};
//!
//! let model = Model::on_lattice(1, 4, 3, 1.0, 0.01, 0.1,
//!     &PotentialSpec::Gaussian { strength: 1.0, width: 1.0 }).unwrap();
//! let phi0 = OneBodyState::uniform(model.sites());
//! let solver = HartreeSolver::new(&model);
//! let traj = solver.evolve(&phi0, 0.1).unwrap();
//! assert_eq!(traj.frames.len(), 11);
//! ```

pub mod bogoliubov;
pub mod error;
pub mod harness;
pub mod identities;
pub mod krylov;
pub mod linalg;
pub mod manybody;
pub mod model;
pub mod observables;
pub mod onebody;
pub mod projectors;
pub mod sectors;
pub mod tensor;
pub mod weights;

pub use num_complex::Complex64 as C64;

pub use bogoliubov::{
    densities_from_sectors, evolve_gamma_alpha, KernelBounds, Kernels, PairDensities,
};
pub use error::{Error, Result};
pub use harness::{ExperimentKind, ExperimentPlan, Outcome, ScalingFit};
pub use manybody::{GeneratorKind, ManyBodyState, Propagator, PropagatorOptions};
pub use model::{
    constant_d, potential_norms, Lattice, Model, ModelConfig, ModelParams, Potential,
    PotentialNorms, PotentialSpec, RateConstantForm,
};
pub use onebody::{
    EpsilonModel, ExcitationSplit, Gauge, HartreeSolver, HartreeTrajectory, OneBodyState,
};
pub use observables::{
    macro_density, micro_density, reduce_one_body, trace_norm_diff, OneBodyDensity,
};
pub use projectors::{alpha_n, QCountSpectrum, WeightVector};
pub use sectors::{
    evolve_hierarchy, HierarchyKind, HierarchyOptions, PairSumReading, SectorFamily,
};
pub use weights::{Envelope, PaperWeights};

