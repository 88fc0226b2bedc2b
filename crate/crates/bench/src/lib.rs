//! Shared fixtures for the criterion benchmarks.

use bogolab_core::{Model, PotentialSpec};

/// Gaussian-interaction model on a ring of `m` sites with `n` particles.
pub fn ring_model(m: usize, n: usize, dt: f64) -> Model {
    Model::on_lattice(
        1,
        m,
        n,
        1.0,
        dt,
        dt,
        &PotentialSpec::Gaussian {
            strength: 1.0,
            width: 1.0,
        },
    )
    .expect("benchmark model is valid")
}
