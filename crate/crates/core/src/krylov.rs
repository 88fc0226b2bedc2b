//! Lanczos approximation of `exp(-i τ H) v` for Hermitian `H`.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array1;

use crate::error::{Error, Result};
use crate::tensor::{axpy, dot, norm, scale};
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Nominal subspace dimension.
    pub dim: usize,
    /// Hard cap on the subspace dimension.
    pub max_dim: usize,
    /// Residual estimate at which the expansion stops early.
    pub tol: f64,
    /// Residual estimate accepted at `max_dim` before giving up.
    pub fail_tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            dim: 30,
            max_dim: 60,
            tol: 1e-12,
            fail_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovStats {
    pub dim: usize,
    pub residual: f64,
}

/// `exp(-i τ T) e_1` for the real tridiagonal `T` built so far.
fn small_exp(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<C64> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let q = eig.eigenvectors[(i, k)] * eig.eigenvectors[(0, k)];
                    C64::new(0.0, -tau * eig.eigenvalues[k]).exp() * q
                })
                .sum()
        })
        .collect()
}

/// Computes `exp(-i τ H) v` with full reorthogonalization. `step` is only
/// used to label a convergence failure.
pub fn expmv<F>(
    apply: F,
    v: &Array1<C64>,
    tau: f64,
    opts: &KrylovOptions,
    step: usize,
) -> Result<(Array1<C64>, KrylovStats)>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let nv = norm(v.as_slice().unwrap());
    if nv == 0.0 || tau == 0.0 {
        return Ok((v.clone(), KrylovStats { dim: 0, residual: 0.0 }));
    }
    let mut basis: Vec<Array1<C64>> = Vec::with_capacity(opts.dim);
    let mut q = v.clone();
    scale(C64::new(1.0 / nv, 0.0), q.as_slice_mut().unwrap());
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let limit = opts.max_dim.min(v.len()).max(1);
    let mut coeffs;
    let mut residual;
    loop {
        let mut w = apply(&q);
        let a = dot(q.as_slice().unwrap(), w.as_slice().unwrap()).re;
        basis.push(q);
        alpha.push(a);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b.as_slice().unwrap(), w.as_slice().unwrap());
                axpy(-c, b.as_slice().unwrap(), w.as_slice_mut().unwrap());
            }
        }
        let b_next = norm(w.as_slice().unwrap());
        coeffs = small_exp(&alpha, &beta, tau);
        let m = alpha.len();
        residual = b_next * coeffs[m - 1].norm();
        let breakdown = b_next <= 1e-14 * (1.0 + a.abs());
        if breakdown || residual <= opts.tol {
            break;
        }
        if m >= limit {
            if residual <= opts.fail_tol || m >= v.len() {
                break;
            }
            return Err(Error::KrylovNonConvergence { step, residual });
        }
        scale(C64::new(1.0 / b_next, 0.0), w.as_slice_mut().unwrap());
        beta.push(b_next);
        q = w;
    }
    let mut out = Array1::zeros(v.len());
    for (b, c) in basis.iter().zip(&coeffs) {
        axpy(c * nv, b.as_slice().unwrap(), out.as_slice_mut().unwrap());
    }
    Ok((
        out,
        KrylovStats {
            dim: basis.len(),
            residual,
        },
    ))
}
