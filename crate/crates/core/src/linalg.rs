//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};

use crate::C64;

pub fn to_na(m: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = m.dim();
    DMatrix::from_fn(r, c, |i, j| m[[i, j]])
}

pub fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// One classical Runge-Kutta step of `y' = f(y)`.
pub fn rk4_step<F>(y: &Array1<C64>, dt: f64, f: F) -> Array1<C64>
where
    F: Fn(&Array1<C64>) -> Array1<C64>,
{
    let h = C64::new(dt, 0.0);
    let k1 = f(y);
    let k2 = f(&(y + &(&k1 * (h * 0.5))));
    let k3 = f(&(y + &(&k2 * (h * 0.5))));
    let k4 = f(&(y + &(&k3 * h)));
    y + &((k1 + (k2 + k3) * 2.0 + k4) * (h / 6.0))
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(m: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let h = to_na(m);
    let h = (&h + h.adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = m.nrows();
    let vecs = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// `exp(-i s H)` for Hermitian `H`.
pub fn expm_hermitian(h: &Array2<C64>, s: f64) -> Array2<C64> {
    let (vals, vecs) = hermitian_eigen(h);
    let n = h.nrows();
    let mut out = Array2::zeros((n, n));
    for k in 0..n {
        let ph = C64::new(0.0, -s * vals[k]).exp();
        for i in 0..n {
            let a = vecs[[i, k]] * ph;
            for j in 0..n {
                out[[i, j]] += a * vecs[[j, k]].conj();
            }
        }
    }
    out
}

/// `Σ |λ|` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &Array2<C64>) -> f64 {
    hermitian_eigen(m).0.iter().map(|x| x.abs()).sum()
}

/// Largest singular value.
pub fn operator_norm(m: &Array2<C64>) -> f64 {
    let a = to_na(m);
    a.singular_values().iter().fold(0.0, |x: f64, &y| x.max(y))
}

pub fn frobenius(m: &Array2<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn adjoint(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|x| x.conj())
}

pub fn matvec(m: &Array2<C64>, v: &[C64]) -> Array1<C64> {
    let (r, c) = m.dim();
    Array1::from_shape_fn(r, |i| (0..c).map(|j| m[[i, j]] * v[j]).sum())
}

pub fn dvec(v: &[C64]) -> DVector<C64> {
    DVector::from_column_slice(v)
}

/// `|a⟩⟨b|`
pub fn outer(a: &[C64], b: &[C64]) -> Array2<C64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_pauli_x() {
        let one = C64::new(1.0, 0.0);
        let zero = C64::new(0.0, 0.0);
        let x = Array2::from_shape_vec((2, 2), vec![zero, one, one, zero]).unwrap();
        let u = expm_hermitian(&x, 0.3);
        assert!((u[[0, 0]] - C64::new(0.3f64.cos(), 0.0)).norm() < 1e-14);
        assert!((u[[0, 1]] - C64::new(0.0, -(0.3f64.sin()))).norm() < 1e-14);
    }

    #[test]
    fn trace_norm_of_orthogonal_projectors() {
        let e0 = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
        let e1 = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let d = outer(&e0, &e0) - outer(&e1, &e1);
        assert!((trace_norm_hermitian(&d) - 2.0).abs() < 1e-14);
    }
}
