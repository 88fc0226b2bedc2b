//! Dense reference operators assembled entry by entry on the full tensor
//! space, independent of the matrix-free kernels in the crate.

#![allow(dead_code)]

use bogolab_core::{Model, PotentialSpec, C64};
use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Digits of a tensor index, slot 0 most significant.
pub fn digits(mut idx: usize, l: usize, n: usize) -> Vec<usize> {
    let mut d = vec![0; n];
    for k in (0..n).rev() {
        d[k] = idx % l;
        idx /= l;
    }
    d
}

/// `-Δ` on the periodic ring of `m` sites.
pub fn ring_laplacian(m: usize) -> Mat {
    let mut a = Mat::zeros(m, m);
    for x in 0..m {
        a[(x, x)] += c(2.0);
        a[(x, (x + 1) % m)] -= c(1.0);
        a[(x, (x + m - 1) % m)] -= c(1.0);
    }
    a
}

/// `Σ_j h_j` on `n` slots.
pub fn one_body(h: &Mat, n: usize) -> Mat {
    let l = h.nrows();
    let dim = l.pow(n as u32);
    let mut out = Mat::zeros(dim, dim);
    for a in 0..dim {
        let da = digits(a, l, n);
        for b in 0..dim {
            let db = digits(b, l, n);
            for j in 0..n {
                if (0..n).all(|k| k == j || da[k] == db[k]) {
                    out[(a, b)] += h[(da[j], db[j])];
                }
            }
        }
    }
    out
}

/// `Σ_{i<j} W_{ij}` for a pair operator indexed `(x_i L + x_j, y_i L + y_j)`.
pub fn two_body(w: &Mat, l: usize, n: usize) -> Mat {
    let dim = l.pow(n as u32);
    let mut out = Mat::zeros(dim, dim);
    for a in 0..dim {
        let da = digits(a, l, n);
        for b in 0..dim {
            let db = digits(b, l, n);
            for i in 0..n {
                for j in i + 1..n {
                    if (0..n).all(|k| k == i || k == j || da[k] == db[k]) {
                        out[(a, b)] += w[(da[i] * l + da[j], db[i] * l + db[j])];
                    }
                }
            }
        }
    }
    out
}

pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Even ring potential `v(x - y)` from a table indexed by displacement.
pub fn pair_diag(v: &[f64], scale: f64) -> Mat {
    let l = v.len();
    let mut out = Mat::zeros(l * l, l * l);
    for x in 0..l {
        for y in 0..l {
            out[(x * l + y, x * l + y)] = c(scale * v[(x + l - y) % l]);
        }
    }
    out
}

pub fn projector(phi: &[C64]) -> Mat {
    let v = DVector::from_column_slice(phi);
    &v * v.adjoint()
}

pub struct DenseModel {
    pub l: usize,
    pub n: usize,
    pub hbar: f64,
    pub rho: f64,
    pub v: Vec<f64>,
}

impl DenseModel {
    pub fn new(l: usize, n: usize, hbar: f64, v: Vec<f64>) -> Self {
        Self {
            l,
            n,
            hbar,
            rho: n as f64 / l as f64,
            v,
        }
    }

    pub fn model(&self, dt: f64, t: f64) -> Model {
        Model::on_lattice(1, self.l, self.n, self.hbar, dt, t, &PotentialSpec::Table { values: self.v.clone() }).unwrap()
    }

    pub fn h(&self) -> Mat {
        let kin = one_body(&(ring_laplacian(self.l) * c(self.hbar * self.hbar)), self.n);
        kin + two_body(&pair_diag(&self.v, 1.0 / self.rho), self.l, self.n)
    }

    /// Hartree one-body operator `ħ²(-Δ) + g(v∗|φ|² - μ)`, `g = (N-1)/ρ`.
    pub fn h_hartree(&self, phi: &[C64]) -> Mat {
        let l = self.l;
        let conv: Vec<f64> = (0..l)
            .map(|x| (0..l).map(|y| self.v[(x + l - y) % l] * phi[y].norm_sqr()).sum())
            .collect();
        let mu = 0.5 * (0..l).map(|x| conv[x] * phi[x].norm_sqr()).sum::<f64>();
        let g = (self.n as f64 - 1.0) / self.rho;
        let mut h = ring_laplacian(l) * c(self.hbar * self.hbar);
        for x in 0..l {
            h[(x, x)] += c(g * (conv[x] - mu));
        }
        h
    }

    pub fn h_mf(&self, phi: &[C64]) -> Mat {
        one_body(&self.h_hartree(phi), self.n)
    }

    /// `Σ_j h_j + Σ_{i<j} (pq V qp + qp V pq + pp V qq + qq V pp)`.
    pub fn h_tilde(&self, phi: &[C64]) -> Mat {
        let p = projector(phi);
        let q = Mat::identity(self.l, self.l) - &p;
        let v = pair_diag(&self.v, 1.0 / self.rho);
        let pq = kron(&p, &q);
        let qp = kron(&q, &p);
        let pp = kron(&p, &p);
        let qq = kron(&q, &q);
        let w = &pq * &v * &qp + &qp * &v * &pq + &pp * &v * &qq + &qq * &v * &pp;
        self.h_mf(phi) + two_body(&w, self.l, self.n)
    }

    /// `exp(-i t G/ħ) ψ` by Padé scaling and squaring.
    pub fn evolve(&self, g: &Mat, psi: &[C64], t: f64) -> Vec<C64> {
        let u = (g * C64::new(0.0, -t / self.hbar)).exp();
        (u * DVector::from_column_slice(psi)).as_slice().to_vec()
    }
}

pub fn apply(m: &Mat, psi: &[C64]) -> Vec<C64> {
    (m * DVector::from_column_slice(psi)).as_slice().to_vec()
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn l2_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// A non-constant even potential on `l` sites.
pub fn even_table(l: usize) -> Vec<f64> {
    (0..l).map(|s| 1.0 / (1.0 + s.min(l - s) as f64)).collect()
}
