//! Index arithmetic and slot-local operations on flat tensors.
//!
//! A tensor over `k` slots of `L` sites is a flat vector of length `L^k`;
//! slot 0 is the most significant digit, so slot `j` has stride `L^(k-1-j)`.
//! All kernels are data-parallel over output entries, which keeps results
//! independent of the thread count.

use ndarray::{Array1, Array2};
use rayon::prelude::*;

use crate::C64;

/// Below this length kernels run serially.
const PAR_THRESHOLD: usize = 1 << 12;
const DOT_CHUNK: usize = 1 << 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub sites: usize,
    pub slots: usize,
}

impl Layout {
    pub fn new(sites: usize, slots: usize) -> Self {
        Self { sites, slots }
    }

    pub fn len(&self) -> usize {
        self.sites.pow(self.slots as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn stride(&self, slot: usize) -> usize {
        self.sites.pow((self.slots - 1 - slot) as u32)
    }

    /// Digits of a flat index, slot 0 first.
    pub fn digits(&self, mut idx: usize, out: &mut [usize]) {
        for j in (0..self.slots).rev() {
            out[j] = idx % self.sites;
            idx /= self.sites;
        }
    }

    pub fn index(&self, digits: &[usize]) -> usize {
        digits.iter().fold(0, |acc, &d| acc * self.sites + d)
    }

    fn drop_one(&self) -> Layout {
        Layout::new(self.sites, self.slots - 1)
    }
}

/// Checked `sites^slots`.
pub fn checked_len(sites: usize, slots: usize) -> Option<usize> {
    sites.checked_pow(slots as u32)
}

fn fill<F>(out: &mut [C64], f: F)
where
    F: Fn(usize) -> C64 + Sync,
{
    if out.len() >= PAR_THRESHOLD {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    } else {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

/// Builds a vector entry by entry.
pub fn build<F>(len: usize, f: F) -> Array1<C64>
where
    F: Fn(usize) -> C64 + Sync,
{
    let mut out = Array1::zeros(len);
    fill(out.as_slice_mut().unwrap(), f);
    out
}

/// `⟨a, b⟩` with conjugation on `a`; chunked so the summation order is fixed.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    debug_assert_eq!(a.len(), b.len());
    if a.len() < PAR_THRESHOLD {
        return a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    }
    let parts: Vec<C64> = a
        .par_chunks(DOT_CHUNK)
        .zip(b.par_chunks(DOT_CHUNK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p.conj() * q).sum())
        .collect();
    parts.into_iter().sum()
}

pub fn norm_sq(a: &[C64]) -> f64 {
    if a.len() < PAR_THRESHOLD {
        return a.iter().map(|x| x.norm_sqr()).sum();
    }
    let parts: Vec<f64> = a
        .par_chunks(DOT_CHUNK)
        .map(|x| x.iter().map(|p| p.norm_sqr()).sum())
        .collect();
    parts.into_iter().sum()
}

pub fn norm(a: &[C64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += s * x`
pub fn axpy(s: C64, x: &[C64], y: &mut [C64]) {
    if y.len() >= PAR_THRESHOLD {
        y.par_iter_mut().zip(x.par_iter()).for_each(|(a, b)| *a += s * b);
    } else {
        y.iter_mut().zip(x).for_each(|(a, b)| *a += s * b);
    }
}

pub fn scale(s: C64, x: &mut [C64]) {
    if x.len() >= PAR_THRESHOLD {
        x.par_iter_mut().for_each(|a| *a *= s);
    } else {
        x.iter_mut().for_each(|a| *a *= s);
    }
}

/// Fills `out` block by block; `f(b, block)` writes block `b`.
fn fill_blocks<F>(out: &mut [C64], block: usize, f: F)
where
    F: Fn(usize, &mut [C64]) + Sync,
{
    if out.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(block).enumerate().for_each(|(b, o)| f(b, o));
    } else {
        out.chunks_mut(block).enumerate().for_each(|(b, o)| f(b, o));
    }
}

/// `Σ_a conj(f[a]) t[.., a, ..]` over one slot; output has one slot fewer.
pub fn contract_slot(t: &[C64], layout: Layout, slot: usize, f: &[C64]) -> Array1<C64> {
    let l = layout.sites;
    let s = layout.stride(slot);
    let mut out = Array1::zeros(layout.drop_one().len());
    let fc: Vec<C64> = f.iter().map(|z| z.conj()).collect();
    fill_blocks(out.as_slice_mut().unwrap(), s, |hi, o| {
        let tin = &t[hi * s * l..(hi + 1) * s * l];
        for (a, c) in fc.iter().enumerate() {
            let src = &tin[a * s..(a + 1) * s];
            o.iter_mut().zip(src).for_each(|(x, y)| *x += c * y);
        }
    });
    out
}

/// Inverse of [`contract_slot`]: places `f` into slot `slot` of the output
/// layout `layout`.
pub fn insert_slot(t: &[C64], layout: Layout, slot: usize, f: &[C64]) -> Array1<C64> {
    let l = layout.sites;
    let s = layout.stride(slot);
    let mut out = Array1::zeros(layout.len());
    fill_blocks(out.as_slice_mut().unwrap(), s * l, |hi, o| {
        let src = &t[hi * s..(hi + 1) * s];
        for (a, c) in f.iter().enumerate() {
            o[a * s..(a + 1) * s].iter_mut().zip(src).for_each(|(x, y)| *x = c * y);
        }
    });
    out
}

/// `|f⟩⟨f|` on one slot.
pub fn project_slot(t: &[C64], layout: Layout, slot: usize, f: &[C64]) -> Array1<C64> {
    let c = contract_slot(t, layout, slot, f);
    insert_slot(c.as_slice().unwrap(), layout, slot, f)
}

/// `1 - |f⟩⟨f|` on one slot.
pub fn coproject_slot(t: &[C64], layout: Layout, slot: usize, f: &[C64]) -> Array1<C64> {
    let mut p = project_slot(t, layout, slot, f);
    p.iter_mut().zip(t).for_each(|(a, b)| *a = b - *a);
    p
}

/// Applies a one-body matrix on one slot: `out[.., x, ..] = Σ_y m[x, y] t[.., y, ..]`.
pub fn apply_slot_matrix(t: &[C64], layout: Layout, slot: usize, m: &Array2<C64>) -> Array1<C64> {
    let l = layout.sites;
    let s = layout.stride(slot);
    let mut out = Array1::zeros(layout.len());
    fill_blocks(out.as_slice_mut().unwrap(), s * l, |hi, o| {
        let tin = &t[hi * s * l..(hi + 1) * s * l];
        for x in 0..l {
            let ox = &mut o[x * s..(x + 1) * s];
            for y in 0..l {
                let c = m[[x, y]];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                let src = &tin[y * s..(y + 1) * s];
                ox.iter_mut().zip(src).for_each(|(a, b)| *a += c * b);
            }
        }
    });
    out
}

/// `Σ_slots m` acting on every slot.
pub fn apply_all_slots(t: &[C64], layout: Layout, m: &Array2<C64>) -> Array1<C64> {
    let mut out = Array1::zeros(t.len());
    for j in 0..layout.slots {
        let r = apply_slot_matrix(t, layout, j, m);
        out += &r;
    }
    out
}

/// Applies `q = 1 - |f⟩⟨f|` on every slot.
pub fn coproject_all(t: &[C64], layout: Layout, f: &[C64]) -> Array1<C64> {
    let mut cur = Array1::from(t.to_vec());
    for j in 0..layout.slots {
        cur = coproject_slot(cur.as_slice().unwrap(), layout, j, f);
    }
    cur
}

/// Multiplies by a function of the two coordinates in slots `i` and `j`;
/// `pair` is indexed `pair[x_i * L + x_j]`.
pub fn multiply_pair(t: &[C64], layout: Layout, i: usize, j: usize, pair: &[f64]) -> Array1<C64> {
    let l = layout.sites;
    // `a` is the more significant slot
    let (a, b, swapped) = if i < j { (i, j, false) } else { (j, i, true) };
    let sa = layout.stride(a);
    let sb = layout.stride(b);
    let mut out = Array1::zeros(layout.len());
    fill_blocks(out.as_slice_mut().unwrap(), sa, |blk, o| {
        let xa = blk % l;
        let tin = &t[blk * sa..(blk + 1) * sa];
        for (mid, (oc, tc)) in o.chunks_mut(sb).zip(tin.chunks(sb)).enumerate() {
            let xb = mid % l;
            let w = if swapped { pair[xb * l + xa] } else { pair[xa * l + xb] };
            oc.iter_mut().zip(tc).for_each(|(p, q)| *p = q * w);
        }
    });
    out
}

/// `out[.., x_i, .., x_j, ..] += pair[x_i * L + x_j] t[rest]` for `i < j`,
/// where `t` has two slots fewer than `layout`.
pub fn add_insert_pair(t: &[C64], layout: Layout, i: usize, j: usize, pair: &[C64], out: &mut [C64]) {
    assert!(i < j && j < layout.slots);
    let l = layout.sites;
    let si = layout.stride(i);
    let sj = layout.stride(j);
    fill_blocks(out, si, |blk, o| {
        let (a, xi) = (blk / l, blk % l);
        for (mid, oc) in o.chunks_mut(sj).enumerate() {
            let (b, xj) = (mid / l, mid % l);
            let w = pair[xi * l + xj];
            let base = a * (si / l) + b * sj;
            oc.iter_mut().zip(&t[base..base + sj]).for_each(|(p, q)| *p += w * q);
        }
    });
}

/// `out += (M)_{ij} t` for `i < j`, where `M` acts on the coordinate pair
/// in slots `i` and `j` and is indexed `mat[(x_i * L + x_j) * L² + y_i * L + y_j]`.
pub fn add_pair_matrix(t: &[C64], layout: Layout, i: usize, j: usize, mat: &[C64], out: &mut [C64]) {
    assert!(i < j && j < layout.slots);
    let l = layout.sites;
    let l2 = l * l;
    assert_eq!(mat.len(), l2 * l2);
    let si = layout.stride(i);
    let sj = layout.stride(j);
    let block = si * l;
    fill_blocks(out, block, |blk, o| {
        let tin = &t[blk * block..(blk + 1) * block];
        let mut gathered = vec![C64::new(0.0, 0.0); l2];
        for hm in 0..si / (sj * l) {
            for lo in 0..sj {
                let base = hm * sj * l + lo;
                for xi in 0..l {
                    for xj in 0..l {
                        gathered[xi * l + xj] = tin[base + xi * si + xj * sj];
                    }
                }
                for (row, m) in mat.chunks(l2).enumerate() {
                    let acc: C64 = m.iter().zip(&gathered).map(|(a, b)| a * b).sum();
                    o[base + (row / l) * si + (row % l) * sj] += acc;
                }
            }
        }
    });
}

/// Tensor with slots `a` and `b` exchanged.
pub fn transpose_slots(t: &[C64], layout: Layout, a: usize, b: usize) -> Array1<C64> {
    if a == b {
        return Array1::from(t.to_vec());
    }
    let l = layout.sites;
    let sa = layout.stride(a);
    let sb = layout.stride(b);
    build(layout.len(), |k| {
        let xa = (k / sa) % l;
        let xb = (k / sb) % l;
        let src = k - xa * sa - xb * sb + xb * sa + xa * sb;
        t[src]
    })
}

/// All subsets of `0..n` of size `k` as bit masks, ascending.
pub fn subsets(n: usize, k: usize) -> Vec<u32> {
    (0u32..(1u32 << n))
        .filter(|m| m.count_ones() as usize == k)
        .collect()
}

/// Full symmetrization over all slot permutations, built from transpositions.
pub fn symmetrize(t: &[C64], layout: Layout) -> Array1<C64> {
    let mut cur = Array1::from(t.to_vec());
    // (1/(j+1)) Σ_{i<=j} (i j) applied for j = 1..k-1 yields the symmetrizer
    for j in 1..layout.slots {
        let mut acc = cur.clone();
        for i in 0..j {
            acc += &transpose_slots(cur.as_slice().unwrap(), layout, i, j);
        }
        acc.mapv_inplace(|x| x / (j as f64 + 1.0));
        cur = acc;
    }
    cur
}

pub fn kron(a: &[C64], b: &[C64]) -> Array1<C64> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x * y);
        }
    }
    Array1::from(out)
}

/// `f^{⊗k}`.
pub fn product_power(f: &[C64], k: usize) -> Array1<C64> {
    let mut out = Array1::from(vec![C64::new(1.0, 0.0)]);
    for _ in 0..k {
        out = kron(out.as_slice().unwrap(), f);
    }
    out
}
