//! Linear systems of the form `sum_i c_i A_i X B_i = F`.
//!
//! With the column-major vectorization `vec(A X B) = (B^T (x) A) vec(X)` the
//! operator becomes the matrix `L = sum_i c_i (B_i^T (x) A_i)`. For the
//! Lobatto operators every factor is banded once the one-dimensional basis is
//! reordered as `(.., 4, 2, 0, 1, 3, 5, ..)`: the interior mass matrix only
//! couples indices of equal parity and the boundary modes `0, 1` only couple
//! to `2, 3`, so the reordered bandwidth is two. `L` is then banded with
//! half-bandwidth `2 n1 + 2` and is factored once by a banded LU with partial
//! pivoting. Arbitrary dense factors are accepted as well; the ordering with
//! the smaller bandwidth is chosen automatically.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, Dyn, LU};

use crate::error::{Error, Result};
use crate::spectral::{CMat, C64};

/// Largest accepted ratio between the extreme pivots of a factorization.
const MAX_PIVOT_RATIO: f64 = 1e15;

/// One term `c A X B` of a Kronecker operator.
#[derive(Clone, Debug)]
pub struct KronTerm {
    pub coef: C64,
    pub a: CMat,
    pub b: CMat,
}

impl KronTerm {
    /// Term `coef * a * X * b`.
    pub fn new(coef: C64, a: CMat, b: CMat) -> Self {
        Self { coef, a, b }
    }
}

/// The operator `X -> sum_i c_i A_i X B_i`.
#[derive(Debug)]
pub struct KronOperator {
    terms: Vec<KronTerm>,
    n1: usize,
    n2: usize,
    factorizations: AtomicUsize,
}

/// Reusable factorization of an assembled operator.
#[derive(Debug)]
pub struct FactoredOperator {
    lu: BandLu,
    inv1: Vec<usize>,
    inv2: Vec<usize>,
    n1: usize,
    n2: usize,
    solves: AtomicUsize,
}

/// Validates the terms and builds the operator.
pub fn assemble(terms: Vec<KronTerm>) -> Result<KronOperator> {
    KronOperator::assemble(terms)
}

/// Factors the assembled global matrix of `op`.
pub fn factor(op: &KronOperator) -> Result<FactoredOperator> {
    op.factor()
}

/// Solves `L(X) = F` with a factored operator.
pub fn solve(f: &FactoredOperator, rhs: &CMat) -> Result<CMat> {
    f.solve(rhs)
}

impl KronOperator {
    /// Validates shapes: every `A_i` is `n1 x n1` and every `B_i` is `n2 x n2`.
    pub fn assemble(terms: Vec<KronTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Dimension("operator has no terms".into()))?;
        let n1 = first.a.nrows();
        let n2 = first.b.nrows();
        for (i, t) in terms.iter().enumerate() {
            if t.a.nrows() != n1 || t.a.ncols() != n1 || t.b.nrows() != n2 || t.b.ncols() != n2 {
                return Err(Error::Dimension(format!(
                    "term {i}: A is {}x{}, B is {}x{}, expected {n1}x{n1} and {n2}x{n2}",
                    t.a.nrows(),
                    t.a.ncols(),
                    t.b.nrows(),
                    t.b.ncols()
                )));
            }
        }
        Ok(Self {
            terms,
            n1,
            n2,
            factorizations: AtomicUsize::new(0),
        })
    }

    /// Row count of `X`.
    pub fn n1(&self) -> usize {
        self.n1
    }

    /// Column count of `X`.
    pub fn n2(&self) -> usize {
        self.n2
    }

    /// The terms of the operator.
    pub fn terms(&self) -> &[KronTerm] {
        &self.terms
    }

    /// Number of factorizations computed from this operator so far.
    pub fn factor_count(&self) -> usize {
        self.factorizations.load(Ordering::Relaxed)
    }

    /// `sum_i c_i A_i X B_i`.
    pub fn apply(&self, x: &CMat) -> Result<CMat> {
        if x.nrows() != self.n1 || x.ncols() != self.n2 {
            return Err(Error::Dimension(format!(
                "operand is {}x{}, expected {}x{}",
                x.nrows(),
                x.ncols(),
                self.n1,
                self.n2
            )));
        }
        let mut out = CMat::zeros(self.n1, self.n2);
        for t in &self.terms {
            out += (&t.a * x * &t.b) * t.coef;
        }
        Ok(out)
    }

    /// Nonzero entries `(row, col) -> value` of `sum_i c_i (B_i^T (x) A_i)`
    /// in the natural column-major numbering.
    pub fn entries(&self) -> BTreeMap<(usize, usize), C64> {
        let mut map = BTreeMap::new();
        let n1 = self.n1;
        for t in &self.terms {
            let a_nz = nonzeros(&t.a);
            let b_nz = nonzeros(&t.b);
            for &(c2, r2, bv) in &b_nz {
                for &(r1, c1, av) in &a_nz {
                    let row = r1 + n1 * r2;
                    let col = c1 + n1 * c2;
                    *map.entry((row, col)).or_insert(C64::new(0.0, 0.0)) += t.coef * av * bv;
                }
            }
        }
        map
    }

    /// Dense global matrix; intended for small test problems.
    pub fn dense(&self) -> CMat {
        let n = self.n1 * self.n2;
        let mut m = CMat::zeros(n, n);
        for ((r, c), v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// Solves `L(X) = F` through the dense global matrix.
    pub fn solve_dense(&self, rhs: &CMat) -> Result<CMat> {
        let n = self.n1 * self.n2;
        let lu = self.dense().lu();
        let b = nalgebra::DVector::from_column_slice(rhs.as_slice());
        let x = lu.solve(&b).ok_or(Error::Singular {
            condition: f64::INFINITY,
        })?;
        debug_assert_eq!(x.len(), n);
        Ok(CMat::from_column_slice(self.n1, self.n2, x.as_slice()))
    }

    /// Banded LU factorization of the global matrix.
    pub fn factor(&self) -> Result<FactoredOperator> {
        let (perm1, inv1, bw1) = best_order(self.terms.iter().map(|t| &t.a), self.n1);
        let (_perm2, inv2, bw2) = best_order(
            self.terms.iter().map(|t| &t.b),
            self.n2,
        );
        debug_assert_eq!(perm1.len(), self.n1);
        let n = self.n1 * self.n2;
        let band = bw1 + self.n1 * bw2;
        let mut lu = BandLu::zeros(n, band, band);
        for ((r, c), v) in self.entries() {
            let (r1, r2) = (r % self.n1, r / self.n1);
            let (c1, c2) = (c % self.n1, c / self.n1);
            let pr = inv1[r1] + self.n1 * inv2[r2];
            let pc = inv1[c1] + self.n1 * inv2[c2];
            lu.add(pr, pc, v);
        }
        lu.factorize()?;
        self.factorizations.fetch_add(1, Ordering::Relaxed);
        Ok(FactoredOperator {
            lu,
            inv1,
            inv2,
            n1: self.n1,
            n2: self.n2,
            solves: AtomicUsize::new(0),
        })
    }
}

impl FactoredOperator {
    /// Solves `L(X) = F`.
    pub fn solve(&self, rhs: &CMat) -> Result<CMat> {
        if rhs.nrows() != self.n1 || rhs.ncols() != self.n2 {
            return Err(Error::Dimension(format!(
                "right-hand side is {}x{}, expected {}x{}",
                rhs.nrows(),
                rhs.ncols(),
                self.n1,
                self.n2
            )));
        }
        let n1 = self.n1;
        let mut b = vec![C64::new(0.0, 0.0); n1 * self.n2];
        for c in 0..self.n2 {
            for r in 0..n1 {
                b[self.inv1[r] + n1 * self.inv2[c]] = rhs[(r, c)];
            }
        }
        self.lu.solve_in_place(&mut b);
        self.solves.fetch_add(1, Ordering::Relaxed);
        Ok(CMat::from_fn(n1, self.n2, |r, c| {
            b[self.inv1[r] + n1 * self.inv2[c]]
        }))
    }

    /// Number of solves performed with this factorization.
    pub fn solve_count(&self) -> usize {
        self.solves.load(Ordering::Relaxed)
    }

    /// Half-bandwidth of the factored global matrix.
    pub fn bandwidth(&self) -> usize {
        self.lu.kl
    }

    /// Ratio of the largest to the smallest pivot modulus.
    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio()
    }
}

fn nonzeros(m: &CMat) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let v = m[(r, c)];
            if v.re != 0.0 || v.im != 0.0 {
                out.push((r, c, v));
            }
        }
    }
    out
}

/// Orders `(.., 4, 2, 0, 1, 3, 5, ..)` and natural; returns the one with the
/// smaller bandwidth over the union sparsity of `mats` as
/// `(perm, inverse perm, bandwidth)`.
fn best_order<'a>(
    mats: impl Iterator<Item = &'a CMat> + Clone,
    n: usize,
) -> (Vec<usize>, Vec<usize>, usize) {
    let natural: Vec<usize> = (0..n).collect();
    let mut interleaved: Vec<usize> = (2..n).step_by(2).rev().collect();
    interleaved.extend((0..n.min(2)).chain((3..n).step_by(2)));
    let mut best: Option<(Vec<usize>, Vec<usize>, usize)> = None;
    for perm in [interleaved, natural] {
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut bw = 0;
        for m in mats.clone() {
            for c in 0..n {
                for r in 0..n {
                    let v = m[(r, c)];
                    if v.re != 0.0 || v.im != 0.0 {
                        bw = bw.max(inv[r].abs_diff(inv[c]));
                    }
                }
            }
        }
        if best.as_ref().map_or(true, |b| bw < b.2) {
            best = Some((perm, inv, bw));
        }
    }
    best.expect("at least one ordering")
}

/// Banded LU with partial pivoting. Row `r` stores columns
/// `r - kl ..= r + kl + ku`, which holds the fill produced by row swaps.
#[derive(Debug)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
    piv: Vec<usize>,
    /// Multipliers of column `i` at `lower[i * kl ..]`, contiguous for the
    /// forward sweep.
    lower: Vec<C64>,
    /// Number of stored entries right of the diagonal in each row of `U`.
    upper_len: Vec<usize>,
    pivot_ratio: f64,
}

impl BandLu {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![C64::new(0.0, 0.0); n * width],
            piv: vec![0; n],
            lower: Vec::new(),
            upper_len: Vec::new(),
            pivot_ratio: 1.0,
        }
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        r * self.width + c + self.kl - r
    }

    fn add(&mut self, r: usize, c: usize, v: C64) {
        let i = self.idx(r, c);
        self.data[i] += v;
    }

    fn factorize(&mut self) -> Result<()> {
        let n = self.n;
        let (kl, ku, w) = (self.kl, self.ku, self.width);
        let mut pmax: f64 = 0.0;
        let mut pmin = f64::INFINITY;
        for i in 0..n {
            let rmax = (i + kl).min(n - 1);
            let cmax = (i + kl + ku).min(n - 1);
            let mut p = i;
            let mut best = self.data[self.idx(i, i)].norm();
            for r in i + 1..=rmax {
                let v = self.data[self.idx(r, i)].norm();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Singular {
                    condition: f64::INFINITY,
                });
            }
            pmax = pmax.max(best);
            pmin = pmin.min(best);
            self.piv[i] = p;
            if p != i {
                for c in i..=cmax {
                    let a = self.idx(i, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(i, i)];
            let len = cmax - i;
            for r in i + 1..=rmax {
                let li = self.idx(r, i);
                let l = self.data[li] / pivot;
                self.data[li] = l;
                if l.re == 0.0 && l.im == 0.0 {
                    continue;
                }
                let src = self.idx(i, i + 1);
                let dst = self.idx(r, i + 1);
                let (head, tail) = self.data.split_at_mut(r * w);
                let row_i = &head[src..src + len];
                let row_r = &mut tail[dst - r * w..dst - r * w + len];
                for (x, y) in row_r.iter_mut().zip(row_i) {
                    *x -= l * y;
                }
            }
        }
        self.lower = vec![C64::new(0.0, 0.0); n * kl];
        self.upper_len = vec![0; n];
        for i in 0..n {
            for r in i + 1..=(i + kl).min(n - 1) {
                self.lower[i * kl + r - i - 1] = self.data[self.idx(r, i)];
            }
            let cmax = (i + kl + ku).min(n - 1);
            let start = self.idx(i, i);
            let row = &self.data[start..=start + cmax - i];
            self.upper_len[i] = row.iter().rposition(|v| v.re != 0.0 || v.im != 0.0).unwrap_or(0);
        }
        self.pivot_ratio = pmax / pmin;
        if self.pivot_ratio > MAX_PIVOT_RATIO {
            return Err(Error::Singular {
                condition: self.pivot_ratio,
            });
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [C64]) {
        let n = self.n;
        let kl = self.kl;
        for i in 0..n {
            let p = self.piv[i];
            if p != i {
                b.swap(i, p);
            }
            let bi = b[i];
            if bi.re == 0.0 && bi.im == 0.0 {
                continue;
            }
            let len = kl.min(n - 1 - i);
            let col = &self.lower[i * kl..i * kl + len];
            for (x, l) in b[i + 1..=i + len].iter_mut().zip(col) {
                *x -= l * bi;
            }
        }
        for i in (0..n).rev() {
            let len = self.upper_len[i];
            let start = self.idx(i, i);
            let row = &self.data[start..=start + len];
            let s = row[1..]
                .iter()
                .zip(&b[i + 1..=i + len])
                .fold(b[i], |acc, (u, x)| acc - u * x);
            b[i] = s / row[0];
        }
    }

    fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }
}

/// LU factorization of a small matrix for repeated one-dimensional solves.
#[derive(Clone, Debug)]
pub struct Factored1d {
    lu: LU<C64, Dyn, Dyn>,
    right: bool,
}

fn factor_small(a: &CMat) -> Result<LU<C64, Dyn, Dyn>> {
    if a.nrows() != a.ncols() {
        return Err(Error::Dimension(format!(
            "matrix is {}x{}, expected square",
            a.nrows(),
            a.ncols()
        )));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = u.diagonal().iter().map(|v| v.norm()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || max / min > MAX_PIVOT_RATIO {
        return Err(Error::Singular {
            condition: max / min,
        });
    }
    Ok(lu)
}

impl Factored1d {
    /// Factorization for left solves `A X = F`.
    pub fn left(a: &CMat) -> Result<Self> {
        Ok(Self {
            lu: factor_small(a)?,
            right: false,
        })
    }

    /// Factorization for right solves `X B = F`, stored as `B^T`.
    pub fn right(b: &CMat) -> Result<Self> {
        Ok(Self {
            lu: factor_small(&b.transpose())?,
            right: true,
        })
    }

    /// Solves with the stored factorization.
    pub fn solve(&self, f: &CMat) -> Result<CMat> {
        let singular = || Error::Singular {
            condition: f64::INFINITY,
        };
        if self.right {
            let xt = self.lu.solve(&f.transpose()).ok_or_else(singular)?;
            Ok(xt.transpose())
        } else {
            self.lu.solve(f).ok_or_else(singular)
        }
    }
}

/// Solves `A X = F` directly.
pub fn solve_1d_left(a: &CMat, f: &CMat) -> Result<CMat> {
    if a.nrows() != f.nrows() {
        return Err(Error::Dimension("row count of F must match A".into()));
    }
    Factored1d::left(a)?.solve(f)
}

/// Solves `X B = F` as the left solve `B^T X^T = F^T`.
pub fn solve_1d_right(b: &CMat, f: &CMat) -> Result<CMat> {
    if b.ncols() != f.ncols() {
        return Err(Error::Dimension("column count of F must match B".into()));
    }
    Factored1d::right(b)?.solve(f)
}

/// Identity matrix of size `n`.
pub fn identity(n: usize) -> CMat {
    DMatrix::identity(n, n)
}
