//! Dense matrix kernels backing the one-time modal decomposition and the
//! desk-scale verification oracles: a symmetric eigensolver
//! (tridiagonalization + implicit QL), complex LU with partial pivoting, and
//! a complex Hessenberg QR eigenvalue routine.
//!
//! Everything here is deterministic: parallel sections only split work over
//! independent output rows/columns, and reductions run in a fixed order.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DenseError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is singular (pivot {0})")]
    Singular(usize),
    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RMat {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl RMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: vec![0.0; rows * cols], rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c);
            data.extend_from_slice(row);
        }
        Self { data, rows: r, cols: c }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in i + 1..self.cols {
                if self[(i, j)] != self[(j, i)] {
                    return false;
                }
            }
        }
        true
    }

    /// Frobenius norm.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// In-place Cholesky attempt; reports whether the matrix is positive
    /// definite. The factor itself is discarded.
    pub fn is_positive_definite(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let n = self.rows;
        let mut a = self.clone();
        for j in 0..n {
            let mut s = a[(j, j)];
            for k in 0..j {
                s -= a[(j, k)] * a[(j, k)];
            }
            if !(s > 0.0) || !s.is_finite() {
                return false;
            }
            let ljj = s.sqrt();
            a[(j, j)] = ljj;
            // Column update below the pivot; row blocks split across threads.
            let (done, rest) = a.data.split_at_mut((j + 1) * n);
            let pivot_row = &done[j * n..j * n + j];
            let update = |row: &mut [f64]| {
                let mut s = row[j];
                for k in 0..j {
                    s -= row[k] * pivot_row[k];
                }
                row[j] = s / ljj;
            };
            if (n - j) * j > 65536 {
                rest.par_chunks_mut(64 * n)
                    .for_each(|block| block.chunks_mut(n).for_each(update));
            } else {
                rest.chunks_mut(n).for_each(update);
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for RMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for RMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    data: Vec<Complex64>,
    rows: usize,
    cols: usize,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { data: vec![Complex64::new(0.0, 0.0); rows * cols], rows, cols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [Complex64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul(&self, other: &CMat) -> CMat {
        assert_eq!(self.cols, other.rows);
        let mut out = CMat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                let brow = other.row(k);
                let orow = out.row_mut(i);
                for j in 0..brow.len() {
                    orow[j] += a * brow[j];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMat {
        let mut m = self.clone();
        for z in &mut m.data {
            *z = z.conj();
        }
        m
    }

    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition: Householder tridiagonalization + implicit QL.
// ---------------------------------------------------------------------------

/// Full eigendecomposition of a real symmetric matrix.
///
/// Returns eigenvalues in ascending order and the orthogonal matrix whose
/// columns are the matching eigenvectors. Tridiagonal inputs skip the
/// reduction step.
pub fn sym_eig(a: &RMat) -> Result<(Vec<f64>, RMat), DenseError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(DenseError::Dimension(format!("{}x{} not square", n, a.ncols())));
    }
    if n == 0 {
        return Ok((Vec::new(), RMat::zeros(0, 0)));
    }

    let (mut d, mut e, mut q);
    if is_tridiagonal(a) {
        d = (0..n).map(|i| a[(i, i)]).collect::<Vec<_>>();
        e = (0..n).map(|i| if i + 1 < n { a[(i, i + 1)] } else { 0.0 }).collect();
        q = RMat::identity(n);
    } else {
        let mut w = a.clone();
        let betas;
        (d, e, betas) = householder_tridiagonalize(&mut w);
        q = accumulate_q(&w, &betas);
    }
    tql2(&mut d, &mut e, &mut q)?;
    sort_eigenpairs(&mut d, &mut q);
    Ok((d, q))
}

fn is_tridiagonal(a: &RMat) -> bool {
    let n = a.nrows();
    for i in 0..n {
        let row = a.row(i);
        for (j, &x) in row.iter().enumerate() {
            if x != 0.0 && (j + 1 < i || j > i + 1) {
                return false;
            }
        }
    }
    true
}

/// Reduce to tridiagonal form; Householder vectors are left in the strictly
/// lower part of `w` (column k holds the reflector for step k).
fn householder_tridiagonalize(w: &mut RMat) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = w.nrows();
    let mut e = vec![0.0; n];
    let mut betas = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        let x0 = w[(k + 1, k)];
        let mut tail = 0.0;
        for i in k + 2..n {
            tail += w[(i, k)] * w[(i, k)];
        }
        if tail == 0.0 {
            e[k] = x0;
            continue;
        }
        let norm = (x0 * x0 + tail).sqrt();
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let v0 = x0 - alpha;
        let beta = 2.0 / (v0 * v0 + tail);
        e[k] = alpha;
        betas[k] = beta;
        w[(k + 1, k)] = v0;

        v[k + 1] = v0;
        for i in k + 2..n {
            v[i] = w[(i, k)];
        }

        // p = beta * W[k+1.., k+1..] * v
        let lo = k + 1;
        let cols = w.cols;
        {
            let vs = &v[lo..n];
            let body = &w.data[lo * cols..n * cols];
            p[lo..n]
                .par_chunks_mut(64)
                .enumerate()
                .for_each(|(ci, chunk)| {
                    let r0 = ci * 64;
                    for (r, out) in chunk.iter_mut().enumerate() {
                        let row = &body[(r0 + r) * cols..(r0 + r) * cols + n];
                        let mut s = 0.0;
                        for (a, b) in row[lo..n].iter().zip(vs) {
                            s += a * b;
                        }
                        *out = beta * s;
                    }
                });
        }
        // q = p - (beta/2)(p.v) v  then rank-2 update A -= v q^T + q v^T
        let pv_dot: f64 = p[lo..n].iter().zip(&v[lo..n]).map(|(a, b)| a * b).sum();
        let half = 0.5 * beta * pv_dot;
        for i in lo..n {
            p[i] -= half * v[i];
        }
        {
            let vs = &v[lo..n];
            let qs = &p[lo..n];
            w.data[lo * cols..n * cols]
                .par_chunks_mut(64 * cols)
                .enumerate()
                .for_each(|(ci, block)| {
                    for (r, row) in block.chunks_mut(cols).enumerate() {
                        let vi = vs[ci * 64 + r];
                        let qi = qs[ci * 64 + r];
                        for (j, cell) in row[lo..n].iter_mut().enumerate() {
                            *cell -= vi * qs[j] + qi * vs[j];
                        }
                    }
                });
        }
    }
    if n >= 2 {
        e[n - 2] = w[(n - 1, n - 2)];
    }
    let d = (0..n).map(|i| w[(i, i)]).collect();
    (d, e, betas)
}

/// Accumulate Q = H_0 H_1 ... from the stored reflectors (backward pass).
fn accumulate_q(w: &RMat, betas: &[f64]) -> RMat {
    let n = w.nrows();
    let mut q = RMat::identity(n);
    let mut v = vec![0.0; n];
    for k in (0..n.saturating_sub(2)).rev() {
        let beta = betas[k];
        if beta == 0.0 {
            continue;
        }
        let lo = k + 1;
        for i in lo..n {
            v[i] = w[(i, k)];
        }
        // wt = v^T Q[lo.., lo..]
        let cols = q.cols;
        let mut wt = vec![0.0; n - lo];
        {
            let body = &q.data[lo * cols..n * cols];
            wt.par_chunks_mut(256).enumerate().for_each(|(c, chunk)| {
                let j0 = lo + c * 256;
                for (r, row) in body.chunks(cols).enumerate() {
                    let vi = v[lo + r];
                    for (jj, acc) in chunk.iter_mut().enumerate() {
                        *acc += vi * row[j0 + jj];
                    }
                }
            });
        }
        {
            let vs = &v[lo..n];
            q.data[lo * cols..n * cols]
                .par_chunks_mut(64 * cols)
                .enumerate()
                .for_each(|(ci, block)| {
                    for (r, row) in block.chunks_mut(cols).enumerate() {
                        let f = beta * vs[ci * 64 + r];
                        for (jj, x) in wt.iter().enumerate() {
                            row[lo + jj] -= f * x;
                        }
                    }
                });
        }
    }
    q
}

/// Implicit-shift QL on a tridiagonal matrix (`d` diagonal, `e[i]` the
/// (i, i+1) entry), accumulating rotations into the columns of `z`.
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut RMat) -> Result<(), DenseError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    let mut rots: Vec<(f64, f64, usize)> = Vec::new();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(DenseError::NoConvergence(format!(
                    "QL iteration stalled at eigenvalue {l}"
                )));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0f64, 1.0f64, 0.0f64);
            rots.clear();
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                rots.push((c, s, i));
            }
            if !underflow {
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
            apply_rotations(z, &rots);
        }
    }
    Ok(())
}

/// Apply a buffered rotation sequence to column pairs of `z`, row-parallel.
fn apply_rotations(z: &mut RMat, rots: &[(f64, f64, usize)]) {
    if rots.is_empty() {
        return;
    }
    let cols = z.cols;
    let apply = |row: &mut [f64]| {
        for &(c, s, i) in rots {
            let f = row[i + 1];
            let g = row[i];
            row[i + 1] = s * g + c * f;
            row[i] = c * g - s * f;
        }
    };
    if z.rows * rots.len() > 8192 {
        z.data
            .par_chunks_mut(128 * cols)
            .for_each(|block| block.chunks_mut(cols).for_each(apply));
    } else {
        z.data.chunks_mut(cols).for_each(apply);
    }
}

fn sort_eigenpairs(d: &mut [f64], z: &mut RMat) {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let sorted_d: Vec<f64> = order.iter().map(|&j| d[j]).collect();
    d.copy_from_slice(&sorted_d);
    let cols = z.cols;
    let old = z.data.clone();
    z.data
        .par_chunks_mut(64 * cols)
        .enumerate()
        .for_each(|(ci, block)| {
            for (r, row) in block.chunks_mut(cols).enumerate() {
                let i = ci * 64 + r;
                let src = &old[i * cols..(i + 1) * cols];
                for (j, &oj) in order.iter().enumerate() {
                    row[j] = src[oj];
                }
            }
        });
}

// ---------------------------------------------------------------------------
// Complex LU with partial pivoting.
// ---------------------------------------------------------------------------

pub struct CluFactors {
    lu: CMat,
    piv: Vec<usize>,
}

pub fn clu_factor(mut a: CMat) -> Result<CluFactors, DenseError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(DenseError::Dimension("LU needs a square matrix".into()));
    }
    let mut piv = vec![0usize; n];
    let cols = n;
    for k in 0..n {
        let mut pk = k;
        let mut best = a[(k, k)].norm_sqr();
        for i in k + 1..n {
            let t = a[(i, k)].norm_sqr();
            if t > best {
                best = t;
                pk = i;
            }
        }
        if best == 0.0 {
            return Err(DenseError::Singular(k));
        }
        piv[k] = pk;
        if pk != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(pk, j)];
                a[(pk, j)] = t;
            }
        }
        let inv = Complex64::new(1.0, 0.0) / a[(k, k)];
        for i in k + 1..n {
            a[(i, k)] *= inv;
        }
        if k + 1 == n {
            break;
        }
        let (top, bottom) = a.data.split_at_mut((k + 1) * cols);
        let urow = &top[k * cols + k + 1..(k + 1) * cols];
        let update = |row: &mut [Complex64]| {
            let l = row[k];
            if l.re != 0.0 || l.im != 0.0 {
                for (dst, &u) in row[k + 1..].iter_mut().zip(urow) {
                    *dst -= l * u;
                }
            }
        };
        if n - k > 256 {
            bottom.par_chunks_mut(cols).for_each(update);
        } else {
            bottom.chunks_mut(cols).for_each(update);
        }
    }
    Ok(CluFactors { lu: a, piv })
}

impl CluFactors {
    pub fn solve(&self, b: &[Complex64]) -> Vec<Complex64> {
        let n = self.lu.nrows();
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        // forward: L y = Pb
        for i in 1..n {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in 0..i {
                s -= row[j] * x[j];
            }
            x[i] = s;
        }
        // backward: U x = y
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let mut s = x[i];
            for j in i + 1..n {
                s -= row[j] * x[j];
            }
            x[i] = s / row[i];
        }
        x
    }
}

/// One-shot dense solve of `a x = b`.
pub fn clu_solve(a: &CMat, b: &[Complex64]) -> Result<Vec<Complex64>, DenseError> {
    Ok(clu_factor(a.clone())?.solve(b))
}

// ---------------------------------------------------------------------------
// Complex general eigenvalues: Hessenberg reduction + shifted QR.
// ---------------------------------------------------------------------------

/// Eigenvalues of a general complex matrix. Intended for modest sizes
/// (verification oracles and small-block fallbacks); cost is O(n^3).
pub fn complex_eigenvalues(a: &CMat) -> Result<Vec<Complex64>, DenseError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(DenseError::Dimension("eigenvalues need a square matrix".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut h = a.clone();
    hessenberg_reduce(&mut h);
    qr_eigenvalues(&mut h)
}

fn hessenberg_reduce(h: &mut CMat) {
    let n = h.nrows();
    let zero = Complex64::new(0.0, 0.0);
    for k in 0..n.saturating_sub(2) {
        let mut nrm2 = 0.0;
        for i in k + 1..n {
            nrm2 += h[(i, k)].norm_sqr();
        }
        let tail2 = nrm2 - h[(k + 1, k)].norm_sqr();
        if tail2 <= 0.0 || nrm2 == 0.0 {
            // already reduced in this column
            for i in k + 2..n {
                h[(i, k)] = zero;
            }
            continue;
        }
        let x0 = h[(k + 1, k)];
        let nrm = nrm2.sqrt();
        let phase = if x0.norm() == 0.0 { Complex64::new(1.0, 0.0) } else { x0 / x0.norm() };
        let sigma = -phase * nrm;
        let mut v = vec![zero; n];
        v[k + 1] = x0 - sigma;
        for i in k + 2..n {
            v[i] = h[(i, k)];
        }
        let vhv: f64 = v[k + 1..].iter().map(|z| z.norm_sqr()).sum();
        let tau = 2.0 / vhv;
        // left: H := (I - tau v v^H) H
        for j in k..n {
            let mut s = zero;
            for i in k + 1..n {
                s += v[i].conj() * h[(i, j)];
            }
            s *= tau;
            for i in k + 1..n {
                let vi = v[i];
                h[(i, j)] -= vi * s;
            }
        }
        // right: H := H (I - tau v v^H)
        for i in 0..n {
            let mut s = zero;
            for j in k + 1..n {
                s += h[(i, j)] * v[j];
            }
            s *= tau;
            for j in k + 1..n {
                let vj = v[j].conj();
                h[(i, j)] -= s * vj;
            }
        }
        h[(k + 1, k)] = sigma;
        for i in k + 2..n {
            h[(i, k)] = zero;
        }
    }
}

fn givens(f: Complex64, g: Complex64) -> (f64, Complex64, Complex64) {
    // Unitary [c, s; -conj(s), c] with real c mapping (f, g) -> (r, 0).
    if g.norm_sqr() == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), f);
    }
    if f.norm_sqr() == 0.0 {
        let gn = g.norm();
        return (0.0, g.conj() / gn, Complex64::new(gn, 0.0));
    }
    let fn_ = f.norm();
    let hyp = (f.norm_sqr() + g.norm_sqr()).sqrt();
    let c = fn_ / hyp;
    let sign_f = f / fn_;
    let s = sign_f * g.conj() / hyp;
    let r = sign_f * hyp;
    (c, s, r)
}

fn qr_eigenvalues(h: &mut CMat) -> Result<Vec<Complex64>, DenseError> {
    let n = h.nrows();
    let zero = Complex64::new(0.0, 0.0);
    let mut eig = vec![zero; n];
    let mut hi = n - 1;
    let mut iter_block = 0usize;
    loop {
        // deflate converged trailing eigenvalues
        loop {
            let mut lo = hi;
            while lo > 0 {
                let sub = h[(lo, lo - 1)].norm();
                let scale = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
                if sub <= f64::EPSILON * scale {
                    h[(lo, lo - 1)] = zero;
                    break;
                }
                lo -= 1;
            }
            if lo == hi {
                eig[hi] = h[(hi, hi)];
                iter_block = 0;
                if hi == 0 {
                    return Ok(eig);
                }
                hi -= 1;
                continue;
            }
            if lo + 1 == hi {
                let (l1, l2) = eig2x2(h[(lo, lo)], h[(lo, hi)], h[(hi, lo)], h[(hi, hi)]);
                eig[lo] = l1;
                eig[hi] = l2;
                iter_block = 0;
                if lo == 0 {
                    return Ok(eig);
                }
                hi = lo - 1;
                continue;
            }
            // active block [lo..=hi] needs a QR step
            iter_block += 1;
            if iter_block > 30 * (hi - lo + 1) {
                return Err(DenseError::NoConvergence(format!(
                    "QR iteration stalled on block {lo}..={hi}"
                )));
            }
            let shift = if iter_block % 12 == 0 {
                h[(hi, hi)] + Complex64::new(0.75 * h[(hi, hi - 1)].norm(), 0.0)
            } else {
                let (l1, l2) =
                    eig2x2(h[(hi - 1, hi - 1)], h[(hi - 1, hi)], h[(hi, hi - 1)], h[(hi, hi)]);
                let hnn = h[(hi, hi)];
                if (l1 - hnn).norm() <= (l2 - hnn).norm() {
                    l1
                } else {
                    l2
                }
            };
            qr_step(h, lo, hi, shift);
        }
    }
}

fn eig2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let half_tr = (a + d) * 0.5;
    let det = a * d - b * c;
    let disc = (half_tr * half_tr - det).sqrt();
    (half_tr + disc, half_tr - disc)
}

/// Explicit single-shift QR step on the Hessenberg block [lo..=hi].
fn qr_step(h: &mut CMat, lo: usize, hi: usize, shift: Complex64) {
    let m = hi - lo + 1;
    let mut gs = Vec::with_capacity(m - 1);
    for i in lo..=hi {
        h[(i, i)] -= shift;
    }
    // QR: eliminate each subdiagonal with a Givens rotation (rows i, i+1)
    for i in lo..hi {
        let (c, s, r) = givens(h[(i, i)], h[(i + 1, i)]);
        h[(i, i)] = r;
        h[(i + 1, i)] = Complex64::new(0.0, 0.0);
        for j in i + 1..=hi {
            let x = h[(i, j)];
            let y = h[(i + 1, j)];
            h[(i, j)] = c * x + s * y;
            h[(i + 1, j)] = -s.conj() * x + c * y;
        }
        gs.push((c, s));
    }
    // RQ: apply rotations from the right (columns i, i+1)
    for (idx, &(c, s)) in gs.iter().enumerate() {
        let i = lo + idx;
        for r in lo..=(i + 1).min(hi) {
            let x = h[(r, i)];
            let y = h[(r, i + 1)];
            h[(r, i)] = c * x + s.conj() * y;
            h[(r, i + 1)] = -s * x + c * y;
        }
    }
    for i in lo..=hi {
        h[(i, i)] += shift;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;

    fn random_symmetric(n: usize, rng: &mut SplitMix64) -> RMat {
        let mut a = RMat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let x = rng.uniform(-1.0, 1.0);
                a[(i, j)] = x;
                a[(j, i)] = x;
            }
        }
        a
    }

    fn random_cmat(n: usize, rng: &mut SplitMix64) -> CMat {
        CMat::from_fn(n, n, |_, _| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
    }

    fn sym_residual(a: &RMat, d: &[f64], q: &RMat) -> f64 {
        let n = a.nrows();
        let mut worst = 0.0f64;
        for j in 0..n {
            // || A q_j - d_j q_j ||
            let mut res = 0.0;
            for i in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[(i, k)] * q[(k, j)];
                }
                s -= d[j] * q[(i, j)];
                res += s * s;
            }
            worst = worst.max(res.sqrt());
        }
        worst
    }

    #[test]
    fn sym_eig_diagonal() {
        let a = RMat::from_rows(&[vec![4.0, 0.0], vec![0.0, 1.0]]);
        let (d, q) = sym_eig(&a).unwrap();
        assert_eq!(d, vec![1.0, 4.0]);
        // columns are +- canonical vectors
        assert!((q[(0, 1)].abs() - 1.0).abs() < 1e-14);
        assert!((q[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sym_eig_random_residuals() {
        let mut rng = SplitMix64::new(17);
        for &n in &[3usize, 8, 20, 60] {
            let a = random_symmetric(n, &mut rng);
            let (d, q) = sym_eig(&a).unwrap();
            let norm = a.fro_norm();
            assert!(
                sym_residual(&a, &d, &q) <= 1e-13 * (n as f64) * norm,
                "residual too large at n={n}"
            );
            // orthogonality
            let mut worst = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let mut s = 0.0;
                    for k in 0..n {
                        s += q[(k, i)] * q[(k, j)];
                    }
                    if i == j {
                        s -= 1.0;
                    }
                    worst = worst.max(s.abs());
                }
            }
            assert!(worst < 1e-13 * n as f64, "orthogonality loss at n={n}");
            // ascending
            for w in d.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn sym_eig_tridiagonal_matches_dense_path() {
        let mut rng = SplitMix64::new(5);
        let n = 24;
        let mut t = RMat::zeros(n, n);
        for i in 0..n {
            t[(i, i)] = rng.uniform(1.0, 3.0);
            if i + 1 < n {
                let x = rng.uniform(-1.0, 1.0);
                t[(i, i + 1)] = x;
                t[(i + 1, i)] = x;
            }
        }
        // force the generic path by cloning into a matrix with an explicit zero
        // bump far off the band, then undo it
        let (d1, _) = sym_eig(&t).unwrap();
        let mut dense = t.clone();
        dense[(0, n - 1)] = 1e-300;
        dense[(n - 1, 0)] = 1e-300;
        let (d2, _) = sym_eig(&dense).unwrap();
        for (a, b) in d1.iter().zip(&d2) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn cholesky_check() {
        let spd = RMat::from_rows(&[vec![2.0, -1.0], vec![-1.0, 2.0]]);
        assert!(spd.is_positive_definite());
        let indef = RMat::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(!indef.is_positive_definite());
    }

    #[test]
    fn clu_solves_random_systems() {
        let mut rng = SplitMix64::new(23);
        for &n in &[1usize, 4, 17, 64] {
            let a = random_cmat(n, &mut rng);
            let x_true: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
                .collect();
            let b = a.matvec(&x_true);
            let x = clu_solve(&a, &b).unwrap();
            for (u, v) in x.iter().zip(&x_true) {
                assert!((u - v).norm() < 1e-10, "solve mismatch at n={n}");
            }
        }
    }

    #[test]
    fn clu_rejects_singular() {
        let a = CMat::zeros(3, 3);
        assert!(matches!(clu_factor(a), Err(DenseError::Singular(_))));
    }

    #[test]
    fn complex_eigenvalues_known_2x2() {
        // [[2,1],[1,3]] has eigenvalues (5 +- sqrt5)/2
        let a = CMat::from_fn(2, 2, |i, j| {
            Complex64::new([[2.0, 1.0], [1.0, 3.0]][i][j], 0.0)
        });
        let mut eig = complex_eigenvalues(&a).unwrap();
        eig.sort_by(|a, b| a.re.total_cmp(&b.re));
        let s5 = 5.0f64.sqrt();
        assert!((eig[0] - Complex64::new((5.0 - s5) / 2.0, 0.0)).norm() < 1e-12);
        assert!((eig[1] - Complex64::new((5.0 + s5) / 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn complex_eigenvalues_triangular() {
        let mut rng = SplitMix64::new(9);
        let n = 12;
        let mut a = random_cmat(n, &mut rng);
        for i in 0..n {
            for j in 0..i {
                a[(i, j)] = Complex64::new(0.0, 0.0);
            }
        }
        let expect: Vec<Complex64> = (0..n).map(|i| a[(i, i)]).collect();
        let got = complex_eigenvalues(&a).unwrap();
        let mut expect = expect;
        let mut got = got;
        let key = |z: &Complex64| (z.re, z.im);
        expect.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        for (u, v) in got.iter().zip(&expect) {
            assert!((u - v).norm() < 1e-9);
        }
    }

    #[test]
    fn complex_eigenvalues_random_trace_det() {
        // spectrum must reproduce trace and determinant (via char poly checks)
        let mut rng = SplitMix64::new(31);
        for &n in &[3usize, 6, 15, 40] {
            let a = random_cmat(n, &mut rng);
            let eig = complex_eigenvalues(&a).unwrap();
            let tr: Complex64 = (0..n).map(|i| a[(i, i)]).sum();
            let sum: Complex64 = eig.iter().sum();
            assert!((tr - sum).norm() < 1e-9 * (n as f64), "trace mismatch at n={n}");
        }
    }
}
