//! Implicit Cauchy-like matrices: values `C` satisfying the Sylvester-type
//! displacement equation `X C - C Y = P Q^T` with diagonal node matrices
//! `X = diag(xnodes)`, `Y = diag(ynodes)` and generator panels `P`, `Q` of
//! small rank. An `n x m` matrix is stored in `O((n + m) r)` space; elements,
//! matrix-vector products and products of linked matrices are computed from
//! the generators without ever forming the dense matrix.

use crate::dense::CMat;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CauchyError {
    #[error("node collision: |x[{i}] - y[{j}]| = {sep:.3e} below tolerance {tol:.3e}")]
    NodeCollision { i: usize, j: usize, sep: f64, tol: f64 },
    #[error("generator panel shape mismatch: {0}")]
    Shape(String),
    #[error("matrices are not linked: inner node diagonals differ")]
    NotLinked,
}

/// `C(x, y, P, Q)` with `C_ij = (P_i . Q_j) / (x_i - y_j)`.
#[derive(Debug, Clone)]
pub struct CauchyLike {
    xnodes: Vec<Complex64>,
    ynodes: Vec<Complex64>,
    /// row-major `nrows x rank`
    p: Vec<Complex64>,
    /// row-major `ncols x rank`
    q: Vec<Complex64>,
    rank: usize,
}

fn node_scale(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter()
        .chain(y)
        .map(|z| z.norm())
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE)
}

/// Node pairs closer than this many ulps of the node scale are rejected.
/// Physically weakly-coupled modes put eigenvalues only a few ulps away from
/// their diagonal node, so the separation requirement must stay at the
/// representability level; an exact (or sub-ulp) collision still signals a
/// mis-converged eigenvalue.
const NODE_SEP_ULPS: f64 = 4.0;

impl CauchyLike {
    /// Build a Cauchy-like matrix, rejecting node pairs closer than a few
    /// ulps relative to the largest node magnitude.
    pub fn new(
        xnodes: Vec<Complex64>,
        ynodes: Vec<Complex64>,
        p: Vec<Complex64>,
        q: Vec<Complex64>,
        rank: usize,
    ) -> Result<Self, CauchyError> {
        let (n, m) = (xnodes.len(), ynodes.len());
        if p.len() != n * rank || q.len() != m * rank {
            return Err(CauchyError::Shape(format!(
                "P is {}x{rank} and Q is {}x{rank}, but panels hold {} and {} entries",
                n,
                m,
                p.len(),
                q.len()
            )));
        }
        // separation is judged against the local pair magnitude: a node pair
        // is degenerate when the difference is at the rounding floor of the
        // operands themselves, not of the globally largest node
        let ulps2 = (NODE_SEP_ULPS * f64::EPSILON) * (NODE_SEP_ULPS * f64::EPSILON);
        let per_row: Vec<Option<(usize, f64, f64)>> = xnodes
            .par_iter()
            .map(|&x| {
                let xn = x.norm_sqr();
                let mut hit: Option<(usize, f64, f64)> = None;
                for (j, &yv) in ynodes.iter().enumerate() {
                    let sep2 = (x - yv).norm_sqr();
                    let tol2 = ulps2 * xn.max(yv.norm_sqr());
                    if sep2 <= tol2 {
                        hit = Some((j, sep2.sqrt(), tol2.sqrt()));
                        break;
                    }
                }
                hit
            })
            .collect();
        for (i, hit) in per_row.iter().enumerate() {
            if let Some((j, sep, tol)) = *hit {
                return Err(CauchyError::NodeCollision { i, j, sep, tol });
            }
        }
        Ok(Self { xnodes, ynodes, p, q, rank })
    }

    /// Constructor for the case where the x-nodes lie strictly in the open
    /// left half-plane and the y-nodes strictly in the right half-plane, so
    /// disjointness follows from the real-part gap and the `O(n m)` scan can
    /// be skipped.
    pub(crate) fn new_half_plane_split(
        xnodes: Vec<Complex64>,
        ynodes: Vec<Complex64>,
        p: Vec<Complex64>,
        q: Vec<Complex64>,
        rank: usize,
    ) -> Result<Self, CauchyError> {
        let (n, m) = (xnodes.len(), ynodes.len());
        if p.len() != n * rank || q.len() != m * rank {
            return Err(CauchyError::Shape("panel sizes".into()));
        }
        let tol = NODE_SEP_ULPS * f64::EPSILON * node_scale(&xnodes, &ynodes);
        let hi_x = xnodes.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let lo_y = ynodes.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        if !(hi_x < lo_y) || (lo_y - hi_x) <= tol {
            return Err(CauchyError::NodeCollision {
                i: 0,
                j: 0,
                sep: (lo_y - hi_x).max(0.0),
                tol,
            });
        }
        Ok(Self { xnodes, ynodes, p, q, rank })
    }

    pub fn nrows(&self) -> usize {
        self.xnodes.len()
    }

    pub fn ncols(&self) -> usize {
        self.ynodes.len()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn xnodes(&self) -> &[Complex64] {
        &self.xnodes
    }

    pub fn ynodes(&self) -> &[Complex64] {
        &self.ynodes
    }

    pub fn p_row(&self, i: usize) -> &[Complex64] {
        &self.p[i * self.rank..(i + 1) * self.rank]
    }

    pub fn q_row(&self, j: usize) -> &[Complex64] {
        &self.q[j * self.rank..(j + 1) * self.rank]
    }

    pub fn element(&self, i: usize, j: usize) -> Complex64 {
        let num: Complex64 = self
            .p_row(i)
            .iter()
            .zip(self.q_row(j))
            .map(|(a, b)| a * b)
            .sum();
        num / (self.xnodes[i] - self.ynodes[j])
    }

    /// Write row `i` into `out` (length `ncols`).
    pub fn expand_row(&self, i: usize, out: &mut [Complex64]) {
        let xi = self.xnodes[i];
        let pr = self.p_row(i);
        for (j, slot) in out.iter_mut().enumerate() {
            let mut num = Complex64::new(0.0, 0.0);
            for (a, b) in pr.iter().zip(self.q_row(j)) {
                num += a * b;
            }
            *slot = num / (xi - self.ynodes[j]);
        }
    }

    /// Write column `j` into `out` (length `nrows`).
    pub fn expand_col(&self, j: usize, out: &mut [Complex64]) {
        let yj = self.ynodes[j];
        let qr = self.q_row(j);
        for (i, slot) in out.iter_mut().enumerate() {
            let mut num = Complex64::new(0.0, 0.0);
            for (a, b) in self.p_row(i).iter().zip(qr) {
                num += a * b;
            }
            *slot = num / (self.xnodes[i] - yj);
        }
    }

    /// `C v`, computed in `O(r n m)` from the generators.
    pub fn matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.ncols());
        let r = self.rank;
        // u[j][..] = v_j * Q_j
        let mut u = vec![Complex64::new(0.0, 0.0); v.len() * r.max(1)];
        for j in 0..v.len() {
            let qr = self.q_row(j);
            for (t, &qv) in u[j * r..j * r + r].iter_mut().zip(qr) {
                *t = qv * v[j];
            }
        }
        self.xnodes
            .par_iter()
            .enumerate()
            .map(|(i, &xi)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); r];
                for (j, &yj) in self.ynodes.iter().enumerate() {
                    let d = xi - yj;
                    let inv = d.conj() / d.norm_sqr();
                    for (a, &uv) in acc.iter_mut().zip(&u[j * r..j * r + r]) {
                        *a += uv * inv;
                    }
                }
                self.p_row(i).iter().zip(&acc).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// `C^T v`.
    pub fn tr_matvec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.nrows());
        let r = self.rank;
        let mut u = vec![Complex64::new(0.0, 0.0); v.len() * r.max(1)];
        for i in 0..v.len() {
            let pr = self.p_row(i);
            for (t, &pv) in u[i * r..i * r + r].iter_mut().zip(pr) {
                *t = pv * v[i];
            }
        }
        self.ynodes
            .par_iter()
            .enumerate()
            .map(|(j, &yj)| {
                let mut acc = vec![Complex64::new(0.0, 0.0); r];
                for (i, &xi) in self.xnodes.iter().enumerate() {
                    let d = xi - yj;
                    let inv = d.conj() / d.norm_sqr();
                    for (a, &uv) in acc.iter_mut().zip(&u[i * r..i * r + r]) {
                        *a += uv * inv;
                    }
                }
                self.q_row(j).iter().zip(&acc).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Dense reconstruction (verification and small-scale use).
    pub fn dense(&self) -> CMat {
        let mut out = CMat::zeros(self.nrows(), self.ncols());
        for i in 0..self.nrows() {
            let row = out.row_mut(i);
            let xi = self.xnodes[i];
            let pr = &self.p[i * self.rank..(i + 1) * self.rank];
            for (j, slot) in row.iter_mut().enumerate() {
                let mut num = Complex64::new(0.0, 0.0);
                for (a, b) in pr.iter().zip(&self.q[j * self.rank..(j + 1) * self.rank]) {
                    num += a * b;
                }
                *slot = num / (xi - self.ynodes[j]);
            }
        }
        out
    }
}

/// Product of two linked Cauchy-like matrices (`a.ynodes == b.xnodes`):
/// `C = A B` satisfies `X_A C - C Y_B = P' Q'^T` with
/// `P' = [P_A, A P_B]` and `Q' = [B^T Q_A, Q_B]`, of generator rank
/// `rank(A) + rank(B)`.
pub fn linked_product(a: &CauchyLike, b: &CauchyLike) -> Result<CauchyLike, CauchyError> {
    if a.ynodes != b.xnodes {
        return Err(CauchyError::NotLinked);
    }
    let (n, m) = (a.nrows(), b.ncols());
    let (ra, rb) = (a.rank(), b.rank());
    let rank = ra + rb;
    let mut p = vec![Complex64::new(0.0, 0.0); n * rank];
    let mut q = vec![Complex64::new(0.0, 0.0); m * rank];
    for i in 0..n {
        p[i * rank..i * rank + ra].copy_from_slice(a.p_row(i));
    }
    for j in 0..m {
        q[j * rank + ra..(j + 1) * rank].copy_from_slice(b.q_row(j));
    }
    let mut col = vec![Complex64::new(0.0, 0.0); a.ncols()];
    for c in 0..rb {
        for j in 0..b.nrows() {
            col[j] = b.p_row(j)[c];
        }
        let apb = a.matvec(&col);
        for i in 0..n {
            p[i * rank + ra + c] = apb[i];
        }
    }
    let mut qa_col = vec![Complex64::new(0.0, 0.0); a.ncols()];
    for c in 0..ra {
        for j in 0..a.ncols() {
            qa_col[j] = a.q_row(j)[c];
        }
        let btq = b.tr_matvec(&qa_col);
        for j in 0..m {
            q[j * rank + c] = btq[j];
        }
    }
    CauchyLike::new(a.xnodes.clone(), b.ynodes.clone(), p, q, rank)
}

/// Frobenius norm of `X D - D Y - P Q^T` for an externally supplied dense
/// matrix `D`; certifies that `D` really is the matrix represented by the
/// generators.
pub fn displacement_residual(c: &CauchyLike, dense: &CMat) -> f64 {
    assert_eq!(dense.nrows(), c.nrows());
    assert_eq!(dense.ncols(), c.ncols());
    let mut acc = 0.0f64;
    for i in 0..c.nrows() {
        let xi = c.xnodes[i];
        let pr = c.p_row(i);
        for j in 0..c.ncols() {
            let mut pq = Complex64::new(0.0, 0.0);
            for (a, b) in pr.iter().zip(c.q_row(j)) {
                pq += a * b;
            }
            let r = xi * dense[(i, j)] - dense[(i, j)] * c.ynodes[j] - pq;
            acc += r.norm_sqr();
        }
    }
    acc.sqrt()
}

/// Scale of the generator panels, used to make displacement residuals
/// relative: `||P||_F ||Q||_F`.
pub fn generator_scale(c: &CauchyLike) -> f64 {
    let pn: f64 = c.p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let qn: f64 = c.q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    (pn * qn).max(f64::MIN_POSITIVE)
}

/// Max relative deviation between sampled entries of `a * b` (computed from
/// dense row/column expansions) and the generator representation `prod`.
/// Lets fixture-scale products be verified without an `O(n^3)` multiply.
pub fn sampled_product_deviation(
    a: &CauchyLike,
    b: &CauchyLike,
    prod: &CauchyLike,
    samples: &[(usize, usize)],
) -> f64 {
    let mut arow = vec![Complex64::new(0.0, 0.0); a.ncols()];
    let mut bcol = vec![Complex64::new(0.0, 0.0); b.nrows()];
    let scale = generator_scale(prod)
        / ((prod.nrows() * prod.ncols()) as f64).sqrt();
    let mut worst = 0.0f64;
    for &(i, j) in samples {
        a.expand_row(i, &mut arow);
        b.expand_col(j, &mut bcol);
        let direct: Complex64 = arow.iter().zip(&bcol).map(|(x, y)| x * y).sum();
        let dev = (direct - prod.element(i, j)).norm();
        worst = worst.max(dev / scale.max(f64::MIN_POSITIVE));
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use proptest::prelude::*;

    fn well_separated_nodes(
        n: usize,
        m: usize,
        rng: &mut SplitMix64,
    ) -> (Vec<Complex64>, Vec<Complex64>) {
        // x on a left grid, y on a right grid: separation >= 1
        let x = (0..n)
            .map(|i| Complex64::new(-1.0 - i as f64, rng.uniform(-0.4, 0.4)))
            .collect();
        let y = (0..m)
            .map(|j| Complex64::new(1.0 + j as f64, rng.uniform(-0.4, 0.4)))
            .collect();
        (x, y)
    }

    fn random_panel(rows: usize, rank: usize, rng: &mut SplitMix64) -> Vec<Complex64> {
        (0..rows * rank)
            .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect()
    }

    #[test]
    fn standard_cauchy_elements() {
        let x = vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)];
        let y = vec![Complex64::new(1.0, 0.5), Complex64::new(3.0, 0.0)];
        let ones = vec![Complex64::new(1.0, 0.0); 2];
        let c = CauchyLike::new(x.clone(), y.clone(), ones.clone(), ones, 1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expect = Complex64::new(1.0, 0.0) / (x[i] - y[j]);
                assert!((c.element(i, j) - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn rank_zero_is_zero_matrix() {
        let x = vec![Complex64::new(-1.0, 0.0)];
        let y = vec![Complex64::new(1.0, 0.0)];
        let c = CauchyLike::new(x, y, vec![], vec![], 0).unwrap();
        assert_eq!(c.element(0, 0), Complex64::new(0.0, 0.0));
        assert_eq!(c.matvec(&[Complex64::new(3.0, 1.0)])[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn construction_rejects_node_collision() {
        let x = vec![Complex64::new(1.0, 0.0)];
        let y = vec![Complex64::new(1.0, 0.0)];
        let one = vec![Complex64::new(1.0, 0.0)];
        assert!(matches!(
            CauchyLike::new(x, y, one.clone(), one, 1),
            Err(CauchyError::NodeCollision { .. })
        ));
    }

    #[test]
    fn displacement_residual_of_reconstruction() {
        let mut rng = SplitMix64::new(41);
        let (x, y) = well_separated_nodes(4, 4, &mut rng);
        let p = random_panel(4, 2, &mut rng);
        let q = random_panel(4, 2, &mut rng);
        let c = CauchyLike::new(x, y, p, q, 2).unwrap();
        let d = c.dense();
        assert!(displacement_residual(&c, &d) <= 1e-13 * generator_scale(&c));
    }

    #[test]
    fn displacement_residual_grows_linearly_with_perturbation() {
        let mut rng = SplitMix64::new(43);
        let (x, y) = well_separated_nodes(3, 3, &mut rng);
        let p = random_panel(3, 1, &mut rng);
        let q = random_panel(3, 1, &mut rng);
        let c = CauchyLike::new(x, y, p, q, 1).unwrap();
        let mut d = c.dense();
        let base = displacement_residual(&c, &d);
        d[(1, 2)] += Complex64::new(1e-3, 0.0);
        let bumped = displacement_residual(&c, &d);
        // residual of the bump alone is |x_1 - y_2| * 1e-3
        let expect = (c.xnodes()[1] - c.ynodes()[2]).norm() * 1e-3;
        assert!((bumped - (base * base + expect * expect).sqrt()).abs() < 1e-6);
    }

    #[test]
    fn matvec_matches_dense() {
        let mut rng = SplitMix64::new(47);
        let (x, y) = well_separated_nodes(6, 5, &mut rng);
        let p = random_panel(6, 3, &mut rng);
        let q = random_panel(5, 3, &mut rng);
        let c = CauchyLike::new(x, y, p, q, 3).unwrap();
        let d = c.dense();
        // basis vectors pick out columns
        for j in 0..5 {
            let mut e = vec![Complex64::new(0.0, 0.0); 5];
            e[j] = Complex64::new(1.0, 0.0);
            let col = c.matvec(&e);
            for i in 0..6 {
                assert!((col[i] - d[(i, j)]).norm() < 1e-13);
            }
        }
        // zero vector
        let z = c.matvec(&vec![Complex64::new(0.0, 0.0); 5]);
        assert!(z.iter().all(|v| v.norm() == 0.0));
        // random vector against the dense product
        let v: Vec<Complex64> = (0..5)
            .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
            .collect();
        let fast = c.matvec(&v);
        let slow = d.matvec(&v);
        let scale = slow.iter().map(|z| z.norm()).fold(1e-300, f64::max);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() <= 1e-13 * scale.max(1.0));
        }
    }

    fn linked_pair(
        n: usize,
        ra: usize,
        rb: usize,
        rng: &mut SplitMix64,
    ) -> (CauchyLike, CauchyLike) {
        let x: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(-3.0 - i as f64, rng.uniform(-0.3, 0.3))).collect();
        let y: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(0.5 + i as f64, rng.uniform(-0.3, 0.3))).collect();
        let z: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(8.0 + i as f64, rng.uniform(-0.3, 0.3))).collect();
        let a = CauchyLike::new(
            x,
            y.clone(),
            random_panel(n, ra, rng),
            random_panel(n, ra, rng),
            ra,
        )
        .unwrap();
        let b = CauchyLike::new(
            y,
            z,
            random_panel(n, rb, rng),
            random_panel(n, rb, rng),
            rb,
        )
        .unwrap();
        (a, b)
    }

    #[test]
    fn linked_product_matches_dense_multiply() {
        let mut rng = SplitMix64::new(53);
        let (a, b) = linked_pair(3, 2, 1, &mut rng);
        let prod = linked_product(&a, &b).unwrap();
        let expect = a.dense().mul(&b.dense());
        let got = prod.dense();
        let scale = expect.fro_norm().max(1.0);
        for i in 0..3 {
            for j in 0..3 {
                assert!((got[(i, j)] - expect[(i, j)]).norm() <= 1e-12 * scale);
            }
        }
        // the dense product also satisfies the product's displacement equation
        assert!(
            displacement_residual(&prod, &expect) <= 1e-11 * generator_scale(&prod).max(1.0)
        );
    }

    #[test]
    fn linked_product_with_zero_factor() {
        let mut rng = SplitMix64::new(59);
        let (a, mut b) = linked_pair(3, 1, 1, &mut rng);
        for v in &mut b.p {
            *v = Complex64::new(0.0, 0.0);
        }
        let prod = linked_product(&a, &b).unwrap();
        assert!(prod.dense().fro_norm() < 1e-13);
    }

    #[test]
    fn linked_product_requires_linkage() {
        let mut rng = SplitMix64::new(61);
        let (a, _) = linked_pair(3, 1, 1, &mut rng);
        let (_, b) = linked_pair(3, 1, 1, &mut rng);
        assert!(matches!(linked_product(&a, &b), Err(CauchyError::NotLinked)));
    }

    #[test]
    fn linked_product_associative() {
        let mut rng = SplitMix64::new(67);
        for &n in &[2usize, 5, 16] {
            let (a, b) = linked_pair(n, 1, 2, &mut rng);
            // third factor linked to b's ynodes
            let w: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(20.0 + i as f64, rng.uniform(-0.3, 0.3)))
                .collect();
            let c = CauchyLike::new(
                b.ynodes().to_vec(),
                w,
                random_panel(n, 1, &mut rng),
                random_panel(n, 1, &mut rng),
                1,
            )
            .unwrap();
            let left = linked_product(&linked_product(&a, &b).unwrap(), &c).unwrap();
            let right = linked_product(&a, &linked_product(&b, &c).unwrap()).unwrap();
            let dl = left.dense();
            let dr = right.dense();
            let scale = dl.fro_norm().max(1.0);
            for i in 0..n {
                for j in 0..n {
                    assert!((dl[(i, j)] - dr[(i, j)]).norm() <= 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn sampled_deviation_detects_wrong_product() {
        let mut rng = SplitMix64::new(71);
        let (a, b) = linked_pair(4, 1, 1, &mut rng);
        let prod = linked_product(&a, &b).unwrap();
        let samples: Vec<(usize, usize)> =
            (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).collect();
        assert!(sampled_product_deviation(&a, &b, &prod, &samples) < 1e-12);
        // a deliberately wrong "product"
        let wrong = linked_product(&a, &a_clone_shifted(&b, &mut rng)).unwrap();
        assert!(sampled_product_deviation(&a, &b, &wrong, &samples) > 1e-6);
    }

    fn a_clone_shifted(b: &CauchyLike, rng: &mut SplitMix64) -> CauchyLike {
        let mut p = b.p.clone();
        for v in &mut p {
            *v += Complex64::new(rng.uniform(0.1, 0.2), 0.0);
        }
        CauchyLike::new(b.xnodes().to_vec(), b.ynodes().to_vec(), p, b.q.clone(), b.rank())
            .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn prop_matvec_and_product_match_dense(seed in 0u64..5000, n in 2usize..7, r in 1usize..3) {
            let mut rng = SplitMix64::new(seed);
            let (a, b) = linked_pair(n, r, 1, &mut rng);
            let v: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)))
                .collect();
            let fast = a.matvec(&v);
            let slow = a.dense().matvec(&v);
            let scale = slow.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
            for (x, y) in fast.iter().zip(&slow) {
                prop_assert!((x - y).norm() <= 1e-12 * scale);
            }
            let prod = linked_product(&a, &b).unwrap();
            let expect = a.dense().mul(&b.dense());
            let scale = expect.fro_norm().max(1.0);
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((prod.element(i, j) - expect[(i, j)]).norm() <= 1e-11 * scale);
                }
            }
        }
    }
}
