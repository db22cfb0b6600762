//! `O(n^2)` evaluation of `trace(X)` where `A X + X A* = -G G^T` for the
//! diagonal-plus-low-rank phase matrix `A = Xi + sum_i rho_i y_i y_i^T`.
//!
//! The pipeline eigendecomposes `A = S Lambda S^T` by chaining rank-one
//! updates (each solved by the CSymDPR1 eigensolver, each eigenvector matrix
//! Cauchy-like and linked to the previous one), transforms the Lyapunov
//! equation into the displacement equation
//! `Lambda Y + Y conj(Lambda) = -S^T G G^T conj(S)`, whose solution `Y` is
//! Cauchy-like with generators read off from rows of `S`, and finally sums
//! `trace(X) = sum_ij conj(S_ij) Z_ij` with `Z = S Y` at the generator level.
//! Nothing is densified along the way.
//!
//! [`lyap_oracle`] is the independent desk-scale check: it solves the same
//! Lyapunov equation by dense Kronecker vectorization.

use crate::cauchy::{linked_product, CauchyError, CauchyLike};
use crate::csymdpr1::{eig_all, eigvector_generators, CSymDpr1, EigError};
use crate::dense::{clu_factor, CMat, DenseError};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("at least one damper update is required")]
    EmptyUpdates,
    #[error("criterion s = {s} exceeds mode count n = {n}")]
    CriterionTooLarge { s: usize, n: usize },
    #[error("unstable system: eigenvalue {index} has real part {re:.3e} >= 0")]
    Unstable { index: usize, re: f64 },
    #[error("imaginary leak {leak:.3e} exceeds budget for trace value {value:.3e}")]
    ImagLeak { leak: f64, value: f64 },
    #[error("computed trace {value:.3e} is not positive")]
    NonPositive { value: f64 },
    #[error("oracle limited to dimension 64, got {dim}")]
    OracleTooBig { dim: usize },
    #[error("Lyapunov oracle produced a complex trace (imag {imag:.3e} vs real {real:.3e})")]
    OracleComplexTrace { imag: f64, real: f64 },
    #[error("singular Kronecker system; the system is not (numerically) stable")]
    OracleSingular,
    #[error(transparent)]
    Eig(#[from] EigError),
    #[error(transparent)]
    Cauchy(#[from] CauchyError),
}

impl From<DenseError> for TraceError {
    fn from(e: DenseError) -> Self {
        match e {
            DenseError::Singular(_) => TraceError::OracleSingular,
            other => TraceError::Eig(EigError::DenseFallback(other)),
        }
    }
}

/// Energy criterion: damp the `s` smallest undamped eigenfrequencies. `G` is
/// implicitly the `2n x 2s` selector with unit columns at
/// `{0..s} u {n..n+s}` (zero-based phase indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnergyCriterion {
    pub s: usize,
}

impl EnergyCriterion {
    pub fn new(s: usize) -> Self {
        Self { s }
    }

    pub fn validate(&self, n: usize) -> Result<(), TraceError> {
        if self.s == 0 || self.s > n {
            return Err(TraceError::CriterionTooLarge { s: self.s, n });
        }
        Ok(())
    }

    /// The `2s` selected phase indices for phase dimension `n2 = 2n`.
    pub fn column_indices(&self, n2: usize) -> Vec<usize> {
        let n = n2 / 2;
        (0..self.s).chain(n..n + self.s).collect()
    }
}

#[derive(Debug, Clone, Default)]
pub struct TraceDiagnostics {
    pub eig_iterations_total: usize,
    pub max_secular_residual: f64,
    pub warnings: Vec<String>,
}

/// Sparse column representation of the selector entering the Lyapunov right
/// side: each of the `2s` columns holds a few `(row, coefficient)` entries.
/// The plain energy criterion uses unit columns of `G`; the transformed
/// variant maps them through the hyperbolic basis change (`Q^T J G`, two
/// entries per column).
#[derive(Debug, Clone)]
pub struct Selector {
    n2: usize,
    cols: Vec<Vec<(usize, Complex64)>>,
}

impl Selector {
    /// Unit columns of `G` at the criterion's phase indices.
    pub fn phase(crit: &EnergyCriterion, n2: usize) -> Self {
        let cols = crit
            .column_indices(n2)
            .into_iter()
            .map(|idx| vec![(idx, Complex64::new(1.0, 0.0))])
            .collect();
        Self { n2, cols }
    }

    /// Columns of `Q^T J G` built from the phase 2x2 blocks.
    pub fn transformed(
        q_blocks: &[[Complex64; 4]],
        crit: &EnergyCriterion,
    ) -> Self {
        let n = q_blocks.len();
        let cols = crit
            .column_indices(2 * n)
            .into_iter()
            .map(|idx| {
                let (mode, sign, top) =
                    if idx < n { (idx, 1.0, true) } else { (idx - n, -1.0, false) };
                let b = &q_blocks[mode];
                // row `idx` of Q has entries at columns (mode, n + mode)
                let (qa, qb) = if top { (b[0], b[1]) } else { (b[2], b[3]) };
                vec![(mode, sign * qa), (n + mode, sign * qb)]
            })
            .collect();
        Self { n2: 2 * n, cols }
    }

    /// Selector with unit columns at arbitrary phase indices.
    pub fn from_columns(n2: usize, indices: &[usize]) -> Self {
        let cols = indices
            .iter()
            .map(|&idx| vec![(idx, Complex64::new(1.0, 0.0))])
            .collect();
        Self { n2, cols }
    }

    pub fn width(&self) -> usize {
        self.cols.len()
    }

    /// Per-row view: for each row, the `(column, coefficient)` entries.
    fn rows(&self) -> Vec<Vec<(usize, Complex64)>> {
        let mut rows = vec![Vec::new(); self.n2];
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, coef) in col {
                rows[r].push((c, coef));
            }
        }
        rows
    }
}

/// Result of one fast trace evaluation.
#[derive(Debug, Clone)]
pub struct TraceResult {
    /// `trace(X)` (real part of the generator-level sum).
    pub value: f64,
    /// Magnitude of the imaginary part of the sum; a numerical health
    /// indicator that must stay tiny relative to `value`.
    pub imag_leak: f64,
    pub diagnostics: TraceDiagnostics,
    /// Wall time spent in the eigendecomposition chain (filled by
    /// [`trace_split`]).
    pub eig_time: std::time::Duration,
    /// Wall time spent forming `Y`, `Z` and the trace sum (filled by
    /// [`trace_split`]).
    pub trace_time: std::time::Duration,
}

/// Sequentially eigendecompose `Xi + rho_1 y_1 y_1^T + ... = S Lambda S^T`.
///
/// Returns the final eigenvalues and `S = S_1 S_2 ... S_k` as a single
/// Cauchy-like matrix `C(Xi, Lambda, P, Q)` of generator rank `k`, built with
/// [`linked_product`]. `S^{-1} = S^T` throughout.
pub fn accumulate_s(
    xi: &[Complex64],
    updates: &[(f64, Vec<Complex64>)],
    diag: &mut TraceDiagnostics,
) -> Result<(Vec<Complex64>, CauchyLike), TraceError> {
    if updates.is_empty() {
        return Err(TraceError::EmptyUpdates);
    }
    let mut cur_xi = xi.to_vec();
    let mut s_acc: Option<CauchyLike> = None;
    for (rho, y) in updates {
        let mut y_eff = match &s_acc {
            None => y.clone(),
            Some(s) => s.tr_matvec(y),
        };
        floor_weak_weights(&mut y_eff);
        let m = CSymDpr1::new(cur_xi, y_eff, *rho)?;
        let e = eig_all(&m)?;
        for p in &e.provenance {
            diag.eig_iterations_total += p.iters;
            diag.max_secular_residual = diag.max_secular_residual.max(p.secular_residual);
        }
        diag.warnings.extend(e.warnings.iter().cloned());
        let v = eigvector_generators(&m, &e)?;
        s_acc = Some(match s_acc {
            None => v,
            Some(s) => linked_product(&s, &v)?,
        });
        cur_xi = e.lambda;
    }
    Ok((cur_xi, s_acc.expect("at least one update")))
}

/// Raise update weights below `WEAK_COUPLING_REL * ||y||` to that level
/// (keeping their phase). A mode this weakly coupled moves by less than an
/// ulp under the rank-one update, so the floor is a backward perturbation of
/// relative size `tau` in the damping term while keeping every chain matrix
/// fully coupled (no eigenvalue is pinned against a pole beyond what f64 can
/// represent).
fn floor_weak_weights(y: &mut [Complex64]) {
    let norm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let floor = WEAK_COUPLING_REL * norm;
    if floor == 0.0 {
        return;
    }
    for z in y.iter_mut() {
        let m = z.norm();
        if m < floor {
            // keep the phase only while the rescale is well away from
            // overflow; (sub)normal dust gets a real floor entry
            *z = if m > floor * 1e-9 {
                *z * (floor / m)
            } else {
                Complex64::new(floor, 0.0)
            };
        }
    }
}

fn stability_check(lambda: &[Complex64]) -> Result<(f64, Option<String>), TraceError> {
    let scale = lambda.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
    let mut min_abs_re = f64::INFINITY;
    for (i, l) in lambda.iter().enumerate() {
        if l.re >= 0.0 {
            return Err(TraceError::Unstable { index: i, re: l.re });
        }
        min_abs_re = min_abs_re.min(-l.re);
    }
    if 2.0 * min_abs_re <= 1e-12 * scale {
        return Err(TraceError::Unstable {
            index: 0,
            re: -min_abs_re,
        });
    }
    let warn = if min_abs_re < 1e-8 * scale {
        Some(format!(
            "eigenvalue within {min_abs_re:.3e} of the imaginary axis; Lyapunov solution is ill-conditioned"
        ))
    } else {
        None
    };
    Ok((scale, warn))
}

/// Solution generators of `Lambda Y + Y conj(Lambda) = -W conj(W)^T` for an
/// explicit selected panel `W = S^T G`:
/// `Y = C(Lambda, -conj(Lambda), -W, conj(W))`.
pub(crate) fn lyap_y_from_w(
    lambda: &[Complex64],
    w: &[Complex64],
    two_s: usize,
    diag: &mut TraceDiagnostics,
) -> Result<CauchyLike, TraceError> {
    let n2 = lambda.len();
    debug_assert_eq!(w.len(), n2 * two_s);
    let (_, warn) = stability_check(lambda)?;
    if let Some(w) = warn {
        diag.warnings.push(w);
    }
    let neg_conj: Vec<Complex64> = lambda.iter().map(|l| -l.conj()).collect();
    let p: Vec<Complex64> = w.iter().map(|z| -z).collect();
    let q: Vec<Complex64> = w.iter().map(|z| z.conj()).collect();
    Ok(CauchyLike::new_half_plane_split(lambda.to_vec(), neg_conj, p, q, two_s)?)
}

/// Displacement-equation solution for the Lyapunov equation in the
/// `Lambda`-basis. The panel `W = S^T G_sel` is a combination of a few rows
/// of `S` per selector column (no actual multiplication), expanded from the
/// generators.
pub fn lyap_y_generators(
    lambda: &[Complex64],
    s_mat: &CauchyLike,
    sel: &Selector,
    diag: &mut TraceDiagnostics,
) -> Result<CauchyLike, TraceError> {
    let n2 = lambda.len();
    let two_s = sel.width();
    // W[j][c] = sum_{(r, coef) in column c} coef * S_{r, j}
    let mut w = vec![Complex64::new(0.0, 0.0); n2 * two_s];
    let mut row = vec![Complex64::new(0.0, 0.0); n2];
    for (c, col) in sel.cols.iter().enumerate() {
        for &(r, coef) in col {
            s_mat.expand_row(r, &mut row);
            for j in 0..n2 {
                w[j * two_s + c] += coef * row[j];
            }
        }
    }
    lyap_y_from_w(lambda, &w, two_s, diag)
}

/// Explicit generator representation of `Z = S Y` using the analytic
/// simplification `S (S^T G_sel) = G_sel`: `P_Z = [P, -G_sel]`,
/// `Q_Z = [Y^T Q, conj(W)]`. Exposed so the displacement invariant of `Z`
/// can be verified; the trace sum itself never materializes this object.
pub fn z_generators(
    s_mat: &CauchyLike,
    y_mat: &CauchyLike,
    sel: &Selector,
) -> Result<CauchyLike, TraceError> {
    let n2 = s_mat.nrows();
    let k = s_mat.rank();
    let two_s = y_mat.rank();
    let t = y_transpose_times_panel(y_mat, s_mat);
    let rank = k + two_s;
    let mut p = vec![Complex64::new(0.0, 0.0); n2 * rank];
    for i in 0..n2 {
        p[i * rank..i * rank + k].copy_from_slice(s_mat.p_row(i));
    }
    for (c, col) in sel.cols.iter().enumerate() {
        for &(r, coef) in col {
            p[r * rank + k + c] = -coef;
        }
    }
    let mut q = vec![Complex64::new(0.0, 0.0); n2 * rank];
    for j in 0..n2 {
        q[j * rank..j * rank + k].copy_from_slice(&t[j * k..(j + 1) * k]);
        for c in 0..two_s {
            q[j * rank + k + c] = y_mat.q_row(j)[c];
        }
    }
    Ok(CauchyLike::new_half_plane_split(
        s_mat.xnodes().to_vec(),
        y_mat.ynodes().to_vec(),
        p,
        q,
        rank,
    )?)
}

/// `T = Y^T Q_S`, exploiting that `Y` is Hermitian. Row-chunked and merged in
/// fixed order, so the result is independent of the thread count.
fn y_transpose_times_panel(y_mat: &CauchyLike, s_mat: &CauchyLike) -> Vec<Complex64> {
    let n2 = y_mat.nrows();
    let k = s_mat.rank();
    let two_s = y_mat.rank();
    let lambda = y_mat.xnodes();
    const CHUNK: usize = 96;
    let nchunks = n2.div_ceil(CHUNK);
    let partials: Vec<Vec<Complex64>> = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let j_lo = ci * CHUNK;
            let j_hi = (j_lo + CHUNK).min(n2);
            let mut local = vec![Complex64::new(0.0, 0.0); n2 * k];
            for j in j_lo..j_hi {
                let pj = y_mat.p_row(j); // -W row j
                let lj_conj = lambda[j].conj();
                for i in 0..=j {
                    // Y_ij = -(W W^H)_ij / (lambda_i + conj(lambda_j))
                    //      = -sum_m W_im conj(W_jm) / (...)
                    // p rows store -W, so p_i . conj(p_j) = (W W^H)_ij
                    let pi = y_mat.p_row(i);
                    let mut num = Complex64::new(0.0, 0.0);
                    for m in 0..two_s {
                        num += pi[m] * pj[m].conj();
                    }
                    let d = lambda[i] + lj_conj;
                    let yij = -num * (d.conj() / d.norm_sqr());
                    let si = s_mat.q_row(i);
                    let sj = s_mat.q_row(j);
                    if i == j {
                        for c in 0..k {
                            local[j * k + c] += yij * si[c];
                        }
                    } else {
                        let yji = yij.conj();
                        for c in 0..k {
                            local[j * k + c] += yij * si[c];
                            local[i * k + c] += yji * sj[c];
                        }
                    }
                }
            }
            local
        })
        .collect();
    let mut t = vec![Complex64::new(0.0, 0.0); n2 * k];
    for part in partials {
        for (acc, v) in t.iter_mut().zip(part) {
            *acc += v;
        }
    }
    t
}

/// Fast trace: `trace(X) = sum_ij conj(S_ij) Z_ij` with `Z = S Y` formed at
/// generator level (`P_Z = [P, -G_sel]`, `Q_Z = [Y^T Q, conj(W)]`). Cost is
/// `O((k + 2s) n^2)`.
pub fn trace_fast(
    s_mat: &CauchyLike,
    y_mat: &CauchyLike,
    sel: &Selector,
    mut diag: TraceDiagnostics,
) -> Result<TraceResult, TraceError> {
    let n2 = s_mat.nrows();
    let k = s_mat.rank();
    // per-row entries of the sparse selector block of P_Z
    let gpos = sel.rows();
    let t = y_transpose_times_panel(y_mat, s_mat); // n2 x k
    let xi = s_mat.xnodes();
    let lambda = s_mat.ynodes();

    const CHUNK: usize = 64;
    let nchunks = n2.div_ceil(CHUNK);
    let partial: Vec<Complex64> = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let i_lo = ci * CHUNK;
            let i_hi = (i_lo + CHUNK).min(n2);
            let mut acc = Complex64::new(0.0, 0.0);
            for i in i_lo..i_hi {
                let pi = s_mat.p_row(i);
                let xii = xi[i];
                let gc = &gpos[i];
                for j in 0..n2 {
                    // S_ij
                    let qj = s_mat.q_row(j);
                    let mut snum = Complex64::new(0.0, 0.0);
                    for a in 0..k {
                        snum += pi[a] * qj[a];
                    }
                    let ds = xii - lambda[j];
                    let sij = snum * (ds.conj() / ds.norm_sqr());
                    // Z_ij with the sparse -G_sel block
                    let mut znum = Complex64::new(0.0, 0.0);
                    for a in 0..k {
                        znum += pi[a] * t[j * k + a];
                    }
                    for &(c, coef) in gc {
                        znum -= coef * y_mat.q_row(j)[c];
                    }
                    let dz = xii + lambda[j].conj();
                    let zij = znum * (dz.conj() / dz.norm_sqr());
                    acc += sij.conj() * zij;
                }
            }
            acc
        })
        .collect();
    let total: Complex64 = partial.into_iter().sum();

    let value = total.re;
    let imag_leak = total.im.abs();
    if imag_leak > 1e-6 * value.abs() {
        return Err(TraceError::ImagLeak { leak: imag_leak, value });
    }
    if !(value > 0.0) {
        return Err(TraceError::NonPositive { value });
    }
    diag.warnings.dedup();
    Ok(TraceResult {
        value,
        imag_leak,
        diagnostics: diag,
        eig_time: std::time::Duration::ZERO,
        trace_time: std::time::Duration::ZERO,
    })
}

/// Trace of the internally damped system without any external damper:
/// `A = Xi` is diagonal, so `X_ii = -1/(2 Re xi_i)` on the selected indices.
pub fn trace_undamped(xi: &[Complex64], crit: &EnergyCriterion) -> Result<f64, TraceError> {
    crit.validate(xi.len() / 2)?;
    stability_check(xi)?;
    Ok(crit
        .column_indices(xi.len())
        .into_iter()
        .map(|i| -1.0 / (2.0 * xi[i].re))
        .sum())
}

/// Relative coupling weight below which a phase mode is split out of the
/// rank-one update pipeline.
///
/// Dampers couple exponentially weakly to modes localized away from them;
/// weights underflow all the way to 1e-300. Keeping such modes inside the
/// Cauchy machinery is hopeless in f64 (their eigenvalues sit closer to the
/// diagonal poles than one ulp), while zeroing them perturbs the damping
/// matrix by `rho tau ||y||^2` and the selected trace terms by order `tau^2`.
/// The split modes stay exactly diagonal and contribute the closed-form
/// undamped terms.
pub const WEAK_COUPLING_REL: f64 = 1e-6;

/// Partition of the `2n` phase coordinates into a well-coupled core (kept in
/// the rank-one pipeline) and weakly coupled modes handled in closed form.
#[derive(Debug, Clone)]
pub struct PhaseSplit {
    /// phase indices forming the coupled core, in ascending order
    pub keep: Vec<usize>,
    /// restriction of `Xi` to the core
    pub xi_core: Vec<Complex64>,
    /// restriction of the update vectors to the core
    pub ys_core: Vec<Vec<Complex64>>,
    /// selector restricted to the core (re-indexed, empty columns pruned)
    pub selector_core: Selector,
    /// closed-form trace contribution of the split-off modes
    pub trace_tail: f64,
    /// number of phase coordinates split off
    pub dropped: usize,
}

/// Split weakly coupled phase modes out of the problem. Conjugate pairs
/// `(i, n+i)` are kept or dropped together. The tail term sums
/// `-w_t / (2 Re xi_t)` over dropped coordinates, with `w_t` the squared
/// selector weight on coordinate `t`.
pub fn split_weak_modes(
    xi: &[Complex64],
    ys: &[Vec<Complex64>],
    sel: &Selector,
    tau: f64,
) -> Result<PhaseSplit, TraceError> {
    let n2 = xi.len();
    let n = n2 / 2;
    let scale: f64 = ys
        .iter()
        .flat_map(|y| y.iter())
        .map(|z| z.norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    let mut keep_pair = vec![false; n];
    for y in ys {
        for i in 0..n {
            if y[i].norm() > tau * scale || y[n + i].norm() > tau * scale {
                keep_pair[i] = true;
            }
        }
    }
    let keep: Vec<usize> = (0..n2)
        .filter(|&i| keep_pair[if i < n { i } else { i - n }])
        .collect();
    let mut pos = vec![usize::MAX; n2];
    for (new, &old) in keep.iter().enumerate() {
        pos[old] = new;
    }
    let xi_core: Vec<Complex64> = keep.iter().map(|&i| xi[i]).collect();
    let ys_core: Vec<Vec<Complex64>> = ys
        .iter()
        .map(|y| keep.iter().map(|&i| y[i]).collect())
        .collect();
    // restrict the selector; accumulate dropped weight into the tail term
    let mut tail = 0.0f64;
    let mut core_cols: Vec<Vec<(usize, Complex64)>> = Vec::new();
    for col in &sel.cols {
        let mut kept_entries = Vec::new();
        for &(r, coef) in col {
            if pos[r] != usize::MAX {
                kept_entries.push((pos[r], coef));
            } else {
                let re = xi[r].re;
                if re >= 0.0 {
                    return Err(TraceError::Unstable { index: r, re });
                }
                tail += -coef.norm_sqr() / (2.0 * re);
            }
        }
        if !kept_entries.is_empty() {
            core_cols.push(kept_entries);
        }
    }
    let dropped = n2 - keep.len();
    let selector_core = Selector { n2: keep.len(), cols: core_cols };
    Ok(PhaseSplit { keep, xi_core, ys_core, selector_core, trace_tail: tail, dropped })
}

/// Full trace evaluation through the split: core pipeline plus tail term.
pub fn trace_split(
    split: &PhaseSplit,
    viscosities: &[f64],
    diag: TraceDiagnostics,
) -> Result<TraceResult, TraceError> {
    let mut diag = diag;
    let updates: Vec<(f64, Vec<Complex64>)> = viscosities
        .iter()
        .zip(&split.ys_core)
        .map(|(&r, y)| (r, y.clone()))
        .collect();
    let t0 = std::time::Instant::now();
    let (lambda, s_mat) = accumulate_s(&split.xi_core, &updates, &mut diag)?;
    let eig_time = t0.elapsed();
    let t1 = std::time::Instant::now();
    let y_mat = lyap_y_generators(&lambda, &s_mat, &split.selector_core, &mut diag)?;
    let mut out = trace_fast(&s_mat, &y_mat, &split.selector_core, diag)?;
    out.value += split.trace_tail;
    out.eig_time = eig_time;
    out.trace_time = t1.elapsed();
    Ok(out)
}

/// Brute-force Lyapunov trace via Kronecker vectorization:
/// solves `(I (x) A + conj(A) (x) I) vec(X) = -vec(G G^T)` densely.
/// Hard-capped at dimension 64.
pub fn lyap_oracle_columns(a: &CMat, columns: &[usize]) -> Result<f64, TraceError> {
    let n2 = a.nrows();
    if n2 > 64 {
        return Err(TraceError::OracleTooBig { dim: n2 });
    }
    let dim = n2 * n2;
    // column-major vec: entry (i, j) of X sits at i + j*n2
    let mut kron = CMat::zeros(dim, dim);
    for j in 0..n2 {
        for i in 0..n2 {
            let r = i + j * n2;
            // (I (x) A): A_[i][i'] couples X_{i' j}
            for ip in 0..n2 {
                kron[(r, ip + j * n2)] += a[(i, ip)];
            }
            // (conj(A) (x) I): conj(A)[j][j'] couples X_{i j'}
            for jp in 0..n2 {
                kron[(r, i + jp * n2)] += a[(j, jp)].conj();
            }
        }
    }
    let mut rhs = vec![Complex64::new(0.0, 0.0); dim];
    for &c in columns {
        rhs[c + c * n2] = Complex64::new(-1.0, 0.0);
    }
    let x = clu_factor(kron)?.solve(&rhs);
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n2 {
        tr += x[i + i * n2];
    }
    if tr.im.abs() > 1e-10 * tr.re.abs().max(1e-300) {
        return Err(TraceError::OracleComplexTrace { imag: tr.im, real: tr.re });
    }
    Ok(tr.re)
}

/// [`lyap_oracle_columns`] with the standard energy-criterion selector.
pub fn lyap_oracle(a: &CMat, crit: &EnergyCriterion) -> Result<f64, TraceError> {
    crit.validate(a.nrows() / 2)?;
    lyap_oracle_columns(a, &crit.column_indices(a.nrows()))
}

/// Dense phase matrix `Xi + sum rho_i y_i y_i^T` for oracle comparisons.
pub fn dense_dplr(xi: &[Complex64], updates: &[(f64, Vec<Complex64>)]) -> CMat {
    let n2 = xi.len();
    let mut a = CMat::zeros(n2, n2);
    for i in 0..n2 {
        a[(i, i)] = xi[i];
    }
    for (rho, y) in updates {
        for i in 0..n2 {
            for j in 0..n2 {
                a[(i, j)] += *rho * y[i] * y[j];
            }
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cauchy::{displacement_residual, generator_scale};
    use crate::rng::SplitMix64;

    #[test]
    fn criterion_columns() {
        let crit = EnergyCriterion::new(2);
        assert_eq!(crit.column_indices(10), vec![0, 1, 5, 6]);
        assert!(crit.validate(5).is_ok());
        assert!(EnergyCriterion::new(6).validate(5).is_err());
        assert!(EnergyCriterion::new(0).validate(5).is_err());
    }

    #[test]
    fn oracle_scalar_case() {
        // A = diag(-1, -2), single selector column e_1 -> x_11 = 0.5
        let a = CMat::from_fn(2, 2, |i, j| {
            if i == j {
                Complex64::new(-(1.0 + i as f64), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let tr = lyap_oracle_columns(&a, &[0]).unwrap();
        assert!((tr - 0.5).abs() < 1e-14);
    }

    #[test]
    fn lyap_y_scalar_case() {
        // S = I, Lambda = diag(-1,-2), W = e1: Y_11 = 0.5, rest 0
        let lambda = vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)];
        let w = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
        ];
        let mut diag = TraceDiagnostics::default();
        let y = lyap_y_from_w(&lambda, &w, 1, &mut diag).unwrap();
        let d = y.dense();
        assert!((d[(0, 0)] - Complex64::new(0.5, 0.0)).norm() < 1e-14);
        assert!(d[(0, 1)].norm() < 1e-14);
        assert!(d[(1, 0)].norm() < 1e-14);
        assert!(d[(1, 1)].norm() < 1e-14);
    }

    #[test]
    fn lyap_y_rejects_unstable() {
        let lambda = vec![Complex64::new(0.5, 1.0), Complex64::new(-1.0, 0.0)];
        let w = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let mut diag = TraceDiagnostics::default();
        assert!(matches!(
            lyap_y_from_w(&lambda, &w, 1, &mut diag),
            Err(TraceError::Unstable { index: 0, .. })
        ));
    }

    /// Stable diagonal plus rank-one updates with the structure the modal
    /// pipeline produces: each update vector comes from a real geometry
    /// direction pushed through the hyperbolic 2x2 blocks, which keeps the
    /// perturbation a positive semidefinite damping term (spectrum stays in
    /// the left half-plane).
    fn random_phase_like(
        n: usize,
        k: usize,
        rng: &mut SplitMix64,
    ) -> (Vec<Complex64>, Vec<(f64, Vec<Complex64>)>) {
        let omega: Vec<f64> = (0..n).map(|_| rng.uniform(0.5, 4.0)).collect();
        let gamma: Vec<f64> = omega.iter().map(|w| rng.uniform(0.01, 0.2) * w).collect();
        let pb = crate::modal::phase_decompose(&omega, &gamma).unwrap();
        let mut updates = Vec::new();
        for _ in 0..k {
            let c: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
            for i in 0..n {
                y[i] = pb.q_blocks[i][2] * c[i];
                y[n + i] = pb.q_blocks[i][3] * c[i];
            }
            updates.push((rng.log_uniform(0.05, 20.0), y));
        }
        (pb.xi, updates)
    }

    #[test]
    fn accumulate_s_diagonalizes_and_is_orthogonal() {
        let mut rng = SplitMix64::new(211);
        for &(n, k) in &[(3usize, 1usize), (5, 2), (8, 3)] {
            let (xi, updates) = random_phase_like(n, k, &mut rng);
            let mut diag = TraceDiagnostics::default();
            let (lambda, s) = accumulate_s(&xi, &updates, &mut diag).unwrap();
            assert_eq!(s.rank(), k);
            let sd = s.dense();
            let a = dense_dplr(&xi, &updates);
            // S Lambda S^T = A
            let mut sl = sd.clone();
            for i in 0..2 * n {
                for j in 0..2 * n {
                    sl[(i, j)] = sd[(i, j)] * lambda[j];
                }
            }
            let recon = sl.mul(&sd.transpose());
            let scale = a.fro_norm();
            let mut worst = 0.0f64;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    worst = worst.max((recon[(i, j)] - a[(i, j)]).norm());
                }
            }
            assert!(worst <= 1e-9 * scale, "S Lambda S^T residual {worst} at n={n} k={k}");
            // S^T S = I
            let sts = sd.transpose().mul(&sd);
            let mut worst = 0.0f64;
            for i in 0..2 * n {
                for j in 0..2 * n {
                    let e = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((sts[(i, j)] - Complex64::new(e, 0.0)).norm());
                }
            }
            assert!(worst <= 1e-8, "S^T S - I = {worst}");
            // conjugate-closed spectrum
            let scale_l = lambda.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
            for l in &lambda {
                let nearest = lambda
                    .iter()
                    .map(|m| (m - l.conj()).norm())
                    .fold(f64::INFINITY, f64::min);
                assert!(nearest <= 1e-8 * scale_l, "spectrum not conjugate-closed");
            }
        }
    }

    #[test]
    fn y_satisfies_displacement_equation() {
        let mut rng = SplitMix64::new(223);
        let (xi, updates) = random_phase_like(5, 2, &mut rng);
        let mut diag = TraceDiagnostics::default();
        let (lambda, s) = accumulate_s(&xi, &updates, &mut diag).unwrap();
        let crit = EnergyCriterion::new(3);
        let sel = Selector::phase(&crit, 10);
        let y = lyap_y_generators(&lambda, &s, &sel, &mut diag).unwrap();
        let yd = y.dense();
        assert!(
            displacement_residual(&y, &yd) <= 1e-11 * generator_scale(&y).max(1.0),
            "Y displacement residual"
        );
        // Hermitian
        for i in 0..10 {
            for j in 0..10 {
                assert!((yd[(i, j)] - yd[(j, i)].conj()).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn z_generators_match_dense_product() {
        let mut rng = SplitMix64::new(227);
        let (xi, updates) = random_phase_like(4, 2, &mut rng);
        let mut diag = TraceDiagnostics::default();
        let (lambda, s) = accumulate_s(&xi, &updates, &mut diag).unwrap();
        let crit = EnergyCriterion::new(2);
        let sel = Selector::phase(&crit, 8);
        let y = lyap_y_generators(&lambda, &s, &sel, &mut diag).unwrap();
        let z = z_generators(&s, &y, &sel).unwrap();
        let expect = s.dense().mul(&y.dense());
        let zd = z.dense();
        let scale = expect.fro_norm().max(1.0);
        for i in 0..8 {
            for j in 0..8 {
                assert!(
                    (zd[(i, j)] - expect[(i, j)]).norm() <= 1e-10 * scale,
                    "Z mismatch at ({i},{j})"
                );
            }
        }
        assert!(
            displacement_residual(&z, &expect) <= 1e-10 * generator_scale(&z).max(1.0)
        );
    }

    #[test]
    fn trace_fast_matches_oracle_small() {
        let mut rng = SplitMix64::new(229);
        for &(n, k, s_crit) in &[(3usize, 1usize, 1usize), (5, 2, 3), (10, 3, 10), (10, 1, 4)] {
            let (xi, updates) = random_phase_like(n, k, &mut rng);
            let mut diag = TraceDiagnostics::default();
            let (lambda, s) = accumulate_s(&xi, &updates, &mut diag).unwrap();
            let crit = EnergyCriterion::new(s_crit);
            let sel = Selector::phase(&crit, 2 * n);
            let y = lyap_y_generators(&lambda, &s, &sel, &mut diag).unwrap();
            let fast = trace_fast(&s, &y, &sel, diag).unwrap();
            let dense = dense_dplr(&xi, &updates);
            let oracle = lyap_oracle(&dense, &crit).unwrap();
            let rel = (fast.value - oracle).abs() / oracle.abs();
            assert!(
                rel <= 1e-8,
                "trace mismatch: fast {} vs oracle {} (rel {rel:.2e}) n={n} k={k} s={s_crit}",
                fast.value,
                oracle
            );
            assert!(fast.value > 0.0);
            assert!(fast.imag_leak <= 1e-8 * fast.value);
        }
    }

    #[test]
    fn trace_invariant_under_damper_reorder() {
        let mut rng = SplitMix64::new(233);
        let (xi, mut updates) = random_phase_like(6, 3, &mut rng);
        let crit = EnergyCriterion::new(4);
        let sel = Selector::phase(&crit, 12);
        let run = |ups: &[(f64, Vec<Complex64>)]| {
            let mut diag = TraceDiagnostics::default();
            let (lambda, s) = accumulate_s(&xi, ups, &mut diag).unwrap();
            let y = lyap_y_generators(&lambda, &s, &sel, &mut diag).unwrap();
            trace_fast(&s, &y, &sel, diag).unwrap().value
        };
        let base = run(&updates);
        updates.rotate_left(1);
        let rotated = run(&updates);
        updates.swap(0, 1);
        let swapped = run(&updates);
        assert!((base - rotated).abs() <= 1e-10 * base.abs());
        assert!((base - swapped).abs() <= 1e-10 * base.abs());
    }

    #[test]
    fn oracle_cross_check_with_eig_route() {
        let mut rng = SplitMix64::new(239);
        for &(n, k) in &[(3usize, 1usize), (5, 2), (8, 2), (10, 3)] {
            let (xi, updates) = random_phase_like(n, k, &mut rng);
            let dense = dense_dplr(&xi, &updates);
            let crit = EnergyCriterion::new(n.min(3));
            let kron = lyap_oracle(&dense, &crit).unwrap();
            let eig = crate::verify::lyap_eig_oracle(&dense, &crit.column_indices(2 * n))
                .unwrap();
            assert!(
                (kron - eig).abs() <= 1e-10 * kron.abs(),
                "oracle disagreement at n={n} k={k}: {kron} vs {eig}"
            );
        }
    }

    #[test]
    fn oracle_rejects_oversize() {
        let a = CMat::identity(65);
        assert!(matches!(
            lyap_oracle_columns(&a, &[0]),
            Err(TraceError::OracleTooBig { dim: 65 })
        ));
    }

    #[test]
    fn undamped_trace_closed_form() {
        let xi = vec![
            Complex64::new(-0.5, 2.0),
            Complex64::new(-1.0, 3.0),
            Complex64::new(-0.5, -2.0),
            Complex64::new(-1.0, -3.0),
        ];
        let crit = EnergyCriterion::new(1);
        // selected indices 0 and 2: both have re = -0.5
        let t = trace_undamped(&xi, &crit).unwrap();
        assert!((t - 2.0).abs() < 1e-14);
    }

    /// Trace along a viscosity ray should decrease then increase through the
    /// optimum of a well-damped small system.
    #[test]
    fn trace_is_unimodal_along_ray() {
        let mut rng = SplitMix64::new(241);
        let (xi, updates) = random_phase_like(4, 1, &mut rng);
        let base_y = updates[0].1.clone();
        let crit = EnergyCriterion::new(4);
        let sel = Selector::phase(&crit, 8);
        let eval = |rho: f64| {
            let ups = vec![(rho, base_y.clone())];
            let mut diag = TraceDiagnostics::default();
            let (lambda, s) = accumulate_s(&xi, &ups, &mut diag).unwrap();
            let y = lyap_y_generators(&lambda, &s, &sel, &mut diag).unwrap();
            trace_fast(&s, &y, &sel, diag).unwrap().value
        };
        let rhos: Vec<f64> = (0..40).map(|i| 10f64.powf(-2.0 + i as f64 * 0.1)).collect();
        let vals: Vec<f64> = rhos.iter().map(|&r| eval(r)).collect();
        let min_at = vals
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        // strictly decreasing before, strictly increasing after
        for i in 0..min_at {
            assert!(vals[i] > vals[i + 1], "not decreasing at {i}");
        }
        for i in min_at..vals.len() - 1 {
            assert!(vals[i] < vals[i + 1], "not increasing at {i}");
        }
    }
}
