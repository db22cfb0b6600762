//! Randomized agreement checks between the fast generator-level trace and
//! the brute-force Kronecker oracle, plus a second, eigendecomposition-based
//! Lyapunov oracle used to cross-check the first at very small sizes.

use crate::dense::{clu_factor, complex_eigenvalues, CMat, RMat};
use crate::modal::{internal_damping_gamma, modal_decompose, phase_decompose, rank_update_vectors};
use crate::model::{DamperSpec, InternalDampingModel, MassSpringSystem};
use crate::rng::SplitMix64;
use crate::trace::{
    accumulate_s, dense_dplr, lyap_oracle_columns, lyap_y_generators, trace_fast, EnergyCriterion,
    Selector, TraceDiagnostics,
};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("case {case} (n={n}, k={k}, s={s}) failed: {message}")]
    Case { case: usize, n: usize, k: usize, s: usize, message: String },
}

/// One oracle-equivalence sample.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub n: usize,
    pub k: usize,
    pub s: usize,
    pub trace_fast: f64,
    pub trace_oracle: f64,
    pub rel_err: f64,
    pub imag_leak_rel: f64,
}

/// Random grounded spring chain with occasional long-range extra springs;
/// always symmetric positive definite.
pub fn random_chain_system(n: usize, rng: &mut SplitMix64) -> MassSpringSystem {
    let masses: Vec<f64> = (0..n).map(|_| rng.log_uniform(100.0, 2000.0)).collect();
    let springs: Vec<f64> = (0..=n).map(|_| rng.log_uniform(50.0, 500.0)).collect();
    let mut k = RMat::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = springs[i] + springs[i + 1];
        if i + 1 < n {
            k[(i, i + 1)] = -springs[i + 1];
            k[(i + 1, i)] = -springs[i + 1];
        }
    }
    if n >= 4 && rng.next_f64() < 0.4 {
        let i = rng.int_in(0, n - 3);
        let j = rng.int_in(i + 2, n - 1);
        let kc = rng.log_uniform(10.0, 100.0);
        k[(i, i)] += kc;
        k[(j, j)] += kc;
        k[(i, j)] -= kc;
        k[(j, i)] -= kc;
    }
    MassSpringSystem::new(masses, k, format!("random chain n={n}"))
        .expect("spring assembly is SPD")
}

fn random_internal(rng: &mut SplitMix64) -> InternalDampingModel {
    if rng.next_f64() < 0.5 {
        InternalDampingModel::CriticalProportional { alpha: rng.uniform(0.01, 0.1) }
    } else {
        InternalDampingModel::Rayleigh {
            alpha: rng.uniform(0.002, 0.05),
            beta: rng.uniform(0.0005, 0.01),
        }
    }
}

fn random_dampers(n: usize, k: usize, rng: &mut SplitMix64) -> Vec<DamperSpec> {
    (0..k)
        .map(|_| {
            if n >= 2 && rng.next_f64() < 0.4 {
                let i = rng.int_in(1, n);
                let mut j = rng.int_in(1, n);
                while j == i {
                    j = rng.int_in(1, n);
                }
                DamperSpec::Connecting { index: i, partner: j }
            } else {
                DamperSpec::Grounded { index: rng.int_in(1, n) }
            }
        })
        .collect()
}

/// Run one randomized system end to end and compare the fast trace against
/// the Kronecker oracle.
fn run_case(case: usize, n: usize, seed: u64) -> Result<OracleCase, VerifyError> {
    let mut rng = SplitMix64::new(seed ^ (case as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let k = rng.int_in(1, 3);
    let s = rng.int_in(1, n);
    let fail = |message: String| VerifyError::Case { case, n, k, s, message };

    let sys = random_chain_system(n, &mut rng);
    let modal = modal_decompose(&sys).map_err(|e| fail(e.to_string()))?;
    let internal = random_internal(&mut rng);
    let gamma = internal_damping_gamma(&internal, &modal.omega);
    let phase = phase_decompose(&modal.omega, &gamma.gamma).map_err(|e| fail(e.to_string()))?;
    let specs = random_dampers(n, k, &mut rng);
    let ys = rank_update_vectors(&phase, &modal, &specs).map_err(|e| fail(e.to_string()))?;
    let updates: Vec<(f64, Vec<Complex64>)> = ys
        .into_iter()
        .map(|y| (rng.log_uniform(0.1, 500.0), y))
        .collect();

    let crit = EnergyCriterion::new(s);
    let sel = Selector::phase(&crit, 2 * n);
    let mut diag = TraceDiagnostics::default();
    let (lambda, s_mat) =
        accumulate_s(&phase.xi, &updates, &mut diag).map_err(|e| fail(e.to_string()))?;
    let y_mat =
        lyap_y_generators(&lambda, &s_mat, &sel, &mut diag).map_err(|e| fail(e.to_string()))?;
    let fast = trace_fast(&s_mat, &y_mat, &sel, diag).map_err(|e| fail(e.to_string()))?;

    let dense = dense_dplr(&phase.xi, &updates);
    let oracle = lyap_oracle_columns(&dense, &crit.column_indices(2 * n))
        .map_err(|e| fail(e.to_string()))?;
    let rel_err = (fast.value - oracle).abs() / oracle.abs();
    Ok(OracleCase {
        n,
        k,
        s,
        trace_fast: fast.value,
        trace_oracle: oracle,
        rel_err,
        imag_leak_rel: fast.imag_leak / fast.value.abs(),
    })
}

/// Size schedule for `count` randomized cases: full sweeps over
/// `lo..=hi` first (every size gets covered), the remainder drawn from the
/// lower half where the Kronecker oracle is cheap.
pub fn size_schedule(count: usize, lo: usize, hi: usize, seed: u64) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let sweep: Vec<usize> = (lo..=hi).collect();
    for rep in 0..2 {
        for &n in &sweep {
            if out.len() < count {
                out.push(n);
            }
            let _ = rep;
        }
    }
    let mut rng = SplitMix64::new(seed ^ 0xabcd_1234);
    let cap = (lo + (hi - lo) * 2 / 3).max(lo + 1);
    while out.len() < count {
        out.push(rng.int_in(lo, cap));
    }
    out
}

/// Run the whole suite (parallel over cases; each case is seeded
/// independently, so results do not depend on the thread count).
pub fn run_oracle_suite(schedule: &[usize], seed: u64) -> Result<Vec<OracleCase>, VerifyError> {
    schedule
        .par_iter()
        .enumerate()
        .map(|(case, &n)| run_case(case, n, seed))
        .collect()
}

/// Scaling-benchmark family: two-row geometry with uniform masses and three
/// dampers laid out like the large-oscillator configuration, scaled with the
/// row length.
pub fn bench_family(d: usize) -> (MassSpringSystem, Vec<DamperSpec>) {
    let k = crate::model::two_row_stiffness(d, 100.0, 150.0, 200.0).expect("even d");
    let n = 2 * d + 1;
    let sys = MassSpringSystem::new(vec![1000.0; n], k, format!("bench two-row d={d}"))
        .expect("uniform chain is SPD");
    let i1 = (d / 16).max(1);
    let i2 = d + (3 * d / 16).max(1);
    let i3 = (11 * d / 40).max(1);
    let specs = vec![
        DamperSpec::Grounded { index: i1 },
        DamperSpec::Grounded { index: i2 },
        DamperSpec::Connecting { index: i3, partner: i3 + d / 2 },
    ];
    (sys, specs)
}

/// Second Lyapunov oracle: eigendecompose `A = V diag(lambda) V^{-1}` with
/// the dense QR eigensolver plus inverse iteration, transform the equation,
/// solve elementwise, transform back. Small sizes only.
pub fn lyap_eig_oracle(a: &CMat, columns: &[usize]) -> Result<f64, String> {
    let n = a.nrows();
    let lambda = complex_eigenvalues(a).map_err(|e| e.to_string())?;
    // eigenvectors by one LU-backed inverse-iteration step each
    let mut v = CMat::zeros(n, n);
    for (j, &l) in lambda.iter().enumerate() {
        let scale = l.norm().max(1.0);
        let shift = l + Complex64::new(1e-8 * scale, 1e-8 * scale);
        let mut shifted = a.clone();
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let lu = clu_factor(shifted).map_err(|e| e.to_string())?;
        let b: Vec<Complex64> =
            (0..n).map(|i| Complex64::new(1.0, (i as f64 + 1.0) * 0.1)).collect();
        let mut x = lu.solve(&b);
        let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut x {
            *z /= norm;
        }
        let x2 = lu.solve(&x);
        let norm = x2.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for i in 0..n {
            v[(i, j)] = x2[i] / norm;
        }
    }
    // B = V^{-1} G: columns of V^{-1} at the selector indices
    let lu = clu_factor(v.clone()).map_err(|e| e.to_string())?;
    let mut b = CMat::zeros(n, columns.len());
    for (c, &idx) in columns.iter().enumerate() {
        let mut e = vec![Complex64::new(0.0, 0.0); n];
        e[idx] = Complex64::new(1.0, 0.0);
        let col = lu.solve(&e);
        for i in 0..n {
            b[(i, c)] = col[i];
        }
    }
    // T_ij = -(B B^H)_ij / (lambda_i + conj(lambda_j)); X = V T V^H
    let mut t = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut m = Complex64::new(0.0, 0.0);
            for c in 0..columns.len() {
                m += b[(i, c)] * b[(j, c)].conj();
            }
            t[(i, j)] = -m / (lambda[i] + lambda[j].conj());
        }
    }
    let vt = v.mul(&t);
    let mut tr = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for jj in 0..n {
            tr += vt[(i, jj)] * v[(i, jj)].conj();
        }
    }
    if tr.im.abs() > 1e-8 * tr.re.abs().max(1e-300) {
        return Err(format!("eig-oracle trace has imaginary part {:.3e}", tr.im));
    }
    Ok(tr.re)
}
