//! One-time preprocessing of a vibrational system: generalized
//! eigendecomposition of `(K, M)`, internal damping in modal coordinates, the
//! hyperbolic 2x2 phase decomposition producing `Xi` and `Q`, and the
//! rank-one update vector for each external damper.
//!
//! This is the only `O(n^3)` stage of the pipeline; everything downstream of
//! [`PhaseBasis`] costs `O(n^2)` per viscosity evaluation.

use crate::dense::{sym_eig, DenseError, RMat};
use crate::model::{DamperSpec, InternalDampingModel, MassSpringSystem, ModelError};
use crate::sqrt_principal_branch;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModalError {
    #[error("stiffness is not positive definite in modal solve (eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("mode {mode} is exactly critically damped (gamma^2 = 4 omega^2)")]
    CriticallyDamped { mode: usize },
    #[error("omega[{0}] is not strictly positive")]
    NonPositiveFrequency(usize),
    #[error("omega/gamma length mismatch: {omega} vs {gamma}")]
    LengthMismatch { omega: usize, gamma: usize },
    #[error(transparent)]
    Dense(#[from] DenseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Modal basis: `Phi^T M Phi = I`, `Phi^T K Phi = diag(omega^2)`,
/// frequencies ascending.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    pub phi: RMat,
    pub omega: Vec<f64>,
}

/// Diagonal of the internal damping matrix in modal coordinates.
#[derive(Debug, Clone)]
pub struct GammaDiag {
    pub gamma: Vec<f64>,
}

/// Phase-space decomposition of the undamped linearized system.
///
/// `xi` holds the `2n` phase eigenvalues: slot `i` carries the root of
/// `lambda^2 + gamma_i lambda + omega_i^2 = 0` with positive imaginary part
/// (larger real part if both roots are real), slot `n + i` its partner.
/// `q_blocks[i]` stores the four nonzero entries
/// `(Q_ii, Q_{i,n+i}, Q_{n+i,i}, Q_{n+i,n+i})` of the hyperbolically
/// normalized transformation, so that `Q^T J Q = I` with `J = diag(I, -I)`.
#[derive(Debug, Clone)]
pub struct PhaseBasis {
    pub xi: Vec<Complex64>,
    pub q_blocks: Vec<[Complex64; 4]>,
    pub warnings: Vec<String>,
}

impl PhaseBasis {
    pub fn n(&self) -> usize {
        self.q_blocks.len()
    }
}

/// Generalized eigendecomposition of `(K, M)` with diagonal `M`.
pub fn modal_decompose(sys: &MassSpringSystem) -> Result<ModalBasis, ModalError> {
    let n = sys.n();
    let minv_sqrt: Vec<f64> = sys.masses().iter().map(|m| 1.0 / m.sqrt()).collect();
    // W = M^{-1/2} K M^{-1/2}
    let mut w = RMat::zeros(n, n);
    for i in 0..n {
        let krow = sys.stiffness().row(i);
        let wrow = w.row_mut(i);
        for j in 0..n {
            wrow[j] = minv_sqrt[i] * krow[j] * minv_sqrt[j];
        }
    }
    let (evals, u) = sym_eig(&w)?;
    if let Some(&bad) = evals.iter().find(|&&x| x <= 0.0) {
        return Err(ModalError::NotPositiveDefinite(bad));
    }
    let omega: Vec<f64> = evals.iter().map(|x| x.sqrt()).collect();
    // Phi = M^{-1/2} U, with column signs canonicalized (largest-magnitude
    // entry positive) so repeated runs produce the same basis.
    let mut phi = RMat::zeros(n, n);
    for j in 0..n {
        let mut best = 0usize;
        let mut best_abs = 0.0f64;
        for i in 0..n {
            let a = u[(i, j)].abs();
            if a > best_abs {
                best_abs = a;
                best = i;
            }
        }
        let sign = if u[(best, j)] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            phi[(i, j)] = sign * minv_sqrt[i] * u[(i, j)];
        }
    }
    Ok(ModalBasis { phi, omega })
}

/// Modal internal damping diagonal.
pub fn internal_damping_gamma(model: &InternalDampingModel, omega: &[f64]) -> GammaDiag {
    let gamma = match *model {
        InternalDampingModel::CriticalProportional { alpha } => {
            omega.iter().map(|w| alpha * w).collect()
        }
        InternalDampingModel::Rayleigh { alpha, beta } => {
            omega.iter().map(|w| alpha + beta * w * w).collect()
        }
    };
    GammaDiag { gamma }
}

/// Relative gap to the critically damped configuration below which a mode is
/// flagged as numerically fragile.
const NEAR_CRITICAL_TOL: f64 = 1e-8;

/// Solve the `n` independent 2x2 hyperbolic eigenproblems.
pub fn phase_decompose(omega: &[f64], gamma: &[f64]) -> Result<PhaseBasis, ModalError> {
    let n = omega.len();
    if gamma.len() != n {
        return Err(ModalError::LengthMismatch { omega: n, gamma: gamma.len() });
    }
    let mut xi = vec![Complex64::new(0.0, 0.0); 2 * n];
    let mut q_blocks = vec![[Complex64::new(0.0, 0.0); 4]; n];
    let mut warnings = Vec::new();
    for i in 0..n {
        let w = omega[i];
        let g = gamma[i];
        if !(w > 0.0) {
            return Err(ModalError::NonPositiveFrequency(i));
        }
        let disc = g * g - 4.0 * w * w;
        if disc == 0.0 {
            return Err(ModalError::CriticallyDamped { mode: i + 1 });
        }
        if disc.abs() <= NEAR_CRITICAL_TOL * 4.0 * w * w {
            warnings.push(format!(
                "mode {} is nearly critically damped (|gamma^2 - 4 omega^2| = {:.3e})",
                i + 1,
                disc.abs()
            ));
        }
        let s = sqrt_principal_branch(Complex64::new(disc, 0.0));
        let lam_p = (Complex64::new(-g, 0.0) + s) * 0.5;
        let lam_m = (Complex64::new(-g, 0.0) - s) * 0.5;
        xi[i] = lam_p;
        xi[n + i] = lam_m;
        // eigenvector (1, lambda/omega), scaled so v^T J v = 1
        let mut col = [Complex64::new(0.0, 0.0); 2];
        let store = |lam: Complex64, out: &mut [Complex64; 2]| {
            let v1 = lam / w;
            let jnorm = Complex64::new(1.0, 0.0) - v1 * v1;
            let scale = Complex64::new(1.0, 0.0) / sqrt_principal_branch(jnorm);
            out[0] = scale;
            out[1] = v1 * scale;
        };
        store(lam_p, &mut col);
        let (qp0, qp1) = (col[0], col[1]);
        store(lam_m, &mut col);
        let (qm0, qm1) = (col[0], col[1]);
        q_blocks[i] = [qp0, qm0, qp1, qm1];
    }
    Ok(PhaseBasis { xi, q_blocks, warnings })
}

/// Rank-one update vector of one damper in the phase basis:
/// `y = Q_{n+1:2n,:}^T (Phi^T g)`. Uses the block sparsity of `Q`, so the
/// cost is `O(n)` per damper.
pub fn rank_update_vectors(
    phase: &PhaseBasis,
    modal: &ModalBasis,
    specs: &[DamperSpec],
) -> Result<Vec<Vec<Complex64>>, ModalError> {
    let n = phase.n();
    let mut out = Vec::with_capacity(specs.len());
    for spec in specs {
        spec.validate(n)?;
        // c = Phi^T g: a row of Phi (grounded) or difference of two rows
        let c: Vec<f64> = match *spec {
            DamperSpec::Grounded { index } => modal.phi.row(index - 1).to_vec(),
            DamperSpec::Connecting { index, partner } => {
                let a = modal.phi.row(index - 1);
                let b = modal.phi.row(partner - 1);
                a.iter().zip(b).map(|(x, y)| x - y).collect()
            }
        };
        let mut y = vec![Complex64::new(0.0, 0.0); 2 * n];
        for m in 0..n {
            let b = &phase.q_blocks[m];
            y[m] = b[2] * c[m]; // Q_{n+m, m}
            y[n + m] = b[3] * c[m]; // Q_{n+m, n+m}
        }
        out.push(y);
    }
    Ok(out)
}

/// Dense phase matrix `A = [[0, Omega], [-Omega, -(Gamma + Phi^T D_ext Phi)]]`
/// of the damped linearization. Verification and small-scale use only.
pub fn dense_phase_matrix(
    modal: &ModalBasis,
    gamma: &GammaDiag,
    specs: &[DamperSpec],
    viscosities: &[f64],
) -> Result<RMat, ModalError> {
    let n = modal.omega.len();
    let dext = crate::model::assemble_external_damping(specs, viscosities, n)?;
    // Phi^T D_ext Phi
    let mut pdp = RMat::zeros(n, n);
    for a in 0..n {
        for b in 0..n {
            if dext[(a, b)] == 0.0 {
                continue;
            }
            let v = dext[(a, b)];
            for i in 0..n {
                let pai = modal.phi[(a, i)] * v;
                for j in 0..n {
                    pdp[(i, j)] += pai * modal.phi[(b, j)];
                }
            }
        }
    }
    let mut m = RMat::zeros(2 * n, 2 * n);
    for i in 0..n {
        m[(i, n + i)] = modal.omega[i];
        m[(n + i, i)] = -modal.omega[i];
        for j in 0..n {
            m[(n + i, n + j)] = -pdp[(i, j)];
        }
        m[(n + i, n + i)] -= gamma.gamma[i];
    }
    Ok(m)
}
