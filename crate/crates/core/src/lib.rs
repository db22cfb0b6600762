//! Computation of optimal external damper viscosities for linear vibrational
//! systems `M x'' + D x' + K x = 0`.
//!
//! The damping criterion is the total average energy of the system, equal to
//! `trace(X)` where `X` solves the Lyapunov equation `A X + X A* = -G G^T` for
//! the linearized phase matrix `A`. After a one-time `O(n^3)` modal
//! decomposition, every trace evaluation runs in `O(n^2)` by chaining
//! eigendecompositions of complex symmetric diagonal-plus-rank-one matrices
//! whose eigenvector matrices are Cauchy-like, and by multiplying linked
//! Cauchy-like matrices at the generator level.
//!
//! Module map:
//! - [`model`]: mass/stiffness assembly and damper geometry,
//! - [`modal`]: modal and phase-space decompositions,
//! - [`csymdpr1`]: the structured eigensolver,
//! - [`cauchy`]: implicit Cauchy-like matrix algebra,
//! - [`trace`]: fast trace evaluation and the brute-force Lyapunov oracle,
//! - [`optimize`]: viscosity optimization and position sweeps,
//! - [`verify`]: randomized agreement checks between the fast path and the
//!   oracle.

pub mod cauchy;
pub mod csymdpr1;
pub mod dense;
pub mod model;
pub mod modal;
pub mod optimize;
pub mod rng;
pub mod trace;
pub mod verify;

pub use num_complex::Complex64;

/// Working-precision unit roundoff.
pub const EPS: f64 = f64::EPSILON;

/// Branch-fixed complex square root: the root with nonnegative real part,
/// ties broken toward nonnegative imaginary part. Algebraic form (no polar
/// decomposition), cheap enough for inner loops.
pub fn sqrt_principal_branch(z: Complex64) -> Complex64 {
    let r = z.re.hypot(z.im);
    if r == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let a = (0.5 * (r + z.re)).sqrt();
    if a > 0.0 {
        // (a + ib)^2 = z  =>  b = im / (2a)
        Complex64::new(a, z.im / (2.0 * a))
    } else {
        // negative real axis: both roots are imaginary; take the upper one
        Complex64::new(0.0, (0.5 * (r - z.re)).sqrt())
    }
}

/// `1/z` via conjugate over squared modulus (branch-free, fast; fine away
/// from overflow/underflow extremes).
#[inline]
pub(crate) fn cinv(z: Complex64) -> Complex64 {
    let s = 1.0 / (z.re * z.re + z.im * z.im);
    Complex64::new(z.re * s, -z.im * s)
}
