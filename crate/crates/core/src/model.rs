//! Vibrational system construction: mass and stiffness matrices, internal
//! damping parameters, and external damper geometry, including the benchmark
//! oscillator families used throughout the test suite.

use crate::dense::RMat;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("mass {index} is not strictly positive (value {value})")]
    NonPositiveMass { index: usize, value: f64 },
    #[error("stiffness matrix is not symmetric")]
    NotSymmetric,
    #[error("stiffness matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("mass count {masses} does not match stiffness order {order}")]
    SizeMismatch { masses: usize, order: usize },
    #[error("row count d must be even and >= 2, got {0}")]
    BadRowCount(usize),
    #[error("damper index {index} out of range for n = {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("connecting damper needs distinct indices, got {0} twice")]
    DegenerateConnector(usize),
    #[error("negative viscosity {value} for damper {index}")]
    NegativeViscosity { index: usize, value: f64 },
    #[error("damper/viscosity lists differ in length: {dampers} vs {viscosities}")]
    ListMismatch { dampers: usize, viscosities: usize },
    #[error("rayleigh damping requires beta")]
    MissingBeta,
    #[error("damping coefficient must be nonnegative, got {0}")]
    NegativeCoefficient(f64),
}

/// An `n`-mass system with diagonal mass matrix and dense symmetric positive
/// definite stiffness.
#[derive(Debug, Clone)]
pub struct MassSpringSystem {
    n: usize,
    masses: Vec<f64>,
    stiffness: RMat,
    label: String,
}

impl MassSpringSystem {
    /// Validates positivity of the masses and symmetry + positive
    /// definiteness of the stiffness (by an attempted Cholesky factorization).
    pub fn new(masses: Vec<f64>, stiffness: RMat, label: impl Into<String>) -> Result<Self, ModelError> {
        let n = masses.len();
        if stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(ModelError::SizeMismatch { masses: n, order: stiffness.nrows() });
        }
        for (i, &m) in masses.iter().enumerate() {
            if !(m > 0.0) {
                return Err(ModelError::NonPositiveMass { index: i + 1, value: m });
            }
        }
        if !stiffness.is_symmetric() {
            return Err(ModelError::NotSymmetric);
        }
        if !stiffness.is_positive_definite() {
            return Err(ModelError::NotPositiveDefinite);
        }
        Ok(Self { n, masses, stiffness, label: label.into() })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn stiffness(&self) -> &RMat {
        &self.stiffness
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Internal (material) damping model; diagonal in modal coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InternalDampingModel {
    /// `D_int = alpha * M^{1/2} sqrt(M^{-1/2} K M^{-1/2}) M^{1/2}`,
    /// i.e. `gamma_i = alpha * omega_i` in modal coordinates.
    CriticalProportional { alpha: f64 },
    /// `D_int = alpha M + beta K`, i.e. `gamma_i = alpha + beta omega_i^2`.
    Rayleigh { alpha: f64, beta: f64 },
}

impl InternalDampingModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        match *self {
            InternalDampingModel::CriticalProportional { alpha } => {
                if alpha < 0.0 {
                    return Err(ModelError::NegativeCoefficient(alpha));
                }
            }
            InternalDampingModel::Rayleigh { alpha, beta } => {
                if alpha < 0.0 {
                    return Err(ModelError::NegativeCoefficient(alpha));
                }
                if beta < 0.0 {
                    return Err(ModelError::NegativeCoefficient(beta));
                }
            }
        }
        Ok(())
    }
}

/// Geometry of one external damper. Indices are 1-based mass indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DamperSpec {
    /// Dashpot between mass `index` and the ground: `g = e_index`.
    Grounded { index: usize },
    /// Dashpot between two masses: `g = e_index - e_partner`.
    Connecting { index: usize, partner: usize },
}

impl DamperSpec {
    pub fn validate(&self, n: usize) -> Result<(), ModelError> {
        match *self {
            DamperSpec::Grounded { index } => {
                if index == 0 || index > n {
                    return Err(ModelError::IndexOutOfRange { index, n });
                }
            }
            DamperSpec::Connecting { index, partner } => {
                if index == 0 || index > n {
                    return Err(ModelError::IndexOutOfRange { index, n });
                }
                if partner == 0 || partner > n {
                    return Err(ModelError::IndexOutOfRange { index: partner, n });
                }
                if partner == index {
                    return Err(ModelError::DegenerateConnector(index));
                }
            }
        }
        Ok(())
    }
}

/// Stiffness matrix of the two-row oscillator: two chains of `d` masses, each
/// grounded at one end and attached at the other end to a common junction
/// mass which is itself grounded. `n = 2d + 1`, `2d + 3` springs.
pub fn two_row_stiffness(d: usize, k1: f64, k2: f64, k3: f64) -> Result<RMat, ModelError> {
    if d < 2 || d % 2 != 0 {
        return Err(ModelError::BadRowCount(d));
    }
    let n = 2 * d + 1;
    let mut k = RMat::zeros(n, n);
    for (block, kc) in [(0usize, k1), (d, k2)] {
        for i in 0..d {
            k[(block + i, block + i)] = 2.0 * kc;
            if i + 1 < d {
                k[(block + i, block + i + 1)] = -kc;
                k[(block + i + 1, block + i)] = -kc;
            }
        }
        // last mass of the row couples to the junction
        k[(block + d - 1, n - 1)] = -kc;
        k[(n - 1, block + d - 1)] = -kc;
    }
    k[(n - 1, n - 1)] = k1 + k2 + k3;
    Ok(k)
}

/// Mass profile options for [`build_two_row_oscillator`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassProfile {
    /// The benchmark large-oscillator mass profile:
    /// `m_i = 2000 - 4i` for `i <= d/2`, `m_i = 3i - 800` for `d/2 < i <= d`,
    /// `m_i = 500 + i` for `d < i <= 2d` and `m_{2d+1} = 1800`
    /// (indices 1-based over the whole system).
    PaperLarge,
}

/// Two-row oscillator with `n = 2d + 1` masses.
pub fn build_two_row_oscillator(
    d: usize,
    k1: f64,
    k2: f64,
    k3: f64,
    profile: MassProfile,
) -> Result<MassSpringSystem, ModelError> {
    if d < 2 || d % 2 != 0 {
        return Err(ModelError::BadRowCount(d));
    }
    let n = 2 * d + 1;
    let masses: Vec<f64> = match profile {
        MassProfile::PaperLarge => (1..=n)
            .map(|i| {
                if i <= d / 2 {
                    2000.0 - 4.0 * i as f64
                } else if i <= d {
                    3.0 * i as f64 - 800.0
                } else if i <= 2 * d {
                    500.0 + i as f64
                } else {
                    1800.0
                }
            })
            .collect(),
    };
    if let Some((idx, &m)) = masses.iter().enumerate().find(|(_, &m)| m <= 0.0) {
        return Err(ModelError::NonPositiveMass { index: idx + 1, value: m });
    }
    let k = two_row_stiffness(d, k1, k2, k3)?;
    MassSpringSystem::new(masses, k, format!("two-row d={d}"))
}

/// The 2001-mass homogeneous oscillator: a single grounded chain with
/// stiffness 100 springs through mass 1001, stiffness 150 springs below, and
/// a 300 ground spring at the bottom; masses 1000 / 1500 / 2000.
pub fn build_homogeneous_oscillator() -> MassSpringSystem {
    let n = 2001;
    let masses: Vec<f64> = (1..=n)
        .map(|i| {
            if i <= 1000 {
                1000.0
            } else if i <= 2000 {
                1500.0
            } else {
                2000.0
            }
        })
        .collect();
    let mut k = RMat::zeros(n, n);
    // spring constants along the chain: index s joins mass s and mass s+1
    // (s = 0 is the top ground spring, s = n the bottom ground spring)
    let spring = |s: usize| -> f64 {
        if s <= 1000 {
            100.0
        } else if s <= 2000 {
            150.0
        } else {
            300.0
        }
    };
    for i in 0..n {
        k[(i, i)] = spring(i) + spring(i + 1);
        if i + 1 < n {
            k[(i, i + 1)] = -spring(i + 1);
            k[(i + 1, i)] = -spring(i + 1);
        }
    }
    MassSpringSystem::new(masses, k, "homogeneous".to_string())
        .expect("homogeneous oscillator is SPD by construction")
}

/// Geometry vector `g` of a damper: `e_index` (grounded) or
/// `e_index - e_partner` (connecting).
pub fn damper_geometry(spec: &DamperSpec, n: usize) -> Result<Vec<f64>, ModelError> {
    spec.validate(n)?;
    let mut g = vec![0.0; n];
    match *spec {
        DamperSpec::Grounded { index } => g[index - 1] = 1.0,
        DamperSpec::Connecting { index, partner } => {
            g[index - 1] = 1.0;
            g[partner - 1] = -1.0;
        }
    }
    Ok(g)
}

/// External damping matrix `sum_i rho_i g_i g_i^T` (symmetric PSD, rank <= k).
pub fn assemble_external_damping(
    specs: &[DamperSpec],
    viscosities: &[f64],
    n: usize,
) -> Result<RMat, ModelError> {
    if specs.len() != viscosities.len() {
        return Err(ModelError::ListMismatch {
            dampers: specs.len(),
            viscosities: viscosities.len(),
        });
    }
    for (idx, &rho) in viscosities.iter().enumerate() {
        if rho < 0.0 {
            return Err(ModelError::NegativeViscosity { index: idx + 1, value: rho });
        }
    }
    let mut d = RMat::zeros(n, n);
    for (spec, &rho) in specs.iter().zip(viscosities) {
        let g = damper_geometry(spec, n)?;
        for i in 0..n {
            if g[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                if g[j] != 0.0 {
                    d[(i, j)] += rho * g[i] * g[j];
                }
            }
        }
    }
    Ok(d)
}
