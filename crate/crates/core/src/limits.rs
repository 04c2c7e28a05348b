//! Drift and diffusion coefficients of the limit process.
//!
//! For a balanced profile the position converges to the diffusion with
//! generator `(d, ∇) + Σ_ij A_ij ∂_ij`, where
//!
//! ```text
//! A_ij = (1/N) ∫ c²(θ) s_i(θ) s_j(θ) μ(dθ),   d_i = (1/N) ∫ c1(θ) s_i(θ) μ(dθ)
//! ```
//!
//! plus atomic contributions. `d` is the physical drift `+E[c1 s]`, the mean
//! velocity of the slow part; the `S = -(s, ∇)` convention of the operator
//! lab gives `-d`, which is carried along as `paper_sign_drift`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Result, RevolveError};
use crate::profiles::{balance_on, SwitchingNodes, VelocityProfile};
use crate::simulator::DiscreteDirection;
use crate::sphere::{direction_from_angles, norm, QuadratureGrid};
use crate::stats::GaussianSpec;

/// Balance residual above which no diffusion limit is reported.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusionLimit {
    pub dimension: usize,
    pub drift: Vec<f64>,
    #[serde(rename = "A")]
    pub diffusion: Vec<Vec<f64>>,
    /// `-drift`, the coefficient of `∇` when `S = -(s, ∇)`.
    pub paper_sign_drift: Vec<f64>,
}

impl DiffusionLimit {
    pub fn new(drift: Vec<f64>, diffusion: Vec<Vec<f64>>) -> Result<Self> {
        let n = drift.len();
        if diffusion.len() != n || diffusion.iter().any(|r| r.len() != n) {
            return Err(RevolveError::DimensionMismatch {
                expected: n,
                found: diffusion.len(),
            });
        }
        for i in 0..n {
            for j in 0..i {
                if (diffusion[i][j] - diffusion[j][i]).abs() > 1e-12 {
                    return Err(RevolveError::Domain(format!(
                        "diffusion matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let min_eig = min_eigenvalue(&diffusion);
        if min_eig < -1e-10 {
            return Err(RevolveError::Domain(format!(
                "diffusion matrix has negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(DiffusionLimit {
            dimension: n,
            paper_sign_drift: drift.iter().map(|d| -d).collect(),
            drift,
            diffusion,
        })
    }
}

pub(crate) fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 0 {
        return 0.0;
    }
    let matrix = DMatrix::from_fn(n, n, |i, j| 0.5 * (m[i][j] + m[j][i]));
    matrix.symmetric_eigenvalues().min()
}

fn squared(values: &[f64]) -> Vec<f64> {
    values.iter().map(|c| c * c).collect()
}

/// `A` and `d` by quadrature over the grid (plus atoms).
pub fn limit_coefficients(profile: &VelocityProfile, grid: &QuadratureGrid) -> Result<DiffusionLimit> {
    let nodes = SwitchingNodes::new(profile, grid)?;
    let balance = balance_on(&nodes, BALANCE_TOLERANCE);
    if !balance.satisfied {
        return Err(RevolveError::Solvability {
            norm: balance.residual_norm,
            residual: balance.residual_vector,
        });
    }
    let diffusion = nodes.second_moment(&squared(nodes.c()));
    let drift = nodes.first_moment(nodes.c1());
    DiffusionLimit::new(drift, diffusion)
}

/// Count-normalized analog for a discrete switching law: a proper Markov
/// chain on finitely many directions, with `A = Σ_k p_k c_k² s_k s_k^T` and
/// `d = Σ_k p_k c1_k s_k`.
pub fn discrete_limit_coefficients(
    profile: &VelocityProfile,
    law: &[DiscreteDirection],
) -> Result<DiffusionLimit> {
    let n = profile.dimension();
    let mut balance = vec![0.0; n];
    let mut drift = vec![0.0; n];
    let mut diffusion = vec![vec![0.0; n]; n];
    for choice in law {
        if choice.angles.dimension() != n {
            return Err(RevolveError::DimensionMismatch {
                expected: n,
                found: choice.angles.dimension(),
            });
        }
        let s = direction_from_angles(&choice.angles)?;
        let s = s.components();
        let (c, c1) = profile.speeds_at(&choice.angles);
        let p = choice.probability;
        for i in 0..n {
            balance[i] += p * c * s[i];
            drift[i] += p * c1 * s[i];
            for j in 0..n {
                diffusion[i][j] += p * c * c * s[i] * s[j];
            }
        }
    }
    let residual_norm = norm(&balance);
    if residual_norm > BALANCE_TOLERANCE {
        return Err(RevolveError::Solvability {
            residual: balance,
            norm: residual_norm,
        });
    }
    DiffusionLimit::new(drift, diffusion)
}

/// Law of the limit process at time `t` started from `x0`: mean
/// `x0 + d t`, covariance `2 A t`.
pub fn gaussian_law_at(limit: &DiffusionLimit, t: f64, x0: &[f64]) -> Result<GaussianSpec> {
    if !(t > 0.0) {
        return Err(RevolveError::Domain(format!("time must be positive, got {t}")));
    }
    if x0.len() != limit.dimension {
        return Err(RevolveError::DimensionMismatch {
            expected: limit.dimension,
            found: x0.len(),
        });
    }
    let mean = x0.iter().zip(&limit.drift).map(|(x, d)| x + d * t).collect();
    let covariance = limit
        .diffusion
        .iter()
        .map(|row| row.iter().map(|a| 2.0 * a * t).collect())
        .collect();
    GaussianSpec::new(mean, covariance)
}
