//! The generator algebra of the random evolution, realized on a quadrature
//! grid over the switching variable.
//!
//! `Π` averages over the sphere, `Q = Π - I`, the potential operator is
//! `R0 = Π - I` as well (it inverts `Q` on the range of `Q`), and
//! `S(θ) = -(s(θ), ∇)`. The minus sign of `S` is kept so the identities read
//! as in the classical singular-perturbation scheme; the limits module
//! converts to the physical drift sign.
//!
//! Fields of `θ` that also depend on `x` through derivatives of the test
//! function are carried in lifted form ([`LiftedField`]): one coefficient
//! vector over the nodes per mixed partial `∂^α φ`. Every operator above acts
//! linearly on the coefficients, so the whole solution `φ1, φ2, L0` is
//! computed exactly in coefficient space and only evaluated at `x` at the end.

mod lifted;
mod test_function;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use lifted::LiftedField;
pub use test_function::{gaussian_probes, TestFunction};

use crate::error::{Result, RevolveError};
use crate::profiles::{balance_on, SwitchingNodes, VelocityProfile};
use crate::sphere::{direction_from_angles, AngleVector, QuadratureGrid};
use crate::stats::{fit_power_law, RateFit};

/// Balance residual above which [`solve_perturbation`] refuses to proceed.
pub const SOLVABILITY_TOLERANCE: f64 = 1e-9;

/// `ε = 10^{-1}, 10^{-1.5}, ..., 10^{-3}`.
pub fn residual_eps_ladder() -> Vec<f64> {
    (0..5).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect()
}

/// Values of a function of `θ` on a node set (at a fixed spatial point).
#[derive(Debug, Clone)]
pub struct ThetaField {
    support: Arc<SwitchingNodes>,
    values: Vec<f64>,
}

impl ThetaField {
    pub fn new(support: Arc<SwitchingNodes>, values: Vec<f64>) -> Result<Self> {
        if values.len() != support.len() {
            return Err(RevolveError::DimensionMismatch {
                expected: support.len(),
                found: values.len(),
            });
        }
        Ok(ThetaField { support, values })
    }

    /// Tabulates `f(s(θ_k))` on the nodes.
    pub fn from_fn(support: Arc<SwitchingNodes>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..support.len()).map(|k| f(support.direction(k))).collect();
        ThetaField { support, values }
    }

    pub fn constant(support: Arc<SwitchingNodes>, value: f64) -> Self {
        let values = vec![value; support.len()];
        ThetaField { support, values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> &Arc<SwitchingNodes> {
        &self.support
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(&self.values)
    }

    fn with_values(&self, values: Vec<f64>) -> Self {
        ThetaField {
            support: Arc::clone(&self.support),
            values,
        }
    }
}

pub(crate) fn sup_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `Π f`: weighted average over the nodes.
///
/// Computed as `f_0 + Σ w_k (f_k - f_0)` so that constants are fixed
/// exactly. With atoms the node weights carry the extra `w/N` mass and `Π`
/// is no longer idempotent.
pub(crate) fn average(weights: &[f64], mass: f64, values: &[f64]) -> f64 {
    let Some(&f0) = values.first() else {
        return 0.0;
    };
    f0 * mass + weights.iter().zip(values).map(|(w, f)| w * (f - f0)).sum::<f64>()
}

pub(crate) fn mass(support: &SwitchingNodes) -> f64 {
    if support.has_atoms() {
        support.weights().iter().sum()
    } else {
        1.0
    }
}

pub fn project_pi(f: &ThetaField) -> f64 {
    average(f.support.weights(), mass(&f.support), &f.values)
}

/// `Q f = Π f - f`.
pub fn apply_q(f: &ThetaField) -> ThetaField {
    let p = project_pi(f);
    f.with_values(f.values.iter().map(|v| p - v).collect())
}

/// `R0 f = Π f - f`. Inverts `Q` on its range and annihilates constants.
pub fn apply_r0(f: &ThetaField) -> ThetaField {
    apply_q(f)
}

/// `S(θ)φ(x) = -(s(θ), ∇φ(x))`.
pub fn apply_s(theta: &AngleVector, phi: &TestFunction, x: &[f64]) -> Result<f64> {
    let s = direction_from_angles(theta)?;
    if phi.dimension() != s.dimension() || x.len() != s.dimension() {
        return Err(RevolveError::DimensionMismatch {
            expected: s.dimension(),
            found: phi.dimension().min(x.len()),
        });
    }
    let grad = phi.gradient(x);
    Ok(-s.components().iter().zip(&grad).map(|(s, g)| s * g).sum::<f64>())
}

/// Sup-norm residuals of the projector identities on one field.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IdentityResiduals {
    /// `|ΠΠf - Πf|`
    pub pi_idempotent: f64,
    /// `sup |QΠf|`
    pub q_after_pi: f64,
    /// `|ΠQf|`
    pub pi_after_q: f64,
    /// `sup |R0 Q f - (f - Πf)|`
    pub r0_inverts_q: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.pi_idempotent
            .max(self.q_after_pi)
            .max(self.pi_after_q)
            .max(self.r0_inverts_q)
    }

    fn merge(self, other: Self) -> Self {
        IdentityResiduals {
            pi_idempotent: self.pi_idempotent.max(other.pi_idempotent),
            q_after_pi: self.q_after_pi.max(other.q_after_pi),
            pi_after_q: self.pi_after_q.max(other.pi_after_q),
            r0_inverts_q: self.r0_inverts_q.max(other.r0_inverts_q),
        }
    }
}

pub fn identity_residuals(f: &ThetaField) -> IdentityResiduals {
    let pf = project_pi(f);
    let pi_field = ThetaField::constant(Arc::clone(&f.support), pf);
    let qf = apply_q(f);
    let r0qf = apply_r0(&qf);
    IdentityResiduals {
        pi_idempotent: (project_pi(&pi_field) - pf).abs(),
        q_after_pi: apply_q(&pi_field).sup_norm(),
        pi_after_q: project_pi(&qf).abs(),
        r0_inverts_q: r0qf
            .values
            .iter()
            .zip(&f.values)
            .map(|(r, v)| (r - (v - pf)).abs())
            .fold(0.0, f64::max),
    }
}

/// Worst identity residuals over `count` fields with i.i.d. uniform
/// `[-1, 1]` node values.
pub fn random_identity_check(grid: &QuadratureGrid, count: usize, seed: u64) -> IdentityResiduals {
    let support = Arc::new(SwitchingNodes::from_grid(grid));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let values = (0..support.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            identity_residuals(&ThetaField {
                support: Arc::clone(&support),
                values,
            })
        })
        .fold(IdentityResiduals::default(), IdentityResiduals::merge)
}

/// Coefficients of an assembled limit generator
/// `L0 = Σ_i first_order[i] ∂_i + Σ_ij second_order[i][j] ∂_ij`.
///
/// `first_order` is in the `S = -(s, ∇)` convention, i.e. `-E[c1 s]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorCoefficients {
    pub first_order: Vec<f64>,
    pub second_order: Vec<Vec<f64>>,
}

impl GeneratorCoefficients {
    fn from_lifted(field: &LiftedField) -> Self {
        let n = field.dimension();
        let mut first_order = vec![0.0; n];
        let mut second_order = vec![vec![0.0; n]; n];
        for (alpha, coeffs) in field.terms() {
            // Π-fields are constant over the nodes
            let value = coeffs[0];
            match alpha {
                [i] => first_order[*i as usize] += value,
                [i, j] => {
                    let (i, j) = (*i as usize, *j as usize);
                    if i == j {
                        second_order[i][i] += value;
                    } else {
                        // the sorted slot (i, j) carries both ∂_ij and ∂_ji
                        second_order[i][j] += 0.5 * value;
                        second_order[j][i] += 0.5 * value;
                    }
                }
                _ => {}
            }
        }
        GeneratorCoefficients {
            first_order,
            second_order,
        }
    }

    /// `L0 φ(x)` from the coefficients.
    pub fn apply(&self, phi: &TestFunction, x: &[f64]) -> f64 {
        let grad = phi.gradient(x);
        let hess = phi.hessian(x);
        let n = self.first_order.len();
        let mut value = 0.0;
        for i in 0..n {
            value += self.first_order[i] * grad[i];
            for j in 0..n {
                value += self.second_order[i][j] * hess[i][j];
            }
        }
        value
    }
}

fn support_for(profile: &VelocityProfile, grid: &QuadratureGrid) -> Result<Arc<SwitchingNodes>> {
    let support = SwitchingNodes::new(profile, grid)?;
    let balance = balance_on(&support, SOLVABILITY_TOLERANCE);
    if !balance.satisfied {
        return Err(RevolveError::Solvability {
            norm: balance.residual_norm,
            residual: balance.residual_vector,
        });
    }
    Ok(Arc::new(support))
}

/// `L0 = -Π cS R0 cS Π + Π c1 S Π` as a lifted field (θ-constant).
fn lifted_limit(support: &Arc<SwitchingNodes>) -> (LiftedField, LiftedField) {
    let phi = LiftedField::identity(Arc::clone(support));
    let c_s_phi = phi.apply_speed_s(support.c());
    let phi1 = c_s_phi.r0().scaled(-1.0);
    let limit = phi1
        .apply_speed_s(support.c())
        .add(&phi.apply_speed_s(support.c1()))
        .project();
    (limit, phi1)
}

/// Assembles `L0` for a balanced profile without a test function.
pub fn assemble_limit_generator(
    profile: &VelocityProfile,
    grid: &QuadratureGrid,
) -> Result<GeneratorCoefficients> {
    let support = support_for(profile, grid)?;
    let (limit, _) = lifted_limit(&support);
    Ok(GeneratorCoefficients::from_lifted(&limit))
}

/// Solution of the singular perturbation problem at one spatial point.
#[derive(Debug, Clone)]
pub struct PerturbationSolution {
    pub phi1: ThetaField,
    pub phi2: ThetaField,
    /// `L0 φ(x)`
    pub limit_value: f64,
    pub generator: GeneratorCoefficients,
    /// Node values of the ε-power coefficients of `L^ε φ^ε - L0 φ`, from
    /// `ε^{-2}` up to `ε^2`.
    order_terms: [Vec<f64>; 5],
}

impl PerturbationSolution {
    /// Sup over nodes of the `ε^{-2}`, `ε^{-1}` and `ε^0` coefficients of
    /// `L^ε φ^ε - L0 φ`. They vanish identically when the equations of the
    /// scheme are solved, so these numbers are pure roundoff.
    pub fn solved_order_defects(&self) -> [f64; 3] {
        [
            sup_abs(&self.order_terms[0]),
            sup_abs(&self.order_terms[1]),
            sup_abs(&self.order_terms[2]),
        ]
    }

    /// `R^ε(θ_k) φ(x) = ε T1_k + ε² T2_k` per node.
    pub fn residual_field(&self, eps: f64) -> Vec<f64> {
        self.order_terms[3]
            .iter()
            .zip(&self.order_terms[4])
            .map(|(t1, t2)| eps * t1 + eps * eps * t2)
            .collect()
    }

    /// `sup_k |R^ε(θ_k) φ(x)|`.
    pub fn residual(&self, eps: f64) -> f64 {
        sup_abs(&self.residual_field(eps))
    }

    /// `sup_k |L^ε φ^ε - L0 φ|` summed over all ε powers, roundoff included.
    pub fn full_residual(&self, eps: f64) -> f64 {
        let powers = [eps.powi(-2), eps.recip(), 1.0, eps, eps * eps];
        (0..self.order_terms[0].len())
            .map(|k| {
                powers
                    .iter()
                    .zip(&self.order_terms)
                    .map(|(p, t)| p * t[k])
                    .sum::<f64>()
                    .abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Solves `L^ε (φ + εφ1 + ε²φ2) = L0 φ + R^ε φ` for a balanced profile:
///
/// ```text
/// φ1 = -R0 cS φ
/// φ2 = R0 (cS R0 cS - c1 S) φ
/// L0 = -Π cS R0 cS Π + Π c1 S Π
/// ```
///
/// The `-c1 S` part of `φ2` cancels the θ-dependent remainder
/// `(I - Π) c1 S φ` of the `ε^0` equation; it vanishes for `c1 ≡ 0`.
pub fn solve_perturbation(
    profile: &VelocityProfile,
    phi: &TestFunction,
    x: &[f64],
    grid: &QuadratureGrid,
) -> Result<PerturbationSolution> {
    let n = grid.dimension();
    if phi.dimension() != n || x.len() != n {
        return Err(RevolveError::DimensionMismatch {
            expected: n,
            found: if phi.dimension() != n { phi.dimension() } else { x.len() },
        });
    }
    let support = support_for(profile, grid)?;
    let (c, c1) = (support.c(), support.c1());

    let base = LiftedField::identity(Arc::clone(&support));
    let c_s_phi = base.apply_speed_s(c);
    let c1_s_phi = base.apply_speed_s(c1);
    let (limit, phi1) = lifted_limit(&support);
    let c_s_phi1 = phi1.apply_speed_s(c);
    let phi2 = c_s_phi1.scaled(-1.0).add(&c1_s_phi.scaled(-1.0)).r0();

    // L^ε φ^ε = ε^{-2} Qφ + ε^{-1}(Qφ1 + cSφ) + (Qφ2 + cSφ1 + c1Sφ)
    //         + ε(cSφ2 + c1Sφ1) + ε² c1Sφ2
    let terms = [
        base.q(),
        phi1.q().add(&c_s_phi),
        phi2.q().add(&c_s_phi1).add(&c1_s_phi).add(&limit.scaled(-1.0)),
        phi2.apply_speed_s(c).add(&phi1.apply_speed_s(c1)),
        phi2.apply_speed_s(c1),
    ];
    let order_terms = terms.map(|t| t.evaluate(phi, x));
    let limit_nodes = limit.evaluate(phi, x);

    Ok(PerturbationSolution {
        phi1: ThetaField::new(Arc::clone(&support), phi1.evaluate(phi, x))?,
        phi2: ThetaField::new(Arc::clone(&support), phi2.evaluate(phi, x))?,
        limit_value: limit_nodes[0],
        generator: GeneratorCoefficients::from_lifted(&limit),
        order_terms,
    })
}

/// Log-log fit of `sup_k |R^ε φ(x)|` against `ε`.
pub fn residual_scaling(
    profile: &VelocityProfile,
    phi: &TestFunction,
    x: &[f64],
    grid: &QuadratureGrid,
    eps_list: &[f64],
) -> Result<RateFit> {
    if eps_list.len() < 4 || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(RevolveError::Domain(
            "residual scaling needs at least 4 positive epsilon values".into(),
        ));
    }
    let (lo, hi) = eps_list
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e)));
    if hi / lo < 100.0 * (1.0 - 1e-12) {
        return Err(RevolveError::Domain(
            "epsilon values must span at least two decades".into(),
        ));
    }
    if !profile.atoms().is_empty() {
        return Err(RevolveError::Domain(
            "residual scaling needs a probability measure; atomic profiles carry extra mass".into(),
        ));
    }
    let solution = solve_perturbation(profile, phi, x, grid)?;
    let metrics: Vec<f64> = eps_list.iter().map(|&e| solution.residual(e)).collect();
    Ok(fit_power_law(eps_list, &metrics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{builtin_profile, BuiltinProfile, SpeedField};
    use crate::sphere::build_grid;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn grid_support(n: usize, res: usize) -> Arc<SwitchingNodes> {
        Arc::new(SwitchingNodes::from_grid(&build_grid(n, res).unwrap()))
    }

    #[test]
    fn projector_examples() {
        let support = grid_support(3, 32);
        assert_eq!(project_pi(&ThetaField::constant(Arc::clone(&support), 7.0)), 7.0);
        let s1 = ThetaField::from_fn(Arc::clone(&support), |s| s[0]);
        assert_abs_diff_eq!(project_pi(&s1), 0.0, epsilon = 1e-10);
        let s1_sq = ThetaField::from_fn(Arc::clone(&support), |s| s[0] * s[0]);
        assert_abs_diff_eq!(project_pi(&s1_sq), 1.0 / 3.0, epsilon = 1e-8);
        for n in [2, 4, 5] {
            let support = grid_support(n, 12);
            let s1 = ThetaField::from_fn(support, |s| s[0]);
            assert_abs_diff_eq!(project_pi(&s1), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn q_and_r0_examples() {
        let support = grid_support(3, 16);
        let constant = ThetaField::constant(Arc::clone(&support), -2.5);
        assert_eq!(apply_q(&constant).sup_norm(), 0.0);
        assert_eq!(apply_r0(&constant).sup_norm(), 0.0);
        let s1 = ThetaField::from_fn(Arc::clone(&support), |s| s[0]);
        for field in [apply_q(&s1), apply_r0(&s1)] {
            for (q, v) in field.values().iter().zip(s1.values()) {
                assert_abs_diff_eq!(*q, -v, epsilon = 1e-10);
            }
        }
        let wrong = ThetaField::new(support, vec![0.0; 3]);
        assert!(wrong.is_err());
    }

    #[test]
    fn identities_hold_on_random_fields() {
        for n in 2..=4 {
            let grid = build_grid(n, 8).unwrap();
            let r = random_identity_check(&grid, 20, n as u64);
            assert!(r.max() <= 1e-12, "n = {n}: {r:?}");
        }
    }

    #[test]
    fn apply_s_examples() {
        let phi1 = TestFunction::linear(vec![1.0, 0.0], 0.0);
        let phi2 = TestFunction::linear(vec![0.0, 1.0], 0.0);
        let x = [0.3, -1.2];
        let zero = AngleVector::new(vec![0.0]).unwrap();
        let quarter = AngleVector::new(vec![PI / 2.0]).unwrap();
        assert_abs_diff_eq!(apply_s(&zero, &phi1, &x).unwrap(), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(apply_s(&quarter, &phi2, &x).unwrap(), -1.0, epsilon = 1e-15);
        let g = TestFunction::gaussian(vec![0.0, 0.0], 0.7).unwrap();
        for k in 0..16 {
            let theta = AngleVector::new(vec![k as f64 * PI / 8.0]).unwrap();
            assert_eq!(apply_s(&theta, &g, &[0.0, 0.0]).unwrap(), 0.0);
        }
        let g3 = TestFunction::gaussian(vec![0.0; 3], 0.7).unwrap();
        assert!(apply_s(&zero, &g3, &[0.0; 3]).is_err());
    }

    fn laplacian(phi: &TestFunction, x: &[f64]) -> f64 {
        let h = phi.hessian(x);
        (0..x.len()).map(|i| h[i][i]).sum()
    }

    #[test]
    fn msre_limit_is_half_laplacian_in_the_plane() {
        let grid = build_grid(2, 32).unwrap();
        let profile = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 2).unwrap();
        let phi = TestFunction::gaussian(vec![0.2, -0.1], 0.9).unwrap();
        let x = [0.5, 0.4];
        let sol = solve_perturbation(&profile, &phi, &x, &grid).unwrap();
        assert_abs_diff_eq!(sol.limit_value, 0.5 * laplacian(&phi, &x), epsilon = 1e-7);
        assert_abs_diff_eq!(project_pi(&sol.phi1), 0.0, epsilon = 1e-10);
        for d in sol.solved_order_defects() {
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn step_profile_limit_has_drift_and_laplacian() {
        let grid = build_grid(3, 32).unwrap();
        let profile = builtin_profile(BuiltinProfile::StepHalfSphere { c: 1.0, c1: 1.0 }, 3).unwrap();
        let phi = TestFunction::gaussian(vec![0.1, 0.0, -0.3], 0.8).unwrap();
        let x = [0.2, 0.3, 0.1];
        let sol = solve_perturbation(&profile, &phi, &x, &grid).unwrap();
        // S-convention drift is -E[c1 s] = +1/4 e3
        let grad = phi.gradient(&x);
        let expected = 0.25 * grad[2] + laplacian(&phi, &x) / 3.0;
        assert_abs_diff_eq!(sol.limit_value, expected, epsilon = 1e-7);
        assert_abs_diff_eq!(sol.generator.first_order[2], 0.25, epsilon = 1e-8);
        for d in sol.solved_order_defects() {
            assert!(d < 1e-12, "{d}");
        }
    }

    #[test]
    fn unbalanced_profile_is_not_solvable() {
        let grid = build_grid(2, 16).unwrap();
        let sin = VelocityProfile::continuous(
            2,
            "sin",
            SpeedField::function(|t| t.as_slice()[0].sin()),
            SpeedField::Zero,
        );
        let phi = TestFunction::gaussian(vec![0.0; 2], 1.0).unwrap();
        match solve_perturbation(&sin, &phi, &[0.0, 0.0], &grid) {
            Err(RevolveError::Solvability { residual, .. }) => {
                assert_abs_diff_eq!(residual[1], 0.5, epsilon = 1e-8);
            }
            other => panic!("expected solvability error, got {other:?}"),
        }
        assert!(assemble_limit_generator(&sin, &grid).is_err());
    }

    #[test]
    fn msre_generator_is_isotropic() {
        for n in 2..=4 {
            let grid = build_grid(n, 16).unwrap();
            let profile = builtin_profile(BuiltinProfile::MsreConst { c: 2.0 }, n).unwrap();
            let generator = assemble_limit_generator(&profile, &grid).unwrap();
            for i in 0..n {
                assert_abs_diff_eq!(generator.first_order[i], 0.0, epsilon = 1e-12);
                for j in 0..n {
                    let expected = if i == j { 4.0 / n as f64 } else { 0.0 };
                    assert_abs_diff_eq!(generator.second_order[i][j], expected, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn example3_atoms_generator() {
        let grid = build_grid(2, 16).unwrap();
        let profile = builtin_profile(BuiltinProfile::Example3Atoms, 2).unwrap();
        let generator = assemble_limit_generator(&profile, &grid).unwrap();
        assert_abs_diff_eq!(generator.second_order[0][0], 1.0 / PI, epsilon = 1e-12);
        assert_abs_diff_eq!(generator.second_order[1][1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(generator.first_order[1], -1.0 / (2.0 * PI), epsilon = 1e-12);
    }

    #[test]
    fn residual_is_linear_in_eps_for_msre() {
        let grid = build_grid(2, 32).unwrap();
        let profile = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 2).unwrap();
        let phi = TestFunction::gaussian(vec![0.3, 0.1], 0.6).unwrap();
        let eps: Vec<f64> = (0..5).map(|k| 10f64.powf(-1.0 - 0.5 * k as f64)).collect();
        let fit = residual_scaling(&profile, &phi, &[0.0, 0.2], &grid, &eps).unwrap();
        let slope = fit.slope.unwrap();
        assert!((0.9..=1.1).contains(&slope), "{slope}");
    }

    #[test]
    fn linear_test_function_has_exact_residual() {
        let grid = build_grid(3, 16).unwrap();
        let profile = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 3).unwrap();
        let phi = TestFunction::linear(vec![1.0, -2.0, 0.5], 3.0);
        let eps = [1e-1, 1e-2, 1e-3, 1e-4];
        let fit = residual_scaling(&profile, &phi, &[0.1, 0.2, 0.3], &grid, &eps).unwrap();
        assert!(fit.exact);
        assert!(fit.slope.is_none());
    }

    #[test]
    fn residual_scaling_validates_inputs() {
        let grid = build_grid(2, 8).unwrap();
        let profile = builtin_profile(BuiltinProfile::MsreConst { c: 1.0 }, 2).unwrap();
        let phi = TestFunction::gaussian(vec![0.0; 2], 1.0).unwrap();
        let x = [0.0, 0.0];
        assert!(residual_scaling(&profile, &phi, &x, &grid, &[0.1, 0.05, 0.02]).is_err());
        assert!(residual_scaling(&profile, &phi, &x, &grid, &[0.1, 0.05, 0.02, 0.01]).is_err());
        assert!(residual_scaling(&profile, &phi, &x, &grid, &[0.1, 0.05, 0.0, 0.001]).is_err());
    }
}
