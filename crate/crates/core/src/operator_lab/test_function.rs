use serde::{Deserialize, Serialize};

use crate::error::{Result, RevolveError};

/// Smooth test functions on `R^n` with analytic derivatives up to order 3.
///
/// Gaussians stand in for compactly supported functions: nothing in the
/// lab integrates over `x`, so rapid decay is enough.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunction {
    /// `b·x + b0`
    Linear { coeffs: Vec<f64>, offset: f64 },
    /// `exp(-|x - a|² / 2w²)`
    Gaussian { center: Vec<f64>, width: f64 },
    /// `(p0 + b·x + x^T C x / 2) · exp(-|x - a|² / 2w²)` with `C` symmetric.
    WindowedPolynomial {
        center: Vec<f64>,
        width: f64,
        constant: f64,
        linear: Vec<f64>,
        quadratic: Vec<Vec<f64>>,
    },
}

impl TestFunction {
    pub fn gaussian(center: Vec<f64>, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(RevolveError::Domain(format!("Gaussian width must be positive, got {width}")));
        }
        Ok(TestFunction::Gaussian { center, width })
    }

    pub fn linear(coeffs: Vec<f64>, offset: f64) -> Self {
        TestFunction::Linear { coeffs, offset }
    }

    pub fn windowed_polynomial(
        center: Vec<f64>,
        width: f64,
        constant: f64,
        linear: Vec<f64>,
        quadratic: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = center.len();
        if !(width > 0.0) {
            return Err(RevolveError::Domain(format!("window width must be positive, got {width}")));
        }
        if linear.len() != n || quadratic.len() != n || quadratic.iter().any(|r| r.len() != n) {
            return Err(RevolveError::DimensionMismatch { expected: n, found: linear.len() });
        }
        for i in 0..n {
            for j in 0..i {
                if quadratic[i][j] != quadratic[j][i] {
                    return Err(RevolveError::Domain("quadratic part must be symmetric".into()));
                }
            }
        }
        Ok(TestFunction::WindowedPolynomial { center, width, constant, linear, quadratic })
    }

    pub fn dimension(&self) -> usize {
        match self {
            TestFunction::Linear { coeffs, .. } => coeffs.len(),
            TestFunction::Gaussian { center, .. } | TestFunction::WindowedPolynomial { center, .. } => center.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.derivative(x, &[])
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dimension()).map(|i| self.derivative(x, &[i])).collect()
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dimension();
        (0..n)
            .map(|i| (0..n).map(|j| self.derivative(x, &[i, j])).collect())
            .collect()
    }

    /// Mixed partial `∂^{|idx|} φ / ∂x_{idx[0]} ...` for `|idx| ≤ 3`.
    pub fn derivative(&self, x: &[f64], idx: &[usize]) -> f64 {
        assert!(idx.len() <= 3, "derivatives above third order are not available");
        match self {
            TestFunction::Linear { coeffs, offset } => match idx {
                [] => coeffs.iter().zip(x).map(|(b, x)| b * x).sum::<f64>() + offset,
                [i] => coeffs[*i],
                _ => 0.0,
            },
            TestFunction::Gaussian { center, width } => Window::new(center, *width, x).derivative(idx),
            TestFunction::WindowedPolynomial { center, width, constant, linear, quadratic } => {
                let g = Window::new(center, *width, x);
                let p = |sub: &[usize]| -> f64 {
                    match sub {
                        [] => {
                            let mut v = *constant;
                            for i in 0..x.len() {
                                v += linear[i] * x[i];
                                for j in 0..x.len() {
                                    v += 0.5 * quadratic[i][j] * x[i] * x[j];
                                }
                            }
                            v
                        }
                        [i] => linear[*i] + quadratic[*i].iter().zip(x).map(|(c, x)| c * x).sum::<f64>(),
                        [i, j] => quadratic[*i][*j],
                        _ => 0.0,
                    }
                };
                // Leibniz rule over the subsets of idx
                let m = idx.len();
                let mut total = 0.0;
                for mask in 0..(1usize << m) {
                    let (mut on_p, mut on_g) = (Vec::with_capacity(m), Vec::with_capacity(m));
                    for (bit, &i) in idx.iter().enumerate() {
                        if mask & (1 << bit) != 0 {
                            on_p.push(i);
                        } else {
                            on_g.push(i);
                        }
                    }
                    total += p(&on_p) * g.derivative(&on_g);
                }
                total
            }
        }
    }

    /// An upper bound on `sup_x |∂³φ|` over all third-order partials.
    pub fn third_deriv_bound(&self) -> f64 {
        match self {
            TestFunction::Linear { .. } => 0.0,
            // max over u of |(3u - u³) e^{-u²/2}| ≈ 1.3801 dominates the mixed partials
            TestFunction::Gaussian { width, .. } => 1.380_1 / width.powi(3),
            TestFunction::WindowedPolynomial { center, width, constant, linear, quadratic } => {
                // crude: |p| and its derivatives on |x - a| ≤ 8w times the Gaussian bounds
                let w = *width;
                let radius = center.iter().map(|c| c.abs()).fold(0.0, f64::max) + 8.0 * w;
                let b = linear.iter().map(|v| v.abs()).sum::<f64>();
                let q = quadratic.iter().flatten().map(|v| v.abs()).sum::<f64>();
                let p0 = constant.abs() + b * radius + 0.5 * q * radius * radius;
                let p1 = b + q * radius;
                (p0 * 1.3801 / w.powi(3) + 3.0 * p1 / (w * w) + 3.0 * q / w) * 1.000_001
            }
        }
    }
}

/// Five Gaussians with staggered centers and widths, each paired with an
/// off-center evaluation point (odd derivatives vanish at the center).
pub fn gaussian_probes(n: usize) -> Vec<(TestFunction, Vec<f64>)> {
    (0..5)
        .map(|k| {
            let width = 0.6 + 0.2 * k as f64;
            let center: Vec<f64> = (0..n).map(|i| 0.3 * ((k + 2 * i) as f64).sin()).collect();
            let x = center
                .iter()
                .enumerate()
                .map(|(i, a)| a + width * (0.7 - 0.35 * i as f64 + 0.1 * k as f64))
                .collect();
            (TestFunction::Gaussian { center, width }, x)
        })
        .collect()
}

/// Derivatives of `exp(-|x - a|²/2w²)` at a fixed point.
struct Window {
    // u = (x - a) / w²
    u: Vec<f64>,
    inv_w2: f64,
    g: f64,
}

impl Window {
    fn new(center: &[f64], width: f64, x: &[f64]) -> Self {
        let inv_w2 = 1.0 / (width * width);
        let u: Vec<f64> = x.iter().zip(center).map(|(x, a)| (x - a) * inv_w2).collect();
        let r2: f64 = x.iter().zip(center).map(|(x, a)| (x - a) * (x - a)).sum();
        Window { u, inv_w2, g: (-0.5 * r2 * inv_w2).exp() }
    }

    fn derivative(&self, idx: &[usize]) -> f64 {
        let (u, k) = (&self.u, self.inv_w2);
        let delta = |i: usize, j: usize| if i == j { k } else { 0.0 };
        let factor = match *idx {
            [] => 1.0,
            [i] => -u[i],
            [i, j] => u[i] * u[j] - delta(i, j),
            [i, j, l] => -u[i] * u[j] * u[l] + delta(i, j) * u[l] + delta(i, l) * u[j] + delta(j, l) * u[i],
            _ => unreachable!(),
        };
        factor * self.g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn family(n: usize) -> Vec<TestFunction> {
        let center: Vec<f64> = (0..n).map(|i| 0.3 * i as f64 - 0.2).collect();
        let quadratic: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| 0.1 * (i + j) as f64 - 0.15).collect())
            .collect();
        vec![
            TestFunction::gaussian(center.clone(), 0.8).unwrap(),
            TestFunction::windowed_polynomial(center, 1.1, 0.5, (0..n).map(|i| 0.4 - 0.2 * i as f64).collect(), quadratic)
                .unwrap(),
            TestFunction::linear((0..n).map(|i| i as f64 + 1.0).collect(), 0.25),
        ]
    }

    fn rel_close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
    }

    #[test]
    fn derivatives_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for n in 2..=4 {
            for phi in family(n) {
                for _ in 0..100 {
                    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.5..1.5)).collect();
                    let grad = phi.gradient(&x);
                    let hess = phi.hessian(&x);
                    for i in 0..n {
                        let mut xp = x.clone();
                        let mut xm = x.clone();
                        xp[i] += h;
                        xm[i] -= h;
                        let fd = (phi.value(&xp) - phi.value(&xm)) / (2.0 * h);
                        assert!(rel_close(grad[i], fd, 1e-6), "{phi:?} grad {i}: {} vs {fd}", grad[i]);
                        let gp = phi.gradient(&xp);
                        let gm = phi.gradient(&xm);
                        for j in 0..n {
                            assert!((hess[i][j] - hess[j][i]).abs() <= 1e-14 * hess[i][j].abs().max(1.0));
                            let fd = (gp[j] - gm[j]) / (2.0 * h);
                            assert!(rel_close(hess[i][j], fd, 1e-5), "hess {i}{j}");
                            let hp = phi.derivative(&xp, &[j, j]);
                            let hm = phi.derivative(&xm, &[j, j]);
                            let fd3 = (hp - hm) / (2.0 * h);
                            assert!(rel_close(phi.derivative(&x, &[i, j, j]), fd3, 1e-5), "third {i}{j}{j}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn third_derivative_bound_holds_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for phi in family(3) {
            let bound = phi.third_deriv_bound();
            for _ in 0..2000 {
                let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-4.0..4.0)).collect();
                for i in 0..3 {
                    for j in 0..3 {
                        for l in 0..3 {
                            assert!(phi.derivative(&x, &[i, j, l]).abs() <= bound);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(TestFunction::gaussian(vec![0.0, 0.0], 0.0).is_err());
        assert!(TestFunction::windowed_polynomial(vec![0.0; 2], 1.0, 0.0, vec![0.0; 3], vec![vec![0.0; 2]; 2]).is_err());
        assert!(TestFunction::windowed_polynomial(vec![0.0; 2], 1.0, 0.0, vec![0.0; 2], vec![vec![0.0, 1.0], vec![0.0, 0.0]]).is_err());
    }
}
