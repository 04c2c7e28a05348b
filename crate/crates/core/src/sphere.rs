//! Geometry of the unit sphere `S_{n-1}` in `R^n`.
//!
//! Directions are parametrized by the hyperspherical chart
//!
//! ```text
//! s(θ) = (cos θ1, sin θ1 cos θ2, ..., sin θ1 ... sin θ_{n-2} cos θ_{n-1},
//!         sin θ1 ... sin θ_{n-2} sin θ_{n-1})
//! ```
//!
//! with `θ_i ∈ [0, π)` for `i < n-1` and `θ_{n-1} ∈ [0, 2π)`. The surface
//! element is `μ(dθ) = sin^{n-2} θ1 sin^{n-3} θ2 ... sin θ_{n-2} dθ`, whose
//! total mass is [`normalization_constant`].

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RevolveError};

const TWO_PI: f64 = 2.0 * PI;

/// Hyperspherical angles `(θ1, ..., θ_{n-1})` of a point on `S_{n-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AngleVector(Vec<f64>);

impl AngleVector {
    /// Validates the angle ranges. The last angle lives in `[0, 2π)`, all
    /// the others in `[0, π)`.
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        if angles.is_empty() {
            return Err(RevolveError::InvalidDimension(angles.len() + 1));
        }
        let last = angles.len() - 1;
        for (i, &a) in angles.iter().enumerate() {
            let upper = if i == last { TWO_PI } else { PI };
            if !a.is_finite() || !(0.0..upper).contains(&a) {
                return Err(RevolveError::InvalidAngles(format!(
                    "angle {} = {a} outside [0, {upper})",
                    i + 1
                )));
            }
        }
        Ok(AngleVector(angles))
    }

    /// Wraps angles that are known to be in range (grid nodes, inverse chart).
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub(crate) fn new_unchecked(angles: Vec<f64>) -> Self {
        debug_assert!(!angles.is_empty());
        AngleVector(angles)
    }

    /// Dimension `n` of the ambient space.
    pub fn dimension(&self) -> usize {
        self.0.len() + 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// The azimuthal angle `θ_{n-1}`.
    pub fn last(&self) -> f64 {
        self.0[self.0.len() - 1]
    }
}

/// A unit vector in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct UnitDirection(Vec<f64>);

impl UnitDirection {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() < 2 {
            return Err(RevolveError::InvalidDimension(components.len()));
        }
        let norm = norm(&components);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(RevolveError::Domain(format!(
                "direction norm {norm} differs from 1"
            )));
        }
        Ok(UnitDirection(components))
    }

    pub(crate) fn new_unchecked(components: Vec<f64>) -> Self {
        UnitDirection(components)
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_components(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Writes `s(θ)` into `out` (length `angles.len() + 1`).
pub(crate) fn fill_direction(angles: &[f64], out: &mut [f64]) {
    let mut sin_prod = 1.0;
    for (i, &a) in angles.iter().enumerate() {
        let (s, c) = a.sin_cos();
        out[i] = sin_prod * c;
        sin_prod *= s;
    }
    out[angles.len()] = sin_prod;
}

/// The spherical-coordinate chart `θ ↦ s(θ)`.
pub fn direction_from_angles(theta: &AngleVector) -> Result<UnitDirection> {
    let n = theta.dimension();
    if n < 2 {
        return Err(RevolveError::InvalidDimension(n));
    }
    let mut out = vec![0.0; n];
    fill_direction(theta.as_slice(), &mut out);
    Ok(UnitDirection(out))
}

/// Inverse of [`direction_from_angles`]; the result is in the canonical
/// angle ranges.
pub fn angles_from_direction(direction: &UnitDirection) -> AngleVector {
    AngleVector(angles_of(direction.components()))
}

pub(crate) fn angles_of(s: &[f64]) -> Vec<f64> {
    let mut angles = vec![0.0; s.len() - 1];
    fill_angles(s, &mut angles);
    angles
}

/// Writes the chart angles of `s` into `out` (length `s.len() - 1`).
pub(crate) fn fill_angles(s: &[f64], out: &mut [f64]) {
    let n = s.len();
    // first pass: out[k] = |(s_{k+1}, ..., s_{n-1})|
    // (components are at most 1 in magnitude, so plain squares cannot overflow)
    let mut tail2 = 0.0f64;
    for k in (0..n - 1).rev() {
        tail2 += s[k + 1] * s[k + 1];
        out[k] = tail2.sqrt();
    }
    for k in 0..n.saturating_sub(2) {
        let a = out[k].atan2(s[k]);
        // atan2 with a non-negative first argument lands in [0, π]; π itself
        // is only reached by (-1, 0, ..., 0) which the chart maps from θ1 -> π.
        out[k] = if a >= PI { PI.next_down() } else { a };
    }
    let mut last = s[n - 1].atan2(s[n - 2]);
    if last < 0.0 {
        last += TWO_PI;
    }
    if last >= TWO_PI {
        last = 0.0;
    }
    out[n - 2] = last;
}

/// Total surface content `N = ∫ μ(dθ)` of the unit sphere in `R^n`.
///
/// Even `n`: `(2π)^{n/2} / (2·4·…·(n-2))`; odd `n`:
/// `(2π)^{(n-1)/2} · 2 / (3·5·…·(n-2))`. Empty products are 1.
pub fn normalization_constant(n: usize) -> Result<f64> {
    if n < 2 {
        return Err(RevolveError::InvalidDimension(n));
    }
    let value = if n.is_multiple_of(2) {
        let denom: f64 = (1..=(n - 2) / 2).map(|k| (2 * k) as f64).product();
        TWO_PI.powi((n / 2) as i32) / denom
    } else {
        let denom: f64 = (1..=(n - 3) / 2).map(|k| (2 * k + 1) as f64).product();
        TWO_PI.powi(((n - 1) / 2) as i32) * 2.0 / denom
    };
    Ok(value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parity {
    /// `∫_0^π sin^{2m} θ dθ`
    Even,
    /// `∫_0^π sin^{2m+1} θ dθ`
    Odd,
}

/// Wallis integrals over `[0, π]` via the double-factorial closed forms.
pub fn wallis_integral(m: i64, parity: Parity) -> Result<f64> {
    if m < 0 {
        return Err(RevolveError::Domain(format!(
            "Wallis index must be non-negative, got {m}"
        )));
    }
    let value = match parity {
        Parity::Even => {
            // 2 · (1·3·…·(2m-1)) / (2·4·…·2m) · π/2
            let ratio: f64 = (1..=m).map(|k| (2 * k - 1) as f64 / (2 * k) as f64).product();
            2.0 * ratio * PI / 2.0
        }
        Parity::Odd => {
            // 2 · (2·4·…·2m) / (1·3·…·(2m+1))
            let ratio: f64 = (1..=m).map(|k| (2 * k) as f64 / (2 * k + 1) as f64).product();
            2.0 * ratio
        }
    };
    Ok(value)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_count(x) and P_{count-1}(x)
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let (p_n, p_prev) = if count == 1 { (x, 1.0) } else { (p1, p0) };
            derivative = nf * (x * p_n - p_prev) / (x * x - 1.0);
            let dx = p_n / derivative;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}

/// Product quadrature for the normalized average `(1/N) ∫ f μ(dθ)`.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    dimension: usize,
    nodes: Vec<AngleVector>,
    // node-major, `dimension` entries per node
    directions: Vec<f64>,
    weights: Vec<f64>,
    raw_total: f64,
}

impl QuadratureGrid {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn nodes(&self) -> &[AngleVector] {
        &self.nodes
    }

    /// Normalized weights, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `s(θ_k)` for node `k`.
    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.dimension..(k + 1) * self.dimension]
    }

    /// Sum of the weights before normalization: the quadrature estimate of `N`.
    pub fn raw_total(&self) -> f64 {
        self.raw_total
    }

    /// Normalized average of `f(θ, s(θ))` over the sphere.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(&AngleVector, &[f64]) -> f64,
    {
        self.nodes
            .iter()
            .enumerate()
            .map(|(k, node)| self.weights[k] * f(node, self.direction(k)))
            .sum()
    }
}

/// Resolution at which second moments of smooth profiles are accurate to
/// about `1e-11` while the node count stays moderate.
pub fn recommended_resolution(n: usize) -> usize {
    match n {
        0..=4 => 20,
        5 => 16,
        _ => 14,
    }
}

/// Gauss-Legendre in each polar angle (with its `sin^{n-1-i}` density
/// folded into the weights) times a two-panel Gauss-Legendre rule in the
/// azimuth. `resolution` is the node count per axis.
pub fn build_grid(n: usize, resolution: usize) -> Result<QuadratureGrid> {
    if n < 2 {
        return Err(RevolveError::InvalidDimension(n));
    }
    if resolution < 2 {
        return Err(RevolveError::Domain(format!(
            "grid resolution must be at least 2, got {resolution}"
        )));
    }
    let (gl_nodes, gl_weights) = gauss_legendre(resolution);
    // per polar axis i (0-based): nodes in (0, π) and weights with sin^{n-2-i}
    let polar: Vec<Vec<(f64, f64)>> = (0..n - 2)
        .map(|i| {
            let power = (n - 2 - i) as i32;
            gl_nodes
                .iter()
                .zip(&gl_weights)
                .map(|(&x, &w)| {
                    let theta = PI / 2.0 * (x + 1.0);
                    (theta, w * PI / 2.0 * theta.sin().powi(power))
                })
                .collect()
        })
        .collect();
    // Two Gauss-Legendre panels, [0, π) and [π, 2π): exact antipodal
    // symmetry, and profiles that switch at θ_{n-1} = π stay smooth per panel.
    let half = resolution.div_ceil(2);
    let (az_nodes, az_weights) = gauss_legendre(half);
    let azimuth: Vec<(f64, f64)> = [0.0, PI]
        .iter()
        .flat_map(|&offset| {
            az_nodes
                .iter()
                .zip(&az_weights)
                .map(move |(&x, &w)| (offset + PI / 2.0 * (x + 1.0), w * PI / 2.0))
        })
        .collect();
    let sizes: Vec<usize> = (0..n - 1)
        .map(|axis| if axis < n - 2 { resolution } else { azimuth.len() })
        .collect();

    let total_nodes: usize = sizes.iter().product();
    let mut nodes = Vec::with_capacity(total_nodes);
    let mut directions = Vec::with_capacity(total_nodes * n);
    let mut weights = Vec::with_capacity(total_nodes);
    let mut index = vec![0usize; n - 1];
    let mut s = vec![0.0; n];
    loop {
        let mut angles = Vec::with_capacity(n - 1);
        let mut w = 1.0;
        for (axis, &j) in index.iter().enumerate() {
            let (theta, wj) = if axis < n - 2 { polar[axis][j] } else { azimuth[j] };
            angles.push(theta);
            w *= wj;
        }
        fill_direction(&angles, &mut s);
        directions.extend_from_slice(&s);
        nodes.push(AngleVector(angles));
        weights.push(w);

        // odometer increment, last axis fastest
        let mut axis = n - 1;
        loop {
            if axis == 0 {
                let raw_total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= raw_total);
                return Ok(QuadratureGrid {
                    dimension: n,
                    nodes,
                    directions,
                    weights,
                    raw_total,
                });
            }
            axis -= 1;
            index[axis] += 1;
            if index[axis] < sizes[axis] {
                break;
            }
            index[axis] = 0;
        }
    }
}

/// Uniform direction on `S_{n-1}` by normalizing a standard Gaussian vector.
pub fn sample_direction<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitDirection> {
    if n < 2 {
        return Err(RevolveError::InvalidDimension(n));
    }
    let mut out = vec![0.0; n];
    fill_uniform_direction(rng, &mut out);
    Ok(UnitDirection(out))
}

pub(crate) fn fill_uniform_direction<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    loop {
        let mut sq = 0.0;
        for x in out.iter_mut() {
            *x = rng.sample(StandardNormal);
            sq += *x * *x;
        }
        if sq > 1e-300 {
            let inv = 1.0 / sq.sqrt();
            out.iter_mut().for_each(|x| *x *= inv);
            return;
        }
    }
}
