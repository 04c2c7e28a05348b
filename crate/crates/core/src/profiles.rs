//! Velocity profiles `v(θ) = c(θ)/ε + c1(θ)` and the balance checks that
//! decide whether a diffusion limit exists.
//!
//! A profile has a continuous part (functions of the angles) and an atomic
//! part. Atoms of weight `w` contribute `w·f(θ_atom)/N` to normalized
//! averages, which is what reproduces the coefficients `1/π` and `1/(2π)` of
//! the three-atom planar model.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RevolveError};
use crate::sphere::{fill_direction, normalization_constant, AngleVector, QuadratureGrid};

pub type AngularFn = Arc<dyn Fn(&AngleVector) -> f64 + Send + Sync>;

/// One speed component (`c` or `c1`) on the continuous part of the sphere.
#[derive(Clone)]
pub enum SpeedField {
    Zero,
    Constant(f64),
    Function(AngularFn),
}

impl SpeedField {
    pub fn function<F>(f: F) -> Self
    where
        F: Fn(&AngleVector) -> f64 + Send + Sync + 'static,
    {
        SpeedField::Function(Arc::new(f))
    }

    pub fn eval(&self, theta: &AngleVector) -> f64 {
        match self {
            SpeedField::Zero => 0.0,
            SpeedField::Constant(c) => *c,
            SpeedField::Function(f) => f(theta),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SpeedField::Zero)
    }

    /// True when evaluation does not need the angles.
    pub fn is_constant(&self) -> bool {
        !matches!(self, SpeedField::Function(_))
    }

    fn scaled(&self, k: f64) -> SpeedField {
        match self {
            SpeedField::Zero => SpeedField::Zero,
            SpeedField::Constant(c) => SpeedField::Constant(k * c),
            SpeedField::Function(f) => {
                let f = Arc::clone(f);
                SpeedField::Function(Arc::new(move |t| k * f(t)))
            }
        }
    }
}

impl fmt::Debug for SpeedField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpeedField::Zero => write!(f, "Zero"),
            SpeedField::Constant(c) => write!(f, "Constant({c})"),
            SpeedField::Function(_) => write!(f, "Function(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub angles: AngleVector,
    pub weight: f64,
    pub c: f64,
    pub c1: f64,
}

#[derive(Debug, Clone)]
pub struct VelocityProfile {
    dimension: usize,
    name: String,
    c: SpeedField,
    c1: SpeedField,
    atoms: Vec<Atom>,
}

/// Named profiles from the model catalogue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BuiltinProfile {
    /// `c ≡ const`, `c1 ≡ 0`: the symmetric model.
    MsreConst { c: f64 },
    /// `c(θ) = sin θ1`, `c1 ≡ 0`; balanced only for `n ≥ 3`.
    SinTheta1,
    /// `c ≡ const`, `c1 = c1·1{θ_{n-1} ∈ [π, 2π)}`.
    StepHalfSphere {
        #[serde(default = "one")]
        c: f64,
        c1: f64,
    },
    /// Planar atoms: `c = 1` at `θ = 0, π` and `c1 = 1` at `θ = π/2`.
    Example3Atoms,
}

fn one() -> f64 {
    1.0
}

pub fn builtin_profile(name: BuiltinProfile, n: usize) -> Result<VelocityProfile> {
    if n < 2 {
        return Err(RevolveError::InvalidDimension(n));
    }
    let profile = match name {
        BuiltinProfile::MsreConst { c } => VelocityProfile::continuous(
            n,
            format!("msre_const(c={c})"),
            SpeedField::Constant(c),
            SpeedField::Zero,
        ),
        BuiltinProfile::SinTheta1 => {
            if n == 2 {
                return Err(RevolveError::config(
                    "profile",
                    "sin_theta1 breaks the balance condition in R^2; use n >= 3",
                ));
            }
            VelocityProfile::continuous(
                n,
                "sin_theta1",
                SpeedField::function(|t| t.as_slice()[0].sin()),
                SpeedField::Zero,
            )
        }
        BuiltinProfile::StepHalfSphere { c, c1 } => VelocityProfile::continuous(
            n,
            format!("step_half_sphere(c={c}, c1={c1})"),
            SpeedField::Constant(c),
            SpeedField::function(move |t| if t.last() >= PI { c1 } else { 0.0 }),
        ),
        BuiltinProfile::Example3Atoms => {
            if n != 2 {
                return Err(RevolveError::DimensionMismatch {
                    expected: 2,
                    found: n,
                });
            }
            let atom = |theta: f64, c: f64, c1: f64| Atom {
                angles: AngleVector::new_unchecked(vec![theta]),
                weight: 1.0,
                c,
                c1,
            };
            VelocityProfile::atomic(
                2,
                "example3_atoms",
                vec![atom(0.0, 1.0, 0.0), atom(PI, 1.0, 0.0), atom(PI / 2.0, 0.0, 1.0)],
            )?
        }
    };
    Ok(profile)
}

impl VelocityProfile {
    pub fn continuous(n: usize, name: impl Into<String>, c: SpeedField, c1: SpeedField) -> Self {
        VelocityProfile {
            dimension: n,
            name: name.into(),
            c,
            c1,
            atoms: Vec::new(),
        }
    }

    pub fn atomic(n: usize, name: impl Into<String>, atoms: Vec<Atom>) -> Result<Self> {
        VelocityProfile::continuous(n, name, SpeedField::Zero, SpeedField::Zero).with_atoms(atoms)
    }

    /// Adds atoms; a profile with both a non-zero continuous part and atoms
    /// reports [`is_mixed`](Self::is_mixed).
    pub fn with_atoms(mut self, atoms: Vec<Atom>) -> Result<Self> {
        for (i, atom) in atoms.iter().enumerate() {
            if atom.angles.dimension() != self.dimension {
                return Err(RevolveError::DimensionMismatch {
                    expected: self.dimension,
                    found: atom.angles.dimension(),
                });
            }
            if !(atom.weight > 0.0 && atom.weight.is_finite()) {
                return Err(RevolveError::config(
                    format!("atoms[{i}].weight"),
                    format!("atom weights must be positive, got {}", atom.weight),
                ));
            }
            if !atom.c.is_finite() || !atom.c1.is_finite() {
                return Err(RevolveError::config(format!("atoms[{i}]"), "non-finite speed"));
            }
        }
        self.atoms.extend(atoms);
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn c(&self) -> &SpeedField {
        &self.c
    }

    pub fn c1(&self) -> &SpeedField {
        &self.c1
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_mixed(&self) -> bool {
        !self.atoms.is_empty() && !(self.c.is_zero() && self.c1.is_zero())
    }

    /// `c1 ≡ 0` on the continuous part and on every atom.
    pub fn is_symmetric_speed(&self) -> bool {
        self.c1.is_zero() && self.atoms.iter().all(|a| a.c1 == 0.0)
    }

    /// `(c(θ), c1(θ))`, using atom values when `θ` is an atom.
    pub fn speeds_at(&self, theta: &AngleVector) -> (f64, f64) {
        if let Some(atom) = self.atom_at(theta) {
            return (atom.c, atom.c1);
        }
        (self.c.eval(theta), self.c1.eval(theta))
    }

    fn atom_at(&self, theta: &AngleVector) -> Option<&Atom> {
        self.atoms.iter().find(|a| {
            a.angles
                .as_slice()
                .iter()
                .zip(theta.as_slice())
                .all(|(x, y)| (x - y).abs() <= 1e-12)
        })
    }

    /// Profile with `c ↦ k_c·c` and `c1 ↦ k_c1·c1` (atoms included).
    pub fn scaled(&self, k_c: f64, k_c1: f64) -> Self {
        VelocityProfile {
            dimension: self.dimension,
            name: format!("{}*({k_c},{k_c1})", self.name),
            c: self.c.scaled(k_c),
            c1: self.c1.scaled(k_c1),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    c: k_c * a.c,
                    c1: k_c1 * a.c1,
                    ..a.clone()
                })
                .collect(),
        }
    }

    /// Same profile with every atom weight multiplied by `k`.
    pub fn with_atom_weights_scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.atoms.iter_mut().for_each(|a| a.weight *= k);
        out
    }

    /// Sup of `|c|` and `|c1|` over the grid nodes and atoms; errors when a
    /// value is not finite.
    pub fn sup_bounds(&self, grid: &QuadratureGrid) -> Result<(f64, f64)> {
        let mut sup = (0.0f64, 0.0f64);
        let atoms = self.atoms.iter().map(|a| (a.c, a.c1));
        let continuous = grid.nodes().iter().map(|t| (self.c.eval(t), self.c1.eval(t)));
        for (c, c1) in continuous.chain(atoms) {
            if !c.is_finite() || !c1.is_finite() {
                return Err(RevolveError::Domain(format!(
                    "profile {} is unbounded on the grid",
                    self.name
                )));
            }
            sup = (sup.0.max(c.abs()), sup.1.max(c1.abs()));
        }
        Ok(sup)
    }
}

/// A profile discretized on a quadrature grid: the finite support on which
/// normalized averages over the switching variable are computed.
///
/// Grid nodes carry the continuous parts with the normalized grid weights;
/// atoms follow, each with weight `w/N`.
#[derive(Debug, Clone)]
pub struct SwitchingNodes {
    dimension: usize,
    directions: Vec<f64>,
    weights: Vec<f64>,
    c: Vec<f64>,
    c1: Vec<f64>,
    atom_count: usize,
}

impl SwitchingNodes {
    pub fn new(profile: &VelocityProfile, grid: &QuadratureGrid) -> Result<Self> {
        let n = grid.dimension();
        if profile.dimension() != n {
            return Err(RevolveError::DimensionMismatch {
                expected: n,
                found: profile.dimension(),
            });
        }
        let total = grid.len() + profile.atoms().len();
        let mut directions = Vec::with_capacity(total * n);
        let mut weights = Vec::with_capacity(total);
        let mut c = Vec::with_capacity(total);
        let mut c1 = Vec::with_capacity(total);
        for (k, node) in grid.nodes().iter().enumerate() {
            directions.extend_from_slice(grid.direction(k));
            weights.push(grid.weights()[k]);
            c.push(profile.c().eval(node));
            c1.push(profile.c1().eval(node));
        }
        let big_n = normalization_constant(n)?;
        let mut s = vec![0.0; n];
        for atom in profile.atoms() {
            fill_direction(atom.angles.as_slice(), &mut s);
            directions.extend_from_slice(&s);
            weights.push(atom.weight / big_n);
            c.push(atom.c);
            c1.push(atom.c1);
        }
        Ok(SwitchingNodes {
            dimension: n,
            directions,
            weights,
            c,
            c1,
            atom_count: profile.atoms().len(),
        })
    }

    /// Plain grid support with `c ≡ 1`, `c1 ≡ 0`.
    pub fn from_grid(grid: &QuadratureGrid) -> Self {
        SwitchingNodes {
            dimension: grid.dimension(),
            directions: (0..grid.len()).flat_map(|k| grid.direction(k).to_vec()).collect(),
            weights: grid.weights().to_vec(),
            c: vec![1.0; grid.len()],
            c1: vec![0.0; grid.len()],
            atom_count: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn has_atoms(&self) -> bool {
        self.atom_count > 0
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.dimension..(k + 1) * self.dimension]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn c(&self) -> &[f64] {
        &self.c
    }

    pub fn c1(&self) -> &[f64] {
        &self.c1
    }

    /// `Σ_k w_k g_k s(θ_k)`: the normalized first moment of `g·s`.
    pub fn first_moment(&self, g: &[f64]) -> Vec<f64> {
        let n = self.dimension;
        let mut out = vec![0.0; n];
        for k in 0..self.len() {
            let wg = self.weights[k] * g[k];
            for (o, s) in out.iter_mut().zip(self.direction(k)) {
                *o += wg * s;
            }
        }
        out
    }

    /// `Σ_k w_k g_k s(θ_k) s(θ_k)^T`, row-major.
    pub fn second_moment(&self, g: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dimension;
        let mut out = vec![vec![0.0; n]; n];
        for k in 0..self.len() {
            let wg = self.weights[k] * g[k];
            let s = self.direction(k);
            for i in 0..n {
                for j in i..n {
                    out[i][j] += wg * s[i] * s[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                out[i][j] = out[j][i];
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BalanceReport {
    pub residual_vector: Vec<f64>,
    pub residual_norm: f64,
    pub satisfied: bool,
}

impl BalanceReport {
    fn new(residual_vector: Vec<f64>, satisfied: impl Fn(f64) -> bool) -> Self {
        let residual_norm = crate::sphere::norm(&residual_vector);
        BalanceReport {
            satisfied: satisfied(residual_norm),
            residual_vector,
            residual_norm,
        }
    }
}

/// Balance condition for the fast part: `r = (1/N)∫ c(θ) s(θ) μ(dθ)` plus
/// atoms. Satisfied when `|r| ≤ tolerance`.
pub fn check_balance(
    profile: &VelocityProfile,
    grid: &QuadratureGrid,
    tolerance: f64,
) -> Result<BalanceReport> {
    let nodes = SwitchingNodes::new(profile, grid)?;
    Ok(balance_on(&nodes, tolerance))
}

pub(crate) fn balance_on(nodes: &SwitchingNodes, tolerance: f64) -> BalanceReport {
    BalanceReport::new(nodes.first_moment(nodes.c()), |r| r <= tolerance)
}

/// The same functional applied to `c1`. Satisfied when the residual exceeds
/// `tolerance`, i.e. a drift direction exists. The vector is `+E[c1 s]`, the
/// physical drift.
pub fn check_nonsymmetry(
    profile: &VelocityProfile,
    grid: &QuadratureGrid,
    tolerance: f64,
) -> Result<BalanceReport> {
    let nodes = SwitchingNodes::new(profile, grid)?;
    Ok(BalanceReport::new(nodes.first_moment(nodes.c1()), |r| r > tolerance))
}
