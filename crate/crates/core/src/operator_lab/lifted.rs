use std::collections::BTreeMap;
use std::sync::Arc;

use super::{average, mass, TestFunction};
use crate::profiles::SwitchingNodes;

/// `Σ_α a_α(θ) ∂^α φ(x)`: a θ-field whose spatial dependence is a linear
/// combination of mixed partials of the test function. Keys are sorted
/// multi-indices; values hold one coefficient per node.
#[derive(Debug, Clone)]
pub struct LiftedField {
    support: Arc<SwitchingNodes>,
    terms: BTreeMap<Vec<u8>, Vec<f64>>,
}

impl LiftedField {
    /// `φ` itself: the constant coefficient 1 on the zeroth derivative.
    pub fn identity(support: Arc<SwitchingNodes>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Vec::new(), vec![1.0; support.len()]);
        LiftedField { support, terms }
    }

    pub fn dimension(&self) -> usize {
        self.support.dimension()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &[f64])> {
        self.terms.iter().map(|(k, v)| (k.as_slice(), v.as_slice()))
    }

    /// Highest derivative order present.
    pub fn order(&self) -> usize {
        self.terms.keys().map(Vec::len).max().unwrap_or(0)
    }

    fn map_slots(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        LiftedField {
            support: Arc::clone(&self.support),
            terms: self.terms.iter().map(|(k, v)| (k.clone(), f(v))).collect(),
        }
    }

    /// `Π` slot by slot; the result is constant over the nodes.
    pub fn project(&self) -> Self {
        let (weights, m) = (self.support.weights(), mass(&self.support));
        self.map_slots(|v| vec![average(weights, m, v); v.len()])
    }

    /// `Q = Π - I` slot by slot.
    pub fn q(&self) -> Self {
        let (weights, m) = (self.support.weights(), mass(&self.support));
        self.map_slots(|v| {
            let p = average(weights, m, v);
            v.iter().map(|x| p - x).collect()
        })
    }

    /// `R0 = Π - I`.
    pub fn r0(&self) -> Self {
        self.q()
    }

    pub fn scaled(&self, k: f64) -> Self {
        self.map_slots(|v| v.iter().map(|x| k * x).collect())
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut terms = self.terms.clone();
        for (k, v) in &other.terms {
            match terms.get_mut(k) {
                Some(acc) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
                None => {
                    terms.insert(k.clone(), v.clone());
                }
            }
        }
        LiftedField {
            support: Arc::clone(&self.support),
            terms,
        }
    }

    /// `g(θ) S(θ)` with `S = -(s(θ), ∇)`: every slot `α` feeds `α + e_i`
    /// with coefficient `-g s_i`.
    pub fn apply_speed_s(&self, speed: &[f64]) -> Self {
        let n = self.dimension();
        let len = self.support.len();
        let mut terms: BTreeMap<Vec<u8>, Vec<f64>> = BTreeMap::new();
        if speed.iter().any(|&g| g != 0.0) {
            for (alpha, coeffs) in &self.terms {
                for i in 0..n {
                    let mut key = alpha.clone();
                    let pos = key.partition_point(|&a| a <= i as u8);
                    key.insert(pos, i as u8);
                    let acc = terms.entry(key).or_insert_with(|| vec![0.0; len]);
                    for k in 0..len {
                        acc[k] -= speed[k] * self.support.direction(k)[i] * coeffs[k];
                    }
                }
            }
        }
        LiftedField {
            support: Arc::clone(&self.support),
            terms,
        }
    }

    /// Node values at the spatial point `x`.
    pub fn evaluate(&self, phi: &TestFunction, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.support.len()];
        for (alpha, coeffs) in &self.terms {
            let idx: Vec<usize> = alpha.iter().map(|&a| a as usize).collect();
            let d = phi.derivative(x, &idx);
            if d != 0.0 {
                out.iter_mut().zip(coeffs).for_each(|(o, c)| *o += c * d);
            }
        }
        out
    }
}
