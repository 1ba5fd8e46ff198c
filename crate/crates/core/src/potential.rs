//! Symbolic edge potentials.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// A smooth bounded potential on one edge `[0, l]`.
///
/// Trigonometric series use the edge-periodic frequencies `2πj/l`:
/// `v(x) = a0 + Σ_j (a_j cos(2πjx/l) + b_j sin(2πjx/l))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub enum PotentialSpec {
    #[default]
    Zero,
    Constant(f64),
    /// Coefficients in ascending powers of `x`.
    Polynomial(Vec<f64>),
    TrigSeries { a0: f64, terms: Vec<(f64, f64)> },
}

/// Number of samples used by the sampled bounds.
const BOUND_SAMPLES: usize = 2048;

impl PotentialSpec {
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Constant(c) => *c == 0.0,
            PotentialSpec::Polynomial(c) => c.iter().all(|&x| x == 0.0),
            PotentialSpec::TrigSeries { a0, terms } => {
                *a0 == 0.0 && terms.iter().all(|&(a, b)| a == 0.0 && b == 0.0)
            }
        }
    }

    /// Constant value if the potential does not depend on `x`.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            PotentialSpec::Zero => Some(0.0),
            PotentialSpec::Constant(c) => Some(*c),
            PotentialSpec::Polynomial(c) => {
                if c.iter().skip(1).all(|&x| x == 0.0) {
                    Some(c.first().copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            PotentialSpec::TrigSeries { a0, terms } => {
                if terms.iter().all(|&(a, b)| a == 0.0 && b == 0.0) {
                    Some(*a0)
                } else {
                    None
                }
            }
        }
    }

    pub fn eval(&self, x: f64, length: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => *c,
            PotentialSpec::Polynomial(c) => c.iter().rev().fold(0.0, |acc, &ci| acc * x + ci),
            PotentialSpec::TrigSeries { a0, terms } => {
                let base = 2.0 * PI * x / length;
                terms.iter().enumerate().fold(*a0, |acc, (j, &(a, b))| {
                    let arg = (j as f64 + 1.0) * base;
                    acc + a * arg.cos() + b * arg.sin()
                })
            }
        }
    }

    /// Negative part `V_-(x) = -min(0, V(x))`.
    pub fn negative_part(&self, x: f64, length: f64) -> f64 {
        (-self.eval(x, length)).max(0.0)
    }

    /// Exact `∫_0^l v(x) dx`.
    pub fn integral(&self, length: f64) -> f64 {
        match self {
            PotentialSpec::Zero => 0.0,
            PotentialSpec::Constant(c) => c * length,
            PotentialSpec::Polynomial(c) => c
                .iter()
                .enumerate()
                .map(|(i, &ci)| ci * length.powi(i as i32 + 1) / (i as f64 + 1.0))
                .sum(),
            // Every harmonic integrates to zero over a full period.
            PotentialSpec::TrigSeries { a0, .. } => a0 * length,
        }
    }

    /// Crude but rigorous bound on `sup |v'|` over `[0, l]`.
    fn derivative_bound(&self, length: f64) -> f64 {
        match self {
            PotentialSpec::Zero | PotentialSpec::Constant(_) => 0.0,
            PotentialSpec::Polynomial(c) => c
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, &ci)| i as f64 * ci.abs() * length.powi(i as i32 - 1))
                .sum(),
            PotentialSpec::TrigSeries { terms, .. } => terms
                .iter()
                .enumerate()
                .map(|(j, &(a, b))| 2.0 * PI * (j as f64 + 1.0) / length * (a.abs() + b.abs()))
                .sum(),
        }
    }

    /// Lower and upper bounds of `v` on `[0, l]`: sampled extremes widened by
    /// the Lipschitz margin `(h/2)·sup|v'|`, so both are guaranteed.
    pub fn bounds(&self, length: f64) -> (f64, f64) {
        if let Some(c) = self.as_constant() {
            return (c, c);
        }
        let h = length / BOUND_SAMPLES as f64;
        let (lo, hi) = (0..=BOUND_SAMPLES)
            .map(|i| self.eval(i as f64 * h, length))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        let margin = 0.5 * h * self.derivative_bound(length);
        (lo - margin, hi + margin)
    }

    /// Guaranteed over-approximation of `‖v‖_∞`.
    pub fn sup_norm(&self, length: f64) -> f64 {
        let (lo, hi) = self.bounds(length);
        lo.abs().max(hi.abs())
    }

    /// Guaranteed over-approximation of `‖V_-‖_∞`.
    pub fn negative_sup(&self, length: f64) -> f64 {
        (-self.bounds(length).0).max(0.0)
    }

    /// The potential plus a constant.
    pub fn shifted(&self, c: f64) -> PotentialSpec {
        match self {
            PotentialSpec::Zero => PotentialSpec::Constant(c),
            PotentialSpec::Constant(v) => PotentialSpec::Constant(v + c),
            PotentialSpec::Polynomial(coeffs) => {
                let mut coeffs = coeffs.clone();
                if coeffs.is_empty() {
                    coeffs.push(0.0);
                }
                coeffs[0] += c;
                PotentialSpec::Polynomial(coeffs)
            }
            PotentialSpec::TrigSeries { a0, terms } => {
                PotentialSpec::TrigSeries { a0: a0 + c, terms: terms.clone() }
            }
        }
    }

    /// The potential multiplied by `s`.
    pub fn scaled(&self, s: f64) -> PotentialSpec {
        match self {
            PotentialSpec::Zero => PotentialSpec::Zero,
            PotentialSpec::Constant(v) => PotentialSpec::Constant(s * v),
            PotentialSpec::Polynomial(c) => PotentialSpec::Polynomial(c.iter().map(|x| s * x).collect()),
            PotentialSpec::TrigSeries { a0, terms } => PotentialSpec::TrigSeries {
                a0: s * a0,
                terms: terms.iter().map(|&(a, b)| (s * a, s * b)).collect(),
            },
        }
    }

    pub(crate) fn all_finite(&self) -> bool {
        match self {
            PotentialSpec::Zero => true,
            PotentialSpec::Constant(c) => c.is_finite(),
            PotentialSpec::Polynomial(c) => c.iter().all(|x| x.is_finite()),
            PotentialSpec::TrigSeries { a0, terms } => {
                a0.is_finite() && terms.iter().all(|(a, b)| a.is_finite() && b.is_finite())
            }
        }
    }
}
