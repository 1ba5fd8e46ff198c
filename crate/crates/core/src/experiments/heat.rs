use std::f64::consts::PI;

use serde::Serialize;

use super::{apply_sigma, indexed_point_values, sobolev_sup_bound, with_basis, Point, Verdict};
use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, MetricGraph};
use crate::secular::{SolverConfig, SpectralResult, SpectrumTarget};

/// Largest spectral cutoff the truncated series may require.
pub const MAX_HEAT_CUTOFF: f64 = 1e8;
/// Allowed excess of the left side in the domination check.
pub const DOMINATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeatDiagonal {
    pub t: f64,
    pub point: Point,
    pub value: f64,
    /// `(1/√(4πt))·(2/deg_x)`; zero at a Dirichlet vertex.
    pub asymptote: f64,
    pub terms: usize,
    pub cutoff: f64,
    /// `e^{−Λt}·B(Λ)` with `B` the certified bound on `‖f‖²_∞` at energy `Λ`.
    pub tail_bound: f64,
}

/// Smallest `Λ` with `e^{−Λt}·B(Λ) < tol`.
fn truncation_cutoff(g: &MetricGraph, t: f64, tol: f64) -> Result<f64> {
    let mut lambda = -tol.ln() / t;
    for _ in 0..50 {
        let next = (sobolev_sup_bound(g, lambda).ln() - tol.ln()) / t;
        if (next - lambda).abs() <= 1e-9 * lambda.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda = lambda.max(1.0) * (1.0 + 1e-6);
    if !(lambda < MAX_HEAT_CUTOFF) {
        return Err(SpectralError::Truncation { tail: tol, lambda });
    }
    Ok(lambda)
}

fn series(g: &MetricGraph, r: &SpectralResult, point: Point, t: f64) -> Result<(f64, usize)> {
    let values = indexed_point_values(g, r, point)?;
    let lams = r.values();
    let mut sum = 0.0;
    // ascending terms are summed from the small end for accuracy
    for (lam, v) in lams.iter().zip(&values).rev() {
        sum += (-lam * t).exp() * v;
    }
    Ok((sum, lams.len()))
}

fn asymptote(g: &MetricGraph, point: Point, t: f64) -> Result<f64> {
    Ok(point.local_weyl_limit(g)? * g.total_length() / (4.0 * PI * t).sqrt())
}

/// `Σ_n e^{−λ_n t}|f_n(point)|²`, truncated once the certified tail term
/// drops below `trunc_tol`.
pub fn heat_kernel_diag(g: &MetricGraph, sigma: &[Coupling], point: Point, t: f64, trunc_tol: f64) -> Result<HeatDiagonal> {
    if !(t > 0.0) || !(trunc_tol > 0.0) {
        return Err(SpectralError::InvalidRequest("t and trunc_tol must be positive".into()));
    }
    let coupled = apply_sigma(g, sigma)?;
    let cutoff = truncation_cutoff(&coupled, t, trunc_tol)?;
    let r = with_basis(&coupled, SpectrumTarget::Cutoff(cutoff), &SolverConfig::default())?;
    let (value, terms) = series(&coupled, &r, point, t)?;
    Ok(HeatDiagonal {
        t,
        point,
        value,
        asymptote: asymptote(&coupled, point, t)?,
        terms,
        cutoff,
        tail_bound: (-cutoff * t).exp() * sobolev_sup_bound(&coupled, cutoff),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominationSample {
    pub t: f64,
    pub point: Point,
    /// `p^{H_σ^V}(t; x, x)`.
    pub lhs: f64,
    /// `e^{(σ̂ + V̂₋)t}·p^{H_0^0}(t; x, x)`.
    pub rhs: f64,
    pub violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominationCheck {
    pub samples: Vec<DominationSample>,
    pub max_violation: f64,
    pub verdict: Verdict,
}

/// Pointwise comparison of the heat diagonal of the coupled operator with
/// the scaled free Kirchhoff one. Requires `σ_v ≥ −σ̂` and `V ≥ −V̂₋`.
pub fn heat_domination_check(
    g: &MetricGraph,
    sigma: &[Coupling],
    points: &[Point],
    times: &[f64],
    sigma_hat: f64,
    v_hat: f64,
    trunc_tol: f64,
) -> Result<DominationCheck> {
    let coupled = apply_sigma(g, sigma)?;
    for v in coupled.vertex_ids() {
        if let Some(s) = coupled.coupling(v).sigma() {
            if s < -sigma_hat {
                return Err(SpectralError::InvalidRequest(format!(
                    "coupling {s} at `{}` is below −σ̂ = {}",
                    coupled.vertex(v).name,
                    -sigma_hat
                )));
            }
        }
    }
    // sampled minimum: the certified bound carries a Lipschitz margin that
    // would reject potentials touching zero
    for e in coupled.edges() {
        let min = (0..=4096).map(|i| e.potential.eval(e.length * i as f64 / 4096.0, e.length)).fold(f64::INFINITY, f64::min);
        if min < -v_hat - 1e-12 {
            return Err(SpectralError::InvalidRequest(format!("potential on `{}` drops below −V̂₋ = {}", e.name, -v_hat)));
        }
    }
    let t_min = times.iter().copied().fold(f64::INFINITY, f64::min);
    if !(t_min > 0.0) {
        return Err(SpectralError::InvalidRequest("times must be positive".into()));
    }
    let free = coupled.standard().without_potential();
    let cfg = SolverConfig::default();
    let (a, b) = rayon::join(
        || -> Result<SpectralResult> {
            let cut = truncation_cutoff(&coupled, t_min, trunc_tol)?;
            with_basis(&coupled, SpectrumTarget::Cutoff(cut), &cfg)
        },
        || -> Result<SpectralResult> {
            let cut = truncation_cutoff(&free, t_min, trunc_tol)?;
            with_basis(&free, SpectrumTarget::Cutoff(cut), &cfg)
        },
    );
    let (ra, rb) = (a?, b?);
    let mut samples = Vec::with_capacity(points.len() * times.len());
    for &t in times {
        for &p in points {
            let lhs = series(&coupled, &ra, p, t)?.0;
            let rhs = ((sigma_hat + v_hat) * t).exp() * series(&free, &rb, p, t)?.0;
            samples.push(DominationSample { t, point: p, lhs, rhs, violation: lhs - rhs });
        }
    }
    let max_violation = samples.iter().map(|s| s.violation).fold(f64::NEG_INFINITY, f64::max);
    Ok(DominationCheck { samples, max_violation, verdict: Verdict::from_bool(max_violation <= DOMINATION_TOL) })
}
