use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::{apply_sigma, indexed_point_values, indexed_vertex_values, lowest, running_max, running_means, with_basis};
use super::{ExperimentReport, Point, Verdict};
use crate::eigenfunctions;
use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, MetricGraph};
use crate::secular::{self, SolverConfig, SpectrumTarget};

/// Allowed growth of a running maximum between `⌊N/2⌋` and `N`.
pub const STABILITY_TOL: f64 = 0.1;
/// Relative distance of the final Cesàro mean from its local Weyl limit.
pub const CESARO_TOL: f64 = 0.15;

/// Certified bound on `‖f‖²_∞` for a normalized `f` of form energy at most
/// `energy`:
///
/// `‖f‖²_∞ ≤ [ε(energy + ‖V₋‖_∞) + 2/ε] / (1 − ε·σ̂)` with `σ̂ = Σ_v max(−σ_v, 0)`
///
/// and `ε < min l_e`, `εσ̂ ≤ ½`, chosen near the unconstrained optimum.
pub fn sobolev_sup_bound(g: &MetricGraph, energy: f64) -> f64 {
    let sigma_neg: f64 = g.vertex_ids().filter_map(|v| g.coupling(v).sigma()).map(|s| (-s).max(0.0)).sum();
    let a = (energy + g.potential_negative_sup()).max(0.0);
    let mut cap = 0.999 * g.min_length();
    if sigma_neg > 0.0 {
        cap = cap.min(0.5 / sigma_neg);
    }
    let eps = if a > 0.0 { (2.0 / a).sqrt().min(cap) } else { cap };
    (eps * a + 2.0 / eps) / (1.0 - eps * sigma_neg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupNormScan {
    /// Grid sup-norm per index; each slot of a multiplet holds one basis function.
    pub sup_norms: Vec<f64>,
    pub dirichlet: Vec<f64>,
    /// `√B(λ_n(∞))` from [`sobolev_sup_bound`].
    pub bounds: Vec<f64>,
    pub running_max: Vec<(usize, f64)>,
    pub bound_respected: bool,
    pub verdict: Verdict,
}

fn stable(running: &[(usize, f64)]) -> bool {
    match running.last() {
        Some(&(n, last)) if n >= 2 => last <= (1.0 + STABILITY_TOL) * running[n / 2 - 1].1 + 1e-9,
        Some(_) => true,
        None => false,
    }
}

/// Grid sup-norms against the certified bound chained through the Dirichlet
/// eigenvalue `λ_n(σ) ≤ λ_n(∞)`.
pub fn sup_norm_scan(g: &MetricGraph, sigma: &[Coupling], n: usize) -> Result<SupNormScan> {
    let coupled = apply_sigma(g, sigma)?;
    let r = with_basis(&coupled, SpectrumTarget::Count(n), &SolverConfig::default())?;
    let functions: Vec<_> = r.eigenbasis.iter().flatten().take(n).collect();
    let mut sup_norms = functions.par_iter().map(|f| eigenfunctions::sup_norm(f, &coupled)).collect::<Result<Vec<f64>>>()?;
    sup_norms.truncate(n);
    let dirichlet = secular::dirichlet_eigenvalues(&coupled, n)?;
    let bounds: Vec<f64> = dirichlet.iter().map(|&d| sobolev_sup_bound(&coupled, d).sqrt()).collect();
    let bound_respected = sup_norms.iter().zip(&bounds).all(|(s, b)| s <= b);
    let running_max = running_max(&sup_norms);
    let verdict = Verdict::from_bool(bound_respected && stable(&running_max));
    Ok(SupNormScan { sup_norms, dirichlet, bounds, running_max, bound_respected, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CesaroScan {
    /// Running means of `Σ_v |f_n(v)|²` against `Σ_v 2/(L·deg_v)`, Dirichlet vertices excluded.
    pub vertices: ExperimentReport,
    /// Running means of `|f_n(x)|²` against `2/(L·deg_x)` per supplied point.
    pub points: Vec<ExperimentReport>,
    pub verdict: Verdict,
}

pub fn cesaro_bound_scan(g: &MetricGraph, sigma: &[Coupling], n: usize, points: &[Point]) -> Result<CesaroScan> {
    let cfg = SolverConfig::default();
    let coupled = apply_sigma(g, sigma)?;
    let r = with_basis(&coupled, SpectrumTarget::Count(n), &cfg)?;
    let sums: Vec<f64> = indexed_vertex_values(&coupled, &r)?.iter().take(n).map(|row| row.iter().sum()).collect();
    let limit: f64 = coupled
        .vertex_ids()
        .filter(|&v| !coupled.coupling(v).is_dirichlet())
        .map(|v| 2.0 / (coupled.total_length() * coupled.degree(v) as f64))
        .sum();
    let vertices = ExperimentReport::new("cesaro_vertices", running_means(&sums), limit, CESARO_TOL)
        .with_context(&coupled, &cfg);
    let mut reports = Vec::with_capacity(points.len());
    for &p in points {
        let mut values = indexed_point_values(&coupled, &r, p)?;
        values.truncate(n);
        reports.push(
            ExperimentReport::new("cesaro_point", running_means(&values), p.local_weyl_limit(&coupled)?, CESARO_TOL)
                .with_meta("point", json!(p)),
        );
    }
    let bounded = |rep: &ExperimentReport| {
        rep.verdict.passed() && rep.final_value().is_some_and(|v| v <= 2.0 * rep.theoretical_limit + CESARO_TOL)
    };
    let verdict = Verdict::from_bool(bounded(&vertices) && reports.iter().all(bounded));
    Ok(CesaroScan { vertices, points: reports, verdict })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBoundScan {
    /// Running `max_{n≤N'} |d_n|` (same potential, zero couplings).
    pub d_max: Vec<(usize, f64)>,
    /// Running `max_{n≤N'} |d̂_n|` (no potential, zero couplings).
    pub d_hat_max: Vec<(usize, f64)>,
    pub verdict: Verdict,
}

/// Passes when neither running maximum grows by more than 10% from `⌊N/2⌋` to `N`.
pub fn uniform_bound_scan(g: &MetricGraph, sigma: &[Coupling], n: usize) -> Result<UniformBoundScan> {
    if n == 0 {
        return Err(SpectralError::InvalidRequest("eigenvalue count must be at least 1".into()));
    }
    let cfg = SolverConfig::values_only();
    let coupled = apply_sigma(g, sigma)?;
    let same = g.standard();
    let free = same.without_potential();
    let (a, (b, c)) =
        rayon::join(|| lowest(&coupled, n, &cfg), || rayon::join(|| lowest(&same, n, &cfg), || lowest(&free, n, &cfg)));
    let (a, b, c) = (a?, b?, c?);
    let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
    let d_hat: Vec<f64> = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).collect();
    let d_max = running_max(&d);
    let d_hat_max = running_max(&d_hat);
    let verdict = Verdict::from_bool(stable(&d_max) && stable(&d_hat_max));
    Ok(UniformBoundScan { d_max, d_hat_max, verdict })
}
