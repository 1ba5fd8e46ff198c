use std::f64::consts::PI;

use serde::Serialize;
use serde_json::json;

use super::{apply_sigma, indexed_point_values, running_means, with_basis, ExperimentReport, Point};
use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, MetricGraph};
use crate::secular::{self, SolverConfig, SpectrumTarget};

/// Default relative tolerance of the local Weyl verdict.
pub const LOCAL_WEYL_TOL: f64 = 0.05;

/// Running Cesàro means of `|f_n(point)|²` against `2/(L·deg_x)`.
pub fn local_weyl(g: &MetricGraph, sigma: &[Coupling], point: Point, n: usize) -> Result<ExperimentReport> {
    let cfg = SolverConfig::default();
    let coupled = apply_sigma(g, sigma)?;
    let limit = point.local_weyl_limit(&coupled)?;
    let r = with_basis(&coupled, SpectrumTarget::Count(n), &cfg)?;
    let mut values = indexed_point_values(&coupled, &r, point)?;
    values.truncate(n);
    Ok(ExperimentReport::new("local_weyl", running_means(&values), limit, LOCAL_WEYL_TOL)
        .with_context(&coupled, &cfg)
        .with_meta("point", json!(point))
        .with_meta("deg_x", json!(point.degree(&coupled)?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylCount {
    pub lambda: f64,
    pub count: usize,
    pub weyl: f64,
    pub ratio: f64,
}

/// `N(Λ)` with multiplicity next to `(L/π)√Λ`.
pub fn weyl_counting(g: &MetricGraph, sigma: &[Coupling], lambda: f64) -> Result<WeylCount> {
    if !(lambda > 0.0) {
        return Err(SpectralError::InvalidRequest(format!("Weyl comparison needs Λ > 0, got {lambda}")));
    }
    let coupled = apply_sigma(g, sigma)?;
    let r = secular::eigenvalues_with(&coupled, SpectrumTarget::Cutoff(lambda), &SolverConfig::values_only())?;
    let count = r.count_at_most(lambda);
    let weyl = coupled.total_length() / PI * lambda.sqrt();
    Ok(WeylCount { lambda, count, weyl, ratio: count as f64 / weyl })
}

/// `Σ_{λ_n ≤ Λ} |f_n(x)|² / ((2/(π deg_x))·√Λ)`, which tends to 1.
pub fn karamata_ratio(g: &MetricGraph, sigma: &[Coupling], point: Point, lambda: f64) -> Result<f64> {
    let coupled = apply_sigma(g, sigma)?;
    if point.local_weyl_limit(&coupled)? == 0.0 {
        return Err(SpectralError::InvalidRequest("spectral function vanishes at a Dirichlet vertex".into()));
    }
    let r = with_basis(&coupled, SpectrumTarget::Cutoff(lambda), &SolverConfig::default())?;
    let values = indexed_point_values(&coupled, &r, point)?;
    let sum: f64 = values.iter().sum();
    Ok(sum / (2.0 / (PI * point.degree(&coupled)? as f64) * lambda.sqrt()))
}
