use rayon::prelude::*;
use serde::Serialize;

use super::{finite_sigma, indexed_vertex_values, lowest, with_basis};
use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, MetricGraph};
use crate::quadrature::GaussLegendre;
use crate::secular::{SolverConfig, SpectrumTarget};

pub const DEFAULT_TAU_NODES: usize = 16;
/// Relative spacing below which `λ_n` counts as degenerate at a τ-node.
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// `∫₀¹ Σ_v σ_v |f_n^{τσ}(v)|² dτ` against `λ_n(σ) − λ_n(0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeynmanHellmann {
    pub n: usize,
    pub reconstructed: f64,
    pub direct: f64,
    pub defect: f64,
    /// τ-nodes where `λ_n` was within `gap_tol` of a neighbour; the integral
    /// is still returned since the identity holds for almost every τ.
    pub degenerate_nodes: Vec<f64>,
    pub min_relative_gap: f64,
}

pub fn feynman_hellmann_check(
    g: &MetricGraph,
    sigma: &[Coupling],
    n: usize,
    tau_nodes: usize,
) -> Result<FeynmanHellmann> {
    feynman_hellmann_with(g, sigma, n, tau_nodes, DEFAULT_GAP_TOL, &SolverConfig::default())
}

pub fn feynman_hellmann_with(
    g: &MetricGraph,
    sigma: &[Coupling],
    n: usize,
    tau_nodes: usize,
    gap_tol: f64,
    cfg: &SolverConfig,
) -> Result<FeynmanHellmann> {
    if n == 0 || tau_nodes == 0 {
        return Err(SpectralError::InvalidRequest("index and node count must be positive".into()));
    }
    let coupled = g.with_couplings(sigma)?;
    let s = finite_sigma(&coupled, "the coupling path")?;
    let rule = GaussLegendre::new(tau_nodes);
    let nodes: Vec<(f64, f64)> = rule.mapped(0.0, 1.0).collect();
    let samples: Vec<(f64, f64, f64)> = nodes
        .par_iter()
        .map(|&(tau, w)| {
            let gt = coupled.scaled_couplings(tau);
            let r = with_basis(&gt, SpectrumTarget::Count(n + 1), cfg)?;
            let values = indexed_vertex_values(&gt, &r)?;
            let integrand: f64 = values[n - 1].iter().zip(&s).map(|(f2, sv)| sv * f2).sum();
            let lams = r.values();
            let here = lams[n - 1];
            let scale = here.abs().max(1.0);
            let mut gap = (lams[n] - here) / scale;
            if n >= 2 {
                gap = gap.min((here - lams[n - 2]) / scale);
            }
            Ok((w * integrand, tau, gap))
        })
        .collect::<Result<_>>()?;
    let reconstructed: f64 = samples.iter().map(|s| s.0).sum();
    let degenerate_nodes = samples.iter().filter(|s| s.2 <= gap_tol).map(|s| s.1).collect();
    let min_relative_gap = samples.iter().map(|s| s.2).fold(f64::INFINITY, f64::min);
    let (a, b) = rayon::join(|| lowest(&coupled, n, cfg), || lowest(&coupled.standard(), n, cfg));
    let direct = a?[n - 1] - b?[n - 1];
    Ok(FeynmanHellmann { n, reconstructed, direct, defect: (reconstructed - direct).abs(), degenerate_nodes, min_relative_gap })
}
