use serde::Serialize;

use super::{apply_sigma, lowest, running_means, ExperimentReport};
use crate::error::Result;
use crate::graph::{Coupling, MetricGraph};
use crate::secular::SolverConfig;

/// Default relative tolerance of the mean-gap verdicts.
pub const MEAN_GAP_TOL: f64 = 0.02;

/// Which spectrum the coupled eigenvalues are compared with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReferenceKind {
    /// Same potential, all couplings zero: `d_n`.
    SameV,
    /// No potential, all couplings zero: `d̂_n`.
    FreeNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEntry {
    pub n: usize,
    pub lambda_sigma: f64,
    pub lambda_reference: f64,
    pub d: f64,
}

/// Index-aligned eigenvalue differences (order statistics with multiplicity).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSequence {
    #[serde(skip)]
    pub sigma: Vec<Coupling>,
    pub entries: Vec<GapEntry>,
    pub reference_kind: ReferenceKind,
}

impl GapSequence {
    pub fn gaps(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.d).collect()
    }
}

fn reference_graph(g: &MetricGraph, kind: ReferenceKind) -> MetricGraph {
    match kind {
        ReferenceKind::SameV => g.standard(),
        ReferenceKind::FreeNeumann => g.standard().without_potential(),
    }
}

pub fn gap_sequence(g: &MetricGraph, sigma: &[Coupling], n: usize, kind: ReferenceKind) -> Result<GapSequence> {
    gap_sequence_with(g, sigma, n, kind, &SolverConfig::values_only())
}

pub fn gap_sequence_with(
    g: &MetricGraph,
    sigma: &[Coupling],
    n: usize,
    kind: ReferenceKind,
    cfg: &SolverConfig,
) -> Result<GapSequence> {
    let coupled = apply_sigma(g, sigma)?;
    let reference = reference_graph(g, kind);
    let (a, b) = rayon::join(|| lowest(&coupled, n, cfg), || lowest(&reference, n, cfg));
    let (a, b) = (a?, b?);
    let entries = a
        .iter()
        .zip(&b)
        .enumerate()
        .map(|(i, (&ls, &lr))| GapEntry { n: i + 1, lambda_sigma: ls, lambda_reference: lr, d: ls - lr })
        .collect();
    Ok(GapSequence { sigma: sigma.to_vec(), entries, reference_kind: kind })
}

/// `(2/L)·Σ_v σ_v/deg_v`.
pub fn mean_gap_limit(g: &MetricGraph) -> Result<f64> {
    Ok(2.0 / g.total_length() * g.effective_circumference()?)
}

/// Running means of `d_n` against `(2/L)·Σ_v σ_v/deg_v`.
pub fn mean_gap(g: &MetricGraph, sigma: &[Coupling], n: usize) -> Result<ExperimentReport> {
    let cfg = SolverConfig::values_only();
    let limit = mean_gap_limit(&apply_sigma(g, sigma)?)?;
    let seq = gap_sequence_with(g, sigma, n, ReferenceKind::SameV, &cfg)?;
    Ok(ExperimentReport::new("mean_gap", running_means(&seq.gaps()), limit, MEAN_GAP_TOL)
        .with_context(&apply_sigma(g, sigma)?, &cfg))
}

/// Running means of `d̂_n` against `(2/L)(Σ_v σ_v/deg_v + ½Σ_e ∫ v_e)`.
pub fn mean_gap_hat(g: &MetricGraph, sigma: &[Coupling], n: usize) -> Result<ExperimentReport> {
    let cfg = SolverConfig::values_only();
    let coupled = apply_sigma(g, sigma)?;
    let limit = 2.0 / g.total_length() * (coupled.effective_circumference()? + 0.5 * g.potential_integral());
    let seq = gap_sequence_with(g, sigma, n, ReferenceKind::FreeNeumann, &cfg)?;
    Ok(ExperimentReport::new("mean_gap_hat", running_means(&seq.gaps()), limit, MEAN_GAP_TOL)
        .with_context(&coupled, &cfg))
}
