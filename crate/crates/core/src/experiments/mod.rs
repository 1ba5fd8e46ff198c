//! Reproducible computations paired with their theoretical targets.
//!
//! Eigenvalues are indexed from 1 (the ground state is `λ_1`) and counted
//! with multiplicity. Per-index vertex and point values at a degenerate
//! eigenvalue are the eigenspace sum split evenly over its slots, which makes
//! every reported sequence independent of the basis chosen inside the
//! eigenspace.

mod bounds;
mod feynman_hellmann;
mod gaps;
mod heat;
mod report;
mod star;
mod weyl;

pub use bounds::{
    cesaro_bound_scan, CESARO_TOL, STABILITY_TOL, sobolev_sup_bound, sup_norm_scan, uniform_bound_scan, CesaroScan, SupNormScan,
    UniformBoundScan,
};
pub use feynman_hellmann::{feynman_hellmann_check, FeynmanHellmann, DEFAULT_GAP_TOL, DEFAULT_TAU_NODES};
pub use gaps::{gap_sequence, mean_gap, mean_gap_limit, MEAN_GAP_TOL, mean_gap_hat, GapEntry, GapSequence, ReferenceKind};
pub use heat::{heat_domination_check, DOMINATION_TOL, MAX_HEAT_CUTOFF, heat_kernel_diag, DominationCheck, DominationSample, HeatDiagonal};
pub use report::{fmt_f64, graph_hash, ExperimentReport, Verdict};
pub use star::{star_oracle, StarOracle, EVEN_GAP_TOL};
pub use weyl::{karamata_ratio, LOCAL_WEYL_TOL, local_weyl, weyl_counting, WeylCount};

use serde::Serialize;

use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, EdgeId, MetricGraph, VertexId};
use crate::secular::{self, SolverConfig, SpectralResult, SpectrumTarget};

/// A point of the graph: a vertex or an edge coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Point {
    Vertex(VertexId),
    Edge { edge: EdgeId, x: f64 },
}

impl Point {
    /// Edge endpoints are mapped to their vertex; out-of-range coordinates
    /// are rejected.
    pub fn normalized(self, g: &MetricGraph) -> Result<Point> {
        match self {
            Point::Vertex(v) if v.0 < g.vertices().len() => Ok(self),
            Point::Vertex(v) => Err(SpectralError::InvalidRequest(format!("no vertex with index {}", v.0))),
            Point::Edge { edge, x } => {
                if edge.0 >= g.edges().len() {
                    return Err(SpectralError::InvalidRequest(format!("no edge with index {}", edge.0)));
                }
                let e = g.edge(edge);
                if !(0.0..=e.length).contains(&x) {
                    return Err(crate::error::OdeError::OutOfRange { x, length: e.length }.into());
                }
                Ok(if x == 0.0 {
                    Point::Vertex(e.from)
                } else if x == e.length {
                    Point::Vertex(e.to)
                } else {
                    self
                })
            }
        }
    }

    /// `deg_x`: the vertex degree, or 2 inside an edge.
    pub fn degree(self, g: &MetricGraph) -> Result<usize> {
        Ok(match self.normalized(g)? {
            Point::Vertex(v) => g.degree(v),
            Point::Edge { .. } => 2,
        })
    }

    /// `2/(L·deg_x)`; zero at Dirichlet vertices where every eigenfunction vanishes.
    pub fn local_weyl_limit(self, g: &MetricGraph) -> Result<f64> {
        if let Point::Vertex(v) = self.normalized(g)? {
            if g.coupling(v).is_dirichlet() {
                return Ok(0.0);
            }
        }
        Ok(2.0 / (g.total_length() * self.degree(g)? as f64))
    }
}

/// Graph with couplings replaced by `sigma` (one entry per vertex).
pub fn apply_sigma(g: &MetricGraph, sigma: &[Coupling]) -> Result<MetricGraph> {
    Ok(g.with_couplings(sigma)?)
}

/// Finite couplings only.
pub(crate) fn finite_sigma(g: &MetricGraph, what: &'static str) -> Result<Vec<f64>> {
    g.vertex_ids()
        .map(|v| {
            g.coupling(v).sigma().ok_or_else(|| {
                SpectralError::from(crate::error::GraphError::DirichletVertex {
                    vertex: g.vertex(v).name.clone(),
                    operation: what,
                })
            })
        })
        .collect()
}

/// Lowest `n` eigenvalues with multiplicity.
pub(crate) fn lowest(g: &MetricGraph, n: usize, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let cfg = SolverConfig { eigenfunctions: false, ..cfg.clone() };
    let r = secular::eigenvalues_with(g, SpectrumTarget::Count(n), &cfg)?;
    Ok(r.first(n))
}

/// Spectrum with eigenbases for the lowest `n` eigenvalues.
pub(crate) fn with_basis(g: &MetricGraph, target: SpectrumTarget, cfg: &SolverConfig) -> Result<SpectralResult> {
    let cfg = SolverConfig { eigenfunctions: true, ..cfg.clone() };
    secular::eigenvalues_with(g, target, &cfg)
}

/// `|f(point)|²` per index `n`, degenerate eigenspaces split evenly.
pub fn indexed_point_values(g: &MetricGraph, result: &SpectralResult, point: Point) -> Result<Vec<f64>> {
    let point = point.normalized(g)?;
    let mut out = Vec::with_capacity(result.len());
    for (ev, basis) in result.eigenvalues.iter().zip(&result.eigenbasis) {
        let mut sum = 0.0;
        for f in basis {
            let value = match point {
                Point::Vertex(v) => {
                    if g.coupling(v).is_dirichlet() {
                        0.0
                    } else {
                        let (e, end) = g.incidence(v)[0];
                        f.end_value(e, end)
                    }
                }
                Point::Edge { edge, x } => f.value(edge, x)?,
            };
            sum += value * value;
        }
        out.extend(std::iter::repeat_n(sum / ev.multiplicity as f64, ev.multiplicity));
    }
    Ok(out)
}

/// `[n][v] = |f_n(v)|²`, degenerate eigenspaces split evenly.
pub fn indexed_vertex_values(g: &MetricGraph, result: &SpectralResult) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(result.len());
    for (ev, basis) in result.eigenvalues.iter().zip(&result.eigenbasis) {
        let mut sums = vec![0.0; g.vertices().len()];
        for f in basis {
            for (v, value) in crate::eigenfunctions::vertex_values(f, g)? {
                sums[v.0] += value;
            }
        }
        let m = ev.multiplicity as f64;
        for _ in 0..ev.multiplicity {
            out.push(sums.iter().map(|s| s / m).collect());
        }
    }
    Ok(out)
}

/// `(N', (1/N')Σ_{n≤N'} a_n)` for every prefix.
pub fn running_means(values: &[f64]) -> Vec<(usize, f64)> {
    let mut sum = 0.0;
    values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            sum += v;
            (i + 1, sum / (i + 1) as f64)
        })
        .collect()
}

/// `(N', max_{n≤N'} a_n)` for every prefix.
pub fn running_max(values: &[f64]) -> Vec<(usize, f64)> {
    let mut best = f64::NEG_INFINITY;
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            best = best.max(v);
            (i + 1, best)
        })
        .collect()
}
