//! L²-normalized eigenfunctions rebuilt from secular null vectors.
//!
//! On edge `e` the eigenfunction is `α_e c_e + β_e s_e`. Gram matrices use
//! composite Gauss–Legendre quadrature with at least eight panels per local
//! wavelength `2π/√max(|λ − v|, 1)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SpectralError};
use crate::graph::{Coupling, EdgeEnd, EdgeId, MetricGraph, VertexId};
use crate::ode::{self, FundamentalPair};
use crate::quadrature::GaussLegendre;

/// Largest tolerated condition number of the normalized Gram matrix.
pub const MAX_GRAM_CONDITION: f64 = 1e8;
/// Tolerance of the vertex-value consistency check in [`vertex_values`].
pub const CONTINUITY_TOL: f64 = 1e-8;
const PANELS_PER_WAVELENGTH: f64 = 8.0;
const SUP_POINTS_PER_WAVELENGTH: f64 = 32.0;

/// One normalized eigenfunction.
#[derive(Debug, Clone)]
pub struct Eigenfunction {
    pub lambda: f64,
    /// `(α_e, β_e)` per edge.
    pub coefficients: Vec<(f64, f64)>,
    /// Factor applied to the raw null vector on the way to unit norm.
    pub normalization: f64,
    pub quadrature_order: usize,
    pairs: Arc<Vec<FundamentalPair>>,
}

impl Eigenfunction {
    /// `(f_e(x), f_e'(x))`.
    pub fn eval(&self, e: EdgeId, x: f64) -> Result<(f64, f64)> {
        let (a, b) = self.coefficients[e.0];
        Ok(ode::edge_solution_eval(&self.pairs[e.0], a, b, x)?)
    }

    pub fn value(&self, e: EdgeId, x: f64) -> Result<f64> {
        Ok(self.eval(e, x)?.0)
    }

    /// Value at an edge end from the stored end data.
    pub fn end_value(&self, e: EdgeId, end: EdgeEnd) -> f64 {
        let (a, b) = self.coefficients[e.0];
        match end {
            EdgeEnd::Start => a,
            EdgeEnd::End => {
                let p = &self.pairs[e.0];
                a * p.c_end + b * p.s_end
            }
        }
    }

    /// Inward derivative at an edge end.
    pub fn end_inward_derivative(&self, e: EdgeId, end: EdgeEnd) -> f64 {
        let (a, b) = self.coefficients[e.0];
        match end {
            EdgeEnd::Start => b,
            EdgeEnd::End => {
                let p = &self.pairs[e.0];
                -(a * p.c_prime_end + b * p.s_prime_end)
            }
        }
    }

    /// Largest vertex-condition residual: value mismatches and Dirichlet
    /// values as they are, flux defects divided by `√max(|λ|, 1) + |σ|`.
    pub fn vertex_residual(&self, g: &MetricGraph) -> Result<f64> {
        let ks = self.lambda.abs().max(1.0).sqrt();
        let mut worst = 0.0f64;
        for v in g.vertex_ids() {
            let ends = g.incidence(v);
            let values: Vec<f64> = ends.iter().map(|&(e, end)| self.end_value(e, end)).collect();
            match g.coupling(v) {
                Coupling::Dirichlet => {
                    worst = values.iter().fold(worst, |w, x| w.max(x.abs()));
                }
                Coupling::Delta(sigma) => {
                    worst = values.iter().fold(worst, |w, x| w.max((x - values[0]).abs()));
                    let flux: f64 = ends.iter().map(|&(e, end)| self.end_inward_derivative(e, end)).sum();
                    worst = worst.max((flux - sigma * values[0]).abs() / (ks + sigma.abs()));
                }
            }
        }
        Ok(worst)
    }

    /// `⟨self, other⟩_{L²(Γ)}` by the same quadrature as the Gram matrix.
    pub fn inner_product(&self, other: &Eigenfunction, g: &MetricGraph) -> Result<f64> {
        let mut total = 0.0;
        for e in g.edge_ids() {
            let (nodes, weights) = quadrature_grid(g, e, self.lambda.max(other.lambda), self.quadrature_order);
            for (x, w) in nodes.iter().zip(&weights) {
                total += w * self.value(e, *x)? * other.value(e, *x)?;
            }
        }
        Ok(total)
    }
}

fn local_wavenumber(g: &MetricGraph, e: EdgeId, lambda: f64) -> f64 {
    let edge = g.edge(e);
    let (lo, hi) = edge.potential.bounds(edge.length);
    (lambda - lo).abs().max((lambda - hi).abs()).max(1.0).sqrt()
}

/// Composite Gauss–Legendre nodes and weights on edge `e`.
fn quadrature_grid(g: &MetricGraph, e: EdgeId, lambda: f64, order: usize) -> (Vec<f64>, Vec<f64>) {
    let l = g.edge(e).length;
    let k = local_wavenumber(g, e, lambda);
    let panels = (PANELS_PER_WAVELENGTH * l * k / (2.0 * PI)).ceil().max(1.0) as usize;
    let rule = GaussLegendre::cached(order);
    let width = l / panels as f64;
    let mut nodes = Vec::with_capacity(panels * order);
    let mut weights = Vec::with_capacity(panels * order);
    for p in 0..panels {
        for (x, w) in rule.mapped(p as f64 * width, (p + 1) as f64 * width) {
            nodes.push(x);
            weights.push(w);
        }
    }
    (nodes, weights)
}

/// Orthonormal eigenfunctions spanning the null vectors `null_basis`
/// (physical coefficient vectors `(α_0, β_0, α_1, β_1, …)`).
pub fn reconstruct(g: &MetricGraph, lambda_star: f64, null_basis: &[Vec<f64>]) -> Result<Vec<Eigenfunction>> {
    reconstruct_with(g, lambda_star, null_basis, 10)
}

pub fn reconstruct_with(
    g: &MetricGraph,
    lambda_star: f64,
    null_basis: &[Vec<f64>],
    quadrature_order: usize,
) -> Result<Vec<Eigenfunction>> {
    let m = null_basis.len();
    let n_edges = g.edges().len();
    if m == 0 || null_basis.iter().any(|v| v.len() != 2 * n_edges) {
        return Err(SpectralError::InvalidRequest(format!(
            "null basis must hold at least one vector of length {}",
            2 * n_edges
        )));
    }
    let mut pairs = Vec::with_capacity(n_edges);
    let mut gram = DMatrix::<f64>::zeros(m, m);
    for e in g.edge_ids() {
        let (nodes, weights) = quadrature_grid(g, e, lambda_star, quadrature_order);
        let mut pair = ode::fundamental_pair(g, e, lambda_star, Some(&nodes))?;
        let samples = pair.interior_samples.take().expect("samples requested");
        for (s, w) in samples.iter().zip(&weights) {
            let u: Vec<f64> = null_basis.iter().map(|x| x[2 * e.0] * s.c + x[2 * e.0 + 1] * s.s).collect();
            for i in 0..m {
                for j in i..m {
                    gram[(i, j)] += w * u[i] * u[j];
                }
            }
        }
        pairs.push(pair);
    }
    for i in 0..m {
        for j in 0..i {
            gram[(i, j)] = gram[(j, i)];
        }
    }
    let d: Vec<f64> = (0..m).map(|i| 1.0 / gram[(i, i)].sqrt()).collect();
    if d.iter().any(|x| !x.is_finite()) {
        return Err(SpectralError::DependentBasis(f64::INFINITY));
    }
    let normalized = DMatrix::from_fn(m, m, |i, j| gram[(i, j)] * d[i] * d[j]);
    let spectrum = SymmetricEigen::new(normalized.clone()).eigenvalues;
    let (lo, hi) = (spectrum.min(), spectrum.max());
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if condition > MAX_GRAM_CONDITION {
        return Err(SpectralError::DependentBasis(condition));
    }
    let chol = normalized.cholesky().ok_or(SpectralError::DependentBasis(condition))?;
    // columns of L^{-T} combine the scaled raw vectors into an orthonormal set
    let l_inv_t = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(m, m))
        .ok_or(SpectralError::DependentBasis(condition))?
        .transpose();
    let pairs = Arc::new(pairs);
    Ok((0..m)
        .map(|j| {
            let coefficients = (0..n_edges)
                .map(|e| {
                    let mut a = 0.0;
                    let mut b = 0.0;
                    for i in 0..m {
                        let w = d[i] * l_inv_t[(i, j)];
                        a += w * null_basis[i][2 * e];
                        b += w * null_basis[i][2 * e + 1];
                    }
                    (a, b)
                })
                .collect();
            Eigenfunction {
                lambda: lambda_star,
                coefficients,
                normalization: d[j] * l_inv_t[(j, j)],
                quadrature_order,
                pairs: Arc::clone(&pairs),
            }
        })
        .collect())
}

/// `|f(v)|²` per vertex (zero at Dirichlet vertices).
pub fn vertex_values(f: &Eigenfunction, g: &MetricGraph) -> Result<BTreeMap<VertexId, f64>> {
    let mut out = BTreeMap::new();
    for v in g.vertex_ids() {
        let values: Vec<f64> = g.incidence(v).iter().map(|&(e, end)| f.end_value(e, end)).collect();
        let reference = if g.coupling(v).is_dirichlet() { 0.0 } else { values[0] };
        let residual = values.iter().map(|x| (x - reference).abs()).fold(0.0, f64::max);
        if residual > CONTINUITY_TOL * reference.abs().max(1.0) {
            return Err(SpectralError::ContinuityResidual { vertex: g.vertex(v).name.clone(), residual });
        }
        out.insert(v, reference * reference);
    }
    Ok(out)
}

/// `|f_e(x)|²`.
pub fn point_value(f: &Eigenfunction, e: EdgeId, x: f64) -> Result<f64> {
    let v = f.value(e, x)?;
    Ok(v * v)
}

/// Grid maximum of `|f|` with at least 32 points per local wavelength (and
/// 64 per edge). Not a certified bound: peaks between grid points can be
/// missed by a relative amount of order `(π/32)²/2`.
pub fn sup_norm(f: &Eigenfunction, g: &MetricGraph) -> Result<f64> {
    let mut best = 0.0f64;
    for e in g.edge_ids() {
        let l = g.edge(e).length;
        let k = local_wavenumber(g, e, f.lambda);
        let n = (SUP_POINTS_PER_WAVELENGTH * l * k / (2.0 * PI)).ceil().max(64.0) as usize;
        for i in 0..=n {
            best = best.max(f.value(e, l * i as f64 / n as f64)?.abs());
        }
    }
    Ok(best)
}
