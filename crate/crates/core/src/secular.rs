//! Secular matrix `M(λ)` in the fundamental-pair basis and the eigenvalue
//! search built on it.
//!
//! Column `2j` holds `α_j` and column `2j + 1` holds `β_j` of the edge
//! solution `u_j = α_j c_j + β_j s_j`. Per vertex there are `deg − 1`
//! continuity rows plus one flux row `Σ ∂u − σ u = 0` (inward derivatives),
//! or `deg` value rows at a Dirichlet vertex.
//!
//! The determinant is evaluated on a structurally scaled copy: the `β`
//! columns carry a factor `k_s = √max(|λ|, 1)`, flux rows carry `1/k_s`, and
//! both columns of an edge carry `e^{−κ l}` with `κ l` the hyperbolic growth
//! exponent. All factors are positive and continuous in `λ`, so zeros and
//! signs of the determinant are unchanged while entries stay of order one.
//!
//! The search walks a grid in `k = sign(λ)√|λ|` with step `π/(8L)`, polishes
//! sign changes with Brent's method, and treats sign-free local minima of
//! `log|det|` as candidates for even-order roots (accepted by a singular
//! value rank test). Counts are cross-checked block by block against the
//! finite element inertia count; a disagreeing block is rescanned on a finer
//! grid.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::eigenfunctions::{self, Eigenfunction};
use crate::error::{Result, SpectralError};
use crate::fem::{self, FemMesh, FemSystem};
use crate::graph::{Coupling, EdgeEnd, EdgeId, MetricGraph, VertexId};
use crate::ode::{self, FundamentalPair};
use crate::roots;

/// Tolerances and switches of the eigenvalue search.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Singular values below `rank_tol · σ_max` count as null directions.
    pub rank_tol: f64,
    /// Relative distance within which a supplied `λ` is matched to a root.
    pub bracket_tol: f64,
    /// Relative distance below which two located roots are one eigenvalue.
    pub merge_tol: f64,
    /// Grid step is `π / (scan_density · L)` in `k`.
    pub scan_density: f64,
    /// Eigenvalues (with multiplicity) between oracle checkpoints.
    pub checkpoint_spacing: usize,
    /// Rescans of a disputed block before giving up.
    pub max_refinements: usize,
    /// Build the orthonormal eigenbasis of every eigenvalue.
    pub eigenfunctions: bool,
    /// Gauss–Legendre order of the eigenfunction Gram quadrature.
    pub quadrature_order: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rank_tol: 1e-7,
            bracket_tol: 1e-9,
            merge_tol: 1e-9,
            scan_density: 8.0,
            checkpoint_spacing: 40,
            max_refinements: 6,
            eigenfunctions: true,
            quadrature_order: 10,
        }
    }
}

impl SolverConfig {
    /// Eigenvalues only.
    pub fn values_only() -> Self {
        Self { eigenfunctions: false, ..Self::default() }
    }
}

/// How far up the spectrum to go.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SpectrumTarget {
    /// The lowest `n` eigenvalues counted with multiplicity.
    Count(usize),
    /// All eigenvalues `≤ Λ`.
    Cutoff(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coefficient {
    Alpha,
    Beta,
}

/// Meaning of one secular row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `value(first) − value(other) = 0`.
    Continuity { vertex: VertexId, first: (EdgeId, EdgeEnd), other: (EdgeId, EdgeEnd) },
    /// `Σ inward derivatives − σ · value = 0`.
    Flux { vertex: VertexId },
    /// `value(end) = 0`.
    Dirichlet { vertex: VertexId, end: (EdgeId, EdgeEnd) },
}

/// `M(λ)` with its scaling. `entries = diag(row_scale) · M · diag(column_scale)`.
#[derive(Debug, Clone)]
pub struct SecularMatrix {
    pub lambda: f64,
    pub entries: DMatrix<f64>,
    pub row_plan: Vec<RowKind>,
    pub column_plan: Vec<(EdgeId, Coefficient)>,
    pub row_scale: Vec<f64>,
    pub column_scale: Vec<f64>,
}

impl SecularMatrix {
    /// The unscaled vertex-condition matrix.
    pub fn physical(&self) -> DMatrix<f64> {
        let mut m = self.entries.clone();
        for (r, &rs) in self.row_scale.iter().enumerate() {
            for (c, &cs) in self.column_scale.iter().enumerate() {
                m[(r, c)] /= rs * cs;
            }
        }
        m
    }

    /// Sign and `log|det|` of the scaled matrix.
    pub fn signed_log_det(&self) -> (i8, f64) {
        let lu = self.entries.clone().lu();
        let u = lu.u();
        let mut sign: f64 = lu.p().determinant();
        let mut log = 0.0;
        for i in 0..u.nrows() {
            let d = u[(i, i)];
            if d == 0.0 || !d.is_finite() {
                return (0, f64::NEG_INFINITY);
            }
            sign *= d.signum();
            log += d.abs().ln();
        }
        (if sign > 0.0 { 1 } else { -1 }, log)
    }

    /// Singular values (descending) and right singular vectors as rows.
    fn svd(&self) -> (Vec<f64>, DMatrix<f64>) {
        let svd = self.entries.clone().svd(false, true);
        let vt = svd.v_t.expect("right singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let values = order.iter().map(|&i| svd.singular_values[i]).collect();
        let rows = DMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
        (values, rows)
    }

    /// `σ_min / max(σ_max, 1)` of the scaled matrix. The floor matters when
    /// every entry vanishes at once, as for a loop at its double roots.
    pub fn rank_ratio(&self) -> f64 {
        let sv = self.entries.clone().singular_values();
        sv.min() / sv.max().max(1.0)
    }

    /// Number of singular values below `rank_tol · max(σ_max, 1)`.
    pub fn nullity(&self, rank_tol: f64) -> usize {
        let sv = self.entries.clone().singular_values();
        let scale = sv.max().max(1.0);
        sv.iter().filter(|&&s| s <= rank_tol * scale).count()
    }

    /// Physical coefficient vectors spanning the `dim` smallest singular
    /// directions.
    pub fn null_basis(&self, dim: usize) -> Vec<Vec<f64>> {
        let (values, rows) = self.svd();
        let n = values.len();
        (n - dim.min(n)..n)
            .rev()
            .map(|r| (0..n).map(|c| rows[(r, c)] * self.column_scale[c]).collect())
            .collect()
    }
}

fn value_entries(pair: &FundamentalPair, end: EdgeEnd) -> (f64, f64) {
    match end {
        EdgeEnd::Start => (1.0, 0.0),
        EdgeEnd::End => (pair.c_end, pair.s_end),
    }
}

fn inward_derivative_entries(pair: &FundamentalPair, end: EdgeEnd) -> (f64, f64) {
    match end {
        EdgeEnd::Start => (0.0, 1.0),
        EdgeEnd::End => (-pair.c_prime_end, -pair.s_prime_end),
    }
}

/// Fundamental pairs (end values only) of every edge at `λ`.
pub(crate) fn edge_pairs(g: &MetricGraph, lambda: f64) -> Result<Vec<FundamentalPair>> {
    g.edge_ids().map(|e| ode::end_values(g, e, lambda).map_err(SpectralError::from)).collect()
}

pub(crate) fn assemble(g: &MetricGraph, lambda: f64, pairs: &[FundamentalPair]) -> SecularMatrix {
    let n = 2 * g.edges().len();
    let ks = lambda.abs().max(1.0).sqrt();
    let mut column_plan = Vec::with_capacity(n);
    let mut column_scale = Vec::with_capacity(n);
    for (j, pair) in pairs.iter().enumerate() {
        let damp = (-pair.log_scale).exp();
        column_plan.push((EdgeId(j), Coefficient::Alpha));
        column_plan.push((EdgeId(j), Coefficient::Beta));
        column_scale.push(damp);
        column_scale.push(damp * ks);
    }
    let mut physical = DMatrix::zeros(n, n);
    let mut row_plan = Vec::with_capacity(n);
    let mut row_scale = Vec::with_capacity(n);
    let mut row = 0;
    let put = |m: &mut DMatrix<f64>, r: usize, e: EdgeId, (a, b): (f64, f64), sign: f64| {
        m[(r, 2 * e.0)] += sign * a;
        m[(r, 2 * e.0 + 1)] += sign * b;
    };
    for v in g.vertex_ids() {
        let ends = g.incidence(v);
        match g.coupling(v) {
            Coupling::Dirichlet => {
                for &(e, end) in ends {
                    put(&mut physical, row, e, value_entries(&pairs[e.0], end), 1.0);
                    row_plan.push(RowKind::Dirichlet { vertex: v, end: (e, end) });
                    row_scale.push(1.0);
                    row += 1;
                }
            }
            Coupling::Delta(sigma) => {
                let (e0, end0) = ends[0];
                for &(e, end) in &ends[1..] {
                    put(&mut physical, row, e0, value_entries(&pairs[e0.0], end0), 1.0);
                    put(&mut physical, row, e, value_entries(&pairs[e.0], end), -1.0);
                    row_plan.push(RowKind::Continuity { vertex: v, first: (e0, end0), other: (e, end) });
                    row_scale.push(1.0);
                    row += 1;
                }
                for &(e, end) in ends {
                    put(&mut physical, row, e, inward_derivative_entries(&pairs[e.0], end), 1.0);
                }
                put(&mut physical, row, e0, value_entries(&pairs[e0.0], end0), -sigma);
                row_plan.push(RowKind::Flux { vertex: v });
                row_scale.push(1.0 / ks);
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, n);
    let entries = DMatrix::from_fn(n, n, |r, c| physical[(r, c)] * row_scale[r] * column_scale[c]);
    SecularMatrix { lambda, entries, row_plan, column_plan, row_scale, column_scale }
}

/// Vertex-condition matrix at `λ`.
pub fn secular_matrix(g: &MetricGraph, lambda: f64) -> Result<SecularMatrix> {
    let pairs = edge_pairs(g, lambda)?;
    Ok(assemble(g, lambda, &pairs))
}

/// Sign (−1, 0, +1) and `log|det|` of the scaled secular matrix.
pub fn secular_value(g: &MetricGraph, lambda: f64) -> Result<(i8, f64)> {
    Ok(secular_matrix(g, lambda)?.signed_log_det())
}

/// Null-space dimension of `M(λ*)`, after minimizing `σ_min/σ_max` within
/// `bracket_tol` (relative) of `λ*`.
pub fn multiplicity(g: &MetricGraph, lambda_star: f64) -> Result<usize> {
    multiplicity_with(g, lambda_star, &SolverConfig::default())
}

pub fn multiplicity_with(g: &MetricGraph, lambda_star: f64, cfg: &SolverConfig) -> Result<usize> {
    let (lambda, ratio) = sharpen(g, lambda_star, cfg.bracket_tol * lambda_star.abs().max(1.0))?;
    if ratio > cfg.rank_tol {
        return Err(SpectralError::NotARoot(lambda_star));
    }
    Ok(secular_matrix(g, lambda)?.nullity(cfg.rank_tol).max(1))
}

/// Minimizer of `σ_min/σ_max` on `[λ − δ, λ + δ]` (including `λ` itself).
fn sharpen(g: &MetricGraph, lambda: f64, delta: f64) -> Result<(f64, f64)> {
    let at = secular_matrix(g, lambda)?.rank_ratio();
    let (x, fx) = minimize_ratio(g, lambda - delta, lambda + delta)?;
    Ok(if at <= fx { (lambda, at) } else { (x, fx) })
}

fn minimize_ratio(g: &MetricGraph, a: f64, b: f64) -> Result<(f64, f64)> {
    let failure = RefCell::new(None);
    let (x, fx) = roots::golden_min(
        |l| match secular_matrix(g, l) {
            Ok(m) => m.rank_ratio(),
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::INFINITY
            }
        },
        a,
        b,
        200,
    );
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok((x, fx)),
    }
}

/// One eigenvalue and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub lambda: f64,
    pub multiplicity: usize,
}

/// One oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub lambda: f64,
    pub secular: usize,
    pub oracle: usize,
    pub refinements: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub window_start: f64,
    pub window_end: f64,
    pub grid_points: usize,
    pub sign_changes: usize,
    pub minimum_candidates: usize,
    pub checkpoints: Vec<Checkpoint>,
    /// Largest relative vertex-condition residual over the eigenbasis.
    pub max_vertex_residual: f64,
}

/// Eigenvalues with multiplicities, optional eigenbases and diagnostics.
#[derive(Debug, Clone)]
pub struct SpectralResult {
    pub eigenvalues: Vec<Eigenvalue>,
    /// Per eigenvalue an L²-orthonormal basis; empty when not requested.
    pub eigenbasis: Vec<Vec<Eigenfunction>>,
    pub diagnostics: Diagnostics,
}

impl SpectralResult {
    /// Eigenvalues repeated according to multiplicity.
    pub fn values(&self) -> Vec<f64> {
        self.eigenvalues.iter().flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity)).collect()
    }

    /// The lowest `n` eigenvalues with multiplicity.
    pub fn first(&self, n: usize) -> Vec<f64> {
        let mut v = self.values();
        v.truncate(n);
        v
    }

    /// Total multiplicity.
    pub fn len(&self) -> usize {
        self.eigenvalues.iter().map(|e| e.multiplicity).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `N(Λ)`: eigenvalues `≤ Λ` with multiplicity.
    pub fn count_at_most(&self, lambda: f64) -> usize {
        self.eigenvalues.iter().filter(|e| e.lambda <= lambda).map(|e| e.multiplicity).sum()
    }
}

/// Spectrum up to `target` with default configuration.
pub fn eigenvalues(g: &MetricGraph, target: SpectrumTarget) -> Result<SpectralResult> {
    eigenvalues_with(g, target, &SolverConfig::default())
}

#[derive(Debug, Clone, Copy)]
struct GridPoint {
    lambda: f64,
    sign: i8,
    log: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Root {
    lambda: f64,
    nullity: usize,
}

#[derive(Debug, Clone, Copy)]
enum Candidate {
    Exact(f64),
    Bracket { a: GridPoint, b: GridPoint },
    Minimum { a: f64, b: f64 },
}

fn lambda_of(k: f64) -> f64 {
    k * k.abs()
}

fn k_of(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

/// Roots divided out of the secular function during a rescan, so that
/// roots hidden next to them surface as sign changes or clean minima.
#[derive(Debug, Clone, Copy, Default)]
struct Deflation<'a> {
    known: &'a [Root],
}

impl Deflation<'_> {
    fn value(&self, g: &MetricGraph, lambda: f64) -> Result<(i8, f64)> {
        let (mut sign, mut log) = secular_value(g, lambda)?;
        for r in self.known {
            let d = lambda - r.lambda;
            if d == 0.0 {
                return Ok((0, f64::NEG_INFINITY));
            }
            log -= r.nullity as f64 * d.abs().ln();
            if d < 0.0 && r.nullity % 2 == 1 {
                sign = -sign;
            }
        }
        Ok((sign, log))
    }

    fn nearest(&self, lambda: f64) -> f64 {
        self.known.iter().map(|r| (r.lambda - lambda).abs()).fold(f64::INFINITY, f64::min)
    }
}

fn evaluate(g: &MetricGraph, defl: Deflation, lambda: f64) -> Result<GridPoint> {
    let (sign, log) = defl.value(g, lambda)?;
    Ok(GridPoint { lambda, sign, log })
}

/// Candidates from consecutive grid points. The last point only closes
/// brackets; exact zeros there belong to the next block.
fn candidates(points: &[GridPoint]) -> Vec<Candidate> {
    let mut out = Vec::new();
    for i in 0..points.len() {
        let p = points[i];
        if p.sign == 0 {
            if i + 1 < points.len() {
                out.push(Candidate::Exact(p.lambda));
            }
            continue;
        }
        if i + 1 < points.len() {
            let q = points[i + 1];
            if q.sign != 0 && q.sign != p.sign {
                out.push(Candidate::Bracket { a: p, b: q });
            }
        }
        if i > 0 && i + 1 < points.len() {
            let (l, r) = (points[i - 1], points[i + 1]);
            if l.sign == p.sign && r.sign == p.sign && p.log < l.log && p.log <= r.log {
                out.push(Candidate::Minimum { a: l.lambda, b: r.lambda });
            }
        }
    }
    out
}

/// Scaled secular function `sign·e^{log − reference}`; the first failure is
/// kept in `failure` and reported as zero.
fn scaled_value<'a>(
    g: &'a MetricGraph,
    defl: Deflation<'a>,
    reference: f64,
    failure: &'a RefCell<Option<SpectralError>>,
) -> impl Fn(f64) -> f64 + 'a {
    move |l: f64| match defl.value(g, l) {
        Ok((s, log)) => s as f64 * (log - reference).exp(),
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            0.0
        }
    }
}

fn polish(g: &MetricGraph, defl: Deflation, a: GridPoint, b: GridPoint) -> Result<f64> {
    let reference = a.log.max(b.log);
    let failure = RefCell::new(None);
    let f = scaled_value(g, defl, reference, &failure);
    let fa = a.sign as f64 * (a.log - reference).exp();
    let fb = b.sign as f64 * (b.log - reference).exp();
    let root = roots::brent(&f, a.lambda, b.lambda, fa, fb, 400);
    let failed = failure.borrow_mut().take();
    match failed {
        Some(e) => Err(e),
        None => Ok(root),
    }
}

fn root_at(g: &MetricGraph, cfg: &SolverConfig, lambda: f64) -> Result<Root> {
    let nullity = secular_matrix(g, lambda)?.nullity(cfg.rank_tol);
    Ok(Root { lambda, nullity: nullity.max(1) })
}

/// A sign-free local minimum of `log|det|` hides an even number of roots:
/// either a pair of close simple roots, where the signed function dips
/// through zero, or a multiple root, found by the rank test.
fn resolve_minimum(g: &MetricGraph, cfg: &SolverConfig, defl: Deflation, a: f64, b: f64) -> Result<Vec<Root>> {
    let (pa, pb) = (evaluate(g, defl, a)?, evaluate(g, defl, b)?);
    if pa.sign != 0 && pa.sign == pb.sign {
        let reference = pa.log.max(pb.log);
        let failure = RefCell::new(None);
        let f = scaled_value(g, defl, reference, &failure);
        let flipped = RefCell::new(None);
        let s = pa.sign as f64;
        let (x0, _) = roots::golden_min(
            |l| {
                let v = s * f(l);
                if v < 0.0 {
                    flipped.borrow_mut().get_or_insert(l);
                }
                v
            },
            a,
            b,
            120,
        );
        if let Some(e) = failure.borrow_mut().take() {
            return Err(e);
        }
        if let Some(x) = flipped.into_inner() {
            let px = evaluate(g, defl, x)?;
            let left = polish(g, defl, pa, px)?;
            let right = polish(g, defl, px, pb)?;
            return Ok(vec![root_at(g, cfg, left)?, root_at(g, cfg, right)?]);
        }
        if !defl.known.is_empty() {
            // the deflated minimum locates the hidden root; the rank test
            // then runs on a window that excludes the known ones
            let w = 0.25 * (b - a).min(defl.nearest(x0));
            let (x, ratio) = minimize_ratio(g, x0 - w, x0 + w)?;
            return if ratio > cfg.rank_tol { Ok(Vec::new()) } else { Ok(vec![root_at(g, cfg, x)?]) };
        }
    }
    let (x, ratio) = minimize_ratio(g, a, b)?;
    if ratio > cfg.rank_tol {
        return Ok(Vec::new());
    }
    Ok(vec![root_at(g, cfg, x)?])
}

fn resolve(g: &MetricGraph, cfg: &SolverConfig, defl: Deflation, c: Candidate) -> Result<Vec<Root>> {
    match c {
        Candidate::Exact(l) => Ok(vec![root_at(g, cfg, l)?]),
        Candidate::Bracket { a, b } => Ok(vec![root_at(g, cfg, polish(g, defl, a, b)?)?]),
        Candidate::Minimum { a, b } => resolve_minimum(g, cfg, defl, a, b),
    }
}

fn merge(mut found: Vec<Root>, tol: f64) -> Vec<Root> {
    found.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut out: Vec<(Root, usize)> = Vec::new();
    for r in found {
        match out.last_mut() {
            Some((last, count)) if (r.lambda - last.lambda).abs() <= tol * r.lambda.abs().max(1.0) => {
                last.nullity = last.nullity.max(r.nullity);
                *count += 1;
            }
            _ => out.push((r, 1)),
        }
    }
    out.into_iter().map(|(r, count)| Root { lambda: r.lambda, nullity: r.nullity.max(count) }).collect()
}

/// Grid evaluation plus candidate resolution, memoized on the global grid.
struct Scanner<'a> {
    g: &'a MetricGraph,
    cfg: &'a SolverConfig,
    step: f64,
    grid: BTreeMap<i64, GridPoint>,
    resolved: BTreeMap<(i64, u8), Vec<Root>>,
    sign_changes: usize,
    minima: usize,
}

impl<'a> Scanner<'a> {
    fn new(g: &'a MetricGraph, cfg: &'a SolverConfig) -> Self {
        let step = PI / (cfg.scan_density * g.total_length());
        Self { g, cfg, step, grid: BTreeMap::new(), resolved: BTreeMap::new(), sign_changes: 0, minima: 0 }
    }

    fn fill(&mut self, j_lo: i64, j_hi: i64) -> Result<()> {
        let missing: Vec<i64> = (j_lo..=j_hi).filter(|j| !self.grid.contains_key(j)).collect();
        let g = self.g;
        let step = self.step;
        let values: Vec<GridPoint> =
            missing.par_iter().map(|&j| evaluate(g, Deflation::default(), lambda_of(j as f64 * step))).collect::<Result<_>>()?;
        self.grid.extend(missing.into_iter().zip(values));
        Ok(())
    }

    /// Roots with `λ(k_lo) ≤ λ < λ(k_hi)` from the memoized global grid.
    fn roots(&mut self, lambda_lo: f64, lambda_hi: f64) -> Result<Vec<Root>> {
        let j_lo = (k_of(lambda_lo) / self.step).floor() as i64;
        let j_hi = (k_of(lambda_hi) / self.step).ceil() as i64;
        self.fill(j_lo, j_hi)?;
        let keys: Vec<i64> = (j_lo..=j_hi).collect();
        let points: Vec<GridPoint> = keys.iter().map(|j| self.grid[j]).collect();
        // tag candidates with the grid index that identifies them
        let mut tagged = Vec::new();
        for (i, c) in candidates(&points).into_iter().enumerate() {
            let key = match c {
                Candidate::Exact(l) | Candidate::Minimum { a: l, .. } => {
                    let idx = points.iter().position(|p| p.lambda == l).unwrap_or(i);
                    (keys[idx], if matches!(c, Candidate::Exact(_)) { 0u8 } else { 2u8 })
                }
                Candidate::Bracket { a, .. } => {
                    let idx = points.iter().position(|p| p.lambda == a.lambda).unwrap_or(i);
                    (keys[idx], 1u8)
                }
            };
            tagged.push((key, c));
        }
        let todo: Vec<((i64, u8), Candidate)> =
            tagged.iter().filter(|(key, _)| !self.resolved.contains_key(key)).copied().collect();
        let (g, cfg) = (self.g, self.cfg);
        let fresh: Vec<Vec<Root>> = todo.par_iter().map(|&(_, c)| resolve(g, cfg, Deflation::default(), c)).collect::<Result<_>>()?;
        for ((key, c), r) in todo.into_iter().zip(fresh) {
            match c {
                Candidate::Bracket { .. } => self.sign_changes += 1,
                Candidate::Minimum { .. } => self.minima += 1,
                Candidate::Exact(_) => {}
            }
            self.resolved.insert(key, r);
        }
        let found: Vec<Root> = tagged
            .iter()
            .flat_map(|(key, _)| self.resolved[key].iter().copied())
            .filter(|r| r.lambda >= lambda_lo && r.lambda < lambda_hi)
            .collect();
        Ok(merge(found, self.cfg.merge_tol))
    }
}

/// Uniform grid on a block with the `known` roots deflated; returns the
/// known roots together with any new ones.
fn rescan_block(g: &MetricGraph, cfg: &SolverConfig, lo: f64, hi: f64, step: f64, known: &[Root]) -> Result<Vec<Root>> {
    let defl = Deflation { known };
    let (k_lo, k_hi) = (k_of(lo), k_of(hi));
    let cells = ((k_hi - k_lo) / step).ceil().max(2.0) as usize;
    let points: Vec<GridPoint> = (0..=cells)
        .into_par_iter()
        .map(|i| evaluate(g, defl, lambda_of(k_lo + (k_hi - k_lo) * i as f64 / cells as f64)))
        .collect::<Result<_>>()?;
    let found: Vec<Vec<Root>> =
        candidates(&points).into_par_iter().map(|c| resolve(g, cfg, defl, c)).collect::<Result<_>>()?;
    let fresh = found
        .into_iter()
        .flatten()
        .filter(|r| r.lambda >= lo && r.lambda < hi)
        .filter(|r| defl.nearest(r.lambda) > cfg.merge_tol * r.lambda.abs().max(1.0));
    let mut roots = merge(fresh.collect(), cfg.merge_tol);
    roots.extend_from_slice(known);
    roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    Ok(roots)
}

fn total(roots: &[Root], below: f64) -> usize {
    roots.iter().filter(|r| r.lambda < below).map(|r| r.nullity).sum()
}

/// Oracle count below `mu`, with a mesh whose error margin stays under
/// `gap_half` (the distance from `mu` to the nearest located root).
fn oracle_count(g: &MetricGraph, mu: f64, gap_half: f64, refinement: usize) -> Result<usize> {
    let scale = mu.abs() + g.potential_sup() + 1.0;
    let k = mu.abs().max(1.0).sqrt();
    let mut h = ((2.0 * gap_half).sqrt() / scale).min(0.5 / k);
    h /= (1usize << refinement) as f64;
    h = h.max(g.total_length() / 2.0e7);
    let mesh = FemMesh::uniform(g, h)?;
    let sys = FemSystem::new(g, &mesh)?;
    Ok(sys.count_below(mu + sys.margin(mu) + 1e-9 * (mu.abs() + 1.0)))
}

/// Start of the search window: below the finite element ground state.
fn window_start(g: &MetricGraph) -> Result<f64> {
    let neg_sigma = g.vertices().iter().filter_map(|v| v.coupling.sigma()).fold(0.0f64, |m, s| m.max(-s));
    let h = (g.min_length() / 16.0).min(0.1 / (1.0 + neg_sigma + g.potential_negative_sup().sqrt()));
    let h = h.max(g.total_length() / 1.0e6);
    let ground = fem::lowest_eigenvalue(g, &FemMesh::uniform(g, h)?)?;
    Ok(ground - 1.0 - 0.01 * ground.abs())
}

/// Index (into distinct roots) of the last root needed for `target`.
fn last_needed(roots: &[Root], target: SpectrumTarget) -> Option<usize> {
    match target {
        SpectrumTarget::Count(n) => {
            let mut cum = 0;
            for (i, r) in roots.iter().enumerate() {
                cum += r.nullity;
                if cum >= n {
                    return Some(i);
                }
            }
            None
        }
        SpectrumTarget::Cutoff(cut) => {
            // a root above the cutoff must exist to close the window
            let above = roots.iter().position(|r| r.lambda > cut)?;
            Some(if above == 0 { usize::MAX } else { above - 1 })
        }
    }
}

/// Checkpoints: roughly every `spacing` eigenvalues, at the midpoint of the
/// widest nearby gap, plus a final one right after the last needed root.
fn checkpoints(roots: &[Root], last: usize, lo: f64, spacing: usize, cutoff: Option<f64>) -> Vec<f64> {
    let mut out = Vec::new();
    if last == usize::MAX {
        // nothing at or below the cutoff
        let first = roots[0].lambda;
        out.push(0.5 * (cutoff.unwrap_or(first).max(lo) + first));
        return out;
    }
    let mut cum = 0;
    let mut next = spacing;
    let mut i = 0;
    while i < last {
        cum += roots[i].nullity;
        if cum >= next {
            let hi = (i + spacing / 4).min(last - 1).max(i);
            let best = (i..=hi)
                .max_by(|&a, &b| (roots[a + 1].lambda - roots[a].lambda).total_cmp(&(roots[b + 1].lambda - roots[b].lambda)))
                .unwrap_or(i);
            out.push(0.5 * (roots[best].lambda + roots[best + 1].lambda));
            next = cum + spacing;
            i = best + 1;
            cum = roots[..i].iter().map(|r| r.nullity).sum();
            continue;
        }
        i += 1;
    }
    let final_mu = 0.5 * (roots[last].lambda + roots[last + 1].lambda);
    if out.last().is_none_or(|&m| m < final_mu) {
        out.push(final_mu);
    }
    out
}

fn distance_to_roots(roots: &[Root], mu: f64, lo: f64) -> f64 {
    roots.iter().map(|r| (r.lambda - mu).abs()).fold(mu - lo, f64::min)
}

/// Spectrum up to `target`.
pub fn eigenvalues_with(g: &MetricGraph, target: SpectrumTarget, cfg: &SolverConfig) -> Result<SpectralResult> {
    match target {
        SpectrumTarget::Count(0) => return Err(SpectralError::InvalidRequest("eigenvalue count must be at least 1".into())),
        SpectrumTarget::Cutoff(c) if !c.is_finite() => {
            return Err(SpectralError::InvalidRequest(format!("cutoff must be finite, got {c}")))
        }
        _ => {}
    }
    let mut lo = window_start(g)?;
    if let SpectrumTarget::Cutoff(c) = target {
        if c <= lo {
            return Err(SpectralError::InvalidRequest(format!("cutoff {c} lies below the search window start {lo}")));
        }
    }
    let mut scanner = Scanner::new(g, cfg);
    let step = scanner.step;
    let l_tot = g.total_length();
    let extra = (g.edges().len() + g.vertices().len() + 2) as f64;
    let mut hi = match target {
        SpectrumTarget::Count(n) => {
            let k = PI * (n as f64 + extra) / l_tot;
            k * k + g.potential_sup() + 1.0
        }
        SpectrumTarget::Cutoff(c) => lambda_of(k_of(c) + 4.0 * step),
    };
    hi = hi.max(lo + 1.0);

    let mut checkpoint_log = Vec::new();
    let mut outer = 0;
    let roots = loop {
        outer += 1;
        if outer > 24 {
            return Err(SpectralError::InvalidRequest("eigenvalue search did not converge".into()));
        }
        let mut roots = scanner.roots(lo, hi)?;
        let last = match last_needed(&roots, target) {
            Some(i) if i == usize::MAX || i + 1 < roots.len() => i,
            _ => {
                hi = lambda_of(k_of(hi) * 1.3 + 4.0 * step);
                continue;
            }
        };
        let cutoff = match target {
            SpectrumTarget::Cutoff(c) => Some(c),
            SpectrumTarget::Count(_) => None,
        };
        let marks = checkpoints(&roots, last, lo, cfg.checkpoint_spacing, cutoff);
        let mut block_lo = lo;
        checkpoint_log.clear();
        for &mu in &marks {
            let mut refinements = 0;
            loop {
                let secular = total(&roots, mu);
                let gap = distance_to_roots(&roots, mu, block_lo).max(1e-12 * (mu.abs() + 1.0));
                let oracle = oracle_count(g, mu, gap, refinements)?;
                if secular == oracle {
                    checkpoint_log.push(Checkpoint { lambda: mu, secular, oracle, refinements });
                    break;
                }
                if refinements >= cfg.max_refinements {
                    return Err(SpectralError::CountMismatch {
                        lower: block_lo,
                        upper: mu,
                        secular,
                        oracle,
                        refinements,
                    });
                }
                refinements += 1;
                if checkpoint_log.is_empty() && oracle > secular && refinements >= 2 {
                    // eigenvalues hide below the window
                    lo -= 2.0 * (lo.abs() + 1.0);
                    block_lo = lo;
                }
                let fine = step / (1u64 << refinements) as f64;
                let known: Vec<Root> =
                    roots.iter().copied().filter(|r| r.lambda >= block_lo && r.lambda < mu).collect();
                let block = rescan_block(g, cfg, block_lo, mu, fine, &known)?;
                roots.retain(|r| r.lambda < block_lo || r.lambda >= mu);
                roots.extend(block);
                roots.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
            }
            block_lo = mu;
        }
        let final_mu = *marks.last().expect("at least one checkpoint");
        let kept: Vec<Root> = roots.iter().copied().filter(|r| r.lambda < final_mu).collect();
        let done = match target {
            SpectrumTarget::Count(n) => total(&kept, f64::INFINITY) >= n,
            SpectrumTarget::Cutoff(_) => true,
        };
        if done {
            break kept;
        }
        hi = lambda_of(k_of(hi) * 1.3 + 4.0 * step);
    };

    let selected: Vec<Root> = match target {
        SpectrumTarget::Count(n) => {
            let mut cum = 0;
            roots
                .into_iter()
                .take_while(|r| {
                    let take = cum < n;
                    cum += r.nullity;
                    take
                })
                .collect()
        }
        SpectrumTarget::Cutoff(c) => roots.into_iter().filter(|r| r.lambda <= c).collect(),
    };

    let eigenvalues: Vec<Eigenvalue> =
        selected.iter().map(|r| Eigenvalue { lambda: r.lambda, multiplicity: r.nullity }).collect();
    let mut diagnostics = Diagnostics {
        window_start: lo,
        window_end: hi,
        grid_points: scanner.grid.len(),
        sign_changes: scanner.sign_changes,
        minimum_candidates: scanner.minima,
        checkpoints: checkpoint_log,
        max_vertex_residual: 0.0,
    };
    let eigenbasis = if cfg.eigenfunctions {
        let bases: Vec<Vec<Eigenfunction>> = eigenvalues
            .par_iter()
            .map(|ev| {
                let m = secular_matrix(g, ev.lambda)?;
                let basis = m.null_basis(ev.multiplicity);
                eigenfunctions::reconstruct_with(g, ev.lambda, &basis, cfg.quadrature_order)
            })
            .collect::<Result<_>>()?;
        diagnostics.max_vertex_residual = bases
            .iter()
            .flatten()
            .map(|f| f.vertex_residual(g))
            .collect::<Result<Vec<f64>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        bases
    } else {
        Vec::new()
    };
    Ok(SpectralResult { eigenvalues, eigenbasis, diagnostics })
}

/// Lowest `n` eigenvalues (with multiplicity) of the Dirichlet decoupling:
/// the merged per-edge spectra of `−u'' + v u` with `u(0) = u(l) = 0`.
pub fn dirichlet_eigenvalues(g: &MetricGraph, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(SpectralError::InvalidRequest("eigenvalue count must be at least 1".into()));
    }
    let per_edge: Vec<Vec<f64>> =
        g.edge_ids().collect::<Vec<_>>().par_iter().map(|&e| edge_dirichlet(g, e, n)).collect::<Result<_>>()?;
    let mut all: Vec<f64> = per_edge.into_iter().flatten().collect();
    all.sort_by(f64::total_cmp);
    all.truncate(n);
    Ok(all)
}

fn edge_dirichlet(g: &MetricGraph, e: EdgeId, n: usize) -> Result<Vec<f64>> {
    let edge = g.edge(e);
    let l = edge.length;
    if let Some(c) = edge.potential.as_constant() {
        return Ok((1..=n).map(|j| (j as f64 * PI / l).powi(2) + c).collect());
    }
    // s(l; λ) > 0 for λ ≤ min v, scaled to order one
    let scaled_s = |lambda: f64| -> Result<f64> {
        let p = ode::end_values(g, e, lambda)?;
        Ok(p.s_end * lambda.abs().max(1.0).sqrt() * (-p.log_scale).exp())
    };
    let (v_lo, _) = edge.potential.bounds(l);
    let step = PI / (8.0 * l);
    let mut k = k_of(v_lo);
    let mut prev = (lambda_of(k), scaled_s(lambda_of(k))?);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let chunk: Vec<f64> = (1..=64).map(|i| lambda_of(k + i as f64 * step)).collect();
        let values: Vec<f64> = chunk.par_iter().map(|&l| scaled_s(l)).collect::<Result<_>>()?;
        for (lambda, value) in chunk.into_iter().zip(values) {
            if out.len() >= n {
                break;
            }
            if value == 0.0 {
                out.push(lambda);
            } else if prev.1 != 0.0 && value.signum() != prev.1.signum() {
                let failure = RefCell::new(None);
                let root = roots::brent(
                    |x| match scaled_s(x) {
                        Ok(v) => v,
                        Err(err) => {
                            failure.borrow_mut().get_or_insert(err);
                            0.0
                        }
                    },
                    prev.0,
                    lambda,
                    prev.1,
                    value,
                    400,
                );
                if let Some(err) = failure.into_inner() {
                    return Err(err);
                }
                out.push(root);
            }
            prev = (lambda, value);
        }
        k += 64.0 * step;
    }
    Ok(out)
}
