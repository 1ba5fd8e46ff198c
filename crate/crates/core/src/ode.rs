//! Fundamental solutions of `-u'' + v(x) u = λ u` on a single edge.
//!
//! The pair `(c, s)` is normalized by `c(0) = 1, c'(0) = 0, s(0) = 0, s'(0) = 1`
//! and is entire in `λ`, so the same code path serves positive, zero and
//! negative spectral parameters.
//!
//! Constant potentials use closed forms. Otherwise the edge is cut into
//! panels; on each panel the solution is written as `u = α c₀ + β s₀` around
//! the closed-form solutions `c₀, s₀` for the panel-mean potential and the
//! slowly varying `(α, β)` are advanced by a fourth-order Magnus step whose
//! integrals use a five-point Gauss collocation. The step generator is
//! traceless, so every panel propagator has unit determinant and the Wronskian
//! is conserved up to rounding.

use crate::error::OdeError;
use crate::graph::{EdgeId, MetricGraph};
use crate::potential::PotentialSpec;
use crate::quadrature::Collocation;

/// Largest tolerated growth exponent `κ·l` in the hyperbolic regime.
pub const MAX_GROWTH: f64 = 700.0;
/// Panel count above which integration is abandoned as stiff.
pub const MAX_PANELS: usize = 20_000_000;
const COLLOCATION_NODES: usize = 5;

pub type Mat2 = [[f64; 2]; 2];

/// Values of the fundamental pair at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairSample {
    pub x: f64,
    pub c: f64,
    pub s: f64,
    pub c_prime: f64,
    pub s_prime: f64,
}

impl PairSample {
    fn from_matrix(x: f64, m: &Mat2) -> Self {
        Self { x, c: m[0][0], s: m[0][1], c_prime: m[1][0], s_prime: m[1][1] }
    }

    pub fn wronskian(&self) -> f64 {
        self.c * self.s_prime - self.c_prime * self.s
    }
}

/// Integration controls. `panel_factor` multiplies the default panel count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub panel_factor: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self { panel_factor: 1 }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Representation {
    Closed { mu: f64 },
    Panels { width: f64, states: Vec<Mat2> },
}

/// Fundamental pair of one edge at one spectral parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalPair {
    pub lambda: f64,
    pub edge: EdgeId,
    pub length: f64,
    pub c_end: f64,
    pub c_prime_end: f64,
    pub s_end: f64,
    pub s_prime_end: f64,
    /// Growth exponent `κ·l` bounding the entries by `e^{log_scale}`; zero in
    /// the oscillatory regime.
    pub log_scale: f64,
    pub interior_samples: Option<Vec<PairSample>>,
    potential: PotentialSpec,
    repr: Representation,
}

impl FundamentalPair {
    pub fn transfer_matrix(&self) -> Mat2 {
        [[self.c_end, self.s_end], [self.c_prime_end, self.s_prime_end]]
    }

    pub fn wronskian_end(&self) -> f64 {
        self.c_end * self.s_prime_end - self.c_prime_end * self.s_end
    }

    pub fn is_closed_form(&self) -> bool {
        matches!(self.repr, Representation::Closed { .. })
    }

    /// Number of integration panels (zero for closed forms).
    pub fn panels(&self) -> usize {
        match &self.repr {
            Representation::Closed { .. } => 0,
            Representation::Panels { states, .. } => states.len() - 1,
        }
    }

    /// `(c, s, c', s')` at `x ∈ [0, l]`.
    pub fn sample(&self, x: f64) -> Result<PairSample, OdeError> {
        let x = clamp_to_edge(x, self.length)?;
        Ok(match &self.repr {
            Representation::Closed { mu } => PairSample::from_matrix(x, &reference(*mu, x)),
            Representation::Panels { width, states } => {
                let panels = states.len() - 1;
                let p = ((x / width).floor() as usize).min(panels - 1);
                let x0 = p as f64 * width;
                let m = if x == x0 {
                    states[p]
                } else {
                    mul(&propagator(&self.potential, self.length, self.lambda, x0, x - x0), &states[p])
                };
                PairSample::from_matrix(x, &m)
            }
        })
    }
}

fn clamp_to_edge(x: f64, length: f64) -> Result<f64, OdeError> {
    let slack = 1e-12 * length.max(1.0);
    if !(x >= -slack && x <= length + slack) {
        return Err(OdeError::OutOfRange { x, length });
    }
    Ok(x.clamp(0.0, length))
}

/// `(C(z), S(z)) = (cosh √z, sinh √z / √z)`, entire in `z`.
pub(crate) fn entire_cs(z: f64) -> (f64, f64) {
    if z.abs() < 1.0 {
        let mut c = 0.0;
        let mut s = 0.0;
        let mut term_c = 1.0; // z^n/(2n)!
        let mut term_s = 1.0; // z^n/(2n+1)!
        for n in 0..20 {
            c += term_c;
            s += term_s;
            let nf = n as f64;
            term_c *= z / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
            term_s *= z / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
            if term_c.abs() < 1e-18 * c.abs() && term_s.abs() < 1e-18 * s.abs() {
                c += term_c;
                s += term_s;
                break;
            }
        }
        (c, s)
    } else if z > 0.0 {
        let r = z.sqrt();
        (r.cosh(), r.sinh() / r)
    } else {
        let r = (-z).sqrt();
        (r.cos(), r.sin() / r)
    }
}

/// Closed-form fundamental matrix `[[c, s], [c', s']]` of `-u'' = μ u` at `t`.
pub(crate) fn reference(mu: f64, t: f64) -> Mat2 {
    let (c, s) = entire_cs(-mu * t * t);
    [[c, t * s], [-mu * t * s, c]]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn commutator(a: &Mat2, b: &Mat2) -> Mat2 {
    let ab = mul(a, b);
    let ba = mul(b, a);
    [[ab[0][0] - ba[0][0], ab[0][1] - ba[0][1]], [ab[1][0] - ba[1][0], ab[1][1] - ba[1][1]]]
}

/// Exponential of a traceless 2×2 matrix (the trace part is dropped).
fn exp_traceless(m: &Mat2) -> Mat2 {
    let a = 0.5 * (m[0][0] - m[1][1]);
    let b = m[0][1];
    let c = m[1][0];
    let (ch, sh) = entire_cs(a * a + b * c);
    [[ch + sh * a, sh * b], [sh * c, ch - sh * a]]
}

/// Propagator of `(u, u')` from `x0` to `x0 + h`.
#[allow(clippy::needless_range_loop)]
fn propagator(potential: &PotentialSpec, length: f64, lambda: f64, x0: f64, h: f64) -> Mat2 {
    let col = Collocation::cached(COLLOCATION_NODES);
    let n = col.nodes.len();
    let mut v = [0.0; COLLOCATION_NODES];
    for q in 0..n {
        v[q] = potential.eval(x0 + col.nodes[q] * h, length);
    }
    let vbar: f64 = (0..n).map(|q| col.weights[q] * v[q]).sum();
    let mu = lambda - vbar;
    let mut gen = [[[0.0; 2]; 2]; COLLOCATION_NODES];
    for q in 0..n {
        let w = v[q] - vbar;
        let r = reference(mu, col.nodes[q] * h);
        let (c, s) = (r[0][0], r[0][1]);
        gen[q] = [[-w * s * c, -w * s * s], [w * c * c, w * c * s]];
    }
    let mut omega = [[0.0; 2]; 2];
    for q in 0..n {
        let bw = col.weights[q] * h;
        let mut inner = [[0.0; 2]; 2];
        for r in 0..n {
            let a = col.matrix[q][r] * h;
            for i in 0..2 {
                for j in 0..2 {
                    inner[i][j] += a * gen[r][i][j];
                }
            }
        }
        let comm = commutator(&gen[q], &inner);
        for i in 0..2 {
            for j in 0..2 {
                omega[i][j] += bw * (gen[q][i][j] + 0.5 * comm[i][j]);
            }
        }
    }
    mul(&reference(mu, h), &exp_traceless(&omega))
}

/// Number of panels for an edge at `λ` given potential bounds.
fn panel_count(lambda: f64, length: f64, bounds: (f64, f64), options: &OdeOptions) -> usize {
    let k = (lambda - bounds.0).abs().max((lambda - bounds.1).abs()).max(1.0).sqrt();
    let per_wave = (k * length / (2.0 * std::f64::consts::PI)).ceil() as usize;
    (8 * per_wave).max(32).saturating_mul(options.panel_factor.max(1))
}

fn growth_exponent(lambda: f64, length: f64, bounds: (f64, f64)) -> f64 {
    (bounds.1 - lambda).max(0.0).sqrt() * length
}

/// Fundamental pair of edge `e` at `λ`, optionally sampled on `sample_grid`.
pub fn fundamental_pair(
    g: &MetricGraph,
    e: EdgeId,
    lambda: f64,
    sample_grid: Option<&[f64]>,
) -> Result<FundamentalPair, OdeError> {
    fundamental_pair_with(g, e, lambda, sample_grid, &OdeOptions::default())
}

pub fn fundamental_pair_with(
    g: &MetricGraph,
    e: EdgeId,
    lambda: f64,
    sample_grid: Option<&[f64]>,
    options: &OdeOptions,
) -> Result<FundamentalPair, OdeError> {
    let edge = g.edge(e);
    solve_edge(e, &edge.potential, edge.length, lambda, sample_grid, options, true)
}

/// End values only; skips storing panel states.
pub(crate) fn end_values(g: &MetricGraph, e: EdgeId, lambda: f64) -> Result<FundamentalPair, OdeError> {
    let edge = g.edge(e);
    solve_edge(e, &edge.potential, edge.length, lambda, None, &OdeOptions::default(), false)
}

fn solve_edge(
    e: EdgeId,
    potential: &PotentialSpec,
    length: f64,
    lambda: f64,
    sample_grid: Option<&[f64]>,
    options: &OdeOptions,
    keep_states: bool,
) -> Result<FundamentalPair, OdeError> {
    if !lambda.is_finite() {
        return Err(OdeError::NonFiniteLambda(lambda));
    }
    let bounds = potential.bounds(length);
    let log_scale = growth_exponent(lambda, length, bounds);
    if log_scale > MAX_GROWTH {
        return Err(OdeError::Overflow { edge: e.0, growth: log_scale });
    }
    let samples = |f: &dyn Fn(f64) -> Result<PairSample, OdeError>| -> Result<Option<Vec<PairSample>>, OdeError> {
        sample_grid.map(|grid| grid.iter().map(|&x| f(x)).collect()).transpose()
    };

    if let Some(c) = potential.as_constant() {
        let mu = lambda - c;
        let end = reference(mu, length);
        let interior = samples(&|x| {
            let x = clamp_to_edge(x, length)?;
            Ok(PairSample::from_matrix(x, &reference(mu, x)))
        })?;
        return Ok(FundamentalPair {
            lambda,
            edge: e,
            length,
            c_end: end[0][0],
            c_prime_end: end[1][0],
            s_end: end[0][1],
            s_prime_end: end[1][1],
            log_scale,
            interior_samples: interior,
            potential: potential.clone(),
            repr: Representation::Closed { mu },
        });
    }

    let panels = panel_count(lambda, length, bounds, options);
    if panels > MAX_PANELS {
        return Err(OdeError::StepUnderflow { edge: e.0, panels, lambda });
    }
    let width = length / panels as f64;
    let keep = keep_states || sample_grid.is_some();
    let mut states = Vec::with_capacity(if keep { panels + 1 } else { 0 });
    let mut m: Mat2 = [[1.0, 0.0], [0.0, 1.0]];
    if keep {
        states.push(m);
    }
    for p in 0..panels {
        let x0 = p as f64 * width;
        let step = propagator(potential, length, lambda, x0, width);
        m = mul(&step, &m);
        if keep {
            states.push(m);
        }
    }
    let mut pair = FundamentalPair {
        lambda,
        edge: e,
        length,
        c_end: m[0][0],
        c_prime_end: m[1][0],
        s_end: m[0][1],
        s_prime_end: m[1][1],
        log_scale,
        interior_samples: None,
        potential: potential.clone(),
        repr: Representation::Panels { width, states },
    };
    if let Some(grid) = sample_grid {
        pair.interior_samples = Some(grid.iter().map(|&x| pair.sample(x)).collect::<Result<_, _>>()?);
    }
    if !keep_states && sample_grid.is_none() {
        pair.repr = Representation::Panels { width, states: Vec::new() };
    }
    Ok(pair)
}

/// `[[c(l), s(l)], [c'(l), s'(l)]]` for edge `e` at `λ`.
pub fn transfer_matrix(g: &MetricGraph, e: EdgeId, lambda: f64) -> Result<Mat2, OdeError> {
    Ok(end_values(g, e, lambda)?.transfer_matrix())
}

/// Value and derivative of `α c + β s` at `x`.
pub fn edge_solution_eval(pair: &FundamentalPair, alpha: f64, beta: f64, x: f64) -> Result<(f64, f64), OdeError> {
    let s = pair.sample(x)?;
    Ok((alpha * s.c + beta * s.s, alpha * s.c_prime + beta * s.s_prime))
}
