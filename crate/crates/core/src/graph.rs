//! Compact metric graphs with δ-couplings and edge potentials.
//!
//! The JSON document format:
//!
//! ```json
//! {
//!   "vertices": [ { "id": "vc", "sigma": 1.0 }, { "id": "v1", "sigma": "dirichlet" } ],
//!   "edges": [
//!     { "id": "e1", "from": "vc", "to": "v1", "length": 1.0,
//!       "potential": { "kind": "trig_series", "params": { "a0": 1.0, "terms": [[1.0, 0.0]] } } }
//!   ]
//! }
//! ```
//!
//! Potential kinds are `zero` (no params), `constant` (`{"value": c}`),
//! `polynomial` (`{"coefficients": [c0, c1, ...]}` in ascending powers of the
//! arclength `x ∈ [0, length]` measured from `from`) and `trig_series`
//! (`{"a0": a0, "terms": [[a1, b1], ...]}` with frequencies `2πj/length`).
//! Unknown keys are rejected everywhere.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::GraphError;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeId(pub usize);

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

impl fmt::Display for EdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

/// Vertex condition: δ-coupling of strength σ, or Dirichlet (formally σ = ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Delta(f64),
    Dirichlet,
}

impl Coupling {
    pub fn sigma(self) -> Option<f64> {
        match self {
            Coupling::Delta(s) => Some(s),
            Coupling::Dirichlet => None,
        }
    }

    pub fn is_dirichlet(self) -> bool {
        matches!(self, Coupling::Dirichlet)
    }
}

/// Which end of an edge touches a vertex: `Start` is `x = 0`, `End` is `x = l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeEnd {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub name: String,
    pub coupling: Coupling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub name: String,
    pub from: VertexId,
    pub to: VertexId,
    pub length: f64,
    pub potential: PotentialSpec,
}

/// A validated compact, connected metric graph. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricGraph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incidence: Vec<Vec<(EdgeId, EdgeEnd)>>,
}

impl MetricGraph {
    /// Validates lengths, couplings, potentials and connectivity.
    pub fn new(vertices: Vec<Vertex>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = BTreeSet::new();
        for v in &vertices {
            if !seen.insert(v.name.as_str()) {
                return Err(GraphError::DuplicateId { what: "vertex", id: v.name.clone() });
            }
            if let Coupling::Delta(s) = v.coupling {
                if !s.is_finite() {
                    return Err(GraphError::NonFiniteSigma { vertex: v.name.clone(), value: s });
                }
            }
        }
        let mut seen = BTreeSet::new();
        let mut incidence = vec![Vec::new(); vertices.len()];
        for (j, e) in edges.iter().enumerate() {
            if !seen.insert(e.name.as_str()) {
                return Err(GraphError::DuplicateId { what: "edge", id: e.name.clone() });
            }
            if !(e.length > 0.0) || !e.length.is_finite() {
                return Err(GraphError::NonPositiveLength { edge: e.name.clone(), length: e.length });
            }
            for end in [e.from, e.to] {
                if end.0 >= vertices.len() {
                    return Err(GraphError::UnknownVertex {
                        edge: e.name.clone(),
                        vertex: end.to_string(),
                    });
                }
            }
            if !e.potential.all_finite() {
                return Err(GraphError::InvalidPotential {
                    edge: e.name.clone(),
                    reason: "coefficients must be finite".into(),
                });
            }
            incidence[e.from.0].push((EdgeId(j), EdgeEnd::Start));
            incidence[e.to.0].push((EdgeId(j), EdgeEnd::End));
        }
        let g = Self { vertices, edges, incidence };
        g.check_connected()?;
        Ok(g)
    }

    fn check_connected(&self) -> Result<(), GraphError> {
        let n = self.vertices.len();
        let mut visited = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        visited[0] = true;
        while let Some(v) = queue.pop_front() {
            for &(e, end) in &self.incidence[v] {
                let edge = &self.edges[e.0];
                let other = match end {
                    EdgeEnd::Start => edge.to.0,
                    EdgeEnd::End => edge.from.0,
                };
                if !visited[other] {
                    visited[other] = true;
                    queue.push_back(other);
                }
            }
        }
        match visited.iter().position(|&seen| !seen) {
            Some(v) => Err(GraphError::Disconnected {
                vertex: self.vertices[v].name.clone(),
                root: self.vertices[0].name.clone(),
            }),
            None => Ok(()),
        }
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.0]
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn vertex_ids(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertices.len()).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edges.len()).map(EdgeId)
    }

    pub fn vertex_by_name(&self, name: &str) -> Option<VertexId> {
        self.vertices.iter().position(|v| v.name == name).map(VertexId)
    }

    pub fn edge_by_name(&self, name: &str) -> Option<EdgeId> {
        self.edges.iter().position(|e| e.name == name).map(EdgeId)
    }

    /// Incident edge-ends in insertion order; a loop appears twice.
    pub fn incidence(&self, v: VertexId) -> &[(EdgeId, EdgeEnd)] {
        &self.incidence[v.0]
    }

    /// Number of incident edge-ends (loops count twice).
    pub fn degree(&self, v: VertexId) -> usize {
        self.incidence[v.0].len()
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }

    pub fn min_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).fold(f64::INFINITY, f64::min)
    }

    pub fn coupling(&self, v: VertexId) -> Coupling {
        self.vertices[v.0].coupling
    }

    pub fn has_dirichlet(&self) -> bool {
        self.vertices.iter().any(|v| v.coupling.is_dirichlet())
    }

    /// `C(Γ) = Σ_v 1/deg_v`.
    pub fn circumference(&self) -> f64 {
        self.vertex_ids().map(|v| 1.0 / self.degree(v) as f64).sum()
    }

    /// `C_σ(Γ) = Σ_v σ_v/deg_v`; Dirichlet vertices are rejected.
    pub fn effective_circumference(&self) -> Result<f64, GraphError> {
        self.vertex_ids()
            .map(|v| self.finite_sigma(v, "effective circumference").map(|s| s / self.degree(v) as f64))
            .sum()
    }

    /// Vertices with `σ_v/deg_v > eps`.
    pub fn epsilon_boundary(&self, eps: f64) -> Result<BTreeSet<VertexId>, GraphError> {
        let mut out = BTreeSet::new();
        for v in self.vertex_ids() {
            let s = self.finite_sigma(v, "epsilon boundary")?;
            if s / self.degree(v) as f64 > eps {
                out.insert(v);
            }
        }
        Ok(out)
    }

    fn finite_sigma(&self, v: VertexId, operation: &'static str) -> Result<f64, GraphError> {
        self.coupling(v).sigma().ok_or_else(|| GraphError::DirichletVertex {
            vertex: self.vertices[v.0].name.clone(),
            operation,
        })
    }

    /// Σ_e ∫ v_e, exact.
    pub fn potential_integral(&self) -> f64 {
        self.edges.iter().map(|e| e.potential.integral(e.length)).sum()
    }

    pub fn has_potential(&self) -> bool {
        self.edges.iter().any(|e| !e.potential.is_zero())
    }

    /// Guaranteed bound on `‖V_-‖_∞` over the whole graph.
    pub fn potential_negative_sup(&self) -> f64 {
        self.edges.iter().map(|e| e.potential.negative_sup(e.length)).fold(0.0, f64::max)
    }

    /// Guaranteed bound on `‖V‖_∞` over the whole graph.
    pub fn potential_sup(&self) -> f64 {
        self.edges.iter().map(|e| e.potential.sup_norm(e.length)).fold(0.0, f64::max)
    }

    /// Sigma vector (`None` for Dirichlet vertices) in vertex order.
    pub fn sigma(&self) -> Vec<Coupling> {
        self.vertices.iter().map(|v| v.coupling).collect()
    }

    // ---- derived graphs ----

    /// Same graph with replaced couplings.
    pub fn with_couplings(&self, couplings: &[Coupling]) -> Result<Self, GraphError> {
        if couplings.len() != self.vertices.len() {
            return Err(GraphError::Malformed(format!(
                "expected {} couplings, got {}",
                self.vertices.len(),
                couplings.len()
            )));
        }
        let vertices = self
            .vertices
            .iter()
            .zip(couplings)
            .map(|(v, &c)| Vertex { name: v.name.clone(), coupling: c })
            .collect();
        MetricGraph::new(vertices, self.edges.clone())
    }

    /// Same graph with one coupling replaced.
    pub fn with_coupling(&self, v: VertexId, coupling: Coupling) -> Result<Self, GraphError> {
        let mut c = self.sigma();
        c[v.0] = coupling;
        self.with_couplings(&c)
    }

    /// Kirchhoff–Neumann couplings (σ ≡ 0) everywhere.
    pub fn standard(&self) -> Self {
        self.map_couplings(|_| Coupling::Delta(0.0))
    }

    /// Dirichlet conditions in every vertex.
    pub fn all_dirichlet(&self) -> Self {
        self.map_couplings(|_| Coupling::Dirichlet)
    }

    /// Finite couplings multiplied by `tau`.
    pub fn scaled_couplings(&self, tau: f64) -> Self {
        self.map_couplings(|c| match c {
            Coupling::Delta(s) => Coupling::Delta(tau * s),
            Coupling::Dirichlet => Coupling::Dirichlet,
        })
    }

    fn map_couplings(&self, f: impl Fn(Coupling) -> Coupling) -> Self {
        let vertices =
            self.vertices.iter().map(|v| Vertex { name: v.name.clone(), coupling: f(v.coupling) }).collect();
        Self { vertices, edges: self.edges.clone(), incidence: self.incidence.clone() }
    }

    /// All potentials replaced by zero.
    pub fn without_potential(&self) -> Self {
        self.map_potentials(|_| PotentialSpec::Zero)
    }

    /// All potentials multiplied by `tau`.
    pub fn scaled_potential(&self, tau: f64) -> Self {
        self.map_potentials(|p| p.scaled(tau))
    }

    /// All potentials shifted by the constant `c`.
    pub fn shifted_potential(&self, c: f64) -> Self {
        self.map_potentials(|p| p.shifted(c))
    }

    fn map_potentials(&self, f: impl Fn(&PotentialSpec) -> PotentialSpec) -> Self {
        let edges = self.edges.iter().map(|e| Edge { potential: f(&e.potential), ..e.clone() }).collect();
        Self { vertices: self.vertices.clone(), edges, incidence: self.incidence.clone() }
    }

    /// Every length multiplied by `factor` (potentials kept as specs).
    pub fn dilated(&self, factor: f64) -> Result<Self, GraphError> {
        let edges = self.edges.iter().map(|e| Edge { length: e.length * factor, ..e.clone() }).collect();
        MetricGraph::new(self.vertices.clone(), edges)
    }

    // ---- serialization ----

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        parse_graph(text)
    }

    /// Canonical JSON form (pretty-printed, vertex and edge order preserved).
    pub fn to_json(&self) -> String {
        let doc = GraphDoc {
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexDoc {
                    id: v.name.clone(),
                    sigma: match v.coupling {
                        Coupling::Delta(s) => SigmaDoc::Value(s),
                        Coupling::Dirichlet => SigmaDoc::Keyword("dirichlet".into()),
                    },
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeDoc {
                    id: e.name.clone(),
                    from: self.vertices[e.from.0].name.clone(),
                    to: self.vertices[e.to.0].name.clone(),
                    length: e.length,
                    potential: Some(potential_doc(&e.potential)),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("graph documents always serialize")
    }
}

// ---- document schema ----

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    vertices: Vec<VertexDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VertexDoc {
    id: String,
    #[serde(default = "zero_sigma")]
    sigma: SigmaDoc,
}

fn zero_sigma() -> SigmaDoc {
    SigmaDoc::Value(0.0)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum SigmaDoc {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    id: String,
    from: String,
    to: String,
    length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    potential: Option<PotentialDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PotentialDoc {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    params: Option<Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialParams {
    coefficients: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrigParams {
    a0: f64,
    #[serde(default)]
    terms: Vec<(f64, f64)>,
}

fn potential_doc(p: &PotentialSpec) -> PotentialDoc {
    use serde_json::json;
    match p {
        PotentialSpec::Zero => PotentialDoc { kind: "zero".into(), params: None },
        PotentialSpec::Constant(c) => PotentialDoc { kind: "constant".into(), params: Some(json!({ "value": c })) },
        PotentialSpec::Polynomial(c) => {
            PotentialDoc { kind: "polynomial".into(), params: Some(json!({ "coefficients": c })) }
        }
        PotentialSpec::TrigSeries { a0, terms } => {
            PotentialDoc { kind: "trig_series".into(), params: Some(json!({ "a0": a0, "terms": terms })) }
        }
    }
}

fn parse_potential(edge: &str, doc: Option<PotentialDoc>) -> Result<PotentialSpec, GraphError> {
    let Some(doc) = doc else {
        return Ok(PotentialSpec::Zero);
    };
    let invalid = |e: serde_json::Error| GraphError::InvalidPotential { edge: edge.into(), reason: e.to_string() };
    let params = doc.params.unwrap_or(Value::Object(Default::default()));
    match doc.kind.as_str() {
        "zero" => match &params {
            Value::Object(m) if m.is_empty() => Ok(PotentialSpec::Zero),
            Value::Null => Ok(PotentialSpec::Zero),
            _ => Err(GraphError::InvalidPotential {
                edge: edge.into(),
                reason: "kind `zero` takes no parameters".into(),
            }),
        },
        "constant" => {
            let p: ConstantParams = serde_json::from_value(params).map_err(invalid)?;
            Ok(PotentialSpec::Constant(p.value))
        }
        "polynomial" => {
            let p: PolynomialParams = serde_json::from_value(params).map_err(invalid)?;
            Ok(PotentialSpec::Polynomial(p.coefficients))
        }
        "trig_series" => {
            let p: TrigParams = serde_json::from_value(params).map_err(invalid)?;
            Ok(PotentialSpec::TrigSeries { a0: p.a0, terms: p.terms })
        }
        other => Err(GraphError::UnknownPotential { edge: edge.into(), kind: other.into() }),
    }
}

/// Parses and validates a graph description document.
pub fn parse_graph(text: &str) -> Result<MetricGraph, GraphError> {
    let doc: GraphDoc = serde_json::from_str(text).map_err(|e| GraphError::Malformed(e.to_string()))?;
    let mut index = HashMap::new();
    let mut vertices = Vec::with_capacity(doc.vertices.len());
    for (i, v) in doc.vertices.into_iter().enumerate() {
        let coupling = match v.sigma {
            SigmaDoc::Value(s) => Coupling::Delta(s),
            SigmaDoc::Keyword(k) if k.eq_ignore_ascii_case("dirichlet") => Coupling::Dirichlet,
            SigmaDoc::Keyword(k) => {
                return Err(GraphError::Malformed(format!(
                    "vertex `{}`: sigma must be a number or \"dirichlet\", got \"{k}\"",
                    v.id
                )))
            }
        };
        if index.insert(v.id.clone(), VertexId(i)).is_some() {
            return Err(GraphError::DuplicateId { what: "vertex", id: v.id });
        }
        vertices.push(Vertex { name: v.id, coupling });
    }
    let mut edges = Vec::with_capacity(doc.edges.len());
    for e in doc.edges {
        let lookup = |name: &str| {
            index
                .get(name)
                .copied()
                .ok_or_else(|| GraphError::UnknownVertex { edge: e.id.clone(), vertex: name.into() })
        };
        let from = lookup(&e.from)?;
        let to = lookup(&e.to)?;
        let potential = parse_potential(&e.id, e.potential)?;
        edges.push(Edge { name: e.id, from, to, length: e.length, potential });
    }
    MetricGraph::new(vertices, edges)
}

/// Convenience builder used by tests, benches and the catalog.
#[derive(Debug, Default, Clone)]
pub struct GraphBuilder {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertex(mut self, name: &str, coupling: Coupling) -> Self {
        self.vertices.push(Vertex { name: name.into(), coupling });
        self
    }

    pub fn edge(self, name: &str, from: usize, to: usize, length: f64) -> Self {
        self.edge_with_potential(name, from, to, length, PotentialSpec::Zero)
    }

    pub fn edge_with_potential(
        mut self,
        name: &str,
        from: usize,
        to: usize,
        length: f64,
        potential: PotentialSpec,
    ) -> Self {
        self.edges.push(Edge { name: name.into(), from: VertexId(from), to: VertexId(to), length, potential });
        self
    }

    pub fn build(self) -> Result<MetricGraph, GraphError> {
        MetricGraph::new(self.vertices, self.edges)
    }
}
