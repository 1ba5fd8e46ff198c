//! Small reference graphs.

use crate::graph::{Coupling, GraphBuilder, MetricGraph};
use crate::potential::PotentialSpec;

/// Interval `[0, l]` with couplings `sigma0` at `x = 0` and `sigma1` at `x = l`.
pub fn interval(length: f64, sigma0: f64, sigma1: f64) -> MetricGraph {
    interval_with_potential(length, sigma0, sigma1, PotentialSpec::Zero)
}

pub fn interval_with_potential(length: f64, sigma0: f64, sigma1: f64, potential: PotentialSpec) -> MetricGraph {
    GraphBuilder::new()
        .vertex("v0", Coupling::Delta(sigma0))
        .vertex("v1", Coupling::Delta(sigma1))
        .edge_with_potential("e0", 0, 1, length, potential)
        .build()
        .expect("interval is a valid graph")
}

/// Star with central vertex `vc` (index 0, coupling `sigma_center`) and
/// Kirchhoff outer vertices `v1..`. Edge `ej` runs from `vc` to `vj`.
pub fn star(lengths: &[f64], sigma_center: f64) -> MetricGraph {
    let mut b = GraphBuilder::new().vertex("vc", Coupling::Delta(sigma_center));
    for j in 1..=lengths.len() {
        b = b.vertex(&format!("v{j}"), Coupling::Delta(0.0));
    }
    for (j, &l) in lengths.iter().enumerate() {
        b = b.edge(&format!("e{}", j + 1), 0, j + 1, l);
    }
    b.build().expect("star is a valid graph")
}

/// A single loop of length `l` attached to one vertex of degree 2.
pub fn loop_graph(length: f64) -> MetricGraph {
    GraphBuilder::new()
        .vertex("v", Coupling::Delta(0.0))
        .edge("e", 0, 0, length)
        .build()
        .expect("loop is a valid graph")
}

/// Two loops sharing one vertex of degree 4.
pub fn figure_eight(l1: f64, l2: f64) -> MetricGraph {
    GraphBuilder::new()
        .vertex("v", Coupling::Delta(0.0))
        .edge("a", 0, 0, l1)
        .edge("b", 0, 0, l2)
        .build()
        .expect("figure eight is a valid graph")
}
