//! Benchmark fixtures shared by the criterion targets.

use qgs_core::{catalog, Coupling, GraphBuilder, MetricGraph, PotentialSpec};

/// Unit 3-star with a centre coupling.
pub fn star3() -> MetricGraph {
    catalog::star(&[1.0, 1.0, 1.0], 0.5)
}

/// Figure-eight with incommensurate loops.
pub fn figure_eight() -> MetricGraph {
    catalog::figure_eight(1.0, 0.7).with_couplings(&[Coupling::Delta(1.0)]).expect("one vertex")
}

/// Interval carrying `1 + cos 2πx`, which exercises the Magnus panels.
pub fn trig_interval() -> MetricGraph {
    GraphBuilder::new()
        .vertex("a", Coupling::Delta(1.0))
        .vertex("b", Coupling::Delta(0.0))
        .edge_with_potential("e", 0, 1, 1.0, PotentialSpec::TrigSeries { a0: 1.0, terms: vec![(1.0, 0.0)] })
        .build()
        .expect("valid interval")
}
