// negated float comparisons reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod eigenfunctions;
pub mod experiments;
pub mod error;
pub mod fem;
pub mod graph;
pub mod ode;
pub mod potential;
pub mod quadrature;
pub mod roots;
pub mod secular;

pub use error::{GraphError, OdeError, Result, SpectralError};
pub use graph::{parse_graph, Coupling, EdgeEnd, EdgeId, GraphBuilder, MetricGraph, VertexId};
pub use potential::PotentialSpec;
pub use eigenfunctions::Eigenfunction;
pub use secular::{eigenvalues, eigenvalues_with, Eigenvalue, SolverConfig, SpectralResult, SpectrumTarget};
