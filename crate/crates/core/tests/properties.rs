use std::f64::consts::PI;

use proptest::prelude::*;
use qgs_core::catalog;
use qgs_core::eigenfunctions::{reconstruct, vertex_values};
use qgs_core::experiments::mean_gap;
use qgs_core::fem::{fem_eigenvalues, FemMesh};
use qgs_core::ode::fundamental_pair;
use qgs_core::quadrature::GaussLegendre;
use qgs_core::secular::{dirichlet_eigenvalues, eigenvalues_with, secular_matrix};
use qgs_core::{
    parse_graph, Coupling, EdgeId, GraphBuilder, MetricGraph, PotentialSpec, SolverConfig, SpectrumTarget, VertexId,
};

fn potential() -> impl Strategy<Value = PotentialSpec> {
    prop_oneof![
        Just(PotentialSpec::Zero),
        (-5.0..5.0f64).prop_map(PotentialSpec::Constant),
        prop::collection::vec(-4.0..4.0f64, 1..5).prop_map(PotentialSpec::Polynomial),
        (-3.0..3.0f64, prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 1..4))
            .prop_map(|(a0, terms)| PotentialSpec::TrigSeries { a0, terms }),
    ]
}

fn coupling() -> impl Strategy<Value = Coupling> {
    prop_oneof![4 => (-1.0..4.0f64).prop_map(Coupling::Delta), 1 => Just(Coupling::Dirichlet)]
}

/// Stars and intervals with one potential per edge and a mix of couplings.
fn small_graph() -> impl Strategy<Value = MetricGraph> {
    (1usize..4)
        .prop_flat_map(|edges| {
            (
                prop::collection::vec(coupling(), edges + 1),
                prop::collection::vec((0.4..2.0f64, potential()), edges),
            )
        })
        .prop_map(|(couplings, edges)| {
            let mut b = GraphBuilder::new();
            for (i, c) in couplings.iter().enumerate() {
                b = b.vertex(&format!("v{i}"), *c);
            }
            for (j, (l, v)) in edges.into_iter().enumerate() {
                b = b.edge_with_potential(&format!("e{j}"), 0, j + 1, l, v);
            }
            b.build().unwrap()
        })
}

/// Graphs without Dirichlet vertices or potentials, for cheap spectral checks.
fn free_graph() -> impl Strategy<Value = MetricGraph> {
    prop_oneof![
        (0.5..2.0f64, -1.0..3.0f64, -1.0..3.0f64).prop_map(|(l, a, b)| catalog::interval(l, a, b)),
        (prop::collection::vec(0.5..1.5f64, 2..4), -1.0..3.0f64).prop_map(|(ls, s)| catalog::star(&ls, s)),
        (0.5..1.5f64, 0.5..1.5f64).prop_map(|(a, b)| catalog::figure_eight(a, b)),
    ]
}

fn solve(g: &MetricGraph, n: usize) -> Vec<f64> {
    eigenvalues_with(g, SpectrumTarget::Count(n), &SolverConfig::values_only()).unwrap().first(n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wronskian_is_one(
        l in 0.1..2.0f64,
        lambda in prop_oneof![-60.0..0.0f64, 0.0..100.0f64, 100.0..1e4f64],
        v in potential(),
        grid in prop::collection::vec(0.0..1.0f64, 1..4),
    ) {
        let g = GraphBuilder::new()
            .vertex("a", Coupling::Delta(0.0))
            .vertex("b", Coupling::Delta(0.0))
            .edge_with_potential("e", 0, 1, l, v)
            .build()
            .unwrap();
        let xs: Vec<f64> = grid.iter().map(|t| t * l).collect();
        let p = fundamental_pair(&g, EdgeId(0), lambda, Some(&xs)).unwrap();
        // in the hyperbolic regime c·s' and c'·s cancel; measure against their size
        let scale = (p.c_end * p.s_prime_end).abs().max((p.c_prime_end * p.s_end).abs()).max(1.0);
        prop_assert!((p.wronskian_end() - 1.0).abs() / scale < 1e-10);
        for s in p.interior_samples.unwrap() {
            let scale = (s.c * s.s_prime).abs().max((s.c_prime * s.s).abs()).max(1.0);
            prop_assert!((s.wronskian() - 1.0).abs() / scale < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(g in small_graph()) {
        let back = parse_graph(&g.to_json()).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.to_json(), g.to_json());
    }

    #[test]
    fn circumference_bounds_and_linearity(g in small_graph()) {
        prop_assert!(g.circumference() <= g.vertices().len() as f64 + 1e-12);
        if !g.has_dirichlet() {
            let doubled: Vec<Coupling> =
                g.sigma().iter().map(|c| Coupling::Delta(2.0 * c.sigma().unwrap())).collect();
            let c1 = g.effective_circumference().unwrap();
            let c2 = g.with_couplings(&doubled).unwrap().effective_circumference().unwrap();
            prop_assert!((c2 - 2.0 * c1).abs() <= 1e-12 * (1.0 + c1.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_shift_moves_every_eigenvalue(g in small_graph(), c in -4.0..4.0f64) {
        let a = solve(&g, 25);
        let b = solve(&g.shifted_potential(c), 25);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((y - x - c).abs() < 1e-7 * x.abs().max(1.0), "{} {} {}", x, y, c);
        }
    }

    #[test]
    fn dirichlet_eigenvalues_dominate(g in small_graph()) {
        let n = 30;
        let a = solve(&g, n);
        let d = dirichlet_eigenvalues(&g, n).unwrap();
        for (x, y) in a.iter().zip(&d) {
            prop_assert!(*x <= y + 1e-9 * y.abs().max(1.0));
        }
    }

    #[test]
    fn eigenvalues_increase_with_coupling(g in free_graph(), which in 0usize..8, step in 0.05..3.0f64) {
        let n = 25;
        let v = VertexId(which % g.vertices().len());
        let sigma = g.coupling(v).sigma().unwrap();
        let stronger = g.with_coupling(v, Coupling::Delta(sigma + step)).unwrap();
        let a = solve(&g, n);
        let b = solve(&stronger, n);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(*y >= x - 1e-9 * x.abs().max(1.0));
        }
    }

    #[test]
    fn fem_refinement_decreases_towards_the_spectrum(g in free_graph()) {
        let n = 8;
        let mesh = FemMesh::uniform(&g, 0.05).unwrap();
        let coarse = fem_eigenvalues(&g, &mesh, n).unwrap();
        let fine = fem_eigenvalues(&g, &mesh.refined(), n).unwrap();
        let exact = solve(&g, n);
        for i in 0..n {
            let tol = 1e-9 * exact[i].abs().max(1.0);
            prop_assert!(coarse[i] >= fine[i] - tol);
            prop_assert!(fine[i] >= exact[i] - tol);
        }
    }

    #[test]
    fn degenerate_vertex_sums_ignore_the_basis(
        mix in prop::collection::vec(-1.0..1.0f64, 4),
        which in 0usize..3,
        j in 1usize..6,
    ) {
        let (g, lambda) = match which {
            0 => (catalog::star(&[1.0, 1.0, 1.0], 0.0), ((2 * j - 1) as f64 * PI / 2.0).powi(2)),
            1 => (catalog::loop_graph(1.5), (2.0 * PI * j as f64 / 1.5).powi(2)),
            _ => (catalog::figure_eight(1.0, 1.0), (2.0 * PI * j as f64).powi(2)),
        };
        let m = secular_matrix(&g, lambda).unwrap();
        let basis = m.null_basis(2);
        let det = mix[0] * mix[3] - mix[1] * mix[2];
        prop_assume!(det.abs() > 0.1);
        let mixed: Vec<Vec<f64>> = [(mix[0], mix[1]), (mix[2], mix[3])]
            .iter()
            .map(|&(a, b)| basis[0].iter().zip(&basis[1]).map(|(x, y)| a * x + b * y).collect())
            .collect();
        let sums = |fs: &[qgs_core::Eigenfunction]| -> Vec<f64> {
            let mut s = vec![0.0; g.vertices().len()];
            for f in fs {
                for (v, val) in vertex_values(f, &g).unwrap() {
                    s[v.0] += val;
                }
            }
            s
        };
        let a = sums(&reconstruct(&g, lambda, &basis).unwrap());
        let b = sums(&reconstruct(&g, lambda, &mixed).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-8);
        }
    }
}

#[test]
fn mean_gap_limit_scales_linearly() {
    let g = catalog::star(&[1.0, 1.0], 1.0);
    let base = mean_gap(&g, &g.sigma(), 200).unwrap();
    let doubled = mean_gap(&g, &[Coupling::Delta(2.0), Coupling::Delta(0.0), Coupling::Delta(0.0)], 200).unwrap();
    let dilated = g.dilated(2.0).unwrap();
    let stretched = mean_gap(&dilated, &dilated.sigma(), 200).unwrap();
    assert_eq!(doubled.theoretical_limit, 2.0 * base.theoretical_limit);
    assert_eq!(stretched.theoretical_limit, 0.5 * base.theoretical_limit);
    let (b, d, s) = (base.final_value().unwrap(), doubled.final_value().unwrap(), stretched.final_value().unwrap());
    assert!((d / b - 2.0).abs() < 0.04, "σ-scaling ratio {}", d / b);
    assert!((s / b - 0.5).abs() < 0.01, "dilation ratio {}", s / b);
}

#[test]
fn parseval_partial_sums_increase_to_the_norm() {
    let graphs = [
        catalog::interval(1.0, 0.0, 0.0),
        catalog::interval_with_potential(
            1.0,
            1.0,
            0.0,
            PotentialSpec::TrigSeries { a0: 1.0, terms: vec![(1.0, 0.0)] },
        ),
    ];
    let rule = GaussLegendre::new(12);
    let test_fn = |x: f64| (1.3 * x).exp() - x * x;
    for g in &graphs {
        let norm2 = rule.integrate_composite(0.0, 1.0, 64, |x| test_fn(x).powi(2));
        let r = eigenvalues_with(g, SpectrumTarget::Count(60), &SolverConfig::default()).unwrap();
        let mut partial = 0.0;
        let mut last = 0.0;
        for f in r.eigenbasis.iter().flatten() {
            let c = rule.integrate_composite(0.0, 1.0, 64, |x| test_fn(x) * f.value(EdgeId(0), x).unwrap());
            partial += c * c;
            assert!(partial >= last);
            last = partial;
        }
        assert!(partial <= norm2 * (1.0 + 1e-10));
        assert!(norm2 - partial < 1e-4 * norm2, "deficit {}", norm2 - partial);
    }
}
