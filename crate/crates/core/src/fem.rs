//! Conforming P1 finite elements for the quadratic form
//! `q[f] = Σ_e ∫ (|f'|² + v_e |f|²) + Σ_v σ_v |f(v)|²` on `H¹(Γ)`.
//!
//! Vertex degrees of freedom are shared by all incident edge-ends, so the
//! δ-coupling enters only through the vertex term of the form. Dirichlet
//! vertices carry no degree of freedom.
//!
//! Two solvers sit on top of the assembly:
//! * a dense generalized eigensolve (Cholesky reduction of the mass matrix),
//!   meant for a few hundred to a few thousand unknowns;
//! * an inertia count of `A − μB` that eliminates each edge's tridiagonal
//!   interior chain and finishes on the small vertex Schur complement. By
//!   Sylvester's law this counts the discrete eigenvalues below `μ` in
//!   linear time, which is what the secular solver uses for cross-checks.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Result, SpectralError};
use crate::graph::{EdgeId, MetricGraph};

/// Element counts per edge (uniform spacing on each edge).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FemMesh {
    elements: Vec<usize>,
}

impl FemMesh {
    /// Spacing at most `h` on every edge and never above `min_e l_e / 8`.
    pub fn uniform(g: &MetricGraph, h: f64) -> Result<Self> {
        if !(h > 0.0) {
            return Err(SpectralError::Fem(format!("mesh width must be positive, got {h}")));
        }
        let cap = g.min_length() / 8.0;
        let h = h.min(cap);
        let elements = g.edges().iter().map(|e| (e.length / h * (1.0 - 1e-12)).ceil().max(1.0) as usize).collect();
        Ok(Self { elements })
    }

    /// Explicit element counts (any count ≥ 1). Used for textbook checks
    /// where the `min l_e / 8` spacing rule is deliberately not applied.
    pub fn with_element_counts(g: &MetricGraph, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != g.edges().len() || counts.contains(&0) {
            return Err(SpectralError::Fem("one positive element count per edge required".into()));
        }
        Ok(Self { elements: counts })
    }

    /// Mesh fine enough for the lowest `n` eigenvalues to be resolved with
    /// `k·h ≤ 0.25` after Weyl-law estimation of `k_n`.
    pub fn for_spectrum(g: &MetricGraph, n: usize) -> Result<Self> {
        let l = g.total_length();
        let k = std::f64::consts::PI * (n + g.edges().len() + g.vertices().len()) as f64 / l
            + g.potential_sup().sqrt()
            + 1.0;
        Self::uniform(g, 0.25 / k)
    }

    /// Every element bisected.
    pub fn refined(&self) -> Self {
        Self { elements: self.elements.iter().map(|n| 2 * n).collect() }
    }

    pub fn elements(&self, e: EdgeId) -> usize {
        self.elements[e.0]
    }

    pub fn spacing(&self, g: &MetricGraph, e: EdgeId) -> f64 {
        g.edge(e).length / self.elements[e.0] as f64
    }

    pub fn max_spacing(&self, g: &MetricGraph) -> f64 {
        g.edge_ids().map(|e| self.spacing(g, e)).fold(0.0, f64::max)
    }

    pub fn dof_count(&self, g: &MetricGraph) -> usize {
        let vertex_dofs = g.vertices().iter().filter(|v| !v.coupling.is_dirichlet()).count();
        vertex_dofs + self.elements.iter().map(|n| n - 1).sum::<usize>()
    }
}

/// Symmetric matrix in coordinate form (upper triangle stored).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymmetric {
    pub n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SparseSymmetric {
    fn new(n: usize) -> Self {
        Self { n, entries: BTreeMap::new() }
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let key = if i <= j { (i, j) } else { (j, i) };
        *self.entries.entry(key).or_insert(0.0) += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).copied().unwrap_or(0.0)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in &self.entries {
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m
    }
}

#[derive(Debug, Clone, Copy)]
struct Element {
    stiffness: [[f64; 2]; 2],
    mass: [[f64; 2]; 2],
}

/// Assembled element data plus the degree-of-freedom map.
#[derive(Debug, Clone)]
pub struct FemSystem {
    /// Per edge, per element.
    elements: Vec<Vec<Element>>,
    /// Endpoint DOFs of each edge (`None` for Dirichlet vertices).
    endpoints: Vec<(Option<usize>, Option<usize>)>,
    /// First interior DOF of each edge.
    interior_offset: Vec<usize>,
    vertex_dofs: usize,
    sigma: Vec<f64>,
    n_dof: usize,
    max_spacing: f64,
    potential_sup: f64,
}

impl FemSystem {
    pub fn new(g: &MetricGraph, mesh: &FemMesh) -> Result<Self> {
        let mut vertex_dof = Vec::with_capacity(g.vertices().len());
        let mut sigma = Vec::new();
        for v in g.vertices() {
            match v.coupling.sigma() {
                Some(s) => {
                    vertex_dof.push(Some(sigma.len()));
                    sigma.push(s);
                }
                None => vertex_dof.push(None),
            }
        }
        let vertex_dofs = sigma.len();
        let mut offset = vertex_dofs;
        let mut elements = Vec::with_capacity(g.edges().len());
        let mut endpoints = Vec::with_capacity(g.edges().len());
        let mut interior_offset = Vec::with_capacity(g.edges().len());
        // two-point Gauss on [0, 1]
        let gp = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
        for (j, edge) in g.edges().iter().enumerate() {
            let n = mesh.elements[j];
            let h = edge.length / n as f64;
            let mut els = Vec::with_capacity(n);
            for k in 0..n {
                let x0 = k as f64 * h;
                let mut pot = [[0.0; 2]; 2];
                if !edge.potential.is_zero() {
                    for &t in &gp {
                        let v = edge.potential.eval(x0 + t * h, edge.length);
                        let phi = [1.0 - t, t];
                        for a in 0..2 {
                            for b in 0..2 {
                                pot[a][b] += 0.5 * h * v * phi[a] * phi[b];
                            }
                        }
                    }
                }
                let s = 1.0 / h;
                let stiffness = [[s + pot[0][0], -s + pot[0][1]], [-s + pot[1][0], s + pot[1][1]]];
                let mass = [[h / 3.0, h / 6.0], [h / 6.0, h / 3.0]];
                els.push(Element { stiffness, mass });
            }
            elements.push(els);
            endpoints.push((vertex_dof[edge.from.0], vertex_dof[edge.to.0]));
            interior_offset.push(offset);
            offset += n - 1;
        }
        if offset == 0 {
            return Err(SpectralError::Fem("Dirichlet elimination leaves no degrees of freedom".into()));
        }
        Ok(Self {
            elements,
            endpoints,
            interior_offset,
            vertex_dofs,
            sigma,
            n_dof: offset,
            max_spacing: mesh.max_spacing(g),
            potential_sup: g.potential_sup(),
        })
    }

    pub fn dof_count(&self) -> usize {
        self.n_dof
    }

    /// Global DOF of local node `i` (0..=n) on edge `j`.
    fn node_dof(&self, j: usize, i: usize) -> Option<usize> {
        let n = self.elements[j].len();
        if i == 0 {
            self.endpoints[j].0
        } else if i == n {
            self.endpoints[j].1
        } else {
            Some(self.interior_offset[j] + i - 1)
        }
    }

    /// `(A, B)`: stiffness plus potential plus vertex couplings, and mass.
    pub fn matrices(&self) -> (SparseSymmetric, SparseSymmetric) {
        let mut a = SparseSymmetric::new(self.n_dof);
        let mut b = SparseSymmetric::new(self.n_dof);
        for (j, els) in self.elements.iter().enumerate() {
            for (k, el) in els.iter().enumerate() {
                let dofs = [self.node_dof(j, k), self.node_dof(j, k + 1)];
                for p in 0..2 {
                    for q in p..2 {
                        if let (Some(dp), Some(dq)) = (dofs[p], dofs[q]) {
                            // off-diagonal pairs on a one-element loop land on the diagonal twice
                            let factor = if p != q && dp == dq { 2.0 } else { 1.0 };
                            a.add(dp, dq, factor * el.stiffness[p][q]);
                            b.add(dp, dq, factor * el.mass[p][q]);
                        }
                    }
                }
            }
        }
        for (v, &s) in self.sigma.iter().enumerate() {
            a.add(v, v, s);
        }
        (a, b)
    }

    /// Number of discrete eigenvalues strictly below `mu`.
    pub fn count_below(&self, mu: f64) -> usize {
        let nv = self.vertex_dofs;
        let mut schur = DMatrix::<f64>::zeros(nv, nv);
        for (v, &s) in self.sigma.iter().enumerate() {
            schur[(v, v)] += s;
        }
        let mut negatives = 0usize;
        for (j, els) in self.elements.iter().enumerate() {
            let k_of = |el: &Element, p: usize, q: usize| el.stiffness[p][q] - mu * el.mass[p][q];
            let n = els.len();
            let (from, to) = self.endpoints[j];
            // vertex-vertex contributions of the end elements
            if let Some(u) = from {
                schur[(u, u)] += k_of(&els[0], 0, 0);
            }
            if let Some(w) = to {
                schur[(w, w)] += k_of(&els[n - 1], 1, 1);
            }
            if n == 1 {
                if let (Some(u), Some(w)) = (from, to) {
                    let c = k_of(&els[0], 0, 1);
                    schur[(u, w)] += c;
                    schur[(w, u)] += c;
                }
                continue;
            }
            let m = n - 1;
            let mut piv = Vec::with_capacity(m);
            let mut ratio = Vec::with_capacity(m); // l_i = off_{i-1} / piv_{i-1}
            for i in 0..m {
                // interior node i+1 sits between elements i and i+1
                let diag = k_of(&els[i], 1, 1) + k_of(&els[i + 1], 0, 0);
                let p = if i == 0 {
                    ratio.push(0.0);
                    diag
                } else {
                    let off = k_of(&els[i], 0, 1);
                    let l = off / piv[i - 1];
                    ratio.push(l);
                    diag - l * off
                };
                let p = if p == 0.0 { f64::EPSILON * diag.abs().max(f64::MIN_POSITIVE) } else { p };
                if p < 0.0 {
                    negatives += 1;
                }
                piv.push(p);
            }
            let b0 = k_of(&els[0], 0, 1);
            let bn = k_of(&els[n - 1], 1, 0);
            // x = T^{-1} e_1: forward (unit lower), diagonal, backward
            let mut x = vec![0.0; m];
            let mut z = 1.0;
            x[0] = 1.0;
            for i in 1..m {
                z *= -ratio[i];
                x[i] = z;
            }
            for i in 0..m {
                x[i] /= piv[i];
            }
            for i in (0..m - 1).rev() {
                x[i] -= ratio[i + 1] * x[i + 1];
            }
            let t11 = x[0];
            let t1m = x[m - 1];
            let tmm = 1.0 / piv[m - 1];
            match (from, to) {
                (Some(u), Some(w)) if u == w => {
                    schur[(u, u)] -= b0 * b0 * t11 + bn * bn * tmm + 2.0 * b0 * bn * t1m;
                }
                (from, to) => {
                    if let Some(u) = from {
                        schur[(u, u)] -= b0 * b0 * t11;
                    }
                    if let Some(w) = to {
                        schur[(w, w)] -= bn * bn * tmm;
                    }
                    if let (Some(u), Some(w)) = (from, to) {
                        schur[(u, w)] -= b0 * bn * t1m;
                        schur[(w, u)] -= b0 * bn * t1m;
                    }
                }
            }
        }
        if nv > 0 {
            negatives += schur.symmetric_eigenvalues().iter().filter(|&&e| e < 0.0).count();
        }
        negatives
    }

    /// Safety margin `3·h²(|Λ| + ‖V‖_∞)²/12`: three times the leading P1
    /// eigenvalue error at level `Λ`.
    pub fn margin(&self, lambda: f64) -> f64 {
        let scale = lambda.abs() + self.potential_sup;
        0.25 * self.max_spacing * self.max_spacing * scale * scale
    }

    /// Lowest `n` eigenvalues by dense Cholesky reduction.
    pub fn dense_eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        if n > self.n_dof {
            return Err(SpectralError::Fem(format!("requested {n} eigenvalues from {} unknowns", self.n_dof)));
        }
        let (a, b) = self.matrices();
        let a = a.to_dense();
        let b = b.to_dense();
        let chol = b
            .cholesky()
            .ok_or_else(|| SpectralError::Fem("mass matrix is not positive definite".into()))?;
        let l = chol.l();
        let la = l
            .solve_lower_triangular(&a)
            .ok_or_else(|| SpectralError::Fem("triangular solve failed".into()))?;
        let c = l
            .solve_lower_triangular(&la.transpose())
            .ok_or_else(|| SpectralError::Fem("triangular solve failed".into()))?;
        let c = (&c + c.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(c).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev.truncate(n);
        Ok(ev)
    }
}

/// Assembled `(A, B)` for a graph and mesh.
pub fn fem_assemble(g: &MetricGraph, mesh: &FemMesh) -> Result<(SparseSymmetric, SparseSymmetric)> {
    Ok(FemSystem::new(g, mesh)?.matrices())
}

/// Lowest `n` generalized eigenvalues of `(A, B)`.
pub fn fem_eigenvalues(g: &MetricGraph, mesh: &FemMesh, n: usize) -> Result<Vec<f64>> {
    FemSystem::new(g, mesh)?.dense_eigenvalues(n)
}

/// Richardson extrapolation `(4λ(h/2) − λ(h))/3` from `mesh` and its refinement.
pub fn fem_eigenvalues_richardson(g: &MetricGraph, mesh: &FemMesh, n: usize) -> Result<Vec<f64>> {
    let coarse = fem_eigenvalues(g, mesh, n)?;
    let fine = fem_eigenvalues(g, &mesh.refined(), n)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Oracle count: discrete eigenvalues `≤ Λ + margin(Λ)`.
pub fn fem_count(g: &MetricGraph, mesh: &FemMesh, lambda: f64) -> Result<usize> {
    let sys = FemSystem::new(g, mesh)?;
    Ok(sys.count_below(lambda + sys.margin(lambda)))
}

/// Lowest discrete eigenvalue by inertia bisection (an upper bound for the
/// true ground state).
pub fn lowest_eigenvalue(g: &MetricGraph, mesh: &FemMesh) -> Result<f64> {
    let sys = FemSystem::new(g, mesh)?;
    let mut lo = -1.0;
    while sys.count_below(lo) > 0 {
        lo = 2.0 * lo - 1.0;
        if lo < -1e12 {
            return Err(SpectralError::Fem("no lower bound for the spectrum found".into()));
        }
    }
    let mut hi = 1.0;
    while sys.count_below(hi) == 0 {
        hi = 2.0 * hi + 1.0;
        if hi > 1e15 {
            return Err(SpectralError::Fem("no eigenvalue found below 1e15".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sys.count_below(mid) == 0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::graph::VertexId;
    use crate::potential::PotentialSpec;
    use std::f64::consts::PI;

    #[test]
    fn textbook_p1_matrices() {
        let g = catalog::interval(1.0, 0.0, 0.0);
        let mesh = FemMesh::with_element_counts(&g, vec![2]).unwrap();
        let (a, b) = fem_assemble(&g, &mesh).unwrap();
        let h = 0.5;
        // DOFs: v0 = 0, v1 = 1, interior = 2; reorder to (v0, mid, v1)
        let order = [0usize, 2, 1];
        let ea = [[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]];
        let eb = [[2.0, 1.0, 0.0], [1.0, 4.0, 1.0], [0.0, 1.0, 2.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((a.get(order[i], order[j]) - ea[i][j] / h).abs() < 1e-14);
                assert!((b.get(order[i], order[j]) - h / 6.0 * eb[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn vertex_coupling_and_constant_potential() {
        let g0 = catalog::star(&[1.0, 1.0], 0.0);
        let g1 = catalog::star(&[1.0, 1.0], 1.0);
        let mesh = FemMesh::uniform(&g0, 0.05).unwrap();
        let (a0, b) = fem_assemble(&g0, &mesh).unwrap();
        let (a1, _) = fem_assemble(&g1, &mesh).unwrap();
        let center = 0; // vc is the first vertex DOF
        assert!((a1.get(center, center) - a0.get(center, center) - 1.0).abs() < 1e-14);
        let gc = g0.shifted_potential(2.5);
        let (ac, _) = fem_assemble(&gc, &mesh).unwrap();
        let (a0d, bd, acd) = (a0.to_dense(), b.to_dense(), ac.to_dense());
        assert!((acd - (a0d + bd * 2.5)).abs().max() < 1e-12);
    }

    #[test]
    fn symmetric_assembly() {
        let g = catalog::figure_eight(1.0, 1.5)
            .with_coupling(VertexId(0), crate::graph::Coupling::Delta(0.7))
            .unwrap()
            .shifted_potential(0.1);
        let mesh = FemMesh::uniform(&g, 0.1).unwrap();
        let (a, b) = fem_assemble(&g, &mesh).unwrap();
        let (a, b) = (a.to_dense(), b.to_dense());
        assert!((&a - a.transpose()).abs().max() < 1e-12);
        assert!((&b - b.transpose()).abs().max() < 1e-12);
    }

    #[test]
    fn neumann_interval_converges_at_second_order() {
        let g = catalog::interval(1.0, 0.0, 0.0);
        let coarse = fem_eigenvalues(&g, &FemMesh::uniform(&g, 1.0 / 40.0).unwrap(), 4).unwrap();
        let fine = fem_eigenvalues(&g, &FemMesh::uniform(&g, 1.0 / 80.0).unwrap(), 4).unwrap();
        assert!(coarse[0].abs() < 1e-10);
        for n in 1..4 {
            let exact = (n as f64 * PI).powi(2);
            let order = ((coarse[n] - exact) / (fine[n] - exact)).log2();
            assert!((order - 2.0).abs() < 0.05, "order {order}");
        }
    }

    #[test]
    fn inertia_count_matches_dense() {
        let graphs = [
            catalog::interval(1.0, 1.0, 0.0),
            catalog::star(&[1.0, 0.7, 1.3], -0.5),
            catalog::loop_graph(2.0),
            catalog::figure_eight(1.0, 1.5),
            catalog::interval_with_potential(
                1.0,
                0.0,
                0.0,
                PotentialSpec::TrigSeries { a0: 1.0, terms: vec![(1.0, 0.0)] },
            ),
            catalog::star(&[1.0, 1.0], 0.0).with_coupling(VertexId(1), crate::graph::Coupling::Dirichlet).unwrap(),
        ];
        for g in &graphs {
            let mesh = FemMesh::uniform(g, 0.05).unwrap();
            let sys = FemSystem::new(g, &mesh).unwrap();
            let ev = sys.dense_eigenvalues(sys.dof_count()).unwrap();
            for &mu in &[-3.0, -0.1, 0.5, 7.3, 40.0, 200.0, 1000.0] {
                // stay away from eigenvalues to make the comparison unambiguous
                if ev.iter().any(|e| (e - mu).abs() < 1e-8) {
                    continue;
                }
                let dense = ev.iter().filter(|&&e| e < mu).count();
                assert_eq!(sys.count_below(mu), dense, "mu {mu} graph {g:?}");
            }
        }
    }

    #[test]
    fn counts_and_lowest() {
        let g = catalog::interval(1.0, 0.0, 0.0);
        let mesh = FemMesh::uniform(&g, 0.01).unwrap();
        assert_eq!(fem_count(&g, &mesh, 10.0).unwrap(), 2);
        assert_eq!(fem_count(&g, &mesh, -1.0).unwrap(), 0);
        let low = lowest_eigenvalue(&catalog::interval(1.0, -1.0, 0.0), &mesh).unwrap();
        assert!(low < 0.0);
    }

    #[test]
    fn richardson_improves_robin_ground_state() {
        // k tan k = 1 by plain bisection
        let (mut a, mut b) = (0.1f64, 1.5f64);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if (m * m.tan() - 1.0) < 0.0 {
                a = m
            } else {
                b = m
            }
        }
        let exact = a * a;
        let g = catalog::interval(1.0, 1.0, 0.0);
        let mesh = FemMesh::uniform(&g, 1.0 / 32.0).unwrap();
        let plain = fem_eigenvalues(&g, &mesh, 1).unwrap()[0];
        let rich = fem_eigenvalues_richardson(&g, &mesh, 1).unwrap()[0];
        assert!((rich - exact).abs() < 0.05 * (plain - exact).abs());
        assert!((rich - 0.740174).abs() < 1e-5);
    }
}
