//! P1 finite-element assembly on triangles: stiffness with per-element 2×2
//! tensors, consistent/lumped mass, interface (line) mass on Γ, gradient
//! loads, and the dof bookkeeping for periodic and Dirichlet constraints.
//!
//! Element coefficients are piecewise constant (evaluated at centroids by the
//! callers), which makes all element integrals exact for P1.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeTag, PeriodicPair};
use crate::sparse::{CsrMatrix, Triplets};

/// Symmetric 2×2 coefficient tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tensor2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Tensor2 {
    pub fn isotropic(v: f64) -> Self {
        Tensor2 {
            xx: v,
            xy: 0.0,
            yy: v,
        }
    }

    pub fn zero() -> Self {
        Tensor2::isotropic(0.0)
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    pub fn scale(&self, s: f64) -> Tensor2 {
        Tensor2 {
            xx: s * self.xx,
            xy: s * self.xy,
            yy: s * self.yy,
        }
    }

    /// Eigenvalues of the symmetric tensor, smallest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let radius = (0.25 * (self.xx - self.yy).powi(2) + self.xy * self.xy).sqrt();
        (mean - radius, mean + radius)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.eigenvalues().0 > 0.0
    }
}

/// Node → dof map with periodic pairs merged and Dirichlet dofs flagged.
#[derive(Debug, Clone)]
pub struct DofMap {
    node_to_dof: Vec<Option<usize>>,
    n_dofs: usize,
    dirichlet: Vec<bool>,
}

impl DofMap {
    /// One dof per node, Dirichlet taken from the node tags.
    pub fn from_mesh(mesh: &Mesh) -> DofMap {
        let n = mesh.n_nodes();
        DofMap {
            node_to_dof: (0..n).map(Some).collect(),
            n_dofs: n,
            dirichlet: mesh
                .node_tags
                .iter()
                .map(|&t| t == NodeTag::Dirichlet)
                .collect(),
        }
    }

    /// Merge periodic pairs into shared dofs (transitively, so the four cell
    /// corners collapse to a single dof). `active` restricts the dof set,
    /// e.g. to gas nodes for the ω field; merging respects the restriction.
    pub fn periodic(n_nodes: usize, pairs: &[PeriodicPair], active: Option<&[bool]>) -> DofMap {
        let mut parent: Vec<usize> = (0..n_nodes).collect();
        fn find(parent: &mut Vec<usize>, i: usize) -> usize {
            let mut root = i;
            while parent[root] != root {
                root = parent[root];
            }
            let mut walk = i;
            while parent[walk] != root {
                let next = parent[walk];
                parent[walk] = root;
                walk = next;
            }
            root
        }
        for pair in pairs {
            let (ra, rb) = (find(&mut parent, pair.a), find(&mut parent, pair.b));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }

        let is_active = |i: usize| active.map_or(true, |a| a[i]);
        let mut root_dof: Vec<Option<usize>> = vec![None; n_nodes];
        let mut node_to_dof = vec![None; n_nodes];
        let mut n_dofs = 0;
        for i in 0..n_nodes {
            if !is_active(i) {
                continue;
            }
            let root = find(&mut parent, i);
            let dof = *root_dof[root].get_or_insert_with(|| {
                let d = n_dofs;
                n_dofs += 1;
                d
            });
            node_to_dof[i] = Some(dof);
        }
        DofMap {
            node_to_dof,
            n_dofs,
            dirichlet: vec![false; n_dofs],
        }
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn dof(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.dirichlet[dof]
    }

    /// Spread dof values back onto nodes; inactive nodes get `fill`.
    pub fn expand(&self, dof_values: &[f64], fill: f64) -> Vec<f64> {
        self.node_to_dof
            .iter()
            .map(|d| d.map_or(fill, |k| dof_values[k]))
            .collect()
    }
}

fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let two_a =
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let grads = [
        [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
        [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
        [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
    ];
    (grads, 0.5 * two_a)
}

fn active_element(mask: Option<&[bool]>, t: usize) -> bool {
    mask.map_or(true, |m| m[t])
}

/// ∫ coeff ∇φ_i · ∇φ_j over the (masked) elements. The coefficient must be
/// positive definite on every active element.
pub fn assemble_stiffness(
    mesh: &Mesh,
    coeff: &[Tensor2],
    mask: Option<&[bool]>,
    map: &DofMap,
) -> Result<CsrMatrix> {
    let mut t = Triplets::new(map.n_dofs(), map.n_dofs());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        if !active_element(mask, e) {
            continue;
        }
        let tensor = coeff[e];
        if !tensor.is_positive_definite() {
            return Err(Error::Assembly(format!(
                "element {e} coefficient is not positive definite ({tensor:?})"
            )));
        }
        let (grads, area) = p1_gradients(tri.map(|i| mesh.nodes[i]));
        let flux: [[f64; 2]; 3] = [
            tensor.apply(grads[0]),
            tensor.apply(grads[1]),
            tensor.apply(grads[2]),
        ];
        for a in 0..3 {
            let Some(da) = map.dof(tri[a]) else { continue };
            for b in 0..3 {
                let Some(db) = map.dof(tri[b]) else { continue };
                let k = area * (grads[a][0] * flux[b][0] + grads[a][1] * flux[b][1]);
                t.push(da, db, k);
            }
        }
    }
    Ok(t.to_csr())
}

/// ∫ coeff φ_i φ_j (consistent) or its row-sum lumping (diagonal).
pub fn assemble_mass(
    mesh: &Mesh,
    coeff: &[f64],
    mask: Option<&[bool]>,
    map: &DofMap,
    lumped: bool,
) -> CsrMatrix {
    let mut t = Triplets::new(map.n_dofs(), map.n_dofs());
    for (e, tri) in mesh.triangles.iter().enumerate() {
        if !active_element(mask, e) {
            continue;
        }
        let area = mesh.triangle_area(e);
        let c = coeff[e];
        for a in 0..3 {
            let Some(da) = map.dof(tri[a]) else { continue };
            if lumped {
                t.push(da, da, c * area / 3.0);
            } else {
                for b in 0..3 {
                    let Some(db) = map.dof(tri[b]) else { continue };
                    let m = c * area / 12.0 * if a == b { 2.0 } else { 1.0 };
                    t.push(da, db, m);
                }
            }
        }
    }
    t.to_csr()
}

/// Lumped-mass weights per dof (unit coefficient).
pub fn lumped_mass_vector(mesh: &Mesh, mask: Option<&[bool]>, map: &DofMap) -> Vec<f64> {
    let ones = vec![1.0; mesh.n_triangles()];
    let m = assemble_mass(mesh, &ones, mask, map, true);
    let mut w = vec![0.0; map.n_dofs()];
    for (i, wi) in w.iter_mut().enumerate() {
        *wi = m.get(i, i);
    }
    w
}

/// ∫_Γ φ_i φ_j dσ over straight interface edges (1D P1 line elements).
/// Row and column spaces may differ (χ vs ω dofs).
pub fn assemble_interface_mass(
    nodes: &[[f64; 2]],
    edges: &[[usize; 2]],
    row_map: &DofMap,
    col_map: &DofMap,
) -> CsrMatrix {
    let mut t = Triplets::new(row_map.n_dofs(), col_map.n_dofs());
    for &[a, b] in edges {
        let (pa, pb) = (nodes[a], nodes[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        for (na, nb, w) in [
            (a, a, len / 3.0),
            (a, b, len / 6.0),
            (b, a, len / 6.0),
            (b, b, len / 3.0),
        ] {
            if let (Some(ra), Some(cb)) = (row_map.dof(na), col_map.dof(nb)) {
                t.push(ra, cb, w);
            }
        }
    }
    t.to_csr()
}

/// Load vector b_i = ∫ (coeff e_j) · ∇φ_i over the (masked) elements.
pub fn assemble_gradient_load(
    mesh: &Mesh,
    coeff: &[Tensor2],
    mask: Option<&[bool]>,
    direction: usize,
    map: &DofMap,
) -> Vec<f64> {
    assert!(direction < 2, "direction must be 0 or 1");
    let e_j = if direction == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
    let mut b = vec![0.0; map.n_dofs()];
    for (e, tri) in mesh.triangles.iter().enumerate() {
        if !active_element(mask, e) {
            continue;
        }
        let (grads, area) = p1_gradients(tri.map(|i| mesh.nodes[i]));
        let flux = coeff[e].apply(e_j);
        for a in 0..3 {
            if let Some(da) = map.dof(tri[a]) {
                b[da] += area * (flux[0] * grads[a][0] + flux[1] * grads[a][1]);
            }
        }
    }
    b
}

/// Null-space / boundary treatment for an assembled system. The enum makes the
/// "both at once" misuse unrepresentable.
pub enum Constraint<'a> {
    /// Eliminate rows/cols of flagged dofs, moving values to the rhs.
    Dirichlet(&'a [Option<f64>]),
    /// One Lagrange multiplier row/column with the given weights
    /// (typically the lumped mass over the χ block, zero elsewhere).
    ZeroMean(&'a [f64]),
    /// Two independent multipliers for the decoupled (f = 0) cell system.
    ZeroMeanPair(&'a [f64], &'a [f64]),
}

/// Apply the constraint, returning the closed system. For `ZeroMean*` the
/// system grows by the number of multipliers; strip them from the solution
/// with [`strip_multipliers`].
pub fn constrain(a: &CsrMatrix, b: &[f64], constraint: &Constraint) -> (CsrMatrix, Vec<f64>) {
    match constraint {
        Constraint::Dirichlet(values) => {
            let n = a.n_rows();
            assert_eq!(values.len(), n);
            let mut t = Triplets::new(n, n);
            let mut rhs = b.to_vec();
            for i in 0..n {
                if let Some(v) = values[i] {
                    rhs[i] = v;
                    continue;
                }
                let (cols, vals) = a.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    match values[j] {
                        Some(g) => rhs[i] -= v * g,
                        None => t.push(i, j, v),
                    }
                }
            }
            for (i, v) in values.iter().enumerate() {
                if v.is_some() {
                    t.push(i, i, 1.0);
                }
            }
            (t.to_csr(), rhs)
        }
        Constraint::ZeroMean(w) => augment(a, b, &[w]),
        Constraint::ZeroMeanPair(w1, w2) => augment(a, b, &[w1, w2]),
    }
}

fn augment(a: &CsrMatrix, b: &[f64], weights: &[&[f64]]) -> (CsrMatrix, Vec<f64>) {
    let n = a.n_rows();
    let m = weights.len();
    let mut t = Triplets::new(n + m, n + m);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            t.push(i, j, v);
        }
    }
    for (k, w) in weights.iter().enumerate() {
        assert_eq!(w.len(), n);
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                t.push(n + k, j, wj);
                t.push(j, n + k, wj);
            }
        }
    }
    let mut rhs = b.to_vec();
    rhs.extend(std::iter::repeat(0.0).take(m));
    (t.to_csr(), rhs)
}

pub fn strip_multipliers(mut x: Vec<f64>, n: usize) -> Vec<f64> {
    x.truncate(n);
    x
}
