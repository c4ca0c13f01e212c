//! Triangulated domains: the macroscopic rectangle and the periodic unit cell.
//!
//! The macro mesh is a structured crossed-triangle grid on [0,Lx]×[0,Ly] with
//! the x₁ = 0 edge marked Dirichlet and the rest Neumann. The cell mesh covers
//! the unit square with a circular solid inclusion polygonized at `n_circle`
//! segments; it is built from concentric rings inside the inclusion and
//! blended radial layers outside, so that node positions carry the full
//! dihedral symmetry of the square exactly (mirrors and 90° rotations are
//! implemented as sign flips and coordinate swaps in centered coordinates).
//! Opposite boundary faces therefore match node-for-node and periodic pairing
//! is exact.

use crate::error::{Error, Result};
use std::collections::HashMap;

pub const GEOMETRIC_TOL: f64 = 1e-12;
/// Coordinate tolerance for periodic matching.
pub const PERIODIC_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeTag {
    Dirichlet,
    Neumann,
    Periodic,
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Gas,
    Solid,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

/// Axis along which a periodic pair is identified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A matched pair of boundary nodes on opposite faces (`a` on the low face).
#[derive(Debug, Clone, Copy)]
pub struct PeriodicPair {
    pub a: usize,
    pub b: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub node_tags: Vec<NodeTag>,
}

#[derive(Debug, Clone)]
pub struct MeshQuality {
    pub min_angle_deg: f64,
    pub max_aspect: f64,
    pub h_max: f64,
    pub h_min: f64,
}

fn triangle_area(nodes: &[[f64; 2]], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(&self.nodes, &self.triangles[t])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|i| self.nodes[i]);
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
        ]
    }

    pub fn dirichlet_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .filter(|&i| self.node_tags[i] == NodeTag::Dirichlet)
            .collect()
    }

    /// Count of triangles adjacent to each undirected edge.
    fn edge_use_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                *counts
                    .entry(edge_key(tri[e], tri[(e + 1) % 3]))
                    .or_insert(0) += 1;
            }
        }
        counts
    }

    /// Structural invariants: positive triangle areas, each boundary edge on
    /// exactly one triangle (and vice versa), and total area matching
    /// `expected_area` to 1e−12 relative when given.
    pub fn validate(&self, expected_area: Option<f64>) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            let area = triangle_area(&self.nodes, tri);
            if !(area > 0.0) {
                return Err(Error::MeshValidation(format!(
                    "triangle {t} has non-positive area {area:.3e}"
                )));
            }
        }
        let counts = self.edge_use_counts();
        for be in &self.boundary_edges {
            match counts.get(&edge_key(be.nodes[0], be.nodes[1])) {
                Some(1) => {}
                Some(k) => {
                    return Err(Error::MeshValidation(format!(
                        "boundary edge {:?} belongs to {k} triangles",
                        be.nodes
                    )))
                }
                None => {
                    return Err(Error::MeshValidation(format!(
                        "boundary edge {:?} not part of the triangulation",
                        be.nodes
                    )))
                }
            }
        }
        let listed: std::collections::HashSet<_> = self
            .boundary_edges
            .iter()
            .map(|be| edge_key(be.nodes[0], be.nodes[1]))
            .collect();
        for (edge, count) in &counts {
            if *count == 1 && !listed.contains(edge) {
                return Err(Error::MeshValidation(format!(
                    "edge {edge:?} lies on the boundary but is untagged"
                )));
            }
        }
        if let Some(expected) = expected_area {
            let total = self.total_area();
            if (total - expected).abs() > GEOMETRIC_TOL * expected.abs().max(1.0) {
                return Err(Error::MeshValidation(format!(
                    "total area {total:.15e} differs from expected {expected:.15e}"
                )));
            }
        }
        Ok(())
    }

    /// Quality metrics for refinement studies. Validates first so a
    /// degenerate mesh reports an error rather than numbers.
    pub fn quality(&self) -> Result<MeshQuality> {
        self.validate(None)?;
        let mut min_angle = f64::INFINITY;
        let mut max_aspect: f64 = 0.0;
        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        for tri in &self.triangles {
            let p = tri.map(|i| self.nodes[i]);
            let mut lens = [0.0; 3];
            for e in 0..3 {
                let q = p[(e + 1) % 3];
                lens[e] = ((q[0] - p[e][0]).powi(2) + (q[1] - p[e][1]).powi(2)).sqrt();
            }
            let (a, b, c) = (lens[0], lens[1], lens[2]);
            h_max = h_max.max(a.max(b).max(c));
            h_min = h_min.min(a.min(b).min(c));
            max_aspect = max_aspect.max(a.max(b).max(c) / a.min(b).min(c));
            // angle at the vertex opposite each edge, by the law of cosines
            for (opp, (e1, e2)) in [(a, (b, c)), (b, (c, a)), (c, (a, b))] {
                let cos = ((e1 * e1 + e2 * e2 - opp * opp) / (2.0 * e1 * e2)).clamp(-1.0, 1.0);
                min_angle = min_angle.min(cos.acos());
            }
        }
        Ok(MeshQuality {
            min_angle_deg: min_angle.to_degrees(),
            max_aspect,
            h_max,
            h_min,
        })
    }
}

/// Periodic unit-cell mesh: a [`Mesh`] plus region tags, oriented interface
/// edges (normal pointing from solid into gas) and periodic node pairs.
#[derive(Debug, Clone)]
pub struct CellMesh {
    pub mesh: Mesh,
    pub region: Vec<Region>,
    /// Edges on Γ, ordered so the solid side lies to the left of a→b.
    pub interface_edges: Vec<[usize; 2]>,
    pub periodic_pairs: Vec<PeriodicPair>,
}

impl CellMesh {
    pub fn gas_area(&self) -> f64 {
        self.area_of(Region::Gas)
    }

    pub fn solid_area(&self) -> f64 {
        self.area_of(Region::Solid)
    }

    fn area_of(&self, region: Region) -> f64 {
        (0..self.mesh.n_triangles())
            .filter(|&t| self.region[t] == region)
            .map(|t| self.mesh.triangle_area(t))
            .sum()
    }

    pub fn interface_length(&self) -> f64 {
        self.interface_edges
            .iter()
            .map(|&[a, b]| {
                let (pa, pb) = (self.mesh.nodes[a], self.mesh.nodes[b]);
                ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt()
            })
            .sum()
    }

    /// Nodes that belong to at least one gas triangle (ω support).
    pub fn gas_nodes(&self) -> Vec<bool> {
        let mut gas = vec![false; self.mesh.n_nodes()];
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            if self.region[t] == Region::Gas {
                for &v in tri {
                    gas[v] = true;
                }
            }
        }
        gas
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.validate(Some(1.0))?;
        if self.region.len() != self.mesh.n_triangles() {
            return Err(Error::MeshValidation(
                "region tags do not match triangle count".into(),
            ));
        }
        let gas = self.gas_area();
        let solid = self.solid_area();
        if (gas + solid - 1.0).abs() > GEOMETRIC_TOL {
            return Err(Error::MeshValidation(format!(
                "gas + solid area = {:.15e} ≠ 1",
                gas + solid
            )));
        }

        // every Γ edge separates exactly one gas and one solid triangle
        let mut edge_regions: HashMap<(usize, usize), Vec<Region>> = HashMap::new();
        for (t, tri) in self.mesh.triangles.iter().enumerate() {
            for e in 0..3 {
                edge_regions
                    .entry(edge_key(tri[e], tri[(e + 1) % 3]))
                    .or_default()
                    .push(self.region[t]);
            }
        }
        for &[a, b] in &self.interface_edges {
            match edge_regions.get(&edge_key(a, b)).map(Vec::as_slice) {
                Some([r1, r2]) if r1 != r2 => {}
                other => {
                    return Err(Error::MeshValidation(format!(
                        "interface edge [{a}, {b}] does not separate gas from solid ({other:?})"
                    )))
                }
            }
        }

        // periodic pairs: coordinates equal up to a unit translation
        for pair in &self.periodic_pairs {
            let (pa, pb) = (self.mesh.nodes[pair.a], self.mesh.nodes[pair.b]);
            let (shift, same) = match pair.axis {
                Axis::X => ((pb[0] - pa[0] - 1.0).abs(), (pb[1] - pa[1]).abs()),
                Axis::Y => ((pb[1] - pa[1] - 1.0).abs(), (pb[0] - pa[0]).abs()),
            };
            if shift > PERIODIC_TOL || same > PERIODIC_TOL {
                return Err(Error::MeshValidation(format!(
                    "periodic pair ({}, {}) mismatched by ({shift:.3e}, {same:.3e})",
                    pair.a, pair.b
                )));
            }
        }
        Ok(())
    }
}

/// Structured crossed-triangle mesh of [0,Lx]×[0,Ly]; nodes on x₁ = 0 are
/// Dirichlet, every other boundary edge is Neumann.
pub fn build_macro_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh> {
    if !(lx > 0.0) || !(ly > 0.0) {
        return Err(Error::invalid(format!(
            "domain dimensions must be positive, got ({lx}, {ly})"
        )));
    }
    if nx < 1 || ny < 1 {
        return Err(Error::invalid(format!(
            "subdivision counts must be at least 1, got ({nx}, {ny})"
        )));
    }

    let node = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push([lx * i as f64 / nx as f64, ly * j as f64 / ny as f64]);
        }
    }

    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10) = (node(i, j), node(i + 1, j));
            let (p01, p11) = (node(i, j + 1), node(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }

    let mut boundary_edges = Vec::new();
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i, 0), node(i + 1, 0)],
            tag: BoundaryTag::Neumann,
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [node(i + 1, ny), node(i, ny)],
            tag: BoundaryTag::Neumann,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            nodes: [node(nx, j), node(nx, j + 1)],
            tag: BoundaryTag::Neumann,
        });
        boundary_edges.push(BoundaryEdge {
            nodes: [node(0, j + 1), node(0, j)],
            tag: BoundaryTag::Dirichlet,
        });
    }

    let mut node_tags = vec![NodeTag::Interior; nodes.len()];
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 {
                node_tags[node(i, j)] = NodeTag::Dirichlet;
            } else if j == 0 || j == ny || i == nx {
                node_tags[node(i, j)] = NodeTag::Neumann;
            }
        }
    }

    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
        node_tags,
    };
    mesh.validate(Some(lx * ly))?;
    Ok(mesh)
}

/// Direction table with exact dihedral symmetry: entries for the first octant
/// are computed once and propagated by sign flips and coordinate swaps, which
/// are exact in floating point.
fn symmetric_directions(n: usize) -> Vec<[f64; 2]> {
    debug_assert!(n % 8 == 0);
    let mut dir = vec![[0.0; 2]; n];
    let o = n / 8;
    for k in 0..=o {
        let (c, s) = if k == 0 {
            (1.0, 0.0)
        } else if k == o {
            (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2)
        } else {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
            (theta.cos(), theta.sin())
        };
        dir[k] = [c, s];
        dir[n / 4 - k] = [s, c];
        dir[n / 4 + k] = [-s, c];
        dir[n / 2 - k] = [-c, s];
        dir[n / 2 + k] = [-c, -s];
        dir[3 * n / 4 - k] = [-s, -c];
        dir[3 * n / 4 + k] = [s, -c];
        dir[(n - k) % n] = [c, -s];
    }
    dir
}

/// Even-parity quads take the a–d diagonal, odd-parity the b–c diagonal; this
/// keeps the triangulation invariant under the square's mirrors and rotations.
fn split_quad(tris: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize, d: usize, k: usize) {
    // CCW quad: a (inner k), c (outer k), d (outer k+1), b (inner k+1)
    if k % 2 == 0 {
        tris.push([a, c, d]);
        tris.push([a, d, b]);
    } else {
        tris.push([a, c, b]);
        tris.push([c, d, b]);
    }
}

/// Unit square [0,1]² with an inscribed regular polygon (the circle of radius
/// `r`, polygonized at `n_circle` segments rounded up to a multiple of 8) as
/// the solid inclusion. `h` is the target radial edge length.
pub fn build_cell_mesh(r: f64, n_circle: usize, h: f64) -> Result<CellMesh> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("inclusion radius must be positive, got {r}")));
    }
    if r >= 0.5 {
        return Err(Error::invalid(format!(
            "inclusion radius {r} touches or exceeds the cell boundary (must be < 0.5)"
        )));
    }
    if n_circle < 8 {
        return Err(Error::invalid(format!(
            "n_circle must be at least 8, got {n_circle}"
        )));
    }
    if !(h > 0.0) {
        return Err(Error::invalid(format!("target edge length must be positive, got {h}")));
    }
    let n = n_circle.div_ceil(8) * 8;

    let n_disk = ((r / h).round() as usize).max(2); // rings inside the inclusion
    let corner = std::f64::consts::FRAC_1_SQRT_2; // center-to-corner distance
    let n_ann = (((corner - r) / h).round() as usize).max(2); // layers outside

    let dir = symmetric_directions(n);
    // distance from the center to the square boundary along each direction
    let rho: Vec<f64> = dir
        .iter()
        .map(|d| 0.5 / d[0].abs().max(d[1].abs()))
        .collect();

    // nodes in centered coordinates: center, disk rings, annulus layers
    let mut centered: Vec<[f64; 2]> = Vec::with_capacity(1 + (n_disk + n_ann) * n);
    centered.push([0.0, 0.0]);
    for i in 1..=n_disk {
        let radius = r * i as f64 / n_disk as f64;
        for d in &dir {
            centered.push([radius * d[0], radius * d[1]]);
        }
    }
    for i in 1..=n_ann {
        let t = i as f64 / n_ann as f64;
        for (k, d) in dir.iter().enumerate() {
            let radius = r + t * (rho[k] - r);
            centered.push([radius * d[0], radius * d[1]]);
        }
    }

    let ring_start = |i: usize| 1 + (i - 1) * n; // ring i ≥ 1 (disk then annulus)
    let n_rings = n_disk + n_ann;

    let mut triangles = Vec::with_capacity(2 * n * n_rings);
    for k in 0..n {
        triangles.push([0, ring_start(1) + k, ring_start(1) + (k + 1) % n]);
    }
    for i in 1..n_rings {
        let (inner, outer) = (ring_start(i), ring_start(i + 1));
        for k in 0..n {
            let k1 = (k + 1) % n;
            split_quad(
                &mut triangles,
                inner + k,
                inner + k1,
                outer + k,
                outer + k1,
                k,
            );
        }
    }

    let nodes: Vec<[f64; 2]> = centered.iter().map(|p| [p[0] + 0.5, p[1] + 0.5]).collect();

    // interface ring: CCW order leaves the solid on the left, so the outward
    // normal points from solid into gas
    let iface = ring_start(n_disk);
    let interface_edges: Vec<[usize; 2]> = (0..n)
        .map(|k| [iface + k, iface + (k + 1) % n])
        .collect();

    let outer = ring_start(n_rings);
    let boundary_edges: Vec<BoundaryEdge> = (0..n)
        .map(|k| BoundaryEdge {
            nodes: [outer + k, outer + (k + 1) % n],
            tag: BoundaryTag::Periodic,
        })
        .collect();

    let mut node_tags = vec![NodeTag::Interior; nodes.len()];
    for k in 0..n {
        node_tags[outer + k] = NodeTag::Periodic;
    }

    // classify by centroid against the interface polygon
    let polygon: Vec<[f64; 2]> = (0..n).map(|k| nodes[iface + k]).collect();
    let mesh = Mesh {
        nodes,
        triangles,
        boundary_edges,
        node_tags,
    };
    let region: Vec<Region> = (0..mesh.n_triangles())
        .map(|t| {
            if point_in_polygon(mesh.triangle_centroid(t), &polygon) {
                Region::Solid
            } else {
                Region::Gas
            }
        })
        .collect();

    let periodic_pairs = match_periodic_pairs(&mesh, &centered)?;

    let cell = CellMesh {
        mesh,
        region,
        interface_edges,
        periodic_pairs,
    };
    cell.validate()?;
    Ok(cell)
}

/// Crossing-number point-in-polygon test.
fn point_in_polygon(p: [f64; 2], polygon: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = polygon.len();
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x_cross = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Match nodes on opposite faces via exact centered coordinates.
fn match_periodic_pairs(mesh: &Mesh, centered: &[[f64; 2]]) -> Result<Vec<PeriodicPair>> {
    let mut pairs = Vec::new();
    for (axis, main, other) in [(Axis::X, 0usize, 1usize), (Axis::Y, 1, 0)] {
        let mut low: Vec<(f64, usize)> = Vec::new();
        let mut high: Vec<(f64, usize)> = Vec::new();
        for (i, p) in centered.iter().enumerate() {
            if p[main] == -0.5 {
                low.push((p[other], i));
            } else if p[main] == 0.5 {
                high.push((p[other], i));
            }
        }
        if low.len() != high.len() {
            return Err(Error::MeshGeneration(format!(
                "unmatched periodic nodes on {axis:?} faces ({} vs {})",
                low.len(),
                high.len()
            )));
        }
        low.sort_by(|a, b| a.0.total_cmp(&b.0));
        high.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (&(lv, li), &(hv, hi)) in low.iter().zip(&high) {
            if (lv - hv).abs() > PERIODIC_TOL {
                return Err(Error::MeshGeneration(format!(
                    "unmatched periodic node: {axis:?} faces carry coordinates {lv} vs {hv}"
                )));
            }
            pairs.push(PeriodicPair {
                a: li,
                b: hi,
                axis,
            });
        }
    }
    let _ = mesh;
    Ok(pairs)
}

/// Structured periodic mesh of the unit square with regions assigned by a
/// centroid predicate; used for laminate and obstacle-free cells.
pub fn build_structured_cell_mesh(
    nsub: usize,
    solid: impl Fn([f64; 2]) -> bool,
) -> Result<CellMesh> {
    if nsub < 2 {
        return Err(Error::invalid("structured cell mesh needs nsub ≥ 2"));
    }
    let base = build_macro_mesh(1.0, 1.0, nsub, nsub)?;
    let node = |i: usize, j: usize| j * (nsub + 1) + i;

    let mut node_tags = vec![NodeTag::Interior; base.n_nodes()];
    let mut boundary_edges = base.boundary_edges.clone();
    for be in boundary_edges.iter_mut() {
        be.tag = BoundaryTag::Periodic;
    }
    for k in 0..=nsub {
        for idx in [node(0, k), node(nsub, k), node(k, 0), node(k, nsub)] {
            node_tags[idx] = NodeTag::Periodic;
        }
    }

    let mut periodic_pairs = Vec::new();
    for k in 0..=nsub {
        periodic_pairs.push(PeriodicPair {
            a: node(0, k),
            b: node(nsub, k),
            axis: Axis::X,
        });
        periodic_pairs.push(PeriodicPair {
            a: node(k, 0),
            b: node(k, nsub),
            axis: Axis::Y,
        });
    }

    let mesh = Mesh {
        nodes: base.nodes,
        triangles: base.triangles,
        boundary_edges,
        node_tags,
    };

    let region: Vec<Region> = (0..mesh.n_triangles())
        .map(|t| {
            if solid(mesh.triangle_centroid(t)) {
                Region::Solid
            } else {
                Region::Gas
            }
        })
        .collect();

    // interface edges: shared by one gas and one solid triangle, oriented with
    // the solid on the left
    let mut edge_owner: HashMap<(usize, usize), Vec<(usize, [usize; 2])>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (a, b) = (tri[e], tri[(e + 1) % 3]);
            edge_owner.entry(edge_key(a, b)).or_default().push((t, [a, b]));
        }
    }
    let mut interface_edges = Vec::new();
    for owners in edge_owner.values() {
        if owners.len() == 2 {
            let (t1, dir1) = owners[0];
            let (t2, dir2) = owners[1];
            match (region[t1], region[t2]) {
                (Region::Solid, Region::Gas) => interface_edges.push(dir1),
                (Region::Gas, Region::Solid) => interface_edges.push(dir2),
                _ => {}
            }
        }
    }
    interface_edges.sort_unstable();

    let cell = CellMesh {
        mesh,
        region,
        interface_edges,
        periodic_pairs,
    };
    cell.validate()?;
    Ok(cell)
}

/// Vertical laminate: solid strip for x ∈ [0.25, 0.75], gas elsewhere.
pub fn build_laminate_cell_mesh(nsub: usize) -> Result<CellMesh> {
    let nsub = nsub.div_ceil(4) * 4; // strip boundaries on grid lines
    build_structured_cell_mesh(nsub, |c| c[0] > 0.25 && c[0] < 0.75)
}

/// Obstacle-free cell (all gas, Γ = ∅).
pub fn build_full_gas_cell_mesh(nsub: usize) -> Result<CellMesh> {
    build_structured_cell_mesh(nsub, |_| false)
}

/// Find, for every node, the node at `transform(position)`; `None` if any
/// image is missing. Used for symmetry checks on the cell geometry.
pub fn match_nodes_under(
    mesh: &Mesh,
    transform: impl Fn([f64; 2]) -> [f64; 2],
    tol: f64,
) -> Option<Vec<usize>> {
    let quantum = tol.max(1e-15);
    let key = |p: [f64; 2]| {
        (
            (p[0] / quantum).round() as i64,
            (p[1] / quantum).round() as i64,
        )
    };
    let mut lookup: HashMap<(i64, i64), usize> = HashMap::new();
    for (i, &p) in mesh.nodes.iter().enumerate() {
        lookup.insert(key(p), i);
    }
    let mut map = Vec::with_capacity(mesh.n_nodes());
    for &p in &mesh.nodes {
        let q = transform(p);
        // probe the quantization neighborhood to be safe near cell borders
        let (kx, ky) = key(q);
        let mut found = None;
        'probe: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(&j) = lookup.get(&(kx + dx, ky + dy)) {
                    let pj = mesh.nodes[j];
                    if (pj[0] - q[0]).abs() <= tol && (pj[1] - q[1]).abs() <= tol {
                        found = Some(j);
                        break 'probe;
                    }
                }
            }
        }
        map.push(found?);
    }
    Some(map)
}
