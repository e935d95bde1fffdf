//! Triangulated unit disk meshes.
//!
//! The base mesh is a fan of six triangles around the origin whose outer
//! vertices lie on the unit circle. Each refinement quadrisects every
//! triangle; the midpoint of a boundary edge is placed on the circle at the
//! bisecting arc angle, so every level inscribes the disk with a strictly
//! finer polygon. Vertex order is stable: the center first, then the initial
//! boundary ring counterclockwise, then midpoints in the order their parent
//! edges are first visited. Refining never moves an existing vertex, which
//! makes fields on successive levels directly comparable.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Largest vertex count `build_disk_mesh` will attempt.
pub const VERTEX_BUDGET: u64 = 4_000_000;

const TAU: f64 = std::f64::consts::TAU;

/// One edge of the polygonal boundary, oriented counterclockwise from `a` to `b`.
/// `mid_angle` is the angle of the arc midpoint between the two endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub mid_angle: f64,
}

/// A conforming triangulation of the unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Closed counterclockwise cycle along the polygon boundary.
    pub boundary_edges: Vec<BoundaryEdge>,
    pub level: u32,
}

/// Vertices a quadrisection hierarchy has at `level`: 3*4^level + 3*2^level + 1.
pub fn vertex_count_for_level(level: u32) -> u64 {
    3 * 4u64.pow(level) + 3 * 2u64.pow(level) + 1
}

/// Builds the level-`level` disk mesh by repeated quadrisection of the
/// six-triangle fan.
pub fn build_disk_mesh(level: u32) -> Result<TriMesh> {
    let vertices = vertex_count_for_level(level.min(32));
    if level > 32 || vertices > VERTEX_BUDGET {
        return Err(Error::MeshCapacity {
            level,
            vertices,
            budget: VERTEX_BUDGET,
        });
    }
    let mut mesh = base_fan();
    for _ in 0..level {
        mesh = refine(&mesh);
    }
    Ok(mesh)
}

fn base_fan() -> TriMesh {
    let mut vertices = vec![[0.0, 0.0]];
    for k in 0..6 {
        let theta = TAU * k as f64 / 6.0;
        vertices.push([theta.cos(), theta.sin()]);
    }
    let triangles = (0..6).map(|k| [0, 1 + k, 1 + (k + 1) % 6]).collect();
    let boundary_edges = (0..6)
        .map(|k| BoundaryEdge {
            a: 1 + k,
            b: 1 + (k + 1) % 6,
            mid_angle: TAU * (k as f64 + 0.5) / 6.0,
        })
        .collect();
    TriMesh {
        vertices,
        triangles,
        boundary_edges,
        level: 0,
    }
}

fn normalize_angle(a: f64) -> f64 {
    let a = a.rem_euclid(TAU);
    if a == TAU {
        0.0
    } else {
        a
    }
}

/// Counterclockwise angular gap from `from` to `to`.
fn ccw_gap(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(TAU)
}

fn refine(mesh: &TriMesh) -> TriMesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();

    // Boundary edges get circle midpoints keyed the same way chord midpoints
    // are, so the triangle scan below picks them up.
    let mut on_circle: HashMap<(usize, usize), f64> = HashMap::new();
    for e in &mesh.boundary_edges {
        on_circle.insert(key(e.a, e.b), e.mid_angle);
    }

    let mut mid_of = |a: usize, b: usize, vertices: &mut Vec<[f64; 2]>| -> usize {
        let k = key(a, b);
        if let Some(&m) = midpoint.get(&k) {
            return m;
        }
        let p = match on_circle.get(&k) {
            Some(&angle) => [angle.cos(), angle.sin()],
            None => {
                let (pa, pb) = (vertices[a], vertices[b]);
                [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
            }
        };
        vertices.push(p);
        let m = vertices.len() - 1;
        midpoint.insert(k, m);
        m
    };

    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let mab = mid_of(a, b, &mut vertices);
        let mbc = mid_of(b, c, &mut vertices);
        let mca = mid_of(c, a, &mut vertices);
        triangles.push([a, mab, mca]);
        triangles.push([b, mbc, mab]);
        triangles.push([c, mca, mbc]);
        triangles.push([mab, mbc, mca]);
    }

    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let m = midpoint[&key(e.a, e.b)];
        let ta = normalize_angle(vertex_angle(mesh.vertices[e.a]));
        let tb = normalize_angle(vertex_angle(mesh.vertices[e.b]));
        boundary_edges.push(BoundaryEdge {
            a: e.a,
            b: m,
            mid_angle: normalize_angle(ta + 0.5 * ccw_gap(ta, e.mid_angle)),
        });
        boundary_edges.push(BoundaryEdge {
            a: m,
            b: e.b,
            mid_angle: normalize_angle(e.mid_angle + 0.5 * ccw_gap(e.mid_angle, tb)),
        });
    }

    TriMesh {
        vertices,
        triangles,
        boundary_edges,
        level: mesh.level + 1,
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Rebuilds a mesh from raw parts, enforcing the structural invariants a
/// line-by-line reader cannot see: counterclockwise triangles of positive
/// area, every undirected edge shared by exactly two triangles or listed
/// as boundary, and the boundary forming one closed counterclockwise
/// cycle on the unit circle. Arc midpoint angles are recomputed from the
/// endpoint angles.
pub fn mesh_from_parts(
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<[usize; 2]>,
    level: u32,
) -> Result<TriMesh> {
    let nv = vertices.len();
    if nv < 3 || triangles.is_empty() || boundary.len() < 3 {
        return Err(Error::Domain(
            "mesh needs at least 3 vertices, 1 triangle, and 3 boundary edges".into(),
        ));
    }
    for (i, p) in vertices.iter().enumerate() {
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        if !r.is_finite() || r > 1.0 + 1e-9 {
            return Err(Error::Domain(format!("vertex {i} lies outside the unit disk")));
        }
    }

    let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, &[a, b, c]) in triangles.iter().enumerate() {
        if a >= nv || b >= nv || c >= nv || a == b || b == c || a == c {
            return Err(Error::Domain(format!("triangle {t} has invalid vertex indices")));
        }
        let (pa, pb, pc) = (vertices[a], vertices[b], vertices[c]);
        let double = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
        if !(double > 0.0) {
            return Err(Error::Domain(format!(
                "triangle {t} is not counterclockwise with positive area"
            )));
        }
        for (i, j) in [(a, b), (b, c), (c, a)] {
            *edge_count.entry(key(i, j)).or_insert(0) += 1;
        }
    }

    let mut seen_start = vec![false; nv];
    for (k, &[a, b]) in boundary.iter().enumerate() {
        if a >= nv || b >= nv || a == b {
            return Err(Error::Domain(format!("boundary edge {k} has invalid vertex indices")));
        }
        if seen_start[a] {
            return Err(Error::Domain(format!(
                "boundary cycle visits vertex {a} twice"
            )));
        }
        seen_start[a] = true;
        let next = boundary[(k + 1) % boundary.len()][0];
        if b != next {
            return Err(Error::Domain(format!(
                "boundary edges do not chain into a cycle at edge {k}"
            )));
        }
        if edge_count.get(&key(a, b)) != Some(&1) {
            return Err(Error::Domain(format!(
                "boundary edge {k} is not the edge of exactly one triangle"
            )));
        }
        for v in [a, b] {
            let p = vertices[v];
            if ((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "boundary vertex {v} does not sit on the unit circle"
                )));
            }
        }
    }
    let boundary_set: std::collections::HashSet<(usize, usize)> =
        boundary.iter().map(|&[a, b]| key(a, b)).collect();
    let interior_bad = edge_count
        .iter()
        .any(|(e, n)| *n > 2 || (*n == 1 && !boundary_set.contains(e)));
    if interior_bad {
        return Err(Error::Domain(
            "triangulation is not conforming: an edge is shared by the wrong number of triangles"
                .into(),
        ));
    }

    let mut turned = 0.0;
    let boundary_edges: Vec<BoundaryEdge> = boundary
        .iter()
        .map(|&[a, b]| {
            let ta = normalize_angle(vertex_angle(vertices[a]));
            let tb = normalize_angle(vertex_angle(vertices[b]));
            let gap = ccw_gap(ta, tb);
            turned += gap;
            BoundaryEdge {
                a,
                b,
                mid_angle: normalize_angle(ta + 0.5 * gap),
            }
        })
        .collect();
    if (turned - TAU).abs() > 1e-6 {
        return Err(Error::Domain(
            "boundary cycle does not wind once counterclockwise".into(),
        ));
    }

    Ok(TriMesh {
        vertices,
        triangles,
        boundary_edges,
        level,
    })
}

fn vertex_angle(p: [f64; 2]) -> f64 {
    p[1].atan2(p[0])
}

impl TriMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edge count of the triangulation, via 2E = 3T + B.
    pub fn n_edges(&self) -> usize {
        (3 * self.triangles.len() + self.boundary_edges.len()) / 2
    }

    /// Twice the signed area of triangle `t`; positive for counterclockwise triples.
    pub fn double_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0])
    }

    pub fn area(&self, t: usize) -> f64 {
        0.5 * self.double_area(t)
    }

    /// Total polygon area, a lower bound for pi that tightens as O(h^2).
    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    pub fn centroid(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    /// Longest edge in the mesh; halves (up to boundary curvature) per refinement.
    pub fn max_edge_len(&self) -> f64 {
        let mut h: f64 = 0.0;
        for &[a, b, c] in &self.triangles {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                h = h.max(dist(self.vertices[i], self.vertices[j]));
            }
        }
        h
    }

    /// True at indices of vertices that lie on the boundary cycle.
    pub fn boundary_vertex_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.n_vertices()];
        for e in &self.boundary_edges {
            mask[e.a] = true;
            mask[e.b] = true;
        }
        mask
    }

    /// Boundary vertex indices in counterclockwise cycle order.
    pub fn boundary_cycle(&self) -> Vec<usize> {
        self.boundary_edges.iter().map(|e| e.a).collect()
    }

    /// For each boundary edge, the index of its unique adjacent triangle.
    pub fn boundary_edge_triangles(&self) -> Vec<usize> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            for (i, j) in [(a, b), (b, c), (c, a)] {
                owner.insert(key(i, j), t);
            }
        }
        self.boundary_edges
            .iter()
            .map(|e| owner[&key(e.a, e.b)])
            .collect()
    }

    /// Gradients of the three nodal hat functions on triangle `t`.
    /// Each hat is affine, equal to one at its own vertex and zero at the
    /// other two, so its gradient is the opposite edge rotated a quarter
    /// turn and scaled by twice the area.
    pub fn grad_basis(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let d = self.double_area(t);
        [
            [(pb[1] - pc[1]) / d, (pc[0] - pb[0]) / d],
            [(pc[1] - pa[1]) / d, (pa[0] - pc[0]) / d],
            [(pa[1] - pb[1]) / d, (pb[0] - pa[0]) / d],
        ]
    }
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

/// Chord midpoint frame of one boundary edge.
#[derive(Debug, Clone, Copy)]
pub struct EdgeFrame {
    pub midpoint: [f64; 2],
    /// Outward unit normal, the radial direction at the chord midpoint.
    pub normal: [f64; 2],
    /// Counterclockwise unit tangent, `normal` rotated a quarter turn.
    pub tangent: [f64; 2],
    /// Chord length; summing these gives the polygon perimeter, below 2 pi.
    pub length: f64,
}

/// Frames for every boundary edge, parallel to `mesh.boundary_edges`.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    pub edges: Vec<EdgeFrame>,
}

pub fn boundary_geometry(mesh: &TriMesh) -> BoundaryGeometry {
    let edges = mesh
        .boundary_edges
        .iter()
        .map(|e| {
            let (pa, pb) = (mesh.vertices[e.a], mesh.vertices[e.b]);
            let m = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
            let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
            let normal = [m[0] / r, m[1] / r];
            EdgeFrame {
                midpoint: m,
                normal,
                tangent: [-normal[1], normal[0]],
                length: dist(pa, pb),
            }
        })
        .collect();
    BoundaryGeometry { edges }
}

impl BoundaryGeometry {
    pub fn perimeter(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }
}

/// Bin-grid point locator for barycentric queries against a fixed mesh.
pub struct PointLocator<'a> {
    mesh: &'a TriMesh,
    bins: Vec<Vec<u32>>,
    n: usize,
    min: f64,
    cell: f64,
}

impl<'a> PointLocator<'a> {
    pub fn new(mesh: &'a TriMesh) -> Self {
        let n = ((mesh.n_triangles() as f64).sqrt().ceil() as usize).clamp(4, 512);
        let min = -1.001;
        let cell = 2.002 / n as f64;
        let mut bins = vec![Vec::new(); n * n];
        for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
            let xs = [mesh.vertices[a][0], mesh.vertices[b][0], mesh.vertices[c][0]];
            let ys = [mesh.vertices[a][1], mesh.vertices[b][1], mesh.vertices[c][1]];
            let clamp = |v: f64| (((v - min) / cell) as isize).clamp(0, n as isize - 1) as usize;
            let (i0, i1) = (clamp(xs.iter().cloned().fold(f64::MAX, f64::min)),
                            clamp(xs.iter().cloned().fold(f64::MIN, f64::max)));
            let (j0, j1) = (clamp(ys.iter().cloned().fold(f64::MAX, f64::min)),
                            clamp(ys.iter().cloned().fold(f64::MIN, f64::max)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * n + i].push(t as u32);
                }
            }
        }
        PointLocator { mesh, bins, n, min, cell }
    }

    /// Containing triangle and barycentric coordinates of `p`, if any.
    /// Points outside the inscribed polygon (including circle points between
    /// polygon vertices) return `None`.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let i = ((p[0] - self.min) / self.cell) as isize;
        let j = ((p[1] - self.min) / self.cell) as isize;
        if i < 0 || j < 0 || i >= self.n as isize || j >= self.n as isize {
            return None;
        }
        let tol = -1e-12;
        for &t in &self.bins[j as usize * self.n + i as usize] {
            let t = t as usize;
            let [a, b, c] = self.mesh.triangles[t];
            let (pa, pb, pc) = (
                self.mesh.vertices[a],
                self.mesh.vertices[b],
                self.mesh.vertices[c],
            );
            let d = self.mesh.double_area(t);
            let la = ((pb[0] - p[0]) * (pc[1] - p[1]) - (pb[1] - p[1]) * (pc[0] - p[0])) / d;
            let lb = ((pc[0] - p[0]) * (pa[1] - p[1]) - (pc[1] - p[1]) * (pa[0] - p[0])) / d;
            let lc = 1.0 - la - lb;
            if la >= tol && lb >= tol && lc >= tol {
                return Some((t, [la.max(0.0), lb.max(0.0), lc.max(0.0)]));
            }
        }
        None
    }
}
