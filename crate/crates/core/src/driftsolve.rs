//! Boundary value solvers for the drift equation and its conservation
//! form, plus the ball-to-disk rescaling used to localize problems.
//!
//! `solve_drift` treats `Δu + b·∇u = f` directly through a nonsymmetric
//! system. `solve_conservation` solves `div(A∇u − B∇⊥u) = A·f`, which is
//! the same equation after a factorization `Ab = ∇A + ∇⊥B`; its matrix
//! has a symmetric positive part and an exactly skew rotation part, so it
//! stays solvable where a large drift could stall the direct form.
//!
//! In both solvers `f` is a dual vector (a source paired against hat
//! functions) and the equation is homogeneous when `f` is absent; the
//! source only exists so convergence-order tests have a manufactured
//! right-hand side to converge to.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem;
use crate::field::{dot, CellVectorField, ScalarField};
use crate::mesh::{PointLocator, TriMesh};
use crate::sparse;

/// One boundary value problem for the drift equation.
#[derive(Debug, Clone)]
pub struct DriftProblem {
    pub mesh: Arc<TriMesh>,
    pub b: CellVectorField,
    /// Trace values, read at boundary vertices only.
    pub g: Vec<f64>,
    /// Optional source as a dual vector; `None` means homogeneous.
    pub f: Option<Vec<f64>>,
}

impl DriftProblem {
    pub fn new(
        mesh: Arc<TriMesh>,
        b: CellVectorField,
        g: Vec<f64>,
        f: Option<Vec<f64>>,
    ) -> Result<Self> {
        if !Arc::ptr_eq(&mesh, &b.mesh) && mesh.n_triangles() != b.mesh.n_triangles() {
            return Err(Error::Shape {
                what: "drift field mesh",
                expected: mesh.n_triangles(),
                got: b.mesh.n_triangles(),
            });
        }
        check_nodal(&mesh, &g, "boundary trace")?;
        if let Some(f) = &f {
            check_nodal(&mesh, f, "source dual")?;
        }
        Ok(DriftProblem { mesh, b, g, f })
    }
}

fn check_nodal(mesh: &TriMesh, v: &[f64], what: &'static str) -> Result<()> {
    if v.len() != mesh.n_vertices() {
        return Err(Error::Shape {
            what,
            expected: mesh.n_vertices(),
            got: v.len(),
        });
    }
    if !v.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite(what));
    }
    Ok(())
}

/// Solves `Δu + b·∇u = f` with trace `g` through the nonsymmetric weak
/// form. Stalls on wild drifts are reported as solver errors.
pub fn solve_drift(prob: &DriftProblem) -> Result<ScalarField> {
    let mesh = &prob.mesh;
    let mut system = fem::assemble_drift(mesh, &prob.b);
    let mut rhs = match &prob.f {
        Some(f) => f.iter().map(|v| -v).collect(),
        None => vec![0.0; mesh.n_vertices()],
    };
    system.constrain(&mesh.boundary_vertex_mask(), &prob.g, &mut rhs);
    let (x, _) = sparse::solve_general(&system, &rhs, None)?;
    ScalarField::new(mesh.clone(), x)
}

/// Solves `div(A∇u − B∇⊥u) = A·f` with trace `g`. The source is weighted
/// nodewise by `A`, matching the factorized form of the drift equation.
pub fn solve_conservation(
    a: &ScalarField,
    bb: &ScalarField,
    g: &[f64],
    f: Option<&[f64]>,
) -> Result<ScalarField> {
    let mesh = a.mesh.clone();
    if let Some(bad) = a.values.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Domain(format!(
            "conservation multiplier must be strictly positive, found {bad}"
        )));
    }
    check_nodal(&mesh, g, "boundary trace")?;
    let mut rhs = match f {
        Some(f) => {
            check_nodal(&mesh, f, "source dual")?;
            f.iter().zip(&a.values).map(|(v, av)| -v * av).collect()
        }
        None => vec![0.0; mesh.n_vertices()],
    };
    let mut system = fem::assemble_conservation(&mesh, a, bb)?;
    system.constrain(&mesh.boundary_vertex_mask(), g, &mut rhs);
    let (x, _) = sparse::solve_general(&system, &rhs, None)?;
    ScalarField::new(mesh.clone(), x)
}

/// Weighted Dirichlet energy `∫ A|∇v|²` with `A` averaged per cell.
pub fn weighted_energy(a: &ScalarField, v: &ScalarField) -> f64 {
    let mesh = &v.mesh;
    let a_cell = a.cell_average();
    let gv = v.gradient();
    (0..mesh.n_triangles())
        .map(|t| a_cell.values[t] * dot(gv.values[t], gv.values[t]) * mesh.area(t))
        .sum()
}

/// Solves the homogeneous conservation problem with zero trace from an
/// optional Krylov start and returns `∫ A|∇v|²` of the result. Zero is
/// the unique discrete solution, so the energy certifies uniqueness when
/// it lands at rounding level regardless of the start.
pub fn uniqueness_energy(
    a: &ScalarField,
    bb: &ScalarField,
    start: Option<&[f64]>,
) -> Result<f64> {
    let mesh = a.mesh.clone();
    let mut system = fem::assemble_conservation(&mesh, a, bb)?;
    let mut rhs = vec![0.0; mesh.n_vertices()];
    let zeros = vec![0.0; mesh.n_vertices()];
    system.constrain(&mesh.boundary_vertex_mask(), &zeros, &mut rhs);
    let (x, _) = sparse::solve_general(&system, &rhs, start)?;
    Ok(weighted_energy(a, &ScalarField::new(mesh, x)?))
}

pub(crate) fn check_ball(x0: [f64; 2], r: f64) -> Result<()> {
    let c = (x0[0] * x0[0] + x0[1] * x0[1]).sqrt();
    if !(r > 0.0) || !c.is_finite() || c + r > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "ball of radius {r} at ({}, {}) is not contained in the unit disk",
            x0[0], x0[1]
        )));
    }
    Ok(())
}

/// Evaluates at `q`, nudging toward the origin when `q` falls in the
/// sliver between the mesh polygon and the circle.
fn locate_inward(locator: &PointLocator, q: [f64; 2]) -> Option<(usize, [f64; 3])> {
    for shrink in [0.0, 1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 5e-3, 2e-2] {
        let s = 1.0 - shrink;
        if let Some(hit) = locator.locate([q[0] * s, q[1] * s]) {
            return Some(hit);
        }
    }
    None
}

/// Pulls `u` back from the ball `B_r(x0)` onto the standard disk:
/// the result interpolates `x ↦ u(x0 + r·x)`.
pub fn rescale_scalar(u: &ScalarField, x0: [f64; 2], r: f64) -> Result<ScalarField> {
    check_ball(x0, r)?;
    let mesh = &u.mesh;
    let locator = PointLocator::new(mesh);
    let values = mesh
        .vertices
        .iter()
        .map(|&[x, y]| {
            let q = [x0[0] + r * x, x0[1] + r * y];
            let (t, l) = locate_inward(&locator, q)
                .ok_or_else(|| Error::Domain(format!("sample ({}, {}) left the mesh", q[0], q[1])))?;
            let [a, b, c] = mesh.triangles[t];
            Ok(l[0] * u.values[a] + l[1] * u.values[b] + l[2] * u.values[c])
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(mesh.clone(), values)
}

/// Pulls the drift back from `B_r(x0)` onto the standard disk with the
/// scaling that preserves its L² norm: `x ↦ r·b(x0 + r·x)`.
pub fn rescale_drift(b: &CellVectorField, x0: [f64; 2], r: f64) -> Result<CellVectorField> {
    check_ball(x0, r)?;
    let mesh = &b.mesh;
    let locator = PointLocator::new(mesh);
    let values = (0..mesh.n_triangles())
        .map(|t| {
            let c = mesh.centroid(t);
            let q = [x0[0] + r * c[0], x0[1] + r * c[1]];
            let (src, _) = locate_inward(&locator, q)
                .ok_or_else(|| Error::Domain(format!("sample ({}, {}) left the mesh", q[0], q[1])))?;
            Ok([r * b.values[src][0], r * b.values[src][1]])
        })
        .collect::<Result<Vec<[f64; 2]>>>()?;
    CellVectorField::new(mesh.clone(), values)
}

/// L² norm of `b` over the cells whose centroid lies in `B_r(x0)`.
pub fn ball_l2_norm(b: &CellVectorField, x0: [f64; 2], r: f64) -> f64 {
    let mesh = &b.mesh;
    (0..mesh.n_triangles())
        .filter(|&t| {
            let c = mesh.centroid(t);
            let dx = c[0] - x0[0];
            let dy = c[1] - x0[1];
            dx * dx + dy * dy <= r * r
        })
        .map(|t| dot(b.values[t], b.values[t]) * mesh.area(t))
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}
