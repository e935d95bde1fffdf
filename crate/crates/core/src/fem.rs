//! P1 finite element operators on disk meshes.
//!
//! Conventions. A right-hand side is always a dual vector: entry `i` holds
//! the pairing of the source with the hat function of vertex `i`.
//! `solve_dirichlet` solves `-lap w = f` with a pinned boundary trace;
//! `solve_neumann` solves `-lap w = f` with prescribed conormal flux and a
//! mean-zero normalization, assembling `rhs + boundary_dual(flux)` and
//! rejecting data whose total defect is out of scale. `weak_divergence`
//! pairs a cell field against hat gradients with no boundary term of its
//! own; when the field's normal trace matters, callers fold it in through
//! the flux argument.
//!
//! The Neumann kernel (constants) is handled without a Lagrange multiplier:
//! residual incompatibility is projected onto constants, the CG operator is
//! corrected by a rank-one term in the lumped-mass direction, and the
//! returned field gets an exact mean subtraction. The system stays symmetric
//! positive definite.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{dot, perp, CellScalarField, CellVectorField, ScalarField};
use crate::mesh::{boundary_geometry, BoundaryGeometry, TriMesh};
use crate::sparse::{self, CsrMatrix};
use crate::tol;

/// Stiffness matrix with an optional positive cell coefficient:
/// `K[i][j] = sum_T coeff_T grad(phi_i) . grad(phi_j) |T|`.
pub fn assemble_stiffness(mesh: &TriMesh, coeff: Option<&[f64]>) -> Result<CsrMatrix> {
    if let Some(c) = coeff {
        if c.len() != mesh.n_triangles() {
            return Err(Error::Shape {
                what: "stiffness coefficient",
                expected: mesh.n_triangles(),
                got: c.len(),
            });
        }
        if let Some(bad) = c.iter().find(|v| !v.is_finite() || **v <= 0.0) {
            return Err(Error::Domain(format!(
                "stiffness coefficient must be positive and finite, got {bad}"
            )));
        }
    }
    let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let verts = mesh.triangles[t];
        let g = mesh.grad_basis(t);
        let w = mesh.area(t) * coeff.map_or(1.0, |c| c[t]);
        for i in 0..3 {
            for j in 0..3 {
                trip.push((verts[i], verts[j], w * dot(g[i], g[j])));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_vertices(), &trip))
}

/// Nonsymmetric system of the drift form:
/// `N[i][j] = int grad(phi_j) . grad(phi_i) - int (b . grad(phi_j)) phi_i`.
pub fn assemble_drift(mesh: &TriMesh, b: &CellVectorField) -> CsrMatrix {
    let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let verts = mesh.triangles[t];
        let g = mesh.grad_basis(t);
        let area = mesh.area(t);
        for j in 0..3 {
            let conv = dot(b.values[t], g[j]) * area / 3.0;
            for i in 0..3 {
                trip.push((verts[i], verts[j], area * dot(g[i], g[j]) - conv));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.n_vertices(), &trip)
}

/// System of the conservation form with nodal coefficients `a` and `bb`:
/// `S[i][j] = int a grad(phi_j) . grad(phi_i) - int bb perp(grad(phi_j)) . grad(phi_i)`.
/// Both coefficients are averaged per cell; the rotation term is then exactly
/// skew-symmetric, so a constant `bb` cannot influence interior rows.
pub fn assemble_conservation(
    mesh: &TriMesh,
    a: &ScalarField,
    bb: &ScalarField,
) -> Result<CsrMatrix> {
    let a_cell = a.cell_average();
    let bb_cell = bb.cell_average();
    let mut trip = Vec::with_capacity(9 * mesh.n_triangles());
    for t in 0..mesh.n_triangles() {
        let at = a_cell.values[t];
        if !(at.is_finite() && at > 0.0) {
            return Err(Error::Domain(format!(
                "conservation coefficient must stay positive, cell {t} has {at}"
            )));
        }
        let bt = bb_cell.values[t];
        let verts = mesh.triangles[t];
        let g = mesh.grad_basis(t);
        let area = mesh.area(t);
        for j in 0..3 {
            for i in 0..3 {
                let v = area * (at * dot(g[i], g[j]) - bt * dot(perp(g[j]), g[i]));
                trip.push((verts[i], verts[j], v));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_vertices(), &trip))
}

/// Dual vector of the P1 interpolant of `f`, exact for the interpolant.
pub fn load_vector(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let nodal: Vec<f64> = mesh.vertices.iter().map(|&[x, y]| f(x, y)).collect();
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, &[a, b, c]) in mesh.triangles.iter().enumerate() {
        let w = mesh.area(t) / 12.0;
        out[a] += w * (2.0 * nodal[a] + nodal[b] + nodal[c]);
        out[b] += w * (nodal[a] + 2.0 * nodal[b] + nodal[c]);
        out[c] += w * (nodal[a] + nodal[b] + 2.0 * nodal[c]);
    }
    out
}

/// Dual vector of a cell scalar: `int c phi_i = sum_T c_T |T| / 3`.
pub fn dual_from_cells(c: &CellScalarField) -> Vec<f64> {
    let mesh = &c.mesh;
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, &verts) in mesh.triangles.iter().enumerate() {
        let w = c.values[t] * mesh.area(t) / 3.0;
        for v in verts {
            out[v] += w;
        }
    }
    out
}

/// Weak divergence of a cell field: `L[i] = -sum_T g_T . grad(phi_i) |T|`.
/// Pure integration by parts; the entries sum to zero exactly because hat
/// functions partition unity.
pub fn weak_divergence(g: &CellVectorField) -> Vec<f64> {
    let mesh = &g.mesh;
    let mut out = vec![0.0; mesh.n_vertices()];
    for (t, &verts) in mesh.triangles.iter().enumerate() {
        let basis = mesh.grad_basis(t);
        let area = mesh.area(t);
        for i in 0..3 {
            out[verts[i]] -= dot(g.values[t], basis[i]) * area;
        }
    }
    out
}

/// Pairing of per-edge boundary data with hat functions: each edge sends
/// half its value-times-length to both endpoints.
pub fn boundary_dual(mesh: &TriMesh, geom: &BoundaryGeometry, edge_values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for ((e, frame), v) in mesh.boundary_edges.iter().zip(&geom.edges).zip(edge_values) {
        let half = 0.5 * v * frame.length;
        out[e.a] += half;
        out[e.b] += half;
    }
    out
}

/// Integral of per-edge data over the polygon boundary.
pub fn boundary_integral(geom: &BoundaryGeometry, edge_values: &[f64]) -> f64 {
    geom.edges
        .iter()
        .zip(edge_values)
        .map(|(f, v)| f.length * v)
        .sum()
}

/// Full-length vector holding `f` at boundary vertices and zero elsewhere.
pub fn boundary_values(mesh: &TriMesh, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_vertices()];
    for (i, on) in mesh.boundary_vertex_mask().iter().enumerate() {
        if *on {
            out[i] = f(mesh.vertices[i][0], mesh.vertices[i][1]);
        }
    }
    out
}

/// Exact integrals of the hat functions; doubles as the row-sum mass vector.
pub fn lumped_mass(mesh: &TriMesh) -> Vec<f64> {
    let mut v = vec![0.0; mesh.n_vertices()];
    for (t, &verts) in mesh.triangles.iter().enumerate() {
        let w = mesh.area(t) / 3.0;
        for i in verts {
            v[i] += w;
        }
    }
    v
}

/// Solves `-lap w = f` with trace `g` (read at boundary vertices of `g`).
pub fn solve_dirichlet(mesh: &Arc<TriMesh>, rhs: &[f64], g: &[f64]) -> Result<ScalarField> {
    let mut k = assemble_stiffness(mesh, None)?;
    let mut b = rhs.to_vec();
    k.constrain(&mesh.boundary_vertex_mask(), g, &mut b);
    let (x, _) = sparse::solve_spd(&k, &b, None)?;
    ScalarField::new(mesh.clone(), x)
}

/// Mean-zero Neumann solution together with its compatibility defect.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub field: ScalarField,
    /// Total of `rhs + boundary_dual(flux)` that was projected away.
    pub defect: f64,
}

/// Solves `-lap w = f` with conormal flux data (one value per boundary edge)
/// and zero mean. Rejects data whose compatibility defect is out of scale;
/// the in-scale remainder is projected onto constants before solving.
pub fn solve_neumann(mesh: &Arc<TriMesh>, rhs: &[f64], flux: &[f64]) -> Result<NeumannSolution> {
    if flux.len() != mesh.boundary_edges.len() {
        return Err(Error::Shape {
            what: "boundary flux",
            expected: mesh.boundary_edges.len(),
            got: flux.len(),
        });
    }
    let geom = boundary_geometry(mesh);
    let mut total = rhs.to_vec();
    for (i, v) in boundary_dual(mesh, &geom, flux).into_iter().enumerate() {
        total[i] += v;
    }
    let defect: f64 = total.iter().sum();
    let scale = rhs.iter().map(|v| v.abs()).sum::<f64>()
        + geom
            .edges
            .iter()
            .zip(flux)
            .map(|(f, v)| (f.length * v).abs())
            .sum::<f64>();
    if defect.abs() > tol::COMPAT_REL * scale && scale > tol::NEUMANN_SCALE_FLOOR {
        return Err(Error::Incompatible {
            defect,
            scale,
        });
    }

    let mass = lumped_mass(mesh);
    let mass_total: f64 = mass.iter().sum();
    for (t, m) in total.iter_mut().zip(&mass) {
        *t -= defect * m / mass_total;
    }

    let k = assemble_stiffness(mesh, None)?;
    let unit: Vec<f64> = {
        let n = sparse::norm2(&mass);
        mass.iter().map(|m| m / n).collect()
    };
    let diag_k = k.diag();
    let sigma = diag_k.iter().sum::<f64>() / diag_k.len() as f64;
    let apply = |x: &[f64], y: &mut [f64]| {
        k.matvec_into(x, y);
        let s = sigma * sparse::dot(&unit, x);
        for (yi, ui) in y.iter_mut().zip(&unit) {
            *yi += s * ui;
        }
    };
    let diag: Vec<f64> = diag_k
        .iter()
        .zip(&unit)
        .map(|(d, u)| d + sigma * u * u)
        .collect();
    let (mut x, _) = sparse::cg(
        apply,
        &diag,
        &total,
        None,
        tol::KRYLOV_RTOL,
        tol::krylov_max_iter(mesh.n_vertices()),
    )?;

    let mean = sparse::dot(&mass, &x) / mass_total;
    for v in &mut x {
        *v -= mean;
    }
    Ok(NeumannSolution {
        field: ScalarField::new(mesh.clone(), x)?,
        defect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_disk_mesh;

    fn mesh(level: u32) -> Arc<TriMesh> {
        Arc::new(build_disk_mesh(level).unwrap())
    }

    fn interior(mesh: &TriMesh) -> Vec<usize> {
        mesh.boundary_vertex_mask()
            .iter()
            .enumerate()
            .filter(|(_, on)| !**on)
            .map(|(i, _)| i)
            .collect()
    }

    #[test]
    fn stiffness_is_symmetric_with_zero_row_sums() {
        let m = mesh(2);
        let k = assemble_stiffness(&m, None).unwrap();
        assert!(k.max_abs_asymmetry() < 1e-14);
        let ones = vec![1.0; m.n_vertices()];
        for (i, v) in k.matvec(&ones).iter().enumerate() {
            assert!(v.abs() < 1e-13, "row {i} sums to {v}, constants must be in the kernel");
        }
    }

    #[test]
    fn stiffness_scales_linearly_in_the_coefficient() {
        let m = mesh(2);
        let k1 = assemble_stiffness(&m, None).unwrap();
        let coeff = vec![2.0; m.n_triangles()];
        let k2 = assemble_stiffness(&m, Some(&coeff)).unwrap();
        for (a, b) in k1.val.iter().zip(&k2.val) {
            assert!((2.0 * a - b).abs() <= 1e-15 * b.abs().max(1.0));
        }
    }

    #[test]
    fn nonpositive_coefficient_is_rejected() {
        let m = mesh(1);
        let mut coeff = vec![1.0; m.n_triangles()];
        coeff[3] = 0.0;
        assert!(assemble_stiffness(&m, Some(&coeff)).is_err());
        coeff[3] = -2.0;
        assert!(assemble_stiffness(&m, Some(&coeff)).is_err());
    }

    #[test]
    fn weak_divergence_of_constant_field_vanishes_inside() {
        let m = mesh(3);
        let g = CellVectorField::sample(&m, |_, _| [0.3, -1.7]);
        let l = weak_divergence(&g);
        for i in interior(&m) {
            assert!(l[i].abs() < 1e-14, "interior entry {i} is {}", l[i]);
        }
    }

    #[test]
    fn weak_divergence_of_rotated_gradient_vanishes_inside() {
        let m = mesh(3);
        let g = ScalarField::sample(&m, |x, y| (x - 0.2) * y + x * x).gradient().perp();
        let l = weak_divergence(&g);
        for i in interior(&m) {
            assert!(l[i].abs() < 1e-13, "interior entry {i} is {}", l[i]);
        }
    }

    #[test]
    fn weak_divergence_entries_sum_to_zero() {
        let m = mesh(3);
        let g = ScalarField::sample(&m, |x, y| x * x + y * y).gradient();
        let total: f64 = weak_divergence(&g).iter().sum();
        assert!(total.abs() < 1e-13, "partition of unity forces a zero total, got {total}");
    }

    #[test]
    fn weak_divergence_matches_independent_assembly() {
        // Oracle: recompute hat gradients per triangle by solving the 3x3
        // affine interpolation system instead of the edge-rotation formula.
        let m = mesh(2);
        let g = ScalarField::sample(&m, |x, y| x * x + y * y).gradient();
        let l = weak_divergence(&g);
        let mut oracle = vec![0.0; m.n_vertices()];
        for (t, &[a, b, c]) in m.triangles.iter().enumerate() {
            let ps = [m.vertices[a], m.vertices[b], m.vertices[c]];
            for (slot, vid) in [a, b, c].into_iter().enumerate() {
                // Solve for the affine function with value 1 at `slot`, 0 elsewhere.
                let rhs = [0.0, 0.0, 0.0].map(|_| 0.0);
                let mut rhs = rhs;
                rhs[slot] = 1.0;
                // Cramer on [x y 1] coefficients.
                let det = ps[0][0] * (ps[1][1] - ps[2][1])
                    + ps[1][0] * (ps[2][1] - ps[0][1])
                    + ps[2][0] * (ps[0][1] - ps[1][1]);
                let gx = (rhs[0] * (ps[1][1] - ps[2][1])
                    + rhs[1] * (ps[2][1] - ps[0][1])
                    + rhs[2] * (ps[0][1] - ps[1][1]))
                    / det;
                let gy = (rhs[0] * (ps[2][0] - ps[1][0])
                    + rhs[1] * (ps[0][0] - ps[2][0])
                    + rhs[2] * (ps[1][0] - ps[0][0]))
                    / det;
                oracle[vid] -= (g.values[t][0] * gx + g.values[t][1] * gy) * m.area(t);
            }
        }
        for (a, b) in l.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12, "{a} vs oracle {b}");
        }
    }

    #[test]
    fn poisson_parabola_is_second_order_accurate_at_nodes() {
        let m = mesh(4);
        let rhs = load_vector(&m, |_, _| 4.0);
        let w = solve_dirichlet(&m, &rhs, &vec![0.0; m.n_vertices()]).unwrap();
        let exact = ScalarField::sample(&m, |x, y| 1.0 - x * x - y * y);
        let err = w.minus(&exact).linf_norm();
        assert!(err < 0.02, "level 4 nodal error {err}");
        assert!((w.values[0] - 1.0).abs() < 0.02, "center value {}", w.values[0]);
    }

    #[test]
    fn harmonic_linear_function_is_reproduced() {
        let m = mesh(3);
        let g = boundary_values(&m, |x, _| x);
        let w = solve_dirichlet(&m, &vec![0.0; m.n_vertices()], &g).unwrap();
        let exact = ScalarField::sample(&m, |x, _| x);
        let err = w.minus(&exact).linf_norm();
        assert!(err < 1e-9, "P1 contains linears, error {err} should be solver-level");
    }

    #[test]
    fn neumann_cosine_flux_recovers_coordinate_function() {
        let m = mesh(3);
        let geom = boundary_geometry(&m);
        let flux: Vec<f64> = geom.edges.iter().map(|f| f.normal[0]).collect();
        let sol = solve_neumann(&m, &vec![0.0; m.n_vertices()], &flux).unwrap();
        let exact = ScalarField::sample(&m, |x, _| x);
        let err = sol.field.minus(&exact).l2_norm();
        assert!(err < 5e-3, "level 3 error {err}");
        let mean = sparse::dot(&lumped_mass(&m), &sol.field.values);
        assert!(mean.abs() < tol::MEAN_ZERO_ABS, "mean {mean}");
    }

    #[test]
    fn incompatible_flux_is_rejected() {
        let m = mesh(2);
        let flux = vec![1.0; m.boundary_edges.len()];
        let err = solve_neumann(&m, &vec![0.0; m.n_vertices()], &flux).unwrap_err();
        assert!(matches!(err, Error::Incompatible { .. }));
    }

    #[test]
    fn zero_neumann_data_gives_zero_field() {
        let m = mesh(2);
        let sol = solve_neumann(&m, &vec![0.0; m.n_vertices()], &vec![0.0; m.boundary_edges.len()])
            .unwrap();
        assert_eq!(sol.defect, 0.0);
        assert!(sol.field.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn solves_are_linear_in_the_data() {
        let m = mesh(3);
        let r1 = load_vector(&m, |x, y| x + 0.3 * y * y);
        let r2 = load_vector(&m, |x, y| (3.0 * x).sin() - y);
        let combo: Vec<f64> = r1.iter().zip(&r2).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let zero_g = vec![0.0; m.n_vertices()];
        let s1 = solve_dirichlet(&m, &r1, &zero_g).unwrap();
        let s2 = solve_dirichlet(&m, &r2, &zero_g).unwrap();
        let sc = solve_dirichlet(&m, &combo, &zero_g).unwrap();
        let recombined = s1.zip(&s2, |a, b| 2.0 * a - 0.5 * b);
        let err = sc.minus(&recombined).linf_norm() / sc.linf_norm();
        assert!(err < 1e-7, "relative nonlinearity {err}");
    }

    #[test]
    fn boundary_integral_of_one_is_the_perimeter() {
        let m = mesh(3);
        let geom = boundary_geometry(&m);
        let ones = vec![1.0; m.boundary_edges.len()];
        assert_eq!(boundary_integral(&geom, &ones), geom.perimeter());
    }

    #[test]
    fn lumped_mass_totals_the_polygon_area() {
        let m = mesh(3);
        let total: f64 = lumped_mass(&m).iter().sum();
        assert!((total - m.total_area()).abs() < 1e-13);
    }

    #[test]
    fn manufactured_solution_converges_at_expected_orders() {
        // -lap u = 8x with zero trace has u = (1 - r^2) x.
        let exact = |x: f64, y: f64| (1.0 - x * x - y * y) * x;
        let grad = |x: f64, y: f64| [1.0 - 3.0 * x * x - y * y, -2.0 * x * y];
        let mut l2 = Vec::new();
        let mut h1 = Vec::new();
        for level in 3..=5 {
            let m = mesh(level);
            let rhs = load_vector(&m, |x, _| 8.0 * x);
            let u = solve_dirichlet(&m, &rhs, &vec![0.0; m.n_vertices()]).unwrap();
            // Midpoint-rule error integrals, exact to the orders probed here.
            let (mut e2, mut eh) = (0.0, 0.0);
            for (t, &[a, b, c]) in m.triangles.iter().enumerate() {
                let ps = [m.vertices[a], m.vertices[b], m.vertices[c]];
                let us = [u.values[a], u.values[b], u.values[c]];
                let gu = u.gradient().values[t];
                let w = m.area(t) / 3.0;
                for (i, j) in [(0, 1), (1, 2), (2, 0)] {
                    let mid = [(ps[i][0] + ps[j][0]) / 2.0, (ps[i][1] + ps[j][1]) / 2.0];
                    let uh = (us[i] + us[j]) / 2.0;
                    e2 += w * (uh - exact(mid[0], mid[1])).powi(2);
                    let ge = grad(mid[0], mid[1]);
                    eh += w * ((gu[0] - ge[0]).powi(2) + (gu[1] - ge[1]).powi(2));
                }
            }
            l2.push(e2.sqrt());
            h1.push(eh.sqrt());
        }
        println!("level   l2_error      ratio   h1_error      ratio");
        for i in 0..3 {
            let rl = if i > 0 { l2[i - 1] / l2[i] } else { f64::NAN };
            let rh = if i > 0 { h1[i - 1] / h1[i] } else { f64::NAN };
            println!("{:>5}   {:<11.4e}  {:<6.3}  {:<11.4e}  {:<6.3}", i + 3, l2[i], rl, h1[i], rh);
        }
        for i in 1..3 {
            let rl = l2[i - 1] / l2[i];
            let rh = h1[i - 1] / h1[i];
            assert!((3.5..=4.5).contains(&rl), "L2 ratio {rl} off second order");
            assert!((1.8..=2.2).contains(&rh), "H1 ratio {rh} off first order");
        }
    }
}
