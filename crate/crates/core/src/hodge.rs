//! Splits a drift field into a divergence part and a rotation part, and
//! builds the exponential gauge that turns the drift equation into a
//! conservation law.
//!
//! For a cellwise-constant drift `b` on the disk we solve
//!
//! * `Δp = div b` with `p = 0` on the boundary, and
//! * `Δξ = curl b` with `∂ξ/∂ν = b·τ` on the boundary, `ξ` mean-zero,
//!
//! so that `b ≈ ∇⊥ξ − ∇p` with a defect that vanishes under refinement.
//! The gauge is `P = e^p`, interpolated nodewise; its reciprocal is
//! `e^{−p}` rather than a separate solve, so `P · P⁻¹ = 1` holds at
//! every vertex by construction.
//!
//! `curl b` of a cellwise field lives on edges. We pair the edge jumps of
//! the rotated field `b⊥ = (−b₂, b₁)` against the nodal hat functions,
//! which is the same sum as [`fem::weak_divergence`] applied to `b⊥`
//! minus the boundary dual of `b·τ`; since `b⊥·ν = −b·τ` on each
//! boundary edge, adding the tangential flux back in reproduces the
//! rotated weak divergence entry for entry. The Neumann compatibility
//! defect is therefore pure rounding noise, not a discretisation error.

use crate::error::Result;
use crate::fem;
use crate::field::{dot, CellVectorField, ScalarField};
use crate::mesh::boundary_geometry;

/// Energy and sup-norm diagnostics of a gauge.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct EnergyReport {
    /// `∫|∇ξ|² + ∫|∇P|² + ∫|∇P⁻¹|²` over the disk.
    pub dirichlet_energy: f64,
    /// `max |P|` over vertices.
    pub gauge_sup: f64,
    /// `max |P⁻¹|` over vertices.
    pub gauge_inv_sup: f64,
}

/// Output of [`hodge_decompose`].
#[derive(Debug, Clone)]
pub struct HodgeParts {
    /// Potential of the gradient part, zero on the boundary.
    pub p: ScalarField,
    /// Stream potential of the rotation part, mean zero.
    pub xi: ScalarField,
    /// Gauge `P = e^p` at the vertices.
    pub gauge: ScalarField,
    /// Reciprocal gauge `P⁻¹ = e^{−p}` at the vertices.
    pub gauge_inv: ScalarField,
    /// `‖b − ∇⊥ξ + ∇p‖_{L²}`, the defect of the split.
    pub residual_l2: f64,
    /// Energy diagnostics of the computed gauge.
    pub energy: EnergyReport,
}

/// Smallness verdict for a gauge against a threshold `ε`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SmallnessReport {
    pub energy: EnergyReport,
    pub epsilon: f64,
    /// Dirichlet energy below `ε`.
    pub energy_ok: bool,
    /// `‖P‖_∞ ≤ 1 + ε`.
    pub sup_ok: bool,
    /// Both `‖P‖_∞` and `‖P⁻¹‖_∞` inside the admissible band.
    pub band_ok: bool,
    /// All three checks together.
    pub passed: bool,
}

/// Tangential component of the adjacent-cell value of `b` on each
/// boundary edge, in boundary-edge order.
pub fn tangential_trace(b: &CellVectorField) -> Vec<f64> {
    let mesh = &b.mesh;
    let frames = boundary_geometry(mesh);
    mesh.boundary_edge_triangles()
        .iter()
        .zip(&frames.edges)
        .map(|(&t, frame)| dot(b.values[t], frame.tangent))
        .collect()
}

/// Normal component of the adjacent-cell value of `b` on each boundary
/// edge, in boundary-edge order.
pub fn normal_trace(b: &CellVectorField) -> Vec<f64> {
    let mesh = &b.mesh;
    let frames = boundary_geometry(mesh);
    mesh.boundary_edge_triangles()
        .iter()
        .zip(&frames.edges)
        .map(|(&t, frame)| dot(b.values[t], frame.normal))
        .collect()
}

/// Dual vector of `curl b` paired against the nodal hat functions,
/// counting interior edge jumps only.
pub fn weak_curl(b: &CellVectorField) -> Vec<f64> {
    let rotated = fem::weak_divergence(&b.perp());
    let geom = boundary_geometry(&b.mesh);
    let boundary = fem::boundary_dual(&b.mesh, &geom, &tangential_trace(b));
    rotated
        .iter()
        .zip(&boundary)
        .map(|(r, d)| r - d)
        .collect()
}

/// Splits `b` into `∇⊥ξ − ∇p` and exponentiates the Dirichlet part.
pub fn hodge_decompose(b: &CellVectorField) -> Result<HodgeParts> {
    let mesh = b.mesh.clone();

    let div_dual = fem::weak_divergence(b);
    let zero_trace = vec![0.0; mesh.n_vertices()];
    let p = fem::solve_dirichlet(&mesh, &div_dual, &zero_trace)?;

    let trace = tangential_trace(b);
    let xi = fem::solve_neumann(&mesh, &weak_curl(b), &trace)?.field;

    let gauge = p.map(f64::exp);
    let gauge_inv = p.map(|v| (-v).exp());

    let defect = b
        .minus(&xi.gradient().perp())
        .plus(&p.gradient());
    let residual_l2 = defect.l2_norm();

    let energy = EnergyReport {
        dirichlet_energy: xi.h1_seminorm().powi(2)
            + gauge.h1_seminorm().powi(2)
            + gauge_inv.h1_seminorm().powi(2),
        gauge_sup: gauge.linf_norm(),
        gauge_inv_sup: gauge_inv.linf_norm(),
    };

    Ok(HodgeParts {
        p,
        xi,
        gauge,
        gauge_inv,
        residual_l2,
        energy,
    })
}

/// Checks the computed gauge against the smallness threshold `epsilon`
/// and the admissible sup-norm band.
pub fn smallness_report(parts: &HodgeParts, epsilon: f64) -> SmallnessReport {
    let energy = parts.energy;
    let (lo, hi) = crate::tol::GAUGE_BAND;
    let energy_ok = energy.dirichlet_energy < epsilon;
    let sup_ok = energy.gauge_sup <= 1.0 + epsilon;
    let band_ok = energy.gauge_sup >= lo
        && energy.gauge_sup <= hi
        && energy.gauge_inv_sup >= lo
        && energy.gauge_inv_sup <= hi;
    SmallnessReport {
        energy,
        epsilon,
        energy_ok,
        sup_ok,
        band_ok,
        passed: energy_ok && sup_ok && band_ok,
    }
}
