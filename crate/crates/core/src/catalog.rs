//! Catalog of drift fields.
//!
//! Every experiment starts from a [`DriftSpec`]: a named field family with
//! its parameters, plus an optional amplitude normalization. The catalog
//! covers the regimes the solvers care about: exactly divergence-free
//! swirls, concentrating sinks whose divergence obstructs regularity,
//! Jacobian products `h∇⊥v`, and rotated gradients of a stream potential.
//! Kinds built from closed-form expressions also expose their pointwise
//! divergence and curl, so discretization error can be measured against
//! an exact target instead of another discrete quantity.

use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{CellVectorField, ScalarField};
use crate::io::{read_field, LoadedField};
use crate::mesh::TriMesh;

/// Closed-form scalar used as an ingredient of the composite drift kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "f", rename_all = "snake_case")]
pub enum FieldSpec {
    /// `x·y`.
    Xy,
    /// `ax·x + ay·y`.
    Linear { ax: f64, ay: f64 },
    /// `xx·x² + xy·x·y + yy·y²`.
    Quadratic { xx: f64, xy: f64, yy: f64 },
    /// `r^power` with `power > 0`.
    Radial { power: f64 },
    /// `exp(−((x−cx)² + (y−cy)²) / (2·sigma²))`.
    Bump { cx: f64, cy: f64, sigma: f64 },
    /// `sin(kx·x)·cos(ky·y)`.
    Trig { kx: f64, ky: f64 },
}

impl FieldSpec {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            FieldSpec::Xy => x * y,
            FieldSpec::Linear { ax, ay } => ax * x + ay * y,
            FieldSpec::Quadratic { xx, xy, yy } => xx * x * x + xy * x * y + yy * y * y,
            FieldSpec::Radial { power } => (x * x + y * y).powf(power / 2.0),
            FieldSpec::Bump { cx, cy, sigma } => {
                let dx = x - cx;
                let dy = y - cy;
                (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            }
            FieldSpec::Trig { kx, ky } => (kx * x).sin() * (ky * y).cos(),
        }
    }

    /// Exact gradient. The radial kind returns zero at the origin, where
    /// fractional powers have none.
    pub fn grad(&self, x: f64, y: f64) -> [f64; 2] {
        match *self {
            FieldSpec::Xy => [y, x],
            FieldSpec::Linear { ax, ay } => [ax, ay],
            FieldSpec::Quadratic { xx, xy, yy } => {
                [2.0 * xx * x + xy * y, xy * x + 2.0 * yy * y]
            }
            FieldSpec::Radial { power } => {
                let r2 = x * x + y * y;
                if r2 == 0.0 {
                    return [0.0, 0.0];
                }
                let s = power * r2.powf(power / 2.0 - 1.0);
                [s * x, s * y]
            }
            FieldSpec::Bump { cx, cy, sigma } => {
                let s = -self.eval(x, y) / (sigma * sigma);
                [s * (x - cx), s * (y - cy)]
            }
            FieldSpec::Trig { kx, ky } => [
                kx * (kx * x).cos() * (ky * y).cos(),
                -ky * (kx * x).sin() * (ky * y).sin(),
            ],
        }
    }

    /// Exact Laplacian, with the same origin convention as [`grad`].
    ///
    /// [`grad`]: FieldSpec::grad
    pub fn laplacian(&self, x: f64, y: f64) -> f64 {
        match *self {
            FieldSpec::Xy | FieldSpec::Linear { .. } => 0.0,
            FieldSpec::Quadratic { xx, yy, .. } => 2.0 * (xx + yy),
            FieldSpec::Radial { power } => {
                let r2 = x * x + y * y;
                if r2 == 0.0 {
                    return 0.0;
                }
                power * power * r2.powf(power / 2.0 - 1.0)
            }
            FieldSpec::Bump { cx, cy, sigma } => {
                let dx = x - cx;
                let dy = y - cy;
                let s2 = sigma * sigma;
                self.eval(x, y) * ((dx * dx + dy * dy) / s2 - 2.0) / s2
            }
            FieldSpec::Trig { kx, ky } => -(kx * kx + ky * ky) * self.eval(x, y),
        }
    }

    /// Nodal interpolant on the mesh.
    pub fn sample(&self, mesh: &Arc<TriMesh>) -> ScalarField {
        ScalarField::sample(mesh, |x, y| self.eval(x, y))
    }

    fn validate(&self) -> Result<()> {
        let params: &[f64] = match self {
            FieldSpec::Xy => &[],
            FieldSpec::Linear { ax, ay } => &[*ax, *ay],
            FieldSpec::Quadratic { xx, xy, yy } => &[*xx, *xy, *yy],
            FieldSpec::Radial { power } => {
                if !(*power > 0.0) {
                    return Err(Error::Config(format!(
                        "radial exponent must be positive, got {power}"
                    )));
                }
                &[*power]
            }
            FieldSpec::Bump { cx, cy, sigma } => {
                if !(*sigma > 0.0) {
                    return Err(Error::Config(format!(
                        "bump width must be positive, got {sigma}"
                    )));
                }
                &[*cx, *cy, *sigma]
            }
            FieldSpec::Trig { kx, ky } => &[*kx, *ky],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Config("field parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Drift field family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftKind {
    /// `b = 0`.
    Zero,
    /// `b = κ·(x, y)`: uniform outflow with divergence `2κ` everywhere.
    RadialSource { kappa: f64 },
    /// `b = κ·(x, y)/(r² + ε²)`: radial flow whose divergence is an
    /// approximate identity at the origin. Under `Δu + b·∇u = 0` a
    /// positive κ drags the Hölder exponent of solutions there below 1,
    /// harder as the regularization shrinks.
    RadialSink { kappa: f64, eps_reg: f64 },
    /// `b = κ·(−y, x)/(r² + ε²)`: swirl, divergence-free identically.
    Vortex { kappa: f64, eps_reg: f64 },
    /// `b = h·∇⊥v` per cell, assembled from nodal interpolants: the cell
    /// average of `h` times the rotated interpolant gradient of `v`.
    Jacobian { h: FieldSpec, v: FieldSpec },
    /// `b = ∇⊥ξ` per cell from the nodal interpolant of `ξ`.
    Stream { xi: FieldSpec },
    /// Cell vectors loaded from a file in the on-disk field format.
    Custom { path: String },
}

/// A drift kind plus an optional amplitude target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftSpec {
    #[serde(flatten)]
    pub kind: DriftKind,
    /// Rescale the assembled field to this L² norm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<f64>,
}

impl DriftSpec {
    pub fn new(kind: DriftKind) -> Self {
        DriftSpec {
            kind,
            normalize: None,
        }
    }

    pub fn normalized(kind: DriftKind, target: f64) -> Self {
        DriftSpec {
            kind,
            normalize: Some(target),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            DriftKind::Zero | DriftKind::Custom { .. } => {}
            DriftKind::RadialSource { kappa } => check_finite("kappa", *kappa)?,
            DriftKind::RadialSink { kappa, eps_reg }
            | DriftKind::Vortex { kappa, eps_reg } => {
                check_finite("kappa", *kappa)?;
                if !(*eps_reg > 0.0) || !eps_reg.is_finite() {
                    return Err(Error::Config(format!(
                        "regularization must be positive and finite, got {eps_reg}"
                    )));
                }
            }
            DriftKind::Jacobian { h, v } => {
                h.validate()?;
                v.validate()?;
            }
            DriftKind::Stream { xi } => xi.validate()?,
        }
        if let Some(t) = self.normalize {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "normalization target must be positive and finite, got {t}"
                )));
            }
        }
        Ok(())
    }
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be finite, got {v}")))
    }
}

/// Assembles the cell field a spec describes, rescaled to the requested
/// amplitude when one is set.
pub fn make_drift(spec: &DriftSpec, mesh: &Arc<TriMesh>) -> Result<CellVectorField> {
    spec.validate()?;
    let raw = match &spec.kind {
        DriftKind::Zero => CellVectorField::zeros(mesh),
        DriftKind::RadialSource { kappa } => {
            let k = *kappa;
            CellVectorField::sample(mesh, |x, y| [k * x, k * y])
        }
        DriftKind::RadialSink { kappa, eps_reg } => {
            let (k, e2) = (*kappa, eps_reg * eps_reg);
            CellVectorField::sample(mesh, |x, y| {
                let d = x * x + y * y + e2;
                [k * x / d, k * y / d]
            })
        }
        DriftKind::Vortex { kappa, eps_reg } => {
            let (k, e2) = (*kappa, eps_reg * eps_reg);
            CellVectorField::sample(mesh, |x, y| {
                let d = x * x + y * y + e2;
                [-k * y / d, k * x / d]
            })
        }
        DriftKind::Jacobian { h, v } => {
            let havg = h.sample(mesh).cell_average();
            let rot = v.sample(mesh).gradient().perp();
            let values = havg
                .values
                .iter()
                .zip(&rot.values)
                .map(|(h, g)| [h * g[0], h * g[1]])
                .collect();
            CellVectorField::new(mesh.clone(), values)?
        }
        DriftKind::Stream { xi } => xi.sample(mesh).gradient().perp(),
        DriftKind::Custom { path } => {
            let file = File::open(path)?;
            match read_field(BufReader::new(file))? {
                LoadedField::CellVectors(values) => {
                    CellVectorField::new(mesh.clone(), values)?
                }
                LoadedField::Scalar(_) => {
                    return Err(Error::Domain(format!(
                        "{path}: drift files must hold cell vectors, found a scalar field"
                    )))
                }
            }
        }
    };
    match spec.normalize {
        None => Ok(raw),
        Some(target) => {
            let norm = raw.l2_norm();
            if norm == 0.0 {
                return Err(Error::Domain(
                    "cannot rescale a field with zero mass".into(),
                ));
            }
            Ok(raw.scale(target / norm))
        }
    }
}

/// Pointwise divergence where the kind has one in closed form.
pub fn closed_divergence(kind: &DriftKind, x: f64, y: f64) -> Option<f64> {
    match kind {
        DriftKind::Zero | DriftKind::Vortex { .. } | DriftKind::Stream { .. } => Some(0.0),
        DriftKind::RadialSource { kappa } => Some(2.0 * kappa),
        DriftKind::RadialSink { kappa, eps_reg } => {
            let d = x * x + y * y + eps_reg * eps_reg;
            Some(2.0 * kappa * eps_reg * eps_reg / (d * d))
        }
        DriftKind::Jacobian { h, v } => {
            let gh = h.grad(x, y);
            let gv = v.grad(x, y);
            Some(gh[1] * gv[0] - gh[0] * gv[1])
        }
        DriftKind::Custom { .. } => None,
    }
}

/// Pointwise curl where the kind has one in closed form.
pub fn closed_curl(kind: &DriftKind, x: f64, y: f64) -> Option<f64> {
    match kind {
        DriftKind::Zero | DriftKind::RadialSource { .. } | DriftKind::RadialSink { .. } => {
            Some(0.0)
        }
        DriftKind::Vortex { kappa, eps_reg } => {
            let d = x * x + y * y + eps_reg * eps_reg;
            Some(2.0 * kappa * eps_reg * eps_reg / (d * d))
        }
        DriftKind::Stream { xi } => Some(xi.laplacian(x, y)),
        DriftKind::Jacobian { h, v } => {
            let gh = h.grad(x, y);
            let gv = v.grad(x, y);
            Some(gh[0] * gv[0] + gh[1] * gv[1] + h.eval(x, y) * v.laplacian(x, y))
        }
        DriftKind::Custom { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem;
    use crate::field::CellScalarField;
    use crate::hardy::{divergence_report, PeriodicGrid};
    use crate::hodge::hodge_decompose;
    use crate::mesh::build_disk_mesh;
    use std::f64::consts::PI;
    use std::io::BufWriter;

    fn mesh(level: u32) -> Arc<TriMesh> {
        Arc::new(build_disk_mesh(level).unwrap())
    }

    #[test]
    fn zero_kind_gives_exact_zeros_and_rejects_normalization() {
        let m = mesh(3);
        let b = make_drift(&DriftSpec::new(DriftKind::Zero), &m).unwrap();
        assert!(b.values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));

        let err = make_drift(
            &DriftSpec::normalized(DriftKind::Zero, 0.05),
            &m,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn radial_source_samples_the_identity_field() {
        let m = mesh(3);
        let spec = DriftSpec::new(DriftKind::RadialSource { kappa: 2.5 });
        let b = make_drift(&spec, &m).unwrap();
        for t in 0..m.n_triangles() {
            let c = m.centroid(t);
            assert_eq!(b.values[t], [2.5 * c[0], 2.5 * c[1]]);
        }
        assert_eq!(closed_divergence(&spec.kind, 0.3, -0.2), Some(5.0));
        assert_eq!(closed_curl(&spec.kind, 0.3, -0.2), Some(0.0));
    }

    /// A sampled linear field integrates exactly against hat gradients, so
    /// its weak divergence matches the dual of the constant closed form on
    /// every interior row.
    #[test]
    fn source_weak_divergence_agrees_with_the_closed_form_dual() {
        let m = mesh(4);
        let spec = DriftSpec::new(DriftKind::RadialSource { kappa: 1.0 });
        let b = make_drift(&spec, &m).unwrap();
        let wd = fem::weak_divergence(&b);
        let divs: Vec<f64> = (0..m.n_triangles())
            .map(|t| {
                let c = m.centroid(t);
                closed_divergence(&spec.kind, c[0], c[1]).unwrap()
            })
            .collect();
        let dual = fem::dual_from_cells(&CellScalarField::new(m.clone(), divs).unwrap());
        for ((w, d), on) in wd.iter().zip(&dual).zip(&m.boundary_vertex_mask()) {
            if !on {
                assert!((w - d).abs() <= 1e-15, "row defect {}", w - d);
            }
        }
    }

    /// The rotated gradient of a nodal interpolant has continuous normal
    /// components across edges, so its weak divergence vanishes on interior
    /// rows at rounding level.
    #[test]
    fn stream_kind_is_divergence_free_row_by_row() {
        let m = mesh(4);
        let spec = DriftSpec::new(DriftKind::Stream {
            xi: FieldSpec::Trig { kx: 2.0, ky: 1.0 },
        });
        let b = make_drift(&spec, &m).unwrap();
        let wd = fem::weak_divergence(&b);
        for (w, on) in wd.iter().zip(&m.boundary_vertex_mask()) {
            if !on {
                assert!(w.abs() <= 1e-15, "interior weak divergence {w}");
            }
        }
    }

    /// The swirl is divergence-free in closed form; discretely the pressure
    /// of its Hodge split carries only the centroid-sampling consistency
    /// error, which shrinks like h².
    #[test]
    fn vortex_pressure_vanishes_to_discretization_level() {
        let spec = DriftSpec::new(DriftKind::Vortex {
            kappa: 1.0,
            eps_reg: 0.3,
        });

        let b4 = make_drift(&spec, &mesh(4)).unwrap();
        let p4 = hodge_decompose(&b4).unwrap().p.l2_norm();
        assert!(b4.l2_norm() > 2.0);
        assert!(p4 <= 1.2e-5, "level-4 pressure {p4}");

        let b5 = make_drift(&spec, &mesh(5)).unwrap();
        let p5 = hodge_decompose(&b5).unwrap().p.l2_norm();
        assert!(p5 <= 0.35 * p4, "level-5 pressure {p5} vs {p4}");
    }

    /// The sink's divergence is an approximate identity: total mass
    /// `2π/(1+ε²)` in closed form, concentrating as ε shrinks. Its grid
    /// surrogate must reproduce the mass and grow monotonically.
    #[test]
    fn sink_divergence_mass_matches_and_concentration_grows() {
        let m = mesh(4);
        let grid = PeriodicGrid::new(256, 2.0).unwrap();
        let mut totals = Vec::new();
        for eps in [0.4, 0.2, 0.1] {
            let spec = DriftSpec::new(DriftKind::RadialSink {
                kappa: 1.0,
                eps_reg: eps,
            });
            let b = make_drift(&spec, &m).unwrap();
            let rep = divergence_report(&grid, &b).unwrap();
            let mass = 2.0 * PI / (1.0 + eps * eps);
            assert!(
                (rep.l1 - mass).abs() <= 0.02 * mass,
                "eps {eps}: l1 {} vs closed form {mass}",
                rep.l1
            );
            totals.push(rep.total);
        }
        assert!(totals[0] < totals[1] && totals[1] < totals[2], "{totals:?}");
        for (got, want) in totals.iter().zip([19.47, 25.99, 31.49]) {
            assert!((got - want).abs() <= 0.05 * want, "total {got} vs {want}");
        }
    }

    /// Jacobian cells against the analytic product at centroids: first
    /// order in h from the interpolant gradient.
    #[test]
    fn jacobian_kind_converges_to_the_analytic_product() {
        let h = FieldSpec::Trig { kx: 1.0, ky: 1.0 };
        let v = FieldSpec::Quadratic {
            xx: 1.0,
            xy: 0.0,
            yy: -1.0,
        };
        let spec = DriftSpec::new(DriftKind::Jacobian { h, v });

        let dev = |level: u32| {
            let m = mesh(level);
            let b = make_drift(&spec, &m).unwrap();
            let mut worst = 0.0f64;
            for t in 0..m.n_triangles() {
                let c = m.centroid(t);
                let gv = v.grad(c[0], c[1]);
                let hv = h.eval(c[0], c[1]);
                let exact = [-hv * gv[1], hv * gv[0]];
                let got = b.values[t];
                worst = worst.max((got[0] - exact[0]).hypot(got[1] - exact[1]));
            }
            worst
        };

        let d4 = dev(4);
        let d5 = dev(5);
        assert!(d4 <= 0.04, "level-4 deviation {d4}");
        assert!(d5 <= 0.65 * d4, "no first-order decay: {d5} vs {d4}");
    }

    #[test]
    fn normalization_rescales_to_the_requested_amplitude() {
        let m = mesh(4);
        let kind = DriftKind::Stream { xi: FieldSpec::Xy };
        let raw = make_drift(&DriftSpec::new(kind.clone()), &m).unwrap();
        let scaled = make_drift(&DriftSpec::normalized(kind, 0.05), &m).unwrap();
        assert!((scaled.l2_norm() - 0.05).abs() <= 1e-15);

        let factor = 0.05 / raw.l2_norm();
        for (a, b) in raw.values.iter().zip(&scaled.values) {
            assert_eq!([a[0] * factor, a[1] * factor], *b);
        }
    }

    #[test]
    fn field_spec_derivatives_match_finite_differences() {
        let specs = [
            FieldSpec::Xy,
            FieldSpec::Linear { ax: 1.5, ay: -0.5 },
            FieldSpec::Quadratic {
                xx: 1.0,
                xy: 2.0,
                yy: -0.5,
            },
            FieldSpec::Radial { power: 1.3 },
            FieldSpec::Bump {
                cx: 0.2,
                cy: -0.1,
                sigma: 0.4,
            },
            FieldSpec::Trig { kx: 2.0, ky: 1.5 },
        ];
        let probes = [[0.31, -0.22], [0.05, 0.6], [-0.45, -0.37]];
        let d = 1e-5;
        for spec in specs {
            for [x, y] in probes {
                let g = spec.grad(x, y);
                let gx = (spec.eval(x + d, y) - spec.eval(x - d, y)) / (2.0 * d);
                let gy = (spec.eval(x, y + d) - spec.eval(x, y - d)) / (2.0 * d);
                assert!((g[0] - gx).abs() <= 1e-7, "{spec:?} ddx at {x},{y}");
                assert!((g[1] - gy).abs() <= 1e-7, "{spec:?} ddy at {x},{y}");

                let lap = spec.laplacian(x, y);
                let fd = (spec.eval(x + d, y) + spec.eval(x - d, y) + spec.eval(x, y + d)
                    + spec.eval(x, y - d)
                    - 4.0 * spec.eval(x, y))
                    / (d * d);
                assert!((lap - fd).abs() <= 1e-4, "{spec:?} laplacian at {x},{y}");
            }
        }
    }

    /// div(h∇⊥v) and curl(h∇⊥v) in closed form, checked against finite
    /// differences of the assembled continuum expressions.
    #[test]
    fn composite_closed_forms_match_finite_differences() {
        let kind = DriftKind::Jacobian {
            h: FieldSpec::Trig { kx: 1.0, ky: 2.0 },
            v: FieldSpec::Bump {
                cx: 0.1,
                cy: 0.2,
                sigma: 0.5,
            },
        };
        let (h, v) = match &kind {
            DriftKind::Jacobian { h, v } => (*h, *v),
            _ => unreachable!(),
        };
        let field = |x: f64, y: f64| {
            let g = v.grad(x, y);
            [-h.eval(x, y) * g[1], h.eval(x, y) * g[0]]
        };
        let d = 1e-5;
        for [x, y] in [[0.3, -0.1], [-0.2, 0.4]] {
            let div_fd = (field(x + d, y)[0] - field(x - d, y)[0]
                + field(x, y + d)[1]
                - field(x, y - d)[1])
                / (2.0 * d);
            let curl_fd = (field(x + d, y)[1] - field(x - d, y)[1] - field(x, y + d)[0]
                + field(x, y - d)[0])
                / (2.0 * d);
            assert!((closed_divergence(&kind, x, y).unwrap() - div_fd).abs() <= 1e-6);
            assert!((closed_curl(&kind, x, y).unwrap() - curl_fd).abs() <= 1e-6);
        }

        let vortex = DriftKind::Vortex {
            kappa: 1.2,
            eps_reg: 0.25,
        };
        let swirl = |x: f64, y: f64| {
            let dd = x * x + y * y + 0.25 * 0.25;
            [-1.2 * y / dd, 1.2 * x / dd]
        };
        let curl_fd = (swirl(0.3 + d, 0.1)[1] - swirl(0.3 - d, 0.1)[1]
            - swirl(0.3, 0.1 + d)[0]
            + swirl(0.3, 0.1 - d)[0])
            / (2.0 * d);
        assert!((closed_curl(&vortex, 0.3, 0.1).unwrap() - curl_fd).abs() <= 1e-6);
        assert_eq!(closed_divergence(&vortex, 0.3, 0.1), Some(0.0));
    }

    #[test]
    fn custom_kind_loads_cell_vectors_and_rejects_scalars() {
        let dir = tempfile::tempdir().unwrap();
        let m = mesh(3);
        let b = CellVectorField::sample(&m, |x, y| [y * 0.3, -x * 0.3]);

        let good = dir.path().join("b.field");
        let mut w = BufWriter::new(File::create(&good).unwrap());
        crate::io::write_cell_field(&mut w, &b).unwrap();
        drop(w);

        let spec = DriftSpec::new(DriftKind::Custom {
            path: good.to_str().unwrap().to_owned(),
        });
        let loaded = make_drift(&spec, &m).unwrap();
        assert_eq!(loaded.values, b.values);

        let scalar = dir.path().join("s.field");
        let mut w = BufWriter::new(File::create(&scalar).unwrap());
        crate::io::write_scalar_field(&mut w, &ScalarField::zeros(&m)).unwrap();
        drop(w);
        let err = make_drift(
            &DriftSpec::new(DriftKind::Custom {
                path: scalar.to_str().unwrap().to_owned(),
            }),
            &m,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Domain(_)));

        let err = make_drift(
            &DriftSpec::new(DriftKind::Custom {
                path: dir.path().join("missing.field").to_str().unwrap().to_owned(),
            }),
            &m,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let m = mesh(3);
        let bad = [
            DriftSpec::new(DriftKind::Vortex {
                kappa: 1.0,
                eps_reg: 0.0,
            }),
            DriftSpec::new(DriftKind::RadialSink {
                kappa: f64::NAN,
                eps_reg: 0.1,
            }),
            DriftSpec::normalized(DriftKind::RadialSource { kappa: 1.0 }, -0.5),
            DriftSpec::new(DriftKind::Stream {
                xi: FieldSpec::Radial { power: 0.0 },
            }),
            DriftSpec::new(DriftKind::Jacobian {
                h: FieldSpec::Bump {
                    cx: 0.0,
                    cy: 0.0,
                    sigma: -1.0,
                },
                v: FieldSpec::Xy,
            }),
        ];
        for spec in bad {
            let err = make_drift(&spec, &m).unwrap_err();
            assert!(matches!(err, Error::Config(_)), "{spec:?}");
        }
    }

    #[test]
    fn specs_round_trip_through_json() {
        let specs = [
            DriftSpec::new(DriftKind::Zero),
            DriftSpec::normalized(
                DriftKind::Vortex {
                    kappa: 1.0,
                    eps_reg: 0.3,
                },
                0.05,
            ),
            DriftSpec::new(DriftKind::Jacobian {
                h: FieldSpec::Bump {
                    cx: 0.1,
                    cy: -0.2,
                    sigma: 0.4,
                },
                v: FieldSpec::Xy,
            }),
            DriftSpec::new(DriftKind::Custom {
                path: "fields/b.field".into(),
            }),
        ];
        for spec in specs {
            let text = serde_json::to_string(&spec).unwrap();
            let back: DriftSpec = serde_json::from_str(&text).unwrap();
            assert_eq!(spec, back);
        }

        let spec: DriftSpec = serde_json::from_str(
            r#"{"kind": "stream", "xi": {"f": "trig", "kx": 2.0, "ky": 1.0}, "normalize": 0.05}"#,
        )
        .unwrap();
        assert_eq!(
            spec,
            DriftSpec::normalized(
                DriftKind::Stream {
                    xi: FieldSpec::Trig { kx: 2.0, ky: 1.0 }
                },
                0.05
            )
        );
        assert!(serde_json::from_str::<DriftSpec>(r#"{"kind": "whirl"}"#).is_err());
    }
}
