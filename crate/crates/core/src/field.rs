//! Piecewise linear nodal fields and piecewise constant cell fields.
//!
//! A `ScalarField` stores one value per vertex and is read as the continuous
//! P1 interpolant; its gradient is constant on each triangle. Cell fields
//! store one value (or vector) per triangle. All norms are exact for the
//! piecewise polynomial representation, not quadrature approximations.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{PointLocator, TriMesh};

/// Rotation by a quarter turn: `(x, y)` to `(-y, x)`.
pub fn perp(v: [f64; 2]) -> [f64; 2] {
    [-v[1], v[0]]
}

pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Nodal P1 field on a disk mesh.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

/// Per-triangle scalar field.
#[derive(Debug, Clone)]
pub struct CellScalarField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<f64>,
}

/// Per-triangle vector field.
#[derive(Debug, Clone)]
pub struct CellVectorField {
    pub mesh: Arc<TriMesh>,
    pub values: Vec<[f64; 2]>,
}

impl ScalarField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::Shape {
                what: "nodal field",
                expected: mesh.n_vertices(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("nodal field"));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn zeros(mesh: &Arc<TriMesh>) -> Self {
        ScalarField {
            mesh: mesh.clone(),
            values: vec![0.0; mesh.n_vertices()],
        }
    }

    /// Nodal interpolant of a pointwise function.
    pub fn sample(mesh: &Arc<TriMesh>, f: impl Fn(f64, f64) -> f64) -> Self {
        ScalarField {
            mesh: mesh.clone(),
            values: mesh.vertices.iter().map(|&[x, y]| f(x, y)).collect(),
        }
    }

    /// Constant-per-triangle gradient of the interpolant.
    /// Piecewise-constant gradient, written in edge differences so a
    /// constant field comes out as exact zeros.
    pub fn gradient(&self) -> CellVectorField {
        let mesh = &self.mesh;
        let values = (0..mesh.n_triangles())
            .map(|t| {
                let [a, b, c] = mesh.triangles[t];
                let g = mesh.grad_basis(t);
                let db = self.values[b] - self.values[a];
                let dc = self.values[c] - self.values[a];
                [db * g[1][0] + dc * g[2][0], db * g[1][1] + dc * g[2][1]]
            })
            .collect();
        CellVectorField {
            mesh: mesh.clone(),
            values,
        }
    }

    /// Average of the three corner values per triangle.
    pub fn cell_average(&self) -> CellScalarField {
        let values = self
            .mesh
            .triangles
            .iter()
            .map(|&[a, b, c]| (self.values[a] + self.values[b] + self.values[c]) / 3.0)
            .collect();
        CellScalarField {
            mesh: self.mesh.clone(),
            values,
        }
    }

    /// Exact integral of the interpolant over the mesh polygon.
    pub fn integral(&self) -> f64 {
        self.mesh
            .triangles
            .iter()
            .enumerate()
            .map(|(t, &[a, b, c])| {
                self.mesh.area(t) * (self.values[a] + self.values[b] + self.values[c]) / 3.0
            })
            .sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.mesh.total_area()
    }

    /// Exact L2 norm of the interpolant.
    pub fn l2_norm(&self) -> f64 {
        let mut acc = 0.0;
        for (t, &[a, b, c]) in self.mesh.triangles.iter().enumerate() {
            let (ua, ub, uc) = (self.values[a], self.values[b], self.values[c]);
            acc += self.mesh.area(t) / 6.0
                * (ua * ua + ub * ub + uc * uc + ua * ub + ub * uc + uc * ua);
        }
        acc.max(0.0).sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// L2 norm of the gradient.
    pub fn h1_seminorm(&self) -> f64 {
        self.gradient().l2_norm()
    }

    /// Interpolant value at a point, `None` outside the mesh polygon.
    pub fn eval(&self, locator: &PointLocator, p: [f64; 2]) -> Option<f64> {
        let (t, l) = locator.locate(p)?;
        let [a, b, c] = self.mesh.triangles[t];
        Some(l[0] * self.values[a] + l[1] * self.values[b] + l[2] * self.values[c])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "field size mismatch");
        ScalarField {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }
}

impl CellScalarField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_triangles() {
            return Err(Error::Shape {
                what: "cell field",
                expected: mesh.n_triangles(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("cell field"));
        }
        Ok(CellScalarField { mesh, values })
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(t, v)| v * self.mesh.area(t))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(t, v)| v * v * self.mesh.area(t))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl CellVectorField {
    pub fn new(mesh: Arc<TriMesh>, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != mesh.n_triangles() {
            return Err(Error::Shape {
                what: "cell vector field",
                expected: mesh.n_triangles(),
                got: values.len(),
            });
        }
        if !values.iter().all(|v| v[0].is_finite() && v[1].is_finite()) {
            return Err(Error::NonFinite("cell vector field"));
        }
        Ok(CellVectorField { mesh, values })
    }

    pub fn zeros(mesh: &Arc<TriMesh>) -> Self {
        CellVectorField {
            mesh: mesh.clone(),
            values: vec![[0.0, 0.0]; mesh.n_triangles()],
        }
    }

    /// Centroid samples of a pointwise vector function.
    pub fn sample(mesh: &Arc<TriMesh>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let values = (0..mesh.n_triangles())
            .map(|t| {
                let c = mesh.centroid(t);
                f(c[0], c[1])
            })
            .collect();
        CellVectorField {
            mesh: mesh.clone(),
            values,
        }
    }

    pub fn zip(&self, other: &Self, f: impl Fn([f64; 2], [f64; 2]) -> [f64; 2]) -> Self {
        assert_eq!(self.values.len(), other.values.len(), "field size mismatch");
        CellVectorField {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        self.zip(other, |a, b| [a[0] + b[0], a[1] + b[1]])
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.zip(other, |a, b| [a[0] - b[0], a[1] - b[1]])
    }

    /// Quarter-turn rotation of every cell vector.
    pub fn perp(&self) -> Self {
        CellVectorField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| perp(v)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        CellVectorField {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| [s * v[0], s * v[1]]).collect(),
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(t, v)| dot(*v, *v) * self.mesh.area(t))
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    pub fn linf_norm(&self) -> f64 {
        self.values
            .iter()
            .fold(0.0_f64, |m, v| m.max(dot(*v, *v).sqrt()))
    }
}
