//! SDF-matching objective and its gradient with respect to vertex positions.

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::geometry::Vec3;
use crate::mesh::FlatCoords;
use crate::operators::SparseSymMatrix;
use crate::scalar::Real;
use crate::sdf::{ClosestPointRecord, QuadratureSet, SdfMesh, SignMode};

/// Relative distance below which the surface normal replaces the radial direction.
pub const NEAR_SURFACE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport<T> {
    /// Total objective (SDF term plus weighted regularizer).
    pub energy: T,
    /// SDF-matching term alone.
    pub sdf_energy: T,
    /// Unweighted Dirichlet term; zero when regularization is off.
    pub dirichlet: T,
    /// `dE/dx`, present when the gradient was requested.
    pub grad_x: Option<FlatCoords<T>>,
    /// `f_i - g_i` per quadrature point.
    pub residuals: Vec<T>,
    /// Closest source triangle per quadrature point.
    pub closest: Vec<usize>,
}

/// Sum of squared differences between source and target signed distances
/// over the quadrature points. Keeps per-point closest triangles from the
/// previous call as search hints.
#[derive(Debug, Clone)]
pub struct SdfObjective<'a, T> {
    triangles: &'a [[usize; 3]],
    quad: &'a QuadratureSet<T>,
    near: T,
    hints: Vec<Option<usize>>,
}

impl<'a, T: Real> SdfObjective<'a, T> {
    pub fn new(triangles: &'a [[usize; 3]], quad: &'a QuadratureSet<T>) -> Self {
        let near = T::lit(NEAR_SURFACE) * quad.bounds().diagonal();
        Self {
            triangles,
            quad,
            near,
            hints: vec![None; quad.len()],
        }
    }

    pub fn quadrature(&self) -> &QuadratureSet<T> {
        self.quad
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        self.triangles
    }

    fn check(&self, x: &FlatCoords<T>) -> Result<usize> {
        if !x.len().is_multiple_of(3) || x.is_empty() {
            return Err(invalid(format!("flat coordinate length {} is invalid", x.len())));
        }
        let n = x.len() / 3;
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i >= n)) {
            return Err(invalid(format!("triangle {t:?} out of range for {n} vertices")));
        }
        Ok(n)
    }

    fn records(&mut self, x: &FlatCoords<T>) -> (SdfMesh<T>, Vec<ClosestPointRecord<T>>) {
        let mesh = SdfMesh::from_parts(x.to_points(), self.triangles);
        let records: Vec<_> = self
            .quad
            .points()
            .par_iter()
            .zip(self.hints.par_iter())
            .map(|(&q, &hint)| mesh.query(q, SignMode::Pseudonormal, hint))
            .collect();
        for (h, r) in self.hints.iter_mut().zip(&records) {
            *h = Some(r.triangle);
        }
        (mesh, records)
    }

    fn evaluate(&mut self, x: &FlatCoords<T>, with_gradient: bool) -> Result<EnergyReport<T>> {
        let n = self.check(x)?;
        let (mesh, records) = self.records(x);
        let residuals: Vec<T> = records
            .iter()
            .zip(self.quad.target())
            .map(|(r, &g)| r.signed_distance() - g)
            .collect();
        let energy: T = residuals.iter().map(|&r| r * r).sum();
        let grad_x = with_gradient.then(|| {
            let mut grad = FlatCoords::zeros(3 * n);
            let two = T::lit(2.0);
            for ((rec, &res), &q) in records.iter().zip(&residuals).zip(self.quad.points()) {
                if res == T::zero() {
                    continue;
                }
                // d f / d c, with f = s * |q - c|
                let dir = if rec.distance >= self.near {
                    (q - rec.point) * (rec.sign / rec.distance)
                } else {
                    mesh.face_normal(rec.triangle)
                };
                let tri = self.triangles[rec.triangle];
                for (j, &v) in tri.iter().enumerate() {
                    let c: Vec3<T> = dir * (-two * res * rec.bary[j]);
                    grad[3 * v] += c.x;
                    grad[3 * v + 1] += c.y;
                    grad[3 * v + 2] += c.z;
                }
            }
            grad
        });
        Ok(EnergyReport {
            energy,
            sdf_energy: energy,
            dirichlet: T::zero(),
            grad_x,
            residuals,
            closest: records.iter().map(|r| r.triangle).collect(),
        })
    }

    /// Objective value only.
    pub fn energy(&mut self, x: &FlatCoords<T>) -> Result<EnergyReport<T>> {
        self.evaluate(x, false)
    }

    /// Objective value and `dE/dx`, holding each point's closest triangle,
    /// barycentric coordinates and sign fixed.
    pub fn energy_gradient(&mut self, x: &FlatCoords<T>) -> Result<EnergyReport<T>> {
        self.evaluate(x, true)
    }
}

pub fn energy<T: Real>(x: &FlatCoords<T>, triangles: &[[usize; 3]], quad: &QuadratureSet<T>) -> Result<EnergyReport<T>> {
    SdfObjective::new(triangles, quad).energy(x)
}

pub fn energy_gradient<T: Real>(
    x: &FlatCoords<T>,
    triangles: &[[usize; 3]],
    quad: &QuadratureSet<T>,
) -> Result<EnergyReport<T>> {
    SdfObjective::new(triangles, quad).energy_gradient(x)
}

/// `1/2 (x - x0)^T L (x - x0)` with `L` applied per coordinate, and its gradient.
pub fn dirichlet_energy<T: Real>(
    x: &FlatCoords<T>,
    x0: &FlatCoords<T>,
    l: &SparseSymMatrix<T>,
) -> Result<(T, FlatCoords<T>)> {
    if x.len() != x0.len() || x.len() != 3 * l.dim() {
        return Err(invalid(format!(
            "dimension mismatch: x {}, x0 {}, Laplacian {}",
            x.len(),
            x0.len(),
            l.dim()
        )));
    }
    let d: Vec<T> = x.iter().zip(x0.iter()).map(|(&a, &b)| a - b).collect();
    let ld = l.mul_flat3(&d);
    let value = crate::scalar::dot(&d, &ld) * T::lit(0.5);
    Ok((value, FlatCoords(ld)))
}

/// SDF term plus `lambda` times the Dirichlet smoothness term.
#[derive(Debug, Clone)]
pub struct RegistrationObjective<'a, T> {
    sdf: SdfObjective<'a, T>,
    lambda: T,
    laplacian: Option<&'a SparseSymMatrix<T>>,
    rest: &'a FlatCoords<T>,
}

impl<'a, T: Real> RegistrationObjective<'a, T> {
    pub fn new(
        triangles: &'a [[usize; 3]],
        quad: &'a QuadratureSet<T>,
        lambda: T,
        laplacian: &'a SparseSymMatrix<T>,
        rest: &'a FlatCoords<T>,
    ) -> Result<Self> {
        if !(lambda >= T::zero()) {
            return Err(invalid(format!("regularization weight must be >= 0, got {lambda}")));
        }
        if rest.len() != 3 * laplacian.dim() {
            return Err(invalid("rest coordinates do not match the Laplacian"));
        }
        Ok(Self {
            sdf: SdfObjective::new(triangles, quad),
            lambda,
            laplacian: (lambda > T::zero()).then_some(laplacian),
            rest,
        })
    }

    fn evaluate(&mut self, x: &FlatCoords<T>, with_gradient: bool) -> Result<EnergyReport<T>> {
        let mut report = self.sdf.evaluate(x, with_gradient)?;
        if let Some(l) = self.laplacian {
            let (value, grad) = dirichlet_energy(x, self.rest, l)?;
            report.dirichlet = value;
            report.energy += self.lambda * value;
            if let Some(g) = report.grad_x.as_mut() {
                for (a, &b) in g.iter_mut().zip(grad.iter()) {
                    *a += self.lambda * b;
                }
            }
        }
        Ok(report)
    }

    pub fn energy(&mut self, x: &FlatCoords<T>) -> Result<EnergyReport<T>> {
        self.evaluate(x, false)
    }

    pub fn energy_gradient(&mut self, x: &FlatCoords<T>) -> Result<EnergyReport<T>> {
        self.evaluate(x, true)
    }
}

/// One-shot `E_sdf + lambda * E_dirichlet` with gradient.
pub fn total_energy<T: Real>(
    x: &FlatCoords<T>,
    triangles: &[[usize; 3]],
    quad: &QuadratureSet<T>,
    lambda: T,
    laplacian: &SparseSymMatrix<T>,
    x0: &FlatCoords<T>,
) -> Result<EnergyReport<T>> {
    RegistrationObjective::new(triangles, quad, lambda, laplacian, x0)?.energy_gradient(x)
}
