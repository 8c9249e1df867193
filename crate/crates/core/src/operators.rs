//! Cotangent Laplacian and lumped mass matrix assembly.

use crate::error::{RegError, Result};
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// Largest cotangent magnitude kept during assembly.
pub const COT_CLAMP: f64 = 1e6;

/// Relative area floor: triangle areas below `AREA_FLOOR * diag^2` are clamped.
pub const AREA_FLOOR: f64 = 1e-12;

/// Symmetric sparse matrix in CSR form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> SparseSymMatrix<T> {
    /// Assembles from `(row, col, value)` triplets, summing duplicates.
    /// Each off-diagonal triplet is mirrored, so pass only one of `(i,j)`/`(j,i)`.
    pub fn from_upper_triplets(n: usize, triplets: &[(usize, usize, T)]) -> Self {
        let mut all: Vec<(usize, usize, T)> = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            all.push((i, j, v));
            if i != j {
                all.push((j, i, v));
            }
        }
        // stable sort keeps summation order deterministic
        all.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<T> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in all {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let n = diag.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: diag.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|k| vals[k]).unwrap_or_else(|_| T::zero())
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|i| self.entry(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|i| self.row(i).0.iter().all(|&j| j == i))
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        (0..self.n)
            .map(|i| {
                let (cols, vals) = self.row(i);
                cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum()
            })
            .collect()
    }

    /// Applies the matrix to each coordinate of a vertex-major 3n vector.
    pub fn mul_flat3(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), 3 * self.n);
        let mut out = vec![T::zero(); x.len()];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for a in 0..3 {
                out[3 * i + a] = cols.iter().zip(vals).map(|(&j, &v)| v * x[3 * j + a]).sum();
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> T {
        crate::scalar::norm(&self.values)
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        for (i, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                row[j] = v;
            }
        }
        d
    }

    /// `self + s * other`; sparsity pattern is the union.
    pub fn add_scaled(&self, other: &Self, s: T) -> Self {
        assert_eq!(self.n, other.n);
        let mut trip = Vec::with_capacity(self.nnz() + other.nnz());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            trip.extend(c.iter().zip(v).filter(|(&j, _)| j >= i).map(|(&j, &x)| (i, j, x)));
            let (c, v) = other.row(i);
            trip.extend(c.iter().zip(v).filter(|(&j, _)| j >= i).map(|(&j, &x)| (i, j, s * x)));
        }
        Self::from_upper_triplets(self.n, &trip)
    }
}

fn area_floor<T: Real>(mesh: &TriMesh<T>) -> T {
    let d = mesh.bounding_box().diagonal();
    T::lit(AREA_FLOOR) * d * d
}

/// Positive semi-definite cotangent Laplacian:
/// `L_ij = -1/2 * sum of cot(opposite angles)`, diagonal = negated row sum.
pub fn cotan_laplacian<T: Real>(mesh: &TriMesh<T>) -> Result<SparseSymMatrix<T>> {
    let eps = area_floor(mesh);
    let clamp = T::lit(COT_CLAMP);
    let half = T::lit(0.5);
    let v = mesh.vertices();
    let n = mesh.vertex_count();
    let mut trip = Vec::with_capacity(mesh.triangle_count() * 3);
    let mut healthy = 0usize;
    for tri in mesh.triangles() {
        let area = mesh_triangle_area(v[tri[0]], v[tri[1]], v[tri[2]]);
        if area > eps {
            healthy += 1;
        }
        let twice_area = (area * T::lit(2.0)).max(eps * T::lit(2.0));
        for k in 0..3 {
            let (i, j, o) = (tri[(k + 1) % 3], tri[(k + 2) % 3], tri[k]);
            let e1 = v[i] - v[o];
            let e2 = v[j] - v[o];
            let cot = (e1.dot(e2) / twice_area).max(-clamp).min(clamp);
            let w = -half * cot;
            let (a, b) = (i.min(j), i.max(j));
            trip.push((a, b, w));
        }
    }
    if healthy == 0 {
        return Err(RegError::Assembly(
            "every triangle is degenerate; cannot assemble Laplacian".into(),
        ));
    }
    let off = SparseSymMatrix::from_upper_triplets(n, &trip);
    let mut diag = vec![T::zero(); n];
    for (i, d) in diag.iter_mut().enumerate() {
        let (cols, vals) = off.row(i);
        *d = -cols.iter().zip(vals).map(|(_, &x)| x).sum::<T>();
    }
    for (i, &d) in diag.iter().enumerate() {
        trip.push((i, i, d));
    }
    Ok(SparseSymMatrix::from_upper_triplets(n, &trip))
}

fn mesh_triangle_area<T: Real>(
    a: crate::geometry::Vec3<T>,
    b: crate::geometry::Vec3<T>,
    c: crate::geometry::Vec3<T>,
) -> T {
    (b - a).cross(c - a).norm() * T::lit(0.5)
}

/// Barycentric lumped mass: each vertex receives a third of its incident areas.
pub fn lumped_mass<T: Real>(mesh: &TriMesh<T>) -> Result<SparseSymMatrix<T>> {
    let eps = area_floor(mesh);
    let third = T::one() / T::lit(3.0);
    let v = mesh.vertices();
    let mut diag = vec![T::zero(); mesh.vertex_count()];
    let mut total = T::zero();
    for tri in mesh.triangles() {
        let raw = mesh_triangle_area(v[tri[0]], v[tri[1]], v[tri[2]]);
        total += raw;
        let a = raw.max(eps);
        for &i in tri {
            diag[i] += a * third;
        }
    }
    if !(total > T::zero()) {
        return Err(RegError::Assembly("mesh has zero total area".into()));
    }
    // unreferenced vertices still need positive mass
    for d in &mut diag {
        if !(*d > T::zero()) {
            *d = eps;
        }
    }
    Ok(SparseSymMatrix::from_diagonal(&diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::shapes;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn equilateral() -> TriMesh<f64> {
        TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, 3f64.sqrt() / 2.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn equilateral_laplacian_values() {
        let l = cotan_laplacian(&equilateral()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j {
                    1.0 / 3f64.sqrt()
                } else {
                    -1.0 / (2.0 * 3f64.sqrt())
                };
                assert_relative_eq!(l.entry(i, j), expected, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn equilateral_mass_values() {
        let m = lumped_mass(&equilateral()).unwrap();
        assert!(m.is_diagonal());
        for d in m.diagonal() {
            assert_relative_eq!(d, 3f64.sqrt() / 12.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn laplacian_structure_on_meshes() {
        let meshes = [
            shapes::icosphere::<f64>(2, 1.0),
            shapes::bar(4.0, 0.5, 12, 2),
            shapes::open_box(1.0, 3),
        ];
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for mesh in &meshes {
            let l = cotan_laplacian(mesh).unwrap();
            let n = l.dim();
            let fro = l.frobenius_norm();
            let max = (0..n)
                .flat_map(|i| l.row(i).1.to_vec())
                .fold(0.0f64, |a, v| a.max(v.abs()));
            for i in 0..n {
                let (cols, vals) = l.row(i);
                let s: f64 = vals.iter().sum();
                assert!(s.abs() <= 1e-10 * max, "row {i} sums to {s}");
                for (&j, &v) in cols.iter().zip(vals) {
                    assert!((v - l.entry(j, i)).abs() <= 1e-14);
                }
            }
            let l1 = l.mul_vec(&vec![1.0; n]);
            assert!(crate::scalar::norm(&l1) <= 1e-10 * fro);
            for _ in 0..100 {
                let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let q = crate::scalar::dot(&v, &l.mul_vec(&v));
                assert!(q >= -1e-10 * crate::scalar::dot(&v, &v));
            }
            let m = lumped_mass(mesh).unwrap();
            assert!(m.diagonal().iter().all(|&d| d > 0.0));
            assert_relative_eq!(m.trace(), mesh.surface_area(), max_relative = 1e-12);
        }
    }

    #[test]
    fn degenerate_inputs() {
        let flat = TriMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(cotan_laplacian(&flat), Err(RegError::Assembly(_))));
        assert!(matches!(lumped_mass(&flat), Err(RegError::Assembly(_))));
    }

    #[test]
    fn sliver_triangle_stays_finite() {
        let m = TriMesh::<f64>::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.0),
                Vec3::new(0.5, 1e-13, 0.0),
                Vec3::new(0.5, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 3, 1]],
        )
        .unwrap();
        let l = cotan_laplacian(&m).unwrap();
        assert!((0..4).all(|i| l.row(i).1.iter().all(|v| v.is_finite() && v.abs() <= 2e6)));
    }
}
