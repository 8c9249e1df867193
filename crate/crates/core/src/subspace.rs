//! Skinning eigenmodes and the linear blend skinning deformation basis.
//!
//! The basis maps reduced coordinates `z` (one 3x4 affine handle per mode)
//! to per-vertex displacements. For mode `k`, homogeneous rest component
//! `a` (x, y, z, 1) and output axis `i`:
//!
//! ```text
//! z[12 k + 3 a + i] = T_k[i][a]
//! dx[3 v + i]       = sum_k sum_a W[v][k] * Xbar[v][a] * T_k[i][a]
//! ```
//!
//! so each 12-block stores the affine matrix column by column, following
//! the `(... ) ⊗ I_3` Kronecker layout.

use std::io::Write;
use std::ops::{Deref, DerefMut};
use std::path::Path;

use rand::{Rng, SeedableRng};

use crate::error::{invalid, RegError, Result};
use crate::geometry::{Mat3, Vec3};
use crate::linalg::{symmetric_eigen, DenseMatrix, ProfileCholesky};
use crate::mesh::{FlatCoords, TriMesh};
use crate::operators::SparseSymMatrix;
use crate::scalar::{dot, norm, Real};

/// Meshes at or below this vertex count use the dense eigensolver.
pub const DENSE_EIGEN_LIMIT: usize = 300;

/// Generalized eigenpairs of `(L, M)`: `L W = M W diag(values)`.
#[derive(Debug, Clone)]
pub struct SkinningModes<T> {
    n: usize,
    /// Row-major n x m weights.
    weights: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> SkinningModes<T> {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn mode_count(&self) -> usize {
        self.values.len()
    }

    pub fn eigenvalues(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn weight(&self, vertex: usize, mode: usize) -> T {
        self.weights[vertex * self.values.len() + mode]
    }

    pub fn column(&self, mode: usize) -> Vec<T> {
        (0..self.n).map(|v| self.weight(v, mode)).collect()
    }

    /// `||L W - M W Λ||_F` and `||L W||_F`.
    pub fn residual(&self, l: &SparseSymMatrix<T>, m: &SparseSymMatrix<T>) -> (T, T) {
        let mut res = T::zero();
        let mut lw = T::zero();
        for k in 0..self.mode_count() {
            let w = self.column(k);
            let a = l.mul_vec(&w);
            let b = m.mul_vec(&w);
            for (x, y) in a.iter().zip(&b) {
                let r = *x - self.values[k] * *y;
                res += r * r;
                lw += *x * *x;
            }
        }
        (res.sqrt(), lw.sqrt())
    }

    /// `||W^T M W - I||_F`.
    pub fn orthonormality_error(&self, m: &SparseSymMatrix<T>) -> T {
        let cols: Vec<Vec<T>> = (0..self.mode_count()).map(|k| self.column(k)).collect();
        let mcols: Vec<Vec<T>> = cols.iter().map(|c| m.mul_vec(c)).collect();
        let mut err = T::zero();
        for (i, ci) in cols.iter().enumerate() {
            for (j, mj) in mcols.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                let d = dot(ci, mj) - target;
                err += d * d;
            }
        }
        err.sqrt()
    }

    /// Writes `vertex,mode,weight` rows.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "vertex,mode,weight")?;
        for v in 0..self.n {
            for k in 0..self.mode_count() {
                writeln!(w, "{},{},{:.16e}", v, k, self.weight(v, k))?;
            }
        }
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| RegError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
        self.write_csv(&mut f).map_err(io)?;
        f.flush().map_err(io)
    }
}

/// Computes the `count` smallest generalized eigenpairs of `(L, M)`.
///
/// Columns are M-orthonormal, eigenvalues ascending, and each column is
/// signed so that its largest-magnitude entry is positive.
pub fn compute_modes<T: Real>(
    l: &SparseSymMatrix<T>,
    m: &SparseSymMatrix<T>,
    count: usize,
) -> Result<SkinningModes<T>> {
    let n = l.dim();
    if m.dim() != n {
        return Err(invalid(format!(
            "Laplacian is {n}x{n} but mass matrix is {0}x{0}",
            m.dim()
        )));
    }
    if !m.is_diagonal() || m.diagonal().iter().any(|&d| !(d > T::zero())) {
        return Err(invalid("mass matrix must be diagonal with positive entries"));
    }
    if count == 0 || count > n {
        return Err(invalid(format!("mode count must be in 1..={n}, got {count}")));
    }
    let (values, mut cols) = if n <= DENSE_EIGEN_LIMIT {
        dense_modes(l, m, count)?
    } else {
        shift_invert_modes(l, m, count)?
    };
    for c in &mut cols {
        fix_sign(c);
    }
    let mut weights = vec![T::zero(); n * count];
    for (k, c) in cols.iter().enumerate() {
        for (v, &x) in c.iter().enumerate() {
            weights[v * count + k] = x;
        }
    }
    Ok(SkinningModes { n, weights, values })
}

fn fix_sign<T: Real>(c: &mut [T]) {
    let mut best = T::zero();
    let mut sign = T::one();
    for &x in c.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < T::zero() {
        for x in c.iter_mut() {
            *x = -*x;
        }
    }
}

type Pairs<T> = (Vec<T>, Vec<Vec<T>>);

fn dense_modes<T: Real>(
    l: &SparseSymMatrix<T>,
    m: &SparseSymMatrix<T>,
    count: usize,
) -> Result<Pairs<T>> {
    let n = l.dim();
    let inv_sqrt: Vec<T> = m.diagonal().iter().map(|&d| T::one() / d.sqrt()).collect();
    let mut c = DenseMatrix::zeros(n);
    for i in 0..n {
        let (cols, vals) = l.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            c.set(i, j, v * inv_sqrt[i] * inv_sqrt[j]);
        }
    }
    let eig = symmetric_eigen(&c).map_err(|_| RegError::EigenSolver {
        requested: count,
        converged: 0,
        iterations: 0,
    })?;
    let values = eig.values[..count].to_vec();
    let cols = (0..count)
        .map(|k| (0..n).map(|i| eig.vectors.get(i, k) * inv_sqrt[i]).collect())
        .collect();
    Ok((values, cols))
}

/// Modified Gram-Schmidt in the M inner product (two passes). Columns that
/// collapse are replaced by fresh random vectors.
fn m_orthonormalize<T: Real>(cols: &mut [Vec<T>], mdiag: &[T], rng: &mut impl Rng) {
    let m_dot = |a: &[T], b: &[T]| -> T {
        a.iter().zip(b).zip(mdiag).map(|((&x, &y), &w)| x * y * w).sum()
    };
    for j in 0..cols.len() {
        for attempt in 0..3 {
            let before = m_dot(&cols[j], &cols[j]).sqrt();
            for _ in 0..2 {
                for i in 0..j {
                    let (head, tail) = cols.split_at_mut(j);
                    let proj = m_dot(&head[i], &tail[0]);
                    for (x, &y) in tail[0].iter_mut().zip(&head[i]) {
                        *x -= proj * y;
                    }
                }
            }
            let after = m_dot(&cols[j], &cols[j]).sqrt();
            if after > T::lit(1e-10) * before && after > T::zero() {
                let s = T::one() / after;
                cols[j].iter_mut().for_each(|x| *x *= s);
                break;
            }
            if attempt == 2 {
                break;
            }
            for x in cols[j].iter_mut() {
                *x = T::lit(rng.gen_range(-1.0..1.0));
            }
        }
    }
}

const SUBSPACE_MAX_ITERS: usize = 2000;

/// Block shift-invert subspace iteration with Rayleigh-Ritz projection,
/// shift `sigma = -1e-8 * trace(L) / n`.
fn shift_invert_modes<T: Real>(
    l: &SparseSymMatrix<T>,
    m: &SparseSymMatrix<T>,
    count: usize,
) -> Result<Pairs<T>> {
    let n = l.dim();
    let mdiag = m.diagonal();
    let sigma = -T::lit(1e-8) * l.trace() / T::from_count(n);
    let k = l.add_scaled(m, -sigma);
    let chol = ProfileCholesky::factor(&k).map_err(|_| RegError::EigenSolver {
        requested: count,
        converged: 0,
        iterations: 0,
    })?;
    let p = n.min((2 * count).max(count + 8));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5EED_CAFE);
    let mut x: Vec<Vec<T>> = (0..p)
        .map(|_| (0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect())
        .collect();
    m_orthonormalize(&mut x, &mdiag, &mut rng);
    let col_tol = T::lit(1e-11);
    let mut converged = 0;
    let mut theta = vec![T::zero(); p];
    for iter in 1..=SUBSPACE_MAX_ITERS {
        let mut y: Vec<Vec<T>> = x
            .iter()
            .map(|c| {
                let mc: Vec<T> = c.iter().zip(&mdiag).map(|(&a, &b)| a * b).collect();
                chol.solve(&mc)
            })
            .collect();
        m_orthonormalize(&mut y, &mdiag, &mut rng);
        let ly: Vec<Vec<T>> = y.iter().map(|c| l.mul_vec(c)).collect();
        let mut h = DenseMatrix::zeros(p);
        for i in 0..p {
            for j in 0..=i {
                let v = (dot(&y[i], &ly[j]) + dot(&y[j], &ly[i])) * T::lit(0.5);
                h.set(i, j, v);
                h.set(j, i, v);
            }
        }
        let eig = symmetric_eigen(&h).map_err(|_| RegError::EigenSolver {
            requested: count,
            converged,
            iterations: iter,
        })?;
        theta = eig.values.clone();
        x = (0..p)
            .map(|kk| {
                let mut c = vec![T::zero(); n];
                for (j, yj) in y.iter().enumerate() {
                    let q = eig.vectors.get(j, kk);
                    for (ci, &yv) in c.iter_mut().zip(yj) {
                        *ci += q * yv;
                    }
                }
                c
            })
            .collect();
        converged = 0;
        for (kk, xk) in x.iter().take(count).enumerate() {
            let lx = l.mul_vec(xk);
            let r: Vec<T> = lx
                .iter()
                .zip(xk)
                .zip(&mdiag)
                .map(|((&a, &b), &w)| a - theta[kk] * w * b)
                .collect();
            if norm(&r) <= col_tol * norm(&lx).max(T::one()) {
                converged += 1;
            } else {
                break;
            }
        }
        if converged == count {
            log::debug!("shift-invert converged {count} modes in {iter} iterations");
            x.truncate(count);
            theta.truncate(count);
            return Ok((theta, x));
        }
    }
    // accept if the aggregate residual meets the looser block criterion
    let lw: Vec<Vec<T>> = x.iter().take(count).map(|c| l.mul_vec(c)).collect();
    let mut res = T::zero();
    let mut lwn = T::zero();
    for (kk, (c, lc)) in x.iter().zip(&lw).enumerate() {
        for ((&a, &b), &w) in lc.iter().zip(c).zip(&mdiag) {
            let r = a - theta[kk] * w * b;
            res += r * r;
            lwn += a * a;
        }
    }
    if res.sqrt() <= T::lit(1e-8) * lwn.sqrt().max(T::one()) {
        x.truncate(count);
        theta.truncate(count);
        return Ok((theta, x));
    }
    Err(RegError::EigenSolver {
        requested: count,
        converged,
        iterations: SUBSPACE_MAX_ITERS,
    })
}

/// Reduced coordinates: 12 entries per active mode.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReducedCoords<T>(pub Vec<T>);

impl<T: Real> ReducedCoords<T> {
    pub fn zeros(modes: usize) -> Self {
        Self(vec![T::zero(); 12 * modes])
    }

    pub fn mode_count(&self) -> usize {
        self.0.len() / 12
    }

    /// Appends one zero block.
    pub fn enrich(&mut self) {
        self.0.extend(std::iter::repeat_n(T::zero(), 12));
    }

    /// Packs the affine handle `[A | t]` of `mode`.
    pub fn set_affine(&mut self, mode: usize, a: &Mat3<T>, t: Vec3<T>) {
        let base = 12 * mode;
        for i in 0..3 {
            for col in 0..3 {
                self.0[base + 3 * col + i] = a.rows[i][col];
            }
            self.0[base + 9 + i] = t[i];
        }
    }

    /// The affine handle `(A, t)` of `mode`.
    pub fn affine(&self, mode: usize) -> (Mat3<T>, Vec3<T>) {
        let base = 12 * mode;
        let mut a = Mat3::diagonal(T::zero(), T::zero(), T::zero());
        for i in 0..3 {
            for col in 0..3 {
                a.rows[i][col] = self.0[base + 3 * col + i];
            }
        }
        let t = Vec3::new(self.0[base + 9], self.0[base + 10], self.0[base + 11]);
        (a, t)
    }
}

impl<T> Deref for ReducedCoords<T> {
    type Target = Vec<T>;
    fn deref(&self) -> &Vec<T> {
        &self.0
    }
}

impl<T> DerefMut for ReducedCoords<T> {
    fn deref_mut(&mut self) -> &mut Vec<T> {
        &mut self.0
    }
}

/// Linear blend skinning basis, evaluated matrix-free.
#[derive(Debug, Clone)]
pub struct SubspaceBasis<T> {
    modes: SkinningModes<T>,
    /// Rest positions in homogeneous coordinates, n x 4.
    rest: Vec<[T; 4]>,
}

impl<T: Real> SubspaceBasis<T> {
    pub fn new(modes: SkinningModes<T>, rest: &TriMesh<T>) -> Result<Self> {
        if modes.vertex_count() != rest.vertex_count() {
            return Err(invalid(format!(
                "modes have {} vertices, rest mesh has {}",
                modes.vertex_count(),
                rest.vertex_count()
            )));
        }
        let rest = rest
            .vertices()
            .iter()
            .map(|v| [v.x, v.y, v.z, T::one()])
            .collect();
        Ok(Self { modes, rest })
    }

    pub fn modes(&self) -> &SkinningModes<T> {
        &self.modes
    }

    pub fn max_modes(&self) -> usize {
        self.modes.mode_count()
    }

    pub fn rows(&self) -> usize {
        3 * self.rest.len()
    }

    /// Entry `B[row][col]`.
    pub fn entry(&self, row: usize, col: usize) -> T {
        let (v, i) = (row / 3, row % 3);
        let (k, r) = (col / 12, col % 12);
        let (a, j) = (r / 3, r % 3);
        if i != j {
            return T::zero();
        }
        self.modes.weight(v, k) * self.rest[v][a]
    }

    /// Dense `3n x 12m` matrix of the first `m` modes, row-major.
    pub fn to_dense(&self, m: usize) -> Vec<Vec<T>> {
        (0..self.rows())
            .map(|r| (0..12 * m).map(|c| self.entry(r, c)).collect())
            .collect()
    }

    fn check_modes(&self, m: usize) -> Result<()> {
        if m > self.max_modes() {
            return Err(invalid(format!(
                "{m} modes requested, basis has {}",
                self.max_modes()
            )));
        }
        Ok(())
    }

    /// `B[:, :12m] z` where `m = |z| / 12`.
    pub fn apply(&self, z: &[T]) -> Result<Vec<T>> {
        if !z.len().is_multiple_of(12) {
            return Err(invalid(format!("reduced length {} is not a multiple of 12", z.len())));
        }
        let m = z.len() / 12;
        self.check_modes(m)?;
        let mut out = vec![T::zero(); self.rows()];
        for (v, xb) in self.rest.iter().enumerate() {
            for k in 0..m {
                let w = self.modes.weight(v, k);
                let block = &z[12 * k..12 * k + 12];
                for i in 0..3 {
                    let s = xb[0] * block[i]
                        + xb[1] * block[3 + i]
                        + xb[2] * block[6 + i]
                        + xb[3] * block[9 + i];
                    out[3 * v + i] += w * s;
                }
            }
        }
        Ok(out)
    }

    /// `B[:, :12m]^T y`.
    pub fn apply_transpose(&self, y: &[T], m: usize) -> Result<Vec<T>> {
        if y.len() != self.rows() {
            return Err(invalid(format!(
                "full-space vector has length {}, expected {}",
                y.len(),
                self.rows()
            )));
        }
        self.check_modes(m)?;
        let mut out = vec![T::zero(); 12 * m];
        for (v, xb) in self.rest.iter().enumerate() {
            let g = &y[3 * v..3 * v + 3];
            for k in 0..m {
                let w = self.modes.weight(v, k);
                for a in 0..4 {
                    let c = w * xb[a];
                    for i in 0..3 {
                        out[12 * k + 3 * a + i] += c * g[i];
                    }
                }
            }
        }
        Ok(out)
    }

    /// `x = B z + x0`.
    pub fn reconstruct(&self, z: &ReducedCoords<T>, x0: &FlatCoords<T>) -> Result<FlatCoords<T>> {
        if x0.len() != self.rows() {
            return Err(invalid(format!(
                "rest coordinates have length {}, expected {}",
                x0.len(),
                self.rows()
            )));
        }
        let dx = self.apply(z)?;
        Ok(FlatCoords(dx.iter().zip(x0.iter()).map(|(&d, &x)| x + d).collect()))
    }

    /// `B[:, :12m]^T grad_x`.
    pub fn project_gradient(&self, grad_x: &FlatCoords<T>, m: usize) -> Result<ReducedCoords<T>> {
        Ok(ReducedCoords(self.apply_transpose(grad_x, m)?))
    }
}

/// Eigenmodes and basis in one step.
pub fn build_basis<T: Real>(modes: SkinningModes<T>, rest: &TriMesh<T>) -> Result<SubspaceBasis<T>> {
    SubspaceBasis::new(modes, rest)
}

/// Reduced coordinates realizing the global affine map `p -> A p + t` with
/// a first mode whose weight is the constant `c`.
pub fn affine_coords<T: Real>(modes: usize, c: T, a: &Mat3<T>, t: Vec3<T>) -> ReducedCoords<T> {
    let mut z = ReducedCoords::zeros(modes);
    let inv = T::one() / c;
    let mut lin = *a;
    for (i, row) in lin.rows.iter_mut().enumerate() {
        for (j, e) in row.iter_mut().enumerate() {
            let id = if i == j { T::one() } else { T::zero() };
            *e = (*e - id) * inv;
        }
    }
    z.set_affine(0, &lin, t * inv);
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{cotan_laplacian, lumped_mass};
    use crate::shapes;
    use rand::SeedableRng;

    fn modes_for(mesh: &TriMesh<f64>, count: usize) -> (SkinningModes<f64>, SparseSymMatrix<f64>, SparseSymMatrix<f64>) {
        let l = cotan_laplacian(mesh).unwrap();
        let m = lumped_mass(mesh).unwrap();
        (compute_modes(&l, &m, count).unwrap(), l, m)
    }

    fn check_invariants(modes: &SkinningModes<f64>, l: &SparseSymMatrix<f64>, m: &SparseSymMatrix<f64>, area: f64) {
        let (res, lw) = modes.residual(l, m);
        assert!(res <= 1e-8 * lw.max(1.0), "residual {res}");
        assert!(modes.orthonormality_error(m) <= 1e-8);
        let vals = modes.eigenvalues();
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        assert!(vals[0].abs() <= 1e-10 * vals[vals.len() - 1]);
        let c = 1.0 / area.sqrt();
        for w in modes.column(0) {
            assert!((w - c).abs() <= 1e-8 * c, "{w} vs {c}");
        }
    }

    #[test]
    fn dense_path_invariants() {
        let mesh = shapes::icosphere::<f64>(2, 1.0);
        let (modes, l, m) = modes_for(&mesh, 12);
        check_invariants(&modes, &l, &m, m.trace());
        // threefold cluster after the constant mode
        let v = modes.eigenvalues();
        assert!((v[1] - v[3]).abs() <= 1e-6 * v[3]);
        assert!(v[4] - v[3] > 0.5 * v[3]);
    }

    #[test]
    fn shift_invert_path_invariants() {
        let mesh = shapes::bar::<f64>(4.0, 0.5, 36, 4);
        assert!(mesh.vertex_count() > DENSE_EIGEN_LIMIT);
        let (modes, l, m) = modes_for(&mesh, 10);
        check_invariants(&modes, &l, &m, m.trace());
    }

    #[test]
    fn dense_and_shift_invert_agree() {
        let mesh = shapes::bar::<f64>(4.0, 0.5, 20, 3);
        let l = cotan_laplacian(&mesh).unwrap();
        let m = lumped_mass(&mesh).unwrap();
        let (dv, _) = dense_modes(&l, &m, 8).unwrap();
        let (sv, _) = shift_invert_modes(&l, &m, 8).unwrap();
        for (a, b) in dv.iter().zip(&sv) {
            assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn disconnected_mesh_does_not_fail() {
        let a = shapes::icosphere::<f64>(1, 1.0);
        let b = a.map_vertices(|p| p + Vec3::new(5.0, 0.0, 0.0));
        let n = a.vertex_count();
        let mut verts = a.vertices().to_vec();
        verts.extend_from_slice(b.vertices());
        let mut tris = a.triangles().to_vec();
        tris.extend(b.triangles().iter().map(|t| t.map(|i| i + n)));
        let mesh = TriMesh::new(verts, tris).unwrap();
        let (modes, _, _) = modes_for(&mesh, 4);
        assert!(modes.eigenvalues()[0].abs() < 1e-10 && modes.eigenvalues()[1].abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_requests() {
        let mesh = shapes::icosphere::<f64>(0, 1.0);
        let l = cotan_laplacian(&mesh).unwrap();
        let m = lumped_mass(&mesh).unwrap();
        assert!(compute_modes(&l, &m, 0).is_err());
        assert!(compute_modes(&l, &m, 13).is_err());
        assert!(compute_modes(&l, &l, 2).is_err());
    }

    #[test]
    fn constant_mode_translation_and_linear_part() {
        let mesh = shapes::icosphere::<f64>(1, 1.0);
        let (modes, _, _) = modes_for(&mesh, 3);
        let c = modes.weight(0, 0);
        let basis = SubspaceBasis::new(modes, &mesh).unwrap();
        let x0 = mesh.vectorize();
        let t = Vec3::new(0.3, -1.0, 2.0);
        let mut z = ReducedCoords::zeros(1);
        z.set_affine(0, &Mat3::diagonal(0.0, 0.0, 0.0), t * (1.0 / c));
        let x = basis.reconstruct(&z, &x0).unwrap();
        for v in 0..mesh.vertex_count() {
            assert!((x.vertex(v) - (x0.vertex(v) + t)).norm() < 1e-12);
        }
        let a = Mat3::rotation(2, 0.4);
        let mut z = ReducedCoords::zeros(1);
        z.set_affine(0, &a, Vec3::zero());
        let dx = basis.apply(&z).unwrap();
        for v in 0..mesh.vertex_count() {
            let expect = a.mul_vec(mesh.vertices()[v]) * c;
            assert!((Vec3::from_slice(&dx[3 * v..3 * v + 3]) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn affine_coords_reproduce_affine_map() {
        let mesh = shapes::icosphere::<f64>(2, 1.0);
        let (modes, _, _) = modes_for(&mesh, 4);
        let c = modes.weight(0, 0);
        let basis = SubspaceBasis::new(modes, &mesh).unwrap();
        let a = Mat3::rotation(1, 0.3).mul(&Mat3::diagonal(1.2, 1.0, 0.9));
        let t = Vec3::new(0.1, 0.2, -0.3);
        for m in 1..=4 {
            let z = affine_coords(m, c, &a, t);
            let x = basis.reconstruct(&z, &mesh.vectorize()).unwrap();
            for (v, p) in mesh.vertices().iter().enumerate() {
                assert!((x.vertex(v) - (a.mul_vec(*p) + t)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn prefix_and_dense_entries() {
        let mesh = shapes::icosphere::<f64>(1, 1.0);
        let (modes, _, _) = modes_for(&mesh, 5);
        let small = {
            let mut w = vec![0.0; mesh.vertex_count() * 2];
            for v in 0..mesh.vertex_count() {
                w[2 * v] = modes.weight(v, 0);
                w[2 * v + 1] = modes.weight(v, 1);
            }
            SkinningModes {
                n: mesh.vertex_count(),
                weights: w,
                values: modes.eigenvalues()[..2].to_vec(),
            }
        };
        let full = SubspaceBasis::new(modes, &mesh).unwrap().to_dense(5);
        let pre = SubspaceBasis::new(small, &mesh).unwrap().to_dense(2);
        for (rf, rp) in full.iter().zip(&pre) {
            assert_eq!(&rf[..24], &rp[..]);
        }
    }

    #[test]
    fn translation_block_of_projected_gradient_sums_axes() {
        let mesh = shapes::icosphere::<f64>(1, 1.0);
        let n = mesh.vertex_count();
        let constant = SkinningModes {
            n,
            weights: vec![1.0; n],
            values: vec![0.0],
        };
        let basis = SubspaceBasis::new(constant, &mesh).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g: Vec<f64> = (0..3 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let gz = basis.project_gradient(&FlatCoords(g.clone()), 1).unwrap();
        for axis in 0..3 {
            let s: f64 = (0..n).map(|v| g[3 * v + axis]).sum();
            assert!((gz[9 + axis] - s).abs() < 1e-12);
        }
        let zero = basis.project_gradient(&FlatCoords::zeros(3 * n), 1).unwrap();
        assert_eq!(zero.0, vec![0.0; 12]);
    }

    #[test]
    fn adjoint_identity_and_linearity() {
        let mesh = shapes::icosphere::<f64>(1, 1.0);
        let (modes, _, _) = modes_for(&mesh, 6);
        let basis = SubspaceBasis::new(modes, &mesh).unwrap();
        let x0 = mesh.vectorize();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for trial in 0..100 {
            let m = 1 + trial % 6;
            let g: Vec<f64> = (0..basis.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let z: Vec<f64> = (0..12 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = dot(&basis.apply_transpose(&g, m).unwrap(), &z);
            let rhs = dot(&g, &basis.apply(&z).unwrap());
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
            let z2: Vec<f64> = (0..12 * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let sum: Vec<f64> = z.iter().zip(&z2).map(|(a, b)| a + b).collect();
            let r = |z: &[f64]| basis.reconstruct(&ReducedCoords(z.to_vec()), &x0).unwrap();
            let (a, b, c) = (r(&sum), r(&z), r(&z2));
            for i in 0..a.len() {
                assert!(((a[i] - x0[i]) - ((b[i] - x0[i]) + (c[i] - x0[i]))).abs() < 1e-12);
            }
        }
        assert_eq!(basis.reconstruct(&ReducedCoords::zeros(3), &x0).unwrap(), x0);
        assert!(basis.apply(&[0.0; 13]).is_err());
        assert!(basis.apply(&[0.0; 84]).is_err());
        assert!(basis.apply_transpose(&[0.0; 5], 1).is_err());
    }

    #[test]
    fn csv_dump_layout() {
        let mesh = shapes::icosphere::<f64>(0, 1.0);
        let (modes, _, _) = modes_for(&mesh, 2);
        let mut buf = Vec::new();
        modes.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 12 * 2);
        assert!(text.starts_with("vertex,mode,weight\n0,0,"));
    }
}
