//! Dense symmetric eigendecomposition and a profile (skyline) Cholesky
//! factorization used by the shift-invert eigensolver.

use crate::error::{invalid, Result};
use crate::operators::SparseSymMatrix;
use crate::scalar::Real;

/// Row-major dense square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    pub n: usize,
    pub data: Vec<T>,
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }
}

/// Eigenvalues (ascending) and eigenvectors (columns of a row-major matrix).
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

/// Eigendecomposition of a dense symmetric matrix by Householder
/// tridiagonalization followed by implicit QL iterations.
pub fn symmetric_eigen<T: Real>(a: &DenseMatrix<T>) -> Result<SymmetricEigen<T>> {
    let n = a.n;
    if n == 0 {
        return Ok(SymmetricEigen {
            values: vec![],
            vectors: DenseMatrix::zeros(0),
        });
    }
    let mut v: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| a.get(i, j)).collect())
        .collect();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    let mut vectors = DenseMatrix::zeros(n);
    for (i, row) in v.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            vectors.set(i, j, x);
        }
    }
    Ok(SymmetricEigen { values: d, vectors })
}

#[allow(clippy::needless_range_loop)]
fn tred2<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) {
    let n = d.len();
    let zero = T::zero();
    d[..n].copy_from_slice(&v[n - 1][..n]);
    for i in (1..n).rev() {
        let mut scale = zero;
        let mut h = zero;
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[i - 1][j];
                v[i][j] = zero;
                v[j][i] = zero;
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = zero;
            }
            for j in 0..i {
                f = d[j];
                v[j][i] = f;
                g = e[j] + v[j][j] * f;
                for k in j + 1..i {
                    g += v[k][j] * d[k];
                    e[k] += v[k][j] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[k][j] -= upd;
                }
                d[j] = v[i - 1][j];
                v[i][j] = zero;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[n - 1][i] = v[i][i];
        v[i][i] = T::one();
        let h = d[i + 1];
        if h != zero {
            for k in 0..=i {
                d[k] = v[k][i + 1] / h;
            }
            for j in 0..=i {
                let mut g = zero;
                for k in 0..=i {
                    g += v[k][i + 1] * v[k][j];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[k][j] -= upd;
                }
            }
        }
        for row in v.iter_mut().take(i + 1) {
            row[i + 1] = zero;
        }
    }
    for j in 0..n {
        d[j] = v[n - 1][j];
        v[n - 1][j] = zero;
    }
    v[n - 1][n - 1] = T::one();
    e[0] = zero;
}

fn tql2<T: Real>(v: &mut [Vec<T>], d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    let zero = T::zero();
    let two = T::lit(2.0);
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(invalid("tridiagonal QL iteration did not converge"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for row in v.iter_mut() {
                        h = row[i + 1];
                        row[i + 1] = s * row[i] + c * h;
                        row[i] = c * row[i] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = zero;
    }
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for (j, &dj) in d.iter().enumerate().skip(i + 1) {
            if dj < p {
                k = j;
                p = dj;
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in v.iter_mut() {
                row.swap(i, k);
            }
        }
    }
    Ok(())
}

/// Reverse Cuthill-McKee ordering of the sparsity graph. Returns `perm`
/// with `perm[new] = old`.
pub fn reverse_cuthill_mckee<T: Real>(a: &SparseSymMatrix<T>) -> Vec<usize> {
    let n = a.dim();
    let degree: Vec<usize> = (0..n).map(|i| a.row(i).0.len()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (degree[i], i));
    for &start in &by_degree {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut head = order.len();
        order.push(start);
        while head < order.len() {
            let u = order[head];
            head += 1;
            let mut nbrs: Vec<usize> = a.row(u).0.iter().copied().filter(|&j| !visited[j]).collect();
            nbrs.sort_by_key(|&j| (degree[j], j));
            for j in nbrs {
                visited[j] = true;
                order.push(j);
            }
        }
    }
    order.reverse();
    order
}

/// Cholesky factor `P A P^T = L L^T` stored by rows within the envelope.
#[derive(Debug, Clone)]
pub struct ProfileCholesky<T> {
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> ProfileCholesky<T> {
    /// Factors a symmetric positive definite sparse matrix.
    pub fn factor(a: &SparseSymMatrix<T>) -> Result<Self> {
        let n = a.dim();
        let perm = reverse_cuthill_mckee(a);
        let mut inv = vec![0usize; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first = vec![0usize; n];
        for (i, f) in first.iter_mut().enumerate() {
            let old = perm[i];
            *f = a.row(old).0.iter().map(|&j| inv[j]).filter(|&j| j <= i).min().unwrap_or(i);
        }
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut values = vec![T::zero(); start[n]];
        for i in 0..n {
            let (cols, vals) = a.row(perm[i]);
            for (&j, &v) in cols.iter().zip(vals) {
                let jn = inv[j];
                if jn <= i {
                    values[start[i] + jn - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = values[start[i] + j - fi];
                let ri = &values[start[i] + lo - fi..start[i] + j - fi];
                let rj = &values[start[j] + lo - fj..start[j] + j - fj];
                s -= ri.iter().zip(rj).map(|(&x, &y)| x * y).sum::<T>();
                if j < i {
                    let djj = values[start[j + 1] - 1];
                    values[start[i] + j - fi] = s / djj;
                } else {
                    if !(s > T::zero()) {
                        return Err(invalid(format!(
                            "matrix is not positive definite (pivot {i} = {s})"
                        )));
                    }
                    values[start[i] + j - fi] = s.sqrt();
                }
            }
        }
        Ok(Self {
            perm,
            first,
            start,
            values,
        })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        let mut y: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            let s: T = row[..i - fi].iter().zip(&y[fi..i]).map(|(&l, &x)| l * x).sum();
            y[i] = (y[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.values[self.start[i]..self.start[i + 1]];
            y[i] /= row[i - fi];
            let xi = y[i];
            for (k, &l) in row[..i - fi].iter().enumerate() {
                y[fi + k] -= l * xi;
            }
        }
        let mut x = vec![T::zero(); n];
        for (i, &p) in self.perm.iter().enumerate() {
            x[p] = y[i];
        }
        x
    }
}
