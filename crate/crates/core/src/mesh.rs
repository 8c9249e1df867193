//! Triangle meshes and their flattened coordinate vectors.

use std::ops::{Deref, DerefMut};

use crate::error::{invalid, Result};
use crate::geometry::{Aabb, Vec3};
use crate::scalar::Real;

/// A triangle surface. Counterclockwise triangles face outward.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[usize; 3]>,
}

impl<T: Real> TriMesh<T> {
    /// Builds a mesh, rejecting out-of-range or repeated indices.
    pub fn new(vertices: Vec<Vec3<T>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        if n < 3 {
            return Err(invalid(format!("mesh needs at least 3 vertices, got {n}")));
        }
        if triangles.is_empty() {
            return Err(invalid("mesh has no triangles"));
        }
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= n) {
                return Err(invalid(format!(
                    "triangle {t} references vertex {bad}, mesh has {n} vertices"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(invalid(format!("triangle {t} repeats a vertex: {tri:?}")));
            }
        }
        if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite())) {
            return Err(invalid("mesh has non-finite vertex coordinates"));
        }
        Ok(Self { vertices, triangles })
    }

    pub fn vertices(&self) -> &[Vec3<T>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounding_box(&self) -> Aabb<T> {
        Aabb::from_points(&self.vertices)
    }

    pub fn triangle_area(&self, t: usize) -> T {
        let [a, b, c] = self.triangles[t];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(c - a).norm() * T::lit(0.5)
    }

    pub fn surface_area(&self) -> T {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Stacks vertex rows into a length-3n vector.
    pub fn vectorize(&self) -> FlatCoords<T> {
        FlatCoords(self.vertices.iter().flat_map(|v| v.to_array()).collect())
    }

    /// Rebuilds a mesh from flat coordinates and a triangle list.
    pub fn unvectorize(x: &FlatCoords<T>, triangles: &[[usize; 3]]) -> Result<Self> {
        if !x.len().is_multiple_of(3) {
            return Err(invalid(format!(
                "flat coordinate length {} is not divisible by 3",
                x.len()
            )));
        }
        Self::new(x.to_points(), triangles.to_vec())
    }

    /// Same topology, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3<T>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(invalid(format!(
                "expected {} vertices, got {}",
                self.vertices.len(),
                vertices.len()
            )));
        }
        Self::new(vertices, self.triangles.clone())
    }

    /// Applies `f` to every vertex.
    pub fn map_vertices(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Non-fatal quality issues (degenerate area, open boundary edges).
    pub fn quality_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let diag = self.bounding_box().diagonal();
        let eps = T::lit(1e-12) * diag * diag;
        let degenerate = (0..self.triangles.len())
            .filter(|&t| self.triangle_area(t) <= eps)
            .count();
        if degenerate > 0 {
            out.push(format!("{degenerate} triangles with near-zero area"));
        }
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        let mut boundary = 0;
        let mut nonmanifold = 0;
        let mut i = 0;
        while i < edges.len() {
            let mut j = i;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            match j - i {
                1 => boundary += 1,
                2 => {}
                _ => nonmanifold += 1,
            }
            i = j;
        }
        if boundary > 0 {
            out.push(format!("{boundary} boundary edges (mesh is not watertight)"));
        }
        if nonmanifold > 0 {
            out.push(format!("{nonmanifold} non-manifold edges"));
        }
        out
    }
}

/// Vertex-major flattened positions `[x0, y0, z0, x1, ...]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FlatCoords<T>(pub Vec<T>);

impl<T: Real> FlatCoords<T> {
    pub fn zeros(len: usize) -> Self {
        Self(vec![T::zero(); len])
    }

    pub fn vertex(&self, v: usize) -> Vec3<T> {
        Vec3::from_slice(&self.0[3 * v..3 * v + 3])
    }

    pub fn to_points(&self) -> Vec<Vec3<T>> {
        self.0.chunks_exact(3).map(Vec3::from_slice).collect()
    }

    pub fn norm(&self) -> T {
        crate::scalar::norm(&self.0)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> Deref for FlatCoords<T> {
    type Target = Vec<T>;
    fn deref(&self) -> &Vec<T> {
        &self.0
    }
}

impl<T> DerefMut for FlatCoords<T> {
    fn deref_mut(&mut self) -> &mut Vec<T> {
        &mut self.0
    }
}

/// Smallest box around both meshes, padded on every side by
/// `pad_fraction` times its longest edge.
pub fn joint_bounding_box<T: Real>(
    source: &TriMesh<T>,
    target: &TriMesh<T>,
    pad_fraction: T,
) -> Result<Aabb<T>> {
    if !(pad_fraction >= T::zero()) {
        return Err(invalid(format!("pad fraction must be >= 0, got {pad_fraction}")));
    }
    let b = source.bounding_box().union(&target.bounding_box());
    Ok(b.padded(pad_fraction * b.longest_edge()))
}

/// Uniform scale about a center, `p' = (p - center) * scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity<T> {
    pub center: Vec3<T>,
    pub scale: T,
}

impl<T: Real> Similarity<T> {
    /// Transform mapping the joint bounding box of both meshes to unit diagonal.
    pub fn unit_diagonal(source: &TriMesh<T>, target: &TriMesh<T>) -> Result<Self> {
        let b = joint_bounding_box(source, target, T::zero())?;
        let diag = b.diagonal();
        if !(diag > T::zero()) {
            return Err(invalid("joint bounding box has zero diagonal"));
        }
        Ok(Self {
            center: b.center(),
            scale: T::one() / diag,
        })
    }

    pub fn apply(&self, mesh: &TriMesh<T>) -> TriMesh<T> {
        mesh.map_vertices(|p| (p - self.center) * self.scale)
    }

    pub fn invert(&self, mesh: &TriMesh<T>) -> TriMesh<T> {
        mesh.map_vertices(|p| p * (T::one() / self.scale) + self.center)
    }
}
