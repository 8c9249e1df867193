//! Exact signed distance to triangle meshes.

mod bvh;
mod closest;
mod quadrature;

use std::collections::HashMap;
use std::str::FromStr;

pub use bvh::Bvh;
pub use closest::{closest_point_on_triangle, segment_hit, Feature, TriangleHit};
pub use quadrature::{make_quadrature, QuadratureSet};

use crate::geometry::Vec3;
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// Meshes with fewer triangles are searched exhaustively.
pub const BRUTE_FORCE_LIMIT: usize = 64;

/// How inside/outside is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SignMode {
    /// Angle-weighted pseudonormal at the closest feature.
    #[default]
    Pseudonormal,
    /// Generalized winding number `>= 1/2` means inside. Robust to holes.
    Winding,
}

impl FromStr for SignMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "pseudonormal" => Ok(Self::Pseudonormal),
            "winding" => Ok(Self::Winding),
            other => Err(format!("unknown sign mode {other:?} (pseudonormal|winding)")),
        }
    }
}

impl std::fmt::Display for SignMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Pseudonormal => "pseudonormal",
            Self::Winding => "winding",
        })
    }
}

/// Nearest surface point of a query, with its signed distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPointRecord<T> {
    pub triangle: usize,
    pub bary: [T; 3],
    pub point: Vec3<T>,
    pub distance: T,
    /// `-1` inside, `+1` outside.
    pub sign: T,
    pub feature: Feature,
}

impl<T: Real> ClosestPointRecord<T> {
    pub fn signed_distance(&self) -> T {
        self.sign * self.distance
    }
}

/// A mesh prepared for distance queries: pseudonormals plus a BVH.
#[derive(Debug, Clone)]
pub struct SdfMesh<T> {
    vertices: Vec<Vec3<T>>,
    triangles: Vec<[usize; 3]>,
    face_normals: Vec<Vec3<T>>,
    vertex_normals: Vec<Vec3<T>>,
    edge_normals: Vec<[Vec3<T>; 3]>,
    bvh: Option<Bvh<T>>,
}

impl<T: Real> SdfMesh<T> {
    pub fn new(mesh: &TriMesh<T>) -> Self {
        Self::from_parts(mesh.vertices().to_vec(), mesh.triangles())
    }

    pub fn from_parts(vertices: Vec<Vec3<T>>, triangles: &[[usize; 3]]) -> Self {
        let tri = |t: &[usize; 3]| t.map(|i| vertices[i]);
        let face_normals: Vec<Vec3<T>> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = tri(t);
                (b - a).cross(c - a).normalized()
            })
            .collect();
        let mut vertex_normals = vec![Vec3::zero(); vertices.len()];
        let mut edge_sum: HashMap<(usize, usize), Vec3<T>> = HashMap::new();
        for (t, idx) in triangles.iter().enumerate() {
            let p = tri(idx);
            let n = face_normals[t];
            for k in 0..3 {
                let e1 = (p[(k + 1) % 3] - p[k]).normalized();
                let e2 = (p[(k + 2) % 3] - p[k]).normalized();
                let angle = e1.dot(e2).max(-T::one()).min(T::one()).acos();
                vertex_normals[idx[k]] += n * angle;
                let (a, b) = (idx[k], idx[(k + 1) % 3]);
                *edge_sum.entry((a.min(b), a.max(b))).or_insert_with(Vec3::zero) += n;
            }
        }
        let edge_normals = triangles
            .iter()
            .map(|idx| {
                [0, 1, 2].map(|e| {
                    let (a, b) = (idx[e], idx[(e + 1) % 3]);
                    edge_sum[&(a.min(b), a.max(b))]
                })
            })
            .collect();
        let bvh = (triangles.len() >= BRUTE_FORCE_LIMIT).then(|| Bvh::build(&vertices, triangles));
        Self {
            vertices,
            triangles: triangles.to_vec(),
            face_normals,
            vertex_normals,
            edge_normals,
            bvh,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn face_normal(&self, t: usize) -> Vec3<T> {
        self.face_normals[t]
    }

    #[inline]
    fn corners(&self, t: usize) -> [Vec3<T>; 3] {
        self.triangles[t].map(|i| self.vertices[i])
    }

    fn pseudonormal(&self, t: usize, feature: Feature) -> Vec3<T> {
        match feature {
            Feature::Face => self.face_normals[t],
            Feature::Edge(e) => self.edge_normals[t][e as usize],
            Feature::Vertex(k) => self.vertex_normals[self.triangles[t][k as usize]],
        }
    }

    /// Candidate `t` wins over `(best_d2, best_t)` on smaller distance, then
    /// on smaller index, so every search order yields the same answer.
    #[inline]
    fn better(d2: T, t: usize, best_d2: T, best_t: usize) -> bool {
        d2 < best_d2 || (d2 == best_d2 && t < best_t)
    }

    /// Closest point on triangle `t`. Edge hits are recomputed from the
    /// edge's lower-indexed vertex so neighbouring triangles sharing the edge
    /// produce bitwise identical distances.
    #[inline]
    fn hit(&self, q: Vec3<T>, t: usize) -> TriangleHit<T> {
        let corners = self.corners(t);
        let h = closest_point_on_triangle(q, corners);
        match h.feature {
            Feature::Edge(e) => {
                let idx = self.triangles[t];
                let e = e as usize;
                segment_hit(q, corners, e, idx[e] > idx[(e + 1) % 3])
            }
            _ => h,
        }
    }

    fn nearest_brute(&self, q: Vec3<T>) -> (usize, TriangleHit<T>) {
        let mut best_t = usize::MAX;
        let mut best: Option<TriangleHit<T>> = None;
        for t in 0..self.triangles.len() {
            let h = self.hit(q, t);
            if best.is_none_or(|b| Self::better(h.distance_squared, t, b.distance_squared, best_t)) {
                best = Some(h);
                best_t = t;
            }
        }
        (best_t, best.expect("mesh has triangles"))
    }

    fn nearest_tree(&self, bvh: &Bvh<T>, q: Vec3<T>, hint: Option<usize>) -> (usize, TriangleHit<T>) {
        let mut best_t = usize::MAX;
        let mut best: Option<TriangleHit<T>> = None;
        let mut bound = T::infinity();
        if let Some(h) = hint.filter(|&h| h < self.triangles.len()) {
            let hit = self.hit(q, h);
            bound = hit.distance_squared;
            best = Some(hit);
            best_t = h;
        }
        bvh.nearest(q, bound, |t| {
            let h = self.hit(q, t);
            if best.is_none_or(|b| Self::better(h.distance_squared, t, b.distance_squared, best_t)) {
                best = Some(h);
                best_t = t;
            }
            best.map_or(T::infinity(), |b| b.distance_squared)
        });
        (best_t, best.expect("mesh has triangles"))
    }

    fn record(&self, q: Vec3<T>, t: usize, h: TriangleHit<T>, mode: SignMode) -> ClosestPointRecord<T> {
        let sign = match mode {
            SignMode::Pseudonormal => {
                let n = self.pseudonormal(t, h.feature);
                if (q - h.point).dot(n) < T::zero() {
                    -T::one()
                } else {
                    T::one()
                }
            }
            SignMode::Winding => {
                if self.winding_number(q) >= T::lit(0.5) {
                    -T::one()
                } else {
                    T::one()
                }
            }
        };
        ClosestPointRecord {
            triangle: t,
            bary: h.bary,
            point: h.point,
            distance: h.distance_squared.sqrt(),
            sign,
            feature: h.feature,
        }
    }

    /// Signed distance using the spatial tree (or brute force on small meshes).
    /// `hint` is a triangle likely to be nearest; it only speeds up the search.
    pub fn query(&self, q: Vec3<T>, mode: SignMode, hint: Option<usize>) -> ClosestPointRecord<T> {
        let (t, h) = match &self.bvh {
            Some(bvh) => self.nearest_tree(bvh, q, hint),
            None => self.nearest_brute(q),
        };
        self.record(q, t, h, mode)
    }

    /// Exhaustive search over all triangles.
    pub fn query_brute_force(&self, q: Vec3<T>, mode: SignMode) -> ClosestPointRecord<T> {
        let (t, h) = self.nearest_brute(q);
        self.record(q, t, h, mode)
    }

    /// Generalized winding number: summed signed solid angles over `4π`.
    pub fn winding_number(&self, q: Vec3<T>) -> T {
        let two = T::lit(2.0);
        let total: T = (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t).map(|p| p - q);
                let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
                let num = a.dot(b.cross(c));
                let den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
                two * num.atan2(den)
            })
            .sum();
        total / (T::lit(4.0) * T::PI())
    }
}

/// Signed distance from `q` to `mesh` (pseudonormal sign).
pub fn signed_distance<T: Real>(q: Vec3<T>, mesh: &TriMesh<T>) -> ClosestPointRecord<T> {
    SdfMesh::new(mesh).query(q, SignMode::Pseudonormal, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;
    use rand::{Rng, SeedableRng};

    fn random_points(n: usize, half: f64, seed: u64) -> Vec<Vec3<f64>> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-half..half),
                    rng.gen_range(-half..half),
                    rng.gen_range(-half..half),
                )
            })
            .collect()
    }

    #[test]
    fn cube_examples() {
        let cube = shapes::cube::<f64>(1.0);
        let r = signed_distance(Vec3::new(1.5, 0.0, 0.0), &cube);
        assert!((r.signed_distance() - 1.0).abs() < 1e-15);
        let r = signed_distance(Vec3::new(0.0, 0.0, 0.0), &cube);
        assert!((r.signed_distance() + 0.5).abs() < 1e-15);
        let r = signed_distance(Vec3::new(0.5, 0.5, 0.5), &cube);
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.signed_distance(), 0.0);
        // corner region uses the vertex pseudonormal
        let r = signed_distance(Vec3::new(0.8, 0.9, 0.7), &cube);
        assert!(r.sign > 0.0 && matches!(r.feature, Feature::Vertex(_)));
        let r = signed_distance(Vec3::new(0.45, 0.48, 0.0), &cube);
        assert!(r.sign < 0.0);
    }

    #[test]
    fn record_invariants_and_tree_equals_brute_force() {
        for (mesh, half) in [
            (shapes::icosphere::<f64>(2, 1.0), 1.6),
            (shapes::open_box::<f64>(1.0, 4), 1.0),
            (shapes::bar::<f64>(4.0, 0.5, 20, 2), 2.2),
        ] {
            let sdf = SdfMesh::new(&mesh);
            for (i, q) in random_points(500, half, 17).into_iter().enumerate() {
                let hint = Some((i * 31) % mesh.triangle_count());
                for mode in [SignMode::Pseudonormal, SignMode::Winding] {
                    let a = sdf.query(q, mode, hint);
                    let b = sdf.query_brute_force(q, mode);
                    assert_eq!(a, b);
                }
                let r = sdf.query(q, SignMode::Pseudonormal, None);
                let [v0, v1, v2] = mesh.triangles()[r.triangle].map(|k| mesh.vertices()[k]);
                let c = v0 * r.bary[0] + v1 * r.bary[1] + v2 * r.bary[2];
                assert!((c - r.point).norm() <= 1e-12);
                assert!(((q - r.point).norm() - r.distance).abs() <= 1e-12);
                assert!(r.bary.iter().all(|&b| (0.0..=1.0).contains(&b)));
            }
        }
    }

    #[test]
    fn sphere_sign_matches_analytic() {
        let mesh = shapes::icosphere::<f64>(2, 1.0);
        let max_edge = mesh
            .triangles()
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (mesh.vertices()[a] - mesh.vertices()[b]).norm())
            .fold(0.0, f64::max);
        let sdf = SdfMesh::new(&mesh);
        let mut checked = 0;
        for q in random_points(2000, 1.8, 5) {
            let r = q.norm();
            if (r - 1.0).abs() <= 2.0 * max_edge {
                continue;
            }
            let expected = if r < 1.0 { -1.0 } else { 1.0 };
            assert_eq!(sdf.query(q, SignMode::Pseudonormal, None).sign, expected);
            assert_eq!(sdf.query(q, SignMode::Winding, None).sign, expected);
            checked += 1;
        }
        assert!(checked > 500);
    }

    #[test]
    fn winding_number_values() {
        let sdf = SdfMesh::new(&shapes::cube::<f64>(1.0));
        assert!((sdf.winding_number(Vec3::zero()) - 1.0).abs() < 1e-12);
        assert!(sdf.winding_number(Vec3::new(3.0, 0.0, 0.0)).abs() < 1e-12);
        // an open box still classifies its interior
        let open = SdfMesh::new(&shapes::open_box::<f64>(1.0, 2));
        let w = open.winding_number(Vec3::new(0.0, 0.0, -0.2));
        assert!(w > 0.5 && w < 1.0);
    }

    #[test]
    fn one_lipschitz() {
        let mesh = shapes::icosphere::<f64>(2, 1.0);
        let sdf = SdfMesh::new(&mesh);
        let pts = random_points(600, 1.5, 23);
        for pair in pts.chunks(2) {
            let a = sdf.query(pair[0], SignMode::Pseudonormal, None).signed_distance();
            let b = sdf.query(pair[1], SignMode::Pseudonormal, None).signed_distance();
            assert!((a - b).abs() <= (pair[0] - pair[1]).norm() + 1e-12);
        }
    }

    #[test]
    fn sign_mode_parsing() {
        assert_eq!("winding".parse::<SignMode>().unwrap(), SignMode::Winding);
        assert_eq!(SignMode::Pseudonormal.to_string(), "pseudonormal");
        assert!("other".parse::<SignMode>().is_err());
    }
}
