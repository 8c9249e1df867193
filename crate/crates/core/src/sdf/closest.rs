//! Closest point on a triangle with barycentric coordinates and the
//! feature (vertex, edge or face interior) it lies on.

use crate::geometry::Vec3;
use crate::scalar::Real;

/// Feature of a triangle containing the closest point. Edge `e` joins
/// corners `e` and `(e + 1) % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Vertex(u8),
    Edge(u8),
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleHit<T> {
    pub bary: [T; 3],
    pub point: Vec3<T>,
    pub distance_squared: T,
    pub feature: Feature,
}

fn hit<T: Real>(p: Vec3<T>, tri: [Vec3<T>; 3], bary: [T; 3], feature: Feature) -> TriangleHit<T> {
    let point = tri[0] * bary[0] + tri[1] * bary[1] + tri[2] * bary[2];
    TriangleHit {
        bary,
        point,
        distance_squared: (p - point).norm_squared(),
        feature,
    }
}

fn on_segment<T: Real>(p: Vec3<T>, tri: [Vec3<T>; 3], e: usize) -> TriangleHit<T> {
    segment_hit(p, tri, e, false)
}

/// Closest point on edge `e`, parameterized from corner `(e + 1) % 3` when
/// `reversed` is set.
pub fn segment_hit<T: Real>(p: Vec3<T>, tri: [Vec3<T>; 3], e: usize, reversed: bool) -> TriangleHit<T> {
    let (i, j) = if reversed { ((e + 1) % 3, e) } else { (e, (e + 1) % 3) };
    let d = tri[j] - tri[i];
    let len2 = d.norm_squared();
    let t = if len2 > T::zero() {
        ((p - tri[i]).dot(d) / len2).max(T::zero()).min(T::one())
    } else {
        T::zero()
    };
    let mut bary = [T::zero(); 3];
    bary[i] = T::one() - t;
    bary[j] = t;
    let feature = if t == T::zero() {
        Feature::Vertex(i as u8)
    } else if t == T::one() {
        Feature::Vertex(j as u8)
    } else {
        Feature::Edge(e as u8)
    };
    let point = tri[i] * bary[i] + tri[j] * bary[j];
    TriangleHit {
        bary,
        point,
        distance_squared: (p - point).norm_squared(),
        feature,
    }
}

/// Voronoi-region closest point query.
pub fn closest_point_on_triangle<T: Real>(p: Vec3<T>, tri: [Vec3<T>; 3]) -> TriangleHit<T> {
    let (o, z) = (T::one(), T::zero());
    let [a, b, c] = tri;
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= z && d2 <= z {
        return hit(p, tri, [o, z, z], Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= z && d4 <= d3 {
        return hit(p, tri, [z, o, z], Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= z && d1 >= z && d3 <= z {
        let v = d1 / (d1 - d3);
        return hit(p, tri, [o - v, v, z], Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= z && d5 <= d6 {
        return hit(p, tri, [z, z, o], Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= z && d2 >= z && d6 <= z {
        let w = d2 / (d2 - d6);
        return hit(p, tri, [o - w, z, w], Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= z && (d4 - d3) >= z && (d5 - d6) >= z {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return hit(p, tri, [z, o - w, w], Feature::Edge(1));
    }
    let sum = va + vb + vc;
    if !(sum > z) || !sum.is_finite() {
        // degenerate triangle: best of its three edges
        let mut best = on_segment(p, tri, 0);
        for e in 1..3 {
            let h = on_segment(p, tri, e);
            if h.distance_squared < best.distance_squared {
                best = h;
            }
        }
        return best;
    }
    let v = (vb / sum).max(z);
    let w = (vc / sum).max(z);
    let u = (o - v - w).max(z);
    let s = u + v + w;
    hit(p, tri, [u / s, v / s, w / s], Feature::Face)
}
