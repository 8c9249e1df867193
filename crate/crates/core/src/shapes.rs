//! Procedural test meshes.

use std::collections::HashMap;

use crate::geometry::Vec3;
use crate::mesh::TriMesh;
use crate::scalar::Real;

/// Subdivided icosahedron projected to a sphere of the given radius.
/// `subdivisions` of 0, 1, 2, 3 give 12, 42, 162, 642 vertices.
pub fn icosphere<T: Real>(subdivisions: usize, radius: T) -> TriMesh<T> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<[f64; 3]> = vec![
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let unit = |p: [f64; 3]| {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        [p[0] / n, p[1] / n, p[2] / n]
    };
    for v in &mut verts {
        *v = unit(*v);
    }
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(unit([
                    (p[0] + q[0]) * 0.5,
                    (p[1] + q[1]) * 0.5,
                    (p[2] + q[2]) * 0.5,
                ]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let r = radius;
    let vertices = verts
        .iter()
        .map(|p| Vec3::new(T::lit(p[0]) * r, T::lit(p[1]) * r, T::lit(p[2]) * r))
        .collect();
    TriMesh::new(vertices, faces).expect("icosphere is valid")
}

/// Axis-aligned box centered at the origin with `size` extents and
/// `divisions` grid cells per axis. Faces listed in `skip` (index
/// `2*axis + side`, side 1 = positive) are omitted, leaving holes.
pub fn grid_box<T: Real>(size: Vec3<T>, divisions: [usize; 3], skip: &[usize]) -> TriMesh<T> {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let half = size * T::lit(0.5);
    let mut vid = |g: [usize; 3], vertices: &mut Vec<Vec3<T>>| {
        *index.entry(g).or_insert_with(|| {
            let coord = |a: usize| {
                let f = T::from_count(g[a]) / T::from_count(divisions[a]);
                -half[a] + size[a] * f
            };
            vertices.push(Vec3::new(coord(0), coord(1), coord(2)));
            vertices.len() - 1
        })
    };
    for axis in 0..3 {
        let (b, c) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            if skip.contains(&(2 * axis + side)) {
                continue;
            }
            for u in 0..divisions[b] {
                for v in 0..divisions[c] {
                    let corner = |du: usize, dv: usize| {
                        let mut g = [0; 3];
                        g[axis] = side * divisions[axis];
                        g[b] = u + du;
                        g[c] = v + dv;
                        g
                    };
                    let q = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
                    let ids: Vec<usize> = q.iter().map(|&g| vid(g, &mut vertices)).collect();
                    if side == 1 {
                        triangles.push([ids[0], ids[1], ids[2]]);
                        triangles.push([ids[0], ids[2], ids[3]]);
                    } else {
                        triangles.push([ids[0], ids[2], ids[1]]);
                        triangles.push([ids[0], ids[3], ids[2]]);
                    }
                }
            }
        }
    }
    TriMesh::new(vertices, triangles).expect("grid box is valid")
}

/// Closed cube with the given edge length, 12 triangles.
pub fn cube<T: Real>(edge: T) -> TriMesh<T> {
    grid_box(Vec3::splat(edge), [1, 1, 1], &[])
}

/// Cube with its +z face removed.
pub fn open_box<T: Real>(edge: T, divisions: usize) -> TriMesh<T> {
    grid_box(Vec3::splat(edge), [divisions; 3], &[5])
}

/// Square-section bar along x: `length` long, `width` wide, with
/// `segments` cells along its length and `ring` cells across each side.
pub fn bar<T: Real>(length: T, width: T, segments: usize, ring: usize) -> TriMesh<T> {
    grid_box(Vec3::new(length, width, width), [segments, ring, ring], &[])
}

/// Bends a point of an x-aligned bar of `length` into a circular arc in
/// the xy-plane subtending `angle` radians; the bar center stays fixed.
pub fn bend_point<T: Real>(p: Vec3<T>, length: T, angle: T) -> Vec3<T> {
    if angle == T::zero() {
        return p;
    }
    let radius = length / angle;
    let phi = p.x / radius;
    let r = radius - p.y;
    Vec3::new(r * phi.sin(), radius - r * phi.cos(), p.z)
}

pub fn bend<T: Real>(mesh: &TriMesh<T>, length: T, angle: T) -> TriMesh<T> {
    mesh.map_vertices(|p| bend_point(p, length, angle))
}
