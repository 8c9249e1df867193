//! Axis-aligned bounding volume hierarchy over triangles.

use crate::geometry::{Aabb, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone)]
enum Kind {
    Leaf { start: usize, end: usize },
    Inner { left: usize, right: usize },
}

#[derive(Debug, Clone)]
struct Node<T> {
    bounds: Aabb<T>,
    kind: Kind,
}

#[derive(Debug, Clone)]
pub struct Bvh<T> {
    nodes: Vec<Node<T>>,
    order: Vec<usize>,
}

impl<T: Real> Bvh<T> {
    pub fn build(vertices: &[Vec3<T>], triangles: &[[usize; 3]]) -> Self {
        let boxes: Vec<Aabb<T>> = triangles
            .iter()
            .map(|t| Aabb::from_points(t.iter().map(|&i| &vertices[i])))
            .collect();
        let centroids: Vec<Vec3<T>> = boxes.iter().map(|b| b.center()).collect();
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1),
            order: (0..triangles.len()).collect(),
        };
        bvh.build_node(&boxes, &centroids, 0, triangles.len());
        bvh
    }

    fn build_node(&mut self, boxes: &[Aabb<T>], centroids: &[Vec3<T>], start: usize, end: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &t in &self.order[start..end] {
            bounds = bounds.union(&boxes[t]);
            cbounds.grow(centroids[t]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            kind: Kind::Leaf { start, end },
        });
        if end - start <= LEAF_SIZE {
            return id;
        }
        let axis = cbounds.longest_axis();
        let mid = start + (end - start) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis]
                .partial_cmp(&centroids[b][axis])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let left = self.build_node(boxes, centroids, start, mid);
        let right = self.build_node(boxes, centroids, mid, end);
        self.nodes[id].kind = Kind::Inner { left, right };
        id
    }

    /// Visits triangles whose node boxes lie within `bound()` of `p`,
    /// nearest boxes first. `visit` returns the updated squared bound.
    pub fn nearest<F>(&self, p: Vec3<T>, mut best_d2: T, mut visit: F)
    where
        F: FnMut(usize) -> T,
    {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack: Vec<(usize, T)> = Vec::with_capacity(64);
        stack.push((0, self.nodes[0].bounds.distance_squared(p)));
        while let Some((id, d2)) = stack.pop() {
            if d2 > best_d2 {
                continue;
            }
            match self.nodes[id].kind {
                Kind::Leaf { start, end } => {
                    for &t in &self.order[start..end] {
                        best_d2 = visit(t);
                    }
                }
                Kind::Inner { left, right } => {
                    let dl = self.nodes[left].bounds.distance_squared(p);
                    let dr = self.nodes[right].bounds.distance_squared(p);
                    if dl <= dr {
                        stack.push((right, dr));
                        stack.push((left, dl));
                    } else {
                        stack.push((left, dl));
                        stack.push((right, dr));
                    }
                }
            }
        }
    }
}
