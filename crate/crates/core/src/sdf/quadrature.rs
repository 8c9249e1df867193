use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

use super::{SdfMesh, SignMode};
use crate::error::{invalid, RegError, Result};
use crate::geometry::{Aabb, Vec3};
use crate::mesh::{joint_bounding_box, TriMesh};
use crate::scalar::Real;

/// Fixed sample points and the target signed distance at each of them.
#[derive(Debug, Clone)]
pub struct QuadratureSet<T> {
    points: Vec<Vec3<T>>,
    target: Vec<T>,
    resolution: [usize; 3],
    bounds: Aabb<T>,
}

impl<T: Real> QuadratureSet<T> {
    /// Arbitrary point set with given target values (no lattice metadata).
    pub fn from_parts(points: Vec<Vec3<T>>, target: Vec<T>) -> Result<Self> {
        if points.len() != target.len() {
            return Err(invalid(format!(
                "{} quadrature points but {} target values",
                points.len(),
                target.len()
            )));
        }
        if target.iter().any(|g| !g.is_finite()) {
            return Err(invalid("target values must be finite"));
        }
        let bounds = Aabb::from_points(&points);
        Ok(Self {
            resolution: [points.len(), 1, 1],
            points,
            target,
            bounds,
        })
    }

    pub fn points(&self) -> &[Vec3<T>] {
        &self.points
    }

    /// Target signed distances, one per point.
    pub fn target(&self) -> &[T] {
        &self.target
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    pub fn bounds(&self) -> Aabb<T> {
        self.bounds
    }

    /// Same points and values under a rigid or similarity motion of space.
    pub fn map_points(&self, f: impl Fn(Vec3<T>) -> Vec3<T>) -> Self {
        let points: Vec<_> = self.points.iter().map(|&p| f(p)).collect();
        Self {
            bounds: Aabb::from_points(&points),
            points,
            target: self.target.clone(),
            resolution: self.resolution,
        }
    }

    /// Dumps target values as little-endian `f64`, x fastest, and a text
    /// header next to it at `<path>.hdr`.
    pub fn write_volume(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |p: &Path| {
            let p = p.to_path_buf();
            move |source| RegError::Io { path: p, source }
        };
        let mut bytes = Vec::with_capacity(8 * self.target.len());
        for g in &self.target {
            bytes.extend_from_slice(&g.to_f64_lossy().to_le_bytes());
        }
        std::fs::write(path, bytes).map_err(io(path))?;
        let hdr_path = {
            let mut s = path.as_os_str().to_owned();
            s.push(".hdr");
            std::path::PathBuf::from(s)
        };
        let mut hdr = std::fs::File::create(&hdr_path).map_err(io(&hdr_path))?;
        let [rx, ry, rz] = self.resolution;
        let (lo, hi) = (self.bounds.min, self.bounds.max);
        writeln!(
            hdr,
            "resolution {rx} {ry} {rz}\nmin {:.16e} {:.16e} {:.16e}\nmax {:.16e} {:.16e} {:.16e}\ndtype f64le\norder x-fastest",
            lo.x, lo.y, lo.z, hi.x, hi.y, hi.z
        )
        .map_err(io(&hdr_path))
    }
}

/// Inclusive lattice over the padded joint bounding box, with the target
/// signed distance evaluated at every point. Point `(ix, iy, iz)` is stored
/// at index `ix + rx * (iy + ry * iz)`.
pub fn make_quadrature<T: Real>(
    source: &TriMesh<T>,
    target: &TriMesh<T>,
    resolution: [usize; 3],
    pad_fraction: T,
    sign: SignMode,
) -> Result<QuadratureSet<T>> {
    if let Some(r) = resolution.iter().find(|&&r| r < 2) {
        return Err(invalid(format!("grid resolution must be >= 2 per axis, got {r}")));
    }
    let bounds = joint_bounding_box(source, target, pad_fraction)?;
    let [rx, ry, rz] = resolution;
    let coord = |axis: usize, i: usize, r: usize| {
        let t = T::from_count(i) / T::from_count(r - 1);
        bounds.min[axis] + (bounds.max[axis] - bounds.min[axis]) * t
    };
    let mut points = Vec::with_capacity(rx * ry * rz);
    for iz in 0..rz {
        for iy in 0..ry {
            for ix in 0..rx {
                points.push(Vec3::new(coord(0, ix, rx), coord(1, iy, ry), coord(2, iz, rz)));
            }
        }
    }
    let sdf = SdfMesh::new(target);
    let values: Vec<T> = points
        .par_iter()
        .map(|&q| sdf.query(q, sign, None).signed_distance())
        .collect();
    if values.iter().any(|g| !g.is_finite()) {
        return Err(invalid("target signed distance is not finite"));
    }
    Ok(QuadratureSet {
        points,
        target: values,
        resolution,
        bounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes;

    #[test]
    fn corner_lattice() {
        let cube = shapes::cube::<f64>(1.0);
        let q = make_quadrature(&cube, &cube, [2, 2, 2], 0.05, SignMode::Pseudonormal).unwrap();
        assert_eq!(q.len(), 8);
        for p in q.points() {
            for a in 0..3 {
                assert!((p[a].abs() - 0.55).abs() < 1e-15);
            }
        }
        assert_eq!(q.points()[1].x, 0.55);
        assert_eq!(q.points()[2].y, 0.55);
        assert!(q.target().iter().all(|&g| g > 0.0));
    }

    #[test]
    fn odd_lattice_has_center() {
        let cube = shapes::cube::<f64>(1.0);
        let q = make_quadrature(&cube, &cube, [3, 3, 3], 0.05, SignMode::Pseudonormal).unwrap();
        assert_eq!(q.len(), 27);
        assert_eq!(q.points()[13], Vec3::zero());
        assert!((q.target()[13] + 0.5).abs() < 1e-15);
        assert!(make_quadrature(&cube, &cube, [1, 3, 3], 0.05, SignMode::Pseudonormal).is_err());
    }

    #[test]
    fn volume_dump() {
        let cube = shapes::cube::<f64>(1.0);
        let q = make_quadrature(&cube, &cube, [3, 2, 2], 0.0, SignMode::Winding).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.bin");
        q.write_volume(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 8 * 12);
        let first = f64::from_le_bytes(bytes[..8].try_into().unwrap());
        assert_eq!(first, q.target()[0]);
        let hdr = std::fs::read_to_string(dir.path().join("g.bin.hdr")).unwrap();
        assert!(hdr.starts_with("resolution 3 2 2\n"));
    }
}
