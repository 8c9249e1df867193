//! Small fixed-size vector and box types.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn from_slice(s: &[T]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    #[inline]
    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Unit vector, or zero when the norm vanishes.
    #[inline]
    pub fn normalized(self) -> Self {
        let n = self.norm();
        if n > T::zero() {
            self * (T::one() / n)
        } else {
            Self::zero()
        }
    }

    #[inline]
    pub fn min(self, o: Self) -> Self {
        Self::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    #[inline]
    pub fn max(self, o: Self) -> Self {
        Self::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
        self.z += o.z;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    #[inline]
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Real> Aabb<T> {
    /// An inverted box that any `grow` call will replace.
    pub fn empty() -> Self {
        Self {
            min: Vec3::splat(T::infinity()),
            max: Vec3::splat(T::neg_infinity()),
        }
    }

    pub fn from_points<'a>(pts: impl IntoIterator<Item = &'a Vec3<T>>) -> Self {
        let mut b = Self::empty();
        for p in pts {
            b.grow(*p);
        }
        b
    }

    #[inline]
    pub fn grow(&mut self, p: Vec3<T>) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    #[inline]
    pub fn union(&self, o: &Self) -> Self {
        Self {
            min: self.min.min(o.min),
            max: self.max.max(o.max),
        }
    }

    #[inline]
    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    #[inline]
    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn diagonal(&self) -> T {
        self.extent().norm()
    }

    pub fn longest_edge(&self) -> T {
        let e = self.extent();
        e.x.max(e.y).max(e.z)
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Expands every side by `amount`.
    pub fn padded(&self, amount: T) -> Self {
        Self {
            min: self.min - Vec3::splat(amount),
            max: self.max + Vec3::splat(amount),
        }
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.y >= self.min.y
            && p.z >= self.min.z
            && p.x <= self.max.x
            && p.y <= self.max.y
            && p.z <= self.max.z
    }

    /// Squared distance from `p` to the box (zero inside).
    #[inline]
    pub fn distance_squared(&self, p: Vec3<T>) -> T {
        let dx = (self.min.x - p.x).max(T::zero()).max(p.x - self.max.x);
        let dy = (self.min.y - p.y).max(T::zero()).max(p.y - self.max.y);
        let dz = (self.min.z - p.z).max(T::zero()).max(p.z - self.max.z);
        dx * dx + dy * dy + dz * dz
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat3<T> {
    pub rows: [[T; 3]; 3],
}

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        Self::diagonal(T::one(), T::one(), T::one())
    }

    pub fn diagonal(a: T, b: T, c: T) -> Self {
        let z = T::zero();
        Self {
            rows: [[a, z, z], [z, b, z], [z, z, c]],
        }
    }

    /// Right-handed rotation by `angle` radians about a coordinate axis (0, 1 or 2).
    pub fn rotation(axis: usize, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let (o, z) = (T::one(), T::zero());
        let rows = match axis {
            0 => [[o, z, z], [z, c, -s], [z, s, c]],
            1 => [[c, z, s], [z, o, z], [-s, z, c]],
            _ => [[c, -s, z], [s, c, z], [z, z, o]],
        };
        Self { rows }
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        let r = &self.rows;
        Vec3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut rows = [[T::zero(); 3]; 3];
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = (0..3).map(|k| self.rows[i][k] * o.rows[k][j]).sum();
            }
        }
        Self { rows }
    }
}
