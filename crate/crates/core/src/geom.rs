//! Small geometric helpers shared by the renderers and the warper.

use nalgebra::{Matrix3, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Axis-aligned box `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn grow(&mut self, p: &Vec3) {
        for i in 0..3 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        let mut out = *self;
        out.grow(&other.min);
        out.grow(&other.max);
        out
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    /// Slab test. Returns the parametric interval `[t0, t1]` of the ray
    /// inside the box, clipped to `t >= 0`.
    pub fn intersect_ray(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i] == 0.0 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let inv = 1.0 / dir[i];
            let mut near = (self.min[i] - origin[i]) * inv;
            let mut far = (self.max[i] - origin[i]) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            t0 = t0.max(near);
            t1 = t1.min(far);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}

/// Angle between two (not necessarily unit) vectors, robust near 0 and pi.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Nearest integer with ties toward negative infinity.
pub fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ray_box_hit_and_miss() {
        let b = Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0));
        let (t0, t1) = b
            .intersect_ray(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(1.0, 0.0, 0.0))
            .unwrap();
        assert!((t0 - 2.0).abs() < 1e-12 && (t1 - 4.0).abs() < 1e-12);
        assert!(b
            .intersect_ray(&Vec3::new(-3.0, 2.0, 0.0), &Vec3::new(1.0, 0.0, 0.0))
            .is_none());
        // pointing away
        assert!(b
            .intersect_ray(&Vec3::new(-3.0, 0.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0))
            .is_none());
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(round_half_down(2.5), 2.0);
        assert_eq!(round_half_down(2.500001), 3.0);
        assert_eq!(round_half_down(-0.5), -1.0);
        assert_eq!(round_half_down(3.0), 3.0);
        assert_eq!(round_half_down(2.49), 2.0);
    }
}
