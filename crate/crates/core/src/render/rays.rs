use crate::camera::{CameraPose, Intrinsics};
use crate::geom::Vec3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
    pub pixel: (u32, u32),
    /// Camera-space `z` of the unit direction; converts ray distance to depth.
    pub z_per_t: f64,
}

impl Ray {
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Primary ray through pixel position `(u, v)`; pixel centers sit at
/// integer coordinates.
pub fn pixel_ray(pose: &CameraPose, intr: &Intrinsics, u: f64, v: f64, pixel: (u32, u32)) -> Ray {
    let cam = intr.camera_ray(u, v);
    let norm = cam.norm();
    Ray {
        origin: pose.center(),
        direction: (pose.rotation * cam / norm).normalize(),
        pixel,
        z_per_t: 1.0 / norm,
    }
}

/// One ray per pixel, row-major.
pub fn index_rays(pose: &CameraPose, intr: &Intrinsics) -> Vec<Ray> {
    let mut rays = Vec::with_capacity(intr.pixel_count());
    for v in 0..intr.height {
        for u in 0..intr.width {
            rays.push(pixel_ray(pose, intr, u as f64, v as f64, (u as u32, v as u32)));
        }
    }
    rays
}
