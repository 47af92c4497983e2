//! Scene representations consumed by every renderer.
//!
//! A scene is either a structured voxel grid (per-vertex feature vectors
//! decoded by a tiny MLP) or an unstructured cloud of isotropic Gaussians.

mod generate;
mod io;

pub use generate::{generate_clustered_cloud, generate_scene, ScenePlan, SizeClass};
pub use io::{load_scene, read_scene, save_scene, write_scene, SceneIoError};

use crate::geom::{Aabb, Vec3};

/// Bytes per feature channel in accelerator memory (16-bit fixed point).
pub const FEATURE_BYTES_PER_CHANNEL: usize = 2;

/// Values stored per Gaussian point: position, scale, opacity, color.
pub const POINT_VALUES: usize = 8;

/// Bytes per Gaussian point in accelerator memory.
pub const POINT_BYTES: usize = POINT_VALUES * FEATURE_BYTES_PER_CHANNEL;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Structured,
    Unstructured,
}

impl std::str::FromStr for SceneKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "structured" => Ok(Self::Structured),
            "unstructured" => Ok(Self::Unstructured),
            other => Err(format!("unknown scene kind `{other}`")),
        }
    }
}

/// One dense level of vertex features. Vertex `(x, y, z)` has id
/// `x + nx * (y + ny * z)`; its channels are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLevel {
    pub dims: [usize; 3],
    pub cell_size: f64,
    pub origin: Vec3,
    pub features: Vec<f32>,
}

impl GridLevel {
    pub fn vertex_count(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    #[inline]
    pub fn vertex_id(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn vertex_coords(&self, id: usize) -> [usize; 3] {
        let x = id % self.dims[0];
        let yz = id / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    pub fn feature(&self, id: usize, channels: usize) -> &[f32] {
        &self.features[id * channels..(id + 1) * channels]
    }

    pub fn bounds(&self) -> Aabb {
        let ext = Vec3::new(
            (self.dims[0] - 1) as f64,
            (self.dims[1] - 1) as f64,
            (self.dims[2] - 1) as f64,
        ) * self.cell_size;
        Aabb::new(self.origin, self.origin + ext)
    }

    /// Containing cell and local coordinates in `[0, 1]^3`. Points on or just
    /// outside the boundary clamp into the nearest cell.
    pub fn locate(&self, p: &Vec3) -> ([usize; 3], [f64; 3]) {
        let mut cell = [0usize; 3];
        let mut local = [0f64; 3];
        for a in 0..3 {
            let g = (p[a] - self.origin[a]) / self.cell_size;
            let max_cell = (self.dims[a] - 2) as f64;
            let c = g.floor().clamp(0.0, max_cell);
            cell[a] = c as usize;
            local[a] = (g - c).clamp(0.0, 1.0);
        }
        (cell, local)
    }

    /// Vertex ids of a cell's eight corners, corner `k` at offset
    /// `(k & 1, (k >> 1) & 1, (k >> 2) & 1)`.
    pub fn cell_corners(&self, cell: [usize; 3]) -> [usize; 8] {
        let mut out = [0usize; 8];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.vertex_id(cell[0] + (k & 1), cell[1] + ((k >> 1) & 1), cell[2] + ((k >> 2) & 1));
        }
        out
    }

    pub fn cell_id(&self, cell: [usize; 3]) -> usize {
        cell[0] + (self.dims[0] - 1) * (cell[1] + (self.dims[1] - 1) * cell[2])
    }
}

/// Two-layer color perceptron with a linear density head:
/// `sigma = relu(w_sigma . f + b_sigma)`,
/// `c = sigmoid(W2 relu(W1 f + b1) + b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub channels: usize,
    pub hidden: usize,
    /// `hidden x channels`, row-major.
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// `3 x hidden`, row-major.
    pub w2: Vec<f32>,
    pub b2: [f32; 3],
    pub w_sigma: Vec<f32>,
    pub b_sigma: f32,
}

impl Mlp {
    pub fn zeros(channels: usize, hidden: usize) -> Self {
        Self {
            channels,
            hidden,
            w1: vec![0.0; hidden * channels],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 3 * hidden],
            b2: [0.0; 3],
            w_sigma: vec![0.0; channels],
            b_sigma: 0.0,
        }
    }

    pub fn weight_bytes(&self) -> usize {
        (self.w1.len() + self.b1.len() + self.w2.len() + 3 + self.w_sigma.len() + 1) * FEATURE_BYTES_PER_CHANNEL
    }

    fn all_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .chain(&self.w_sigma)
            .chain(std::iter::once(&self.b_sigma))
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub channels: usize,
    /// Coarse to fine; every level spans the same box.
    pub levels: Vec<GridLevel>,
    pub mlp: Mlp,
}

impl VoxelGrid {
    pub fn bounds(&self) -> Aabb {
        self.levels[0].bounds()
    }

    pub fn finest(&self) -> &GridLevel {
        self.levels.last().expect("grid has at least one level")
    }

    pub fn feature_bytes(&self) -> usize {
        self.levels.iter().map(|l| l.vertex_count()).sum::<usize>() * self.channels * FEATURE_BYTES_PER_CHANNEL
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.channels < 4 {
            return Err(format!("need at least 4 channels, got {}", self.channels));
        }
        if self.levels.is_empty() {
            return Err("grid has no levels".into());
        }
        if self.mlp.channels != self.channels {
            return Err("MLP input width differs from channel count".into());
        }
        let m = &self.mlp;
        if m.w1.len() != m.hidden * m.channels || m.b1.len() != m.hidden || m.w2.len() != 3 * m.hidden || m.w_sigma.len() != m.channels {
            return Err("MLP tensor shapes are inconsistent".into());
        }
        if !m.all_finite() {
            return Err("MLP has non-finite weights".into());
        }
        for (i, level) in self.levels.iter().enumerate() {
            if level.dims.iter().any(|&d| d < 2) {
                return Err(format!("level {i} has fewer than 2 vertices along an axis"));
            }
            if !(level.cell_size > 0.0 && level.cell_size.is_finite()) {
                return Err(format!("level {i} has invalid cell size {}", level.cell_size));
            }
            if level.features.len() != level.vertex_count() * self.channels {
                return Err(format!("level {i} feature payload has wrong length"));
            }
            if level.features.iter().any(|v| !v.is_finite()) {
                return Err(format!("level {i} has non-finite features"));
            }
            if i > 0 && (0..3).any(|a| level.dims[a] < self.levels[i - 1].dims[a]) {
                return Err(format!("level {i} is coarser than level {}", i - 1));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPoint {
    pub position: [f32; 3],
    pub scale: f32,
    pub opacity: f32,
    pub color: [f32; 3],
}

impl GaussianPoint {
    pub fn position(&self) -> Vec3 {
        Vec3::new(self.position[0] as f64, self.position[1] as f64, self.position[2] as f64)
    }

    /// Box containing the point's 3-sigma support.
    pub fn support(&self) -> Aabb {
        let p = self.position();
        let r = Vec3::repeat(3.0 * self.scale as f64);
        Aabb::new(p - r, p + r)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GaussianCloud {
    pub points: Vec<GaussianPoint>,
}

impl GaussianCloud {
    pub fn validate(&self) -> Result<(), String> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.scale > 0.0 && p.scale.is_finite()) {
                return Err(format!("point {i} has scale {} (must be > 0)", p.scale));
            }
            if !(p.opacity > 0.0 && p.opacity <= 1.0) {
                return Err(format!("point {i} has opacity {} (must be in (0, 1])", p.opacity));
            }
            if p.position.iter().chain(&p.color).any(|v| !v.is_finite()) {
                return Err(format!("point {i} has non-finite values"));
            }
        }
        Ok(())
    }

    /// Bounds of the point centers.
    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for p in &self.points {
            b.grow(&p.position());
        }
        b
    }

    pub fn bytes(&self) -> usize {
        self.points.len() * POINT_BYTES
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneRep {
    Structured(VoxelGrid),
    Unstructured(GaussianCloud),
}

impl SceneRep {
    pub fn kind(&self) -> SceneKind {
        match self {
            SceneRep::Structured(_) => SceneKind::Structured,
            SceneRep::Unstructured(_) => SceneKind::Unstructured,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            SceneRep::Structured(g) => g.validate(),
            SceneRep::Unstructured(c) => c.validate(),
        }
    }

    /// Box outside of which nothing can contribute to a pixel.
    pub fn bounds(&self) -> Aabb {
        match self {
            SceneRep::Structured(g) => g.bounds(),
            SceneRep::Unstructured(c) => {
                let mut b = Aabb::empty();
                for p in &c.points {
                    b = b.union(&p.support());
                }
                b
            }
        }
    }

    pub fn as_grid(&self) -> Option<&VoxelGrid> {
        match self {
            SceneRep::Structured(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_cloud(&self) -> Option<&GaussianCloud> {
        match self {
            SceneRep::Unstructured(c) => Some(c),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn level(n: usize) -> GridLevel {
        GridLevel { dims: [n; 3], cell_size: 1.0, origin: Vec3::zeros(), features: vec![0.0; n * n * n * 4] }
    }

    #[test]
    fn locate_clamps_to_boundary_cells() {
        let l = level(3);
        let (cell, local) = l.locate(&Vec3::new(2.0, 0.0, 1.5));
        assert_eq!(cell, [1, 0, 1]);
        assert_eq!(local, [1.0, 0.0, 0.5]);
    }

    #[test]
    fn corner_ordering() {
        let l = level(3);
        let c = l.cell_corners([1, 0, 1]);
        assert_eq!(l.vertex_coords(c[0]), [1, 0, 1]);
        assert_eq!(l.vertex_coords(c[1]), [2, 0, 1]);
        assert_eq!(l.vertex_coords(c[2]), [1, 1, 1]);
        assert_eq!(l.vertex_coords(c[7]), [2, 1, 2]);
    }

    #[test]
    fn grid_validation_catches_coarser_fine_level() {
        let grid = VoxelGrid { channels: 4, levels: vec![level(3), level(2)], mlp: Mlp::zeros(4, 2) };
        assert!(grid.validate().is_err());
        let grid = VoxelGrid { channels: 4, levels: vec![level(2), level(3)], mlp: Mlp::zeros(4, 2) };
        assert!(grid.validate().is_ok());
    }

    #[test]
    fn cloud_validation() {
        let mut p = GaussianPoint { position: [0.0; 3], scale: 0.1, opacity: 1.0, color: [0.5; 3] };
        assert!(GaussianCloud { points: vec![p] }.validate().is_ok());
        p.opacity = 0.0;
        assert!(GaussianCloud { points: vec![p] }.validate().is_err());
        p.opacity = 0.5;
        p.scale = 0.0;
        assert!(GaussianCloud { points: vec![p] }.validate().is_err());
    }
}
