//! Procedural test worlds: a textured sphere plus a few boxes floating in
//! empty space inside `[-1, 1]^3`.
//!
//! Randomness comes from ChaCha8 seeded through `seed_from_u64`, a
//! counter-based stream cipher generator with a published reference, so
//! scenes are reproducible from `(plan, seed)` alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GaussianCloud, GaussianPoint, GridLevel, Mlp, SceneKind, SceneRep, VoxelGrid};
use crate::geom::Vec3;

const WORLD_HALF: f64 = 1.0;
const SIGMA_MAX: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeClass {
    Tiny,
    Small,
}

impl SizeClass {
    fn vertices_per_axis(self) -> usize {
        match self {
            SizeClass::Tiny => 33,
            SizeClass::Small => 65,
        }
    }

    fn points(self) -> usize {
        match self {
            SizeClass::Tiny => 4096,
            SizeClass::Small => 16384,
        }
    }
}

impl std::str::FromStr for SizeClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tiny" => Ok(Self::Tiny),
            "small" => Ok(Self::Small),
            other => Err(format!("unknown size class `{other}`")),
        }
    }
}

/// Everything that determines a generated scene.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenePlan {
    pub kind: SceneKind,
    pub seed: u64,
    pub size: SizeClass,
    pub channels: usize,
    pub hidden: usize,
    /// Number of hierarchical grid levels (structured only).
    pub levels: usize,
}

impl ScenePlan {
    pub fn new(kind: SceneKind, seed: u64, size: SizeClass) -> Self {
        Self { kind, seed, size, channels: 32, hidden: 32, levels: 1 }
    }
}

pub fn generate_scene(plan: &ScenePlan) -> SceneRep {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let world = World::random(&mut rng);
    match plan.kind {
        SceneKind::Structured => SceneRep::Structured(build_grid(&world, plan, &mut rng)),
        SceneKind::Unstructured => SceneRep::Unstructured(build_cloud(&world, plan.size.points(), &mut rng)),
    }
}

enum Shape {
    Sphere { center: Vec3, radius: f64 },
    Box { center: Vec3, half: Vec3 },
}

impl Shape {
    fn sdf(&self, p: &Vec3) -> f64 {
        match self {
            Shape::Sphere { center, radius } => (p - center).norm() - radius,
            Shape::Box { center, half } => {
                let q = (p - center).abs() - half;
                let outside = q.map(|v| v.max(0.0)).norm();
                outside + q.max().min(0.0)
            }
        }
    }

    fn area(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => 4.0 * std::f64::consts::PI * radius * radius,
            Shape::Box { half, .. } => 8.0 * (half.x * half.y + half.y * half.z + half.x * half.z),
        }
    }

    fn sample_surface(&self, rng: &mut ChaCha8Rng) -> Vec3 {
        match self {
            Shape::Sphere { center, radius } => loop {
                let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                let n = d.norm();
                if n > 1e-3 && n <= 1.0 {
                    return center + d / n * *radius;
                }
            },
            Shape::Box { center, half } => {
                let faces = [half.y * half.z, half.x * half.z, half.x * half.y];
                let total = faces.iter().sum::<f64>();
                let mut pick = rng.random_range(0.0..total);
                let mut axis = 2;
                for (a, &w) in faces.iter().enumerate() {
                    if pick < w {
                        axis = a;
                        break;
                    }
                    pick -= w;
                }
                let mut local = Vec3::new(
                    rng.random_range(-half.x..half.x),
                    rng.random_range(-half.y..half.y),
                    rng.random_range(-half.z..half.z),
                );
                local[axis] = if rng.random_bool(0.5) { half[axis] } else { -half[axis] };
                center + local
            }
        }
    }
}

struct Material {
    base: [f64; 3],
    accent: [f64; 3],
    freq: Vec3,
    phase: f64,
}

impl Material {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut c = || [rng.random_range(0.15..0.85), rng.random_range(0.15..0.85), rng.random_range(0.15..0.85)];
        let base = c();
        let accent = c();
        Self {
            base,
            accent,
            freq: Vec3::new(rng.random_range(1.5..3.5), rng.random_range(1.5..3.5), rng.random_range(1.5..3.5)),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    /// Low-frequency banded texture evaluated in world space.
    fn color(&self, p: &Vec3) -> [f64; 3] {
        let s = 0.5 + 0.5 * (p.component_mul(&self.freq).sum() * std::f64::consts::PI + self.phase).sin();
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (self.base[i] * (1.0 - s) + self.accent[i] * s).clamp(0.05, 0.95);
        }
        out
    }
}

struct World {
    shapes: Vec<(Shape, Material)>,
}

impl World {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        let mut shapes = Vec::new();
        let center = Vec3::new(rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
        shapes.push((Shape::Sphere { center, radius: rng.random_range(0.35..0.5) }, Material::random(rng)));
        let boxes = rng.random_range(2..=3);
        for _ in 0..boxes {
            let half = Vec3::new(rng.random_range(0.1..0.25), rng.random_range(0.1..0.25), rng.random_range(0.1..0.25));
            let mut c;
            loop {
                c = Vec3::new(rng.random_range(-0.65..0.65), rng.random_range(-0.65..0.65), rng.random_range(-0.65..0.65));
                if (c - center).norm() > 0.6 {
                    break;
                }
            }
            shapes.push((Shape::Box { center: c, half }, Material::random(rng)));
        }
        Self { shapes }
    }

    /// Signed distance and the material of the nearest shape.
    fn query(&self, p: &Vec3) -> (f64, &Material) {
        let mut best = (f64::INFINITY, &self.shapes[0].1);
        for (shape, mat) in &self.shapes {
            let d = shape.sdf(p);
            if d < best.0 {
                best = (d, mat);
            }
        }
        best
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Features: channel 0 is the density pre-activation, channels 1..=3 the
/// color logits, the rest low-amplitude noise read by the extra hidden
/// units. The MLP routes the color logits through `relu(x) - relu(-x)`, so
/// it reproduces the surface colors exactly up to the noise term.
fn build_grid(world: &World, plan: &ScenePlan, rng: &mut ChaCha8Rng) -> VoxelGrid {
    let c = plan.channels.max(4);
    let hidden = plan.hidden.max(6);
    let levels = plan.levels.max(1);
    let fine = plan.size.vertices_per_axis();
    let extent = 2.0 * WORLD_HALF;
    let ramp = extent / (fine - 1) as f64;
    let origin = Vec3::repeat(-WORLD_HALF);

    // Coarse levels halve the cell count; the shares sum to one so the
    // level sum approximates the single-level field.
    let share = 1.0 / levels as f64;
    let mut grid_levels = Vec::with_capacity(levels);
    for l in 0..levels {
        let cells = (fine - 1) >> (levels - 1 - l);
        let n = cells.max(1) + 1;
        let cell_size = extent / cells.max(1) as f64;
        let mut features = vec![0f32; n * n * n * c];
        for z in 0..n {
            for y in 0..n {
                for x in 0..n {
                    let p = origin + Vec3::new(x as f64, y as f64, z as f64) * cell_size;
                    let (sdf, mat) = world.query(&p);
                    let color = mat.color(&p);
                    let id = x + n * (y + n * z);
                    let f = &mut features[id * c..(id + 1) * c];
                    f[0] = (share * SIGMA_MAX * (0.5 - sdf / ramp).clamp(-1.0, 1.0)) as f32;
                    for i in 0..3 {
                        f[1 + i] = (share * logit(color[i])) as f32;
                    }
                    for v in f.iter_mut().skip(4) {
                        *v = (share * rng.random_range(-0.5..0.5)) as f32;
                    }
                }
            }
        }
        grid_levels.push(GridLevel { dims: [n; 3], cell_size, origin, features });
    }

    let mut mlp = Mlp::zeros(c, hidden);
    for i in 0..3 {
        mlp.w1[i * c + 1 + i] = 1.0;
        mlp.w1[(3 + i) * c + 1 + i] = -1.0;
        mlp.w2[i * hidden + i] = 1.0;
        mlp.w2[i * hidden + 3 + i] = -1.0;
    }
    let noise_scale = 1.0 / ((c - 4).max(1) as f64).sqrt();
    for h in 6..hidden {
        for ch in 4..c {
            mlp.w1[h * c + ch] = (noise_scale * rng.random_range(-1.0..1.0)) as f32;
        }
        for o in 0..3 {
            mlp.w2[o * hidden + h] = rng.random_range(-0.01..0.01) as f32;
        }
    }
    mlp.w_sigma[0] = 1.0;
    VoxelGrid { channels: c, levels: grid_levels, mlp }
}

fn build_cloud(world: &World, count: usize, rng: &mut ChaCha8Rng) -> GaussianCloud {
    let total_area: f64 = world.shapes.iter().map(|(s, _)| s.area()).sum();
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.random_range(0.0..total_area);
        let mut chosen = &world.shapes[0];
        for entry in &world.shapes {
            if pick < entry.0.area() {
                chosen = entry;
                break;
            }
            pick -= entry.0.area();
        }
        let p = chosen.0.sample_surface(rng);
        let color = chosen.1.color(&p);
        points.push(GaussianPoint {
            position: [p.x as f32, p.y as f32, p.z as f32],
            scale: rng.random_range(0.025..0.04) as f32,
            opacity: rng.random_range(0.6..0.95) as f32,
            color: [color[0] as f32, color[1] as f32, color[2] as f32],
        });
    }
    GaussianCloud { points }
}

/// Gaussian blobs scattered around a few cluster centers plus a sparse
/// uniform background; used to exercise octree merging.
pub fn generate_clustered_cloud(seed: u64, count: usize, clusters: usize) -> GaussianCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers: Vec<Vec3> = (0..clusters.max(1))
        .map(|_| Vec3::new(rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7), rng.random_range(-0.7..0.7)))
        .collect();
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let p = if i % 10 == 0 {
            Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        } else {
            let c = centers[rng.random_range(0..centers.len())];
            let off = Vec3::new(rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08));
            (c + off).map(|v| v.clamp(-1.0, 1.0))
        };
        points.push(GaussianPoint {
            position: [p.x as f32, p.y as f32, p.z as f32],
            scale: rng.random_range(0.01..0.03) as f32,
            opacity: rng.random_range(0.3..1.0) as f32,
            color: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
        });
    }
    GaussianCloud { points }
}
