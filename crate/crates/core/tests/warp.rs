use nerfstream_core::camera::{generate_orbit_trajectory, CameraPose, Intrinsics, RigidTransform};
use nerfstream_core::geom::Vec3;
use nerfstream_core::render::{render_frame, RenderOptions};
use nerfstream_core::scene::{generate_scene, SceneKind, SceneRep, ScenePlan, SizeClass};
use nerfstream_core::warp::*;
use nerfstream_core::Frame;
use proptest::prelude::*;

fn psnr(a: &Frame, b: &Frame) -> f64 {
    let mut se = 0.0;
    for (x, y) in a.color.iter().zip(&b.color) {
        for c in 0..3 {
            se += ((x[c] - y[c]) as f64).powi(2);
        }
    }
    let mse = se / (3 * a.len()) as f64;
    if mse == 0.0 { f64::INFINITY } else { 10.0 * (1.0 / mse).log10() }
}

fn scene(kind: SceneKind, seed: u64) -> SceneRep {
    generate_scene(&ScenePlan::new(kind, seed, SizeClass::Tiny))
}

fn orbit(step: f64, n: usize) -> Vec<CameraPose> {
    let t = generate_orbit_trajectory(Vec3::zeros(), 2.5, 30.0, step * 30.0, n).unwrap();
    t.poses().copied().collect()
}

#[test]
fn identity_warp_is_bit_exact() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let s = scene(kind, 5);
        let pose = orbit(0.01, 2)[0];
        let reference = render_frame(&pose, &intr, &s);
        let w = warp_with_probe(&reference, &pose, &pose, &intr, Some(&OccupancyProbe::new(&s)));
        for i in 0..reference.len() {
            if reference.depth[i].is_finite() {
                assert!(w.frame.valid[i]);
                assert_eq!(w.frame.color[i], reference.color[i]);
                assert_eq!(w.frame.depth[i].to_bits(), reference.depth[i].to_bits());
                assert_eq!(w.warp_angle[i], 0.0);
            } else {
                assert!(!w.frame.valid[i]);
            }
        }
        // holes of an identity warp are exactly the background, which the probe must not
        // call geometry-free unless it really is
        let filled = fill_disoccluded(&w, &pose, &intr, &s, &RenderOptions::default());
        assert_eq!(filled.frame.color, reference.color);
    }
}

#[test]
fn empty_mask_copies_warp_and_full_mask_renders() {
    let intr = Intrinsics::square(24);
    let s = scene(SceneKind::Structured, 2);
    let poses = orbit(0.02, 3);
    let reference = render_frame(&poses[0], &intr, &s);
    let full = render_frame(&poses[2], &intr, &s);
    let mut w = warp(&reference, &poses[0], &poses[2], &intr);
    let mut none = w.clone();
    none.disocclusion_mask.iter_mut().for_each(|m| *m = false);
    none.void_mask = none.frame.valid.iter().map(|v| !v).collect();
    let f = fill_disoccluded(&none, &poses[2], &intr, &s, &RenderOptions::default());
    for i in 0..f.frame.len() {
        if w.frame.valid[i] {
            assert_eq!(f.frame.color[i], w.frame.color[i]);
        }
    }
    w.disocclusion_mask = vec![true; w.frame.len()];
    w.void_mask = vec![false; w.frame.len()];
    let f = fill_disoccluded(&w, &poses[2], &intr, &s, &RenderOptions::default());
    assert_eq!(f.frame.color, full.color);
    assert_eq!(f.frame.depth, full.depth);
}

#[test]
fn small_orbit_step_covers_target() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        for seed in 0..3 {
            let s = scene(kind, seed);
            let poses = orbit(0.01, 2);
            let reference = render_frame(&poses[0], &intr, &s);
            let target = render_frame(&poses[1], &intr, &s);
            let w = warp(&reference, &poses[0], &poses[1], &intr);
            let cov = w.coverage(&target);
            assert!(cov >= 0.95, "{kind:?} seed {seed}: coverage {cov}");
        }
    }
}

#[test]
fn reprojectable_fraction_examples() {
    let intr = Intrinsics::square(32);
    let s = scene(SceneKind::Structured, 0);
    let poses = orbit(0.01, 9);
    let reference = render_frame(&poses[0], &intr, &s);
    assert_eq!(reprojectable_fraction(&reference, &poses[0], &reference, &poses[0], &intr, 0.0), 1.0);
    // an empty reference sees nothing the target sees
    let empty = Frame::empty(32, 32);
    assert_eq!(reprojectable_fraction(&empty, &poses[0], &reference, &poses[0], &intr, 1.0), 0.0);
    let far = render_frame(&poses[8], &intr, &s);
    let r = reprojectable_fraction(&reference, &poses[0], &far, &poses[8], &intr, 0.05);
    // splat cracks make the hit rate the lower of the two here
    assert!(r >= warp(&reference, &poses[0], &poses[8], &intr).coverage(&far) && r >= 0.95, "{r}");
}

#[test]
fn warp_angle_bounded_by_orbit_step_for_distant_orbit() {
    // telephoto view from far away; the angle at a surface point scales with
    // radius / (radius - 1) for a scene of unit half-extent
    let intr = Intrinsics::new(128.0, 16.0, 16.0, 32, 32).unwrap();
    let s = scene(SceneKind::Structured, 1);
    let step = 0.01;
    let t = generate_orbit_trajectory(Vec3::zeros(), 12.0, 30.0, step * 30.0, 2).unwrap();
    let reference = render_frame(t.pose(0), &intr, &s);
    let w = warp(&reference, t.pose(0), t.pose(1), &intr);
    assert!(w.covered_count() > 0);
    assert!(w.max_warp_angle() <= step + 1e-3, "{}", w.max_warp_angle());
}

#[test]
fn fill_beats_holes() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let s = scene(kind, 3);
        let poses = orbit(0.05, 2);
        let reference = render_frame(&poses[0], &intr, &s);
        let full = render_frame(&poses[1], &intr, &s);
        let w = warp_with_probe(&reference, &poses[0], &poses[1], &intr, Some(&OccupancyProbe::new(&s)));
        let filled = fill_disoccluded(&w, &poses[1], &intr, &s, &RenderOptions::default());
        let p_fill = psnr(&filled.frame, &full);
        let p_holes = psnr(&naive_warp_frame(&w), &full);
        assert!(p_fill.is_finite() && p_fill >= p_holes, "{p_fill} vs {p_holes}");
    }
}

#[test]
fn every_pixel_has_exactly_one_source() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let s = scene(kind, 4);
        let poses = orbit(0.05, 2);
        let reference = render_frame(&poses[0], &intr, &s);
        let w = warp_with_probe(&reference, &poses[0], &poses[1], &intr, Some(&OccupancyProbe::new(&s)));
        let filled = fill_disoccluded(&w, &poses[1], &intr, &s, &RenderOptions::default());
        for i in 0..w.frame.len() {
            assert!(!(w.disocclusion_mask[i] && w.void_mask[i]));
            let expect = if w.frame.valid[i] {
                PixelSource::WarpCopy
            } else if w.disocclusion_mask[i] {
                PixelSource::SparseNerf
            } else {
                PixelSource::VoidBackground
            };
            assert_eq!(filled.sources[i], expect);
            if w.frame.valid[i] {
                assert!(w.frame.depth[i].is_finite());
            }
        }
        let total: usize = [PixelSource::WarpCopy, PixelSource::SparseNerf, PixelSource::VoidBackground]
            .iter()
            .map(|&p| filled.count(p))
            .sum();
        assert_eq!(total, w.frame.len());
        assert!(filled.count(PixelSource::VoidBackground) > 0);
    }
}

#[test]
fn void_pixels_really_see_nothing() {
    let intr = Intrinsics::square(32);
    for kind in [SceneKind::Structured, SceneKind::Unstructured] {
        let s = scene(kind, 6);
        let poses = orbit(0.08, 2);
        let reference = render_frame(&poses[0], &intr, &s);
        let full = render_frame(&poses[1], &intr, &s);
        let w = warp_with_probe(&reference, &poses[0], &poses[1], &intr, Some(&OccupancyProbe::new(&s)));
        for i in 0..w.frame.len() {
            if w.void_mask[i] {
                assert_eq!(full.color[i], [0.0; 3]);
                assert!(full.depth[i].is_infinite());
            }
        }
    }
}

fn rigid(ax: f64, ay: f64, az: f64, t: [f64; 3]) -> RigidTransform {
    let r = nalgebra::Rotation3::from_euler_angles(ax, ay, az);
    RigidTransform { rotation: *r.matrix(), translation: Vec3::new(t[0], t[1], t[2]) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transform_is_an_isometry(
        ax in -3.1f64..3.1, ay in -1.5f64..1.5, az in -3.1f64..3.1,
        t in prop::array::uniform3(-5.0f64..5.0),
        pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 2..20),
    ) {
        let pc = PointCloudFrame {
            width: pts.len(),
            height: 1,
            points: pts.iter().map(|p| Vec3::new(p[0], p[1], p[2])).collect(),
            colors: vec![[0.5; 3]; pts.len()],
            valid: vec![true; pts.len()],
        };
        let out = transform_points(&pc, &rigid(ax, ay, az, t));
        prop_assert_eq!(&out.colors, &pc.colors);
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                let d0 = (pc.points[i] - pc.points[j]).norm();
                let d1 = (out.points[i] - out.points[j]).norm();
                prop_assert!((d0 - d1).abs() < 1e-6);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn forcing_more_rendered_pixels_never_hurts(extra in prop::collection::vec(any::<bool>(), 32 * 32), seed in 0u64..3) {
        let intr = Intrinsics::square(32);
        let s = scene(SceneKind::Structured, seed);
        let poses = orbit(0.05, 2);
        let reference = render_frame(&poses[0], &intr, &s);
        let full = render_frame(&poses[1], &intr, &s);
        let w = warp_with_probe(&reference, &poses[0], &poses[1], &intr, Some(&OccupancyProbe::new(&s)));
        let base = psnr(&fill_disoccluded(&w, &poses[1], &intr, &s, &RenderOptions::default()).frame, &full);
        let mut wider = w.clone();
        for i in 0..extra.len() {
            if extra[i] {
                wider.disocclusion_mask[i] = true;
                wider.void_mask[i] = false;
            }
        }
        let more = psnr(&fill_disoccluded(&wider, &poses[1], &intr, &s, &RenderOptions::default()).frame, &full);
        prop_assert!(more >= base - 0.05, "{} < {}", more, base);
    }
}
