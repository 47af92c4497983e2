use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{bail, Context};
use nerfstream_core::camera::Trajectory;
use nerfstream_core::render::{render_frame_supersampled, render_frame_with};
use nerfstream_core::trace::MemTrace;
use nerfstream_core::{Frame, SceneRep};
use nerfstream_memsim::{simulate_pipeline_run, SimReport};
use nerfstream_runtime::{schedule, FixedLatency, ScheduleOutput, SceneRenderer, TaskKind, Timeline};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::metrics::{psnr, MetricsRow};

/// Per-frame full renders and supersampled references, shared by runs that
/// differ only in runtime or hardware settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOracle {
    pub full: Vec<Frame>,
    pub reference: Vec<Frame>,
}

impl FrameOracle {
    pub fn new(cfg: &ExperimentConfig, scene: &SceneRep, traj: &Trajectory) -> anyhow::Result<Self> {
        let intr = cfg.intrinsics()?;
        let opts = cfg.render_options();
        let (full, reference) = traj
            .poses()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|p| (render_frame_with(p, &intr, scene, &opts), render_frame_supersampled(p, &intr, scene, &opts, cfg.supersample)))
            .unzip();
        Ok(Self { full, reference })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub rows: Vec<MetricsRow>,
    pub schedule: ScheduleOutput,
    /// Hardware report per full render, in task order.
    pub reports: Vec<(usize, SimReport)>,
    /// Memory trace of the bootstrap frame.
    pub trace: Option<MemTrace>,
}

impl ExperimentResult {
    pub fn timeline(&self) -> &Timeline {
        &self.schedule.timeline
    }

    pub fn mean(&self) -> MetricsRow {
        MetricsRow::mean_of(&self.rows)
    }

    /// Hardware cycles of every render, references included.
    pub fn total_cycles(&self) -> f64 {
        self.reports.iter().map(|(_, r)| r.total_cycles() as f64).sum::<f64>() + self.target_share(|r| r.total_cycles() as f64)
    }

    pub fn total_energy_units(&self) -> f64 {
        self.reports.iter().map(|(_, r)| r.energy_total()).sum::<f64>() + self.target_share(SimReport::energy_total)
    }

    pub fn total_dram_bytes(&self) -> f64 {
        self.reports.iter().map(|(_, r)| r.dram_bytes() as f64).sum::<f64>() + self.target_share(|r| r.dram_bytes() as f64)
    }

    /// Sparse renders billed as their share of the reference's full render.
    fn target_share(&self, f: impl Fn(&SimReport) -> f64) -> f64 {
        self.schedule
            .outcomes
            .iter()
            .filter(|o| o.kind == TaskKind::Target)
            .filter_map(|o| Some(f(reference_report(&self.schedule, &self.reports, o.window?)?) * o.rendered_pixels as f64 / o.pixels as f64))
            .sum()
    }
}

fn reference_report<'r>(sched: &ScheduleOutput, reports: &'r [(usize, SimReport)], window: usize) -> Option<&'r SimReport> {
    let task = sched.tasks.iter().find(|t| t.kind == TaskKind::Reference && t.window == Some(window))?;
    reports.iter().find(|(id, _)| *id == task.id).map(|(_, r)| r)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentResult> {
    let scene = cfg.build_scene().context("scene")?;
    let traj = cfg.build_trajectory().context("trajectory")?;
    let oracle = FrameOracle::new(cfg, &scene, &traj)?;
    run_experiment_with(cfg, &scene, &traj, &oracle)
}

pub fn run_experiment_with(cfg: &ExperimentConfig, scene: &SceneRep, traj: &Trajectory, oracle: &FrameOracle) -> anyhow::Result<ExperimentResult> {
    if oracle.full.len() != traj.len() {
        bail!("harness: oracle has {} frames, trajectory {}", oracle.full.len(), traj.len());
    }
    let intr = cfg.intrinsics()?;
    let pixels = intr.pixel_count();
    let simulate = |pose| simulate_pipeline_run(scene, pose, &intr, cfg.pipeline, &cfg.hw, &cfg.stream);

    // the bootstrap frame calibrates the renderer latency of the timeline
    let (latency, first) = if cfg.simulate {
        let run = simulate(traj.pose(0))?;
        let full_ps = (run.report.total_cycles() as f64 * 1e12 / cfg.clock_hz).round() as u64;
        let full_nj = run.report.energy_total() * cfg.energy_nj_per_unit;
        let lat = FixedLatency {
            full_ps,
            target_base_ps: 0,
            target_per_pixel_ps: full_ps / pixels as u64,
            full_nj,
            target_base_nj: 0.0,
            target_per_pixel_nj: full_nj / pixels as f64,
        };
        (lat, Some(run))
    } else {
        let full_ps = 20_000_000_000;
        (FixedLatency { target_per_pixel_ps: full_ps / pixels as u64, ..FixedLatency::uniform(full_ps, 0) }, None)
    };

    let renderer = SceneRenderer::new(scene, intr, cfg.render_options());
    let sched = schedule(traj, &cfg.runtime, &renderer, &latency).context("runtime")?;

    let mut reports: Vec<(usize, SimReport)> = Vec::new();
    let mut trace = None;
    if let Some(run) = first {
        reports.push((0, run.report));
        trace = Some(run.trace);
        let full: Vec<_> = sched.tasks.iter().filter(|t| t.id != 0 && matches!(t.kind, TaskKind::Reference | TaskKind::FallbackFull)).collect();
        let runs: Vec<anyhow::Result<(usize, SimReport)>> =
            full.par_iter().map(|t| Ok((t.id, simulate(&t.pose).context("memsim")?.report))).collect();
        for r in runs {
            reports.push(r?);
        }
    }

    let mut rows = Vec::with_capacity(traj.len());
    for (o, rec) in sched.outcomes.iter().zip(&sched.timeline.frames) {
        let j = o.frame;
        let out = &sched.frames[j];
        let full = &oracle.full[j];
        let gt = &oracle.reference[j];
        let drop = if out == full { 0.0 } else { psnr(full, gt)? - psnr(out, gt)? };
        let report = match o.kind {
            TaskKind::Target => o.window.and_then(|w| reference_report(&sched, &reports, w)),
            _ => reports.iter().find(|(id, _)| *id == rec.task_id).map(|(_, r)| r),
        };
        let share = match o.kind {
            TaskKind::Target => o.rendered_pixels as f64 / o.pixels as f64,
            _ => 1.0,
        };
        let (cycles, energy, dram, sf, cr) = match report {
            Some(r) => (
                r.total_cycles() as f64 * share,
                r.energy_total() * share,
                r.dram_bytes() as f64 * share,
                r.streaming_fraction(),
                r.conflict_rate(),
            ),
            None => (0.0, 0.0, 0.0, 0.0, 0.0),
        };
        rows.push(MetricsRow {
            frame: j,
            kind: o.kind.as_str().into(),
            psnr_db: psnr(out, full)?,
            psnr_drop_db: drop,
            warped_fraction: o.warped_fraction(),
            disoccluded_fraction: o.rendered_pixels as f64 / o.pixels as f64,
            cycles,
            energy_units: energy,
            dram_bytes: dram,
            dram_streaming_fraction: sf,
            bank_conflict_rate: cr,
            finish_ps: rec.finish_ps,
        });
    }
    Ok(ExperimentResult { rows, schedule: sched, reports, trace })
}

fn create(dir: &Path, name: &str) -> anyhow::Result<BufWriter<fs::File>> {
    Ok(BufWriter::new(fs::File::create(dir.join(name)).with_context(|| format!("harness: creating {}", dir.join(name).display()))?))
}

/// Writes metrics.csv, summary.csv, timeline.csv, trace.csv and frame images.
pub fn write_outputs(cfg: &ExperimentConfig, result: &ExperimentResult, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("harness: creating {}", dir.display()))?;
    MetricsRow::write_csv(&result.rows, create(dir, "metrics.csv")?)?;
    MetricsRow::write_summary_csv(&result.rows, create(dir, "summary.csv")?)?;
    result.timeline().write_csv(create(dir, "timeline.csv")?)?;
    if let Some(t) = &result.trace {
        t.write_csv(create(dir, "trace.csv")?)?;
    }
    if cfg.write_frames {
        for (i, f) in result.schedule.frames.iter().enumerate() {
            f.write_ppm(create(dir, &format!("frame_{i:04}.ppm"))?)?;
        }
    }
    Ok(())
}

pub const COMPARE_HEADER: [&str; 5] = ["frame", "cycles_ratio", "energy_ratio", "dram_ratio", "device_energy_ratio"];

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    /// None for the aggregate row.
    pub frame: Option<usize>,
    pub cycles_ratio: f64,
    pub energy_ratio: f64,
    pub dram_ratio: f64,
    pub device_energy_ratio: f64,
}

fn ratio(b: f64, a: f64) -> f64 {
    if a == b { 1.0 } else { b / a }
}

/// Per-frame and aggregate ratios `b / a`.
pub fn compare_results(a: &ExperimentResult, b: &ExperimentResult) -> anyhow::Result<Vec<ComparisonRow>> {
    let pa: Vec<_> = a.schedule.outcomes.iter().map(|o| o.frame).collect();
    let pb: Vec<_> = b.schedule.outcomes.iter().map(|o| o.frame).collect();
    let same_poses = a.schedule.frames.len() == b.schedule.frames.len()
        && a.schedule.tasks.iter().filter(|t| t.frame.is_some()).zip(b.schedule.tasks.iter().filter(|t| t.frame.is_some())).all(|(x, y)| x.pose.same_geometry(&y.pose));
    if pa != pb || !same_poses {
        bail!("harness: the two configurations use different trajectories");
    }
    let mut rows: Vec<ComparisonRow> = a
        .rows
        .iter()
        .zip(&b.rows)
        .map(|(x, y)| {
            let (ex, ey) = (a.timeline().frames[x.frame].energy_nj, b.timeline().frames[y.frame].energy_nj);
            ComparisonRow {
                frame: Some(x.frame),
                cycles_ratio: ratio(y.cycles, x.cycles),
                energy_ratio: ratio(y.energy_units, x.energy_units),
                dram_ratio: ratio(y.dram_bytes, x.dram_bytes),
                device_energy_ratio: ratio(ey, ex),
            }
        })
        .collect();
    rows.push(ComparisonRow {
        frame: None,
        cycles_ratio: ratio(b.total_cycles(), a.total_cycles()),
        energy_ratio: ratio(b.total_energy_units(), a.total_energy_units()),
        dram_ratio: ratio(b.total_dram_bytes(), a.total_dram_bytes()),
        device_energy_ratio: ratio(b.timeline().device_energy_nj(), a.timeline().device_energy_nj()),
    });
    Ok(rows)
}

pub fn write_comparison<W: std::io::Write>(rows: &[ComparisonRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COMPARE_HEADER)?;
    for r in rows {
        w.write_record([
            r.frame.map_or("all".into(), |f| f.to_string()),
            format!("{:.6}", r.cycles_ratio),
            format!("{:.6}", r.energy_ratio),
            format!("{:.6}", r.dram_ratio),
            format!("{:.6}", r.device_energy_ratio),
        ])?;
    }
    w.flush()?;
    Ok(())
}
