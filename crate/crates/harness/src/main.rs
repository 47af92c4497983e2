use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use nerfstream_core::render::render_frame_with;
use nerfstream_core::streaming::stream_render_frame;
use nerfstream_memsim::{simulate_pipeline_run, PipelineMode, SimReport};
use nerfstream_harness::config::default_config_text;
use nerfstream_harness::experiment::write_comparison;
use nerfstream_harness::metrics::format_db;
use nerfstream_harness::*;

#[derive(Parser)]
#[command(name = "nerfstream", about = "Streaming neural rendering experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// INI experiment config; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set runtime.window=16`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
    /// Output directory, overriding `experiment.output`.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

impl Common {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let (text, base) = match &self.config {
            Some(p) => (fs::read_to_string(p).with_context(|| format!("config: reading {}", p.display()))?, p.parent().unwrap_or(Path::new(".")).to_path_buf()),
            None => (String::new(), PathBuf::from(".")),
        };
        let mut cfg = ExperimentConfig::from_ini_str_with(&text, &base, &self.set)?;
        if let Some(o) = &self.out {
            cfg.output = o.clone();
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Full pixel-centric renders of trajectory frames.
    Render {
        #[command(flatten)]
        common: Common,
        /// Only this frame index.
        #[arg(long)]
        frame: Option<usize>,
    },
    /// Reference/target warping over the trajectory with per-frame metrics.
    WarpRun {
        #[command(flatten)]
        common: Common,
    },
    /// Block-streamed renders checked against the pixel-centric renderer.
    StreamRun {
        #[command(flatten)]
        common: Common,
    },
    /// Hardware model of one frame in both pipeline modes.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        frame: usize,
    },
    /// Repeats the warping run over angle thresholds and window sizes.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = [1.0, 2.0, 4.0, 8.0])]
        phi_deg: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        window: Vec<usize>,
    },
    /// Ratios b/a of cycles, energy and DRAM traffic between two configs.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long = "set-a")]
        set_a: Vec<String>,
        #[arg(long = "set-b")]
        set_b: Vec<String>,
        #[arg(short, long, default_value = "out")]
        out: PathBuf,
    },
    /// Prints a config file with every key at its default.
    DefaultConfig,
}

fn file(dir: &Path, name: &str) -> anyhow::Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name)).with_context(|| format!("harness: creating {}", dir.join(name).display()))?))
}

fn print_mean(result: &ExperimentResult) {
    let m = result.mean();
    let tl = result.timeline();
    println!(
        "frames={} fallbacks={} psnr_db={} drop_db={:.4} warped={:.4} makespan_ms={:.3} device_energy_nj={:.1}",
        result.rows.len(),
        result.schedule.fallback_count(),
        format_db(m.psnr_db),
        m.psnr_drop_db,
        m.warped_fraction,
        tl.makespan_ps() as f64 / 1e9,
        tl.device_energy_nj()
    );
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Render { common, frame } => {
            let cfg = common.load()?;
            let (scene, traj, intr) = (cfg.build_scene()?, cfg.build_trajectory()?, cfg.intrinsics()?);
            let frames: Vec<usize> = match frame {
                Some(f) if f < traj.len() => vec![f],
                Some(f) => anyhow::bail!("harness: frame {f} is outside the {}-frame trajectory", traj.len()),
                None => (0..traj.len()).collect(),
            };
            for i in frames {
                let f = render_frame_with(traj.pose(i), &intr, &scene, &cfg.render_options());
                f.write_ppm(file(&cfg.output, &format!("frame_{i:04}.ppm"))?)?;
            }
        }
        Cmd::WarpRun { common } => {
            let cfg = common.load()?;
            let result = run_experiment(&cfg)?;
            write_outputs(&cfg, &result, &cfg.output)?;
            print_mean(&result);
        }
        Cmd::StreamRun { common } => {
            let cfg = common.load()?;
            let (scene, traj, intr) = (cfg.build_scene()?, cfg.build_trajectory()?, cfg.intrinsics()?);
            let mut w = csv::Writer::from_writer(file(&cfg.output, "stream.csv")?);
            w.write_record(["frame", "loads", "samples", "dram_streaming_fraction", "max_abs_diff"])?;
            let mut worst = 0.0f32;
            for (i, pose) in traj.poses().enumerate() {
                let out = stream_render_frame(pose, &intr, &scene, &cfg.stream).context("streaming")?;
                let reference = render_frame_with(pose, &intr, &scene, &cfg.render_options());
                let diff = out.frame.color.iter().zip(&reference.color).flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs())).fold(0.0, f32::max);
                worst = worst.max(diff);
                w.write_record([i.to_string(), out.loads.len().to_string(), out.samples_computed.to_string(), format!("{:.6}", out.trace.streaming_fraction()), format!("{diff:e}")])?;
                if i == 0 {
                    out.trace.write_csv(file(&cfg.output, "trace.csv")?)?;
                }
                if cfg.write_frames {
                    out.frame.write_ppm(file(&cfg.output, &format!("frame_{i:04}.ppm"))?)?;
                }
            }
            w.flush()?;
            println!("frames={} max_abs_diff={worst:e}", traj.len());
        }
        Cmd::Simulate { common, frame } => {
            let cfg = common.load()?;
            let (scene, traj, intr) = (cfg.build_scene()?, cfg.build_trajectory()?, cfg.intrinsics()?);
            anyhow::ensure!(frame < traj.len(), "harness: frame {frame} is outside the {}-frame trajectory", traj.len());
            let mut reports = Vec::new();
            for mode in [PipelineMode::Baseline, PipelineMode::Streaming] {
                let run = simulate_pipeline_run(&scene, traj.pose(frame), &intr, mode, &cfg.hw, &cfg.stream)?;
                run.trace.write_csv(file(&cfg.output, &format!("trace_{mode}.csv"))?)?;
                print!("{}", run.report.summary());
                reports.push(run.report);
            }
            SimReport::write_csv(&reports, file(&cfg.output, "simulate.csv")?)?;
        }
        Cmd::Sweep { common, phi_deg, window } => {
            let cfg = common.load()?;
            let (scene, traj) = (cfg.build_scene()?, cfg.build_trajectory()?);
            let oracle = FrameOracle::new(&cfg, &scene, &traj)?;
            let windows = if window.is_empty() { vec![cfg.runtime.window] } else { window };
            let mut w = csv::Writer::from_writer(file(&cfg.output, "sweep.csv")?);
            w.write_record(["window", "phi_deg", "fallbacks", "psnr_db", "psnr_drop_db", "warped_fraction", "makespan_ps"])?;
            for &n in &windows {
                for &phi in &phi_deg {
                    let mut c = cfg.clone();
                    c.runtime.window = n;
                    c.runtime.phi = phi.to_radians();
                    c.validate()?;
                    let r = run_experiment_with(&c, &scene, &traj, &oracle)?;
                    let m = r.mean();
                    w.write_record([
                        n.to_string(),
                        phi.to_string(),
                        r.schedule.fallback_count().to_string(),
                        format_db(m.psnr_db),
                        format!("{:.4}", m.psnr_drop_db),
                        format!("{:.6}", m.warped_fraction),
                        r.timeline().makespan_ps().to_string(),
                    ])?;
                }
            }
            w.flush()?;
        }
        Cmd::Compare { a, b, set_a, set_b, out } => {
            let load = |p: &PathBuf, set: &[String]| Common { config: Some(p.clone()), set: set.to_vec(), out: None }.load();
            let (ca, cb) = (load(&a, &set_a)?, load(&b, &set_b)?);
            let (ra, rb) = (run_experiment(&ca)?, run_experiment(&cb)?);
            let rows = compare_results(&ra, &rb)?;
            write_comparison(&rows, file(&out, "comparison.csv")?)?;
            let all = rows.last().expect("aggregate row");
            println!("cycles={:.4} energy={:.4} dram={:.4} device_energy={:.4}", all.cycles_ratio, all.energy_ratio, all.dram_ratio, all.device_energy_ratio);
        }
        Cmd::DefaultConfig => print!("{}", default_config_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
