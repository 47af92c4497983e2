use std::fmt;
use std::io::Write;

use nerfstream_core::render::index_rays;
use nerfstream_core::scene::POINT_VALUES;
use nerfstream_core::streaming::{gather_bytes, ray_gathers, render_frame_traced, stream_render_frame, StreamOptions};
use nerfstream_core::trace::MemTrace;
use nerfstream_core::{CameraPose, Frame, Intrinsics, SceneRep};

use crate::banks::{channel_major_groups, feature_major_groups, simulate_banks, BankLayout, BankStats, LayoutMode};
use crate::config::HwConfig;
use crate::dram::{classify_dram, energy, sram_accesses};
use crate::gu::{simulate_gu, GatherKind, GuBlock};
use crate::systolic::simulate_systolic;
use crate::MemsimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PipelineMode {
    /// Every feature fetched from DRAM on demand, feature-major banks.
    Baseline,
    /// Block-ordered streaming with channel-major banks.
    Streaming,
}

impl PipelineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Baseline => "baseline",
            Self::Streaming => "streaming",
        }
    }
}

impl fmt::Display for PipelineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PipelineMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "baseline" => Ok(Self::Baseline),
            "streaming" => Ok(Self::Streaming),
            _ => Err(format!("unknown pipeline mode `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub mode: PipelineMode,
    pub samples: u64,
    pub cycles_indexing: u64,
    pub cycles_gather: u64,
    pub cycles_compute: u64,
    pub stall_cycles: u64,
    pub bank_cycles: u64,
    pub dram_stream_bytes: u64,
    pub dram_random_bytes: u64,
    pub dram_stream_accesses: u64,
    pub dram_random_accesses: u64,
    pub sram_accesses: u64,
    pub energy_dram: f64,
    pub energy_sram: f64,
}

pub const REPORT_HEADER: [&str; 19] = [
    "mode",
    "samples",
    "cycles_indexing",
    "cycles_gather",
    "cycles_compute",
    "cycles_total",
    "stall_cycles",
    "bank_cycles",
    "conflict_rate",
    "dram_stream_bytes",
    "dram_random_bytes",
    "dram_total_bytes",
    "dram_stream_accesses",
    "dram_random_accesses",
    "sram_accesses",
    "streaming_fraction",
    "energy_dram",
    "energy_sram",
    "energy_total",
];

impl SimReport {
    pub fn total_cycles(&self) -> u64 {
        self.cycles_indexing + self.cycles_gather + self.cycles_compute
    }

    pub fn conflict_rate(&self) -> f64 {
        if self.bank_cycles == 0 {
            0.0
        } else {
            self.stall_cycles as f64 / self.bank_cycles as f64
        }
    }

    pub fn dram_bytes(&self) -> u64 {
        self.dram_stream_bytes + self.dram_random_bytes
    }

    pub fn streaming_fraction(&self) -> f64 {
        let total = self.dram_bytes();
        if total == 0 {
            1.0
        } else {
            self.dram_stream_bytes as f64 / total as f64
        }
    }

    pub fn energy_total(&self) -> f64 {
        self.energy_dram + self.energy_sram
    }

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.mode.to_string(),
            self.samples.to_string(),
            self.cycles_indexing.to_string(),
            self.cycles_gather.to_string(),
            self.cycles_compute.to_string(),
            self.total_cycles().to_string(),
            self.stall_cycles.to_string(),
            self.bank_cycles.to_string(),
            format!("{:.6}", self.conflict_rate()),
            self.dram_stream_bytes.to_string(),
            self.dram_random_bytes.to_string(),
            self.dram_bytes().to_string(),
            self.dram_stream_accesses.to_string(),
            self.dram_random_accesses.to_string(),
            self.sram_accesses.to_string(),
            format!("{:.6}", self.streaming_fraction()),
            format!("{:.3}", self.energy_dram),
            format!("{:.3}", self.energy_sram),
            format!("{:.3}", self.energy_total()),
        ]
    }

    pub fn write_csv<W: Write>(reports: &[SimReport], out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(REPORT_HEADER)?;
        for r in reports {
            w.write_record(r.csv_record())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "[{mode}]\n\
             cycles      I={i} G={g} F={f} total={t}\n\
             banks       stalls={s} cycles={bc} conflict_rate={cr:.4}\n\
             dram        stream={sb} B random={rb} B streaming_fraction={sf:.4}\n\
             accesses    dram_stream={sa} dram_random={ra} sram={sr}\n\
             energy      dram={ed:.1} sram={es:.1} total={et:.1}\n",
            mode = self.mode,
            i = self.cycles_indexing,
            g = self.cycles_gather,
            f = self.cycles_compute,
            t = self.total_cycles(),
            s = self.stall_cycles,
            bc = self.bank_cycles,
            cr = self.conflict_rate(),
            sb = self.dram_stream_bytes,
            rb = self.dram_random_bytes,
            sf = self.streaming_fraction(),
            sa = self.dram_stream_accesses,
            ra = self.dram_random_accesses,
            sr = self.sram_accesses,
            ed = self.energy_dram,
            es = self.energy_sram,
            et = self.energy_total(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub report: SimReport,
    pub frame: Frame,
    pub trace: MemTrace,
}

/// Feature table geometry of a scene: (feature count, channels per feature).
pub fn feature_shape(scene: &SceneRep) -> (u64, u32) {
    match scene {
        SceneRep::Structured(g) => (g.levels.iter().map(|l| l.vertex_count() as u64).sum(), g.channels as u32),
        SceneRep::Unstructured(c) => (c.points.len() as u64, POINT_VALUES as u32),
    }
}

/// Per-ray feature fetch streams of a frame, in pixel order.
pub fn gather_streams(pose: &CameraPose, intr: &Intrinsics, scene: &SceneRep, opts: &StreamOptions) -> Vec<Vec<u64>> {
    index_rays(pose, intr).iter().enumerate().map(|(r, ray)| ray_gathers(ray, r, scene, &opts.render).fetches).collect()
}

pub fn bank_stats(streams: &[Vec<u64>], scene: &SceneRep, mode: LayoutMode, cfg: &HwConfig) -> Result<BankStats, MemsimError> {
    let (features, channels) = feature_shape(scene);
    let layout = BankLayout::new(mode, cfg.banks, features, channels);
    let groups = match mode {
        LayoutMode::FeatureMajor => feature_major_groups(streams, cfg.lanes),
        LayoutMode::ChannelMajor => channel_major_groups(streams, channels, cfg.lanes, cfg.banks),
    };
    Ok(simulate_banks(&groups, &layout, cfg.ports)?)
}

fn compute_cycles(scene: &SceneRep, samples: u64, cfg: &HwConfig) -> u64 {
    if samples == 0 {
        return 0;
    }
    let a = cfg.mac_dim;
    match scene {
        SceneRep::Structured(g) => {
            let m = samples as usize;
            simulate_systolic(m, g.channels, g.mlp.hidden + 1, a) + simulate_systolic(m, g.mlp.hidden, 3, a)
        }
        SceneRep::Unstructured(_) => samples.div_ceil(a as u64) * cfg.exp_iterations as u64,
    }
}

pub fn simulate_pipeline_run(
    scene: &SceneRep,
    pose: &CameraPose,
    intr: &Intrinsics,
    mode: PipelineMode,
    cfg: &HwConfig,
    opts: &StreamOptions,
) -> Result<SimRun, MemsimError> {
    cfg.validate().map_err(MemsimError::Config)?;
    let streams = gather_streams(pose, intr, scene, opts);
    let (frame, trace, samples, banks, gather_base) = match mode {
        PipelineMode::Baseline => {
            let out = render_frame_traced(pose, intr, scene, &opts.render);
            let banks = bank_stats(&streams, scene, LayoutMode::FeatureMajor, cfg)?;
            let split = classify_dram(&out.trace.events, cfg.burst_bytes);
            let per_stream = cfg.burst_bytes.div_ceil(cfg.dram_bytes_per_cycle);
            let g = split.random_accesses * cfg.random_burst_cycles + split.streaming_accesses * per_stream;
            (out.frame, out.trace, out.samples_computed as u64, banks, g)
        }
        PipelineMode::Streaming => {
            let out = stream_render_frame(pose, intr, scene, opts)?;
            let banks = bank_stats(&streams, scene, LayoutMode::ChannelMajor, cfg)?;
            let kind = match scene {
                SceneRep::Structured(_) => GatherKind::Structured,
                SceneRep::Unstructured(_) => GatherKind::Unstructured,
            };
            let blocks: Vec<GuBlock> = out.loads.iter().map(GuBlock::from).collect();
            let gu = simulate_gu(&blocks, kind, cfg)?;
            let reverted = out.reverted_reads as u64 * gather_bytes(scene).div_ceil(cfg.burst_bytes) * cfg.random_burst_cycles;
            (out.frame, out.trace, out.samples_computed as u64, banks, gu.cycles + reverted)
        }
    };
    let split = classify_dram(&trace.events, cfg.burst_bytes);
    let sram = sram_accesses(&trace.events, cfg.burst_bytes);
    let e = energy(&split, sram, &cfg.energy);
    let report = SimReport {
        mode,
        samples,
        cycles_indexing: samples.div_ceil(cfg.mac_dim as u64),
        cycles_gather: gather_base + banks.stall_cycles,
        cycles_compute: compute_cycles(scene, samples, cfg),
        stall_cycles: banks.stall_cycles,
        bank_cycles: banks.cycles,
        dram_stream_bytes: split.streaming_bytes,
        dram_random_bytes: split.random_bytes,
        dram_stream_accesses: split.streaming_accesses,
        dram_random_accesses: split.random_accesses,
        sram_accesses: sram,
        energy_dram: e.dram,
        energy_sram: e.sram,
    };
    Ok(SimRun { report, frame, trace })
}

pub fn simulate_pipeline(
    scene: &SceneRep,
    pose: &CameraPose,
    intr: &Intrinsics,
    mode: PipelineMode,
    cfg: &HwConfig,
    opts: &StreamOptions,
) -> Result<SimReport, MemsimError> {
    simulate_pipeline_run(scene, pose, intr, mode, cfg, opts).map(|r| r.report)
}
