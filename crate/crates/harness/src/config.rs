//! Experiment configuration: INI sections of `key = value` lines. Every key
//! is optional; unknown sections or keys are rejected so typos surface.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;
use nerfstream_core::camera::{generate_orbit_trajectory, Intrinsics, Trajectory};
use nerfstream_core::geom::Vec3;
use nerfstream_core::render::{RenderOptions, DEFAULT_SAMPLES_PER_RAY};
use nerfstream_core::scene::{generate_scene, load_scene, ScenePlan, SizeClass};
use nerfstream_core::streaming::{StreamOptions, DEFAULT_CAPACITY, DEFAULT_REVERT_THRESHOLD};
use nerfstream_core::{SceneKind, SceneRep};
use nerfstream_memsim::{HwConfig, PipelineMode};
use nerfstream_runtime::{RemoteConfig, RuntimeConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config: {0}")]
    Invalid(String),
    #[error("config: [{section}] {key}: cannot parse `{value}`: {msg}")]
    Value { section: String, key: String, value: String, msg: String },
    #[error("config: {0}")]
    Parse(#[from] ini::ParseError),
    #[error("config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum SceneSpec {
    Generated(ScenePlan),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrajectorySpec {
    Orbit { frames: usize, radius: f64, height: f64, fps: f64, angular_speed: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub scene: SceneSpec,
    pub trajectory: TrajectorySpec,
    pub width: usize,
    pub height: usize,
    pub focal: Option<f64>,
    pub samples_per_ray: usize,
    /// Per-axis supersampling of the quality reference.
    pub supersample: usize,
    pub pipeline: PipelineMode,
    pub stream: StreamOptions,
    pub runtime: RuntimeConfig,
    pub hw: HwConfig,
    pub clock_hz: f64,
    /// Nanojoules per simulator energy unit.
    pub energy_nj_per_unit: f64,
    /// Run the hardware model per full render; off keeps only image metrics.
    pub simulate: bool,
    pub write_frames: bool,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            scene: SceneSpec::Generated(ScenePlan::new(SceneKind::Structured, 0, SizeClass::Tiny)),
            trajectory: TrajectorySpec::Orbit { frames: 13, radius: 2.5, height: 0.0, fps: 30.0, angular_speed: 0.3 },
            width: 32,
            height: 32,
            focal: None,
            samples_per_ray: DEFAULT_SAMPLES_PER_RAY,
            supersample: 2,
            pipeline: PipelineMode::Streaming,
            stream: StreamOptions::default(),
            runtime: RuntimeConfig::default(),
            hw: HwConfig::default(),
            clock_hz: 1e9,
            energy_nj_per_unit: 1.0,
            simulate: true,
            write_frames: true,
            output: PathBuf::from("out"),
        }
    }
}

struct Section<'a> {
    name: &'a str,
    props: Option<&'a ini::Properties>,
    used: Vec<&'static str>,
}

impl<'a> Section<'a> {
    fn get<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.used.push(key);
        let Some(v) = self.props.and_then(|p| p.get(key)) else { return Ok(None) };
        v.trim().parse::<T>().map(Some).map_err(|e| ConfigError::Value {
            section: self.name.into(),
            key: key.into(),
            value: v.into(),
            msg: e.to_string(),
        })
    }

    fn set<T: FromStr>(&mut self, key: &'static str, slot: &mut T) -> Result<(), ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = self.get(key)? {
            *slot = v;
        }
        Ok(())
    }

    fn finish(self) -> Result<(), ConfigError> {
        if let Some(p) = self.props {
            for (k, _) in p.iter() {
                if !self.used.contains(&k) {
                    return Err(ConfigError::Invalid(format!("unknown key `{k}` in [{}]", self.name)));
                }
            }
        }
        Ok(())
    }
}

const SECTIONS: [&str; 8] = ["experiment", "scene", "trajectory", "camera", "render", "pipeline", "runtime", "hardware"];

/// Parses a bool written as true/false, yes/no or 1/0.
struct Flag(bool);

impl FromStr for Flag {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "true" | "yes" | "1" | "on" => Ok(Flag(true)),
            "false" | "no" | "0" | "off" => Ok(Flag(false)),
            _ => Err(format!("expected a boolean, got `{s}`")),
        }
    }
}

impl ExperimentConfig {
    pub fn from_ini_str(text: &str, base: &Path) -> Result<Self, ConfigError> {
        Self::from_ini(&Ini::load_from_str(text)?, base)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_ini_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Applies `section.key=value` overrides on top of INI text.
    pub fn from_ini_str_with(text: &str, base: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut ini = Ini::load_from_str(text)?;
        for o in overrides {
            let (lhs, value) = o.split_once('=').ok_or_else(|| ConfigError::Invalid(format!("override `{o}` is not section.key=value")))?;
            let (section, key) = lhs.trim().split_once('.').ok_or_else(|| ConfigError::Invalid(format!("override `{o}` is not section.key=value")))?;
            ini.with_section(Some(section.trim())).set(key.trim(), value.trim());
        }
        Self::from_ini(&ini, base)
    }

    fn from_ini(ini: &Ini, base: &Path) -> Result<Self, ConfigError> {
        for (name, _) in ini.iter() {
            match name {
                Some(n) if SECTIONS.contains(&n) => {}
                Some(n) => return Err(ConfigError::Invalid(format!("unknown section [{n}]"))),
                None => {
                    if ini.general_section().iter().next().is_some() {
                        return Err(ConfigError::Invalid("keys must be inside a section".into()));
                    }
                }
            }
        }
        let sec = |name: &'static str| Section { name, props: ini.section(Some(name)), used: Vec::new() };
        let resolve = |p: String| {
            let p = PathBuf::from(p);
            if p.is_relative() { base.join(p) } else { p }
        };
        let mut c = Self::default();

        let mut s = sec("experiment");
        s.set("name", &mut c.name)?;
        if let Some(o) = s.get::<String>("output")? {
            c.output = resolve(o);
        }
        if let Some(Flag(f)) = s.get("simulate")? {
            c.simulate = f;
        }
        if let Some(Flag(f)) = s.get("write_frames")? {
            c.write_frames = f;
        }
        s.finish()?;

        let mut s = sec("scene");
        let file: Option<String> = s.get("file")?;
        let mut plan = ScenePlan::new(SceneKind::Structured, 0, SizeClass::Tiny);
        s.set("kind", &mut plan.kind)?;
        s.set("seed", &mut plan.seed)?;
        s.set("size", &mut plan.size)?;
        s.set("channels", &mut plan.channels)?;
        s.set("hidden", &mut plan.hidden)?;
        s.set("levels", &mut plan.levels)?;
        s.finish()?;
        c.scene = match file {
            Some(f) => SceneSpec::File(resolve(f)),
            None => SceneSpec::Generated(plan),
        };

        let mut s = sec("trajectory");
        let file: Option<String> = s.get("file")?;
        let TrajectorySpec::Orbit { mut frames, mut radius, mut height, mut fps, mut angular_speed } = c.trajectory.clone() else { unreachable!() };
        s.set("frames", &mut frames)?;
        s.set("radius", &mut radius)?;
        s.set("height", &mut height)?;
        s.set("fps", &mut fps)?;
        s.set("angular_speed", &mut angular_speed)?;
        s.finish()?;
        c.trajectory = match file {
            Some(f) => TrajectorySpec::File(resolve(f)),
            None => TrajectorySpec::Orbit { frames, radius, height, fps, angular_speed },
        };

        let mut s = sec("camera");
        s.set("width", &mut c.width)?;
        s.set("height", &mut c.height)?;
        c.focal = s.get("focal")?;
        s.finish()?;

        let mut s = sec("render");
        s.set("samples_per_ray", &mut c.samples_per_ray)?;
        s.set("supersample", &mut c.supersample)?;
        s.finish()?;
        c.stream.render = RenderOptions { samples_per_ray: c.samples_per_ray };

        let mut s = sec("pipeline");
        s.set("mode", &mut c.pipeline)?;
        s.set("capacity", &mut c.stream.capacity)?;
        s.set("order", &mut c.stream.order)?;
        s.set("revert_threshold", &mut c.stream.revert_threshold)?;
        s.finish()?;

        let mut s = sec("runtime");
        s.set("window", &mut c.runtime.window)?;
        if let Some(deg) = s.get::<f64>("phi_deg")? {
            c.runtime.phi = deg.to_radians();
        }
        s.set("mode", &mut c.runtime.mode)?;
        s.set("ridge", &mut c.runtime.ridge)?;
        s.set("bandwidth", &mut c.runtime.remote.bandwidth_bytes_per_s)?;
        s.set("energy_per_byte_nj", &mut c.runtime.remote.energy_nj_per_byte)?;
        if let Some(ms) = s.get::<f64>("remote_render_ms")? {
            c.runtime.remote.render_ps = (ms * 1e9).round() as u64;
        }
        s.set("bytes_per_pixel", &mut c.runtime.remote.bytes_per_pixel)?;
        s.finish()?;

        let mut s = sec("hardware");
        let hw = &mut c.hw;
        s.set("mac_dim", &mut hw.mac_dim)?;
        s.set("global_buffer_bytes", &mut hw.global_buffer_bytes)?;
        s.set("global_buffer_granularity", &mut hw.global_buffer_granularity)?;
        s.set("weight_buffer_bytes", &mut hw.weight_buffer_bytes)?;
        s.set("rit_buffer_bytes", &mut hw.rit_buffer_bytes)?;
        s.set("mft_bytes", &mut hw.mft_bytes)?;
        s.set("banks", &mut hw.banks)?;
        s.set("ports", &mut hw.ports)?;
        s.set("lanes", &mut hw.lanes)?;
        s.set("burst_bytes", &mut hw.burst_bytes)?;
        s.set("dram_bytes_per_cycle", &mut hw.dram_bytes_per_cycle)?;
        s.set("random_burst_cycles", &mut hw.random_burst_cycles)?;
        s.set("gu_fill_cycles", &mut hw.gu_fill_cycles)?;
        s.set("exp_iterations", &mut hw.exp_iterations)?;
        s.set("energy_dram_stream", &mut hw.energy.dram_stream)?;
        s.set("energy_dram_random", &mut hw.energy.dram_random)?;
        s.set("energy_sram", &mut hw.energy.sram)?;
        s.set("clock_hz", &mut c.clock_hz)?;
        s.set("energy_nj_per_unit", &mut c.energy_nj_per_unit)?;
        s.finish()?;

        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.width == 0 || self.height == 0 {
            return bad("camera size must be positive".into());
        }
        if self.samples_per_ray == 0 || self.supersample == 0 {
            return bad("samples_per_ray and supersample must be at least 1".into());
        }
        if !(self.clock_hz > 0.0) || !(self.energy_nj_per_unit >= 0.0) {
            return bad("clock_hz must be > 0 and energy_nj_per_unit >= 0".into());
        }
        if let SceneSpec::File(p) = &self.scene {
            if !p.exists() {
                return bad(format!("scene file {} does not exist", p.display()));
            }
        }
        match &self.trajectory {
            TrajectorySpec::File(p) if !p.exists() => return bad(format!("trajectory file {} does not exist", p.display())),
            TrajectorySpec::Orbit { frames, .. } if *frames < 2 => return bad("an orbit needs at least 2 frames".into()),
            _ => {}
        }
        self.runtime.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.hw.validate().map_err(ConfigError::Invalid)?;
        self.intrinsics()?;
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics, ConfigError> {
        let f = self.focal.unwrap_or(self.width.max(self.height) as f64);
        Intrinsics::new(f, self.width as f64 / 2.0, self.height as f64 / 2.0, self.width, self.height).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn build_scene(&self) -> anyhow::Result<SceneRep> {
        Ok(match &self.scene {
            SceneSpec::Generated(plan) => generate_scene(plan),
            SceneSpec::File(p) => load_scene(p)?,
        })
    }

    pub fn build_trajectory(&self) -> anyhow::Result<Trajectory> {
        Ok(match &self.trajectory {
            TrajectorySpec::Orbit { frames, radius, height, fps, angular_speed } => {
                generate_orbit_trajectory(Vec3::new(0.0, *height, 0.0), *radius, *fps, *angular_speed, *frames)?
            }
            TrajectorySpec::File(p) => Trajectory::load(p)?,
        })
    }

    pub fn render_options(&self) -> RenderOptions {
        RenderOptions { samples_per_ray: self.samples_per_ray }
    }
}

/// Default text of a full config, every key at its default.
pub fn default_config_text() -> String {
    let c = ExperimentConfig::default();
    let r = RemoteConfig::default();
    let hw = c.hw;
    format!(
        "[experiment]\nname = {name}\noutput = out\nsimulate = true\nwrite_frames = true\n\n\
         [scene]\nkind = structured\nseed = 0\nsize = tiny\nchannels = 32\nhidden = 32\nlevels = 1\n\n\
         [trajectory]\nframes = 13\nradius = 2.5\nheight = 0\nfps = 30\nangular_speed = 0.3\n\n\
         [camera]\nwidth = {w}\nheight = {h}\n\n\
         [render]\nsamples_per_ray = {spr}\nsupersample = 2\n\n\
         [pipeline]\nmode = streaming\ncapacity = {cap}\norder = front_to_back\nrevert_threshold = {rt}\n\n\
         [runtime]\nwindow = 6\nphi_deg = 4\nmode = local\nridge = 0.001\nbandwidth = {bw}\nenergy_per_byte_nj = {epb}\nremote_render_ms = {rr}\nbytes_per_pixel = {bpp}\n\n\
         [hardware]\nmac_dim = {mac}\nbanks = {banks}\nports = {ports}\nlanes = {lanes}\nburst_bytes = {burst}\ndram_bytes_per_cycle = {bwc}\n\
         random_burst_cycles = {rbc}\ngu_fill_cycles = {fill}\nexp_iterations = {exp}\nmft_bytes = {mft}\n\
         energy_dram_stream = {es}\nenergy_dram_random = {er}\nenergy_sram = {esr}\nclock_hz = 1e9\nenergy_nj_per_unit = 1.0\n",
        name = c.name,
        w = c.width,
        h = c.height,
        spr = c.samples_per_ray,
        cap = DEFAULT_CAPACITY,
        rt = DEFAULT_REVERT_THRESHOLD,
        bw = r.bandwidth_bytes_per_s,
        epb = r.energy_nj_per_byte,
        rr = r.render_ps as f64 / 1e9,
        bpp = r.bytes_per_pixel,
        mac = hw.mac_dim,
        banks = hw.banks,
        ports = hw.ports,
        lanes = hw.lanes,
        burst = hw.burst_bytes,
        bwc = hw.dram_bytes_per_cycle,
        rbc = hw.random_burst_cycles,
        fill = hw.gu_fill_cycles,
        exp = hw.exp_iterations,
        mft = hw.mft_bytes,
        es = hw.energy.dram_stream,
        er = hw.energy.dram_random,
        esr = hw.energy.sram,
    )
}
