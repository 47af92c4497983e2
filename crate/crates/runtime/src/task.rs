use std::fmt;

use nerfstream_core::CameraPose;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Reference,
    Target,
    FallbackFull,
    /// Moving a remotely rendered reference to the device.
    Transfer,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Reference => "reference",
            Self::Target => "target",
            Self::FallbackFull => "fallback_full",
            Self::Transfer => "transfer",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Resource {
    NerfRenderer,
    SparseRenderer,
    RemoteRenderer,
    WirelessLink,
}

impl Resource {
    pub const ALL: [Resource; 4] = [Self::NerfRenderer, Self::SparseRenderer, Self::RemoteRenderer, Self::WirelessLink];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NerfRenderer => "nerf_renderer",
            Self::SparseRenderer => "sparse_renderer",
            Self::RemoteRenderer => "remote_renderer",
            Self::WirelessLink => "wireless_link",
        }
    }
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderTask {
    pub id: usize,
    pub kind: TaskKind,
    pub pose: CameraPose,
    /// Displayed frame this task produces; none for references and transfers.
    pub frame: Option<usize>,
    /// Warping window served, for references, transfers and targets.
    pub window: Option<usize>,
    pub depends_on: Option<usize>,
    /// Earliest start, picoseconds.
    pub enqueue_ps: u64,
    pub resource: Resource,
    pub duration_ps: u64,
    pub energy_nj: f64,
    pub rendered_pixels: usize,
}
