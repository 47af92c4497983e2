//! Cycle and energy model for the pixel-centric baseline and the streaming
//! accelerator.

pub mod banks;
pub mod config;
pub mod dram;
pub mod exp;
pub mod gu;
pub mod pipeline;
pub mod systolic;

pub use banks::{simulate_banks, Access, BankLayout, BankStats, IssueGroups, LayoutError, LayoutMode};
pub use config::{EnergyTable, HwConfig};
pub use dram::{classify_dram, energy, DramSplit, Energy};
pub use exp::exp_unit;
pub use gu::{simulate_gu, GatherKind, GuBlock, GuTiming};
pub use pipeline::{simulate_pipeline, simulate_pipeline_run, PipelineMode, SimReport, SimRun};
pub use systolic::simulate_systolic;

use nerfstream_core::streaming::CapacityError;

#[derive(Debug, thiserror::Error)]
pub enum MemsimError {
    #[error("memsim: {0}")]
    Capacity(#[from] CapacityError),
    #[error("memsim: {0}")]
    Layout(#[from] LayoutError),
    #[error("memsim: invalid hardware config: {0}")]
    Config(String),
}
