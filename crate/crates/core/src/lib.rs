//! Performance model of silicon-photonic 2.5D interposer networks linking
//! ML accelerator chiplets to a memory chiplet.
//!
//! The pipeline runs bottom-up: [`device`] link budgets, [`topology`]
//! construction, [`workload`] traffic, [`accel`] layer mapping, the [`sim`]
//! event engine, [`power`] accounting and [`report`] sweeps.

pub mod accel;
pub mod config;
pub mod device;
pub mod error;
pub mod power;
pub mod report;
pub mod sim;
pub mod topology;
pub mod workload;

pub use accel::{ChipletId, ChipletPlatform, ComputeChiplet, LayerMapping, MemoryChiplet};
pub use config::{load_config, parse_config, ModelSource, RunConfig};
pub use device::{
    path_loss_db, required_laser_power_mw, wall_plug_laser_power_mw, ChainElement, DeviceChain, DeviceParams,
};
pub use error::{Error, Result};
pub use power::{apply_pcmc_policy, run_energy, static_power, EnergyBreakdown, PcmcPolicy, PowerBreakdown};
pub use report::{run, sweep, SimReport, SimRow};
pub use sim::{analytic_latency_s, simulate, ActivityLog, SimOptions};
pub use topology::{build, enumerate_devices, worst_case_path, NetworkTopology, TopologyKind};
pub use workload::{build_trace, builtin_model, LayerSpec, TrafficTrace, TransferRequest};
