//! Run configuration and its INI-style file format.
//!
//! ```text
//! # comment
//! [network]
//! kind = trine
//! subnetworks = 0        # 0 sizes TRINE to the memory bandwidth
//!
//! [platform]
//! chiplet = 9, 1024, 2e9 # lanes per unit, unit count, clock
//! memory = 96e9, 67108864
//! ```
//!
//! Sections: `device`, `network`, `platform`, `policy`, `electrical`, `sim`,
//! `workload`, `report`. A config file must contain `[network]`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::accel::{ChipletId, ChipletPlatform, ComputeChiplet, MemoryChiplet, DEFAULT_GLB_BYTES};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::power::PcmcPolicy;
use crate::sim::SimOptions;
use crate::workload::DEFAULT_BIT_WIDTH;

pub const TOPOLOGY_NAMES: [&str; 5] = ["bus", "tree", "trine", "mesh", "monolithic"];

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub topology: String,
    /// TRINE subnetworks; 0 picks the count from the memory bandwidth.
    pub subnetworks: usize,
    /// Mesh dimensions; 0 picks a near-square grid.
    pub mesh_rows: usize,
    pub mesh_cols: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            topology: "trine".into(),
            subnetworks: 0,
            mesh_rows: 0,
            mesh_cols: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ModelSource {
    Builtin(String),
    File(PathBuf),
}

impl ModelSource {
    pub fn name(&self) -> String {
        match self {
            ModelSource::Builtin(n) => n.clone(),
            ModelSource::File(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadConfig {
    pub models: Vec<ModelSource>,
    pub packet_bytes: u64,
    pub bit_width: u32,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        Self {
            models: vec![ModelSource::Builtin("lenet5".into())],
            packet_bytes: 4096,
            bit_width: DEFAULT_BIT_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub device: DeviceParams,
    pub network: NetworkConfig,
    pub platform: ChipletPlatform,
    pub policy: PcmcPolicy,
    pub sim: SimOptions,
    pub workload: WorkloadConfig,
    pub out_dir: Option<PathBuf>,
    /// Topology every row is normalized to.
    pub baseline: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::default(),
            network: NetworkConfig::default(),
            platform: ChipletPlatform::default_2p5d(DEFAULT_CLOCK_HZ),
            policy: PcmcPolicy::default(),
            sim: SimOptions::default(),
            workload: WorkloadConfig::default(),
            out_dir: None,
            baseline: None,
        }
    }
}

pub const DEFAULT_CLOCK_HZ: f64 = 2e9;

fn value_err(section: &str, key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigValue {
        section: section.into(),
        key: key.into(),
        reason: reason.into(),
    }
}

fn num<T: FromStr>(section: &str, key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| value_err(section, key, format!("cannot parse `{}`", v.trim())))
}

fn boolean(section: &str, key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        other => Err(value_err(section, key, format!("expected a boolean, got `{other}`"))),
    }
}

fn set_device(d: &mut DeviceParams, key: &str, v: &str) -> Result<()> {
    let s = "device";
    match key {
        "mr_through_loss_db" => d.mr_through_loss_db = num(s, key, v)?,
        "mr_drop_loss_db" => d.mr_drop_loss_db = num(s, key, v)?,
        "mr_modulator_insertion_db" => d.mr_modulator_insertion_db = num(s, key, v)?,
        "mzi_insertion_loss_db" => d.mzi_insertion_loss_db = num(s, key, v)?,
        "waveguide_prop_loss_db_per_cm" => d.waveguide_prop_loss_db_per_cm = num(s, key, v)?,
        "coupler_loss_db" => d.coupler_loss_db = num(s, key, v)?,
        "splitter_loss_db" => d.splitter_loss_db = num(s, key, v)?,
        "pd_sensitivity_dbm" => d.pd_sensitivity_dbm = num(s, key, v)?,
        "link_margin_db" => d.link_margin_db = num(s, key, v)?,
        "laser_wall_plug_efficiency" => d.laser_wall_plug_efficiency = num(s, key, v)?,
        "mr_trim_power_mw" => d.mr_trim_power_mw = num(s, key, v)?,
        "mzi_static_power_mw" => d.mzi_static_power_mw = num(s, key, v)?,
        "mzi_switch_time_s" => d.mzi_switch_time_s = num(s, key, v)?,
        "modulation_rate_hz" => d.modulation_rate_hz = num(s, key, v)?,
        "gateway_clock_hz" => d.gateway_clock_hz = num(s, key, v)?,
        "wavelengths_per_waveguide" => d.wavelengths_per_waveguide = num(s, key, v)?,
        "pcmc_switch_time_s" => d.pcmc_switch_time_s = num(s, key, v)?,
        "pcmc_switch_energy_j" => d.pcmc_switch_energy_j = num(s, key, v)?,
        "gateway_power_mw" => d.gateway_power_mw = num(s, key, v)?,
        "chiplet_bw_cap_bytes_per_s" => d.chiplet_bw_cap_bytes_per_s = num(s, key, v)?,
        _ => return Err(value_err(s, key, "unknown key")),
    }
    Ok(())
}

fn fields<'a>(section: &str, key: &str, v: &'a str, min: usize, max: usize) -> Result<Vec<&'a str>> {
    let parts: Vec<&str> = v.split(',').map(str::trim).collect();
    if parts.len() < min || parts.len() > max {
        return Err(value_err(
            section,
            key,
            format!("expected {min} to {max} comma-separated values"),
        ));
    }
    Ok(parts)
}

#[derive(Default)]
struct PlatformDraft {
    clock_hz: Option<f64>,
    chiplets: Vec<(u64, u64, Option<f64>)>,
    memory: Vec<(f64, u64)>,
    gateways_per_chiplet: Option<usize>,
    mac_unit_power_mw: Option<f64>,
    onchip_latency_s: Option<f64>,
}

impl PlatformDraft {
    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let s = "platform";
        match key {
            "clock_hz" => self.clock_hz = Some(num(s, key, v)?),
            "chiplet" => {
                let f = fields(s, key, v, 2, 3)?;
                let clock = f.get(2).map(|c| num(s, key, c)).transpose()?;
                self.chiplets.push((num(s, key, f[0])?, num(s, key, f[1])?, clock));
            }
            "memory" => {
                let f = fields(s, key, v, 1, 2)?;
                let glb = f
                    .get(1)
                    .map(|g| num(s, key, g))
                    .transpose()?
                    .unwrap_or(DEFAULT_GLB_BYTES);
                self.memory.push((num(s, key, f[0])?, glb));
            }
            "gateways_per_chiplet" => self.gateways_per_chiplet = Some(num(s, key, v)?),
            "mac_unit_power_mw" => self.mac_unit_power_mw = Some(num(s, key, v)?),
            "onchip_latency_s" => self.onchip_latency_s = Some(num(s, key, v)?),
            _ => return Err(value_err(s, key, "unknown key")),
        }
        Ok(())
    }

    fn build(self) -> Result<ChipletPlatform> {
        let clock = self.clock_hz.unwrap_or(DEFAULT_CLOCK_HZ);
        let mut p = ChipletPlatform::default_2p5d(clock);
        if !self.chiplets.is_empty() {
            p.compute = self
                .chiplets
                .iter()
                .enumerate()
                .map(|(i, (s, n, c))| ComputeChiplet {
                    id: ChipletId(i as u32),
                    mac_unit_size: *s,
                    mac_unit_count: *n,
                    clock_hz: c.unwrap_or(clock),
                })
                .collect();
        }
        let first_mem = p.compute.len() as u32;
        if !self.memory.is_empty() {
            p.memory = self
                .memory
                .iter()
                .enumerate()
                .map(|(i, (bw, glb))| MemoryChiplet {
                    id: ChipletId(first_mem + i as u32),
                    bandwidth_bytes_per_s: *bw,
                    glb_bytes: *glb,
                })
                .collect();
        } else {
            for (i, m) in p.memory.iter_mut().enumerate() {
                m.id = ChipletId(first_mem + i as u32);
            }
        }
        if let Some(g) = self.gateways_per_chiplet {
            p.gateways_per_chiplet = g;
        }
        if let Some(m) = self.mac_unit_power_mw {
            p.mac_unit_power_mw = m;
        }
        if let Some(l) = self.onchip_latency_s {
            p.onchip_latency_s = l;
        }
        p.validate()?;
        Ok(p)
    }
}

/// Parses a config file body. Keys not given keep their defaults.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut draft = PlatformDraft::default();
    let mut section: Option<String> = None;
    let mut seen_network = false;
    let mut models: Vec<ModelSource> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                line: line_no,
                reason: "unterminated section header".into(),
            })?;
            let name = name.trim().to_string();
            let known = [
                "device",
                "network",
                "platform",
                "policy",
                "electrical",
                "sim",
                "workload",
                "report",
            ];
            if !known.contains(&name.as_str()) {
                return Err(Error::ConfigParse {
                    line: line_no,
                    reason: format!("unknown section `[{name}]`"),
                });
            }
            seen_network |= name == "network";
            section = Some(name);
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: line_no,
            reason: "expected `key = value`".into(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let Some(sec) = section.as_deref() else {
            return Err(Error::ConfigParse {
                line: line_no,
                reason: format!("key `{key}` outside of any section"),
            });
        };
        let with_line = |e: Error| match e {
            Error::ConfigValue { section, key, reason } => Error::ConfigValue {
                section,
                key,
                reason: format!("{reason} (line {line_no})"),
            },
            other => other,
        };
        match sec {
            "device" => set_device(&mut cfg.device, key, value).map_err(with_line)?,
            "platform" => draft.set(key, value).map_err(with_line)?,
            "network" => match key {
                "kind" => {
                    let k = value.to_ascii_lowercase();
                    if !TOPOLOGY_NAMES.contains(&k.as_str()) {
                        return Err(with_line(value_err(sec, key, format!("unknown topology `{value}`"))));
                    }
                    cfg.network.topology = k;
                }
                "subnetworks" => cfg.network.subnetworks = num(sec, key, value).map_err(with_line)?,
                "mesh_rows" => cfg.network.mesh_rows = num(sec, key, value).map_err(with_line)?,
                "mesh_cols" => cfg.network.mesh_cols = num(sec, key, value).map_err(with_line)?,
                _ => return Err(with_line(value_err(sec, key, "unknown key"))),
            },
            "policy" => match key {
                "enabled" => cfg.policy.enabled = boolean(sec, key, value).map_err(with_line)?,
                "epoch_s" => cfg.policy.epoch_s = num(sec, key, value).map_err(with_line)?,
                "threshold" => cfg.policy.deactivate_util_threshold = num(sec, key, value).map_err(with_line)?,
                _ => return Err(with_line(value_err(sec, key, "unknown key"))),
            },
            "electrical" => {
                let e = &mut cfg.sim.electrical;
                match key {
                    "epb_per_hop_pj" => e.epb_per_hop_pj = num(sec, key, value).map_err(with_line)?,
                    "router_cycles" => e.router_cycles = num(sec, key, value).map_err(with_line)?,
                    "wire_rate_gbps" => e.wire_rate_gbps = num(sec, key, value).map_err(with_line)?,
                    "wire_delay_s_per_cm" => e.wire_delay_s_per_cm = num(sec, key, value).map_err(with_line)?,
                    _ => return Err(with_line(value_err(sec, key, "unknown key"))),
                }
            }
            "sim" => match key {
                "gateway_word_bits" => cfg.sim.gateway_word_bits = num(sec, key, value).map_err(with_line)?,
                "group_delay_s_per_cm" => cfg.sim.group_delay_s_per_cm = num(sec, key, value).map_err(with_line)?,
                _ => return Err(with_line(value_err(sec, key, "unknown key"))),
            },
            "workload" => match key {
                "model" => models.extend(
                    value
                        .split(',')
                        .map(str::trim)
                        .filter(|m| !m.is_empty())
                        .map(|m| ModelSource::Builtin(m.to_string())),
                ),
                "model_file" => models.push(ModelSource::File(PathBuf::from(value))),
                "packet_bytes" => cfg.workload.packet_bytes = num(sec, key, value).map_err(with_line)?,
                "bit_width" => cfg.workload.bit_width = num(sec, key, value).map_err(with_line)?,
                _ => return Err(with_line(value_err(sec, key, "unknown key"))),
            },
            "report" => match key {
                "baseline" => cfg.baseline = Some(value.to_ascii_lowercase()),
                "out" => cfg.out_dir = Some(PathBuf::from(value)),
                _ => return Err(with_line(value_err(sec, key, "unknown key"))),
            },
            _ => unreachable!("section names are checked above"),
        }
    }
    if !seen_network {
        return Err(Error::MissingSection("network".into()));
    }
    if !models.is_empty() {
        cfg.workload.models = models;
    }
    cfg.platform = draft.build()?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_config(&text)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.platform.validate()?;
        self.policy.validate()?;
        self.sim.validate()?;
        if self.workload.packet_bytes == 0 {
            return Err(value_err("workload", "packet_bytes", "must be at least 1"));
        }
        if self.workload.bit_width == 0 {
            return Err(value_err("workload", "bit_width", "must be at least 1"));
        }
        if !TOPOLOGY_NAMES.contains(&self.network.topology.as_str()) {
            return Err(Error::UnknownTopology(self.network.topology.clone()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_keeps_defaults() {
        let cfg = parse_config("[network]\nkind = bus\n").unwrap();
        assert_eq!(cfg.network.topology, "bus");
        assert_eq!(cfg.device, DeviceParams::default());
        assert_eq!(cfg.platform, ChipletPlatform::default_2p5d(DEFAULT_CLOCK_HZ));
    }

    #[test]
    fn missing_network_section() {
        let err = parse_config("[device]\nmr_drop_loss_db = 0.7\n").unwrap_err();
        assert_eq!(err, Error::MissingSection("network".into()));
        assert!(err.to_string().contains("network"));
    }

    #[test]
    fn every_section() {
        let text = "\
# full config
[device]
mr_drop_loss_db = 0.7
wavelengths_per_waveguide = 16
[network]
kind = trine
subnetworks = 4
[platform]
chiplet = 9, 100
chiplet = 49, 20, 1e9
memory = 48e9
gateways_per_chiplet = 4
[policy]
enabled = false
epoch_s = 2e-6
threshold = 0.2
[electrical]
epb_per_hop_pj = 3
router_cycles = 4
wire_rate_gbps = 32
[sim]
gateway_word_bits = 128
[workload]
model = lenet5, vgg16
packet_bytes = 1024
bit_width = 16
[report]
baseline = tree
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.device.mr_drop_loss_db, 0.7);
        assert_eq!(cfg.device.wavelengths_per_waveguide, 16);
        assert_eq!(cfg.network.subnetworks, 4);
        assert_eq!(cfg.platform.compute.len(), 2);
        assert_eq!(cfg.platform.compute[1].clock_hz, 1e9);
        assert_eq!(cfg.platform.memory[0].id, ChipletId(2));
        assert_eq!(cfg.platform.memory[0].bandwidth_bytes_per_s, 48e9);
        assert_eq!(cfg.platform.gateways_per_chiplet, 4);
        assert!(!cfg.policy.enabled);
        assert_eq!(cfg.policy.deactivate_util_threshold, 0.2);
        assert_eq!(cfg.sim.electrical.router_cycles, 4);
        assert_eq!(cfg.sim.gateway_word_bits, 128);
        assert_eq!(cfg.workload.models.len(), 2);
        assert_eq!(cfg.workload.bit_width, 16);
        assert_eq!(cfg.baseline.as_deref(), Some("tree"));
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let err = parse_config("[network]\nkind = bus\n[device]\nmr_drop_loss_db = abc\n").unwrap_err();
        match err {
            Error::ConfigValue { section, key, reason } => {
                assert_eq!(section, "device");
                assert_eq!(key, "mr_drop_loss_db");
                assert!(reason.contains("line 4"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_config("[network]\nkind bus\n"),
            Err(Error::ConfigParse { line: 2, .. })
        ));
        assert!(matches!(
            parse_config("[nope]\n"),
            Err(Error::ConfigParse { line: 1, .. })
        ));
        assert!(matches!(
            parse_config("[network]\nkind = ring\n"),
            Err(Error::ConfigValue { .. })
        ));
        assert!(matches!(
            parse_config("kind = bus\n"),
            Err(Error::ConfigParse { line: 1, .. })
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(parse_config("[network]\n[policy]\nepoch_s = 0\n").is_err());
        assert!(parse_config("[network]\n[device]\nlaser_wall_plug_efficiency = 2\n").is_err());
        assert!(parse_config("[network]\n[workload]\npacket_bytes = 0\n").is_err());
    }
}
