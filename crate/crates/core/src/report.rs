//! End-to-end runs, sweeps and their CSV / text reports.
//!
//! Every number is printed with nine significant digits so reports diff
//! cleanly. Rows are sorted by (topology, model) whatever order the sweep
//! cells finished in.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::accel::{crosslight_baseline, map_layers, ChipletPlatform};
use crate::config::{ModelSource, RunConfig};
use crate::error::{Error, Result};
use crate::power::{run_energy, static_power, PowerBreakdown};
use crate::sim::simulate;
use crate::topology::{build, enumerate_devices, subnetwork_count_for_memory_bw, TopologyKind};
use crate::workload::{build_trace, builtin_model, load_model_file, set_bit_width, LayerSpec, TraceOptions};

/// `%.9g`-style formatting.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (8 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt_g9(x: Option<f64>) -> String {
    x.map(fmt_g9).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub topology: String,
    pub model: String,
    /// Average power over the run, per component.
    pub power: PowerBreakdown,
    pub makespan_s: f64,
    pub energy_j: f64,
    pub bits: u64,
    pub epb_pj_per_bit: Option<f64>,
    pub total_mw_norm: Option<f64>,
    pub makespan_norm: Option<f64>,
    pub energy_norm: Option<f64>,
    pub epb_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub baseline: String,
    pub rows: Vec<SimRow>,
    /// Raw activity and derivation per row, same order as `rows`.
    pub audits: Vec<String>,
}

fn ratio(x: f64, base: f64) -> Option<f64> {
    (base != 0.0 && base.is_finite()).then(|| x / base)
}

impl SimReport {
    pub fn row(&self, topology: &str, model: &str) -> Option<&SimRow> {
        self.rows.iter().find(|r| r.topology == topology && r.model == model)
    }

    fn normalize(&mut self) -> Result<()> {
        let models: Vec<String> = self.rows.iter().map(|r| r.model.clone()).collect();
        for model in models {
            let base = self
                .row(&self.baseline, &model)
                .cloned()
                .ok_or_else(|| Error::MissingBaseline(self.baseline.clone()))?;
            for r in self.rows.iter_mut().filter(|r| r.model == model) {
                r.total_mw_norm = ratio(r.power.total_mw, base.power.total_mw);
                r.makespan_norm = ratio(r.makespan_s, base.makespan_s);
                r.energy_norm = ratio(r.energy_j, base.energy_j);
                r.epb_norm = match (r.epb_pj_per_bit, base.epb_pj_per_bit) {
                    (Some(a), Some(b)) => ratio(a, b),
                    _ => None,
                };
            }
        }
        Ok(())
    }

    pub fn power_csv(&self) -> String {
        let mut s = String::from(
            "topology,model,laser_mw,trimming_mw,mzi_static_mw,gateway_mw,mac_mw,electrical_mw,total_mw,total_mw_norm\n",
        );
        for r in &self.rows {
            let p = &r.power;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.topology,
                r.model,
                fmt_g9(p.laser_mw),
                fmt_g9(p.trimming_mw),
                fmt_g9(p.mzi_static_mw),
                fmt_g9(p.gateway_mw),
                fmt_g9(p.mac_mw),
                fmt_g9(p.electrical_mw),
                fmt_g9(p.total_mw),
                opt_g9(r.total_mw_norm)
            );
        }
        s
    }

    pub fn latency_csv(&self) -> String {
        let mut s = String::from("topology,model,makespan_s,makespan_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                r.topology,
                r.model,
                fmt_g9(r.makespan_s),
                opt_g9(r.makespan_norm)
            );
        }
        s
    }

    pub fn epb_csv(&self) -> String {
        let mut s = String::from("topology,model,energy_j,bits,epb_pj_per_bit,energy_norm,epb_norm\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.topology,
                r.model,
                fmt_g9(r.energy_j),
                r.bits,
                opt_g9(r.epb_pj_per_bit),
                opt_g9(r.energy_norm),
                opt_g9(r.epb_norm)
            );
        }
        s
    }

    /// One `[topology/model]` block per row, `key = value` lines.
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "baseline = {}", self.baseline);
        let _ = writeln!(s, "rows = {}", self.rows.len());
        for r in &self.rows {
            let p = &r.power;
            let _ = writeln!(s, "\n[{}/{}]", r.topology, r.model);
            let kv = [
                ("laser_mw", fmt_g9(p.laser_mw)),
                ("trimming_mw", fmt_g9(p.trimming_mw)),
                ("mzi_static_mw", fmt_g9(p.mzi_static_mw)),
                ("gateway_mw", fmt_g9(p.gateway_mw)),
                ("mac_mw", fmt_g9(p.mac_mw)),
                ("electrical_mw", fmt_g9(p.electrical_mw)),
                ("total_mw", fmt_g9(p.total_mw)),
                ("makespan_s", fmt_g9(r.makespan_s)),
                ("energy_j", fmt_g9(r.energy_j)),
                ("bits", r.bits.to_string()),
                ("epb_pj_per_bit", opt_g9(r.epb_pj_per_bit)),
                ("total_mw_norm", opt_g9(r.total_mw_norm)),
                ("makespan_norm", opt_g9(r.makespan_norm)),
                ("energy_norm", opt_g9(r.energy_norm)),
                ("epb_norm", opt_g9(r.epb_norm)),
            ];
            for (k, v) in kv {
                let _ = writeln!(s, "{k} = {v}");
            }
        }
        s
    }

    /// Writes the three CSVs, the summary and `audit/` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let io = |p: &Path, e: std::io::Error| Error::Io {
            path: p.display().to_string(),
            reason: e.to_string(),
        };
        let audit = dir.join("audit");
        fs::create_dir_all(&audit).map_err(|e| io(&audit, e))?;
        let files = [
            ("report_power.csv", self.power_csv()),
            ("report_latency.csv", self.latency_csv()),
            ("report_epb.csv", self.epb_csv()),
            ("summary.txt", self.summary_text()),
        ];
        for (name, body) in files {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| io(&p, e))?;
        }
        for (r, text) in self.rows.iter().zip(&self.audits) {
            let p = audit.join(format!("{}_{}.txt", r.topology, r.model));
            fs::write(&p, text).map_err(|e| io(&p, e))?;
        }
        Ok(())
    }
}

/// Topology kind and platform a topology name runs on.
pub fn resolve_topology(name: &str, cfg: &RunConfig) -> Result<(TopologyKind, ChipletPlatform)> {
    let p = &cfg.platform;
    let kind = match name {
        "bus" => TopologyKind::Bus,
        "tree" => TopologyKind::Tree,
        "trine" => {
            let k = if cfg.network.subnetworks > 0 {
                cfg.network.subnetworks
            } else {
                subnetwork_count_for_memory_bw(p.total_memory_bw(), &cfg.device, p.compute_gateway_count())
            };
            TopologyKind::Trine(k)
        }
        "mesh" => TopologyKind::ElectricalMesh {
            rows: cfg.network.mesh_rows,
            cols: cfg.network.mesh_cols,
        },
        "monolithic" => return Ok((TopologyKind::Monolithic, crosslight_baseline(p)?)),
        other => return Err(Error::UnknownTopology(other.to_string())),
    };
    Ok((kind, p.clone()))
}

pub fn load_model(source: &ModelSource, bit_width: u32) -> Result<Vec<LayerSpec>> {
    let mut model = match source {
        ModelSource::Builtin(name) => builtin_model(name)?,
        ModelSource::File(path) => load_model_file(path)?,
    };
    set_bit_width(&mut model, bit_width);
    Ok(model)
}

/// One (topology, model) cell: the un-normalized row and its audit text.
pub fn simulate_cell(cfg: &RunConfig, topology: &str, source: &ModelSource) -> Result<(SimRow, String)> {
    let params = &cfg.device;
    let (kind, platform) = resolve_topology(topology, cfg)?;
    let topo = build(kind, &platform, params)?;
    let model = load_model(source, cfg.workload.bit_width)?;
    let mapping = map_layers(&model, &platform);
    let trace = build_trace(
        &model,
        &mapping,
        &TraceOptions {
            packet_bytes: cfg.workload.packet_bytes,
            memory: platform.memory_ids(),
        },
    )?;
    let adaptive = cfg.policy.enabled && kind.is_photonic();
    let inventory = enumerate_devices(&topo, &platform, adaptive);
    let mut stat = static_power(&topo, &inventory, params);
    stat.mac_mw = platform.mac_power_mw(params.mr_trim_power_mw);
    stat.total_mw = stat.component_sum_mw();

    let log = simulate(&trace, &topo, &platform, params, &cfg.policy, &cfg.sim)?;
    let energy = run_energy(&log, &stat, &topo, params, &cfg.sim);
    let bits = log.bits_delivered();
    let power = if log.makespan_s > 0.0 {
        energy.average_power(log.makespan_s, bits)
    } else {
        stat
    };
    let row = SimRow {
        topology: topology.to_string(),
        model: source.name(),
        power,
        makespan_s: log.makespan_s,
        energy_j: energy.total_j(),
        bits,
        epb_pj_per_bit: power.epb_pj_per_bit,
        total_mw_norm: None,
        makespan_norm: None,
        energy_norm: None,
        epb_norm: None,
    };

    let mut audit = String::new();
    let _ = writeln!(audit, "topology {topology}");
    let _ = writeln!(audit, "model {}", row.model);
    let _ = writeln!(audit, "layers {}", model.len());
    for (i, c) in mapping.assignments().iter().enumerate() {
        let _ = writeln!(audit, "map layer{i} {c}");
    }
    let inv = &inventory;
    let _ = writeln!(
        audit,
        "inventory mr_modulators={} mr_filters={} mzi_switches={} pcmc_couplers={} laser_sources={}",
        inv.mr_modulators, inv.mr_filters, inv.mzi_switches, inv.pcmc_couplers, inv.laser_sources
    );
    let _ = writeln!(audit, "static_laser_mw {}", fmt_g9(stat.laser_mw));
    let _ = writeln!(audit, "static_trimming_mw {}", fmt_g9(stat.trimming_mw));
    let _ = writeln!(audit, "static_mzi_static_mw {}", fmt_g9(stat.mzi_static_mw));
    let _ = writeln!(audit, "static_gateway_mw {}", fmt_g9(stat.gateway_mw));
    let _ = writeln!(audit, "static_mac_mw {}", fmt_g9(stat.mac_mw));
    let _ = writeln!(audit, "energy_laser_j {}", fmt_g9(energy.laser_j));
    let _ = writeln!(audit, "energy_trimming_j {}", fmt_g9(energy.trimming_j));
    let _ = writeln!(audit, "energy_mzi_static_j {}", fmt_g9(energy.mzi_static_j));
    let _ = writeln!(audit, "energy_gateway_j {}", fmt_g9(energy.gateway_j));
    let _ = writeln!(audit, "energy_pcmc_j {}", fmt_g9(energy.pcmc_j));
    let _ = writeln!(audit, "energy_mac_j {}", fmt_g9(energy.mac_j));
    let _ = writeln!(audit, "energy_electrical_j {}", fmt_g9(energy.electrical_j));
    audit.push_str(&log.to_text());
    Ok((row, audit))
}

/// Cross product of `topologies` and `models`, normalized to the baseline.
pub fn sweep(cfg: &RunConfig, topologies: &[String], models: &[ModelSource]) -> Result<SimReport> {
    if topologies.is_empty() || models.is_empty() {
        return Err(Error::InvalidPlatform(
            "sweep needs at least one topology and one model".into(),
        ));
    }
    let baseline = match &cfg.baseline {
        Some(b) => b.clone(),
        None if topologies.iter().any(|t| t == "bus") => "bus".into(),
        None => topologies[0].clone(),
    };
    if !topologies.contains(&baseline) {
        return Err(Error::MissingBaseline(baseline));
    }
    let cells: Vec<(String, ModelSource)> = topologies
        .iter()
        .flat_map(|t| models.iter().map(move |m| (t.clone(), m.clone())))
        .collect();
    let mut done = cells
        .par_iter()
        .map(|(t, m)| simulate_cell(cfg, t, m))
        .collect::<Result<Vec<_>>>()?;
    done.sort_by(|a, b| (&a.0.topology, &a.0.model).cmp(&(&b.0.topology, &b.0.model)));
    let (rows, audits) = done.into_iter().unzip();
    let mut report = SimReport { baseline, rows, audits };
    report.normalize()?;
    Ok(report)
}

/// The configured topology on the first configured model.
pub fn run(cfg: &RunConfig) -> Result<SimReport> {
    let model = cfg
        .workload
        .models
        .first()
        .cloned()
        .ok_or_else(|| Error::UnknownModel(String::new()))?;
    // A single row is its own baseline; `baseline` only applies to sweeps.
    let cfg = RunConfig {
        baseline: None,
        ..cfg.clone()
    };
    sweep(&cfg, std::slice::from_ref(&cfg.network.topology), &[model])
}
