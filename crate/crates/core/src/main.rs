use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use interposer_sim::config::{load_config, ModelSource, RunConfig, TOPOLOGY_NAMES};
use interposer_sim::report::{resolve_topology, run, sweep};
use interposer_sim::topology::{build, enumerate_devices};
use interposer_sim::workload::BUILTIN_MODELS;

#[derive(Parser)]
#[command(name = "interposer-sim", version, about = "Photonic interposer network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// INI-style config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Builtin model name; repeatable for sweeps.
    #[arg(long)]
    model: Vec<String>,
    /// Model description file; repeatable for sweeps.
    #[arg(long = "model-file")]
    model_file: Vec<PathBuf>,
    /// bus, tree, trine, mesh or monolithic; repeatable for sweeps.
    #[arg(long)]
    topology: Vec<String>,
    /// Topology the normalized columns are relative to.
    #[arg(long)]
    baseline: Option<String>,
    /// Output directory for reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reserved; results do not depend on it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one topology on one model.
    Run(Common),
    /// Simulate every topology x model pair.
    Sweep(Common),
    /// Print stage counts, device inventories and worst-case losses.
    InspectTopology(Common),
}

fn load(c: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &c.config {
        Some(p) => load_config(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    let mut models: Vec<ModelSource> = c.model.iter().map(|m| ModelSource::Builtin(m.clone())).collect();
    models.extend(c.model_file.iter().cloned().map(ModelSource::File));
    if !models.is_empty() {
        cfg.workload.models = models;
    }
    if let Some(b) = &c.baseline {
        cfg.baseline = Some(b.to_ascii_lowercase());
    }
    if let Some(o) = &c.out {
        cfg.out_dir = Some(o.clone());
    }
    if let Some(t) = c.topology.first() {
        cfg.network.topology = t.to_ascii_lowercase();
    }
    let _ = c.seed;
    Ok(cfg)
}

fn write_or_print(cfg: &RunConfig, report: &interposer_sim::SimReport) -> anyhow::Result<()> {
    match &cfg.out_dir {
        Some(dir) => {
            report.write(dir)?;
            eprintln!("wrote {} rows to {}", report.rows.len(), dir.display());
        }
        None => print!("{}", report.summary_text()),
    }
    Ok(())
}

fn main_inner() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(c) => {
            if c.topology.len() > 1 || c.model.len() + c.model_file.len() > 1 {
                bail!("`run` takes one topology and one model; use `sweep` for more");
            }
            let cfg = load(&c)?;
            let report = run(&cfg)?;
            write_or_print(&cfg, &report)?;
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let topologies: Vec<String> = if c.topology.is_empty() {
                ["bus", "tree", "trine", "mesh"].map(String::from).to_vec()
            } else {
                c.topology.iter().map(|t| t.to_ascii_lowercase()).collect()
            };
            let models = if c.model.is_empty() && c.model_file.is_empty() && c.config.is_none() {
                BUILTIN_MODELS
                    .iter()
                    .map(|m| ModelSource::Builtin(m.to_string()))
                    .collect()
            } else {
                cfg.workload.models.clone()
            };
            let report = sweep(&cfg, &topologies, &models)?;
            write_or_print(&cfg, &report)?;
        }
        Command::InspectTopology(c) => {
            let cfg = load(&c)?;
            let names: Vec<String> = if c.topology.is_empty() {
                vec![cfg.network.topology.clone()]
            } else {
                c.topology.iter().map(|t| t.to_ascii_lowercase()).collect()
            };
            for name in names {
                if !TOPOLOGY_NAMES.contains(&name.as_str()) {
                    bail!("unknown topology `{name}`");
                }
                let (kind, platform) = resolve_topology(&name, &cfg)?;
                let mut topo = build(kind, &platform, &cfg.device)?;
                topo.device_inventory = enumerate_devices(&topo, &platform, cfg.policy.enabled);
                println!("[{name}]");
                print!("{}", topo.describe(&cfg.device));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
