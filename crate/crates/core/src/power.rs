//! Static power breakdown, run energy and the PCMC adaptive-gateway policy.
//!
//! Powers are in mW, energies in J. Laser, trimming, MZI bias and MAC power
//! are drawn for the whole makespan. Gateways draw power only while active;
//! without the policy that is also the whole makespan.

use std::collections::HashMap;

use crate::device::{required_laser_power_mw, wall_plug_laser_power_mw, DeviceParams};
use crate::error::{Error, Result};
use crate::sim::{
    active_times, window_busy, ActivityLog, GatewaySchedule, GatewayTransition, SimOptions, TransferRecord,
};
use crate::topology::{DeviceInventory, GatewayId, NetworkTopology, TopologyKind};

#[derive(Debug, Clone, PartialEq)]
pub struct PcmcPolicy {
    pub enabled: bool,
    pub epoch_s: f64,
    /// A gateway busy for less than this fraction of an epoch is switched off.
    pub deactivate_util_threshold: f64,
}

impl Default for PcmcPolicy {
    fn default() -> Self {
        Self {
            enabled: true,
            epoch_s: 1e-6,
            deactivate_util_threshold: 0.05,
        }
    }
}

impl PcmcPolicy {
    pub fn disabled() -> Self {
        Self {
            enabled: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epoch_s.is_finite() && self.epoch_s > 0.0) {
            return Err(Error::InvalidParam {
                field: "epoch_s",
                reason: format!("must be a finite value > 0, got {}", self.epoch_s),
            });
        }
        let t = self.deactivate_util_threshold;
        if !(0.0..1.0).contains(&t) {
            return Err(Error::InvalidParam {
                field: "threshold",
                reason: format!("must lie in [0, 1), got {t}"),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerBreakdown {
    pub laser_mw: f64,
    pub trimming_mw: f64,
    pub mzi_static_mw: f64,
    pub gateway_mw: f64,
    pub mac_mw: f64,
    pub electrical_mw: f64,
    pub total_mw: f64,
    pub energy_j: f64,
    pub epb_pj_per_bit: Option<f64>,
}

impl PowerBreakdown {
    pub fn component_sum_mw(&self) -> f64 {
        self.laser_mw + self.trimming_mw + self.mzi_static_mw + self.gateway_mw + self.mac_mw + self.electrical_mw
    }

    fn with_total(mut self) -> Self {
        self.total_mw = self.component_sum_mw();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBreakdown {
    pub laser_j: f64,
    pub trimming_j: f64,
    pub mzi_static_j: f64,
    /// Gateway power plus PCMC reactivation energy.
    pub gateway_j: f64,
    pub pcmc_j: f64,
    pub mac_j: f64,
    pub electrical_j: f64,
}

impl EnergyBreakdown {
    pub fn total_j(&self) -> f64 {
        self.laser_j + self.trimming_j + self.mzi_static_j + self.gateway_j + self.mac_j + self.electrical_j
    }

    /// Average power per component over `makespan_s`.
    pub fn average_power(&self, makespan_s: f64, bits: u64) -> PowerBreakdown {
        let mw = |j: f64| if makespan_s > 0.0 { j / makespan_s * 1e3 } else { 0.0 };
        let energy_j = self.total_j();
        PowerBreakdown {
            laser_mw: mw(self.laser_j),
            trimming_mw: mw(self.trimming_j),
            mzi_static_mw: mw(self.mzi_static_j),
            gateway_mw: mw(self.gateway_j),
            mac_mw: mw(self.mac_j),
            electrical_mw: mw(self.electrical_j),
            total_mw: 0.0,
            energy_j,
            epb_pj_per_bit: energy_per_bit_pj(energy_j, bits).ok(),
        }
        .with_total()
    }
}

/// Wall-plug laser power with compute gateways masked by `active`.
pub fn laser_power_mw(topology: &NetworkTopology, params: &DeviceParams, active: Option<&[bool]>) -> f64 {
    let lambda = params.wavelengths_per_waveguide as f64;
    (0..topology.laser_count())
        .map(|l| {
            let loss = topology.laser_loss_db(l, params, active);
            wall_plug_laser_power_mw(required_laser_power_mw(loss, params), params) * lambda
        })
        .sum()
}

pub fn static_power(topology: &NetworkTopology, inventory: &DeviceInventory, params: &DeviceParams) -> PowerBreakdown {
    let gateways = if topology.kind.is_photonic() {
        topology.gateways.len()
    } else {
        0
    };
    PowerBreakdown {
        laser_mw: laser_power_mw(topology, params, None),
        trimming_mw: inventory.microrings() as f64 * params.mr_trim_power_mw,
        mzi_static_mw: inventory.mzi_switches as f64 * params.mzi_static_power_mw,
        gateway_mw: gateways as f64 * params.gateway_power_mw,
        ..Default::default()
    }
    .with_total()
}

pub fn energy_per_bit_pj(energy_j: f64, bits: u64) -> Result<f64> {
    if bits == 0 {
        return Err(Error::ZeroBits);
    }
    Ok(energy_j / bits as f64 * 1e12)
}

/// Laser energy saved while deactivated gateway taps are decoupled.
fn laser_savings_j(
    topology: &NetworkTopology,
    params: &DeviceParams,
    transitions: &[GatewayTransition],
    full_mw: f64,
    makespan: f64,
) -> f64 {
    let mut mask = vec![true; topology.gateways.len()];
    let mut cache: HashMap<Vec<bool>, f64> = HashMap::new();
    let mut saving = |mask: &Vec<bool>| -> f64 {
        *cache
            .entry(mask.clone())
            .or_insert_with(|| (full_mw - laser_power_mw(topology, params, Some(mask))).max(0.0))
    };
    let mut saved_mj = 0.0;
    let mut t_prev = 0.0;
    let mut i = 0;
    while i < transitions.len() {
        let t = transitions[i].time_s;
        saved_mj += saving(&mask) * (t - t_prev);
        while i < transitions.len() && transitions[i].time_s == t {
            mask[transitions[i].gateway.0 as usize] = transitions[i].active;
            i += 1;
        }
        t_prev = t;
    }
    saved_mj += saving(&mask) * (makespan - t_prev);
    saved_mj * 1e-3
}

/// Energy of one run given its log and static breakdown. The breakdown's
/// `mac_mw` is drawn for the makespan like the other static terms; gateways
/// draw `params.gateway_power_mw` each while active.
pub fn run_energy(
    log: &ActivityLog,
    breakdown: &PowerBreakdown,
    topology: &NetworkTopology,
    params: &DeviceParams,
    opts: &SimOptions,
) -> EnergyBreakdown {
    let m = log.makespan_s;
    let mj = |mw: f64| mw * m * 1e-3;
    let mut e = EnergyBreakdown {
        laser_j: mj(breakdown.laser_mw),
        trimming_j: mj(breakdown.trimming_mw),
        mzi_static_j: mj(breakdown.mzi_static_mw),
        gateway_j: 0.0,
        pcmc_j: 0.0,
        mac_j: mj(breakdown.mac_mw),
        electrical_j: log.mesh_bit_hops as f64 * opts.electrical.epb_per_hop_pj * 1e-12,
    };
    // Per-gateway sum either way, so an all-active schedule costs exactly
    // what the policy-free run costs.
    let gateway_count = if topology.kind.is_photonic() {
        topology.gateways.len()
    } else {
        0
    };
    let active_s: f64 = match &log.schedule {
        Some(sched) => sched.active_time_s.iter().take(gateway_count).sum(),
        None => std::iter::repeat_n(m, gateway_count).sum(),
    };
    e.gateway_j = active_s * params.gateway_power_mw * 1e-3;
    if let Some(sched) = &log.schedule {
        if topology.kind == TopologyKind::Bus && !sched.transitions.is_empty() {
            let saved = laser_savings_j(topology, params, &sched.transitions, breakdown.laser_mw, m);
            e.laser_j = (e.laser_j - saved).max(0.0);
        }
        e.pcmc_j = sched.reactivations as f64 * params.pcmc_switch_energy_j;
        e.gateway_j += e.pcmc_j;
    }
    e
}

/// Rebuilds the gateway schedule the policy produces for the busy intervals
/// recorded in `log`. Matches the schedule the simulator applied online.
pub fn apply_pcmc_policy(log: &ActivityLog, policy: &PcmcPolicy, topology: &NetworkTopology) -> GatewaySchedule {
    let n = topology.gateways.len();
    let mut sched = GatewaySchedule::default();
    if !policy.enabled || !topology.kind.is_photonic() {
        sched.active_time_s = vec![log.makespan_s; n];
        return sched;
    }
    let compute: Vec<usize> = topology.compute_gateways().map(|g| g.id.0 as usize).collect();
    let mut per_gw: Vec<Vec<TransferRecord>> = vec![Vec::new(); n];
    for r in &log.transfers {
        per_gw[r.compute_gateway.0 as usize].push(r.clone());
    }
    let mut cursor = vec![0usize; n];
    let mut active = vec![true; n];
    let mut next = 0usize;

    let start_until = |limit: Option<f64>, active: &mut Vec<bool>, sched: &mut GatewaySchedule, next: &mut usize| {
        while *next < log.transfers.len() {
            let r = &log.transfers[*next];
            if limit.is_some_and(|t| r.start_s >= t) {
                break;
            }
            let g = r.compute_gateway.0 as usize;
            if !active[g] {
                active[g] = true;
                sched.reactivations += 1;
                sched.transitions.push(GatewayTransition {
                    time_s: r.start_s,
                    gateway: r.compute_gateway,
                    active: true,
                });
            }
            *next += 1;
        }
    };

    let mut e = 1usize;
    loop {
        let t = e as f64 * policy.epoch_s;
        if t > log.makespan_s {
            break;
        }
        start_until(Some(t), &mut active, &mut sched, &mut next);
        for &g in &compute {
            if !active[g] {
                continue;
            }
            let (busy, in_progress) = window_busy(&per_gw[g], &mut cursor[g], t, policy.epoch_s);
            if busy / policy.epoch_s < policy.deactivate_util_threshold && !in_progress {
                active[g] = false;
                sched.deactivations += 1;
                sched.transitions.push(GatewayTransition {
                    time_s: t,
                    gateway: GatewayId(g as u32),
                    active: false,
                });
            }
        }
        e += 1;
    }
    start_until(None, &mut active, &mut sched, &mut next);
    sched.active_time_s = active_times(&sched.transitions, n, log.makespan_s);
    sched
}
