//! Discrete-event replay of a traffic trace over an interposer network.
//!
//! Events are ordered by `(time, sequence)`. All events sharing a timestamp
//! form one batch: epoch boundaries are handled first, then the rest in
//! sequence order, then waiting transfers are arbitrated once. Every shared
//! medium (switch subnetwork, bus waveguide, mesh link, on-die channel) is a
//! FIFO on the transfer issue index and a transfer starts only when it heads
//! the queue of each medium it needs.
//!
//! Layers run back to back behind a barrier: reads, then compute, then writes.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;

use crate::accel::{compute_passes, ChipletId, ChipletPlatform};
use crate::device::{ChainElement, DeviceParams};
use crate::error::{Error, Result};
use crate::power::PcmcPolicy;
use crate::report::fmt_g9;
use crate::topology::{GatewayId, Medium, NetworkTopology, Route};
use crate::workload::{TrafficTrace, TransferRequest};

/// Electrical mesh constants.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricalParams {
    pub epb_per_hop_pj: f64,
    pub router_cycles: u32,
    pub wire_rate_gbps: f64,
    pub wire_delay_s_per_cm: f64,
}

impl Default for ElectricalParams {
    fn default() -> Self {
        Self {
            epb_per_hop_pj: 2.0,
            router_cycles: 3,
            wire_rate_gbps: 40.0,
            wire_delay_s_per_cm: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    pub gateway_word_bits: u32,
    pub group_delay_s_per_cm: f64,
    pub electrical: ElectricalParams,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            gateway_word_bits: 64,
            group_delay_s_per_cm: 0.1e-9,
            electrical: ElectricalParams::default(),
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, v: f64| Error::InvalidParam {
            field,
            reason: format!("must be a finite value > 0, got {v}"),
        };
        if self.gateway_word_bits == 0 {
            return Err(bad("gateway_word_bits", 0.0));
        }
        if !(self.group_delay_s_per_cm.is_finite() && self.group_delay_s_per_cm >= 0.0) {
            return Err(bad("group_delay_s_per_cm", self.group_delay_s_per_cm));
        }
        let e = &self.electrical;
        if !(e.wire_rate_gbps.is_finite() && e.wire_rate_gbps > 0.0) {
            return Err(bad("wire_rate_gbps", e.wire_rate_gbps));
        }
        if !(e.epb_per_hop_pj.is_finite() && e.epb_per_hop_pj >= 0.0) {
            return Err(bad("epb_per_hop_pj", e.epb_per_hop_pj));
        }
        if !(e.wire_delay_s_per_cm.is_finite() && e.wire_delay_s_per_cm >= 0.0) {
            return Err(bad("wire_delay_s_per_cm", e.wire_delay_s_per_cm));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventKind {
    InjectTransfer,
    SwitchSetupDone,
    TransferDone,
    ComputeDone,
    EpochBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time_s: f64,
    pub seq: u64,
    pub kind: EventKind,
    pub payload: usize,
}

impl Eq for Event {}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time_s.total_cmp(&other.time_s).then(self.seq.cmp(&other.seq))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    /// Issue index from the trace.
    pub index: usize,
    pub layer: usize,
    pub bytes: u64,
    pub compute_gateway: GatewayId,
    pub memory_gateway: GatewayId,
    pub start_s: f64,
    pub end_s: f64,
    pub switch_setup: bool,
    pub reactivated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GatewayTransition {
    pub time_s: f64,
    pub gateway: GatewayId,
    pub active: bool,
}

/// Gateway on/off history under the PCMC policy.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GatewaySchedule {
    pub transitions: Vec<GatewayTransition>,
    /// Powered time per gateway, indexed by gateway id.
    pub active_time_s: Vec<f64>,
    pub deactivations: u64,
    pub reactivations: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ActivityLog {
    pub makespan_s: f64,
    /// Transfers in start order.
    pub transfers: Vec<TransferRecord>,
    /// Busy time per gateway id.
    pub gateway_busy_s: Vec<f64>,
    pub medium_busy_s: BTreeMap<Medium, f64>,
    /// Reconfigurations per MZI, keyed by (subnetwork, level, index).
    pub mzi_reconfigurations: BTreeMap<(usize, u32, u64), u64>,
    pub compute_busy_s: BTreeMap<ChipletId, f64>,
    pub bytes_delivered: u64,
    /// Σ bits × routers traversed, mesh only.
    pub mesh_bit_hops: u128,
    /// Present when the PCMC policy was active.
    pub schedule: Option<GatewaySchedule>,
}

impl ActivityLog {
    pub fn bits_delivered(&self) -> u64 {
        self.bytes_delivered * 8
    }

    /// Plain-text dump, stable across runs.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "makespan_s {}", fmt_g9(self.makespan_s));
        let _ = writeln!(s, "bytes_delivered {}", self.bytes_delivered);
        let _ = writeln!(s, "mesh_bit_hops {}", self.mesh_bit_hops);
        for (g, busy) in self.gateway_busy_s.iter().enumerate() {
            let _ = writeln!(s, "gateway_busy g{g} {}", fmt_g9(*busy));
        }
        for (m, busy) in &self.medium_busy_s {
            let _ = writeln!(s, "medium_busy {} {}", medium_label(m), fmt_g9(*busy));
        }
        for ((sub, level, idx), n) in &self.mzi_reconfigurations {
            let _ = writeln!(s, "mzi_reconfig s{sub}.l{level}.i{idx} {n}");
        }
        for (c, busy) in &self.compute_busy_s {
            let _ = writeln!(s, "compute_busy {c} {}", fmt_g9(*busy));
        }
        if let Some(sched) = &self.schedule {
            let _ = writeln!(s, "pcmc_deactivations {}", sched.deactivations);
            let _ = writeln!(s, "pcmc_reactivations {}", sched.reactivations);
            for (g, t) in sched.active_time_s.iter().enumerate() {
                let _ = writeln!(s, "gateway_active g{g} {}", fmt_g9(*t));
            }
            for tr in &sched.transitions {
                let _ = writeln!(
                    s,
                    "gateway_transition {} g{} {}",
                    fmt_g9(tr.time_s),
                    tr.gateway.0,
                    if tr.active { "on" } else { "off" }
                );
            }
        }
        let _ = writeln!(
            s,
            "# transfer index layer bytes compute_gw memory_gw start end setup reactivated"
        );
        for t in &self.transfers {
            let _ = writeln!(
                s,
                "transfer {} {} {} g{} g{} {} {} {} {}",
                t.index,
                t.layer,
                t.bytes,
                t.compute_gateway.0,
                t.memory_gateway.0,
                fmt_g9(t.start_s),
                fmt_g9(t.end_s),
                t.switch_setup as u8,
                t.reactivated as u8
            );
        }
        s
    }
}

pub fn medium_label(m: &Medium) -> String {
    match m {
        Medium::Subnetwork(j) => format!("subnetwork{j}"),
        Medium::Waveguide(w) => format!("waveguide{w}"),
        Medium::Link(a, b) => format!("link{a}-{b}"),
        Medium::OnChip(c) => format!("onchip-{c}"),
    }
}

/// Serialization rate in bits/s of a route, before any per-hop overhead.
fn line_rate_bps(route: &Route, platform: &ChipletPlatform, params: &DeviceParams, opts: &SimOptions) -> f64 {
    let cap = params.chiplet_bw_cap_bytes_per_s * 8.0;
    let inject = params.gateway_clock_hz * opts.gateway_word_bits as f64;
    match route {
        Route::Photonic { .. } => params.waveguide_rate_bps().min(cap).min(inject),
        Route::Mesh { .. } => (opts.electrical.wire_rate_gbps * 1e9).min(cap).min(inject),
        Route::OnChip { memory } => platform
            .memory_chiplet(*memory)
            .map(|m| m.bandwidth_bytes_per_s * 8.0)
            .unwrap_or(cap),
    }
}

/// Time the medium is occupied once any setup is done.
fn occupancy_s(bytes: u64, route: &Route, platform: &ChipletPlatform, params: &DeviceParams, opts: &SimOptions) -> f64 {
    let ser = bytes as f64 * 8.0 / line_rate_bps(route, platform, params, opts);
    match route {
        Route::Photonic { length_cm, .. } => ser + length_cm * opts.group_delay_s_per_cm,
        Route::Mesh { routers, length_cm } => {
            let e = &opts.electrical;
            let per_router = e.router_cycles as f64 / params.gateway_clock_hz;
            ser + routers.len() as f64 * per_router + length_cm * e.wire_delay_s_per_cm
        }
        Route::OnChip { .. } => ser + platform.onchip_latency_s,
    }
}

fn mzi_count(route: &Route) -> usize {
    route
        .chain()
        .map(|c| c.count(|e| matches!(e, ChainElement::MziStage)))
        .unwrap_or(0)
}

/// Contention-free latency of one transfer on `route`, starting from an
/// unconfigured switch tree.
pub fn analytic_latency_s(
    transfer: &TransferRequest,
    route: &Route,
    platform: &ChipletPlatform,
    params: &DeviceParams,
    opts: &SimOptions,
) -> f64 {
    let setup = if mzi_count(route) > 0 {
        params.mzi_switch_time_s
    } else {
        0.0
    };
    setup + occupancy_s(transfer.bytes, route, platform, params, opts)
}

/// Busy time of `records` inside `[t - epoch, t]` and whether one of them
/// straddles `t`. `first` is a cursor that only moves forward.
pub(crate) fn window_busy(records: &[TransferRecord], first: &mut usize, t: f64, epoch: f64) -> (f64, bool) {
    let ws = t - epoch;
    while *first < records.len() && records[*first].end_s <= ws {
        *first += 1;
    }
    let mut busy = 0.0;
    let mut in_progress = false;
    for r in &records[*first..] {
        if r.start_s >= t {
            break;
        }
        let lo = r.start_s.max(ws);
        let hi = r.end_s.min(t);
        if hi > lo {
            busy += hi - lo;
        }
        if r.start_s < t && t < r.end_s {
            in_progress = true;
        }
    }
    (busy, in_progress)
}

/// Per-gateway powered time given the on/off transitions.
pub(crate) fn active_times(transitions: &[GatewayTransition], gateways: usize, makespan: f64) -> Vec<f64> {
    let mut off_since: Vec<Option<f64>> = vec![None; gateways];
    let mut inactive = vec![0.0; gateways];
    for tr in transitions {
        let g = tr.gateway.0 as usize;
        if tr.active {
            if let Some(t0) = off_since[g].take() {
                inactive[g] += tr.time_s - t0;
            }
        } else {
            off_since[g] = Some(tr.time_s);
        }
    }
    for (g, off) in off_since.iter().enumerate() {
        if let Some(t0) = off {
            inactive[g] += makespan - t0;
        }
    }
    inactive.iter().map(|x| (makespan - x).max(0.0)).collect()
}

struct Planned {
    route: Route,
    media: Vec<Medium>,
    compute_gw: GatewayId,
    memory_gw: GatewayId,
    mzi_nodes: Vec<((usize, u32, u64), bool)>,
}

struct LayerPlan {
    reads: Vec<usize>,
    writes: Vec<usize>,
    compute_s: f64,
    chiplet: Option<ChipletId>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Reads,
    Compute,
    Writes,
}

fn mzi_nodes(route: &Route, stages: u32) -> Vec<((usize, u32, u64), bool)> {
    let Route::Photonic {
        medium: Medium::Subnetwork(sub),
        leaf: Some(leaf),
        ..
    } = route
    else {
        return Vec::new();
    };
    let leaf = *leaf as u64;
    (0..stages)
        .map(|level| {
            let idx = leaf >> (stages - level);
            let bit = (leaf >> (stages - level - 1)) & 1 == 1;
            ((*sub, level, idx), bit)
        })
        .collect()
}

/// Gateways and route a transfer takes: packet `chunk` of a striped
/// transfer uses lane `chunk % lanes` of its compute chiplet.
pub fn transfer_route<'t>(
    topology: &'t NetworkTopology,
    t: &TransferRequest,
) -> Result<(GatewayId, GatewayId, &'t Route)> {
    let compute = t.compute_chiplet();
    let memory = t.memory_chiplet();
    let lanes = topology
        .lanes
        .get(&compute)
        .filter(|l| !l.is_empty())
        .ok_or_else(|| Error::InvalidPlatform(format!("compute chiplet {compute} not in topology")))?;
    let compute_gw = lanes[t.chunk % lanes.len()];
    let memory_gw = *topology
        .memory_gateway
        .get(&memory)
        .ok_or_else(|| Error::InvalidPlatform(format!("memory chiplet {memory} not in topology")))?;
    let (src, dst) = if t.class.is_read() {
        (memory_gw, compute_gw)
    } else {
        (compute_gw, memory_gw)
    };
    let route = topology
        .route(src, dst)
        .ok_or_else(|| Error::InvalidPlatform(format!("no route g{} -> g{}", src.0, dst.0)))?;
    Ok((compute_gw, memory_gw, route))
}

fn plan_transfers(trace: &TrafficTrace, topo: &NetworkTopology) -> Result<Vec<Planned>> {
    trace
        .transfers
        .iter()
        .map(|t| {
            let (compute_gw, memory_gw, route) = transfer_route(topo, t)?;
            Ok(Planned {
                media: route.media(),
                mzi_nodes: mzi_nodes(route, topo.stage_count),
                route: route.clone(),
                compute_gw,
                memory_gw,
            })
        })
        .collect()
}

struct Engine<'a> {
    trace: &'a TrafficTrace,
    topo: &'a NetworkTopology,
    platform: &'a ChipletPlatform,
    params: &'a DeviceParams,
    opts: &'a SimOptions,
    policy_on: bool,
    epoch_s: f64,
    threshold: f64,

    heap: BinaryHeap<Reverse<Event>>,
    seq: u64,
    plans: Vec<Planned>,
    layers: Vec<LayerPlan>,
    layer: usize,
    phase: Phase,
    outstanding: usize,
    /// Waiting transfers per medium, keyed by (issue index, trace position).
    queues: HashMap<Medium, BTreeSet<(usize, usize)>>,
    waiting: usize,
    /// Media whose queue head or occupancy changed in the current batch.
    touched: BTreeSet<Medium>,
    medium_busy: HashSet<Medium>,
    /// Queued events other than epoch boundaries.
    live_events: usize,
    mzi_state: HashMap<(usize, u32, u64), bool>,
    gw_active: Vec<bool>,
    gw_records: Vec<Vec<TransferRecord>>,
    gw_cursor: Vec<usize>,
    now: f64,
    log: ActivityLog,
}

impl<'a> Engine<'a> {
    fn push(&mut self, time_s: f64, kind: EventKind, payload: usize) {
        let e = Event {
            time_s,
            seq: self.seq,
            kind,
            payload,
        };
        self.seq += 1;
        if kind != EventKind::EpochBoundary {
            self.live_events += 1;
        }
        self.heap.push(Reverse(e));
    }

    fn work_left(&self) -> bool {
        self.layer < self.layers.len()
    }

    /// Moves through empty phases until something is scheduled or all layers finish.
    fn advance(&mut self, t: f64) {
        loop {
            if !self.work_left() {
                return;
            }
            match self.phase {
                Phase::Idle => {
                    self.phase = Phase::Reads;
                    let reads = self.layers[self.layer].reads.clone();
                    if !reads.is_empty() {
                        self.outstanding = reads.len();
                        for i in reads {
                            self.push(t, EventKind::InjectTransfer, i);
                        }
                        return;
                    }
                }
                Phase::Reads => {
                    self.phase = Phase::Compute;
                    let lp = &self.layers[self.layer];
                    if lp.compute_s > 0.0 {
                        let (c, dt) = (lp.chiplet, lp.compute_s);
                        if let Some(c) = c {
                            *self.log.compute_busy_s.entry(c).or_insert(0.0) += dt;
                        }
                        self.outstanding = 1;
                        let layer = self.layer;
                        self.push(t + dt, EventKind::ComputeDone, layer);
                        return;
                    }
                }
                Phase::Compute => {
                    self.phase = Phase::Writes;
                    let writes = self.layers[self.layer].writes.clone();
                    if !writes.is_empty() {
                        self.outstanding = writes.len();
                        for i in writes {
                            self.push(t, EventKind::InjectTransfer, i);
                        }
                        return;
                    }
                }
                Phase::Writes => {
                    self.layer += 1;
                    self.phase = Phase::Idle;
                }
            }
        }
    }

    fn finish_one(&mut self, t: f64) {
        self.outstanding -= 1;
        self.log.makespan_s = self.log.makespan_s.max(t);
        if self.outstanding == 0 {
            self.advance(t);
        }
    }

    fn epoch_boundary(&mut self, e: usize) {
        let t = e as f64 * self.epoch_s;
        for g in self
            .topo
            .compute_gateways()
            .map(|g| g.id.0 as usize)
            .collect::<Vec<_>>()
        {
            if !self.gw_active[g] {
                continue;
            }
            let (busy, in_progress) = window_busy(&self.gw_records[g], &mut self.gw_cursor[g], t, self.epoch_s);
            if busy / self.epoch_s < self.threshold && !in_progress {
                self.gw_active[g] = false;
                let sched = self.log.schedule.as_mut().expect("policy on");
                sched.deactivations += 1;
                sched.transitions.push(GatewayTransition {
                    time_s: t,
                    gateway: GatewayId(g as u32),
                    active: false,
                });
            }
        }
        if self.work_left() {
            self.push((e + 1) as f64 * self.epoch_s, EventKind::EpochBoundary, e + 1);
        }
    }

    /// Starts every waiting transfer that heads the queue of each medium it
    /// needs while all of them are free. Only heads of touched media can have
    /// become startable since the last batch.
    fn arbitrate(&mut self, t: f64) {
        let touched = std::mem::take(&mut self.touched);
        let mut ready: BTreeSet<(usize, usize)> = BTreeSet::new();
        for m in touched {
            let Some(&head) = self.queues.get(&m).and_then(|q| q.first()) else {
                continue;
            };
            let ok = self.plans[head.1]
                .media
                .iter()
                .all(|mm| !self.medium_busy.contains(mm) && self.queues.get(mm).and_then(|q| q.first()) == Some(&head));
            if ok {
                ready.insert(head);
            }
        }
        for key in ready {
            for m in &self.plans[key.1].media {
                self.medium_busy.insert(*m);
                self.queues.get_mut(m).expect("queued").remove(&key);
            }
            self.waiting -= 1;
            self.start(t, key.1);
        }
    }

    fn start(&mut self, t: f64, pos: usize) {
        let req = &self.trace.transfers[pos];
        let plan = &self.plans[pos];
        let g = plan.compute_gw.0 as usize;

        let mut at = t;
        let mut reactivated = false;
        if self.policy_on && !self.gw_active[g] {
            self.gw_active[g] = true;
            reactivated = true;
            at += self.params.pcmc_switch_time_s;
            let sched = self.log.schedule.as_mut().expect("policy on");
            sched.reactivations += 1;
            sched.transitions.push(GatewayTransition {
                time_s: t,
                gateway: plan.compute_gw,
                active: true,
            });
        }

        let mut setup = false;
        for (node, state) in &plan.mzi_nodes {
            if self.mzi_state.get(node) != Some(state) {
                setup = true;
                self.mzi_state.insert(*node, *state);
                *self.log.mzi_reconfigurations.entry(*node).or_insert(0) += 1;
            }
        }
        if setup {
            at += self.params.mzi_switch_time_s;
        }
        let end = at + occupancy_s(req.bytes, &plan.route, self.platform, self.params, self.opts);

        let record = TransferRecord {
            index: req.index,
            layer: req.layer,
            bytes: req.bytes,
            compute_gateway: plan.compute_gw,
            memory_gateway: plan.memory_gw,
            start_s: t,
            end_s: end,
            switch_setup: setup,
            reactivated,
        };
        let busy = end - t;
        self.log.gateway_busy_s[g] += busy;
        self.log.gateway_busy_s[plan.memory_gw.0 as usize] += busy;
        for m in &plan.media {
            *self.log.medium_busy_s.entry(*m).or_insert(0.0) += busy;
        }
        if let Route::Mesh { routers, .. } = &plan.route {
            self.log.mesh_bit_hops += req.bytes as u128 * 8 * routers.len() as u128;
        }
        self.gw_records[g].push(record.clone());
        self.log.transfers.push(record);
        if setup && self.params.mzi_switch_time_s > 0.0 {
            self.push(at, EventKind::SwitchSetupDone, pos);
        }
        self.push(end, EventKind::TransferDone, pos);
    }

    fn complete(&mut self, t: f64, pos: usize) {
        for m in &self.plans[pos].media {
            self.medium_busy.remove(m);
            self.touched.insert(*m);
        }
        self.log.bytes_delivered += self.trace.transfers[pos].bytes;
        self.finish_one(t);
    }

    fn run(mut self) -> Result<ActivityLog> {
        self.advance(0.0);
        if self.policy_on && self.work_left() {
            self.push(self.epoch_s, EventKind::EpochBoundary, 1);
        }
        while let Some(Reverse(first)) = self.heap.pop() {
            let t = first.time_s;
            self.now = t;
            let mut batch = vec![first];
            while let Some(Reverse(e)) = self.heap.peek() {
                if e.time_s.total_cmp(&t) != Ordering::Equal {
                    break;
                }
                batch.push(self.heap.pop().expect("peeked").0);
            }
            batch.sort_by_key(|e| (e.kind != EventKind::EpochBoundary, e.seq));
            self.live_events -= batch.iter().filter(|e| e.kind != EventKind::EpochBoundary).count();
            for e in batch {
                match e.kind {
                    EventKind::EpochBoundary => {
                        if self.work_left() {
                            self.epoch_boundary(e.payload);
                        }
                    }
                    EventKind::InjectTransfer => {
                        let key = (self.trace.transfers[e.payload].index, e.payload);
                        for m in &self.plans[e.payload].media {
                            self.queues.entry(*m).or_default().insert(key);
                            self.touched.insert(*m);
                        }
                        self.waiting += 1;
                    }
                    EventKind::SwitchSetupDone => {}
                    EventKind::TransferDone => self.complete(t, e.payload),
                    EventKind::ComputeDone => self.finish_one(t),
                }
            }
            self.arbitrate(t);
            if self.live_events == 0 && self.work_left() {
                break;
            }
        }
        if self.work_left() || self.waiting > 0 {
            return Err(Error::DeadlockDetected {
                time_s: self.now,
                pending: self.waiting + self.outstanding,
            });
        }
        let makespan = self.log.makespan_s;
        if let Some(sched) = self.log.schedule.as_mut() {
            sched.active_time_s = active_times(&sched.transitions, self.topo.gateways.len(), makespan);
        }
        Ok(self.log)
    }
}

/// Replays `trace` on `topology` and returns the activity log; the makespan
/// is `log.makespan_s`.
pub fn simulate(
    trace: &TrafficTrace,
    topology: &NetworkTopology,
    platform: &ChipletPlatform,
    params: &DeviceParams,
    policy: &PcmcPolicy,
    opts: &SimOptions,
) -> Result<ActivityLog> {
    params.validate()?;
    opts.validate()?;
    policy.validate()?;
    for t in &trace.transfers {
        if t.bytes == 0 {
            return Err(Error::InvalidParam {
                field: "bytes",
                reason: format!("transfer {} carries no data", t.index),
            });
        }
    }
    let plans = plan_transfers(trace, topology)?;

    let n_layers = trace.layer_count();
    let mut layers: Vec<LayerPlan> = (0..n_layers)
        .map(|_| LayerPlan {
            reads: Vec::new(),
            writes: Vec::new(),
            compute_s: 0.0,
            chiplet: None,
        })
        .collect();
    for (pos, t) in trace.transfers.iter().enumerate() {
        let lp = &mut layers[t.layer];
        if t.class.is_read() {
            lp.reads.push(pos);
        } else {
            lp.writes.push(pos);
        }
    }
    for w in &trace.work {
        let chiplet = platform
            .compute_chiplet(w.chiplet)
            .ok_or_else(|| Error::InvalidPlatform(format!("compute chiplet {} not in platform", w.chiplet)))?;
        let lp = &mut layers[w.layer];
        lp.compute_s += compute_passes(w.outputs, w.dot_length, chiplet) as f64 / chiplet.clock_hz;
        lp.chiplet = Some(w.chiplet);
    }

    let policy_on = policy.enabled && topology.kind.is_photonic();
    let gateways = topology.gateways.len();
    let engine = Engine {
        trace,
        topo: topology,
        platform,
        params,
        opts,
        policy_on,
        epoch_s: policy.epoch_s,
        threshold: policy.deactivate_util_threshold,
        heap: BinaryHeap::new(),
        seq: 0,
        plans,
        layers,
        layer: 0,
        phase: Phase::Idle,
        outstanding: 0,
        queues: HashMap::new(),
        waiting: 0,
        touched: BTreeSet::new(),
        medium_busy: HashSet::new(),
        live_events: 0,
        mzi_state: HashMap::new(),
        gw_active: vec![true; gateways],
        gw_records: vec![Vec::new(); gateways],
        gw_cursor: vec![0; gateways],
        now: 0.0,
        log: ActivityLog {
            gateway_busy_s: vec![0.0; gateways],
            schedule: policy_on.then(GatewaySchedule::default),
            ..Default::default()
        },
    };
    engine.run()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accel::ChipletPlatform;
    use crate::topology::{build, TopologyKind};
    use crate::workload::{MacWork, TrafficClass};

    fn quiet() -> (DeviceParams, SimOptions) {
        let p = DeviceParams {
            mzi_switch_time_s: 0.0,
            ..Default::default()
        };
        let o = SimOptions {
            group_delay_s_per_cm: 0.0,
            ..Default::default()
        };
        (p, o)
    }

    fn off() -> PcmcPolicy {
        PcmcPolicy::disabled()
    }

    fn one_chiplet() -> ChipletPlatform {
        ChipletPlatform::uniform(1, 9, 16, 1e9).unwrap()
    }

    #[test]
    fn serialization_only() {
        let (p, o) = quiet();
        let pl = one_chiplet();
        let topo = build(TopologyKind::Bus, &pl, &p).unwrap();
        let trace = TrafficTrace::single(ChipletId(1), ChipletId(0), 1200, TrafficClass::WeightRead);
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        assert!((log.makespan_s - 100e-9).abs() < 1e-18);
        assert_eq!(log.bytes_delivered, 1200);
    }

    #[test]
    fn tree_adds_one_setup() {
        let (mut p, o) = quiet();
        p.mzi_switch_time_s = 10e-9;
        let pl = ChipletPlatform::uniform(2, 9, 16, 1e9).unwrap();
        let topo = build(TopologyKind::Tree, &pl, &p).unwrap();
        assert_eq!(topo.stage_count, 1);
        let trace = TrafficTrace::single(ChipletId(2), ChipletId(0), 1200, TrafficClass::WeightRead);
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        assert!((log.makespan_s - 110e-9).abs() < 1e-18);
        assert_eq!(log.mzi_reconfigurations.values().sum::<u64>(), 1);
    }

    #[test]
    fn empty_trace() {
        let (p, o) = quiet();
        let pl = one_chiplet();
        let topo = build(TopologyKind::Bus, &pl, &p).unwrap();
        let log = simulate(&TrafficTrace::default(), &topo, &pl, &p, &off(), &o).unwrap();
        assert_eq!(log.makespan_s, 0.0);
        assert!(log.transfers.is_empty());
        assert_eq!(log.bytes_delivered, 0);
    }

    #[test]
    fn group_delay_two_cm() {
        let (p, _) = quiet();
        let o = SimOptions::default();
        let pl = one_chiplet();
        let d = DeviceParams::default();
        let topo = build(TopologyKind::Bus, &pl, &d).unwrap();
        let req = TrafficTrace::single(ChipletId(1), ChipletId(0), 1200, TrafficClass::WeightRead).transfers[0].clone();
        let short = Route::Photonic {
            chain: crate::device::DeviceChain::new(vec![ChainElement::Propagate(0.0)]).unwrap(),
            medium: Medium::Waveguide(0),
            leaf: None,
            length_cm: 0.0,
        };
        let long = Route::Photonic {
            chain: crate::device::DeviceChain::new(vec![ChainElement::Propagate(2.0)]).unwrap(),
            medium: Medium::Waveguide(0),
            leaf: None,
            length_cm: 2.0,
        };
        let a = analytic_latency_s(&req, &short, &pl, &p, &o);
        let b = analytic_latency_s(&req, &long, &pl, &p, &o);
        assert!((b - a - 0.2e-9).abs() < 1e-18);
        let _ = topo;
    }

    #[test]
    fn fifo_on_shared_subnetwork() {
        let (p, o) = quiet();
        let pl = ChipletPlatform::uniform(2, 9, 16, 1e9).unwrap();
        let topo = build(TopologyKind::Tree, &pl, &p).unwrap();
        let mut trace = TrafficTrace::single(ChipletId(2), ChipletId(0), 1200, TrafficClass::WeightRead);
        let mut second = trace.transfers[0].clone();
        second.index = 1;
        second.chunk = 1;
        trace.transfers.push(second);
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        assert!((log.makespan_s - 200e-9).abs() < 1e-15);
        assert_eq!(log.transfers[0].index, 0);
        assert_eq!(log.transfers[1].start_s, log.transfers[0].end_s);
    }

    #[test]
    fn trine_stripes_across_subnetworks() {
        let (p, o) = quiet();
        let pl = ChipletPlatform::uniform(2, 9, 16, 1e9)
            .unwrap()
            .with_gateways_per_chiplet(2)
            .unwrap();
        let topo = build(TopologyKind::Trine(2), &pl, &p).unwrap();
        let mut trace = TrafficTrace::single(ChipletId(2), ChipletId(0), 1200, TrafficClass::WeightRead);
        let mut second = trace.transfers[0].clone();
        second.index = 1;
        second.chunk = 1;
        trace.transfers.push(second);
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        assert!((log.makespan_s - 100e-9).abs() < 1e-15);
    }

    #[test]
    fn compute_between_reads_and_writes() {
        let (p, o) = quiet();
        let pl = one_chiplet();
        let topo = build(TopologyKind::Bus, &pl, &p).unwrap();
        let mut trace = TrafficTrace::single(ChipletId(1), ChipletId(0), 1200, TrafficClass::WeightRead);
        trace.transfers.push(TransferRequest {
            index: 1,
            layer: 0,
            chunk: 0,
            src: ChipletId(0),
            dst: ChipletId(1),
            bytes: 1200,
            class: TrafficClass::OutputWrite,
        });
        // 16 outputs of length 9 on 16 units of 9 lanes: one cycle at 1 GHz.
        trace.work.push(MacWork {
            layer: 0,
            chiplet: ChipletId(0),
            mac_count: 144,
            outputs: 16,
            dot_length: 9,
        });
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        assert!((log.makespan_s - 201e-9).abs() < 1e-15);
        assert_eq!(log.transfers[1].start_s, log.transfers[0].end_s + 1e-9);
    }

    #[test]
    fn mesh_latency_formula() {
        let (p, o) = quiet();
        let pl = one_chiplet();
        let topo = build(TopologyKind::ElectricalMesh { rows: 1, cols: 2 }, &pl, &p).unwrap();
        let trace = TrafficTrace::single(ChipletId(1), ChipletId(0), 1000, TrafficClass::WeightRead);
        let log = simulate(&trace, &topo, &pl, &p, &off(), &o).unwrap();
        let expect = 8000.0 / 40e9 + 2.0 * 3.0 / 2e9 + 1.0 * 1e-9;
        assert!((log.makespan_s - expect).abs() < 1e-15);
        assert_eq!(log.mesh_bit_hops, 8000 * 2);
    }

    #[test]
    fn unknown_chiplet_is_rejected() {
        let (p, o) = quiet();
        let pl = one_chiplet();
        let topo = build(TopologyKind::Bus, &pl, &p).unwrap();
        let trace = TrafficTrace::single(ChipletId(1), ChipletId(9), 10, TrafficClass::WeightRead);
        assert!(matches!(
            simulate(&trace, &topo, &pl, &p, &off(), &o),
            Err(Error::InvalidPlatform(_))
        ));
    }

    #[test]
    fn event_order_breaks_ties_by_sequence() {
        let a = Event {
            time_s: 1.0,
            seq: 2,
            kind: EventKind::TransferDone,
            payload: 0,
        };
        let b = Event {
            time_s: 1.0,
            seq: 1,
            kind: EventKind::EpochBoundary,
            payload: 0,
        };
        assert!(b < a);
    }
}
