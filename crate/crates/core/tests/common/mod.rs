//! Seeded generators for randomized platforms, parameters and traces.
#![allow(dead_code)]

use interposer_sim::accel::{crosslight_baseline, ChipletPlatform, ComputeChiplet, MemoryChiplet};
use interposer_sim::sim::{ElectricalParams, SimOptions};
use interposer_sim::topology::TopologyKind;
use interposer_sim::workload::{MacWork, TrafficClass, TrafficTrace, TransferRequest};
use interposer_sim::{ChipletId, DeviceParams, PcmcPolicy};
use rand::Rng;

pub fn platform<R: Rng>(rng: &mut R) -> ChipletPlatform {
    let n = rng.gen_range(1..=6);
    let sizes = [9u64, 25, 49, 128];
    let compute = (0..n)
        .map(|i| ComputeChiplet {
            id: ChipletId(i),
            mac_unit_size: sizes[rng.gen_range(0..sizes.len())],
            mac_unit_count: rng.gen_range(1..=64),
            clock_hz: [1e9, 2e9, 5e9][rng.gen_range(0..3)],
        })
        .collect();
    let mems = rng.gen_range(1..=2);
    let memory = (0..mems)
        .map(|m| MemoryChiplet {
            id: ChipletId(n + m),
            bandwidth_bytes_per_s: rng.gen_range(10e9..200e9),
            glb_bytes: 1 << 20,
        })
        .collect();
    let mut p = ChipletPlatform::new(compute, memory).unwrap();
    p.gateways_per_chiplet = rng.gen_range(1..=4);
    p.onchip_latency_s = rng.gen_range(0.0..100e-9);
    p
}

pub fn params<R: Rng>(rng: &mut R) -> DeviceParams {
    DeviceParams {
        mr_through_loss_db: rng.gen_range(0.0..0.1),
        mr_drop_loss_db: rng.gen_range(0.0..1.5),
        mzi_insertion_loss_db: rng.gen_range(0.0..2.0),
        waveguide_prop_loss_db_per_cm: rng.gen_range(0.0..2.0),
        mzi_switch_time_s: if rng.gen_bool(0.2) {
            0.0
        } else {
            rng.gen_range(0.0..50e-9)
        },
        modulation_rate_hz: rng.gen_range(1e9..40e9),
        gateway_clock_hz: rng.gen_range(0.5e9..4e9),
        wavelengths_per_waveguide: rng.gen_range(1..=16),
        chiplet_bw_cap_bytes_per_s: rng.gen_range(5e9..200e9),
        pcmc_switch_time_s: rng.gen_range(0.0..200e-9),
        ..DeviceParams::default()
    }
}

pub fn options<R: Rng>(rng: &mut R) -> SimOptions {
    SimOptions {
        gateway_word_bits: [16, 32, 64, 128][rng.gen_range(0..4)],
        group_delay_s_per_cm: rng.gen_range(0.0..0.2e-9),
        electrical: ElectricalParams {
            epb_per_hop_pj: rng.gen_range(0.5..5.0),
            router_cycles: rng.gen_range(1..=6),
            wire_rate_gbps: rng.gen_range(10.0..80.0),
            wire_delay_s_per_cm: rng.gen_range(0.0..2e-9),
        },
    }
}

pub fn policy<R: Rng>(rng: &mut R) -> PcmcPolicy {
    PcmcPolicy {
        enabled: rng.gen_bool(0.5),
        epoch_s: rng.gen_range(10e-9..10e-6),
        deactivate_util_threshold: rng.gen_range(0.0..0.9),
    }
}

/// A topology kind and the platform it runs on.
pub fn kind<R: Rng>(rng: &mut R, p: &ChipletPlatform) -> (TopologyKind, ChipletPlatform) {
    let gc = p.compute_gateway_count();
    match rng.gen_range(0..5) {
        0 => (TopologyKind::Bus, p.clone()),
        1 => (TopologyKind::Tree, p.clone()),
        2 => (TopologyKind::Trine(rng.gen_range(1..=gc)), p.clone()),
        3 => (TopologyKind::ElectricalMesh { rows: 0, cols: 0 }, p.clone()),
        _ => (TopologyKind::Monolithic, crosslight_baseline(p).unwrap()),
    }
}

fn class<R: Rng>(rng: &mut R) -> TrafficClass {
    [
        TrafficClass::WeightRead,
        TrafficClass::ActivationRead,
        TrafficClass::OutputWrite,
    ][rng.gen_range(0..3)]
}

pub fn single_transfer<R: Rng>(rng: &mut R, p: &ChipletPlatform) -> TrafficTrace {
    let c = p.compute[rng.gen_range(0..p.compute.len())].id;
    let m = p.memory[rng.gen_range(0..p.memory.len())].id;
    let cls = class(rng);
    let (src, dst) = if cls.is_read() { (m, c) } else { (c, m) };
    let mut t = TrafficTrace::single(src, dst, rng.gen_range(1..2_000_000), cls);
    t.transfers[0].chunk = rng.gen_range(0..8);
    t
}

/// Several layers of mixed transfers with compute in between; some layers
/// carry no traffic at all so gateways sit idle across epochs.
pub fn multi_layer<R: Rng>(rng: &mut R, p: &ChipletPlatform) -> TrafficTrace {
    let layers = rng.gen_range(1..=6);
    let mut trace = TrafficTrace::default();
    for layer in 0..layers {
        let c = p.compute[rng.gen_range(0..p.compute.len())].id;
        let silent = rng.gen_bool(0.3);
        if !silent {
            for _ in 0..rng.gen_range(1..=12) {
                let m = p.memory[rng.gen_range(0..p.memory.len())].id;
                let cls = class(rng);
                let (src, dst) = if cls.is_read() { (m, c) } else { (c, m) };
                let index = trace.transfers.len();
                trace.transfers.push(TransferRequest {
                    index,
                    layer,
                    chunk: rng.gen_range(0..8),
                    src,
                    dst,
                    bytes: rng.gen_range(1..200_000),
                    class: cls,
                });
            }
        }
        trace.work.push(MacWork {
            layer,
            chiplet: c,
            mac_count: 0,
            outputs: rng.gen_range(0..20_000),
            dot_length: rng.gen_range(1..300),
        });
    }
    trace
}
