//! Worked examples checked through the public API. Expected values come
//! from hand arithmetic recomputed here rather than from the library.

use approx::assert_relative_eq;
use interposer_sim::accel::{compute_latency_s, crosslight_baseline, map_layers, ChipletPlatform};
use interposer_sim::config::RunConfig;
use interposer_sim::device::{ChainElement as E, DeviceChain};
use interposer_sim::power::{energy_per_bit_pj, laser_power_mw};
use interposer_sim::sim::SimOptions;
use interposer_sim::topology::{build, subnetwork_count_for_memory_bw, worst_case_path, TopologyKind};
use interposer_sim::workload::{layer_traffic, LayerKind, TraceOptions, TrafficClass, BUILTIN_MODELS};
use interposer_sim::{
    build_trace, builtin_model, path_loss_db, required_laser_power_mw, simulate, static_power, sweep,
    wall_plug_laser_power_mw, ChipletId, DeviceParams, Error, LayerMapping, LayerSpec, ModelSource, PcmcPolicy,
    TrafficTrace,
};

fn chain(e: Vec<E>) -> DeviceChain {
    DeviceChain::new(e).unwrap()
}

#[test]
fn link_budget() {
    let p = DeviceParams {
        mzi_insertion_loss_db: 1.0,
        mr_through_loss_db: 0.02,
        mr_drop_loss_db: 0.5,
        waveguide_prop_loss_db_per_cm: 1.0,
        pd_sensitivity_dbm: -20.0,
        link_margin_db: 3.0,
        ..DeviceParams::default()
    };
    assert_eq!(path_loss_db(&chain(vec![E::Propagate(0.0)]), &p), 0.0);
    assert_relative_eq!(path_loss_db(&chain(vec![E::MziStage; 5]), &p), 5.0, epsilon = 1e-12);

    let mut elems = vec![E::MziStage; 5];
    elems.extend(vec![E::MrPass; 10]);
    elems.push(E::MrDrop);
    elems.push(E::Propagate(2.0));
    let loss = path_loss_db(&chain(elems), &p);
    assert_relative_eq!(loss, 5.0 + 10.0 * 0.02 + 0.5 + 2.0, epsilon = 1e-12);

    let zero = DeviceParams {
        link_margin_db: 0.0,
        ..p.clone()
    };
    assert_relative_eq!(required_laser_power_mw(0.0, &zero), 0.01, max_relative = 1e-12);
    let optical = required_laser_power_mw(loss, &p);
    assert_relative_eq!(optical, 10f64.powf(-0.93), max_relative = 1e-12);
    assert_relative_eq!(optical, 0.11749, max_relative = 1e-4);
    assert_relative_eq!(
        required_laser_power_mw(10.0, &p) / required_laser_power_mw(0.0, &p),
        10.0,
        max_relative = 1e-12
    );

    let q = DeviceParams {
        laser_wall_plug_efficiency: 0.25,
        ..p.clone()
    };
    assert_eq!(wall_plug_laser_power_mw(0.0, &q), 0.0);
    assert_relative_eq!(wall_plug_laser_power_mw(1.0, &q), 4.0, max_relative = 1e-12);
    let r = DeviceParams {
        laser_wall_plug_efficiency: 0.1,
        ..p
    };
    assert_relative_eq!(
        wall_plug_laser_power_mw(optical, &r),
        10.0 * optical,
        max_relative = 1e-12
    );
}

#[test]
fn stage_counts_and_mzis() {
    let params = DeviceParams::default();
    let plat = ChipletPlatform::default_2p5d(2e9);
    assert_eq!(plat.compute_gateway_count(), 32);
    let tree = build(TopologyKind::Tree, &plat, &params).unwrap();
    let trine = build(TopologyKind::Trine(8), &plat, &params).unwrap();
    assert_eq!((tree.stage_count, tree.device_inventory.mzi_switches), (5, 31));
    assert_eq!((trine.stage_count, trine.device_inventory.mzi_switches), (2, 24));

    let small = ChipletPlatform::uniform(4, 9, 8, 1e9).unwrap();
    assert_eq!(build(TopologyKind::Trine(2), &small, &params).unwrap().stage_count, 1);

    let mzis =
        |t: &interposer_sim::NetworkTopology| worst_case_path(t, &params).unwrap().2.count(|e| *e == E::MziStage);
    assert_eq!(mzis(&tree) - mzis(&trine), 3);
}

#[test]
fn subnetwork_sizing() {
    let p = DeviceParams {
        wavelengths_per_waveguide: 8,
        modulation_rate_hz: 12e9,
        ..DeviceParams::default()
    };
    assert_eq!(subnetwork_count_for_memory_bw(96e9, &p, 32), 8);
    assert_eq!(subnetwork_count_for_memory_bw(12e9, &p, 32), 1);
    assert_eq!(subnetwork_count_for_memory_bw(1.0, &p, 32), 1);
}

#[test]
fn minimal_bus_inventory() {
    let plat = ChipletPlatform::uniform(1, 9, 8, 1e9).unwrap();
    let p = DeviceParams {
        wavelengths_per_waveguide: 8,
        ..DeviceParams::default()
    };
    let bus = build(TopologyKind::Bus, &plat, &p).unwrap();
    assert_eq!(bus.device_inventory.mr_modulators, 16);
    assert_eq!(bus.device_inventory.mr_filters, 16);
    // The only link has no intermediate rings.
    let (_, _, c, _) = worst_case_path(&bus, &p).unwrap();
    assert_eq!(c.count(|e| *e == E::MrPass), 0);
    assert_eq!(c.count(|e| *e == E::Coupler), 2);
    assert_eq!(c.count(|e| *e == E::MrModulate), 1);
    assert_eq!(c.count(|e| *e == E::MrDrop), 1);
}

#[test]
fn layer_traffic_counts() {
    let conv1 = LayerSpec::conv("conv1", (32, 32, 1), (5, 5), 6, 1);
    let t = layer_traffic(&conv1).unwrap();
    assert_eq!(t.weight_bytes, 5 * 5 * 6 + 6);
    assert_eq!(t.output_bytes, 28 * 28 * 6);
    assert_eq!(t.mac_count, 28 * 28 * 6 * 25);

    let one = layer_traffic(&LayerSpec::conv("one", (1, 1, 1), (1, 1), 1, 1)).unwrap();
    assert_eq!((one.weight_bytes, one.mac_count), (2, 1));

    let pool = layer_traffic(&LayerSpec::pool("pool", (28, 28, 6), 2, 2)).unwrap();
    assert_eq!(pool.weight_bytes, 0);
    assert_eq!(pool.output_bytes, 14 * 14 * 6);
}

#[test]
fn trace_of_single_fc_layer() {
    let model = [LayerSpec::fc("fc", 10, 10)];
    let opts = TraceOptions {
        packet_bytes: 1 << 20,
        memory: vec![ChipletId(1)],
    };
    let trace = build_trace(&model, &LayerMapping::uniform(ChipletId(0), 1), &opts).unwrap();
    let got: Vec<(TrafficClass, u64)> = trace.transfers.iter().map(|t| (t.class, t.bytes)).collect();
    assert_eq!(
        got,
        [
            (TrafficClass::WeightRead, 110),
            (TrafficClass::ActivationRead, 10),
            (TrafficClass::OutputWrite, 10)
        ]
    );
    let empty = build_trace(&[], &LayerMapping::uniform(ChipletId(0), 0), &opts).unwrap();
    assert!(empty.transfers.is_empty());
}

#[test]
fn two_layers_on_two_chiplets_go_through_memory() {
    let model = [LayerSpec::fc("a", 16, 16), LayerSpec::fc("b", 16, 16)];
    let mem = ChipletId(9);
    let opts = TraceOptions {
        packet_bytes: 64,
        memory: vec![mem],
    };
    let map = LayerMapping::from_assignments(vec![ChipletId(0), ChipletId(1)]);
    let trace = build_trace(&model, &map, &opts).unwrap();
    for t in &trace.transfers {
        assert!(t.src == mem || t.dst == mem, "{t:?}");
    }
}

#[test]
fn builtin_model_shapes() {
    let lenet = builtin_model("lenet5").unwrap();
    assert_eq!(lenet.len(), 7);
    let last = lenet.last().unwrap();
    assert_eq!((last.kind, last.c, last.cout), (LayerKind::Fc, 84, 10));

    let vgg = builtin_model("vgg16").unwrap();
    let convs: Vec<_> = vgg.iter().filter(|l| l.kind == LayerKind::Conv).collect();
    assert_eq!(convs.len(), 13);
    assert!(convs.iter().all(|l| (l.kh, l.kw) == (3, 3)));
    assert_eq!(vgg.iter().filter(|l| l.kind == LayerKind::Fc).count(), 3);

    assert!(matches!(builtin_model("alexnet"), Err(Error::UnknownModel(_))));
}

#[test]
fn kernel_size_picks_chiplet() {
    let mut plat = ChipletPlatform::uniform(2, 9, 64, 1e9).unwrap();
    plat.compute[1].mac_unit_size = 49;
    let k3 = LayerSpec::conv("k3", (16, 16, 1), (3, 3), 4, 1);
    let k7 = LayerSpec::conv("k7", (16, 16, 1), (7, 7), 4, 1);
    let m = map_layers(&[k3, k7], &plat);
    assert_eq!(m.chiplet_of(0), Some(plat.compute[0].id));
    assert_eq!(m.chiplet_of(1), Some(plat.compute[1].id));

    let one = ChipletPlatform::uniform(1, 128, 4, 1e9).unwrap();
    let m = map_layers(&builtin_model("lenet5").unwrap(), &one);
    assert!(m.assignments().iter().all(|c| *c == one.compute[0].id));
}

#[test]
fn compute_latency() {
    let mut plat = ChipletPlatform::uniform(1, 25, 64, 2e9).unwrap();
    let conv1 = LayerSpec::conv("conv1", (32, 32, 1), (5, 5), 6, 1);
    let passes = 117_600u64.div_ceil(25 * 64);
    assert_eq!(passes, 74);
    assert_relative_eq!(
        compute_latency_s(&conv1, &plat.compute[0]),
        passes as f64 / 2e9,
        max_relative = 1e-12
    );

    plat.compute[0] = interposer_sim::ComputeChiplet {
        mac_unit_size: 9,
        mac_unit_count: 4,
        clock_hz: 1e9,
        ..plat.compute[0].clone()
    };
    let exact = LayerSpec::conv("exact", (3, 3, 1), (3, 3), 4, 1);
    assert_eq!(layer_traffic(&exact).unwrap().mac_count, 36);
    assert_relative_eq!(compute_latency_s(&exact, &plat.compute[0]), 1e-9, max_relative = 1e-12);

    assert_eq!(
        compute_latency_s(&LayerSpec::pool("p", (4, 4, 1), 2, 2), &plat.compute[0]),
        0.0
    );
}

#[test]
fn monolithic_baseline_conserves_lanes() {
    let mut plat = ChipletPlatform::uniform(2, 9, 64, 1e9).unwrap();
    plat.compute[1].mac_unit_size = 49;
    let mono = crosslight_baseline(&plat).unwrap();
    assert!(mono.monolithic);
    assert_eq!(mono.compute.len(), 1);
    assert_eq!(mono.compute[0].mac_unit_size, 49);
    assert_eq!(mono.compute[0].mac_unit_count, 64 + (9u64 * 64).div_ceil(49));
    assert!(mono.total_lanes() >= plat.total_lanes());

    let single = ChipletPlatform::uniform(1, 25, 10, 1e9).unwrap();
    let m = crosslight_baseline(&single).unwrap();
    assert!(m.monolithic);
    assert_eq!(m.compute, single.compute);
}

fn quiet_params() -> DeviceParams {
    DeviceParams {
        wavelengths_per_waveguide: 8,
        modulation_rate_hz: 12e9,
        mzi_switch_time_s: 0.0,
        chiplet_bw_cap_bytes_per_s: 1e12,
        ..DeviceParams::default()
    }
}

fn no_delay() -> SimOptions {
    SimOptions {
        group_delay_s_per_cm: 0.0,
        ..SimOptions::default()
    }
}

#[test]
fn serialization_and_setup_latency() {
    let plat = ChipletPlatform::uniform(2, 9, 8, 1e9).unwrap();
    let (c, m) = (plat.compute[0].id, plat.memory[0].id);
    let trace = TrafficTrace::single(m, c, 1200, TrafficClass::WeightRead);
    let off = PcmcPolicy::disabled();

    let p = quiet_params();
    let bus = build(TopologyKind::Bus, &plat, &p).unwrap();
    let log = simulate(&trace, &bus, &plat, &p, &off, &no_delay()).unwrap();
    assert_relative_eq!(log.makespan_s, 1200.0 * 8.0 / 96e9, max_relative = 1e-12);

    let p = DeviceParams {
        mzi_switch_time_s: 10e-9,
        ..quiet_params()
    };
    let tree = build(TopologyKind::Tree, &plat, &p).unwrap();
    assert_eq!(tree.stage_count, 1);
    let log = simulate(&trace, &tree, &plat, &p, &off, &no_delay()).unwrap();
    assert_relative_eq!(log.makespan_s, 110e-9, max_relative = 1e-12);

    let log = simulate(&TrafficTrace::default(), &tree, &plat, &p, &off, &no_delay()).unwrap();
    assert_eq!(log.makespan_s, 0.0);
    assert!(log.transfers.is_empty());
}

#[test]
fn trine_costs_more_static_power_than_tree() {
    let params = DeviceParams::default();
    let plat = ChipletPlatform::default_2p5d(2e9);
    let tree = build(TopologyKind::Tree, &plat, &params).unwrap();
    let trine = build(TopologyKind::Trine(8), &plat, &params).unwrap();
    let st = static_power(&tree, &tree.device_inventory, &params);
    let sn = static_power(&trine, &trine.device_inventory, &params);
    assert!(sn.trimming_mw >= st.trimming_mw);
    assert!(laser_power_mw(&trine, &params, None) > laser_power_mw(&tree, &params, None));
    for (t, s) in [(&tree, st), (&trine, sn)] {
        assert_relative_eq!(
            s.trimming_mw,
            t.device_inventory.microrings() as f64 * params.mr_trim_power_mw,
            max_relative = 1e-12
        );
    }
}

#[test]
fn energy_per_bit() {
    let e = 100e-3 * 1e-3;
    assert_relative_eq!(energy_per_bit_pj(e, 1_000_000).unwrap(), 100.0, max_relative = 1e-12);
    assert_relative_eq!(
        energy_per_bit_pj(e, 2_000_000).unwrap() * 2.0,
        energy_per_bit_pj(e, 1_000_000).unwrap(),
        max_relative = 1e-12
    );
    assert!(matches!(energy_per_bit_pj(e, 0), Err(Error::ZeroBits)));
}

#[test]
fn default_run_has_one_complete_row() {
    let cfg = RunConfig::default();
    let r = interposer_sim::run(&cfg).unwrap();
    assert_eq!(r.rows.len(), 1);
    let row = &r.rows[0];
    assert_eq!((row.topology.as_str(), row.model.as_str()), ("trine", "lenet5"));
    assert!(row.makespan_s > 0.0 && row.energy_j > 0.0 && row.bits > 0);
    assert!(row.epb_pj_per_bit.is_some());
    for n in [row.total_mw_norm, row.makespan_norm, row.energy_norm, row.epb_norm] {
        assert_eq!(n, Some(1.0));
    }
}

#[test]
fn full_sweep_cross_product() {
    let cfg = RunConfig::default();
    let topos: Vec<String> = ["bus", "tree", "trine", "mesh"].map(String::from).to_vec();
    let models: Vec<ModelSource> = BUILTIN_MODELS
        .iter()
        .map(|m| ModelSource::Builtin(m.to_string()))
        .collect();
    let r = sweep(&cfg, &topos, &models).unwrap();
    assert_eq!(r.rows.len(), 24);
    assert_eq!(r.baseline, "bus");
    for row in r.rows.iter().filter(|r| r.topology == "bus") {
        for n in [row.total_mw_norm, row.makespan_norm, row.energy_norm, row.epb_norm] {
            assert_eq!(n, Some(1.0), "{}", row.model);
        }
    }
}

#[test]
fn one_cell_sweep_is_run() {
    let cfg = RunConfig::default();
    let a = interposer_sim::run(&cfg).unwrap();
    let b = sweep(&cfg, &["trine".to_string()], &[ModelSource::Builtin("lenet5".into())]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn run_is_its_own_baseline() {
    let cfg = RunConfig {
        baseline: Some("bus".into()),
        ..RunConfig::default()
    };
    let r = interposer_sim::run(&cfg).unwrap();
    assert_eq!(r.baseline, "trine");
    assert_eq!(r.rows[0].makespan_norm, Some(1.0));
    assert!(matches!(
        sweep(&cfg, &["trine".to_string()], &cfg.workload.models),
        Err(Error::MissingBaseline(_))
    ));
}
