//! Interposer network construction: bus, MZI switch tree, TRINE (parallel
//! switch trees), electrical mesh and the on-die path of a monolithic die.
//!
//! Compute chiplets sit on a grid with 1 cm pitch, memory chiplets along the
//! bottom edge. Every chiplet owns `gateways_per_chiplet` gateways at its
//! position; memory chiplets own one gateway each. Compute gateway ids come
//! first (chiplet-major), memory gateway ids follow.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::accel::{ChipletId, ChipletPlatform};
use crate::device::{path_loss_db, ChainBuilder, ChainElement, DeviceChain, DeviceParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    Bus,
    Tree,
    Trine(usize),
    ElectricalMesh {
        rows: usize,
        cols: usize,
    },
    /// On-die transfers of a monolithic chip; no interposer network.
    Monolithic,
}

impl TopologyKind {
    pub fn is_photonic(&self) -> bool {
        matches!(self, TopologyKind::Bus | TopologyKind::Tree | TopologyKind::Trine(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            TopologyKind::Bus => "bus",
            TopologyKind::Tree => "tree",
            TopologyKind::Trine(_) => "trine",
            TopologyKind::ElectricalMesh { .. } => "mesh",
            TopologyKind::Monolithic => "monolithic",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GatewayId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GatewayRole {
    Compute,
    Memory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayNode {
    pub id: GatewayId,
    pub chiplet: ChipletId,
    pub role: GatewayRole,
    /// Interposer coordinates in cm.
    pub position: (f64, f64),
    /// Switch subnetwork for Tree/TRINE compute gateways.
    pub subnetwork: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Waveguide {
    pub id: usize,
    pub subnetwork: usize,
    /// Gateways in the order the light visits them.
    pub members: Vec<GatewayId>,
}

/// Shared transmission medium a transfer must hold exclusively.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Medium {
    Subnetwork(usize),
    Waveguide(usize),
    /// Directed mesh link between two routers.
    Link(usize, usize),
    /// On-die channel to one memory chiplet.
    OnChip(ChipletId),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Route {
    Photonic {
        chain: DeviceChain,
        medium: Medium,
        /// Leaf index inside the switch tree (Tree/TRINE only).
        leaf: Option<usize>,
        length_cm: f64,
    },
    Mesh {
        routers: Vec<usize>,
        length_cm: f64,
    },
    OnChip {
        memory: ChipletId,
    },
}

impl Route {
    pub fn chain(&self) -> Option<&DeviceChain> {
        match self {
            Route::Photonic { chain, .. } => Some(chain),
            _ => None,
        }
    }

    pub fn length_cm(&self) -> f64 {
        match self {
            Route::Photonic { length_cm, .. } | Route::Mesh { length_cm, .. } => *length_cm,
            Route::OnChip { .. } => 0.0,
        }
    }

    /// Media held for the duration of a transfer.
    pub fn media(&self) -> Vec<Medium> {
        match self {
            Route::Photonic { medium, .. } => vec![*medium],
            Route::Mesh { routers, .. } => routers.windows(2).map(|w| Medium::Link(w[0], w[1])).collect(),
            Route::OnChip { memory } => vec![Medium::OnChip(*memory)],
        }
    }

    /// Routers traversed, including source and destination.
    pub fn hops(&self) -> usize {
        match self {
            Route::Mesh { routers, .. } => routers.len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DeviceInventory {
    pub mr_modulators: u64,
    pub mr_filters: u64,
    pub mzi_switches: u64,
    pub pcmc_couplers: u64,
    pub laser_sources: u64,
}

impl DeviceInventory {
    pub fn microrings(&self) -> u64 {
        self.mr_modulators + self.mr_filters
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MeshGrid {
    pub rows: usize,
    pub cols: usize,
}

impl MeshGrid {
    pub fn coords(&self, router: usize) -> (usize, usize) {
        (router % self.cols, router / self.cols)
    }

    pub fn router(&self, x: usize, y: usize) -> usize {
        y * self.cols + x
    }

    /// Dimension-ordered route, X first then Y.
    pub fn xy_route(&self, from: usize, to: usize) -> Vec<usize> {
        let (mut x, mut y) = self.coords(from);
        let (tx, ty) = self.coords(to);
        let mut out = vec![from];
        while x != tx {
            x = if tx > x { x + 1 } else { x - 1 };
            out.push(self.router(x, y));
        }
        while y != ty {
            y = if ty > y { y + 1 } else { y - 1 };
            out.push(self.router(x, y));
        }
        out
    }

    /// Smallest near-square grid holding `n` routers.
    pub fn near_square(n: usize) -> Self {
        let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
        let rows = n.div_ceil(cols).max(1);
        Self { rows, cols }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    pub kind: TopologyKind,
    pub gateways: Vec<GatewayNode>,
    pub waveguides: Vec<Waveguide>,
    pub paths: BTreeMap<(GatewayId, GatewayId), Route>,
    pub stage_count: u32,
    pub device_inventory: DeviceInventory,
    pub subnetworks: usize,
    pub mesh: Option<MeshGrid>,
    /// Router each chiplet attaches to (mesh only).
    pub mesh_router: BTreeMap<ChipletId, usize>,
    /// Per chiplet, the gateways a striped transfer spreads over.
    pub lanes: BTreeMap<ChipletId, Vec<GatewayId>>,
    /// Compute chiplet gateways in id order.
    pub chiplet_gateways: BTreeMap<ChipletId, Vec<GatewayId>>,
    pub memory_gateway: BTreeMap<ChipletId, GatewayId>,
    wavelengths: u32,
}

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: usize) -> u32 {
    debug_assert!(n >= 1);
    usize::BITS - (n.max(1) - 1).leading_zeros()
}

/// Switch stages of each subnetwork when `compute_gateways` are spread over `k` trees.
pub fn stage_count_for(compute_gateways: usize, k: usize) -> u32 {
    ceil_log2(compute_gateways.div_ceil(k).max(1))
}

/// Subnetworks needed for the network bandwidth to cover `memory_bw_bytes_per_s`.
pub fn subnetwork_count_for_memory_bw(
    memory_bw_bytes_per_s: f64,
    params: &DeviceParams,
    compute_gateways: usize,
) -> usize {
    let per_subnetwork = params.waveguide_rate_bps() / 8.0;
    let n = (memory_bw_bytes_per_s / per_subnetwork).ceil();
    let n = if n.is_finite() && n >= 1.0 { n as usize } else { 1 };
    n.clamp(1, compute_gateways.max(1))
}

fn manhattan(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).abs() + (a.1 - b.1).abs()
}

fn compute_positions(n: usize) -> Vec<(f64, f64)> {
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    (0..n).map(|i| ((i % cols) as f64, (i / cols) as f64 + 1.0)).collect()
}

pub fn build(kind: TopologyKind, platform: &ChipletPlatform, params: &DeviceParams) -> Result<NetworkTopology> {
    platform.validate()?;
    params.validate()?;
    let monolithic = matches!(kind, TopologyKind::Monolithic);
    let per_chiplet = if monolithic { 1 } else { platform.gateways_per_chiplet };
    let gc = platform.compute.len() * per_chiplet;

    let k = match kind {
        TopologyKind::Tree => 1,
        TopologyKind::Trine(k) => {
            if k < 1 || k > gc {
                return Err(Error::InvalidSubnetworkCount {
                    requested: k,
                    compute_gateways: gc,
                });
            }
            k
        }
        _ => 0,
    };

    let positions = compute_positions(platform.compute.len());
    let mut gateways = Vec::new();
    let mut chiplet_gateways: BTreeMap<ChipletId, Vec<GatewayId>> = BTreeMap::new();
    for (ci, c) in platform.compute.iter().enumerate() {
        for _ in 0..per_chiplet {
            let id = GatewayId(gateways.len() as u32);
            let subnetwork = (k > 0).then(|| id.0 as usize % k);
            gateways.push(GatewayNode {
                id,
                chiplet: c.id,
                role: GatewayRole::Compute,
                position: positions[ci],
                subnetwork,
            });
            chiplet_gateways.entry(c.id).or_default().push(id);
        }
    }
    let mut memory_gateway = BTreeMap::new();
    for (mi, m) in platform.memory.iter().enumerate() {
        let id = GatewayId(gateways.len() as u32);
        gateways.push(GatewayNode {
            id,
            chiplet: m.id,
            role: GatewayRole::Memory,
            position: (mi as f64, 0.0),
            subnetwork: None,
        });
        memory_gateway.insert(m.id, id);
    }
    let compute: Vec<GatewayId> = gateways[..gc].iter().map(|g| g.id).collect();

    let lambda = params.wavelengths_per_waveguide as usize;
    let mut topo = NetworkTopology {
        kind,
        gateways,
        waveguides: Vec::new(),
        paths: BTreeMap::new(),
        stage_count: 0,
        device_inventory: DeviceInventory::default(),
        subnetworks: k,
        mesh: None,
        mesh_router: BTreeMap::new(),
        lanes: BTreeMap::new(),
        chiplet_gateways,
        memory_gateway,
        wavelengths: params.wavelengths_per_waveguide,
    };

    match kind {
        TopologyKind::Bus => build_bus(&mut topo, &compute, lambda),
        TopologyKind::Tree | TopologyKind::Trine(_) => build_trees(&mut topo, &compute, k),
        TopologyKind::ElectricalMesh { rows, cols } => build_mesh(&mut topo, platform, rows, cols)?,
        TopologyKind::Monolithic => {
            let mems: Vec<_> = topo.memory_gateway.clone().into_iter().collect();
            for &g in &compute {
                for &(mem, mg) in &mems {
                    let route = Route::OnChip { memory: mem };
                    topo.paths.insert((mg, g), route.clone());
                    topo.paths.insert((g, mg), route);
                }
            }
        }
    }

    // Striping lanes: the chiplet's gateways, one per distinct medium.
    let mut lanes = BTreeMap::new();
    for (chiplet, gws) in &topo.chiplet_gateways {
        let mut seen = Vec::new();
        let mut picked = Vec::new();
        for g in gws {
            let key = match kind {
                TopologyKind::Trine(_) | TopologyKind::Tree => topo.gateway(*g).subnetwork,
                _ => Some(0),
            };
            if !seen.contains(&key) {
                seen.push(key);
                picked.push(*g);
            }
        }
        lanes.insert(*chiplet, picked);
    }
    topo.lanes = lanes;
    topo.device_inventory = enumerate_devices(&topo, platform, false);
    Ok(topo)
}

fn build_bus(topo: &mut NetworkTopology, compute: &[GatewayId], lambda: usize) {
    let n = compute.len();
    let mems: Vec<_> = topo.memory_gateway.values().copied().collect();
    for (mi, &mg) in mems.iter().enumerate() {
        let mpos = topo.gateway(mg).position;
        // Cumulative route length along the serpentine through compute gateways.
        let mut along = Vec::with_capacity(n);
        let mut acc = 0.0;
        let mut prev = mpos;
        for &g in compute {
            let p = topo.gateway(g).position;
            acc += manhattan(prev, p);
            along.push(acc);
            prev = p;
        }
        let back = manhattan(prev, mpos);
        let total = acc + back;

        let read_wg = 2 * mi;
        let write_wg = 2 * mi + 1;
        let mut members = vec![mg];
        members.extend_from_slice(compute);
        topo.waveguides.push(Waveguide {
            id: read_wg,
            subnetwork: read_wg,
            members: members.clone(),
        });
        let mut wmembers = compute.to_vec();
        wmembers.push(mg);
        topo.waveguides.push(Waveguide {
            id: write_wg,
            subnetwork: write_wg,
            members: wmembers,
        });

        for (i, &g) in compute.iter().enumerate() {
            let read_len = along[i];
            topo.paths.insert(
                (mg, g),
                Route::Photonic {
                    chain: bus_read_chain(read_len, i * lambda),
                    medium: Medium::Waveguide(read_wg),
                    leaf: None,
                    length_cm: read_len,
                },
            );
            let write_len = total - along[i];
            topo.paths.insert(
                (g, mg),
                Route::Photonic {
                    chain: bus_write_chain(write_len, (n - 1 - i) * lambda, i * lambda),
                    medium: Medium::Waveguide(write_wg),
                    leaf: None,
                    length_cm: write_len,
                },
            );
        }
    }
}

fn bus_read_chain(len: f64, upstream_filter_rings: usize) -> DeviceChain {
    ChainBuilder::default()
        .push(ChainElement::MrModulate)
        .push(ChainElement::Coupler)
        .push(ChainElement::Propagate(len))
        .repeat(ChainElement::MrPass, upstream_filter_rings)
        .push(ChainElement::Coupler)
        .push(ChainElement::MrDrop)
        .build()
}

fn bus_write_chain(len: f64, downstream_modulator_rings: usize, mrg_rings_before: usize) -> DeviceChain {
    ChainBuilder::default()
        .push(ChainElement::MrModulate)
        .repeat(ChainElement::MrPass, downstream_modulator_rings)
        .push(ChainElement::Coupler)
        .push(ChainElement::Propagate(len))
        .push(ChainElement::Coupler)
        .repeat(ChainElement::MrPass, mrg_rings_before)
        .push(ChainElement::MrDrop)
        .build()
}

fn switched_chain(len: f64, stages: u32) -> DeviceChain {
    ChainBuilder::default()
        .push(ChainElement::MrModulate)
        .push(ChainElement::Coupler)
        .push(ChainElement::Propagate(len))
        .repeat(ChainElement::MziStage, stages as usize)
        .push(ChainElement::Coupler)
        .push(ChainElement::MrDrop)
        .build()
}

fn build_trees(topo: &mut NetworkTopology, compute: &[GatewayId], k: usize) {
    let stages = stage_count_for(compute.len(), k);
    topo.stage_count = stages;
    let mems: Vec<_> = topo.memory_gateway.values().copied().collect();
    for j in 0..k {
        let mut members: Vec<GatewayId> = compute.iter().copied().filter(|g| g.0 as usize % k == j).collect();
        for (leaf, &g) in members.iter().enumerate() {
            let gpos = topo.gateway(g).position;
            for &mg in &mems {
                let len = manhattan(topo.gateway(mg).position, gpos);
                let route = Route::Photonic {
                    chain: switched_chain(len, stages),
                    medium: Medium::Subnetwork(j),
                    leaf: Some(leaf),
                    length_cm: len,
                };
                topo.paths.insert((mg, g), route.clone());
                topo.paths.insert((g, mg), route);
            }
        }
        members.extend(mems.iter().copied());
        topo.waveguides.push(Waveguide {
            id: j,
            subnetwork: j,
            members,
        });
    }
}

fn build_mesh(topo: &mut NetworkTopology, platform: &ChipletPlatform, rows: usize, cols: usize) -> Result<()> {
    let chiplets = platform.compute.len() + platform.memory.len();
    let grid = if rows == 0 || cols == 0 {
        MeshGrid::near_square(chiplets)
    } else {
        MeshGrid { rows, cols }
    };
    if grid.rows * grid.cols < chiplets {
        return Err(Error::InvalidPlatform(format!(
            "{}x{} mesh cannot hold {} chiplets",
            grid.rows, grid.cols, chiplets
        )));
    }
    topo.kind = TopologyKind::ElectricalMesh {
        rows: grid.rows,
        cols: grid.cols,
    };
    let mut next = 0usize;
    for m in &platform.memory {
        topo.mesh_router.insert(m.id, next);
        next += 1;
    }
    for c in &platform.compute {
        topo.mesh_router.insert(c.id, next);
        next += 1;
    }
    for g in topo.gateways.iter_mut() {
        let (x, y) = grid.coords(topo.mesh_router[&g.chiplet]);
        g.position = (x as f64, y as f64);
    }
    let mems: Vec<_> = topo.memory_gateway.iter().map(|(c, g)| (*c, *g)).collect();
    let compute: Vec<_> = topo
        .gateways
        .iter()
        .filter(|g| g.role == GatewayRole::Compute)
        .map(|g| (g.chiplet, g.id))
        .collect();
    for &(mc, mg) in &mems {
        let mr = topo.mesh_router[&mc];
        for &(cc, cg) in &compute {
            let cr = topo.mesh_router[&cc];
            let down = grid.xy_route(mr, cr);
            let up = grid.xy_route(cr, mr);
            let len = (down.len() - 1) as f64;
            topo.paths.insert(
                (mg, cg),
                Route::Mesh {
                    routers: down,
                    length_cm: len,
                },
            );
            topo.paths.insert(
                (cg, mg),
                Route::Mesh {
                    routers: up,
                    length_cm: len,
                },
            );
        }
    }
    topo.mesh = Some(grid);
    Ok(())
}

/// Device counts for `topology`; `adaptive` adds one PCMC per gateway.
pub fn enumerate_devices(topology: &NetworkTopology, platform: &ChipletPlatform, adaptive: bool) -> DeviceInventory {
    let _ = platform;
    if !topology.kind.is_photonic() {
        return DeviceInventory::default();
    }
    let lambda = topology.wavelengths as u64;
    let gc = topology.compute_gateways().count() as u64;
    let gm = topology.memory_gateway.len() as u64;
    let (mem_mod_sets, lasers, mzis) = match topology.kind {
        TopologyKind::Bus => (1, 2 * gm, 0),
        TopologyKind::Tree | TopologyKind::Trine(_) => {
            let k = topology.subnetworks as u64;
            (k, k, k * ((1u64 << topology.stage_count) - 1))
        }
        _ => unreachable!(),
    };
    DeviceInventory {
        // one modulator set per compute gateway plus the memory's transmit sets
        mr_modulators: lambda * (gc + gm * mem_mod_sets),
        // one receive set per compute gateway plus one MRG set per writer at each memory
        mr_filters: lambda * (gc + gm * gc),
        mzi_switches: mzis,
        pcmc_couplers: if adaptive { gc + gm } else { 0 },
        laser_sources: lasers,
    }
}

/// Worst path: (src, dst, chain, loss).
pub type WorstPath = (GatewayId, GatewayId, DeviceChain, f64);

/// Highest-loss source/destination pair; ties keep the lowest (src, dst).
pub fn worst_case_path(topology: &NetworkTopology, params: &DeviceParams) -> Result<WorstPath> {
    if !topology.kind.is_photonic() {
        return Err(Error::NotPhotonic);
    }
    let mut best: Option<WorstPath> = None;
    for ((s, d), route) in &topology.paths {
        let Some(chain) = route.chain() else { continue };
        let loss = path_loss_db(chain, params);
        if best.as_ref().is_none_or(|b| loss > b.3) {
            best = Some((*s, *d, chain.clone(), loss));
        }
    }
    best.ok_or(Error::NotPhotonic)
}

impl NetworkTopology {
    pub fn gateway(&self, id: GatewayId) -> &GatewayNode {
        &self.gateways[id.0 as usize]
    }

    pub fn compute_gateways(&self) -> impl Iterator<Item = &GatewayNode> {
        self.gateways.iter().filter(|g| g.role == GatewayRole::Compute)
    }

    pub fn route(&self, src: GatewayId, dst: GatewayId) -> Option<&Route> {
        self.paths.get(&(src, dst))
    }

    pub fn wavelengths(&self) -> u32 {
        self.wavelengths
    }

    /// Number of lasers; each feeds one waveguide (bus) or subnetwork (trees).
    pub fn laser_count(&self) -> usize {
        match self.kind {
            TopologyKind::Bus => self.waveguides.len(),
            TopologyKind::Tree | TopologyKind::Trine(_) => self.subnetworks,
            _ => 0,
        }
    }

    fn laser_medium(&self, laser: usize) -> Medium {
        match self.kind {
            TopologyKind::Bus => Medium::Waveguide(laser),
            _ => Medium::Subnetwork(laser),
        }
    }

    /// Worst loss a laser must cover. Microring taps of compute gateways with
    /// `active[g] == false` are decoupled and drop out of through-pass counts.
    pub fn laser_loss_db(&self, laser: usize, params: &DeviceParams, active: Option<&[bool]>) -> f64 {
        let medium = self.laser_medium(laser);
        let mut worst = 0f64;
        for ((s, d), route) in &self.paths {
            let Route::Photonic { chain, medium: m, .. } = route else {
                continue;
            };
            if *m != medium {
                continue;
            }
            let loss = match (self.kind, active) {
                (TopologyKind::Bus, Some(mask)) => path_loss_db(&self.bus_chain_masked(*s, *d, mask), params),
                _ => path_loss_db(chain, params),
            };
            worst = worst.max(loss);
        }
        worst
    }

    fn bus_chain_masked(&self, src: GatewayId, dst: GatewayId, active: &[bool]) -> DeviceChain {
        let lambda = self.wavelengths as usize;
        let compute: Vec<GatewayId> = self.compute_gateways().map(|g| g.id).collect();
        let live = |g: &GatewayId| active.get(g.0 as usize).copied().unwrap_or(true);
        let route = &self.paths[&(src, dst)];
        let len = route.length_cm();
        if self.gateway(src).role == GatewayRole::Memory {
            let i = compute.iter().position(|g| *g == dst).expect("compute reader");
            let upstream = compute[..i].iter().filter(|g| live(g)).count();
            bus_read_chain(len, upstream * lambda)
        } else {
            let i = compute.iter().position(|g| *g == src).expect("compute writer");
            let down = compute[i + 1..].iter().filter(|g| live(g)).count();
            let before = compute[..i].iter().filter(|g| live(g)).count();
            bus_write_chain(len, down * lambda, before * lambda)
        }
    }

    /// Human-readable inventory, stage counts and worst-case loss.
    pub fn describe(&self, params: &DeviceParams) -> String {
        let mut s = String::new();
        let inv = &self.device_inventory;
        let _ = writeln!(s, "kind: {}", self.kind.name());
        if let TopologyKind::Trine(k) = self.kind {
            let _ = writeln!(s, "subnetworks: {k}");
        }
        if let Some(g) = self.mesh {
            let _ = writeln!(s, "mesh: {}x{}", g.rows, g.cols);
        }
        let _ = writeln!(s, "compute_gateways: {}", self.compute_gateways().count());
        let _ = writeln!(s, "memory_gateways: {}", self.memory_gateway.len());
        let _ = writeln!(s, "stage_count: {}", self.stage_count);
        let _ = writeln!(s, "mr_modulators: {}", inv.mr_modulators);
        let _ = writeln!(s, "mr_filters: {}", inv.mr_filters);
        let _ = writeln!(s, "mzi_switches: {}", inv.mzi_switches);
        let _ = writeln!(s, "pcmc_couplers: {}", inv.pcmc_couplers);
        let _ = writeln!(s, "laser_sources: {}", inv.laser_sources);
        if let Ok((src, dst, chain, loss)) = worst_case_path(self, params) {
            let _ = writeln!(
                s,
                "worst_case_path: g{} -> g{} ({} elements, {:.4} cm)",
                src.0,
                dst.0,
                chain.elements().len(),
                chain.length_cm()
            );
            let _ = writeln!(s, "worst_case_loss_db: {loss:.6}");
        }
        for l in 0..self.laser_count() {
            let _ = writeln!(s, "laser[{l}]_loss_db: {:.6}", self.laser_loss_db(l, params, None));
        }
        s
    }
}
