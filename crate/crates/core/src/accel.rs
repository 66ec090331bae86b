//! Heterogeneous photonic MAC chiplets, layer mapping and compute timing.
//!
//! A MAC unit of size `S` evaluates an `S`-lane dot product per clock cycle
//! (weights imprinted on wavelength amplitudes, summed by balanced
//! photodetection). A layer whose dot product has length `K` therefore needs
//! `ceil(K / S)` unit passes per output element, and lanes left idle in the
//! last pass are waste.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::workload::{LayerKind, LayerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ChipletId(pub u32);

impl fmt::Display for ChipletId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "c{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComputeChiplet {
    pub id: ChipletId,
    /// Lanes per MAC unit.
    pub mac_unit_size: u64,
    pub mac_unit_count: u64,
    pub clock_hz: f64,
}

impl ComputeChiplet {
    pub fn lanes(&self) -> u64 {
        self.mac_unit_size * self.mac_unit_count
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryChiplet {
    pub id: ChipletId,
    pub bandwidth_bytes_per_s: f64,
    pub glb_bytes: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChipletPlatform {
    pub compute: Vec<ComputeChiplet>,
    pub memory: Vec<MemoryChiplet>,
    /// Single die holding every MAC unit, no interposer network.
    pub monolithic: bool,
    /// Electro-photonic gateways per compute chiplet.
    pub gateways_per_chiplet: usize,
    /// Photodetector and driver power per MAC unit.
    pub mac_unit_power_mw: f64,
    /// Fixed latency of one on-die transfer on a monolithic platform.
    pub onchip_latency_s: f64,
}

pub const DEFAULT_MEMORY_BW: f64 = 96e9;
pub const DEFAULT_GLB_BYTES: u64 = 64 << 20;
pub const DEFAULT_GATEWAYS_PER_CHIPLET: usize = 8;
pub const DEFAULT_MAC_UNIT_POWER_MW: f64 = 5.0;
pub const DEFAULT_ONCHIP_LATENCY_S: f64 = 50e-9;

/// Default heterogeneous chiplets as (lanes per unit, unit count). Each
/// chiplet carries roughly the same lane budget (~9.2k lanes).
pub const DEFAULT_CHIPLETS: [(u64, u64); 4] = [(9, 1024), (25, 368), (49, 188), (128, 72)];

impl ChipletPlatform {
    pub fn new(compute: Vec<ComputeChiplet>, memory: Vec<MemoryChiplet>) -> Result<Self> {
        let p = Self {
            compute,
            memory,
            monolithic: false,
            gateways_per_chiplet: DEFAULT_GATEWAYS_PER_CHIPLET,
            mac_unit_power_mw: DEFAULT_MAC_UNIT_POWER_MW,
            onchip_latency_s: DEFAULT_ONCHIP_LATENCY_S,
        };
        p.validate()?;
        Ok(p)
    }

    /// Four heterogeneous compute chiplets plus one memory chiplet.
    pub fn default_2p5d(clock_hz: f64) -> Self {
        let mut compute = Vec::new();
        for (i, (s, n)) in DEFAULT_CHIPLETS.iter().enumerate() {
            compute.push(ComputeChiplet {
                id: ChipletId(i as u32),
                mac_unit_size: *s,
                mac_unit_count: *n,
                clock_hz,
            });
        }
        let memory = vec![MemoryChiplet {
            id: ChipletId(compute.len() as u32),
            bandwidth_bytes_per_s: DEFAULT_MEMORY_BW,
            glb_bytes: DEFAULT_GLB_BYTES,
        }];
        Self::new(compute, memory).expect("default platform is valid")
    }

    /// `n` identical compute chiplets with one gateway each, plus one memory chiplet.
    pub fn uniform(n: usize, mac_unit_size: u64, mac_unit_count: u64, clock_hz: f64) -> Result<Self> {
        let compute = (0..n)
            .map(|i| ComputeChiplet {
                id: ChipletId(i as u32),
                mac_unit_size,
                mac_unit_count,
                clock_hz,
            })
            .collect();
        let memory = vec![MemoryChiplet {
            id: ChipletId(n as u32),
            bandwidth_bytes_per_s: DEFAULT_MEMORY_BW,
            glb_bytes: DEFAULT_GLB_BYTES,
        }];
        let mut p = Self::new(compute, memory)?;
        p.gateways_per_chiplet = 1;
        Ok(p)
    }

    pub fn with_gateways_per_chiplet(mut self, g: usize) -> Result<Self> {
        self.gateways_per_chiplet = g;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.compute.is_empty() {
            return Err(Error::InvalidPlatform("no compute chiplet".into()));
        }
        if self.memory.is_empty() {
            return Err(Error::InvalidPlatform("no memory chiplet".into()));
        }
        if self.gateways_per_chiplet == 0 {
            return Err(Error::InvalidPlatform("gateways_per_chiplet must be >= 1".into()));
        }
        let mut ids = BTreeSet::new();
        for c in &self.compute {
            if c.mac_unit_size == 0 || c.mac_unit_count == 0 {
                return Err(Error::InvalidPlatform(format!(
                    "chiplet {} needs mac_unit_size >= 1 and mac_unit_count >= 1",
                    c.id
                )));
            }
            if !(c.clock_hz.is_finite() && c.clock_hz > 0.0) {
                return Err(Error::InvalidPlatform(format!("chiplet {} clock must be > 0", c.id)));
            }
            if !ids.insert(c.id) {
                return Err(Error::InvalidPlatform(format!("duplicate chiplet id {}", c.id)));
            }
        }
        for m in &self.memory {
            if !(m.bandwidth_bytes_per_s.is_finite() && m.bandwidth_bytes_per_s > 0.0) {
                return Err(Error::InvalidPlatform(format!("memory {} bandwidth must be > 0", m.id)));
            }
            if !ids.insert(m.id) {
                return Err(Error::InvalidPlatform(format!("duplicate chiplet id {}", m.id)));
            }
        }
        if !(self.mac_unit_power_mw.is_finite() && self.mac_unit_power_mw >= 0.0) {
            return Err(Error::InvalidPlatform("mac_unit_power_mw must be >= 0".into()));
        }
        if !(self.onchip_latency_s.is_finite() && self.onchip_latency_s >= 0.0) {
            return Err(Error::InvalidPlatform("onchip_latency_s must be >= 0".into()));
        }
        Ok(())
    }

    pub fn compute_chiplet(&self, id: ChipletId) -> Option<&ComputeChiplet> {
        self.compute.iter().find(|c| c.id == id)
    }

    pub fn memory_chiplet(&self, id: ChipletId) -> Option<&MemoryChiplet> {
        self.memory.iter().find(|m| m.id == id)
    }

    pub fn memory_ids(&self) -> Vec<ChipletId> {
        self.memory.iter().map(|m| m.id).collect()
    }

    pub fn total_lanes(&self) -> u64 {
        self.compute.iter().map(|c| c.lanes()).sum()
    }

    pub fn compute_gateway_count(&self) -> usize {
        self.compute.len() * self.gateways_per_chiplet
    }

    pub fn total_memory_bw(&self) -> f64 {
        self.memory.iter().map(|m| m.bandwidth_bytes_per_s).sum()
    }

    /// Static plus dynamic MAC power: trimming of every lane's weighting
    /// microring plus a per-unit photodetector/driver constant.
    pub fn mac_power_mw(&self, mr_trim_power_mw: f64) -> f64 {
        self.compute
            .iter()
            .map(|c| c.lanes() as f64 * mr_trim_power_mw + c.mac_unit_count as f64 * self.mac_unit_power_mw)
            .sum()
    }
}

/// Layer to chiplet assignment with per-layer lane utilization.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerMapping {
    assignments: Vec<ChipletId>,
    utilization: Vec<f64>,
}

impl LayerMapping {
    pub fn from_assignments(assignments: Vec<ChipletId>) -> Self {
        let utilization = vec![1.0; assignments.len()];
        Self {
            assignments,
            utilization,
        }
    }

    pub fn uniform(chiplet: ChipletId, layers: usize) -> Self {
        Self::from_assignments(vec![chiplet; layers])
    }

    pub fn chiplet_of(&self, layer: usize) -> Option<ChipletId> {
        self.assignments.get(layer).copied()
    }

    pub fn utilization_of(&self, layer: usize) -> Option<f64> {
        self.utilization.get(layer).copied()
    }

    pub fn assignments(&self) -> &[ChipletId] {
        &self.assignments
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }
}

/// Lanes left idle in the last pass of a length-`k` dot product on `s` lanes.
pub fn wasted_lanes(k: u64, s: u64) -> u64 {
    k.div_ceil(s) * s - k
}

fn lane_utilization(k: u64, s: u64) -> f64 {
    if k == 0 {
        1.0
    } else {
        k as f64 / (k.div_ceil(s) * s) as f64
    }
}

/// Assigns each layer to a compute chiplet.
///
/// Convolutions go to the chiplet wasting the fewest lanes per dot-product
/// pass, FC layers to the largest units. Remaining ties fall to the least
/// loaded chiplet (accumulated MACs), then the lowest id.
pub fn map_layers(model: &[LayerSpec], platform: &ChipletPlatform) -> LayerMapping {
    assert!(!platform.compute.is_empty(), "platform has no compute chiplet");
    let mut load = vec![0u64; platform.compute.len()];
    let mut assignments = Vec::with_capacity(model.len());
    let mut utilization = Vec::with_capacity(model.len());
    let largest = platform.compute.iter().map(|c| c.mac_unit_size).max().unwrap_or(1);

    for layer in model {
        let k = layer.dot_length();
        // Primary key per chiplet; lower is better.
        let primary = |c: &ComputeChiplet| -> u64 {
            match layer.kind {
                LayerKind::Conv | LayerKind::DepthwiseConv => wasted_lanes(k, c.mac_unit_size),
                LayerKind::Fc => u64::from(c.mac_unit_size != largest),
                LayerKind::Pool => 0,
            }
        };
        let best = platform
            .compute
            .iter()
            .enumerate()
            .min_by_key(|(i, c)| (primary(c), load[*i], c.id))
            .map(|(i, _)| i)
            .expect("non-empty");
        let chiplet = &platform.compute[best];
        load[best] += layer.mac_count();
        assignments.push(chiplet.id);
        utilization.push(lane_utilization(k, chiplet.mac_unit_size));
    }
    LayerMapping {
        assignments,
        utilization,
    }
}

/// Clock cycles a chiplet needs for `outputs` dot products of length `k`.
pub fn compute_passes(outputs: u64, k: u64, chiplet: &ComputeChiplet) -> u64 {
    if k == 0 || outputs == 0 {
        return 0;
    }
    let unit_passes = outputs * k.div_ceil(chiplet.mac_unit_size);
    unit_passes.div_ceil(chiplet.mac_unit_count)
}

pub fn compute_latency_s(layer: &LayerSpec, chiplet: &ComputeChiplet) -> f64 {
    compute_passes(layer.output_elems(), layer.dot_length(), chiplet) as f64 / chiplet.clock_hz
}

/// Useful MACs over the lane-cycles spent on the mapped chiplets.
pub fn aggregate_utilization(model: &[LayerSpec], mapping: &LayerMapping, platform: &ChipletPlatform) -> f64 {
    let mut useful = 0f64;
    let mut spent = 0f64;
    for (i, layer) in model.iter().enumerate() {
        let Some(c) = mapping.chiplet_of(i).and_then(|id| platform.compute_chiplet(id)) else {
            continue;
        };
        let passes = compute_passes(layer.output_elems(), layer.dot_length(), c);
        useful += layer.mac_count() as f64;
        spent += (passes * c.lanes()) as f64;
    }
    if spent == 0.0 {
        0.0
    } else {
        useful / spent
    }
}

/// Monolithic baseline with the same lane budget in uniform units of the
/// platform's largest unit size.
pub fn crosslight_baseline(platform: &ChipletPlatform) -> Result<ChipletPlatform> {
    if platform.compute.is_empty() {
        return Err(Error::InvalidPlatform("no compute chiplet".into()));
    }
    let largest = platform
        .compute
        .iter()
        .max_by_key(|c| (c.mac_unit_size, std::cmp::Reverse(c.id)))
        .expect("non-empty");
    let s = largest.mac_unit_size;
    let native: u64 = platform
        .compute
        .iter()
        .filter(|c| c.mac_unit_size == s)
        .map(|c| c.mac_unit_count)
        .sum();
    let other_lanes: u64 = platform
        .compute
        .iter()
        .filter(|c| c.mac_unit_size != s)
        .map(|c| c.lanes())
        .sum();
    let units = native + other_lanes.div_ceil(s);
    Ok(ChipletPlatform {
        compute: vec![ComputeChiplet {
            id: largest.id,
            mac_unit_size: s,
            mac_unit_count: units,
            clock_hz: largest.clock_hz,
        }],
        memory: platform.memory.clone(),
        monolithic: true,
        gateways_per_chiplet: 1,
        mac_unit_power_mw: platform.mac_unit_power_mw,
        onchip_latency_s: platform.onchip_latency_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chiplet(id: u32, s: u64, n: u64, clock: f64) -> ComputeChiplet {
        ComputeChiplet {
            id: ChipletId(id),
            mac_unit_size: s,
            mac_unit_count: n,
            clock_hz: clock,
        }
    }

    fn platform(chiplets: Vec<ComputeChiplet>) -> ChipletPlatform {
        let mem = MemoryChiplet {
            id: ChipletId(100),
            bandwidth_bytes_per_s: 96e9,
            glb_bytes: 1 << 20,
        };
        ChipletPlatform::new(chiplets, vec![mem]).unwrap()
    }

    #[test]
    fn small_kernel_goes_to_small_units() {
        let p = platform(vec![chiplet(0, 9, 64, 2e9), chiplet(1, 49, 64, 2e9)]);
        let m = map_layers(&[LayerSpec::conv("c", (8, 8, 1), (3, 3), 4, 1)], &p);
        assert_eq!(m.chiplet_of(0), Some(ChipletId(0)));
        assert_eq!(m.utilization_of(0), Some(1.0));
        let m = map_layers(&[LayerSpec::conv("c", (8, 8, 1), (7, 7), 4, 1)], &p);
        assert_eq!(m.chiplet_of(0), Some(ChipletId(1)));
    }

    #[test]
    fn single_chiplet_takes_everything() {
        let p = platform(vec![chiplet(3, 128, 8, 2e9)]);
        let model = crate::workload::builtin_model("lenet5").unwrap();
        let m = map_layers(&model, &p);
        assert_eq!(m.len(), model.len());
        assert!(m.assignments().iter().all(|&c| c == ChipletId(3)));
    }

    #[test]
    fn fc_prefers_largest_units() {
        let p = platform(vec![chiplet(0, 9, 64, 2e9), chiplet(1, 128, 64, 2e9)]);
        let m = map_layers(&[LayerSpec::fc("fc", 90, 10)], &p);
        assert_eq!(m.chiplet_of(0), Some(ChipletId(1)));
    }

    #[test]
    fn ties_go_to_least_loaded_then_lowest_id() {
        let p = platform(vec![chiplet(5, 9, 64, 2e9), chiplet(2, 9, 64, 2e9)]);
        let l = LayerSpec::conv("c", (8, 8, 1), (3, 3), 4, 1);
        let m = map_layers(&[l.clone(), l.clone(), l], &p);
        assert_eq!(m.assignments(), &[ChipletId(2), ChipletId(5), ChipletId(2)]);
    }

    #[test]
    fn exact_fit_is_one_pass() {
        let c = chiplet(0, 9, 16, 1e9);
        // 16 outputs of a 9-long dot product on 16 units of 9 lanes
        let l = LayerSpec::conv("c", (3, 3, 1), (3, 3), 16, 1);
        assert_eq!(l.mac_count(), 9 * 16);
        assert_eq!(compute_latency_s(&l, &c), 1e-9);
    }

    #[test]
    fn lenet_conv1_on_25_lane_units() {
        let c = chiplet(0, 25, 64, 2e9);
        let l = LayerSpec::conv("conv1", (32, 32, 1), (5, 5), 6, 1);
        assert_eq!(compute_passes(l.output_elems(), l.dot_length(), &c), 74);
        assert!((compute_latency_s(&l, &c) - 37e-9).abs() < 1e-21);
    }

    #[test]
    fn pooling_is_free() {
        let c = chiplet(0, 25, 64, 2e9);
        let l = LayerSpec::pool("p", (28, 28, 6), 2, 2);
        assert_eq!(compute_latency_s(&l, &c), 0.0);
    }

    #[test]
    fn baseline_conserves_lanes() {
        let p = platform(vec![chiplet(0, 9, 64, 2e9), chiplet(1, 49, 64, 2e9)]);
        let b = crosslight_baseline(&p).unwrap();
        assert!(b.monolithic);
        assert_eq!(b.compute.len(), 1);
        assert_eq!(b.compute[0].mac_unit_size, 49);
        assert_eq!(b.compute[0].mac_unit_count, 64 + (9 * 64u64).div_ceil(49));
        assert!(b.total_lanes() >= p.total_lanes());
        assert_eq!(b.memory, p.memory);
    }

    #[test]
    fn baseline_of_single_chiplet() {
        let mut p = platform(vec![chiplet(0, 25, 10, 2e9)]);
        p.gateways_per_chiplet = 1;
        let b = crosslight_baseline(&p).unwrap();
        assert_eq!(b.compute, p.compute);
        assert!(b.monolithic);
    }

    #[test]
    fn baseline_rejects_empty() {
        let mut p = platform(vec![chiplet(0, 25, 10, 2e9)]);
        p.compute.clear();
        assert!(matches!(crosslight_baseline(&p), Err(Error::InvalidPlatform(_))));
    }

    #[test]
    fn platform_validation() {
        let mem = MemoryChiplet {
            id: ChipletId(1),
            bandwidth_bytes_per_s: 1e9,
            glb_bytes: 0,
        };
        assert!(ChipletPlatform::new(vec![], vec![mem.clone()]).is_err());
        assert!(ChipletPlatform::new(vec![chiplet(0, 9, 1, 1e9)], vec![]).is_err());
        assert!(ChipletPlatform::new(vec![chiplet(1, 9, 1, 1e9)], vec![mem.clone()]).is_err());
        assert!(ChipletPlatform::new(vec![chiplet(0, 0, 1, 1e9)], vec![mem]).is_err());
    }

    #[test]
    fn lenet_underutilizes_compared_to_vgg() {
        let p = ChipletPlatform::default_2p5d(2e9);
        let util = |name: &str| {
            let m = crate::workload::builtin_model(name).unwrap();
            aggregate_utilization(&m, &map_layers(&m, &p), &p)
        };
        let (lenet, vgg) = (util("lenet5"), util("vgg16"));
        assert!(lenet < vgg, "lenet {lenet} vgg {vgg}");
    }
}
