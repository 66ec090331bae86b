//! CNN layer arithmetic and traffic trace generation.
//!
//! All traffic is memory-centric: each layer reads its weights and input
//! activations from a memory chiplet, computes on one compute chiplet and
//! writes its output back. Nothing is cached between layers.

use std::fmt;
use std::path::Path;

use crate::accel::{ChipletId, LayerMapping};
use crate::error::{Error, Result};

pub const DEFAULT_BIT_WIDTH: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LayerKind {
    Conv,
    Fc,
    Pool,
    DepthwiseConv,
}

impl LayerKind {
    fn parse(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "conv" => Some(LayerKind::Conv),
            "fc" => Some(LayerKind::Fc),
            "pool" => Some(LayerKind::Pool),
            "dwconv" | "depthwise" | "depthwiseconv" => Some(LayerKind::DepthwiseConv),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            LayerKind::Conv => "conv",
            LayerKind::Fc => "fc",
            LayerKind::Pool => "pool",
            LayerKind::DepthwiseConv => "dwconv",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Padding {
    Valid,
    Same,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub h: u64,
    pub w: u64,
    pub c: u64,
    pub kh: u64,
    pub kw: u64,
    pub cout: u64,
    pub stride: u64,
    pub padding: Padding,
    pub bit_width: u32,
}

impl LayerSpec {
    pub fn conv(name: &str, hwc: (u64, u64, u64), k: (u64, u64), cout: u64, stride: u64) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Conv,
            h: hwc.0,
            w: hwc.1,
            c: hwc.2,
            kh: k.0,
            kw: k.1,
            cout,
            stride,
            padding: Padding::Valid,
            bit_width: DEFAULT_BIT_WIDTH,
        }
    }

    pub fn fc(name: &str, inputs: u64, outputs: u64) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Fc,
            h: 1,
            w: 1,
            c: inputs,
            kh: 1,
            kw: 1,
            cout: outputs,
            stride: 1,
            padding: Padding::Valid,
            bit_width: DEFAULT_BIT_WIDTH,
        }
    }

    pub fn pool(name: &str, hwc: (u64, u64, u64), k: u64, stride: u64) -> Self {
        Self {
            name: name.into(),
            kind: LayerKind::Pool,
            h: hwc.0,
            w: hwc.1,
            c: hwc.2,
            kh: k,
            kw: k,
            cout: hwc.2,
            stride,
            padding: Padding::Valid,
            bit_width: DEFAULT_BIT_WIDTH,
        }
    }

    pub fn with_padding(mut self, padding: Padding) -> Self {
        self.padding = padding;
        self
    }

    fn mismatch(&self, reason: impl Into<String>) -> Error {
        Error::DimensionMismatch {
            layer: self.name.clone(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [self.h, self.w, self.c, self.kh, self.kw, self.cout, self.stride];
        if dims.contains(&0) {
            return Err(self.mismatch("all dimensions and the stride must be >= 1"));
        }
        if self.bit_width == 0 {
            return Err(self.mismatch("bit width must be >= 1"));
        }
        if self.kh > self.h || self.kw > self.w {
            return Err(self.mismatch(format!(
                "kernel {}x{} exceeds input {}x{}",
                self.kh, self.kw, self.h, self.w
            )));
        }
        if matches!(self.kind, LayerKind::Pool | LayerKind::DepthwiseConv) && self.cout != self.c {
            return Err(self.mismatch("pooling and depthwise layers keep the channel count"));
        }
        Ok(())
    }

    /// Output spatial dimensions.
    pub fn output_hw(&self) -> (u64, u64) {
        match self.kind {
            LayerKind::Fc => (1, 1),
            _ => match self.padding {
                Padding::Valid => (
                    (self.h - self.kh) / self.stride + 1,
                    (self.w - self.kw) / self.stride + 1,
                ),
                Padding::Same => (self.h.div_ceil(self.stride), self.w.div_ceil(self.stride)),
            },
        }
    }

    pub fn output_elems(&self) -> u64 {
        let (ho, wo) = self.output_hw();
        ho * wo * self.cout
    }

    /// Length of the dot product behind one output element (0 for pooling).
    pub fn dot_length(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.kh * self.kw * self.c,
            LayerKind::DepthwiseConv => self.kh * self.kw,
            LayerKind::Fc => self.c,
            LayerKind::Pool => 0,
        }
    }

    /// Weights including one bias per output channel.
    pub fn weight_count(&self) -> u64 {
        match self.kind {
            LayerKind::Conv => self.kh * self.kw * self.c * self.cout + self.cout,
            LayerKind::DepthwiseConv => self.kh * self.kw * self.c + self.c,
            LayerKind::Fc => self.c * self.cout + self.cout,
            LayerKind::Pool => 0,
        }
    }

    pub fn input_elems(&self) -> u64 {
        self.h * self.w * self.c
    }

    pub fn mac_count(&self) -> u64 {
        self.output_elems() * self.dot_length()
    }

    fn bytes(&self, elems: u64) -> u64 {
        (elems * self.bit_width as u64).div_ceil(8)
    }
}

/// Bytes moved and MACs performed by one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerTraffic {
    pub weight_bytes: u64,
    pub input_bytes: u64,
    pub output_bytes: u64,
    pub mac_count: u64,
}

impl LayerTraffic {
    pub fn total_bytes(&self) -> u64 {
        self.weight_bytes + self.input_bytes + self.output_bytes
    }
}

pub fn layer_traffic(layer: &LayerSpec) -> Result<LayerTraffic> {
    layer.validate()?;
    Ok(LayerTraffic {
        weight_bytes: layer.bytes(layer.weight_count()),
        input_bytes: layer.bytes(layer.input_elems()),
        output_bytes: layer.bytes(layer.output_elems()),
        mac_count: layer.mac_count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrafficClass {
    WeightRead,
    ActivationRead,
    OutputWrite,
}

impl TrafficClass {
    pub fn is_read(&self) -> bool {
        !matches!(self, TrafficClass::OutputWrite)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficClass::WeightRead => "weight_read",
            TrafficClass::ActivationRead => "activation_read",
            TrafficClass::OutputWrite => "output_write",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TransferRequest {
    /// Global issue order; arbitration is FIFO on this index.
    pub index: usize,
    pub layer: usize,
    /// Packet index within the layer's transfer of this class.
    pub chunk: usize,
    pub src: ChipletId,
    pub dst: ChipletId,
    pub bytes: u64,
    pub class: TrafficClass,
}

impl TransferRequest {
    /// The compute-side endpoint of the transfer.
    pub fn compute_chiplet(&self) -> ChipletId {
        if self.class.is_read() {
            self.dst
        } else {
            self.src
        }
    }

    pub fn memory_chiplet(&self) -> ChipletId {
        if self.class.is_read() {
            self.src
        } else {
            self.dst
        }
    }
}

/// MAC work of one layer on its assigned chiplet.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MacWork {
    pub layer: usize,
    pub chiplet: ChipletId,
    pub mac_count: u64,
    pub outputs: u64,
    pub dot_length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TrafficTrace {
    pub transfers: Vec<TransferRequest>,
    /// One entry per layer, in layer order.
    pub work: Vec<MacWork>,
}

impl TrafficTrace {
    pub fn total_bytes(&self) -> u64 {
        self.transfers.iter().map(|t| t.bytes).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.transfers.is_empty() && self.work.is_empty()
    }

    /// Number of layers spanned by transfers or work.
    pub fn layer_count(&self) -> usize {
        let t = self.transfers.iter().map(|t| t.layer + 1).max().unwrap_or(0);
        let w = self.work.iter().map(|w| w.layer + 1).max().unwrap_or(0);
        t.max(w)
    }

    /// A trace holding a single transfer and no compute.
    pub fn single(src: ChipletId, dst: ChipletId, bytes: u64, class: TrafficClass) -> Self {
        Self {
            transfers: vec![TransferRequest {
                index: 0,
                layer: 0,
                chunk: 0,
                src,
                dst,
                bytes,
                class,
            }],
            work: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOptions {
    pub packet_bytes: u64,
    /// Layer `i` is served by `memory[i % memory.len()]`.
    pub memory: Vec<ChipletId>,
}

pub fn build_trace(model: &[LayerSpec], mapping: &LayerMapping, opts: &TraceOptions) -> Result<TrafficTrace> {
    if opts.memory.is_empty() && !model.is_empty() {
        return Err(Error::InvalidPlatform("no memory chiplet".into()));
    }
    let packet = opts.packet_bytes.max(1);
    let mut trace = TrafficTrace::default();
    let mut index = 0usize;
    for (layer_id, layer) in model.iter().enumerate() {
        let chiplet = mapping.chiplet_of(layer_id).ok_or(Error::UnmappedLayer(layer_id))?;
        let mem = opts.memory[layer_id % opts.memory.len()];
        let t = layer_traffic(layer)?;
        let mut emit = |bytes: u64, class: TrafficClass| {
            let (src, dst) = if class.is_read() {
                (mem, chiplet)
            } else {
                (chiplet, mem)
            };
            let mut remaining = bytes;
            let mut chunk = 0;
            while remaining > 0 {
                let b = remaining.min(packet);
                trace.transfers.push(TransferRequest {
                    index,
                    layer: layer_id,
                    chunk,
                    src,
                    dst,
                    bytes: b,
                    class,
                });
                index += 1;
                chunk += 1;
                remaining -= b;
            }
        };
        emit(t.weight_bytes, TrafficClass::WeightRead);
        emit(t.input_bytes, TrafficClass::ActivationRead);
        emit(t.output_bytes, TrafficClass::OutputWrite);
        trace.work.push(MacWork {
            layer: layer_id,
            chiplet,
            mac_count: t.mac_count,
            outputs: layer.output_elems(),
            dot_length: layer.dot_length(),
        });
    }
    Ok(trace)
}

pub const BUILTIN_MODELS: [&str; 6] = [
    "lenet5",
    "resnet18",
    "vgg16",
    "mobilenetv2",
    "densenet121",
    "efficientnetb0",
];

fn builtin_source(name: &str) -> Option<&'static str> {
    Some(match name {
        "lenet5" => include_str!("../models/lenet5.txt"),
        "resnet18" => include_str!("../models/resnet18.txt"),
        "vgg16" => include_str!("../models/vgg16.txt"),
        "mobilenetv2" => include_str!("../models/mobilenetv2.txt"),
        "densenet121" => include_str!("../models/densenet121.txt"),
        "efficientnetb0" => include_str!("../models/efficientnetb0.txt"),
        _ => return None,
    })
}

pub fn builtin_model(name: &str) -> Result<Vec<LayerSpec>> {
    let src = builtin_source(name).ok_or_else(|| Error::UnknownModel(name.to_string()))?;
    parse_model(src)
}

/// Parses the line-oriented model format:
/// `name kind H W C Kh Kw Cout stride padding`, `#` starts a comment.
pub fn parse_model(text: &str) -> Result<Vec<LayerSpec>> {
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::ModelParse { line: line_no, reason };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 10 {
            return Err(err(format!("expected 10 fields, found {}", f.len())));
        }
        let kind = LayerKind::parse(f[1]).ok_or_else(|| err(format!("unknown layer kind `{}`", f[1])))?;
        let mut nums = [0u64; 7];
        for (slot, tok) in nums.iter_mut().zip(&f[2..9]) {
            *slot = tok
                .parse()
                .map_err(|_| err(format!("`{tok}` is not a non-negative integer")))?;
        }
        let padding = match f[9].to_ascii_lowercase().as_str() {
            "valid" => Padding::Valid,
            "same" => Padding::Same,
            other => return Err(err(format!("unknown padding `{other}`"))),
        };
        let layer = LayerSpec {
            name: f[0].to_string(),
            kind,
            h: nums[0],
            w: nums[1],
            c: nums[2],
            kh: nums[3],
            kw: nums[4],
            cout: nums[5],
            stride: nums[6],
            padding,
            bit_width: DEFAULT_BIT_WIDTH,
        };
        layer.validate().map_err(|e| err(e.to_string()))?;
        layers.push(layer);
    }
    Ok(layers)
}

pub fn load_model_file(path: &Path) -> Result<Vec<LayerSpec>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    parse_model(&text)
}

pub fn set_bit_width(model: &mut [LayerSpec], bits: u32) {
    for l in model {
        l.bit_width = bits;
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {} {} {} {} {} {} {}",
            self.name,
            self.kind.as_str(),
            self.h,
            self.w,
            self.c,
            self.kh,
            self.kw,
            self.cout,
            self.stride,
            match self.padding {
                Padding::Valid => "valid",
                Padding::Same => "same",
            }
        )
    }
}
