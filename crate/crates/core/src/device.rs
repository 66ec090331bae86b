//! Lumped photonic device parameters and optical link-budget arithmetic.
//!
//! Every loss is a single wavelength-independent figure in dB. A writer to
//! reader link is described by a [`DeviceChain`]; its summed loss feeds
//! [`required_laser_power_mw`], which returns the optical power a laser must
//! launch per wavelength for the photodiode to see its sensitivity plus the
//! link margin.

use crate::error::{Error, Result};

/// Photonic and electronic constants shared by every model.
///
/// Losses are in dB, powers in mW, times in seconds, rates in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceParams {
    pub mr_through_loss_db: f64,
    pub mr_drop_loss_db: f64,
    pub mr_modulator_insertion_db: f64,
    pub mzi_insertion_loss_db: f64,
    pub waveguide_prop_loss_db_per_cm: f64,
    pub coupler_loss_db: f64,
    /// Excess loss per 1x2 split, on top of the ideal 10*log10(fan_out).
    pub splitter_loss_db: f64,
    pub pd_sensitivity_dbm: f64,
    pub link_margin_db: f64,
    pub laser_wall_plug_efficiency: f64,
    pub mr_trim_power_mw: f64,
    pub mzi_static_power_mw: f64,
    pub mzi_switch_time_s: f64,
    pub modulation_rate_hz: f64,
    pub gateway_clock_hz: f64,
    pub wavelengths_per_waveguide: u32,
    pub pcmc_switch_time_s: f64,
    pub pcmc_switch_energy_j: f64,
    pub gateway_power_mw: f64,
    pub chiplet_bw_cap_bytes_per_s: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            mr_through_loss_db: 0.02,
            mr_drop_loss_db: 0.5,
            mr_modulator_insertion_db: 0.5,
            mzi_insertion_loss_db: 1.0,
            waveguide_prop_loss_db_per_cm: 1.0,
            coupler_loss_db: 1.0,
            splitter_loss_db: 0.2,
            pd_sensitivity_dbm: -20.0,
            link_margin_db: 3.0,
            laser_wall_plug_efficiency: 0.25,
            mr_trim_power_mw: 0.5,
            mzi_static_power_mw: 1.0,
            mzi_switch_time_s: 10e-9,
            modulation_rate_hz: 12e9,
            gateway_clock_hz: 2e9,
            wavelengths_per_waveguide: 8,
            pcmc_switch_time_s: 100e-9,
            pcmc_switch_energy_j: 1e-9,
            gateway_power_mw: 50.0,
            chiplet_bw_cap_bytes_per_s: 100e9,
        }
    }
}

fn non_negative(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            field,
            reason: format!("must be a finite value >= 0, got {v}"),
        })
    }
}

fn positive(field: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam {
            field,
            reason: format!("must be a finite value > 0, got {v}"),
        })
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        non_negative("mr_through_loss_db", self.mr_through_loss_db)?;
        non_negative("mr_drop_loss_db", self.mr_drop_loss_db)?;
        non_negative("mr_modulator_insertion_db", self.mr_modulator_insertion_db)?;
        non_negative("mzi_insertion_loss_db", self.mzi_insertion_loss_db)?;
        non_negative("waveguide_prop_loss_db_per_cm", self.waveguide_prop_loss_db_per_cm)?;
        non_negative("coupler_loss_db", self.coupler_loss_db)?;
        non_negative("splitter_loss_db", self.splitter_loss_db)?;
        non_negative("link_margin_db", self.link_margin_db)?;
        non_negative("mr_trim_power_mw", self.mr_trim_power_mw)?;
        non_negative("mzi_static_power_mw", self.mzi_static_power_mw)?;
        non_negative("mzi_switch_time_s", self.mzi_switch_time_s)?;
        non_negative("pcmc_switch_time_s", self.pcmc_switch_time_s)?;
        non_negative("pcmc_switch_energy_j", self.pcmc_switch_energy_j)?;
        non_negative("gateway_power_mw", self.gateway_power_mw)?;
        positive("modulation_rate_hz", self.modulation_rate_hz)?;
        positive("gateway_clock_hz", self.gateway_clock_hz)?;
        positive("chiplet_bw_cap_bytes_per_s", self.chiplet_bw_cap_bytes_per_s)?;
        let eff = self.laser_wall_plug_efficiency;
        if !(eff > 0.0 && eff <= 1.0) {
            return Err(Error::InvalidParam {
                field: "laser_wall_plug_efficiency",
                reason: format!("must lie in (0, 1], got {eff}"),
            });
        }
        if self.wavelengths_per_waveguide < 1 {
            return Err(Error::InvalidParam {
                field: "wavelengths_per_waveguide",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.pd_sensitivity_dbm.is_finite() && self.pd_sensitivity_dbm < 10.0) {
            return Err(Error::InvalidParam {
                field: "pd_sensitivity_dbm",
                reason: format!("must be below 10 dBm, got {}", self.pd_sensitivity_dbm),
            });
        }
        Ok(())
    }

    /// Aggregate line rate of one waveguide in bits/s.
    pub fn waveguide_rate_bps(&self) -> f64 {
        self.wavelengths_per_waveguide as f64 * self.modulation_rate_hz
    }
}

/// One element a signal traverses between modulator and photodiode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChainElement {
    /// Off-resonance pass by a microring.
    MrPass,
    /// In-to-drop coupling at the reader's filter.
    MrDrop,
    /// Active modulator insertion.
    MrModulate,
    /// One broadband MZI switch stage.
    MziStage,
    /// Waveguide propagation over `length_cm`.
    Propagate(f64),
    /// Chiplet to interposer vertical coupling.
    Coupler,
    /// Power split to `fan_out` branches.
    Split(u32),
}

impl ChainElement {
    pub fn loss_db(&self, p: &DeviceParams) -> f64 {
        match *self {
            ChainElement::MrPass => p.mr_through_loss_db,
            ChainElement::MrDrop => p.mr_drop_loss_db,
            ChainElement::MrModulate => p.mr_modulator_insertion_db,
            ChainElement::MziStage => p.mzi_insertion_loss_db,
            ChainElement::Propagate(len) => len * p.waveguide_prop_loss_db_per_cm,
            ChainElement::Coupler => p.coupler_loss_db,
            ChainElement::Split(fan_out) => 10.0 * (fan_out as f64).log10() + p.splitter_loss_db,
        }
    }

    fn check(&self) -> Result<()> {
        match *self {
            ChainElement::Propagate(len) if !(len.is_finite() && len >= 0.0) => Err(Error::InvalidChain(format!(
                "propagation length must be >= 0, got {len}"
            ))),
            ChainElement::Split(fan_out) if fan_out < 2 => Err(Error::InvalidChain(format!(
                "split fan-out must be >= 2, got {fan_out}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Ordered device elements along a writer to reader path.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeviceChain {
    elements: Vec<ChainElement>,
}

impl DeviceChain {
    pub fn new(elements: Vec<ChainElement>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidChain("chain is empty".into()));
        }
        for e in &elements {
            e.check()?;
        }
        Ok(Self { elements })
    }

    pub fn elements(&self) -> &[ChainElement] {
        &self.elements
    }

    /// Concatenation of two valid chains.
    pub fn concat(&self, other: &DeviceChain) -> DeviceChain {
        let mut elements = self.elements.clone();
        elements.extend_from_slice(&other.elements);
        DeviceChain { elements }
    }

    pub fn count(&self, pred: impl Fn(&ChainElement) -> bool) -> usize {
        self.elements.iter().filter(|e| pred(e)).count()
    }

    pub fn length_cm(&self) -> f64 {
        self.elements
            .iter()
            .map(|e| match e {
                ChainElement::Propagate(len) => *len,
                _ => 0.0,
            })
            .sum()
    }
}

/// Incremental chain construction for the topology builder.
#[derive(Debug, Default)]
pub(crate) struct ChainBuilder {
    elements: Vec<ChainElement>,
}

impl ChainBuilder {
    pub fn push(mut self, e: ChainElement) -> Self {
        self.elements.push(e);
        self
    }

    pub fn repeat(mut self, e: ChainElement, n: usize) -> Self {
        self.elements.extend(std::iter::repeat_n(e, n));
        self
    }

    pub fn build(self) -> DeviceChain {
        DeviceChain::new(self.elements).expect("builder produced an invalid chain")
    }
}

/// Summed dB loss of `chain`.
pub fn path_loss_db(chain: &DeviceChain, params: &DeviceParams) -> f64 {
    chain.elements.iter().map(|e| e.loss_db(params)).sum()
}

/// Optical power per wavelength (mW) a laser must launch to close the budget.
pub fn required_laser_power_mw(worst_loss_db: f64, params: &DeviceParams) -> f64 {
    debug_assert!(worst_loss_db >= 0.0);
    10f64.powf((params.pd_sensitivity_dbm + worst_loss_db + params.link_margin_db) / 10.0)
}

/// Electrical draw of a laser emitting `optical_mw`.
pub fn wall_plug_laser_power_mw(optical_mw: f64, params: &DeviceParams) -> f64 {
    optical_mw / params.laser_wall_plug_efficiency
}
