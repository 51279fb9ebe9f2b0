//! Analytical roofline model of the accelerator.
//!
//! Each primitive costs `max(compute, memory)` seconds:
//!
//! - compute = MACs / (peak MACs/s x utilization), where utilization is a
//!   base factor (cut by `depthwise_penalty` for depthwise convolutions) times
//!   the occupancy of the last output-channel tile. Channel tiles are
//!   `SIMD_WIDTH x simd_units` wide.
//! - memory = DRAM bytes / io bandwidth. DRAM traffic is the 8-bit weights,
//!   plus input and output activations when they do not fit in the pooled
//!   local memory of all PEs.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::accel::{self, AccelError, AcceleratorConfig, InvalidReason, Validity, SIMD_WIDTH};
use crate::nas::{ArchitectureSpec, Primitive, PrimitiveKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfParams {
    /// Utilization of full, pointwise and dense layers on a fully occupied tile.
    pub u_base: f64,
    /// Depthwise layers run at `u_base / depthwise_penalty`.
    pub depthwise_penalty: f64,
    /// Fixed cost added to every primitive.
    pub dispatch_overhead_s: f64,
}

impl Default for PerfParams {
    fn default() -> Self {
        PerfParams { u_base: 0.8, depthwise_penalty: 3.0, dispatch_overhead_s: 0.0 }
    }
}

/// Energy coefficients. Defaults are the calibrated values, see
/// [`EnergyModelParams::nominal`] for the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModelParams {
    /// Joules per MAC.
    pub e_mac: f64,
    /// Joules per DRAM byte.
    pub e_dram_byte: f64,
    /// Watts.
    pub p_static: f64,
}

impl EnergyModelParams {
    /// Pre-calibration coefficients: 0.25 pJ/MAC, 20 pJ/byte, 1.5 W.
    pub const fn nominal() -> Self {
        EnergyModelParams { e_mac: 0.25e-12, e_dram_byte: 20e-12, p_static: 1.5 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        EnergyModelParams {
            e_mac: self.e_mac * factor,
            e_dram_byte: self.e_dram_byte * factor,
            p_static: self.p_static * factor,
        }
    }
}

impl Default for EnergyModelParams {
    fn default() -> Self {
        Self::nominal().scaled(ENERGY_CALIBRATION)
    }
}

/// Factor applied to [`EnergyModelParams::nominal`] by the calibration pass
/// (see [`calibrate_energy`]); frozen here.
pub const ENERGY_CALIBRATION: f64 = 1.369_621_657_792_447_4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCost {
    pub name: String,
    pub kind: PrimitiveKind,
    pub compute_seconds: f64,
    pub memory_seconds: f64,
    pub latency_seconds: f64,
    pub dram_bytes: f64,
    pub macs: u64,
    pub utilization: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerfError {
    #[error(transparent)]
    Domain(#[from] AccelError),
    #[error("configuration cannot run this network: {0:?}")]
    Invalid(Vec<InvalidReason>),
}

/// Output channels processed per lane per pass.
pub fn channel_tile(cfg: &AcceleratorConfig) -> u32 {
    SIMD_WIDTH * cfg.simd_units
}

/// Fraction of the last channel tile that does useful work.
pub fn tile_efficiency(channels: u32, tile: u32) -> f64 {
    if channels == 0 || tile == 0 {
        return 1.0;
    }
    let tiles = channels.div_ceil(tile);
    channels as f64 / (tile as f64 * tiles as f64)
}

/// Register-file bytes one lane needs for a layer: int32 accumulators for its
/// channel tile plus one 8-bit input window.
pub fn lane_working_set_bytes(p: &Primitive, cfg: &AcceleratorConfig) -> f64 {
    let tile = channel_tile(cfg).min(p.output.c);
    let k2 = p.kernel as f64 * p.kernel as f64;
    4.0 * tile as f64 + k2 * p.input_channels_per_group() as f64
}

pub fn utilization(p: &Primitive, cfg: &AcceleratorConfig, params: &PerfParams) -> f64 {
    let base = match p.kind {
        PrimitiveKind::Depthwise => params.u_base / params.depthwise_penalty,
        _ => params.u_base,
    };
    base * tile_efficiency(p.output.c, channel_tile(cfg))
}

/// (compute seconds, memory seconds) for a given amount of work.
pub fn roofline(macs: u64, utilization: f64, dram_bytes: f64, cfg: &AcceleratorConfig) -> (f64, f64) {
    let compute = if macs == 0 { 0.0 } else { macs as f64 / (accel::peak_macs(cfg) * utilization) };
    (compute, dram_bytes / cfg.io_bytes_per_second())
}

pub fn layer_latency(p: &Primitive, cfg: &AcceleratorConfig, params: &PerfParams) -> LayerCost {
    let macs = p.macs();
    let u = utilization(p, cfg, params);
    let activations = (p.input_bytes() + p.output_bytes()) as f64;
    let spill = if activations > cfg.total_local_memory_bytes() { activations } else { 0.0 };
    let dram_bytes = p.weight_bytes() as f64 + spill;
    let (compute_seconds, memory_seconds) = roofline(macs, u, dram_bytes, cfg);
    LayerCost {
        name: p.name.clone(),
        kind: p.kind,
        compute_seconds,
        memory_seconds,
        latency_seconds: compute_seconds.max(memory_seconds),
        dram_bytes,
        macs,
        utilization: u,
    }
}

/// Per-primitive costs without validity checks.
pub fn layer_costs(arch: &ArchitectureSpec, cfg: &AcceleratorConfig, params: &PerfParams) -> Vec<LayerCost> {
    arch.primitives().iter().map(|p| layer_latency(p, cfg, params)).collect()
}

/// Network totals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkCost {
    pub latency_ms: f64,
    pub energy_mj: f64,
    pub macs: u64,
    pub dram_bytes: f64,
}

pub fn totals(costs: &[LayerCost], params: &PerfParams, energy: &EnergyModelParams) -> NetworkCost {
    let latency_s: f64 = costs.iter().map(|c| c.latency_seconds + params.dispatch_overhead_s).sum();
    let dynamic: f64 = costs.iter().map(|c| energy.e_mac * c.macs as f64 + energy.e_dram_byte * c.dram_bytes).sum();
    NetworkCost {
        latency_ms: latency_s * 1e3,
        energy_mj: (dynamic + energy.p_static * latency_s) * 1e3,
        macs: costs.iter().map(|c| c.macs).sum(),
        dram_bytes: costs.iter().map(|c| c.dram_bytes).sum(),
    }
}

fn checked(arch: &ArchitectureSpec, cfg: &AcceleratorConfig) -> Result<(), PerfError> {
    match accel::validate(cfg, arch)? {
        Validity::Valid => Ok(()),
        Validity::Invalid(reasons) => Err(PerfError::Invalid(reasons)),
    }
}

/// Validated network cost.
pub fn simulate(
    arch: &ArchitectureSpec,
    cfg: &AcceleratorConfig,
    params: &PerfParams,
    energy: &EnergyModelParams,
) -> Result<(Vec<LayerCost>, NetworkCost), PerfError> {
    checked(arch, cfg)?;
    let costs = layer_costs(arch, cfg, params);
    let total = totals(&costs, params, energy);
    Ok((costs, total))
}

pub fn network_latency(arch: &ArchitectureSpec, cfg: &AcceleratorConfig, params: &PerfParams) -> Result<f64, PerfError> {
    checked(arch, cfg)?;
    Ok(totals(&layer_costs(arch, cfg, params), params, &EnergyModelParams::default()).latency_ms)
}

pub fn network_energy(
    arch: &ArchitectureSpec,
    cfg: &AcceleratorConfig,
    params: &PerfParams,
    energy: &EnergyModelParams,
) -> Result<f64, PerfError> {
    simulate(arch, cfg, params, energy).map(|(_, t)| t.energy_mj)
}

/// The single-factor energy calibration: scales `start` so that `arch` on
/// `cfg` costs exactly `target_mj`. Returns the factor.
pub fn calibrate_energy(
    arch: &ArchitectureSpec,
    cfg: &AcceleratorConfig,
    params: &PerfParams,
    start: &EnergyModelParams,
    target_mj: f64,
) -> Result<f64, PerfError> {
    Ok(target_mj / network_energy(arch, cfg, params, start)?)
}
