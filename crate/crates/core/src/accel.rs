//! The parameterized edge accelerator: a 2D grid of processing elements
//! (PEs), each with several compute lanes sharing a local memory; every lane
//! has a register file and a bank of 4-way SIMD MAC units.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nas::{ArchitectureSpec, Primitive};
use crate::perf::lane_working_set_bytes;

pub const PE_DIM_DOMAIN: [u32; 5] = [1, 2, 4, 6, 8];
pub const SIMD_UNITS_DOMAIN: [u32; 4] = [16, 32, 64, 128];
pub const COMPUTE_LANES_DOMAIN: [u32; 4] = [1, 2, 4, 8];
pub const LOCAL_MEMORY_MB_DOMAIN: [f64; 5] = [0.5, 1.0, 2.0, 3.0, 4.0];
pub const REGISTER_FILE_KB_DOMAIN: [u32; 5] = [8, 16, 32, 64, 128];
pub const IO_BANDWIDTH_DOMAIN: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 25.0];

/// Lanes per SIMD unit.
pub const SIMD_WIDTH: u32 = 4;
pub const OPS_PER_MAC: f64 = 2.0;
pub const DEFAULT_CLOCK_GHZ: f64 = 0.8;
pub const BYTES_PER_MB: f64 = 1024.0 * 1024.0;
pub const BYTES_PER_KB: f64 = 1024.0;
/// io_bandwidth is in gigabytes per second.
pub const BYTES_PER_GB: f64 = 1e9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccelError {
    #[error("{knob} = {value} is outside its search domain")]
    Domain { knob: HwKnob, value: f64 },
    #[error("clock_ghz must be positive, got {0}")]
    Clock(f64),
    #[error("index {index} out of range for {knob}")]
    Index { knob: HwKnob, index: usize },
}

/// The seven searchable knobs, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HwKnob {
    PesInXDimension,
    PesInYDimension,
    SimdUnits,
    ComputeLanes,
    LocalMemoryMb,
    RegisterFileKb,
    IoBandwidthGbps,
}

impl HwKnob {
    pub const ALL: [HwKnob; 7] = [
        HwKnob::PesInXDimension,
        HwKnob::PesInYDimension,
        HwKnob::SimdUnits,
        HwKnob::ComputeLanes,
        HwKnob::LocalMemoryMb,
        HwKnob::RegisterFileKb,
        HwKnob::IoBandwidthGbps,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HwKnob::PesInXDimension => "pes_in_x_dimension",
            HwKnob::PesInYDimension => "pes_in_y_dimension",
            HwKnob::SimdUnits => "simd_units",
            HwKnob::ComputeLanes => "compute_lanes",
            HwKnob::LocalMemoryMb => "local_memory_mb",
            HwKnob::RegisterFileKb => "register_file_kb",
            HwKnob::IoBandwidthGbps => "io_bandwidth_gbps",
        }
    }

    pub fn domain(self) -> Vec<f64> {
        match self {
            HwKnob::PesInXDimension | HwKnob::PesInYDimension => PE_DIM_DOMAIN.iter().map(|&v| v as f64).collect(),
            HwKnob::SimdUnits => SIMD_UNITS_DOMAIN.iter().map(|&v| v as f64).collect(),
            HwKnob::ComputeLanes => COMPUTE_LANES_DOMAIN.iter().map(|&v| v as f64).collect(),
            HwKnob::LocalMemoryMb => LOCAL_MEMORY_MB_DOMAIN.to_vec(),
            HwKnob::RegisterFileKb => REGISTER_FILE_KB_DOMAIN.iter().map(|&v| v as f64).collect(),
            HwKnob::IoBandwidthGbps => IO_BANDWIDTH_DOMAIN.to_vec(),
        }
    }

    pub fn domain_len(self) -> usize {
        match self {
            HwKnob::SimdUnits | HwKnob::ComputeLanes => 4,
            _ => 5,
        }
    }
}

impl fmt::Display for HwKnob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn default_clock() -> f64 {
    DEFAULT_CLOCK_GHZ
}

/// One point of the accelerator design space. `clock_ghz` is a fixed
/// parameter, not a searched knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AcceleratorConfig {
    #[serde(rename = "pes_in_x_dimension")]
    pub pe_x: u32,
    #[serde(rename = "pes_in_y_dimension")]
    pub pe_y: u32,
    pub simd_units: u32,
    pub compute_lanes: u32,
    pub local_memory_mb: f64,
    pub register_file_kb: u32,
    #[serde(rename = "io_bandwidth_gbps")]
    pub io_bandwidth: f64,
    #[serde(default = "default_clock")]
    pub clock_ghz: f64,
}

/// The production-tuned default: 4x4 PEs, 2 MB per PE, 4 lanes per PE,
/// 32 KB register file and 64 SIMD units per lane, 0.8 GHz.
pub fn baseline_config() -> AcceleratorConfig {
    AcceleratorConfig {
        pe_x: 4,
        pe_y: 4,
        simd_units: 64,
        compute_lanes: 4,
        local_memory_mb: 2.0,
        register_file_kb: 32,
        io_bandwidth: 20.0,
        clock_ghz: DEFAULT_CLOCK_GHZ,
    }
}

impl Default for AcceleratorConfig {
    fn default() -> Self {
        baseline_config()
    }
}

impl AcceleratorConfig {
    pub fn knob_value(&self, knob: HwKnob) -> f64 {
        match knob {
            HwKnob::PesInXDimension => self.pe_x as f64,
            HwKnob::PesInYDimension => self.pe_y as f64,
            HwKnob::SimdUnits => self.simd_units as f64,
            HwKnob::ComputeLanes => self.compute_lanes as f64,
            HwKnob::LocalMemoryMb => self.local_memory_mb,
            HwKnob::RegisterFileKb => self.register_file_kb as f64,
            HwKnob::IoBandwidthGbps => self.io_bandwidth,
        }
    }

    /// Per-knob domain indices; errors if any knob is off-domain.
    pub fn to_indices(&self) -> Result<[usize; 7], AccelError> {
        if !(self.clock_ghz > 0.0) {
            return Err(AccelError::Clock(self.clock_ghz));
        }
        let mut out = [0; 7];
        for (slot, knob) in out.iter_mut().zip(HwKnob::ALL) {
            let value = self.knob_value(knob);
            *slot = knob
                .domain()
                .iter()
                .position(|&d| d == value)
                .ok_or(AccelError::Domain { knob, value })?;
        }
        Ok(out)
    }

    pub fn from_indices(idx: &[usize; 7], clock_ghz: f64) -> Result<Self, AccelError> {
        for (knob, &i) in HwKnob::ALL.iter().zip(idx) {
            if i >= knob.domain_len() {
                return Err(AccelError::Index { knob: *knob, index: i });
            }
        }
        Ok(AcceleratorConfig {
            pe_x: PE_DIM_DOMAIN[idx[0]],
            pe_y: PE_DIM_DOMAIN[idx[1]],
            simd_units: SIMD_UNITS_DOMAIN[idx[2]],
            compute_lanes: COMPUTE_LANES_DOMAIN[idx[3]],
            local_memory_mb: LOCAL_MEMORY_MB_DOMAIN[idx[4]],
            register_file_kb: REGISTER_FILE_KB_DOMAIN[idx[5]],
            io_bandwidth: IO_BANDWIDTH_DOMAIN[idx[6]],
            clock_ghz,
        })
    }

    pub fn check_domain(&self) -> Result<(), AccelError> {
        self.to_indices().map(|_| ())
    }

    pub fn pe_count(&self) -> u32 {
        self.pe_x * self.pe_y
    }

    pub fn total_local_memory_bytes(&self) -> f64 {
        self.pe_count() as f64 * self.local_memory_mb * BYTES_PER_MB
    }

    pub fn register_file_bytes(&self) -> f64 {
        self.register_file_kb as f64 * BYTES_PER_KB
    }

    pub fn io_bytes_per_second(&self) -> f64 {
        self.io_bandwidth * BYTES_PER_GB
    }
}

/// Every point of the accelerator space, odometer order over table indices.
pub fn enumerate() -> impl Iterator<Item = AcceleratorConfig> {
    let sizes = HwKnob::ALL.map(HwKnob::domain_len);
    let total: usize = sizes.iter().product();
    (0..total).map(move |mut n| {
        let mut idx = [0usize; 7];
        for k in (0..7).rev() {
            idx[k] = n % sizes[k];
            n /= sizes[k];
        }
        AcceleratorConfig::from_indices(&idx, DEFAULT_CLOCK_GHZ).expect("indices in range")
    })
}

/// Peak 8-bit ops per second: PEs x lanes x SIMD units x SIMD width x 2 x clock.
pub fn peak_throughput(cfg: &AcceleratorConfig) -> f64 {
    cfg.pe_count() as f64
        * cfg.compute_lanes as f64
        * cfg.simd_units as f64
        * SIMD_WIDTH as f64
        * OPS_PER_MAC
        * cfg.clock_ghz
        * 1e9
}

/// Peak MACs per second.
pub fn peak_macs(cfg: &AcceleratorConfig) -> f64 {
    peak_throughput(cfg) / OPS_PER_MAC
}

/// Linear area coefficients, in normalized area units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaModelParams {
    /// Per MB of PE local memory.
    pub c_mem: f64,
    /// Per KB of lane register file.
    pub c_rf: f64,
    /// Per SIMD unit.
    pub c_simd: f64,
    /// Fixed cost of a lane.
    pub c_lane_fixed: f64,
    /// Per GB/s of off-chip bandwidth.
    pub c_io: f64,
    pub c_fixed: f64,
}

impl AreaModelParams {
    /// Relative coefficients before normalization.
    pub const fn unnormalized() -> Self {
        AreaModelParams { c_mem: 0.035, c_rf: 0.0002, c_simd: 0.00015, c_lane_fixed: 0.001, c_io: 0.002, c_fixed: 0.05 }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        AreaModelParams {
            c_mem: self.c_mem * factor,
            c_rf: self.c_rf * factor,
            c_simd: self.c_simd * factor,
            c_lane_fixed: self.c_lane_fixed * factor,
            c_io: self.c_io * factor,
            c_fixed: self.c_fixed * factor,
        }
    }

    /// Rescales all coefficients so that `anchor` has area 1.0.
    pub fn normalized_to(&self, anchor: &AcceleratorConfig) -> Self {
        self.scaled(1.0 / chip_area(anchor, self))
    }

    pub fn is_valid(&self) -> bool {
        [self.c_mem, self.c_rf, self.c_simd, self.c_lane_fixed, self.c_io, self.c_fixed]
            .iter()
            .all(|c| *c >= 0.0 && c.is_finite())
    }
}

impl Default for AreaModelParams {
    fn default() -> Self {
        Self::unnormalized().normalized_to(&baseline_config())
    }
}

pub fn chip_area(cfg: &AcceleratorConfig, p: &AreaModelParams) -> f64 {
    let lane = p.c_rf * cfg.register_file_kb as f64 + p.c_simd * cfg.simd_units as f64 + p.c_lane_fixed;
    let pe = p.c_mem * cfg.local_memory_mb + cfg.compute_lanes as f64 * lane;
    cfg.pe_count() as f64 * pe + p.c_io * cfg.io_bandwidth + p.c_fixed
}

/// A mapping failure for an (architecture, accelerator) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum InvalidReason {
    /// A layer's 8-bit weights do not fit in the pooled local memory.
    WeightsExceedLocalMemory { layer: String, bytes: f64, capacity: f64 },
    /// A lane's working set for some layer overflows the register file.
    WorkingSetExceedsRegisterFile { layer: String, bytes: f64, capacity: f64 },
    /// A layer ended up with no output channels.
    EmptyLayer { layer: String },
    /// The configuration is not a point of the search space.
    OutOfDomain { knob: String, value: f64 },
    /// The cost model could not price the pair.
    Evaluator { message: String },
}

impl fmt::Display for InvalidReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvalidReason::WeightsExceedLocalMemory { layer, bytes, capacity } => {
                write!(f, "{layer}: weights {bytes} B exceed local memory {capacity} B")
            }
            InvalidReason::WorkingSetExceedsRegisterFile { layer, bytes, capacity } => {
                write!(f, "{layer}: lane working set {bytes} B exceeds register file {capacity} B")
            }
            InvalidReason::EmptyLayer { layer } => write!(f, "{layer}: no output channels"),
            InvalidReason::OutOfDomain { knob, value } => write!(f, "{knob} = {value} is outside the search space"),
            InvalidReason::Evaluator { message } => write!(f, "cost model: {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Validity {
    Valid,
    Invalid(Vec<InvalidReason>),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }

    pub fn reasons(&self) -> &[InvalidReason] {
        match self {
            Validity::Valid => &[],
            Validity::Invalid(r) => r,
        }
    }
}

fn worst(prims: &[Primitive], f: impl Fn(&Primitive) -> f64) -> Option<(&Primitive, f64)> {
    prims.iter().map(|p| (p, f(p))).fold(None, |best, (p, v)| match best {
        Some((_, bv)) if bv >= v => best,
        _ => Some((p, v)),
    })
}

/// Checks whether `arch` can be mapped onto `cfg`. Each violated rule is
/// reported once, naming the worst offending layer.
pub fn validate(cfg: &AcceleratorConfig, arch: &ArchitectureSpec) -> Result<Validity, AccelError> {
    cfg.check_domain()?;
    let prims = arch.primitives();
    let mut reasons = Vec::new();

    let capacity = cfg.total_local_memory_bytes();
    if let Some((p, bytes)) = worst(&prims, |p| p.weight_bytes() as f64) {
        if bytes > capacity {
            reasons.push(InvalidReason::WeightsExceedLocalMemory { layer: p.name.clone(), bytes, capacity });
        }
    }

    let rf = cfg.register_file_bytes();
    if let Some((p, bytes)) = worst(&prims, |p| lane_working_set_bytes(p, cfg)) {
        if bytes > rf {
            reasons.push(InvalidReason::WorkingSetExceedsRegisterFile { layer: p.name.clone(), bytes, capacity: rf });
        }
    }

    if let Some(p) = prims.iter().find(|p| p.output.c == 0) {
        reasons.push(InvalidReason::EmptyLayer { layer: p.name.clone() });
    }

    Ok(if reasons.is_empty() { Validity::Valid } else { Validity::Invalid(reasons) })
}
