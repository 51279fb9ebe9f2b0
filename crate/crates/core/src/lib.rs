//! Joint search over neural architectures and edge-accelerator configurations.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every piece of the
//! co-design loop that is pure computation:
//!
//! - [`accel`]: the seven-knob accelerator, its area and peak-throughput models
//!   and the validity rules for an (architecture, accelerator) pair.
//! - [`nas`]: IBN / Fused-IBN search spaces, decision encoding, decoding into
//!   concrete networks, MAC and parameter counting.
//! - [`perf`]: analytical roofline latency and energy model.
//! - [`oracle`]: synthetic accuracy and the evaluation bundle.
//! - [`reward`]: weighted-product reward with hard and soft constraints.
//! - [`surrogate`]: MLP cost model predicting (area, latency).
//! - [`search`]: random, REINFORCE, PPO and phase-based controllers, brute
//!   force enumeration and Pareto analysis.
//!
//! File formats, threading and the command-line tool live in the `nahas`
//! companion crate.
#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod accel;
pub mod math;
pub mod nas;
pub mod optim;
pub mod oracle;
pub mod perf;
pub mod reward;
pub mod rng;
pub mod search;
pub mod surrogate;

pub use accel::{AcceleratorConfig, AreaModelParams, HwKnob, InvalidReason, Validity};
pub use nas::{ArchitectureSpec, DecisionVector, LayerSpec, OpType, SearchSpaceDef, SpaceName};
pub use oracle::{AccuracyOracle, CostModel, EvalResult, SimulatorCostModel, SyntheticOracle};
pub use perf::{EnergyModelParams, LayerCost, PerfParams};
pub use reward::{RewardMode, RewardSpec};
