//! Hearing-loss simulation with an active/passive loss split, two synthesis
//! back-ends (filterbank analysis/synthesis and a direct time-varying
//! minimum-phase filter), stimulus preparation, and the paired-comparison
//! scoring pipeline.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, with `*32` variants for `f32`.

// Published polynomial coefficients are kept digit for digit; `!(x > 0)`
// style checks are there to reject NaN.
#![allow(clippy::excessive_precision, clippy::inconsistent_digit_grouping, clippy::neg_cmp_op_on_partial_ord)]

pub mod audiogram;
pub mod dsp;
pub mod error;
pub mod experiment;
pub mod filterbank;
pub mod interp;
pub mod scalar;
pub mod simulator;
pub mod stimuli;
pub mod synthesis;
pub mod wav;

pub use audiogram::{
    decompose_hl, interpolate_hl, reduction_active, reduction_total, ActiveGainCalibration, AudiogramProfile,
    CompressionHealth, HLDecomposition, LevelReference,
};
pub use error::{HlsError, Result};
pub use filterbank::{design_filterbank, estimate_levels, ChannelSignals, Filterbank, FilterbankSpec, LevelFrames};
pub use scalar::Real;
pub use simulator::{Method, Simulation, Simulator, SimulatorConfig};
pub use synthesis::{
    compute_gain_trajectory, design_minphase_fir, synth_dtvf, synth_fbas, GainTrajectory, MinPhaseFilter, OlaParams,
    SynthesisSettings,
};

pub type Profile = AudiogramProfile<f64>;
pub type Alpha = CompressionHealth<f64>;
pub type Calibration = ActiveGainCalibration<f64>;
pub type Decomposition = HLDecomposition<f64>;
pub type Bank = Filterbank<f64>;
pub type Levels = LevelFrames<f64>;
pub type Trajectory = GainTrajectory<f64>;
pub type MinPhase = MinPhaseFilter<f64>;
pub type Config = SimulatorConfig<f64>;
pub type Sim = Simulator<f64>;
pub type Report = experiment::ScoreReport<f64>;

pub type Profile32 = AudiogramProfile<f32>;
pub type Config32 = SimulatorConfig<f32>;
pub type Sim32 = Simulator<f32>;
pub type Bank32 = Filterbank<f32>;
