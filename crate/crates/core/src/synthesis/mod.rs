//! Turning framewise levels and a hearing-loss split into an output signal.
//!
//! Both back-ends consume the same [`GainTrajectory`]: the total reduction
//! per channel and frame. [`dtvf`] designs one minimum-phase filter per frame
//! and overlap-adds the filtered, windowed frames; [`fbas`] weights each
//! analysis channel, removes its fixed lag and sums.

pub mod dtvf;
pub mod fbas;
pub mod minphase;

use serde::{Deserialize, Serialize};

use crate::audiogram::{reduction_total, ActiveGainCalibration, HLDecomposition, LevelReference};
use crate::error::{HlsError, Result};
use crate::filterbank::{seconds_to_samples, LevelFrames, DEFAULT_FRAME_HOP_S, DEFAULT_FRAME_LEN_S};
use crate::scalar::Real;

pub use dtvf::{apply_static_filter, synth_dtvf};
pub use fbas::synth_fbas;
pub use minphase::{design_minphase_fir, MinPhaseFilter};

pub const DEFAULT_FIR_LEN: usize = 128;
pub const DEFAULT_DESIGN_FFT: usize = 1024;

/// Total reduction (dB, applied as gain `-r_total`) per channel and frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GainTrajectory<T: Real> {
    pub center_frequencies: Vec<T>,
    pub frame_times: Vec<T>,
    /// `[channel][frame]`
    pub r_total: Vec<Vec<T>>,
    pub hop_samples: usize,
    pub sample_rate: u32,
}

impl<T: Real> GainTrajectory<T> {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }

    /// Column of reductions for frame `t`; a single-frame trajectory applies
    /// to every frame.
    pub fn column(&self, t: usize) -> Vec<T> {
        let t = if self.n_frames() == 1 { 0 } else { t };
        self.r_total.iter().map(|row| row[t]).collect()
    }

    /// `(fc, -r_total)` design targets for frame `t`.
    pub fn target(&self, t: usize) -> Vec<(T, T)> {
        self.center_frequencies
            .iter()
            .zip(self.column(t))
            .map(|(&f, r)| (f, -r))
            .collect()
    }

    /// A trajectory holding one reduction per channel for every frame.
    pub fn constant(center_frequencies: Vec<T>, r_total: Vec<T>, hop_samples: usize, sample_rate: u32) -> Self {
        Self {
            center_frequencies,
            frame_times: vec![T::zero()],
            r_total: r_total.into_iter().map(|r| vec![r]).collect(),
            hop_samples,
            sample_rate,
        }
    }
}

/// Applies the total-reduction rule to every channel and frame.
pub fn compute_gain_trajectory<T: Real>(
    levels: &LevelFrames<T>,
    decomp: &HLDecomposition<T>,
    cal: &ActiveGainCalibration<T>,
) -> Result<GainTrajectory<T>> {
    compute_gain_trajectory_with(levels, decomp, cal, &LevelReference::identity())
}

pub fn compute_gain_trajectory_with<T: Real>(
    levels: &LevelFrames<T>,
    decomp: &HLDecomposition<T>,
    cal: &ActiveGainCalibration<T>,
    reference: &LevelReference<T>,
) -> Result<GainTrajectory<T>> {
    if levels.levels.len() != levels.center_frequencies.len() {
        return Err(HlsError::GridMismatch(format!(
            "{} level rows for {} channels",
            levels.levels.len(),
            levels.center_frequencies.len()
        )));
    }
    if levels.levels.iter().any(|row| row.len() != levels.frame_times.len()) {
        return Err(HlsError::GridMismatch("level rows disagree with frame count".into()));
    }
    let r_total = levels
        .center_frequencies
        .iter()
        .zip(&levels.levels)
        .map(|(&fc, row)| {
            row.iter()
                .map(|&spl| reduction_total(decomp, cal, fc, reference.spl_to_hl(fc, spl)))
                .collect()
        })
        .collect();
    Ok(GainTrajectory {
        center_frequencies: levels.center_frequencies.clone(),
        frame_times: levels.frame_times.clone(),
        r_total,
        hop_samples: levels.hop_samples,
        sample_rate: levels.sample_rate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

/// Overlap-add framing for the direct time-varying filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OlaParams<T: Real> {
    pub frame_hop: T,
    pub frame_len: T,
    #[serde(default)]
    pub window: Window,
    pub fir_len: usize,
    pub fft_size: usize,
}

impl<T: Real> Default for OlaParams<T> {
    fn default() -> Self {
        Self {
            frame_hop: T::lit(DEFAULT_FRAME_HOP_S),
            frame_len: T::lit(DEFAULT_FRAME_LEN_S),
            window: Window::Hann,
            fir_len: DEFAULT_FIR_LEN,
            fft_size: DEFAULT_DESIGN_FFT,
        }
    }
}

impl<T: Real> OlaParams<T> {
    pub fn with_hop(hop_s: T) -> Self {
        Self {
            frame_hop: hop_s,
            frame_len: hop_s + hop_s,
            ..Self::default()
        }
    }

    /// `(hop, len)` in samples after validation.
    pub fn samples(&self, sample_rate: u32) -> Result<(usize, usize)> {
        let hop = seconds_to_samples(self.frame_hop, sample_rate);
        let len = seconds_to_samples(self.frame_len, sample_rate);
        if hop == 0 {
            return Err(HlsError::Config("frame hop rounds to zero samples".into()));
        }
        if len != 2 * hop {
            return Err(HlsError::Config(format!(
                "frame length must be twice the hop for constant overlap-add (hop {hop}, len {len} samples)"
            )));
        }
        if self.fir_len == 0 || self.fir_len > self.fft_size {
            return Err(HlsError::Config(format!(
                "fir_len {} must be in 1..=fft_size {}",
                self.fir_len, self.fft_size
            )));
        }
        if !self.fft_size.is_power_of_two() {
            return Err(HlsError::Config("design FFT size must be a power of two".into()));
        }
        Ok((hop, len))
    }
}

/// The synthesis-settings JSON block exposed on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthesisSettings {
    pub fir_len: usize,
    pub fft_size: usize,
    pub hop_ms: f64,
    pub frame_len_ms: f64,
    pub window: Window,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            fir_len: DEFAULT_FIR_LEN,
            fft_size: DEFAULT_DESIGN_FFT,
            hop_ms: DEFAULT_FRAME_HOP_S * 1000.0,
            frame_len_ms: DEFAULT_FRAME_LEN_S * 1000.0,
            window: Window::Hann,
        }
    }
}

impl SynthesisSettings {
    pub fn ola<T: Real>(&self) -> OlaParams<T> {
        OlaParams {
            frame_hop: T::lit(self.hop_ms / 1000.0),
            frame_len: T::lit(self.frame_len_ms / 1000.0),
            window: self.window,
            fir_len: self.fir_len,
            fft_size: self.fft_size,
        }
    }
}

pub(crate) fn check_trajectory(trajectory: &GainTrajectory<impl Real>, expected_frames: usize) -> Result<()> {
    if trajectory.r_total.len() != trajectory.center_frequencies.len() {
        return Err(HlsError::GridMismatch("trajectory rows disagree with channel count".into()));
    }
    let n = trajectory.n_frames();
    if trajectory.r_total.iter().any(|row| row.len() != n) {
        return Err(HlsError::GridMismatch("trajectory rows disagree with frame count".into()));
    }
    if n != 1 && n != expected_frames {
        return Err(HlsError::GridMismatch(format!(
            "trajectory has {n} frames, signal grid needs {expected_frames}"
        )));
    }
    Ok(())
}
