//! Direct time-varying filtering: one minimum-phase filter per frame,
//! applied to the Hann-windowed frame and overlap-added.

use rustfft::FftPlanner;

use crate::dsp::{convolve_direct, convolve_fft, hann_periodic};
use crate::error::{HlsError, Result};
use crate::filterbank::FrameGrid;
use crate::scalar::Real;

use super::minphase::design_with_planner;
use super::{check_trajectory, GainTrajectory, OlaParams};

/// Output has the input's length; the final `fir_len - 1` tail samples of
/// the full convolution are discarded and no latency compensation is done.
pub fn synth_dtvf<T: Real>(
    signal: &[T],
    trajectory: &GainTrajectory<T>,
    ola: &OlaParams<T>,
    sample_rate: u32,
) -> Result<Vec<T>> {
    let (hop, len) = ola.samples(sample_rate)?;
    if trajectory.sample_rate != sample_rate {
        return Err(HlsError::SampleRateMismatch {
            expected: sample_rate,
            actual: trajectory.sample_rate,
        });
    }
    let n = signal.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let grid = FrameGrid::new(n, hop, len);
    if trajectory.n_frames() != 1 && trajectory.hop_samples != hop {
        return Err(HlsError::GridMismatch(format!(
            "trajectory hop {} samples differs from synthesis hop {hop}",
            trajectory.hop_samples
        )));
    }
    check_trajectory(trajectory, grid.n_frames)?;

    let window: Vec<T> = hann_periodic(len);
    let mut planner = FftPlanner::new();
    let mut out = vec![T::zero(); n + len + ola.fir_len];
    let mut cached: Option<(Vec<T>, Vec<T>)> = None;
    let mut segment = vec![T::zero(); len];

    for t in 0..grid.n_frames {
        let start = grid.start(t);
        let mut any = false;
        for (i, (s, &w)) in segment.iter_mut().zip(&window).enumerate() {
            let idx = start + i as isize;
            *s = if idx >= 0 && (idx as usize) < n {
                w * signal[idx as usize]
            } else {
                T::zero()
            };
            any |= *s != T::zero();
        }
        if !any {
            continue;
        }
        let column = trajectory.column(t);
        let taps = match &cached {
            Some((col, taps)) if *col == column => taps.clone(),
            _ => {
                let target = trajectory.target(t);
                let filt = design_with_planner(&target, ola.fir_len, ola.fft_size, sample_rate, &mut planner)?;
                cached = Some((column, filt.taps.clone()));
                filt.taps
            }
        };
        let y = convolve_direct(&segment, &taps);
        for (i, v) in y.into_iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 {
                let o = &mut out[idx as usize];
                *o = *o + v;
            }
        }
    }
    out.truncate(n);
    Ok(out)
}

/// One pass of a fixed FIR over the whole signal, truncated to its length.
pub fn apply_static_filter<T: Real>(signal: &[T], taps: &[T]) -> Vec<T> {
    let mut y = convolve_fft(signal, taps);
    y.truncate(signal.len());
    y
}
