//! Filterbank analysis/synthesis: per-channel time-varying gain, removal of
//! each channel's fixed envelope-peak lag, weighted summation.
//!
//! The lag is fixed per channel and does not follow any level dependence of
//! the analysis filters, so residual misalignment is part of the method.

use crate::error::{HlsError, Result};
use crate::filterbank::{ChannelSignals, Filterbank, FrameGrid};
use crate::scalar::{db_to_amplitude, Real};

use super::{check_trajectory, GainTrajectory};

pub fn synth_fbas<T: Real>(
    channels: &ChannelSignals<T>,
    trajectory: &GainTrajectory<T>,
    bank: &Filterbank<T>,
) -> Result<Vec<T>> {
    let k = bank.n_channels();
    if channels.signals.len() != k || channels.center_frequencies != bank.center_frequencies() {
        return Err(HlsError::GridMismatch("channel signals do not come from this filterbank".into()));
    }
    if trajectory.center_frequencies != bank.center_frequencies() {
        return Err(HlsError::GridMismatch("trajectory channels do not match the filterbank".into()));
    }
    if channels.sample_rate != bank.sample_rate() {
        return Err(HlsError::SampleRateMismatch {
            expected: bank.sample_rate(),
            actual: channels.sample_rate,
        });
    }
    let n = channels.len();
    let hop = trajectory.hop_samples.max(1);
    if n == 0 {
        return Ok(Vec::new());
    }
    let expected = FrameGrid::new(n, hop, 2 * hop).n_frames;
    check_trajectory(trajectory, expected)?;

    let mut out = vec![T::zero(); n];
    let mut gain = vec![T::zero(); n];
    for ((signal, &lag), (row, &weight)) in channels
        .signals
        .iter()
        .zip(bank.envelope_peaks())
        .zip(trajectory.r_total.iter().zip(bank.synthesis_weights()))
    {
        if lag >= n {
            continue;
        }
        channel_gain(row, hop, &mut gain);
        for (o, (&x, &g)) in out.iter_mut().zip(signal[lag..].iter().zip(&gain[lag..])) {
            *o = *o + weight * g * x;
        }
    }
    Ok(out)
}

/// Samplewise linear gain, interpolated linearly in dB between frame centres
/// (frame `t` centred at `t * hop`) and held after the last centre.
fn channel_gain<T: Real>(row: &[T], hop: usize, gain: &mut [T]) {
    if row.iter().all(|&r| r == row[0]) {
        let g = db_to_amplitude(-row[0]);
        gain.iter_mut().for_each(|v| *v = g);
        return;
    }
    let hop_t = T::from_usize_lossy(hop);
    let last = row.len() - 1;
    for (m, v) in gain.iter_mut().enumerate() {
        let t0 = m / hop;
        let r = if t0 >= last {
            row[last]
        } else {
            let frac = T::from_usize_lossy(m - t0 * hop) / hop_t;
            row[t0] + frac * (row[t0 + 1] - row[t0])
        };
        *v = db_to_amplitude(-r);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gain_interpolates_in_db() {
        let mut g = vec![0.0f64; 5];
        channel_gain(&[0.0, 20.0, 20.0], 4, &mut g);
        assert!((g[0] - 1.0).abs() < 1e-12);
        assert!((g[2] - 10f64.powf(-0.5)).abs() < 1e-12);
        assert!((g[4] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn gain_holds_after_last_frame() {
        let mut g = vec![0.0f64; 10];
        channel_gain(&[0.0, 6.0], 2, &mut g);
        assert!(g[2..].iter().all(|&v| (v - db_to_amplitude(-6.0)).abs() < 1e-12));
    }
}
