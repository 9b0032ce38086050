//! Minimum-phase FIR design from a magnitude target by real-cepstrum folding.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{HlsError, Result};
use crate::interp::{interp_log_freq, strictly_increasing};
use crate::scalar::Real;

const TAPER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MinPhaseFilter<T: Real> {
    pub taps: Vec<T>,
    /// `(frequency Hz, gain dB)` pairs the filter was designed from.
    pub design_grid: Vec<(T, T)>,
}

/// Designs a `fir_len`-tap minimum-phase FIR whose magnitude follows
/// `target` (gain in dB at increasing frequencies).
///
/// The desired magnitude is interpolated linearly in dB over log frequency
/// onto the `fft_size` bins (edge-held; DC and Nyquist take the nearest
/// target values). The causal cepstrum of its log magnitude gives the
/// minimum-phase spectrum, whose impulse response is truncated to `fir_len`
/// with a short raised-cosine fade over the last taps.
pub fn design_minphase_fir<T: Real>(
    target: &[(T, T)],
    fir_len: usize,
    fft_size: usize,
    sample_rate: u32,
) -> Result<MinPhaseFilter<T>> {
    let mut planner = FftPlanner::new();
    design_with_planner(target, fir_len, fft_size, sample_rate, &mut planner)
}

pub(crate) fn design_with_planner<T: Real>(
    target: &[(T, T)],
    fir_len: usize,
    fft_size: usize,
    sample_rate: u32,
    planner: &mut FftPlanner<T>,
) -> Result<MinPhaseFilter<T>> {
    if target.is_empty() {
        return Err(HlsError::InvalidInput("empty magnitude target".into()));
    }
    if fir_len == 0 || fir_len > fft_size {
        return Err(HlsError::Config(format!("fir_len {fir_len} must be in 1..=fft_size {fft_size}")));
    }
    if !fft_size.is_power_of_two() || fft_size < 4 {
        return Err(HlsError::Config("design FFT size must be a power of two >= 4".into()));
    }
    let fs = T::from_u32(sample_rate).unwrap();
    let nyquist = fs / T::lit(2.0);
    let (freqs, gains): (Vec<T>, Vec<T>) = target.iter().copied().unzip();
    if !strictly_increasing(&freqs) || !(freqs[0] > T::zero()) || !(freqs[freqs.len() - 1] < nyquist) {
        return Err(HlsError::InvalidInput(
            "target frequencies must be strictly increasing within (0, Nyquist)".into(),
        ));
    }
    if gains.iter().any(|g| !g.is_finite()) {
        return Err(HlsError::InvalidInput("target gains must be finite".into()));
    }

    let n = fft_size;
    let half = n / 2;
    let ln10_over_20 = T::LN_10() / T::lit(20.0);
    let zero = Complex::new(T::zero(), T::zero());
    let mut buf = vec![zero; n];
    for k in 0..=half {
        let db = if k == 0 {
            gains[0]
        } else if k == half {
            gains[gains.len() - 1]
        } else {
            let f = T::from_usize_lossy(k) * fs / T::from_usize_lossy(n);
            interp_log_freq(&freqs, &gains, f)
        };
        let log_mag = Complex::new(db * ln10_over_20, T::zero());
        buf[k] = log_mag;
        if k != 0 && k != half {
            buf[n - k] = log_mag;
        }
    }

    let inverse = planner.plan_fft_inverse(n);
    let forward = planner.plan_fft_forward(n);
    let scale = T::one() / T::from_usize_lossy(n);

    // real cepstrum
    inverse.process(&mut buf);
    // fold onto the causal part
    let two = T::lit(2.0);
    for (i, c) in buf.iter_mut().enumerate() {
        let re = c.re * scale;
        *c = match i {
            0 => Complex::new(re, T::zero()),
            i if i < half => Complex::new(two * re, T::zero()),
            i if i == half => Complex::new(re, T::zero()),
            _ => zero,
        };
    }
    forward.process(&mut buf);
    for c in buf.iter_mut() {
        *c = c.exp();
    }
    inverse.process(&mut buf);
    let mut taps: Vec<T> = buf[..fir_len].iter().map(|c| c.re * scale).collect();
    if fir_len < n {
        // raised-cosine fade-out so the truncation does not ripple the stopband
        let m = (fir_len / 8).min(TAPER_LEN);
        for i in 0..m {
            let x = T::PI() * T::from_usize_lossy(i + 1) / T::from_usize_lossy(m);
            let t = &mut taps[fir_len - m + i];
            *t = *t * T::lit(0.5) * (T::one() + x.cos());
        }
    }
    Ok(MinPhaseFilter {
        taps,
        design_grid: target.to_vec(),
    })
}
