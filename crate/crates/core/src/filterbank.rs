//! ERB-spaced gammatone analysis filterbank and framewise level estimation.
//!
//! Each channel is a linear FIR gammatone whose carrier phase is chosen so
//! the carrier peaks at the integer sample of the envelope peak. Advancing a
//! channel by that sample count therefore aligns both envelope and carrier,
//! which is what the filterbank resynthesis path relies on. Channels are
//! normalized to unit gain at their centre frequency.

use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::{dtft, hann_periodic, BlockConvolver};
use crate::error::{HlsError, Result};
use crate::scalar::{amplitude_to_db, Real};

pub const DEFAULT_LEVEL_FLOOR_DB: f64 = -20.0;
/// Digital RMS 1.0 corresponds to this many dB SPL.
pub const DEFAULT_CALIBRATION_DB: f64 = 30.0;
pub const DEFAULT_FRAME_HOP_S: f64 = 0.001;
pub const DEFAULT_FRAME_LEN_S: f64 = 0.002;

/// Envelope level (relative to its peak) at which impulse responses are cut.
const IR_TAIL_RELATIVE: f64 = 1e-6;
const SYNTHESIS_WEIGHT_ITERATIONS: usize = 60;

/// Equivalent rectangular bandwidth in Hz.
pub fn erb_bandwidth<T: Real>(fc: T) -> T {
    T::lit(24.7) * (T::lit(4.37) * fc / T::lit(1000.0) + T::one())
}

/// ERB-number (Cams) of a frequency in Hz.
pub fn erb_number<T: Real>(f: T) -> T {
    T::lit(21.4) * (T::lit(4.37) * f / T::lit(1000.0) + T::one()).log10()
}

pub fn erb_number_to_hz<T: Real>(e: T) -> T {
    (T::lit(10.0).powf(e / T::lit(21.4)) - T::one()) * T::lit(1000.0) / T::lit(4.37)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FilterbankSpec<T: Real> {
    pub n_channels: usize,
    pub f_lo: T,
    pub f_hi: T,
    pub filter_order: u32,
    pub sample_rate: u32,
}

impl<T: Real> Default for FilterbankSpec<T> {
    fn default() -> Self {
        Self {
            n_channels: 100,
            f_lo: T::lit(100.0),
            f_hi: T::lit(8000.0),
            filter_order: 4,
            sample_rate: 48000,
        }
    }
}

impl<T: Real> FilterbankSpec<T> {
    pub fn with_sample_rate(sample_rate: u32) -> Self {
        Self {
            sample_rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nyquist = T::from_u32(self.sample_rate).unwrap_or_else(T::zero) / T::lit(2.0);
        if self.n_channels < 2 {
            return Err(HlsError::Config("filterbank needs at least 2 channels".into()));
        }
        if !(self.f_lo > T::zero() && self.f_lo < self.f_hi && self.f_hi < nyquist) {
            return Err(HlsError::Config(format!(
                "filterbank range must satisfy 0 < f_lo < f_hi < fs/2 (got {} .. {} at {} Hz)",
                self.f_lo, self.f_hi, self.sample_rate
            )));
        }
        if self.filter_order == 0 || self.filter_order > 12 {
            return Err(HlsError::Config("gammatone order must be in 1..=12".into()));
        }
        Ok(())
    }

    /// Centre frequencies uniformly spaced on the ERB-number scale, with the
    /// endpoints pinned to exactly `f_lo` and `f_hi`.
    pub fn center_frequencies(&self) -> Vec<T> {
        let (e_lo, e_hi) = (erb_number(self.f_lo), erb_number(self.f_hi));
        let last = self.n_channels - 1;
        (0..self.n_channels)
            .map(|k| {
                if k == 0 {
                    self.f_lo
                } else if k == last {
                    self.f_hi
                } else {
                    let w = T::from_usize_lossy(k) / T::from_usize_lossy(last);
                    erb_number_to_hz(e_lo + w * (e_hi - e_lo))
                }
            })
            .collect()
    }
}

/// Bandwidth scale so that an order-`n` gammatone has the requested ERB.
fn gammatone_bandwidth_factor(order: u32) -> f64 {
    let n = order as i32;
    let fact = |k: i32| (1..=k).map(f64::from).product::<f64>();
    std::f64::consts::PI * fact(2 * n - 2) * 2f64.powi(-(2 * n - 2)) / fact(n - 1).powi(2)
}

/// One sampled gammatone impulse response plus its envelope peak sample.
fn gammatone_kernel<T: Real>(fc: T, order: u32, sample_rate: u32) -> (Vec<T>, usize) {
    let fs = T::from_u32(sample_rate).expect("sample rate");
    let b = erb_bandwidth(fc) / T::lit(gammatone_bandwidth_factor(order));
    let decay = T::TAU() * b;
    let power = order as i32 - 1;
    let envelope = |m: usize| {
        let t = T::from_usize_lossy(m) / fs;
        t.powi(power) * (-decay * t).exp()
    };
    let peak_t = T::from_i32(power).unwrap() / decay;
    let guess = (peak_t * fs).floor().to_usize().unwrap_or(0);
    let peak = if envelope(guess + 1) > envelope(guess) {
        guess + 1
    } else {
        guess
    };
    let peak_value = envelope(peak).max(T::min_positive_value());
    let tail = T::lit(IR_TAIL_RELATIVE) * peak_value;
    let mut len = peak + 1;
    while envelope(len) >= tail || len < 8 {
        len += 1;
    }
    let omega = T::TAU() * fc / fs;
    let mut h: Vec<T> = (0..len)
        .map(|m| {
            let phase = omega * (T::from_usize_lossy(m) - T::from_usize_lossy(peak));
            // order 1 has its envelope maximum at t = 0
            let env = if power == 0 && m == 0 { T::one() } else { envelope(m) };
            env * phase.cos()
        })
        .collect();
    let gain = dtft(&h, fc, fs).norm();
    for x in &mut h {
        *x = *x / gain;
    }
    (h, peak)
}

/// A designed analysis filterbank.
pub struct Filterbank<T: Real> {
    spec: FilterbankSpec<T>,
    center_frequencies: Vec<T>,
    envelope_peaks: Vec<usize>,
    synthesis_weights: Vec<T>,
    convolver: BlockConvolver<T>,
}

impl<T: Real> std::fmt::Debug for Filterbank<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Filterbank")
            .field("spec", &self.spec)
            .field("n_channels", &self.center_frequencies.len())
            .finish()
    }
}

/// Designs the gammatone bank described by `spec`.
pub fn design_filterbank<T: Real>(spec: &FilterbankSpec<T>) -> Result<Filterbank<T>> {
    spec.validate()?;
    let center_frequencies = spec.center_frequencies();
    let (kernels, envelope_peaks): (Vec<_>, Vec<_>) = center_frequencies
        .iter()
        .map(|&fc| gammatone_kernel(fc, spec.filter_order, spec.sample_rate))
        .unzip();
    let synthesis_weights = synthesis_weights(&kernels, &envelope_peaks, &center_frequencies, spec.sample_rate);
    Ok(Filterbank {
        spec: spec.clone(),
        center_frequencies,
        envelope_peaks,
        synthesis_weights,
        convolver: BlockConvolver::new(kernels),
    })
}

/// Per-channel weights that make the delay-aligned channel sum flat at every
/// centre frequency (multiplicative fixed-point iteration on the composite
/// response).
fn synthesis_weights<T: Real>(kernels: &[Vec<T>], peaks: &[usize], centers: &[T], sample_rate: u32) -> Vec<T> {
    let max_len = kernels.iter().map(Vec::len).max().unwrap_or(1);
    let n_fft = (2 * max_len).next_power_of_two().max(8192);
    let fs = T::from_u32(sample_rate).unwrap();
    let bins: Vec<usize> = centers
        .iter()
        .map(|&fc| (fc / fs * T::from_usize_lossy(n_fft)).round().to_usize().unwrap())
        .collect();
    let fft = FftPlanner::<T>::new().plan_fft_forward(n_fft);
    // aligned[k][c]: response of channel k at the bin of centre c, advanced by its delay
    let aligned: Vec<Vec<Complex<T>>> = kernels
        .iter()
        .zip(peaks)
        .map(|(h, &d)| {
            let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
            for (b, &x) in buf.iter_mut().zip(h) {
                b.re = x;
            }
            fft.process(&mut buf);
            bins.iter()
                .map(|&bin| {
                    let phase = T::TAU() * T::from_usize_lossy(bin * d % n_fft) / T::from_usize_lossy(n_fft);
                    buf[bin] * Complex::new(phase.cos(), phase.sin())
                })
                .collect()
        })
        .collect();
    let mut weights = vec![T::one(); kernels.len()];
    for _ in 0..SYNTHESIS_WEIGHT_ITERATIONS {
        let composite: Vec<T> = (0..centers.len())
            .map(|c| {
                aligned
                    .iter()
                    .zip(&weights)
                    .fold(Complex::new(T::zero(), T::zero()), |acc, (resp, &w)| acc + resp[c] * w)
                    .norm()
            })
            .collect();
        for (w, &mag) in weights.iter_mut().zip(&composite) {
            *w = *w / mag.sqrt();
        }
    }
    weights
}

impl<T: Real> Filterbank<T> {
    pub fn spec(&self) -> &FilterbankSpec<T> {
        &self.spec
    }

    pub fn sample_rate(&self) -> u32 {
        self.spec.sample_rate
    }

    pub fn center_frequencies(&self) -> &[T] {
        &self.center_frequencies
    }

    pub fn n_channels(&self) -> usize {
        self.center_frequencies.len()
    }

    pub fn impulse_responses(&self) -> &[Vec<T>] {
        self.convolver.kernels()
    }

    /// Sample index of each channel's impulse-response envelope peak; the
    /// fixed lag removed before summation.
    pub fn envelope_peaks(&self) -> &[usize] {
        &self.envelope_peaks
    }

    pub fn synthesis_weights(&self) -> &[T] {
        &self.synthesis_weights
    }

    /// Complex response of channel `k` at frequency `f`.
    pub fn channel_response(&self, k: usize, f: T) -> Complex<T> {
        let fs = T::from_u32(self.spec.sample_rate).unwrap();
        dtft(&self.convolver.kernels()[k], f, fs)
    }

    /// Filters `signal` through every channel.
    pub fn analyze(&self, signal: &[T], sample_rate: u32) -> Result<ChannelSignals<T>> {
        if sample_rate != self.spec.sample_rate {
            return Err(HlsError::SampleRateMismatch {
                expected: self.spec.sample_rate,
                actual: sample_rate,
            });
        }
        Ok(ChannelSignals {
            center_frequencies: self.center_frequencies.clone(),
            signals: self.convolver.convolve_truncated(signal),
            sample_rate,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSignals<T: Real> {
    pub center_frequencies: Vec<T>,
    pub signals: Vec<Vec<T>>,
    pub sample_rate: u32,
}

impl<T: Real> ChannelSignals<T> {
    pub fn len(&self) -> usize {
        self.signals.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Frame layout shared by level estimation and overlap-add synthesis.
/// Frame `t` is centred on sample `t * hop` and spans `len` samples starting
/// at `t * hop - len / 2`; samples outside the signal count as zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameGrid {
    pub hop: usize,
    pub len: usize,
    pub n_frames: usize,
}

impl FrameGrid {
    pub fn new(n_samples: usize, hop: usize, len: usize) -> Self {
        let n_frames = if n_samples == 0 { 1 } else { (n_samples - 1) / hop + 2 };
        Self { hop, len, n_frames }
    }

    /// First sample (possibly negative) of frame `t`.
    pub fn start(&self, t: usize) -> isize {
        (t * self.hop) as isize - (self.len / 2) as isize
    }
}

pub(crate) fn seconds_to_samples<T: Real>(seconds: T, sample_rate: u32) -> usize {
    (seconds * T::from_u32(sample_rate).unwrap()).round().to_usize().unwrap_or(0)
}

/// Framewise channel levels in calibrated dB SPL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LevelFrames<T: Real> {
    pub center_frequencies: Vec<T>,
    pub frame_times: Vec<T>,
    /// `[channel][frame]`
    pub levels: Vec<Vec<T>>,
    pub floor: T,
    pub hop_samples: usize,
    pub sample_rate: u32,
}

impl<T: Real> LevelFrames<T> {
    pub fn n_frames(&self) -> usize {
        self.frame_times.len()
    }
}

/// Hann-weighted RMS level per channel and frame:
/// `20 log10(rms) + calibration_db`, floored at [`DEFAULT_LEVEL_FLOOR_DB`].
pub fn estimate_levels<T: Real>(
    channels: &ChannelSignals<T>,
    frame_hop: T,
    frame_len: T,
    calibration_db: T,
) -> Result<LevelFrames<T>> {
    estimate_levels_with_floor(channels, frame_hop, frame_len, calibration_db, T::lit(DEFAULT_LEVEL_FLOOR_DB))
}

pub fn estimate_levels_with_floor<T: Real>(
    channels: &ChannelSignals<T>,
    frame_hop: T,
    frame_len: T,
    calibration_db: T,
    floor: T,
) -> Result<LevelFrames<T>> {
    if !(frame_hop > T::zero()) || frame_len < frame_hop {
        return Err(HlsError::Config(format!(
            "frame length ({frame_len} s) must be >= hop ({frame_hop} s) > 0"
        )));
    }
    let fs = channels.sample_rate;
    let hop = seconds_to_samples(frame_hop, fs).max(1);
    let len = seconds_to_samples(frame_len, fs).max(hop);
    let n = channels.len();
    let to_level = |ms: T| {
        if ms > T::zero() {
            (amplitude_to_db(ms.sqrt()) + calibration_db).max(floor)
        } else {
            floor
        }
    };
    if len > n {
        // whole signal as one frame
        let levels = channels
            .signals
            .iter()
            .map(|s| vec![to_level(crate::dsp::mean_square(s))])
            .collect();
        let mid = T::from_usize_lossy(n) / T::lit(2.0) / T::from_u32(fs).unwrap();
        return Ok(LevelFrames {
            center_frequencies: channels.center_frequencies.clone(),
            frame_times: vec![mid],
            levels,
            floor,
            hop_samples: hop,
            sample_rate: fs,
        });
    }
    let grid = FrameGrid::new(n, hop, len);
    let window: Vec<T> = hann_periodic(len);
    let wsum = window.iter().fold(T::zero(), |a, &w| a + w);
    let levels = channels
        .signals
        .iter()
        .map(|s| {
            (0..grid.n_frames)
                .map(|t| {
                    let start = grid.start(t);
                    let mut acc = T::zero();
                    for (i, &w) in window.iter().enumerate() {
                        let idx = start + i as isize;
                        if idx >= 0 && (idx as usize) < n {
                            let x = s[idx as usize];
                            acc = acc + w * x * x;
                        }
                    }
                    to_level(acc / wsum)
                })
                .collect()
        })
        .collect();
    let fs_t = T::from_u32(fs).unwrap();
    let frame_times = (0..grid.n_frames)
        .map(|t| T::from_usize_lossy(t * hop) / fs_t)
        .collect();
    Ok(LevelFrames {
        center_frequencies: channels.center_frequencies.clone(),
        frame_times,
        levels,
        floor,
        hop_samples: hop,
        sample_rate: fs,
    })
}
