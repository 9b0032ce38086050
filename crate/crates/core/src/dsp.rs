//! Small shared DSP kernels: windows, FFT convolution, DTFT evaluation.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

/// Periodic Hann window; shifted copies at half-length hop sum to one.
pub fn hann_periodic<T: Real>(len: usize) -> Vec<T> {
    let n = T::from_usize_lossy(len);
    (0..len)
        .map(|i| {
            let phase = T::TAU() * T::from_usize_lossy(i) / n;
            T::lit(0.5) - T::lit(0.5) * phase.cos()
        })
        .collect()
}

/// Direct-form linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve_direct<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == T::zero() {
            continue;
        }
        for (o, &h) in out[i..].iter_mut().zip(b) {
            *o = *o + x * h;
        }
    }
    out
}

/// FFT-based full linear convolution, length `a.len() + b.len() - 1`.
pub fn convolve_fft<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    if a.len().min(b.len()) <= 64 {
        return convolve_direct(a, b);
    }
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let conv = BlockConvolver::new(vec![short.to_vec()]);
    let mut padded = long.to_vec();
    padded.resize(out_len, T::zero());
    conv.convolve_truncated(&padded).pop().unwrap_or_default()
}

/// Overlap-add convolution of one input against a fixed set of kernels.
/// Input block spectra are computed once and shared across kernels.
pub struct BlockConvolver<T: Real> {
    kernels: Vec<Vec<T>>,
    spectra: Vec<Vec<Complex<T>>>,
    fft_size: usize,
    block: usize,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> BlockConvolver<T> {
    pub fn new(kernels: Vec<Vec<T>>) -> Self {
        let max_len = kernels.iter().map(Vec::len).max().unwrap_or(1).max(1);
        let fft_size = (2 * max_len).next_power_of_two().max(1024);
        let block = fft_size - max_len + 1;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(fft_size);
        let inverse = planner.plan_fft_inverse(fft_size);
        let spectra = kernels
            .iter()
            .map(|k| {
                let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
                for (b, &x) in buf.iter_mut().zip(k) {
                    b.re = x;
                }
                forward.process(&mut buf);
                buf
            })
            .collect();
        Self {
            kernels,
            spectra,
            fft_size,
            block,
            forward,
            inverse,
        }
    }

    pub fn kernels(&self) -> &[Vec<T>] {
        &self.kernels
    }

    /// Convolves `signal` with every kernel; each output is truncated to
    /// `signal.len()` samples (causal filtering).
    pub fn convolve_truncated(&self, signal: &[T]) -> Vec<Vec<T>> {
        let n = signal.len();
        let zero = Complex::new(T::zero(), T::zero());
        let block_spectra: Vec<Vec<Complex<T>>> = signal
            .chunks(self.block)
            .map(|chunk| {
                let mut buf = vec![zero; self.fft_size];
                for (b, &x) in buf.iter_mut().zip(chunk) {
                    b.re = x;
                }
                self.forward.process(&mut buf);
                buf
            })
            .collect();
        let scale = T::one() / T::from_usize_lossy(self.fft_size);
        let mut scratch = vec![zero; self.fft_size];
        self.spectra
            .iter()
            .map(|kernel_spec| {
                let mut out = vec![T::zero(); n];
                for (b, block_spec) in block_spectra.iter().enumerate() {
                    for ((s, &x), &h) in scratch.iter_mut().zip(block_spec).zip(kernel_spec) {
                        *s = x * h;
                    }
                    self.inverse.process(&mut scratch);
                    let start = b * self.block;
                    for (o, s) in out[start..].iter_mut().zip(&scratch) {
                        *o = *o + s.re * scale;
                    }
                }
                out
            })
            .collect()
    }
}

/// Discrete-time Fourier transform of a finite sequence at frequency `f`.
pub fn dtft<T: Real>(h: &[T], f: T, sample_rate: T) -> Complex<T> {
    let w = -T::TAU() * f / sample_rate;
    // rotating phasor; fine for the few-thousand-tap kernels used here
    let step = Complex::new(w.cos(), w.sin());
    let mut z = Complex::new(T::one(), T::zero());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (i, &x) in h.iter().enumerate() {
        if i % 256 == 0 {
            let phase = w * T::from_usize_lossy(i);
            z = Complex::new(phase.cos(), phase.sin());
        }
        acc = acc + z * x;
        z = z * step;
    }
    acc
}

pub fn mean_square<T: Real>(x: &[T]) -> T {
    if x.is_empty() {
        return T::zero();
    }
    x.iter().fold(T::zero(), |acc, &v| acc + v * v) / T::from_usize_lossy(x.len())
}

pub fn energy<T: Real>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, &v| acc + v * v)
}
