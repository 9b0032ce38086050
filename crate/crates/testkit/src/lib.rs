//! Reference computations used only by tests. Nothing here calls into the
//! library under test; each oracle is a direct, slow evaluation of the
//! defining formula.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

/// Composite Simpson rule with `n` (rounded up to even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Standard normal CDF by quadrature of the density from 0.
pub fn normal_cdf(z: f64) -> f64 {
    let pdf = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let n = ((z.abs() * 2000.0) as usize).max(2000);
    0.5 + simpson(pdf, 0.0, z, n)
}

/// Bisection inverse of a monotone CDF on `[lo, hi]`.
pub fn invert(cdf: impl Fn(f64) -> f64, p: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn normal_quantile(p: f64) -> f64 {
    invert(normal_cdf, p, -40.0, 40.0)
}

/// Student t CDF by quadrature after the substitution `t = tan(theta)`,
/// normalized numerically so no gamma function is needed.
pub fn t_cdf(t: f64, df: f64) -> f64 {
    let g = |th: f64| {
        let c = th.cos();
        if c <= 0.0 {
            return if df == 1.0 { 1.0 } else { 0.0 };
        }
        let x = th.tan();
        (1.0 + x * x / df).powf(-(df + 1.0) / 2.0) / (c * c)
    };
    let h = std::f64::consts::FRAC_PI_2;
    let total = simpson(g, -h, h, 40_000);
    simpson(g, -h, t.atan(), 40_000) / total
}

pub fn t_quantile(p: f64, df: f64) -> f64 {
    invert(|t| t_cdf(t, df), p, -1e6, 1e6)
}

/// Roots of `c[0] z^(n-1) + c[1] z^(n-2) + ... + c[n-1]`, i.e. the zeros of
/// the FIR transfer function `sum c[k] z^-k`, from companion-matrix eigenvalues.
pub fn fir_zeros(c: &[f64]) -> Vec<Complex64> {
    let mut c: Vec<f64> = c.to_vec();
    while c.last() == Some(&0.0) {
        c.pop();
    }
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        m[(0, j)] = -c[j + 1] / c[0];
    }
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|z| Complex64::new(z.re, z.im)).collect()
}

/// `|H(e^{j 2 pi f / fs})|` in dB by direct summation.
pub fn fir_gain_db(h: &[f64], f: f64, fs: f64) -> f64 {
    let w = 2.0 * std::f64::consts::PI * f / fs;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, &v) in h.iter().enumerate() {
        re += v * (w * k as f64).cos();
        im -= v * (w * k as f64).sin();
    }
    10.0 * (re * re + im * im).log10()
}

fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Welch estimates `(Pxx, |Pxy|)` with a Hann window and 50% overlap, on
/// bins `0..=nfft/2` spaced `fs / nfft`.
pub fn welch(x: &[f64], y: &[f64], nfft: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let w = hann(nfft);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(nfft);
    let bins = nfft / 2 + 1;
    let mut pxx = vec![0.0; bins];
    let mut pyy = vec![0.0; bins];
    let mut pxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut start = 0;
    let n = x.len().min(y.len());
    while start + nfft <= n {
        let mut a: Vec<Complex64> = (0..nfft).map(|i| Complex64::new(x[start + i] * w[i], 0.0)).collect();
        let mut b: Vec<Complex64> = (0..nfft).map(|i| Complex64::new(y[start + i] * w[i], 0.0)).collect();
        fft.process(&mut a);
        fft.process(&mut b);
        for k in 0..bins {
            pxx[k] += a[k].norm_sqr();
            pyy[k] += b[k].norm_sqr();
            pxy[k] += a[k].conj() * b[k];
        }
        start += nfft / 2;
    }
    (pxx, pyy, pxy.iter().map(|c| c.norm()).collect())
}

/// Ratio of long-term output to input power in dB, averaged over the bins
/// within `frac` octaves of `f`.
pub fn band_power_ratio_db(pxx: &[f64], pyy: &[f64], nfft: usize, fs: f64, f: f64, frac: f64) -> f64 {
    let lo = f * 2f64.powf(-frac / 2.0);
    let hi = f * 2f64.powf(frac / 2.0);
    let (mut a, mut b) = (0.0, 0.0);
    for k in 0..pxx.len() {
        let fk = k as f64 * fs / nfft as f64;
        if fk >= lo && fk <= hi {
            a += pxx[k];
            b += pyy[k];
        }
    }
    10.0 * (b / a).log10()
}

/// Log-frequency linear interpolation with edge hold.
pub fn interp_log(freqs: &[f64], values: &[f64], f: f64) -> f64 {
    if f <= freqs[0] {
        return values[0];
    }
    if f >= freqs[freqs.len() - 1] {
        return values[values.len() - 1];
    }
    let i = freqs.windows(2).position(|w| f >= w[0] && f <= w[1]).unwrap();
    let t = (f.ln() - freqs[i].ln()) / (freqs[i + 1].ln() - freqs[i].ln());
    values[i] + t * (values[i + 1] - values[i])
}

/// Sloping audiogram-like loss at `[125, ..., 8000]` Hz: base 0-25 dB,
/// per-octave increments bounded by 2, 2, 5, 15, 25, 25 dB with up to
/// 1 dB dips above 1 kHz. Returned as gains (negative dB).
pub fn random_sloping_target(rng: &mut impl Rng) -> [f64; 7] {
    let bounds = [2.0, 2.0, 5.0, 15.0, 25.0, 25.0];
    let mut loss = rng.random_range(0.0..25.0);
    let mut out = [-loss; 7];
    for (i, b) in bounds.iter().enumerate() {
        let mut inc = rng.random_range(0.0..*b);
        if i >= 3 {
            inc -= rng.random_range(0.0..1.0);
        }
        loss += inc;
        out[i + 1] = -loss;
    }
    out
}

/// One listener's paired-comparison counts from latent scores (higher =
/// less distortion): for each unordered pair `trials` judgments, condition
/// `i` judged MORE distorted with probability `Phi(mu_j - mu_i)`.
/// Returns `counts[i][j]`.
pub fn simulate_counts(latent: &[f64], trials: u32, rng: &mut ChaCha8Rng) -> Vec<Vec<u32>> {
    let k = latent.len();
    let mut counts = vec![vec![0u32; k]; k];
    for i in 0..k {
        for j in i + 1..k {
            let p_i_worse = normal_cdf(latent[j] - latent[i]);
            for _ in 0..trials {
                if rng.random::<f64>() < p_i_worse {
                    counts[i][j] += 1;
                } else {
                    counts[j][i] += 1;
                }
            }
        }
    }
    counts
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two-sided sign-flip permutation p-value for the mean of paired
/// differences, exhaustive for up to 20 pairs.
pub fn sign_flip_p_value(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    assert!(n <= 20);
    let observed = diffs.iter().sum::<f64>().abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let s: f64 = diffs
            .iter()
            .enumerate()
            .map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d })
            .sum();
        if s.abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracles_self_check() {
        assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-12);
        assert!((t_quantile(0.995, 1.0) - (std::f64::consts::PI * 0.495).tan()).abs() < 1e-8);
        // t with 2 df has a closed form
        let p: f64 = 0.9;
        let closed = (2.0 * p - 1.0) * (2.0 / (4.0 * p * (1.0 - p))).sqrt();
        assert!((t_quantile(p, 2.0) - closed).abs() < 1e-9);
        let mut z = fir_zeros(&[1.0, -3.0, 2.0]);
        z.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!((z[0].re - 1.0).abs() < 1e-12 && (z[1].re - 2.0).abs() < 1e-12);
        assert!((sign_flip_p_value(&[1.0, 1.0, 1.0]) - 0.25).abs() < 1e-12);
    }
}
