//! Interpolation on a logarithmic frequency axis.

use crate::scalar::Real;

/// Linear interpolation of `values` over `log(freqs)`, holding the edge
/// values outside the tabulated range. `freqs` must be strictly increasing
/// and positive; `f` must be positive.
pub fn interp_log_freq<T: Real>(freqs: &[T], values: &[T], f: T) -> T {
    debug_assert_eq!(freqs.len(), values.len());
    debug_assert!(!freqs.is_empty());
    let n = freqs.len();
    if f <= freqs[0] {
        return values[0];
    }
    if f >= freqs[n - 1] {
        return values[n - 1];
    }
    // first index with freqs[i] >= f; guaranteed in 1..n
    let hi = freqs.partition_point(|&x| x < f);
    let lo = hi - 1;
    if freqs[hi] == f {
        return values[hi];
    }
    let (l0, l1) = (freqs[lo].ln(), freqs[hi].ln());
    let w = (f.ln() - l0) / (l1 - l0);
    values[lo] + w * (values[hi] - values[lo])
}

pub(crate) fn strictly_increasing<T: Real>(xs: &[T]) -> bool {
    xs.windows(2).all(|w| w[0] < w[1])
}
