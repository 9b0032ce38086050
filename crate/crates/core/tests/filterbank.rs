use hls_lab_core::filterbank::{erb_bandwidth, erb_number, estimate_levels, DEFAULT_CALIBRATION_DB};
use hls_lab_core::stimuli::white_noise;
use hls_lab_core::{design_filterbank, FilterbankSpec};
use hls_lab_testkit::fir_gain_db;
use proptest::prelude::*;

const FS: u32 = 48000;

fn bank() -> hls_lab_core::Bank {
    design_filterbank(&FilterbankSpec::with_sample_rate(FS)).unwrap()
}

#[test]
fn channel_peaks_sit_on_centre_frequencies() {
    let b = bank();
    for (k, (&fc, h)) in b.center_frequencies().iter().zip(b.impulse_responses()).enumerate() {
        // sweep +-5% in 0.05% steps
        let (mut best_f, mut best_g) = (0.0, f64::NEG_INFINITY);
        for i in -100..=100 {
            let f = fc * (1.0 + i as f64 * 5e-4);
            let g = fir_gain_db(h, f, FS as f64);
            if g > best_g {
                best_g = g;
                best_f = f;
            }
        }
        assert!((best_f / fc - 1.0).abs() <= 0.01, "channel {k}: peak {best_f} vs {fc}");
        assert!(best_g.abs() <= 0.5, "channel {k}: peak gain {best_g} dB");
        assert!(fir_gain_db(h, fc, FS as f64).abs() <= 0.5);
    }
}

#[test]
fn centre_frequencies_uniform_on_erb_scale() {
    let b = bank();
    let fcs = b.center_frequencies();
    assert_eq!(fcs.len(), 100);
    assert!((fcs[0] - 100.0).abs() < 1e-9 && (fcs[99] - 8000.0).abs() < 1e-9);
    let step = erb_number(fcs[1]) - erb_number(fcs[0]);
    for w in fcs.windows(2) {
        assert!(w[1] > w[0]);
        assert!((erb_number(w[1]) - erb_number(w[0]) - step).abs() < 1e-9);
    }
    let two = design_filterbank(&FilterbankSpec::<f64> { n_channels: 2, ..FilterbankSpec::with_sample_rate(FS) }).unwrap();
    assert_eq!(two.center_frequencies(), &[100.0, 8000.0]);
    assert!((erb_bandwidth(1000.0f64) - 132.639).abs() < 1e-9);
}

#[test]
fn white_noise_power_matches_integrated_response() {
    // For unit-variance white noise the expected output power is sum(h^2)
    // (Parseval: the integral of |H|^2 over the band).
    let b = bank();
    let x: Vec<f64> = white_noise(FS as usize * 4, 11);
    let ch = b.analyze(&x, FS).unwrap();
    for k in (0..100).step_by(9) {
        let h = &b.impulse_responses()[k];
        let expected: f64 = h.iter().map(|v| v * v).sum();
        let skip = h.len();
        let y = &ch.signals[k][skip..];
        let got = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        let err = 10.0 * (got / expected).log10();
        assert!(err.abs() <= 1.0, "channel {k}: {err} dB");
    }
}

#[test]
fn sine_selectivity_and_level() {
    let b = bank();
    for k in [10usize, 50, 90] {
        let fc = b.center_frequencies()[k];
        let n = FS as usize / 2;
        let amp = 2f64.sqrt();
        let x: Vec<f64> = (0..n).map(|i| amp * (2.0 * std::f64::consts::PI * fc * i as f64 / FS as f64).sin()).collect();
        let ch = b.analyze(&x, FS).unwrap();
        let rms: Vec<f64> = ch.signals.iter().map(|s| (s[n / 2..].iter().map(|v| v * v).sum::<f64>() / (n / 2) as f64).sqrt()).collect();
        let best = rms.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(best, k);
        let lv = estimate_levels(&ch, 0.001, 0.002, DEFAULT_CALIBRATION_DB).unwrap();
        let row = &lv.levels[k];
        let mid: f64 = row[row.len() / 2..row.len() - 2].iter().sum::<f64>() / (row.len() / 2 - 2) as f64;
        let gain = fir_gain_db(&b.impulse_responses()[k], fc, FS as f64);
        assert!((mid - 30.0 - gain).abs() <= 1.0, "channel {k}: {mid} dB");
    }
}

#[test]
fn silence_gives_floor() {
    let b = bank();
    let ch = b.analyze(&vec![0.0; 4800], FS).unwrap();
    assert!(ch.signals.iter().all(|s| s.iter().all(|&v| v == 0.0)));
    let lv = estimate_levels(&ch, 0.001, 0.002, DEFAULT_CALIBRATION_DB).unwrap();
    assert!(lv.levels.iter().flatten().all(|&l| l == -20.0));
}

#[test]
fn zero_padding_does_not_change_earlier_frames() {
    let b = bank();
    let x: Vec<f64> = white_noise(4800, 3);
    let mut padded = x.clone();
    padded.extend(vec![0.0; 2400]);
    let a = estimate_levels(&b.analyze(&x, FS).unwrap(), 0.001, 0.002, 30.0).unwrap();
    let p = estimate_levels(&b.analyze(&padded, FS).unwrap(), 0.001, 0.002, 30.0).unwrap();
    // frames fully inside the original signal
    for (ra, rp) in a.levels.iter().zip(&p.levels) {
        for t in 0..a.n_frames() - 2 {
            assert!((ra[t] - rp[t]).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]
    #[test]
    fn analysis_is_linear(sa in 0u64..1000, sb in 0u64..1000, a in -3.0..3.0f64, c in -3.0..3.0f64) {
        let spec = FilterbankSpec::<f64> { n_channels: 12, ..FilterbankSpec::with_sample_rate(FS) };
        let b = design_filterbank(&spec).unwrap();
        let x: Vec<f64> = white_noise(2000, sa);
        let y: Vec<f64> = white_noise(2000, sb + 5000);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + c * q).collect();
        let (cx, cy, cm) = (b.analyze(&x, FS).unwrap(), b.analyze(&y, FS).unwrap(), b.analyze(&mix, FS).unwrap());
        for k in 0..12 {
            let scale = cm.signals[k].iter().fold(1e-12f64, |m, v| m.max(v.abs()));
            for i in 0..2000 {
                let want = a * cx.signals[k][i] + c * cy.signals[k][i];
                prop_assert!((cm.signals[k][i] - want).abs() <= 1e-9 * scale.max(1.0));
            }
        }
    }

    #[test]
    fn louder_signal_never_lowers_levels(seed in 0u64..1000, g in 1.0..4.0f64) {
        let spec = FilterbankSpec::<f64> { n_channels: 8, ..FilterbankSpec::with_sample_rate(FS) };
        let b = design_filterbank(&spec).unwrap();
        let x: Vec<f64> = white_noise(1500, seed);
        let y: Vec<f64> = x.iter().map(|v| v * g).collect();
        let lx = estimate_levels(&b.analyze(&x, FS).unwrap(), 0.001, 0.002, 30.0).unwrap();
        let ly = estimate_levels(&b.analyze(&y, FS).unwrap(), 0.001, 0.002, 30.0).unwrap();
        for (rx, ry) in lx.levels.iter().zip(&ly.levels) {
            for (a, c) in rx.iter().zip(ry) {
                prop_assert!(c + 1e-9 >= *a);
            }
        }
    }
}
