//! Stimulus preparation: level measurement and setting, room impulse
//! response convolution, synthetic triads, and per-condition processing
//! normalized to a reference condition.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audiogram::{AudiogramProfile, CompressionHealth};
use crate::dsp::{convolve_fft, hann_periodic, mean_square};
use crate::error::{HlsError, Result};
use crate::filterbank::{DEFAULT_CALIBRATION_DB, DEFAULT_LEVEL_FLOOR_DB};
use crate::scalar::{db_to_amplitude, Real};
use crate::simulator::{Method, Simulator, SimulatorConfig};
use crate::wav::read_wav;

pub const DEFAULT_INPUT_LEQ_DB: f64 = 70.0;

/// Equivalent level `10 log10(mean(x^2)) + calibration_db`; an all-zero
/// signal reads as the level floor.
pub fn leq<T: Real>(signal: &[T], calibration_db: T) -> Result<T> {
    if signal.is_empty() {
        return Err(HlsError::InvalidInput("Leq of an empty signal".into()));
    }
    let ms = mean_square(signal);
    if ms > T::zero() {
        Ok(T::lit(10.0) * ms.log10() + calibration_db)
    } else {
        Ok(T::lit(DEFAULT_LEVEL_FLOOR_DB))
    }
}

/// Scaled copy of `signal` whose Leq equals `target_db`.
pub fn set_leq<T: Real>(signal: &[T], target_db: T, calibration_db: T) -> Result<Vec<T>> {
    if signal.is_empty() || signal.iter().all(|&x| x == T::zero()) {
        return Err(HlsError::InvalidInput("cannot set the level of a silent signal".into()));
    }
    let current = T::lit(10.0) * mean_square(signal).log10() + calibration_db;
    let gain = db_to_amplitude(target_db - current);
    Ok(signal.iter().map(|&x| x * gain).collect())
}

/// Full linear convolution with a room impulse response.
pub fn convolve_rir<T: Real>(signal: &[T], signal_rate: u32, rir: &[T], rir_rate: u32) -> Result<Vec<T>> {
    if signal_rate != rir_rate {
        return Err(HlsError::SampleRateMismatch {
            expected: signal_rate,
            actual: rir_rate,
        });
    }
    Ok(convolve_fft(signal, rir))
}

pub fn midi_to_hz<T: Real>(note: i32) -> T {
    T::lit(440.0) * T::lit(2.0).powf(T::lit((note - 69) as f64 / 12.0))
}

/// Semitone offsets of each chord's notes relative to the top note of the
/// opening chord.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChordProgression {
    pub chords: Vec<Vec<i32>>,
}

impl Default for ChordProgression {
    /// I6 - V+6 - I6 in first inversion below the tonic: {E, G, C},
    /// {D, G#, B}, {E, G, C}.
    fn default() -> Self {
        Self {
            chords: vec![vec![-8, -5, 0], vec![-10, -4, -1], vec![-8, -5, 0]],
        }
    }
}

/// Additive-synthesis timbre: harmonic amplitudes and an exponential decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Instrument<T: Real> {
    pub name: String,
    pub partials: Vec<T>,
    /// Amplitude decay rate in 1/s (0 = sustained).
    pub decay_per_s: T,
    /// Top note of the opening chord.
    pub top_midi: i32,
}

impl<T: Real> Instrument<T> {
    fn preset(name: &str, partials: &[f64], decay: f64, top_midi: i32) -> Self {
        Self {
            name: name.into(),
            partials: partials.iter().map(|&p| T::lit(p)).collect(),
            decay_per_s: T::lit(decay),
            top_midi,
        }
    }

    /// Synthetic stand-ins for the four instrument timbres.
    pub fn presets() -> Vec<Self> {
        vec![
            Self::preset("tuba", &[1.0, 0.8, 0.5, 0.3, 0.15, 0.08], 0.6, 53),
            Self::preset("grand_piano", &[1.0, 0.6, 0.35, 0.25, 0.15, 0.1, 0.06, 0.04], 2.5, 60),
            Self::preset("cheap_organ", &[1.0, 0.0, 0.5, 0.0, 0.33, 0.0, 0.25, 0.0, 0.2], 0.0, 60),
            Self::preset("french_horn", &[1.0, 0.7, 0.55, 0.4, 0.25, 0.15, 0.1], 0.3, 60),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Triads<T: Real> {
    pub samples: Vec<T>,
    /// Fundamentals (Hz) of every chord, low to high.
    pub fundamentals: Vec<Vec<T>>,
    /// Partials skipped because they reach Nyquist.
    pub dropped_partials: usize,
}

const ATTACK_S: f64 = 0.01;
const RELEASE_S: f64 = 0.02;

/// Three consecutive chords (I6 - V+6 - I6 by default) of `chord_dur`
/// seconds each, built on the top note `tonic_midi`.
pub fn gen_triads<T: Real>(tonic_midi: i32, partials: &[T], chord_dur: T, sample_rate: u32) -> Result<Triads<T>> {
    gen_triads_with(tonic_midi, partials, T::zero(), chord_dur, sample_rate, &ChordProgression::default())
}

pub fn gen_triads_with<T: Real>(
    tonic_midi: i32,
    partials: &[T],
    decay_per_s: T,
    chord_dur: T,
    sample_rate: u32,
    progression: &ChordProgression,
) -> Result<Triads<T>> {
    let notes: Vec<Vec<i32>> = progression
        .chords
        .iter()
        .map(|c| c.iter().map(|o| tonic_midi + o).collect())
        .collect();
    if notes.iter().flatten().any(|n| !(0..=127).contains(n)) {
        return Err(HlsError::InvalidInput(format!(
            "progression on MIDI note {tonic_midi} leaves the MIDI range"
        )));
    }
    if !(chord_dur > T::zero()) {
        return Err(HlsError::InvalidInput("chord duration must be positive".into()));
    }
    let fs = T::from_u32(sample_rate).unwrap();
    let nyquist = fs / T::lit(2.0);
    let chord_len = (chord_dur * fs).round().to_usize().unwrap();
    let attack = (T::lit(ATTACK_S) * fs).to_usize().unwrap().min(chord_len / 2).max(1);
    let release = (T::lit(RELEASE_S) * fs).to_usize().unwrap().min(chord_len / 2).max(1);
    let mut samples = vec![T::zero(); chord_len * notes.len()];
    let mut dropped = 0usize;
    let mut fundamentals = Vec::with_capacity(notes.len());
    let voice_gain = T::one() / T::lit(3.0);
    for (c, chord) in notes.iter().enumerate() {
        let mut f0s: Vec<T> = chord.iter().map(|&n| midi_to_hz(n)).collect();
        f0s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let out = &mut samples[c * chord_len..(c + 1) * chord_len];
        for &f0 in &f0s {
            for (h, &amp) in partials.iter().enumerate() {
                if amp == T::zero() {
                    continue;
                }
                let f = f0 * T::from_usize_lossy(h + 1);
                if f >= nyquist {
                    dropped += 1;
                    continue;
                }
                let w = T::TAU() * f / fs;
                for (m, o) in out.iter_mut().enumerate() {
                    let t = T::from_usize_lossy(m) / fs;
                    let env = envelope::<T>(m, chord_len, attack, release) * (-decay_per_s * t).exp();
                    *o = *o + voice_gain * amp * env * (w * T::from_usize_lossy(m)).sin();
                }
            }
        }
        fundamentals.push(f0s);
    }
    Ok(Triads {
        samples,
        fundamentals,
        dropped_partials: dropped,
    })
}

fn envelope<T: Real>(m: usize, len: usize, attack: usize, release: usize) -> T {
    if m < attack {
        T::from_usize_lossy(m) / T::from_usize_lossy(attack)
    } else if m + release >= len {
        T::from_usize_lossy(len - m) / T::from_usize_lossy(release)
    } else {
        T::one()
    }
}

/// Gaussian white noise from a seeded generator.
pub fn white_noise<T: Real>(n: usize, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            T::lit(v)
        })
        .collect()
}

/// White noise shaped by a 100 Hz one-pole high-pass and a 500 Hz one-pole
/// low-pass, roughly following the long-term speech spectrum.
pub fn speech_shaped_noise<T: Real>(n: usize, sample_rate: u32, seed: u64) -> Vec<T> {
    let fs = T::from_u32(sample_rate).unwrap();
    let pole = |fc: f64| (-T::TAU() * T::lit(fc) / fs).exp();
    let (a_lp, a_hp) = (pole(500.0), pole(100.0));
    let mut lp = T::zero();
    let (mut hp_in, mut hp_out) = (T::zero(), T::zero());
    white_noise::<T>(n, seed)
        .into_iter()
        .map(|x| {
            lp = (T::one() - a_lp) * x + a_lp * lp;
            hp_out = a_hp * (hp_out + lp - hp_in);
            hp_in = lp;
            hp_out
        })
        .collect()
}

/// Mean over frames of the RMS difference (dB) between the power spectra of
/// `reference` and `test`. Exploratory only.
pub fn log_spectral_distance<T: Real>(reference: &[T], test: &[T]) -> T {
    const N: usize = 1024;
    const HOP: usize = 512;
    let n = reference.len().min(test.len());
    if n < N {
        return T::zero();
    }
    let window: Vec<T> = hann_periodic(N);
    let fft = FftPlanner::<T>::new().plan_fft_forward(N);
    let spectrum = |x: &[T]| {
        let mut buf: Vec<num_complex::Complex<T>> = x
            .iter()
            .zip(&window)
            .map(|(&v, &w)| num_complex::Complex::new(v * w, T::zero()))
            .collect();
        fft.process(&mut buf);
        buf
    };
    let eps = T::lit(1e-20);
    let mut total = T::zero();
    let mut frames = 0usize;
    let mut start = 0;
    while start + N <= n {
        let a = spectrum(&reference[start..start + N]);
        let b = spectrum(&test[start..start + N]);
        let mut acc = T::zero();
        for k in 1..N / 2 {
            let d = T::lit(10.0) * ((a[k].norm_sqr() + eps) / (b[k].norm_sqr() + eps)).log10();
            acc = acc + d * d;
        }
        total = total + (acc / T::from_usize_lossy(N / 2 - 1)).sqrt();
        frames += 1;
        start += HOP;
    }
    total / T::from_usize_lossy(frames)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusKind {
    Speech,
    Instrument,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionMethod {
    Dtvf,
    Fbas,
    /// Pre-processed files supplied by another simulator.
    External,
}

/// One entry of a conditions file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub label: String,
    pub method: ConditionMethod,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Built-in profile name or profile JSON path; the run's profile if absent.
    #[serde(default)]
    pub profile: Option<String>,
    /// Directory with `<item>.wav` files for external conditions.
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn default_alpha() -> f64 {
    1.0
}

/// Produces one condition's version of a stimulus.
pub trait Renderer<T: Real>: Send + Sync {
    fn render(&self, item_id: &str, input: &[T], sample_rate: u32) -> Result<Vec<T>>;
}

impl<T: Real> Renderer<T> for Simulator<T> {
    fn render(&self, _item_id: &str, input: &[T], sample_rate: u32) -> Result<Vec<T>> {
        Ok(self.process(input, sample_rate)?.output)
    }
}

/// Reads `<dir>/<item_id>.wav`, ignoring the prepared input.
pub struct ExternalFiles {
    pub dir: PathBuf,
}

impl<T: Real> Renderer<T> for ExternalFiles {
    fn render(&self, item_id: &str, _input: &[T], sample_rate: u32) -> Result<Vec<T>> {
        let audio = read_wav::<T>(self.dir.join(format!("{item_id}.wav")))?;
        if audio.info.sample_rate != sample_rate {
            return Err(HlsError::SampleRateMismatch {
                expected: sample_rate,
                actual: audio.info.sample_rate,
            });
        }
        Ok(audio.samples)
    }
}

pub struct Condition<T: Real> {
    pub label: String,
    pub renderer: Box<dyn Renderer<T>>,
}

/// Resolves a built-in profile name or a profile JSON path.
pub fn load_profile<T: Real>(reference: &str) -> Result<AudiogramProfile<T>> {
    if let Some(p) = AudiogramProfile::builtin(reference) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(reference)
        .map_err(|e| HlsError::Config(format!("cannot read profile '{reference}': {e}")))?;
    Ok(serde_json::from_str(&text)?)
}

/// Builds the renderer for a condition entry. `base` supplies everything the
/// entry does not override.
pub fn build_condition<T: Real>(spec: &ConditionSpec, base: &SimulatorConfig<T>, sample_rate: u32) -> Result<Condition<T>> {
    let renderer: Box<dyn Renderer<T>> = match spec.method {
        ConditionMethod::External => {
            let dir = spec.dir.clone().ok_or_else(|| {
                HlsError::Config(format!("external condition '{}' needs a 'dir'", spec.label))
            })?;
            Box::new(ExternalFiles { dir })
        }
        method => {
            let mut cfg = base.clone();
            cfg.method = if method == ConditionMethod::Dtvf { Method::Dtvf } else { Method::Fbas };
            cfg.alpha = CompressionHealth::new(T::lit(spec.alpha))?;
            if let Some(p) = &spec.profile {
                cfg.profile = load_profile(p)?;
            }
            Box::new(Simulator::new(cfg, sample_rate)?)
        }
    };
    Ok(Condition {
        label: spec.label.clone(),
        renderer,
    })
}

pub fn check_unique_labels(specs: &[ConditionSpec]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for s in specs {
        if !seen.insert(s.label.as_str()) {
            return Err(HlsError::Config(format!("duplicate condition label '{}'", s.label)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionOutput<T: Real> {
    pub label: String,
    pub samples: Vec<T>,
    pub leq_db: T,
    /// Log-spectral distance to the reference condition (exploratory).
    pub lsd_db: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusItem<T: Real> {
    pub id: String,
    pub kind: StimulusKind,
    pub input_leq_db: T,
    pub outputs: Vec<ConditionOutput<T>>,
}

impl<T: Real> StimulusItem<T> {
    pub fn output(&self, label: &str) -> Option<&ConditionOutput<T>> {
        self.outputs.iter().find(|o| o.label == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrepareOptions<T: Real> {
    pub input_leq_db: T,
    pub calibration_db: T,
}

impl<T: Real> Default for PrepareOptions<T> {
    fn default() -> Self {
        Self {
            input_leq_db: T::lit(DEFAULT_INPUT_LEQ_DB),
            calibration_db: T::lit(DEFAULT_CALIBRATION_DB),
        }
    }
}

/// Source -> optional RIR -> input level -> every condition -> each output
/// rescaled to the reference condition's Leq.
#[allow(clippy::too_many_arguments)]
pub fn prepare_item<T: Real>(
    id: &str,
    kind: StimulusKind,
    source: &[T],
    sample_rate: u32,
    conditions: &[Condition<T>],
    reference: &str,
    rir: Option<(&[T], u32)>,
    options: PrepareOptions<T>,
) -> Result<StimulusItem<T>> {
    let ref_index = conditions
        .iter()
        .position(|c| c.label == reference)
        .ok_or_else(|| HlsError::Config(format!("reference condition '{reference}' is not in the condition list")))?;
    let reverberant = match rir {
        Some((h, rate)) => convolve_rir(source, sample_rate, h, rate)?,
        None => source.to_vec(),
    };
    let input = set_leq(&reverberant, options.input_leq_db, options.calibration_db)?;

    let mut rendered = Vec::with_capacity(conditions.len());
    let mut failures = Vec::new();
    for c in conditions {
        match c.renderer.render(id, &input, sample_rate) {
            Ok(y) if y.iter().any(|&v| v != T::zero()) => rendered.push(Some(y)),
            Ok(_) => {
                failures.push((c.label.clone(), "output is silent".to_string()));
                rendered.push(None);
            }
            Err(e) => {
                failures.push((c.label.clone(), e.to_string()));
                rendered.push(None);
            }
        }
    }
    if !failures.is_empty() {
        return Err(HlsError::ConditionFailures(failures));
    }
    let rendered: Vec<Vec<T>> = rendered.into_iter().flatten().collect();
    let target = leq(&rendered[ref_index], options.calibration_db)?;
    let mut outputs = Vec::with_capacity(conditions.len());
    for (c, y) in conditions.iter().zip(&rendered) {
        let samples = if std::ptr::eq(y, &rendered[ref_index]) {
            y.clone()
        } else {
            set_leq(y, target, options.calibration_db)?
        };
        let lsd_db = log_spectral_distance(&rendered[ref_index], &samples);
        outputs.push(ConditionOutput {
            label: c.label.clone(),
            leq_db: leq(&samples, options.calibration_db)?,
            samples,
            lsd_db,
        });
    }
    Ok(StimulusItem {
        id: id.to_string(),
        kind,
        input_leq_db: options.input_leq_db,
        outputs,
    })
}

/// Rescales to `target_db`; used for the normalization step.
pub fn normalize_to<T: Real>(signal: &[T], target_db: T, calibration_db: T) -> Result<Vec<T>> {
    set_leq(signal, target_db, calibration_db)
}
