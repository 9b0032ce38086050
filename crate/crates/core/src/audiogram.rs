//! Hearing profiles and the split of total hearing loss into an active
//! (level-dependent) and a passive (constant) part.
//!
//! All levels here are dB HL. `hl_total = hl_act + hl_pas` at every
//! audiometric frequency; the active part shrinks linearly with input level
//! between the absolute threshold and the recruitment ceiling.

use serde::{Deserialize, Serialize};

use crate::error::{HlsError, Result};
use crate::interp::{interp_log_freq, strictly_increasing};
use crate::scalar::Real;

pub const MAX_HEARING_LEVEL_DB: f64 = 120.0;

/// Audiometric frequencies of the built-in profiles.
pub const AUDIOMETRIC_FREQUENCIES_HZ: [f64; 7] = [125.0, 250.0, 500.0, 1000.0, 2000.0, 4000.0, 8000.0];

/// Average hearing level of 70-year-old males.
pub const AGE_70_HEARING_LEVEL_DB: [f64; 7] = [8.0, 8.0, 9.0, 10.0, 19.0, 43.0, 59.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct ProfileFile<T> {
    name: String,
    frequencies_hz: Vec<T>,
    hearing_level_db: Vec<T>,
}

/// Total hearing level per audiometric frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    bound = "T: Real",
    try_from = "ProfileFile<T>",
    into = "ProfileFile<T>"
)]
pub struct AudiogramProfile<T: Real> {
    name: String,
    frequencies: Vec<T>,
    hearing_level: Vec<T>,
}

impl<T: Real> TryFrom<ProfileFile<T>> for AudiogramProfile<T> {
    type Error = HlsError;

    fn try_from(f: ProfileFile<T>) -> Result<Self> {
        Self::new(f.name, f.frequencies_hz, f.hearing_level_db)
    }
}

impl<T: Real> From<AudiogramProfile<T>> for ProfileFile<T> {
    fn from(p: AudiogramProfile<T>) -> Self {
        ProfileFile {
            name: p.name,
            frequencies_hz: p.frequencies,
            hearing_level_db: p.hearing_level,
        }
    }
}

impl<T: Real> AudiogramProfile<T> {
    pub fn new(name: impl Into<String>, frequencies: Vec<T>, hearing_level: Vec<T>) -> Result<Self> {
        if frequencies.is_empty() || hearing_level.is_empty() {
            return Err(HlsError::Config("empty audiogram profile".into()));
        }
        if frequencies.len() != hearing_level.len() {
            return Err(HlsError::Config(format!(
                "profile has {} frequencies but {} hearing levels",
                frequencies.len(),
                hearing_level.len()
            )));
        }
        if frequencies.len() < 2 {
            return Err(HlsError::Config("profile needs at least two frequencies".into()));
        }
        if frequencies.iter().any(|&f| !(f > T::zero()) || !f.is_finite()) {
            return Err(HlsError::Config("profile frequencies must be positive".into()));
        }
        if !strictly_increasing(&frequencies) {
            return Err(HlsError::Config("profile frequencies must be strictly increasing".into()));
        }
        let max = T::lit(MAX_HEARING_LEVEL_DB);
        if hearing_level.iter().any(|&h| !(h >= T::zero() && h <= max)) {
            return Err(HlsError::Config(format!(
                "hearing levels must lie in [0, {MAX_HEARING_LEVEL_DB}] dB HL"
            )));
        }
        Ok(Self {
            name: name.into(),
            frequencies,
            hearing_level,
        })
    }

    /// Average 70-year-old male audiogram.
    pub fn age_70() -> Self {
        Self::new(
            "70yr",
            AUDIOMETRIC_FREQUENCIES_HZ.iter().map(|&f| T::lit(f)).collect(),
            AGE_70_HEARING_LEVEL_DB.iter().map(|&h| T::lit(h)).collect(),
        )
        .expect("built-in profile is valid")
    }

    /// Normal hearing: 0 dB HL at the audiometric frequencies.
    pub fn normal() -> Self {
        Self::new(
            "normal",
            AUDIOMETRIC_FREQUENCIES_HZ.iter().map(|&f| T::lit(f)).collect(),
            vec![T::zero(); AUDIOMETRIC_FREQUENCIES_HZ.len()],
        )
        .expect("built-in profile is valid")
    }

    /// Looks up a built-in profile by name (`70yr`, `normal`).
    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "70yr" | "70-yr" | "age70" => Some(Self::age_70()),
            "normal" | "nh" | "zero" => Some(Self::normal()),
            _ => None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn hearing_level(&self) -> &[T] {
        &self.hearing_level
    }
}

/// Log-frequency interpolation of the hearing level, edge-held outside the
/// tabulated range.
pub fn interpolate_hl<T: Real>(profile: &AudiogramProfile<T>, fc: T) -> Result<T> {
    if !(fc > T::zero()) {
        return Err(HlsError::InvalidInput(format!("frequency must be positive, got {fc}")));
    }
    if profile.frequencies.is_empty() {
        return Err(HlsError::Config("empty audiogram profile".into()));
    }
    Ok(interp_log_freq(&profile.frequencies, &profile.hearing_level, fc))
}

/// Remaining fraction of the cochlear active process, in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(bound = "T: Real", try_from = "f64", into = "f64")]
pub struct CompressionHealth<T: Real>(T);

impl<T: Real> CompressionHealth<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if alpha >= T::zero() && alpha <= T::one() {
            Ok(Self(alpha))
        } else {
            Err(HlsError::Config(format!("compression health must lie in [0, 1], got {alpha}")))
        }
    }

    pub fn healthy() -> Self {
        Self(T::one())
    }

    pub fn value(self) -> T {
        self.0
    }
}

impl<T: Real> TryFrom<f64> for CompressionHealth<T> {
    type Error = HlsError;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(T::lit(v))
    }
}

impl<T: Real> From<CompressionHealth<T>> for f64 {
    fn from(a: CompressionHealth<T>) -> f64 {
        a.0.as_f64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct CalibrationFile<T> {
    frequencies_hz: Vec<T>,
    g_cal_db: Vec<T>,
    /// `null` entries mean "no cap".
    c_cap_db: Vec<Option<T>>,
    #[serde(default)]
    l_at_db: Option<Vec<T>>,
    #[serde(default)]
    l_ceiling_db: Option<T>,
}

/// Constants mapping compression health to active hearing loss, plus the
/// recruitment range used by [`reduction_active`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    bound = "T: Real",
    try_from = "CalibrationFile<T>",
    into = "CalibrationFile<T>"
)]
pub struct ActiveGainCalibration<T: Real> {
    frequencies: Vec<T>,
    g_cal: Vec<T>,
    c_cap: Vec<Option<T>>,
    l_at: Vec<T>,
    l_ceiling: T,
}

impl<T: Real> TryFrom<CalibrationFile<T>> for ActiveGainCalibration<T> {
    type Error = HlsError;
    fn try_from(f: CalibrationFile<T>) -> Result<Self> {
        let n = f.frequencies_hz.len();
        Self::new(
            f.frequencies_hz,
            f.g_cal_db,
            f.c_cap_db,
            f.l_at_db.unwrap_or_else(|| vec![T::zero(); n]),
            f.l_ceiling_db.unwrap_or_else(|| T::lit(100.0)),
        )
    }
}

impl<T: Real> From<ActiveGainCalibration<T>> for CalibrationFile<T> {
    fn from(c: ActiveGainCalibration<T>) -> Self {
        CalibrationFile {
            frequencies_hz: c.frequencies,
            g_cal_db: c.g_cal,
            c_cap_db: c.c_cap,
            l_at_db: Some(c.l_at),
            l_ceiling_db: Some(c.l_ceiling),
        }
    }
}

impl<T: Real> ActiveGainCalibration<T> {
    pub fn new(
        frequencies: Vec<T>,
        g_cal: Vec<T>,
        c_cap: Vec<Option<T>>,
        l_at: Vec<T>,
        l_ceiling: T,
    ) -> Result<Self> {
        let n = frequencies.len();
        if n == 0 || g_cal.len() != n || c_cap.len() != n || l_at.len() != n {
            return Err(HlsError::Config(
                "calibration vectors must be nonempty and share one frequency grid".into(),
            ));
        }
        if frequencies.iter().any(|&f| !(f > T::zero())) || !strictly_increasing(&frequencies) {
            return Err(HlsError::Config(
                "calibration frequencies must be positive and strictly increasing".into(),
            ));
        }
        if g_cal.iter().any(|&g| !(g >= T::zero())) {
            return Err(HlsError::Config("g_cal must be >= 0".into()));
        }
        if c_cap.iter().flatten().any(|&c| !(c >= T::zero())) {
            return Err(HlsError::Config("c_cap must be >= 0".into()));
        }
        let max_at = l_at.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
        if !(l_ceiling > max_at) {
            return Err(HlsError::Config(
                "recruitment ceiling must exceed every absolute threshold".into(),
            ));
        }
        Ok(Self {
            frequencies,
            g_cal,
            c_cap,
            l_at,
            l_ceiling,
        })
    }

    /// Default constants: slope twice the active part of the alpha = 0.5
    /// split of the 70-yr audiogram, capped at 44 dB at 8 kHz.
    pub fn standard() -> Self {
        let f: Vec<T> = AUDIOMETRIC_FREQUENCIES_HZ.iter().map(|&f| T::lit(f)).collect();
        let g = [16.0, 16.0, 18.0, 20.0, 38.0, 54.0, 54.0].map(T::lit).to_vec();
        let mut cap = vec![None; 7];
        cap[6] = Some(T::lit(44.0));
        Self::new(f, g, cap, vec![T::zero(); 7], T::lit(100.0)).expect("built-in calibration is valid")
    }

    pub fn frequencies(&self) -> &[T] {
        &self.frequencies
    }

    pub fn l_ceiling(&self) -> T {
        self.l_ceiling
    }

    pub fn g_cal_at(&self, fc: T) -> T {
        interp_log_freq(&self.frequencies, &self.g_cal, fc)
    }

    /// Active-loss cap at `fc`. Missing caps are replaced by `g_cal` before
    /// interpolating (a cap at or above `g_cal` never binds), which keeps the
    /// interpolated cap finite and continuous.
    pub fn c_cap_at(&self, fc: T) -> T {
        let effective: Vec<T> = self
            .c_cap
            .iter()
            .zip(&self.g_cal)
            .map(|(c, &g)| c.map_or(g, |c| c.min(g)))
            .collect();
        interp_log_freq(&self.frequencies, &effective, fc)
    }

    pub fn l_at_at(&self, fc: T) -> T {
        interp_log_freq(&self.frequencies, &self.l_at, fc)
    }
}

impl<T: Real> Default for ActiveGainCalibration<T> {
    fn default() -> Self {
        Self::standard()
    }
}

/// Per-frequency split of total hearing loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HLDecomposition<T: Real> {
    pub frequencies: Vec<T>,
    pub hl_act: Vec<T>,
    pub hl_pas: Vec<T>,
    pub alpha: CompressionHealth<T>,
}

impl<T: Real> HLDecomposition<T> {
    pub fn hl_total(&self) -> Vec<T> {
        self.hl_act.iter().zip(&self.hl_pas).map(|(&a, &p)| a + p).collect()
    }

    pub fn hl_act_at(&self, fc: T) -> T {
        interp_log_freq(&self.frequencies, &self.hl_act, fc)
    }

    pub fn hl_pas_at(&self, fc: T) -> T {
        interp_log_freq(&self.frequencies, &self.hl_pas, fc)
    }
}

/// `hl_act = min(HL_total, c_cap, (1 - alpha) * g_cal)`, `hl_pas = HL_total - hl_act`.
pub fn decompose_hl<T: Real>(
    profile: &AudiogramProfile<T>,
    alpha: CompressionHealth<T>,
    cal: &ActiveGainCalibration<T>,
) -> HLDecomposition<T> {
    let loss_fraction = T::one() - alpha.value();
    let mut hl_act = Vec::with_capacity(profile.frequencies.len());
    let mut hl_pas = Vec::with_capacity(profile.frequencies.len());
    for (&f, &total) in profile.frequencies.iter().zip(&profile.hearing_level) {
        let act = total
            .min(cal.c_cap_at(f))
            .min(loss_fraction * cal.g_cal_at(f))
            .max(T::zero());
        hl_act.push(act);
        hl_pas.push(total - act);
    }
    HLDecomposition {
        frequencies: profile.frequencies.clone(),
        hl_act,
        hl_pas,
        alpha,
    }
}

/// Level-dependent active reduction (loudness recruitment): equals `hl_act`
/// at the absolute threshold and falls linearly to zero at the ceiling.
pub fn reduction_active<T: Real>(
    decomp: &HLDecomposition<T>,
    cal: &ActiveGainCalibration<T>,
    fc: T,
    level: T,
) -> T {
    let hl_act = decomp.hl_act_at(fc);
    if hl_act <= T::zero() {
        return T::zero();
    }
    let l_at = cal.l_at_at(fc);
    let span = cal.l_ceiling - l_at;
    let w = ((cal.l_ceiling - level) / span).max(T::zero()).min(T::one());
    hl_act * w
}

/// Total reduction `R_act(fc, level) + R_pas(fc)` in dB.
pub fn reduction_total<T: Real>(
    decomp: &HLDecomposition<T>,
    cal: &ActiveGainCalibration<T>,
    fc: T,
    level: T,
) -> T {
    (reduction_active(decomp, cal, fc, level) + decomp.hl_pas_at(fc)).max(T::zero())
}

/// Per-frequency offset mapping calibrated dB SPL to dB HL
/// (`dB HL = dB SPL - offset`). The default is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct LevelReference<T: Real> {
    pub frequencies_hz: Vec<T>,
    pub offsets_db: Vec<T>,
}

impl<T: Real> LevelReference<T> {
    pub fn identity() -> Self {
        Self {
            frequencies_hz: vec![T::lit(1000.0)],
            offsets_db: vec![T::zero()],
        }
    }

    pub fn new(frequencies_hz: Vec<T>, offsets_db: Vec<T>) -> Result<Self> {
        if frequencies_hz.is_empty()
            || frequencies_hz.len() != offsets_db.len()
            || !strictly_increasing(&frequencies_hz)
        {
            return Err(HlsError::Config("invalid level reference table".into()));
        }
        Ok(Self {
            frequencies_hz,
            offsets_db,
        })
    }

    pub fn spl_to_hl(&self, fc: T, level_spl: T) -> T {
        level_spl - interp_log_freq(&self.frequencies_hz, &self.offsets_db, fc)
    }
}

impl<T: Real> Default for LevelReference<T> {
    fn default() -> Self {
        Self::identity()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha(a: f64) -> CompressionHealth<f64> {
        CompressionHealth::new(a).unwrap()
    }

    #[test]
    fn interpolation_examples() {
        let p = AudiogramProfile::<f64>::age_70();
        assert_eq!(interpolate_hl(&p, 4000.0).unwrap(), 43.0);
        let mid = (2000.0f64 * 4000.0).sqrt();
        assert!((interpolate_hl(&p, mid).unwrap() - 31.0).abs() < 1e-9);
        assert!((interpolate_hl(&p, 2828.4).unwrap() - 31.0).abs() < 1e-3);
        assert_eq!(interpolate_hl(&p, 100.0).unwrap(), 8.0);
        assert_eq!(interpolate_hl(&p, 16000.0).unwrap(), 59.0);
        assert!(interpolate_hl(&p, 0.0).is_err());
    }

    #[test]
    fn profile_validation() {
        assert!(AudiogramProfile::<f64>::new("x", vec![], vec![]).is_err());
        assert!(AudiogramProfile::new("x", vec![1000.0], vec![10.0]).is_err());
        assert!(AudiogramProfile::new("x", vec![1000.0, 500.0], vec![10.0, 10.0]).is_err());
        assert!(AudiogramProfile::new("x", vec![500.0, 1000.0], vec![10.0, 121.0]).is_err());
        assert!(AudiogramProfile::new("x", vec![500.0, 1000.0], vec![-1.0, 10.0]).is_err());
        assert!(AudiogramProfile::new("x", vec![500.0, 1000.0], vec![10.0]).is_err());
        assert!(AudiogramProfile::new("x", vec![0.0, 1000.0], vec![10.0, 10.0]).is_err());
    }

    #[test]
    fn profile_json_round_trip_and_validation() {
        let json = r#"{"name":"70yr","frequencies_hz":[125,250,500,1000,2000,4000,8000],"hearing_level_db":[8,8,9,10,19,43,59]}"#;
        let p: AudiogramProfile<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(p, AudiogramProfile::age_70());
        let back = serde_json::to_string(&p).unwrap();
        assert!(back.contains("hearing_level_db"));
        let bad = r#"{"name":"x","frequencies_hz":[250,125],"hearing_level_db":[1,2]}"#;
        assert!(serde_json::from_str::<AudiogramProfile<f64>>(bad).is_err());
    }

    #[test]
    fn compression_health_range() {
        assert!(CompressionHealth::new(-0.01f64).is_err());
        assert!(CompressionHealth::new(1.01f64).is_err());
        assert!(CompressionHealth::new(f64::NAN).is_err());
        assert_eq!(CompressionHealth::<f64>::healthy().value(), 1.0);
    }

    #[test]
    fn decomposition_examples() {
        let p = AudiogramProfile::age_70();
        let cal = ActiveGainCalibration::standard();
        let d1 = decompose_hl(&p, alpha(1.0), &cal);
        assert!(d1.hl_act.iter().all(|&a| a == 0.0));
        assert_eq!(d1.hl_pas, vec![8.0, 8.0, 9.0, 10.0, 19.0, 43.0, 59.0]);
        let d05 = decompose_hl(&p, alpha(0.5), &cal);
        assert_eq!((d05.hl_act[5], d05.hl_pas[5]), (27.0, 16.0));
        let d0 = decompose_hl(&p, alpha(0.0), &cal);
        assert_eq!((d0.hl_act[6], d0.hl_pas[6]), (44.0, 15.0));
        let z = decompose_hl(&AudiogramProfile::normal(), alpha(0.3), &cal);
        assert!(z.hl_act.iter().chain(&z.hl_pas).all(|&v| v == 0.0));
    }

    #[test]
    fn cap_is_continuous_between_grid_points() {
        let cal = ActiveGainCalibration::<f64>::standard();
        assert_eq!(cal.c_cap_at(8000.0), 44.0);
        assert_eq!(cal.c_cap_at(4000.0), 54.0);
        let mid = cal.c_cap_at((4000.0f64 * 8000.0).sqrt());
        assert!((mid - 49.0).abs() < 1e-9);
    }

    #[test]
    fn reduction_examples() {
        let p = AudiogramProfile::age_70();
        let cal = ActiveGainCalibration::standard();
        let d05 = decompose_hl(&p, alpha(0.5), &cal);
        assert_eq!(reduction_active(&d05, &cal, 4000.0, 0.0), 27.0);
        assert_eq!(reduction_active(&d05, &cal, 4000.0, 100.0), 0.0);
        assert_eq!(reduction_active(&d05, &cal, 4000.0, 130.0), 0.0);
        assert_eq!(reduction_active(&d05, &cal, 4000.0, 50.0), 13.5);
        assert_eq!(reduction_total(&d05, &cal, 4000.0, 100.0), 16.0);
        assert_eq!(reduction_total(&d05, &cal, 4000.0, -20.0), 43.0);

        let d1 = decompose_hl(&p, alpha(1.0), &cal);
        for level in [-20.0, 0.0, 40.0, 70.0, 120.0] {
            assert_eq!(reduction_total(&d1, &cal, 8000.0, level), 59.0);
        }
        let z = decompose_hl(&AudiogramProfile::normal(), alpha(0.0), &cal);
        assert_eq!(reduction_total(&z, &cal, 3000.0, 55.0), 0.0);
    }

    #[test]
    fn calibration_validation_and_json() {
        let cal = ActiveGainCalibration::<f64>::standard();
        let json = serde_json::to_string(&cal).unwrap();
        assert!(json.contains("null"));
        let back: ActiveGainCalibration<f64> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cal);
        let bad = ActiveGainCalibration::new(vec![1000.0], vec![10.0], vec![None], vec![100.0], 100.0);
        assert!(bad.is_err());
        let neg = ActiveGainCalibration::new(vec![1000.0], vec![-1.0], vec![None], vec![0.0], 100.0);
        assert!(neg.is_err());
    }

    #[test]
    fn level_reference_identity() {
        let r = LevelReference::<f64>::identity();
        assert_eq!(r.spl_to_hl(3000.0, 42.5), 42.5);
        let r = LevelReference::new(vec![500.0f64, 2000.0], vec![10.0, 0.0]).unwrap();
        assert!((r.spl_to_hl(1000.0, 40.0) - 35.0).abs() < 1e-12);
    }
}
