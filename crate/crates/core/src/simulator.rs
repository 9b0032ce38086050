//! End-to-end hearing-loss simulation: analysis, level estimation, gain
//! trajectory, then one of the two synthesis back-ends.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audiogram::{
    decompose_hl, reduction_total, ActiveGainCalibration, AudiogramProfile, CompressionHealth, HLDecomposition,
    LevelReference,
};
use crate::error::{HlsError, Result};
use crate::filterbank::{design_filterbank, estimate_levels, Filterbank, FilterbankSpec, DEFAULT_CALIBRATION_DB};
use crate::scalar::Real;
use crate::synthesis::{
    compute_gain_trajectory_with, design_minphase_fir, synth_dtvf, synth_fbas, GainTrajectory, MinPhaseFilter,
    SynthesisSettings,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Direct time-varying minimum-phase filter with overlap-add.
    Dtvf,
    /// Filterbank analysis/synthesis.
    Fbas,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Dtvf => "dtvf",
            Method::Fbas => "fbas",
        })
    }
}

impl FromStr for Method {
    type Err = HlsError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dtvf" => Ok(Method::Dtvf),
            "fbas" => Ok(Method::Fbas),
            other => Err(HlsError::Config(format!("unknown method '{other}' (expected dtvf or fbas)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SimulatorConfig<T: Real> {
    pub profile: AudiogramProfile<T>,
    pub alpha: CompressionHealth<T>,
    pub calibration: ActiveGainCalibration<T>,
    pub method: Method,
    pub synthesis: SynthesisSettings,
    /// dB SPL of digital RMS 1.0.
    pub calibration_db: T,
    pub level_reference: LevelReference<T>,
    pub filterbank: FilterbankSpec<T>,
}

impl<T: Real> SimulatorConfig<T> {
    pub fn new(profile: AudiogramProfile<T>, alpha: CompressionHealth<T>, method: Method) -> Self {
        Self {
            profile,
            alpha,
            calibration: ActiveGainCalibration::standard(),
            method,
            synthesis: SynthesisSettings::default(),
            calibration_db: T::lit(DEFAULT_CALIBRATION_DB),
            level_reference: LevelReference::identity(),
            filterbank: FilterbankSpec::default(),
        }
    }
}

pub struct Simulation<T: Real> {
    pub output: Vec<T>,
    pub trajectory: GainTrajectory<T>,
}

pub struct Simulator<T: Real> {
    config: SimulatorConfig<T>,
    decomposition: HLDecomposition<T>,
    bank: Filterbank<T>,
}

impl<T: Real> Simulator<T> {
    pub fn new(mut config: SimulatorConfig<T>, sample_rate: u32) -> Result<Self> {
        config.filterbank.sample_rate = sample_rate;
        config.synthesis.ola::<T>().samples(sample_rate)?;
        let bank = design_filterbank(&config.filterbank)?;
        let decomposition = decompose_hl(&config.profile, config.alpha, &config.calibration);
        Ok(Self {
            config,
            decomposition,
            bank,
        })
    }

    pub fn config(&self) -> &SimulatorConfig<T> {
        &self.config
    }

    pub fn decomposition(&self) -> &HLDecomposition<T> {
        &self.decomposition
    }

    pub fn filterbank(&self) -> &Filterbank<T> {
        &self.bank
    }

    pub fn sample_rate(&self) -> u32 {
        self.bank.sample_rate()
    }

    /// True when no active loss remains, i.e. the simulation is a fixed
    /// linear filter.
    pub fn is_level_independent(&self) -> bool {
        self.decomposition.hl_act.iter().all(|&a| a == T::zero())
    }

    pub fn process(&self, signal: &[T], sample_rate: u32) -> Result<Simulation<T>> {
        let channels = self.bank.analyze(signal, sample_rate)?;
        let ola = self.config.synthesis.ola::<T>();
        let levels = estimate_levels(&channels, ola.frame_hop, ola.frame_len, self.config.calibration_db)?;
        let trajectory = compute_gain_trajectory_with(
            &levels,
            &self.decomposition,
            &self.config.calibration,
            &self.config.level_reference,
        )?;
        let output = match self.config.method {
            Method::Dtvf => synth_dtvf(signal, &trajectory, &ola, sample_rate)?,
            Method::Fbas => synth_fbas(&channels, &trajectory, &self.bank)?,
        };
        Ok(Simulation { output, trajectory })
    }

    /// The single filter every frame uses when the simulation is level
    /// independent; `None` otherwise.
    pub fn linear_filter(&self) -> Result<Option<MinPhaseFilter<T>>> {
        if !self.is_level_independent() {
            return Ok(None);
        }
        let target: Vec<(T, T)> = self
            .bank
            .center_frequencies()
            .iter()
            .map(|&fc| (fc, -reduction_total(&self.decomposition, &self.config.calibration, fc, T::zero())))
            .collect();
        let s = &self.config.synthesis;
        design_minphase_fir(&target, s.fir_len, s.fft_size, self.sample_rate()).map(Some)
    }
}
