//! Run configuration: defaults, then an optional JSON file, then flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hls_lab_core::stimuli::load_profile;
use hls_lab_core::synthesis::SynthesisSettings;
use hls_lab_core::{CompressionHealth, Method, SimulatorConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Built-in profile name (`70yr`, `normal`) or profile JSON path.
    pub profile: String,
    pub alpha: f64,
    pub method: Method,
    /// dB SPL of a digital RMS of 1.0.
    pub cal_offset: f64,
    pub synthesis: SynthesisSettings,
    pub seed: u64,
    pub reference: Option<String>,
    pub q_crit: Option<f64>,
    pub port: u16,
    pub store: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: "70yr".into(),
            alpha: 1.0,
            method: Method::Dtvf,
            cal_offset: 30.0,
            synthesis: SynthesisSettings::default(),
            seed: 0,
            reference: None,
            q_crit: None,
            port: 8080,
            store: None,
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonFlags {
    /// JSON file with any subset of the configuration fields.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the effective configuration and exit.
    #[arg(long, global = true)]
    pub show_config: bool,
    #[arg(long, global = true, value_name = "NAME|FILE")]
    pub profile: Option<String>,
    /// Compression health, 0 (none) to 1 (healthy).
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// dtvf or fbas.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// dB SPL corresponding to digital RMS 1.0.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub cal_offset: Option<f64>,
    #[arg(long, global = true)]
    pub fir_len: Option<usize>,
    #[arg(long, global = true)]
    pub hop_ms: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub reference: Option<String>,
    /// Studentized-range critical value; enables the HSD table.
    #[arg(long, global = true)]
    pub q_crit: Option<f64>,
    #[arg(long, global = true)]
    pub port: Option<u16>,
    #[arg(long, global = true, env = "HLS_LAB_STORE", value_name = "DIR")]
    pub store: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(flags: &CommonFlags) -> Result<Self> {
        let mut cfg = match &flags.config {
            Some(path) => Self::from_file(path)?,
            None => Self::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = flags.$field.clone() {
                    cfg.$field = v.into();
                }
            };
        }
        set!(profile);
        set!(alpha);
        set!(method);
        set!(cal_offset);
        set!(seed);
        set!(port);
        if let Some(v) = &flags.reference {
            cfg.reference = Some(v.clone());
        }
        if let Some(v) = flags.q_crit {
            cfg.q_crit = Some(v);
        }
        if let Some(v) = &flags.store {
            cfg.store = Some(v.clone());
        }
        if let Some(v) = flags.fir_len {
            cfg.synthesis.fir_len = v;
        }
        if let Some(v) = flags.hop_ms {
            cfg.synthesis.hop_ms = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Checks flag consistency before anything is written.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            bail!("--alpha must lie in [0, 1], got {}", self.alpha);
        }
        if !self.cal_offset.is_finite() {
            bail!("--cal-offset must be finite");
        }
        let s = &self.synthesis;
        if s.fir_len < 2 || s.fir_len > s.fft_size {
            bail!("--fir-len must be between 2 and the design FFT size ({}), got {}", s.fft_size, s.fir_len);
        }
        if !s.fft_size.is_power_of_two() {
            bail!("design FFT size must be a power of two, got {}", s.fft_size);
        }
        if s.hop_ms.is_nan() || s.hop_ms <= 0.0 || s.frame_len_ms.is_nan() || s.frame_len_ms < s.hop_ms {
            bail!("need 0 < hop ({} ms) <= frame length ({} ms)", s.hop_ms, s.frame_len_ms);
        }
        if let Some(q) = self.q_crit {
            if q.is_nan() || q < 0.0 {
                bail!("--q-crit must be non-negative, got {q}");
            }
        }
        Ok(())
    }

    pub fn simulator_config(&self) -> Result<SimulatorConfig<f64>> {
        let profile = load_profile(&self.profile)?;
        let mut cfg = SimulatorConfig::new(profile, CompressionHealth::new(self.alpha)?, self.method);
        cfg.synthesis = self.synthesis.clone();
        cfg.calibration_db = self.cal_offset;
        Ok(cfg)
    }

    pub fn store(&self) -> Result<&Path> {
        self.store
            .as_deref()
            .context("no store directory: pass --store or set HLS_LAB_STORE")
    }
}
