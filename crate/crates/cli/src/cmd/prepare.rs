//! `prepare`: source WAVs -> one float WAV per condition plus a manifest.
//!
//! ```text
//! <out>/manifest.json
//! <out>/<item>/<label>.wav
//! ```

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hls_lab_core::stimuli::{build_condition, check_unique_labels, prepare_item, Condition, ConditionSpec, PrepareOptions, StimulusKind};
use hls_lab_core::wav::{read_wav, write_wav, WavFormat, WavInfo};
use serde::{Deserialize, Serialize};

use super::write_json;
use crate::config::RunConfig;

fn parse_kind(s: &str) -> Result<StimulusKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown stimulus kind '{s}' (speech or instrument)"))
}

#[derive(Debug, Clone, Args)]
pub struct PrepareArgs {
    /// JSON array of conditions: `{label, method, alpha?, profile?, dir?}`.
    #[arg(long, value_name = "FILE")]
    pub conditions: PathBuf,
    #[arg(long, short, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value = "speech", value_parser = parse_kind)]
    pub kind: StimulusKind,
    /// Room impulse response applied before level setting.
    #[arg(long, value_name = "WAV")]
    pub rir: Option<PathBuf>,
    /// Input level before simulation, dB SPL.
    #[arg(long, default_value_t = 70.0)]
    pub input_leq: f64,
    /// Source WAVs; the file stem becomes the item id.
    #[arg(required = true)]
    pub items: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputEntry {
    pub label: String,
    /// Relative to the manifest.
    pub file: PathBuf,
    pub leq_db: f64,
    pub lsd_db: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemEntry {
    pub id: String,
    pub source: PathBuf,
    pub input_leq_db: f64,
    pub outputs: Vec<OutputEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub kind: StimulusKind,
    pub reference: String,
    pub cal_offset: f64,
    pub conditions: Vec<ConditionSpec>,
    pub items: Vec<ItemEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn item_id(path: &Path) -> Result<String> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .with_context(|| format!("cannot derive an item id from {}", path.display()))?;
    Ok(id.to_string())
}

pub fn run(cfg: &RunConfig, args: &PrepareArgs) -> Result<()> {
    let reference = cfg.reference.clone().context("prepare needs --reference <condition label>")?;
    let text = std::fs::read_to_string(&args.conditions).with_context(|| format!("reading {}", args.conditions.display()))?;
    let specs: Vec<ConditionSpec> = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.conditions.display()))?;
    check_unique_labels(&specs)?;
    if !specs.iter().any(|s| s.label == reference) {
        bail!("reference '{reference}' is not among the conditions");
    }
    let mut ids = HashSet::new();
    for p in &args.items {
        if !ids.insert(item_id(p)?) {
            bail!("two inputs share the item id '{}'", item_id(p)?);
        }
    }
    let base = cfg.simulator_config()?;
    let rir = match &args.rir {
        Some(p) => {
            let a = read_wav::<f64>(p).with_context(|| format!("reading {}", p.display()))?;
            Some((a.samples, a.info.sample_rate))
        }
        None => None,
    };
    let options = PrepareOptions {
        input_leq_db: args.input_leq,
        calibration_db: cfg.cal_offset,
    };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut by_rate: BTreeMap<u32, Vec<Condition<f64>>> = BTreeMap::new();
    let mut items = Vec::with_capacity(args.items.len());
    for path in &args.items {
        let id = item_id(path)?;
        let audio = read_wav::<f64>(path).with_context(|| format!("reading {}", path.display()))?;
        let rate = audio.info.sample_rate;
        let conds = match by_rate.entry(rate) {
            Entry::Occupied(e) => e.into_mut(),
            Entry::Vacant(e) => e.insert(specs.iter().map(|s| build_condition(s, &base, rate)).collect::<Result<Vec<_>, _>>()?),
        };
        let item = prepare_item(
            &id,
            args.kind,
            &audio.samples,
            rate,
            conds,
            &reference,
            rir.as_ref().map(|(h, r)| (h.as_slice(), *r)),
            options,
        )
        .with_context(|| format!("item '{id}'"))?;
        let dir = args.out.join(&id);
        std::fs::create_dir_all(&dir)?;
        let mut outputs = Vec::with_capacity(item.outputs.len());
        for o in &item.outputs {
            let rel = PathBuf::from(&id).join(format!("{}.wav", o.label));
            write_wav(args.out.join(&rel), &o.samples, WavInfo { sample_rate: rate, format: WavFormat::Float32 })?;
            outputs.push(OutputEntry {
                label: o.label.clone(),
                file: rel,
                leq_db: o.leq_db,
                lsd_db: o.lsd_db,
            });
        }
        eprintln!("prepared {id}: {} conditions at {:.2} dB SPL", outputs.len(), outputs[0].leq_db);
        items.push(ItemEntry {
            id,
            source: path.clone(),
            input_leq_db: item.input_leq_db,
            outputs,
        });
    }
    let manifest = Manifest {
        seed: cfg.seed,
        kind: args.kind,
        reference,
        cal_offset: cfg.cal_offset,
        conditions: specs,
        items,
    };
    let path = args.out.join("manifest.json");
    write_json(&path, &manifest)?;
    println!("{}", path.display());
    Ok(())
}
