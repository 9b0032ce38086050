use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use hls_lab_core::experiment::{build_pairs, PassThreshold};
use hls_lab_service::{ExperimentDesign, ExperimentStore};
use serde::Deserialize;

use super::prepare::Manifest;
use crate::config::RunConfig;

#[derive(Debug, Clone, Args)]
pub struct BuildArgs {
    /// Manifest written by `prepare`.
    #[arg(long, value_name = "FILE")]
    pub manifest: PathBuf,
    /// Item lists per phase (see README).
    #[arg(long, value_name = "FILE")]
    pub design: PathBuf,
}

/// Design file; the stimulus kind and reference come from the manifest.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct DesignFile {
    /// Defaults to every condition in the manifest.
    #[serde(default)]
    conditions: Option<Vec<String>>,
    #[serde(default)]
    training_conditions: Vec<String>,
    #[serde(default)]
    training_items: Vec<String>,
    #[serde(default)]
    practice_items: Vec<String>,
    main_items: Vec<String>,
    #[serde(default)]
    practice_limit: Option<usize>,
    /// Defaults to the stimulus kind's threshold.
    #[serde(default)]
    pass_threshold: Option<PassThreshold>,
}

fn stimuli_from(manifest: &Manifest, base: &Path) -> BTreeMap<String, BTreeMap<String, PathBuf>> {
    manifest
        .items
        .iter()
        .map(|item| {
            let row = item.outputs.iter().map(|o| (o.label.clone(), base.join(&o.file))).collect();
            (item.id.clone(), row)
        })
        .collect()
}

pub fn build(cfg: &RunConfig, args: &BuildArgs) -> Result<()> {
    let store_dir = cfg.store()?;
    let manifest = Manifest::load(&args.manifest)?;
    let text = std::fs::read_to_string(&args.design).with_context(|| format!("reading {}", args.design.display()))?;
    let file: DesignFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", args.design.display()))?;
    let conditions = file
        .conditions
        .unwrap_or_else(|| manifest.conditions.iter().map(|c| c.label.clone()).collect());
    let reference = cfg.reference.clone().unwrap_or_else(|| manifest.reference.clone());
    if !file.training_items.is_empty() && file.training_conditions.is_empty() {
        bail!("training_items given without training_conditions");
    }
    let design = ExperimentDesign {
        kind: manifest.kind,
        conditions,
        reference,
        training_conditions: file.training_conditions,
        training_items: file.training_items,
        practice_items: file.practice_items,
        main_items: file.main_items,
        practice_limit: file.practice_limit,
        pass_threshold: file.pass_threshold.unwrap_or_else(|| PassThreshold::for_kind(manifest.kind)),
        seed: cfg.seed,
    };
    let base = args.manifest.parent().unwrap_or(Path::new("."));
    let store = ExperimentStore::create(store_dir, design, &stimuli_from(&manifest, base))?;
    let d = store.design();
    let pairs = build_pairs(&d.conditions).len();
    let training = d.training_items.len() * d.training_conditions.len() * 2;
    let practice = d.practice_items.len() * pairs;
    let practice = d.practice_limit.map_or(practice, |n| practice.min(n));
    println!("store: {}", store.root().display());
    println!("seed: {}", d.seed);
    println!("conditions: {} ({} ordered pairs)", d.conditions.len(), pairs);
    println!("training trials: {training} (pass at {}/{})", d.pass_threshold.required, d.pass_threshold.out_of);
    println!("practice trials: {practice}");
    println!("main trials: {} ({} items)", d.main_items.len() * pairs, d.main_items.len());
    Ok(())
}

pub fn enroll(cfg: &RunConfig, participant: &str) -> Result<()> {
    let store = ExperimentStore::open(cfg.store()?)?;
    let e = store.enroll(participant, None)?;
    println!("{}", serde_json::to_string_pretty(&e)?);
    Ok(())
}

pub fn serve(cfg: &RunConfig, bind: &str) -> Result<()> {
    let store = ExperimentStore::open(cfg.store()?)?;
    let addr: SocketAddr = format!("{bind}:{}", cfg.port)
        .parse()
        .with_context(|| format!("bad bind address '{bind}'"))?;
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(hls_lab_service::serve(store, addr))?;
    Ok(())
}
