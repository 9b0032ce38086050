use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use hls_lab_core::experiment::{conditions_in_log, parse_response_log, score_responses, ScoreOptions};

use super::write_json;
use crate::config::RunConfig;

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// One or more JSON-lines response logs.
    #[arg(required = true)]
    pub logs: Vec<PathBuf>,
    /// Condition order for the report (default: order of first appearance).
    #[arg(long, value_delimiter = ',')]
    pub conditions: Vec<String>,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.99)]
    pub level: f64,
    /// Also write the JSON report here.
    #[arg(long, short, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Print JSON instead of the text table.
    #[arg(long)]
    pub json: bool,
}

pub fn run(cfg: &RunConfig, args: &ScoreArgs) -> Result<()> {
    let mut responses = Vec::new();
    for path in &args.logs {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        responses.extend(parse_response_log(&text).with_context(|| path.display().to_string())?);
    }
    let conditions = if args.conditions.is_empty() { conditions_in_log(&responses) } else { args.conditions.clone() };
    let options = ScoreOptions {
        level: args.level,
        q_crit: cfg.q_crit,
        ..ScoreOptions::default()
    };
    let report = score_responses::<f64>(&responses, &conditions, &options)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(out) = &args.out {
        write_json(out, &report)?;
    }
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    Ok(())
}
