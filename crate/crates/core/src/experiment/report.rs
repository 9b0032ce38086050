//! Response-log parsing and the end-to-end score report.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::scoring::{
    aggregate_counts, mean_ci, thurstone_scores, tukey_hsd, ConditionSummary, EmptyCells, HsdTable, ScalingOptions,
};
use super::session::{Phase, ResponseRecord};
use crate::error::{HlsError, Result};
use crate::scalar::Real;

/// Parses a JSON-lines response log. Blank lines are skipped; every malformed
/// line is reported by its 1-based number.
pub fn parse_response_log(text: &str) -> Result<Vec<ResponseRecord>> {
    let mut records = Vec::new();
    let mut bad = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResponseRecord>(line) {
            Ok(r) => records.push(r),
            Err(e) => bad.push(format!("line {}: {e}", n + 1)),
        }
    }
    if !bad.is_empty() {
        return Err(HlsError::InvalidInput(format!("malformed response log\n  {}", bad.join("\n  "))));
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScoreOptions<T: Real> {
    pub scaling: ScalingOptions,
    pub level: T,
    pub q_crit: Option<T>,
}

impl<T: Real> Default for ScoreOptions<T> {
    fn default() -> Self {
        ScoreOptions {
            scaling: ScalingOptions {
                empty_cells: EmptyCells::Neutral,
                ..Default::default()
            },
            level: T::lit(0.99),
            q_crit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ListenerScores<T: Real> {
    pub participant_id: String,
    pub trials: usize,
    pub scores: Vec<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ScoreReport<T: Real> {
    pub conditions: Vec<String>,
    pub listeners: Vec<ListenerScores<T>>,
    pub means: Vec<T>,
    /// Absent with fewer than two listeners.
    pub ci: Option<ConditionSummary<T>>,
    pub hsd: Option<HsdTable<T>>,
    pub warnings: Vec<String>,
}

/// Main-phase condition labels in order of first appearance.
pub fn conditions_in_log(responses: &[ResponseRecord]) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for r in responses.iter().filter(|r| r.phase == Phase::Main) {
        for c in [&r.pair.0, &r.pair.1] {
            if seen.insert(c.clone()) {
                out.push(c.clone());
            }
        }
    }
    out
}

/// Aggregates, scales and summarizes a response log.
pub fn score_responses<T: Real>(
    responses: &[ResponseRecord],
    conditions: &[String],
    options: &ScoreOptions<T>,
) -> Result<ScoreReport<T>> {
    if conditions.len() < 2 {
        return Err(HlsError::InvalidInput("scoring needs at least 2 conditions".into()));
    }
    let mut keys = HashSet::new();
    for r in responses {
        if !keys.insert((&r.session_id, &r.participant_id, r.trial_index)) {
            return Err(HlsError::InvalidInput(format!(
                "duplicate response: session '{}', participant '{}', trial {}",
                r.session_id, r.participant_id, r.trial_index
            )));
        }
    }
    let matrices = aggregate_counts(responses, conditions)?;
    if matrices.is_empty() {
        return Err(HlsError::InvalidInput("no main-phase responses to score".into()));
    }
    let mut warnings = Vec::new();
    let trial_counts: BTreeSet<usize> = matrices
        .values()
        .map(|m| (0..m.len()).map(|i| (0..m.len()).map(|j| m.count(i, j) as usize).sum::<usize>()).sum())
        .collect();
    if trial_counts.len() > 1 {
        warnings.push(format!(
            "partial log: listeners answered different numbers of main trials ({:?})",
            trial_counts
        ));
    }
    let mut listeners = Vec::with_capacity(matrices.len());
    for (pid, m) in &matrices {
        let empty = m.empty_cells();
        if !empty.is_empty() {
            let pairs: Vec<String> = empty
                .iter()
                .map(|&(i, j)| format!("{}/{}", conditions[i], conditions[j]))
                .collect();
            warnings.push(format!("partial log: listener '{pid}' has no trials for {}", pairs.join(", ")));
        } else if !m.is_balanced() {
            warnings.push(format!("partial log: listener '{pid}' has unequal trial counts across pairs"));
        }
        let trials = (0..m.len()).flat_map(|i| (0..m.len()).map(move |j| (i, j))).map(|(i, j)| m.count(i, j) as usize).sum();
        listeners.push(ListenerScores {
            participant_id: pid.clone(),
            trials,
            scores: thurstone_scores(m, options.scaling)?,
        });
    }
    let table: Vec<Vec<T>> = listeners.iter().map(|l| l.scores.clone()).collect();
    let (ci, hsd, means) = if table.len() >= 2 {
        let ci = mean_ci(&table, options.level)?;
        let hsd = match options.q_crit {
            Some(q) => Some(tukey_hsd(&table, Some(q))?),
            None => None,
        };
        let means = ci.means.clone();
        (Some(ci), hsd, means)
    } else {
        warnings.push("only one listener: confidence intervals and HSD omitted".into());
        (None, None, table[0].clone())
    };
    Ok(ScoreReport {
        conditions: conditions.to_vec(),
        listeners,
        means,
        ci,
        hsd,
        warnings,
    })
}

impl<T: Real> ScoreReport<T> {
    /// Plain-text table: one row per condition with mean, CI half-width and
    /// the conditions it differs from under HSD.
    pub fn to_text(&self) -> String {
        let width = self.conditions.iter().map(String::len).max().unwrap_or(0).max(9);
        let mut s = String::new();
        let level = self.ci.as_ref().map(|c| c.level.as_f64() * 100.0);
        let _ = writeln!(
            s,
            "{:<width$}  {:>8}  {:>10}  {}",
            "condition",
            "mean",
            level.map_or("CI".to_string(), |l| format!("{l:.0}% CI")),
            if self.hsd.is_some() { "differs from (HSD)" } else { "" }
        );
        for (c, name) in self.conditions.iter().enumerate() {
            let ci = self
                .ci
                .as_ref()
                .map_or("-".to_string(), |ci| format!("±{:.3}", ci.half_widths[c].as_f64()));
            let flags = self.hsd.as_ref().map_or(String::new(), |h| {
                h.pairs
                    .iter()
                    .filter(|p| p.significant && (p.i == c || p.j == c))
                    .map(|p| self.conditions[if p.i == c { p.j } else { p.i }].as_str())
                    .collect::<Vec<_>>()
                    .join(", ")
            });
            let _ = writeln!(s, "{:<width$}  {:>8.3}  {:>10}  {}", name, self.means[c].as_f64(), ci, flags);
        }
        let _ = writeln!(s, "listeners: {}", self.listeners.len());
        if let Some(h) = &self.hsd {
            let _ = writeln!(
                s,
                "HSD: q_crit {:.3}, MS_error {:.5}, df {}",
                h.q_crit.as_f64(),
                h.ms_error.as_f64(),
                h.df_error
            );
        }
        s.trim_end().to_string() + "\n"
    }
}
