//! Paired-comparison session plans, response records and training grading.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HlsError, Result};
use crate::stimuli::StimulusKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Training,
    Practice,
    Main,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Training => "training",
            Phase::Practice => "practice",
            Phase::Main => "main",
        })
    }
}

/// Which interval the listener judged to contain more distortion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Choice {
    First,
    Second,
}

/// Pass iff `correct / total >= required / out_of`, compared exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassThreshold {
    pub required: u32,
    pub out_of: u32,
}

impl PassThreshold {
    pub const SPEECH: PassThreshold = PassThreshold { required: 10, out_of: 12 };
    pub const INSTRUMENT: PassThreshold = PassThreshold { required: 7, out_of: 8 };

    pub fn for_kind(kind: StimulusKind) -> Self {
        match kind {
            StimulusKind::Speech => Self::SPEECH,
            StimulusKind::Instrument => Self::INSTRUMENT,
        }
    }

    pub fn passes(self, correct: usize, total: usize) -> bool {
        total > 0 && (correct as u64) * u64::from(self.out_of) >= u64::from(self.required) * total as u64
    }

    pub fn fraction(self) -> f64 {
        f64::from(self.required) / f64::from(self.out_of)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trial {
    pub item: String,
    pub first: String,
    pub second: String,
    /// Correct response, known for training trials only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Choice>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionPlan {
    pub session_id: String,
    pub phase: Phase,
    pub seed: u64,
    pub trials: Vec<Trial>,
    #[serde(default)]
    pub pass_threshold: Option<PassThreshold>,
    #[serde(default)]
    pub feedback: bool,
}

impl SessionPlan {
    /// A repeat of this plan under a new id, reshuffled with `seed`.
    pub fn repeat(&self, session_id: impl Into<String>, seed: u64) -> SessionPlan {
        let mut trials = self.trials.clone();
        trials.sort_by(|a, b| (&a.item, &a.first, &a.second).cmp(&(&b.item, &b.first, &b.second)));
        trials.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        SessionPlan {
            session_id: session_id.into(),
            seed,
            trials,
            ..self.clone()
        }
    }
}

/// Every ordered pair of distinct conditions, `k (k - 1)` in total.
pub fn build_pairs<S: AsRef<str>>(conditions: &[S]) -> Vec<(String, String)> {
    let mut pairs = Vec::with_capacity(conditions.len() * conditions.len().saturating_sub(1));
    for (i, a) in conditions.iter().enumerate() {
        for (j, b) in conditions.iter().enumerate() {
            if i != j {
                pairs.push((a.as_ref().to_string(), b.as_ref().to_string()));
            }
        }
    }
    pairs
}

fn shuffled(mut trials: Vec<Trial>, seed: u64) -> Vec<Trial> {
    trials.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    trials
}

fn check_distinct<S: AsRef<str>>(what: &str, names: &[S]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for n in names {
        if !seen.insert(n.as_ref()) {
            return Err(HlsError::InvalidInput(format!("duplicate {what} '{}'", n.as_ref())));
        }
    }
    Ok(())
}

/// Items x ordered condition pairs, shuffled by a seeded permutation.
pub fn build_session<S: AsRef<str>>(
    session_id: &str,
    items: &[S],
    conditions: &[S],
    phase: Phase,
    seed: u64,
) -> Result<SessionPlan> {
    if items.is_empty() || conditions.is_empty() {
        return Err(HlsError::InvalidInput("a session needs at least one item and one condition".into()));
    }
    check_distinct("item", items)?;
    check_distinct("condition", conditions)?;
    let pairs = build_pairs(conditions);
    let trials = items
        .iter()
        .flat_map(|item| {
            pairs.iter().map(move |(a, b)| Trial {
                item: item.as_ref().to_string(),
                first: a.clone(),
                second: b.clone(),
                answer: None,
            })
        })
        .collect();
    Ok(SessionPlan {
        session_id: session_id.to_string(),
        phase,
        seed,
        trials: shuffled(trials, seed),
        pass_threshold: None,
        feedback: false,
    })
}

/// Training: each item pairs the clean `reference` with every distorted
/// condition in both orders; the distorted interval is the correct answer.
pub fn build_training_session<S: AsRef<str>>(
    session_id: &str,
    items: &[S],
    reference: &str,
    distorted: &[S],
    threshold: PassThreshold,
    seed: u64,
) -> Result<SessionPlan> {
    if items.is_empty() || distorted.is_empty() {
        return Err(HlsError::InvalidInput(
            "training needs at least one item and one distorted condition".into(),
        ));
    }
    if distorted.iter().any(|d| d.as_ref() == reference) {
        return Err(HlsError::InvalidInput("reference listed among distorted conditions".into()));
    }
    check_distinct("item", items)?;
    check_distinct("condition", distorted)?;
    let mut trials = Vec::new();
    for item in items {
        for d in distorted {
            let item = item.as_ref().to_string();
            trials.push(Trial {
                item: item.clone(),
                first: reference.to_string(),
                second: d.as_ref().to_string(),
                answer: Some(Choice::Second),
            });
            trials.push(Trial {
                item,
                first: d.as_ref().to_string(),
                second: reference.to_string(),
                answer: Some(Choice::First),
            });
        }
    }
    Ok(SessionPlan {
        session_id: session_id.to_string(),
        phase: Phase::Training,
        seed,
        trials: shuffled(trials, seed),
        pass_threshold: Some(threshold),
        feedback: true,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub session_id: String,
    pub participant_id: String,
    pub trial_index: usize,
    pub item: String,
    /// Conditions in presentation order.
    pub pair: (String, String),
    pub choice: Choice,
    /// Unix time in milliseconds.
    pub timestamp: u64,
    pub phase: Phase,
}

impl ResponseRecord {
    /// Label of the condition judged more distorted.
    pub fn chosen(&self) -> &str {
        match self.choice {
            Choice::First => &self.pair.0,
            Choice::Second => &self.pair.1,
        }
    }

    pub fn other(&self) -> &str {
        match self.choice {
            Choice::First => &self.pair.1,
            Choice::Second => &self.pair.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingGrade {
    pub correct: usize,
    pub total: usize,
    pub passed: bool,
}

/// Grades the responses of one training session against its answer key.
pub fn grade_training(responses: &[ResponseRecord], plan: &SessionPlan, threshold: PassThreshold) -> Result<TrainingGrade> {
    let mut by_trial: BTreeMap<usize, &ResponseRecord> = BTreeMap::new();
    for r in responses.iter().filter(|r| r.session_id == plan.session_id) {
        if r.trial_index >= plan.trials.len() {
            return Err(HlsError::InvalidInput(format!(
                "response to trial {} but the session has {} trials",
                r.trial_index,
                plan.trials.len()
            )));
        }
        if by_trial.insert(r.trial_index, r).is_some() {
            return Err(HlsError::InvalidInput(format!("trial {} answered more than once", r.trial_index)));
        }
    }
    let missing: Vec<usize> = (0..plan.trials.len()).filter(|i| !by_trial.contains_key(i)).collect();
    if !missing.is_empty() {
        return Err(HlsError::Incomplete { missing });
    }
    let mut correct = 0;
    for (i, trial) in plan.trials.iter().enumerate() {
        let answer = trial
            .answer
            .ok_or_else(|| HlsError::InvalidInput(format!("trial {i} has no answer key")))?;
        if by_trial[&i].choice == answer {
            correct += 1;
        }
    }
    let total = plan.trials.len();
    Ok(TrainingGrade {
        correct,
        total,
        passed: threshold.passes(correct, total),
    })
}
