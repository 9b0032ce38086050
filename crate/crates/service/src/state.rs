//! Participant state, rebuilt from the response log alone.
//!
//! A participant moves training -> practice -> main -> done. Completing a
//! session advances immediately; a failed training attempt starts a fresh,
//! reshuffled attempt of the same trials.

use std::collections::BTreeSet;
use std::fmt;

use hls_lab_core::experiment::{grade_training, Choice, Phase, ResponseRecord, SessionPlan, TrainingGrade};
use serde::{Deserialize, Serialize};

use crate::error::{Result, StoreError};
use crate::store::{Enrollment, ExperimentStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Training,
    Practice,
    Main,
    Done,
}

impl From<Phase> for Stage {
    fn from(p: Phase) -> Self {
        match p {
            Phase::Training => Stage::Training,
            Phase::Practice => Stage::Practice,
            Phase::Main => Stage::Main,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Training => "training",
            Stage::Practice => "practice",
            Stage::Main => "main",
            Stage::Done => "done",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticipantState {
    pub participant_id: String,
    pub stage: Stage,
    /// Active session; `None` once done.
    pub session_id: Option<String>,
    /// 1-based; 0 when the design has no training.
    pub training_attempt: u32,
    /// Trial indices answered in the active session.
    pub answered: BTreeSet<usize>,
    pub total_trials: usize,
    /// Correct answers so far in the current training attempt.
    pub training_correct: usize,
    pub training_history: Vec<TrainingGrade>,
    /// Records accepted over all sessions.
    pub responses: usize,
    #[serde(skip)]
    enrollment: Enrollment,
    #[serde(skip)]
    plan: Option<SessionPlan>,
    #[serde(skip)]
    records: Vec<ResponseRecord>,
}

/// Outcome of one accepted response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Accepted {
    /// Whether the answer was correct, for sessions that give feedback.
    pub correct: Option<bool>,
    /// Set when this response completed a session.
    pub completed: Option<Stage>,
}

impl ParticipantState {
    /// State of a freshly enrolled participant.
    pub fn start(store: &ExperimentStore, enrollment: Enrollment) -> Result<Self> {
        let mut s = ParticipantState {
            participant_id: enrollment.participant_id.clone(),
            stage: Stage::Training,
            session_id: None,
            training_attempt: 0,
            answered: BTreeSet::new(),
            total_trials: 0,
            training_correct: 0,
            training_history: Vec::new(),
            responses: 0,
            enrollment,
            plan: None,
            records: Vec::new(),
        };
        if s.enrollment.training.is_some() {
            s.training_attempt = 1;
            let plan = store.training_session(&s.enrollment, 1)?;
            s.enter(Stage::Training, Some(plan));
        } else {
            s.enter_after_training(store)?;
        }
        Ok(s)
    }

    /// Rebuilds the state by replaying the participant's log.
    pub fn replay(store: &ExperimentStore, participant_id: &str) -> Result<Self> {
        let enrollment = store.enrollment(participant_id)?;
        let mut s = Self::start(store, enrollment)?;
        let path = store.log_path(participant_id).display().to_string();
        for (n, record) in store.read_log(participant_id)?.into_iter().enumerate() {
            s.check(&record).map_err(|e| StoreError::CorruptLog {
                path: path.clone(),
                line: n + 1,
                reason: e.to_string(),
            })?;
            s.apply(store, record)?;
        }
        Ok(s)
    }

    pub fn plan(&self) -> Option<&SessionPlan> {
        self.plan.as_ref()
    }

    pub fn is_complete(&self) -> bool {
        self.plan.as_ref().is_some_and(|p| self.answered.len() == p.trials.len())
    }

    /// Validates a response against the active session without changing state.
    pub fn check(&self, record: &ResponseRecord) -> Result<()> {
        if record.participant_id != self.participant_id {
            return Err(StoreError::BadRequest(format!(
                "record belongs to participant '{}'",
                record.participant_id
            )));
        }
        let Some(plan) = &self.plan else {
            return Err(StoreError::Conflict(format!("participant '{}' has finished", self.participant_id)));
        };
        if record.session_id != plan.session_id {
            let answered_before = self
                .records
                .iter()
                .any(|r| r.session_id == record.session_id && r.trial_index == record.trial_index);
            return Err(StoreError::Conflict(if answered_before {
                format!("trial {} of session '{}' already answered", record.trial_index, record.session_id)
            } else {
                format!("session '{}' is not active; the active session is '{}'", record.session_id, plan.session_id)
            }));
        }
        let Some(trial) = plan.trials.get(record.trial_index) else {
            return Err(StoreError::BadRequest(format!(
                "trial index {} out of range (session has {} trials)",
                record.trial_index,
                plan.trials.len()
            )));
        };
        if self.answered.contains(&record.trial_index) {
            return Err(StoreError::Conflict(format!(
                "trial {} of session '{}' already answered",
                record.trial_index, record.session_id
            )));
        }
        if record.phase != plan.phase
            || record.item != trial.item
            || record.pair != (trial.first.clone(), trial.second.clone())
        {
            return Err(StoreError::BadRequest(format!(
                "record does not match trial {} of session '{}'",
                record.trial_index, record.session_id
            )));
        }
        Ok(())
    }

    /// Fills in the plan-derived fields of a response to the active session.
    pub fn record_for(&self, session_id: &str, trial_index: usize, choice: Choice, timestamp: u64) -> Result<ResponseRecord> {
        let plan = self
            .plan
            .as_ref()
            .ok_or_else(|| StoreError::Conflict(format!("participant '{}' has finished", self.participant_id)))?;
        let trial = plan.trials.get(trial_index);
        let record = ResponseRecord {
            session_id: session_id.to_string(),
            participant_id: self.participant_id.clone(),
            trial_index,
            item: trial.map(|t| t.item.clone()).unwrap_or_default(),
            pair: trial.map(|t| (t.first.clone(), t.second.clone())).unwrap_or_default(),
            choice,
            timestamp,
            phase: plan.phase,
        };
        self.check(&record)?;
        Ok(record)
    }

    /// Applies a record that passed [`check`](Self::check), advancing the
    /// phase if it completed the active session.
    pub fn apply(&mut self, store: &ExperimentStore, record: ResponseRecord) -> Result<Accepted> {
        let plan = self.plan.as_ref().expect("checked record implies an active session");
        let correct = if plan.feedback {
            plan.trials[record.trial_index].answer.map(|a| a == record.choice)
        } else {
            None
        };
        if plan.phase == Phase::Training && correct == Some(true) {
            self.training_correct += 1;
        }
        self.answered.insert(record.trial_index);
        self.records.push(record);
        self.responses += 1;
        let completed = if self.is_complete() {
            let stage = self.stage;
            self.advance_phase(store)?;
            Some(stage)
        } else {
            None
        };
        Ok(Accepted { correct, completed })
    }

    /// Moves past the completed active session.
    pub fn advance_phase(&mut self, store: &ExperimentStore) -> Result<Stage> {
        if !self.is_complete() {
            return Err(StoreError::Conflict(format!(
                "session '{}' is incomplete ({}/{} trials)",
                self.session_id.as_deref().unwrap_or("-"),
                self.answered.len(),
                self.total_trials
            )));
        }
        let plan = self.plan.take().expect("complete implies a plan");
        match self.stage {
            Stage::Training => {
                let threshold = plan.pass_threshold.unwrap_or(self.enrollment.pass_threshold);
                let grade = grade_training(&self.records, &plan, threshold)?;
                self.training_history.push(grade);
                if grade.passed {
                    self.enter_after_training(store)?;
                } else {
                    self.training_attempt += 1;
                    let next = store.training_session(&self.enrollment, self.training_attempt)?;
                    self.enter(Stage::Training, Some(next));
                }
            }
            Stage::Practice => {
                let main = store.session(&self.enrollment.main)?;
                self.enter(Stage::Main, Some(main));
            }
            Stage::Main | Stage::Done => self.enter(Stage::Done, None),
        }
        Ok(self.stage)
    }

    fn enter_after_training(&mut self, store: &ExperimentStore) -> Result<()> {
        match self.enrollment.practice.clone() {
            Some(id) => self.enter(Stage::Practice, Some(store.session(&id)?)),
            None => self.enter(Stage::Main, Some(store.session(&self.enrollment.main)?)),
        }
        Ok(())
    }

    fn enter(&mut self, stage: Stage, plan: Option<SessionPlan>) {
        self.stage = stage;
        self.session_id = plan.as_ref().map(|p| p.session_id.clone());
        self.total_trials = plan.as_ref().map_or(0, |p| p.trials.len());
        self.answered.clear();
        self.training_correct = 0;
        self.plan = plan;
    }
}
