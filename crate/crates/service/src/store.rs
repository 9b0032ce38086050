//! On-disk experiment store.
//!
//! ```text
//! <root>/experiment.json          design shared by every participant
//! <root>/audio/index.json         item -> condition -> token
//! <root>/audio/<token>.wav        stimuli, named only by token
//! <root>/sessions/<id>.json       session plans (with answer keys)
//! <root>/participants/<id>.json   enrollments
//! <root>/logs/<participant>.jsonl append-only response logs
//! ```

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use hls_lab_core::experiment::{
    build_session, build_training_session, PassThreshold, Phase, ResponseRecord, SessionPlan,
};
use hls_lab_core::stimuli::StimulusKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Result, StoreError};

/// Everything needed to derive each participant's sessions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentDesign {
    pub kind: StimulusKind,
    pub conditions: Vec<String>,
    /// Undistorted condition of the training pairs.
    pub reference: String,
    /// Conditions paired with `reference` during training.
    pub training_conditions: Vec<String>,
    pub training_items: Vec<String>,
    pub practice_items: Vec<String>,
    pub main_items: Vec<String>,
    /// Keep only the first N shuffled practice trials.
    #[serde(default)]
    pub practice_limit: Option<usize>,
    pub pass_threshold: PassThreshold,
    pub seed: u64,
}

impl ExperimentDesign {
    pub fn validate(&self) -> Result<()> {
        let known = |c: &String| self.conditions.contains(c);
        if self.conditions.len() < 2 {
            return Err(StoreError::Layout("a design needs at least 2 conditions".into()));
        }
        if !known(&self.reference) {
            return Err(StoreError::Layout(format!("reference '{}' is not a condition", self.reference)));
        }
        if let Some(c) = self.training_conditions.iter().find(|c| !known(c)) {
            return Err(StoreError::Layout(format!("training condition '{c}' is not a condition")));
        }
        if self.main_items.is_empty() {
            return Err(StoreError::Layout("no main-session items".into()));
        }
        if self.pass_threshold.out_of == 0 || self.pass_threshold.required > self.pass_threshold.out_of {
            return Err(StoreError::Layout("pass threshold must satisfy 0 <= required <= out_of, out_of > 0".into()));
        }
        Ok(())
    }

    /// The three session plans of one participant.
    pub fn sessions_for(&self, participant_id: &str, seed: u64) -> Result<Enrollment> {
        self.validate()?;
        let id = |p: &str| format!("{participant_id}-{p}");
        let training = if self.training_items.is_empty() || self.training_conditions.is_empty() {
            None
        } else {
            Some(build_training_session(
                &id("training"),
                &self.training_items,
                &self.reference,
                &self.training_conditions,
                self.pass_threshold,
                seed,
            )?)
        };
        let practice = if self.practice_items.is_empty() {
            None
        } else {
            let mut p = build_session(&id("practice"), &self.practice_items, &self.conditions, Phase::Practice, seed.wrapping_add(1))?;
            if let Some(n) = self.practice_limit {
                p.trials.truncate(n);
            }
            Some(p).filter(|p| !p.trials.is_empty())
        };
        let main = build_session(&id("main"), &self.main_items, &self.conditions, Phase::Main, seed.wrapping_add(2))?;
        Ok(Enrollment {
            participant_id: participant_id.to_string(),
            seed,
            pass_threshold: self.pass_threshold,
            training: training.as_ref().map(|s| s.session_id.clone()),
            practice: practice.as_ref().map(|s| s.session_id.clone()),
            main: main.session_id.clone(),
            plans: [training, practice, Some(main)].into_iter().flatten().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Enrollment {
    pub participant_id: String,
    pub seed: u64,
    pub pass_threshold: PassThreshold,
    pub training: Option<String>,
    pub practice: Option<String>,
    pub main: String,
    /// Written to `sessions/` on enrollment; not part of the participant file.
    #[serde(skip)]
    pub plans: Vec<SessionPlan>,
}

/// Id of the `attempt`-th (1-based) training session.
pub fn training_attempt_id(base: &str, attempt: u32) -> String {
    if attempt <= 1 {
        base.to_string()
    } else {
        format!("{base}~a{attempt}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AudioIndex {
    /// item -> condition -> token
    pub stimuli: BTreeMap<String, BTreeMap<String, String>>,
}

impl AudioIndex {
    pub fn token(&self, item: &str, condition: &str) -> Option<&str> {
        self.stimuli.get(item)?.get(condition).map(String::as_str)
    }
}

/// Identifiers end up in file names: letters, digits, `-`, `_`, `.`, `~`,
/// not starting with a dot.
pub fn check_id(kind: &str, id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.' | '~'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadRequest(format!("invalid {kind} id '{id}'")))
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::Layout(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Layout(format!("{}: {e}", path.display())))
}

/// Writes via a temporary file and rename.
pub fn write_json_atomic<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    {
        let mut f = File::create(&tmp)?;
        serde_json::to_writer_pretty(&mut f, value)?;
        f.write_all(b"\n")?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ExperimentStore {
    root: PathBuf,
    design: ExperimentDesign,
    audio: AudioIndex,
}

impl ExperimentStore {
    /// Creates the directory layout and writes the design and audio index.
    /// `stimuli` maps item -> condition -> source WAV; files are copied under
    /// fresh tokens drawn from the design seed.
    pub fn create(
        root: impl AsRef<Path>,
        design: ExperimentDesign,
        stimuli: &BTreeMap<String, BTreeMap<String, PathBuf>>,
    ) -> Result<Self> {
        design.validate()?;
        let root = root.as_ref().to_path_buf();
        if root.join("experiment.json").exists() {
            return Err(StoreError::Conflict(format!("{} already holds an experiment", root.display())));
        }
        for d in ["audio", "sessions", "participants", "logs"] {
            fs::create_dir_all(root.join(d))?;
        }
        let items = design
            .training_items
            .iter()
            .chain(&design.practice_items)
            .chain(&design.main_items);
        for item in items {
            check_id("item", item)?;
            let row = stimuli
                .get(item)
                .ok_or_else(|| StoreError::Layout(format!("no stimuli for item '{item}'")))?;
            for c in &design.conditions {
                if !row.contains_key(c) {
                    return Err(StoreError::Layout(format!("item '{item}' lacks condition '{c}'")));
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(design.seed ^ 0x5eed_a0d1_0000_0000);
        let mut audio = AudioIndex::default();
        for (item, row) in stimuli {
            for (cond, src) in row {
                let token = format!("{:032x}", rng.random::<u128>());
                fs::copy(src, root.join("audio").join(format!("{token}.wav")))
                    .map_err(|e| StoreError::Layout(format!("{}: {e}", src.display())))?;
                audio.stimuli.entry(item.clone()).or_default().insert(cond.clone(), token);
            }
        }
        write_json_atomic(&root.join("audio").join("index.json"), &audio)?;
        write_json_atomic(&root.join("experiment.json"), &design)?;
        Ok(Self { root, design, audio })
    }

    /// Opens and validates an existing store.
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        if !root.is_dir() {
            return Err(StoreError::Layout(format!("{} is not a directory", root.display())));
        }
        for d in ["audio", "sessions", "participants", "logs"] {
            if !root.join(d).is_dir() {
                return Err(StoreError::Layout(format!("missing {}/", root.join(d).display())));
            }
        }
        let design: ExperimentDesign = read_json(&root.join("experiment.json"))?;
        design.validate()?;
        let audio: AudioIndex = read_json(&root.join("audio").join("index.json"))?;
        for row in audio.stimuli.values() {
            for token in row.values() {
                let p = root.join("audio").join(format!("{token}.wav"));
                if !p.is_file() {
                    return Err(StoreError::Layout(format!("missing audio file {}", p.display())));
                }
            }
        }
        let store = Self { root, design, audio };
        for pid in store.participant_ids()? {
            let e = store.enrollment(&pid)?;
            for id in [e.training.as_deref(), e.practice.as_deref(), Some(e.main.as_str())].into_iter().flatten() {
                store.session(id)?;
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn design(&self) -> &ExperimentDesign {
        &self.design
    }

    pub fn audio(&self) -> &AudioIndex {
        &self.audio
    }

    pub fn audio_path(&self, token: &str) -> Option<PathBuf> {
        let known = self.audio.stimuli.values().any(|row| row.values().any(|t| t == token));
        known.then(|| self.root.join("audio").join(format!("{token}.wav")))
    }

    fn session_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    pub fn log_path(&self, participant_id: &str) -> PathBuf {
        self.root.join("logs").join(format!("{participant_id}.jsonl"))
    }

    pub fn session(&self, id: &str) -> Result<SessionPlan> {
        check_id("session", id).map_err(|_| StoreError::NotFound(format!("session '{id}'")))?;
        let p = self.session_path(id);
        if !p.is_file() {
            return Err(StoreError::NotFound(format!("session '{id}'")));
        }
        read_json(&p)
    }

    pub fn write_session(&self, plan: &SessionPlan) -> Result<()> {
        check_id("session", &plan.session_id)?;
        write_json_atomic(&self.session_path(&plan.session_id), plan)
    }

    /// The plan of training attempt `attempt`, created from the first attempt
    /// (same trials, reshuffled) when it does not exist yet.
    pub fn training_session(&self, enrollment: &Enrollment, attempt: u32) -> Result<SessionPlan> {
        let base = enrollment
            .training
            .as_deref()
            .ok_or_else(|| StoreError::Layout(format!("participant '{}' has no training", enrollment.participant_id)))?;
        let id = training_attempt_id(base, attempt);
        match self.session(&id) {
            Ok(p) => Ok(p),
            Err(StoreError::NotFound(_)) if attempt > 1 => {
                let plan = self.session(base)?.repeat(id, enrollment.seed.wrapping_add(u64::from(attempt)));
                self.write_session(&plan)?;
                Ok(plan)
            }
            Err(e) => Err(e),
        }
    }

    pub fn participant_ids(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("participants"))? {
            let name = entry?.file_name().to_string_lossy().to_string();
            if let Some(id) = name.strip_suffix(".json") {
                ids.push(id.to_string());
            }
        }
        ids.sort();
        Ok(ids)
    }

    pub fn enrollment(&self, participant_id: &str) -> Result<Enrollment> {
        check_id("participant", participant_id).map_err(|_| StoreError::NotFound(format!("participant '{participant_id}'")))?;
        let p = self.root.join("participants").join(format!("{participant_id}.json"));
        if !p.is_file() {
            return Err(StoreError::NotFound(format!("participant '{participant_id}'")));
        }
        read_json(&p)
    }

    /// Enrolls a participant; the seed defaults to design seed + number of
    /// participants already enrolled.
    pub fn enroll(&self, participant_id: &str, seed: Option<u64>) -> Result<Enrollment> {
        check_id("participant", participant_id)?;
        let path = self.root.join("participants").join(format!("{participant_id}.json"));
        if path.exists() {
            return Err(StoreError::Conflict(format!("participant '{participant_id}' is already enrolled")));
        }
        let seed = match seed {
            Some(s) => s,
            None => self.design.seed.wrapping_add(1 + self.participant_ids()?.len() as u64),
        };
        let e = self.design.sessions_for(participant_id, seed)?;
        for plan in &e.plans {
            self.write_session(plan)?;
        }
        write_json_atomic(&path, &e)?;
        Ok(e)
    }

    /// Reads a participant's log. A final line without a newline that does
    /// not parse is a torn write and is cut off; any other bad line is an error.
    pub fn read_log(&self, participant_id: &str) -> Result<Vec<ResponseRecord>> {
        let path = self.log_path(participant_id);
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut f = OpenOptions::new().read(true).write(true).open(&path)?;
        let mut text = String::new();
        f.read_to_string(&mut text)?;
        let mut records = Vec::new();
        let mut offset = 0usize;
        let lines: Vec<&str> = text.split_inclusive('\n').collect();
        for (n, line) in lines.iter().enumerate() {
            let complete = line.ends_with('\n');
            let body = line.trim_end_matches('\n');
            if body.trim().is_empty() {
                offset += line.len();
                continue;
            }
            match serde_json::from_str::<ResponseRecord>(body) {
                Ok(r) if complete => records.push(r),
                Ok(_) | Err(_) if !complete && n + 1 == lines.len() => {
                    f.set_len(offset as u64)?;
                    f.seek(SeekFrom::End(0))?;
                    f.sync_all()?;
                    break;
                }
                Ok(_) => unreachable!(),
                Err(e) => {
                    return Err(StoreError::CorruptLog {
                        path: path.display().to_string(),
                        line: n + 1,
                        reason: e.to_string(),
                    })
                }
            }
            offset += line.len();
        }
        Ok(records)
    }

    /// Appends one record and flushes it to disk before returning.
    pub fn append(&self, record: &ResponseRecord) -> Result<()> {
        let mut line = serde_json::to_string(record)?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(self.log_path(&record.participant_id))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_file_safe() {
        for ok in ["P01", "a-b_c.d", "P01-training~a2"] {
            assert!(check_id("x", ok).is_ok(), "{ok}");
        }
        for bad in ["", ".hidden", "../up", "a/b", "a b", "é"] {
            assert!(check_id("x", bad).is_err(), "{bad}");
        }
        assert!(check_id("x", &"a".repeat(129)).is_err());
    }

    #[test]
    fn attempt_ids() {
        assert_eq!(training_attempt_id("P-training", 1), "P-training");
        assert_eq!(training_attempt_id("P-training", 3), "P-training~a3");
    }

    fn design() -> ExperimentDesign {
        ExperimentDesign {
            kind: StimulusKind::Instrument,
            conditions: vec!["R".into(), "A".into(), "B".into()],
            reference: "R".into(),
            training_conditions: vec!["A".into(), "B".into()],
            training_items: vec!["t".into(), "u".into()],
            practice_items: vec!["p".into()],
            main_items: vec!["m".into()],
            practice_limit: Some(0),
            pass_threshold: PassThreshold::INSTRUMENT,
            seed: 1,
        }
    }

    #[test]
    fn sessions_for_counts_and_skips_empty_practice() {
        let e = design().sessions_for("P", 4).unwrap();
        assert_eq!(e.training.as_deref(), Some("P-training"));
        assert_eq!(e.practice, None);
        assert_eq!(e.plans.len(), 2);
        assert_eq!(e.plans[0].trials.len(), 8);
        assert_eq!(e.plans[1].trials.len(), 6);
    }

    #[test]
    fn design_validation() {
        let mut d = design();
        d.reference = "Z".into();
        assert!(d.validate().is_err());
        let mut d = design();
        d.pass_threshold = PassThreshold { required: 9, out_of: 8 };
        assert!(d.validate().is_err());
        let mut d = design();
        d.main_items.clear();
        assert!(d.validate().is_err());
    }
}
