//! Preference aggregation, Thurstone Case V scaling and the listener-level
//! statistics (confidence intervals, Tukey HSD).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::quantile::{inverse_normal, t_quantile};
use super::session::{Phase, ResponseRecord};
use crate::error::{HlsError, Result};
use crate::scalar::Real;

/// `counts[i][j]`: how often condition `i` was judged MORE distorted than `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    conditions: Vec<String>,
    counts: Vec<Vec<u32>>,
}

impl PreferenceMatrix {
    pub fn zeros<S: AsRef<str>>(conditions: &[S]) -> Self {
        let k = conditions.len();
        PreferenceMatrix {
            conditions: conditions.iter().map(|c| c.as_ref().to_string()).collect(),
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_counts<S: AsRef<str>>(conditions: &[S], counts: Vec<Vec<u32>>) -> Result<Self> {
        let k = conditions.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(HlsError::InvalidInput(format!("count matrix must be {k} x {k}")));
        }
        if (0..k).any(|i| counts[i][i] != 0) {
            return Err(HlsError::InvalidInput("count matrix diagonal must be zero".into()));
        }
        let mut m = Self::zeros(conditions);
        m.counts = counts;
        Ok(m)
    }

    pub fn conditions(&self) -> &[String] {
        &self.conditions
    }

    pub fn len(&self) -> usize {
        self.conditions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty()
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn count(&self, i: usize, j: usize) -> u32 {
        self.counts[i][j]
    }

    /// Number of trials pairing `i` and `j`, in either order.
    pub fn total(&self, i: usize, j: usize) -> u32 {
        if i == j {
            0
        } else {
            self.counts[i][j] + self.counts[j][i]
        }
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.conditions.iter().position(|c| c == label)
    }

    /// Records that `more` was judged more distorted than `less`.
    pub fn record(&mut self, more: &str, less: &str) -> Result<()> {
        let i = self.index_of(more).ok_or_else(|| HlsError::UnknownCondition(more.to_string()))?;
        let j = self.index_of(less).ok_or_else(|| HlsError::UnknownCondition(less.to_string()))?;
        if i == j {
            return Err(HlsError::InvalidInput(format!("trial pairs '{more}' with itself")));
        }
        self.counts[i][j] += 1;
        Ok(())
    }

    pub fn add(&mut self, other: &PreferenceMatrix) -> Result<()> {
        if other.conditions != self.conditions {
            return Err(HlsError::InvalidInput("cannot add matrices over different conditions".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Off-diagonal pairs `(i, j)`, `i < j`, with no trials.
    pub fn empty_cells(&self) -> Vec<(usize, usize)> {
        let k = self.len();
        let mut out = Vec::new();
        for i in 0..k {
            for j in i + 1..k {
                if self.total(i, j) == 0 {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// True when every off-diagonal pair has the same number of trials.
    pub fn is_balanced(&self) -> bool {
        let k = self.len();
        let first = if k >= 2 { self.total(0, 1) } else { 0 };
        (0..k).all(|i| (0..k).all(|j| i == j || self.total(i, j) == first))
    }
}

/// Main-phase responses aggregated into one matrix per participant.
pub fn aggregate_counts<S: AsRef<str>>(
    responses: &[ResponseRecord],
    conditions: &[S],
) -> Result<BTreeMap<String, PreferenceMatrix>> {
    let mut out: BTreeMap<String, PreferenceMatrix> = BTreeMap::new();
    for r in responses.iter().filter(|r| r.phase == Phase::Main) {
        let m = out
            .entry(r.participant_id.clone())
            .or_insert_with(|| PreferenceMatrix::zeros(conditions));
        m.record(r.chosen(), r.other())?;
    }
    Ok(out)
}

/// Clipping of unanimous cells before the normal quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `eps = 1 / (2 N)` with `N` the trials in that cell.
    #[default]
    HalfCount,
    Fixed(f64),
}

/// Treatment of condition pairs that were never presented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCells {
    #[default]
    Reject,
    /// Score the pair as `p = 0.5`.
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ScalingOptions {
    #[serde(default)]
    pub epsilon: EpsilonRule,
    #[serde(default)]
    pub empty_cells: EmptyCells,
}

/// `p[i][j]`: proportion of trials where `i` was preferred (judged LESS distorted).
pub fn preference_proportions<T: Real>(m: &PreferenceMatrix, options: ScalingOptions) -> Result<Vec<Vec<T>>> {
    let k = m.len();
    if k == 0 {
        return Err(HlsError::InvalidInput("empty preference matrix".into()));
    }
    let mut p = vec![vec![T::lit(0.5); k]; k];
    for i in 0..k {
        for j in 0..k {
            if i == j {
                continue;
            }
            let n = m.total(i, j);
            if n == 0 {
                match options.empty_cells {
                    EmptyCells::Reject => {
                        return Err(HlsError::InvalidInput(format!(
                            "no trials compare '{}' and '{}'",
                            m.conditions[i], m.conditions[j]
                        )))
                    }
                    EmptyCells::Neutral => continue,
                }
            }
            let eps = match options.epsilon {
                EpsilonRule::HalfCount => 0.5 / f64::from(n),
                EpsilonRule::Fixed(e) => e,
            };
            let raw = f64::from(m.count(j, i)) / f64::from(n);
            p[i][j] = T::lit(raw.clamp(eps, 1.0 - eps));
        }
    }
    Ok(p)
}

/// Case V scale values from a proportion matrix; diagonal entries are ignored.
pub fn thurstone_from_proportions<T: Real>(p: &[Vec<T>]) -> Result<Vec<T>> {
    let k = p.len();
    if k == 0 || p.iter().any(|r| r.len() != k) {
        return Err(HlsError::InvalidInput("proportion matrix must be square and non-empty".into()));
    }
    let kf = T::from_usize_lossy(k);
    let mut scores = Vec::with_capacity(k);
    for (i, row) in p.iter().enumerate() {
        let mut sum = T::zero();
        for (j, &pij) in row.iter().enumerate() {
            if i != j {
                sum = sum + inverse_normal(pij)?;
            }
        }
        scores.push(sum / kf);
    }
    let mean = scores.iter().fold(T::zero(), |a, &b| a + b) / kf;
    Ok(scores.into_iter().map(|s| s - mean).collect())
}

/// Thurstone Case V scores, oriented so that higher means less distortion.
pub fn thurstone_scores<T: Real>(m: &PreferenceMatrix, options: ScalingOptions) -> Result<Vec<T>> {
    thurstone_from_proportions(&preference_proportions::<T>(m, options)?)
}

/// Per-condition mean and confidence half-width across listeners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConditionSummary<T: Real> {
    pub means: Vec<T>,
    pub half_widths: Vec<T>,
    pub level: T,
    pub n_listeners: usize,
}

fn check_table<T: Real>(scores: &[Vec<T>]) -> Result<usize> {
    let k = scores.first().map_or(0, Vec::len);
    if k == 0 || scores.iter().any(|r| r.len() != k) {
        return Err(HlsError::InvalidInput("score table must be rectangular and non-empty".into()));
    }
    Ok(k)
}

fn column_means<T: Real>(scores: &[Vec<T>], k: usize) -> Vec<T> {
    let n = T::from_usize_lossy(scores.len());
    (0..k)
        .map(|c| scores.iter().fold(T::zero(), |a, r| a + r[c]) / n)
        .collect()
}

/// `scores[listener][condition]`; half-width `t(1 - (1 - level)/2, n - 1) * sd / sqrt(n)`.
pub fn mean_ci<T: Real>(scores: &[Vec<T>], level: T) -> Result<ConditionSummary<T>> {
    let k = check_table(scores)?;
    let n = scores.len();
    if n < 2 {
        return Err(HlsError::InvalidInput(format!("confidence intervals need at least 2 listeners, got {n}")));
    }
    if !(level > T::zero() && level < T::one()) {
        return Err(HlsError::InvalidInput(format!("confidence level must lie in (0, 1), got {level}")));
    }
    let means = column_means(scores, k);
    let nf = T::from_usize_lossy(n);
    let t = t_quantile(T::one() - (T::one() - level) / T::lit(2.0), nf - T::one())?;
    let half_widths = (0..k)
        .map(|c| {
            let ss = scores.iter().fold(T::zero(), |a, r| a + (r[c] - means[c]).powi(2));
            let sd = (ss / (nf - T::one())).sqrt();
            t * sd / nf.sqrt()
        })
        .collect();
    Ok(ConditionSummary {
        means,
        half_widths,
        level,
        n_listeners: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HsdPair<T: Real> {
    pub i: usize,
    pub j: usize,
    pub mean_difference: T,
    /// Studentized range statistic `|mean_i - mean_j| / sqrt(MS_error / n)`.
    pub q: T,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct HsdTable<T: Real> {
    pub q_crit: T,
    pub ms_error: T,
    pub df_error: usize,
    pub n_listeners: usize,
    pub pairs: Vec<HsdPair<T>>,
}

impl<T: Real> HsdTable<T> {
    pub fn pair(&self, i: usize, j: usize) -> Option<&HsdPair<T>> {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.pairs.iter().find(|p| p.i == a && p.j == b)
    }
}

/// Tukey HSD over a listener x condition table, with `MS_error` taken from the
/// condition x listener interaction of a repeated-measures decomposition.
/// Pairs with equal means are never flagged.
pub fn tukey_hsd<T: Real>(scores: &[Vec<T>], q_crit: Option<T>) -> Result<HsdTable<T>> {
    let q_crit = q_crit.ok_or_else(|| HlsError::Config("Tukey HSD needs a studentized-range critical value (q_crit)".into()))?;
    if !(q_crit >= T::zero()) {
        return Err(HlsError::InvalidInput(format!("q_crit must be non-negative, got {q_crit}")));
    }
    let k = check_table(scores)?;
    let n = scores.len();
    if n < 2 || k < 2 {
        return Err(HlsError::InvalidInput("Tukey HSD needs at least 2 listeners and 2 conditions".into()));
    }
    let cond_means = column_means(scores, k);
    let kf = T::from_usize_lossy(k);
    let listener_means: Vec<T> = scores.iter().map(|r| r.iter().fold(T::zero(), |a, &b| a + b) / kf).collect();
    let grand = cond_means.iter().fold(T::zero(), |a, &b| a + b) / kf;
    let mut ss = T::zero();
    for (l, row) in scores.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            ss = ss + (x - listener_means[l] - cond_means[c] + grand).powi(2);
        }
    }
    let df_error = (k - 1) * (n - 1);
    let ms_error = ss / T::from_usize_lossy(df_error);
    let se = (ms_error / T::from_usize_lossy(n)).sqrt();
    let mut pairs = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            let diff = cond_means[i] - cond_means[j];
            let q = if diff == T::zero() {
                T::zero()
            } else if se == T::zero() {
                T::infinity()
            } else {
                diff.abs() / se
            };
            pairs.push(HsdPair {
                i,
                j,
                mean_difference: diff,
                q,
                significant: diff != T::zero() && q >= q_crit,
            });
        }
    }
    Ok(HsdTable {
        q_crit,
        ms_error,
        df_error,
        n_listeners: n,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::session::Choice;

    fn rec(pid: &str, a: &str, b: &str, choice: Choice, phase: Phase) -> ResponseRecord {
        ResponseRecord {
            session_id: "s".into(),
            participant_id: pid.into(),
            trial_index: 0,
            item: "w".into(),
            pair: (a.into(), b.into()),
            choice,
            timestamp: 0,
            phase,
        }
    }

    #[test]
    fn aggregation() {
        let conds = ["A", "B", "C"];
        assert!(aggregate_counts(&[], &conds).unwrap().is_empty());
        let m = aggregate_counts(&[rec("p", "A", "B", Choice::First, Phase::Main)], &conds).unwrap();
        let m = &m["p"];
        assert_eq!(m.count(0, 1), 1);
        assert_eq!(m.count(1, 0), 0);
        let log = vec![
            rec("p", "A", "B", Choice::First, Phase::Main),
            rec("p", "B", "A", Choice::First, Phase::Main),
            rec("p", "B", "A", Choice::Second, Phase::Main),
            rec("p", "A", "C", Choice::Second, Phase::Training),
        ];
        let m = &aggregate_counts(&log, &conds).unwrap()["p"];
        assert_eq!(m.count(0, 1), 2);
        assert_eq!(m.count(1, 0), 1);
        assert_eq!(m.total(0, 1), 3);
        assert_eq!(m.total(0, 2), 0);
        assert!(matches!(
            aggregate_counts(&[rec("p", "A", "Z", Choice::First, Phase::Main)], &conds),
            Err(HlsError::UnknownCondition(_))
        ));
    }

    #[test]
    fn uniform_preferences_score_zero() {
        let m = PreferenceMatrix::from_counts(&["a", "b", "c"], vec![vec![0, 5, 5], vec![5, 0, 5], vec![5, 5, 0]]).unwrap();
        for s in thurstone_scores::<f64>(&m, ScalingOptions::default()).unwrap() {
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn two_condition_unit_separation() {
        let p = vec![vec![0.5f64, 0.841_344_746_068_542_9], vec![1.0 - 0.841_344_746_068_542_9, 0.5]];
        let s = thurstone_from_proportions(&p).unwrap();
        assert!((s[0] - 0.5).abs() < 1e-9 && (s[1] + 0.5).abs() < 1e-9, "{s:?}");
    }

    #[test]
    fn unanimous_cells_are_clipped() {
        // b always judged more distorted than a: p(a preferred) = 1 -> 1 - 1/20.
        let m = PreferenceMatrix::from_counts(&["a", "b"], vec![vec![0, 0], vec![10, 0]]).unwrap();
        let s = thurstone_scores::<f64>(&m, ScalingOptions::default()).unwrap();
        let z = inverse_normal(0.95f64).unwrap();
        assert!((s[0] - z / 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cells() {
        let m = PreferenceMatrix::from_counts(&["a", "b", "c"], vec![vec![0, 3, 0], vec![1, 0, 0], vec![0, 0, 0]]).unwrap();
        assert!(thurstone_scores::<f64>(&m, ScalingOptions::default()).is_err());
        let opts = ScalingOptions {
            empty_cells: EmptyCells::Neutral,
            ..Default::default()
        };
        let s = thurstone_scores::<f64>(&m, opts).unwrap();
        assert!(s[1] > s[0]);
        assert_eq!(m.empty_cells(), vec![(0, 2), (1, 2)]);
        assert!(!m.is_balanced());
        assert!(thurstone_scores::<f64>(&PreferenceMatrix::zeros::<&str>(&[]), opts).is_err());
    }

    #[test]
    fn ci_two_listeners() {
        let scores = vec![vec![0.0f64, -0.0], vec![2.0, -2.0]];
        let r = mean_ci(&scores, 0.99).unwrap();
        assert!((r.means[0] - 1.0).abs() < 1e-15);
        // sd = sqrt(2), n = 2, t(0.995, 1) = tan(pi (0.995 - 0.5)).
        let t = (std::f64::consts::PI * 0.495).tan();
        assert!((r.half_widths[0] - t).abs() < 1e-9, "{}", r.half_widths[0]);
        assert!(mean_ci(&scores[..1], 0.99).is_err());
        let same = vec![vec![0.3, -0.3]; 5];
        assert!(mean_ci(&same, 0.99).unwrap().half_widths.iter().all(|&h| h == 0.0));
    }

    #[test]
    fn hsd_boundaries() {
        let same = vec![vec![0.0; 3]; 4];
        let t = tukey_hsd(&same, Some(0.1)).unwrap();
        assert!(t.pairs.iter().all(|p| !p.significant));
        let noisy = vec![vec![0.1, 0.0, -0.1], vec![-0.2, 0.3, -0.1], vec![0.0, -0.1, 0.1]];
        let t = tukey_hsd(&noisy, Some(0.0)).unwrap();
        assert!(t.pairs.iter().all(|p| p.significant == (p.mean_difference != 0.0)));
        assert!(matches!(tukey_hsd(&noisy, None), Err(HlsError::Config(_))));
        assert_eq!(t.df_error, 4);
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = PreferenceMatrix::from_counts(&["a", "b"], vec![vec![0, 2], vec![1, 0]]).unwrap();
        let j = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<PreferenceMatrix>(&j).unwrap(), m);
        assert!(PreferenceMatrix::from_counts(&["a", "b"], vec![vec![1, 2], vec![1, 0]]).is_err());
    }
}
