//! Per-patient health-score step functions.
//!
//! A trajectory is right-continuous: a change recorded at time `t` already
//! holds at `t`. Observation ends at `censor_time`; for absorbed patients that
//! is the time the absorptive score was entered.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrices::{HealthScore, RbaMatrix};

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("patient {id}: no records")]
    Empty { id: String },
    #[error("patient {id}: first record at t={time}, expected a baseline at t=0")]
    MissingBaseline { id: String, time: f64 },
    #[error("patient {id}: times not strictly increasing at t={time}")]
    NonMonotoneTime { id: String, time: f64 },
    #[error("patient {id}: change at t={time} after absorption")]
    ChangeAfterAbsorption { id: String, time: f64 },
    #[error("patient {id}: change at t={time} after censor time {censor}")]
    ChangeAfterCensor { id: String, time: f64, censor: f64 },
    #[error("patient {id}: score {score} outside [0, {max}]")]
    ScoreOutOfRange { id: String, score: u32, max: u32 },
    #[error("patient {id}: cell ({row}, {col}) outside the matrix")]
    CellOutOfRange { id: String, row: usize, col: usize },
    #[error("patient {id}: efficacy improves from a one-way tier at t={time}")]
    OneWayRegression { id: String, time: f64 },
    #[error("time {time} outside [0, {censor}]")]
    TimeOutOfRange { time: f64, censor: f64 },
    #[error("dataset needs unique group names, duplicate {0:?}")]
    DuplicateGroup(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    Day,
    Week,
}

impl TimeUnit {
    pub fn axis_label(self) -> &'static str {
        match self {
            TimeUnit::Day => "Days",
            TimeUnit::Week => "Weeks",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub time: f64,
    pub score: HealthScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientTrajectory {
    pub id: String,
    pub group: String,
    pub initial_score: HealthScore,
    pub changes: Vec<StateChange>,
    pub censor_time: f64,
    pub absorbed: bool,
}

/// Builds a validated trajectory from time-sorted `(time, score)` observations.
///
/// The first record is the baseline and must sit at `t = 0`. Repeated scores
/// are collapsed. Once an absorptive score is entered, later records must keep
/// that score and observation is cut at the absorption time.
pub fn build_trajectory(
    id: &str,
    group: &str,
    records: &[(f64, HealthScore)],
    censor_time: f64,
    matrix: &RbaMatrix,
) -> Result<PatientTrajectory, TrajectoryError> {
    let (&(t0, s0), rest) = records
        .split_first()
        .ok_or_else(|| TrajectoryError::Empty { id: id.into() })?;
    if t0 != 0.0 {
        return Err(TrajectoryError::MissingBaseline {
            id: id.into(),
            time: t0,
        });
    }
    let check_score = |s: HealthScore| {
        if matrix.contains_score(s) {
            Ok(())
        } else {
            Err(TrajectoryError::ScoreOutOfRange {
                id: id.into(),
                score: s.0,
                max: matrix.max_score(),
            })
        }
    };
    check_score(s0)?;

    let mut changes = Vec::new();
    let mut prev_time = t0;
    let mut current = s0;
    let mut absorbed_at = matrix.is_absorptive(s0).then_some(t0);
    for &(t, s) in rest {
        // Also rejects NaN.
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(t > prev_time) {
            return Err(TrajectoryError::NonMonotoneTime {
                id: id.into(),
                time: t,
            });
        }
        prev_time = t;
        check_score(s)?;
        if s == current {
            continue;
        }
        if absorbed_at.is_some() {
            return Err(TrajectoryError::ChangeAfterAbsorption {
                id: id.into(),
                time: t,
            });
        }
        if t > censor_time {
            return Err(TrajectoryError::ChangeAfterCensor {
                id: id.into(),
                time: t,
                censor: censor_time,
            });
        }
        changes.push(StateChange { time: t, score: s });
        current = s;
        if matrix.is_absorptive(s) {
            absorbed_at = Some(t);
        }
    }

    Ok(PatientTrajectory {
        id: id.into(),
        group: group.into(),
        initial_score: s0,
        changes,
        censor_time: absorbed_at.unwrap_or(censor_time),
        absorbed: absorbed_at.is_some(),
    })
}

impl PatientTrajectory {
    /// Right-continuous lookup of the score in force at `t`.
    pub fn score_at(&self, t: f64) -> Result<HealthScore, TrajectoryError> {
        if !(0.0..=self.censor_time).contains(&t) {
            return Err(TrajectoryError::TimeOutOfRange {
                time: t,
                censor: self.censor_time,
            });
        }
        let idx = self.changes.partition_point(|c| c.time <= t);
        Ok(if idx == 0 {
            self.initial_score
        } else {
            self.changes[idx - 1].score
        })
    }

    pub fn final_score(&self) -> HealthScore {
        self.changes.last().map_or(self.initial_score, |c| c.score)
    }

    /// Iterates `(time, weight)` for every change, weight = delta score / max score.
    pub fn weighted_changes(&self, max_score: u32) -> impl Iterator<Item = (f64, f64)> + '_ {
        let max = max_score as f64;
        let mut prev = self.initial_score.0 as f64;
        self.changes.iter().map(move |c| {
            let s = c.score.0 as f64;
            let w = (s - prev) / max;
            prev = s;
            (c.time, w)
        })
    }

    pub fn with_group(mut self, group: &str) -> Self {
        self.group = group.into();
        self
    }
}

/// Which scoring the tier coordinates of a [`StatePath`] are mapped through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    /// Full toxicity x efficacy matrix.
    Rba,
    /// Efficacy column only (no-toxicity row). A death caused by the toxicity
    /// axis is not an efficacy event: the patient is censored there instead.
    EfficacyOnly,
}

impl Endpoint {
    pub fn label(self) -> &'static str {
        match self {
            Endpoint::Rba => "rba",
            Endpoint::EfficacyOnly => "efficacy_only",
        }
    }
}

/// A tier-coordinate observation: toxicity row and efficacy column of the matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierState {
    pub tox: usize,
    pub eff: usize,
}

/// Time-stamped tier coordinates for one patient, before scoring.
///
/// Simulators and ingestion both produce these so the same observations can be
/// scored under either endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatePath {
    pub id: String,
    pub group: String,
    /// Strictly increasing in time; the first entry is the baseline at t = 0.
    pub states: Vec<(f64, TierState)>,
    pub censor_time: f64,
}

impl StatePath {
    /// Checks that no efficacy coordinate moves back out of a one-way column.
    pub fn validate(&self, matrix: &RbaMatrix) -> Result<(), TrajectoryError> {
        let mut frozen_at: Option<usize> = None;
        for &(t, st) in &self.states {
            if st.tox >= matrix.n_rows() || st.eff >= matrix.n_cols() {
                return Err(TrajectoryError::CellOutOfRange {
                    id: self.id.clone(),
                    row: st.tox,
                    col: st.eff,
                });
            }
            if let Some(col) = frozen_at {
                if st.eff < col {
                    return Err(TrajectoryError::OneWayRegression {
                        id: self.id.clone(),
                        time: t,
                    });
                }
            }
            if matrix.one_way_cols().contains(&st.eff) {
                frozen_at = Some(frozen_at.map_or(st.eff, |c| c.max(st.eff)));
            }
        }
        Ok(())
    }

    pub fn to_trajectory(
        &self,
        matrix: &RbaMatrix,
        endpoint: Endpoint,
    ) -> Result<PatientTrajectory, TrajectoryError> {
        self.validate(matrix)?;
        let mut records = Vec::with_capacity(self.states.len());
        let mut censor = self.censor_time;
        for &(t, st) in &self.states {
            let score = match endpoint {
                Endpoint::Rba => matrix.score(st.tox, st.eff),
                Endpoint::EfficacyOnly => {
                    let eff_score = matrix.efficacy_only(st.eff);
                    if matrix.is_cell_absorptive(st.tox, st.eff) && !matrix.is_absorptive(eff_score)
                    {
                        censor = t;
                        break;
                    }
                    eff_score
                }
            };
            records.push((t, score));
        }
        if records.is_empty() {
            // toxic death at baseline: nothing observable on the efficacy scale
            let st = self.states[0].1;
            records.push((0.0, matrix.efficacy_only(st.eff)));
            censor = 0.0;
        }
        build_trajectory(&self.id, &self.group, &records, censor, matrix)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub patients: Vec<PatientTrajectory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialDataset {
    pub matrix: Arc<RbaMatrix>,
    pub time_unit: TimeUnit,
    pub groups: Vec<Group>,
}

impl TrialDataset {
    pub fn new(
        matrix: Arc<RbaMatrix>,
        time_unit: TimeUnit,
        groups: Vec<Group>,
    ) -> Result<Self, TrajectoryError> {
        for (i, g) in groups.iter().enumerate() {
            if groups[..i].iter().any(|h| h.name == g.name) {
                return Err(TrajectoryError::DuplicateGroup(g.name.clone()));
            }
            for p in &g.patients {
                let max = matrix.max_score();
                let bad = std::iter::once(p.initial_score)
                    .chain(p.changes.iter().map(|c| c.score))
                    .find(|s| s.0 > max);
                if let Some(s) = bad {
                    return Err(TrajectoryError::ScoreOutOfRange {
                        id: p.id.clone(),
                        score: s.0,
                        max,
                    });
                }
            }
        }
        Ok(Self {
            matrix,
            time_unit,
            groups,
        })
    }

    pub fn group(&self, name: &str) -> Option<&Group> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub fn n_patients(&self) -> usize {
        self.groups.iter().map(|g| g.patients.len()).sum()
    }

    /// Same trajectories with the two groups' order swapped.
    pub fn swapped(&self) -> Self {
        let mut out = self.clone();
        out.groups.reverse();
        out
    }

    /// Two-group dataset: `name` against every other group pooled as `rest_label`.
    pub fn one_vs_rest(&self, name: &str, rest_label: &str) -> Option<Self> {
        let focus = self.group(name)?.clone();
        let rest = self
            .groups
            .iter()
            .filter(|g| g.name != name)
            .flat_map(|g| g.patients.iter().cloned())
            .collect();
        Some(Self {
            matrix: self.matrix.clone(),
            time_unit: self.time_unit,
            groups: vec![
                focus,
                Group {
                    name: rest_label.into(),
                    patients: rest,
                },
            ],
        })
    }
}
