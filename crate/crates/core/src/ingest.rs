//! Per-patient daily toxicity/response records: parsing, scoring through the
//! 6x5 matrix, and cohort-versus-rest comparisons.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrices::{EfficacyTier5, RbaMatrix, ToxicityGrade};
use crate::stats::{self, LogrankResult, PermutationSpec, StatsError, TestMethod};
use crate::trajectory::{
    Endpoint, Group, StatePath, TierState, TimeUnit, TrajectoryError, TrialDataset,
};

pub const HEADER: [&str; 6] = [
    "patient_id",
    "cohort",
    "day",
    "ctcae_grade",
    "recist",
    "off_study",
];
pub const REST_LABEL: &str = "others";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: expected header {expected:?}, found {found:?}")]
    BadHeader {
        line: u64,
        expected: String,
        found: String,
    },
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: duplicate record for patient {patient_id} on day {day}")]
    DuplicatePatientDay {
        line: u64,
        patient_id: String,
        day: u32,
    },
    #[error("line {line}: CTCAE grade {grade} outside 0..=5")]
    GradeOutOfRange { line: u64, grade: i64 },
    #[error("line {line}: unknown RECIST code {code:?}")]
    UnknownRecistCode { line: u64, code: String },
    #[error("patient {patient_id}: listed under cohorts {first:?} and {second:?}")]
    CohortConflict {
        patient_id: String,
        first: String,
        second: String,
    },
    #[error("patient {patient_id}: no day-0 record (first day {first_day})")]
    MissingBaseline { patient_id: String, first_day: u32 },
    #[error("patient {patient_id}: no records between day {from} and day {to}")]
    GapFound {
        patient_id: String,
        from: u32,
        to: u32,
    },
    #[error("patient {patient_id}: RECIST improves from PD to {code} on day {day}")]
    RecistRegressionAfterPD {
        patient_id: String,
        day: u32,
        code: String,
    },
    #[error("patient {patient_id}: record on day {day} after death")]
    RecordAfterDeath { patient_id: String, day: u32 },
    #[error("patient {patient_id}: record on day {day} after the off-study day {off_day}")]
    RecordAfterOffStudy {
        patient_id: String,
        day: u32,
        off_day: u32,
    },
    #[error(
        "matrix {label} is {rows}x{cols}; daily records need 6 grade rows by 5 RECIST columns"
    )]
    MatrixShape {
        label: String,
        rows: usize,
        cols: usize,
    },
    #[error("{} patients failed validation: {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Several(Vec<IngestError>),
    #[error("unknown cohort {0:?}")]
    UnknownCohort(String),
    #[error("cohort {0:?} includes every patient; nothing to compare against")]
    NoRest(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl IngestError {
    /// Problems with the content of otherwise well-formed input.
    pub fn is_data_quality(&self) -> bool {
        matches!(
            self,
            Self::CohortConflict { .. }
                | Self::MissingBaseline { .. }
                | Self::GapFound { .. }
                | Self::RecistRegressionAfterPD { .. }
                | Self::RecordAfterDeath { .. }
                | Self::RecordAfterOffStudy { .. }
                | Self::Trajectory(_)
                | Self::Several(_)
        )
    }

    /// Patients the error refers to.
    pub fn patient_ids(&self) -> Vec<&str> {
        match self {
            Self::Several(all) => all.iter().filter_map(|e| e.patient_id()).collect(),
            other => other.patient_id().into_iter().collect(),
        }
    }

    /// Patient the error refers to, if any.
    pub fn patient_id(&self) -> Option<&str> {
        match self {
            Self::DuplicatePatientDay { patient_id, .. }
            | Self::CohortConflict { patient_id, .. }
            | Self::MissingBaseline { patient_id, .. }
            | Self::GapFound { patient_id, .. }
            | Self::RecistRegressionAfterPD { patient_id, .. }
            | Self::RecordAfterDeath { patient_id, .. }
            | Self::RecordAfterOffStudy { patient_id, .. } => Some(patient_id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatientDayRecord {
    pub patient_id: String,
    pub cohort: String,
    pub day: u32,
    pub ctcae_grade: ToxicityGrade,
    pub recist: EfficacyTier5,
    pub off_study: bool,
}

fn parse_recist(code: &str) -> Option<EfficacyTier5> {
    EfficacyTier5::ALL
        .into_iter()
        .find(|e| e.code().eq_ignore_ascii_case(code))
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" => Some(true),
        "false" | "0" | "no" | "" => Some(false),
        _ => None,
    }
}

pub fn parse_patient_days<R: Read>(input: R) -> Result<Vec<PatientDayRecord>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    let mut seen: HashMap<(String, u32), ()> = HashMap::new();
    let mut header_done = false;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if !header_done {
            let found: Vec<&str> = row.iter().map(str::trim).collect();
            let found = found.join(",");
            let expected = HEADER.join(",");
            if found.trim_start_matches('\u{feff}') != expected {
                return Err(IngestError::BadHeader {
                    line,
                    expected,
                    found,
                });
            }
            header_done = true;
            continue;
        }
        if row.len() != HEADER.len() {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", HEADER.len(), row.len()),
            });
        }
        let f: Vec<&str> = row.iter().map(str::trim).collect();
        let malformed = |reason: String| IngestError::MalformedRow { line, reason };
        if f[0].is_empty() {
            return Err(malformed("empty patient_id".into()));
        }
        if f[1].is_empty() {
            return Err(malformed("empty cohort".into()));
        }
        let day = u32::from_str(f[2]).map_err(|_| malformed(format!("bad day {:?}", f[2])))?;
        let grade =
            i64::from_str(f[3]).map_err(|_| malformed(format!("bad ctcae_grade {:?}", f[3])))?;
        if !(0..=5).contains(&grade) {
            return Err(IngestError::GradeOutOfRange { line, grade });
        }
        let recist = parse_recist(f[4]).ok_or_else(|| IngestError::UnknownRecistCode {
            line,
            code: f[4].to_string(),
        })?;
        let off_study =
            parse_bool(f[5]).ok_or_else(|| malformed(format!("bad off_study {:?}", f[5])))?;
        if seen.insert((f[0].to_string(), day), ()).is_some() {
            return Err(IngestError::DuplicatePatientDay {
                line,
                patient_id: f[0].to_string(),
                day,
            });
        }
        out.push(PatientDayRecord {
            patient_id: f[0].to_string(),
            cohort: f[1].to_string(),
            day,
            ctcae_grade: ToxicityGrade::new(grade as u8).expect("range checked"),
            recist,
            off_study,
        });
    }
    Ok(out)
}

pub fn parse_patient_days_file(path: &Path) -> Result<Vec<PatientDayRecord>, IngestError> {
    parse_patient_days(std::fs::File::open(path)?)
}

pub fn write_patient_days<W: Write>(
    records: &[PatientDayRecord],
    out: W,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(HEADER)?;
    for r in records {
        w.write_record([
            r.patient_id.as_str(),
            r.cohort.as_str(),
            &r.day.to_string(),
            &r.ctcae_grade.get().to_string(),
            r.recist.code(),
            if r.off_study { "true" } else { "false" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Missing days keep the last observed state; a missing day 0 becomes SD, grade 0.
    #[default]
    CarryForward,
    Strict,
}

impl FromStr for GapPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "carry_forward" => Ok(Self::CarryForward),
            "strict" => Ok(Self::Strict),
            other => Err(format!(
                "unknown gap policy {other:?} (expected carry_forward or strict)"
            )),
        }
    }
}

const BASELINE: TierState = TierState {
    tox: 0,
    eff: EfficacyTier5::SD as usize,
};

fn tier(r: &PatientDayRecord) -> TierState {
    TierState {
        tox: r.ctcae_grade.get() as usize,
        eff: r.recist.index(),
    }
}

fn is_dead(st: TierState) -> bool {
    st.tox == 5 || st.eff == EfficacyTier5::Death.index()
}

/// One tier path per patient, in order of first appearance; cohort order is
/// also order of first appearance.
pub fn daily_state_paths(
    records: &[PatientDayRecord],
    gap_policy: GapPolicy,
) -> Result<Vec<StatePath>, IngestError> {
    let mut order: Vec<&str> = Vec::new();
    let mut by_patient: HashMap<&str, Vec<&PatientDayRecord>> = HashMap::new();
    for r in records {
        let entry = by_patient.entry(&r.patient_id).or_insert_with(|| {
            order.push(&r.patient_id);
            Vec::new()
        });
        if let Some(first) = entry.first() {
            if first.cohort != r.cohort {
                return Err(IngestError::CohortConflict {
                    patient_id: r.patient_id.clone(),
                    first: first.cohort.clone(),
                    second: r.cohort.clone(),
                });
            }
        }
        entry.push(r);
    }

    let mut paths = Vec::with_capacity(order.len());
    let mut errors = Vec::new();
    for id in order {
        let mut rows = by_patient.remove(id).expect("patient registered");
        rows.sort_by_key(|r| r.day);
        match patient_path(id, &rows, gap_policy) {
            Ok(p) => paths.push(p),
            Err(e) => errors.push(e),
        }
    }
    match errors.len() {
        0 => Ok(paths),
        1 => Err(errors.remove(0)),
        _ => Err(IngestError::Several(errors)),
    }
}

fn patient_path(
    id: &str,
    rows: &[&PatientDayRecord],
    gap_policy: GapPolicy,
) -> Result<StatePath, IngestError> {
    let first = rows[0];
    let mut states: Vec<(f64, TierState)> = Vec::new();
    if first.day != 0 {
        if gap_policy == GapPolicy::Strict {
            return Err(IngestError::MissingBaseline {
                patient_id: id.into(),
                first_day: first.day,
            });
        }
        states.push((0.0, BASELINE));
    }
    let mut seen_pd = false;
    let mut off_day: Option<u32> = None;
    let mut prev_day: Option<u32> = None;
    let mut death_day: Option<u32> = None;
    for r in rows {
        if let Some(d) = death_day {
            return Err(IngestError::RecordAfterDeath {
                patient_id: id.into(),
                day: r.day.max(d),
            });
        }
        if let Some(off) = off_day {
            return Err(IngestError::RecordAfterOffStudy {
                patient_id: id.into(),
                day: r.day,
                off_day: off,
            });
        }
        if gap_policy == GapPolicy::Strict {
            if let Some(p) = prev_day {
                if r.day != p + 1 {
                    return Err(IngestError::GapFound {
                        patient_id: id.into(),
                        from: p,
                        to: r.day,
                    });
                }
            }
        }
        prev_day = Some(r.day);
        if seen_pd && r.recist < EfficacyTier5::PD {
            return Err(IngestError::RecistRegressionAfterPD {
                patient_id: id.into(),
                day: r.day,
                code: r.recist.code().into(),
            });
        }
        seen_pd |= r.recist == EfficacyTier5::PD;
        let st = tier(r);
        if states.last().is_none_or(|&(_, s)| s != st) {
            states.push((r.day as f64, st));
        }
        if is_dead(st) {
            death_day = Some(r.day);
        }
        if r.off_study {
            off_day = Some(r.day);
        }
    }
    let censor_time = rows.last().expect("non-empty").day as f64;
    Ok(StatePath {
        id: id.into(),
        group: first.cohort.clone(),
        states,
        censor_time,
    })
}

fn check_shape(matrix: &RbaMatrix) -> Result<(), IngestError> {
    if matrix.n_rows() != 6 || matrix.n_cols() != 5 {
        return Err(IngestError::MatrixShape {
            label: matrix.label(),
            rows: matrix.n_rows(),
            cols: matrix.n_cols(),
        });
    }
    Ok(())
}

/// Groups state paths by cohort and scores them; cohorts keep input order.
pub fn dataset_from_paths(
    paths: &[StatePath],
    matrix: Arc<RbaMatrix>,
    endpoint: Endpoint,
) -> Result<TrialDataset, IngestError> {
    check_shape(&matrix)?;
    let mut groups: Vec<Group> = Vec::new();
    for p in paths {
        let traj = p.to_trajectory(&matrix, endpoint)?;
        match groups.iter_mut().find(|g| g.name == p.group) {
            Some(g) => g.patients.push(traj),
            None => groups.push(Group {
                name: p.group.clone(),
                patients: vec![traj],
            }),
        }
    }
    Ok(TrialDataset::new(matrix, TimeUnit::Day, groups)?)
}

/// Daily records to a cohort-grouped dataset on the study-day axis.
pub fn daily_trajectories(
    records: &[PatientDayRecord],
    matrix: Arc<RbaMatrix>,
    gap_policy: GapPolicy,
) -> Result<TrialDataset, IngestError> {
    check_shape(&matrix)?;
    let paths = daily_state_paths(records, gap_policy)?;
    dataset_from_paths(&paths, matrix, Endpoint::Rba)
}

/// Minimal day records reproducing the given paths: one row per state change
/// plus the exit day, which is flagged off-study.
pub fn paths_to_day_records(paths: &[StatePath]) -> Vec<PatientDayRecord> {
    let mut out = Vec::new();
    for p in paths {
        let exit = p.censor_time.round() as u32;
        let mut last_day = None;
        for &(t, st) in &p.states {
            let day = t.round() as u32;
            out.push(PatientDayRecord {
                patient_id: p.id.clone(),
                cohort: p.group.clone(),
                day,
                ctcae_grade: ToxicityGrade::new(st.tox as u8).expect("valid grade"),
                recist: EfficacyTier5::from_index(st.eff).expect("valid column"),
                off_study: day == exit,
            });
            last_day = Some(day);
        }
        let (_, last) = *p.states.last().expect("non-empty path");
        if last_day != Some(exit) {
            out.push(PatientDayRecord {
                patient_id: p.id.clone(),
                cohort: p.group.clone(),
                day: exit,
                ctcae_grade: ToxicityGrade::new(last.tox as u8).expect("valid grade"),
                recist: EfficacyTier5::from_index(last.eff).expect("valid column"),
                off_study: true,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Better,
    Worse,
    Equivalent,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Self::Better => "better",
            Self::Worse => "worse",
            Self::Equivalent => "equivalent",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CohortMethod {
    Normal,
    Permutation(PermutationSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortComparison {
    pub cohort: String,
    pub n_cohort: usize,
    pub n_rest: usize,
    pub alpha: f64,
    pub result: LogrankResult,
    pub direction: Direction,
}

impl CohortComparison {
    /// "normal", "permutation" or "exact" (full enumeration).
    pub fn method_label(&self) -> &'static str {
        match self.result.method {
            TestMethod::Normal => "normal",
            TestMethod::Permutation if self.result.exhaustive => "exact",
            TestMethod::Permutation => "permutation",
        }
    }
}

pub fn cohort_vs_rest(
    ds: &TrialDataset,
    cohort: &str,
    method: CohortMethod,
    alpha: f64,
) -> Result<CohortComparison, IngestError> {
    let pair = ds
        .one_vs_rest(cohort, REST_LABEL)
        .ok_or_else(|| IngestError::UnknownCohort(cohort.to_string()))?;
    let n_cohort = pair.groups[0].patients.len();
    let n_rest = pair.groups[1].patients.len();
    if n_rest == 0 {
        return Err(IngestError::NoRest(cohort.to_string()));
    }
    let result = match method {
        CohortMethod::Normal => stats::weighted_logrank(&pair)?,
        CohortMethod::Permutation(spec) => stats::permutation_logrank_with(&pair, spec)?,
    };
    let direction = if result.p_two_sided >= alpha {
        Direction::Equivalent
    } else if result.first_group_better() {
        Direction::Better
    } else {
        Direction::Worse
    };
    Ok(CohortComparison {
        cohort: cohort.to_string(),
        n_cohort,
        n_rest,
        alpha,
        result,
        direction,
    })
}

pub fn all_cohorts_vs_rest(
    ds: &TrialDataset,
    method: CohortMethod,
    alpha: f64,
) -> Result<Vec<CohortComparison>, IngestError> {
    ds.groups
        .iter()
        .map(|g| cohort_vs_rest(ds, &g.name, method, alpha))
        .collect()
}

/// `cohort,n,direction,p_value,method` with p-values to 4 decimals.
pub fn comparisons_csv(rows: &[CohortComparison]) -> String {
    let mut s = String::from("cohort,n,direction,p_value,method\n");
    for c in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:.4},{}",
            c.cohort,
            c.n_cohort,
            c.direction.label(),
            c.result.p_two_sided,
            c.method_label()
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrices::HealthScore;

    fn parse(s: &str) -> Result<Vec<PatientDayRecord>, IngestError> {
        parse_patient_days(s.as_bytes())
    }

    const H: &str = "patient_id,cohort,day,ctcae_grade,recist,off_study\n";

    #[test]
    fn header_only_is_empty() {
        assert!(parse(H).unwrap().is_empty());
    }

    #[test]
    fn parses_a_row() {
        let r = parse(&format!("{H}P01,210mg,15,2,SD,false\n")).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].day, 15);
        assert_eq!(r[0].ctcae_grade.get(), 2);
        assert_eq!(r[0].recist, EfficacyTier5::SD);
        assert!(!r[0].off_study);
    }

    #[test]
    fn recist_is_case_insensitive() {
        let r = parse(&format!("{H}P01,a,0,0,pr,false\nP01,a,1,0,Death,true\n")).unwrap();
        assert_eq!(r[0].recist, EfficacyTier5::PR);
        assert_eq!(r[1].recist, EfficacyTier5::Death);
    }

    #[test]
    fn row_errors_carry_line_numbers() {
        let e = parse(&format!("{H}P01,a,0,0,SD,false\nP01,a,1,7,SD,false\n")).unwrap_err();
        assert!(
            matches!(e, IngestError::GradeOutOfRange { line: 3, grade: 7 }),
            "{e}"
        );
        let e = parse(&format!("{H}P01,a,0,0,XX,false\n")).unwrap_err();
        assert!(matches!(e, IngestError::UnknownRecistCode { line: 2, .. }));
        let e = parse(&format!("{H}P01,a,0,0,SD\n")).unwrap_err();
        assert!(matches!(e, IngestError::MalformedRow { line: 2, .. }));
        let e = parse(&format!("{H}P01,a,x,0,SD,false\n")).unwrap_err();
        assert!(matches!(e, IngestError::MalformedRow { line: 2, .. }));
        let e = parse(&format!("{H}P01,a,3,0,SD,false\nP01,a,3,1,SD,false\n")).unwrap_err();
        assert!(matches!(
            e,
            IngestError::DuplicatePatientDay {
                line: 3,
                day: 3,
                ..
            }
        ));
        let e = parse("id,cohort,day\n").unwrap_err();
        assert!(matches!(e, IngestError::BadHeader { line: 1, .. }));
    }

    fn rec(id: &str, cohort: &str, day: u32, grade: u8, recist: EfficacyTier5) -> PatientDayRecord {
        PatientDayRecord {
            patient_id: id.into(),
            cohort: cohort.into(),
            day,
            ctcae_grade: ToxicityGrade::new(grade).unwrap(),
            recist,
            off_study: false,
        }
    }

    fn m() -> Arc<RbaMatrix> {
        Arc::new(RbaMatrix::m6x5())
    }

    #[test]
    fn flat_patient_censored_at_last_day() {
        let rows: Vec<_> = (0..10)
            .map(|d| rec("P", "a", d, 0, EfficacyTier5::SD))
            .collect();
        let ds = daily_trajectories(&rows, m(), GapPolicy::Strict).unwrap();
        let p = &ds.groups[0].patients[0];
        assert_eq!(p.initial_score, HealthScore(4));
        assert!(p.changes.is_empty());
        assert_eq!(p.censor_time, 9.0);
        assert!(!p.absorbed);
        assert_eq!(ds.time_unit, TimeUnit::Day);
    }

    #[test]
    fn changes_follow_matrix_lookups() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::SD),
            rec("P", "a", 5, 3, EfficacyTier5::SD),
            rec("P", "a", 8, 0, EfficacyTier5::PD),
        ];
        let ds = daily_trajectories(&rows, m(), GapPolicy::CarryForward).unwrap();
        let p = &ds.groups[0].patients[0];
        let ch: Vec<_> = p.changes.iter().map(|c| (c.time, c.score.0)).collect();
        assert_eq!(ch, vec![(5.0, 7), (8.0, 6)]);
        assert_eq!(p.censor_time, 8.0);
    }

    #[test]
    fn grade_five_absorbs() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::SD),
            rec("P", "a", 4, 5, EfficacyTier5::SD),
        ];
        let ds = daily_trajectories(&rows, m(), GapPolicy::CarryForward).unwrap();
        let p = &ds.groups[0].patients[0];
        assert_eq!(p.final_score(), HealthScore(11));
        assert!(p.absorbed);
        assert_eq!(p.censor_time, 4.0);
    }

    #[test]
    fn strict_mode_rejects_gaps_and_missing_baseline() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::SD),
            rec("P", "a", 2, 0, EfficacyTier5::SD),
        ];
        assert!(matches!(
            daily_trajectories(&rows, m(), GapPolicy::Strict),
            Err(IngestError::GapFound { from: 0, to: 2, .. })
        ));
        let rows = vec![rec("P", "a", 3, 1, EfficacyTier5::SD)];
        assert!(matches!(
            daily_trajectories(&rows, m(), GapPolicy::Strict),
            Err(IngestError::MissingBaseline { first_day: 3, .. })
        ));
        // carry-forward injects SD / grade 0 at day 0
        let ds = daily_trajectories(&rows, m(), GapPolicy::CarryForward).unwrap();
        let p = &ds.groups[0].patients[0];
        assert_eq!(p.initial_score, HealthScore(4));
        assert_eq!(p.changes[0].time, 3.0);
        assert_eq!(p.changes[0].score, HealthScore(5));
    }

    #[test]
    fn pd_is_one_way() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::SD),
            rec("P", "a", 1, 0, EfficacyTier5::PD),
            rec("P", "a", 2, 0, EfficacyTier5::SD),
        ];
        let e = daily_trajectories(&rows, m(), GapPolicy::CarryForward).unwrap_err();
        assert!(matches!(
            e,
            IngestError::RecistRegressionAfterPD { day: 2, .. }
        ));
        assert!(e.is_data_quality());
        assert_eq!(e.patient_id(), Some("P"));
    }

    #[test]
    fn every_bad_patient_is_reported() {
        let rows = vec![
            rec("A", "a", 0, 0, EfficacyTier5::PD),
            rec("A", "a", 1, 0, EfficacyTier5::CR),
            rec("B", "a", 0, 0, EfficacyTier5::SD),
            rec("C", "a", 0, 0, EfficacyTier5::PD),
            rec("C", "a", 1, 0, EfficacyTier5::SD),
        ];
        let e = daily_state_paths(&rows, GapPolicy::CarryForward).unwrap_err();
        assert!(matches!(e, IngestError::Several(ref v) if v.len() == 2));
        assert_eq!(e.patient_ids(), vec!["A", "C"]);
        assert!(e.is_data_quality());
    }

    #[test]
    fn records_after_death_or_off_study_are_rejected() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::Death),
            rec("P", "a", 1, 0, EfficacyTier5::Death),
        ];
        assert!(matches!(
            daily_trajectories(&rows, m(), GapPolicy::CarryForward),
            Err(IngestError::RecordAfterDeath { .. })
        ));
        let mut a = rec("P", "a", 0, 0, EfficacyTier5::SD);
        a.off_study = true;
        let rows = vec![a, rec("P", "a", 1, 0, EfficacyTier5::SD)];
        assert!(matches!(
            daily_trajectories(&rows, m(), GapPolicy::CarryForward),
            Err(IngestError::RecordAfterOffStudy {
                day: 1,
                off_day: 0,
                ..
            })
        ));
    }

    #[test]
    fn wrong_matrix_shape_is_rejected() {
        let rows = vec![rec("P", "a", 0, 0, EfficacyTier5::SD)];
        let e = daily_trajectories(&rows, Arc::new(RbaMatrix::m3x3()), GapPolicy::CarryForward)
            .unwrap_err();
        assert!(matches!(
            e,
            IngestError::MatrixShape {
                rows: 3,
                cols: 3,
                ..
            }
        ));
    }

    #[test]
    fn cohort_conflict_is_rejected() {
        let rows = vec![
            rec("P", "a", 0, 0, EfficacyTier5::SD),
            rec("P", "b", 1, 0, EfficacyTier5::SD),
        ];
        assert!(matches!(
            daily_state_paths(&rows, GapPolicy::CarryForward),
            Err(IngestError::CohortConflict { .. })
        ));
    }

    #[test]
    fn csv_write_then_parse_is_identity() {
        let mut rows = vec![
            rec("P1", "a", 0, 0, EfficacyTier5::SD),
            rec("P1", "a", 4, 2, EfficacyTier5::PR),
        ];
        rows[1].off_study = true;
        let mut buf = Vec::new();
        write_patient_days(&rows, &mut buf).unwrap();
        assert_eq!(parse_patient_days(buf.as_slice()).unwrap(), rows);
    }

    fn cohort_data() -> TrialDataset {
        let mut rows = Vec::new();
        for i in 0..3 {
            let id = format!("G{i}");
            rows.push(rec(&id, "good", 0, 0, EfficacyTier5::SD));
            rows.push(rec(&id, "good", 20, 0, EfficacyTier5::PR));
            rows.push(rec(&id, "good", 60, 0, EfficacyTier5::CR));
        }
        for i in 0..6 {
            let id = format!("B{i}");
            rows.push(rec(&id, "bad", 0, 0, EfficacyTier5::SD));
            rows.push(rec(&id, "bad", 10 + i, 2, EfficacyTier5::PD));
            rows.push(rec(&id, "bad", 30 + i, 3, EfficacyTier5::Death));
        }
        daily_trajectories(&rows, m(), GapPolicy::CarryForward).unwrap()
    }

    #[test]
    fn dominant_cohort_is_better() {
        let ds = cohort_data();
        let spec = PermutationSpec {
            n_perm: 1000,
            seed: 1,
            mode: stats::PermutationMode::Exhaustive,
        };
        let c = cohort_vs_rest(&ds, "good", CohortMethod::Permutation(spec), 0.05).unwrap();
        assert_eq!((c.n_cohort, c.n_rest), (3, 6));
        assert_eq!(c.direction, Direction::Better);
        // the 3 improving patients form the single most extreme labelling of C(9,3) = 84
        assert!((c.result.p_two_sided - 1.0 / 84.0).abs() < 1e-12);
        assert_eq!(c.method_label(), "exact");
        let w = cohort_vs_rest(&ds, "bad", CohortMethod::Permutation(spec), 0.05).unwrap();
        assert_eq!(w.direction, Direction::Worse);
    }

    #[test]
    fn cohort_errors() {
        let ds = cohort_data();
        assert!(matches!(
            cohort_vs_rest(&ds, "nope", CohortMethod::Normal, 0.05),
            Err(IngestError::UnknownCohort(_))
        ));
        let one = TrialDataset::new(ds.matrix.clone(), TimeUnit::Day, vec![ds.groups[0].clone()])
            .unwrap();
        assert!(matches!(
            cohort_vs_rest(&one, "good", CohortMethod::Normal, 0.05),
            Err(IngestError::NoRest(_))
        ));
    }

    #[test]
    fn csv_table_format() {
        let ds = cohort_data();
        let rows = all_cohorts_vs_rest(&ds, CohortMethod::Normal, 0.05).unwrap();
        let s = comparisons_csv(&rows);
        let lines: Vec<_> = s.lines().collect();
        assert_eq!(lines[0], "cohort,n,direction,p_value,method");
        assert!(lines[1].starts_with("good,3,better,0."));
        assert!(lines[1].ends_with(",normal"));
        assert_eq!(lines.len(), 3);
    }
}
