//! Ordinal efficacy/toxicity tiers and the combined risk-benefit scoring matrices.
//!
//! Rows of a matrix are toxicity tiers (best first), columns are efficacy tiers
//! (best first). A cell holds the combined ordinal health score, where 0 is the
//! best possible state and `max_score` is reached only on absorptive cells.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Combined ordinal health score. Lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HealthScore(pub u32);

impl HealthScore {
    pub fn value(self) -> u32 {
        self.0
    }
}

impl fmt::Display for HealthScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EfficacyTier3 {
    Healthy = 0,
    Sick = 1,
    DeadFromDisease = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ToxicityTier3 {
    Nontoxic = 0,
    Toxic = 1,
    /// Also labelled "fatal toxicity".
    Poisoned = 2,
}

/// RECIST 1.1 response category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EfficacyTier5 {
    CR = 0,
    PR = 1,
    SD = 2,
    PD = 3,
    Death = 4,
}

impl EfficacyTier5 {
    pub const ALL: [EfficacyTier5; 5] = [Self::CR, Self::PR, Self::SD, Self::PD, Self::Death];

    pub fn ordinal_score(self) -> u32 {
        match self {
            Self::CR => 0,
            Self::PR => 2,
            Self::SD => 4,
            Self::PD => 6,
            Self::Death => 11,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    pub fn code(self) -> &'static str {
        match self {
            Self::CR => "CR",
            Self::PR => "PR",
            Self::SD => "SD",
            Self::PD => "PD",
            Self::Death => "DEATH",
        }
    }
}

/// CTCAE v5.0 grade, 0 (none) to 5 (fatal).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ToxicityGrade(u8);

impl ToxicityGrade {
    pub const FATAL: ToxicityGrade = ToxicityGrade(5);

    pub fn new(grade: u8) -> Result<Self, MatrixError> {
        if grade <= 5 {
            Ok(Self(grade))
        } else {
            Err(MatrixError::GradeOutOfRange(grade as i64))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn is_fatal(self) -> bool {
        self.0 == 5
    }
}

impl TryFrom<u8> for ToxicityGrade {
    type Error = MatrixError;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ToxicityGrade> for u8 {
    fn from(g: ToxicityGrade) -> u8 {
        g.0
    }
}

#[derive(Debug, Error)]
pub enum MatrixError {
    #[error("toxicity grade {0} outside [0, 5]")]
    GradeOutOfRange(i64),
    #[error("matrix has no cells")]
    Empty,
    #[error("score grid is not {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize },
    #[error("score {score} exceeds max_score {max}")]
    ScoreAboveMax { score: u32, max: u32 },
    #[error("absorptive score {0} does not appear in the grid")]
    UnknownAbsorptive(u32),
    #[error("max_score {0} must be positive and attained only on absorptive cells")]
    BadMaxScore(u32),
    #[error("one-way column index {0} out of range")]
    BadOneWayColumn(usize),
    #[error("reading matrix config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing matrix config: {0}")]
    Json(#[from] serde_json::Error),
}

/// Identifies the built-in matrices; user-supplied grids are `Custom`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixName {
    M3x3,
    M6x5,
    Custom(String),
}

/// A combined toxicity x efficacy scoring grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbaMatrix {
    name: MatrixName,
    rows: Vec<String>,
    cols: Vec<String>,
    scores: Vec<Vec<u32>>,
    max_score: u32,
    absorptive: BTreeSet<u32>,
    /// Efficacy columns that, once entered, cannot be left toward a better column.
    one_way_cols: Vec<usize>,
}

const TABLE_3X3: [[u32; 3]; 3] = [[0, 1, 3], [1, 2, 3], [3, 3, 3]];

/// JSON layout of a study-specific matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixConfig {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub scores: Vec<Vec<u32>>,
    pub absorptive: Vec<u32>,
    pub max_score: u32,
    #[serde(default)]
    pub one_way_cols: Vec<usize>,
    #[serde(default)]
    pub name: Option<String>,
}

impl RbaMatrix {
    /// Three efficacy tiers by three toxicity tiers.
    pub fn m3x3() -> Self {
        Self {
            name: MatrixName::M3x3,
            rows: vec!["Nontoxic".into(), "Toxic".into(), "Fatal Toxicity".into()],
            cols: vec!["Healthy".into(), "Sick".into(), "Fatal Disease".into()],
            scores: TABLE_3X3.iter().map(|r| r.to_vec()).collect(),
            max_score: 3,
            absorptive: BTreeSet::from([3]),
            one_way_cols: Vec::new(),
        }
    }

    /// CTCAE grade 0..=5 by RECIST CR/PR/SD/PD/Death.
    pub fn m6x5() -> Self {
        let scores = (0u32..6)
            .map(|grade| {
                EfficacyTier5::ALL
                    .iter()
                    .map(|&e| {
                        if grade == 5 || e == EfficacyTier5::Death {
                            11
                        } else {
                            grade + e.ordinal_score()
                        }
                    })
                    .collect()
            })
            .collect();
        Self {
            name: MatrixName::M6x5,
            rows: (0..6).map(|g| format!("Grade {g}")).collect(),
            cols: EfficacyTier5::ALL
                .iter()
                .map(|e| e.code().to_string())
                .collect(),
            scores,
            max_score: 11,
            absorptive: BTreeSet::from([11]),
            one_way_cols: vec![EfficacyTier5::PD.index()],
        }
    }

    pub fn from_config(cfg: MatrixConfig) -> Result<Self, MatrixError> {
        let n_rows = cfg.rows.len();
        let n_cols = cfg.cols.len();
        if n_rows == 0 || n_cols == 0 {
            return Err(MatrixError::Empty);
        }
        if cfg.scores.len() != n_rows || cfg.scores.iter().any(|r| r.len() != n_cols) {
            return Err(MatrixError::ShapeMismatch {
                rows: n_rows,
                cols: n_cols,
            });
        }
        if cfg.max_score == 0 {
            return Err(MatrixError::BadMaxScore(0));
        }
        let absorptive: BTreeSet<u32> = cfg.absorptive.iter().copied().collect();
        let mut seen = BTreeSet::new();
        for &s in cfg.scores.iter().flatten() {
            if s > cfg.max_score {
                return Err(MatrixError::ScoreAboveMax {
                    score: s,
                    max: cfg.max_score,
                });
            }
            if s == cfg.max_score && !absorptive.contains(&s) {
                return Err(MatrixError::BadMaxScore(cfg.max_score));
            }
            seen.insert(s);
        }
        if let Some(&bad) = absorptive.iter().find(|a| !seen.contains(a)) {
            return Err(MatrixError::UnknownAbsorptive(bad));
        }
        if let Some(&bad) = cfg.one_way_cols.iter().find(|&&c| c >= n_cols) {
            return Err(MatrixError::BadOneWayColumn(bad));
        }
        Ok(Self {
            name: MatrixName::Custom(cfg.name.unwrap_or_else(|| "custom".into())),
            rows: cfg.rows,
            cols: cfg.cols,
            scores: cfg.scores,
            max_score: cfg.max_score,
            absorptive,
            one_way_cols: cfg.one_way_cols,
        })
    }

    pub fn from_json_str(s: &str) -> Result<Self, MatrixError> {
        Self::from_config(serde_json::from_str(s)?)
    }

    pub fn from_json_file(path: &Path) -> Result<Self, MatrixError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_config(&self) -> MatrixConfig {
        MatrixConfig {
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            scores: self.scores.clone(),
            absorptive: self.absorptive.iter().copied().collect(),
            max_score: self.max_score,
            one_way_cols: self.one_way_cols.clone(),
            name: Some(self.label()),
        }
    }

    /// Every score multiplied by `factor`; the absorptive set is mapped likewise.
    pub fn scaled(&self, factor: u32) -> Self {
        assert!(factor > 0, "scale factor must be positive");
        Self {
            name: MatrixName::Custom(format!("{}x{factor}", self.label())),
            rows: self.rows.clone(),
            cols: self.cols.clone(),
            scores: self
                .scores
                .iter()
                .map(|r| r.iter().map(|s| s * factor).collect())
                .collect(),
            max_score: self.max_score * factor,
            absorptive: self.absorptive.iter().map(|s| s * factor).collect(),
            one_way_cols: self.one_way_cols.clone(),
        }
    }

    pub fn name(&self) -> &MatrixName {
        &self.name
    }

    pub fn label(&self) -> String {
        match &self.name {
            MatrixName::M3x3 => "3x3".into(),
            MatrixName::M6x5 => "6x5".into(),
            MatrixName::Custom(n) => n.clone(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.rows
    }

    pub fn col_labels(&self) -> &[String] {
        &self.cols
    }

    pub fn max_score(&self) -> u32 {
        self.max_score
    }

    pub fn absorptive_scores(&self) -> &BTreeSet<u32> {
        &self.absorptive
    }

    pub fn one_way_cols(&self) -> &[usize] {
        &self.one_way_cols
    }

    /// Score of cell (toxicity row, efficacy column). Panics on out-of-range indices.
    pub fn score(&self, row: usize, col: usize) -> HealthScore {
        HealthScore(self.scores[row][col])
    }

    pub fn try_score(&self, row: usize, col: usize) -> Option<HealthScore> {
        self.scores
            .get(row)
            .and_then(|r| r.get(col))
            .map(|&s| HealthScore(s))
    }

    /// Efficacy-only score: the column value on the no-toxicity row.
    pub fn efficacy_only(&self, col: usize) -> HealthScore {
        self.score(0, col)
    }

    pub fn is_absorptive(&self, score: HealthScore) -> bool {
        self.absorptive.contains(&score.0)
    }

    pub fn is_cell_absorptive(&self, row: usize, col: usize) -> bool {
        self.is_absorptive(self.score(row, col))
    }

    pub fn contains_score(&self, score: HealthScore) -> bool {
        score.0 <= self.max_score
    }
}

pub fn score_3x3(tox: ToxicityTier3, eff: EfficacyTier3) -> HealthScore {
    HealthScore(TABLE_3X3[tox as usize][eff as usize])
}

pub fn score_6x5(grade: ToxicityGrade, eff: EfficacyTier5) -> HealthScore {
    if grade.is_fatal() || eff == EfficacyTier5::Death {
        HealthScore(11)
    } else {
        HealthScore(grade.get() as u32 + eff.ordinal_score())
    }
}

pub fn efficacy_only_score(eff: EfficacyTier5) -> HealthScore {
    HealthScore(eff.ordinal_score())
}

pub fn is_absorptive(score: HealthScore, matrix: &RbaMatrix) -> bool {
    matrix.is_absorptive(score)
}
