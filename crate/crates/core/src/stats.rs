//! Weighted product-limit curves and the weighted logrank test.
//!
//! Every state change carries a weight `w = (s_new - s_old) / max_score`, so a
//! deterioration is positive, an improvement negative, and a jump from the best
//! state to an absorptive one counts as a full event (`w = 1`). At each distinct
//! change time the risk set holds every patient still under observation; a
//! patient entering an absorptive state is at risk at that time and leaves
//! immediately after.
//!
//! The test statistic compares each group's observed weight sum with its share
//! of the pooled weight sum, with the variance taken from the exact
//! finite-population moments of drawing the event weights without replacement
//! across the two groups. On unit-weight, irreversible data this is exactly the
//! classic logrank test with ties.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::seeding;
use crate::trajectory::TrialDataset;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need exactly two groups, got {0}")]
    FewerThanTwoGroups(usize),
    #[error("group {0:?} has no patients")]
    EmptyGroup(String),
    #[error("unknown group {0:?}")]
    UnknownGroup(String),
    #[error("permutation count must be positive")]
    NoPermutations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub time: f64,
    pub at_risk: [usize; 2],
    /// Signed weight sum per group.
    pub weight_sum: [f64; 2],
    /// Absolute weight sum per group.
    pub abs_weight_sum: [f64; 2],
    /// Pooled sum of weights and of squared weights.
    pub pooled_w: f64,
    pub pooled_w2: f64,
}

impl EventRow {
    pub fn n_total(&self) -> usize {
        self.at_risk[0] + self.at_risk[1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    pub groups: [String; 2],
    pub rows: Vec<EventRow>,
}

struct Prepared<'a> {
    ds: &'a TrialDataset,
    exits: [Vec<f64>; 2],
}

fn prepare(ds: &TrialDataset) -> Result<Prepared<'_>, StatsError> {
    if ds.groups.len() != 2 {
        return Err(StatsError::FewerThanTwoGroups(ds.groups.len()));
    }
    for g in &ds.groups {
        if g.patients.is_empty() {
            return Err(StatsError::EmptyGroup(g.name.clone()));
        }
    }
    let exits = [0, 1].map(|g| {
        let mut v: Vec<f64> = ds.groups[g]
            .patients
            .iter()
            .map(|p| p.censor_time)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    });
    Ok(Prepared { ds, exits })
}

impl Prepared<'_> {
    fn at_risk(&self, g: usize, t: f64) -> usize {
        let v = &self.exits[g];
        v.len() - v.partition_point(|&e| e < t)
    }

    fn table(&self) -> EventTable {
        let max = self.ds.matrix.max_score();
        let mut events: Vec<(f64, usize, f64)> = Vec::new();
        for (g, grp) in self.ds.groups.iter().enumerate() {
            for p in &grp.patients {
                events.extend(p.weighted_changes(max).map(|(t, w)| (t, g, w)));
            }
        }
        events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut rows: Vec<EventRow> = Vec::new();
        for (t, g, w) in events {
            if rows.last().is_none_or(|r| r.time != t) {
                rows.push(EventRow {
                    time: t,
                    at_risk: [self.at_risk(0, t), self.at_risk(1, t)],
                    weight_sum: [0.0; 2],
                    abs_weight_sum: [0.0; 2],
                    pooled_w: 0.0,
                    pooled_w2: 0.0,
                });
            }
            let row = rows.last_mut().expect("row pushed above");
            row.weight_sum[g] += w;
            row.abs_weight_sum[g] += w.abs();
            row.pooled_w += w;
            row.pooled_w2 += w * w;
        }
        EventTable {
            groups: [
                self.ds.groups[0].name.clone(),
                self.ds.groups[1].name.clone(),
            ],
            rows,
        }
    }
}

/// One row per distinct change time across both groups.
pub fn event_table(ds: &TrialDataset) -> Result<EventTable, StatsError> {
    Ok(prepare(ds)?.table())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCurve {
    pub group: String,
    /// `(time, value)` starting at `(0, 1)`; one point per event time of this group.
    pub points: Vec<(f64, f64)>,
    /// Last observation time in the group, for drawing the tail.
    pub end_time: f64,
}

impl WeightedCurve {
    pub fn final_value(&self) -> f64 {
        self.points.last().map_or(1.0, |p| p.1)
    }

    /// Step-function value at `t` (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        let idx = self.points.partition_point(|p| p.0 <= t);
        if idx == 0 {
            1.0
        } else {
            self.points[idx - 1].1
        }
    }
}

/// Weighted product-limit curve of one group of a two-group dataset.
///
/// Values are not clamped: net improvement from baseline lifts the curve above 1.
pub fn weighted_curve(ds: &TrialDataset, group: &str) -> Result<WeightedCurve, StatsError> {
    let g = ds
        .groups
        .iter()
        .position(|x| x.name == group)
        .ok_or_else(|| StatsError::UnknownGroup(group.into()))?;
    let table = event_table(ds)?;
    Ok(curve_from_table(ds, &table, g))
}

/// Curves for both groups of a two-group dataset.
pub fn weighted_curves(ds: &TrialDataset) -> Result<[WeightedCurve; 2], StatsError> {
    let table = event_table(ds)?;
    Ok([
        curve_from_table(ds, &table, 0),
        curve_from_table(ds, &table, 1),
    ])
}

fn curve_from_table(ds: &TrialDataset, table: &EventTable, g: usize) -> WeightedCurve {
    let mut value = 1.0;
    let mut points = vec![(0.0, 1.0)];
    for row in &table.rows {
        if row.abs_weight_sum[g] == 0.0 {
            continue;
        }
        value *= 1.0 - row.weight_sum[g] / row.at_risk[g] as f64;
        points.push((row.time, value));
    }
    let end_time = ds.groups[g]
        .patients
        .iter()
        .map(|p| p.censor_time)
        .fold(0.0, f64::max);
    WeightedCurve {
        group: ds.groups[g].name.clone(),
        points,
        end_time,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestMethod {
    Normal,
    Permutation,
}

impl TestMethod {
    pub fn label(self) -> &'static str {
        match self {
            TestMethod::Normal => "normal",
            TestMethod::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogrankResult {
    /// Observed minus expected weighted events for the first group.
    pub u: f64,
    pub v: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub method: TestMethod,
    pub n_permutations: u64,
    /// Set when the permutation p-value came from full enumeration.
    #[serde(default)]
    pub exhaustive: bool,
    /// No state changes in either group; the statistic is reported as zero.
    #[serde(default)]
    pub no_events: bool,
}

impl LogrankResult {
    /// Whether the first group fared better (negative U: less weighted deterioration).
    pub fn first_group_better(&self) -> bool {
        self.u < 0.0
    }
}

fn moments(table: &EventTable) -> (f64, f64) {
    let mut u = 0.0;
    let mut v = 0.0;
    for row in &table.rows {
        let n1 = row.at_risk[0] as f64;
        let n2 = row.at_risk[1] as f64;
        let n = n1 + n2;
        u += row.weight_sum[0] - n1 / n * row.pooled_w;
        if row.n_total() > 1 {
            let spread = (n * row.pooled_w2 - row.pooled_w * row.pooled_w).max(0.0);
            v += n1 * n2 * spread / (n * n * (n - 1.0));
        }
    }
    (u, v)
}

pub fn normal_two_sided_p(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0)
}

/// Weighted logrank test with a normal approximation.
pub fn weighted_logrank(ds: &TrialDataset) -> Result<LogrankResult, StatsError> {
    let table = event_table(ds)?;
    Ok(logrank_from_table(&table))
}

pub fn logrank_from_table(table: &EventTable) -> LogrankResult {
    let (u, v) = moments(table);
    let (z, p) = if v > 0.0 {
        let z = u / v.sqrt();
        (z, normal_two_sided_p(z))
    } else {
        (0.0, 1.0)
    };
    LogrankResult {
        u,
        v,
        z,
        p_two_sided: p,
        method: TestMethod::Normal,
        n_permutations: 0,
        exhaustive: false,
        no_events: table.rows.is_empty(),
    }
}

/// Patient-level decomposition of U.
///
/// U is linear in the group labels: `U = sum over first-group patients of a_i`
/// where `a_i` is the patient's own weight sum minus the pooled per-capita
/// weight over the times it was at risk. The risk sets and pooled sums do not
/// depend on labels, so relabelling only changes which `a_i` are summed.
#[derive(Debug, Clone)]
pub struct PatientScores {
    /// One entry per patient, first group first.
    pub scores: Vec<f64>,
    pub n_first: usize,
}

impl PatientScores {
    pub fn observed_u(&self) -> f64 {
        self.scores[..self.n_first].iter().sum()
    }
}

pub fn patient_scores(ds: &TrialDataset) -> Result<PatientScores, StatsError> {
    let prep = prepare(ds)?;
    let table = prep.table();
    let max = ds.matrix.max_score();
    let times: Vec<f64> = table.rows.iter().map(|r| r.time).collect();
    let mut cumulative = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for row in &table.rows {
        acc += row.pooled_w / row.n_total() as f64;
        cumulative.push(acc);
    }
    let scores = ds
        .groups
        .iter()
        .flat_map(|g| g.patients.iter())
        .map(|p| {
            let own: f64 = p.weighted_changes(max).map(|(_, w)| w).sum();
            let k = times.partition_point(|&t| t <= p.censor_time);
            own - if k == 0 { 0.0 } else { cumulative[k - 1] }
        })
        .collect();
    Ok(PatientScores {
        scores,
        n_first: ds.groups[0].patients.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PermutationMode {
    /// Full enumeration when the dataset has at most [`EXHAUSTIVE_MAX_PATIENTS`] patients.
    Auto,
    Exhaustive,
    Sampled,
}

pub const EXHAUSTIVE_MAX_PATIENTS: usize = 12;
const PERMUTATION_CHUNK: u64 = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationSpec {
    pub n_perm: u64,
    pub seed: u64,
    pub mode: PermutationMode,
}

/// Whether `|u| >= |observed|`, with slack for summation-order rounding.
#[inline]
fn at_least_as_extreme(u: f64, observed_abs: f64, slack: f64) -> bool {
    u.abs() >= observed_abs - slack
}

pub fn permutation_logrank(
    ds: &TrialDataset,
    n_perm: u64,
    seed: u64,
) -> Result<LogrankResult, StatsError> {
    permutation_logrank_with(
        ds,
        PermutationSpec {
            n_perm,
            seed,
            mode: PermutationMode::Auto,
        },
    )
}

/// Permutation version of the weighted logrank test; group labels are
/// reassigned while trajectories stay fixed. U, V and Z are those of the
/// observed labelling; only the p-value comes from the permutation distribution.
pub fn permutation_logrank_with(
    ds: &TrialDataset,
    spec: PermutationSpec,
) -> Result<LogrankResult, StatsError> {
    let table = event_table(ds)?;
    let base = logrank_from_table(&table);
    let ps = patient_scores(ds)?;
    let observed = ps.observed_u().abs();
    let slack = 1e-9 * ps.scores.iter().map(|a| a.abs()).sum::<f64>();

    let exhaustive = match spec.mode {
        PermutationMode::Exhaustive => true,
        PermutationMode::Sampled => false,
        PermutationMode::Auto => ps.scores.len() <= EXHAUSTIVE_MAX_PATIENTS,
    };
    let (p, count) = if exhaustive {
        let (hits, total) = enumerate_extreme(&ps, observed, slack);
        (hits as f64 / total as f64, total)
    } else {
        if spec.n_perm == 0 {
            return Err(StatsError::NoPermutations);
        }
        let hits = sample_extreme(&ps, observed, slack, spec.n_perm, spec.seed);
        ((1 + hits) as f64 / (1 + spec.n_perm) as f64, spec.n_perm)
    };
    Ok(LogrankResult {
        p_two_sided: p.clamp(0.0, 1.0),
        method: TestMethod::Permutation,
        n_permutations: count,
        exhaustive,
        ..base
    })
}

/// Counts label assignments (of `n_first` patients to the first group) at
/// least as extreme as observed, over all `C(n, n_first)` assignments.
fn enumerate_extreme(ps: &PatientScores, observed: f64, slack: f64) -> (u64, u64) {
    #[allow(clippy::too_many_arguments)]
    fn walk(
        a: &[f64],
        start: usize,
        left: usize,
        partial: f64,
        observed: f64,
        slack: f64,
        hits: &mut u64,
        total: &mut u64,
    ) {
        if left == 0 {
            *total += 1;
            if at_least_as_extreme(partial, observed, slack) {
                *hits += 1;
            }
            return;
        }
        for i in start..=a.len() - left {
            walk(
                a,
                i + 1,
                left - 1,
                partial + a[i],
                observed,
                slack,
                hits,
                total,
            );
        }
    }
    let mut hits = 0;
    let mut total = 0;
    walk(
        &ps.scores, 0, ps.n_first, 0.0, observed, slack, &mut hits, &mut total,
    );
    (hits, total)
}

fn sample_extreme(ps: &PatientScores, observed: f64, slack: f64, n_perm: u64, seed: u64) -> u64 {
    let n = ps.scores.len();
    let chunks = n_perm.div_ceil(PERMUTATION_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeding::stream(seed, &[c]);
            let draws = PERMUTATION_CHUNK.min(n_perm - c * PERMUTATION_CHUNK);
            let mut hits = 0u64;
            for _ in 0..draws {
                let u: f64 = sample(&mut rng, n, ps.n_first)
                    .into_iter()
                    .map(|i| ps.scores[i])
                    .sum();
                if at_least_as_extreme(u, observed, slack) {
                    hits += 1;
                }
            }
            hits
        })
        .sum()
}
