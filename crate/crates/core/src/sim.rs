//! Discrete-time stochastic simulation of two-arm randomised trials.
//!
//! Patients are stepped weekly. Each week the toxicity coordinate may move to
//! any non-fatal tier (nearer tiers being more likely) or to the fatal tier;
//! every fourth week the efficacy coordinate may move by at most one tier.
//! The experimental arm scales adverse-direction probabilities by the hazard
//! ratios; recovery probabilities are shared between arms.

use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrices::RbaMatrix;
use crate::seeding;
use crate::trajectory::{
    Endpoint, Group, PatientTrajectory, StatePath, TierState, TimeUnit, TrajectoryError,
    TrialDataset,
};

pub const WEEKS_PER_MONTH: u32 = 4;
pub const EXPERIMENTAL: &str = "experimental";
pub const CONTROL: &str = "control";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("unknown scenario {0:?} (expected i, ii, iii, iv or v)")]
    UnknownCase(String),
    #[error("calibration failed: {0}")]
    CalibrationFailed(String),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config file: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "3x3")]
    M3x3,
    #[serde(rename = "6x5")]
    M6x5,
}

impl Model {
    pub fn matrix(self) -> RbaMatrix {
        match self {
            Model::M3x3 => RbaMatrix::m3x3(),
            Model::M6x5 => RbaMatrix::m6x5(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Model::M3x3 => "3x3",
            Model::M6x5 => "6x5",
        }
    }

    /// Tiers at enrolment: no toxicity; healthy (3x3) or stable disease (6x5).
    pub fn initial_state(self) -> TierState {
        match self {
            Model::M3x3 => TierState { tox: 0, eff: 0 },
            Model::M6x5 => TierState { tox: 0, eff: 2 },
        }
    }

    fn fatal_tox(self) -> usize {
        match self {
            Model::M3x3 => 2,
            Model::M6x5 => 5,
        }
    }

    fn death_col(self) -> usize {
        match self {
            Model::M3x3 => 2,
            Model::M6x5 => 4,
        }
    }

    /// Efficacy tier from which the only move is death from disease.
    fn pre_death_col(self) -> usize {
        self.death_col() - 1
    }
}

impl FromStr for Model {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "3x3" => Ok(Model::M3x3),
            "6x5" => Ok(Model::M6x5),
            other => Err(SimError::InvalidConfig(format!("unknown model {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineRates {
    /// Weekly probability that a non-fatal toxicity transition occurs.
    pub p_tox_event: f64,
    /// Relative likelihood multiplier per tier of distance for toxicity moves.
    pub proximity_decay: f64,
    /// Weekly probability of fatal toxicity.
    pub p_tox_fatal: f64,
    /// Monthly probability of a one-tier efficacy improvement.
    pub p_respond: f64,
    /// Monthly probability of the PR to CR step (6x5); `p_respond` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_complete: Option<f64>,
    /// Monthly probability of a one-tier efficacy deterioration.
    pub p_worsen: f64,
    /// Monthly probability of death from disease from the last pre-death tier.
    pub p_death_disease: f64,
}

impl BaselineRates {
    pub fn zero() -> Self {
        Self {
            p_tox_event: 0.0,
            proximity_decay: 0.5,
            p_tox_fatal: 0.0,
            p_respond: 0.0,
            p_complete: None,
            p_worsen: 0.0,
            p_death_disease: 0.0,
        }
    }

    pub fn p_complete(&self) -> f64 {
        self.p_complete.unwrap_or(self.p_respond)
    }
}

/// Target rates and definition recorded alongside a calibrated baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationInfo {
    pub cr_rate: f64,
    pub pr_rate: f64,
    /// `mutually_exclusive`: PR means best response PR (never reached CR).
    pub best_response: String,
    pub achieved_cr: f64,
    pub achieved_pr: f64,
    pub n_patients: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub model: Model,
    pub sample_size: usize,
    pub duration_weeks: u32,
    pub hr_efficacy: f64,
    pub hr_toxicity: f64,
    pub baseline: BaselineRates,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationInfo>,
}

const M3X3_DEFAULT: &str = include_str!("../configs/m3x3_default.json");
const M6X5_CALIBRATED: &str = include_str!("../configs/m6x5_calibrated.json");

impl SimConfig {
    /// Shipped default configuration for a model.
    pub fn shipped(model: Model) -> Self {
        let text = match model {
            Model::M3x3 => M3X3_DEFAULT,
            Model::M6x5 => M6X5_CALIBRATED,
        };
        serde_json::from_str(text).expect("shipped config parses")
    }

    pub fn from_json_file(path: &std::path::Path) -> Result<Self, SimError> {
        let cfg: SimConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn arm_sizes(&self) -> (usize, usize) {
        (
            self.sample_size / 2,
            self.sample_size - self.sample_size / 2,
        )
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.sample_size < 2 {
            return bad(format!(
                "sample_size must be at least 2, got {}",
                self.sample_size
            ));
        }
        if self.duration_weeks == 0 {
            return bad("duration_weeks must be positive".into());
        }
        for (name, hr) in [
            ("hr_efficacy", self.hr_efficacy),
            ("hr_toxicity", self.hr_toxicity),
        ] {
            if !(hr > 0.0 && hr.is_finite()) {
                return bad(format!("{name} must be positive, got {hr}"));
            }
        }
        let b = &self.baseline;
        for (name, p) in [
            ("p_tox_event", b.p_tox_event),
            ("p_tox_fatal", b.p_tox_fatal),
            ("p_respond", b.p_respond),
            ("p_complete", b.p_complete()),
            ("p_worsen", b.p_worsen),
            ("p_death_disease", b.p_death_disease),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} must be in [0, 1], got {p}"));
            }
        }
        if !(b.proximity_decay > 0.0 && b.proximity_decay < 1.0) {
            return bad(format!(
                "proximity_decay must be in (0, 1), got {}",
                b.proximity_decay
            ));
        }
        for arm in [Arm::Control, Arm::Experimental] {
            Kernel::new(self, arm).check()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    Control,
    Experimental,
}

/// Discrete-time proportional hazards: `1 - (1 - p)^hr`.
pub fn apply_hr(p: f64, hr: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if p >= 1.0 {
        1.0
    } else {
        -(hr * (-p).ln_1p()).exp_m1()
    }
}

/// Per-arm transition probabilities, precomputed as cumulative thresholds.
struct Kernel {
    model: Model,
    /// `tox_cdf[g]`: cumulative thresholds over `(target tier, prob)`; the fatal tier comes first.
    tox_cdf: Vec<Vec<(usize, f64)>>,
    p_respond: f64,
    p_complete: f64,
    p_worsen: f64,
    p_death: f64,
}

impl Kernel {
    fn new(cfg: &SimConfig, arm: Arm) -> Self {
        let (hr_eff, hr_tox) = match arm {
            Arm::Control => (1.0, 1.0),
            Arm::Experimental => (cfg.hr_efficacy, cfg.hr_toxicity),
        };
        let b = &cfg.baseline;
        let fatal = cfg.model.fatal_tox();
        let tox_cdf = (0..fatal)
            .map(|g| {
                let norm: f64 = (0..fatal)
                    .filter(|&k| k != g)
                    .map(|k| b.proximity_decay.powi(k.abs_diff(g) as i32))
                    .sum();
                let mut acc = apply_hr(b.p_tox_fatal, hr_tox);
                let mut cdf = vec![(fatal, acc)];
                for k in (0..fatal).filter(|&k| k != g) {
                    let base = b.p_tox_event * b.proximity_decay.powi(k.abs_diff(g) as i32) / norm;
                    acc += if k > g { apply_hr(base, hr_tox) } else { base };
                    cdf.push((k, acc));
                }
                cdf
            })
            .collect();
        Self {
            model: cfg.model,
            tox_cdf,
            p_respond: b.p_respond,
            p_complete: b.p_complete(),
            p_worsen: apply_hr(b.p_worsen, hr_eff),
            p_death: apply_hr(b.p_death_disease, hr_eff),
        }
    }

    fn check(&self) -> Result<(), SimError> {
        for (g, cdf) in self.tox_cdf.iter().enumerate() {
            let total = cdf.last().map_or(0.0, |x| x.1);
            if total > 1.0 + 1e-12 {
                return Err(SimError::InvalidConfig(format!(
                    "weekly toxicity probabilities from tier {g} sum to {total:.4} > 1"
                )));
            }
        }
        for (name, p) in [
            ("p_respond + p_worsen", self.p_respond + self.p_worsen),
            ("p_complete + p_worsen", self.p_complete + self.p_worsen),
            ("p_respond + p_death_disease", self.p_respond + self.p_death),
        ] {
            if p > 1.0 + 1e-12 {
                return Err(SimError::InvalidConfig(format!(
                    "{name} = {p:.4} exceeds 1"
                )));
            }
        }
        Ok(())
    }

    fn next_tox(&self, tox: usize, u: f64) -> usize {
        self.tox_cdf[tox]
            .iter()
            .find(|&&(_, c)| u < c)
            .map_or(tox, |&(k, _)| k)
    }

    fn next_eff(&self, eff: usize, u: f64) -> usize {
        let m = self.model;
        if eff == m.pre_death_col() {
            match m {
                // PD is one-way: only death remains
                Model::M6x5 => {
                    if u < self.p_death {
                        eff + 1
                    } else {
                        eff
                    }
                }
                Model::M3x3 => {
                    if u < self.p_death {
                        eff + 1
                    } else if u < self.p_death + self.p_respond {
                        eff - 1
                    } else {
                        eff
                    }
                }
            }
        } else if u < self.p_worsen {
            eff + 1
        } else if eff > 0 {
            let p_up = if m == Model::M6x5 && eff == 1 {
                self.p_complete
            } else {
                self.p_respond
            };
            if u < self.p_worsen + p_up {
                eff - 1
            } else {
                eff
            }
        } else {
            eff
        }
    }
}

fn run_patient(cfg: &SimConfig, kernel: &Kernel, id: String, group: &str, index: u64) -> StatePath {
    let model = cfg.model;
    let mut rng = seeding::stream(cfg.seed, &[index]);
    let mut state = model.initial_state();
    let mut states = vec![(0.0, state)];
    let mut censor = cfg.duration_weeks as f64;
    for week in 1..=cfg.duration_weeks {
        let mut next = state;
        next.tox = kernel.next_tox(state.tox, rng.random::<f64>());
        if next.tox != model.fatal_tox() && week % WEEKS_PER_MONTH == 0 {
            next.eff = kernel.next_eff(state.eff, rng.random::<f64>());
        }
        if next != state {
            states.push((week as f64, next));
            state = next;
        }
        if state.tox == model.fatal_tox() || state.eff == model.death_col() {
            censor = week as f64;
            break;
        }
    }
    StatePath {
        id,
        group: group.into(),
        states,
        censor_time: censor,
    }
}

/// Simulates one patient's tier path. `index` selects the patient's random stream.
pub fn simulate_patient_path(cfg: &SimConfig, arm: Arm, index: u64) -> Result<StatePath, SimError> {
    cfg.validate()?;
    let kernel = Kernel::new(cfg, arm);
    let group = match arm {
        Arm::Control => CONTROL,
        Arm::Experimental => EXPERIMENTAL,
    };
    Ok(run_patient(
        cfg,
        &kernel,
        format!("P{index:05}"),
        group,
        index,
    ))
}

pub fn simulate_patient(
    cfg: &SimConfig,
    arm: Arm,
    index: u64,
) -> Result<PatientTrajectory, SimError> {
    let path = simulate_patient_path(cfg, arm, index)?;
    Ok(path.to_trajectory(&cfg.model.matrix(), Endpoint::Rba)?)
}

/// Tier paths for both arms of one simulated trial (experimental arm first).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialPaths {
    pub model: Model,
    pub matrix: Arc<RbaMatrix>,
    pub experimental: Vec<StatePath>,
    pub control: Vec<StatePath>,
}

impl TrialPaths {
    /// Scores every path under `endpoint`. Group order: experimental, control.
    pub fn dataset(&self, endpoint: Endpoint) -> Result<TrialDataset, SimError> {
        let score = |paths: &[StatePath]| -> Result<Vec<PatientTrajectory>, TrajectoryError> {
            paths
                .iter()
                .map(|p| p.to_trajectory(&self.matrix, endpoint))
                .collect()
        };
        Ok(TrialDataset::new(
            self.matrix.clone(),
            TimeUnit::Week,
            vec![
                Group {
                    name: EXPERIMENTAL.into(),
                    patients: score(&self.experimental)?,
                },
                Group {
                    name: CONTROL.into(),
                    patients: score(&self.control)?,
                },
            ],
        )?)
    }
}

/// Simulates a full trial. Control patients take stream indices `0..n_control`,
/// experimental patients the following indices, so output depends only on the config.
pub fn simulate_trial_paths(cfg: &SimConfig) -> Result<TrialPaths, SimError> {
    cfg.validate()?;
    let (n_control, n_exp) = cfg.arm_sizes();
    let kernels = [
        Kernel::new(cfg, Arm::Control),
        Kernel::new(cfg, Arm::Experimental),
    ];
    let mut all: Vec<StatePath> = (0..cfg.sample_size)
        .into_par_iter()
        .map(|i| {
            let (k, group) = if i < n_control {
                (&kernels[0], CONTROL)
            } else {
                (&kernels[1], EXPERIMENTAL)
            };
            run_patient(cfg, k, format!("P{:05}", i), group, i as u64)
        })
        .collect();
    let experimental = all.split_off(n_control);
    debug_assert_eq!(experimental.len(), n_exp);
    Ok(TrialPaths {
        model: cfg.model,
        matrix: Arc::new(cfg.model.matrix()),
        experimental,
        control: all,
    })
}

pub fn simulate_trial(cfg: &SimConfig) -> Result<TrialDataset, SimError> {
    simulate_trial_paths(cfg)?.dataset(Endpoint::Rba)
}

/// The five relative efficacy/toxicity cases of the 3x3 model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    I,
    Ii,
    Iii,
    Iv,
    V,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::I,
        Scenario::Ii,
        Scenario::Iii,
        Scenario::Iv,
        Scenario::V,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::I => "i",
            Scenario::Ii => "ii",
            Scenario::Iii => "iii",
            Scenario::Iv => "iv",
            Scenario::V => "v",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Scenario::I => "more efficacy, same toxicity",
            Scenario::Ii => "same efficacy, less toxicity",
            Scenario::Iii => "more efficacy, less toxicity",
            Scenario::Iv => "more efficacy, more toxicity",
            Scenario::V => "same efficacy, same toxicity",
        }
    }
}

impl FromStr for Scenario {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| SimError::UnknownCase(s.into()))
    }
}

/// `(hr_efficacy, hr_toxicity)` for a 3x3 scenario.
pub fn scenario_3x3(case: Scenario) -> (f64, f64) {
    match case {
        Scenario::I => (0.5, 1.0),
        Scenario::Ii => (1.0, 0.5),
        Scenario::Iii => (0.5, 0.5),
        Scenario::Iv => (0.5, 2.0),
        Scenario::V => (1.0, 1.0),
    }
}

/// Best-response rates of a simulated control arm (mutually exclusive categories).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub cr: f64,
    pub pr: f64,
}

pub fn control_best_response(base: &SimConfig, n_patients: usize, seed: u64) -> BestResponse {
    let cfg = SimConfig {
        seed,
        sample_size: 2,
        hr_efficacy: 1.0,
        hr_toxicity: 1.0,
        ..base.clone()
    };
    let kernel = Kernel::new(&cfg, Arm::Control);
    let (cr, pr) = (0..n_patients)
        .into_par_iter()
        .map(|i| {
            let path = run_patient(&cfg, &kernel, String::new(), CONTROL, i as u64);
            let best = path.states.iter().map(|s| s.1.eff).min().unwrap_or(2);
            ((best == 0) as usize, (best == 1) as usize)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    BestResponse {
        cr: cr as f64 / n_patients as f64,
        pr: pr as f64 / n_patients as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub cr_rate: f64,
    pub pr_rate: f64,
    pub tolerance: f64,
    pub n_patients: usize,
    pub seed: u64,
}

impl CalibrationTargets {
    pub fn new(cr_rate: f64, pr_rate: f64) -> Self {
        Self {
            cr_rate,
            pr_rate,
            tolerance: 0.02,
            n_patients: 20_000,
            seed: 0x00C0_FFEE,
        }
    }
}

/// Smallest `x` in `[0, hi]` with `rate(x) >= target`, assuming `rate` is non-decreasing.
fn bisect_rate(hi: f64, target: f64, rate: impl Fn(f64) -> f64) -> f64 {
    if rate(0.0) >= target {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, hi);
    if rate(hi) < target {
        return hi;
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if rate(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Solves the control arm's response rates for the best-response targets,
/// holding every other rate in `base` fixed.
///
/// Reaching PR-or-better only involves the SD to PR step, so `p_respond` is
/// bisected against `cr_rate + pr_rate` first; `p_complete` (PR to CR) is then
/// bisected against `cr_rate`. Every evaluation reuses the same patient streams.
pub fn calibrate_control(
    base: &SimConfig,
    targets: &CalibrationTargets,
) -> Result<SimConfig, SimError> {
    if base.model != Model::M6x5 {
        return Err(SimError::InvalidConfig(
            "calibration applies to the 6x5 model".into(),
        ));
    }
    let t = *targets;
    for (name, v) in [("cr_rate", t.cr_rate), ("pr_rate", t.pr_rate)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(SimError::InvalidConfig(format!("{name} must be in [0, 1]")));
        }
    }
    let q = base.baseline.p_worsen;
    let with = |r: f64, c: f64| SimConfig {
        baseline: BaselineRates {
            p_respond: r,
            p_complete: Some(c),
            ..base.baseline
        },
        ..base.clone()
    };
    let measure = |r: f64, c: f64| control_best_response(&with(r, c), t.n_patients, t.seed);

    let r = bisect_rate(1.0 - q, t.cr_rate + t.pr_rate, |r| {
        let br = measure(r, 0.0);
        br.cr + br.pr
    });
    let c = bisect_rate(1.0 - q, t.cr_rate, |c| measure(r, c).cr);
    let br = measure(r, c);
    if (br.cr - t.cr_rate).abs() > t.tolerance || (br.pr - t.pr_rate).abs() > t.tolerance {
        return Err(SimError::CalibrationFailed(format!(
            "closest rates CR {:.3}, PR {:.3} at p_respond {r:.4}, p_complete {c:.4} (p_worsen {q:.4})",
            br.cr, br.pr
        )));
    }
    let mut out = with(r, c);
    out.calibration = Some(CalibrationInfo {
        cr_rate: t.cr_rate,
        pr_rate: t.pr_rate,
        best_response: "mutually_exclusive".into(),
        achieved_cr: br.cr,
        achieved_pr: br.pr,
        n_patients: t.n_patients,
        seed: t.seed,
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(model: Model, baseline: BaselineRates) -> SimConfig {
        SimConfig {
            model,
            sample_size: 20,
            duration_weeks: 52,
            hr_efficacy: 1.0,
            hr_toxicity: 1.0,
            baseline,
            seed: 11,
            calibration: None,
        }
    }

    #[test]
    fn apply_hr_values() {
        assert_relative_eq!(apply_hr(0.1, 1.0), 0.1, epsilon = 1e-15);
        assert_relative_eq!(apply_hr(0.1, 0.5), 1.0 - 0.9f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(apply_hr(0.1, 0.5), 0.05132, epsilon = 1e-5);
        assert_eq!(apply_hr(0.0, 2.0), 0.0);
        assert_eq!(apply_hr(1.0, 0.3), 1.0);
    }

    #[test]
    fn zero_rates_never_change() {
        for model in [Model::M3x3, Model::M6x5] {
            let c = cfg(model, BaselineRates::zero());
            let t = simulate_patient(&c, Arm::Experimental, 3).unwrap();
            assert!(t.changes.is_empty());
            assert!(!t.absorbed);
            assert_eq!(t.censor_time, 52.0);
        }
    }

    #[test]
    fn certain_fatal_toxicity_absorbs_at_week_one() {
        for model in [Model::M3x3, Model::M6x5] {
            let c = cfg(
                model,
                BaselineRates {
                    p_tox_fatal: 1.0,
                    ..BaselineRates::zero()
                },
            );
            let ds = simulate_trial(&c).unwrap();
            for p in ds.groups.iter().flat_map(|g| &g.patients) {
                assert!(p.absorbed);
                assert_eq!(p.censor_time, 1.0);
                assert_eq!(p.final_score().0, ds.matrix.max_score());
            }
        }
    }

    #[test]
    fn trial_shape_and_determinism() {
        let base = SimConfig::shipped(Model::M6x5);
        let c = SimConfig {
            sample_size: 4,
            ..base.clone()
        };
        let ds = simulate_trial(&c).unwrap();
        assert_eq!(ds.groups[0].patients.len(), 2);
        assert_eq!(ds.groups[1].patients.len(), 2);
        let c = SimConfig {
            sample_size: 50,
            ..base
        };
        assert_eq!(simulate_trial(&c).unwrap(), simulate_trial(&c).unwrap());
        let odd = SimConfig {
            sample_size: 51,
            ..c.clone()
        };
        let ds = simulate_trial(&odd).unwrap();
        assert_eq!(ds.groups[0].patients.len(), 26);
        assert_eq!(ds.groups[1].patients.len(), 25);
        let other = SimConfig {
            seed: c.seed + 1,
            ..c.clone()
        };
        assert_ne!(simulate_trial(&c).unwrap(), simulate_trial(&other).unwrap());
    }

    #[test]
    fn invalid_configs_rejected() {
        let base = cfg(Model::M3x3, BaselineRates::zero());
        let mut c = base.clone();
        c.hr_efficacy = 0.0;
        assert!(matches!(c.validate(), Err(SimError::InvalidConfig(_))));
        let mut c = base.clone();
        c.sample_size = 1;
        assert!(c.validate().is_err());
        let mut c = base.clone();
        c.baseline.p_respond = 0.8;
        c.baseline.p_worsen = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg(Model::M6x5, BaselineRates::zero());
        c.baseline.p_tox_event = 0.7;
        c.hr_toxicity = 3.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn scenarios() {
        assert_eq!(scenario_3x3("i".parse().unwrap()), (0.5, 1.0));
        assert_eq!(scenario_3x3(Scenario::Ii), (1.0, 0.5));
        assert_eq!(scenario_3x3(Scenario::Iii), (0.5, 0.5));
        assert_eq!(scenario_3x3("IV".parse().unwrap()), (0.5, 2.0));
        assert_eq!(scenario_3x3(Scenario::V), (1.0, 1.0));
        assert!(matches!(
            "vi".parse::<Scenario>(),
            Err(SimError::UnknownCase(_))
        ));
    }

    #[test]
    fn efficacy_moves_one_tier_per_month() {
        for model in [Model::M3x3, Model::M6x5] {
            let c = SimConfig {
                sample_size: 200,
                duration_weeks: 104,
                ..SimConfig::shipped(model)
            };
            let paths = simulate_trial_paths(&c).unwrap();
            let m = model.matrix();
            for p in paths.control.iter().chain(&paths.experimental) {
                p.validate(&m).unwrap();
                for w in p.states.windows(2) {
                    let (t0, a) = w[0];
                    let (t1, b) = w[1];
                    assert_eq!(t1.fract(), 0.0);
                    assert!(t1 > t0);
                    if a.eff != b.eff {
                        assert_eq!(t1 as u32 % WEEKS_PER_MONTH, 0);
                        assert_eq!(a.eff.abs_diff(b.eff), 1);
                    }
                }
            }
        }
    }

    #[test]
    fn calibration_boundaries() {
        let base = SimConfig::shipped(Model::M6x5);
        let zero = CalibrationTargets {
            n_patients: 2000,
            ..CalibrationTargets::new(0.0, 0.0)
        };
        let out = calibrate_control(&base, &zero).unwrap();
        assert_eq!(out.baseline.p_respond, 0.0);

        let infeasible = CalibrationTargets {
            n_patients: 2000,
            ..CalibrationTargets::new(1.0, 0.0)
        };
        let mut high_worsen = base.clone();
        high_worsen.baseline.p_worsen = 0.5;
        assert!(matches!(
            calibrate_control(&high_worsen, &infeasible),
            Err(SimError::CalibrationFailed(_))
        ));
    }
}
