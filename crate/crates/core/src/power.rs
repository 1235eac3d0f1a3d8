//! Monte Carlo power estimation over (hazard ratio, sample size) grids.
//!
//! A replication is one simulated trial tested with the normal-approximation
//! weighted logrank test. Each replication draws from its own stream, seeded
//! from `(seed, sample size, hazard ratios, replication index)`, so any cell or
//! replication can be recomputed alone and results do not depend on the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeding::derive_seed;
use crate::sim::{simulate_trial_paths, SimConfig, SimError};
use crate::stats::{weighted_logrank, StatsError};
use crate::trajectory::Endpoint;

pub const DEFAULT_ALPHA: f64 = 0.05;
pub const TARGET_POWER: f64 = 0.8;

#[derive(Debug, Error)]
pub enum PowerError {
    #[error("replications must be at least 1")]
    NoReplications,
    #[error("empty grid: {0}")]
    EmptyGrid(&'static str),
    #[error("target power {target} not bracketed by the grid")]
    TargetNotBracketed { target: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub endpoint: Endpoint,
    pub hr_efficacy: f64,
    pub hr_toxicity: f64,
    pub sample_size: usize,
    pub replications: usize,
    pub alpha: f64,
    pub significant: usize,
    pub power: f64,
    /// Binomial standard error of `power`.
    pub se: f64,
}

impl PowerPoint {
    fn new(
        cfg: &SimConfig,
        endpoint: Endpoint,
        replications: usize,
        alpha: f64,
        significant: usize,
    ) -> Self {
        let power = significant as f64 / replications as f64;
        Self {
            endpoint,
            hr_efficacy: cfg.hr_efficacy,
            hr_toxicity: cfg.hr_toxicity,
            sample_size: cfg.sample_size,
            replications,
            alpha,
            significant,
            power,
            se: (power * (1.0 - power) / replications as f64).sqrt(),
        }
    }
}

/// Seed of one replication; shared by every endpoint tested on that trial.
pub fn replication_seed(seed: u64, cfg: &SimConfig, rep: usize) -> u64 {
    derive_seed(
        seed,
        &[
            cfg.sample_size as u64,
            cfg.hr_efficacy.to_bits(),
            cfg.hr_toxicity.to_bits(),
            rep as u64,
        ],
    )
}

/// p-values of one replication, one per endpoint, all on the same simulated trial.
pub fn replicate(
    cfg: &SimConfig,
    endpoints: &[Endpoint],
    seed: u64,
    rep: usize,
) -> Result<Vec<f64>, PowerError> {
    let trial_cfg = SimConfig {
        seed: replication_seed(seed, cfg, rep),
        ..cfg.clone()
    };
    let paths = simulate_trial_paths(&trial_cfg)?;
    endpoints
        .iter()
        .map(|&e| Ok(weighted_logrank(&paths.dataset(e)?)?.p_two_sided))
        .collect()
}

/// Power for several endpoints evaluated on the same replications.
pub fn estimate_power_paired(
    cfg: &SimConfig,
    endpoints: &[Endpoint],
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<Vec<PowerPoint>, PowerError> {
    if replications == 0 {
        return Err(PowerError::NoReplications);
    }
    if endpoints.is_empty() {
        return Err(PowerError::EmptyGrid("no endpoints"));
    }
    cfg.validate()?;
    let pvals: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|rep| replicate(cfg, endpoints, seed, rep))
        .collect::<Result<_, _>>()?;
    Ok(endpoints
        .iter()
        .enumerate()
        .map(|(k, &e)| {
            let sig = pvals.iter().filter(|p| p[k] < alpha).count();
            PowerPoint::new(cfg, e, replications, alpha, sig)
        })
        .collect())
}

pub fn estimate_power(
    cfg: &SimConfig,
    endpoint: Endpoint,
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerPoint, PowerError> {
    Ok(estimate_power_paired(cfg, &[endpoint], replications, alpha, seed)?.remove(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsAtTarget {
    pub endpoint: Endpoint,
    pub hr_efficacy: f64,
    pub hr_toxicity: f64,
    pub target_power: f64,
    /// `None` when the grid never crosses the target.
    pub sample_size: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerGrid {
    pub points: Vec<PowerPoint>,
    pub ss_at_target: Vec<SsAtTarget>,
}

impl PowerGrid {
    pub fn point(&self, endpoint: Endpoint, hr: (f64, f64), ss: usize) -> Option<&PowerPoint> {
        self.points.iter().find(|p| {
            p.endpoint == endpoint
                && p.hr_efficacy == hr.0
                && p.hr_toxicity == hr.1
                && p.sample_size == ss
        })
    }

    /// `(sample size, power)` in grid order for one endpoint and HR pair.
    pub fn curve(&self, endpoint: Endpoint, hr: (f64, f64)) -> Vec<(usize, f64)> {
        self.points
            .iter()
            .filter(|p| p.endpoint == endpoint && p.hr_efficacy == hr.0 && p.hr_toxicity == hr.1)
            .map(|p| (p.sample_size, p.power))
            .collect()
    }

    pub fn ss_at(&self, endpoint: Endpoint, hr: (f64, f64)) -> Option<f64> {
        self.ss_at_target
            .iter()
            .find(|s| s.endpoint == endpoint && s.hr_efficacy == hr.0 && s.hr_toxicity == hr.1)
            .and_then(|s| s.sample_size)
    }
}

/// Power for every `(hr pair, sample size)` cell and endpoint. All endpoints
/// are scored on the same simulated trials.
pub fn power_grid(
    base: &SimConfig,
    ss_list: &[usize],
    hr_list: &[(f64, f64)],
    endpoints: &[Endpoint],
    replications: usize,
    alpha: f64,
    seed: u64,
) -> Result<PowerGrid, PowerError> {
    if ss_list.is_empty() {
        return Err(PowerError::EmptyGrid("no sample sizes"));
    }
    if hr_list.is_empty() {
        return Err(PowerError::EmptyGrid("no hazard ratios"));
    }
    if endpoints.is_empty() {
        return Err(PowerError::EmptyGrid("no endpoints"));
    }
    if replications == 0 {
        return Err(PowerError::NoReplications);
    }
    let cells: Vec<SimConfig> = hr_list
        .iter()
        .flat_map(|&(he, ht)| {
            ss_list.iter().map(move |&ss| SimConfig {
                sample_size: ss,
                hr_efficacy: he,
                hr_toxicity: ht,
                ..base.clone()
            })
        })
        .collect();
    for c in &cells {
        c.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..replications).map(move |r| (c, r)))
        .collect();
    let pvals: Vec<Vec<f64>> = jobs
        .par_iter()
        .map(|&(c, rep)| replicate(&cells[c], endpoints, seed, rep))
        .collect::<Result<_, _>>()?;

    let mut points = Vec::new();
    for &e in endpoints {
        let k = endpoints
            .iter()
            .position(|&x| x == e)
            .expect("endpoint listed");
        for (c, cfg) in cells.iter().enumerate() {
            let sig = pvals[c * replications..(c + 1) * replications]
                .iter()
                .filter(|p| p[k] < alpha)
                .count();
            points.push(PowerPoint::new(cfg, e, replications, alpha, sig));
        }
    }
    let mut grid = PowerGrid {
        points,
        ss_at_target: Vec::new(),
    };
    for &e in endpoints {
        for &hr in hr_list {
            let sample_size = interpolate_ss(&grid.curve(e, hr), TARGET_POWER).ok();
            grid.ss_at_target.push(SsAtTarget {
                endpoint: e,
                hr_efficacy: hr.0,
                hr_toxicity: hr.1,
                target_power: TARGET_POWER,
                sample_size,
            });
        }
    }
    Ok(grid)
}

/// Pool-adjacent-violators fit of a non-decreasing sequence (equal weights).
pub fn isotonic_increasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b_mean, b_n) = blocks[blocks.len() - 1];
            let (a_mean, a_n) = blocks[blocks.len() - 2];
            if a_mean <= b_mean {
                break;
            }
            blocks.pop();
            let n = a_n + b_n;
            *blocks.last_mut().expect("two blocks") =
                ((a_mean * a_n as f64 + b_mean * b_n as f64) / n as f64, n);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(m, n)| std::iter::repeat_n(m, n))
        .collect()
}

/// Sample size at which power first reaches `target`, by linear interpolation
/// between bracketing grid points after isotonic smoothing of power in SS.
pub fn interpolate_ss(curve: &[(usize, f64)], target: f64) -> Result<f64, PowerError> {
    let mut pts = curve.to_vec();
    pts.sort_by_key(|p| p.0);
    let raw: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let smooth = isotonic_increasing(&raw);
    let i = smooth
        .iter()
        .position(|&p| p >= target)
        .ok_or(PowerError::TargetNotBracketed { target })?;
    if i == 0 {
        return Err(PowerError::TargetNotBracketed { target });
    }
    let (x0, y0) = (pts[i - 1].0 as f64, smooth[i - 1]);
    let (x1, y1) = (pts[i].0 as f64, smooth[i]);
    Ok(x0 + (target - y0) * (x1 - x0) / (y1 - y0))
}

/// `start:stop:step`, inclusive of `stop` when it falls on the step.
pub fn parse_ss_range(spec: &str) -> Option<Vec<usize>> {
    let parts: Vec<usize> = spec
        .split(':')
        .map(|s| s.trim().parse().ok())
        .collect::<Option<_>>()?;
    match parts.as_slice() {
        [single] if *single > 0 => Some(vec![*single]),
        [start, stop, step] if *step > 0 && start <= stop && *start > 0 => {
            Some((*start..=*stop).step_by(*step).collect())
        }
        _ => None,
    }
}

/// Runs `f` on a dedicated pool of `workers` threads.
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool")
        .install(f)
}

/// Threads available to parallel work on the current pool.
pub fn current_workers() -> usize {
    rayon::current_num_threads()
}
