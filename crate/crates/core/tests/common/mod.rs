#![allow(dead_code)]

use std::sync::Arc;

use cwta_core::matrices::{MatrixConfig, RbaMatrix};
use cwta_core::sim::{Model, SimConfig};
use cwta_core::stats::weighted_logrank;
use cwta_core::trajectory::{build_trajectory, Group, TimeUnit, TrialDataset};
use cwta_core::HealthScore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Alive (0) / dead (1) matrix: weighted analysis reduces to classic survival.
pub fn binary_matrix() -> Arc<RbaMatrix> {
    Arc::new(
        RbaMatrix::from_config(MatrixConfig {
            rows: vec!["any".into()],
            cols: vec!["alive".into(), "dead".into()],
            scores: vec![vec![0, 1]],
            absorptive: vec![1],
            max_score: 1,
            one_way_cols: vec![],
            name: Some("binary".into()),
        })
        .unwrap(),
    )
}

/// `(time, died)` per patient, per group.
pub type SurvivalData = [Vec<(f64, bool)>; 2];

pub fn binary_dataset(data: &SurvivalData) -> TrialDataset {
    let m = binary_matrix();
    let groups = data
        .iter()
        .enumerate()
        .map(|(g, pts)| {
            let name = if g == 0 { "A" } else { "B" };
            let patients = pts
                .iter()
                .enumerate()
                .map(|(i, &(t, died))| {
                    let mut rec = vec![(0.0, HealthScore(0))];
                    if died {
                        rec.push((t, HealthScore(1)));
                    }
                    build_trajectory(&format!("{name}{i}"), name, &rec, t, &m).unwrap()
                })
                .collect();
            Group {
                name: name.into(),
                patients,
            }
        })
        .collect();
    TrialDataset::new(m, TimeUnit::Week, groups).unwrap()
}

/// Random binary survival data with heavy ties (integer times 1..=8).
pub fn random_survival(seed: u64, max_n: usize) -> SurvivalData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=max_n);
    let n1 = rng.random_range(1..n);
    let draw = |rng: &mut ChaCha8Rng| (rng.random_range(1..=8) as f64, rng.random_bool(0.6));
    let a = (0..n1).map(|_| draw(&mut rng)).collect();
    let b = (0..n - n1).map(|_| draw(&mut rng)).collect();
    [a, b]
}

/// Small simulated multi-state trial (shipped baselines, shortened).
pub fn small_trial(model: Model, n: usize, weeks: u32, seed: u64) -> SimConfig {
    SimConfig {
        sample_size: n,
        duration_weeks: weeks,
        seed,
        hr_efficacy: 0.7,
        hr_toxicity: 0.8,
        ..SimConfig::shipped(model)
    }
}

/// Regroups a two-group dataset so `first` (patient indices in pooled order) form group 0.
pub fn relabel(ds: &TrialDataset, first: &[usize]) -> TrialDataset {
    let pooled: Vec<_> = ds
        .groups
        .iter()
        .flat_map(|g| g.patients.iter().cloned())
        .collect();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, p) in pooled.into_iter().enumerate() {
        if first.contains(&i) {
            a.push(p)
        } else {
            b.push(p)
        }
    }
    TrialDataset::new(
        ds.matrix.clone(),
        ds.time_unit,
        vec![
            Group {
                name: "g0".into(),
                patients: a,
            },
            Group {
                name: "g1".into(),
                patients: b,
            },
        ],
    )
    .unwrap()
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

pub struct Classic {
    pub u: f64,
    pub v: f64,
    pub p: f64,
}

/// Mantel-Haenszel logrank with the hypergeometric tie correction.
pub fn textbook_logrank(data: &SurvivalData) -> Classic {
    let mut death_times: Vec<f64> = data.iter().flatten().filter(|p| p.1).map(|p| p.0).collect();
    death_times.sort_by(f64::total_cmp);
    death_times.dedup();
    let (mut u, mut v) = (0.0, 0.0);
    for &t in &death_times {
        let n1 = data[0].iter().filter(|p| p.0 >= t).count() as f64;
        let n2 = data[1].iter().filter(|p| p.0 >= t).count() as f64;
        let d1 = data[0].iter().filter(|p| p.1 && p.0 == t).count() as f64;
        let d2 = data[1].iter().filter(|p| p.1 && p.0 == t).count() as f64;
        let (n, d) = (n1 + n2, d1 + d2);
        u += d1 - d * n1 / n;
        if n > 1.0 {
            v += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0);
        }
    }
    let z = u / v.sqrt();
    let p = 2.0 * (1.0 - Normal::standard().cdf(z.abs()));
    Classic { u, v, p }
}

pub fn kaplan_meier(group: &[(f64, bool)]) -> Vec<(f64, f64)> {
    let mut times: Vec<f64> = group.iter().filter(|p| p.1).map(|p| p.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut s = 1.0;
    let mut out = vec![(0.0, 1.0)];
    for t in times {
        let n = group.iter().filter(|p| p.0 >= t).count() as f64;
        let d = group.iter().filter(|p| p.1 && p.0 == t).count() as f64;
        s *= 1.0 - d / n;
        out.push((t, s));
    }
    out
}

/// Exact permutation p by rebuilding and re-testing every labelling.
pub fn brute_force_p(ds: &TrialDataset) -> (f64, usize) {
    let n1 = ds.groups[0].patients.len();
    let n = ds.n_patients();
    let observed = weighted_logrank(ds).unwrap().u.abs();
    let tol = 1e-9 * observed.max(1.0);
    let all = subsets(n, n1);
    let hits = all
        .iter()
        .filter(|s| weighted_logrank(&relabel(ds, s)).unwrap().u.abs() >= observed - tol)
        .count();
    (hits as f64 / all.len() as f64, all.len())
}
