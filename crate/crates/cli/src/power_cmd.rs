use std::fmt::Write as _;

use cwta_core::power::{self, PowerPoint, TARGET_POWER};
use cwta_core::report;
use cwta_core::sim::{self, Model, Scenario};
use cwta_core::trajectory::Endpoint;
use serde_json::json;

use crate::args::{EndpointArg, ModelArg, PowerArgs};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::simulate::base_config;
use crate::{ensure_dir, slug, to_json, write_file};

fn parse_list(flag: &str, s: &str) -> Result<Vec<f64>, CliError> {
    let out: Result<Vec<f64>, _> = s.split(',').map(|x| x.trim().parse::<f64>()).collect();
    match out {
        Ok(v) if !v.is_empty() && v.iter().all(|h| *h > 0.0 && h.is_finite()) => Ok(v),
        _ => Err(CliError::Usage(format!(
            "{flag}: expected comma-separated positive numbers, got {s:?}"
        ))),
    }
}

/// Pairs efficacy and toxicity HRs: element-wise, or broadcasting a single value.
pub(crate) fn hr_pairs(eff: &str, tox: Option<&str>) -> Result<Vec<(f64, f64)>, CliError> {
    let e = parse_list("--hr-eff-list", eff)?;
    let t = match tox {
        Some(t) => parse_list("--hr-tox-list", t)?,
        None => e.clone(),
    };
    match (e.len(), t.len()) {
        (a, b) if a == b => Ok(e.into_iter().zip(t).collect()),
        (_, 1) => Ok(e.into_iter().map(|x| (x, t[0])).collect()),
        (1, _) => Ok(t.into_iter().map(|y| (e[0], y)).collect()),
        (a, b) => Err(CliError::Usage(format!(
            "--hr-eff-list has {a} values and --hr-tox-list {b}; lengths must match or one must be a single value"
        ))),
    }
}

pub(crate) fn parse_scenarios(s: &str) -> Result<Vec<Scenario>, CliError> {
    let bad = |e: sim::SimError| CliError::Usage(format!("--scenarios: {e}"));
    let s = s.trim();
    if s.eq_ignore_ascii_case("all") {
        return Ok(Scenario::ALL.to_vec());
    }
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (Scenario, Scenario) = (a.parse().map_err(bad)?, b.parse().map_err(bad)?);
        let ia = Scenario::ALL.iter().position(|&x| x == a).expect("listed");
        let ib = Scenario::ALL.iter().position(|&x| x == b).expect("listed");
        if ia > ib {
            return Err(CliError::Usage(format!("--scenarios: empty range {s:?}")));
        }
        return Ok(Scenario::ALL[ia..=ib].to_vec());
    }
    s.split(',').map(|x| x.parse().map_err(bad)).collect()
}

fn endpoints(e: EndpointArg) -> Vec<Endpoint> {
    match e {
        EndpointArg::Rba => vec![Endpoint::Rba],
        EndpointArg::Efficacy => vec![Endpoint::EfficacyOnly],
        EndpointArg::Both => vec![Endpoint::Rba, Endpoint::EfficacyOnly],
    }
}

pub fn run(a: PowerArgs) -> Result<(), CliError> {
    if a.reps == 0 {
        return Err(CliError::Usage("--reps must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must be in (0, 1), got {}",
            a.alpha
        )));
    }
    match a.scenarios.clone() {
        Some(s) => run_scenarios(a, &s),
        None => run_grid(a),
    }
}

fn run_scenarios(a: PowerArgs, list: &str) -> Result<(), CliError> {
    if a.model == Some(ModelArg::M6x5) {
        return Err(CliError::Usage(
            "--scenarios applies to the 3x3 model".into(),
        ));
    }
    let cases = parse_scenarios(list)?;
    let mut base = base_config(Some(ModelArg::M3x3), Model::M3x3, a.config.as_deref())?;
    if let Some(n) = a.n {
        base.sample_size = n;
    }
    if let Some(w) = a.weeks {
        base.duration_weeks = w;
    }
    let eps = endpoints(a.endpoint);
    ensure_dir(&a.out)?;

    let mut rows: Vec<(Scenario, Vec<PowerPoint>)> = Vec::new();
    for &case in &cases {
        let (he, ht) = sim::scenario_3x3(case);
        let cfg = sim::SimConfig {
            hr_efficacy: he,
            hr_toxicity: ht,
            ..base.clone()
        };
        let pts = power::estimate_power_paired(&cfg, &eps, a.reps, a.alpha, a.seed)?;
        rows.push((case, pts));
    }

    let mut csv = String::from("scenario,endpoint,hr_eff,hr_tox,ss,reps,power,se\n");
    for (case, pts) in &rows {
        for p in pts {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                case.label(),
                p.endpoint.label(),
                p.hr_efficacy,
                p.hr_toxicity,
                p.sample_size,
                p.replications,
                report::fmt_power(p.power),
                report::fmt_power(p.se)
            );
            println!(
                "{:>3} {:<13} HR {}/{}  power {}",
                case.label(),
                p.endpoint.label(),
                p.hr_efficacy,
                p.hr_toxicity,
                report::fmt_power(p.power)
            );
        }
    }
    let mut outputs = vec![write_file(&a.out, "scenario_power.csv", &csv)?];
    let body: Vec<_> = rows
        .iter()
        .map(|(c, pts)| json!({"scenario": c.label(), "description": c.description(), "points": pts}))
        .collect();
    outputs.push(write_file(&a.out, "scenario_power.json", &to_json(&body))?);
    for &e in &eps {
        let bars: Vec<(String, f64)> = rows
            .iter()
            .map(|(c, pts)| {
                (
                    c.label().to_string(),
                    pts.iter()
                        .find(|p| p.endpoint == e)
                        .expect("endpoint")
                        .power,
                )
            })
            .collect();
        let title = format!(
            "Power by scenario, {} endpoint, n = {}",
            e.label(),
            base.sample_size
        );
        let svg = report::render_bar_svg(&title, &bars, TARGET_POWER)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        outputs.push(write_file(
            &a.out,
            &format!("scenarios_{}.svg", e.label()),
            &svg,
        )?);
    }
    let config = json!({
        "mode": "scenarios",
        "scenarios": cases.iter().map(|c| c.label()).collect::<Vec<_>>(),
        "endpoints": eps.iter().map(|e| e.label()).collect::<Vec<_>>(),
        "reps": a.reps,
        "alpha": a.alpha,
        "base": base,
    });
    let mut m = RunManifest::new("power", config, a.seed);
    if let Some(p) = &a.config {
        m.add_input(p)?;
    }
    m.write(&a.out, outputs)
}

fn run_grid(a: PowerArgs) -> Result<(), CliError> {
    let ss = power::parse_ss_range(&a.ss).ok_or_else(|| {
        CliError::Usage(format!(
            "--ss: expected start:stop:step or a single size, got {:?}",
            a.ss
        ))
    })?;
    let hrs = hr_pairs(&a.hr_eff_list, a.hr_tox_list.as_deref())?;
    let mut base = base_config(a.model, Model::M6x5, a.config.as_deref())?;
    if let Some(w) = a.weeks {
        base.duration_weeks = w;
    }
    let eps = endpoints(a.endpoint);
    ensure_dir(&a.out)?;

    let grid = power::power_grid(&base, &ss, &hrs, &eps, a.reps, a.alpha, a.seed)?;
    let mut outputs = vec![
        write_file(&a.out, "power_grid.csv", &report::power_grid_csv(&grid))?,
        write_file(&a.out, "power_grid.json", &to_json(&grid))?,
        write_file(&a.out, "ss_at_target.csv", &report::ss_table_csv(&grid))?,
    ];
    for &hr in &hrs {
        let series: Vec<(String, Vec<(f64, f64)>)> = eps
            .iter()
            .map(|&e| {
                (
                    e.label().to_string(),
                    grid.curve(e, hr)
                        .into_iter()
                        .map(|(s, p)| (s as f64, p))
                        .collect(),
                )
            })
            .collect();
        let title = format!("Power vs sample size, HR {}/{}", hr.0, hr.1);
        let svg = report::render_power_svg(&title, &series, TARGET_POWER)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        let name = format!(
            "power_hr_{}_{}.svg",
            slug(&hr.0.to_string()),
            slug(&hr.1.to_string())
        );
        outputs.push(write_file(&a.out, &name, &svg)?);
        let cells: Vec<String> = eps
            .iter()
            .map(|&e| {
                let ss = grid
                    .ss_at(e, hr)
                    .map_or("not reached".to_string(), |x| format!("{x:.1}"));
                format!("{} {ss}", e.label())
            })
            .collect();
        println!(
            "HR {}/{}: SS at power {TARGET_POWER}: {}",
            hr.0,
            hr.1,
            cells.join(", ")
        );
    }
    let config = json!({
        "mode": "grid",
        "ss": ss,
        "hr_pairs": hrs,
        "endpoints": eps.iter().map(|e| e.label()).collect::<Vec<_>>(),
        "reps": a.reps,
        "alpha": a.alpha,
        "base": base,
    });
    let mut m = RunManifest::new("power", config, a.seed);
    if let Some(p) = &a.config {
        m.add_input(p)?;
    }
    m.write(&a.out, outputs)
}
