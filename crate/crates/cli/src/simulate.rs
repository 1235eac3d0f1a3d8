use std::fmt::Write as _;
use std::path::Path;

use cwta_core::report::{self, CurvePlotSpec};
use cwta_core::sim::{self, Model, Scenario, SimConfig, TrialPaths};
use cwta_core::stats;
use cwta_core::trajectory::{Endpoint, StatePath};
use serde_json::json;

use crate::args::{CalibrateArgs, EndpointArg, ModelArg, SimulateArgs};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{ensure_dir, to_json, write_file};

/// Shipped config for the model, or `path` when given. An explicit model must agree with the file.
pub(crate) fn base_config(
    model: Option<ModelArg>,
    default: Model,
    path: Option<&Path>,
) -> Result<SimConfig, CliError> {
    match path {
        Some(p) => {
            let cfg = SimConfig::from_json_file(p)
                .map_err(|e| CliError::Usage(format!("--config: {e}")))?;
            if let Some(m) = model {
                if Model::from(m) != cfg.model {
                    return Err(CliError::Usage(format!(
                        "--model {} disagrees with --config model {}",
                        Model::from(m).label(),
                        cfg.model.label()
                    )));
                }
            }
            Ok(cfg)
        }
        None => Ok(SimConfig::shipped(model.map_or(default, Model::from))),
    }
}

fn dataset_csv(paths: &TrialPaths) -> String {
    let m = &paths.matrix;
    let mut s =
        String::from("patient_id,arm,time,tox_tier,eff_tier,rba_score,efficacy_score,event\n");
    let mut rows = |p: &StatePath| {
        for (k, &(t, st)) in p.states.iter().enumerate() {
            let event = if k == 0 { "baseline" } else { "change" };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{event}",
                p.id,
                p.group,
                t,
                st.tox,
                st.eff,
                m.score(st.tox, st.eff).0,
                m.efficacy_only(st.eff).0
            );
        }
        let (_, last) = *p.states.last().expect("non-empty path");
        let event = if m.is_cell_absorptive(last.tox, last.eff) {
            "absorbed"
        } else {
            "censored"
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{event}",
            p.id,
            p.group,
            p.censor_time,
            last.tox,
            last.eff,
            m.score(last.tox, last.eff).0,
            m.efficacy_only(last.eff).0
        );
    };
    paths.experimental.iter().for_each(&mut rows);
    paths.control.iter().for_each(&mut rows);
    s
}

pub fn run(a: SimulateArgs) -> Result<(), CliError> {
    let mut cfg = base_config(a.model, Model::M3x3, a.config.as_deref())?;
    let (hr_e, hr_t) = match &a.scenario {
        Some(s) => {
            let case: Scenario = s
                .parse()
                .map_err(|e| CliError::Usage(format!("--scenario: {e}")))?;
            sim::scenario_3x3(case)
        }
        None => (a.hr_eff.unwrap_or(1.0), a.hr_tox.unwrap_or(1.0)),
    };
    cfg.hr_efficacy = hr_e;
    cfg.hr_toxicity = hr_t;
    cfg.sample_size = a.n;
    if let Some(w) = a.weeks {
        cfg.duration_weeks = w;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()
        .map_err(|e| CliError::Usage(format!("{e} (check --n, --weeks, --hr-eff, --hr-tox)")))?;
    let endpoints: Vec<Endpoint> = match a.endpoint {
        EndpointArg::Rba => vec![Endpoint::Rba],
        EndpointArg::Efficacy => vec![Endpoint::EfficacyOnly],
        EndpointArg::Both => vec![Endpoint::Rba, Endpoint::EfficacyOnly],
    };

    ensure_dir(&a.out)?;
    let paths = sim::simulate_trial_paths(&cfg)?;
    let mut outputs = vec![write_file(&a.out, "dataset.csv", &dataset_csv(&paths))?];
    let mut results = Vec::new();
    for e in endpoints {
        let ds = paths.dataset(e)?;
        let r = stats::weighted_logrank(&ds).map_err(|e| CliError::Internal(e.to_string()))?;
        let curves = stats::weighted_curves(&ds).map_err(|e| CliError::Internal(e.to_string()))?;
        let title = format!(
            "{} model, {} endpoint, HR {}/{}",
            cfg.model.label(),
            e.label(),
            hr_e,
            hr_t
        );
        let spec = CurvePlotSpec::new(&title, curves.to_vec(), ds.time_unit.axis_label())
            .with_annotation(report::p_annotation(&r));
        let svg = report::render_step_svg(&spec).map_err(|e| CliError::Internal(e.to_string()))?;
        outputs.push(write_file(
            &a.out,
            &format!("curves_{}.svg", e.label()),
            &svg,
        )?);
        println!(
            "{}: U = {:.4}, Z = {:.4}, p = {}",
            e.label(),
            r.u,
            r.z,
            report::fmt_p_flagged(r.p_two_sided, 0.05)
        );
        results.push(json!({
            "endpoint": e.label(),
            "result": r,
            "final_curve_values": {
                curves[0].group.clone(): curves[0].final_value(),
                curves[1].group.clone(): curves[1].final_value(),
            },
        }));
    }
    let (n_control, n_exp) = cfg.arm_sizes();
    let body = json!({
        "model": cfg.model.label(),
        "n_experimental": n_exp,
        "n_control": n_control,
        "hr_efficacy": hr_e,
        "hr_toxicity": hr_t,
        "duration_weeks": cfg.duration_weeks,
        "tests": results,
    });
    outputs.push(write_file(&a.out, "logrank.json", &to_json(&body))?);
    let mut m = RunManifest::new(
        "simulate",
        serde_json::to_value(&cfg).expect("config serializes"),
        cfg.seed,
    );
    if let Some(p) = &a.config {
        m.add_input(p)?;
    }
    m.write(&a.out, outputs)
}

pub fn calibrate(a: CalibrateArgs) -> Result<(), CliError> {
    let base = base_config(Some(ModelArg::M6x5), Model::M6x5, a.config.as_deref())?;
    let targets = sim::CalibrationTargets {
        cr_rate: a.cr,
        pr_rate: a.pr,
        tolerance: a.tolerance,
        n_patients: a.patients,
        seed: a.seed,
    };
    let cfg = sim::calibrate_control(&base, &targets)?;
    std::fs::write(&a.out, to_json(&cfg))
        .map_err(|e| CliError::Usage(format!("--out {}: {e}", a.out.display())))?;
    println!(
        "p_respond = {:.6}, p_complete = {:.6} (CR {:.3}, PR {:.3})",
        cfg.baseline.p_respond,
        cfg.baseline.p_complete(),
        cfg.calibration.as_ref().map_or(0.0, |c| c.achieved_cr),
        cfg.calibration.as_ref().map_or(0.0, |c| c.achieved_pr)
    );
    Ok(())
}
