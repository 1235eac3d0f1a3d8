use std::sync::Arc;

use cwta_core::ingest::{self, CohortComparison, CohortMethod, GapPolicy, REST_LABEL};
use cwta_core::matrices::RbaMatrix;
use cwta_core::report::{self, CurvePlotSpec};
use cwta_core::stats::{self, PermutationMode, PermutationSpec};
use cwta_core::trajectory::TrialDataset;
use serde_json::json;

use crate::args::{AnalyzeArgs, GapPolicyArg, MethodArg};
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::{ensure_dir, slug, to_json, write_file};

/// Number of ways to choose `k` of `n`, saturating.
pub(crate) fn n_labellings(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
        if c > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    c as u64
}

fn method_for(a: &AnalyzeArgs, n_total: usize, n_cohort: usize) -> CohortMethod {
    let spec = |mode| PermutationSpec {
        n_perm: a.perms,
        seed: a.seed,
        mode,
    };
    match a.method {
        MethodArg::Normal => CohortMethod::Normal,
        MethodArg::Exact => CohortMethod::Permutation(spec(PermutationMode::Exhaustive)),
        MethodArg::Permutation if n_labellings(n_total, n_cohort) <= a.exact_limit => {
            CohortMethod::Permutation(spec(PermutationMode::Exhaustive))
        }
        MethodArg::Permutation => CohortMethod::Permutation(spec(PermutationMode::Sampled)),
    }
}

fn load_matrix(spec: &str) -> Result<RbaMatrix, CliError> {
    if spec == "6x5" {
        return Ok(RbaMatrix::m6x5());
    }
    RbaMatrix::from_json_file(spec.as_ref())
        .map_err(|e| CliError::Usage(format!("--matrix {spec}: {e}")))
}

fn plot(ds: &TrialDataset, c: &CohortComparison) -> Result<String, CliError> {
    let pair = ds
        .one_vs_rest(&c.cohort, REST_LABEL)
        .expect("cohort exists");
    let curves = stats::weighted_curves(&pair).map_err(|e| CliError::Internal(e.to_string()))?;
    let spec = CurvePlotSpec::new(
        &format!("{} vs {REST_LABEL}", c.cohort),
        curves.to_vec(),
        ds.time_unit.axis_label(),
    )
    .with_annotation(report::p_annotation(&c.result));
    report::render_step_svg(&spec).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn run(a: AnalyzeArgs) -> Result<(), CliError> {
    if a.perms == 0 {
        return Err(CliError::Usage("--perms must be at least 1".into()));
    }
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must be in (0, 1), got {}",
            a.alpha
        )));
    }
    let matrix = Arc::new(load_matrix(&a.matrix)?);
    let policy = match a.gap_policy {
        GapPolicyArg::CarryForward => GapPolicy::CarryForward,
        GapPolicyArg::Strict => GapPolicy::Strict,
    };
    let records = ingest::parse_patient_days_file(&a.input).map_err(|e| match e {
        ingest::IngestError::Io(io) => {
            CliError::Usage(format!("--input {}: {io}", a.input.display()))
        }
        other => CliError::Usage(format!("{}: {other}", a.input.display())),
    })?;
    let ds = ingest::daily_trajectories(&records, matrix.clone(), policy)?;
    let cohorts: Vec<String> = match &a.cohort {
        Some(c) => {
            if ds.group(c).is_none() {
                let known: Vec<&str> = ds.groups.iter().map(|g| g.name.as_str()).collect();
                return Err(CliError::Usage(format!(
                    "--cohort: unknown cohort {c:?} (known: {})",
                    known.join(", ")
                )));
            }
            vec![c.clone()]
        }
        None => ds.groups.iter().map(|g| g.name.clone()).collect(),
    };

    ensure_dir(&a.out)?;
    let n_total = ds.n_patients();
    let mut rows = Vec::with_capacity(cohorts.len());
    let mut outputs = Vec::new();
    for c in &cohorts {
        let n_c = ds.group(c).map_or(0, |g| g.patients.len());
        let cmp = ingest::cohort_vs_rest(&ds, c, method_for(&a, n_total, n_c), a.alpha)?;
        outputs.push(write_file(
            &a.out,
            &format!("{}_vs_{REST_LABEL}.svg", slug(c)),
            &plot(&ds, &cmp)?,
        )?);
        println!(
            "{:<12} n={:<3} {:<10} {} [{}]",
            cmp.cohort,
            cmp.n_cohort,
            cmp.direction.label(),
            report::fmt_p_flagged(cmp.result.p_two_sided, a.alpha),
            cmp.method_label()
        );
        rows.push(cmp);
    }
    outputs.insert(
        0,
        write_file(&a.out, "comparisons.csv", &ingest::comparisons_csv(&rows))?,
    );
    let body = json!({
        "matrix": matrix.label(),
        "n_patients": n_total,
        "time_unit": ds.time_unit,
        "comparisons": rows,
    });
    outputs.insert(1, write_file(&a.out, "comparisons.json", &to_json(&body))?);

    let config = json!({
        "input": a.input.display().to_string(),
        "matrix": a.matrix,
        "cohorts": cohorts,
        "method": format!("{:?}", a.method).to_lowercase(),
        "perms": a.perms,
        "exact_limit": a.exact_limit,
        "alpha": a.alpha,
        "gap_policy": policy,
    });
    let mut m = RunManifest::new("analyze", config, a.seed);
    m.add_input(&a.input)?;
    if a.matrix != "6x5" {
        m.add_input(a.matrix.as_ref())?;
    }
    m.write(&a.out, outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(n_labellings(29, 7), 1_560_780);
        assert_eq!(n_labellings(9, 3), 84);
        assert_eq!(n_labellings(5, 5), 1);
        assert_eq!(n_labellings(200, 100), u64::MAX);
    }
}
