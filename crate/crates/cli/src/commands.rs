use serde::Serialize;
use serde_json::json;
use smoothlab::brwre::{self, BrwClass, MomentMethod};
use smoothlab::env_model;
use smoothlab::io::{fmt_f64, CsvTable};
use smoothlab::moments::{self, Verdict};
use smoothlab::oracle;
use smoothlab::smoothing::{self, FixedPointOptions, CONVERGENCE_TOL};
use smoothlab::spine_walk::{self, MERGE_RES};
use smoothlab::stats;
use smoothlab::{derive_seed, labels, EnvSequence};

use crate::config::{self, ExperimentConfig};
use crate::output::{table_json, Artifact};
use crate::CliError;

/// Files to write, a short stdout summary, and whether the checks passed.
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
    pub ok: bool,
}

fn tabled(stem: &str, table: CsvTable) -> Artifact {
    let json = table_json(&table);
    Artifact::new(stem, table, json)
}

fn env_artifact(seq: &EnvSequence) -> Artifact {
    let mut t = CsvTable::new(["index", "state"]);
    for (i, id) in seq.state_ids.iter().enumerate() {
        t.push(vec![i.to_string(), id.clone()]);
    }
    tabled("env", t)
}

pub fn validate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.law()?;
    let report = env_model::validate_law(&law, cfg.tolerance());
    let mut t = CsvTable::new(["check", "subject", "measured", "pass"]);
    for c in &report.checks {
        t.push(vec![c.name.clone(), c.subject.clone(), fmt_f64(c.measured), c.pass.to_string()]);
    }
    let failed: Vec<_> = report.failed().map(|c| json!({"check": c.name, "subject": c.subject})).collect();
    let summary = json!({"pass": report.pass, "failed": failed});
    Ok(Outcome { artifacts: vec![Artifact::new("validation", t, &report)], summary, ok: report.pass })
}

fn verdict_table(v: &Verdict) -> CsvTable {
    let mut t = CsvTable::new(Verdict::CSV_HEADER.split(','));
    t.push(v.csv_line().split(',').map(str::to_owned).collect());
    t
}

pub fn classify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.law()?;
    let verdict = moments::classify_with(&law, &cfg.moment_options(cfg.seed()?));
    let record = verdict.record();
    let summary = serde_json::to_value(&record).expect("record serializes");
    Ok(Outcome { artifacts: vec![Artifact::new("classify", verdict_table(&verdict), &record)], summary, ok: true })
}

pub fn iterate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.law()?;
    let n = cfg.depth.unwrap_or(config::DEFAULT_ITERATIONS);
    let seq = cfg.env_for_law(&law, n, cfg.seed()?)?;
    let grid = cfg.grid()?;
    let opts = FixedPointOptions { n_max: n, tol: CONVERGENCE_TOL, stop_when_converged: false };
    let run = smoothing::run_fixed_point(&law, &seq, &grid, &cfg.strategy, &opts)?;
    let last = run.log.last();
    let summary = json!({
        "n": n,
        "converged_at": run.converged_at,
        "g_n": last.map(|r| r.g_n),
        "mean_at_zero": last.map(|r| r.mean),
        "clamp_flag": run.curve.clamp_flag(),
        "shape_violations": run.curve.invariant_violations().len(),
    });
    let artifacts = vec![
        Artifact::new("iterate_log", run.log_csv(), &run.log),
        tabled("curve", run.curve.to_csv()),
        env_artifact(&seq),
    ];
    Ok(Outcome { artifacts, summary, ok: true })
}

pub fn walk(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.law()?;
    let spec = cfg.walk.as_ref().ok_or_else(|| CliError::Config("`walk` needs `walk: {c, n_max}`".into()))?;
    let levels = spine_walk::walk_convolve(&law, spec.n_max, MERGE_RES)?;
    let sums = spine_walk::tail_sums(&law, spec.c, spec.n_max)?;
    let last = sums.last();
    let summary = json!({
        "drift": spine_walk::drift(&law).ok(),
        "n_max": spec.n_max,
        "c": spec.c,
        "partial_sum": last.map(|s| s.partial_sum),
        "last_increment": last.map(|s| s.increment),
        "atoms_at_n_max": levels.last().map(|l| l.len()),
    });
    let artifacts = vec![
        tabled("walk_distributions", spine_walk::distributions_csv(&levels)),
        Artifact::new("tail_sums", spine_walk::tail_sums_csv(&sums), &sums),
    ];
    Ok(Outcome { artifacts, summary, ok: true })
}

#[derive(Serialize)]
struct SimSummary {
    theta: f64,
    completed: usize,
    failed: usize,
    mean_final_w: Option<f64>,
    std_error: Option<f64>,
}

pub fn brw_sim(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.brw_law()?;
    let seed = cfg.seed()?;
    let generations = cfg.depth.unwrap_or(config::DEFAULT_GENERATIONS);
    let replicas = cfg.replicas.unwrap_or(config::DEFAULT_REPLICAS);
    let cap = cfg.cap.unwrap_or(brwre::DEFAULT_CAP);
    let seq = cfg.env_for_brw(&law, generations, seed)?;
    let mut traj = CsvTable::new(["theta", "replica", "generation", "W", "population"]);
    let mut failures = CsvTable::new(["theta", "replica", "error"]);
    let mut summaries = Vec::new();
    for (i, theta) in cfg.thetas()?.into_iter().enumerate() {
        let master = derive_seed(seed, &labels!["brw-sim", i]);
        let results = brwre::simulate_replicas(&law, theta, &seq, generations, cap, master, replicas);
        let mut finals = Vec::new();
        for (r, res) in results.iter().enumerate() {
            match res {
                Ok(t) => {
                    for (k, (w, pop)) in t.w.iter().zip(&t.population).enumerate() {
                        traj.push(vec![fmt_f64(theta), r.to_string(), k.to_string(), fmt_f64(*w), pop.to_string()]);
                    }
                    finals.push(t.final_w());
                }
                // a law error is the same for every replica; a cap overflow is per replica
                Err(e @ smoothlab::Error::CapExceeded { .. }) => {
                    failures.push(vec![fmt_f64(theta), r.to_string(), e.to_string()]);
                }
                Err(e) => return Err(e.clone().into()),
            }
        }
        let est = (finals.len() >= 2).then(|| stats::mean_and_se(&finals));
        summaries.push(SimSummary {
            theta,
            completed: finals.len(),
            failed: replicas - finals.len(),
            mean_final_w: est.map(|e| e.mean),
            std_error: est.map(|e| e.std_error),
        });
    }
    let summary = json!({"generations": generations, "replicas": replicas, "thetas": summaries});
    let artifacts = vec![tabled("trajectories", traj), tabled("brw_failures", failures), env_artifact(&seq)];
    Ok(Outcome { artifacts, summary, ok: true })
}

fn brw_verdicts(cfg: &ExperimentConfig) -> Result<Vec<brwre::BrwVerdict>, CliError> {
    let law = cfg.brw_law()?;
    cfg.thetas()?.into_iter().map(|theta| Ok(brwre::verdict_brw(&law, theta)?)).collect()
}

fn brw_verdict_table(verdicts: &[brwre::BrwVerdict]) -> CsvTable {
    let mut t = CsvTable::new(["theta", "verdict", "kappa", "w1_xlogx", "w1_method", "w1_std_error"]);
    for v in verdicts {
        let class = match v.verdict {
            BrwClass::MeanOne => "MEAN_ONE",
            BrwClass::Degenerate => "DEGENERATE",
            BrwClass::Inconclusive => "INCONCLUSIVE",
        };
        let method = match v.w1_xlogx.method {
            MomentMethod::Exact => "exact",
            MomentMethod::MonteCarlo => "monte-carlo",
        };
        t.push(vec![
            fmt_f64(v.theta),
            class.to_owned(),
            fmt_f64(v.kappa),
            v.w1_xlogx.value.to_string(),
            method.to_owned(),
            v.w1_xlogx.std_error.map(fmt_f64).unwrap_or_default(),
        ]);
    }
    t
}

pub fn brw_verdict(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let verdicts = brw_verdicts(cfg)?;
    let summary = json!(verdicts.iter().map(|v| json!({"theta": v.theta, "verdict": v.verdict})).collect::<Vec<_>>());
    let table = brw_verdict_table(&verdicts);
    Ok(Outcome { artifacts: vec![Artifact::new("brw_verdict", table, &verdicts)], summary, ok: true })
}

/// Exact tree enumeration against the grid iterate and, when configured, a
/// committed fixture of exact values.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let law = cfg.law()?;
    let n = cfg.depth.unwrap_or(config::DEFAULT_ORACLE_DEPTH);
    let seq = cfg.env_for_law(&law, n, cfg.seed()?)?;
    let fixture = match &cfg.fixture {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            let t = CsvTable::parse(&text)?;
            Some((t.f64_column("u")?, t.f64_column("phi")?))
        }
        None => None,
    };
    let us = match (&fixture, &cfg.u_points) {
        (Some((u, _)), _) => u.clone(),
        (None, Some(u)) => u.clone(),
        (None, None) => config::default_u_points(),
    };
    let exact = oracle::exact_wn_transform(&law, &seq, &us, n)?;
    let curve = smoothing::iterate(&law, &seq, &cfg.grid()?, &cfg.strategy)?;
    let tol = cfg.oracle_tolerance.unwrap_or(config::DEFAULT_ORACLE_TOL);

    let mut t = CsvTable::new(["u", "exact", "grid", "abs_error", "fixture"]);
    let mut sup_grid: f64 = 0.0;
    let mut sup_fixture: f64 = 0.0;
    for (j, (&u, &e)) in us.iter().zip(&exact.values).enumerate() {
        let g = curve.eval(u)?;
        sup_grid = sup_grid.max((g - e).abs());
        let f = fixture.as_ref().map(|(_, phi)| phi[j]);
        if let Some(f) = f {
            sup_fixture = sup_fixture.max((f - e).abs());
        }
        t.push(vec![fmt_f64(u), fmt_f64(e), fmt_f64(g), fmt_f64((g - e).abs()), f.map(fmt_f64).unwrap_or_default()]);
    }
    // fixtures are written with round-trip formatting, so they reproduce to rounding
    let fixture_ok = fixture.is_none() || sup_fixture <= 1e-12;
    let ok = sup_grid <= tol && fixture_ok;
    let summary = json!({
        "pass": ok,
        "depth": n,
        "sup_grid_error": sup_grid,
        "tolerance": tol,
        "sup_fixture_error": fixture.as_ref().map(|_| sup_fixture),
    });
    let artifacts = vec![tabled("oracle_check", t), tabled("oracle_exact", exact.to_csv()), env_artifact(&seq)];
    Ok(Outcome { artifacts, summary, ok })
}

/// One table aggregating validation, classification and BRW verdicts for
/// whatever laws the config holds.
pub fn report(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    if cfg.law.is_none() && cfg.brw_law.is_none() {
        return Err(CliError::Config("`report` needs `law` or `brw_law`".into()));
    }
    let mut t = CsvTable::new(["section", "key", "value"]);
    let mut doc = serde_json::Map::new();
    let mut ok = true;
    if cfg.law.is_some() {
        let law = cfg.law()?;
        let validation = env_model::validate_law(&law, cfg.tolerance());
        ok &= validation.pass;
        t.push(vec!["validate".into(), "pass".into(), validation.pass.to_string()]);
        for c in validation.failed() {
            t.push(vec!["validate".into(), format!("failed:{}", c.name), c.subject.clone()]);
        }
        let verdict = moments::classify_with(&law, &cfg.moment_options(cfg.seed()?));
        let record = verdict.record();
        t.push(vec!["classify".into(), "verdict".into(), verdict.verdict.as_str().into()]);
        t.push(vec!["classify".into(), "c1".into(), record.c1.to_string()]);
        t.push(vec!["classify".into(), "c2".into(), record.c2.to_string()]);
        t.push(vec!["classify".into(), "kappa".into(), record.kappa.to_string()]);
        let drift = spine_walk::drift(&law).ok();
        if let Some(d) = drift {
            t.push(vec!["walk".into(), "drift".into(), fmt_f64(d)]);
        }
        doc.insert("validate".into(), serde_json::to_value(&validation).expect("serializes"));
        doc.insert("classify".into(), serde_json::to_value(&record).expect("serializes"));
        doc.insert("drift".into(), json!(drift));
    }
    if cfg.brw_law.is_some() {
        let verdicts = brw_verdicts(cfg)?;
        for row in brw_verdict_table(&verdicts).rows {
            t.push(vec!["brw-verdict".into(), format!("theta={}", row[0]), row[1].clone()]);
        }
        doc.insert("brw_verdict".into(), serde_json::to_value(&verdicts).expect("serializes"));
    }
    let json = serde_json::Value::Object(doc);
    let summary = json!({"pass": ok, "rows": t.rows.len()});
    Ok(Outcome { artifacts: vec![Artifact::new("report", t, &json)], summary, ok: true })
}
