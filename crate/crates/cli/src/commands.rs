//! Subcommand implementations. Each consumes a loaded config and writes its
//! outputs under the target directory; exit codes distinguish config errors
//! (1), numeric failures (2), and property violations (3).

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use kingman::genfun;
use kingman::limits;
use kingman::measure::Interval;
use kingman::recursion::Evolution;
use kingman::spectral::{build_a, find_critical, gamma2, minors_solution, perron, psi, rho_j};
use kingman::Error as CoreError;

use crate::config::{build_selection, build_windows, LoadedConfig};
use crate::output::{fmt_f64, write_json, CsvDoc, MeasureDto, ARTIFACT_VERSION};

#[derive(Debug)]
pub enum CmdError {
    /// Bad config or arguments (exit 1).
    Config(String),
    /// The computation itself failed (exit 2).
    Numeric(String),
    /// Outputs were produced but a checked property did not hold (exit 3).
    Property(String),
    Io(std::io::Error),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Config(_) => 1,
            CmdError::Numeric(_) | CmdError::Io(_) => 2,
            CmdError::Property(_) => 3,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Config(m) => write!(f, "config error: {m}"),
            CmdError::Numeric(m) => write!(f, "numeric failure: {m}"),
            CmdError::Property(m) => write!(f, "property violation: {m}"),
            CmdError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl From<CoreError> for CmdError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::ConjectureHypothesesUnmet(_)
            | CoreError::InvalidModel(_)
            | CoreError::InvalidMeasure(_) => CmdError::Config(e.to_string()),
            other => CmdError::Numeric(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CmdError {
    fn from(e: std::io::Error) -> Self {
        CmdError::Io(e)
    }
}

#[derive(Serialize)]
struct AnalyzeReport {
    schema: u32,
    artifact_version: &'static str,
    config_sha256: String,
    seed: u64,
    k: usize,
    eta0: f64,
    z_c: f64,
    regime: &'static str,
    alpha: f64,
    u: Vec<f64>,
    wbar: Vec<f64>,
    pi: Vec<MeasureDto>,
    checks: AnalyzeChecks,
}

#[derive(Serialize)]
struct AnalyzeChecks {
    /// `max_i |(A(z_c) U)_i + alpha - U_i|`.
    fixpoint_residual: f64,
    /// Largest raw mass defect among the assembled limit laws.
    pi_mass_max_err: f64,
    /// `|(prod z_i)^{1/k} - z_c|` from the closed-form mean fitnesses.
    z_consistency_err: f64,
    zbar_eta0: f64,
    /// `eta0^k prod (1-beta_i)/wbar_i`; at most 1, saturated under
    /// condensation.
    floor_product: f64,
    /// Agreement between the minors route and the direct solve.
    minors_u_max_diff: f64,
    minors_alpha_diff: f64,
    all_passed: bool,
}

pub fn cmd_analyze(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let report = limits::limit_laws(&loaded.model)?;
    let crit = &report.critical;
    let (minors_u, minors_alpha) = minors_solution(loaded.model.cycle(), crit.z_c)?;
    let minors_u_max_diff = minors_u
        .iter()
        .zip(&crit.u)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let minors_alpha_diff = (minors_alpha - crit.alpha).abs();
    let pi_mass_max_err = report.checks.pi_mass_err.iter().copied().fold(0.0, f64::max);

    let all_passed = crit.residual <= 1e-9
        && pi_mass_max_err <= 1e-9
        && report.checks.z_consistency_err <= 1e-9
        && report.checks.floor_product <= 1.0 + 1e-9
        && minors_u_max_diff <= 1e-9
        && minors_alpha_diff <= 1e-9;

    let doc = AnalyzeReport {
        schema: crate::config::SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION,
        config_sha256: loaded.sha256.clone(),
        seed: loaded.config.seed,
        k: loaded.model.k(),
        eta0: loaded.model.eta0(),
        z_c: crit.z_c,
        regime: crit.regime.as_str(),
        alpha: crit.alpha,
        u: crit.u.clone(),
        wbar: report.wbars.clone(),
        pi: report.pis.iter().map(MeasureDto::from).collect(),
        checks: AnalyzeChecks {
            fixpoint_residual: crit.residual,
            pi_mass_max_err,
            z_consistency_err: report.checks.z_consistency_err,
            zbar_eta0: report.zbar_eta0,
            floor_product: report.checks.floor_product,
            minors_u_max_diff,
            minors_alpha_diff,
            all_passed,
        },
    };
    write_json(&out.join("analyze.json"), &doc)?;
    if !all_passed {
        return Err(CmdError::Property(
            "analyze consistency checks failed (see analyze.json checks block)".into(),
        ));
    }
    Ok(())
}

pub fn cmd_simulate(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let model = &loaded.model;
    let horizon = loaded.config.horizon;
    let limits_report = limits::limit_laws(model)?;
    let k = model.k();
    let mut csv = CsvDoc::new(
        &loaded.sha256,
        &["n", "residue", "w", "log_w_product", "mass_at_eta0", "tv_to_limit"],
    );
    let mut evo = Evolution::new(model);
    let mut log_w = 0.0f64;
    for n in 0..=horizon {
        let i = n % k;
        let w = evo.mean_fitness();
        let tv = evo
            .current()
            .tv_distance(&limits_report.pis[i], Interval::UNIT);
        csv.row(&[
            n.to_string(),
            i.to_string(),
            fmt_f64(w),
            fmt_f64(log_w),
            fmt_f64(evo.current().mass_at(model.eta0())),
            fmt_f64(tv),
        ]);
        if n < horizon {
            evo.advance()?;
            log_w += w.ln();
        }
    }
    csv.write_to(&out.join("trajectory.csv"))?;
    Ok(())
}

pub fn cmd_verify(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let model = &loaded.model;
    let k = model.k();
    let horizon = loaded.config.horizon;
    if horizon == 0 || horizon % k != 0 {
        return Err(CmdError::Config(format!(
            "horizon {horizon} must be a positive multiple of the period {k}"
        )));
    }
    let windows = build_windows(&loaded.config)?;
    let report = limits::verify_convergence(model, horizon, &windows)?;
    let mut csv = CsvDoc::new(
        &loaded.sha256,
        &["residue", "window_lo", "window_hi", "n", "tv"],
    );
    for gap in &report.gaps {
        for &(n, tv) in &gap.history {
            csv.row(&[
                gap.residue.to_string(),
                fmt_f64(gap.window.lo()),
                fmt_f64(gap.window.hi()),
                n.to_string(),
                fmt_f64(tv),
            ]);
        }
    }
    csv.write_to(&out.join("verify.csv"))?;

    let worst = report
        .gaps
        .iter()
        .map(|g| g.final_tv)
        .fold(0.0f64, f64::max);
    let threshold = loaded.config.tv_pass_threshold;
    let pass = worst < threshold;
    println!(
        "verify: {} (max final tv = {}, threshold = {})",
        if pass { "pass" } else { "fail" },
        fmt_f64(worst),
        fmt_f64(threshold),
    );
    if !pass {
        return Err(CmdError::Property(format!(
            "final TV gap {worst} at or above threshold {threshold}"
        )));
    }
    Ok(())
}

pub fn cmd_sweep(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let model = &loaded.model;
    let cycle = model.cycle();
    let k = model.k();
    let (start, stop, steps) = match &loaded.config.z_grid {
        Some(grid) => {
            if !(grid.start >= 0.0 && grid.stop >= grid.start && grid.steps >= 1) {
                return Err(CmdError::Config("malformed z_grid".into()));
            }
            (grid.start, grid.stop, grid.steps)
        }
        None => (0.0, 0.999 / model.eta_q(), 100),
    };
    let mut csv = CsvDoc::new(
        &loaded.sha256,
        &["z", "rho", "psi", "gamma2", "min_rhoj", "max_rhoj"],
    );
    // Probes are independent; evaluate them in parallel and emit in order.
    let rows: Vec<Result<Vec<String>, CmdError>> = (0..=steps)
        .into_par_iter()
        .map(|s| {
            let z = start + (stop - start) * s as f64 / steps as f64;
            let a = build_a(cycle, z)?;
            let rho = perron(&a)?.rho;
            let (psi_s, g2_s, min_s, max_s) = if a.all_finite() {
                let psi_v = psi(cycle, z)?;
                let g2 = if k == 2 {
                    fmt_f64(gamma2(cycle, z)?)
                } else {
                    String::new()
                };
                let rhos = cycle
                    .envs()
                    .iter()
                    .map(|env| rho_j(env, z))
                    .collect::<Result<Vec<f64>, _>>()?;
                (
                    fmt_f64(psi_v),
                    g2,
                    fmt_f64(rhos.iter().copied().fold(f64::INFINITY, f64::min)),
                    fmt_f64(rhos.iter().copied().fold(f64::NEG_INFINITY, f64::max)),
                )
            } else {
                // At a pole only the divergence itself is reportable.
                (String::new(), String::new(), String::new(), String::new())
            };
            Ok(vec![fmt_f64(z), fmt_f64(rho), psi_s, g2_s, min_s, max_s])
        })
        .collect();
    for row in rows {
        csv.row(&row?);
    }
    csv.write_to(&out.join("sweep.csv"))?;
    Ok(())
}

pub fn cmd_genfun(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let model = &loaded.model;
    let z_values: Vec<f64> = match &loaded.config.z_values {
        Some(values) => values.clone(),
        None => {
            let z_c = find_critical(model)?.z_c;
            [0.25, 0.5, 0.9].iter().map(|f| f * z_c).collect()
        }
    };
    let mut csv = CsvDoc::new(
        &loaded.sha256,
        &[
            "z",
            "residue",
            "series_value",
            "closed_value",
            "tail_bound",
            "recurrence_residual",
        ],
    );
    for &z in &z_values {
        let bundle = genfun::evaluate(model, z, loaded.config.series_terms)?;
        for i in 0..model.k() {
            csv.row(&[
                fmt_f64(z),
                i.to_string(),
                fmt_f64(bundle.series[i]),
                fmt_f64(bundle.closed[i]),
                fmt_f64(bundle.tail_bounds[i]),
                fmt_f64(bundle.recurrence_residual),
            ]);
        }
    }
    csv.write_to(&out.join("genfun.csv"))?;
    Ok(())
}

#[derive(Serialize)]
struct ConjectureDoc {
    schema: u32,
    artifact_version: &'static str,
    config_sha256: String,
    seed: u64,
    label: &'static str,
    k: usize,
    x0: f64,
    s_star: f64,
    z_c: f64,
    regime: &'static str,
    alpha: f64,
    u: Vec<f64>,
    wbar: Vec<f64>,
    pi: Vec<MeasureDto>,
    horizon: usize,
    body_tv: Vec<f64>,
    atom_simulated: Vec<f64>,
    atom_predicted: Vec<f64>,
}

pub fn cmd_conjecture(loaded: &LoadedConfig, out: &Path) -> Result<(), CmdError> {
    let model = &loaded.model;
    let k = model.k();
    let horizon = loaded.config.horizon;
    if horizon == 0 || horizon % k != 0 {
        return Err(CmdError::Config(format!(
            "horizon {horizon} must be a positive multiple of the period {k}"
        )));
    }
    let selection = build_selection(&loaded.config, k)?;
    let report = limits::conjecture_experiment(model, &selection, horizon)?;
    let doc = ConjectureDoc {
        schema: crate::config::SCHEMA_VERSION,
        artifact_version: ARTIFACT_VERSION,
        config_sha256: loaded.sha256.clone(),
        seed: loaded.config.seed,
        label: report.label,
        k,
        x0: report.x0,
        s_star: report.s_star,
        z_c: report.critical.z_c,
        regime: report.critical.regime.as_str(),
        alpha: report.critical.alpha,
        u: report.critical.u.clone(),
        wbar: report.wbars.clone(),
        pi: report.pis.iter().map(MeasureDto::from).collect(),
        horizon,
        body_tv: report.body_tv.clone(),
        atom_simulated: report.atom_gaps.iter().map(|g| g.simulated).collect(),
        atom_predicted: report.atom_gaps.iter().map(|g| g.predicted).collect(),
    };
    write_json(&out.join("conjecture.json"), &doc)?;
    Ok(())
}
