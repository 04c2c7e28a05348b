use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use revolve_core::limits::{discrete_limit_coefficients, gaussian_law_at, limit_coefficients, DiffusionLimit};
use revolve_core::operator_lab::{
    assemble_limit_generator, gaussian_probes, random_identity_check, residual_eps_ladder, residual_scaling,
};
use revolve_core::profiles::check_balance;
use revolve_core::simulator::{simulate_ensemble_with, EnsembleOptions, EvolutionConfig, Switching};
use revolve_core::sphere::build_grid;
use revolve_core::stats::{convergence_sweep, ks_marginals, ks_projections, summarize, FitStatus};
use serde_json::{json, Value};

use crate::artifacts::{endpoints_csv, sweep_csv, to_json_string, trajectories_csv, write_json, write_text};
use crate::config::{ExperimentConfig, Mode};
use crate::{CliError, ARTIFACT_VERSION};

/// Command-line overrides and switches.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub paper_sign: bool,
    pub full_trajectories: bool,
    pub workers: Option<usize>,
}

/// Number of random θ-fields behind the identity residuals.
const IDENTITY_FIELDS: usize = 100;
/// Random projections in the KS spot check.
const PROJECTIONS: usize = 5;

struct Context<'a> {
    config: &'a ExperimentConfig,
    evolution: EvolutionConfig,
    options: &'a RunOptions,
    out: PathBuf,
    artifacts: Vec<String>,
}

impl Context<'_> {
    fn emit_json(&mut self, name: &str, value: &impl serde::Serialize) -> Result<(), CliError> {
        write_json(&self.out.join(name), value)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn emit_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        write_text(&self.out.join(name), text)?;
        self.artifacts.push(name.to_string());
        Ok(())
    }

    fn ensemble_options(&self, full_trajectories: bool) -> EnsembleOptions {
        EnsembleOptions {
            workers: self.options.workers,
            full_trajectories,
            ..Default::default()
        }
    }

    /// Limit law for the configured switching law.
    fn limit(&self) -> Result<DiffusionLimit, CliError> {
        let limit = match &self.evolution.switching {
            Switching::UniformSphere => {
                let grid = build_grid(self.evolution.dimension, self.config.resolution())?;
                limit_coefficients(&self.evolution.profile, &grid)?
            }
            Switching::Discrete(law) => discrete_limit_coefficients(&self.evolution.profile, law)?,
        };
        Ok(limit)
    }
}

/// Runs `mode` and returns what should go to stdout.
pub fn run(mode: Mode, config: &ExperimentConfig, options: &RunOptions) -> Result<String, CliError> {
    if let Some(m) = config.mode {
        if m != mode {
            return Err(CliError::Schema {
                field: "mode".into(),
                message: format!("config is for `{}` but `{}` was requested", m.name(), mode.name()),
            });
        }
    }
    let mut evolution = config.evolution()?;
    if let Some(seed) = options.seed {
        evolution.seed = seed;
    }
    let out = options
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("revolve-out"));
    fs::create_dir_all(&out).map_err(|e| CliError::Io {
        path: out.clone(),
        source: e,
    })?;
    let mut ctx = Context {
        config,
        evolution,
        options,
        out,
        artifacts: Vec::new(),
    };
    let stdout = match mode {
        Mode::VerifyOperators => verify_operators(&mut ctx)?,
        Mode::LimitCoeffs => limit_coeffs(&mut ctx)?,
        Mode::Simulate => simulate(&mut ctx)?,
        Mode::Converge => converge(&mut ctx)?,
        Mode::Report => report(&mut ctx)?,
    };
    write_manifest(&ctx, mode)?;
    Ok(stdout)
}

fn write_manifest(ctx: &Context<'_>, mode: Mode) -> Result<(), CliError> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "artifact": "revolve",
        "version": ARTIFACT_VERSION,
        "mode": mode.name(),
        "seed": ctx.evolution.seed,
        "config_fingerprint": format!("{:016x}", ctx.evolution.fingerprint()),
        "workers": ctx.options.workers,
        "config": ctx.config,
        "artifacts": ctx.artifacts,
        "created_unix": created,
    });
    write_json(&ctx.out.join("manifest.json"), &manifest)
}

fn verify_operators(ctx: &mut Context<'_>) -> Result<String, CliError> {
    if ctx.evolution.switching != Switching::UniformSphere {
        return Err(CliError::Schema {
            field: "evolution.switching".into(),
            message: "the operator lab works with the uniform switching law".into(),
        });
    }
    let n = ctx.evolution.dimension;
    let profile = &ctx.evolution.profile;
    let grid = build_grid(n, ctx.config.resolution())?;
    let balance = check_balance(profile, &grid, revolve_core::limits::BALANCE_TOLERANCE)?;
    let identities = random_identity_check(&grid, IDENTITY_FIELDS, ctx.evolution.seed);
    let limit = limit_coefficients(profile, &grid)?;
    let generator = assemble_limit_generator(profile, &grid)?;
    let scaling: Value = if profile.atoms().is_empty() {
        let eps = residual_eps_ladder();
        let fits = gaussian_probes(n)
            .into_iter()
            .map(|(phi, x)| {
                let fit = residual_scaling(profile, &phi, &x, &grid, &eps)?;
                Ok(json!({ "test_function": phi, "x": x, "fit": fit }))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        json!(fits)
    } else {
        Value::Null
    };
    let report = json!({
        "profile": profile.name(),
        "dimension": n,
        "grid_resolution": ctx.config.resolution(),
        "identity_residuals": identities,
        "identity_max": identities.max(),
        "balance": balance,
        "generator": generator,
        "limit": limit,
        "residual_scaling": scaling,
    });
    ctx.emit_json("operators.json", &report)?;
    Ok(to_json_string(&report))
}

fn limit_coeffs(ctx: &mut Context<'_>) -> Result<String, CliError> {
    let limit = ctx.limit()?;
    let mut report = json!({ "drift": limit.drift, "A": limit.diffusion });
    if ctx.options.paper_sign {
        report["paper_sign_drift"] = json!(limit.paper_sign_drift);
    }
    ctx.emit_json("limit.json", &report)?;
    Ok(to_json_string(&report))
}

fn simulate(ctx: &mut Context<'_>) -> Result<String, CliError> {
    let options = ctx.ensemble_options(ctx.options.full_trajectories);
    let (ensemble, trajectories) = simulate_ensemble_with(&ctx.evolution, options)?;
    ctx.emit_text("endpoints.csv", &endpoints_csv(&ensemble))?;
    if let Some(trajectories) = trajectories {
        ctx.emit_text("trajectories.csv", &trajectories_csv(ensemble.dimension, &trajectories))?;
    }
    let summary = summarize(&ensemble).ok();
    let report = json!({
        "n_paths": ensemble.n_paths(),
        "t": ensemble.t,
        "fingerprint": format!("{:016x}", ensemble.fingerprint),
        "mean_switches": ensemble.switch_counts.iter().sum::<u64>() as f64 / ensemble.n_paths() as f64,
        "moments": summary,
    });
    ctx.emit_json("simulation.json", &report)?;
    Ok(to_json_string(&report))
}

fn converge(ctx: &mut Context<'_>) -> Result<String, CliError> {
    let limit = ctx.limit()?;
    let mut replicates = Vec::with_capacity(ctx.config.replicates);
    for r in 0..ctx.config.replicates {
        let mut base = ctx.evolution.clone();
        // replicate r uses seeds offset by r·|eps_list| so no ε shares a stream
        base.seed = base.seed.wrapping_add((r * ctx.config.eps_list.len()) as u64);
        replicates.push(convergence_sweep(&base, &ctx.config.eps_list, &limit, ctx.options.workers)?);
    }
    let csv: String = replicates
        .iter()
        .enumerate()
        .map(|(r, sweep)| {
            let body = sweep_csv(sweep);
            if r == 0 {
                body
            } else {
                body.lines().skip(1).map(|l| format!("{l}\n")).collect()
            }
        })
        .collect();
    ctx.emit_text("sweep.csv", &csv)?;
    let report: Vec<Value> = replicates
        .iter()
        .map(|sweep| {
            json!({
                "eps": sweep.points.iter().map(|p| p.eps).collect::<Vec<_>>(),
                "metric": sweep.points.iter().map(|p| p.metric).collect::<Vec<_>>(),
                "noise": sweep.points.iter().map(|p| p.noise).collect::<Vec<_>>(),
                "ks_pvalues": sweep.points.iter().map(|p| p.ks_pvalues.clone()).collect::<Vec<_>>(),
                "slope": sweep.fit.slope,
                "r_squared": sweep.fit.r_squared,
                "plateau_detected": sweep.fit.plateau_detected,
                "fit": sweep.fit,
            })
        })
        .collect();
    let report = json!({ "limit": limit, "replicates": report });
    ctx.emit_json("sweep.json", &report)?;
    Ok(to_json_string(&report))
}

fn report(ctx: &mut Context<'_>) -> Result<String, CliError> {
    let limit = ctx.limit()?;
    let evolution = &ctx.evolution;
    let target = gaussian_law_at(&limit, evolution.horizon, &evolution.x0)?;
    let (ensemble, _) = simulate_ensemble_with(evolution, ctx.ensemble_options(false))?;
    let summary = summarize(&ensemble)?;
    let marginals = ks_marginals(&ensemble, &target)?;
    let projections = ks_projections(&ensemble, &target, PROJECTIONS, evolution.seed)?;

    let mut csv = String::from("coordinate,sample_mean,target_mean,mean_se,sample_var,target_var,var_se,ks_statistic,ks_p\n");
    let mut text = format!(
        "revolve {} report\nprofile {}  n={}  eps={}  T={}  paths={}  seed={}\n\n",
        ARTIFACT_VERSION,
        evolution.profile.name(),
        evolution.dimension,
        evolution.epsilon,
        evolution.horizon,
        evolution.n_paths,
        evolution.seed,
    );
    text.push_str("coord      mean    target       var    target   KS p\n");
    for (i, fit) in marginals.iter().enumerate() {
        csv.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            i + 1,
            summary.mean[i],
            target.mean[i],
            summary.mean_se[i],
            summary.covariance[i][i],
            target.covariance[i][i],
            summary.covariance_se[i][i],
            fit.statistic,
            fit.p_value,
        ));
        let p = match fit.status {
            FitStatus::Tested => format!("{:.4}", fit.p_value),
            FitStatus::Skipped => "skipped".into(),
            FitStatus::Degenerate => "degenerate".into(),
        };
        text.push_str(&format!(
            "x{:<4} {:>9.5} {:>9.5} {:>9.5} {:>9.5}   {}\n",
            i + 1,
            summary.mean[i],
            target.mean[i],
            summary.covariance[i][i],
            target.covariance[i][i],
            p
        ));
    }
    text.push_str("\nprojections <u, x> against the limit law:\n");
    for (u, fit) in &projections {
        let u: Vec<String> = u.iter().map(|v| format!("{v:+.3}")).collect();
        text.push_str(&format!("  u = ({})  KS p = {:.4}\n", u.join(", "), fit.p_value));
    }
    ctx.emit_text("report.csv", &csv)?;
    ctx.emit_text("report.txt", &text)?;
    let json = json!({
        "limit": limit,
        "target": target,
        "moments": summary,
        "ks_marginals": marginals,
        "ks_projections": projections.iter().map(|(u, f)| json!({ "u": u, "fit": f })).collect::<Vec<_>>(),
    });
    ctx.emit_json("report.json", &json)?;
    Ok(text)
}

/// Parses `REVOLVE_THREADS`.
pub fn workers_from_env(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None | Some("") => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(Some(w)),
            _ => Err(CliError::Schema {
                field: "REVOLVE_THREADS".into(),
                message: format!("expected a positive integer, got {v:?}"),
            }),
        },
    }
}

pub fn read_config(path: &Path) -> Result<ExperimentConfig, CliError> {
    ExperimentConfig::load(path)
}
