use std::path::Path;

use mixfbm::fbm::{covariance_diagnostic, sample_fbm, sample_fbm_with, FbmSpec, RngStream};
use mixfbm::fraccalc::{Grid, GridPath};
use mixfbm::ldp::{minimize_rate_endpoint, rate_lower_envelope, Constraint, RateProblem, RateResult};
use mixfbm::mc::{
    run_averaging_study, run_ldp_consistency, run_rare_event, AveragingStudy, EstimateReport, Event, ExperimentPlan,
};
use mixfbm::multiscale::{build_system, sample_fast_noise, solve_averaged, solve_slow_fast, AveragedDrift, SystemSpec};
use mixfbm::par;
use serde::Serialize;

use crate::config::{DriftConfig, RateTarget, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{columns, push_path_rows, Cell, Csv, Manifest, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SampleFbm,
    Solve,
    Average,
    Rate,
    Mc,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::SampleFbm => "sample-fbm",
            Command::Solve => "solve",
            Command::Average => "average",
            Command::Rate => "rate",
            Command::Mc => "mc",
        }
    }
}

/// Runs `cmd`, writes its artifacts and the manifest into `out`.
///
/// A rate minimization that does not converge still writes its outputs and
/// then fails with [`CliError::NotConverged`].
pub fn run(cmd: Command, cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    let mut dir = OutputDir::create(out)?;
    let pending = match cmd {
        Command::SampleFbm => cmd_sample_fbm(cfg, &mut dir).map(|_| None),
        Command::Solve => cmd_solve(cfg, &mut dir).map(|_| None),
        Command::Average => cmd_average(cfg, &mut dir).map(|_| None),
        Command::Rate => cmd_rate(cfg, &mut dir),
        Command::Mc => cmd_mc(cfg, &mut dir).map(|_| None),
    }?;
    let manifest = dir.finish(cmd.name(), cfg.digest(), cfg.seed)?;
    match pending {
        Some(msg) => Err(CliError::NotConverged(msg)),
        None => Ok(manifest),
    }
}

fn grid(cfg: &RunConfig) -> Result<Grid> {
    Ok(Grid::new(cfg.horizon, cfg.n_steps)?)
}

fn system(cfg: &RunConfig) -> Result<SystemSpec> {
    Ok(build_system(&cfg.system, &cfg.system_params)?)
}

pub fn cmd_sample_fbm(cfg: &RunConfig, dir: &mut OutputDir) -> Result<()> {
    let s = &cfg.sample;
    let spec = FbmSpec::new(cfg.hurst, s.dim, grid(cfg)?, s.method)?;
    let paths = par::try_map_indexed(s.n_paths, |k| sample_fbm(&spec, RngStream::new(cfg.seed, k as u64)))?;
    let header: Vec<String> = ["path", "node", "t"].map(String::from).into_iter().chain(columns("b", s.dim)).collect();
    let mut csv = Csv::new(&header);
    for (k, p) in paths.iter().enumerate() {
        push_path_rows(&mut csv, &[k.into()], &[p]);
    }
    dir.write("fbm_paths.csv", &csv.into_bytes())?;
    let diag = covariance_diagnostic(&paths, cfg.hurst, s.covariance_lattice)?;
    log::info!("covariance diagnostic: {} of {} entries within 3 stderr", diag.n_within, diag.entries.len());
    dir.write_json("fbm_covariance.json", &diag)
}

pub fn cmd_solve(cfg: &RunConfig, dir: &mut OutputDir) -> Result<()> {
    let spec = system(cfg)?;
    let scales = cfg.scales()?;
    let grid = grid(cfg)?;
    let fbm = FbmSpec::new(cfg.hurst, spec.dims.d1, grid, Default::default())?;
    let paths = par::try_map_indexed(cfg.solve.n_paths, |k| {
        let mut rng = RngStream::new(cfg.seed, k as u64).rng();
        let bh = sample_fbm_with(&fbm, &mut rng)?;
        let w = sample_fast_noise(&spec, &grid, &scales, &mut rng)?;
        solve_slow_fast(&spec, &scales, &bh, w.as_ref())
    })?;
    let header: Vec<String> = ["path", "node", "t"]
        .map(String::from)
        .into_iter()
        .chain(columns("x", spec.dims.m))
        .chain(columns("y", spec.dims.n))
        .collect();
    let mut csv = Csv::new(&header);
    for (k, p) in paths.iter().enumerate() {
        let mut parts: Vec<&GridPath> = vec![&p.slow];
        parts.extend(p.fast.as_ref());
        push_path_rows(&mut csv, &[k.into()], &parts);
    }
    dir.write("trajectories.csv", &csv.into_bytes())?;
    if spec.bar_f1.is_some() {
        let xbar = solve_averaged(&AveragedDrift::closed_form(&spec)?, &spec.x0, &grid)?;
        let header: Vec<String> =
            ["node", "t"].map(String::from).into_iter().chain(columns("x", spec.dims.m)).collect();
        let mut csv = Csv::new(&header);
        push_path_rows(&mut csv, &[], &[&xbar]);
        dir.write("averaged.csv", &csv.into_bytes())?;
    }
    Ok(())
}

pub fn cmd_average(cfg: &RunConfig, dir: &mut OutputDir) -> Result<()> {
    let avg = cfg.average.as_ref().ok_or_else(|| CliError::config("average needs an `average` block"))?;
    let spec = system(cfg)?;
    let drift = match &avg.drift {
        DriftConfig::ClosedForm => AveragedDrift::closed_form(&spec)?,
        DriftConfig::Ergodic { params, lattice } => AveragedDrift::ergodic(&spec, params, lattice.clone())?,
    };
    let (epsilon, fast_substeps) = match &cfg.scales {
        Some(s) => (s.epsilon, s.fast_substeps),
        None if avg.slow_noise => return Err(CliError::config("slow noise needs `scales.epsilon`")),
        None => (1.0, None),
    };
    let study = AveragingStudy {
        hurst: cfg.hurst,
        horizon: cfg.horizon,
        n_steps: cfg.n_steps,
        epsilon,
        slow_noise: avg.slow_noise,
        delta_schedule: avg.delta_schedule.clone(),
        n_samples: avg.n_samples,
        alpha: cfg.alpha,
        seed: cfg.seed,
        fast_substeps,
    };
    let report = run_averaging_study(&spec, &drift, &study)?;
    let mut csv =
        Csv::new(&["delta", "mean_sup_error", "sup_error_stderr", "mean_holder_error", "holder_error_stderr"]);
    for d in &report.per_delta {
        csv.row(&[
            d.delta.into(),
            d.mean_sup_error.into(),
            d.sup_error_stderr.into(),
            d.mean_holder_error.into(),
            d.holder_error_stderr.into(),
        ]);
    }
    dir.write("averaging.csv", &csv.into_bytes())?;
    dir.write_json("averaging.json", &report)
}

#[derive(Debug, Serialize)]
struct CandidateSummary {
    endpoint: Vec<f64>,
    energy: f64,
    converged: bool,
}

#[derive(Debug, Serialize)]
struct RateSummary {
    energy: f64,
    converged: bool,
    iterations: usize,
    gradient_norm: f64,
    constraint_residual: f64,
    /// File holding the minimizing control density and its skeleton path.
    du_star: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    candidates: Option<Vec<CandidateSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    best_candidate: Option<usize>,
}

const CONTROL_FILE: &str = "rate_control.csv";

fn write_control(dir: &mut OutputDir, r: &RateResult) -> Result<()> {
    let header: Vec<String> = ["node", "t"]
        .map(String::from)
        .into_iter()
        .chain(columns("du", r.du_star.dim()))
        .chain(columns("x", r.skeleton_path.dim()))
        .collect();
    let mut csv = Csv::new(&header);
    push_path_rows(&mut csv, &[], &[&r.du_star, &r.skeleton_path]);
    dir.write(CONTROL_FILE, &csv.into_bytes())
}

fn summary(r: &RateResult) -> RateSummary {
    RateSummary {
        energy: r.energy,
        converged: r.converged,
        iterations: r.iterations,
        gradient_norm: r.gradient_norm,
        constraint_residual: r.constraint_residual,
        du_star: Some(CONTROL_FILE.into()),
        candidates: None,
        best_candidate: None,
    }
}

/// Returns a message when the minimization did not converge.
pub fn cmd_rate(cfg: &RunConfig, dir: &mut OutputDir) -> Result<Option<String>> {
    let rate = cfg.rate.as_ref().ok_or_else(|| CliError::config("rate needs a `rate` block"))?;
    let spec = system(cfg)?;
    let drift = AveragedDrift::closed_form(&spec)?;
    let constraint = match &rate.target {
        RateTarget::HitEndpoint(z) => Constraint::HitEndpoint(z.clone()),
        RateTarget::EnterSet { a, b, .. } => Constraint::EnterSet { a: a.clone(), b: *b },
    };
    let mut problem = RateProblem::new(spec, drift, cfg.hurst, constraint, grid(cfg)?)?;
    if let Some(n) = rate.ball_bound {
        problem = problem.with_ball(n)?;
    }
    let summary = match &rate.target {
        RateTarget::HitEndpoint(_) => {
            let r = minimize_rate_endpoint(&problem, &rate.options)?;
            write_control(dir, &r)?;
            summary(&r)
        }
        RateTarget::EnterSet { candidates, .. } => {
            let env = rate_lower_envelope(&problem, candidates, &rate.options)?;
            let listed = env
                .candidates
                .iter()
                .zip(candidates)
                .map(|(r, z)| CandidateSummary { endpoint: z.clone(), energy: r.energy, converged: r.converged })
                .collect();
            match env.best {
                Some(k) => {
                    let r = &env.candidates[k];
                    write_control(dir, r)?;
                    RateSummary { candidates: Some(listed), best_candidate: Some(k), ..summary(r) }
                }
                None => RateSummary {
                    energy: env.energy,
                    converged: true,
                    iterations: 0,
                    gradient_norm: 0.0,
                    constraint_residual: 0.0,
                    du_star: None,
                    candidates: Some(listed),
                    best_candidate: None,
                },
            }
        }
    };
    log::info!("rate energy {:.6} (converged: {})", summary.energy, summary.converged);
    dir.write_json("rate.json", &summary)?;
    Ok((!summary.converged)
        .then(|| format!("residual {:.3e} after {} iterations", summary.constraint_residual, summary.iterations)))
}

fn mc_csv(report: &EstimateReport, gaps: Option<&[Option<f64>]>) -> Vec<u8> {
    let mut header = vec!["epsilon", "delta", "p_hat", "stderr", "n_hits", "n_samples", "eps_log_p", "truncated"];
    if gaps.is_some() {
        header.push("gap");
    }
    let mut csv = Csv::new(&header);
    for (k, e) in report.per_epsilon.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![
            e.epsilon.into(),
            e.delta.into(),
            e.p_hat.into(),
            e.stderr.into(),
            e.n_hits.into(),
            e.n_samples.into(),
            e.eps_log_p.into(),
            e.truncated.into(),
        ];
        if let Some(g) = gaps {
            cells.push(g[k].into());
        }
        csv.row(&cells);
    }
    csv.into_bytes()
}

pub fn cmd_mc(cfg: &RunConfig, dir: &mut OutputDir) -> Result<()> {
    let mc = cfg.mc.as_ref().ok_or_else(|| CliError::config("mc needs an `mc` block"))?;
    let plan = ExperimentPlan {
        system: cfg.system.clone(),
        system_params: cfg.system_params.clone(),
        hurst: cfg.hurst,
        horizon: cfg.horizon,
        n_steps: cfg.n_steps,
        event: mc.event.clone(),
        epsilon_schedule: mc.epsilon_schedule.clone(),
        delta_rule: mc.delta_rule,
        n_samples: mc.n_samples.clone(),
        master_seed: cfg.seed,
        fast_substeps: mc.fast_substeps,
        budget_secs: mc.budget_secs,
        strict: cfg.strict,
    };
    let Some(candidates) = &mc.consistency_candidates else {
        let report = run_rare_event(&plan)?;
        dir.write("mc.csv", &mc_csv(&report, None))?;
        return dir.write_json("mc_report.json", &report);
    };
    let Event::EndpointExceeds { a, b } = &mc.event else {
        return Err(CliError::config("consistency checks need an endpoint_exceeds event"));
    };
    let spec = system(cfg)?;
    let drift = AveragedDrift::closed_form(&spec)?;
    let problem = RateProblem::new(spec, drift, cfg.hurst, Constraint::EnterSet { a: a.clone(), b: *b }, grid(cfg)?)?;
    let options = cfg.rate.as_ref().map(|r| r.options).unwrap_or_default();
    let report = run_ldp_consistency(&plan, &problem, candidates, &options)?;
    log::info!("consistency verdict: monotone {}, consistent {}", report.monotone, report.consistent);
    dir.write("mc.csv", &mc_csv(&report.estimates, Some(&report.gaps)))?;
    dir.write_json("mc_report.json", &report)
}
