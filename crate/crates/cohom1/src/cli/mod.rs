//! Command-line surface.

pub mod config;
pub mod output;
pub mod svg;

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::asymptotics::catalog::catalog_audit;
use crate::asymptotics::classify::nu_of;
use crate::error::Error;
use crate::integrate::Status;
use crate::phase::ModelParams;
use crate::run::{self, RunSpec};
use crate::search::{self, SearchOptions};
use crate::verify;
use config::{parse_angle, ConfigError, RunConfig};
use output::RunSummary;

#[derive(Debug, Parser)]
#[command(
    name = "cohom1",
    version,
    about = "Shooting experiments for cohomogeneity-one Ricci solitons on O(k) -> CP^{2m+1}"
)]
pub struct Cli {
    /// Worker threads for sweeps and audits.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one run; writes trajectory.csv and summary.json.
    Integrate(IntegrateArgs),
    /// Integrate one run and print its classification as JSON.
    Classify(RunArgs),
    /// Bisect s4 for the steady threshold alpha.
    #[command(alias = "search_alpha")]
    SearchAlpha(AlphaArgs),
    /// Bisect s4 for the expanding threshold beta over an s5 grid.
    #[command(alias = "search_beta")]
    SearchBeta(BetaArgs),
    /// Bisect theta for the Ricci-flat run that stays in B.
    #[command(alias = "search_theta")]
    SearchTheta(ThetaArgs),
    /// Classify every node of a (theta, s4, s5) grid.
    Atlas(AtlasArgs),
    /// Run the invariant suite; nonzero exit on any violation.
    Verify(VerifyArgs),
    /// Print the critical points with their residuals.
    #[command(alias = "critical_points")]
    CriticalPoints(CriticalArgs),
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// `key = value` configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<u8>,
    /// Radians; `pi`, `pi/2` and `3*pi/4` are accepted.
    #[arg(long)]
    pub theta: Option<String>,
    #[arg(long)]
    pub s4: Option<f64>,
    #[arg(long)]
    pub s5: Option<f64>,
    #[arg(long)]
    pub eta0: Option<f64>,
    #[arg(long)]
    pub eta_max: Option<f64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IntegrateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Overwrite existing output files.
    #[arg(long)]
    pub force: bool,
    /// Leave the t, a, b, c, f columns empty.
    #[arg(long)]
    pub no_reconstruct: bool,
}

#[derive(Debug, Args)]
pub struct AlphaArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub theta: String,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = search::DEFAULT_S4_MAX)]
    pub hi: f64,
    #[arg(long, default_value_t = search::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 60.0)]
    pub eta_max: f64,
    /// Skip the interior-probe monotonicity audit.
    #[arg(long)]
    pub no_audit: bool,
}

#[derive(Debug, Args)]
pub struct BetaArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub theta: String,
    /// Comma-separated s5 values; 8 log-spaced points in [1e-2, 1e2] by default.
    #[arg(long)]
    pub s5: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    pub lo: f64,
    #[arg(long, default_value_t = search::DEFAULT_S4_MAX)]
    pub hi: f64,
    #[arg(long, default_value_t = search::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 60.0)]
    pub eta_max: f64,
    #[arg(long)]
    pub no_audit: bool,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long, default_value_t = search::DEFAULT_THETA_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 60.0)]
    pub eta_max: f64,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    #[arg(long)]
    pub m: u32,
    #[arg(long)]
    pub k: u32,
    #[arg(long, default_value_t = 0)]
    pub epsilon: u8,
    /// Comma-separated angles.
    #[arg(long, default_value = "0,pi/2")]
    pub thetas: String,
    #[arg(long, default_value = "0,1")]
    pub s4: String,
    #[arg(long, default_value = "0")]
    pub s5: String,
    #[arg(long)]
    pub eta_max: Option<f64>,
    #[arg(long, default_value = "atlas")]
    pub output_dir: PathBuf,
    /// Also write (eta, Z1) and (eta, sqrt(Z3/Z2)) plots per run.
    #[arg(long)]
    pub plots: bool,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Samples per boundary stratum.
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Directory holding trajectory.csv and summary.json to re-classify.
    #[arg(long)]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CriticalArgs {
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    #[arg(long, default_value_t = 1)]
    pub epsilon: u8,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Config = 2,
    Numerical = 3,
    Verification = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            exit: Exit::Config,
            message: msg.into(),
        }
    }
    fn numerical(msg: impl Into<String>) -> Self {
        Self {
            exit: Exit::Numerical,
            message: msg.into(),
        }
    }
    fn verification(msg: impl Into<String>) -> Self {
        Self {
            exit: Exit::Verification,
            message: msg.into(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::Bracket { .. } => Failure::config(e.to_string()),
            _ => Failure::numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("I/O error: {e}"))
    }
}

type CmdResult = std::result::Result<(), Failure>;

pub fn run_cli(cli: Cli) -> Exit {
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let res = match cli.command {
        Command::Integrate(a) => cmd_integrate(a),
        Command::Classify(a) => cmd_classify(a),
        Command::SearchAlpha(a) => cmd_search_alpha(a),
        Command::SearchBeta(a) => cmd_search_beta(a),
        Command::SearchTheta(a) => cmd_search_theta(a),
        Command::Atlas(a) => cmd_atlas(a),
        Command::Verify(a) => cmd_verify(a),
        Command::CriticalPoints(a) => cmd_critical_points(a),
    };
    match res {
        Ok(()) => Exit::Ok,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.exit
        }
    }
}

fn resolve(args: &RunArgs) -> std::result::Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
            RunConfig::parse(&text)
                .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = args.m {
        cfg.m = v;
    }
    if let Some(v) = args.k {
        cfg.k = v;
    }
    if let Some(v) = args.epsilon {
        cfg.set("epsilon", &v.to_string())
            .map_err(Failure::config)?;
    }
    if let Some(v) = &args.theta {
        cfg.set("theta", v).map_err(Failure::config)?;
    }
    if let Some(v) = args.s4 {
        cfg.s4 = v;
    }
    if let Some(v) = args.s5 {
        cfg.s5 = v;
    }
    if let Some(v) = args.eta0 {
        cfg.eta0 = Some(v);
    }
    if let Some(v) = args.eta_max {
        cfg.eta_max = Some(v);
    }
    if let Some(v) = &args.output_dir {
        cfg.output_dir = v.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn angle(s: &str) -> std::result::Result<f64, Failure> {
    parse_angle(s).ok_or_else(|| Failure::config(format!("cannot read angle `{s}`")))
}

fn list(
    s: &str,
    what: &str,
    parse: impl Fn(&str) -> Option<f64>,
) -> std::result::Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|x| parse(x.trim()).ok_or_else(|| Failure::config(format!("bad {what} value `{x}`"))))
        .collect()
}

fn number(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

fn check_free(paths: &[PathBuf], force: bool) -> CmdResult {
    if force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(Failure::config(format!(
                "{} exists; pass --force to overwrite",
                p.display()
            )));
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn print_json(v: &impl serde::Serialize) -> CmdResult {
    let s = serde_json::to_string(v).map_err(|e| Failure::numerical(e.to_string()))?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{s}");
    Ok(())
}

fn run_failed(status: &Status) -> Option<String> {
    match status {
        Status::NumericalFailure { reason } => Some(reason.clone()),
        _ => None,
    }
}

fn cmd_integrate(a: IntegrateArgs) -> CmdResult {
    let cfg = resolve(&a.run)?;
    let spec = cfg.run_spec()?;
    let csv_path = cfg.output_dir.join("trajectory.csv");
    let json_path = cfg.output_dir.join("summary.json");
    check_free(&[csv_path.clone(), json_path.clone()], a.force)?;

    let report = run::run(&spec)?;
    let profile = if a.no_reconstruct {
        None
    } else {
        output::profile_for(&report.trajectory)
    };
    write(
        &csv_path,
        &output::trajectory_csv(&report.trajectory, profile.as_ref()),
    )?;
    let summary = RunSummary::from_report(&report);
    let text = serde_json::to_string(&summary).map_err(|e| Failure::numerical(e.to_string()))?;
    write(&json_path, &(text + "\n"))?;
    println!(
        "{}: {} ({}), {} samples -> {}",
        report.classification.outcome.name(),
        report.classification.label,
        report
            .classification
            .limit_point
            .map(|i| i.name().to_string())
            .unwrap_or_else(|| "no catalog limit".into()),
        report.trajectory.samples.len(),
        cfg.output_dir.display()
    );
    match run_failed(&report.trajectory.status) {
        Some(r) => Err(Failure::numerical(format!("integration failed: {r}"))),
        None => Ok(()),
    }
}

fn cmd_classify(a: RunArgs) -> CmdResult {
    let cfg = resolve(&a)?;
    let report = run::run(&cfg.run_spec()?)?;
    let s = RunSummary::from_report(&report);
    print_json(&json!({
        "label": s.label,
        "limit_point": s.limit_point,
        "m": s.m, "k": s.k, "epsilon": s.epsilon,
        "theta": s.theta, "s4": s.s4, "s5": s.s5,
        "status": s.status,
        "classification": s.classification,
        "drift": s.drift,
    }))?;
    match run_failed(&report.trajectory.status) {
        Some(r) => Err(Failure::numerical(format!("integration failed: {r}"))),
        None => Ok(()),
    }
}

fn search_opts(tol: f64, eta_max: f64, audit: bool) -> std::result::Result<SearchOptions, Failure> {
    if !(tol > 0.0) || !(eta_max > 0.0) {
        return Err(Failure::config("tol and eta_max must be positive"));
    }
    Ok(SearchOptions {
        tol,
        eta_max,
        audit,
    })
}

fn cmd_search_alpha(a: AlphaArgs) -> CmdResult {
    let mp = ModelParams::new(a.m, a.k, 0)?;
    let theta = angle(&a.theta)?;
    let opts = search_opts(a.tol, a.eta_max, !a.no_audit)?;
    let r = search::find_alpha(&mp, theta, (a.lo, a.hi), &opts)?;
    print_json(&json!({
        "target": "alpha", "m": a.m, "k": a.k, "theta": theta,
        "alpha_hat": r.value, "bracket": [r.lo, r.hi], "width": r.width,
        "outcome_lo": r.outcome_lo, "outcome_hi": r.outcome_hi,
        "probes": r.probes, "audit": r.audit, "warnings": r.warnings,
    }))
}

fn cmd_search_beta(a: BetaArgs) -> CmdResult {
    let mp = ModelParams::new(a.m, a.k, 1)?;
    let theta = angle(&a.theta)?;
    let grid = match &a.s5 {
        Some(s) => list(s, "s5", number)?,
        None => search::default_s5_grid(),
    };
    let opts = search_opts(a.tol, a.eta_max, !a.no_audit)?;
    let r = search::find_beta(&mp, theta, &grid, (a.lo, a.hi), &opts)?;
    print_json(&json!({
        "target": "beta", "m": a.m, "k": a.k, "theta": theta,
        "beta_hat": r.beta_hat, "s5_grid": grid,
        "per_s5": r.per_s5.iter().map(|(s5, t)| json!({
            "s5": s5, "threshold": t.value, "bracket": [t.lo, t.hi],
            "probes": t.probes, "audit": t.audit,
        })).collect::<Vec<_>>(),
        "warnings": r.warnings,
    }))
}

fn cmd_search_theta(a: ThetaArgs) -> CmdResult {
    let mp = ModelParams::new(a.m, a.k, 0)?;
    let opts = search_opts(a.tol, a.eta_max, false)?;
    let r = search::find_theta_star(&mp, &opts)?;
    let report = run::run(&RunSpec::new(mp, r.theta_star, 0.0, 0.0).with_eta_max(a.eta_max))?;
    let c = &report.classification;
    print_json(&json!({
        "target": "theta_star", "m": a.m, "k": a.k,
        "theta_star": r.theta_star, "bracket": [r.lo, r.hi],
        "stays_in_b": r.stays_in_b,
        "label": c.label, "limit_point": c.limit_point,
        "mu2": c.mu2, "nu2": c.nu2, "base_label": c.base_label,
        "probes": r.probes,
    }))
}

fn cmd_atlas(a: AtlasArgs) -> CmdResult {
    let mp = ModelParams::new(a.m, a.k, a.epsilon)?;
    let thetas = list(&a.thetas, "theta", parse_angle)?;
    let s4s = list(&a.s4, "s4", number)?;
    let s5s = list(&a.s5, "s5", number)?;
    if thetas.is_empty() || s4s.is_empty() || s5s.is_empty() {
        return Err(Failure::config("empty grid"));
    }
    let json_path = a.output_dir.join("atlas.json");
    let svg_path = a.output_dir.join("atlas.svg");
    check_free(&[json_path.clone(), svg_path.clone()], a.force)?;

    let nodes = search::atlas(&mp, &thetas, &s4s, &s5s, a.eta_max);
    let text = serde_json::to_string(&nodes).map_err(|e| Failure::numerical(e.to_string()))?;
    write(&json_path, &(text + "\n"))?;

    let mut rows = Vec::new();
    let mut cells = Vec::new();
    for &th in &thetas {
        for &s5 in &s5s {
            rows.push(format!("theta={th:.4} s5={s5}"));
            cells.push(
                s4s.iter()
                    .map(|&s4| {
                        nodes
                            .iter()
                            .find(|n| n.theta == th && n.s4 == s4 && n.s5 == s5)
                            .and_then(|n| n.label())
                            .map(|l| l.name().to_string())
                    })
                    .collect(),
            );
        }
    }
    let cols: Vec<String> = s4s.iter().map(|s| format!("s4={s}")).collect();
    let title = format!("labels, m={} k={} eps={}", a.m, a.k, a.epsilon);
    write(&svg_path, &svg::heat_map(&title, &rows, &cols, &cells))?;

    if a.plots {
        for (i, n) in nodes.iter().enumerate() {
            let mut spec = RunSpec::new(mp, n.theta, n.s4, n.s5);
            if let Some(e) = a.eta_max {
                spec.cfg.eta_max = e;
            }
            let Ok((_, tr)) = run::shoot(&spec) else {
                continue;
            };
            let name = format!("theta={:.4} s4={} s5={}", n.theta, n.s4, n.s5);
            let z1: Vec<(f64, f64)> = tr.samples.iter().map(|s| (s.eta, s.p.z1)).collect();
            let nu: Vec<(f64, f64)> = tr.samples.iter().map(|s| (s.eta, nu_of(&s.p))).collect();
            let dir = a.output_dir.join("plots");
            write(
                &dir.join(format!("run{i:03}_z1.svg")),
                &svg::line_plot(&name, "eta", "Z1", &[("Z1".into(), z1)]),
            )?;
            write(
                &dir.join(format!("run{i:03}_nu.svg")),
                &svg::line_plot(&name, "eta", "sqrt(Z3/Z2)", &[("sqrt(Z3/Z2)".into(), nu)]),
            )?;
        }
    }
    let failed = nodes.iter().filter(|n| n.error.is_some()).count();
    println!(
        "{} nodes ({} failed) -> {}",
        nodes.len(),
        failed,
        a.output_dir.display()
    );
    Ok(())
}

fn audit_seed() -> std::result::Result<u64, Failure> {
    match std::env::var("COHOM1_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| {
            Failure::config(format!(
                "COHOM1_SEED must be an unsigned integer, got `{s}`"
            ))
        }),
        Err(_) => Ok(verify::DEFAULT_AUDIT_SEED),
    }
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let seed = audit_seed()?;
    let mut checks = match &a.replay {
        Some(_) => Vec::new(),
        None => verify::full_suite(a.samples.max(1), seed),
    };
    if let Some(dir) = &a.replay {
        let csv = fs::read_to_string(dir.join("trajectory.csv"))?;
        let sum_text = fs::read_to_string(dir.join("summary.json"))?;
        let summary: RunSummary = serde_json::from_str(&sum_text)
            .map_err(|e| Failure::config(format!("summary.json: {e}")))?;
        let c = output::replay(&csv, &summary)?;
        let want = &summary.classification;
        let ok =
            c.label == want.label && c.outcome == want.outcome && c.limit_point == want.limit_point;
        checks.push(verify::Check {
            name: format!("replay {}", dir.display()),
            passed: ok,
            detail: format!(
                "replayed {} {:?} {:?}, recorded {} {:?} {:?}",
                c.label, c.outcome, c.limit_point, want.label, want.outcome, want.limit_point
            ),
        });
    }
    let mut failed = 0;
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
        if !c.passed {
            failed += 1;
        }
    }
    println!("seed {seed}; {} checks, {failed} failed", checks.len());
    if failed > 0 {
        Err(Failure::verification(format!("{failed} checks failed")))
    } else {
        Ok(())
    }
}

fn cmd_critical_points(a: CriticalArgs) -> CmdResult {
    let mp = ModelParams::new(a.m, 1, a.epsilon)?;
    let entries = catalog_audit(&mp);
    if a.json {
        return print_json(&entries);
    }
    println!("m = {}, n = {}, epsilon = {}", mp.m(), mp.n(), mp.epsilon());
    println!(
        "{:<7} {:>5}  {:>11} {:>11} {:>11} {:>11}  point",
        "id", "free", "|V|", "Q", "H-1", "Z4^2-Z2Z3"
    );
    for e in &entries {
        let free = e.free.map(|f| format!("{f}")).unwrap_or_else(|| "-".into());
        let pt: Vec<String> = e
            .point
            .to_array()
            .iter()
            .map(|v| format!("{v:.6}"))
            .collect();
        println!(
            "{:<7} {:>5}  {:>11.3e} {:>11.3e} {:>11.3e} {:>11.3e}  ({})",
            e.id.name(),
            free,
            e.v_inf,
            e.q,
            e.h_minus_1,
            e.constraint_residual,
            pt.join(", ")
        );
    }
    Ok(())
}
