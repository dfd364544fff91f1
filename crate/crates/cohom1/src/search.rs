//! Bisection for the thresholds `alpha`, `beta` and the angle `theta*`, and
//! classification sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::classify::{AsymptoticLabel, Classification};
use crate::error::{Error, Result};
use crate::phase::ModelParams;
use crate::regions::{self, Transition};
use crate::run::{self, RunSpec};

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_S4_MAX: f64 = 1e3;
pub const AUDIT_PROBES: usize = 8;
pub const DEFAULT_THETA_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub tol: f64,
    /// Horizon of every probe run.
    pub eta_max: f64,
    /// Re-run the outcome at interior points of the original bracket.
    pub audit: bool,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            eta_max: 60.0,
            audit: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub value: f64,
    pub outcome: Transition,
    pub eta_exit: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotoneAudit {
    pub probes: Vec<Probe>,
    /// Set when some probe disagrees with the side of the threshold it lies on.
    pub non_monotone: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// Midpoint of the final bracket.
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
    pub outcome_lo: Transition,
    pub outcome_hi: Transition,
    pub probes: Vec<Probe>,
    pub audit: Option<MonotoneAudit>,
    pub warnings: Vec<String>,
}

fn probe(mp: &ModelParams, theta: f64, s4: f64, s5: f64, eta_max: f64) -> Result<Probe> {
    let spec = RunSpec::new(*mp, theta, s4, s5).with_eta_max(eta_max);
    let (_, tr) = run::shoot(&spec)?;
    let t = regions::watch_transitions(&tr, mp)?;
    Ok(Probe {
        value: s4,
        outcome: t.outcome,
        eta_exit: t.eta_exit,
    })
}

fn is_c(p: &Probe) -> bool {
    p.outcome == Transition::EntersC
}

/// Bisects `s4` on the boundary between entering C and not entering C.
fn s4_threshold(
    mp: &ModelParams,
    theta: f64,
    s5: f64,
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<ThresholdResult> {
    let (lo0, hi0) = bracket;
    if !(lo0 >= 0.0 && hi0 > lo0 && hi0.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "bracket must satisfy 0 <= lo < hi, got ({lo0}, {hi0})"
        )));
    }
    let eval = |s4: f64| probe(mp, theta, s4, s5, opts.eta_max);
    let (p_lo, p_hi) = rayon::join(|| eval(lo0), || eval(hi0));
    let (p_lo, p_hi) = (p_lo?, p_hi?);
    let mut probes = vec![p_lo, p_hi];
    let mut warnings = Vec::new();

    if is_c(&p_hi) {
        return Err(Error::Bracket {
            lo: p_lo.outcome.name().into(),
            hi: p_hi.outcome.name().into(),
        });
    }
    if !is_c(&p_lo) {
        warnings.push(format!(
            "outcome at lo = {lo0} is already {}; threshold reported as lo",
            p_lo.outcome.name()
        ));
        return Ok(ThresholdResult {
            value: lo0,
            lo: lo0,
            hi: lo0,
            width: 0.0,
            outcome_lo: p_lo.outcome,
            outcome_hi: p_lo.outcome,
            probes,
            audit: None,
            warnings,
        });
    }

    let (mut lo, mut hi) = (lo0, hi0);
    let (mut out_lo, mut out_hi) = (p_lo.outcome, p_hi.outcome);
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = eval(mid)?;
        probes.push(p);
        if is_c(&p) {
            lo = mid;
            out_lo = p.outcome;
        } else {
            hi = mid;
            out_hi = p.outcome;
        }
    }

    let audit = if opts.audit {
        let pts: Vec<f64> = (1..=AUDIT_PROBES)
            .map(|j| lo0 + (hi0 - lo0) * j as f64 / (AUDIT_PROBES + 1) as f64)
            .collect();
        let aps: Vec<Probe> = pts.par_iter().map(|&s| eval(s)).collect::<Result<_>>()?;
        let non_monotone = aps
            .iter()
            .any(|p| (p.value <= lo && !is_c(p)) || (p.value >= hi && is_c(p)));
        if non_monotone {
            warnings.push(
                "outcome is not monotone in s4 over the bracket; value is the threshold found by bisection, not a certified infimum"
                    .into(),
            );
        }
        Some(MonotoneAudit {
            probes: aps,
            non_monotone,
        })
    } else {
        None
    };

    Ok(ThresholdResult {
        value: 0.5 * (lo + hi),
        lo,
        hi,
        width: hi - lo,
        outcome_lo: out_lo,
        outcome_hi: out_hi,
        probes,
        audit,
        warnings,
    })
}

/// Estimate of `alpha` for the steady model `mp` at angle `theta`.
pub fn find_alpha(
    mp: &ModelParams,
    theta: f64,
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<ThresholdResult> {
    if mp.k() < 3 {
        return Err(Error::InvalidParams(format!(
            "alpha search needs k >= 3, got k = {}",
            mp.k()
        )));
    }
    if !(theta > 0.0 && theta <= std::f64::consts::PI) {
        return Err(Error::InvalidParams(format!(
            "alpha search needs theta in (0, pi], got {theta}"
        )));
    }
    s4_threshold(&mp.with_epsilon(0)?, theta, 0.0, bracket, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaResult {
    pub beta_hat: f64,
    pub per_s5: Vec<(f64, ThresholdResult)>,
    pub warnings: Vec<String>,
}

/// Default `s5` grid: 8 log-spaced points in `[1e-2, 1e2]`.
pub fn default_s5_grid() -> Vec<f64> {
    (0..8)
        .map(|j| 10f64.powf(-2.0 + 4.0 * j as f64 / 7.0))
        .collect()
}

/// Outer estimate of `beta`: the largest expanding threshold over `s5_grid`.
pub fn find_beta(
    mp: &ModelParams,
    theta: f64,
    s5_grid: &[f64],
    bracket: (f64, f64),
    opts: &SearchOptions,
) -> Result<BetaResult> {
    if s5_grid.is_empty() || s5_grid.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::InvalidParams(
            "s5 grid must be nonempty and positive".into(),
        ));
    }
    if mp.k() <= 2 {
        return Ok(BetaResult {
            beta_hat: 0.0,
            per_s5: Vec::new(),
            warnings: vec![format!(
                "k = {} never reaches C; beta is 0 without bisection",
                mp.k()
            )],
        });
    }
    let mp1 = mp.with_epsilon(1)?;
    let per_s5: Vec<(f64, ThresholdResult)> = s5_grid
        .par_iter()
        .map(|&s5| s4_threshold(&mp1, theta, s5, bracket, opts).map(|r| (s5, r)))
        .collect::<Result<_>>()?;
    let beta_hat = per_s5.iter().map(|(_, r)| r.value).fold(0.0, f64::max);
    let warnings = per_s5
        .iter()
        .flat_map(|(s5, r)| r.warnings.iter().map(move |w| format!("s5 = {s5}: {w}")))
        .collect();
    Ok(BetaResult {
        beta_hat,
        per_s5,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThetaStarResult {
    pub theta_star: f64,
    pub lo: f64,
    pub hi: f64,
    /// Whether a probe stayed in B up to the horizon.
    pub stays_in_b: bool,
    pub probes: Vec<Probe>,
}

/// Angle between entering A (at 0) and entering C (at pi) for the
/// Ricci-flat run `xi(k, theta, 0, 0)`.
pub fn find_theta_star(mp: &ModelParams, opts: &SearchOptions) -> Result<ThetaStarResult> {
    let k = mp.k();
    if k < 3 || k > 2 * mp.m() + 1 {
        return Err(Error::InvalidParams(format!(
            "theta* needs 3 <= k <= 2m + 1, got m = {}, k = {k}",
            mp.m()
        )));
    }
    let mp0 = mp.with_epsilon(0)?;
    let eval = |theta: f64| -> Result<Probe> {
        let mut p = probe(&mp0, theta, 0.0, 0.0, opts.eta_max)?;
        p.value = theta;
        Ok(p)
    };
    let (mut lo, mut hi) = (0.0, std::f64::consts::PI);
    let (p_lo, p_hi) = (eval(lo)?, eval(hi)?);
    let mut probes = vec![p_lo, p_hi];
    if p_lo.outcome != Transition::EntersA || p_hi.outcome != Transition::EntersC {
        return Err(Error::Bracket {
            lo: p_lo.outcome.name().into(),
            hi: p_hi.outcome.name().into(),
        });
    }
    while hi - lo > opts.tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let p = eval(mid)?;
        probes.push(p);
        match p.outcome {
            Transition::EntersA => lo = mid,
            Transition::EntersC => hi = mid,
            Transition::StaysInB => {
                return Ok(ThetaStarResult {
                    theta_star: mid,
                    lo,
                    hi,
                    stays_in_b: true,
                    probes,
                })
            }
        }
    }
    Ok(ThetaStarResult {
        theta_star: 0.5 * (lo + hi),
        lo,
        hi,
        stays_in_b: false,
        probes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasNode {
    pub theta: f64,
    pub s4: f64,
    pub s5: f64,
    pub classification: Option<Classification>,
    pub error: Option<String>,
}

impl AtlasNode {
    pub fn label(&self) -> Option<AsymptoticLabel> {
        self.classification.as_ref().map(|c| c.label)
    }
}

/// Classifies every node of the grid; failures are recorded per node.
pub fn atlas(
    mp: &ModelParams,
    theta_grid: &[f64],
    s4_grid: &[f64],
    s5_grid: &[f64],
    eta_max: Option<f64>,
) -> Vec<AtlasNode> {
    let nodes: Vec<(f64, f64, f64)> = theta_grid
        .iter()
        .flat_map(|&t| {
            s4_grid
                .iter()
                .flat_map(move |&a| s5_grid.iter().map(move |&b| (t, a, b)))
        })
        .collect();
    nodes
        .par_iter()
        .map(|&(theta, s4, s5)| {
            let mut spec = RunSpec::new(*mp, theta, s4, s5);
            if let Some(e) = eta_max {
                spec.cfg.eta_max = e;
            }
            match run::run(&spec) {
                Ok(r) => AtlasNode {
                    theta,
                    s4,
                    s5,
                    classification: Some(r.classification),
                    error: None,
                },
                Err(e) => AtlasNode {
                    theta,
                    s4,
                    s5,
                    classification: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}
