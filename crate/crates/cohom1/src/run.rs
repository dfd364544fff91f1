//! One shooting run end to end: series seed, integration with the exit
//! watchers, transition and classification.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::classify::{self, Classification};
use crate::error::{Error, Result};
use crate::integrate::{self, DriftReport, IntegratorConfig, Start, StopRule, Trajectory, Watcher};
use crate::phase::{ModelParams, PhasePoint};
use crate::regions::{self, TransitionReport};
use crate::seed::{self, ShootParams, UnstableSeries};

/// How long a run continues after it has crossed into C.
pub const C_GRACE: f64 = 2.0;
/// Einstein drift budget for `s4 = 0` runs.
pub const EINSTEIN_DRIFT_BUDGET: f64 = 1e-9;
/// Horizon for expanding runs with `s4, s5 > 0`; `Q -> -1` only algebraically.
pub const EXPANDING_AC_HORIZON: f64 = 1e4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSpec {
    pub mp: ModelParams,
    pub theta: f64,
    pub s4: f64,
    pub s5: f64,
    /// Seeding depth; the series picks one when absent.
    pub eta0: Option<f64>,
    pub cfg: IntegratorConfig,
}

impl RunSpec {
    /// Run with the default configuration for these parameters.
    pub fn new(mp: ModelParams, theta: f64, s4: f64, s5: f64) -> Self {
        let cfg = default_config(&mp, s4, s5);
        Self {
            mp,
            theta,
            s4,
            s5,
            eta0: None,
            cfg,
        }
    }

    pub fn with_eta_max(mut self, eta_max: f64) -> Self {
        self.cfg.eta_max = eta_max;
        self
    }

    pub fn shoot_params(&self, eta0: f64) -> ShootParams {
        ShootParams::new(self.theta, self.s4, self.s5, eta0)
    }
}

pub fn default_config(mp: &ModelParams, s4: f64, s5: f64) -> IntegratorConfig {
    let mut cfg = IntegratorConfig::default();
    if s4 == 0.0 {
        cfg.drift_budget = Some(EINSTEIN_DRIFT_BUDGET);
    }
    if mp.epsilon() == 1 && s4 > 0.0 && s5 > 0.0 {
        cfg.eta_max = EXPANDING_AC_HORIZON;
    }
    cfg
}

/// Exit watchers; a falling `1 - Z1` with `X1 > X2` ends the run after
/// [`C_GRACE`].
pub fn run_watchers() -> Vec<Watcher> {
    let mut w = regions::standard_watchers();
    w[0] = w[0].clone().stopping(StopRule {
        falling_only: true,
        guard: Some(Arc::new(|p: &PhasePoint| p.x1 > p.x2)),
        grace: C_GRACE,
    });
    w
}

/// Seed from the unstable series at `eta0` (or its default depth).
pub fn seed_start(mp: &ModelParams, sp: &ShootParams, eta0: Option<f64>) -> Result<Start> {
    match eta0 {
        None => Ok(seed::build_seed_series(mp, sp)?.into()),
        Some(eta) => {
            let s = UnstableSeries::new(mp, sp, seed::DEFAULT_SERIES_ORDER)?;
            if eta > s.safe_depth(seed::DEFAULT_SERIES_LEVEL) + 1e-12 {
                let deepest = s.safe_depth(seed::DEFAULT_SERIES_LEVEL);
                return Err(Error::Domain(format!(
                    "eta0 = {eta} is too shallow for the seed series (use eta0 <= {deepest:.4})"
                )));
            }
            Ok(Start {
                eta,
                point: s.point(eta),
                gauge: Some([s.ln_wtilde(eta), s.t(eta), s.f(eta)]),
            })
        }
    }
}

pub fn shoot(spec: &RunSpec) -> Result<(ShootParams, Trajectory)> {
    let probe = spec.shoot_params(0.0);
    let start = seed_start(&spec.mp, &probe, spec.eta0)?;
    let sp = spec.shoot_params(start.eta);
    let tr = integrate::integrate(start, &spec.mp, &spec.cfg, &run_watchers());
    Ok((sp, tr))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub spec: RunSpec,
    pub shoot: ShootParams,
    pub trajectory: Trajectory,
    pub transition: TransitionReport,
    pub classification: Classification,
    pub drift: DriftReport,
}

pub fn run(spec: &RunSpec) -> Result<RunReport> {
    let (sp, tr) = shoot(spec)?;
    let transition = regions::watch_transitions(&tr, &spec.mp)?;
    let classification = classify::classify(&tr, &spec.mp, &sp)?;
    let drift = integrate::monitor_drift(&tr, spec.s4 == 0.0);
    Ok(RunReport {
        spec: spec.clone(),
        shoot: sp,
        trajectory: tr,
        transition,
        classification,
        drift,
    })
}
