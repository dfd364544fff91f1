//! The invariant suite behind `cohom1 verify`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::catalog::{catalog_audit, CriticalId};
use crate::integrate::Status;
use crate::phase::{self, ModelParams, PhasePoint};
use crate::regions::{self, Stratum, AUDIT_FLOOR};
use crate::run::{self, RunSpec};

pub const DEFAULT_AUDIT_SEED: u64 = 0x00C0_401E;
pub const CATALOG_TOL: f64 = 1e-12;
pub const CONSTRAINT_LIMIT: f64 = 1e-9;
pub const EINSTEIN_LIMIT: f64 = 1e-8;
pub const Q_FLOW_LIMIT: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

fn mp(m: u32, k: u32, e: u8) -> ModelParams {
    ModelParams::new(m, k, e).expect("valid literal parameters")
}

/// Twenty runs covering the steady, expanding and Ricci-flat regimes.
pub fn regression_set() -> Vec<(String, RunSpec)> {
    let list: [(u32, u32, u8, f64, f64, f64); 20] = [
        (1, 1, 0, FRAC_PI_2, 0.0, 0.0),
        (1, 1, 0, FRAC_PI_2, 1.0, 0.0),
        (1, 1, 1, FRAC_PI_2, 0.0, 1.0),
        (1, 1, 1, FRAC_PI_2, 1.0, 1.0),
        (1, 2, 0, FRAC_PI_4, 0.0, 0.0),
        (1, 2, 1, FRAC_PI_4, 0.5, 0.5),
        (1, 1, 0, 0.0, 0.0, 0.0),
        (1, 2, 0, 0.0, 0.0, 0.0),
        (1, 3, 0, 0.0, 0.0, 0.0),
        (1, 4, 0, 0.0, 0.0, 0.0),
        (1, 5, 0, 0.0, 0.0, 0.0),
        (1, 1, 0, PI, 0.0, 0.0),
        (1, 2, 0, PI, 0.0, 0.0),
        (1, 3, 0, PI, 0.0, 0.0),
        (1, 4, 0, 0.0, 2.0, 0.0),
        (1, 5, 0, FRAC_PI_2, 100.0, 0.0),
        (2, 3, 0, FRAC_PI_2, 0.0, 0.0),
        (2, 1, 1, 1.0, 0.0, 2.0),
        (0, 3, 0, PI, 20.0, 0.0),
        (3, 2, 1, 2.0, 1.0, 0.1),
    ];
    list.iter()
        .map(|&(m, k, e, th, s4, s5)| {
            let name = format!("xi(m={m},k={k},eps={e},theta={th:.4},s4={s4},s5={s5})");
            (name, RunSpec::new(mp(m, k, e), th, s4, s5))
        })
        .collect()
}

pub fn catalog_checks(ms: &[u32]) -> Vec<Check> {
    let mut out = Vec::new();
    for &m in ms {
        for e in [0u8, 1] {
            let entries = catalog_audit(&mp(m, 1, e));
            let worst = entries
                .iter()
                .map(|c| match c.id {
                    CriticalId::Origin => c.v_inf.max((c.q + 1.0).abs()),
                    _ => c.v_inf.max(c.q.abs()),
                })
                .fold(0.0, f64::max);
            let ok = entries.iter().all(|c| c.passes(CATALOG_TOL));
            out.push(Check::new(
                format!("catalog m={m} eps={e}"),
                ok,
                format!("{} points, worst residual {worst:.2e}", entries.len()),
            ));
        }
    }
    out
}

pub fn audit_checks(ms: &[u32], n: usize, seed: u64) -> Vec<Check> {
    let mut out = Vec::new();
    for &m in ms {
        for e in [0u8, 1] {
            let r = regions::boundary_sign_audit(&mp(m, 1, e), n, seed);
            for s in &r.strata {
                let required = Stratum::REQUIRED.contains(&s.stratum);
                let ok = !required || (s.accepted > 0 && s.min >= AUDIT_FLOOR);
                let tag = if required { "" } else { " (informational)" };
                out.push(Check::new(
                    format!("boundary m={m} eps={e} {:?}{tag}", s.stratum),
                    ok,
                    format!("min {:.3e} over {} samples", s.min, s.accepted),
                ));
            }
        }
    }
    out
}

/// `q_flow_consistency` at random points of the physical set: a random
/// direction is shrunk towards the origin until it lies in RS.
pub fn q_flow_check(n: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n {
        let m = rng.gen_range(0..4u32);
        let e = rng.gen_range(0..2u8);
        let model = mp(m, 1, e);
        let mut a = [0.0f64; 8];
        for v in a.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        for v in a[3..].iter_mut() {
            *v = v.abs();
        }
        if e == 0 {
            a[7] = 0.0;
        }
        a[6] = (a[4] * a[5]).sqrt();
        let mut scale: f64 = rng.gen_range(0.0..1.0);
        let p = loop {
            let p = PhasePoint::from_array(a.map(|v| v * scale));
            if phase::in_rs(&p, &model, 1e-12) {
                break p;
            }
            scale *= 0.5;
        };
        worst = worst.max(phase::q_flow_consistency(&p, &model).abs());
    }
    Check::new(
        "q flow consistency",
        worst < Q_FLOW_LIMIT,
        format!("max {worst:.2e} over {n} points"),
    )
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegressionRow {
    pub name: String,
    pub label: Option<String>,
    pub status: Option<Status>,
    pub max_constraint_residual: f64,
    pub max_einstein_drift: Option<f64>,
    pub error: Option<String>,
}

pub fn regression_rows() -> Vec<RegressionRow> {
    regression_set()
        .par_iter()
        .map(|(name, spec)| match run::run(spec) {
            Ok(r) => RegressionRow {
                name: name.clone(),
                label: Some(r.classification.label.name().into()),
                status: Some(r.trajectory.status.clone()),
                max_constraint_residual: r.drift.max_constraint_residual,
                max_einstein_drift: r.drift.max_einstein_drift,
                error: None,
            },
            Err(e) => RegressionRow {
                name: name.clone(),
                label: None,
                status: None,
                max_constraint_residual: f64::NAN,
                max_einstein_drift: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

pub fn drift_checks(rows: &[RegressionRow]) -> Vec<Check> {
    rows.iter()
        .map(|r| {
            let failed = matches!(r.status, Some(Status::NumericalFailure { .. }));
            let ok = r.error.is_none()
                && !failed
                && r.max_constraint_residual < CONSTRAINT_LIMIT
                && r.max_einstein_drift.map_or(true, |d| d < EINSTEIN_LIMIT);
            let detail = match &r.error {
                Some(e) => e.clone(),
                None => format!(
                    "{} residual {:.2e}{}",
                    r.label.as_deref().unwrap_or("?"),
                    r.max_constraint_residual,
                    r.max_einstein_drift
                        .map(|d| format!(", Einstein drift {d:.2e}"))
                        .unwrap_or_default()
                ),
            };
            Check::new(format!("drift {}", r.name), ok, detail)
        })
        .collect()
}

/// Full suite with the given audit sample count and seed.
pub fn full_suite(samples: usize, seed: u64) -> Vec<Check> {
    let mut out = catalog_checks(&[0, 1, 2, 3]);
    out.extend(audit_checks(&[1, 2], samples, seed));
    out.push(q_flow_check(10_000, seed));
    out.extend(drift_checks(&regression_rows()));
    out
}
