//! End-geometry labels for finished runs.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::catalog::{Catalog, CriticalId};
use crate::error::Result;
use crate::integrate::{Status, Trajectory};
use crate::phase::{self, ModelParams, PhasePoint};
use crate::regions::{self, Transition};
use crate::seed::ShootParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AsymptoticLabel {
    AC,
    ALC,
    AP,
    ACP,
    AH,
    Incomplete,
    Undetermined,
}

impl AsymptoticLabel {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AC => "AC",
            Self::ALC => "ALC",
            Self::AP => "AP",
            Self::ACP => "ACP",
            Self::AH => "AH",
            Self::Incomplete => "Incomplete",
            Self::Undetermined => "Undetermined",
        }
    }
}

impl fmt::Display for AsymptoticLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaseLabel {
    FubiniStudy,
    NonKahlerCP,
    StandardSphere,
    JensenSphere,
    NA,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Samples averaged for the limits of `Z1` and `sqrt(Z3/Z2)`.
    pub tail: usize,
    /// Allowed spread of those averages, and the match tolerance for `nu2`.
    pub tol: f64,
    /// Distance under which the last sample is attributed to a catalog point.
    pub limit_dist: f64,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            tail: 10,
            tol: 1e-2,
            limit_dist: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub outcome: Transition,
    pub eta_exit: Option<f64>,
    pub label: AsymptoticLabel,
    /// Limit of `Z1`.
    pub mu2: f64,
    /// Limit of `sqrt(Z3/Z2)`.
    pub nu2: f64,
    pub limit_point: Option<CriticalId>,
    pub limit_distance: f64,
    pub base_label: BaseLabel,
    /// `eta` of the last sample; `StaysInB` holds up to here only.
    pub eta_last: f64,
    pub q_last: f64,
    pub notes: Vec<String>,
}

fn tail_stats(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = values.collect();
    if v.is_empty() {
        return (f64::NAN, f64::INFINITY);
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, hi - lo)
}

pub fn nu_of(p: &PhasePoint) -> f64 {
    if p.z2 > 0.0 {
        (p.z3.max(0.0) / p.z2).sqrt()
    } else {
        f64::NAN
    }
}

pub fn classify(tr: &Trajectory, mp: &ModelParams, sp: &ShootParams) -> Result<Classification> {
    classify_with(tr, mp, sp, &ClassifyConfig::default())
}

pub fn classify_with(
    tr: &Trajectory,
    mp: &ModelParams,
    sp: &ShootParams,
    cfg: &ClassifyConfig,
) -> Result<Classification> {
    let mut notes = Vec::new();
    let tr_report = regions::watch_transitions(tr, mp)?;
    let outcome = tr_report.outcome;

    let n = tr.samples.len();
    let tail = &tr.samples[n.saturating_sub(cfg.tail.max(1))..];
    let (mu2, mu_spread) = tail_stats(tail.iter().map(|s| s.p.z1));
    let (nu2, nu_spread) = tail_stats(tail.iter().map(|s| nu_of(&s.p)));

    let last = tr.last();
    let catalog = Catalog::new(mp);
    let (limit_point, limit_distance) = match &tr.status {
        Status::ConvergedToCriticalPoint { id } => (Some(*id), 0.0),
        _ => {
            let loc = catalog.locate(&last.p);
            let id = (loc.distance <= cfg.limit_dist).then_some(loc.id);
            (id, loc.distance)
        }
    };

    let expanding = mp.epsilon() == 1 && sp.s5 > 0.0;
    let s4_pos = sp.s4 > 0.0;
    let mut label = match (outcome, expanding, s4_pos) {
        (Transition::EntersC, _, _) => AsymptoticLabel::Incomplete,
        (_, true, true) => AsymptoticLabel::AC,
        (_, true, false) => AsymptoticLabel::AH,
        (Transition::EntersA, false, true) => AsymptoticLabel::ACP,
        (Transition::StaysInB, false, true) => AsymptoticLabel::AP,
        (Transition::EntersA, false, false) => AsymptoticLabel::ALC,
        (Transition::StaysInB, false, false) => AsymptoticLabel::AC,
    };
    if mp.epsilon() == 1 && sp.s5 == 0.0 {
        notes.push("epsilon = 1 with s5 = 0 keeps W = 0; classified as steady".into());
    }

    if label != AsymptoticLabel::Incomplete {
        match &tr.status {
            Status::NumericalFailure { reason } | Status::LeftRs { reason } => {
                notes.push(format!("run ended early: {reason}"));
                label = AsymptoticLabel::Undetermined;
            }
            _ => {}
        }
        if nu_spread.is_finite() && nu_spread > cfg.tol {
            notes.push(format!("sqrt(Z3/Z2) not settled: spread {nu_spread:.3e}"));
            label = AsymptoticLabel::Undetermined;
        }
        if mu_spread > cfg.tol {
            notes.push(format!("Z1 not settled: spread {mu_spread:.3e}"));
            label = AsymptoticLabel::Undetermined;
        }
    }
    if outcome == Transition::StaysInB {
        notes.push(format!("StaysInB({:.6})", last.eta));
    }

    let base_label = base_label(outcome, label, nu2, sp.theta, mp, cfg.tol);
    let q_last = phase::derived_scalars(&last.p, mp).q;
    Ok(Classification {
        outcome,
        eta_exit: tr_report.eta_exit,
        label,
        mu2,
        nu2,
        limit_point,
        limit_distance,
        base_label,
        eta_last: last.eta,
        q_last,
        notes,
    })
}

fn base_label(
    outcome: Transition,
    label: AsymptoticLabel,
    nu2: f64,
    theta: f64,
    mp: &ModelParams,
    tol: f64,
) -> BaseLabel {
    match (outcome, label) {
        (Transition::EntersA, AsymptoticLabel::ALC | AsymptoticLabel::ACP) => {
            if theta == 0.0 {
                BaseLabel::FubiniStudy
            } else if theta < PI {
                BaseLabel::NonKahlerCP
            } else {
                BaseLabel::NA
            }
        }
        (Transition::StaysInB, AsymptoticLabel::AC | AsymptoticLabel::AP) => {
            let jensen = 1.0 / (2.0 * mp.mf() + 3.0);
            if (nu2 - 1.0).abs() <= tol {
                BaseLabel::StandardSphere
            } else if (nu2 - jensen).abs() <= tol {
                BaseLabel::JensenSphere
            } else {
                BaseLabel::NA
            }
        }
        _ => BaseLabel::NA,
    }
}
