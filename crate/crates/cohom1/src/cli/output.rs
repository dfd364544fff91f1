//! Trajectory CSV, run summaries and replay.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::asymptotics::catalog::CriticalId;
use crate::asymptotics::classify::Classification;
use crate::asymptotics::profile::{self, MetricProfile};
use crate::error::{Error, Result};
use crate::integrate::{
    Crossing, DriftReport, Event, IntegratorConfig, Sample, Status, Trajectory,
};
use crate::phase::{self, ModelParams, PhasePoint};
use crate::regions::{self, TransitionReport, WATCH_X, WATCH_Z1};
use crate::run::RunReport;
use crate::seed::ShootParams;

pub const CSV_HEADER: &str = "eta,X1,X2,X3,Z1,Z2,Z3,Z4,W,G,H,Q,inF,inA,inB,inC,t,a,b,c,f";

/// Membership band for the region columns.
pub const REGION_TOL: f64 = 2e-10;

/// 17 significant digits.
pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        String::new()
    }
}

pub fn trajectory_csv(tr: &Trajectory, profile: Option<&MetricProfile>) -> String {
    let mp = tr.mp;
    let mut out = String::with_capacity(tr.samples.len() * 400);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, s) in tr.samples.iter().enumerate() {
        let d = phase::derived_scalars(&s.p, &mp);
        let r = regions::region_of(&s.p, &mp, REGION_TOL);
        let mut fields: Vec<String> = Vec::with_capacity(21);
        fields.push(fmt17(s.eta));
        fields.extend(s.p.to_array().iter().map(|v| fmt17(*v)));
        fields.extend([d.g, d.h, d.q].iter().map(|v| fmt17(*v)));
        for b in [r.in_f, r.in_a, r.in_b, r.in_c] {
            fields.push(if b { "1" } else { "0" }.into());
        }
        match profile.and_then(|p| p.rows.get(i)) {
            Some(row) => fields.extend(
                [row.t, row.a, row.b, row.c, row.f]
                    .iter()
                    .map(|v| fmt17(*v)),
            ),
            None => fields.extend(std::iter::repeat_n(String::new(), 5)),
        }
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub eta: f64,
    pub p: PhasePoint,
    pub t: Option<f64>,
    pub b: Option<f64>,
    pub f: Option<f64>,
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header.trim() != CSV_HEADER {
        return Err(Error::Domain(format!("unexpected CSV header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 21 {
            return Err(Error::Domain(format!(
                "CSV line {}: expected 21 fields, got {}",
                i + 2,
                cols.len()
            )));
        }
        let num = |j: usize| -> Result<f64> {
            cols[j]
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("CSV line {}: bad number `{}`", i + 2, cols[j])))
        };
        let opt = |j: usize| -> Result<Option<f64>> {
            if cols[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        let mut a = [0.0; 8];
        for (k, v) in a.iter_mut().enumerate() {
            *v = num(1 + k)?;
        }
        rows.push(CsvRow {
            eta: num(0)?,
            p: PhasePoint::from_array(a),
            t: opt(16)?,
            b: opt(18)?,
            f: opt(20)?,
        });
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub limit_point: Option<CriticalId>,
    pub m: u32,
    pub k: u32,
    pub epsilon: u8,
    pub theta: f64,
    pub s4: f64,
    pub s5: f64,
    pub shoot: ShootParams,
    pub integrator: IntegratorConfig,
    pub status: Status,
    pub pinned_at: Option<f64>,
    pub transition: TransitionReport,
    pub classification: Classification,
    pub drift: DriftReport,
    pub events: Vec<Event>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub samples: usize,
}

impl RunSummary {
    pub fn from_report(r: &RunReport) -> Self {
        let mp = r.spec.mp;
        Self {
            label: r.classification.label.name().to_string(),
            limit_point: r.classification.limit_point,
            m: mp.m(),
            k: mp.k(),
            epsilon: mp.epsilon(),
            theta: r.spec.theta,
            s4: r.spec.s4,
            s5: r.spec.s5,
            shoot: r.shoot,
            integrator: r.spec.cfg,
            status: r.trajectory.status.clone(),
            pinned_at: r.trajectory.pinned_at,
            transition: r.transition,
            classification: r.classification.clone(),
            drift: r.drift,
            events: r.trajectory.events.clone(),
            accepted_steps: r.trajectory.accepted_steps,
            rejected_steps: r.trajectory.rejected_steps,
            samples: r.trajectory.samples.len(),
        }
    }

    pub fn model(&self) -> Result<ModelParams> {
        ModelParams::new(self.m, self.k, self.epsilon)
    }
}

/// Rebuilds a trajectory from CSV rows. Exit events are recovered from sign
/// changes of `1 - Z1` and `X1 - X2` between rows, by linear interpolation.
pub fn trajectory_from_rows(rows: &[CsvRow], summary: &RunSummary) -> Result<Trajectory> {
    let mp = summary.model()?;
    if rows.is_empty() {
        return Err(Error::Domain("empty trajectory".into()));
    }
    let gauge_valid = rows.iter().all(|r| r.t.is_some() && r.b.is_some());
    let samples: Vec<Sample> = rows
        .iter()
        .map(|r| {
            let ln_wtilde = match r.b {
                Some(b) if gauge_valid => (b * b * r.p.z2).ln(),
                _ => 0.0,
            };
            Sample {
                eta: r.eta,
                p: r.p,
                ln_wtilde,
                t: r.t.unwrap_or(0.0),
                f: r.f.unwrap_or(0.0),
            }
        })
        .collect();

    let mut events = Vec::new();
    let funcs: [(&str, fn(&PhasePoint) -> f64); 2] =
        [(WATCH_Z1, |p| 1.0 - p.z1), (WATCH_X, |p| p.x1 - p.x2)];
    for w in rows.windows(2) {
        for (name, f) in funcs {
            let (va, vb) = (f(&w[0].p), f(&w[1].p));
            if va != 0.0 && (vb == 0.0 || va.signum() != vb.signum()) {
                let s = va / (va - vb);
                let pa = w[0].p.to_array();
                let pb = w[1].p.to_array();
                let point =
                    PhasePoint::from_array(std::array::from_fn(|i| pa[i] + s * (pb[i] - pa[i])));
                events.push(Event {
                    eta: w[0].eta + s * (w[1].eta - w[0].eta),
                    watcher: name.to_string(),
                    crossing: if va > 0.0 {
                        Crossing::Falling
                    } else {
                        Crossing::Rising
                    },
                    point,
                });
            }
        }
    }
    events.sort_by(|a, b| a.eta.total_cmp(&b.eta));
    Ok(Trajectory {
        mp,
        samples,
        events,
        status: summary.status.clone(),
        gauge_valid,
        pinned_at: summary.pinned_at,
        accepted_steps: summary.accepted_steps,
        rejected_steps: summary.rejected_steps,
        evaluations: 0,
    })
}

/// Classification of a replayed run, for comparison with its summary.
pub fn replay(csv: &str, summary: &RunSummary) -> Result<Classification> {
    let rows = parse_trajectory_csv(csv)?;
    let tr = trajectory_from_rows(&rows, summary)?;
    let mp = summary.model()?;
    crate::asymptotics::classify::classify(&tr, &mp, &summary.shoot)
}

pub fn profile_for(tr: &Trajectory) -> Option<MetricProfile> {
    profile::reconstruct(tr, &tr.mp).ok()
}
