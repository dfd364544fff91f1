//! Adaptive integration of the phase flow with event location and
//! invariant monitoring.
//!
//! Alongside the eight phase coordinates the integrator carries three
//! quadratures used by the metric reconstruction: `ln W~` (with
//! `W~' = 2 W~ (G - eps W / 2)`), `t` (with `t' = sqrt(W~)`) and `f` (with
//! `f' = H - 1`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::asymptotics::catalog::{Catalog, CriticalId};
use crate::ode::{DenseStep, Dop853, Tolerances};
use crate::phase::{self, DerivedScalars, ModelParams, PhasePoint};
use crate::seed::SeriesSeed;

const DIM: usize = 11;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRule {
    /// Sup-norm distance to the catalog point.
    pub dist: f64,
    /// Sup-norm of the vector field.
    pub speed: f64,
    /// Consecutive accepted steps satisfying both.
    pub steps: usize,
}

impl Default for ConvergenceRule {
    fn default() -> Self {
        Self {
            dist: 1e-6,
            speed: 1e-8,
            steps: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub eta_max: f64,
    pub max_steps: usize,
    pub event_tol: f64,
    pub constraint_tol: f64,
    pub h_max: f64,
    /// Reset `Z4 <- sqrt(Z2 Z3)` after every accepted step.
    pub renormalize_constraint: bool,
    pub convergence: Option<ConvergenceRule>,
    /// Stop once `max(|Q|, |H - 1|)` exceeds this (for Einstein seeds).
    pub drift_budget: Option<f64>,
    /// Snap onto `{Z1 = 1, X1 = X2}` once within this distance of it.
    pub round_pin: Option<f64>,
    /// Phase coordinates beyond this magnitude count as blow-up.
    pub blowup: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-13,
            atol: 1e-15,
            eta_max: 60.0,
            max_steps: 2_000_000,
            event_tol: 1e-10,
            constraint_tol: 1e-9,
            h_max: 1.0,
            renormalize_constraint: false,
            convergence: Some(ConvergenceRule::default()),
            drift_budget: None,
            round_pin: Some(1e-9),
            blowup: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Crossing {
    Falling,
    Rising,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub eta: f64,
    pub watcher: String,
    pub crossing: Crossing,
    pub point: PhasePoint,
}

pub type ScalarFn = Arc<dyn Fn(&PhasePoint) -> f64 + Send + Sync>;
pub type GuardFn = Arc<dyn Fn(&PhasePoint) -> bool + Send + Sync>;

/// Ends the integration `grace` units of `eta` after a qualifying crossing.
#[derive(Clone)]
pub struct StopRule {
    pub falling_only: bool,
    pub guard: Option<GuardFn>,
    pub grace: f64,
}

/// A scalar function whose sign changes are located and recorded.
#[derive(Clone)]
pub struct Watcher {
    pub name: String,
    pub func: ScalarFn,
    pub stop: Option<StopRule>,
}

impl Watcher {
    pub fn new(name: &str, func: impl Fn(&PhasePoint) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.to_string(),
            func: Arc::new(func),
            stop: None,
        }
    }

    pub fn stopping(mut self, rule: StopRule) -> Self {
        self.stop = Some(rule);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    ReachedHorizon,
    ConvergedToCriticalPoint {
        id: CriticalId,
    },
    LeftRs {
        reason: String,
    },
    NumericalFailure {
        reason: String,
    },
    /// Einstein drift budget exhausted.
    DriftLimit,
    /// A watcher's stop rule fired.
    Stopped {
        watcher: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub eta: f64,
    pub p: PhasePoint,
    pub ln_wtilde: f64,
    pub t: f64,
    pub f: f64,
}

impl Sample {
    fn from_state(eta: f64, y: &[f64; DIM]) -> Self {
        Self {
            eta,
            p: PhasePoint::from_array(std::array::from_fn(|i| y[i])),
            ln_wtilde: y[8],
            t: y[9],
            f: y[10],
        }
    }

    fn state(&self) -> [f64; DIM] {
        let a = self.p.to_array();
        std::array::from_fn(|i| match i {
            0..=7 => a[i],
            8 => self.ln_wtilde,
            9 => self.t,
            _ => self.f,
        })
    }

    pub fn scalars(&self, mp: &ModelParams) -> DerivedScalars {
        phase::derived_scalars(&self.p, mp)
    }

    pub fn wtilde(&self) -> f64 {
        self.ln_wtilde.exp()
    }
}

/// Initial data for [`integrate`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Start {
    pub eta: f64,
    pub point: PhasePoint,
    /// `(ln W~, t, f)` at `eta`, when the metric gauge is known.
    pub gauge: Option<[f64; 3]>,
}

impl Start {
    pub fn at(eta: f64, point: PhasePoint) -> Self {
        Self {
            eta,
            point,
            gauge: None,
        }
    }
}

impl From<SeriesSeed> for Start {
    fn from(s: SeriesSeed) -> Self {
        Self {
            eta: s.eta,
            point: s.point,
            gauge: Some([s.ln_wtilde, s.t, s.f]),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub mp: ModelParams,
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub status: Status,
    /// Whether the `(ln W~, t, f)` columns carry a meaningful gauge.
    pub gauge_valid: bool,
    /// First `eta` at which the round-set projection engaged.
    pub pinned_at: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub evaluations: usize,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least the seed sample")
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn events_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Event> + 'a {
        self.events.iter().filter(move |e| e.watcher == name)
    }
}

fn field(mp: ModelParams) -> impl Fn(&[f64; DIM]) -> [f64; DIM] {
    move |y: &[f64; DIM]| {
        let p = PhasePoint::from_array(std::array::from_fn(|i| y[i]));
        let v = phase::vector_field(&p, &mp).to_array();
        let s = phase::derived_scalars(&p, &mp);
        let g = s.g - 0.5 * mp.eps() * p.w;
        std::array::from_fn(|i| match i {
            0..=7 => v[i],
            8 => 2.0 * g,
            9 => (0.5 * y[8]).exp(),
            _ => s.h - 1.0,
        })
    }
}

fn phase_of(y: &[f64; DIM]) -> PhasePoint {
    PhasePoint::from_array(std::array::from_fn(|i| y[i]))
}

/// Smallest `s` in the step where `func` changes sign, located by bisection.
fn locate_crossing(
    step: &DenseStep<DIM>,
    func: &ScalarFn,
    v_start: f64,
    event_tol: f64,
) -> Option<(f64, Crossing)> {
    const PROBES: usize = 4;
    let mut a = step.t0;
    let mut va = v_start;
    for j in 1..=PROBES {
        let b = if j == PROBES {
            step.t1()
        } else {
            step.t0 + step.h * j as f64 / PROBES as f64
        };
        let yb = if j == PROBES { step.y1 } else { step.eval(b) };
        let vb = func(&phase_of(&yb));
        if va != 0.0 && (vb == 0.0 || va.signum() != vb.signum()) {
            let crossing = if va > 0.0 {
                Crossing::Falling
            } else {
                Crossing::Rising
            };
            let (mut lo, mut hi) = (a, b);
            let mut vlo = va;
            while hi - lo > event_tol {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let vm = func(&phase_of(&step.eval(mid)));
                if vm != 0.0 && vm.signum() == vlo.signum() {
                    lo = mid;
                    vlo = vm;
                } else {
                    hi = mid;
                }
            }
            return Some((hi, crossing));
        }
        a = b;
        va = vb;
    }
    None
}

fn rs_violation(p: &PhasePoint, mp: &ModelParams, tol: f64) -> Option<String> {
    let s = phase::derived_scalars(p, mp);
    let scale = 1.0f64.max((p.z2 * p.z3).abs());
    if s.q > tol {
        Some(format!("Q = {:.3e} > 0", s.q))
    } else if s.h > 1.0 + tol {
        Some(format!("H - 1 = {:.3e} > 0", s.h - 1.0))
    } else if p.w < -tol || p.z1 < -tol || p.z2 < -tol || p.z3 < -tol || p.z4 < -tol {
        Some("negative Z or W coordinate".to_string())
    } else if phase::constraint_residual(p).abs() > tol * scale {
        Some(format!(
            "constraint residual {:.3e}",
            phase::constraint_residual(p)
        ))
    } else {
        None
    }
}

/// Moves `p` onto the round set `{Z1 = 1, X1 = X2}` keeping `H` and `Q`.
///
/// `X3` absorbs the change of `Q`; with `m = 0` there is no `X3` and only
/// `H` is kept.
fn pin_round(p: &mut PhasePoint, mp: &ModelParams) {
    let before = phase::derived_scalars(p, mp);
    let x0 = (p.x1 + 2.0 * p.x2) / 3.0;
    p.x1 = x0;
    p.x2 = x0;
    p.z1 = 1.0;
    if mp.m() == 0 {
        return;
    }
    let fm = 4.0 * mp.mf();
    let after = phase::derived_scalars(p, mp);
    // 3x^2 + 4m X3^2 = G_t with 3x + 4m X3 = H
    let g_t = after.g + (before.q - after.q);
    let h = before.h;
    let a = 3.0 + 9.0 / fm;
    let b = -6.0 * h / fm;
    let c = h * h / fm - g_t;
    let disc = b * b - 4.0 * a * c;
    if !(disc >= 0.0) {
        return;
    }
    let r = disc.sqrt();
    let (r1, r2) = ((-b + r) / (2.0 * a), (-b - r) / (2.0 * a));
    let x = if (r1 - x0).abs() <= (r2 - x0).abs() {
        r1
    } else {
        r2
    };
    p.x1 = x;
    p.x2 = x;
    p.x3 = (h - 3.0 * x) / fm;
}

pub fn integrate(
    start: Start,
    mp: &ModelParams,
    cfg: &IntegratorConfig,
    watchers: &[Watcher],
) -> Trajectory {
    let mp = *mp;
    let gauge = start.gauge.unwrap_or([0.0, 0.0, 0.0]);
    let first = Sample {
        eta: start.eta,
        p: start.point,
        ln_wtilde: gauge[0],
        t: gauge[1],
        f: gauge[2],
    };
    let mut tr = Trajectory {
        mp,
        samples: vec![first],
        events: Vec::new(),
        status: Status::ReachedHorizon,
        gauge_valid: start.gauge.is_some(),
        pinned_at: None,
        accepted_steps: 0,
        rejected_steps: 0,
        evaluations: 0,
    };
    if !start.point.is_finite() {
        tr.status = Status::NumericalFailure {
            reason: "non-finite seed".into(),
        };
        return tr;
    }
    if !(cfg.eta_max > start.eta) {
        return tr;
    }
    let catalog = Catalog::new(&mp);
    let tol = Tolerances {
        rtol: cfg.rtol,
        atol: cfg.atol,
        h_max: cfg.h_max,
    };
    let mut stepper = Dop853::new(field(mp), start.eta, first.state(), tol);
    let mut values: Vec<f64> = watchers.iter().map(|w| (w.func)(&start.point)).collect();
    let mut horizon = cfg.eta_max;
    let mut stop_watcher: Option<String> = None;
    let mut near_count = 0usize;
    let rs_tol = 10.0 * cfg.constraint_tol;

    let status = loop {
        if stepper.t() >= horizon {
            break match stop_watcher.take() {
                Some(w) => Status::Stopped { watcher: w },
                None => Status::ReachedHorizon,
            };
        }
        if stepper.accepted >= cfg.max_steps {
            break Status::NumericalFailure {
                reason: format!("step limit {} reached", cfg.max_steps),
            };
        }
        let step = match stepper.step(horizon) {
            Ok(s) => s,
            Err(e) => {
                break Status::NumericalFailure {
                    reason: e.to_string(),
                }
            }
        };

        // events inside this step, in order of eta
        let mut found: Vec<(f64, usize, Crossing)> = Vec::new();
        let mut bad_watcher = None;
        for (i, w) in watchers.iter().enumerate() {
            if let Some((eta, c)) = locate_crossing(&step, &w.func, values[i], cfg.event_tol) {
                found.push((eta, i, c));
            }
            values[i] = (w.func)(&phase_of(&step.y1));
            if !values[i].is_finite() {
                bad_watcher = Some(w.name.clone());
            }
        }
        if let Some(name) = bad_watcher {
            break Status::NumericalFailure {
                reason: format!("watcher {name} is not finite"),
            };
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut truncate_at: Option<f64> = None;
        for (eta, i, crossing) in found {
            if truncate_at.is_some_and(|t| eta > t) {
                break;
            }
            let point = phase_of(&step.eval(eta));
            let w = &watchers[i];
            tr.events.push(Event {
                eta,
                watcher: w.name.clone(),
                crossing,
                point,
            });
            if let Some(rule) = &w.stop {
                let qualifies = (!rule.falling_only || crossing == Crossing::Falling)
                    && rule.guard.as_ref().is_none_or(|g| g(&point));
                if qualifies && stop_watcher.is_none() {
                    stop_watcher = Some(w.name.clone());
                    horizon = horizon.min(eta + rule.grace);
                    if rule.grace <= 0.0 {
                        truncate_at = Some(eta);
                    }
                }
            }
        }
        if let Some(eta) = truncate_at {
            tr.samples.push(Sample::from_state(eta, &step.eval(eta)));
            break Status::Stopped {
                watcher: stop_watcher.take().unwrap_or_default(),
            };
        }

        let mut y = step.y1;
        let mut p = phase_of(&y);
        let mut modified = false;
        if cfg.renormalize_constraint {
            p.z4 = p.z4.signum() * (p.z2 * p.z3).max(0.0).sqrt();
            modified = true;
        }
        if let Some(thr) = cfg.round_pin {
            let close = (1.0 - p.z1).abs().max((p.x1 - p.x2).abs()) <= thr;
            if close || tr.pinned_at.is_some() {
                if tr.pinned_at.is_none() {
                    tr.pinned_at = Some(step.t1());
                }
                pin_round(&mut p, &mp);
                modified = true;
            }
        }
        if modified {
            let a = p.to_array();
            y[..8].copy_from_slice(&a);
            stepper.reset_state(y);
        }
        tr.samples.push(Sample::from_state(step.t1(), &y));

        if !p.is_finite() || p.max_abs() > cfg.blowup {
            break Status::NumericalFailure {
                reason: format!("blow-up near eta = {:.6}", step.t1()),
            };
        }
        if let Some(reason) = rs_violation(&p, &mp, rs_tol) {
            break Status::LeftRs { reason };
        }
        if let Some(budget) = cfg.drift_budget {
            let s = phase::derived_scalars(&p, &mp);
            if s.q.abs().max((s.h - 1.0).abs()) > budget {
                break Status::DriftLimit;
            }
        }
        if let Some(rule) = cfg.convergence {
            let loc = catalog.locate(&p);
            let speed = phase::vector_field(&p, &mp).max_abs();
            if loc.distance <= rule.dist && speed <= rule.speed {
                near_count += 1;
                if near_count >= rule.steps {
                    break Status::ConvergedToCriticalPoint { id: loc.id };
                }
            } else {
                near_count = 0;
            }
        }
    };
    tr.status = status;
    tr.accepted_steps = stepper.accepted;
    tr.rejected_steps = stepper.rejected;
    tr.evaluations = stepper.evals;
    tr
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub max_constraint_residual: f64,
    pub max_q_flow_consistency: f64,
    /// `max(|Q|, |H - 1|)`, reported only for Einstein runs.
    pub max_einstein_drift: Option<f64>,
    pub max_abs_w: f64,
}

pub fn monitor_drift(tr: &Trajectory, einstein: bool) -> DriftReport {
    let mut r = DriftReport::default();
    let mut e: f64 = 0.0;
    for s in &tr.samples {
        r.max_constraint_residual = r
            .max_constraint_residual
            .max(phase::constraint_residual(&s.p).abs());
        r.max_q_flow_consistency = r
            .max_q_flow_consistency
            .max(phase::q_flow_consistency(&s.p, &tr.mp).abs());
        r.max_abs_w = r.max_abs_w.max(s.p.w.abs());
        let d = s.scalars(&tr.mp);
        e = e.max(d.q.abs()).max((d.h - 1.0).abs());
    }
    if einstein {
        r.max_einstein_drift = Some(e);
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_seed_converges_in_place() {
        let mp = ModelParams::new(1, 1, 0).unwrap();
        let p1 = Catalog::new(&mp).p1();
        let tr = integrate(Start::at(0.0, p1), &mp, &IntegratorConfig::default(), &[]);
        assert_eq!(
            tr.status,
            Status::ConvergedToCriticalPoint { id: CriticalId::P1 }
        );
        for s in &tr.samples {
            assert_eq!(s.p, p1);
        }
        let d = monitor_drift(&tr, true);
        assert_eq!(d.max_constraint_residual, 0.0);
    }

    #[test]
    fn event_on_linear_function() {
        // Along p0 + small Z1 component, Z1 grows like e^{2 eta}
        let mp = ModelParams::new(1, 1, 0).unwrap();
        let mut p = PhasePoint::P0;
        p.z1 = 1e-6;
        let w = Watcher::new("z1_hits", |p: &PhasePoint| p.z1 - 1e-4);
        let cfg = IntegratorConfig {
            eta_max: 5.0,
            convergence: None,
            ..Default::default()
        };
        let tr = integrate(Start::at(0.0, p), &mp, &cfg, &[w]);
        let e = &tr.events[0];
        let exact = 0.5 * (100.0f64).ln();
        assert!((e.eta - exact).abs() < 1e-9, "{} vs {exact}", e.eta);
        assert_eq!(e.crossing, Crossing::Rising);
    }
}
