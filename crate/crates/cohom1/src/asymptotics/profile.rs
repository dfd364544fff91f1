//! Metric reconstruction `(t, a, b, c, f)` from a phase trajectory, and an
//! independent re-integration of the second-order system in `t`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::Trajectory;
use crate::ode::{Dop853, Tolerances};
use crate::phase::ModelParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub eta: f64,
    pub t: f64,
    pub a: f64,
    pub b: f64,
    /// NaN when `Z4 = 0` (the `theta = pi` reduction).
    pub c: f64,
    pub f: f64,
    pub a_dot: f64,
    pub b_dot: f64,
    pub c_dot: f64,
    pub f_dot: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricProfile {
    pub rows: Vec<ProfileRow>,
}

/// Rebuilds `(t, a, b, c, f)` from the samples and their gauge columns.
///
/// With `W~ = exp(ln W~)`: `a^2 = Z1 W~/Z2`, `b^2 = W~/Z2`, `c^2 = W~/Z4`,
/// and each logarithmic derivative is `X_i / sqrt(W~)`.
pub fn reconstruct(tr: &Trajectory, _mp: &ModelParams) -> Result<MetricProfile> {
    if !tr.gauge_valid {
        return Err(Error::Domain(
            "trajectory carries no metric gauge (seed it from the series)".into(),
        ));
    }
    let mut rows = Vec::with_capacity(tr.samples.len());
    for s in &tr.samples {
        let p = &s.p;
        let wt = s.wtilde();
        if !(wt > 0.0) || !wt.is_finite() {
            return Err(Error::Domain(format!("W~ = {wt} at eta = {}", s.eta)));
        }
        if !(p.z2 > 0.0) {
            return Err(Error::Domain(format!("Z2 = {} at eta = {}", p.z2, s.eta)));
        }
        let sw = wt.sqrt();
        let b = (wt / p.z2).sqrt();
        let a = b * p.z1.max(0.0).sqrt();
        let c = if p.z4 > 0.0 {
            (wt / p.z4).sqrt()
        } else {
            f64::NAN
        };
        let s_inv = 1.0 / sw;
        let h = p.x1 + 2.0 * p.x2 + 4.0 * tr.mp.m() as f64 * p.x3;
        rows.push(ProfileRow {
            eta: s.eta,
            t: s.t,
            a,
            b,
            c,
            f: s.f,
            a_dot: a * p.x1 * s_inv,
            b_dot: b * p.x2 * s_inv,
            c_dot: c * p.x3 * s_inv,
            f_dot: (h - 1.0) * s_inv,
        });
    }
    Ok(MetricProfile { rows })
}

/// `[a, b, c, a', b', c', f']` in `t`.
fn t_system(m: f64, eps: f64) -> impl Fn(&[f64; 7]) -> [f64; 7] {
    move |y: &[f64; 7]| {
        let [a, b, c, da, db, dc, df] = *y;
        let (la, lb, lc) = (da / a, db / b, dc / c);
        let tr_l = la + 2.0 * lb + 4.0 * m * lc;
        let (a2, b2, c2) = (a * a, b * b, c * c);
        let (b4, c4) = (b2 * b2, c2 * c2);
        let ra = la * la - tr_l * la + 2.0 * a2 / b4 + 4.0 * m * a2 / c4 + la * df + 0.5 * eps;
        let rb = lb * lb - tr_l * lb + 4.0 / b2 - 2.0 * a2 / b4
            + 4.0 * m * b2 / c4
            + lb * df
            + 0.5 * eps;
        let rc = lc * lc - tr_l * lc + (4.0 * m + 8.0) / c2 - 2.0 * a2 / c4 - 4.0 * b2 / c4
            + lc * df
            + 0.5 * eps;
        [
            da,
            db,
            dc,
            a * ra,
            b * rb,
            c * rc,
            ra + 2.0 * rb + 4.0 * m * rc - 0.5 * eps,
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCheckReport {
    pub t_start: f64,
    pub t_end: f64,
    pub rows_compared: usize,
    /// Largest relative deviation of `a`, `b`, `c` from the reconstruction.
    pub max_rel_deviation: f64,
}

/// Integrates the second-order `(a, b, c, f)` system in `t` from the
/// reconstructed data at a mid-trajectory row and compares `a, b, c` with the
/// reconstruction over the following unit of `t`.
pub fn cross_check_t_system(tr: &Trajectory, mp: &ModelParams) -> Result<CrossCheckReport> {
    let prof = reconstruct(tr, mp)?;
    let rows: Vec<&ProfileRow> = prof.rows.iter().filter(|r| r.c.is_finite()).collect();
    let Some(last) = rows.last() else {
        return Err(Error::Domain("no rows with finite c".into()));
    };
    let t_last = last.t;
    let within = |i: usize| {
        rows[i + 1..]
            .iter()
            .take_while(|r| r.t <= rows[i].t + 1.0)
            .count()
    };
    let candidates: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].t + 1.0 <= t_last && within(i) >= 3)
        .collect();
    let (i0, t_end) = match candidates.get(candidates.len() / 2) {
        Some(&i) => (i, rows[i].t + 1.0),
        None => {
            // coarse sampling: fall back to the next few rows
            let i = rows.len() / 2;
            (i, rows[(i + 3).min(rows.len() - 1)].t)
        }
    };
    let r0 = rows[i0];

    let y0 = [r0.a, r0.b, r0.c, r0.a_dot, r0.b_dot, r0.c_dot, r0.f_dot];
    let tol = Tolerances {
        rtol: 1e-12,
        atol: 1e-14,
        h_max: 0.05,
    };
    let mut ode = Dop853::new(t_system(mp.m() as f64, mp.eps()), r0.t, y0, tol);

    let targets: Vec<&ProfileRow> = rows[i0 + 1..]
        .iter()
        .copied()
        .filter(|r| r.t <= t_end)
        .collect();
    let mut worst = 0.0f64;
    let mut k = 0;
    while k < targets.len() {
        let step = ode
            .step(t_end)
            .map_err(|e| Error::Numerical(format!("t-system: {e}")))?;
        while k < targets.len() && targets[k].t <= step.t1() {
            let y = step.eval(targets[k].t);
            let r = targets[k];
            for (got, want) in [(y[0], r.a), (y[1], r.b), (y[2], r.c)] {
                worst = worst.max(((got - want) / want).abs());
            }
            k += 1;
        }
        if step.t1() >= t_end {
            break;
        }
    }
    Ok(CrossCheckReport {
        t_start: r0.t,
        t_end,
        rows_compared: k,
        max_rel_deviation: worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_over_round_sphere_is_linear() {
        // a = b = c = t: flat cone over the unit sphere, the p1 limit
        for m in 0..4 {
            let f = t_system(m as f64, 0.0);
            let t = 2.5;
            let d = f(&[t, t, t, 1.0, 1.0, 1.0, 0.0]);
            for v in &d[3..7] {
                assert!(v.abs() < 1e-12, "m = {m}: {d:?}");
            }
        }
    }
}
