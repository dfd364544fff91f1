//! Initial data on the unstable manifold of `p0 = (1,0,0,0,0,0,0,0)`.
//!
//! [`build_seed`] is the first-order construction
//! `p0 + e^{2 eta0} (w(theta, k) + s4 w4 + s5 w5)`. For long runs the
//! first-order point is too inaccurate (the conserved quantity `Q` is
//! unstable along the flow), so [`UnstableSeries`] extends it to a power
//! series in `x = e^{2 eta}` and evaluates it at a moderate depth.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phase::{self, ModelParams, PhasePoint};

/// Continuous shooting data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShootParams {
    pub theta: f64,
    pub s4: f64,
    pub s5: f64,
    pub eta0: f64,
}

/// Largest admissible `e^{2 eta0} |w|_inf` for [`build_seed`].
pub const MAX_SEED_SCALE: f64 = 1e-4;
/// Scale used by [`default_eta0`].
pub const DEFAULT_SEED_SCALE: f64 = 1e-6;

impl ShootParams {
    pub fn new(theta: f64, s4: f64, s5: f64, eta0: f64) -> Self {
        Self {
            theta,
            s4,
            s5,
            eta0,
        }
    }

    /// Shooting data at the default depth for `mp`.
    pub fn at_default_depth(mp: &ModelParams, theta: f64, s4: f64, s5: f64) -> Self {
        let mut sp = Self::new(theta, s4, s5, 0.0);
        sp.eta0 = default_eta0(mp, &sp);
        sp
    }

    pub fn s1(&self) -> f64 {
        0.5 * (1.0 + self.theta.cos())
    }

    pub fn s2(&self) -> f64 {
        0.5 * (1.0 - self.theta.cos())
    }

    pub fn s3(&self) -> f64 {
        self.theta.sin() / std::f64::consts::SQRT_2
    }

    pub fn s6(&self, k: u32) -> f64 {
        let k = k as f64;
        k * k * (self.s1() + self.s2() + std::f64::consts::SQRT_2 * self.s3())
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=std::f64::consts::PI).contains(&self.theta) {
            return Err(Error::InvalidParams(format!(
                "theta must lie in [0, pi], got {}",
                self.theta
            )));
        }
        if !(self.s4 >= 0.0 && self.s5 >= 0.0) || !self.s4.is_finite() || !self.s5.is_finite() {
            return Err(Error::InvalidParams(format!(
                "s4, s5 must be finite and nonnegative, got {}, {}",
                self.s4, self.s5
            )));
        }
        if !self.eta0.is_finite() {
            return Err(Error::InvalidParams("eta0 must be finite".into()));
        }
        Ok(())
    }
}

/// The six unstable eigenvectors of the linearization at `p0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenBasis {
    pub w: [[f64; 8]; 6],
}

impl EigenBasis {
    pub fn new(mp: &ModelParams) -> Self {
        let m = mp.mf();
        let e = mp.eps();
        let r = std::f64::consts::SQRT_2;
        let w1 = [
            -(4.0 * m + 2.0) * (2.0 * m + 2.0),
            2.0 * m + 2.0,
            2.0 * m + 2.0,
            0.0,
            1.0,
            1.0,
            1.0,
            0.0,
        ];
        let w2 = [-4.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let w3 = [
            -4.0 * (m + 1.0) * (m + 1.0) * r,
            2.0 * r,
            (m + 2.0) * r,
            0.0,
            r,
            0.0,
            0.5 * r,
            0.0,
        ];
        let w4 = [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let w5 = [
            -(4.0 * m + 2.0) * 0.5 * e,
            0.5 * e,
            0.5 * e,
            0.0,
            0.0,
            0.0,
            0.0,
            2.0,
        ];
        let w6 = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        Self {
            w: [w1, w2, w3, w4, w5, w6],
        }
    }

    /// `w(theta, k) + s4 w4 + s5 w5`.
    pub fn direction(&self, k: u32, sp: &ShootParams) -> [f64; 8] {
        let c = [sp.s1(), sp.s2(), sp.s3(), sp.s4, sp.s5, sp.s6(k)];
        let mut d = [0.0; 8];
        for (ci, wi) in c.iter().zip(&self.w) {
            for j in 0..8 {
                d[j] += ci * wi[j];
            }
        }
        d
    }
}

fn inf_norm(v: &[f64; 8]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

/// Largest `eta0` with `e^{2 eta0} |w|_inf <= 1e-6`.
pub fn default_eta0(mp: &ModelParams, sp: &ShootParams) -> f64 {
    let d = EigenBasis::new(mp).direction(mp.k(), sp);
    0.5 * (DEFAULT_SEED_SCALE / inf_norm(&d)).ln()
}

pub fn build_seed(mp: &ModelParams, sp: &ShootParams) -> Result<PhasePoint> {
    sp.check()?;
    let d = EigenBasis::new(mp).direction(mp.k(), sp);
    let u = (2.0 * sp.eta0).exp();
    let scale = u * inf_norm(&d);
    if scale > MAX_SEED_SCALE {
        return Err(Error::SeedTooShallow {
            scale,
            limit: MAX_SEED_SCALE,
        });
    }
    let mut p = PhasePoint::P0.to_array();
    for j in 0..8 {
        p[j] += u * d[j];
    }
    Ok(PhasePoint::from_array(p))
}

/// First-order consistency of a seed, each entry divided by `u = e^{2 eta0}`
/// where that is meaningful.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeedReport {
    pub u: f64,
    /// `|Q + 2 s4 u| / u`
    pub q_error: f64,
    /// `|(1 - H) - s4 u| / u`
    pub h_error: f64,
    /// `sqrt(Z1/Z2) - k`
    pub fiber_error: f64,
    pub constraint_residual: f64,
}

impl SeedReport {
    /// Every first-order defect is at most `c u` (the residual at most `c u^2`).
    pub fn within(&self, c: f64) -> bool {
        self.q_error <= c * self.u
            && self.h_error <= c * self.u
            && self.fiber_error.abs() <= c * self.u
            && self.constraint_residual.abs() <= c * self.u * self.u
    }
}

pub fn validate_seed(p: &PhasePoint, mp: &ModelParams, sp: &ShootParams) -> SeedReport {
    let u = (2.0 * sp.eta0).exp();
    let s = phase::derived_scalars(p, mp);
    SeedReport {
        u,
        q_error: (s.q + 2.0 * sp.s4 * u).abs() / u,
        h_error: ((1.0 - s.h) - sp.s4 * u).abs() / u,
        fiber_error: (p.z1 / p.z2).sqrt() - mp.k() as f64,
        constraint_residual: phase::constraint_residual(p),
    }
}

/// Analytic Jacobian of `V` at `p0`.
pub fn jacobian_at_p0(mp: &ModelParams) -> [[f64; 8]; 8] {
    let m = mp.mf();
    let e = mp.eps();
    let mut j = [[0.0; 8]; 8];
    j[0][0] = 2.0;
    j[1][4] = 4.0;
    j[1][5] = 4.0 * m;
    j[1][7] = 0.5 * e;
    j[2][5] = -4.0;
    j[2][6] = 4.0 * m + 8.0;
    j[2][7] = 0.5 * e;
    for (i, row) in j.iter_mut().enumerate().skip(3) {
        row[i] = 2.0;
    }
    j
}

/// Linear functionals `B` and `C` spanning the left kernel of the Jacobian at `p0`.
pub fn center_functionals(mp: &ModelParams) -> [[f64; 8]; 2] {
    let m = mp.mf();
    let q = 0.25 * mp.eps();
    [
        [0.0, 1.0, 0.0, 0.0, -2.0, -2.0 * m, 0.0, -q],
        [0.0, 0.0, 1.0, 0.0, 0.0, 2.0, -(2.0 * m + 4.0), -q],
    ]
}

type Series = Vec<f64>;

fn mul(a: &[f64], b: &[f64]) -> Series {
    let n = a.len();
    let mut c = vec![0.0; n];
    for (i, ai) in a.iter().enumerate() {
        if *ai == 0.0 {
            continue;
        }
        for (j, bj) in b.iter().take(n - i).enumerate() {
            c[i + j] += ai * bj;
        }
    }
    c
}

fn lin(terms: &[(f64, &[f64])]) -> Series {
    let n = terms[0].1.len();
    let mut c = vec![0.0; n];
    for (k, s) in terms {
        for i in 0..n {
            c[i] += k * s[i];
        }
    }
    c
}

/// Power series of the unstable-manifold trajectory in `x = e^{2 eta}`.
#[derive(Clone, Debug)]
pub struct UnstableSeries {
    mp: ModelParams,
    /// `coeffs[c][j]`: coefficient of `x^j` in coordinate `c`.
    coeffs: [Series; 8],
    /// Series of `G - eps W / 2`.
    g: Series,
    /// Series of `H - 1`.
    h1: Series,
    /// Series of `exp(sum_{j>=1} g_j x^j / j)`.
    wexp: Series,
    /// Series of `exp(sum_{j>=1} g_j x^j / (2j))`.
    texp: Series,
    /// Prefactor of `W~ = c x exp(...)`.
    w_scale: f64,
    direction_norm: f64,
}

/// Relative size of the last retained term that [`UnstableSeries::safe_depth`] accepts.
const SERIES_TAIL_TOL: f64 = 1e-17;

impl UnstableSeries {
    pub fn new(mp: &ModelParams, sp: &ShootParams, order: usize) -> Result<Self> {
        sp.check()?;
        if order < 1 {
            return Err(Error::InvalidParams(
                "series order must be at least 1".into(),
            ));
        }
        let n = order + 1;
        let d = EigenBasis::new(mp).direction(mp.k(), sp);
        let jac = SMatrix::<f64, 8, 8>::from_fn(|r, c| jacobian_at_p0(mp)[r][c]);
        let mut coeffs: [Series; 8] = Default::default();
        for (c, s) in coeffs.iter_mut().enumerate() {
            *s = vec![0.0; n];
            s[1] = d[c];
        }
        coeffs[0][0] = 1.0;
        for j in 2..n {
            // with c_j = 0 the j-th coefficient of V(series) is purely nonlinear
            let v = series_field(&coeffs, mp);
            let rhs = SVector::<f64, 8>::from_fn(|c, _| v[c][j]);
            let a = SMatrix::<f64, 8, 8>::identity() * (2.0 * j as f64) - jac;
            let sol = a
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular series recursion".into()))?;
            for c in 0..8 {
                coeffs[c][j] = sol[c];
            }
        }
        let m = mp.mf();
        let [x1, x2, x3, _, _, _, _, w] = &coeffs;
        let g = lin(&[
            (1.0, &mul(x1, x1)),
            (2.0, &mul(x2, x2)),
            (4.0 * m, &mul(x3, x3)),
            (-0.5 * mp.eps(), w),
        ]);
        let mut h1 = lin(&[(1.0, x1), (2.0, x2), (4.0 * m, x3)]);
        h1[0] -= 1.0;
        let a_w: Series = (0..n)
            .map(|j| if j == 0 { 0.0 } else { g[j] / j as f64 })
            .collect();
        let a_t: Series = a_w.iter().map(|v| 0.5 * v).collect();
        let w_scale = if mp.epsilon() == 1 && sp.s5 > 0.0 {
            2.0 * sp.s5
        } else {
            sp.s6(mp.k())
        };
        Ok(Self {
            mp: *mp,
            wexp: series_exp(&a_w),
            texp: series_exp(&a_t),
            coeffs,
            g,
            h1,
            w_scale,
            direction_norm: inf_norm(&d),
        })
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn coefficient(&self, j: usize) -> [f64; 8] {
        std::array::from_fn(|c| self.coeffs[c][j])
    }

    pub fn point(&self, eta: f64) -> PhasePoint {
        let x = (2.0 * eta).exp();
        PhasePoint::from_array(std::array::from_fn(|c| horner(&self.coeffs[c], x)))
    }

    /// `ln W~` where `W~` follows `W~' = 2 W~ (G - eps W / 2)` and is
    /// normalized by `W~ ~ c e^{2 eta}` as `eta -> -inf`, with `c = 2 s5` when
    /// `W` itself is positive and `c = s6` otherwise.
    pub fn ln_wtilde(&self, eta: f64) -> f64 {
        let x = (2.0 * eta).exp();
        self.w_scale.ln() + 2.0 * eta + horner(&self.wexp, x).ln()
    }

    /// `t = int_{-inf}^{eta} sqrt(W~)`.
    pub fn t(&self, eta: f64) -> f64 {
        let x = (2.0 * eta).exp();
        let terms: Series = self
            .texp
            .iter()
            .enumerate()
            .map(|(j, e)| e / (2 * j + 1) as f64)
            .collect();
        self.w_scale.sqrt() * eta.exp() * horner(&terms, x)
    }

    /// `f = int_{-inf}^{eta} (H - 1)`.
    pub fn f(&self, eta: f64) -> f64 {
        let x = (2.0 * eta).exp();
        let terms: Series = self
            .h1
            .iter()
            .enumerate()
            .map(|(j, h)| if j == 0 { 0.0 } else { h / (2 * j) as f64 })
            .collect();
        horner(&terms, x)
    }

    pub fn g_series(&self) -> &[f64] {
        &self.g
    }

    /// Depth `eta` with `e^{2 eta} |w|_inf = level`, moved deeper until the
    /// last retained term is negligible.
    pub fn safe_depth(&self, level: f64) -> f64 {
        let mut lvl = level;
        loop {
            let eta = 0.5 * (lvl / self.direction_norm).ln();
            let x = (2.0 * eta).exp();
            let last = self.coefficient(self.order());
            let tail = inf_norm(&last) * x.powi(self.order() as i32);
            if tail <= SERIES_TAIL_TOL || lvl < 1e-8 {
                return eta;
            }
            lvl *= 0.5;
        }
    }

    pub fn model(&self) -> &ModelParams {
        &self.mp
    }
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * x + v)
}

fn series_exp(a: &[f64]) -> Series {
    // E' = A' E  =>  j e_j = sum_{i=1}^{j} i a_i e_{j-i}
    let n = a.len();
    let mut e = vec![0.0; n];
    e[0] = a[0].exp();
    for j in 1..n {
        let mut s = 0.0;
        for i in 1..=j {
            s += i as f64 * a[i] * e[j - i];
        }
        e[j] = s / j as f64;
    }
    e
}

fn series_field(c: &[Series; 8], mp: &ModelParams) -> [Series; 8] {
    let m = mp.mf();
    let e = mp.eps();
    let [x1, x2, x3, z1, z2, z3, z4, w] = c;
    let n = x1.len();
    let mut one = vec![0.0; n];
    one[0] = 1.0;
    let g = lin(&[
        (1.0, &mul(x1, x1)),
        (2.0, &mul(x2, x2)),
        (4.0 * m, &mul(x3, x3)),
        (-0.5 * e, w),
    ]);
    let gm1 = lin(&[(1.0, &g), (-1.0, &one)]);
    let z1z2 = mul(z1, z2);
    let z1z3 = mul(z1, z3);
    let r1 = lin(&[(2.0, &z1z2), (4.0 * m, &z1z3)]);
    let r2 = lin(&[(4.0, z2), (-2.0, &z1z2), (4.0 * m, z3)]);
    let r3 = lin(&[(4.0 * m + 8.0, z4), (-2.0, &z1z3), (-4.0, z3)]);
    [
        lin(&[(1.0, &mul(x1, &gm1)), (1.0, &r1), (0.5 * e, w)]),
        lin(&[(1.0, &mul(x2, &gm1)), (1.0, &r2), (0.5 * e, w)]),
        lin(&[(1.0, &mul(x3, &gm1)), (1.0, &r3), (0.5 * e, w)]),
        lin(&[(2.0, &mul(z1, &lin(&[(1.0, x1), (-1.0, x2)])))]),
        lin(&[(2.0, &mul(z2, &lin(&[(1.0, &g), (-1.0, x2)])))]),
        lin(&[(2.0, &mul(z3, &lin(&[(1.0, &g), (1.0, x2), (-2.0, x3)])))]),
        lin(&[(2.0, &mul(z4, &lin(&[(1.0, &g), (-1.0, x3)])))]),
        lin(&[(2.0, &mul(w, &g))]),
    ]
}

/// A seed together with the gauge data the reconstruction needs.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SeriesSeed {
    pub eta: f64,
    pub point: PhasePoint,
    pub ln_wtilde: f64,
    pub t: f64,
    pub f: f64,
}

pub const DEFAULT_SERIES_ORDER: usize = 30;
pub const DEFAULT_SERIES_LEVEL: f64 = 3e-2;

/// Series seed at the default order and depth.
pub fn build_seed_series(mp: &ModelParams, sp: &ShootParams) -> Result<SeriesSeed> {
    let s = UnstableSeries::new(mp, sp, DEFAULT_SERIES_ORDER)?;
    let eta = s.safe_depth(DEFAULT_SERIES_LEVEL);
    Ok(SeriesSeed {
        eta,
        point: s.point(eta),
        ln_wtilde: s.ln_wtilde(eta),
        t: s.t(eta),
        f: s.f(eta),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn mp(m: u32, k: u32, e: u8) -> ModelParams {
        ModelParams::new(m, k, e).unwrap()
    }

    #[test]
    fn hand_combined_seed() {
        let sp = ShootParams::new(FRAC_PI_2, 0.5, 0.0, -8.0);
        let p = build_seed(&mp(1, 1, 0), &sp).unwrap().to_array();
        let u = (-16.0f64).exp();
        let want = [
            1.0 - 30.5 * u,
            5.0 * u,
            5.0 * u,
            2.0 * u,
            2.0 * u,
            0.5 * u,
            u,
            0.0,
        ];
        for i in 0..8 {
            assert!((p[i] - want[i]).abs() <= 1e-10 * u, "coord {i}");
        }
    }

    #[test]
    fn shallow_seed_refused() {
        let sp = ShootParams::new(FRAC_PI_2, 0.5, 0.0, -1.0);
        assert!(matches!(
            build_seed(&mp(1, 1, 0), &sp),
            Err(Error::SeedTooShallow { .. })
        ));
    }

    #[test]
    fn endpoint_angles() {
        let m = mp(1, 3, 0);
        let sp = ShootParams::at_default_depth(&m, 0.0, 0.0, 0.0);
        let p = build_seed(&m, &sp).unwrap();
        assert_eq!(p.z2, p.z3);
        assert_eq!(p.x2, p.x3);
        let sp = ShootParams::at_default_depth(&m, PI, 0.0, 0.0);
        let p = build_seed(&m, &sp).unwrap();
        assert!(p.z3.abs() < 1e-22 && p.x3.abs() < 1e-22);
    }

    #[test]
    fn series_first_coefficient_is_direction() {
        let m = mp(1, 2, 1);
        let sp = ShootParams::new(1.0, 0.3, 0.7, 0.0);
        let s = UnstableSeries::new(&m, &sp, 6).unwrap();
        let d = EigenBasis::new(&m).direction(2, &sp);
        assert_eq!(s.coefficient(1), d);
    }

    #[test]
    fn series_point_solves_flow() {
        // d/deta of the series must equal V at the series point
        let m = mp(1, 3, 1);
        let sp = ShootParams::new(1.2, 0.4, 0.5, 0.0);
        let s = UnstableSeries::new(&m, &sp, 30).unwrap();
        let eta = s.safe_depth(1e-2);
        let h = 1e-4;
        let dp = s.point(eta + h).to_array();
        let dm = s.point(eta - h).to_array();
        let v = phase::vector_field(&s.point(eta), &m).to_array();
        for c in 0..8 {
            let fd = (dp[c] - dm[c]) / (2.0 * h);
            assert!((fd - v[c]).abs() < 1e-9, "coord {c}: {fd} vs {}", v[c]);
        }
    }
}
