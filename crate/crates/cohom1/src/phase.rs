//! Phase space of the cohomogeneity-one soliton flow.
//!
//! Coordinates are `(X1, X2, X3, Z1, Z2, Z3, Z4, W)`. Everything here is a
//! closed-form polynomial (or square-root) expression; gradients are coded by
//! hand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete model data: quaternionic parameter `m`, Chern degree `k`, and the
/// soliton type `epsilon` (0 steady, 1 expanding).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelParams {
    m: u32,
    k: u32,
    epsilon: u8,
}

impl ModelParams {
    pub fn new(m: u32, k: u32, epsilon: u8) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be at least 1".into()));
        }
        if epsilon > 1 {
            return Err(Error::InvalidParams(format!(
                "epsilon must be 0 or 1, got {epsilon}"
            )));
        }
        Ok(Self { m, k, epsilon })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn epsilon(&self) -> u8 {
        self.epsilon
    }

    /// Real dimension of the principal orbit, `4m + 3`.
    pub fn n(&self) -> u32 {
        4 * self.m + 3
    }

    pub fn with_k(&self, k: u32) -> Result<Self> {
        Self::new(self.m, k, self.epsilon)
    }

    pub fn with_epsilon(&self, epsilon: u8) -> Result<Self> {
        Self::new(self.m, self.k, epsilon)
    }

    pub(crate) fn mf(&self) -> f64 {
        self.m as f64
    }

    pub(crate) fn nf(&self) -> f64 {
        self.n() as f64
    }

    pub(crate) fn eps(&self) -> f64 {
        self.epsilon as f64
    }
}

/// A point of the 8-dimensional phase space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x1: f64,
    pub x2: f64,
    pub x3: f64,
    pub z1: f64,
    pub z2: f64,
    pub z3: f64,
    pub z4: f64,
    pub w: f64,
}

pub const COORD_NAMES: [&str; 8] = ["X1", "X2", "X3", "Z1", "Z2", "Z3", "Z4", "W"];

impl PhasePoint {
    pub const P0: PhasePoint = PhasePoint {
        x1: 1.0,
        x2: 0.0,
        x3: 0.0,
        z1: 0.0,
        z2: 0.0,
        z3: 0.0,
        z4: 0.0,
        w: 0.0,
    };

    pub fn from_array(a: [f64; 8]) -> Self {
        Self {
            x1: a[0],
            x2: a[1],
            x3: a[2],
            z1: a[3],
            z2: a[4],
            z3: a[5],
            z4: a[6],
            w: a[7],
        }
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.x1, self.x2, self.x3, self.z1, self.z2, self.z3, self.z4, self.w,
        ]
    }

    pub fn max_abs(&self) -> f64 {
        self.to_array().iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn dist_inf(&self, other: &PhasePoint) -> f64 {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(0.0, |a, (x, y)| a.max((x - y).abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedScalars {
    pub g: f64,
    pub h: f64,
    pub q: f64,
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
    pub rs: f64,
}

pub fn derived_scalars(p: &PhasePoint, mp: &ModelParams) -> DerivedScalars {
    let m = mp.mf();
    let g = p.x1 * p.x1 + 2.0 * p.x2 * p.x2 + 4.0 * m * p.x3 * p.x3;
    let h = p.x1 + 2.0 * p.x2 + 4.0 * m * p.x3;
    let r1 = 2.0 * p.z1 * p.z2 + 4.0 * m * p.z1 * p.z3;
    let r2 = 4.0 * p.z2 - 2.0 * p.z1 * p.z2 + 4.0 * m * p.z3;
    let r3 = (4.0 * m + 8.0) * p.z4 - 2.0 * p.z1 * p.z3 - 4.0 * p.z3;
    let rs = r1 + 2.0 * r2 + 4.0 * m * r3;
    let q = g + rs + (mp.nf() - 1.0) * 0.5 * mp.eps() * p.w - 1.0;
    DerivedScalars {
        g,
        h,
        q,
        r1,
        r2,
        r3,
        rs,
    }
}

/// `G - (eps/2) W`, the factor that recurs throughout the vector field.
pub fn g_shift(p: &PhasePoint, mp: &ModelParams) -> f64 {
    let m = mp.mf();
    p.x1 * p.x1 + 2.0 * p.x2 * p.x2 + 4.0 * m * p.x3 * p.x3 - 0.5 * mp.eps() * p.w
}

pub fn vector_field(p: &PhasePoint, mp: &ModelParams) -> PhasePoint {
    let s = derived_scalars(p, mp);
    let half_ew = 0.5 * mp.eps() * p.w;
    let g = s.g - half_ew;
    PhasePoint {
        x1: p.x1 * (g - 1.0) + s.r1 + half_ew,
        x2: p.x2 * (g - 1.0) + s.r2 + half_ew,
        x3: p.x3 * (g - 1.0) + s.r3 + half_ew,
        z1: 2.0 * p.z1 * (p.x1 - p.x2),
        z2: 2.0 * p.z2 * (g - p.x2),
        z3: 2.0 * p.z3 * (g + p.x2 - 2.0 * p.x3),
        z4: 2.0 * p.z4 * (g - p.x3),
        w: 2.0 * p.w * g,
    }
}

/// `Z4^2 - Z2 Z3`; vanishes on the constraint variety.
pub fn constraint_residual(p: &PhasePoint) -> f64 {
    p.z4 * p.z4 - p.z2 * p.z3
}

/// Directional derivative of the constraint residual along `V`.
pub fn constraint_derivative(p: &PhasePoint, mp: &ModelParams) -> f64 {
    let v = vector_field(p, mp);
    2.0 * p.z4 * v.z4 - v.z2 * p.z3 - p.z2 * v.z3
}

pub fn grad_q(p: &PhasePoint, mp: &ModelParams) -> [f64; 8] {
    let m = mp.mf();
    [
        2.0 * p.x1,
        4.0 * p.x2,
        8.0 * m * p.x3,
        -2.0 * p.z2 - 4.0 * m * p.z3,
        8.0 - 2.0 * p.z1,
        -8.0 * m - 4.0 * m * p.z1,
        4.0 * m * (4.0 * m + 8.0),
        (mp.nf() - 1.0) * 0.5 * mp.eps(),
    ]
}

pub fn grad_h(mp: &ModelParams) -> [f64; 8] {
    [1.0, 2.0, 4.0 * mp.mf(), 0.0, 0.0, 0.0, 0.0, 0.0]
}

fn dot(a: &[f64; 8], b: &[f64; 8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `<grad Q, V> - [2 Q (G - eps W/2) + eps (H - 1) W]`.
pub fn q_flow_consistency(p: &PhasePoint, mp: &ModelParams) -> f64 {
    let s = derived_scalars(p, mp);
    let g = s.g - 0.5 * mp.eps() * p.w;
    let lhs = dot(&grad_q(p, mp), &vector_field(p, mp).to_array());
    lhs - (2.0 * s.q * g + mp.eps() * (s.h - 1.0) * p.w)
}

/// `<grad H, V> - [(H - 1)(G - eps W/2 - 1) + Q]`.
pub fn h_flow_consistency(p: &PhasePoint, mp: &ModelParams) -> f64 {
    let s = derived_scalars(p, mp);
    let g = s.g - 0.5 * mp.eps() * p.w;
    let lhs = dot(&grad_h(mp), &vector_field(p, mp).to_array());
    lhs - ((s.h - 1.0) * (g - 1.0) + s.q)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetFlags {
    pub rs: bool,
    pub einstein: bool,
    pub steady: bool,
    pub ricci_flat: bool,
    pub fubini_study: bool,
    pub kahler_einstein: bool,
    pub round: bool,
    pub m_zero: bool,
}

pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-9;

pub fn in_rs(p: &PhasePoint, mp: &ModelParams, tol: f64) -> bool {
    let s = derived_scalars(p, mp);
    s.q <= tol
        && s.h <= 1.0 + tol
        && p.w >= -tol
        && p.z1 >= -tol
        && p.z2 >= -tol
        && p.z3 >= -tol
        && p.z4 >= -tol
        && constraint_residual(p).abs() <= tol
}

pub fn subset_membership(p: &PhasePoint, mp: &ModelParams, tol: f64) -> SubsetFlags {
    let s = derived_scalars(p, mp);
    let zero = |v: f64| v.abs() <= tol;
    let rs = in_rs(p, mp, tol);
    let einstein = rs && zero(s.q) && zero(s.h - 1.0);
    let steady = rs && zero(p.w);
    let fubini_study = rs && zero(p.z2 - p.z3) && zero(p.x2 - p.x3);
    let kahler_einstein = fubini_study
        && zero(p.x2 * p.x2 - p.z1 * p.z2)
        && zero((4.0 * mp.mf() + 4.0) * p.z2 + 0.5 * mp.eps() * p.w - p.x2 * (1.0 + p.x1));
    SubsetFlags {
        rs,
        einstein,
        steady,
        ricci_flat: steady && einstein,
        fubini_study,
        kahler_einstein,
        round: rs && zero(p.z1 - 1.0) && zero(p.x1 - p.x2),
        m_zero: steady && zero(p.x3) && zero(p.z3),
    }
}

/// `F_l = X2 - X1 + l (sqrt(Z2/Z1) - sqrt(Z1 Z2))`.
pub fn barrier_f(l: f64, p: &PhasePoint) -> Result<f64> {
    if p.z1 <= 0.0 {
        return Err(Error::Domain(format!(
            "barrier F_l needs Z1 > 0, got {}",
            p.z1
        )));
    }
    let z2 = p.z2.max(0.0);
    Ok(p.x2 - p.x1 + l * ((z2 / p.z1).sqrt() - (p.z1 * z2).sqrt()))
}

/// Closed form of `<grad F_l, V>`.
pub fn barrier_f_derivative(l: f64, p: &PhasePoint, mp: &ModelParams) -> Result<f64> {
    let f = barrier_f(l, p)?;
    let m = mp.mf();
    let z2 = p.z2.max(0.0);
    let g = g_shift(p, mp);
    let s12 = (p.z1 * z2).sqrt();
    let r = (z2 / p.z1).sqrt();
    Ok(f * (g - 1.0 + 2.0 * l * s12)
        + (l * r * (1.0 - p.x1) + (4.0 - 2.0 * l * l) * z2 + 4.0 * m * p.z3) * (1.0 - p.z1))
}

/// Analytic Jacobian of `V` at an arbitrary point, row-major.
pub fn jacobian(p: &PhasePoint, mp: &ModelParams) -> [[f64; 8]; 8] {
    let m = mp.mf();
    let e = mp.eps();
    let g = g_shift(p, mp);
    // gradient of g = G - eps W / 2
    let dg = [
        2.0 * p.x1,
        4.0 * p.x2,
        8.0 * m * p.x3,
        0.0,
        0.0,
        0.0,
        0.0,
        -0.5 * e,
    ];
    let mut j = [[0.0; 8]; 8];
    let xs = [p.x1, p.x2, p.x3];
    for (i, &x) in xs.iter().enumerate() {
        for c in 0..8 {
            j[i][c] = x * dg[c];
        }
        j[i][i] += g - 1.0;
        j[i][7] += 0.5 * e;
    }
    // R1 = 2 Z1 Z2 + 4m Z1 Z3
    j[0][3] += 2.0 * p.z2 + 4.0 * m * p.z3;
    j[0][4] += 2.0 * p.z1;
    j[0][5] += 4.0 * m * p.z1;
    // R2 = 4 Z2 - 2 Z1 Z2 + 4m Z3
    j[1][3] += -2.0 * p.z2;
    j[1][4] += 4.0 - 2.0 * p.z1;
    j[1][5] += 4.0 * m;
    // R3 = (4m+8) Z4 - 2 Z1 Z3 - 4 Z3
    j[2][3] += -2.0 * p.z3;
    j[2][5] += -2.0 * p.z1 - 4.0;
    j[2][6] += 4.0 * m + 8.0;
    // V4 = 2 Z1 (X1 - X2)
    j[3][0] = 2.0 * p.z1;
    j[3][1] = -2.0 * p.z1;
    j[3][3] = 2.0 * (p.x1 - p.x2);
    // V5..V8 = 2 Y (g + linear)
    let rows: [(usize, f64, [f64; 3]); 4] = [
        (4, p.z2, [0.0, -1.0, 0.0]),
        (5, p.z3, [0.0, 1.0, -2.0]),
        (6, p.z4, [0.0, 0.0, -1.0]),
        (7, p.w, [0.0, 0.0, 0.0]),
    ];
    for (r, y, lin) in rows {
        for c in 0..8 {
            j[r][c] = 2.0 * y * dg[c];
        }
        for (c, l) in lin.iter().enumerate() {
            j[r][c] += 2.0 * y * l;
        }
        j[r][r] += 2.0 * (g + lin[0] * p.x1 + lin[1] * p.x2 + lin[2] * p.x3);
    }
    j
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mp(m: u32, k: u32, e: u8) -> ModelParams {
        ModelParams::new(m, k, e).unwrap()
    }

    #[test]
    fn scalars_at_p1() {
        let p = PhasePoint::from_array([
            1.0 / 7.0,
            1.0 / 7.0,
            1.0 / 7.0,
            1.0,
            1.0 / 49.0,
            1.0 / 49.0,
            1.0 / 49.0,
            0.0,
        ]);
        let s = derived_scalars(&p, &mp(1, 1, 0));
        assert!((s.g - 1.0 / 7.0).abs() < 1e-15);
        assert!((s.h - 1.0).abs() < 1e-15);
        for r in [s.r1, s.r2, s.r3] {
            assert!((r - 6.0 / 49.0).abs() < 1e-15);
        }
        assert!((s.rs - 6.0 / 7.0).abs() < 1e-15);
        assert!(s.q.abs() < 1e-15);
    }

    #[test]
    fn scalars_at_q0_point() {
        let x = 1.0 / 7.0;
        let p = PhasePoint::from_array([x, x, x, 0.3, 0.0, 0.0, 0.0, 2.0 / 7.0]);
        let s = derived_scalars(&p, &mp(1, 1, 1));
        assert!((s.g - x).abs() < 1e-15);
        assert!((s.h - 1.0).abs() < 1e-15);
        assert_eq!(s.rs, 0.0);
        assert!(s.q.abs() < 1e-15);
    }

    #[test]
    fn vector_field_hand_example() {
        let p = PhasePoint::from_array([0.0, 0.0, 0.0, 1.0, 0.01, 0.01, 0.01, 0.0]);
        let v = vector_field(&p, &mp(1, 1, 0)).to_array();
        let want = [0.06, 0.06, 0.06, 0.0, 0.0, 0.0, 0.0, 0.0];
        for i in 0..8 {
            assert!((v[i] - want[i]).abs() < 1e-15, "component {i}: {}", v[i]);
        }
    }

    #[test]
    fn p0_is_critical() {
        let v = vector_field(&PhasePoint::P0, &mp(1, 1, 1));
        assert_eq!(v.max_abs(), 0.0);
    }

    #[test]
    fn residual_examples() {
        let p = PhasePoint::from_array([0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.5, 0.0]);
        assert_eq!(constraint_residual(&p), -0.75);
        let u = 3.7e-3;
        let p = PhasePoint::from_array([0.0, 0.0, 0.0, 0.0, 2.0 * u, 0.5 * u, u, 0.0]);
        assert!(constraint_residual(&p).abs() < 1e-20);
    }

    #[test]
    fn membership_examples() {
        let x = 1.0 / 7.0;
        let p1 = PhasePoint::from_array([x, x, x, 1.0, x * x, x * x, x * x, 0.0]);
        let f = subset_membership(&p1, &mp(1, 1, 0), 1e-12);
        assert!(f.rs && f.einstein && f.ricci_flat && f.fubini_study && f.round && f.steady);

        let f = subset_membership(&PhasePoint::P0, &mp(1, 1, 0), 1e-12);
        assert!(f.rs && f.einstein && f.steady && f.ricci_flat && f.fubini_study && f.m_zero);
        assert!(!f.round);

        let q0 = PhasePoint::from_array([x, x, x, 0.3, 0.0, 0.0, 0.0, 2.0 / 7.0]);
        let f = subset_membership(&q0, &mp(1, 1, 1), 1e-12);
        assert!(f.rs && f.einstein && !f.steady);
    }

    #[test]
    fn barrier_rejects_collapsed_fiber() {
        let p = PhasePoint::P0;
        assert!(matches!(barrier_f(2.0, &p), Err(Error::Domain(_))));
        assert!(barrier_f_derivative(2.0, &p, &mp(1, 1, 0)).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(1, 0, 0).is_err());
        assert!(ModelParams::new(1, 1, 2).is_err());
        assert_eq!(mp(2, 1, 0).n(), 11);
    }
}
