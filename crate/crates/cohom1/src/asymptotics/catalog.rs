//! Critical points of the flow that arise as limits of seeded trajectories.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::phase::{self, ModelParams, PhasePoint};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalId {
    P0,
    P1,
    P2,
    Q1,
    Q2,
    /// `(1/n, 1/n, 1/n, z1, 0, 0, 0, 2/(n eps))`, any `z1 >= 0`; expanding only.
    Q0,
    /// `(0, 0, 0, mu^2, 0, 0, 0, 0)`, any `mu^2 >= 0`.
    Origin,
    /// `(1/3, 1/3, 0, 1, 1/9, 0, 0, 0)`, endpoint of the round curve out of `p0`.
    U1,
}

impl CriticalId {
    pub const ALL: [CriticalId; 8] = [
        CriticalId::P0,
        CriticalId::P1,
        CriticalId::P2,
        CriticalId::Q1,
        CriticalId::Q2,
        CriticalId::Q0,
        CriticalId::Origin,
        CriticalId::U1,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            CriticalId::P0 => "p0",
            CriticalId::P1 => "p1",
            CriticalId::P2 => "p2",
            CriticalId::Q1 => "q1",
            CriticalId::Q2 => "q2",
            CriticalId::Q0 => "q0",
            CriticalId::Origin => "origin",
            CriticalId::U1 => "u1",
        }
    }

    pub fn is_family(&self) -> bool {
        matches!(self, CriticalId::Q0 | CriticalId::Origin)
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

impl fmt::Display for CriticalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct Catalog {
    mp: ModelParams,
}

/// Where a point sits relative to the catalog.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Located {
    pub id: CriticalId,
    pub distance: f64,
    /// Catalog point closest to the query (family members keep the query's `Z1`).
    pub point: PhasePoint,
}

impl Catalog {
    pub fn new(mp: &ModelParams) -> Self {
        Self { mp: *mp }
    }

    pub fn p1(&self) -> PhasePoint {
        let x = 1.0 / self.mp.nf();
        PhasePoint::from_array([x, x, x, 1.0, x * x, x * x, x * x, 0.0])
    }

    pub fn z_p2(&self) -> f64 {
        let (m, n) = (self.mp.mf(), self.mp.nf());
        let a = 2.0 * m + 3.0;
        (n - 1.0) / (n * n * (2.0 * a * a + 4.0 * m))
    }

    pub fn p2(&self) -> PhasePoint {
        let x = 1.0 / self.mp.nf();
        let a = 2.0 * self.mp.mf() + 3.0;
        let z = self.z_p2();
        PhasePoint::from_array([x, x, x, 1.0, a * a * z, z, a * z, 0.0])
    }

    pub fn z_q1(&self) -> f64 {
        let n = self.mp.nf();
        (n - 2.0) / ((n - 1.0) * (n - 1.0) * (n + 1.0))
    }

    pub fn q1(&self) -> PhasePoint {
        let x = 1.0 / (self.mp.nf() - 1.0);
        let z = self.z_q1();
        PhasePoint::from_array([0.0, x, x, 0.0, z, z, z, 0.0])
    }

    pub fn z_q2(&self) -> f64 {
        let (m, n) = (self.mp.mf(), self.mp.nf());
        (n - 2.0) / ((n - 1.0) * (n - 1.0) * 4.0 * (m * m + 3.0 * m + 1.0))
    }

    pub fn q2(&self) -> PhasePoint {
        let x = 1.0 / (self.mp.nf() - 1.0);
        let z = self.z_q2();
        let b = self.mp.mf() + 1.0;
        PhasePoint::from_array([0.0, x, x, 0.0, b * b * z, z, b * z, 0.0])
    }

    /// Member of the `q0` family; `None` in the steady case.
    pub fn q0(&self, z1: f64) -> Option<PhasePoint> {
        if self.mp.epsilon() == 0 {
            return None;
        }
        let n = self.mp.nf();
        let x = 1.0 / n;
        Some(PhasePoint::from_array([
            x,
            x,
            x,
            z1,
            0.0,
            0.0,
            0.0,
            2.0 / (n * self.mp.eps()),
        ]))
    }

    pub fn origin(&self, mu2: f64) -> PhasePoint {
        PhasePoint::from_array([0.0, 0.0, 0.0, mu2, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn u1(&self) -> PhasePoint {
        PhasePoint::from_array([1.0 / 3.0, 1.0 / 3.0, 0.0, 1.0, 1.0 / 9.0, 0.0, 0.0, 0.0])
    }

    /// Representative point; families use `free` for `Z1`.
    pub fn point(&self, id: CriticalId, free: f64) -> Option<PhasePoint> {
        Some(match id {
            CriticalId::P0 => PhasePoint::P0,
            CriticalId::P1 => self.p1(),
            CriticalId::P2 => self.p2(),
            CriticalId::Q1 => self.q1(),
            CriticalId::Q2 => self.q2(),
            CriticalId::Q0 => return self.q0(free),
            CriticalId::Origin => self.origin(free),
            CriticalId::U1 => self.u1(),
        })
    }

    /// Nearest catalog point in the sup norm (families are matched in `Z1`).
    pub fn locate(&self, p: &PhasePoint) -> Located {
        let mut best: Option<Located> = None;
        for id in CriticalId::ALL {
            let Some(c) = self.point(id, p.z1.max(0.0)) else {
                continue;
            };
            let d = p.dist_inf(&c);
            if best.is_none_or(|b| d < b.distance) {
                best = Some(Located {
                    id,
                    distance: d,
                    point: c,
                });
            }
        }
        best.expect("catalog always contains p0")
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CatalogEntry {
    pub id: CriticalId,
    /// Free parameter used for family members.
    pub free: Option<f64>,
    pub point: PhasePoint,
    pub v_inf: f64,
    pub q: f64,
    pub h_minus_1: f64,
    pub constraint_residual: f64,
}

/// Evaluates `V`, `Q`, `H - 1` and the constraint residual at every catalog
/// point; family members at `z1 in {0, 0.5, 1}`.
pub fn catalog_audit(mp: &ModelParams) -> Vec<CatalogEntry> {
    let cat = Catalog::new(mp);
    let mut out = Vec::new();
    for id in CriticalId::ALL {
        let frees: Vec<Option<f64>> = if id.is_family() {
            vec![Some(0.0), Some(0.5), Some(1.0)]
        } else {
            vec![None]
        };
        for free in frees {
            let Some(p) = cat.point(id, free.unwrap_or(0.0)) else {
                continue;
            };
            let s = phase::derived_scalars(&p, mp);
            out.push(CatalogEntry {
                id,
                free,
                point: p,
                v_inf: phase::vector_field(&p, mp).max_abs(),
                q: s.q,
                h_minus_1: s.h - 1.0,
                constraint_residual: phase::constraint_residual(&p),
            });
        }
    }
    out
}

impl CatalogEntry {
    /// Whether the entry meets the catalog invariants at tolerance `tol`.
    /// The origin family is critical but sits on `Q = -1`.
    pub fn passes(&self, tol: f64) -> bool {
        let q_ok = match self.id {
            CriticalId::Origin => (self.q + 1.0).abs() <= tol,
            _ => self.q.abs() <= tol,
        };
        self.v_inf <= tol && q_ok && self.constraint_residual.abs() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p2_hand_values() {
        let mp = ModelParams::new(1, 1, 0).unwrap();
        let p = Catalog::new(&mp).p2();
        let want = [
            1.0 / 7.0,
            1.0 / 7.0,
            1.0 / 7.0,
            1.0,
            25.0 / 441.0,
            1.0 / 441.0,
            5.0 / 441.0,
            0.0,
        ];
        assert!(p.dist_inf(&PhasePoint::from_array(want)) < 1e-16);
    }

    #[test]
    fn q_points_hand_values() {
        let mp = ModelParams::new(1, 1, 0).unwrap();
        let c = Catalog::new(&mp);
        assert!((c.z_q1() - 5.0 / 288.0).abs() < 1e-17);
        assert!((c.z_q2() - 1.0 / 144.0).abs() < 1e-17);
        // Q(q1) = 1/6 + 48 z - 1
        assert!((1.0 / 6.0 + 48.0 * c.z_q1() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn q0_m2() {
        let mp = ModelParams::new(2, 1, 1).unwrap();
        let p = Catalog::new(&mp).q0(1.0).unwrap();
        assert!((p.x1 - 1.0 / 11.0).abs() < 1e-17 && (p.w - 2.0 / 11.0).abs() < 1e-17);
        let s = phase::derived_scalars(&p, &mp);
        assert!(s.q.abs() < 1e-15);
    }

    #[test]
    fn audit_passes_for_small_m() {
        for m in 0..=3 {
            for e in 0..=1 {
                let mp = ModelParams::new(m, 1, e).unwrap();
                for entry in catalog_audit(&mp) {
                    assert!(entry.passes(1e-12), "m={m} eps={e} {entry:?}");
                }
            }
        }
    }

    #[test]
    fn locate_family_member() {
        let mp = ModelParams::new(1, 1, 0).unwrap();
        let c = Catalog::new(&mp);
        let mut p = c.origin(0.37);
        p.x1 = 1e-7;
        let l = c.locate(&p);
        assert_eq!(l.id, CriticalId::Origin);
        assert!((l.distance - 1e-7).abs() < 1e-20);
    }
}
