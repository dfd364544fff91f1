//! Dormand-Prince 8(5,3) with the seventh-order continuous extension
//! (Hairer, Nørsett & Wanner). Fixed-size states, no allocation per step.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("non-finite derivative at t = {t}")]
    NonFinite { t: f64 },
    #[error("too many rejected steps at t = {t}")]
    TooManyRejections { t: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
}

/// One accepted step with its interpolant.
#[derive(Clone, Debug)]
pub struct DenseStep<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 8],
}

impl<const N: usize> DenseStep<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let c = &self.cont;
        std::array::from_fn(|i| {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s
        })
    }
}

pub struct Dop853<F, const N: usize> {
    f: F,
    tol: Tolerances,
    t: f64,
    y: [f64; N],
    k1: [f64; N],
    h: f64,
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    std::array::from_fn(|i| {
        let mut s = 0.0;
        for (c, k) in terms {
            s += c * k[i];
        }
        y[i] + h * s
    })
}

fn finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl<F, const N: usize> Dop853<F, N>
where
    F: Fn(&[f64; N]) -> [f64; N],
{
    pub fn new(f: F, t0: f64, y0: [f64; N], tol: Tolerances) -> Self {
        let k1 = f(&y0);
        let mut s = Self {
            f,
            tol,
            t: t0,
            y: y0,
            k1,
            h: 0.0,
            accepted: 0,
            rejected: 0,
            evals: 1,
        };
        s.h = s.initial_step();
        s
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn y(&self) -> &[f64; N] {
        &self.y
    }

    /// Replace the current state (for projections between steps).
    pub fn reset_state(&mut self, y: [f64; N]) {
        self.y = y;
        self.k1 = (self.f)(&y);
        self.evals += 1;
    }

    fn scale(&self, y: &[f64; N], i: usize) -> f64 {
        self.tol.atol + self.tol.rtol * y[i].abs()
    }

    fn initial_step(&mut self) -> f64 {
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.scale(&self.y, i);
            dnf += (self.k1[i] / sk).powi(2);
            dny += (self.y[i] / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
            1e-6
        } else {
            (dny / dnf).sqrt() * 0.01
        };
        h = h.min(self.tol.h_max);
        let y1 = axpy(&self.y, h, &[(1.0, &self.k1)]);
        let k2 = (self.f)(&y1);
        self.evals += 1;
        let mut der2 = 0.0;
        for i in 0..N {
            der2 += ((k2[i] - self.k1[i]) / self.scale(&self.y, i)).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 {
            (h * 1e-3).max(1e-6)
        } else {
            (0.01 / der12).powf(1.0 / 8.0)
        };
        (100.0 * h).min(h1).min(self.tol.h_max)
    }

    /// Take one accepted step, never passing `t_end`.
    pub fn step(&mut self, t_end: f64) -> Result<DenseStep<N>, StepError> {
        let mut rejections = 0;
        let mut last_rejected = false;
        loop {
            let mut h = self.h.min(self.tol.h_max);
            if self.t + h >= t_end {
                h = t_end - self.t;
            }
            if h.abs() <= 10.0 * f64::EPSILON * self.t.abs().max(1.0) {
                return Err(StepError::StepUnderflow { t: self.t });
            }
            let (err, y_new, k) = self.attempt(h);
            if !finite(&y_new) || !err.is_finite() {
                // treat as a rejection with a drastic cut
                self.h = h * 0.1;
                rejections += 1;
                self.rejected += 1;
                if rejections > 60 {
                    return Err(StepError::NonFinite { t: self.t });
                }
                last_rejected = true;
                continue;
            }
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 1.0 / 0.333);
            let mut h_new = h / fac;
            if err <= 1.0 {
                let k_new = (self.f)(&y_new);
                self.evals += 1;
                if !finite(&k_new) {
                    return Err(StepError::NonFinite { t: self.t + h });
                }
                let dense = self.dense(h, &y_new, &k_new, &k);
                if last_rejected {
                    h_new = h_new.min(h);
                }
                self.t += h;
                self.y = y_new;
                self.k1 = k_new;
                self.h = h_new;
                self.accepted += 1;
                return Ok(dense);
            }
            self.rejected += 1;
            rejections += 1;
            last_rejected = true;
            if rejections > 100 {
                return Err(StepError::TooManyRejections { t: self.t });
            }
            self.h = h / (1.0 / 0.333f64).min(fac11 / 0.9);
        }
    }

    #[allow(clippy::type_complexity)]
    fn attempt(&mut self, h: f64) -> (f64, [f64; N], [[f64; N]; 12]) {
        use coef::*;
        let f = &self.f;
        let y = &self.y;
        let k1 = self.k1;
        let k2 = f(&axpy(y, h, &[(A21, &k1)]));
        let k3 = f(&axpy(y, h, &[(A31, &k1), (A32, &k2)]));
        let k4 = f(&axpy(y, h, &[(A41, &k1), (A43, &k3)]));
        let k5 = f(&axpy(y, h, &[(A51, &k1), (A53, &k3), (A54, &k4)]));
        let k6 = f(&axpy(y, h, &[(A61, &k1), (A64, &k4), (A65, &k5)]));
        let k7 = f(&axpy(
            y,
            h,
            &[(A71, &k1), (A74, &k4), (A75, &k5), (A76, &k6)],
        ));
        let k8 = f(&axpy(
            y,
            h,
            &[(A81, &k1), (A84, &k4), (A85, &k5), (A86, &k6), (A87, &k7)],
        ));
        let k9 = f(&axpy(
            y,
            h,
            &[
                (A91, &k1),
                (A94, &k4),
                (A95, &k5),
                (A96, &k6),
                (A97, &k7),
                (A98, &k8),
            ],
        ));
        let k10 = f(&axpy(
            y,
            h,
            &[
                (A101, &k1),
                (A104, &k4),
                (A105, &k5),
                (A106, &k6),
                (A107, &k7),
                (A108, &k8),
                (A109, &k9),
            ],
        ));
        let k11 = f(&axpy(
            y,
            h,
            &[
                (A111, &k1),
                (A114, &k4),
                (A115, &k5),
                (A116, &k6),
                (A117, &k7),
                (A118, &k8),
                (A119, &k9),
                (A1110, &k10),
            ],
        ));
        let k12 = f(&axpy(
            y,
            h,
            &[
                (A121, &k1),
                (A124, &k4),
                (A125, &k5),
                (A126, &k6),
                (A127, &k7),
                (A128, &k8),
                (A129, &k9),
                (A1210, &k10),
                (A1211, &k11),
            ],
        ));
        self.evals += 11;
        let y_new = axpy(
            y,
            h,
            &[
                (B1, &k1),
                (B6, &k6),
                (B7, &k7),
                (B8, &k8),
                (B9, &k9),
                (B10, &k10),
                (B11, &k11),
                (B12, &k12),
            ],
        );
        let (mut err, mut err2) = (0.0, 0.0);
        for i in 0..N {
            let sk = self.tol.atol + self.tol.rtol * y[i].abs().max(y_new[i].abs());
            let incr = B1 * k1[i]
                + B6 * k6[i]
                + B7 * k7[i]
                + B8 * k8[i]
                + B9 * k9[i]
                + B10 * k10[i]
                + B11 * k11[i]
                + B12 * k12[i];
            let e2 = incr - BHH1 * k1[i] - BHH2 * k9[i] - BHH3 * k12[i];
            err2 += (e2 / sk).powi(2);
            let e = ER1 * k1[i]
                + ER6 * k6[i]
                + ER7 * k7[i]
                + ER8 * k8[i]
                + ER9 * k9[i]
                + ER10 * k10[i]
                + ER11 * k11[i]
                + ER12 * k12[i];
            err += (e / sk).powi(2);
        }
        let mut deno = err + 0.01 * err2;
        if deno <= 0.0 {
            deno = 1.0;
        }
        let err = h.abs() * err * (1.0 / (deno * N as f64)).sqrt();
        (
            err,
            y_new,
            [k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12],
        )
    }

    fn dense(
        &mut self,
        h: f64,
        y_new: &[f64; N],
        k_new: &[f64; N],
        k: &[[f64; N]; 12],
    ) -> DenseStep<N> {
        use coef::*;
        let y = &self.y;
        let [k1, _, _, _, _, k6, k7, k8, k9, k10, k11, k12] = k;
        let ydiff: [f64; N] = std::array::from_fn(|i| y_new[i] - y[i]);
        let bspl: [f64; N] = std::array::from_fn(|i| h * k1[i] - ydiff[i]);
        let c3: [f64; N] = std::array::from_fn(|i| ydiff[i] - h * k_new[i] - bspl[i]);
        let comb = |d: [f64; 8]| -> [f64; N] {
            std::array::from_fn(|i| {
                d[0] * k1[i]
                    + d[1] * k6[i]
                    + d[2] * k7[i]
                    + d[3] * k8[i]
                    + d[4] * k9[i]
                    + d[5] * k10[i]
                    + d[6] * k11[i]
                    + d[7] * k12[i]
            })
        };
        let mut c4 = comb([D41, D46, D47, D48, D49, D410, D411, D412]);
        let mut c5 = comb([D51, D56, D57, D58, D59, D510, D511, D512]);
        let mut c6 = comb([D61, D66, D67, D68, D69, D610, D611, D612]);
        let mut c7 = comb([D71, D76, D77, D78, D79, D710, D711, D712]);
        let f = &self.f;
        let k14 = f(&axpy(
            y,
            h,
            &[
                (A141, k1),
                (A147, k7),
                (A148, k8),
                (A149, k9),
                (A1410, k10),
                (A1411, k11),
                (A1412, k12),
                (A1413, k_new),
            ],
        ));
        let k15 = f(&axpy(
            y,
            h,
            &[
                (A151, k1),
                (A156, k6),
                (A157, k7),
                (A158, k8),
                (A1511, k11),
                (A1512, k12),
                (A1513, k_new),
                (A1514, &k14),
            ],
        ));
        let k16 = f(&axpy(
            y,
            h,
            &[
                (A161, k1),
                (A166, k6),
                (A167, k7),
                (A168, k8),
                (A169, k9),
                (A1613, k_new),
                (A1614, &k14),
                (A1615, &k15),
            ],
        ));
        self.evals += 3;
        for i in 0..N {
            c4[i] = h * (c4[i] + D413 * k_new[i] + D414 * k14[i] + D415 * k15[i] + D416 * k16[i]);
            c5[i] = h * (c5[i] + D513 * k_new[i] + D514 * k14[i] + D515 * k15[i] + D516 * k16[i]);
            c6[i] = h * (c6[i] + D613 * k_new[i] + D614 * k14[i] + D615 * k15[i] + D616 * k16[i]);
            c7[i] = h * (c7[i] + D713 * k_new[i] + D714 * k14[i] + D715 * k15[i] + D716 * k16[i]);
        }
        DenseStep {
            t0: self.t,
            h,
            y0: *y,
            y1: *y_new,
            cont: [*y, ydiff, bspl, c3, c4, c5, c6, c7],
        }
    }
}

#[rustfmt::skip]
#[allow(clippy::excessive_precision, clippy::unreadable_literal)]
mod coef {
    pub const A21: f64 = 5.26001519587677318785587544488e-2;
    pub const A31: f64 = 1.97250569845378994544595329183e-2;
    pub const A32: f64 = 5.91751709536136983633785987549e-2;
    pub const A41: f64 = 2.95875854768068491816892993775e-2;
    pub const A43: f64 = 8.87627564304205475450678981324e-2;
    pub const A51: f64 = 2.41365134159266685502369798665e-1;
    pub const A53: f64 = -8.84549479328286085344864962717e-1;
    pub const A54: f64 = 9.24834003261792003115737966543e-1;
    pub const A61: f64 = 3.7037037037037037037037037037e-2;
    pub const A64: f64 = 1.70828608729473871279604482173e-1;
    pub const A65: f64 = 1.25467687566822425016691814123e-1;
    pub const A71: f64 = 3.7109375e-2;
    pub const A74: f64 = 1.70252211019544039314978060272e-1;
    pub const A75: f64 = 6.02165389804559606850219397283e-2;
    pub const A76: f64 = -1.7578125e-2;
    pub const A81: f64 = 3.70920001185047927108779319836e-2;
    pub const A84: f64 = 1.70383925712239993810214054705e-1;
    pub const A85: f64 = 1.07262030446373284651809199168e-1;
    pub const A86: f64 = -1.53194377486244017527936158236e-2;
    pub const A87: f64 = 8.27378916381402288758473766002e-3;
    pub const A91: f64 = 6.24110958716075717114429577812e-1;
    pub const A94: f64 = -3.36089262944694129406857109825e0;
    pub const A95: f64 = -8.68219346841726006818189891453e-1;
    pub const A96: f64 = 2.75920996994467083049415600797e1;
    pub const A97: f64 = 2.01540675504778934086186788979e1;
    pub const A98: f64 = -4.34898841810699588477366255144e1;
    pub const A101: f64 = 4.77662536438264365890433908527e-1;
    pub const A104: f64 = -2.48811461997166764192642586468e0;
    pub const A105: f64 = -5.90290826836842996371446475743e-1;
    pub const A106: f64 = 2.12300514481811942347288949897e1;
    pub const A107: f64 = 1.52792336328824235832596922938e1;
    pub const A108: f64 = -3.32882109689848629194453265587e1;
    pub const A109: f64 = -2.03312017085086261358222928593e-2;
    pub const A111: f64 = -9.3714243008598732571704021658e-1;
    pub const A114: f64 = 5.18637242884406370830023853209e0;
    pub const A115: f64 = 1.09143734899672957818500254654e0;
    pub const A116: f64 = -8.14978701074692612513997267357e0;
    pub const A117: f64 = -1.85200656599969598641566180701e1;
    pub const A118: f64 = 2.27394870993505042818970056734e1;
    pub const A119: f64 = 2.49360555267965238987089396762e0;
    pub const A1110: f64 = -3.0467644718982195003823669022e0;
    pub const A121: f64 = 2.27331014751653820792359768449e0;
    pub const A124: f64 = -1.05344954667372501984066689879e1;
    pub const A125: f64 = -2.00087205822486249909675718444e0;
    pub const A126: f64 = -1.79589318631187989172765950534e1;
    pub const A127: f64 = 2.79488845294199600508499808837e1;
    pub const A128: f64 = -2.85899827713502369474065508674e0;
    pub const A129: f64 = -8.87285693353062954433549289258e0;
    pub const A1210: f64 = 1.23605671757943030647266201528e1;
    pub const A1211: f64 = 6.43392746015763530355970484046e-1;

    pub const A141: f64 = 5.61675022830479523392909219681e-2;
    pub const A147: f64 = 2.53500210216624811088794765333e-1;
    pub const A148: f64 = -2.46239037470802489917441475441e-1;
    pub const A149: f64 = -1.24191423263816360469010140626e-1;
    pub const A1410: f64 = 1.5329179827876569731206322685e-1;
    pub const A1411: f64 = 8.20105229563468988491666602057e-3;
    pub const A1412: f64 = 7.56789766054569976138603589584e-3;
    pub const A1413: f64 = -8.298e-3;
    pub const A151: f64 = 3.18346481635021405060768473261e-2;
    pub const A156: f64 = 2.83009096723667755288322961402e-2;
    pub const A157: f64 = 5.35419883074385676223797384372e-2;
    pub const A158: f64 = -5.49237485713909884646569340306e-2;
    pub const A1511: f64 = -1.08347328697249322858509316994e-4;
    pub const A1512: f64 = 3.82571090835658412954920192323e-4;
    pub const A1513: f64 = -3.40465008687404560802977114492e-4;
    pub const A1514: f64 = 1.41312443674632500278074618366e-1;
    pub const A161: f64 = -4.28896301583791923408573538692e-1;
    pub const A166: f64 = -4.69762141536116384314449447206e0;
    pub const A167: f64 = 7.68342119606259904184240953878e0;
    pub const A168: f64 = 4.06898981839711007970213554331e0;
    pub const A169: f64 = 3.56727187455281109270669543021e-1;
    pub const A1613: f64 = -1.39902416515901462129418009734e-3;
    pub const A1614: f64 = 2.9475147891527723389556272149e0;
    pub const A1615: f64 = -9.15095847217987001081870187138e0;

    pub const B1: f64 = 5.42937341165687622380535766363e-2;
    pub const B6: f64 = 4.45031289275240888144113950566e0;
    pub const B7: f64 = 1.89151789931450038304281599044e0;
    pub const B8: f64 = -5.8012039600105847814672114227e0;
    pub const B9: f64 = 3.1116436695781989440891606237e-1;
    pub const B10: f64 = -1.52160949662516078556178806805e-1;
    pub const B11: f64 = 2.01365400804030348374776537501e-1;
    pub const B12: f64 = 4.47106157277725905176885569043e-2;

    pub const BHH1: f64 = 0.244094488188976377952755905512e0;
    pub const BHH2: f64 = 0.733846688281611857341361741547e0;
    pub const BHH3: f64 = 0.220588235294117647058823529412e-1;

    pub const ER1: f64 = 0.1312004499419488073250102996e-1;
    pub const ER6: f64 = -0.1225156446376204440720569753e1;
    pub const ER7: f64 = -0.4957589496572501915214079952e0;
    pub const ER8: f64 = 0.1664377182454986536961530415e1;
    pub const ER9: f64 = -0.3503288487499736816886487290e0;
    pub const ER10: f64 = 0.3341791187130174790297318841e0;
    pub const ER11: f64 = 0.8192320648511571246570742613e-1;
    pub const ER12: f64 = -0.2235530786388629525884427845e-1;

    pub const D41: f64 = -0.84289382761090128651353491142e1;
    pub const D46: f64 = 0.56671495351937776962531783590e0;
    pub const D47: f64 = -0.30689499459498916912797304727e1;
    pub const D48: f64 = 0.23846676565120698287728149680e1;
    pub const D49: f64 = 0.21170345824450282767155149946e1;
    pub const D410: f64 = -0.87139158377797299206789907490e0;
    pub const D411: f64 = 0.22404374302607882758541771650e1;
    pub const D412: f64 = 0.63157877876946881815570249290e0;
    pub const D413: f64 = -0.88990336451333310820698117400e-1;
    pub const D414: f64 = 0.18148505520854727256656404962e2;
    pub const D415: f64 = -0.91946323924783554000451984436e1;
    pub const D416: f64 = -0.44360363875948939664310572000e1;

    pub const D51: f64 = 0.10427508642579134603413151009e2;
    pub const D56: f64 = 0.24228349177525818288430175319e3;
    pub const D57: f64 = 0.16520045171727028198505394887e3;
    pub const D58: f64 = -0.37454675472269020279518312152e3;
    pub const D59: f64 = -0.22113666853125306036270938578e2;
    pub const D510: f64 = 0.77334326684722638389603898808e1;
    pub const D511: f64 = -0.30674084731089398182061213626e2;
    pub const D512: f64 = -0.93321305264302278729567221706e1;
    pub const D513: f64 = 0.15697238121770843886131091075e2;
    pub const D514: f64 = -0.31139403219565177677282850411e2;
    pub const D515: f64 = -0.93529243588444783865713862664e1;
    pub const D516: f64 = 0.35816841486394083752465898540e2;

    pub const D61: f64 = 0.19985053242002433820987653617e2;
    pub const D66: f64 = -0.38703730874935176555105901742e3;
    pub const D67: f64 = -0.18917813819516756882830838328e3;
    pub const D68: f64 = 0.52780815920542364900561016686e3;
    pub const D69: f64 = -0.11573902539959630126141871134e2;
    pub const D610: f64 = 0.68812326946963000169666922661e1;
    pub const D611: f64 = -0.10006050966910838403183860980e1;
    pub const D612: f64 = 0.77771377980534432092869265740e0;
    pub const D613: f64 = -0.27782057523535084065932004339e1;
    pub const D614: f64 = -0.60196695231264120758267380846e2;
    pub const D615: f64 = 0.84320405506677161018159903784e2;
    pub const D616: f64 = 0.11992291136182789328035130030e2;

    pub const D71: f64 = -0.25693933462703749003312586129e2;
    pub const D76: f64 = -0.15418974869023643374053993627e3;
    pub const D77: f64 = -0.23152937917604549567536039109e3;
    pub const D78: f64 = 0.35763911791061412378285349910e3;
    pub const D79: f64 = 0.93405324183624310003907691704e2;
    pub const D710: f64 = -0.37458323136451633156875139351e2;
    pub const D711: f64 = 0.10409964950896230045147246184e3;
    pub const D712: f64 = 0.29840293426660503123344363579e2;
    pub const D713: f64 = -0.43533456590011143754432175058e2;
    pub const D714: f64 = 0.96324553959188282948394950600e2;
    pub const D715: f64 = -0.39177261675615439165231486172e2;
    pub const D716: f64 = -0.14972683625798562581422125276e3;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol(rtol: f64) -> Tolerances {
        Tolerances {
            rtol,
            atol: rtol * 1e-2,
            h_max: f64::INFINITY,
        }
    }

    fn run_osc(rtol: f64) -> [f64; 2] {
        let mut s = Dop853::new(|y: &[f64; 2]| [y[1], -y[0]], 0.0, [1.0, 0.0], tol(rtol));
        while s.t() < 10.0 {
            s.step(10.0).unwrap();
        }
        *s.y()
    }

    #[test]
    fn harmonic_oscillator() {
        let y = run_osc(1e-12);
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn dense_output_matches_exact() {
        let mut s = Dop853::new(|y: &[f64; 1]| [y[0]], 0.0, [1.0], tol(1e-12));
        let mut worst: f64 = 0.0;
        while s.t() < 3.0 {
            let d = s.step(3.0).unwrap();
            for j in 1..8 {
                let t = d.t0 + d.h * j as f64 / 8.0;
                worst = worst.max((d.eval(t)[0] - t.exp()).abs() / t.exp());
            }
        }
        assert!(worst < 1e-10, "dense error {worst}");
    }

    #[test]
    fn error_scales_with_order() {
        let exact = [10f64.cos(), -10f64.sin()];
        let err = |r| {
            let y = run_osc(r);
            ((y[0] - exact[0]).powi(2) + (y[1] - exact[1]).powi(2)).sqrt()
        };
        let e1 = err(1e-6);
        let e2 = err(1e-8);
        assert!(e2 < e1);
        assert!(e2 < 1e-7);
    }
}
