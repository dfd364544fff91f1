use std::f64::consts::{FRAC_PI_2, PI};

use cohom1::asymptotics::catalog::Catalog;
use cohom1::asymptotics::{cross_check_t_system, reconstruct, AsymptoticLabel, BaseLabel};
use cohom1::integrate::{integrate, monitor_drift, IntegratorConfig, Start, Status};
use cohom1::phase::{self, derived_scalars};
use cohom1::run::{run, RunSpec};
use cohom1::ModelParams;

fn mp(m: u32, k: u32, e: u8) -> ModelParams {
    ModelParams::new(m, k, e).unwrap()
}

#[test]
fn theta_zero_keeps_fubini_study_symmetry() {
    for k in [1, 2, 3] {
        let r = run(&RunSpec::new(mp(1, k, 0), 0.0, 0.0, 0.0)).unwrap();
        let worst = r
            .trajectory
            .samples
            .iter()
            .map(|s| (s.p.x2 - s.p.x3).abs().max((s.p.z2 - s.p.z3).abs()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-9, "k={k}: {worst:e}");
        let c = &r.classification;
        assert!((c.nu2 - 1.0).abs() < 1e-9);
        assert_eq!(c.base_label, BaseLabel::FubiniStudy);
    }
}

#[test]
fn steady_runs_have_no_w() {
    let r = run(&RunSpec::new(mp(2, 3, 0), 1.0, 3.0, 0.0)).unwrap();
    assert_eq!(r.drift.max_abs_w, 0.0);
}

#[test]
fn runs_stay_in_rs() {
    for (m, k, e, th, s4, s5) in [
        (1, 1, 0, FRAC_PI_2, 1.0, 0.0),
        (1, 2, 1, 0.7, 0.5, 0.5),
        (2, 5, 0, PI, 0.0, 0.0),
        (0, 3, 0, PI, 20.0, 0.0),
    ] {
        let model = mp(m, k, e);
        let r = run(&RunSpec::new(model, th, s4, s5)).unwrap();
        for s in &r.trajectory.samples {
            let d = derived_scalars(&s.p, &model);
            // incomplete runs blow up, so the band is relative to G
            let band = 1e-9 * d.g.max(1.0);
            assert!(d.q <= band && d.h <= 1.0 + band, "eta {}: {d:?}", s.eta);
            assert!(s.p.z1 >= -1e-9 && s.p.z2 >= -1e-9 && s.p.z3 >= -1e-9);
        }
    }
}

#[test]
fn reconstruction_agrees_with_the_t_system() {
    for (k, e, th, s4, s5) in [(1, 1, 0.0, 0.0, 1.0), (1, 0, FRAC_PI_2, 1.0, 0.0)] {
        let model = mp(1, k, e);
        let r = run(&RunSpec::new(model, th, s4, s5)).unwrap();
        let c = cross_check_t_system(&r.trajectory, &model).unwrap();
        assert!(c.rows_compared > 3 && c.max_rel_deviation <= 1e-5, "{c:?}");
        let prof = reconstruct(&r.trajectory, &model).unwrap();
        assert!(prof.rows.windows(2).all(|w| w[1].t > w[0].t));
    }
}

#[test]
fn constant_trajectory_has_no_drift() {
    let model = mp(1, 3, 0);
    let p2 = Catalog::new(&model).p2();
    let tr = integrate(
        Start::at(0.0, p2),
        &model,
        &IntegratorConfig::default(),
        &[],
    );
    assert!(
        matches!(tr.status, Status::ConvergedToCriticalPoint { .. }),
        "{:?}",
        tr.status
    );
    let d = monitor_drift(&tr, true);
    assert!(d.max_constraint_residual < 1e-16);
    assert!(d.max_einstein_drift.unwrap() < 1e-15);
    assert!(phase::q_flow_consistency(&p2, &model).abs() < 1e-15);
}

#[test]
fn expanding_labels() {
    let r = run(&RunSpec::new(mp(2, 1, 1), 1.0, 0.0, 2.0)).unwrap();
    assert_eq!(r.classification.label, AsymptoticLabel::AH);
    let r = run(&RunSpec::new(mp(1, 3, 1), PI, 50.0, 1.0)).unwrap();
    assert_eq!(r.classification.label, AsymptoticLabel::AC);
}
