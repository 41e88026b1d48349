use std::sync::Arc;

use super::*;
use crate::anisotropy::Anisotropy;
use crate::curve::Topology;
use crate::Vec2;

fn square_aniso() -> Arc<Anisotropy> {
    Arc::new(Anisotropy::square())
}

fn wulff(r: f64) -> AdmissibleCurve {
    let pts = [Vec2::new(-r, r), Vec2::new(r, r), Vec2::new(r, -r), Vec2::new(-r, -r)];
    AdmissibleCurve::from_vertices(square_aniso(), Topology::Closed, &pts, None).unwrap()
}

fn l_shape(step: f64) -> AdmissibleCurve {
    let pts = [
        Vec2::new(0.0, 0.0),
        Vec2::new(0.0, 2.0),
        Vec2::new(1.0, 2.0),
        Vec2::new(1.0, 2.0 - step),
        Vec2::new(2.0, 2.0 - step),
        Vec2::new(2.0, 0.0),
    ];
    AdmissibleCurve::from_vertices(square_aniso(), Topology::Closed, &pts, None).unwrap()
}

fn params(alpha: f64) -> FlowParams {
    FlowParams::new(alpha, 100.0).unwrap()
}

#[test]
fn wulff_rates_follow_radius_ode() {
    for (r, alpha) in [(2.0, 1.0), (0.5, 1.0), (1.3, 0.2)] {
        let rates = rhs(&FlowState::new(wulff(r)), &params(alpha)).unwrap();
        let expected = -1.0 / r + alpha / (r * r * r);
        for x in rates {
            assert!((x - expected).abs() < 1e-12, "{x} vs {expected}");
        }
    }
}

#[test]
fn stationary_square_does_not_move() {
    let rates = rhs(&FlowState::new(wulff(1.0)), &params(1.0)).unwrap();
    assert!(rates.iter().all(|r| r.abs() < 1e-14));
}

#[test]
fn dissipation_rate_of_wulff_square() {
    let c = wulff(2.0);
    let rates = rhs(&FlowState::new(c.clone()), &params(1.0)).unwrap();
    let d = dissipation_rate(&c, &c.lengths(), &rates);
    assert!((d - 4.0 * 0.375f64.powi(2) * 4.0).abs() < 1e-12);
}

#[test]
fn apriori_bounds_for_square() {
    let b = apriori_bounds(&wulff(2.0), 1.0);
    assert!((b.delta1 - 1.0).abs() < 1e-12);
    assert!(b.delta2 > 0.0 && b.t_guarantee > 0.0);
}

#[test]
fn single_step_matches_scalar_decay() {
    let p = params(1.0);
    let opts = IntegratorOptions {
        max_time: 1.0,
        ..Default::default()
    };
    let mut integ = Integrator::new(p, opts);
    let mut s = FlowState::new(wulff(2.0));
    while s.t < 0.5 {
        s = integ.step_until(&s, 0.5).unwrap().0;
    }
    assert_eq!(s.t, 0.5);
    // R' = -1/R + 1/R^3 conserves t = (1/2)(R0^2 - R^2) + (1/2) ln((R0^2 - 1)/(R^2 - 1))
    let r = 2.0 + s.h[0];
    let t = 0.5 * (4.0 - r * r) + 0.5 * ((4.0 - 1.0) / (r * r - 1.0)).ln();
    assert!((t - 0.5).abs() < 1e-7, "{t}");
}

#[test]
fn semigroup_splits_agree() {
    let p = params(0.3);
    let opts = IntegratorOptions {
        max_time: 1.0,
        ..Default::default()
    };
    let run = |from: FlowState, to: f64| {
        let mut integ = Integrator::new(p, opts);
        let mut s = from;
        while s.t < to {
            s = integ.step_until(&s, to).unwrap().0;
        }
        s
    };
    let start = FlowState::new(l_shape(1.0));
    let whole = run(start.clone(), 0.2);
    let half = run(start, 0.05);
    let split = run(half, 0.2);
    for (a, b) in whole.h.iter().zip(&split.h) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn detect_vanishing_rejects_convex_collapse() {
    let c = wulff(1.0);
    let mut s = FlowState::new(c.clone());
    s.h = vec![-1.9999999, 0.0, 0.0, 0.0];
    let th = vanish_thresholds(&c, &IntegratorOptions::default(), 0.0);
    assert!(matches!(
        detect_vanishing(&s, &th),
        Err(FlowError::NonzeroCurvatureCollapse { .. })
    ));
}

#[test]
fn restart_merges_neighbours_of_vanished_step() {
    let c = l_shape(1e-8);
    assert_eq!(c.transitions()[2], 0);
    let state = FlowState::new(c.clone());
    let th = vanish_thresholds(&c, &IntegratorOptions::default(), 0.0);
    assert_eq!(detect_vanishing(&state, &th).unwrap(), Vec::<usize>::new());
    let (next, map) = restart(&state, &[2], &params(0.1)).unwrap();
    assert_eq!(next.reference.len(), 4);
    assert_eq!(map, vec![Some(0), Some(1), None, Some(1), Some(2), Some(3)]);
    assert_eq!(next.reference.curve_index().unwrap(), 1);
    assert_eq!(next.epoch, 1);
    let e0 = elastic_energy(&c, &params(0.1)).unwrap();
    let e1 = elastic_energy(&next.reference, &params(0.1)).unwrap();
    assert!(e1 <= e0 + 1e-6);
}

#[test]
fn restart_without_vanished_segments_is_identity() {
    let c = l_shape(1.0);
    let (next, map) = restart(&FlowState::new(c.clone()), &[], &params(1.0)).unwrap();
    assert_eq!(next.reference.len(), c.len());
    assert!(map.iter().enumerate().all(|(i, m)| *m == Some(i)));
}

#[test]
fn evolve_shrinks_wulff_square_to_stationary_radius() {
    let opts = IntegratorOptions {
        max_time: 60.0,
        sample_stride: 5,
        ..Default::default()
    };
    let traj = evolve(&wulff(2.0), &params(1.0), &opts).unwrap();
    assert_eq!(traj.status, Status::Converged);
    let r = 2.0 + traj.final_state.h[0];
    assert!((r - 1.0).abs() < 1e-4, "{r}");
    let limit = traj.limit.as_ref().unwrap();
    assert!(limit.stationary);
    assert!(dissipation_residual(&traj).unwrap() < 1e-6);
}

#[test]
fn stationary_input_converges_without_motion() {
    let opts = IntegratorOptions {
        max_time: 20.0,
        ..Default::default()
    };
    let traj = evolve(&wulff(1.0), &params(1.0), &opts).unwrap();
    assert_eq!(traj.status, Status::Converged);
    assert!(traj.final_state.h.iter().all(|h| h.abs() < 1e-12));
    assert!(traj.restarts.is_empty());
}

#[test]
fn invalid_options_rejected() {
    let opts = IntegratorOptions {
        rel_tol: 0.0,
        ..Default::default()
    };
    assert!(matches!(
        evolve(&wulff(1.0), &params(1.0), &opts),
        Err(FlowError::InvalidOptions(_))
    ));
}
