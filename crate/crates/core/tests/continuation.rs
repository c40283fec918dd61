mod common;

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use nmodes_core::continuation::{
    bootstrap_first_point, compute_generator, correct, mode_trajectory, predict, shooting_residual,
    ContinuationOptions, ShootingOptions,
};
use nmodes_core::dynamics::{linearize, propagate, MechanicalModel, State, StepControl};
use nmodes_core::models::{ModelKind, ModelSpec, SpringMassModel};

use common::{turning_point_period, SpringPendulum};

fn ctl() -> StepControl {
    StepControl::default()
}

#[test]
fn residual_vanishes_at_equilibrium() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let r = shooting_residual(&model, &DVector::zeros(2), 0.37, &ctl()).unwrap();
    assert!(r.amax() < 1e-14);
}

#[test]
fn linear_oscillator_residuals() {
    let w = 3.0;
    let model = SpringMassModel::scalar(w * w, 0.0).unwrap();
    let q0 = DVector::from_element(1, 0.2);
    let full = shooting_residual(&model, &q0, 2.0 * PI / w, &ctl()).unwrap();
    assert!(full.amax() < 1e-9);
    let half = shooting_residual(&model, &q0, PI / w, &ctl()).unwrap();
    assert!((half[0] - 0.4).abs() < 1e-9 && half[1].abs() < 1e-9);
    assert!(shooting_residual(&model, &q0, 0.0, &ctl()).is_err());
}

#[test]
fn bootstrap_scales_to_linearized_energy() {
    let w = 4.0;
    let model = SpringMassModel::scalar(w * w, 0.0).unwrap();
    let modes = linearize(&model, &DVector::zeros(1)).unwrap();
    let (q0, t) = bootstrap_first_point(&modes, 1, 0.02).unwrap();
    assert!((q0[0] - (0.04f64).sqrt() / w).abs() < 1e-15);
    assert!((t - 2.0 * PI / w).abs() < 1e-15);

    let rigid = ModelSpec::reference(ModelKind::RigidChain, 10).build().unwrap();
    let modes = linearize(&rigid, &DVector::zeros(10)).unwrap();
    let (q0, t) = bootstrap_first_point(&modes, 1, 0.05).unwrap();
    let dq = &q0 - &modes.q_eq;
    assert!((0.5 * dq.dot(&(&modes.stiffness * &dq)) - 0.05).abs() < 1e-12);
    assert!(dq[0] > 0.0);
    assert!((t - modes.period(1)).abs() < 1e-15);
    let (tiny, _) = bootstrap_first_point(&modes, 1, 1e-20).unwrap();
    assert!(tiny.amax() < 1e-7);
    assert!(bootstrap_first_point(&modes, 11, 0.05).is_err());
    assert!(bootstrap_first_point(&modes, 0, 0.05).is_err());
}

#[test]
fn exact_linear_prediction_converges_immediately() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let k = DMatrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 3.0]);
    let model = SpringMassModel::new(m, k, 0.0).unwrap();
    let modes = linearize(&model, &DVector::zeros(2)).unwrap();
    for mode in 1..=2 {
        let (q0, t) = bootstrap_first_point(&modes, mode, 0.1).unwrap();
        let c = correct(&model, &q0, t, 0.1, &ShootingOptions::default()).unwrap();
        assert!(c.point.newton_iters <= 2);
        assert!((c.point.configuration() - &q0).amax() < 1e-9);
        assert!((c.point.period - t).abs() < 1e-9);
    }
}

#[test]
fn linear_tangent_follows_the_mode_shape() {
    let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
    let k = DMatrix::from_row_slice(2, 2, &[5.0, -1.0, -1.0, 3.0]);
    let model = SpringMassModel::new(m, k, 0.0).unwrap();
    let modes = linearize(&model, &DVector::zeros(2)).unwrap();
    let (q0, t) = bootstrap_first_point(&modes, 2, 0.1).unwrap();
    let c = correct(&model, &q0, t, 0.1, &ShootingOptions::default()).unwrap();
    let (qp, tp) = predict(&model, &c, 0.05, 1e-5).unwrap();
    let dir = &qp - &q0;
    let shape = modes.mode_shape(2);
    let cos = dir.dot(&shape) / (dir.norm() * shape.norm());
    assert!(cos > 1.0 - 1e-9);
    assert!((tp - t).abs() < 1e-8 * t);
    let (q_small, _) = predict(&model, &c, 1e-14, 1e-5).unwrap();
    assert!((q_small - &q0).amax() < 1e-12);
}

#[test]
fn linear_branch_keeps_its_period() {
    let model = SpringMassModel::new(
        DMatrix::identity(3, 3),
        // incommensurate, so no other mode shares a period
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 5.0])),
        0.0,
    )
    .unwrap();
    for mode in 1..=3 {
        let options = ContinuationOptions {
            energy_step: 0.1,
            max_energy: 0.5,
            ..Default::default()
        };
        let manifold = compute_generator(&model, &DVector::zeros(3), mode, &options).unwrap();
        assert!(manifold.is_complete());
        assert_eq!(manifold.points.len(), 5);
        let t_lin = 2.0 * PI / [1.0, 2.0, 5.0f64][mode - 1].sqrt();
        for p in &manifold.points {
            assert!((p.period - t_lin).abs() < 1e-8 * t_lin);
        }
    }
}

#[test]
fn resonant_linear_system_reports_branch_point() {
    let model = SpringMassModel::new(
        DMatrix::identity(2, 2),
        DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0])),
        0.0,
    )
    .unwrap();
    let manifold = compute_generator(&model, &DVector::zeros(2), 1, &ContinuationOptions::default()).unwrap();
    assert!(manifold.diagnostic.is_some());
    assert_eq!(manifold.points.len(), 1);
}

#[test]
fn pendulum_periods_match_turning_point_oracle() {
    let pendulum = SpringPendulum::reference();
    let model = ModelSpec::reference(ModelKind::RigidChain, 1).build().unwrap();
    let options = ContinuationOptions {
        energy_step: 0.1,
        max_energy: 0.5,
        ..Default::default()
    };
    let manifold = compute_generator(&model, &DVector::zeros(1), 1, &options).unwrap();
    assert_eq!(manifold.points.len(), 5);
    for p in &manifold.points {
        let oracle = pendulum.period(p.energy);
        assert!((p.period - oracle).abs() < 1e-6 * oracle, "E={} T={} oracle {oracle}", p.energy, p.period);
    }
}

#[test]
fn hardening_oscillator_stiffens_with_energy() {
    let (k, eps) = (4.0, 10.0);
    let model = SpringMassModel::scalar(k, eps).unwrap();
    let options = ContinuationOptions {
        energy_step: 0.25,
        max_energy: 2.0,
        ..Default::default()
    };
    let manifold = compute_generator(&model, &DVector::zeros(1), 1, &options).unwrap();
    let mut last = 0.0;
    for p in &manifold.points {
        let oracle = turning_point_period(1.0, |q| 0.5 * k * q * q + 0.25 * eps * q.powi(4), |q| k * q + eps * q.powi(3), p.energy);
        assert!((p.period - oracle).abs() < 1e-6 * oracle);
        assert!(p.frequency() > last);
        last = p.frequency();
    }
}

#[test]
fn tangent_agrees_with_secant_on_smooth_branch() {
    let model = ModelSpec::reference(ModelKind::RigidChain, 1).build().unwrap();
    let modes = linearize(&model, &DVector::zeros(1)).unwrap();
    let opts = ShootingOptions::default();
    let (q0, t) = bootstrap_first_point(&modes, 1, 0.1).unwrap();
    let a = correct(&model, &q0, t, 0.1, &opts).unwrap();
    let (q1, t1) = predict(&model, &a, 0.1, 1e-5).unwrap();
    let b = correct(&model, &q1, t1, 0.2, &opts).unwrap();
    let (q2, t2) = predict(&model, &b, 0.1, 1e-5).unwrap();
    let c = correct(&model, &q2, t2, 0.3, &opts).unwrap();
    let secant = [c.point.q0[0] - b.point.q0[0], c.point.period - b.point.period];
    let (qt, tt) = predict(&model, &b, 0.1, 1e-5).unwrap();
    let tangent = [qt[0] - b.point.q0[0], tt - b.point.period];
    let cos = (secant[0] * tangent[0] + secant[1] * tangent[1])
        / ((secant[0].powi(2) + secant[1].powi(2)).sqrt() * (tangent[0].powi(2) + tangent[1].powi(2)).sqrt());
    assert!(cos > (15f64).to_radians().cos());
}

#[test]
fn mode_trajectory_samples_the_linear_orbit() {
    let w = 2.5;
    let model = SpringMassModel::scalar(w * w, 0.0).unwrap();
    let options = ContinuationOptions {
        energy_step: 0.1,
        max_energy: 0.1,
        ..Default::default()
    };
    let manifold = compute_generator(&model, &DVector::zeros(1), 1, &options).unwrap();
    let p = &manifold.points[0];
    let traj = mode_trajectory(&model, p, 512, &ctl()).unwrap();
    assert_eq!(traj.sample_count(), 512);
    let a = p.q0[0];
    for (t, s) in traj.trajectory.times.iter().zip(&traj.trajectory.states) {
        assert!((s.q[0] - a * (w * t).cos()).abs() < 1e-8);
    }
    assert_eq!(traj.trajectory.states[0].qd[0], 0.0);
}

#[test]
fn reference_branch_properties() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let options = ContinuationOptions {
        energy_step: 0.05,
        max_energy: 0.3,
        ..Default::default()
    };
    let first = compute_generator(&model, &DVector::zeros(2), 1, &options).unwrap();
    let again = compute_generator(&model, &DVector::zeros(2), 1, &options).unwrap();
    assert_eq!(first, again);
    assert!(first.is_complete());
    assert_eq!(first.points.len(), 6);
    let shooting = ShootingOptions::default();
    let mut prev_e = 0.0;
    for p in &first.points {
        let q0 = p.configuration();
        assert!((p.energy - prev_e - 0.05).abs() < 1e-9);
        prev_e = p.energy;
        assert!((model.potential(&q0) - p.energy).abs() < 1e-12);
        let bound = shooting.residual_bound(&q0);
        let r = shooting_residual(&model, &q0, p.period, &ctl()).unwrap();
        assert!(r.amax() < bound);
        assert!((r.amax() - p.residual_norm).abs() < 1e-12);
        // three periods
        let end = propagate(&model, &State::at_rest(q0.clone()), 3.0 * p.period, &ctl()).unwrap();
        let drift = (&end.state.q - &q0).amax().max(end.state.qd.amax());
        assert!(drift < 1e3 * bound);
        // turning point at half period
        let traj = mode_trajectory(&model, p, 513, &ctl()).unwrap();
        let vmax = traj.trajectory.states.iter().map(|s| s.qd.amax()).fold(0.0, f64::max);
        assert!(traj.trajectory.states[256].qd.amax() < 1e-6 * vmax);
        assert!((&traj.trajectory.last_state().q - &q0).amax() < 10.0 * bound);
    }
}

#[test]
fn invalid_requests_are_rejected() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let q = DVector::zeros(2);
    let options = ContinuationOptions::default();
    assert!(compute_generator(&model, &q, 3, &options).is_err());
    assert!(compute_generator(&model, &q, 0, &options).is_err());
    let bad = ContinuationOptions {
        max_energy: -1.0,
        ..Default::default()
    };
    assert!(compute_generator(&model, &q, 1, &bad).is_err());
}

#[test]
fn last_step_stops_at_max_energy() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let options = ContinuationOptions {
        energy_step: 0.07,
        max_energy: 0.3,
        ..Default::default()
    };
    let m = compute_generator(&model, &DVector::zeros(2), 1, &options).unwrap();
    let energies: Vec<f64> = m.points.iter().map(|p| p.energy).collect();
    assert_eq!(energies.len(), 5);
    assert!((energies[3] - 0.28).abs() < 1e-9);
    assert!((energies[4] - 0.3).abs() < 1e-9);
}

/// Mode 3 of the five-segment arm passes close to another family near
/// 0.3 J; the branch must stay smooth and monotone through it.
#[test]
fn corrector_does_not_jump_between_families() {
    let model = ModelSpec::reference(ModelKind::Pcc, 5).build().unwrap();
    let options = ContinuationOptions {
        max_energy: 0.4,
        ..Default::default()
    };
    let m = compute_generator(&model, &DVector::zeros(5), 3, &options).unwrap();
    assert!(m.is_complete());
    let omegas: Vec<f64> = m.points.iter().map(|p| p.frequency()).collect();
    assert!(omegas.windows(2).all(|w| w[1] < w[0] && w[1] > 0.97 * w[0]), "{omegas:?}");
}
