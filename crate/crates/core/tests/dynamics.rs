mod common;

use std::f64::consts::PI;

use nalgebra::DVector;
use nmodes_core::dynamics::{accelerations, energy, integrate, propagate, State, StepControl};
use nmodes_core::models::{ModelKind, ModelSpec, SpringMassModel};
use nmodes_core::Error;
use rand::rngs::StdRng;
use rand::SeedableRng;

#[test]
fn equilibrium_trajectory_is_constant() {
    let model = ModelSpec::reference(ModelKind::Pcc, 3).build().unwrap();
    let start = State::at_rest(DVector::zeros(3));
    let traj = integrate(&model, &start, 1.0, &StepControl::default(), 512).unwrap();
    assert!(traj.states.iter().all(|s| s.q.amax() == 0.0 && s.qd.amax() == 0.0));
}

#[test]
fn linear_oscillator_returns_after_one_period() {
    let w = 7.0;
    let model = SpringMassModel::scalar(w * w, 0.0).unwrap();
    let a = 0.3;
    let end = propagate(&model, &State::at_rest(DVector::from_element(1, a)), 2.0 * PI / w, &StepControl::default()).unwrap();
    assert!((end.state.q[0] - a).abs() < 1e-8);
    assert!(end.state.qd[0].abs() < 1e-8);
}

#[test]
fn trajectory_grid_and_energy_samples() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let start = State::new(DVector::from_vec(vec![0.4, -0.2]), DVector::from_vec(vec![1.0, 0.5])).unwrap();
    let traj = integrate(&model, &start, 0.7, &StepControl::default(), 300).unwrap();
    assert_eq!(traj.len(), 300);
    assert_eq!(traj.times[0], 0.0);
    let dt = 0.7 / 299.0;
    for (k, t) in traj.times.iter().enumerate() {
        assert!((t - k as f64 * dt).abs() < 1e-9 * dt);
    }
    assert_eq!(traj.states[0], start);
    for (s, e) in traj.states.iter().zip(&traj.energy_samples) {
        let recomputed = energy(&model, s).unwrap();
        assert!((recomputed - e).abs() <= 1e-12 * e.abs().max(1e-300));
    }
    assert!(traj.relative_energy_drift() < 1e-8);
}

#[test]
fn rigid_chain_small_perturbation_conserves_energy() {
    let model = ModelSpec::reference(ModelKind::RigidChain, 10).build().unwrap();
    let mut rng = StdRng::seed_from_u64(7);
    let start = common::random_state(&model, 1e-2, &mut rng);
    let traj = integrate(&model, &start, 10.0, &StepControl::default(), 200).unwrap();
    assert!(traj.relative_energy_drift() < 1e-8, "{}", traj.relative_energy_drift());
}

#[test]
fn random_states_conserve_energy() {
    let mut rng = StdRng::seed_from_u64(11);
    for n in 1..=5 {
        let model = ModelSpec::reference(ModelKind::Pcc, n).build().unwrap();
        for _ in 0..3 {
            let e = rand::Rng::random_range(&mut rng, 0.05..1.0);
            let start = common::random_state(&model, e, &mut rng);
            assert!((energy(&model, &start).unwrap() - e).abs() < 1e-12);
            let traj = integrate(&model, &start, 5.0, &StepControl::default(), 100).unwrap();
            assert!(traj.relative_energy_drift() < 1e-8, "n={n}: {}", traj.relative_energy_drift());
        }
    }
}

#[test]
fn contract_violations_are_errors() {
    let model = ModelSpec::reference(ModelKind::Pcc, 2).build().unwrap();
    let wrong = State::at_rest(DVector::zeros(3));
    assert!(matches!(energy(&model, &wrong), Err(Error::DimensionMismatch { .. })));
    assert!(matches!(accelerations(&model, &wrong), Err(Error::DimensionMismatch { .. })));
    let ok = State::at_rest(DVector::zeros(2));
    assert!(integrate(&model, &ok, 0.0, &StepControl::default(), 10).is_err());
    assert!(integrate(&model, &ok, -1.0, &StepControl::default(), 10).is_err());
    assert!(State::new(DVector::zeros(2), DVector::zeros(1)).is_err());
    assert!(State::new(DVector::from_element(1, f64::NAN), DVector::zeros(1)).is_err());
}

#[test]
fn runaway_dynamics_report_an_error() {
    // a negative quartic term makes the oscillator escape to infinity
    let model = SpringMassModel::scalar(1.0, -50.0).unwrap();
    let start = State::at_rest(DVector::from_element(1, 1.0));
    let result = propagate(&model, &start, 10.0, &StepControl::default());
    assert!(result.is_err());
}
