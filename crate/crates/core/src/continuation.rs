//! Eigenmanifold generators by energy-stepped shooting continuation.
//!
//! A generator point is a zero-velocity configuration `q0` together with
//! the period `T` of the periodic orbit through it. Points are found by
//! Newton iteration on the periodicity residual augmented with an energy
//! constraint, and continued in energy with a tangent predictor.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    energy, integrate, linearize, propagate, replay, LinearModeSet, MechanicalModel, Propagation, State,
    StepControl, Trajectory, DEFAULT_SAMPLES,
};
use crate::error::{Error, Result};

/// Newton settings for the augmented shooting system.
#[derive(Debug, Clone)]
pub struct ShootingOptions {
    pub control: StepControl,
    pub max_iterations: usize,
    /// Relative forward-difference step for the monodromy columns.
    pub fd_step: f64,
    /// Accept when `‖r‖∞ < residual_tolerance · (1 + ‖q0‖∞)`.
    pub residual_tolerance: f64,
    /// Accept when `|E − E_target| < energy_tolerance · max(1, E_target)`.
    pub energy_tolerance: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            control: StepControl::default(),
            max_iterations: 15,
            fd_step: 1e-6,
            residual_tolerance: 1e-8,
            energy_tolerance: 1e-10,
        }
    }
}

impl ShootingOptions {
    pub fn residual_bound(&self, q0: &DVector<f64>) -> f64 {
        self.residual_tolerance * (1.0 + q0.amax())
    }
}

#[derive(Debug, Clone)]
pub struct ContinuationOptions {
    /// Reference energy step `ΔE̅` in J.
    pub energy_step: f64,
    pub max_energy: f64,
    /// Energy of the first point above equilibrium; defaults to `energy_step`.
    pub first_step: Option<f64>,
    /// Give up once the step has been halved this many times below `energy_step`.
    pub max_halvings: u32,
    /// A second singular value below this fraction of the largest flags a
    /// branch point.
    pub branch_tolerance: f64,
    /// Largest accepted ratio of the corrector displacement to the predictor
    /// step, both measured in `q0`. Larger corrections are treated as a
    /// jump to another family and retried with a smaller step.
    pub max_deviation: f64,
    pub shooting: ShootingOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            energy_step: 0.05,
            max_energy: 1.0,
            first_step: None,
            max_halvings: 10,
            branch_tolerance: 1e-5,
            max_deviation: 1.0,
            shooting: ShootingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorPoint {
    pub q0: Vec<f64>,
    #[serde(rename = "T")]
    pub period: f64,
    #[serde(rename = "E")]
    pub energy: f64,
    pub residual_norm: f64,
    pub newton_iters: usize,
}

impl GeneratorPoint {
    pub fn configuration(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.q0)
    }

    pub fn frequency(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSeed {
    pub omega: f64,
    pub eigvec: Vec<f64>,
}

/// Generator of one eigenmanifold, ordered by energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenmanifold {
    pub fingerprint: String,
    pub model: String,
    pub mode_index: usize,
    pub linear_seed: LinearSeed,
    pub equilibrium: Vec<f64>,
    pub energy_step: f64,
    pub max_energy: f64,
    pub predictor: String,
    pub truncated: bool,
    pub diagnostic: Option<String>,
    pub points: Vec<GeneratorPoint>,
}

impl Eigenmanifold {
    pub fn energy_range(&self) -> Option<(f64, f64)> {
        Some((self.points.first()?.energy, self.points.last()?.energy))
    }

    pub fn is_complete(&self) -> bool {
        !self.truncated && self.diagnostic.is_none()
    }
}

/// One period of a nonlinear mode sampled on a uniform time grid.
#[derive(Debug, Clone)]
pub struct ModeTrajectory {
    pub source: GeneratorPoint,
    pub trajectory: Trajectory,
}

impl ModeTrajectory {
    pub fn sample_count(&self) -> usize {
        self.trajectory.len()
    }
}

struct Shot {
    residual: DVector<f64>,
    end: Propagation,
}

fn shoot<M: MechanicalModel + ?Sized>(
    model: &M,
    q0: &DVector<f64>,
    period: f64,
    control: &StepControl,
) -> Result<Shot> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::Domain(format!("period must be positive, got {period}")));
    }
    let start = State::at_rest(q0.clone());
    let end = propagate(model, &start, period, control)?;
    let residual = periodicity_residual(q0, &end.state);
    Ok(Shot { residual, end })
}

fn periodicity_residual(q0: &DVector<f64>, end: &State) -> DVector<f64> {
    let n = q0.len();
    DVector::from_fn(2 * n, |i, _| if i < n { q0[i] - end.q[i] } else { -end.qd[i - n] })
}

/// `r(q0, T) = (q0 − q(T); −q̇(T))` for the orbit starting at rest in `q0`.
pub fn shooting_residual<M: MechanicalModel + ?Sized>(
    model: &M,
    q0: &DVector<f64>,
    period: f64,
    control: &StepControl,
) -> Result<DVector<f64>> {
    crate::dynamics::check_dims(model, q0.len())?;
    Ok(shoot(model, q0, period, control)?.residual)
}

/// `∂r/∂(q0, T)` by forward differences along the base shot's step mesh.
fn shooting_jacobian<M: MechanicalModel + ?Sized>(
    model: &M,
    q0: &DVector<f64>,
    shot: &Shot,
    fd_step: f64,
) -> Result<DMatrix<f64>> {
    let n = q0.len();
    let columns: Vec<DVector<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let h = fd_step * (1.0 + q0[j].abs());
            let mut qp = q0.clone();
            qp[j] += h;
            let end = replay(model, &State::at_rest(qp.clone()), &shot.end.steps)?;
            Ok((periodicity_residual(&qp, &end.state) - &shot.residual) / h)
        })
        .collect::<Result<_>>()?;
    let mut jac = DMatrix::zeros(2 * n, n + 1);
    for (j, col) in columns.iter().enumerate() {
        jac.set_column(j, col);
    }
    for i in 0..n {
        jac[(i, n)] = -shot.end.state.qd[i];
        jac[(n + i, n)] = -shot.end.acceleration[i];
    }
    Ok(jac)
}

/// A corrected point together with the shooting Jacobian near it.
#[derive(Debug, Clone)]
pub struct Correction {
    pub point: GeneratorPoint,
    /// `2n × (n+1)` matrix `[∂r/∂q0, ∂r/∂T]`.
    pub jacobian: DMatrix<f64>,
}

/// Linear-mode seed: `q_eq + α c_i` with linearized energy `energy_step`, and
/// the linear period.
pub fn bootstrap_first_point(
    modes: &LinearModeSet,
    mode_index: usize,
    energy_step: f64,
) -> Result<(DVector<f64>, f64)> {
    if mode_index == 0 || mode_index > modes.len() {
        return Err(Error::Domain(format!(
            "mode index {mode_index} outside 1..={}",
            modes.len()
        )));
    }
    if !(energy_step > 0.0) {
        return Err(Error::Domain(format!("energy step must be positive, got {energy_step}")));
    }
    let c = modes.mode_shape(mode_index);
    let curvature = c.dot(&(&modes.stiffness * &c));
    let alpha = (2.0 * energy_step / curvature).sqrt();
    Ok((&modes.q_eq + c * alpha, modes.period(mode_index)))
}

/// Newton–Raphson on `(r(q0, T); E(q0, 0) − E_target)` with least-squares
/// steps.
pub fn correct<M: MechanicalModel + ?Sized>(
    model: &M,
    q0_pred: &DVector<f64>,
    period_pred: f64,
    energy_target: f64,
    options: &ShootingOptions,
) -> Result<Correction> {
    crate::dynamics::check_dims(model, q0_pred.len())?;
    let n = q0_pred.len();
    let mut q0 = q0_pred.clone();
    let mut period = period_pred;
    let mut jacobian: Option<DMatrix<f64>> = None;
    let mut residual_norm = f64::INFINITY;
    for iteration in 0..=options.max_iterations {
        let shot = shoot(model, &q0, period, &options.control)?;
        let e = model.potential(&q0);
        let energy_error = e - energy_target;
        residual_norm = shot.residual.amax();
        log::trace!("newton {iteration}: |r| = {residual_norm:.3e}, E error = {energy_error:.3e}, T = {period}");
        let converged = residual_norm < options.residual_bound(&q0)
            && energy_error.abs() < options.energy_tolerance * energy_target.max(1.0);
        if converged {
            let jacobian = match jacobian {
                Some(j) => j,
                None => shooting_jacobian(model, &q0, &shot, options.fd_step)?,
            };
            return Ok(Correction {
                point: GeneratorPoint {
                    q0: q0.as_slice().to_vec(),
                    period,
                    energy: e,
                    residual_norm,
                    newton_iters: iteration,
                },
                jacobian,
            });
        }
        if iteration == options.max_iterations {
            break;
        }
        let jac = shooting_jacobian(model, &q0, &shot, options.fd_step)?;
        let mut system = DMatrix::zeros(2 * n + 1, n + 1);
        system.view_mut((0, 0), (2 * n, n + 1)).copy_from(&jac);
        let grad = model.potential_gradient(&q0);
        for j in 0..n {
            system[(2 * n, j)] = grad[j];
        }
        let mut rhs = DVector::zeros(2 * n + 1);
        rhs.rows_mut(0, 2 * n).copy_from(&(-&shot.residual));
        rhs[2 * n] = -energy_error;
        let delta = least_squares(system, &rhs)?;
        q0 += delta.rows(0, n);
        period += delta[n];
        jacobian = Some(jac);
        if !(period > 0.0) || q0.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    Err(Error::NoConvergence {
        iterations: options.max_iterations,
        residual: residual_norm,
    })
}

fn least_squares(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let qr = a.qr();
    let qtb = qr.q().transpose() * b;
    qr.r().solve_upper_triangular(&qtb).ok_or(Error::NoConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })
}

/// Prediction from the null direction of the shooting Jacobian at `last`,
/// scaled so the potential rises by about `energy_step`.
pub fn predict<M: MechanicalModel + ?Sized>(
    model: &M,
    last: &Correction,
    energy_step: f64,
    branch_tolerance: f64,
) -> Result<(DVector<f64>, f64)> {
    let n = last.point.q0.len();
    let q0 = last.point.configuration();
    let (tangent, sigma) = null_direction(&last.jacobian)?;
    if sigma[1] < branch_tolerance * sigma[sigma.len() - 1] {
        return Err(Error::BranchPoint {
            energy: last.point.energy,
        });
    }
    let grad = model.potential_gradient(&q0);
    let slope = grad.dot(&tangent.rows(0, n));
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::BranchPoint {
            energy: last.point.energy,
        });
    }
    let alpha = energy_step / slope;
    Ok((q0 + tangent.rows(0, n) * alpha, last.point.period + alpha * tangent[n]))
}

/// Right singular vector of the smallest singular value, and all singular
/// values in ascending order.
fn null_direction(jac: &DMatrix<f64>) -> Result<(DVector<f64>, Vec<f64>)> {
    let svd = jac.clone().svd(false, true);
    let v_t = svd.v_t.ok_or(Error::Domain("SVD failed".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let tangent = v_t.row(order[0]).transpose();
    Ok((tangent, order.iter().map(|&i| svd.singular_values[i]).collect()))
}

/// Traces the generator of mode `mode_index` (1-based) from the equilibrium
/// `q_eq` up to `options.max_energy`.
pub fn compute_generator<M: MechanicalModel + ?Sized>(
    model: &M,
    q_eq: &DVector<f64>,
    mode_index: usize,
    options: &ContinuationOptions,
) -> Result<Eigenmanifold> {
    if !(options.energy_step > 0.0) {
        return Err(Error::Domain("energy step must be positive".into()));
    }
    let modes = linearize(model, q_eq)?;
    if mode_index == 0 || mode_index > modes.len() {
        return Err(Error::Domain(format!(
            "mode index {mode_index} exceeds DoFs ({})",
            modes.len()
        )));
    }
    let e_eq = model.potential(q_eq);
    if !(options.max_energy > e_eq) {
        return Err(Error::Domain(format!(
            "maximum energy {} must exceed the equilibrium energy {e_eq}",
            options.max_energy
        )));
    }
    let mut manifold = Eigenmanifold {
        fingerprint: model.fingerprint(),
        model: model.label(),
        mode_index,
        linear_seed: LinearSeed {
            omega: modes.frequency(mode_index),
            eigvec: modes.mode_shape(mode_index).as_slice().to_vec(),
        },
        equilibrium: q_eq.as_slice().to_vec(),
        energy_step: options.energy_step,
        max_energy: options.max_energy,
        predictor: "tangent".into(),
        truncated: false,
        diagnostic: None,
        points: Vec::new(),
    };
    let min_step = options.energy_step / 2f64.powi(options.max_halvings as i32);
    let stop_energy = options.max_energy - 1e-9;

    let mut step = options
        .first_step
        .unwrap_or(options.energy_step)
        .min(options.max_energy - e_eq);
    let first = loop {
        let (q0, period) = bootstrap_first_point(&modes, mode_index, step)?;
        match correct(model, &q0, period, e_eq + step, &options.shooting) {
            Ok(c) => break (c, e_eq + step),
            Err(e) if recoverable(&e) => {
                step *= 0.5;
                log::debug!("first correction failed ({e}); energy step {step}");
                if step < min_step {
                    manifold.truncated = true;
                    manifold.diagnostic = Some(format!("no converged point near equilibrium: {e}"));
                    return Ok(manifold);
                }
            }
            Err(e) => return Err(e),
        }
    };
    let (mut last, mut target) = first;
    manifold.points.push(last.point.clone());
    step = (2.0 * step).min(options.energy_step);

    while target < stop_energy {
        step = step.min(options.max_energy - target);
        let attempt = predict(model, &last, step, options.branch_tolerance).and_then(|(q0, period)| {
            let c = correct(model, &q0, period, target + step, &options.shooting)?;
            check_deviation(&last.point, &q0, &c.point, options.max_deviation)?;
            Ok(c)
        });
        match attempt {
            Ok(c) => {
                target += step;
                log::debug!(
                    "mode {mode_index}: E = {:.6} T = {:.6} after {} iterations",
                    c.point.energy,
                    c.point.period,
                    c.point.newton_iters
                );
                manifold.points.push(c.point.clone());
                last = c;
                step = (2.0 * step).min(options.energy_step);
            }
            Err(Error::BranchPoint { energy }) => {
                manifold.diagnostic = Some(format!(
                    "rank-deficient shooting Jacobian near E = {energy}; branch point or mode crossing"
                ));
                break;
            }
            Err(e) if recoverable(&e) => {
                step *= 0.5;
                log::debug!("mode {mode_index}: correction failed ({e}); energy step {step}");
                if step < min_step {
                    manifold.truncated = true;
                    manifold.diagnostic = Some(format!("energy step underflow above E = {target}: {e}"));
                    break;
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(manifold)
}

fn check_deviation(last: &GeneratorPoint, predicted: &DVector<f64>, corrected: &GeneratorPoint, max: f64) -> Result<()> {
    let step = (predicted - last.configuration()).norm();
    let correction = (corrected.configuration() - predicted).norm();
    if correction > max * step {
        return Err(Error::Deviation {
            ratio: correction / step,
        });
    }
    Ok(())
}

/// Failures that the adaptive energy step absorbs by halving.
fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::NoConvergence { .. }
            | Error::StepUnderflow { .. }
            | Error::StepLimit { .. }
            | Error::Divergence { .. }
            | Error::SingularMass { .. }
            | Error::Domain(_)
            | Error::Deviation { .. }
    )
}

/// One period of the orbit through `point`, sampled uniformly.
pub fn mode_trajectory<M: MechanicalModel + ?Sized>(
    model: &M,
    point: &GeneratorPoint,
    sample_count: usize,
    control: &StepControl,
) -> Result<ModeTrajectory> {
    let start = State::at_rest(point.configuration());
    let trajectory = integrate(model, &start, point.period, control, sample_count)?;
    Ok(ModeTrajectory {
        source: point.clone(),
        trajectory,
    })
}

/// [`mode_trajectory`] with the default sample count and tolerances.
pub fn default_mode_trajectory<M: MechanicalModel + ?Sized>(
    model: &M,
    point: &GeneratorPoint,
) -> Result<ModeTrajectory> {
    mode_trajectory(model, point, DEFAULT_SAMPLES, &StepControl::default())
}

/// Recomputes the energy of a stored point.
pub fn point_energy<M: MechanicalModel + ?Sized>(model: &M, point: &GeneratorPoint) -> Result<f64> {
    energy(model, &State::at_rest(point.configuration()))
}
