#![allow(dead_code)]

use std::f64::consts::PI;

/// Period of `J θ̈ + V'(θ) = 0` at energy `e` for an even, single-well `V`,
/// from `T = 4 ∫₀^{θm} √(J / 2(E − V)) dθ` with `θ = θm sin φ` and
/// composite Simpson on `φ ∈ [0, π/2]`.
pub fn turning_point_period(inertia: f64, v: impl Fn(f64) -> f64, dv: impl Fn(f64) -> f64, e: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while v(hi) < e {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if v(mid) < e {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let amp = 0.5 * (lo + hi);
    let integrand = |phi: f64| {
        if phi >= 0.5 * PI {
            return (inertia * amp / dv(amp)).sqrt();
        }
        let gap = e - v(amp * phi.sin());
        amp * phi.cos() * (inertia / (2.0 * gap)).sqrt()
    };
    let n = 200_000;
    let h = 0.5 * PI / n as f64;
    let mut sum = integrand(0.0) + integrand(0.5 * PI);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * integrand(k as f64 * h);
    }
    4.0 * sum * h / 3.0
}

/// Hanging uniform rod of length `l`, mass `m` on a torsional spring `k`.
pub struct SpringPendulum {
    pub m: f64,
    pub l: f64,
    pub k: f64,
    pub g: f64,
}

impl SpringPendulum {
    /// Single-link lumping of the reference arm.
    pub fn reference() -> Self {
        let (r, rho, l, y) = (0.02, 1062.0, 0.4, 0.66e6);
        Self {
            m: rho * PI * r * r * l,
            l,
            k: y * PI * r.powi(4) / (4.0 * l),
            g: 9.81,
        }
    }

    pub fn period(&self, e: f64) -> f64 {
        let c = self.m * self.g * self.l / 2.0;
        let k = self.k;
        turning_point_period(
            self.m * self.l * self.l / 3.0,
            |t| 0.5 * k * t * t + c * (1.0 - t.cos()),
            |t| k * t + c * t.sin(),
            e,
        )
    }
}

use nalgebra::DVector;
use nmodes_core::dynamics::{MechanicalModel, State};
use rand::Rng;

/// Random state with total energy `e`: a random configuration shrunk until
/// its potential is below `e`, then velocity along a random direction
/// carrying the remainder as kinetic energy.
pub fn random_state<M: MechanicalModel, R: Rng>(model: &M, e: f64, rng: &mut R) -> State {
    let n = model.n_dofs();
    let mut q = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let share = rng.random_range(0.0..1.0);
    while model.potential(&q) > share * e {
        q *= 0.7;
    }
    let dir = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let m = model.mass_matrix(&q);
    let kinetic = 0.5 * dir.dot(&(&m * &dir));
    let scale = (2.0 * (e - model.potential(&q)).max(0.0) / (2.0 * kinetic)).sqrt();
    State::new(q, dir * scale).unwrap()
}
