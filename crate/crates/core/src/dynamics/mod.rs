//! Conservative multi-body dynamics: energy, accelerations, time
//! integration, equilibria and linear modal analysis.

mod integrator;
mod linear;
mod model;

pub use integrator::{integrate, propagate, Propagation, StepControl, Trajectory, DEFAULT_SAMPLES};
pub use linear::{find_equilibrium, linearize, stiffness_matrix, LinearModeSet};
pub use model::{christoffel_coriolis, MechanicalModel, State};

pub(crate) use integrator::replay;
pub(crate) use model::check_dims;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest tolerated condition estimate of the mass matrix.
pub const MAX_MASS_CONDITION: f64 = 1e12;

/// `E = ½ q̇ᵀ M(q) q̇ + V(q)`.
pub fn energy<M: MechanicalModel + ?Sized>(model: &M, state: &State) -> Result<f64> {
    check_dims(model, state.q.len())?;
    check_dims(model, state.qd.len())?;
    let m = model.mass_matrix(&state.q);
    Ok(0.5 * state.qd.dot(&(&m * &state.qd)) + model.potential(&state.q))
}

/// `V(q)` for a zero-velocity state, the energy of a generator point.
pub fn rest_energy<M: MechanicalModel + ?Sized>(model: &M, q: &DVector<f64>) -> Result<f64> {
    check_dims(model, q.len())?;
    Ok(model.potential(q))
}

/// `q̈ = −M(q)⁻¹ (c(q, q̇) + ∇V(q))`.
pub fn accelerations<M: MechanicalModel + ?Sized>(model: &M, state: &State) -> Result<DVector<f64>> {
    check_dims(model, state.q.len())?;
    check_dims(model, state.qd.len())?;
    let (m, f) = model.dynamics_terms(&state.q, &state.qd);
    let mut qdd = solve_mass(m, f)?;
    qdd.neg_mut();
    Ok(qdd)
}

/// Solves `M x = b` for symmetric positive definite `M`, falling back to
/// full-pivoting LU if the Cholesky factorization fails.
pub(crate) fn solve_mass(m: DMatrix<f64>, b: DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        let l = chol.l_dirty();
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for i in 0..l.nrows() {
            let d = l[(i, i)].abs();
            lo = lo.min(d);
            hi = hi.max(d);
        }
        let condition = (hi / lo).powi(2);
        if !(condition <= MAX_MASS_CONDITION) {
            return Err(Error::SingularMass { condition });
        }
        return Ok(chol.solve(&b));
    }
    log::warn!("mass matrix Cholesky failed, falling back to full-pivot LU");
    let lu = m.full_piv_lu();
    lu.solve(&b).ok_or(Error::SingularMass {
        condition: f64::INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_mass_rejects_singular_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_mass(m, b), Err(Error::SingularMass { .. })));
    }

    #[test]
    fn solve_mass_rejects_ill_conditioned_matrix() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-14]));
        let b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(matches!(solve_mass(m, b), Err(Error::SingularMass { .. })));
    }

    #[test]
    fn solve_mass_handles_indefinite_but_regular_matrix() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![3.0, 2.0]);
        let x = solve_mass(m, b).unwrap();
        assert_eq!(x.as_slice(), &[2.0, 3.0]);
    }
}
