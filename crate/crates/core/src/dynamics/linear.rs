use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::model::{check_dims, MechanicalModel};
use crate::error::{Error, Result};

/// Newton stops once `‖∇V‖∞` falls below this.
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-10;
const EQUILIBRIUM_MAX_ITERATIONS: usize = 50;
/// Looser bound accepted by [`linearize`] for a caller-provided equilibrium.
const EQUILIBRIUM_CHECK: f64 = 1e-8;

/// Linearized modal data at a stable equilibrium.
#[derive(Debug, Clone)]
pub struct LinearModeSet {
    pub q_eq: DVector<f64>,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Mass-orthonormal mode shapes, one per column, in ascending frequency order.
    pub vectors: DMatrix<f64>,
    /// Natural frequencies in rad/s, ascending.
    pub frequencies: Vec<f64>,
}

impl LinearModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Mode shape of the 1-based mode `index`.
    pub fn mode_shape(&self, index: usize) -> DVector<f64> {
        self.vectors.column(index - 1).into_owned()
    }

    pub fn frequency(&self, index: usize) -> f64 {
        self.frequencies[index - 1]
    }

    pub fn period(&self, index: usize) -> f64 {
        2.0 * std::f64::consts::PI / self.frequency(index)
    }
}

/// Hessian of `V` by central differences of `∇V`, step `1e-5·max(1, |q_i|)`,
/// symmetrized.
pub fn stiffness_matrix<M: MechanicalModel + ?Sized>(model: &M, q: &DVector<f64>) -> DMatrix<f64> {
    let n = q.len();
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = 1e-5 * q[j].abs().max(1.0);
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[j] += h;
        qm[j] -= h;
        let col = (model.potential_gradient(&qp) - model.potential_gradient(&qm)) / (2.0 * h);
        k.set_column(j, &col);
    }
    (&k + k.transpose()) * 0.5
}

/// Damped Newton iteration on `∇V(q) = 0` from `guess`; the result is a
/// strict local minimizer of `V`.
pub fn find_equilibrium<M: MechanicalModel + ?Sized>(
    model: &M,
    guess: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_dims(model, guess.len())?;
    let mut q = guess.clone();
    let mut grad = model.potential_gradient(&q);
    let mut norm = grad.amax();
    for _ in 0..EQUILIBRIUM_MAX_ITERATIONS {
        if norm < EQUILIBRIUM_TOLERANCE {
            let k = stiffness_matrix(model, &q);
            if k.cholesky().is_none() {
                return Err(Error::SaddlePoint);
            }
            return Ok(q);
        }
        let k = stiffness_matrix(model, &q);
        let step = match k.clone().cholesky() {
            Some(chol) => chol.solve(&grad),
            None => k.full_piv_lu().solve(&grad).ok_or(Error::SaddlePoint)?,
        };
        // halve the step until the gradient norm decreases
        let mut alpha = 1.0;
        loop {
            let trial = &q - &step * alpha;
            let g = model.potential_gradient(&trial);
            let trial_norm = g.amax();
            if trial_norm < norm || alpha < 1e-6 {
                q = trial;
                grad = g;
                norm = trial_norm;
                break;
            }
            alpha *= 0.5;
        }
    }
    if norm < EQUILIBRIUM_TOLERANCE {
        let k = stiffness_matrix(model, &q);
        if k.cholesky().is_none() {
            return Err(Error::SaddlePoint);
        }
        return Ok(q);
    }
    Err(Error::NoConvergence {
        iterations: EQUILIBRIUM_MAX_ITERATIONS,
        residual: norm,
    })
}

/// Solves `K c = ω² M c` at `q_eq` by Cholesky reduction of `M`.
///
/// Mode shapes are `M`-orthonormal and signed so that their first
/// non-negligible entry is positive.
pub fn linearize<M: MechanicalModel + ?Sized>(model: &M, q_eq: &DVector<f64>) -> Result<LinearModeSet> {
    check_dims(model, q_eq.len())?;
    let gradient_norm = model.potential_gradient(q_eq).amax();
    if gradient_norm > EQUILIBRIUM_CHECK {
        return Err(Error::NotEquilibrium { gradient_norm });
    }
    let mass = model.mass_matrix(q_eq);
    let stiffness = stiffness_matrix(model, q_eq);
    let (values, vectors) = generalized_symmetric_eigen(&mass, &stiffness)?;
    if let Some(&bad) = values.iter().find(|&&v| !(v > 0.0)) {
        return Err(Error::UnstableEquilibrium { eigenvalue: bad });
    }
    Ok(LinearModeSet {
        q_eq: q_eq.clone(),
        mass,
        stiffness,
        vectors,
        frequencies: values.iter().map(|v| v.sqrt()).collect(),
    })
}

/// Eigenpairs of `K c = λ M c`, ascending in `λ`, with `cᵀ M c = 1`.
pub(crate) fn generalized_symmetric_eigen(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mass.nrows();
    let chol = mass.clone().cholesky().ok_or(Error::SingularMass {
        condition: f64::INFINITY,
    })?;
    let l = chol.l();
    // A = L⁻¹ K L⁻ᵀ
    let x = l
        .solve_lower_triangular(stiffness)
        .ok_or(Error::SingularMass {
            condition: f64::INFINITY,
        })?;
    let a = l
        .solve_lower_triangular(&x.transpose())
        .ok_or(Error::SingularMass {
            condition: f64::INFINITY,
        })?;
    let a = (&a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let lt = l.transpose();
    let mut vectors = DMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (col, &i) in order.iter().enumerate() {
        let y = eig.eigenvectors.column(i).into_owned();
        let mut c = lt
            .solve_upper_triangular(&y)
            .ok_or(Error::SingularMass {
                condition: f64::INFINITY,
            })?;
        let scale = c.amax();
        if let Some(first) = c.iter().copied().find(|v| v.abs() > 1e-9 * scale) {
            if first < 0.0 {
                c.neg_mut();
            }
        }
        vectors.set_column(col, &c);
        values.push(eig.eigenvalues[i]);
    }
    Ok((values, vectors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_problem_recovers_unit_modes() {
        let m = DMatrix::identity(3, 3);
        let k = DMatrix::from_diagonal(&DVector::from_vec(vec![9.0, 1.0, 4.0]));
        let (values, vectors) = generalized_symmetric_eigen(&m, &k).unwrap();
        assert_eq!(values.len(), 3);
        for (v, e) in values.iter().zip([1.0, 4.0, 9.0]) {
            assert!((v - e).abs() < 1e-12);
        }
        let expected = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        for (col, e) in expected.iter().enumerate() {
            for row in 0..3 {
                assert!((vectors[(row, col)] - e[row]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn generalized_modes_are_mass_orthonormal() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let k = DMatrix::from_row_slice(3, 3, &[10.0, -2.0, 0.0, -2.0, 6.0, -1.0, 0.0, -1.0, 3.0]);
        let (values, c) = generalized_symmetric_eigen(&m, &k).unwrap();
        let gram = c.transpose() * &m * &c;
        assert!((gram - DMatrix::identity(3, 3)).amax() < 1e-12);
        for (i, lambda) in values.iter().enumerate() {
            let ci = c.column(i);
            let r = &k * ci - (&m * ci) * *lambda;
            assert!(r.amax() < 1e-12 * k.amax());
        }
        assert!(values.windows(2).all(|w| w[0] <= w[1]));
    }
}
