use nalgebra::{DMatrix, DVector, Vector3};

use crate::dynamics::MechanicalModel;
use crate::error::{Error, Result};

/// Constant-mass oscillator `M q̈ + K q + ε q³ = 0` (cubic term per DoF).
///
/// The task map is a virtual unit-length rod: the point at `s` sits at
/// `(s · q₁, 0, −s)`.
#[derive(Debug, Clone)]
pub struct SpringMassModel {
    mass: DMatrix<f64>,
    stiffness: DMatrix<f64>,
    hardening: f64,
    label: String,
}

impl SpringMassModel {
    pub fn new(mass: DMatrix<f64>, stiffness: DMatrix<f64>, hardening: f64) -> Result<Self> {
        let n = mass.nrows();
        if n == 0 || !mass.is_square() || stiffness.shape() != (n, n) {
            return Err(Error::InvalidModel("mass and stiffness must be square and equal-sized".into()));
        }
        if mass.clone().cholesky().is_none() {
            return Err(Error::InvalidModel("mass matrix must be positive definite".into()));
        }
        if !hardening.is_finite() {
            return Err(Error::InvalidModel("non-finite hardening coefficient".into()));
        }
        Ok(Self {
            mass,
            stiffness,
            hardening,
            label: format!("spring{n}"),
        })
    }

    /// Single DoF with unit mass, `ω² = stiffness`.
    pub fn scalar(stiffness: f64, hardening: f64) -> Result<Self> {
        Self::new(
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, stiffness),
            hardening,
        )
    }
}

impl MechanicalModel for SpringMassModel {
    fn n_dofs(&self) -> usize {
        self.mass.nrows()
    }

    fn rest_length(&self) -> f64 {
        1.0
    }

    fn mass_matrix(&self, _q: &DVector<f64>) -> DMatrix<f64> {
        self.mass.clone()
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        0.5 * q.dot(&(&self.stiffness * q)) + 0.25 * self.hardening * q.iter().map(|x| x.powi(4)).sum::<f64>()
    }

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64> {
        &self.stiffness * q + q.map(|x| self.hardening * x.powi(3))
    }

    fn coriolis(&self, q: &DVector<f64>, _qd: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }

    fn backbone_point(&self, q: &DVector<f64>, s: f64) -> Vector3<f64> {
        Vector3::new(s * q[0], 0.0, -s)
    }

    fn label(&self) -> String {
        self.label.clone()
    }

    fn fingerprint(&self) -> String {
        let value = serde_json::json!({
            "mass": self.mass.as_slice(),
            "stiffness": self.stiffness.as_slice(),
            "hardening": self.hardening,
        });
        super::spec::hash_json(&value)
    }
}
