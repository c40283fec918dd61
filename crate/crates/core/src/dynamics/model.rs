use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};

/// Configuration and velocity of an n-DoF model.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: DVector<f64>,
    pub qd: DVector<f64>,
}

impl State {
    pub fn new(q: DVector<f64>, qd: DVector<f64>) -> Result<Self> {
        if q.len() != qd.len() {
            return Err(Error::DimensionMismatch {
                expected: q.len(),
                got: qd.len(),
            });
        }
        if q.is_empty() {
            return Err(Error::Domain("state must have at least one DoF".into()));
        }
        if q.iter().chain(qd.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("state contains non-finite entries".into()));
        }
        Ok(Self { q, qd })
    }

    /// Zero-velocity state at `q`.
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self {
            q,
            qd: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub(crate) fn from_slice(y: &[f64]) -> Self {
        let n = y.len() / 2;
        Self {
            q: DVector::from_column_slice(&y[..n]),
            qd: DVector::from_column_slice(&y[n..]),
        }
    }

    pub(crate) fn to_vec(&self) -> Vec<f64> {
        self.q.iter().chain(self.qd.iter()).copied().collect()
    }
}

/// Uniform interface to a conservative mechanical model
/// `M(q) q̈ + c(q, q̇) + ∇V(q) = 0` with a backbone task map.
///
/// Implementations are immutable after construction and shared freely
/// across threads.
pub trait MechanicalModel: Send + Sync {
    fn n_dofs(&self) -> usize;

    /// Backbone rest length `L`; the task-map hyper-parameter lives in `[0, L]`.
    fn rest_length(&self) -> f64;

    fn mass_matrix(&self, q: &DVector<f64>) -> DMatrix<f64>;

    /// Potential energy, shifted so that it vanishes at the stable equilibrium.
    fn potential(&self, q: &DVector<f64>) -> f64;

    fn potential_gradient(&self, q: &DVector<f64>) -> DVector<f64>;

    /// Coriolis and centrifugal forces `c(q, q̇)`.
    ///
    /// The default uses the Christoffel symbols of the first kind built from
    /// central differences of `M`.
    fn coriolis(&self, q: &DVector<f64>, qd: &DVector<f64>) -> DVector<f64> {
        christoffel_coriolis(self, q, qd, 1e-6)
    }

    /// `(M(q), c(q, q̇) + ∇V(q))`. Models that share work between the terms
    /// override this; it is the hot path of time integration.
    fn dynamics_terms(&self, q: &DVector<f64>, qd: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let m = self.mass_matrix(q);
        let f = self.coriolis(q, qd) + self.potential_gradient(q);
        (m, f)
    }

    /// Position of the backbone point at arc length `s` (no range check).
    fn backbone_point(&self, q: &DVector<f64>, s: f64) -> Vector3<f64>;

    /// Guess used when searching for the stable equilibrium.
    fn rest_configuration(&self) -> DVector<f64> {
        DVector::zeros(self.n_dofs())
    }

    /// Short human-readable name, e.g. `pcc3`.
    fn label(&self) -> String;

    /// Hash identifying the model's defining parameters.
    fn fingerprint(&self) -> String;
}

/// `c_i = Σ_jk Γ_ijk q̇_j q̇_k` with `Γ_ijk = ½(∂_k M_ij + ∂_j M_ik − ∂_i M_jk)`,
/// derivatives of `M` by central differences with the given step.
pub fn christoffel_coriolis<M: MechanicalModel + ?Sized>(
    model: &M,
    q: &DVector<f64>,
    qd: &DVector<f64>,
    step: f64,
) -> DVector<f64> {
    let n = q.len();
    let dm: Vec<DMatrix<f64>> = (0..n)
        .map(|k| {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[k] += step;
            qm[k] -= step;
            (model.mass_matrix(&qp) - model.mass_matrix(&qm)) / (2.0 * step)
        })
        .collect();
    // Σ_k ∂_k M q̇_k, i.e. Ṁ
    let mut mdot = DMatrix::zeros(n, n);
    for (k, d) in dm.iter().enumerate() {
        mdot += d * qd[k];
    }
    let mut c = &mdot * qd;
    for i in 0..n {
        c[i] -= 0.5 * qd.dot(&(&dm[i] * qd));
    }
    c
}

pub(crate) fn check_dims<M: MechanicalModel + ?Sized>(model: &M, len: usize) -> Result<()> {
    if model.n_dofs() != len {
        return Err(Error::DimensionMismatch {
            expected: model.n_dofs(),
            got: len,
        });
    }
    Ok(())
}
