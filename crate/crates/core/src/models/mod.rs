//! Model families: planar PCC soft arms, planar rigid chains with elastic
//! joints, and small spring–mass systems used as analytic references.

mod planar;
mod spec;
mod spring;

pub use planar::{ChainKind, PlanarChain};
pub use spec::{load_model_spec, ModelKind, ModelSpec};
pub use spring::SpringMassModel;

use std::f64::consts::PI;

use nalgebra::{DVector, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{find_equilibrium, MechanicalModel};
use crate::error::{Error, Result};

/// Gauss–Legendre points per segment for the line-density integrals.
pub const DEFAULT_QUADRATURE_POINTS: usize = 7;
/// Straight rods have integrands of degree ≤ 2 in arc length, which two
/// Gauss–Legendre points integrate exactly.
pub const RIGID_QUADRATURE_POINTS: usize = 2;
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Material and geometry of a slender cylindrical soft arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftArmParams {
    pub radius: f64,
    pub density: f64,
    pub rest_length: f64,
    pub young_modulus: f64,
    /// Stored for completeness; planar pure bending does not use it.
    pub poisson: f64,
    pub gravity: f64,
    /// Angle between gravity and the rest backbone axis. Zero means the arm
    /// hangs along gravity; `π/2` pulls it sideways towards `+x`.
    pub gravity_angle: f64,
    pub n_bodies: usize,
}

impl SoftArmParams {
    /// Arm with radius 2 cm, density 1062 kg/m³, rest length 0.4 m and
    /// Young modulus 0.66 MPa, hanging under 9.81 m/s².
    pub fn reference(n_bodies: usize) -> Self {
        Self {
            radius: 0.02,
            density: 1062.0,
            rest_length: 0.4,
            young_modulus: 0.66e6,
            poisson: 0.5,
            gravity: STANDARD_GRAVITY,
            gravity_angle: 0.0,
            n_bodies,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("radius", self.radius),
            ("density", self.density),
            ("rest_length", self.rest_length),
            ("young_modulus", self.young_modulus),
            ("gravity", self.gravity),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        if self.n_bodies == 0 {
            return Err(Error::InvalidModel("n_bodies must be at least 1".into()));
        }
        if !self.gravity_angle.is_finite() || !self.poisson.is_finite() {
            return Err(Error::InvalidModel("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn cross_section_area(&self) -> f64 {
        PI * self.radius * self.radius
    }

    /// `EI = Y π r⁴ / 4`.
    pub fn bending_stiffness(&self) -> f64 {
        self.young_modulus * PI * self.radius.powi(4) / 4.0
    }

    pub fn line_density(&self) -> f64 {
        self.density * self.cross_section_area()
    }
}

/// A chain of identical rigid rods joined by linear torsional springs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidChainParams {
    pub n_links: usize,
    pub link_length: f64,
    pub link_mass: f64,
    pub joint_stiffness: f64,
    pub gravity: f64,
    pub gravity_angle: f64,
}

impl RigidChainParams {
    /// Lumps a soft arm into `arm.n_bodies` rods of length `L/n`, mass
    /// `ρπr²L/n` and joint stiffness `EI n / L`.
    pub fn from_soft_arm(arm: &SoftArmParams) -> Self {
        let n = arm.n_bodies as f64;
        let link_length = arm.rest_length / n;
        Self {
            n_links: arm.n_bodies,
            link_length,
            link_mass: arm.line_density() * link_length,
            joint_stiffness: arm.young_modulus * PI * arm.radius.powi(4) * n / (4.0 * arm.rest_length),
            gravity: arm.gravity,
            gravity_angle: arm.gravity_angle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("link_length", self.link_length),
            ("link_mass", self.link_mass),
            ("joint_stiffness", self.joint_stiffness),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidModel(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.gravity >= 0.0 && self.gravity.is_finite()) || !self.gravity_angle.is_finite() {
            return Err(Error::InvalidModel("gravity must be finite and non-negative".into()));
        }
        if self.n_links == 0 {
            return Err(Error::InvalidModel("n_links must be at least 1".into()));
        }
        Ok(())
    }
}

fn gravity_vector(magnitude: f64, angle: f64) -> Complex64 {
    // rest axis is −z; positive angles rotate gravity towards +x
    Complex64::new(magnitude * angle.sin(), -magnitude * angle.cos())
}

fn finish(mut chain: PlanarChain) -> Result<PlanarChain> {
    let q_eq = find_equilibrium(&chain, &chain.rest_configuration())
        .map_err(|e| Error::InvalidModel(format!("no stable equilibrium: {e}")))?;
    let offset = chain.raw_potential(&q_eq);
    chain.set_potential_offset(offset);
    Ok(chain)
}

/// Planar PCC arm with one bending angle per segment.
pub fn build_pcc(params: &SoftArmParams) -> Result<PlanarChain> {
    build_pcc_with(params, DEFAULT_QUADRATURE_POINTS)
}

pub fn build_pcc_with(params: &SoftArmParams, quadrature_points: usize) -> Result<PlanarChain> {
    params.validate()?;
    let n = params.n_bodies;
    let l = params.rest_length / n as f64;
    let k = params.bending_stiffness() / l;
    let spec = ModelSpec::from_soft_arm(ModelKind::Pcc, params);
    finish(PlanarChain::new(
        ChainKind::ConstantCurvature,
        n,
        l,
        vec![k; n],
        params.line_density(),
        gravity_vector(params.gravity, params.gravity_angle),
        quadrature_points,
        format!("pcc{n}"),
        spec.fingerprint_with_angle(params.gravity_angle),
    ))
}

/// Planar chain of rigid rods with elastic revolute joints.
pub fn build_rigid_chain(params: &RigidChainParams) -> Result<PlanarChain> {
    params.validate()?;
    let n = params.n_links;
    let fingerprint = spec::hash_json(&serde_json::to_value(params)?);
    finish(PlanarChain::new(
        ChainKind::Rigid,
        n,
        params.link_length,
        vec![params.joint_stiffness; n],
        params.link_mass / params.link_length,
        gravity_vector(params.gravity, params.gravity_angle),
        RIGID_QUADRATURE_POINTS,
        format!("rigid{n}"),
        fingerprint,
    ))
}

/// Backbone point at arc length `s ∈ [0, L]`; `y ≡ 0` for planar models.
pub fn backbone_position<M: MechanicalModel + ?Sized>(
    model: &M,
    q: &DVector<f64>,
    s: f64,
) -> Result<Vector3<f64>> {
    crate::dynamics::check_dims(model, q.len())?;
    let length = model.rest_length();
    if !(0.0..=length).contains(&s) {
        return Err(Error::Domain(format!("arc length {s} outside [0, {length}]")));
    }
    Ok(model.backbone_point(q, s))
}
