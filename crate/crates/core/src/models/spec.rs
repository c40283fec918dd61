use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{build_pcc, build_rigid_chain, PlanarChain, RigidChainParams, SoftArmParams, STANDARD_GRAVITY};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Pcc,
    RigidChain,
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub radius_m: f64,
    pub density_kg_m3: f64,
    pub rest_length_m: f64,
    pub young_modulus_pa: f64,
    pub poisson: f64,
    pub n_bodies: usize,
    #[serde(default = "default_gravity")]
    pub gravity_m_s2: f64,
}

fn default_gravity() -> f64 {
    STANDARD_GRAVITY
}

pub(crate) fn hash_json(value: &serde_json::Value) -> String {
    // serde_json maps are sorted, so this is canonical
    let text = serde_json::to_string(value).expect("serializing a JSON value cannot fail");
    hex::encode(Sha256::digest(text.as_bytes()))
}

impl ModelSpec {
    /// The reference arm of the given kind and order.
    pub fn reference(kind: ModelKind, n_bodies: usize) -> Self {
        Self::from_soft_arm(kind, &SoftArmParams::reference(n_bodies))
    }

    pub fn from_soft_arm(kind: ModelKind, arm: &SoftArmParams) -> Self {
        Self {
            kind,
            radius_m: arm.radius,
            density_kg_m3: arm.density,
            rest_length_m: arm.rest_length,
            young_modulus_pa: arm.young_modulus,
            poisson: arm.poisson,
            n_bodies: arm.n_bodies,
            gravity_m_s2: arm.gravity,
        }
    }

    pub fn soft_arm(&self) -> SoftArmParams {
        SoftArmParams {
            radius: self.radius_m,
            density: self.density_kg_m3,
            rest_length: self.rest_length_m,
            young_modulus: self.young_modulus_pa,
            poisson: self.poisson,
            gravity: self.gravity_m_s2,
            gravity_angle: 0.0,
            n_bodies: self.n_bodies,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Spec(e.to_string()))
    }

    /// SHA-256 over every field, hex encoded.
    pub fn fingerprint(&self) -> String {
        self.fingerprint_with_angle(0.0)
    }

    pub(crate) fn fingerprint_with_angle(&self, gravity_angle: f64) -> String {
        let mut value = serde_json::to_value(self).expect("spec serializes");
        if gravity_angle != 0.0 {
            value["gravity_angle"] = serde_json::json!(gravity_angle);
        }
        hash_json(&value)
    }

    pub fn build(&self) -> Result<PlanarChain> {
        let arm = self.soft_arm();
        let mut model = match self.kind {
            ModelKind::Pcc => build_pcc(&arm)?,
            ModelKind::RigidChain => {
                arm.validate()?;
                build_rigid_chain(&RigidChainParams::from_soft_arm(&arm))?
            }
        };
        model.set_fingerprint(self.fingerprint());
        Ok(model)
    }
}

/// Reads a JSON model spec and builds the model it describes.
pub fn load_model_spec(path: impl AsRef<Path>) -> Result<(ModelSpec, PlanarChain)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Spec(format!("cannot read {}: {e}", path.display())))?;
    let spec = ModelSpec::from_json(&text)?;
    let model = spec.build()?;
    Ok((spec, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::MechanicalModel;

    const PCC3: &str = r#"{"kind": "pcc", "radius_m": 0.02, "density_kg_m3": 1062,
        "rest_length_m": 0.4, "young_modulus_pa": 660000, "poisson": 0.5, "n_bodies": 3}"#;

    #[test]
    fn parses_and_builds() {
        let spec = ModelSpec::from_json(PCC3).unwrap();
        assert_eq!(spec.gravity_m_s2, 9.81);
        let model = spec.build().unwrap();
        assert_eq!(model.n_dofs(), 3);
        assert_eq!(model.fingerprint(), spec.fingerprint());
        assert_eq!(spec, ModelSpec::reference(ModelKind::Pcc, 3));
    }

    #[test]
    fn rigid_chain_spec() {
        let spec = ModelSpec::reference(ModelKind::RigidChain, 10);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains(r#""kind":"rigid_chain""#));
        assert_eq!(ModelSpec::from_json(&text).unwrap().build().unwrap().n_dofs(), 10);
    }

    #[test]
    fn schema_violations_are_reported() {
        let missing = PCC3.replace(r#""radius_m": 0.02,"#, "");
        let err = ModelSpec::from_json(&missing).unwrap_err().to_string();
        assert!(err.contains("radius_m"), "{err}");
        let unknown = PCC3.replace(r#""poisson""#, r#""colour": 1, "poisson""#);
        assert!(ModelSpec::from_json(&unknown).unwrap_err().to_string().contains("colour"));
        let kind = PCC3.replace(r#""pcc""#, r#""fem""#);
        assert!(ModelSpec::from_json(&kind).is_err());
    }

    #[test]
    fn every_field_changes_the_fingerprint() {
        let base = ModelSpec::reference(ModelKind::Pcc, 3);
        let mut variants = Vec::new();
        let mut s = base.clone();
        s.kind = ModelKind::RigidChain;
        variants.push(s);
        for f in 0..6 {
            let mut s = base.clone();
            match f {
                0 => s.radius_m *= 1.0 + 1e-12,
                1 => s.density_kg_m3 += 1.0,
                2 => s.rest_length_m += 1e-9,
                3 => s.young_modulus_pa += 1.0,
                4 => s.poisson = 0.49,
                _ => s.gravity_m_s2 = 9.80665,
            }
            variants.push(s);
        }
        let mut s = base.clone();
        s.n_bodies = 4;
        variants.push(s);
        let fp = base.fingerprint();
        for v in &variants {
            assert_ne!(v.fingerprint(), fp);
        }
    }
}
