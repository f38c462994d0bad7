//! Ion species parameters and the JSON species registry.

use serde::{Deserialize, Serialize};

use crate::constants::{AMU, ELEMENTARY_CHARGE};
use crate::error::{Error, Result};

/// Physical constants of one ion species.
#[derive(Debug, Clone, PartialEq)]
pub struct IonSpecies {
    pub name: String,
    /// Ion mass (kg).
    pub mass: f64,
    /// Ion charge (C), an integer multiple of the elementary charge.
    pub charge: f64,
    /// Electronic Lande g-factor.
    pub g_j: f64,
    /// Nuclear g-factor in Bohr magnetons (0 neglects the nuclear moment).
    pub g_i: f64,
    /// Hyperfine constant A (rad/s).
    pub hyperfine_a: f64,
    /// Nuclear spin quantum number. Only I = 1/2 is supported by the
    /// hyperfine level computations.
    pub nuclear_spin: f64,
}

impl IonSpecies {
    /// 171Yb+ with the nuclear moment neglected: A = 2pi 12.6 GHz, g_J = 2.
    pub fn yb171() -> Self {
        IonSpecies {
            name: "yb171".into(),
            mass: 170.936 * AMU,
            charge: ELEMENTARY_CHARGE,
            g_j: 2.0,
            g_i: 0.0,
            hyperfine_a: std::f64::consts::TAU * 12.6e9,
            nuclear_spin: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0) {
            return Err(Error::InvalidInput(format!("mass must be > 0, got {}", self.mass)));
        }
        if !(self.charge > 0.0) {
            return Err(Error::InvalidInput(format!(
                "charge must be > 0, got {}",
                self.charge
            )));
        }
        if !(self.hyperfine_a > 0.0) {
            return Err(Error::InvalidInput(format!(
                "hyperfine constant must be > 0, got {}",
                self.hyperfine_a
            )));
        }
        Ok(())
    }
}

/// One entry of the species registry file. Frequencies are in ordinary Hz,
/// masses in amu and charge in units of e; conversion to SI happens on load.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpeciesRecord {
    pub name: String,
    pub mass_amu: f64,
    pub charge_e: f64,
    #[serde(rename = "g_J")]
    pub g_j: f64,
    #[serde(rename = "g_I", default)]
    pub g_i: f64,
    #[serde(rename = "hyperfine_A_hz")]
    pub hyperfine_a_hz: f64,
    #[serde(default = "default_spin")]
    pub nuclear_spin: f64,
}

fn default_spin() -> f64 {
    0.5
}

impl From<&SpeciesRecord> for IonSpecies {
    fn from(r: &SpeciesRecord) -> Self {
        IonSpecies {
            name: r.name.clone(),
            mass: r.mass_amu * AMU,
            charge: r.charge_e * ELEMENTARY_CHARGE,
            g_j: r.g_j,
            g_i: r.g_i,
            hyperfine_a: std::f64::consts::TAU * r.hyperfine_a_hz,
            nuclear_spin: r.nuclear_spin,
        }
    }
}

/// Parses a registry file holding either a single record or an array.
pub fn parse_registry(json: &str) -> Result<Vec<IonSpecies>> {
    let v: serde_json::Value = serde_json::from_str(json)?;
    let records: Vec<SpeciesRecord> = if v.is_array() {
        serde_json::from_value(v)?
    } else {
        vec![serde_json::from_value(v)?]
    };
    let species: Vec<IonSpecies> = records.iter().map(IonSpecies::from).collect();
    for s in &species {
        s.validate()?;
    }
    Ok(species)
}

/// Looks up `name` in a parsed registry, falling back to the built-in
/// 171Yb+ entry when the registry does not define it.
pub fn lookup(registry: &[IonSpecies], name: &str) -> Result<IonSpecies> {
    if let Some(s) = registry.iter().find(|s| s.name == name) {
        return Ok(s.clone());
    }
    if name == "yb171" {
        return Ok(IonSpecies::yb171());
    }
    Err(Error::UnsupportedSpecies(name.into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_single_object() {
        let json = r#"{"name": "yb171", "mass_amu": 170.936, "charge_e": 1,
                       "g_J": 2.0, "g_I": 0, "hyperfine_A_hz": 1.26e10}"#;
        let reg = parse_registry(json).unwrap();
        assert_eq!(reg.len(), 1);
        let builtin = IonSpecies::yb171();
        let loaded = &reg[0];
        assert!((loaded.mass - builtin.mass).abs() / builtin.mass < 1e-12);
        assert!((loaded.hyperfine_a - builtin.hyperfine_a).abs() / builtin.hyperfine_a < 1e-12);
        assert_eq!(loaded.nuclear_spin, 0.5);
    }

    #[test]
    fn registry_array_and_lookup() {
        let json = r#"[{"name": "yb171", "mass_amu": 170.936, "charge_e": 1,
                        "g_J": 2.0, "hyperfine_A_hz": 1.26e10},
                       {"name": "test", "mass_amu": 100.0, "charge_e": 2,
                        "g_J": 2.0, "g_I": 0.001, "hyperfine_A_hz": 5e9}]"#;
        let reg = parse_registry(json).unwrap();
        assert_eq!(reg.len(), 2);
        assert!(lookup(&reg, "test").is_ok());
        assert!(lookup(&reg, "yb171").is_ok());
        assert!(matches!(
            lookup(&reg, "nope"),
            Err(Error::UnsupportedSpecies(_))
        ));
    }

    #[test]
    fn builtin_fallback_without_registry() {
        let s = lookup(&[], "yb171").unwrap();
        assert_eq!(s.name, "yb171");
        s.validate().unwrap();
    }

    #[test]
    fn invalid_species_rejected() {
        let json = r#"{"name": "bad", "mass_amu": -1.0, "charge_e": 1,
                       "g_J": 2.0, "hyperfine_A_hz": 1e9}"#;
        assert!(parse_registry(json).is_err());
    }
}
