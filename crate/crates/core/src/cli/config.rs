//! Scenario files.
//!
//! Scenarios are JSON with units in the key names. Unknown keys are errors.
//!
//! ```json
//! {
//!   "array": { "n_tx": 10, "n_rx": 10, "n_samples": 8 },
//!   "target": { "range_bin": 0, "angle_deg": 15.0, "power_db": 30.0 },
//!   "interferers": [ { "range_bin": 1, "angle_deg": -10.0, "power_db": 20.0 } ],
//!   "noise_power_db": 0.0,
//!   "constraint": { "type": "cms", "eps": 0.1118, "reference": "lfm" }
//! }
//! ```
//!
//! Omitted moduli default to `1/√(N_t·N)`; CM&S `eps` defaults to the
//! modulus and `reference` to `"lfm"`; ε-CM bounds default to a tenth of the
//! center modulus.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifolds::{default_modulus, ConstraintSpec};
use crate::scene::{ArrayConfig, Emitter, Scenario};
use crate::solver::lfm_init;
use crate::CVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayFile {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterFile {
    pub range_bin: usize,
    pub angle_deg: f64,
    pub power_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferenceFile {
    /// Only `"lfm"` is recognised.
    Named(String),
    /// `[re, im]` pairs, snapshot-major.
    Explicit(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintFile {
    Cm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulus: Option<f64>,
    },
    EpsCm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        center_modulus: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps_lo: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps_hi: Option<f64>,
    },
    Cms {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modulus: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference: Option<ReferenceFile>,
    },
}

impl ConstraintFile {
    pub fn kind(&self) -> &'static str {
        match self {
            ConstraintFile::Cm { .. } => "cm",
            ConstraintFile::EpsCm { .. } => "eps_cm",
            ConstraintFile::Cms { .. } => "cms",
        }
    }

    /// Fills every default for `array`, so the result resolves identically
    /// whatever defaults later become.
    pub fn resolved(&self, array: &ArrayConfig) -> ConstraintFile {
        let c = default_modulus(array);
        match self {
            ConstraintFile::Cm { modulus } => ConstraintFile::Cm {
                modulus: Some(modulus.unwrap_or(c)),
            },
            ConstraintFile::EpsCm {
                center_modulus,
                eps_lo,
                eps_hi,
            } => {
                let center = center_modulus.unwrap_or(c);
                ConstraintFile::EpsCm {
                    center_modulus: Some(center),
                    eps_lo: Some(eps_lo.unwrap_or(0.1 * center)),
                    eps_hi: Some(eps_hi.unwrap_or(0.1 * center)),
                }
            }
            ConstraintFile::Cms {
                modulus,
                eps,
                reference,
            } => {
                let modulus = modulus.unwrap_or(c);
                ConstraintFile::Cms {
                    modulus: Some(modulus),
                    eps: Some(eps.unwrap_or(modulus)),
                    reference: Some(
                        reference
                            .clone()
                            .unwrap_or_else(|| ReferenceFile::Named("lfm".into())),
                    ),
                }
            }
        }
    }

    pub fn to_spec(&self, array: &ArrayConfig) -> Result<ConstraintSpec> {
        let spec = match self.resolved(array) {
            ConstraintFile::Cm { modulus } => ConstraintSpec::Cm {
                modulus: modulus.unwrap_or_default(),
            },
            ConstraintFile::EpsCm {
                center_modulus,
                eps_lo,
                eps_hi,
            } => ConstraintSpec::EpsCm {
                center: center_modulus.unwrap_or_default(),
                eps_lo: eps_lo.unwrap_or_default(),
                eps_hi: eps_hi.unwrap_or_default(),
            },
            ConstraintFile::Cms {
                modulus,
                eps,
                reference,
            } => {
                let modulus = modulus.unwrap_or_default();
                let reference = match reference {
                    Some(ReferenceFile::Named(name)) if name == "lfm" => {
                        lfm_reference(array, modulus)
                    }
                    Some(ReferenceFile::Named(name)) => {
                        return Err(Error::config(
                            "constraint.reference",
                            format!("unknown reference waveform `{name}` (expected \"lfm\" or [re, im] pairs)"),
                        ))
                    }
                    Some(ReferenceFile::Explicit(pairs)) => CVector::from_iterator(
                        pairs.len(),
                        pairs.iter().map(|[re, im]| Complex64::new(*re, *im)),
                    ),
                    None => unreachable!("resolved() fills the reference"),
                };
                ConstraintSpec::Cms {
                    modulus,
                    reference,
                    eps: eps.unwrap_or_default(),
                }
            }
        };
        spec.validate(array.waveform_len())
            .map_err(|e| Error::config("constraint", e.to_string()))?;
        Ok(spec)
    }
}

/// LFM waveform rescaled to `modulus`.
fn lfm_reference(array: &ArrayConfig, modulus: f64) -> CVector {
    let lfm = lfm_init(array).data;
    let scale = modulus * (array.waveform_len() as f64).sqrt();
    if scale == 1.0 {
        lfm
    } else {
        lfm.map(|x| x * scale)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub array: ArrayFile,
    pub target: EmitterFile,
    #[serde(default)]
    pub interferers: Vec<EmitterFile>,
    pub noise_power_db: f64,
    pub constraint: ConstraintFile,
}

impl EmitterFile {
    fn to_emitter(&self) -> Emitter {
        Emitter::from_degrees(self.range_bin, self.angle_deg, self.power_db)
    }
}

impl ScenarioFile {
    pub fn array(&self) -> Result<ArrayConfig> {
        ArrayConfig::new(self.array.n_tx, self.array.n_rx, self.array.n_samples)
            .map_err(|e| Error::config("array", e.to_string()))
    }

    pub fn to_scenario(&self) -> Result<Scenario> {
        let array = self.array()?;
        let scenario = Scenario {
            array,
            target: self.target.to_emitter(),
            interferers: self.interferers.iter().map(EmitterFile::to_emitter).collect(),
            noise_power_db: self.noise_power_db,
            constraint: self.constraint.to_spec(&array)?,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    /// Copy with every constraint default filled in.
    pub fn resolved(&self) -> Result<ScenarioFile> {
        let array = self.array()?;
        Ok(ScenarioFile {
            constraint: self.constraint.resolved(&array),
            ..self.clone()
        })
    }

    /// Replaces the array sizes, keeping emitters and the (unresolved)
    /// constraint description.
    pub fn with_sizes(&self, n_rx: usize, n_tx: usize, n_samples: usize) -> ScenarioFile {
        ScenarioFile {
            array: ArrayFile {
                n_tx,
                n_rx,
                n_samples,
            },
            ..self.clone()
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json_str(text: &str) -> Result<ScenarioFile> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<ScenarioFile> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_json(&text)
    }

    /// A bundled scenario name, or else a path to a scenario file.
    pub fn load_source(source: &str) -> Result<ScenarioFile> {
        if let Some(text) = bundled_scenario(source) {
            return parse_json(text);
        }
        let path = Path::new(source);
        if !path.exists() {
            return Err(Error::config(
                "scenario",
                format!(
                    "`{source}` is neither a file nor a bundled scenario ({})",
                    BUNDLED.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", ")
                ),
            ));
        }
        ScenarioFile::load(path)
    }
}

/// Deserializes JSON, reporting the offending key path on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut key = err.path().to_string();
        let message = err.inner().to_string();
        let field = ["unknown field `", "missing field `"]
            .iter()
            .find_map(|p| message.strip_prefix(p))
            .and_then(|rest| rest.split('`').next());
        if let Some(field) = field {
            if key == "." {
                key = field.to_string();
            } else if !key.ends_with(&format!(".{field}")) && key != field {
                key = format!("{key}.{field}");
            }
        }
        Error::config(key, message)
    })
}

/// Scenarios shipped with the binary.
pub const BUNDLED: &[(&str, &str)] = &[
    ("desk_cm", include_str!("../../scenarios/desk_cm.json")),
    ("desk_cms", include_str!("../../scenarios/desk_cms.json")),
    ("desk_eps_cm", include_str!("../../scenarios/desk_eps_cm.json")),
];

pub fn bundled_scenario(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}

/// Loads a bundled scenario by name.
pub fn bundled(name: &str) -> Result<Scenario> {
    let text = bundled_scenario(name)
        .ok_or_else(|| Error::config("scenario", format!("no bundled scenario `{name}`")))?;
    parse_json::<ScenarioFile>(text)?.to_scenario()
}

pub fn constraint_arc(scenario: &Scenario) -> Arc<ConstraintSpec> {
    Arc::new(scenario.constraint.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_scenarios_parse() {
        for (name, _) in BUNDLED {
            let sc = bundled(name).unwrap();
            assert_eq!(sc.array, ArrayConfig::new(10, 10, 8).unwrap());
            assert_eq!(sc.interferers.len(), 3);
            assert!((sc.snr_scale() - 1000.0).abs() < 1e-9);
            assert!(sc.interference_ratios().iter().all(|r| (r - 100.0).abs() < 1e-9));
        }
        let cms = bundled("desk_cms").unwrap();
        match cms.constraint {
            ConstraintSpec::Cms { eps, modulus, .. } => {
                assert_eq!(eps, 1.0 / 80f64.sqrt());
                assert_eq!(modulus, eps);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let text = r#"{"array":{"n_tx":1,"n_rx":1,"n_samples":2,"n_rxx":3},
            "target":{"range_bin":0,"angle_deg":0,"power_db":0},
            "noise_power_db":0,"constraint":{"type":"cm"}}"#;
        match ScenarioFile::from_json_str(text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "array.n_rxx"),
            other => panic!("unexpected {other:?}"),
        }
        let text = r#"{"array":{"n_tx":1,"n_rx":1,"n_samples":2},
            "target":{"range_bin":0,"angle_deg":0,"power_db":0},
            "noise_power_db":0,"constraint":{"type":"cm","eps":1}}"#;
        match ScenarioFile::from_json_str(text) {
            Err(Error::Config { key, .. }) => assert!(key.contains("eps"), "{key}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn type_errors_name_the_path() {
        let text = r#"{"array":{"n_tx":1,"n_rx":1,"n_samples":2},
            "target":{"range_bin":0,"angle_deg":"fifteen","power_db":0},
            "noise_power_db":0,"constraint":{"type":"cm"}}"#;
        match ScenarioFile::from_json_str(text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "target.angle_deg"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn resolved_echo_round_trips() {
        for (name, text) in BUNDLED {
            let file = ScenarioFile::from_json_str(text).unwrap();
            let echo = file.resolved().unwrap().to_json_string();
            let reparsed = ScenarioFile::from_json_str(&echo).unwrap();
            assert_eq!(reparsed.to_scenario().unwrap(), file.to_scenario().unwrap(), "{name}");
        }
    }

    #[test]
    fn explicit_reference_must_be_constant_modulus() {
        let text = r#"{"array":{"n_tx":1,"n_rx":1,"n_samples":2},
            "target":{"range_bin":0,"angle_deg":0,"power_db":0},
            "noise_power_db":0,
            "constraint":{"type":"cms","modulus":1,"eps":0.5,"reference":[[1,0],[0,0.5]]}}"#;
        let file = ScenarioFile::from_json_str(text).unwrap();
        assert!(matches!(file.to_scenario(), Err(Error::Config { .. })));
    }

    #[test]
    fn unknown_source_is_a_config_error() {
        assert!(matches!(
            ScenarioFile::load_source("/nonexistent/scenario.json"),
            Err(Error::Config { .. })
        ));
    }
}
