//! Versioned JSON model files.
//!
//! Every file carries `format_version`; a file written by a newer version is
//! rejected before any other field is read.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binarize::BinarySchema;
use crate::data::{Label, Row};
use crate::error::{Error, Result};
use crate::linear::{Design, Encoding, HybridLinearModel, LossKind, LossSpec, Standardization};
use crate::route::Route;
use crate::rules::Rule;
use crate::ruleset::{HybridRuleSetModel, RuleSetPair};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Rules,
    Linear,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rules => "rules",
            ModelKind::Linear => "linear",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rules" => Ok(ModelKind::Rules),
            "linear" => Ok(ModelKind::Linear),
            other => Err(Error::invalid(format!(
                "unknown model kind `{other}` (expected rules or linear)"
            ))),
        }
    }
}

/// Either trained substitute.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Rules(HybridRuleSetModel),
    Linear(HybridLinearModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Rules(_) => ModelKind::Rules,
            Model::Linear(_) => ModelKind::Linear,
        }
    }

    pub fn predict(&self, x: &Row<'_>, yb: Label) -> Result<(Label, Route)> {
        match self {
            Model::Rules(m) => m.predict(x, yb),
            Model::Linear(m) => m.predict(x, yb),
        }
    }

    /// Conditions for rules, nonzero coefficients for linear models.
    pub fn complexity(&self) -> usize {
        match self {
            Model::Rules(m) => m.complexity(),
            Model::Linear(m) => m.complexity(),
        }
    }

    pub fn alphas(&self) -> (f64, f64) {
        match self {
            Model::Rules(m) => (m.alpha1, m.alpha2),
            Model::Linear(m) => (m.alpha1, m.alpha2),
        }
    }
}

/// A model plus the column names it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub model: Model,
    pub label_column: String,
    pub blackbox_column: String,
    /// Seed used for training, when training was randomized.
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    label_column: String,
    blackbox_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(flatten)]
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Body {
    Rules {
        alpha1: f64,
        alpha2: f64,
        positive_rules: Vec<Rule>,
        negative_rules: Vec<Rule>,
        training_objective: f64,
        conditions: BinarySchema,
    },
    Linear {
        alpha1: f64,
        alpha2: f64,
        features: Vec<String>,
        inputs: Vec<Encoding>,
        standardization: Vec<Standardization>,
        coefficients: Vec<f64>,
        theta_plus: f64,
        theta_minus: f64,
        loss: LossKind,
        mu: f64,
        objective: f64,
    },
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: Option<serde_json::Value>,
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Format(format!("`{name}` is not finite")))
    }
}

impl ModelFile {
    pub fn new(
        model: Model,
        label_column: impl Into<String>,
        blackbox_column: impl Into<String>,
        seed: Option<u64>,
    ) -> Self {
        ModelFile {
            model,
            label_column: label_column.into(),
            blackbox_column: blackbox_column.into(),
            seed,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let body = match &self.model {
            Model::Rules(m) => Body::Rules {
                alpha1: m.alpha1,
                alpha2: m.alpha2,
                positive_rules: m.pair.positive.clone(),
                negative_rules: m.pair.negative.clone(),
                training_objective: m.training_objective,
                conditions: m.schema.clone(),
            },
            Model::Linear(m) => Body::Linear {
                alpha1: m.alpha1,
                alpha2: m.alpha2,
                features: m.design.names(),
                inputs: m.design.inputs.clone(),
                standardization: m.design.standardization.clone(),
                coefficients: m.w.clone(),
                theta_plus: m.theta_plus,
                theta_minus: m.theta_minus,
                loss: m.loss.kind,
                mu: m.loss.mu,
                objective: m.objective,
            },
        };
        let env = Envelope {
            format_version: FORMAT_VERSION,
            label_column: self.label_column.clone(),
            blackbox_column: self.blackbox_column.clone(),
            seed: self.seed,
            body,
        };
        let mut s = serde_json::to_string_pretty(&env)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("not a model file: {e}")))?;
        let version = probe
            .format_version
            .ok_or_else(|| Error::Format("missing `format_version`".into()))?
            .as_u64()
            .ok_or_else(|| Error::Format("`format_version` must be a non-negative integer".into()))?;
        if version > FORMAT_VERSION as u64 {
            return Err(Error::UnsupportedVersion {
                found: version.min(u32::MAX as u64) as u32,
                supported: FORMAT_VERSION,
            });
        }
        if version == 0 {
            return Err(Error::Format("`format_version` must be at least 1".into()));
        }
        let env: Envelope = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        let model = match env.body {
            Body::Rules {
                alpha1,
                alpha2,
                positive_rules,
                negative_rules,
                training_objective,
                conditions,
            } => Model::Rules(HybridRuleSetModel {
                pair: RuleSetPair::new(positive_rules, negative_rules).map_err(|e| Error::Format(e.to_string()))?,
                alpha1: finite("alpha1", alpha1)?,
                alpha2: finite("alpha2", alpha2)?,
                training_objective: finite("training_objective", training_objective)?,
                schema: conditions,
            }),
            Body::Linear {
                alpha1,
                alpha2,
                features,
                inputs,
                standardization,
                coefficients,
                theta_plus,
                theta_minus,
                loss,
                mu,
                objective,
            } => {
                let m = HybridLinearModel {
                    design: Design {
                        inputs,
                        standardization,
                    },
                    w: coefficients,
                    theta_plus,
                    theta_minus,
                    loss: LossSpec::new(loss, mu).map_err(|e| Error::Format(e.to_string()))?,
                    alpha1: finite("alpha1", alpha1)?,
                    alpha2: finite("alpha2", alpha2)?,
                    objective: finite("objective", objective)?,
                };
                m.validate()?;
                if features != m.design.names() {
                    return Err(Error::Format("`features` disagrees with `inputs`".into()));
                }
                Model::Linear(m)
            }
        };
        Ok(ModelFile {
            model,
            label_column: env.label_column,
            blackbox_column: env.blackbox_column,
            seed: env.seed,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ModelFile::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::{Condition, Operator};
    use crate::data::{Dataset, FeatureColumn, FeatureTable};
    use crate::linear::{apg_train, ApgConfig};

    fn rules_file() -> ModelFile {
        let c1 = Condition::threshold("age", Operator::Le, 41.5);
        let c2 = Condition::category("color", Operator::Ne, "red");
        let model = HybridRuleSetModel {
            pair: RuleSetPair::new(
                vec![Rule::new(vec![c1.clone(), c2.clone()]).unwrap()],
                vec![Rule::new(vec![c2.clone()]).unwrap()],
            )
            .unwrap(),
            alpha1: 0.01,
            alpha2: 0.2,
            training_objective: 0.125,
            schema: BinarySchema::new(vec![c1, c2]),
        };
        ModelFile::new(Model::Rules(model), "label", "bb", Some(42))
    }

    fn linear_file() -> ModelFile {
        let table = FeatureTable::new(vec![
            FeatureColumn::numeric("x", vec![-2.0, -1.0, 1.0, 2.5]),
            FeatureColumn::new("c", vec!["a".into(), "b".into(), "a".into(), "b".into()]),
        ])
        .unwrap();
        use Label::*;
        let d = Dataset::new(
            table,
            vec![Negative, Negative, Positive, Positive],
            vec![Negative, Positive, Positive, Positive],
        )
        .unwrap();
        let m = apg_train(
            &d,
            0.01,
            0.1,
            &LossSpec::default(),
            &ApgConfig {
                max_iter: 50,
                ..ApgConfig::default()
            },
        )
        .unwrap();
        ModelFile::new(Model::Linear(m), "y", "yb", None)
    }

    #[test]
    fn round_trips() {
        for f in [rules_file(), linear_file()] {
            let text = f.to_json().unwrap();
            let back = ModelFile::from_json(&text).unwrap();
            assert_eq!(back, f);
            assert_eq!(back.to_json().unwrap(), text);
        }
    }

    #[test]
    fn future_version_fails_closed() {
        let text = rules_file()
            .to_json()
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 2");
        assert!(matches!(
            ModelFile::from_json(&text),
            Err(Error::UnsupportedVersion { found: 2, supported: 1 })
        ));
        // even when the rest of the file is unreadable
        let err = ModelFile::from_json(r#"{"format_version": 7, "kind": "quantum"}"#).unwrap_err();
        assert!(matches!(err, Error::UnsupportedVersion { found: 7, .. }));
    }

    #[test]
    fn malformed_files_are_format_errors() {
        for text in [
            "",
            "[]",
            r#"{"kind": "rules"}"#,
            r#"{"format_version": "1"}"#,
            r#"{"format_version": 0}"#,
            r#"{"format_version": 1, "kind": "rules"}"#,
        ] {
            assert!(matches!(ModelFile::from_json(text), Err(Error::Format(_))), "{text}");
        }
        let bad = linear_file()
            .to_json()
            .unwrap()
            .replace("\"theta_plus\"", "\"theta_plus\": -99.0, \"ignored\"");
        assert!(ModelFile::from_json(&bad).is_err());
    }

    #[test]
    fn rule_file_has_readable_conditions() {
        let text = rules_file().to_json().unwrap();
        assert!(text.contains("\"kind\": \"rules\""));
        assert!(text.contains("\"op\": \"<=\""));
        assert!(text.contains("\"value\": 41.5"));
    }
}
