//! Versioned JSON instance files.
//!
//! Rationals are strings (`"3/8"`, `"2"`, or a decimal such as `"0.375"`
//! when `k` is declared). Unknown fields are rejected at every level.
//!
//! ```json
//! { "version": 1, "model": "binary", "n": 2, "class": "additive",
//!   "params": { "values": ["1/2", "2/5"] }, "costs": ["1/10", "1/5"] }
//! ```

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use combicon::robust::{GeneralInstance, RewardModel};
use combicon::{BitPrecision, Error, Instance, Matroid, Rational, SuccessFunction};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Binary,
    General,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub version: u32,
    pub model: Model,
    pub n: usize,
    /// Class of `f` (binary) or of `R` (general without distributions).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    pub costs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    /// Upper bound on `f`; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rewards: Option<Vec<String>>,
    /// `distributions[j][mask]`: probability of outcome `j` under the set
    /// with bitmask `mask`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distributions: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ValuesParams {
    values: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BudgetParams {
    values: Vec<String>,
    budget: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoverageParams {
    weights: Vec<String>,
    /// Element indices (0-based) covered by each action.
    covers: Vec<Vec<usize>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatroidParams {
    weights: Vec<String>,
    matroid: MatroidSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum MatroidSpec {
    Uniform {
        rank: usize,
    },
    /// Blocks list 1-based actions.
    Partition {
        blocks: Vec<Vec<usize>>,
        capacities: Vec<usize>,
    },
}

/// A parsed and validated instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Loaded {
    Binary(Instance),
    General(GeneralInstance),
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Validation(format!("malformed instance file: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("instance files serialize");
        out.push('\n');
        out
    }

    pub fn from_instance(inst: &Instance) -> Self {
        let (class, params) = function_params(inst.function());
        InstanceFile {
            version: SCHEMA_VERSION,
            model: Model::Binary,
            n: inst.n(),
            class: Some(class),
            params: Some(params),
            costs: strings(inst.costs()),
            k: inst.precision().map(BitPrecision::bits),
            scale: (*inst.scale() != Rational::one()).then(|| inst.scale().to_string()),
            rewards: None,
            distributions: None,
        }
    }

    pub fn from_general(inst: &GeneralInstance) -> Self {
        let (class, params, distributions) = match inst.model() {
            RewardModel::Expected(f) => {
                let (class, params) = function_params(f);
                (Some(class), Some(params), None)
            }
            RewardModel::Distributions(d) => (None, None, Some(d.iter().map(|t| strings(t)).collect())),
        };
        InstanceFile {
            version: SCHEMA_VERSION,
            model: Model::General,
            n: inst.n(),
            class,
            params,
            costs: strings(inst.costs()),
            k: None,
            scale: None,
            rewards: Some(strings(inst.rewards())),
            distributions,
        }
    }

    /// Parses and validates; any violation aborts with the full report.
    pub fn load(&self) -> Result<Loaded, CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported schema version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        let k = self.k.map(BitPrecision::new).transpose()?;
        let costs = rationals(&self.costs, k, "costs")?;
        if costs.len() != self.n {
            return Err(CliError::Validation(format!("n = {} but {} costs were given", self.n, costs.len())));
        }
        match self.model {
            Model::Binary => {
                if self.rewards.is_some() || self.distributions.is_some() {
                    return Err(CliError::Validation("binary instances take no rewards or distributions".into()));
                }
                let f = self.function(k)?;
                let mut inst = Instance::new(f, costs)?;
                if let Some(k) = k {
                    inst = inst.with_precision(k);
                }
                if let Some(scale) = &self.scale {
                    inst = inst.with_scale(rational(scale, k, "scale")?);
                }
                let report = inst.validate();
                if !report.is_valid() {
                    return Err(CliError::Validation(format!("invalid instance:\n{report}")));
                }
                Ok(Loaded::Binary(inst))
            }
            Model::General => {
                if self.scale.is_some() {
                    return Err(CliError::Validation("general instances take no scale".into()));
                }
                let rewards = self.rewards.as_ref().ok_or_else(|| CliError::Validation("general instances need rewards".into()))?;
                let rewards = rationals(rewards, k, "rewards")?;
                let model = match (&self.distributions, &self.class) {
                    (Some(d), None) => RewardModel::Distributions(
                        d.iter().map(|t| rationals(t, k, "distributions")).collect::<Result<_, _>>()?,
                    ),
                    (None, Some(_)) => RewardModel::Expected(self.function(k)?),
                    _ => {
                        return Err(CliError::Validation(
                            "general instances need exactly one of distributions or class/params".into(),
                        ))
                    }
                };
                GeneralInstance::new(costs, rewards, model).map(Loaded::General).map_err(|e| match e {
                    Error::Invariant(report) => CliError::Validation(format!("invalid instance:\n{report}")),
                    other => other.into(),
                })
            }
        }
    }

    fn function(&self, k: Option<BitPrecision>) -> Result<SuccessFunction, CliError> {
        let class = self.class.as_deref().ok_or_else(|| CliError::Validation("missing class".into()))?;
        let params = self.params.clone().ok_or_else(|| CliError::Validation("missing params".into()))?;
        let f = match class {
            "additive" => SuccessFunction::Additive { values: rationals(&typed::<ValuesParams>(params)?.values, k, "values")? },
            "unit-demand" => SuccessFunction::UnitDemand { values: rationals(&typed::<ValuesParams>(params)?.values, k, "values")? },
            "table" => SuccessFunction::Table { values: rationals(&typed::<ValuesParams>(params)?.values, k, "values")? },
            "budget-additive" => {
                let p: BudgetParams = typed(params)?;
                SuccessFunction::BudgetAdditive { values: rationals(&p.values, k, "values")?, budget: rational(&p.budget, k, "budget")? }
            }
            "coverage" => {
                let p: CoverageParams = typed(params)?;
                SuccessFunction::Coverage { weights: rationals(&p.weights, k, "weights")?, covers: p.covers }
            }
            "matroid-rank" => {
                let p: MatroidParams = typed(params)?;
                let matroid = match p.matroid {
                    MatroidSpec::Uniform { rank } => Matroid::Uniform { rank },
                    MatroidSpec::Partition { blocks, capacities } => {
                        let blocks = blocks
                            .into_iter()
                            .map(|b| {
                                b.into_iter()
                                    .map(|a| a.checked_sub(1).ok_or_else(|| CliError::Validation("actions are numbered from 1".into())))
                                    .collect::<Result<Vec<_>, _>>()
                            })
                            .collect::<Result<_, _>>()?;
                        Matroid::Partition { blocks, capacities }
                    }
                };
                SuccessFunction::MatroidRank { matroid, weights: rationals(&p.weights, k, "weights")? }
            }
            other => return Err(CliError::Validation(format!("unknown class {other:?}"))),
        };
        Ok(f)
    }
}

fn function_params(f: &SuccessFunction) -> (String, serde_json::Value) {
    let params = match f {
        SuccessFunction::Additive { values } | SuccessFunction::UnitDemand { values } | SuccessFunction::Table { values } => {
            value(&ValuesParams { values: strings(values) })
        }
        SuccessFunction::BudgetAdditive { values, budget } => {
            value(&BudgetParams { values: strings(values), budget: budget.to_string() })
        }
        SuccessFunction::Coverage { weights, covers } => {
            value(&CoverageParams { weights: strings(weights), covers: covers.clone() })
        }
        SuccessFunction::MatroidRank { matroid, weights } => {
            let matroid = match matroid {
                Matroid::Uniform { rank } => MatroidSpec::Uniform { rank: *rank },
                Matroid::Partition { blocks, capacities } => MatroidSpec::Partition {
                    blocks: blocks.iter().map(|b| b.iter().map(|a| a + 1).collect()).collect(),
                    capacities: capacities.clone(),
                },
            };
            value(&MatroidParams { weights: strings(weights), matroid })
        }
    };
    (f.class().name().to_string(), params)
}

fn value<T: Serialize>(params: &T) -> serde_json::Value {
    serde_json::to_value(params).expect("params serialize")
}

fn typed<T: DeserializeOwned>(params: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(params).map_err(|e| CliError::Validation(format!("bad params: {e}")))
}

fn strings(values: &[Rational]) -> Vec<String> {
    values.iter().map(ToString::to_string).collect()
}

fn rational(s: &str, k: Option<BitPrecision>, field: &str) -> Result<Rational, CliError> {
    Rational::parse_with_precision(s, k).map_err(|e| CliError::Validation(format!("{field}: {e}")))
}

fn rationals(values: &[String], k: Option<BitPrecision>, field: &str) -> Result<Vec<Rational>, CliError> {
    values.iter().map(|s| rational(s, k, field)).collect()
}

/// Parses `level:payment` pairs into a payment table.
pub fn parse_payments(spec: &str) -> Result<BTreeMap<Rational, Rational>, CliError> {
    spec.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (level, pay) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("payment {pair:?} is not of the form level:payment")))?;
            Ok((parse_rational(level)?, parse_rational(pay)?))
        })
        .collect()
}

pub fn parse_rational(s: &str) -> Result<Rational, CliError> {
    s.parse().map_err(|e| CliError::Usage(format!("{e}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use combicon::functions::example_instance;
    use combicon::generators::{gen_exponential_coverage, sample_instance};
    use combicon::robust::sample_general_instance;
    use combicon::{ActionSet, FunctionClass};

    fn round_trip(inst: &Instance) {
        let text = InstanceFile::from_instance(inst).to_json();
        let back = InstanceFile::from_json(&text).unwrap().load().unwrap();
        assert_eq!(back, Loaded::Binary(inst.clone()));
    }

    #[test]
    fn every_class_round_trips() {
        for class in FunctionClass::ALL {
            for seed in 0..4 {
                round_trip(&sample_instance(class, 4, BitPrecision::new(7).unwrap(), seed).unwrap());
            }
        }
        round_trip(&example_instance());
        round_trip(&gen_exponential_coverage(3).unwrap());
    }

    #[test]
    fn general_round_trips() {
        let inst = sample_general_instance(3, 3, 9).unwrap();
        let text = InstanceFile::from_general(&inst).to_json();
        assert_eq!(InstanceFile::from_json(&text).unwrap().load().unwrap(), Loaded::General(inst));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let top = r#"{"version":1,"model":"binary","n":1,"class":"additive","params":{"values":["1/2"]},"costs":["1/4"],"extra":0}"#;
        assert!(InstanceFile::from_json(top).is_err());
        let nested = r#"{"version":1,"model":"binary","n":1,"class":"additive","params":{"values":["1/2"],"x":1},"costs":["1/4"]}"#;
        assert!(InstanceFile::from_json(nested).unwrap().load().is_err());
    }

    #[test]
    fn decimals_need_a_declared_precision() {
        let base = |k: &str| {
            format!(r#"{{"version":1,"model":"binary","n":1,"class":"additive","params":{{"values":["0.5"]}},"costs":["1/4"]{k}}}"#)
        };
        assert!(InstanceFile::from_json(&base("")).unwrap().load().is_err());
        let Loaded::Binary(inst) = InstanceFile::from_json(&base(r#","k":2"#)).unwrap().load().unwrap() else {
            panic!("binary")
        };
        assert_eq!(inst.value(ActionSet::full(1)).unwrap(), Rational::frac(1, 2));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = r#"{"version":2,"model":"binary","n":1,"class":"additive","params":{"values":["1/2"]},"costs":["1/4"]}"#;
        assert!(matches!(InstanceFile::from_json(text).unwrap().load(), Err(CliError::Validation(_))));
    }

    #[test]
    fn payments_parse() {
        let t = parse_payments("0:0, 3/5:1/5").unwrap();
        assert_eq!(t[&Rational::frac(3, 5)], Rational::frac(1, 5));
        assert!(parse_payments("1/2").is_err());
    }
}
