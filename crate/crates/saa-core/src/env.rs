//! Auction environments: the number of agents and goods, a preference
//! model, a price cap, and a master seed.
//!
//! Environments serialize to JSON with the keys `num_agents`, `num_goods`,
//! `model` (`"uniform"`, `"exponential"`, or `"fixed"`), `fixed_valuations`
//! (only for `"fixed"`), `price_cap`, and `seed`. Bundles appear as sorted
//! lists of 1-based good indices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::{
    sample_valuation_with, Bundle, DeadlinePruning, JobLengthModel, TableValuation,
    Valuation, DEADLINE_VALUE_MAX,
};

/// Default price cap for scheduling environments: above the largest
/// possible deadline value, as predictions need headroom at the cap.
pub const SCHEDULING_PRICE_CAP: u32 = 55;

#[derive(Debug, Clone, PartialEq)]
pub enum PreferenceModel {
    /// Scheduling valuations with job lengths uniform on {1..=M}.
    Uniform,
    /// Scheduling valuations with geometrically distributed job lengths.
    Exponential,
    /// One fixed table valuation per agent.
    Fixed(Vec<TableValuation>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentSpec {
    pub num_agents: usize,
    pub num_goods: usize,
    pub model: PreferenceModel,
    pub price_cap: u32,
    pub seed: u64,
    /// Monotonicity rule for sampled deadline values.
    pub deadline_pruning: DeadlinePruning,
}

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("num_agents must be at least 1")]
    NoAgents,
    #[error("num_goods must be at least 1")]
    NoGoods,
    #[error("price_cap must be at least 1")]
    ZeroPriceCap,
    #[error("model must be \"uniform\", \"exponential\", or \"fixed\", got {0:?}")]
    UnknownModel(String),
    #[error("fixed model requires fixed_valuations")]
    MissingFixedValuations,
    #[error("fixed_valuations only applies to the fixed model")]
    UnexpectedFixedValuations,
    #[error("fixed_valuations lists {got} agents, expected {expected}")]
    WrongAgentCount { expected: usize, got: usize },
    #[error("good index {0} out of range 1..={1}")]
    GoodOutOfRange(usize, usize),
    #[error("price_cap {cap} is below the maximum bundle value {max_value}")]
    PriceCapBelowValues { cap: u32, max_value: u32 },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

impl EnvironmentSpec {
    /// A scheduling environment with the default price cap.
    pub fn scheduling(
        num_agents: usize,
        num_goods: usize,
        model: JobLengthModel,
        seed: u64,
    ) -> Self {
        EnvironmentSpec {
            num_agents,
            num_goods,
            model: match model {
                JobLengthModel::Uniform => PreferenceModel::Uniform,
                JobLengthModel::Exponential => PreferenceModel::Exponential,
            },
            price_cap: SCHEDULING_PRICE_CAP,
            seed,
            deadline_pruning: DeadlinePruning::default(),
        }
    }

    /// A fixed-preference environment; the price cap must cover every
    /// listed bundle value.
    pub fn fixed(valuations: Vec<TableValuation>, price_cap: u32, seed: u64) -> Self {
        let num_goods = valuations.first().map_or(1, TableValuation::num_goods);
        EnvironmentSpec {
            num_agents: valuations.len(),
            num_goods,
            model: PreferenceModel::Fixed(valuations),
            price_cap,
            seed,
            deadline_pruning: DeadlinePruning::default(),
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.num_agents == 0 {
            return Err(EnvError::NoAgents);
        }
        if self.num_goods == 0 {
            return Err(EnvError::NoGoods);
        }
        if self.price_cap == 0 {
            return Err(EnvError::ZeroPriceCap);
        }
        match &self.model {
            PreferenceModel::Uniform | PreferenceModel::Exponential => {
                if self.price_cap < DEADLINE_VALUE_MAX {
                    return Err(EnvError::PriceCapBelowValues {
                        cap: self.price_cap,
                        max_value: DEADLINE_VALUE_MAX,
                    });
                }
            }
            PreferenceModel::Fixed(tables) => {
                if tables.len() != self.num_agents {
                    return Err(EnvError::WrongAgentCount {
                        expected: self.num_agents,
                        got: tables.len(),
                    });
                }
                for t in tables {
                    let max_value = t.max_listed_value();
                    if self.price_cap < max_value {
                        return Err(EnvError::PriceCapBelowValues {
                            cap: self.price_cap,
                            max_value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Draws the per-agent valuations for one game. Fixed environments
    /// ignore the generator.
    pub fn sample_agent_valuations(&self, rng: &mut impl rand::Rng) -> Vec<Valuation> {
        match &self.model {
            PreferenceModel::Uniform => (0..self.num_agents)
                .map(|_| {
                    Valuation::Scheduling(sample_valuation_with(
                        JobLengthModel::Uniform,
                        self.num_goods,
                        self.deadline_pruning,
                        rng,
                    ))
                })
                .collect(),
            PreferenceModel::Exponential => (0..self.num_agents)
                .map(|_| {
                    Valuation::Scheduling(sample_valuation_with(
                        JobLengthModel::Exponential,
                        self.num_goods,
                        self.deadline_pruning,
                        rng,
                    ))
                })
                .collect(),
            PreferenceModel::Fixed(tables) => {
                tables.iter().cloned().map(Valuation::Table).collect()
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&Dto::from(self)).expect("environment serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let dto: Dto = serde_json::from_str(text)?;
        let spec = dto.into_spec()?;
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Serialize, Deserialize)]
struct BundleValueDto {
    /// Sorted 1-based good indices.
    bundle: Vec<usize>,
    value: u32,
}

fn is_default_pruning(p: &DeadlinePruning) -> bool {
    *p == DeadlinePruning::default()
}

#[derive(Serialize, Deserialize)]
struct Dto {
    num_agents: usize,
    num_goods: usize,
    model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fixed_valuations: Option<Vec<Vec<BundleValueDto>>>,
    price_cap: u32,
    seed: u64,
    #[serde(default, skip_serializing_if = "is_default_pruning")]
    deadline_pruning: DeadlinePruning,
}

impl From<&EnvironmentSpec> for Dto {
    fn from(spec: &EnvironmentSpec) -> Self {
        let (model, fixed_valuations) = match &spec.model {
            PreferenceModel::Uniform => ("uniform".to_string(), None),
            PreferenceModel::Exponential => ("exponential".to_string(), None),
            PreferenceModel::Fixed(tables) => (
                "fixed".to_string(),
                Some(
                    tables
                        .iter()
                        .map(|t| {
                            t.entries()
                                .iter()
                                .map(|(b, v)| BundleValueDto {
                                    bundle: b.goods().iter().map(|g| g + 1).collect(),
                                    value: *v,
                                })
                                .collect()
                        })
                        .collect(),
                ),
            ),
        };
        Dto {
            num_agents: spec.num_agents,
            num_goods: spec.num_goods,
            model,
            fixed_valuations,
            price_cap: spec.price_cap,
            seed: spec.seed,
            deadline_pruning: spec.deadline_pruning,
        }
    }
}

impl Dto {
    fn into_spec(self) -> Result<EnvironmentSpec, EnvError> {
        let model = match self.model.as_str() {
            "uniform" | "exponential" => {
                if self.fixed_valuations.is_some() {
                    return Err(EnvError::UnexpectedFixedValuations);
                }
                if self.model == "uniform" {
                    PreferenceModel::Uniform
                } else {
                    PreferenceModel::Exponential
                }
            }
            "fixed" => {
                let lists =
                    self.fixed_valuations.ok_or(EnvError::MissingFixedValuations)?;
                let mut tables = Vec::with_capacity(lists.len());
                for entries in lists {
                    let mut parsed = Vec::with_capacity(entries.len());
                    for e in entries {
                        let mut goods = Vec::with_capacity(e.bundle.len());
                        for g in e.bundle {
                            if g == 0 || g > self.num_goods {
                                return Err(EnvError::GoodOutOfRange(
                                    g,
                                    self.num_goods,
                                ));
                            }
                            goods.push(g - 1);
                        }
                        parsed.push((Bundle::new(goods), e.value));
                    }
                    tables.push(TableValuation::new(self.num_goods, parsed));
                }
                PreferenceModel::Fixed(tables)
            }
            other => return Err(EnvError::UnknownModel(other.to_string())),
        };
        Ok(EnvironmentSpec {
            num_agents: self.num_agents,
            num_goods: self.num_goods,
            model,
            price_cap: self.price_cap,
            seed: self.seed,
            deadline_pruning: self.deadline_pruning,
        })
    }
}

impl Serialize for EnvironmentSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        Dto::from(self).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for EnvironmentSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let dto = Dto::deserialize(deserializer)?;
        dto.into_spec().map_err(serde::de::Error::custom)
    }
}
