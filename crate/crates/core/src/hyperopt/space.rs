use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::recommender::{Method, ParamValue, Params, Variant};
use crate::{Error, Result};

/// When a hyperparameter is tuned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Together with the base algorithm (and Extend/Boost).
    Joint,
    /// Afterwards, with the joint winner frozen (Remind weights).
    PostHoc,
}

impl Phase {
    pub fn of(param: &str) -> Phase {
        match param {
            "remind_sessions_num" | "weight_rel" | "weight_base" | "weight_irec" | "weight_ssim" => Phase::PostHoc,
            _ => Phase::Joint,
        }
    }
}

/// Finite value set per hyperparameter of one algorithm variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub variant: Variant,
    pub params: BTreeMap<String, Vec<ParamValue>>,
}

fn ints(values: impl IntoIterator<Item = i64>) -> Vec<ParamValue> {
    values.into_iter().map(ParamValue::Int).collect()
}

fn reals(values: &[f64]) -> Vec<ParamValue> {
    values.iter().map(|&v| ParamValue::Real(v)).collect()
}

fn words(values: &[&str]) -> Vec<ParamValue> {
    values.iter().map(|v| ParamValue::Str(v.to_string())).collect()
}

fn strengths() -> Vec<ParamValue> {
    let mut v = vec![ParamValue::Bool(false)];
    v.extend(ints([1, 2, 5, 10]));
    v
}

const LAMBDA_POSITION: [f64; 6] = [0.00001, 0.4525, 0.905, 1.81, 3.62, 7.24];
const LAMBDA_RECENCY: [f64; 7] = [2.5, 5.0, 10.0, 20.0, 40.0, 80.0, 100.0];
const DECAYS: [&str; 5] = ["same", "div", "linear", "quadratic", "log"];

impl SearchSpace {
    /// The published search space for `variant`.
    pub fn standard(variant: Variant) -> Self {
        let mut p: BTreeMap<String, Vec<ParamValue>> = BTreeMap::new();
        let mut put = |k: &str, v: Vec<ParamValue>| {
            p.insert(k.to_string(), v);
        };
        match variant.method {
            Method::Sr => {
                put("steps", ints((2..=15).chain([20, 25, 30])));
                put("weighting", words(&["linear", "div", "quadratic", "log"]));
            }
            Method::Vsknn => {
                put("k", ints([50, 100, 500, 1000, 1500]));
                put("sample_size", ints([500, 1000, 2500, 5000, 10000]));
                put("weighting", words(&DECAYS));
                put("weighting_score", words(&DECAYS));
                put("idf_weighting", strengths());
            }
            Method::Stan | Method::Vstan => {
                put("k", ints([100, 200, 500, 1000, 1500, 2000]));
                put("sample_size", ints([1000, 2500, 5000, 10000]));
                put("lambda_spw", reals(&LAMBDA_POSITION));
                put("lambda_snh", reals(&LAMBDA_RECENCY));
                put("lambda_inh", reals(&LAMBDA_POSITION));
                if variant.method == Method::Vstan {
                    put("similarity", words(&["cosine", "vec"]));
                    put("lambda_ipw", reals(&LAMBDA_POSITION));
                    put("lambda_idf", strengths());
                }
            }
        }
        if variant.extend {
            put("extend_session_length", ints(1..=25));
        }
        if variant.boost {
            // 0.1, 0.3, ..., 3.9
            put("boost_own_sessions", (0..20).map(|i| ParamValue::Real((2 * i + 1) as f64 / 10.0)).collect());
        }
        if variant.remind {
            put("remind_sessions_num", ints(1..=10));
            put("weight_rel", ints(1..=10));
            put("weight_irec", ints(0..=9));
            if variant.method != Method::Sr {
                put("weight_ssim", ints(0..=9));
            }
        }
        SearchSpace { variant, params: p }
    }

    /// The standard space with some value sets replaced.
    pub fn with_overrides(variant: Variant, overrides: &BTreeMap<String, Vec<ParamValue>>) -> Result<Self> {
        let mut space = SearchSpace::standard(variant);
        for (name, values) in overrides {
            if !space.params.contains_key(name) {
                return Err(Error::InvalidConfig(format!("{variant}: '{name}' is not a tunable parameter")));
            }
            space.params.insert(name.clone(), values.clone());
        }
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<()> {
        match self.params.iter().find(|(_, v)| v.is_empty()) {
            Some((name, _)) => Err(Error::InvalidConfig(format!("empty value set for '{name}'"))),
            None => Ok(()),
        }
    }

    /// The sub-space of one phase.
    pub fn phase(&self, phase: Phase) -> SearchSpace {
        SearchSpace {
            variant: self.variant,
            params: self
                .params
                .iter()
                .filter(|(k, _)| Phase::of(k) == phase)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    /// Number of distinct configurations.
    pub fn size(&self) -> u128 {
        self.params.values().map(|v| v.len() as u128).product()
    }
}

/// Draws every hyperparameter independently and uniformly.
pub fn sample_config(space: &SearchSpace, seed: u64) -> Params {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    space
        .params
        .iter()
        .map(|(name, values)| (name.clone(), values[rng.gen_range(0..values.len())].clone()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sr_space() {
        let space = SearchSpace::standard(Variant::base(Method::Sr));
        let steps: Vec<i64> = space.params["steps"]
            .iter()
            .map(|v| match v {
                ParamValue::Int(i) => *i,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(steps, (2..=15).chain([20, 25, 30]).collect::<Vec<_>>());
        for seed in 0..50 {
            let c = sample_config(&space, seed);
            assert!(space.params["steps"].contains(&c["steps"]));
            assert!(space.params["weighting"].contains(&c["weighting"]));
        }
    }

    #[test]
    fn boost_grid() {
        let space = SearchSpace::standard("vsknn_b".parse().unwrap());
        let b = &space.params["boost_own_sessions"];
        assert_eq!(b.len(), 20);
        assert_eq!(b[0], ParamValue::Real(0.1));
        assert_eq!(b[19], ParamValue::Real(3.9));
    }

    #[test]
    fn sr_remind_has_no_ssim() {
        let space = SearchSpace::standard("sr_br".parse().unwrap());
        assert!(!space.params.contains_key("weight_ssim"));
        assert!(SearchSpace::standard("stan_r".parse().unwrap()).params.contains_key("weight_ssim"));
    }

    #[test]
    fn singleton_space_and_seed() {
        let mut params = BTreeMap::new();
        params.insert("steps".to_string(), vec![ParamValue::Int(7)]);
        params.insert("weighting".to_string(), vec![ParamValue::Str("log".into())]);
        let space = SearchSpace::with_overrides(Variant::base(Method::Sr), &params).unwrap();
        assert_eq!(sample_config(&space, 3), params.into_iter().map(|(k, v)| (k, v[0].clone())).collect());

        let full = SearchSpace::standard("vstan_ebr".parse().unwrap());
        assert_eq!(sample_config(&full, 42), sample_config(&full, 42));
    }

    #[test]
    fn phases_partition() {
        let space = SearchSpace::standard("stan_ebr".parse().unwrap());
        let joint = space.phase(Phase::Joint);
        let post = space.phase(Phase::PostHoc);
        assert_eq!(joint.params.len() + post.params.len(), space.params.len());
        assert_eq!(post.params.len(), 4);
        assert!(joint.params.contains_key("extend_session_length"));
    }

    #[test]
    fn bad_override() {
        let mut params = BTreeMap::new();
        params.insert("k".to_string(), vec![ParamValue::Int(7)]);
        assert!(SearchSpace::with_overrides(Variant::base(Method::Sr), &params).is_err());
        params.clear();
        params.insert("steps".to_string(), vec![]);
        assert!(SearchSpace::with_overrides(Variant::base(Method::Sr), &params).is_err());
    }
}
