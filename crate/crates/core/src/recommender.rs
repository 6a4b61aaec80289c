//! Named algorithm variants (`vsknn`, `stan_er`, `sr_b`, ...), their flat
//! parameter maps, and the wrapper that chains a base model with Extend,
//! Boost and Remind.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::algorithms::{
    fit, AlgorithmConfig, PredictionContext, Recommender, ScoredList, Similarity, SrConfig, StanConfig,
    TrainedModel, VsknnConfig, VstanConfig,
};
use crate::extensions::{
    boost_scores, extend_session, past_session_similarities, remind_combine, BoostConfig, ExtendConfig,
    RemindConfig,
};
use crate::preprocess::{Session, SessionLog};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sr,
    Vsknn,
    Stan,
    Vstan,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sr, Method::Vsknn, Method::Stan, Method::Vstan];

    pub fn name(self) -> &'static str {
        match self {
            Method::Sr => "sr",
            Method::Vsknn => "vsknn",
            Method::Stan => "stan",
            Method::Vstan => "vstan",
        }
    }

    pub fn default_config(self) -> AlgorithmConfig {
        match self {
            Method::Sr => AlgorithmConfig::Sr(SrConfig::default()),
            Method::Vsknn => AlgorithmConfig::Vsknn(VsknnConfig::default()),
            Method::Stan => AlgorithmConfig::Stan(StanConfig::default()),
            Method::Vstan => AlgorithmConfig::Vstan(VstanConfig::default()),
        }
    }
}

/// A base method plus the enabled extensions, named like `vsknn_ebr`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct Variant {
    pub method: Method,
    pub extend: bool,
    pub boost: bool,
    pub remind: bool,
}

impl Variant {
    pub fn base(method: Method) -> Self {
        Variant {
            method,
            extend: false,
            boost: false,
            remind: false,
        }
    }

    pub fn has_extensions(&self) -> bool {
        self.extend || self.boost || self.remind
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.method.name())?;
        if self.has_extensions() {
            f.write_str("_")?;
            for (on, c) in [(self.extend, 'e'), (self.boost, 'b'), (self.remind, 'r')] {
                if on {
                    write!(f, "{c}")?;
                }
            }
        }
        Ok(())
    }
}

impl From<Variant> for String {
    fn from(v: Variant) -> String {
        v.to_string()
    }
}

impl TryFrom<String> for Variant {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::UnknownAlgorithm(s.to_string());
        let (base, suffix) = match s.split_once('_') {
            Some((b, suf)) => (b, Some(suf)),
            None => (s, None),
        };
        let method = Method::ALL.into_iter().find(|m| m.name() == base).ok_or_else(unknown)?;
        let mut v = Variant::base(method);
        if let Some(suffix) = suffix {
            if suffix.is_empty() {
                return Err(unknown());
            }
            // flags must appear in e, b, r order without repeats
            let mut last = 0;
            for c in suffix.chars() {
                let rank = match c {
                    'e' => 1,
                    'b' => 2,
                    'r' => 3,
                    _ => return Err(unknown()),
                };
                if rank <= last {
                    return Err(unknown());
                }
                last = rank;
                match c {
                    'e' => v.extend = true,
                    'b' => v.boost = true,
                    _ => v.remind = true,
                }
            }
        }
        Ok(v)
    }
}

/// A hyperparameter value as it appears in config files and trial logs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Bool(bool),
    Int(i64),
    Real(f64),
    Str(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Bool(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r}"),
            ParamValue::Str(s) => f.write_str(s),
        }
    }
}

impl ParamValue {
    fn as_f64(&self, name: &str) -> Result<f64> {
        match self {
            ParamValue::Int(i) => Ok(*i as f64),
            ParamValue::Real(r) => Ok(*r),
            _ => Err(bad_value(name, self)),
        }
    }

    fn as_usize(&self, name: &str) -> Result<usize> {
        match self {
            ParamValue::Int(i) if *i >= 0 => Ok(*i as usize),
            ParamValue::Real(r) if *r >= 0.0 && r.fract() == 0.0 => Ok(*r as usize),
            _ => Err(bad_value(name, self)),
        }
    }

    fn as_u32(&self, name: &str) -> Result<u32> {
        u32::try_from(self.as_usize(name)?).map_err(|_| bad_value(name, self))
    }

    fn as_str(&self, name: &str) -> Result<&str> {
        match self {
            ParamValue::Str(s) => Ok(s),
            _ => Err(bad_value(name, self)),
        }
    }

    /// `false` (or 0) disables; a positive integer is the strength.
    fn as_strength(&self, name: &str) -> Result<Option<u32>> {
        match self {
            ParamValue::Bool(false) => Ok(None),
            ParamValue::Str(s) if s.eq_ignore_ascii_case("false") => Ok(None),
            _ => match self.as_u32(name)? {
                0 => Ok(None),
                n => Ok(Some(n)),
            },
        }
    }
}

fn bad_value(name: &str, value: &ParamValue) -> Error {
    Error::InvalidConfig(format!("invalid value {value} for '{name}'"))
}

fn strength(v: Option<u32>) -> ParamValue {
    match v {
        Some(n) => ParamValue::Int(n as i64),
        None => ParamValue::Bool(false),
    }
}

/// Flat hyperparameter assignment, keyed by parameter name.
pub type Params = BTreeMap<String, ParamValue>;

/// Fully specified algorithm: base config plus optional extensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub base: AlgorithmConfig,
    pub extend: Option<ExtendConfig>,
    pub boost: Option<BoostConfig>,
    pub remind: Option<RemindConfig>,
}

impl AlgorithmSpec {
    pub fn method(&self) -> Method {
        match self.base {
            AlgorithmConfig::Sr(_) => Method::Sr,
            AlgorithmConfig::Vsknn(_) => Method::Vsknn,
            AlgorithmConfig::Stan(_) => Method::Stan,
            AlgorithmConfig::Vstan(_) => Method::Vstan,
        }
    }

    pub fn variant(&self) -> Variant {
        Variant {
            method: self.method(),
            extend: self.extend.is_some(),
            boost: self.boost.is_some(),
            remind: self.remind.is_some(),
        }
    }

    pub fn name(&self) -> String {
        self.variant().to_string()
    }

    /// Defaults for `variant`, overridden by `params`. Unknown names and
    /// parameters of disabled extensions are rejected.
    pub fn from_params(variant: Variant, params: &Params) -> Result<Self> {
        let mut spec = AlgorithmSpec {
            base: variant.method.default_config(),
            extend: variant.extend.then_some(ExtendConfig { desired_length: 5 }),
            boost: variant.boost.then_some(BoostConfig { boost: 0.1 }),
            remind: variant.remind.then_some(RemindConfig {
                sessions: 3,
                weight_rel: 5,
                weight_irec: 1,
                weight_ssim: 0,
            }),
        };
        for (name, value) in params {
            spec.set(name, value).map_err(|e| match e {
                Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{variant}: {msg}")),
                other => other,
            })?;
        }
        spec.validate()?;
        Ok(spec)
    }

    fn set(&mut self, name: &str, v: &ParamValue) -> Result<()> {
        let unknown = || Error::InvalidConfig(format!("unknown parameter '{name}'"));
        match name {
            "extend_session_length" => {
                self.extend.as_mut().ok_or_else(unknown)?.desired_length = v.as_usize(name)?;
                return Ok(());
            }
            "boost_own_sessions" => {
                self.boost.as_mut().ok_or_else(unknown)?.boost = v.as_f64(name)?;
                return Ok(());
            }
            "remind_sessions_num" | "weight_rel" | "weight_base" | "weight_irec" | "weight_ssim" => {
                let r = self.remind.as_mut().ok_or_else(unknown)?;
                match name {
                    "remind_sessions_num" => r.sessions = v.as_usize(name)?,
                    "weight_rel" | "weight_base" => r.weight_rel = v.as_u32(name)?,
                    "weight_irec" => r.weight_irec = v.as_u32(name)?,
                    _ => r.weight_ssim = v.as_u32(name)?,
                }
                return Ok(());
            }
            _ => {}
        }
        match &mut self.base {
            AlgorithmConfig::Sr(c) => match name {
                "steps" => c.steps = v.as_usize(name)?,
                "weighting" => c.weighting = v.as_str(name)?.parse()?,
                _ => return Err(unknown()),
            },
            AlgorithmConfig::Vsknn(c) => match name {
                "k" => c.k = v.as_usize(name)?,
                "sample_size" => c.sample_size = v.as_usize(name)?,
                "weighting" => c.weighting = v.as_str(name)?.parse()?,
                "weighting_score" => c.weighting_score = v.as_str(name)?.parse()?,
                "idf_weighting" => c.idf_weighting = v.as_strength(name)?,
                _ => return Err(unknown()),
            },
            AlgorithmConfig::Stan(c) => match name {
                "k" => c.k = v.as_usize(name)?,
                "sample_size" => c.sample_size = v.as_usize(name)?,
                "lambda_spw" => c.lambda_spw = v.as_f64(name)?,
                "lambda_snh" => c.lambda_snh = v.as_f64(name)?,
                "lambda_inh" => c.lambda_inh = v.as_f64(name)?,
                _ => return Err(unknown()),
            },
            AlgorithmConfig::Vstan(c) => match name {
                "k" => c.k = v.as_usize(name)?,
                "sample_size" => c.sample_size = v.as_usize(name)?,
                "similarity" => {
                    c.similarity = match v.as_str(name)? {
                        "cosine" => Similarity::Cosine,
                        "vec" => Similarity::Vec,
                        _ => return Err(bad_value(name, v)),
                    }
                }
                "lambda_spw" => c.lambda_spw = v.as_f64(name)?,
                "lambda_snh" => c.lambda_snh = v.as_f64(name)?,
                "lambda_inh" => c.lambda_inh = v.as_f64(name)?,
                "lambda_ipw" => c.lambda_ipw = v.as_f64(name)?,
                "lambda_idf" => c.lambda_idf = v.as_strength(name)?,
                _ => return Err(unknown()),
            },
        }
        Ok(())
    }

    /// Flat parameter map; `from_params(variant, &to_params())` round-trips.
    pub fn to_params(&self) -> Params {
        let mut p = Params::new();
        let mut put = |k: &str, v: ParamValue| {
            p.insert(k.to_string(), v);
        };
        let int = |n: usize| ParamValue::Int(n as i64);
        let text = |s: &str| ParamValue::Str(s.to_string());
        match &self.base {
            AlgorithmConfig::Sr(c) => {
                put("steps", int(c.steps));
                put("weighting", text(c.weighting.name()));
            }
            AlgorithmConfig::Vsknn(c) => {
                put("k", int(c.k));
                put("sample_size", int(c.sample_size));
                put("weighting", text(c.weighting.name()));
                put("weighting_score", text(c.weighting_score.name()));
                put("idf_weighting", strength(c.idf_weighting));
            }
            AlgorithmConfig::Stan(c) => {
                put("k", int(c.k));
                put("sample_size", int(c.sample_size));
                put("lambda_spw", ParamValue::Real(c.lambda_spw));
                put("lambda_snh", ParamValue::Real(c.lambda_snh));
                put("lambda_inh", ParamValue::Real(c.lambda_inh));
            }
            AlgorithmConfig::Vstan(c) => {
                put("k", int(c.k));
                put("sample_size", int(c.sample_size));
                put(
                    "similarity",
                    text(match c.similarity {
                        Similarity::Cosine => "cosine",
                        Similarity::Vec => "vec",
                    }),
                );
                put("lambda_spw", ParamValue::Real(c.lambda_spw));
                put("lambda_snh", ParamValue::Real(c.lambda_snh));
                put("lambda_inh", ParamValue::Real(c.lambda_inh));
                put("lambda_ipw", ParamValue::Real(c.lambda_ipw));
                put("lambda_idf", strength(c.lambda_idf));
            }
        }
        if let Some(e) = &self.extend {
            put("extend_session_length", int(e.desired_length));
        }
        if let Some(b) = &self.boost {
            put("boost_own_sessions", ParamValue::Real(b.boost));
        }
        if let Some(r) = &self.remind {
            put("remind_sessions_num", int(r.sessions));
            put("weight_rel", int(r.weight_rel as usize));
            put("weight_irec", int(r.weight_irec as usize));
            put("weight_ssim", int(r.weight_ssim as usize));
        }
        p
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if let Some(e) = &self.extend {
            e.validate()?;
        }
        if let Some(b) = &self.boost {
            b.validate()?;
        }
        if let Some(r) = &self.remind {
            r.validate()?;
        }
        Ok(())
    }

    pub fn fit(&self, train: &SessionLog) -> Result<SessionAwareRecommender> {
        self.validate()?;
        Ok(SessionAwareRecommender {
            base: fit(train, &self.base)?,
            extend: self.extend.clone(),
            boost: self.boost.clone(),
            remind: self.remind.clone(),
        })
    }
}

/// Base model chained with Extend, then Boost, then Remind.
#[derive(Clone, Debug)]
pub struct SessionAwareRecommender {
    pub base: TrainedModel,
    pub extend: Option<ExtendConfig>,
    pub boost: Option<BoostConfig>,
    pub remind: Option<RemindConfig>,
}

impl SessionAwareRecommender {
    pub fn new(base: TrainedModel) -> Self {
        SessionAwareRecommender {
            base,
            extend: None,
            boost: None,
            remind: None,
        }
    }
}

impl Recommender for SessionAwareRecommender {
    fn predict(&self, ctx: &PredictionContext<'_>) -> ScoredList {
        let extended;
        let ctx = match &self.extend {
            Some(cfg) => {
                extended = extend_session(ctx, cfg);
                &extended
            }
            None => ctx,
        };
        let mut list = self.base.predict(ctx);
        if let Some(cfg) = &self.boost {
            list = boost_scores(list, ctx, cfg);
        }
        if let Some(cfg) = &self.remind {
            let sims = if cfg.weight_ssim > 0 {
                past_session_similarities(&self.base, ctx, cfg.sessions)
            } else {
                None
            };
            list = remind_combine(list, ctx, cfg, sims.as_deref());
        }
        list
    }

    fn session_similarity(&self, ctx: &PredictionContext<'_>, other: &Session) -> Option<f64> {
        self.base.session_similarity(ctx, other)
    }
}
