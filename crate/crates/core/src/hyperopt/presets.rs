//! Published optimal hyperparameters per dataset, as named starting points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::recommender::{Method, ParamValue, Params, Variant};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dataset {
    Retail,
    Xing,
    Cosmetics,
    Lastfm,
}

impl Dataset {
    pub const ALL: [Dataset; 4] = [Dataset::Retail, Dataset::Xing, Dataset::Cosmetics, Dataset::Lastfm];

    pub fn name(self) -> &'static str {
        match self {
            Dataset::Retail => "retail",
            Dataset::Xing => "xing",
            Dataset::Cosmetics => "cosmetics",
            Dataset::Lastfm => "lastfm",
        }
    }
}

impl fmt::Display for Dataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Dataset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Dataset::ALL
            .into_iter()
            .find(|d| d.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown preset dataset '{s}'")))
    }
}

/// (variant name, parameters) in `key=value` form; `False` disables a strength.
fn table(dataset: Dataset, method: Method, extended: bool) -> (&'static str, &'static str) {
    use Dataset::*;
    use Method::*;
    match (method, extended, dataset) {
        (Sr, false, Retail) => ("sr", "steps=15 weighting=quadratic"),
        (Sr, false, Xing) => ("sr", "steps=25 weighting=quadratic"),
        (Sr, false, Cosmetics) => ("sr", "steps=15 weighting=div"),
        (Sr, false, Lastfm) => ("sr", "steps=8 weighting=quadratic"),
        (Sr, true, Retail) => (
            "sr_br",
            "steps=12 weighting=quadratic boost_own_sessions=3.1 remind_sessions_num=2 weight_rel=5 weight_irec=3",
        ),
        (Sr, true, Xing) => (
            "sr_br",
            "steps=30 weighting=quadratic boost_own_sessions=1.9 remind_sessions_num=6 weight_rel=8 weight_irec=4",
        ),
        (Sr, true, Cosmetics) => (
            "sr_br",
            "steps=15 weighting=div boost_own_sessions=3.7 remind_sessions_num=9 weight_rel=8 weight_irec=3",
        ),
        (Sr, true, Lastfm) => ("sr_b", "steps=20 weighting=quadratic boost_own_sessions=3.1"),

        (Vsknn, false, Retail) => (
            "vsknn",
            "k=50 sample_size=500 weighting=log weighting_score=linear idf_weighting=10",
        ),
        (Vsknn, false, Xing) => (
            "vsknn",
            "k=100 sample_size=500 weighting=log weighting_score=quadratic idf_weighting=10",
        ),
        (Vsknn, false, Cosmetics) => (
            "vsknn",
            "k=100 sample_size=10000 weighting=quadratic weighting_score=div idf_weighting=10",
        ),
        (Vsknn, false, Lastfm) => (
            "vsknn",
            "k=50 sample_size=500 weighting=quadratic weighting_score=quadratic idf_weighting=5",
        ),
        (Vsknn, true, Retail) => (
            "vsknn_ebr",
            "k=1500 sample_size=1000 weighting=log weighting_score=linear idf_weighting=1 \
             extend_session_length=8 boost_own_sessions=0.1 \
             remind_sessions_num=4 weight_rel=8 weight_irec=1 weight_ssim=1",
        ),
        (Vsknn, true, Xing) => (
            "vsknn_r",
            "k=100 sample_size=500 weighting=log weighting_score=quadratic idf_weighting=10 \
             remind_sessions_num=8 weight_rel=2 weight_irec=1 weight_ssim=0",
        ),
        (Vsknn, true, Cosmetics) => (
            "vsknn_ebr",
            "k=1500 sample_size=10000 weighting=quadratic weighting_score=div idf_weighting=10 \
             extend_session_length=2 boost_own_sessions=0.9 \
             remind_sessions_num=10 weight_rel=9 weight_irec=2 weight_ssim=3",
        ),
        (Vsknn, true, Lastfm) => (
            "vsknn_eb",
            "k=50 sample_size=500 weighting=quadratic weighting_score=quadratic idf_weighting=1 \
             extend_session_length=3 boost_own_sessions=2.5",
        ),

        (Stan, false, Retail) => (
            "stan",
            "k=1500 sample_size=2500 lambda_spw=0.905 lambda_snh=100 lambda_inh=0.4525",
        ),
        (Stan, false, Xing) => (
            "stan",
            "k=100 sample_size=10000 lambda_spw=0.4525 lambda_snh=80 lambda_inh=0.4525",
        ),
        (Stan, false, Cosmetics) => (
            "stan",
            "k=500 sample_size=2500 lambda_spw=0.905 lambda_snh=40 lambda_inh=0.4525",
        ),
        (Stan, false, Lastfm) => (
            "stan",
            "k=100 sample_size=10000 lambda_spw=0.00001 lambda_snh=80 lambda_inh=3.62",
        ),
        (Stan, true, Retail) => (
            "stan_er",
            "k=200 sample_size=1000 lambda_spw=0.905 lambda_snh=100 lambda_inh=0.905 \
             extend_session_length=2 remind_sessions_num=9 weight_rel=10 weight_irec=3 weight_ssim=2",
        ),
        (Stan, true, Xing) => (
            "stan_r",
            "k=100 sample_size=10000 lambda_spw=0.4525 lambda_snh=80 lambda_inh=0.4525 \
             remind_sessions_num=3 weight_rel=10 weight_irec=2 weight_ssim=1",
        ),
        (Stan, true, Cosmetics) => (
            "stan_ebr",
            "k=1500 sample_size=5000 lambda_spw=0.905 lambda_snh=100 lambda_inh=7.24 \
             extend_session_length=2 boost_own_sessions=1.9 \
             remind_sessions_num=4 weight_rel=10 weight_irec=1 weight_ssim=1",
        ),
        (Stan, true, Lastfm) => (
            "stan_ebr",
            "k=100 sample_size=2500 lambda_spw=0.00001 lambda_snh=100 lambda_inh=7.24 \
             extend_session_length=17 boost_own_sessions=2.7 \
             remind_sessions_num=3 weight_rel=5 weight_irec=0 weight_ssim=6",
        ),

        (Vstan, false, Retail) => (
            "vstan",
            "k=200 sample_size=5000 similarity=vec lambda_spw=1.81 lambda_snh=40 lambda_inh=0.905 \
             lambda_ipw=0.905 lambda_idf=False",
        ),
        (Vstan, false, Xing) => (
            "vstan",
            "k=1500 sample_size=10000 similarity=cosine lambda_spw=3.62 lambda_snh=20 lambda_inh=0.4525 \
             lambda_ipw=0.4525 lambda_idf=10",
        ),
        (Vstan, false, Cosmetics) => (
            "vstan",
            "k=500 sample_size=1000 similarity=cosine lambda_spw=3.62 lambda_snh=80 lambda_inh=0.4525 \
             lambda_ipw=0.905 lambda_idf=False",
        ),
        (Vstan, false, Lastfm) => (
            "vstan",
            "k=1000 sample_size=5000 similarity=cosine lambda_spw=1.81 lambda_snh=100 lambda_inh=1.81 \
             lambda_ipw=0.0001 lambda_idf=False",
        ),
        (Vstan, true, Retail) => (
            "vstan_ebr",
            "k=2000 sample_size=10000 similarity=cosine lambda_spw=0.905 lambda_snh=80 lambda_inh=1.81 \
             lambda_ipw=3.62 lambda_idf=5 extend_session_length=5 boost_own_sessions=0.1 \
             remind_sessions_num=2 weight_rel=6 weight_irec=2 weight_ssim=0",
        ),
        (Vstan, true, Xing) => (
            "vstan_r",
            "k=1500 sample_size=10000 similarity=cosine lambda_spw=3.62 lambda_snh=20 lambda_inh=0.4525 \
             lambda_ipw=0.4525 lambda_idf=10 remind_sessions_num=3 weight_rel=9 weight_irec=1 weight_ssim=5",
        ),
        (Vstan, true, Cosmetics) => (
            "vstan_ebr",
            "k=500 sample_size=1000 similarity=cosine lambda_spw=0.905 lambda_snh=80 lambda_inh=0.4525 \
             lambda_ipw=3.62 lambda_idf=1 extend_session_length=1 boost_own_sessions=3.1 \
             remind_sessions_num=5 weight_rel=7 weight_irec=1 weight_ssim=0",
        ),
        (Vstan, true, Lastfm) => (
            "vstan_eb",
            "k=1000 sample_size=10000 similarity=cosine lambda_spw=0.4525 lambda_snh=100 lambda_inh=3.62 \
             lambda_ipw=0.4525 lambda_idf=5 extend_session_length=7 boost_own_sessions=3.7",
        ),
    }
}

fn parse_value(raw: &str) -> ParamValue {
    if raw == "False" {
        ParamValue::Bool(false)
    } else if let Ok(i) = raw.parse::<i64>() {
        // real-valued parameters accept integers, so 100 stays exact either way
        ParamValue::Int(i)
    } else if let Ok(r) = raw.parse::<f64>() {
        ParamValue::Real(r)
    } else {
        ParamValue::Str(raw.to_string())
    }
}

/// Optimal configuration of `method` on `dataset`: plain, or with the best
/// extension combination found for it.
pub fn optimum(dataset: Dataset, method: Method, extended: bool) -> (Variant, Params) {
    let (name, params) = table(dataset, method, extended);
    let variant = name.parse().expect("preset variant names are valid");
    let params = params
        .split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').expect("preset entries are key=value");
            (k.to_string(), parse_value(v))
        })
        .collect();
    (variant, params)
}

/// Looks up a preset by variant name, e.g. `stan_er` on RETAIL.
pub fn preset(dataset: Dataset, name: &str) -> Result<(Variant, Params)> {
    let wanted: Variant = name.parse()?;
    [false, true]
        .into_iter()
        .map(|ext| optimum(dataset, wanted.method, ext))
        .find(|(v, _)| *v == wanted)
        .ok_or_else(|| Error::InvalidConfig(format!("no published optimum for {name} on {dataset}")))
}
