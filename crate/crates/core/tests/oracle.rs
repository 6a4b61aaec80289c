mod common;

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sessbench_core::algorithms::{
    fit, load_model, save_model, AlgorithmConfig, Decay, PredictionContext, Recommender, Similarity, SrConfig,
    StanConfig, VsknnConfig, VstanConfig,
};

const INSTANCES: u64 = 300;

fn random_knn<R: Rng>(rng: &mut R) -> (NaiveKnn, AlgorithmConfig) {
    let k = rng.gen_range(1..=12);
    let sample_size = rng.gen_range(1..=60);
    match rng.gen_range(0..3) {
        0 => {
            let weighting = random_decay(rng);
            let weighting_score = random_decay(rng);
            let idf_weighting = [None, Some(1), Some(2), Some(5), Some(10)][rng.gen_range(0..5)];
            (
                NaiveKnn::Vsknn {
                    k,
                    sample_size,
                    weighting,
                    weighting_score,
                    idf_weighting,
                },
                AlgorithmConfig::Vsknn(VsknnConfig {
                    k,
                    sample_size,
                    weighting,
                    weighting_score,
                    idf_weighting,
                }),
            )
        }
        1 => {
            let (spw, snh, inh) = (random_lambda(rng), [2.5, 10.0, 100.0][rng.gen_range(0..3)], random_lambda(rng));
            (
                NaiveKnn::Stan {
                    k,
                    sample_size,
                    spw,
                    snh,
                    inh,
                },
                AlgorithmConfig::Stan(StanConfig {
                    k,
                    sample_size,
                    lambda_spw: spw,
                    lambda_snh: snh,
                    lambda_inh: inh,
                }),
            )
        }
        _ => {
            let similarity = if rng.gen_bool(0.5) { Similarity::Cosine } else { Similarity::Vec };
            let (spw, snh, inh, ipw) = (random_lambda(rng), 20.0, random_lambda(rng), random_lambda(rng));
            let idf = [None, Some(1), Some(5)][rng.gen_range(0..3)];
            (
                NaiveKnn::Vstan {
                    k,
                    sample_size,
                    similarity,
                    spw,
                    snh,
                    inh,
                    ipw,
                    idf,
                },
                AlgorithmConfig::Vstan(VstanConfig {
                    k,
                    sample_size,
                    similarity,
                    lambda_spw: spw,
                    lambda_snh: snh,
                    lambda_inh: inh,
                    lambda_ipw: ipw,
                    lambda_idf: idf,
                }),
            )
        }
    }
}

fn predict(cfg: &AlgorithmConfig, inst: &Instance) -> Vec<(u32, f64)> {
    let model = fit(&inst.train, cfg).unwrap();
    let ctx = PredictionContext::new(&inst.query, &inst.query_times, &inst.history, inst.now);
    model.predict(&ctx).into_entries()
}

#[test]
fn sr_matches_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..INSTANCES {
        let inst = random_instance(&mut rng);
        let steps = rng.gen_range(1..=12);
        let weighting = random_decay(&mut rng);
        let got = predict(&AlgorithmConfig::Sr(SrConfig { steps, weighting }), &inst);
        assert_eq!(got, naive_sr(&inst.train, steps, weighting, &inst.query), "case {case}");
    }
}

#[test]
fn sknn_matches_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..INSTANCES {
        let inst = random_instance(&mut rng);
        let (k, sample_size) = (rng.gen_range(1..=12), rng.gen_range(1..=60));
        let cfg = AlgorithmConfig::Vsknn(VsknnConfig {
            k,
            sample_size,
            weighting: Decay::Same,
            weighting_score: Decay::Same,
            idf_weighting: None,
        });
        let naive = NaiveKnn::Vsknn {
            k,
            sample_size,
            weighting: Decay::Same,
            weighting_score: Decay::Same,
            idf_weighting: None,
        };
        assert_eq!(predict(&cfg, &inst), naive_knn(&inst.train, naive, &inst.query, inst.now), "case {case}");
    }
}

#[test]
fn neighbor_methods_match_full_scan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..INSTANCES {
        let inst = random_instance(&mut rng);
        let (naive, cfg) = random_knn(&mut rng);
        assert_eq!(
            predict(&cfg, &inst),
            naive_knn(&inst.train, naive, &inst.query, inst.now),
            "case {case}: {cfg:?}"
        );
    }
}

#[test]
fn predictions_survive_save_and_load() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for case in 0..40 {
        let inst = random_instance(&mut rng);
        let (_, cfg) = random_knn(&mut rng);
        let cfg = if case % 4 == 0 { AlgorithmConfig::Sr(SrConfig::default()) } else { cfg };
        let model = fit(&inst.train, &cfg).unwrap();
        let path = dir.path().join("model.json");
        save_model(&model, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, model);
        let ctx = PredictionContext::new(&inst.query, &inst.query_times, &inst.history, inst.now);
        assert_eq!(loaded.predict(&ctx), model.predict(&ctx));
    }
}
