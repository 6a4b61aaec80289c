#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Output;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DAY: u64 = 86_400;

#[derive(Clone, Copy, Debug)]
pub struct SynthSpec {
    pub users: usize,
    pub sessions_per_user: usize,
    pub items: usize,
    pub max_session_len: usize,
    pub days: u64,
    /// Probability that an event repeats an item from the user's past.
    pub repeat: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            users: 40,
            sessions_per_user: 25,
            items: 120,
            max_session_len: 8,
            days: 100,
            repeat: 0.3,
            seed: 7,
        }
    }
}

/// `(user, item, timestamp)` rows with Zipf item popularity and per-user
/// repeat consumption. Sessions are separated by more than one hour.
pub fn synthetic_rows(spec: &SynthSpec) -> Vec<(i64, i64, u64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let zipf = WeightedIndex::new((0..spec.items).map(|i| 1.0 / (i as f64 + 1.0))).unwrap();
    let mut rows = Vec::new();
    for user in 0..spec.users {
        let mut starts: Vec<u64> = (0..spec.sessions_per_user).map(|_| rng.gen_range(0..spec.days * DAY)).collect();
        starts.sort_unstable();
        // keep sessions apart so they survive sessionization as drawn
        for i in 1..starts.len() {
            starts[i] = starts[i].max(starts[i - 1] + 4 * 3600);
        }
        let mut seen: Vec<i64> = Vec::new();
        for start in starts {
            let len = rng.gen_range(2..=spec.max_session_len);
            let mut prev: Option<i64> = None;
            for k in 0..len as u64 {
                let item = if !seen.is_empty() && rng.gen_bool(spec.repeat) {
                    seen[rng.gen_range(0..seen.len())]
                } else if let (Some(p), true) = (prev, rng.gen_bool(0.5)) {
                    // sequential neighbor of the previous item
                    (p + 1 + rng.gen_range(0..3)) % spec.items as i64
                } else {
                    zipf.sample(&mut rng) as i64
                };
                rows.push((user as i64 + 1000, item + 5000, start + 60 * k));
                seen.push(item);
                prev = Some(item);
            }
        }
    }
    rows
}

pub fn write_csv(rows: &[(i64, i64, u64)], path: &Path) {
    let mut s = String::from("user_id,item_id,timestamp\n");
    for (u, i, t) in rows {
        let _ = writeln!(s, "{u},{i},{t}");
    }
    fs::write(path, s).unwrap();
}

/// Writes a log and a run config with small preprocessing thresholds.
pub fn setup_run(dir: &Path, spec: &SynthSpec, algorithms: &str, extra: &str) -> PathBuf {
    write_csv(&synthetic_rows(spec), &dir.join("events.csv"));
    let config = format!(
        r#"dataset = "synth"
out = "results"
seed = 11
{extra}

[input]
path = "events.csv"

[preprocess]
min_item_support = 2
min_session_length = 2
min_user_sessions = 3
num_slices = 5

[evaluation]
cutoffs = [5, 10, 20]

[tuning]
trials = 3
posthoc_trials = 2

{algorithms}
"#
    );
    let path = dir.join("run.toml");
    fs::write(&path, config).unwrap();
    path
}

pub fn sessbench(args: &[&str]) -> Output {
    std::process::Command::new(env!("CARGO_BIN_EXE_sessbench"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}
