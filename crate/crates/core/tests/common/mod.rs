//! Independent oracles and random fixtures shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use trajvault_core::model::{ActionRows, DatasetBuilder, Step};
use trajvault_core::rng::StreamRng;
use trajvault_core::{Actions, AgentSpec, TrajectoryDataset, VaultMeta};

/// Random dataset of roughly `target_t` transitions whose values come from a
/// small lattice, so pairs repeat.
pub fn random_dataset(seed: u64, target_t: usize) -> TrajectoryDataset {
    let mut rng = StreamRng::with_stream_id(seed, 0xACCE);
    let n = 1 + rng.index(4);
    let od = 1 + rng.index(3);
    let discrete = rng.unit() < 0.7;
    let ad = 1 + rng.index(2);
    let state_dim = if rng.unit() < 0.8 {
        Some(1 + rng.index(3))
    } else {
        None
    };
    let levels = 2 + rng.index(6);
    let card = 2 + rng.index(4);
    let max_len = 1 + rng.index(40);
    let agents: Vec<AgentSpec> = (0..n)
        .map(|i| {
            if discrete {
                AgentSpec::discrete(format!("a{i}"), od as u32, card as u32)
            } else {
                AgentSpec::continuous(format!("a{i}"), od as u32, ad as u32)
            }
        })
        .collect();
    let mut b = DatasetBuilder::new(agents, state_dim);
    let lattice = |rng: &mut StreamRng| rng.index(levels) as f32 / levels as f32;
    while b.len() < target_t {
        let len = 1 + rng.index(max_len);
        b.begin_episode();
        for t in 0..len {
            let obs: Vec<f32> = (0..n * od).map(|_| lattice(&mut rng)).collect();
            let state: Option<Vec<f32>> =
                state_dim.map(|sd| (0..sd).map(|_| lattice(&mut rng)).collect());
            let da: Vec<i32> = (0..n).map(|_| rng.index(card) as i32).collect();
            let ca: Vec<f32> = (0..n * ad).map(|_| lattice(&mut rng) - 0.5).collect();
            let r = rng.uniform(-1.0, 1.0) as f32;
            b.push_step(Step {
                observations: &obs,
                actions: if discrete {
                    ActionRows::Discrete(&da)
                } else {
                    ActionRows::Continuous(&ca)
                },
                rewards: &vec![r; n],
                state: state.as_deref(),
                terminal: t + 1 == len,
            });
        }
    }
    let mut meta = VaultMeta::named(format!("random-{seed}"));
    meta.source = "fixture".into();
    b.finish(meta)
}

fn f32_bits(v: &[f32]) -> impl Iterator<Item = u32> + '_ {
    v.iter().map(|x| x.to_bits())
}

fn action_bits(d: &TrajectoryDataset, t: usize, agent: Option<usize>) -> Vec<u32> {
    let n = d.n_agents();
    let w = d.action_width();
    let (lo, hi) = match agent {
        Some(i) => ((t * n + i) * w, (t * n + i + 1) * w),
        None => (t * n * w, (t + 1) * n * w),
    };
    match &d.actions {
        Actions::Discrete(a) => a[lo..hi].iter().map(|&x| x as u32).collect(),
        Actions::Continuous(a) => f32_bits(&a[lo..hi]).collect(),
    }
}

/// Unique count and count-frequency spectrum of a key list, by sorting.
pub fn sorted_key_stats(mut keys: Vec<Vec<u32>>) -> (u64, BTreeMap<u64, u64>) {
    keys.sort_unstable();
    let mut spectrum = BTreeMap::new();
    let mut unique = 0u64;
    let mut i = 0;
    while i < keys.len() {
        let mut j = i + 1;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        unique += 1;
        *spectrum.entry((j - i) as u64).or_insert(0) += 1;
        i = j;
    }
    (unique, spectrum)
}

pub struct CoverageOracle {
    pub state_action: Option<(u64, BTreeMap<u64, u64>)>,
    pub joint: (u64, BTreeMap<u64, u64>),
    pub per_agent: Vec<u64>,
}

/// Brute-force coverage from sorted exact keys.
pub fn coverage_oracle(d: &TrajectoryDataset) -> CoverageOracle {
    let t = d.n_transitions();
    let n = d.n_agents();
    let od = d.observation_dim();
    let state_action = d.state.as_ref().map(|s| {
        let keys = (0..t)
            .map(|r| {
                let mut k: Vec<u32> = f32_bits(&s.data[r * s.dim..(r + 1) * s.dim]).collect();
                k.extend(action_bits(d, r, None));
                k
            })
            .collect();
        sorted_key_stats(keys)
    });
    let joint = sorted_key_stats(
        (0..t)
            .map(|r| {
                let mut k: Vec<u32> =
                    f32_bits(&d.observations[r * n * od..(r + 1) * n * od]).collect();
                k.extend(action_bits(d, r, None));
                k
            })
            .collect(),
    );
    let per_agent = (0..n)
        .map(|i| {
            let keys = (0..t)
                .map(|r| {
                    let lo = (r * n + i) * od;
                    let mut k: Vec<u32> = f32_bits(&d.observations[lo..lo + od]).collect();
                    k.extend(action_bits(d, r, Some(i)));
                    k
                })
                .collect();
            sorted_key_stats(keys).0
        })
        .collect();
    CoverageOracle {
        state_action,
        joint,
        per_agent,
    }
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Mean and population variance by two passes.
pub fn two_pass(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

/// Counts per bin by testing every value against every bin.
pub fn naive_bin_counts(values: &[f64], edges: &[f64]) -> Vec<u64> {
    let k = edges.len() - 1;
    let mut counts = vec![0u64; k];
    for &x in values {
        for i in 0..k {
            let inside = if i + 1 == k {
                x >= edges[i] && x <= edges[i + 1]
            } else {
                x >= edges[i] && x < edges[i + 1]
            };
            if inside {
                counts[i] += 1;
                break;
            }
        }
    }
    counts
}

/// Per-episode returns by a plain loop over rows.
pub fn naive_returns(d: &TrajectoryDataset) -> Vec<f64> {
    let n = d.n_agents();
    let mut out = Vec::new();
    let starts = &d.episode_starts;
    for (e, &s) in starts.iter().enumerate() {
        let end = starts.get(e + 1).map_or(d.n_transitions(), |&x| x as usize);
        let mut g = 0.0f64;
        for t in s as usize..end {
            let mut step = 0.0f64;
            for i in 0..n {
                step += d.rewards[t * n + i] as f64;
            }
            g += step / n as f64;
        }
        out.push(g);
    }
    out
}
