//! Unique-pair coverage metrics.
//!
//! * Joint-SACo: unique `(state, joint action)` pairs over transitions.
//! * JOJACo: unique `(all observations, joint action)` pairs over transitions.
//! * DecOACo: per agent, unique `(own observation, own action)` pairs over
//!   transitions.
//!
//! Pairs are compared by the exact little-endian bytes of their values, so
//! two floats are equal only when their bit patterns are. In the default
//! mode each key is reduced to a 128-bit XXH3 digest; exact mode keeps the
//! full byte keys and exists to validate the hashed path.

use std::collections::{BTreeMap, HashMap};
use std::hash::{BuildHasherDefault, Hasher};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_128;

use crate::error::{Error, Result};
use crate::model::{Actions, TrajectoryDataset};

/// 128-bit digest of a serialized `(observation or state, action)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoverageKey(pub u128);

impl CoverageKey {
    pub fn of_bytes(bytes: &[u8]) -> Self {
        CoverageKey(xxh3_128(bytes))
    }
}

/// Which key family the count-frequency spectrum was computed over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumBasis {
    StateAction,
    /// Used when the dataset has no state column.
    JointObservationAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub total_transitions: u64,
    pub unique_state_action: Option<u64>,
    pub unique_joint_obs_action: u64,
    pub unique_per_agent: BTreeMap<String, u64>,
    pub joint_saco: Option<f64>,
    pub jojaco: f64,
    pub decoaco: BTreeMap<String, f64>,
    /// Multiplicity `c` -> number of distinct keys seen exactly `c` times.
    pub count_frequency: BTreeMap<u64, u64>,
    pub count_frequency_basis: SpectrumBasis,
    pub exact_mode: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CoverageOptions {
    /// Store full serialized keys instead of digests.
    pub exact: bool,
    /// Snap every float to a multiple of this step before serialization.
    /// Off by default; equality is then bitwise.
    pub quantize: Option<f32>,
}

pub fn coverage_report(dataset: &TrajectoryDataset, exact: bool) -> Result<CoverageReport> {
    coverage_report_with(
        dataset,
        &CoverageOptions {
            exact,
            quantize: None,
        },
    )
}

pub fn coverage_report_with(
    dataset: &TrajectoryDataset,
    options: &CoverageOptions,
) -> Result<CoverageReport> {
    dataset.ensure_valid()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(step) = options.quantize {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "quantization step {step} must be positive"
            )));
        }
    }
    let keys = KeyWriter::new(dataset, options.quantize);
    let counts = if options.exact {
        count_keys::<Vec<u8>>(&keys)
    } else {
        count_keys::<CoverageKey>(&keys)
    };

    let total = dataset.n_transitions() as u64;
    let ratio = |u: u64| u as f64 / total as f64;
    let has_state = dataset.state.is_some();
    let spectrum_counts = if has_state { &counts[0] } else { &counts[1] };
    let unique_state_action = has_state.then(|| counts[0].unique);
    let unique_per_agent: BTreeMap<String, u64> = dataset
        .agents
        .iter()
        .zip(&counts[2..])
        .map(|(a, c)| (a.agent_id.clone(), c.unique))
        .collect();
    Ok(CoverageReport {
        total_transitions: total,
        unique_state_action,
        unique_joint_obs_action: counts[1].unique,
        joint_saco: unique_state_action.map(ratio),
        jojaco: ratio(counts[1].unique),
        decoaco: unique_per_agent
            .iter()
            .map(|(k, &u)| (k.clone(), ratio(u)))
            .collect(),
        unique_per_agent,
        count_frequency: spectrum_counts.frequency.clone(),
        count_frequency_basis: if has_state {
            SpectrumBasis::StateAction
        } else {
            SpectrumBasis::JointObservationAction
        },
        exact_mode: options.exact,
    })
}

/// `(ln c, ln frequency)` per multiplicity, ascending in `c`.
pub fn coverage_spectrum_points(report: &CoverageReport) -> Result<Vec<(f64, f64)>> {
    if report.count_frequency.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(report
        .count_frequency
        .iter()
        .filter(|(_, &f)| f > 0)
        .map(|(&c, &f)| ((c as f64).ln(), (f as f64).ln()))
        .collect())
}

/// Identity-style hasher for keys that are already uniformly distributed
/// digests.
#[derive(Default)]
struct DigestHasher(u64);

impl Hasher for DigestHasher {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.0 = (self.0.rotate_left(5) ^ u64::from_le_bytes(buf))
                .wrapping_mul(0x9E37_79B9_7F4A_7C15);
        }
    }

    fn write_u128(&mut self, v: u128) {
        self.0 = (v as u64) ^ ((v >> 64) as u64);
    }
}

type DigestMap = HashMap<CoverageKey, u32, BuildHasherDefault<DigestHasher>>;

/// Key storage strategy: digests or full bytes.
trait KeyStore: Send + Sync + Sized {
    type Map: Default + Send;
    fn insert(map: &mut Self::Map, bytes: &[u8]);
    fn merge(into: &mut Self::Map, from: Self::Map);
    fn counts(map: &Self::Map) -> Box<dyn Iterator<Item = u32> + '_>;
    fn len(map: &Self::Map) -> usize;
}

impl KeyStore for CoverageKey {
    type Map = DigestMap;

    fn insert(map: &mut DigestMap, bytes: &[u8]) {
        *map.entry(CoverageKey::of_bytes(bytes)).or_insert(0) += 1;
    }

    fn merge(into: &mut DigestMap, from: DigestMap) {
        for (k, c) in from {
            *into.entry(k).or_insert(0) += c;
        }
    }

    fn counts(map: &DigestMap) -> Box<dyn Iterator<Item = u32> + '_> {
        Box::new(map.values().copied())
    }

    fn len(map: &DigestMap) -> usize {
        map.len()
    }
}

impl KeyStore for Vec<u8> {
    type Map = HashMap<Box<[u8]>, u32>;

    fn insert(map: &mut Self::Map, bytes: &[u8]) {
        if let Some(c) = map.get_mut(bytes) {
            *c += 1;
        } else {
            map.insert(bytes.into(), 1);
        }
    }

    fn merge(into: &mut Self::Map, from: Self::Map) {
        for (k, c) in from {
            *into.entry(k).or_insert(0) += c;
        }
    }

    fn counts(map: &Self::Map) -> Box<dyn Iterator<Item = u32> + '_> {
        Box::new(map.values().copied())
    }

    fn len(map: &Self::Map) -> usize {
        map.len()
    }
}

struct FamilyCounts {
    unique: u64,
    frequency: BTreeMap<u64, u64>,
}

const CHUNK_ROWS: usize = 8192;

/// Counts every key family: index 0 is state-action (empty when there is no
/// state), 1 is joint observation-action, then one per agent.
fn count_keys<S: KeyStore>(keys: &KeyWriter<'_>) -> Vec<FamilyCounts> {
    let families = 2 + keys.n_agents;
    let t = keys.dataset.n_transitions();
    let n_chunks = t.div_ceil(CHUNK_ROWS);
    let merged = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut maps: Vec<S::Map> = (0..families).map(|_| S::Map::default()).collect();
            let mut buf = Vec::new();
            let rows = chunk * CHUNK_ROWS..((chunk + 1) * CHUNK_ROWS).min(t);
            for row in rows {
                if keys.dataset.state.is_some() {
                    keys.state_action(row, &mut buf);
                    S::insert(&mut maps[0], &buf);
                }
                keys.joint_obs_action(row, &mut buf);
                S::insert(&mut maps[1], &buf);
                for agent in 0..keys.n_agents {
                    keys.agent_obs_action(row, agent, &mut buf);
                    S::insert(&mut maps[2 + agent], &buf);
                }
            }
            maps
        })
        .reduce_with(|mut a, b| {
            for (into, from) in a.iter_mut().zip(b) {
                if S::len(into) < S::len(&from) {
                    let small = std::mem::replace(into, from);
                    S::merge(into, small);
                } else {
                    S::merge(into, from);
                }
            }
            a
        })
        .unwrap_or_else(|| (0..families).map(|_| S::Map::default()).collect());

    merged
        .iter()
        .map(|m| {
            let mut frequency = BTreeMap::new();
            for c in S::counts(m) {
                *frequency.entry(c as u64).or_insert(0) += 1;
            }
            FamilyCounts {
                unique: S::len(m) as u64,
                frequency,
            }
        })
        .collect()
}

/// Serializes key bytes for one row. Joint actions follow agent order.
pub(crate) struct KeyWriter<'a> {
    dataset: &'a TrajectoryDataset,
    n_agents: usize,
    obs_dim: usize,
    act_width: usize,
    quantize: Option<f32>,
}

impl<'a> KeyWriter<'a> {
    pub(crate) fn new(dataset: &'a TrajectoryDataset, quantize: Option<f32>) -> Self {
        KeyWriter {
            dataset,
            n_agents: dataset.n_agents(),
            obs_dim: dataset.observation_dim(),
            act_width: dataset.action_width(),
            quantize,
        }
    }

    fn push_floats(&self, buf: &mut Vec<u8>, values: &[f32]) {
        match self.quantize {
            None => values
                .iter()
                .for_each(|v| buf.extend_from_slice(&v.to_bits().to_le_bytes())),
            Some(step) => values.iter().for_each(|&v| {
                let q = (v / step).round() * step;
                buf.extend_from_slice(&q.to_bits().to_le_bytes())
            }),
        }
    }

    fn push_actions(&self, buf: &mut Vec<u8>, lo: usize, hi: usize) {
        match &self.dataset.actions {
            Actions::Discrete(a) => a[lo..hi]
                .iter()
                .for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
            Actions::Continuous(a) => self.push_floats(buf, &a[lo..hi]),
        }
    }

    pub(crate) fn state_action(&self, row: usize, buf: &mut Vec<u8>) {
        buf.clear();
        let state = self.dataset.state.as_ref().expect("state column");
        self.push_floats(buf, &state.data[row * state.dim..(row + 1) * state.dim]);
        let aw = self.n_agents * self.act_width;
        self.push_actions(buf, row * aw, (row + 1) * aw);
    }

    pub(crate) fn joint_obs_action(&self, row: usize, buf: &mut Vec<u8>) {
        buf.clear();
        let ow = self.n_agents * self.obs_dim;
        self.push_floats(buf, &self.dataset.observations[row * ow..(row + 1) * ow]);
        let aw = self.n_agents * self.act_width;
        self.push_actions(buf, row * aw, (row + 1) * aw);
    }

    pub(crate) fn agent_obs_action(&self, row: usize, agent: usize, buf: &mut Vec<u8>) {
        buf.clear();
        let o = (row * self.n_agents + agent) * self.obs_dim;
        self.push_floats(buf, &self.dataset.observations[o..o + self.obs_dim]);
        let a = (row * self.n_agents + agent) * self.act_width;
        self.push_actions(buf, a, a + self.act_width);
    }
}
