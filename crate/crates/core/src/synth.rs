//! Deterministic synthetic Dec-POMDP trajectories for fixtures and oracles.
//!
//! The hidden state follows a seeded stable linear update with Gaussian
//! noise; each agent observes a seeded linear projection of it plus its own
//! noise. A behaviour knob picks between a fixed greedy rule and uniform
//! exploration. Rewards are shared and equal `base + quality * scale` plus
//! zero-mean noise, so expected returns are affine in the knob.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    ActionKind, ActionRows, AgentSpec, DatasetBuilder, Step, TrajectoryDataset, VaultMeta,
};
use crate::rng::{Stream, StreamRng};

/// Offset of per-episode stream ids, above every named [`Stream`].
const EPISODE_STREAM_BASE: u64 = 1 << 32;
/// Latent dimension used when the dataset carries no state column.
const HIDDEN_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecPomdpSpec {
    pub n_agents: usize,
    pub observation_dim: usize,
    pub action_kind: ActionKind,
    #[serde(default)]
    pub state_dim: Option<usize>,
    pub episode_length_range: (usize, usize),
    #[serde(default)]
    pub reward_base: f64,
    #[serde(default = "default_scale")]
    pub reward_scale: f64,
    #[serde(default)]
    pub reward_noise: f64,
    /// Rounds observations to multiples of `1 / obs_levels`, which makes
    /// repeated observation-action pairs likely.
    #[serde(default)]
    pub obs_levels: Option<u32>,
    /// Overwrites state channel 0 with the global row index.
    #[serde(default)]
    pub state_counter: bool,
}

fn default_scale() -> f64 {
    1.0
}

impl Default for DecPomdpSpec {
    fn default() -> Self {
        DecPomdpSpec {
            n_agents: 2,
            observation_dim: 3,
            action_kind: ActionKind::Discrete { cardinality: 4 },
            state_dim: Some(4),
            episode_length_range: (5, 20),
            reward_base: 0.0,
            reward_scale: 1.0,
            reward_noise: 0.1,
            obs_levels: None,
            state_counter: false,
        }
    }
}

impl DecPomdpSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        let (lo, hi) = self.episode_length_range;
        if self.n_agents == 0 {
            return bad("n_agents must be positive");
        }
        if self.observation_dim == 0 {
            return bad("observation_dim must be positive");
        }
        if self.action_kind.width() == 0 {
            return bad("action cardinality or dimension must be positive");
        }
        if let ActionKind::Discrete { cardinality: 0 | 1 } = self.action_kind {
            return bad("action cardinality must be at least 2");
        }
        if self.state_dim == Some(0) {
            return bad("state_dim must be positive when present");
        }
        if lo == 0 || lo > hi {
            return bad("episode_length_range must satisfy 1 <= min <= max");
        }
        if self.obs_levels == Some(0) {
            return bad("obs_levels must be positive when present");
        }
        if self.state_counter && self.state_dim.is_none() {
            return bad("state_counter requires a state column");
        }
        if !(self.reward_noise >= 0.0) {
            return bad("reward_noise must be non-negative");
        }
        Ok(())
    }

    fn agents(&self) -> Vec<AgentSpec> {
        (0..self.n_agents)
            .map(|i| AgentSpec {
                agent_id: format!("agent_{i}"),
                observation_dim: self.observation_dim as u32,
                action_kind: self.action_kind,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviourKnob {
    pub quality: f64,
    #[serde(default)]
    pub exploration_noise: f64,
}

impl BehaviourKnob {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quality) {
            return Err(Error::InvalidArgument(format!(
                "quality {} outside [0, 1]",
                self.quality
            )));
        }
        if !(self.exploration_noise >= 0.0) {
            return Err(Error::InvalidArgument(
                "exploration_noise must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Seeded linear dynamics shared by every episode of one generation run.
struct Model {
    hidden: usize,
    /// `hidden x hidden`, rows scaled so the update is contractive.
    transition: Vec<f64>,
    /// One `obs_dim x hidden` map per agent.
    emission: Vec<Vec<f64>>,
    /// One `width x obs_dim` policy map per agent.
    policy: Vec<Vec<f64>>,
}

impl Model {
    fn new(spec: &DecPomdpSpec, seed: u64) -> Self {
        let mut rng = StreamRng::new(seed, Stream::SynthModel);
        let hidden = spec.state_dim.unwrap_or(HIDDEN_DIM);
        let scale = 0.9 / hidden as f64;
        let transition = (0..hidden * hidden)
            .map(|_| rng.uniform(-scale, scale))
            .collect();
        let emission = (0..spec.n_agents)
            .map(|_| {
                (0..spec.observation_dim * hidden)
                    .map(|_| rng.uniform(-1.0, 1.0))
                    .collect()
            })
            .collect();
        let width = spec.action_kind.width();
        let policy = (0..spec.n_agents)
            .map(|_| {
                (0..width * spec.observation_dim)
                    .map(|_| rng.uniform(-1.0, 1.0))
                    .collect()
            })
            .collect();
        Model {
            hidden,
            transition,
            emission,
            policy,
        }
    }
}

fn mat_vec(m: &[f64], v: &[f64], rows: usize) -> Vec<f64> {
    let cols = v.len();
    (0..rows)
        .map(|r| {
            m[r * cols..(r + 1) * cols]
                .iter()
                .zip(v)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect()
}

/// Column buffers for one generated episode.
#[derive(Default)]
struct EpisodeRows {
    observations: Vec<f32>,
    discrete: Vec<i32>,
    continuous: Vec<f32>,
    rewards: Vec<f32>,
    state: Vec<f32>,
    len: usize,
}

fn simulate_episode(
    spec: &DecPomdpSpec,
    knob: &BehaviourKnob,
    model: &Model,
    mut rng: StreamRng,
) -> EpisodeRows {
    let (lo, hi) = spec.episode_length_range;
    let len = lo + rng.index(hi - lo + 1);
    let n = spec.n_agents;
    let od = spec.observation_dim;
    let mut s: Vec<f64> = (0..model.hidden).map(|_| rng.uniform(-1.0, 1.0)).collect();
    let greedy_p = knob.quality * (1.0 - knob.exploration_noise.min(1.0));
    let mean_reward = spec.reward_base + knob.quality * spec.reward_scale;
    let mut out = EpisodeRows {
        len,
        ..Default::default()
    };
    for _ in 0..len {
        let mut drive = 0.0;
        for i in 0..n {
            let mut obs = mat_vec(&model.emission[i], &s, od);
            for o in obs.iter_mut() {
                *o += 0.1 * rng.normal();
                if let Some(levels) = spec.obs_levels {
                    *o = (*o * levels as f64).round() / levels as f64;
                }
            }
            let pre = mat_vec(&model.policy[i], &obs, spec.action_kind.width());
            match spec.action_kind {
                ActionKind::Discrete { cardinality } => {
                    let a = if rng.unit() < greedy_p {
                        argmax(&pre)
                    } else {
                        rng.index(cardinality as usize)
                    };
                    drive += a as f64 / cardinality as f64;
                    out.discrete.push(a as i32);
                }
                ActionKind::Continuous { .. } => {
                    for p in &pre {
                        let a = knob.quality * p.tanh() + knob.exploration_noise * rng.normal();
                        drive += a;
                        out.continuous.push(a as f32);
                    }
                }
            }
            out.observations.extend(obs.iter().map(|&x| x as f32));
        }
        let r = mean_reward + spec.reward_noise * rng.normal();
        out.rewards.extend(std::iter::repeat_n(r as f32, n));
        if spec.state_dim.is_some() {
            out.state.extend(s.iter().map(|&x| x as f32));
        }
        let mut next = mat_vec(&model.transition, &s, model.hidden);
        let push = drive / n as f64;
        for x in next.iter_mut() {
            *x += 0.1 * push + 0.1 * rng.normal();
        }
        s = next;
    }
    out
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Generates `n_episodes` episodes. Output is a pure function of the
/// arguments and always passes validation.
pub fn generate(
    spec: &DecPomdpSpec,
    knob: &BehaviourKnob,
    n_episodes: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    spec.validate()?;
    knob.validate()?;
    let model = Model::new(spec, seed);
    let episodes: Vec<EpisodeRows> = (0..n_episodes)
        .into_par_iter()
        .map(|e| {
            let rng = StreamRng::with_stream_id(seed, EPISODE_STREAM_BASE + e as u64);
            simulate_episode(spec, knob, &model, rng)
        })
        .collect();

    let n = spec.n_agents;
    let od = spec.observation_dim;
    let aw = spec.action_kind.width();
    let sd = spec.state_dim.unwrap_or(0);
    let mut b = DatasetBuilder::new(spec.agents(), spec.state_dim);
    for ep in &episodes {
        b.begin_episode();
        for t in 0..ep.len {
            let row = b.len();
            let mut state = ep.state.get(t * sd..(t + 1) * sd).map(|s| s.to_vec());
            if spec.state_counter {
                if let Some(s) = state.as_mut() {
                    s[0] = row as f32;
                }
            }
            let actions = match spec.action_kind {
                ActionKind::Discrete { .. } => {
                    ActionRows::Discrete(&ep.discrete[t * n..(t + 1) * n])
                }
                ActionKind::Continuous { .. } => {
                    ActionRows::Continuous(&ep.continuous[t * n * aw..(t + 1) * n * aw])
                }
            };
            b.push_step(Step {
                observations: &ep.observations[t * n * od..(t + 1) * n * od],
                actions,
                rewards: &ep.rewards[t * n..(t + 1) * n],
                state: state.as_deref(),
                terminal: t + 1 == ep.len,
            });
        }
    }
    let mut meta = VaultMeta::named(format!("synth-q{}-s{seed}", knob.quality));
    meta.source = "synthetic".into();
    meta.environment = "linear-dec-pomdp".into();
    meta.scenario = format!("{n}-agent");
    meta.quality_label = format!("{}", knob.quality);
    meta.generation_method = format!(
        "synthetic behaviour policy, quality {}, exploration noise {}, seed {seed}",
        knob.quality, knob.exploration_noise
    );
    meta.extras.insert("reward_sharing".into(), "shared".into());
    Ok(b.finish(meta))
}

/// A pool whose episode returns are drawn uniformly from `[lo, hi]`.
///
/// Each episode has `episode_length` steps and a constant per-step reward of
/// `return / episode_length` stored as `f32`, so its undiscounted return is
/// exactly `episode_length * reward`.
pub fn generate_return_pool(
    support: (f64, f64),
    n_episodes: usize,
    episode_length: usize,
    seed: u64,
) -> Result<TrajectoryDataset> {
    let (lo, hi) = support;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "return support [{lo}, {hi}] is empty"
        )));
    }
    let mut rng = StreamRng::new(seed, Stream::SynthPool);
    let returns: Vec<f64> = (0..n_episodes).map(|_| rng.uniform(lo, hi)).collect();
    pool_from_returns(&returns, &vec![episode_length; n_episodes], seed)
}

/// A pool with normally distributed returns and episode lengths drawn
/// uniformly from `length_range`.
pub fn generate_normal_pool(
    mean: f64,
    std: f64,
    n_episodes: usize,
    length_range: (usize, usize),
    seed: u64,
) -> Result<TrajectoryDataset> {
    let (lo, hi) = length_range;
    if lo == 0 || lo > hi {
        return Err(Error::InvalidArgument(
            "length range must satisfy 1 <= min <= max".into(),
        ));
    }
    if !(std >= 0.0) {
        return Err(Error::InvalidArgument("std must be non-negative".into()));
    }
    let mut rng = StreamRng::new(seed, Stream::SynthPool);
    let mut returns = Vec::with_capacity(n_episodes);
    let mut lengths = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        returns.push(mean + std * rng.normal());
        lengths.push(lo + rng.index(hi - lo + 1));
    }
    pool_from_returns(&returns, &lengths, seed)
}

/// Builds a two-agent pool whose episode `i` has `lengths[i]` steps and a
/// constant shared reward `returns[i] / lengths[i]`.
pub fn pool_from_returns(
    returns: &[f64],
    lengths: &[usize],
    seed: u64,
) -> Result<TrajectoryDataset> {
    if returns.len() != lengths.len() {
        return Err(Error::InvalidArgument(
            "returns and lengths differ in length".into(),
        ));
    }
    if lengths.contains(&0) {
        return Err(Error::InvalidArgument(
            "episode length must be positive".into(),
        ));
    }
    let agents = vec![
        AgentSpec::discrete("agent_0", 2, 5),
        AgentSpec::discrete("agent_1", 2, 5),
    ];
    let mut rng = StreamRng::with_stream_id(seed, EPISODE_STREAM_BASE - 1);
    let mut b = DatasetBuilder::new(agents, Some(2));
    for (e, (&ret, &len)) in returns.iter().zip(lengths).enumerate() {
        let r = (ret / len as f64) as f32;
        b.begin_episode();
        for t in 0..len {
            let obs = [t as f32, rng.index(8) as f32, t as f32, rng.index(8) as f32];
            let acts = [rng.index(5) as i32, rng.index(5) as i32];
            b.push_step(Step {
                observations: &obs,
                actions: ActionRows::Discrete(&acts),
                rewards: &[r, r],
                state: Some(&[e as f32, t as f32]),
                terminal: t + 1 == len,
            });
        }
    }
    let mut meta = VaultMeta::named(format!("return-pool-s{seed}"));
    meta.source = "synthetic".into();
    meta.environment = "return-pool".into();
    meta.scenario = "2-agent".into();
    meta.generation_method = format!("constant per-step reward pool, seed {seed}");
    meta.extras.insert("reward_sharing".into(), "shared".into());
    Ok(b.finish(meta))
}
