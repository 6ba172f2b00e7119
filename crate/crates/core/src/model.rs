//! Dec-POMDP-shaped trajectory data model.
//!
//! A [`TrajectoryDataset`] is a set of dense, row-major columns indexed by
//! transition `t` in `0..T`, with episodes delimited by start offsets. Agents
//! are homogeneous in observation width and action representation, which is
//! what lets observations and actions live in single `[T x n x d]` arrays.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Version written into every vault and required of every in-memory meta.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActionKind {
    Discrete { cardinality: u32 },
    Continuous { dim: u32 },
}

impl ActionKind {
    /// Number of stored values per agent per transition.
    pub fn width(&self) -> usize {
        match *self {
            ActionKind::Discrete { .. } => 1,
            ActionKind::Continuous { dim } => dim as usize,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, ActionKind::Discrete { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub agent_id: String,
    pub observation_dim: u32,
    pub action_kind: ActionKind,
}

impl AgentSpec {
    pub fn discrete(agent_id: impl Into<String>, observation_dim: u32, cardinality: u32) -> Self {
        AgentSpec {
            agent_id: agent_id.into(),
            observation_dim,
            action_kind: ActionKind::Discrete { cardinality },
        }
    }

    pub fn continuous(agent_id: impl Into<String>, observation_dim: u32, dim: u32) -> Self {
        AgentSpec {
            agent_id: agent_id.into(),
            observation_dim,
            action_kind: ActionKind::Continuous { dim },
        }
    }
}

/// Provenance and schema datasheet for a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VaultMeta {
    pub name: String,
    #[serde(default)]
    pub source: String,
    #[serde(default)]
    pub environment: String,
    #[serde(default)]
    pub scenario: String,
    #[serde(default)]
    pub quality_label: String,
    #[serde(default)]
    pub generation_method: String,
    #[serde(default)]
    pub licence: Option<String>,
    #[serde(default)]
    pub download_url: Option<String>,
    #[serde(default = "default_gamma")]
    pub discount_gamma: f64,
    pub format_version: u32,
    #[serde(default)]
    pub extras: BTreeMap<String, String>,
}

fn default_gamma() -> f64 {
    1.0
}

impl Default for VaultMeta {
    fn default() -> Self {
        VaultMeta {
            name: String::new(),
            source: String::new(),
            environment: String::new(),
            scenario: String::new(),
            quality_label: String::new(),
            generation_method: String::new(),
            licence: None,
            download_url: None,
            discount_gamma: 1.0,
            format_version: FORMAT_VERSION,
            extras: BTreeMap::new(),
        }
    }
}

impl VaultMeta {
    pub fn named(name: impl Into<String>) -> Self {
        VaultMeta {
            name: name.into(),
            ..Default::default()
        }
    }
}

/// Action column: `[T x n]` integers or `[T x n x dim]` floats.
#[derive(Debug, Clone, PartialEq)]
pub enum Actions {
    Discrete(Vec<i32>),
    Continuous(Vec<f32>),
}

impl Actions {
    pub fn len(&self) -> usize {
        match self {
            Actions::Discrete(v) => v.len(),
            Actions::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Actions::Discrete(_))
    }

    fn empty_like(&self) -> Actions {
        match self {
            Actions::Discrete(_) => Actions::Discrete(Vec::new()),
            Actions::Continuous(_) => Actions::Continuous(Vec::new()),
        }
    }

    fn slice(&self, range: Range<usize>) -> ActionRows<'_> {
        match self {
            Actions::Discrete(v) => ActionRows::Discrete(&v[range]),
            Actions::Continuous(v) => ActionRows::Continuous(&v[range]),
        }
    }
}

/// Borrowed slice of an action column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActionRows<'a> {
    Discrete(&'a [i32]),
    Continuous(&'a [f32]),
}

impl ActionRows<'_> {
    pub fn len(&self) -> usize {
        match self {
            ActionRows::Discrete(v) => v.len(),
            ActionRows::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateColumn {
    pub dim: usize,
    /// Row-major `[T x dim]`.
    pub data: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryDataset {
    pub agents: Vec<AgentSpec>,
    /// Row-major `[T x n x observation_dim]`.
    pub observations: Vec<f32>,
    pub actions: Actions,
    /// Row-major `[T x n]`; shared rewards are replicated per agent.
    pub rewards: Vec<f32>,
    pub terminals: Vec<bool>,
    pub state: Option<StateColumn>,
    /// Strictly increasing transition offsets; empty iff `T == 0`.
    pub episode_starts: Vec<u64>,
    pub meta: VaultMeta,
}

/// One invariant violation found by [`TrajectoryDataset::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoAgents,
    InvalidAgent {
        agent_id: String,
        reason: String,
    },
    DuplicateAgentId(String),
    HeterogeneousAgents(String),
    ColumnLength {
        column: &'static str,
        expected: usize,
        actual: usize,
    },
    ActionKindMismatch,
    StateDimZero,
    MissingEpisodeIndex,
    FirstStartNonZero(u64),
    StartsNotIncreasing {
        index: usize,
    },
    StartOutOfRange {
        index: usize,
        start: u64,
        total: usize,
    },
    TerminalInsideEpisode {
        t: usize,
    },
    GammaOutOfRange(f64),
    FormatVersion {
        found: u32,
        expected: u32,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoAgents => write!(f, "dataset has no agents"),
            Violation::InvalidAgent { agent_id, reason } => {
                write!(f, "agent {agent_id:?}: {reason}")
            }
            Violation::DuplicateAgentId(id) => write!(f, "duplicate agent_id {id:?}"),
            Violation::HeterogeneousAgents(reason) => {
                write!(f, "agents are not homogeneous: {reason}")
            }
            Violation::ColumnLength {
                column,
                expected,
                actual,
            } => write!(
                f,
                "column {column} has {actual} values, expected {expected}"
            ),
            Violation::ActionKindMismatch => {
                write!(f, "actions column kind does not match agent specs")
            }
            Violation::StateDimZero => write!(f, "state_dim must be at least 1"),
            Violation::MissingEpisodeIndex => {
                write!(f, "dataset has transitions but episode_starts is empty")
            }
            Violation::FirstStartNonZero(s) => {
                write!(f, "first episode start is {s}, expected 0")
            }
            Violation::StartsNotIncreasing { index } => {
                write!(f, "episode_starts not strictly increasing at index {index}")
            }
            Violation::StartOutOfRange {
                index,
                start,
                total,
            } => write!(
                f,
                "episode_starts[{index}] = {start} is not below T = {total}"
            ),
            Violation::TerminalInsideEpisode { t } => {
                write!(f, "terminal inside episode at t={t}")
            }
            Violation::GammaOutOfRange(g) => write!(f, "discount_gamma {g} outside (0, 1]"),
            Violation::FormatVersion { found, expected } => write!(
                f,
                "format_version {found} does not match writer version {expected}"
            ),
        }
    }
}

/// Borrowed view of one episode's rows.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeView<'a> {
    pub index: usize,
    pub start: usize,
    pub observations: &'a [f32],
    pub actions: ActionRows<'a>,
    pub rewards: &'a [f32],
    pub terminals: &'a [bool],
    pub state: Option<&'a [f32]>,
}

impl EpisodeView<'_> {
    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn rows(&self) -> Range<usize> {
        self.start..self.start + self.len()
    }
}

impl TrajectoryDataset {
    /// A dataset with no transitions.
    pub fn empty(agents: Vec<AgentSpec>, state_dim: Option<usize>, meta: VaultMeta) -> Self {
        DatasetBuilder::new(agents, state_dim).finish(meta)
    }

    /// Total transition count `T`.
    pub fn n_transitions(&self) -> usize {
        self.terminals.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn n_episodes(&self) -> usize {
        self.episode_starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn observation_dim(&self) -> usize {
        self.agents
            .first()
            .map_or(0, |a| a.observation_dim as usize)
    }

    pub fn action_width(&self) -> usize {
        self.agents.first().map_or(0, |a| a.action_kind.width())
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.state.as_ref().map(|s| s.dim)
    }

    /// Stored values per transition in the observations column.
    pub fn observation_row_width(&self) -> usize {
        self.n_agents() * self.observation_dim()
    }

    /// Stored values per transition in the actions column.
    pub fn action_row_width(&self) -> usize {
        self.n_agents() * self.action_width()
    }

    /// Row range of episode `e`. Panics when `e` is out of range.
    pub fn episode_range(&self, e: usize) -> Range<usize> {
        let start = self.episode_starts[e] as usize;
        let end = self
            .episode_starts
            .get(e + 1)
            .map_or(self.n_transitions(), |&s| s as usize);
        start..end
    }

    pub fn episode_ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.n_episodes()).map(move |e| self.episode_range(e))
    }

    pub fn episode_lengths(&self) -> Vec<usize> {
        self.episode_ranges().map(|r| r.len()).collect()
    }

    pub fn max_episode_length(&self) -> usize {
        self.episode_ranges().map(|r| r.len()).max().unwrap_or(0)
    }

    pub fn episode_slice(&self, e: usize) -> Result<EpisodeView<'_>> {
        if e >= self.n_episodes() {
            return Err(Error::EpisodeOutOfRange {
                index: e,
                count: self.n_episodes(),
            });
        }
        let rows = self.episode_range(e);
        let ow = self.observation_row_width();
        let aw = self.action_row_width();
        let n = self.n_agents();
        Ok(EpisodeView {
            index: e,
            start: rows.start,
            observations: &self.observations[rows.start * ow..rows.end * ow],
            actions: self.actions.slice(rows.start * aw..rows.end * aw),
            rewards: &self.rewards[rows.start * n..rows.end * n],
            terminals: &self.terminals[rows.clone()],
            state: self
                .state
                .as_ref()
                .map(|s| &s.data[rows.start * s.dim..rows.end * s.dim]),
        })
    }

    /// Checks every structural invariant and returns all violations found.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        self.validate_agents(&mut out);
        self.validate_columns(&mut out);
        self.validate_episodes(&mut out);
        if !(self.meta.discount_gamma > 0.0 && self.meta.discount_gamma <= 1.0) {
            out.push(Violation::GammaOutOfRange(self.meta.discount_gamma));
        }
        if self.meta.format_version != FORMAT_VERSION {
            out.push(Violation::FormatVersion {
                found: self.meta.format_version,
                expected: FORMAT_VERSION,
            });
        }
        out
    }

    pub fn is_valid(&self) -> bool {
        self.validate().is_empty()
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidDataset(v))
        }
    }

    fn validate_agents(&self, out: &mut Vec<Violation>) {
        let Some(first) = self.agents.first() else {
            out.push(Violation::NoAgents);
            return;
        };
        let mut seen = HashSet::new();
        for a in &self.agents {
            if a.observation_dim < 1 {
                out.push(Violation::InvalidAgent {
                    agent_id: a.agent_id.clone(),
                    reason: "observation_dim must be at least 1".into(),
                });
            }
            match a.action_kind {
                ActionKind::Discrete { cardinality } if cardinality < 2 => {
                    out.push(Violation::InvalidAgent {
                        agent_id: a.agent_id.clone(),
                        reason: "discrete cardinality must be at least 2".into(),
                    })
                }
                ActionKind::Continuous { dim } if dim < 1 => out.push(Violation::InvalidAgent {
                    agent_id: a.agent_id.clone(),
                    reason: "continuous action dim must be at least 1".into(),
                }),
                _ => {}
            }
            if !seen.insert(a.agent_id.as_str()) {
                out.push(Violation::DuplicateAgentId(a.agent_id.clone()));
            }
            if a.observation_dim != first.observation_dim {
                out.push(Violation::HeterogeneousAgents(format!(
                    "agent {:?} observation_dim {} differs from {}",
                    a.agent_id, a.observation_dim, first.observation_dim
                )));
            }
            if a.action_kind.is_discrete() != first.action_kind.is_discrete()
                || a.action_kind.width() != first.action_kind.width()
            {
                out.push(Violation::HeterogeneousAgents(format!(
                    "agent {:?} action layout differs from agent {:?}",
                    a.agent_id, first.agent_id
                )));
            }
        }
        if self.actions.is_discrete() != first.action_kind.is_discrete() {
            out.push(Violation::ActionKindMismatch);
        }
    }

    fn validate_columns(&self, out: &mut Vec<Violation>) {
        let t = self.n_transitions();
        let mut check = |column: &'static str, expected: usize, actual: usize| {
            if expected != actual {
                out.push(Violation::ColumnLength {
                    column,
                    expected,
                    actual,
                });
            }
        };
        check(
            "observations",
            t * self.observation_row_width(),
            self.observations.len(),
        );
        check("actions", t * self.action_row_width(), self.actions.len());
        check("rewards", t * self.n_agents(), self.rewards.len());
        if let Some(state) = &self.state {
            if state.dim == 0 {
                out.push(Violation::StateDimZero);
            } else {
                check("state", t * state.dim, state.data.len());
            }
        }
    }

    fn validate_episodes(&self, out: &mut Vec<Violation>) {
        let t = self.n_transitions();
        let starts = &self.episode_starts;
        if starts.is_empty() {
            if t > 0 {
                out.push(Violation::MissingEpisodeIndex);
            }
            return;
        }
        if starts[0] != 0 {
            out.push(Violation::FirstStartNonZero(starts[0]));
        }
        for (i, w) in starts.windows(2).enumerate() {
            if w[1] <= w[0] {
                out.push(Violation::StartsNotIncreasing { index: i + 1 });
            }
        }
        for (i, &s) in starts.iter().enumerate() {
            if s as usize >= t {
                out.push(Violation::StartOutOfRange {
                    index: i,
                    start: s,
                    total: t,
                });
            }
        }
        // A terminal flag may only sit on the row right before an episode start
        // or on the final row.
        let boundaries: HashSet<u64> = starts.iter().copied().collect();
        for (i, &done) in self.terminals.iter().enumerate() {
            if done && i + 1 < t && !boundaries.contains(&(i as u64 + 1)) {
                out.push(Violation::TerminalInsideEpisode { t: i });
            }
        }
    }

    /// Builds a new dataset from whole episodes of `self`, in the given order.
    pub fn select_episodes(&self, episodes: &[usize], meta: VaultMeta) -> Result<Self> {
        let mut b = DatasetBuilder::like(self);
        for &e in episodes {
            if e >= self.n_episodes() {
                return Err(Error::EpisodeOutOfRange {
                    index: e,
                    count: self.n_episodes(),
                });
            }
            b.append_episode_rows(self, self.episode_range(e));
        }
        Ok(b.finish(meta))
    }

    /// Field-wise equality that compares floats by bit pattern, so NaN
    /// payloads count as equal when their bits match.
    pub fn bit_identical(&self, other: &Self) -> bool {
        fn bits(a: &[f32], b: &[f32]) -> bool {
            a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
        }
        let actions = match (&self.actions, &other.actions) {
            (Actions::Discrete(a), Actions::Discrete(b)) => a == b,
            (Actions::Continuous(a), Actions::Continuous(b)) => bits(a, b),
            _ => false,
        };
        let state = match (&self.state, &other.state) {
            (None, None) => true,
            (Some(a), Some(b)) => a.dim == b.dim && bits(&a.data, &b.data),
            _ => false,
        };
        self.agents == other.agents
            && bits(&self.observations, &other.observations)
            && actions
            && bits(&self.rewards, &other.rewards)
            && self.terminals == other.terminals
            && state
            && self.episode_starts == other.episode_starts
            && self.meta == other.meta
    }

    /// Checks that two datasets can be concatenated row-wise.
    pub fn schema_compatible(&self, other: &Self) -> Result<()> {
        if self.agents != other.agents {
            return Err(Error::SchemaMismatch(format!(
                "agent specs of {:?} and {:?} differ",
                self.meta.name, other.meta.name
            )));
        }
        if self.state_dim() != other.state_dim() {
            return Err(Error::SchemaMismatch(format!(
                "state column of {:?} ({:?}) differs from {:?} ({:?})",
                self.meta.name,
                self.state_dim(),
                other.meta.name,
                other.state_dim()
            )));
        }
        if self.actions.is_discrete() != other.actions.is_discrete() {
            return Err(Error::SchemaMismatch("action kinds differ".into()));
        }
        Ok(())
    }
}

/// One transition row handed to [`DatasetBuilder::push_step`].
#[derive(Debug, Clone, Copy)]
pub struct Step<'a> {
    /// `n x observation_dim` values.
    pub observations: &'a [f32],
    pub actions: ActionRows<'a>,
    /// One reward per agent.
    pub rewards: &'a [f32],
    pub state: Option<&'a [f32]>,
    pub terminal: bool,
}

/// Incrementally assembles a dataset, episode by episode.
///
/// The builder does not check row widths; call
/// [`TrajectoryDataset::validate`] on the result when inputs are untrusted.
#[derive(Debug)]
pub struct DatasetBuilder {
    agents: Vec<AgentSpec>,
    observations: Vec<f32>,
    actions: Actions,
    rewards: Vec<f32>,
    terminals: Vec<bool>,
    state: Option<StateColumn>,
    episode_starts: Vec<u64>,
}

impl DatasetBuilder {
    pub fn new(agents: Vec<AgentSpec>, state_dim: Option<usize>) -> Self {
        let discrete = agents.first().is_none_or(|a| a.action_kind.is_discrete());
        let actions = if discrete {
            Actions::Discrete(Vec::new())
        } else {
            Actions::Continuous(Vec::new())
        };
        DatasetBuilder {
            agents,
            observations: Vec::new(),
            actions,
            rewards: Vec::new(),
            terminals: Vec::new(),
            state: state_dim.map(|dim| StateColumn {
                dim,
                data: Vec::new(),
            }),
            episode_starts: Vec::new(),
        }
    }

    /// A builder with the same schema as `d`.
    pub fn like(d: &TrajectoryDataset) -> Self {
        DatasetBuilder {
            agents: d.agents.clone(),
            observations: Vec::new(),
            actions: d.actions.empty_like(),
            rewards: Vec::new(),
            terminals: Vec::new(),
            state: d.state.as_ref().map(|s| StateColumn {
                dim: s.dim,
                data: Vec::new(),
            }),
            episode_starts: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.terminals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terminals.is_empty()
    }

    pub fn state_dim(&self) -> Option<usize> {
        self.state.as_ref().map(|s| s.dim)
    }

    pub fn begin_episode(&mut self) {
        self.episode_starts.push(self.terminals.len() as u64);
    }

    pub fn push_step(&mut self, step: Step<'_>) {
        self.observations.extend_from_slice(step.observations);
        match (&mut self.actions, step.actions) {
            (Actions::Discrete(v), ActionRows::Discrete(a)) => v.extend_from_slice(a),
            (Actions::Continuous(v), ActionRows::Continuous(a)) => v.extend_from_slice(a),
            _ => panic!("action row kind does not match builder schema"),
        }
        self.rewards.extend_from_slice(step.rewards);
        if let (Some(col), Some(s)) = (&mut self.state, step.state) {
            col.data.extend_from_slice(s);
        }
        self.terminals.push(step.terminal);
    }

    /// Appends rows `rows` of `src` as one new episode.
    pub fn append_episode_rows(&mut self, src: &TrajectoryDataset, rows: Range<usize>) {
        self.begin_episode();
        let ow = src.observation_row_width();
        let aw = src.action_row_width();
        let n = src.n_agents();
        self.observations
            .extend_from_slice(&src.observations[rows.start * ow..rows.end * ow]);
        match (&mut self.actions, &src.actions) {
            (Actions::Discrete(v), Actions::Discrete(a)) => {
                v.extend_from_slice(&a[rows.start * aw..rows.end * aw])
            }
            (Actions::Continuous(v), Actions::Continuous(a)) => {
                v.extend_from_slice(&a[rows.start * aw..rows.end * aw])
            }
            _ => panic!("source action kind does not match builder schema"),
        }
        self.rewards
            .extend_from_slice(&src.rewards[rows.start * n..rows.end * n]);
        if let (Some(col), Some(s)) = (&mut self.state, &src.state) {
            col.data
                .extend_from_slice(&s.data[rows.start * s.dim..rows.end * s.dim]);
        }
        self.terminals.extend_from_slice(&src.terminals[rows]);
    }

    pub fn finish(self, meta: VaultMeta) -> TrajectoryDataset {
        TrajectoryDataset {
            agents: self.agents,
            observations: self.observations,
            actions: self.actions,
            rewards: self.rewards,
            terminals: self.terminals,
            state: self.state,
            episode_starts: self.episode_starts,
            meta,
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Two agents, one-dimensional observations, binary actions, a 2-d state
    /// and three episodes of lengths 2, 3 and 1.
    pub(crate) fn small_dataset() -> TrajectoryDataset {
        let agents = vec![
            AgentSpec::discrete("a0", 1, 2),
            AgentSpec::discrete("a1", 1, 2),
        ];
        let mut b = DatasetBuilder::new(agents, Some(2));
        let mut t = 0.0f32;
        for len in [2usize, 3, 1] {
            b.begin_episode();
            for i in 0..len {
                b.push_step(Step {
                    observations: &[t, -t],
                    actions: ActionRows::Discrete(&[(i % 2) as i32, 1]),
                    rewards: &[1.0, 1.0],
                    state: Some(&[t, 0.5]),
                    terminal: i + 1 == len,
                });
                t += 1.0;
            }
        }
        b.finish(VaultMeta::named("small"))
    }

    #[test]
    fn well_formed_dataset_is_valid() {
        let d = small_dataset();
        assert_eq!(d.validate(), vec![]);
        assert_eq!(d.n_transitions(), 6);
        assert_eq!(d.n_episodes(), 3);
        assert_eq!(d.episode_lengths(), vec![2, 3, 1]);
    }

    #[test]
    fn repeated_start_is_reported() {
        let mut d = small_dataset();
        d.episode_starts = vec![0, 5, 5];
        let v = d.validate();
        assert!(v.contains(&Violation::StartsNotIncreasing { index: 2 }));
        assert!(v.iter().any(|v| v
            .to_string()
            .contains("episode_starts not strictly increasing")));
    }

    #[test]
    fn terminal_mid_episode_is_reported() {
        let mut d = small_dataset();
        // rows 2..5 form episode 1, so t=2 is its first row
        d.terminals[2] = true;
        let v = d.validate();
        assert_eq!(v, vec![Violation::TerminalInsideEpisode { t: 2 }]);
        assert_eq!(v[0].to_string(), "terminal inside episode at t=2");
    }

    #[test]
    fn column_length_and_meta_checks() {
        let mut d = small_dataset();
        d.rewards.pop();
        d.meta.discount_gamma = 0.0;
        d.meta.format_version = 7;
        let v = d.validate();
        assert!(v.contains(&Violation::ColumnLength {
            column: "rewards",
            expected: 12,
            actual: 11
        }));
        assert!(v.contains(&Violation::GammaOutOfRange(0.0)));
        assert!(v.contains(&Violation::FormatVersion {
            found: 7,
            expected: FORMAT_VERSION
        }));
    }

    #[test]
    fn agent_spec_checks() {
        let mut d = small_dataset();
        d.agents[1].agent_id = "a0".into();
        d.agents[0].action_kind = ActionKind::Discrete { cardinality: 1 };
        let v = d.validate();
        assert!(v.contains(&Violation::DuplicateAgentId("a0".into())));
        assert!(v
            .iter()
            .any(|v| matches!(v, Violation::InvalidAgent { .. })));
    }

    #[test]
    fn episode_slice_bounds() {
        let d = small_dataset();
        let first = d.episode_slice(0).unwrap();
        assert_eq!(first.rows(), 0..2);
        assert_eq!(first.observations, &[0.0, -0.0, 1.0, -1.0]);
        let last = d.episode_slice(2).unwrap();
        assert_eq!(last.rows(), 5..6);
        assert_eq!(last.state.unwrap(), &[5.0, 0.5]);
        assert!(matches!(
            d.episode_slice(3),
            Err(Error::EpisodeOutOfRange { index: 3, count: 3 })
        ));
    }

    #[test]
    fn single_episode_slice_covers_everything() {
        let d = small_dataset()
            .select_episodes(&[1], VaultMeta::named("one"))
            .unwrap();
        assert!(d.is_valid());
        let v = d.episode_slice(0).unwrap();
        assert_eq!(v.rows(), 0..d.n_transitions());
        assert_eq!(v.rewards, &d.rewards[..]);
    }

    #[test]
    fn empty_dataset_is_valid() {
        let d = TrajectoryDataset::empty(
            vec![AgentSpec::continuous("x", 3, 2)],
            None,
            VaultMeta::named("empty"),
        );
        assert!(d.is_valid());
        assert_eq!(d.n_episodes(), 0);
    }

    #[test]
    fn select_preserves_rows() {
        let d = small_dataset();
        let s = d.select_episodes(&[2, 0], VaultMeta::named("s")).unwrap();
        assert!(s.is_valid());
        assert_eq!(s.episode_starts, vec![0, 1]);
        assert_eq!(s.observations, vec![5.0, -5.0, 0.0, -0.0, 1.0, -1.0]);
    }
}
