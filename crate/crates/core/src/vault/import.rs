//! JSON-lines interchange: one transition per line.
//!
//! ```json
//! {"episode": 0, "obs": [[0.1, 0.2], [0.3, 0.4]], "act": [1, 0],
//!  "rew": [1.0, 1.0], "state": [0.5], "terminal": false}
//! ```
//!
//! Continuous actions are one array per agent. Key names are configurable
//! through [`ColumnMapping`]. Episodes are contiguous runs of equal episode
//! ids; an id that reappears after another id is an error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::model::{
    ActionKind, ActionRows, Actions, AgentSpec, DatasetBuilder, Step, TrajectoryDataset, VaultMeta,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMapping {
    pub episode: String,
    pub observations: String,
    pub actions: String,
    pub rewards: String,
    /// `None` ignores any state key.
    pub state: Option<String>,
    pub terminal: String,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            episode: "episode".into(),
            observations: "obs".into(),
            actions: "act".into(),
            rewards: "rew".into(),
            state: Some("state".into()),
            terminal: "terminal".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportSchema {
    pub agents: Vec<AgentSpec>,
    #[serde(default)]
    pub mapping: ColumnMapping,
}

struct LineParser<'a> {
    schema: &'a ImportSchema,
    line: usize,
}

impl LineParser<'_> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Import {
            line: self.line,
            reason: reason.into(),
        }
    }

    fn get<'v>(&self, obj: &'v Map<String, Value>, key: &str) -> Result<&'v Value> {
        obj.get(key)
            .ok_or_else(|| self.err(format!("missing key {key:?}")))
    }

    fn float(&self, v: &Value, what: &str) -> Result<f32> {
        v.as_f64()
            .map(|x| x as f32)
            .ok_or_else(|| self.err(format!("{what} must be a number, got {v}")))
    }

    fn floats(&self, v: &Value, len: usize, what: &str, out: &mut Vec<f32>) -> Result<()> {
        let arr = v
            .as_array()
            .ok_or_else(|| self.err(format!("{what} must be an array")))?;
        if arr.len() != len {
            return Err(self.err(format!("{what} has {} values, expected {len}", arr.len())));
        }
        for x in arr {
            out.push(self.float(x, what)?);
        }
        Ok(())
    }

    fn per_agent<'v>(&self, v: &'v Value, what: &str) -> Result<&'v Vec<Value>> {
        let n = self.schema.agents.len();
        let arr = v
            .as_array()
            .ok_or_else(|| self.err(format!("{what} must be an array")))?;
        if arr.len() != n {
            return Err(self.err(format!(
                "{what} has {} entries, expected one per agent ({n})",
                arr.len()
            )));
        }
        Ok(arr)
    }
}

/// Reads a JSON-lines transition file into a dataset.
///
/// The resulting meta is named after the file stem; callers fill in the
/// provenance fields.
pub fn import_foreign(path: impl AsRef<Path>, schema: &ImportSchema) -> Result<TrajectoryDataset> {
    let path = path.as_ref();
    let first = schema
        .agents
        .first()
        .ok_or_else(|| Error::InvalidArgument("import schema lists no agents".into()))?;
    let obs_dim = first.observation_dim as usize;
    let kind = first.action_kind;
    let m = &schema.mapping;

    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let mut builder: Option<DatasetBuilder> = None;
    let mut current: Option<i64> = None;
    let mut finished = std::collections::HashSet::new();
    let mut has_state = false;
    let (mut obs, mut act_i, mut act_f, mut rew, mut state) =
        (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());

    for (i, line) in reader.lines().enumerate() {
        let p = LineParser {
            schema,
            line: i + 1,
        };
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).map_err(|e| p.err(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| p.err("line is not a JSON object"))?;

        let episode = p
            .get(obj, &m.episode)?
            .as_i64()
            .ok_or_else(|| p.err(format!("{:?} must be an integer", m.episode)))?;

        obs.clear();
        for (a, row) in p
            .per_agent(p.get(obj, &m.observations)?, "observations")?
            .iter()
            .enumerate()
        {
            p.floats(row, obs_dim, &format!("observation of agent {a}"), &mut obs)?;
        }

        let acts = p.per_agent(p.get(obj, &m.actions)?, "actions")?;
        act_i.clear();
        act_f.clear();
        match kind {
            ActionKind::Discrete { .. } => {
                for a in acts {
                    let v = a
                        .as_i64()
                        .and_then(|v| i32::try_from(v).ok())
                        .ok_or_else(|| p.err(format!("discrete action {a} is not an i32")))?;
                    act_i.push(v);
                }
            }
            ActionKind::Continuous { dim } => {
                for (ai, a) in acts.iter().enumerate() {
                    p.floats(
                        a,
                        dim as usize,
                        &format!("action of agent {ai}"),
                        &mut act_f,
                    )?;
                }
            }
        }

        rew.clear();
        let r = p.get(obj, &m.rewards)?;
        if r.is_number() {
            // shared scalar reward
            let v = p.float(r, "reward")?;
            rew.extend(std::iter::repeat_n(v, schema.agents.len()));
        } else {
            p.floats(r, schema.agents.len(), "rewards", &mut rew)?;
        }

        let terminal = p
            .get(obj, &m.terminal)?
            .as_bool()
            .ok_or_else(|| p.err(format!("{:?} must be a boolean", m.terminal)))?;

        let state_value = m.state.as_ref().and_then(|k| obj.get(k));
        let b = builder.get_or_insert_with(|| {
            has_state = state_value.is_some();
            let dim = state_value.and_then(Value::as_array).map(Vec::len);
            DatasetBuilder::new(schema.agents.clone(), dim)
        });
        state.clear();
        match (has_state, state_value) {
            (true, Some(v)) => {
                let expected = b.state_dim().unwrap_or(0);
                if expected == 0 {
                    return Err(p.err("state must be a non-empty array"));
                }
                p.floats(v, expected, "state", &mut state)?;
            }
            (true, None) => return Err(p.err("state missing on this line but present earlier")),
            (false, Some(_)) => {
                return Err(p.err("state present on this line but absent on the first line"))
            }
            (false, None) => {}
        }

        if current != Some(episode) {
            if let Some(prev) = current {
                finished.insert(prev);
            }
            if finished.contains(&episode) {
                return Err(p.err(format!("episode id {episode} is not contiguous")));
            }
            current = Some(episode);
            b.begin_episode();
        }
        b.push_step(Step {
            observations: &obs,
            actions: match kind {
                ActionKind::Discrete { .. } => ActionRows::Discrete(&act_i),
                ActionKind::Continuous { .. } => ActionRows::Continuous(&act_f),
            },
            rewards: &rew,
            state: has_state.then_some(state.as_slice()),
            terminal,
        });
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut meta = VaultMeta::named(name);
    meta.generation_method = format!("imported from {}", path.display());
    let dataset = builder
        .unwrap_or_else(|| DatasetBuilder::new(schema.agents.clone(), None))
        .finish(meta);
    dataset.ensure_valid()?;
    Ok(dataset)
}

/// Writes `dataset` in the JSON-lines layout read by [`import_foreign`],
/// using the episode index as the episode id.
///
/// Floats are written through `f64`, which round-trips every finite `f32`
/// exactly. Non-finite values are not representable in JSON.
pub fn export_jsonl(
    dataset: &TrajectoryDataset,
    path: impl AsRef<Path>,
    mapping: &ColumnMapping,
) -> Result<()> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let n = dataset.n_agents();
    let od = dataset.observation_dim();
    let aw = dataset.action_width();
    let f = |v: &[f32]| v.iter().map(|&x| json!(x as f64)).collect::<Vec<_>>();
    for (e, rows) in dataset.episode_ranges().enumerate() {
        for t in rows {
            let obs: Vec<Value> = (0..n)
                .map(|a| {
                    Value::Array(f(
                        &dataset.observations[(t * n + a) * od..(t * n + a + 1) * od]
                    ))
                })
                .collect();
            let act: Vec<Value> = match &dataset.actions {
                Actions::Discrete(v) => v[t * n..(t + 1) * n].iter().map(|&x| json!(x)).collect(),
                Actions::Continuous(v) => (0..n)
                    .map(|a| Value::Array(f(&v[(t * n + a) * aw..(t * n + a + 1) * aw])))
                    .collect(),
            };
            let mut obj = Map::new();
            obj.insert(mapping.episode.clone(), json!(e));
            obj.insert(mapping.observations.clone(), Value::Array(obs));
            obj.insert(mapping.actions.clone(), Value::Array(act));
            obj.insert(
                mapping.rewards.clone(),
                Value::Array(f(&dataset.rewards[t * n..(t + 1) * n])),
            );
            if let (Some(key), Some(s)) = (&mapping.state, &dataset.state) {
                obj.insert(
                    key.clone(),
                    Value::Array(f(&s.data[t * s.dim..(t + 1) * s.dim])),
                );
            }
            obj.insert(mapping.terminal.clone(), json!(dataset.terminals[t]));
            serde_json::to_writer(&mut out, &obj)?;
            out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    out.flush().map_err(|e| Error::io(path, e))
}
