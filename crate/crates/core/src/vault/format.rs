use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{Actions, AgentSpec, StateColumn, TrajectoryDataset, VaultMeta, FORMAT_VERSION};

pub const MAGIC: [u8; 6] = *b"OGMV1\0";
pub const METADATA_FILE: &str = "metadata.json";
pub const DATA_FILE: &str = "data.bin";
pub const INDEX_FILE: &str = "episodes.idx";
pub const CHECKSUM_FILE: &str = "vault.sha256";
pub const LOCK_FILE: &str = "vault.lock";

const HEADER_LEN: usize = 6 + 4 + 8 + 4 + 4;
const ENTRY_LEN: usize = 32 + 1 + 1 + 3 * 8 + 8 + 8;
const NAME_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    I32 = 1,
    U8 = 2,
}

impl Dtype {
    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::I32),
            2 => Some(Dtype::U8),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            Dtype::F32 | Dtype::I32 => 4,
            Dtype::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::I32 => "i32",
            Dtype::U8 => "u8",
        }
    }
}

/// One entry of the `data.bin` section table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectionInfo {
    pub name: String,
    pub dtype: Dtype,
    pub rank: u8,
    pub dims: [u64; 3],
    pub offset: u64,
    pub length: u64,
}

impl SectionInfo {
    pub fn shape(&self) -> &[u64] {
        &self.dims[..self.rank as usize]
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct MetadataFile {
    meta: VaultMeta,
    agents: Vec<AgentSpec>,
}

struct Column<'a> {
    name: &'static str,
    dtype: Dtype,
    shape: Vec<u64>,
    payload: Payload<'a>,
}

enum Payload<'a> {
    F32(&'a [f32]),
    I32(&'a [i32]),
    Bool(&'a [bool]),
}

impl Payload<'_> {
    fn byte_len(&self) -> usize {
        match self {
            Payload::F32(v) => v.len() * 4,
            Payload::I32(v) => v.len() * 4,
            Payload::Bool(v) => v.len(),
        }
    }

    fn write_to(&self, out: &mut Vec<u8>) {
        match self {
            Payload::F32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_bits().to_le_bytes())),
            Payload::I32(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::Bool(v) => out.extend(v.iter().map(|&b| b as u8)),
        }
    }
}

fn columns(d: &TrajectoryDataset) -> Vec<Column<'_>> {
    let t = d.n_transitions() as u64;
    let n = d.n_agents() as u64;
    let mut cols = vec![Column {
        name: "observations",
        dtype: Dtype::F32,
        shape: vec![t, n, d.observation_dim() as u64],
        payload: Payload::F32(&d.observations),
    }];
    cols.push(match &d.actions {
        Actions::Discrete(a) => Column {
            name: "actions",
            dtype: Dtype::I32,
            shape: vec![t, n],
            payload: Payload::I32(a),
        },
        Actions::Continuous(a) => Column {
            name: "actions",
            dtype: Dtype::F32,
            shape: vec![t, n, d.action_width() as u64],
            payload: Payload::F32(a),
        },
    });
    cols.push(Column {
        name: "rewards",
        dtype: Dtype::F32,
        shape: vec![t, n],
        payload: Payload::F32(&d.rewards),
    });
    cols.push(Column {
        name: "terminals",
        dtype: Dtype::U8,
        shape: vec![t],
        payload: Payload::Bool(&d.terminals),
    });
    if let Some(s) = &d.state {
        cols.push(Column {
            name: "state",
            dtype: Dtype::F32,
            shape: vec![t, s.dim as u64],
            payload: Payload::F32(&s.data),
        });
    }
    cols
}

/// Serializes the columnar payload file.
pub fn encode_data_bin(d: &TrajectoryDataset) -> Vec<u8> {
    let cols = columns(d);
    let table_end = HEADER_LEN + cols.len() * ENTRY_LEN;
    let total = table_end + cols.iter().map(|c| c.payload.byte_len()).sum::<usize>();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d.n_transitions() as u64).to_le_bytes());
    out.extend_from_slice(&(d.n_agents() as u32).to_le_bytes());
    out.extend_from_slice(&(cols.len() as u32).to_le_bytes());
    let mut offset = table_end as u64;
    for c in &cols {
        let mut name = [0u8; NAME_LEN];
        name[..c.name.len()].copy_from_slice(c.name.as_bytes());
        out.extend_from_slice(&name);
        out.push(c.dtype as u8);
        out.push(c.shape.len() as u8);
        for i in 0..3 {
            out.extend_from_slice(&c.shape.get(i).copied().unwrap_or(0).to_le_bytes());
        }
        let len = c.payload.byte_len() as u64;
        out.extend_from_slice(&offset.to_le_bytes());
        out.extend_from_slice(&len.to_le_bytes());
        offset += len;
    }
    for c in &cols {
        c.payload.write_to(&mut out);
    }
    debug_assert_eq!(out.len(), total);
    out
}

pub fn encode_episode_index(d: &TrajectoryDataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * (d.n_episodes() + 1));
    out.extend_from_slice(&(d.n_episodes() as u64).to_le_bytes());
    for &s in &d.episode_starts {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Advisory lock held for the duration of a write.
struct VaultLock(PathBuf);

impl VaultLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(VaultLock(path))
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Locked(dir.to_path_buf()))
            }
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for VaultLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    let dest = dir.join(name);
    fs::rename(&tmp, &dest).map_err(|e| Error::io(dest, e))
}

/// Writes `dataset` as a vault directory at `path`.
///
/// The dataset is validated first; an invalid dataset leaves the filesystem
/// untouched. Payload files are a pure function of the dataset.
pub fn write_vault(dataset: &TrajectoryDataset, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    dataset.ensure_valid()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let _lock = VaultLock::acquire(dir)?;

    let data = encode_data_bin(dataset);
    let index = encode_episode_index(dataset);
    let metadata = serde_json::to_vec_pretty(&MetadataFile {
        meta: dataset.meta.clone(),
        agents: dataset.agents.clone(),
    })?;
    let sidecar = format!(
        "{}  {DATA_FILE}\n{}  {INDEX_FILE}\n",
        sha256_hex(&data),
        sha256_hex(&index)
    );
    write_atomic(dir, DATA_FILE, &data)?;
    write_atomic(dir, INDEX_FILE, &index)?;
    write_atomic(dir, METADATA_FILE, &metadata)?;
    write_atomic(dir, CHECKSUM_FILE, sidecar.as_bytes())?;
    Ok(())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

/// Verifies every entry of the sidecar, if there is one. Returns whether a
/// sidecar was found.
pub(crate) fn verify_checksums(dir: &Path) -> Result<bool> {
    let path = dir.join(CHECKSUM_FILE);
    if !path.exists() {
        return Ok(false);
    }
    let text = String::from_utf8(read_file(&path)?)
        .map_err(|_| Error::Format(format!("{CHECKSUM_FILE} is not UTF-8")))?;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let (expected, file) = line
            .split_once("  ")
            .ok_or_else(|| Error::Format(format!("malformed checksum line {line:?}")))?;
        if file.contains('/') || file.contains('\\') || file.starts_with('.') {
            return Err(Error::Format(format!("checksum entry names {file:?}")));
        }
        let actual = sha256_hex(&read_file(&dir.join(file))?);
        if actual != expected.to_ascii_lowercase() {
            return Err(Error::ChecksumMismatch {
                file: file.to_string(),
                expected: expected.to_string(),
                actual,
            });
        }
    }
    Ok(true)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

struct Header {
    version: u32,
    transitions: u64,
    n_agents: u32,
    sections: Vec<SectionInfo>,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    if bytes.len() < MAGIC.len() || bytes[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated(format!("{DATA_FILE} header")));
    }
    let version = u32_at(bytes, 6);
    if version > FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let transitions = u64_at(bytes, 10);
    let n_agents = u32_at(bytes, 18);
    let count = u32_at(bytes, 22) as usize;
    let table_end = count
        .checked_mul(ENTRY_LEN)
        .and_then(|l| l.checked_add(HEADER_LEN))
        .filter(|&end| end <= bytes.len())
        .ok_or_else(|| Error::Truncated(format!("{DATA_FILE} section table")))?;
    let mut sections = Vec::with_capacity(count);
    for i in 0..count {
        let e = &bytes[HEADER_LEN + i * ENTRY_LEN..HEADER_LEN + (i + 1) * ENTRY_LEN];
        let raw_name = &e[..NAME_LEN];
        let end = raw_name.iter().position(|&b| b == 0).unwrap_or(NAME_LEN);
        if !raw_name[..end].is_ascii() || raw_name[end..].iter().any(|&b| b != 0) {
            return Err(Error::Format(format!("section {i} has a malformed name")));
        }
        let name = String::from_utf8(raw_name[..end].to_vec()).expect("ascii");
        let dtype = Dtype::from_code(e[32])
            .ok_or_else(|| Error::Format(format!("section {name} has dtype code {}", e[32])))?;
        let rank = e[33];
        if !(1..=3).contains(&rank) {
            return Err(Error::Format(format!("section {name} has rank {rank}")));
        }
        let dims = [u64_at(e, 34), u64_at(e, 42), u64_at(e, 50)];
        let offset = u64_at(e, 58);
        let length = u64_at(e, 66);
        let info = SectionInfo {
            name,
            dtype,
            rank,
            dims,
            offset,
            length,
        };
        let expected_len = info
            .shape()
            .iter()
            .try_fold(dtype.size() as u64, |acc, &d| acc.checked_mul(d));
        if expected_len != Some(length) {
            return Err(Error::Format(format!(
                "section {} length {} does not match shape {:?}",
                info.name,
                length,
                info.shape()
            )));
        }
        if offset < table_end as u64
            || offset
                .checked_add(length)
                .is_none_or(|end| end > bytes.len() as u64)
        {
            return Err(Error::Truncated(format!(
                "section {} at offset {} with length {} exceeds {} bytes",
                info.name,
                offset,
                length,
                bytes.len()
            )));
        }
        sections.push(info);
    }
    Ok(Header {
        version,
        transitions,
        n_agents,
        sections,
    })
}

/// Reads just the section table of a vault's `data.bin`.
pub fn read_sections(path: impl AsRef<Path>) -> Result<Vec<SectionInfo>> {
    let file = path.as_ref().join(DATA_FILE);
    let bytes = read_file(&file)?;
    Ok(parse_header(&bytes, &file)?.sections)
}

fn payload<'a>(bytes: &'a [u8], s: &SectionInfo) -> &'a [u8] {
    &bytes[s.offset as usize..(s.offset + s.length) as usize]
}

fn decode_f32(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4)
        .map(|c| f32::from_bits(u32::from_le_bytes(c.try_into().unwrap())))
        .collect()
}

fn decode_i32(b: &[u8]) -> Vec<i32> {
    b.chunks_exact(4)
        .map(|c| i32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

/// Loads a vault directory written by [`write_vault`].
///
/// When `vault.sha256` is present every listed file must match its digest.
pub fn read_vault(path: impl AsRef<Path>) -> Result<TrajectoryDataset> {
    let dir = path.as_ref();
    let data_path = dir.join(DATA_FILE);
    let data = read_file(&data_path)?;
    if data.len() < MAGIC.len() || data[..MAGIC.len()] != MAGIC {
        return Err(Error::BadMagic(data_path));
    }
    verify_checksums(dir)?;
    let header = parse_header(&data, &data_path)?;

    let metadata: MetadataFile = serde_json::from_slice(&read_file(&dir.join(METADATA_FILE))?)?;
    let t = header.transitions;
    let n = metadata.agents.len() as u64;
    if header.n_agents as u64 != n {
        return Err(Error::Format(format!(
            "{DATA_FILE} declares {} agents, metadata lists {n}",
            header.n_agents
        )));
    }
    if header.version != metadata.meta.format_version {
        return Err(Error::Format(format!(
            "{DATA_FILE} version {} differs from metadata version {}",
            header.version, metadata.meta.format_version
        )));
    }
    let find = |name: &str| header.sections.iter().find(|s| s.name == name);
    let require =
        |name: &str| find(name).ok_or_else(|| Error::Format(format!("missing section {name}")));
    let expect_shape = |s: &SectionInfo, dtype: Dtype, shape: &[u64]| {
        if s.dtype != dtype || s.shape() != shape {
            Err(Error::Format(format!(
                "section {} is {} {:?}, expected {} {:?}",
                s.name,
                s.dtype.name(),
                s.shape(),
                dtype.name(),
                shape
            )))
        } else {
            Ok(())
        }
    };

    let first = metadata
        .agents
        .first()
        .ok_or_else(|| Error::Format("metadata lists no agents".into()))?;
    let obs_dim = first.observation_dim as u64;

    let obs = require("observations")?;
    expect_shape(obs, Dtype::F32, &[t, n, obs_dim])?;
    let act = require("actions")?;
    let actions = if first.action_kind.is_discrete() {
        expect_shape(act, Dtype::I32, &[t, n])?;
        Actions::Discrete(decode_i32(payload(&data, act)))
    } else {
        expect_shape(act, Dtype::F32, &[t, n, first.action_kind.width() as u64])?;
        Actions::Continuous(decode_f32(payload(&data, act)))
    };
    let rew = require("rewards")?;
    expect_shape(rew, Dtype::F32, &[t, n])?;
    let term = require("terminals")?;
    expect_shape(term, Dtype::U8, &[t])?;
    let terminals = payload(&data, term)
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Format(format!(
                "terminal byte {other} is not 0 or 1"
            ))),
        })
        .collect::<Result<Vec<_>>>()?;
    let state = match find("state") {
        Some(s) => {
            if s.dtype != Dtype::F32 || s.rank != 2 || s.dims[0] != t {
                return Err(Error::Format(format!(
                    "section state has shape {:?}",
                    s.shape()
                )));
            }
            Some(StateColumn {
                dim: s.dims[1] as usize,
                data: decode_f32(payload(&data, s)),
            })
        }
        None => None,
    };

    let index_path = dir.join(INDEX_FILE);
    let index = read_file(&index_path)?;
    if index.len() < 8 {
        return Err(Error::Truncated(format!("{INDEX_FILE} header")));
    }
    let count = u64_at(&index, 0);
    let expected = count
        .checked_mul(8)
        .and_then(|b| b.checked_add(8))
        .ok_or_else(|| Error::Format(format!("{INDEX_FILE} episode count overflows")))?;
    if (index.len() as u64) < expected {
        return Err(Error::Truncated(format!(
            "{INDEX_FILE} holds {} bytes, needs {expected}",
            index.len()
        )));
    }
    if index.len() as u64 > expected {
        return Err(Error::Format(format!("{INDEX_FILE} has trailing bytes")));
    }
    let episode_starts = index[8..].chunks_exact(8).map(|c| u64_at(c, 0)).collect();

    let dataset = TrajectoryDataset {
        agents: metadata.agents,
        observations: decode_f32(payload(&data, obs)),
        actions,
        rewards: decode_f32(payload(&data, rew)),
        terminals,
        state,
        episode_starts,
        meta: metadata.meta,
    };
    dataset.ensure_valid()?;
    Ok(dataset)
}
