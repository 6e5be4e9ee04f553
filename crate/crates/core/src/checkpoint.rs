//! Versioned binary checkpoint.
//!
//! Layout:
//!
//! | bytes            | content                                   |
//! |------------------|-------------------------------------------|
//! | 8                | magic `RDPGCKPT`                          |
//! | 4                | format version, u32 little-endian         |
//! | 8                | header length `h`, u64 little-endian      |
//! | h                | UTF-8 JSON header ([`CheckpointHeader`])  |
//! | 8 · payload_len  | f64 little-endian payload                 |
//!
//! The payload holds, in order: the eight network parameter vectors, the
//! optimizer moment vectors (first then second, for each Adam optimizer), the
//! replay buffer, the environment snapshot and the current observation. The
//! header records every section's offset and length plus an FNV-1a checksum of
//! the payload bytes.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentDims, RddpgAgent, ReplayBuffer, ReplayLayout, NETWORK_NAMES};
use crate::config::RunConfig;
use crate::diffnet::{AdamState, Mlp, MlpSpec, Optimizer, OptimizerKind};
use crate::harness::{CurveRow, HarnessError, Trainer, TrainerSnapshot};

pub const MAGIC: &[u8; 8] = b"RDPGCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("not a checkpoint file (bad magic bytes)")]
    BadMagic,
    #[error("checkpoint format version {found} is not supported by this build (expects {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupted checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkEntry {
    pub name: String,
    pub spec: MlpSpec,
    pub params: Section,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerEntry {
    pub kind: OptimizerKind,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Present for Adam.
    pub first_moment: Option<Section>,
    pub second_moment: Option<Section>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: RunConfig,
    pub dims: AgentDims,
    pub counters: TrainerSnapshot,
    pub curve: Vec<CurveRow>,
    pub networks: Vec<NetworkEntry>,
    pub optimizers: Vec<OptimizerEntry>,
    pub replay: ReplayLayout,
    pub replay_payload: Section,
    pub env_snapshot: Section,
    pub observation: Section,
    pub payload_len: usize,
    pub payload_fnv1a: u64,
}

/// Everything needed to resume training or evaluate the actors.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: RunConfig,
    pub agent: RddpgAgent,
    pub buffer: ReplayBuffer,
    pub counters: TrainerSnapshot,
    pub curve: Vec<CurveRow>,
    pub env_snapshot: Vec<f64>,
    pub observation: Vec<f64>,
}

impl Checkpoint {
    /// Captures a trainer. `config` is stored verbatim for resumption.
    pub fn from_trainer(trainer: &Trainer, config: &RunConfig) -> Self {
        Self {
            config: config.clone(),
            agent: trainer.agent.clone(),
            buffer: trainer.buffer.clone(),
            counters: trainer.counters.clone(),
            curve: trainer.curve.clone(),
            env_snapshot: trainer.env_snapshot(),
            observation: trainer.observation().to_vec(),
        }
    }

    pub fn into_trainer(self) -> Result<Trainer, CheckpointError> {
        Ok(Trainer::from_parts(
            self.config.env,
            self.config.harness,
            self.config.seed,
            self.agent,
            self.buffer,
            self.counters,
            self.curve,
            &self.env_snapshot,
            self.observation,
        )?)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut payload: Vec<f64> = Vec::new();
        let section = |name: &str, data: &[f64], payload: &mut Vec<f64>| {
            let s = Section { name: name.to_string(), offset: payload.len(), len: data.len() };
            payload.extend_from_slice(data);
            s
        };
        let networks = self
            .agent
            .networks()
            .iter()
            .zip(NETWORK_NAMES)
            .map(|(net, name)| NetworkEntry {
                name: name.to_string(),
                spec: net.spec().clone(),
                params: section(name, net.params(), &mut payload),
            })
            .collect();
        let optimizers = self
            .agent
            .optimizers()
            .iter()
            .enumerate()
            .map(|(i, opt)| match opt {
                Optimizer::Adam(s) => OptimizerEntry {
                    kind: OptimizerKind::Adam,
                    step_count: s.step_count,
                    beta1: s.beta1,
                    beta2: s.beta2,
                    epsilon: s.epsilon,
                    first_moment: Some(section(&format!("opt{i}.m"), &s.first_moment, &mut payload)),
                    second_moment: Some(section(&format!("opt{i}.v"), &s.second_moment, &mut payload)),
                },
                Optimizer::Sgd { step_count } => OptimizerEntry {
                    kind: OptimizerKind::Sgd,
                    step_count: *step_count,
                    beta1: 0.0,
                    beta2: 0.0,
                    epsilon: 0.0,
                    first_moment: None,
                    second_moment: None,
                },
            })
            .collect();
        let replay_payload = section("replay", &self.buffer.raw_payload(), &mut payload);
        let env_snapshot = section("env", &self.env_snapshot, &mut payload);
        let observation = section("obs", &self.observation, &mut payload);
        let bytes: Vec<u8> = payload.iter().flat_map(|v| v.to_le_bytes()).collect();
        let header = CheckpointHeader {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            dims: self.agent.dims.clone(),
            counters: self.counters.clone(),
            curve: self.curve.clone(),
            networks,
            optimizers,
            replay: self.buffer.layout(),
            replay_payload,
            env_snapshot,
            observation,
            payload_len: payload.len(),
            payload_fnv1a: fnv1a(&bytes),
        };
        let header_json = serde_json::to_vec(&header).expect("header serializes");
        let mut out = Vec::with_capacity(20 + header_json.len() + bytes.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&header_json);
        out.extend_from_slice(&bytes);
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, CheckpointError> {
        if data.len() < 20 || &data[..8] != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version { found: version, expected: FORMAT_VERSION });
        }
        let header_len = u64::from_le_bytes(data[12..20].try_into().expect("8 bytes")) as usize;
        let header_end = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= data.len())
            .ok_or_else(|| CheckpointError::Corrupt("header length exceeds file size".into()))?;
        let header: CheckpointHeader = serde_json::from_slice(&data[20..header_end])
            .map_err(|e| CheckpointError::Corrupt(format!("header: {e}")))?;
        let bytes = &data[header_end..];
        if bytes.len() != header.payload_len * 8 {
            return Err(CheckpointError::Corrupt(format!(
                "payload has {} bytes, header declares {} values",
                bytes.len(),
                header.payload_len
            )));
        }
        if fnv1a(bytes) != header.payload_fnv1a {
            return Err(CheckpointError::Corrupt("payload checksum mismatch".into()));
        }
        let payload: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let take = |s: &Section| -> Result<Vec<f64>, CheckpointError> {
            payload
                .get(s.offset..s.offset + s.len)
                .map(<[f64]>::to_vec)
                .ok_or_else(|| CheckpointError::Corrupt(format!("section {} out of range", s.name)))
        };
        let corrupt = |e: &dyn std::fmt::Display| CheckpointError::Corrupt(e.to_string());

        let mut agent = RddpgAgent::new(header.config.agent.clone(), header.dims.clone(), header.config.seed)
            .map_err(|e| corrupt(&e))?;
        if header.networks.len() != 8 || header.optimizers.len() != 4 {
            return Err(CheckpointError::Corrupt("expected 8 networks and 4 optimizers".into()));
        }
        for (slot, entry) in agent.networks_mut().into_iter().zip(&header.networks) {
            *slot = Mlp::from_params(entry.spec.clone(), take(&entry.params)?).map_err(|e| corrupt(&e))?;
        }
        for (slot, entry) in agent.optimizers_mut().into_iter().zip(&header.optimizers) {
            *slot = match entry.kind {
                OptimizerKind::Sgd => Optimizer::Sgd { step_count: entry.step_count },
                OptimizerKind::Adam => {
                    let (m, v) = match (&entry.first_moment, &entry.second_moment) {
                        (Some(m), Some(v)) => (take(m)?, take(v)?),
                        _ => return Err(CheckpointError::Corrupt("Adam entry without moments".into())),
                    };
                    Optimizer::Adam(AdamState {
                        first_moment: m,
                        second_moment: v,
                        step_count: entry.step_count,
                        beta1: entry.beta1,
                        beta2: entry.beta2,
                        epsilon: entry.epsilon,
                    })
                }
            };
        }
        let buffer = ReplayBuffer::from_raw(&header.replay, &take(&header.replay_payload)?).map_err(|e| corrupt(&e))?;
        Ok(Self {
            agent,
            buffer,
            env_snapshot: take(&header.env_snapshot)?,
            observation: take(&header.observation)?,
            config: header.config,
            counters: header.counters,
            curve: header.curve,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        let io = |e: std::io::Error| CheckpointError::Io { path: path.display().to_string(), detail: e.to_string() };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io)?;
        }
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(&self.to_bytes()).map_err(io)?;
        f.sync_all().map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, CheckpointError> {
        let data = fs::read(path).map_err(|e| CheckpointError::Io { path: path.display().to_string(), detail: e.to_string() })?;
        Self::from_bytes(&data)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
