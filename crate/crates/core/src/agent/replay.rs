use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::rng::rng_from_seed;

/// One `(x, u, w, c, x', terminal)` tuple. Actions are in environment units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub cost: f64,
    pub next_obs: Vec<f64>,
    pub terminal: bool,
}

/// Column-wise mini-batch, each field row-major over the batch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Batch {
    pub len: usize,
    pub obs: Vec<f64>,
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub cost: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub terminal: Vec<bool>,
}

impl Batch {
    pub fn from_transitions(ts: &[Transition]) -> Self {
        let mut b = Batch { len: ts.len(), ..Default::default() };
        for t in ts {
            b.obs.extend_from_slice(&t.obs);
            b.u.extend_from_slice(&t.u);
            b.w.extend_from_slice(&t.w);
            b.cost.push(t.cost);
            b.next_obs.extend_from_slice(&t.next_obs);
            b.terminal.push(t.terminal);
        }
        b
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Fixed-capacity ring of transitions with struct-of-arrays storage.
///
/// Storage grows on demand up to `capacity`; once full, each push overwrites the oldest slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    u_dim: usize,
    w_dim: usize,
    /// Physical slot the next push writes to.
    cursor: usize,
    size: usize,
    obs: Vec<f64>,
    u: Vec<f64>,
    w: Vec<f64>,
    cost: Vec<f64>,
    next_obs: Vec<f64>,
    terminal: Vec<bool>,
}

/// Raw contents for checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayLayout {
    pub capacity: usize,
    pub obs_dim: usize,
    pub u_dim: usize,
    pub w_dim: usize,
    pub cursor: usize,
    pub size: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, u_dim: usize, w_dim: usize) -> Result<Self, AgentError> {
        if capacity == 0 {
            return Err(AgentError::Config("buffer capacity must be >= 1".into()));
        }
        Ok(Self {
            capacity,
            obs_dim,
            u_dim,
            w_dim,
            cursor: 0,
            size: 0,
            obs: Vec::new(),
            u: Vec::new(),
            w: Vec::new(),
            cost: Vec::new(),
            next_obs: Vec::new(),
            terminal: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: &Transition) -> Result<(), AgentError> {
        check("obs", self.obs_dim, t.obs.len())?;
        check("next_obs", self.obs_dim, t.next_obs.len())?;
        check("u", self.u_dim, t.u.len())?;
        check("w", self.w_dim, t.w.len())?;
        let i = self.cursor;
        if i == self.cost.len() {
            self.obs.extend_from_slice(&t.obs);
            self.u.extend_from_slice(&t.u);
            self.w.extend_from_slice(&t.w);
            self.cost.push(t.cost);
            self.next_obs.extend_from_slice(&t.next_obs);
            self.terminal.push(t.terminal);
        } else {
            self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.obs);
            self.u[i * self.u_dim..(i + 1) * self.u_dim].copy_from_slice(&t.u);
            self.w[i * self.w_dim..(i + 1) * self.w_dim].copy_from_slice(&t.w);
            self.cost[i] = t.cost;
            self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.next_obs);
            self.terminal[i] = t.terminal;
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
        Ok(())
    }

    fn slot(&self, i: usize) -> Transition {
        Transition {
            obs: self.obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            u: self.u[i * self.u_dim..(i + 1) * self.u_dim].to_vec(),
            w: self.w[i * self.w_dim..(i + 1) * self.w_dim].to_vec(),
            cost: self.cost[i],
            next_obs: self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim].to_vec(),
            terminal: self.terminal[i],
        }
    }

    /// The `k`-th stored transition, oldest first.
    pub fn get(&self, k: usize) -> Option<Transition> {
        if k >= self.size {
            return None;
        }
        let oldest = if self.size < self.capacity { 0 } else { self.cursor };
        Some(self.slot((oldest + k) % self.capacity))
    }

    /// Uniform draws with replacement; indices come from a ChaCha8 stream seeded by `seed`.
    pub fn sample_indices(&self, batch_size: usize, seed: u64) -> Result<Vec<usize>, AgentError> {
        if self.size == 0 {
            return Err(AgentError::EmptyBuffer);
        }
        let mut rng = rng_from_seed(seed);
        Ok((0..batch_size).map(|_| rng.gen_range(0..self.size)).collect())
    }

    pub fn sample(&self, batch_size: usize, seed: u64) -> Result<Vec<Transition>, AgentError> {
        Ok(self.sample_indices(batch_size, seed)?.into_iter().map(|i| self.slot(i)).collect())
    }

    pub fn sample_batch(&self, batch_size: usize, seed: u64) -> Result<Batch, AgentError> {
        let idx = self.sample_indices(batch_size, seed)?;
        let mut b = Batch {
            len: batch_size,
            obs: Vec::with_capacity(batch_size * self.obs_dim),
            u: Vec::with_capacity(batch_size * self.u_dim),
            w: Vec::with_capacity(batch_size * self.w_dim),
            cost: Vec::with_capacity(batch_size),
            next_obs: Vec::with_capacity(batch_size * self.obs_dim),
            terminal: Vec::with_capacity(batch_size),
        };
        for i in idx {
            b.obs.extend_from_slice(&self.obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.u.extend_from_slice(&self.u[i * self.u_dim..(i + 1) * self.u_dim]);
            b.w.extend_from_slice(&self.w[i * self.w_dim..(i + 1) * self.w_dim]);
            b.cost.push(self.cost[i]);
            b.next_obs.extend_from_slice(&self.next_obs[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.terminal.push(self.terminal[i]);
        }
        Ok(b)
    }

    pub fn layout(&self) -> ReplayLayout {
        ReplayLayout {
            capacity: self.capacity,
            obs_dim: self.obs_dim,
            u_dim: self.u_dim,
            w_dim: self.w_dim,
            cursor: self.cursor,
            size: self.size,
        }
    }

    /// Slot-ordered float payload: obs, u, w, cost, next_obs, terminal (as 0/1).
    pub fn raw_payload(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.obs.len() * 2 + self.u.len() + self.w.len() + 2 * self.cost.len());
        v.extend_from_slice(&self.obs);
        v.extend_from_slice(&self.u);
        v.extend_from_slice(&self.w);
        v.extend_from_slice(&self.cost);
        v.extend_from_slice(&self.next_obs);
        v.extend(self.terminal.iter().map(|&t| if t { 1.0 } else { 0.0 }));
        v
    }

    pub fn payload_len(layout: &ReplayLayout) -> usize {
        let slots = layout.size;
        slots * (2 * layout.obs_dim + layout.u_dim + layout.w_dim + 2)
    }

    /// Inverse of [`ReplayBuffer::layout`] plus [`ReplayBuffer::raw_payload`].
    pub fn from_raw(layout: &ReplayLayout, data: &[f64]) -> Result<Self, AgentError> {
        let expected = Self::payload_len(layout);
        if data.len() != expected || layout.size > layout.capacity || layout.cursor >= layout.capacity.max(1) {
            return Err(AgentError::Config(format!(
                "replay payload has {} values, layout {layout:?} needs {expected}",
                data.len()
            )));
        }
        let mut buf = Self::new(layout.capacity, layout.obs_dim, layout.u_dim, layout.w_dim)?;
        let n = layout.size;
        let mut at = 0;
        let mut take = |len: usize| {
            let s = &data[at..at + len];
            at += len;
            s.to_vec()
        };
        buf.obs = take(n * layout.obs_dim);
        buf.u = take(n * layout.u_dim);
        buf.w = take(n * layout.w_dim);
        buf.cost = take(n);
        buf.next_obs = take(n * layout.obs_dim);
        buf.terminal = take(n).into_iter().map(|t| t != 0.0).collect();
        buf.cursor = layout.cursor;
        buf.size = n;
        Ok(buf)
    }
}

fn check(what: &'static str, expected: usize, found: usize) -> Result<(), AgentError> {
    if expected == found {
        Ok(())
    } else {
        Err(AgentError::Dimension { what, expected, found })
    }
}
