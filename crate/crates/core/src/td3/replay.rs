use parking_lot::Mutex;
use rand::Rng;

use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::meta_env::{Transition, ACTION_DIM, STATE_DIM};

/// Row-major sample of transitions, ready for batched network passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub size: usize,
    pub states: Vec<f64>,
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub next_states: Vec<f64>,
    pub dones: Vec<bool>,
}

#[derive(Debug, Default)]
struct Ring {
    states: Vec<f32>,
    next_states: Vec<f32>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    len: usize,
    cursor: usize,
    pushes: u64,
}

/// Fixed-capacity ring of transitions shared between actors and the learner.
/// States are stored in single precision.
#[derive(Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    ring: Mutex<Ring>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::Config("replay capacity must be positive".into()));
        }
        Ok(Self {
            capacity,
            ring: Mutex::new(Ring::default()),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.ring.lock().len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total pushes since creation, including overwritten ones.
    pub fn pushes(&self) -> u64 {
        self.ring.lock().pushes
    }

    /// Append, overwriting the oldest entry once full. The whole record is
    /// written under the lock, so samplers never see a partial transition.
    pub fn push(&self, t: &Transition) {
        let mut r = self.ring.lock();
        let slot = r.cursor;
        if r.len < self.capacity {
            r.states.extend(t.state.as_slice().iter().map(|&v| v as f32));
            r.next_states.extend(t.next_state.as_slice().iter().map(|&v| v as f32));
            r.actions.extend_from_slice(&t.action);
            r.rewards.push(t.reward);
            r.dones.push(t.done);
            r.len += 1;
        } else {
            for (d, s) in r.states[slot * STATE_DIM..(slot + 1) * STATE_DIM].iter_mut().zip(t.state.as_slice()) {
                *d = *s as f32;
            }
            for (d, s) in r.next_states[slot * STATE_DIM..(slot + 1) * STATE_DIM].iter_mut().zip(t.next_state.as_slice()) {
                *d = *s as f32;
            }
            r.actions[slot * ACTION_DIM..(slot + 1) * ACTION_DIM].copy_from_slice(&t.action);
            r.rewards[slot] = t.reward;
            r.dones[slot] = t.done;
        }
        r.cursor = (slot + 1) % self.capacity;
        r.pushes += 1;
    }

    /// Uniform indices with replacement drawn from `rng`.
    pub fn sample_indices<R: Rng>(&self, rng: &mut R, batch: usize) -> Result<Vec<usize>> {
        let len = self.len();
        if len < batch || batch == 0 {
            return Err(Error::BufferUnderflow {
                size: len,
                requested: batch,
            });
        }
        Ok((0..batch).map(|_| rng.random_range(0..len)).collect())
    }

    pub fn sample<R: Rng>(&self, rng: &mut R, batch: usize) -> Result<Batch> {
        let idx = self.sample_indices(rng, batch)?;
        Ok(self.gather(&idx))
    }

    /// Records at the given ring slots.
    pub fn gather(&self, idx: &[usize]) -> Batch {
        let r = self.ring.lock();
        let n = idx.len();
        let mut b = Batch {
            size: n,
            states: Vec::with_capacity(n * STATE_DIM),
            actions: Vec::with_capacity(n * ACTION_DIM),
            rewards: Vec::with_capacity(n),
            next_states: Vec::with_capacity(n * STATE_DIM),
            dones: Vec::with_capacity(n),
        };
        for &i in idx {
            b.states.extend(r.states[i * STATE_DIM..(i + 1) * STATE_DIM].iter().map(|&v| v as f64));
            b.next_states.extend(r.next_states[i * STATE_DIM..(i + 1) * STATE_DIM].iter().map(|&v| v as f64));
            b.actions.extend_from_slice(&r.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
            b.rewards.push(r.rewards[i]);
            b.dones.push(r.dones[i]);
        }
        b
    }

    pub(crate) fn write_to(&self, w: &mut Writer) {
        let r = self.ring.lock();
        w.u64(self.capacity as u64);
        w.u64(r.len as u64);
        w.u64(r.cursor as u64);
        w.u64(r.pushes);
        w.f32s(&r.states);
        w.f32s(&r.next_states);
        w.f64s(&r.actions);
        w.f64s(&r.rewards);
        w.bytes(&r.dones.iter().map(|&d| u8::from(d)).collect::<Vec<_>>());
    }

    pub(crate) fn read_from(rd: &mut Reader) -> Result<Self> {
        let capacity = rd.u64()? as usize;
        let len = rd.u64()? as usize;
        let cursor = rd.u64()? as usize;
        let pushes = rd.u64()?;
        let ring = Ring {
            states: rd.f32s(len * STATE_DIM)?,
            next_states: rd.f32s(len * STATE_DIM)?,
            actions: rd.f64s(len * ACTION_DIM)?,
            rewards: rd.f64s(len)?,
            dones: rd.bytes(len)?.into_iter().map(|b| b != 0).collect(),
            len,
            cursor,
            pushes,
        };
        if capacity == 0 || len > capacity || cursor >= capacity {
            return Err(Error::Checkpoint("corrupt replay buffer header".into()));
        }
        Ok(Self {
            capacity,
            ring: Mutex::new(ring),
        })
    }
}
