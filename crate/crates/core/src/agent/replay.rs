use rand::Rng;

use crate::gridworld::{Action, GRID, OBSERVATION_LEN};

/// Number of ones in every one-hot observation.
pub const ACTIVE_INPUTS: usize = GRID * GRID + 2;

/// A one-hot observation stored as the sorted indices of its ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PackedObs([u8; ACTIVE_INPUTS]);

impl PackedObs {
    /// Packs a dense one-hot vector. Returns `None` if it is not 0/1 valued
    /// with exactly [`ACTIVE_INPUTS`] ones.
    pub fn pack(obs: &[f64]) -> Option<Self> {
        if obs.len() != OBSERVATION_LEN {
            return None;
        }
        let mut idx = [0u8; ACTIVE_INPUTS];
        let mut n = 0;
        for (i, &v) in obs.iter().enumerate() {
            if v == 1.0 {
                if n == ACTIVE_INPUTS {
                    return None;
                }
                idx[n] = i as u8;
                n += 1;
            } else if v != 0.0 {
                return None;
            }
        }
        (n == ACTIVE_INPUTS).then_some(PackedObs(idx))
    }

    /// Left-right mirror image of a north-facing view: column `c` becomes
    /// `GRID - 1 - c`. Only meaningful for observations whose direction block
    /// is `North`, which mirroring leaves unchanged.
    pub fn mirrored(&self) -> Self {
        let cells = GRID * GRID * 4;
        let flip = |flat: usize| (flat / GRID) * GRID + (GRID - 1 - flat % GRID);
        let mut idx = self.0.map(|i| {
            let i = i as usize;
            let j = if i < cells {
                flip(i / 4) * 4 + i % 4
            } else if i < cells + GRID * GRID {
                cells + flip(i - cells)
            } else {
                i
            };
            j as u8
        });
        idx.sort_unstable();
        PackedObs(idx)
    }

    pub fn unpack_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.resize(OBSERVATION_LEN, 0.0);
        for &i in &self.0 {
            out[i as usize] = 1.0;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub obs: PackedObs,
    pub action: Action,
    pub reward: f64,
    pub next_obs: PackedObs,
    /// Episode ended on this transition (goal, lava or step cap).
    pub terminal: bool,
}

impl Transition {
    /// The same transition seen in a mirror: turns swap, everything else is
    /// reflected column-wise.
    pub fn mirrored(&self) -> Self {
        let action = match self.action {
            Action::TurnLeft => Action::TurnRight,
            Action::TurnRight => Action::TurnLeft,
            Action::Forward => Action::Forward,
        };
        Transition { obs: self.obs.mirrored(), action, next_obs: self.next_obs.mirrored(), ..*self }
    }
}

/// Fixed-capacity ring buffer with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<Transition>,
    next: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        ReplayBuffer { capacity, items: Vec::with_capacity(capacity.min(1 << 16)), next: 0 }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.next] = t;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    /// `n` draws, uniform with replacement over current contents.
    pub fn sample<'a, R: Rng + ?Sized>(&'a self, n: usize, rng: &mut R) -> Vec<&'a Transition> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..n).map(|_| &self.items[rng.gen_range(0..self.items.len())]).collect()
    }
}
