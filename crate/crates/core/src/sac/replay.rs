use rand::Rng;

use crate::nn::{Matrix, ACTION_DIM};

/// One environment interaction. `action` is the squashed action in (-1, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: [f64; ACTION_DIM],
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// True only for physical terminals (collision, target reached).
    pub done: bool,
}

/// Row-stacked minibatch.
#[derive(Clone, Debug)]
pub struct Batch {
    pub states: Matrix,
    pub actions: Matrix,
    pub rewards: Vec<f64>,
    pub next_states: Matrix,
    pub dones: Vec<bool>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn from_transitions(ts: &[Transition]) -> Self {
        let states: Vec<&[f64]> = ts.iter().map(|t| t.state.as_slice()).collect();
        let next: Vec<&[f64]> = ts.iter().map(|t| t.next_state.as_slice()).collect();
        let actions: Vec<[f64; ACTION_DIM]> = ts.iter().map(|t| t.action).collect();
        Self {
            states: Matrix::from_rows(&states),
            actions: Matrix::from_rows(&actions),
            rewards: ts.iter().map(|t| t.reward).collect(),
            next_states: Matrix::from_rows(&next),
            dones: ts.iter().map(|t| t.done).collect(),
        }
    }
}

/// Fixed-capacity ring of transitions stored in flat arrays.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    state_dim: usize,
    states: Vec<f64>,
    actions: Vec<f64>,
    rewards: Vec<f64>,
    next_states: Vec<f64>,
    dones: Vec<bool>,
    /// Slot the next push writes.
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, state_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            state_dim,
            states: Vec::new(),
            actions: Vec::new(),
            rewards: Vec::new(),
            next_states: Vec::new(),
            dones: Vec::new(),
            head: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    /// Panics if the state widths do not match the buffer.
    pub fn push(
        &mut self,
        state: &[f64],
        action: [f64; ACTION_DIM],
        reward: f64,
        next_state: &[f64],
        done: bool,
    ) {
        assert_eq!(state.len(), self.state_dim, "state width");
        assert_eq!(next_state.len(), self.state_dim, "next state width");
        let d = self.state_dim;
        if self.rewards.len() < self.capacity {
            self.states.extend_from_slice(state);
            self.actions.extend_from_slice(&action);
            self.rewards.push(reward);
            self.next_states.extend_from_slice(next_state);
            self.dones.push(done);
        } else {
            let i = self.head;
            self.states[i * d..(i + 1) * d].copy_from_slice(state);
            self.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM].copy_from_slice(&action);
            self.rewards[i] = reward;
            self.next_states[i * d..(i + 1) * d].copy_from_slice(next_state);
            self.dones[i] = done;
        }
        self.head = (self.head + 1) % self.capacity;
    }

    pub fn push_transition(&mut self, t: &Transition) {
        self.push(&t.state, t.action, t.reward, &t.next_state, t.done);
    }

    fn slot(&self, age: usize) -> usize {
        if self.len() < self.capacity {
            age
        } else {
            (self.head + age) % self.capacity
        }
    }

    fn at_slot(&self, i: usize) -> Transition {
        let d = self.state_dim;
        let mut action = [0.0; ACTION_DIM];
        action.copy_from_slice(&self.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
        Transition {
            state: self.states[i * d..(i + 1) * d].to_vec(),
            action,
            reward: self.rewards[i],
            next_state: self.next_states[i * d..(i + 1) * d].to_vec(),
            done: self.dones[i],
        }
    }

    /// Transition by age; `0` is the oldest still stored.
    pub fn get(&self, age: usize) -> Option<Transition> {
        (age < self.len()).then(|| self.at_slot(self.slot(age)))
    }

    /// Distinct storage slots drawn uniformly; panics if `batch > len`.
    pub fn sample_slots<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Vec<usize> {
        rand::seq::index::sample(rng, self.len(), batch).into_vec()
    }

    pub fn batch_from_slots(&self, slots: &[usize]) -> Batch {
        let d = self.state_dim;
        let n = slots.len();
        let mut states = Vec::with_capacity(n * d);
        let mut next_states = Vec::with_capacity(n * d);
        let mut actions = Vec::with_capacity(n * ACTION_DIM);
        let mut rewards = Vec::with_capacity(n);
        let mut dones = Vec::with_capacity(n);
        for &i in slots {
            states.extend_from_slice(&self.states[i * d..(i + 1) * d]);
            next_states.extend_from_slice(&self.next_states[i * d..(i + 1) * d]);
            actions.extend_from_slice(&self.actions[i * ACTION_DIM..(i + 1) * ACTION_DIM]);
            rewards.push(self.rewards[i]);
            dones.push(self.dones[i]);
        }
        Batch {
            states: Matrix::from_vec(n, d, states),
            actions: Matrix::from_vec(n, ACTION_DIM, actions),
            rewards,
            next_states: Matrix::from_vec(n, d, next_states),
            dones,
        }
    }

    /// Uniform minibatch without replacement; `None` if fewer than `batch` stored.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, batch: usize) -> Option<Batch> {
        if batch == 0 || batch > self.len() {
            return None;
        }
        let slots = self.sample_slots(rng, batch);
        Some(self.batch_from_slots(&slots))
    }
}
