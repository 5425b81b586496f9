//! Replay memory: a reservoir sample of past stream data and the access
//! budget that limits how often it may be read.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_dataset, write_dataset, Dataset, Sample};
use crate::error::{Error, Result};

/// Bounded reservoir (Algorithm R) over every sample offered so far.
#[derive(Debug, Clone)]
pub struct MemoryBuffer {
    capacity: usize,
    contents: Vec<Sample>,
    seen_count: u64,
    rng_seed: u64,
    rng: ChaCha8Rng,
}

impl MemoryBuffer {
    pub fn new(capacity: usize, rng_seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::config("buffer capacity must be positive"));
        }
        Ok(MemoryBuffer {
            capacity,
            contents: Vec::with_capacity(capacity),
            seen_count: 0,
            rng_seed,
            rng: ChaCha8Rng::seed_from_u64(rng_seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.contents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contents.is_empty()
    }

    pub fn seen_count(&self) -> u64 {
        self.seen_count
    }

    pub fn contents(&self) -> &[Sample] {
        &self.contents
    }

    /// Offers every sample of `batch` to the reservoir.
    pub fn update<'a>(&mut self, batch: impl IntoIterator<Item = &'a Sample>) {
        for sample in batch {
            self.seen_count += 1;
            if self.contents.len() < self.capacity {
                self.contents.push(sample.clone());
            } else {
                let j = self.rng.random_range(0..self.seen_count);
                if (j as usize) < self.capacity {
                    self.contents[j as usize] = sample.clone();
                }
            }
        }
    }

    /// Draws a replay batch. Requires an open access grant on `policy`.
    ///
    /// Without a filter, up to `replay_batch_size` distinct slots are drawn
    /// uniformly. With a class pair `(m, n)`, only those labels are eligible
    /// and the two classes alternate until the batch is full; once one class
    /// runs out the other fills the remainder.
    pub fn sample_for_replay(
        &mut self,
        policy: &AccessPolicy,
        filter: Option<(usize, usize)>,
    ) -> Result<Vec<Sample>> {
        if !policy.is_open() {
            return Err(Error::AccessDenied);
        }
        let want = policy.replay_batch_size;
        match filter {
            None => {
                let amount = want.min(self.contents.len());
                let picks = index::sample(&mut self.rng, self.contents.len(), amount);
                Ok(picks.iter().map(|i| self.contents[i].clone()).collect())
            }
            Some((m, n)) => {
                let mut first: Vec<usize> = (0..self.contents.len())
                    .filter(|&i| self.contents[i].label == m)
                    .collect();
                let mut second: Vec<usize> = (0..self.contents.len())
                    .filter(|&i| self.contents[i].label == n && m != n)
                    .collect();
                first.shuffle(&mut self.rng);
                second.shuffle(&mut self.rng);
                let mut out = Vec::with_capacity(want);
                let (mut a, mut b) = (first.into_iter(), second.into_iter());
                while out.len() < want {
                    let mut progressed = false;
                    if let Some(i) = a.next() {
                        out.push(self.contents[i].clone());
                        progressed = true;
                    }
                    if out.len() < want {
                        if let Some(i) = b.next() {
                            out.push(self.contents[i].clone());
                            progressed = true;
                        }
                    }
                    if !progressed {
                        break;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Writes the buffer as a dataset manifest plus a small state file.
    pub fn save(&self, dir: impl AsRef<Path>, classes: usize) -> Result<PathBuf> {
        let dir = dir.as_ref();
        let dim = self.contents.first().map_or(0, |s| s.features.len());
        let dataset = Dataset {
            samples: self.contents.clone(),
            dim,
            classes,
        };
        let manifest = write_dataset(&dataset, dir, "buffer")?;
        let state = BufferState {
            capacity: self.capacity,
            seen_count: self.seen_count,
            rng_seed: self.rng_seed,
            rng_word_pos: self.rng.get_word_pos(),
            task_ids: self.contents.iter().map(|s| s.task_id).collect(),
            arrival_indices: self.contents.iter().map(|s| s.arrival_index).collect(),
        };
        let path = dir.join("buffer.state.json");
        fs::write(&path, serde_json::to_string_pretty(&state)?).map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }

    /// Restores a buffer written by [`MemoryBuffer::save`].
    ///
    /// Features are stored as `f32`, so restored values are the `f32`
    /// rounding of what was saved.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join("buffer.state.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: BufferState = serde_json::from_str(&text)?;
        let dataset = load_dataset(dir.join("buffer.json"))?;
        if dataset.samples.len() != state.task_ids.len() {
            return Err(Error::DimensionMismatch {
                expected: state.task_ids.len(),
                found: dataset.samples.len(),
                context: "buffer checkpoint".into(),
            });
        }
        let mut contents = dataset.samples;
        for (i, s) in contents.iter_mut().enumerate() {
            s.task_id = state.task_ids[i];
            s.arrival_index = state.arrival_indices[i];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(state.rng_seed);
        rng.set_word_pos(state.rng_word_pos);
        Ok(MemoryBuffer {
            capacity: state.capacity,
            contents,
            seen_count: state.seen_count,
            rng_seed: state.rng_seed,
            rng,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct BufferState {
    capacity: usize,
    seen_count: u64,
    rng_seed: u64,
    rng_word_pos: u128,
    task_ids: Vec<usize>,
    arrival_indices: Vec<u64>,
}

/// Replay budget: one buffer access every `every` training iterations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPolicy {
    pub every: u64,
    pub replay_batch_size: usize,
    accesses_used: u64,
    open_at: Option<u64>,
}

impl AccessPolicy {
    pub fn new(every: u64, replay_batch_size: usize) -> Result<Self> {
        if every == 0 {
            return Err(Error::config("replay interval must be at least 1"));
        }
        if replay_batch_size == 0 {
            return Err(Error::config("replay batch size must be at least 1"));
        }
        Ok(AccessPolicy {
            every,
            replay_batch_size,
            accesses_used: 0,
            open_at: None,
        })
    }

    /// Replay frequency as a fraction of iterations.
    pub fn frequency(&self) -> f64 {
        1.0 / self.every as f64
    }

    /// Grants an access at `iteration` when it is a positive multiple of the
    /// interval. A grant stays open until the next call with a different
    /// iteration; repeated calls at the same iteration do not count twice.
    pub fn may_access(&mut self, iteration: u64) -> bool {
        if self.open_at == Some(iteration) {
            return true;
        }
        let granted = iteration > 0 && iteration % self.every == 0;
        if granted {
            self.accesses_used += 1;
            self.open_at = Some(iteration);
        } else {
            self.open_at = None;
        }
        granted
    }

    pub fn is_open(&self) -> bool {
        self.open_at.is_some()
    }

    pub fn accesses_used(&self) -> u64 {
        self.accesses_used
    }
}
