use alloc::vec::Vec;
use rand::Rng as _;

use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s2: Vec<f64>,
    pub done: bool,
}

/// A sampled minibatch in row-major, structure-of-arrays form.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub len: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub obs: Vec<f64>,
    pub act: Vec<f64>,
    pub rew: Vec<f64>,
    pub obs2: Vec<f64>,
    /// 1.0 for terminal transitions, 0.0 otherwise.
    pub done: Vec<f64>,
}

impl Batch {
    pub fn from_transitions(items: &[Transition]) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::InvalidConfig("empty batch".into()))?;
        let mut batch = Self {
            len: 0,
            obs_dim: first.s.len(),
            act_dim: first.a.len(),
            ..Self::default()
        };
        for t in items {
            if t.s.len() != batch.obs_dim || t.s2.len() != batch.obs_dim || t.a.len() != batch.act_dim {
                return Err(Error::DimensionMismatch {
                    expected: batch.obs_dim,
                    got: t.s.len(),
                });
            }
            batch.obs.extend_from_slice(&t.s);
            batch.act.extend_from_slice(&t.a);
            batch.rew.push(t.r);
            batch.obs2.extend_from_slice(&t.s2);
            batch.done.push(if t.done { 1.0 } else { 0.0 });
            batch.len += 1;
        }
        Ok(batch)
    }

    fn clear(&mut self, obs_dim: usize, act_dim: usize) {
        self.len = 0;
        self.obs_dim = obs_dim;
        self.act_dim = act_dim;
        self.obs.clear();
        self.act.clear();
        self.rew.clear();
        self.obs2.clear();
        self.done.clear();
    }
}

/// Fixed-capacity ring of transitions; the oldest entry is overwritten
/// once full.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    obs: Vec<f64>,
    act: Vec<f64>,
    rew: Vec<f64>,
    obs2: Vec<f64>,
    done: Vec<bool>,
    next: usize,
    count: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Result<Self> {
        if capacity == 0 || obs_dim == 0 || act_dim == 0 {
            return Err(Error::InvalidConfig(
                "replay buffer capacity and dimensions must be positive".into(),
            ));
        }
        Ok(Self {
            capacity,
            obs_dim,
            act_dim,
            obs: Vec::new(),
            act: Vec::new(),
            rew: Vec::new(),
            obs2: Vec::new(),
            done: Vec::new(),
            next: 0,
            count: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn push(&mut self, t: &Transition) -> Result<()> {
        self.push_parts(&t.s, &t.a, t.r, &t.s2, t.done)
    }

    pub fn push_parts(&mut self, s: &[f64], a: &[f64], r: f64, s2: &[f64], done: bool) -> Result<()> {
        for (got, expected) in [
            (s.len(), self.obs_dim),
            (a.len(), self.act_dim),
            (s2.len(), self.obs_dim),
        ] {
            if got != expected {
                return Err(Error::DimensionMismatch { expected, got });
            }
        }
        let finite = s.iter().chain(a).chain(s2).all(|v| v.is_finite()) && r.is_finite();
        if !finite {
            return Err(Error::NonFinite("transition"));
        }
        let i = self.next;
        if self.count < self.capacity {
            self.obs.extend_from_slice(s);
            self.act.extend_from_slice(a);
            self.rew.push(r);
            self.obs2.extend_from_slice(s2);
            self.done.push(done);
            self.count += 1;
        } else {
            let (o, d) = (self.obs_dim, self.act_dim);
            self.obs[i * o..(i + 1) * o].copy_from_slice(s);
            self.act[i * d..(i + 1) * d].copy_from_slice(a);
            self.rew[i] = r;
            self.obs2[i * o..(i + 1) * o].copy_from_slice(s2);
            self.done[i] = done;
        }
        self.next = (i + 1) % self.capacity;
        Ok(())
    }

    pub fn get(&self, i: usize) -> Option<Transition> {
        if i >= self.count {
            return None;
        }
        let (o, d) = (self.obs_dim, self.act_dim);
        Some(Transition {
            s: self.obs[i * o..(i + 1) * o].to_vec(),
            a: self.act[i * d..(i + 1) * d].to_vec(),
            r: self.rew[i],
            s2: self.obs2[i * o..(i + 1) * o].to_vec(),
            done: self.done[i],
        })
    }

    /// Distinct storage slots chosen uniformly (Floyd's algorithm).
    pub fn sample_indices(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<usize>> {
        if batch_size == 0 || self.count < batch_size {
            return Err(Error::BufferUnderfull {
                count: self.count,
                requested: batch_size,
            });
        }
        let n = self.count;
        let mut picked: Vec<usize> = Vec::with_capacity(batch_size);
        for j in (n - batch_size)..n {
            let t = rng.gen_range(0..=j);
            if picked.contains(&t) {
                picked.push(j);
            } else {
                picked.push(t);
            }
        }
        Ok(picked)
    }

    pub fn sample(&self, batch_size: usize, rng: &mut Rng) -> Result<Vec<Transition>> {
        let idx = self.sample_indices(batch_size, rng)?;
        Ok(idx.into_iter().filter_map(|i| self.get(i)).collect())
    }

    pub fn sample_into(&self, batch_size: usize, rng: &mut Rng, out: &mut Batch) -> Result<()> {
        let idx = self.sample_indices(batch_size, rng)?;
        let (o, d) = (self.obs_dim, self.act_dim);
        out.clear(o, d);
        for i in idx {
            out.obs.extend_from_slice(&self.obs[i * o..(i + 1) * o]);
            out.act.extend_from_slice(&self.act[i * d..(i + 1) * d]);
            out.rew.push(self.rew[i]);
            out.obs2.extend_from_slice(&self.obs2[i * o..(i + 1) * o]);
            out.done.push(if self.done[i] { 1.0 } else { 0.0 });
        }
        out.len = batch_size;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use alloc::vec;

    fn tr(x: f64) -> Transition {
        Transition {
            s: vec![x],
            a: vec![-x],
            r: x * 0.5,
            s2: vec![x + 1.0],
            done: false,
        }
    }

    #[test]
    fn push_counts() {
        let mut b = ReplayBuffer::new(10, 1, 1).unwrap();
        assert!(b.is_empty());
        b.push(&tr(1.0)).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.get(0).unwrap(), tr(1.0));
    }

    #[test]
    fn oldest_is_overwritten() {
        let mut b = ReplayBuffer::new(2, 1, 1).unwrap();
        for x in [1.0, 2.0, 3.0] {
            b.push(&tr(x)).unwrap();
        }
        assert_eq!(b.len(), 2);
        let stored: Vec<f64> = (0..2).map(|i| b.get(i).unwrap().s[0]).collect();
        assert!(!stored.contains(&1.0));
        assert!(stored.contains(&2.0) && stored.contains(&3.0));
    }

    #[test]
    fn underfull_sample_errors() {
        let mut b = ReplayBuffer::new(8, 1, 1).unwrap();
        b.push(&tr(1.0)).unwrap();
        let mut r = rng::seeded(0);
        assert_eq!(
            b.sample(2, &mut r).unwrap_err(),
            Error::BufferUnderfull { count: 1, requested: 2 }
        );
    }

    #[test]
    fn full_batch_is_a_permutation() {
        let mut b = ReplayBuffer::new(16, 1, 1).unwrap();
        for k in 0..7 {
            b.push(&tr(k as f64)).unwrap();
        }
        let mut r = rng::seeded(3);
        let mut seen: Vec<usize> = b.sample(7, &mut r).unwrap().iter().map(|t| t.s[0] as usize).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..7).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_seeded() {
        let mut b = ReplayBuffer::new(100, 1, 1).unwrap();
        for k in 0..100 {
            b.push(&tr(k as f64)).unwrap();
        }
        let a = b.sample(32, &mut rng::seeded(9)).unwrap();
        let c = b.sample(32, &mut rng::seeded(9)).unwrap();
        assert_eq!(a, c);
        let mut batch = Batch::default();
        b.sample_into(32, &mut rng::seeded(9), &mut batch).unwrap();
        assert_eq!(batch, Batch::from_transitions(&a).unwrap());
    }

    #[test]
    fn within_batch_without_replacement() {
        let mut b = ReplayBuffer::new(50, 1, 1).unwrap();
        for k in 0..50 {
            b.push(&tr(k as f64)).unwrap();
        }
        let mut r = rng::seeded(1);
        for _ in 0..200 {
            let mut idx = b.sample_indices(20, &mut r).unwrap();
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 20);
        }
    }

    #[test]
    fn item_frequencies_are_uniform() {
        // Chi-square over 10 slots with 9 degrees of freedom: mean 9,
        // standard deviation sqrt(18); accept within 3 sigma.
        let slots = 10;
        let mut b = ReplayBuffer::new(slots, 1, 1).unwrap();
        for k in 0..slots {
            b.push(&tr(k as f64)).unwrap();
        }
        let mut r = rng::seeded(2024);
        let mut counts = vec![0u64; slots];
        let draws = 100_000;
        let per_draw = 3;
        for _ in 0..draws {
            for i in b.sample_indices(per_draw, &mut r).unwrap() {
                counts[i] += 1;
            }
        }
        let expected = (draws * per_draw) as f64 / slots as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        let dof = (slots - 1) as f64;
        assert!(chi2 < dof + 3.0 * (2.0 * dof).sqrt(), "chi2 = {chi2}");
    }

    #[test]
    fn rejects_malformed_transitions() {
        let mut b = ReplayBuffer::new(4, 2, 1).unwrap();
        assert!(matches!(b.push(&tr(0.0)), Err(Error::DimensionMismatch { .. })));
        let bad = Transition {
            s: vec![0.0, f64::INFINITY],
            a: vec![0.0],
            r: 0.0,
            s2: vec![0.0, 0.0],
            done: false,
        };
        assert_eq!(b.push(&bad), Err(Error::NonFinite("transition")));
    }
}
