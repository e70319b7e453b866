use std::collections::VecDeque;

/// Which one-sided limit to take at a jump in the recorded signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Ring buffer of `(t, value)` pairs recorded at accepted steps, queried
/// with linear interpolation. A jump is stored as two entries with the same
/// time; `Side` picks the limit when querying exactly at the jump.
#[derive(Clone, Debug)]
pub struct DelayHistory {
    delay: f64,
    start: f64,
    entries: VecDeque<(f64, f64)>,
}

impl DelayHistory {
    /// History for a transport delay of `delay` seconds. The signal is 0
    /// before `start`.
    pub fn new(delay: f64, start: f64) -> Self {
        Self {
            delay,
            start,
            entries: VecDeque::new(),
        }
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends a sample. Times must be non-decreasing.
    pub fn push(&mut self, t: f64, value: f64) {
        debug_assert!(self.entries.back().is_none_or(|&(tb, _)| tb <= t));
        self.entries.push_back((t, value));
    }

    /// Drops entries no query at or after `now - delay` can reach.
    pub fn prune(&mut self, now: f64) {
        let horizon = now - self.delay;
        while self.entries.len() > 2 && self.entries[1].0 < horizon {
            self.entries.pop_front();
        }
    }

    /// Signal value at time `q`.
    pub fn value_at(&self, q: f64, side: Side) -> f64 {
        if q < self.start || self.entries.is_empty() {
            return 0.0;
        }
        let j = match side {
            Side::Left => self.entries.partition_point(|e| e.0 < q),
            Side::Right => self.entries.partition_point(|e| e.0 <= q),
        };
        if j == 0 {
            return self.entries[0].1;
        }
        if j == self.entries.len() {
            return self.entries[j - 1].1;
        }
        let (ta, va) = self.entries[j - 1];
        let (tb, vb) = self.entries[j];
        if tb == ta {
            return vb;
        }
        va + (q - ta) / (tb - ta) * (vb - va)
    }

    /// Value `delay` seconds before `t`.
    pub fn delayed(&self, t: f64, side: Side) -> f64 {
        self.value_at(t - self.delay, side)
    }
}
