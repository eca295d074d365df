use std::collections::VecDeque;

/// Bounded FIFO of paired vectors; pushing onto a full window evicts the
/// oldest pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingWindow {
    capacity: usize,
    xs: VecDeque<Vec<f64>>,
    ys: VecDeque<Vec<f64>>,
}

impl SlidingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "window capacity must be positive");
        Self {
            capacity,
            xs: VecDeque::with_capacity(capacity),
            ys: VecDeque::with_capacity(capacity),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.xs.len() == self.capacity
    }

    /// Appends a pair and returns the evicted one, if any.
    pub fn push(&mut self, x: Vec<f64>, y: Vec<f64>) -> Option<(Vec<f64>, Vec<f64>)> {
        let evicted = if self.is_full() {
            Some((
                self.xs.pop_front().expect("full window"),
                self.ys.pop_front().expect("full window"),
            ))
        } else {
            None
        };
        self.xs.push_back(x);
        self.ys.push_back(y);
        evicted
    }

    /// Oldest-first x entries.
    pub fn xs(&mut self) -> &[Vec<f64>] {
        self.xs.make_contiguous()
    }

    /// Oldest-first y entries.
    pub fn ys(&mut self) -> &[Vec<f64>] {
        self.ys.make_contiguous()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<f64>, &Vec<f64>)> {
        self.xs.iter().zip(self.ys.iter())
    }

    /// Bytes held by the stored entries.
    pub fn bytes(&self) -> usize {
        self.iter()
            .map(|(x, y)| (x.len() + y.len()) * std::mem::size_of::<f64>())
            .sum()
    }
}
