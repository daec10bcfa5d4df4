use alloc::collections::{BTreeMap, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::tensor::Tensor;

/// Per-scene bounded FIFO of compressed memory features.
///
/// Entries are stored without gradient records. Each entry has shape
/// `[C/2, h, w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStore {
    max_len: usize,
    entries: BTreeMap<String, VecDeque<Tensor>>,
    reads: usize,
}

impl MemoryStore {
    pub fn new(max_len: usize) -> Self {
        Self { max_len: max_len.max(1), entries: BTreeMap::new(), reads: 0 }
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    /// Queue of a scene, oldest first.
    pub fn queue(&self, scene: &str) -> Option<&VecDeque<Tensor>> {
        self.entries.get(scene)
    }

    pub fn queue_mut(&mut self, scene: &str) -> Option<&mut VecDeque<Tensor>> {
        self.entries.get_mut(scene)
    }

    pub fn len_of(&self, scene: &str) -> usize {
        self.entries.get(scene).map_or(0, VecDeque::len)
    }

    pub fn num_scenes(&self) -> usize {
        self.entries.len()
    }

    pub fn scene_ids(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    /// Appends a detached copy, evicting the oldest entry at capacity.
    pub fn push(&mut self, scene: &str, entry: &Tensor) {
        let q = self.entries.entry(scene.into()).or_default();
        if q.len() == self.max_len {
            q.pop_front();
        }
        q.push_back(entry.detached());
    }

    pub fn remove(&mut self, scene: &str) -> Option<VecDeque<Tensor>> {
        self.entries.remove(scene)
    }

    /// Drops every queue (the read counter is kept).
    pub fn clear(&mut self) {
        self.entries.clear();
    }

    /// Number of stored entries consumed by attention so far.
    pub fn reads(&self) -> usize {
        self.reads
    }

    pub(crate) fn record_reads(&mut self, n: usize) {
        self.reads += n;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_eviction() {
        let mut s = MemoryStore::new(2);
        for i in 0..5 {
            s.push("a", &Tensor::scalar(i as f64));
        }
        let q: Vec<f64> = s.queue("a").unwrap().iter().map(Tensor::item).collect();
        assert_eq!(q, alloc::vec![3.0, 4.0]);
        assert_eq!(s.len_of("b"), 0);
    }

    #[test]
    fn entries_are_detached() {
        let mut s = MemoryStore::new(1);
        s.push("a", &Tensor::scalar(1.0).with_requires_grad(true));
        assert!(!s.queue("a").unwrap()[0].requires_grad());
    }
}
