//! Store-and-forward link model with one FIFO byte queue per direction.

use crate::topology::Link;

/// Time for `size_bytes` to cross `link` when `queued_bytes` are ahead of it
/// in the same direction.
pub fn link_transfer_time(size_bytes: u64, link: &Link, queued_bytes: u64) -> f64 {
    link.prop_delay_s + (queued_bytes + size_bytes) as f64 * 8.0 / link.bandwidth_bps
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DirQueue {
    pub queued_bytes: u64,
    pub enqueued_bytes: u64,
    pub dequeued_bytes: u64,
}

/// Byte occupancy of every directed link, indexed by
/// [`Topology::directed_index`](crate::topology::Topology::directed_index).
#[derive(Debug, Clone)]
pub struct LinkQueues {
    queues: Vec<DirQueue>,
}

impl LinkQueues {
    pub fn new(directed_count: usize) -> Self {
        Self {
            queues: vec![DirQueue::default(); directed_count],
        }
    }

    pub fn queued(&self, dir: usize) -> u64 {
        self.queues[dir].queued_bytes
    }

    pub fn get(&self, dir: usize) -> &DirQueue {
        &self.queues[dir]
    }

    pub fn enqueue(&mut self, dir: usize, bytes: u64) {
        let q = &mut self.queues[dir];
        q.queued_bytes += bytes;
        q.enqueued_bytes += bytes;
    }

    pub fn dequeue(&mut self, dir: usize, bytes: u64) {
        let q = &mut self.queues[dir];
        debug_assert!(q.queued_bytes >= bytes, "link queue underflow");
        q.queued_bytes -= bytes;
        q.dequeued_bytes += bytes;
    }

    pub fn iter(&self) -> impl Iterator<Item = &DirQueue> {
        self.queues.iter()
    }
}
