//! Per-(node, gateway) FIFO packet queues.
//!
//! Every node keeps one queue per gateway commodity. A gateway's queue for
//! its own commodity is structurally empty: packets reaching their
//! destination are consumed before they could be enqueued.

use std::collections::VecDeque;

use crate::traffic::Packet;

#[derive(Clone, Debug)]
pub struct QueueState {
    fifos: Vec<Vec<VecDeque<Packet>>>,
}

impl QueueState {
    pub fn new(num_nodes: usize, num_gateways: usize) -> Self {
        Self {
            fifos: vec![vec![VecDeque::new(); num_gateways]; num_nodes],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.fifos.len()
    }

    pub fn num_gateways(&self) -> usize {
        self.fifos.first().map_or(0, |row| row.len())
    }

    pub fn len(&self, node_idx: usize, gw_slot: usize) -> usize {
        self.fifos[node_idx][gw_slot].len()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    /// Queue lengths for one node across all gateway slots.
    pub fn lengths(&self, node_idx: usize) -> Vec<usize> {
        self.fifos[node_idx].iter().map(VecDeque::len).collect()
    }

    /// Snapshot of every queue length, indexed `[node][gateway slot]`.
    pub fn snapshot(&self) -> Vec<Vec<u32>> {
        self.fifos
            .iter()
            .map(|row| row.iter().map(|q| q.len() as u32).collect())
            .collect()
    }

    pub fn push(&mut self, node_idx: usize, gw_slot: usize, packet: Packet) {
        self.fifos[node_idx][gw_slot].push_back(packet);
    }

    pub fn pop(&mut self, node_idx: usize, gw_slot: usize) -> Option<Packet> {
        self.fifos[node_idx][gw_slot].pop_front()
    }

    /// Oldest packet without removing it.
    pub fn front(&self, node_idx: usize, gw_slot: usize) -> Option<&Packet> {
        self.fifos[node_idx][gw_slot].front()
    }

    pub fn total(&self) -> usize {
        self.fifos
            .iter()
            .map(|row| row.iter().map(VecDeque::len).sum::<usize>())
            .sum()
    }

    /// Iterates every queued packet with its (node, gateway-slot) location.
    pub fn iter_packets(&self) -> impl Iterator<Item = (usize, usize, &Packet)> {
        self.fifos.iter().enumerate().flat_map(|(node, row)| {
            row.iter()
                .enumerate()
                .flat_map(move |(gw, q)| q.iter().map(move |p| (node, gw, p)))
        })
    }
}
