//! FQ-CoDel: hashed per-flow sub-queues served by deficit round robin over a
//! new-flows list and an old-flows list, with CoDel running per sub-queue.

use std::collections::VecDeque;

use super::codel::Backlog;
use super::params::validate;
use super::{
    AqmError, AqmParams, CodelState, DisciplineKind, Enqueued, Fifo, QueueDiscipline, QueueStats,
    Verdict,
};
use crate::simnet::rng::{fnv1a64, splitmix64};
use crate::simnet::{FlowId, Packet, SimTime};

pub const FQ_SUBQUEUES: usize = 1024;
pub const FQ_QUANTUM_BYTES: i64 = 1514;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum FlowList {
    New,
    Old,
}

#[derive(Default)]
struct SubQueue {
    fifo: Fifo,
    codel: CodelState,
    deficit: i64,
    list: Option<FlowList>,
}

/// One sub-queue viewed through the discipline-wide backlog counters.
struct SubQueueView<'a> {
    fifo: &'a mut Fifo,
    total_len: &'a mut usize,
    total_bytes: &'a mut u64,
}

impl Backlog for SubQueueView<'_> {
    fn pop(&mut self) -> Option<Packet> {
        let p = self.fifo.pop()?;
        *self.total_len -= 1;
        *self.total_bytes -= p.size_bytes as u64;
        Some(p)
    }

    fn backlog_bytes(&self) -> u64 {
        *self.total_bytes
    }
}

pub struct FqCodel {
    params: AqmParams,
    queues: Vec<SubQueue>,
    new_flows: VecDeque<usize>,
    old_flows: VecDeque<usize>,
    total_len: usize,
    total_bytes: u64,
    quantum: i64,
    hash_seed: u64,
    stats: QueueStats,
}

impl FqCodel {
    pub fn new(params: AqmParams, hash_seed: u64) -> Self {
        FqCodel {
            params,
            queues: (0..FQ_SUBQUEUES).map(|_| SubQueue::default()).collect(),
            new_flows: VecDeque::new(),
            old_flows: VecDeque::new(),
            total_len: 0,
            total_bytes: 0,
            quantum: FQ_QUANTUM_BYTES,
            hash_seed,
            stats: QueueStats::default(),
        }
    }

    /// Sub-queue index of a flow under this instance's hash seed.
    pub fn flow_index(&self, flow: &FlowId) -> usize {
        flow_index(flow, self.hash_seed)
    }

    pub fn subqueue_len(&self, idx: usize) -> usize {
        self.queues[idx].fifo.len()
    }

    pub fn subqueue_state(&self, idx: usize) -> &CodelState {
        &self.queues[idx].codel
    }

    pub fn deficit(&self, idx: usize) -> i64 {
        self.queues[idx].deficit
    }

    pub fn active_flows(&self) -> (usize, usize) {
        (self.new_flows.len(), self.old_flows.len())
    }

    fn check_lists(&self) {
        debug_assert!(self
            .new_flows
            .iter()
            .all(|&i| self.queues[i].list == Some(FlowList::New)));
        debug_assert!(self
            .old_flows
            .iter()
            .all(|&i| self.queues[i].list == Some(FlowList::Old)));
    }
}

pub(crate) fn flow_index(flow: &FlowId, seed: u64) -> usize {
    (splitmix64(fnv1a64(&flow.to_bytes()) ^ seed) % FQ_SUBQUEUES as u64) as usize
}

impl QueueDiscipline for FqCodel {
    fn kind(&self) -> DisciplineKind {
        DisciplineKind::FqCodel
    }

    fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Enqueued {
        self.stats.arrivals += 1;
        if self.total_len >= self.params.hard_limit {
            self.stats.dropped_overflow += 1;
            return Enqueued::Dropped(pkt);
        }
        let idx = self.flow_index(&pkt.flow);
        pkt.enqueued_at = now;
        self.total_len += 1;
        self.total_bytes += pkt.size_bytes as u64;
        let q = &mut self.queues[idx];
        q.fifo.push(pkt);
        if q.list.is_none() {
            q.list = Some(FlowList::New);
            q.deficit = self.quantum;
            self.new_flows.push_back(idx);
        }
        Enqueued::Queued
    }

    fn dequeue(&mut self, now: SimTime, dropped: &mut Vec<Packet>) -> Option<(Packet, Verdict)> {
        loop {
            let (list, idx) = if let Some(&i) = self.new_flows.front() {
                (FlowList::New, i)
            } else if let Some(&i) = self.old_flows.front() {
                (FlowList::Old, i)
            } else {
                return None;
            };
            let pop_head = |fq: &mut FqCodel| match list {
                FlowList::New => fq.new_flows.pop_front(),
                FlowList::Old => fq.old_flows.pop_front(),
            };

            if self.queues[idx].deficit <= 0 {
                self.queues[idx].deficit += self.quantum;
                pop_head(self);
                self.queues[idx].list = Some(FlowList::Old);
                self.old_flows.push_back(idx);
                continue;
            }

            let q = &mut self.queues[idx];
            let mut view = SubQueueView {
                fifo: &mut q.fifo,
                total_len: &mut self.total_len,
                total_bytes: &mut self.total_bytes,
            };
            let out = q
                .codel
                .dequeue(&mut view, &self.params, now, &mut self.stats, dropped);
            match out {
                Some((pkt, verdict)) => {
                    q.deficit -= pkt.size_bytes as i64;
                    self.check_lists();
                    return Some((pkt, verdict));
                }
                None => {
                    pop_head(self);
                    // An emptied new flow parks on the old list once so it
                    // cannot starve old flows by re-entering as new.
                    if list == FlowList::New && !self.old_flows.is_empty() {
                        self.queues[idx].list = Some(FlowList::Old);
                        self.old_flows.push_back(idx);
                    } else {
                        self.queues[idx].list = None;
                    }
                }
            }
        }
    }

    fn set_params(&mut self, target: SimTime, interval: SimTime) -> Result<(), AqmError> {
        validate(target, interval)?;
        self.params.target = target;
        self.params.interval = interval;
        Ok(())
    }

    fn params(&self) -> AqmParams {
        self.params
    }

    fn len(&self) -> usize {
        self.total_len
    }

    fn stats(&self) -> &QueueStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::rng::seeded_rng;
    use crate::simnet::{Ecn, TcpFlags};
    use rand::Rng;

    fn pkt(flow: FlowId, size: u32) -> Packet {
        Packet::tcp(flow, size, Ecn::Ect0, TcpFlags::ACK, SimTime::ZERO)
    }

    fn flow(n: u32) -> FlowId {
        FlowId::tcp(n, 1000 + n as u16, 100 + n, 80)
    }

    #[test]
    fn distinct_flows_spread_over_subqueues() {
        let mut rng = seeded_rng(3);
        let fq = FqCodel::new(AqmParams::default(), 77);
        let mut hits = vec![0u32; FQ_SUBQUEUES];
        for _ in 0..1000 {
            let f = FlowId::tcp(rng.random(), rng.random(), rng.random(), rng.random());
            let idx = fq.flow_index(&f);
            assert!(idx < FQ_SUBQUEUES);
            assert_eq!(idx, fq.flow_index(&f));
            hits[idx] += 1;
        }
        // 1000 balls in 1024 bins: expect ~620 occupied bins, never a pile-up
        let occupied = hits.iter().filter(|&&h| h > 0).count();
        assert!(occupied > 550, "occupied {occupied}");
        assert!(*hits.iter().max().unwrap() < 8);
    }

    #[test]
    fn fresh_flow_joins_new_list_with_full_quantum() {
        let mut fq = FqCodel::new(AqmParams::default(), 1);
        fq.enqueue(pkt(flow(1), 1500), SimTime::ZERO);
        let idx = fq.flow_index(&flow(1));
        assert_eq!(fq.active_flows(), (1, 0));
        assert_eq!(fq.deficit(idx), FQ_QUANTUM_BYTES);
        fq.enqueue(pkt(flow(1), 1500), SimTime::ZERO);
        assert_eq!(fq.active_flows(), (1, 0));
    }

    #[test]
    fn new_flows_are_served_before_old_flows() {
        let mut fq = FqCodel::new(AqmParams::default(), 1);
        let mut dropped = Vec::new();
        for _ in 0..10 {
            fq.enqueue(pkt(flow(1), 1500), SimTime::ZERO);
        }
        // burn flow 1's first quantum so it moves to the old list
        fq.dequeue(SimTime::ZERO, &mut dropped);
        fq.dequeue(SimTime::ZERO, &mut dropped);
        fq.enqueue(pkt(flow(2), 64), SimTime::ZERO);
        let (p, _) = fq.dequeue(SimTime::ZERO, &mut dropped).unwrap();
        assert_eq!(p.flow, flow(2));
    }

    #[test]
    fn drr_shares_bytes_fairly() {
        let mut fq = FqCodel::new(AqmParams::default(), 5);
        let mut dropped = Vec::new();
        let flows: Vec<FlowId> = (0..4).map(flow).collect();
        let idx: std::collections::HashSet<usize> = flows.iter().map(|f| fq.flow_index(f)).collect();
        assert_eq!(idx.len(), 4, "test flows collide under this seed");
        let mut served = [0u64; 4];
        let mut now = SimTime::ZERO;
        for round in 0..2000u64 {
            // keep every flow backlogged; flow 3 sends small packets
            for (i, f) in flows.iter().enumerate() {
                while fq.queues[fq.flow_index(f)].fifo.len() < 3 {
                    fq.enqueue(pkt(*f, if i == 3 { 300 } else { 1500 }), now);
                }
            }
            now = SimTime::from_micros(round);
            let (p, _) = fq.dequeue(now, &mut dropped).unwrap();
            let i = flows.iter().position(|f| *f == p.flow).unwrap();
            served[i] += p.size_bytes as u64;
        }
        let max = *served.iter().max().unwrap() as i64;
        let min = *served.iter().min().unwrap() as i64;
        assert!(max - min <= 2 * FQ_QUANTUM_BYTES, "served {served:?}");
    }

    #[test]
    fn overflow_counts_across_all_subqueues() {
        let params = AqmParams {
            hard_limit: 10,
            ..AqmParams::default()
        };
        let mut fq = FqCodel::new(params, 9);
        for n in 0..10 {
            assert_eq!(fq.enqueue(pkt(flow(n), 1500), SimTime::ZERO), Enqueued::Queued);
        }
        assert!(matches!(fq.enqueue(pkt(flow(99), 1500), SimTime::ZERO), Enqueued::Dropped(_)));
        assert_eq!(fq.stats().dropped_overflow, 1);
        assert_eq!(fq.stats().marked, 0);
        assert!(fq.stats().balances(fq.len()));
    }

    #[test]
    fn queues_empty_out_and_leave_lists() {
        let mut fq = FqCodel::new(AqmParams::default(), 2);
        let mut dropped = Vec::new();
        for n in 0..5 {
            fq.enqueue(pkt(flow(n), 1500), SimTime::ZERO);
        }
        let mut got = 0;
        while fq.dequeue(SimTime::from_millis(1), &mut dropped).is_some() {
            got += 1;
        }
        assert_eq!(got, 5);
        assert_eq!(fq.len(), 0);
        assert_eq!(fq.active_flows(), (0, 0));
        assert!(fq.stats().balances(0));
    }

    #[test]
    fn standing_queue_in_one_flow_gets_marked() {
        let mut fq = FqCodel::new(AqmParams::default(), 4);
        let mut dropped = Vec::new();
        let f = flow(1);
        for t in 0..1000u64 {
            fq.enqueue(pkt(f, 1500), SimTime::from_millis(t));
            if t >= 10 {
                fq.dequeue(SimTime::from_millis(t), &mut dropped);
            }
        }
        assert!(fq.stats().marked > 0);
        assert_eq!(fq.stats().dropped_aqm, 0);
        assert!(fq.subqueue_state(fq.flow_index(&f)).count > 0);
    }
}
