use super::{AqmError, AqmParams, DisciplineKind, Enqueued, Fifo, QueueDiscipline, QueueStats, Verdict};
use crate::simnet::{Packet, SimTime};

/// Plain FIFO that only ever drops on overflow.
pub struct TailDrop {
    params: AqmParams,
    queue: Fifo,
    stats: QueueStats,
}

impl TailDrop {
    pub fn new(hard_limit: usize) -> Self {
        TailDrop {
            params: AqmParams {
                hard_limit,
                ecn_enabled: false,
                ..AqmParams::default()
            },
            queue: Fifo::default(),
            stats: QueueStats::default(),
        }
    }
}

impl QueueDiscipline for TailDrop {
    fn kind(&self) -> DisciplineKind {
        DisciplineKind::TailDrop
    }

    fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Enqueued {
        self.stats.arrivals += 1;
        if self.queue.len() >= self.params.hard_limit {
            self.stats.dropped_overflow += 1;
            return Enqueued::Dropped(pkt);
        }
        pkt.enqueued_at = now;
        self.queue.push(pkt);
        Enqueued::Queued
    }

    fn dequeue(&mut self, _now: SimTime, _dropped: &mut Vec<Packet>) -> Option<(Packet, Verdict)> {
        let p = self.queue.pop()?;
        self.stats.forwarded += 1;
        Some((p, Verdict::Forward))
    }

    fn set_params(&mut self, _target: SimTime, _interval: SimTime) -> Result<(), AqmError> {
        Err(AqmError::Unsupported("taildrop"))
    }

    fn params(&self) -> AqmParams {
        self.params
    }

    fn len(&self) -> usize {
        self.queue.len()
    }

    fn stats(&self) -> &QueueStats {
        &self.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::{Ecn, FlowId, TcpFlags};

    #[test]
    fn fifo_order_and_overflow() {
        let mut q = TailDrop::new(2);
        let mut dropped = Vec::new();
        for seq in 0..3 {
            let mut p = Packet::tcp(FlowId::tcp(0, 0, 1, 1), 1500, Ecn::Ect0, TcpFlags::ACK, SimTime::ZERO);
            p.seq = seq;
            let r = q.enqueue(p, SimTime::ZERO);
            assert_eq!(matches!(r, Enqueued::Queued), seq < 2);
        }
        assert_eq!(q.dequeue(SimTime::ZERO, &mut dropped).unwrap().0.seq, 0);
        assert_eq!(q.dequeue(SimTime::ZERO, &mut dropped).unwrap().0.seq, 1);
        assert!(q.dequeue(SimTime::ZERO, &mut dropped).is_none());
        assert_eq!(q.stats().marked, 0);
        assert!(q.stats().balances(0));
        assert!(q.set_params(SimTime::from_millis(1), SimTime::from_millis(2)).is_err());
    }
}
