//! CoDel: sojourn-time AQM with inverse-square-root action spacing.

use super::params::validate;
use super::{AqmError, AqmParams, DisciplineKind, Enqueued, Fifo, QueueDiscipline, QueueStats, Verdict};
use crate::simnet::{Packet, SimTime};

/// Below this many queued bytes the control law never acts (one MTU).
pub(crate) const MAX_PACKET_BYTES: u64 = 1514;

/// Packet source the control law pulls from. `backlog_bytes` is what remains
/// after the pop.
pub(crate) trait Backlog {
    fn pop(&mut self) -> Option<Packet>;
    fn backlog_bytes(&self) -> u64;
}

impl Backlog for Fifo {
    fn pop(&mut self) -> Option<Packet> {
        Fifo::pop(self)
    }

    fn backlog_bytes(&self) -> u64 {
        self.bytes
    }
}

/// `t + interval / sqrt(count)`, rounded half-up to whole nanoseconds.
pub fn control_law(t: SimTime, interval: SimTime, count: u32) -> SimTime {
    let count = count.max(1) as f64;
    t + SimTime::from_nanos_f64(interval.as_nanos() as f64 / count.sqrt())
}

/// Control-law state of one CoDel queue.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CodelState {
    /// When set: the time at which sojourn will have stayed above target for
    /// a full interval.
    pub first_above_time: Option<SimTime>,
    pub drop_next: SimTime,
    /// Actions taken in the current dropping phase.
    pub count: u32,
    pub last_count: u32,
    pub dropping: bool,
}

impl CodelState {
    fn do_dequeue<B: Backlog>(
        &mut self,
        src: &mut B,
        params: &AqmParams,
        now: SimTime,
    ) -> (Option<Packet>, bool) {
        let Some(pkt) = src.pop() else {
            self.first_above_time = None;
            return (None, false);
        };
        let sojourn = now - pkt.enqueued_at;
        if sojourn < params.target || src.backlog_bytes() <= MAX_PACKET_BYTES {
            self.first_above_time = None;
            return (Some(pkt), false);
        }
        match self.first_above_time {
            None => {
                self.first_above_time = Some(now + params.interval);
                (Some(pkt), false)
            }
            Some(t) => (Some(pkt), now >= t),
        }
    }

    /// One CoDel dequeue. A control-law action CE-marks an ECT packet when ECN
    /// is enabled and drops it otherwise.
    pub(crate) fn dequeue<B: Backlog>(
        &mut self,
        src: &mut B,
        params: &AqmParams,
        now: SimTime,
        stats: &mut QueueStats,
        dropped: &mut Vec<Packet>,
    ) -> Option<(Packet, Verdict)> {
        let (pkt, ok_to_drop) = self.do_dequeue(src, params, now);
        let Some(mut pkt) = pkt else {
            self.dropping = false;
            return None;
        };

        if self.dropping {
            if !ok_to_drop {
                self.dropping = false;
            }
            while self.dropping && now >= self.drop_next {
                self.count += 1;
                if params.ecn_enabled && pkt.mark_ce() {
                    self.drop_next = control_law(self.drop_next, params.interval, self.count);
                    stats.marked += 1;
                    return Some((pkt, Verdict::MarkedCe));
                }
                stats.dropped_aqm += 1;
                dropped.push(pkt);
                let (next, ok) = self.do_dequeue(src, params, now);
                let Some(next) = next else {
                    self.dropping = false;
                    return None;
                };
                pkt = next;
                if ok {
                    self.drop_next = control_law(self.drop_next, params.interval, self.count);
                } else {
                    self.dropping = false;
                }
            }
            stats.forwarded += 1;
            return Some((pkt, Verdict::Forward));
        }

        if !ok_to_drop {
            stats.forwarded += 1;
            return Some((pkt, Verdict::Forward));
        }

        // Enter the dropping state.
        let out = if params.ecn_enabled && pkt.mark_ce() {
            stats.marked += 1;
            Some((pkt, Verdict::MarkedCe))
        } else {
            stats.dropped_aqm += 1;
            dropped.push(pkt);
            let (next, _) = self.do_dequeue(src, params, now);
            next.map(|p| {
                stats.forwarded += 1;
                (p, Verdict::Forward)
            })
        };
        self.dropping = true;
        // Re-entering soon after the last phase resumes near the old rate.
        let recently = now < self.drop_next + params.interval.saturating_mul(16);
        self.count = if self.count > 2 && recently {
            self.count - 2
        } else {
            1
        };
        self.last_count = self.count;
        self.drop_next = control_law(now, params.interval, self.count);
        out
    }
}

/// Single-queue CoDel.
pub struct Codel {
    params: AqmParams,
    queue: Fifo,
    state: CodelState,
    stats: QueueStats,
}

impl Codel {
    pub fn new(params: AqmParams) -> Self {
        Codel {
            params,
            queue: Fifo::default(),
            state: CodelState::default(),
            stats: QueueStats::default(),
        }
    }

    pub fn state(&self) -> &CodelState {
        &self.state
    }
}

impl QueueDiscipline for Codel {
    fn kind(&self) -> DisciplineKind {
        DisciplineKind::Codel
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

    fn dequeue(&mut self, now: SimTime, dropped: &mut Vec<Packet>) -> Option<(Packet, Verdict)> {
        self.state
            .dequeue(&mut self.queue, &self.params, now, &mut self.stats, dropped)
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

    fn data(ecn: Ecn) -> Packet {
        Packet::tcp(FlowId::tcp(1, 1, 2, 2), 1500, ecn, TcpFlags::ACK, SimTime::ZERO)
    }

    fn ms(x: u64) -> SimTime {
        SimTime::from_millis(x)
    }

    /// Enqueue one packet per ms and dequeue each exactly `sojourn` later.
    /// Returns (dequeue time, verdict, count after, drop_next after) per action.
    fn constant_sojourn_trace(
        ecn: Ecn,
        ecn_enabled: bool,
        sojourn_ms: u64,
        until_ms: u64,
    ) -> (Codel, Vec<(SimTime, Verdict, u32, SimTime)>) {
        let mut q = Codel::new(AqmParams {
            ecn_enabled,
            ..AqmParams::default()
        });
        let mut actions = Vec::new();
        let mut dropped = Vec::new();
        for t in 0..until_ms {
            q.enqueue(data(ecn), ms(t));
            if t >= sojourn_ms {
                let before = q.stats().dropped_aqm;
                if let Some((_, v)) = q.dequeue(ms(t), &mut dropped) {
                    if v == Verdict::MarkedCe || q.stats().dropped_aqm > before {
                        actions.push((ms(t), v, q.state().count, q.state().drop_next));
                    }
                }
            }
        }
        (q, actions)
    }

    #[test]
    fn first_action_after_one_interval_above_target() {
        let (_, actions) = constant_sojourn_trace(Ecn::Ect0, true, 8, 300);
        // first dequeue at 8 ms sees 8 ms sojourn; action due at 8 + 100 ms
        let (t, v, count, next) = actions[0];
        assert_eq!(t, ms(108));
        assert_eq!(v, Verdict::MarkedCe);
        assert_eq!(count, 1);
        assert_eq!(next, ms(208));
    }

    #[test]
    fn drop_next_spacing_is_inverse_sqrt_count() {
        let (_, actions) = constant_sojourn_trace(Ecn::Ect0, true, 8, 600);
        assert!(actions.len() >= 5);
        for w in actions.windows(2) {
            let (_, _, count, prev_next) = w[0];
            let (_, _, count2, next) = w[1];
            assert_eq!(count2, count + 1);
            let expect = control_law(prev_next, ms(100), count2);
            assert_eq!(next, expect);
        }
        // the action that brings count to 4 schedules the next one 50 ms out
        let four = actions.iter().position(|a| a.2 == 4).unwrap();
        assert_eq!(actions[four - 1].3 - actions[four - 2].3, SimTime::from_nanos(57_735_027));
        assert_eq!(actions[four].3 - actions[four - 1].3, ms(50));
    }

    #[test]
    fn below_target_never_acts_and_leaves_dropping() {
        let (q, actions) = constant_sojourn_trace(Ecn::Ect0, true, 2, 500);
        assert!(actions.is_empty());
        assert!(!q.state().dropping);
        assert_eq!(q.stats().marked + q.stats().dropped_aqm, 0);
    }

    #[test]
    fn sojourn_dropping_below_target_exits_dropping_state() {
        let mut q = Codel::new(AqmParams::default());
        let mut dropped = Vec::new();
        for t in 0..200 {
            q.enqueue(data(Ecn::Ect0), ms(t));
            if t >= 8 {
                q.dequeue(ms(t), &mut dropped);
            }
        }
        assert!(q.state().dropping);
        // drain the backlog, then serve fresh packets with 2 ms sojourn
        while q.len() > 0 {
            q.dequeue(ms(200), &mut dropped);
        }
        for t in 300..310 {
            q.enqueue(data(Ecn::Ect0), ms(t));
            q.enqueue(data(Ecn::Ect0), ms(t));
            q.dequeue(ms(t + 2), &mut dropped);
        }
        assert!(!q.state().dropping);
    }

    #[test]
    fn ect_packets_are_marked_not_dropped() {
        let (q, actions) = constant_sojourn_trace(Ecn::Ect0, true, 8, 1000);
        assert!(!actions.is_empty());
        assert!(actions.iter().all(|a| a.1 == Verdict::MarkedCe));
        assert_eq!(q.stats().dropped_aqm, 0);
        assert_eq!(q.stats().marked as usize, actions.len());
    }

    #[test]
    fn not_ect_packets_are_dropped() {
        let (q, _) = constant_sojourn_trace(Ecn::NotEct, true, 8, 1000);
        assert!(q.stats().dropped_aqm > 0);
        assert_eq!(q.stats().marked, 0);
        assert!(q.stats().balances(q.len()));
    }

    #[test]
    fn ecn_disabled_drops_ect_packets() {
        let (q, _) = constant_sojourn_trace(Ecn::Ect0, false, 8, 1000);
        assert!(q.stats().dropped_aqm > 0);
        assert_eq!(q.stats().marked, 0);
    }

    #[test]
    fn overflow_drops_even_ect() {
        let mut q = Codel::new(AqmParams::default());
        for _ in 0..1000 {
            assert_eq!(q.enqueue(data(Ecn::Ect0), SimTime::ZERO), Enqueued::Queued);
        }
        match q.enqueue(data(Ecn::Ect0), SimTime::ZERO) {
            Enqueued::Dropped(p) => assert_eq!(p.ecn(), Ecn::Ect0),
            other => panic!("expected overflow drop, got {other:?}"),
        }
        assert_eq!(q.stats().dropped_overflow, 1);
        assert_eq!(q.occupancy(), 100.0);
    }

    #[test]
    fn set_params_keeps_state_and_validates() {
        let (mut q, _) = constant_sojourn_trace(Ecn::Ect0, true, 8, 400);
        let before = q.state().clone();
        let len = q.len();
        q.set_params(SimTime::from_micros(50), ms(1)).unwrap();
        assert_eq!(q.state(), &before);
        assert_eq!(q.len(), len);
        assert_eq!(q.params().target, SimTime::from_micros(50));
        q.set_params(ms(5), ms(100)).unwrap();
        assert_eq!(q.params(), AqmParams::default());
        assert!(q.set_params(ms(5), ms(4)).is_err());
        assert_eq!(q.params(), AqmParams::default());
    }

    #[test]
    fn quick_reentry_reuses_count() {
        let mut s = CodelState {
            count: 6,
            drop_next: ms(1000),
            ..CodelState::default()
        };
        let params = AqmParams::default();
        let mut fifo = Fifo::default();
        for _ in 0..10 {
            let mut p = data(Ecn::Ect0);
            p.enqueued_at = ms(0);
            fifo.push(p);
        }
        let mut stats = QueueStats::default();
        let mut dropped = Vec::new();
        s.first_above_time = Some(ms(900));
        s.dequeue(&mut fifo, &params, ms(1010), &mut stats, &mut dropped);
        assert!(s.dropping);
        assert_eq!(s.count, 4);
        assert_eq!(s.drop_next, ms(1060));
    }
}
