use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::time::SimTime;

struct Entry<E> {
    at: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Entry<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.at, self.seq) == (other.at, other.seq)
    }
}

impl<E> Eq for Entry<E> {}

impl<E> PartialOrd for Entry<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Entry<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.at, self.seq).cmp(&(other.at, other.seq))
    }
}

/// Priority queue of timed events with a virtual clock.
///
/// Events pop in `(time, insertion sequence)` order, so simultaneous events
/// come out in the order they were scheduled.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Entry<E>>>,
    now: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_seq: 0,
        }
    }

    /// Current virtual time: the timestamp of the last popped event.
    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Panics if `at` lies in the past.
    pub fn schedule(&mut self, at: SimTime, event: E) {
        assert!(
            at >= self.now,
            "event scheduled in the past: {at} < now {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Entry { at, seq, event }));
    }

    pub fn schedule_in(&mut self, delay: SimTime, event: E) {
        self.schedule(self.now + delay, event);
    }

    /// Returns `None` once the queue is exhausted (end of simulation).
    pub fn pop_next(&mut self) -> Option<(SimTime, E)> {
        let Reverse(entry) = self.heap.pop()?;
        debug_assert!(entry.at >= self.now);
        self.now = entry.at;
        Some((entry.at, entry.event))
    }

    /// Time of the next pending event without consuming it.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|Reverse(e)| e.at)
    }

    /// Moves the clock forward to `t` when no earlier event is pending.
    pub fn advance_to(&mut self, t: SimTime) {
        assert!(t >= self.now, "clock cannot move backwards");
        if let Some(next) = self.peek_time() {
            assert!(next >= t, "advancing past a pending event");
        }
        self.now = t;
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::rng::seeded_rng;
    use rand::Rng;

    #[test]
    fn ties_pop_in_insertion_order() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_nanos(5), "c");
        q.schedule(SimTime::from_nanos(3), "a");
        q.schedule(SimTime::from_nanos(3), "b");
        let order: Vec<_> = std::iter::from_fn(|| q.pop_next()).collect();
        assert_eq!(
            order,
            vec![
                (SimTime::from_nanos(3), "a"),
                (SimTime::from_nanos(3), "b"),
                (SimTime::from_nanos(5), "c"),
            ]
        );
    }

    #[test]
    fn empty_queue_signals_end() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert!(q.pop_next().is_none());
    }

    #[test]
    #[should_panic(expected = "in the past")]
    fn scheduling_in_the_past_panics() {
        let mut q = EventQueue::new();
        q.schedule(SimTime::from_nanos(10), ());
        q.pop_next();
        q.schedule(SimTime::from_nanos(9), ());
    }

    fn random_pop_sequence(seed: u64) -> Vec<(SimTime, u32)> {
        let mut rng = seeded_rng(seed);
        let mut q = EventQueue::new();
        for id in 0..100_000u32 {
            q.schedule(SimTime::from_nanos(rng.random_range(0..10_000)), id);
        }
        let mut out = Vec::with_capacity(100_000);
        let mut last = SimTime::ZERO;
        while let Some((t, id)) = q.pop_next() {
            assert!(t >= last);
            last = t;
            out.push((t, id));
        }
        out
    }

    #[test]
    fn random_schedule_is_reproducible_and_causal() {
        let a = random_pop_sequence(11);
        let b = random_pop_sequence(11);
        assert_eq!(a.len(), 100_000);
        assert_eq!(a, b);
        // equal timestamps keep insertion order
        for w in a.windows(2) {
            if w[0].0 == w[1].0 {
                assert!(w[0].1 < w[1].1);
            }
        }
    }
}
