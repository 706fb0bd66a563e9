use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::Micros;

/// Handle returned by [`EventQueue::schedule`], usable for cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Entry<A> {
    fire_at: Micros,
    seq: u64,
    action: A,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<A> Ord for Entry<A> {
    // BinaryHeap is a max-heap: reverse so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Simulation clock plus pending events.
///
/// Events fire in `(fire_at, seq)` order, so events scheduled for the same
/// instant run in the order they were scheduled.
pub struct EventQueue<A> {
    now: Micros,
    next_seq: u64,
    heap: BinaryHeap<Entry<A>>,
    cancelled: HashSet<u64>,
}

impl<A> Default for EventQueue<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> EventQueue<A> {
    pub fn new() -> Self {
        Self {
            now: 0,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
        }
    }

    /// Current simulated time.
    pub fn now(&self) -> Micros {
        self.now
    }

    /// Number of live (not cancelled) pending events.
    pub fn pending(&self) -> usize {
        self.heap.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, delay: Micros, action: A) -> EventHandle {
        self.schedule_at(self.now + delay, action)
    }

    /// Schedules at an absolute time. Times in the past are clamped to `now`.
    pub fn schedule_at(&mut self, at: Micros, action: A) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Entry {
            fire_at: at.max(self.now),
            seq,
            action,
        });
        EventHandle(seq)
    }

    /// Cancels a pending event. Returns false if it already fired or was
    /// cancelled before.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq || !self.heap.iter().any(|e| e.seq == handle.0) {
            return false;
        }
        self.cancelled.insert(handle.0)
    }

    /// Pops the next event firing at or before `t_end`, advancing the clock.
    pub fn pop_until(&mut self, t_end: Micros) -> Option<(Micros, A)> {
        loop {
            let top = self.heap.peek()?;
            if top.fire_at > t_end {
                return None;
            }
            let entry = self.heap.pop().expect("peeked");
            if self.cancelled.remove(&entry.seq) {
                continue;
            }
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            return Some((entry.fire_at, entry.action));
        }
    }

    /// Moves the clock forward without processing anything.
    pub fn advance_to(&mut self, t: Micros) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Processes every event with `fire_at <= t_end` and leaves the clock at
    /// `t_end`. The handler may schedule further events.
    pub fn run_until<F>(&mut self, t_end: Micros, mut handler: F) -> usize
    where
        F: FnMut(&mut Self, Micros, A),
    {
        let mut processed = 0;
        while let Some((t, action)) = self.pop_until(t_end) {
            handler(self, t, action);
            processed += 1;
        }
        self.advance_to(t_end);
        processed
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fires_after_delay() {
        let mut q = EventQueue::new();
        q.schedule(12_000, "a");
        let mut fired = Vec::new();
        q.run_until(1_000_000, |_, t, a| fired.push((t, a)));
        assert_eq!(fired, vec![(12_000, "a")]);
    }

    #[test]
    fn zero_delay_runs_after_existing_ties() {
        let mut q = EventQueue::new();
        q.advance_to(5);
        q.schedule_at(5, "queued");
        q.schedule(0, "new");
        let mut order = Vec::new();
        q.run_until(5, |_, t, a| order.push((t, a)));
        assert_eq!(order, vec![(5, "queued"), (5, "new")]);
    }

    #[test]
    fn ties_keep_schedule_order() {
        let mut q = EventQueue::new();
        q.schedule(10, 'A');
        q.schedule(10, 'B');
        let mut order = Vec::new();
        q.run_until(10, |_, _, a| order.push(a));
        assert_eq!(order, vec!['A', 'B']);
    }

    #[test]
    fn empty_run_advances_clock() {
        let mut q: EventQueue<()> = EventQueue::new();
        assert_eq!(q.run_until(1_000_000, |_, _, _| {}), 0);
        assert_eq!(q.now(), 1_000_000);
    }

    #[test]
    fn run_until_stops_at_horizon() {
        let mut q = EventQueue::new();
        for t in 1..=3 {
            q.schedule_at(t, t);
        }
        assert_eq!(q.run_until(2, |_, _, _| {}), 2);
        assert_eq!(q.now(), 2);
        assert_eq!(q.pending(), 1);
    }

    #[test]
    fn cancelled_events_do_not_fire() {
        let mut q = EventQueue::new();
        let h = q.schedule(3, 1);
        q.schedule(4, 2);
        assert!(q.cancel(h));
        assert!(!q.cancel(h));
        let mut fired = Vec::new();
        q.run_until(10, |_, _, a| fired.push(a));
        assert_eq!(fired, vec![2]);
    }

    #[test]
    fn handler_can_schedule_more() {
        let mut q = EventQueue::new();
        q.schedule(1, 0u32);
        let mut seen = Vec::new();
        q.run_until(100, |q, t, n| {
            seen.push(t);
            if n < 3 {
                q.schedule(10, n + 1);
            }
        });
        assert_eq!(seen, vec![1, 11, 21, 31]);
    }
}
