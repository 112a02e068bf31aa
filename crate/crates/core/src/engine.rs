//! Discrete-event calendar.
//!
//! Events carry an opaque action payload and fire in `(fire_at, sequence)`
//! order, where the sequence is the insertion counter. Equal-time events
//! therefore run in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use crate::time::SimTime;

/// Identifies one scheduled event so that it can be cancelled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

impl EventHandle {
    pub fn sequence(self) -> u64 {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
pub struct ScheduleError {
    pub fire_at: SimTime,
    pub now: SimTime,
}

#[derive(Debug)]
struct Entry<A> {
    fire_at: SimTime,
    sequence: u64,
    action: A,
}

impl<A> PartialEq for Entry<A> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.sequence == other.sequence
    }
}

impl<A> Eq for Entry<A> {}

impl<A> PartialOrd for Entry<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Reversed so that BinaryHeap pops the earliest entry.
impl<A> Ord for Entry<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.sequence).cmp(&(self.fire_at, self.sequence))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RunSummary {
    /// Events executed during this call.
    pub events_executed: u64,
    pub now: SimTime,
}

/// Calendar counters. `scheduled - cancelled - executed == pending` always.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CalendarCounters {
    pub scheduled: u64,
    pub cancelled: u64,
    pub executed: u64,
    pub pending: u64,
}

pub struct Calendar<A> {
    now: SimTime,
    next_sequence: u64,
    heap: BinaryHeap<Entry<A>>,
    live: HashSet<u64>,
    counters: CalendarCounters,
}

impl<A> Default for Calendar<A> {
    fn default() -> Self {
        Self::new()
    }
}

impl<A> Calendar<A> {
    pub fn new() -> Self {
        Calendar {
            now: SimTime::ZERO,
            next_sequence: 0,
            heap: BinaryHeap::new(),
            live: HashSet::new(),
            counters: CalendarCounters::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn schedule(&mut self, fire_at: SimTime, action: A) -> Result<EventHandle, ScheduleError> {
        if fire_at < self.now {
            return Err(ScheduleError { fire_at, now: self.now });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(Entry { fire_at, sequence, action });
        self.live.insert(sequence);
        self.counters.scheduled += 1;
        Ok(EventHandle(sequence))
    }

    /// Schedules relative to the current time; cannot fail.
    pub fn schedule_in(&mut self, delay: SimTime, action: A) -> EventHandle {
        let at = self.now + delay;
        self.schedule(at, action).expect("now + delay is never in the past")
    }

    /// Returns false if the event already fired or was already cancelled.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if self.live.remove(&handle.0) {
            self.counters.cancelled += 1;
            true
        } else {
            false
        }
    }

    pub fn pending(&self) -> usize {
        self.live.len()
    }

    pub fn counters(&self) -> CalendarCounters {
        CalendarCounters { pending: self.live.len() as u64, ..self.counters }
    }

    /// Time of the earliest live event, if any.
    pub fn peek_time(&mut self) -> Option<SimTime> {
        self.discard_cancelled_head();
        self.heap.peek().map(|e| e.fire_at)
    }

    fn discard_cancelled_head(&mut self) {
        while let Some(top) = self.heap.peek() {
            if self.live.contains(&top.sequence) {
                break;
            }
            self.heap.pop();
        }
    }

    /// Executes every event with `fire_at <= t_end`, then leaves the clock at
    /// `t_end`. The handler gets the calendar back so it can schedule or
    /// cancel; the first handler error stops the run.
    pub fn run_until<E, F>(&mut self, t_end: SimTime, mut handler: F) -> Result<RunSummary, E>
    where
        F: FnMut(&mut Calendar<A>, A) -> Result<(), E>,
    {
        let mut executed = 0;
        loop {
            self.discard_cancelled_head();
            match self.heap.peek() {
                Some(top) if top.fire_at <= t_end => {}
                _ => break,
            }
            let entry = self.heap.pop().expect("peeked entry");
            self.live.remove(&entry.sequence);
            debug_assert!(entry.fire_at >= self.now);
            self.now = entry.fire_at;
            self.counters.executed += 1;
            executed += 1;
            handler(self, entry.action)?;
        }
        if t_end > self.now {
            self.now = t_end;
        }
        Ok(RunSummary { events_executed: executed, now: self.now })
    }

    /// Runs until no live events remain.
    pub fn run_to_completion<E, F>(&mut self, mut handler: F) -> Result<RunSummary, E>
    where
        F: FnMut(&mut Calendar<A>, A) -> Result<(), E>,
    {
        let mut executed = 0;
        while let Some(t) = self.peek_time() {
            let s = self.run_until(t, &mut handler)?;
            executed += s.events_executed;
        }
        Ok(RunSummary { events_executed: executed, now: self.now })
    }
}
