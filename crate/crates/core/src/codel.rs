//! CoDel (RFC 8289).
//!
//! The control loop is written against [`DropSource`] so that the same state
//! machine can sit on top of a FIFO or a priority container. The FIFO variant
//! drops the packet it was about to serve; other backings may pick a
//! different victim.

use crate::qdisc::{ByteFifo, Dequeued, Packet, Qdisc, QdiscStats, Verdict, MTU};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoDelParams {
    /// Acceptable standing queue delay.
    pub target: SimTime,
    /// Window over which the delay must stay above target before dropping.
    pub interval: SimTime,
    /// Backlog (bytes) at or below which no drop happens.
    pub mtu_bytes: u64,
}

impl Default for CoDelParams {
    fn default() -> Self {
        CoDelParams {
            target: SimTime::from_millis(5),
            interval: SimTime::from_millis(100),
            mtu_bytes: MTU as u64,
        }
    }
}

impl CoDelParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.target.as_nanos() == 0 {
            return Err("codel target must be positive".into());
        }
        if self.target >= self.interval {
            return Err(format!(
                "codel target ({}) must be smaller than interval ({})",
                self.target, self.interval
            ));
        }
        Ok(())
    }
}

/// `t + interval / sqrt(count)`, rounded to the nanosecond.
///
/// # Panics
/// If `count` is zero.
pub fn control_law(t: SimTime, count: u32, interval: SimTime) -> SimTime {
    assert!(count >= 1, "control law needs count >= 1");
    let step = interval.as_nanos() as f64 / (count as f64).sqrt();
    t + SimTime::from_nanos(step.round() as u64)
}

/// One AQM drop decided by the control loop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropRecord {
    pub at: SimTime,
    /// Drop count of the episode including this drop.
    pub count: u32,
    /// Next scheduled drop, `None` if this drop ended the episode.
    pub drop_next: Option<SimTime>,
    /// Drop-state episodes are numbered from 1.
    pub episode: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CoDelState {
    pub first_above_time: Option<SimTime>,
    /// Present exactly while `dropping`.
    pub drop_next: Option<SimTime>,
    /// Drops in the current episode; zero outside drop state.
    pub count: u32,
    /// Entry count of the previous episode.
    pub last_count: u32,
    pub dropping: bool,
    exit_count: u32,
    last_drop_next: Option<SimTime>,
    episode: u32,
}

impl CoDelState {
    pub fn new() -> Self {
        Self::default()
    }

    /// The estimator half of the loop (RFC 8289 `dodequeue`): true once the
    /// sojourn time has stayed at or above target for a full interval.
    /// `backlog_bytes` is what remains queued behind the packet being judged.
    pub fn should_drop(
        &mut self,
        params: &CoDelParams,
        now: SimTime,
        sojourn: SimTime,
        backlog_bytes: u64,
    ) -> bool {
        if sojourn < params.target || backlog_bytes <= params.mtu_bytes {
            self.first_above_time = None;
            return false;
        }
        match self.first_above_time {
            None => {
                self.first_above_time = Some(now + params.interval);
                false
            }
            Some(t) => now >= t,
        }
    }

    /// Most recent drop deadline, kept after the episode ends.
    pub fn last_drop_next(&self) -> Option<SimTime> {
        self.drop_next.or(self.last_drop_next)
    }

    fn enter_dropping(&mut self, params: &CoDelParams, now: SimTime) {
        // Resume near the drop rate that last controlled the queue if the
        // previous episode ended recently.
        let delta = self.exit_count.saturating_sub(self.last_count);
        let recent = match self.last_drop_next {
            Some(prev) => now.saturating_sub(prev) < params.interval.mul_u64(16),
            None => false,
        };
        self.count = if delta > 1 && recent { delta } else { 1 };
        self.dropping = true;
        self.drop_next = Some(control_law(now, self.count, params.interval));
        self.last_count = self.count;
        self.episode += 1;
    }

    fn leave_dropping(&mut self) {
        if self.dropping {
            self.dropping = false;
            self.exit_count = self.count;
            self.count = 0;
            self.last_drop_next = self.drop_next.take();
        }
    }
}

/// Backing store seen by the control loop.
pub(crate) trait DropSource {
    /// Removes the next packet the discipline wants to serve.
    fn pop_candidate(&mut self) -> Option<Packet>;

    /// Bytes still queued, not counting a candidate already popped.
    fn backlog_bytes(&self) -> u64;

    /// Picks the packet to discard when the loop decides to drop while holding
    /// `candidate`. Returns the victim and the candidate to evaluate next.
    fn take_victim(&mut self, candidate: Packet) -> (Packet, Option<Packet>);
}

/// RFC 8289 `dequeue`. Returns the served packet and the AQM victims.
pub(crate) fn codel_dequeue<S: DropSource>(
    state: &mut CoDelState,
    params: &CoDelParams,
    source: &mut S,
    now: SimTime,
    log: &mut Vec<DropRecord>,
) -> Option<(Packet, Vec<Packet>)> {
    let Some(mut candidate) = source.pop_candidate() else {
        state.first_above_time = None;
        state.leave_dropping();
        return None;
    };
    let mut ok_to_drop = state.should_drop(params, now, candidate.sojourn(now), source.backlog_bytes());
    let mut drops = Vec::new();

    if state.dropping {
        if !ok_to_drop {
            state.leave_dropping();
        }
        while state.dropping && now >= state.drop_next.expect("dropping implies drop_next") {
            let (victim, next) = source.take_victim(candidate);
            drops.push(victim);
            state.count += 1;
            let count = state.count;
            // ok_to_drop held, so the backlog exceeded one MTU and is non-empty
            candidate = next.expect("backlog above MTU has a successor");
            ok_to_drop = state.should_drop(params, now, candidate.sojourn(now), source.backlog_bytes());
            if ok_to_drop {
                let prev = state.drop_next.expect("dropping implies drop_next");
                state.drop_next = Some(control_law(prev, count, params.interval));
            } else {
                state.leave_dropping();
            }
            log.push(DropRecord { at: now, count, drop_next: state.drop_next, episode: state.episode });
        }
    } else if ok_to_drop {
        let (victim, next) = source.take_victim(candidate);
        drops.push(victim);
        candidate = next.expect("backlog above MTU has a successor");
        // refresh the estimator for the packet actually served; its verdict is not used
        state.should_drop(params, now, candidate.sojourn(now), source.backlog_bytes());
        state.enter_dropping(params, now);
        log.push(DropRecord {
            at: now,
            count: state.count,
            drop_next: state.drop_next,
            episode: state.episode,
        });
    }
    Some((candidate, drops))
}

impl DropSource for ByteFifo {
    fn pop_candidate(&mut self) -> Option<Packet> {
        self.pop()
    }

    fn backlog_bytes(&self) -> u64 {
        self.byte_length()
    }

    fn take_victim(&mut self, candidate: Packet) -> (Packet, Option<Packet>) {
        let next = self.pop();
        (candidate, next)
    }
}

/// CoDel on a byte-bounded FIFO.
#[derive(Clone, Debug)]
pub struct CoDel {
    params: CoDelParams,
    state: CoDelState,
    fifo: ByteFifo,
    drop_log: Vec<DropRecord>,
}

impl CoDel {
    pub fn new(params: CoDelParams, capacity_bytes: u64) -> Self {
        CoDel { params, state: CoDelState::new(), fifo: ByteFifo::new(capacity_bytes), drop_log: Vec::new() }
    }

    pub fn params(&self) -> &CoDelParams {
        &self.params
    }

    pub fn state(&self) -> &CoDelState {
        &self.state
    }

    pub fn drop_log(&self) -> &[DropRecord] {
        &self.drop_log
    }
}

impl Qdisc for CoDel {
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.fifo.offer(pkt, now)
    }

    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued> {
        let (packet, aqm_drops) =
            codel_dequeue(&mut self.state, &self.params, &mut self.fifo, now, &mut self.drop_log)?;
        self.fifo.stats.aqm_drops += aqm_drops.len() as u64;
        self.fifo.stats.dequeues += 1;
        let sojourn = packet.sojourn(now);
        Some(Dequeued { packet, sojourn, aqm_drops })
    }

    fn occupancy(&self) -> QdiscStats {
        self.fifo.stats
    }
}
