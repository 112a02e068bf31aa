//! LSTFCoDel: CoDel's control loop over a slack-ordered priority queue.
//!
//! The queue keeps an exponentially weighted estimate of its own queuing
//! delay (the average slack, `gamma`). Each arriving packet is stamped with a
//! priority `epsilon = 1 / (1 + gamma)` (zero while `gamma` is zero) and the
//! smallest epsilon is served first, ties in arrival order. Packets that
//! arrive while delay is building therefore overtake packets that arrived
//! under calmer conditions. When CoDel decides to drop, the victim is the
//! resident with the largest epsilon rather than the packet about to be
//! served.
//!
//! Priorities are fixed at ingress and never revisited.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::codel::{codel_dequeue, CoDelParams, CoDelState, DropRecord, DropSource};
use crate::qdisc::{Dequeued, Packet, Qdisc, QdiscStats, Verdict};
use crate::time::SimTime;

pub const DEFAULT_ALPHA: f64 = 0.5;

/// Running slack estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlackEstimator {
    /// Forgetfulness factor in [0, 1]: weight of the newest observation.
    pub alpha: f64,
    /// Average slack in seconds; never negative.
    pub gamma: f64,
    /// Most recent delay observation in seconds.
    pub beta_last: f64,
    /// Seconds until CoDel's next scheduled drop, folded into the next update
    /// and then cleared.
    pub pending_drop_next_influence: f64,
}

impl SlackEstimator {
    /// # Panics
    /// If `alpha` is outside [0, 1].
    pub fn new(alpha: f64) -> Self {
        assert!((0.0..=1.0).contains(&alpha), "alpha {alpha} outside [0, 1]");
        SlackEstimator { alpha, gamma: 0.0, beta_last: 0.0, pending_drop_next_influence: 0.0 }
    }

    /// `gamma = (1 - alpha) * gamma + alpha * (beta + pending)`, then clears
    /// the pending drop-time term.
    ///
    /// # Panics
    /// If `beta` is negative or not finite.
    pub fn update(&mut self, beta: f64) {
        assert!(beta >= 0.0 && beta.is_finite(), "delay observation {beta} must be >= 0");
        let observed = beta + self.pending_drop_next_influence;
        self.gamma = ((1.0 - self.alpha) * self.gamma + self.alpha * observed).max(0.0);
        self.beta_last = beta;
        self.pending_drop_next_influence = 0.0;
    }

    pub fn set_drop_next_influence(&mut self, seconds: f64) {
        self.pending_drop_next_influence = seconds.max(0.0);
    }
}

/// Maps average slack to a priority in [0, 1]; smaller means served sooner.
///
/// # Panics
/// If `gamma` is negative or NaN.
pub fn classify(gamma: f64) -> f64 {
    assert!(gamma >= 0.0, "slack {gamma} must be >= 0");
    if gamma == 0.0 {
        0.0
    } else {
        1.0 / (1.0 + gamma)
    }
}

/// Service order: ascending epsilon, then ascending arrival.
#[derive(Clone, Copy, Debug)]
pub struct PriorityKey {
    pub epsilon: f64,
    pub arrival_seq: u64,
}

impl PartialEq for PriorityKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PriorityKey {}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.epsilon
            .total_cmp(&other.epsilon)
            .then(self.arrival_seq.cmp(&other.arrival_seq))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LstfParams {
    pub alpha: f64,
    /// Fold CoDel's next drop deadline into the slack estimate after drops.
    pub drop_next_influence: bool,
    pub codel: CoDelParams,
}

impl Default for LstfParams {
    fn default() -> Self {
        LstfParams { alpha: DEFAULT_ALPHA, drop_next_influence: true, codel: CoDelParams::default() }
    }
}

impl LstfParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(format!("lstfcodel alpha {} outside [0, 1]", self.alpha));
        }
        self.codel.validate()
    }
}

#[derive(Clone, Debug, Default)]
struct PriorityBacklog {
    packets: BTreeMap<PriorityKey, Packet>,
    bytes: u64,
}

impl PriorityBacklog {
    fn insert(&mut self, key: PriorityKey, pkt: Packet) {
        self.bytes += pkt.size_bytes as u64;
        self.packets.insert(key, pkt);
    }

    fn pop_min(&mut self) -> Option<Packet> {
        let (_, p) = self.packets.pop_first()?;
        self.bytes -= p.size_bytes as u64;
        Some(p)
    }

    fn pop_max(&mut self) -> Option<Packet> {
        let (_, p) = self.packets.pop_last()?;
        self.bytes -= p.size_bytes as u64;
        Some(p)
    }
}

impl DropSource for PriorityBacklog {
    fn pop_candidate(&mut self) -> Option<Packet> {
        self.pop_min()
    }

    fn backlog_bytes(&self) -> u64 {
        self.bytes
    }

    fn take_victim(&mut self, candidate: Packet) -> (Packet, Option<Packet>) {
        // the candidate holds the smallest key, so any resident outranks it
        match self.pop_max() {
            Some(victim) => (victim, Some(candidate)),
            None => {
                let next = self.pop_min();
                (candidate, next)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct LstfCodel {
    params: LstfParams,
    capacity_bytes: u64,
    state: CoDelState,
    slack: SlackEstimator,
    backlog: PriorityBacklog,
    next_arrival: u64,
    stats: QdiscStats,
    drop_log: Vec<DropRecord>,
}

impl LstfCodel {
    pub fn new(params: LstfParams, capacity_bytes: u64) -> Self {
        LstfCodel {
            slack: SlackEstimator::new(params.alpha),
            params,
            capacity_bytes,
            state: CoDelState::new(),
            backlog: PriorityBacklog::default(),
            next_arrival: 0,
            stats: QdiscStats::default(),
            drop_log: Vec::new(),
        }
    }

    pub fn params(&self) -> &LstfParams {
        &self.params
    }

    pub fn slack(&self) -> &SlackEstimator {
        &self.slack
    }

    pub fn gamma(&self) -> f64 {
        self.slack.gamma
    }

    pub fn state(&self) -> &CoDelState {
        &self.state
    }

    pub fn drop_log(&self) -> &[DropRecord] {
        &self.drop_log
    }

    /// Resident keys in service order, with packet ids.
    pub fn resident_keys(&self) -> Vec<(PriorityKey, u64)> {
        self.backlog.packets.iter().map(|(k, p)| (*k, p.id)).collect()
    }
}

impl Qdisc for LstfCodel {
    fn enqueue(&mut self, mut pkt: Packet, now: SimTime) -> Verdict {
        self.stats.enqueues += 1;
        let epsilon = classify(self.slack.gamma);
        pkt.priority = Some(epsilon);
        if self.backlog.bytes + pkt.size_bytes as u64 > self.capacity_bytes {
            self.stats.tail_drops += 1;
            return Verdict::DroppedTail(pkt);
        }
        pkt.enqueued_at = now;
        let key = PriorityKey { epsilon, arrival_seq: self.next_arrival };
        self.next_arrival += 1;
        self.backlog.insert(key, pkt);
        self.stats.byte_length = self.backlog.bytes;
        self.stats.packet_length += 1;
        Verdict::Enqueued
    }

    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued> {
        let served =
            codel_dequeue(&mut self.state, &self.params.codel, &mut self.backlog, now, &mut self.drop_log);
        let Some((packet, aqm_drops)) = served else {
            self.stats.byte_length = self.backlog.bytes;
            return None;
        };
        self.stats.aqm_drops += aqm_drops.len() as u64;
        self.stats.dequeues += 1;
        self.stats.packet_length -= 1 + aqm_drops.len() as u64;
        self.stats.byte_length = self.backlog.bytes;

        if !aqm_drops.is_empty() && self.params.drop_next_influence {
            let until_next = self
                .state
                .last_drop_next()
                .map_or(SimTime::ZERO, |t| t.saturating_sub(now));
            self.slack.set_drop_next_influence(until_next.as_secs_f64());
        }
        let sojourn = packet.sojourn(now);
        self.slack.update(sojourn.as_secs_f64());
        Some(Dequeued { packet, sojourn, aqm_drops })
    }

    fn occupancy(&self) -> QdiscStats {
        self.stats
    }
}
