//! Random Early Detection.
//!
//! Average queue size is an EWMA of the instantaneous byte backlog sampled on
//! every arrival. While the queue sits idle the average decays as if `m`
//! empty-queue samples had been taken, with `m` the idle time divided by the
//! transmission time of a full-size packet. Marks are realised as drops.

use crate::qdisc::{ByteFifo, Dequeued, Packet, Qdisc, QdiscStats, Verdict, MTU};
use crate::rng::RngState;
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RedParams {
    pub w_q: f64,
    pub min_th_bytes: f64,
    pub max_th_bytes: f64,
    pub max_p: f64,
    /// Transmission time of one typical packet; drives idle decay.
    pub typical_tx_time: SimTime,
}

impl RedParams {
    /// Classic settings for a link of `rate_bps`.
    pub fn for_link(rate_bps: u64) -> Self {
        RedParams {
            w_q: 0.002,
            min_th_bytes: 5.0 * MTU as f64,
            max_th_bytes: 15.0 * MTU as f64,
            max_p: 0.1,
            typical_tx_time: SimTime::serialization(MTU as u64, rate_bps),
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.w_q > 0.0 && self.w_q < 1.0) {
            return Err(format!("red.w_q {} outside (0, 1)", self.w_q));
        }
        if !(self.min_th_bytes >= 0.0 && self.min_th_bytes < self.max_th_bytes) {
            return Err(format!(
                "red thresholds need 0 <= min_th ({}) < max_th ({})",
                self.min_th_bytes, self.max_th_bytes
            ));
        }
        if !(self.max_p > 0.0 && self.max_p <= 1.0) {
            return Err(format!("red.max_p {} outside (0, 1]", self.max_p));
        }
        if self.typical_tx_time == SimTime::ZERO {
            return Err("red typical transmission time must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarkDecision {
    Pass,
    Mark,
    ForceMark,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RedState {
    pub avg: f64,
    /// When the queue last went idle.
    pub q_time: Option<SimTime>,
    /// Unmarked arrivals since the last mark while inside the marking window.
    pub count_since_mark: u64,
}

impl Default for RedState {
    fn default() -> Self {
        RedState { avg: 0.0, q_time: Some(SimTime::ZERO), count_since_mark: 0 }
    }
}

impl RedState {
    /// Folds one observation of the backlog `q` (bytes) into `avg`.
    ///
    /// # Panics
    /// On the idle branch if no idle start time was recorded.
    pub fn update_avg(&mut self, params: &RedParams, q: f64, now: SimTime, idle: bool) -> f64 {
        debug_assert!(q >= 0.0);
        if idle {
            let since = self.q_time.expect("idle RED queue must record when it went idle");
            let m = now.saturating_sub(since).as_secs_f64() / params.typical_tx_time.as_secs_f64();
            self.avg *= (1.0 - params.w_q).powf(m);
        } else {
            // same as (1 - w_q) * avg + w_q * q, with one rounding less
            self.avg += params.w_q * (q - self.avg);
        }
        self.avg
    }

    /// Base marking probability for the current average.
    pub fn base_probability(&self, params: &RedParams) -> f64 {
        params.max_p * (self.avg - params.min_th_bytes) / (params.max_th_bytes - params.min_th_bytes)
    }

    /// Decides the fate of one arrival given the current `avg`.
    pub fn mark_decision(&mut self, params: &RedParams, rng: &mut RngState) -> MarkDecision {
        if self.avg < params.min_th_bytes {
            self.count_since_mark = 0;
            return MarkDecision::Pass;
        }
        if self.avg >= params.max_th_bytes {
            self.count_since_mark = 0;
            return MarkDecision::ForceMark;
        }
        let p_b = self.base_probability(params);
        // spread marks so the gap between them is roughly uniform
        let denom = 1.0 - self.count_since_mark as f64 * p_b;
        let p_a = if denom <= 0.0 { 1.0 } else { (p_b / denom).clamp(0.0, 1.0) };
        if rng.uniform() < p_a {
            self.count_since_mark = 0;
            MarkDecision::Mark
        } else {
            self.count_since_mark += 1;
            MarkDecision::Pass
        }
    }
}

#[derive(Clone, Debug)]
pub struct Red {
    params: RedParams,
    state: RedState,
    fifo: ByteFifo,
    rng: RngState,
}

impl Red {
    pub fn new(params: RedParams, capacity_bytes: u64, rng: RngState) -> Self {
        Red { params, state: RedState::default(), fifo: ByteFifo::new(capacity_bytes), rng }
    }

    pub fn state(&self) -> &RedState {
        &self.state
    }
}

impl Qdisc for Red {
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        let idle = self.fifo.is_empty();
        let q = self.fifo.byte_length() as f64;
        self.state.update_avg(&self.params, q, now, idle);
        match self.state.mark_decision(&self.params, &mut self.rng) {
            MarkDecision::Pass => {
                let v = self.fifo.offer(pkt, now);
                if v == Verdict::Enqueued {
                    self.state.q_time = None;
                }
                v
            }
            MarkDecision::Mark | MarkDecision::ForceMark => {
                self.fifo.stats.enqueues += 1;
                self.fifo.stats.aqm_drops += 1;
                Verdict::DroppedAqm(pkt)
            }
        }
    }

    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued> {
        let packet = self.fifo.pop()?;
        self.fifo.stats.dequeues += 1;
        if self.fifo.is_empty() {
            self.state.q_time = Some(now);
        }
        let sojourn = packet.sojourn(now);
        Some(Dequeued { packet, sojourn, aqm_drops: Vec::new() })
    }

    fn occupancy(&self) -> QdiscStats {
        self.fifo.stats
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qdisc::{FlowId, Outcome, Protocol};
    use proptest::prelude::*;

    fn params() -> RedParams {
        RedParams::for_link(1_700_000)
    }

    #[test]
    fn nonempty_update() {
        let p = RedParams { w_q: 0.002, ..params() };
        let mut s = RedState { avg: 100.0, ..Default::default() };
        let avg = s.update_avg(&p, 50.0, SimTime::ZERO, false);
        assert_eq!(avg, 99.9);
    }

    #[test]
    fn idle_for_zero_slots_keeps_avg() {
        let p = params();
        let mut s = RedState { avg: 100.0, q_time: Some(SimTime::from_secs(3)), count_since_mark: 0 };
        assert_eq!(s.update_avg(&p, 0.0, SimTime::from_secs(3), true), 100.0);
    }

    #[test]
    fn idle_for_two_slots_quarters_avg_at_half_weight() {
        let p = RedParams { w_q: 0.5, typical_tx_time: SimTime::from_millis(10), ..params() };
        let mut s = RedState { avg: 100.0, q_time: Some(SimTime::ZERO), count_since_mark: 0 };
        assert_eq!(s.update_avg(&p, 0.0, SimTime::from_millis(20), true), 25.0);
    }

    #[test]
    #[should_panic]
    fn idle_without_start_time_panics() {
        let mut s = RedState { avg: 1.0, q_time: None, count_since_mark: 0 };
        s.update_avg(&params(), 0.0, SimTime::ZERO, true);
    }

    #[test]
    fn thresholds() {
        let p = params();
        let mut rng = RngState::new(1, 0);
        let mut s = RedState { avg: p.min_th_bytes - 1.0, ..Default::default() };
        for _ in 0..1000 {
            assert_eq!(s.mark_decision(&p, &mut rng), MarkDecision::Pass);
        }
        s.avg = p.max_th_bytes;
        assert_eq!(s.mark_decision(&p, &mut rng), MarkDecision::ForceMark);
    }

    #[test]
    fn midpoint_mark_rate_matches_uniform_gap_law() {
        // With p_b = 0.05 the gap between marks is uniform on 1..=20, so the
        // long-run mark rate is 1 / 10.5.
        let p = params();
        let mut s = RedState { avg: (p.min_th_bytes + p.max_th_bytes) / 2.0, ..Default::default() };
        assert!((s.base_probability(&p) - 0.05).abs() < 1e-12);
        let mut rng = RngState::new(99, 3);
        let trials = 1_000_000;
        let mut marks = 0u64;
        let mut gaps = [0u64; 21];
        let mut gap = 0usize;
        for _ in 0..trials {
            gap += 1;
            if s.mark_decision(&p, &mut rng) == MarkDecision::Mark {
                marks += 1;
                gaps[gap.min(20)] += 1;
                gap = 0;
            }
        }
        let rate = marks as f64 / trials as f64;
        let expected = 1.0 / 10.5;
        assert!((rate - expected).abs() / expected < 0.01, "rate {rate}");
        // each gap length carries about 1/20 of the marks
        for &g in &gaps[1..=20] {
            let share = g as f64 / marks as f64;
            assert!((share - 0.05).abs() < 0.005, "share {share}");
        }
    }

    #[test]
    fn queue_forces_marks_above_max() {
        let p = params();
        let mut q = Red::new(p, 1_000_000, RngState::new(1, 3));
        q.state.avg = p.max_th_bytes + 1.0;
        q.fifo.offer(Packet::new(0, FlowId(1), 1500, Protocol::Udp, SimTime::ZERO), SimTime::ZERO);
        q.state.q_time = None;
        // w_q is tiny, so a large backlog keeps avg above max_th
        for i in 0..100 {
            let pkt = Packet::new(i + 1, FlowId(1), 1500, Protocol::Udp, SimTime::ZERO);
            q.fifo.stats.byte_length = 1_000_000;
            assert_eq!(q.enqueue(pkt, SimTime::ZERO).outcome(), Outcome::DroppedAqm);
        }
    }

    #[test]
    fn idle_period_tracking() {
        let mut q = Red::new(params(), 15_000, RngState::new(1, 3));
        let pkt = Packet::new(0, FlowId(1), 1500, Protocol::Udp, SimTime::ZERO);
        assert_eq!(q.enqueue(pkt, SimTime::from_millis(1)), Verdict::Enqueued);
        assert_eq!(q.state().q_time, None);
        q.dequeue(SimTime::from_millis(5));
        assert_eq!(q.state().q_time, Some(SimTime::from_millis(5)));
        assert!(q.occupancy().is_conserved());
    }

    proptest! {
        #[test]
        fn nonempty_update_is_convex(avg in 0.0f64..1e6, q in 0.0f64..1e6, w in 0.0001f64..0.9999) {
            let p = RedParams { w_q: w, ..params() };
            let mut s = RedState { avg, ..Default::default() };
            let new = s.update_avg(&p, q, SimTime::ZERO, false);
            prop_assert!(new >= avg.min(q) - 1e-9 && new <= avg.max(q) + 1e-9);
        }

        #[test]
        fn idle_decay_is_monotone(avg in 0.0f64..1e6, a in 0u64..10_000_000_000, b in 0u64..10_000_000_000) {
            let p = params();
            let (short, long) = (a.min(b), a.max(b));
            let mut s1 = RedState { avg, ..Default::default() };
            let mut s2 = s1.clone();
            let x = s1.update_avg(&p, 0.0, SimTime::from_nanos(short), true);
            let y = s2.update_avg(&p, 0.0, SimTime::from_nanos(long), true);
            prop_assert!(y <= x);
        }
    }
}
