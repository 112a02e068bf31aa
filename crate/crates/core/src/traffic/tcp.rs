//! Simplified Reno for an always-backlogged bulk sender.
//!
//! Windows are counted in packets. The sender is a pure state machine: each
//! input returns the segments to put on the wire and what to do with the
//! retransmission timer; the caller owns the clock.

use std::collections::{BTreeSet, VecDeque};

use super::rtt::{TcpRttEstimator, DEFAULT_RTT_ALPHA};
use crate::time::SimTime;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TcpConfig {
    pub alpha: f64,
    pub init_ssthresh: f64,
    pub init_cwnd: f64,
    pub packet_bytes: u32,
    pub ack_bytes: u32,
    pub initial_rto: SimTime,
    pub min_rto: SimTime,
    pub max_rto: SimTime,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            alpha: DEFAULT_RTT_ALPHA,
            init_ssthresh: 64.0,
            init_cwnd: 1.0,
            packet_bytes: 1500,
            ack_bytes: 40,
            initial_rto: SimTime::from_secs(1),
            min_rto: SimTime::from_millis(200),
            max_rto: SimTime::from_secs(60),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimerCommand {
    Unchanged,
    /// (Re)arm to fire at the given time.
    Arm(SimTime),
    Disarm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub retransmission: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TcpOutput {
    pub transmit: Vec<Segment>,
    pub timer: TimerCommand,
}

#[derive(Clone, Copy, Debug)]
struct SentInfo {
    at: SimTime,
    retransmitted: bool,
}

#[derive(Clone, Debug)]
pub struct TcpSender {
    config: TcpConfig,
    pub cwnd: f64,
    pub ssthresh: f64,
    next_seq: u64,
    /// Oldest unacknowledged sequence number.
    highest_acked: u64,
    max_sent: u64,
    dup_acks: u32,
    rto: SimTime,
    rtt: TcpRttEstimator,
    has_sample: bool,
    /// Send records for `highest_acked..max_sent`.
    sent: VecDeque<SentInfo>,
    stopped: bool,
    timeouts: u64,
    fast_retransmits: u64,
}

impl TcpSender {
    pub fn new(config: TcpConfig) -> Self {
        TcpSender {
            cwnd: config.init_cwnd.max(1.0),
            ssthresh: config.init_ssthresh,
            next_seq: 0,
            highest_acked: 0,
            max_sent: 0,
            dup_acks: 0,
            rto: config.initial_rto,
            rtt: TcpRttEstimator::new(config.alpha, 0.0),
            has_sample: false,
            sent: VecDeque::new(),
            stopped: false,
            timeouts: 0,
            fast_retransmits: 0,
            config,
        }
    }

    pub fn config(&self) -> &TcpConfig {
        &self.config
    }

    pub fn in_flight(&self) -> u64 {
        self.next_seq - self.highest_acked
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn highest_acked(&self) -> u64 {
        self.highest_acked
    }

    pub fn rto(&self) -> SimTime {
        self.rto
    }

    pub fn rtt(&self) -> &TcpRttEstimator {
        &self.rtt
    }

    pub fn timeouts(&self) -> u64 {
        self.timeouts
    }

    pub fn fast_retransmits(&self) -> u64 {
        self.fast_retransmits
    }

    /// Stops sending new data and arming timers; acks are still absorbed.
    pub fn stop(&mut self) {
        self.stopped = true;
    }

    pub fn start(&mut self, now: SimTime) -> TcpOutput {
        let transmit = self.fill_window(now);
        let timer = if self.stopped || self.in_flight() == 0 {
            TimerCommand::Disarm
        } else {
            TimerCommand::Arm(now + self.rto)
        };
        TcpOutput { transmit, timer }
    }

    fn record_send(&mut self, seq: u64, now: SimTime) -> Segment {
        let idx = (seq - self.highest_acked) as usize;
        if seq < self.max_sent {
            let info = &mut self.sent[idx];
            info.at = now;
            info.retransmitted = true;
            Segment { seq, retransmission: true }
        } else {
            debug_assert_eq!(idx, self.sent.len());
            self.sent.push_back(SentInfo { at: now, retransmitted: false });
            self.max_sent = seq + 1;
            Segment { seq, retransmission: false }
        }
    }

    fn fill_window(&mut self, now: SimTime) -> Vec<Segment> {
        let mut out = Vec::new();
        if self.stopped {
            return out;
        }
        while (self.in_flight() as f64) < self.cwnd {
            let seq = self.next_seq;
            self.next_seq += 1;
            out.push(self.record_send(seq, now));
        }
        out
    }

    fn rto_from_estimate(&self) -> SimTime {
        let rto = SimTime::from_secs_f64(2.0 * self.rtt.estimated_rtt);
        rto.max(self.config.min_rto).min(self.config.max_rto)
    }

    fn halve(&mut self) {
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
    }

    /// Processes a cumulative ack (`ack_seq` is the next sequence the
    /// receiver expects).
    pub fn on_ack(&mut self, ack_seq: u64, now: SimTime) -> TcpOutput {
        if ack_seq > self.highest_acked {
            // segments below max_sent may be acked past next_seq after a go-back
            let ack_seq = ack_seq.min(self.max_sent);
            let newest = &self.sent[(ack_seq - 1 - self.highest_acked) as usize];
            if !newest.retransmitted {
                let sample = (now - newest.at).as_secs_f64();
                if self.has_sample {
                    self.rtt.update(sample);
                } else {
                    self.rtt = TcpRttEstimator::new(self.config.alpha, sample);
                    self.has_sample = true;
                }
            }
            self.sent.drain(..(ack_seq - self.highest_acked) as usize);
            self.highest_acked = ack_seq;
            self.next_seq = self.next_seq.max(ack_seq);
            self.dup_acks = 0;
            self.rto = self.rto_from_estimate();
            if self.cwnd < self.ssthresh {
                self.cwnd += 1.0;
            } else {
                self.cwnd += 1.0 / self.cwnd;
            }
            let transmit = self.fill_window(now);
            let timer = if self.stopped || self.in_flight() == 0 {
                TimerCommand::Disarm
            } else {
                TimerCommand::Arm(now + self.rto)
            };
            return TcpOutput { transmit, timer };
        }

        if ack_seq == self.highest_acked && self.in_flight() > 0 {
            self.dup_acks += 1;
            if self.dup_acks == 3 && !self.stopped {
                self.fast_retransmits += 1;
                self.halve();
                self.cwnd = self.ssthresh;
                let seg = self.record_send(self.highest_acked, now);
                return TcpOutput { transmit: vec![seg], timer: TimerCommand::Arm(now + self.rto) };
            }
        }
        TcpOutput { transmit: Vec::new(), timer: TimerCommand::Unchanged }
    }

    /// Retransmission timer expiry: collapse to one packet and go back to the
    /// oldest unacknowledged segment.
    pub fn on_timeout(&mut self, now: SimTime) -> TcpOutput {
        if self.stopped || self.in_flight() == 0 {
            return TcpOutput { transmit: Vec::new(), timer: TimerCommand::Disarm };
        }
        self.timeouts += 1;
        self.halve();
        self.cwnd = 1.0;
        self.rto = self.rto.mul_u64(2).min(self.config.max_rto);
        self.dup_acks = 0;
        self.next_seq = self.highest_acked;
        let transmit = self.fill_window(now);
        TcpOutput { transmit, timer: TimerCommand::Arm(now + self.rto) }
    }
}

/// Cumulative-ack receiver that buffers out-of-order segments.
#[derive(Clone, Debug, Default)]
pub struct TcpReceiver {
    expected: u64,
    out_of_order: BTreeSet<u64>,
    delivered: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the ack number to send back.
    pub fn on_data(&mut self, seq: u64) -> u64 {
        if seq == self.expected {
            self.expected += 1;
            self.delivered += 1;
            while self.out_of_order.remove(&self.expected) {
                self.expected += 1;
                self.delivered += 1;
            }
        } else if seq > self.expected {
            self.out_of_order.insert(seq);
        }
        self.expected
    }

    /// In-order segments handed to the application.
    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}
