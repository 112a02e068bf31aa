//! Queue disciplines and the types they share.

mod droptail;

pub use droptail::DropTail;

use std::collections::VecDeque;
use std::fmt;

use crate::time::SimTime;

/// Largest packet any link carries, in bytes.
pub const MTU: u32 = 1500;

/// Default buffer: ten full-size packets.
pub const DEFAULT_CAPACITY_BYTES: u64 = 10 * MTU as u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId(pub u32);

impl fmt::Display for FlowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Protocol {
    TcpData,
    TcpAck,
    Udp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub id: u64,
    pub flow: FlowId,
    pub size_bytes: u32,
    pub protocol: Protocol,
    /// Transport sequence number (data) or cumulative ack number (acks).
    pub seq: u64,
    pub created_at: SimTime,
    /// Stamped on queue ingress.
    pub enqueued_at: SimTime,
    /// Priority assigned by slack-based disciplines; smaller is more urgent.
    pub priority: Option<f64>,
}

impl Packet {
    /// # Panics
    /// If `size_bytes` is zero or larger than [`MTU`].
    pub fn new(id: u64, flow: FlowId, size_bytes: u32, protocol: Protocol, created_at: SimTime) -> Self {
        assert!(
            size_bytes > 0 && size_bytes <= MTU,
            "packet size {size_bytes} outside 1..={MTU}"
        );
        Packet {
            id,
            flow,
            size_bytes,
            protocol,
            seq: 0,
            created_at,
            enqueued_at: created_at,
            priority: None,
        }
    }

    pub fn with_seq(mut self, seq: u64) -> Self {
        self.seq = seq;
        self
    }

    /// Time spent in the queue as of `now`.
    pub fn sojourn(&self, now: SimTime) -> SimTime {
        now - self.enqueued_at
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Enqueued,
    DroppedTail,
    DroppedAqm,
}

/// Result of offering a packet to a queue. Dropped packets are handed back.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Enqueued,
    DroppedTail(Packet),
    DroppedAqm(Packet),
}

impl Verdict {
    pub fn outcome(&self) -> Outcome {
        match self {
            Verdict::Enqueued => Outcome::Enqueued,
            Verdict::DroppedTail(_) => Outcome::DroppedTail,
            Verdict::DroppedAqm(_) => Outcome::DroppedAqm,
        }
    }

    pub fn dropped_packet(&self) -> Option<&Packet> {
        match self {
            Verdict::Enqueued => None,
            Verdict::DroppedTail(p) | Verdict::DroppedAqm(p) => Some(p),
        }
    }
}

/// A served packet plus everything the AQM discarded while choosing it.
#[derive(Clone, Debug, PartialEq)]
pub struct Dequeued {
    pub packet: Packet,
    pub sojourn: SimTime,
    pub aqm_drops: Vec<Packet>,
}

/// Counters and occupancy. `enqueues` counts every packet offered, so
/// `enqueues == dequeues + tail_drops + aqm_drops + packet_length`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QdiscStats {
    pub enqueues: u64,
    pub dequeues: u64,
    pub tail_drops: u64,
    pub aqm_drops: u64,
    pub byte_length: u64,
    pub packet_length: u64,
}

impl QdiscStats {
    pub fn is_conserved(&self) -> bool {
        self.enqueues == self.dequeues + self.tail_drops + self.aqm_drops + self.packet_length
    }
}

pub trait Qdisc {
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict;

    /// Serves the next packet, or `None` when the queue is empty.
    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued>;

    fn occupancy(&self) -> QdiscStats;
}

/// Byte-bounded FIFO used by DropTail, RED and CoDel.
#[derive(Clone, Debug)]
pub(crate) struct ByteFifo {
    packets: VecDeque<Packet>,
    capacity_bytes: u64,
    pub(crate) stats: QdiscStats,
}

impl ByteFifo {
    pub(crate) fn new(capacity_bytes: u64) -> Self {
        ByteFifo { packets: VecDeque::new(), capacity_bytes, stats: QdiscStats::default() }
    }

    pub(crate) fn fits(&self, pkt: &Packet) -> bool {
        self.stats.byte_length + pkt.size_bytes as u64 <= self.capacity_bytes
    }

    /// Counts the offer and either stores the packet or returns it as a tail drop.
    pub(crate) fn offer(&mut self, mut pkt: Packet, now: SimTime) -> Verdict {
        self.stats.enqueues += 1;
        if !self.fits(&pkt) {
            self.stats.tail_drops += 1;
            return Verdict::DroppedTail(pkt);
        }
        pkt.enqueued_at = now;
        self.stats.byte_length += pkt.size_bytes as u64;
        self.stats.packet_length += 1;
        self.packets.push_back(pkt);
        Verdict::Enqueued
    }

    /// Removes the head without classifying it as served or dropped.
    pub(crate) fn pop(&mut self) -> Option<Packet> {
        let pkt = self.packets.pop_front()?;
        self.stats.byte_length -= pkt.size_bytes as u64;
        self.stats.packet_length -= 1;
        Some(pkt)
    }

    pub(crate) fn is_empty(&self) -> bool {
        self.packets.is_empty()
    }

    pub(crate) fn byte_length(&self) -> u64 {
        self.stats.byte_length
    }
}
