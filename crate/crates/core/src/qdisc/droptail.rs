use super::{ByteFifo, Dequeued, Packet, Qdisc, QdiscStats, Verdict};
use crate::time::SimTime;

/// Plain FIFO with tail drop once the byte budget is exhausted.
#[derive(Clone, Debug)]
pub struct DropTail {
    fifo: ByteFifo,
}

impl DropTail {
    pub fn new(capacity_bytes: u64) -> Self {
        DropTail { fifo: ByteFifo::new(capacity_bytes) }
    }
}

impl Qdisc for DropTail {
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.fifo.offer(pkt, now)
    }

    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued> {
        let packet = self.fifo.pop()?;
        self.fifo.stats.dequeues += 1;
        let sojourn = packet.sojourn(now);
        Some(Dequeued { packet, sojourn, aqm_drops: Vec::new() })
    }

    fn occupancy(&self) -> QdiscStats {
        self.fifo.stats
    }
}
