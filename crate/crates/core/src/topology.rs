//! Links and the dumbbell scenario: two clients feeding one router whose
//! server-facing egress holds the queue under study.
//!
//! ```text
//! Client A (FTP/TCP) --2 Mbps--+
//!                              +--> Router --1.7 Mbps [qdisc]--> Server
//! Client B (CBR/UDP) --1.5 Mbps+
//! ```
//!
//! Acks return Server -> Router -> Client A over unbounded FIFO links.

use crate::codel::{CoDel, DropRecord};
use crate::config::{QdiscKind, Scenario};
use crate::engine::{Calendar, EventHandle};
use crate::error::{Error, Result};
use crate::lstfcodel::{classify, LstfCodel};
use crate::qdisc::{Dequeued, DropTail, FlowId, Packet, Protocol, Qdisc, QdiscStats, Verdict};
use crate::red::Red;
use crate::rng::{stream, RngState};
use crate::time::SimTime;
use crate::trace::{TraceEvent, TraceRow};
use crate::traffic::{CbrSource, TcpOutput, TcpReceiver, TcpSender, TimerCommand};

pub const FTP_FLOW: FlowId = FlowId(1);
pub const CBR_FLOW: FlowId = FlowId(2);

/// Point-to-point link that serialises one packet at a time.
#[derive(Clone, Debug)]
pub struct Link {
    pub rate_bps: u64,
    pub prop_delay: SimTime,
    pub busy_until: SimTime,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub start: SimTime,
    pub end: SimTime,
    pub arrival: SimTime,
}

impl Link {
    pub fn new(rate_bps: u64, prop_delay: SimTime) -> Self {
        assert!(rate_bps > 0);
        Link { rate_bps, prop_delay, busy_until: SimTime::ZERO }
    }

    pub fn serialization(&self, size_bytes: u32) -> SimTime {
        SimTime::serialization(size_bytes as u64, self.rate_bps)
    }

    /// Queues a packet behind anything still being sent.
    pub fn transmit(&mut self, size_bytes: u32, now: SimTime) -> Transmission {
        let start = now.max(self.busy_until);
        let end = start + self.serialization(size_bytes);
        self.busy_until = end;
        Transmission { start, end, arrival: end + self.prop_delay }
    }

    pub fn is_idle(&self, now: SimTime) -> bool {
        self.busy_until <= now
    }
}

/// The disciplines behind one type, so the world can reach their internals.
#[derive(Clone, Debug)]
pub enum AnyQdisc {
    DropTail(DropTail),
    Red(Red),
    CoDel(CoDel),
    LstfCodel(LstfCodel),
}

impl AnyQdisc {
    pub fn build(scenario: &Scenario) -> Self {
        let cap = scenario.capacity_bytes;
        match scenario.qdisc {
            QdiscKind::DropTail => AnyQdisc::DropTail(DropTail::new(cap)),
            QdiscKind::Red => {
                AnyQdisc::Red(Red::new(scenario.red_params(), cap, RngState::new(scenario.seed, stream::RED)))
            }
            QdiscKind::CoDel => AnyQdisc::CoDel(CoDel::new(scenario.codel, cap)),
            QdiscKind::LstfCodel => AnyQdisc::LstfCodel(LstfCodel::new(scenario.lstf_params(), cap)),
        }
    }

    fn inner(&mut self) -> &mut dyn Qdisc {
        match self {
            AnyQdisc::DropTail(q) => q,
            AnyQdisc::Red(q) => q,
            AnyQdisc::CoDel(q) => q,
            AnyQdisc::LstfCodel(q) => q,
        }
    }

    pub fn drop_log(&self) -> &[DropRecord] {
        match self {
            AnyQdisc::CoDel(q) => q.drop_log(),
            AnyQdisc::LstfCodel(q) => q.drop_log(),
            _ => &[],
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            AnyQdisc::LstfCodel(q) => Some(q.gamma()),
            _ => None,
        }
    }
}

impl Qdisc for AnyQdisc {
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Verdict {
        self.inner().enqueue(pkt, now)
    }

    fn dequeue(&mut self, now: SimTime) -> Option<Dequeued> {
        self.inner().dequeue(now)
    }

    fn occupancy(&self) -> QdiscStats {
        match self {
            AnyQdisc::DropTail(q) => q.occupancy(),
            AnyQdisc::Red(q) => q.occupancy(),
            AnyQdisc::CoDel(q) => q.occupancy(),
            AnyQdisc::LstfCodel(q) => q.occupancy(),
        }
    }
}

#[derive(Clone, Debug)]
enum Action {
    FtpStart,
    CbrEmit,
    ArriveRouter(Packet),
    EgressTxDone,
    ArriveServer(Packet),
    ArriveRouterReverse(Packet),
    ArriveClientA(Packet),
    TcpTimeout,
}

/// End-to-end packet accounting for data (non-ack) packets.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FlowCounters {
    pub emitted: u64,
    pub delivered: u64,
    pub tail_dropped: u64,
    pub aqm_dropped: u64,
    pub acks_sent: u64,
    pub acks_received: u64,
}

impl FlowCounters {
    pub fn is_conserved(&self) -> bool {
        self.emitted == self.delivered + self.tail_dropped + self.aqm_dropped && self.acks_sent == self.acks_received
    }
}

/// Everything a finished run leaves behind.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scenario: Scenario,
    pub rows: Vec<TraceRow>,
    pub counters: FlowCounters,
    pub qdisc_stats: QdiscStats,
    pub drop_log: Vec<DropRecord>,
    pub events_executed: u64,
    pub tcp_timeouts: u64,
    pub tcp_fast_retransmits: u64,
    /// Start times of every egress transmission, with their end times.
    pub egress_busy: Vec<(SimTime, SimTime)>,
}

struct World {
    scenario: Scenario,
    qdisc: AnyQdisc,
    access_a: Link,
    access_b: Link,
    egress: Link,
    egress_transmitting: bool,
    reverse_server: Link,
    reverse_router: Link,
    tcp: Option<TcpSender>,
    receiver: TcpReceiver,
    tcp_timer: Option<EventHandle>,
    cbr: Option<CbrSource>,
    next_pkt_id: u64,
    stopped: bool,
    rows: Vec<TraceRow>,
    counters: FlowCounters,
    egress_busy: Vec<(SimTime, SimTime)>,
}

fn jitter(rng: &mut RngState, max: SimTime) -> SimTime {
    SimTime::from_nanos((rng.uniform() * max.as_nanos() as f64) as u64)
}

impl World {
    fn new(scenario: &Scenario) -> Self {
        let d = scenario.prop_delay;
        World {
            qdisc: AnyQdisc::build(scenario),
            access_a: Link::new(scenario.client_a_bps, d),
            access_b: Link::new(scenario.client_b_bps, d),
            egress: Link::new(scenario.egress_bps, d),
            egress_transmitting: false,
            reverse_server: Link::new(scenario.egress_bps, d),
            reverse_router: Link::new(scenario.client_a_bps, d),
            tcp: scenario.tcp_enabled.then(|| TcpSender::new(scenario.tcp)),
            receiver: TcpReceiver::new(),
            tcp_timer: None,
            cbr: None,
            next_pkt_id: 0,
            stopped: false,
            rows: Vec::new(),
            counters: FlowCounters::default(),
            egress_busy: Vec::new(),
            scenario: scenario.clone(),
        }
    }

    fn alloc_id(&mut self) -> u64 {
        self.next_pkt_id += 1;
        self.next_pkt_id
    }

    fn row(&self, now: SimTime, event: TraceEvent, pkt: &Packet, sojourn: Option<SimTime>) -> TraceRow {
        let occ = self.qdisc.occupancy();
        TraceRow {
            time: now,
            event,
            pkt_id: pkt.id,
            flow: pkt.flow.0,
            size_bytes: pkt.size_bytes,
            sojourn,
            qlen_bytes: occ.byte_length,
            qlen_pkts: occ.packet_length,
            gamma: self.qdisc.gamma().map(SimTime::from_secs_f64),
            epsilon: pkt.priority,
        }
    }

    fn send_from_a(&mut self, cal: &mut Calendar<Action>, pkt: Packet, now: SimTime) -> Result<()> {
        let tx = self.access_a.transmit(pkt.size_bytes, now);
        self.counters.emitted += 1;
        schedule(cal, tx.arrival, Action::ArriveRouter(pkt))
    }

    fn apply_tcp(&mut self, cal: &mut Calendar<Action>, out: TcpOutput, now: SimTime) -> Result<()> {
        let bytes = self.scenario.tcp.packet_bytes;
        for seg in out.transmit {
            let id = self.alloc_id();
            let pkt = Packet::new(id, FTP_FLOW, bytes, Protocol::TcpData, now).with_seq(seg.seq);
            self.send_from_a(cal, pkt, now)?;
        }
        match out.timer {
            TimerCommand::Unchanged => {}
            TimerCommand::Disarm => {
                if let Some(h) = self.tcp_timer.take() {
                    cal.cancel(h);
                }
            }
            TimerCommand::Arm(at) => {
                if let Some(h) = self.tcp_timer.take() {
                    cal.cancel(h);
                }
                self.tcp_timer = Some(schedule_handle(cal, at, Action::TcpTimeout)?);
            }
        }
        Ok(())
    }

    /// Pulls the next packet off the studied queue onto the egress wire.
    fn serve(&mut self, cal: &mut Calendar<Action>, now: SimTime) -> Result<()> {
        if !self.egress.is_idle(now) {
            return Err(Error::Invariant(format!("egress started at {now} while busy until {}", self.egress.busy_until)));
        }
        let Some(d) = self.qdisc.dequeue(now) else {
            self.egress_transmitting = false;
            return Ok(());
        };
        for victim in &d.aqm_drops {
            self.counters.aqm_dropped += 1;
            let row = self.row(now, TraceEvent::AqmDrop, victim, Some(victim.sojourn(now)));
            self.rows.push(row);
        }
        let row = self.row(now, TraceEvent::Dequeue, &d.packet, Some(d.sojourn));
        self.rows.push(row);
        let tx = self.egress.transmit(d.packet.size_bytes, now);
        self.egress_busy.push((tx.start, tx.end));
        self.egress_transmitting = true;
        schedule(cal, tx.end, Action::EgressTxDone)?;
        schedule(cal, tx.arrival, Action::ArriveServer(d.packet))
    }

    fn handle(&mut self, cal: &mut Calendar<Action>, action: Action) -> Result<()> {
        let now = cal.now();
        match action {
            Action::FtpStart => {
                if let Some(tcp) = self.tcp.as_mut() {
                    let out = tcp.start(now);
                    self.apply_tcp(cal, out, now)?;
                }
            }
            Action::CbrEmit => {
                if self.stopped {
                    return Ok(());
                }
                let cbr = self.cbr.as_mut().expect("cbr event without a source");
                let size = cbr.config().packet_bytes;
                let next = cbr.emit(now);
                let id = self.alloc_id();
                let pkt = Packet::new(id, CBR_FLOW, size, Protocol::Udp, now);
                let tx = self.access_b.transmit(size, now);
                self.counters.emitted += 1;
                schedule(cal, tx.arrival, Action::ArriveRouter(pkt))?;
                schedule(cal, next, Action::CbrEmit)?;
            }
            Action::ArriveRouter(pkt) => {
                // the class an lstfcodel arrival gets, for the trace
                let epsilon = self.qdisc.gamma().map(classify);
                let verdict = self.qdisc.enqueue(pkt.clone(), now);
                let row = match &verdict {
                    Verdict::Enqueued => {
                        let stamped = Packet { priority: epsilon, ..pkt };
                        self.row(now, TraceEvent::Enqueue, &stamped, None)
                    }
                    Verdict::DroppedTail(p) => {
                        self.counters.tail_dropped += 1;
                        self.row(now, TraceEvent::TailDrop, p, None)
                    }
                    Verdict::DroppedAqm(p) => {
                        self.counters.aqm_dropped += 1;
                        self.row(now, TraceEvent::AqmDrop, p, Some(SimTime::ZERO))
                    }
                };
                self.rows.push(row);
                if !self.egress_transmitting {
                    self.serve(cal, now)?;
                }
            }
            Action::EgressTxDone => self.serve(cal, now)?,
            Action::ArriveServer(pkt) => {
                self.counters.delivered += 1;
                let row = self.row(now, TraceEvent::Deliver, &pkt, None);
                self.rows.push(row);
                if pkt.protocol == Protocol::TcpData {
                    let ack_seq = self.receiver.on_data(pkt.seq);
                    let id = self.alloc_id();
                    let ack = Packet::new(id, FTP_FLOW, self.scenario.tcp.ack_bytes, Protocol::TcpAck, now).with_seq(ack_seq);
                    let tx = self.reverse_server.transmit(ack.size_bytes, now);
                    self.counters.acks_sent += 1;
                    schedule(cal, tx.arrival, Action::ArriveRouterReverse(ack))?;
                }
            }
            Action::ArriveRouterReverse(ack) => {
                let tx = self.reverse_router.transmit(ack.size_bytes, now);
                schedule(cal, tx.arrival, Action::ArriveClientA(ack))?;
            }
            Action::ArriveClientA(ack) => {
                self.counters.acks_received += 1;
                if let Some(tcp) = self.tcp.as_mut() {
                    let out = tcp.on_ack(ack.seq, now);
                    self.apply_tcp(cal, out, now)?;
                }
            }
            Action::TcpTimeout => {
                self.tcp_timer = None;
                if let Some(tcp) = self.tcp.as_mut() {
                    let out = tcp.on_timeout(now);
                    self.apply_tcp(cal, out, now)?;
                }
            }
        }
        Ok(())
    }

    fn stop_sources(&mut self, cal: &mut Calendar<Action>) {
        self.stopped = true;
        if let Some(tcp) = self.tcp.as_mut() {
            tcp.stop();
        }
        if let Some(h) = self.tcp_timer.take() {
            cal.cancel(h);
        }
    }
}

fn schedule_handle(cal: &mut Calendar<Action>, at: SimTime, action: Action) -> Result<EventHandle> {
    cal.schedule(at, action).map_err(|e| Error::Invariant(e.to_string()))
}

fn schedule(cal: &mut Calendar<Action>, at: SimTime, action: Action) -> Result<()> {
    schedule_handle(cal, at, action).map(|_| ())
}

/// Runs the scenario for its duration, then stops the sources and drains
/// every packet still in flight so that each one ends delivered or dropped.
pub fn run_scenario(scenario: &Scenario) -> Result<RunOutput> {
    scenario.validate()?;
    let mut world = World::new(scenario);
    let mut cal: Calendar<Action> = Calendar::new();

    let mut ftp_rng = RngState::new(scenario.seed, stream::FTP);
    let mut cbr_rng = RngState::new(scenario.seed, stream::CBR);
    if scenario.tcp_enabled {
        schedule(&mut cal, jitter(&mut ftp_rng, scenario.start_jitter), Action::FtpStart)?;
    }
    if scenario.cbr_enabled {
        let mut cfg = scenario.cbr;
        cfg.start_at += jitter(&mut cbr_rng, scenario.start_jitter);
        if cfg.start_at <= scenario.duration {
            world.cbr = Some(CbrSource::new(cfg));
            schedule(&mut cal, cfg.start_at, Action::CbrEmit)?;
        }
    }

    let first = cal.run_until(scenario.duration, |cal, a| world.handle(cal, a))?;
    world.stop_sources(&mut cal);
    let drained = cal.run_to_completion(|cal, a| world.handle(cal, a))?;

    let occ = world.qdisc.occupancy();
    if occ.packet_length != 0 || !occ.is_conserved() {
        return Err(Error::Invariant(format!("queue not drained or not conserved: {occ:?}")));
    }
    if !world.counters.is_conserved() {
        return Err(Error::Invariant(format!("packets lost track of: {:?}", world.counters)));
    }
    for w in world.egress_busy.windows(2) {
        if w[1].0 < w[0].1 {
            return Err(Error::Invariant(format!("egress transmissions overlap at {}", w[1].0)));
        }
    }

    let (timeouts, fast) = world.tcp.as_ref().map_or((0, 0), |t| (t.timeouts(), t.fast_retransmits()));
    Ok(RunOutput {
        scenario: scenario.clone(),
        counters: world.counters,
        qdisc_stats: occ,
        drop_log: world.qdisc.drop_log().to_vec(),
        events_executed: first.events_executed + drained.events_executed,
        tcp_timeouts: timeouts,
        tcp_fast_retransmits: fast,
        egress_busy: world.egress_busy,
        rows: world.rows,
    })
}
