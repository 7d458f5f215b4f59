//! The running simulation: channels with egress queues, TCP endpoints on the
//! hosts, monitor probes and the counters the control loop reads.

use super::event::EventQueue;
use super::link::LinkSpec;
use super::packet::{Ecn, FlowId, NodeId, Packet, PacketKind, TcpFlags};
use super::time::SimTime;
use super::topology::{Role, Topology, TopologySpec, R1};
use crate::aqm::{self, AqmError, AqmParams, DisciplineKind, Enqueued, OccupancyMeter, OccupancySummary, QueueDiscipline, QueueStats};
use crate::transport::{CubicParams, Receiver, Sender};

const DATA_PORT: u16 = 5001;
const PROBE_PORT: u16 = 7;

#[derive(Clone, Debug)]
pub struct NetworkConfig {
    pub topology: TopologySpec,
    /// Discipline on R1's egress toward the bottleneck. Every other egress
    /// queue is a tail-drop FIFO with the same hard limit.
    pub discipline: DisciplineKind,
    pub aqm: AqmParams,
    pub hosts_ecn: bool,
    pub cubic: CubicParams,
    /// Width of the bins used to count ECE feedback at R1.
    pub ece_bin: SimTime,
    /// Spacing of monitor probes; zero disables them.
    pub probe_every: SimTime,
    pub hash_seed: u64,
}

#[derive(Debug)]
enum Event {
    Arrive { node: NodeId, pkt: Packet },
    TxDone { chan: usize },
    Timer { conn: usize },
    Start { conn: usize },
    Probe,
}

struct Channel {
    to: NodeId,
    spec: LinkSpec,
    queue: Box<dyn QueueDiscipline>,
    busy: bool,
}

/// Independent cross-checks of the ECN signalling chain, counted as the
/// simulation runs. Every `*_violations` field must stay zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EcnAudit {
    /// CE data packets delivered to receivers.
    pub ce_delivered: u64,
    /// CE seen on a packet whose flow never negotiated ECN or that was
    /// sent Not-ECT.
    pub ce_on_not_ect_violations: u64,
    /// ACKs whose ECE flag disagrees with a shadow CE/CWR tracker.
    pub echo_violations: u64,
    /// ACKs that carried ECE.
    pub ece_acks: u64,
    /// Data packets that carried CWR.
    pub cwr_sent: u64,
    /// Packets whose codepoint changed on the overflow-drop path.
    pub overflow_mark_violations: u64,
    pub overflow_drops: u64,
    /// ECE-bearing handshake packets seen by R1 (excluded from the bins).
    pub negotiation_ece_seen: u64,
    /// All ECE-bearing packets seen by R1 toward the B side.
    pub ece_seen_total: u64,
}

/// What happened between two calls to [`Network::take_epoch`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpochStats {
    pub start: SimTime,
    pub end: SimTime,
    /// In-order payload bytes delivered to hosts A.
    pub delivered_bytes: u64,
    pub probe_rtts: Vec<SimTime>,
    pub occupancy: OccupancySummary,
    pub drops: u64,
    pub marks: u64,
}

impl EpochStats {
    pub fn throughput_bps(&self) -> f64 {
        let secs = (self.end - self.start).as_secs_f64();
        if secs == 0.0 {
            0.0
        } else {
            self.delivered_bytes as f64 * 8.0 / secs
        }
    }

    /// Mean probe RTT, if any probe completed.
    pub fn mean_rtt(&self) -> Option<SimTime> {
        if self.probe_rtts.is_empty() {
            return None;
        }
        let sum: u128 = self.probe_rtts.iter().map(|t| t.as_nanos() as u128).sum();
        let n = self.probe_rtts.len() as u128;
        Some(SimTime::from_nanos(((2 * sum + n) / (2 * n)) as u64))
    }
}

pub struct Network {
    cfg: NetworkConfig,
    topo: Topology,
    events: EventQueue<Event>,
    channels: Vec<Channel>,
    senders: Vec<Sender>,
    receivers: Vec<Receiver>,
    timer_at: Vec<Option<SimTime>>,
    shadow_ece: Vec<bool>,
    out_buf: Vec<Packet>,
    drop_buf: Vec<Packet>,
    ece_bins: Vec<u64>,
    audit: EcnAudit,
    occupancy: OccupancyMeter,
    delivered_total: u64,
    epoch_start: SimTime,
    epoch_delivered_base: u64,
    epoch_queue_base: QueueStats,
    epoch_rtts: Vec<SimTime>,
    probe_seq: u64,
    events_processed: u64,
}

impl Network {
    pub fn new(cfg: NetworkConfig) -> Self {
        let topo = Topology::new(&cfg.topology);
        let tail = AqmParams {
            ecn_enabled: false,
            ..cfg.aqm
        };
        let channels = (0..topo.channel_count())
            .map(|c| {
                let (_, to, spec) = topo.channel(c);
                let queue = if c == 0 {
                    aqm::build(cfg.discipline, cfg.aqm, cfg.hash_seed)
                } else {
                    aqm::build(DisciplineKind::TailDrop, tail, 0)
                };
                Channel {
                    to,
                    spec,
                    queue,
                    busy: false,
                }
            })
            .collect();
        let pairs = topo.pairs();
        let senders = (0..pairs)
            .map(|i| Sender::new(Self::flow_of(&topo, i), cfg.hosts_ecn, cfg.cubic))
            .collect();
        let receivers = (0..pairs)
            .map(|i| Receiver::new(Self::flow_of(&topo, i), cfg.hosts_ecn))
            .collect();
        let mut events = EventQueue::new();
        for (i, &t) in cfg.topology.start_times.iter().enumerate() {
            events.schedule(t, Event::Start { conn: i });
        }
        if cfg.probe_every > SimTime::ZERO {
            events.schedule(SimTime::from_nanos(cfg.probe_every.as_nanos() / 2), Event::Probe);
        }
        let occupancy = OccupancyMeter::new(cfg.aqm.hard_limit, SimTime::ZERO);
        Network {
            topo,
            events,
            channels,
            senders,
            receivers,
            timer_at: vec![None; pairs],
            shadow_ece: vec![false; pairs],
            out_buf: Vec::new(),
            drop_buf: Vec::new(),
            ece_bins: Vec::new(),
            audit: EcnAudit::default(),
            occupancy,
            delivered_total: 0,
            epoch_start: SimTime::ZERO,
            epoch_delivered_base: 0,
            epoch_queue_base: QueueStats::default(),
            epoch_rtts: Vec::new(),
            probe_seq: 0,
            events_processed: 0,
            cfg,
        }
    }

    fn flow_of(topo: &Topology, i: usize) -> FlowId {
        FlowId::tcp(topo.host_b(i), 10_000 + i as u16, topo.host_a(i), DATA_PORT)
    }

    pub fn now(&self) -> SimTime {
        self.events.now()
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.cfg
    }

    pub fn senders(&self) -> &[Sender] {
        &self.senders
    }

    pub fn receivers(&self) -> &[Receiver] {
        &self.receivers
    }

    pub fn audit(&self) -> &EcnAudit {
        &self.audit
    }

    pub fn events_processed(&self) -> u64 {
        self.events_processed
    }

    /// The AQM queue on R1's bottleneck egress.
    pub fn bottleneck_queue(&self) -> &dyn QueueDiscipline {
        self.channels[0].queue.as_ref()
    }

    /// Every egress queue, bottleneck first.
    pub fn queues(&self) -> impl Iterator<Item = &dyn QueueDiscipline> {
        self.channels.iter().map(|c| c.queue.as_ref())
    }

    pub fn set_aqm_params(&mut self, target: SimTime, interval: SimTime) -> Result<(), AqmError> {
        self.channels[0].queue.set_params(target, interval)
    }

    /// ECE feedback counts per bin since t = 0, handshake packets excluded.
    /// Bins up to the current time are present (trailing empty bins
    /// included).
    pub fn ece_bins(&mut self) -> &[u64] {
        let upto = (self.now().as_nanos() / self.cfg.ece_bin.as_nanos()) as usize;
        if self.ece_bins.len() < upto {
            self.ece_bins.resize(upto, 0);
        }
        &self.ece_bins
    }

    pub fn delivered_total(&self) -> u64 {
        self.delivered_total
    }

    /// Processes every event with time `<= until`, then parks the clock there.
    pub fn run_until(&mut self, until: SimTime) {
        while let Some(t) = self.events.peek_time() {
            if t > until {
                break;
            }
            let (now, ev) = self.events.pop_next().expect("peeked");
            self.events_processed += 1;
            self.handle(now, ev);
        }
        if until > self.events.now() {
            self.events.advance_to(until);
        }
    }

    /// Closes the current measurement epoch at the present time.
    pub fn take_epoch(&mut self) -> EpochStats {
        let now = self.now();
        let q = *self.channels[0].queue.stats();
        let base = &self.epoch_queue_base;
        let stats = EpochStats {
            start: self.epoch_start,
            end: now,
            delivered_bytes: self.delivered_total - self.epoch_delivered_base,
            probe_rtts: std::mem::take(&mut self.epoch_rtts),
            occupancy: self.occupancy.take(now),
            drops: q.dropped() - base.dropped(),
            marks: q.marked - base.marked,
        };
        self.epoch_start = now;
        self.epoch_delivered_base = self.delivered_total;
        self.epoch_queue_base = q;
        stats
    }

    fn handle(&mut self, now: SimTime, ev: Event) {
        match ev {
            Event::Arrive { node, pkt } => self.arrive(node, pkt, now),
            Event::TxDone { chan } => {
                self.channels[chan].busy = false;
                self.start_tx(chan, now);
            }
            Event::Timer { conn } => {
                if self.timer_at[conn] == Some(now) {
                    self.timer_at[conn] = None;
                }
                let mut out = std::mem::take(&mut self.out_buf);
                self.senders[conn].on_timer(now, &mut out);
                self.emit(self.topo.host_b(conn), &mut out, now);
                self.out_buf = out;
                self.arm_timer(conn);
            }
            Event::Start { conn } => {
                let mut out = std::mem::take(&mut self.out_buf);
                self.senders[conn].connect(now, &mut out);
                self.emit(self.topo.host_b(conn), &mut out, now);
                self.out_buf = out;
                self.arm_timer(conn);
            }
            Event::Probe => {
                let flow = FlowId {
                    src: self.topo.monitor_b(),
                    dst: self.topo.monitor_a(),
                    src_port: PROBE_PORT,
                    dst_port: PROBE_PORT,
                    protocol: FlowId::UDP,
                };
                let p = Packet::probe(flow, PacketKind::ProbeRequest, self.probe_seq, now);
                self.probe_seq += 1;
                self.send(self.topo.monitor_b(), p, now);
                self.events.schedule(now + self.cfg.probe_every, Event::Probe);
            }
        }
    }

    fn arm_timer(&mut self, conn: usize) {
        if let Some(d) = self.senders[conn].rto_deadline() {
            let due = d.max(self.now());
            if self.timer_at[conn].is_none_or(|t| due < t) {
                self.timer_at[conn] = Some(due);
                self.events.schedule(due, Event::Timer { conn });
            }
        }
    }

    fn emit(&mut self, from: NodeId, out: &mut Vec<Packet>, now: SimTime) {
        for p in out.drain(..) {
            if p.is_data() && p.flags.contains(TcpFlags::CWR) {
                self.audit.cwr_sent += 1;
            }
            self.send(from, p, now);
        }
    }

    fn send(&mut self, at: NodeId, pkt: Packet, now: SimTime) {
        let chan = self.topo.next_channel(at, pkt.flow.dst);
        let before = pkt.ecn();
        match self.channels[chan].queue.enqueue(pkt, now) {
            Enqueued::Queued => {}
            Enqueued::Dropped(p) => {
                self.audit.overflow_drops += 1;
                if p.ecn() != before {
                    self.audit.overflow_mark_violations += 1;
                }
            }
        }
        if chan == 0 {
            self.occupancy.observe(now, self.channels[0].queue.len());
        }
        if !self.channels[chan].busy {
            self.start_tx(chan, now);
        }
    }

    fn start_tx(&mut self, chan: usize, now: SimTime) {
        let c = &mut self.channels[chan];
        let next = c.queue.dequeue(now, &mut self.drop_buf);
        self.drop_buf.clear();
        if chan == 0 {
            self.occupancy.observe(now, c.queue.len());
        }
        if let Some((pkt, _)) = next {
            c.busy = true;
            let ser = c.spec.serialization(pkt.size_bytes);
            let to = c.to;
            let arrive = now + ser + c.spec.prop_delay;
            self.events.schedule(now + ser, Event::TxDone { chan });
            self.events.schedule(arrive, Event::Arrive { node: to, pkt });
        }
    }

    fn arrive(&mut self, node: NodeId, pkt: Packet, now: SimTime) {
        match self.topo.role(node) {
            Role::R1 | Role::R2 => {
                if node == R1 && self.topo.on_b_side(pkt.flow.dst) && pkt.flags.contains(TcpFlags::ECE) {
                    self.audit.ece_seen_total += 1;
                    if pkt.counts_as_ece_feedback() {
                        let bin = (now.as_nanos() / self.cfg.ece_bin.as_nanos()) as usize;
                        if self.ece_bins.len() <= bin {
                            self.ece_bins.resize(bin + 1, 0);
                        }
                        self.ece_bins[bin] += 1;
                    } else {
                        self.audit.negotiation_ece_seen += 1;
                    }
                }
                self.send(node, pkt, now);
            }
            Role::HostB(i) => {
                let mut out = std::mem::take(&mut self.out_buf);
                self.senders[i].on_packet(&pkt, now, &mut out);
                self.emit(node, &mut out, now);
                self.out_buf = out;
                self.arm_timer(i);
            }
            Role::HostA(i) => self.receiver_arrive(i, node, pkt, now),
            Role::MonitorA => {
                if pkt.kind == PacketKind::ProbeRequest {
                    let mut r = Packet::probe(pkt.flow.reversed(), PacketKind::ProbeResponse, pkt.seq, now);
                    r.ts_echo = pkt.sent_at;
                    self.send(node, r, now);
                }
            }
            Role::MonitorB => {
                if pkt.kind == PacketKind::ProbeResponse {
                    self.epoch_rtts.push(now - pkt.ts_echo);
                }
            }
        }
    }

    fn receiver_arrive(&mut self, i: usize, node: NodeId, pkt: Packet, now: SimTime) {
        if pkt.flags.contains(TcpFlags::SYN) {
            let sa = self.receivers[i].on_syn(&pkt, now);
            self.send(node, sa, now);
            return;
        }
        if !pkt.is_data() {
            return;
        }
        let negotiated = self.receivers[i].ecn_negotiated();
        if pkt.ecn() == Ecn::Ce {
            self.audit.ce_delivered += 1;
            if !negotiated || pkt.retransmission {
                self.audit.ce_on_not_ect_violations += 1;
            }
        }
        if pkt.flags.contains(TcpFlags::CWR) {
            self.shadow_ece[i] = false;
        }
        if negotiated && pkt.ecn() == Ecn::Ce {
            self.shadow_ece[i] = true;
        }
        let before = self.receivers[i].delivered_bytes();
        let ack = self.receivers[i].on_data(&pkt, now);
        self.delivered_total += self.receivers[i].delivered_bytes() - before;
        if ack.flags.contains(TcpFlags::ECE) {
            self.audit.ece_acks += 1;
        }
        if ack.flags.contains(TcpFlags::ECE) != self.shadow_ece[i] {
            self.audit.echo_violations += 1;
        }
        self.send(node, ack, now);
    }
}
