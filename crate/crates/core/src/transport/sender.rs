use super::cubic::{cubic_window, tcp_friendly_window, CubicParams};
use super::ecn::{negotiated, syn_flags};
use crate::simnet::{Ecn, FlowId, Packet, SimTime, TcpFlags, CONTROL_PACKET_BYTES, DATA_PACKET_BYTES};

pub const MIN_RTO: SimTime = SimTime::from_millis(200);
const INITIAL_RTO: SimTime = SimTime::from_secs(1);
const MAX_BACKOFF: u32 = 64;
pub const INITIAL_CWND: f64 = 10.0;

/// Congestion-control state of the sending side.
#[derive(Clone, Debug, PartialEq)]
pub struct ConnectionState {
    /// Congestion window in packets; floored when deciding what to send.
    pub cwnd: f64,
    /// Window at the last reduction.
    pub w_max: f64,
    /// Start of the current CUBIC epoch (time of the last reduction).
    pub epoch_start: Option<SimTime>,
    pub ssthresh: f64,
    /// A reduction happened less than one smoothed RTT ago.
    pub in_cwr: bool,
    pub cwr_until: SimTime,
    pub ecn_negotiated: bool,
    /// Smoothed RTT in seconds, once sampled.
    pub rtt_est: Option<f64>,
    pub rtt_var: f64,
}

impl Default for ConnectionState {
    fn default() -> Self {
        ConnectionState {
            cwnd: INITIAL_CWND,
            w_max: INITIAL_CWND,
            epoch_start: None,
            ssthresh: f64::INFINITY,
            in_cwr: false,
            cwr_until: SimTime::ZERO,
            ecn_negotiated: false,
            rtt_est: None,
            rtt_var: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CongestionSignal {
    EceEcho,
    PacketLoss,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Phase {
    Closed,
    SynSent,
    Established,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SenderOutput {
    pub segments_sent: u64,
    pub bytes_sent: u64,
    pub retransmits: u64,
    pub timeouts: u64,
    pub ece_received: u64,
    pub reductions: Vec<Reduction>,
}

/// One window reduction and the smoothed RTT when it happened.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Reduction {
    pub at: SimTime,
    pub srtt: SimTime,
    /// `None` for a retransmission timeout.
    pub signal: Option<CongestionSignal>,
}

/// Bulk-data TCP sender with CUBIC congestion avoidance.
pub struct Sender {
    flow: FlowId,
    ecn_capable: bool,
    params: CubicParams,
    state: ConnectionState,
    phase: Phase,
    snd_una: u64,
    snd_nxt: u64,
    high_water: u64,
    dupacks: u32,
    recover: Option<u64>,
    cwr_pending: bool,
    rto_deadline: Option<SimTime>,
    backoff: u32,
    syn_sent_at: SimTime,
    out: SenderOutput,
}

impl Sender {
    pub fn new(flow: FlowId, ecn_capable: bool, params: CubicParams) -> Self {
        Sender {
            flow,
            ecn_capable,
            params,
            state: ConnectionState::default(),
            phase: Phase::Closed,
            snd_una: 0,
            snd_nxt: 0,
            high_water: 0,
            dupacks: 0,
            recover: None,
            cwr_pending: false,
            rto_deadline: None,
            backoff: 1,
            syn_sent_at: SimTime::ZERO,
            out: SenderOutput::default(),
        }
    }

    pub fn flow(&self) -> FlowId {
        self.flow
    }

    pub fn state(&self) -> &ConnectionState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ConnectionState {
        &mut self.state
    }

    pub fn output(&self) -> &SenderOutput {
        &self.out
    }

    pub fn is_established(&self) -> bool {
        self.phase == Phase::Established
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn snd_nxt(&self) -> u64 {
        self.snd_nxt
    }

    pub fn cwr_pending(&self) -> bool {
        self.cwr_pending
    }

    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    fn rto(&self) -> SimTime {
        let base = match self.state.rtt_est {
            Some(srtt) => SimTime::from_secs_f64(2.0 * srtt).max(MIN_RTO),
            None => INITIAL_RTO,
        };
        base.saturating_mul(self.backoff as u64)
    }

    fn srtt_time(&self) -> SimTime {
        SimTime::from_secs_f64(self.state.rtt_est.unwrap_or(INITIAL_RTO.as_secs_f64()))
    }

    /// Emits the (ECN-setup) SYN.
    pub fn connect(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        self.phase = Phase::SynSent;
        self.syn_sent_at = now;
        out.push(Packet::tcp(
            self.flow,
            CONTROL_PACKET_BYTES,
            Ecn::NotEct,
            syn_flags(self.ecn_capable),
            now,
        ));
        self.rto_deadline = Some(now + self.rto());
    }

    pub fn on_packet(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Packet>) {
        if pkt.flags.contains(TcpFlags::SYN | TcpFlags::ACK) {
            if self.phase == Phase::SynSent {
                self.state.ecn_negotiated = self.ecn_capable && negotiated(pkt.flags);
                self.sample_rtt((now - self.syn_sent_at).as_secs_f64());
                self.phase = Phase::Established;
                self.backoff = 1;
                self.rto_deadline = None;
                self.try_send(now, out);
            }
            return;
        }
        if self.phase == Phase::Established && pkt.flags.contains(TcpFlags::ACK) {
            self.on_ack(pkt, now, out);
        }
    }

    fn sample_rtt(&mut self, r: f64) {
        match self.state.rtt_est {
            None => {
                self.state.rtt_est = Some(r);
                self.state.rtt_var = r / 2.0;
            }
            Some(srtt) => {
                self.state.rtt_var = 0.75 * self.state.rtt_var + 0.25 * (srtt - r).abs();
                self.state.rtt_est = Some(0.875 * srtt + 0.125 * r);
            }
        }
    }

    fn on_ack(&mut self, pkt: &Packet, now: SimTime, out: &mut Vec<Packet>) {
        if pkt.ack > self.snd_una {
            let acked = pkt.ack - self.snd_una;
            self.snd_una = pkt.ack;
            if self.snd_nxt < self.snd_una {
                self.snd_nxt = self.snd_una;
            }
            if pkt.ts_echo <= now {
                self.sample_rtt((now - pkt.ts_echo).as_secs_f64());
            }
            self.backoff = 1;
            match self.recover {
                Some(rec) if self.snd_una >= rec => {
                    self.recover = None;
                    self.dupacks = 0;
                }
                Some(_) => {
                    // partial ACK: the next hole is lost too
                    self.dupacks = 0;
                    self.send_segment(self.snd_una, now, out);
                }
                None => {
                    self.dupacks = 0;
                    for _ in 0..acked {
                        self.grow(now);
                    }
                }
            }
            self.rto_deadline = if self.snd_una < self.snd_nxt {
                Some(now + self.rto())
            } else {
                None
            };
        } else if pkt.ack == self.snd_una && self.snd_nxt > self.snd_una {
            self.dupacks += 1;
            if self.dupacks == 3 && self.recover.is_none() {
                self.on_congestion_signal(CongestionSignal::PacketLoss, now, out);
            }
        }

        if self.state.ecn_negotiated && pkt.counts_as_ece_feedback() {
            self.out.ece_received += 1;
            self.on_congestion_signal(CongestionSignal::EceEcho, now, out);
        }
        self.try_send(now, out);
    }

    /// Multiplicative decrease, at most once per smoothed RTT. A loss also
    /// retransmits the first unacknowledged segment and enters recovery.
    pub fn on_congestion_signal(&mut self, kind: CongestionSignal, now: SimTime, out: &mut Vec<Packet>) {
        if self.state.in_cwr && now >= self.state.cwr_until {
            self.state.in_cwr = false;
        }
        if !self.state.in_cwr {
            let s = &mut self.state;
            s.w_max = s.cwnd;
            s.cwnd = (self.params.beta * s.cwnd).max(1.0);
            s.ssthresh = s.cwnd.max(2.0);
            s.epoch_start = Some(now);
            s.in_cwr = true;
            let srtt = self.srtt_time();
            self.state.cwr_until = now + srtt;
            self.out.reductions.push(Reduction {
                at: now,
                srtt,
                signal: Some(kind),
            });
            if kind == CongestionSignal::EceEcho {
                self.cwr_pending = true;
            }
        }
        if kind == CongestionSignal::PacketLoss && self.snd_una < self.snd_nxt {
            self.recover = Some(self.snd_nxt);
            self.send_segment(self.snd_una, now, out);
            self.rto_deadline = Some(now + self.rto());
        }
    }

    /// Handles an expired retransmission timer.
    pub fn on_timer(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        let Some(deadline) = self.rto_deadline else {
            return;
        };
        if now < deadline {
            return;
        }
        self.backoff = (self.backoff * 2).min(MAX_BACKOFF);
        match self.phase {
            Phase::Closed => self.rto_deadline = None,
            Phase::SynSent => {
                out.push(Packet::tcp(
                    self.flow,
                    CONTROL_PACKET_BYTES,
                    Ecn::NotEct,
                    syn_flags(self.ecn_capable),
                    now,
                ));
                self.syn_sent_at = now;
                self.rto_deadline = Some(now + self.rto());
            }
            Phase::Established => {
                if self.snd_una >= self.snd_nxt {
                    self.rto_deadline = None;
                    return;
                }
                self.out.timeouts += 1;
                let s = &mut self.state;
                s.ssthresh = (self.params.beta * s.cwnd).max(2.0);
                s.w_max = s.cwnd;
                s.cwnd = 1.0;
                s.epoch_start = Some(now);
                s.in_cwr = true;
                let srtt = self.srtt_time();
                self.state.cwr_until = now + srtt;
                self.out.reductions.push(Reduction {
                    at: now,
                    srtt,
                    signal: None,
                });
                self.recover = None;
                self.dupacks = 0;
                self.snd_nxt = self.snd_una;
                self.rto_deadline = Some(now + self.rto());
                self.try_send(now, out);
            }
        }
    }

    fn grow(&mut self, now: SimTime) {
        let s = &mut self.state;
        if s.cwnd < s.ssthresh {
            s.cwnd += 1.0;
            return;
        }
        let epoch = *s.epoch_start.get_or_insert_with(|| {
            s.w_max = s.w_max.max(s.cwnd);
            now
        });
        let t = (now - epoch).as_secs_f64();
        let rtt = s.rtt_est.unwrap_or(0.1).max(1e-6);
        let w_est = tcp_friendly_window(t, rtt, s.w_max, self.params);
        if cubic_window(t, s.w_max, self.params) < w_est {
            s.cwnd = s.cwnd.max(w_est);
        } else {
            let target = cubic_window(t + rtt, s.w_max, self.params).clamp(s.cwnd, 1.5 * s.cwnd);
            if target > s.cwnd {
                s.cwnd += (target - s.cwnd) / s.cwnd;
            } else {
                s.cwnd += 0.01 / s.cwnd;
            }
        }
    }

    fn allowed_in_flight(&self) -> u64 {
        let base = self.state.cwnd.floor().max(1.0) as u64;
        if self.recover.is_some() {
            base + self.dupacks as u64
        } else {
            base
        }
    }

    pub fn try_send(&mut self, now: SimTime, out: &mut Vec<Packet>) {
        if self.phase != Phase::Established {
            return;
        }
        while self.snd_nxt - self.snd_una < self.allowed_in_flight() {
            self.send_segment(self.snd_nxt, now, out);
            self.snd_nxt += 1;
        }
        if self.snd_una < self.snd_nxt && self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rto());
        }
    }

    fn send_segment(&mut self, seq: u64, now: SimTime, out: &mut Vec<Packet>) {
        let retransmission = seq < self.high_water;
        // retransmissions go out Not-ECT
        let ecn = if self.state.ecn_negotiated && !retransmission {
            Ecn::Ect0
        } else {
            Ecn::NotEct
        };
        let mut flags = TcpFlags::ACK;
        if self.cwr_pending && !retransmission {
            flags.insert(TcpFlags::CWR);
            self.cwr_pending = false;
        }
        let mut p = Packet::tcp(self.flow, DATA_PACKET_BYTES, ecn, flags, now);
        p.seq = seq;
        p.retransmission = retransmission;
        self.high_water = self.high_water.max(seq + 1);
        self.out.segments_sent += 1;
        self.out.bytes_sent += DATA_PACKET_BYTES as u64;
        if retransmission {
            self.out.retransmits += 1;
        }
        out.push(p);
    }
}
