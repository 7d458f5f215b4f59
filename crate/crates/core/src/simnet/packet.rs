use std::fmt;
use std::ops::{BitOr, BitOrAssign};

use super::time::SimTime;

/// Size of a full data segment on the wire.
pub const DATA_PACKET_BYTES: u32 = 1500;
/// Size of pure ACKs, handshake segments and monitor probes.
pub const CONTROL_PACKET_BYTES: u32 = 64;

pub type NodeId = u32;

/// 5-tuple identity of a flow.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FlowId {
    pub src: NodeId,
    pub dst: NodeId,
    pub src_port: u16,
    pub dst_port: u16,
    pub protocol: u8,
}

impl FlowId {
    pub const TCP: u8 = 6;
    pub const UDP: u8 = 17;

    pub fn tcp(src: NodeId, src_port: u16, dst: NodeId, dst_port: u16) -> Self {
        FlowId {
            src,
            dst,
            src_port,
            dst_port,
            protocol: Self::TCP,
        }
    }

    pub fn reversed(self) -> Self {
        FlowId {
            src: self.dst,
            dst: self.src,
            src_port: self.dst_port,
            dst_port: self.src_port,
            protocol: self.protocol,
        }
    }

    /// Stable byte encoding used for flow hashing.
    pub fn to_bytes(self) -> [u8; 13] {
        let mut out = [0u8; 13];
        out[0..4].copy_from_slice(&self.src.to_be_bytes());
        out[4..8].copy_from_slice(&self.dst.to_be_bytes());
        out[8..10].copy_from_slice(&self.src_port.to_be_bytes());
        out[10..12].copy_from_slice(&self.dst_port.to_be_bytes());
        out[12] = self.protocol;
        out
    }
}

/// The two ECN bits of the IP header.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ecn {
    NotEct,
    Ect0,
    Ect1,
    Ce,
}

impl Ecn {
    pub fn is_ect(self) -> bool {
        matches!(self, Ecn::Ect0 | Ecn::Ect1)
    }
}

/// TCP header flags relevant to the simulation.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TcpFlags(u8);

impl TcpFlags {
    pub const NONE: TcpFlags = TcpFlags(0);
    pub const SYN: TcpFlags = TcpFlags(1 << 0);
    pub const ACK: TcpFlags = TcpFlags(1 << 1);
    pub const FIN: TcpFlags = TcpFlags(1 << 2);
    pub const ECE: TcpFlags = TcpFlags(1 << 3);
    pub const CWR: TcpFlags = TcpFlags(1 << 4);

    pub fn contains(self, other: TcpFlags) -> bool {
        self.0 & other.0 == other.0
    }

    pub fn insert(&mut self, other: TcpFlags) {
        self.0 |= other.0;
    }

    pub fn remove(&mut self, other: TcpFlags) {
        self.0 &= !other.0;
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }
}

impl BitOr for TcpFlags {
    type Output = TcpFlags;

    fn bitor(self, rhs: TcpFlags) -> TcpFlags {
        TcpFlags(self.0 | rhs.0)
    }
}

impl BitOrAssign for TcpFlags {
    fn bitor_assign(&mut self, rhs: TcpFlags) {
        self.0 |= rhs.0;
    }
}

impl fmt::Debug for TcpFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names = [
            (TcpFlags::SYN, "SYN"),
            (TcpFlags::ACK, "ACK"),
            (TcpFlags::FIN, "FIN"),
            (TcpFlags::ECE, "ECE"),
            (TcpFlags::CWR, "CWR"),
        ];
        let set: Vec<&str> = names
            .iter()
            .filter(|(flag, _)| self.contains(*flag))
            .map(|(_, n)| *n)
            .collect();
        write!(f, "[{}]", set.join("|"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PacketKind {
    Tcp,
    ProbeRequest,
    ProbeResponse,
}

/// A simulated IP/TCP packet.
#[derive(Clone, Debug, PartialEq)]
pub struct Packet {
    pub flow: FlowId,
    pub kind: PacketKind,
    /// Segment sequence number (data) or probe id (probes).
    pub seq: u64,
    /// Cumulative acknowledgement: next expected segment.
    pub ack: u64,
    pub size_bytes: u32,
    ecn: Ecn,
    pub flags: TcpFlags,
    pub sent_at: SimTime,
    /// Echo of the `sent_at` of the segment that triggered this ACK.
    pub ts_echo: SimTime,
    pub is_probe: bool,
    /// Set by the queue discipline on enqueue.
    pub enqueued_at: SimTime,
    pub retransmission: bool,
}

impl Packet {
    pub fn tcp(flow: FlowId, size_bytes: u32, ecn: Ecn, flags: TcpFlags, sent_at: SimTime) -> Self {
        Packet {
            flow,
            kind: PacketKind::Tcp,
            seq: 0,
            ack: 0,
            size_bytes,
            ecn,
            flags,
            sent_at,
            ts_echo: SimTime::ZERO,
            is_probe: false,
            enqueued_at: SimTime::ZERO,
            retransmission: false,
        }
    }

    pub fn probe(flow: FlowId, kind: PacketKind, id: u64, sent_at: SimTime) -> Self {
        Packet {
            flow,
            kind,
            seq: id,
            ack: 0,
            size_bytes: CONTROL_PACKET_BYTES,
            ecn: Ecn::NotEct,
            flags: TcpFlags::NONE,
            sent_at,
            ts_echo: SimTime::ZERO,
            is_probe: true,
            enqueued_at: SimTime::ZERO,
            retransmission: false,
        }
    }

    pub fn ecn(&self) -> Ecn {
        self.ecn
    }

    /// Sets CE on an ECN-capable packet. Returns `false` (and leaves the
    /// packet untouched) for Not-ECT packets, so CE can only ever replace ECT.
    pub fn mark_ce(&mut self) -> bool {
        if self.ecn.is_ect() {
            self.ecn = Ecn::Ce;
            true
        } else {
            self.ecn == Ecn::Ce
        }
    }

    pub fn is_data(&self) -> bool {
        self.kind == PacketKind::Tcp && self.size_bytes > CONTROL_PACKET_BYTES
    }

    /// Counted as congestion feedback: ECE set and not part of the ECN
    /// negotiation handshake.
    pub fn counts_as_ece_feedback(&self) -> bool {
        self.kind == PacketKind::Tcp
            && self.flags.contains(TcpFlags::ECE)
            && !self.flags.contains(TcpFlags::SYN)
    }
}
