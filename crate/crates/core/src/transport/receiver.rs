use std::collections::BTreeSet;

use super::ecn::syn_ack_flags;
use crate::simnet::{Ecn, FlowId, Packet, SimTime, TcpFlags, CONTROL_PACKET_BYTES};

/// Receiving side of a bulk transfer. ACKs every data segment.
pub struct Receiver {
    /// Flow of the data direction.
    flow: FlowId,
    ecn_capable: bool,
    ecn_negotiated: bool,
    /// Echo ECE on every ACK until a CWR arrives.
    ece_pending: bool,
    rcv_nxt: u64,
    out_of_order: BTreeSet<u64>,
    delivered_bytes: u64,
}

impl Receiver {
    pub fn new(flow: FlowId, ecn_capable: bool) -> Self {
        Receiver {
            flow,
            ecn_capable,
            ecn_negotiated: false,
            ece_pending: false,
            rcv_nxt: 0,
            out_of_order: BTreeSet::new(),
            delivered_bytes: 0,
        }
    }

    pub fn ecn_negotiated(&self) -> bool {
        self.ecn_negotiated
    }

    pub fn ece_pending(&self) -> bool {
        self.ece_pending
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// In-order bytes handed to the application so far.
    pub fn delivered_bytes(&self) -> u64 {
        self.delivered_bytes
    }

    pub fn on_syn(&mut self, syn: &Packet, now: SimTime) -> Packet {
        let flags = syn_ack_flags(self.ecn_capable, syn.flags);
        self.ecn_negotiated = flags.contains(TcpFlags::ECE);
        let mut p = Packet::tcp(self.flow.reversed(), CONTROL_PACKET_BYTES, Ecn::NotEct, flags, now);
        p.ts_echo = syn.sent_at;
        p
    }

    /// Absorbs a data segment and returns the pure ACK it triggers.
    pub fn on_data(&mut self, pkt: &Packet, now: SimTime) -> Packet {
        if pkt.flags.contains(TcpFlags::CWR) {
            self.ece_pending = false;
        }
        if self.ecn_negotiated && pkt.ecn() == Ecn::Ce {
            self.ece_pending = true;
        }
        if pkt.seq == self.rcv_nxt {
            self.rcv_nxt += 1;
            self.delivered_bytes += pkt.size_bytes as u64;
            while self.out_of_order.remove(&self.rcv_nxt) {
                self.rcv_nxt += 1;
                self.delivered_bytes += pkt.size_bytes as u64;
            }
        } else if pkt.seq > self.rcv_nxt {
            self.out_of_order.insert(pkt.seq);
        }
        let mut flags = TcpFlags::ACK;
        if self.ece_pending {
            flags.insert(TcpFlags::ECE);
        }
        let mut ack = Packet::tcp(self.flow.reversed(), CONTROL_PACKET_BYTES, Ecn::NotEct, flags, now);
        ack.ack = self.rcv_nxt;
        ack.ts_echo = pkt.sent_at;
        ack
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::syn_flags;

    fn flow() -> FlowId {
        FlowId::tcp(1, 5000, 2, 80)
    }

    fn negotiated_receiver() -> Receiver {
        let mut r = Receiver::new(flow(), true);
        let syn = Packet::tcp(flow(), 64, Ecn::NotEct, syn_flags(true), SimTime::ZERO);
        let sa = r.on_syn(&syn, SimTime::ZERO);
        assert!(sa.flags.contains(TcpFlags::SYN | TcpFlags::ACK | TcpFlags::ECE));
        r
    }

    fn data(seq: u64, ecn: Ecn, flags: TcpFlags) -> Packet {
        let mut p = Packet::tcp(flow(), 1500, ecn, TcpFlags::ACK | flags, SimTime::ZERO);
        p.seq = seq;
        p
    }

    #[test]
    fn ce_triggers_ece_until_cwr() {
        let mut r = negotiated_receiver();
        let mut d = data(0, Ecn::Ect0, TcpFlags::NONE);
        assert!(d.mark_ce());
        let a = r.on_data(&d, SimTime::ZERO);
        assert!(a.flags.contains(TcpFlags::ECE));
        for seq in 1..5 {
            let a = r.on_data(&data(seq, Ecn::Ect0, TcpFlags::NONE), SimTime::ZERO);
            assert!(a.flags.contains(TcpFlags::ECE), "echo must persist");
        }
        let a = r.on_data(&data(5, Ecn::Ect0, TcpFlags::CWR), SimTime::ZERO);
        assert!(!a.flags.contains(TcpFlags::ECE));
        assert!(!r.ece_pending());
    }

    #[test]
    fn plain_data_gets_plain_ack() {
        let mut r = negotiated_receiver();
        let a = r.on_data(&data(0, Ecn::Ect0, TcpFlags::NONE), SimTime::ZERO);
        assert_eq!(a.flags, TcpFlags::ACK);
        assert_eq!(a.ecn(), Ecn::NotEct);
        assert_eq!(a.size_bytes, 64);
        assert_eq!(a.ack, 1);
    }

    #[test]
    fn out_of_order_segments_are_reassembled() {
        let mut r = negotiated_receiver();
        r.on_data(&data(0, Ecn::Ect0, TcpFlags::NONE), SimTime::ZERO);
        let dup = r.on_data(&data(2, Ecn::Ect0, TcpFlags::NONE), SimTime::ZERO);
        assert_eq!(dup.ack, 1);
        let a = r.on_data(&data(1, Ecn::NotEct, TcpFlags::NONE), SimTime::ZERO);
        assert_eq!(a.ack, 3);
        assert_eq!(r.delivered_bytes(), 4500);
    }
}
