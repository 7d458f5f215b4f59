//! ECN capability negotiation in the TCP handshake.

use crate::simnet::TcpFlags;

/// An ECN-setup SYN carries ECE and CWR.
pub fn syn_flags(initiator_capable: bool) -> TcpFlags {
    if initiator_capable {
        TcpFlags::SYN | TcpFlags::ECE | TcpFlags::CWR
    } else {
        TcpFlags::SYN
    }
}

/// The SYN-ACK carries ECE only if the responder is capable and the SYN asked.
pub fn syn_ack_flags(responder_capable: bool, syn: TcpFlags) -> TcpFlags {
    let asked = syn.contains(TcpFlags::ECE) && syn.contains(TcpFlags::CWR);
    if responder_capable && asked {
        TcpFlags::SYN | TcpFlags::ACK | TcpFlags::ECE
    } else {
        TcpFlags::SYN | TcpFlags::ACK
    }
}

/// Initiator's view after receiving the SYN-ACK.
pub fn negotiated(syn_ack: TcpFlags) -> bool {
    syn_ack.contains(TcpFlags::ECE) && !syn_ack.contains(TcpFlags::CWR)
}

pub fn negotiate_ecn(initiator_capable: bool, responder_capable: bool) -> bool {
    let syn = syn_flags(initiator_capable);
    negotiated(syn_ack_flags(responder_capable, syn))
}
