//! ECN-capable TCP model: handshake negotiation, CUBIC window growth, loss
//! recovery and the CE -> ECE -> CWR echo chain.

mod cubic;
mod ecn;
mod receiver;
mod sender;

pub use cubic::{cubic_k, cubic_window, tcp_friendly_window, CubicParams};
pub use ecn::{negotiate_ecn, negotiated, syn_ack_flags, syn_flags};
pub use receiver::Receiver;
pub use sender::{CongestionSignal, ConnectionState, Reduction, Sender, SenderOutput, MIN_RTO};
