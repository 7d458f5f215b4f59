//! Deterministic discrete-event network simulation.

mod event;
mod link;
mod network;
mod packet;
pub mod rng;
mod time;
pub mod topology;

pub use event::EventQueue;
pub use link::{serialization_delay, transmit_delay, LinkSpec};
pub use network::{EcnAudit, EpochStats, Network, NetworkConfig};
pub use packet::{Ecn, FlowId, NodeId, Packet, PacketKind, TcpFlags, CONTROL_PACKET_BYTES, DATA_PACKET_BYTES};
pub use rng::{seeded_rng, stream, sub_seed, SimRng};
pub use time::SimTime;
pub use topology::{RandomRanges, Role, Topology, TopologySpec};
