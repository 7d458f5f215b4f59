use super::packet::Packet;
use super::time::SimTime;

/// Static parameters of one direction of a link.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkSpec {
    pub bandwidth_bps: u64,
    pub prop_delay: SimTime,
}

impl LinkSpec {
    pub fn new(bandwidth_bps: u64, prop_delay: SimTime) -> Self {
        assert!(bandwidth_bps > 0, "link bandwidth must be positive");
        LinkSpec {
            bandwidth_bps,
            prop_delay,
        }
    }

    pub fn mbps(mbps: f64, prop_delay: SimTime) -> Self {
        LinkSpec::new((mbps * 1e6).round() as u64, prop_delay)
    }

    /// Time to clock `bytes` onto the wire, rounded half-up to whole ns.
    pub fn serialization(&self, bytes: u32) -> SimTime {
        serialization_delay(bytes, self.bandwidth_bps)
    }
}

pub fn serialization_delay(bytes: u32, bandwidth_bps: u64) -> SimTime {
    assert!(bandwidth_bps > 0, "link bandwidth must be positive");
    // bytes * 8e9 / bps, rounded half-up, in exact integer arithmetic
    let num = bytes as u128 * 8 * 1_000_000_000;
    let bps = bandwidth_bps as u128;
    SimTime::from_nanos(((2 * num + bps) / (2 * bps)) as u64)
}

/// Serialization plus propagation delay of `packet` over `link`.
pub fn transmit_delay(packet: &Packet, link: &LinkSpec) -> SimTime {
    link.serialization(packet.size_bytes) + link.prop_delay
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::packet::{Ecn, FlowId, TcpFlags};

    fn sized(bytes: u32) -> Packet {
        Packet::tcp(FlowId::tcp(0, 1, 1, 2), bytes, Ecn::NotEct, TcpFlags::ACK, SimTime::ZERO)
    }

    #[test]
    fn full_segment_on_20_mbps() {
        let link = LinkSpec::new(20_000_000, SimTime::ZERO);
        assert_eq!(transmit_delay(&sized(1500), &link), SimTime::from_nanos(600_000));
    }

    #[test]
    fn empty_packet_costs_only_propagation() {
        let link = LinkSpec::new(7, SimTime::from_millis(20));
        assert_eq!(transmit_delay(&sized(0), &link), SimTime::from_millis(20));
    }

    #[test]
    fn full_segment_on_100_mbps_with_20_ms() {
        let link = LinkSpec::new(100_000_000, SimTime::from_millis(20));
        assert_eq!(transmit_delay(&sized(1500), &link), SimTime::from_micros(20_120));
    }

    #[test]
    fn rounding_is_half_up() {
        // 1 byte at 3 bps = 2.666..s; 1 byte at 16 Gbps = 0.5 ns
        assert_eq!(serialization_delay(1, 3), SimTime::from_nanos(2_666_666_667));
        assert_eq!(serialization_delay(1, 16_000_000_000), SimTime::from_nanos(1));
    }
}
