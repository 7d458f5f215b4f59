//! Dumbbell topology: hosts B behind edge router R1, hosts A behind R2, one
//! bottleneck R1 <-> R2, plus a monitor pair straddling the bottleneck.

use rand::Rng;

use super::link::LinkSpec;
use super::packet::NodeId;
use super::rng::SimRng;
use super::time::SimTime;

pub const R1: NodeId = 0;
pub const R2: NodeId = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    R1,
    R2,
    /// Sender-side host, index into the pair list.
    HostB(usize),
    /// Receiver-side host.
    HostA(usize),
    MonitorB,
    MonitorA,
}

/// Link parameters and flow start times for every host pair.
#[derive(Clone, Debug, PartialEq)]
pub struct TopologySpec {
    pub b_links: Vec<LinkSpec>,
    pub a_links: Vec<LinkSpec>,
    pub bottleneck: LinkSpec,
    pub monitor_b: LinkSpec,
    pub monitor_a: LinkSpec,
    pub start_times: Vec<SimTime>,
}

/// Ranges for the randomized scenario. Bandwidth in Mbps, delay in ms,
/// start in seconds; all drawn uniformly and inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandomRanges {
    pub bw_mbps: (f64, f64),
    pub delay_ms: (f64, f64),
    pub start_s: (f64, f64),
}

impl Default for RandomRanges {
    fn default() -> Self {
        RandomRanges {
            bw_mbps: (50.0, 200.0),
            delay_ms: (1.0, 20.0),
            start_s: (0.0, 10.0),
        }
    }
}

fn draw(rng: &mut SimRng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

impl TopologySpec {
    /// Every pair uses the same access links. Flow starts are spread
    /// uniformly over `[0, start_jitter)` to avoid phase-locked slow starts.
    pub fn uniform(
        pairs: usize,
        b_link: LinkSpec,
        a_link: LinkSpec,
        bottleneck: LinkSpec,
        start_jitter: SimTime,
        rng: &mut SimRng,
    ) -> Self {
        let start_times = (0..pairs)
            .map(|_| {
                if start_jitter == SimTime::ZERO {
                    SimTime::ZERO
                } else {
                    SimTime::from_nanos(rng.random_range(0..start_jitter.as_nanos()))
                }
            })
            .collect();
        TopologySpec {
            b_links: vec![b_link; pairs],
            a_links: vec![a_link; pairs],
            bottleneck,
            monitor_b: b_link,
            monitor_a: a_link,
            start_times,
        }
    }

    /// Random host links and start times; the bottleneck and monitor links
    /// stay fixed.
    pub fn randomized(
        pairs: usize,
        ranges: RandomRanges,
        bottleneck: LinkSpec,
        monitor_b: LinkSpec,
        monitor_a: LinkSpec,
        rng: &mut SimRng,
    ) -> Self {
        let link = |rng: &mut SimRng| {
            let bw = draw(rng, ranges.bw_mbps);
            let d = draw(rng, ranges.delay_ms);
            LinkSpec::mbps(bw, SimTime::from_secs_f64(d / 1e3))
        };
        let b_links: Vec<_> = (0..pairs).map(|_| link(rng)).collect();
        let a_links: Vec<_> = (0..pairs).map(|_| link(rng)).collect();
        let start_times = (0..pairs)
            .map(|_| SimTime::from_secs_f64(draw(rng, ranges.start_s)))
            .collect();
        TopologySpec {
            b_links,
            a_links,
            bottleneck,
            monitor_b,
            monitor_a,
            start_times,
        }
    }

    pub fn pairs(&self) -> usize {
        self.b_links.len()
    }
}

/// Node numbering and the directed-channel table derived from a spec.
///
/// Each duplex link `k` becomes channels `2k` (toward the router side listed
/// second) and `2k + 1` (back). Link 0 is the bottleneck, so channel 0 is
/// R1 -> R2.
#[derive(Clone, Debug)]
pub struct Topology {
    pairs: usize,
    links: Vec<(NodeId, NodeId, LinkSpec)>,
}

impl Topology {
    pub fn new(spec: &TopologySpec) -> Self {
        assert_eq!(spec.a_links.len(), spec.b_links.len(), "hosts must pair up");
        assert_eq!(spec.start_times.len(), spec.b_links.len());
        let pairs = spec.pairs();
        let mut t = Topology { pairs, links: Vec::new() };
        t.links.push((R1, R2, spec.bottleneck));
        for i in 0..pairs {
            t.links.push((t.host_b(i), R1, spec.b_links[i]));
        }
        for i in 0..pairs {
            t.links.push((t.host_a(i), R2, spec.a_links[i]));
        }
        t.links.push((t.monitor_b(), R1, spec.monitor_b));
        t.links.push((t.monitor_a(), R2, spec.monitor_a));
        t
    }

    pub fn pairs(&self) -> usize {
        self.pairs
    }

    pub fn node_count(&self) -> usize {
        2 * self.pairs + 4
    }

    pub fn host_b(&self, i: usize) -> NodeId {
        (2 + i) as NodeId
    }

    pub fn host_a(&self, i: usize) -> NodeId {
        (2 + self.pairs + i) as NodeId
    }

    pub fn monitor_b(&self) -> NodeId {
        (2 + 2 * self.pairs) as NodeId
    }

    pub fn monitor_a(&self) -> NodeId {
        (3 + 2 * self.pairs) as NodeId
    }

    pub fn role(&self, node: NodeId) -> Role {
        let n = node as usize;
        let p = self.pairs;
        match n {
            0 => Role::R1,
            1 => Role::R2,
            _ if n < 2 + p => Role::HostB(n - 2),
            _ if n < 2 + 2 * p => Role::HostA(n - 2 - p),
            _ if n == 2 + 2 * p => Role::MonitorB,
            _ if n == 3 + 2 * p => Role::MonitorA,
            _ => panic!("unknown node {node}"),
        }
    }

    /// True for nodes on R1's side of the bottleneck.
    pub fn on_b_side(&self, node: NodeId) -> bool {
        matches!(self.role(node), Role::R1 | Role::HostB(_) | Role::MonitorB)
    }

    pub fn links(&self) -> &[(NodeId, NodeId, LinkSpec)] {
        &self.links
    }

    /// Router a host or monitor attaches to.
    pub fn router_of(&self, node: NodeId) -> NodeId {
        if self.on_b_side(node) {
            R1
        } else {
            R2
        }
    }

    /// Link index joining `node` to its router (hosts and monitors only).
    fn access_link(&self, node: NodeId) -> usize {
        match self.role(node) {
            Role::HostB(i) => 1 + i,
            Role::HostA(i) => 1 + self.pairs + i,
            Role::MonitorB => 1 + 2 * self.pairs,
            Role::MonitorA => 2 + 2 * self.pairs,
            Role::R1 | Role::R2 => panic!("routers have no access link"),
        }
    }

    /// Outgoing channel from `at` toward destination `dst`.
    pub fn next_channel(&self, at: NodeId, dst: NodeId) -> usize {
        match self.role(at) {
            Role::R1 => {
                if self.on_b_side(dst) {
                    2 * self.access_link(dst) + 1
                } else {
                    0
                }
            }
            Role::R2 => {
                if self.on_b_side(dst) {
                    1
                } else {
                    2 * self.access_link(dst) + 1
                }
            }
            _ => 2 * self.access_link(at),
        }
    }

    /// `(from, to, spec)` of a directed channel.
    pub fn channel(&self, chan: usize) -> (NodeId, NodeId, LinkSpec) {
        let (a, b, spec) = self.links[chan / 2];
        if chan.is_multiple_of(2) {
            (a, b, spec)
        } else {
            (b, a, spec)
        }
    }

    pub fn channel_count(&self) -> usize {
        2 * self.links.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::rng::seeded_rng;

    fn fixed() -> Topology {
        let spec = TopologySpec::uniform(
            20,
            LinkSpec::mbps(200.0, SimTime::from_millis(20)),
            LinkSpec::mbps(100.0, SimTime::ZERO),
            LinkSpec::mbps(20.0, SimTime::ZERO),
            SimTime::ZERO,
            &mut seeded_rng(1),
        );
        Topology::new(&spec)
    }

    #[test]
    fn exactly_one_bottleneck_between_routers() {
        let t = fixed();
        let between: Vec<_> = t
            .links()
            .iter()
            .filter(|(a, b, _)| (*a == R1 && *b == R2) || (*a == R2 && *b == R1))
            .collect();
        assert_eq!(between.len(), 1);
        assert_eq!(t.channel(0).0, R1);
        assert_eq!(t.channel(0).1, R2);
    }

    #[test]
    fn every_host_attaches_to_one_router() {
        let t = fixed();
        for node in 2..t.node_count() as NodeId {
            let attached: Vec<_> = t
                .links()
                .iter()
                .filter(|(a, b, _)| *a == node || *b == node)
                .collect();
            assert_eq!(attached.len(), 1, "node {node}");
            let (a, b, _) = attached[0];
            let other = if *a == node { *b } else { *a };
            assert_eq!(other, t.router_of(node));
        }
    }

    #[test]
    fn routes_cross_the_bottleneck() {
        let t = fixed();
        let (b0, a0) = (t.host_b(0), t.host_a(0));
        let c = t.next_channel(b0, a0);
        assert_eq!(t.channel(c).1, R1);
        assert_eq!(t.next_channel(R1, a0), 0);
        let c = t.next_channel(R2, a0);
        assert_eq!(t.channel(c).1, a0);
        assert_eq!(t.next_channel(R2, b0), 1);
        let c = t.next_channel(R1, b0);
        assert_eq!(t.channel(c).1, b0);
    }

    #[test]
    fn random_draws_respect_ranges() {
        let spec = TopologySpec::randomized(
            20,
            RandomRanges::default(),
            LinkSpec::mbps(10.0, SimTime::ZERO),
            LinkSpec::mbps(200.0, SimTime::from_millis(20)),
            LinkSpec::mbps(100.0, SimTime::ZERO),
            &mut seeded_rng(3),
        );
        for l in spec.b_links.iter().chain(&spec.a_links) {
            assert!((50_000_000..=200_000_000).contains(&l.bandwidth_bps));
            assert!(l.prop_delay >= SimTime::from_millis(1) && l.prop_delay <= SimTime::from_millis(20));
        }
        assert!(spec.start_times.iter().all(|&s| s <= SimTime::from_secs(10)));
        assert_eq!(spec.bottleneck.bandwidth_bps, 10_000_000);
    }
}
