//! SRv6 node forwarding: policy encapsulation with coloring and counting,
//! local SID behaviors, static routing, and the measurement agents.

pub mod agent;

use std::collections::BTreeMap;
use std::fmt;
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use crate::control::rpc::SRv6Behavior;
use crate::counters::{CounterEngine, Direction};
use crate::packet::sid::MAX_SIDS;
use crate::packet::{Color, Ipv6Prefix, Packet, Payload, SegmentId, SidList};
use crate::time::SimTime;

pub use agent::{Agents, Diagnostic, DiagnosticKind, ReflectorAgent, SenderAgent, Timer, TimerKind};

/// Index of a node within its network.
pub type NodeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncapMode {
    #[default]
    Encap,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrPolicy {
    pub destination: Ipv6Prefix,
    pub sid_list: SidList,
    pub encapmode: EncapMode,
    pub table: i32,
    pub device: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocalSidBehavior {
    /// Advance to the next segment.
    End,
    /// Remove outer header and SRH, forward the inner packet.
    EndDecap,
    /// Hand the UDP payload to the local measurement agents.
    EndOp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalSid {
    pub sid: SegmentId,
    pub behavior: LocalSidBehavior,
    /// The southbound entity this SID was created from, if any.
    pub entity: Option<SRv6Behavior>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Route {
    pub prefix: Ipv6Prefix,
    pub next_hop: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    NoRoute,
    Malformed,
    HopLimit,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::NoRoute => "no_route",
            DropReason::Malformed => "malformed",
            DropReason::HopLimit => "hop_limit",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ForwardingDecision {
    Forward { next_hop: NodeId, packet: Packet },
    /// Addressed to this node or one of its attached hosts.
    DeliverLocal(Packet),
    /// Reached an END.OP SID; the payload goes to the measurement agents.
    Punt(Packet),
    Drop { reason: DropReason, packet: Packet },
}

impl ForwardingDecision {
    pub fn packet(&self) -> &Packet {
        match self {
            ForwardingDecision::Forward { packet, .. }
            | ForwardingDecision::DeliverLocal(packet)
            | ForwardingDecision::Punt(packet)
            | ForwardingDecision::Drop { packet, .. } => packet,
        }
    }
}

pub struct Node {
    pub name: String,
    pub address: Ipv6Addr,
    engine: CounterEngine,
    policies: Vec<SrPolicy>,
    local_sids: BTreeMap<SegmentId, LocalSid>,
    /// Longest prefix first.
    routes: Vec<Route>,
    host_prefixes: Vec<Ipv6Prefix>,
    pub(crate) agents: Agents,
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Node")
            .field("name", &self.name)
            .field("address", &self.address)
            .field("policies", &self.policies.len())
            .field("local_sids", &self.local_sids.len())
            .field("routes", &self.routes.len())
            .finish_non_exhaustive()
    }
}

impl Node {
    pub fn new(name: impl Into<String>, address: Ipv6Addr) -> Self {
        Self {
            name: name.into(),
            address,
            engine: CounterEngine::default(),
            policies: Vec::new(),
            local_sids: BTreeMap::new(),
            routes: Vec::new(),
            host_prefixes: Vec::new(),
            agents: Agents::default(),
        }
    }

    pub fn engine(&self) -> &CounterEngine {
        &self.engine
    }

    pub fn policies(&self) -> &[SrPolicy] {
        &self.policies
    }

    pub fn local_sids(&self) -> impl Iterator<Item = &LocalSid> {
        self.local_sids.values()
    }

    pub fn local_sid(&self, sid: SegmentId) -> Option<&LocalSid> {
        self.local_sids.get(&sid)
    }

    /// Installs a policy, replacing any existing one for the same
    /// (table, destination). Returns the replaced policy.
    pub fn install_policy(&mut self, policy: SrPolicy) -> Option<SrPolicy> {
        let slot = self
            .policies
            .iter()
            .position(|p| p.table == policy.table && p.destination == policy.destination);
        match slot {
            Some(i) => Some(std::mem::replace(&mut self.policies[i], policy)),
            None => {
                self.policies.push(policy);
                None
            }
        }
    }

    pub fn remove_policy(&mut self, table: i32, destination: Ipv6Prefix) -> Option<SrPolicy> {
        let i = self
            .policies
            .iter()
            .position(|p| p.table == table && p.destination == destination)?;
        Some(self.policies.remove(i))
    }

    pub fn install_local_sid(&mut self, local: LocalSid) -> Option<LocalSid> {
        self.local_sids.insert(local.sid, local)
    }

    pub fn remove_local_sid(&mut self, sid: SegmentId) -> Option<LocalSid> {
        self.local_sids.remove(&sid)
    }

    pub fn add_route(&mut self, prefix: Ipv6Prefix, next_hop: NodeId) {
        self.routes.retain(|r| r.prefix != prefix);
        let at = self.routes.partition_point(|r| r.prefix.len() >= prefix.len());
        self.routes.insert(at, Route { prefix, next_hop });
    }

    pub fn routes(&self) -> &[Route] {
        &self.routes
    }

    pub fn add_host_prefix(&mut self, prefix: Ipv6Prefix) {
        if !self.host_prefixes.contains(&prefix) {
            self.host_prefixes.push(prefix);
        }
    }

    pub fn lookup_route(&self, dst: Ipv6Addr) -> Option<NodeId> {
        self.routes.iter().find(|r| r.prefix.contains(dst)).map(|r| r.next_hop)
    }

    /// Longest matching policy; equal lengths prefer the lower table id.
    pub fn match_policy(&self, dst: Ipv6Addr) -> Option<&SrPolicy> {
        self.policies
            .iter()
            .filter(|p| p.destination.contains(dst))
            .min_by_key(|p| (std::cmp::Reverse(p.destination.len()), p.table))
    }

    fn is_local(&self, dst: Ipv6Addr) -> bool {
        dst == self.address || self.host_prefixes.iter().any(|p| p.contains(dst))
    }

    /// Handles a packet arriving from a link or an attached host.
    pub fn process_packet(&self, packet: Packet) -> ForwardingDecision {
        if packet.srh.is_none() {
            if let Some(policy) = self.match_policy(packet.ipv6.dst) {
                let outer = self.apply_policy_encap(packet, policy);
                return self.dispatch(outer, false);
            }
        }
        self.dispatch(packet, true)
    }

    /// Handles a packet generated by this node (probes, responses).
    pub fn originate(&self, packet: Packet) -> ForwardingDecision {
        self.dispatch(packet, false)
    }

    fn dispatch(&self, packet: Packet, received: bool) -> ForwardingDecision {
        match self.local_sids.get(&SegmentId::from(packet.ipv6.dst)) {
            Some(local) => self.process_local_sid(packet, local.behavior),
            None => self.route(packet, received),
        }
    }

    fn route(&self, mut packet: Packet, received: bool) -> ForwardingDecision {
        if self.is_local(packet.ipv6.dst) {
            return ForwardingDecision::DeliverLocal(packet);
        }
        let Some(next_hop) = self.lookup_route(packet.ipv6.dst) else {
            return ForwardingDecision::Drop {
                reason: DropReason::NoRoute,
                packet,
            };
        };
        if received {
            if packet.ipv6.hop_limit <= 1 {
                return ForwardingDecision::Drop {
                    reason: DropReason::HopLimit,
                    packet,
                };
            }
            packet.ipv6.hop_limit -= 1;
        }
        ForwardingDecision::Forward { next_hop, packet }
    }

    /// Encapsulates `inner` along the policy's SID list, coloring and
    /// counting it when the flow is monitored.
    pub fn apply_policy_encap(&self, inner: Packet, policy: &SrPolicy) -> Packet {
        let mut outer = Packet::encapsulate(inner, self.address, &policy.sid_list);
        let color = self.engine.color_state().active_color;
        let size = outer.encoded_len() as u64;
        let counted = self
            .engine
            .count(Direction::Ingress, policy.sid_list.segments(), color, size, 0);
        if counted {
            outer.set_color(color, true);
        } else {
            outer.set_color(Color::R, false);
        }
        outer
    }

    pub fn process_local_sid(&self, mut packet: Packet, behavior: LocalSidBehavior) -> ForwardingDecision {
        let malformed = |packet| ForwardingDecision::Drop {
            reason: DropReason::Malformed,
            packet,
        };
        match behavior {
            LocalSidBehavior::End => match packet.srh_advance() {
                Ok(()) => self.dispatch(packet, false),
                Err(_) => malformed(packet),
            },
            LocalSidBehavior::EndDecap => {
                let Some(srh) = &packet.srh else {
                    return malformed(packet);
                };
                if srh.segments_left != 0 || !matches!(packet.payload, Payload::Ipv6(_)) {
                    return malformed(packet);
                }
                let (color, monitored) = packet.color();
                if monitored {
                    let wire = srh.wire_segments();
                    let mut path = [SegmentId::default(); MAX_SIDS];
                    for (slot, sid) in path.iter_mut().zip(wire.iter().rev()) {
                        *slot = *sid;
                    }
                    let size = packet.encoded_len() as u64;
                    self.engine
                        .count(Direction::Egress, &path[..wire.len()], color, size, 0);
                }
                match packet.decapsulate() {
                    Ok(inner) => self.route(inner, false),
                    Err(packet) => malformed(packet),
                }
            }
            LocalSidBehavior::EndOp => {
                if packet.udp_datagram().is_some() {
                    ForwardingDecision::Punt(packet)
                } else {
                    malformed(packet)
                }
            }
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        &self.agents.diagnostics
    }

    /// Timers requested since the last call, for the event loop to schedule.
    pub fn take_timers(&mut self) -> Vec<Timer> {
        std::mem::take(&mut self.agents.timers)
    }

    pub fn has_pending_timers(&self) -> bool {
        !self.agents.timers.is_empty()
    }

    pub(crate) fn record(&mut self, time: SimTime, kind: DiagnosticKind) {
        self.agents.diagnostics.push(Diagnostic { time, kind });
    }
}
