//! Scenario files.
//!
//! A scenario is a TOML document:
//!
//! ```toml
//! seed = 1
//! until = 70.0            # optional, seconds
//!
//! [[nodes]]
//! id = "R1"
//! address = "fcff:1::1"
//! locator = "fcff:1::/32"
//! end_sid = "fcff:1::100"   # optional local SIDs
//! decap_sid = "fcff:1::d6"
//! punt_sid = "fcff:1::ff"
//! host_prefixes = ["fd00:1::/64"]
//! local_sids = [{ sid = "fcff:1::d6:8", action = "End.DT6" }]   # optional extras
//!
//! [[links]]
//! a = "R1"
//! b = "R2"
//! delay = 0.001           # seconds
//! loss_rate = 0.001
//! jitter = 0.0            # optional, uniform extra delay bound
//!
//! [[policies]]
//! node = "R1"
//! destination = "fd00:8::/64"
//! sid_list = ["fcff:2::100", "fcff:8::d6"]
//!
//! [[hosts]]
//! name = "h1"
//! node = "R1"
//! address = "fd00:1::2"
//!
//! [[flows]]
//! src = "h1"
//! dst = "h8"
//! rate = 1000.0           # packets per second
//! duration = 60.0
//! start = 0.0             # optional
//! payload_size = 64       # optional
//!
//! [[sessions]]
//! measure_id = 1
//! sender = "R1"
//! reflector = "R8"
//! sdlist = ["fcff:2::100", "fcff:8::d6"]
//! sdlistreverse = ["fcff:2::100", "fcff:1::d6"]
//! interval_duration = 10.0
//! delay_margin = 5.0      # optional, defaults to half the interval
//! ss_udp_port = 50000
//! refl_udp_port = 50001
//! response_mode = "in-band"   # or "out-of-band"
//! ```

use std::collections::{HashMap, HashSet};
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::packet::{Ipv6Prefix, SegmentId, SidList};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<f64>,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub policies: Vec<PolicyConfig>,
    #[serde(default)]
    pub hosts: Vec<HostConfig>,
    #[serde(default)]
    pub flows: Vec<FlowConfig>,
    #[serde(default)]
    pub sessions: Vec<SessionConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub id: String,
    pub address: Ipv6Addr,
    pub locator: Ipv6Prefix,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_sid: Option<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decap_sid: Option<SegmentId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub punt_sid: Option<SegmentId>,
    #[serde(default)]
    pub host_prefixes: Vec<Ipv6Prefix>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub local_sids: Vec<LocalSidConfig>,
}

/// An additional local SID; `action` is one of `End`, `End.DT6`, `End.OP`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalSidConfig {
    pub sid: SegmentId,
    pub action: String,
}

impl NodeConfig {
    /// Every local SID of the node with its action.
    pub fn all_local_sids(&self) -> Vec<(SegmentId, &str)> {
        let named = [(self.end_sid, "End"), (self.decap_sid, "End.DT6"), (self.punt_sid, "End.OP")];
        named
            .into_iter()
            .filter_map(|(sid, action)| sid.map(|s| (s, action)))
            .chain(self.local_sids.iter().map(|l| (l.sid, l.action.as_str())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    pub delay: f64,
    #[serde(default)]
    pub loss_rate: f64,
    #[serde(default)]
    pub jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub node: String,
    pub destination: Ipv6Prefix,
    pub sid_list: SidList,
    #[serde(default)]
    pub table: i32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub name: String,
    pub node: String,
    pub address: Ipv6Addr,
}

fn default_payload() -> usize {
    64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub src: String,
    pub dst: String,
    pub rate: f64,
    pub duration: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default = "default_payload")]
    pub payload_size: usize,
}

impl FlowConfig {
    /// Packets the flow emits: one every `1/rate` seconds in
    /// `[start, start + duration)`.
    pub fn packet_count(&self) -> u64 {
        (self.rate * self.duration + 1e-9).floor() as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseModeConfig {
    #[default]
    InBand,
    OutOfBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub measure_id: u32,
    pub sender: String,
    pub reflector: String,
    pub sdlist: SidList,
    pub sdlistreverse: SidList,
    pub interval_duration: f64,
    #[serde(default)]
    pub delay_margin: f64,
    pub ss_udp_port: u16,
    pub refl_udp_port: u16,
    #[serde(default)]
    pub response_mode: ResponseModeConfig,
}

/// Largest payload a flow may carry.
pub const MAX_PAYLOAD: usize = 9000;

fn invalid(msg: String) -> SimError {
    SimError::Validation(msg)
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let config: ScenarioConfig = toml::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut ids = HashSet::new();
        let mut addresses = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                return Err(invalid(format!("duplicate node id {:?}", n.id)));
            }
            if !addresses.insert(n.address) {
                return Err(invalid(format!("duplicate node address {}", n.address)));
            }
            let sids = n.all_local_sids();
            let set: HashSet<_> = sids.iter().map(|(sid, _)| sid).collect();
            if set.len() != sids.len() {
                return Err(invalid(format!("node {}: local SIDs must differ", n.id)));
            }
            if let Some((_, action)) = sids.iter().find(|(_, a)| !["End", "End.DT6", "End.OP"].contains(a)) {
                return Err(invalid(format!("node {}: unsupported local SID action {action:?}", n.id)));
            }
        }
        let node = |id: &str, what: &str| -> Result<&NodeConfig, SimError> {
            self.nodes
                .iter()
                .find(|n| n.id == id)
                .ok_or_else(|| invalid(format!("{what} references unknown node {id:?}")))
        };
        let mut pairs = HashSet::new();
        for (i, l) in self.links.iter().enumerate() {
            node(&l.a, "link")?;
            node(&l.b, "link")?;
            if l.a == l.b {
                return Err(invalid(format!("link {i} connects {} to itself", l.a)));
            }
            let pair = if l.a < l.b { (&l.a, &l.b) } else { (&l.b, &l.a) };
            if !pairs.insert(pair) {
                return Err(invalid(format!("duplicate link {}-{}", l.a, l.b)));
            }
            if !(l.delay.is_finite() && l.delay >= 0.0) {
                return Err(invalid(format!("link {}-{}: delay {} invalid", l.a, l.b, l.delay)));
            }
            if !(0.0..=1.0).contains(&l.loss_rate) {
                return Err(invalid(format!(
                    "link {}-{}: loss_rate {} outside [0, 1]",
                    l.a, l.b, l.loss_rate
                )));
            }
            if !(l.jitter.is_finite() && l.jitter >= 0.0) {
                return Err(invalid(format!("link {}-{}: jitter {} invalid", l.a, l.b, l.jitter)));
            }
        }
        let mut destinations = HashSet::new();
        for p in &self.policies {
            node(&p.node, "policy")?;
            if !destinations.insert((&p.node, p.table, p.destination)) {
                return Err(invalid(format!(
                    "node {}: two policies for {} in table {}",
                    p.node, p.destination, p.table
                )));
            }
        }
        let mut hosts = HashMap::new();
        for h in &self.hosts {
            node(&h.node, "host")?;
            if hosts.insert(h.name.as_str(), h).is_some() {
                return Err(invalid(format!("duplicate host {:?}", h.name)));
            }
        }
        for f in &self.flows {
            for h in [&f.src, &f.dst] {
                if !hosts.contains_key(h.as_str()) {
                    return Err(invalid(format!("flow references unknown host {h:?}")));
                }
            }
            if !(f.rate.is_finite() && f.rate > 0.0) {
                return Err(invalid(format!("flow {}->{}: rate {} must be positive", f.src, f.dst, f.rate)));
            }
            if !(f.duration.is_finite() && f.duration >= 0.0 && f.start.is_finite() && f.start >= 0.0) {
                return Err(invalid(format!("flow {}->{}: bad start or duration", f.src, f.dst)));
            }
            if f.payload_size > MAX_PAYLOAD {
                return Err(invalid(format!("flow {}->{}: payload over {MAX_PAYLOAD}", f.src, f.dst)));
            }
        }
        let mut measure_ids = HashSet::new();
        let mut monitored = HashMap::new();
        for s in &self.sessions {
            if !measure_ids.insert(s.measure_id) {
                return Err(invalid(format!("duplicate measure_id {}", s.measure_id)));
            }
            // Counters are keyed by SID list alone, so two sessions must not share one.
            for list in [&s.sdlist, &s.sdlistreverse] {
                if let Some(other) = monitored.insert(list, s.measure_id) {
                    return Err(invalid(format!(
                        "sessions {other} and {} both monitor [{list}]",
                        s.measure_id
                    )));
                }
            }
            for (id, role) in [(&s.sender, "sender"), (&s.reflector, "reflector")] {
                if node(id, "session")?.punt_sid.is_none() {
                    return Err(invalid(format!("session {}: {role} {id} has no punt_sid", s.measure_id)));
                }
            }
            if !(s.interval_duration.is_finite() && s.interval_duration > 0.0) {
                return Err(invalid(format!("session {}: interval_duration must be positive", s.measure_id)));
            }
        }
        if let Some(until) = self.until {
            if !(until.is_finite() && until >= 0.0) {
                return Err(invalid(format!("until {until} invalid")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        seed = 3
        [[nodes]]
        id = "A"
        address = "fcff:1::1"
        locator = "fcff:1::/32"
        [[nodes]]
        id = "B"
        address = "fcff:2::1"
        locator = "fcff:2::/32"
        [[links]]
        a = "A"
        b = "B"
        delay = 0.001
    "#;

    #[test]
    fn parses_minimal() {
        let config = ScenarioConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(config.seed, 3);
        assert_eq!(config.links[0].loss_rate, 0.0);
        let again = ScenarioConfig::from_toml(&config.to_toml()).unwrap();
        assert_eq!(again, config);
    }

    #[test]
    fn rejects_bad_loss_rate() {
        let text = MINIMAL.replace("delay = 0.001", "delay = 0.001\nloss_rate = 1.5");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(SimError::Validation(_))));
    }

    #[test]
    fn rejects_dangling_refs() {
        let text = MINIMAL.replace("b = \"B\"", "b = \"C\"");
        assert!(matches!(ScenarioConfig::from_toml(&text), Err(SimError::Validation(_))));
        let flows = "[[flows]]\nsrc = \"h1\"\ndst = \"h2\"\nrate = 1.0\nduration = 1.0\n";
        assert!(matches!(ScenarioConfig::from_toml(flows), Err(SimError::Validation(_))));
    }

    #[test]
    fn rejects_syntax_errors() {
        assert!(matches!(ScenarioConfig::from_toml("seed = ["), Err(SimError::Parse(_))));
        assert!(matches!(ScenarioConfig::from_toml("colour = 1"), Err(SimError::Parse(_))));
    }

    #[test]
    fn packet_count_is_rate_times_duration() {
        let flow = FlowConfig {
            src: "a".into(),
            dst: "b".into(),
            rate: 100.0,
            duration: 60.0,
            start: 0.0,
            payload_size: 64,
        };
        assert_eq!(flow.packet_count(), 6000);
        assert_eq!(FlowConfig { duration: 0.0, ..flow }.packet_count(), 0);
    }
}
