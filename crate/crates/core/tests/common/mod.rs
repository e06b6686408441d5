#![allow(dead_code)]

use std::collections::{BTreeMap, HashSet};
use std::net::Ipv6Addr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use srv6pm::collect::{write_records, MeasurementRecord, RecordFormat};
use srv6pm::control::PathDirection;
use srv6pm::packet::{Ipv6Prefix, SegmentId, SidList};
use srv6pm::sim::{
    FlowConfig, HostConfig, LinkConfig, LocalSidConfig, NodeConfig, PolicyConfig, ResponseModeConfig, ScenarioConfig,
    SessionConfig,
};

pub const INTERVAL: f64 = 1.0;
pub const MARGIN: f64 = 0.5;

fn addr(s: String) -> Ipv6Addr {
    s.parse().unwrap()
}

fn sid(s: String) -> SegmentId {
    SegmentId::from(addr(s))
}

fn prefix(s: String) -> Ipv6Prefix {
    s.parse().unwrap()
}

/// A random connected network of 2..=10 nodes with one or two monitored
/// host pairs. Paths have 1..=16 SIDs, links lose 0..5% of packets and the
/// worst path delay stays well below the delay margin.
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed);
    let n = rng.random_range(2..=10usize);
    let name = |i: usize| format!("R{}", i + 1);
    let mut nodes: Vec<NodeConfig> = (0..n)
        .map(|i| NodeConfig {
            id: name(i),
            address: addr(format!("fcff:{}::1", i + 1)),
            locator: prefix(format!("fcff:{}::/32", i + 1)),
            end_sid: Some(sid(format!("fcff:{}::100", i + 1))),
            decap_sid: None,
            punt_sid: Some(sid(format!("fcff:{}::ff", i + 1))),
            host_prefixes: vec![],
            local_sids: vec![],
        })
        .collect();

    let mut pairs = HashSet::new();
    let mut links = Vec::new();
    let mut add_link = |rng: &mut ChaCha8Rng, a: usize, b: usize| {
        let key = (a.min(b), a.max(b));
        if a == b || !pairs.insert(key) {
            return;
        }
        let loss_rate = if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..0.05) };
        let jitter = if rng.random_bool(0.3) { rng.random_range(0.0..0.0002) } else { 0.0 };
        links.push(LinkConfig {
            a: name(a),
            b: name(b),
            delay: rng.random_range(0.0001..0.001),
            loss_rate,
            jitter,
        });
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        add_link(&mut rng, i, j);
    }
    for _ in 0..rng.random_range(0..=n) {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        add_link(&mut rng, a, b);
    }

    let mut hosts = Vec::new();
    let mut policies = Vec::new();
    let mut flows = Vec::new();
    let mut sessions = Vec::new();
    for k in 1..=rng.random_range(1..=2u32) {
        let s = rng.random_range(0..n);
        let r = (s + rng.random_range(1..n)) % n;
        let mut waypoints = Vec::new();
        let mut prev = s;
        for _ in 0..rng.random_range(0..=15usize) {
            let mut w = rng.random_range(0..n);
            while w == prev {
                w = rng.random_range(0..n);
            }
            waypoints.push(w);
            prev = w;
        }
        if prev == r && !waypoints.is_empty() {
            // Keep consecutive SIDs on different nodes.
            waypoints.pop();
        }
        let decap = |node: usize| sid(format!("fcff:{}::d6:{k}", node + 1));
        let end = |node: usize| sid(format!("fcff:{}::100", node + 1));
        let forward: Vec<SegmentId> = waypoints.iter().map(|&w| end(w)).chain([decap(r)]).collect();
        let reverse: Vec<SegmentId> = waypoints.iter().rev().map(|&w| end(w)).chain([decap(s)]).collect();
        for node in [s, r] {
            nodes[node].local_sids.push(LocalSidConfig {
                sid: decap(node),
                action: "End.DT6".into(),
            });
            nodes[node].host_prefixes.push(prefix(format!("fd00:{k}:{}::/64", node + 1)));
            hosts.push(HostConfig {
                name: format!("h{k}-{}", node + 1),
                node: name(node),
                address: addr(format!("fd00:{k}:{}::2", node + 1)),
            });
        }
        let sdlist = SidList::new(forward).unwrap();
        let sdlistreverse = SidList::new(reverse).unwrap();
        policies.push(PolicyConfig {
            node: name(s),
            destination: prefix(format!("fd00:{k}:{}::/64", r + 1)),
            sid_list: sdlist.clone(),
            table: 0,
        });
        policies.push(PolicyConfig {
            node: name(r),
            destination: prefix(format!("fd00:{k}:{}::/64", s + 1)),
            sid_list: sdlistreverse.clone(),
            table: 0,
        });
        for (src, dst) in [(s, r), (r, s)] {
            flows.push(FlowConfig {
                src: format!("h{k}-{}", src + 1),
                dst: format!("h{k}-{}", dst + 1),
                rate: rng.random_range(100.0..400.0),
                duration: rng.random_range(2.0..4.0),
                start: rng.random_range(0.0..0.5),
                payload_size: rng.random_range(0..=512),
            });
        }
        sessions.push(SessionConfig {
            measure_id: k,
            sender: name(s),
            reflector: name(r),
            sdlist,
            sdlistreverse,
            interval_duration: INTERVAL,
            delay_margin: MARGIN,
            ss_udp_port: 40000 + 2 * k as u16,
            refl_udp_port: 40001 + 2 * k as u16,
            response_mode: if rng.random_bool(0.25) {
                ResponseModeConfig::OutOfBand
            } else {
                ResponseModeConfig::InBand
            },
        });
    }

    ScenarioConfig {
        seed,
        until: None,
        nodes,
        links,
        policies,
        hosts,
        flows,
        sessions,
    }
}

/// For every (session, direction, color): the interval losses add up to
/// the latest cumulative loss.
pub fn interval_sums_match(records: &[MeasurementRecord]) -> Result<usize, String> {
    let mut groups: BTreeMap<(u32, PathDirection, String), (i64, u64, i64)> = BTreeMap::new();
    for r in records {
        let g = groups
            .entry((r.measure_id, r.direction, r.color.to_string()))
            .or_insert((0, 0, 0));
        g.0 += r.interval_loss;
        if r.epoch >= g.1 {
            g.1 = r.epoch;
            g.2 = r.cumulative_loss;
        }
    }
    for (key, (sum, _, cumulative)) in &groups {
        if sum != cumulative {
            return Err(format!("{key:?}: interval sum {sum} != cumulative {cumulative}"));
        }
    }
    Ok(groups.len())
}

pub fn export_bytes(records: &[MeasurementRecord], format: RecordFormat) -> Vec<u8> {
    let mut out = Vec::new();
    write_records(records, &mut out, format).unwrap();
    out
}

/// Two routers, one link, one host each, a session from A to B with T = 1 s.
pub fn two_nodes(loss: f64, rate: f64, duration: f64, response_mode: &str) -> ScenarioConfig {
    let text = format!(
        r#"
        seed = 7
        [[nodes]]
        id = "A"
        address = "fcff:1::1"
        locator = "fcff:1::/32"
        decap_sid = "fcff:1::d6"
        punt_sid = "fcff:1::ff"
        host_prefixes = ["fd00:1::/64"]
        [[nodes]]
        id = "B"
        address = "fcff:2::1"
        locator = "fcff:2::/32"
        decap_sid = "fcff:2::d6"
        punt_sid = "fcff:2::ff"
        host_prefixes = ["fd00:2::/64"]
        [[links]]
        a = "A"
        b = "B"
        delay = 0.002
        loss_rate = {loss}
        [[hosts]]
        name = "ha"
        node = "A"
        address = "fd00:1::2"
        [[hosts]]
        name = "hb"
        node = "B"
        address = "fd00:2::2"
        [[policies]]
        node = "A"
        destination = "fd00:2::/64"
        sid_list = ["fcff:2::d6"]
        [[policies]]
        node = "B"
        destination = "fd00:1::/64"
        sid_list = ["fcff:1::d6"]
        [[flows]]
        src = "ha"
        dst = "hb"
        rate = {rate}
        duration = {duration}
        [[flows]]
        src = "hb"
        dst = "ha"
        rate = {rate}
        duration = {duration}
        [[sessions]]
        measure_id = 1
        sender = "A"
        reflector = "B"
        sdlist = ["fcff:2::d6"]
        sdlistreverse = ["fcff:1::d6"]
        interval_duration = 1.0
        ss_udp_port = 40000
        refl_udp_port = 40001
        response_mode = "{response_mode}"
        "#
    );
    ScenarioConfig::from_toml(&text).unwrap()
}
