mod common;

use std::sync::{Arc, Mutex};

use srv6pm::collect::{MeasurementRecord, MeasurementSink};
use srv6pm::control::PathDirection;
use srv6pm::counters::FlowKey;
use srv6pm::dataplane::ForwardingDecision;
use srv6pm::packet::{Color, Packet, SidList};
use srv6pm::sim::{preset, ScenarioConfig, Simulation};
use srv6pm::time::SimTime;

use common::two_nodes;

fn sids(s: &str) -> SidList {
    s.parse().unwrap()
}

fn paper(seed: u64) -> Simulation {
    let mut config = ScenarioConfig::from_toml(preset::preset("paper-experiment").unwrap().text).unwrap();
    config.seed = seed;
    Simulation::from_config(config).unwrap()
}

#[test]
fn inner_packet_survives_path_unchanged() {
    let sim = paper(1);
    let nodes = sim.network().nodes();
    let src = "fd00:1::2".parse().unwrap();
    let dst = "fd00:8::2".parse().unwrap();
    let original = Packet::udp(src, dst, 5000, 5001, (0..200u8).collect());
    let mut at = sim.network().id("R1").unwrap();
    let mut packet = original.clone();
    let mut visited = vec![at];
    let delivered = loop {
        match nodes[at].process_packet(packet) {
            ForwardingDecision::Forward { next_hop, packet: p } => {
                at = next_hop;
                packet = p;
                visited.push(at);
                assert!(visited.len() < 16, "routing loop {visited:?}");
            }
            ForwardingDecision::DeliverLocal(p) => break p,
            other => panic!("unexpected {other:?} at {}", nodes[at].name),
        }
    };
    assert_eq!(nodes[at].name, "R8");
    let names: Vec<&str> = visited.iter().map(|&i| nodes[i].name.as_str()).collect();
    assert_eq!(names, ["R1", "R2", "R7", "R8"]);
    assert!(delivered.srh.is_none());
    assert_eq!(delivered.encode(), original.encode());
}

#[test]
fn stamping_follows_block_boundaries() {
    let mut sim = Simulation::from_config(two_nodes(0.0, 100.0, 5.0, "in-band")).unwrap();
    sim.run();
    let series = sim.oracle().series(&sids("fcff:2::d6"));
    let sent: Vec<(u64, u64)> = series.iter().map(|(e, entry)| (*e, entry.sent)).collect();
    assert_eq!(sent, [(0, 100), (1, 100), (2, 100), (3, 100), (4, 100)]);
}

#[test]
fn counters_equal_oracle_per_color() {
    let mut sim = Simulation::from_config(two_nodes(0.03, 300.0, 6.0, "in-band")).unwrap();
    sim.run();
    let a = sim.node("A").unwrap();
    let b = sim.node("B").unwrap();
    for (list, ingress, egress) in [("fcff:2::d6", a, b), ("fcff:1::d6", b, a)] {
        let list = sids(list);
        let series = sim.oracle().series(&list);
        for color in Color::ALL {
            let same: Vec<_> = series.iter().filter(|(e, _)| Color::for_epoch(*e) == color).collect();
            let sent: u64 = same.iter().map(|(_, e)| e.sent).sum();
            let delivered: u64 = same.iter().map(|(_, e)| e.delivered).sum();
            let tx = ingress.engine().read_counters(&FlowKey::ingress(list.clone()), color).unwrap();
            let rx = egress.engine().read_counters(&FlowKey::egress(list.clone()), color).unwrap();
            assert_eq!(tx.packets, sent, "{list} {color:?} ingress");
            assert_eq!(rx.packets, delivered, "{list} {color:?} egress");
            assert!(delivered > 0);
        }
        for (epoch, entry) in &series {
            assert_eq!(entry.sent, entry.delivered + entry.dropped, "{list} block {epoch}");
        }
    }
}

#[test]
fn cumulative_loss_matches_oracle() {
    let mut sim = Simulation::from_config(two_nodes(0.05, 200.0, 6.0, "in-band")).unwrap();
    sim.run();
    let records = sim.store().sorted_records();
    assert!(!records.is_empty());
    for r in &records {
        let list = match r.direction {
            PathDirection::Forward => sids("fcff:2::d6"),
            PathDirection::Reverse => sids("fcff:1::d6"),
        };
        let oracle: u64 = sim
            .oracle()
            .series(&list)
            .iter()
            .filter(|(e, _)| *e <= r.epoch && e % 2 == r.epoch % 2)
            .map(|(_, e)| e.dropped)
            .sum();
        assert_eq!(r.cumulative_loss, oracle as i64, "{:?} block {}", r.direction, r.epoch);
    }
}

#[test]
fn one_report_per_direction_per_completed_block() {
    let mut sim = Simulation::from_config(two_nodes(0.0, 100.0, 8.0, "in-band")).unwrap();
    for n in 1..=6u64 {
        // Block n-1 is read at n + margin and the response returns within
        // a few milliseconds.
        sim.run_until(SimTime::from_secs_f64(n as f64 + 0.5 + 0.1));
        let records = sim.store().records();
        let count = |d| records.iter().filter(|r| r.direction == d).count() as u64;
        assert_eq!(count(PathDirection::Forward), n);
        assert!((n - 1..=n).contains(&count(PathDirection::Reverse)));
    }
}

#[test]
fn out_of_band_reports_forward_only() {
    let mut sim = Simulation::from_config(two_nodes(0.02, 200.0, 4.0, "out-of-band")).unwrap();
    sim.run();
    let records = sim.store().records();
    assert!(!records.is_empty());
    assert!(records.iter().all(|r| r.direction == PathDirection::Forward));
    assert!(sim.block_checks().unwrap().iter().all(|c| c.exact()));
}

#[test]
fn reverse_counters_advance() {
    let mut sim = Simulation::from_config(two_nodes(0.0, 100.0, 3.0, "in-band")).unwrap();
    sim.run();
    let key = FlowKey::ingress(sids("fcff:1::d6"));
    let b = sim.node("B").unwrap();
    let total: u64 = Color::ALL
        .iter()
        .map(|&c| b.engine().read_counters(&key, c).unwrap().packets)
        .sum();
    assert_eq!(total, 300);
}

#[test]
fn stopped_session_keeps_reports_and_stops_counting() {
    let mut sim = Simulation::from_config(two_nodes(0.02, 200.0, 8.0, "in-band")).unwrap();
    sim.run_until(SimTime::from_secs_f64(3.7));
    let before = sim.store().sorted_records();
    assert_eq!(before.iter().filter(|r| r.direction == PathDirection::Forward).count(), 3);
    sim.control(|c, net| c.stop_session(net, 1)).unwrap();
    sim.run();
    assert_eq!(sim.store().sorted_records(), before);
    let key = FlowKey::ingress(sids("fcff:2::d6"));
    assert!(sim.node("A").unwrap().engine().read_counters(&key, Color::R).is_err());
    assert!(sim.control(|c, net| c.stop_session(net, 1)).is_err());
    assert_eq!(sim.stats().emitted, 2 * 1600);
}

#[derive(Default)]
struct Recorder(Mutex<Vec<MeasurementRecord>>);

impl MeasurementSink for Recorder {
    fn append(&self, record: &MeasurementRecord) {
        self.0.lock().unwrap().push(record.clone());
    }
}

#[test]
fn every_sink_receives_reports_in_order() {
    let mut sim = Simulation::from_config(two_nodes(0.01, 100.0, 6.0, "in-band")).unwrap();
    let first = Arc::new(Recorder::default());
    let second = Arc::new(Recorder::default());
    sim.control(|c, _| {
        c.subscribe(first.clone());
        c.subscribe(second.clone());
    });
    sim.run();
    let first = first.0.lock().unwrap().clone();
    let second = second.0.lock().unwrap().clone();
    assert_eq!(first, second);
    assert_eq!(first.len(), sim.store().len());
    for direction in [PathDirection::Forward, PathDirection::Reverse] {
        let epochs: Vec<u64> = first.iter().filter(|r| r.direction == direction).map(|r| r.epoch).collect();
        assert!(!epochs.is_empty());
        assert!(epochs.windows(2).all(|w| w[0] < w[1]), "{direction:?} {epochs:?}");
    }
}

#[test]
fn link_loss_is_binomial() {
    let mut config = two_nodes(0.001, 100_000.0, 10.0, "in-band");
    config.sessions.clear();
    config.flows.truncate(1);
    let mut sim = Simulation::from_config(config).unwrap();
    sim.run();
    let n: f64 = 1_000_000.0;
    let p: f64 = 0.001;
    assert_eq!(sim.stats().emitted, n as u64);
    let lost = sim.stats().link_losses as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    assert!((lost - n * p).abs() < 3.0 * sigma, "{lost} lost");
    assert_eq!(sim.stats().host_delivered + sim.stats().link_losses, n as u64);
}

#[test]
fn lossless_links_deliver_everything() {
    let mut sim = Simulation::from_config(two_nodes(0.0, 250.0, 4.0, "in-band")).unwrap();
    sim.run();
    assert_eq!(sim.stats().host_delivered, 2000);
    assert_eq!(sim.oracle().total().dropped, 0);
    assert!(sim.store().records().iter().all(|r| r.cumulative_loss == 0));
}

#[test]
fn other_seed_changes_drops_not_exactness() {
    let mut a = paper(2);
    let mut b = paper(3);
    a.run();
    b.run();
    assert_ne!(a.trace_digest(), b.trace_digest());
    assert_ne!(a.oracle().total().dropped, b.oracle().total().dropped);
    for sim in [&a, &b] {
        let checks = sim.block_checks().unwrap();
        assert_eq!(checks.len(), 72);
        assert!(checks.iter().all(|c| c.exact()));
    }
}

#[test]
fn margin_violation_is_flagged() {
    let mut sim = Simulation::from_config(
        ScenarioConfig::from_toml(preset::preset("margin-violation").unwrap().text).unwrap(),
    )
    .unwrap();
    sim.run();
    let checks = sim.block_checks().unwrap();
    assert!(checks.iter().any(|c| !c.exact()));
    assert!(checks.iter().filter(|c| !c.exact()).all(|c| c.flagged));
}
