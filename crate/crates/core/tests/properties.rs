mod common;

use proptest::prelude::*;
use srv6pm::collect::RecordFormat;
use srv6pm::sim::Simulation;
use srv6pm::time::SimTime;

use common::{export_bytes, interval_sums_match, random_scenario};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_networks_measure_exactly(seed in any::<u64>()) {
        let mut sim = Simulation::from_config(random_scenario(seed)).unwrap();
        sim.run();
        // Long lossy paths can lose every probe, leaving no reports.
        let checks = sim.block_checks().unwrap();
        for c in &checks {
            prop_assert!(c.exact(), "{c:?}");
        }
        let records = sim.store().records();
        prop_assert!(interval_sums_match(&records).is_ok());
        prop_assert!(sim.store().duplicates().is_empty());
        let total = sim.oracle().total();
        prop_assert_eq!(total.sent, total.delivered + total.dropped);
    }

    #[test]
    fn pausing_does_not_change_the_run(seed in any::<u64>(), split in 0.0f64..5.0) {
        let mut whole = Simulation::from_config(random_scenario(seed)).unwrap();
        whole.run();
        let mut parts = Simulation::from_config(random_scenario(seed)).unwrap();
        parts.run_until(SimTime::from_secs_f64(split));
        parts.run();
        prop_assert_eq!(whole.trace_digest(), parts.trace_digest());
        prop_assert_eq!(
            export_bytes(&whole.store().sorted_records(), RecordFormat::Jsonl),
            export_bytes(&parts.store().sorted_records(), RecordFormat::Jsonl)
        );
    }
}

#[test]
fn probes_lost_on_every_block_leave_no_reports() {
    // 12-SID paths over ~4%-loss links: no probe round trip survives.
    let mut sim = Simulation::from_config(random_scenario(10602463142578328909)).unwrap();
    sim.run();
    assert!(sim.store().is_empty());
    assert!(sim.block_checks().unwrap().is_empty());
    assert!(sim.oracle().total().dropped > 0);
}
