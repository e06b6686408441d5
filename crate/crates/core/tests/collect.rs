mod common;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srv6pm::collect::{format_report, import_records, MeasurementRecord, RecordFormat, TimeSeriesStore};
use srv6pm::control::PathDirection;
use srv6pm::packet::Color;
use srv6pm::sim::Simulation;

use common::{export_bytes, two_nodes};

fn record(measure_id: u32, direction: PathDirection, epoch: u64) -> MeasurementRecord {
    MeasurementRecord {
        measure_id,
        sid_list: "fcff:2::d6".into(),
        direction,
        epoch,
        color: Color::for_epoch(epoch),
        interval_tx: 100,
        interval_rx: 99,
        interval_loss: 1,
        cumulative_tx: 100 * (epoch / 2 + 1),
        cumulative_rx: 99 * (epoch / 2 + 1),
        cumulative_loss: (epoch / 2 + 1) as i64,
        timestamp: epoch as f64 + 1.5,
        baseline_epoch: epoch.checked_sub(2),
        negative_loss: false,
        active_read: false,
        margin_suspect: false,
    }
}

#[test]
fn shuffled_appends_query_in_epoch_order() {
    let mut records: Vec<MeasurementRecord> = (0..10_000u64)
        .map(|i| {
            let direction = if i % 2 == 0 { PathDirection::Forward } else { PathDirection::Reverse };
            record(1 + (i % 4) as u32 / 2, direction, i / 4)
        })
        .collect();
    records.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
    let store = TimeSeriesStore::new();
    for r in records {
        store.sink_append(r);
    }
    assert_eq!(store.len(), 10_000);
    assert!(store.duplicates().is_empty());
    let series = store.query_series(2, PathDirection::Reverse, 0..=u64::MAX);
    assert_eq!(series.len(), 2500);
    assert!(series.iter().enumerate().all(|(i, r)| r.epoch == i as u64));
    let window = store.query_series(1, PathDirection::Forward, 100..=199);
    assert_eq!(window.first().unwrap().epoch, 100);
    assert_eq!(window.len(), 100);
}

#[test]
fn report_from_export_matches_memory() {
    let mut sim = Simulation::from_config(two_nodes(0.03, 200.0, 5.0, "in-band")).unwrap();
    sim.run();
    let records = sim.store().sorted_records();
    let dir = tempfile::tempdir().unwrap();
    for format in [RecordFormat::Jsonl, RecordFormat::Csv] {
        let path = dir.path().join(format!("records.{}", format.extension()));
        sim.store().export(&path, format).unwrap();
        let back = import_records(&path).unwrap();
        assert_eq!(back, records);
        assert_eq!(format_report(&back), format_report(&records));
        assert_eq!(std::fs::read(&path).unwrap(), export_bytes(&records, format));
    }
}

#[test]
fn identical_runs_export_identical_bytes() {
    let run = || {
        let mut sim = Simulation::from_config(two_nodes(0.05, 300.0, 4.0, "in-band")).unwrap();
        sim.run();
        export_bytes(&sim.store().sorted_records(), RecordFormat::Csv)
    };
    assert_eq!(run(), run());
}
