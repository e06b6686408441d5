//! Measurement sinks, record export and text reports.

mod export;
mod report;

use std::collections::HashMap;
use std::ops::RangeInclusive;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::session::{LossReport, PathDirection};
use crate::packet::{Color, SidList};

pub use export::{export_records, import_records, read_records, write_records, RecordFormat};
pub use report::{
    flow_totals, format_flow_table, format_histogram, format_report, loss_histogram, FlowLoss, Histogram,
};

#[derive(Debug, Error)]
pub enum CollectError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("unknown record format {0:?}")]
    UnknownFormat(String),
}

/// One interval report as stored and exported. Field order is the export
/// column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub measure_id: u32,
    pub sid_list: String,
    pub direction: PathDirection,
    pub epoch: u64,
    pub color: Color,
    pub interval_tx: u64,
    pub interval_rx: u64,
    pub interval_loss: i64,
    pub cumulative_tx: u64,
    pub cumulative_rx: u64,
    pub cumulative_loss: i64,
    /// Simulated seconds at which the sender read its counters.
    pub timestamp: f64,
    pub baseline_epoch: Option<u64>,
    pub negative_loss: bool,
    pub active_read: bool,
    pub margin_suspect: bool,
}

impl MeasurementRecord {
    pub fn from_report(report: &LossReport, sid_list: &SidList) -> Self {
        Self {
            measure_id: report.measure_id,
            sid_list: sid_list.to_string(),
            direction: report.direction,
            epoch: report.epoch,
            color: report.color,
            interval_tx: report.interval_tx,
            interval_rx: report.interval_rx,
            interval_loss: report.interval_loss,
            cumulative_tx: report.cumulative_tx,
            cumulative_rx: report.cumulative_rx,
            cumulative_loss: report.cumulative_loss,
            timestamp: report.read_timestamp.as_secs_f64(),
            baseline_epoch: report.baseline_epoch,
            negative_loss: report.flags.negative_loss,
            active_read: report.flags.active_read,
            margin_suspect: report.flags.margin_suspect,
        }
    }

    pub fn key(&self) -> (u32, PathDirection, u64) {
        (self.measure_id, self.direction, self.epoch)
    }

    pub fn flagged(&self) -> bool {
        self.negative_loss || self.active_read || self.margin_suspect
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyNode {
    pub id: String,
    pub addresses: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyEdge {
    pub a: String,
    pub b: String,
    pub delay: f64,
    pub loss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TopologyRecord {
    pub nodes: Vec<TopologyNode>,
    pub edges: Vec<TopologyEdge>,
}

impl TopologyRecord {
    /// Edges that reference undeclared nodes.
    pub fn dangling_edges(&self) -> Vec<&TopologyEdge> {
        let known = |id: &str| self.nodes.iter().any(|n| n.id == id);
        self.edges.iter().filter(|e| !known(&e.a) || !known(&e.b)).collect()
    }
}

/// Receives published measurements.
pub trait MeasurementSink: Send + Sync {
    fn append(&self, record: &MeasurementRecord);
}

#[derive(Debug, Default)]
struct StoreInner {
    records: Vec<MeasurementRecord>,
    index: HashMap<(u32, PathDirection, u64), usize>,
    duplicates: Vec<(u32, PathDirection, u64)>,
}

/// Shared, append-only time-series store. Clones are handles to the same
/// store.
#[derive(Debug, Clone, Default)]
pub struct TimeSeriesStore {
    inner: Arc<RwLock<StoreInner>>,
}

impl TimeSeriesStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `record`; a record with the same (measure_id, direction,
    /// epoch) is replaced in place and noted as a duplicate.
    pub fn sink_append(&self, record: MeasurementRecord) {
        let mut inner = self.inner.write().unwrap();
        let key = record.key();
        match inner.index.get(&key).copied() {
            Some(i) => {
                inner.records[i] = record;
                inner.duplicates.push(key);
            }
            None => {
                let i = inner.records.len();
                inner.records.push(record);
                inner.index.insert(key, i);
            }
        }
    }

    /// Records of one series with epoch in `epochs`, in epoch order.
    pub fn query_series(
        &self,
        measure_id: u32,
        direction: PathDirection,
        epochs: RangeInclusive<u64>,
    ) -> Vec<MeasurementRecord> {
        let inner = self.inner.read().unwrap();
        let mut out: Vec<MeasurementRecord> = inner
            .records
            .iter()
            .filter(|r| r.measure_id == measure_id && r.direction == direction && epochs.contains(&r.epoch))
            .cloned()
            .collect();
        out.sort_by_key(|r| r.epoch);
        out
    }

    /// All records in arrival order.
    pub fn records(&self) -> Vec<MeasurementRecord> {
        self.inner.read().unwrap().records.clone()
    }

    /// All records ordered by (measure_id, direction, epoch).
    pub fn sorted_records(&self) -> Vec<MeasurementRecord> {
        let mut records = self.records();
        records.sort_by_key(MeasurementRecord::key);
        records
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Keys that were appended more than once.
    pub fn duplicates(&self) -> Vec<(u32, PathDirection, u64)> {
        self.inner.read().unwrap().duplicates.clone()
    }

    pub fn export(&self, path: &std::path::Path, format: RecordFormat) -> Result<usize, CollectError> {
        export_records(&self.sorted_records(), path, format)
    }
}

impl MeasurementSink for TimeSeriesStore {
    fn append(&self, record: &MeasurementRecord) {
        self.sink_append(record.clone());
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(measure_id: u32, direction: PathDirection, epoch: u64, loss: i64) -> MeasurementRecord {
        MeasurementRecord {
            measure_id,
            sid_list: "fcff:2::100,fcff:8::d6".into(),
            direction,
            epoch,
            color: Color::for_epoch(epoch),
            interval_tx: 100,
            interval_rx: (100 - loss) as u64,
            interval_loss: loss,
            cumulative_tx: 100 * (epoch / 2 + 1),
            cumulative_rx: 100 * (epoch / 2 + 1) - loss as u64,
            cumulative_loss: loss,
            timestamp: epoch as f64 * 10.0 + 15.0,
            baseline_epoch: epoch.checked_sub(2),
            negative_loss: false,
            active_read: false,
            margin_suspect: false,
        }
    }

    #[test]
    fn append_then_query() {
        let store = TimeSeriesStore::new();
        assert!(store.query_series(1, PathDirection::Forward, 0..=10).is_empty());
        store.sink_append(record(1, PathDirection::Forward, 3, 2));
        let got = store.query_series(1, PathDirection::Forward, 3..=3);
        assert_eq!(got, vec![record(1, PathDirection::Forward, 3, 2)]);
        assert!(store.query_series(1, PathDirection::Reverse, 0..=10).is_empty());
    }

    #[test]
    fn duplicate_replaces() {
        let store = TimeSeriesStore::new();
        store.sink_append(record(1, PathDirection::Forward, 3, 2));
        store.sink_append(record(1, PathDirection::Forward, 3, 5));
        assert_eq!(store.len(), 1);
        assert_eq!(store.records()[0].interval_loss, 5);
        assert_eq!(store.duplicates(), vec![(1, PathDirection::Forward, 3)]);
    }

    #[test]
    fn clones_share_state() {
        let store = TimeSeriesStore::new();
        let handle = store.clone();
        handle.sink_append(record(1, PathDirection::Forward, 0, 0));
        assert_eq!(store.len(), 1);
    }

    proptest! {
        #[test]
        fn query_matches_full_scan(
            appends in prop::collection::vec((0u32..3, any::<bool>(), 0u64..40), 0..200),
            lo in 0u64..40,
            span in 0u64..40,
        ) {
            let store = TimeSeriesStore::new();
            for (id, rev, epoch) in &appends {
                let dir = if *rev { PathDirection::Reverse } else { PathDirection::Forward };
                store.sink_append(record(*id, dir, *epoch, 0));
            }
            let hi = lo + span;
            for id in 0..3 {
                for dir in [PathDirection::Forward, PathDirection::Reverse] {
                    let got = store.query_series(id, dir, lo..=hi);
                    let mut want: Vec<_> = store
                        .records()
                        .into_iter()
                        .filter(|r| r.measure_id == id && r.direction == dir && r.epoch >= lo && r.epoch <= hi)
                        .collect();
                    want.sort_by_key(|r| r.epoch);
                    prop_assert!(got.windows(2).all(|w| w[0].epoch < w[1].epoch));
                    prop_assert_eq!(got, want);
                }
            }
        }
    }
}
