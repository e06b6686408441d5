//! Per-flow, per-color packet counters keyed by SID list.
//!
//! Flows live in one hash table per (direction, SID-list length), 32 tables
//! in all. Each flow keeps one packet/byte counter pair per color per
//! worker; readers aggregate the worker shards. Counters are cumulative and
//! only go back to zero when a flow is removed and added again.

use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{Color, SegmentId, SidList, MAX_SIDS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Direction {
    /// Flows leaving this node into the SR domain (counted at encapsulation).
    Ingress,
    /// Flows terminating at this node (counted before decapsulation).
    Egress,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::Ingress => 0,
            Direction::Egress => 1,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ingress => "ingress",
            Direction::Egress => "egress",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FlowKey {
    pub direction: Direction,
    pub sids: SidList,
}

impl FlowKey {
    pub fn new(direction: Direction, sids: SidList) -> Self {
        Self { direction, sids }
    }

    pub fn ingress(sids: SidList) -> Self {
        Self::new(Direction::Ingress, sids)
    }

    pub fn egress(sids: SidList) -> Self {
        Self::new(Direction::Egress, sids)
    }
}

impl fmt::Display for FlowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]", self.direction, self.sids)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CounterError {
    #[error("flow {0} is already monitored")]
    AlreadyMonitored(FlowKey),
    #[error("flow {0} is not monitored")]
    NotMonitored(FlowKey),
    #[error("epoch skew: current epoch {current}, requested {requested}")]
    EpochSkew { current: u64, requested: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorState {
    pub active_color: Color,
    pub epoch: u64,
}

impl ColorState {
    fn from_epoch(epoch: u64) -> Self {
        Self {
            active_color: Color::for_epoch(epoch),
            epoch,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub flow: FlowKey,
    pub color: Color,
    pub packets: u64,
    pub bytes: u64,
    pub epoch_at_read: u64,
    /// The color read was the one being marked at read time.
    pub active_read: bool,
}

#[derive(Default)]
struct Shard {
    packets: AtomicU64,
    bytes: AtomicU64,
}

/// Counters for one flow: `shards[worker * 2 + color]`.
struct FlowCounters {
    shards: Box<[Shard]>,
}

impl FlowCounters {
    fn new(workers: usize) -> Self {
        Self {
            shards: (0..workers * 2).map(|_| Shard::default()).collect(),
        }
    }

    fn add(&self, color: Color, worker: usize, bytes: u64) {
        let shard = &self.shards[worker * 2 + color.index()];
        shard.packets.fetch_add(1, Ordering::Relaxed);
        shard.bytes.fetch_add(bytes, Ordering::Relaxed);
    }

    fn sum(&self, color: Color) -> (u64, u64) {
        self.shards
            .iter()
            .skip(color.index())
            .step_by(2)
            .fold((0, 0), |(p, b), s| {
                (p + s.packets.load(Ordering::Relaxed), b + s.bytes.load(Ordering::Relaxed))
            })
    }
}

type FlowTable = RwLock<HashMap<Box<[SegmentId]>, Arc<FlowCounters>>>;

pub struct CounterEngine {
    workers: usize,
    /// `tables[direction][sid_list_len - 1]`
    tables: [Vec<FlowTable>; 2],
    epoch: AtomicU64,
    admin: Mutex<()>,
}

impl fmt::Debug for CounterEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CounterEngine")
            .field("workers", &self.workers)
            .field("epoch", &self.epoch.load(Ordering::Relaxed))
            .field("ingress_flows", &self.list_flows(Direction::Ingress).len())
            .field("egress_flows", &self.list_flows(Direction::Egress).len())
            .finish()
    }
}

impl Default for CounterEngine {
    fn default() -> Self {
        Self::new(1)
    }
}

impl CounterEngine {
    pub fn new(workers: usize) -> Self {
        assert!(workers > 0, "counter engine needs at least one worker");
        let tables = || (0..MAX_SIDS).map(|_| RwLock::new(HashMap::new())).collect();
        Self {
            workers,
            tables: [tables(), tables()],
            epoch: AtomicU64::new(0),
            admin: Mutex::new(()),
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    fn table(&self, direction: Direction, len: usize) -> &FlowTable {
        &self.tables[direction.index()][len - 1]
    }

    pub fn add_monitored_flow(&self, key: &FlowKey) -> Result<(), CounterError> {
        let _admin = self.admin.lock().unwrap();
        let mut table = self.table(key.direction, key.sids.len()).write().unwrap();
        if table.contains_key(key.sids.segments()) {
            return Err(CounterError::AlreadyMonitored(key.clone()));
        }
        table.insert(
            key.sids.segments().into(),
            Arc::new(FlowCounters::new(self.workers)),
        );
        Ok(())
    }

    /// Removes a flow, returning its final R and B snapshots.
    pub fn remove_monitored_flow(&self, key: &FlowKey) -> Result<[CounterSnapshot; 2], CounterError> {
        let _admin = self.admin.lock().unwrap();
        let counters = self
            .table(key.direction, key.sids.len())
            .write()
            .unwrap()
            .remove(key.sids.segments())
            .ok_or_else(|| CounterError::NotMonitored(key.clone()))?;
        let state = self.color_state();
        Ok(Color::ALL.map(|color| self.snapshot(key, &counters, color, state)))
    }

    pub fn is_monitored(&self, direction: Direction, sids: &[SegmentId]) -> bool {
        if sids.is_empty() || sids.len() > MAX_SIDS {
            return false;
        }
        self.table(direction, sids.len())
            .read()
            .unwrap()
            .contains_key(sids)
    }

    /// Counts one packet of `size_bytes` if the flow is monitored. Returns
    /// whether it was counted.
    pub fn count_packet(&self, key: &FlowKey, color: Color, size_bytes: u64, worker: usize) -> bool {
        self.count(key.direction, key.sids.segments(), color, size_bytes, worker)
    }

    /// Slice-keyed form of [`count_packet`](Self::count_packet), used on the
    /// forwarding path where the SID list comes straight from the SRH.
    pub fn count(
        &self,
        direction: Direction,
        sids: &[SegmentId],
        color: Color,
        size_bytes: u64,
        worker: usize,
    ) -> bool {
        assert!(worker < self.workers, "worker {worker} out of range");
        if sids.is_empty() || sids.len() > MAX_SIDS {
            return false;
        }
        let table = self.table(direction, sids.len()).read().unwrap();
        match table.get(sids) {
            Some(counters) => {
                counters.add(color, worker, size_bytes);
                true
            }
            None => false,
        }
    }

    pub fn color_state(&self) -> ColorState {
        ColorState::from_epoch(self.epoch.load(Ordering::Acquire))
    }

    /// Advances the marking epoch by exactly one, flipping the active color.
    pub fn set_active_color(&self, new_epoch: u64) -> Result<ColorState, CounterError> {
        if new_epoch == 0 {
            return Err(CounterError::EpochSkew {
                current: self.epoch.load(Ordering::Acquire),
                requested: 0,
            });
        }
        match self
            .epoch
            .compare_exchange(new_epoch - 1, new_epoch, Ordering::AcqRel, Ordering::Acquire)
        {
            Ok(_) => Ok(ColorState::from_epoch(new_epoch)),
            Err(current) => Err(CounterError::EpochSkew {
                current,
                requested: new_epoch,
            }),
        }
    }

    pub fn read_counters(&self, key: &FlowKey, color: Color) -> Result<CounterSnapshot, CounterError> {
        let state = self.color_state();
        let table = self.table(key.direction, key.sids.len()).read().unwrap();
        let counters = table
            .get(key.sids.segments())
            .ok_or_else(|| CounterError::NotMonitored(key.clone()))?;
        Ok(self.snapshot(key, counters, color, state))
    }

    fn snapshot(&self, key: &FlowKey, counters: &FlowCounters, color: Color, state: ColorState) -> CounterSnapshot {
        let (packets, bytes) = counters.sum(color);
        CounterSnapshot {
            flow: key.clone(),
            color,
            packets,
            bytes,
            epoch_at_read: state.epoch,
            active_read: state.active_color == color,
        }
    }

    /// Monitored flows for one direction, sorted.
    pub fn list_flows(&self, direction: Direction) -> Vec<FlowKey> {
        let mut flows: Vec<FlowKey> = self.tables[direction.index()]
            .iter()
            .flat_map(|table| {
                table
                    .read()
                    .unwrap()
                    .keys()
                    .map(|sids| FlowKey::new(direction, SidList::new(sids.to_vec()).expect("stored lists are valid")))
                    .collect::<Vec<_>>()
            })
            .collect();
        flows.sort();
        flows
    }

    /// Number of flows in the table for one (direction, length) class.
    pub fn class_len(&self, direction: Direction, sid_list_len: usize) -> usize {
        self.table(direction, sid_list_len).read().unwrap().len()
    }
}
