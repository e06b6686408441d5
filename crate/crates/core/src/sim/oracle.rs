//! Ground truth for monitored traffic: every packet colored at an ingress
//! node is stamped with its SID list and epoch, and ends up either
//! delivered (decapsulated at the egress) or dropped.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::dataplane::NodeId;
use crate::packet::SidList;

/// Oracle attribution carried alongside a packet in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Stamp {
    pub flow: u32,
    pub epoch: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct OracleEntry {
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl OracleEntry {
    pub fn in_flight(&self) -> u64 {
        self.sent - self.delivered - self.dropped
    }
}

#[derive(Debug, Default, Clone)]
pub struct DropOracle {
    flows: Vec<(SidList, NodeId)>,
    index: HashMap<SidList, u32>,
    entries: BTreeMap<(u32, u64), OracleEntry>,
}

impl DropOracle {
    pub fn new() -> Self {
        Self::default()
    }

    pub(crate) fn stamp(&mut self, sids: SidList, ingress: NodeId, epoch: u64) -> Stamp {
        let flow = match self.index.get(&sids) {
            Some(&id) => id,
            None => {
                let id = self.flows.len() as u32;
                self.flows.push((sids.clone(), ingress));
                self.index.insert(sids, id);
                id
            }
        };
        self.entries.entry((flow, epoch)).or_default().sent += 1;
        Stamp { flow, epoch }
    }

    pub(crate) fn delivered(&mut self, stamp: Stamp) {
        self.entries.entry((stamp.flow, stamp.epoch)).or_default().delivered += 1;
    }

    pub(crate) fn dropped(&mut self, stamp: Stamp) {
        self.entries.entry((stamp.flow, stamp.epoch)).or_default().dropped += 1;
    }

    pub fn flows(&self) -> impl Iterator<Item = &SidList> {
        self.flows.iter().map(|(s, _)| s)
    }

    pub(crate) fn ingress_of(&self, sids: &SidList) -> Option<NodeId> {
        self.index.get(sids).map(|&id| self.flows[id as usize].1)
    }

    pub fn entry(&self, sids: &SidList, epoch: u64) -> OracleEntry {
        self.index
            .get(sids)
            .and_then(|id| self.entries.get(&(*id, epoch)))
            .copied()
            .unwrap_or_default()
    }

    /// All (epoch, entry) pairs of one flow, in epoch order.
    pub fn series(&self, sids: &SidList) -> Vec<(u64, OracleEntry)> {
        let Some(&id) = self.index.get(sids) else {
            return Vec::new();
        };
        self.entries
            .range((id, 0)..=(id, u64::MAX))
            .map(|(&(_, epoch), e)| (epoch, *e))
            .collect()
    }

    pub fn total(&self) -> OracleEntry {
        self.entries.values().fold(OracleEntry::default(), |acc, e| OracleEntry {
            sent: acc.sent + e.sent,
            delivered: acc.delivered + e.delivered,
            dropped: acc.dropped + e.dropped,
        })
    }
}
