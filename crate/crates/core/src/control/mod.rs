//! Controller, node-side southbound API and measurement sessions.

pub mod controller;
pub mod rpc;
pub mod session;
pub mod southbound;

use thiserror::Error;

use crate::counters::CounterError;
use crate::packet::{PacketError, SidList};

pub use controller::{Controller, SessionBinding, SessionSpec, Southbound};
pub use session::{ColorParams, LossReport, LossSample, MonitoringSession, PathDirection, ReportFlags, SessionState};
pub use southbound::{ManagerOp, Role};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("entity not found: {0}")]
    NotFound(String),
    #[error("entity already exists: {0}")]
    AlreadyExists(String),
    #[error("a session for [{0}] is already running")]
    AlreadyRunning(SidList),
    #[error("no running session for [{0}]")]
    NotRunning(SidList),
    #[error("no session for [{0}]")]
    UnknownSession(SidList),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("invalid options: {0}")]
    InvalidOptions(String),
    #[error("sample for epoch {epoch} is not newer than epoch {latest}")]
    OutOfOrderSample { epoch: u64, latest: u64 },
    #[error(transparent)]
    Counter(#[from] CounterError),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

/// Maps an 8-bit wire block number to the full epoch nearest `reference`
/// (within -128..=127).
pub fn resolve_epoch(wire: u8, reference: u64) -> u64 {
    let delta = i64::from(wire.wrapping_sub(reference as u8) as i8);
    // Epochs are never negative, so near zero the candidate above wins.
    reference
        .checked_add_signed(delta)
        .unwrap_or_else(|| reference + (delta + 256) as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn resolve_epoch_wraps() {
        assert_eq!(resolve_epoch(0, 0), 0);
        assert_eq!(resolve_epoch(255, 0), 255);
        assert_eq!(resolve_epoch(255, 256), 255);
        assert_eq!(resolve_epoch(1, 255), 257);
        assert_eq!(resolve_epoch(5, 1000), 1029);
    }

    proptest! {
        #[test]
        fn resolve_epoch_recovers_nearby(reference in 200u64..1_000_000, delta in -127i64..=127) {
            let epoch = (reference as i64 + delta) as u64;
            prop_assert_eq!(resolve_epoch(epoch as u8, reference), epoch);
        }
    }
}
