//! Per-flow packet loss measurement for SRv6 networks: alternate-marking
//! counters, TWAMP-light loss probes, a southbound control API and a
//! deterministic packet-level simulator to exercise them.

pub mod collect;
pub mod control;
pub mod counters;
pub mod dataplane;
pub mod packet;
pub mod sim;
pub mod time;
