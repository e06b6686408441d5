//! TWAMP-light LM sender and reflector agents and the per-node color clock.
//!
//! Every node with a running session keeps one color clock anchored at
//! t = 0: epoch `e` covers `[e*T, (e+1)*T)`. At each switch the node flips
//! its engine's active color and, `delay_margin` later, both ends snapshot
//! the counters of the block that just ended. The sender then queries the
//! reflector for that block; the reflector answers from its own snapshot.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ForwardingDecision, Node};
use crate::control::rpc::ResponseMode;
use crate::control::session::{LossSample, MonitoringSession, PathDirection, SessionOptions, SessionState};
use crate::control::{resolve_epoch, ControlError};
use crate::counters::FlowKey;
use crate::packet::{
    build_probe_packet, decode_lm_query, decode_lm_response, Color, LmFlags, LmMessage, LmQuery, LmResponse, Packet,
    SegmentId, SidList, CTRL_IN_BAND, CTRL_OUT_OF_BAND,
};
use crate::time::{SimDuration, SimTime};

/// Snapshots kept per session; older blocks can no longer be queried.
const SNAPSHOT_HISTORY: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimerKind {
    /// Start marking `epoch`.
    ColorSwitch { generation: u64, epoch: u64 },
    /// Snapshot counters of `block` for sessions using `margin`.
    Read {
        generation: u64,
        block: u64,
        margin: SimDuration,
    },
}

impl TimerKind {
    /// Same-instant ordering: color switches run before packet events.
    pub fn phase(&self) -> u8 {
        match self {
            TimerKind::ColorSwitch { .. } => 0,
            TimerKind::Read { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timer {
    pub at: SimTime,
    pub kind: TimerKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// A punted or locally delivered probe matched no running session.
    UnknownSession { dst_port: u16 },
    MalformedProbe { error: String },
    /// Response for a query that is not pending (late or duplicate).
    UnmatchedSeq { measure_id: u32, seq: u32 },
    /// A block was requested before its snapshot was taken; live counters
    /// were used instead.
    EarlyRead { measure_id: u32, block: u64 },
    /// A sample was rejected by interval differencing.
    RejectedSample { measure_id: u32, error: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub time: SimTime,
    pub kind: DiagnosticKind,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {:?}", self.time, self.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ColorClock {
    interval: SimDuration,
    generation: u64,
}

/// Counters of one block as read at one end. For a sender `tx` is the
/// forward ingress count and `rx` the reverse egress count; a reflector
/// holds the opposite pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct BlockSnapshot {
    at: SimTime,
    tx: u64,
    rx: u64,
    active_read: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct PendingQuery {
    block: u64,
    sent_at: SimTime,
    tx: u64,
}

#[derive(Debug, Clone)]
pub struct SenderAgent {
    pub session: MonitoringSession,
    pub next_seq: u32,
    /// First block fully covered by the session's counters.
    pub first_block: u64,
    pending: BTreeMap<u32, PendingQuery>,
    snapshots: BTreeMap<u64, BlockSnapshot>,
}

impl SenderAgent {
    pub fn new(session: MonitoringSession, first_block: u64) -> Self {
        Self {
            session,
            next_seq: 0,
            first_block,
            pending: BTreeMap::new(),
            snapshots: BTreeMap::new(),
        }
    }

    pub fn pending_queries(&self) -> usize {
        self.pending.len()
    }

    fn forward_key(&self) -> FlowKey {
        FlowKey::ingress(self.session.sdlist.clone())
    }

    fn reverse_key(&self) -> FlowKey {
        FlowKey::egress(self.session.sdlistreverse.clone())
    }
}

#[derive(Debug, Clone)]
pub struct ReflectorAgent {
    pub measure_id: u32,
    pub sdlist: SidList,
    pub sdlistreverse: SidList,
    pub options: SessionOptions,
    pub state: SessionState,
    pub next_seq: u32,
    pub responses_sent: u64,
    snapshots: BTreeMap<u64, BlockSnapshot>,
}

impl ReflectorAgent {
    pub fn new(measure_id: u32, sdlist: SidList, sdlistreverse: SidList, options: SessionOptions) -> Self {
        Self {
            measure_id,
            sdlist,
            sdlistreverse,
            options,
            state: SessionState::Running,
            next_seq: 0,
            responses_sent: 0,
            snapshots: BTreeMap::new(),
        }
    }

    pub fn is_running(&self) -> bool {
        self.state == SessionState::Running
    }

    fn forward_key(&self) -> FlowKey {
        FlowKey::egress(self.sdlist.clone())
    }

    fn reverse_key(&self) -> FlowKey {
        FlowKey::ingress(self.sdlistreverse.clone())
    }
}

/// Measurement state of a node. Sessions are kept after they stop so their
/// reports stay retrievable.
#[derive(Debug, Default)]
pub struct Agents {
    clock: Option<ColorClock>,
    generation: u64,
    pub(crate) senders: Vec<SenderAgent>,
    pub(crate) reflectors: Vec<ReflectorAgent>,
    pub(crate) diagnostics: Vec<Diagnostic>,
    pub(crate) timers: Vec<Timer>,
}

impl Agents {
    pub fn senders(&self) -> &[SenderAgent] {
        &self.senders
    }

    pub fn reflectors(&self) -> &[ReflectorAgent] {
        &self.reflectors
    }

    pub fn running_sender(&self, sdlist: &SidList) -> Option<&SenderAgent> {
        self.senders
            .iter()
            .find(|s| s.session.is_running() && &s.session.sdlist == sdlist)
    }

    pub fn running_reflector(&self, sdlist: &SidList) -> Option<&ReflectorAgent> {
        self.reflectors.iter().find(|r| r.is_running() && &r.sdlist == sdlist)
    }

    fn running_margins(&self) -> Vec<SimDuration> {
        let mut margins: Vec<SimDuration> = self
            .senders
            .iter()
            .filter(|s| s.session.is_running())
            .map(|s| s.session.options.color.delay_margin)
            .chain(
                self.reflectors
                    .iter()
                    .filter(|r| r.is_running())
                    .map(|r| r.options.color.delay_margin),
            )
            .collect();
        margins.sort();
        margins.dedup();
        margins
    }

    fn any_running(&self) -> bool {
        self.senders.iter().any(|s| s.session.is_running()) || self.reflectors.iter().any(|r| r.is_running())
    }

    /// Interval of the armed clock, if any session is running.
    pub fn interval(&self) -> Option<SimDuration> {
        self.clock.map(|c| c.interval)
    }
}

/// True when `list` equals `session_list` with its last SID replaced.
fn matches_with_punt(list: &[SegmentId], session_list: &SidList) -> bool {
    let ours = session_list.segments();
    list.len() == ours.len() && list[..list.len() - 1] == ours[..ours.len() - 1]
}

impl Node {
    pub fn agents(&self) -> &Agents {
        &self.agents
    }

    /// Current block for a clock of period `interval`.
    pub fn epoch_at(now: SimTime, interval: SimDuration) -> u64 {
        now.0 / interval.0
    }

    /// Arms the color clock if idle, catching the engine up to the epoch
    /// containing `now`. Fails if a different interval is already in use.
    pub(crate) fn arm_clock(&mut self, interval: SimDuration, now: SimTime) -> Result<(), ControlError> {
        if let Some(clock) = self.agents.clock {
            if clock.interval != interval {
                return Err(ControlError::InvalidOptions(format!(
                    "node {} already runs sessions with interval {}, not {}",
                    self.name, clock.interval, interval
                )));
            }
            return Ok(());
        }
        let target = Self::epoch_at(now, interval);
        while self.engine().color_state().epoch < target {
            let next = self.engine().color_state().epoch + 1;
            self.engine().set_active_color(next)?;
        }
        self.agents.generation += 1;
        let generation = self.agents.generation;
        self.agents.clock = Some(ColorClock { interval, generation });
        self.agents.timers.push(Timer {
            at: SimTime((target + 1) * interval.0),
            kind: TimerKind::ColorSwitch {
                generation,
                epoch: target + 1,
            },
        });
        Ok(())
    }

    /// Stops the clock once no session is running; pending timers go stale.
    pub(crate) fn disarm_clock_if_idle(&mut self) {
        if !self.agents.any_running() {
            self.agents.clock = None;
            self.agents.generation += 1;
        }
    }

    pub fn handle_timer(&mut self, kind: TimerKind, now: SimTime) -> Vec<ForwardingDecision> {
        let Some(clock) = self.agents.clock else {
            return Vec::new();
        };
        match kind {
            TimerKind::ColorSwitch { generation, epoch } if generation == clock.generation => {
                if let Err(err) = self.engine().set_active_color(epoch) {
                    // Unreachable while timers are generation-checked.
                    panic!("color clock out of step on {}: {err}", self.name);
                }
                self.agents.timers.push(Timer {
                    at: now + clock.interval,
                    kind: TimerKind::ColorSwitch {
                        generation,
                        epoch: epoch + 1,
                    },
                });
                for margin in self.agents.running_margins() {
                    self.agents.timers.push(Timer {
                        at: now + margin,
                        kind: TimerKind::Read {
                            generation,
                            block: epoch - 1,
                            margin,
                        },
                    });
                }
                Vec::new()
            }
            TimerKind::Read {
                generation,
                block,
                margin,
            } if generation == clock.generation => self.read_block(block, margin, now),
            _ => Vec::new(),
        }
    }

    fn snapshot(&self, tx_key: &FlowKey, rx_key: &FlowKey, block: u64, now: SimTime) -> BlockSnapshot {
        let color = Color::for_epoch(block);
        let tx = self.engine().read_counters(tx_key, color);
        let rx = self.engine().read_counters(rx_key, color);
        let active_read = tx.as_ref().is_ok_and(|s| s.active_read) || rx.as_ref().is_ok_and(|s| s.active_read);
        BlockSnapshot {
            at: now,
            tx: tx.map_or(0, |s| s.packets),
            rx: rx.map_or(0, |s| s.packets),
            active_read,
        }
    }

    fn read_block(&mut self, block: u64, margin: SimDuration, now: SimTime) -> Vec<ForwardingDecision> {
        let mut probes = Vec::new();
        for i in 0..self.agents.reflectors.len() {
            let r = &self.agents.reflectors[i];
            if !r.is_running() || r.options.color.delay_margin != margin {
                continue;
            }
            let snap = self.snapshot(&r.reverse_key(), &r.forward_key(), block, now);
            let r = &mut self.agents.reflectors[i];
            r.snapshots.insert(block, snap);
            r.snapshots.retain(|&b, _| b + SNAPSHOT_HISTORY > block);
        }
        for i in 0..self.agents.senders.len() {
            let s = &self.agents.senders[i];
            if !s.session.is_running() || s.session.options.color.delay_margin != margin {
                continue;
            }
            let snap = self.snapshot(&s.forward_key(), &s.reverse_key(), block, now);
            let address = self.address;
            let s = &mut self.agents.senders[i];
            s.snapshots.insert(block, snap);
            s.snapshots.retain(|&b, _| b + SNAPSHOT_HISTORY > block);
            if block < s.first_block {
                continue;
            }
            if let Some(packet) = sender_emit_query(s, block, snap.tx, address, now) {
                probes.push(packet);
            }
        }
        probes.into_iter().map(|p| self.originate(p)).collect()
    }

    /// Handles a packet punted by an END.OP SID: a query for one of our
    /// reflector sessions or an in-band response for a sender session.
    pub fn handle_punt(&mut self, packet: Packet, now: SimTime) -> Vec<ForwardingDecision> {
        let (Some(srh), Some(udp)) = (&packet.srh, packet.udp_datagram()) else {
            return Vec::new();
        };
        let list = srh.sid_list();
        let port = udp.dst_port;
        let reflector = self.agents.reflectors.iter().position(|r| {
            r.is_running() && r.options.refl_udp_port == port && matches_with_punt(list.segments(), &r.sdlist)
        });
        if let Some(i) = reflector {
            return match decode_lm_query(&udp.data) {
                Ok(query) => self.reflector_on_query(i, &query, packet.ipv6.src, now).into_iter().collect(),
                Err(err) => {
                    self.record(now, DiagnosticKind::MalformedProbe { error: err.to_string() });
                    Vec::new()
                }
            };
        }
        let sender = self.agents.senders.iter().position(|s| {
            s.session.is_running()
                && s.session.options.ss_udp_port == port
                && matches_with_punt(list.segments(), &s.session.sdlistreverse)
        });
        match sender {
            Some(i) => match decode_lm_response(&udp.data) {
                Ok(response) => self.sender_on_response(i, &response, now),
                Err(err) => self.record(now, DiagnosticKind::MalformedProbe { error: err.to_string() }),
            },
            None => self.record(now, DiagnosticKind::UnknownSession { dst_port: port }),
        }
        Vec::new()
    }

    /// Handles a packet addressed to the node itself; out-of-band responses
    /// arrive this way.
    pub fn handle_local(&mut self, packet: &Packet, now: SimTime) {
        let Some(udp) = packet.udp_datagram() else {
            return;
        };
        let sender = self.agents.senders.iter().position(|s| {
            s.session.is_running()
                && s.session.options.response_mode == ResponseMode::OutOfBand
                && s.session.options.ss_udp_port == udp.dst_port
        });
        match sender {
            Some(i) => match decode_lm_response(&udp.data) {
                Ok(response) => self.sender_on_response(i, &response, now),
                Err(err) => self.record(now, DiagnosticKind::MalformedProbe { error: err.to_string() }),
            },
            None => self.record(now, DiagnosticKind::UnknownSession { dst_port: udp.dst_port }),
        }
    }

    fn reflector_on_query(
        &mut self,
        index: usize,
        query: &LmQuery,
        sender_address: std::net::Ipv6Addr,
        now: SimTime,
    ) -> Option<ForwardingDecision> {
        let current = self.engine().color_state().epoch;
        let block = resolve_epoch(query.block_number, current);
        let r = &self.agents.reflectors[index];
        let snap = match r.snapshots.get(&block) {
            Some(snap) => *snap,
            None => {
                let live = self.snapshot(&r.reverse_key(), &r.forward_key(), block, now);
                let measure_id = r.measure_id;
                self.record(now, DiagnosticKind::EarlyRead { measure_id, block });
                live
            }
        };
        let address = self.address;
        let r = &mut self.agents.reflectors[index];
        let mut response = LmResponse::echo(query);
        response.reflector_rx_counter = snap.rx;
        let ports = (r.options.refl_udp_port, r.options.ss_udp_port);
        let packet = if query.ctrl_code == CTRL_IN_BAND {
            response.reflector_seq = r.next_seq;
            r.next_seq = r.next_seq.wrapping_add(1);
            response.reflector_tx_counter = snap.tx;
            response.reflector_block_number = block as u8;
            build_probe_packet(
                &LmMessage::Response(response),
                &r.sdlistreverse,
                r.options.remote_punt_sid,
                address,
                ports,
            )
            .ok()?
        } else {
            Packet::udp(address, sender_address, ports.0, ports.1, LmMessage::Response(response).encode())
        };
        r.responses_sent += 1;
        Some(self.originate(packet))
    }

    fn sender_on_response(&mut self, index: usize, response: &LmResponse, now: SimTime) {
        let s = &mut self.agents.senders[index];
        let measure_id = s.session.measure_id;
        let Some(pending) = s.pending.remove(&response.sender_seq) else {
            let seq = response.sender_seq;
            self.record(now, DiagnosticKind::UnmatchedSeq { measure_id, seq });
            return;
        };
        if response.sender_tx_counter != pending.tx || response.sender_block_number != pending.block as u8 {
            let seq = response.sender_seq;
            self.record(now, DiagnosticKind::UnmatchedSeq { measure_id, seq });
            return;
        }
        let margin = s.session.options.color.delay_margin;
        let margin_suspect = now.saturating_sub(pending.sent_at) > margin;
        let own = s.snapshots.get(&pending.block).copied();
        let mut samples = vec![LossSample {
            epoch: pending.block,
            direction: PathDirection::Forward,
            tx: response.sender_tx_counter,
            rx: response.reflector_rx_counter,
            read_time: pending.sent_at,
            active_read: own.is_some_and(|o| o.active_read),
            margin_suspect,
        }];
        if response.in_band() {
            let block = resolve_epoch(response.reflector_block_number, pending.block);
            let local = match s.snapshots.get(&block) {
                Some(snap) => *snap,
                None => {
                    let key = s.reverse_key();
                    let live = self.snapshot(&key, &key, block, now);
                    self.record(now, DiagnosticKind::EarlyRead { measure_id, block });
                    live
                }
            };
            samples.push(LossSample {
                epoch: block,
                direction: PathDirection::Reverse,
                tx: response.reflector_tx_counter,
                rx: local.rx,
                read_time: pending.sent_at,
                active_read: local.active_read,
                margin_suspect,
            });
        }
        for sample in samples {
            let s = &mut self.agents.senders[index];
            if let Err(err) = s.session.compute_interval_loss(sample) {
                self.record(
                    now,
                    DiagnosticKind::RejectedSample {
                        measure_id,
                        error: err.to_string(),
                    },
                );
            }
        }
    }
}

/// Builds the LM query for `block` and records it as pending.
fn sender_emit_query(
    agent: &mut SenderAgent,
    block: u64,
    tx: u64,
    src: std::net::Ipv6Addr,
    now: SimTime,
) -> Option<Packet> {
    let options = &agent.session.options;
    let query = LmQuery {
        sender_seq: agent.next_seq,
        sender_tx_counter: tx,
        block_number: block as u8,
        flags: LmFlags::default(),
        ctrl_code: match options.response_mode {
            ResponseMode::InBand => CTRL_IN_BAND,
            ResponseMode::OutOfBand => CTRL_OUT_OF_BAND,
        },
    };
    let packet = build_probe_packet(
        &LmMessage::Query(query),
        &agent.session.sdlist,
        options.remote_punt_sid,
        src,
        (options.ss_udp_port, options.refl_udp_port),
    )
    .ok()?;
    agent.pending.insert(
        query.sender_seq,
        PendingQuery {
            block,
            sent_at: now,
            tx,
        },
    );
    agent.next_seq = agent.next_seq.wrapping_add(1);
    // Queries whose responses never came back.
    agent.pending.retain(|_, p| p.block + SNAPSHOT_HISTORY > block);
    Some(packet)
}
