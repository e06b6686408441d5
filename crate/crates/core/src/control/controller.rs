//! The controller: provisions nodes over the southbound API, manages
//! sender/reflector session pairs and publishes their reports to sinks.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::rpc::{
    ColorOptions, ReflectorOptions, ResponseMode, SRv6ManagerReply, SRv6ManagerRequest, SenderOptions,
    StartFlowMonitoringReflectorRequest, StartFlowMonitoringSenderRequest,
};
use super::session::{LossReport, PathDirection, SessionState};
use super::southbound::{ManagerOp, Role};
use super::ControlError;
use crate::collect::{MeasurementRecord, MeasurementSink, TopologyRecord};
use crate::dataplane::Node;
use crate::packet::{SegmentId, SidList};
use crate::time::SimTime;

/// Access to the nodes the controller manages.
pub trait Southbound {
    fn node(&self, name: &str) -> Result<&Node, ControlError>;
    fn node_mut(&mut self, name: &str) -> Result<&mut Node, ControlError>;
    fn now(&self) -> SimTime;
}

/// A monitored SID-list pair between two nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSpec {
    pub measure_id: u32,
    pub sender: String,
    pub reflector: String,
    pub sdlist: SidList,
    pub sdlistreverse: SidList,
    /// END.OP SIDs of the two ends.
    pub sender_punt_sid: SegmentId,
    pub reflector_punt_sid: SegmentId,
    /// Seconds.
    pub interval: f64,
    /// Seconds; zero selects half the interval.
    pub delay_margin: f64,
    pub ss_udp_port: u16,
    pub refl_udp_port: u16,
    pub response_mode: ResponseMode,
}

impl SessionSpec {
    fn color_options(&self) -> ColorOptions {
        ColorOptions {
            interval_duration: self.interval,
            delay_margin: self.delay_margin,
            number_of_colors: 2,
        }
    }

    pub fn sender_request(&self) -> StartFlowMonitoringSenderRequest {
        StartFlowMonitoringSenderRequest {
            measure_id: self.measure_id,
            sdlist: self.sdlist.to_string(),
            sdlistreverse: self.sdlistreverse.to_string(),
            sender_options: Some(SenderOptions {
                ss_udp_port: self.ss_udp_port.into(),
                refl_udp_port: self.refl_udp_port.into(),
                ..Default::default()
            }),
            color_options: Some(self.color_options()),
            remote_punt_sid: self.reflector_punt_sid.to_string(),
            response_mode: self.response_mode as i32,
            ..Default::default()
        }
    }

    pub fn reflector_request(&self) -> StartFlowMonitoringReflectorRequest {
        StartFlowMonitoringReflectorRequest {
            measure_id: self.measure_id,
            sdlist: self.sdlist.to_string(),
            sdlistreverse: self.sdlistreverse.to_string(),
            reflector_options: Some(ReflectorOptions {
                ss_udp_port: self.ss_udp_port.into(),
                refl_udp_port: self.refl_udp_port.into(),
                ..Default::default()
            }),
            color_options: Some(self.color_options()),
            remote_punt_sid: self.sender_punt_sid.to_string(),
            response_mode: self.response_mode as i32,
            ..Default::default()
        }
    }

    pub fn sid_list(&self, direction: PathDirection) -> &SidList {
        match direction {
            PathDirection::Forward => &self.sdlist,
            PathDirection::Reverse => &self.sdlistreverse,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SessionBinding {
    pub spec: SessionSpec,
    pub state: SessionState,
    published: BTreeSet<(u64, PathDirection)>,
}

impl SessionBinding {
    pub fn published(&self) -> usize {
        self.published.len()
    }
}

#[derive(Default)]
pub struct Controller {
    bindings: Vec<SessionBinding>,
    sinks: Vec<Arc<dyn MeasurementSink>>,
    topology: TopologyRecord,
}

impl std::fmt::Debug for Controller {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Controller")
            .field("bindings", &self.bindings)
            .field("sinks", &self.sinks.len())
            .finish_non_exhaustive()
    }
}

impl Controller {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn subscribe(&mut self, sink: Arc<dyn MeasurementSink>) {
        self.sinks.push(sink);
    }

    pub fn set_topology(&mut self, topology: TopologyRecord) {
        self.topology = topology;
    }

    pub fn topology(&self) -> &TopologyRecord {
        &self.topology
    }

    pub fn bindings(&self) -> &[SessionBinding] {
        &self.bindings
    }

    pub fn binding(&self, measure_id: u32) -> Option<&SessionBinding> {
        self.bindings.iter().rev().find(|b| b.spec.measure_id == measure_id)
    }

    pub fn srv6_manager<S: Southbound>(
        &mut self,
        net: &mut S,
        node: &str,
        op: ManagerOp,
        req: &SRv6ManagerRequest,
    ) -> Result<SRv6ManagerReply, ControlError> {
        net.node_mut(node)?.srv6_manager_apply(op, req)
    }

    /// Starts the reflector, then the sender; a failed sender start rolls
    /// the reflector back.
    pub fn start_session<S: Southbound>(&mut self, net: &mut S, spec: SessionSpec) -> Result<(), ControlError> {
        if self
            .bindings
            .iter()
            .any(|b| b.spec.measure_id == spec.measure_id && b.state == SessionState::Running)
        {
            return Err(ControlError::AlreadyExists(format!("measure_id {}", spec.measure_id)));
        }
        net.node(&spec.sender)?;
        let now = net.now();
        net.node_mut(&spec.reflector)?
            .start_flow_monitoring_reflector(&spec.reflector_request(), now)?;
        if let Err(err) = net
            .node_mut(&spec.sender)?
            .start_flow_monitoring_sender(&spec.sender_request(), now)
        {
            let _ = net
                .node_mut(&spec.reflector)?
                .stop_flow_monitoring(Role::Reflector, &spec.sdlist);
            return Err(err);
        }
        self.bindings.push(SessionBinding {
            spec,
            state: SessionState::Running,
            published: BTreeSet::new(),
        });
        Ok(())
    }

    pub fn stop_session<S: Southbound>(&mut self, net: &mut S, measure_id: u32) -> Result<(), ControlError> {
        let binding = self
            .bindings
            .iter_mut()
            .rev()
            .find(|b| b.spec.measure_id == measure_id && b.state == SessionState::Running)
            .ok_or_else(|| ControlError::NotFound(format!("running session {measure_id}")))?;
        binding.state = SessionState::Stopped;
        let spec = binding.spec.clone();
        let sender = net
            .node_mut(&spec.sender)?
            .stop_flow_monitoring(Role::Sender, &spec.sdlist);
        let reflector = net
            .node_mut(&spec.reflector)?
            .stop_flow_monitoring(Role::Reflector, &spec.sdlist);
        sender.and(reflector)
    }

    /// Reports of a session, retrieved from its sender node.
    pub fn retrieve<S: Southbound>(&self, net: &S, measure_id: u32) -> Result<Vec<LossReport>, ControlError> {
        let binding = self
            .binding(measure_id)
            .ok_or_else(|| ControlError::NotFound(format!("session {measure_id}")))?;
        net.node(&binding.spec.sender)?
            .retrieve_flow_monitoring_results(&binding.spec.sdlist)
    }

    /// Retrieves every session's reports and publishes those not yet
    /// published. Returns how many were published.
    pub fn collect<S: Southbound>(&mut self, net: &S) -> Result<usize, ControlError> {
        let mut count = 0;
        for i in 0..self.bindings.len() {
            let spec = &self.bindings[i].spec;
            let reports = net.node(&spec.sender)?.retrieve_flow_monitoring_results(&spec.sdlist)?;
            for report in reports {
                if self.bindings[i].published.insert((report.epoch, report.direction)) {
                    self.publish_to_sinks(&self.bindings[i].spec, &report);
                    count += 1;
                }
            }
        }
        Ok(count)
    }

    /// Delivers `report` to every sink, in subscription order.
    pub fn publish_measurement(&self, report: &LossReport) -> Result<(), ControlError> {
        let binding = self
            .binding(report.measure_id)
            .ok_or_else(|| ControlError::NotFound(format!("session {}", report.measure_id)))?;
        self.publish_to_sinks(&binding.spec, report);
        Ok(())
    }

    fn publish_to_sinks(&self, spec: &SessionSpec, report: &LossReport) {
        let record = MeasurementRecord::from_report(report, spec.sid_list(report.direction));
        for sink in &self.sinks {
            sink.append(&record);
        }
    }
}
