//! Node-side handlers for the southbound RPCs.

use std::str::FromStr;

use super::rpc::{
    AuthenticationMode, ColorOptions, FlowMonitoringDataResponse, MeasurementProtocol, MeasurementType, ResponseMode,
    RetriveFlowMonitoringDataRequest, SRv6Behavior, SRv6ManagerReply, SRv6ManagerRequest, SRv6Path, SRv6Segment,
    StartFlowMonitoringReflectorReply, StartFlowMonitoringReflectorRequest, StartFlowMonitoringSenderReply,
    StartFlowMonitoringSenderRequest, StatusCode, StopFlowMonitoringReply, StopFlowMonitoringRequest,
};
use super::session::{ColorParams, LossReport, MonitoringSession, SessionOptions, SessionState};
use super::ControlError;
use crate::counters::FlowKey;
use crate::dataplane::{EncapMode, LocalSid, LocalSidBehavior, Node, ReflectorAgent, SenderAgent, SrPolicy};
use crate::packet::{Ipv6Prefix, SegmentId, SidList};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManagerOp {
    Create,
    Get,
    Update,
    Remove,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Sender,
    Reflector,
}

impl ControlError {
    pub fn status_code(&self) -> StatusCode {
        match self {
            ControlError::NotFound(_) | ControlError::UnknownNode(_) => StatusCode::NotFound,
            ControlError::AlreadyExists(_) => StatusCode::AlreadyExists,
            ControlError::AlreadyRunning(_) => StatusCode::AlreadyRunning,
            ControlError::NotRunning(_) => StatusCode::NotRunning,
            ControlError::UnknownSession(_) => StatusCode::UnknownSession,
            _ => StatusCode::InvalidArgument,
        }
    }
}

fn invalid(msg: impl Into<String>) -> ControlError {
    ControlError::InvalidOptions(msg.into())
}

fn parse<T: FromStr>(what: &str, text: &str) -> Result<T, ControlError>
where
    T::Err: std::fmt::Display,
{
    text.parse().map_err(|e| invalid(format!("{what} {text:?}: {e}")))
}

fn segments_to_list(segs: &[SRv6Segment]) -> Result<SidList, ControlError> {
    let sids = segs
        .iter()
        .map(|s| parse::<SegmentId>("segment", &s.segment))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SidList::new(sids)?)
}

fn list_to_segments(list: &SidList) -> Vec<SRv6Segment> {
    list.segments()
        .iter()
        .map(|s| SRv6Segment { segment: s.to_string() })
        .collect()
}

fn policy_from_path(path: &SRv6Path) -> Result<SrPolicy, ControlError> {
    let encapmode = match path.encapmode.as_str() {
        "" | "encap" => EncapMode::Encap,
        other => return Err(invalid(format!("encapmode {other:?} unsupported"))),
    };
    Ok(SrPolicy {
        destination: parse::<Ipv6Prefix>("destination", &path.destination)?,
        sid_list: segments_to_list(&path.sr_path)?,
        encapmode,
        table: path.table,
        device: path.device.clone(),
    })
}

fn path_from_policy(policy: &SrPolicy) -> SRv6Path {
    SRv6Path {
        destination: policy.destination.to_string(),
        sr_path: list_to_segments(&policy.sid_list),
        encapmode: "encap".into(),
        device: policy.device.clone(),
        table: policy.table,
    }
}

fn local_sid_from_behavior(entity: &SRv6Behavior) -> Result<LocalSid, ControlError> {
    let behavior = match entity.action.as_str() {
        "End" => LocalSidBehavior::End,
        "End.DT6" => LocalSidBehavior::EndDecap,
        "End.DX6" if !entity.nexthop.is_empty() => LocalSidBehavior::EndDecap,
        "End.DX6" => return Err(invalid("End.DX6 requires nexthop")),
        "End.OP" => LocalSidBehavior::EndOp,
        other => return Err(invalid(format!("action {other:?} unsupported"))),
    };
    Ok(LocalSid {
        sid: parse::<SegmentId>("segment", &entity.segment)?,
        behavior,
        entity: Some(entity.clone()),
    })
}

fn behavior_from_local_sid(local: &LocalSid) -> SRv6Behavior {
    local.entity.clone().unwrap_or_else(|| SRv6Behavior {
        segment: local.sid.to_string(),
        action: match local.behavior {
            LocalSidBehavior::End => "End",
            LocalSidBehavior::EndDecap => "End.DT6",
            LocalSidBehavior::EndOp => "End.OP",
        }
        .into(),
        ..SRv6Behavior::default()
    })
}

fn ports(ss: u32, refl: u32) -> Result<(u16, u16), ControlError> {
    let ss = u16::try_from(ss).map_err(|_| invalid(format!("ss_udp_port {ss} out of range")))?;
    let refl = u16::try_from(refl).map_err(|_| invalid(format!("refl_udp_port {refl} out of range")))?;
    if ss == 0 || refl == 0 {
        return Err(invalid("udp ports must be nonzero"));
    }
    if ss == refl {
        return Err(invalid(format!("ss_udp_port and refl_udp_port are both {ss}")));
    }
    Ok((ss, refl))
}

fn check_modes(protocol: i32, auth: i32, kind: i32) -> Result<(), ControlError> {
    if MeasurementProtocol::try_from(protocol) != Ok(MeasurementProtocol::Twamp) {
        return Err(invalid(format!("measurement_protocol {protocol} unsupported")));
    }
    if AuthenticationMode::try_from(auth) != Ok(AuthenticationMode::Unauthenticated) {
        return Err(invalid(format!("authentication_mode {auth} unsupported")));
    }
    if MeasurementType::try_from(kind) != Ok(MeasurementType::Loss) {
        return Err(invalid(format!("measurement_type {kind} unsupported")));
    }
    Ok(())
}

struct ParsedStart {
    sdlist: SidList,
    sdlistreverse: SidList,
    options: SessionOptions,
}

#[allow(clippy::too_many_arguments)]
fn parse_start(
    sdlist: &str,
    sdlistreverse: &str,
    (ss, refl): (u32, u32),
    color: Option<&ColorOptions>,
    remote_punt_sid: &str,
    response_mode: i32,
    in_interfaces: &[String],
    out_interfaces: &[String],
) -> Result<ParsedStart, ControlError> {
    let (ss_udp_port, refl_udp_port) = ports(ss, refl)?;
    Ok(ParsedStart {
        sdlist: parse("sdlist", sdlist)?,
        sdlistreverse: parse("sdlistreverse", sdlistreverse)?,
        options: SessionOptions {
            ss_udp_port,
            refl_udp_port,
            color: ColorParams::from_options(color)?,
            response_mode: ResponseMode::try_from(response_mode)
                .map_err(|_| invalid(format!("response_mode {response_mode} unknown")))?,
            remote_punt_sid: parse("remote_punt_sid", remote_punt_sid)?,
            in_interfaces: in_interfaces.to_vec(),
            out_interfaces: out_interfaces.to_vec(),
        },
    })
}

/// First block whose whole interval lies after `now`'s session start.
fn first_full_block(now: SimTime, options: &SessionOptions) -> u64 {
    now.0.div_ceil(options.color.interval.0)
}

impl Node {
    pub fn srv6_manager_apply(
        &mut self,
        op: ManagerOp,
        req: &SRv6ManagerRequest,
    ) -> Result<SRv6ManagerReply, ControlError> {
        let mut reply = SRv6ManagerReply {
            status: StatusCode::Success as i32,
            ..Default::default()
        };
        for path in &req.srv6_path_request {
            let destination = parse::<Ipv6Prefix>("destination", &path.destination)?;
            let existing = self
                .policies()
                .iter()
                .find(|p| p.table == path.table && p.destination == destination)
                .cloned();
            let key = format!("path {destination} table {}", path.table);
            match (op, existing) {
                (ManagerOp::Create, Some(_)) => return Err(ControlError::AlreadyExists(key)),
                (ManagerOp::Create, None) | (ManagerOp::Update, Some(_)) => {
                    self.install_policy(policy_from_path(path)?);
                }
                (ManagerOp::Get, Some(p)) => reply.paths.push(path_from_policy(&p)),
                (ManagerOp::Remove, Some(p)) => {
                    self.remove_policy(p.table, p.destination);
                }
                (_, None) => return Err(ControlError::NotFound(key)),
            }
        }
        for behavior in &req.srv6_behavior_request {
            let sid = parse::<SegmentId>("segment", &behavior.segment)?;
            let key = format!("behavior {sid}");
            match (op, self.local_sid(sid).cloned()) {
                (ManagerOp::Create, Some(_)) => return Err(ControlError::AlreadyExists(key)),
                (ManagerOp::Create, None) | (ManagerOp::Update, Some(_)) => {
                    self.install_local_sid(local_sid_from_behavior(behavior)?);
                }
                (ManagerOp::Get, Some(local)) => reply.behaviors.push(behavior_from_local_sid(&local)),
                (ManagerOp::Remove, Some(_)) => {
                    self.remove_local_sid(sid);
                }
                (_, None) => return Err(ControlError::NotFound(key)),
            }
        }
        Ok(reply)
    }

    fn check_interval(&self, params: &ColorParams) -> Result<(), ControlError> {
        match self.agents().interval() {
            Some(interval) if interval != params.interval => Err(invalid(format!(
                "node {} already runs sessions with interval {interval}",
                self.name
            ))),
            _ => Ok(()),
        }
    }

    /// Adds both flows, undoing the first if the second conflicts.
    fn add_flow_pair(&self, a: FlowKey, b: FlowKey) -> Result<(), ControlError> {
        self.engine().add_monitored_flow(&a)?;
        if let Err(err) = self.engine().add_monitored_flow(&b) {
            let _ = self.engine().remove_monitored_flow(&a);
            return Err(err.into());
        }
        Ok(())
    }

    pub fn start_flow_monitoring_sender(
        &mut self,
        req: &StartFlowMonitoringSenderRequest,
        now: SimTime,
    ) -> Result<StartFlowMonitoringSenderReply, ControlError> {
        let opts = req
            .sender_options
            .as_ref()
            .ok_or_else(|| invalid("missing sender_options"))?;
        check_modes(opts.measurement_protocol, opts.authentication_mode, opts.measurement_type)?;
        let parsed = parse_start(
            &req.sdlist,
            &req.sdlistreverse,
            (opts.ss_udp_port, opts.refl_udp_port),
            req.color_options.as_ref(),
            &req.remote_punt_sid,
            req.response_mode,
            &req.in_interfaces,
            &req.out_interfaces,
        )?;
        if self.agents().running_sender(&parsed.sdlist).is_some() {
            return Err(ControlError::AlreadyRunning(parsed.sdlist));
        }
        if parsed.options.response_mode == ResponseMode::OutOfBand {
            let clash = self.agents().senders().iter().any(|s| {
                s.session.is_running()
                    && s.session.options.response_mode == ResponseMode::OutOfBand
                    && s.session.options.ss_udp_port == parsed.options.ss_udp_port
            });
            if clash {
                return Err(invalid(format!(
                    "ss_udp_port {} already used by an out-of-band session",
                    parsed.options.ss_udp_port
                )));
            }
        }
        self.check_interval(&parsed.options.color)?;
        self.add_flow_pair(
            FlowKey::ingress(parsed.sdlist.clone()),
            FlowKey::egress(parsed.sdlistreverse.clone()),
        )?;
        self.arm_clock(parsed.options.color.interval, now)?;
        let first_block = first_full_block(now, &parsed.options);
        let session = MonitoringSession::new(req.measure_id, parsed.sdlist, parsed.sdlistreverse, parsed.options);
        self.agents.senders.push(SenderAgent::new(session, first_block));
        Ok(StartFlowMonitoringSenderReply {
            status: StatusCode::Success as i32,
        })
    }

    pub fn start_flow_monitoring_reflector(
        &mut self,
        req: &StartFlowMonitoringReflectorRequest,
        now: SimTime,
    ) -> Result<StartFlowMonitoringReflectorReply, ControlError> {
        let opts = req
            .reflector_options
            .as_ref()
            .ok_or_else(|| invalid("missing reflector_options"))?;
        check_modes(opts.measurement_protocol, opts.authentication_mode, opts.measurement_type)?;
        let parsed = parse_start(
            &req.sdlist,
            &req.sdlistreverse,
            (opts.ss_udp_port, opts.refl_udp_port),
            req.color_options.as_ref(),
            &req.remote_punt_sid,
            req.response_mode,
            &req.in_interfaces,
            &req.out_interfaces,
        )?;
        if self.agents().running_reflector(&parsed.sdlist).is_some() {
            return Err(ControlError::AlreadyRunning(parsed.sdlist));
        }
        self.check_interval(&parsed.options.color)?;
        self.add_flow_pair(
            FlowKey::egress(parsed.sdlist.clone()),
            FlowKey::ingress(parsed.sdlistreverse.clone()),
        )?;
        self.arm_clock(parsed.options.color.interval, now)?;
        self.agents.reflectors.push(ReflectorAgent::new(
            req.measure_id,
            parsed.sdlist,
            parsed.sdlistreverse,
            parsed.options,
        ));
        Ok(StartFlowMonitoringReflectorReply {
            status: StatusCode::Success as i32,
        })
    }

    /// Stops the running session for `sdlist`. Its flows leave the engine;
    /// its reports stay retrievable.
    pub fn stop_flow_monitoring(&mut self, role: Role, sdlist: &SidList) -> Result<(), ControlError> {
        let (forward, reverse) = match role {
            Role::Sender => {
                let agent = self
                    .agents
                    .senders
                    .iter_mut()
                    .find(|s| s.session.is_running() && &s.session.sdlist == sdlist)
                    .ok_or_else(|| ControlError::NotRunning(sdlist.clone()))?;
                agent.session.state = SessionState::Stopped;
                (
                    FlowKey::ingress(agent.session.sdlist.clone()),
                    FlowKey::egress(agent.session.sdlistreverse.clone()),
                )
            }
            Role::Reflector => {
                let agent = self
                    .agents
                    .reflectors
                    .iter_mut()
                    .find(|r| r.is_running() && &r.sdlist == sdlist)
                    .ok_or_else(|| ControlError::NotRunning(sdlist.clone()))?;
                agent.state = SessionState::Stopped;
                (FlowKey::egress(agent.sdlist.clone()), FlowKey::ingress(agent.sdlistreverse.clone()))
            }
        };
        let _ = self.engine().remove_monitored_flow(&forward);
        let _ = self.engine().remove_monitored_flow(&reverse);
        self.disarm_clock_if_idle();
        Ok(())
    }

    pub fn stop_flow_monitoring_sender(
        &mut self,
        req: &StopFlowMonitoringRequest,
    ) -> Result<StopFlowMonitoringReply, ControlError> {
        self.stop_flow_monitoring(Role::Sender, &parse("sdlist", &req.sdlist)?)?;
        Ok(StopFlowMonitoringReply {
            status: StatusCode::Success as i32,
        })
    }

    pub fn stop_flow_monitoring_reflector(
        &mut self,
        req: &StopFlowMonitoringRequest,
    ) -> Result<StopFlowMonitoringReply, ControlError> {
        self.stop_flow_monitoring(Role::Reflector, &parse("sdlist", &req.sdlist)?)?;
        Ok(StopFlowMonitoringReply {
            status: StatusCode::Success as i32,
        })
    }

    /// All interval reports of the most recent sender session for `sdlist`,
    /// ordered by epoch (forward before reverse). Does not drain them.
    pub fn retrieve_flow_monitoring_results(&self, sdlist: &SidList) -> Result<Vec<LossReport>, ControlError> {
        let agent = self
            .agents()
            .senders()
            .iter()
            .rev()
            .find(|s| &s.session.sdlist == sdlist)
            .ok_or_else(|| ControlError::UnknownSession(sdlist.clone()))?;
        let mut reports = agent.session.reports().to_vec();
        reports.sort_by_key(|r| (r.epoch, r.direction));
        Ok(reports)
    }

    pub fn retrive_flow_monitoring_results(
        &self,
        req: &RetriveFlowMonitoringDataRequest,
    ) -> Result<FlowMonitoringDataResponse, ControlError> {
        let reports = self.retrieve_flow_monitoring_results(&parse("sdlist", &req.sdlist)?)?;
        Ok(FlowMonitoringDataResponse {
            status: StatusCode::Success as i32,
            measurement_data: reports.iter().map(LossReport::to_measurement_data).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::rpc::{ReflectorOptions, SenderOptions};

    fn node() -> Node {
        Node::new("R1", "fcff:1::1".parse().unwrap())
    }

    fn path_request(dest: &str, path: &[&str]) -> SRv6ManagerRequest {
        SRv6ManagerRequest {
            srv6_path_request: vec![SRv6Path {
                destination: dest.into(),
                sr_path: path.iter().map(|s| SRv6Segment { segment: (*s).into() }).collect(),
                encapmode: "encap".into(),
                device: "eth0".into(),
                table: 0,
            }],
            srv6_behavior_request: vec![],
        }
    }

    pub(crate) fn sender_request(ss: u32, refl: u32) -> StartFlowMonitoringSenderRequest {
        StartFlowMonitoringSenderRequest {
            measure_id: 7,
            sdlist: "fcff:2::100,fcff:8::d6".into(),
            sdlistreverse: "fcff:2::100,fcff:1::d6".into(),
            sender_options: Some(SenderOptions {
                ss_udp_port: ss,
                refl_udp_port: refl,
                ..Default::default()
            }),
            color_options: Some(ColorOptions {
                interval_duration: 10.0,
                delay_margin: 5.0,
                number_of_colors: 2,
            }),
            remote_punt_sid: "fcff:8::ff".into(),
            ..Default::default()
        }
    }

    #[test]
    fn path_crud() {
        let mut n = node();
        let create = path_request("fd00:8::/64", &["fcff:2::100", "fcff:7::100", "fcff:8::d6"]);
        n.srv6_manager_apply(ManagerOp::Create, &create).unwrap();
        assert!(matches!(
            n.srv6_manager_apply(ManagerOp::Create, &create),
            Err(ControlError::AlreadyExists(_))
        ));
        let got = n.srv6_manager_apply(ManagerOp::Get, &create).unwrap();
        assert_eq!(got.paths, create.srv6_path_request);
        let update = path_request("fd00:8::/64", &["fcff:8::d6"]);
        n.srv6_manager_apply(ManagerOp::Update, &update).unwrap();
        assert_eq!(n.policies()[0].sid_list.len(), 1);
        n.srv6_manager_apply(ManagerOp::Remove, &create).unwrap();
        assert!(matches!(
            n.srv6_manager_apply(ManagerOp::Get, &create),
            Err(ControlError::NotFound(_))
        ));
    }

    #[test]
    fn behavior_crud() {
        let mut n = node();
        let req = SRv6ManagerRequest {
            srv6_path_request: vec![],
            srv6_behavior_request: vec![SRv6Behavior {
                segment: "fcff:1::ff".into(),
                action: "End.OP".into(),
                ..Default::default()
            }],
        };
        n.srv6_manager_apply(ManagerOp::Create, &req).unwrap();
        let got = n.srv6_manager_apply(ManagerOp::Get, &req).unwrap();
        assert_eq!(got.behaviors, req.srv6_behavior_request);
        let bad = SRv6ManagerRequest {
            srv6_path_request: vec![],
            srv6_behavior_request: vec![SRv6Behavior {
                segment: "fcff:1::d6".into(),
                action: "End.DX6".into(),
                ..Default::default()
            }],
        };
        assert!(matches!(
            n.srv6_manager_apply(ManagerOp::Create, &bad),
            Err(ControlError::InvalidOptions(_))
        ));
        n.srv6_manager_apply(ManagerOp::Remove, &req).unwrap();
        assert!(n.local_sid("fcff:1::ff".parse().unwrap()).is_none());
    }

    #[test]
    fn sender_lifecycle() {
        let mut n = node();
        assert!(matches!(
            n.start_flow_monitoring_sender(&sender_request(5000, 5000), SimTime::ZERO),
            Err(ControlError::InvalidOptions(_))
        ));
        n.start_flow_monitoring_sender(&sender_request(5000, 5001), SimTime::ZERO)
            .unwrap();
        assert!(matches!(
            n.start_flow_monitoring_sender(&sender_request(5000, 5001), SimTime::ZERO),
            Err(ControlError::AlreadyRunning(_))
        ));
        let sdlist: SidList = "fcff:2::100,fcff:8::d6".parse().unwrap();
        assert!(n.engine().is_monitored(crate::counters::Direction::Ingress, sdlist.segments()));
        assert_eq!(n.retrieve_flow_monitoring_results(&sdlist).unwrap(), vec![]);
        let timers = n.take_timers();
        assert_eq!(timers.len(), 1);
        assert_eq!(timers[0].at, SimTime::from_secs_f64(10.0));

        n.stop_flow_monitoring(Role::Sender, &sdlist).unwrap();
        assert!(!n.engine().is_monitored(crate::counters::Direction::Ingress, sdlist.segments()));
        assert!(matches!(
            n.stop_flow_monitoring(Role::Sender, &sdlist),
            Err(ControlError::NotRunning(_))
        ));
        assert_eq!(n.retrieve_flow_monitoring_results(&sdlist).unwrap(), vec![]);
        // The clock is disarmed, so the old switch timer is ignored.
        assert!(n.handle_timer(timers[0].kind, timers[0].at).is_empty());
        assert_eq!(n.engine().color_state().epoch, 0);
    }

    #[test]
    fn reflector_needs_options_and_matching_interval() {
        let mut n = node();
        n.start_flow_monitoring_sender(&sender_request(5000, 5001), SimTime::ZERO)
            .unwrap();
        let mut req = StartFlowMonitoringReflectorRequest {
            measure_id: 9,
            sdlist: "fcff:3::d6".into(),
            sdlistreverse: "fcff:1::d6".into(),
            reflector_options: None,
            color_options: Some(ColorOptions {
                interval_duration: 4.0,
                delay_margin: 1.0,
                number_of_colors: 2,
            }),
            remote_punt_sid: "fcff:3::ff".into(),
            ..Default::default()
        };
        assert!(n.start_flow_monitoring_reflector(&req, SimTime::ZERO).is_err());
        req.reflector_options = Some(ReflectorOptions {
            ss_udp_port: 5000,
            refl_udp_port: 5001,
            ..Default::default()
        });
        assert!(matches!(
            n.start_flow_monitoring_reflector(&req, SimTime::ZERO),
            Err(ControlError::InvalidOptions(_))
        ));
        req.color_options.as_mut().unwrap().interval_duration = 10.0;
        n.start_flow_monitoring_reflector(&req, SimTime::ZERO).unwrap();
    }

    #[test]
    fn unknown_session_on_retrieve() {
        let n = node();
        assert!(matches!(
            n.retrieve_flow_monitoring_results(&"fcff:8::d6".parse().unwrap()),
            Err(ControlError::UnknownSession(_))
        ));
    }
}
