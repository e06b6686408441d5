//! Sender-side monitoring sessions and interval-loss computation.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::rpc::{ColorOptions, MeasurementData, MeasurementDirection, ResponseMode};
use super::ControlError;
use crate::packet::{Color, SegmentId, SidList};
use crate::time::{SimDuration, SimTime};

/// Direction of a loss measurement relative to the session's sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathDirection {
    Forward,
    Reverse,
}

impl fmt::Display for PathDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathDirection::Forward => "forward",
            PathDirection::Reverse => "reverse",
        })
    }
}

impl std::str::FromStr for PathDirection {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forward" => Ok(PathDirection::Forward),
            "reverse" => Ok(PathDirection::Reverse),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

/// Validated coloring parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColorParams {
    pub interval: SimDuration,
    pub delay_margin: SimDuration,
}

impl ColorParams {
    pub fn new(interval: SimDuration, delay_margin: SimDuration) -> Result<Self, ControlError> {
        if interval.0 == 0 || delay_margin.0 == 0 || delay_margin >= interval {
            return Err(ControlError::InvalidOptions(format!(
                "need 0 < delay_margin ({delay_margin}) < interval ({interval})"
            )));
        }
        Ok(Self {
            interval,
            delay_margin,
        })
    }

    pub fn from_options(options: Option<&ColorOptions>) -> Result<Self, ControlError> {
        let options = options.ok_or_else(|| ControlError::InvalidOptions("missing color_options".into()))?;
        if !(options.interval_duration.is_finite() && options.interval_duration > 0.0) {
            return Err(ControlError::InvalidOptions("interval_duration must be positive".into()));
        }
        if !matches!(options.number_of_colors, 0 | 2) {
            return Err(ControlError::InvalidOptions(format!(
                "number_of_colors {} unsupported, only 2",
                options.number_of_colors
            )));
        }
        let interval = SimDuration::from_secs_f64(options.interval_duration);
        let delay_margin = if options.delay_margin == 0.0 {
            SimDuration(interval.0 / 2)
        } else if options.delay_margin.is_finite() && options.delay_margin > 0.0 {
            SimDuration::from_secs_f64(options.delay_margin)
        } else {
            return Err(ControlError::InvalidOptions("delay_margin must be positive".into()));
        };
        Self::new(interval, delay_margin)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Running,
    Stopped,
}

/// Cumulative counter pair for one block, as read at the two ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossSample {
    pub epoch: u64,
    pub direction: PathDirection,
    pub tx: u64,
    pub rx: u64,
    pub read_time: SimTime,
    pub active_read: bool,
    pub margin_suspect: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReportFlags {
    /// rx exceeded tx in the interval or cumulatively.
    pub negative_loss: bool,
    /// A counter of the currently marked color was read.
    pub active_read: bool,
    /// Probe round trip exceeded the delay margin, so in-flight packets
    /// may have been missed by the read.
    pub margin_suspect: bool,
}

impl ReportFlags {
    pub fn any(&self) -> bool {
        self.negative_loss || self.active_read || self.margin_suspect
    }

    pub fn bits(&self) -> u32 {
        u32::from(self.negative_loss) | u32::from(self.active_read) << 1 | u32::from(self.margin_suspect) << 2
    }

    pub fn from_bits(bits: u32) -> Self {
        Self {
            negative_loss: bits & 1 != 0,
            active_read: bits & 2 != 0,
            margin_suspect: bits & 4 != 0,
        }
    }
}

/// Loss for one block, differenced against the previous same-color block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossReport {
    pub measure_id: u32,
    pub epoch: u64,
    pub color: Color,
    pub direction: PathDirection,
    pub interval_tx: u64,
    pub interval_rx: u64,
    pub interval_loss: i64,
    pub cumulative_tx: u64,
    pub cumulative_rx: u64,
    pub cumulative_loss: i64,
    pub read_timestamp: SimTime,
    /// Epoch the interval is differenced against; `None` for the first
    /// sample of this color. Normally `epoch - 2`, further back when the
    /// probes for intermediate blocks were lost.
    pub baseline_epoch: Option<u64>,
    pub flags: ReportFlags,
}

impl LossReport {
    /// Blocks whose losses this report's interval covers.
    pub fn covered_epochs(&self) -> impl Iterator<Item = u64> {
        let start = match self.baseline_epoch {
            Some(b) => b + 2,
            None => self.epoch % 2,
        };
        (start..=self.epoch).step_by(2)
    }

    pub fn to_measurement_data(&self) -> MeasurementData {
        MeasurementData {
            measure_id: self.measure_id,
            epoch: self.epoch,
            color: self.color as u32,
            direction: match self.direction {
                PathDirection::Forward => MeasurementDirection::Forward,
                PathDirection::Reverse => MeasurementDirection::Reverse,
            } as i32,
            interval_tx: self.interval_tx,
            interval_rx: self.interval_rx,
            interval_loss: self.interval_loss,
            cumulative_tx: self.cumulative_tx,
            cumulative_rx: self.cumulative_rx,
            cumulative_loss: self.cumulative_loss,
            read_timestamp_ns: self.read_timestamp.0,
            baseline_epoch: self.baseline_epoch,
            flags: self.flags.bits(),
        }
    }

    pub fn from_measurement_data(data: &MeasurementData) -> Self {
        Self {
            measure_id: data.measure_id,
            epoch: data.epoch,
            color: if data.color == 0 { Color::R } else { Color::B },
            direction: match data.direction() {
                MeasurementDirection::Forward => PathDirection::Forward,
                MeasurementDirection::Reverse => PathDirection::Reverse,
            },
            interval_tx: data.interval_tx,
            interval_rx: data.interval_rx,
            interval_loss: data.interval_loss,
            cumulative_tx: data.cumulative_tx,
            cumulative_rx: data.cumulative_rx,
            cumulative_loss: data.cumulative_loss,
            read_timestamp: SimTime(data.read_timestamp_ns),
            baseline_epoch: data.baseline_epoch,
            flags: ReportFlags::from_bits(data.flags),
        }
    }
}

/// Options a sender session runs with, after validation.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOptions {
    pub ss_udp_port: u16,
    pub refl_udp_port: u16,
    pub color: ColorParams,
    pub response_mode: ResponseMode,
    pub remote_punt_sid: SegmentId,
    pub in_interfaces: Vec<String>,
    pub out_interfaces: Vec<String>,
}

/// Sender-side state for one monitored SID list pair.
#[derive(Debug, Clone)]
pub struct MonitoringSession {
    pub measure_id: u32,
    pub sdlist: SidList,
    pub sdlistreverse: SidList,
    pub options: SessionOptions,
    pub state: SessionState,
    samples: Vec<LossSample>,
    reports: Vec<LossReport>,
}

impl MonitoringSession {
    pub fn new(measure_id: u32, sdlist: SidList, sdlistreverse: SidList, options: SessionOptions) -> Self {
        Self {
            measure_id,
            sdlist,
            sdlistreverse,
            options,
            state: SessionState::Running,
            samples: Vec::new(),
            reports: Vec::new(),
        }
    }

    pub fn is_running(&self) -> bool {
        self.state == SessionState::Running
    }

    pub fn samples(&self) -> &[LossSample] {
        &self.samples
    }

    /// Interval reports in the order they were produced (epoch order per
    /// direction).
    pub fn reports(&self) -> &[LossReport] {
        &self.reports
    }

    /// Turns a cumulative sample into an interval report and stores both.
    pub fn compute_interval_loss(&mut self, sample: LossSample) -> Result<LossReport, ControlError> {
        let same_color = |s: &&LossSample| s.direction == sample.direction && s.epoch % 2 == sample.epoch % 2;
        let previous = self.samples.iter().filter(same_color).max_by_key(|s| s.epoch);
        if let Some(prev) = previous {
            if prev.epoch >= sample.epoch {
                return Err(ControlError::OutOfOrderSample {
                    epoch: sample.epoch,
                    latest: prev.epoch,
                });
            }
        }
        let cumulative_loss = sample.tx as i64 - sample.rx as i64;
        let (prev_tx, prev_rx, baseline_epoch) = match previous {
            Some(p) => (p.tx, p.rx, Some(p.epoch)),
            None => (0, 0, None),
        };
        let prev_loss = prev_tx as i64 - prev_rx as i64;
        let interval_loss = cumulative_loss - prev_loss;
        let report = LossReport {
            measure_id: self.measure_id,
            epoch: sample.epoch,
            color: Color::for_epoch(sample.epoch),
            direction: sample.direction,
            interval_tx: sample.tx.wrapping_sub(prev_tx),
            interval_rx: sample.rx.wrapping_sub(prev_rx),
            interval_loss,
            cumulative_tx: sample.tx,
            cumulative_rx: sample.rx,
            cumulative_loss,
            read_timestamp: sample.read_time,
            baseline_epoch,
            flags: ReportFlags {
                negative_loss: interval_loss < 0 || cumulative_loss < 0 || sample.rx < prev_rx || sample.tx < prev_tx,
                active_read: sample.active_read,
                margin_suspect: sample.margin_suspect,
            },
        };
        self.samples.push(sample);
        self.reports.push(report.clone());
        Ok(report)
    }
}
