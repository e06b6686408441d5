//! Southbound RPC messages.
//!
//! Message and field names and tag numbers follow the SRv6Manager / SRv6PM
//! protobuf services, so the protobuf encoding of these structs
//! ([`prost::Message::encode_to_vec`]) is the wire form for any remote
//! transport. In the simulator the calls are made in-process.
//!
//! Fields with tags >= 100 are local extensions:
//! `remote_punt_sid` is the END.OP SID of the peer node and
//! `response_mode` selects in-band or out-of-band responses.

use prost::{Enumeration, Message};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum StatusCode {
    Unspecified = 0,
    Success = 1,
    NotFound = 2,
    AlreadyExists = 3,
    InvalidArgument = 4,
    AlreadyRunning = 5,
    NotRunning = 6,
    UnknownSession = 7,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum MeasurementProtocol {
    Twamp = 0,
    Stamp = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum AuthenticationMode {
    Unauthenticated = 0,
    HmacSha256 = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum MeasurementType {
    Loss = 0,
    Delay = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum TimestampFormat {
    Ptpv2 = 0,
    Ntp = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum MeasurementDelayMode {
    OneWay = 0,
    TwoWay = 1,
    LoopbackMode = 2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum MeasurementLossMode {
    Inferred = 0,
    Direct = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum ResponseMode {
    InBand = 0,
    OutOfBand = 1,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Enumeration)]
#[repr(i32)]
pub enum MeasurementDirection {
    Forward = 0,
    Reverse = 1,
}

#[derive(Clone, PartialEq, Message)]
pub struct SRv6Segment {
    #[prost(string, tag = "1")]
    pub segment: String,
}

impl SRv6Segment {
    pub fn new(segment: impl Into<String>) -> Self {
        Self {
            segment: segment.into(),
        }
    }
}

#[derive(Clone, PartialEq, Message)]
pub struct SRv6Path {
    /// Route of the SRv6 policy.
    #[prost(string, tag = "1")]
    pub destination: String,
    #[prost(message, repeated, tag = "2")]
    pub sr_path: Vec<SRv6Segment>,
    #[prost(string, tag = "3")]
    pub encapmode: String,
    #[prost(string, tag = "4")]
    pub device: String,
    #[prost(int32, tag = "5")]
    pub table: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct SRv6Behavior {
    /// Active segment to match.
    #[prost(string, tag = "1")]
    pub segment: String,
    #[prost(string, tag = "2")]
    pub action: String,
    #[prost(string, tag = "3")]
    pub nexthop: String,
    #[prost(int32, tag = "4")]
    pub table: i32,
    #[prost(string, tag = "5")]
    pub interface: String,
    #[prost(message, repeated, tag = "6")]
    pub segs: Vec<SRv6Segment>,
    #[prost(string, tag = "7")]
    pub device: String,
    #[prost(int32, tag = "8")]
    pub localsid_table: i32,
}

/// Each request carries entities of a single kind.
#[derive(Clone, PartialEq, Message)]
pub struct SRv6ManagerRequest {
    #[prost(message, repeated, tag = "1")]
    pub srv6_path_request: Vec<SRv6Path>,
    #[prost(message, repeated, tag = "2")]
    pub srv6_behavior_request: Vec<SRv6Behavior>,
}

#[derive(Clone, PartialEq, Message)]
pub struct SRv6ManagerReply {
    #[prost(enumeration = "StatusCode", tag = "1")]
    pub status: i32,
    #[prost(message, repeated, tag = "2")]
    pub paths: Vec<SRv6Path>,
    #[prost(message, repeated, tag = "3")]
    pub behaviors: Vec<SRv6Behavior>,
}

#[derive(Clone, PartialEq, Message)]
pub struct SenderOptions {
    #[prost(uint32, tag = "1")]
    pub ss_udp_port: u32,
    #[prost(uint32, tag = "2")]
    pub refl_udp_port: u32,
    #[prost(enumeration = "MeasurementProtocol", tag = "3")]
    pub measurement_protocol: i32,
    #[prost(enumeration = "AuthenticationMode", tag = "4")]
    pub authentication_mode: i32,
    #[prost(enumeration = "MeasurementType", tag = "5")]
    pub measurement_type: i32,
    #[prost(enumeration = "TimestampFormat", tag = "6")]
    pub timestamp_format: i32,
    #[prost(enumeration = "MeasurementDelayMode", tag = "7")]
    pub measurement_delay_mode: i32,
    #[prost(uint32, tag = "8")]
    pub padding_mbz: u32,
    #[prost(enumeration = "MeasurementLossMode", tag = "9")]
    pub measurement_loss_mode: i32,
    #[prost(string, tag = "10")]
    pub authentication_key: String,
}

#[derive(Clone, PartialEq, Message)]
pub struct ReflectorOptions {
    #[prost(uint32, tag = "1")]
    pub ss_udp_port: u32,
    #[prost(uint32, tag = "2")]
    pub refl_udp_port: u32,
    #[prost(enumeration = "MeasurementProtocol", tag = "3")]
    pub measurement_protocol: i32,
    #[prost(enumeration = "AuthenticationMode", tag = "4")]
    pub authentication_mode: i32,
    #[prost(enumeration = "MeasurementType", tag = "5")]
    pub measurement_type: i32,
    #[prost(enumeration = "MeasurementLossMode", tag = "6")]
    pub measurement_loss_mode: i32,
    #[prost(string, tag = "7")]
    pub authentication_key: String,
}

/// Block duration and read margin, in seconds of simulated time.
#[derive(Clone, PartialEq, Message)]
pub struct ColorOptions {
    #[prost(double, tag = "1")]
    pub interval_duration: f64,
    /// Zero selects the default of half the interval.
    #[prost(double, tag = "2")]
    pub delay_margin: f64,
    /// Zero selects the default of two colors; only two are supported.
    #[prost(uint32, tag = "3")]
    pub number_of_colors: u32,
}

#[derive(Clone, PartialEq, Message)]
pub struct StartFlowMonitoringSenderRequest {
    #[prost(uint32, tag = "1")]
    pub measure_id: u32,
    #[prost(string, tag = "2")]
    pub sdlist: String,
    #[prost(string, tag = "3")]
    pub sdlistreverse: String,
    #[prost(string, repeated, tag = "4")]
    pub in_interfaces: Vec<String>,
    #[prost(string, repeated, tag = "5")]
    pub out_interfaces: Vec<String>,
    #[prost(message, optional, tag = "6")]
    pub sender_options: Option<SenderOptions>,
    #[prost(message, optional, tag = "7")]
    pub color_options: Option<ColorOptions>,
    #[prost(string, tag = "100")]
    pub remote_punt_sid: String,
    #[prost(enumeration = "ResponseMode", tag = "101")]
    pub response_mode: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct StartFlowMonitoringSenderReply {
    #[prost(enumeration = "StatusCode", tag = "1")]
    pub status: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct StartFlowMonitoringReflectorRequest {
    #[prost(uint32, tag = "1")]
    pub measure_id: u32,
    #[prost(string, tag = "2")]
    pub sdlist: String,
    #[prost(string, tag = "3")]
    pub sdlistreverse: String,
    #[prost(string, repeated, tag = "4")]
    pub in_interfaces: Vec<String>,
    #[prost(string, repeated, tag = "5")]
    pub out_interfaces: Vec<String>,
    #[prost(message, optional, tag = "6")]
    pub reflector_options: Option<ReflectorOptions>,
    #[prost(message, optional, tag = "7")]
    pub color_options: Option<ColorOptions>,
    #[prost(string, tag = "100")]
    pub remote_punt_sid: String,
    #[prost(enumeration = "ResponseMode", tag = "101")]
    pub response_mode: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct StartFlowMonitoringReflectorReply {
    #[prost(enumeration = "StatusCode", tag = "1")]
    pub status: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct StopFlowMonitoringRequest {
    #[prost(string, tag = "1")]
    pub sdlist: String,
}

#[derive(Clone, PartialEq, Message)]
pub struct StopFlowMonitoringReply {
    #[prost(enumeration = "StatusCode", tag = "1")]
    pub status: i32,
}

#[derive(Clone, PartialEq, Message)]
pub struct RetriveFlowMonitoringDataRequest {
    #[prost(string, tag = "1")]
    pub sdlist: String,
}

/// One interval loss report as carried over the southbound API.
#[derive(Clone, PartialEq, Message)]
pub struct MeasurementData {
    #[prost(uint32, tag = "1")]
    pub measure_id: u32,
    #[prost(uint64, tag = "2")]
    pub epoch: u64,
    /// 0 = R, 1 = B.
    #[prost(uint32, tag = "3")]
    pub color: u32,
    #[prost(enumeration = "MeasurementDirection", tag = "4")]
    pub direction: i32,
    #[prost(uint64, tag = "5")]
    pub interval_tx: u64,
    #[prost(uint64, tag = "6")]
    pub interval_rx: u64,
    #[prost(int64, tag = "7")]
    pub interval_loss: i64,
    #[prost(uint64, tag = "8")]
    pub cumulative_tx: u64,
    #[prost(uint64, tag = "9")]
    pub cumulative_rx: u64,
    #[prost(int64, tag = "10")]
    pub cumulative_loss: i64,
    #[prost(uint64, tag = "11")]
    pub read_timestamp_ns: u64,
    #[prost(uint64, optional, tag = "12")]
    pub baseline_epoch: Option<u64>,
    /// Bit 0: negative loss, bit 1: active-color read, bit 2: margin suspect.
    #[prost(uint32, tag = "13")]
    pub flags: u32,
}

#[derive(Clone, PartialEq, Message)]
pub struct FlowMonitoringDataResponse {
    #[prost(enumeration = "StatusCode", tag = "1")]
    pub status: i32,
    #[prost(message, repeated, tag = "2")]
    pub measurement_data: Vec<MeasurementData>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sender_request_protobuf_roundtrip() {
        let req = StartFlowMonitoringSenderRequest {
            measure_id: 7,
            sdlist: "fcff:2::100,fcff:8::d6".into(),
            sdlistreverse: "fcff:2::100,fcff:1::d6".into(),
            in_interfaces: vec!["eth0".into()],
            out_interfaces: vec![],
            sender_options: Some(SenderOptions {
                ss_udp_port: 50000,
                refl_udp_port: 50001,
                ..SenderOptions::default()
            }),
            color_options: Some(ColorOptions {
                interval_duration: 10.0,
                delay_margin: 5.0,
                number_of_colors: 2,
            }),
            remote_punt_sid: "fcff:8::ff".into(),
            response_mode: ResponseMode::OutOfBand as i32,
        };
        let bytes = req.encode_to_vec();
        // measure_id is field 1, varint: key 0x08 then value 7.
        assert_eq!(&bytes[..2], &[0x08, 0x07]);
        let decoded = StartFlowMonitoringSenderRequest::decode(bytes.as_slice()).unwrap();
        assert_eq!(decoded, req);
        assert_eq!(decoded.response_mode(), ResponseMode::OutOfBand);
    }
}
