//! Packet and probe-message structures with their byte encodings.
//!
//! [`Packet`] models an IPv6 packet with an optional Segment Routing Header
//! and one of three payloads: an encapsulated inner IPv6 packet, a UDP
//! datagram, or opaque bytes. Encodings follow the usual IPv6/SRH/UDP wire
//! formats; LM probe payloads are defined in [`lm`].

pub mod lm;
pub mod sid;

use std::fmt;
use std::net::Ipv6Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lm::{
    decode_lm_query, decode_lm_response, encode_lm_query, encode_lm_response, LmFlags, LmMessage,
    LmQuery, LmResponse, CTRL_IN_BAND, CTRL_OUT_OF_BAND, LM_QUERY_LEN, LM_RESPONSE_LEN,
};
pub use sid::{Ipv6Prefix, SegmentId, SidList, MAX_SIDS};

pub const NEXT_HEADER_IPV6: u8 = 41;
pub const NEXT_HEADER_ROUTING: u8 = 43;
pub const NEXT_HEADER_UDP: u8 = 17;
pub const NEXT_HEADER_NONE: u8 = 59;

pub const IPV6_HEADER_LEN: usize = 40;
pub const UDP_HEADER_LEN: usize = 8;
pub const SRH_ROUTING_TYPE: u8 = 4;
pub const DEFAULT_HOP_LIMIT: u8 = 64;

/// Traffic-class bit carrying the block color.
pub const DS_COLOR_BIT: u8 = 0x01;
/// Traffic-class bit marking a packet as belonging to a monitored flow.
pub const DS_MONITORED_BIT: u8 = 0x02;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("invalid segment identifier {0:?}")]
    InvalidSid(String),
    #[error("SID list length {0} outside 1..={MAX_SIDS}")]
    SidListLength(usize),
    #[error("invalid IPv6 prefix {0:?}")]
    InvalidPrefix(String),
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("reserved field is {0:#04x}, expected zero")]
    ReservedNonZero(u8),
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("malformed {0}")]
    Malformed(&'static str),
    #[error("no segments left")]
    NoSegmentsLeft,
    #[error("packet has no segment routing header")]
    MissingSrh,
    #[error("probe source and destination UDP ports are equal ({0})")]
    PortsEqual(u16),
}

/// Alternate-marking color. Two colors; the block epoch's parity selects one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    R = 0,
    B = 1,
}

impl Color {
    pub const ALL: [Color; 2] = [Color::R, Color::B];

    pub fn other(self) -> Color {
        match self {
            Color::R => Color::B,
            Color::B => Color::R,
        }
    }

    pub fn for_epoch(epoch: u64) -> Color {
        if epoch % 2 == 0 {
            Color::R
        } else {
            Color::B
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Color::R => "R",
            Color::B => "B",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    pub flow_label: u32,
    pub payload_len: u16,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
}

impl Ipv6Header {
    pub fn new(src: Ipv6Addr, dst: Ipv6Addr, next_header: u8) -> Self {
        Self {
            traffic_class: 0,
            flow_label: 0,
            payload_len: 0,
            next_header,
            hop_limit: DEFAULT_HOP_LIMIT,
            src,
            dst,
        }
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        let word = (6u32 << 28) | (u32::from(self.traffic_class) << 20) | (self.flow_label & 0xf_ffff);
        buf.extend_from_slice(&word.to_be_bytes());
        buf.extend_from_slice(&self.payload_len.to_be_bytes());
        buf.push(self.next_header);
        buf.push(self.hop_limit);
        buf.extend_from_slice(&self.src.octets());
        buf.extend_from_slice(&self.dst.octets());
    }

    fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        if bytes.len() < IPV6_HEADER_LEN {
            return Err(PacketError::Truncated("IPv6 header"));
        }
        let word = u32::from_be_bytes(bytes[0..4].try_into().unwrap());
        if word >> 28 != 6 {
            return Err(PacketError::Malformed("IPv6 version"));
        }
        let addr = |at: usize| Ipv6Addr::from(<[u8; 16]>::try_from(&bytes[at..at + 16]).unwrap());
        Ok(Self {
            traffic_class: ((word >> 20) & 0xff) as u8,
            flow_label: word & 0xf_ffff,
            payload_len: u16::from_be_bytes([bytes[4], bytes[5]]),
            next_header: bytes[6],
            hop_limit: bytes[7],
            src: addr(8),
            dst: addr(24),
        })
    }
}

/// Segment Routing Header. Segments are held in wire order, i.e. the last
/// segment of the path at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrhHeader {
    pub next_header: u8,
    pub segments_left: u8,
    pub flags: u8,
    pub tag: u16,
    segments: Vec<SegmentId>,
}

impl SrhHeader {
    /// SRH for a fresh packet about to visit `path`'s first segment.
    pub fn new(path: &SidList, next_header: u8) -> Self {
        let segments: Vec<SegmentId> = path.segments().iter().rev().copied().collect();
        Self {
            next_header,
            segments_left: (segments.len() - 1) as u8,
            flags: 0,
            tag: 0,
            segments,
        }
    }

    pub fn wire_segments(&self) -> &[SegmentId] {
        &self.segments
    }

    /// The SID list in path order.
    pub fn sid_list(&self) -> SidList {
        SidList::new(self.segments.iter().rev().copied().collect())
            .expect("SRH segment count validated on construction")
    }

    /// Segment the packet is currently addressed to.
    pub fn active_segment(&self) -> SegmentId {
        self.segments[usize::from(self.segments_left)]
    }

    pub fn encoded_len(&self) -> usize {
        8 + 16 * self.segments.len()
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        let n = self.segments.len();
        buf.push(self.next_header);
        buf.push((2 * n) as u8);
        buf.push(SRH_ROUTING_TYPE);
        buf.push(self.segments_left);
        buf.push((n - 1) as u8);
        buf.push(self.flags);
        buf.extend_from_slice(&self.tag.to_be_bytes());
        for sid in &self.segments {
            buf.extend_from_slice(&sid.octets());
        }
    }

    fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        if bytes.len() < 8 {
            return Err(PacketError::Truncated("segment routing header"));
        }
        if bytes[2] != SRH_ROUTING_TYPE {
            return Err(PacketError::Malformed("routing type"));
        }
        let n = usize::from(bytes[4]) + 1;
        if usize::from(bytes[1]) != 2 * n {
            return Err(PacketError::Malformed("SRH length"));
        }
        if n > MAX_SIDS {
            return Err(PacketError::SidListLength(n));
        }
        if bytes[3] as usize >= n {
            return Err(PacketError::Malformed("segments left"));
        }
        if bytes.len() < 8 + 16 * n {
            return Err(PacketError::Truncated("segment list"));
        }
        let segments = bytes[8..8 + 16 * n]
            .chunks_exact(16)
            .map(|c| SegmentId(u128::from_be_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Self {
            next_header: bytes[0],
            segments_left: bytes[3],
            flags: bytes[5],
            tag: u16::from_be_bytes([bytes[6], bytes[7]]),
            segments,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UdpDatagram {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
    /// Carried, never validated.
    pub checksum: u16,
    pub data: Vec<u8>,
}

impl UdpDatagram {
    pub fn new(src_port: u16, dst_port: u16, data: Vec<u8>) -> Self {
        Self {
            src_port,
            dst_port,
            length: (UDP_HEADER_LEN + data.len()) as u16,
            checksum: 0,
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Ipv6(Box<Packet>),
    Udp(UdpDatagram),
    Raw { next_header: u8, data: Vec<u8> },
}

impl Payload {
    fn protocol(&self) -> u8 {
        match self {
            Payload::Ipv6(_) => NEXT_HEADER_IPV6,
            Payload::Udp(_) => NEXT_HEADER_UDP,
            Payload::Raw { next_header, .. } => *next_header,
        }
    }

    fn encoded_len(&self) -> usize {
        match self {
            Payload::Ipv6(inner) => inner.encoded_len(),
            Payload::Udp(udp) => UDP_HEADER_LEN + udp.data.len(),
            Payload::Raw { data, .. } => data.len(),
        }
    }
}

/// An IPv6 packet, optionally carrying an SRH.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub ipv6: Ipv6Header,
    pub srh: Option<SrhHeader>,
    pub payload: Payload,
}

impl Packet {
    pub fn new(ipv6: Ipv6Header, srh: Option<SrhHeader>, payload: Payload) -> Self {
        let mut pkt = Self { ipv6, srh, payload };
        pkt.update_lengths();
        pkt
    }

    /// A plain host-to-host UDP packet.
    pub fn udp(src: Ipv6Addr, dst: Ipv6Addr, src_port: u16, dst_port: u16, data: Vec<u8>) -> Self {
        Self::new(
            Ipv6Header::new(src, dst, NEXT_HEADER_UDP),
            None,
            Payload::Udp(UdpDatagram::new(src_port, dst_port, data)),
        )
    }

    /// Wraps `inner` in an outer IPv6 header plus SRH steering it along `path`.
    pub fn encapsulate(inner: Packet, src: Ipv6Addr, path: &SidList) -> Self {
        Self::new(
            Ipv6Header::new(src, path.first().addr(), NEXT_HEADER_ROUTING),
            Some(SrhHeader::new(path, NEXT_HEADER_IPV6)),
            Payload::Ipv6(Box::new(inner)),
        )
    }

    /// Strips the outer header and SRH, returning the inner packet if any.
    pub fn decapsulate(self) -> Result<Packet, Packet> {
        match self.payload {
            Payload::Ipv6(inner) => Ok(*inner),
            payload => Err(Packet { payload, ..self }),
        }
    }

    /// Recomputes payload length fields, innermost first.
    pub fn update_lengths(&mut self) {
        match &mut self.payload {
            Payload::Ipv6(inner) => inner.update_lengths(),
            Payload::Udp(udp) => udp.length = (UDP_HEADER_LEN + udp.data.len()) as u16,
            Payload::Raw { .. } => {}
        }
        let proto = self.payload.protocol();
        let srh_len = match &mut self.srh {
            Some(srh) => {
                srh.next_header = proto;
                self.ipv6.next_header = NEXT_HEADER_ROUTING;
                srh.encoded_len()
            }
            None => {
                self.ipv6.next_header = proto;
                0
            }
        };
        self.ipv6.payload_len = (srh_len + self.payload.encoded_len()) as u16;
    }

    pub fn encoded_len(&self) -> usize {
        IPV6_HEADER_LEN + self.srh.as_ref().map_or(0, SrhHeader::encoded_len) + self.payload.encoded_len()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut buf);
        buf
    }

    fn encode_into(&self, buf: &mut Vec<u8>) {
        self.ipv6.encode_into(buf);
        if let Some(srh) = &self.srh {
            srh.encode_into(buf);
        }
        match &self.payload {
            Payload::Ipv6(inner) => inner.encode_into(buf),
            Payload::Udp(udp) => {
                buf.extend_from_slice(&udp.src_port.to_be_bytes());
                buf.extend_from_slice(&udp.dst_port.to_be_bytes());
                buf.extend_from_slice(&udp.length.to_be_bytes());
                buf.extend_from_slice(&udp.checksum.to_be_bytes());
                buf.extend_from_slice(&udp.data);
            }
            Payload::Raw { data, .. } => buf.extend_from_slice(data),
        }
    }

    pub fn decode(bytes: &[u8]) -> Result<Packet, PacketError> {
        let ipv6 = Ipv6Header::decode(bytes)?;
        let end = IPV6_HEADER_LEN + usize::from(ipv6.payload_len);
        if bytes.len() != end {
            return Err(PacketError::Length {
                expected: end,
                actual: bytes.len(),
            });
        }
        let mut rest = &bytes[IPV6_HEADER_LEN..];
        let mut proto = ipv6.next_header;
        let srh = if proto == NEXT_HEADER_ROUTING {
            let srh = SrhHeader::decode(rest)?;
            rest = &rest[srh.encoded_len()..];
            proto = srh.next_header;
            Some(srh)
        } else {
            None
        };
        let payload = match proto {
            NEXT_HEADER_IPV6 => Payload::Ipv6(Box::new(Packet::decode(rest)?)),
            NEXT_HEADER_UDP => {
                if rest.len() < UDP_HEADER_LEN {
                    return Err(PacketError::Truncated("UDP header"));
                }
                let length = u16::from_be_bytes([rest[4], rest[5]]);
                if usize::from(length) != rest.len() {
                    return Err(PacketError::Malformed("UDP length"));
                }
                Payload::Udp(UdpDatagram {
                    src_port: u16::from_be_bytes([rest[0], rest[1]]),
                    dst_port: u16::from_be_bytes([rest[2], rest[3]]),
                    length,
                    checksum: u16::from_be_bytes([rest[6], rest[7]]),
                    data: rest[UDP_HEADER_LEN..].to_vec(),
                })
            }
            next_header => Payload::Raw {
                next_header,
                data: rest.to_vec(),
            },
        };
        Ok(Packet { ipv6, srh, payload })
    }

    /// Writes the color and monitored flag into the two low traffic-class
    /// bits, leaving the other six bits untouched.
    pub fn set_color(&mut self, color: Color, monitored: bool) {
        let mut tc = self.ipv6.traffic_class & !(DS_COLOR_BIT | DS_MONITORED_BIT);
        if color == Color::B {
            tc |= DS_COLOR_BIT;
        }
        if monitored {
            tc |= DS_MONITORED_BIT;
        }
        self.ipv6.traffic_class = tc;
    }

    pub fn color(&self) -> (Color, bool) {
        let tc = self.ipv6.traffic_class;
        let color = if tc & DS_COLOR_BIT != 0 { Color::B } else { Color::R };
        (color, tc & DS_MONITORED_BIT != 0)
    }

    /// SRv6 End processing: decrement segments-left and readdress the packet
    /// to the next segment.
    pub fn srh_advance(&mut self) -> Result<(), PacketError> {
        let srh = self.srh.as_mut().ok_or(PacketError::MissingSrh)?;
        if srh.segments_left == 0 {
            return Err(PacketError::NoSegmentsLeft);
        }
        srh.segments_left -= 1;
        self.ipv6.dst = srh.active_segment().addr();
        Ok(())
    }

    pub fn udp_datagram(&self) -> Option<&UdpDatagram> {
        match &self.payload {
            Payload::Udp(udp) => Some(udp),
            _ => None,
        }
    }

    pub fn inner(&self) -> Option<&Packet> {
        match &self.payload {
            Payload::Ipv6(inner) => Some(inner),
            _ => None,
        }
    }
}

/// Builds an SRv6 probe carrying `message` along `path`, with the final
/// segment replaced by `punt_sid` so the far end hands the payload to its
/// measurement agent instead of decapsulating.
pub fn build_probe_packet(
    message: &LmMessage,
    path: &SidList,
    punt_sid: SegmentId,
    src: Ipv6Addr,
    ports: (u16, u16),
) -> Result<Packet, PacketError> {
    let (src_port, dst_port) = ports;
    if src_port == dst_port {
        return Err(PacketError::PortsEqual(src_port));
    }
    let probe_path = path.with_last(punt_sid);
    Ok(Packet::new(
        Ipv6Header::new(src, probe_path.first().addr(), NEXT_HEADER_ROUTING),
        Some(SrhHeader::new(&probe_path, NEXT_HEADER_UDP)),
        Payload::Udp(UdpDatagram::new(src_port, dst_port, message.encode())),
    ))
}
