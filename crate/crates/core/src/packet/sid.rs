use std::fmt;
use std::net::Ipv6Addr;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::PacketError;

/// Maximum number of segments in a monitored SID list.
pub const MAX_SIDS: usize = 16;

/// A 128-bit SRv6 segment identifier.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SegmentId(pub u128);

impl SegmentId {
    pub const fn new(value: u128) -> Self {
        Self(value)
    }

    pub fn addr(self) -> Ipv6Addr {
        Ipv6Addr::from(self.0)
    }

    pub fn octets(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }
}

impl From<Ipv6Addr> for SegmentId {
    fn from(addr: Ipv6Addr) -> Self {
        Self(u128::from(addr))
    }
}

impl From<SegmentId> for Ipv6Addr {
    fn from(sid: SegmentId) -> Self {
        sid.addr()
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.addr().fmt(f)
    }
}

impl fmt::Debug for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SegmentId({})", self.addr())
    }
}

impl FromStr for SegmentId {
    type Err = PacketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<Ipv6Addr>()
            .map(Self::from)
            .map_err(|_| PacketError::InvalidSid(s.to_string()))
    }
}

impl Serialize for SegmentId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SegmentId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Ordered segment list describing an SR policy path, first segment first.
///
/// Equality is order-sensitive: two lists with the same segments in a
/// different order steer traffic along different paths.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SidList(Vec<SegmentId>);

impl SidList {
    pub fn new(segments: Vec<SegmentId>) -> Result<Self, PacketError> {
        if segments.is_empty() || segments.len() > MAX_SIDS {
            return Err(PacketError::SidListLength(segments.len()));
        }
        Ok(Self(segments))
    }

    pub fn segments(&self) -> &[SegmentId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; a valid list holds at least one segment.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> SegmentId {
        self.0[0]
    }

    pub fn last(&self) -> SegmentId {
        self.0[self.0.len() - 1]
    }

    /// Copy of this list with the final segment replaced.
    pub fn with_last(&self, sid: SegmentId) -> SidList {
        let mut segments = self.0.clone();
        let last = segments.len() - 1;
        segments[last] = sid;
        SidList(segments)
    }
}

impl fmt::Display for SidList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, sid) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{sid}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SidList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SidList[{self}]")
    }
}

impl FromStr for SidList {
    type Err = PacketError;

    /// Parses the comma-separated form used in sdlist strings.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let segments = s
            .split(',')
            .filter(|part| !part.trim().is_empty())
            .map(str::parse)
            .collect::<Result<Vec<SegmentId>, _>>()?;
        SidList::new(segments)
    }
}

impl TryFrom<Vec<SegmentId>> for SidList {
    type Error = PacketError;

    fn try_from(segments: Vec<SegmentId>) -> Result<Self, Self::Error> {
        SidList::new(segments)
    }
}

impl Serialize for SidList {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.0.iter())
    }
}

impl<'de> Deserialize<'de> for SidList {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let segments = Vec::<SegmentId>::deserialize(deserializer)?;
        SidList::new(segments).map_err(serde::de::Error::custom)
    }
}

/// An IPv6 prefix used by static routes and SR policies.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ipv6Prefix {
    addr: u128,
    len: u8,
}

impl Ipv6Prefix {
    pub fn new(addr: Ipv6Addr, len: u8) -> Result<Self, PacketError> {
        if len > 128 {
            return Err(PacketError::InvalidPrefix(format!("{addr}/{len}")));
        }
        Ok(Self {
            addr: u128::from(addr) & Self::mask(len),
            len,
        })
    }

    pub fn host(addr: Ipv6Addr) -> Self {
        Self {
            addr: u128::from(addr),
            len: 128,
        }
    }

    fn mask(len: u8) -> u128 {
        if len == 0 {
            0
        } else {
            u128::MAX << (128 - u32::from(len))
        }
    }

    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn network(&self) -> Ipv6Addr {
        Ipv6Addr::from(self.addr)
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        u128::from(addr) & Self::mask(self.len) == self.addr
    }
}

impl fmt::Display for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.network(), self.len)
    }
}

impl fmt::Debug for Ipv6Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Ipv6Prefix({self})")
    }
}

impl FromStr for Ipv6Prefix {
    type Err = PacketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PacketError::InvalidPrefix(s.to_string());
        match s.trim().split_once('/') {
            Some((addr, len)) => {
                let addr: Ipv6Addr = addr.parse().map_err(|_| bad())?;
                let len: u8 = len.parse().map_err(|_| bad())?;
                Ipv6Prefix::new(addr, len).map_err(|_| bad())
            }
            None => s.trim().parse().map(Ipv6Prefix::host).map_err(|_| bad()),
        }
    }
}

impl Serialize for Ipv6Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv6Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
