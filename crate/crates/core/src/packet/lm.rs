//! TWAMP-light loss-measurement Query and Response messages.
//!
//! Both messages use a fixed layout in network byte order:
//!
//! ```text
//! Query (16 bytes)
//!   0..4    sender sequence number
//!   4..12   sender transmit counter
//!   12      block number
//!   13      flags
//!   14      control code
//!   15      reserved, zero
//!
//! Response (36 bytes)
//!   0..16   echo of the query layout above
//!   16..24  reflector receive counter
//!   24..28  reflector sequence number   (in-band only)
//!   28..36  reflector transmit counter  (in-band only)
//! ```
//!
//! The reflector's return-path block number travels in the reserved octet
//! of the echoed part (offset 15). It is zero for out-of-band responses.

use serde::{Deserialize, Serialize};

use super::PacketError;

pub const LM_QUERY_LEN: usize = 16;
pub const LM_RESPONSE_LEN: usize = 36;

/// Control code asking for the response to travel back over the reverse SID list.
pub const CTRL_IN_BAND: u8 = 1;
/// Control code asking for a plain UDP response to the sender.
pub const CTRL_OUT_OF_BAND: u8 = 0;

/// Flag octet of an LM message.
///
/// Bit 0 selects the counter format (0 = 64-bit fixed), bit 1 the counting
/// mode (0 = packets, 1 = bytes). Other bits are kept as received.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LmFlags(u8);

impl LmFlags {
    pub const COUNTER_FORMAT: u8 = 0x01;
    pub const BYTE_COUNTING: u8 = 0x02;
    pub const KNOWN: u8 = Self::COUNTER_FORMAT | Self::BYTE_COUNTING;

    pub fn new(counter_format: bool, byte_counting: bool) -> Self {
        let mut bits = 0;
        if counter_format {
            bits |= Self::COUNTER_FORMAT;
        }
        if byte_counting {
            bits |= Self::BYTE_COUNTING;
        }
        Self(bits)
    }

    pub fn from_bits_retain(bits: u8) -> Self {
        Self(bits)
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn byte_counting(self) -> bool {
        self.0 & Self::BYTE_COUNTING != 0
    }

    pub fn has_unknown_bits(self) -> bool {
        self.0 & !Self::KNOWN != 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LmQuery {
    pub sender_seq: u32,
    pub sender_tx_counter: u64,
    pub block_number: u8,
    pub flags: LmFlags,
    pub ctrl_code: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct LmResponse {
    pub sender_seq: u32,
    pub sender_tx_counter: u64,
    pub sender_block_number: u8,
    pub flags: LmFlags,
    pub ctrl_code: u8,
    pub reflector_rx_counter: u64,
    pub reflector_seq: u32,
    pub reflector_tx_counter: u64,
    pub reflector_block_number: u8,
}

impl LmResponse {
    /// Response skeleton echoing `query`'s fields.
    pub fn echo(query: &LmQuery) -> Self {
        Self {
            sender_seq: query.sender_seq,
            sender_tx_counter: query.sender_tx_counter,
            sender_block_number: query.block_number,
            flags: query.flags,
            ctrl_code: query.ctrl_code,
            ..Self::default()
        }
    }

    pub fn in_band(&self) -> bool {
        self.ctrl_code == CTRL_IN_BAND
    }
}

/// Either LM message, as carried in a probe's UDP payload.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmMessage {
    Query(LmQuery),
    Response(LmResponse),
}

impl LmMessage {
    pub fn encode(&self) -> Vec<u8> {
        match self {
            LmMessage::Query(q) => encode_lm_query(q).to_vec(),
            LmMessage::Response(r) => encode_lm_response(r).to_vec(),
        }
    }
}

pub fn encode_lm_query(q: &LmQuery) -> [u8; LM_QUERY_LEN] {
    let mut buf = [0u8; LM_QUERY_LEN];
    buf[0..4].copy_from_slice(&q.sender_seq.to_be_bytes());
    buf[4..12].copy_from_slice(&q.sender_tx_counter.to_be_bytes());
    buf[12] = q.block_number;
    buf[13] = q.flags.bits();
    buf[14] = q.ctrl_code;
    buf
}

pub fn decode_lm_query(bytes: &[u8]) -> Result<LmQuery, PacketError> {
    if bytes.len() != LM_QUERY_LEN {
        return Err(PacketError::Length {
            expected: LM_QUERY_LEN,
            actual: bytes.len(),
        });
    }
    if bytes[15] != 0 {
        return Err(PacketError::ReservedNonZero(bytes[15]));
    }
    Ok(LmQuery {
        sender_seq: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
        sender_tx_counter: u64::from_be_bytes(bytes[4..12].try_into().unwrap()),
        block_number: bytes[12],
        flags: LmFlags::from_bits_retain(bytes[13]),
        ctrl_code: bytes[14],
    })
}

pub fn encode_lm_response(r: &LmResponse) -> [u8; LM_RESPONSE_LEN] {
    let mut buf = [0u8; LM_RESPONSE_LEN];
    buf[0..4].copy_from_slice(&r.sender_seq.to_be_bytes());
    buf[4..12].copy_from_slice(&r.sender_tx_counter.to_be_bytes());
    buf[12] = r.sender_block_number;
    buf[13] = r.flags.bits();
    buf[14] = r.ctrl_code;
    buf[15] = r.reflector_block_number;
    buf[16..24].copy_from_slice(&r.reflector_rx_counter.to_be_bytes());
    buf[24..28].copy_from_slice(&r.reflector_seq.to_be_bytes());
    buf[28..36].copy_from_slice(&r.reflector_tx_counter.to_be_bytes());
    buf
}

pub fn decode_lm_response(bytes: &[u8]) -> Result<LmResponse, PacketError> {
    if bytes.len() != LM_RESPONSE_LEN {
        return Err(PacketError::Length {
            expected: LM_RESPONSE_LEN,
            actual: bytes.len(),
        });
    }
    let ctrl_code = bytes[14];
    let reflector_block_number = bytes[15];
    let reflector_seq = u32::from_be_bytes(bytes[24..28].try_into().unwrap());
    let reflector_tx_counter = u64::from_be_bytes(bytes[28..36].try_into().unwrap());
    // Out-of-band responses have no return-path section at all.
    if ctrl_code != CTRL_IN_BAND && reflector_block_number != 0 {
        return Err(PacketError::ReservedNonZero(reflector_block_number));
    }
    Ok(LmResponse {
        sender_seq: u32::from_be_bytes(bytes[0..4].try_into().unwrap()),
        sender_tx_counter: u64::from_be_bytes(bytes[4..12].try_into().unwrap()),
        sender_block_number: bytes[12],
        flags: LmFlags::from_bits_retain(bytes[13]),
        ctrl_code,
        reflector_rx_counter: u64::from_be_bytes(bytes[16..24].try_into().unwrap()),
        reflector_seq,
        reflector_tx_counter,
        reflector_block_number,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_query_is_sixteen_zero_bytes() {
        let q = LmQuery::default();
        assert_eq!(encode_lm_query(&q), [0u8; 16]);
        assert_eq!(decode_lm_query(&[0u8; 16]).unwrap(), q);
    }

    #[test]
    fn tx_counter_is_big_endian_at_offset_four() {
        let q = LmQuery {
            sender_tx_counter: 1 << 40,
            ..LmQuery::default()
        };
        let bytes = encode_lm_query(&q);
        assert_eq!(&bytes[4..12], &[0, 0, 1, 0, 0, 0, 0, 0]);
        assert!(bytes[..4].iter().chain(&bytes[12..]).all(|b| *b == 0));
    }

    #[test]
    fn query_length_errors() {
        assert_eq!(
            decode_lm_query(&[0u8; 15]),
            Err(PacketError::Length {
                expected: 16,
                actual: 15
            })
        );
        assert!(decode_lm_query(&[0u8; 17]).is_err());
        let mut bytes = [0u8; 16];
        bytes[15] = 7;
        assert_eq!(decode_lm_query(&bytes), Err(PacketError::ReservedNonZero(7)));
    }

    #[test]
    fn zero_response_is_36_zero_bytes() {
        let r = LmResponse::default();
        assert_eq!(encode_lm_response(&r), [0u8; 36]);
        assert_eq!(decode_lm_response(&[0u8; 36]).unwrap(), r);
        assert!(decode_lm_response(&[0u8; 35]).is_err());
    }

    #[test]
    fn out_of_band_response_has_no_return_path_fields() {
        let q = LmQuery {
            sender_seq: 9,
            sender_tx_counter: 1000,
            block_number: 3,
            flags: LmFlags::default(),
            ctrl_code: CTRL_OUT_OF_BAND,
        };
        let mut r = LmResponse::echo(&q);
        r.reflector_rx_counter = 998;
        let decoded = decode_lm_response(&encode_lm_response(&r)).unwrap();
        assert_eq!(decoded.reflector_seq, 0);
        assert_eq!(decoded.reflector_tx_counter, 0);
        assert_eq!(decoded.reflector_block_number, 0);
        assert_eq!(decoded.sender_seq, 9);
        assert_eq!(decoded.sender_block_number, 3);

        let mut bytes = encode_lm_response(&r);
        bytes[15] = 1;
        assert_eq!(decode_lm_response(&bytes), Err(PacketError::ReservedNonZero(1)));
    }

    #[test]
    fn unknown_flag_bits_survive_decode() {
        let mut bytes = [0u8; 16];
        bytes[13] = 0x80 | LmFlags::BYTE_COUNTING;
        let q = decode_lm_query(&bytes).unwrap();
        assert!(q.flags.has_unknown_bits());
        assert!(q.flags.byte_counting());
        assert_eq!(encode_lm_query(&q), bytes);
    }
}
