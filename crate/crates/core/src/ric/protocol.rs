//! E2-lite wire format.
//!
//! Frames are `[type: 1 byte][length: u32 big-endian][payload]`. There is no
//! subscription machinery: a SETUP/ACK handshake, indications carrying I/Q
//! frames or KPM reports, and control messages. IND_IQ payloads are exactly
//! 614,400 bytes (76,800 interleaved f32 I/Q samples); IND_KPM payloads are
//! exactly 20 bytes (four i32 metrics plus a u32 sequence number).

use crate::datagen::KpmSample;
use crate::error::{Error, Result};

/// Frame header size: type byte plus u32 length.
pub const HEADER_LEN: usize = 5;
/// Required payload size of an IND_IQ message.
pub const IND_IQ_PAYLOAD_LEN: usize = 614_400;
/// Required payload size of an IND_KPM message.
pub const IND_KPM_PAYLOAD_LEN: usize = 20;

/// Wire message kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MsgType {
    Setup = 0,
    IndIq = 1,
    IndKpm = 2,
    Control = 3,
    Ack = 4,
}

impl MsgType {
    pub fn from_byte(b: u8) -> Result<MsgType> {
        match b {
            0 => Ok(MsgType::Setup),
            1 => Ok(MsgType::IndIq),
            2 => Ok(MsgType::IndKpm),
            3 => Ok(MsgType::Control),
            4 => Ok(MsgType::Ack),
            other => Err(Error::protocol(format!("unknown message type {other}"))),
        }
    }
}

/// A framed wire unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct E2LiteMessage {
    pub msg_type: MsgType,
    pub payload: Vec<u8>,
}

impl E2LiteMessage {
    pub fn new(msg_type: MsgType, payload: Vec<u8>) -> Self {
        E2LiteMessage { msg_type, payload }
    }

    pub fn ack() -> Self {
        E2LiteMessage::new(MsgType::Ack, Vec::new())
    }

    pub fn setup() -> Self {
        E2LiteMessage::new(MsgType::Setup, Vec::new())
    }

    /// Check the per-type payload-size invariants.
    pub fn validate(&self) -> Result<()> {
        match self.msg_type {
            MsgType::IndIq if self.payload.len() != IND_IQ_PAYLOAD_LEN => Err(Error::protocol(
                format!("IND_IQ payload must be {IND_IQ_PAYLOAD_LEN} bytes, got {}", self.payload.len()),
            )),
            MsgType::IndKpm if self.payload.len() != IND_KPM_PAYLOAD_LEN => Err(Error::protocol(
                format!("IND_KPM payload must be {IND_KPM_PAYLOAD_LEN} bytes, got {}", self.payload.len()),
            )),
            _ => Ok(()),
        }
    }
}

/// Encode one message: 5-byte header plus payload.
pub fn encode_message(msg: &E2LiteMessage) -> Result<Vec<u8>> {
    let len = msg.payload.len();
    if len > u32::MAX as usize {
        return Err(Error::invalid(format!("payload of {len} bytes exceeds u32 framing limit")));
    }
    let mut out = Vec::with_capacity(HEADER_LEN + len);
    out.push(msg.msg_type as u8);
    out.extend_from_slice(&(len as u32).to_be_bytes());
    out.extend_from_slice(&msg.payload);
    Ok(out)
}

/// Decode a buffer holding exactly one message.
pub fn decode_message(bytes: &[u8]) -> Result<E2LiteMessage> {
    let mut dec = FrameDecoder::new();
    dec.push(bytes);
    match dec.next_message()? {
        Some(msg) if dec.buffered() == 0 => Ok(msg),
        Some(_) => Err(Error::protocol("trailing bytes after message")),
        None => Err(Error::protocol("truncated message")),
    }
}

/// Incremental decoder over a reliable ordered byte stream. Handles
/// fragmentation (partial reads resume) and concatenation (multiple messages
/// per buffer).
#[derive(Debug, Default)]
pub struct FrameDecoder {
    buf: Vec<u8>,
    consumed: usize,
}

impl FrameDecoder {
    pub fn new() -> Self {
        FrameDecoder::default()
    }

    /// Feed more bytes from the stream.
    pub fn push(&mut self, bytes: &[u8]) {
        // drop the consumed prefix before growing
        if self.consumed > 0 {
            self.buf.drain(..self.consumed);
            self.consumed = 0;
        }
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes currently buffered and not yet decoded.
    pub fn buffered(&self) -> usize {
        self.buf.len() - self.consumed
    }

    /// Pop the next complete message, if one is buffered. `Ok(None)` means
    /// more bytes are needed.
    pub fn next_message(&mut self) -> Result<Option<E2LiteMessage>> {
        let avail = &self.buf[self.consumed..];
        if avail.len() < HEADER_LEN {
            return Ok(None);
        }
        let msg_type = MsgType::from_byte(avail[0])?;
        let len = u32::from_be_bytes(avail[1..5].try_into().unwrap()) as usize;
        if avail.len() < HEADER_LEN + len {
            return Ok(None);
        }
        let payload = avail[HEADER_LEN..HEADER_LEN + len].to_vec();
        self.consumed += HEADER_LEN + len;
        Ok(Some(E2LiteMessage { msg_type, payload }))
    }
}

/// The 20-byte IND_KPM payload: each KPM cast to an integer, little endian,
/// plus a report sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KpmReport {
    /// Uplink SINR in centi-dB.
    pub sinr_cdb: i32,
    /// Bitrate in kbps.
    pub bitrate_kbps: i32,
    /// BLER in permille.
    pub bler_permille: i32,
    /// MCS index.
    pub mcs: i32,
    /// Monotone report counter.
    pub seq: u32,
}

impl KpmReport {
    pub fn from_sample(s: &KpmSample, seq: u32) -> KpmReport {
        KpmReport {
            sinr_cdb: (s.ul_sinr_db * 100.0).round() as i32,
            bitrate_kbps: (s.bitrate_mbps * 1000.0).round() as i32,
            bler_permille: (s.bler * 1000.0).round() as i32,
            mcs: i32::from(s.mcs),
            seq,
        }
    }

    /// Reconstruct the (quantized) sample.
    pub fn to_sample(&self) -> Result<KpmSample> {
        if !(0..=28).contains(&self.mcs) {
            return Err(Error::protocol(format!("KPM report mcs {} out of range", self.mcs)));
        }
        let s = KpmSample {
            ul_sinr_db: f64::from(self.sinr_cdb) / 100.0,
            bitrate_mbps: f64::from(self.bitrate_kbps) / 1000.0,
            bler: (f64::from(self.bler_permille) / 1000.0).clamp(0.0, 1.0),
            mcs: self.mcs as u8,
        };
        s.validate().map_err(|e| Error::protocol(e.to_string()))?;
        Ok(s)
    }

    pub fn encode(&self) -> [u8; IND_KPM_PAYLOAD_LEN] {
        let mut out = [0u8; IND_KPM_PAYLOAD_LEN];
        out[0..4].copy_from_slice(&self.sinr_cdb.to_le_bytes());
        out[4..8].copy_from_slice(&self.bitrate_kbps.to_le_bytes());
        out[8..12].copy_from_slice(&self.bler_permille.to_le_bytes());
        out[12..16].copy_from_slice(&self.mcs.to_le_bytes());
        out[16..20].copy_from_slice(&self.seq.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<KpmReport> {
        if bytes.len() != IND_KPM_PAYLOAD_LEN {
            return Err(Error::protocol(format!(
                "KPM payload must be {IND_KPM_PAYLOAD_LEN} bytes, got {}",
                bytes.len()
            )));
        }
        let i = |r: std::ops::Range<usize>| i32::from_le_bytes(bytes[r].try_into().unwrap());
        Ok(KpmReport {
            sinr_cdb: i(0..4),
            bitrate_kbps: i(4..8),
            bler_permille: i(8..12),
            mcs: i(12..16),
            seq: u32::from_le_bytes(bytes[16..20].try_into().unwrap()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng as _;

    #[test]
    fn ack_encodes_to_five_bytes() {
        let bytes = encode_message(&E2LiteMessage::ack()).unwrap();
        assert_eq!(bytes, vec![0x04, 0x00, 0x00, 0x00, 0x00]);
    }

    #[test]
    fn ind_kpm_total_size() {
        let report = KpmReport { sinr_cdb: 2500, bitrate_kbps: 12000, bler_permille: 30, mcs: 28, seq: 7 };
        let msg = E2LiteMessage::new(MsgType::IndKpm, report.encode().to_vec());
        msg.validate().unwrap();
        assert_eq!(encode_message(&msg).unwrap().len(), 25);
    }

    #[test]
    fn ind_iq_total_size() {
        let msg = E2LiteMessage::new(MsgType::IndIq, vec![0u8; IND_IQ_PAYLOAD_LEN]);
        msg.validate().unwrap();
        assert_eq!(encode_message(&msg).unwrap().len(), 614_405);
    }

    #[test]
    fn payload_size_invariants_enforced() {
        assert!(E2LiteMessage::new(MsgType::IndIq, vec![0u8; 10]).validate().is_err());
        assert!(E2LiteMessage::new(MsgType::IndKpm, vec![0u8; 19]).validate().is_err());
        assert!(E2LiteMessage::new(MsgType::Control, vec![1]).validate().is_ok());
    }

    #[test]
    fn round_trip_random_messages() {
        let mut rng = rng_from_seed(17);
        for _ in 0..1000 {
            let msg_type = match rng.gen_range(0..5) {
                0 => MsgType::Setup,
                1 => MsgType::IndIq,
                2 => MsgType::IndKpm,
                3 => MsgType::Control,
                _ => MsgType::Ack,
            };
            let len = match msg_type {
                MsgType::IndIq => IND_IQ_PAYLOAD_LEN,
                MsgType::IndKpm => IND_KPM_PAYLOAD_LEN,
                _ => rng.gen_range(0..256),
            };
            let payload: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
            let msg = E2LiteMessage::new(msg_type, payload);
            let decoded = decode_message(&encode_message(&msg).unwrap()).unwrap();
            assert_eq!(decoded, msg);
        }
    }

    #[test]
    fn unknown_type_is_protocol_error() {
        let bytes = [9u8, 0, 0, 0, 0];
        assert!(matches!(decode_message(&bytes), Err(Error::Protocol(_))));
    }

    #[test]
    fn truncated_payload_is_protocol_error() {
        let mut bytes = encode_message(&E2LiteMessage::new(MsgType::Control, vec![1, 2, 3])).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert!(decode_message(&bytes).is_err());
    }

    #[test]
    fn concatenated_messages_decode_in_order() {
        let a = E2LiteMessage::new(MsgType::Control, vec![0]);
        let b = E2LiteMessage::new(MsgType::Control, vec![1]);
        let mut stream = encode_message(&a).unwrap();
        stream.extend(encode_message(&b).unwrap());
        let mut dec = FrameDecoder::new();
        dec.push(&stream);
        assert_eq!(dec.next_message().unwrap().unwrap(), a);
        assert_eq!(dec.next_message().unwrap().unwrap(), b);
        assert!(dec.next_message().unwrap().is_none());
    }

    #[test]
    fn fragmented_stream_resumes() {
        let msg = E2LiteMessage::new(MsgType::Control, (0..37).collect());
        let bytes = encode_message(&msg).unwrap();
        let mut dec = FrameDecoder::new();
        // feed one byte at a time
        for (i, b) in bytes.iter().enumerate() {
            dec.push(std::slice::from_ref(b));
            let out = dec.next_message().unwrap();
            if i + 1 < bytes.len() {
                assert!(out.is_none());
            } else {
                assert_eq!(out.unwrap(), msg);
            }
        }
    }

    #[test]
    fn kpm_report_round_trip() {
        let s = KpmSample { ul_sinr_db: -2.34, bitrate_mbps: 1.234, bler: 0.321, mcs: 5 };
        let r = KpmReport::from_sample(&s, 99);
        let decoded = KpmReport::decode(&r.encode()).unwrap();
        assert_eq!(decoded, r);
        let back = decoded.to_sample().unwrap();
        assert!((back.ul_sinr_db - s.ul_sinr_db).abs() <= 0.005);
        assert!((back.bitrate_mbps - s.bitrate_mbps).abs() <= 0.0005);
        assert!((back.bler - s.bler).abs() <= 0.0005);
        assert_eq!(back.mcs, s.mcs);
        assert!(KpmReport::decode(&[0u8; 19]).is_err());
    }
}
