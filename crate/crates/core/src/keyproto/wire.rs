//! Byte-exact message layouts for the key establishment protocol.
//!
//! All integers are big-endian: node ids are 2 bytes, nonces and random
//! numbers 8 bytes, keys 16 bytes. Multi-component payloads frame each
//! component with a 2-byte length prefix. Parsers are strict: trailing bytes
//! are an error.

use alloc::vec::Vec;

use super::cipher::Key;
use super::ProtoError;

/// Sender tag the base station embeds in its encrypted components. Reserved:
/// node ids must stay below this value.
pub const BS_TAG: u16 = 0xFFFF;

/// The protocol message kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum MessageKind {
    DaNotification = 1,
    SeedSecretKey = 2,
    NewPairwiseKey = 3,
    NewPairwiseKeyAck = 4,
    RefreshRequest = 5,
    RefreshResponse = 6,
    RefreshAck = 7,
}

impl MessageKind {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => MessageKind::DaNotification,
            2 => MessageKind::SeedSecretKey,
            3 => MessageKind::NewPairwiseKey,
            4 => MessageKind::NewPairwiseKeyAck,
            5 => MessageKind::RefreshRequest,
            6 => MessageKind::RefreshResponse,
            7 => MessageKind::RefreshAck,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            MessageKind::DaNotification => "da-notification",
            MessageKind::SeedSecretKey => "seed-secret-key",
            MessageKind::NewPairwiseKey => "new-pairwise-key",
            MessageKind::NewPairwiseKeyAck => "new-pairwise-key-ack",
            MessageKind::RefreshRequest => "refresh-request",
            MessageKind::RefreshResponse => "refresh-response",
            MessageKind::RefreshAck => "refresh-ack",
        }
    }
}

/// One protocol message on the simulated channel. The payload is ciphertext;
/// kind, sender and receiver are routing metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolMessage {
    pub kind: MessageKind,
    pub sender: usize,
    pub receiver: usize,
    pub payload: Vec<u8>,
}

impl ProtocolMessage {
    /// Serialized envelope: kind(1) | sender(2) | receiver(2) | payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + self.payload.len());
        out.push(self.kind as u8);
        out.extend_from_slice(&encode_id(self.sender).unwrap_or([0xFF, 0xFF]));
        out.extend_from_slice(&encode_id(self.receiver).unwrap_or([0xFF, 0xFF]));
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ProtoError> {
        if bytes.len() < 5 {
            return Err(ProtoError::Malformed);
        }
        let kind = MessageKind::from_u8(bytes[0]).ok_or(ProtoError::Malformed)?;
        let sender = u16::from_be_bytes([bytes[1], bytes[2]]) as usize;
        let receiver = u16::from_be_bytes([bytes[3], bytes[4]]) as usize;
        Ok(ProtocolMessage {
            kind,
            sender,
            receiver,
            payload: bytes[5..].to_vec(),
        })
    }
}

pub fn encode_id(id: usize) -> Result<[u8; 2], ProtoError> {
    if id >= BS_TAG as usize {
        return Err(ProtoError::IdTooLarge);
    }
    Ok((id as u16).to_be_bytes())
}

/// Cursor-style strict reader over a plaintext.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtoError> {
        if self.pos + n > self.data.len() {
            return Err(ProtoError::Malformed);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8, ProtoError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ProtoError> {
        let s = self.take(2)?;
        Ok(u16::from_be_bytes([s[0], s[1]]))
    }

    pub fn u64(&mut self) -> Result<u64, ProtoError> {
        let s = self.take(8)?;
        let mut b = [0u8; 8];
        b.copy_from_slice(s);
        Ok(u64::from_be_bytes(b))
    }

    pub fn key(&mut self) -> Result<Key, ProtoError> {
        let s = self.take(16)?;
        let mut b = [0u8; 16];
        b.copy_from_slice(s);
        Ok(Key(b))
    }

    pub fn slice(&mut self, n: usize) -> Result<&'a [u8], ProtoError> {
        self.take(n)
    }

    /// Fail unless the whole input was consumed.
    pub fn finish(&self) -> Result<(), ProtoError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(ProtoError::Malformed)
        }
    }
}

/// DA-Notification plaintext: agg id | nonce | child count | child ids.
pub fn encode_notification(
    agg: usize,
    nonce: u64,
    children: &[usize],
) -> Result<Vec<u8>, ProtoError> {
    if children.len() > u8::MAX as usize {
        return Err(ProtoError::Malformed);
    }
    let mut out = Vec::with_capacity(2 + 8 + 1 + 2 * children.len());
    out.extend_from_slice(&encode_id(agg)?);
    out.extend_from_slice(&nonce.to_be_bytes());
    out.push(children.len() as u8);
    for &c in children {
        out.extend_from_slice(&encode_id(c)?);
    }
    Ok(out)
}

pub struct Notification {
    pub agg: usize,
    pub nonce: u64,
    pub children: Vec<usize>,
}

pub fn parse_notification(plain: &[u8]) -> Result<Notification, ProtoError> {
    let mut r = Reader::new(plain);
    let agg = r.u16()? as usize;
    let nonce = r.u64()?;
    let count = r.u8()? as usize;
    let mut children = Vec::with_capacity(count);
    for _ in 0..count {
        children.push(r.u16()? as usize);
    }
    r.finish()?;
    if children.is_empty() {
        return Err(ProtoError::Malformed);
    }
    Ok(Notification {
        agg,
        nonce,
        children,
    })
}

/// Seed component addressed to the aggregator:
/// BS tag | nonce + 1 | RN(agg) | RN(child) per requested child.
pub fn encode_seed_for_agg(nonce_plus_one: u64, rn_agg: u64, rn_children: &[u64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 + 8 + 8 + 8 * rn_children.len());
    out.extend_from_slice(&BS_TAG.to_be_bytes());
    out.extend_from_slice(&nonce_plus_one.to_be_bytes());
    out.extend_from_slice(&rn_agg.to_be_bytes());
    for rn in rn_children {
        out.extend_from_slice(&rn.to_be_bytes());
    }
    out
}

pub struct SeedForAgg {
    pub nonce_plus_one: u64,
    pub rn_agg: u64,
    pub rn_children: Vec<u64>,
}

pub fn parse_seed_for_agg(plain: &[u8], expected_children: usize) -> Result<SeedForAgg, ProtoError> {
    let mut r = Reader::new(plain);
    if r.u16()? != BS_TAG {
        return Err(ProtoError::Malformed);
    }
    let nonce_plus_one = r.u64()?;
    let rn_agg = r.u64()?;
    let mut rn_children = Vec::with_capacity(expected_children);
    for _ in 0..expected_children {
        rn_children.push(r.u64()?);
    }
    r.finish()?;
    Ok(SeedForAgg {
        nonce_plus_one,
        rn_agg,
        rn_children,
    })
}

/// Seed component addressed to a child: BS tag | agg id | RN(agg) | RN(child).
pub fn encode_seed_for_child(agg: usize, rn_agg: u64, rn_child: u64) -> Result<Vec<u8>, ProtoError> {
    let mut out = Vec::with_capacity(2 + 2 + 8 + 8);
    out.extend_from_slice(&BS_TAG.to_be_bytes());
    out.extend_from_slice(&encode_id(agg)?);
    out.extend_from_slice(&rn_agg.to_be_bytes());
    out.extend_from_slice(&rn_child.to_be_bytes());
    Ok(out)
}

pub struct SeedForChild {
    pub agg: usize,
    pub rn_agg: u64,
    pub rn_child: u64,
}

pub fn parse_seed_for_child(plain: &[u8]) -> Result<SeedForChild, ProtoError> {
    let mut r = Reader::new(plain);
    if r.u16()? != BS_TAG {
        return Err(ProtoError::Malformed);
    }
    let agg = r.u16()? as usize;
    let rn_agg = r.u64()?;
    let rn_child = r.u64()?;
    r.finish()?;
    Ok(SeedForChild {
        agg,
        rn_agg,
        rn_child,
    })
}

/// Concatenate ciphertext components, each with a 2-byte length prefix. The
/// first component is the aggregator's; the rest follow the notification's
/// child order.
pub fn frame_components(components: &[Vec<u8>]) -> Result<Vec<u8>, ProtoError> {
    let mut out = Vec::new();
    for c in components {
        let len = u16::try_from(c.len()).map_err(|_| ProtoError::Malformed)?;
        out.extend_from_slice(&len.to_be_bytes());
        out.extend_from_slice(c);
    }
    Ok(out)
}

pub fn split_components(payload: &[u8], expected: usize) -> Result<Vec<&[u8]>, ProtoError> {
    let mut r = Reader::new(payload);
    let mut out = Vec::with_capacity(expected);
    for _ in 0..expected {
        let len = r.u16()? as usize;
        out.push(r.slice(len)?);
    }
    r.finish()?;
    Ok(out)
}

/// New pairwise key offer: key | child nonce, encrypted under the temp key.
pub fn encode_key_offer(key: &Key, nonce: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(24);
    out.extend_from_slice(&key.0);
    out.extend_from_slice(&nonce.to_be_bytes());
    out
}

pub fn parse_key_offer(plain: &[u8]) -> Result<(Key, u64), ProtoError> {
    let mut r = Reader::new(plain);
    let key = r.key()?;
    let nonce = r.u64()?;
    r.finish()?;
    Ok((key, nonce))
}

pub fn encode_nonce_only(nonce: u64) -> Vec<u8> {
    nonce.to_be_bytes().to_vec()
}

pub fn parse_nonce_only(plain: &[u8]) -> Result<u64, ProtoError> {
    let mut r = Reader::new(plain);
    let nonce = r.u64()?;
    r.finish()?;
    Ok(nonce)
}

/// Refresh response: nonce_a + 1 | new key | nonce_b.
pub fn encode_refresh_response(nonce_a_plus_one: u64, key_new: &Key, nonce_b: u64) -> Vec<u8> {
    let mut out = Vec::with_capacity(32);
    out.extend_from_slice(&nonce_a_plus_one.to_be_bytes());
    out.extend_from_slice(&key_new.0);
    out.extend_from_slice(&nonce_b.to_be_bytes());
    out
}

pub fn parse_refresh_response(plain: &[u8]) -> Result<(u64, Key, u64), ProtoError> {
    let mut r = Reader::new(plain);
    let nonce_a_plus_one = r.u64()?;
    let key_new = r.key()?;
    let nonce_b = r.u64()?;
    r.finish()?;
    Ok((nonce_a_plus_one, key_new, nonce_b))
}

/// Temporary key from the two 64-bit seed random numbers: their full 128-bit
/// product, big-endian.
pub fn temp_key(rn_agg: u64, rn_child: u64) -> Key {
    Key::from_u128(rn_agg as u128 * rn_child as u128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn notification_golden_bytes() {
        // A = 3, children {7, 9}, nonce 100.
        let plain = encode_notification(3, 100, &[7, 9]).unwrap();
        let expected = [
            0x00, 0x03, // agg id
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x64, // nonce 100
            0x02, // child count
            0x00, 0x07, 0x00, 0x09, // child ids
        ];
        assert_eq!(plain, expected);
        let parsed = parse_notification(&plain).unwrap();
        assert_eq!(parsed.agg, 3);
        assert_eq!(parsed.nonce, 100);
        assert_eq!(parsed.children, vec![7, 9]);
    }

    #[test]
    fn temp_key_small_product() {
        assert_eq!(
            temp_key(2, 3).0,
            [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 6]
        );
    }

    #[test]
    fn temp_key_max_product() {
        // (2^64 - 1)^2 = 2^128 - 2^65 + 1.
        let k = temp_key(u64::MAX, u64::MAX);
        let expected = [
            0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFE, //
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x01,
        ];
        assert_eq!(k.0, expected);
    }

    #[test]
    fn strict_parsers_reject_trailing_bytes() {
        let mut plain = encode_notification(3, 100, &[7]).unwrap();
        plain.push(0);
        assert!(parse_notification(&plain).is_err());

        let mut offer = encode_key_offer(&Key([1; 16]), 5);
        offer.push(0);
        assert!(parse_key_offer(&offer).is_err());
    }

    #[test]
    fn component_framing_round_trip() {
        let parts = vec![vec![1u8, 2, 3], vec![], vec![9u8; 40]];
        let framed = frame_components(&parts).unwrap();
        let split = split_components(&framed, 3).unwrap();
        assert_eq!(split.len(), 3);
        for (orig, got) in parts.iter().zip(split) {
            assert_eq!(orig.as_slice(), got);
        }
        assert!(split_components(&framed, 2).is_err());
        assert!(split_components(&framed[..framed.len() - 1], 3).is_err());
    }

    #[test]
    fn envelope_round_trip() {
        let msg = ProtocolMessage {
            kind: MessageKind::RefreshAck,
            sender: 12,
            receiver: 99,
            payload: vec![1, 2, 3],
        };
        let bytes = msg.to_bytes();
        assert_eq!(ProtocolMessage::from_bytes(&bytes).unwrap(), msg);
        assert!(ProtocolMessage::from_bytes(&[0, 0, 1, 0]).is_err());
        let mut bad_kind = bytes.clone();
        bad_kind[0] = 0;
        assert!(ProtocolMessage::from_bytes(&bad_kind).is_err());
    }

    #[test]
    fn ids_above_reserved_tag_rejected() {
        assert_eq!(encode_id(0xFFFF), Err(ProtoError::IdTooLarge));
        assert!(encode_id(0xFFFE).is_ok());
    }
}
