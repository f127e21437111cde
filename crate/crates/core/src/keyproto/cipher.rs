//! Pluggable authenticated symmetric encryption for the key protocol.
//!
//! The protocol only needs two guarantees from its cipher: decryption under
//! the right key restores the plaintext, and decryption under a wrong key or
//! of a tampered ciphertext fails detectably. The default implementation is
//! a deterministic SHA-256 keystream XOR with an 8-byte truncated keyed-hash
//! tag over the ciphertext; it is a simulation stand-in, not a hardened
//! construction.

use alloc::vec::Vec;
use core::fmt;

use sha2::{Digest, Sha256};

/// A 128-bit secret key.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Key(pub [u8; 16]);

impl Key {
    pub fn from_u128(v: u128) -> Self {
        Key(v.to_be_bytes())
    }

    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key(")?;
        for b in self.0 {
            write!(f, "{b:02x}")?;
        }
        write!(f, ")")
    }
}

/// Decryption failed: wrong key, truncated input or tampered bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecryptError;

impl fmt::Display for DecryptError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "authenticated decryption failed")
    }
}

impl core::error::Error for DecryptError {}

/// Authenticated symmetric encryption contract.
pub trait CipherSuite {
    fn encrypt(&self, key: &Key, plaintext: &[u8]) -> Vec<u8>;
    fn decrypt(&self, key: &Key, ciphertext: &[u8]) -> Result<Vec<u8>, DecryptError>;
}

/// Number of tag bytes appended to every ciphertext.
pub const TAG_LEN: usize = 8;

/// Deterministic keyed stream cipher with a truncated-hash integrity tag.
#[derive(Debug, Clone, Copy, Default)]
pub struct KeyedStreamCipher;

impl KeyedStreamCipher {
    fn keystream_block(key: &Key, counter: u64) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"ks");
        h.update(key.0);
        h.update(counter.to_be_bytes());
        h.finalize().into()
    }

    fn tag(key: &Key, ciphertext: &[u8]) -> [u8; TAG_LEN] {
        let mut h = Sha256::new();
        h.update(b"tag");
        h.update(key.0);
        h.update(ciphertext);
        let digest = h.finalize();
        let mut tag = [0u8; TAG_LEN];
        tag.copy_from_slice(&digest[..TAG_LEN]);
        tag
    }

    fn xor_keystream(key: &Key, data: &mut [u8]) {
        for (block_idx, chunk) in data.chunks_mut(32).enumerate() {
            let ks = Self::keystream_block(key, block_idx as u64);
            for (b, k) in chunk.iter_mut().zip(ks.iter()) {
                *b ^= k;
            }
        }
    }
}

impl CipherSuite for KeyedStreamCipher {
    fn encrypt(&self, key: &Key, plaintext: &[u8]) -> Vec<u8> {
        let mut out = Vec::with_capacity(plaintext.len() + TAG_LEN);
        out.extend_from_slice(plaintext);
        Self::xor_keystream(key, &mut out);
        let tag = Self::tag(key, &out);
        out.extend_from_slice(&tag);
        out
    }

    fn decrypt(&self, key: &Key, ciphertext: &[u8]) -> Result<Vec<u8>, DecryptError> {
        if ciphertext.len() < TAG_LEN {
            return Err(DecryptError);
        }
        let (body, tag) = ciphertext.split_at(ciphertext.len() - TAG_LEN);
        if Self::tag(key, body) != *tag {
            return Err(DecryptError);
        }
        let mut out = body.to_vec();
        Self::xor_keystream(key, &mut out);
        Ok(out)
    }
}
