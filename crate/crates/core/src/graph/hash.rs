//! Canonical byte serialization + XXH3-128 (seed 0).
//!
//! Every node hash in this crate is `xxh3_128` of a little-endian byte
//! stream assembled by [`CanonicalHasher`]. The stream layout is part of the
//! fingerprint format: changing it changes every stored fingerprint.

use xxhash_rust::xxh3::xxh3_128;

pub type NodeHash = u128;

/// Identity of the hash function, embedded in configuration stamps.
pub const HASH_ID: &str = "xxh3-128/seed0/le-v1";

pub(crate) const TAG_LABEL: u8 = 0x01;
pub(crate) const TAG_DISTANCE: u8 = 0x02;
pub(crate) const TAG_ANGULAR: u8 = 0x03;
pub(crate) const TAG_CODEBOOK: u8 = 0x04;

#[derive(Debug, Default)]
pub(crate) struct CanonicalHasher {
    buf: Vec<u8>,
}

impl CanonicalHasher {
    pub fn new(tag: u8) -> Self {
        let mut h = CanonicalHasher { buf: Vec::with_capacity(64) };
        h.buf.push(tag);
        h
    }

    pub fn u128(&mut self, v: u128) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.buf.extend_from_slice(s.as_bytes());
        self
    }

    pub fn finish(&self) -> NodeHash {
        xxh3_128(&self.buf)
    }
}
