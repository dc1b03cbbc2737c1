//! Prefix-preserving IPv4 anonymization (Crypto-PAn construction).
//!
//! A 256-bit key is split into a 128-bit AES key and a 128-bit pad seed.
//! The pad is the AES encryption of the seed. Output bit `i` of an address
//! is input bit `i` XORed with the most significant bit of
//! `AES(prefix_i || pad[i..128])`, where `prefix_i` is the first `i` input
//! bits. Two addresses sharing a `k`-bit prefix therefore map to outputs
//! sharing exactly a `k`-bit prefix.

use std::fs;
use std::io::{BufRead, Write};
use std::net::Ipv4Addr;
use std::num::NonZeroUsize;
use std::path::Path;

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;
use lru::LruCache;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AnonError {
    #[error("key file not found: {0}")]
    KeyNotFound(String),
    #[error("invalid key: {0}")]
    BadKey(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// 256-bit anonymization key: AES key followed by the pad seed.
#[derive(Clone, PartialEq, Eq)]
pub struct AnonKey {
    pub cipher_key: [u8; 16],
    pub pad_seed: [u8; 16],
}

impl std::fmt::Debug for AnonKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AnonKey(..)")
    }
}

impl AnonKey {
    pub fn from_bytes(bytes: &[u8; 32]) -> Self {
        let mut cipher_key = [0u8; 16];
        let mut pad_seed = [0u8; 16];
        cipher_key.copy_from_slice(&bytes[..16]);
        pad_seed.copy_from_slice(&bytes[16..]);
        Self {
            cipher_key,
            pad_seed,
        }
    }

    pub fn to_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        out[..16].copy_from_slice(&self.cipher_key);
        out[16..].copy_from_slice(&self.pad_seed);
        out
    }

    /// Parses exactly 64 hex characters (surrounding whitespace ignored).
    pub fn from_hex(text: &str) -> Result<Self, AnonError> {
        let text = text.trim();
        if text.len() != 64 {
            return Err(AnonError::BadKey(format!(
                "expected 64 hex characters, found {}",
                text.len()
            )));
        }
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(text, &mut bytes).map_err(|e| AnonError::BadKey(e.to_string()))?;
        Ok(Self::from_bytes(&bytes))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn read_file(path: &Path) -> Result<Self, AnonError> {
        if !path.is_file() {
            return Err(AnonError::KeyNotFound(path.display().to_string()));
        }
        Self::from_hex(&fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), AnonError> {
        fs::write(path, format!("{}\n", self.to_hex()))?;
        Ok(())
    }
}

/// Keyed anonymizer with the derived pad cached. Pure and `Sync`.
#[derive(Clone)]
pub struct Anonymizer {
    cipher: Aes128,
    pad: u128,
}

impl Anonymizer {
    pub fn new(key: &AnonKey) -> Self {
        let cipher = Aes128::new(GenericArray::from_slice(&key.cipher_key));
        let pad = encrypt(&cipher, u128::from_be_bytes(key.pad_seed));
        Self { cipher, pad }
    }

    pub fn anonymize_u32(&self, addr: u32) -> u32 {
        let orig = u128::from(addr) << 96;
        let mut flips = 0u32;
        for i in 0..32u32 {
            let block = if i == 0 {
                self.pad
            } else {
                let keep = u128::MAX << (128 - i);
                (orig & keep) | (self.pad & !keep)
            };
            let msb = (encrypt(&self.cipher, block) >> 127) as u32;
            flips |= msb << (31 - i);
        }
        addr ^ flips
    }

    pub fn anonymize_ip(&self, addr: Ipv4Addr) -> Ipv4Addr {
        Ipv4Addr::from(self.anonymize_u32(u32::from(addr)))
    }
}

fn encrypt(cipher: &Aes128, block: u128) -> u128 {
    let mut buf = GenericArray::from(block.to_be_bytes());
    cipher.encrypt_block(&mut buf);
    u128::from_be_bytes(buf.into())
}

/// [`Anonymizer`] front-end with a bounded LRU memo. One per worker.
pub struct CachedAnonymizer<'a> {
    inner: &'a Anonymizer,
    memo: LruCache<u32, u32>,
}

impl<'a> CachedAnonymizer<'a> {
    pub fn new(inner: &'a Anonymizer, capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN);
        Self {
            inner,
            memo: LruCache::new(cap),
        }
    }

    pub fn anonymize_ip(&mut self, addr: Ipv4Addr) -> Ipv4Addr {
        let raw = u32::from(addr);
        let out = *self
            .memo
            .get_or_insert(raw, || self.inner.anonymize_u32(raw));
        Ipv4Addr::from(out)
    }

    pub fn len(&self) -> usize {
        self.memo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.memo.is_empty()
    }
}

pub const DEFAULT_MEMO_CAPACITY: usize = 1 << 16;

/// Anonymizes addresses elementwise, preserving order.
pub fn anonymize_stream<I>(anon: &Anonymizer, addrs: I) -> Vec<Ipv4Addr>
where
    I: IntoIterator<Item = Ipv4Addr>,
{
    let mut cached = CachedAnonymizer::new(anon, DEFAULT_MEMO_CAPACITY);
    addrs.into_iter().map(|a| cached.anonymize_ip(a)).collect()
}

/// Reads one dotted-quad address per line and anonymizes each.
pub fn anonymize_lines<R: BufRead>(anon: &Anonymizer, input: R) -> Result<Vec<Ipv4Addr>, AnonError> {
    let mut addrs = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        let text = line.trim();
        let addr: Ipv4Addr = text.parse().map_err(|_| AnonError::Parse {
            line: i + 1,
            msg: format!("invalid IPv4 address {text:?}"),
        })?;
        addrs.push(addr);
    }
    Ok(anonymize_stream(anon, addrs))
}

/// Rewrites the source field of an `epoch_ns<TAB>src` packet log, leaving
/// everything else byte-for-byte. Returns the number of rows rewritten.
pub fn rewrite_packet_log<R: BufRead, W: Write>(
    anon: &Anonymizer,
    input: R,
    mut out: W,
) -> Result<usize, AnonError> {
    let mut cached = CachedAnonymizer::new(anon, DEFAULT_MEMO_CAPACITY);
    let mut rows = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.is_empty() {
            writeln!(out)?;
            continue;
        }
        let (ts, src) = line.split_once('\t').ok_or_else(|| AnonError::Parse {
            line: i + 1,
            msg: "expected epoch_ns<TAB>src_ip".into(),
        })?;
        let addr: Ipv4Addr = src.parse().map_err(|_| AnonError::Parse {
            line: i + 1,
            msg: format!("invalid IPv4 address {src:?}"),
        })?;
        writeln!(out, "{ts}\t{}", cached.anonymize_ip(addr))?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}

/// Rewrites the `ip` field of every JSON-lines enrichment record. Field
/// order is kept; insignificant whitespace is normalized.
pub fn rewrite_enrichment_log<R: BufRead, W: Write>(
    anon: &Anonymizer,
    input: R,
    mut out: W,
) -> Result<usize, AnonError> {
    let mut cached = CachedAnonymizer::new(anon, DEFAULT_MEMO_CAPACITY);
    let mut rows = 0;
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| AnonError::Parse { line: i + 1, msg };
        let mut value: serde_json::Value =
            serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        let ip = value
            .get("ip")
            .and_then(|v| v.as_str())
            .ok_or_else(|| parse_err("missing string field \"ip\"".into()))?;
        let addr: Ipv4Addr = ip
            .parse()
            .map_err(|_| parse_err(format!("invalid IPv4 address {ip:?}")))?;
        value["ip"] = serde_json::Value::String(cached.anonymize_ip(addr).to_string());
        serde_json::to_writer(&mut out, &value).map_err(|e| parse_err(e.to_string()))?;
        writeln!(out)?;
        rows += 1;
    }
    out.flush()?;
    Ok(rows)
}

/// Length of the common bit prefix of two addresses.
pub fn common_prefix_len(a: u32, b: u32) -> u32 {
    (a ^ b).leading_zeros()
}
