//! Salsa20/20 keystream, the integer PRNG built on it, and index key handling.
//!
//! Two independent streams are derived from one 64-byte [`IndexKey`]: the
//! first half keys alphabet scrambling, the second half keys block and
//! metadata encryption. Nonces keep the streams of one index disjoint:
//!
//! | nonce              | use                          |
//! |--------------------|------------------------------|
//! | 0                  | alphabet scrambling          |
//! | 1 + block number   | block payload encryption     |
//! | 2^48 + item index  | sequence description         |

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const KEY_LEN: usize = 64;
pub const SCRAMBLE_NONCE: u64 = 0;
pub const METADATA_NONCE_BASE: u64 = 1 << 48;

#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("entropy source unavailable: {0}")]
    Entropy(String),
    #[error("key file must be exactly {KEY_LEN} bytes, found {0}")]
    KeyLength(usize),
    #[error("key file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bound must be at least 1")]
    ZeroBound,
}

/// Nonce for the keystream of data block `block_number`.
pub fn block_nonce(block_number: u64) -> u64 {
    1 + block_number
}

/// Nonce for the keystream protecting the description of item `item`.
pub fn description_nonce(item: u64) -> u64 {
    METADATA_NONCE_BASE + item
}

/// 64-byte index secret.
#[derive(Clone, PartialEq, Eq)]
pub struct IndexKey([u8; KEY_LEN]);

impl IndexKey {
    pub fn from_bytes(bytes: [u8; KEY_LEN]) -> Self {
        IndexKey(bytes)
    }

    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; KEY_LEN] = bytes
            .try_into()
            .map_err(|_| CryptoError::KeyLength(bytes.len()))?;
        Ok(IndexKey(arr))
    }

    /// Fresh key from the operating system's CSPRNG. Fails rather than
    /// falling back to a weaker source.
    pub fn generate() -> Result<Self, CryptoError> {
        let mut bytes = [0u8; KEY_LEN];
        getrandom::getrandom(&mut bytes).map_err(|e| CryptoError::Entropy(e.to_string()))?;
        Ok(IndexKey(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }

    pub fn scramble_half(&self) -> &[u8; 32] {
        self.0[..32].try_into().unwrap()
    }

    pub fn encrypt_half(&self) -> &[u8; 32] {
        self.0[32..].try_into().unwrap()
    }

    pub fn read_file(path: &Path) -> Result<Self, CryptoError> {
        let bytes = fs::read(path).map_err(|source| CryptoError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_slice(&bytes)
    }

    /// Writes the raw 64 bytes, owner-readable only where supported.
    pub fn write_file(&self, path: &Path, overwrite: bool) -> Result<(), CryptoError> {
        let io_err = |source| CryptoError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut opts = fs::OpenOptions::new();
        opts.write(true);
        if overwrite {
            opts.create(true).truncate(true);
        } else {
            opts.create_new(true);
        }
        #[cfg(unix)]
        {
            use std::os::unix::fs::OpenOptionsExt;
            opts.mode(0o600);
        }
        let mut f = opts.open(path).map_err(io_err)?;
        f.write_all(&self.0).map_err(io_err)?;
        f.sync_all().map_err(io_err)
    }
}

/// `true` when the key file is not readable by group or others.
/// Always `true` on platforms without Unix permissions.
pub fn key_file_is_private(path: &Path) -> bool {
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        match fs::metadata(path) {
            Ok(m) => m.permissions().mode() & 0o077 == 0,
            Err(_) => false,
        }
    }
    #[cfg(not(unix))]
    {
        let _ = path;
        true
    }
}

impl fmt::Debug for IndexKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IndexKey(<redacted>)")
    }
}

const SIGMA: [u32; 4] = [0x6170_7865, 0x3320_646e, 0x7962_2d32, 0x6b20_6574];

#[inline(always)]
fn quarter_round(s: &mut [u32; 16], a: usize, b: usize, c: usize, d: usize) {
    s[b] ^= s[a].wrapping_add(s[d]).rotate_left(7);
    s[c] ^= s[b].wrapping_add(s[a]).rotate_left(9);
    s[d] ^= s[c].wrapping_add(s[b]).rotate_left(13);
    s[a] ^= s[d].wrapping_add(s[c]).rotate_left(18);
}

/// The Salsa20/20 block function for a 256-bit key.
pub fn salsa20_block(key: &[u8; 32], nonce: u64, counter: u64) -> [u8; 64] {
    let k = |i: usize| u32::from_le_bytes(key[4 * i..4 * i + 4].try_into().unwrap());
    let input: [u32; 16] = [
        SIGMA[0],
        k(0),
        k(1),
        k(2),
        k(3),
        SIGMA[1],
        nonce as u32,
        (nonce >> 32) as u32,
        counter as u32,
        (counter >> 32) as u32,
        SIGMA[2],
        k(4),
        k(5),
        k(6),
        k(7),
        SIGMA[3],
    ];
    let mut x = input;
    for _ in 0..10 {
        // columns
        quarter_round(&mut x, 0, 4, 8, 12);
        quarter_round(&mut x, 5, 9, 13, 1);
        quarter_round(&mut x, 10, 14, 2, 6);
        quarter_round(&mut x, 15, 3, 7, 11);
        // rows
        quarter_round(&mut x, 0, 1, 2, 3);
        quarter_round(&mut x, 5, 6, 7, 4);
        quarter_round(&mut x, 10, 11, 8, 9);
        quarter_round(&mut x, 15, 12, 13, 14);
    }
    let mut out = [0u8; 64];
    for i in 0..16 {
        out[4 * i..4 * i + 4].copy_from_slice(&x[i].wrapping_add(input[i]).to_le_bytes());
    }
    out
}

/// Positioned Salsa20/20 keystream for one (key, nonce) pair.
#[derive(Clone)]
pub struct CipherStream {
    key: [u8; 32],
    nonce: u64,
    position: u64,
    block: [u8; 64],
}

impl CipherStream {
    pub fn new(key: &[u8; 32], nonce: u64) -> Self {
        CipherStream {
            key: *key,
            nonce,
            position: 0,
            block: salsa20_block(key, nonce, 0),
        }
    }

    pub fn nonce(&self) -> u64 {
        self.nonce
    }

    /// Bytes consumed so far.
    pub fn position(&self) -> u64 {
        self.position
    }

    #[inline]
    pub fn next_byte(&mut self) -> u8 {
        let off = (self.position % 64) as usize;
        if off == 0 && self.position != 0 {
            self.block = salsa20_block(&self.key, self.nonce, self.position / 64);
        }
        self.position += 1;
        self.block[off]
    }

    pub fn fill(&mut self, out: &mut [u8]) {
        for b in out {
            *b = self.next_byte();
        }
    }

    /// XORs the keystream into `data`.
    pub fn apply(&mut self, data: &mut [u8]) {
        for b in data {
            *b ^= self.next_byte();
        }
    }

    /// Next little-endian 32-bit word of the keystream.
    #[inline]
    pub fn next_u32(&mut self) -> u32 {
        let bytes = [
            self.next_byte(),
            self.next_byte(),
            self.next_byte(),
            self.next_byte(),
        ];
        u32::from_le_bytes(bytes)
    }

    /// Draw in `[0, bound)`: four keystream bytes read as a little-endian
    /// `u32`, reduced modulo `bound`. Always consumes exactly four bytes.
    #[inline]
    pub fn next_int(&mut self, bound: u32) -> Result<u32, CryptoError> {
        if bound == 0 {
            return Err(CryptoError::ZeroBound);
        }
        Ok(self.next_u32() % bound)
    }
}

impl fmt::Debug for CipherStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CipherStream")
            .field("nonce", &self.nonce)
            .field("position", &self.position)
            .finish_non_exhaustive()
    }
}

/// `count` successive `next_int(bound)` draws from a fresh stream.
pub fn keystream_symbols(
    key: &[u8; 32],
    nonce: u64,
    count: usize,
    bound: u32,
) -> Result<Vec<u32>, CryptoError> {
    if bound == 0 {
        return Err(CryptoError::ZeroBound);
    }
    let mut stream = CipherStream::new(key, nonce);
    Ok((0..count).map(|_| stream.next_u32() % bound).collect())
}
