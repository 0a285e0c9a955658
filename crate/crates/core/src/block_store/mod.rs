//! Encrypted, compressed storage of the BWT last column.
//!
//! The column is cut into blocks of `bs` rows grouped sixteen to a
//! superblock. Each block is remapped onto its own sorted alphabet, passed
//! through move-to-front and zero-run coding, masked with the block's
//! keystream and bit packed at the smallest sufficient width. Superblocks
//! carry absolute occurrence counts, blocks carry counts relative to their
//! superblock, so a rank query decrypts at most one block.

pub mod codec;
mod format;
mod reader;

use std::io;

use thiserror::Error;

use crate::alphabet::{ItemSpan, ScrambledAlphabet};
use crate::bwt::BwtResult;
use crate::crypto::{description_nonce, CipherStream, IndexKey};
use codec::{bit_width, encrypt_symbols, mtf, pack_bits, rle0, RUN_SYMBOLS};

pub use format::{deserialize_index, serialize_index, FORMAT_VERSION, MAGIC};
pub use reader::{DecodedBlock, IndexReader, DEFAULT_CACHE_BLOCKS};

pub const BLOCKS_PER_SUPERBLOCK: usize = 16;
pub const MIN_BLOCK_SIZE: u32 = 64;
pub const MAX_BLOCK_SIZE: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum BlockStoreError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed index at byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
    #[error("unsupported index format version {0}")]
    UnsupportedVersion(u16),
    /// A wrong key and a damaged payload look the same.
    #[error("decryption failed or corrupt index")]
    DecryptionFailed,
    #[error("{0}")]
    OutOfBounds(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Build parameters of the block store.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoreParams {
    pub block_size: u32,
    /// Percentage of text positions whose rows are marked, in `[1, 100]`.
    pub sample_rate: u32,
    pub threads: usize,
}

impl Default for StoreParams {
    fn default() -> Self {
        StoreParams {
            block_size: 16 << 10,
            sample_rate: 2,
            threads: 1,
        }
    }
}

impl StoreParams {
    pub fn validate(&self) -> Result<(), BlockStoreError> {
        let bs = self.block_size;
        if !bs.is_power_of_two() || !(MIN_BLOCK_SIZE..=MAX_BLOCK_SIZE).contains(&bs) {
            return Err(BlockStoreError::InvalidParameter(format!(
                "block size {bs} must be a power of two in [{MIN_BLOCK_SIZE}, {MAX_BLOCK_SIZE}]"
            )));
        }
        sample_stride(self.sample_rate)?;
        if self.threads == 0 {
            return Err(BlockStoreError::InvalidParameter(
                "thread count must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Distance between sampled text positions: `round(100 / rate)`.
pub fn sample_stride(sample_rate: u32) -> Result<u32, BlockStoreError> {
    if !(1..=100).contains(&sample_rate) {
        return Err(BlockStoreError::InvalidParameter(format!(
            "sample rate {sample_rate}% outside [1, 100]"
        )));
    }
    Ok((200 + sample_rate) / (2 * sample_rate))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexHeader {
    pub k: u32,
    pub block_size: u32,
    pub sample_rate: u32,
    pub base_symbols: Vec<u8>,
    /// Number of rows (super-characters including the terminator).
    pub text_len: u64,
    pub primary_row: u64,
    pub items: Vec<ItemSpan>,
    /// Sorted distinct codes occurring in the last column. Block alphabets
    /// and occurrence tables refer to codes by their index here.
    pub codes: Vec<u32>,
}

impl IndexHeader {
    pub fn block_count(&self) -> usize {
        self.text_len.div_ceil(self.block_size as u64) as usize
    }

    pub fn superblock_count(&self) -> usize {
        self.block_count().div_ceil(BLOCKS_PER_SUPERBLOCK)
    }

    /// Rows covered by `block`.
    pub fn block_len(&self, block: usize) -> usize {
        let bs = self.block_size as u64;
        (self.text_len - block as u64 * bs).min(bs) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEntry {
    /// Indices into the header's code table, ascending.
    pub alphabet: Vec<u32>,
    /// Occurrences of each alphabet entry earlier in the same superblock.
    pub rel_before: Vec<u32>,
    /// Number of symbols after zero-run coding.
    pub stored_len: u32,
    pub payload: Vec<u8>,
}

impl BlockEntry {
    /// Modulus of the masked symbols: block alphabet plus two run digits.
    pub fn modulus(&self) -> u32 {
        self.alphabet.len() as u32 + RUN_SYMBOLS
    }

    pub fn width(&self) -> u32 {
        bit_width(self.modulus() as u64)
    }
}

/// Rows whose text position is a multiple of `stride`, in row order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkedRows {
    pub stride: u32,
    pub rows: Vec<u32>,
    pub positions: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncryptedIndex {
    pub header: IndexHeader,
    /// Row-major `(superblocks + 1) x codes`; row `s` counts each code
    /// before superblock `s`, the last row holds the totals.
    pub superblock_occ: Vec<u64>,
    pub blocks: Vec<BlockEntry>,
    pub marked: MarkedRows,
    pub descriptions: Vec<Vec<u8>>,
}

impl EncryptedIndex {
    pub fn superblock_occ_row(&self, superblock: usize) -> &[u64] {
        let n = self.header.codes.len();
        &self.superblock_occ[superblock * n..(superblock + 1) * n]
    }

    pub fn payload_bytes(&self) -> usize {
        self.blocks.iter().map(|b| b.payload.len()).sum()
    }
}

/// Encrypts or decrypts a description in place.
pub fn apply_description_cipher(key: &IndexKey, item: usize, data: &mut [u8]) {
    CipherStream::new(key.encrypt_half(), description_nonce(item as u64)).apply(data);
}

fn encode_block(key: &IndexKey, block: usize, symbols: &[u32]) -> BlockEntry {
    let mut alphabet = symbols.to_vec();
    alphabet.sort_unstable();
    alphabet.dedup();
    let dense: Vec<u32> = symbols
        .iter()
        .map(|s| alphabet.binary_search(s).unwrap() as u32)
        .collect();
    let ranks = mtf(&dense, alphabet.len() as u32).expect("dense symbols are in range");
    let mut stored = rle0(&ranks);
    let mut entry = BlockEntry {
        alphabet,
        rel_before: Vec::new(),
        stored_len: stored.len() as u32,
        payload: Vec::new(),
    };
    encrypt_symbols(
        &mut stored,
        key.encrypt_half(),
        block as u64,
        entry.modulus(),
    );
    entry.payload =
        pack_bits(&stored, entry.width()).expect("masked symbols are below the modulus");
    entry
}

/// Builds the encrypted block store for a BWT of an extended text.
pub fn build_index(
    bwt: &BwtResult,
    alpha: &ScrambledAlphabet,
    items: &[ItemSpan],
    descriptions: &[Vec<u8>],
    key: &IndexKey,
    params: &StoreParams,
) -> Result<EncryptedIndex, BlockStoreError> {
    params.validate()?;
    if descriptions.len() != items.len() {
        return Err(BlockStoreError::InvalidParameter(format!(
            "{} descriptions for {} items",
            descriptions.len(),
            items.len()
        )));
    }
    let n = bwt.len();
    if n == 0 {
        return Err(BlockStoreError::InvalidParameter("empty BWT".into()));
    }

    let mut codes = bwt.last_column.clone();
    codes.sort_unstable();
    codes.dedup();
    let ncodes = codes.len();
    let column: Vec<u32> = bwt
        .last_column
        .iter()
        .map(|c| codes.binary_search(c).unwrap() as u32)
        .collect();

    let header = IndexHeader {
        k: alpha.k(),
        block_size: params.block_size,
        sample_rate: params.sample_rate,
        base_symbols: alpha.base().symbols().to_vec(),
        text_len: n as u64,
        primary_row: bwt.primary_row as u64,
        items: items.to_vec(),
        codes,
    };
    let bs = params.block_size as usize;
    let nblocks = header.block_count();
    let nsb = header.superblock_count();

    // blocks are independent; encode them on contiguous slices per worker
    let per_worker = nblocks.div_ceil(params.threads);
    let mut blocks: Vec<BlockEntry> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..nblocks)
            .step_by(per_worker.max(1))
            .map(|first| {
                let last = (first + per_worker).min(nblocks);
                let column = &column;
                s.spawn(move || {
                    (first..last)
                        .map(|b| encode_block(key, b, &column[b * bs..((b + 1) * bs).min(n)]))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().unwrap())
            .collect()
    });

    let mut superblock_occ = vec![0u64; (nsb + 1) * ncodes];
    let mut absolute = vec![0u64; ncodes];
    let mut in_superblock = vec![0u32; ncodes];
    for (b, entry) in blocks.iter_mut().enumerate() {
        if b % BLOCKS_PER_SUPERBLOCK == 0 {
            let sb = b / BLOCKS_PER_SUPERBLOCK;
            superblock_occ[sb * ncodes..(sb + 1) * ncodes].copy_from_slice(&absolute);
            in_superblock.fill(0);
        }
        entry.rel_before = entry
            .alphabet
            .iter()
            .map(|&g| in_superblock[g as usize])
            .collect();
        for &g in &column[b * bs..((b + 1) * bs).min(n)] {
            in_superblock[g as usize] += 1;
            absolute[g as usize] += 1;
        }
    }
    superblock_occ[nsb * ncodes..].copy_from_slice(&absolute);

    let stride = sample_stride(params.sample_rate)?;
    let mut marked = MarkedRows {
        stride,
        rows: Vec::with_capacity(n / stride as usize + 1),
        positions: Vec::with_capacity(n / stride as usize + 1),
    };
    for (row, &pos) in bwt.suffix_positions.iter().enumerate() {
        if pos % stride == 0 {
            marked.rows.push(row as u32);
            marked.positions.push(pos);
        }
    }

    let descriptions = descriptions
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut d = d.clone();
            apply_description_cipher(key, i, &mut d);
            d
        })
        .collect();

    Ok(EncryptedIndex {
        header,
        superblock_occ,
        blocks,
        marked,
        descriptions,
    })
}
