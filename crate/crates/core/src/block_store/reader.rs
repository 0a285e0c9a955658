//! Keyed access to an [`EncryptedIndex`]: rank queries over the last
//! column, LF mapping, row location and text extraction. Blocks are
//! decrypted on demand and kept in a small FIFO cache.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use super::codec::{decrypt_symbols, mtf_inverse, rle0_inverse, unpack_bits};
use super::{
    apply_description_cipher, deserialize_index, BlockStoreError, EncryptedIndex, IndexHeader,
    BLOCKS_PER_SUPERBLOCK,
};
use crate::crypto::IndexKey;

pub const DEFAULT_CACHE_BLOCKS: usize = 64;

/// Plaintext of one block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedBlock {
    /// Code-table indices, ascending.
    alphabet: Vec<u32>,
    /// Per row, index into `alphabet`.
    symbols: Vec<u32>,
    /// Per alphabet entry, the ascending row offsets holding it.
    offsets: Vec<Vec<u32>>,
}

impl DecodedBlock {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Code-table index at `offset`.
    pub fn symbol_at(&self, offset: usize) -> u32 {
        self.alphabet[self.symbols[offset] as usize]
    }

    /// Occurrences of alphabet entry `local` in rows `[0, offset)`.
    fn count_before(&self, local: usize, offset: usize) -> u64 {
        self.offsets[local].partition_point(|&o| (o as usize) < offset) as u64
    }
}

struct BlockCache {
    capacity: usize,
    blocks: HashMap<u32, Arc<DecodedBlock>>,
    order: VecDeque<u32>,
}

pub struct IndexReader {
    index: EncryptedIndex,
    key: IndexKey,
    /// `c[g]`: rows whose first super-character sorts before code `g`.
    c_array: Vec<u64>,
    /// Row of text position `j * stride`.
    sample_rows: Vec<u32>,
    cache: Mutex<BlockCache>,
    decrypted: AtomicU64,
    touched: Mutex<HashSet<u32>>,
}

impl std::fmt::Debug for IndexReader {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IndexReader")
            .field("rows", &self.index.header.text_len)
            .field("blocks", &self.index.blocks.len())
            .finish_non_exhaustive()
    }
}

impl IndexReader {
    pub fn new(index: EncryptedIndex, key: &IndexKey) -> Self {
        let ncodes = index.header.codes.len();
        let nsb = index.header.superblock_count();
        let totals = &index.superblock_occ[nsb * ncodes..];
        let mut c_array = Vec::with_capacity(ncodes + 1);
        let mut acc = 0u64;
        c_array.push(0);
        for &t in totals {
            acc += t;
            c_array.push(acc);
        }
        let m = &index.marked;
        let mut sample_rows = vec![0u32; m.positions.len()];
        for (&row, &pos) in m.rows.iter().zip(&m.positions) {
            sample_rows[(pos / m.stride) as usize] = row;
        }
        IndexReader {
            index,
            key: key.clone(),
            c_array,
            sample_rows,
            cache: Mutex::new(BlockCache {
                capacity: DEFAULT_CACHE_BLOCKS,
                blocks: HashMap::new(),
                order: VecDeque::new(),
            }),
            decrypted: AtomicU64::new(0),
            touched: Mutex::new(HashSet::new()),
        }
    }

    pub fn from_bytes(data: &[u8], key: &IndexKey) -> Result<Self, BlockStoreError> {
        Ok(Self::new(deserialize_index(data)?, key))
    }

    pub fn open(path: &Path, key: &IndexKey) -> Result<Self, BlockStoreError> {
        Self::from_bytes(&std::fs::read(path)?, key)
    }

    /// Changes the number of decoded blocks kept; 0 disables caching.
    pub fn set_cache_capacity(&self, capacity: usize) {
        let mut cache = self.cache.lock().unwrap();
        cache.capacity = capacity;
        while cache.order.len() > capacity {
            let old = cache.order.pop_front().unwrap();
            cache.blocks.remove(&old);
        }
    }

    pub fn index(&self) -> &EncryptedIndex {
        &self.index
    }

    pub fn header(&self) -> &IndexHeader {
        &self.index.header
    }

    /// Number of rows.
    pub fn len(&self) -> u64 {
        self.index.header.text_len
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn block_count(&self) -> usize {
        self.index.blocks.len()
    }

    pub fn code_count(&self) -> usize {
        self.index.header.codes.len()
    }

    /// Position of `code` in the code table, if it occurs.
    pub fn code_index(&self, code: u32) -> Option<u32> {
        self.index
            .header
            .codes
            .binary_search(&code)
            .ok()
            .map(|g| g as u32)
    }

    pub fn code(&self, g: u32) -> u32 {
        self.index.header.codes[g as usize]
    }

    /// First row whose rotation starts with code-table entry `g`; `g` may be
    /// one past the last entry.
    pub fn first_row(&self, g: u32) -> u64 {
        self.c_array[g as usize]
    }

    pub fn total(&self, g: u32) -> u64 {
        self.c_array[g as usize + 1] - self.c_array[g as usize]
    }

    /// Blocks decrypted (cache misses) since the reader was created.
    pub fn decrypted_blocks(&self) -> u64 {
        self.decrypted.load(Ordering::Relaxed)
    }

    /// Returns the distinct blocks accessed since the previous call, and
    /// starts a new tally.
    pub fn take_touched_blocks(&self) -> HashSet<u32> {
        std::mem::take(&mut *self.touched.lock().unwrap())
    }

    pub fn description(&self, item: usize) -> Option<Vec<u8>> {
        let mut d = self.index.descriptions.get(item)?.clone();
        apply_description_cipher(&self.key, item, &mut d);
        Some(d)
    }

    fn superblock_value(&self, sb: usize, g: u32) -> u64 {
        self.index.superblock_occ[sb * self.code_count() + g as usize]
    }

    fn local(&self, block: usize, g: u32) -> Option<usize> {
        self.index.blocks[block].alphabet.binary_search(&g).ok()
    }

    /// Occurrences of `g` in the superblock of `block` before `block`.
    fn relative_before(&self, block: usize, g: u32) -> u64 {
        let sb = block / BLOCKS_PER_SUPERBLOCK;
        let end = ((sb + 1) * BLOCKS_PER_SUPERBLOCK).min(self.block_count());
        for b in block..end {
            if let Some(l) = self.local(b, g) {
                return self.index.blocks[b].rel_before[l] as u64;
            }
        }
        self.superblock_value(sb + 1, g) - self.superblock_value(sb, g)
    }

    fn expected_counts(&self, block: usize) -> Vec<u64> {
        let entry = &self.index.blocks[block];
        entry
            .alphabet
            .iter()
            .zip(&entry.rel_before)
            .map(|(&g, &before)| {
                let after = if (block + 1).is_multiple_of(BLOCKS_PER_SUPERBLOCK) {
                    let sb = block / BLOCKS_PER_SUPERBLOCK;
                    self.superblock_value(sb + 1, g) - self.superblock_value(sb, g)
                } else {
                    self.relative_before(block + 1, g)
                };
                after.saturating_sub(before as u64)
            })
            .collect()
    }

    /// Decrypts and decodes a block without touching the cache.
    pub fn decode_block_uncached(&self, block: usize) -> Result<DecodedBlock, BlockStoreError> {
        let entry =
            self.index.blocks.get(block).ok_or_else(|| {
                BlockStoreError::OutOfBounds(format!("block {block} does not exist"))
            })?;
        self.decrypted.fetch_add(1, Ordering::Relaxed);
        let rows = self.index.header.block_len(block);
        let fail = |_| BlockStoreError::DecryptionFailed;
        let mut stored =
            unpack_bits(&entry.payload, entry.stored_len as usize, entry.width()).map_err(fail)?;
        decrypt_symbols(
            &mut stored,
            self.key.encrypt_half(),
            block as u64,
            entry.modulus(),
        )
        .map_err(fail)?;
        let ranks = rle0_inverse(&stored, rows).map_err(fail)?;
        if ranks.len() != rows {
            return Err(BlockStoreError::DecryptionFailed);
        }
        let a = entry.alphabet.len();
        let symbols = mtf_inverse(&ranks, a as u32).map_err(fail)?;
        let mut offsets = vec![Vec::new(); a];
        for (o, &s) in symbols.iter().enumerate() {
            offsets[s as usize].push(o as u32);
        }
        let expected = self.expected_counts(block);
        if offsets
            .iter()
            .zip(&expected)
            .any(|(o, &e)| o.len() as u64 != e)
        {
            return Err(BlockStoreError::DecryptionFailed);
        }
        Ok(DecodedBlock {
            alphabet: entry.alphabet.clone(),
            symbols,
            offsets,
        })
    }

    pub fn block(&self, block: usize) -> Result<Arc<DecodedBlock>, BlockStoreError> {
        self.touched.lock().unwrap().insert(block as u32);
        if let Some(b) = self.cache.lock().unwrap().blocks.get(&(block as u32)) {
            return Ok(Arc::clone(b));
        }
        let decoded = Arc::new(self.decode_block_uncached(block)?);
        let mut cache = self.cache.lock().unwrap();
        if cache.capacity > 0 && !cache.blocks.contains_key(&(block as u32)) {
            if cache.order.len() >= cache.capacity {
                let old = cache.order.pop_front().unwrap();
                cache.blocks.remove(&old);
            }
            cache.order.push_back(block as u32);
            cache.blocks.insert(block as u32, Arc::clone(&decoded));
        }
        Ok(decoded)
    }

    /// Occurrences of code-table entry `g` in the last column rows `[0, pos)`.
    pub fn occ(&self, g: u32, pos: u64) -> Result<u64, BlockStoreError> {
        let n = self.len();
        if pos > n {
            return Err(BlockStoreError::OutOfBounds(format!(
                "row {pos} beyond {n} rows"
            )));
        }
        if pos == n {
            return Ok(self.total(g));
        }
        let bs = self.index.header.block_size as u64;
        let block = (pos / bs) as usize;
        let offset = (pos % bs) as usize;
        let sb = block / BLOCKS_PER_SUPERBLOCK;
        let base = self.superblock_value(sb, g);
        match self.local(block, g) {
            Some(l) => {
                let mut count = base + self.index.blocks[block].rel_before[l] as u64;
                if offset > 0 {
                    count += self.block(block)?.count_before(l, offset);
                }
                Ok(count)
            }
            None => Ok(base + self.relative_before(block, g)),
        }
    }

    /// Occurrences of a raw code; codes absent from the text count 0.
    pub fn occ_code(&self, code: u32, pos: u64) -> Result<u64, BlockStoreError> {
        match self.code_index(code) {
            Some(g) => self.occ(g, pos),
            None if pos <= self.len() => Ok(0),
            None => Err(BlockStoreError::OutOfBounds(format!(
                "row {pos} beyond {} rows",
                self.len()
            ))),
        }
    }

    fn check_row(&self, row: u64) -> Result<(), BlockStoreError> {
        if row >= self.len() {
            return Err(BlockStoreError::OutOfBounds(format!(
                "row {row} beyond {} rows",
                self.len()
            )));
        }
        Ok(())
    }

    /// Last-column entry of `row` as a code-table index.
    pub fn last_symbol(&self, row: u64) -> Result<u32, BlockStoreError> {
        self.check_row(row)?;
        let bs = self.index.header.block_size as u64;
        Ok(self
            .block((row / bs) as usize)?
            .symbol_at((row % bs) as usize))
    }

    /// Last-column entry of `row` and the row of the rotation one position
    /// earlier in the text.
    pub fn lf(&self, row: u64) -> Result<(u32, u64), BlockStoreError> {
        self.check_row(row)?;
        let bs = self.index.header.block_size as u64;
        let block = (row / bs) as usize;
        let offset = (row % bs) as usize;
        let decoded = self.block(block)?;
        let l = decoded.symbols[offset] as usize;
        let g = decoded.alphabet[l];
        let occ = self.superblock_value(block / BLOCKS_PER_SUPERBLOCK, g)
            + self.index.blocks[block].rel_before[l] as u64
            + decoded.count_before(l, offset);
        Ok((g, self.first_row(g) + occ))
    }

    /// Text position (in super-characters) of the rotation in `row`.
    pub fn locate(&self, mut row: u64) -> Result<u64, BlockStoreError> {
        self.check_row(row)?;
        let m = &self.index.marked;
        let mut steps = 0u64;
        loop {
            if let Ok(i) = m.rows.binary_search(&(row as u32)) {
                return Ok(m.positions[i] as u64 + steps);
            }
            if steps > m.stride as u64 {
                return Err(BlockStoreError::DecryptionFailed);
            }
            row = self.lf(row)?.1;
            steps += 1;
        }
    }

    /// Codes of text positions `[from, to)`.
    pub fn extract_codes(&self, from: u64, to: u64) -> Result<Vec<u32>, BlockStoreError> {
        let n = self.len();
        if from > to || to > n {
            return Err(BlockStoreError::OutOfBounds(format!(
                "text range {from}..{to} beyond {n}"
            )));
        }
        let stride = self.index.marked.stride as u64;
        let next_sample = to.div_ceil(stride) * stride;
        let (mut row, mut cur) = if next_sample >= n {
            (self.index.header.primary_row, n)
        } else {
            (
                self.sample_rows[(next_sample / stride) as usize] as u64,
                next_sample,
            )
        };
        let mut out = vec![0u32; (to - from) as usize];
        while cur > from {
            let (g, prev) = self.lf(row)?;
            cur -= 1;
            if cur < to {
                out[(cur - from) as usize] = self.code(g);
            }
            row = prev;
        }
        Ok(out)
    }

    /// Decodes every block and concatenates the last column (as codes).
    pub fn decode_last_column(&self) -> Result<Vec<u32>, BlockStoreError> {
        let mut out = Vec::with_capacity(self.len() as usize);
        for b in 0..self.block_count() {
            let d = self.decode_block_uncached(b)?;
            out.extend((0..d.len()).map(|o| self.code(d.symbol_at(o))));
        }
        Ok(out)
    }
}
