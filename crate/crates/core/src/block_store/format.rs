//! Index file layout. All fixed-width integers are little-endian; counts and
//! table entries are LEB128 varints.
//!
//! ```text
//! magic[8] version:u16 k:u8 sample_rate:u8 block_size:u32
//! sigma:u8 symbols[sigma] text_len:u64 primary_row:u64 items:u64
//! items x (original_len, padded_len)      varints
//! codes, code table (delta coded)         varints
//! superblocks, (superblocks+1) x codes    varints
//! blocks x (a, alphabet deltas[a], rel_before[a], stored_len)
//! payload_len:u64 payload bytes
//! stride, marked count, row deltas        varints
//! position width:u8, packed position / stride values
//! descriptions x (len, bytes)
//! ```

use super::codec::{bit_width, pack_bits, packed_len, unpack_bits};
use super::{
    BlockEntry, BlockStoreError, EncryptedIndex, IndexHeader, MarkedRows, BLOCKS_PER_SUPERBLOCK,
};
use crate::alphabet::{item_spans, BaseAlphabet, SEPARATOR, TERMINATOR};

pub const MAGIC: [u8; 8] = *b"ENCFMIX\0";
pub const FORMAT_VERSION: u16 = 1;

fn put_varint(out: &mut Vec<u8>, v: u64) {
    leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
}

pub fn serialize_index(index: &EncryptedIndex) -> Vec<u8> {
    let h = &index.header;
    let mut out = Vec::with_capacity(index.payload_bytes() + 1024);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(h.k as u8);
    out.push(h.sample_rate as u8);
    out.extend_from_slice(&h.block_size.to_le_bytes());
    out.push(h.base_symbols.len() as u8);
    out.extend_from_slice(&h.base_symbols);
    out.extend_from_slice(&h.text_len.to_le_bytes());
    out.extend_from_slice(&h.primary_row.to_le_bytes());
    out.extend_from_slice(&(h.items.len() as u64).to_le_bytes());
    for span in &h.items {
        put_varint(&mut out, span.original_len);
        put_varint(&mut out, span.padded_len);
    }
    put_varint(&mut out, h.codes.len() as u64);
    let mut prev = 0u32;
    for &c in &h.codes {
        put_varint(&mut out, (c - prev) as u64);
        prev = c;
    }

    put_varint(&mut out, h.superblock_count() as u64);
    for &v in &index.superblock_occ {
        put_varint(&mut out, v);
    }

    put_varint(&mut out, index.blocks.len() as u64);
    for b in &index.blocks {
        put_varint(&mut out, b.alphabet.len() as u64);
        let mut prev = 0u32;
        for &g in &b.alphabet {
            put_varint(&mut out, (g - prev) as u64);
            prev = g;
        }
        for &r in &b.rel_before {
            put_varint(&mut out, r as u64);
        }
        put_varint(&mut out, b.stored_len as u64);
    }
    out.extend_from_slice(&(index.payload_bytes() as u64).to_le_bytes());
    for b in &index.blocks {
        out.extend_from_slice(&b.payload);
    }

    let m = &index.marked;
    put_varint(&mut out, m.stride as u64);
    put_varint(&mut out, m.rows.len() as u64);
    let mut prev = 0u32;
    for &r in &m.rows {
        put_varint(&mut out, (r - prev) as u64);
        prev = r;
    }
    let steps: Vec<u32> = m.positions.iter().map(|p| p / m.stride).collect();
    let width = bit_width(steps.iter().max().map_or(1, |&s| s as u64 + 1));
    out.push(width as u8);
    out.extend_from_slice(&pack_bits(&steps, width).expect("width fits every value"));

    put_varint(&mut out, index.descriptions.len() as u64);
    for d in &index.descriptions {
        put_varint(&mut out, d.len() as u64);
        out.extend_from_slice(d);
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn error(&self, reason: impl Into<String>) -> BlockStoreError {
        BlockStoreError::Format {
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], BlockStoreError> {
        if self.data.len() - self.pos < n {
            return Err(self.error(format!("truncated {what}")));
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, BlockStoreError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, BlockStoreError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, BlockStoreError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, BlockStoreError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn varint(&mut self, what: &str) -> Result<u64, BlockStoreError> {
        let mut rest = &self.data[self.pos..];
        let before = rest.len();
        match leb128::read::unsigned(&mut rest) {
            Ok(v) => {
                self.pos += before - rest.len();
                Ok(v)
            }
            Err(leb128::read::Error::IoError(_)) => Err(self.error(format!("truncated {what}"))),
            Err(leb128::read::Error::Overflow) => Err(self.error(format!("oversized {what}"))),
        }
    }

    fn varint_u32(&mut self, what: &str) -> Result<u32, BlockStoreError> {
        let at = self.pos;
        let v = self.varint(what)?;
        u32::try_from(v).map_err(|_| BlockStoreError::Format {
            offset: at as u64,
            reason: format!("{what} {v} exceeds 32 bits"),
        })
    }

    /// Length prefix for a sequence whose elements take at least
    /// `min_bytes` each, bounded by the bytes left.
    fn count(&mut self, what: &str, min_bytes: usize) -> Result<usize, BlockStoreError> {
        let at = self.pos;
        let v = self.varint(what)?;
        let left = (self.data.len() - self.pos) as u64;
        if v.saturating_mul(min_bytes as u64) > left {
            return Err(BlockStoreError::Format {
                offset: at as u64,
                reason: format!("{what} {v} exceeds the remaining {left} bytes"),
            });
        }
        Ok(v as usize)
    }
}

pub fn deserialize_index(data: &[u8]) -> Result<EncryptedIndex, BlockStoreError> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(MAGIC.len(), "magic")? != MAGIC {
        c.pos = 0;
        return Err(c.error("bad magic"));
    }
    let version = c.u16("version")?;
    if version != FORMAT_VERSION {
        return Err(BlockStoreError::UnsupportedVersion(version));
    }
    let k = c.u8("k")? as u32;
    let sample_rate = c.u8("sample rate")? as u32;
    let block_size = c.u32("block size")?;
    let params = super::StoreParams {
        block_size,
        sample_rate,
        threads: 1,
    };
    params.validate().map_err(|e| c.error(e.to_string()))?;
    let sigma = c.u8("alphabet size")? as usize;
    let base_symbols = c.take(sigma, "alphabet")?.to_vec();
    if !base_symbols.starts_with(&[TERMINATOR, SEPARATOR]) {
        return Err(c.error("alphabet lacks the terminator and separator"));
    }
    let base = BaseAlphabet::from_symbols(base_symbols[2..].iter().copied())
        .map_err(|e| c.error(e.to_string()))?;
    if base.symbols() != base_symbols.as_slice() {
        return Err(c.error("alphabet is not in canonical order"));
    }
    if !(1..=crate::alphabet::MAX_K).contains(&k) {
        return Err(c.error(format!("extension order {k} out of range")));
    }
    let text_len = c.u64("text length")?;
    if text_len == 0 || text_len > u32::MAX as u64 {
        return Err(c.error(format!("text length {text_len} out of range")));
    }
    let primary_row = c.u64("primary row")?;
    if primary_row >= text_len {
        return Err(c.error("primary row beyond the text"));
    }
    let nitems = c.u64("item count")?;
    if nitems.saturating_mul(2) > (data.len() - c.pos) as u64 {
        return Err(c.error("item count exceeds the file"));
    }
    let mut lengths = Vec::with_capacity(nitems as usize);
    let mut padded = Vec::with_capacity(nitems as usize);
    for _ in 0..nitems {
        lengths.push(c.varint("item length")?);
        padded.push(c.varint("padded item length")?);
    }
    let items = item_spans(lengths.iter().copied(), k);
    if items.iter().zip(&padded).any(|(s, &p)| s.padded_len != p) {
        return Err(c.error("padded item lengths disagree with item lengths"));
    }
    if items.last().map_or(0, |s| s.start + s.padded_len + 1) + 1 != text_len {
        return Err(c.error("item lengths disagree with the text length"));
    }

    let ncodes = c.count("code count", 1)?;
    let mut codes = Vec::with_capacity(ncodes);
    let mut acc = 0u64;
    for i in 0..ncodes {
        let d = c.varint("code")?;
        if i > 0 && d == 0 {
            return Err(c.error("code table is not strictly increasing"));
        }
        acc += d;
        if acc > u32::MAX as u64 {
            return Err(c.error("code exceeds 32 bits"));
        }
        codes.push(acc as u32);
    }
    if ncodes == 0 {
        return Err(c.error("empty code table"));
    }

    let header = IndexHeader {
        k,
        block_size,
        sample_rate,
        base_symbols,
        text_len,
        primary_row,
        items,
        codes,
    };
    let nsb = c.varint("superblock count")? as usize;
    if nsb != header.superblock_count() {
        return Err(c.error("superblock count disagrees with the header"));
    }
    let cells = (nsb + 1)
        .checked_mul(ncodes)
        .filter(|&n| n <= data.len() - c.pos)
        .ok_or_else(|| c.error("superblock table exceeds the file"))?;
    let mut superblock_occ = Vec::with_capacity(cells);
    for _ in 0..cells {
        superblock_occ.push(c.varint("superblock count")?);
    }
    if superblock_occ[..ncodes].iter().any(|&v| v != 0) {
        return Err(c.error("first superblock row is not zero"));
    }
    for sb in 0..nsb {
        let span = (header.block_size as u64) * BLOCKS_PER_SUPERBLOCK as u64;
        let (prev, next) = superblock_occ[sb * ncodes..(sb + 2) * ncodes].split_at(ncodes);
        let mut rows = 0u64;
        for (&p, &n) in prev.iter().zip(next) {
            let d = n
                .checked_sub(p)
                .ok_or_else(|| c.error("superblock counts decrease"))?;
            rows = rows.saturating_add(d);
        }
        if rows > span {
            return Err(c.error(format!("superblock {sb} counts exceed its rows")));
        }
    }
    let total = superblock_occ[nsb * ncodes..]
        .iter()
        .try_fold(0u64, |acc, &v| acc.checked_add(v));
    if total != Some(text_len) {
        return Err(c.error("occurrence totals disagree with the text length"));
    }

    let nblocks = c.varint("block count")? as usize;
    if nblocks != header.block_count() {
        return Err(c.error("block count disagrees with the header"));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for b in 0..nblocks {
        let a = c.count("block alphabet size", 2)?;
        if a == 0 || a > header.block_len(b) {
            return Err(c.error(format!("block {b} alphabet size {a} out of range")));
        }
        let mut alphabet = Vec::with_capacity(a);
        let mut acc = 0u64;
        for i in 0..a {
            let d = c.varint("block alphabet entry")?;
            if i > 0 && d == 0 {
                return Err(c.error("block alphabet is not strictly increasing"));
            }
            acc += d;
            if acc >= ncodes as u64 {
                return Err(c.error("block alphabet entry beyond the code table"));
            }
            alphabet.push(acc as u32);
        }
        let rel_before = (0..a)
            .map(|_| c.varint_u32("relative count"))
            .collect::<Result<Vec<_>, _>>()?;
        if b % BLOCKS_PER_SUPERBLOCK == 0 && rel_before.iter().any(|&r| r != 0) {
            return Err(c.error("nonzero relative count in a superblock's first block"));
        }
        let sb = b / BLOCKS_PER_SUPERBLOCK;
        for (&g, &r) in alphabet.iter().zip(&rel_before) {
            let g = g as usize;
            let in_superblock =
                superblock_occ[(sb + 1) * ncodes + g] - superblock_occ[sb * ncodes + g];
            if r as u64 > in_superblock {
                return Err(c.error(format!("block {b} relative count exceeds its superblock")));
            }
        }
        let stored_len = c.varint_u32("stored length")?;
        if stored_len as usize > header.block_len(b) {
            return Err(c.error(format!("block {b} stored length exceeds its rows")));
        }
        blocks.push(BlockEntry {
            alphabet,
            rel_before,
            stored_len,
            payload: Vec::new(),
        });
    }
    let payload_len = c.u64("payload length")?;
    let expected: u64 = blocks
        .iter()
        .map(|b| packed_len(b.stored_len as usize, b.width()) as u64)
        .sum();
    if payload_len != expected {
        return Err(c.error(format!("payload length {payload_len}, expected {expected}")));
    }
    for b in &mut blocks {
        let len = packed_len(b.stored_len as usize, b.width());
        b.payload = c.take(len, "block payload")?.to_vec();
    }

    let stride = c.varint_u32("sample stride")?;
    if stride != super::sample_stride(sample_rate)? {
        return Err(c.error("sample stride disagrees with the sample rate"));
    }
    let nmarked = c.count("marked row count", 1)?;
    if nmarked as u64 != (text_len - 1) / stride as u64 + 1 {
        return Err(c.error("marked row count disagrees with the text length"));
    }
    let mut rows = Vec::with_capacity(nmarked);
    let mut acc = 0u64;
    for i in 0..nmarked {
        let d = c.varint("marked row")?;
        if i > 0 && d == 0 {
            return Err(c.error("marked rows are not strictly increasing"));
        }
        acc += d;
        if acc >= text_len {
            return Err(c.error("marked row beyond the text"));
        }
        rows.push(acc as u32);
    }
    let width = c.u8("position width")? as u32;
    if !(1..=32).contains(&width) {
        return Err(c.error("position width out of range"));
    }
    let at = c.pos;
    let packed = c.take(packed_len(nmarked, width), "marked positions")?;
    let steps = unpack_bits(packed, nmarked, width).map_err(|e| BlockStoreError::Format {
        offset: at as u64,
        reason: e.to_string(),
    })?;
    let positions: Vec<u32> = steps
        .iter()
        .map(|&s| s as u64 * stride as u64)
        .map(|p| p as u32)
        .collect();
    if positions.iter().any(|&p| p as u64 >= text_len) {
        return Err(BlockStoreError::Format {
            offset: at as u64,
            reason: "marked position beyond the text".into(),
        });
    }

    let ndesc = c.count("description count", 1)?;
    if ndesc as u64 != nitems {
        return Err(c.error("description count disagrees with the item count"));
    }
    let mut descriptions = Vec::with_capacity(ndesc);
    for _ in 0..ndesc {
        let len = c.count("description length", 1)?;
        descriptions.push(c.take(len, "description")?.to_vec());
    }
    if c.pos != data.len() {
        return Err(c.error("trailing bytes after the index"));
    }

    Ok(EncryptedIndex {
        header,
        superblock_occ,
        blocks,
        marked: MarkedRows {
            stride,
            rows,
            positions,
        },
        descriptions,
    })
}
