//! Count, locate and extract over an encrypted index.
//!
//! A pattern is searched as `k` super-patterns, one per alignment. The
//! fully determined middle is matched by ordinary backward search; partial
//! super-characters at either edge are matched against every occurring code
//! compatible with their template.

pub mod naive;
pub mod pattern;

use std::path::Path;

use thiserror::Error;

use crate::alphabet::{AlphabetError, BaseAlphabet, ScrambledAlphabet, SEPARATOR, TERMINATOR};
use crate::block_store::{BlockStoreError, IndexReader};
use crate::crypto::IndexKey;
pub use pattern::{expand_wildcards, super_patterns, Edge, Mask, SuperPattern};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("pattern of {len} bases is shorter than the extension order k={k}")]
    PatternTooShort { len: usize, k: usize },
    #[error(transparent)]
    Store(#[from] BlockStoreError),
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error("{0}")]
    OutOfBounds(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatchPosition {
    pub item: usize,
    /// 0-based base offset within the item.
    pub offset: u64,
}

/// How a partial last super-character is verified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailCheck {
    /// Start backward search from the rows of every occurring code that
    /// fits the tail template. Needs no locate for counting.
    #[default]
    CompatibleRanges,
    /// Match the rest first, then locate each candidate row and extract the
    /// super-character after it.
    LocateExtract,
}

/// Half-open row interval.
pub type Rows = (u64, u64);

enum PhaseHits {
    Rows(Vec<Rows>),
    /// Text positions (in super-characters) of verified starts.
    Positions(Vec<u64>),
}

pub struct Searcher {
    reader: IndexReader,
    alpha: ScrambledAlphabet,
    /// k-mer of each code-table entry, concatenated.
    kmers: Vec<u8>,
    k: usize,
    tail_check: TailCheck,
    threads: usize,
}

impl std::fmt::Debug for Searcher {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Searcher")
            .field("k", &self.k)
            .field("reader", &self.reader)
            .finish_non_exhaustive()
    }
}

impl Searcher {
    pub fn new(reader: IndexReader, key: &IndexKey) -> Result<Self, SearchError> {
        let h = reader.header();
        let base = BaseAlphabet::from_symbols(h.base_symbols[2..].iter().copied())?;
        let alpha = ScrambledAlphabet::new(base, h.k, key)?;
        let k = h.k as usize;
        let mut kmers = vec![0u8; h.codes.len() * k];
        for (g, &code) in h.codes.iter().enumerate() {
            alpha
                .decode_into(code, &mut kmers[g * k..(g + 1) * k])
                .map_err(|_| BlockStoreError::DecryptionFailed)?;
        }
        Ok(Searcher {
            reader,
            alpha,
            kmers,
            k,
            tail_check: TailCheck::default(),
            threads: 1,
        })
    }

    pub fn open(path: &Path, key: &IndexKey) -> Result<Self, SearchError> {
        Self::new(IndexReader::open(path, key)?, key)
    }

    pub fn with_tail_check(mut self, tail_check: TailCheck) -> Self {
        self.tail_check = tail_check;
        self
    }

    /// Searches the `k` super-patterns on up to `threads` threads.
    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads.max(1);
        self
    }

    pub fn reader(&self) -> &IndexReader {
        &self.reader
    }

    pub fn alphabet(&self) -> &ScrambledAlphabet {
        &self.alpha
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn item_count(&self) -> usize {
        self.reader.header().items.len()
    }

    pub fn item_len(&self, item: usize) -> Option<u64> {
        self.reader.header().items.get(item).map(|s| s.original_len)
    }

    pub fn description(&self, item: usize) -> Option<Vec<u8>> {
        self.reader.description(item)
    }

    fn kmer(&self, g: u32) -> &[u8] {
        &self.kmers[g as usize * self.k..(g as usize + 1) * self.k]
    }

    /// Code-table entries whose k-mer fits `mask`.
    pub fn compatible_codes(&self, mask: &Mask, edge: Edge) -> Vec<u32> {
        (0..self.reader.code_count() as u32)
            .filter(|&g| mask.matches(self.kmer(g), edge))
            .collect()
    }

    fn all_rows(&self, g: u32) -> Rows {
        (self.reader.first_row(g), self.reader.first_row(g + 1))
    }

    /// Rows prefixed by code-table entry `g` followed by a row in `rows`.
    fn step(&self, g: u32, rows: Rows) -> Result<Rows, SearchError> {
        let c = self.reader.first_row(g);
        Ok((
            c + self.reader.occ(g, rows.0)?,
            c + self.reader.occ(g, rows.1)?,
        ))
    }

    /// Code-table entries of a sequence of k-mers; `None` if any k-mer does
    /// not occur in the text.
    fn core_entries(&self, core: &[Vec<u8>]) -> Option<Vec<u32>> {
        core.iter()
            .map(|kmer| {
                let code = self.alpha.encode_kmer(kmer).ok()?;
                self.reader.code_index(code)
            })
            .collect()
    }

    /// Rows whose rotation starts with the given codes; `None` if empty.
    pub fn backward_search(&self, core: &[u32]) -> Result<Option<Rows>, SearchError> {
        let entries: Option<Vec<u32>> = core.iter().map(|&c| self.reader.code_index(c)).collect();
        let Some(entries) = entries else {
            return Ok(None);
        };
        let Some((&last, rest)) = entries.split_last() else {
            return Ok(Some((0, self.reader.len())));
        };
        let ranges = self.extend_back(vec![self.all_rows(last)], rest)?;
        Ok(ranges.first().copied())
    }

    fn extend_back(
        &self,
        mut ranges: Vec<Rows>,
        entries: &[u32],
    ) -> Result<Vec<Rows>, SearchError> {
        for &g in entries.iter().rev() {
            let mut next = Vec::with_capacity(ranges.len());
            for r in ranges {
                let s = self.step(g, r)?;
                if s.0 < s.1 {
                    next.push(s);
                }
            }
            ranges = next;
            if ranges.is_empty() {
                break;
            }
        }
        Ok(ranges)
    }

    /// One more backward step from each range, keeping only predecessors
    /// whose k-mer fits the head template.
    pub fn refine_by_head_mask(
        &self,
        ranges: &[Rows],
        mask: &Mask,
    ) -> Result<Vec<Rows>, SearchError> {
        const SCAN_LIMIT: u64 = 64;
        let mut candidates: Option<Vec<u32>> = None;
        let mut out = Vec::new();
        for &(s, e) in ranges {
            let codes = if e - s <= SCAN_LIMIT {
                let mut seen = Vec::new();
                for row in s..e {
                    let g = self.reader.last_symbol(row)?;
                    if !seen.contains(&g) && mask.matches(self.kmer(g), Edge::Head) {
                        seen.push(g);
                    }
                }
                seen.sort_unstable();
                seen
            } else {
                candidates
                    .get_or_insert_with(|| self.compatible_codes(mask, Edge::Head))
                    .clone()
            };
            for g in codes {
                let r = self.step(g, (s, e))?;
                if r.0 < r.1 {
                    out.push(r);
                }
            }
        }
        Ok(out)
    }

    /// Locates `row` and reports its text position if the super-character
    /// `span - 1` positions later fits `tail`.
    pub fn check_last_char(
        &self,
        row: u64,
        tail: &Mask,
        span: usize,
    ) -> Result<Option<u64>, SearchError> {
        let pos = self.reader.locate(row)?;
        let q = pos + span as u64 - 1;
        if q >= self.reader.len() {
            return Ok(None);
        }
        let code = self.reader.extract_codes(q, q + 1)?[0];
        let kmer = self
            .alpha
            .decode(code)
            .map_err(|_| BlockStoreError::DecryptionFailed)?;
        Ok(tail.matches(&kmer, Edge::Tail).then_some(pos))
    }

    fn search_phase(&self, sp: &SuperPattern) -> Result<PhaseHits, SearchError> {
        let none = || Ok(PhaseHits::Rows(Vec::new()));
        let Some(core) = self.core_entries(&sp.core) else {
            return none();
        };
        let mut ranges = match (&sp.tail, self.tail_check) {
            (Some(tail), TailCheck::CompatibleRanges) => {
                let start = self
                    .compatible_codes(tail, Edge::Tail)
                    .into_iter()
                    .map(|g| self.all_rows(g))
                    .collect();
                self.extend_back(start, &core)?
            }
            _ => match core.split_last() {
                Some((&last, rest)) => self.extend_back(vec![self.all_rows(last)], rest)?,
                None => vec![(0, self.reader.len())],
            },
        };
        if let Some(head) = &sp.head {
            if !ranges.is_empty() {
                ranges = self.refine_by_head_mask(&ranges, head)?;
            }
        }
        match (&sp.tail, self.tail_check) {
            (Some(tail), TailCheck::LocateExtract) => {
                let mut hits = Vec::new();
                for &(s, e) in &ranges {
                    for row in s..e {
                        if let Some(pos) = self.check_last_char(row, tail, sp.len())? {
                            hits.push(pos);
                        }
                    }
                }
                Ok(PhaseHits::Positions(hits))
            }
            _ => Ok(PhaseHits::Rows(ranges)),
        }
    }

    /// `None` if the pattern cannot occur (symbols outside the alphabet).
    fn prepare(&self, pattern: &[u8]) -> Result<Option<Vec<SuperPattern>>, SearchError> {
        if pattern.len() < self.k {
            return Err(SearchError::PatternTooShort {
                len: pattern.len(),
                k: self.k,
            });
        }
        let upper = pattern.to_ascii_uppercase();
        let base = self.alpha.base();
        if upper
            .iter()
            .any(|&b| b == TERMINATOR || b == SEPARATOR || base.rank(b).is_none())
        {
            return Ok(None);
        }
        Ok(Some(super_patterns(&upper, self.k)))
    }

    fn search_all(&self, sps: &[SuperPattern]) -> Result<Vec<PhaseHits>, SearchError> {
        if self.threads <= 1 || sps.len() <= 1 {
            return sps.iter().map(|sp| self.search_phase(sp)).collect();
        }
        let chunk = sps.len().div_ceil(self.threads);
        std::thread::scope(|s| {
            let handles: Vec<_> = sps
                .chunks(chunk)
                .map(|part| {
                    s.spawn(move || {
                        part.iter()
                            .map(|sp| self.search_phase(sp))
                            .collect::<Vec<_>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap())
                .collect()
        })
    }

    pub fn count(&self, pattern: &[u8]) -> Result<u64, SearchError> {
        let Some(sps) = self.prepare(pattern)? else {
            return Ok(0);
        };
        Ok(self
            .search_all(&sps)?
            .iter()
            .map(|h| match h {
                PhaseHits::Rows(r) => r.iter().map(|(s, e)| e - s).sum(),
                PhaseHits::Positions(p) => p.len() as u64,
            })
            .sum())
    }

    pub fn locate(&self, pattern: &[u8]) -> Result<Vec<MatchPosition>, SearchError> {
        let Some(sps) = self.prepare(pattern)? else {
            return Ok(Vec::new());
        };
        let mut out = Vec::new();
        for (sp, hits) in sps.iter().zip(self.search_all(&sps)?) {
            let positions = match hits {
                PhaseHits::Positions(p) => p,
                PhaseHits::Rows(ranges) => {
                    let mut p = Vec::new();
                    for (s, e) in ranges {
                        for row in s..e {
                            p.push(self.reader.locate(row)?);
                        }
                    }
                    p
                }
            };
            for pos in positions {
                let base = pos * self.k as u64 + sp.displacement as u64;
                out.push(self.to_match(base, pattern.len())?);
            }
        }
        out.sort_unstable();
        let before = out.len();
        out.dedup();
        // distinct rows always map to distinct positions unless the index is damaged
        if out.len() != before {
            return Err(BlockStoreError::DecryptionFailed.into());
        }
        Ok(out)
    }

    /// Maps a base position in the extended text to item coordinates.
    fn to_match(&self, base: u64, len: usize) -> Result<MatchPosition, SearchError> {
        let k = self.k as u64;
        let items = &self.reader.header().items;
        let i = items.partition_point(|s| s.start * k <= base);
        let span = i.checked_sub(1).map(|i| (i, items[i]));
        match span {
            Some((item, s)) if base - s.start * k + len as u64 <= s.original_len => {
                Ok(MatchPosition {
                    item,
                    offset: base - s.start * k,
                })
            }
            _ => Err(BlockStoreError::DecryptionFailed.into()),
        }
    }

    /// Bases `[start, start + len)` of `item`.
    pub fn extract(&self, item: usize, start: u64, len: u64) -> Result<Vec<u8>, SearchError> {
        let span = *self
            .reader
            .header()
            .items
            .get(item)
            .ok_or_else(|| SearchError::OutOfBounds(format!("item {item} does not exist")))?;
        let end = start
            .checked_add(len)
            .filter(|&e| e <= span.original_len)
            .ok_or_else(|| {
                SearchError::OutOfBounds(format!(
                    "range {start}+{len} exceeds item {item} of {} bases",
                    span.original_len
                ))
            })?;
        if len == 0 {
            return Ok(Vec::new());
        }
        let k = self.k as u64;
        let from = span.start + start / k;
        let to = span.start + end.div_ceil(k);
        let codes = self.reader.extract_codes(from, to)?;
        let mut bases = Vec::with_capacity(codes.len() * self.k);
        for code in codes {
            let kmer = self
                .alpha
                .decode(code)
                .map_err(|_| BlockStoreError::DecryptionFailed)?;
            bases.extend_from_slice(&kmer);
        }
        let skip = (start % k) as usize;
        let out = bases[skip..skip + len as usize].to_vec();
        if out.iter().any(|&b| b == TERMINATOR || b == SEPARATOR) {
            return Err(BlockStoreError::DecryptionFailed.into());
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests;
