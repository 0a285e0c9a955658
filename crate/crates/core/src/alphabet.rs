//! Base alphabet detection, the keyed scrambling of the k-extended alphabet,
//! and encoding of a collection as one string of scrambled super-characters.
//!
//! A super-character is a k-mer over the base alphabet. Its unscrambled rank
//! is its position in lexicographic order over the canonical symbol order
//! (`$` < `&` < ascending bytes). The scrambling key `sk` is a permutation of
//! `[0, eac)`: the super-character stored as code `c` is the k-mer of
//! unscrambled rank `sk[c]`. `sk[0] = 0` always, so `$^k` keeps code 0.

use std::collections::HashMap;

use num_bigint::BigUint;
use thiserror::Error;

use crate::crypto::{CipherStream, IndexKey, SCRAMBLE_NONCE};
use crate::fasta::{SequenceCollection, SequenceRecord};

pub const TERMINATOR: u8 = b'$';
pub const SEPARATOR: u8 = b'&';
pub const MAX_K: u32 = 8;
/// Largest extended-alphabet cardinality; codes must fit in a `u32`.
pub const MAX_EAC: u64 = u32::MAX as u64;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("collection is empty")]
    EmptyCollection,
    #[error("collection item {item} contains reserved symbol '{symbol}'")]
    ReservedSymbol { item: usize, symbol: char },
    #[error("extension order k={0} outside [1, {MAX_K}]")]
    InvalidK(u32),
    #[error("extended alphabet of {sigma}^{k} symbols exceeds the 32-bit code space")]
    CodeSpaceOverflow { sigma: usize, k: u32 },
    #[error("symbol '{0}' is not in the alphabet")]
    UnknownSymbol(char),
    #[error("super-character code {code} outside [0, {eac})")]
    CodeOutOfRange { code: u64, eac: u64 },
    #[error("extended text of {0} super-characters exceeds the 32-bit position space")]
    TextTooLong(u64),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseAlphabet {
    symbols: Vec<u8>,
    ranks: [u8; 256],
}

const NO_RANK: u8 = u8::MAX;

impl BaseAlphabet {
    /// Builds the alphabet from an explicit symbol set; `$` and `&` are added.
    pub fn from_symbols(observed: impl IntoIterator<Item = u8>) -> Result<Self, AlphabetError> {
        let mut present = [false; 256];
        for s in observed {
            if s == TERMINATOR || s == SEPARATOR {
                return Err(AlphabetError::ReservedSymbol {
                    item: 0,
                    symbol: s as char,
                });
            }
            present[s as usize] = true;
        }
        let mut symbols = vec![TERMINATOR, SEPARATOR];
        symbols.extend((0..=255u8).filter(|&b| present[b as usize]));
        let mut ranks = [NO_RANK; 256];
        for (r, &s) in symbols.iter().enumerate() {
            ranks[s as usize] = r as u8;
        }
        Ok(BaseAlphabet { symbols, ranks })
    }

    pub fn from_collection(collection: &SequenceCollection) -> Result<Self, AlphabetError> {
        Self::from_records(&collection.records)
    }

    pub fn from_records<'a>(
        records: impl IntoIterator<Item = &'a SequenceRecord>,
    ) -> Result<Self, AlphabetError> {
        let mut present = [false; 256];
        let mut any = false;
        for (item, r) in records.into_iter().enumerate() {
            any = true;
            for &b in &r.bases {
                if b == TERMINATOR || b == SEPARATOR {
                    return Err(AlphabetError::ReservedSymbol {
                        item,
                        symbol: b as char,
                    });
                }
                present[b as usize] = true;
            }
        }
        if !any {
            return Err(AlphabetError::EmptyCollection);
        }
        Self::from_symbols((0..=255u8).filter(|&b| present[b as usize]))
    }

    pub fn symbols(&self) -> &[u8] {
        &self.symbols
    }

    pub fn size(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn rank(&self, symbol: u8) -> Option<u32> {
        match self.ranks[symbol as usize] {
            NO_RANK => None,
            r => Some(r as u32),
        }
    }

    #[inline]
    pub fn symbol(&self, rank: u32) -> u8 {
        self.symbols[rank as usize]
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct ScrambledAlphabet {
    base: BaseAlphabet,
    k: u32,
    eac: u64,
    sk: Vec<u32>,
    sk_inverse: Vec<u32>,
}

impl std::fmt::Debug for ScrambledAlphabet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScrambledAlphabet")
            .field("symbols", &String::from_utf8_lossy(self.base.symbols()))
            .field("k", &self.k)
            .field("eac", &self.eac)
            .finish_non_exhaustive()
    }
}

/// `sigma^k`, or an error when it leaves the code space.
pub fn extended_cardinality(sigma: usize, k: u32) -> Result<u64, AlphabetError> {
    if !(1..=MAX_K).contains(&k) {
        return Err(AlphabetError::InvalidK(k));
    }
    (sigma as u64)
        .checked_pow(k)
        .filter(|&e| e <= MAX_EAC)
        .ok_or(AlphabetError::CodeSpaceOverflow { sigma, k })
}

/// Keyed Fisher–Yates permutation of `[0, eac)` that never moves index 0.
///
/// Positions are visited from `eac - 1` down to 1; each swap partner is drawn
/// with `next_int(i)`, redrawing on 0.
pub fn scrambling_permutation(eac: u32, key32: &[u8; 32]) -> Vec<u32> {
    let mut sk: Vec<u32> = (0..eac).collect();
    let mut rnd = CipherStream::new(key32, SCRAMBLE_NONCE);
    for i in (2..=eac).rev() {
        let swap_with = loop {
            let t = rnd.next_int(i).expect("bound is at least 2");
            if t != 0 {
                break t;
            }
        };
        sk.swap((i - 1) as usize, swap_with as usize);
    }
    sk
}

impl ScrambledAlphabet {
    pub fn new(base: BaseAlphabet, k: u32, key: &IndexKey) -> Result<Self, AlphabetError> {
        let eac = extended_cardinality(base.size(), k)?;
        let sk = scrambling_permutation(eac as u32, key.scramble_half());
        Ok(Self::from_permutation(base, k, sk))
    }

    /// Alphabet with the identity permutation; no key involved.
    pub fn unscrambled(base: BaseAlphabet, k: u32) -> Result<Self, AlphabetError> {
        let eac = extended_cardinality(base.size(), k)?;
        Ok(Self::from_permutation(base, k, (0..eac as u32).collect()))
    }

    fn from_permutation(base: BaseAlphabet, k: u32, sk: Vec<u32>) -> Self {
        let mut sk_inverse = vec![0u32; sk.len()];
        for (code, &rank) in sk.iter().enumerate() {
            sk_inverse[rank as usize] = code as u32;
        }
        ScrambledAlphabet {
            eac: sk.len() as u64,
            base,
            k,
            sk,
            sk_inverse,
        }
    }

    pub fn base(&self) -> &BaseAlphabet {
        &self.base
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn eac(&self) -> u64 {
        self.eac
    }

    pub fn permutation(&self) -> &[u32] {
        &self.sk
    }

    /// Unscrambled lexicographic rank of a k-mer.
    pub fn kmer_rank(&self, kmer: &[u8]) -> Result<u32, AlphabetError> {
        debug_assert_eq!(kmer.len(), self.k as usize);
        let sigma = self.base.size() as u64;
        let mut r = 0u64;
        for &s in kmer {
            let sr = self
                .base
                .rank(s)
                .ok_or(AlphabetError::UnknownSymbol(s as char))?;
            r = r * sigma + sr as u64;
        }
        Ok(r as u32)
    }

    /// Scrambled code of a k-mer.
    pub fn encode_kmer(&self, kmer: &[u8]) -> Result<u32, AlphabetError> {
        Ok(self.sk_inverse[self.kmer_rank(kmer)? as usize])
    }

    /// Writes the k symbols of `code` into `out`.
    pub fn decode_into(&self, code: u32, out: &mut [u8]) -> Result<(), AlphabetError> {
        if code as u64 >= self.eac {
            return Err(AlphabetError::CodeOutOfRange {
                code: code as u64,
                eac: self.eac,
            });
        }
        let sigma = self.base.size() as u32;
        let mut r = self.sk[code as usize];
        for slot in out[..self.k as usize].iter_mut().rev() {
            *slot = self.base.symbol(r % sigma);
            r /= sigma;
        }
        Ok(())
    }

    pub fn decode(&self, code: u32) -> Result<Vec<u8>, AlphabetError> {
        let mut out = vec![0u8; self.k as usize];
        self.decode_into(code, &mut out)?;
        Ok(out)
    }

    pub fn terminator_code(&self) -> u32 {
        0
    }

    pub fn separator_code(&self) -> u32 {
        let kmer = vec![SEPARATOR; self.k as usize];
        self.encode_kmer(&kmer)
            .expect("separator is always in the alphabet")
    }
}

/// Placement of one collection item inside the extended text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ItemSpan {
    /// Offset of the item's first super-character.
    pub start: u64,
    /// `ceil(original_len / k)`.
    pub padded_len: u64,
    /// Number of bases.
    pub original_len: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedText {
    pub super_chars: Vec<u32>,
    pub items: Vec<ItemSpan>,
}

impl ExtendedText {
    pub fn len(&self) -> usize {
        self.super_chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.super_chars.is_empty()
    }
}

/// Item spans for the given base lengths; the separator after each item
/// occupies one super-character.
pub fn item_spans(lengths: impl IntoIterator<Item = u64>, k: u32) -> Vec<ItemSpan> {
    let mut start = 0u64;
    lengths
        .into_iter()
        .map(|len| {
            let padded_len = len.div_ceil(k as u64);
            let span = ItemSpan {
                start,
                padded_len,
                original_len: len,
            };
            start += padded_len + 1;
            span
        })
        .collect()
}

pub fn encode_collection(
    collection: &SequenceCollection,
    alpha: &ScrambledAlphabet,
) -> Result<ExtendedText, AlphabetError> {
    let k = alpha.k() as usize;
    let items = item_spans(collection.records.iter().map(|r| r.len() as u64), alpha.k());
    let total = items.last().map_or(0, |s| s.start + s.padded_len + 1) + 1;
    if total > u32::MAX as u64 {
        return Err(AlphabetError::TextTooLong(total));
    }
    let separator = alpha.separator_code();
    let mut super_chars = Vec::with_capacity(total as usize);
    let mut kmer = vec![SEPARATOR; k];
    for r in &collection.records {
        for chunk in r.bases.chunks(k) {
            kmer[..chunk.len()].copy_from_slice(chunk);
            kmer[chunk.len()..].fill(SEPARATOR);
            super_chars.push(alpha.encode_kmer(&kmer)?);
        }
        super_chars.push(separator);
    }
    super_chars.push(alpha.terminator_code());
    debug_assert_eq!(super_chars.len() as u64, total);
    Ok(ExtendedText { super_chars, items })
}

/// Number of symbol orderings consistent with the non-increasing frequency
/// array of `text`: the product of `m_f!` over each frequency value `f`
/// shared by `m_f` distinct symbols.
pub fn degree_of_homophony(text: &[u32]) -> BigUint {
    let mut freq: HashMap<u32, u64> = HashMap::new();
    for &c in text {
        *freq.entry(c).or_default() += 1;
    }
    let mut ties: HashMap<u64, u64> = HashMap::new();
    for f in freq.into_values() {
        *ties.entry(f).or_default() += 1;
    }
    let mut out = BigUint::from(1u32);
    for m in ties.into_values() {
        for i in 2..=m {
            out *= i;
        }
    }
    out
}
