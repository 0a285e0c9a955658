//! End-to-end index construction and self-verification.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::alphabet::{encode_collection, AlphabetError, BaseAlphabet, ScrambledAlphabet};
use crate::block_store::{build_index, BlockStoreError, EncryptedIndex, IndexReader, StoreParams};
use crate::bwt::{compute_bwt, BwtConfig, BwtError};
use crate::crypto::IndexKey;
use crate::fasta::SequenceCollection;
use crate::search::{naive, SearchError, Searcher};

#[derive(Debug, Error)]
pub enum BuildError {
    #[error(transparent)]
    Alphabet(#[from] AlphabetError),
    #[error(transparent)]
    Bwt(#[from] BwtError),
    #[error(transparent)]
    Store(#[from] BlockStoreError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BuildOptions {
    pub k: u32,
    pub store: StoreParams,
    /// Code-space ranges for the parallel BWT; `None` picks `16 * threads`
    /// clamped to the extended alphabet size.
    pub ranges: Option<usize>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            k: 4,
            store: StoreParams::default(),
            ranges: None,
        }
    }
}

pub fn build_collection_index(
    collection: &SequenceCollection,
    key: &IndexKey,
    options: &BuildOptions,
) -> Result<EncryptedIndex, BuildError> {
    options.store.validate()?;
    let base = BaseAlphabet::from_collection(collection)?;
    let alpha = ScrambledAlphabet::new(base, options.k, key)?;
    let text = encode_collection(collection, &alpha)?;
    let threads = options.store.threads;
    let ranges = options
        .ranges
        .unwrap_or(16 * threads)
        .min(alpha.eac().min(usize::MAX as u64) as usize);
    let config = BwtConfig::new(threads, ranges);
    let bwt = compute_bwt(&text.super_chars, alpha.eac(), &config)?;
    drop(text.super_chars);
    let descriptions: Vec<Vec<u8>> = collection
        .records
        .iter()
        .map(|r| r.description.clone())
        .collect();
    Ok(build_index(
        &bwt,
        &alpha,
        &text.items,
        &descriptions,
        key,
        &options.store,
    )?)
}

/// Outcome of checking an index against its source collection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VerifyOutcome {
    Pass {
        trials: usize,
    },
    /// The index is unreadable with this key, or damaged.
    Undecodable(String),
    RecordMismatch {
        item: usize,
    },
    PatternMismatch {
        seed: u64,
        trial: usize,
        pattern: Vec<u8>,
        expected: u64,
        got: u64,
    },
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        matches!(self, VerifyOutcome::Pass { .. })
    }
}

/// Decodes every block, extracts every record, then compares `trials`
/// random counts and locates with a direct scan. Patterns are substrings
/// of the collection (mostly) or random strings over its symbols.
pub fn verify_index(
    searcher: &Searcher,
    collection: &SequenceCollection,
    trials: usize,
    seed: u64,
) -> Result<VerifyOutcome, SearchError> {
    let reader: &IndexReader = searcher.reader();
    if let Err(e) =
        (0..reader.block_count()).try_for_each(|b| reader.decode_block_uncached(b).map(drop))
    {
        return Ok(VerifyOutcome::Undecodable(e.to_string()));
    }
    if searcher.item_count() != collection.len() {
        return Ok(VerifyOutcome::Undecodable("item count differs".into()));
    }
    for (item, r) in collection.records.iter().enumerate() {
        match searcher.extract(item, 0, r.len() as u64) {
            Ok(bases) if bases == r.bases => {}
            Ok(_) => return Ok(VerifyOutcome::RecordMismatch { item }),
            Err(e) => return Ok(VerifyOutcome::Undecodable(e.to_string())),
        }
        if searcher.description(item).as_deref() != Some(&r.description[..]) {
            return Ok(VerifyOutcome::RecordMismatch { item });
        }
    }
    let k = searcher.k();
    let symbols: Vec<u8> = searcher.alphabet().base().symbols()[2..].to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let len = rng.gen_range(k..=k.max(60));
        let pattern: Vec<u8> = if rng.gen_bool(0.8) {
            let r = &collection.records[rng.gen_range(0..collection.len())];
            if r.len() < len {
                r.bases.clone()
            } else {
                let at = rng.gen_range(0..=r.len() - len);
                r.bases[at..at + len].to_vec()
            }
        } else {
            (0..len)
                .map(|_| symbols[rng.gen_range(0..symbols.len())])
                .collect()
        };
        if pattern.len() < k {
            continue;
        }
        let expected = naive::naive_locate(collection, &pattern);
        let mismatch = |got: u64| VerifyOutcome::PatternMismatch {
            seed,
            trial,
            pattern: pattern.clone(),
            expected: expected.len() as u64,
            got,
        };
        match (searcher.count(&pattern), searcher.locate(&pattern)) {
            (Ok(c), Ok(l)) if c == expected.len() as u64 && l == expected => {}
            (Ok(c), Ok(_)) => return Ok(mismatch(c)),
            (Err(e), _) | (_, Err(e)) => return Ok(VerifyOutcome::Undecodable(e.to_string())),
        }
    }
    Ok(VerifyOutcome::Pass { trials })
}
