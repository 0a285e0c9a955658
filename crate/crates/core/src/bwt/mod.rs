//! Range-partitioned parallel BWT of a scrambled extended text.
//!
//! The code space `[0, eac)` is cut into contiguous right-open ranges, every
//! rotation goes to the range holding its first code, ranges are handed to
//! workers in contiguous groups of balanced size, each range is suffix
//! sorted independently, and the sorted ranges are concatenated. Because the
//! text ends with the unique smallest code 0, rotation order equals suffix
//! order.

mod naive;
pub mod sort;

use std::ops::Range;

use thiserror::Error;

pub use naive::{inverse_bwt, naive_bwt};
pub use sort::{sort_suffixes, SortContext, SortStats};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BwtError {
    #[error("text is empty")]
    EmptyText,
    #[error("text must end with the terminator code 0")]
    MissingTerminator,
    #[error("terminator code 0 occurs more than once (again at position {0})")]
    DuplicateTerminator(usize),
    #[error("code {code} at position {position} is outside [0, {eac})")]
    CodeOutOfRange {
        position: usize,
        code: u32,
        eac: u64,
    },
    #[error("text of {0} symbols exceeds the 32-bit position space")]
    TextTooLong(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub(crate) fn validate_text(text: &[u32], eac: Option<u64>) -> Result<(), BwtError> {
    if text.is_empty() {
        return Err(BwtError::EmptyText);
    }
    if text.len() > u32::MAX as usize {
        return Err(BwtError::TextTooLong(text.len()));
    }
    if *text.last().unwrap() != 0 {
        return Err(BwtError::MissingTerminator);
    }
    if let Some(p) = text[..text.len() - 1].iter().position(|&c| c == 0) {
        return Err(BwtError::DuplicateTerminator(p));
    }
    if let Some(eac) = eac {
        if let Some(p) = text.iter().position(|&c| c as u64 >= eac) {
            return Err(BwtError::CodeOutOfRange {
                position: p,
                code: text[p],
                eac,
            });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BwtResult {
    pub last_column: Vec<u32>,
    /// Text position of the suffix in each row (the suffix array).
    pub suffix_positions: Vec<u32>,
    /// Row of the rotation starting at position 0.
    pub primary_row: u32,
}

impl BwtResult {
    pub fn from_suffix_positions(text: &[u32], suffix_positions: Vec<u32>) -> Self {
        let n = text.len();
        let mut primary_row = 0;
        let last_column = suffix_positions
            .iter()
            .enumerate()
            .map(|(row, &p)| {
                if p == 0 {
                    primary_row = row as u32;
                }
                text[(p as usize + n - 1) % n]
            })
            .collect();
        BwtResult {
            last_column,
            suffix_positions,
            primary_row,
        }
    }

    pub fn len(&self) -> usize {
        self.last_column.len()
    }

    pub fn is_empty(&self) -> bool {
        self.last_column.is_empty()
    }
}

/// Interval `[first, last)` of codes and the rotations starting in it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationRange {
    pub first: u64,
    pub last: u64,
    pub rotations: Vec<u32>,
}

impl RotationRange {
    fn empty(first: u64, last: u64) -> Self {
        RotationRange {
            first,
            last,
            rotations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BwtConfig {
    pub threads: usize,
    pub ranges: usize,
    /// Re-split overloaded ranges at observed code-frequency quantiles.
    pub statistical_splitters: bool,
}

impl BwtConfig {
    pub fn new(threads: usize, ranges: usize) -> Self {
        BwtConfig {
            threads,
            ranges,
            statistical_splitters: true,
        }
    }
}

impl Default for BwtConfig {
    fn default() -> Self {
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        BwtConfig::new(threads, 16 * threads)
    }
}

/// `nr` contiguous ranges of width `ceil(eac / nr)` covering `[0, eac)`.
pub fn equal_width_ranges(eac: u64, nr: usize) -> Vec<RotationRange> {
    let width = eac.div_ceil(nr as u64).max(1);
    (0..eac)
        .step_by(width as usize)
        .map(|first| RotationRange::empty(first, (first + width).min(eac)))
        .collect()
}

fn range_of(ranges: &[RotationRange], code: u32) -> usize {
    ranges.partition_point(|r| r.last <= code as u64)
}

/// Puts each rotation into the range holding its first code. Workers scan
/// contiguous slices of the text; their lists are concatenated in slice order
/// so every range ends up in ascending position order.
pub fn distribute_rotations(text: &[u32], ranges: &mut [RotationRange], threads: usize) {
    let threads = threads.max(1);
    let chunk = text.len().div_ceil(threads).max(1);
    let nr = ranges.len();
    let ranges_ro: &[RotationRange] = ranges;
    let partials: Vec<Vec<Vec<u32>>> = std::thread::scope(|s| {
        let handles: Vec<_> = text
            .chunks(chunk)
            .enumerate()
            .map(|(w, slice)| {
                s.spawn(move || {
                    let mut local = vec![Vec::new(); nr];
                    let base = (w * chunk) as u32;
                    for (i, &c) in slice.iter().enumerate() {
                        local[range_of(ranges_ro, c)].push(base + i as u32);
                    }
                    local
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    for (r, range) in ranges.iter_mut().enumerate() {
        let total: usize = partials.iter().map(|p| p[r].len()).sum();
        range.rotations.reserve_exact(total);
        for p in &partials {
            range.rotations.extend_from_slice(&p[r]);
        }
    }
}

/// Splits every range that holds more than four times the mean load at
/// quantiles of its observed first-code frequencies.
pub fn resplit_overloaded(
    text: &[u32],
    ranges: Vec<RotationRange>,
    nr: usize,
) -> Vec<RotationRange> {
    let target = (text.len() / nr.max(1)).max(1);
    let mut out = Vec::with_capacity(ranges.len());
    for range in ranges {
        if range.rotations.len() <= 4 * target || range.last - range.first < 2 {
            out.push(range);
            continue;
        }
        let mut freq: std::collections::BTreeMap<u32, usize> = Default::default();
        for &p in &range.rotations {
            *freq.entry(text[p as usize]).or_default() += 1;
        }
        let mut cuts = vec![range.first];
        let mut acc = 0usize;
        let mut iter = freq.iter().peekable();
        while let Some((_, &f)) = iter.next() {
            acc += f;
            if acc >= target {
                if let Some((&next, _)) = iter.peek() {
                    cuts.push(next as u64);
                    acc = 0;
                }
            }
        }
        cuts.push(range.last);
        let mut subs: Vec<RotationRange> = cuts
            .windows(2)
            .map(|w| RotationRange::empty(w[0], w[1]))
            .collect();
        for p in range.rotations {
            let i = range_of(&subs, text[p as usize]);
            subs[i].rotations.push(p);
        }
        out.extend(subs);
    }
    out
}

/// Greedy contiguous assignment of ranges with the given loads to at most
/// `threads` workers: ranges are taken in order and a worker is closed once
/// its load reaches `ceil(total / threads)`. The heaviest worker carries at
/// most `ceil(total / threads) + max(load)`.
pub fn split_ranges(loads: &[usize], threads: usize) -> Vec<Range<usize>> {
    let threads = threads.max(1);
    let total: usize = loads.iter().sum();
    let target = total.div_ceil(threads).max(1);
    let mut out = Vec::with_capacity(threads);
    let mut start = 0;
    let mut acc = 0;
    for (i, &l) in loads.iter().enumerate() {
        acc += l;
        if acc >= target && out.len() + 1 < threads {
            out.push(start..i + 1);
            start = i + 1;
            acc = 0;
        }
    }
    if start < loads.len() || out.is_empty() {
        out.push(start..loads.len());
    }
    out
}

const SORT_STACK: usize = 256 << 20;

/// Parallel BWT. Output is identical to [`naive_bwt`] for every valid input
/// and independent of `threads` and `ranges`.
pub fn compute_bwt(text: &[u32], eac: u64, config: &BwtConfig) -> Result<BwtResult, BwtError> {
    compute_bwt_with_stats(text, eac, config).map(|(r, _)| r)
}

pub fn compute_bwt_with_stats(
    text: &[u32],
    eac: u64,
    config: &BwtConfig,
) -> Result<(BwtResult, SortStats), BwtError> {
    if config.threads == 0 {
        return Err(BwtError::InvalidParameter(
            "thread count must be at least 1".into(),
        ));
    }
    if config.ranges == 0 || config.ranges as u64 > eac {
        return Err(BwtError::InvalidParameter(format!(
            "range count {} must be in [1, {eac}]",
            config.ranges
        )));
    }
    validate_text(text, Some(eac))?;

    let mut ranges = equal_width_ranges(eac, config.ranges);
    distribute_rotations(text, &mut ranges, config.threads);
    if config.statistical_splitters {
        ranges = resplit_overloaded(text, ranges, config.ranges);
    }
    let loads: Vec<usize> = ranges.iter().map(|r| r.rotations.len()).collect();
    let assignment = split_ranges(&loads, config.threads);

    let ctx = SortContext::new(text, eac);
    let mut stats = SortStats::default();
    std::thread::scope(|s| {
        let mut rest: &mut [RotationRange] = &mut ranges;
        let mut handles = Vec::new();
        for group in &assignment {
            let (mine, tail) = rest.split_at_mut(group.len());
            rest = tail;
            let ctx = &ctx;
            let handle = std::thread::Builder::new()
                .stack_size(SORT_STACK)
                .spawn_scoped(s, move || {
                    let mut stats = SortStats::default();
                    for r in mine.iter_mut() {
                        stats += sort_suffixes(ctx, &mut r.rotations);
                    }
                    stats
                })
                .expect("spawn sorting worker");
            handles.push(handle);
        }
        for h in handles {
            stats += h.join().expect("sorting worker panicked");
        }
    });

    let mut suffix_positions = Vec::with_capacity(text.len());
    for r in ranges {
        suffix_positions.extend_from_slice(&r.rotations);
    }
    Ok((
        BwtResult::from_suffix_positions(text, suffix_positions),
        stats,
    ))
}
