//! Suffix sorting inside one rotation range.
//!
//! Ordinary suffixes are sorted with a multikey quicksort whose keys pack
//! several consecutive codes into one `u64`. Suffixes that begin inside a
//! long run of a single code are ordered without walking the run: two such
//! suffixes `c^a x...` and `c^b y...` compare by the direction of the run exit
//! (`x < c` or `x > c`), then by the remaining run length, then by the
//! suffixes that start right after the runs.

use std::cmp::Ordering;

/// Runs shorter than this are left to the quicksort.
pub const LONG_RUN: u32 = 32;

const INSERTION_CUTOFF: usize = 16;

/// Counters reported by the sorter.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct SortStats {
    /// Text symbols read while comparing suffixes.
    pub symbol_reads: u64,
}

impl std::ops::AddAssign for SortStats {
    fn add_assign(&mut self, rhs: Self) {
        self.symbol_reads += rhs.symbol_reads;
    }
}

/// Read-only view of the text shared by all sorting workers.
pub struct SortContext<'a> {
    text: &'a [u32],
    bits: u32,
    per_key: u32,
    /// Maximal runs `[start, end)` of one code with length at least `LONG_RUN`.
    runs: Vec<(u32, u32)>,
}

impl<'a> SortContext<'a> {
    pub fn new(text: &'a [u32], eac: u64) -> Self {
        let bits = (64 - (eac.max(2) - 1).leading_zeros()).max(1);
        let per_key = (64 / bits).max(1);
        SortContext {
            text,
            bits,
            per_key,
            runs: find_long_runs(text),
        }
    }

    pub fn text(&self) -> &[u32] {
        self.text
    }

    #[inline]
    fn code(&self, p: usize) -> u32 {
        // past the unique terminator every suffix has already been decided
        self.text.get(p).copied().unwrap_or(0)
    }

    #[inline]
    fn key(&self, p: u32, depth: u32) -> u64 {
        let start = p as usize + depth as usize;
        let mut key = 0u64;
        for j in 0..self.per_key as usize {
            key = (key << self.bits) | self.code(start + j) as u64;
        }
        key
    }

    fn compare_from(&self, a: u32, b: u32, depth: u32, stats: &mut SortStats) -> Ordering {
        let n = self.text.len();
        let (mut i, mut j) = (a as usize + depth as usize, b as usize + depth as usize);
        loop {
            stats.symbol_reads += 2;
            let (x, y) = (self.code(i), self.code(j));
            if x != y || i >= n || j >= n {
                return x.cmp(&y);
            }
            i += 1;
            j += 1;
        }
    }

    /// Remaining length of the long run containing `p`, if any.
    fn long_run_at(&self, p: u32) -> Option<u32> {
        let idx = self.runs.partition_point(|&(s, _)| s <= p);
        if idx == 0 {
            return None;
        }
        let (_, end) = self.runs[idx - 1];
        (p < end && end - p >= LONG_RUN).then(|| end - p)
    }
}

fn find_long_runs(text: &[u32]) -> Vec<(u32, u32)> {
    let mut runs = Vec::new();
    let mut start = 0usize;
    for i in 1..=text.len() {
        if i == text.len() || text[i] != text[start] {
            if (i - start) as u32 >= LONG_RUN {
                runs.push((start as u32, i as u32));
            }
            start = i;
        }
    }
    runs
}

/// Sorts `positions` (suffix start offsets) in ascending suffix order.
pub fn sort_suffixes(ctx: &SortContext<'_>, positions: &mut [u32]) -> SortStats {
    let mut stats = SortStats::default();
    sort_suffixes_inner(ctx, positions, &mut stats);
    stats
}

fn sort_suffixes_inner(ctx: &SortContext<'_>, positions: &mut [u32], stats: &mut SortStats) {
    if positions.len() <= 1 {
        return;
    }
    let mut in_run: Vec<(u32, u32)> = Vec::new();
    let mut plain: Vec<u32> = Vec::with_capacity(positions.len());
    if ctx.runs.is_empty() {
        plain.extend_from_slice(positions);
    } else {
        for &p in positions.iter() {
            match ctx.long_run_at(p) {
                Some(rem) => in_run.push((p, rem)),
                None => plain.push(p),
            }
        }
    }
    multikey_quicksort(ctx, &mut plain, 0, stats);
    if in_run.is_empty() {
        positions.copy_from_slice(&plain);
        return;
    }
    let run_sorted = sort_run_suffixes(ctx, in_run, stats);

    // merge; comparisons stop within LONG_RUN symbols
    let (mut i, mut j, mut o) = (0, 0, 0);
    while i < plain.len() && j < run_sorted.len() {
        if ctx.compare_from(plain[i], run_sorted[j], 0, stats) == Ordering::Less {
            positions[o] = plain[i];
            i += 1;
        } else {
            positions[o] = run_sorted[j];
            j += 1;
        }
        o += 1;
    }
    for &p in plain[i..].iter().chain(&run_sorted[j..]) {
        positions[o] = p;
        o += 1;
    }
}

/// Orders suffixes that start inside long runs. Input pairs are
/// `(position, remaining run length)`.
fn sort_run_suffixes(
    ctx: &SortContext<'_>,
    items: Vec<(u32, u32)>,
    stats: &mut SortStats,
) -> Vec<u32> {
    let text = ctx.text;
    // (code, exit goes up, signed rank on remaining length, position)
    let mut keyed: Vec<(u32, bool, i64, u32)> = items
        .into_iter()
        .map(|(p, rem)| {
            let c = text[p as usize];
            let exit = text[(p + rem) as usize];
            stats.symbol_reads += 2;
            let up = exit > c;
            // exiting downwards: shorter remainder sorts first; upwards: longer first
            let order = if up { -(rem as i64) } else { rem as i64 };
            (c, up, order, p)
        })
        .collect();
    keyed.sort_unstable();

    let mut out = Vec::with_capacity(keyed.len());
    let mut g = 0;
    while g < keyed.len() {
        let mut h = g + 1;
        while h < keyed.len()
            && keyed[h].0 == keyed[g].0
            && keyed[h].1 == keyed[g].1
            && keyed[h].2 == keyed[g].2
        {
            h += 1;
        }
        if h - g == 1 {
            out.push(keyed[g].3);
        } else {
            // same run prefix c^rem: order by the suffixes after the runs
            let rem = keyed[g].2.unsigned_abs() as u32;
            let mut after: Vec<u32> = keyed[g..h].iter().map(|t| t.3 + rem).collect();
            sort_suffixes_inner(ctx, &mut after, stats);
            out.extend(after.into_iter().map(|e| e - rem));
        }
        g = h;
    }
    out
}

/// Multikey quicksort of suffixes that agree on their first `depth` codes.
fn multikey_quicksort(ctx: &SortContext<'_>, items: &mut [u32], depth: u32, stats: &mut SortStats) {
    if items.len() <= 1 {
        return;
    }
    let mut keys = vec![0u64; items.len()];
    // (lo, hi, depth, keys already computed for this depth)
    let mut stack: Vec<(usize, usize, u32, bool)> = vec![(0, items.len(), depth, false)];
    while let Some((lo, hi, d, keys_valid)) = stack.pop() {
        let n = hi - lo;
        if n <= 1 {
            continue;
        }
        if n <= INSERTION_CUTOFF {
            let seg = &mut items[lo..hi];
            for i in 1..seg.len() {
                let mut j = i;
                while j > 0 && ctx.compare_from(seg[j - 1], seg[j], d, stats) == Ordering::Greater {
                    seg.swap(j - 1, j);
                    j -= 1;
                }
            }
            continue;
        }
        if !keys_valid {
            for i in lo..hi {
                keys[i] = ctx.key(items[i], d);
            }
            stats.symbol_reads += n as u64 * ctx.per_key as u64;
        }
        let pivot = median3(keys[lo], keys[lo + n / 2], keys[hi - 1]);

        // three-way partition of items and keys together
        let (mut lt, mut i, mut gt) = (lo, lo, hi);
        while i < gt {
            match keys[i].cmp(&pivot) {
                Ordering::Less => {
                    keys.swap(lt, i);
                    items.swap(lt, i);
                    lt += 1;
                    i += 1;
                }
                Ordering::Greater => {
                    gt -= 1;
                    keys.swap(i, gt);
                    items.swap(i, gt);
                }
                Ordering::Equal => i += 1,
            }
        }
        stack.push((lo, lt, d, true));
        stack.push((gt, hi, d, true));
        if gt - lt > 1 {
            stack.push((lt, gt, d + ctx.per_key, false));
        }
    }
}

fn median3(a: u64, b: u64, c: u64) -> u64 {
    if a < b {
        if b < c {
            b
        } else if a < c {
            c
        } else {
            a
        }
    } else if a < c {
        a
    } else if b < c {
        c
    } else {
        b
    }
}
