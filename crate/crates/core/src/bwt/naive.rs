//! Reference BWT by prefix doubling over cyclic rotations, and inverse BWT.
//!
//! Slow but simple; used to check the parallel builder.

use super::{validate_text, BwtError, BwtResult};

/// Sorts all cyclic rotations of `text` by prefix doubling and takes the
/// last column.
pub fn naive_bwt(text: &[u32]) -> Result<BwtResult, BwtError> {
    validate_text(text, None)?;
    let n = text.len();
    let mut rank: Vec<u64> = text.iter().map(|&c| c as u64).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let mut next_rank = vec![0u64; n];
    let mut h = 1usize;
    loop {
        let key = |i: usize| (rank[i], rank[(i + h) % n]);
        order.sort_unstable_by_key(|&i| key(i));
        next_rank[order[0]] = 0;
        for w in 1..n {
            let bump = (key(order[w - 1]) != key(order[w])) as u64;
            next_rank[order[w]] = next_rank[order[w - 1]] + bump;
        }
        std::mem::swap(&mut rank, &mut next_rank);
        if rank[order[n - 1]] as usize == n - 1 || h >= n {
            break;
        }
        h *= 2;
    }
    let suffix_positions: Vec<u32> = order.iter().map(|&p| p as u32).collect();
    Ok(BwtResult::from_suffix_positions(text, suffix_positions))
}

/// Rebuilds the text from its last column by LF-mapping from `primary_row`.
pub fn inverse_bwt(last_column: &[u32], primary_row: usize) -> Vec<u32> {
    let n = last_column.len();
    if n == 0 {
        return Vec::new();
    }
    let mut sorted: Vec<u32> = last_column.to_vec();
    sorted.sort_unstable();
    // first row of each symbol in the first column
    let mut first_row = std::collections::HashMap::new();
    for (row, &c) in sorted.iter().enumerate() {
        first_row.entry(c).or_insert(row);
    }
    let mut seen = std::collections::HashMap::new();
    let mut lf = vec![0usize; n];
    for (row, &c) in last_column.iter().enumerate() {
        let rank = seen.entry(c).or_insert(0usize);
        lf[row] = first_row[&c] + *rank;
        *rank += 1;
    }
    let mut text = vec![0u32; n];
    let mut row = primary_row;
    for slot in text.iter_mut().rev() {
        *slot = last_column[row];
        row = lf[row];
    }
    text
}
