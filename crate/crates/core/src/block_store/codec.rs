//! Per-block transforms: move-to-front, zero-run coding, keyed additive
//! masking and fixed-width bit packing.

use thiserror::Error;

use crate::crypto::{block_nonce, keystream_symbols};

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("symbol {symbol} at index {index} is outside [0, {bound})")]
    SymbolOutOfRange {
        index: usize,
        symbol: u32,
        bound: u64,
    },
    #[error("zero-run decoding overran the expected {expected} symbols")]
    Overrun { expected: usize },
    #[error("bit payload of {got} bytes is too short for {count} symbols of width {width}")]
    ShortPayload {
        got: usize,
        count: usize,
        width: u32,
    },
    #[error("nonzero padding bits after the last symbol")]
    DirtyPadding,
}

/// Zero-run digit meaning 1.
pub const RUN_A: u32 = 0;
/// Zero-run digit meaning 2.
pub const RUN_B: u32 = 1;
/// Number of symbols reserved for zero-run digits.
pub const RUN_SYMBOLS: u32 = 2;

/// Move-to-front over `[0, alphabet)`, list starting in ascending order.
pub fn mtf(symbols: &[u32], alphabet: u32) -> Result<Vec<u32>, CodecError> {
    let mut list: Vec<u32> = (0..alphabet).collect();
    symbols
        .iter()
        .enumerate()
        .map(|(index, &s)| {
            let r = list
                .iter()
                .position(|&x| x == s)
                .ok_or(CodecError::SymbolOutOfRange {
                    index,
                    symbol: s,
                    bound: alphabet as u64,
                })?;
            list[..=r].rotate_right(1);
            Ok(r as u32)
        })
        .collect()
}

pub fn mtf_inverse(ranks: &[u32], alphabet: u32) -> Result<Vec<u32>, CodecError> {
    let mut list: Vec<u32> = (0..alphabet).collect();
    ranks
        .iter()
        .enumerate()
        .map(|(index, &r)| {
            if r >= alphabet {
                return Err(CodecError::SymbolOutOfRange {
                    index,
                    symbol: r,
                    bound: alphabet as u64,
                });
            }
            let s = list[r as usize];
            list[..=r as usize].rotate_right(1);
            Ok(s)
        })
        .collect()
}

fn push_run(out: &mut Vec<u32>, mut run: u64) {
    // bijective base 2, least significant digit first
    while run > 0 {
        if run & 1 == 1 {
            out.push(RUN_A);
            run = (run - 1) / 2;
        } else {
            out.push(RUN_B);
            run = (run - 2) / 2;
        }
    }
}

/// Replaces each maximal run of zero ranks by its bijective base-2 digits
/// and shifts every nonzero rank `r` to `r + 1`.
pub fn rle0(ranks: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(ranks.len());
    let mut run = 0u64;
    for &r in ranks {
        if r == 0 {
            run += 1;
        } else {
            push_run(&mut out, run);
            run = 0;
            out.push(r + 1);
        }
    }
    push_run(&mut out, run);
    out
}

/// Inverse of [`rle0`]. Fails once the output would exceed `max_len`.
pub fn rle0_inverse(symbols: &[u32], max_len: usize) -> Result<Vec<u32>, CodecError> {
    let mut out = Vec::with_capacity(max_len.min(symbols.len()));
    let mut run = 0u64;
    let mut weight = 1u64;
    let overrun = CodecError::Overrun { expected: max_len };
    for &s in symbols {
        if s < RUN_SYMBOLS {
            run = run
                .checked_add((s as u64 + 1).checked_mul(weight).ok_or(overrun.clone())?)
                .ok_or(overrun.clone())?;
            weight = weight.checked_mul(2).ok_or(overrun.clone())?;
            if run > max_len as u64 {
                return Err(overrun);
            }
            continue;
        }
        if out.len() as u64 + run + 1 > max_len as u64 {
            return Err(overrun);
        }
        out.resize(out.len() + run as usize, 0);
        run = 0;
        weight = 1;
        out.push(s - 1);
    }
    if out.len() as u64 + run > max_len as u64 {
        return Err(overrun);
    }
    out.resize(out.len() + run as usize, 0);
    Ok(out)
}

/// `ceil(log2(bound))`, at least 1.
pub fn bit_width(bound: u64) -> u32 {
    if bound <= 2 {
        1
    } else {
        64 - (bound - 1).leading_zeros()
    }
}

pub fn packed_len(count: usize, width: u32) -> usize {
    (count * width as usize).div_ceil(8)
}

/// Packs symbols least-significant bit first.
pub fn pack_bits(symbols: &[u32], width: u32) -> Result<Vec<u8>, CodecError> {
    assert!(
        (1..=32).contains(&width),
        "bit width {width} outside [1, 32]"
    );
    let mut out = Vec::with_capacity(packed_len(symbols.len(), width));
    let mut acc = 0u64;
    let mut bits = 0u32;
    for (index, &s) in symbols.iter().enumerate() {
        if width < 32 && s >> width != 0 {
            return Err(CodecError::SymbolOutOfRange {
                index,
                symbol: s,
                bound: 1 << width,
            });
        }
        acc |= (s as u64) << bits;
        bits += width;
        while bits >= 8 {
            out.push(acc as u8);
            acc >>= 8;
            bits -= 8;
        }
    }
    if bits > 0 {
        out.push(acc as u8);
    }
    Ok(out)
}

pub fn unpack_bits(bytes: &[u8], count: usize, width: u32) -> Result<Vec<u32>, CodecError> {
    assert!(
        (1..=32).contains(&width),
        "bit width {width} outside [1, 32]"
    );
    let need = packed_len(count, width);
    if bytes.len() < need {
        return Err(CodecError::ShortPayload {
            got: bytes.len(),
            count,
            width,
        });
    }
    let mask = if width == 32 {
        u32::MAX as u64
    } else {
        (1u64 << width) - 1
    };
    let mut out = Vec::with_capacity(count);
    let mut acc = 0u64;
    let mut bits = 0u32;
    let mut next = bytes[..need].iter();
    for _ in 0..count {
        while bits < width {
            acc |= (*next.next().unwrap() as u64) << bits;
            bits += 8;
        }
        out.push((acc & mask) as u32);
        acc >>= width;
        bits -= width;
    }
    if acc != 0 {
        return Err(CodecError::DirtyPadding);
    }
    Ok(out)
}

/// `c[i] = (s[i] + v[i]) mod bound` with `v` drawn from the block's keystream.
pub fn encrypt_symbols(symbols: &mut [u32], key: &[u8; 32], block: u64, bound: u32) {
    let stream = keystream_symbols(key, block_nonce(block), symbols.len(), bound)
        .expect("modulus is at least 2");
    for (s, v) in symbols.iter_mut().zip(stream) {
        debug_assert!(*s < bound);
        *s = ((*s as u64 + v as u64) % bound as u64) as u32;
    }
}

pub fn decrypt_symbols(
    symbols: &mut [u32],
    key: &[u8; 32],
    block: u64,
    bound: u32,
) -> Result<(), CodecError> {
    let stream = keystream_symbols(key, block_nonce(block), symbols.len(), bound)
        .expect("modulus is at least 2");
    for (index, (s, v)) in symbols.iter_mut().zip(stream).enumerate() {
        if *s >= bound {
            return Err(CodecError::SymbolOutOfRange {
                index,
                symbol: *s,
                bound: bound as u64,
            });
        }
        *s = ((*s as u64 + bound as u64 - v as u64) % bound as u64) as u32;
    }
    Ok(())
}
