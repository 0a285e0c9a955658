use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::naive::{naive_count, naive_locate};
use super::*;
use crate::alphabet::encode_collection;
use crate::block_store::{IndexReader, StoreParams};
use crate::bwt::naive_bwt;
use crate::fasta::{SequenceCollection, SequenceRecord};
use crate::pipeline::{build_collection_index, BuildOptions};

fn searcher_for(c: &SequenceCollection, k: u32, block_size: u32, seed: u8) -> Searcher {
    let key = IndexKey::from_bytes([seed; 64]);
    let options = BuildOptions {
        k,
        store: StoreParams {
            block_size,
            sample_rate: 10,
            threads: 1,
        },
        ranges: None,
    };
    let index = build_collection_index(c, &key, &options).unwrap();
    Searcher::new(IndexReader::new(index, &key), &key).unwrap()
}

fn random_collection(
    rng: &mut ChaCha8Rng,
    items: usize,
    max_len: usize,
    symbols: &[u8],
) -> SequenceCollection {
    SequenceCollection::new(
        (0..items)
            .map(|i| {
                let len = rng.gen_range(1..=max_len);
                SequenceRecord::new(
                    format!("r{i}"),
                    (0..len)
                        .map(|_| symbols[rng.gen_range(0..symbols.len())])
                        .collect::<Vec<u8>>(),
                )
            })
            .collect(),
    )
}

/// Substrings drawn from the collection, some at item edges, plus random
/// strings.
fn patterns(
    rng: &mut ChaCha8Rng,
    c: &SequenceCollection,
    k: usize,
    n: usize,
    symbols: &[u8],
) -> Vec<Vec<u8>> {
    (0..n)
        .map(|i| {
            let len = rng.gen_range(k..=k + 12);
            let r = &c.records[rng.gen_range(0..c.len())];
            if i % 5 == 4 || r.len() < len {
                (0..len)
                    .map(|_| symbols[rng.gen_range(0..symbols.len())])
                    .collect()
            } else {
                let at = match i % 5 {
                    0 => 0,
                    1 => r.len() - len,
                    _ => rng.gen_range(0..=r.len() - len),
                };
                r.bases[at..at + len].to_vec()
            }
        })
        .collect()
}

#[test]
fn agrees_with_scanner() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (k, bs, symbols) in [
        (1, 64, &b"ACGT"[..]),
        (2, 64, b"ACGTN"),
        (3, 256, b"ACGT"),
        (4, 64, b"ACGRTY"),
        (5, 128, b"AC"),
    ] {
        let c = random_collection(&mut rng, 5, 400, symbols);
        let s = searcher_for(&c, k, bs, k as u8);
        for p in patterns(&mut rng, &c, k as usize, 150, symbols) {
            let expected = naive_locate(&c, &p);
            assert_eq!(
                s.count(&p).unwrap(),
                expected.len() as u64,
                "k={k} {:?}",
                String::from_utf8_lossy(&p)
            );
            assert_eq!(
                s.locate(&p).unwrap(),
                expected,
                "k={k} {:?}",
                String::from_utf8_lossy(&p)
            );
        }
    }
}

#[test]
fn tail_strategies_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let c = random_collection(&mut rng, 4, 500, b"ACGT");
    let fast = searcher_for(&c, 4, 64, 3);
    let slow = searcher_for(&c, 4, 64, 3).with_tail_check(TailCheck::LocateExtract);
    for p in patterns(&mut rng, &c, 4, 120, b"ACGT") {
        assert_eq!(fast.count(&p).unwrap(), slow.count(&p).unwrap());
        assert_eq!(fast.locate(&p).unwrap(), slow.locate(&p).unwrap());
    }
}

#[test]
fn threads_do_not_change_answers() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let c = random_collection(&mut rng, 4, 500, b"ACGT");
    let one = searcher_for(&c, 3, 64, 4);
    let many = searcher_for(&c, 3, 64, 4).with_threads(3);
    for p in patterns(&mut rng, &c, 3, 60, b"ACGT") {
        assert_eq!(one.locate(&p).unwrap(), many.locate(&p).unwrap());
        assert_eq!(one.count(&p).unwrap(), many.count(&p).unwrap());
    }
}

#[test]
fn planted_pattern_offset() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bases: Vec<u8> = (0..200).map(|_| b"AC"[rng.gen_range(0..2)]).collect();
    bases[17..25].copy_from_slice(b"GTTGTGGT");
    let c = SequenceCollection::new(vec![SequenceRecord::new("x", bases)]);
    let s = searcher_for(&c, 4, 64, 5);
    assert_eq!(
        s.locate(b"GTTGTGGT").unwrap(),
        [MatchPosition {
            item: 0,
            offset: 17
        }]
    );
}

#[test]
fn every_phase_is_found() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 2..=5u64 {
        let mut bases: Vec<u8> = (0..300).map(|_| b"AC"[rng.gen_range(0..2)]).collect();
        let planted = b"GTGGTTGT";
        let offsets: Vec<u64> = (0..k).map(|d| 20 + 30 * d + d).collect();
        for &o in &offsets {
            bases[o as usize..o as usize + planted.len()].copy_from_slice(planted);
        }
        let c = SequenceCollection::new(vec![SequenceRecord::new("x", bases)]);
        let s = searcher_for(&c, k as u32, 64, 6);
        let hits: Vec<u64> = s
            .locate(planted)
            .unwrap()
            .iter()
            .map(|m| m.offset)
            .collect();
        assert_eq!(hits, offsets);
        assert!(
            offsets
                .iter()
                .map(|o| o % k)
                .collect::<std::collections::HashSet<_>>()
                .len()
                == k as usize
        );
    }
}

#[test]
fn edges_of_items() {
    let c = SequenceCollection::new(vec![
        SequenceRecord::new("a", "ACGTTGCAA"),
        SequenceRecord::new("b", "CAAGGT"),
        SequenceRecord::new("c", "GTACGTT"),
    ]);
    for k in 1..=4 {
        let s = searcher_for(&c, k, 64, 7);
        for p in [
            &b"GCAA"[..],
            b"ACGT",
            b"CAAG",
            b"AACA",
            b"GTAC",
            b"CGTT",
            b"GGT",
            b"ACGTTGCAA",
        ] {
            if p.len() < k as usize {
                continue;
            }
            assert_eq!(
                s.locate(p).unwrap(),
                naive_locate(&c, p),
                "k={k} {}",
                String::from_utf8_lossy(p)
            );
        }
        // spans the boundary between items a and b
        assert_eq!(s.count(b"CAACAA").unwrap(), 0);
    }
}

#[test]
fn whole_item_and_absent_patterns() {
    let c = SequenceCollection::new(vec![SequenceRecord::new("x", "GATTACAGATTC")]);
    let s = searcher_for(&c, 3, 64, 8);
    assert_eq!(s.count(b"GATTACAGATTC").unwrap(), 1);
    assert_eq!(s.count(b"GATTACAGATTCA").unwrap(), 0);
    assert_eq!(s.count(b"CCC").unwrap(), 0);
    assert_eq!(s.count(b"GAN").unwrap(), 0);
    assert_eq!(s.count(b"GA$").unwrap(), 0);
    assert_eq!(s.count(b"gat").unwrap(), 2);
    assert!(s.locate(b"CCCC").unwrap().is_empty());
    assert!(matches!(
        s.count(b"GA"),
        Err(SearchError::PatternTooShort { len: 2, k: 3 })
    ));
}

#[test]
fn self_overlapping_runs() {
    let c = SequenceCollection::new(vec![
        SequenceRecord::new("x", vec![b'A'; 300]),
        SequenceRecord::new(
            "y",
            [vec![b'N'; 150], vec![b'C'; 3], vec![b'N'; 97]].concat(),
        ),
    ]);
    let s = searcher_for(&c, 4, 64, 9);
    for p in [
        &b"AAAA"[..],
        b"AAAAAAA",
        b"NNNNN",
        b"NNCCCNN",
        b"NNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNNN",
    ] {
        assert_eq!(s.count(p).unwrap(), naive_count(&c, p));
        assert_eq!(s.locate(p).unwrap(), naive_locate(&c, p));
    }
}

#[test]
fn single_code_backward_search_is_frequency() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let c = random_collection(&mut rng, 3, 400, b"ACGT");
    let s = searcher_for(&c, 2, 64, 10);
    let text = encode_collection(&c, s.alphabet()).unwrap();
    let first = text.super_chars[0];
    let freq = text.super_chars.iter().filter(|&&x| x == first).count() as u64;
    let (sp, ep) = s.backward_search(&[first]).unwrap().unwrap();
    assert_eq!(ep - sp, freq);
    assert_eq!(s.backward_search(&[u32::MAX - 1]).unwrap(), None);
}

#[test]
fn backward_search_matches_sorted_rotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let c = random_collection(&mut rng, 4, 300, b"ACG");
    let s = searcher_for(&c, 2, 64, 11);
    let text = encode_collection(&c, s.alphabet()).unwrap().super_chars;
    let sa = naive_bwt(&text).unwrap().suffix_positions;
    let n = text.len();
    for _ in 0..300 {
        let len = rng.gen_range(1..6);
        let core: Vec<u32> = if rng.gen_bool(0.7) {
            let at = rng.gen_range(0..n - len);
            text[at..at + len].to_vec()
        } else {
            (0..len).map(|_| text[rng.gen_range(0..n)]).collect()
        };
        let rows: Vec<u64> = (0..n)
            .filter(|&r| {
                let p = sa[r] as usize;
                (0..len).all(|i| text[(p + i) % n] == core[i])
            })
            .map(|r| r as u64)
            .collect();
        match s.backward_search(&core).unwrap() {
            Some((sp, ep)) => assert_eq!((sp..ep).collect::<Vec<_>>(), rows),
            None => assert!(rows.is_empty()),
        }
    }
}

#[test]
fn head_refinement_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let c = random_collection(&mut rng, 4, 600, b"ACGT");
    let s = searcher_for(&c, 3, 64, 12);
    let text = encode_collection(&c, s.alphabet()).unwrap().super_chars;
    let sa = naive_bwt(&text).unwrap().suffix_positions;
    let n = text.len();
    let k = 3;
    for _ in 0..200 {
        let at = rng.gen_range(1..n - 2);
        let core = &text[at..at + 1];
        let Some(range) = s.backward_search(core).unwrap() else {
            continue;
        };
        let known = rng.gen_range(1..k);
        let kmer = s.alphabet().decode(text[at - 1]).unwrap();
        let mut m: Vec<Option<u8>> = vec![None; k - known];
        m.extend(kmer[k - known..].iter().map(|&b| Some(b)));
        let mask = Mask(m);
        let mut got: Vec<u64> = s
            .refine_by_head_mask(&[range], &mask)
            .unwrap()
            .into_iter()
            .flat_map(|(a, b)| a..b)
            .map(|r| sa[r as usize] as u64)
            .collect();
        got.sort_unstable();
        let expected: Vec<u64> = (1..n - 1)
            .filter(|&p| {
                text[p] == core[0]
                    && mask.matches(&s.alphabet().decode(text[p - 1]).unwrap(), Edge::Head)
            })
            .map(|p| p as u64 - 1)
            .collect();
        assert_eq!(got, expected);
    }
}

#[test]
fn degenerate_head_mask_is_one_step() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let c = SequenceCollection::new(vec![SequenceRecord::new(
        "x",
        (0..400)
            .map(|_| b"ACGT"[rng.gen_range(0..4)])
            .collect::<Vec<u8>>(),
    )]);
    let s = searcher_for(&c, 2, 64, 13);
    let text = encode_collection(&c, s.alphabet()).unwrap().super_chars;
    for at in [5usize, 50, 120] {
        let pair = &text[at..at + 2];
        let single = s.backward_search(&pair[1..]).unwrap().unwrap();
        let kmer = s.alphabet().decode(pair[0]).unwrap();
        let mask = Mask(kmer.iter().map(|&b| Some(b)).collect());
        assert_eq!(
            s.refine_by_head_mask(&[single], &mask).unwrap(),
            vec![s.backward_search(pair).unwrap().unwrap()]
        );
    }
}

#[test]
fn last_char_check() {
    let c = SequenceCollection::new(vec![SequenceRecord::new("x", "CCAGGTCCCGGTAAAA")]);
    let s = searcher_for(&c, 4, 64, 14);
    let core = vec![s.alphabet().encode_kmer(b"CCAG").unwrap()];
    let (sp, ep) = s.backward_search(&core).unwrap().unwrap();
    assert_eq!(ep - sp, 1);
    let fits = Mask(vec![Some(b'G'), None, None, None]);
    let misses = Mask(vec![Some(b'C'), None, None, None]);
    assert_eq!(s.check_last_char(sp, &fits, 2).unwrap(), Some(0));
    assert_eq!(s.check_last_char(sp, &misses, 2).unwrap(), None);
    let exact = Mask(b"GTCC".iter().map(|&b| Some(b)).collect());
    assert_eq!(s.check_last_char(sp, &exact, 2).unwrap(), Some(0));
}

#[test]
fn extraction() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let c = random_collection(&mut rng, 6, 700, b"ACGTNRY");
    for k in [1, 3, 4] {
        let s = searcher_for(&c, k, 64, 15);
        for (i, r) in c.records.iter().enumerate() {
            assert_eq!(s.extract(i, 0, r.len() as u64).unwrap(), r.bases);
            assert_eq!(s.description(i).unwrap(), r.description);
            if r.len() > 10 {
                assert_eq!(s.extract(i, 3, 6).unwrap(), r.bases[3..9]);
                assert_eq!(
                    s.extract(i, r.len() as u64 - 5, 5).unwrap(),
                    r.bases[r.len() - 5..]
                );
            }
            assert!(s.extract(i, 0, 0).unwrap().is_empty());
            assert!(s.extract(i, 1, r.len() as u64).is_err());
        }
        assert!(s.extract(c.len(), 0, 1).is_err());
    }
}

#[test]
fn locate_extract_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let c = random_collection(&mut rng, 3, 500, b"ACGT");
    let s = searcher_for(&c, 3, 128, 16);
    for p in patterns(&mut rng, &c, 3, 50, b"ACGT") {
        for m in s.locate(&p).unwrap() {
            assert_eq!(s.extract(m.item, m.offset, p.len() as u64).unwrap(), p);
        }
    }
}

#[test]
fn wrong_scrambling_key_misses() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let c = random_collection(&mut rng, 3, 800, b"ACGT");
    let key = IndexKey::from_bytes([17; 64]);
    let index = build_collection_index(
        &c,
        &key,
        &BuildOptions {
            k: 4,
            store: StoreParams {
                block_size: 64,
                sample_rate: 10,
                threads: 1,
            },
            ranges: None,
        },
    )
    .unwrap();
    let mut other = *key.as_bytes();
    other[3] ^= 0x80;
    let wrong = IndexKey::from_bytes(other);
    let s = Searcher::new(IndexReader::new(index, &wrong), &wrong).unwrap();
    let agree = patterns(&mut rng, &c, 4, 100, b"ACGT")
        .iter()
        .filter(|p| {
            s.locate(p).ok() == Some(naive_locate(&c, p)) && !naive_locate(&c, p).is_empty()
        })
        .count();
    assert!(agree < 10, "{agree}");
}

#[test]
fn damaged_indexes_fail_without_panicking() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let c = random_collection(&mut rng, 3, 900, b"ACGTN");
    let key = IndexKey::from_bytes([6; 64]);
    let options = BuildOptions {
        k: 3,
        store: StoreParams {
            block_size: 64,
            sample_rate: 10,
            threads: 1,
        },
        ranges: None,
    };
    let bytes =
        crate::block_store::serialize_index(&build_collection_index(&c, &key, &options).unwrap());
    let probes = patterns(&mut rng, &c, 3, 8, b"ACGTN");
    for _ in 0..1500 {
        let mut damaged = bytes.clone();
        for _ in 0..rng.gen_range(1..4) {
            let i = rng.gen_range(0..damaged.len());
            damaged[i] ^= 1 << rng.gen_range(0..8);
        }
        let Ok(reader) = IndexReader::from_bytes(&damaged, &key) else {
            continue;
        };
        let Ok(s) = Searcher::new(reader, &key) else {
            continue;
        };
        for p in &probes {
            let _ = s.count(p);
            let _ = s.locate(p);
        }
        for item in 0..s.item_count() {
            let _ = s.description(item);
            if let Some(len) = s.item_len(item) {
                let _ = s.extract(item, 0, len);
            }
        }
    }
}
