//! Lifting a base-alphabet pattern to the `k` super-character patterns, one
//! per alignment of its first base inside a super-character.

use std::fmt;

use crate::alphabet::{SEPARATOR, TERMINATOR};

/// A k-symbol template; `None` positions are wildcards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(pub Vec<Option<u8>>);

/// Which edge of a super-pattern a mask sits on; the edges differ in what
/// a wildcard may stand for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    /// Wildcards precede the pattern and can only be item bases.
    Head,
    /// Wildcards follow the pattern and may run into the item's trailing
    /// padding.
    Tail,
}

impl Mask {
    pub fn matches(&self, kmer: &[u8], edge: Edge) -> bool {
        debug_assert_eq!(kmer.len(), self.0.len());
        let mut padding = false;
        for (slot, &b) in self.0.iter().zip(kmer) {
            match slot {
                Some(s) => {
                    if b != *s {
                        return false;
                    }
                }
                None => {
                    if b == TERMINATOR {
                        return false;
                    }
                    if b == SEPARATOR {
                        if edge == Edge::Head {
                            return false;
                        }
                        padding = true;
                    } else if padding {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn wildcards(&self) -> usize {
        self.0.iter().filter(|s| s.is_none()).count()
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.map_or('?', |b| b as char))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperPattern {
    /// Number of wildcards before the first pattern base.
    pub displacement: usize,
    pub head: Option<Mask>,
    /// Fully determined k-mers between the edges.
    pub core: Vec<Vec<u8>>,
    pub tail: Option<Mask>,
}

impl SuperPattern {
    /// Number of super-characters spanned.
    pub fn len(&self) -> usize {
        self.core.len() + self.head.is_some() as usize + self.tail.is_some() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// One template string per super-character, wildcards as `?`.
    pub fn templates(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        out.extend(self.head.iter().map(Mask::to_string));
        out.extend(
            self.core
                .iter()
                .map(|k| String::from_utf8_lossy(k).into_owned()),
        );
        out.extend(self.tail.iter().map(Mask::to_string));
        out
    }

    /// The pattern bases, read back from the templates.
    pub fn bases(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(self.head.iter().flat_map(|m| m.0.iter().flatten()));
        for k in &self.core {
            out.extend_from_slice(k);
        }
        out.extend(self.tail.iter().flat_map(|m| m.0.iter().flatten()));
        out
    }
}

/// The `k` super-patterns of `pattern`, by displacement `0..k`. Requires
/// `pattern.len() >= k`.
pub fn super_patterns(pattern: &[u8], k: usize) -> Vec<SuperPattern> {
    assert!(k >= 1 && pattern.len() >= k, "pattern shorter than k");
    (0..k)
        .map(|d| {
            let head_len = (k - d) % k;
            let head = (head_len > 0).then(|| {
                let mut m = vec![None; d];
                m.extend(pattern[..head_len].iter().map(|&b| Some(b)));
                Mask(m)
            });
            let rest = &pattern[head_len..];
            let full = rest.len() / k;
            let core = rest[..full * k].chunks(k).map(<[u8]>::to_vec).collect();
            let left = &rest[full * k..];
            let tail = (!left.is_empty()).then(|| {
                let mut m: Vec<Option<u8>> = left.iter().map(|&b| Some(b)).collect();
                m.resize(k, None);
                Mask(m)
            });
            SuperPattern {
                displacement: d,
                head,
                core,
                tail,
            }
        })
        .collect()
}

/// Expands every wildcard of every super-pattern over `fill` and returns
/// the resulting concrete k-mer sequences.
pub fn expand_wildcards(patterns: &[SuperPattern], fill: &[u8]) -> Vec<Vec<Vec<u8>>> {
    fn expand(mask: &Mask, fill: &[u8]) -> Vec<Vec<u8>> {
        let mut out = vec![Vec::new()];
        for slot in &mask.0 {
            let choices: Vec<u8> = match slot {
                Some(b) => vec![*b],
                None => fill.to_vec(),
            };
            out = out
                .into_iter()
                .flat_map(|p| {
                    choices.iter().map(move |&c| {
                        let mut p = p.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out
    }
    let mut all = Vec::new();
    for sp in patterns {
        let heads = sp.head.as_ref().map_or(vec![None], |m| {
            expand(m, fill).into_iter().map(Some).collect()
        });
        let tails = sp.tail.as_ref().map_or(vec![None], |m| {
            expand(m, fill).into_iter().map(Some).collect()
        });
        for h in &heads {
            for t in &tails {
                let mut seq: Vec<Vec<u8>> = Vec::with_capacity(sp.len());
                seq.extend(h.iter().cloned());
                seq.extend(sp.core.iter().cloned());
                seq.extend(t.iter().cloned());
                all.push(seq);
            }
        }
    }
    all
}
