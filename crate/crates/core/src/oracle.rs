//! Exact LZ77 by brute force, for measuring `z` and checking answers on small
//! inputs. Quadratic; guarded by a size limit.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::parse_core::{Parse, Phrase};

pub const DEFAULT_ORACLE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lz77Variant {
    /// Longest earlier match followed by one literal byte.
    #[default]
    Classic,
    /// Longest prefix with an earlier occurrence; a literal only when there
    /// is none.
    PrefixOnly,
}

impl FromStr for Lz77Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "classic" => Ok(Lz77Variant::Classic),
            "prefix-only" => Ok(Lz77Variant::PrefixOnly),
            other => Err(format!(
                "unknown LZ77 variant '{other}' (expected classic or prefix-only)"
            )),
        }
    }
}

impl fmt::Display for Lz77Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Lz77Variant::Classic => "classic",
            Lz77Variant::PrefixOnly => "prefix-only",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OracleStats {
    pub z: usize,
    pub variant: Lz77Variant,
}

/// One exact LZ77 phrase: `copied` bytes from `source` (1-based), then, for
/// the classic variant, one literal byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Factor {
    pub start: usize,
    pub len: usize,
    pub source: Option<usize>,
    pub copied: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactParse {
    pub factors: Vec<Factor>,
    pub stats: OracleStats,
}

impl ExactParse {
    /// Phrase texts, for display and tests.
    pub fn phrase_strings<'a>(&self, s: &'a [u8]) -> Vec<&'a [u8]> {
        self.factors
            .iter()
            .map(|f| &s[f.start - 1..f.start - 1 + f.len])
            .collect()
    }

    /// The prefix-only parse as an LZ77-like [`Parse`]. `None` for classic
    /// parses, whose phrases mix a copy and a literal.
    pub fn to_parse(&self, s: &[u8]) -> Option<Parse> {
        if self.stats.variant != Lz77Variant::PrefixOnly {
            return None;
        }
        let phrases = self
            .factors
            .iter()
            .map(|f| match f.source {
                Some(source) => Phrase::Copy {
                    start: f.start,
                    source,
                    length: f.len,
                },
                None => Phrase::Literal {
                    start: f.start,
                    byte: s[f.start - 1],
                },
            })
            .collect();
        Some(Parse {
            n: s.len(),
            phrases,
        })
    }
}

/// Longest match of `s[i..i+max]` starting at some `o < i`, leftmost on ties.
fn longest_earlier_match(s: &[u8], i: usize, max: usize) -> (usize, usize) {
    let mut best = (0, 0);
    if max == 0 {
        return best;
    }
    let target = &s[i..i + max];
    for o in 0..i {
        if s[o] != target[0] {
            continue;
        }
        let len = s[o..]
            .iter()
            .zip(target)
            .take_while(|(a, b)| a == b)
            .count();
        if len > best.1 {
            best = (o, len);
            if len == max {
                break;
            }
        }
    }
    best
}

/// Greedy exact LZ77 of `s`. Refuses inputs longer than `limit`.
pub fn exact_lz77(s: &[u8], variant: Lz77Variant, limit: usize) -> Result<ExactParse> {
    if s.len() > limit {
        return Err(Error::OracleLimit { n: s.len(), limit });
    }
    let n = s.len();
    let mut factors = Vec::new();
    let mut i = 0;
    while i < n {
        let max = match variant {
            Lz77Variant::Classic => n - i - 1,
            Lz77Variant::PrefixOnly => n - i,
        };
        let (o, copied) = longest_earlier_match(s, i, max);
        let len = match variant {
            Lz77Variant::Classic => copied + 1,
            Lz77Variant::PrefixOnly => copied.max(1),
        };
        factors.push(Factor {
            start: i + 1,
            len,
            source: (copied > 0).then_some(o + 1),
            copied,
        });
        i += len;
    }
    let z = factors.len();
    Ok(ExactParse {
        factors,
        stats: OracleStats { z, variant },
    })
}

/// Leftmost `o < start` with `S[o..o+ell-1] = S[start..start+ell-1]`.
pub fn first_occurrence_bruteforce(s: &[u8], start: usize, ell: usize) -> Result<Option<usize>> {
    if start == 0 || ell == 0 || start + ell - 1 > s.len() {
        return Err(Error::InvalidParams(format!(
            "block ({start}, {ell}) is outside a string of length {}",
            s.len()
        )));
    }
    let needle = &s[start - 1..start - 1 + ell];
    Ok((1..start).find(|&o| &s[o - 1..o - 1 + ell] == needle))
}
