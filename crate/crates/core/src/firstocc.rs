//! First-occurrence answers for one level of the driver.
//!
//! At length `l`, the only blocks any active interval `[i, j]` can ask about
//! are its prefix-aligned blocks `S[i+kl .. i+(k+1)l-1]` and suffix-aligned
//! blocks `S[j-(k+1)l+1 .. j-kl]`, `0 <= k < (j-i+1)/l`. Their fingerprints go
//! into a hash table, and one sliding window pass over `S` records the
//! leftmost window matching each of them.
//!
//! For short lengths a [`ShortTable`] built in one pass can replace the
//! sliding passes entirely.

use std::collections::BTreeMap;

use rustc_hash::FxHashMap;

use crate::error::Result;
use crate::fingerprint::{Fingerprint, FingerprintConfig};
use crate::iomodel::{SequentialReader, Source};
use crate::parse_core::Interval;

/// Answers "does the block starting here occur earlier, and where first?".
pub trait FirstOccLookup {
    /// The recorded first occurrence `o` of the length-`l` block at
    /// `block_start`, if `o < block_start`.
    fn query(&self, block_start: usize) -> Option<usize>;
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub fingerprint: Fingerprint,
    /// Aligned block starts sharing this fingerprint, sorted.
    pub starts: Vec<usize>,
    pub first_occurrence: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FirstOccIndex {
    level_length: usize,
    table: FxHashMap<Fingerprint, Candidate>,
    blocks: FxHashMap<usize, Fingerprint>,
}

impl FirstOccIndex {
    pub fn level_length(&self) -> usize {
        self.level_length
    }

    /// Distinct candidate fingerprints.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Registered aligned blocks.
    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.table.values()
    }

    pub fn block_starts(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.blocks.keys().copied().collect();
        v.sort_unstable();
        v
    }

    /// Raw recorded first occurrence of a registered block.
    pub fn first_occurrence_of(&self, block_start: usize) -> Option<usize> {
        let fp = self.blocks.get(&block_start)?;
        self.table[fp].first_occurrence
    }
}

impl FirstOccLookup for FirstOccIndex {
    fn query(&self, block_start: usize) -> Option<usize> {
        let fp = self.blocks.get(&block_start).unwrap_or_else(|| {
            panic!(
                "block at {block_start} (length {}) was not collected as a candidate",
                self.level_length
            )
        });
        let o = self.table[fp]
            .first_occurrence
            .expect("sliding pass has not run for this level");
        (o < block_start).then_some(o)
    }
}

/// 1-based starts of the prefix- and suffix-aligned blocks of `[start, end]`,
/// sorted and deduplicated.
pub fn aligned_block_starts(start: usize, end: usize, ell: usize) -> Vec<usize> {
    let len = end + 1 - start;
    let blocks = len / ell;
    let rem = len % ell;
    let mut v = Vec::with_capacity(2 * blocks);
    for k in 0..blocks {
        v.push(start + k * ell);
        v.push(start + rem + k * ell);
    }
    v.sort_unstable();
    v.dedup();
    v
}

/// Scans every interval once, front to back, and reports each aligned block
/// of length `ell` with its Horner value under `step`.
fn scan_aligned_blocks<S, T, F>(
    intervals: &[Interval],
    ell: usize,
    reader: &mut SequentialReader<S>,
    init: T,
    step: F,
    mut on_block: impl FnMut(usize, T),
) -> Result<()>
where
    S: Source,
    T: Copy,
    F: Fn(T, u8) -> T,
{
    let mut scan = reader.begin_scan();
    for iv in intervals {
        let len = iv.len();
        let blocks = len / ell;
        if blocks == 0 {
            continue;
        }
        let rem = len % ell;
        // Bytes left before the prefix (suffix) tiling stops (starts), and
        // bytes left in the current block of each.
        let mut prefix_left = blocks * ell;
        let mut suffix_skip = rem;
        let mut prefix_fill = ell;
        let mut suffix_fill = ell;
        let mut prefix = init;
        let mut suffix = init;
        let mut off = 0;
        scan.range(iv.start - 1, iv.end);
        loop {
            let chunk = scan.next_chunk()?;
            if chunk.is_empty() {
                break;
            }
            for &byte in chunk {
                off += 1;
                if prefix_left > 0 {
                    prefix_left -= 1;
                    prefix = step(prefix, byte);
                    prefix_fill -= 1;
                    if prefix_fill == 0 {
                        on_block(iv.start + off - ell, prefix);
                        prefix = init;
                        prefix_fill = ell;
                    }
                }
                if rem > 0 {
                    if suffix_skip > 0 {
                        suffix_skip -= 1;
                        continue;
                    }
                    suffix = step(suffix, byte);
                    suffix_fill -= 1;
                    if suffix_fill == 0 {
                        on_block(iv.start + off - ell, suffix);
                        suffix = init;
                        suffix_fill = ell;
                    }
                }
            }
        }
        assert_eq!(off, len, "interval inside input");
    }
    Ok(())
}

/// Fingerprints every aligned block of the given intervals at length `ell`.
///
/// The intervals must be disjoint, sorted by start, and at least `ell` long.
pub fn collect_candidates<S: Source>(
    intervals: &[Interval],
    ell: usize,
    cfg: &FingerprintConfig,
    reader: &mut SequentialReader<S>,
) -> Result<FirstOccIndex> {
    debug_assert!(intervals.windows(2).all(|w| w[0].end < w[1].start));
    let mut table: FxHashMap<Fingerprint, Candidate> = FxHashMap::default();
    let mut blocks = FxHashMap::default();
    scan_aligned_blocks(
        intervals,
        ell,
        reader,
        Fingerprint::EMPTY,
        |fp, b| cfg.push(fp, b),
        |start, fp| {
            if blocks.insert(start, fp).is_none() {
                table
                    .entry(fp)
                    .or_insert_with(|| Candidate {
                        fingerprint: fp,
                        starts: Vec::new(),
                        first_occurrence: None,
                    })
                    .starts
                    .push(start);
            }
        },
    )?;
    for c in table.values_mut() {
        c.starts.sort_unstable();
    }
    let bound: usize = intervals.iter().map(|iv| 2 * (iv.len() / ell)).sum();
    assert!(
        table.len() <= bound,
        "{} candidates exceed bound {bound}",
        table.len()
    );
    Ok(FirstOccIndex {
        level_length: ell,
        table,
        blocks,
    })
}

/// Bits of the fingerprint used by the membership prefilter.
const FILTER_BITS: u32 = 16;

/// One sliding window pass: records, for every candidate, the leftmost window
/// whose fingerprint equals it.
pub fn sliding_pass<S: Source>(
    index: &mut FirstOccIndex,
    reader: &mut SequentialReader<S>,
    cfg: &FingerprintConfig,
) -> Result<()> {
    let ell = index.level_length;
    let mut pass = reader.begin_pass();
    let n = pass.len();
    let mut unresolved = index
        .table
        .values()
        .filter(|c| c.first_occurrence.is_none())
        .count();
    if n < ell || unresolved == 0 {
        pass.finish()?;
        return Ok(());
    }

    let mask = (1u64 << FILTER_BITS) - 1;
    let mut filter = vec![0u64; 1 << (FILTER_BITS - 6)];
    for fp in index.table.keys() {
        let bit = fp.value() & mask;
        filter[(bit >> 6) as usize] |= 1 << (bit & 63);
    }

    let lead = cfg.pow(ell - 1);
    let mut fp = Fingerprint::EMPTY;
    for _ in 0..ell {
        fp = cfg.push(fp, pass.next_byte()?);
    }
    // Window starting at `p` (1-based) has fingerprint `fp`.
    let mut p = 1;
    'outer: loop {
        if record(index, &filter, mask, fp, p, &mut unresolved) {
            break;
        }
        if p + ell > n {
            break;
        }
        let (outs, ins) = pass.buffered_pair()?;
        let k = outs.len().min(n + 1 - ell - p);
        for (j, (&out, &inb)) in outs[..k].iter().zip(&ins[..k]).enumerate() {
            fp = cfg.roll_weighted(fp, out, inb, lead);
            if j + 1 < k && record(index, &filter, mask, fp, p + j + 1, &mut unresolved) {
                pass.consume_both(j + 1);
                break 'outer;
            }
        }
        pass.consume_both(k);
        p += k;
    }
    pass.finish()?;
    Ok(())
}

/// Records `p` as the first occurrence of `fp` if it is an unresolved
/// candidate. Returns true once nothing is left unresolved.
#[inline(always)]
fn record(
    index: &mut FirstOccIndex,
    filter: &[u64],
    mask: u64,
    fp: Fingerprint,
    p: usize,
    unresolved: &mut usize,
) -> bool {
    let bit = fp.value() & mask;
    if filter[(bit >> 6) as usize] & (1 << (bit & 63)) == 0 {
        return false;
    }
    if let Some(c) = index.table.get_mut(&fp) {
        if c.first_occurrence.is_none() {
            c.first_occurrence = Some(p);
            *unresolved -= 1;
        }
    }
    *unresolved == 0
}

/// Exact first occurrences of every substring of selected short lengths.
///
/// Substrings are packed as base-`sigma` numbers of their byte ranks, so the
/// keys are collision-free.
#[derive(Debug, Clone)]
pub struct ShortTable {
    threshold: f64,
    sigma: usize,
    rank: [u16; 256],
    entries: BTreeMap<usize, FxHashMap<u64, usize>>,
    dropped: Vec<usize>,
    mem_budget: usize,
    slack: u32,
}

/// Approximate bytes per table entry, hash map overhead included.
pub const SHORT_ENTRY_BYTES: usize = 24;

impl ShortTable {
    fn empty(mem_budget: usize, slack: u32) -> Self {
        ShortTable {
            threshold: 0.0,
            sigma: 0,
            rank: [0; 256],
            entries: BTreeMap::new(),
            dropped: Vec::new(),
            mem_budget,
            slack,
        }
    }

    pub fn covers(&self, ell: usize) -> bool {
        self.entries.contains_key(&ell)
    }

    pub fn covered_lengths(&self) -> Vec<usize> {
        self.entries.keys().copied().collect()
    }

    /// Lengths that qualified but did not fit in memory.
    pub fn dropped(&self) -> &[usize] {
        &self.dropped
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// `log_sigma(M) - c`; covered lengths are strictly below it.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn mem_budget(&self) -> usize {
        self.mem_budget
    }

    pub fn slack(&self) -> u32 {
        self.slack
    }

    pub fn entry_count(&self) -> usize {
        self.entries.values().map(|m| m.len()).sum()
    }

    /// Packs `bytes` into a key. Bytes must occur in the input.
    pub fn key_of(&self, bytes: &[u8]) -> u64 {
        bytes.iter().fold(0, |k, &b| self.push_key(k, b))
    }

    #[inline]
    fn push_key(&self, key: u64, byte: u8) -> u64 {
        key * self.sigma as u64 + self.rank[byte as usize] as u64
    }

    /// Leftmost start of the substring with this key, for a covered length.
    pub fn first_occurrence(&self, ell: usize, key: u64) -> Option<usize> {
        self.entries.get(&ell)?.get(&key).copied()
    }
}

/// Builds a [`ShortTable`] for the scheduled lengths below `log_sigma(M) - c`.
///
/// One pass measures the alphabet, a second fills the table. A zero budget
/// builds nothing and reads nothing.
pub fn build_short_table<S: Source>(
    reader: &mut SequentialReader<S>,
    schedule: &[usize],
    mem_budget: usize,
    slack: u32,
) -> Result<ShortTable> {
    let mut table = ShortTable::empty(mem_budget, slack);
    let n = reader.len();
    if mem_budget == 0 || n == 0 {
        return Ok(table);
    }

    let mut seen = [false; 256];
    {
        let mut pass = reader.begin_pass();
        for _ in 0..n {
            seen[pass.next_byte()? as usize] = true;
        }
        pass.finish()?;
    }
    let mut sigma = 0u16;
    for (b, &present) in seen.iter().enumerate() {
        if present {
            table.rank[b] = sigma;
            sigma += 1;
        }
    }
    table.sigma = sigma as usize;

    let log_base = (table.sigma.max(2) as f64).ln();
    table.threshold = (mem_budget as f64).ln() / log_base - slack as f64;
    let budget_bytes = mem_budget as f64 / (table.sigma.max(2) as f64).powi(slack as i32);
    let max_entries = (budget_bytes / SHORT_ENTRY_BYTES as f64) as usize;

    let mut covered: Vec<usize> = schedule
        .iter()
        .copied()
        .filter(|&l| l >= 2 && l <= n && (l as f64) < table.threshold)
        .collect();
    covered.sort_unstable();
    covered.dedup();
    // packed keys must fit in 64 bits
    covered.retain(|&l| (l as f64) * (table.sigma.max(1) as f64).log2() < 63.0);
    if covered.is_empty() || max_entries == 0 {
        table.dropped = covered;
        return Ok(table);
    }

    let mut maps: Vec<(usize, u64, FxHashMap<u64, usize>)> = covered
        .iter()
        .map(|&l| (l, (table.sigma as u64).pow(l as u32), FxHashMap::default()))
        .collect();
    let mut keys = vec![0u64; maps.len()];
    let mut total = 0usize;
    let mut pass = reader.begin_pass();
    for pos in 1..=n {
        let byte = pass.next_byte()?;
        for (slot, (ell, modulus, map)) in maps.iter_mut().enumerate() {
            let key = keys[slot] as u128 * table.sigma as u128 + table.rank[byte as usize] as u128;
            keys[slot] = (key % *modulus as u128) as u64;
            if pos >= *ell {
                let before = map.len();
                map.entry(keys[slot]).or_insert(pos + 1 - *ell);
                total += map.len() - before;
            }
        }
        while total > max_entries {
            // drop the longest remaining length, which has the most substrings
            let (ell, _, map) = maps.pop().expect("over budget with no lengths");
            keys.pop();
            total -= map.len();
            table.dropped.push(ell);
        }
        if maps.is_empty() {
            break;
        }
    }
    pass.finish()?;
    table.dropped.sort_unstable();
    table.entries = maps.into_iter().map(|(ell, _, map)| (ell, map)).collect();
    Ok(table)
}

/// Packed keys of the aligned blocks of one level answered from a
/// [`ShortTable`].
#[derive(Debug)]
pub struct ShortLevel<'a> {
    table: &'a ShortTable,
    ell: usize,
    keys: FxHashMap<usize, u64>,
}

impl ShortLevel<'_> {
    pub fn block_count(&self) -> usize {
        self.keys.len()
    }
}

impl FirstOccLookup for ShortLevel<'_> {
    fn query(&self, block_start: usize) -> Option<usize> {
        let key = self.keys.get(&block_start).unwrap_or_else(|| {
            panic!(
                "block at {block_start} (length {}) was not collected",
                self.ell
            )
        });
        let o = self
            .table
            .first_occurrence(self.ell, *key)
            .expect("every substring of a covered length is in the table");
        (o < block_start).then_some(o)
    }
}

/// Collects the packed keys of every aligned block at a covered length.
pub fn collect_short_blocks<'a, S: Source>(
    intervals: &[Interval],
    ell: usize,
    table: &'a ShortTable,
    reader: &mut SequentialReader<S>,
) -> Result<ShortLevel<'a>> {
    assert!(
        table.covers(ell),
        "length {ell} is not covered by the short table"
    );
    let mut keys = FxHashMap::default();
    scan_aligned_blocks(
        intervals,
        ell,
        reader,
        0u64,
        |k, b| table.push_key(k, b),
        |start, key| {
            keys.insert(start, key);
        },
    )?;
    Ok(ShortLevel { table, ell, keys })
}
