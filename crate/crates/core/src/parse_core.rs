//! Length schedule and the level-synchronized parsing driver.
//!
//! The recursive procedure `parse(i, j, l)` is run iteratively: every pending
//! call is an [`Interval`], and all intervals waiting at the same length are
//! resolved together after a single sliding pass at that length. Calls made
//! at the same length (the left part after a suffix copy, the right part after
//! a prefix copy) are resolved inside the level from the answers already
//! recorded, since their aligned blocks are aligned blocks of the parent
//! interval too.
//!
//! Positions in this module are 1-based and inclusive.

use std::cell::RefCell;
use std::collections::BTreeMap;

use crate::codec::verify_and_retry;
use crate::error::{Error, Result};
use crate::fingerprint::{FingerprintConfig, MERSENNE_61};
use crate::firstocc::{
    build_short_table, collect_candidates, collect_short_blocks, sliding_pass, FirstOccLookup,
    ShortTable,
};
use crate::iomodel::{IoConfig, IoStats, SequentialReader, Source};

/// Relative distance within which `n^epsilon` is snapped to the nearest
/// integer, so that e.g. `epsilon = ln 4 / ln 21` gives exactly 4.
const STEP_SNAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Params {
    /// Input length in bytes.
    pub n: usize,
    /// Requested epsilon, in `(0, 1]`.
    pub epsilon: f64,
    /// Run with `epsilon / 2`.
    pub halve_epsilon: bool,
    pub seed: u64,
    step: f64,
}

impl Params {
    pub fn new(n: usize, epsilon: f64, halve_epsilon: bool, seed: u64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "epsilon {epsilon} is outside (0, 1]"
            )));
        }
        let effective = if halve_epsilon {
            epsilon / 2.0
        } else {
            epsilon
        };
        let step = snap((n as f64).powf(effective));
        Ok(Params {
            n,
            epsilon,
            halve_epsilon,
            seed,
            step,
        })
    }

    /// Parameters with the shrink factor `n^epsilon` given directly.
    pub fn with_step(n: usize, step: f64, seed: u64) -> Result<Self> {
        if !(step > 1.0 && step <= n as f64) {
            return Err(Error::InvalidParams(format!(
                "step {step} is outside (1, n]"
            )));
        }
        let epsilon = step.ln() / (n as f64).ln();
        Ok(Params {
            n,
            epsilon,
            halve_epsilon: false,
            seed,
            step,
        })
    }

    /// The epsilon the driver actually runs with.
    pub fn effective_epsilon(&self) -> f64 {
        if self.halve_epsilon {
            self.epsilon / 2.0
        } else {
            self.epsilon
        }
    }

    /// The captured value of `n^epsilon`.
    pub fn step(&self) -> f64 {
        self.step
    }
}

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= STEP_SNAP * x {
        r
    } else {
        x
    }
}

/// `min(ceil(l * (1 - 1/step)), l - 1)`.
fn shrink_by(ell: usize, step: f64) -> usize {
    let l = ell as f64;
    let scaled = (l - l / step).ceil() as usize;
    scaled.min(ell - 1).max(1)
}

/// The next length after `ell` in the schedule.
pub fn shrink(ell: usize, params: &Params) -> Result<usize> {
    if ell < 2 {
        return Err(Error::InvalidParams(format!("cannot shrink length {ell}")));
    }
    Ok(shrink_by(ell, params.step))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LengthSchedule {
    pub lengths: Vec<usize>,
    pub step: f64,
}

impl LengthSchedule {
    pub fn len(&self) -> usize {
        self.lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lengths.is_empty()
    }
}

/// `n, f(n), f(f(n)), ..., 1`. Empty for `n = 0`.
pub fn build_schedule(params: &Params) -> LengthSchedule {
    let mut lengths = Vec::new();
    let mut ell = params.n;
    if ell > 0 {
        lengths.push(ell);
        while ell > 1 {
            ell = shrink_by(ell, params.step);
            lengths.push(ell);
        }
    }
    LengthSchedule {
        lengths,
        step: params.step,
    }
}

/// A pending call `parse(start, end, pending_length)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Interval {
    pub start: usize,
    pub end: usize,
    pub pending_length: usize,
}

impl Interval {
    pub fn new(start: usize, end: usize, pending_length: usize) -> Self {
        debug_assert!(start >= 1 && start <= end && pending_length >= 1);
        Interval {
            start,
            end,
            pending_length,
        }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One element of an LZ77-like parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phrase {
    /// `<0, byte>`
    Literal { start: usize, byte: u8 },
    /// `<source, length>`: `S[start..start+length-1]` equals
    /// `S[source..source+length-1]`, with `source < start`.
    Copy {
        start: usize,
        source: usize,
        length: usize,
    },
}

impl Phrase {
    pub fn start(&self) -> usize {
        match *self {
            Phrase::Literal { start, .. } | Phrase::Copy { start, .. } => start,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            Phrase::Literal { .. } => 1,
            Phrase::Copy { length, .. } => length,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Encoded source field: 0 for literals.
    pub fn source(&self) -> usize {
        match *self {
            Phrase::Literal { .. } => 0,
            Phrase::Copy { source, .. } => source,
        }
    }

    pub fn end(&self) -> usize {
        self.start() + self.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Parse {
    pub n: usize,
    pub phrases: Vec<Phrase>,
}

impl Parse {
    pub fn len(&self) -> usize {
        self.phrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phrases.is_empty()
    }

    /// `(source, length)` pairs, with literals shown as `(0, byte)`.
    pub fn encoded_pairs(&self) -> Vec<(usize, usize)> {
        self.phrases
            .iter()
            .map(|p| match *p {
                Phrase::Literal { byte, .. } => (0, byte as usize),
                Phrase::Copy { source, length, .. } => (source, length),
            })
            .collect()
    }
}

/// Options that do not change the meaning of the parse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub modulus: u64,
    pub io: IoConfig,
    /// Short-substring table; `None` disables it.
    pub short_table: Option<ShortTableConfig>,
    /// Total attempts before giving up on verification.
    pub max_retries: u32,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            modulus: MERSENNE_61,
            io: IoConfig::default(),
            short_table: None,
            max_retries: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShortTableConfig {
    /// Internal memory `M`, in bytes.
    pub mem_budget: usize,
    /// The constant `c`.
    pub slack: u32,
}

impl ShortTableConfig {
    pub const DEFAULT_SLACK: u32 = 1;

    pub fn new(mem_budget: usize) -> Self {
        ShortTableConfig {
            mem_budget,
            slack: Self::DEFAULT_SLACK,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub schedule_length: usize,
    /// Levels where at least one interval was long enough to need answers.
    pub active_levels: usize,
    pub sliding_passes: usize,
    /// Levels answered from the short-substring table instead of a pass.
    pub short_table_levels: usize,
    pub short_table_lengths: Vec<usize>,
    pub short_table_dropped: Vec<usize>,
    /// Distinct bytes, when measured.
    pub sigma: Option<usize>,
    /// Largest per-level candidate table.
    pub candidates_max: usize,
    pub candidates_total: usize,
    /// Attempts used, including the successful one.
    pub attempts: u32,
    /// I/O counters of the successful attempt.
    pub io: IoStats,
}

/// One first-occurrence answer consulted by the driver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lookup {
    pub block_start: usize,
    pub length: usize,
    pub answer: Option<usize>,
}

/// Collects phrases keyed by start position.
#[derive(Debug, Default)]
pub struct PhraseAccumulator {
    pending: BTreeMap<usize, Pending>,
}

#[derive(Debug, Clone, Copy)]
enum Pending {
    Copy { source: usize, length: usize },
    Literals { end: usize },
}

impl PhraseAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_copy(&mut self, start: usize, source: usize, length: usize) {
        debug_assert!(source < start);
        let prev = self.pending.insert(start, Pending::Copy { source, length });
        debug_assert!(prev.is_none(), "two phrases start at {start}");
    }

    /// Literal phrases for every position of `[start, end]`; bytes are read
    /// in [`finish`](Self::finish).
    pub fn push_literals(&mut self, start: usize, end: usize) {
        let prev = self.pending.insert(start, Pending::Literals { end });
        debug_assert!(prev.is_none(), "two phrases start at {start}");
    }

    /// Emits phrases in order, reading literal bytes with one forward scan.
    pub fn finish<S: Source>(self, n: usize, reader: &mut SequentialReader<S>) -> Result<Parse> {
        let mut phrases = Vec::with_capacity(self.pending.len());
        let mut scan = reader.begin_scan();
        let mut next = 1;
        for (start, pending) in self.pending {
            assert_eq!(start, next, "phrases do not tile the input at {start}");
            match pending {
                Pending::Copy { source, length } => {
                    phrases.push(Phrase::Copy {
                        start,
                        source,
                        length,
                    });
                    next = start + length;
                }
                Pending::Literals { end } => {
                    scan.range(start - 1, end);
                    for pos in start..=end {
                        let byte = scan.next_byte()?.expect("literal run inside input");
                        phrases.push(Phrase::Literal { start: pos, byte });
                    }
                    next = end + 1;
                }
            }
        }
        assert_eq!(next, n + 1, "phrases do not cover the input");
        Ok(Parse { n, phrases })
    }
}

/// Answers nothing; used at levels where no interval is long enough to ask.
struct NoAnswers;

impl FirstOccLookup for NoAnswers {
    fn query(&self, block_start: usize) -> Option<usize> {
        panic!("no candidates were collected at this level (asked for block at {block_start})")
    }
}

struct Traced<'a> {
    inner: &'a dyn FirstOccLookup,
    length: usize,
    log: RefCell<&'a mut Vec<Lookup>>,
}

impl FirstOccLookup for Traced<'_> {
    fn query(&self, block_start: usize) -> Option<usize> {
        let answer = self.inner.query(block_start);
        self.log.borrow_mut().push(Lookup {
            block_start,
            length: self.length,
            answer,
        });
        answer
    }
}

/// Resolves one pending call at length `iv.pending_length`.
///
/// `next_length` is `f(l)`; calls demoted to it are pushed onto `work`.
/// Copies found at this length are emitted into `out`, and the same-length
/// calls they spawn are resolved here as well.
pub fn resolve_interval(
    iv: Interval,
    next_length: usize,
    occ: &dyn FirstOccLookup,
    out: &mut PhraseAccumulator,
    work: &mut Vec<Interval>,
) {
    let ell = iv.pending_length;
    if ell == 1 {
        out.push_literals(iv.start, iv.end);
        return;
    }
    let mut stack = vec![(iv.start, iv.end)];
    while let Some((i, j)) = stack.pop() {
        if i > j {
            continue;
        }
        let len = j + 1 - i;
        if len < ell {
            work.push(Interval::new(i, j, next_length));
            continue;
        }
        let suffix = j + 1 - ell;
        if let Some(source) = occ.query(suffix) {
            out.push_copy(suffix, source, ell);
            stack.push((i, suffix - 1));
            continue;
        }
        let blocks = len / ell;
        let hit = (0..blocks).find_map(|k| {
            let block = i + k * ell;
            occ.query(block).map(|source| (block, source))
        });
        match hit {
            Some((block, source)) => {
                if block > i {
                    work.push(Interval::new(i, block - 1, next_length));
                }
                out.push_copy(block, source, ell);
                stack.push((block + ell, j));
            }
            None => work.push(Interval::new(i, j, next_length)),
        }
    }
}

/// One unverified run of the driver.
///
/// When `trace` is given, every first-occurrence answer the driver consults is
/// appended to it.
pub fn parse_once<S: Source>(
    reader: &mut SequentialReader<S>,
    params: &Params,
    opts: &ParseOptions,
    attempt: u32,
    mut trace: Option<&mut Vec<Lookup>>,
) -> Result<(Parse, RunStats)> {
    let n = reader.len();
    if n != params.n {
        return Err(Error::InvalidParams(format!(
            "parameters are for {} bytes but the input has {n}",
            params.n
        )));
    }
    let schedule = build_schedule(params);
    let mut stats = RunStats {
        schedule_length: schedule.len(),
        attempts: 1,
        ..RunStats::default()
    };
    if n == 0 {
        stats.io = reader.snapshot_stats();
        return Ok((Parse::default(), stats));
    }

    let cfg = FingerprintConfig::from_seed(opts.modulus, params.seed, attempt)?
        .with_lengths(&schedule.lengths);
    let short: Option<ShortTable> = match opts.short_table {
        Some(st) if st.mem_budget > 0 => {
            let table = build_short_table(reader, &schedule.lengths, st.mem_budget, st.slack)?;
            stats.sigma = Some(table.sigma());
            stats.short_table_lengths = table.covered_lengths();
            stats.short_table_dropped = table.dropped().to_vec();
            Some(table)
        }
        _ => None,
    };

    let mut out = PhraseAccumulator::new();
    let mut intervals = vec![Interval::new(1, n, n)];
    for (level, &ell) in schedule.lengths.iter().enumerate() {
        if intervals.is_empty() {
            break;
        }
        intervals.sort_unstable();
        let next_length = schedule.lengths.get(level + 1).copied().unwrap_or(1);
        let mut work = Vec::new();

        let active: Vec<Interval> = if ell > 1 {
            intervals
                .iter()
                .copied()
                .filter(|iv| iv.len() >= ell)
                .collect()
        } else {
            Vec::new()
        };

        let index;
        let short_level;
        let answers: &dyn FirstOccLookup = if active.is_empty() {
            &NoAnswers
        } else {
            stats.active_levels += 1;
            match short.as_ref().filter(|t| t.covers(ell)) {
                Some(table) => {
                    short_level = collect_short_blocks(&active, ell, table, reader)?;
                    stats.short_table_levels += 1;
                    stats.candidates_max = stats.candidates_max.max(short_level.block_count());
                    stats.candidates_total += short_level.block_count();
                    &short_level
                }
                None => {
                    let mut built = collect_candidates(&active, ell, &cfg, reader)?;
                    sliding_pass(&mut built, reader, &cfg)?;
                    stats.sliding_passes += 1;
                    stats.candidates_max = stats.candidates_max.max(built.len());
                    stats.candidates_total += built.len();
                    index = built;
                    &index
                }
            }
        };

        for iv in intervals {
            let iv = Interval {
                pending_length: ell,
                ..iv
            };
            match trace.as_deref_mut() {
                Some(log) => {
                    let traced = Traced {
                        inner: answers,
                        length: ell,
                        log: RefCell::new(log),
                    };
                    resolve_interval(iv, next_length, &traced, &mut out, &mut work);
                }
                None => resolve_interval(iv, next_length, answers, &mut out, &mut work),
            }
        }
        intervals = work;
    }
    debug_assert!(intervals.is_empty());

    let parse = out.finish(n, reader)?;
    stats.io = reader.snapshot_stats();
    Ok((parse, stats))
}

/// Parses `source`, verifying the result and retrying with a fresh
/// fingerprint base on failure.
pub fn parse<S: Source + ?Sized>(
    source: &S,
    params: &Params,
    opts: &ParseOptions,
) -> Result<(Parse, RunStats)> {
    let (parse, mut stats, attempts) = verify_and_retry(
        |attempt| {
            let mut reader = SequentialReader::new(source, opts.io)?;
            parse_once(&mut reader, params, opts, attempt, None)
        },
        source,
        opts.max_retries,
    )?;
    stats.attempts = attempts;
    Ok((parse, stats))
}
