//! Acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`. Exits non-zero if any line is
//! `[FAIL]`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use lzap::codec::{self, deserialize, encode, verify};
use lzap::fingerprint::MERSENNE_61;
use lzap::oracle::{exact_lz77, first_occurrence_bruteforce, Lz77Variant, DEFAULT_ORACLE_LIMIT};
use lzap::{
    build_schedule, parse, parse_once, FileSource, IoConfig, Params, Parse, ParseOptions, Phrase,
    SequentialReader, ShortTableConfig,
};

const EXAMPLE: &[u8] = b"ababbabbaabbabbaababa";
const EXAMPLE_PAIRS: [(usize, usize); 6] = [
    (0, b'a' as usize),
    (0, b'b' as usize),
    (1, 2),
    (2, 5),
    (3, 9),
    (1, 3),
];

const EXAMPLE_BUDGET: Duration = Duration::from_secs(1);
const SUITE_BUDGET: Duration = Duration::from_secs(300);
const DESK_BUDGET: Duration = Duration::from_secs(60);

const SUITE_EPSILONS: [f64; 3] = [0.25, 0.5, 1.0];
const SUITE_ALPHABETS: [u8; 4] = [1, 2, 4, 26];
const SUITE_MAX_LEN: usize = 10_000;
const SUITE_RANDOM_PER_CELL: usize = 85;

const RATIO_ENVELOPE: f64 = 10.0;

const EXHAUSTIVE_MAX_LEN: usize = 18;
const SAMPLED_MAX_LEN: usize = 64;
const SAMPLED_COUNT: usize = 10_000;

const SMALL_MODULUS: u64 = 251;
const COLLISION_TRIALS: u64 = 100;
const COLLISION_REQUIRED: usize = 95;
const COLLISION_ATTEMPTS: u32 = 8;

const MUTATIONS: usize = 100;

const DESK_N: usize = 100_000;
const DESK_EPSILON: f64 = 0.5;
const DESK_BLOCK: usize = 4096;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn opts() -> ParseOptions {
    ParseOptions::default()
}

fn random_string(rng: &mut ChaCha8Rng, len: usize, sigma: u8) -> Vec<u8> {
    (0..len).map(|_| b'a' + rng.gen_range(0..sigma)).collect()
}

/// `copies` copies of a random `base_len`-byte string, each byte replaced by a
/// random symbol with probability `rate`.
fn mutated_repeats(
    rng: &mut ChaCha8Rng,
    base_len: usize,
    copies: usize,
    rate: f64,
    sigma: u8,
) -> Vec<u8> {
    let base = random_string(rng, base_len, sigma);
    let mut out = Vec::with_capacity(base_len * copies);
    for _ in 0..copies {
        for &b in &base {
            out.push(if rng.gen_bool(rate) {
                b'a' + rng.gen_range(0..sigma)
            } else {
                b
            });
        }
    }
    out
}

fn log_uniform_len(rng: &mut ChaCha8Rng, max: usize) -> usize {
    let x: f64 = rng.gen_range(0.0..((max + 1) as f64).ln());
    (x.exp() as usize).saturating_sub(1).min(max)
}

fn pass_bound(n: usize, step: f64) -> f64 {
    (step * (n as f64).ln()).ceil() + step + 2.0
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let mut problems = Vec::new();
    let runs = [
        ("step 4", Params::with_step(EXAMPLE.len(), 4.0, 0)),
        (
            "eps ln4/ln21",
            Params::new(EXAMPLE.len(), 4f64.ln() / 21f64.ln(), false, 0),
        ),
    ];
    for (name, params) in runs {
        match params.and_then(|p| parse(EXAMPLE, &p, &opts())) {
            Ok((p, _)) => {
                let phrases: Vec<&[u8]> = p
                    .phrases
                    .iter()
                    .map(|ph| &EXAMPLE[ph.start() - 1..ph.end()])
                    .collect();
                let want: Vec<&[u8]> = vec![b"a", b"b", b"ab", b"babba", b"abbabbaab", b"aba"];
                if p.encoded_pairs() != EXAMPLE_PAIRS || phrases != want {
                    problems.push(format!("{name}: got {:?}", p.encoded_pairs()));
                }
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    let elapsed = started.elapsed();
    if elapsed >= EXAMPLE_BUDGET {
        problems.push(format!("took {elapsed:?}"));
    }
    if problems.is_empty() {
        Outcome::new(true, format!("a|b|ab|babba|abbabbaab|aba in {elapsed:?}"))
    } else {
        Outcome::new(false, problems.join("; "))
    }
}

fn criterion_2() -> Outcome {
    let want = vec![21, 16, 12, 9, 7, 6, 5, 4, 3, 2, 1];
    let mut got = Vec::new();
    for p in [
        Params::with_step(21, 4.0, 0),
        Params::new(21, 4f64.ln() / 21f64.ln(), false, 0),
    ] {
        match p {
            Ok(p) => got.push(build_schedule(&p).lengths),
            Err(e) => return Outcome::new(false, e.to_string()),
        }
    }
    let pass = got.iter().all(|g| *g == want);
    Outcome::new(pass, format!("{:?}", got[0]))
}

fn criterion_3() -> Outcome {
    match exact_lz77(EXAMPLE, Lz77Variant::Classic, DEFAULT_ORACLE_LIMIT) {
        Ok(p) => {
            let got: Vec<String> = p
                .phrase_strings(EXAMPLE)
                .iter()
                .map(|s| String::from_utf8_lossy(s).into_owned())
                .collect();
            let pass = got == ["a", "b", "abb", "abbaa", "bbabbaaba", "ba"] && p.stats.z == 6;
            Outcome::new(pass, format!("{} z={}", got.join("|"), p.stats.z))
        }
        Err(e) => Outcome::new(false, e.to_string()),
    }
}

/// One parsed string of the random suite.
struct SuiteRun {
    n: usize,
    epsilon: f64,
    sigma: u8,
    step: f64,
    schedule_length: usize,
    sliding_passes: usize,
    active_levels: usize,
    phrases: usize,
    z_classic: Option<usize>,
    z_prefix: Option<usize>,
    round_trip: Result<(), String>,
}

struct Suite {
    runs: Vec<SuiteRun>,
    elapsed: Duration,
}

fn run_one(s: &[u8], epsilon: f64, sigma: u8, seed: u64) -> SuiteRun {
    let params = Params::new(s.len(), epsilon, false, seed).expect("valid params");
    let step = build_schedule(&params).step;
    let (round_trip, stats, phrases) = match parse(s, &params, &opts()) {
        Ok((p, stats)) => {
            let stream = encode(&p);
            let rt = match codec::decode(&stream) {
                Ok(bytes) if bytes == s => match deserialize(&stream).map(|q| verify(&q, s)) {
                    Ok(Ok(None)) => Ok(()),
                    Ok(Ok(Some(m))) => Err(format!("verify: {m}")),
                    Ok(Err(e)) => Err(format!("verify: {e}")),
                    Err(e) => Err(format!("deserialize: {e}")),
                },
                Ok(_) => Err("decoded bytes differ".to_string()),
                Err(e) => Err(format!("decode: {e}")),
            };
            (rt, Some(stats), p.len())
        }
        Err(e) => (Err(format!("parse: {e}")), None, 0),
    };
    let z = |v| {
        (s.len() <= DEFAULT_ORACLE_LIMIT).then(|| {
            exact_lz77(s, v, DEFAULT_ORACLE_LIMIT)
                .expect("within limit")
                .stats
                .z
        })
    };
    let stats = stats.unwrap_or_default();
    SuiteRun {
        n: s.len(),
        epsilon,
        sigma,
        step,
        schedule_length: stats.schedule_length,
        sliding_passes: stats.sliding_passes,
        active_levels: stats.active_levels,
        phrases,
        z_classic: z(Lz77Variant::Classic),
        z_prefix: z(Lz77Variant::PrefixOnly),
        round_trip,
    }
}

fn run_suite() -> Suite {
    let started = Instant::now();
    let mut jobs = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for &sigma in &SUITE_ALPHABETS {
        for &eps in &SUITE_EPSILONS {
            let mut lens = vec![0, 1, 2, SUITE_MAX_LEN];
            lens.extend(
                (0..SUITE_RANDOM_PER_CELL).map(|_| log_uniform_len(&mut rng, SUITE_MAX_LEN)),
            );
            for len in lens {
                let s = random_string(&mut rng, len, sigma);
                jobs.push((s, eps, sigma, rng.gen::<u64>()));
            }
        }
    }
    let workers = std::thread::available_parallelism().map_or(4, |n| n.get());
    let chunk = jobs.len().div_ceil(workers);
    let runs = std::thread::scope(|scope| {
        let handles: Vec<_> = jobs
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|(s, eps, sigma, seed)| run_one(s, *eps, *sigma, *seed))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("suite worker"))
            .collect()
    });
    Suite {
        runs,
        elapsed: started.elapsed(),
    }
}

fn criterion_4(suite: &Suite) -> Outcome {
    let failures: Vec<String> = suite
        .runs
        .iter()
        .filter_map(|r| {
            r.round_trip
                .as_ref()
                .err()
                .map(|e| format!("n={} sigma={} eps={}: {e}", r.n, r.sigma, r.epsilon))
        })
        .collect();
    let mut pass = failures.is_empty() && suite.runs.len() >= 1000;
    let mut detail = format!(
        "{} strings, {} failures, {:.1?}",
        suite.runs.len(),
        failures.len(),
        suite.elapsed
    );
    if suite.elapsed >= SUITE_BUDGET {
        pass = false;
        detail.push_str(" (over budget)");
    }
    if let Some(first) = failures.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(pass, detail)
}

fn criterion_5(suite: &Suite) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    for r in suite.runs.iter().filter(|r| r.round_trip.is_ok()) {
        if let (Some(zc), Some(zp)) = (r.z_classic, r.z_prefix) {
            checked += 1;
            if r.phrases < zc || r.phrases < zp {
                violations.push(format!(
                    "n={} sigma={} eps={}: {} < z={zc}/{zp}",
                    r.n, r.sigma, r.epsilon, r.phrases
                ));
            }
        }
    }
    let pass = violations.is_empty() && checked > 0;
    let mut detail = format!(
        "{checked} strings checked against both greedy variants, {} violations",
        violations.len()
    );
    if let Some(first) = violations.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(pass, detail)
}

#[derive(Serialize)]
struct RatioRecord {
    file: String,
    n: usize,
    epsilon: f64,
    phrases: usize,
    z: usize,
    ratio: f64,
    envelope: f64,
}

fn criterion_6() -> (Outcome, Vec<(usize, f64, usize, usize)>) {
    let mut records = Vec::new();
    let mut pass_runs = Vec::new();
    let mut problems = Vec::new();
    for sigma in [2u8, 4, 26] {
        let file_seed = sigma as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(file_seed);
        let s = mutated_repeats(&mut rng, 1024, 50, 0.01, sigma);
        let name = format!("repeats-sigma{sigma}");
        let z = exact_lz77(&s, Lz77Variant::Classic, DEFAULT_ORACLE_LIMIT)
            .expect("corpus fits the oracle")
            .stats
            .z;
        for &eps in &SUITE_EPSILONS {
            let params = Params::new(s.len(), eps, false, file_seed).expect("valid params");
            match parse(s.as_slice(), &params, &opts()) {
                Ok((p, stats)) => {
                    let ratio = p.len() as f64 / z as f64;
                    let envelope = RATIO_ENVELOPE / eps;
                    if ratio > envelope {
                        problems.push(format!("{name} eps={eps}: {ratio:.2} > {envelope}"));
                    }
                    pass_runs.push((
                        s.len(),
                        build_schedule(&params).step,
                        stats.schedule_length,
                        stats.sliding_passes,
                    ));
                    records.push(RatioRecord {
                        file: name.clone(),
                        n: s.len(),
                        epsilon: eps,
                        phrases: p.len(),
                        z,
                        ratio,
                        envelope,
                    });
                }
                Err(e) => problems.push(format!("{name} eps={eps}: {e}")),
            }
        }
    }
    let report =
        std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("approximation_ratios.json");
    if let Err(e) = std::fs::write(
        &report,
        serde_json::to_string_pretty(&records).expect("records serialize"),
    ) {
        problems.push(format!("writing {}: {e}", report.display()));
    }
    let mut worst: BTreeMap<String, f64> = BTreeMap::new();
    for r in &records {
        let w = worst.entry(format!("{}", r.epsilon)).or_insert(0.0);
        *w = w.max(r.ratio);
    }
    let summary: Vec<String> = worst
        .iter()
        .map(|(e, r)| format!("eps {e}: {r:.2}"))
        .collect();
    let outcome = if problems.is_empty() {
        Outcome::new(
            true,
            format!(
                "max phrases/z {} (envelope 10/eps), {} runs archived in {}",
                summary.join(", "),
                records.len(),
                report.display()
            ),
        )
    } else {
        Outcome::new(false, problems.join("; "))
    };
    (outcome, pass_runs)
}

fn criterion_7(suite: &Suite, extra: &[(usize, f64, usize, usize)]) -> Outcome {
    let mut checked = 0;
    let mut violations = Vec::new();
    let runs = suite
        .runs
        .iter()
        .filter(|r| r.round_trip.is_ok())
        .map(|r| {
            (
                r.n,
                r.step,
                r.schedule_length,
                r.sliding_passes,
                Some(r.active_levels),
            )
        })
        .chain(
            extra
                .iter()
                .map(|&(n, step, len, passes)| (n, step, len, passes, None)),
        );
    for (n, step, schedule_length, passes, active) in runs {
        checked += 1;
        let bound = pass_bound(n, step);
        if passes > schedule_length
            || schedule_length as f64 > bound
            || active.is_some_and(|a| a != passes)
        {
            violations.push(format!(
                "n={n} step={step}: passes {passes}, schedule {schedule_length}, bound {bound}"
            ));
        }
    }
    let mut detail = format!("{checked} runs, {} violations", violations.len());
    if let Some(first) = violations.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(violations.is_empty() && checked > 0, detail)
}

/// Parses `s` once with lookup tracing and counts disagreements with the
/// brute-force first occurrence.
fn check_lookups(s: &[u8], epsilon: f64, short: bool, lookups: &mut usize) -> Result<(), String> {
    let params = Params::new(s.len(), epsilon, false, s.len() as u64).map_err(|e| e.to_string())?;
    let options = ParseOptions {
        short_table: short.then(|| ShortTableConfig::new(1 << 16)),
        ..opts()
    };
    let mut reader = SequentialReader::new(s, IoConfig::default()).map_err(|e| e.to_string())?;
    let mut trace = Vec::new();
    parse_once(&mut reader, &params, &options, 0, Some(&mut trace)).map_err(|e| e.to_string())?;
    for l in &trace {
        *lookups += 1;
        let want =
            first_occurrence_bruteforce(s, l.block_start, l.length).map_err(|e| e.to_string())?;
        if want != l.answer {
            return Err(format!(
                "{} eps={epsilon}: block ({}, {}) answered {:?}, first occurrence {:?}",
                String::from_utf8_lossy(s),
                l.block_start,
                l.length,
                l.answer,
                want
            ));
        }
    }
    Ok(())
}

fn criterion_8() -> Outcome {
    let exhaustive = std::thread::scope(|scope| {
        let handles: Vec<_> = (1..=EXHAUSTIVE_MAX_LEN)
            .map(|len| {
                scope.spawn(move || {
                    let mut strings = 0usize;
                    let mut lookups = 0usize;
                    let mut errors = Vec::new();
                    for bits in 0u32..(1 << len) {
                        let s: Vec<u8> = (0..len)
                            .map(|k| if bits >> k & 1 == 1 { b'b' } else { b'a' })
                            .collect();
                        let eps = SUITE_EPSILONS[bits as usize % SUITE_EPSILONS.len()];
                        strings += 1;
                        if let Err(e) = check_lookups(&s, eps, false, &mut lookups) {
                            errors.push(e);
                        }
                    }
                    (strings, lookups, errors)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("exhaustive worker"))
            .collect::<Vec<_>>()
    });
    let mut strings: usize = exhaustive.iter().map(|e| e.0).sum();
    let mut lookups: usize = exhaustive.iter().map(|e| e.1).sum();
    let mut errors: Vec<String> = exhaustive.into_iter().flat_map(|e| e.2).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for k in 0..SAMPLED_COUNT {
        let len = rng.gen_range(EXHAUSTIVE_MAX_LEN + 1..=SAMPLED_MAX_LEN);
        let s = random_string(&mut rng, len, 2);
        let eps = SUITE_EPSILONS[k % SUITE_EPSILONS.len()];
        strings += 1;
        if let Err(e) = check_lookups(&s, eps, k % 2 == 1, &mut lookups) {
            errors.push(e);
        }
    }
    let mut detail = format!(
        "{strings} binary strings, {lookups} lookups, {} violations",
        errors.len()
    );
    if let Some(first) = errors.first() {
        detail.push_str(&format!("; first: {first}"));
    }
    Outcome::new(errors.is_empty(), detail)
}

/// A random 10-byte motif over 26 letters, repeated to 10^4 bytes.
fn collision_input() -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let motif = random_string(&mut rng, 10, 26);
    motif.iter().cycle().take(10_000).copied().collect()
}

fn criterion_9() -> Outcome {
    let s = collision_input();
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for eps in [0.25, 0.5] {
        let mut ok = 0;
        let mut worst = 0;
        let mut wide_attempts = 0;
        for seed in 0..COLLISION_TRIALS {
            let params = Params::new(s.len(), eps, false, seed).expect("valid params");
            let small = ParseOptions {
                modulus: SMALL_MODULUS,
                max_retries: COLLISION_ATTEMPTS,
                ..opts()
            };
            if let Ok((_, stats)) = parse(s.as_slice(), &params, &small) {
                ok += 1;
                worst = worst.max(stats.attempts);
            }
            let wide = ParseOptions {
                modulus: MERSENNE_61,
                max_retries: 1,
                ..opts()
            };
            match parse(s.as_slice(), &params, &wide) {
                Ok((_, stats)) if stats.attempts == 1 => wide_attempts += 1,
                Ok((_, stats)) => problems.push(format!(
                    "eps {eps} seed {seed}: 2^61-1 took {} attempts",
                    stats.attempts
                )),
                Err(e) => problems.push(format!("eps {eps} seed {seed}: 2^61-1 failed: {e}")),
            }
        }
        if ok < COLLISION_REQUIRED {
            problems.push(format!(
                "eps {eps}: modulus 251 succeeded in {ok}/{COLLISION_TRIALS}"
            ));
        }
        summary.push(format!(
            "eps {eps}: mod 251 {ok}/{COLLISION_TRIALS} (max {worst} attempts), 2^61-1 first try {wide_attempts}/{COLLISION_TRIALS}"
        ));
    }
    let detail = format!("period-10 input; {}", summary.join("; "));
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", problems.join("; ")))
    }
}

/// Overwrites one field of `p` with a different value.
fn mutate_field(p: &mut Parse, rng: &mut ChaCha8Rng) -> &'static str {
    let n = p.n;
    match rng.gen_range(0..10) {
        0 => {
            p.n = loop {
                let v = rng.gen_range(0..=n + 8);
                if v != n {
                    break v;
                }
            };
            "n"
        }
        1 => {
            if rng.gen_bool(0.5) && !p.phrases.is_empty() {
                p.phrases.pop();
            } else {
                let start = p.phrases.last().map_or(1, |ph| ph.end() + 1);
                p.phrases.push(Phrase::Literal { start, byte: b'z' });
            }
            "count"
        }
        _ => {
            let k = rng.gen_range(0..p.phrases.len());
            match &mut p.phrases[k] {
                Phrase::Literal { byte, .. } => {
                    *byte = byte.wrapping_add(rng.gen_range(1..=255));
                    "literal byte"
                }
                Phrase::Copy {
                    source,
                    length,
                    start,
                } => {
                    if rng.gen_bool(0.5) {
                        let old = *source;
                        *source = loop {
                            let v = rng.gen_range(1..=*start + 2);
                            if v != old {
                                break v;
                            }
                        };
                        "copy source"
                    } else {
                        let old = *length;
                        *length = loop {
                            let v = rng.gen_range(0..=old + 4);
                            if v != old {
                                break v;
                            }
                        };
                        "copy length"
                    }
                }
            }
        }
    }
}

/// Whether `stream` fails to decode, or decodes but fails verification.
fn detected(stream: &[u8], original: &[u8]) -> bool {
    if codec::decode(stream).is_err() {
        return true;
    }
    match deserialize(stream) {
        Err(_) => true,
        Ok(p) => !matches!(verify(&p, original), Ok(None)),
    }
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut inputs = vec![EXAMPLE.to_vec()];
    for sigma in [2u8, 4, 26] {
        inputs.push(mutated_repeats(&mut rng, 64, 8, 0.05, sigma));
    }
    let parses: Vec<(Vec<u8>, Vec<u8>)> = inputs
        .into_iter()
        .map(|s| {
            let params = Params::new(s.len(), 0.5, false, 0).expect("valid params");
            let (p, _) = parse(s.as_slice(), &params, &opts()).expect("clean parse");
            (s, encode(&p))
        })
        .collect();

    let mut missed = Vec::new();
    let mut equivalent = 0;
    let mut kinds: BTreeMap<&str, usize> = BTreeMap::new();
    let mut applied = 0;
    while applied < MUTATIONS {
        let (s, stream) = &parses[rng.gen_range(0..parses.len())];
        let mut p = deserialize(stream).expect("valid stream");
        let kind = mutate_field(&mut p, &mut rng);
        let mutated = encode(&p);
        if codec::decode(&mutated).as_deref() == Ok(s.as_slice()) && p.n == s.len() {
            // A different source with identical content, or an equivalent
            // split: decodes to the same bytes, so not a corruption.
            equivalent += 1;
            continue;
        }
        applied += 1;
        *kinds.entry(kind).or_default() += 1;
        if !detected(&mutated, s) {
            missed.push(format!("{kind} on n={}", s.len()));
        }
    }
    let kinds: Vec<String> = kinds.iter().map(|(k, v)| format!("{k} {v}")).collect();
    let detail = format!(
        "{} mutations ({}), {} missed, {equivalent} content-preserving resampled",
        applied,
        kinds.join(", "),
        missed.len()
    );
    Outcome::new(missed.is_empty(), detail)
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let inputs = [
        (
            "repeats",
            mutated_repeats(&mut rng, 1024, DESK_N / 1024 + 1, 0.01, 26),
        ),
        ("random", random_string(&mut rng, DESK_N, 4)),
    ];
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return Outcome::new(false, e.to_string()),
    };
    let per_pass = DESK_N.div_ceil(DESK_BLOCK) as u64;
    let mut problems = Vec::new();
    let mut summary = Vec::new();
    for (name, mut s) in inputs {
        s.truncate(DESK_N);
        let path = dir.path().join(name);
        std::fs::write(&path, &s).expect("write input");
        let started = Instant::now();
        let result = FileSource::open(&path)
            .map_err(lzap::Error::from)
            .and_then(|src| {
                let params = Params::new(DESK_N, DESK_EPSILON, false, 0)?;
                let options = ParseOptions {
                    io: IoConfig::with_block_size(DESK_BLOCK),
                    ..opts()
                };
                let (p, stats) = parse(&src, &params, &options)?;
                Ok((encode(&p), stats))
            });
        let elapsed = started.elapsed();
        match result {
            Ok((stream, stats)) => {
                if elapsed >= DESK_BUDGET {
                    problems.push(format!("{name}: {elapsed:?}"));
                }
                if stats.io.blocks_read != stats.io.passes * per_pass {
                    problems.push(format!(
                        "{name}: {} blocks over {} passes, expected {per_pass} each",
                        stats.io.blocks_read, stats.io.passes
                    ));
                }
                if codec::decode(&stream).as_deref() != Ok(s.as_slice()) {
                    problems.push(format!("{name}: round trip failed"));
                }
                summary.push(format!(
                    "{name} {elapsed:.1?}, {} passes x {per_pass} blocks",
                    stats.io.passes
                ));
            }
            Err(e) => problems.push(format!("{name}: {e}")),
        }
    }
    let detail = format!("n=10^5 eps=0.5 B={DESK_BLOCK}: {}", summary.join("; "));
    if problems.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::new(false, format!("{detail}; {}", problems.join("; ")))
    }
}

fn main() {
    let mut failed = 0;
    let mut report = |k: usize, o: Outcome, took: Duration| {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {k}: {} [{took:.1?}]", o.detail);
        failed += usize::from(!o.pass);
    };
    let timed = |f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        (o, t.elapsed())
    };
    for (k, f) in [criterion_1, criterion_2, criterion_3]
        .into_iter()
        .enumerate()
    {
        let (o, took) = timed(&f);
        report(k + 1, o, took);
    }
    let suite = run_suite();
    report(4, criterion_4(&suite), suite.elapsed);
    let (o, took) = timed(&|| criterion_5(&suite));
    report(5, o, took);
    let t = Instant::now();
    let (c6, extra) = criterion_6();
    report(6, c6, t.elapsed());
    let (o, took) = timed(&|| criterion_7(&suite, &extra));
    report(7, o, took);
    for (k, f) in [criterion_8, criterion_9, criterion_10, criterion_11]
        .into_iter()
        .enumerate()
    {
        let (o, took) = timed(&f);
        report(k + 8, o, took);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
