//! LZ77-like parsing with sequential passes and Karp-Rabin fingerprints.
//!
//! [`parse`] builds an LZ77-like parse of a read-only input: every phrase is
//! either a literal byte or a copy of a substring that first occurs strictly
//! earlier. It tries a decreasing schedule of lengths, answers "where does this
//! block first occur?" with Karp-Rabin fingerprints and one sliding window pass
//! per length, and keeps only the parse and the current level's candidates in
//! memory.
//!
//! ```
//! use lzap::{codec, parse, Params, ParseOptions};
//!
//! let s = b"ababbabbaabbabbaababa";
//! let params = Params::with_step(s.len(), 4.0, 0).unwrap();
//! let (p, stats) = parse(s.as_slice(), &params, &ParseOptions::default()).unwrap();
//! assert_eq!(p.len(), 6);
//! assert_eq!(stats.sliding_passes, 10);
//! assert_eq!(codec::decode(&codec::encode(&p)).unwrap(), s);
//! ```

pub mod cli;
pub mod codec;
pub mod error;
pub mod fingerprint;
pub mod firstocc;
pub mod iomodel;
pub mod oracle;
pub mod parse_core;

pub use error::{Error, Result};
pub use iomodel::{open_reader, FileSource, IoConfig, IoStats, SequentialReader, Source};
pub use parse_core::{
    build_schedule, parse, parse_once, shrink, Interval, LengthSchedule, Lookup, Params, Parse,
    ParseOptions, Phrase, RunStats, ShortTableConfig,
};
