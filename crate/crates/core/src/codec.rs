//! Serialized parses, decoding, and verification against the input.
//!
//! Format (all integers unsigned LEB128):
//!
//! ```text
//! "LZAP" 0x01 n count { source (0 = literal) ( byte | length ) }*count
//! ```
//!
//! Positions are 1-based. A phrase's start is implied by the lengths of the
//! phrases before it.

use std::fmt;

use thiserror::Error;

use crate::error::{Error, Result};
use crate::iomodel::Source;
use crate::parse_core::{Parse, Phrase};

pub const MAGIC: &[u8; 4] = b"LZAP";
pub const VERSION: u8 = 0x01;

/// Why a serialized parse could not be decoded. Phrase indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("stream does not start with LZAP magic")]
    BadMagic,
    #[error("unsupported format version {0:#04x}")]
    BadVersion(u8),
    #[error("truncated or malformed header")]
    BadHeader,
    #[error("phrase {index}: truncated or malformed record")]
    Truncated { index: u64 },
    #[error("phrase {index}: copy of length 0")]
    ZeroLength { index: u64 },
    #[error("phrase {index}: source {copy_from} does not precede start {start}")]
    SourceNotBefore {
        index: u64,
        copy_from: u64,
        start: u64,
    },
    #[error("phrase {index}: covers up to position {end}, past n = {n}")]
    OutOfRange { index: u64, end: u64, n: u64 },
    #[error("phrases cover {covered} bytes but n = {n}")]
    LengthMismatch { covered: u64, n: u64 },
    #[error("{0} trailing bytes after the last phrase")]
    TrailingBytes(usize),
}

fn write_uleb(out: &mut Vec<u8>, v: u64) {
    leb128::write::unsigned(out, v).expect("writing to a Vec cannot fail");
}

fn read_uleb(input: &mut &[u8]) -> Option<u64> {
    leb128::read::unsigned(input).ok()
}

/// Serializes a parse.
pub fn encode(parse: &Parse) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 3 * parse.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    write_uleb(&mut out, parse.n as u64);
    write_uleb(&mut out, parse.len() as u64);
    for phrase in &parse.phrases {
        match *phrase {
            Phrase::Literal { byte, .. } => {
                out.push(0);
                out.push(byte);
            }
            Phrase::Copy { source, length, .. } => {
                write_uleb(&mut out, source as u64);
                write_uleb(&mut out, length as u64);
            }
        }
    }
    out
}

/// Parses a serialized stream back into phrases, checking that it is
/// well-formed and that every copy refers strictly backwards.
pub fn deserialize(stream: &[u8]) -> std::result::Result<Parse, DecodeError> {
    let mut input = stream;
    if input.len() < 4 || &input[..4] != MAGIC {
        return Err(DecodeError::BadMagic);
    }
    input = &input[4..];
    match input.first() {
        Some(&VERSION) => input = &input[1..],
        Some(&v) => return Err(DecodeError::BadVersion(v)),
        None => return Err(DecodeError::BadHeader),
    }
    let n = read_uleb(&mut input).ok_or(DecodeError::BadHeader)?;
    let count = read_uleb(&mut input).ok_or(DecodeError::BadHeader)?;
    // every record takes at least two bytes
    if count > (input.len() / 2) as u64 {
        return Err(DecodeError::Truncated {
            index: (input.len() / 2) as u64 + 1,
        });
    }

    let mut phrases = Vec::with_capacity(count as usize);
    let mut start: u64 = 1;
    for index in 1..=count {
        let source = read_uleb(&mut input).ok_or(DecodeError::Truncated { index })?;
        let phrase = if source == 0 {
            let (&byte, rest) = input
                .split_first()
                .ok_or(DecodeError::Truncated { index })?;
            input = rest;
            Phrase::Literal {
                start: start as usize,
                byte,
            }
        } else {
            let length = read_uleb(&mut input).ok_or(DecodeError::Truncated { index })?;
            if length == 0 {
                return Err(DecodeError::ZeroLength { index });
            }
            if source >= start {
                return Err(DecodeError::SourceNotBefore {
                    index,
                    copy_from: source,
                    start,
                });
            }
            Phrase::Copy {
                start: start as usize,
                source: source as usize,
                length: length as usize,
            }
        };
        let end = start
            .checked_add(phrase.len() as u64 - 1)
            .ok_or(DecodeError::OutOfRange {
                index,
                end: u64::MAX,
                n,
            })?;
        if end > n {
            return Err(DecodeError::OutOfRange { index, end, n });
        }
        start = end + 1;
        phrases.push(phrase);
    }
    if start - 1 != n {
        return Err(DecodeError::LengthMismatch {
            covered: start - 1,
            n,
        });
    }
    if !input.is_empty() {
        return Err(DecodeError::TrailingBytes(input.len()));
    }
    Ok(Parse {
        n: n as usize,
        phrases,
    })
}

/// Rebuilds the string of a parse. Copies run forward byte by byte, so a
/// source overlapping its phrase repeats correctly.
pub fn materialize(parse: &Parse) -> std::result::Result<Vec<u8>, DecodeError> {
    let mut out = Vec::with_capacity(parse.n);
    for (k, phrase) in parse.phrases.iter().enumerate() {
        let index = k as u64 + 1;
        if phrase.start() != out.len() + 1 {
            return Err(DecodeError::LengthMismatch {
                covered: out.len() as u64,
                n: parse.n as u64,
            });
        }
        match *phrase {
            Phrase::Literal { byte, .. } => out.push(byte),
            Phrase::Copy {
                start,
                source,
                length,
            } => {
                if source == 0 || source >= start {
                    return Err(DecodeError::SourceNotBefore {
                        index,
                        copy_from: source as u64,
                        start: start as u64,
                    });
                }
                for t in 0..length {
                    let b = out[source - 1 + t];
                    out.push(b);
                }
            }
        }
    }
    if out.len() != parse.n {
        return Err(DecodeError::LengthMismatch {
            covered: out.len() as u64,
            n: parse.n as u64,
        });
    }
    Ok(out)
}

/// Decodes a serialized stream to the original bytes.
pub fn decode(stream: &[u8]) -> std::result::Result<Vec<u8>, DecodeError> {
    materialize(&deserialize(stream)?)
}

/// The first phrase that fails verification. `index` is 1-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    pub index: usize,
    pub start: usize,
    pub source: usize,
    pub reason: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "phrase {} at position {} (source {}): {}",
            self.index, self.start, self.source, self.reason
        )
    }
}

const VERIFY_CHUNK: usize = 4096;

/// Compares each phrase to the text it claims to reproduce.
///
/// Returns `Ok(None)` when the phrases tile `S`, every literal matches, and
/// every copy matches an earlier-starting substring. Whether the source is
/// the *first* occurrence is not checked.
pub fn verify<S: Source + ?Sized>(parse: &Parse, source: &S) -> Result<Option<Mismatch>> {
    let n = source.len();
    let mismatch = |k: usize, p: &Phrase, reason: String| Mismatch {
        index: k + 1,
        start: p.start(),
        source: p.source(),
        reason,
    };
    if parse.n != n {
        let reason = format!("parse covers {} bytes but the input has {n}", parse.n);
        return Ok(Some(Mismatch {
            index: 0,
            start: 0,
            source: 0,
            reason,
        }));
    }
    let io = |e| Error::io("verify", e);
    let mut here = vec![0u8; VERIFY_CHUNK];
    let mut there = vec![0u8; VERIFY_CHUNK];
    let mut next = 1;
    for (k, p) in parse.phrases.iter().enumerate() {
        if p.start() != next {
            return Ok(Some(mismatch(
                k,
                p,
                format!("expected the phrase to start at {next}"),
            )));
        }
        if p.is_empty() || p.end() > n {
            return Ok(Some(mismatch(
                k,
                p,
                format!("phrase runs past the end ({n})"),
            )));
        }
        match *p {
            Phrase::Literal { start, byte } => {
                read_exact_at(source, start - 1, &mut here[..1]).map_err(io)?;
                if here[0] != byte {
                    return Ok(Some(mismatch(
                        k,
                        p,
                        format!("literal {byte:#04x} but input has {:#04x}", here[0]),
                    )));
                }
            }
            Phrase::Copy {
                start,
                source: src,
                length,
            } => {
                if src == 0 || src >= start {
                    return Ok(Some(mismatch(
                        k,
                        p,
                        "source does not precede the phrase".into(),
                    )));
                }
                let mut done = 0;
                while done < length {
                    let chunk = VERIFY_CHUNK.min(length - done);
                    read_exact_at(source, start - 1 + done, &mut here[..chunk]).map_err(io)?;
                    read_exact_at(source, src - 1 + done, &mut there[..chunk]).map_err(io)?;
                    if let Some(t) = (0..chunk).find(|&t| here[t] != there[t]) {
                        let reason = format!("bytes differ at offset {} of the copy", done + t);
                        return Ok(Some(mismatch(k, p, reason)));
                    }
                    done += chunk;
                }
            }
        }
        next = p.end() + 1;
    }
    if next != n + 1 {
        return Ok(Some(Mismatch {
            index: parse.len() + 1,
            start: next,
            source: 0,
            reason: format!("phrases end at {} but the input has {n} bytes", next - 1),
        }));
    }
    Ok(None)
}

fn read_exact_at<S: Source + ?Sized>(
    source: &S,
    mut offset: usize,
    mut buf: &mut [u8],
) -> std::io::Result<()> {
    while !buf.is_empty() {
        let got = source.read_at(offset, buf)?;
        if got == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        offset += got;
        buf = &mut buf[got..];
    }
    Ok(())
}

/// Runs `producer(attempt)` for `attempt = 0, 1, ...` until its parse
/// verifies, up to `max_attempts` attempts in total.
///
/// Returns the parse, the producer's side output, and the number of attempts
/// used.
pub fn verify_and_retry<S, T, F>(
    mut producer: F,
    source: &S,
    max_attempts: u32,
) -> Result<(Parse, T, u32)>
where
    S: Source + ?Sized,
    F: FnMut(u32) -> Result<(Parse, T)>,
{
    let mut last = None;
    for attempt in 0..max_attempts.max(1) {
        let (parse, extra) = producer(attempt)?;
        match verify(&parse, source)? {
            None => return Ok((parse, extra, attempt + 1)),
            Some(m) => last = Some(m),
        }
    }
    Err(Error::RetriesExhausted {
        attempts: max_attempts.max(1),
        last: last.expect("at least one attempt ran"),
    })
}
