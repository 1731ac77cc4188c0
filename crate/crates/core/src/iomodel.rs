//! Read-only sequential access to the input with pass, byte and block
//! accounting.
//!
//! The parser never sees random access to `S`. It gets two kinds of
//! traversal from a [`SequentialReader`]:
//!
//! * a [`Pass`]: one complete front-to-back traversal, with an optional
//!   trailing cursor that lags the head (used to drop the outgoing byte of a
//!   sliding window);
//! * a [`RangedScan`]: forward-only reads of selected ranges, used to collect
//!   candidate blocks and literal bytes. Ranges must be requested in
//!   increasing order.
//!
//! Block accounting follows the external-memory model: a block of `B` bytes
//! is billed the first time the head of a pass touches it.

use std::fs::File;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 4096;
pub const DEFAULT_BUFFER_SIZE: usize = 64 * 1024;

/// Random-access byte storage backing a reader.
///
/// Only the I/O layer and the verifier talk to a `Source` directly.
pub trait Source {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reads up to `buf.len()` bytes starting at `offset`. Returns the number
    /// of bytes read; 0 only at end of input.
    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize>;
}

impl Source for [u8] {
    fn len(&self) -> usize {
        <[u8]>::len(self)
    }

    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize> {
        if offset >= <[u8]>::len(self) {
            return Ok(0);
        }
        let n = buf.len().min(<[u8]>::len(self) - offset);
        buf[..n].copy_from_slice(&self[offset..offset + n]);
        Ok(n)
    }
}

impl Source for Vec<u8> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }

    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize> {
        self.as_slice().read_at(offset, buf)
    }
}

impl<T: Source + ?Sized> Source for &T {
    fn len(&self) -> usize {
        (**self).len()
    }

    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize> {
        (**self).read_at(offset, buf)
    }
}

/// A read-only file. The length is captured at open time.
#[derive(Debug)]
pub struct FileSource {
    file: File,
    len: usize,
}

impl FileSource {
    pub fn open(path: impl AsRef<Path>) -> io::Result<Self> {
        let file = File::open(path)?;
        let len = file.metadata()?.len() as usize;
        Ok(FileSource { file, len })
    }
}

impl Source for FileSource {
    fn len(&self) -> usize {
        self.len
    }

    #[cfg(unix)]
    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize> {
        use std::os::unix::fs::FileExt;
        if offset >= self.len {
            return Ok(0);
        }
        let want = buf.len().min(self.len - offset);
        self.file.read_at(&mut buf[..want], offset as u64)
    }

    #[cfg(windows)]
    fn read_at(&self, offset: usize, buf: &mut [u8]) -> io::Result<usize> {
        use std::os::windows::fs::FileExt;
        if offset >= self.len {
            return Ok(0);
        }
        let want = buf.len().min(self.len - offset);
        self.file.seek_read(&mut buf[..want], offset as u64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IoConfig {
    /// Bytes per block (`B`).
    pub block_size: usize,
    /// Bytes held in memory per cursor.
    pub buffer_size: usize,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            block_size: DEFAULT_BLOCK_SIZE,
            buffer_size: DEFAULT_BUFFER_SIZE,
        }
    }
}

impl IoConfig {
    /// A config with the given block size and a buffer of at least one block.
    pub fn with_block_size(block_size: usize) -> Self {
        IoConfig {
            block_size,
            buffer_size: DEFAULT_BUFFER_SIZE.max(block_size),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_size == 0 {
            return Err(Error::InvalidConfig("block size must be at least 1".into()));
        }
        if self.buffer_size < self.block_size {
            return Err(Error::InvalidConfig(format!(
                "buffer size {} is smaller than block size {}",
                self.buffer_size, self.block_size
            )));
        }
        Ok(())
    }
}

/// Counters maintained by a [`SequentialReader`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IoStats {
    /// Complete sequential traversals started.
    pub passes: u64,
    /// Bytes read by the head of full passes.
    pub bytes_read: u64,
    /// Blocks touched by the head of full passes.
    pub blocks_read: u64,
    /// Bytes read by ranged scans (candidate collection, literal fill).
    pub candidate_scan_bytes: u64,
    /// Bytes re-read by the trailing cursor of sliding windows.
    pub trailing_bytes: u64,
}

#[derive(Clone, Copy)]
enum Billing {
    Head,
    Trailing,
    Scan,
}

/// A buffered forward cursor over a source.
struct Cursor {
    buf: Vec<u8>,
    /// Source offset of `buf[0]`.
    base: usize,
    filled: usize,
    at: usize,
}

impl Cursor {
    fn new(buffer_size: usize, start: usize) -> Self {
        Cursor {
            buf: vec![0; buffer_size.max(1)],
            base: start,
            filled: 0,
            at: 0,
        }
    }

    fn position(&self) -> usize {
        self.base + self.at
    }

    #[inline]
    fn next<S: Source + ?Sized>(&mut self, src: &S, meter: &mut Meter<'_>) -> io::Result<u8> {
        if self.at == self.filled {
            self.refill(src, meter)?;
        }
        let b = self.buf[self.at];
        self.at += 1;
        Ok(b)
    }

    #[cold]
    fn refill<S: Source + ?Sized>(&mut self, src: &S, meter: &mut Meter<'_>) -> io::Result<()> {
        let start = self.base + self.filled;
        let n = src.read_at(start, &mut self.buf)?;
        if n == 0 {
            return Err(io::Error::new(
                io::ErrorKind::UnexpectedEof,
                format!("read past end of input at offset {start}"),
            ));
        }
        meter.bill(start, n);
        self.base = start;
        self.filled = n;
        self.at = 0;
        Ok(())
    }

    /// Moves forward to `target`, billing only bytes that actually get read.
    fn seek_forward(&mut self, target: usize) {
        let pos = self.position();
        debug_assert!(target >= pos);
        if target <= self.base + self.filled {
            self.at = target - self.base;
        } else {
            self.base = target;
            self.filled = 0;
            self.at = 0;
        }
    }
}

struct Meter<'a> {
    stats: &'a mut IoStats,
    billing: Billing,
    block_size: usize,
    /// First block index the head of this pass has not billed yet.
    next_block: &'a mut usize,
}

impl Meter<'_> {
    fn bill(&mut self, offset: usize, n: usize) {
        match self.billing {
            Billing::Head => {
                self.stats.bytes_read += n as u64;
                let last_block = (offset + n - 1) / self.block_size;
                let first_block = (offset / self.block_size).max(*self.next_block);
                if last_block >= first_block {
                    self.stats.blocks_read += (last_block - first_block + 1) as u64;
                    *self.next_block = last_block + 1;
                }
            }
            Billing::Trailing => self.stats.trailing_bytes += n as u64,
            Billing::Scan => self.stats.candidate_scan_bytes += n as u64,
        }
    }
}

/// Sequential, read-only view of `S` with I/O accounting.
pub struct SequentialReader<S> {
    source: S,
    cfg: IoConfig,
    stats: IoStats,
}

/// Opens a file-backed reader.
pub fn open_reader(path: impl AsRef<Path>, cfg: IoConfig) -> Result<SequentialReader<FileSource>> {
    let path = path.as_ref();
    let source = FileSource::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    SequentialReader::new(source, cfg)
}

impl<S: Source> SequentialReader<S> {
    pub fn new(source: S, cfg: IoConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(SequentialReader {
            source,
            cfg,
            stats: IoStats::default(),
        })
    }

    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn config(&self) -> IoConfig {
        self.cfg
    }

    /// No point buffering more than the whole input.
    fn buffer_size(&self) -> usize {
        self.cfg.buffer_size.min(self.len()).max(1)
    }

    /// Starts a complete traversal of `S` from offset 0.
    pub fn begin_pass(&mut self) -> Pass<'_, S> {
        self.stats.passes += 1;
        let buffer_size = self.buffer_size();
        Pass {
            source: &self.source,
            stats: &mut self.stats,
            block_size: self.cfg.block_size,
            buffer_size,
            head: Cursor::new(buffer_size, 0),
            trailing: None,
            next_block: 0,
            len: self.source.len(),
        }
    }

    /// Starts a forward-only ranged scan.
    pub fn begin_scan(&mut self) -> RangedScan<'_, S> {
        let buffer_size = self.buffer_size();
        RangedScan {
            source: &self.source,
            stats: &mut self.stats,
            block_size: self.cfg.block_size,
            cursor: Cursor::new(buffer_size, 0),
            limit: 0,
            len: self.source.len(),
        }
    }

    /// A consistent copy of the counters.
    pub fn snapshot_stats(&self) -> IoStats {
        self.stats
    }

    pub fn into_source(self) -> S {
        self.source
    }
}

/// One complete traversal. Dropping a pass early leaves the unread tail
/// unbilled; call [`Pass::finish`] to read to the end.
pub struct Pass<'a, S> {
    source: &'a S,
    stats: &'a mut IoStats,
    block_size: usize,
    buffer_size: usize,
    head: Cursor,
    trailing: Option<Cursor>,
    next_block: usize,
    len: usize,
}

impl<S: Source> Pass<'_, S> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// 0-based offset of the next head byte.
    pub fn position(&self) -> usize {
        self.head.position()
    }

    #[inline]
    pub fn next_byte(&mut self) -> io::Result<u8> {
        let mut meter = Meter {
            stats: self.stats,
            billing: Billing::Head,
            block_size: self.block_size,
            next_block: &mut self.next_block,
        };
        self.head.next(self.source, &mut meter)
    }

    /// Next byte of the trailing cursor, which starts at offset 0 and may not
    /// overtake the head.
    #[inline]
    pub fn next_trailing(&mut self) -> io::Result<u8> {
        let buffer_size = self.buffer_size;
        let trailing = self
            .trailing
            .get_or_insert_with(|| Cursor::new(buffer_size, 0));
        debug_assert!(trailing.position() < self.head.position());
        let mut unused = 0;
        let mut meter = Meter {
            stats: self.stats,
            billing: Billing::Trailing,
            block_size: self.block_size,
            next_block: &mut unused,
        };
        trailing.next(self.source, &mut meter)
    }

    /// Buffered bytes of the trailing and head cursors, trimmed to the same
    /// length (at least 1 while the head is not at the end). Call
    /// [`Pass::consume_both`] with how many were used.
    pub fn buffered_pair(&mut self) -> io::Result<(&[u8], &[u8])> {
        if self.head.position() >= self.len {
            return Ok((&[], &[]));
        }
        if self.head.at == self.head.filled {
            let mut meter = Meter {
                stats: self.stats,
                billing: Billing::Head,
                block_size: self.block_size,
                next_block: &mut self.next_block,
            };
            self.head.refill(self.source, &mut meter)?;
        }
        let buffer_size = self.buffer_size;
        let trailing = self
            .trailing
            .get_or_insert_with(|| Cursor::new(buffer_size, 0));
        if trailing.at == trailing.filled {
            let mut unused = 0;
            let mut meter = Meter {
                stats: self.stats,
                billing: Billing::Trailing,
                block_size: self.block_size,
                next_block: &mut unused,
            };
            trailing.refill(self.source, &mut meter)?;
        }
        let k = (trailing.filled - trailing.at).min(self.head.filled - self.head.at);
        Ok((
            &trailing.buf[trailing.at..trailing.at + k],
            &self.head.buf[self.head.at..self.head.at + k],
        ))
    }

    /// Advances both cursors past `k` bytes returned by
    /// [`Pass::buffered_pair`].
    pub fn consume_both(&mut self, k: usize) {
        let trailing = self.trailing.as_mut().expect("buffered_pair was called");
        assert!(k <= trailing.filled - trailing.at && k <= self.head.filled - self.head.at);
        trailing.at += k;
        self.head.at += k;
    }

    /// Reads the rest of the input so the pass is complete.
    pub fn finish(mut self) -> io::Result<()> {
        while self.head.position() < self.len {
            let remaining_in_buf = self.head.filled - self.head.at;
            if remaining_in_buf > 0 {
                self.head.at = self.head.filled;
                continue;
            }
            self.next_byte()?;
        }
        Ok(())
    }
}

/// Forward-only reads of selected ranges.
pub struct RangedScan<'a, S> {
    source: &'a S,
    stats: &'a mut IoStats,
    block_size: usize,
    cursor: Cursor,
    limit: usize,
    len: usize,
}

impl<S: Source> RangedScan<'_, S> {
    /// Positions the scan at the 0-based range `[start, end)`. Ranges must be
    /// requested in non-decreasing order of `start`, and may not start before
    /// the previous range's end.
    pub fn range(&mut self, start: usize, end: usize) {
        assert!(start <= end && end <= self.len, "scan range out of bounds");
        assert!(
            start >= self.cursor.position(),
            "ranged scans only move forward (at {}, asked for {})",
            self.cursor.position(),
            start
        );
        self.cursor.seek_forward(start);
        self.limit = end;
    }

    /// The next buffered run of the current range, empty at its end.
    pub fn next_chunk(&mut self) -> io::Result<&[u8]> {
        let pos = self.cursor.position();
        if pos >= self.limit {
            return Ok(&[]);
        }
        if self.cursor.at == self.cursor.filled {
            let mut unused = 0;
            let mut meter = Meter {
                stats: self.stats,
                billing: Billing::Scan,
                block_size: self.block_size,
                next_block: &mut unused,
            };
            self.cursor.refill(self.source, &mut meter)?;
        }
        let from = self.cursor.at;
        let k = (self.cursor.filled - from).min(self.limit - pos);
        self.cursor.at += k;
        Ok(&self.cursor.buf[from..from + k])
    }

    /// Next byte of the current range, or `None` at its end.
    #[inline]
    pub fn next_byte(&mut self) -> io::Result<Option<u8>> {
        if self.cursor.position() >= self.limit {
            return Ok(None);
        }
        let mut unused = 0;
        let mut meter = Meter {
            stats: self.stats,
            billing: Billing::Scan,
            block_size: self.block_size,
            next_block: &mut unused,
        };
        self.cursor.next(self.source, &mut meter).map(Some)
    }
}
