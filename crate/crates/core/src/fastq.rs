//! FASTQ ingestion in record-aligned blocks, and the plain one-read-per-line
//! DNA output used on the decode path.
//!
//! Titles and qualities are parsed only far enough to validate record
//! structure; only the sequence line survives.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;

use crate::alphabet;
use crate::error::{Error, IoContext, Result};

pub const DEFAULT_BLOCK_SIZE: usize = 256_000_000;

/// Longest read the two-byte length field can describe.
pub const MAX_READ_LEN: usize = u16::MAX as usize;

const READ_CHUNK: u64 = 4 << 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadRecord {
    /// Uppercase symbols over `ACGTN`.
    pub seq: Vec<u8>,
    /// Ordinal of the read across the concatenation of all inputs.
    pub orig_index: u64,
}

impl AsRef<[u8]> for ReadRecord {
    fn as_ref(&self) -> &[u8] {
        &self.seq
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InputBlock {
    pub reads: Vec<ReadRecord>,
    pub ordinal: u32,
}

impl InputBlock {
    pub fn symbol_bytes(&self) -> usize {
        self.reads.iter().map(|r| r.seq.len()).sum()
    }
}

struct LineError {
    /// 0-based line offset inside the parsed buffer.
    line: u64,
    msg: String,
}

impl LineError {
    fn new(line: u64, msg: impl Into<String>) -> Self {
        Self {
            line,
            msg: msg.into(),
        }
    }
}

#[derive(Clone)]
struct Lines<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Iterator for Lines<'a> {
    type Item = &'a [u8];

    fn next(&mut self) -> Option<&'a [u8]> {
        if self.pos >= self.buf.len() {
            return None;
        }
        let rest = &self.buf[self.pos..];
        let (line, advance) = match memchr::memchr(b'\n', rest) {
            Some(i) => (&rest[..i], i + 1),
            None => (rest, rest.len()),
        };
        self.pos += advance;
        Some(line.strip_suffix(b"\r").unwrap_or(line))
    }
}

fn parse_records(buf: &[u8], first_index: u64, out: &mut Vec<ReadRecord>) -> Result<(), LineError> {
    let mut lines = Lines { buf, pos: 0 }.peekable();
    let mut line_no = 0u64;
    let mut index = first_index;

    while let Some(title) = lines.next() {
        if title.is_empty() {
            // Blank lines are tolerated only as trailing padding.
            if lines.clone().all(|l| l.is_empty()) {
                break;
            }
            return Err(LineError::new(line_no, "empty line where a record title was expected"));
        }
        if title[0] != b'@' {
            return Err(LineError::new(line_no, "record title does not start with '@'"));
        }
        let (Some(seq), Some(plus), Some(qual)) = (lines.next(), lines.next(), lines.next()) else {
            return Err(LineError::new(
                line_no,
                "truncated record: line count is not a multiple of 4",
            ));
        };
        if plus.first() != Some(&b'+') {
            return Err(LineError::new(line_no + 2, "missing '+' separator line"));
        }
        if seq.is_empty() {
            return Err(LineError::new(line_no + 1, "empty sequence"));
        }
        if seq.len() > MAX_READ_LEN {
            return Err(LineError::new(
                line_no + 1,
                format!("read of {} symbols exceeds the {MAX_READ_LEN} limit", seq.len()),
            ));
        }
        if qual.len() != seq.len() {
            return Err(LineError::new(
                line_no + 3,
                "quality length does not match sequence length",
            ));
        }
        let mut norm = Vec::with_capacity(seq.len());
        for &b in seq {
            match alphabet::normalize(b) {
                Some(s) => norm.push(s),
                None => {
                    return Err(LineError::new(
                        line_no + 1,
                        format!("illegal symbol {:?} in sequence", b as char),
                    ))
                }
            }
        }
        out.push(ReadRecord {
            seq: norm,
            orig_index: index,
        });
        index += 1;
        line_no += 4;
    }
    Ok(())
}

/// Parses a buffer holding whole FASTQ records. Indices start at 0.
pub fn parse_fastq_block(buf: &[u8]) -> Result<Vec<ReadRecord>> {
    let mut out = Vec::new();
    parse_records(buf, 0, &mut out).map_err(|e| Error::Parse {
        file: "<buffer>".into(),
        line: e.line + 1,
        msg: e.msg,
    })?;
    Ok(out)
}

/// Byte offset just past the last complete record in `buf`, assuming `buf`
/// starts at a record boundary.
fn record_cut(buf: &[u8]) -> usize {
    let mut cut = 0;
    for (n, pos) in memchr::memchr_iter(b'\n', buf).enumerate() {
        if (n + 1) % 4 == 0 {
            cut = pos + 1;
        }
    }
    cut
}

struct FileCursor {
    path: PathBuf,
    reader: Box<dyn Read + Send>,
    buf: Vec<u8>,
    eof: bool,
    /// Lines already parsed from this file.
    line: u64,
}

impl FileCursor {
    fn open(path: &Path, gzipped: bool) -> Result<Self> {
        let file = File::open(path).at(path)?;
        let reader: Box<dyn Read + Send> = if gzipped {
            Box::new(MultiGzDecoder::new(file))
        } else {
            Box::new(file)
        };
        Ok(Self {
            path: path.to_path_buf(),
            reader,
            buf: Vec::new(),
            eof: false,
            line: 0,
        })
    }

    /// Parses the next run of complete records. Returns `false` once the
    /// file is exhausted.
    fn pull(&mut self, first_index: u64, out: &mut Vec<ReadRecord>) -> Result<bool> {
        loop {
            if self.eof && self.buf.is_empty() {
                return Ok(false);
            }
            if !self.eof {
                let got = (&mut self.reader)
                    .take(READ_CHUNK)
                    .read_to_end(&mut self.buf)
                    .at(&self.path)?;
                self.eof = got == 0;
            }
            let cut = if self.eof {
                self.buf.len()
            } else {
                record_cut(&self.buf)
            };
            if cut == 0 {
                continue;
            }
            let before = out.len();
            parse_records(&self.buf[..cut], first_index, out).map_err(|e| Error::Parse {
                file: self.path.display().to_string(),
                line: self.line + e.line + 1,
                msg: e.msg,
            })?;
            self.line += 4 * (out.len() - before) as u64;
            self.buf.drain(..cut);
            return Ok(true);
        }
    }
}

/// Iterator over [`InputBlock`]s drawn from the concatenation of several
/// FASTQ files. Blocks always end on a record boundary and may span files.
pub struct BlockReader {
    paths: Vec<PathBuf>,
    gzipped: bool,
    block_size: usize,
    next_file: usize,
    cursor: Option<FileCursor>,
    pending: VecDeque<ReadRecord>,
    pending_bytes: usize,
    next_index: u64,
    next_ordinal: u32,
    failed: bool,
    scratch: Vec<ReadRecord>,
}

/// Opens the inputs in order. Every path is checked for readability up
/// front so a typo fails before any work is done.
pub fn open_input<P: AsRef<Path>>(paths: &[P], gzipped: bool, block_size: usize) -> Result<BlockReader> {
    if block_size == 0 {
        return Err(Error::InvalidParam("block size must be positive".into()));
    }
    let paths: Vec<PathBuf> = paths.iter().map(|p| p.as_ref().to_path_buf()).collect();
    for p in &paths {
        File::open(p).at(p)?;
    }
    Ok(BlockReader {
        paths,
        gzipped,
        block_size,
        next_file: 0,
        cursor: None,
        pending: VecDeque::new(),
        pending_bytes: 0,
        next_index: 0,
        next_ordinal: 0,
        failed: false,
        scratch: Vec::new(),
    })
}

impl BlockReader {
    fn pull(&mut self) -> Result<bool> {
        loop {
            if self.cursor.is_none() {
                let Some(path) = self.paths.get(self.next_file) else {
                    return Ok(false);
                };
                self.cursor = Some(FileCursor::open(path, self.gzipped)?);
                self.next_file += 1;
            }
            let cursor = self.cursor.as_mut().expect("cursor just opened");
            self.scratch.clear();
            if cursor.pull(self.next_index, &mut self.scratch)? {
                self.next_index += self.scratch.len() as u64;
                for r in self.scratch.drain(..) {
                    self.pending_bytes += r.seq.len();
                    self.pending.push_back(r);
                }
                return Ok(true);
            }
            self.cursor = None;
        }
    }
}

impl Iterator for BlockReader {
    type Item = Result<InputBlock>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        while self.pending_bytes < self.block_size {
            match self.pull() {
                Ok(true) => {}
                Ok(false) => break,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
        }
        if self.pending.is_empty() {
            return None;
        }
        let mut reads = Vec::new();
        let mut bytes = 0;
        while let Some(front) = self.pending.front() {
            let len = front.seq.len();
            if !reads.is_empty() && bytes + len > self.block_size {
                break;
            }
            bytes += len;
            reads.push(self.pending.pop_front().expect("front exists"));
        }
        self.pending_bytes -= bytes;
        let ordinal = self.next_ordinal;
        self.next_ordinal += 1;
        Some(Ok(InputBlock { reads, ordinal }))
    }
}

/// Streaming writer for the decode output: one read per line, LF endings.
pub struct DnaWriter {
    path: PathBuf,
    out: BufWriter<File>,
    reads: u64,
}

impl DnaWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).at(&path)?;
        Ok(Self {
            out: BufWriter::with_capacity(1 << 20, file),
            path,
            reads: 0,
        })
    }

    pub fn write_read(&mut self, seq: &[u8]) -> Result<()> {
        self.out
            .write_all(seq)
            .and_then(|_| self.out.write_all(b"\n"))
            .at(&self.path)?;
        self.reads += 1;
        Ok(())
    }

    /// Flushes and returns the number of reads written.
    pub fn finish(mut self) -> Result<u64> {
        self.out.flush().at(&self.path)?;
        Ok(self.reads)
    }
}

pub fn write_dna_file<I, S>(reads: I, path: impl AsRef<Path>) -> Result<u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let mut w = DnaWriter::create(path)?;
    for r in reads {
        w.write_read(r.as_ref())?;
    }
    w.finish()
}

/// Reads every record from `paths` into memory. Convenience for tests and
/// small inputs.
pub fn read_all<P: AsRef<Path>>(paths: &[P], gzipped: bool) -> Result<Vec<ReadRecord>> {
    let mut all = Vec::new();
    for block in open_input(paths, gzipped, DEFAULT_BLOCK_SIZE)? {
        all.extend(block?.reads);
    }
    Ok(all)
}

#[cfg(test)]
fn is_not_found(e: &Error) -> bool {
    matches!(e, Error::IoAt { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fastq(seqs: &[&str]) -> String {
        seqs.iter()
            .enumerate()
            .map(|(i, s)| format!("@r{i}\n{s}\n+\n{}\n", "!".repeat(s.len())))
            .collect()
    }

    fn write_tmp(dir: &tempfile::TempDir, name: &str, body: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn single_record() {
        let r = parse_fastq_block(b"@r1\nACGT\n+\n!!!!\n").unwrap();
        assert_eq!(r, vec![ReadRecord { seq: b"ACGT".to_vec(), orig_index: 0 }]);
    }

    #[test]
    fn lowercase_is_normalized() {
        let r = parse_fastq_block(b"@r1\nacgtn\n+\n!!!!!\n").unwrap();
        assert_eq!(r[0].seq, b"ACGTN");
    }

    #[test]
    fn illegal_symbol_rejected() {
        let err = parse_fastq_block(b"@r1\nAXGT\n+\n!!!!\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn missing_plus_rejected() {
        let err = parse_fastq_block(b"@r1\nACGT\n-\n!!!!\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn truncated_record_rejected() {
        let err = parse_fastq_block(b"@r1\nACGT\n+\n!!!!\n@r2\nAC\n").unwrap_err();
        assert!(err.to_string().contains("multiple of 4"), "{err}");
    }

    #[test]
    fn crlf_and_missing_final_newline() {
        let r = parse_fastq_block(b"@r1\r\nACGT\r\n+\r\n!!!!").unwrap();
        assert_eq!(r[0].seq, b"ACGT");
    }

    #[test]
    fn trailing_blank_lines_tolerated() {
        let r = parse_fastq_block(b"@r1\nACGT\n+\n!!!!\n\n\n").unwrap();
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn one_file_two_records() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "a.fq", fastq(&["ACGT", "GGTA"]).as_bytes());
        let blocks: Vec<_> = open_input(&[p], false, DEFAULT_BLOCK_SIZE)
            .unwrap()
            .collect::<Result<_>>()
            .unwrap();
        assert_eq!(blocks.len(), 1);
        let got: Vec<_> = blocks[0].reads.iter().map(|r| (r.seq.clone(), r.orig_index)).collect();
        assert_eq!(got, vec![(b"ACGT".to_vec(), 0), (b"GGTA".to_vec(), 1)]);
    }

    #[test]
    fn empty_file_yields_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_tmp(&dir, "e.fq", b"");
        assert_eq!(open_input(&[p], false, 1000).unwrap().count(), 0);
    }

    #[test]
    fn blocks_span_files() {
        let dir = tempfile::tempdir().unwrap();
        let a = write_tmp(&dir, "a.fq", fastq(&["ACGTA", "CCCCA", "GGGGA"]).as_bytes());
        let b = write_tmp(&dir, "b.fq", fastq(&["TTTTA", "NNNNA"]).as_bytes());
        // Line-count oracle over the fixtures: 12 + 8 lines, i.e. 3 + 2 records.
        let lines: usize = [&a, &b]
            .iter()
            .map(|p| std::fs::read(p).unwrap().iter().filter(|&&c| c == b'\n').count())
            .sum();
        assert_eq!(lines / 4, 5);

        let blocks: Vec<_> = open_input(&[a, b], false, 20).unwrap().collect::<Result<_>>().unwrap();
        assert_eq!(blocks.iter().map(|b| b.reads.len()).collect::<Vec<_>>(), vec![4, 1]);
        assert_eq!(blocks.iter().map(|b| b.ordinal).collect::<Vec<_>>(), vec![0, 1]);
        let idx: Vec<u64> = blocks.iter().flat_map(|b| b.reads.iter().map(|r| r.orig_index)).collect();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn parse_error_names_file_and_line() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = fastq(&["ACGT", "ACGT"]);
        body.push_str("@bad\nAC!T\n+\n!!!!\n");
        let p = write_tmp(&dir, "bad.fq", body.as_bytes());
        let err = read_all(&[&p], false).unwrap_err();
        match err {
            Error::Parse { file, line, .. } => {
                assert!(file.ends_with("bad.fq"));
                assert_eq!(line, 10);
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        let err = open_input(&["/definitely/not/here.fq"], false, 10).err().unwrap();
        assert!(is_not_found(&err));
    }

    #[test]
    fn gzip_input() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.fq.gz");
        let mut enc = flate2::write::GzEncoder::new(File::create(&p).unwrap(), flate2::Compression::fast());
        enc.write_all(fastq(&["ACGT", "TTGA", "CANN"]).as_bytes()).unwrap();
        enc.finish().unwrap();
        let reads = read_all(&[&p], true).unwrap();
        let seqs: Vec<&[u8]> = reads.iter().map(|r| r.seq.as_slice()).collect();
        assert_eq!(seqs, vec![&b"ACGT"[..], b"TTGA", b"CANN"]);
    }

    #[test]
    fn dna_output_format() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.dna");
        write_dna_file([b"ACGT".as_slice(), b"GGTA"], &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"ACGT\nGGTA\n");
        write_dna_file(Vec::<Vec<u8>>::new(), &p).unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"");
    }

    #[test]
    fn dna_output_line_count() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("o.dna");
        let reads: Vec<Vec<u8>> = (0..1000).map(|i| vec![b"ACGT"[i % 4]; 1 + i % 7]).collect();
        assert_eq!(write_dna_file(&reads, &p).unwrap(), 1000);
        let newlines = std::fs::read(&p).unwrap().iter().filter(|&&b| b == b'\n').count();
        assert_eq!(newlines, 1000);
    }
}
