//! End-to-end drivers for the two stages: reads → bins and bins → archive,
//! plus their inverses.

use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::mpsc::sync_channel;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::binning::{self, BinCatalog, BinRecord, BinWriter, DEFAULT_BIN_BUFFER};
use crate::codec::{self, BinContext, MatchParams, StreamId, StreamSet, STREAM_COUNT};
use crate::entropy::{self, ArchiveHeader, ArchiveReader, ArchiveWriter, BinEntry};
use crate::error::{Error, Result};
use crate::fastq::{self, DnaWriter, InputBlock, ReadRecord, DEFAULT_BLOCK_SIZE, MAX_READ_LEN};
use crate::signature::{BinId, SignatureParams};
use crate::with_suffix;

/// Bin-data bytes handled per parallel batch while packing.
const PACK_BATCH_BYTES: u64 = 64 << 20;

pub fn bin_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(prefix, "bdna"), with_suffix(prefix, "bmeta"))
}

pub fn archive_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (with_suffix(prefix, "cdna"), with_suffix(prefix, "cmeta"))
}

/// Worker count to use for a requested `threads` (0 = all cores).
pub fn resolve_threads(threads: usize) -> usize {
    if threads > 0 {
        threads
    } else {
        std::thread::available_parallelism().map_or(1, NonZeroUsize::get)
    }
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(resolve_threads(threads))
        .build()
        .map_err(|e| Error::InvalidParam(format!("cannot start worker pool: {e}")))
}

/// Deletes the listed files on drop unless disarmed, so failed runs leave
/// no half-written outputs behind.
struct OutputGuard {
    paths: Vec<PathBuf>,
    armed: bool,
}

impl OutputGuard {
    fn new(paths: impl IntoIterator<Item = PathBuf>) -> Self {
        Self { paths: paths.into_iter().collect(), armed: true }
    }

    fn disarm(mut self) {
        self.armed = false;
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.armed {
            for p in &self.paths {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BinOptions {
    pub signature: SignatureParams,
    /// Input symbols per block.
    pub block_size: usize,
    /// Per-bin buffer size before a chunk is written out.
    pub bin_buffer: usize,
    /// Worker threads, 0 = all cores.
    pub threads: usize,
}

impl Default for BinOptions {
    fn default() -> Self {
        Self {
            signature: SignatureParams::default(),
            block_size: DEFAULT_BLOCK_SIZE,
            bin_buffer: DEFAULT_BIN_BUFFER,
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub reads: u64,
    pub bases: u64,
    pub bins: usize,
    pub blocks: u32,
    pub data_bytes: u64,
    pub meta_bytes: u64,
    pub elapsed: Duration,
}

/// Clusters FASTQ `inputs` into `<output>.bdna` / `<output>.bmeta`.
pub fn bin_encode<P: AsRef<Path>>(inputs: &[P], gzipped: bool, output: &Path, opts: &BinOptions) -> Result<BinSummary> {
    let reader = fastq::open_input(inputs, gzipped, opts.block_size)?;
    bin_encode_blocks(reader, output, opts)
}

/// Splits in-memory reads into blocks of at most `block_size` symbols.
pub fn blocks_from_reads<I, S>(reads: I, block_size: usize) -> impl Iterator<Item = Result<InputBlock>> + Send
where
    I: IntoIterator<Item = S>,
    I::IntoIter: Send,
    S: AsRef<[u8]> + Send,
{
    let mut it = reads.into_iter().peekable();
    let mut index = 0u64;
    let mut ordinal = 0u32;
    let mut failed = false;
    std::iter::from_fn(move || {
        if failed {
            return None;
        }
        let mut reads = Vec::new();
        let mut bytes = 0;
        while let Some(r) = it.peek() {
            let len = r.as_ref().len();
            if !reads.is_empty() && bytes + len > block_size {
                break;
            }
            let seq = it.next().expect("peeked").as_ref().to_vec();
            if seq.is_empty() || seq.len() > MAX_READ_LEN || seq.iter().any(|&b| crate::alphabet::code(b).is_none()) {
                failed = true;
                return Some(Err(Error::InvalidParam(format!("read {index} is not a valid sequence"))));
            }
            bytes += len;
            reads.push(ReadRecord { seq, orig_index: index });
            index += 1;
        }
        if reads.is_empty() {
            return None;
        }
        ordinal += 1;
        Some(Ok(InputBlock { reads, ordinal: ordinal - 1 }))
    })
}

/// Stage one over any block source. One thread reads ahead, the pool finds
/// signatures, and the calling thread appends to the bin file.
pub fn bin_encode_blocks<I>(blocks: I, output: &Path, opts: &BinOptions) -> Result<BinSummary>
where
    I: Iterator<Item = Result<InputBlock>> + Send,
{
    let start = Instant::now();
    let (data_path, meta_path) = bin_paths(output);
    let guard = OutputGuard::new([data_path.clone(), meta_path.clone()]);
    let pool = pool(opts.threads)?;
    let mut writer = BinWriter::create(&data_path, opts.signature, opts.bin_buffer)?;
    let mut blocks_seen = 0u32;
    std::thread::scope(|s| -> Result<()> {
        let (tx, rx) = sync_channel::<Result<InputBlock>>(2);
        s.spawn(move || {
            for b in blocks {
                if tx.send(b).is_err() {
                    break;
                }
            }
        });
        for block in rx {
            let block = block?;
            let routed = pool.install(|| binning::dispatch_ordered(&block.reads, &opts.signature));
            for (bin, rec) in &routed {
                writer.push(*bin, rec)?;
            }
            blocks_seen += 1;
        }
        Ok(())
    })?;
    let catalog = writer.finish()?;
    catalog.write(&meta_path)?;
    let meta_bytes = std::fs::metadata(&meta_path).map(|m| m.len()).unwrap_or(0);
    guard.disarm();
    Ok(BinSummary {
        reads: catalog.total_reads,
        bases: catalog.total_bases,
        bins: catalog.bins.len(),
        blocks: blocks_seen,
        data_bytes: catalog.data_len,
        meta_bytes,
        elapsed: start.elapsed(),
    })
}

/// Writes every binned read, in original orientation, one per line; bins
/// follow code order. Returns the number of reads.
pub fn bin_decode(input: &Path, output: &Path, threads: usize) -> Result<u64> {
    let (data_path, meta_path) = bin_paths(input);
    let catalog = BinCatalog::read(&meta_path)?;
    let file_len = std::fs::metadata(&data_path).map_err(|e| Error::IoAt { path: data_path.clone(), source: e })?.len();
    if file_len != catalog.data_len {
        return Err(Error::Format(format!(
            "{} holds {file_len} bytes, catalog expects {}",
            data_path.display(),
            catalog.data_len
        )));
    }
    let guard = OutputGuard::new([output.to_path_buf()]);
    let pool = pool(threads)?;
    let mut out = DnaWriter::create(output)?;
    let bins: Vec<BinId> = catalog.bins.keys().copied().collect();
    for batch in batches(&bins, |b| bin_bytes(&catalog, *b)) {
        let decoded: Vec<Vec<Vec<u8>>> = pool.install(|| {
            batch
                .par_iter()
                .map(|&bin| {
                    binning::fetch_bin(bin, &data_path, &catalog).map(|recs| recs.iter().map(BinRecord::original).collect())
                })
                .collect::<Result<_>>()
        })?;
        for read in decoded.iter().flatten() {
            out.write_read(read)?;
        }
    }
    let n = out.finish()?;
    guard.disarm();
    Ok(n)
}

fn bin_bytes(catalog: &BinCatalog, bin: BinId) -> u64 {
    catalog.bins.get(&bin).map_or(0, |c| c.iter().map(|c| c.byte_len).sum())
}

/// Consecutive runs of `items` whose summed weight stays near
/// [`PACK_BATCH_BYTES`]; every run holds at least one item.
fn batches<'a, T>(items: &'a [T], weight: impl Fn(&T) -> u64) -> impl Iterator<Item = &'a [T]> {
    let mut rest = items;
    std::iter::from_fn(move || {
        if rest.is_empty() {
            return None;
        }
        let mut total = 0;
        let mut n = 0;
        while n < rest.len() && (n == 0 || total + weight(&rest[n]) <= PACK_BATCH_BYTES) {
            total += weight(&rest[n]);
            n += 1;
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Some(head)
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PackOptions {
    pub matching: MatchParams,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackSummary {
    pub reads: u64,
    pub bases: u64,
    pub bins: usize,
    pub cdna_bytes: u64,
    pub cmeta_bytes: u64,
    /// Raw and coded bytes per stream, summed over bins.
    pub streams: [(u64, u64); STREAM_COUNT],
    pub flag_counts: [u64; 5],
    pub elapsed: Duration,
}

impl PackSummary {
    pub fn archive_bytes(&self) -> u64 {
        self.cdna_bytes + self.cmeta_bytes
    }

    /// Bits per input base over both archive files.
    pub fn bpb(&self) -> f64 {
        if self.bases == 0 {
            0.0
        } else {
            8.0 * self.archive_bytes() as f64 / self.bases as f64
        }
    }
}

fn context_for(bin: BinId, p: usize) -> BinContext {
    BinContext { p, signature: bin.signature(p) }
}

/// Sorts and codes one bin.
pub fn pack_bin(mut records: Vec<BinRecord>, bin: BinId, p: usize, matching: &MatchParams) -> Result<(StreamSet, Vec<entropy::CodedStream>)> {
    codec::sort_bin(&mut records);
    let streams = codec::encode_bin(&records, &context_for(bin, p), matching);
    let coded = entropy::encode_streams(&streams, &entropy::BACKEND_TABLE)?;
    Ok((streams, coded))
}

/// Stage two: codes every bin of `<input>.bdna` into `<output>.cdna` and
/// `<output>.cmeta`.
pub fn pack_encode(input: &Path, output: &Path, opts: &PackOptions) -> Result<PackSummary> {
    let start = Instant::now();
    opts.matching.validate()?;
    let (data_path, meta_path) = bin_paths(input);
    let catalog = BinCatalog::read(&meta_path)?;
    let file_len = std::fs::metadata(&data_path).map_err(|e| Error::IoAt { path: data_path.clone(), source: e })?.len();
    if file_len != catalog.data_len {
        return Err(Error::Format(format!(
            "{} holds {file_len} bytes, catalog expects {}",
            data_path.display(),
            catalog.data_len
        )));
    }
    let (cdna, cmeta) = archive_paths(output);
    let guard = OutputGuard::new([cdna, cmeta]);
    let pool = pool(opts.threads)?;
    let p = catalog.signature.len();
    let mut header = ArchiveHeader::new(catalog.signature, opts.matching);
    header.total_bases = catalog.total_bases;
    let mut writer = ArchiveWriter::create(output, header)?;
    let mut streams = [(0u64, 0u64); STREAM_COUNT];
    let mut flag_counts = [0u64; 5];
    let bins: Vec<BinId> = catalog.bins.keys().copied().collect();
    for batch in batches(&bins, |b| bin_bytes(&catalog, *b)) {
        let coded = pool.install(|| {
            batch
                .par_iter()
                .map(|&bin| {
                    let records = binning::fetch_bin(bin, &data_path, &catalog)?;
                    let n = records.len() as u64;
                    let (set, coded) = pack_bin(records, bin, p, &opts.matching)?;
                    let mut flags = [0u64; 5];
                    for &f in set.get(StreamId::Flags) {
                        flags[f as usize] += 1;
                    }
                    Ok((bin, n, coded, flags))
                })
                .collect::<Result<Vec<_>>>()
        })?;
        for (bin, n, coded, flags) in coded {
            for (acc, c) in streams.iter_mut().zip(&coded) {
                acc.0 += c.raw_len;
                acc.1 += c.bytes.len() as u64;
            }
            for (a, f) in flag_counts.iter_mut().zip(flags) {
                *a += f;
            }
            writer.push_bin(bin, n, &coded)?;
        }
    }
    let (cdna_bytes, cmeta_bytes) = writer.finish()?;
    guard.disarm();
    Ok(PackSummary {
        reads: catalog.total_reads,
        bases: catalog.total_bases,
        bins: bins.len(),
        cdna_bytes,
        cmeta_bytes,
        streams,
        flag_counts,
        elapsed: start.elapsed(),
    })
}

/// Decodes one bin's coded streams back to records in sorted order.
pub fn unpack_bin(entry: &BinEntry, coded: &[Vec<u8>], header: &ArchiveHeader) -> Result<Vec<BinRecord>> {
    let refs: Vec<(&[u8], u64)> = coded.iter().zip(entry.raw_len).map(|(c, r)| (c.as_slice(), r)).collect();
    let set = entropy::decode_streams(&refs, &header.table)?;
    let count = usize::try_from(entry.record_count).map_err(|_| crate::error::corrupt("record count overflows"))?;
    codec::decode_bin(&set, count, &context_for(entry.bin, header.signature.len()))
}

/// Restores every read of an archive, original orientation, one per line.
pub fn pack_decode(input: &Path, output: &Path, threads: usize) -> Result<u64> {
    let archive = ArchiveReader::open(input)?;
    let guard = OutputGuard::new([output.to_path_buf()]);
    let pool = pool(threads)?;
    let mut file = archive.open_data()?;
    let mut out = DnaWriter::create(output)?;
    for batch in batches(&archive.bins, BinEntry::coded_total) {
        let raw: Vec<Vec<Vec<u8>>> = batch.iter().map(|e| archive.read_bin(&mut file, e)).collect::<Result<_>>()?;
        let decoded: Vec<Vec<BinRecord>> = pool.install(|| {
            batch
                .par_iter()
                .zip(&raw)
                .map(|(e, coded)| unpack_bin(e, coded, &archive.header))
                .collect::<Result<_>>()
        })?;
        for r in decoded.iter().flatten() {
            out.write_read(&r.original())?;
        }
    }
    let n = out.finish()?;
    if n != archive.header.total_reads {
        return Err(crate::error::corrupt("decoded read count disagrees with the header"));
    }
    guard.disarm();
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_covers_everything() {
        let w = [10u64, PACK_BATCH_BYTES, 5, 5, PACK_BATCH_BYTES * 2, 1];
        let got: Vec<usize> = batches(&w, |x| *x).map(<[u64]>::len).collect();
        assert_eq!(got.iter().sum::<usize>(), w.len());
        assert_eq!(got, vec![1, 1, 2, 1, 1]);
        assert_eq!(batches(&[] as &[u64], |x| *x).count(), 0);
    }

    #[test]
    fn blocks_split_by_symbols() {
        let reads = ["ACGTA", "ACGTA", "ACGTA", "ACGTA", "ACGTA"];
        let blocks: Vec<InputBlock> = blocks_from_reads(reads, 20).collect::<Result<_>>().unwrap();
        assert_eq!(blocks.iter().map(|b| b.reads.len()).collect::<Vec<_>>(), vec![4, 1]);
        assert_eq!(blocks[1].reads[0].orig_index, 4);
        assert!(blocks_from_reads(["ACXT"], 20).next().unwrap().is_err());
    }

    #[test]
    fn guard_removes_on_failure() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"1").unwrap();
        drop(OutputGuard::new([p.clone()]));
        assert!(!p.exists());
        std::fs::write(&p, b"1").unwrap();
        OutputGuard::new([p.clone()]).disarm();
        assert!(p.exists());
    }
}
