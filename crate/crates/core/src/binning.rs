//! Stage one: scatter reads into signature bins kept in a single data file.
//!
//! Every bin accumulates serialized records in its own memory buffer. A
//! buffer that grows past the threshold is sealed into a chunk and appended
//! to the one `.bdna` file; the `.bmeta` catalog remembers where each bin's
//! chunks live.
//!
//! Record layout inside a chunk:
//!
//! ```text
//! len: u16 LE | pos: u16 LE | flags: u8 (bit 0 = reversed) | seq: 3 bits/symbol, LSB first, byte padded
//! ```

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rustc_hash::FxHashMap;

use crate::alphabet;
use crate::bytes::{put_u16, put_u32, put_u64, ByteReader};
use crate::error::{Error, IoContext, Result};
use crate::fastq::{InputBlock, ReadRecord};
use crate::signature::{self, BinId, SignatureParams};

/// `pos` of records in the N bin.
pub const NO_SIGNATURE: u16 = u16::MAX;

pub const DEFAULT_BIN_BUFFER: usize = 8_000_000;

/// Width in bytes of every stored read length.
pub const LENGTH_WIDTH: u8 = 2;

const CATALOG_MAGIC: &[u8; 4] = b"ORBN";
const CATALOG_VERSION: u16 = 1;
const RECORD_HEADER: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinRecord {
    /// Symbols in stored orientation.
    pub seq: Vec<u8>,
    /// Signature start in `seq`, or [`NO_SIGNATURE`].
    pub pos: u16,
    pub reversed: bool,
    /// Input ordinal before binning; after a fetch, the append ordinal
    /// within the bin (which preserves relative input order).
    pub orig_index: u64,
}

impl BinRecord {
    pub fn has_signature(&self) -> bool {
        self.pos != NO_SIGNATURE
    }

    /// The read in its original orientation.
    pub fn original(&self) -> Vec<u8> {
        if self.reversed {
            alphabet::reverse_complement(&self.seq)
        } else {
            self.seq.clone()
        }
    }

    fn serialized_len(&self) -> usize {
        RECORD_HEADER + (3 * self.seq.len()).div_ceil(8)
    }

    fn serialize_into(&self, out: &mut Vec<u8>) {
        put_u16(out, self.seq.len() as u16);
        put_u16(out, self.pos);
        out.push(self.reversed as u8);
        let mut acc = 0u32;
        let mut bits = 0;
        for &s in &self.seq {
            acc |= (alphabet::code_unchecked(s) as u32) << bits;
            bits += 3;
            while bits >= 8 {
                out.push(acc as u8);
                acc >>= 8;
                bits -= 8;
            }
        }
        if bits > 0 {
            out.push(acc as u8);
        }
    }
}

fn deserialize_chunk(buf: &[u8], count: u32, first_ordinal: u64, out: &mut Vec<BinRecord>) -> Result<()> {
    let bad = |what: &str| Error::Format(format!("corrupt bin chunk: {what}"));
    let mut r = ByteReader::new(buf);
    for i in 0..count as u64 {
        let len = r.u16().map_err(|_| bad("record header underrun"))? as usize;
        let pos = r.u16().map_err(|_| bad("record header underrun"))?;
        let flags = r.u8().map_err(|_| bad("record header underrun"))?;
        if len == 0 || (pos != NO_SIGNATURE && pos as usize >= len) || flags > 1 {
            return Err(bad("invalid record header"));
        }
        let packed = r
            .take((3 * len).div_ceil(8))
            .map_err(|_| bad("sequence underrun"))?;
        let mut seq = Vec::with_capacity(len);
        let mut acc = 0u32;
        let mut bits = 0;
        let mut bytes = packed.iter();
        for _ in 0..len {
            while bits < 3 {
                acc |= (*bytes.next().expect("length checked") as u32) << bits;
                bits += 8;
            }
            let c = (acc & 7) as u8;
            if c > alphabet::N_CODE {
                return Err(bad("invalid symbol code"));
            }
            seq.push(alphabet::symbol(c));
            acc >>= 3;
            bits -= 3;
        }
        out.push(BinRecord {
            seq,
            pos,
            reversed: flags & 1 == 1,
            orig_index: first_ordinal + i,
        });
    }
    if !r.is_empty() {
        return Err(bad("record count does not match chunk length"));
    }
    Ok(())
}

/// Finds the signature of `read` and converts it to its stored orientation.
pub fn to_bin_record(read: &ReadRecord, params: &SignatureParams, rc: &mut Vec<u8>) -> (BinId, BinRecord) {
    let hit = signature::find_signature_with(&read.seq, params, rc);
    let bin = signature::bin_of(hit.as_ref(), params);
    let record = match hit {
        Some(h) => BinRecord {
            // `rc` still holds the reverse complement computed by the search.
            seq: if h.reversed { rc.clone() } else { read.seq.clone() },
            pos: h.pos as u16,
            reversed: h.reversed,
            orig_index: read.orig_index,
        },
        None => BinRecord {
            seq: read.seq.clone(),
            pos: NO_SIGNATURE,
            reversed: false,
            orig_index: read.orig_index,
        },
    };
    (bin, record)
}

/// Routes every read of `block` to its bin, in parallel; order within a
/// bin follows input order.
pub fn dispatch_block(block: &InputBlock, params: &SignatureParams) -> BTreeMap<BinId, Vec<BinRecord>> {
    let mut batches: BTreeMap<BinId, Vec<BinRecord>> = BTreeMap::new();
    for (bin, rec) in dispatch_ordered(&block.reads, params) {
        batches.entry(bin).or_default().push(rec);
    }
    batches
}

pub(crate) fn dispatch_ordered(reads: &[ReadRecord], params: &SignatureParams) -> Vec<(BinId, BinRecord)> {
    reads
        .par_iter()
        .with_min_len(1024)
        .map_init(Vec::new, |rc, r| to_bin_record(r, params, rc))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    pub offset: u64,
    pub byte_len: u64,
    pub record_count: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinCatalog {
    pub signature: SignatureParams,
    pub len_width: u8,
    pub total_reads: u64,
    pub total_bases: u64,
    /// Size of the data file the chunks index into.
    pub data_len: u64,
    pub bins: BTreeMap<BinId, Vec<Chunk>>,
}

impl BinCatalog {
    pub fn new(signature: SignatureParams) -> Self {
        Self {
            signature,
            len_width: LENGTH_WIDTH,
            total_reads: 0,
            total_bases: 0,
            data_len: 0,
            bins: BTreeMap::new(),
        }
    }

    pub fn record_count(&self, bin: BinId) -> u64 {
        self.bins
            .get(&bin)
            .map_or(0, |c| c.iter().map(|c| c.record_count as u64).sum())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CATALOG_MAGIC);
        put_u16(&mut out, CATALOG_VERSION);
        out.push(self.signature.len() as u8);
        put_u16(&mut out, self.signature.skip_zone() as u16);
        out.push(self.len_width);
        put_u64(&mut out, self.total_reads);
        put_u64(&mut out, self.total_bases);
        put_u64(&mut out, self.data_len);
        put_u32(&mut out, self.bins.len() as u32);
        for (bin, chunks) in &self.bins {
            put_u64(&mut out, bin.0);
            put_u32(&mut out, chunks.len() as u32);
            for c in chunks {
                put_u64(&mut out, c.offset);
                put_u64(&mut out, c.byte_len);
                put_u32(&mut out, c.record_count);
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let bad = |what: &str| Error::Format(format!("bin catalog: {what}"));
        let under = |_| bad("truncated");
        let mut r = ByteReader::new(buf);
        if r.take(4).map_err(under)? != CATALOG_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = r.u16().map_err(under)?;
        if version != CATALOG_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let p = r.u8().map_err(under)? as usize;
        let z = r.u16().map_err(under)? as usize;
        let signature = SignatureParams::new(p, z).map_err(|e| bad(&e.to_string()))?;
        let len_width = r.u8().map_err(under)?;
        if len_width != LENGTH_WIDTH {
            return Err(bad(&format!("unsupported length width {len_width}")));
        }
        let total_reads = r.u64().map_err(under)?;
        let total_bases = r.u64().map_err(under)?;
        let data_len = r.u64().map_err(under)?;
        let n_bins = r.u32().map_err(under)?;
        let mut bins = BTreeMap::new();
        let mut counted = 0u64;
        for _ in 0..n_bins {
            let code = r.u64().map_err(under)?;
            if code > signature.n_bin().0 {
                return Err(bad("bin code out of range"));
            }
            let n_chunks = r.u32().map_err(under)?;
            let mut chunks = Vec::with_capacity(n_chunks.min(1 << 16) as usize);
            for _ in 0..n_chunks {
                let c = Chunk {
                    offset: r.u64().map_err(under)?,
                    byte_len: r.u64().map_err(under)?,
                    record_count: r.u32().map_err(under)?,
                };
                if c.offset.checked_add(c.byte_len).map_or(true, |end| end > data_len) {
                    return Err(bad("chunk extends past data file"));
                }
                counted += c.record_count as u64;
                chunks.push(c);
            }
            if bins.insert(BinId(code), chunks).is_some() {
                return Err(bad("duplicate bin"));
            }
        }
        if counted != total_reads {
            return Err(bad("chunk record counts do not sum to the read total"));
        }
        if !r.is_empty() {
            return Err(bad("trailing bytes"));
        }
        Ok(Self {
            signature,
            len_width,
            total_reads,
            total_bases,
            data_len,
            bins,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).at(path)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_bytes(&std::fs::read(path).at(path)?)
    }
}

#[derive(Default)]
struct PendingChunk {
    bytes: Vec<u8>,
    count: u32,
}

/// Single appender for the bin data file. Buffers grow per bin and are
/// sealed into chunks once they pass `threshold` bytes, or when the total
/// buffered volume passes `max_buffered`.
pub struct BinWriter {
    path: PathBuf,
    out: BufWriter<File>,
    catalog: BinCatalog,
    buffers: FxHashMap<BinId, PendingChunk>,
    threshold: usize,
    buffered: usize,
    max_buffered: usize,
}

impl BinWriter {
    pub fn create(path: impl AsRef<Path>, params: SignatureParams, threshold: usize) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).at(&path)?;
        Ok(Self {
            out: BufWriter::with_capacity(4 << 20, file),
            path,
            catalog: BinCatalog::new(params),
            buffers: FxHashMap::default(),
            threshold: threshold.max(1),
            buffered: 0,
            max_buffered: threshold.max(1).saturating_mul(128).max(1 << 30),
        })
    }

    /// Caps the total bytes held across all bin buffers.
    pub fn with_max_buffered(mut self, max_buffered: usize) -> Self {
        self.max_buffered = max_buffered.max(1);
        self
    }

    pub fn push(&mut self, bin: BinId, record: &BinRecord) -> Result<()> {
        let buf = self.buffers.entry(bin).or_default();
        let before = buf.bytes.len();
        record.serialize_into(&mut buf.bytes);
        debug_assert_eq!(buf.bytes.len() - before, record.serialized_len());
        buf.count += 1;
        self.buffered += buf.bytes.len() - before;
        self.catalog.total_reads += 1;
        self.catalog.total_bases += record.seq.len() as u64;
        if buf.bytes.len() >= self.threshold || buf.count == u32::MAX {
            self.seal(bin)?;
        }
        if self.buffered >= self.max_buffered {
            self.flush_all()?;
        }
        Ok(())
    }

    /// Appends whole per-bin batches; batches over the threshold are sealed
    /// as they fill.
    pub fn flush_bin_buffers(&mut self, batches: &BTreeMap<BinId, Vec<BinRecord>>) -> Result<()> {
        for (&bin, records) in batches {
            for r in records {
                self.push(bin, r)?;
            }
        }
        Ok(())
    }

    fn seal(&mut self, bin: BinId) -> Result<()> {
        let Some(buf) = self.buffers.get_mut(&bin) else {
            return Ok(());
        };
        if buf.count == 0 {
            return Ok(());
        }
        self.out.write_all(&buf.bytes).at(&self.path)?;
        let chunk = Chunk {
            offset: self.catalog.data_len,
            byte_len: buf.bytes.len() as u64,
            record_count: buf.count,
        };
        self.catalog.data_len += chunk.byte_len;
        self.buffered -= buf.bytes.len();
        buf.bytes.clear();
        buf.count = 0;
        self.catalog.bins.entry(bin).or_default().push(chunk);
        Ok(())
    }

    /// Seals every non-empty buffer, in bin order.
    pub fn flush_all(&mut self) -> Result<()> {
        let mut bins: Vec<BinId> = self
            .buffers
            .iter()
            .filter(|(_, b)| b.count > 0)
            .map(|(&k, _)| k)
            .collect();
        bins.sort_unstable();
        for bin in bins {
            self.seal(bin)?;
        }
        Ok(())
    }

    pub fn catalog(&self) -> &BinCatalog {
        &self.catalog
    }

    /// Flushes everything and returns the finished catalog.
    pub fn finish(mut self) -> Result<BinCatalog> {
        self.flush_all()?;
        self.out.flush().at(&self.path)?;
        Ok(self.catalog)
    }
}

/// Reads back every record of `bin`, in append order. Unlisted bins are
/// empty.
pub fn fetch_bin(bin: BinId, data_path: impl AsRef<Path>, catalog: &BinCatalog) -> Result<Vec<BinRecord>> {
    let Some(chunks) = catalog.bins.get(&bin) else {
        return Ok(Vec::new());
    };
    let path = data_path.as_ref();
    let mut file = File::open(path).at(path)?;
    let mut out = Vec::new();
    let mut buf = Vec::new();
    let mut ordinal = 0u64;
    for c in chunks {
        buf.resize(c.byte_len as usize, 0);
        file.seek(SeekFrom::Start(c.offset)).at(path)?;
        file.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format(format!("{}: bin data file is truncated", path.display()))
            } else {
                Error::IoAt {
                    path: path.to_path_buf(),
                    source: e,
                }
            }
        })?;
        deserialize_chunk(&buf, c.record_count, ordinal, &mut out)?;
        ordinal += c.record_count as u64;
    }
    Ok(out)
}
