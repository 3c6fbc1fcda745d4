//! The `.cdna` payload plus its `.cmeta` header and directory.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{Backend, BackendSpec, CodedStream, BACKEND_TABLE};
use crate::bytes::{put_u16, put_u32, put_u64, put_varint, ByteReader};
use crate::codec::{MatchParams, MaxDist, StreamId, STREAM_COUNT};
use crate::error::{Error, IoContext, Result};
use crate::signature::{BinId, SignatureParams};

const MAGIC: &[u8; 4] = b"ORCM";
pub const ARCHIVE_VERSION: u16 = 1;
const AUTO_MAX_DIST: u64 = u64::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchiveHeader {
    pub signature: SignatureParams,
    pub matching: MatchParams,
    pub len_width: u8,
    pub total_reads: u64,
    pub total_bases: u64,
    pub table: [BackendSpec; STREAM_COUNT],
}

impl ArchiveHeader {
    pub fn new(signature: SignatureParams, matching: MatchParams) -> Self {
        Self {
            signature,
            matching,
            len_width: crate::binning::LENGTH_WIDTH,
            total_reads: 0,
            total_bases: 0,
            table: BACKEND_TABLE,
        }
    }
}

/// Directory entry of one bin; stream extents follow each other in
/// [`StreamId`] order and bins follow each other in directory order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinEntry {
    pub bin: BinId,
    pub record_count: u64,
    pub raw_len: [u64; STREAM_COUNT],
    pub coded_len: [u64; STREAM_COUNT],
    /// Payload offset of the bin's first stream (derived, not stored).
    pub offset: u64,
}

impl BinEntry {
    pub fn coded_total(&self) -> u64 {
        self.coded_len.iter().sum()
    }
}

pub(crate) fn paths(prefix: &Path) -> (PathBuf, PathBuf) {
    (crate::with_suffix(prefix, "cdna"), crate::with_suffix(prefix, "cmeta"))
}

fn encode_meta(header: &ArchiveHeader, bins: &[BinEntry], payload_len: u64) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u16(&mut out, ARCHIVE_VERSION);
    out.push(header.signature.len() as u8);
    put_u16(&mut out, header.signature.skip_zone() as u16);
    put_u32(&mut out, header.matching.mismatch_cost);
    put_u32(&mut out, header.matching.insert_cost);
    put_u64(
        &mut out,
        match header.matching.max_dist {
            MaxDist::Auto => AUTO_MAX_DIST,
            MaxDist::Fixed(d) => d,
        },
    );
    put_u32(&mut out, header.matching.window as u32);
    out.push(header.len_width);
    put_u64(&mut out, header.total_reads);
    put_u64(&mut out, header.total_bases);
    out.push(STREAM_COUNT as u8);
    for spec in &header.table {
        out.push(spec.stream as u8);
        out.push(spec.backend as u8);
        put_u16(&mut out, spec.alphabet);
        out.push(spec.order);
    }
    put_u32(&mut out, bins.len() as u32);
    put_u64(&mut out, payload_len);
    for b in bins {
        put_varint(&mut out, b.bin.0);
        put_varint(&mut out, b.record_count);
        for i in 0..STREAM_COUNT {
            put_varint(&mut out, b.raw_len[i]);
            put_varint(&mut out, b.coded_len[i]);
        }
    }
    out
}

fn bad(msg: &str) -> Error {
    Error::Format(format!("archive metadata: {msg}"))
}

fn decode_meta(buf: &[u8]) -> Result<(ArchiveHeader, Vec<BinEntry>, u64)> {
    let mut r = ByteReader::new(buf);
    let short = |_| bad("truncated");
    if r.take(4).map_err(short)? != MAGIC {
        return Err(bad("bad magic"));
    }
    let version = r.u16().map_err(short)?;
    if version != ARCHIVE_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let p = r.u8().map_err(short)? as usize;
    let z = r.u16().map_err(short)? as usize;
    let signature = SignatureParams::new(p, z).map_err(|_| bad("invalid signature parameters"))?;
    let mismatch_cost = r.u32().map_err(short)?;
    let insert_cost = r.u32().map_err(short)?;
    let max_dist = match r.u64().map_err(short)? {
        AUTO_MAX_DIST => MaxDist::Auto,
        d => MaxDist::Fixed(d),
    };
    let window = r.u32().map_err(short)? as usize;
    let len_width = r.u8().map_err(short)?;
    if len_width != crate::binning::LENGTH_WIDTH {
        return Err(bad("unsupported length width"));
    }
    let total_reads = r.u64().map_err(short)?;
    let total_bases = r.u64().map_err(short)?;
    if r.u8().map_err(short)? as usize != STREAM_COUNT {
        return Err(bad("unexpected stream count"));
    }
    let mut table = BACKEND_TABLE;
    for (i, spec) in table.iter_mut().enumerate() {
        let stream = StreamId::from_index(r.u8().map_err(short)? as usize).ok_or_else(|| bad("unknown stream id"))?;
        if stream.index() != i {
            return Err(bad("backend table out of order"));
        }
        let backend = Backend::from_u8(r.u8().map_err(short)?).ok_or_else(|| bad("unknown backend"))?;
        let alphabet = r.u16().map_err(short)?;
        let order = r.u8().map_err(short)?;
        let valid = match backend {
            Backend::Rc4 => (1..=256).contains(&alphabet) && order <= 4,
            Backend::Cm4 => alphabet == 256 && order == 4,
        };
        if !valid {
            return Err(bad("invalid backend parameters"));
        }
        *spec = BackendSpec { stream, backend, alphabet, order };
    }
    let bin_count = r.u32().map_err(short)?;
    let payload_len = r.u64().map_err(short)?;
    let mut bins = Vec::with_capacity(bin_count.min(1 << 20) as usize);
    let mut offset = 0u64;
    let mut reads = 0u64;
    for _ in 0..bin_count {
        let bin = BinId(r.varint().map_err(short)?);
        if bins.last().is_some_and(|b: &BinEntry| b.bin >= bin) {
            return Err(bad("bins out of order"));
        }
        if bin.0 > signature.n_bin().0 {
            return Err(bad("bin code out of range"));
        }
        let record_count = r.varint().map_err(short)?;
        let mut raw_len = [0; STREAM_COUNT];
        let mut coded_len = [0; STREAM_COUNT];
        for i in 0..STREAM_COUNT {
            raw_len[i] = r.varint().map_err(short)?;
            coded_len[i] = r.varint().map_err(short)?;
        }
        let entry = BinEntry { bin, record_count, raw_len, coded_len, offset };
        offset = offset.checked_add(entry.coded_total()).ok_or_else(|| bad("extent overflow"))?;
        reads = reads.saturating_add(record_count);
        bins.push(entry);
    }
    if !r.is_empty() {
        return Err(bad("trailing bytes"));
    }
    if offset != payload_len {
        return Err(bad("directory extents do not cover the payload"));
    }
    if reads != total_reads {
        return Err(bad("record counts disagree with the read total"));
    }
    let header = ArchiveHeader {
        signature,
        matching: MatchParams { mismatch_cost, insert_cost, max_dist, window },
        len_width,
        total_reads,
        total_bases,
        table,
    };
    Ok((header, bins, payload_len))
}

/// Appends coded bins to `<prefix>.cdna`; writes `<prefix>.cmeta` on finish.
pub struct ArchiveWriter {
    header: ArchiveHeader,
    data: BufWriter<File>,
    data_path: PathBuf,
    meta_path: PathBuf,
    bins: Vec<BinEntry>,
    offset: u64,
}

impl ArchiveWriter {
    pub fn create(prefix: impl AsRef<Path>, header: ArchiveHeader) -> Result<Self> {
        let (data_path, meta_path) = paths(prefix.as_ref());
        let data = BufWriter::new(File::create(&data_path).at(&data_path)?);
        Ok(Self { header, data, data_path, meta_path, bins: Vec::new(), offset: 0 })
    }

    /// Adds the next bin; bins must arrive in increasing code order.
    pub fn push_bin(&mut self, bin: BinId, record_count: u64, coded: &[CodedStream]) -> Result<()> {
        assert_eq!(coded.len(), STREAM_COUNT, "a bin carries every stream");
        assert!(self.bins.last().is_none_or(|b| b.bin < bin), "bins must be pushed in code order");
        let mut raw_len = [0; STREAM_COUNT];
        let mut coded_len = [0; STREAM_COUNT];
        for (i, c) in coded.iter().enumerate() {
            debug_assert_eq!(c.stream.index(), i);
            raw_len[i] = c.raw_len;
            coded_len[i] = c.bytes.len() as u64;
            self.data.write_all(&c.bytes).at(&self.data_path)?;
        }
        let entry = BinEntry { bin, record_count, raw_len, coded_len, offset: self.offset };
        self.offset += entry.coded_total();
        self.header.total_reads += record_count;
        self.bins.push(entry);
        Ok(())
    }

    pub fn header_mut(&mut self) -> &mut ArchiveHeader {
        &mut self.header
    }

    /// Flushes the payload and writes the metadata; returns `(cdna, cmeta)`
    /// sizes in bytes.
    pub fn finish(mut self) -> Result<(u64, u64)> {
        self.data.flush().at(&self.data_path)?;
        self.data.get_ref().sync_data().at(&self.data_path)?;
        let meta = encode_meta(&self.header, &self.bins, self.offset);
        fs::write(&self.meta_path, &meta).at(&self.meta_path)?;
        Ok((self.offset, meta.len() as u64))
    }
}

pub struct ArchiveReader {
    pub header: ArchiveHeader,
    pub bins: Vec<BinEntry>,
    data_path: PathBuf,
    meta_len: u64,
}

impl ArchiveReader {
    pub fn open(prefix: impl AsRef<Path>) -> Result<Self> {
        let (data_path, meta_path) = paths(prefix.as_ref());
        let meta = fs::read(&meta_path).at(&meta_path)?;
        let (header, bins, payload_len) = decode_meta(&meta)?;
        let actual = fs::metadata(&data_path).at(&data_path)?.len();
        if actual != payload_len {
            return Err(Error::Format(format!(
                "{} holds {actual} bytes, metadata expects {payload_len}",
                data_path.display()
            )));
        }
        Ok(Self { header, bins, data_path, meta_len: meta.len() as u64 })
    }

    pub fn payload_len(&self) -> u64 {
        self.bins.iter().map(BinEntry::coded_total).sum()
    }

    pub fn meta_len(&self) -> u64 {
        self.meta_len
    }

    pub fn data_path(&self) -> &Path {
        &self.data_path
    }

    /// Coded bytes of every stream of `entry`, in stream order.
    pub fn read_bin(&self, file: &mut File, entry: &BinEntry) -> Result<Vec<Vec<u8>>> {
        file.seek(SeekFrom::Start(entry.offset)).at(&self.data_path)?;
        let mut out = Vec::with_capacity(STREAM_COUNT);
        for &len in &entry.coded_len {
            let mut buf = vec![0u8; len as usize];
            file.read_exact(&mut buf).at(&self.data_path)?;
            out.push(buf);
        }
        Ok(out)
    }

    pub fn open_data(&self) -> Result<File> {
        File::open(&self.data_path).at(&self.data_path)
    }
}
