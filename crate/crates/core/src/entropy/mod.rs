//! Entropy coding of stream sets and the compressed archive container.

mod archive;
mod cm4;
mod range_coder;
mod rc4;

pub use archive::{ArchiveHeader, ArchiveReader, ArchiveWriter, BinEntry, ARCHIVE_VERSION};
pub use cm4::{cm_decode, cm_encode, MODEL_MEMORY};
pub use rc4::{rc_decode, rc_encode, DEFAULT_ORDER};

use crate::codec::{Flag, StreamId, StreamSet, STREAM_COUNT};
use crate::error::{corrupt, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Backend {
    /// Adaptive order-4 range coder over a small alphabet.
    Rc4 = 0,
    /// Order-4 context-model byte coder with escapes.
    Cm4 = 1,
}

impl Backend {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(Backend::Rc4),
            1 => Some(Backend::Cm4),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Backend::Rc4 => "RC4",
            Backend::Cm4 => "CM4",
        }
    }
}

/// How one stream is entropy coded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackendSpec {
    pub stream: StreamId,
    pub backend: Backend,
    /// Symbol alphabet size for [`Backend::Rc4`]; 256 for byte streams.
    pub alphabet: u16,
    pub order: u8,
}

const fn rc(stream: StreamId, alphabet: u16) -> BackendSpec {
    BackendSpec { stream, backend: Backend::Rc4, alphabet, order: 4 }
}

const fn cm(stream: StreamId) -> BackendSpec {
    BackendSpec { stream, backend: Backend::Cm4, alphabet: 256, order: 4 }
}

/// The fixed stream-to-backend assignment, indexed by [`StreamId::index`].
pub const BACKEND_TABLE: [BackendSpec; STREAM_COUNT] = [
    rc(StreamId::Flags, Flag::ALPHABET as u16),
    rc(StreamId::Rev, 2),
    cm(StreamId::Lengths),
    cm(StreamId::Prev),
    cm(StreamId::Shift),
    rc(StreamId::LettersA, 4),
    rc(StreamId::LettersC, 4),
    rc(StreamId::LettersG, 4),
    rc(StreamId::LettersT, 4),
    cm(StreamId::LettersN),
    cm(StreamId::Matches),
    cm(StreamId::Hreads),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedStream {
    pub stream: StreamId,
    pub backend: Backend,
    pub raw_len: u64,
    pub bytes: Vec<u8>,
}

pub fn encode_stream(spec: &BackendSpec, raw: &[u8]) -> Result<CodedStream> {
    let bytes = match spec.backend {
        Backend::Rc4 => rc_encode(raw, spec.alphabet as usize, spec.order as usize)?,
        Backend::Cm4 => cm_encode(raw),
    };
    Ok(CodedStream {
        stream: spec.stream,
        backend: spec.backend,
        raw_len: raw.len() as u64,
        bytes,
    })
}

pub fn decode_stream(spec: &BackendSpec, bytes: &[u8], raw_len: u64) -> Result<Vec<u8>> {
    let len = usize::try_from(raw_len).map_err(|_| corrupt("stream length overflows memory"))?;
    match spec.backend {
        Backend::Rc4 => rc_decode(bytes, len, spec.alphabet as usize, spec.order as usize),
        Backend::Cm4 => cm_decode(bytes, len),
    }
}

/// Codes every stream of a bin with `table`.
pub fn encode_streams(streams: &StreamSet, table: &[BackendSpec; STREAM_COUNT]) -> Result<Vec<CodedStream>> {
    table.iter().map(|spec| encode_stream(spec, streams.get(spec.stream))).collect()
}

/// Inverse of [`encode_streams`]; `coded` pairs each stream's bytes with its
/// raw length, in stream order.
pub fn decode_streams(coded: &[(&[u8], u64)], table: &[BackendSpec; STREAM_COUNT]) -> Result<StreamSet> {
    if coded.len() != STREAM_COUNT {
        return Err(corrupt("wrong number of coded streams"));
    }
    let mut set = StreamSet::new();
    for (spec, &(bytes, raw_len)) in table.iter().zip(coded) {
        *set.get_mut(spec.stream) = decode_stream(spec, bytes, raw_len)?;
    }
    Ok(set)
}
