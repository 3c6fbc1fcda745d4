//! Compression of sequencing-read DNA by signature binning.
//!
//! Reads are routed to bins keyed by their canonical minimizer (stage one,
//! [`pipeline::bin_encode`]). Each bin is then sorted so that overlapping
//! reads become neighbours, every read is described relative to a similar
//! earlier read, and the resulting streams are entropy coded (stage two,
//! [`pipeline::pack_encode`]). Decoding restores the read multiset; the
//! original read order is not kept.

pub mod alphabet;
pub mod binning;
pub mod bounds;
mod bytes;
pub mod codec;
pub mod entropy;
pub mod error;
pub mod fastq;
pub mod pipeline;
pub mod signature;
pub mod simulate;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

pub use binning::{BinCatalog, BinRecord};
pub use codec::{Flag, MatchParams, MaxDist, StreamId, StreamSet};
pub use error::{Error, Result};
pub use fastq::ReadRecord;
pub use signature::{find_signature, BinId, SignatureHit, SignatureParams};

/// `prefix` with `.ext` appended, keeping any extension it already has.
pub fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}
