//! Canonical-minimizer signatures: the bin key of every read.
//!
//! A read's signature is the lexicographically smallest *allowed* p-mer
//! among the p-mers of the read and of its reverse complement, searched
//! only outside a skip zone of `z` trailing symbols. A p-mer is allowed
//! when it has no `N` and no run `AAA`, `CCC`, `GGG` or `TTT`.

use crate::alphabet::{self, N_CODE};
use crate::error::{Error, Result};

pub use crate::alphabet::reverse_complement;

pub const DEFAULT_SIGNATURE_LEN: usize = 8;
pub const DEFAULT_SKIP_ZONE: usize = 12;
pub const MAX_SIGNATURE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureParams {
    len: usize,
    skip_zone: usize,
}

impl SignatureParams {
    pub fn new(len: usize, skip_zone: usize) -> Result<Self> {
        if !(1..=MAX_SIGNATURE_LEN).contains(&len) {
            return Err(Error::InvalidParam(format!(
                "signature length {len} outside 1..={MAX_SIGNATURE_LEN}"
            )));
        }
        if skip_zone > u16::MAX as usize {
            return Err(Error::InvalidParam(format!("skip zone {skip_zone} too large")));
        }
        Ok(Self { len, skip_zone })
    }

    /// Signature length `p`.
    pub fn len(&self) -> usize {
        self.len
    }

    /// Skip-zone length `z`.
    pub fn skip_zone(&self) -> usize {
        self.skip_zone
    }

    /// Zone actually applied to a read of length `r >= p`: shrunk so that at
    /// least one candidate position remains.
    pub fn effective_zone(&self, read_len: usize) -> usize {
        self.skip_zone.min(read_len.saturating_sub(self.len))
    }

    /// Bin code reserved for reads without an allowed signature.
    pub fn n_bin(&self) -> BinId {
        BinId(1u64 << (2 * self.len))
    }
}

impl Default for SignatureParams {
    fn default() -> Self {
        Self {
            len: DEFAULT_SIGNATURE_LEN,
            skip_zone: DEFAULT_SKIP_ZONE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignatureHit {
    /// The p-mer packed two bits per symbol, first symbol most significant.
    pub code: u32,
    /// Start of the signature within the read in its stored orientation.
    pub pos: usize,
    /// The read is stored reverse-complemented.
    pub reversed: bool,
}

impl SignatureHit {
    pub fn symbols(&self, p: usize) -> Vec<u8> {
        decode_kmer(self.code as u64, p)
    }
}

/// Bin identifier: the base-4 signature code, or `4^p` for the N bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinId(pub u64);

impl BinId {
    pub fn is_n_bin(self, p: usize) -> bool {
        self.0 == 1u64 << (2 * p)
    }

    /// Signature symbols of this bin, `None` for the N bin.
    pub fn signature(self, p: usize) -> Option<Vec<u8>> {
        (self.0 < 1u64 << (2 * p)).then(|| decode_kmer(self.0, p))
    }
}

fn decode_kmer(code: u64, p: usize) -> Vec<u8> {
    (0..p)
        .map(|i| alphabet::symbol(((code >> (2 * (p - 1 - i))) & 3) as u8))
        .collect()
}

pub fn is_allowed_signature(pmer: &[u8]) -> bool {
    !pmer.contains(&b'N') && !pmer.windows(3).any(|w| w[0] == w[1] && w[1] == w[2])
}

/// Smallest allowed p-mer code and its leftmost start among positions
/// `0..=last` of `seq`.
fn min_allowed(seq: &[u8], p: usize, last: usize) -> Option<(u32, usize)> {
    let mask: u64 = (1u64 << (2 * p)) - 1;
    let mut code = 0u64;
    // Windows must start at or after this index to avoid N and triples.
    let mut valid_from = 0usize;
    let mut best: Option<(u32, usize)> = None;
    for e in 0..last + p {
        let c = alphabet::code_unchecked(seq[e]);
        if c == N_CODE {
            valid_from = e + 1;
            code = (code << 2) & mask;
        } else {
            code = ((code << 2) | c as u64) & mask;
        }
        if e >= 2 && seq[e] == seq[e - 1] && seq[e] == seq[e - 2] {
            valid_from = valid_from.max(e - 1);
        }
        if e + 1 >= p {
            let start = e + 1 - p;
            if start >= valid_from && best.map_or(true, |(b, _)| (code as u32) < b) {
                best = Some((code as u32, start));
            }
        }
    }
    best
}

/// Canonical signature of `read`, or `None` when no allowed p-mer exists in
/// either orientation (the read then belongs to the N bin).
///
/// Ties prefer the forward orientation, then the leftmost position.
pub fn find_signature(read: &[u8], params: &SignatureParams) -> Option<SignatureHit> {
    let mut rc = Vec::new();
    find_signature_with(read, params, &mut rc)
}

pub(crate) fn find_signature_with(
    read: &[u8],
    params: &SignatureParams,
    rc: &mut Vec<u8>,
) -> Option<SignatureHit> {
    let p = params.len;
    let r = read.len();
    if r < p {
        return None;
    }
    let last = r - params.effective_zone(r) - p;
    let fwd = min_allowed(read, p, last);
    alphabet::reverse_complement_into(read, rc);
    let rev = min_allowed(rc, p, last);
    match (fwd, rev) {
        (Some((fc, _)), Some((rc_code, rp))) if rc_code < fc => Some(SignatureHit {
            code: rc_code,
            pos: rp,
            reversed: true,
        }),
        (Some((fc, fp)), _) => Some(SignatureHit {
            code: fc,
            pos: fp,
            reversed: false,
        }),
        (None, Some((rc_code, rp))) => Some(SignatureHit {
            code: rc_code,
            pos: rp,
            reversed: true,
        }),
        (None, None) => None,
    }
}

pub fn bin_of(hit: Option<&SignatureHit>, params: &SignatureParams) -> BinId {
    match hit {
        Some(h) => BinId(h.code as u64),
        None => params.n_bin(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(p: usize, z: usize) -> SignatureParams {
        SignatureParams::new(p, z).unwrap()
    }

    #[test]
    fn allowed_patterns() {
        assert!(is_allowed_signature(b"ACGTACGT"));
        assert!(!is_allowed_signature(b"ACAAAGTC"));
        assert!(!is_allowed_signature(b"ACGNACGT"));
        assert!(!is_allowed_signature(b"ACGTTTGA"));
        assert!(is_allowed_signature(b"AACCGGTT"));
    }

    #[test]
    fn forward_wins_tie() {
        let hit = find_signature(b"ACGTA", &params(3, 0)).unwrap();
        assert_eq!(hit.symbols(3), b"ACG");
        assert_eq!((hit.pos, hit.reversed), (0, false));
    }

    #[test]
    fn all_n_read_has_no_signature() {
        assert_eq!(find_signature(b"NNNNNNNNNNNN", &params(3, 0)), None);
    }

    #[test]
    fn triples_are_skipped() {
        let hit = find_signature(b"AAAACCCC", &params(3, 0)).unwrap();
        assert_eq!(hit.symbols(3), b"AAC");
        assert_eq!((hit.pos, hit.reversed), (2, false));
    }

    #[test]
    fn reverse_orientation_wins() {
        // Forward allowed 3-mers: TGC, GCA, CAT; reverse (ATGCA): ATG, TGC, GCA.
        let hit = find_signature(b"TGCAT", &params(3, 0)).unwrap();
        assert_eq!(hit.symbols(3), b"ATG");
        assert_eq!((hit.pos, hit.reversed), (0, true));
    }

    #[test]
    fn skip_zone_excludes_suffix() {
        // With z=2 only positions 0..=2 are searched in both orientations.
        // Without the zone the forward AAC at position 5 would win.
        let read = b"GTGTCAAC";
        let hit = find_signature(read, &params(3, 2)).unwrap();
        assert!(hit.pos + 3 <= read.len() - 2);
        assert_eq!(hit.symbols(3), b"GAC");
        assert_eq!((hit.pos, hit.reversed), (3, true));
        let unzoned = find_signature(read, &params(3, 0)).unwrap();
        assert_eq!((unzoned.symbols(3), unzoned.pos), (b"AAC".to_vec(), 5));
    }

    #[test]
    fn short_read_shrinks_zone() {
        let p = params(4, 12);
        assert_eq!(p.effective_zone(10), 6);
        let hit = find_signature(b"CAGTCAGTCA", &p).unwrap();
        assert_eq!(hit.pos, 0);
        assert_eq!(find_signature(b"ACG", &p), None);
    }

    #[test]
    fn bin_codes() {
        let p = params(3, 0);
        let hit = SignatureHit { code: 1, pos: 0, reversed: false };
        assert_eq!(hit.symbols(3), b"AAC");
        assert_eq!(bin_of(Some(&hit), &p), BinId(1));
        assert_eq!(bin_of(None, &p), BinId(64));
        assert!(BinId(64).is_n_bin(3));
        assert_eq!(BinId(64).signature(3), None);
        assert_eq!(BinId(27).signature(3).unwrap(), b"CGT");
    }

    #[test]
    fn distinct_signatures_distinct_codes() {
        for p in 1..=6 {
            let mut seen = std::collections::HashSet::new();
            let total = 1usize << (2 * p);
            for code in 0..total as u64 {
                let s = decode_kmer(code, p);
                if !is_allowed_signature(&s) {
                    continue;
                }
                // Place the k-mer alone so it is its own signature at p, z=0
                // whenever the reverse complement is not smaller.
                let h = SignatureHit { code: code as u32, pos: 0, reversed: false };
                assert!(seen.insert(bin_of(Some(&h), &params(p, 0))));
                assert_eq!(BinId(code).signature(p).unwrap(), s);
            }
        }
    }

    #[test]
    fn params_validation() {
        assert!(SignatureParams::new(0, 0).is_err());
        assert!(SignatureParams::new(17, 0).is_err());
        assert!(SignatureParams::new(16, 200).is_ok());
    }
}
