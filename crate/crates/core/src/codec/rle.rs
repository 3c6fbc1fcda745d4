//! Run-length description of mismatch positions for general overlaps.
//!
//! The description walks the overlap positions that lie outside the
//! signature. Each byte is a run of matching positions; a byte below 255
//! with positions still left implies a mismatch right after the run, which
//! is skipped. A mismatch directly after another one is a zero byte. Runs of
//! 255 or more are split into 255-bytes that imply nothing.

use crate::bytes::ByteReader;
use crate::error::{corrupt, Result};

const RUN_MAX: usize = 255;

fn push_run(out: &mut Vec<u8>, mut run: usize) {
    while run >= RUN_MAX {
        out.push(RUN_MAX as u8);
        run -= RUN_MAX;
    }
    out.push(run as u8);
}

/// Appends the description of `mismatches`, given as sorted ordinals in
/// `0..total`, where `total` counts overlap positions outside the signature.
pub(crate) fn push_matches_rle(out: &mut Vec<u8>, mismatches: &[usize], total: usize) {
    let mut pos = 0;
    for &m in mismatches {
        assert!(m >= pos && m < total, "mismatch ordinals must be sorted and inside the overlap");
        push_run(out, m - pos);
        pos = m + 1;
    }
    if pos < total {
        let mut run = total - pos;
        while run >= RUN_MAX {
            out.push(RUN_MAX as u8);
            run -= RUN_MAX;
        }
        if run > 0 {
            out.push(run as u8);
        }
    }
}

/// RLE bytes for one read whose overlap spans `overlap_len` symbols,
/// `sig_span` of them covered by the signature.
pub fn encode_matches_rle(mismatches: &[usize], overlap_len: usize, sig_span: usize) -> Vec<u8> {
    let total = overlap_len
        .checked_sub(sig_span)
        .expect("signature span exceeds overlap");
    let mut out = Vec::new();
    push_matches_rle(&mut out, mismatches, total);
    out
}

pub(crate) fn read_matches_rle(r: &mut ByteReader<'_>, total: usize, out: &mut Vec<usize>) -> Result<()> {
    let mut pos = 0usize;
    while pos < total {
        let b = r.u8().map_err(|_| corrupt("matches stream underrun"))? as usize;
        pos += b;
        if pos > total {
            return Err(corrupt("match run overruns the overlap"));
        }
        if b < RUN_MAX && pos < total {
            out.push(pos);
            pos += 1;
        }
    }
    Ok(())
}

/// Inverse of [`encode_matches_rle`]; returns the mismatch ordinals and the
/// number of bytes consumed.
pub fn decode_matches_rle(bytes: &[u8], overlap_len: usize, sig_span: usize) -> Result<(Vec<usize>, usize)> {
    let total = overlap_len
        .checked_sub(sig_span)
        .ok_or_else(|| corrupt("signature span exceeds overlap"))?;
    let mut r = ByteReader::new(bytes);
    let mut out = Vec::new();
    read_matches_rle(&mut r, total, &mut out)?;
    Ok((out, r.position()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent oracle: walk an explicit match/mismatch bitmap.
    fn oracle(bitmap: &[bool]) -> Vec<u8> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < bitmap.len() {
            let mut run = 0;
            while i < bitmap.len() && !bitmap[i] && run < 255 {
                run += 1;
                i += 1;
            }
            if run == 255 {
                out.push(255);
                continue;
            }
            if i == bitmap.len() {
                if run > 0 {
                    out.push(run as u8);
                }
                break;
            }
            // bitmap[i] is a mismatch, implied by the byte.
            out.push(run as u8);
            i += 1;
        }
        out
    }

    #[test]
    fn running_example() {
        // 13 overlapping symbols, 4 of them signature, mismatch after one match.
        assert_eq!(encode_matches_rle(&[1], 13, 4), vec![1, 7]);
        assert_eq!(decode_matches_rle(&[1, 7], 13, 4).unwrap(), (vec![1], 2));
    }

    #[test]
    fn single_run() {
        assert_eq!(encode_matches_rle(&[], 10, 4), vec![6]);
    }

    #[test]
    fn adjacent_mismatches_at_start() {
        let enc = encode_matches_rle(&[0, 1], 10, 4);
        assert_eq!(enc, vec![0, 0, 4]);
        let mut bitmap = vec![false; 6];
        bitmap[0] = true;
        bitmap[1] = true;
        assert_eq!(enc, oracle(&bitmap));
    }

    #[test]
    fn long_runs() {
        assert_eq!(encode_matches_rle(&[300], 400, 0), vec![255, 45, 99]);
        assert_eq!(encode_matches_rle(&[255], 256, 0), vec![255, 0]);
        assert_eq!(encode_matches_rle(&[], 255, 0), vec![255]);
        assert_eq!(encode_matches_rle(&[9], 10, 0), vec![9]);
    }

    #[test]
    fn overrun_is_corrupt() {
        assert!(decode_matches_rle(&[7], 10, 4).is_err());
        assert!(decode_matches_rle(&[1], 10, 4).is_err());
    }

    proptest! {
        #[test]
        fn matches_oracle_and_inverts(bitmap in proptest::collection::vec(proptest::bool::weighted(0.1), 0..700)) {
            let mismatches: Vec<usize> = bitmap.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
            let enc = encode_matches_rle(&mismatches, bitmap.len(), 0);
            prop_assert_eq!(&enc, &oracle(&bitmap));
            let (dec, used) = decode_matches_rle(&enc, bitmap.len(), 0).unwrap();
            prop_assert_eq!(dec, mismatches);
            prop_assert_eq!(used, enc.len());
        }
    }
}
