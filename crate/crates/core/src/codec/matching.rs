//! Signature-anchored comparison of a read against earlier reads of its bin.

use std::ops::Range;

use super::{Flag, MatchParams};
use crate::binning::BinRecord;

/// Outcome of aligning `cur` onto a reference with both signatures
/// superimposed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    pub distance: u64,
    /// `reference.pos - cur.pos`: cur position `t` sits over reference
    /// position `t + shift`.
    pub shift: i32,
    /// Positions of `cur` that have a reference symbol beneath them.
    pub overlap: Range<usize>,
    /// Positions of `cur` inside the overlap whose symbol differs.
    pub mismatches: Vec<usize>,
}

impl Alignment {
    pub fn inserts(&self, cur_len: usize) -> usize {
        cur_len - self.overlap.len()
    }
}

#[inline]
pub(crate) fn shift_of(cur: &BinRecord, reference: &BinRecord) -> i32 {
    reference.pos as i32 - cur.pos as i32
}

#[inline]
pub(crate) fn overlap_of(cur_len: usize, ref_len: usize, shift: i32) -> Range<usize> {
    let lo = (-shift).max(0) as usize;
    let hi = (ref_len as i64 - shift as i64).clamp(0, cur_len as i64) as usize;
    lo..hi.max(lo)
}

/// The two overlap segments on either side of the signature.
#[inline]
fn outside_signature(overlap: &Range<usize>, sig_at: usize, p: usize) -> [Range<usize>; 2] {
    [overlap.start..sig_at, sig_at + p..overlap.end]
}

/// Full alignment of two reads of the same signature bin.
pub fn align_and_score(cur: &BinRecord, reference: &BinRecord, p: usize, params: &MatchParams) -> Alignment {
    let shift = shift_of(cur, reference);
    let overlap = overlap_of(cur.seq.len(), reference.seq.len(), shift);
    let mut mismatches = Vec::new();
    for seg in outside_signature(&overlap, cur.pos as usize, p) {
        for t in seg {
            if cur.seq[t] != reference.seq[(t as i64 + shift as i64) as usize] {
                mismatches.push(t);
            }
        }
    }
    let inserts = (cur.seq.len() - overlap.len()) as u64;
    Alignment {
        distance: params.mismatch_cost as u64 * mismatches.len() as u64 + params.insert_cost as u64 * inserts,
        shift,
        overlap,
        mismatches,
    }
}

/// Distance of `cur` against `reference`, or `None` as soon as it is known
/// to exceed `bound`.
fn bounded_distance(cur: &BinRecord, reference: &BinRecord, p: usize, params: &MatchParams, bound: u64) -> Option<u64> {
    let shift = shift_of(cur, reference);
    let overlap = overlap_of(cur.seq.len(), reference.seq.len(), shift);
    let mut d = params.insert_cost as u64 * (cur.seq.len() - overlap.len()) as u64;
    if d > bound {
        return None;
    }
    let cm = params.mismatch_cost as u64;
    for seg in outside_signature(&overlap, cur.pos as usize, p) {
        let rs = (seg.start as i64 + shift as i64) as usize;
        let a = &cur.seq[seg.clone()];
        let b = &reference.seq[rs..rs + seg.len()];
        if a == b {
            continue;
        }
        if cm == 0 {
            continue;
        }
        for (x, y) in a.iter().zip(b) {
            if x != y {
                d += cm;
                if d > bound {
                    return None;
                }
            }
        }
    }
    Some(d)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchResult {
    pub flag: Flag,
    /// Window slot of the reference counted backwards, 0 = most recent.
    pub prev: Option<usize>,
    pub alignment: Option<Alignment>,
}

impl MatchResult {
    fn bare(flag: Flag) -> Self {
        Self {
            flag,
            prev: None,
            alignment: None,
        }
    }
}

pub(crate) fn classify(alignment: &Alignment, ref_len: usize) -> Flag {
    match alignment.mismatches.as_slice() {
        [] => Flag::Ex,
        [t] if (*t as i64 + alignment.shift as i64) as usize == ref_len - 1 => Flag::Mis,
        _ => Flag::Oth,
    }
}

/// Picks the reference for `cur` among `window` (oldest first).
///
/// An exact repeat of the immediately previous read is a copy. Otherwise the
/// window entry of least distance within the read's distance limit wins,
/// ties going to the most recent entry; with no admissible entry the read is
/// dissimilar.
pub fn best_reference(cur: &BinRecord, window: &[BinRecord], p: usize, params: &MatchParams) -> MatchResult {
    let Some(last) = window.last() else {
        return MatchResult::bare(Flag::Diss);
    };
    if last.seq == cur.seq && last.pos == cur.pos {
        return MatchResult::bare(Flag::Copy);
    }
    if !cur.has_signature() {
        return MatchResult::bare(Flag::Diss);
    }
    let mut bound = params.max_dist.limit(cur.seq.len());
    let mut best: Option<usize> = None;
    for (back, reference) in window.iter().rev().enumerate() {
        if let Some(d) = bounded_distance(cur, reference, p, params, bound) {
            best = Some(back);
            if d == 0 {
                break;
            }
            bound = d - 1;
        }
    }
    let Some(back) = best else {
        return MatchResult::bare(Flag::Diss);
    };
    let reference = &window[window.len() - 1 - back];
    let alignment = align_and_score(cur, reference, p, params);
    MatchResult {
        flag: classify(&alignment, reference.seq.len()),
        prev: Some(back),
        alignment: Some(alignment),
    }
}
