//! Referential coding of one sorted bin into twelve symbol streams.
//!
//! Each read either repeats its predecessor, is stored on its own, or is
//! described relative to an earlier read of the bin that shares its
//! signature.

mod matching;
mod rle;

use std::cmp::Ordering;

pub use matching::{align_and_score, best_reference, Alignment, MatchResult};
pub use rle::{decode_matches_rle, encode_matches_rle};

use crate::alphabet::{self, N_CODE};
use crate::binning::{BinRecord, NO_SIGNATURE};
use crate::bytes::{put_u16, put_varint, unzigzag, zigzag, ByteReader};
use crate::error::{corrupt, Error, Result};

pub const DEFAULT_MISMATCH_COST: u32 = 2;
pub const DEFAULT_INSERT_COST: u32 = 1;
pub const DEFAULT_WINDOW: usize = 512;

/// Placeholder for the signature inside a stored read.
pub const SIGNATURE_MARK: u8 = b'.';

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum StreamId {
    Flags = 0,
    Rev,
    Lengths,
    Prev,
    Shift,
    LettersA,
    LettersC,
    LettersG,
    LettersT,
    LettersN,
    Matches,
    Hreads,
}

pub const STREAM_COUNT: usize = 12;

impl StreamId {
    pub const ALL: [StreamId; STREAM_COUNT] = [
        StreamId::Flags,
        StreamId::Rev,
        StreamId::Lengths,
        StreamId::Prev,
        StreamId::Shift,
        StreamId::LettersA,
        StreamId::LettersC,
        StreamId::LettersG,
        StreamId::LettersT,
        StreamId::LettersN,
        StreamId::Matches,
        StreamId::Hreads,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamId::Flags => "flags",
            StreamId::Rev => "rev",
            StreamId::Lengths => "lengths",
            StreamId::Prev => "prev",
            StreamId::Shift => "shift",
            StreamId::LettersA => "letters_A",
            StreamId::LettersC => "letters_C",
            StreamId::LettersG => "letters_G",
            StreamId::LettersT => "letters_T",
            StreamId::LettersN => "letters_N",
            StreamId::Matches => "matches",
            StreamId::Hreads => "hreads",
        }
    }

    /// Stream receiving substitutes for reference symbol `code` (0..=4).
    fn letters(code: u8) -> Self {
        Self::ALL[StreamId::LettersA.index() + code as usize]
    }
}

/// Raw (pre-entropy) bytes of every stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamSet {
    streams: [Vec<u8>; STREAM_COUNT],
}

impl StreamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_streams(streams: [Vec<u8>; STREAM_COUNT]) -> Self {
        Self { streams }
    }

    pub fn get(&self, id: StreamId) -> &[u8] {
        &self.streams[id.index()]
    }

    pub fn get_mut(&mut self, id: StreamId) -> &mut Vec<u8> {
        &mut self.streams[id.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (StreamId, &[u8])> {
        StreamId::ALL.iter().map(|&id| (id, self.get(id)))
    }

    pub fn into_streams(self) -> [Vec<u8>; STREAM_COUNT] {
        self.streams
    }

    pub fn total_len(&self) -> usize {
        self.streams.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Flag {
    /// Same symbols and signature position as the previous read.
    Copy = 0,
    /// No usable reference; stored on its own.
    Diss = 1,
    /// Overlap matches the reference exactly.
    Ex = 2,
    /// One mismatch, over the reference's final symbol.
    Mis = 3,
    /// Any other reference description.
    Oth = 4,
}

impl Flag {
    pub const ALPHABET: usize = 5;

    pub fn from_symbol(s: u8) -> Option<Self> {
        Some(match s {
            0 => Flag::Copy,
            1 => Flag::Diss,
            2 => Flag::Ex,
            3 => Flag::Mis,
            4 => Flag::Oth,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaxDist {
    /// Half the length of the read being matched.
    #[default]
    Auto,
    Fixed(u64),
}

impl MaxDist {
    pub fn limit(self, read_len: usize) -> u64 {
        match self {
            MaxDist::Auto => read_len as u64 / 2,
            MaxDist::Fixed(d) => d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchParams {
    pub mismatch_cost: u32,
    pub insert_cost: u32,
    pub max_dist: MaxDist,
    /// How many preceding reads are candidate references.
    pub window: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        Self {
            mismatch_cost: DEFAULT_MISMATCH_COST,
            insert_cost: DEFAULT_INSERT_COST,
            max_dist: MaxDist::Auto,
            window: DEFAULT_WINDOW,
        }
    }
}

impl MatchParams {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::InvalidParam("window must hold at least one read".into()));
        }
        Ok(())
    }
}

/// What the coder needs to know about the bin itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinContext {
    pub p: usize,
    /// The bin's signature, `None` for the bin of signature-less reads.
    pub signature: Option<Vec<u8>>,
}

fn cmp_rotated(a: &BinRecord, b: &BinRecord) -> Ordering {
    fn parts(r: &BinRecord) -> (&[u8], &[u8]) {
        if r.has_signature() {
            let (head, tail) = r.seq.split_at(r.pos as usize);
            (tail, head)
        } else {
            (&r.seq, &[])
        }
    }
    let (a1, a2) = parts(a);
    let (b1, b2) = parts(b);
    cmp_concat([a1, a2], [b1, b2])
}

/// Lexicographic comparison of two two-piece byte strings.
fn cmp_concat(a: [&[u8]; 2], b: [&[u8]; 2]) -> Ordering {
    let (mut ai, mut ao, mut bi, mut bo) = (0, 0, 0, 0);
    loop {
        while ai < 2 && ao == a[ai].len() {
            ai += 1;
            ao = 0;
        }
        while bi < 2 && bo == b[bi].len() {
            bi += 1;
            bo = 0;
        }
        if ai == 2 || bi == 2 {
            return (ai != 2).cmp(&(bi != 2));
        }
        let (x, y) = (&a[ai][ao..], &b[bi][bo..]);
        let n = x.len().min(y.len());
        match x[..n].cmp(&y[..n]) {
            Ordering::Equal => {}
            o => return o,
        }
        ao += n;
        bo += n;
    }
}

/// Orders a bin so that reads sharing the text after their signature sit
/// together; the input ordinal breaks ties.
pub fn sort_bin(records: &mut [BinRecord]) {
    records.sort_unstable_by(|a, b| cmp_rotated(a, b).then(a.orig_index.cmp(&b.orig_index)));
}

#[inline]
fn reduce(y: u8, x: u8) -> u8 {
    debug_assert_ne!(x, y);
    if y < x {
        y
    } else {
        y - 1
    }
}

#[inline]
fn expand(c: u8, x: u8) -> u8 {
    if c < x {
        c
    } else {
        c + 1
    }
}

/// Substitute for `reference` code `x`: ordinary bases get the reduced code
/// in their own stream, mismatches over an `N` keep the symbol itself.
fn push_substitute(out: &mut StreamSet, symbol: u8, x: u8) {
    let y = alphabet::code_unchecked(symbol);
    if x == N_CODE {
        out.get_mut(StreamId::LettersN).push(symbol);
    } else {
        out.get_mut(StreamId::letters(x)).push(reduce(y, x));
    }
}

fn encode_read(out: &mut StreamSet, cur: &BinRecord, m: &MatchResult, reference: Option<&BinRecord>, ctx: &BinContext) {
    out.get_mut(StreamId::Flags).push(m.flag as u8);
    out.get_mut(StreamId::Rev).push(cur.reversed as u8);
    put_u16(out.get_mut(StreamId::Lengths), cur.seq.len() as u16);
    match m.flag {
        Flag::Copy => {}
        Flag::Diss => {
            let h = out.get_mut(StreamId::Hreads);
            if cur.has_signature() {
                let pos = cur.pos as usize;
                h.extend_from_slice(&cur.seq[..pos]);
                h.push(SIGNATURE_MARK);
                h.extend_from_slice(&cur.seq[pos + ctx.p..]);
            } else {
                h.extend_from_slice(&cur.seq);
            }
        }
        Flag::Ex | Flag::Mis | Flag::Oth => {
            let a = m.alignment.as_ref().expect("referenced read carries its alignment");
            let reference = reference.expect("referenced read has a reference");
            put_varint(out.get_mut(StreamId::Prev), m.prev.expect("referenced read has a window slot") as u64);
            put_varint(out.get_mut(StreamId::Shift), zigzag(a.shift as i64));
            if m.flag == Flag::Oth {
                let pos = cur.pos as usize;
                let ordinals: Vec<usize> = a
                    .mismatches
                    .iter()
                    .map(|&t| t - a.overlap.start - if t >= pos { ctx.p } else { 0 })
                    .collect();
                rle::push_matches_rle(out.get_mut(StreamId::Matches), &ordinals, a.overlap.len() - ctx.p);
            }
            let mut mis = a.mismatches.iter().peekable();
            for (t, &s) in cur.seq.iter().enumerate() {
                if !a.overlap.contains(&t) {
                    out.get_mut(StreamId::LettersN).push(s);
                } else if mis.next_if_eq(&&t).is_some() {
                    let r = reference.seq[(t as i64 + a.shift as i64) as usize];
                    push_substitute(out, s, alphabet::code_unchecked(r));
                }
            }
        }
    }
}

/// Encodes an already sorted bin.
pub fn encode_bin(records: &[BinRecord], ctx: &BinContext, params: &MatchParams) -> StreamSet {
    let mut out = StreamSet::new();
    encode_bin_into(records, ctx, params, &mut out);
    out
}

pub(crate) fn encode_bin_into(records: &[BinRecord], ctx: &BinContext, params: &MatchParams, out: &mut StreamSet) {
    let window = params.window.max(1);
    for (i, cur) in records.iter().enumerate() {
        let win = &records[i.saturating_sub(window)..i];
        let m = if ctx.signature.is_some() {
            best_reference(cur, win, ctx.p, params)
        } else {
            match win.last() {
                Some(last) if last.seq == cur.seq => MatchResult {
                    flag: Flag::Copy,
                    prev: None,
                    alignment: None,
                },
                _ => MatchResult {
                    flag: Flag::Diss,
                    prev: None,
                    alignment: None,
                },
            }
        };
        let reference = m.prev.map(|back| &win[win.len() - 1 - back]);
        encode_read(out, cur, &m, reference, ctx);
    }
}

struct Readers<'a> {
    r: Vec<ByteReader<'a>>,
}

impl<'a> Readers<'a> {
    fn get(&mut self, id: StreamId) -> &mut ByteReader<'a> {
        &mut self.r[id.index()]
    }

    fn byte(&mut self, id: StreamId) -> Result<u8> {
        self.get(id).u8().map_err(|_| underrun(id))
    }

    fn varint(&mut self, id: StreamId) -> Result<u64> {
        self.get(id).varint().map_err(|_| underrun(id))
    }

    fn symbol(&mut self) -> Result<u8> {
        let s = self.byte(StreamId::LettersN)?;
        alphabet::code(s).map(|_| s).ok_or_else(|| corrupt("letters_N holds a non-nucleotide byte"))
    }
}

fn underrun(id: StreamId) -> Error {
    corrupt(format!("{} stream ends early", id.name()))
}

fn decode_hread(rd: &mut Readers<'_>, len: usize, ctx: &BinContext) -> Result<(Vec<u8>, u16)> {
    let Some(sig) = &ctx.signature else {
        let raw = rd.get(StreamId::Hreads).take(len).map_err(|_| underrun(StreamId::Hreads))?;
        if raw.iter().any(|&b| alphabet::code(b).is_none()) {
            return Err(corrupt("stored read holds a non-nucleotide byte"));
        }
        return Ok((raw.to_vec(), NO_SIGNATURE));
    };
    let stored = len
        .checked_sub(ctx.p)
        .ok_or_else(|| corrupt("read shorter than its signature"))?
        + 1;
    let raw = rd.get(StreamId::Hreads).take(stored).map_err(|_| underrun(StreamId::Hreads))?;
    let mut seq = Vec::with_capacity(len);
    let mut pos = None;
    for (i, &b) in raw.iter().enumerate() {
        if b == SIGNATURE_MARK && pos.is_none() {
            pos = Some(i);
            seq.extend_from_slice(sig);
        } else if alphabet::code(b).is_some() {
            seq.push(b);
        } else {
            return Err(corrupt("stored read holds a non-nucleotide byte"));
        }
    }
    let pos = pos.ok_or_else(|| corrupt("stored read lacks its signature mark"))?;
    Ok((seq, pos as u16))
}

fn decode_referenced(rd: &mut Readers<'_>, flag: Flag, len: usize, out: &[BinRecord], ctx: &BinContext) -> Result<(Vec<u8>, u16)> {
    if ctx.signature.is_none() {
        return Err(corrupt("referenced read in the bin without signature"));
    }
    let p = ctx.p;
    let back = rd.varint(StreamId::Prev)?;
    if back >= out.len() as u64 {
        return Err(corrupt("reference precedes the bin"));
    }
    let reference = &out[out.len() - 1 - back as usize];
    let shift = unzigzag(rd.varint(StreamId::Shift)?);
    let pos = reference.pos as i64 - shift;
    if pos < 0 || pos + p as i64 > len as i64 {
        return Err(corrupt("signature falls outside the read"));
    }
    let pos = pos as usize;
    let shift = i32::try_from(shift).map_err(|_| corrupt("shift out of range"))?;
    let overlap = matching::overlap_of(len, reference.seq.len(), shift);

    let mut mismatches = Vec::new();
    match flag {
        Flag::Ex => {}
        Flag::Mis => {
            let t = reference.seq.len() as i64 - 1 - shift as i64;
            if t < 0 || !overlap.contains(&(t as usize)) || (pos..pos + p).contains(&(t as usize)) {
                return Err(corrupt("implied mismatch falls outside the overlap"));
            }
            mismatches.push(t as usize);
        }
        _ => {
            let total = overlap.len() - p;
            rle::read_matches_rle(rd.get(StreamId::Matches), total, &mut mismatches)?;
            for t in &mut mismatches {
                *t += overlap.start;
                if *t >= pos {
                    *t += p;
                }
            }
        }
    }

    let mut seq = Vec::with_capacity(len);
    let mut mis = mismatches.iter().peekable();
    for t in 0..len {
        if !overlap.contains(&t) {
            seq.push(rd.symbol()?);
            continue;
        }
        let r = reference.seq[(t as i64 + shift as i64) as usize];
        if mis.next_if_eq(&&t).is_none() {
            seq.push(r);
            continue;
        }
        let x = alphabet::code_unchecked(r);
        let s = if x == N_CODE {
            let s = rd.symbol()?;
            if s == r {
                return Err(corrupt("substitute equals the reference symbol"));
            }
            s
        } else {
            let c = rd.byte(StreamId::letters(x))?;
            if c > 3 {
                return Err(corrupt("substitute letter out of range"));
            }
            alphabet::symbol(expand(c, x))
        };
        seq.push(s);
    }
    Ok((seq, pos as u16))
}

/// Restores `count` reads in sorted bin order. `orig_index` becomes the
/// position within the bin.
pub fn decode_bin(streams: &StreamSet, count: usize, ctx: &BinContext) -> Result<Vec<BinRecord>> {
    let mut rd = Readers {
        r: StreamId::ALL.iter().map(|&id| ByteReader::new(streams.get(id))).collect(),
    };
    let mut out: Vec<BinRecord> = Vec::with_capacity(count);
    for i in 0..count {
        let flag = Flag::from_symbol(rd.byte(StreamId::Flags)?).ok_or_else(|| corrupt("unknown flag symbol"))?;
        let reversed = match rd.byte(StreamId::Rev)? {
            0 => false,
            1 => true,
            _ => return Err(corrupt("rev stream holds a non-bit")),
        };
        let len = rd.get(StreamId::Lengths).u16().map_err(|_| underrun(StreamId::Lengths))? as usize;
        if len == 0 {
            return Err(corrupt("zero-length read"));
        }
        let (seq, pos) = match flag {
            Flag::Copy => {
                let last = out.last().ok_or_else(|| corrupt("copy of a read before the bin"))?;
                if last.seq.len() != len {
                    return Err(corrupt("copied read length disagrees"));
                }
                (last.seq.clone(), last.pos)
            }
            Flag::Diss => decode_hread(&mut rd, len, ctx)?,
            _ => decode_referenced(&mut rd, flag, len, &out, ctx)?,
        };
        out.push(BinRecord {
            seq,
            pos,
            reversed,
            orig_index: i as u64,
        });
    }
    if let Some(id) = StreamId::ALL.iter().find(|&&id| !rd.get(id).is_empty()) {
        return Err(corrupt(format!("{} stream has trailing bytes", id.name())));
    }
    Ok(out)
}
