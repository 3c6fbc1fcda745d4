//! The five-letter nucleotide alphabet and its numeric codes.
//!
//! Codes follow lexicographic order, `A=0 < C=1 < G=2 < T=3`, with `N=4`
//! sorting last. Only the first four ever appear inside a signature.

pub const SYMBOLS: [u8; 5] = *b"ACGTN";

pub const N_CODE: u8 = 4;

const INVALID: u8 = 0xFF;

const CODE_OF: [u8; 256] = {
    let mut t = [INVALID; 256];
    t[b'A' as usize] = 0;
    t[b'C' as usize] = 1;
    t[b'G' as usize] = 2;
    t[b'T' as usize] = 3;
    t[b'N' as usize] = 4;
    t
};

const NORMALIZE: [u8; 256] = {
    let mut t = [0u8; 256];
    let upper = *b"ACGTN";
    let lower = *b"acgtn";
    let mut i = 0;
    while i < 5 {
        t[upper[i] as usize] = upper[i];
        t[lower[i] as usize] = upper[i];
        i += 1;
    }
    t
};

const COMPLEMENT: [u8; 256] = {
    let mut t = [b'N'; 256];
    t[b'A' as usize] = b'T';
    t[b'C' as usize] = b'G';
    t[b'G' as usize] = b'C';
    t[b'T' as usize] = b'A';
    t
};

/// Numeric code of an uppercase symbol, or `None` outside `ACGTN`.
#[inline]
pub fn code(symbol: u8) -> Option<u8> {
    match CODE_OF[symbol as usize] {
        INVALID => None,
        c => Some(c),
    }
}

/// Code of a symbol already known to be in the alphabet.
#[inline]
pub(crate) fn code_unchecked(symbol: u8) -> u8 {
    CODE_OF[symbol as usize] & 7
}

#[inline]
pub fn symbol(code: u8) -> u8 {
    SYMBOLS[code as usize]
}

/// Uppercases `acgtn`; returns `None` for anything outside the alphabet.
#[inline]
pub fn normalize(byte: u8) -> Option<u8> {
    match NORMALIZE[byte as usize] {
        0 => None,
        b => Some(b),
    }
}

#[inline]
pub fn complement(symbol: u8) -> u8 {
    COMPLEMENT[symbol as usize]
}

pub fn reverse_complement(seq: &[u8]) -> Vec<u8> {
    seq.iter().rev().map(|&b| complement(b)).collect()
}

pub(crate) fn reverse_complement_into(seq: &[u8], out: &mut Vec<u8>) {
    out.clear();
    out.extend(seq.iter().rev().map(|&b| complement(b)));
}
