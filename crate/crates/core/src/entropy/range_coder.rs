//! Byte-renormalising range coder with carry propagation.
//!
//! Symbols are coded as `(start, size)` intervals of a cumulative total of at
//! most 2^16. The encoder keeps a 33-bit `low`; a pending byte plus a run of
//! `0xFF` bytes absorb a late carry.

use crate::bytes::ByteReader;
use crate::error::{corrupt, Result};

const TOP: u32 = 1 << 24;

/// Largest cumulative total a model may present.
pub(crate) const MAX_TOTAL: u32 = 1 << 16;

pub(crate) struct Encoder {
    low: u64,
    range: u32,
    cache: u8,
    cache_size: u64,
    out: Vec<u8>,
}

impl Encoder {
    #[cfg(test)]
    pub(crate) fn new() -> Self {
        Self::with_capacity(0)
    }

    pub(crate) fn with_capacity(cap: usize) -> Self {
        Self {
            low: 0,
            range: u32::MAX,
            cache: 0,
            cache_size: 1,
            out: Vec::with_capacity(cap),
        }
    }

    #[inline]
    pub(crate) fn encode(&mut self, start: u32, size: u32, total: u32) {
        debug_assert!(size > 0 && start + size <= total && total <= MAX_TOTAL);
        let r = self.range / total;
        self.low += start as u64 * r as u64;
        self.range = r * size;
        while self.range < TOP {
            self.range <<= 8;
            self.shift_low();
        }
    }

    #[inline]
    fn shift_low(&mut self) {
        if self.low < 0xFF00_0000 || self.low >= 1 << 32 {
            let carry = (self.low >> 32) as u8;
            let mut byte = self.cache;
            loop {
                self.out.push(byte.wrapping_add(carry));
                byte = 0xFF;
                self.cache_size -= 1;
                if self.cache_size == 0 {
                    break;
                }
            }
            self.cache = (self.low >> 24) as u8;
        }
        self.cache_size += 1;
        self.low = (self.low & 0x00FF_FFFF) << 8;
    }

    pub(crate) fn finish(mut self) -> Vec<u8> {
        for _ in 0..5 {
            self.shift_low();
        }
        self.out
    }
}

pub(crate) struct Decoder<'a> {
    code: u32,
    range: u32,
    input: ByteReader<'a>,
}

impl<'a> Decoder<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Result<Self> {
        let mut input = ByteReader::new(buf);
        let mut code = 0u32;
        for _ in 0..5 {
            code = (code << 8) | input.u8().map_err(|_| truncated())? as u32;
        }
        Ok(Self {
            code,
            range: u32::MAX,
            input,
        })
    }

    /// Cumulative count of the next symbol; must be followed by [`Self::consume`].
    #[inline]
    pub(crate) fn target(&mut self, total: u32) -> u32 {
        self.range /= total;
        (self.code / self.range).min(total - 1)
    }

    #[inline]
    pub(crate) fn consume(&mut self, start: u32, size: u32) -> Result<()> {
        self.code = self.code.wrapping_sub(start * self.range);
        self.range *= size;
        while self.range < TOP {
            let b = self.input.u8().map_err(|_| truncated())?;
            self.code = (self.code << 8) | b as u32;
            self.range <<= 8;
        }
        Ok(())
    }

    pub(crate) fn remaining(&self) -> usize {
        self.input.remaining()
    }
}

fn truncated() -> crate::error::Error {
    corrupt("range-coded stream is truncated")
}
