//! Adaptive order-k range coding of small-alphabet symbol streams.
//!
//! Every context (the previous `order` symbols of the stream) owns a
//! frequency table that starts uniform, gains [`INCREMENT`] per coded symbol
//! and is halved once its total passes [`HALVE_ABOVE`].

use super::range_coder::{Decoder, Encoder};
use crate::error::{corrupt, Error, Result};

pub const DEFAULT_ORDER: usize = 4;
pub const MAX_ORDER: usize = 4;
const INCREMENT: u16 = 32;
const HALVE_ABOVE: u32 = 1 << 13;
/// Contexts beyond this many are folded together by hashing.
const MAX_CONTEXTS_LOG2: u32 = 16;
/// Cap on table memory when hashing large alphabets.
const MAX_CELLS: usize = 1 << 22;

struct Context {
    alphabet: usize,
    order: usize,
    direct: bool,
    bits: u32,
    history: u32,
}

impl Context {
    fn new(alphabet: usize, order: usize) -> (Self, usize) {
        let contexts = (alphabet as u64).pow(order as u32);
        if contexts <= 1 << MAX_CONTEXTS_LOG2 {
            let ctx = Context { alphabet, order, direct: true, bits: 0, history: 0 };
            return (ctx, contexts as usize);
        }
        let mut bits = MAX_CONTEXTS_LOG2;
        while (1usize << bits) * alphabet > MAX_CELLS && bits > 8 {
            bits -= 1;
        }
        (Context { alphabet, order, direct: false, bits, history: 0 }, 1 << bits)
    }

    #[inline]
    fn index(&self) -> usize {
        if self.direct {
            self.history as usize
        } else {
            (self.history.wrapping_mul(0x9E37_79B1) >> (32 - self.bits)) as usize
        }
    }

    #[inline]
    fn push(&mut self, s: u8) {
        if self.order == 0 {
            return;
        }
        if self.direct {
            let modulus = (self.alphabet as u32).pow(self.order as u32 - 1);
            self.history = (self.history % modulus) * self.alphabet as u32 + s as u32;
        } else {
            let keep = if self.order >= 4 { u32::MAX } else { (1u32 << (8 * self.order)) - 1 };
            self.history = ((self.history << 8) | s as u32) & keep;
        }
    }
}

struct Model {
    alphabet: usize,
    freq: Vec<u16>,
    total: Vec<u32>,
    ctx: Context,
}

impl Model {
    fn new(alphabet: usize, order: usize) -> Self {
        let (ctx, contexts) = Context::new(alphabet, order);
        Self {
            alphabet,
            freq: vec![1; contexts * alphabet],
            total: vec![alphabet as u32; contexts],
            ctx,
        }
    }

    #[inline]
    fn update(&mut self, c: usize, s: u8) {
        let row = &mut self.freq[c * self.alphabet..(c + 1) * self.alphabet];
        row[s as usize] += INCREMENT;
        self.total[c] += INCREMENT as u32;
        if self.total[c] > HALVE_ABOVE {
            let mut t = 0;
            for f in row.iter_mut() {
                *f = f.div_ceil(2);
                t += *f as u32;
            }
            self.total[c] = t;
        }
        self.ctx.push(s);
    }
}

fn check_params(alphabet: usize, order: usize) -> Result<()> {
    if !(1..=256).contains(&alphabet) {
        return Err(Error::InvalidParam(format!("alphabet size {alphabet} outside 1..=256")));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidParam(format!("context order {order} above {MAX_ORDER}")));
    }
    Ok(())
}

/// Codes `symbols`, each below `alphabet`, with an order-`order` model.
pub fn rc_encode(symbols: &[u8], alphabet: usize, order: usize) -> Result<Vec<u8>> {
    check_params(alphabet, order)?;
    if symbols.is_empty() {
        return Ok(Vec::new());
    }
    let mut model = Model::new(alphabet, order);
    let mut enc = Encoder::with_capacity(symbols.len() / 4 + 16);
    for &s in symbols {
        if s as usize >= alphabet {
            return Err(Error::InvalidParam(format!("symbol {s} outside alphabet of {alphabet}")));
        }
        let c = model.ctx.index();
        let row = &model.freq[c * alphabet..(c + 1) * alphabet];
        let start: u32 = row[..s as usize].iter().map(|&f| f as u32).sum();
        enc.encode(start, row[s as usize] as u32, model.total[c]);
        model.update(c, s);
    }
    Ok(enc.finish())
}

/// Inverse of [`rc_encode`] for a stream of `len` symbols.
pub fn rc_decode(bytes: &[u8], len: usize, alphabet: usize, order: usize) -> Result<Vec<u8>> {
    check_params(alphabet, order)?;
    if len == 0 {
        return if bytes.is_empty() { Ok(Vec::new()) } else { Err(corrupt("bytes present for an empty stream")) };
    }
    let mut model = Model::new(alphabet, order);
    let mut dec = Decoder::new(bytes)?;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let c = model.ctx.index();
        let total = model.total[c];
        let target = dec.target(total);
        let row = &model.freq[c * alphabet..(c + 1) * alphabet];
        let mut start = 0u32;
        let mut s = 0;
        loop {
            let f = row[s] as u32;
            if target < start + f {
                break;
            }
            start += f;
            s += 1;
        }
        dec.consume(start, row[s] as u32)?;
        model.update(c, s as u8);
        out.push(s as u8);
    }
    if dec.remaining() != 0 {
        return Err(corrupt("trailing bytes after range-coded stream"));
    }
    Ok(out)
}
