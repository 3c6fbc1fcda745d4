//! Order-4 prediction-by-partial-matching byte coder.
//!
//! Contexts of the previous 4, 3, 2, 1 and 0 bytes are tried from the
//! longest down. A context that does not know the byte codes an escape,
//! whose weight is its number of distinct bytes, and the bytes it proposed
//! are excluded below. If every context escapes, the byte is coded uniformly
//! over the bytes not yet excluded. All contexts are updated after each
//! byte. The model is discarded once its estimated footprint passes
//! [`MODEL_MEMORY`].

use rustc_hash::FxHashMap;

use super::range_coder::{Decoder, Encoder};
use crate::error::{corrupt, Result};

pub const ORDER: usize = 4;
/// Model memory budget in bytes.
pub const MODEL_MEMORY: usize = 16 << 20;
const HALVE_ABOVE: u32 = 1 << 14;
const NODE_COST: usize = 64;
const SYMBOL_COST: usize = 4;

#[derive(Default)]
struct Node {
    symbols: Vec<(u8, u16)>,
    total: u32,
}

struct Exclusions {
    stamp: [u32; 256],
    generation: u32,
    count: usize,
}

impl Exclusions {
    fn new() -> Self {
        Self {
            stamp: [0; 256],
            generation: 0,
            count: 0,
        }
    }

    fn clear(&mut self) {
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp = [0; 256];
            self.generation = 1;
        }
        self.count = 0;
    }

    #[inline]
    fn contains(&self, s: u8) -> bool {
        self.stamp[s as usize] == self.generation
    }

    fn insert(&mut self, s: u8) {
        if !self.contains(s) {
            self.stamp[s as usize] = self.generation;
            self.count += 1;
        }
    }
}

struct Model {
    nodes: FxHashMap<u64, Node>,
    memory: usize,
    history: u32,
    seen: usize,
    excl: Exclusions,
}

#[inline]
fn key(order: usize, history: u32) -> u64 {
    let mask = if order == 4 { u32::MAX } else { (1u32 << (8 * order)) - 1 };
    ((order as u64) << 32) | (history & mask) as u64
}

/// Frequencies of a context restricted to bytes not excluded.
struct View {
    /// Sum of counts of the visible bytes.
    visible: u32,
    /// Number of visible distinct bytes, which is also the escape weight.
    distinct: u32,
}

impl View {
    fn total(&self) -> u32 {
        self.visible + self.distinct
    }
}

impl Model {
    fn new() -> Self {
        Self {
            nodes: FxHashMap::default(),
            memory: 0,
            history: 0,
            seen: 0,
            excl: Exclusions::new(),
        }
    }

    fn max_order(&self) -> usize {
        self.seen.min(ORDER)
    }

    fn view(node: &Node, excl: &Exclusions) -> View {
        let mut v = View { visible: 0, distinct: 0 };
        for &(s, c) in &node.symbols {
            if !excl.contains(s) {
                v.visible += c as u32;
                v.distinct += 1;
            }
        }
        v
    }

    fn update(&mut self, s: u8) {
        for order in 0..=self.max_order() {
            let node = self.nodes.entry(key(order, self.history)).or_insert_with(|| {
                self.memory += NODE_COST;
                Node::default()
            });
            match node.symbols.iter_mut().find(|e| e.0 == s) {
                Some(e) => e.1 += 1,
                None => {
                    node.symbols.push((s, 1));
                    self.memory += SYMBOL_COST;
                }
            }
            node.total += 1;
            if node.total > HALVE_ABOVE {
                node.total = 0;
                for e in &mut node.symbols {
                    e.1 = e.1.div_ceil(2);
                    node.total += e.1 as u32;
                }
            }
        }
        self.history = (self.history << 8) | s as u32;
        self.seen += 1;
        if self.memory > MODEL_MEMORY {
            self.nodes.clear();
            self.memory = 0;
        }
    }
}

pub fn cm_encode(data: &[u8]) -> Vec<u8> {
    if data.is_empty() {
        return Vec::new();
    }
    let mut m = Model::new();
    let mut enc = Encoder::with_capacity(data.len() / 2 + 16);
    for &s in data {
        m.excl.clear();
        let mut coded = false;
        for order in (0..=m.max_order()).rev() {
            let Some(node) = m.nodes.get(&key(order, m.history)) else {
                continue;
            };
            let v = Model::view(node, &m.excl);
            if v.distinct == 0 {
                continue;
            }
            let mut start = 0;
            let mut hit = None;
            for &(t, c) in &node.symbols {
                if m.excl.contains(t) {
                    continue;
                }
                if t == s {
                    hit = Some(c as u32);
                    break;
                }
                start += c as u32;
            }
            if let Some(c) = hit {
                enc.encode(start, c, v.total());
                coded = true;
                break;
            }
            enc.encode(v.visible, v.distinct, v.total());
            for &(t, _) in &node.symbols {
                m.excl.insert(t);
            }
        }
        if !coded {
            let rank = (0..s).filter(|&t| !m.excl.contains(t)).count() as u32;
            enc.encode(rank, 1, 256 - m.excl.count as u32);
        }
        m.update(s);
    }
    enc.finish()
}

pub fn cm_decode(bytes: &[u8], len: usize) -> Result<Vec<u8>> {
    if len == 0 {
        return if bytes.is_empty() { Ok(Vec::new()) } else { Err(corrupt("bytes present for an empty stream")) };
    }
    let mut m = Model::new();
    let mut dec = Decoder::new(bytes)?;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        m.excl.clear();
        let mut decoded = None;
        for order in (0..=m.max_order()).rev() {
            let Some(node) = m.nodes.get(&key(order, m.history)) else {
                continue;
            };
            let v = Model::view(node, &m.excl);
            if v.distinct == 0 {
                continue;
            }
            let target = dec.target(v.total());
            if target >= v.visible {
                dec.consume(v.visible, v.distinct)?;
                for &(t, _) in &node.symbols {
                    m.excl.insert(t);
                }
                continue;
            }
            let mut start = 0;
            for &(t, c) in &node.symbols {
                if m.excl.contains(t) {
                    continue;
                }
                if target < start + c as u32 {
                    dec.consume(start, c as u32)?;
                    decoded = Some(t);
                    break;
                }
                start += c as u32;
            }
            break;
        }
        let s = match decoded {
            Some(s) => s,
            None => {
                let remaining = 256 - m.excl.count as u32;
                let rank = dec.target(remaining);
                let s = (0..=255u8)
                    .filter(|&t| !m.excl.contains(t))
                    .nth(rank as usize)
                    .ok_or_else(|| corrupt("context model escaped past every byte"))?;
                dec.consume(rank, 1)?;
                s
            }
        };
        m.update(s);
        out.push(s);
    }
    if dec.remaining() != 0 {
        return Err(corrupt("trailing bytes after context-coded stream"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngCore, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn roundtrip(d: &[u8]) -> usize {
        let e = cm_encode(d);
        assert_eq!(cm_decode(&e, d.len()).unwrap(), d);
        e.len()
    }

    #[test]
    fn empty() {
        assert!(cm_encode(&[]).is_empty());
        assert!(cm_decode(&[], 0).unwrap().is_empty());
    }

    #[test]
    fn single_and_all_bytes() {
        roundtrip(&[0]);
        roundtrip(&[255]);
        let all: Vec<u8> = (0..=255).chain((0..=255).rev()).collect();
        roundtrip(&all);
    }

    #[test]
    fn text_compresses() {
        let text = b"the quick brown fox jumps over the lazy dog; a lazy dog sleeps while the fox runs. ".repeat(200);
        let n = roundtrip(&text);
        assert!(8.0 * (n as f64) / (text.len() as f64) < 3.0);
    }

    #[test]
    fn random_is_incompressible() {
        let mut d = vec![0u8; 1_000_000];
        ChaCha8Rng::seed_from_u64(3).fill_bytes(&mut d);
        assert!(roundtrip(&d) >= d.len());
    }

    #[test]
    fn survives_model_reset() {
        // High-entropy order-4 contexts grow the model past its budget.
        let mut d = vec![0u8; 3_000_000];
        ChaCha8Rng::seed_from_u64(9).fill_bytes(&mut d);
        for (i, b) in d.iter_mut().enumerate() {
            if i % 4 == 0 {
                *b = b'A' + (*b & 3);
            }
        }
        roundtrip(&d);
    }

    #[test]
    fn corrupt_is_error_or_differs() {
        let d = b"ACGTACGTTTGACNNNACGT".repeat(50);
        let e = cm_encode(&d);
        assert!(cm_decode(&e[..e.len() - 3], d.len()).is_err());
        let mut flipped = e.clone();
        flipped[e.len() / 2] ^= 0x40;
        assert!(cm_decode(&flipped, d.len()).map_or(true, |o| o != d));
    }
}
