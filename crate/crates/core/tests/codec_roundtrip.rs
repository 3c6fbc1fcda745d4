//! Properties of the per-bin coder: losslessness, flag gating, distance
//! admissibility, and stream alphabets.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use readpack_core::codec::{self, align_and_score, BinContext, Flag, MatchParams, MaxDist, StreamId};
use readpack_core::signature::{find_signature, SignatureParams};
use readpack_core::BinRecord;

/// Reads sharing signature `sig`: windows of a random text that contains
/// `sig` repeatedly, mutated and occasionally carrying N.
fn bin_reads(rng: &mut ChaCha8Rng, n: usize, sig: &[u8]) -> Vec<BinRecord> {
    let mut text: Vec<u8> = (0..400).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect();
    for at in [50, 180, 300] {
        text[at..at + sig.len()].copy_from_slice(sig);
    }
    let mut out = Vec::new();
    for i in 0..n {
        let anchor = [50, 180, 300][rng.gen_range(0..3)];
        let before = rng.gen_range(0..40);
        let after = rng.gen_range(0..40);
        let mut seq = text[anchor - before..anchor + sig.len() + after].to_vec();
        for (j, b) in seq.iter_mut().enumerate() {
            let in_sig = (before..before + sig.len()).contains(&j);
            if !in_sig && rng.gen_bool(0.03) {
                *b = b"ACGTN"[rng.gen_range(0..5)];
            }
        }
        if i > 0 && rng.gen_bool(0.1) {
            let prev: &BinRecord = &out[i - 1];
            seq = prev.seq.clone();
            out.push(BinRecord { seq, pos: prev.pos, reversed: rng.gen(), orig_index: i as u64 });
            continue;
        }
        out.push(BinRecord { seq, pos: before as u16, reversed: rng.gen(), orig_index: i as u64 });
    }
    out
}

fn assert_roundtrip(records: &mut Vec<BinRecord>, ctx: &BinContext, params: &MatchParams) {
    codec::sort_bin(records);
    let streams = codec::encode_bin(records, ctx, params);
    let back = codec::decode_bin(&streams, records.len(), ctx).unwrap();
    assert_eq!(back.len(), records.len());
    for (a, b) in records.iter().zip(&back) {
        assert_eq!((&a.seq, a.pos, a.reversed), (&b.seq, b.pos, b.reversed));
    }

    // Flag gating.
    let flags = streams.get(StreamId::Flags);
    let count = |f: Flag| flags.iter().filter(|&&x| x == f as u8).count();
    let referenced = count(Flag::Ex) + count(Flag::Mis) + count(Flag::Oth);
    assert_eq!(flags.len(), records.len());
    assert_eq!(streams.get(StreamId::Rev).len(), records.len());
    assert_eq!(streams.get(StreamId::Lengths).len(), 2 * records.len());
    if ctx.signature.is_none() {
        assert_eq!(referenced, 0);
    }
    let dotted = streams.get(StreamId::Hreads).iter().filter(|&&b| b == b'.').count();
    if ctx.signature.is_some() {
        assert_eq!(dotted, count(Flag::Diss));
    }
    for id in [StreamId::LettersA, StreamId::LettersC, StreamId::LettersG, StreamId::LettersT] {
        assert!(streams.get(id).iter().all(|&c| c < 4));
    }
}

#[test]
fn random_bins_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = MatchParams::default();
    for trial in 0..40 {
        let sig = b"ACGTAC";
        let mut recs = bin_reads(&mut rng, 1 + trial * 20, sig);
        assert_roundtrip(&mut recs, &BinContext { p: 6, signature: Some(sig.to_vec()) }, &params);
    }
}

#[test]
fn large_bin_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sig = b"CAGTTGCA";
    let mut recs = bin_reads(&mut rng, 100_000, sig);
    assert_roundtrip(&mut recs, &BinContext { p: 8, signature: Some(sig.to_vec()) }, &MatchParams::default());
}

#[test]
fn degenerate_costs_and_windows() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let sig = b"ACGTAC";
    let ctx = BinContext { p: 6, signature: Some(sig.to_vec()) };
    for params in [
        MatchParams { mismatch_cost: 0, insert_cost: 0, ..MatchParams::default() },
        MatchParams { max_dist: MaxDist::Fixed(0), ..MatchParams::default() },
        MatchParams { max_dist: MaxDist::Fixed(1000), window: 1, ..MatchParams::default() },
        MatchParams { mismatch_cost: 7, insert_cost: 3, window: 3, ..MatchParams::default() },
    ] {
        let mut recs = bin_reads(&mut rng, 500, sig);
        assert_roundtrip(&mut recs, &ctx, &params);
    }
}

#[test]
fn n_bin_roundtrip() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut recs: Vec<BinRecord> = (0..300)
        .map(|i| {
            let len = rng.gen_range(1..12);
            let seq = (0..len).map(|_| b"AN"[rng.gen_range(0..2)]).collect();
            BinRecord { seq, pos: u16::MAX, reversed: false, orig_index: i }
        })
        .collect();
    assert_roundtrip(&mut recs, &BinContext { p: 8, signature: None }, &MatchParams::default());
}

#[test]
fn emitted_references_are_admissible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sig = b"ACGTAC";
    let params = MatchParams::default();
    let mut recs = bin_reads(&mut rng, 2000, sig);
    codec::sort_bin(&mut recs);
    for i in 1..recs.len() {
        let window = &recs[i.saturating_sub(params.window)..i];
        let m = codec::best_reference(&recs[i], window, 6, &params);
        if let (Some(back), Some(a)) = (m.prev, &m.alignment) {
            let reference = &window[window.len() - 1 - back];
            assert!(a.distance <= params.max_dist.limit(recs[i].seq.len()));
            assert_eq!(a, &align_and_score(&recs[i], reference, 6, &params));
            // No strictly better candidate exists, and later ones are not tied.
            for (b, other) in window.iter().rev().enumerate() {
                let d = align_and_score(&recs[i], other, 6, &params).distance;
                assert!(d >= a.distance);
                if b < back {
                    assert!(d > a.distance);
                }
            }
            if m.flag == Flag::Ex {
                assert!(a.mismatches.is_empty());
            }
        }
    }
}

#[test]
fn sorted_keys_are_non_decreasing() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut recs: Vec<BinRecord> = (0..10_000)
        .map(|i| {
            let seq: Vec<u8> = (0..rng.gen_range(5..30)).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect();
            let pos = rng.gen_range(0..seq.len() - 3) as u16;
            BinRecord { seq, pos, reversed: false, orig_index: i }
        })
        .collect();
    codec::sort_bin(&mut recs);
    let key = |r: &BinRecord| {
        let mut k = r.seq[r.pos as usize..].to_vec();
        k.extend_from_slice(&r.seq[..r.pos as usize]);
        (k, r.orig_index)
    };
    assert!(recs.windows(2).all(|w| key(&w[0]) <= key(&w[1])));
}

#[test]
fn letters_a_never_names_a() {
    // A substitute over reference A is one of C, G, T, N by construction.
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sig = b"ACGTAC";
    let ctx = BinContext { p: 6, signature: Some(sig.to_vec()) };
    let mut recs = bin_reads(&mut rng, 5000, sig);
    codec::sort_bin(&mut recs);
    let streams = codec::encode_bin(&recs, &ctx, &MatchParams::default());
    assert!(!streams.get(StreamId::LettersA).is_empty());
    let back = codec::decode_bin(&streams, recs.len(), &ctx).unwrap();
    assert_eq!(back.iter().map(|r| &r.seq).collect::<Vec<_>>(), recs.iter().map(|r| &r.seq).collect::<Vec<_>>());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]
    #[test]
    fn arbitrary_reads_roundtrip(
        reads in prop::collection::vec(prop::collection::vec(prop::sample::select(b"ACGTTN".to_vec()), 1..50), 1..60),
        p in 3usize..=6,
        z in 0usize..=4,
    ) {
        // Group arbitrary reads by their real signature, then code each bin.
        let sp = SignatureParams::new(p, z).unwrap();
        let mut bins: std::collections::BTreeMap<Option<Vec<u8>>, Vec<BinRecord>> = Default::default();
        for (i, r) in reads.iter().enumerate() {
            let rec = match find_signature(r, &sp) {
                Some(h) => {
                    let seq = if h.reversed { readpack_core::alphabet::reverse_complement(r) } else { r.clone() };
                    (Some(h.symbols(p)), BinRecord { seq, pos: h.pos as u16, reversed: h.reversed, orig_index: i as u64 })
                }
                None => (None, BinRecord { seq: r.clone(), pos: u16::MAX, reversed: false, orig_index: i as u64 }),
            };
            bins.entry(rec.0).or_default().push(rec.1);
        }
        for (sig, mut recs) in bins {
            assert_roundtrip(&mut recs, &BinContext { p, signature: sig }, &MatchParams::default());
        }
    }
}
