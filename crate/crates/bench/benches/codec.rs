use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use std::hint::black_box;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use readpack_core::binning::to_bin_record;
use readpack_core::codec::{self, BinContext, MatchParams};
use readpack_core::entropy::{cm_encode, rc_encode};
use readpack_core::signature::{find_signature, SignatureParams};
use readpack_core::simulate::{generate_reads, inject_errors, random_reference};
use readpack_core::{BinId, BinRecord, ReadRecord};

fn reads(count: usize, rate: f64) -> Vec<Vec<u8>> {
    let g = random_reference(200_000, 1);
    let mut r = generate_reads(&g, count, 100, 2).unwrap();
    inject_errors(&mut r, rate, 3).unwrap();
    r.into_iter().map(|r| r.seq).collect()
}

fn bench_signature(c: &mut Criterion) {
    let rs = reads(10_000, 0.01);
    let mut g = c.benchmark_group("find_signature");
    g.throughput(Throughput::Elements(rs.len() as u64));
    for p in [4, 8, 12] {
        let params = SignatureParams::new(p, 12).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(p), &params, |b, params| {
            b.iter(|| rs.iter().filter_map(|r| find_signature(black_box(r), params)).count())
        });
    }
    g.finish();
}

/// The largest bin of a 45×-like sample, sorted.
fn big_bin(rate: f64) -> (BinId, Vec<BinRecord>) {
    let params = SignatureParams::new(4, 12).unwrap();
    let mut rc = Vec::new();
    let mut bins: std::collections::HashMap<BinId, Vec<BinRecord>> = Default::default();
    for (i, seq) in reads(90_000, rate).into_iter().enumerate() {
        let (bin, rec) = to_bin_record(&ReadRecord { seq, orig_index: i as u64 }, &params, &mut rc);
        bins.entry(bin).or_default().push(rec);
    }
    let (bin, mut recs) = bins.into_iter().filter(|(b, _)| !b.is_n_bin(4)).max_by_key(|(_, v)| v.len()).unwrap();
    codec::sort_bin(&mut recs);
    (bin, recs)
}

fn bench_encode_bin(c: &mut Criterion) {
    let mut g = c.benchmark_group("encode_bin");
    g.sample_size(10);
    for rate in [0.0, 0.01] {
        let (bin, recs) = big_bin(rate);
        let ctx = BinContext { p: 4, signature: bin.signature(4) };
        g.throughput(Throughput::Elements(recs.len() as u64));
        g.bench_with_input(BenchmarkId::new("error_rate", rate), &recs, |b, recs| {
            b.iter(|| codec::encode_bin(black_box(recs), &ctx, &MatchParams::default()))
        });
    }
    g.finish();
}

fn bench_entropy(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let symbols: Vec<u8> = (0..1 << 20).map(|_| rng.gen_range(0..4)).collect();
    let hreads: Vec<u8> = reads(10_000, 0.01).concat();
    let mut g = c.benchmark_group("entropy");
    g.sample_size(10);
    g.throughput(Throughput::Bytes(symbols.len() as u64));
    g.bench_function("rc4_uniform_1m", |b| b.iter(|| rc_encode(black_box(&symbols), 4, 4).unwrap()));
    g.throughput(Throughput::Bytes(hreads.len() as u64));
    g.bench_function("cm4_reads_1m", |b| b.iter(|| cm_encode(black_box(&hreads))));
    g.finish();
}

criterion_group!(benches, bench_signature, bench_encode_bin, bench_entropy);
criterion_main!(benches);
