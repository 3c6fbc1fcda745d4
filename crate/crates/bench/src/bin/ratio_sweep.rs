//! Prints bits per base of simulated read sets across coverage, signature
//! length and skip zone.
//!
//! Usage: `ratio_sweep [genome_len] [error_rate]`

use readpack_core::pipeline::{self, blocks_from_reads, BinOptions, PackOptions};
use readpack_core::simulate::{generate_reads, inject_errors, random_reference};
use readpack_core::SignatureParams;

fn bpb(dir: &std::path::Path, reads: &[Vec<u8>], signature: SignatureParams) -> f64 {
    let bins = dir.join("sweep.bin");
    let arc = dir.join("sweep.rp");
    let opts = BinOptions { signature, ..BinOptions::default() };
    pipeline::bin_encode_blocks(blocks_from_reads(reads, 64_000_000), &bins, &opts).expect("binning");
    pipeline::pack_encode(&bins, &arc, &PackOptions::default()).expect("packing").bpb()
}

fn main() {
    let mut args = std::env::args().skip(1);
    let genome_len: usize = args.next().map_or(1_000_000, |a| a.parse().expect("genome length"));
    let error_rate: f64 = args.next().map_or(0.0, |a| a.parse().expect("error rate"));
    let dir = tempfile::tempdir().expect("temp dir");
    let genome = random_reference(genome_len, 1);
    let read_len = 100;

    println!("# genome {genome_len} bases, {read_len} bp reads, error rate {error_rate}");
    println!("{:>8} {:>3} {:>3} {:>8}", "coverage", "p", "z", "bpb");
    for coverage in [1usize, 5, 15, 45] {
        let count = coverage * genome_len / read_len;
        let mut reads = generate_reads(&genome, count, read_len, coverage as u64).expect("reads");
        inject_errors(&mut reads, error_rate, 2).expect("errors");
        let seqs: Vec<Vec<u8>> = reads.into_iter().map(|r| r.seq).collect();
        for (p, z) in [(4, 12), (6, 12), (8, 0), (8, 6), (8, 12), (10, 12), (12, 12)] {
            let sp = SignatureParams::new(p, z).expect("signature parameters");
            println!("{coverage:>8} {p:>3} {z:>3} {:>8.4}", bpb(dir.path(), &seqs, sp));
        }
    }
}
