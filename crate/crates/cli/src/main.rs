//! `readpack`: two-stage compression of sequencing-read DNA.
//!
//! ```text
//! readpack bin e -iX.fastq -oX.bin      # cluster reads into X.bin.bdna / X.bin.bmeta
//! readpack pack e -iX.bin -oX.rp        # code the bins into X.rp.cdna / X.rp.cmeta
//! readpack pack d -iX.rp -oX.dna        # restore the reads, one per line
//! ```

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use readpack_core::bounds::{self, BoundSpec};
use readpack_core::codec::{MatchParams, MaxDist, StreamId, DEFAULT_WINDOW};
use readpack_core::pipeline::{self, BinOptions, PackOptions};
use readpack_core::signature::{DEFAULT_SIGNATURE_LEN, DEFAULT_SKIP_ZONE};
use readpack_core::{simulate, Error, SignatureParams};
use serde_json::json;

#[derive(Parser)]
#[command(name = "readpack", version, about = "Compress sequencing-read DNA by signature binning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stage one: cluster reads into signature bins, or restore them.
    #[command(subcommand)]
    Bin(BinCommand),
    /// Stage two: compress bins into an archive, or decompress it.
    #[command(subcommand)]
    Pack(PackCommand),
    /// Print the information-theoretic lower bound for a simulated read set.
    Bound(BoundArgs),
    /// Sample reads from a reference and write them as FASTQ.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum BinCommand {
    /// Encode FASTQ files into `<out>.bdna` and `<out>.bmeta`.
    E(BinEncodeArgs),
    /// Decode bins back to one read per line.
    D(DecodeArgs),
}

#[derive(Subcommand)]
enum PackCommand {
    /// Encode `<in>.bdna`/`<in>.bmeta` into `<out>.cdna` and `<out>.cmeta`.
    E(PackEncodeArgs),
    /// Decode an archive to one read per line.
    D(DecodeArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("inputs").required(true).args(["input", "files"]))]
struct BinEncodeArgs {
    /// Input FASTQ file.
    #[arg(short = 'i', long)]
    input: Option<PathBuf>,
    /// Space-separated list of input FASTQ files.
    #[arg(short = 'f', long)]
    files: Option<String>,
    /// Output prefix.
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Inputs are gzip-compressed.
    #[arg(short = 'g', long)]
    gzip: bool,
    /// Signature length.
    #[arg(short = 'p', long = "signature-len", default_value_t = DEFAULT_SIGNATURE_LEN)]
    signature_len: usize,
    /// Read suffix excluded from the signature search.
    #[arg(short = 's', long = "skip-zone", default_value_t = DEFAULT_SKIP_ZONE)]
    skip_zone: usize,
    /// Input block size in MB (10^6 symbols).
    #[arg(short = 'b', long = "block-size", default_value_t = 256)]
    block_mb: usize,
    /// Worker threads [default: all cores].
    #[arg(short = 't', long)]
    threads: Option<usize>,
    /// Print a JSON summary on standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PackEncodeArgs {
    /// Prefix of the stage-one files.
    #[arg(short = 'i', long)]
    input: PathBuf,
    /// Output archive prefix.
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Match distance threshold, 0 = half the read length.
    #[arg(short = 'e', long = "threshold", default_value_t = 0)]
    threshold: u64,
    /// Cost of one mismatch.
    #[arg(short = 'm', long = "mismatch-cost", default_value_t = 2)]
    mismatch_cost: u32,
    /// Cost of one inserted symbol.
    #[arg(short = 's', long = "insert-cost", default_value_t = 1)]
    insert_cost: u32,
    /// Reads searched for a reference.
    #[arg(short = 'w', long, default_value_t = DEFAULT_WINDOW)]
    window: usize,
    /// Worker threads [default: all cores].
    #[arg(short = 't', long)]
    threads: Option<usize>,
    /// Print a JSON summary on standard output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DecodeArgs {
    /// Input prefix.
    #[arg(short = 'i', long)]
    input: PathBuf,
    /// Output file, one read per line.
    #[arg(short = 'o', long)]
    output: PathBuf,
    /// Worker threads [default: all cores].
    #[arg(short = 't', long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct BoundArgs {
    /// Genome length in bases, N excluded.
    #[arg(long)]
    genome: u64,
    /// Number of reads.
    #[arg(long)]
    reads: u64,
    /// Read length.
    #[arg(long = "read-len")]
    read_len: u64,
    /// Per-base substitution probability.
    #[arg(long = "error-rate", default_value_t = 0.0)]
    error_rate: f64,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["reference", "random_genome"]))]
struct SimulateArgs {
    /// FASTA reference to sample from.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Sample from a uniform random genome of this many bases instead.
    #[arg(long = "random-genome")]
    random_genome: Option<usize>,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 100)]
    length: usize,
    #[arg(long = "error-rate", default_value_t = 0.0)]
    error_rate: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output FASTQ file.
    #[arg(short = 'o', long)]
    output: PathBuf,
}

fn threads(t: Option<usize>) -> usize {
    t.unwrap_or(0)
}

fn bin_encode(a: BinEncodeArgs) -> Result<()> {
    let mut inputs: Vec<PathBuf> = a.input.into_iter().collect();
    if let Some(list) = &a.files {
        inputs.extend(list.split_whitespace().map(PathBuf::from));
    }
    if inputs.is_empty() {
        return Err(Error::InvalidParam("no input files given".into()).into());
    }
    let block_size = a
        .block_mb
        .checked_mul(1_000_000)
        .filter(|&b| b > 0)
        .ok_or_else(|| Error::InvalidParam("block size must be positive".into()))?;
    let opts = BinOptions {
        signature: SignatureParams::new(a.signature_len, a.skip_zone)?,
        block_size,
        threads: threads(a.threads),
        ..BinOptions::default()
    };
    let s = pipeline::bin_encode(&inputs, a.gzip, &a.output, &opts)?;
    eprintln!(
        "binned {} reads ({} bases) into {} bins: {} + {} bytes in {:.2}s",
        s.reads,
        s.bases,
        s.bins,
        s.data_bytes,
        s.meta_bytes,
        s.elapsed.as_secs_f64()
    );
    if a.json {
        println!(
            "{}",
            json!({
                "reads": s.reads,
                "bases": s.bases,
                "bins": s.bins,
                "blocks": s.blocks,
                "bdna_bytes": s.data_bytes,
                "bmeta_bytes": s.meta_bytes,
                "elapsed_s": s.elapsed.as_secs_f64(),
            })
        );
    }
    Ok(())
}

fn pack_encode(a: PackEncodeArgs) -> Result<()> {
    let matching = MatchParams {
        mismatch_cost: a.mismatch_cost,
        insert_cost: a.insert_cost,
        max_dist: if a.threshold == 0 { MaxDist::Auto } else { MaxDist::Fixed(a.threshold) },
        window: a.window,
    };
    let s = pipeline::pack_encode(&a.input, &a.output, &PackOptions { matching, threads: threads(a.threads) })?;
    eprintln!(
        "packed {} reads ({} bases, {} bins): {} + {} bytes, {:.4} bpb in {:.2}s",
        s.reads,
        s.bases,
        s.bins,
        s.cdna_bytes,
        s.cmeta_bytes,
        s.bpb(),
        s.elapsed.as_secs_f64()
    );
    if a.json {
        let streams: serde_json::Map<String, serde_json::Value> = StreamId::ALL
            .iter()
            .map(|&id| {
                let (raw, coded) = s.streams[id.index()];
                (id.name().to_string(), json!({ "raw": raw, "coded": coded }))
            })
            .collect();
        let names = ["copy", "diss", "ex", "mis", "oth"];
        let flags: serde_json::Map<String, serde_json::Value> =
            names.iter().zip(s.flag_counts).map(|(n, c)| (n.to_string(), json!(c))).collect();
        println!(
            "{}",
            json!({
                "reads": s.reads,
                "bases": s.bases,
                "bins": s.bins,
                "cdna_bytes": s.cdna_bytes,
                "cmeta_bytes": s.cmeta_bytes,
                "bpb": s.bpb(),
                "streams": streams,
                "flags": flags,
                "elapsed_s": s.elapsed.as_secs_f64(),
            })
        );
    }
    Ok(())
}

fn bound(a: BoundArgs) -> Result<()> {
    let spec = BoundSpec {
        genome_len: a.genome,
        num_reads: a.reads,
        read_len: a.read_len,
        error_rate: a.error_rate,
    };
    let r = bounds::noisy_lower_bound(&spec)?;
    let m = bounds::mbit;
    if a.json {
        println!(
            "{}",
            json!({
                "genome_mbit": m(r.genome_bits),
                "orientation_mbit": m(r.orientation_bits),
                "position_mbit": m(r.position_bits),
                "clean_mbit": m(r.clean_bits),
                "clean_bpb": r.clean_bpb(),
                "error_base_mbit": m(r.error_base_bits),
                "error_position_mbit": m(r.error_position_bits),
                "total_mbit": m(r.total_bits),
                "bpb": r.bpb(),
            })
        );
        return Ok(());
    }
    println!("genome           {:>14.2} Mbit", m(r.genome_bits));
    println!("orientations     {:>14.2} Mbit", m(r.orientation_bits));
    println!("positions        {:>14.2} Mbit", m(r.position_bits));
    println!("clean total      {:>14.2} Mbit  {:.3} bpb", m(r.clean_bits), r.clean_bpb());
    if a.error_rate > 0.0 {
        println!("error bases      {:>14.2} Mbit", m(r.error_base_bits));
        println!("error positions  {:>14.2} Mbit", m(r.error_position_bits));
        println!("noisy total      {:>14.2} Mbit  {:.3} bpb", m(r.total_bits), r.bpb());
    }
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let reference = match (&a.reference, a.random_genome) {
        (Some(path), _) => simulate::read_fasta(path)?,
        (None, Some(len)) => simulate::random_reference(len, a.seed ^ 0x5EED_0F_6E40),
        (None, None) => unreachable!("clap enforces a source"),
    };
    let mut reads = simulate::generate_reads(&reference, a.count, a.length, a.seed)?;
    let changed = simulate::inject_errors(&mut reads, a.error_rate, a.seed.wrapping_add(1))?;
    let n = simulate::emit_fastq(&reads, &a.output).with_context(|| format!("writing {}", a.output.display()))?;
    eprintln!("wrote {n} reads of {} bases, {changed} substitutions", a.length);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Bin(BinCommand::E(a)) => bin_encode(a),
        Command::Bin(BinCommand::D(a)) => {
            let n = pipeline::bin_decode(&a.input, &a.output, threads(a.threads))?;
            eprintln!("restored {n} reads");
            Ok(())
        }
        Command::Pack(PackCommand::E(a)) => pack_encode(a),
        Command::Pack(PackCommand::D(a)) => {
            let n = pipeline::pack_decode(&a.input, &a.output, threads(a.threads))?;
            eprintln!("restored {n} reads");
            Ok(())
        }
        Command::Bound(a) => bound(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("readpack: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::InvalidParam(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
