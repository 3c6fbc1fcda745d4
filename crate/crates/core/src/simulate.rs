//! Synthetic read sets: uniform sampling from a reference, every other read
//! reverse-complemented, optional uniform substitutions.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{self, reverse_complement};
use crate::error::{Error, IoContext, Result};
use crate::fastq::MAX_READ_LEN;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimulatedRead {
    pub seq: Vec<u8>,
    /// Start of the sampled window in the reference.
    pub start: usize,
    pub reversed: bool,
}

impl AsRef<[u8]> for SimulatedRead {
    fn as_ref(&self) -> &[u8] {
        &self.seq
    }
}

/// Uniform `ACGT` sequence.
pub fn random_reference(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| b"ACGT"[rng.gen_range(0..4)]).collect()
}

/// Concatenates the sequence lines of a FASTA file, uppercased; symbols
/// outside `ACGT` become `N`.
pub fn read_fasta(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path).at(path)?);
    let mut out = Vec::new();
    for line in reader.split(b'\n') {
        let line = line.at(path)?;
        if line.first() == Some(&b'>') || line.first() == Some(&b';') {
            continue;
        }
        out.extend(
            line.iter()
                .filter(|b| !b.is_ascii_whitespace())
                .map(|&b| match alphabet::normalize(b) {
                    Some(s) => s,
                    None => b'N',
                }),
        );
    }
    Ok(out)
}

/// Samples `count` reads of `read_len` bases at uniform start positions
/// whose window holds no `N`. Reads at odd output indices are reverse
/// complemented.
pub fn generate_reads(reference: &[u8], count: usize, read_len: usize, seed: u64) -> Result<Vec<SimulatedRead>> {
    if read_len == 0 || read_len > MAX_READ_LEN {
        return Err(Error::Domain(format!("read length {read_len} outside 1..={MAX_READ_LEN}")));
    }
    if reference.len() < read_len {
        return Err(Error::Domain("reference is shorter than a read".into()));
    }
    let starts = reference.len() - read_len + 1;
    // n_before[i] = number of N among reference[..i].
    let mut n_before = Vec::with_capacity(reference.len() + 1);
    n_before.push(0u32);
    for &b in reference {
        let last = *n_before.last().unwrap();
        n_before.push(last + (b == b'N') as u32);
    }
    let valid = |s: usize| n_before[s + read_len] == n_before[s];
    let valid_count = (0..starts).filter(|&s| valid(s)).count();
    if valid_count == 0 {
        return Err(Error::Domain("every read window of the reference contains N".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Rejection sampling is uniform over valid starts; fall back to an
    // explicit list when valid windows are rare.
    let list: Option<Vec<u32>> = (valid_count * 16 < starts).then(|| (0..starts).filter(|&s| valid(s)).map(|s| s as u32).collect());
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let start = match &list {
            Some(l) => l[rng.gen_range(0..l.len())] as usize,
            None => loop {
                let s = rng.gen_range(0..starts);
                if valid(s) {
                    break s;
                }
            },
        };
        let window = &reference[start..start + read_len];
        let reversed = i % 2 == 1;
        out.push(SimulatedRead {
            seq: if reversed { reverse_complement(window) } else { window.to_vec() },
            start,
            reversed,
        });
    }
    Ok(out)
}

/// Replaces each non-`N` base, with probability `error_rate`, by one of the
/// three other bases chosen uniformly. Returns the number of changed bases.
pub fn inject_errors(reads: &mut [SimulatedRead], error_rate: f64, seed: u64) -> Result<u64> {
    if !(0.0..=1.0).contains(&error_rate) {
        return Err(Error::Domain(format!("error rate {error_rate} outside [0, 1]")));
    }
    if error_rate == 0.0 {
        return Ok(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut changed = 0;
    for r in reads {
        for b in r.seq.iter_mut() {
            let Some(c) = alphabet::code(*b).filter(|&c| c < alphabet::N_CODE) else {
                continue;
            };
            if rng.gen_bool(error_rate) {
                let k = rng.gen_range(1..4u8);
                *b = alphabet::symbol((c + k) % 4);
                changed += 1;
            }
        }
    }
    Ok(changed)
}

/// Writes reads as FASTQ with titles `@sim_<i>` and constant qualities.
pub fn emit_fastq<I, S>(reads: I, path: impl AsRef<Path>) -> Result<u64>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    let path = path.as_ref();
    let mut w = BufWriter::with_capacity(1 << 20, File::create(path).at(path)?);
    let mut quals = Vec::new();
    let mut n = 0u64;
    for r in reads {
        let seq = r.as_ref();
        quals.resize(seq.len(), b'I');
        write!(w, "@sim_{n}\n").at(path)?;
        w.write_all(seq).at(path)?;
        w.write_all(b"\n+\n").at(path)?;
        w.write_all(&quals[..seq.len()]).at(path)?;
        w.write_all(b"\n").at(path)?;
        n += 1;
    }
    w.flush().at(path)?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_come_from_reference() {
        let reference = b"ACGTACGT";
        let reads = generate_reads(reference, 2, 4, 1).unwrap();
        let text = std::str::from_utf8(reference).unwrap();
        for r in &reads {
            let fwd = if r.reversed { reverse_complement(&r.seq) } else { r.seq.clone() };
            assert!(text.contains(std::str::from_utf8(&fwd).unwrap()));
            assert_eq!(&reference[r.start..r.start + 4], fwd.as_slice());
        }
        assert!(!reads[0].reversed && reads[1].reversed);
    }

    #[test]
    fn deterministic() {
        let g = random_reference(1000, 5);
        assert_eq!(generate_reads(&g, 50, 30, 9).unwrap(), generate_reads(&g, 50, 30, 9).unwrap());
        assert_ne!(generate_reads(&g, 50, 30, 9).unwrap(), generate_reads(&g, 50, 30, 10).unwrap());
    }

    #[test]
    fn avoids_n_windows() {
        let mut g = b"N".repeat(500);
        g.extend_from_slice(b"ACGTTGCA");
        g.extend(b"N".repeat(500));
        for r in generate_reads(&g, 100, 6, 2).unwrap() {
            assert!(!r.seq.contains(&b'N'));
            assert!((500..=502).contains(&r.start));
        }
        assert!(matches!(generate_reads(b"ACNGT", 1, 3, 0), Err(Error::Domain(_))));
        assert!(generate_reads(b"ACG", 1, 4, 0).is_err());
    }

    #[test]
    fn error_injection() {
        let mut reads = vec![SimulatedRead { seq: b"AAAANAAAA".to_vec(), start: 0, reversed: false }];
        let before = reads.clone();
        assert_eq!(inject_errors(&mut reads, 0.0, 1).unwrap(), 0);
        assert_eq!(reads, before);
        assert_eq!(inject_errors(&mut reads, 1.0, 1).unwrap(), 8);
        assert_eq!(reads[0].seq.iter().filter(|&&b| b == b'A').count(), 0);
        assert_eq!(reads[0].seq[4], b'N');
        assert!(inject_errors(&mut reads, 1.5, 1).is_err());
    }

    #[test]
    fn error_rate_is_accurate() {
        let g = random_reference(200_000, 3);
        let mut reads = generate_reads(&g, 10_000, 100, 4).unwrap();
        let changed = inject_errors(&mut reads, 0.01, 5).unwrap();
        let frac = changed as f64 / 1e6;
        assert!((frac - 0.01).abs() < 0.0003, "{frac}");
    }

    #[test]
    fn fastq_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.fq");
        let reads = generate_reads(&random_reference(500, 1), 3, 20, 2).unwrap();
        assert_eq!(emit_fastq(&reads, &path).unwrap(), 3);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 12);
        let back = crate::fastq::read_all(&[&path], false).unwrap();
        assert!(back.iter().zip(&reads).all(|(a, b)| a.seq == b.seq));
    }

    #[test]
    fn fasta_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.fa");
        std::fs::write(&path, ">chr1 test\nacgtRY\nNNAC\n>chr2\nGG\n").unwrap();
        assert_eq!(read_fasta(&path).unwrap(), b"ACGTNNNNACGG");
    }
}
