//! Information-theoretic lower bounds for read sets sampled from a genome.
//!
//! A clean read set costs at least the genome (2 bits per base), one
//! orientation bit per read, and the choice of read start positions among
//! genome positions, counted as a multiset of `reads` drawn from `genome`
//! positions. Substitution errors add, per erroneous base, the choice among
//! three alternatives plus the choice of which bases are erroneous.

use crate::error::{Error, Result};

const LOG2_3: f64 = 1.584_962_500_721_156_2;

#[inline]
fn xlog2x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

/// `log2 C(n, m)` in its Stirling form `n·log2 n − (n−m)·log2(n−m) − m·log2 m`.
pub fn log2_binomial_bits(n: u64, m: u64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("cannot choose {m} of {n}")));
    }
    Ok(xlog2x(n as f64) - xlog2x((n - m) as f64) - xlog2x(m as f64))
}

/// `log2 C(n, m)` by summing logarithms; linear in `min(m, n−m)`.
pub fn log2_binomial_exact(n: u64, m: u64) -> Result<f64> {
    if m > n {
        return Err(Error::Domain(format!("cannot choose {m} of {n}")));
    }
    let k = m.min(n - m);
    Ok((1..=k).map(|i| ((n - k + i) as f64 / i as f64).log2()).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundSpec {
    /// Non-N genome length in bases.
    pub genome_len: u64,
    pub num_reads: u64,
    pub read_len: u64,
    pub error_rate: f64,
}

/// Every component of a bound, in bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub genome_bits: f64,
    pub orientation_bits: f64,
    pub position_bits: f64,
    pub clean_bits: f64,
    /// Identities of the substituted bases.
    pub error_base_bits: f64,
    /// Which bases carry an error.
    pub error_position_bits: f64,
    pub total_bits: f64,
    pub input_bases: u64,
}

impl BoundReport {
    pub fn bpb(&self) -> f64 {
        self.total_bits / self.input_bases as f64
    }

    pub fn clean_bpb(&self) -> f64 {
        self.clean_bits / self.input_bases as f64
    }
}

/// Decimal megabits.
pub fn mbit(bits: f64) -> f64 {
    bits / 1e6
}

fn validate(spec: &BoundSpec) -> Result<u64> {
    if spec.genome_len == 0 {
        return Err(Error::Domain("genome length must be positive".into()));
    }
    if spec.num_reads == 0 || spec.read_len == 0 {
        return Err(Error::Domain("bits per base are undefined for an empty read set".into()));
    }
    if !(0.0..=1.0).contains(&spec.error_rate) {
        return Err(Error::Domain(format!("error rate {} outside [0, 1]", spec.error_rate)));
    }
    spec.num_reads
        .checked_mul(spec.read_len)
        .ok_or_else(|| Error::Domain("read set size overflows".into()))
}

/// Bound ignoring `error_rate`.
pub fn clean_lower_bound(spec: &BoundSpec) -> Result<BoundReport> {
    let input_bases = validate(spec)?;
    let genome_bits = 2.0 * spec.genome_len as f64;
    let orientation_bits = spec.num_reads as f64;
    let position_bits = log2_binomial_bits(spec.num_reads + spec.genome_len, spec.num_reads)?;
    let clean_bits = genome_bits + orientation_bits + position_bits;
    Ok(BoundReport {
        genome_bits,
        orientation_bits,
        position_bits,
        clean_bits,
        error_base_bits: 0.0,
        error_position_bits: 0.0,
        total_bits: clean_bits,
        input_bases,
    })
}

/// Bound including uniform substitutions at `error_rate`.
pub fn noisy_lower_bound(spec: &BoundSpec) -> Result<BoundReport> {
    let mut r = clean_lower_bound(spec)?;
    let n = r.input_bases;
    let errors = (spec.error_rate * n as f64).round() as u64;
    r.error_base_bits = n as f64 * spec.error_rate * LOG2_3;
    r.error_position_bits = log2_binomial_bits(n, errors.min(n))?;
    r.total_bits = r.clean_bits + r.error_base_bits + r.error_position_bits;
    Ok(r)
}
