//! Butterfly encoding, successive-cancellation decoding on the BEC, and
//! block-error estimation.
//!
//! Internally the transform is `x = v F^{⊗n}` with `F = [[1,0],[1,1]]`
//! in natural order, and `v[p]` carries channel `j = p + 1`. The decoder
//! resolves `v` in index order. [`polar_encode`] adds the bit-reversal
//! wiring on the input side.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::construction::CodeSpec;
use crate::erasure::RootChannel;
use crate::error::{Error, Result};
use crate::exec::{Exec, REDUCE_CHUNK};
use crate::numeric::{wilson_interval, CompensatedSum};

/// Largest level accepted by [`exact_block_error`].
pub const EXACT_MAX_LEVEL: u32 = 4;

const ERASED: u8 = 2;

/// Which codeword positions the channel erased.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ErasurePattern {
    flags: Vec<bool>,
}

impl ErasurePattern {
    pub fn new(flags: Vec<bool>) -> Result<Self> {
        log2_len(flags.len())?;
        Ok(ErasurePattern { flags })
    }

    pub fn none(n: u32) -> Self {
        ErasurePattern {
            flags: vec![false; 1 << n],
        }
    }

    pub fn all(n: u32) -> Self {
        ErasurePattern {
            flags: vec![true; 1 << n],
        }
    }

    /// Pattern whose position `i` is erased iff bit `i` of `mask` is set.
    pub fn from_mask(n: u32, mask: u64) -> Self {
        ErasurePattern {
            flags: (0..1usize << n).map(|i| (mask >> i) & 1 == 1).collect(),
        }
    }

    /// Independent erasures with probability `z0`.
    pub fn sample<R: Rng>(n: u32, z0: f64, rng: &mut R) -> Self {
        ErasurePattern {
            flags: (0..1usize << n).map(|_| rng.gen::<f64>() < z0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn is_erased(&self, i: usize) -> bool {
        self.flags[i]
    }

    pub fn erased_count(&self) -> usize {
        self.flags.iter().filter(|&&e| e).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }
}

fn log2_len(len: usize) -> Result<u32> {
    if len == 0 || !len.is_power_of_two() {
        return Err(Error::Length {
            expected: len.max(1).next_power_of_two(),
            got: len,
        });
    }
    Ok(len.trailing_zeros())
}

fn check_bits(bits: &[u8]) -> Result<()> {
    match bits.iter().find(|&&b| b > 1) {
        Some(b) => Err(Error::param("bits", format!("{b} is not a bit"))),
        None => Ok(()),
    }
}

/// In-place `x = v F^{⊗n}`.
pub fn kronecker_transform(x: &mut [u8]) {
    let len = x.len();
    let mut h = 1;
    while h < len {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter()) {
                *a ^= *b;
            }
        }
        h *= 2;
    }
}

/// `i` with its low `n` bits reversed.
pub fn bit_reverse(i: usize, n: u32) -> usize {
    if n == 0 {
        0
    } else {
        i.reverse_bits() >> (usize::BITS - n)
    }
}

/// Codeword for the channel-indexed input `v` (`v[p]` rides channel `p + 1`).
pub fn encode_channels(v: &[u8]) -> Result<Vec<u8>> {
    log2_len(v.len())?;
    check_bits(v)?;
    let mut x = v.to_vec();
    kronecker_transform(&mut x);
    Ok(x)
}

/// The butterfly encoder with bit-reversed input wiring: input position `i`
/// carries the channel whose path is the bit reversal of `i`.
pub fn polar_encode(u: &[u8]) -> Result<Vec<u8>> {
    let n = log2_len(u.len())?;
    check_bits(u)?;
    let mut x = vec![0u8; u.len()];
    for (i, &b) in u.iter().enumerate() {
        x[bit_reverse(i, n)] = b;
    }
    kronecker_transform(&mut x);
    Ok(x)
}

/// Codeword carrying `info` on the selected channels and `frozen` on the
/// rest, both in increasing channel order.
pub fn encode_spec(spec: &CodeSpec, info: &[u8], frozen: &[u8]) -> Result<Vec<u8>> {
    let v = merge_channels(&spec.info_mask(), info, frozen)?;
    encode_channels(&v)
}

fn merge_channels(mask: &[bool], info: &[u8], frozen: &[u8]) -> Result<Vec<u8>> {
    let k = mask.iter().filter(|&&m| m).count();
    if info.len() != k {
        return Err(Error::Length {
            expected: k,
            got: info.len(),
        });
    }
    if frozen.len() != mask.len() - k {
        return Err(Error::Length {
            expected: mask.len() - k,
            got: frozen.len(),
        });
    }
    check_bits(info)?;
    check_bits(frozen)?;
    let (mut i, mut f) = (info.iter(), frozen.iter());
    Ok(mask
        .iter()
        .map(|&m| *if m { i.next() } else { f.next() }.unwrap())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// Information bits in increasing channel order.
    Decoded(Vec<u8>),
    /// The first selected channel left erased.
    Failure { first_failed: u64 },
}

impl DecodeOutcome {
    pub fn is_failure(&self) -> bool {
        matches!(self, DecodeOutcome::Failure { .. })
    }
}

enum Stop {
    Failed(u64),
    Conflict(u64),
}

enum Mode<'a> {
    Decode { info: &'a [bool], frozen: &'a [u8] },
    // every channel is forced to the transmitted value; record which ones
    // saw an erasure
    Genie { truth: &'a [u8], erased: &'a mut [bool] },
}

struct Sc<'a> {
    mode: Mode<'a>,
    v: Vec<u8>,
}

impl Sc<'_> {
    // y holds 0, 1 or ERASED for the sub-codeword at channel offset `base`;
    // returns the re-encoded sub-codeword
    fn run(&mut self, y: &[u8], base: usize) -> std::result::Result<Vec<u8>, Stop> {
        if y.len() == 1 {
            let obs = y[0];
            let bit = match &mut self.mode {
                Mode::Decode { info, frozen } => {
                    if info[base] {
                        if obs == ERASED {
                            return Err(Stop::Failed(base as u64 + 1));
                        }
                        obs
                    } else {
                        let f = frozen[base];
                        if obs != ERASED && obs != f {
                            return Err(Stop::Conflict(base as u64 + 1));
                        }
                        f
                    }
                }
                Mode::Genie { truth, erased } => {
                    erased[base] = obs == ERASED;
                    truth[base]
                }
            };
            self.v[base] = bit;
            return Ok(vec![bit]);
        }
        let h = y.len() / 2;
        let (yl, yr) = y.split_at(h);
        // check node: the worse half sees x_L ⊕ x_R
        let left: Vec<u8> = yl
            .iter()
            .zip(yr)
            .map(|(&a, &b)| if a == ERASED || b == ERASED { ERASED } else { a ^ b })
            .collect();
        let xa = self.run(&left, base)?;
        // variable node: two looks at the better half
        let mut right = Vec::with_capacity(h);
        for k in 0..h {
            let from_left = if yl[k] == ERASED { ERASED } else { yl[k] ^ xa[k] };
            let r = match (from_left, yr[k]) {
                (ERASED, b) => b,
                (a, ERASED) => a,
                (a, b) if a == b => a,
                _ => return Err(Stop::Conflict(base as u64 + 1)),
            };
            right.push(r);
        }
        let xb = self.run(&right, base + h)?;
        let mut out = xa;
        for (a, b) in out.iter_mut().zip(&xb) {
            *a ^= b;
        }
        out.extend_from_slice(&xb);
        Ok(out)
    }
}

fn observations(pattern: &ErasurePattern, received: &[u8]) -> Vec<u8> {
    pattern
        .flags
        .iter()
        .zip(received)
        .map(|(&e, &b)| if e { ERASED } else { b })
        .collect()
}

/// Successive-cancellation decoding of a partially erased codeword.
///
/// `received` is read only at unerased positions. `frozen` lists the values
/// of the non-selected channels in increasing channel order.
pub fn sc_decode_bec(
    pattern: &ErasurePattern,
    received: &[u8],
    spec: &CodeSpec,
    frozen: &[u8],
) -> Result<DecodeOutcome> {
    let len = spec.block_length();
    for got in [pattern.len(), received.len()] {
        if got != len {
            return Err(Error::Length { expected: len, got });
        }
    }
    let mask = spec.info_mask();
    let k = spec.selected.len();
    if frozen.len() != len - k {
        return Err(Error::Length {
            expected: len - k,
            got: frozen.len(),
        });
    }
    check_bits(received)?;
    check_bits(frozen)?;
    let mut frozen_at = vec![0u8; len];
    let mut f = frozen.iter();
    for (slot, &m) in frozen_at.iter_mut().zip(&mask) {
        if !m {
            *slot = *f.next().unwrap();
        }
    }
    decode_with(&observations(pattern, received), &mask, &frozen_at)
}

fn decode_with(y: &[u8], mask: &[bool], frozen_at: &[u8]) -> Result<DecodeOutcome> {
    let mut sc = Sc {
        mode: Mode::Decode {
            info: mask,
            frozen: frozen_at,
        },
        v: vec![0; y.len()],
    };
    match sc.run(y, 0) {
        Ok(_) => Ok(DecodeOutcome::Decoded(
            sc.v.iter().zip(mask).filter(|(_, &m)| m).map(|(&b, _)| b).collect(),
        )),
        Err(Stop::Failed(j)) => Ok(DecodeOutcome::Failure { first_failed: j }),
        Err(Stop::Conflict(j)) => Err(Error::Inconsistency { index: j }),
    }
}

// all-zero transmission: the decoder fails iff some selected channel is
// erased when it is reached
fn fails_all_zero(pattern: &ErasurePattern, mask: &[bool], zeros: &[u8]) -> Result<bool> {
    let y: Vec<u8> = pattern.flags.iter().map(|&e| if e { ERASED } else { 0 }).collect();
    Ok(decode_with(&y, mask, zeros)?.is_failure())
}

/// Genie-aided decoding of the all-zero codeword: entry `p` is true when
/// channel `p + 1` sees an erasure although every earlier channel is known.
#[doc(hidden)]
pub fn genie_erasures(pattern: &ErasurePattern) -> Vec<bool> {
    let len = pattern.len();
    let zeros = vec![0u8; len];
    let mut erased = vec![false; len];
    let y: Vec<u8> = pattern.flags.iter().map(|&e| if e { ERASED } else { 0 }).collect();
    let mut sc = Sc {
        mode: Mode::Genie {
            truth: &zeros,
            erased: &mut erased,
        },
        v: vec![0; len],
    };
    if sc.run(&y, 0).is_err() {
        unreachable!("genie decoding cannot stop");
    }
    erased
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimResult {
    pub trials: u64,
    pub block_errors: u64,
    pub estimate: f64,
    pub wilson_ci95: (f64, f64),
}

impl SimResult {
    pub fn from_counts(block_errors: u64, trials: u64) -> Self {
        SimResult {
            trials,
            block_errors,
            estimate: if trials == 0 {
                0.0
            } else {
                block_errors as f64 / trials as f64
            },
            wilson_ci95: wilson_interval(block_errors, trials, 1.959_963_984_540_054),
        }
    }
}

/// The erasure pattern of trial `t`; independent of how trials are scheduled.
pub fn trial_pattern(n: u32, z0: f64, seed: u64, trial: u64) -> ErasurePattern {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    ErasurePattern::sample(n, z0, &mut rng)
}

fn count_failures(spec: &CodeSpec, root: &RootChannel, seed: u64, trials: std::ops::Range<u64>) -> Result<u64> {
    let mask = spec.info_mask();
    let zeros = vec![0u8; mask.len()];
    let mut errors = 0;
    for t in trials {
        let p = trial_pattern(spec.n, root.z0(), seed, t);
        errors += fails_all_zero(&p, &mask, &zeros)? as u64;
    }
    Ok(errors)
}

/// Monte-Carlo block error rate. By symmetry of the BEC the all-zero
/// codeword with all-zero frozen bits is transmitted in every trial.
pub fn simulate(spec: &CodeSpec, root: &RootChannel, trials: u64, seed: u64) -> Result<SimResult> {
    simulate_with(spec, root, trials, seed, Exec::default())
}

pub fn simulate_with(spec: &CodeSpec, root: &RootChannel, trials: u64, seed: u64, exec: Exec) -> Result<SimResult> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    let errors = failures_in(spec, root, seed, 0..trials, exec)?;
    Ok(SimResult::from_counts(errors, trials))
}

fn failures_in(spec: &CodeSpec, root: &RootChannel, seed: u64, range: std::ops::Range<u64>, exec: Exec) -> Result<u64> {
    const TRIAL_CHUNK: usize = 256;
    let start = range.start;
    let len = (range.end - range.start) as usize;
    exec.map_blocks(len, TRIAL_CHUNK, |r| {
        count_failures(spec, root, seed, start + r.start as u64..start + r.end as u64)
    })
    .into_iter()
    .sum()
}

/// One cumulative row of a blocked simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimBlockRow {
    pub trial_block: u64,
    pub result: SimResult,
}

/// Runs `trials` in blocks of `block` and reports the running totals after
/// each block. The final row equals [`simulate`] with the same seed.
pub fn simulate_blocks(
    spec: &CodeSpec,
    root: &RootChannel,
    trials: u64,
    seed: u64,
    block: u64,
    exec: Exec,
) -> Result<Vec<SimBlockRow>> {
    if trials == 0 {
        return Err(Error::param("trials", "must be at least 1"));
    }
    if block == 0 {
        return Err(Error::param("block", "must be at least 1"));
    }
    let mut rows = Vec::new();
    let mut errors = 0;
    let mut done = 0;
    while done < trials {
        let end = (done + block).min(trials);
        errors += failures_in(spec, root, seed, done..end, exec)?;
        done = end;
        rows.push(SimBlockRow {
            trial_block: rows.len() as u64,
            result: SimResult::from_counts(errors, done),
        });
    }
    Ok(rows)
}

/// CSV rows `trial_block,errors,trials,estimate,ci_lo,ci_hi`.
pub fn write_sim_csv<W: Write>(mut w: W, rows: &[SimBlockRow]) -> io::Result<()> {
    writeln!(w, "trial_block,errors,trials,estimate,ci_lo,ci_hi")?;
    for r in rows {
        let s = &r.result;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.trial_block, s.block_errors, s.trials, s.estimate, s.wilson_ci95.0, s.wilson_ci95.1
        )?;
    }
    Ok(())
}

fn check_exact_level(n: u32) -> Result<()> {
    if n > EXACT_MAX_LEVEL {
        return Err(Error::LevelTooLarge {
            level: n,
            max: EXACT_MAX_LEVEL,
        });
    }
    Ok(())
}

/// `P(pattern)` for every pattern mask of a level-`n` block.
fn pattern_probability(root: &RootChannel, len: usize, erased: u32) -> f64 {
    let z = root.z0();
    z.powi(erased as i32) * (1.0 - z).powi(len as i32 - erased as i32)
}

/// Block error probability by enumerating all `2^(2^n)` erasure patterns.
pub fn exact_block_error(spec: &CodeSpec, root: &RootChannel) -> Result<f64> {
    exact_block_error_with(spec, root, Exec::default())
}

pub fn exact_block_error_with(spec: &CodeSpec, root: &RootChannel, exec: Exec) -> Result<f64> {
    check_exact_level(spec.n)?;
    let len = spec.block_length();
    let mask = spec.info_mask();
    let zeros = vec![0u8; len];
    let total = 1usize << len;
    let parts = exec.map_blocks(total, REDUCE_CHUNK, |r| -> Result<CompensatedSum> {
        let mut s = CompensatedSum::new();
        for m in r {
            let p = ErasurePattern::from_mask(spec.n, m as u64);
            if fails_all_zero(&p, &mask, &zeros)? {
                s.add(pattern_probability(root, len, (m as u64).count_ones()));
            }
        }
        Ok(s)
    });
    let mut sum = CompensatedSum::new();
    for p in parts {
        sum.merge(p?);
    }
    Ok(sum.value())
}

/// Genie-aided erasure probability of every level-`n` channel by pattern
/// enumeration, in channel order.
#[doc(hidden)]
pub fn exact_genie_marginals(n: u32, root: &RootChannel) -> Result<Vec<f64>> {
    check_exact_level(n)?;
    let len = 1usize << n;
    let mut sums = vec![CompensatedSum::new(); len];
    for m in 0..1u64 << len {
        let p = ErasurePattern::from_mask(n, m);
        let w = pattern_probability(root, len, m.count_ones());
        for (s, e) in sums.iter_mut().zip(genie_erasures(&p)) {
            if e {
                s.add(w);
            }
        }
    }
    Ok(sums.iter().map(CompensatedSum::value).collect())
}
