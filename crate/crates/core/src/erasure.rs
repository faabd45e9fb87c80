//! Exact synthetic-channel erasure arithmetic on the binary erasure channel.
//!
//! An erasure probability `Z` is carried as the redundant pair
//! `(-log2 Z, -log2(1 - Z))`. Each polarization step doubles one field
//! exactly and recomputes the other from it, so values far below
//! `f64::MIN_POSITIVE` (the retain phase routinely needs `Z < 2^-2^20`)
//! remain exact in the field that matters.

use std::fmt;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{Exec, REDUCE_CHUNK};
use crate::numeric::CompensatedSum;

/// Largest level that may be enumerated or materialized by default.
pub const DEFAULT_MAX_LEVEL: u32 = 26;

/// Hard limit imposed by the `u64` path encoding.
pub const PATH_BITS: u32 = 63;

/// Above this many bits the complement uses its first-order expansion.
const FIRST_ORDER_BITS: f64 = 40.0;

/// `-log2(1 - 2^-x)` for `x >= 0`.
fn complement_bits(x: f64) -> f64 {
    if x == 0.0 {
        f64::INFINITY
    } else if x == f64::INFINITY {
        0.0
    } else if x > FIRST_ORDER_BITS {
        (-x).exp2() / std::f64::consts::LN_2
    } else {
        -(-(-x * std::f64::consts::LN_2).exp_m1()).log2()
    }
}

/// Erasure probability in log domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogErasure {
    l_era: f64,
    l_rel: f64,
}

impl LogErasure {
    /// `Z = 0`: a perfect channel.
    pub const PERFECT: LogErasure = LogErasure {
        l_era: f64::INFINITY,
        l_rel: 0.0,
    };

    /// `Z = 1`: a useless channel.
    pub const USELESS: LogErasure = LogErasure {
        l_era: 0.0,
        l_rel: f64::INFINITY,
    };

    pub fn from_z(z: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&z) {
            return Err(Error::Domain {
                value: z,
                domain: "[0, 1]",
            });
        }
        let l_era = if z == 0.0 { f64::INFINITY } else { -z.log2() };
        let l_rel = if z == 1.0 {
            f64::INFINITY
        } else if z < 0.5 {
            -(-z).ln_1p() / std::f64::consts::LN_2
        } else {
            // 1 - z is exact here
            -(1.0 - z).log2()
        };
        Ok(LogErasure { l_era, l_rel })
    }

    /// Builds the pair from `-log2 Z`, recomputing the complement.
    pub fn from_l_era(l_era: f64) -> Result<Self> {
        if l_era.is_nan() || l_era < 0.0 {
            return Err(Error::Domain {
                value: l_era,
                domain: "-log2 Z in [0, +inf]",
            });
        }
        Ok(LogErasure {
            l_era,
            l_rel: complement_bits(l_era),
        })
    }

    /// Builds the pair from `-log2(1 - Z)`, recomputing the complement.
    pub fn from_l_rel(l_rel: f64) -> Result<Self> {
        if l_rel.is_nan() || l_rel < 0.0 {
            return Err(Error::Domain {
                value: l_rel,
                domain: "-log2(1-Z) in [0, +inf]",
            });
        }
        Ok(LogErasure {
            l_era: complement_bits(l_rel),
            l_rel,
        })
    }

    /// `-log2 Z`; `+∞` means `Z = 0`.
    pub fn l_era(&self) -> f64 {
        self.l_era
    }

    /// `-log2(1 - Z)`; `+∞` means `Z = 1`.
    pub fn l_rel(&self) -> f64 {
        self.l_rel
    }

    /// Linear-domain `Z`; underflows to 0 below `2^-1074`.
    pub fn z(&self) -> f64 {
        (-self.l_era).exp2()
    }

    /// Linear-domain `1 - Z`.
    pub fn one_minus_z(&self) -> f64 {
        (-self.l_rel).exp2()
    }

    /// `Z(W') = 1 - (1 - Z)^2`.
    pub fn worse(self) -> Self {
        let l_rel = 2.0 * self.l_rel;
        LogErasure {
            l_era: complement_bits(l_rel),
            l_rel,
        }
    }

    /// `Z(W'') = Z^2`.
    pub fn better(self) -> Self {
        let l_era = 2.0 * self.l_era;
        LogErasure {
            l_era,
            l_rel: complement_bits(l_era),
        }
    }

    /// One polarization step; `better == true` squares `Z`.
    pub fn step(self, better: bool) -> Self {
        if better {
            self.better()
        } else {
            self.worse()
        }
    }

    /// Total order by erasure probability, smallest `Z` first.
    pub fn cmp_erasure(&self, other: &Self) -> std::cmp::Ordering {
        other.l_era.total_cmp(&self.l_era)
    }
}

/// `polar_worse`: erasure of `W'`.
pub fn polar_worse(z: LogErasure) -> LogErasure {
    z.worse()
}

/// `polar_better`: erasure of `W''`.
pub fn polar_better(z: LogErasure) -> LogErasure {
    z.better()
}

/// The physical channel `W`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RootChannel {
    z0: f64,
}

impl RootChannel {
    pub fn new(z0: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&z0) {
            return Err(Error::Domain {
                value: z0,
                domain: "erasure probability [0, 1]",
            });
        }
        Ok(RootChannel { z0 })
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// `I(W) = 1 - Z(W)`.
    pub fn capacity(&self) -> f64 {
        1.0 - self.z0
    }

    pub fn erasure(&self) -> LogErasure {
        LogErasure::from_z(self.z0).expect("validated at construction")
    }
}

/// A synthetic channel `W_{2^n}^j`, identified by its path from the root.
///
/// Step `i` (counted from the root) is bit `level - 1 - i` of `bits`; a set
/// bit is the "better" transform. With this packing `j = bits + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChannelPath {
    level: u32,
    bits: u64,
}

impl ChannelPath {
    pub const ROOT: ChannelPath = ChannelPath { level: 0, bits: 0 };

    pub fn new(level: u32, bits: u64) -> Result<Self> {
        if level > PATH_BITS {
            return Err(Error::LevelTooLarge { level, max: PATH_BITS });
        }
        if level < 64 && bits >> level != 0 {
            return Err(Error::param("bits", format!("{bits:#b} has more than {level} bits")));
        }
        Ok(ChannelPath { level, bits })
    }

    /// The channel `W_{2^level}^j`, `j` in `1..=2^level`.
    pub fn from_index(level: u32, j: u64) -> Result<Self> {
        if level > PATH_BITS {
            return Err(Error::LevelTooLarge { level, max: PATH_BITS });
        }
        if j == 0 || j > 1u64 << level {
            return Err(Error::param("j", format!("{j} outside 1..=2^{level}")));
        }
        Ok(ChannelPath { level, bits: j - 1 })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Packed path bits, first step most significant.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// 1-based channel index `j`.
    pub fn index(&self) -> u64 {
        self.bits + 1
    }

    /// Zero-based position in index order.
    pub fn position(&self) -> usize {
        self.bits as usize
    }

    /// The `i`-th step from the root (`true` = better).
    pub fn step(&self, i: u32) -> bool {
        assert!(i < self.level, "step {i} beyond level {}", self.level);
        (self.bits >> (self.level - 1 - i)) & 1 == 1
    }

    pub fn steps(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.level).map(|i| self.step(i))
    }

    /// `W_{2N}^{2j-1}` (worse) or `W_{2N}^{2j}` (better).
    pub fn child(&self, better: bool) -> Self {
        assert!(self.level < PATH_BITS);
        ChannelPath {
            level: self.level + 1,
            bits: (self.bits << 1) | better as u64,
        }
    }

    /// The ancestor at level `m <= level`.
    pub fn ancestor(&self, m: u32) -> Self {
        assert!(m <= self.level);
        ChannelPath {
            level: m,
            bits: self.bits >> (self.level - m),
        }
    }

    /// True when `self` is `other` or lies below it in the tree.
    pub fn descends_from(&self, other: &ChannelPath) -> bool {
        other.level <= self.level && self.ancestor(other.level) == *other
    }

    /// Number of better steps: how many times `Z` was squared.
    pub fn squaring_count(&self) -> u32 {
        self.bits.count_ones()
    }

    /// Squarings among the steps taken after level `m`.
    pub fn squarings_since(&self, m: u32) -> u32 {
        assert!(m <= self.level);
        let span = self.level - m;
        if span == 0 {
            0
        } else {
            (self.bits & (u64::MAX >> (64 - span))).count_ones()
        }
    }
}

impl fmt::Display for ChannelPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.steps() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for ChannelPath {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut path = ChannelPath::ROOT;
        for c in s.chars() {
            if path.level >= PATH_BITS {
                return Err(Error::LevelTooLarge {
                    level: PATH_BITS + 1,
                    max: PATH_BITS,
                });
            }
            path = match c {
                '0' => path.child(false),
                '1' => path.child(true),
                _ => return Err(Error::format("channel path", format!("unexpected `{c}`"))),
            };
        }
        Ok(path)
    }
}

/// Erasure of the synthetic channel at the end of `ch`.
pub fn channel_erasure(root: &RootChannel, ch: &ChannelPath) -> LogErasure {
    ch.steps().fold(root.erasure(), LogErasure::step)
}

/// Streams all `2^n` channels of a level in index order without
/// materializing them. Each item costs amortized O(1) steps.
#[derive(Debug, Clone)]
pub struct LevelIter {
    level: u32,
    next: u64,
    end: u64,
    // stack[d] is the erasure after the first d steps of the current path
    stack: Vec<LogErasure>,
}

impl LevelIter {
    fn new(root: &RootChannel, level: u32) -> Self {
        let mut stack = vec![root.erasure(); level as usize + 1];
        for d in 0..level as usize {
            stack[d + 1] = stack[d].worse();
        }
        LevelIter {
            level,
            next: 0,
            end: 1u64 << level,
            stack,
        }
    }
}

impl Iterator for LevelIter {
    type Item = (ChannelPath, LogErasure);

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.end {
            return None;
        }
        let bits = self.next;
        if bits > 0 {
            // bits 0..=tz flipped relative to bits - 1
            let tz = bits.trailing_zeros();
            let first = (self.level - 1 - tz) as usize;
            for d in first..self.level as usize {
                let better = (bits >> (self.level as usize - 1 - d)) & 1 == 1;
                self.stack[d + 1] = self.stack[d].step(better);
            }
        }
        self.next += 1;
        Some((
            ChannelPath {
                level: self.level,
                bits,
            },
            self.stack[self.level as usize],
        ))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for LevelIter {}

/// All channels of level `n`, in index order `j = 1..=2^n`.
pub fn level_erasures(root: &RootChannel, n: u32) -> Result<LevelIter> {
    level_erasures_with_max(root, n, DEFAULT_MAX_LEVEL)
}

pub fn level_erasures_with_max(root: &RootChannel, n: u32, max_level: u32) -> Result<LevelIter> {
    if n > max_level.min(PATH_BITS) {
        return Err(Error::LevelTooLarge {
            level: n,
            max: max_level.min(PATH_BITS),
        });
    }
    Ok(LevelIter::new(root, n))
}

const CACHE_MAGIC: &[u8; 4] = b"PLZT";
const CACHE_VERSION: u32 = 1;

/// A fully materialized level: `entries[p]` is the erasure of `W_{2^m}^{p+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelTable {
    root: RootChannel,
    level: u32,
    entries: Vec<LogErasure>,
}

impl LevelTable {
    pub fn root_level(root: &RootChannel) -> Self {
        LevelTable {
            root: *root,
            level: 0,
            entries: vec![root.erasure()],
        }
    }

    pub fn build(root: &RootChannel, level: u32) -> Result<Self> {
        Self::build_with(root, level, DEFAULT_MAX_LEVEL, Exec::default())
    }

    pub fn build_with(root: &RootChannel, level: u32, max_level: u32, exec: Exec) -> Result<Self> {
        if level > max_level.min(PATH_BITS) {
            return Err(Error::LevelTooLarge {
                level,
                max: max_level.min(PATH_BITS),
            });
        }
        let mut table = Self::root_level(root);
        while table.level < level {
            table = table.next_level(exec);
        }
        Ok(table)
    }

    /// The table one level down: children `2p` (worse) and `2p+1` (better).
    pub fn next_level(&self, exec: Exec) -> Self {
        const PARENTS: usize = 8192;
        let mut next = vec![LogErasure::PERFECT; 2 * self.entries.len()];
        let parents = &self.entries;
        exec.for_chunks_mut(&mut next, 2 * PARENTS, |ci, chunk| {
            let base = ci * PARENTS;
            for (k, pair) in chunk.chunks_exact_mut(2).enumerate() {
                let z = parents[base + k];
                pair[0] = z.worse();
                pair[1] = z.better();
            }
        });
        LevelTable {
            root: self.root,
            level: self.level + 1,
            entries: next,
        }
    }

    pub fn root(&self) -> &RootChannel {
        &self.root
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn entries(&self) -> &[LogErasure] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Erasure of `W_{2^m}^j` (1-based `j`).
    pub fn get(&self, j: u64) -> Option<LogErasure> {
        j.checked_sub(1).and_then(|p| self.entries.get(p as usize)).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ChannelPath, LogErasure)> + '_ {
        let level = self.level;
        self.entries
            .iter()
            .enumerate()
            .map(move |(p, &z)| (ChannelPath { level, bits: p as u64 }, z))
    }

    /// Mean linear-domain erasure; deterministic for any `exec`.
    pub fn mean_erasure(&self, exec: Exec) -> f64 {
        let parts = exec.map_blocks(self.entries.len(), REDUCE_CHUNK, |r| {
            self.entries[r].iter().map(|z| z.z()).collect::<CompensatedSum>()
        });
        let mut total = CompensatedSum::new();
        for p in parts {
            total.merge(p);
        }
        total.value() / self.entries.len() as f64
    }

    /// Fraction of channels with `a < Z < b`.
    pub fn fraction_between(&self, a: f64, b: f64) -> f64 {
        let count = self
            .entries
            .iter()
            .filter(|z| {
                let z = z.z();
                a < z && z < b
            })
            .count();
        count as f64 / self.entries.len() as f64
    }

    /// Writes the little-endian cache layout.
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&self.root.z0.to_bits().to_le_bytes())?;
        w.write_all(&self.level.to_le_bytes())?;
        let mut buf = Vec::with_capacity(16 * 4096);
        for chunk in self.entries.chunks(4096) {
            buf.clear();
            for z in chunk {
                buf.extend_from_slice(&z.l_era.to_le_bytes());
                buf.extend_from_slice(&z.l_rel.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        w.flush()
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CACHE_MAGIC {
            return Err(Error::format("erasure table", "bad magic"));
        }
        let version = read_u32(&mut r)?;
        if version != CACHE_VERSION {
            return Err(Error::format("erasure table", format!("unsupported version {version}")));
        }
        let mut z0 = [0u8; 8];
        r.read_exact(&mut z0)?;
        let root = RootChannel::new(f64::from_bits(u64::from_le_bytes(z0)))?;
        let level = read_u32(&mut r)?;
        if level > PATH_BITS {
            return Err(Error::LevelTooLarge { level, max: PATH_BITS });
        }
        let len = 1usize << level;
        let mut entries = Vec::with_capacity(len);
        let mut rec = [0u8; 16];
        for _ in 0..len {
            r.read_exact(&mut rec)?;
            let l_era = f64::from_le_bytes(rec[..8].try_into().unwrap());
            let l_rel = f64::from_le_bytes(rec[8..].try_into().unwrap());
            if !(l_era >= 0.0 && l_rel >= 0.0) {
                return Err(Error::format("erasure table", "negative or NaN record"));
            }
            entries.push(LogErasure { l_era, l_rel });
        }
        Ok(LevelTable { root, level, entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(io::BufWriter::new(file))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(io::BufReader::new(file))
    }

    /// Cache file name for `(z0, level)` inside a cache directory.
    pub fn cache_path(dir: &Path, root: &RootChannel, level: u32) -> PathBuf {
        dir.join(format!("plzt-{:016x}-{level}.bin", root.z0.to_bits()))
    }

    /// Loads the table from `dir` if present and matching, else builds and stores it.
    pub fn load_or_build(dir: &Path, root: &RootChannel, level: u32, exec: Exec) -> Result<Self> {
        let path = Self::cache_path(dir, root, level);
        if let Ok(t) = Self::load(&path) {
            if t.level == level && t.root.z0.to_bits() == root.z0.to_bits() {
                return Ok(t);
            }
        }
        let t = Self::build_with(root, level, DEFAULT_MAX_LEVEL, exec)?;
        std::fs::create_dir_all(dir)?;
        t.save(&path)?;
        Ok(t)
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}
