//! Channel selection.
//!
//! [`select_classical`] picks the best channels of one level.
//! [`construct_multipocket`] runs recruit, train and retain over several
//! pocket levels and reports how much weight each pocket kept.

use std::fmt::{self, Write as _};
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::Serialize;

use crate::erasure::{channel_erasure, ChannelPath, LevelTable, LogErasure, RootChannel, DEFAULT_MAX_LEVEL};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::frontier::{perturbation_margin, DEFAULT_PI_GRID};
use crate::numeric::{neg_log2_sum_exp2, round_half_up, CompensatedSum};

/// What a classical construction aims for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Keep `round(rate * 2^n)` channels.
    Rate(f64),
    /// Keep adding channels while the union bound stays below this value.
    MaxSumErasure(f64),
}

/// Parameters of the multi-pocket construction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiPocketParams {
    pub beta_p: f64,
    pub mu_p: f64,
    pub mu_star: f64,
    pub d: u32,
    pub p_ub: f64,
    /// Explicit pocket levels as fractions of `n`. When absent the levels
    /// are `round(k * n0 / D)` for `k = 1..=D`.
    pub levels: Option<Vec<f64>>,
}

impl MultiPocketParams {
    pub fn new(beta_p: f64, mu_p: f64, mu_star: f64, d: u32, p_ub: f64) -> Self {
        MultiPocketParams {
            beta_p,
            mu_p,
            mu_star,
            d,
            p_ub,
            levels: None,
        }
    }

    pub fn with_levels(mut self, fractions: Vec<f64>) -> Self {
        self.levels = Some(fractions);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum ConstructionParams {
    Classical { target: Target },
    Multipocket(MultiPocketParams),
}

/// A selected level-`n` channel with its provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectedChannel {
    pub path: ChannelPath,
    pub erasure: LogErasure,
    /// Squarings after `pocket_level`.
    pub squarings: u32,
    pub pocket_level: u32,
}

impl SelectedChannel {
    pub fn index(&self) -> u64 {
        self.path.index()
    }
}

/// A constructed polar code. `selected` is sorted by channel index.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub n: u32,
    pub root: RootChannel,
    pub params: ConstructionParams,
    pub selected: Vec<SelectedChannel>,
}

impl CodeSpec {
    pub fn block_length(&self) -> usize {
        1usize << self.n
    }

    pub fn rate(&self) -> f64 {
        self.selected.len() as f64 / self.block_length() as f64
    }

    /// `mask[p]` is true when channel `p + 1` carries information.
    pub fn info_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.block_length()];
        for s in &self.selected {
            mask[s.path.position()] = true;
        }
        mask
    }

    pub fn indices(&self) -> Vec<u64> {
        self.selected.iter().map(|s| s.index()).collect()
    }

    /// The largest selected erasure, or `None` for an empty code.
    pub fn max_erasure(&self) -> Option<LogErasure> {
        self.selected.iter().map(|s| s.erasure).max_by(|a, b| a.cmp_erasure(b))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "n={}", self.n)?;
        writeln!(w, "z0={}", self.root.z0())?;
        writeln!(w, "params={}", format_params(&self.params))?;
        for s in &self.selected {
            writeln!(
                w,
                "j={} m={} sq={} lera={}",
                s.index(),
                s.pocket_level,
                s.squarings,
                s.erasure.l_era()
            )?;
        }
        Ok(())
    }

    /// Parses the text format. Erasures are recomputed from `z0` and the
    /// path and must agree with the stored `lera` exactly.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::format("code spec", format!("missing `{key}=` line")))??;
            line.strip_prefix(key)
                .and_then(|v| v.strip_prefix('='))
                .map(str::to_owned)
                .ok_or_else(|| Error::format("code spec", format!("expected `{key}=`, got `{line}`")))
        };
        let n: u32 = parse_num(&header("n")?, "n")?;
        if n > DEFAULT_MAX_LEVEL {
            return Err(Error::LevelTooLarge {
                level: n,
                max: DEFAULT_MAX_LEVEL,
            });
        }
        let root = RootChannel::new(parse_num(&header("z0")?, "z0")?)?;
        let params = parse_params(&header("params")?)?;
        let mut selected = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields = key_values(&line)?;
            let get = |k: &str| {
                fields
                    .iter()
                    .find(|(key, _)| *key == k)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| Error::format("code spec", format!("`{line}` lacks `{k}`")))
            };
            let j: u64 = parse_num(get("j")?, "j")?;
            let m: u32 = parse_num(get("m")?, "m")?;
            let sq: u32 = parse_num(get("sq")?, "sq")?;
            let lera: f64 = parse_num(get("lera")?, "lera")?;
            let path = ChannelPath::from_index(n, j)?;
            if m > n {
                return Err(Error::format("code spec", format!("pocket level {m} above n = {n}")));
            }
            let erasure = channel_erasure(&root, &path);
            if erasure.l_era().to_bits() != lera.to_bits() {
                return Err(Error::format(
                    "code spec",
                    format!("channel {j}: stored lera {lera} but recomputed {}", erasure.l_era()),
                ));
            }
            if let Some(prev) = selected.last().map(|s: &SelectedChannel| s.index()) {
                if prev >= j {
                    return Err(Error::format("code spec", "channels must be strictly increasing in j"));
                }
            }
            selected.push(SelectedChannel {
                path,
                erasure,
                squarings: sq,
                pocket_level: m,
            });
        }
        Ok(CodeSpec {
            n,
            root,
            params,
            selected,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(io::BufReader::new(std::fs::File::open(path)?))
    }
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::format("code spec", format!("bad value `{s}` for `{what}`")))
}

fn key_values(line: &str) -> Result<Vec<(&str, &str)>> {
    line.split_whitespace()
        .map(|tok| {
            tok.split_once('=')
                .ok_or_else(|| Error::format("code spec", format!("token `{tok}` is not key=value")))
        })
        .collect()
}

fn format_params(p: &ConstructionParams) -> String {
    let mut s = String::new();
    match p {
        ConstructionParams::Classical { target } => {
            s.push_str("method=classical");
            match target {
                Target::Rate(r) => write!(s, " rate={r}"),
                Target::MaxSumErasure(e) => write!(s, " max_sum_erasure={e}"),
            }
            .unwrap();
        }
        ConstructionParams::Multipocket(m) => {
            write!(
                s,
                "method=multipocket beta_p={} mu_p={} mu_star={} d={} p_ub={}",
                m.beta_p, m.mu_p, m.mu_star, m.d, m.p_ub
            )
            .unwrap();
            if let Some(levels) = &m.levels {
                let list: Vec<String> = levels.iter().map(f64::to_string).collect();
                write!(s, " levels={}", list.join(",")).unwrap();
            }
        }
    }
    s
}

fn parse_params(s: &str) -> Result<ConstructionParams> {
    let kv = key_values(s)?;
    let get = |k: &str| {
        kv.iter()
            .find(|(key, _)| *key == k)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::format("code spec", format!("params lack `{k}`")))
    };
    match get("method")? {
        "classical" => {
            let target = if let Ok(r) = get("rate") {
                Target::Rate(parse_num(r, "rate")?)
            } else {
                Target::MaxSumErasure(parse_num(get("max_sum_erasure")?, "max_sum_erasure")?)
            };
            Ok(ConstructionParams::Classical { target })
        }
        "multipocket" => {
            let levels = match get("levels") {
                Ok(l) => Some(
                    l.split(',')
                        .map(|x| parse_num(x, "levels"))
                        .collect::<Result<Vec<f64>>>()?,
                ),
                Err(_) => None,
            };
            Ok(ConstructionParams::Multipocket(MultiPocketParams {
                beta_p: parse_num(get("beta_p")?, "beta_p")?,
                mu_p: parse_num(get("mu_p")?, "mu_p")?,
                mu_star: parse_num(get("mu_star")?, "mu_star")?,
                d: parse_num(get("d")?, "d")?,
                p_ub: parse_num(get("p_ub")?, "p_ub")?,
                levels,
            }))
        }
        other => Err(Error::format("code spec", format!("unknown method `{other}`"))),
    }
}

impl fmt::Display for CodeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut buf = Vec::new();
        self.write_to(&mut buf).map_err(|_| fmt::Error)?;
        f.write_str(&String::from_utf8_lossy(&buf))
    }
}

/// Single-threshold selection over level `n`.
pub fn select_classical(root: &RootChannel, n: u32, target: Target) -> Result<CodeSpec> {
    let table = LevelTable::build(root, n)?;
    select_classical_from_table(&table, target)
}

pub fn select_classical_from_table(table: &LevelTable, target: Target) -> Result<CodeSpec> {
    let n = table.level();
    let mut order: Vec<usize> = (0..table.len()).collect();
    let e = table.entries();
    // smallest erasure first, smaller index on ties
    order.sort_unstable_by(|&a, &b| e[a].cmp_erasure(&e[b]).then(a.cmp(&b)));
    let count = match target {
        Target::Rate(rate) => {
            if !(0.0..=1.0).contains(&rate) {
                return Err(Error::param("rate", format!("{rate} outside [0, 1]")));
            }
            round_half_up(rate * table.len() as f64) as usize
        }
        Target::MaxSumErasure(budget) => {
            if !(budget >= 0.0) {
                return Err(Error::param(
                    "max_sum_erasure",
                    format!("{budget} must be non-negative"),
                ));
            }
            let mut sum = CompensatedSum::new();
            let mut k = 0;
            for &p in &order {
                sum.add(e[p].z());
                if sum.value() > budget {
                    break;
                }
                k += 1;
            }
            if k == 0 {
                return Err(Error::Infeasible(format!(
                    "best channel has erasure {} > {budget}",
                    e[order[0]].z()
                )));
            }
            k
        }
    };
    let mut chosen: Vec<usize> = order[..count].to_vec();
    chosen.sort_unstable();
    let selected = chosen
        .into_iter()
        .map(|p| {
            let path = ChannelPath::from_index(n, p as u64 + 1).expect("index within level");
            SelectedChannel {
                path,
                erasure: e[p],
                squarings: path.squaring_count(),
                pocket_level: 0,
            }
        })
        .collect();
    Ok(CodeSpec {
        n,
        root: *table.root(),
        params: ConstructionParams::Classical { target },
        selected,
    })
}

/// One recruit level with its members and accounting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pocket {
    pub m: u32,
    /// Recruit threshold as `-log2(P_ub * 2^(-D m))`.
    pub threshold_log: f64,
    #[serde(skip)]
    pub members: Vec<ChannelPath>,
    pub recruited: u64,
    /// `Σ 2^(-m)` over members.
    pub weight: f64,
    /// Weight of trained descendants meeting the squaring quota.
    pub quota_weight: f64,
    /// Weight of descendants that also meet the final erasure threshold.
    pub retained_weight: f64,
    pub discarded_weight: f64,
    /// How many requested levels rounded onto this one.
    pub merged: u32,
}

impl Pocket {
    pub fn lost_fraction(&self) -> f64 {
        if self.weight > 0.0 {
            self.discarded_weight / self.weight
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructionReport {
    pub n: u32,
    pub z0: f64,
    /// `floor(n * mu_star / mu_p)`.
    pub n0: u32,
    pub quota: u32,
    /// Selected channels satisfy `l_era >= final_threshold_log`.
    pub final_threshold_log: f64,
    pub pockets: Vec<Pocket>,
    pub rate: f64,
    pub capacity: f64,
    pub gap: f64,
    pub union_bound_log: f64,
    pub max_erasure_log: f64,
    /// Margin of the perturbed region inequality for the chosen `D`; only
    /// meaningful for the uniform level schedule.
    pub perturbation_margin: Option<f64>,
}

/// `(m, recruited, retained, lost_fraction)` per pocket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PocketWeightRow {
    pub m: u32,
    pub recruited: f64,
    pub retained: f64,
    pub lost_fraction: f64,
}

pub fn pocket_weights(report: &ConstructionReport) -> Vec<PocketWeightRow> {
    report
        .pockets
        .iter()
        .map(|p| PocketWeightRow {
            m: p.m,
            recruited: p.weight,
            retained: p.retained_weight,
            lost_fraction: p.lost_fraction(),
        })
        .collect()
}

/// `-log2 Σ Z` over the selected channels; `+∞` for an empty code.
pub fn union_bound(spec: &CodeSpec) -> f64 {
    neg_log2_sum_exp2(spec.selected.iter().map(|s| s.erasure.l_era()))
}

/// Realized pocket levels, ascending and deduplicated, with the number of
/// requested levels that landed on each.
pub fn pocket_levels(n: u32, params: &MultiPocketParams) -> Result<(u32, Vec<(u32, u32)>)> {
    let n0 = (n as f64 * params.mu_star / params.mu_p).floor() as u32;
    let raw: Vec<u32> = match &params.levels {
        None => {
            if n0 < params.d {
                return Err(Error::param(
                    "n",
                    format!("n0 = floor(n mu_star / mu_p) = {n0} is below D = {}", params.d),
                ));
            }
            (1..=params.d)
                .map(|k| round_half_up(k as f64 * n0 as f64 / params.d as f64) as u32)
                .collect()
        }
        Some(fractions) => {
            if fractions.is_empty() {
                return Err(Error::param("levels", "empty"));
            }
            fractions
                .iter()
                .map(|&f| {
                    if !(f > 0.0 && f <= 1.0) {
                        return Err(Error::param("levels", format!("fraction {f} outside (0, 1]")));
                    }
                    Ok(round_half_up(f * n as f64) as u32)
                })
                .collect::<Result<_>>()?
        }
    };
    let mut levels: Vec<(u32, u32)> = Vec::new();
    let mut sorted = raw;
    sorted.sort_unstable();
    for m in sorted {
        match levels.last_mut() {
            Some((last, count)) if *last == m => *count += 1,
            _ => levels.push((m, 1)),
        }
    }
    Ok((n0, levels))
}

fn validate(n: u32, p: &MultiPocketParams) -> Result<()> {
    if !(p.mu_star > 2.0) {
        return Err(Error::param("mu_star", format!("{} must exceed 2", p.mu_star)));
    }
    if !(p.mu_p > p.mu_star) {
        return Err(Error::param(
            "mu_p",
            format!("{} must exceed mu_star = {}", p.mu_p, p.mu_star),
        ));
    }
    if !(0.0..=0.5).contains(&p.beta_p) {
        return Err(Error::param("beta_p", format!("{} outside [0, 1/2]", p.beta_p)));
    }
    if p.d == 0 {
        return Err(Error::param("d", "must be at least 1"));
    }
    if !(p.p_ub > 0.0 && p.p_ub < 1.0) {
        return Err(Error::param("p_ub", format!("{} outside (0, 1)", p.p_ub)));
    }
    if n > DEFAULT_MAX_LEVEL {
        return Err(Error::LevelTooLarge {
            level: n,
            max: DEFAULT_MAX_LEVEL,
        });
    }
    Ok(())
}

/// Number of squarings a retained channel needs after its pocket level.
pub fn squaring_quota(beta_p: f64, n: u32) -> u32 {
    (beta_p * n as f64 - 1e-9).ceil().max(0.0) as u32
}

// walks the tree down to the last pocket level, recruiting each channel at
// the first pocket level where it clears the threshold
fn recruit(
    levels: &[(u32, u32)],
    thresholds: &[f64],
    node: ChannelPath,
    z: LogErasure,
    k: usize,
    out: &mut [Vec<(ChannelPath, LogErasure)>],
) {
    if node.level() == levels[k].0 {
        if z.l_era() > thresholds[k] {
            out[k].push((node, z));
            return;
        }
        if k + 1 == levels.len() {
            return;
        }
        return recruit(levels, thresholds, node, z, k + 1, out);
    }
    for better in [false, true] {
        recruit(levels, thresholds, node.child(better), z.step(better), k, out);
    }
}

struct Retain {
    n: u32,
    quota: u32,
    final_log: f64,
}

impl Retain {
    // appends descendants of `node` at level n that meet the quota and the
    // final threshold; `sq` counts squarings since the pocket level
    fn walk(&self, node: ChannelPath, z: LogErasure, sq: u32, m: u32, out: &mut Vec<SelectedChannel>) {
        let left = self.n - node.level();
        if sq + left < self.quota {
            return;
        }
        // worse steps only lower l_era, so all-better is the best case
        if z.l_era() * (left as f64).exp2() < self.final_log {
            return;
        }
        if left == 0 {
            out.push(SelectedChannel {
                path: node,
                erasure: z,
                squarings: sq,
                pocket_level: m,
            });
            return;
        }
        self.walk(node.child(false), z.worse(), sq, m, out);
        self.walk(node.child(true), z.better(), sq + 1, m, out);
    }
}

fn binomial_tail_weight(span: u32, quota: u32) -> f64 {
    // P(Bin(span, 1/2) >= quota)
    if quota > span {
        return 0.0;
    }
    let mut c = 1.0f64;
    let mut total = CompensatedSum::new();
    for k in 0..=span {
        if k >= quota {
            total.add(c);
        }
        c = c * (span - k) as f64 / (k + 1) as f64;
    }
    total.value() / (span as f64).exp2()
}

/// Recruit, train and retain across the pocket levels.
pub fn construct_multipocket(
    root: &RootChannel,
    n: u32,
    params: &MultiPocketParams,
) -> Result<(CodeSpec, ConstructionReport)> {
    construct_multipocket_with(root, n, params, Exec::default())
}

pub fn construct_multipocket_with(
    root: &RootChannel,
    n: u32,
    params: &MultiPocketParams,
    exec: Exec,
) -> Result<(CodeSpec, ConstructionReport)> {
    validate(n, params)?;
    let (n0, levels) = pocket_levels(n, params)?;
    let d = params.d as f64;
    let base = -params.p_ub.log2();
    let thresholds: Vec<f64> = levels.iter().map(|&(m, _)| base + d * m as f64).collect();

    let mut recruited = vec![Vec::new(); levels.len()];
    recruit(
        &levels,
        &thresholds,
        ChannelPath::ROOT,
        root.erasure(),
        0,
        &mut recruited,
    );

    let quota = squaring_quota(params.beta_p, n);
    let final_log = (params.beta_p * n as f64).exp2();
    let retain = Retain { n, quota, final_log };

    let members: Vec<(usize, ChannelPath, LogErasure)> = recruited
        .iter()
        .enumerate()
        .flat_map(|(k, v)| v.iter().map(move |&(p, z)| (k, p, z)))
        .collect();
    let trained: Vec<Vec<SelectedChannel>> = exec.map_range(members.len(), |i| {
        let (_, p, z) = members[i];
        let mut out = Vec::new();
        retain.walk(p, z, 0, p.level(), &mut out);
        out
    });

    let mut retained_count = vec![0u64; levels.len()];
    for (&(k, _, _), t) in members.iter().zip(&trained) {
        retained_count[k] += t.len() as u64;
    }
    let mut selected: Vec<SelectedChannel> = trained.into_iter().flatten().collect();
    selected.sort_unstable_by_key(|s| s.path.bits());

    let leaf = (-(n as f64)).exp2();
    let pockets: Vec<Pocket> = levels
        .iter()
        .zip(&thresholds)
        .zip(recruited)
        .enumerate()
        .map(|(k, ((&(m, merged), &threshold_log), members))| {
            let w = (-(m as f64)).exp2();
            let weight = members.len() as f64 * w;
            let retained_weight = retained_count[k] as f64 * leaf;
            Pocket {
                m,
                threshold_log,
                recruited: members.len() as u64,
                members: members.into_iter().map(|(p, _)| p).collect(),
                weight,
                quota_weight: weight * binomial_tail_weight(n - m, quota),
                retained_weight,
                discarded_weight: weight - retained_weight,
                merged,
            }
        })
        .collect();

    let spec = CodeSpec {
        n,
        root: *root,
        params: ConstructionParams::Multipocket(params.clone()),
        selected,
    };
    if spec.selected.is_empty() {
        return Err(Error::EmptyCode(format!(
            "no channel survived at n = {n} (n0 = {n0}, quota = {quota}); \
             check that (beta_p, mu_p) lies inside the achievable region or raise n"
        )));
    }
    let rate = spec.rate();
    let perturbation = match params.levels {
        None => perturbation_margin(params.beta_p, params.mu_p, params.mu_star, params.d, DEFAULT_PI_GRID).ok(),
        Some(_) => None,
    };
    let report = ConstructionReport {
        n,
        z0: root.z0(),
        n0,
        quota,
        final_threshold_log: final_log,
        pockets,
        rate,
        capacity: root.capacity(),
        gap: root.capacity() - rate,
        union_bound_log: union_bound(&spec),
        max_erasure_log: spec.max_erasure().map_or(f64::INFINITY, |e| e.l_era()),
        perturbation_margin: perturbation,
    };
    Ok((spec, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half() -> RootChannel {
        RootChannel::new(0.5).unwrap()
    }

    #[test]
    fn classical_rate_half_at_level_three() {
        let spec = select_classical(&half(), 3, Target::Rate(0.5)).unwrap();
        assert_eq!(spec.indices(), vec![4, 6, 7, 8]);
        let z: Vec<f64> = spec.selected.iter().map(|s| s.erasure.z()).collect();
        for (got, want) in z.iter().zip([0.3164, 0.1914, 0.1211, 0.0039]) {
            assert!((got - want).abs() < 1e-4);
        }
        assert!((union_bound(&spec) - 0.660).abs() < 1e-3);
    }

    #[test]
    fn classical_root_and_budget() {
        let spec = select_classical(&half(), 0, Target::Rate(1.0)).unwrap();
        assert_eq!(spec.indices(), vec![1]);
        let spec = select_classical(&half(), 3, Target::MaxSumErasure(0.01)).unwrap();
        assert_eq!(spec.indices(), vec![8]);
        assert!(matches!(
            select_classical(&half(), 3, Target::MaxSumErasure(0.001)),
            Err(Error::Infeasible(_))
        ));
        assert!(select_classical(&half(), 3, Target::Rate(1.5)).is_err());
    }

    #[test]
    fn classical_ties_prefer_smaller_index() {
        // at z0 = 0 every channel is perfect
        let spec = select_classical(&RootChannel::new(0.0).unwrap(), 3, Target::Rate(0.25)).unwrap();
        assert_eq!(spec.indices(), vec![1, 2]);
    }

    #[test]
    fn union_bound_examples() {
        let one = select_classical(&half(), 3, Target::Rate(0.125)).unwrap();
        assert_eq!(union_bound(&one), one.selected[0].erasure.l_era());
        let e = LogErasure::from_l_era(10.0).unwrap();
        let mut two = one.clone();
        two.selected = vec![
            SelectedChannel {
                path: ChannelPath::from_index(3, 1).unwrap(),
                erasure: e,
                squarings: 0,
                pocket_level: 0,
            };
            2
        ];
        assert!((union_bound(&two) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn uniform_levels_and_merging() {
        let p = MultiPocketParams::new(0.3, 8.0, 3.8, 4, 2f64.powi(-10));
        let (n0, levels) = pocket_levels(16, &p).unwrap();
        assert_eq!(n0, 7);
        assert_eq!(levels, vec![(2, 1), (4, 1), (5, 1), (7, 1)]);
        let p = MultiPocketParams::new(0.3, 8.0, 3.8, 6, 2f64.powi(-10));
        let (_, levels) = pocket_levels(16, &p).unwrap();
        // 7/6, 14/6, ... rounds to 1, 2, 4, 5, 6, 7
        assert_eq!(levels.len(), 6);
        let p = MultiPocketParams::new(0.3, 8.0, 3.8, 7, 2f64.powi(-10));
        let (_, levels) = pocket_levels(16, &p).unwrap();
        assert_eq!(levels.iter().map(|l| l.1).sum::<u32>(), 7);
        let p = MultiPocketParams::new(0.3, 8.0, 3.8, 9, 2f64.powi(-10));
        assert!(pocket_levels(16, &p).is_err());
        let p = MultiPocketParams::new(0.01, 8.0, 3.8, 2, 2f64.powi(-10)).with_levels(vec![0.7, 0.9]);
        assert_eq!(pocket_levels(20, &p).unwrap().1, vec![(14, 1), (18, 1)]);
    }

    #[test]
    fn multipocket_structural_guarantee() {
        let p = MultiPocketParams::new(0.30, 8.0, 3.8, 4, 2f64.powi(-10));
        let (spec, report) = construct_multipocket(&half(), 16, &p).unwrap();
        assert!(!spec.selected.is_empty());
        assert_eq!(report.quota, 5);
        for s in &spec.selected {
            assert!(s.squarings >= 5);
            assert_eq!(s.path.squarings_since(s.pocket_level), s.squarings);
            assert!(s.erasure.l_era() >= 4.8f64.exp2());
        }
        let kept: f64 = report.pockets.iter().map(|p| p.retained_weight).sum();
        assert!((kept - spec.rate()).abs() < 1e-12);
        for p in &report.pockets {
            assert!(p.retained_weight <= p.quota_weight + 1e-15);
            assert!(p.quota_weight <= p.weight + 1e-15);
            assert!((0.0..=1.0).contains(&p.lost_fraction()));
        }
        assert_eq!(report.gap, report.capacity - report.rate);
    }

    #[test]
    fn pockets_exclude_descendants_of_earlier_members() {
        let p = MultiPocketParams::new(0.30, 8.0, 3.8, 4, 2f64.powi(-10));
        let (_, report) = construct_multipocket(&half(), 16, &p).unwrap();
        for (k, later) in report.pockets.iter().enumerate() {
            for c in &later.members {
                assert!(channel_erasure(&half(), c).l_era() > later.threshold_log);
                for earlier in &report.pockets[..k] {
                    assert!(!earlier.members.iter().any(|e| c.descends_from(e)));
                }
            }
        }
    }

    #[test]
    fn single_pocket_has_one_row() {
        let p = MultiPocketParams::new(0.1, 8.0, 3.8, 1, 2f64.powi(-10));
        let (spec, report) = construct_multipocket(&half(), 16, &p).unwrap();
        let rows = pocket_weights(&report);
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].m, 7);
        assert!((rows[0].retained - spec.rate()).abs() < 1e-12);
    }

    #[test]
    fn zero_beta_disables_the_squaring_filter() {
        let p = MultiPocketParams::new(0.0, 8.0, 3.8, 2, 2f64.powi(-10));
        let (spec, report) = construct_multipocket(&half(), 12, &p).unwrap();
        assert_eq!(report.quota, 0);
        for pk in &report.pockets {
            assert_eq!(pk.quota_weight, pk.weight);
        }
        // with only the Z <= 1/2 filter left, every such descendant survives
        let members: Vec<ChannelPath> = report.pockets.iter().flat_map(|p| p.members.clone()).collect();
        let expect: Vec<u64> = crate::erasure::level_erasures(&half(), 12)
            .unwrap()
            .filter(|(p, z)| z.l_era() >= 1.0 && members.iter().any(|m| p.descends_from(m)))
            .map(|(p, _)| p.index())
            .collect();
        assert_eq!(spec.indices(), expect);
    }

    #[test]
    fn schedule_does_not_change_the_code() {
        let p = MultiPocketParams::new(0.25, 8.0, 3.8, 4, 2f64.powi(-10));
        let (a, ra) = construct_multipocket_with(&half(), 16, &p, Exec::Sequential).unwrap();
        let (b, rb) = construct_multipocket_with(&half(), 16, &p, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let ok = MultiPocketParams::new(0.25, 8.0, 3.8, 4, 2f64.powi(-10));
        let cases = [
            MultiPocketParams {
                beta_p: 0.6,
                ..ok.clone()
            },
            MultiPocketParams {
                mu_p: 3.0,
                ..ok.clone()
            },
            MultiPocketParams {
                mu_star: 2.0,
                mu_p: 8.0,
                ..ok.clone()
            },
            MultiPocketParams { d: 0, ..ok.clone() },
            MultiPocketParams {
                p_ub: 1.0,
                ..ok.clone()
            },
        ];
        for c in &cases {
            assert!(matches!(
                construct_multipocket(&half(), 16, c),
                Err(Error::InvalidParameter { .. })
            ));
        }
        assert!(matches!(
            construct_multipocket(&half(), 27, &ok),
            Err(Error::LevelTooLarge { .. })
        ));
    }

    #[test]
    fn unreachable_parameters_give_an_empty_code() {
        // no channel above level 5 clears a 100-bit recruit threshold
        let p = MultiPocketParams::new(0.3, 8.0, 3.8, 4, 2f64.powi(-100));
        assert!(matches!(
            construct_multipocket(&half(), 12, &p),
            Err(Error::EmptyCode(_))
        ));
    }

    #[test]
    fn spec_file_roundtrip() {
        let p = MultiPocketParams::new(0.25, 8.0, 3.8, 4, 2f64.powi(-10)).with_levels(vec![0.25, 0.4]);
        let (spec, _) = construct_multipocket(&RootChannel::new(0.3).unwrap(), 14, &p).unwrap();
        let mut buf = Vec::new();
        spec.write_to(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("n=14\nz0=0.3\nparams=method=multipocket beta_p=0.25"));
        let back = CodeSpec::read_from(&buf[..]).unwrap();
        assert_eq!(back, spec);

        let classical = select_classical(&half(), 5, Target::MaxSumErasure(0.05)).unwrap();
        let mut buf = Vec::new();
        classical.write_to(&mut buf).unwrap();
        assert_eq!(CodeSpec::read_from(&buf[..]).unwrap(), classical);
    }

    #[test]
    fn spec_file_rejects_tampering() {
        let spec = select_classical(&half(), 3, Target::Rate(0.5)).unwrap();
        let text = spec.to_string().replace("j=8 m=0 sq=3 lera=", "j=8 m=0 sq=3 lera=1");
        assert!(CodeSpec::read_from(text.as_bytes()).is_err());
        let text = spec.to_string().replace("n=3", "n=x");
        assert!(CodeSpec::read_from(text.as_bytes()).is_err());
        assert!(CodeSpec::read_from("n=3\n".as_bytes()).is_err());
    }

    #[test]
    fn binomial_tail_matches_counting() {
        for span in 0..12u32 {
            for q in 0..=span + 1 {
                let count = (0..1u32 << span).filter(|b| b.count_ones() >= q).count();
                let w = binomial_tail_weight(span, q);
                assert!((w - count as f64 / (1u64 << span) as f64).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn raising_beta_never_adds_channels(b1 in 0.0f64..0.4, db in 0.0f64..0.1, z0 in 0.1f64..0.7) {
            let root = RootChannel::new(z0).unwrap();
            let lo = MultiPocketParams::new(b1, 8.0, 3.8, 2, 2f64.powi(-6));
            let hi = MultiPocketParams { beta_p: b1 + db, ..lo.clone() };
            let small = construct_multipocket(&root, 12, &hi).map(|r| r.0.indices()).unwrap_or_default();
            let large = construct_multipocket(&root, 12, &lo).map(|r| r.0.indices()).unwrap_or_default();
            prop_assert!(small.iter().all(|j| large.binary_search(j).is_ok()));
        }
    }
}
