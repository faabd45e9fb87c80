use std::io::{self, Write};
use std::path::{Path, PathBuf};

use polarbec::codec::{simulate_blocks, write_sim_csv};
use polarbec::construction::{
    construct_multipocket, pocket_weights, select_classical_from_table, union_bound, CodeSpec, ConstructionReport,
};
use polarbec::frontier::{frontier_at, max_beta, trace_frontier_with, verify_corollaries, write_frontier_csv};
use polarbec::reference::frontier_3627;
use polarbec::scaling::{
    estimate_mu, estimate_mu_from, iterate_g, mu_star_from_ratio, ratio_curve, sup_ratio, write_g_csv, write_ratio_csv,
    CandidateH, GridFunction,
};
use polarbec::{Error, Exec, LevelTable, MultiPocketParams, RootChannel, Target};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{config_value, open, write_csv_header, write_json};
use crate::{
    Command, ConstructArgs, CorollariesArgs, CriterionArgs, Format, FrontierArgs, Method, MuEstimateArgs, SimulateArgs,
};

/// Environment variable naming a directory for cached level tables.
pub const CACHE_ENV: &str = "POLARBEC_CACHE_DIR";

pub const EXIT_IO: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
    pub hint: Option<String>,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            kind: "usage",
            message: message.into(),
            hint: None,
        }
    }

    pub fn to_json(&self, command: &str) -> String {
        let mut e = json!({
            "command": command,
            "kind": self.kind,
            "message": self.message,
            "exit_code": self.code,
        });
        if let Some(h) = &self.hint {
            e["hint"] = Value::String(h.clone());
        }
        json!({ "error": e }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io(_) => (EXIT_IO, "io"),
            Error::Infeasible(_) | Error::EmptyCode(_) => (EXIT_INFEASIBLE, "infeasible"),
            Error::Inconsistency { .. } | Error::DegenerateFit(_) => (EXIT_INTERNAL, "internal"),
            _ => (EXIT_USAGE, "invalid-parameter"),
        };
        CliError {
            code,
            kind,
            message: e.to_string(),
            hint: None,
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError {
            code: EXIT_IO,
            kind: if e.kind() == io::ErrorKind::BrokenPipe {
                "broken-pipe"
            } else {
                "io"
            },
            message: e.to_string(),
            hint: None,
        }
    }
}

type CliResult = Result<(), CliError>;

pub fn run(cmd: &Command) -> CliResult {
    let name = cmd.name();
    match cmd {
        Command::Criterion(a) => criterion(name, a),
        Command::MuEstimate(a) => mu_estimate(name, a),
        Command::Construct(a) => construct(name, a),
        Command::Frontier(a) => frontier(name, a),
        Command::Simulate(a) => simulate(name, a),
        Command::Corollaries(a) => corollaries(name, a),
    }
}

fn emit<R: Serialize>(
    name: &str,
    config: &Value,
    output: Option<&Path>,
    format: Format,
    result: &R,
    csv: impl FnOnce(&mut dyn Write) -> io::Result<()>,
) -> CliResult {
    let mut w = open(output)?;
    match format {
        Format::Json => write_json(&mut *w, name, config, result)?,
        Format::Csv => {
            write_csv_header(&mut *w, name, config)?;
            csv(&mut *w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_tabulated(path: &Path) -> Result<CandidateH, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut xs = Vec::new();
    let mut hs = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') || line.starts_with("xi") {
            continue;
        }
        let (x, h) = line
            .split_once(',')
            .ok_or_else(|| CliError::usage(format!("{}: expected `xi,h`, got `{line}`", path.display())))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("{}: bad number `{s}`", path.display())))
        };
        xs.push(parse(x)?);
        hs.push(parse(h)?);
    }
    Ok(CandidateH::tabulated(GridFunction::new(xs, hs)?)?)
}

#[derive(Serialize)]
struct CriterionReport {
    sup_ratio: f64,
    argmax: f64,
    left_limit: f64,
    right_limit: f64,
    /// `-1/log2(sup ratio)`, when the ratio lies in `(2^-1/2, 1)`.
    mu_star: Option<f64>,
    /// Whether the bound `mu_star > 2` needed downstream holds.
    mu_star_exceeds_two: bool,
}

fn criterion(name: &str, a: &CriterionArgs) -> CliResult {
    let h = match &a.tabulated {
        Some(p) => read_tabulated(p)?,
        None => CandidateH::power(a.alpha)?,
    };
    let r = sup_ratio(&h, a.grid)?;
    let mu_star = mu_star_from_ratio(r.value).ok();
    let report = CriterionReport {
        sup_ratio: r.value,
        argmax: r.argmax,
        left_limit: r.left_limit,
        right_limit: r.right_limit,
        mu_star,
        mu_star_exceeds_two: mu_star.is_some_and(|m| m > 2.0),
    };
    let config = config_value(a);
    if let Some(path) = &a.ratio_csv {
        let mut w = open(Some(path))?;
        write_csv_header(&mut *w, name, &config)?;
        write_ratio_csv(&mut *w, &ratio_curve(&h, a.grid)?)?;
        w.flush()?;
    }
    emit(name, &config, a.common.output.as_deref(), a.format, &report, |w| {
        writeln!(w, "sup_ratio,argmax,left_limit,right_limit,mu_star,mu_star_exceeds_two")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            report.sup_ratio,
            report.argmax,
            report.left_limit,
            report.right_limit,
            report.mu_star.map_or(String::new(), |m| m.to_string()),
            report.mu_star_exceeds_two
        )
    })
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from)
}

fn level_table(root: &RootChannel, n: u32) -> Result<LevelTable, CliError> {
    Ok(match cache_dir() {
        Some(dir) => LevelTable::load_or_build(&dir, root, n, Exec::default())?,
        None => LevelTable::build(root, n)?,
    })
}

#[derive(Serialize)]
struct MuSample {
    n: usize,
    g_n: f64,
    exact: Option<f64>,
}

#[derive(Serialize)]
struct MuReport {
    mu: f64,
    slope: f64,
    intercept: f64,
    window_start: usize,
    max_exact_deviation: Option<f64>,
    samples: Vec<MuSample>,
}

fn mu_estimate(name: &str, a: &MuEstimateArgs) -> CliResult {
    let root = RootChannel::new(a.z0)?;
    let g = iterate_g(a.a, a.b, a.steps, a.grid)?;
    let est = match a.window_start {
        Some(w) => estimate_mu_from(&g, a.z0, w)?,
        None => estimate_mu(&g, a.z0)?,
    };
    let mut samples: Vec<MuSample> = g
        .iter()
        .enumerate()
        .map(|(n, f)| MuSample {
            n,
            g_n: f.eval(a.z0),
            exact: None,
        })
        .collect();
    let mut max_dev = None;
    if let Some(top) = a.exact_check {
        let top = (top as usize).min(a.steps);
        let mut dev = 0.0f64;
        for s in samples.iter_mut().take(top + 1) {
            let exact = level_table(&root, s.n as u32)?.fraction_between(a.a, a.b);
            dev = dev.max((exact - s.g_n).abs());
            s.exact = Some(exact);
        }
        max_dev = Some(dev);
    }
    let report = MuReport {
        mu: est.mu,
        slope: est.slope,
        intercept: est.intercept,
        window_start: est.window_start,
        max_exact_deviation: max_dev,
        samples,
    };
    emit(
        name,
        &config_value(a),
        a.common.output.as_deref(),
        a.format,
        &report,
        |w| write_g_csv(w, &g, a.z0),
    )
}

#[derive(Serialize)]
struct ClassicalReport {
    n: u32,
    z0: f64,
    selected: usize,
    rate: f64,
    capacity: f64,
    gap: f64,
    union_bound_log: f64,
    max_erasure_log: f64,
}

#[derive(Serialize)]
#[serde(untagged)]
enum ConstructOutput {
    Multipocket(ConstructionReport),
    Classical(ClassicalReport),
}

fn classical_target(a: &ConstructArgs) -> Result<Target, CliError> {
    match (a.rate, a.max_sum_erasure) {
        (Some(r), None) => Ok(Target::Rate(r)),
        (None, Some(e)) => Ok(Target::MaxSumErasure(e)),
        _ => Err(CliError::usage(
            "the classical method needs exactly one of --rate and --max-sum-erasure",
        )),
    }
}

fn infeasible_hint(a: &ConstructArgs) -> Option<String> {
    let best = max_beta(a.mu_p, a.mu_star).ok()?;
    Some(format!(
        "the region admits beta_p < {best:.4} at mu_p = {}; if beta_p is already below that, raise n",
        a.mu_p
    ))
}

fn construct(name: &str, a: &ConstructArgs) -> CliResult {
    let root = RootChannel::new(a.z0)?;
    let (spec, out): (CodeSpec, ConstructOutput) = match a.method {
        Method::Classical => {
            let table = level_table(&root, a.n)?;
            let spec = select_classical_from_table(&table, classical_target(a)?)?;
            let rate = spec.rate();
            let report = ClassicalReport {
                n: a.n,
                z0: a.z0,
                selected: spec.selected.len(),
                rate,
                capacity: root.capacity(),
                gap: root.capacity() - rate,
                union_bound_log: union_bound(&spec),
                max_erasure_log: spec.max_erasure().map_or(f64::INFINITY, |e| e.l_era()),
            };
            (spec, ConstructOutput::Classical(report))
        }
        Method::Multipocket => {
            let mut p = MultiPocketParams::new(a.beta_p, a.mu_p, a.mu_star, a.d, a.p_ub);
            p.levels = a.levels.clone();
            match construct_multipocket(&root, a.n, &p) {
                Ok((spec, report)) => (spec, ConstructOutput::Multipocket(report)),
                Err(e @ Error::EmptyCode(_)) => {
                    let mut err = CliError::from(e);
                    err.hint = infeasible_hint(a);
                    return Err(err);
                }
                Err(e) => return Err(e.into()),
            }
        }
    };
    if let Some(path) = &a.spec_out {
        spec.save(path)?;
    }
    emit(
        name,
        &config_value(a),
        a.common.output.as_deref(),
        a.format,
        &out,
        |w| match &out {
            ConstructOutput::Multipocket(r) => {
                writeln!(
                    w,
                    "m,threshold_log,recruited_weight,retained_weight,lost_fraction,merged"
                )?;
                for (p, row) in r.pockets.iter().zip(pocket_weights(r)) {
                    writeln!(
                        w,
                        "{},{},{},{},{},{}",
                        row.m, p.threshold_log, row.recruited, row.retained, row.lost_fraction, p.merged
                    )?;
                }
                Ok(())
            }
            ConstructOutput::Classical(r) => {
                writeln!(w, "n,z0,selected,rate,gap,union_bound_log")?;
                writeln!(
                    w,
                    "{},{},{},{},{},{}",
                    r.n, r.z0, r.selected, r.rate, r.gap, r.union_bound_log
                )
            }
        },
    )
}

fn frontier(name: &str, a: &FrontierArgs) -> CliResult {
    let rows = if a.reference_grid {
        let inv: Vec<f64> = frontier_3627().map(|p| p.1).collect();
        frontier_at(&inv, a.mu_star, a.pi_grid)?
    } else {
        trace_frontier_with(a.mu_star, a.samples, a.pi_grid, Exec::default())?
    };
    emit(
        name,
        &config_value(a),
        a.common.output.as_deref(),
        a.format,
        &rows,
        |w| write_frontier_csv(w, &rows),
    )
}

fn simulate(name: &str, a: &SimulateArgs) -> CliResult {
    let spec = CodeSpec::load(&a.spec)?;
    let root = match a.z0 {
        Some(z) => RootChannel::new(z)?,
        None => spec.root,
    };
    let rows = simulate_blocks(&spec, &root, a.trials, a.seed, a.block, Exec::default())?;
    let mut config = config_value(a);
    config["spec_n"] = json!(spec.n);
    config["spec_z0"] = json!(spec.root.z0());
    config["channel_z0"] = json!(root.z0());
    let last = rows.last().expect("at least one block").result;
    let result = json!({ "final": last, "blocks": rows });
    emit(name, &config, a.common.output.as_deref(), a.format, &result, |w| {
        write_sim_csv(w, &rows)
    })
}

fn corollaries(name: &str, a: &CorollariesArgs) -> CliResult {
    let r = verify_corollaries(a.mu_star, a.grid)?;
    emit(name, &config_value(a), a.common.output.as_deref(), a.format, &r, |w| {
        writeln!(w, "check,parameter,margin,passed")?;
        writeln!(
            w,
            "linear_bound,{},{},{}",
            r.linear_bound.beta_star, r.linear_bound.min_margin, r.linear_bound.passed
        )?;
        for c in &r.containment {
            writeln!(w, "containment,{},{},{}", c.gamma, c.margin, c.passed)?;
        }
        Ok(())
    })?;
    if r.passed {
        Ok(())
    } else {
        Err(CliError {
            code: EXIT_INTERNAL,
            kind: "check-failed",
            message: "corollary checks failed".into(),
            hint: None,
        })
    }
}
