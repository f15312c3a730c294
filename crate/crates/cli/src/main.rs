//! `dioph`: measures, unions, divergence sums, Borel–Cantelli bounds,
//! fiber checks and experiment batteries from the command line.
//!
//! Exit status: 0 on success, 1 when a run flags anomalies, 2 on usage,
//! configuration or validation errors.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dioph_core::arith::PhiTable;
use dioph_core::borel_cantelli::SampledPairs;
use dioph_core::config::{Config, FiberConfig, PadicConfig, Section};
use dioph_core::fibering::{exhaustive_check, random_rational_weights, DiscreteSpace, ExhaustiveSummary, ProductSet};
use dioph_core::harness::{self, Battery, PairChoice};
use dioph_core::psi::{cond1_scan, partial_sums, CriterionKind};
use dioph_core::regions::{self, RegionSpec};
use dioph_core::report::{self, fmt_float, fmt_rational, round12, Row, Summary};
use dioph_core::sampler::{self, estimate_union_measure, WORKERS_ENV};
use dioph_core::{ApproxFunction, ExperimentConfig, Mode, SumCriterion};
use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "dioph", version, about = "Metric multiplicative Diophantine approximation laboratory")]
struct Cli {
    /// Worker threads for Monte Carlo loops; never changes results.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact, closed-form or quadrature measure of single slices.
    Measure(MeasureArgs),
    /// Monte Carlo measure of truncated unions at each checkpoint.
    Union(RunArgs),
    /// Partial divergence sums and the coprime-density ratio.
    Sums(RunArgs),
    /// Borel–Cantelli lower bound against union measures.
    BcBound(BcArgs),
    /// Cross fibering report for a product set, or an exhaustive sweep.
    FiberCheck(FiberArgs),
    /// Run a configuration file and write CSV tables plus a JSON summary.
    Experiment(ExperimentArgs),
    /// Weighted solution counts at random points for p-adic weights.
    Padic(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Product,
    Max,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Product => Mode::Product,
            ModeArg::Max => Mode::Max,
        }
    }
}

#[derive(Args)]
struct MeasureArgs {
    /// Denominators (repeatable).
    #[arg(long = "q", default_value = "1", num_args = 1.., value_delimiter = ',')]
    q: Vec<u64>,
    #[arg(long, default_value_t = 1)]
    n: u32,
    #[arg(long)]
    delta: f64,
    #[arg(long, conflicts_with = "plain")]
    coprime: bool,
    /// Plain numerators (the default).
    #[arg(long)]
    plain: bool,
    #[arg(long, value_enum, default_value = "product")]
    mode: ModeArg,
    #[arg(long, default_value_t = regions::DEFAULT_TOL)]
    tol: f64,
}

/// Experiment from a config file and/or flags; flags win.
#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// `ψ(q) = c · q^-a · ln(q+1)^-b`
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    n: Option<u32>,
    #[arg(long)]
    q0: Option<u64>,
    #[arg(long = "q")]
    q: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    coprime: bool,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Checkpoints, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<u64>,
    /// Write `<name>.csv` and `summary.json` here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum, PartialEq)]
enum PairArg {
    Exact,
    Independence,
    MonteCarlo,
}

#[derive(Args)]
struct BcArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "monte-carlo")]
    pairs: PairArg,
    /// Samples for Monte Carlo pair tables (defaults to `samples`).
    #[arg(long)]
    pair_samples: Option<u64>,
}

#[derive(Args)]
struct FiberArgs {
    /// Config file with a `fiber` section.
    #[arg(long, conflicts_with = "exhaustive", required_unless_present = "exhaustive")]
    matrix: Option<PathBuf>,
    /// Enumerate every subset of a k × k product space (k <= 4).
    #[arg(long)]
    exhaustive: Option<usize>,
    #[arg(long, default_value_t = 25)]
    weight_samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    config: PathBuf,
    #[arg(long, default_value = "dioph-out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<u64>,
}

type CliResult<T> = Result<T, String>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = sampler::resolve_workers(cli.workers);
    let result = match cli.command {
        Command::Measure(a) => cmd_measure(&a),
        Command::Union(a) => cmd_union(&a, workers),
        Command::Sums(a) => cmd_sums(&a),
        Command::BcBound(a) => cmd_bc(&a, workers),
        Command::FiberCheck(a) => cmd_fiber(&a),
        Command::Experiment(a) => cmd_experiment(&a, workers),
        Command::Padic(a) => cmd_padic(&a, workers),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn read_config(path: &Path) -> CliResult<Config> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Config::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn cmd_measure(a: &MeasureArgs) -> CliResult<bool> {
    let table = PhiTable::new(a.q.iter().copied().max().unwrap_or(1)).map_err(err)?;
    let rows = a
        .q
        .iter()
        .map(|&q| {
            let spec = RegionSpec {
                q,
                n: a.n,
                delta: a.delta,
                mode: a.mode.into(),
                coprime: a.coprime,
            };
            Ok(Row {
                q,
                phi_q: table.phi(q).map_err(err)?,
                psi_q: a.delta,
                measure: regions::region_measure(&spec, a.tol).map_err(err)?,
            })
        })
        .collect::<CliResult<Vec<_>>>()?;
    report::write_csv(io::stdout().lock(), &rows).map_err(err)?;
    Ok(true)
}

/// Experiment config from `--config` (experiment or padic section) with
/// flag overrides applied; returns the whole config for echoing.
fn build_config(a: &RunArgs, want_padic: bool, needs_seed: bool) -> CliResult<Config> {
    let mut cfg = match &a.config {
        Some(p) => read_config(p)?,
        None if want_padic => return Err("padic needs --config with a padic section".into()),
        None => {
            let family = ApproxFunction::power_log(a.c.unwrap_or(0.25), a.a.unwrap_or(1.0), a.b.unwrap_or(0.0)).map_err(err)?;
            let q = a.q.ok_or("--q is required without --config")?;
            Config::experiment(ExperimentConfig {
                family,
                n: a.n.unwrap_or(1),
                mode: Mode::Product,
                coprime: false,
                q0: 1,
                q,
                samples: a.samples.unwrap_or(1),
                seed: match a.seed {
                    Some(s) => s,
                    None if needs_seed => return Err("--seed is required without --config (no implicit seeding)".into()),
                    None => 0,
                },
                q_grid: Vec::new(),
            })
        }
    };
    let found_padic = cfg.padic.is_some();
    if want_padic != found_padic || cfg.battery.is_some() || cfg.fiber.is_some() {
        return Err(format!(
            "config must contain {} section",
            if want_padic { "a padic" } else { "an experiment" }
        ));
    }
    let from_file = a.config.is_some();
    for e in cfg.experiments_mut() {
        if from_file && (a.c.is_some() || a.a.is_some() || a.b.is_some()) {
            e.family = ApproxFunction::power_log(a.c.unwrap_or(0.25), a.a.unwrap_or(1.0), a.b.unwrap_or(0.0)).map_err(err)?;
        }
        if let Some(n) = a.n {
            e.n = n;
        }
        if let Some(q0) = a.q0 {
            e.q0 = q0;
        }
        if let Some(q) = a.q {
            e.q = q;
        }
        if let Some(s) = a.samples {
            e.samples = s;
        }
        if let Some(s) = a.seed {
            e.seed = s;
        }
        if a.coprime {
            e.coprime = true;
        }
        if let Some(m) = a.mode {
            e.mode = m.into();
        }
        if !a.grid.is_empty() {
            e.q_grid = a.grid.clone();
        }
    }
    cfg.validate().map_err(err)?;
    Ok(cfg)
}

fn experiment_of(cfg: &Config) -> &ExperimentConfig {
    match cfg.section() {
        Ok(Section::Experiment(e)) => e,
        Ok(Section::Padic(p)) => &p.experiment,
        _ => unreachable!("build_config checked the section"),
    }
}

/// CSV to stdout, or CSV files plus `summary.json` (and a timestamped
/// sidecar log) under `out`.
fn emit(out: Option<&Path>, summary: &Summary, extra_csv: &[(String, String)]) -> CliResult<()> {
    let tables: Vec<(String, String)> = summary
        .tables
        .iter()
        .map(|(name, rows)| Ok((format!("{name}.csv"), report::csv_string(rows).map_err(err)?)))
        .chain(extra_csv.iter().cloned().map(Ok))
        .collect::<CliResult<_>>()?;
    match out {
        None => {
            let mut stdout = io::stdout().lock();
            for (_, body) in &tables {
                stdout.write_all(body.as_bytes()).map_err(err)?;
            }
            for a in &summary.anomalies {
                eprintln!("anomaly: {a}");
            }
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for (name, body) in &tables {
                fs::write(dir.join(name), body).map_err(err)?;
            }
            fs::write(dir.join("summary.json"), summary.to_json()).map_err(err)?;
            let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            let log = format!(
                "finished_unix={stamp}\ncommand={}\nconfig_hash={}\nanomalies={}\n",
                summary.command,
                summary.config.hash(),
                summary.anomalies.len()
            );
            fs::write(dir.join("run.log"), log).map_err(err)?;
            println!("wrote {} table(s) and summary.json to {}", tables.len(), dir.display());
        }
    }
    Ok(())
}

fn union_summary(cfg: Config, workers: usize, command: &str) -> CliResult<Summary> {
    let e = experiment_of(&cfg).clone();
    let points = estimate_union_measure(&e, workers).map_err(err)?;
    let rows = report::rows_for(&e.family, &points).map_err(err)?;
    Ok(Summary {
        command: command.into(),
        seed: Some(e.seed),
        config: cfg,
        tables: vec![("union".into(), rows)],
        extra: json!({}),
        anomalies: Vec::new(),
    })
}

fn cmd_union(a: &RunArgs, workers: usize) -> CliResult<bool> {
    let summary = union_summary(build_config(a, false, true)?, workers, "union")?;
    emit(a.out.as_deref(), &summary, &[])?;
    Ok(true)
}

fn cmd_sums(a: &RunArgs) -> CliResult<bool> {
    let cfg = build_config(a, false, false)?;
    let e = experiment_of(&cfg);
    let grid = e.checkpoints();
    let kinds = [
        CriterionKind::Plain,
        CriterionKind::LogWeighted,
        CriterionKind::PhiLogWeighted,
        CriterionKind::PhiPlain,
    ];
    let sums = kinds
        .iter()
        .map(|&k| partial_sums(&e.family, SumCriterion::new(k, e.n).map_err(err)?, &grid).map_err(err))
        .collect::<CliResult<Vec<_>>>()?;
    let ratio = cond1_scan(&e.family, e.n, &grid).map_err(err)?;
    let mut out = String::from("q,plain,log_weighted,phi_log_weighted,phi_plain,cond1_ratio\n");
    for (i, q) in grid.iter().enumerate() {
        out.push_str(&format!(
            "{q},{},{},{},{},{}\n",
            fmt_float(sums[0][i]),
            fmt_float(sums[1][i]),
            fmt_float(sums[2][i]),
            fmt_float(sums[3][i]),
            ratio[i].ratio.map(fmt_float).unwrap_or_default()
        ));
    }
    let verdicts: serde_json::Map<String, serde_json::Value> = kinds
        .iter()
        .map(|&k| {
            let c = SumCriterion::new(k, e.n).map_err(err)?;
            Ok((format!("{k:?}").to_lowercase(), json!(e.family.classify(c))))
        })
        .collect::<CliResult<_>>()?;
    let summary = Summary {
        command: "sums".into(),
        seed: None,
        tables: Vec::new(),
        extra: json!({ "verdicts": verdicts }),
        anomalies: Vec::new(),
        config: cfg.clone(),
    };
    match a.out.as_deref() {
        None => {
            print!("{out}");
            for (k, v) in &verdicts {
                eprintln!("{k}: {}", v.as_str().unwrap_or_default());
            }
        }
        Some(_) => emit(a.out.as_deref(), &summary, &[("sums.csv".into(), out)])?,
    }
    Ok(true)
}

fn cmd_bc(a: &BcArgs, workers: usize) -> CliResult<bool> {
    let cfg = build_config(&a.run, false, a.pairs == PairArg::MonteCarlo || a.run.n.unwrap_or(1) > 1)?;
    let e = experiment_of(&cfg).clone();
    let pairs = match a.pairs {
        PairArg::Exact => PairChoice::Exact,
        PairArg::Independence => PairChoice::Independence,
        PairArg::MonteCarlo => PairChoice::MonteCarlo(SampledPairs {
            samples: a.pair_samples.unwrap_or(e.samples),
            seed: e.seed,
        }),
    };
    let ev = harness::run_bc_evidence(&e, pairs, workers).map_err(err)?;
    let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_default();
    let mut out = String::from("q,bound,bound_low,bound_high,union,union_provenance,union_ci_low,union_ci_high,sumcon_ratio\n");
    for (r, (_, s)) in ev.rows.iter().zip(&ev.sumcon) {
        let (lo, hi) = r.union.interval();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.q,
            opt(r.bound),
            opt(r.bound_low),
            opt(r.bound_high),
            fmt_float(r.union.value),
            r.union.provenance.label(),
            fmt_float(lo),
            fmt_float(hi),
            opt(*s)
        ));
    }
    let summary = Summary {
        command: "bc-bound".into(),
        seed: Some(e.seed),
        tables: Vec::new(),
        extra: json!({ "pairs": ev.pairs }),
        anomalies: ev.anomalies.clone(),
        config: cfg,
    };
    emit(a.run.out.as_deref(), &summary, &[("bc.csv".into(), out)])?;
    Ok(ev.anomalies.is_empty())
}

fn fiber_report(set: &ProductSet<BigRational>) -> CliResult<(String, bool)> {
    let rep = set.cross_fibering_check().map_err(err)?;
    let d = set.decompose();
    let measure = fmt_rational(rep.left.measure());
    let label = match rep.left.label() {
        "null" => "Null",
        "full" => "Full",
        _ => "Nontrivial",
    };
    let verdict = if rep.equivalence_holds { "equivalence holds" } else { "EQUIVALENCE FAILS" };
    let text = format!(
        "{label} / {verdict}\nmeasure: {measure}\nright_x: {}\nright_y: {}\n\
         X0={:?} X1={:?} Xnt={:?}\nY0={:?} Y1={:?} Ynt={:?}\n\
         (S∩M) via y: {}  via x: {}  μ(X0)ν(Y1): {}\n",
        fmt_rational(&rep.right_x),
        fmt_rational(&rep.right_y),
        d.x0,
        d.x1,
        d.xnt,
        d.y0,
        d.y1,
        d.ynt,
        fmt_rational(&d.via_y),
        fmt_rational(&d.via_x),
        fmt_rational(&d.rectangle),
    );
    Ok((text, rep.equivalence_holds && d.evaluations_agree()))
}

fn fiber_config(f: &FiberConfig) -> CliResult<ProductSet<BigRational>> {
    f.product_set().map_err(err)
}

fn cmd_fiber(a: &FiberArgs) -> CliResult<bool> {
    if let Some(path) = &a.matrix {
        let cfg = read_config(path)?;
        let Ok(Section::Fiber(f)) = cfg.section() else {
            return Err("matrix file must contain a fiber section".into());
        };
        let (text, ok) = fiber_report(&fiber_config(f)?)?;
        print!("{text}");
        return Ok(ok);
    }
    let k = a.exhaustive.unwrap_or(0);
    if !(1..=4).contains(&k) {
        return Err("--exhaustive needs 1 <= k <= 4".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut total = ExhaustiveSummary::default();
    let mut spaces: Vec<(DiscreteSpace<BigRational>, DiscreteSpace<BigRational>)> =
        vec![(DiscreteSpace::uniform(k).map_err(err)?, DiscreteSpace::uniform(k).map_err(err)?)];
    for _ in 1..a.weight_samples.max(1) {
        spaces.push((
            random_rational_weights(k, 20, true, &mut rng).map_err(err)?,
            random_rational_weights(k, 20, true, &mut rng).map_err(err)?,
        ));
    }
    for (x, y) in &spaces {
        let s = exhaustive_check(x, y).map_err(err)?;
        total = ExhaustiveSummary {
            subsets: total.subsets + s.subsets,
            trivial: total.trivial + s.trivial,
            equivalence_failures: total.equivalence_failures + s.equivalence_failures,
            fubini_failures: total.fubini_failures + s.fubini_failures,
            decomposition_mismatches: total.decomposition_mismatches + s.decomposition_mismatches,
            impossible_configurations: total.impossible_configurations + s.impossible_configurations,
        };
    }
    let per = 1u64 << (k * k);
    if total.all_hold() {
        println!("{per} subsets × {} weight samples: all equivalences hold", spaces.len());
    } else {
        println!(
            "{per} subsets × {} weight samples: {} equivalence failures, {} Fubini failures, {} decomposition mismatches, {} impossible configurations",
            spaces.len(),
            total.equivalence_failures,
            total.fubini_failures,
            total.decomposition_mismatches,
            total.impossible_configurations
        );
    }
    println!("trivial subsets: {} of {}", total.trivial, total.subsets);
    Ok(total.all_hold())
}

fn battery_summary(cfg: Config, b: &Battery, workers: usize) -> CliResult<Summary> {
    let outcomes = harness::run_dichotomy_scan(b, workers).map_err(err)?;
    let mut tables = Vec::new();
    let mut anomalies = Vec::new();
    let mut results = Vec::new();
    for o in &outcomes {
        tables.push((o.label.clone(), report::rows_for(&o.config.family, &o.checkpoints).map_err(err)?));
        if !o.meets_expectation {
            anomalies.push(format!("{}: expected {:?}, got {:?}", o.label, o.expect, o.trend));
        }
        results.push(json!({
            "label": o.label,
            "expect": o.expect,
            "trend": o.trend,
            "final_estimate": o.checkpoints.last().map(|c| round12(c.1.value)),
            "seed": o.config.seed,
        }));
    }
    Ok(Summary {
        command: "experiment".into(),
        seed: None,
        config: cfg,
        tables,
        extra: json!({ "battery": b.name, "threshold_hi": b.threshold_hi, "threshold_lo": b.threshold_lo, "entries": results }),
        anomalies,
    })
}

fn padic_csv(p: &PadicConfig, workers: usize) -> CliResult<(String, serde_json::Value)> {
    let rep = harness::run_padic(p, workers).map_err(err)?;
    let n = p.experiment.n as usize;
    let mut out = String::from("sample");
    for i in 1..=n {
        out.push_str(&format!(",alpha_{i}"));
    }
    for q in &rep.checkpoints {
        out.push_str(&format!(",count_q{q}"));
    }
    out.push('\n');
    for (i, r) in rep.rows.iter().enumerate() {
        out.push_str(&i.to_string());
        for x in &r.alpha {
            out.push(',');
            out.push_str(&fmt_float(*x));
        }
        for c in &r.counts {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    let sums: Vec<serde_json::Value> = rep
        .checkpoints
        .iter()
        .zip(&rep.partial_sums)
        .map(|(q, s)| json!({ "q": q, "partial_sum": round12(*s) }))
        .collect();
    Ok((out, json!({ "inequality": "non-strict", "partial_sums": sums })))
}

fn cmd_padic(a: &RunArgs, workers: usize) -> CliResult<bool> {
    let cfg = build_config(a, true, true)?;
    let Ok(Section::Padic(p)) = cfg.section() else { unreachable!() };
    let (csv, extra) = padic_csv(p, workers)?;
    let summary = Summary {
        command: "padic".into(),
        seed: Some(p.experiment.seed),
        tables: Vec::new(),
        extra,
        anomalies: Vec::new(),
        config: cfg.clone(),
    };
    emit(a.out.as_deref(), &summary, &[("padic.csv".into(), csv)])?;
    Ok(true)
}

fn cmd_experiment(a: &ExperimentArgs, workers: usize) -> CliResult<bool> {
    let mut cfg = read_config(&a.config)?;
    for e in cfg.experiments_mut() {
        if let Some(s) = a.seed {
            e.seed = s;
        }
        if let Some(s) = a.samples {
            e.samples = s;
        }
    }
    cfg.validate().map_err(err)?;
    let summary = match cfg.section().map_err(err)? {
        Section::Experiment(_) => union_summary(cfg.clone(), workers, "experiment")?,
        Section::Battery(b) => {
            let b = b.clone();
            battery_summary(cfg, &b, workers)?
        }
        Section::Padic(p) => {
            let (csv, extra) = padic_csv(p, workers)?;
            let summary = Summary {
                command: "experiment".into(),
                seed: Some(p.experiment.seed),
                tables: Vec::new(),
                extra,
                anomalies: Vec::new(),
                config: cfg.clone(),
            };
            emit(Some(&a.out), &summary, &[("padic.csv".into(), csv)])?;
            return Ok(true);
        }
        Section::Fiber(f) => {
            let (text, ok) = fiber_report(&fiber_config(f)?)?;
            let summary = Summary {
                command: "experiment".into(),
                seed: None,
                tables: Vec::new(),
                extra: json!({ "report": text }),
                anomalies: if ok { Vec::new() } else { vec!["cross fibering equivalence failed".into()] },
                config: cfg.clone(),
            };
            emit(Some(&a.out), &summary, &[])?;
            return Ok(ok);
        }
    };
    emit(Some(&a.out), &summary, &[])?;
    Ok(summary.anomalies.is_empty())
}
