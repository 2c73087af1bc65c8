use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use dyncore::bundled;
use dyncore::credible_core::{
    allocate_initial, credible_core_check, one_deviation_check, theorem3_equivalence,
    CredibleOptions, Policy,
};
use dyncore::dynamics::{DiscountSpec, DynamicSpec, Grid};
use dyncore::fair_core::{
    efficient_fair_certificate_search, fair_core_membership, synthesize_fair_sequence,
    theorem1_certificate_search, ConvexCertificate,
};
use dyncore::game_core::{least_core, Allocation, Coalition};
use dyncore::reproduce::EXAMPLES;
use dyncore::spec_io::{aggregate_from_params, parse_coalition, GameFile, SpecFile};
use dyncore::stable_core::{
    induced_game, stable_core_membership, theorem2_experiment, StableOptions, StableReport,
};
use dyncore::{Error, Result};

#[derive(Parser)]
#[command(name = "dyncore", version, about = "Cores of dynamic cooperative games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Clone)]
struct Common {
    /// Spec file, or the name of a bundled example.
    #[arg(long, global = true)]
    spec: Option<String>,
    #[arg(long, global = true, default_value_t = 0.99)]
    delta: f64,
    #[arg(long, global = true, default_value_t = 0.05)]
    eps: f64,
    /// Refinement parameter for efficient certificates.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Grid resolution: `1/20`, `0.05` or a step count such as `20`.
    #[arg(long, global = true, default_value = "1/20")]
    grid: String,
    /// Number of periods; derived from precision 1e-4 when absent.
    #[arg(long, global = true)]
    horizon: Option<usize>,
    #[arg(long, global = true, default_value_t = 2)]
    depth: usize,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Least core of a game (or of the initial game of a dynamic spec).
    Leastcore,
    #[command(subcommand)]
    Faircore(FairCmd),
    #[command(subcommand)]
    Stablecore(StableCmd),
    #[command(subcommand)]
    Credible(CredibleCmd),
    /// Run every bundled example and report pass or fail.
    Reproduce {
        /// Only list the examples.
        #[arg(long)]
        list: bool,
        /// Run a single example.
        #[arg(long)]
        only: Option<String>,
    },
}

#[derive(Subcommand)]
enum FairCmd {
    /// Check the spec file's sequence against the fair core.
    Check,
    /// Search for a convexification certificate on the grid.
    Certificate {
        /// Largest number of split points.
        #[arg(long, default_value_t = 3)]
        k_max: usize,
    },
    /// Build a fair sequence from a certificate and check it.
    Synthesize {
        #[arg(long, default_value_t = 3)]
        k_max: usize,
    },
}

#[derive(Subcommand)]
enum StableCmd {
    /// Check the spec file's sequence against the stable core.
    Check {
        /// Also check the start, `x_*(S) ≥ v_*(S)`.
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        include_start: bool,
    },
    /// Induced limit game `u_x` of an aggregate-dependent dynamic.
    Uxgame {
        /// Allocation `x`; equal split when absent.
        #[arg(long, value_delimiter = ',')]
        x: Option<Vec<f64>>,
    },
    /// Compare the induced-game and stationary-sequence verdicts.
    Theorem2,
}

#[derive(Subcommand)]
enum CredibleCmd {
    /// Check every explored history for profitable deviations.
    Check {
        #[arg(long, default_value_t = 20)]
        h_check: usize,
    },
    /// Best one-period deviation of a coalition right after the first period.
    Onedev {
        /// Deviating coalition, e.g. `0,1`.
        #[arg(long)]
        coalition: String,
    },
    /// One-shot against multi-stage deviation verdicts.
    Theorem3 {
        #[arg(long, default_value_t = 3)]
        h_check: usize,
        #[arg(long, default_value_t = 3)]
        stages: usize,
    },
}

fn parse_grid(s: &str) -> Result<Grid> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| Error::input(format!("bad grid {s:?}")))?;
        let b: f64 = b.trim().parse().map_err(|_| Error::input(format!("bad grid {s:?}")))?;
        return Grid::from_resolution(a / b);
    }
    let r: f64 = s.parse().map_err(|_| Error::input(format!("bad grid {s:?}")))?;
    if r >= 1.0 {
        Grid::new(r.round() as u32)
    } else {
        Grid::from_resolution(r)
    }
}

impl Common {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::input(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.eps >= 0.0) {
            return Err(Error::input(format!("eps must be nonnegative, got {}", self.eps)));
        }
        Ok(())
    }

    fn file(&self) -> Result<SpecFile> {
        let s = self
            .spec
            .as_deref()
            .ok_or_else(|| Error::input("--spec is required"))?;
        let p = Path::new(s);
        if p.exists() {
            SpecFile::load(p)
        } else if let Some(text) = bundled::find(s.trim_end_matches(".json")) {
            SpecFile::parse(text)
        } else {
            Err(Error::input(format!("{s}: no such file or bundled example")))
        }
    }

    fn grid(&self) -> Result<Grid> {
        parse_grid(&self.grid)
    }

    fn discount(&self, spec: &DynamicSpec) -> Result<DiscountSpec> {
        let m = spec.initial().max_abs_worth().max(1e-12);
        match self.horizon {
            Some(h) => DiscountSpec::with_horizon(self.delta, h, m),
            None => DiscountSpec::new(self.delta, 1e-4, m),
        }
    }
}

/// A command result: JSON document plus an optional table for CSV output.
struct Output {
    json: Value,
    table: Option<(Vec<&'static str>, Vec<Vec<String>>)>,
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn policy_of(file: &SpecFile) -> Policy {
    file.policy().unwrap_or(Policy::Uniform)
}

fn stable_table(r: &StableReport) -> (Vec<&'static str>, Vec<Vec<String>>) {
    let rows = r
        .entries
        .iter()
        .map(|e| {
            vec![
                e.coalition.clone(),
                e.h.to_string(),
                e.share.to_string(),
                e.deviation_value.to_string(),
                e.slack.to_string(),
            ]
        })
        .collect();
    (vec!["coalition", "h", "share", "deviation_value", "slack"], rows)
}

fn certificate(c: &Common, spec: &DynamicSpec, k_max: usize) -> Result<Option<ConvexCertificate>> {
    let grid = c.grid()?;
    match c.gamma {
        Some(g) => efficient_fair_certificate_search(spec, g, grid, k_max),
        None => theorem1_certificate_search(spec, grid, k_max),
    }
}

fn run(cli: &Cli) -> Result<Output> {
    let c = &cli.common;
    c.validate()?;
    let plain = |json: Value| Output { json, table: None };
    Ok(match &cli.command {
        Command::Leastcore => {
            let g = c.file()?.game()?;
            let r = least_core(&g, 0.0)?;
            let rows = r
                .witness
                .payoffs()
                .iter()
                .enumerate()
                .map(|(i, x)| vec![i.to_string(), x.to_string(), r.epsilon_star.to_string()])
                .collect();
            Output {
                json: json!({
                    "epsilon_star": r.epsilon_star,
                    "core_empty": r.epsilon_star > 1e-9,
                    "witness": r.witness.payoffs(),
                    "binding": r.binding.iter().map(|t| t.label()).collect::<Vec<_>>(),
                }),
                table: Some((vec!["player", "payoff", "epsilon_star"], rows)),
            }
        }
        Command::Faircore(cmd) => {
            let file = c.file()?;
            let spec = file.dynamic()?;
            let ds = c.discount(&spec)?;
            match cmd {
                FairCmd::Check => {
                    let seq = file
                        .sequence()?
                        .ok_or_else(|| Error::input("spec has no sequence to check"))?;
                    let r = fair_core_membership(&spec, &seq, &ds, c.eps)?;
                    let rows = r
                        .entries
                        .iter()
                        .map(|e| {
                            vec![
                                e.coalition.clone(),
                                e.share.to_string(),
                                e.worth.to_string(),
                                e.slack.to_string(),
                            ]
                        })
                        .collect();
                    Output {
                        json: to_json(&r),
                        table: Some((vec!["coalition", "share", "worth", "slack"], rows)),
                    }
                }
                FairCmd::Certificate { k_max } => {
                    let cert = certificate(c, &spec, *k_max)?;
                    plain(json!({ "found": cert.is_some(), "certificate": to_json(&cert) }))
                }
                FairCmd::Synthesize { k_max } => {
                    let cert = certificate(c, &spec, *k_max)?
                        .ok_or_else(|| Error::SearchExhausted("no certificate on this grid".into()))?;
                    let seq = synthesize_fair_sequence(&cert, &ds)?;
                    let eps = 2.0 * (1.0 - ds.delta) * spec.initial().max_abs_worth() + c.eps;
                    let r = fair_core_membership(&spec, &seq, &ds, eps)?;
                    let rows: Vec<Vec<String>> = (1..=seq.stream().distinct_len())
                        .filter_map(|t| seq.at(t).map(|x| (t, x)))
                        .map(|(t, x)| {
                            let mut row = vec![t.to_string()];
                            row.extend(x.iter().map(|v| v.to_string()));
                            row
                        })
                        .collect();
                    Output {
                        json: json!({
                            "certificate": to_json(&cert),
                            "sequence": to_json(seq.stream()),
                            "eps": eps,
                            "fair": to_json(&r),
                        }),
                        table: Some((vec!["t", "allocation..."], rows)),
                    }
                }
            }
        }
        Command::Stablecore(cmd) => {
            let file = c.file()?;
            let spec = file.dynamic()?;
            let ds = c.discount(&spec)?;
            let grid = c.grid()?;
            match cmd {
                StableCmd::Check { include_start } => {
                    let seq = file
                        .sequence()?
                        .ok_or_else(|| Error::input("spec has no sequence to check"))?;
                    let opts = StableOptions {
                        grid,
                        include_start: *include_start,
                        ..Default::default()
                    };
                    let r = stable_core_membership(&spec, &seq, &ds, c.eps, opts)?;
                    Output {
                        table: Some(stable_table(&r)),
                        json: to_json(&r),
                    }
                }
                StableCmd::Uxgame { x } => {
                    let ad = aggregate(&file)?;
                    let n = ad.players();
                    let x = x.clone().unwrap_or_else(|| vec![ad.scale() / n as f64; n]);
                    let alloc = Allocation::new(Coalition::grand(n), x, spec.floor())?;
                    let u = induced_game(&ad, &alloc)?;
                    let lc = least_core(&u.game, spec.floor())?;
                    plain(json!({
                        "x": alloc.payoffs(),
                        "base": u.base.payoffs(),
                        "game": to_json(&GameFile::from_game(&u.game)),
                        "epsilon_star": lc.epsilon_star,
                        "eps_core_nonempty": lc.epsilon_star <= c.eps + 1e-9,
                    }))
                }
                StableCmd::Theorem2 => {
                    let ad = aggregate(&file)?;
                    plain(to_json(&theorem2_experiment(&ad, &ds, c.eps, grid)?))
                }
            }
        }
        Command::Credible(cmd) => {
            let file = c.file()?;
            let spec = file.dynamic()?;
            let ds = c.discount(&spec)?;
            let policy = policy_of(&file);
            let grid = c.grid()?;
            match cmd {
                CredibleCmd::Check { h_check } => {
                    let opts = CredibleOptions {
                        grid,
                        h_check: *h_check,
                        ..Default::default()
                    };
                    let r = credible_core_check(&spec, &policy, &ds, c.eps, c.depth, opts)?;
                    plain(json!({ "policy": policy.name(), "report": to_json(&r) }))
                }
                CredibleCmd::Onedev { coalition } => {
                    let s = parse_coalition(coalition, spec.players())?;
                    let state = allocate_initial(&spec, &policy)?;
                    let r = one_deviation_check(&spec, &policy, &state, s, &ds, c.eps, grid)?;
                    plain(json!({ "policy": policy.name(), "report": to_json(&r) }))
                }
                CredibleCmd::Theorem3 { h_check, stages } => {
                    let opts = CredibleOptions {
                        grid,
                        h_check: *h_check,
                        stages: *stages,
                        ..Default::default()
                    };
                    let r = theorem3_equivalence(&spec, &policy, &ds, c.eps, c.depth, opts)?;
                    plain(json!({ "policy": policy.name(), "seed": c.seed, "report": to_json(&r) }))
                }
            }
        }
        Command::Reproduce { list, only } => {
            if *list {
                let items: Vec<Value> = EXAMPLES
                    .iter()
                    .map(|e| json!({ "name": e.name, "about": e.about }))
                    .collect();
                for e in EXAMPLES {
                    eprintln!("{:<18} {}", e.name, e.about);
                }
                let rows = EXAMPLES
                    .iter()
                    .map(|e| vec![e.name.to_string(), format!("\"{}\"", e.about)])
                    .collect();
                return Ok(Output {
                    json: Value::Array(items),
                    table: Some((vec!["name", "about"], rows)),
                });
            }
            let mut outcomes = Vec::new();
            let mut failed = Vec::new();
            for e in EXAMPLES.iter().filter(|e| only.as_deref().map_or(true, |o| o == e.name)) {
                let o = e.run()?;
                let detail: Vec<String> = o.values.iter().map(|(k, v)| format!("{k}={v:.6}")).collect();
                eprintln!(
                    "{} {:<18} {}",
                    if o.passed { "PASS" } else { "FAIL" },
                    o.name,
                    detail.join(" ")
                );
                if !o.passed {
                    failed.push(o.name);
                }
                outcomes.push(o);
            }
            if outcomes.is_empty() {
                return Err(Error::input("no example matched"));
            }
            if !failed.is_empty() {
                return Err(Error::Hypothesis(format!("examples failed: {}", failed.join(", "))));
            }
            plain(to_json(&outcomes))
        }
    })
}

fn aggregate(file: &SpecFile) -> Result<dyncore::stable_core::AggregateDynamic> {
    match file {
        SpecFile::Dynamic(d) if d.family == "aggregate" => aggregate_from_params(&d.params),
        _ => Err(Error::input("this command needs an aggregate-family spec")),
    }
}

fn render(out: &Output, format: Format) -> String {
    match (format, &out.table) {
        (Format::Csv, Some((header, rows))) => {
            let mut s = header.join(",");
            s.push('\n');
            for r in rows {
                let _ = writeln!(s, "{}", r.join(","));
            }
            s
        }
        _ => {
            let mut s = serde_json::to_string_pretty(&out.json).unwrap_or_default();
            s.push('\n');
            s
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("DYNCORE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(&cli) {
        Ok(out) => {
            let text = render(&out, cli.common.format);
            match &cli.common.out {
                Some(p) => {
                    if let Err(e) = std::fs::write(p, text) {
                        eprintln!("error: {}: {e}", p.display());
                        return ExitCode::from(2);
                    }
                }
                None => print!("{text}"),
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
