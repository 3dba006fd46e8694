//! `betawolff`: command-line access to the lattice, coefficient, Riesz,
//! corona and comparison machinery.

mod config;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use betawolff::coeffs::CoeffTable;
use betawolff::measure::{self, DiscreteMeasure, Generator};
use betawolff::riesz::{riesz_energy, riesz_field_direct, riesz_field_tree};
use betawolff::stopping::{Stopper, StoppingConfig};
use betawolff::verify::{self, Battery, CheckParams, SuiteOptions, DEFAULT_GRID_RATIO};
use betawolff::{Lattice, LatticeParams};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use config::{ConfigError, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "betawolff", version, about = "Multiscale beta, density and Riesz diagnostics for weighted point clouds")]
struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker thread cap.
    #[arg(long, global = true, env = "BETAWOLFF_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a generated measure (CSV, or JSON for a .json path).
    Gen {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the cube lattice and check its invariants.
    Lattice {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-cube coefficient table as CSV.
    Coeffs {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        c_d: Option<f64>,
        /// Also compute the 9Q energies of every non-leaf cube.
        #[arg(long)]
        energies: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Riesz field at the atoms as CSV; the energy goes to stderr and --summary.
    Riesz {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        /// Truncation radius; principal value when absent.
        #[arg(long)]
        eps: Option<f64>,
        /// Use the lattice treecode with this opening parameter.
        #[arg(long)]
        theta_mac: Option<f64>,
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Corona decomposition as JSON.
    Corona {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        stop: StopArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Both sides of the beta/Riesz comparison.
    Verify {
        #[command(flatten)]
        measure: MeasureArgs,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[arg(long)]
        c_d: Option<f64>,
        #[arg(long)]
        grid_ratio: Option<f64>,
        #[arg(long)]
        runtimes: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Capacity lower bound from the Jones-Wolff potential.
    Capacity {
        #[command(flatten)]
        measure: MeasureArgs,
        #[arg(long)]
        grid_ratio: Option<f64>,
        /// Atom indices of E, e.g. `0,4,9` or `10..20`; all atoms by default.
        #[arg(long)]
        atoms: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a battery of generated measures.
    Suite {
        /// Battery JSON; the standard sweep when absent.
        #[arg(long)]
        battery: Option<PathBuf>,
        #[command(flatten)]
        lattice: LatticeArgs,
        #[command(flatten)]
        stop: StopArgs,
        #[arg(long)]
        grid_ratio: Option<f64>,
        #[arg(long)]
        runtimes: bool,
        #[arg(long)]
        plots_dir: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct GenArgs {
    /// segment, circle, lipschitz_graph or cantor4.
    #[arg(long)]
    kind: Option<String>,
    #[arg(long = "N")]
    count: Option<f64>,
    #[arg(long)]
    slope: Option<f64>,
    #[arg(long)]
    g: Option<f64>,
    #[arg(long)]
    ratio: Option<f64>,
}

#[derive(Args, Debug)]
struct MeasureArgs {
    /// Measure file (CSV rows `x_1..x_d,w`, or JSON).
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[command(flatten)]
    gen: GenArgs,
}

#[derive(Args, Debug)]
struct LatticeArgs {
    #[arg(long)]
    a0: Option<u32>,
    #[arg(long)]
    c0: Option<f64>,
}

#[derive(Args, Debug)]
struct StopArgs {
    #[arg(long)]
    k_lambda: Option<u32>,
    #[arg(long)]
    delta0: Option<f64>,
    #[arg(long)]
    m: Option<f64>,
    /// Corona exponent N.
    #[arg(long)]
    corona_n: Option<u32>,
    #[arg(long)]
    k_lambda_star: Option<f64>,
    #[arg(long)]
    c_d: Option<f64>,
}

enum Failure {
    Invalid(String),
    Io(String),
}

impl From<betawolff::Error> for Failure {
    fn from(e: betawolff::Error) -> Self {
        if e.is_io() {
            Failure::Io(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("I/O error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            ConfigError::Io(e) => Failure::Io(format!("{}: {e}", path.display())),
            ConfigError::Invalid(msg) => Failure::Invalid(msg),
        })?,
        None => RunConfig::default(),
    };
    if let Some(threads) = cli.threads.or(cfg.threads) {
        if threads == 0 {
            return Err(Failure::Invalid("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::Invalid(e.to_string()))?;
    }

    match cli.command {
        Command::Gen { gen, n, out } => {
            let n = n.or(cfg.n).unwrap_or(1);
            let mu = measure::generate(&generator(&gen, &cfg)?, n)?;
            let out = out.or(cfg.out.clone());
            let text = match &out {
                Some(p) if is_json(p) => pretty(&measure::to_json(&mu)),
                _ => measure::to_csv(&mu),
            };
            emit(out.as_deref(), &text)
        }
        Command::Lattice { measure, lattice, out } => {
            let mu = load(&measure, &cfg)?;
            let lat = Lattice::build(&mu, lattice_params(&lattice, &cfg))?;
            let inv = lat.check_invariants();
            let status = |v: usize| if v == 0 { json!("ok") } else { json!(v) };
            if !inv.ok() {
                eprintln!("warning: lattice invariant violations: {inv:?}");
            }
            let doc = json!({
                "params": lat.params(),
                "unit": lat.unit(),
                "depth": lat.depth(),
                "cubes": lat.len(),
                "checks": {
                    "partition": status(inv.partition),
                    "nesting": status(inv.nesting),
                    "mass_additivity": status(inv.mass_additivity),
                    "center_separation": status(inv.center_separation),
                    "radius_range": status(inv.radius_range),
                },
                "diagnostics": lat.diagnostics(),
                "tree": lat.to_json(),
            });
            emit(out.or(cfg.out.clone()).as_deref(), &pretty(&doc))
        }
        Command::Coeffs { measure, lattice, c_d, energies, out } => {
            let mu = load(&measure, &cfg)?;
            let lat = Lattice::build(&mu, lattice_params(&lattice, &cfg))?;
            let table = CoeffTable::build(&lat, c_d.or(cfg.c_d))?;
            let text = if energies || cfg.energies.unwrap_or(false) {
                let rows = (0..lat.len())
                    .into_par_iter()
                    .map(|q| if table.is_leaf(q) { Ok(None) } else { table.energies(q, 9.0).map(Some) })
                    .collect::<betawolff::Result<Vec<_>>>()?;
                table.to_csv(Some(&rows))
            } else {
                table.to_csv(None)
            };
            emit(out.or(cfg.out.clone()).as_deref(), &text)
        }
        Command::Riesz { measure, lattice, eps, theta_mac, summary, out } => {
            let mu = load(&measure, &cfg)?;
            let eps = eps.or(cfg.eps);
            let (field, mut doc) = match theta_mac.or(cfg.theta_mac) {
                Some(theta) => {
                    let lat = Lattice::build(&mu, lattice_params(&lattice, &cfg))?;
                    let tree = riesz_field_tree(&lat, eps, theta, false)?;
                    let doc = json!({"mode": "tree", "theta_mac": theta, "monopoles": tree.monopoles, "direct_pairs": tree.direct_pairs});
                    (tree.field, doc)
                }
                None => (riesz_field_direct(&mu, eps)?, json!({"mode": "direct"})),
            };
            doc["atoms"] = json!(mu.len());
            doc["epsilon"] = json!(eps);
            if eps.is_none() {
                let e = riesz_energy(&mu);
                eprintln!("riesz_energy = {}", betawolff::fmt_f64(e));
                doc["riesz_energy"] = json!(e);
            }
            emit(out.or(cfg.out.clone()).as_deref(), &field.to_csv())?;
            match summary {
                Some(path) => emit(Some(&path), &pretty(&doc)),
                None => Ok(()),
            }
        }
        Command::Corona { measure, lattice, stop, out } => {
            let mu = load(&measure, &cfg)?;
            let lat = Lattice::build(&mu, lattice_params(&lattice, &cfg))?;
            let table = CoeffTable::build(&lat, stop.c_d.or(cfg.c_d))?;
            let sc = stopping_config(&stop, &cfg);
            for w in sc.warnings(lat.a0(), mu.n()) {
                eprintln!("warning: {w}");
            }
            let stopper = Stopper::new(&table, sc)?;
            let corona = stopper.corona()?;
            let mut doc = corona.to_json();
            doc["thresholds"] = json!(stopper.thresholds());
            emit(out.or(cfg.out.clone()).as_deref(), &pretty(&doc))
        }
        Command::Verify { measure, lattice, c_d, grid_ratio, runtimes, out } => {
            let mu = load(&measure, &cfg)?;
            let params = CheckParams {
                lattice: lattice_params(&lattice, &cfg),
                grid_ratio: grid_ratio.or(cfg.grid_ratio).unwrap_or(DEFAULT_GRID_RATIO),
                c_d: c_d.or(cfg.c_d),
            };
            let report = verify::theorem_check(&mu, &params, runtimes || cfg.runtimes.unwrap_or(false))?;
            emit(out.or(cfg.out.clone()).as_deref(), &pretty(&json!(report)))
        }
        Command::Capacity { measure, grid_ratio, atoms, out } => {
            let mu = load(&measure, &cfg)?;
            let set = match atoms {
                Some(list) => parse_atoms(&list)?,
                None => (0..mu.len()).collect(),
            };
            let ratio = grid_ratio.or(cfg.grid_ratio).unwrap_or(DEFAULT_GRID_RATIO);
            let est = verify::capacity_estimate(&mu, &set, ratio)?;
            let mut doc = json!(est);
            doc["set_size"] = json!(set.len());
            emit(out.or(cfg.out.clone()).as_deref(), &pretty(&doc))
        }
        Command::Suite { battery, lattice, stop, grid_ratio, runtimes, plots_dir, out } => {
            let battery = match battery.or(cfg.battery.clone()) {
                Some(path) => {
                    let text = std::fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
                    serde_json::from_str::<Battery>(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
                }
                None => Battery::standard(),
            };
            let opts = SuiteOptions {
                check: CheckParams {
                    lattice: lattice_params(&lattice, &cfg),
                    grid_ratio: grid_ratio.or(cfg.grid_ratio).unwrap_or(DEFAULT_GRID_RATIO),
                    c_d: stop.c_d.or(cfg.c_d),
                },
                stopping: stopping_config(&stop, &cfg),
                runtimes: runtimes || cfg.runtimes.unwrap_or(false),
            };
            opts.stopping.validate()?;
            let report = verify::suite_report(&battery, &opts);
            for (i, e) in report.entries.iter().enumerate() {
                if let Some(msg) = &e.error {
                    eprintln!("warning: entry {i} ({}) failed: {msg}", e.generator);
                }
            }
            if let Some(dir) = plots_dir.or(cfg.plots_dir.clone()) {
                std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(format!("{}: {e}", dir.display())))?;
                for (name, body) in report.plot_series() {
                    emit(Some(&dir.join(name)), &body)?;
                }
            }
            emit(out.or(cfg.out.clone()).as_deref(), &report.to_json())
        }
    }
}

fn generator(gen: &GenArgs, cfg: &RunConfig) -> Outcome<Generator> {
    let kind = gen
        .kind
        .clone()
        .or(cfg.kind.clone())
        .ok_or_else(|| Failure::Invalid("a generator needs --kind".into()))?;
    let mut params = BTreeMap::new();
    for (key, flag, fallback) in [
        ("N", gen.count, cfg.count),
        ("slope", gen.slope, cfg.slope),
        ("g", gen.g, cfg.g),
        ("ratio", gen.ratio, cfg.ratio),
    ] {
        if let Some(v) = flag.or(fallback) {
            params.insert(key.to_string(), v);
        }
    }
    Ok(Generator::from_params(&kind, &params)?)
}

fn load(args: &MeasureArgs, cfg: &RunConfig) -> Outcome<DiscreteMeasure> {
    let n = args.n.or(cfg.n).unwrap_or(1);
    if let Some(path) = args.input.as_ref().or(cfg.input.as_ref()) {
        return Ok(measure::load_measure(path, n)?);
    }
    if args.gen.kind.is_some() || cfg.kind.is_some() {
        return Ok(measure::generate(&generator(&args.gen, cfg)?, n)?);
    }
    Err(Failure::Invalid("no measure given: use --in or --kind".into()))
}

fn lattice_params(args: &LatticeArgs, cfg: &RunConfig) -> LatticeParams {
    let d = LatticeParams::default();
    LatticeParams {
        a0: args.a0.or(cfg.a0).unwrap_or(d.a0),
        c0: args.c0.or(cfg.c0).unwrap_or(d.c0),
    }
}

fn stopping_config(args: &StopArgs, cfg: &RunConfig) -> StoppingConfig {
    let d = StoppingConfig::default();
    StoppingConfig {
        k_lambda: args.k_lambda.or(cfg.k_lambda).unwrap_or(d.k_lambda),
        delta0: args.delta0.or(cfg.delta0).unwrap_or(d.delta0),
        m: args.m.or(cfg.m).unwrap_or(d.m),
        big_n: args.corona_n.or(cfg.corona_n).unwrap_or(d.big_n),
        k_lambda_star: args.k_lambda_star.or(cfg.k_lambda_star),
    }
}

fn parse_atoms(list: &str) -> Outcome<Vec<usize>> {
    let bad = || Failure::Invalid(format!("cannot parse atom set {list:?}"));
    let mut out = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            out.extend(a..b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    s
}

fn emit(path: Option<&Path>, text: &str) -> Outcome<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|e| Failure::Io(e.to_string()))
        }
    }
}
