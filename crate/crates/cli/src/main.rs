//! Command-line front end. Exit codes: 0 on success, 2 on a configuration
//! error, 3 on a solver or simulation error.

mod selftest;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wiplab::decomp::{
    primary_decomposition_with, DecompOptions, FlowDecomposition, Function, GridFunction,
    TransferOperator,
};
use wiplab::dynsys::{InducedMap, MapKind};
use wiplab::otmetrics::{
    prokhorov_from_costs, wasserstein1_from_costs, CostMatrix, DistanceRecord,
};
use wiplab::pathspace::EmpiricalPathMeasure;
use wiplab::ratelab::{
    prepare, run_rate_experiment, sample_replicate, write_outputs, ComponentSpec, ExperimentConfig,
    ObservableSpec, Process, SystemSpec,
};
use wiplab::Observable;

#[derive(Parser)]
#[command(
    name = "wiplab",
    version,
    about = "Rates of convergence in the weak invariance principle, measured"
)]
struct Cli {
    /// Experiment configuration (TOML). Without it, the doubling map with
    /// v(x) = cos(4πx) and default settings is used.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed and any explicit seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Martingale-coboundary decomposition of the configured observable, as JSON.
    Decompose {
        /// Grid cells for tabulated decompositions.
        #[arg(long)]
        cells: Option<usize>,
    },
    /// Sample M process paths at one n, plus M Brownian paths, as CSV files.
    Simulate {
        #[arg(long)]
        n: usize,
        /// Number of paths (defaults to the configured M).
        #[arg(long)]
        count: Option<usize>,
    },
    /// W1 and Prokhorov distance between two directories of path CSVs.
    Distance { left: PathBuf, right: PathBuf },
    /// Full rate experiment: distances over the n-grid, fits and report.
    Rates,
    /// Quick oracle checks of the decomposition and transport solvers.
    Selftest,
}

enum Failure {
    Config(String),
    Solver(String),
}

impl From<wiplab::ratelab::RatelabError> for Failure {
    fn from(e: wiplab::ratelab::RatelabError) -> Self {
        if e.is_config() {
            Failure::Config(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn solver<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Solver(e.to_string())
}

fn default_config() -> ExperimentConfig {
    ExperimentConfig::new(
        "doubling-cos4pi",
        SystemSpec::Doubling,
        ObservableSpec {
            components: vec![ComponentSpec {
                cos: vec![(2, 1.0)],
                sin: vec![],
            }],
        },
    )
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => default_config(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.seeds = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(text: &str, out: Option<&Path>, file: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(solver)?;
            let path = dir.join(file);
            fs::write(&path, text).map_err(solver)?;
            println!("{}", path.display());
        }
        // A closed pipe (e.g. `| head`) is not an error worth a panic.
        None => {
            let _ = writeln!(std::io::stdout(), "{text}");
        }
    }
    Ok(())
}

fn decompose(cli: &Cli, cells: Option<usize>) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let opts = DecompOptions {
        cells: cells.unwrap_or(cfg.cells),
        ..DecompOptions::default()
    };
    let polys = cfg.observable.polys();
    let json = match cfg.system.build()? {
        Process::Map(sys) if sys.kind() == MapKind::Doubling => {
            let d = primary_decomposition_with(
                &TransferOperator::exact_doubling(),
                &Function::Trig(polys),
                &opts,
            )
            .map_err(solver)?;
            d.to_json().map_err(solver)?
        }
        Process::Map(sys) => {
            // The LSV map itself is not decomposed; its first-return map to
            // (1/2, 1] is, with the observable restricted there.
            let op =
                TransferOperator::induced_lsv(InducedMap::new(sys).map_err(solver)?, opts.cells)
                    .map_err(solver)?;
            let v = GridFunction::from_fn(0.5, 1.0, opts.cells, polys.len(), |x, out| {
                for (o, p) in out.iter_mut().zip(&polys) {
                    *o = p.eval(x);
                }
            })
            .map_err(solver)?;
            let d = primary_decomposition_with(
                &op,
                &Function::Grid(v),
                &DecompOptions {
                    mean_tol: None,
                    ..opts
                },
            )
            .map_err(solver)?;
            d.to_json().map_err(solver)?
        }
        Process::Flow(flow) => {
            let prep = prepare(&cfg)?;
            let v = wiplab::suspension::FlowObservable::height_independent(polys.len(), {
                let obs = prep.observable.clone();
                move |x, out| obs.eval_into(x, out)
            });
            let d = FlowDecomposition::new(
                &flow,
                &v,
                &DecompOptions {
                    mean_tol: None,
                    ..opts
                },
            )
            .map_err(solver)?;
            let mut record =
                serde_json::to_value(d.base().record().map_err(solver)?).map_err(solver)?;
            record["flow_sigma"] = serde_json::to_value(d.flow_sigma()).map_err(solver)?;
            serde_json::to_string_pretty(&record).map_err(solver)?
        }
    };
    emit(&json, cli.out.as_deref(), "decomposition.json")
}

fn simulate(cli: &Cli, n: usize, count: Option<usize>) -> Result<(), Failure> {
    let mut cfg = load_config(cli)?;
    let Some(out) = cli.out.clone() else {
        return Err(Failure::Config("simulate needs --out".into()));
    };
    cfg.n_grid = vec![n];
    if let Some(c) = count {
        cfg.m = c;
    }
    cfg.validate()?;
    let prep = prepare(&cfg)?;
    let seed = cfg.replicate_seeds()[0];
    let sample = sample_replicate(&prep, &cfg, seed)?;
    let process_dir = out.join("process");
    let brownian_dir = out.join("brownian");
    sample.process[0].save_dir(&process_dir).map_err(solver)?;
    sample.brownian.save_dir(&brownian_dir).map_err(solver)?;
    println!("{}\n{}", process_dir.display(), brownian_dir.display());
    Ok(())
}

fn distance(cli: &Cli, left: &Path, right: &Path) -> Result<(), Failure> {
    let load = |p: &Path| {
        EmpiricalPathMeasure::load_dir(p)
            .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))
    };
    let (a, b) = (load(left)?, load(right)?);
    let cost = CostMatrix::from_measures(&a, &b).map_err(|e| Failure::Config(e.to_string()))?;
    let d = a.paths()[0].len() - 1;
    let record = DistanceRecord {
        n: None,
        m: a.len(),
        d,
        w1: Some(wasserstein1_from_costs(&cost)),
        pi: Some(prokhorov_from_costs(&cost)),
        seed: cli.seed,
    };
    emit(
        &serde_json::to_string_pretty(&record).map_err(solver)?,
        cli.out.as_deref(),
        "distance.json",
    )
}

fn rates(cli: &Cli) -> Result<(), Failure> {
    let cfg = load_config(cli)?;
    let report = run_rate_experiment(&cfg)?;
    let root = cli.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let dir = write_outputs(&report, &cfg, &root)?;
    for m in &report.metrics {
        let slope = m.fit.map_or("n/a".to_owned(), |f| {
            format!("{:.4} ± {:.4}", f.slope, f.stderr)
        });
        let theory = m
            .theory
            .as_ref()
            .map_or("n/a".to_owned(), |t| format!("-{:.4}", t.exponent));
        println!(
            "{}: fitted slope {slope}, theoretical exponent {theory}",
            m.metric.name()
        );
    }
    println!("{}", dir.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Failure::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(solver)?;
    }
    match &cli.command {
        Command::Decompose { cells } => decompose(cli, *cells),
        Command::Simulate { n, count } => simulate(cli, *n, *count),
        Command::Distance { left, right } => distance(cli, left, right),
        Command::Rates => rates(cli),
        Command::Selftest => {
            if selftest::run() {
                Ok(())
            } else {
                Err(Failure::Solver("self-test failed".into()))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
