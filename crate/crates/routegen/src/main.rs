//! Command-line front end. Exit codes: 0 success, 1 usage or
//! configuration error, 2 solver stall.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use routegen::bench::{self, BenchConfig, Method};
use routegen::greedy::{self, Backend, GreedyConfig, GreedyError, IterationRecord, Selection};
use routegen::grid::{build_time_grid, GridConfig};
use routegen::instance::sample_customers;
use routegen::model::{
    build_constraints, compile_qubo, enumerate_variables, export_qubo_text, varmap_csv, Penalties,
};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "routegen",
    version,
    about = "Fleet-sizing solver for vehicle routing with time windows",
    long_about = "Minimizes the number of vehicles needed to serve customers inside their time \
                  windows. Routes are grown greedily from annealing samples of a penalty model; \
                  an exact branch-and-bound backend is available for small systems."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one sampled sub-instance and write solution.json + trace.jsonl
    Solve(SolveArgs),
    /// Run a benchmark battery and write rows.csv, summary.csv, report.md
    Bench(BenchArgs),
    /// Write the enumerated model as qubo.txt + varmap.csv
    ExportQubo(ExportArgs),
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SamplerKind {
    Sa,
    Exact,
}

#[derive(Args)]
struct SolveArgs {
    /// Solomon file path, or bundled:<running_example|narrow100|wide100>
    #[arg(long, default_value = "bundled:running_example")]
    instance: String,
    /// Number of customers to sample from the instance
    #[arg(long, default_value_t = 2)]
    n: usize,
    /// Seed for both customer sampling and the solver
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = SamplerKind::Sa)]
    sampler: SamplerKind,
    /// Selection parameter: kept fraction (sa) or confidence threshold (exact)
    #[arg(long)]
    theta: Option<f64>,
    /// Reads per sampler call
    #[arg(long)]
    reads: Option<usize>,
    /// Annealing sweeps per read
    #[arg(long)]
    sweeps: Option<usize>,
    /// Commit only the single longest path per iteration
    #[arg(long)]
    single_path: bool,
    /// Output directory; ROUTEGEN_OUT_DIR overrides the default "."
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON config file; omitted fields take documented defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance source override
    #[arg(long)]
    instance: Option<String>,
    /// Sizes: comma list "5,6,7" or inclusive range "5..10"
    #[arg(long)]
    ns: Option<String>,
    /// Seeds: comma list "0,1,2" or inclusive range "0..9"
    #[arg(long)]
    seeds: Option<String>,
    /// Comma list of greedy+exact, greedy+sa, filtering+sa
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    reads: Option<usize>,
    #[arg(long)]
    sweeps: Option<usize>,
    #[arg(long)]
    theta: Option<f64>,
    /// Zero the wall-clock columns so reruns are byte-identical
    #[arg(long)]
    no_timing: bool,
    /// Compute gaps against best-found instead of the exact optimum
    #[arg(long)]
    no_oracle: bool,
    /// Oracle result cache directory
    #[arg(long)]
    cache_dir: Option<String>,
    /// Output directory; ROUTEGEN_OUT_DIR overrides the default "."
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    /// Solomon file path, or bundled:<running_example|narrow100|wide100>
    #[arg(long, default_value = "bundled:running_example")]
    instance: String,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; ROUTEGEN_OUT_DIR overrides the default "."
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

const OK: u8 = 0;
const USAGE: u8 = 1;
const STALL: u8 = 2;

fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("ROUTEGEN_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn fail(message: impl std::fmt::Display) -> u8 {
    eprintln!("error: {message}");
    USAGE
}

fn records_jsonl(records: &[IterationRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("record serializes"))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

fn cmd_solve(a: SolveArgs) -> u8 {
    let out_dir = resolve_out_dir(a.out_dir);
    let instance = match bench::load_instance(&a.instance) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let sub = match sample_customers(&instance, a.n, a.seed) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let grid = match build_time_grid(&sub, &GridConfig::default()) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let vars = match enumerate_variables(&sub, &grid) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };

    let mut cfg = match a.sampler {
        SamplerKind::Sa => GreedyConfig::sa(),
        SamplerKind::Exact => GreedyConfig::exact(),
    };
    if let Some(t) = a.theta {
        cfg.selection = match cfg.backend {
            Backend::Sa => Selection::Fraction(t),
            Backend::Exact => Selection::Threshold(t),
        };
    }
    if let Some(m) = a.reads {
        cfg.reads = m;
    }
    if let Some(s) = a.sweeps {
        cfg.sweeps = s;
    }
    if a.single_path {
        cfg.extraction = routegen::dagpath::ExtractionStrategy::SingleLongestPath;
    }

    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(format!("cannot create {}: {e}", out_dir.display()));
    }
    match greedy::run(&sub, &grid, vars, &cfg, a.seed) {
        Ok(sol) => {
            let solution_path = out_dir.join("solution.json");
            let trace_path = out_dir.join("trace.jsonl");
            if let Err(e) = std::fs::write(&solution_path, sol.to_json()) {
                return fail(e);
            }
            if let Err(e) = std::fs::write(&trace_path, sol.trace_jsonl()) {
                return fail(e);
            }
            println!(
                "objective {} ({} route{}), feasible {}, {} iterations",
                sol.objective,
                sol.routes.len(),
                if sol.routes.len() == 1 { "" } else { "s" },
                sol.feasible,
                sol.trace.len()
            );
            println!("wrote {} and {}", solution_path.display(), trace_path.display());
            if sol.feasible {
                OK
            } else {
                eprintln!("error: solution failed validation");
                STALL
            }
        }
        Err(GreedyError::BadConfig(m)) => fail(m),
        Err(GreedyError::Stall { reason, active, trace }) => {
            let trace_path = out_dir.join("trace.jsonl");
            let _ = std::fs::write(&trace_path, records_jsonl(&trace));
            eprintln!("error: stalled: {reason} ({active} variables active); trace at {}", trace_path.display());
            STALL
        }
        Err(e) => {
            eprintln!("error: {e}");
            STALL
        }
    }
}

/// "5,6,7" or inclusive "5..10".
fn parse_list(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| format!("bad range start {lo:?}"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| format!("bad range end {hi:?}"))?;
        if lo > hi {
            return Err(format!("empty range {text:?}"));
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|t| t.trim().parse().map_err(|_| format!("bad number {t:?}")))
        .collect()
}

fn cmd_bench(a: BenchArgs) -> u8 {
    let out_dir = resolve_out_dir(a.out_dir);
    let mut cfg = match &a.config {
        Some(path) => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => return fail(format!("cannot read {}: {e}", path.display())),
            };
            match serde_json::from_str::<BenchConfig>(&text) {
                Ok(c) => c,
                Err(e) => return fail(format!("{}: {e}", path.display())),
            }
        }
        None => BenchConfig::default(),
    };
    if let Some(i) = a.instance {
        cfg.instance = i;
    }
    if let Some(ns) = &a.ns {
        match parse_list(ns) {
            Ok(v) => cfg.ns = v.into_iter().map(|x| x as usize).collect(),
            Err(e) => return fail(e),
        }
    }
    if let Some(seeds) = &a.seeds {
        match parse_list(seeds) {
            Ok(v) => cfg.seeds = v,
            Err(e) => return fail(e),
        }
    }
    if let Some(methods) = &a.methods {
        let parsed: Result<Vec<Method>, String> =
            methods.split(',').map(|t| t.trim().parse()).collect();
        match parsed {
            Ok(v) => cfg.methods = v,
            Err(e) => return fail(e),
        }
    }
    if let Some(m) = a.reads {
        cfg.reads = m;
    }
    if let Some(s) = a.sweeps {
        cfg.sweeps = s;
    }
    if a.theta.is_some() {
        cfg.theta = a.theta;
    }
    if a.no_timing {
        cfg.timing = false;
    }
    if a.no_oracle {
        cfg.use_oracle = false;
    }
    if a.cache_dir.is_some() {
        cfg.cache_dir = a.cache_dir;
    }

    let rows = match bench::run_battery(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if let Err(e) = bench::write_outputs(&cfg, &rows, &out_dir) {
        return fail(e);
    }
    let ran = rows.iter().filter(|r| !r.skipped).count();
    let feasible = rows.iter().filter(|r| r.feasible).count();
    println!(
        "{} rows ({} executed, {} feasible); outputs in {}",
        rows.len(),
        ran,
        feasible,
        out_dir.display()
    );
    OK
}

fn cmd_export(a: ExportArgs) -> u8 {
    let out_dir = resolve_out_dir(a.out_dir);
    let instance = match bench::load_instance(&a.instance) {
        Ok(i) => i,
        Err(e) => return fail(e),
    };
    let sub = match sample_customers(&instance, a.n, a.seed) {
        Ok(s) => s,
        Err(e) => return fail(e),
    };
    let grid = match build_time_grid(&sub, &GridConfig::default()) {
        Ok(g) => g,
        Err(e) => return fail(e),
    };
    let vars = match enumerate_variables(&sub, &grid) {
        Ok(v) => v,
        Err(e) => return fail(e),
    };
    if vars.active_count() == 0 {
        return fail("model has no active variables; instance is over-constrained");
    }
    let cons = build_constraints(&vars, &sub);
    let (qubo, _dense) = match compile_qubo(&cons, &vars, Penalties::for_fleet_bound(sub.n)) {
        Ok(q) => q,
        Err(e) => return fail(e),
    };

    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return fail(format!("cannot create {}: {e}", out_dir.display()));
    }
    let qubo_path = out_dir.join("qubo.txt");
    let varmap_path = out_dir.join("varmap.csv");
    if let Err(e) = std::fs::write(&qubo_path, export_qubo_text(&qubo)) {
        return fail(e);
    }
    if let Err(e) = std::fs::write(&varmap_path, varmap_csv(&vars, &grid)) {
        return fail(e);
    }
    println!(
        "{} active variables; wrote {} and {}",
        qubo.n,
        qubo_path.display(),
        varmap_path.display()
    );
    OK
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => OK,
                _ => USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    ExitCode::from(match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Bench(a) => cmd_bench(a),
        Command::ExportQubo(a) => cmd_export(a),
    })
}
