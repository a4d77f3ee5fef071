//! Seeded benchmark batteries: a Cartesian product of sizes, seeds and
//! methods over one instance, with per-run rows, feasible-only aggregates,
//! and CSV/markdown emission. Identical configs produce identical bytes
//! when timing capture is off.

use crate::fixtures;
use crate::greedy::{self, Backend, GreedyConfig, GreedyError, Selection};
use crate::grid::{build_time_grid, GridConfig, TimeGrid};
use crate::instance::{parse_solomon, sample_customers, Instance, SubInstance};
use crate::model::Penalties;
use crate::oracle::{self, OracleCache, OracleError};
use crate::samplers::SamplerError;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "greedy+exact")]
    GreedyExact,
    #[serde(rename = "greedy+sa")]
    GreedySa,
    #[serde(rename = "filtering+sa")]
    FilteringSa,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::GreedyExact => "greedy+exact",
            Method::GreedySa => "greedy+sa",
            Method::FilteringSa => "filtering+sa",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "greedy+exact" => Ok(Method::GreedyExact),
            "greedy+sa" => Ok(Method::GreedySa),
            "filtering+sa" => Ok(Method::FilteringSa),
            other => Err(format!(
                "unknown method {other:?}; expected greedy+exact, greedy+sa, or filtering+sa"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    /// Instance source: `bundled:<name>` or a file path.
    pub instance: String,
    pub ns: Vec<usize>,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    /// Overrides each method's default selection parameter.
    pub theta: Option<f64>,
    /// Annealing reads per sampler call; also the filtering sample count.
    pub reads: usize,
    /// Annealing sweeps per read.
    pub sweeps: usize,
    pub penalties: Option<Penalties>,
    pub exact_limit: usize,
    pub fallback_limit: usize,
    /// When false, gaps are computed against the best objective found
    /// across methods instead of the exact optimum.
    pub use_oracle: bool,
    /// When false, wall-clock fields are written as zero so reruns are
    /// byte-identical.
    pub timing: bool,
    /// Oracle result cache directory; `None` recomputes every time.
    pub cache_dir: Option<String>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            instance: "bundled:narrow100".into(),
            ns: (5..=10).collect(),
            seeds: (0..10).collect(),
            methods: vec![Method::GreedyExact, Method::GreedySa, Method::FilteringSa],
            theta: None,
            reads: 256,
            sweeps: 128,
            penalties: None,
            exact_limit: 600,
            fallback_limit: 40,
            use_oracle: true,
            timing: true,
            cache_dir: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub seed: u64,
    pub method: Method,
    pub objective: Option<usize>,
    pub optimum: Option<usize>,
    pub relative_gap: Option<f64>,
    pub feasible: bool,
    /// The sub-instance could not be modeled; the row is excluded from
    /// aggregates.
    pub skipped: bool,
    pub wall_ms: u64,
    pub iterations: usize,
    pub note: String,
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot load instance {path}: {message}")]
    Instance { path: String, message: String },
    #[error("configuration invalid: {0}")]
    Config(String),
    #[error(
        "oracle refused N={n}, seed={seed}: {active} active variables exceed the limit {limit}; \
         rerun this tier with use_oracle disabled"
    )]
    OracleLimit { n: usize, seed: u64, active: usize, limit: usize },
    #[error("oracle failed for N={n}, seed={seed}: {source}")]
    Oracle { n: usize, seed: u64, source: OracleError },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Resolves `bundled:<name>` aliases or reads a Solomon file from disk.
pub fn load_instance(spec: &str) -> Result<Instance, BenchError> {
    let text = match spec {
        "bundled:running_example" => fixtures::RUNNING_EXAMPLE.to_string(),
        "bundled:narrow100" => fixtures::NARROW100.to_string(),
        "bundled:wide100" => fixtures::WIDE100.to_string(),
        path => std::fs::read_to_string(path).map_err(|e| BenchError::Instance {
            path: path.to_string(),
            message: e.to_string(),
        })?,
    };
    parse_solomon(&text).map_err(|e| BenchError::Instance {
        path: spec.to_string(),
        message: e.to_string(),
    })
}

fn greedy_config(method: Method, cfg: &BenchConfig) -> Result<GreedyConfig, BenchError> {
    let mut gc = match method {
        Method::GreedyExact => GreedyConfig::exact(),
        Method::GreedySa => GreedyConfig::sa(),
        Method::FilteringSa => unreachable!("filtering does not run the loop"),
    };
    if let Some(t) = cfg.theta {
        gc.selection = match gc.backend {
            Backend::Sa => Selection::Fraction(t),
            Backend::Exact => Selection::Threshold(t),
        };
        let ok = match gc.selection {
            Selection::Fraction(t) => t > 0.0 && t < 1.0,
            Selection::Threshold(t) => t > 0.0 && t <= 1.0,
        };
        if !ok {
            return Err(BenchError::Config(format!("theta {t} out of range for {method}")));
        }
    }
    if gc.backend == Backend::Sa {
        gc.reads = cfg.reads;
        gc.sweeps = cfg.sweeps;
    }
    gc.penalties = cfg.penalties;
    gc.exact_limit = cfg.exact_limit;
    gc.fallback_limit = cfg.fallback_limit;
    Ok(gc)
}

fn modeled(sub: &SubInstance) -> Result<TimeGrid, String> {
    build_time_grid(sub, &GridConfig::default()).map_err(|e| e.to_string())
}

fn execute(
    method: Method,
    sub: &SubInstance,
    grid: &TimeGrid,
    cfg: &BenchConfig,
    seed: u64,
) -> Result<BenchRow, BenchError> {
    let mut row = BenchRow {
        instance: sub.name.clone(),
        n: sub.n,
        seed,
        method,
        objective: None,
        optimum: None,
        relative_gap: None,
        feasible: false,
        skipped: false,
        wall_ms: 0,
        iterations: 0,
        note: String::new(),
    };
    let started = Instant::now();
    match method {
        Method::GreedyExact | Method::GreedySa => {
            let gc = greedy_config(method, cfg)?;
            let ran = crate::model::enumerate_variables(sub, grid)
                .map_err(GreedyError::from)
                .and_then(|vars| greedy::run(sub, grid, vars, &gc, seed));
            match ran {
                Ok(sol) => {
                    row.objective = Some(sol.objective);
                    row.feasible = sol.feasible;
                    row.iterations = sol.trace.len();
                }
                Err(GreedyError::BadConfig(m)) => return Err(BenchError::Config(m)),
                Err(GreedyError::Stall { reason, trace, .. }) => {
                    row.iterations = trace.len();
                    row.note = format!("stall: {reason}");
                }
                Err(e) => row.note = e.to_string(),
            }
        }
        Method::FilteringSa => {
            match oracle::filtering_baseline(sub, grid, cfg.reads, cfg.sweeps, seed) {
                Ok(out) => {
                    row.objective = out.objective;
                    row.feasible = out.feasible;
                    row.iterations = 1;
                    if !out.feasible {
                        row.note = format!("no feasible sample among {}", out.reads);
                    }
                }
                Err(e) => row.note = e.to_string(),
            }
        }
    }
    if cfg.timing {
        row.wall_ms = started.elapsed().as_millis() as u64;
    }
    row.note = row.note.replace([',', '\n'], ";");
    Ok(row)
}

/// Runs the full (N, seed, method) product. Rows come back sorted by
/// `(n, seed, method)`; gaps are computed against the oracle optimum, or
/// against the best objective found per `(n, seed)` when the oracle is
/// disabled. Rows whose sub-instance cannot be modeled are flagged
/// `skipped` and left out of aggregates.
pub fn run_battery(cfg: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    if cfg.ns.is_empty() || cfg.seeds.is_empty() || cfg.methods.is_empty() {
        return Err(BenchError::Config("ns, seeds, and methods must be nonempty".into()));
    }
    let instance = load_instance(&cfg.instance)?;

    // One sub-instance and grid per (n, seed); grid failures flag the cell.
    let mut cells: BTreeMap<(usize, u64), Result<(SubInstance, TimeGrid), String>> = BTreeMap::new();
    for &n in &cfg.ns {
        for &seed in &cfg.seeds {
            let entry = sample_customers(&instance, n, seed)
                .map_err(|e| BenchError::Config(e.to_string()))
                .map(|sub| match modeled(&sub) {
                    Ok(grid) => Ok((sub, grid)),
                    Err(m) => Err(m),
                })?;
            cells.insert((n, seed), entry);
        }
    }

    // Oracle pass, sequential so the cache is written once per cell.
    let mut optima: BTreeMap<(usize, u64), usize> = BTreeMap::new();
    if cfg.use_oracle {
        let cache = cfg.cache_dir.as_ref().map(OracleCache::new);
        for (&(n, seed), cell) in &cells {
            let Ok((sub, grid)) = cell else { continue };
            let solved = match &cache {
                Some(c) => c.optimum(sub, grid),
                None => oracle::optimum(sub, grid),
            };
            match solved {
                Ok(r) => {
                    optima.insert((n, seed), r.optimum);
                }
                Err(OracleError::Sampler(SamplerError::TooLarge { active, limit })) => {
                    return Err(BenchError::OracleLimit { n, seed, active, limit })
                }
                Err(source) => return Err(BenchError::Oracle { n, seed, source }),
            }
        }
    }

    let jobs: Vec<(usize, u64, Method)> = cfg
        .ns
        .iter()
        .flat_map(|&n| {
            cfg.seeds.iter().flat_map(move |&seed| {
                cfg.methods.iter().map(move |&m| (n, seed, m))
            })
        })
        .collect();
    let mut rows: Vec<BenchRow> = jobs
        .par_iter()
        .map(|&(n, seed, method)| match &cells[&(n, seed)] {
            Ok((sub, grid)) => execute(method, sub, grid, cfg, seed),
            Err(message) => Ok(BenchRow {
                instance: instance.name.clone(),
                n,
                seed,
                method,
                objective: None,
                optimum: None,
                relative_gap: None,
                feasible: false,
                skipped: true,
                wall_ms: 0,
                iterations: 0,
                note: format!("skipped: {message}").replace([',', '\n'], ";"),
            }),
        })
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| (a.n, a.seed, a.method).cmp(&(b.n, b.seed, b.method)));

    let denominators: BTreeMap<(usize, u64), usize> = if cfg.use_oracle {
        optima
    } else {
        let mut best: BTreeMap<(usize, u64), usize> = BTreeMap::new();
        for row in &rows {
            if let (true, Some(obj)) = (row.feasible, row.objective) {
                best.entry((row.n, row.seed))
                    .and_modify(|b| *b = (*b).min(obj))
                    .or_insert(obj);
            }
        }
        best
    };
    for row in &mut rows {
        row.optimum = denominators.get(&(row.n, row.seed)).copied();
        if let (true, Some(obj), Some(opt)) = (row.feasible, row.objective, row.optimum) {
            row.relative_gap = Some((obj as f64 - opt as f64) / opt as f64);
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub instance: String,
    pub n: usize,
    pub method: Method,
    /// Rows that actually executed (skipped rows are excluded).
    pub runs: usize,
    pub feasible: usize,
    pub feasible_pct: f64,
    pub mean_gap: Option<f64>,
    pub std_gap: Option<f64>,
    pub mean_wall_ms: Option<f64>,
    pub std_wall_ms: Option<f64>,
    /// `(t_method - t_reference) / t_method` against the annealing loop.
    pub rel_time_diff: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-(instance, N, method) statistics over feasible rows only. Cells
/// with no feasible rows keep their counters and leave the statistics
/// absent.
pub fn aggregate(rows: &[BenchRow]) -> Vec<SummaryCell> {
    let mut groups: BTreeMap<(String, usize, Method), Vec<&BenchRow>> = BTreeMap::new();
    for row in rows.iter().filter(|r| !r.skipped) {
        groups
            .entry((row.instance.clone(), row.n, row.method))
            .or_default()
            .push(row);
    }
    let mut cells: Vec<SummaryCell> = groups
        .into_iter()
        .map(|((instance, n, method), members)| {
            let runs = members.len();
            let feas: Vec<&&BenchRow> = members.iter().filter(|r| r.feasible).collect();
            let gaps: Vec<f64> = feas.iter().filter_map(|r| r.relative_gap).collect();
            let walls: Vec<f64> = feas.iter().map(|r| r.wall_ms as f64).collect();
            let (mean_gap, std_gap) = if gaps.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&gaps);
                (Some(m), Some(s))
            };
            let (mean_wall_ms, std_wall_ms) = if walls.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_std(&walls);
                (Some(m), Some(s))
            };
            SummaryCell {
                instance,
                n,
                method,
                runs,
                feasible: feas.len(),
                feasible_pct: if runs == 0 { 0.0 } else { 100.0 * feas.len() as f64 / runs as f64 },
                mean_gap,
                std_gap,
                mean_wall_ms,
                std_wall_ms,
                rel_time_diff: None,
            }
        })
        .collect();

    let references: BTreeMap<(String, usize), f64> = cells
        .iter()
        .filter(|c| c.method == Method::GreedySa)
        .filter_map(|c| c.mean_wall_ms.map(|w| ((c.instance.clone(), c.n), w)))
        .collect();
    for cell in &mut cells {
        if cell.method == Method::GreedySa {
            continue;
        }
        if let (Some(t), Some(&t_ref)) =
            (cell.mean_wall_ms, references.get(&(cell.instance.clone(), cell.n)))
        {
            if t > 0.0 {
                cell.rel_time_diff = Some((t - t_ref) / t);
            }
        }
    }
    cells
}

fn opt_num<T: fmt::Display>(v: &Option<T>, f: impl Fn(&T) -> String) -> String {
    v.as_ref().map(&f).unwrap_or_default()
}

pub fn rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from(
        "instance,n,seed,method,objective,optimum,relative_gap,feasible,skipped,wall_ms,iterations,note\n",
    );
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.instance,
            r.n,
            r.seed,
            r.method,
            opt_num(&r.objective, |v| v.to_string()),
            opt_num(&r.optimum, |v| v.to_string()),
            opt_num(&r.relative_gap, |v| format!("{v:.6}")),
            r.feasible,
            r.skipped,
            r.wall_ms,
            r.iterations,
            r.note,
        )
        .unwrap();
    }
    out
}

pub fn summary_csv(cells: &[SummaryCell]) -> String {
    let mut out = String::from(
        "instance,n,method,runs,feasible,feasible_pct,mean_gap,std_gap,mean_wall_ms,std_wall_ms,rel_time_diff\n",
    );
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{:.1},{},{},{},{},{}",
            c.instance,
            c.n,
            c.method,
            c.runs,
            c.feasible,
            c.feasible_pct,
            opt_num(&c.mean_gap, |v| format!("{v:.6}")),
            opt_num(&c.std_gap, |v| format!("{v:.6}")),
            opt_num(&c.mean_wall_ms, |v| format!("{v:.1}")),
            opt_num(&c.std_wall_ms, |v| format!("{v:.1}")),
            opt_num(&c.rel_time_diff, |v| format!("{v:.4}")),
        )
        .unwrap();
    }
    out
}

/// Markdown report: resolved config, then one table per instance and N.
/// Cells with no feasible rows print an em-free absent marker.
pub fn report_md(cfg: &BenchConfig, cells: &[SummaryCell]) -> String {
    let mut out = String::new();
    writeln!(out, "# Fleet-size benchmark\n").unwrap();
    writeln!(out, "toolkit version {}\n", env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(out, "## Configuration\n").unwrap();
    writeln!(out, "```json\n{}\n```\n", serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    writeln!(out, "## Results\n").unwrap();
    writeln!(
        out,
        "Statistics are over feasible runs only; `n/a` marks cells with none.\n"
    )
    .unwrap();
    writeln!(
        out,
        "| instance | N | method | feasible | mean gap | std gap | mean wall s | rel time diff |"
    )
    .unwrap();
    writeln!(out, "|---|---|---|---|---|---|---|---|").unwrap();
    let absent = "n/a".to_string();
    for c in cells {
        writeln!(
            out,
            "| {} | {} | {} | {}/{} ({:.0}%) | {} | {} | {} | {} |",
            c.instance,
            c.n,
            c.method,
            c.feasible,
            c.runs,
            c.feasible_pct,
            c.mean_gap.map(|v| format!("{v:.4}")).unwrap_or_else(|| absent.clone()),
            c.std_gap.map(|v| format!("{v:.4}")).unwrap_or_else(|| absent.clone()),
            c.mean_wall_ms.map(|v| format!("{:.3}", v / 1000.0)).unwrap_or_else(|| absent.clone()),
            c.rel_time_diff.map(|v| format!("{v:.4}")).unwrap_or_else(|| absent.clone()),
        )
        .unwrap();
    }
    out
}

/// Writes `rows.csv`, `summary.csv`, and `report.md` under `dir`.
pub fn write_outputs(cfg: &BenchConfig, rows: &[BenchRow], dir: &Path) -> Result<(), BenchError> {
    std::fs::create_dir_all(dir)?;
    let cells = aggregate(rows);
    std::fs::write(dir.join("rows.csv"), rows_csv(rows))?;
    std::fs::write(dir.join("summary.csv"), summary_csv(&cells))?;
    std::fs::write(dir.join("report.md"), report_md(cfg, &cells))?;
    Ok(())
}
