//! Experiment execution: grid cells run on a worker pool, results are
//! collected in grid order and written by a single thread.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cpdsym::integrators::uniform_grid;
use cpdsym::verification::{
    convergence_row, energy_series, fit_order, sample_states, symplecticity_report,
    symplecticity_residual_of, uniformity_ratio, ErrorMetrics, UniformityRow,
};
use cpdsym::{oracle_solve, Integrator, Method, OracleSolution, Problem, SolveStats};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::error::{HarnessError, Result};
use crate::output::{fmt_f64, Csv};

pub const ARTIFACT: &str = "cpdsym-harness";
pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct StatsRecord {
    pub steps: usize,
    pub solves: usize,
    pub sweeps: usize,
    pub max_sweeps: usize,
    pub capped: usize,
}

impl From<SolveStats> for StatsRecord {
    fn from(s: SolveStats) -> Self {
        StatsRecord {
            steps: s.steps,
            solves: s.solves,
            sweeps: s.sweeps,
            max_sweeps: s.max_sweeps,
            capped: s.capped,
        }
    }
}

/// Outcome of one `(method, ε, h)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellRecord {
    pub method: String,
    pub eps: f64,
    pub h: f64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub stats: StatsRecord,
}

/// Outcome of one reference computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRecord {
    pub eps: f64,
    pub h_min: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_ref: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub check_diff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunMetadata {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub problem: String,
    pub config_digest: String,
    pub config: serde_json::Value,
    pub jobs: usize,
    /// Boris velocities are reported at integer steps.
    pub boris_variant: String,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
    pub failed_cells: usize,
    pub failed_oracles: usize,
    pub cells: Vec<CellRecord>,
    pub oracles: Vec<OracleRecord>,
}

/// Data files of a run, before anything touches the disk.
#[derive(Debug, Clone)]
pub struct Outputs {
    /// `(file name, contents)` in a fixed order.
    pub files: Vec<(String, String)>,
    pub cells: Vec<CellRecord>,
    pub oracles: Vec<OracleRecord>,
}

impl Outputs {
    pub fn failed_cells(&self) -> usize {
        self.cells.iter().filter(|c| !c.ok).count()
    }

    pub fn failed_oracles(&self) -> usize {
        self.oracles.iter().filter(|o| !o.passed).count()
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub metadata: RunMetadata,
}

impl RunReport {
    /// Every cell succeeded and every oracle passed its self-check.
    pub fn success(&self) -> bool {
        self.metadata.failed_cells == 0 && self.metadata.failed_oracles == 0
    }
}

/// Worker count: `jobs`, else the available parallelism.
pub fn resolve_jobs(jobs: Option<usize>) -> usize {
    jobs.filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs `kind` on a pool of `jobs` workers and writes the data files plus
/// `metadata.json` into `out_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    kind: ExperimentKind,
    jobs: Option<usize>,
    out_dir: &Path,
) -> Result<RunReport> {
    cfg.validate()?;
    let jobs = resolve_jobs(jobs);
    let start = Instant::now();
    let outputs = compute(cfg, kind, jobs)?;
    let wall = start.elapsed().as_secs_f64();

    fs::create_dir_all(out_dir).map_err(|e| io_error(out_dir, e))?;
    for (name, contents) in &outputs.files {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
    }
    let metadata = RunMetadata {
        artifact: ARTIFACT.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: kind.to_string(),
        problem: cfg.problem_label(),
        config_digest: cfg.digest(),
        config: serde_json::to_value(cfg)?,
        jobs,
        boris_variant: "synchronized".into(),
        wall_clock_seconds: wall,
        files: outputs.files.iter().map(|(n, _)| n.clone()).collect(),
        failed_cells: outputs.failed_cells(),
        failed_oracles: outputs.failed_oracles(),
        cells: outputs.cells,
        oracles: outputs.oracles,
    };
    let path = out_dir.join(METADATA_FILE);
    let mut text = serde_json::to_string_pretty(&metadata)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| io_error(&path, e))?;
    Ok(RunReport { out_dir: out_dir.to_path_buf(), metadata })
}

fn io_error(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io { path: path.display().to_string(), source }
}

/// Computes the data files of `kind` without writing them.
pub fn compute(cfg: &ExperimentConfig, kind: ExperimentKind, jobs: usize) -> Result<Outputs> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?;
    pool.install(|| match kind {
        ExperimentKind::Converge => converge(cfg),
        ExperimentKind::Energy => energy(cfg),
        ExperimentKind::Symplectic => symplectic(cfg),
        ExperimentKind::SweepEps => sweep_eps(cfg),
    })
}

fn integrator(cfg: &ExperimentConfig, m: Method) -> Integrator<f64> {
    Integrator::new(m)
        .with_controls(cfg.controls())
        .with_sg_quadrature(cfg.sg_quadrature.into())
}

/// Per-cell outcome; errors are kept as text for the metadata.
type Fallible<T> = std::result::Result<T, String>;
/// `(h, error)` pairs along one method's step grid.
type Points = Vec<(f64, f64)>;

fn cell(m: Method, eps: f64, h: f64, res: &Fallible<SolveStats>) -> CellRecord {
    CellRecord {
        method: m.to_string(),
        eps,
        h,
        ok: res.is_ok(),
        error: res.as_ref().err().cloned(),
        stats: res.as_ref().map(|s| (*s).into()).unwrap_or_default(),
    }
}

fn oracle_record(eps: f64, h_min: f64, res: &Fallible<OracleSolution<f64>>) -> OracleRecord {
    match res {
        Ok(o) => OracleRecord {
            eps,
            h_min,
            passed: true,
            method: Some(o.method.to_string()),
            h_ref: Some(o.h_ref),
            check_diff: Some(o.check_diff),
            error: None,
        },
        Err(e) => OracleRecord {
            eps,
            h_min,
            passed: false,
            method: None,
            h_ref: None,
            check_diff: None,
            error: Some(e.clone()),
        },
    }
}

fn h_min(cfg: &ExperimentConfig) -> f64 {
    cfg.h.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Problem and oracle per `ε`, in grid order.
fn oracles(cfg: &ExperimentConfig) -> Result<Vec<(Problem, Fallible<OracleSolution<f64>>)>> {
    let problems = cfg.eps.iter().map(|&e| cfg.build_problem(e)).collect::<Result<Vec<_>>>()?;
    let oc = cfg.oracle.to_config();
    let hm = h_min(cfg);
    Ok(problems
        .into_par_iter()
        .map(|p| {
            let o = oracle_solve(&p, cfg.t_end, hm, &oc).map_err(|e| e.to_string());
            (p, o)
        })
        .collect())
}

fn converge(cfg: &ExperimentConfig) -> Result<Outputs> {
    let refs = oracles(cfg)?;
    let metric = cfg.metric.to_uniformity();
    let grid: Vec<(Method, usize, f64)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| (0..cfg.eps.len()).flat_map(move |k| cfg.h.iter().map(move |&h| (m, k, h))))
        .collect();
    let results: Vec<Fallible<(ErrorMetrics<f64>, SolveStats)>> = grid
        .par_iter()
        .map(|&(m, k, h)| {
            let (p, oracle) = &refs[k];
            let oracle = oracle.as_ref().map_err(|e| format!("oracle failed: {e}"))?;
            convergence_row(&integrator(cfg, m), p, h, cfg.t_end, &oracle.state)
                .map(|r| (r.metrics, r.stats))
                .map_err(|e| e.to_string())
        })
        .collect();

    let mut data = Csv::new(&["method", "eps", "h", "t", "err_x", "err_v", "error", "metric_scaled"]);
    let mut slopes = Csv::new(&["method", "eps", "points", "slope", "slope_metric", "fit_residual"]);
    let mut cells = Vec::with_capacity(grid.len());
    for (chunk_grid, chunk_res) in grid.chunks(cfg.h.len()).zip(results.chunks(cfg.h.len())) {
        let (m, k, _) = chunk_grid[0];
        let eps = cfg.eps[k];
        let mut pts = Vec::new();
        let mut pts_metric = Vec::new();
        for (&(_, _, h), res) in chunk_grid.iter().zip(chunk_res) {
            cells.push(cell(m, eps, h, &res.as_ref().map(|r| r.1).map_err(Clone::clone)));
            if let Ok((e, _)) = res {
                let scaled = metric.select(e, eps);
                data.row(&[
                    m.to_string(),
                    fmt_f64(eps),
                    fmt_f64(h),
                    fmt_f64(cfg.t_end),
                    fmt_f64(e.err_x),
                    fmt_f64(e.err_v),
                    fmt_f64(e.error()),
                    fmt_f64(scaled),
                ]);
                pts.push((h, e.error()));
                pts_metric.push((h, scaled));
            }
        }
        let fit = fit_order(&pts).ok();
        let fit_metric = fit_order(&pts_metric).ok();
        let show = |x: Option<f64>| x.map(fmt_f64).unwrap_or_default();
        slopes.row(&[
            m.to_string(),
            fmt_f64(eps),
            pts.len().to_string(),
            show(fit.map(|f| f.slope)),
            show(fit_metric.map(|f| f.slope)),
            show(fit.map(|f| f.residual)),
        ]);
    }
    let hm = h_min(cfg);
    Ok(Outputs {
        files: vec![
            ("converge.csv".into(), data.into_string()),
            ("slopes.csv".into(), slopes.into_string()),
        ],
        cells,
        oracles: refs.iter().zip(&cfg.eps).map(|((_, o), &e)| oracle_record(e, hm, o)).collect(),
    })
}

fn energy(cfg: &ExperimentConfig) -> Result<Outputs> {
    let (eps, h) = (cfg.eps[0], cfg.h[0]);
    let p = cfg.build_problem(eps)?;
    let (n, h_eff) = uniform_grid(cfg.t_end, h);
    let methods = cfg.methods();
    let results: Vec<Fallible<(Points, SolveStats)>> = methods
        .par_iter()
        .map(|&m| {
            let tr = integrator(cfg, m).integrate(&p, h_eff, n, cfg.thinning).map_err(|e| e.to_string())?;
            let es = energy_series(&tr, &p).map_err(|e| e.to_string())?;
            Ok((es.times.into_iter().zip(es.errors).collect(), tr.stats))
        })
        .collect();
    let mut data = Csv::new(&["method", "t", "e_H"]);
    let mut cells = Vec::new();
    for (&m, res) in methods.iter().zip(&results) {
        cells.push(cell(m, eps, h, &res.as_ref().map(|r| r.1).map_err(Clone::clone)));
        if let Ok((rows, _)) = res {
            for &(t, e) in rows {
                data.row(&[m.to_string(), fmt_f64(t), fmt_f64(e)]);
            }
        }
    }
    Ok(Outputs { files: vec![("energy.csv".into(), data.into_string())], cells, oracles: Vec::new() })
}

/// Label of the reference-flow control rows in `symplectic.csv`.
pub const EXACT_FLOW_LABEL: &str = "EXACT";

fn symplectic(cfg: &ExperimentConfig) -> Result<Outputs> {
    let problems = cfg.eps.iter().map(|&e| cfg.build_problem(e)).collect::<Result<Vec<_>>>()?;
    let states: Vec<_> = problems.iter().map(|p| sample_states(p, cfg.samples, cfg.seed)).collect();
    // `None` marks the control: the oracle method on `refinement` substeps.
    let mut grid: Vec<(Option<Method>, usize, f64)> = Vec::new();
    for k in 0..cfg.eps.len() {
        for &h in &cfg.h {
            grid.push((None, k, h));
        }
    }
    for m in cfg.methods() {
        for k in 0..cfg.eps.len() {
            for &h in &cfg.h {
                grid.push((Some(m), k, h));
            }
        }
    }
    let oc = cfg.oracle.to_config();
    let results: Vec<Fallible<Vec<f64>>> = grid
        .par_iter()
        .map(|&(m, k, h)| {
            let p = &problems[k];
            match m {
                Some(m) => symplecticity_report(&integrator(cfg, m), p, h, &states[k])
                    .map(|r| r.samples.iter().map(|s| s.residual).collect())
                    .map_err(|e| e.to_string()),
                None => {
                    let integ = Integrator::new(oc.base_for(p)).with_controls(oc.controls);
                    let sub = h / oc.refinement as f64;
                    states[k]
                        .iter()
                        .map(|s| {
                            symplecticity_residual_of(p, s, None, |z| {
                                integ.advance(p, *z, sub, oc.refinement, &mut SolveStats::default())
                            })
                        })
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|e| e.to_string())
                }
            }
        })
        .collect();
    let mut data = Csv::new(&["method", "eps", "h", "sample", "residual"]);
    let mut cells = Vec::new();
    for (&(m, k, h), res) in grid.iter().zip(&results) {
        let eps = cfg.eps[k];
        let label = m.map_or(EXACT_FLOW_LABEL.to_string(), |m| m.to_string());
        if let Some(m) = m {
            cells.push(cell(m, eps, h, &res.as_ref().map(|_| SolveStats::default()).map_err(Clone::clone)));
        } else if let Err(e) = res {
            cells.push(CellRecord {
                method: label.clone(),
                eps,
                h,
                ok: false,
                error: Some(e.clone()),
                stats: StatsRecord::default(),
            });
        }
        if let Ok(rs) = res {
            for (i, r) in rs.iter().enumerate() {
                data.row(&[label.clone(), fmt_f64(eps), fmt_f64(h), i.to_string(), fmt_f64(*r)]);
            }
        }
    }
    Ok(Outputs { files: vec![("symplectic.csv".into(), data.into_string())], cells, oracles: Vec::new() })
}

fn sweep_eps(cfg: &ExperimentConfig) -> Result<Outputs> {
    let refs = oracles(cfg)?;
    let metric = cfg.metric.to_uniformity();
    let grid: Vec<(Method, f64, usize)> = cfg
        .methods()
        .into_iter()
        .flat_map(|m| cfg.h.iter().flat_map(move |&h| (0..cfg.eps.len()).map(move |k| (m, h, k))))
        .collect();
    let results: Vec<Fallible<(UniformityRow<f64>, SolveStats)>> = grid
        .par_iter()
        .map(|&(m, h, k)| {
            let (p, oracle) = &refs[k];
            let oracle = oracle.as_ref().map_err(|e| format!("oracle failed: {e}"))?;
            let row = convergence_row(&integrator(cfg, m), p, h, cfg.t_end, &oracle.state)
                .map_err(|e| e.to_string())?;
            let eps = cfg.eps[k];
            Ok((
                UniformityRow {
                    eps,
                    metrics: row.metrics,
                    selected: metric.select(&row.metrics, eps),
                    oracle_check: oracle.check_diff,
                },
                row.stats,
            ))
        })
        .collect();
    let mut data = Csv::new(&["method", "h", "eps", "err_x", "err_v", "metric_scaled"]);
    let mut summary = Csv::new(&["method", "h", "points", "ratio"]);
    let mut cells = Vec::new();
    let n_eps = cfg.eps.len();
    for (chunk_grid, chunk_res) in grid.chunks(n_eps).zip(results.chunks(n_eps)) {
        let (m, h, _) = chunk_grid[0];
        let mut rows = Vec::new();
        for (&(_, _, k), res) in chunk_grid.iter().zip(chunk_res) {
            cells.push(cell(m, cfg.eps[k], h, &res.as_ref().map(|r| r.1).map_err(Clone::clone)));
            if let Ok((row, _)) = res {
                data.row(&[
                    m.to_string(),
                    fmt_f64(h),
                    fmt_f64(row.eps),
                    fmt_f64(row.metrics.err_x),
                    fmt_f64(row.metrics.err_v),
                    fmt_f64(row.selected),
                ]);
                rows.push(row.clone());
            }
        }
        let ratio = if rows.is_empty() { String::new() } else { fmt_f64(uniformity_ratio(&rows)) };
        summary.row(&[m.to_string(), fmt_f64(h), rows.len().to_string(), ratio]);
    }
    let hm = h_min(cfg);
    Ok(Outputs {
        files: vec![
            ("sweep.csv".into(), data.into_string()),
            ("sweep_summary.csv".into(), summary.into_string()),
        ],
        cells,
        oracles: refs.iter().zip(&cfg.eps).map(|((_, o), &e)| oracle_record(e, hm, o)).collect(),
    })
}
