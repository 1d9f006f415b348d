//! Seeded ensemble sweeps over counterdiabatic orders and `TΔ` values.
//!
//! A run expands an [`ExperimentConfig`] into independent
//! `(instance, order, TΔ)` triples, evaluates them on a rayon pool and
//! returns rows sorted by `(seed, order, TΔ)`, so the CSV body depends only
//! on the configuration.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use log::{debug, info, warn};
use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agp::{AgpExpansion, DenseCd};
use crate::error::{CdqcError, Result};
use crate::evolve::{self, PropagateOptions, StepExponential, DEFAULT_SAMPLES, NORM_DRIFT_LIMIT};
use crate::metrics::{self, CoherenceBasis};
use crate::problems::{self, Edge, Family, GroundSpace, ProblemInstance, DEFAULT_DEGENERACY_TOL};
use crate::schedule::{self, GapReport, Regime, DEFAULT_GAP_GRID};
use crate::C64;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CDQC_WORKERS";

/// Column names of the result CSV, in order.
pub const CSV_HEADER: [&str; 13] = [
    "family",
    "instance_seed",
    "n_qubits",
    "order_l",
    "T",
    "t_delta",
    "regime",
    "C_P",
    "dE_avg",
    "tau_qsl",
    "p_success",
    "norm_drift",
    "gamma_residual_max",
];

/// Column names of the optional per-sample coherence CSV.
pub const SERIES_HEADER: [&str; 8] = [
    "family",
    "instance_seed",
    "order_l",
    "t_delta",
    "T",
    "t",
    "lambda",
    "coherence",
];

const DEFAULT_QUBITS: usize = 6;
const DEFAULT_ENSEMBLE: usize = 20;

/// `TΔ` values: an explicit list, or `points` log-uniform values in `[min, max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TGrid {
    pub values: Option<Vec<f64>>,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Default for TGrid {
    fn default() -> Self {
        Self {
            values: None,
            min: 1e-2,
            max: 1e2,
            points: 30,
        }
    }
}

impl TGrid {
    pub fn explicit(values: Vec<f64>) -> Self {
        Self {
            values: Some(values),
            ..Self::default()
        }
    }

    pub fn t_deltas(&self) -> Result<Vec<f64>> {
        let values = match &self.values {
            Some(v) => v.clone(),
            None => {
                if !(self.min > 0.0 && self.max >= self.min) || self.points == 0 {
                    return Err(CdqcError::Config(format!(
                        "t_grid needs 0 < min <= max and points >= 1, got min={} max={} points={}",
                        self.min, self.max, self.points
                    )));
                }
                if self.points == 1 {
                    vec![self.min]
                } else {
                    let (a, b) = (self.min.ln(), self.max.ln());
                    (0..self.points)
                        .map(|k| (a + (b - a) * k as f64 / (self.points - 1) as f64).exp())
                        .collect()
                }
            }
        };
        if values.is_empty() {
            return Err(CdqcError::Config("t_grid is empty".into()));
        }
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(CdqcError::Config("t_grid values must be positive and finite".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CdqcError::Config("t_grid values must be strictly increasing".into()));
        }
        Ok(values)
    }
}

/// Family parameters; only the keys of the configured family are read.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FamilyParams {
    /// Max-cut edges `[i, j, weight]`; defaults to `K_{3,3}`.
    pub edges: Option<Vec<(usize, usize, f64)>>,
    /// Draw seeded uniform `[0, 1]` weights for the default `K_{3,3}` graph.
    pub random_weights: bool,
    /// Number to factor.
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub n_x: Option<usize>,
    pub n_y: Option<usize>,
    pub g: Option<f64>,
    #[serde(rename = "J")]
    pub j: Option<f64>,
    pub beta: Option<f64>,
    /// One Heisenberg instance per value (ratio `β/g`).
    pub beta_sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub n_steps: Option<usize>,
    pub n_samples: usize,
    pub exponential: StepExponential,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            n_steps: None,
            n_samples: DEFAULT_SAMPLES,
            exponential: StepExponential::default(),
        }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> PropagateOptions {
        PropagateOptions {
            n_steps: self.n_steps,
            n_samples: self.n_samples,
            exponential: self.exponential,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    /// Per-sample coherence of every run, for time-resolved plots.
    pub series: Option<PathBuf>,
}

/// One experiment: an instance ensemble swept over orders and `TΔ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Generated family; exactly one of `family` and `instance_files` is set.
    pub family: Option<Family>,
    /// Instance files in the canonical text format, one instance each.
    #[serde(default)]
    pub instance_files: Vec<PathBuf>,
    pub n_qubits: Option<usize>,
    pub ensemble_size: Option<usize>,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_orders")]
    pub orders: Vec<usize>,
    #[serde(default)]
    pub t_grid: TGrid,
    #[serde(default)]
    pub params: FamilyParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub coherence_basis: CoherenceBasis,
    #[serde(default = "default_gap_grid")]
    pub gap_grid: usize,
    pub workers: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_orders() -> Vec<usize> {
    vec![0, 1, 2, 3]
}

fn default_gap_grid() -> usize {
    DEFAULT_GAP_GRID
}

impl ExperimentConfig {
    /// A generated-family config with every other field at its default.
    pub fn for_family(family: Family) -> Self {
        Self {
            family: Some(family),
            instance_files: vec![],
            n_qubits: None,
            ensemble_size: None,
            seed_base: 0,
            orders: default_orders(),
            t_grid: TGrid::default(),
            params: FamilyParams::default(),
            integrator: IntegratorConfig::default(),
            coherence_basis: CoherenceBasis::default(),
            gap_grid: DEFAULT_GAP_GRID,
            workers: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CdqcError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative instance and output paths are taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CdqcError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        self.instance_files.iter_mut().for_each(fix);
        for p in [&mut self.output.csv, &mut self.output.summary, &mut self.output.series]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| CdqcError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CdqcError::Config(msg));
        match (self.family, self.instance_files.is_empty()) {
            (Some(_), false) => return bad("set either `family` or `instance_files`, not both".into()),
            (None, true) => return bad("one of `family` or `instance_files` is required".into()),
            _ => {}
        }
        if self.n_qubits == Some(0) {
            return bad("n_qubits must be positive".into());
        }
        if self.ensemble_size == Some(0) {
            return bad("ensemble_size must be positive".into());
        }
        if self.orders.is_empty() {
            return bad("orders must not be empty".into());
        }
        let mut seen = self.orders.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.orders.len() {
            return bad(format!("orders must be distinct, got {:?}", self.orders));
        }
        self.t_grid.t_deltas()?;
        if self.integrator.n_samples < 2 {
            return bad("integrator.n_samples must be at least 2".into());
        }
        if let Some(n) = self.integrator.n_steps {
            if n + 1 < self.integrator.n_samples {
                return bad(format!(
                    "integrator.n_steps ({n}) must be at least n_samples - 1 ({})",
                    self.integrator.n_samples - 1
                ));
            }
        }
        if self.gap_grid < 2 {
            return bad("gap_grid must be at least 2".into());
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if let Some(sweep) = &self.params.beta_sweep {
            if sweep.is_empty() {
                return bad("params.beta_sweep must not be empty".into());
            }
            if let Some(m) = self.ensemble_size {
                if m != sweep.len() {
                    return bad(format!(
                        "ensemble_size ({m}) must equal the beta_sweep length ({})",
                        sweep.len()
                    ));
                }
            }
        }
        if let Some(n) = self.family.and_then(|f| self.expected_qubits(f)) {
            if let Some(given) = self.n_qubits {
                if given != n {
                    return bad(format!("n_qubits = {given} but the family parameters imply {n}"));
                }
            }
        }
        Ok(())
    }

    /// Qubit count fixed by the family parameters, if any.
    fn expected_qubits(&self, family: Family) -> Option<usize> {
        match family {
            Family::MaxCut => Some(match &self.params.edges {
                Some(edges) => edges.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(1),
                None => 6,
            }),
            Family::Factorization => match (self.params.n_x, self.params.n_y) {
                (Some(a), Some(b)) => Some(a + b),
                _ => None,
            },
            _ => None,
        }
    }

    /// Number of instances the config describes.
    pub fn ensemble(&self) -> usize {
        if !self.instance_files.is_empty() {
            return self.instance_files.len();
        }
        if let Some(m) = self.ensemble_size {
            return m;
        }
        match (self.family, &self.params.beta_sweep) {
            (Some(Family::Heisenberg), Some(sweep)) => sweep.len(),
            (Some(Family::Factorization), _) => 1,
            (Some(Family::MaxCut), _) if !self.params.random_weights => 1,
            _ => DEFAULT_ENSEMBLE,
        }
    }

    /// Worker count: the environment override, then the config, then all cores.
    pub fn effective_workers(&self) -> Result<usize> {
        if let Ok(v) = std::env::var(WORKERS_ENV) {
            return match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(CdqcError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
            };
        }
        Ok(self
            .workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())))
    }

    /// Builds instance `index` of the ensemble; its seed is `seed_base + index`.
    pub fn build_instance(&self, index: usize) -> Result<ProblemInstance> {
        if let Some(path) = self.instance_files.get(index) {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CdqcError::Config(format!("cannot read {}: {e}", path.display())))?;
            return ProblemInstance::from_text(&text);
        }
        let family = self
            .family
            .ok_or_else(|| CdqcError::Config(format!("no instance {index}")))?;
        let seed = self.seed_base + index as u64;
        let p = &self.params;
        let n = self.n_qubits.unwrap_or(DEFAULT_QUBITS);
        match family {
            Family::RandomQubo => problems::build_random_qubo(n, seed),
            Family::Random4Local => problems::build_random_4local(n, seed),
            Family::MaxCut => {
                let edges: Vec<Edge> = match &p.edges {
                    Some(edges) => edges.clone(),
                    None if p.random_weights => problems::k33_edges(Some(&problems::seeded_unit_weights(9, seed))),
                    None => problems::k33_edges(None),
                };
                let n = self.expected_qubits(family).unwrap_or(n);
                problems::maxcut_instance(n, edges, seed)
            }
            Family::Factorization => {
                let target = p
                    .n
                    .ok_or_else(|| CdqcError::Config("factorization needs params.N".into()))?;
                let (n_x, n_y) = match (p.n_x, p.n_y) {
                    (Some(a), Some(b)) => (a, b),
                    (None, None) => problems::default_factor_widths(target)?,
                    _ => return Err(CdqcError::Config("set both params.n_x and params.n_y or neither".into())),
                };
                let mut inst = problems::build_factorization(target, n_x, n_y)?;
                inst.seed = seed;
                Ok(inst)
            }
            Family::Heisenberg => {
                let beta = match &p.beta_sweep {
                    Some(sweep) => sweep[index],
                    None => p.beta.unwrap_or(0.2),
                };
                let g = p.g.unwrap_or(1.0);
                problems::build_heisenberg(n, g, p.j.unwrap_or(0.2), beta * g, seed)
            }
        }
    }
}

/// One `(instance, order, TΔ)` result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: Family,
    pub instance_seed: u64,
    pub n_qubits: usize,
    pub order_l: usize,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub t_delta: f64,
    /// Empty when the instance is gapless and no time scale exists.
    pub regime: Option<Regime>,
    #[serde(rename = "C_P")]
    pub c_p: f64,
    #[serde(rename = "dE_avg")]
    pub de_avg: f64,
    pub tau_qsl: f64,
    pub p_success: f64,
    pub norm_drift: f64,
    pub gamma_residual_max: f64,
}

impl ResultRow {
    /// Invalid trace, failed evaluation or undefined time scale.
    pub fn is_flagged(&self) -> bool {
        !(self.norm_drift <= NORM_DRIFT_LIMIT)
            || self.regime.is_none()
            || !self.c_p.is_finite()
            || !self.de_avg.is_finite()
            || !self.p_success.is_finite()
    }
}

/// Coherence at one sample of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub family: Family,
    pub instance_seed: u64,
    pub order_l: usize,
    pub t_delta: f64,
    #[serde(rename = "T")]
    pub total_time: f64,
    pub t: f64,
    pub lambda: f64,
    pub coherence: f64,
}

/// Ensemble means over the valid rows sharing `(order_l, t_delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub order_l: usize,
    pub t_delta: f64,
    pub runs: usize,
    pub flagged: usize,
    #[serde(rename = "C_P")]
    pub c_p: f64,
    #[serde(rename = "dE_avg")]
    pub de_avg: f64,
    pub tau_qsl: f64,
    pub p_success: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<ResultRow>,
    pub series: Vec<SeriesRow>,
}

impl ExperimentOutput {
    pub fn flagged(&self) -> usize {
        self.rows.iter().filter(|r| r.is_flagged()).count()
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        summarize(&self.rows)
    }
}

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.order_l, r.t_delta.to_bits())).or_default().push(r);
    }
    let mut out: Vec<SummaryRow> = groups
        .into_values()
        .map(|g| {
            let valid: Vec<&&ResultRow> = g.iter().filter(|r| !r.is_flagged()).collect();
            let mean = |f: &dyn Fn(&ResultRow) -> f64| {
                if valid.is_empty() {
                    f64::NAN
                } else {
                    valid.iter().map(|r| f(r)).sum::<f64>() / valid.len() as f64
                }
            };
            SummaryRow {
                order_l: g[0].order_l,
                t_delta: g[0].t_delta,
                runs: valid.len(),
                flagged: g.len() - valid.len(),
                c_p: mean(&|r| r.c_p),
                de_avg: mean(&|r| r.de_avg),
                tau_qsl: mean(&|r| r.tau_qsl),
                p_success: mean(&|r| r.p_success),
            }
        })
        .collect();
    out.sort_by(|a, b| a.order_l.cmp(&b.order_l).then(a.t_delta.total_cmp(&b.t_delta)));
    out
}

struct Prepared {
    instance: ProblemInstance,
    gap: GapReport,
    ground: GroundSpace,
    psi0: DVector<C64>,
}

struct Job<'a> {
    prepared: &'a Prepared,
    cd: &'a Result<DenseCd>,
    order: usize,
    t_index: usize,
    t_delta: f64,
}

/// Runs every `(instance, order, TΔ)` triple of the config.
///
/// Configuration and instance-construction problems are errors; failures of
/// individual runs become flagged rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let workers = config.effective_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CdqcError::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_in_pool(config))
}

fn run_in_pool(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t_deltas = config.t_grid.t_deltas()?;
    let m = config.ensemble();
    info!(
        "{} instances x {} orders x {} TΔ values",
        m,
        config.orders.len(),
        t_deltas.len()
    );
    let prepared: Vec<Prepared> = (0..m)
        .into_par_iter()
        .map(|i| prepare(config, i))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..m)
        .flat_map(|i| config.orders.iter().map(move |&l| (i, l)))
        .collect();
    let expansions: Vec<Result<DenseCd>> = pairs
        .par_iter()
        .map(|&(i, l)| {
            let inst = &prepared[i].instance;
            AgpExpansion::new(inst, l).and_then(|e| DenseCd::new(inst, e))
        })
        .collect();
    let mut jobs = Vec::with_capacity(pairs.len() * t_deltas.len());
    for (k, &(i, l)) in pairs.iter().enumerate() {
        for (t_index, &t_delta) in t_deltas.iter().enumerate() {
            jobs.push(Job {
                prepared: &prepared[i],
                cd: &expansions[k],
                order: l,
                t_index,
                t_delta,
            });
        }
    }
    let want_series = config.output.series.is_some();
    let mut results: Vec<((u64, usize, usize), ResultRow, Vec<SeriesRow>)> = jobs
        .par_iter()
        .map(|job| {
            let (row, series) = run_job(config, job, want_series);
            ((row.instance_seed, job.order, job.t_index), row, series)
        })
        .collect();
    results.sort_by_key(|a| a.0);
    let mut out = ExperimentOutput::default();
    for (_, row, series) in results {
        out.rows.push(row);
        out.series.extend(series);
    }
    Ok(out)
}

fn prepare(config: &ExperimentConfig, index: usize) -> Result<Prepared> {
    let instance = config.build_instance(index)?;
    let gap = schedule::min_gap(&instance, config.gap_grid)?;
    if gap.gapless {
        warn!("instance seed {} is gapless (Δ = {:e})", instance.seed, gap.gap);
    }
    let ground = problems::ground_space(&instance.h_final, DEFAULT_DEGENERACY_TOL)?;
    let psi0 = evolve::initial_state(&instance)?;
    Ok(Prepared {
        instance,
        gap,
        ground,
        psi0,
    })
}

fn run_job(config: &ExperimentConfig, job: &Job<'_>, want_series: bool) -> (ResultRow, Vec<SeriesRow>) {
    let inst = &job.prepared.instance;
    let gap = job.prepared.gap.gap;
    let total_time = job.t_delta / gap;
    let mut row = ResultRow {
        family: inst.family,
        instance_seed: inst.seed,
        n_qubits: inst.n_qubits,
        order_l: job.order,
        total_time,
        t_delta: job.t_delta,
        regime: None,
        c_p: f64::NAN,
        de_avg: f64::NAN,
        tau_qsl: f64::NAN,
        p_success: f64::NAN,
        norm_drift: f64::NAN,
        gamma_residual_max: f64::NAN,
    };
    if !(gap > 0.0) || !total_time.is_finite() {
        warn!("seed {} has no usable gap; row flagged", inst.seed);
        return (row, vec![]);
    }
    let cd = match job.cd {
        Ok(cd) => cd,
        Err(e) => {
            warn!("seed {} order {}: {e}", inst.seed, job.order);
            return (row, vec![]);
        }
    };
    let trace = match evolve::propagate_from(cd, job.prepared.psi0.clone(), total_time, &config.integrator.options(), inst.n_qubits) {
        Ok(t) => t,
        Err(e) => {
            warn!("seed {} order {} TΔ {}: {e}", inst.seed, job.order, job.t_delta);
            return (row, vec![]);
        }
    };
    row.norm_drift = trace.norm_drift;
    row.gamma_residual_max = trace.gamma_residual_max;
    if !job.prepared.gap.gapless {
        row.regime = Some(schedule::classify_regime(total_time, gap).regime);
    }
    match metrics::evaluate(&trace, cd, &job.prepared.ground, gap, config.coherence_basis) {
        Ok(m) => {
            row.c_p = m.mean_coherence;
            row.de_avg = m.avg_energy_fluctuation;
            row.tau_qsl = m.qsl_time;
            row.p_success = m.success_probability;
            debug!(
                "seed {} l={} TΔ={} C_P={:.4} p={:.4}",
                inst.seed, job.order, job.t_delta, row.c_p, row.p_success
            );
            let series = if want_series {
                trace
                    .times
                    .iter()
                    .zip(&trace.lambdas)
                    .zip(&m.coherence_series)
                    .map(|((&t, &lambda), &coherence)| SeriesRow {
                        family: inst.family,
                        instance_seed: inst.seed,
                        order_l: job.order,
                        t_delta: job.t_delta,
                        total_time,
                        t,
                        lambda,
                        coherence,
                    })
                    .collect()
            } else {
                vec![]
            };
            (row, series)
        }
        Err(e) => {
            warn!("seed {} order {} TΔ {}: {e}", inst.seed, job.order, job.t_delta);
            (row, vec![])
        }
    }
}

fn write_records<W: Write, T: Serialize>(records: &[T], header: &[&str], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_rows_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    write_records(rows, &CSV_HEADER, out)
}

pub fn write_series_csv<W: Write>(rows: &[SeriesRow], out: W) -> Result<()> {
    write_records(rows, &SERIES_HEADER, out)
}

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<()> {
    write_records(
        rows,
        &["order_l", "t_delta", "runs", "flagged", "C_P", "dE_avg", "tau_qsl", "p_success"],
        out,
    )
}

/// Checks a header against the expected columns and describes any difference.
pub fn check_header(found: &[&str], expected: &[&str]) -> Result<()> {
    if found == expected {
        return Ok(());
    }
    let missing: Vec<&str> = expected.iter().filter(|c| !found.contains(c)).copied().collect();
    let extra: Vec<&str> = found.iter().filter(|c| !expected.contains(c)).copied().collect();
    let detail = if missing.is_empty() && extra.is_empty() {
        format!("columns out of order: expected {expected:?}, found {found:?}")
    } else {
        format!("missing columns {missing:?}, unexpected columns {extra:?}")
    };
    Err(CdqcError::Validation(format!("CSV schema mismatch: {detail}")))
}

fn read_records<R: Read, T: for<'de> Deserialize<'de>>(input: R, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let found = rdr.headers()?.clone();
    let found: Vec<&str> = found.iter().collect();
    check_header(&found, header)?;
    rdr.deserialize().map(|r| r.map_err(CdqcError::from)).collect()
}

pub fn read_rows_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    read_records(input, &CSV_HEADER)
}

pub fn read_series_csv<R: Read>(input: R) -> Result<Vec<SeriesRow>> {
    read_records(input, &SERIES_HEADER)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_family(Family::RandomQubo);
        cfg.n_qubits = Some(3);
        cfg.ensemble_size = Some(2);
        cfg.orders = vec![0, 1];
        cfg.t_grid = TGrid::explicit(vec![0.1, 1.0]);
        cfg.integrator.n_samples = 21;
        cfg.gap_grid = 21;
        cfg.workers = Some(2);
        cfg
    }

    #[test]
    fn default_grid_is_log_uniform() {
        let g = TGrid::default().t_deltas().unwrap();
        assert_eq!(g.len(), 30);
        assert!((g[0] - 1e-2).abs() < 1e-15);
        assert!((g[29] - 1e2).abs() < 1e-11);
        let r = g[1] / g[0];
        assert!(g.windows(2).all(|w| (w[1] / w[0] - r).abs() < 1e-12));
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config();
        cfg.orders = vec![1, 1];
        assert!(matches!(cfg.validate(), Err(CdqcError::Config(_))));
        let mut cfg = tiny_config();
        cfg.t_grid = TGrid::explicit(vec![1.0, 0.5]);
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.ensemble_size = Some(0);
        assert!(cfg.validate().is_err());
        let mut cfg = tiny_config();
        cfg.instance_files = vec!["x.txt".into()];
        assert!(cfg.validate().is_err());
        assert!(tiny_config().validate().is_ok());
    }

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = ExperimentConfig::from_toml_str("family = \"random_qubo\"\n").unwrap();
        assert_eq!(cfg.orders, vec![0, 1, 2, 3]);
        assert_eq!(cfg.ensemble(), 20);
        assert_eq!(cfg.t_grid.t_deltas().unwrap().len(), 30);
        let tiny = tiny_config();
        let back = ExperimentConfig::from_toml_str(&tiny.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, tiny);
        assert!(ExperimentConfig::from_toml_str("family = \"random_qubo\"\nbogus = 1\n").is_err());
    }

    #[test]
    fn heisenberg_sweep_sets_ensemble() {
        let text = "family = \"heisenberg\"\n[params]\nbeta_sweep = [0.2, 0.5]\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.ensemble(), 2);
        let inst = cfg.build_instance(1).unwrap();
        assert_eq!(inst.params, problems::ProblemParams::Heisenberg { g: 1.0, j: 0.2, beta: 0.5 });
        assert_eq!(inst.seed, 1);
    }

    #[test]
    fn factorization_widths_follow_params() {
        let text = "family = \"factorization\"\n[params]\nN = 143\n";
        let cfg = ExperimentConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.ensemble(), 1);
        assert_eq!(cfg.build_instance(0).unwrap().n_qubits, 6);
        let clash = "family = \"factorization\"\nn_qubits = 5\n[params]\nN = 143\nn_x = 3\nn_y = 3\n";
        assert!(ExperimentConfig::from_toml_str(clash).is_err());
    }

    #[test]
    fn rows_sorted_and_deterministic() {
        let cfg = tiny_config();
        let a = run_experiment(&cfg).unwrap();
        assert_eq!(a.rows.len(), 2 * 2 * 2);
        let keys: Vec<(u64, usize, f64)> = a.rows.iter().map(|r| (r.instance_seed, r.order_l, r.t_delta)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        assert_eq!(keys, sorted);
        let mut single = cfg.clone();
        single.workers = Some(1);
        let b = run_experiment(&single).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_rows_csv(&a.rows, &mut x).unwrap();
        write_rows_csv(&b.rows, &mut y).unwrap();
        assert_eq!(x, y);
        assert_eq!(a.flagged(), 0);
    }

    #[test]
    fn csv_round_trip_and_schema_diff() {
        let out = run_experiment(&tiny_config()).unwrap();
        let mut buf = Vec::new();
        write_rows_csv(&out.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
        assert_eq!(read_rows_csv(&buf[..]).unwrap(), out.rows);
        let broken = text.replacen("tau_qsl", "tau", 1);
        let err = read_rows_csv(broken.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("tau_qsl") && err.contains("\"tau\""), "{err}");
    }

    #[test]
    fn summary_means_per_order_and_t_delta() {
        let out = run_experiment(&tiny_config()).unwrap();
        let s = out.summary();
        assert_eq!(s.len(), 4);
        let first: Vec<&ResultRow> = out.rows.iter().filter(|r| r.order_l == 0 && r.t_delta == 0.1).collect();
        let mean = first.iter().map(|r| r.c_p).sum::<f64>() / first.len() as f64;
        assert_eq!(s[0].runs, 2);
        assert!((s[0].c_p - mean).abs() < 1e-15);
    }

    #[test]
    fn series_rows_cover_every_sample() {
        let mut cfg = tiny_config();
        cfg.output.series = Some("series.csv".into());
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.series.len(), out.rows.len() * 21);
        assert_eq!(out.series[0].t, 0.0);
        assert!(out.series[0].coherence.abs() < 1e-9);
    }

    #[test]
    fn flagging() {
        let mut row = ResultRow {
            family: Family::RandomQubo,
            instance_seed: 0,
            n_qubits: 2,
            order_l: 0,
            total_time: 1.0,
            t_delta: 1.0,
            regime: Some(Regime::Intermediate),
            c_p: 0.1,
            de_avg: 0.1,
            tau_qsl: 0.5,
            p_success: 0.9,
            norm_drift: 1e-14,
            gamma_residual_max: 0.0,
        };
        assert!(!row.is_flagged());
        row.norm_drift = 1e-6;
        assert!(row.is_flagged());
        row.norm_drift = 1e-14;
        row.regime = None;
        assert!(row.is_flagged());
    }
}
