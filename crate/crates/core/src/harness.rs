//! Seeded experiment batches: problems × methods × seeds.
//!
//! An [`ExperimentSpec`] is a TOML document:
//!
//! ```toml
//! eps = 1e-4
//! max_steps = 100000
//! output_path = "runs/biweight"
//! assert_lemmas = false
//! seeds = { start = 0, end = 100 }
//!
//! [problem]
//! kind = "biweight"
//!
//! [[methods]]
//! kind = "gd"
//!
//! [[methods]]
//! kind = "guarded"
//! mode = "practical"
//! ```
//!
//! Every `(method, seed)` run writes `traces/<label>__seed<k>.jsonl`; the
//! batch writes `summary.csv` (one [`SummaryRow`] per run) and
//! `summary.json` (per-method aggregates). Identical specs give
//! byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{run_gd, run_ncg, run_ragd, BaselineConfig};
use crate::driver::{run_guarded, GuardedConfig, Mode};
use crate::error::{OptError, Result};
use crate::oracle::{CountingOracle, Objective, Oracle};
use crate::problems::{double_well, ripple, BiweightInstance, Quadratic};
use crate::rng::CounterRng;
use crate::trace::RunTrace;
use crate::vector::Vector;

/// Environment variable that relocates relative output paths.
pub const OUT_ROOT_ENV: &str = "NCAGD_OUT_ROOT";

/// Quantiles reported in the step-count distribution.
pub const CDF_QUANTILES: [f64; 5] = [0.1, 0.25, 0.5, 0.75, 0.9];

const START_STREAM: u64 = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Robust regression; the start point is the origin.
    Biweight {
        #[serde(default = "default_d")]
        d: usize,
        #[serde(default = "default_m")]
        m: usize,
    },
    /// Log-spaced spectrum from 1 to `kappa`; seeded standard normal start.
    Quadratic { dim: usize, kappa: f64 },
    /// Seeded start uniform on `[−start_scale, start_scale]^dim`.
    DoubleWell {
        dim: usize,
        #[serde(default = "default_scale")]
        start_scale: f64,
    },
    /// `Σ cos(xᵢ)`; seeded start uniform on `[−start_scale, start_scale]^dim`.
    Ripple {
        dim: usize,
        #[serde(default = "default_scale")]
        start_scale: f64,
    },
}

fn default_d() -> usize {
    crate::problems::BIWEIGHT_DIM
}

fn default_m() -> usize {
    crate::problems::BIWEIGHT_SAMPLES
}

fn default_scale() -> f64 {
    0.1
}

fn default_true() -> bool {
    true
}

fn default_c1() -> f64 {
    0.01
}

fn default_one() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MethodSpec {
    Gd {
        label: Option<String>,
    },
    Ragd {
        label: Option<String>,
    },
    Ncg {
        label: Option<String>,
    },
    Guarded {
        mode: Mode,
        label: Option<String>,
        #[serde(default = "default_true")]
        nc_exploit: bool,
        #[serde(default = "default_c1")]
        c1: f64,
        #[serde(default = "default_one")]
        check_interval: usize,
        /// Overrides for the problem's advertised constants.
        l1: Option<f64>,
        l2: Option<f64>,
        l3: Option<f64>,
    },
}

impl MethodSpec {
    pub fn guarded(mode: Mode) -> Self {
        MethodSpec::Guarded {
            mode,
            label: None,
            nc_exploit: true,
            c1: default_c1(),
            check_interval: 1,
            l1: None,
            l2: None,
            l3: None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            MethodSpec::Gd { label } => label.clone().unwrap_or_else(|| "gd".into()),
            MethodSpec::Ragd { label } => label.clone().unwrap_or_else(|| "ragd".into()),
            MethodSpec::Ncg { label } => label.clone().unwrap_or_else(|| "ncg".into()),
            MethodSpec::Guarded {
                mode,
                label,
                nc_exploit,
                ..
            } => label.clone().unwrap_or_else(|| {
                let base = match mode {
                    Mode::SecondOrder => "guarded-2nd",
                    Mode::ThirdOrder => "guarded-3rd",
                    Mode::Practical => "guarded-practical",
                };
                if *nc_exploit {
                    base.to_string()
                } else {
                    format!("{base}-no-nc")
                }
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub problem: ProblemSpec,
    pub methods: Vec<MethodSpec>,
    pub seeds: SeedRange,
    pub eps: f64,
    pub max_steps: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub assert_lemmas: bool,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| OptError::Serde(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(OptError::InvalidParameter(format!("ε must be positive, got {}", self.eps)));
        }
        if self.seeds.end < self.seeds.start {
            return Err(OptError::InvalidParameter("seed range end precedes start".into()));
        }
        let mut labels: Vec<String> = self.methods.iter().map(MethodSpec::label).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(OptError::InvalidParameter("method labels must be unique".into()));
        }
        if labels.iter().any(|l| l.is_empty() || l.contains(['/', '\\'])) {
            return Err(OptError::InvalidParameter(
                "method labels must be non-empty and contain no path separators".into(),
            ));
        }
        Ok(())
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> {
        self.seeds.start..self.seeds.end
    }
}

/// Picks the output directory: an explicit path wins, then the spec's
/// `output_path`. Relative paths are placed under `$NCAGD_OUT_ROOT` when set.
pub fn resolve_output_dir(spec: &ExperimentSpec, explicit: Option<&Path>) -> PathBuf {
    let base = explicit
        .map(Path::to_path_buf)
        .or_else(|| spec.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("ncagd-out"));
    match std::env::var_os(OUT_ROOT_ENV) {
        Some(root) if base.is_relative() => PathBuf::from(root).join(base),
        _ => base,
    }
}

/// A problem instance and its start point for one seed.
pub struct Instance {
    pub objective: Box<dyn Objective>,
    pub x0: Vector,
}

pub fn build_instance(problem: &ProblemSpec, seed: u64) -> Result<Instance> {
    match *problem {
        ProblemSpec::Biweight { d, m } => {
            let (inst, _) = BiweightInstance::generate(seed, d, m);
            Ok(Instance {
                objective: Box::new(inst),
                x0: Vector::zeros(d),
            })
        }
        ProblemSpec::Quadratic { dim, kappa } => {
            let q = Quadratic::log_spaced(dim, kappa)?;
            let mut rng = CounterRng::stream(seed, START_STREAM);
            let x0 = Vector::new((0..dim).map(|_| rng.standard_normal()).collect())?;
            Ok(Instance {
                objective: Box::new(q),
                x0,
            })
        }
        ProblemSpec::DoubleWell { dim, start_scale } => {
            if !(start_scale > 0.0 && start_scale <= crate::problems::WELL_BOX) {
                return Err(OptError::InvalidParameter(format!(
                    "start_scale must lie in (0, {}]",
                    crate::problems::WELL_BOX
                )));
            }
            Ok(Instance {
                objective: Box::new(double_well(dim)),
                x0: uniform_start(seed, dim, start_scale)?,
            })
        }
        ProblemSpec::Ripple { dim, start_scale } => Ok(Instance {
            objective: Box::new(ripple(dim)),
            x0: uniform_start(seed, dim, start_scale)?,
        }),
    }
}

fn uniform_start(seed: u64, dim: usize, scale: f64) -> Result<Vector> {
    let mut rng = CounterRng::stream(seed, START_STREAM);
    Vector::new((0..dim).map(|_| scale * (2.0 * rng.uniform() - 1.0)).collect())
}

/// A zero Lipschitz constant is satisfied by any positive one; the step
/// schedules need a positive value.
fn positive_or_one(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        1.0
    }
}

pub fn guarded_config(
    method: &MethodSpec,
    objective: &dyn Objective,
    eps: f64,
    max_steps: usize,
    assert_lemmas: bool,
) -> Result<GuardedConfig> {
    let MethodSpec::Guarded {
        mode,
        nc_exploit,
        c1,
        check_interval,
        l1,
        l2,
        l3,
        ..
    } = method
    else {
        return Err(OptError::InvalidParameter("not a guarded method".into()));
    };
    let c = objective.constants();
    let l1 = l1.or(c.l1);
    let cfg = match mode {
        Mode::SecondOrder => GuardedConfig::second_order(
            eps,
            l1.ok_or(OptError::MissingConstant("L1"))?,
            positive_or_one(l2.or(c.l2).ok_or(OptError::MissingConstant("L2"))?),
        )?,
        Mode::ThirdOrder => GuardedConfig::third_order(
            eps,
            l1.ok_or(OptError::MissingConstant("L1"))?,
            positive_or_one(l3.or(c.l3).ok_or(OptError::MissingConstant("L3"))?),
        )?,
        Mode::Practical => GuardedConfig::practical(eps, *c1)?,
    };
    Ok(cfg
        .with_nc_exploit(*nc_exploit)
        .with_check_interval(*check_interval)
        .with_max_total_steps(max_steps)
        .with_trace(true)
        .with_lemma_checks(assert_lemmas))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub seed: u64,
    pub converged: bool,
    pub steps: u64,
    pub n_gradient: u64,
    pub n_value: u64,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub witness_events: u64,
    pub nc_exploit_wins: u64,
    pub assertion_failures: u64,
    /// Empty when the run completed.
    pub error: String,
}

/// One finished run.
pub struct RunOutput {
    pub row: SummaryRow,
    pub trace: RunTrace,
    pub violations: Vec<String>,
}

pub fn run_one(spec: &ExperimentSpec, method: &MethodSpec, seed: u64) -> RunOutput {
    let label = method.label();
    match run_one_inner(spec, method, seed, &label) {
        Ok(out) => out,
        Err(e) => {
            let trace = match &e {
                OptError::MaxIterations { trace, .. } => (**trace).clone(),
                _ => RunTrace::enabled(),
            };
            RunOutput {
                row: SummaryRow {
                    method: label,
                    seed,
                    converged: false,
                    steps: 0,
                    n_gradient: 0,
                    n_value: 0,
                    f_final: f64::NAN,
                    grad_norm_final: f64::NAN,
                    witness_events: 0,
                    nc_exploit_wins: 0,
                    assertion_failures: 0,
                    error: e.to_string(),
                },
                trace,
                violations: Vec::new(),
            }
        }
    }
}

fn run_one_inner(
    spec: &ExperimentSpec,
    method: &MethodSpec,
    seed: u64,
    label: &str,
) -> Result<RunOutput> {
    let inst = build_instance(&spec.problem, seed)?;
    let mut oracle = CountingOracle::new(inst.objective.as_ref());
    let base = BaselineConfig::new(spec.eps, spec.max_steps).with_trace(true);
    let baseline = match method {
        MethodSpec::Gd { .. } => Some(run_gd(&mut oracle, &inst.x0, &base)?),
        MethodSpec::Ragd { .. } => Some(run_ragd(&mut oracle, &inst.x0, &base)?),
        MethodSpec::Ncg { .. } => Some(run_ncg(&mut oracle, &inst.x0, &base)?),
        MethodSpec::Guarded { .. } => None,
    };
    if let Some(r) = baseline {
        return Ok(RunOutput {
            row: SummaryRow {
                method: label.to_string(),
                seed,
                converged: r.converged,
                steps: r.steps as u64,
                n_gradient: r.counters.n_gradient,
                n_value: r.counters.n_value,
                f_final: r.f_final,
                grad_norm_final: r.grad_norm_final,
                witness_events: 0,
                nc_exploit_wins: 0,
                assertion_failures: 0,
                error: String::new(),
            },
            trace: r.trace,
            violations: Vec::new(),
        });
    }
    let cfg = guarded_config(
        method,
        inst.objective.as_ref(),
        spec.eps,
        spec.max_steps,
        spec.assert_lemmas,
    )?;
    let r = run_guarded(&mut oracle, &inst.x0, &cfg)?;
    debug_assert_eq!(r.counters, oracle.counters());
    Ok(RunOutput {
        row: SummaryRow {
            method: label.to_string(),
            seed,
            converged: r.converged,
            steps: r.steps as u64,
            n_gradient: r.counters.n_gradient,
            n_value: r.counters.n_value,
            f_final: r.f_final,
            grad_norm_final: r.grad_norm_final,
            witness_events: r.witness_events as u64,
            nc_exploit_wins: r.nc_exploit_wins as u64,
            assertion_failures: r.lemma_violations.len() as u64,
            error: String::new(),
        },
        trace: r.trace,
        violations: r.lemma_violations,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantilePoint {
    pub quantile: f64,
    /// `None` when the quantile falls among unconverged runs.
    pub steps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub converged: usize,
    pub errors: usize,
    pub convergence_fraction: f64,
    /// Unconverged runs count as infinitely many steps; `None` if the median
    /// is one of them.
    pub median_steps: Option<f64>,
    pub cdf: Vec<QuantilePoint>,
    pub total_steps: u64,
    pub total_n_gradient: u64,
    pub total_n_value: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub methods: Vec<MethodSummary>,
}

/// Empirical quantile with linear interpolation over sorted values, where
/// infinite entries stand for censored runs.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let v = if lo == hi {
        sorted[lo]
    } else {
        let w = pos - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    v.is_finite().then_some(v)
}

/// Fraction of runs converged within `steps` steps.
pub fn empirical_cdf(rows: &[&SummaryRow], steps: u64) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.converged && r.steps <= steps).count() as f64 / rows.len() as f64
}

/// Per-method aggregates, methods in order of first appearance.
pub fn summarize(rows: &[SummaryRow]) -> Summary {
    let mut order: Vec<&str> = Vec::new();
    for r in rows {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    let methods = order
        .into_iter()
        .map(|m| {
            let mine: Vec<&SummaryRow> = rows.iter().filter(|r| r.method == m).collect();
            let mut steps: Vec<f64> = mine
                .iter()
                .map(|r| if r.converged { r.steps as f64 } else { f64::INFINITY })
                .collect();
            steps.sort_by(f64::total_cmp);
            let converged = mine.iter().filter(|r| r.converged).count();
            MethodSummary {
                method: m.to_string(),
                runs: mine.len(),
                converged,
                errors: mine.iter().filter(|r| !r.error.is_empty()).count(),
                convergence_fraction: if mine.is_empty() {
                    0.0
                } else {
                    converged as f64 / mine.len() as f64
                },
                median_steps: quantile(&steps, 0.5),
                cdf: CDF_QUANTILES
                    .iter()
                    .map(|&q| QuantilePoint {
                        quantile: q,
                        steps: quantile(&steps, q),
                    })
                    .collect(),
                total_steps: mine.iter().map(|r| r.steps).sum(),
                total_n_gradient: mine.iter().map(|r| r.n_gradient).sum(),
                total_n_value: mine.iter().map(|r| r.n_value).sum(),
            }
        })
        .collect();
    Summary { methods }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |v| format!("{v:.1}"))
}

pub fn format_table(summary: &Summary) -> String {
    let mut s = format!(
        "{:<28} {:>6} {:>9} {:>10} {:>10} {:>10} {:>12} {:>12}\n",
        "method", "runs", "conv", "median", "q25", "q75", "gradients", "values"
    );
    for m in &summary.methods {
        let q = |p: f64| fmt_opt(m.cdf.iter().find(|c| c.quantile == p).and_then(|c| c.steps));
        s.push_str(&format!(
            "{:<28} {:>6} {:>9.3} {:>10} {:>10} {:>10} {:>12} {:>12}\n",
            m.method,
            m.runs,
            m.convergence_fraction,
            fmt_opt(m.median_steps),
            q(0.25),
            q(0.75),
            m.total_n_gradient,
            m.total_n_value
        ));
    }
    s
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub rows: Vec<SummaryRow>,
    pub summary: Summary,
    pub violations: Vec<String>,
    pub out_dir: PathBuf,
}

impl ExperimentReport {
    /// 0 on success, 2 if any run errored, 3 if an enabled assertion failed.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| !r.error.is_empty()) {
            2
        } else if self.rows.iter().any(|r| r.assertion_failures > 0) {
            3
        } else {
            0
        }
    }
}

pub fn trace_file_name(method: &str, seed: u64) -> String {
    format!("{method}__seed{seed}.jsonl")
}

/// Runs every `(method, seed)` pair on `parallelism` threads (0 = rayon's
/// default) and writes traces and summaries under `out_dir`.
pub fn run_experiment(
    spec: &ExperimentSpec,
    out_dir: &Path,
    parallelism: usize,
) -> Result<ExperimentReport> {
    spec.validate()?;
    let traces = out_dir.join("traces");
    fs::create_dir_all(&traces)?;
    let jobs: Vec<(&MethodSpec, u64)> = spec
        .seeds()
        .flat_map(|s| spec.methods.iter().map(move |m| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| OptError::InvalidParameter(e.to_string()))?;
    let outputs: Vec<Result<(SummaryRow, Vec<String>)>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(m, seed)| {
                let out = run_one(spec, m, seed);
                let path = traces.join(trace_file_name(&out.row.method, seed));
                let mut w = BufWriter::new(fs::File::create(path)?);
                out.trace.write_jsonl(&mut w)?;
                w.flush()?;
                let tagged = out
                    .violations
                    .into_iter()
                    .map(|v| format!("{} seed {seed}: {v}", out.row.method))
                    .collect();
                Ok((out.row, tagged))
            })
            .collect()
    });
    let mut rows = Vec::with_capacity(outputs.len());
    let mut violations = Vec::new();
    for o in outputs {
        let (row, v) = o?;
        rows.push(row);
        violations.extend(v);
    }
    let summary = summarize(&rows);
    write_summary(out_dir, &rows, &summary)?;
    Ok(ExperimentReport {
        rows,
        summary,
        violations,
        out_dir: out_dir.to_path_buf(),
    })
}

pub fn write_summary(out_dir: &Path, rows: &[SummaryRow], summary: &Summary) -> Result<()> {
    let mut w = csv::Writer::from_path(out_dir.join("summary.csv"))?;
    if rows.is_empty() {
        w.write_record(SUMMARY_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    fs::write(out_dir.join("summary.json"), text)?;
    Ok(())
}

/// Column order of `summary.csv`.
pub const SUMMARY_HEADER: [&str; 12] = [
    "method",
    "seed",
    "converged",
    "steps",
    "n_gradient",
    "n_value",
    "f_final",
    "grad_norm_final",
    "witness_events",
    "nc_exploit_wins",
    "assertion_failures",
    "error",
];

pub fn read_summary_csv(path: &Path) -> Result<Vec<SummaryRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(OptError::from)).collect()
}

/// Sum of the final counter snapshot of each trace file in `dir/traces`.
pub fn trace_gradient_total(dir: &Path) -> Result<u64> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir.join("traces"))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    names.sort();
    let mut total = 0;
    for p in names {
        let t = RunTrace::read_jsonl(&fs::read_to_string(&p)?)?;
        total += t.records().last().map_or(0, |r| r.n_gradient);
    }
    Ok(total)
}

/// Outcome of a lemma-assertion campaign.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CampaignReport {
    pub runs: usize,
    pub converged: usize,
    pub witness_events: usize,
    pub violations: Vec<String>,
}

/// Runs both theoretical modes with all runtime checks on double-well
/// instances of dimension `dim` for the given seeds.
pub fn lemma_campaign(dim: usize, seeds: SeedRange, eps: f64) -> Result<CampaignReport> {
    let problem = ProblemSpec::DoubleWell {
        dim,
        start_scale: default_scale(),
    };
    let mut rep = CampaignReport::default();
    for seed in seeds.start..seeds.end {
        for mode in [Mode::SecondOrder, Mode::ThirdOrder] {
            let inst = build_instance(&problem, seed)?;
            let cfg = GuardedConfig::from_constants(mode, eps, &inst.objective.constants())?
                .with_lemma_checks(true);
            let mut o = CountingOracle::new(inst.objective.as_ref());
            let r = run_guarded(&mut o, &inst.x0, &cfg)?;
            rep.runs += 1;
            rep.converged += r.converged as usize;
            rep.witness_events += r.witness_events;
            rep.violations.extend(
                r.lemma_violations
                    .into_iter()
                    .map(|v| format!("{mode:?} seed {seed}: {v}")),
            );
        }
    }
    Ok(rep)
}
