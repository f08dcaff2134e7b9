//! Life-span sweeps over the data size `eps` and their power-law fits.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_json;
use crate::nonlinear_solver::{run, BreakdownReason, RunConfig};

/// Environment variable consulted for the worker count when no explicit
/// count is given.
pub const WORKERS_ENV: &str = "HGF_WORKERS";

/// The life-span exponent: `T_eps ~ eps^{-4/3}`.
pub const LIFESPAN_EXPONENT: f64 = 4.0 / 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub epsilons: Vec<f64>,
    /// Simulated horizon per run; overrides the template's `t_max`.
    pub budget: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    pub run: RunConfig,
}

impl SweepConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() {
            return Err(Error::InvalidConfig("empty eps list".into()));
        }
        if self.epsilons.iter().any(|e| !(*e >= 0.0) || !e.is_finite()) {
            return Err(Error::InvalidConfig("eps values must be finite and nonnegative".into()));
        }
        let mut sorted = self.epsilons.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidConfig("eps values must be distinct".into()));
        }
        if !(self.budget > 0.0) || !self.budget.is_finite() {
            return Err(Error::InvalidConfig(format!("budget must be positive, got {}", self.budget)));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        Ok(())
    }

    /// The run configuration for one `eps`.
    pub fn run_config(&self, epsilon: f64) -> RunConfig {
        let mut c = self.run.clone();
        c.params.epsilon = epsilon;
        c.t_max = self.budget;
        c.keep_snapshots = false;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanRecord {
    pub epsilon: f64,
    #[serde(rename = "T_star")]
    pub t_star: f64,
    pub censored: bool,
    pub reason: BreakdownReason,
    /// Largest `(1+t)^{1/2} N2 / eps` along the run.
    #[serde(rename = "peak_weighted_N2")]
    pub peak_weighted_n2: f64,
    /// `eps (1 + T_star)^{3/4}`, the largest value of the bootstrap
    /// smallness quantity along the run.
    pub max_bootstrap_weight: f64,
}

/// A sweep that stopped on an error, with the runs that did complete.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepError {
    pub completed: Vec<LifespanRecord>,
    pub error: Error,
}

impl fmt::Display for SweepError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sweep aborted after {} completed runs: {}", self.completed.len(), self.error)
    }
}

impl std::error::Error for SweepError {}

/// Worker count: explicit value, else [`WORKERS_ENV`], else the config,
/// else the available parallelism.
pub fn resolve_workers(explicit: Option<usize>, cfg: &SweepConfig) -> usize {
    explicit
        .or_else(|| std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse().ok()))
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
}

pub fn run_record(cfg: &RunConfig) -> Result<LifespanRecord> {
    let out = run::<f64>(cfg)?;
    let eps = cfg.params.epsilon;
    let t_star = out.breakdown.time;
    Ok(LifespanRecord {
        epsilon: eps,
        t_star,
        censored: out.breakdown.is_censored(),
        reason: out.breakdown.reason,
        peak_weighted_n2: out.peak_weighted_n2(eps),
        max_bootstrap_weight: eps * (1.0 + t_star).powf(0.75),
    })
}

fn sort_records(records: &mut [LifespanRecord]) {
    records.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
}

/// One run per `eps` on a pool of `workers` threads; records are sorted by
/// decreasing `eps`.
pub fn sweep(cfg: &SweepConfig, workers: usize) -> std::result::Result<Vec<LifespanRecord>, SweepError> {
    let fail = |error| SweepError { completed: Vec::new(), error };
    cfg.validate().map_err(fail)?;
    let configs: Vec<RunConfig> = cfg.epsilons.iter().map(|e| cfg.run_config(*e)).collect();
    for c in &configs {
        c.validate().map_err(fail)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| fail(Error::InvalidConfig(e.to_string())))?;
    let results: Vec<Result<LifespanRecord>> = pool.install(|| configs.par_iter().map(run_record).collect());
    let mut completed = Vec::new();
    let mut first_error = None;
    for r in results {
        match r {
            Ok(rec) => completed.push(rec),
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
    }
    sort_records(&mut completed);
    match first_error {
        Some(error) => Err(SweepError { completed, error }),
        None => Ok(completed),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Ok,
    Insufficient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    /// `min T_star eps^{4/3}` over breakdowns; over censoring horizons (a
    /// lower estimate) when every run is censored.
    pub delta_cal: f64,
    pub n_censored: usize,
    pub n_fit: usize,
    pub status: FitStatus,
}

/// Least squares of `ln T_star` on `ln eps` over the uncensored records.
pub fn fit_exponent(records: &[LifespanRecord]) -> Result<FitResult> {
    if records.is_empty() {
        return Err(Error::EmptySample("no lifespan records".into()));
    }
    let usable = |r: &&LifespanRecord| r.epsilon > 0.0 && r.t_star > 0.0;
    let broken: Vec<&LifespanRecord> = records.iter().filter(|r| !r.censored).filter(usable).collect();
    let n_censored = records.iter().filter(|r| r.censored).count();
    let weighted = |r: &&LifespanRecord| r.t_star * r.epsilon.powf(LIFESPAN_EXPONENT);
    let delta_cal = if broken.is_empty() {
        records.iter().filter(usable).map(|r| weighted(&r)).fold(f64::INFINITY, f64::min)
    } else {
        broken.iter().map(weighted).fold(f64::INFINITY, f64::min)
    };
    let mut fit = FitResult { slope: None, intercept: None, delta_cal, n_censored, n_fit: broken.len(), status: FitStatus::Insufficient };
    if broken.len() >= 3 {
        let n = broken.len() as f64;
        let xs: Vec<f64> = broken.iter().map(|r| r.epsilon.ln()).collect();
        let ys: Vec<f64> = broken.iter().map(|r| r.t_star.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx > 0.0 {
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let slope = sxy / sxx;
            fit.slope = Some(slope);
            fit.intercept = Some(my - slope * mx);
            fit.status = FitStatus::Ok;
        }
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundVerdict {
    Pass,
    Fail,
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub epsilon: f64,
    pub t_star: f64,
    /// `delta eps^{-4/3} - 1`.
    pub bound: f64,
    pub verdict: BoundVerdict,
}

/// Compares each record with `delta eps^{-4/3} - 1`. A censored record
/// whose horizon falls short of the bound is indeterminate.
pub fn check_lower_bound(records: &[LifespanRecord], delta: f64) -> Result<Vec<BoundCheck>> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig(format!("delta must be positive, got {delta}")));
    }
    Ok(records
        .iter()
        .map(|r| {
            let bound = if r.epsilon > 0.0 { delta * r.epsilon.powf(-LIFESPAN_EXPONENT) - 1.0 } else { f64::INFINITY };
            let verdict = match (r.t_star >= bound, r.censored) {
                (true, _) => BoundVerdict::Pass,
                (false, true) => BoundVerdict::Indeterminate,
                (false, false) => BoundVerdict::Fail,
            };
            BoundCheck { epsilon: r.epsilon, t_star: r.t_star, bound, verdict }
        })
        .collect())
}

/// Pairs `(larger eps, smaller eps)` whose life-spans increase with `eps`
/// by more than `slack`. Not proven to be impossible, only suspicious.
pub fn monotonicity_flags(records: &[LifespanRecord], slack: f64) -> Vec<(f64, f64)> {
    let mut sorted: Vec<&LifespanRecord> = records.iter().collect();
    sorted.sort_by(|a, b| b.epsilon.total_cmp(&a.epsilon));
    sorted
        .windows(2)
        .filter(|w| !w[1].censored && w[0].t_star > w[1].t_star + slack)
        .map(|w| (w[0].epsilon, w[1].epsilon))
        .collect()
}

#[derive(Serialize)]
struct CsvRecord {
    epsilon: f64,
    #[serde(rename = "T_star")]
    t_star: f64,
    censored: bool,
    reason: BreakdownReason,
    #[serde(rename = "peak_weighted_N2")]
    peak_weighted_n2: f64,
}

pub fn write_records_csv(path: &Path, records: &[LifespanRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(CsvRecord {
            epsilon: r.epsilon,
            t_star: r.t_star,
            censored: r.censored,
            reason: r.reason,
            peak_weighted_n2: r.peak_weighted_n2,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// A gnuplot script drawing `T_star` against `eps` on log axes with the
/// reference line `delta_cal eps^{-4/3}`.
pub fn plot_script(fit: &FitResult) -> String {
    let delta = if fit.delta_cal.is_finite() { fit.delta_cal } else { 1.0 };
    format!(
        "set datafile separator ','\n\
         set logscale xy\n\
         set key top right\n\
         set xlabel 'epsilon'\n\
         set ylabel 'T_star'\n\
         set title 'life-span sweep'\n\
         delta_cal = {delta:e}\n\
         ref(x) = delta_cal * x**(-4.0/3.0)\n\
         set terminal pngcairo size 800,600\n\
         set output 'lifespan.png'\n\
         plot 'records.csv' every ::1 using 1:($3 eq \"false\" ? $2 : 1/0) with points pt 7 title 'breakdown', \\\n\
         \x20    'records.csv' every ::1 using 1:($3 eq \"true\" ? $2 : 1/0) with points pt 6 title 'censored', \\\n\
         \x20    ref(x) with lines dt 2 title 'delta_cal eps^(-4/3)'\n"
    )
}

/// `records.csv`, `records.json`, `fit.json` and `plot.gp` in `dir`.
pub fn write_sweep_outputs(dir: &Path, records: &[LifespanRecord], fit: &FitResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_records_csv(&dir.join("records.csv"), records)?;
    write_json(&dir.join("records.json"), &records)?;
    write_json(&dir.join("fit.json"), fit)?;
    std::fs::write(dir.join("plot.gp"), plot_script(fit))?;
    Ok(())
}
