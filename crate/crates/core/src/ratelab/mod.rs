//! Monte Carlo measurement of convergence rates: for each `n` of a grid,
//! compare `M` sampled paths of `B_n` (or `W_n`) against `M` Brownian paths
//! with the limiting covariance, fit the log-log slope of the median distance
//! and set it next to the proven exponent.
//!
//! Work is split into independent items seeded by `(replicate seed, atom)`,
//! so results do not depend on thread count or scheduling. Within a
//! replicate the same orbits and Brownian paths are reused for every `n`
//! (common random numbers), which removes most of the between-`n` sampling
//! noise from the fitted slope.

mod config;
mod exponent;
mod fit;
mod output;

pub use config::{
    ComponentSpec, ExperimentConfig, GreenKuboSpec, MapSpec, Metric, ObservableSpec, Process,
    RoofSpec, SigmaSpec, SystemSpec,
};
pub use exponent::{theoretical_exponent, Exponent, RateSetting};
pub use fit::{fit_log_corrected, fit_loglog, CorrectedFit, LogLogFit, MIN_FIT_POINTS};
pub use output::{write_distances_csv, write_outputs, write_summary_csv};

use std::iter;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decomp::{
    clamp_psd, green_kubo_profile, primary_decomposition_with, DecompError, DecompOptions,
    FlowDecomposition, Function, TransferOperator, TrigPoly,
};
use crate::dynsys::{DynError, MapKind, MapSystem, OrbitSampler};
use crate::otmetrics::{
    prokhorov_from_costs, wasserstein1_from_costs, CostMatrix, DistanceRecord, OtError,
    ASSIGNMENT_SOLVER, MATCHING_SOLVER,
};
use crate::pathspace::{
    build_bn, build_wn_multi, BrownianFactor, EmpiricalPathMeasure, PathError, PiecewisePath,
};
use crate::rng::{mix, stream_rng, RNG_ALGORITHM};
use crate::suspension::{FlowObservable, SuspensionError, SuspensionFlow};
use crate::Observable;

const TAG_ORBIT: u64 = 1;
const TAG_BROWNIAN: u64 = 2;
const TAG_SIGMA: u64 = 3;

pub const BIAS_CAVEAT: &str = "Distances are between two M-atom empirical measures, so each value carries an \
estimator bias of the order of the empirical W1/Prokhorov distance between two independent M-samples of the same \
law on the d-point grid. At desk-scale n this bias can dominate the true distance and flatten fitted slopes; \
slopes are not claimed to converge to the theoretical exponents, which are upper bounds.";

#[derive(Debug, Error)]
pub enum RatelabError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("outside the proven regime: {0}")]
    OutOfRegime(String),
    #[error("log-log fit needs positive values, got {value} at n = {n}")]
    NonPositiveValue { n: f64, value: f64 },
    #[error("log-log fit needs at least {need} points, got {got}")]
    TooFewPoints { need: usize, got: usize },
    #[error("replicate seed {seed}{}: {source}", n.map(|n| format!(", n = {n}")).unwrap_or_default())]
    Item {
        n: Option<usize>,
        seed: u64,
        #[source]
        source: Box<RatelabError>,
    },
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Ot(#[from] OtError),
    #[error(transparent)]
    Dyn(#[from] DynError),
    #[error(transparent)]
    Suspension(#[from] SuspensionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl RatelabError {
    /// Whether the error stems from the configuration rather than a solver.
    pub fn is_config(&self) -> bool {
        match self {
            RatelabError::Config(_) | RatelabError::OutOfRegime(_) => true,
            RatelabError::Item { source, .. } => source.is_config(),
            _ => false,
        }
    }

    fn at(self, seed: u64, n: Option<usize>) -> Self {
        RatelabError::Item {
            n,
            seed,
            source: Box::new(self),
        }
    }
}

/// `v(x) − shift` for a vector of trigonometric polynomials.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigObservable {
    polys: Vec<TrigPoly>,
    shift: Vec<f64>,
}

impl TrigObservable {
    pub fn new(polys: Vec<TrigPoly>, shift: Vec<f64>) -> Self {
        assert_eq!(polys.len(), shift.len());
        Self { polys, shift }
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    fn to_flow(&self) -> FlowObservable {
        let me = self.clone();
        FlowObservable::height_independent(self.polys.len(), move |x, out| me.eval_into(x, out))
    }
}

impl Observable for TrigObservable {
    fn dim(&self) -> usize {
        self.polys.len()
    }

    fn eval_into(&self, x: f64, out: &mut [f64]) {
        for ((o, p), s) in out.iter_mut().zip(&self.polys).zip(&self.shift) {
            *o = p.eval(x) - s;
        }
    }
}

/// Everything a run needs besides the seeds: the process, the centred
/// observable and the covariance of the Brownian limit.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub process: Process,
    pub observable: TrigObservable,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_source: String,
}

/// Mean of `f` over `len` points of the sampler's first orbit stream.
fn orbit_mean(
    sampler: &OrbitSampler,
    len: usize,
    dim: usize,
    f: impl Fn(f64, &mut [f64]),
) -> Vec<f64> {
    let mut stream = sampler.stream(0);
    let mut acc = vec![0.0; dim];
    let mut val = vec![0.0; dim];
    f(stream.current(), &mut val);
    acc.iter_mut().zip(&val).for_each(|(a, v)| *a += v);
    for _ in 1..len {
        f(stream.advance(), &mut val);
        acc.iter_mut().zip(&val).for_each(|(a, v)| *a += v);
    }
    acc.iter().map(|a| a / len as f64).collect()
}

/// Green–Kubo for an LSV base. With `γ > 1/3` the lag-`k` covariance decays
/// only like `k^{-(1/γ-1)}`, so the truncated sum misses a tail of order
/// `L^{-(1/γ-2)}`. The estimate is then the intercept of a least-squares fit
/// of `Σ̂(L)` against `L^{-(1/γ-2)}` over the upper seven eighths of lags.
fn lsv_sigma(
    sampler: &OrbitSampler,
    v: &dyn Observable,
    gamma: f64,
    gk: GreenKuboSpec,
) -> Result<(Vec<Vec<f64>>, String), RatelabError> {
    let profile = green_kubo_profile(sampler, v, gk.max_lag, gk.orbit_len)?;
    let plain = format!(
        "Green-Kubo sum, {} lags over a {}-point orbit",
        gk.max_lag, gk.orbit_len
    );
    let a = 1.0 / gamma - 2.0;
    let lo = gk.max_lag / 8;
    if a >= 1.0 || gk.max_lag - lo < 8 {
        return Ok((clamp_psd(profile.last().expect("lag 0")), plain));
    }
    let xs: Vec<f64> = (lo.max(1)..=gk.max_lag)
        .map(|l| (l as f64).powf(-a))
        .collect();
    let ys = &profile[lo.max(1)..];
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let my = ys.iter().fold(ys[0].clone() * 0.0, |acc, y| acc + y) / k;
    let sxy = xs
        .iter()
        .zip(ys)
        .fold(my.clone() * 0.0, |acc, (x, y)| acc + (y - &my) * (x - mx));
    let intercept = &my - sxy * (mx / sxx);
    Ok((
        clamp_psd(&intercept),
        format!(
            "{plain}, tail-corrected by fitting Sigma(L) = Sigma - c L^-{a:.3} over lags {lo}..{}",
            gk.max_lag
        ),
    ))
}

/// Centres the observable and obtains `Σ`: exact trigonometric decomposition
/// for the doubling map, the tabulated flow decomposition for flows over it,
/// and a long-orbit Green–Kubo sum for LSV bases.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared, RatelabError> {
    cfg.validate()?;
    let process = cfg.system.build()?;
    let polys = cfg.observable.polys();
    let dim = polys.len();
    let explicit = match &cfg.sigma {
        SigmaSpec::Matrix(m) => Some(m.clone()),
        SigmaSpec::Keyword(_) => None,
    };
    let gk = cfg.green_kubo;
    let sampler = |base: MapSystem| {
        OrbitSampler::new(base, mix(cfg.seed, TAG_SIGMA)).with_burn_in(cfg.burn_in)
    };
    let zero = vec![0.0; dim];
    let raw = TrigObservable::new(polys.clone(), zero.clone());

    let (shift, sigma, source) = match &process {
        Process::Map(sys) if sys.kind() == MapKind::Doubling => {
            let shift = if cfg.center {
                polys.iter().map(TrigPoly::mean).collect()
            } else {
                zero
            };
            let sigma = match explicit {
                Some(m) => (m, "configuration".to_owned()),
                None => {
                    let opts = DecompOptions {
                        center: cfg.center,
                        ..DecompOptions::default()
                    };
                    let d = primary_decomposition_with(
                        &TransferOperator::exact_doubling(),
                        &Function::Trig(polys.clone()),
                        &opts,
                    )?;
                    (
                        d.sigma,
                        "exact transfer-operator decomposition on trigonometric polynomials"
                            .to_owned(),
                    )
                }
            };
            (shift, sigma.0, sigma.1)
        }
        Process::Map(sys) => {
            let s = sampler(*sys);
            let shift = if cfg.center {
                orbit_mean(&s, gk.mean_orbit_len, dim, |x, o| raw.eval_into(x, o))
            } else {
                zero
            };
            let centred = TrigObservable::new(polys.clone(), shift.clone());
            let (sigma, source) = match explicit {
                Some(m) => (m, "configuration".to_owned()),
                None => lsv_sigma(&s, &centred, sys.gamma().unwrap_or(0.0), gk)?,
            };
            (shift, sigma, source)
        }
        Process::Flow(flow) => prepare_flow(cfg, flow, &raw, explicit, sampler(flow.base))?,
    };
    Ok(Prepared {
        process,
        observable: TrigObservable::new(polys, shift),
        sigma,
        sigma_source: source,
    })
}

fn prepare_flow(
    cfg: &ExperimentConfig,
    flow: &SuspensionFlow,
    raw: &TrigObservable,
    explicit: Option<Vec<Vec<f64>>>,
    sampler: OrbitSampler,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, String), RatelabError> {
    let dim = raw.dim();
    let gk = cfg.green_kubo;
    if flow.base.kind() == MapKind::Doubling {
        let shift = if cfg.center {
            flow.lebesgue_base_mean(&raw.to_flow(), cfg.cells, cfg.dt)?
        } else {
            vec![0.0; dim]
        };
        if let Some(m) = explicit {
            return Ok((shift, m, "configuration".into()));
        }
        let centred = TrigObservable::new(raw.polys.clone(), shift.clone()).to_flow();
        let opts = DecompOptions {
            cells: cfg.cells,
            mean_tol: None,
            ..DecompOptions::default()
        };
        let sigma = FlowDecomposition::new(flow, &centred, &opts)?.flow_sigma();
        let source = format!(
            "base decomposition of the roof integral on {} cells, divided by the mean roof",
            cfg.cells
        );
        return Ok((shift, sigma, source));
    }
    // v(x, u) = g(x), so the roof integral is g(x) r(x), and centring g by c
    // changes it by c r(x).
    let roof = flow.roof.clone();
    let means = orbit_mean(&sampler, gk.mean_orbit_len, dim + 1, |x, o| {
        raw.eval_into(x, &mut o[..dim]);
        let r = roof.eval(x);
        o[..dim].iter_mut().for_each(|g| *g *= r);
        o[dim] = r;
    });
    let rbar = means[dim];
    let shift: Vec<f64> = if cfg.center {
        means[..dim].iter().map(|m| m / rbar).collect()
    } else {
        vec![0.0; dim]
    };
    if let Some(m) = explicit {
        return Ok((shift, m, "configuration".into()));
    }
    let centred = TrigObservable::new(raw.polys.clone(), shift.clone());
    let induced = crate::FnObservable::new(dim, |x: f64, out: &mut [f64]| {
        centred.eval_into(x, out);
        let r = roof.eval(x);
        out.iter_mut().for_each(|g| *g *= r);
    });
    let (base_sigma, base_source) =
        lsv_sigma(&sampler, &induced, flow.base.gamma().unwrap_or(0.0), gk)?;
    let sigma = base_sigma
        .iter()
        .map(|row| row.iter().map(|s| s / rbar).collect())
        .collect();
    let source = format!(
        "{base_source}, applied to the roof integral and divided by the orbit mean of the roof"
    );
    Ok((shift, sigma, source))
}

/// Paths of one atom for every `n` of the grid, on the comparison grid.
fn atom_paths(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    seed: u64,
    atom: u64,
) -> Result<Vec<PiecewisePath>, RatelabError> {
    let n_max = *cfg.n_grid.last().expect("validated");
    match &prep.process {
        Process::Map(sys) => {
            let orbit = OrbitSampler::new(*sys, mix(seed, TAG_ORBIT))
                .with_burn_in(cfg.burn_in)
                .stream(atom)
                .take(n_max);
            cfg.n_grid
                .iter()
                .map(|&n| Ok(build_bn(&orbit, &prep.observable, n)?.restrict(cfg.d)?))
                .collect()
        }
        Process::Flow(flow) => {
            let mut stream = OrbitSampler::new(flow.base, mix(seed, TAG_ORBIT))
                .with_burn_in(cfg.burn_in)
                .stream(atom);
            let (x, u) = flow.sample_start(&mut stream);
            let orbit = iter::once(x).chain(iter::from_fn(move || Some(stream.advance())));
            let v = prep.observable.to_flow();
            Ok(build_wn_multi(
                flow,
                &v,
                orbit,
                u,
                &cfg.n_grid,
                cfg.d,
                cfg.dt,
            )?)
        }
    }
}

/// The process and Brownian samples of one replicate: `process[k]` holds the
/// `M` paths at `n_grid[k]`.
#[derive(Debug, Clone)]
pub struct ReplicateSample {
    pub seed: u64,
    pub process: Vec<EmpiricalPathMeasure>,
    pub brownian: EmpiricalPathMeasure,
}

pub fn sample_replicate(
    prep: &Prepared,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<ReplicateSample, RatelabError> {
    let factor =
        BrownianFactor::new(&prep.sigma).map_err(|e| RatelabError::from(e).at(seed, None))?;
    let atoms: Vec<Vec<PiecewisePath>> = (0..cfg.m as u64)
        .into_par_iter()
        .map(|i| atom_paths(prep, cfg, seed, i))
        .collect::<Result<_, _>>()
        .map_err(|e| e.at(seed, None))?;
    let mut process: Vec<Vec<PiecewisePath>> = cfg
        .n_grid
        .iter()
        .map(|_| Vec::with_capacity(cfg.m))
        .collect();
    for paths in atoms {
        for (k, p) in paths.into_iter().enumerate() {
            process[k].push(p);
        }
    }
    let brownian = (0..cfg.m as u64)
        .map(|i| factor.sample(cfg.d, &mut stream_rng(mix(seed, TAG_BROWNIAN), i)))
        .collect();
    Ok(ReplicateSample {
        seed,
        process: process
            .into_iter()
            .map(EmpiricalPathMeasure::new)
            .collect::<Result<_, _>>()?,
        brownian: EmpiricalPathMeasure::new(brownian)?,
    })
}

/// Median, quartiles and spread of one metric at one `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub n: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub replicates: usize,
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(n: usize, values: &[f64]) -> PointSummary {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let (q1, median, q3) = (quantile(&v, 0.25), quantile(&v, 0.5), quantile(&v, 0.75));
    PointSummary {
        n,
        median,
        q1,
        q3,
        iqr: q3 - q1,
        replicates: v.len(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub metric: Metric,
    pub points: Vec<PointSummary>,
    /// OLS of log median on log n; `None` with fewer than four points or a
    /// zero median amid nonzero ones.
    pub fit: Option<LogLogFit>,
    /// The same fit after dividing out the theoretical log factor.
    pub corrected_fit: Option<CorrectedFit>,
    pub theory: Option<Exponent>,
    /// Why `fit` or `theory` is missing, or that the medians are all zero.
    pub notes: Vec<String>,
}

impl MetricReport {
    /// Number of grid steps over which the median strictly decreases, and
    /// the number of steps.
    pub fn decreasing_steps(&self) -> (usize, usize) {
        let steps = self.points.len().saturating_sub(1);
        let down = self
            .points
            .windows(2)
            .filter(|w| w[1].median < w[0].median)
            .count();
        (down, steps)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    #[serde(rename = "M")]
    pub m: usize,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub burn_in: u64,
    pub dt: f64,
    pub assignment_solver: String,
    pub matching_solver: String,
    pub rng: String,
    pub aggregation: String,
    pub sampling: String,
    pub bias_caveat: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub name: String,
    pub system: SystemSpec,
    pub observable: Vec<TrigPoly>,
    pub mean_removed: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
    pub sigma_source: String,
    pub metrics: Vec<MetricReport>,
    pub distances: Vec<DistanceRecord>,
    pub metadata: RunMetadata,
}

impl RateReport {
    pub fn metric(&self, metric: Metric) -> Option<&MetricReport> {
        self.metrics.iter().find(|m| m.metric == metric)
    }
}

fn distances_for(
    cfg: &ExperimentConfig,
    a: &EmpiricalPathMeasure,
    b: &EmpiricalPathMeasure,
) -> Result<(Option<f64>, Option<f64>), RatelabError> {
    let cost = CostMatrix::from_measures(a, b)?;
    let w1 = cfg
        .metrics
        .contains(&Metric::W1)
        .then(|| wasserstein1_from_costs(&cost));
    let pi = cfg
        .metrics
        .contains(&Metric::Pi)
        .then(|| prokhorov_from_costs(&cost));
    Ok((w1, pi))
}

fn metric_report(
    cfg: &ExperimentConfig,
    metric: Metric,
    records: &[DistanceRecord],
    dim: usize,
) -> MetricReport {
    let mut notes = Vec::new();
    let points: Vec<PointSummary> = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let vals: Vec<f64> = records
                .iter()
                .filter(|r| r.n == Some(n as u64))
                .filter_map(|r| match metric {
                    Metric::W1 => r.w1,
                    Metric::Pi => r.pi,
                })
                .collect();
            summarize(n, &vals)
        })
        .collect();
    let setting = RateSetting {
        metric,
        p: Some(f64::INFINITY),
        dim,
        gamma: cfg.system.base().gamma(),
    };
    let theory = theoretical_exponent(&setting)
        .map_err(|e| notes.push(e.to_string()))
        .ok();
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.median)).collect();
    let (fit, corrected_fit) =
        if points.len() >= MIN_FIT_POINTS && points.iter().all(|p| p.median == 0.0) {
            notes.push("all medians are zero; slope reported as 0".into());
            let flat = LogLogFit {
                slope: 0.0,
                intercept: f64::NEG_INFINITY,
                stderr: 0.0,
                ci95: (0.0, 0.0),
                points: points.len(),
            };
            let corrected = theory.as_ref().map(|t| CorrectedFit {
                log_power: t.log_power,
                fit: flat,
            });
            (Some(flat), corrected)
        } else {
            let fit = fit_loglog(&xy).map_err(|e| notes.push(e.to_string())).ok();
            let corrected = match (&fit, &theory) {
                (Some(_), Some(t)) => fit_log_corrected(&xy, t.log_power)
                    .map_err(|e| notes.push(e.to_string()))
                    .ok(),
                _ => None,
            };
            (fit, corrected)
        };
    MetricReport {
        metric,
        points,
        fit,
        corrected_fit,
        theory,
        notes,
    }
}

/// Samples every replicate, measures every requested distance at every `n`,
/// aggregates with the median over replicates and fits the slopes.
pub fn run_rate_experiment(cfg: &ExperimentConfig) -> Result<RateReport, RatelabError> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep)
}

pub fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<RateReport, RatelabError> {
    let seeds = cfg.replicate_seeds();
    let mut distances = Vec::with_capacity(seeds.len() * cfg.n_grid.len());
    for &seed in &seeds {
        let sample = sample_replicate(prep, cfg, seed)?;
        let cells: Vec<DistanceRecord> = cfg
            .n_grid
            .par_iter()
            .zip(&sample.process)
            .map(|(&n, measure)| {
                let (w1, pi) = distances_for(cfg, measure, &sample.brownian)
                    .map_err(|e| e.at(seed, Some(n)))?;
                Ok(DistanceRecord {
                    n: Some(n as u64),
                    m: cfg.m,
                    d: cfg.d,
                    w1,
                    pi,
                    seed: Some(seed),
                })
            })
            .collect::<Result<_, RatelabError>>()?;
        log::info!("replicate seed {seed} done");
        distances.extend(cells);
    }
    let dim = prep.observable.dim();
    let metrics = cfg
        .metrics
        .iter()
        .map(|&m| metric_report(cfg, m, &distances, dim))
        .collect();
    Ok(RateReport {
        name: cfg.name.clone(),
        system: cfg.system,
        observable: cfg.observable.polys(),
        mean_removed: prep.observable.shift().to_vec(),
        sigma: prep.sigma.clone(),
        sigma_source: prep.sigma_source.clone(),
        metrics,
        distances,
        metadata: RunMetadata {
            m: cfg.m,
            d: cfg.d,
            n_grid: cfg.n_grid.clone(),
            seeds,
            burn_in: cfg.burn_in,
            dt: cfg.dt,
            assignment_solver: ASSIGNMENT_SOLVER.into(),
            matching_solver: MATCHING_SOLVER.into(),
            rng: RNG_ALGORITHM.into(),
            aggregation: "median over replicates; q1/q3 by linear interpolation; slope by OLS of log median on log n".into(),
            sampling: "per replicate, the same M orbits (prefixes) and M Brownian paths are used for every n".into(),
            bias_caveat: BIAS_CAVEAT.into(),
        },
    })
}
