//! Monte Carlo experiments: convergence rates, penalty-scale robustness,
//! split robustness and segment-count sweeps.
//!
//! Every cell draws its own seeds from the run's base seed with
//! [`rng::derive_seed`], tagged by scenario code, sample size (or segment
//! count) and replication, so any cell can be re-run on its own. Cells run in
//! parallel; results are collected in a fixed order.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::additive::{backfit, select_alpha_additive, BackfitOptions};
use crate::data::DataSet;
use crate::decomp::{fit_for_alpha, select_alpha, Predictor};
use crate::error::{Error, Result};
use crate::grid::AlphaGrid;
use crate::rng;
use crate::simgen::{generate, uniform_design, ScenarioId, ScenarioSpec};

const TAG_DATA: u64 = 1;
const TAG_SPLIT: u64 = 2;
const TAG_TEST: u64 = 3;

/// Scenario parameters without the per-cell sample size and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub id: ScenarioId,
    pub m: usize,
    pub beta: f64,
    pub gamma: f64,
    pub noise_sd: f64,
}

impl ScenarioParams {
    pub fn new(id: ScenarioId) -> Self {
        let s = ScenarioSpec::new(id, 1, 0);
        Self {
            id,
            m: s.m,
            beta: s.beta,
            gamma: s.gamma,
            noise_sd: s.noise_sd,
        }
    }

    pub fn spec(&self, n: usize, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            id: self.id,
            m: self.m,
            beta: self.beta,
            gamma: self.gamma,
            noise_sd: self.noise_sd,
            n,
            seed,
        }
    }
}

/// Label of the estimator used for a scenario.
pub fn method_tag(id: ScenarioId) -> &'static str {
    if id.is_additive() {
        "additive-monotone"
    } else {
        match id.shape() {
            crate::decomp::Shape::Monotone => "decomp-monotone",
            crate::decomp::Shape::Convex => "decomp-convex",
        }
    }
}

/// Mean squared difference between `predictor` and `truth` over `n_test`
/// fresh uniform points in `[0,1]^dim`. Observation noise is not included.
pub fn estimate_mse<P, T>(predictor: P, truth: T, dim: usize, n_test: usize, seed: u64) -> Result<f64>
where
    P: Fn(&[f64]) -> f64,
    T: Fn(&[f64]) -> Result<f64>,
{
    if n_test == 0 {
        return Err(Error::InvalidBench("n_test must be at least 1".into()));
    }
    let pts = uniform_design(n_test, dim, seed);
    let mut acc = 0.0;
    for x in pts.chunks_exact(dim) {
        let e = predictor(x) - truth(x)?;
        acc += e * e;
    }
    Ok(acc / n_test as f64)
}

/// Fits the scenario's estimator with split-based selection and returns a predictor.
fn fit_selected(
    params: &ScenarioParams,
    data: &DataSet,
    grid: &AlphaGrid,
    split_seed: u64,
    validate_size: Option<usize>,
    backfit_opts: BackfitOptions,
) -> Result<Box<dyn Predictor + Send + Sync>> {
    if params.id.is_additive() {
        let m = select_alpha_additive(data, grid, split_seed, validate_size, backfit_opts)?;
        Ok(Box::new(m.best))
    } else {
        let m = select_alpha(data, grid, params.id.shape(), split_seed, validate_size)?;
        Ok(Box::new(m.best))
    }
}

/// Fits the scenario's estimator on all of `data` at a fixed penalty scale.
fn fit_fixed(
    params: &ScenarioParams,
    data: &DataSet,
    alpha: f64,
    backfit_opts: BackfitOptions,
) -> Result<Box<dyn Predictor + Send + Sync>> {
    if params.id.is_additive() {
        Ok(Box::new(backfit(data, &vec![alpha; data.d()], backfit_opts)?))
    } else {
        Ok(Box::new(fit_for_alpha(data, alpha, params.id.shape())?))
    }
}

fn mse_of(pred: &(dyn Predictor + Send + Sync), spec: &ScenarioSpec, n_test: usize, seed: u64) -> Result<f64> {
    estimate_mse(|x| pred.predict(x), |x| spec.truth(x), spec.dim(), n_test, seed)
}

/// One Monte Carlo replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MseRecord {
    pub scenario: ScenarioId,
    pub n: usize,
    pub rep: usize,
    /// Cell seed the data, split and test seeds were derived from.
    pub seed: u64,
    pub method: String,
    pub alpha: Vec<f64>,
    pub mse: f64,
}

/// Log-log OLS slope of mean MSE against n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub scenario: ScenarioId,
    pub method: String,
    pub slope: f64,
    pub n_min: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    pub scenario: ScenarioParams,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub base_seed: u64,
    pub grid: AlphaGrid,
    pub n_test: usize,
    /// Smallest sample size used when fitting slopes.
    pub n_min: usize,
    /// Validation size; `None` means round(√n).
    pub validate_size: Option<usize>,
    pub backfit_max_iters: usize,
    pub backfit_tol: f64,
}

impl ConvergenceConfig {
    /// Desk-scale defaults: n ∈ {250, …, 8000}, 50 replications, 10⁵ test points.
    pub fn new(id: ScenarioId) -> Self {
        let bf = BackfitOptions::default();
        Self {
            scenario: ScenarioParams::new(id),
            n_grid: vec![250, 500, 1000, 2000, 4000, 8000],
            reps: 50,
            base_seed: 0,
            grid: AlphaGrid::default_grid().with_refine(true),
            n_test: 100_000,
            n_min: 2000,
            validate_size: None,
            backfit_max_iters: bf.max_iters,
            backfit_tol: bf.tol,
        }
    }

    pub fn backfit_options(&self) -> BackfitOptions {
        BackfitOptions {
            max_iters: self.backfit_max_iters,
            tol: self.backfit_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: ConvergenceConfig,
    pub records: Vec<MseRecord>,
    pub slopes: Vec<SlopeRow>,
}

/// Runs one replication of the selected estimator at sample size `n`.
fn run_cell(
    cfg: &ConvergenceConfig,
    params: &ScenarioParams,
    n: usize,
    rep: usize,
    cell_seed: u64,
) -> Result<MseRecord> {
    let spec = params.spec(n, rng::derive_seed(cell_seed, &[TAG_DATA]));
    let data = generate(&spec)?;
    let pred = fit_selected(
        params,
        &data,
        &cfg.grid,
        rng::derive_seed(cell_seed, &[TAG_SPLIT]),
        cfg.validate_size,
        cfg.backfit_options(),
    )?;
    let mse = mse_of(pred.as_ref(), &spec, cfg.n_test, rng::derive_seed(cell_seed, &[TAG_TEST]))?;
    Ok(MseRecord {
        scenario: params.id,
        n,
        rep,
        seed: cell_seed,
        method: method_tag(params.id).to_string(),
        alpha: pred.alpha(),
        mse,
    })
}

/// MSE of the selected estimator over a grid of sample sizes.
pub fn convergence_study(cfg: &ConvergenceConfig) -> Result<BenchReport> {
    if cfg.reps == 0 {
        return Err(Error::InvalidBench("reps must be at least 1".into()));
    }
    if cfg.n_grid.is_empty() || cfg.n_grid.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::InvalidBench("n grid must be non-empty and strictly increasing".into()));
    }
    let params = &cfg.scenario;
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |r| (n, r)))
        .collect();
    let mut records = cells
        .par_iter()
        .map(|&(n, rep)| {
            let seed = rng::derive_seed(cfg.base_seed, &[params.id.code(), n as u64, rep as u64]);
            run_cell(cfg, params, n, rep, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    records.sort_by(|a, b| {
        (a.scenario, a.n, a.rep, &a.method).cmp(&(b.scenario, b.n, b.rep, &b.method))
    });
    let mut report = BenchReport {
        config: cfg.clone(),
        records,
        slopes: Vec::new(),
    };
    let n_fit = cfg.n_grid.iter().filter(|&&n| n >= cfg.n_min).count();
    if n_fit >= 2 {
        report.slopes = fit_slope(&report, cfg.n_min)?;
    }
    Ok(report)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean MSE per sample size for one scenario/method pair.
pub fn mean_mse_by_n(records: &[MseRecord]) -> BTreeMap<usize, f64> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in records {
        let e = acc.entry(r.n).or_insert((0.0, 0));
        e.0 += r.mse;
        e.1 += 1;
    }
    acc.into_iter().map(|(n, (s, c))| (n, s / c as f64)).collect()
}

/// Slope of log(mean MSE) on log(n) over sample sizes ≥ `n_min`, per scenario and method.
pub fn fit_slope(report: &BenchReport, n_min: usize) -> Result<Vec<SlopeRow>> {
    let mut groups: BTreeMap<(ScenarioId, String), Vec<MseRecord>> = BTreeMap::new();
    for r in &report.records {
        groups
            .entry((r.scenario, r.method.clone()))
            .or_default()
            .push(r.clone());
    }
    if groups.is_empty() {
        return Err(Error::InsufficientGrid { n_min, found: 0 });
    }
    groups
        .into_iter()
        .map(|((scenario, method), recs)| {
            let means: Vec<(usize, f64)> = mean_mse_by_n(&recs)
                .into_iter()
                .filter(|&(n, _)| n >= n_min)
                .collect();
            if means.len() < 2 {
                return Err(Error::InsufficientGrid {
                    n_min,
                    found: means.len(),
                });
            }
            let lx: Vec<f64> = means.iter().map(|(n, _)| (*n as f64).ln()).collect();
            let ly: Vec<f64> = means.iter().map(|(_, m)| m.ln()).collect();
            Ok(SlopeRow {
                scenario,
                method,
                slope: ols_slope(&lx, &ly),
                n_min,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepConfig {
    pub scenario: ScenarioParams,
    pub n_list: Vec<usize>,
    pub alpha_list: Vec<f64>,
    pub reps: usize,
    pub base_seed: u64,
    pub n_test: usize,
    pub backfit_max_iters: usize,
    pub backfit_tol: f64,
}

impl AlphaSweepConfig {
    pub fn new(id: ScenarioId, n_list: Vec<usize>, alpha_list: Vec<f64>) -> Self {
        let bf = BackfitOptions::default();
        Self {
            scenario: ScenarioParams::new(id),
            n_list,
            alpha_list,
            reps: 50,
            base_seed: 0,
            n_test: 100_000,
            backfit_max_iters: bf.max_iters,
            backfit_tol: bf.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepRow {
    pub n: usize,
    pub alpha: f64,
    pub mean_mse: f64,
}

/// Mean MSE at fixed penalty scales, fitting on all data without selection.
///
/// Within a replication every scale sees the same dataset and test points.
pub fn alpha_sweep(cfg: &AlphaSweepConfig) -> Result<Vec<AlphaSweepRow>> {
    if cfg.reps == 0 || cfg.n_list.is_empty() || cfg.alpha_list.is_empty() {
        return Err(Error::InvalidBench("alpha sweep needs reps, sample sizes and scales".into()));
    }
    if let Some(a) = cfg.alpha_list.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
        return Err(Error::InvalidGrid(format!("alpha {a} must be finite and non-negative")));
    }
    let opts = BackfitOptions {
        max_iters: cfg.backfit_max_iters,
        tol: cfg.backfit_tol,
    };
    let params = &cfg.scenario;
    let cells: Vec<(usize, usize)> = cfg
        .n_list
        .iter()
        .flat_map(|&n| (0..cfg.reps).map(move |r| (n, r)))
        .collect();
    // mse[cell][alpha]
    let mse: Vec<Vec<f64>> = cells
        .par_iter()
        .map(|&(n, rep)| {
            let cell = rng::derive_seed(cfg.base_seed, &[params.id.code(), n as u64, rep as u64]);
            let spec = params.spec(n, rng::derive_seed(cell, &[TAG_DATA]));
            let data = generate(&spec)?;
            let test_seed = rng::derive_seed(cell, &[TAG_TEST]);
            cfg.alpha_list
                .iter()
                .map(|&a| {
                    let pred = fit_fixed(params, &data, a, opts)?;
                    mse_of(pred.as_ref(), &spec, cfg.n_test, test_seed)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (ni, &n) in cfg.n_list.iter().enumerate() {
        for (ai, &alpha) in cfg.alpha_list.iter().enumerate() {
            let sum: f64 = (0..cfg.reps).map(|r| mse[ni * cfg.reps + r][ai]).sum();
            rows.push(AlphaSweepRow {
                n,
                alpha,
                mean_mse: sum / cfg.reps as f64,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSplitConfig {
    pub scenario: ScenarioParams,
    pub n: usize,
    pub data_seed: u64,
    pub split_seeds: Vec<u64>,
    pub grid: AlphaGrid,
    pub validate_size: Option<usize>,
    pub n_test: usize,
    pub backfit_max_iters: usize,
    pub backfit_tol: f64,
}

impl CvSplitConfig {
    /// Split seeds `0..n_splits`.
    pub fn new(id: ScenarioId, n: usize, n_splits: usize, data_seed: u64) -> Self {
        let bf = BackfitOptions::default();
        Self {
            scenario: ScenarioParams::new(id),
            n,
            data_seed,
            split_seeds: (0..n_splits as u64).collect(),
            grid: AlphaGrid::default_grid().with_refine(true),
            validate_size: None,
            n_test: 100_000,
            backfit_max_iters: bf.max_iters,
            backfit_tol: bf.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSplitRow {
    pub split_seed: u64,
    pub alpha: Vec<f64>,
    pub mse: f64,
}

/// One dataset, many random splits: the selected scale and MSE per split.
pub fn cv_split_robustness(cfg: &CvSplitConfig) -> Result<Vec<CvSplitRow>> {
    if cfg.split_seeds.len() < 2 {
        return Err(Error::InsufficientSplits(cfg.split_seeds.len()));
    }
    let opts = BackfitOptions {
        max_iters: cfg.backfit_max_iters,
        tol: cfg.backfit_tol,
    };
    let params = &cfg.scenario;
    let spec = params.spec(cfg.n, rng::derive_seed(cfg.data_seed, &[TAG_DATA]));
    let data = generate(&spec)?;
    let test_seed = rng::derive_seed(cfg.data_seed, &[TAG_TEST]);
    cfg.split_seeds
        .par_iter()
        .map(|&s| {
            let pred = fit_selected(params, &data, &cfg.grid, s, cfg.validate_size, opts)?;
            Ok(CvSplitRow {
                split_seed: s,
                alpha: pred.alpha(),
                mse: mse_of(pred.as_ref(), &spec, cfg.n_test, test_seed)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSweepConfig {
    /// S2 (staircase) or S4 (convex polyline) family.
    pub family: ScenarioId,
    pub m_list: Vec<usize>,
    pub n: usize,
    pub reps: usize,
    pub base_seed: u64,
    pub grid: AlphaGrid,
    pub validate_size: Option<usize>,
    pub n_test: usize,
}

impl MSweepConfig {
    pub fn new(family: ScenarioId, m_list: Vec<usize>, n: usize) -> Self {
        Self {
            family,
            m_list,
            n,
            reps: 50,
            base_seed: 0,
            grid: AlphaGrid::default_grid().with_refine(true),
            validate_size: None,
            n_test: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSweepRow {
    pub m: usize,
    pub mean_mse: f64,
}

/// Mean MSE of the selected estimator as the number of segments grows.
pub fn m_sweep(cfg: &MSweepConfig) -> Result<Vec<MSweepRow>> {
    if !matches!(cfg.family, ScenarioId::S2 | ScenarioId::S4) {
        return Err(Error::InvalidBench(format!(
            "segment sweep needs the S2 or S4 family, got {}",
            cfg.family
        )));
    }
    if cfg.m_list.is_empty() || cfg.reps == 0 {
        return Err(Error::InvalidBench("segment sweep needs m values and reps".into()));
    }
    let cells: Vec<(usize, usize)> = cfg
        .m_list
        .iter()
        .flat_map(|&m| (0..cfg.reps).map(move |r| (m, r)))
        .collect();
    let mse: Vec<f64> = cells
        .par_iter()
        .map(|&(m, rep)| {
            let mut params = ScenarioParams::new(cfg.family);
            params.m = m;
            let cell = rng::derive_seed(cfg.base_seed, &[cfg.family.code(), m as u64, cfg.n as u64, rep as u64]);
            let spec = params.spec(cfg.n, rng::derive_seed(cell, &[TAG_DATA]));
            let data = generate(&spec)?;
            let pred = fit_selected(
                &params,
                &data,
                &cfg.grid,
                rng::derive_seed(cell, &[TAG_SPLIT]),
                cfg.validate_size,
                BackfitOptions::default(),
            )?;
            mse_of(pred.as_ref(), &spec, cfg.n_test, rng::derive_seed(cell, &[TAG_TEST]))
        })
        .collect::<Result<_>>()?;
    Ok(cfg
        .m_list
        .iter()
        .enumerate()
        .map(|(i, &m)| MSweepRow {
            m,
            mean_mse: mse[i * cfg.reps..(i + 1) * cfg.reps].iter().sum::<f64>() / cfg.reps as f64,
        })
        .collect())
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}

/// Linear-interpolation quantile (type 7) of unsorted data.
pub fn quantile(data: &[f64], p: f64) -> f64 {
    let mut v = data.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

/// Writes records as flat CSV; multi-dimensional penalties are joined with `;`.
pub fn write_records_csv<W: Write>(records: &[MseRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["scenario", "n", "rep", "seed", "method", "alpha", "mse"])?;
    for r in records {
        let alpha: Vec<String> = r.alpha.iter().map(|a| format!("{a:?}")).collect();
        w.write_record([
            r.scenario.to_string(),
            r.n.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.method.clone(),
            alpha.join(";"),
            format!("{:?}", r.mse),
        ])?;
    }
    w.flush()?;
    Ok(())
}
