//! Renewal-reward estimation and simulation-vs-closed-form oracles.

use log::warn;
use rayon::prelude::*;

use crate::analytic::closed_form_aoi;
use crate::error::{Error, Result};
use crate::model::{EpochRecord, Feedback, PolicySpec, SimCounters, SimResult};
use crate::sim::{run_simulation, SimConfig, SimOutput, StopRule};
use crate::ChannelSpec;

/// Two-sided 95% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Two-sided 95% Student-t quantile with 19 degrees of freedom, used for the
/// 20-batch means estimator.
const T_95_DF19: f64 = 2.093_024_054_408_263;

pub const HORIZON_BATCHES: usize = 20;

/// Below this many epochs the normal interval is unreliable.
pub const MIN_EPOCHS_FOR_CI: usize = 30;

pub const DEFAULT_REL_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenewalEstimate {
    /// Long-term average AoI estimate.
    pub point: f64,
    /// Half-width of the 95% confidence interval.
    pub ci_half_width: f64,
    pub n_epochs: u64,
}

impl RenewalEstimate {
    pub fn lower(&self) -> f64 {
        self.point - self.ci_half_width
    }

    pub fn upper(&self) -> f64 {
        self.point + self.ci_half_width
    }
}

/// Ratio estimator `ΣR / Σy` over i.i.d. epochs with a delta-method interval.
pub fn renewal_estimate(epochs: &[EpochRecord]) -> Result<RenewalEstimate> {
    renewal_estimate_iter(epochs.iter())
}

/// [`renewal_estimate`] restricted to one (1-based) source.
pub fn renewal_estimate_for_source(epochs: &[EpochRecord], source_id: usize) -> Result<RenewalEstimate> {
    renewal_estimate_iter(epochs.iter().filter(|e| e.source_id == source_id))
}

fn renewal_estimate_iter<'a>(epochs: impl Iterator<Item = &'a EpochRecord>) -> Result<RenewalEstimate> {
    // Running means and co-moments (Welford).
    let (mut n, mut mean_y, mut mean_r) = (0u64, 0.0f64, 0.0f64);
    let (mut m_yy, mut m_rr, mut m_ry) = (0.0f64, 0.0f64, 0.0f64);
    for e in epochs {
        n += 1;
        let k = n as f64;
        let dy = e.length - mean_y;
        let dr = e.area - mean_r;
        mean_y += dy / k;
        mean_r += dr / k;
        m_yy += dy * (e.length - mean_y);
        m_rr += dr * (e.area - mean_r);
        m_ry += dr * (e.length - mean_y);
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if (n as usize) < MIN_EPOCHS_FOR_CI {
        warn!("only {n} epochs; the confidence interval is unreliable");
    }
    let point = mean_r / mean_y;
    let ci_half_width = if n > 1 {
        let d = (n - 1) as f64;
        let (var_y, var_r, cov) = (m_yy / d, m_rr / d, m_ry / d);
        let var_point = (var_r - 2.0 * point * cov + point * point * var_y) / (n as f64 * mean_y * mean_y);
        Z_95 * var_point.max(0.0).sqrt()
    } else {
        0.0
    };
    Ok(RenewalEstimate {
        point,
        ci_half_width,
        n_epochs: n,
    })
}

/// Time-average AoI of one source over `[0, horizon]`, including the area of
/// the unfinished last epoch, with a batch-means interval over
/// [`HORIZON_BATCHES`] equal windows.
///
/// `epochs` must belong to a single source and be sorted by completion time.
pub fn time_average_estimate(epochs: &[EpochRecord], horizon: f64) -> Result<RenewalEstimate> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidSimConfig("horizon must be positive".into()));
    }
    let k = HORIZON_BATCHES;
    let width = horizon / k as f64;
    let mut areas = vec![0.0f64; k];

    // Each segment [start, end) has AoI rising from 0 at `start`.
    let mut segments: Vec<(f64, f64)> = epochs
        .iter()
        .map(|e| (e.end - e.length, e.end.min(horizon)))
        .collect();
    let last_end = epochs.last().map_or(0.0, |e| e.end);
    if last_end < horizon {
        segments.push((last_end, horizon));
    }
    for (start, end) in segments {
        let first = ((start / width) as usize).min(k - 1);
        let last = ((end / width) as usize).min(k - 1);
        for (b, area) in areas.iter_mut().enumerate().take(last + 1).skip(first) {
            let lo = start.max(b as f64 * width);
            let hi = end.min((b + 1) as f64 * width);
            if hi > lo {
                *area += (lo - start) * (hi - lo) + 0.5 * (hi - lo) * (hi - lo);
            }
        }
    }
    let means: Vec<f64> = areas.iter().map(|a| a / width).collect();
    let point = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|m| (m - point).powi(2)).sum::<f64>() / (k - 1) as f64;
    Ok(RenewalEstimate {
        point,
        ci_half_width: T_95_DF19 * (var / k as f64).sqrt(),
        n_epochs: epochs.len() as u64,
    })
}

/// Simulation-vs-closed-form comparison for one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub q: f64,
    pub sources: usize,
    pub feedback: Feedback,
    pub gamma: f64,
    pub analytic: f64,
    pub sim: RenewalEstimate,
    pub rel_tol: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn abs_error(&self) -> f64 {
        (self.sim.point - self.analytic).abs()
    }
}

/// Simulates `n_epochs` epochs per source and compares the cumulative
/// estimate with the closed form at the default 1% relative tolerance.
pub fn validate(q: f64, sources: usize, feedback: Feedback, gamma: f64, n_epochs: u64, seed: u64) -> Result<Verdict> {
    validate_with_tolerance(q, sources, feedback, gamma, n_epochs, seed, DEFAULT_REL_TOL)
}

/// PASS iff `|sim - analytic| <= max(3 * ci_half_width, rel_tol * analytic)`.
pub fn validate_with_tolerance(
    q: f64,
    sources: usize,
    feedback: Feedback,
    gamma: f64,
    n_epochs: u64,
    seed: u64,
    rel_tol: f64,
) -> Result<Verdict> {
    validate_replicated(q, sources, feedback, gamma, n_epochs, seed, 1, rel_tol)
}

/// [`validate_with_tolerance`] over `replications` independent runs whose
/// epochs are pooled (see [`replicate`]).
#[allow(clippy::too_many_arguments)]
pub fn validate_replicated(
    q: f64,
    sources: usize,
    feedback: Feedback,
    gamma: f64,
    n_epochs: u64,
    seed: u64,
    replications: u32,
    rel_tol: f64,
) -> Result<Verdict> {
    let analytic = closed_form_aoi(q, sources, feedback, gamma)?;
    let cfg = SimConfig::new(
        ChannelSpec::new(q)?,
        sources,
        PolicySpec::for_sources(feedback, sources, gamma)?,
        StopRule::EpochsPerSource(n_epochs),
        seed,
    )?;
    let result = pooled_result(&replicate(&cfg, replications)?)?;
    let sim = RenewalEstimate {
        point: result.cumulative_mean,
        ci_half_width: result.cumulative_ci,
        n_epochs: result.epochs_per_source.iter().sum(),
    };
    let tol = (3.0 * sim.ci_half_width).max(rel_tol * analytic);
    Ok(Verdict {
        q,
        sources,
        feedback,
        gamma,
        analytic,
        sim,
        rel_tol,
        pass: (sim.point - analytic).abs() <= tol,
    })
}

/// Seed of replication `index` of a run seeded with `seed`. Replication 0
/// reuses `seed` itself.
pub fn replication_seed(seed: u64, index: u32) -> u64 {
    seed.wrapping_add(u64::from(index).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Runs `replications` independent copies of `cfg` in parallel.
pub fn replicate(cfg: &SimConfig, replications: u32) -> Result<Vec<SimOutput>> {
    (0..replications.max(1))
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig {
                seed: replication_seed(cfg.seed, r),
                ..*cfg
            };
            run_simulation(&cfg)
        })
        .collect()
}

/// Pools the epochs of epoch-count replications into one per-source renewal
/// estimate each; counters are summed. The echoed seed is the first run's.
pub fn pooled_result(outputs: &[SimOutput]) -> Result<SimResult> {
    let first = outputs.first().ok_or(Error::EmptySample)?;
    if outputs.len() == 1 {
        return Ok(first.result.clone());
    }
    let sources = first.result.per_source.len();
    let all: Vec<EpochRecord> = outputs.iter().flat_map(|o| o.epochs.iter().copied()).collect();
    let per_source = (1..=sources)
        .map(|id| renewal_estimate_for_source(&all, id))
        .collect::<Result<Vec<_>>>()?;
    let mut counters = SimCounters::default();
    let mut epochs_per_source = vec![0u64; sources];
    for o in outputs {
        let c = o.result.counters;
        counters.energy_arrivals += c.energy_arrivals;
        counters.overflows += c.overflows;
        counters.attempts += c.attempts;
        counters.successes += c.successes;
        for (acc, n) in epochs_per_source.iter_mut().zip(&o.result.epochs_per_source) {
            *acc += n;
        }
    }
    let m = sources as f64;
    Ok(SimResult {
        cumulative_mean: per_source.iter().map(|e| e.point).sum::<f64>() / m,
        cumulative_ci: per_source.iter().map(|e| e.ci_half_width).sum::<f64>() / m,
        per_source,
        counters,
        epochs_per_source,
        seed: first.result.seed,
    })
}

/// Grid argmin of the closed form over `γ ∈ {0, step, 2·step, …, 5}`.
pub fn grid_oracle_gamma(q: f64, sources: usize, feedback: Feedback, grid_step: f64) -> Result<f64> {
    if !(grid_step > 0.0) {
        return Err(Error::Negative {
            name: "grid_step",
            value: grid_step,
        });
    }
    let n = (5.0 / grid_step).floor() as usize;
    let mut best = (0.0, f64::INFINITY);
    for i in 0..=n {
        let g = i as f64 * grid_step;
        let v = closed_form_aoi(q, sources, feedback, g)?;
        if v < best.1 {
            best = (g, v);
        }
    }
    Ok(best.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub gamma: f64,
    pub estimate: RenewalEstimate,
}

/// Simulation-backed threshold search.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGridSearch {
    pub points: Vec<GridPoint>,
    /// Index of the smallest point estimate.
    pub best: usize,
}

impl SimGridSearch {
    pub fn best_point(&self) -> &GridPoint {
        &self.points[self.best]
    }

    /// Thresholds whose interval overlaps the interval of the empirical
    /// minimum, i.e. those statistically indistinguishable from it.
    pub fn band(&self) -> (f64, f64) {
        let best = self.best_point().estimate;
        let inside = self
            .points
            .iter()
            .filter(|p| p.estimate.lower() <= best.upper())
            .map(|p| p.gamma);
        inside.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g), hi.max(g)))
    }
}

/// Simulates every threshold in `grid` with the same seed (common random
/// numbers) and locates the empirical minimum. Grid points run in parallel.
pub fn grid_oracle_gamma_sim(
    q: f64,
    sources: usize,
    feedback: Feedback,
    grid: &[f64],
    n_epochs: u64,
    seed: u64,
) -> Result<SimGridSearch> {
    if grid.is_empty() {
        return Err(Error::InvalidSimConfig("empty threshold grid".into()));
    }
    let channel = ChannelSpec::new(q)?;
    let points = grid
        .par_iter()
        .map(|&gamma| {
            let cfg = SimConfig::new(
                channel,
                sources,
                PolicySpec::for_sources(feedback, sources, gamma)?,
                StopRule::EpochsPerSource(n_epochs),
                seed,
            )?;
            let res = run_simulation(&cfg)?.result;
            Ok(GridPoint {
                gamma,
                estimate: RenewalEstimate {
                    point: res.cumulative_mean,
                    ci_half_width: res.cumulative_ci,
                    n_epochs: res.epochs_per_source.iter().sum(),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.estimate.point.total_cmp(&b.1.estimate.point))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SimGridSearch { points, best })
}
