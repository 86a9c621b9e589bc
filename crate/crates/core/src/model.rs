//! Domain types shared by the analytic evaluators and the simulator.

use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::stats::RenewalEstimate;

/// Erasure probabilities at or above this value trigger a conditioning warning.
pub const NEAR_ONE_WARNING: f64 = 0.999;

/// Checks `0 <= q < 1`, warning when `q` is close enough to 1 that the
/// `1/(1-q)^2` terms lose precision.
pub fn check_erasure<T: Scalar>(q: T) -> Result<()> {
    let qf = q.as_f64();
    if qf.is_nan() || qf < 0.0 {
        return Err(Error::ErasureNegative(qf));
    }
    if qf >= 1.0 {
        return Err(Error::ErasureTooLarge(qf));
    }
    if qf >= NEAR_ONE_WARNING {
        warn!("q = {qf} is close to 1; closed forms are ill-conditioned");
    }
    Ok(())
}

pub(crate) fn check_nonnegative<T: Scalar>(name: &'static str, value: T) -> Result<()> {
    if value.is_nan() || value < T::zero() {
        return Err(Error::Negative {
            name,
            value: value.as_f64(),
        });
    }
    Ok(())
}

/// Erasure channel fed by a unit-rate Poisson energy stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec<T> {
    q: T,
}

impl<T: Scalar> ChannelSpec<T> {
    pub fn new(q: T) -> Result<Self> {
        check_erasure(q)?;
        Ok(Self { q })
    }

    /// Per-attempt erasure probability.
    pub fn q(&self) -> T {
        self.q
    }

    /// Energy arrival rate; the time axis is normalized so this is always 1.
    pub fn rate(&self) -> T {
        T::one()
    }

    pub fn success_probability(&self) -> T {
        T::one() - self.q
    }
}

/// Unit-capacity battery.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BatteryState {
    level: u8,
}

impl BatteryState {
    pub fn empty() -> Self {
        Self { level: 0 }
    }

    pub fn level(&self) -> u8 {
        self.level
    }

    pub fn is_full(&self) -> bool {
        self.level == 1
    }

    /// Stores an arriving energy unit. Returns `false` when the battery was
    /// already full and the unit overflowed.
    pub fn charge(&mut self) -> bool {
        if self.level == 1 {
            false
        } else {
            self.level = 1;
            true
        }
    }

    /// Spends the stored unit on a transmission. Returns `false` (and leaves
    /// the state untouched) if the battery is empty.
    pub fn discharge(&mut self) -> bool {
        if self.level == 1 {
            self.level = 0;
            true
        } else {
            false
        }
    }
}

/// Destination-side bookkeeping for one source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SourceState {
    /// 1-based source index.
    pub source_id: usize,
    pub last_success: f64,
    pub successes: u64,
}

impl SourceState {
    pub fn new(source_id: usize) -> Self {
        Self {
            source_id,
            last_success: 0.0,
            successes: 0,
        }
    }

    /// Age of information at time `t`.
    pub fn aoi(&self, t: f64) -> f64 {
        t - self.last_success
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Feedback {
    /// The sensor never learns whether an update was erased.
    NoFeedback,
    /// Perfect, instantaneous erasure feedback.
    WithFeedback,
}

impl Feedback {
    pub const ALL: [Feedback; 2] = [Feedback::NoFeedback, Feedback::WithFeedback];

    pub fn as_str(&self) -> &'static str {
        match self {
            Feedback::NoFeedback => "nofb",
            Feedback::WithFeedback => "wfb",
        }
    }

    /// Scheduler paired with this feedback setting for `sources` sources.
    pub fn scheduler_for(&self, sources: usize) -> Scheduler {
        match (self, sources) {
            (_, 0 | 1) => Scheduler::Single,
            (Feedback::NoFeedback, _) => Scheduler::RoundRobin,
            (Feedback::WithFeedback, _) => Scheduler::MaxAgeFirst,
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nofb" => Ok(Feedback::NoFeedback),
            "wfb" => Ok(Feedback::WithFeedback),
            other => Err(format!("unknown setting '{other}' (expected nofb or wfb)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheduler {
    Single,
    RoundRobin,
    MaxAgeFirst,
}

/// Threshold policy together with its scheduler. `gamma = 0` is greedy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec<T> {
    pub feedback: Feedback,
    pub scheduler: Scheduler,
    pub gamma: T,
}

impl<T: Scalar> PolicySpec<T> {
    pub fn new(feedback: Feedback, scheduler: Scheduler, gamma: T) -> Result<Self> {
        check_nonnegative("gamma", gamma)?;
        match (feedback, scheduler) {
            (Feedback::NoFeedback, Scheduler::MaxAgeFirst) => Err(Error::InvalidPolicy(
                "max-age-first needs erasure feedback".into(),
            )),
            (Feedback::WithFeedback, Scheduler::RoundRobin) => Err(Error::InvalidPolicy(
                "round robin is paired with the no-feedback setting".into(),
            )),
            _ => Ok(Self {
                feedback,
                scheduler,
                gamma,
            }),
        }
    }

    /// The natural policy for `sources` sources under `feedback`.
    pub fn for_sources(feedback: Feedback, sources: usize, gamma: T) -> Result<Self> {
        if sources == 0 {
            return Err(Error::NoSources);
        }
        Self::new(feedback, feedback.scheduler_for(sources), gamma)
    }

    pub fn is_greedy(&self) -> bool {
        self.gamma == T::zero()
    }

    /// Checks the `Single iff M = 1` pairing.
    pub fn check_sources(&self, sources: usize) -> Result<()> {
        if sources == 0 {
            return Err(Error::NoSources);
        }
        let single = self.scheduler == Scheduler::Single;
        if single != (sources == 1) {
            return Err(Error::InvalidPolicy(format!(
                "scheduler {:?} cannot serve {sources} source(s)",
                self.scheduler
            )));
        }
        Ok(())
    }
}

/// One renewal cycle of a source: the time between two consecutive
/// successful deliveries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    /// 1-based source index.
    pub source_id: usize,
    /// Epoch length.
    pub length: f64,
    /// AoI area accumulated during the epoch.
    pub area: f64,
    /// Transmission attempts for this source during the epoch.
    pub attempts: u32,
    /// Time of the successful delivery that closed the epoch.
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    Threshold,
    Greedy,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Threshold => "threshold",
            Regime::Greedy => "greedy",
        })
    }
}

/// Solved single-source problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSolution<T> {
    pub regime: Regime,
    /// Optimal long-term average AoI.
    pub lambda_star: T,
    /// Threshold of the optimal policy: `λ'` without feedback, `γ*` with it.
    pub threshold: T,
    pub q: T,
    pub sources: usize,
    pub feedback: Feedback,
}

/// Run-level event counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimCounters {
    pub energy_arrivals: u64,
    pub overflows: u64,
    pub attempts: u64,
    pub successes: u64,
}

/// Outcome of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// One estimate per source, in source order.
    pub per_source: Vec<RenewalEstimate>,
    /// Average of the per-source means.
    pub cumulative_mean: f64,
    /// Average of the per-source half-widths. Valid as a conservative bound
    /// for the averaged estimate regardless of cross-source correlation.
    pub cumulative_ci: f64,
    pub counters: SimCounters,
    pub epochs_per_source: Vec<u64>,
    pub seed: u64,
}

/// AoI area under a unit-slope segment starting at age `a_start` and lasting
/// `duration`.
pub fn aoi_area_increment<T: Scalar>(a_start: T, duration: T) -> Result<T> {
    check_nonnegative("a_start", a_start)?;
    check_nonnegative("duration", duration)?;
    Ok(a_start * duration + duration * duration / T::lit(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_increment_examples() {
        assert_eq!(aoi_area_increment(0.0, 2.0).unwrap(), 2.0);
        assert_eq!(aoi_area_increment(0.0, 0.0).unwrap(), 0.0);
        assert_eq!(aoi_area_increment(1.5, 1.0).unwrap(), 2.0);
        assert_eq!(aoi_area_increment(1.5f32, 1.0f32).unwrap(), 2.0f32);
    }

    #[test]
    fn area_increment_matches_riemann_sum() {
        let (a0, d) = (1.5f64, 1.0f64);
        let n = 100_000;
        let h = d / n as f64;
        let riemann: f64 = (0..n).map(|i| (a0 + (i as f64 + 0.5) * h) * h).sum();
        assert!((riemann - aoi_area_increment(a0, d).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn area_increment_rejects_negative() {
        assert!(aoi_area_increment(-1.0, 1.0).is_err());
        assert!(aoi_area_increment(0.0, -0.1).is_err());
        assert!(aoi_area_increment(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn channel_bounds() {
        assert!(ChannelSpec::new(0.0).is_ok());
        assert!(ChannelSpec::new(0.5).is_ok());
        assert_eq!(ChannelSpec::new(1.0), Err(Error::ErasureTooLarge(1.0)));
        assert!(matches!(ChannelSpec::new(-0.1), Err(Error::ErasureNegative(_))));
        assert_eq!(ChannelSpec::new(0.25f32).unwrap().rate(), 1.0);
    }

    #[test]
    fn battery_is_unit_sized() {
        let mut b = BatteryState::empty();
        assert!(!b.discharge());
        assert!(b.charge());
        assert!(!b.charge());
        assert_eq!(b.level(), 1);
        assert!(b.discharge());
        assert_eq!(b.level(), 0);
    }

    #[test]
    fn policy_pairings() {
        use Feedback::*;
        assert!(PolicySpec::new(NoFeedback, Scheduler::RoundRobin, 0.0).is_ok());
        assert!(PolicySpec::new(NoFeedback, Scheduler::MaxAgeFirst, 0.0).is_err());
        assert!(PolicySpec::new(WithFeedback, Scheduler::RoundRobin, 0.0).is_err());
        assert!(PolicySpec::new(WithFeedback, Scheduler::Single, -1.0).is_err());

        let p = PolicySpec::for_sources(WithFeedback, 3, 0.5).unwrap();
        assert_eq!(p.scheduler, Scheduler::MaxAgeFirst);
        assert!(p.check_sources(3).is_ok());
        assert!(p.check_sources(1).is_err());
        let single = PolicySpec::for_sources(NoFeedback, 1, 0.0).unwrap();
        assert!(single.is_greedy());
        assert!(single.check_sources(2).is_err());
    }

    #[test]
    fn feedback_parses() {
        assert_eq!("nofb".parse::<Feedback>().unwrap(), Feedback::NoFeedback);
        assert_eq!(" WFB ".parse::<Feedback>().unwrap(), Feedback::WithFeedback);
        assert!("both".parse::<Feedback>().is_err());
    }
}
