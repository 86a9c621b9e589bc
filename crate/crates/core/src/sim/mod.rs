//! Discrete-event simulation of the harvesting sensor, its unit battery and
//! the erasure channel.
//!
//! Every attempt empties the battery and energy arrivals are memoryless, so
//! the default engine jumps from attempt to attempt, drawing the time until
//! the battery refills as a fresh `Exp(1)` and the number of overflowing
//! arrivals while the sensor holds its energy as a Poisson count. Traced runs
//! use a literal Poisson arrival stream instead and record every event; the
//! two engines agree in distribution.
//!
//! Randomness is split into two independent ChaCha8 streams, one for energy
//! arrivals and one for erasure draws, so a run can be replayed with the same
//! arrivals and different erasures (see [`RngStreams::split`]).

mod event;
pub mod policy;

pub use event::{AuditSummary, Event, EventKind, EventLog};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::model::{
    aoi_area_increment, BatteryState, EpochRecord, SimCounters, SimResult, SourceState,
};
use crate::stats::{renewal_estimate_for_source, time_average_estimate, RenewalEstimate};
use crate::{ChannelSpec, PolicySpec};
use policy::{attempt_delay, Outcome, TurnPlanner};

/// Largest erasure probability the simulator accepts (mean attempts per
/// epoch `1/(1-q)` stays below `1e4`).
pub const MAX_SIM_ERASURE: f64 = 0.9999;

const ARRIVAL_STREAM: u64 = 0;
const ERASURE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run until every source has completed this many epochs.
    EpochsPerSource(u64),
    /// Run over `[0, T]`.
    Horizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineMode {
    EpochSampling,
    PoissonStream,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub channel: ChannelSpec,
    pub sources: usize,
    pub policy: PolicySpec,
    pub stop: StopRule,
    pub seed: u64,
    /// Keep the full event log; switches to the Poisson-stream engine.
    pub trace: bool,
}

impl SimConfig {
    pub fn new(channel: ChannelSpec, sources: usize, policy: PolicySpec, stop: StopRule, seed: u64) -> Result<Self> {
        let cfg = Self {
            channel,
            sources,
            policy,
            stop,
            seed,
            trace: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_trace(mut self, trace: bool) -> Self {
        self.trace = trace;
        self
    }

    pub fn engine(&self) -> EngineMode {
        if self.trace {
            EngineMode::PoissonStream
        } else {
            EngineMode::EpochSampling
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.policy.check_sources(self.sources)?;
        let q = self.channel.q();
        if q > MAX_SIM_ERASURE {
            return Err(Error::ErasureTooCloseToOne(q));
        }
        match self.stop {
            StopRule::EpochsPerSource(0) => Err(Error::InvalidSimConfig("target epochs must be at least 1".into())),
            StopRule::Horizon(t) if !(t > 0.0 && t.is_finite()) => {
                Err(Error::InvalidSimConfig(format!("horizon must be positive and finite (got {t})")))
            }
            _ => Ok(()),
        }
    }
}

/// Independent random streams for energy arrivals and erasure draws.
#[derive(Debug, Clone)]
pub struct RngStreams {
    pub arrivals: ChaCha8Rng,
    pub erasures: ChaCha8Rng,
}

impl RngStreams {
    /// Both streams derived from one seed (ChaCha stream ids 0 and 1).
    pub fn from_seed(seed: u64) -> Self {
        Self::split(seed, seed)
    }

    /// Arrivals keyed by `arrival_seed`, erasures by `erasure_seed`.
    pub fn split(arrival_seed: u64, erasure_seed: u64) -> Self {
        let mut arrivals = ChaCha8Rng::seed_from_u64(arrival_seed);
        arrivals.set_stream(ARRIVAL_STREAM);
        let mut erasures = ChaCha8Rng::seed_from_u64(erasure_seed);
        erasures.set_stream(ERASURE_STREAM);
        Self { arrivals, erasures }
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub result: SimResult,
    /// Completed epochs of all sources, in completion order.
    pub epochs: Vec<EpochRecord>,
    pub log: Option<EventLog>,
}

pub fn run_simulation(cfg: &SimConfig) -> Result<SimOutput> {
    run_simulation_with_streams(cfg, RngStreams::from_seed(cfg.seed))
}

/// Runs `cfg` with caller-supplied random streams. `cfg.seed` is only echoed.
pub fn run_simulation_with_streams(cfg: &SimConfig, streams: RngStreams) -> Result<SimOutput> {
    cfg.validate()?;
    let mut engine = Engine::new(cfg, streams);
    engine.run();
    engine.finish()
}

enum Arrivals {
    Sampled,
    Stream { next: f64 },
}

struct Engine<'a> {
    cfg: &'a SimConfig,
    q: f64,
    rng: RngStreams,
    arrivals: Arrivals,
    battery: BatteryState,
    now: f64,
    sources: Vec<SourceState>,
    epoch_attempts: Vec<u32>,
    epochs: Vec<EpochRecord>,
    counters: SimCounters,
    planner: TurnPlanner,
    log: Option<EventLog>,
    end_time: f64,
}

impl<'a> Engine<'a> {
    fn new(cfg: &'a SimConfig, mut rng: RngStreams) -> Self {
        let arrivals = match cfg.engine() {
            EngineMode::EpochSampling => Arrivals::Sampled,
            EngineMode::PoissonStream => Arrivals::Stream {
                next: exp1(&mut rng.arrivals),
            },
        };
        let p = cfg.policy;
        Self {
            cfg,
            q: cfg.channel.q(),
            rng,
            arrivals,
            battery: BatteryState::empty(),
            now: 0.0,
            sources: (1..=cfg.sources).map(SourceState::new).collect(),
            epoch_attempts: vec![0; cfg.sources],
            epochs: Vec::new(),
            counters: SimCounters::default(),
            planner: TurnPlanner::new(p.feedback, p.scheduler, p.gamma, cfg.sources),
            log: cfg.trace.then(EventLog::new),
            end_time: 0.0,
        }
    }

    fn horizon(&self) -> f64 {
        match self.cfg.stop {
            StopRule::Horizon(t) => t,
            StopRule::EpochsPerSource(_) => f64::INFINITY,
        }
    }

    fn done(&self) -> bool {
        match self.cfg.stop {
            StopRule::EpochsPerSource(target) => self.sources.iter().all(|s| s.successes >= target),
            StopRule::Horizon(_) => false,
        }
    }

    fn log(&mut self, time: f64, kind: EventKind) {
        if let Some(log) = self.log.as_mut() {
            log.push(time, kind);
        }
    }

    fn run(&mut self) {
        let horizon = self.horizon();
        let mut last = Outcome::Start;
        while !self.done() {
            let turn = self.planner.next_turn(last, self.now, &self.sources);
            debug_assert!(!self.battery.is_full());
            let Some(fill) = self.wait_for_energy(horizon) else {
                self.end_time = horizon;
                return;
            };
            let at = turn.clock_start + attempt_delay(turn.threshold, fill - turn.clock_start);
            self.overflow_until(fill, at.min(horizon));
            if at > horizon {
                self.end_time = horizon;
                return;
            }
            last = self.attempt(turn.source, at);
            self.now = at;
        }
        self.end_time = self.now;
    }

    /// Time the empty battery next fills, or `None` past the horizon.
    fn wait_for_energy(&mut self, horizon: f64) -> Option<f64> {
        let fill = match self.arrivals {
            Arrivals::Sampled => self.now + exp1(&mut self.rng.arrivals),
            Arrivals::Stream { next } => next,
        };
        if fill > horizon {
            return None;
        }
        if let Arrivals::Stream { next } = &mut self.arrivals {
            *next += exp1(&mut self.rng.arrivals);
        }
        self.counters.energy_arrivals += 1;
        let stored = self.battery.charge();
        assert!(stored, "battery must be empty before it refills");
        self.log(fill, EventKind::EnergyArrival);
        Some(fill)
    }

    /// Accounts for arrivals in `(fill, until)` that find the battery full.
    fn overflow_until(&mut self, fill: f64, until: f64) {
        match &mut self.arrivals {
            Arrivals::Sampled => {
                let span = until - fill;
                if span > 0.0 {
                    let k = Poisson::new(span)
                        .map(|d| d.sample(&mut self.rng.arrivals) as u64)
                        .unwrap_or(0);
                    self.counters.energy_arrivals += k;
                    self.counters.overflows += k;
                }
            }
            Arrivals::Stream { next } => {
                while *next < until {
                    let t = *next;
                    *next += exp1(&mut self.rng.arrivals);
                    let stored = self.battery.charge();
                    debug_assert!(!stored);
                    self.counters.energy_arrivals += 1;
                    self.counters.overflows += 1;
                    if let Some(log) = self.log.as_mut() {
                        log.push(t, EventKind::EnergyArrival);
                        log.push(t, EventKind::Overflow);
                    }
                }
            }
        }
    }

    fn attempt(&mut self, source: usize, at: f64) -> Outcome {
        assert!(self.battery.discharge(), "attempt scheduled with an empty battery");
        let id = source + 1;
        self.counters.attempts += 1;
        self.epoch_attempts[source] += 1;
        self.log(at, EventKind::Attempt(id));

        let erased = self.rng.erasures.random::<f64>() < self.q;
        if erased {
            self.log(at, EventKind::Erasure(id));
            return Outcome::Erased;
        }
        self.counters.successes += 1;
        let state = &mut self.sources[source];
        let length = state.aoi(at);
        self.epochs.push(EpochRecord {
            source_id: id,
            length,
            area: aoi_area_increment(0.0, length).expect("epoch length is nonnegative"),
            attempts: std::mem::take(&mut self.epoch_attempts[source]),
            end: at,
        });
        state.last_success = at;
        state.successes += 1;
        self.log(at, EventKind::Success(id));
        Outcome::Success
    }

    fn finish(self) -> Result<SimOutput> {
        let m = self.cfg.sources;
        let mut per_source = Vec::with_capacity(m);
        for id in 1..=m {
            let est = match self.cfg.stop {
                StopRule::EpochsPerSource(_) => renewal_estimate_for_source(&self.epochs, id)?,
                StopRule::Horizon(t) => {
                    let mine: Vec<_> = self.epochs.iter().filter(|e| e.source_id == id).copied().collect();
                    if mine.is_empty() {
                        warn!("horizon {t} too short: source {id} completed no epoch");
                    }
                    time_average_estimate(&mine, t)?
                }
            };
            per_source.push(est);
        }
        let mean = |f: fn(&RenewalEstimate) -> f64| per_source.iter().map(f).sum::<f64>() / m as f64;
        let result = SimResult {
            cumulative_mean: mean(|e| e.point),
            cumulative_ci: mean(|e| e.ci_half_width),
            per_source,
            counters: self.counters,
            epochs_per_source: self.sources.iter().map(|s| s.successes).collect(),
            seed: self.cfg.seed,
        };
        debug_assert!(self.end_time >= 0.0);
        Ok(SimOutput {
            result,
            epochs: self.epochs,
            log: self.log,
        })
    }
}

fn exp1<R: Rng>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}
