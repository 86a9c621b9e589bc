//! Attempt-timing rules and source schedulers.
//!
//! Every rule has the same shape: a clock starts at some instant (the
//! previous attempt, or the start of a source's turn), the battery fills `τ`
//! later, and the attempt fires at `max{threshold, τ}` after the clock start.

use crate::model::{Feedback, Scheduler, SourceState};

/// Delay from the clock start to the attempt when energy arrives after `tau`
/// and the policy waits for at least `threshold`. Ties transmit immediately.
pub fn attempt_delay(threshold: f64, tau: f64) -> f64 {
    tau.max(threshold)
}

/// No feedback: the next attempt fires `max{γ, τ}` after the previous
/// attempt, whatever happened to it.
pub fn policy_nofb_single(gamma: f64, tau: f64) -> f64 {
    attempt_delay(gamma, tau)
}

/// Threshold-greedy: after a success wait for both energy and AoI `γ`;
/// after an erasure retransmit as soon as energy arrives.
pub fn policy_wfb_single(gamma: f64, tau: f64, after_success: bool) -> f64 {
    if after_success {
        attempt_delay(gamma, tau)
    } else {
        tau
    }
}

/// Cyclic order over `0..sources`.
#[derive(Debug, Clone)]
pub struct RoundRobin {
    sources: usize,
    next: usize,
}

impl RoundRobin {
    pub fn new(sources: usize) -> Self {
        Self { sources, next: 0 }
    }
}

impl Iterator for RoundRobin {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let s = self.next;
        self.next = (self.next + 1) % self.sources;
        Some(s)
    }
}

/// Index of the source with the largest AoI at `now`; lowest index on ties.
pub fn max_age_first(sources: &[SourceState], now: f64) -> usize {
    let mut best = 0;
    for (i, s) in sources.iter().enumerate().skip(1) {
        if s.aoi(now) > sources[best].aoi(now) {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Start,
    Success,
    Erased,
}

/// What the sensor does next: which source, and from when to measure the
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Turn {
    /// 0-based source index.
    pub source: usize,
    pub clock_start: f64,
    pub threshold: f64,
}

/// Combines the attempt rule and the scheduler into the sensor's decision
/// after each attempt.
#[derive(Debug, Clone)]
pub struct TurnPlanner {
    feedback: Feedback,
    scheduler: Scheduler,
    gamma: f64,
    rr: RoundRobin,
    current: usize,
}

impl TurnPlanner {
    pub fn new(feedback: Feedback, scheduler: Scheduler, gamma: f64, sources: usize) -> Self {
        Self {
            feedback,
            scheduler,
            gamma,
            rr: RoundRobin::new(sources.max(1)),
            current: 0,
        }
    }

    /// Plans the attempt following `last`, which completed at `now`.
    pub fn next_turn(&mut self, last: Outcome, now: f64, sources: &[SourceState]) -> Turn {
        let (source, threshold) = match self.feedback {
            // The sensor is blind to erasures; only the attempt instant matters.
            Feedback::NoFeedback => {
                let s = match self.scheduler {
                    Scheduler::Single => 0,
                    _ => self.rr.next().unwrap_or(0),
                };
                (s, self.gamma)
            }
            Feedback::WithFeedback => match last {
                Outcome::Erased => (self.current, 0.0),
                Outcome::Start | Outcome::Success => {
                    let s = match self.scheduler {
                        Scheduler::MaxAgeFirst => max_age_first(sources, now),
                        _ => 0,
                    };
                    (s, self.gamma)
                }
            },
        };
        self.current = source;
        Turn {
            source,
            clock_start: now,
            threshold,
        }
    }
}
