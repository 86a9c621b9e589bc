//! Closed-form AoI evaluators and optimal-threshold solvers.
//!
//! Single source:
//! * without feedback the optimal policy waits until `max(λ', τ)` after each
//!   attempt, with `λ'` the root of [`p_nofb`]; it turns greedy for `q >= 1/2`.
//! * with feedback the optimal policy is threshold-greedy with
//!   `γ* = λ* - q/(1-q)`, `λ*` the root of [`p_wfb`].
//!
//! Many sources: round robin with `γ`-threshold attempts ([`aoi_rr_nofb`]) and
//! max-age-first with threshold-greedy attempts ([`aoi_maf_wfb`]); the best
//! `γ` is found numerically by [`optimize_gamma`].
//!
//! All functions are pure.

mod search;

pub use search::{bisect, golden_section_min};

use crate::error::{Error, Result};
use crate::model::{check_erasure, check_nonnegative, AnalyticSolution, Feedback, Regime};
use crate::num::Scalar;

/// Bracket and stopping rule shared by the bisection and golden-section
/// searches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootSolverConfig<T> {
    pub bracket_lo: T,
    pub bracket_hi: T,
    /// Absolute tolerance on the abscissa.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Scalar> Default for RootSolverConfig<T> {
    fn default() -> Self {
        Self {
            bracket_lo: T::zero(),
            bracket_hi: T::lit(50.0),
            tol: T::lit(1e-12),
            max_iter: 200,
        }
    }
}

impl<T: Scalar> RootSolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.bracket_lo < self.bracket_hi) {
            return Err(Error::InvalidSolverConfig(format!(
                "bracket_lo ({}) must be below bracket_hi ({})",
                self.bracket_lo, self.bracket_hi
            )));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidSolverConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSolverConfig("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// First two moments of `max{γ, τ}` with `τ ~ Exp(1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxMoments<T> {
    pub m1: T,
    pub m2: T,
}

pub fn exp_max_moments<T: Scalar>(gamma: T) -> Result<MaxMoments<T>> {
    check_nonnegative("gamma", gamma)?;
    let e = (-gamma).exp();
    let two = T::lit(2.0);
    Ok(MaxMoments {
        m1: gamma + e,
        m2: gamma * gamma + two * (gamma + T::one()) * e,
    })
}

/// `q / (1 - q)`: mean number of extra attempts per successful delivery.
fn odds<T: Scalar>(q: T) -> T {
    q / (T::one() - q)
}

/// Value of the no-feedback auxiliary problem as a function of the threshold
/// `λ'`. Strictly decreasing; its root is the optimal threshold.
pub fn p_nofb<T: Scalar>(lambda_prime: T, q: T) -> Result<T> {
    check_nonnegative("lambda_prime", lambda_prime)?;
    check_erasure(q)?;
    Ok(p_nofb_unchecked(lambda_prime, q))
}

fn p_nofb_unchecked<T: Scalar>(l: T, q: T) -> T {
    let one = T::one();
    let s = one - q;
    let e = (-l).exp();
    (s * (e - l * l / T::lit(2.0)) - q * (l + e) * (l + e)) / (s * s)
}

/// Long-term average AoI attained by the `λ'`-threshold policy without
/// feedback, `((1+q)λ' + 2q e^{-λ'}) / (1-q)`.
pub fn lambda_from_threshold_nofb<T: Scalar>(lambda_prime: T, q: T) -> T {
    let one = T::one();
    ((one + q) * lambda_prime + T::lit(2.0) * q * (-lambda_prime).exp()) / (one - q)
}

/// Optimal single-source policy without erasure feedback.
pub fn solve_nofb<T: Scalar>(q: T, cfg: &RootSolverConfig<T>) -> Result<AnalyticSolution<T>> {
    check_erasure(q)?;
    cfg.validate()?;
    let one = T::one();
    if q >= T::lit(0.5) {
        return Ok(AnalyticSolution {
            regime: Regime::Greedy,
            lambda_star: one / (one - q),
            threshold: T::zero(),
            q,
            sources: 1,
            feedback: Feedback::NoFeedback,
        });
    }
    let threshold = bisect(
        |l| p_nofb_unchecked(l, q),
        cfg.bracket_lo.max(T::zero()),
        cfg.bracket_hi,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok(AnalyticSolution {
        regime: Regime::Threshold,
        lambda_star: lambda_from_threshold_nofb(threshold, q),
        threshold,
        q,
        sources: 1,
        feedback: Feedback::NoFeedback,
    })
}

/// Value of the feedback auxiliary problem under the best threshold-greedy
/// policy. Piecewise: the first attempt is greedy while `λ < q/(1-q)`.
pub fn p_wfb<T: Scalar>(lambda: T, q: T) -> Result<T> {
    check_nonnegative("lambda", lambda)?;
    check_erasure(q)?;
    let one = T::one();
    let two = T::lit(2.0);
    let s = one - q;
    let r = odds(q);
    let tail = (two * q - q * q) / (s * s);
    Ok(if lambda < r {
        one - lambda / s + tail
    } else {
        (-(lambda - r)).exp() - lambda * lambda / two + tail / two
    })
}

/// Residual of the feedback fixed-point equation written in terms of the
/// threshold `γ = λ - q/(1-q)`.
fn wfb_residual<T: Scalar>(gamma: T, q: T) -> T {
    let two = T::lit(2.0);
    let s = T::one() - q;
    let lambda = gamma + odds(q);
    (-gamma).exp() + (two * q - q * q) / (two * s * s) - lambda * lambda / two
}

/// Optimal single-source threshold-greedy policy with erasure feedback.
///
/// The search runs over the threshold `γ ∈ [bracket_lo, bracket_hi]` rather
/// than over `λ`, so the default bracket stays valid as `q → 1`.
pub fn solve_wfb<T: Scalar>(q: T, cfg: &RootSolverConfig<T>) -> Result<AnalyticSolution<T>> {
    check_erasure(q)?;
    cfg.validate()?;
    let gamma = bisect(
        |g| wfb_residual(g, q),
        cfg.bracket_lo.max(T::zero()),
        cfg.bracket_hi,
        cfg.tol,
        cfg.max_iter,
    )?;
    Ok(AnalyticSolution {
        regime: Regime::Threshold,
        lambda_star: gamma + odds(q),
        threshold: gamma,
        q,
        sources: 1,
        feedback: Feedback::WithFeedback,
    })
}

fn check_multi<T: Scalar>(q: T, sources: usize, gamma: T) -> Result<()> {
    check_erasure(q)?;
    if sources == 0 {
        return Err(Error::NoSources);
    }
    check_nonnegative("gamma", gamma)
}

/// Cumulative average AoI of round-robin scheduling with `γ`-threshold
/// attempts and no feedback.
pub fn aoi_rr_nofb<T: Scalar>(q: T, sources: usize, gamma: T) -> Result<T> {
    check_multi(q, sources, gamma)?;
    let MaxMoments { m1, m2 } = exp_max_moments(gamma)?;
    let m = T::lit(sources as f64);
    let two = T::lit(2.0);
    Ok(m2 / (two * m1) + ((m - T::one()) / two + m * odds(q)) * m1)
}

/// Cumulative average AoI of max-age-first scheduling with
/// `γ`-threshold-greedy attempts and perfect feedback.
///
/// Built from the per-turn service-time moments: the first attempt of a turn
/// waits `max{γ, τ}`, each retransmission waits one more `Exp(1)`.
pub fn aoi_maf_wfb<T: Scalar>(q: T, sources: usize, gamma: T) -> Result<T> {
    check_multi(q, sources, gamma)?;
    let MaxMoments { m1, m2 } = exp_max_moments(gamma)?;
    let two = T::lit(2.0);
    let s = T::one() - q;
    let r = odds(q);
    let mean = m1 + r;
    let second = m2 + two * m1 * r + two * q / (s * s);
    let m = T::lit(sources as f64);
    Ok(second / (two * mean) + (m - T::one()) * mean / two)
}

/// Closed-form AoI for the scheduler paired with `feedback`.
pub fn closed_form_aoi<T: Scalar>(q: T, sources: usize, feedback: Feedback, gamma: T) -> Result<T> {
    match feedback {
        Feedback::NoFeedback => aoi_rr_nofb(q, sources, gamma),
        Feedback::WithFeedback => aoi_maf_wfb(q, sources, gamma),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptimum<T> {
    pub gamma: T,
    pub aoi: T,
}

/// Best threshold for the multi-source closed forms.
///
/// Golden-section search over `[bracket_lo, bracket_hi]`, then an explicit
/// comparison against the greedy boundary `γ = 0`, which wins ties. The
/// boundary comparison tolerates a few ulps since both closed forms are flat
/// (zero derivative) at `γ = 0`.
pub fn optimize_gamma<T: Scalar>(
    q: T,
    sources: usize,
    feedback: Feedback,
    cfg: &RootSolverConfig<T>,
) -> Result<GammaOptimum<T>> {
    check_multi(q, sources, T::zero())?;
    cfg.validate()?;
    let f = |g: T| closed_form_aoi(q, sources, feedback, g).unwrap_or(T::infinity());
    let lo = cfg.bracket_lo.max(T::zero());
    let (g_int, f_int) = golden_section_min(f, lo, cfg.bracket_hi, cfg.tol, cfg.max_iter)?;
    let f_zero = f(T::zero());
    let slack = T::lit(4.0) * T::epsilon() * f_zero.abs();
    if f_zero <= f_int + slack {
        Ok(GammaOptimum {
            gamma: T::zero(),
            aoi: f_zero,
        })
    } else {
        Ok(GammaOptimum {
            gamma: g_int,
            aoi: f_int,
        })
    }
}

/// Optimal AoI with an infinite battery: `(1+q)/(2(1-q))` without feedback,
/// `1/(2(1-q))` with it. A lower bound for the unit-battery system.
pub fn baseline_infinite_battery<T: Scalar>(q: T, feedback: Feedback) -> Result<T> {
    check_erasure(q)?;
    let one = T::one();
    let denom = T::lit(2.0) * (one - q);
    Ok(match feedback {
        Feedback::NoFeedback => (one + q) / denom,
        Feedback::WithFeedback => one / denom,
    })
}

/// Single-source AoI reduction from feedback: `λ*_noFB - λ*_wFB`.
pub fn feedback_gain<T: Scalar>(q: T, cfg: &RootSolverConfig<T>) -> Result<T> {
    Ok(solve_nofb(q, cfg)?.lambda_star - solve_wfb(q, cfg)?.lambda_star)
}

/// Percentage AoI reduction from feedback for `sources` sources, both
/// settings at their own optimal thresholds.
pub fn percentage_gain<T: Scalar>(q: T, sources: usize, cfg: &RootSolverConfig<T>) -> Result<T> {
    let nofb = optimize_gamma(q, sources, Feedback::NoFeedback, cfg)?.aoi;
    let wfb = optimize_gamma(q, sources, Feedback::WithFeedback, cfg)?.aoi;
    Ok((T::one() - wfb / nofb) * T::lit(100.0))
}
