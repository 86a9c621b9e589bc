//! Acceptance suite. Runs every criterion, prints one line each and exits
//! nonzero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use aoi_harvest::analytic::{
    aoi_maf_wfb, aoi_rr_nofb, baseline_infinite_battery, feedback_gain, optimize_gamma, percentage_gain, solve_nofb,
    solve_wfb,
};
use aoi_harvest::sim::{run_simulation, run_simulation_with_streams, RngStreams, SimConfig, StopRule};
use aoi_harvest::stats::{grid_oracle_gamma, grid_oracle_gamma_sim, validate};
use aoi_harvest::{ChannelSpec, Feedback, PolicySpec, Regime, RootSolverConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn cfg() -> RootSolverConfig {
    RootSolverConfig::default()
}

fn q_grid() -> Vec<f64> {
    (0..=18).map(|i| i as f64 * 0.05).collect()
}

fn sim(q: f64, m: usize, fb: Feedback, gamma: f64, epochs: u64, seed: u64) -> SimConfig {
    SimConfig::new(
        ChannelSpec::new(q).unwrap(),
        m,
        PolicySpec::for_sources(fb, m, gamma).unwrap(),
        StopRule::EpochsPerSource(epochs),
        seed,
    )
    .unwrap()
}

fn check(cond: bool, msg: String) -> Result<(), String> {
    if cond { Ok(()) } else { Err(msg) }
}

fn greedy_exactness() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (i, q) in [0.5, 0.6, 0.75].into_iter().enumerate() {
        let s = solve_nofb(q, &cfg()).map_err(|e| e.to_string())?;
        let exact = 1.0 / (1.0 - q);
        check(s.regime == Regime::Greedy, format!("q={q}: regime {}", s.regime))?;
        check((s.lambda_star - exact).abs() <= 4.0 * f64::EPSILON * exact, format!("q={q}: λ*={}", s.lambda_star))?;
        let r = run_simulation(&sim(q, 1, Feedback::NoFeedback, 0.0, 100_000, 100 + i as u64)).unwrap().result;
        let rel = (r.cumulative_mean - exact).abs() / exact;
        check(rel <= 0.01, format!("q={q}: sim {} vs {exact}", r.cumulative_mean))?;
        worst = worst.max(rel);
    }
    let secs = start.elapsed().as_secs_f64();
    check(secs < 5.0, format!("took {secs:.2}s"))?;
    Ok(format!("worst sim rel err {:.3}%, {secs:.2}s", worst * 100.0))
}

fn erasure_free_reduction() -> Outcome {
    let n = solve_nofb(0.0, &cfg()).unwrap().lambda_star;
    let w = solve_wfb(0.0, &cfg()).unwrap().lambda_star;
    check((n - w).abs() <= 1e-8, format!("{n} vs {w}"))?;
    let residual = (-n).exp() - n * n / 2.0;
    check(residual.abs() <= 1e-10, format!("residual {residual:e}"))?;
    check((n - 0.9012).abs() < 1e-4, format!("root {n}"))?;
    Ok(format!("λ*={n:.10}, |Δ|={:.1e}", (n - w).abs()))
}

fn sim_grid() -> Outcome {
    let start = Instant::now();
    let mut cells = Vec::new();
    for q in [0.1, 0.3, 0.5, 0.7] {
        for m in [1usize, 2, 4, 8] {
            for fb in Feedback::ALL {
                let star = optimize_gamma(q, m, fb, &cfg()).unwrap().gamma;
                for gamma in [0.0, star] {
                    cells.push((q, m, fb, gamma));
                }
            }
        }
    }
    let verdicts: Vec<_> = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(q, m, fb, g))| validate(q, m, fb, g, 100_000, 1000 + i as u64).unwrap())
        .collect();
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<String> = verdicts
        .iter()
        .filter(|v| !v.pass)
        .map(|v| format!("(q={}, M={}, {}, γ={:.3}: {:.4} vs {:.4})", v.q, v.sources, v.feedback, v.gamma, v.sim.point, v.analytic))
        .collect();
    check(failed.is_empty(), format!("{} of {} cells fail: {}", failed.len(), cells.len(), failed.join(" ")))?;
    check(secs < 120.0, format!("took {secs:.1}s"))?;
    let worst = verdicts.iter().map(|v| v.abs_error() / v.analytic).fold(0.0, f64::max);
    Ok(format!("{} cells, worst rel err {:.3}%, {secs:.1}s", cells.len(), worst * 100.0))
}

fn consistency_identities() -> Outcome {
    let mut worst = 0.0f64;
    for i in 2..=9 {
        let q = i as f64 * 0.05;
        let s = solve_nofb(q, &cfg()).unwrap();
        let v = aoi_rr_nofb(q, 1, s.threshold).unwrap();
        let rel = (v - s.lambda_star).abs() / s.lambda_star;
        check(rel <= 1e-6, format!("noFB q={q}: {v} vs {}", s.lambda_star))?;
        worst = worst.max(rel);
    }
    for i in 2..=18 {
        let q = i as f64 * 0.05;
        let s = solve_wfb(q, &cfg()).unwrap();
        let v = aoi_maf_wfb(q, 1, s.threshold).unwrap();
        let rel = (v - s.lambda_star).abs() / s.lambda_star;
        check(rel <= 1e-6, format!("wFB q={q}: {v} vs {}", s.lambda_star))?;
        worst = worst.max(rel);
    }
    Ok(format!("worst rel err {worst:.1e}"))
}

fn greedy_crossover() -> Outcome {
    let first_zero = |fb: Feedback| (1..=10).find(|&m| optimize_gamma(0.3, m, fb, &cfg()).unwrap().gamma == 0.0);
    let stars = |fb: Feedback| -> Vec<String> {
        (1..=4).map(|m| format!("{:.3}", optimize_gamma(0.3, m, fb, &cfg()).unwrap().gamma)).collect()
    };
    let n = first_zero(Feedback::NoFeedback);
    let w = first_zero(Feedback::WithFeedback);
    let detail = format!(
        "first γ*=0 at M={n:?} (noFB), M={w:?} (wFB); γ*(M=1..4) noFB [{}] wFB [{}]",
        stars(Feedback::NoFeedback).join(", "),
        stars(Feedback::WithFeedback).join(", ")
    );
    check(n == Some(3) && w == Some(4), format!("expected M=3 and M=4; {detail}"))?;
    Ok(detail)
}

fn monotonicity() -> Outcome {
    let mut prev = (0.0, f64::INFINITY, 0.0);
    for q in q_grid() {
        let n = solve_nofb(q, &cfg()).unwrap();
        let w = solve_wfb(q, &cfg()).unwrap();
        check(n.lambda_star >= prev.0, format!("λ*_noFB drops at q={q}"))?;
        check(w.lambda_star >= prev.2, format!("λ*_wFB drops at q={q}"))?;
        if q < 0.5 {
            check(n.threshold <= prev.1, format!("λ' rises at q={q}"))?;
            prev.1 = n.threshold;
        }
        prev.0 = n.lambda_star;
        prev.2 = w.lambda_star;
    }
    Ok(format!("{} grid points", q_grid().len()))
}

fn baseline_bounds() -> Outcome {
    let mut margin = f64::INFINITY;
    for q in q_grid() {
        for (fb, l) in [
            (Feedback::NoFeedback, solve_nofb(q, &cfg()).unwrap().lambda_star),
            (Feedback::WithFeedback, solve_wfb(q, &cfg()).unwrap().lambda_star),
        ] {
            let b = baseline_infinite_battery(q, fb).unwrap();
            check(l >= b, format!("{fb} q={q}: {l} < {b}"))?;
            margin = margin.min(l - b);
        }
    }
    Ok(format!("smallest margin {margin:.4}"))
}

fn feedback_gain_shape() -> Outcome {
    let gains: Vec<(f64, f64)> = q_grid().into_iter().map(|q| (q, feedback_gain(q, &cfg()).unwrap())).collect();
    let min = gains.iter().map(|g| g.1).fold(f64::INFINITY, f64::min);
    check(min >= 0.0, format!("negative gain {min}"))?;
    let (q_best, g_best) = gains.iter().copied().fold((0.0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
    check((0.25..=0.55).contains(&q_best), format!("argmax at q={q_best}"))?;
    Ok(format!("argmax q={q_best:.2} gain={g_best:.4}"))
}

fn large_m_asymptote() -> Outcome {
    let g = percentage_gain(0.3, 200, &cfg()).unwrap();
    let limit = 0.3 / 1.3 * 100.0;
    check((g - limit).abs() <= 1.0, format!("{g:.4}% vs {limit:.4}%"))?;
    Ok(format!("{g:.4}% vs limit {limit:.4}%"))
}

fn oracle_agreement() -> Outcome {
    let step = 1e-3;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..12 {
        let q = rng.random_range(0.0..0.9);
        let m = rng.random_range(1..=8usize);
        let fb = Feedback::ALL[rng.random_range(0..2)];
        let grid = grid_oracle_gamma(q, m, fb, step).unwrap();
        let opt = optimize_gamma(q, m, fb, &cfg()).unwrap().gamma;
        check((grid - opt).abs() <= step, format!("(q={q:.3}, M={m}, {fb}): grid {grid} vs {opt}"))?;
        worst = worst.max((grid - opt).abs());
    }
    let mut bands = Vec::new();
    for (i, (q, m, fb)) in [(0.3, 1, Feedback::NoFeedback), (0.3, 1, Feedback::WithFeedback), (0.3, 2, Feedback::WithFeedback)]
        .into_iter()
        .enumerate()
    {
        let star = optimize_gamma(q, m, fb, &cfg()).unwrap().gamma;
        // γ* itself is one of the simulated points.
        let mut grid: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        grid.push(star);
        grid.sort_by(f64::total_cmp);
        let search = grid_oracle_gamma_sim(q, m, fb, &grid, 10_000, 500 + i as u64).unwrap();
        let (lo, hi) = search.band();
        check(lo <= star && star <= hi, format!("(q={q}, M={m}, {fb}): γ*={star:.3} outside [{lo:.2}, {hi:.2}]"))?;
        bands.push(format!("γ*={star:.3}∈[{lo:.2},{hi:.2}]"));
    }
    Ok(format!("12 triples, max |Δγ| {worst:.1e}; {}", bands.join(" ")))
}

fn simulator_invariants() -> Outcome {
    let mut attempts = Vec::new();
    let mut runs = 0;
    for q in [0.3, 0.6] {
        let (mut n_attempts, mut n_epochs) = (0u64, 0u64);
        for fb in Feedback::ALL {
            for m in [1usize, 2, 4] {
                let seed = 7000 + runs;
                runs += 1;
                let c = sim(q, m, fb, 0.5, 10_000, seed).with_trace(true);
                let out = run_simulation(&c).unwrap();
                let log = out.log.as_ref().unwrap();
                let audit = log.audit().map_err(|e| format!("q={q} M={m} {fb}: {e}"))?;
                check(audit.max_level <= 1, format!("battery reached {}", audit.max_level))?;
                n_attempts += out.epochs.iter().map(|e| e.attempts as u64).sum::<u64>();
                n_epochs += out.epochs.len() as u64;

                let again = run_simulation(&c).unwrap();
                check(again.log.unwrap().dump() == log.dump(), format!("q={q} M={m} {fb}: logs differ for one seed"))?;

                if fb == Feedback::NoFeedback {
                    let a = run_simulation_with_streams(&c, RngStreams::split(seed, 1)).unwrap().log.unwrap();
                    let b = run_simulation_with_streams(&c, RngStreams::split(seed, 2)).unwrap().log.unwrap();
                    let (ta, tb) = (a.attempt_times(), b.attempt_times());
                    let k = ta.len().min(tb.len());
                    check(ta[..k] == tb[..k], format!("q={q} M={m}: attempt times depend on erasures"))?;
                }
            }
        }
        let mean = n_attempts as f64 / n_epochs as f64;
        let expected = 1.0 / (1.0 - q);
        check((mean - expected).abs() <= 0.01 * expected, format!("q={q}: attempts/epoch {mean} vs {expected}"))?;
        attempts.push(format!("q={q}: {mean:.4}/{expected:.4}"));
    }
    Ok(format!("{runs} traced runs; attempts per epoch {}", attempts.join(", ")))
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 11] = [
        (1, "greedy regime exactness", greedy_exactness),
        (2, "erasure-free reduction", erasure_free_reduction),
        (3, "simulation vs closed form grid", sim_grid),
        (4, "single-source identities", consistency_identities),
        (5, "greedy crossover at q=0.3", greedy_crossover),
        (6, "monotonicity", monotonicity),
        (7, "infinite-battery bounds", baseline_bounds),
        (8, "feedback gain shape", feedback_gain_shape),
        (9, "large-M gain asymptote", large_m_asymptote),
        (10, "threshold oracles", oracle_agreement),
        (11, "simulator invariants", simulator_invariants),
    ];
    let mut failures = 0;
    for (n, name, f) in criteria {
        match f() {
            Ok(detail) => println!("criterion {n}: PASS  {name}: {detail}"),
            Err(detail) => {
                failures += 1;
                println!("criterion {n}: FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", 11 - failures);
    if failures == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE }
}
