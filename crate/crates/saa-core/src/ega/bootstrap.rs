//! Sampling-error adjustment by parametric bootstrap.
//!
//! Payoff estimates carry Monte Carlo noise. Each resample redraws every
//! relevant profile payoff as the mean of 30 normal observations, each
//! standing for one batch of `games / 30` simulated games, then re-runs
//! the deviation-gain check. The 30-observation average reproduces the
//! estimator's sampling distribution (variance `observed variance /
//! games`), yielding an adjusted gain and the probability that the
//! candidate profile is an exact equilibrium.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EgaError, EmpiricalGame, PayoffStats, Profile};

/// Observations drawn per payoff per resample.
const OBSERVATIONS_PER_RESAMPLE: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// Point-estimate deviation gain (the ϵ of the all-candidate profile).
    pub raw_gain: f64,
    /// Point-estimate gain as a percentage of the all-candidate payoff.
    pub raw_pct_gain: f64,
    /// Mean over resamples of the best deviation gain, clamped at zero,
    /// as a percentage of the resampled all-candidate payoff.
    pub adjusted_pct_gain: f64,
    /// Fraction of resamples in which no deviation was profitable.
    pub nash_probability: f64,
    pub resamples: u64,
}

/// Resamples the payoffs relevant to the all-`strategy` profile and its
/// unilateral deviations. Zero-variance entries are exact constants.
pub fn bootstrap_gain(
    game: &EmpiricalGame,
    strategy: usize,
    resamples: u64,
    rng: &mut impl Rng,
) -> Result<BootstrapReport, EgaError> {
    let roster_size = game.roster.len();
    if strategy >= roster_size {
        return Err(EgaError::StrategyOutOfRange(strategy, roster_size));
    }
    let base = Profile::all_playing(strategy, game.environment.num_agents, roster_size);
    let base_stats = game
        .entry(&base)
        .and_then(|e| e.by_strategy.get(&strategy))
        .copied()
        .ok_or_else(|| EgaError::MissingProfile(base.counts().to_vec()))?;

    let mut deviation_stats = Vec::new();
    for other in 0..roster_size {
        if other == strategy {
            continue;
        }
        let deviation = base.deviate(strategy, other).expect("base is all-strategy");
        let stats = game
            .entry(&deviation)
            .and_then(|e| e.by_strategy.get(&other))
            .copied()
            .ok_or_else(|| EgaError::MissingProfile(deviation.counts().to_vec()))?;
        deviation_stats.push(stats);
    }

    let raw_gain = deviation_stats
        .iter()
        .map(|d| d.mean - base_stats.mean)
        .fold(0.0f64, f64::max);
    let raw_pct_gain = percentage(raw_gain, base_stats.mean);

    fn resample<R: Rng + ?Sized>(stats: &PayoffStats, rng: &mut R) -> f64 {
        if stats.variance <= 0.0 {
            return stats.mean;
        }
        // one observation = the mean of a batch of games/30 games
        let batch_variance =
            stats.variance * OBSERVATIONS_PER_RESAMPLE as f64 / stats.games as f64;
        let normal =
            Normal::new(stats.mean, batch_variance.sqrt()).expect("finite parameters");
        let total: f64 = (0..OBSERVATIONS_PER_RESAMPLE)
            .map(|_| normal.sample(rng))
            .sum();
        total / OBSERVATIONS_PER_RESAMPLE as f64
    }

    let mut pct_sum = 0.0;
    let mut nash_count = 0u64;
    for _ in 0..resamples {
        let base_draw = resample(&base_stats, rng);
        let best_gain = deviation_stats
            .iter()
            .map(|d| resample(d, rng) - base_draw)
            .fold(f64::NEG_INFINITY, f64::max);
        // the empty deviation set is vacuously an equilibrium
        let best_gain = if deviation_stats.is_empty() { 0.0 } else { best_gain };
        if best_gain <= 0.0 {
            nash_count += 1;
        }
        pct_sum += percentage(best_gain.max(0.0), base_draw);
    }

    Ok(BootstrapReport {
        raw_gain,
        raw_pct_gain,
        adjusted_pct_gain: if resamples > 0 { pct_sum / resamples as f64 } else { 0.0 },
        nash_probability: if resamples > 0 {
            nash_count as f64 / resamples as f64
        } else {
            0.0
        },
        resamples,
    })
}

fn percentage(gain: f64, base: f64) -> f64 {
    if base.abs() < 1e-12 {
        return 0.0;
    }
    100.0 * gain / base
}
