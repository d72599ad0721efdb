//! The default strategy roster: the three strategy families instantiated
//! from baseline simulations of the environment itself.

use serde::{Deserialize, Serialize};

use super::{EgaError, StrategyRoster};
use crate::env::EnvironmentSpec;
use crate::rng::{stream, SeedStream};
use crate::solver::{derive_sc, describe, price_batch, ScResult, ScSolverParams};
use crate::strategy::{MarginalPriceDistribution, StrategySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterBuildParams {
    /// Games simulated for the all-straightforward baseline distribution.
    pub sb_samples: u64,
    /// Parameters for deriving the self-confirming distribution.
    pub solver: ScSolverParams,
}

impl Default for RosterBuildParams {
    fn default() -> Self {
        RosterBuildParams { sb_samples: 100_000, solver: ScSolverParams::desk_scale() }
    }
}

/// Derived inputs the roster was built from, kept for reporting.
#[derive(Debug, Clone)]
pub struct RosterArtifacts {
    /// Final-price distribution under all-straightforward play.
    pub sb_distribution: MarginalPriceDistribution,
    /// Self-confirming derivation output.
    pub sc_result: ScResult,
}

fn rounded_means(dist: &MarginalPriceDistribution, scale: f64, cap: u32) -> Vec<u32> {
    describe(dist)
        .iter()
        .map(|s| ((s.mean * scale).round().max(0.0) as u32).min(cap))
        .collect()
}

/// Builds the default eight-strategy roster: straightforward bidding,
/// point predictors at zero / the baseline means / the self-confirming
/// means and scalar multiples of them, and distribution predictors on the
/// baseline and self-confirming distributions.
pub fn build_default_roster(
    env: &EnvironmentSpec,
    params: &RosterBuildParams,
) -> Result<(StrategyRoster, RosterArtifacts), EgaError> {
    let sb_seeds = SeedStream::new(env.seed).derive(stream::SB_BASELINE);
    let sb_distribution =
        price_batch(env, &StrategySpec::Sb, params.sb_samples, sb_seeds)?;
    let sc_result = derive_sc(env, &params.solver)?;

    let cap = env.price_cap;
    let pi_sb = rounded_means(&sb_distribution, 1.0, cap);
    let pi_sc = rounded_means(&sc_result.distribution, 1.0, cap);
    let pi_sc_low = rounded_means(&sc_result.distribution, 0.5, cap);
    let pi_sc_high = rounded_means(&sc_result.distribution, 1.5, cap);

    let roster = StrategyRoster::new(vec![
        ("SB".into(), StrategySpec::Sb),
        ("PP(pi=0)".into(), StrategySpec::point(vec![0; env.num_goods])),
        ("PP(pi^SB)".into(), StrategySpec::point(pi_sb)),
        ("PP(pi^SC)".into(), StrategySpec::point(pi_sc)),
        ("PP(0.5pi^SC)".into(), StrategySpec::point(pi_sc_low)),
        ("PP(1.5pi^SC)".into(), StrategySpec::point(pi_sc_high)),
        ("PP(F^SB)".into(), StrategySpec::dist(sb_distribution.clone())),
        ("PP(F^SC)".into(), StrategySpec::dist(sc_result.distribution.clone())),
    ])?;

    Ok((roster, RosterArtifacts { sb_distribution, sc_result }))
}
