//! Discrete-time replicator dynamics on a clique subgame.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::analysis::{complete_clique_profiles, payoff_against};
use super::{enumerate_profiles, EgaError, EmpiricalGame, Profile};

/// A probability vector over the roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedStrategy {
    pub probs: Vec<f64>,
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self, EgaError> {
        if probs.iter().any(|&p| p < 0.0 || !p.is_finite()) {
            return Err(EgaError::BadMixture("negative or non-finite probability"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(EgaError::BadMixture("probabilities do not sum to 1"));
        }
        Ok(MixedStrategy { probs })
    }

    /// Uniform over the clique, zero elsewhere.
    pub fn uniform_over(clique: &BTreeSet<usize>, roster_size: usize) -> Self {
        let mut probs = vec![0.0; roster_size];
        for &s in clique {
            probs[s] = 1.0 / clique.len() as f64;
        }
        MixedStrategy { probs }
    }

    /// Mass on one strategy.
    pub fn mass_on(&self, strategy: usize) -> f64 {
        self.probs.get(strategy).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatorOutcome {
    pub mixture: MixedStrategy,
    pub steps_used: usize,
    /// Largest component change in the final step.
    pub residual: f64,
    pub converged: bool,
    /// Best-response gain against the terminal mixture (its ϵ as an
    /// equilibrium of the clique subgame).
    pub best_response_gain: f64,
}

/// Expected payoff of each clique member against `N - 1` opponents drawn
/// iid from `mixture`, by exact enumeration of opponent profiles.
fn expected_payoffs(
    game: &EmpiricalGame,
    members: &[usize],
    mixture: &[f64],
    num_agents: usize,
) -> Result<Vec<f64>, EgaError> {
    let roster_size = game.roster.len();
    let mut totals = vec![0.0; members.len()];
    if num_agents == 1 {
        let empty = Profile::new(vec![0; roster_size]);
        for (k, &s) in members.iter().enumerate() {
            totals[k] = payoff_against(game, s, &empty)?;
        }
        return Ok(totals);
    }
    let opponents = enumerate_profiles(num_agents - 1, members.len());
    for local in opponents {
        // multinomial probability of this opponent draw
        let mut log_weight = ln_factorial(num_agents - 1);
        let mut prob = 1.0;
        for (k, &c) in local.counts().iter().enumerate() {
            log_weight -= ln_factorial(c);
            prob *= mixture[k].powi(c as i32);
        }
        let weight = log_weight.exp() * prob;
        if weight == 0.0 {
            continue;
        }
        let mut counts = vec![0usize; roster_size];
        for (k, &c) in local.counts().iter().enumerate() {
            counts[members[k]] = c;
        }
        let opp = Profile::new(counts);
        for (k, &s) in members.iter().enumerate() {
            totals[k] += weight * payoff_against(game, s, &opp)?;
        }
    }
    Ok(totals)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Iterates `x_i ∝ x_i · (u_i - min u + 1)` from `init` until the largest
/// component change is at most `tol` or `steps` run out. Requires a
/// complete clique subgame and an initial mixture supported on the clique.
pub fn replicator_dynamics(
    game: &EmpiricalGame,
    clique: &BTreeSet<usize>,
    init: &MixedStrategy,
    steps: usize,
    tol: f64,
) -> Result<ReplicatorOutcome, EgaError> {
    let num_agents = game.environment.num_agents;
    complete_clique_profiles(game, clique, num_agents)?;
    if init.probs.len() != game.roster.len() {
        return Err(EgaError::BadMixture("mixture length differs from roster size"));
    }
    for (s, &p) in init.probs.iter().enumerate() {
        if p > 0.0 && !clique.contains(&s) {
            return Err(EgaError::BadMixture("mixture has mass outside the clique"));
        }
    }

    let members: Vec<usize> = clique.iter().copied().collect();
    let mut x: Vec<f64> = members.iter().map(|&s| init.probs[s]).collect();
    let mut residual = f64::INFINITY;
    let mut steps_used = 0;
    let mut converged = false;

    for step in 0..steps {
        let payoffs = expected_payoffs(game, &members, &x, num_agents)?;
        let min = payoffs.iter().cloned().fold(f64::INFINITY, f64::min);
        // shift payoffs positive; the offset does not move fixed points
        let shifted: Vec<f64> = payoffs.iter().map(|&u| u - min + 1.0).collect();
        let mut next: Vec<f64> = x.iter().zip(&shifted).map(|(&p, &w)| p * w).collect();
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= total);
        residual = x
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        steps_used = step + 1;
        if residual <= tol {
            converged = true;
            break;
        }
    }

    let payoffs = expected_payoffs(game, &members, &x, num_agents)?;
    let value: f64 = x.iter().zip(&payoffs).map(|(&p, &u)| p * u).sum();
    let best_response_gain = payoffs
        .iter()
        .map(|&u| u - value)
        .fold(0.0f64, f64::max);

    let mut probs = vec![0.0; game.roster.len()];
    for (k, &s) in members.iter().enumerate() {
        probs[s] = x[k];
    }
    Ok(ReplicatorOutcome {
        mixture: MixedStrategy { probs },
        steps_used,
        residual,
        converged,
        best_response_gain,
    })
}
