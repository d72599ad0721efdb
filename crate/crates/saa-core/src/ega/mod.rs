//! Empirical game-theoretic analysis over a roster of strategies.
//!
//! Payoffs for symmetric strategy profiles are estimated by Monte Carlo
//! simulation; the resulting table supports pure-equilibrium verification,
//! deviation-gain bounds, iterated dominance on complete subgames,
//! replicator dynamics, and bootstrap sampling-error adjustment.

mod analysis;
mod bootstrap;
mod replicator;
mod roster;

pub use analysis::{epsilon_bound, iterated_dominance, verify_pure_symmetric_nash};
pub use bootstrap::{bootstrap_gain, BootstrapReport};
pub use replicator::{replicator_dynamics, MixedStrategy, ReplicatorOutcome};
pub use roster::{build_default_roster, RosterArtifacts, RosterBuildParams};

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assignment::max_weight_assignment;
use crate::auction::{run_auction, AuctionConfig, AuctionError, CompiledAgent};
use crate::env::{EnvError, EnvironmentSpec};
use crate::parallel::batch_fold_reduce;
use crate::rng::{mix64, stream, SeedStream};
use crate::strategy::{CompiledStrategy, StrategySpec};
use crate::valuation::Bundle;

#[derive(Debug, Error)]
pub enum EgaError {
    #[error("duplicate strategy label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown strategy label {0:?}")]
    UnknownLabel(String),
    #[error("profile counts {got:?} do not fit roster size {roster} and {agents} agents")]
    BadProfile { got: Vec<usize>, roster: usize, agents: usize },
    #[error("missing payoff entry for profile {0:?}")]
    MissingProfile(Vec<usize>),
    #[error("no unilateral deviations of {0:?} have been evaluated")]
    NoDeviationsEvaluated(Vec<usize>),
    #[error("clique subgame incomplete; first missing profile {0:?}")]
    IncompleteClique(Vec<usize>),
    #[error("strategy index {0} outside roster of size {1}")]
    StrategyOutOfRange(usize, usize),
    #[error("mixture invalid: {0}")]
    BadMixture(&'static str),
    #[error("profile count C({0}+{1}-1, {0}) overflows u64")]
    CountOverflow(usize, usize),
    #[error("games must be >= 1")]
    NoGames,
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("solver: {0}")]
    Solver(#[from] crate::solver::SolverError),
    #[error("simulation failed in game {game}: {source}")]
    Simulation { game: u64, source: AuctionError },
    #[error("empirical game tables disagree on environment or roster")]
    MergeMismatch,
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Ordered list of labeled strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyRoster {
    entries: Vec<(String, StrategySpec)>,
}

impl StrategyRoster {
    pub fn new(entries: Vec<(String, StrategySpec)>) -> Result<Self, EgaError> {
        for (i, (label, _)) in entries.iter().enumerate() {
            if entries[..i].iter().any(|(l, _)| l == label) {
                return Err(EgaError::DuplicateLabel(label.clone()));
            }
        }
        Ok(StrategyRoster { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn label(&self, index: usize) -> &str {
        &self.entries[index].0
    }

    pub fn spec(&self, index: usize) -> &StrategySpec {
        &self.entries[index].1
    }

    pub fn index_of(&self, label: &str) -> Result<usize, EgaError> {
        self.entries
            .iter()
            .position(|(l, _)| l == label)
            .ok_or_else(|| EgaError::UnknownLabel(label.to_string()))
    }

    pub fn entries(&self) -> &[(String, StrategySpec)] {
        &self.entries
    }
}

/// A symmetric-game profile: how many agents play each roster strategy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Profile {
    counts: Vec<usize>,
}

impl Profile {
    pub fn new(counts: Vec<usize>) -> Self {
        Profile { counts }
    }

    /// Everyone plays `strategy`.
    pub fn all_playing(strategy: usize, num_agents: usize, roster_size: usize) -> Self {
        let mut counts = vec![0; roster_size];
        counts[strategy] = num_agents;
        Profile { counts }
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn num_agents(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Strategies with at least one player.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, _)| s)
    }

    /// One player switches from `from` to `to`.
    pub fn deviate(&self, from: usize, to: usize) -> Option<Profile> {
        if from == to || self.counts.get(from).copied().unwrap_or(0) == 0 {
            return None;
        }
        let mut counts = self.counts.clone();
        counts[from] -= 1;
        counts[to] += 1;
        Some(Profile { counts })
    }

    /// Adds one player of `strategy`.
    pub fn plus(&self, strategy: usize) -> Profile {
        let mut counts = self.counts.clone();
        counts[strategy] += 1;
        Profile { counts }
    }

    fn content_hash(&self) -> u64 {
        let mut h = mix64(0x0f11e, self.counts.len() as u64);
        for &c in &self.counts {
            h = mix64(h, c as u64);
        }
        h
    }
}

/// Number of size-`num_agents` multisets over `roster_size` strategies:
/// C(N + S - 1, N).
pub fn profile_count(num_agents: usize, roster_size: usize) -> Result<u64, EgaError> {
    let n = num_agents as u64;
    let s = roster_size as u64;
    let mut result: u64 = 1;
    // C(n + s - 1, n) built multiplicatively with overflow checks
    for k in 1..=n {
        let numerator = s
            .checked_add(k)
            .and_then(|x| x.checked_sub(1))
            .and_then(|x| result.checked_mul(x))
            .ok_or(EgaError::CountOverflow(num_agents, roster_size))?;
        result = numerator / k; // exact: C(s+k-1, k) * k = C(s+k-2, k-1) * (s+k-1)
    }
    Ok(result)
}

/// All size-`num_agents` multisets over `roster_size` strategies in
/// lexicographic order of their count vectors.
pub fn enumerate_profiles(num_agents: usize, roster_size: usize) -> Vec<Profile> {
    assert!(num_agents >= 1 && roster_size >= 1);
    let mut out = Vec::new();
    let mut counts = vec![0usize; roster_size];
    fill_profiles(num_agents, 0, &mut counts, &mut out);
    out
}

fn fill_profiles(
    remaining: usize,
    strategy: usize,
    counts: &mut Vec<usize>,
    out: &mut Vec<Profile>,
) {
    if strategy == counts.len() - 1 {
        counts[strategy] = remaining;
        out.push(Profile::new(counts.clone()));
        counts[strategy] = 0;
        return;
    }
    for take in 0..=remaining {
        counts[strategy] = take;
        fill_profiles(remaining - take, strategy + 1, counts, out);
    }
    counts[strategy] = 0;
}

/// Mean payoff, sample variance of the per-game observations, and game
/// count for one strategy in one profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffStats {
    pub mean: f64,
    pub variance: f64,
    pub games: u64,
}

/// Efficiency report for batches where every sampled agent had
/// single-unit preference, measured against the assignment optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyStats {
    pub mean_allocation_value: f64,
    pub mean_optimal_value: f64,
    pub max_shortfall: i64,
    pub kappa: u32,
    /// kappa * (1 + kappa), the allocation-value bound.
    pub shortfall_bound: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoffEntry {
    pub by_strategy: BTreeMap<usize, PayoffStats>,
    pub efficiency: Option<EfficiencyStats>,
}

impl PayoffEntry {
    pub fn payoff(&self, strategy: usize) -> Option<f64> {
        self.by_strategy.get(&strategy).map(|s| s.mean)
    }
}

/// The estimated symmetric game: environment, roster, and a payoff table
/// keyed by profile.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalGame {
    pub environment: EnvironmentSpec,
    pub roster: StrategyRoster,
    payoffs: BTreeMap<Profile, PayoffEntry>,
}

impl EmpiricalGame {
    pub fn new(environment: EnvironmentSpec, roster: StrategyRoster) -> Self {
        EmpiricalGame { environment, roster, payoffs: BTreeMap::new() }
    }

    pub fn insert(&mut self, profile: Profile, entry: PayoffEntry) {
        self.payoffs.insert(profile, entry);
    }

    pub fn entry(&self, profile: &Profile) -> Option<&PayoffEntry> {
        self.payoffs.get(profile)
    }

    pub fn payoff(&self, profile: &Profile, strategy: usize) -> Option<f64> {
        self.entry(profile).and_then(|e| e.payoff(strategy))
    }

    pub fn profiles(&self) -> impl Iterator<Item = (&Profile, &PayoffEntry)> {
        self.payoffs.iter()
    }

    pub fn len(&self) -> usize {
        self.payoffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payoffs.is_empty()
    }

    /// Estimates and stores a profile's payoffs (skips profiles already
    /// estimated from at least as many games).
    pub fn ensure_estimated(
        &mut self,
        profile: &Profile,
        games: u64,
    ) -> Result<(), EgaError> {
        let have = self
            .entry(profile)
            .and_then(|e| e.by_strategy.values().next())
            .map_or(0, |s| s.games);
        if have >= games {
            return Ok(());
        }
        let entry = estimate_profile(
            &self.environment,
            &self.roster,
            profile,
            games,
            self.environment.seed,
        )?;
        self.insert(profile.clone(), entry);
        Ok(())
    }

    /// Keeps the better-sampled entry for profiles present in both
    /// tables. Environments and rosters must agree.
    pub fn merge(&mut self, other: EmpiricalGame) -> Result<(), EgaError> {
        if other.environment != self.environment || other.roster != self.roster {
            return Err(EgaError::MergeMismatch);
        }
        for (profile, entry) in other.payoffs {
            let keep_other = match self.payoffs.get(&profile) {
                None => true,
                Some(mine) => {
                    let my_games =
                        mine.by_strategy.values().next().map_or(0, |s| s.games);
                    let their_games =
                        entry.by_strategy.values().next().map_or(0, |s| s.games);
                    their_games > my_games
                }
            };
            if keep_other {
                self.payoffs.insert(profile, entry);
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&GameDto::from(self)).expect("game serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EgaError> {
        let dto: GameDto = serde_json::from_str(text)?;
        dto.into_game()
    }
}

#[derive(Serialize, Deserialize)]
struct RosterEntryDto {
    label: String,
    strategy: StrategySpec,
}

#[derive(Serialize, Deserialize)]
struct ProfileEntryDto {
    counts: Vec<usize>,
    payoffs: Vec<PayoffLineDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    efficiency: Option<EfficiencyStats>,
}

#[derive(Serialize, Deserialize)]
struct PayoffLineDto {
    strategy: usize,
    mean: f64,
    variance: f64,
    games: u64,
}

#[derive(Serialize, Deserialize)]
struct GameDto {
    schema_version: u32,
    environment: EnvironmentSpec,
    roster: Vec<RosterEntryDto>,
    profiles: Vec<ProfileEntryDto>,
}

impl From<&EmpiricalGame> for GameDto {
    fn from(game: &EmpiricalGame) -> Self {
        GameDto {
            schema_version: 1,
            environment: game.environment.clone(),
            roster: game
                .roster
                .entries()
                .iter()
                .map(|(label, strategy)| RosterEntryDto {
                    label: label.clone(),
                    strategy: strategy.clone(),
                })
                .collect(),
            profiles: game
                .payoffs
                .iter()
                .map(|(profile, entry)| ProfileEntryDto {
                    counts: profile.counts().to_vec(),
                    payoffs: entry
                        .by_strategy
                        .iter()
                        .map(|(&strategy, stats)| PayoffLineDto {
                            strategy,
                            mean: stats.mean,
                            variance: stats.variance,
                            games: stats.games,
                        })
                        .collect(),
                    efficiency: entry.efficiency,
                })
                .collect(),
        }
    }
}

impl GameDto {
    fn into_game(self) -> Result<EmpiricalGame, EgaError> {
        let roster = StrategyRoster::new(
            self.roster.into_iter().map(|e| (e.label, e.strategy)).collect(),
        )?;
        let mut game = EmpiricalGame::new(self.environment, roster);
        for p in self.profiles {
            let profile = Profile::new(p.counts);
            let mut by_strategy = BTreeMap::new();
            for line in p.payoffs {
                by_strategy.insert(
                    line.strategy,
                    PayoffStats {
                        mean: line.mean,
                        variance: line.variance,
                        games: line.games,
                    },
                );
            }
            game.insert(profile, PayoffEntry { by_strategy, efficiency: p.efficiency });
        }
        Ok(game)
    }
}

struct ProfileAccumulator {
    games: u64,
    /// per strategy: sum over games of the seats' total surplus and its
    /// square (exact integer arithmetic keeps reduction order irrelevant)
    sums: Vec<i128>,
    sq_sums: Vec<i128>,
    all_single_unit: bool,
    allocation_value: i128,
    optimal_value: i128,
    max_shortfall: i64,
    error: Option<(u64, AuctionError)>,
}

impl ProfileAccumulator {
    fn new(roster_size: usize) -> Self {
        ProfileAccumulator {
            games: 0,
            sums: vec![0; roster_size],
            sq_sums: vec![0; roster_size],
            all_single_unit: true,
            allocation_value: 0,
            optimal_value: 0,
            max_shortfall: 0,
            error: None,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.games += other.games;
        for (a, b) in self.sums.iter_mut().zip(other.sums) {
            *a += b;
        }
        for (a, b) in self.sq_sums.iter_mut().zip(other.sq_sums) {
            *a += b;
        }
        self.all_single_unit &= other.all_single_unit;
        self.allocation_value += other.allocation_value;
        self.optimal_value += other.optimal_value;
        self.max_shortfall = self.max_shortfall.max(other.max_shortfall);
        self.error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

/// Estimates one profile's payoffs: each game freshly samples valuations,
/// shuffles the profile's strategies onto seats, runs the auction, and
/// records each strategy's per-game total surplus. A strategy's payoff is
/// its mean per-seat surplus.
pub fn estimate_profile(
    env: &EnvironmentSpec,
    roster: &StrategyRoster,
    profile: &Profile,
    games: u64,
    master_seed: u64,
) -> Result<PayoffEntry, EgaError> {
    if games == 0 {
        return Err(EgaError::NoGames);
    }
    env.validate()?;
    if profile.counts().len() != roster.len() || profile.num_agents() != env.num_agents
    {
        return Err(EgaError::BadProfile {
            got: profile.counts().to_vec(),
            roster: roster.len(),
            agents: env.num_agents,
        });
    }

    let compiled: Vec<CompiledStrategy> = roster
        .entries()
        .iter()
        .map(|(_, spec)| CompiledStrategy::compile(spec))
        .collect();
    let seat_strategies: Vec<usize> = profile
        .counts()
        .iter()
        .enumerate()
        .flat_map(|(s, &c)| std::iter::repeat_n(s, c))
        .collect();
    let config = AuctionConfig::new(env.num_goods, env.price_cap);
    let seeds = SeedStream::new(master_seed)
        .derive(stream::PROFILE)
        .derive(profile.content_hash());

    let fold = |mut acc: ProfileAccumulator, game: u64| {
        if acc.error.is_some() {
            return acc;
        }
        let mut rng = seeds.rng_for(game);
        let valuations = env.sample_agent_valuations(&mut rng);
        let mut seats = seat_strategies.clone();
        seats.shuffle(&mut rng);
        let agents: Vec<CompiledAgent> = valuations
            .into_iter()
            .zip(&seats)
            .map(|(v, &s)| CompiledAgent::with_compiled(v, compiled[s].clone()))
            .collect();
        match run_auction(&config, &agents, &mut rng) {
            Ok(outcome) => {
                acc.games += 1;
                let mut per_strategy = vec![0i64; roster.len()];
                for (seat, &strategy) in seats.iter().enumerate() {
                    per_strategy[strategy] += outcome.agent_surpluses[seat];
                }
                for (s, &total) in per_strategy.iter().enumerate() {
                    acc.sums[s] += i128::from(total);
                    acc.sq_sums[s] += i128::from(total) * i128::from(total);
                }
                if agents.iter().all(|a| a.single_unit) {
                    let values: Vec<Vec<i64>> = agents
                        .iter()
                        .map(|a| {
                            (0..env.num_goods)
                                .map(|g| {
                                    i64::from(a.valuation.value(&Bundle::new(vec![g])))
                                })
                                .collect()
                        })
                        .collect();
                    let (optimal, _) = max_weight_assignment(&values);
                    let realized: i64 = (0..agents.len())
                        .map(|i| {
                            i64::from(agents[i].valuation.value(&outcome.bundle_of(i)))
                        })
                        .sum();
                    acc.allocation_value += i128::from(realized);
                    acc.optimal_value += i128::from(optimal);
                    acc.max_shortfall = acc.max_shortfall.max(optimal - realized);
                } else {
                    acc.all_single_unit = false;
                }
            }
            Err(e) => acc.error = Some((game, e)),
        }
        acc
    };

    let acc = batch_fold_reduce(
        games,
        || ProfileAccumulator::new(roster.len()),
        fold,
        ProfileAccumulator::merge,
    );
    if let Some((game, source)) = acc.error {
        return Err(EgaError::Simulation { game, source });
    }

    let mut by_strategy = BTreeMap::new();
    for s in profile.support() {
        let seat_count = profile.counts()[s] as f64;
        let g = acc.games as f64;
        // per-game observation: that game's mean surplus over the seats
        // playing s; integer sums keep this exact until the divisions
        let obs_sum = acc.sums[s] as f64 / seat_count;
        let obs_sq_sum = acc.sq_sums[s] as f64 / (seat_count * seat_count);
        let mean = obs_sum / g;
        let variance = if acc.games > 1 {
            ((obs_sq_sum - g * mean * mean) / (g - 1.0)).max(0.0)
        } else {
            0.0
        };
        by_strategy.insert(s, PayoffStats { mean, variance, games: acc.games });
    }

    let efficiency = if acc.all_single_unit {
        let n = env.num_agents.min(env.num_goods) as u32;
        Some(EfficiencyStats {
            mean_allocation_value: acc.allocation_value as f64 / acc.games as f64,
            mean_optimal_value: acc.optimal_value as f64 / acc.games as f64,
            max_shortfall: acc.max_shortfall,
            kappa: n,
            shortfall_bound: i64::from(n) * (1 + i64::from(n)),
        })
    } else {
        None
    };

    Ok(PayoffEntry { by_strategy, efficiency })
}
