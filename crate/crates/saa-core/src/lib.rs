//! Simulation engine and analysis toolkit for simultaneous ascending
//! auctions: prediction-based bidding strategies, self-confirming price
//! distributions derived by iterated Monte Carlo simulation, and
//! empirical game-theoretic analysis of strategy profiles.

pub mod assignment;
pub mod auction;
pub mod ega;
pub mod env;
pub mod parallel;
pub mod rng;
pub mod solver;
pub mod strategy;
pub mod valuation;

pub use auction::{
    admit_bids, is_quiescent, open_auction, run_auction, run_auction_specs, Agent,
    AuctionConfig, AuctionError, AuctionOutcome, BidSet, CompiledAgent, QuoteState,
};
pub use ega::{
    bootstrap_gain, build_default_roster, enumerate_profiles, epsilon_bound,
    estimate_profile, iterated_dominance, profile_count, replicator_dynamics,
    verify_pure_symmetric_nash, BootstrapReport, EgaError, EmpiricalGame,
    MixedStrategy, PayoffEntry, PayoffStats, Profile, ReplicatorOutcome,
    RosterArtifacts, RosterBuildParams, StrategyRoster,
};
pub use env::{EnvError, EnvironmentSpec, PreferenceModel};
pub use solver::{
    derive_sc, describe, empirical_marginals, ks_marg, ks_statistic, PriceStats,
    ScResult, ScSolverParams, SolverError,
};
pub use strategy::{
    generate_bids, MarginalPriceDistribution, PointPrediction, StrategySpec,
};
pub use valuation::{
    optimal_bundle, sample_valuation, Bundle, JobLengthModel, SchedulingValuation,
    TableValuation, Valuation,
};
