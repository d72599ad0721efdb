//! The simultaneous ascending auction protocol.
//!
//! M goods sell in concurrent English auctions with unit bid increment.
//! Rounds are synchronous: every agent submits its bid set against the
//! same pre-round quotes, each good admits the highest bid (all bids are
//! at the ask price, so every bid on a good ties), and the auctions close
//! together once a round passes with no admission.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::rng::mix64;
use crate::strategy::{generate_bids_compiled, CompiledStrategy, StrategySpec};
use crate::valuation::{Bundle, Valuation};

/// The bid increment is fixed at one; prices are integers.
pub const BID_INCREMENT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionConfig {
    pub num_goods: usize,
    /// Largest conceivable price; quotes never exceed it.
    pub price_cap: u32,
    /// Always [`BID_INCREMENT`].
    pub bid_increment: u32,
    /// Safety bound on rounds; generous multiple of the worst case.
    pub max_rounds: usize,
}

impl AuctionConfig {
    pub fn new(num_goods: usize, price_cap: u32) -> Self {
        assert!(num_goods >= 1);
        assert!(price_cap >= 1);
        AuctionConfig {
            num_goods,
            price_cap,
            bid_increment: BID_INCREMENT,
            max_rounds: 10 * num_goods * price_cap as usize,
        }
    }

    pub fn with_max_rounds(mut self, max_rounds: usize) -> Self {
        assert!(max_rounds >= 1);
        self.max_rounds = max_rounds;
        self
    }
}

/// Revealed auction state after `round` rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuoteState {
    pub round: usize,
    /// Highest admitted bid per good; zero while no bid admitted.
    pub bid_prices: Vec<u32>,
    /// Standing winner per good.
    pub winner: Vec<Option<usize>>,
    /// Bid-price vector revealed after each elapsed round.
    pub price_history: Vec<Vec<u32>>,
}

impl QuoteState {
    pub fn winning_flags(&self, agent: usize) -> Vec<bool> {
        self.winner.iter().map(|w| *w == Some(agent)).collect()
    }
}

/// One round's bids: the set of goods each agent bids on. Every bid is at
/// the ask price (bid price plus one) by construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BidSet {
    pub per_agent: Vec<Bundle>,
}

impl BidSet {
    pub fn new(per_agent: Vec<Bundle>) -> Self {
        BidSet { per_agent }
    }

    pub fn any_bids(&self) -> bool {
        self.per_agent.iter().any(|b| !b.is_empty())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuctionOutcome {
    pub final_prices: Vec<u32>,
    pub allocation: Vec<Option<usize>>,
    pub agent_surpluses: Vec<i64>,
    pub rounds_used: usize,
    pub quiesced: bool,
}

impl AuctionOutcome {
    /// Goods allocated to `agent`.
    pub fn bundle_of(&self, agent: usize) -> Bundle {
        self.allocation
            .iter()
            .enumerate()
            .filter(|(_, w)| **w == Some(agent))
            .map(|(g, _)| g)
            .collect()
    }
}

/// Protocol violations signal buggy strategies, not recoverable states.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuctionError {
    #[error("bid set covers {got} agents, auction has {expected}")]
    WrongAgentCount { expected: usize, got: usize },
    #[error("agent {agent} bid on good {good} outside 0..{num_goods}")]
    GoodOutOfRange { agent: usize, good: usize, num_goods: usize },
    #[error("agent {agent} bid on good {good} it is already winning")]
    BidOnWinningGood { agent: usize, good: usize },
    #[error("agent {agent} bid on good {good} whose ask exceeds the price cap")]
    BidAboveCap { agent: usize, good: usize },
    #[error("valuation covers {got} goods, auction has {expected}")]
    WrongGoodCount { expected: usize, got: usize },
}

/// Initial quote state: round zero, zero prices, no winners, no history.
pub fn open_auction(config: &AuctionConfig) -> QuoteState {
    QuoteState {
        round: 0,
        bid_prices: vec![0; config.num_goods],
        winner: vec![None; config.num_goods],
        price_history: Vec::new(),
    }
}

/// True iff the round that just ran admitted no bid anywhere.
pub fn is_quiescent(any_admitted: bool) -> bool {
    !any_admitted
}

fn bundle_content_key(bundle: &Bundle) -> u64 {
    let mut h = mix64(0xb1d5, bundle.len() as u64);
    for &g in bundle.goods() {
        h = mix64(h, g as u64);
    }
    h
}

/// Admits the round's bids into `state` and reports whether anything was
/// admitted.
///
/// All bids on a good are at its ask price, so every contested good is a
/// tie; the winner is drawn uniformly from the tied bidders. One draw is
/// consumed per contested good in ascending good order, and the selection
/// is keyed to each bidder's full bid content (falling back to seat order
/// only between identical bid sets), so admission does not depend on how
/// agents are ordered.
pub fn admit_bids(
    config: &AuctionConfig,
    state: &mut QuoteState,
    bids: &BidSet,
    rng: &mut impl Rng,
) -> Result<bool, AuctionError> {
    let num_goods = config.num_goods;
    for (agent, bundle) in bids.per_agent.iter().enumerate() {
        for &good in bundle.goods() {
            if good >= num_goods {
                return Err(AuctionError::GoodOutOfRange { agent, good, num_goods });
            }
            if state.winner[good] == Some(agent) {
                return Err(AuctionError::BidOnWinningGood { agent, good });
            }
            if state.bid_prices[good] + BID_INCREMENT > config.price_cap {
                return Err(AuctionError::BidAboveCap { agent, good });
            }
        }
    }

    let content_keys: Vec<u64> =
        bids.per_agent.iter().map(bundle_content_key).collect();
    let mut any_admitted = false;
    for good in 0..num_goods {
        let bidders: Vec<usize> = (0..bids.per_agent.len())
            .filter(|&a| bids.per_agent[a].contains(good))
            .collect();
        if bidders.is_empty() {
            continue;
        }
        let draw = rng.next_u64();
        let winner = *bidders
            .iter()
            .max_by_key(|&&a| {
                (mix64(draw, content_keys[a]), mix64(draw ^ 0x5ea7, a as u64))
            })
            .expect("at least one bidder");
        state.bid_prices[good] += BID_INCREMENT;
        state.winner[good] = Some(winner);
        any_admitted = true;
    }
    state.round += 1;
    state.price_history.push(state.bid_prices.clone());
    Ok(any_admitted)
}

/// One bidder: a valuation paired with a bidding strategy.
#[derive(Debug, Clone)]
pub struct Agent {
    pub valuation: Valuation,
    pub strategy: StrategySpec,
}

/// An agent readied for simulation, with its strategy compiled and its
/// single-unit classification cached.
#[derive(Debug, Clone)]
pub struct CompiledAgent {
    pub valuation: Valuation,
    pub strategy: CompiledStrategy,
    pub single_unit: bool,
}

impl CompiledAgent {
    pub fn new(valuation: Valuation, spec: &StrategySpec) -> Self {
        let single_unit = valuation.is_single_unit();
        CompiledAgent { valuation, strategy: CompiledStrategy::compile(spec), single_unit }
    }

    /// Reuses an already compiled strategy (shared prediction tables).
    pub fn with_compiled(valuation: Valuation, strategy: CompiledStrategy) -> Self {
        let single_unit = valuation.is_single_unit();
        CompiledAgent { valuation, strategy, single_unit }
    }
}

/// Runs the auction to quiescence (or the round bound) and reports the
/// outcome. `observer` sees every round's bid set before admission.
pub fn run_auction_observed(
    config: &AuctionConfig,
    agents: &[CompiledAgent],
    rng: &mut ChaCha8Rng,
    mut observer: impl FnMut(usize, &BidSet),
) -> Result<AuctionOutcome, AuctionError> {
    assert!(!agents.is_empty(), "auction needs at least one agent");
    for a in agents {
        if a.valuation.num_goods() != config.num_goods {
            return Err(AuctionError::WrongGoodCount {
                expected: config.num_goods,
                got: a.valuation.num_goods(),
            });
        }
    }

    // Each agent draws its tie-break randomness from its own stream so
    // bid generation is independent of agent evaluation order.
    let agent_seed_base = rng.next_u64();
    let mut agent_rngs: Vec<ChaCha8Rng> = (0..agents.len())
        .map(|i| ChaCha8Rng::seed_from_u64(mix64(agent_seed_base, i as u64)))
        .collect();

    let mut state = open_auction(config);
    let mut quiesced = false;
    while state.round < config.max_rounds {
        let per_agent: Vec<Bundle> = agents
            .iter()
            .enumerate()
            .map(|(i, agent)| {
                generate_bids_compiled(
                    &agent.strategy,
                    &agent.valuation,
                    agent.single_unit,
                    &state.bid_prices,
                    &state.winning_flags(i),
                    config.price_cap,
                    &mut agent_rngs[i],
                )
            })
            .collect();
        let bids = BidSet::new(per_agent);
        observer(state.round, &bids);
        let any_admitted = admit_bids(config, &mut state, &bids, rng)?;
        if is_quiescent(any_admitted) {
            quiesced = true;
            break;
        }
    }

    let agent_surpluses = agents
        .iter()
        .enumerate()
        .map(|(i, agent)| {
            let bundle: Bundle = state
                .winner
                .iter()
                .enumerate()
                .filter(|(_, w)| **w == Some(i))
                .map(|(g, _)| g)
                .collect();
            agent.valuation.surplus(&bundle, &state.bid_prices)
        })
        .collect();

    Ok(AuctionOutcome {
        final_prices: state.bid_prices,
        allocation: state.winner,
        agent_surpluses,
        rounds_used: state.round,
        quiesced,
    })
}

pub fn run_auction(
    config: &AuctionConfig,
    agents: &[CompiledAgent],
    rng: &mut ChaCha8Rng,
) -> Result<AuctionOutcome, AuctionError> {
    run_auction_observed(config, agents, rng, |_, _| {})
}

/// Convenience entry point that compiles agents on the fly.
pub fn run_auction_specs(
    config: &AuctionConfig,
    agents: &[Agent],
    rng: &mut ChaCha8Rng,
) -> Result<AuctionOutcome, AuctionError> {
    let compiled: Vec<CompiledAgent> = agents
        .iter()
        .map(|a| CompiledAgent::new(a.valuation.clone(), &a.strategy))
        .collect();
    run_auction(config, &compiled, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::valuation::TableValuation;
    use rand::RngExt;

    fn sb_agent(valuation: Valuation) -> Agent {
        Agent { valuation, strategy: StrategySpec::Sb }
    }

    fn table1_agents() -> Vec<Agent> {
        let a1 = Valuation::Table(TableValuation::new(
            3,
            vec![(Bundle::new(vec![0, 1, 2]), 15)],
        ));
        let a2 = Valuation::Table(TableValuation::new(
            3,
            vec![
                (Bundle::new(vec![0]), 8),
                (Bundle::new(vec![1]), 6),
                (Bundle::new(vec![2]), 5),
                (Bundle::new(vec![0, 1, 2]), 8),
            ],
        ));
        let a3 = Valuation::Table(TableValuation::new(
            3,
            vec![
                (Bundle::new(vec![0]), 10),
                (Bundle::new(vec![1]), 8),
                (Bundle::new(vec![2]), 6),
                (Bundle::new(vec![0, 1, 2]), 10),
            ],
        ));
        vec![sb_agent(a1), sb_agent(a2), sb_agent(a3)]
    }

    #[test]
    fn open_auction_initial_state() {
        let state = open_auction(&AuctionConfig::new(3, 10));
        assert_eq!(state.round, 0);
        assert_eq!(state.bid_prices, vec![0, 0, 0]);
        assert!(state.winner.iter().all(Option::is_none));
        assert!(state.price_history.is_empty());

        let state = open_auction(&AuctionConfig::new(1, 5));
        assert_eq!(state.bid_prices, vec![0]);
        let state = open_auction(&AuctionConfig::new(5, 5));
        assert_eq!(state.price_history.len(), 0);
    }

    #[test]
    fn quiescence_flag() {
        assert!(is_quiescent(false));
        assert!(!is_quiescent(true));
    }

    #[test]
    fn single_bid_is_admitted() {
        let config = AuctionConfig::new(2, 10);
        let mut state = open_auction(&config);
        let bids = BidSet::new(vec![Bundle::new(vec![0]), Bundle::empty()]);
        let mut rng = SeedStream::new(1).rng_for(0);
        let admitted = admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
        assert!(admitted);
        assert_eq!(state.bid_prices, vec![1, 0]);
        assert_eq!(state.winner, vec![Some(0), None]);
        assert_eq!(state.round, 1);
        assert_eq!(state.price_history, vec![vec![1, 0]]);
    }

    #[test]
    fn empty_round_only_advances_round() {
        let config = AuctionConfig::new(2, 10);
        let mut state = open_auction(&config);
        let bids = BidSet::new(vec![Bundle::empty(), Bundle::empty()]);
        let mut rng = SeedStream::new(1).rng_for(1);
        let admitted = admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
        assert!(!admitted);
        assert!(is_quiescent(admitted));
        assert_eq!(state.bid_prices, vec![0, 0]);
        assert_eq!(state.round, 1);
    }

    #[test]
    fn two_way_tie_is_near_uniform() {
        let config = AuctionConfig::new(2, 10);
        let seeds = SeedStream::new(2);
        let mut wins0 = 0u32;
        let n: u32 = 4000;
        for i in 0..n {
            let mut state = open_auction(&config);
            // distinct bid contents so the draw is content-keyed
            let bids =
                BidSet::new(vec![Bundle::new(vec![0]), Bundle::new(vec![0, 1])]);
            let mut rng = seeds.rng_for(u64::from(i));
            admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
            assert_eq!(state.bid_prices, vec![1, 1]);
            if state.winner[0] == Some(0) {
                wins0 += 1;
            }
        }
        let frac = f64::from(wins0) / f64::from(n);
        assert!((frac - 0.5).abs() < 0.04, "tie split {frac}");
    }

    #[test]
    fn identical_bid_sets_split_ties_uniformly_too() {
        let config = AuctionConfig::new(1, 10);
        let seeds = SeedStream::new(3);
        let mut wins0 = 0u32;
        let n: u32 = 4000;
        for i in 0..n {
            let mut state = open_auction(&config);
            let bids = BidSet::new(vec![Bundle::new(vec![0]), Bundle::new(vec![0])]);
            let mut rng = seeds.rng_for(u64::from(i));
            admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
            if state.winner[0] == Some(0) {
                wins0 += 1;
            }
        }
        let frac = f64::from(wins0) / f64::from(n);
        assert!((frac - 0.5).abs() < 0.04, "tie split {frac}");
    }

    #[test]
    fn admission_is_agent_order_invariant() {
        // distinct bid contents, permuted seats, same underlying winners
        let config = AuctionConfig::new(3, 10);
        let contents = [
            Bundle::new(vec![0]),
            Bundle::new(vec![0, 1]),
            Bundle::new(vec![0, 1, 2]),
        ];
        let perms: [[usize; 3]; 6] = [
            [0, 1, 2],
            [0, 2, 1],
            [1, 0, 2],
            [1, 2, 0],
            [2, 0, 1],
            [2, 1, 0],
        ];
        for seed in 0..200u64 {
            let mut reference: Option<Vec<Option<usize>>> = None;
            for perm in perms {
                let mut state = open_auction(&config);
                let bids =
                    BidSet::new(perm.iter().map(|&k| contents[k].clone()).collect());
                let mut rng = SeedStream::new(4).rng_for(seed);
                admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
                // map seat winners back to underlying bidder identity
                let underlying: Vec<Option<usize>> = state
                    .winner
                    .iter()
                    .map(|w| w.map(|seat| perm[seat]))
                    .collect();
                match &reference {
                    None => reference = Some(underlying),
                    Some(r) => assert_eq!(r, &underlying, "seed {seed} perm {perm:?}"),
                }
            }
        }
    }

    #[test]
    fn protocol_violations_are_reported() {
        let config = AuctionConfig::new(2, 10);
        let mut state = open_auction(&config);
        let mut rng = SeedStream::new(5).rng_for(0);
        let bids = BidSet::new(vec![Bundle::new(vec![0])]);
        admit_bids(&config, &mut state, &bids, &mut rng).unwrap();
        // now agent 0 is winning good 0
        let again = BidSet::new(vec![Bundle::new(vec![0])]);
        assert_eq!(
            admit_bids(&config, &mut state, &again, &mut rng),
            Err(AuctionError::BidOnWinningGood { agent: 0, good: 0 })
        );
        let out_of_range = BidSet::new(vec![Bundle::new(vec![5])]);
        assert!(matches!(
            admit_bids(&config, &mut state, &out_of_range, &mut rng),
            Err(AuctionError::GoodOutOfRange { .. })
        ));
        state.bid_prices[1] = 10;
        state.winner[1] = Some(1);
        let capped = BidSet::new(vec![Bundle::new(vec![1])]);
        assert_eq!(
            admit_bids(&config, &mut state, &capped, &mut rng),
            Err(AuctionError::BidAboveCap { agent: 0, good: 1 })
        );
    }

    #[test]
    fn lone_bidder_wins_at_one() {
        let config = AuctionConfig::new(1, 10);
        let agent = sb_agent(Valuation::Table(TableValuation::new(
            1,
            vec![(Bundle::new(vec![0]), 5)],
        )));
        let mut rng = SeedStream::new(6).rng_for(0);
        let outcome = run_auction_specs(&config, &[agent], &mut rng).unwrap();
        assert_eq!(outcome.final_prices, vec![1]);
        assert_eq!(outcome.allocation, vec![Some(0)]);
        assert_eq!(outcome.agent_surpluses, vec![4]);
        assert!(outcome.quiesced);
        assert_eq!(outcome.rounds_used, 2);
    }

    #[test]
    fn worthless_goods_stay_unsold() {
        let config = AuctionConfig::new(3, 10);
        let agents: Vec<Agent> = (0..2)
            .map(|_| sb_agent(Valuation::Table(TableValuation::new(3, vec![]))))
            .collect();
        let mut rng = SeedStream::new(7).rng_for(0);
        let outcome = run_auction_specs(&config, &agents, &mut rng).unwrap();
        assert_eq!(outcome.final_prices, vec![0, 0, 0]);
        assert!(outcome.allocation.iter().all(Option::is_none));
        assert!(outcome.quiesced);
        assert_eq!(outcome.rounds_used, 1);
    }

    #[test]
    fn exposure_bites_the_bundle_bidder() {
        // complement-seeking agent 1 always ends negative under all-SB
        let config = AuctionConfig::new(3, 20);
        let agents = table1_agents();
        let seeds = SeedStream::new(8);
        for i in 0..200 {
            let mut rng = seeds.rng_for(i);
            let outcome = run_auction_specs(&config, &agents, &mut rng).unwrap();
            assert!(outcome.quiesced);
            assert!(
                outcome.agent_surpluses[0] < 0,
                "seed {i}: surpluses {:?} prices {:?}",
                outcome.agent_surpluses,
                outcome.final_prices
            );
        }
    }

    #[test]
    fn prices_monotone_payments_conserved_and_quiescent() {
        let seeds = SeedStream::new(9);
        for i in 0..300u64 {
            let mut rng = seeds.rng_for(i);
            let m = rng.random_range(1..=4usize);
            let n = rng.random_range(1..=4usize);
            let config = AuctionConfig::new(m, 55);
            let agents: Vec<CompiledAgent> = (0..n)
                .map(|_| {
                    let v = Valuation::Scheduling(crate::valuation::sample_valuation(
                        crate::valuation::JobLengthModel::Uniform,
                        m,
                        &mut rng,
                    ));
                    CompiledAgent::new(v, &StrategySpec::Sb)
                })
                .collect();

            // drive the loop manually to watch per-round prices
            let mut prev = vec![0u32; m];
            let outcome = run_auction_observed(&config, &agents, &mut rng, |_, _| {})
                .unwrap();
            assert!(outcome.quiesced, "seed {i} hit the round bound");
            // monotonicity over history is implied by construction; check
            // the outcome invariants
            for g in 0..m {
                assert!(outcome.final_prices[g] >= prev[g]);
                prev[g] = outcome.final_prices[g];
                if outcome.allocation[g].is_none() {
                    assert_eq!(outcome.final_prices[g], 0);
                }
            }
            let payments: i64 = (0..n)
                .map(|a| {
                    let bundle = outcome.bundle_of(a);
                    i64::from(agents[a].valuation.value(&bundle))
                        - outcome.agent_surpluses[a]
                })
                .sum();
            let sold: i64 = (0..m)
                .filter(|&g| outcome.allocation[g].is_some())
                .map(|g| i64::from(outcome.final_prices[g]))
                .sum();
            assert_eq!(payments, sold, "seed {i}");
            assert!(outcome.rounds_used <= m * 55 + 1);
        }
    }

    #[test]
    fn history_rows_match_rounds() {
        let config = AuctionConfig::new(2, 10);
        let agent = sb_agent(Valuation::Table(TableValuation::new(
            2,
            vec![(Bundle::new(vec![0]), 3)],
        )));
        let mut rng = SeedStream::new(10).rng_for(0);
        let compiled = [CompiledAgent::new(agent.valuation, &agent.strategy)];
        let mut rounds_seen = 0;
        let outcome =
            run_auction_observed(&config, &compiled, &mut rng, |round, _| {
                assert_eq!(round, rounds_seen);
                rounds_seen += 1;
            })
            .unwrap();
        assert_eq!(outcome.rounds_used, rounds_seen);
    }
}
