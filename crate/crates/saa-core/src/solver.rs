//! Iterative derivation of self-confirming marginal price distributions.
//!
//! Starting from a point prediction at zero prices, each iteration
//! simulates a batch of auctions with every agent bidding on the current
//! prediction, takes the observed per-good final-price distribution as the
//! next prediction, and stops once successive predictions agree under the
//! Kolmogorov-Smirnov statistic. If the iteration cap is hit instead, the
//! average of the last few iterates is returned.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::auction::{run_auction, AuctionConfig, AuctionError, CompiledAgent};
use crate::env::{EnvError, EnvironmentSpec};
use crate::parallel::{batch_fold_reduce, batch_fold_reduce_seq};
use crate::rng::{stream, SeedStream};
use crate::strategy::{CompiledStrategy, MarginalPriceDistribution, StrategySpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScSolverParams {
    pub samples_per_iteration: u64,
    pub ks_threshold: f64,
    pub max_iterations: usize,
    pub smoothing_window: usize,
}

impl Default for ScSolverParams {
    /// Full-scale parameters: one million games per iteration, a 0.01 KS
    /// criterion, at most 100 iterations, smoothing over the last 10.
    fn default() -> Self {
        ScSolverParams {
            samples_per_iteration: 1_000_000,
            ks_threshold: 0.01,
            max_iterations: 100,
            smoothing_window: 10,
        }
    }
}

impl ScSolverParams {
    /// Desk-scale preset: enough samples for the 0.01 criterion, minutes
    /// of runtime instead of hours.
    pub fn desk_scale() -> Self {
        ScSolverParams { samples_per_iteration: 100_000, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if self.samples_per_iteration == 0 {
            return Err(SolverError::BadParams("samples_per_iteration must be >= 1"));
        }
        if !(self.ks_threshold > 0.0) {
            return Err(SolverError::BadParams("ks_threshold must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(SolverError::BadParams("max_iterations must be >= 1"));
        }
        if self.smoothing_window == 0 || self.smoothing_window > self.max_iterations {
            return Err(SolverError::BadParams(
                "smoothing_window must be in 1..=max_iterations",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceStats {
    pub mean: f64,
    pub std_dev: f64,
}

#[derive(Debug, Clone)]
pub struct ScResult {
    pub distribution: MarginalPriceDistribution,
    pub converged: bool,
    pub iterations_used: usize,
    /// KS distance between each iteration's input prediction and its
    /// empirical output.
    pub ks_trace: Vec<f64>,
    pub price_stats: Vec<PriceStats>,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver parameters: {0}")]
    BadParams(&'static str),
    #[error("distributions disagree: {0} vs {1} goods (or caps differ)")]
    DimensionMismatch(usize, usize),
    #[error("environment: {0}")]
    Env(#[from] EnvError),
    #[error("simulation failed in game {game}: {source}")]
    Simulation { game: u64, source: AuctionError },
}

/// Maximal distance between the two CDFs.
pub fn ks_statistic(f: &[f64], g: &[f64]) -> f64 {
    assert_eq!(f.len(), g.len());
    let mut cf = 0.0;
    let mut cg = 0.0;
    let mut worst = 0.0f64;
    for (a, b) in f.iter().zip(g) {
        cf += a;
        cg += b;
        worst = worst.max((cf - cg).abs());
    }
    worst
}

/// Marginal KS distance: per-good KS, worst good.
pub fn ks_marg(
    a: &MarginalPriceDistribution,
    b: &MarginalPriceDistribution,
) -> Result<f64, SolverError> {
    if a.num_goods() != b.num_goods() || a.price_cap() != b.price_cap() {
        return Err(SolverError::DimensionMismatch(a.num_goods(), b.num_goods()));
    }
    Ok((0..a.num_goods())
        .map(|m| ks_statistic(a.pmf(m), b.pmf(m)))
        .fold(0.0, f64::max))
}

/// Exact per-good mean and standard deviation of a distribution.
pub fn describe(dist: &MarginalPriceDistribution) -> Vec<PriceStats> {
    (0..dist.num_goods())
        .map(|m| {
            let pmf = dist.pmf(m);
            let mean: f64 =
                pmf.iter().enumerate().map(|(q, &p)| q as f64 * p).sum();
            let ex2: f64 = pmf
                .iter()
                .enumerate()
                .map(|(q, &p)| (q as f64) * (q as f64) * p)
                .sum();
            PriceStats { mean, std_dev: (ex2 - mean * mean).max(0.0).sqrt() }
        })
        .collect()
}

struct BatchAccumulator {
    counts: Vec<Vec<u64>>,
    error: Option<(u64, AuctionError)>,
}

impl BatchAccumulator {
    fn new(num_goods: usize, price_cap: u32) -> Self {
        BatchAccumulator {
            counts: vec![vec![0; price_cap as usize + 1]; num_goods],
            error: None,
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        // keep the lowest-indexed failure so diagnostics are deterministic
        self.error = match (self.error, other.error) {
            (Some(a), Some(b)) => Some(if a.0 <= b.0 { a } else { b }),
            (a, b) => a.or(b),
        };
        self
    }
}

fn batch_game(
    env: &EnvironmentSpec,
    config: &AuctionConfig,
    strategy: &CompiledStrategy,
    seeds: &SeedStream,
    mut acc: BatchAccumulator,
    game: u64,
) -> BatchAccumulator {
    if acc.error.is_some() {
        return acc;
    }
    let mut rng = seeds.rng_for(game);
    let agents: Vec<CompiledAgent> = env
        .sample_agent_valuations(&mut rng)
        .into_iter()
        .map(|v| CompiledAgent::with_compiled(v, strategy.clone()))
        .collect();
    match run_auction(config, &agents, &mut rng) {
        Ok(outcome) => {
            for (good, &price) in outcome.final_prices.iter().enumerate() {
                acc.counts[good][price as usize] += 1;
            }
        }
        Err(e) => acc.error = Some((game, e)),
    }
    acc
}

/// Simulates `n` fresh games with every agent playing `spec` and returns
/// the observed final-price marginals, floor-regularized. Game seeds come
/// from `seeds` by index, so results do not depend on scheduling.
pub fn price_batch(
    env: &EnvironmentSpec,
    spec: &StrategySpec,
    n: u64,
    seeds: SeedStream,
) -> Result<MarginalPriceDistribution, SolverError> {
    price_batch_inner(env, spec, n, seeds, false)
}

/// Sequential twin of [`price_batch`]; bit-identical results.
pub fn price_batch_seq(
    env: &EnvironmentSpec,
    spec: &StrategySpec,
    n: u64,
    seeds: SeedStream,
) -> Result<MarginalPriceDistribution, SolverError> {
    price_batch_inner(env, spec, n, seeds, true)
}

fn price_batch_inner(
    env: &EnvironmentSpec,
    spec: &StrategySpec,
    n: u64,
    seeds: SeedStream,
    sequential: bool,
) -> Result<MarginalPriceDistribution, SolverError> {
    assert!(n >= 1);
    env.validate()?;
    let config = AuctionConfig::new(env.num_goods, env.price_cap);
    let strategy = CompiledStrategy::compile(spec);
    let identity = || BatchAccumulator::new(env.num_goods, env.price_cap);
    let fold = |acc: BatchAccumulator, game: u64| {
        batch_game(env, &config, &strategy, &seeds, acc, game)
    };
    let acc = if sequential {
        batch_fold_reduce_seq(n, identity, fold, BatchAccumulator::merge)
    } else {
        batch_fold_reduce(n, identity, fold, BatchAccumulator::merge)
    };
    if let Some((game, source)) = acc.error {
        return Err(SolverError::Simulation { game, source });
    }
    Ok(MarginalPriceDistribution::from_counts(env.price_cap, &acc.counts).with_floor())
}

/// One solver iteration: the sample distribution of final prices over `n`
/// games with all agents playing the distribution predictor on `pred`.
pub fn empirical_marginals(
    env: &EnvironmentSpec,
    pred: &MarginalPriceDistribution,
    n: u64,
    seeds: SeedStream,
) -> Result<MarginalPriceDistribution, SolverError> {
    if pred.num_goods() != env.num_goods || pred.price_cap() != env.price_cap {
        return Err(SolverError::DimensionMismatch(pred.num_goods(), env.num_goods));
    }
    price_batch(env, &StrategySpec::dist(pred.clone()), n, seeds)
}

/// Sequential twin of [`empirical_marginals`].
pub fn empirical_marginals_seq(
    env: &EnvironmentSpec,
    pred: &MarginalPriceDistribution,
    n: u64,
    seeds: SeedStream,
) -> Result<MarginalPriceDistribution, SolverError> {
    if pred.num_goods() != env.num_goods || pred.price_cap() != env.price_cap {
        return Err(SolverError::DimensionMismatch(pred.num_goods(), env.num_goods));
    }
    price_batch_seq(env, &StrategySpec::dist(pred.clone()), n, seeds)
}

/// Elementwise mean of the given distributions, floor-regularized.
pub fn smooth_average(dists: &[MarginalPriceDistribution]) -> MarginalPriceDistribution {
    assert!(!dists.is_empty());
    let goods = dists[0].num_goods();
    let cap = dists[0].price_cap();
    let k = dists.len() as f64;
    let pmfs: Vec<Vec<f64>> = (0..goods)
        .map(|m| {
            (0..=cap as usize)
                .map(|q| dists.iter().map(|d| d.pmf(m)[q]).sum::<f64>() / k)
                .collect()
        })
        .collect();
    MarginalPriceDistribution::new(cap, pmfs)
        .expect("mean of distributions is a distribution")
        .with_floor()
}

/// Derives an approximately self-confirming marginal price distribution
/// for the environment.
///
/// The initial prediction is a point mass at zero prices. Convergence
/// compares each iteration's input prediction with its empirical output;
/// on success the empirical output is returned. Hitting the iteration cap
/// returns the smoothed average of the last `smoothing_window` outputs
/// with `converged = false`.
pub fn derive_sc(
    env: &EnvironmentSpec,
    params: &ScSolverParams,
) -> Result<ScResult, SolverError> {
    params.validate()?;
    env.validate()?;
    let seeds = SeedStream::new(env.seed).derive(stream::SOLVER);
    let mut current =
        MarginalPriceDistribution::point_mass(env.num_goods, env.price_cap, 0)
            .with_floor();
    let mut ks_trace = Vec::new();
    let mut window: Vec<MarginalPriceDistribution> = Vec::new();

    for iteration in 0..params.max_iterations {
        let next = empirical_marginals(
            env,
            &current,
            params.samples_per_iteration,
            seeds.derive(iteration as u64),
        )?;
        let ks = ks_marg(&current, &next)?;
        ks_trace.push(ks);
        if window.len() == params.smoothing_window {
            window.remove(0);
        }
        window.push(next.clone());
        if ks <= params.ks_threshold {
            let price_stats = describe(&next);
            return Ok(ScResult {
                distribution: next,
                converged: true,
                iterations_used: iteration + 1,
                ks_trace,
                price_stats,
            });
        }
        current = next;
    }

    let distribution = smooth_average(&window);
    let price_stats = describe(&distribution);
    Ok(ScResult {
        distribution,
        converged: false,
        iterations_used: params.max_iterations,
        ks_trace,
        price_stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::valuation::{Bundle, JobLengthModel, TableValuation};

    fn uniform_1_to_4() -> Vec<f64> {
        vec![0.0, 0.25, 0.25, 0.25, 0.25]
    }

    #[test]
    fn ks_examples() {
        let f = uniform_1_to_4();
        assert_eq!(ks_statistic(&f, &f), 0.0);
        let mut lo = vec![0.0; 6];
        lo[0] = 1.0;
        let mut hi = vec![0.0; 6];
        hi[5] = 1.0;
        assert_eq!(ks_statistic(&lo, &hi), 1.0);
        // uniform {1..4} vs uniform {2..5} over {0..=5}
        let mut f = vec![0.0; 6];
        for q in 1..=4 {
            f[q] = 0.25;
        }
        let mut g = vec![0.0; 6];
        for q in 2..=5 {
            g[q] = 0.25;
        }
        assert!((ks_statistic(&f, &g) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ks_marg_takes_worst_good_and_is_symmetric() {
        let a = MarginalPriceDistribution::new(
            3,
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.7, 0.3, 0.0, 0.0]],
        )
        .unwrap();
        let b = MarginalPriceDistribution::new(
            3,
            vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.4, 0.6, 0.0, 0.0]],
        )
        .unwrap();
        let d = ks_marg(&a, &b).unwrap();
        assert!((d - 0.3).abs() < 1e-12);
        assert_eq!(d, ks_marg(&b, &a).unwrap());
        assert_eq!(ks_marg(&a, &a).unwrap(), 0.0);

        let c = MarginalPriceDistribution::point_mass(3, 3, 0);
        assert!(matches!(ks_marg(&a, &c), Err(SolverError::DimensionMismatch(..))));
    }

    #[test]
    fn ks_behaves_like_a_metric_on_random_pmfs() {
        use rand::RngExt;
        let mut rng = SeedStream::new(31).rng_for(0);
        for _ in 0..300 {
            let cap = rng.random_range(1..=12usize);
            let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
                let mut p: Vec<f64> =
                    (0..=cap).map(|_| rng.random_range(0.0..1.0)).collect();
                let t: f64 = p.iter().sum();
                p.iter_mut().for_each(|x| *x /= t);
                p
            };
            let f = draw(&mut rng);
            let g = draw(&mut rng);
            let h = draw(&mut rng);
            let fg = ks_statistic(&f, &g);
            assert!((0.0..=1.0).contains(&fg));
            assert_eq!(fg, ks_statistic(&g, &f));
            assert!(fg <= ks_statistic(&f, &h) + ks_statistic(&h, &g) + 1e-12);
        }
    }

    #[test]
    fn describe_examples() {
        let point = MarginalPriceDistribution::point_mass(1, 8, 5);
        let stats = describe(&point);
        assert_eq!(stats[0].mean, 5.0);
        assert_eq!(stats[0].std_dev, 0.0);

        let uniform = MarginalPriceDistribution::new(4, vec![uniform_1_to_4()]).unwrap();
        let stats = describe(&uniform);
        assert!((stats[0].mean - 2.5).abs() < 1e-12);
        assert!((stats[0].std_dev - 1.25f64.sqrt()).abs() < 1e-12);

        // the floor's spread mass shows up in the moments
        let floored = MarginalPriceDistribution::point_mass(1, 50, 0).with_floor();
        let stats = describe(&floored);
        assert!(stats[0].mean > 0.0 && stats[0].mean < 0.01);
    }

    fn still_life_env() -> EnvironmentSpec {
        // nobody values anything: prices stay at zero forever
        let tables = vec![
            TableValuation::new(2, vec![]),
            TableValuation::new(2, vec![]),
        ];
        EnvironmentSpec::fixed(tables, 10, 99)
    }

    #[test]
    fn zero_value_environment_is_a_fixed_point() {
        let env = still_life_env();
        let params = ScSolverParams {
            samples_per_iteration: 50,
            ks_threshold: 0.01,
            max_iterations: 10,
            smoothing_window: 2,
        };
        let result = derive_sc(&env, &params).unwrap();
        assert!(result.converged);
        assert_eq!(result.iterations_used, 1);
        assert_eq!(result.ks_trace.len(), 1);
        assert_eq!(result.ks_trace[0], 0.0);
        for m in 0..2 {
            assert!(result.distribution.pmf(m)[0] > 0.99);
        }
    }

    #[test]
    fn single_sample_fixed_env_gives_point_mass() {
        // one deterministic-outcome game: the empirical distribution is a
        // point mass at that game's prices, up to the floor
        let tables = vec![TableValuation::new(1, vec![(Bundle::new(vec![0]), 5)])];
        let env = EnvironmentSpec::fixed(tables, 10, 3);
        let pred = MarginalPriceDistribution::point_mass(1, 10, 0).with_floor();
        let seeds = SeedStream::new(3).derive(stream::SOLVER);
        let out = empirical_marginals(&env, &pred, 1, seeds).unwrap();
        assert!(out.pmf(0)[1] > 0.99, "{:?}", out.pmf(0));
        let total: f64 = out.pmf(0).iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parallel_and_sequential_batches_are_identical() {
        let env = EnvironmentSpec::scheduling(3, 3, JobLengthModel::Uniform, 17);
        let pred = MarginalPriceDistribution::point_mass(3, 55, 0).with_floor();
        let seeds = SeedStream::new(17).derive(stream::SOLVER).derive(0);
        let par = empirical_marginals(&env, &pred, 2_000, seeds).unwrap();
        let seq = empirical_marginals_seq(&env, &pred, 2_000, seeds).unwrap();
        assert_eq!(par, seq);
    }

    #[test]
    fn converged_prediction_survives_out_of_sample_audit() {
        let env = EnvironmentSpec::scheduling(3, 3, JobLengthModel::Uniform, 47);
        let params = ScSolverParams {
            samples_per_iteration: 20_000,
            ks_threshold: 0.02,
            max_iterations: 40,
            smoothing_window: 5,
        };
        let result = derive_sc(&env, &params).unwrap();
        assert!(result.converged);
        // fresh games the derivation never saw
        let audit_seeds = SeedStream::new(env.seed).derive(0xa0d17);
        let audit = empirical_marginals(
            &env,
            &result.distribution,
            params.samples_per_iteration,
            audit_seeds,
        )
        .unwrap();
        let ks = ks_marg(&result.distribution, &audit).unwrap();
        assert!(ks <= 2.0 * params.ks_threshold, "audit ks {ks}");
    }

    #[test]
    fn derive_sc_is_reproducible() {
        let env = EnvironmentSpec::scheduling(3, 3, JobLengthModel::Exponential, 23);
        let params = ScSolverParams {
            samples_per_iteration: 3_000,
            ks_threshold: 0.05,
            max_iterations: 20,
            smoothing_window: 3,
        };
        let a = derive_sc(&env, &params).unwrap();
        let b = derive_sc(&env, &params).unwrap();
        assert_eq!(a.distribution, b.distribution);
        assert_eq!(a.ks_trace, b.ks_trace);
        assert_eq!(a.converged, b.converged);
    }

    #[test]
    fn smoothing_average_recomputation() {
        let a = MarginalPriceDistribution::new(2, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let b = MarginalPriceDistribution::new(2, vec![vec![0.0, 1.0, 0.0]]).unwrap();
        let avg = smooth_average(&[a, b]);
        let pmf = avg.pmf(0);
        let floor = crate::strategy::MASS_FLOOR;
        let scale = 1.0 / (1.0 + 3.0 * floor);
        assert!((pmf[0] - (0.5 + floor) * scale).abs() < 1e-12);
        assert!((pmf[1] - (0.5 + floor) * scale).abs() < 1e-12);
        assert!(pmf[2] > 0.0);
    }

    #[test]
    fn params_validation() {
        let mut p = ScSolverParams::default();
        assert!(p.validate().is_ok());
        p.smoothing_window = 0;
        assert!(p.validate().is_err());
        p.smoothing_window = 101;
        assert!(p.validate().is_err());
        let p = ScSolverParams { ks_threshold: 0.0, ..ScSolverParams::default() };
        assert!(p.validate().is_err());
    }
}
