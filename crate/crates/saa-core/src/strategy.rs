//! Bidding strategies: straightforward bidding, point-prediction bidding,
//! and distribution-prediction bidding.
//!
//! All three families pick the surplus-maximizing bundle at *perceived*
//! prices and bid the ask price on its goods not already held. They differ
//! only in how the perceived price vector is built from the current quotes,
//! the agent's winning flags, and its prediction state.

use std::sync::Arc;

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::valuation::{optimal_bundle_tied, Bundle, Valuation};

/// Mass mixed onto every price level when regularizing an empirical
/// distribution, so conditioning on any revealed bid price stays
/// well-defined and the cap always carries positive mass.
pub const MASS_FLOOR: f64 = 1e-6;

/// PMFs must sum to one within this tolerance.
pub const PMF_SUM_TOL: f64 = 1e-9;

/// Initial point prediction of final prices, one entry per good.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointPrediction {
    pub initial: Vec<u32>,
}

impl PointPrediction {
    pub fn zeros(num_goods: usize) -> Self {
        PointPrediction { initial: vec![0; num_goods] }
    }
}

#[derive(Debug, Error)]
pub enum DistError {
    #[error("distribution needs at least one good")]
    NoGoods,
    #[error("good {good}: pmf has {len} entries, expected price_cap + 1 = {expected}")]
    WrongLength { good: usize, len: usize, expected: usize },
    #[error("good {good}: pmf mass {mass} at price {price} is negative")]
    NegativeMass { good: usize, price: u32, mass: f64 },
    #[error("good {good}: pmf sums to {sum}, not 1")]
    BadSum { good: usize, sum: f64 },
    #[error("csv parse error at line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Per-good probability mass over integer final prices `{0..=price_cap}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPriceDistribution {
    price_cap: u32,
    pmfs: Vec<Vec<f64>>,
}

impl MarginalPriceDistribution {
    pub fn new(price_cap: u32, pmfs: Vec<Vec<f64>>) -> Result<Self, DistError> {
        if pmfs.is_empty() {
            return Err(DistError::NoGoods);
        }
        let expected = price_cap as usize + 1;
        for (good, pmf) in pmfs.iter().enumerate() {
            if pmf.len() != expected {
                return Err(DistError::WrongLength { good, len: pmf.len(), expected });
            }
            for (price, &mass) in pmf.iter().enumerate() {
                if mass < 0.0 || !mass.is_finite() {
                    return Err(DistError::NegativeMass {
                        good,
                        price: price as u32,
                        mass,
                    });
                }
            }
            let sum: f64 = pmf.iter().sum();
            if (sum - 1.0).abs() > PMF_SUM_TOL {
                return Err(DistError::BadSum { good, sum });
            }
        }
        Ok(MarginalPriceDistribution { price_cap, pmfs })
    }

    /// Every good's price equal to `price` with certainty.
    pub fn point_mass(num_goods: usize, price_cap: u32, price: u32) -> Self {
        assert!(price <= price_cap);
        let mut pmf = vec![0.0; price_cap as usize + 1];
        pmf[price as usize] = 1.0;
        MarginalPriceDistribution { price_cap, pmfs: vec![pmf; num_goods] }
    }

    /// Uniform over `{0..=price_cap}` for every good.
    pub fn uniform(num_goods: usize, price_cap: u32) -> Self {
        let n = price_cap as usize + 1;
        let pmf = vec![1.0 / n as f64; n];
        MarginalPriceDistribution { price_cap, pmfs: vec![pmf; num_goods] }
    }

    /// Normalizes per-good price histograms; `counts[good][price]`.
    pub fn from_counts(price_cap: u32, counts: &[Vec<u64>]) -> Self {
        let pmfs = counts
            .iter()
            .map(|c| {
                assert_eq!(c.len(), price_cap as usize + 1);
                let total: u64 = c.iter().sum();
                assert!(total > 0, "empty histogram");
                c.iter().map(|&k| k as f64 / total as f64).collect()
            })
            .collect();
        MarginalPriceDistribution { price_cap, pmfs }
    }

    /// Mixes `MASS_FLOOR` of probability onto every price level and
    /// renormalizes. A floor concentrated at the cap alone would make any
    /// price beyond the observed support look like the cap itself when
    /// conditioning, freezing bidders out of contested goods; spreading it
    /// keeps off-support expectations at interior values.
    pub fn with_floor(&self) -> Self {
        let support = self.price_cap as f64 + 1.0;
        let scale = 1.0 / (1.0 + support * MASS_FLOOR);
        let pmfs = self
            .pmfs
            .iter()
            .map(|pmf| pmf.iter().map(|&m| (m + MASS_FLOOR) * scale).collect())
            .collect();
        MarginalPriceDistribution { price_cap: self.price_cap, pmfs }
    }

    pub fn num_goods(&self) -> usize {
        self.pmfs.len()
    }

    pub fn price_cap(&self) -> u32 {
        self.price_cap
    }

    pub fn pmf(&self, good: usize) -> &[f64] {
        &self.pmfs[good]
    }

    pub fn pmfs(&self) -> &[Vec<f64>] {
        &self.pmfs
    }

    /// CSV with columns `good,price,mass`, one row per support point,
    /// goods 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("good,price,mass\n");
        for (good, pmf) in self.pmfs.iter().enumerate() {
            for (price, &mass) in pmf.iter().enumerate() {
                if mass > 0.0 {
                    out.push_str(&format!("{},{},{}\n", good + 1, price, mass));
                }
            }
        }
        out
    }

    /// Parses the `to_csv` format. The price cap is the largest price
    /// listed; regularized distributions always carry mass there.
    pub fn from_csv(text: &str) -> Result<Self, DistError> {
        let mut rows: Vec<(usize, u32, f64)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (idx == 0 && line.starts_with("good")) {
                continue;
            }
            let err = |message: String| DistError::Csv { line: idx + 1, message };
            let mut fields = line.split(',');
            let mut field = |name: &str| {
                fields
                    .next()
                    .ok_or_else(|| err(format!("missing {name} column")))
            };
            let good: usize = field("good")?
                .trim()
                .parse()
                .map_err(|e| err(format!("bad good: {e}")))?;
            let price: u32 = field("price")?
                .trim()
                .parse()
                .map_err(|e| err(format!("bad price: {e}")))?;
            let mass: f64 = field("mass")?
                .trim()
                .parse()
                .map_err(|e| err(format!("bad mass: {e}")))?;
            if good == 0 {
                return Err(err("good indices are 1-based".to_string()));
            }
            rows.push((good - 1, price, mass));
        }
        let num_goods = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let price_cap = rows.iter().map(|r| r.1).max().unwrap_or(0);
        if num_goods == 0 {
            return Err(DistError::NoGoods);
        }
        let mut pmfs = vec![vec![0.0; price_cap as usize + 1]; num_goods];
        for (good, price, mass) in rows {
            pmfs[good][price as usize] += mass;
        }
        MarginalPriceDistribution::new(price_cap, pmfs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("distribution serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, DistError> {
        Ok(serde_json::from_str(text)?)
    }
}

// JSON form: a bare array of per-good mass arrays over {0..=price_cap}.
impl Serialize for MarginalPriceDistribution {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.pmfs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MarginalPriceDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let pmfs = Vec::<Vec<f64>>::deserialize(d)?;
        let cap = pmfs
            .first()
            .map(|p| p.len().saturating_sub(1) as u32)
            .ok_or_else(|| serde::de::Error::custom("distribution needs a good"))?;
        MarginalPriceDistribution::new(cap, pmfs).map_err(serde::de::Error::custom)
    }
}

/// One of the three strategy families with its prediction payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategySpec {
    Sb,
    PointPredictor { initial: PointPrediction },
    DistributionPredictor { distribution: MarginalPriceDistribution },
}

impl StrategySpec {
    pub fn point(initial: Vec<u32>) -> Self {
        StrategySpec::PointPredictor { initial: PointPrediction { initial } }
    }

    pub fn dist(distribution: MarginalPriceDistribution) -> Self {
        StrategySpec::DistributionPredictor { distribution }
    }
}

// ---------------------------------------------------------------------------
// Conditioning and expected incremental prices
// ---------------------------------------------------------------------------

/// Zeroes mass below `bound` and renormalizes the survivors, preserving
/// their ratios. Returns `None` when `bound` exceeds the cap, which
/// signals that the good is unobtainable.
pub fn condition_marginal(pmf: &[f64], bound: u32) -> Option<Vec<f64>> {
    let cap = pmf.len() - 1;
    if bound as usize > cap {
        return None;
    }
    let surviving = suffix_mass(pmf, bound as usize);
    assert!(
        surviving > 0.0,
        "no mass at or above {bound}; regularized distributions keep mass at the cap"
    );
    let mut out = vec![0.0; pmf.len()];
    for q in bound as usize..=cap {
        out[q] = pmf[q] / surviving;
    }
    Some(out)
}

/// Expected final price conditional on it being at least `bound`.
pub fn expected_price(pmf: &[f64], bound: u32) -> Option<f64> {
    let cap = pmf.len() - 1;
    if bound as usize > cap {
        return None;
    }
    let mass = suffix_mass(pmf, bound as usize);
    assert!(mass > 0.0, "no mass at or above {bound}");
    Some(suffix_qsum(pmf, bound as usize) / mass)
}

/// Expected incremental price of a good the agent is losing at bid price
/// `bid_price`: the expected final price given it rises to at least the
/// ask. `None` means the bid price sits at the cap and the good is
/// unobtainable.
pub fn incremental_price_losing(pmf: &[f64], bid_price: u32) -> Option<f64> {
    expected_price(pmf, bid_price + 1)
}

/// Expected incremental price of a good the agent is winning at
/// `bid_price`: zero if nobody outbids, otherwise the agent must come
/// back at `bid_price + 2`, weighted by the probability of being outbid.
pub fn incremental_price_winning(pmf: &[f64], bid_price: u32) -> f64 {
    let cap = pmf.len() - 1;
    let b = bid_price as usize;
    debug_assert!(b <= cap);
    let mass_here = suffix_mass(pmf, b);
    debug_assert!(mass_here > 0.0, "no mass at or above the standing bid");
    let pr_stay = pmf[b] / mass_here;
    let rebid = b + 2;
    let tail = if rebid > cap {
        0.0
    } else {
        let mass = suffix_mass(pmf, rebid);
        // zero predicted mass at the re-entry price: no expected cost
        // contribution (regularized pmfs never hit this)
        if mass > 0.0 {
            suffix_qsum(pmf, rebid) / mass
        } else {
            0.0
        }
    };
    (1.0 - pr_stay) * tail
}

// Suffix accumulations run from the cap downward; `PredictionTables` uses
// the identical order so both paths produce bit-identical results.
fn suffix_mass(pmf: &[f64], from: usize) -> f64 {
    let mut acc = 0.0;
    for q in (from..pmf.len()).rev() {
        acc += pmf[q];
    }
    acc
}

fn suffix_qsum(pmf: &[f64], from: usize) -> f64 {
    let mut acc = 0.0;
    for q in (from..pmf.len()).rev() {
        acc += pmf[q] * q as f64;
    }
    acc
}

// ---------------------------------------------------------------------------
// Perceived price vectors
// ---------------------------------------------------------------------------

/// Myopic perceived prices: the bid price where winning, the ask price
/// elsewhere.
pub fn sb_perceived(bid_prices: &[u32], winning: &[bool]) -> Vec<f64> {
    bid_prices
        .iter()
        .zip(winning)
        .map(|(&b, &w)| if w { f64::from(b) } else { f64::from(b + 1) })
        .collect()
}

/// Point-prediction perceived prices: the initial prediction, floored at
/// the myopic price.
pub fn pp_point_perceived(
    pred: &PointPrediction,
    bid_prices: &[u32],
    winning: &[bool],
) -> Vec<f64> {
    pred.initial
        .iter()
        .zip(bid_prices)
        .zip(winning)
        .map(|((&p, &b), &w)| {
            let myopic = if w { b } else { b + 1 };
            f64::from(p.max(myopic))
        })
        .collect()
}

/// Distribution-prediction perceived prices: per good, the expected
/// incremental price for the agent's current standing. The flags mark
/// goods the agent is losing at the price cap, which are excluded from
/// bundle choice.
pub fn pp_dist_perceived(
    dist: &MarginalPriceDistribution,
    bid_prices: &[u32],
    winning: &[bool],
) -> (Vec<f64>, Vec<bool>) {
    let mut perceived = Vec::with_capacity(dist.num_goods());
    let mut unavailable = vec![false; dist.num_goods()];
    for good in 0..dist.num_goods() {
        let pmf = dist.pmf(good);
        if winning[good] {
            perceived.push(incremental_price_winning(pmf, bid_prices[good]));
        } else {
            match incremental_price_losing(pmf, bid_prices[good]) {
                Some(delta) => perceived.push(delta),
                None => {
                    unavailable[good] = true;
                    perceived.push(f64::INFINITY);
                }
            }
        }
    }
    (perceived, unavailable)
}

// ---------------------------------------------------------------------------
// Compiled strategies and bid generation
// ---------------------------------------------------------------------------

/// Suffix-sum tables for a prediction, shared read-only by every agent in
/// a simulation batch; expected incremental prices become O(1) lookups.
#[derive(Debug)]
pub struct PredictionTables {
    price_cap: u32,
    /// `mass[good][b]` = total mass at prices >= b (index cap+1 is 0).
    mass: Vec<Vec<f64>>,
    /// `qsum[good][b]` = sum of price * mass at prices >= b.
    qsum: Vec<Vec<f64>>,
    /// raw per-good pmfs, for the stay-probability term.
    pmfs: Vec<Vec<f64>>,
}

impl PredictionTables {
    pub fn new(dist: &MarginalPriceDistribution) -> Self {
        let cap = dist.price_cap() as usize;
        let mut mass = Vec::with_capacity(dist.num_goods());
        let mut qsum = Vec::with_capacity(dist.num_goods());
        for good in 0..dist.num_goods() {
            let pmf = dist.pmf(good);
            let mut m = vec![0.0; cap + 2];
            let mut s = vec![0.0; cap + 2];
            for q in (0..=cap).rev() {
                m[q] = m[q + 1] + pmf[q];
                s[q] = s[q + 1] + pmf[q] * q as f64;
            }
            mass.push(m);
            qsum.push(s);
        }
        PredictionTables {
            price_cap: dist.price_cap(),
            mass,
            qsum,
            pmfs: dist.pmfs().to_vec(),
        }
    }

    pub fn price_cap(&self) -> u32 {
        self.price_cap
    }

    pub fn num_goods(&self) -> usize {
        self.pmfs.len()
    }

    fn delta_losing(&self, good: usize, bid_price: u32) -> Option<f64> {
        if bid_price >= self.price_cap {
            return None;
        }
        let b = bid_price as usize + 1;
        Some(self.qsum[good][b] / self.mass[good][b])
    }

    fn delta_winning(&self, good: usize, bid_price: u32) -> f64 {
        let b = bid_price as usize;
        let pr_stay = self.pmfs[good][b] / self.mass[good][b];
        let rebid = b + 2;
        let tail = if rebid > self.price_cap as usize {
            0.0
        } else if self.mass[good][rebid] > 0.0 {
            self.qsum[good][rebid] / self.mass[good][rebid]
        } else {
            0.0
        };
        (1.0 - pr_stay) * tail
    }
}

/// A strategy readied for repeated play; distribution predictors carry
/// their shared suffix tables.
#[derive(Debug, Clone)]
pub enum CompiledStrategy {
    Sb,
    Point(PointPrediction),
    Dist(Arc<PredictionTables>),
}

impl CompiledStrategy {
    pub fn compile(spec: &StrategySpec) -> Self {
        match spec {
            StrategySpec::Sb => CompiledStrategy::Sb,
            StrategySpec::PointPredictor { initial } => {
                CompiledStrategy::Point(initial.clone())
            }
            StrategySpec::DistributionPredictor { distribution } => {
                CompiledStrategy::Dist(Arc::new(PredictionTables::new(distribution)))
            }
        }
    }
}

/// Chooses the goods to bid on this round.
///
/// Single-unit bidders always play straightforwardly (prediction cannot
/// help a no-regret bidder). Losing a good at the price cap removes it
/// from consideration. Surplus ties among candidate bundles are broken
/// uniformly at random from the agent's own generator, except that a tied
/// candidate the agent already holds in full wins outright (no new bids);
/// the empty bundle wins outright when no bundle clears positive surplus.
pub fn generate_bids_compiled(
    strategy: &CompiledStrategy,
    valuation: &Valuation,
    single_unit: bool,
    bid_prices: &[u32],
    winning: &[bool],
    price_cap: u32,
    rng: &mut impl Rng,
) -> Bundle {
    let m = bid_prices.len();
    let mut perceived;
    let mut available = vec![true; m];

    let effective = if single_unit { &CompiledStrategy::Sb } else { strategy };
    match effective {
        CompiledStrategy::Sb => {
            perceived = sb_perceived(bid_prices, winning);
            mark_capped(&mut available, bid_prices, winning, price_cap);
        }
        CompiledStrategy::Point(pred) => {
            perceived = pp_point_perceived(pred, bid_prices, winning);
            mark_capped(&mut available, bid_prices, winning, price_cap);
        }
        CompiledStrategy::Dist(tables) => {
            debug_assert_eq!(tables.price_cap(), price_cap);
            perceived = Vec::with_capacity(m);
            for good in 0..m {
                if winning[good] {
                    perceived.push(tables.delta_winning(good, bid_prices[good]));
                } else {
                    match tables.delta_losing(good, bid_prices[good]) {
                        Some(delta) => perceived.push(delta),
                        None => {
                            available[good] = false;
                            perceived.push(f64::INFINITY);
                        }
                    }
                }
            }
        }
    }

    let (_, tied) = optimal_bundle_tied(valuation, &perceived, &available);
    // a tied candidate already held in full makes new bids pure exposure
    if tied
        .iter()
        .any(|b| b.goods().iter().all(|&g| winning[g]))
    {
        return Bundle::empty();
    }
    let target = if tied.len() == 1 {
        &tied[0]
    } else {
        &tied[rng.random_range(0..tied.len())]
    };
    target
        .goods()
        .iter()
        .copied()
        .filter(|&g| !winning[g])
        .collect()
}

/// Spec entry point: compiles the strategy and classifies the valuation
/// on the fly. Batch simulation pre-compiles instead.
pub fn generate_bids(
    spec: &StrategySpec,
    valuation: &Valuation,
    bid_prices: &[u32],
    winning: &[bool],
    price_cap: u32,
    rng: &mut impl Rng,
) -> Bundle {
    let compiled = CompiledStrategy::compile(spec);
    generate_bids_compiled(
        &compiled,
        valuation,
        valuation.is_single_unit(),
        bid_prices,
        winning,
        price_cap,
        rng,
    )
}

fn mark_capped(available: &mut [bool], bid_prices: &[u32], winning: &[bool], cap: u32) {
    for good in 0..available.len() {
        if !winning[good] && bid_prices[good] >= cap {
            available[good] = false;
        }
    }
}
