//! Agent value functions and the surplus-maximizing bundle choice.
//!
//! Two valuation families are supported: market-based scheduling valuations
//! (a job length plus a monotone table of deadline values) and explicit
//! bundle-value tables closed under free disposal.

use rand::{Rng, RngExt};

/// Deadline values are drawn from the discrete uniform {1..=50}.
pub const DEADLINE_VALUE_MAX: u32 = 50;

/// Relative tolerance for comparing real-valued surpluses before
/// tie-breaking, so the argmax never flips on platform rounding.
pub const SURPLUS_TOL: f64 = 1e-9;

/// A set of goods, stored as sorted, deduplicated 0-based indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bundle(Vec<usize>);

impl Bundle {
    pub fn empty() -> Self {
        Bundle(Vec::new())
    }

    pub fn new(mut goods: Vec<usize>) -> Self {
        goods.sort_unstable();
        goods.dedup();
        Bundle(goods)
    }

    pub fn goods(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, good: usize) -> bool {
        self.0.binary_search(&good).is_ok()
    }

    pub fn is_subset_of(&self, other: &Bundle) -> bool {
        self.0.iter().all(|g| other.contains(*g))
    }

    /// All subsets of `{0..num_goods}`; exhaustive-enumeration oracles only.
    pub fn enumerate_all(num_goods: usize) -> impl Iterator<Item = Bundle> {
        assert!(num_goods < usize::BITS as usize);
        (0usize..1 << num_goods).map(move |mask| {
            Bundle((0..num_goods).filter(|g| mask >> g & 1 == 1).collect())
        })
    }
}

impl FromIterator<usize> for Bundle {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        Bundle::new(iter.into_iter().collect())
    }
}

/// Scheduling valuation: a job of length `job_length` scheduled on time
/// slots (the goods, slot `t` = good index `t-1`). Completing the job by
/// slot `t` is worth `deadline_values[t - job_length]`; the table is
/// non-increasing in `t` and the job is worthless if fewer than
/// `job_length` slots are held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchedulingValuation {
    num_goods: usize,
    job_length: usize,
    deadline_values: Vec<u32>,
}

impl SchedulingValuation {
    pub fn new(num_goods: usize, job_length: usize, deadline_values: Vec<u32>) -> Self {
        assert!(num_goods >= 1);
        assert!((1..=num_goods).contains(&job_length));
        assert_eq!(deadline_values.len(), num_goods - job_length + 1);
        assert!(
            deadline_values.windows(2).all(|w| w[0] >= w[1]),
            "deadline values must be non-increasing"
        );
        SchedulingValuation { num_goods, job_length, deadline_values }
    }

    pub fn num_goods(&self) -> usize {
        self.num_goods
    }

    pub fn job_length(&self) -> usize {
        self.job_length
    }

    pub fn deadline_values(&self) -> &[u32] {
        &self.deadline_values
    }

    /// Value of completing by 1-based slot `t`.
    pub fn value_at_deadline(&self, t: usize) -> u32 {
        debug_assert!((self.job_length..=self.num_goods).contains(&t));
        self.deadline_values[t - self.job_length]
    }

    pub fn value(&self, bundle: &Bundle) -> u32 {
        if bundle.len() < self.job_length {
            return 0;
        }
        // completion slot = job_length-th smallest held slot (1-based)
        let t = bundle.goods()[self.job_length - 1] + 1;
        self.value_at_deadline(t)
    }
}

/// Explicit bundle-value table, closed under free disposal: the value of
/// any set is the best value among listed subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableValuation {
    num_goods: usize,
    entries: Vec<(Bundle, u32)>,
}

impl TableValuation {
    pub fn new(num_goods: usize, entries: Vec<(Bundle, u32)>) -> Self {
        for (bundle, _) in &entries {
            assert!(bundle.goods().iter().all(|&g| g < num_goods));
        }
        TableValuation { num_goods, entries }
    }

    pub fn num_goods(&self) -> usize {
        self.num_goods
    }

    pub fn entries(&self) -> &[(Bundle, u32)] {
        &self.entries
    }

    pub fn max_listed_value(&self) -> u32 {
        self.entries.iter().map(|(_, v)| *v).max().unwrap_or(0)
    }

    pub fn value(&self, bundle: &Bundle) -> u32 {
        self.entries
            .iter()
            .filter(|(b, _)| b.is_subset_of(bundle))
            .map(|(_, v)| *v)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Valuation {
    Scheduling(SchedulingValuation),
    Table(TableValuation),
}

impl Valuation {
    pub fn num_goods(&self) -> usize {
        match self {
            Valuation::Scheduling(v) => v.num_goods(),
            Valuation::Table(v) => v.num_goods(),
        }
    }

    /// v(X): the agent's value for holding exactly the goods in `bundle`.
    pub fn value(&self, bundle: &Bundle) -> u32 {
        match self {
            Valuation::Scheduling(v) => v.value(bundle),
            Valuation::Table(v) => v.value(bundle),
        }
    }

    /// v(X) minus the prices paid for the goods in X.
    pub fn surplus(&self, bundle: &Bundle, prices: &[u32]) -> i64 {
        let paid: i64 = bundle.goods().iter().map(|&g| i64::from(prices[g])).sum();
        i64::from(self.value(bundle)) - paid
    }

    /// Surplus at real-valued perceived prices.
    pub fn perceived_surplus(&self, bundle: &Bundle, prices: &[f64]) -> f64 {
        let paid: f64 = bundle.goods().iter().map(|&g| prices[g]).sum();
        f64::from(self.value(bundle)) - paid
    }

    /// True iff the value of every set equals its best single good, which
    /// makes straightforward bidding a no-regret policy.
    pub fn is_single_unit(&self) -> bool {
        match self {
            Valuation::Scheduling(v) => v.job_length() == 1,
            Valuation::Table(v) => {
                let m = v.num_goods();
                assert!(m <= 20, "single-unit check enumerates 2^M subsets");
                let single: Vec<u32> =
                    (0..m).map(|g| v.value(&Bundle::new(vec![g]))).collect();
                Bundle::enumerate_all(m).all(|x| {
                    let best_single =
                        x.goods().iter().map(|&g| single[g]).max().unwrap_or(0);
                    v.value(&x) == best_single
                })
            }
        }
    }

    /// Upper bound on any bundle's value; environments must cap prices at
    /// or above this.
    pub fn max_value(&self) -> u32 {
        match self {
            Valuation::Scheduling(v) => {
                v.deadline_values().iter().copied().max().unwrap_or(0)
            }
            Valuation::Table(v) => v.max_listed_value(),
        }
    }
}

/// `a` and `b` are equal up to [`SURPLUS_TOL`] (relative).
#[inline]
pub fn surplus_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= SURPLUS_TOL * 1f64.max(a.abs()).max(b.abs())
}

/// `a` is strictly greater than `b` beyond the tolerance band.
#[inline]
pub fn surplus_gt(a: f64, b: f64) -> bool {
    a > b && !surplus_eq(a, b)
}

fn tie_break_better(candidate: &Bundle, incumbent: &Bundle) -> bool {
    candidate.len() < incumbent.len()
        || (candidate.len() == incumbent.len() && candidate < incumbent)
}

/// The candidate bundles inspected by the optimizer together with the
/// maximal surplus. Ties are all candidates whose surplus is within
/// [`SURPLUS_TOL`] of the maximum; the empty bundle wins outright whenever
/// the maximum is not strictly positive (no gratuitous exposure).
pub fn optimal_bundle_tied(
    valuation: &Valuation,
    perceived: &[f64],
    available: &[bool],
) -> (f64, Vec<Bundle>) {
    let candidates = candidate_bundles(valuation, perceived, available);
    let mut best = 0.0; // the empty bundle
    for (_, s) in &candidates {
        if surplus_gt(*s, best) {
            best = *s;
        }
    }
    if !surplus_gt(best, 0.0) {
        return (0.0, vec![Bundle::empty()]);
    }
    let tied: Vec<Bundle> = candidates
        .into_iter()
        .filter(|(_, s)| surplus_eq(*s, best))
        .map(|(b, _)| b)
        .collect();
    (best, tied)
}

/// Deterministic surplus-maximizing bundle at perceived prices: among
/// surplus-tied candidates prefers smaller cardinality, then the
/// lexicographically smallest good set; the empty bundle at surplus zero.
pub fn optimal_bundle(
    valuation: &Valuation,
    perceived: &[f64],
    available: &[bool],
) -> Bundle {
    let (_, tied) = optimal_bundle_tied(valuation, perceived, available);
    let mut best = tied[0].clone();
    for b in &tied[1..] {
        if tie_break_better(b, &best) {
            best = b.clone();
        }
    }
    best
}

/// Candidate bundles with their surpluses (the empty bundle is implicit).
///
/// Scheduling valuations use the structured search: for each completion
/// slot `t`, the cheapest completing bundle is `{t}` plus the
/// `job_length - 1` cheapest available earlier slots. Table valuations
/// inspect the listed bundles; with non-negative prices a superset is
/// never strictly better and the tie-break prefers the smaller set.
fn candidate_bundles(
    valuation: &Valuation,
    perceived: &[f64],
    available: &[bool],
) -> Vec<(Bundle, f64)> {
    match valuation {
        Valuation::Scheduling(v) => {
            let m = v.num_goods();
            let need = v.job_length() - 1;
            let mut out = Vec::new();
            // earlier slots sorted by (price, index); prefix gives the
            // cheapest lexicographically-smallest completing set
            let mut by_price: Vec<usize> = Vec::with_capacity(m);
            for t in 0..m {
                if available[t] && by_price.len() >= need {
                    let mut goods: Vec<usize> =
                        by_price[..need].iter().copied().collect();
                    goods.push(t);
                    let bundle = Bundle::new(goods);
                    let s = valuation.perceived_surplus(&bundle, perceived);
                    out.push((bundle, s));
                }
                if available[t] {
                    let pos = by_price
                        .binary_search_by(|&g| {
                            perceived[g]
                                .partial_cmp(&perceived[t])
                                .unwrap()
                                .then(g.cmp(&t))
                        })
                        .unwrap_err();
                    by_price.insert(pos, t);
                }
            }
            out
        }
        Valuation::Table(v) => v
            .entries()
            .iter()
            .filter(|(b, _)| b.goods().iter().all(|&g| available[g]))
            .map(|(b, _)| {
                let s = valuation.perceived_surplus(b, perceived);
                (b.clone(), s)
            })
            .collect(),
    }
}

/// Job-length models for sampled scheduling preferences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobLengthModel {
    /// λ uniform on {1..=M}.
    Uniform,
    /// Pr(λ) = 2^-λ for λ < M, with the remainder 2^-(M-1) on λ = M.
    Exponential,
}

/// How raw iid deadline-value draws are forced monotone non-increasing.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum DeadlinePruning {
    /// Clamp each value to its predecessor.
    SequentialClamp,
    /// A draw above its predecessor zeroes itself and everything after it.
    ZeroViolators,
    /// A draw above its predecessor is redrawn uniformly at or below it
    /// (each value is then uniform on {1..=predecessor}).
    #[default]
    RedrawBelow,
}

/// Sequential clamp: walking later deadlines, no value may exceed its
/// predecessor. Preserves the first deadline's marginal distribution.
pub fn prune_monotone(values: &mut [u32]) {
    for i in 1..values.len() {
        values[i] = values[i].min(values[i - 1]);
    }
}

/// Keeps the leading non-increasing run of draws and zeroes the rest.
pub fn prune_zero_violators(values: &mut [u32]) {
    for i in 1..values.len() {
        if values[i] > values[i - 1] {
            values[i..].iter_mut().for_each(|v| *v = 0);
            break;
        }
    }
}

/// Draws a scheduling valuation: job length from `model`, deadline values
/// iid uniform on {1..=50} then pruned monotone by `policy`.
pub fn sample_valuation_with(
    model: JobLengthModel,
    num_goods: usize,
    policy: DeadlinePruning,
    rng: &mut impl Rng,
) -> SchedulingValuation {
    assert!(num_goods >= 1);
    let job_length = match model {
        JobLengthModel::Uniform => rng.random_range(1..=num_goods),
        JobLengthModel::Exponential => {
            let mut len = 1;
            while len < num_goods && rng.random::<bool>() {
                len += 1;
            }
            len
        }
    };
    let mut values: Vec<u32> = (job_length..=num_goods)
        .map(|_| rng.random_range(1..=DEADLINE_VALUE_MAX))
        .collect();
    match policy {
        DeadlinePruning::SequentialClamp => prune_monotone(&mut values),
        DeadlinePruning::ZeroViolators => prune_zero_violators(&mut values),
        DeadlinePruning::RedrawBelow => {
            for i in 1..values.len() {
                if values[i] > values[i - 1] {
                    values[i] = rng.random_range(1..=values[i - 1]);
                }
            }
        }
    }
    SchedulingValuation::new(num_goods, job_length, values)
}

/// [`sample_valuation_with`] under the default pruning policy.
pub fn sample_valuation(
    model: JobLengthModel,
    num_goods: usize,
    rng: &mut impl Rng,
) -> SchedulingValuation {
    sample_valuation_with(model, num_goods, DeadlinePruning::default(), rng)
}
