//! Equilibrium verification on the estimated payoff table: pure symmetric
//! Nash checks, deviation-gain bounds, and iterated strict dominance on
//! complete subgames.

use std::collections::BTreeSet;

use super::{enumerate_profiles, EgaError, EmpiricalGame, Profile};

/// Smallest ϵ that makes the all-`strategy` profile an ϵ-Nash equilibrium
/// in the estimated game: the largest payoff gain over all unilateral
/// deviations, clamped at zero. Zero certifies a (sample-estimate) pure
/// symmetric equilibrium.
///
/// Requires the all-`strategy` profile and every single-deviation profile.
pub fn verify_pure_symmetric_nash(
    game: &EmpiricalGame,
    strategy: usize,
) -> Result<f64, EgaError> {
    let roster_size = game.roster.len();
    if strategy >= roster_size {
        return Err(EgaError::StrategyOutOfRange(strategy, roster_size));
    }
    let base = Profile::all_playing(strategy, game.environment.num_agents, roster_size);
    let base_payoff = game
        .payoff(&base, strategy)
        .ok_or_else(|| EgaError::MissingProfile(base.counts().to_vec()))?;
    let mut epsilon = 0.0f64;
    for other in 0..roster_size {
        if other == strategy {
            continue;
        }
        let deviation = base.deviate(strategy, other).expect("base is all-strategy");
        let dev_payoff = game
            .payoff(&deviation, other)
            .ok_or_else(|| EgaError::MissingProfile(deviation.counts().to_vec()))?;
        epsilon = epsilon.max(dev_payoff - base_payoff);
    }
    Ok(epsilon)
}

/// Lower bound on the ϵ that makes `profile` an ϵ-Nash equilibrium, from
/// the unilateral deviations present in the table. A lower bound only:
/// unevaluated deviations may be more profitable.
pub fn epsilon_bound(game: &EmpiricalGame, profile: &Profile) -> Result<f64, EgaError> {
    let roster_size = game.roster.len();
    let mut best: Option<f64> = None;
    for from in profile.support() {
        let Some(base_payoff) = game.payoff(profile, from) else { continue };
        for to in 0..roster_size {
            let Some(deviation) = profile.deviate(from, to) else { continue };
            let Some(dev_payoff) = game.payoff(&deviation, to) else { continue };
            let gain = dev_payoff - base_payoff;
            best = Some(best.map_or(gain, |b: f64| b.max(gain)));
        }
    }
    match best {
        Some(gain) => Ok(gain.max(0.0)),
        None => Err(EgaError::NoDeviationsEvaluated(profile.counts().to_vec())),
    }
}

/// Verifies that every profile over `clique` is estimated; returns them
/// mapped into roster space.
pub(crate) fn complete_clique_profiles(
    game: &EmpiricalGame,
    clique: &BTreeSet<usize>,
    num_agents: usize,
) -> Result<Vec<Profile>, EgaError> {
    let roster_size = game.roster.len();
    for &s in clique {
        if s >= roster_size {
            return Err(EgaError::StrategyOutOfRange(s, roster_size));
        }
    }
    assert!(!clique.is_empty(), "clique must name at least one strategy");
    let members: Vec<usize> = clique.iter().copied().collect();
    let mut out = Vec::new();
    for local in enumerate_profiles(num_agents, members.len()) {
        let mut counts = vec![0usize; roster_size];
        for (k, &c) in local.counts().iter().enumerate() {
            counts[members[k]] = c;
        }
        let profile = Profile::new(counts);
        if game.entry(&profile).is_none() {
            return Err(EgaError::IncompleteClique(profile.counts().to_vec()));
        }
        out.push(profile);
    }
    Ok(out)
}

/// Payoff of `strategy` against `opponents` (a profile of the other
/// N-1 agents).
pub(crate) fn payoff_against(
    game: &EmpiricalGame,
    strategy: usize,
    opponents: &Profile,
) -> Result<f64, EgaError> {
    let full = opponents.plus(strategy);
    game.payoff(&full, strategy)
        .ok_or_else(|| EgaError::MissingProfile(full.counts().to_vec()))
}

/// Iterated elimination of strictly dominated pure strategies within a
/// clique (a strategy set whose every profile combination is estimated).
/// Returns the surviving set; the fixed point is order-independent for
/// strict dominance.
pub fn iterated_dominance(
    game: &EmpiricalGame,
    clique: &BTreeSet<usize>,
) -> Result<BTreeSet<usize>, EgaError> {
    let num_agents = game.environment.num_agents;
    complete_clique_profiles(game, clique, num_agents)?;

    let mut remaining: BTreeSet<usize> = clique.clone();
    loop {
        let members: Vec<usize> = remaining.iter().copied().collect();
        let mut dominated: BTreeSet<usize> = BTreeSet::new();
        // opponent profiles over the remaining strategies
        let opponent_profiles: Vec<Profile> = if num_agents >= 2 {
            enumerate_profiles(num_agents - 1, members.len())
                .into_iter()
                .map(|local| {
                    let mut counts = vec![0usize; game.roster.len()];
                    for (k, &c) in local.counts().iter().enumerate() {
                        counts[members[k]] = c;
                    }
                    Profile::new(counts)
                })
                .collect()
        } else {
            vec![Profile::new(vec![0; game.roster.len()])]
        };
        for &b in &members {
            if dominated.contains(&b) {
                continue;
            }
            'dominators: for &a in &members {
                if a == b || dominated.contains(&a) {
                    continue;
                }
                for opp in &opponent_profiles {
                    let ua = payoff_against(game, a, opp)?;
                    let ub = payoff_against(game, b, opp)?;
                    if ua <= ub {
                        continue 'dominators;
                    }
                }
                dominated.insert(b);
                break;
            }
        }
        if dominated.is_empty() {
            return Ok(remaining);
        }
        for d in dominated {
            remaining.remove(&d);
        }
        if remaining.len() <= 1 {
            return Ok(remaining);
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::ega::{PayoffEntry, PayoffStats, StrategyRoster};
    use crate::env::EnvironmentSpec;
    use crate::strategy::StrategySpec;
    use crate::valuation::{Bundle, TableValuation};
    use std::collections::BTreeMap;

    /// A synthetic symmetric game over `payoff(strategy, opponents)`.
    pub(crate) fn synthetic_game(
        num_agents: usize,
        labels: &[&str],
        payoff: impl Fn(usize, &[usize]) -> f64,
    ) -> EmpiricalGame {
        let tables = (0..num_agents)
            .map(|_| TableValuation::new(1, vec![(Bundle::new(vec![0]), 1)]))
            .collect();
        let env = EnvironmentSpec::fixed(tables, 5, 0);
        let roster = StrategyRoster::new(
            labels.iter().map(|l| (l.to_string(), StrategySpec::Sb)).collect(),
        )
        .unwrap();
        let mut game = EmpiricalGame::new(env, roster);
        for profile in enumerate_profiles(num_agents, labels.len()) {
            let mut by_strategy = BTreeMap::new();
            for s in profile.support() {
                let mut opponents = profile.counts().to_vec();
                opponents[s] -= 1;
                by_strategy.insert(
                    s,
                    PayoffStats { mean: payoff(s, &opponents), variance: 0.0, games: 1 },
                );
            }
            game.insert(profile, PayoffEntry { by_strategy, efficiency: None });
        }
        game
    }

    #[test]
    fn dominant_strategy_is_exact_nash() {
        // strategy 0 beats the others by 1 against every opponent profile
        let game = synthetic_game(3, &["good", "bad", "worse"], |s, _| match s {
            0 => 5.0,
            1 => 4.0,
            _ => 3.0,
        });
        assert_eq!(verify_pure_symmetric_nash(&game, 0).unwrap(), 0.0);
        assert!(verify_pure_symmetric_nash(&game, 1).unwrap() >= 1.0);
    }

    #[test]
    fn epsilon_matches_best_deviation_gain() {
        let game = synthetic_game(5, &["a", "b"], |s, opp| {
            // deviating to b against all-a pays 0.13 more
            let all_a = opp.iter().sum::<usize>() == opp[0];
            match (s, all_a) {
                (0, _) => 4.51,
                (1, true) => 4.64,
                _ => 4.0,
            }
        });
        let eps = verify_pure_symmetric_nash(&game, 0).unwrap();
        assert!((eps - 0.13).abs() < 1e-12);
    }

    #[test]
    fn single_strategy_roster_is_vacuously_nash() {
        let game = synthetic_game(3, &["only"], |_, _| 2.0);
        assert_eq!(verify_pure_symmetric_nash(&game, 0).unwrap(), 0.0);
    }

    #[test]
    fn missing_profiles_are_named() {
        let game = synthetic_game(3, &["a", "b"], |_, _| 1.0);
        let mut gutted = game.clone();
        let missing = Profile::new(vec![2, 1]);
        let mut stripped = EmpiricalGame::new(gutted.environment.clone(), gutted.roster.clone());
        for (p, e) in gutted.profiles() {
            if p != &missing {
                stripped.insert(p.clone(), e.clone());
            }
        }
        gutted = stripped;
        match verify_pure_symmetric_nash(&gutted, 0) {
            Err(EgaError::MissingProfile(counts)) => assert_eq!(counts, vec![2, 1]),
            other => panic!("expected missing profile, got {other:?}"),
        }
    }

    #[test]
    fn epsilon_bound_cases() {
        let game = synthetic_game(3, &["a", "b"], |s, opp| {
            // b is better when others play a
            match (s, opp[0]) {
                (1, 2) => 3.32,
                _ => 3.0,
            }
        });
        let all_a = Profile::new(vec![3, 0]);
        let bound = epsilon_bound(&game, &all_a).unwrap();
        assert!((bound - 0.32).abs() < 1e-12);

        // no profitable deviation: exact zero
        let game = synthetic_game(3, &["a", "b"], |s, _| if s == 0 { 2.0 } else { 1.0 });
        assert_eq!(epsilon_bound(&game, &Profile::new(vec![3, 0])).unwrap(), 0.0);

        // empty table: no deviations evaluated
        let empty = EmpiricalGame::new(
            game.environment.clone(),
            game.roster.clone(),
        );
        assert!(matches!(
            epsilon_bound(&empty, &Profile::new(vec![3, 0])),
            Err(EgaError::NoDeviationsEvaluated(_))
        ));
    }

    #[test]
    fn partial_coverage_bound_is_a_lower_bound() {
        use rand::RngExt;
        let mut rng = crate::rng::SeedStream::new(41).rng_for(0);
        for trial in 0..50 {
            let n = rng.random_range(2..=4usize);
            let s = rng.random_range(2..=3usize);
            let table: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..10.0)).collect();
            let payoff = |strategy: usize, opp: &[usize]| {
                let mut h = strategy * 31;
                for &c in opp {
                    h = h * 7 + c;
                }
                table[h % table.len()]
            };
            let game = synthetic_game(n, &vec!["a", "b", "c"][..s], payoff);
            let profile = enumerate_profiles(n, s)
                [rng.random_range(0..enumerate_profiles(n, s).len())]
            .clone();
            let full_bound = epsilon_bound(&game, &profile).unwrap();
            // strip a random subset of profiles (keeping at least one
            // deviation of the chosen profile)
            let mut partial = EmpiricalGame::new(
                game.environment.clone(),
                game.roster.clone(),
            );
            let mut kept_deviation = false;
            for (p, e) in game.profiles() {
                let is_dev = profile
                    .support()
                    .any(|f| (0..s).any(|t| profile.deviate(f, t) == Some(p.clone())));
                if p == &profile
                    || (is_dev && !kept_deviation)
                    || rng.random::<bool>()
                {
                    if is_dev {
                        kept_deviation = true;
                    }
                    partial.insert(p.clone(), e.clone());
                }
            }
            if let Ok(partial_bound) = epsilon_bound(&partial, &profile) {
                assert!(
                    partial_bound <= full_bound + 1e-12,
                    "trial {trial}: partial {partial_bound} > full {full_bound}"
                );
            }
        }
    }

    #[test]
    fn dominance_removes_strictly_worse_strategies() {
        let game = synthetic_game(2, &["a", "b"], |s, _| if s == 0 { 2.0 } else { 1.0 });
        let clique: BTreeSet<usize> = [0, 1].into();
        let surviving = iterated_dominance(&game, &clique).unwrap();
        assert_eq!(surviving, [0].into());
    }

    #[test]
    fn cyclic_game_keeps_everything() {
        // rock-paper-scissors: no strict dominance anywhere
        let game = synthetic_game(2, &["r", "p", "s"], |s, opp| {
            let o = opp.iter().position(|&c| c == 1).unwrap();
            match (3 + s - o) % 3 {
                0 => 0.0,
                1 => 1.0, // s beats o
                _ => -1.0,
            }
        });
        let clique: BTreeSet<usize> = [0, 1, 2].into();
        assert_eq!(iterated_dominance(&game, &clique).unwrap(), clique);
    }

    #[test]
    fn iterated_elimination_cascades() {
        // c is dominated by b; once c is gone, b is dominated by a
        let game = synthetic_game(2, &["a", "b", "c"], |s, opp| {
            let vs_c = opp[2] == 1;
            match s {
                0 => {
                    if vs_c {
                        0.0
                    } else {
                        3.0
                    }
                }
                1 => 2.0,
                _ => 1.0,
            }
        });
        let clique: BTreeSet<usize> = [0, 1, 2].into();
        let surviving = iterated_dominance(&game, &clique).unwrap();
        assert_eq!(surviving, [0].into());
    }

    #[test]
    fn incomplete_clique_is_rejected() {
        let game = synthetic_game(2, &["a", "b"], |_, _| 1.0);
        let mut partial = EmpiricalGame::new(game.environment.clone(), game.roster.clone());
        let keep = Profile::new(vec![2, 0]);
        for (p, e) in game.profiles() {
            if p == &keep {
                partial.insert(p.clone(), e.clone());
            }
        }
        let clique: BTreeSet<usize> = [0, 1].into();
        assert!(matches!(
            iterated_dominance(&partial, &clique),
            Err(EgaError::IncompleteClique(_))
        ));
    }

    #[test]
    fn exact_nash_and_dominance_agree_on_dominant_toys() {
        // a strictly dominant strategy is a zero-epsilon equilibrium and
        // the unique survivor of every pairwise clique containing it
        use rand::RngExt;
        let mut rng = crate::rng::SeedStream::new(43).rng_for(0);
        for _ in 0..30 {
            let n = rng.random_range(2..=3usize);
            let s = rng.random_range(2..=4usize);
            let dominant = rng.random_range(0..s);
            let vals: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..3.0)).collect();
            let payoff = move |strategy: usize, opp: &[usize]| {
                let mut h = strategy * 61;
                for (k, &c) in opp.iter().enumerate() {
                    h = h * 13 + c * (k + 1);
                }
                vals[h % vals.len()] + if strategy == dominant { 4.0 } else { 0.0 }
            };
            let labels = ["a", "b", "c", "d"];
            let game = synthetic_game(n, &labels[..s], payoff);
            assert_eq!(verify_pure_symmetric_nash(&game, dominant).unwrap(), 0.0);
            for other in 0..s {
                if other == dominant {
                    continue;
                }
                assert!(verify_pure_symmetric_nash(&game, other).unwrap() > 0.0);
                let pair: BTreeSet<usize> = [dominant, other].into();
                assert_eq!(
                    iterated_dominance(&game, &pair).unwrap(),
                    [dominant].into()
                );
            }
        }
    }

    #[test]
    fn dominance_fixed_point_ignores_scan_order() {
        // randomized payoff tables; reversing label order must not change
        // the surviving set (mapped through the relabeling)
        use rand::RngExt;
        let mut rng = crate::rng::SeedStream::new(42).rng_for(1);
        for _ in 0..40 {
            let n = rng.random_range(2..=3usize);
            let vals: Vec<f64> = (0..2000).map(|_| rng.random_range(0.0..8.0)).collect();
            let payoff_fwd = |s: usize, opp: &[usize]| {
                let mut h = s * 131;
                for (k, &c) in opp.iter().enumerate() {
                    h = h * 17 + c * (k + 1);
                }
                vals[h % vals.len()]
            };
            let labels = ["a", "b", "c", "d"];
            let s = 4;
            let game = synthetic_game(n, &labels[..s], payoff_fwd);
            // reversed-roster version of the same game
            let payoff_rev =
                |st: usize, opp: &[usize]| {
                    let mut o = opp.to_vec();
                    o.reverse();
                    payoff_fwd(s - 1 - st, &o)
                };
            let rev_labels: Vec<&str> = labels[..s].iter().rev().copied().collect();
            let game_rev = synthetic_game(n, &rev_labels, payoff_rev);
            let clique: BTreeSet<usize> = (0..s).collect();
            let fwd = iterated_dominance(&game, &clique).unwrap();
            let rev = iterated_dominance(&game_rev, &clique).unwrap();
            let rev_mapped: BTreeSet<usize> = rev.iter().map(|&i| s - 1 - i).collect();
            assert_eq!(fwd, rev_mapped);
        }
    }
}
