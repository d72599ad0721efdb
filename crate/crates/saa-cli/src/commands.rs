//! The five subcommands: derive-sc, simulate-profile, analyze-game,
//! verify, describe-dist.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use saa_core::ega::{
    bootstrap_gain, build_default_roster, epsilon_bound, estimate_profile,
    iterated_dominance, replicator_dynamics, verify_pure_symmetric_nash,
    BootstrapReport, EmpiricalGame, MixedStrategy, Profile, ReplicatorOutcome,
    StrategyRoster,
};
use saa_core::parallel::with_workers;
use saa_core::rng::{stream, SeedStream};
use saa_core::solver::{derive_sc, describe, ScSolverParams};
use saa_core::strategy::MarginalPriceDistribution;
use saa_core::{EnvironmentSpec, PriceStats};

use crate::config::{
    load_config, AnalyzeGameConfig, DeriveScConfig, ResolvedRoster,
    SimulateProfileConfig, SCHEMA_VERSION,
};
use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub struct RunContext<'a> {
    pub config_path: &'a Path,
    pub seed_override: Option<u64>,
    pub workers: usize,
    pub out_dir: &'a Path,
}

fn apply_seed(env: &mut EnvironmentSpec, seed_override: Option<u64>) {
    if let Some(seed) = seed_override {
        env.seed = seed;
    }
}

fn stats_table(stats: &[PriceStats]) -> String {
    let mut out = String::from("good  mean price  std deviation\n");
    for (i, s) in stats.iter().enumerate() {
        out.push_str(&format!("{:>4}  {:>10.2}  {:>13.2}\n", i + 1, s.mean, s.std_dev));
    }
    out
}

#[derive(Serialize)]
struct GoodStats {
    good: usize,
    mean: f64,
    std_dev: f64,
}

fn good_stats(stats: &[PriceStats]) -> Vec<GoodStats> {
    stats
        .iter()
        .enumerate()
        .map(|(i, s)| GoodStats { good: i + 1, mean: s.mean, std_dev: s.std_dev })
        .collect()
}

pub fn cmd_derive_sc(ctx: &RunContext) -> Result<(), CliError> {
    let (config, base) = load_config::<DeriveScConfig>(ctx.config_path)?;
    let mut env = config.environment.resolve(&base)?;
    apply_seed(&mut env, ctx.seed_override);
    let params = config.solver.unwrap_or_else(ScSolverParams::desk_scale);
    params.validate()?;

    eprintln!(
        "deriving self-confirming distribution: {} agents, {} goods, n={} per iteration",
        env.num_agents, env.num_goods, params.samples_per_iteration
    );
    let result = with_workers(ctx.workers, || derive_sc(&env, &params))?;
    eprintln!(
        "{} after {} iterations (final KS {:.4})",
        if result.converged { "converged" } else { "not converged" },
        result.iterations_used,
        result.ks_trace.last().copied().unwrap_or(f64::NAN)
    );

    let resolved_config = json!({
        "schema_version": SCHEMA_VERSION,
        "environment": env,
        "solver": params,
    });
    let mut manifest = ManifestBuilder::new(
        "derive-sc",
        env.seed,
        ctx.workers,
        resolved_config,
        ctx.out_dir,
    )?;

    let result_json = json!({
        "schema_version": SCHEMA_VERSION,
        "environment": env,
        "params": params,
        "converged": result.converged,
        "iterations_used": result.iterations_used,
        "ks_trace": result.ks_trace,
        "price_stats": good_stats(&result.price_stats),
    });
    manifest.write_output(
        "result.json",
        &serde_json::to_string_pretty(&result_json).expect("result serializes"),
    )?;
    manifest.write_output("distribution.csv", &result.distribution.to_csv())?;
    manifest.finish()?;

    print!("{}", stats_table(&result.price_stats));
    Ok(())
}

fn resolve_roster_with_artifacts(
    roster: ResolvedRoster,
    env: &EnvironmentSpec,
    workers: usize,
) -> Result<(StrategyRoster, Option<saa_core::ega::RosterArtifacts>), CliError> {
    match roster {
        ResolvedRoster::Fixed(roster) => Ok((roster, None)),
        ResolvedRoster::Builtin(params) => {
            eprintln!(
                "building default roster (baseline {} games, solver n={})",
                params.sb_samples, params.solver.samples_per_iteration
            );
            let (roster, artifacts) =
                with_workers(workers, || build_default_roster(env, &params))?;
            Ok((roster, Some(artifacts)))
        }
    }
}

fn profile_from_labels(
    roster: &StrategyRoster,
    counts_by_label: &std::collections::BTreeMap<String, usize>,
    num_agents: usize,
) -> Result<Profile, CliError> {
    let mut counts = vec![0usize; roster.len()];
    for (label, &count) in counts_by_label {
        let index = roster.index_of(label)?;
        counts[index] = count;
    }
    let total: usize = counts.iter().sum();
    if total != num_agents {
        return Err(CliError::Config(format!(
            "profile counts sum to {total}, environment has {num_agents} agents"
        )));
    }
    Ok(Profile::new(counts))
}

pub fn cmd_simulate_profile(ctx: &RunContext) -> Result<(), CliError> {
    let (config, base) = load_config::<SimulateProfileConfig>(ctx.config_path)?;
    let mut env = config.environment.resolve(&base)?;
    apply_seed(&mut env, ctx.seed_override);
    if config.games == 0 {
        return Err(CliError::Config("games must be at least 1".into()));
    }

    let (roster, _artifacts) =
        resolve_roster_with_artifacts(config.roster.resolve(&base)?, &env, ctx.workers)?;
    let profile = profile_from_labels(&roster, &config.profile, env.num_agents)?;

    eprintln!(
        "estimating profile {:?} over {} games",
        profile.counts(),
        config.games
    );
    let entry = with_workers(ctx.workers, || {
        estimate_profile(&env, &roster, &profile, config.games, env.seed)
    })?;

    let mut game = EmpiricalGame::new(env.clone(), roster.clone());
    game.insert(profile.clone(), entry.clone());

    let resolved_config = json!({
        "schema_version": SCHEMA_VERSION,
        "environment": env,
        "profile": config.profile,
        "games": config.games,
    });
    let mut manifest = ManifestBuilder::new(
        "simulate-profile",
        env.seed,
        ctx.workers,
        resolved_config,
        ctx.out_dir,
    )?;
    manifest.write_output("payoff.json", &game.to_json())?;
    manifest.finish()?;

    for (&s, stats) in &entry.by_strategy {
        println!(
            "{}: mean {:.4} variance {:.4} games {}",
            roster.label(s),
            stats.mean,
            stats.variance,
            stats.games
        );
    }
    if let Some(eff) = &entry.efficiency {
        println!(
            "allocation value {:.4} vs optimal {:.4} (max shortfall {}, bound {})",
            eff.mean_allocation_value,
            eff.mean_optimal_value,
            eff.max_shortfall,
            eff.shortfall_bound
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CliqueReport {
    members: Vec<String>,
    surviving: Vec<String>,
    replicator: ReplicatorReport,
}

#[derive(Serialize)]
struct ReplicatorReport {
    mixture: Vec<LabeledMass>,
    candidate_mass: f64,
    steps_used: usize,
    residual: f64,
    converged: bool,
    best_response_gain: f64,
}

#[derive(Serialize)]
struct LabeledMass {
    label: String,
    mass: f64,
}

fn replicator_report(
    roster: &StrategyRoster,
    candidate: usize,
    outcome: &ReplicatorOutcome,
) -> ReplicatorReport {
    ReplicatorReport {
        mixture: outcome
            .mixture
            .probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(s, &p)| LabeledMass { label: roster.label(s).to_string(), mass: p })
            .collect(),
        candidate_mass: outcome.mixture.mass_on(candidate),
        steps_used: outcome.steps_used,
        residual: outcome.residual,
        converged: outcome.converged,
        best_response_gain: outcome.best_response_gain,
    }
}

pub fn cmd_analyze_game(ctx: &RunContext) -> Result<(), CliError> {
    let (config, base) = load_config::<AnalyzeGameConfig>(ctx.config_path)?;
    let mut env = config.environment.resolve(&base)?;
    apply_seed(&mut env, ctx.seed_override);

    let (roster, _artifacts) =
        resolve_roster_with_artifacts(config.roster.resolve(&base)?, &env, ctx.workers)?;
    let candidate = roster.index_of(&config.candidate)?;
    let mut game = EmpiricalGame::new(env.clone(), roster.clone());

    for table_path in &config.payoff_tables {
        let full = base.join(table_path);
        let text = std::fs::read_to_string(&full).map_err(|e| {
            CliError::Incomplete(format!("payoff table {}: {e}", full.display()))
        })?;
        let loaded = EmpiricalGame::from_json(&text)?;
        game.merge(loaded)?;
    }

    // the all-candidate profile and its unilateral deviations
    let mut required: Vec<Profile> = Vec::new();
    let base_profile = Profile::all_playing(candidate, env.num_agents, roster.len());
    required.push(base_profile.clone());
    for other in 0..roster.len() {
        if let Some(dev) = base_profile.deviate(candidate, other) {
            required.push(dev);
        }
    }
    // declared cliques, as index sets, plus their complete profile grids
    let mut cliques: Vec<BTreeSet<usize>> = Vec::new();
    for labels in &config.cliques {
        let mut clique = BTreeSet::new();
        for label in labels {
            clique.insert(roster.index_of(label)?);
        }
        if clique.is_empty() {
            return Err(CliError::Config("empty clique".into()));
        }
        for profile in saa_core::enumerate_profiles(env.num_agents, clique.len()) {
            let mut counts = vec![0usize; roster.len()];
            for (k, &c) in profile.counts().iter().enumerate() {
                counts[*clique.iter().nth(k).expect("clique member")] = c;
            }
            required.push(Profile::new(counts));
        }
        cliques.push(clique);
    }

    match config.games {
        Some(games) if games > 0 => {
            for profile in &required {
                if game.entry(profile).map_or(0, |e| {
                    e.by_strategy.values().next().map_or(0, |s| s.games)
                }) < games
                {
                    eprintln!("estimating profile {:?} ({games} games)", profile.counts());
                    with_workers(ctx.workers, || game.ensure_estimated(profile, games))?;
                }
            }
        }
        _ => {
            let missing: Vec<Vec<usize>> = required
                .iter()
                .filter(|p| game.entry(p).is_none())
                .map(|p| p.counts().to_vec())
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Incomplete(format!(
                    "no simulation budget given and {} required profiles are missing: {:?}",
                    missing.len(),
                    missing
                )));
            }
        }
    }

    let epsilon = verify_pure_symmetric_nash(&game, candidate)?;
    let bound = epsilon_bound(&game, &base_profile)?;
    let all_candidate_payoff = game
        .payoff(&base_profile, candidate)
        .ok_or_else(|| CliError::Incomplete("missing all-candidate payoff".into()))?;

    let mut bootstrap_rng = SeedStream::new(env.seed).derive(stream::BOOTSTRAP).rng_for(0);
    let bootstrap: BootstrapReport =
        bootstrap_gain(&game, candidate, config.bootstrap_resamples, &mut bootstrap_rng)?;

    let mut clique_reports: Vec<CliqueReport> = Vec::new();
    let mut candidate_mixture_mass: Option<f64> = None;
    for clique in &cliques {
        let surviving = iterated_dominance(&game, clique)?;
        let init = MixedStrategy::uniform_over(clique, roster.len());
        let outcome = replicator_dynamics(
            &game,
            clique,
            &init,
            config.replicator.steps,
            config.replicator.tol,
        )?;
        if clique.contains(&candidate) && candidate_mixture_mass.is_none() {
            candidate_mixture_mass = Some(outcome.mixture.mass_on(candidate));
        }
        clique_reports.push(CliqueReport {
            members: clique.iter().map(|&s| roster.label(s).to_string()).collect(),
            surviving: surviving.iter().map(|&s| roster.label(s).to_string()).collect(),
            replicator: replicator_report(&roster, candidate, &outcome),
        });
    }

    let resolved_config = json!({
        "schema_version": SCHEMA_VERSION,
        "environment": env,
        "candidate": config.candidate,
        "cliques": config.cliques,
        "games": config.games,
        "bootstrap_resamples": config.bootstrap_resamples,
    });
    let mut manifest = ManifestBuilder::new(
        "analyze-game",
        env.seed,
        ctx.workers,
        resolved_config,
        ctx.out_dir,
    )?;

    let analysis = json!({
        "schema_version": SCHEMA_VERSION,
        "candidate": config.candidate,
        "all_candidate_payoff": all_candidate_payoff,
        "epsilon": epsilon,
        "epsilon_bound": bound,
        "pct_gain": bootstrap.raw_pct_gain,
        "adjusted_pct_gain": bootstrap.adjusted_pct_gain,
        "nash_probability": bootstrap.nash_probability,
        "candidate_mixture_mass": candidate_mixture_mass,
        "bootstrap": bootstrap,
        "cliques": clique_reports,
    });
    manifest.write_output(
        "analysis.json",
        &serde_json::to_string_pretty(&analysis).expect("analysis serializes"),
    )?;

    let mixture_cell = candidate_mixture_mass
        .map_or_else(|| "-".to_string(), |m| format!("{m:.3}"));
    let mut text = String::new();
    text.push_str(&format!("candidate profile: all-{}\n", config.candidate));
    text.push_str(&format!("mean payoff of the candidate profile: {all_candidate_payoff:.4}\n"));
    text.push_str(&format!("epsilon (best deviation gain): {epsilon:.4}\n\n"));
    text.push_str("percentage gain from one-player deviation: ");
    text.push_str(&format!("{:.2}\n", bootstrap.raw_pct_gain));
    text.push_str("percentage gain adjusted for sampling error: ");
    text.push_str(&format!("{:.2}\n", bootstrap.adjusted_pct_gain));
    text.push_str("probability the candidate profile is an exact Nash equilibrium: ");
    text.push_str(&format!("{:.3}\n", bootstrap.nash_probability));
    text.push_str("mixed-strategy probability of playing the candidate: ");
    text.push_str(&format!("{mixture_cell}\n"));
    for report in &clique_reports {
        text.push_str(&format!(
            "\nclique {:?}\n  survives iterated dominance: {:?}\n  replicator candidate mass: {:.3} (residual {:.2e})\n",
            report.members,
            report.surviving,
            report.replicator.candidate_mass,
            report.replicator.residual
        ));
    }
    manifest.write_output("analysis.txt", &text)?;
    manifest.write_output("game.json", &game.to_json())?;
    manifest.finish()?;

    print!("{text}");
    Ok(())
}

pub fn cmd_verify(out_dir: &Path) -> Result<(), CliError> {
    let count = crate::manifest::verify_dir(out_dir)?;
    println!("{count} outputs verified");
    Ok(())
}

pub fn cmd_describe_dist(path: &Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Incomplete(format!("{}: {e}", path.display())))?;
    let head = text.trim_start().chars().next();
    let dist = if head == Some('[') {
        MarginalPriceDistribution::from_json(&text)
    } else {
        MarginalPriceDistribution::from_csv(&text)
    }
    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    print!("{}", stats_table(&describe(&dist)));
    Ok(())
}
