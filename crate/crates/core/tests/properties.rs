//! Randomized invariant sweeps across the model, solver, policies, bounds,
//! and simulator, plus proptest checks of the generator families.

mod common;

use common::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sched_core::bounds::{compute_bounds, BoundsMethod};
use sched_core::dp::{
    bellman_residual, evaluate_policy_exact, evaluate_policy_exact_from, solve_optimal,
    solve_optimal_from, SolveConfig,
};
use sched_core::generators::{
    gen_piecewise_linear_decay, make_bathtub_pmf, make_decreasing_pmf, make_increasing_pmf,
    make_uniform_pmf,
};
use sched_core::model::{enumerate_actions, expected_completion_reward, transition};
use sched_core::policies::all_heuristics;
use sched_core::simulator::{draw_services, rollout, McStats};
use sched_core::{
    DecayFunction, DecayKind, EarliestDeadlineFirst, Greedy, Instance, Job, Policy, RateGreedy,
};

const SEED: u64 = 0x5EED;

#[test]
fn transition_probabilities_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for _ in 0..1000 {
        let instance = random_small_instance(&mut rng, 5, 3, 5);
        let state = random_reachable_state(&instance, &mut rng, 3);
        let actions = enumerate_actions(&state, &instance);
        let action = &actions[rng.random_range(0..actions.len())];
        let outcomes = transition(&state, action, &instance).unwrap();
        let total: f64 = outcomes.iter().map(|o| o.probability).sum();
        assert!(
            (total - 1.0).abs() <= 1e-12,
            "outcome probabilities sum to {total}"
        );
        for outcome in &outcomes {
            assert!(outcome.probability > 0.0, "zero-probability branch kept");
            assert!(outcome.reward >= 0.0);
            assert!(outcome.next_state.is_consistent());
            assert_eq!(outcome.next_state.t, state.t + 1);
        }
    }
}

#[test]
fn rollout_value_equals_sum_of_completion_values() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 1);
    let heuristics = all_heuristics();
    for i in 0..300 {
        let instance = random_small_instance(&mut rng, 6, 3, 6);
        let draws: Vec<u32> = (0..instance.num_jobs())
            .map(|j| instance.job(j).pmf.quantile(rng.random()))
            .collect();
        let policy = &heuristics[i % heuristics.len()];
        let result = rollout(&instance, policy.as_ref(), &draws).unwrap();
        let recomputed: f64 = result
            .completions
            .iter()
            .enumerate()
            .filter(|(_, c)| c.completed)
            .map(|(j, c)| instance.job(j).decay.value(c.slot.unwrap()))
            .sum();
        assert!((result.total_value - recomputed).abs() <= 1e-12);
        assert!(result.total_value >= 0.0);
        assert!((0.0..=1.0).contains(&result.served_fraction));
    }
}

#[test]
fn non_idling_restriction_is_lossless() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    for _ in 0..50 {
        let instance = random_small_instance(&mut rng, 4, 2, 4);
        let full = full_action_space_value(&instance);
        let maximal = solve_optimal(&instance).unwrap().optimal_value;
        assert!(
            (full - maximal).abs() <= 1e-9,
            "full {full} vs maximal {maximal}"
        );
    }
}

#[test]
fn optimal_dominates_heuristics() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 3);
    let heuristics = all_heuristics();
    for _ in 0..200 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let optimal = solve_optimal(&instance).unwrap().optimal_value;
        for policy in &heuristics {
            let v = evaluate_policy_exact(&instance, policy.as_ref()).unwrap();
            assert!(
                optimal >= v - 1e-9,
                "{}: {v} exceeds optimal {optimal}",
                policy.name()
            );
        }
    }
}

#[test]
fn completing_a_job_for_free_never_hurts() {
    // Marking an unstarted job done can only reduce the optimal value.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let config = SolveConfig::default();
    let mut tested = 0;
    while tested < 100 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let state = random_reachable_state(&instance, &mut rng, 2);
        let unstarted = state.not_started();
        if unstarted.is_empty() {
            continue;
        }
        let job = unstarted[rng.random_range(0..unstarted.len())];
        let surgery = with_job_done(&state, job);
        let before = solve_optimal_from(&instance, &state, &config)
            .unwrap()
            .optimal_value;
        let after = solve_optimal_from(&instance, &surgery, &config)
            .unwrap()
            .optimal_value;
        assert!(
            before >= after - 1e-9,
            "dropping job {job} raised the value: {before} -> {after}"
        );
        tested += 1;
    }
}

#[test]
fn virtual_completion_bounds_the_optimum() {
    // V*(s) <= E[v_j(t + sigma_j)] + V*(s with j done) for unstarted j.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let config = SolveConfig::default();
    let mut tested = 0;
    while tested < 100 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let state = random_reachable_state(&instance, &mut rng, 2);
        if state.not_started().is_empty() {
            continue;
        }
        let value = solve_optimal_from(&instance, &state, &config)
            .unwrap()
            .optimal_value;
        for job in state.not_started() {
            let surgery = with_job_done(&state, job);
            let rest = solve_optimal_from(&instance, &surgery, &config)
                .unwrap()
                .optimal_value;
            let reward = expected_completion_reward(instance.job(job), state.t);
            assert!(
                value <= reward + rest + 1e-9,
                "virtual completion of {job}: {value} > {reward} + {rest}"
            );
        }
        tested += 1;
    }
}

#[test]
fn brute_force_sequences_match_solver_on_deterministic_instances() {
    // One processor and deterministic service times: the optimum is the best
    // of the J! schedules, each evaluated in closed form.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 6);
    for _ in 0..50 {
        let jobs: Vec<Job> = (0..rng.random_range(1..=3usize))
            .map(|id| {
                let duration = rng.random_range(1..=4u32);
                let b: f64 = rng.random();
                let c = rng.random_range(1..=6u32);
                let decay = match rng.random_range(0..3) {
                    0 => DecayFunction::step(b, c).unwrap(),
                    1 => DecayFunction::linear(b, c).unwrap(),
                    _ => DecayFunction::exponential(b, c).unwrap(),
                };
                Job::new(id, sched_core::Pmf::deterministic(duration).unwrap(), decay)
            })
            .collect();
        let horizon = jobs.iter().map(|j| j.decay.deadline()).max().unwrap() + 1;
        let durations: Vec<u32> = jobs.iter().map(|j| j.pmf.support()[0]).collect();
        let instance = Instance::new(jobs, 1, horizon).unwrap();

        let mut best = 0.0f64;
        permute(&mut (0..instance.num_jobs()).collect::<Vec<_>>(), 0, &mut |order| {
            let mut t = 0;
            let mut total = 0.0;
            for &j in order {
                t += durations[j];
                total += instance.job(j).decay.value(t);
            }
            best = best.max(total);
        });

        let solved = solve_optimal(&instance).unwrap().optimal_value;
        assert!(
            (best - solved).abs() <= 1e-9,
            "sequence oracle {best} vs solver {solved}"
        );
    }
}

fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[test]
fn stored_values_satisfy_bellman_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 7);
    for _ in 0..30 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let result = solve_optimal(&instance).unwrap();
        let residual = bellman_residual(&instance, &result).unwrap();
        assert!(residual <= 1e-9, "residual {residual}");
    }
}

fn scale_decay(decay: &DecayFunction, factor: f64) -> DecayFunction {
    let kind = match decay.kind().clone() {
        DecayKind::Step { initial, deadline } => DecayKind::Step {
            initial: initial * factor,
            deadline,
        },
        DecayKind::Linear { initial, deadline } => DecayKind::Linear {
            initial: initial * factor,
            deadline,
        },
        DecayKind::Exponential { initial, deadline } => DecayKind::Exponential {
            initial: initial * factor,
            deadline,
        },
        DecayKind::PiecewiseLinear { breakpoints } => DecayKind::PiecewiseLinear {
            breakpoints: breakpoints.into_iter().map(|(t, v)| (t, v * factor)).collect(),
        },
    };
    DecayFunction::new(kind).unwrap()
}

#[test]
fn greedy_choices_are_scale_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 8);
    for _ in 0..100 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let state = random_reachable_state(&instance, &mut rng, 2);
        for factor in [0.37, 5.0] {
            let scaled_jobs: Vec<Job> = instance
                .jobs()
                .iter()
                .map(|j| Job::new(j.id, j.pmf.clone(), scale_decay(&j.decay, factor)))
                .collect();
            let scaled = Instance::new(
                scaled_jobs,
                instance.num_processors(),
                instance.horizon(),
            )
            .unwrap();
            for policy in [&Greedy as &dyn Policy, &RateGreedy] {
                let original: Vec<usize> = policy.action(&state, &instance).jobs().collect();
                let rescaled: Vec<usize> = policy.action(&state, &scaled).jobs().collect();
                assert_eq!(original, rescaled, "{} changed under scaling", policy.name());
            }
        }
    }
}

#[test]
fn edf_ignores_service_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 9);
    for _ in 0..100 {
        let instance = random_small_instance(&mut rng, 5, 2, 5);
        let state = random_reachable_state(&instance, &mut rng, 2);
        let repmf_jobs: Vec<Job> = instance
            .jobs()
            .iter()
            .map(|j| {
                let fresh = make_uniform_pmf(rng.random_range(0.2..=1.0), 7).unwrap();
                Job::new(j.id, fresh, j.decay.clone())
            })
            .collect();
        let repmf = Instance::new(repmf_jobs, instance.num_processors(), instance.horizon()).unwrap();
        let a: Vec<usize> = EarliestDeadlineFirst.action(&state, &instance).jobs().collect();
        let b: Vec<usize> = EarliestDeadlineFirst.action(&state, &repmf).jobs().collect();
        assert_eq!(a, b);
    }
}

#[test]
fn identical_expected_durations_align_rate_greedy_with_greedy() {
    // With IID service times the two greedy policies coincide.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 10);
    let mut tested = 0;
    while tested < 1000 {
        let spec = {
            let mut s = random_spec(&mut rng, 5, 2, 5);
            s.a = sched_core::AMode::FixedOne;
            if matches!(s.pmf, sched_core::PmfMode::Heterogeneous) {
                s.pmf = sched_core::PmfMode::Fixed {
                    kind: sched_core::PmfKind::Uniform,
                };
            }
            s
        };
        let instance = sched_core::generators::sample_instance(&spec, &mut rng).unwrap();
        let state = random_reachable_state(&instance, &mut rng, 2);
        if state.not_started().is_empty() {
            continue;
        }
        let g: Vec<usize> = Greedy.action(&state, &instance).jobs().collect();
        let rg: Vec<usize> = RateGreedy.action(&state, &instance).jobs().collect();
        assert_eq!(g, rg);
        tested += 1;
    }
}

#[test]
fn bound_report_invariants_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 11);
    let mut checked = 0;
    while checked < 100 {
        let instance = random_small_instance(&mut rng, 4, 2, 5);
        let report = match compute_bounds(&instance, BoundsMethod::exact()) {
            Ok(report) => report,
            // Valueless draws (all-zero rewards) are legitimately rejected.
            Err(sched_core::Error::ValuelessInstance) => continue,
            Err(other) => panic!("unexpected error: {other}"),
        };
        assert!(report.greedy_alpha >= report.rate_greedy_alpha - 1e-9);
        assert!(report.rate_greedy_alpha >= 3.0 - 1e-9);
        if let Some(edf_alpha) = report.edf_alpha {
            assert!(edf_alpha >= 2.0 - 1e-9);
        }
        // The Monte Carlo route agrees with the exhaustive one.
        if checked % 10 == 0 {
            let mc = compute_bounds(&instance, BoundsMethod::monte_carlo(SEED + checked as u64))
                .unwrap();
            let se = mc.sigma_ratio_se.unwrap().max(1e-4);
            assert!(
                (mc.sigma_ratio - report.sigma_ratio).abs() <= 4.0 * se,
                "MC {} vs exact {}",
                mc.sigma_ratio,
                report.sigma_ratio
            );
        }
        checked += 1;
    }
}

#[test]
fn monte_carlo_rollouts_track_exact_policy_values() {
    // 100 repeated checks, each comparing a 2000-rep Monte Carlo mean on a
    // fixed instance against the exact policy value; at least 99 must land
    // within four standard errors.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 12);
    let heuristics = all_heuristics();
    let mut passes = 0;
    for i in 0..100 {
        let instance = random_small_instance(&mut rng, 4, 2, 4);
        let policy = heuristics[i % heuristics.len()].as_ref();
        let exact = evaluate_policy_exact(&instance, policy).unwrap();
        let master = rng.random::<u64>();
        let values: Vec<f64> = (0..2000u64)
            .map(|r| {
                let draws = draw_services(&instance, master, r);
                rollout(&instance, policy, &draws).unwrap().total_value
            })
            .collect();
        let stats = McStats::from_values(&values);
        // Absolute floor: on a degenerate value distribution the sample SE
        // is float residue and the comparison is exact equality.
        if (stats.mean - exact).abs() <= (4.0 * stats.std_error).max(1e-9) {
            passes += 1;
        }
    }
    assert!(passes >= 99, "only {passes}/100 within 4 SE");
}

#[test]
fn policy_evaluation_agrees_from_mid_rollout_states() {
    // Exact evaluation started from a reachable mid-rollout state matches a
    // fresh conditional enumeration via the full transition mechanics.
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 13);
    let config = SolveConfig::default();
    for _ in 0..50 {
        let instance = random_small_instance(&mut rng, 4, 2, 4);
        let state = random_reachable_state(&instance, &mut rng, 2);
        let v = evaluate_policy_exact_from(&instance, &Greedy, &state, &config).unwrap();
        assert!(v >= -1e-12);
        let optimal = solve_optimal_from(&instance, &state, &config).unwrap().optimal_value;
        assert!(optimal >= v - 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn generated_pmfs_normalize(kind in 0..4usize, a in 0.0f64..=1.0, slots in 1u32..40) {
        let pmf = match kind {
            0 => make_uniform_pmf(a.max(0.01), slots),
            1 => make_decreasing_pmf(a.max(0.01), slots),
            2 => make_increasing_pmf(a, slots),
            _ => make_bathtub_pmf(a, slots),
        }.unwrap();
        let total: f64 = pmf.probs().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(pmf.probs().iter().all(|p| *p >= 0.0));
        prop_assert!(pmf.max_duration() <= slots);
    }

    #[test]
    fn parametric_decays_are_monotone_with_exact_deadlines(
        shape in 0..3usize,
        b in 0.0f64..=1.0,
        c in 1u32..30,
    ) {
        let decay = match shape {
            0 => DecayFunction::step(b, c).unwrap(),
            1 => DecayFunction::linear(b, c).unwrap(),
            _ => DecayFunction::exponential(b, c).unwrap(),
        };
        let mut prev = f64::INFINITY;
        for t in 0..=c + 2 {
            let v = decay.value(t);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= prev);
            prev = v;
        }
        let d = decay.deadline();
        prop_assert_eq!(decay.value(d + 1), 0.0);
        if b > 0.0 {
            prop_assert_eq!(d, c);
            prop_assert!(decay.value(d) > 0.0);
        } else {
            prop_assert_eq!(d, 0);
        }
    }

    #[test]
    fn random_piecewise_decays_are_monotone(seed in 0u64..5000, slots in 3u32..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decay = gen_piecewise_linear_decay(slots, &mut rng).unwrap();
        let mut prev = f64::INFINITY;
        for t in 0..=slots + 1 {
            let v = decay.value(t);
            prop_assert!(v >= 0.0);
            prop_assert!(v <= prev + 1e-12);
            prev = v;
        }
        prop_assert_eq!(decay.value(decay.deadline() + 1), 0.0);
        // Breakpoints sit on the three-slot grid (plus the held endpoint).
        if let DecayKind::PiecewiseLinear { breakpoints } = decay.kind() {
            for (t, _) in &breakpoints[..breakpoints.len() - 1] {
                prop_assert_eq!(t % 3, 0);
            }
        }
    }
}
