//! Helpers shared by the integration test suites: random instance sampling
//! across the generator families and a brute-force full-action-space solver
//! used as an independent oracle.

#![allow(dead_code)]

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use sched_core::generators::{sample_instance, AMode, DecayMode, PmfKind, PmfMode, ScenarioSpec};
use sched_core::model::{enumerate_actions, is_terminal, transition, JobStatus};
use sched_core::{DecayShape, Instance, ScheduleAction, SystemState};

/// Draws a random scenario over the pmf/decay/a generator modes and samples
/// one instance from it.
pub fn random_small_instance(
    rng: &mut ChaCha8Rng,
    max_jobs: usize,
    max_procs: usize,
    max_slots: u32,
) -> Instance {
    let spec = random_spec(rng, max_jobs, max_procs, max_slots);
    sample_instance(&spec, rng).expect("valid spec")
}

pub fn random_spec(
    rng: &mut ChaCha8Rng,
    max_jobs: usize,
    max_procs: usize,
    max_slots: u32,
) -> ScenarioSpec {
    let pmf = match rng.random_range(0..5) {
        0 => PmfMode::Fixed {
            kind: PmfKind::Uniform,
        },
        1 => PmfMode::Fixed {
            kind: PmfKind::Decreasing,
        },
        2 => PmfMode::Fixed {
            kind: PmfKind::Increasing,
        },
        3 => PmfMode::Fixed {
            kind: PmfKind::Bathtub,
        },
        _ => PmfMode::Heterogeneous,
    };
    let decay = match rng.random_range(0..4) {
        0 => DecayMode::Fixed {
            kind: DecayShape::Step,
        },
        1 => DecayMode::Fixed {
            kind: DecayShape::Linear,
        },
        2 => DecayMode::Fixed {
            kind: DecayShape::Exponential,
        },
        _ => DecayMode::Heterogeneous,
    };
    let a = if rng.random_bool(0.5) {
        AMode::FixedOne
    } else {
        AMode::Uniform
    };
    ScenarioSpec {
        jobs: rng.random_range(1..=max_jobs),
        processors: rng.random_range(1..=max_procs),
        horizon: rng.random_range(1..=max_slots),
        pmf,
        decay,
        a,
        seed: 0,
    }
}

/// Walks forward a few slots under random maximal actions and random
/// transition branches, returning a random reachable state.
pub fn random_reachable_state(
    instance: &Instance,
    rng: &mut ChaCha8Rng,
    max_steps: u32,
) -> SystemState {
    let mut state = instance.initial_state();
    let steps = rng.random_range(0..=max_steps);
    for _ in 0..steps {
        if is_terminal(&state, instance) {
            break;
        }
        let actions = enumerate_actions(&state, instance);
        let action = &actions[rng.random_range(0..actions.len())];
        let outcomes = transition(&state, action, instance).expect("legal action");
        // Pick a branch in proportion to its probability.
        let mut u: f64 = rng.random();
        let mut chosen = outcomes.len() - 1;
        for (i, outcome) in outcomes.iter().enumerate() {
            if u < outcome.probability {
                chosen = i;
                break;
            }
            u -= outcome.probability;
        }
        state = outcomes[chosen].next_state.clone();
    }
    state
}

/// Exact value of a state by exhaustive recursion over the FULL action space:
/// every subset of unstarted jobs up to the free-processor count, including
/// partial and idle actions. Rewards are credited at completion, exactly as
/// [`transition`] reports them. Independent of the solver's canonicalization
/// and action restriction.
pub fn full_action_space_value(instance: &Instance) -> f64 {
    let mut memo = HashMap::new();
    full_value(&instance.initial_state(), instance, &mut memo)
}

fn full_value(
    state: &SystemState,
    instance: &Instance,
    memo: &mut HashMap<SystemState, f64>,
) -> f64 {
    if let Some(v) = memo.get(state) {
        return *v;
    }
    let value = if is_terminal(state, instance) {
        0.0
    } else {
        let mut best = f64::NEG_INFINITY;
        for action in all_actions(state) {
            let outcomes = transition(state, &action, instance).expect("legal action");
            let mut total = 0.0;
            for outcome in outcomes {
                total += outcome.probability
                    * (outcome.reward + full_value(&outcome.next_state, instance, memo));
            }
            best = best.max(total);
        }
        best
    };
    memo.insert(state.clone(), value);
    value
}

/// Every schedulable action of a state: all job subsets of every size from
/// empty up to min{K, M}, assigned to free processors in index order.
pub fn all_actions(state: &SystemState) -> Vec<ScheduleAction> {
    let candidates: Vec<usize> = state.not_started();
    let free = state.free_processors();
    let max_take = candidates.len().min(free.len());
    let mut actions = Vec::new();
    for take in 0..=max_take {
        subsets_of(&candidates, take, &mut |subset| {
            actions.push(ScheduleAction::pair_in_order(subset.to_vec(), &free));
        });
    }
    actions
}

fn subsets_of(items: &[usize], take: usize, visit: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], start: usize, take: usize, acc: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if acc.len() == take {
            visit(acc);
            return;
        }
        let remaining = take - acc.len();
        for i in start..=items.len() - remaining {
            acc.push(items[i]);
            rec(items, i + 1, take, acc, visit);
            acc.pop();
        }
    }
    rec(items, 0, take, &mut Vec::new(), visit);
}

/// Marks one unstarted job as done, leaving everything else untouched.
pub fn with_job_done(state: &SystemState, job: usize) -> SystemState {
    assert!(matches!(state.backlog[job], JobStatus::NotStarted));
    let mut surgery = state.clone();
    surgery.backlog[job] = JobStatus::Done;
    surgery
}
