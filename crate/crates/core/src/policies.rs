//! The three myopic scheduling policies as pure state-to-action functions,
//! plus the policy interface shared by the simulator and the exact evaluator.

use crate::model::{expected_completion_reward, Instance, ScheduleAction, SystemState};

/// A deterministic scheduling policy. Implementations must return one of the
/// maximal actions of [`enumerate_actions`] and must not depend on processor
/// labels (processors are identical).
pub trait Policy: Send + Sync {
    fn name(&self) -> &str;

    fn action(&self, state: &SystemState, instance: &Instance) -> ScheduleAction;
}

/// Schedules the unstarted jobs with the largest expected completion reward
/// `E[v_j(t + sigma_j)]`; ties broken toward lower job ids.
#[derive(Debug, Clone, Copy, Default)]
pub struct Greedy;

/// Schedules the unstarted jobs with the largest expected reward rate
/// `E[v_j(t + sigma_j)] / E[sigma_j]`; ties broken toward lower job ids.
#[derive(Debug, Clone, Copy, Default)]
pub struct RateGreedy;

/// Earliest deadline first: schedules the unstarted jobs whose deadlines are
/// most imminent and have not yet passed; jobs with passed deadlines come
/// after all others. Ignores the service-time distributions entirely.
#[derive(Debug, Clone, Copy, Default)]
pub struct EarliestDeadlineFirst;

impl Policy for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn action(&self, state: &SystemState, instance: &Instance) -> ScheduleAction {
        score_action(state, instance, |job| {
            expected_completion_reward(instance.job(job), state.t)
        })
    }
}

impl Policy for RateGreedy {
    fn name(&self) -> &str {
        "rate-greedy"
    }

    fn action(&self, state: &SystemState, instance: &Instance) -> ScheduleAction {
        score_action(state, instance, |job| {
            expected_completion_reward(instance.job(job), state.t) / instance.job(job).pmf.mean()
        })
    }
}

impl Policy for EarliestDeadlineFirst {
    fn name(&self) -> &str {
        "edf"
    }

    fn action(&self, state: &SystemState, instance: &Instance) -> ScheduleAction {
        let mut candidates = state.not_started();
        let free = state.free_processors();
        let take = candidates.len().min(free.len());
        if take == 0 {
            return ScheduleAction::empty();
        }
        let t = state.t;
        // Unexpired deadlines ascending first, then expired deadlines
        // ascending; job id breaks ties. Still schedules min{K, M} jobs.
        candidates.sort_by_key(|j| {
            let d = instance.job(*j).decay.deadline();
            (d < t, d, *j)
        });
        ScheduleAction::pair_in_order(candidates[..take].to_vec(), &free)
    }
}

/// Top-`min{K, M}` selection by a per-job score. Per-job scores are additive
/// across an action and processors are identical, so this maximizes the
/// summed score over all maximal actions.
fn score_action<F: Fn(usize) -> f64>(
    state: &SystemState,
    instance: &Instance,
    score: F,
) -> ScheduleAction {
    debug_assert_eq!(state.backlog.len(), instance.num_jobs());
    let candidates = state.not_started();
    let free = state.free_processors();
    let take = candidates.len().min(free.len());
    if take == 0 {
        return ScheduleAction::empty();
    }
    let mut scored: Vec<(f64, usize)> = candidates.into_iter().map(|j| (score(j), j)).collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let chosen = scored[..take].iter().map(|(_, j)| *j).collect();
    ScheduleAction::pair_in_order(chosen, &free)
}

/// Looks a heuristic up by its CLI/config name. Accepts the short aliases
/// `g`, `rg`.
pub fn by_name(name: &str) -> Option<Box<dyn Policy>> {
    match name {
        "greedy" | "g" => Some(Box::new(Greedy)),
        "rate-greedy" | "rg" => Some(Box::new(RateGreedy)),
        "edf" => Some(Box::new(EarliestDeadlineFirst)),
        _ => None,
    }
}

/// The three heuristics in their conventional reporting order.
pub fn all_heuristics() -> Vec<Box<dyn Policy>> {
    vec![
        Box::new(Greedy),
        Box::new(RateGreedy),
        Box::new(EarliestDeadlineFirst),
    ]
}
