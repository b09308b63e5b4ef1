//! Exact finite-horizon solver: optimal value, an optimal policy table, and
//! exact expected-value evaluation of any deterministic policy, via memoized
//! backward recursion over the reachable state space.
//!
//! Values follow the Bellman form in which an action is credited with the
//! full expected completion reward `E[v_j(t + sigma_j)]` of every job it
//! schedules; completions themselves then carry no further reward. At any
//! state with no job in service (in particular the initial state) this equals
//! the expected total collected value.
//!
//! States are memoized up to processor relabeling: processors are identical,
//! so a state is determined by the slot, the set of unstarted jobs, and the
//! multiset of (job, age) pairs in service.

use std::collections::HashMap;

use serde_json::json;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::model::{
    expected_completion_reward, Instance, JobStatus, ProcessorStatus, ScheduleAction, SystemState,
};
use crate::policies::Policy;

/// Solver limits.
#[derive(Debug, Clone, Copy)]
pub struct SolveConfig {
    /// Hard cap on distinct canonical states; exceeding it aborts the solve.
    pub state_budget: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            state_budget: 5_000_000,
        }
    }
}

/// The exact solver supports at most this many jobs (states are keyed on a
/// 64-bit job set).
pub const MAX_EXACT_JOBS: usize = 64;

type InService = SmallVec<[(u8, u32); 4]>;

/// Memoization key: a [`SystemState`] equivalence class under processor
/// relabeling. `Done` jobs are implied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalState {
    pub t: u32,
    /// Bit `j` set iff job `j` has not begun processing.
    not_started: u64,
    /// `(job, age)` pairs in service, ascending by job id.
    in_service: InService,
}

impl CanonicalState {
    pub fn from_state(state: &SystemState) -> Self {
        let mut not_started = 0u64;
        let mut in_service = InService::new();
        for (j, status) in state.backlog.iter().enumerate() {
            match status {
                JobStatus::NotStarted => not_started |= 1 << j,
                JobStatus::InService { start } => {
                    in_service.push((j as u8, state.t - start));
                }
                JobStatus::Done => {}
            }
        }
        in_service.sort_unstable();
        Self {
            t: state.t,
            not_started,
            in_service,
        }
    }

    /// The canonical concrete representative: in-service jobs occupy the
    /// lowest-indexed processors in ascending job order.
    pub fn to_state(&self, instance: &Instance) -> SystemState {
        let mut backlog = vec![JobStatus::Done; instance.num_jobs()];
        let mut procs = vec![ProcessorStatus::Free; instance.num_processors()];
        for j in 0..instance.num_jobs() {
            if self.not_started & (1 << j) != 0 {
                backlog[j] = JobStatus::NotStarted;
            }
        }
        for (n, (job, age)) in self.in_service.iter().enumerate() {
            backlog[*job as usize] = JobStatus::InService {
                start: self.t - age,
            };
            procs[n] = ProcessorStatus::Busy { job: *job as usize };
        }
        SystemState {
            t: self.t,
            backlog,
            procs,
        }
    }

    pub fn not_started_ids(&self) -> Vec<usize> {
        (0..64).filter(|j| self.not_started & (1 << j) != 0).collect()
    }

    pub fn in_service_pairs(&self) -> &[(u8, u32)] {
        &self.in_service
    }
}

/// Output of [`solve_optimal`].
#[derive(Debug, Clone)]
pub struct SolveResult {
    /// `V*` at the solved-from state.
    pub optimal_value: f64,
    /// Chosen action per expanded state, on the canonical representative's
    /// processor labeling.
    pub policy_table: HashMap<CanonicalState, ScheduleAction>,
    /// `V*` per visited state.
    pub values: HashMap<CanonicalState, f64>,
    pub states_visited: usize,
}

impl SolveResult {
    /// Debug dump of the value and policy tables, deterministically ordered.
    pub fn to_json(&self) -> serde_json::Value {
        let mut states: Vec<&CanonicalState> = self.values.keys().collect();
        states.sort();
        let entries: Vec<serde_json::Value> = states
            .into_iter()
            .map(|c| {
                json!({
                    "t": c.t,
                    "not_started": c.not_started_ids(),
                    "in_service": c.in_service_pairs(),
                    "value": self.values[c],
                    "action": self.policy_table.get(c).map(|a| &a.assignments),
                })
            })
            .collect();
        json!({
            "optimal_value": self.optimal_value,
            "states_visited": self.states_visited,
            "states": entries,
        })
    }
}

/// Precomputed per-instance tables shared by the solver and the evaluator.
struct Core<'a> {
    instance: &'a Instance,
    /// `ecr[j][t]` = expected completion reward of scheduling `j` at `t`,
    /// for `t <= max deadline` (zero beyond).
    ecr: Vec<Vec<f64>>,
    /// `hazards[j][age]` = P(sigma = age + 1 | sigma >= age + 1), defined for
    /// every age a surviving job can reach.
    hazards: Vec<Vec<f64>>,
    budget: usize,
}

impl<'a> Core<'a> {
    fn new(instance: &'a Instance, config: &SolveConfig) -> Result<Self> {
        if instance.num_jobs() > MAX_EXACT_JOBS {
            return Err(Error::InvalidInstance(format!(
                "exact solver supports at most {MAX_EXACT_JOBS} jobs, got {}",
                instance.num_jobs()
            )));
        }
        let max_deadline = instance.max_deadline();
        let ecr = instance
            .jobs()
            .iter()
            .map(|job| {
                (0..=max_deadline)
                    .map(|t| expected_completion_reward(job, t))
                    .collect()
            })
            .collect();
        let hazards = instance
            .jobs()
            .iter()
            .map(|job| {
                // Tail sums built back to front so the hazard at the last
                // positive-support age is exactly 1 and no branch survives
                // past the support.
                let probs = job.pmf.probs();
                let mut tail = vec![0.0; probs.len() + 1];
                for k in (0..probs.len()).rev() {
                    tail[k] = tail[k + 1] + probs[k];
                }
                let mut table = Vec::new();
                for age in 0..probs.len() {
                    if tail[age] <= 0.0 {
                        break;
                    }
                    table.push((probs[age] / tail[age]).min(1.0));
                }
                table
            })
            .collect();
        Ok(Self {
            instance,
            ecr,
            hazards,
            budget: config.state_budget,
        })
    }

    fn ecr_at(&self, job: usize, t: u32) -> f64 {
        self.ecr[job]
            .get(t as usize)
            .copied()
            .unwrap_or(0.0)
    }

    /// No further reward is attainable: nothing left to schedule, or every
    /// unstarted job's deadline has passed.
    fn is_cut(&self, c: &CanonicalState) -> bool {
        if c.not_started == 0 {
            return true;
        }
        let max_deadline = (0..self.instance.num_jobs())
            .filter(|j| c.not_started & (1 << j) != 0)
            .map(|j| self.instance.job(j).decay.deadline())
            .max()
            .expect("non-empty set");
        c.t > max_deadline
    }

    /// Job subsets eligible as actions: all size-`min{K, M}` subsets of the
    /// unstarted jobs, in lexicographic order.
    fn action_sets(&self, c: &CanonicalState) -> Vec<Vec<u8>> {
        let candidates: Vec<u8> = (0..self.instance.num_jobs() as u8)
            .filter(|j| c.not_started & (1 << j) != 0)
            .collect();
        let free = self.instance.num_processors() - c.in_service.len();
        let take = candidates.len().min(free);
        if take == 0 {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        let mut subset = Vec::with_capacity(take);
        fn rec(cands: &[u8], start: usize, take: usize, subset: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
            if subset.len() == take {
                out.push(subset.clone());
                return;
            }
            let remaining = take - subset.len();
            for i in start..=cands.len() - remaining {
                subset.push(cands[i]);
                rec(cands, i + 1, take, subset, out);
                subset.pop();
            }
        }
        rec(&candidates, 0, take, &mut subset, &mut out);
        out
    }

    /// Expected value of scheduling `jobs` in state `c`: the immediate
    /// expected completion rewards plus the probability-weighted child
    /// values over every completion subset of the busy processors.
    fn action_value<F>(&self, c: &CanonicalState, jobs: &[u8], child: &mut F) -> Result<f64>
    where
        F: FnMut(CanonicalState) -> Result<f64>,
    {
        let immediate: f64 = jobs.iter().map(|j| self.ecr_at(*j as usize, c.t)).sum();

        // Busy list sorted by job id: existing in-service jobs merged with
        // the freshly scheduled ones at age zero.
        let mut busy: SmallVec<[(u8, u32); 8]> = SmallVec::from_slice(&c.in_service);
        busy.extend(jobs.iter().map(|j| (*j, 0u32)));
        busy.sort_unstable();

        let mut scheduled_mask = 0u64;
        for j in jobs {
            scheduled_mask |= 1 << j;
        }
        let base_not_started = c.not_started & !scheduled_mask;

        let mut total = immediate;
        for mask in 0..(1u32 << busy.len()) {
            let mut prob = 1.0;
            for (i, (job, age)) in busy.iter().enumerate() {
                let h = self.hazards[*job as usize][*age as usize];
                prob *= if mask & (1 << i) != 0 { h } else { 1.0 - h };
                if prob <= 0.0 {
                    break;
                }
            }
            if prob <= 0.0 {
                continue;
            }
            let mut in_service = InService::new();
            for (i, (job, age)) in busy.iter().enumerate() {
                if mask & (1 << i) == 0 {
                    in_service.push((*job, age + 1));
                }
            }
            let next = CanonicalState {
                t: c.t + 1,
                not_started: base_not_started,
                in_service,
            };
            total += prob * child(next)?;
        }
        Ok(total)
    }
}

fn v_star(
    core: &Core,
    memo: &mut HashMap<CanonicalState, f64>,
    table: &mut HashMap<CanonicalState, ScheduleAction>,
    c: CanonicalState,
) -> Result<f64> {
    if let Some(v) = memo.get(&c) {
        return Ok(*v);
    }
    if memo.len() >= core.budget {
        return Err(Error::StateBudgetExceeded {
            budget: core.budget,
        });
    }
    let value = if core.is_cut(&c) {
        0.0
    } else {
        let mut best = f64::NEG_INFINITY;
        let mut best_set = None;
        for jobs in core.action_sets(&c) {
            let v = core.action_value(&c, &jobs, &mut |next| v_star(core, memo, table, next))?;
            // Strict improvement keeps the lexicographically first argmax.
            if v > best {
                best = v;
                best_set = Some(jobs);
            }
        }
        let jobs = best_set.expect("at least the empty action");
        let first_free = c.in_service.len();
        let free: Vec<usize> = (first_free..core.instance.num_processors()).collect();
        let action = ScheduleAction::pair_in_order(jobs.iter().map(|j| *j as usize).collect(), &free);
        table.insert(c.clone(), action);
        best
    };
    memo.insert(c, value);
    Ok(value)
}

fn v_policy(
    core: &Core,
    memo: &mut HashMap<CanonicalState, f64>,
    policy: &dyn Policy,
    c: CanonicalState,
) -> Result<f64> {
    if let Some(v) = memo.get(&c) {
        return Ok(*v);
    }
    if memo.len() >= core.budget {
        return Err(Error::StateBudgetExceeded {
            budget: core.budget,
        });
    }
    let value = if core.is_cut(&c) {
        0.0
    } else {
        let state = c.to_state(core.instance);
        let action = policy.action(&state, core.instance);
        action.validate(&state)?;
        let jobs: Vec<u8> = action.jobs().map(|j| j as u8).collect();
        core.action_value(&c, &jobs, &mut |next| v_policy(core, memo, policy, next))?
    };
    memo.insert(c, value);
    Ok(value)
}

/// Solves for `V*` from the initial state under the default budget.
pub fn solve_optimal(instance: &Instance) -> Result<SolveResult> {
    solve_optimal_with(instance, &SolveConfig::default())
}

pub fn solve_optimal_with(instance: &Instance, config: &SolveConfig) -> Result<SolveResult> {
    solve_optimal_from(instance, &instance.initial_state(), config)
}

/// Solves for `V*` from an arbitrary valid state.
pub fn solve_optimal_from(
    instance: &Instance,
    state: &SystemState,
    config: &SolveConfig,
) -> Result<SolveResult> {
    let core = Core::new(instance, config)?;
    let mut memo = HashMap::new();
    let mut table = HashMap::new();
    let optimal_value = v_star(&core, &mut memo, &mut table, CanonicalState::from_state(state))?;
    Ok(SolveResult {
        optimal_value,
        policy_table: table,
        states_visited: memo.len(),
        values: memo,
    })
}

/// Exact expected value of a deterministic policy from the initial state.
pub fn evaluate_policy_exact(instance: &Instance, policy: &dyn Policy) -> Result<f64> {
    evaluate_policy_exact_from(
        instance,
        policy,
        &instance.initial_state(),
        &SolveConfig::default(),
    )
}

pub fn evaluate_policy_exact_from(
    instance: &Instance,
    policy: &dyn Policy,
    state: &SystemState,
    config: &SolveConfig,
) -> Result<f64> {
    let core = Core::new(instance, config)?;
    let mut memo = HashMap::new();
    v_policy(&core, &mut memo, policy, CanonicalState::from_state(state))
}

/// Values below this are treated as zero when forming ratios.
pub const VALUE_ZERO_TOL: f64 = 1e-12;

/// `V* / V^pi` convention: 1 when both values vanish, infinity when only the
/// policy value does.
pub fn ratio_of(v_star: f64, v_policy: f64) -> f64 {
    if v_policy <= VALUE_ZERO_TOL {
        if v_star <= VALUE_ZERO_TOL {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        v_star / v_policy
    }
}

/// Ratio of the optimal value to the policy's value at the initial state.
/// Returns an infinity sentinel when the policy collects nothing but the
/// optimum is positive.
pub fn value_ratio(instance: &Instance, policy: &dyn Policy) -> Result<f64> {
    let v_opt = solve_optimal(instance)?.optimal_value;
    let v_pi = evaluate_policy_exact(instance, policy)?;
    Ok(ratio_of(v_opt, v_pi))
}

/// Largest absolute difference between each stored value and a one-step
/// recomputation of the max over actions from the stored child values.
pub fn bellman_residual(instance: &Instance, result: &SolveResult) -> Result<f64> {
    let core = Core::new(instance, &SolveConfig::default())?;
    let mut worst = 0.0f64;
    for (c, stored) in &result.values {
        let recomputed = if core.is_cut(c) {
            0.0
        } else {
            let mut best = f64::NEG_INFINITY;
            for jobs in core.action_sets(c) {
                let v = core.action_value(c, &jobs, &mut |next| {
                    Ok(*result
                        .values
                        .get(&next)
                        .expect("child of an expanded state must be stored"))
                })?;
                best = best.max(v);
            }
            best
        };
        worst = worst.max((stored - recomputed).abs());
    }
    Ok(worst)
}

/// Wraps a solved policy table as a reusable [`Policy`]. States outside the
/// table (unreachable under optimal play) fall back to the greedy action.
pub struct TablePolicy {
    table: HashMap<CanonicalState, ScheduleAction>,
}

impl TablePolicy {
    pub fn new(result: &SolveResult) -> Self {
        Self {
            table: result.policy_table.clone(),
        }
    }
}

impl Policy for TablePolicy {
    fn name(&self) -> &str {
        "optimal"
    }

    fn action(&self, state: &SystemState, instance: &Instance) -> ScheduleAction {
        let canonical = CanonicalState::from_state(state);
        match self.table.get(&canonical) {
            Some(action) => {
                let jobs: Vec<usize> = action.jobs().collect();
                ScheduleAction::pair_in_order(jobs, &state.free_processors())
            }
            None => crate::policies::Greedy.action(state, instance),
        }
    }
}
