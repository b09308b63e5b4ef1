//! Monte Carlo rollout of any policy on large instances, with common random
//! numbers across policies, and mean / standard-error aggregation.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::{sample_instance, ScenarioSpec};
use crate::model::{Instance, JobStatus, ProcessorStatus};
use crate::policies::Policy;
use crate::rng;

/// Stream tags for the two per-replication random sources.
const INSTANCE_STREAM: u64 = 0;
const SERVICE_STREAM: u64 = 1;

/// Outcome of one deterministic rollout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RolloutResult {
    /// Sum of `v_j(completion slot)` over completed jobs.
    pub total_value: f64,
    pub completions: Vec<JobCompletion>,
    /// Fraction of jobs completed no later than their deadline; 1 for an
    /// empty instance.
    pub served_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JobCompletion {
    pub completed: bool,
    pub slot: Option<u32>,
    pub value: f64,
}

/// Plays the policy slot by slot against one fixed realization of service
/// times (`service_draws[j]` is the realized duration of job `j`). The walk
/// ends when every job is done or the slot passes the last deadline of any
/// unfinished job; identical draws give identical results.
pub fn rollout(
    instance: &Instance,
    policy: &dyn Policy,
    service_draws: &[u32],
) -> Result<RolloutResult> {
    if service_draws.len() != instance.num_jobs() {
        return Err(Error::InvalidInstance(format!(
            "expected {} service draws, got {}",
            instance.num_jobs(),
            service_draws.len()
        )));
    }
    for (j, draw) in service_draws.iter().enumerate() {
        if instance.job(j).pmf.prob(*draw) <= 0.0 {
            return Err(Error::InvalidDraw { job: j, draw: *draw });
        }
    }

    let num_jobs = instance.num_jobs();
    let mut state = instance.initial_state();
    let mut completions = vec![
        JobCompletion {
            completed: false,
            slot: None,
            value: 0.0,
        };
        num_jobs
    ];
    // Completion slot of the occupant of each busy processor.
    let mut finish_at: Vec<Option<(usize, u32)>> = vec![None; instance.num_processors()];
    let mut total_value = 0.0;

    loop {
        if state.all_done() {
            break;
        }
        let alive_deadline = state
            .backlog
            .iter()
            .enumerate()
            .filter(|(_, s)| !matches!(s, JobStatus::Done))
            .map(|(j, _)| instance.job(j).decay.deadline())
            .max()
            .expect("some job is not done");
        if state.t > alive_deadline || state.t > instance.horizon() {
            break;
        }

        let action = policy.action(&state, instance);
        action.validate(&state)?;
        for (job, proc) in &action.assignments {
            state.backlog[*job] = JobStatus::InService { start: state.t };
            state.procs[*proc] = ProcessorStatus::Busy { job: *job };
            finish_at[*proc] = Some((*job, state.t + service_draws[*job]));
        }

        let next_t = state.t + 1;
        for proc in 0..instance.num_processors() {
            if let Some((job, finish)) = finish_at[proc] {
                if finish == next_t {
                    let value = instance.job(job).decay.value(finish);
                    total_value += value;
                    completions[job] = JobCompletion {
                        completed: true,
                        slot: Some(finish),
                        value,
                    };
                    state.backlog[job] = JobStatus::Done;
                    state.procs[proc] = ProcessorStatus::Free;
                    finish_at[proc] = None;
                }
            }
        }
        state.t = next_t;
    }

    let served = completions
        .iter()
        .enumerate()
        .filter(|(j, c)| {
            c.completed && c.slot.expect("completed") <= instance.job(*j).decay.deadline()
        })
        .count();
    let served_fraction = if num_jobs == 0 {
        1.0
    } else {
        served as f64 / num_jobs as f64
    };
    Ok(RolloutResult {
        total_value,
        completions,
        served_fraction,
    })
}

/// Sample mean and standard error of a replication set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample standard deviation over sqrt(n); 0 when n = 1.
    pub std_error: f64,
}

impl McStats {
    /// Aggregates with pairwise summation so the result is independent of
    /// accumulation order.
    pub fn from_values(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 1, "need at least one replication");
        let mean = pairwise_sum(values) / n as f64;
        if n == 1 {
            return Self {
                n,
                mean,
                std_error: 0.0,
            };
        }
        let squares: Vec<f64> = values.iter().map(|x| (x - mean) * (x - mean)).collect();
        let variance = pairwise_sum(&squares) / (n - 1) as f64;
        Self {
            n,
            mean,
            std_error: (variance / n as f64).sqrt(),
        }
    }
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Per-policy aggregate of a Monte Carlo run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyMcResult {
    pub policy: String,
    pub value: McStats,
    pub served_fraction: McStats,
}

/// Draws the realized service time of every job, one independent stream per
/// `(replication, job)` pair so the draws cannot depend on scheduling order.
pub fn draw_services(instance: &Instance, master: u64, replication: u64) -> Vec<u32> {
    (0..instance.num_jobs())
        .map(|j| {
            let u: f64 = rng::stream(master, &[SERVICE_STREAM, replication, j as u64]).random();
            instance.job(j).pmf.quantile(u)
        })
        .collect()
}

/// Samples the instance of one replication.
pub fn draw_instance(spec: &ScenarioSpec, master: u64, replication: u64) -> Result<Instance> {
    sample_instance(spec, &mut rng::stream(master, &[INSTANCE_STREAM, replication]))
}

/// Runs `reps` replications of every policy under common random numbers: the
/// instance and the service draws of a replication are shared by all
/// policies, so changing the policy list cannot change any policy's
/// statistics. Replications run in parallel; aggregation is order-independent.
pub fn monte_carlo(
    spec: &ScenarioSpec,
    policies: &[&dyn Policy],
    reps: usize,
    seed: u64,
) -> Result<Vec<PolicyMcResult>> {
    if reps == 0 {
        return Err(Error::InvalidScenario("need at least one replication".into()));
    }
    spec.validate()?;
    let per_rep: Vec<Vec<(f64, f64)>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<(f64, f64)>> {
            let instance = draw_instance(spec, seed, r)?;
            let draws = draw_services(&instance, seed, r);
            policies
                .iter()
                .map(|policy| {
                    let result = rollout(&instance, *policy, &draws)?;
                    Ok((result.total_value, result.served_fraction))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(policies
        .iter()
        .enumerate()
        .map(|(i, policy)| {
            let values: Vec<f64> = per_rep.iter().map(|rep| rep[i].0).collect();
            let served: Vec<f64> = per_rep.iter().map(|rep| rep[i].1).collect();
            PolicyMcResult {
                policy: policy.name().to_string(),
                value: McStats::from_values(&values),
                served_fraction: McStats::from_values(&served),
            }
        })
        .collect())
}

/// Estimate of the per-instance optimality ratio `V* / V^pi`, averaged over
/// replications (the ratio is averaged, not the values).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub policy: String,
    /// Statistics over the replications with a positive policy value.
    pub stats: McStats,
    /// Replications where the policy collected nothing but the optimum was
    /// positive; excluded from `stats`.
    pub zero_value_reps: usize,
}

/// Per replication: samples an instance, solves it exactly, evaluates every
/// policy exactly, and records the ratios. Requires specs small enough for
/// the exact solver.
pub fn estimate_alpha_multi(
    spec: &ScenarioSpec,
    policies: &[&dyn Policy],
    reps: usize,
    seed: u64,
) -> Result<Vec<AlphaEstimate>> {
    if reps == 0 {
        return Err(Error::InvalidScenario("need at least one replication".into()));
    }
    spec.validate()?;
    let per_rep: Vec<Vec<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let instance = draw_instance(spec, seed, r)?;
            let optimal = crate::dp::solve_optimal(&instance)?.optimal_value;
            policies
                .iter()
                .map(|policy| {
                    let v = crate::dp::evaluate_policy_exact(&instance, *policy)?;
                    Ok(crate::dp::ratio_of(optimal, v))
                })
                .collect()
        })
        .collect::<Result<_>>()?;

    Ok(policies
        .iter()
        .enumerate()
        .map(|(i, policy)| {
            let finite: Vec<f64> = per_rep
                .iter()
                .map(|rep| rep[i])
                .filter(|x| x.is_finite())
                .collect();
            let zero_value_reps = reps - finite.len();
            let stats = if finite.is_empty() {
                McStats {
                    n: 0,
                    mean: f64::NAN,
                    std_error: f64::NAN,
                }
            } else {
                McStats::from_values(&finite)
            };
            AlphaEstimate {
                policy: policy.name().to_string(),
                stats,
                zero_value_reps,
            }
        })
        .collect())
}

pub fn estimate_alpha(
    spec: &ScenarioSpec,
    policy: &dyn Policy,
    reps: usize,
    seed: u64,
) -> Result<AlphaEstimate> {
    Ok(estimate_alpha_multi(spec, &[policy], reps, seed)?
        .into_iter()
        .next()
        .expect("one policy in, one estimate out"))
}

/// Column layout used by every CSV this crate emits for Monte Carlo runs.
pub const MC_CSV_HEADER: &str =
    "scenario,policy,J,N,T,reps,mean,std_error,served_fraction_mean,served_fraction_se,seed";

pub fn mc_csv_row(scenario: &str, spec: &ScenarioSpec, result: &PolicyMcResult, seed: u64) -> String {
    format!(
        "{scenario},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{seed}",
        result.policy,
        spec.jobs,
        spec.processors,
        spec.horizon,
        result.value.n,
        result.value.mean,
        result.value.std_error,
        result.served_fraction.mean,
        result.served_fraction.std_error,
    )
}
