//! Approximation-ratio constants for the three heuristics and verification of
//! the bound inequalities against exact values.
//!
//! For independent service times the greedy policy is a
//! `1 + 2 E[sigma_max / sigma_min]` approximation and the rate-greedy policy a
//! `2 + Delta` approximation with `Delta = E[sigma_max] / min_j E[sigma_j]`.
//! With identically distributed service times both are 2-approximations, EDF
//! is a `1 + M/m` approximation, and under unit-step decay EDF is a
//! `1 + 1/p_min` approximation.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{expected_completion_reward, DecayKind, Instance, Pmf};
use crate::policies::{EarliestDeadlineFirst, Greedy, Policy, RateGreedy};
use crate::rng;

/// How the joint expectation `E[sigma_max / sigma_min]` is computed.
#[derive(Debug, Clone, Copy)]
pub enum BoundsMethod {
    /// Exhaustive sum over the product of the supports.
    Exact { product_budget: u64 },
    /// Monte Carlo with a reported standard error.
    MonteCarlo { draws: usize, seed: u64 },
}

impl BoundsMethod {
    pub fn exact() -> Self {
        BoundsMethod::Exact {
            product_budget: 10_000_000,
        }
    }

    pub fn monte_carlo(seed: u64) -> Self {
        BoundsMethod::MonteCarlo {
            draws: 100_000,
            seed,
        }
    }
}

/// The performance-guarantee constants of one instance.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    /// Whether all service-time distributions are equal (within 1e-12).
    pub iid: bool,
    /// `1 + 2 E[sigma_max / sigma_min]`.
    pub greedy_alpha: f64,
    /// `2 + Delta`.
    pub rate_greedy_alpha: f64,
    /// `1 + M/m`; only valid (and only present) for IID service times.
    pub edf_alpha: Option<f64>,
    /// `1 + 1/p_min`; present for IID service times with step decay of one
    /// common initial value, the premise under which it is proved.
    pub edf_step_alpha: Option<f64>,
    /// `E[sigma_max / sigma_min]` and its standard error under Monte Carlo.
    pub sigma_ratio: f64,
    pub sigma_ratio_se: Option<f64>,
    /// `E[sigma_max] / min_j E[sigma_j]`.
    pub delta: f64,
    /// `M`: largest expected completion reward over jobs and slots.
    pub reward_max: f64,
    /// `m`: smallest strictly positive expected completion reward.
    pub reward_min_positive: f64,
    /// Smallest positive CDF value of the shared distribution (IID only).
    pub p_min: Option<f64>,
}

fn pmfs_equal(a: &Pmf, b: &Pmf) -> bool {
    let len = a.max_duration().max(b.max_duration());
    (1..=len).all(|t| (a.prob(t) - b.prob(t)).abs() <= 1e-12)
}

fn exact_sigma_ratio(instance: &Instance, product_budget: u64) -> Result<f64> {
    let supports: Vec<Vec<u32>> = instance.jobs().iter().map(|j| j.pmf.support()).collect();
    let mut product: u64 = 1;
    for support in &supports {
        product = product.saturating_mul(support.len() as u64);
        if product > product_budget {
            return Err(Error::ProductBudgetExceeded {
                budget: product_budget,
            });
        }
    }
    // Depth-first walk over the joint support, accumulating the probability
    // and the running max/min.
    fn walk(instance: &Instance, supports: &[Vec<u32>], j: usize, prob: f64, max: u32, min: u32) -> f64 {
        if j == supports.len() {
            return prob * max as f64 / min as f64;
        }
        let mut total = 0.0;
        for &duration in &supports[j] {
            let p = instance.job(j).pmf.prob(duration);
            total += walk(
                instance,
                supports,
                j + 1,
                prob * p,
                max.max(duration),
                min.min(duration),
            );
        }
        total
    }
    Ok(walk(instance, &supports, 0, 1.0, 1, u32::MAX))
}

fn mc_sigma_ratio(instance: &Instance, draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng::stream(seed, &[0x51]);
    let samples: Vec<f64> = (0..draws)
        .map(|_| {
            let mut max = 1u32;
            let mut min = u32::MAX;
            for job in instance.jobs() {
                let d = job.pmf.quantile(rng.random());
                max = max.max(d);
                min = min.min(d);
            }
            max as f64 / min as f64
        })
        .collect();
    let stats = crate::simulator::McStats::from_values(&samples);
    (stats.mean, stats.std_error)
}

/// `E[max_j sigma_j]` via the tail-sum identity
/// `sum_t (1 - prod_j F_j(t))` over `t = 0, 1, ...`.
fn expected_sigma_max(instance: &Instance) -> f64 {
    let longest = instance
        .jobs()
        .iter()
        .map(|j| j.pmf.max_duration())
        .max()
        .unwrap_or(0);
    (0..longest)
        .map(|t| {
            let all_done: f64 = instance.jobs().iter().map(|j| j.pmf.cdf(t)).product();
            1.0 - all_done
        })
        .sum()
}

/// Computes every §-style constant of the instance. `M` and `m` scan slots
/// `0 ..= max deadline`; past the last deadline every expected reward is zero.
pub fn compute_bounds(instance: &Instance, method: BoundsMethod) -> Result<BoundReport> {
    if instance.num_jobs() == 0 {
        return Err(Error::ValuelessInstance);
    }
    let (sigma_ratio, sigma_ratio_se) = match method {
        BoundsMethod::Exact { product_budget } => {
            (exact_sigma_ratio(instance, product_budget)?, None)
        }
        BoundsMethod::MonteCarlo { draws, seed } => {
            let (mean, se) = mc_sigma_ratio(instance, draws, seed);
            (mean, Some(se))
        }
    };

    let min_mean = instance
        .jobs()
        .iter()
        .map(|j| j.pmf.mean())
        .fold(f64::INFINITY, f64::min);
    let delta = expected_sigma_max(instance) / min_mean;

    let max_deadline = instance.max_deadline();
    let mut reward_max = 0.0f64;
    let mut reward_min_positive = f64::INFINITY;
    for job in instance.jobs() {
        for t in 0..=max_deadline {
            let r = expected_completion_reward(job, t);
            reward_max = reward_max.max(r);
            if r > 0.0 {
                reward_min_positive = reward_min_positive.min(r);
            }
        }
    }
    if !reward_min_positive.is_finite() {
        return Err(Error::ValuelessInstance);
    }

    let iid = instance
        .jobs()
        .iter()
        .all(|j| pmfs_equal(&j.pmf, &instance.job(0).pmf));

    let edf_alpha = iid.then_some(1.0 + reward_max / reward_min_positive);

    // The step-decay refinement is proved for a common value collected until
    // each deadline; heterogeneous initial values void it.
    let step_applicable = iid
        && instance.jobs().iter().all(|j| {
            matches!(j.decay.kind(), DecayKind::Step { initial, .. }
                if (initial - first_step_initial(instance)).abs() <= 1e-12 && *initial > 0.0)
        });
    let p_min = iid.then(|| {
        let pmf = &instance.job(0).pmf;
        pmf.cdf(*pmf.support().first().expect("pmf has positive mass"))
    });
    let edf_step_alpha = match (step_applicable, p_min) {
        (true, Some(p)) => Some(1.0 + 1.0 / p),
        _ => None,
    };

    Ok(BoundReport {
        iid,
        greedy_alpha: 1.0 + 2.0 * sigma_ratio,
        rate_greedy_alpha: 2.0 + delta,
        edf_alpha,
        edf_step_alpha,
        sigma_ratio,
        sigma_ratio_se,
        delta,
        reward_max,
        reward_min_positive,
        p_min,
    })
}

fn first_step_initial(instance: &Instance) -> f64 {
    match instance.job(0).decay.kind() {
        DecayKind::Step { initial, .. } => *initial,
        _ => f64::NAN,
    }
}

/// One `V* <= alpha V^pi` check at the initial state.
#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub policy: String,
    pub bound: String,
    pub alpha: f64,
    pub v_optimal: f64,
    pub v_policy: f64,
    pub holds: bool,
}

const CHECK_TOL: f64 = 1e-9;

/// Verifies every applicable (policy, bound) pair against exact values. IID
/// instances are additionally checked against the tight 2-approximation for
/// both greedy policies.
pub fn verify_bounds(instance: &Instance) -> Result<Vec<BoundCheck>> {
    let report = compute_bounds(instance, BoundsMethod::exact())?;
    let v_optimal = crate::dp::solve_optimal(instance)?.optimal_value;

    let mut checks = Vec::new();
    let mut push = |policy: &dyn Policy, bound: &str, alpha: f64| -> Result<()> {
        let v_policy = crate::dp::evaluate_policy_exact(instance, policy)?;
        checks.push(BoundCheck {
            policy: policy.name().to_string(),
            bound: bound.to_string(),
            alpha,
            v_optimal,
            v_policy,
            holds: v_optimal <= alpha * v_policy + CHECK_TOL,
        });
        Ok(())
    };

    push(&Greedy, "1 + 2E[sigma_max/sigma_min]", report.greedy_alpha)?;
    push(&RateGreedy, "2 + delta", report.rate_greedy_alpha)?;
    if report.iid {
        push(&Greedy, "2 (iid)", 2.0)?;
        push(&RateGreedy, "2 (iid)", 2.0)?;
        if let Some(alpha) = report.edf_alpha {
            push(&EarliestDeadlineFirst, "1 + M/m", alpha)?;
        }
        if let Some(alpha) = report.edf_step_alpha {
            push(&EarliestDeadlineFirst, "1 + 1/p_min", alpha)?;
        }
    }
    Ok(checks)
}

/// The bound-ordering relations: `1 + 2E[sigma_max/sigma_min] >= 2 + delta`
/// and `1 + M/m >= 2`.
pub fn check_bound_ordering(instance: &Instance) -> Result<bool> {
    let report = compute_bounds(instance, BoundsMethod::exact())?;
    let first = report.greedy_alpha >= report.rate_greedy_alpha - CHECK_TOL;
    let second = 1.0 + report.reward_max / report.reward_min_positive >= 2.0 - CHECK_TOL;
    Ok(first && second)
}
