//! Core domain types and state-transition mechanics of the discrete-time,
//! non-preemptive clearing system.
//!
//! Timing contract: a job scheduled at the beginning of slot `t` with
//! realized service `sigma` occupies its processor for slots
//! `t ..= t + sigma - 1`, earns `v(t + sigma)` on completion, and the
//! processor accepts a new job at slot `t + sigma`.
//!
//! All types are immutable after construction; the operations here are pure
//! functions, so everything is safe to share across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite-support probability mass function over service durations.
///
/// `probs[k]` is the probability of duration `k + 1`; duration zero is
/// impossible, so the support is a subset of `{1, ..., max_duration()}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Pmf {
    probs: Vec<f64>,
}

impl Pmf {
    pub const NORMALIZATION_TOL: f64 = 1e-12;

    /// Builds a pmf from `probs[k] = P(sigma = k + 1)`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidPmf("negative or non-finite mass".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > Self::NORMALIZATION_TOL {
            return Err(Error::InvalidPmf(format!("mass sums to {total}, not 1")));
        }
        Ok(Self { probs })
    }

    /// Builds a pmf from non-negative weights, normalizing them to sum to 1.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidPmf("empty support".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidPmf("negative or non-finite weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("all weights are zero".into()));
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { probs })
    }

    /// Point mass on a single duration.
    pub fn deterministic(duration: u32) -> Result<Self> {
        if duration == 0 {
            return Err(Error::InvalidPmf("duration zero is impossible".into()));
        }
        let mut probs = vec![0.0; duration as usize];
        probs[duration as usize - 1] = 1.0;
        Self::new(probs)
    }

    /// Largest representable duration (end of the stored support).
    pub fn max_duration(&self) -> u32 {
        self.probs.len() as u32
    }

    /// `P(sigma = duration)`; zero outside the stored support.
    pub fn prob(&self, duration: u32) -> f64 {
        if duration == 0 || duration > self.max_duration() {
            0.0
        } else {
            self.probs[duration as usize - 1]
        }
    }

    /// `P(sigma <= duration)`.
    pub fn cdf(&self, duration: u32) -> f64 {
        let upto = (duration as usize).min(self.probs.len());
        self.probs[..upto].iter().sum()
    }

    /// `P(sigma >= duration)` computed as a tail sum.
    pub fn survival_from(&self, duration: u32) -> f64 {
        if duration <= 1 {
            return 1.0;
        }
        if duration > self.max_duration() {
            return 0.0;
        }
        self.probs[duration as usize - 1..].iter().sum()
    }

    /// Expected duration.
    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(k, p)| (k + 1) as f64 * p)
            .sum()
    }

    /// Durations with strictly positive probability, ascending.
    pub fn support(&self) -> Vec<u32> {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, _)| k as u32 + 1)
            .collect()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Inverse-CDF sample from a single uniform draw in `[0, 1)`.
    pub fn quantile(&self, u: f64) -> u32 {
        let mut acc = 0.0;
        for (k, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return k as u32 + 1;
            }
        }
        // Rounding can leave acc marginally below 1; fall back to the last
        // positive-mass duration.
        *self.support().last().expect("pmf has positive mass")
    }
}

impl TryFrom<Vec<f64>> for Pmf {
    type Error = Error;

    fn try_from(probs: Vec<f64>) -> Result<Self> {
        Self::new(probs)
    }
}

impl From<Pmf> for Vec<f64> {
    fn from(pmf: Pmf) -> Self {
        pmf.probs
    }
}

/// Parametric form of a decay function, as stored in instance files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "kebab-case")]
pub enum DecayKind {
    /// `v(t) = initial` for `t <= deadline`, zero after.
    Step { initial: f64, deadline: u32 },
    /// `v(t) = initial * (1 - t / (deadline + 1))` for `t <= deadline`,
    /// zero after; `v(deadline) > 0` so the effective deadline is `deadline`.
    Linear { initial: f64, deadline: u32 },
    /// `v(t) = initial * exp(-3 t / deadline)` for `t <= deadline`, zero after.
    Exponential { initial: f64, deadline: u32 },
    /// Linear interpolation through `(slot, value)` breakpoints, zero after
    /// the last breakpoint.
    PiecewiseLinear { breakpoints: Vec<(u32, f64)> },
}

/// A deterministic, non-negative, non-increasing value curve `v(t)` with a
/// cached effective deadline `d = max{t : v(t) > 0}` (`d = 0` if the curve is
/// identically zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DecayKind", into = "DecayKind")]
pub struct DecayFunction {
    kind: DecayKind,
    deadline: u32,
}

impl DecayFunction {
    pub fn new(kind: DecayKind) -> Result<Self> {
        match &kind {
            DecayKind::Step { initial, deadline }
            | DecayKind::Linear { initial, deadline }
            | DecayKind::Exponential { initial, deadline } => {
                if !initial.is_finite() || *initial < 0.0 {
                    return Err(Error::InvalidDecay("initial value must be >= 0".into()));
                }
                if *deadline == 0 {
                    return Err(Error::InvalidDecay("deadline must be >= 1".into()));
                }
            }
            DecayKind::PiecewiseLinear { breakpoints } => {
                if breakpoints.is_empty() {
                    return Err(Error::InvalidDecay("no breakpoints".into()));
                }
                if breakpoints[0].0 != 0 {
                    return Err(Error::InvalidDecay("first breakpoint must be t = 0".into()));
                }
                for pair in breakpoints.windows(2) {
                    if pair[1].0 <= pair[0].0 {
                        return Err(Error::InvalidDecay("breakpoints must be increasing".into()));
                    }
                    if pair[1].1 > pair[0].1 {
                        return Err(Error::InvalidDecay("values must be non-increasing".into()));
                    }
                }
                if breakpoints.iter().any(|(_, v)| !v.is_finite() || *v < 0.0) {
                    return Err(Error::InvalidDecay("values must be >= 0".into()));
                }
            }
        }
        let deadline = Self::scan_deadline(&kind);
        Ok(Self { kind, deadline })
    }

    pub fn step(initial: f64, deadline: u32) -> Result<Self> {
        Self::new(DecayKind::Step { initial, deadline })
    }

    pub fn linear(initial: f64, deadline: u32) -> Result<Self> {
        Self::new(DecayKind::Linear { initial, deadline })
    }

    pub fn exponential(initial: f64, deadline: u32) -> Result<Self> {
        Self::new(DecayKind::Exponential { initial, deadline })
    }

    pub fn piecewise_linear(breakpoints: Vec<(u32, f64)>) -> Result<Self> {
        Self::new(DecayKind::PiecewiseLinear { breakpoints })
    }

    fn value_of(kind: &DecayKind, t: u32) -> f64 {
        match kind {
            DecayKind::Step { initial, deadline } => {
                if t <= *deadline {
                    *initial
                } else {
                    0.0
                }
            }
            DecayKind::Linear { initial, deadline } => {
                if t <= *deadline {
                    initial * (1.0 - t as f64 / (*deadline as f64 + 1.0))
                } else {
                    0.0
                }
            }
            DecayKind::Exponential { initial, deadline } => {
                if t <= *deadline {
                    initial * (-3.0 * t as f64 / *deadline as f64).exp()
                } else {
                    0.0
                }
            }
            DecayKind::PiecewiseLinear { breakpoints } => {
                let (last_t, last_v) = *breakpoints.last().expect("validated non-empty");
                if t > last_t {
                    return 0.0;
                }
                if t == last_t {
                    return last_v;
                }
                let idx = breakpoints.partition_point(|(bt, _)| *bt <= t);
                let (t0, v0) = breakpoints[idx - 1];
                let (t1, v1) = breakpoints[idx];
                let frac = (t - t0) as f64 / (t1 - t0) as f64;
                v0 + (v1 - v0) * frac
            }
        }
    }

    fn scan_deadline(kind: &DecayKind) -> u32 {
        match kind {
            DecayKind::Step { initial, deadline }
            | DecayKind::Linear { initial, deadline }
            | DecayKind::Exponential { initial, deadline } => {
                if *initial > 0.0 {
                    *deadline
                } else {
                    0
                }
            }
            DecayKind::PiecewiseLinear { breakpoints } => {
                let last_t = breakpoints.last().expect("validated non-empty").0;
                (0..=last_t)
                    .rev()
                    .find(|t| Self::value_of(kind, *t) > 0.0)
                    .unwrap_or(0)
            }
        }
    }

    /// Value earned if the job completes at slot `t`.
    pub fn value(&self, t: u32) -> f64 {
        Self::value_of(&self.kind, t)
    }

    /// Effective deadline `d = max{t : v(t) > 0}` (0 for an identically zero
    /// curve). `v(t) = 0` for every `t > d`.
    pub fn deadline(&self) -> u32 {
        self.deadline
    }

    pub fn kind(&self) -> &DecayKind {
        &self.kind
    }
}

impl TryFrom<DecayKind> for DecayFunction {
    type Error = Error;

    fn try_from(kind: DecayKind) -> Result<Self> {
        Self::new(kind)
    }
}

impl From<DecayFunction> for DecayKind {
    fn from(decay: DecayFunction) -> Self {
        decay.kind
    }
}

/// One job of the clearing system: a service-time distribution plus a value
/// decay curve. Ids are assigned by the owning [`Instance`] (the job's index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    #[serde(skip)]
    pub id: usize,
    pub pmf: Pmf,
    pub decay: DecayFunction,
}

impl Job {
    pub fn new(id: usize, pmf: Pmf, decay: DecayFunction) -> Self {
        Self { id, pmf, decay }
    }
}

/// A full problem instance: the unit that gets solved or simulated.
///
/// All jobs are present at slot 0 and no more arrive (a clearing system).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRepr", into = "InstanceRepr")]
pub struct Instance {
    jobs: Vec<Job>,
    num_processors: usize,
    horizon: u32,
}

/// Wire format for instance files: `{jobs, processors, horizon}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct InstanceRepr {
    jobs: Vec<Job>,
    processors: usize,
    horizon: u32,
}

impl Instance {
    /// Validates and builds an instance. The horizon is a simulation cutoff
    /// and must lie strictly past every deadline; an empty job list is
    /// permitted and yields a trivially cleared system.
    pub fn new(mut jobs: Vec<Job>, num_processors: usize, horizon: u32) -> Result<Self> {
        if num_processors == 0 {
            return Err(Error::InvalidInstance("need at least one processor".into()));
        }
        for (id, job) in jobs.iter_mut().enumerate() {
            job.id = id;
        }
        if let Some(max_deadline) = jobs.iter().map(|j| j.decay.deadline()).max() {
            if horizon < max_deadline + 1 {
                return Err(Error::InvalidInstance(format!(
                    "horizon {horizon} must be at least max deadline + 1 = {}",
                    max_deadline + 1
                )));
            }
        }
        Ok(Self {
            jobs,
            num_processors,
            horizon,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job(&self, id: usize) -> &Job {
        &self.jobs[id]
    }

    pub fn num_jobs(&self) -> usize {
        self.jobs.len()
    }

    pub fn num_processors(&self) -> usize {
        self.num_processors
    }

    pub fn horizon(&self) -> u32 {
        self.horizon
    }

    /// Largest effective deadline over all jobs; 0 for an empty instance.
    pub fn max_deadline(&self) -> u32 {
        self.jobs
            .iter()
            .map(|j| j.decay.deadline())
            .max()
            .unwrap_or(0)
    }

    /// The state at slot 0: every job unstarted, every processor free.
    pub fn initial_state(&self) -> SystemState {
        SystemState {
            t: 0,
            backlog: vec![JobStatus::NotStarted; self.jobs.len()],
            procs: vec![ProcessorStatus::Free; self.num_processors],
        }
    }
}

impl TryFrom<InstanceRepr> for Instance {
    type Error = Error;

    fn try_from(repr: InstanceRepr) -> Result<Self> {
        Self::new(repr.jobs, repr.processors, repr.horizon)
    }
}

impl From<Instance> for InstanceRepr {
    fn from(instance: Instance) -> Self {
        InstanceRepr {
            jobs: instance.jobs,
            processors: instance.num_processors,
            horizon: instance.horizon,
        }
    }
}

/// Observable status of a job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JobStatus {
    NotStarted,
    /// In service since the given slot (exclusive of the current slot).
    InService { start: u32 },
    Done,
}

/// Occupancy of one processor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProcessorStatus {
    Free,
    Busy { job: usize },
}

/// The observable MDP state: current slot, per-job backlog status, and
/// per-processor occupancy.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SystemState {
    pub t: u32,
    pub backlog: Vec<JobStatus>,
    pub procs: Vec<ProcessorStatus>,
}

impl SystemState {
    /// Ids of jobs that have not begun processing, ascending.
    pub fn not_started(&self) -> Vec<usize> {
        self.backlog
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, JobStatus::NotStarted))
            .map(|(j, _)| j)
            .collect()
    }

    /// Ids of free processors, ascending.
    pub fn free_processors(&self) -> Vec<usize> {
        self.procs
            .iter()
            .enumerate()
            .filter(|(_, s)| matches!(s, ProcessorStatus::Free))
            .map(|(n, _)| n)
            .collect()
    }

    /// `(job, start)` pairs for in-service jobs, ascending by job id.
    pub fn in_service(&self) -> Vec<(usize, u32)> {
        self.backlog
            .iter()
            .enumerate()
            .filter_map(|(j, s)| match s {
                JobStatus::InService { start } => Some((j, *start)),
                _ => None,
            })
            .collect()
    }

    pub fn all_done(&self) -> bool {
        self.backlog.iter().all(|s| matches!(s, JobStatus::Done))
    }

    /// Slots of service already received by an in-service job, not counting
    /// the current slot.
    pub fn age(&self, job: usize) -> Option<u32> {
        match self.backlog[job] {
            JobStatus::InService { start } => Some(self.t - start),
            _ => None,
        }
    }

    /// Checks the backlog/processor cross-invariants.
    pub fn is_consistent(&self) -> bool {
        let in_service = self.in_service();
        let busy: Vec<usize> = self
            .procs
            .iter()
            .filter_map(|s| match s {
                ProcessorStatus::Busy { job } => Some(*job),
                _ => None,
            })
            .collect();
        if busy.len() != in_service.len() {
            return false;
        }
        in_service.iter().all(|(j, start)| {
            *start < self.t && busy.iter().filter(|b| *b == j).count() == 1
        })
    }
}

/// A set of (job, processor) assignments valid in some state. Assignments
/// are kept sorted by job id; both sides are distinct.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ScheduleAction {
    pub assignments: Vec<(usize, usize)>,
}

impl ScheduleAction {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(mut assignments: Vec<(usize, usize)>) -> Self {
        assignments.sort_unstable();
        Self { assignments }
    }

    /// Pairs the given jobs with the given processors in ascending order.
    /// Lowest job id goes to the lowest processor id.
    pub fn pair_in_order(mut jobs: Vec<usize>, procs: &[usize]) -> Self {
        jobs.sort_unstable();
        let assignments = jobs.into_iter().zip(procs.iter().copied()).collect();
        Self { assignments }
    }

    pub fn jobs(&self) -> impl Iterator<Item = usize> + '_ {
        self.assignments.iter().map(|(j, _)| *j)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    /// Validates the action against a state: distinct unstarted jobs on
    /// distinct free processors.
    pub fn validate(&self, state: &SystemState) -> Result<()> {
        for window in self.assignments.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidAction("duplicate job".into()));
            }
        }
        let mut procs: Vec<usize> = self.assignments.iter().map(|(_, n)| *n).collect();
        procs.sort_unstable();
        if procs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidAction("duplicate processor".into()));
        }
        for (job, proc) in &self.assignments {
            if *job >= state.backlog.len() {
                return Err(Error::InvalidAction(format!("unknown job {job}")));
            }
            if !matches!(state.backlog[*job], JobStatus::NotStarted) {
                return Err(Error::InvalidAction(format!("job {job} is not schedulable")));
            }
            if *proc >= state.procs.len() {
                return Err(Error::InvalidAction(format!("unknown processor {proc}")));
            }
            if !matches!(state.procs[*proc], ProcessorStatus::Free) {
                return Err(Error::InvalidAction(format!("processor {proc} is busy")));
            }
        }
        Ok(())
    }
}

/// One branch of a stochastic transition.
#[derive(Debug, Clone)]
pub struct TransitionOutcome {
    pub next_state: SystemState,
    pub probability: f64,
    /// Value collected during this slot (completions credited at `t + 1`).
    pub reward: f64,
}

/// Expected reward from scheduling `job` at slot `t`:
/// `E[v(t + sigma)] = sum_k P(sigma = k) * v(t + k)`.
pub fn expected_completion_reward(job: &Job, t: u32) -> f64 {
    let deadline = job.decay.deadline();
    if t >= deadline {
        // Completion happens at t + k >= t + 1 > deadline.
        return 0.0;
    }
    let mut total = 0.0;
    for k in 1..=job.pmf.max_duration() {
        if t + k > deadline {
            break;
        }
        let p = job.pmf.prob(k);
        if p > 0.0 {
            total += p * job.decay.value(t + k);
        }
    }
    total
}

/// Conditional completion probability `P(sigma = age + 1 | sigma >= age + 1)`
/// for a job that has already been in service for `age` slots.
pub fn hazard(job: &Job, age: u32) -> Result<f64> {
    let survival = job.pmf.survival_from(age + 1);
    if survival <= 0.0 {
        return Err(Error::UndefinedHazard { job: job.id, age });
    }
    Ok((job.pmf.prob(age + 1) / survival).min(1.0))
}

/// Enumerates the maximal actions of a state: every action schedules
/// `min{K, M}` jobs, where `K` counts unstarted jobs and `M` free
/// processors. Processors are identical, so job subsets are paired with the
/// free processors in index order; the result is ordered lexicographically by
/// job-id set. Returns a single empty action when `K = 0` or `M = 0`.
pub fn enumerate_actions(state: &SystemState, instance: &Instance) -> Vec<ScheduleAction> {
    debug_assert_eq!(state.backlog.len(), instance.num_jobs());
    let candidates = state.not_started();
    let free = state.free_processors();
    let take = candidates.len().min(free.len());
    if take == 0 {
        return vec![ScheduleAction::empty()];
    }
    let mut actions = Vec::new();
    let mut subset = Vec::with_capacity(take);
    fn combos(
        candidates: &[usize],
        start: usize,
        take: usize,
        subset: &mut Vec<usize>,
        free: &[usize],
        out: &mut Vec<ScheduleAction>,
    ) {
        if subset.len() == take {
            out.push(ScheduleAction::pair_in_order(subset.clone(), free));
            return;
        }
        let remaining = take - subset.len();
        for i in start..=candidates.len() - remaining {
            subset.push(candidates[i]);
            combos(candidates, i + 1, take, subset, free, out);
            subset.pop();
        }
    }
    combos(&candidates, 0, take, &mut subset, &free, &mut actions);
    actions
}

/// Applies `action` at the beginning of slot `t` and enumerates every
/// completion subset of the busy processors. A busy job with in-service age
/// `k` completes at the end of the slot with probability [`hazard`]`(job, k)`;
/// completion at the beginning of slot `t + 1 = start + sigma` frees the
/// processor and earns `v(start + sigma)`. Zero-probability branches are
/// pruned; the surviving probabilities sum to 1.
pub fn transition(
    state: &SystemState,
    action: &ScheduleAction,
    instance: &Instance,
) -> Result<Vec<TransitionOutcome>> {
    action.validate(state)?;

    let mut base = state.clone();
    for (job, proc) in &action.assignments {
        base.backlog[*job] = JobStatus::InService { start: state.t };
        base.procs[*proc] = ProcessorStatus::Busy { job: *job };
    }

    // (processor, job, completion hazard) for every busy processor.
    let mut busy = Vec::new();
    for (n, status) in base.procs.iter().enumerate() {
        if let ProcessorStatus::Busy { job } = status {
            let age = match base.backlog[*job] {
                JobStatus::InService { start } => state.t - start,
                _ => unreachable!("busy processor must hold an in-service job"),
            };
            busy.push((n, *job, hazard(instance.job(*job), age)?));
        }
    }

    let next_t = state.t + 1;
    let mut outcomes = Vec::new();
    // Iterate completion subsets as bitmasks over the busy list.
    for mask in 0..(1u32 << busy.len()) {
        let mut probability = 1.0;
        let mut reward = 0.0;
        for (i, (_, job, h)) in busy.iter().enumerate() {
            if mask & (1 << i) != 0 {
                probability *= h;
                reward += instance.job(*job).decay.value(next_t);
            } else {
                probability *= 1.0 - h;
            }
        }
        if probability <= 0.0 {
            continue;
        }
        let mut next_state = base.clone();
        next_state.t = next_t;
        for (i, (n, job, _)) in busy.iter().enumerate() {
            if mask & (1 << i) != 0 {
                next_state.backlog[*job] = JobStatus::Done;
                next_state.procs[*n] = ProcessorStatus::Free;
            }
        }
        outcomes.push(TransitionOutcome {
            next_state,
            probability,
            reward,
        });
    }
    Ok(outcomes)
}

/// True when no future reward is possible: every job is done, or the slot is
/// past the deadline of every job that is not done.
pub fn is_terminal(state: &SystemState, instance: &Instance) -> bool {
    let mut max_deadline = None;
    for (j, status) in state.backlog.iter().enumerate() {
        if !matches!(status, JobStatus::Done) {
            let d = instance.job(j).decay.deadline();
            max_deadline = Some(max_deadline.map_or(d, |m: u32| m.max(d)));
        }
    }
    match max_deadline {
        None => true,
        Some(d) => state.t > d,
    }
}
