//! Parametric service-time PMF families, decay-function families, discretized
//! lognormal PMFs, random piecewise-linear decay curves, and randomly sampled
//! experiment instances.
//!
//! Constructors are pure; randomness always comes from an explicitly passed
//! generator, so identical seeds reproduce identical instances everywhere.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::model::{DecayFunction, Instance, Job, Pmf};

/// The four shape families on `{1, ..., T}`, each tuned by `a` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PmfKind {
    Uniform,
    Decreasing,
    Increasing,
    Bathtub,
}

impl PmfKind {
    pub const ALL: [PmfKind; 4] = [
        PmfKind::Uniform,
        PmfKind::Decreasing,
        PmfKind::Increasing,
        PmfKind::Bathtub,
    ];

    pub fn make(self, a: f64, slots: u32) -> Result<Pmf> {
        match self {
            PmfKind::Uniform => make_uniform_pmf(a, slots),
            PmfKind::Decreasing => make_decreasing_pmf(a, slots),
            PmfKind::Increasing => make_increasing_pmf(a, slots),
            PmfKind::Bathtub => make_bathtub_pmf(a, slots),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PmfKind::Uniform => "uniform",
            PmfKind::Decreasing => "decreasing",
            PmfKind::Increasing => "increasing",
            PmfKind::Bathtub => "bathtub",
        }
    }
}

/// The three parametric decay shapes with initial value `b` and deadline `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayShape {
    Step,
    Linear,
    Exponential,
}

impl DecayShape {
    pub const ALL: [DecayShape; 3] = [DecayShape::Step, DecayShape::Linear, DecayShape::Exponential];

    pub fn make(self, initial: f64, deadline: u32) -> Result<DecayFunction> {
        match self {
            DecayShape::Step => DecayFunction::step(initial, deadline),
            DecayShape::Linear => DecayFunction::linear(initial, deadline),
            DecayShape::Exponential => DecayFunction::exponential(initial, deadline),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DecayShape::Step => "step",
            DecayShape::Linear => "linear",
            DecayShape::Exponential => "exponential",
        }
    }
}

/// Uniform pmf on `{1, ..., ceil(a * T)}`.
pub fn make_uniform_pmf(a: f64, slots: u32) -> Result<Pmf> {
    check_a(a)?;
    let upper = (a * slots as f64).ceil() as u32;
    if upper == 0 {
        return Err(Error::InvalidPmf(format!(
            "uniform upper bound ceil({a} * {slots}) is zero"
        )));
    }
    Pmf::from_weights(vec![1.0; upper as usize])
}

/// Truncated geometric pmf with parameter `1 - e^{-a}`:
/// `p(t)` proportional to `e^{-a(t-1)}` on `{1, ..., T}`.
pub fn make_decreasing_pmf(a: f64, slots: u32) -> Result<Pmf> {
    check_a(a)?;
    if a == 0.0 {
        return Err(Error::InvalidPmf("decreasing pmf requires a > 0".into()));
    }
    check_slots(slots)?;
    let ratio = (-a).exp();
    let weights = (0..slots).map(|k| ratio.powi(k as i32)).collect();
    Pmf::from_weights(weights)
}

/// Mirror image of the decreasing family: `p(t)` proportional to
/// `e^{a(t-1)}` on `{1, ..., T}`. Flat (uniform) at `a = 0`.
pub fn make_increasing_pmf(a: f64, slots: u32) -> Result<Pmf> {
    check_a(a)?;
    check_slots(slots)?;
    let ratio = a.exp();
    let weights = (0..slots).map(|k| ratio.powi(k as i32)).collect();
    Pmf::from_weights(weights)
}

/// Bi-modal "bathtub" pmf: `p(t)` proportional to
/// `e^{-a(t-1)} + e^{-a(T-t)}`, symmetric about the midpoint of `{1, ..., T}`.
pub fn make_bathtub_pmf(a: f64, slots: u32) -> Result<Pmf> {
    check_a(a)?;
    check_slots(slots)?;
    let weights = (1..=slots)
        .map(|t| (-a * (t as f64 - 1.0)).exp() + (-a * (slots - t) as f64).exp())
        .collect();
    Pmf::from_weights(weights)
}

fn check_a(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::InvalidPmf(format!("parameter a = {a} outside [0, 1]")));
    }
    Ok(())
}

fn check_slots(slots: u32) -> Result<()> {
    if slots == 0 {
        return Err(Error::InvalidPmf("need at least one slot".into()));
    }
    Ok(())
}

/// Shifted-lognormal CDF: `sigma = shift + exp(m + s Z)` measured in minutes.
/// Zero for `x <= shift`.
pub fn lognormal_cdf(x: f64, shift: f64, log_mean: f64, log_sd: f64) -> f64 {
    if x <= shift {
        return 0.0;
    }
    0.5 * (1.0 + erf(((x - shift).ln() - log_mean) / (log_sd * std::f64::consts::SQRT_2)))
}

/// Discretizes the shifted lognormal onto `{1, ..., slots}` with bins of
/// `slot_minutes` each: unnormalized mass of slot `t` is
/// `F(t * delta) - F((t - 1) * delta)`, then the whole vector is normalized.
pub fn discretize_lognormal(
    shift: f64,
    log_mean: f64,
    log_sd: f64,
    slot_minutes: f64,
    slots: u32,
) -> Result<Pmf> {
    if log_sd <= 0.0 || slot_minutes <= 0.0 || shift < 0.0 {
        return Err(Error::InvalidPmf(
            "lognormal needs log_sd > 0, slot_minutes > 0, shift >= 0".into(),
        ));
    }
    check_slots(slots)?;
    let weights: Vec<f64> = (1..=slots)
        .map(|t| {
            let hi = lognormal_cdf(t as f64 * slot_minutes, shift, log_mean, log_sd);
            let lo = lognormal_cdf((t - 1) as f64 * slot_minutes, shift, log_mean, log_sd);
            (hi - lo).max(0.0)
        })
        .collect();
    if weights.iter().sum::<f64>() <= 0.0 {
        return Err(Error::InvalidPmf(format!(
            "no lognormal mass below {} minutes (shift {shift})",
            slots as f64 * slot_minutes
        )));
    }
    Pmf::from_weights(weights)
}

/// Breakpoint spacing of the random piecewise-linear decay curves, in slots.
/// The triage scores these curves mimic decline in 30 minute increments,
/// which is 3 slots at 10 minutes per slot.
pub const PIECEWISE_SEGMENT_SLOTS: u32 = 3;

/// Deterministic core of [`gen_piecewise_linear_decay`]: breakpoint values
/// start at `v0` and each segment drops by `(3 / T) * u_k`, clamped at zero.
/// If the curve is still positive at the last breakpoint before `T`, it is
/// held constant out to `T` and reaches zero after the horizon.
pub fn piecewise_linear_from_draws(slots: u32, v0: f64, decrements: &[f64]) -> Result<DecayFunction> {
    let step = PIECEWISE_SEGMENT_SLOTS;
    if slots < step {
        return Err(Error::InvalidDecay(format!("horizon {slots} shorter than one segment")));
    }
    let segments = (slots / step) as usize;
    if decrements.len() < segments {
        return Err(Error::InvalidDecay("not enough decrement draws".into()));
    }
    let mut breakpoints = vec![(0, v0)];
    let mut value = v0;
    for (k, u) in decrements.iter().take(segments).enumerate() {
        value = (value - step as f64 / slots as f64 * u).max(0.0);
        breakpoints.push(((k as u32 + 1) * step, value));
        if value == 0.0 {
            break;
        }
    }
    let (last_t, last_v) = *breakpoints.last().expect("at least the origin");
    if last_v > 0.0 && last_t < slots {
        breakpoints.push((slots, last_v));
    }
    DecayFunction::piecewise_linear(breakpoints)
}

/// Random continuous piecewise-linear decay: `v(0) ~ U[0, 1]`, then each
/// breakpoint `v(3k) = max{v(3(k-1)) - (3/T) u_k, 0}` with a fresh
/// `u_k ~ U[0, 1]` per segment, linearly interpolated in between.
pub fn gen_piecewise_linear_decay<R: Rng + ?Sized>(slots: u32, rng: &mut R) -> Result<DecayFunction> {
    let v0: f64 = rng.random();
    let segments = (slots / PIECEWISE_SEGMENT_SLOTS) as usize;
    let decrements: Vec<f64> = (0..segments).map(|_| rng.random()).collect();
    piecewise_linear_from_draws(slots, v0, &decrements)
}

/// How the service-time pmf of each job is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum PmfMode {
    /// Every job uses the same named family.
    Fixed { kind: PmfKind },
    /// The family of each job is drawn uniformly from the four kinds.
    Heterogeneous,
    /// Discretized shifted lognormal with per-job `(m, s)` draws.
    Lognormal {
        #[serde(default = "default_shift")]
        shift_minutes: f64,
        #[serde(default = "default_slot_minutes")]
        slot_minutes: f64,
        #[serde(default = "default_log_mean_range")]
        log_mean_range: (f64, f64),
        #[serde(default = "default_log_sd_range")]
        log_sd_range: (f64, f64),
    },
}

fn default_shift() -> f64 {
    60.0
}

fn default_slot_minutes() -> f64 {
    10.0
}

fn default_log_mean_range() -> (f64, f64) {
    (1.0, 4.0)
}

fn default_log_sd_range() -> (f64, f64) {
    (1.0, 1.25)
}

impl PmfMode {
    /// The triage scenario's service times: one-hour minimum, 10 minute
    /// slots, `m ~ U[1, 4]`, `s ~ U[1, 1.25]`.
    pub fn patient() -> Self {
        PmfMode::Lognormal {
            shift_minutes: default_shift(),
            slot_minutes: default_slot_minutes(),
            log_mean_range: default_log_mean_range(),
            log_sd_range: default_log_sd_range(),
        }
    }
}

/// How the decay function of each job is generated. Parameters `b ~ U[0, 1]`
/// and `c ~ Uniform{1, ..., T}` are drawn per job.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DecayMode {
    Fixed { kind: DecayShape },
    /// The shape of each job is drawn uniformly from the three kinds.
    Heterogeneous,
    /// Random continuous piecewise-linear curves (the triage scenario).
    PiecewiseLinear,
}

/// How the pmf parameter `a` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum AMode {
    FixedOne,
    Uniform,
}

/// A recipe for sampling random instances: dimensions plus the generation
/// modes of the pmf, decay, and `a` parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub jobs: usize,
    pub processors: usize,
    pub horizon: u32,
    pub pmf: PmfMode,
    pub decay: DecayMode,
    pub a: AMode,
    /// Master seed; used when the caller does not supply one explicitly.
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn from_json(json: &str) -> Result<Self> {
        let spec: ScenarioSpec = serde_json::from_str(json)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::InvalidScenario("need at least one job".into()));
        }
        if self.processors == 0 {
            return Err(Error::InvalidScenario("need at least one processor".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidScenario("need at least one slot".into()));
        }
        if matches!(self.decay, DecayMode::PiecewiseLinear) && self.horizon < PIECEWISE_SEGMENT_SLOTS
        {
            return Err(Error::InvalidScenario(format!(
                "piecewise-linear decay needs a horizon of at least {PIECEWISE_SEGMENT_SLOTS} slots"
            )));
        }
        Ok(())
    }

    /// The triage scenario: `N = 6` operating rooms, `T = 144` ten-minute
    /// slots, lognormal service times, piecewise-linear health decay.
    pub fn patient(jobs: usize) -> Self {
        ScenarioSpec {
            jobs,
            processors: 6,
            horizon: 144,
            pmf: PmfMode::patient(),
            decay: DecayMode::PiecewiseLinear,
            a: AMode::FixedOne,
            seed: 0,
        }
    }
}

/// Draws one random instance. Per job: the pmf family (uniform over the four
/// kinds when heterogeneous), `a` (fixed at 1 or `U[0, 1]`), the decay shape
/// (uniform over the three kinds when heterogeneous), `b ~ U[0, 1]`, and
/// `c ~ Uniform{1, ..., T}`. The same seed yields the same instance.
pub fn sample_instance<R: Rng + ?Sized>(spec: &ScenarioSpec, rng: &mut R) -> Result<Instance> {
    spec.validate()?;
    let slots = spec.horizon;
    let mut jobs = Vec::with_capacity(spec.jobs);
    for id in 0..spec.jobs {
        let pmf = match &spec.pmf {
            PmfMode::Fixed { kind } => kind.make(draw_a(spec.a, rng), slots)?,
            PmfMode::Heterogeneous => {
                let kind = PmfKind::ALL[rng.random_range(0..PmfKind::ALL.len())];
                kind.make(draw_a(spec.a, rng), slots)?
            }
            PmfMode::Lognormal {
                shift_minutes,
                slot_minutes,
                log_mean_range,
                log_sd_range,
            } => {
                let m = rng.random_range(log_mean_range.0..=log_mean_range.1);
                let s = rng.random_range(log_sd_range.0..=log_sd_range.1);
                discretize_lognormal(*shift_minutes, m, s, *slot_minutes, slots)?
            }
        };
        let decay = match &spec.decay {
            DecayMode::Fixed { kind } => draw_decay(*kind, slots, rng)?,
            DecayMode::Heterogeneous => {
                let kind = DecayShape::ALL[rng.random_range(0..DecayShape::ALL.len())];
                draw_decay(kind, slots, rng)?
            }
            DecayMode::PiecewiseLinear => gen_piecewise_linear_decay(slots, rng)?,
        };
        jobs.push(Job::new(id, pmf, decay));
    }
    let max_deadline = jobs.iter().map(|j| j.decay.deadline()).max().unwrap_or(0);
    Instance::new(jobs, spec.processors, slots.max(max_deadline + 1))
}

fn draw_a<R: Rng + ?Sized>(mode: AMode, rng: &mut R) -> f64 {
    match mode {
        AMode::FixedOne => 1.0,
        AMode::Uniform => rng.random(),
    }
}

fn draw_decay<R: Rng + ?Sized>(shape: DecayShape, slots: u32, rng: &mut R) -> Result<DecayFunction> {
    let b: f64 = rng.random();
    let c: u32 = rng.random_range(1..=slots);
    shape.make(b, c)
}
