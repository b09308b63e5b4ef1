//! Canned experiment definitions and runners: the small-scale optimality-ratio
//! tables, the large-scale job-sweep curves, and the patient-triage scenario.
//! Runners emit CSV artifacts that are byte-identical across reruns with the
//! same seed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::generators::{AMode, DecayMode, DecayShape, PmfKind, PmfMode, ScenarioSpec};
use crate::policies::all_heuristics;
use crate::rng;
use crate::simulator::{
    estimate_alpha_multi, mc_csv_row, monte_carlo, AlphaEstimate, PolicyMcResult, MC_CSV_HEADER,
};

/// Paper-scale default replication count; override for fast runs.
pub const DEFAULT_REPS: usize = 1000;

/// `a` handling of the small-table experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableVariant {
    /// `a = 1` for every service-time distribution.
    FixedA,
    /// `a ~ U[0, 1]` per job.
    RandomA,
}

impl TableVariant {
    fn a_mode(self) -> AMode {
        match self {
            TableVariant::FixedA => AMode::FixedOne,
            TableVariant::RandomA => AMode::Uniform,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TableVariant::FixedA => "fixed-a",
            TableVariant::RandomA => "random-a",
        }
    }
}

/// Row labels of the small table: the four pmf kinds plus a heterogeneous row.
pub const TABLE_PMF_ROWS: [(&str, Option<PmfKind>); 5] = [
    ("uniform", Some(PmfKind::Uniform)),
    ("decreasing", Some(PmfKind::Decreasing)),
    ("increasing", Some(PmfKind::Increasing)),
    ("bathtub", Some(PmfKind::Bathtub)),
    ("heterogeneous", None),
];

/// Column labels: the three decay shapes plus a heterogeneous column.
pub const TABLE_DECAY_COLS: [(&str, Option<DecayShape>); 4] = [
    ("step", Some(DecayShape::Step)),
    ("linear", Some(DecayShape::Linear)),
    ("exponential", Some(DecayShape::Exponential)),
    ("heterogeneous", None),
];

/// One cell of the small table: optimality-ratio estimates per policy.
#[derive(Debug, Clone, Serialize)]
pub struct TableCell {
    pub pmf: String,
    pub decay: String,
    pub estimates: Vec<AlphaEstimate>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableResult {
    pub variant: String,
    pub reps: usize,
    pub seed: u64,
    pub cells: Vec<TableCell>,
}

impl TableResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,pmf,decay,policy,reps,mean,std_error,zero_value_reps\n");
        for cell in &self.cells {
            for est in &cell.estimates {
                writeln!(
                    out,
                    "{},{},{},{},{},{:.6},{:.6},{}",
                    self.variant,
                    cell.pmf,
                    cell.decay,
                    est.policy,
                    est.stats.n,
                    est.stats.mean,
                    est.stats.std_error,
                    est.zero_value_reps
                )
                .expect("writing to a string cannot fail");
            }
        }
        out
    }

    pub fn cell(&self, pmf: &str, decay: &str) -> &TableCell {
        self.cells
            .iter()
            .find(|c| c.pmf == pmf && c.decay == decay)
            .expect("known cell label")
    }
}

impl TableCell {
    pub fn estimate(&self, policy: &str) -> &AlphaEstimate {
        self.estimates
            .iter()
            .find(|e| e.policy == policy)
            .expect("known policy name")
    }
}

/// The 5 x 4 (pmf x decay) grid at `J = 5`, `N = 2`, `T = 5`, solved exactly
/// per replication. Instances are shared across policies within a cell.
pub fn run_table_small(variant: TableVariant, reps: usize, seed: u64) -> Result<TableResult> {
    let policies = all_heuristics();
    let refs: Vec<&dyn crate::policies::Policy> = policies.iter().map(|p| p.as_ref()).collect();
    let mut cells = Vec::new();
    for (row, (pmf_name, pmf_kind)) in TABLE_PMF_ROWS.iter().enumerate() {
        for (col, (decay_name, decay_shape)) in TABLE_DECAY_COLS.iter().enumerate() {
            let spec = ScenarioSpec {
                jobs: 5,
                processors: 2,
                horizon: 5,
                pmf: match pmf_kind {
                    Some(kind) => PmfMode::Fixed { kind: *kind },
                    None => PmfMode::Heterogeneous,
                },
                decay: match decay_shape {
                    Some(kind) => DecayMode::Fixed { kind: *kind },
                    None => DecayMode::Heterogeneous,
                },
                a: variant.a_mode(),
                seed: 0,
            };
            let estimates =
                estimate_alpha_multi(&spec, &refs, reps, rng::derive(seed, &[row as u64, col as u64]))?;
            cells.push(TableCell {
                pmf: pmf_name.to_string(),
                decay: decay_name.to_string(),
                estimates,
            });
        }
    }
    Ok(TableResult {
        variant: variant.name().to_string(),
        reps,
        seed,
        cells,
    })
}

/// Decay axis of the large-scale panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureDecay {
    Step,
    Heterogeneous,
}

/// Pmf axis of the large-scale panels. The decreasing family at `T = 50` is
/// indistinguishable from a geometric distribution, hence the label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigurePmf {
    Geometric,
    Heterogeneous,
}

pub const FIGURE_JOB_COUNTS: [usize; 6] = [10, 20, 30, 40, 50, 60];
pub const FIGURE_PANELS: [(FigureDecay, FigurePmf); 4] = [
    (FigureDecay::Step, FigurePmf::Geometric),
    (FigureDecay::Heterogeneous, FigurePmf::Geometric),
    (FigureDecay::Step, FigurePmf::Heterogeneous),
    (FigureDecay::Heterogeneous, FigurePmf::Heterogeneous),
];

/// One point of a job sweep: the per-policy Monte Carlo aggregates.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub spec: ScenarioSpec,
    pub results: Vec<PolicyMcResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveResult {
    pub name: String,
    pub reps: usize,
    pub seed: u64,
    pub points: Vec<CurvePoint>,
}

impl CurveResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(MC_CSV_HEADER);
        out.push('\n');
        for point in &self.points {
            for result in &point.results {
                out.push_str(&mc_csv_row(&self.name, &point.spec, result, self.seed));
                out.push('\n');
            }
        }
        out
    }

    pub fn point(&self, jobs: usize) -> &CurvePoint {
        self.points
            .iter()
            .find(|p| p.spec.jobs == jobs)
            .expect("known job count")
    }
}

impl CurvePoint {
    pub fn result(&self, policy: &str) -> &PolicyMcResult {
        self.results
            .iter()
            .find(|r| r.policy == policy)
            .expect("known policy name")
    }
}

pub fn figure_panel_name(decay: FigureDecay, pmf: FigurePmf, a: AMode) -> String {
    format!(
        "figure-large-{}-{}-{}",
        match a {
            AMode::FixedOne => "a1",
            AMode::Uniform => "rand-a",
        },
        match decay {
            FigureDecay::Step => "step",
            FigureDecay::Heterogeneous => "het-decay",
        },
        match pmf {
            FigurePmf::Geometric => "geo",
            FigurePmf::Heterogeneous => "het-pmf",
        }
    )
}

/// One large-scale panel: `N = 5`, `T = 50`, `J` swept over
/// `{10, 20, ..., 60}`, simulated under common random numbers.
pub fn run_figure_large(
    decay: FigureDecay,
    pmf: FigurePmf,
    a: AMode,
    reps: usize,
    seed: u64,
) -> Result<CurveResult> {
    let policies = all_heuristics();
    let refs: Vec<&dyn crate::policies::Policy> = policies.iter().map(|p| p.as_ref()).collect();
    let mut points = Vec::new();
    for (idx, jobs) in FIGURE_JOB_COUNTS.iter().enumerate() {
        let spec = ScenarioSpec {
            jobs: *jobs,
            processors: 5,
            horizon: 50,
            pmf: match pmf {
                FigurePmf::Geometric => PmfMode::Fixed {
                    kind: PmfKind::Decreasing,
                },
                FigurePmf::Heterogeneous => PmfMode::Heterogeneous,
            },
            decay: match decay {
                FigureDecay::Step => DecayMode::Fixed {
                    kind: DecayShape::Step,
                },
                FigureDecay::Heterogeneous => DecayMode::Heterogeneous,
            },
            a,
            seed: 0,
        };
        let results = monte_carlo(&spec, &refs, reps, rng::derive(seed, &[idx as u64]))?;
        points.push(CurvePoint { spec, results });
    }
    Ok(CurveResult {
        name: figure_panel_name(decay, pmf, a),
        reps,
        seed,
        points,
    })
}

pub const PATIENT_JOB_COUNTS: [usize; 7] = [50, 75, 100, 125, 150, 175, 200];

/// The triage scenario: `N = 6` operating rooms, 24 hours of 10-minute slots,
/// lognormal procedure times, piecewise-linear health decay, and the patient
/// count swept over `{50, 75, ..., 200}`.
pub fn run_patient(reps: usize, seed: u64) -> Result<CurveResult> {
    let policies = all_heuristics();
    let refs: Vec<&dyn crate::policies::Policy> = policies.iter().map(|p| p.as_ref()).collect();
    let mut points = Vec::new();
    for (idx, jobs) in PATIENT_JOB_COUNTS.iter().enumerate() {
        let spec = ScenarioSpec::patient(*jobs);
        let results = monte_carlo(&spec, &refs, reps, rng::derive(seed, &[idx as u64]))?;
        points.push(CurvePoint { spec, results });
    }
    Ok(CurveResult {
        name: "patient".to_string(),
        reps,
        seed,
        points,
    })
}

/// The four reproducible experiment suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    TableSmallFixedA,
    TableSmallRandomA,
    FigureLarge,
    Patient,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 4] = [
        ExperimentName::TableSmallFixedA,
        ExperimentName::TableSmallRandomA,
        ExperimentName::FigureLarge,
        ExperimentName::Patient,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentName::TableSmallFixedA => "table-small-fixed-a",
            ExperimentName::TableSmallRandomA => "table-small-random-a",
            ExperimentName::FigureLarge => "figure-large",
            ExperimentName::Patient => "patient",
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentName::ALL
            .into_iter()
            .find(|n| n.as_str() == s)
            .ok_or_else(|| Error::InvalidScenario(format!("unknown experiment '{s}'")))
    }
}

/// A fully specified experiment run.
#[derive(Debug, Clone)]
pub struct ExperimentDef {
    pub name: ExperimentName,
    pub reps: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
}

/// Runs the experiment and writes its CSV artifacts under `out_dir`,
/// returning the written paths.
pub fn run_experiment(def: &ExperimentDef) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(&def.out_dir)?;
    let mut written = Vec::new();
    let mut emit = |name: &str, contents: &str| -> Result<()> {
        let path = def.out_dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
        Ok(())
    };
    match def.name {
        ExperimentName::TableSmallFixedA => {
            let table = run_table_small(TableVariant::FixedA, def.reps, def.seed)?;
            emit("table-small-fixed-a.csv", &table.to_csv())?;
        }
        ExperimentName::TableSmallRandomA => {
            let table = run_table_small(TableVariant::RandomA, def.reps, def.seed)?;
            emit("table-small-random-a.csv", &table.to_csv())?;
        }
        ExperimentName::FigureLarge => {
            for a in [AMode::FixedOne, AMode::Uniform] {
                for (decay, pmf) in FIGURE_PANELS {
                    let curve = run_figure_large(decay, pmf, a, def.reps, def.seed)?;
                    emit(&format!("{}.csv", curve.name), &curve.to_csv())?;
                }
            }
        }
        ExperimentName::Patient => {
            let curve = run_patient(def.reps, def.seed)?;
            emit("patient.csv", &curve.to_csv())?;
        }
    }
    Ok(written)
}

/// Convenience wrapper for callers that already have an output directory.
pub fn reproduce(name: ExperimentName, reps: usize, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>> {
    run_experiment(&ExperimentDef {
        name,
        reps,
        seed,
        out_dir: out_dir.to_path_buf(),
    })
}
