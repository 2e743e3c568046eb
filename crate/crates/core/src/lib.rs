//! Set-based Newton refinement of Pareto front approximations under the
//! averaged Hausdorff distance Δp, with reference-set generation from MOEA
//! populations and an experiment harness.

// `!(a < b)` deliberately rejects NaN; ZDT3 arc ends keep every digit
#![allow(
    clippy::neg_cmp_op_on_partial_ord,
    clippy::excessive_precision,
    clippy::needless_range_loop,
    clippy::type_complexity
)]

pub mod autodiff;
pub mod error;
pub mod experiment;
pub mod indicators;
pub mod io;
pub mod moea;
pub mod mop;
pub mod newton;
pub mod numerics;
pub mod problems;
pub mod refset;

pub use error::{DpnError, Result};
pub use experiment::{ComparisonRow, ExperimentConfig, SeedResult, Source, Summary, Verdict};
pub use indicators::{delta2, delta_p, IndicatorReport, NearestAssignment};
pub use moea::{ingest_archive, run_nsga2, MoeaConfig};
pub use mop::{AutoDiffMop, Bounds, EvaluatedPoint, Mop, SetIterate, SharedMop};
pub use newton::{
    newton_loop, ActiveSet, BranchRule, ConstraintLayout, NewtonConfig, NewtonParams, NewtonRun, NewtonTrace, StepMode,
};
pub use problems::{make_problem, ProblemOverrides};
pub use refset::{build_reference_set, merge_and_clean, CleanConfig, CleanReport, PopulationArchive, ReferenceSet, Tier};
