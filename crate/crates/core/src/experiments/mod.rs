//! Scripted experiments: the linear 2-D case study, the center illustration,
//! and the pollution sweep.

mod case_study;
mod center;
pub mod stats;
mod sweep;

pub use case_study::{
    case_study_csv, case_study_points_csv, case_study_table, run_case_study, CaseStudyConfig, CaseStudyReport, CloudPoint,
    CASE_STUDY_POINTS_HEADER, REFERENCE_RATIOS, REFERENCE_VOLUMES,
};
pub use center::{
    center_csv, center_points_csv, center_report, center_table, run_center_illustration, CenterIllustrationReport,
};
pub use sweep::{
    parse_sweep_csv, run_pollution_sweep, split_pools, RunOutcome, SweepConfig, SweepMethod, SweepReport, SweepRow,
    DEFAULT_PROPORTIONS, SCHEMA_LINE, SWEEP_HEADER,
};
