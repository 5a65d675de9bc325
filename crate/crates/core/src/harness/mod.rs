//! Grid search on dev splits, in-domain and cross-domain test evaluation,
//! and result tables.

mod config;
mod experiment;
mod grid;
mod table;

pub use config::{load_experiment, parse_experiment, LoadedExperiment};
pub use experiment::{
    retention_rows, run_experiment, tune_method, BinarySource, Domain, ExperimentConfig, ExperimentResult, InputKey,
    MethodKind, MethodSpec, Relation, ResultRow, RetentionRow, TuningRecord,
};
pub use grid::{
    evaluate_point, grid_search, retention, GridPoint, GridSpec, Objective, Predictor, Setting, TraceEntry,
    TuneOptions, TunedParams,
};
pub use table::{render_results_text, write_report_csv, write_results_csv, write_retention_csv, write_trace_csv};
