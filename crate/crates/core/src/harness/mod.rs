//! Experiment runner: refinement studies, error tables, bound checks and
//! field output.

mod config;
mod experiments;
mod export;
mod quadcheck;
mod run;

pub use config::{CflConfig, ExperimentConfig, LimitMode, MeshConfig, SchemeSettings, SlopeConfig};
pub use experiments::{experiment_by_name, Experiment, ExperimentRegistry, Preset};
pub use export::{export_field, read_csv_samples, ExportFormat};
pub use quadcheck::{quadcheck, CheckLine};
pub use run::{
    error_table, observed_order, run_experiment, run_level, snapshots_csv, table_csv, write_report, ErrorTableRow,
    LevelResult, Report, Snapshot, LINF_SAMPLING,
};
