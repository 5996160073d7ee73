//! Scenario files and the experiments run on them.

mod config;
mod experiments;

pub use config::{ChannelConfig, MeasurementConfig, OracleConfig, ReachConfig, Scenario, SCHEMA_VERSION};
pub use experiments::{
    calibrate_accidental_ref, curve_plot_script, BasisVisibility, VISIBILITY_BASES, records_visibility, CurveRow, Evaluation, LinkPoint, ReachReport,
    TomographySummary, CURVE_CSV_HEADER,
};
