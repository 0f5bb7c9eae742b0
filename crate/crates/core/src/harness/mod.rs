//! Reproducible Monte Carlo experiments: configuration, sweeps, and output.

pub mod config;
pub mod output;
pub mod sweep;

pub use config::{
    CsiMode, EarlyStop, EstimationSettings, ExperimentConfig, PilotSettings, ProfileSource, SnrGrid, WaveformConfig,
    WaveformPreset, WindowName, CONFIG_SCHEMA_VERSION,
};
pub use output::{csv_string, emit_csv, emit_plot, emit_plot_series, parse_csv, plot_svg, CSV_HEADER};
pub use sweep::{run_ber_sweep, run_nmse_sweep, Experiment, RunOptions, SweepResult, SweepRow};
