//! Datasets, the evaluation protocol, parameter sweeps, run configuration
//! and reporting.

mod config;
mod fixtures;
mod pairs;
mod protocol;
pub mod report;
mod sweep;

pub use config::{
    OptimizeConfig, PhaseSpec, Preset, RunConfig, SweepConfig, TriggerSource, WaveformConfig,
    WaveformShape,
};
pub use fixtures::{
    fixture_dataset, fixture_image, fixture_path, generate_fixture_set, texture_image,
    FIXTURE_HEIGHT, FIXTURE_RANGE, FIXTURE_WIDTH, SAMPLES_PER_IDENTITY,
};
pub use pairs::{Dataset, PairSet};
pub use protocol::{
    bootstrap_rates, run_protocol, EvalReport, PairKind, PairRecord, PostFilter, ProtocolConfig,
    RateSummary, NON_VICTIM_NOTE,
};
pub use sweep::{
    apply_sweep_value, run_sweep, SweepAxis, SweepRow, SweepTable, SweepValue, MAX_INTENSITY_RATIO,
    SWEEP_CSV_HEADER,
};
