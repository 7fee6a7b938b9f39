//! LED parameter search.

pub mod cma;
mod fitness;
mod params;
mod search;

pub use cma::{Bounds, Candidate, CmaEs, CmaState};
pub use fitness::{fitness, fitness_of_waveform, FitnessConfig, FitnessOutcome, DEFAULT_ATTEMPTS};
pub use params::{
    default_optimized_params, ParamKind, ParamVector, SearchSpace, DEFAULT_MAX_FREQUENCY_HZ,
    DEFAULT_MIN_FREQUENCY_HZ,
};
pub use search::{
    cma_search, write_history_csv, BestRecord, Checkpoint, Search, SearchResult, CHECKPOINT_VERSION,
};
