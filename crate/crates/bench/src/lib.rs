//! Criterion benchmarks for the simulation, oracle, defense and search hot paths; see `benches/`.
