//! Criterion benchmarks for the varfrac solvers; see `benches/`.
