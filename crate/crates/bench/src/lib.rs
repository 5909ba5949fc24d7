//! Criterion benchmarks for the detector bank live in `benches/`.
