//! Criterion benchmarks for the annotation pipeline; see `benches/`.
