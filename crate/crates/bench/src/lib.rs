//! Criterion benchmarks for the layout engine live under `benches/`.
