//! Criterion benchmarks for the solver and network engine live in `benches/`.
