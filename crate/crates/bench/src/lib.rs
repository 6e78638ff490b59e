//! Criterion benchmarks for the core kernels. See `benches/`.
