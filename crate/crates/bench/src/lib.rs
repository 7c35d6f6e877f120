//! Criterion benchmarks for `nsdde-core`; see `benches/`.
