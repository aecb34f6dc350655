//! Criterion benchmarks for `fragrd-core`; see `benches/`.
