//! Benchmarks for the surface and volume pipelines live in `benches/`.
