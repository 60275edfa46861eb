//! Benchmark-only crate; see `benches/forward.rs`.
