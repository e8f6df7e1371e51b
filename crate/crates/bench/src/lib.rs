//! Benchmarks only; run with `cargo bench -p hyperlap-bench`.
