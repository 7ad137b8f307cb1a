//! Criterion benchmarks for the simulation and tomography pipeline; see
//! `benches/pipeline.rs`. Run with `cargo bench -p spinlattice-bench`.
