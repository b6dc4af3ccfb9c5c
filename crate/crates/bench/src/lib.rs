//! Criterion benchmarks for the allocator and the closed-loop simulation.
//! See `benches/`.
