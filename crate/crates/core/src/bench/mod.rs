//! Benchmark model families and the experiment runner.

mod gen;
mod run;

pub use gen::{bench_queries, example_evidence, gen_model, Family};
pub use run::{run_bench, to_csv, to_gnuplot, BenchConfig, BenchRow, Status};
