//! Run orchestration: configs, the benchmark, pretraining, evaluation and sweeps.

pub mod benchmark;
pub mod config;
pub mod evaluate;
pub mod pretrain;
pub mod sweep;

pub use benchmark::{Benchmark, BenchmarkSpec};
pub use config::{RunConfig, ResolvedRun};
pub use evaluate::{bundled_baseline, load_report, regenerate_report, run_eval, run_eval_on, EvalOptions};
pub use pretrain::{run_pretrain, run_pretrain_on, PretrainOptions, RunManifest, RunStatus};
pub use sweep::{comparison_table, expand, parse_axis, run_sweep, Axis, SweepEntry, SweepResult};
