//! Benchmark orchestration: configuration, scenario materialization, predictor
//! invocation and scoring.

pub mod config;
pub mod materialize;
pub mod predictor;
pub mod run;

pub use config::{BenchmarkConfig, BuiltinPredictor, CommandTemplate, PredictorRef, Regimes};
pub use materialize::{materialize_scenario, Materialized, SeedEntry};
pub use predictor::{invoke_predictor, predict_builtin, predict_degraded_oracle, PredictionRequest, Predictions};
pub use run::{plan_scenarios, run_benchmark, run_benchmark_with, run_scenario, ScenarioRecord, REPORT_FILE};
