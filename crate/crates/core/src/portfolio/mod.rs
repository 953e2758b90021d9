//! Demand statistics, the period cost function and its exact brute-force oracle.

mod instance;
mod model;
mod usage;

pub use instance::{
    brute_force_solve, build_cost_diagonal, cost_of_bitstring, risk_diagonal, InstanceConfig,
    OracleResult, MAX_ORACLE_DIM,
};
pub use model::{estimate_model, DemandModel};
pub use usage::{
    ingest_usage_csv, read_usage, synth_usage, write_usage, write_usage_csv, SynthProfile,
    UsageRecords, HOURS_PER_DAY,
};

/// Formats a float with 17 significant digits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
