//! Comparison algorithms: the monolithic piecewise-linear MILP, classic
//! Benders with a nonconvex all-period gas subproblem, and a brute-force
//! grid oracle for tiny cases.

pub mod bd;
pub mod oracle;
pub mod pwl;

pub use bd::{
    aggregated_cut, newton_gas, run_bd, BdConfig, BdLayout, BdOutcome, BdStatus, BdSubproblemState,
    NewtonConfig, NewtonOutcome, NewtonStatus,
};
pub use oracle::{brute_force, OracleError, OracleResult, ORACLE_BUDGET};
pub use pwl::{build_pwl, run_pwl, PwlConfig, PwlOutcome, PwlStats};
