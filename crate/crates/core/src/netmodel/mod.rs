//! Coupled power/gas system data: case format, distribution factors,
//! operating points with constraint residuals, and synthetic cases.

mod case;
mod generate;
mod point;
mod ptdf;

pub use case::*;
pub use generate::{generate_case, generate_case_with_witness, generate_tiny_case};
pub use point::{residuals, CostBreakdown, OperatingPoint, Residuals};
pub use ptdf::{bus_factors, compute_ptdf, Ptdf};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CaseError {
    #[error("malformed case document: {0}")]
    Syntax(String),
    #[error("{0}")]
    MissingField(String),
    #[error("dangling reference in {0}")]
    DanglingReference(String),
    #[error("{element}: profile has {got} entries, expected {expected}")]
    ProfileLength {
        element: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid case: {0}")]
    Invalid(String),
    #[error("network: {0}")]
    Network(String),
}
