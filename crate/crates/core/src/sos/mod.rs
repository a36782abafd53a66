//! Sum-of-squares programs for local stability and dissipativity, and
//! their compilation to one SDP via Gram matrices.

mod build;
mod param;
mod program;
mod supply;

use thiserror::Error;

pub use build::{
    build_dissipativity_bernstein, build_dissipativity_exact, build_dissipativity_taylor,
    build_stability_bernstein, build_stability_exact, build_stability_taylor, BuildOptions,
    TaylorVariant,
};
pub use param::{Assignment, DecVar, LinExpr, ParamPoly};
pub use program::{
    compile_to_sdp, gram_basis, gram_polynomial, CompiledSos, ErrorSymbol, IndexSymbol,
    Multiplier, Objective, SosConstraint, SosProblem, VarRole,
};
pub use supply::{make_supply, Index, SupplyKind, SupplyParams, SupplyPoly, SupplyRate};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SosError {
    #[error("constraint `{constraint}`: coefficient of {monomial:?} must equal {value} but no decision variable reaches it")]
    InfeasibleEqualities { constraint: String, monomial: Vec<u32>, value: f64 },
    #[error("multiplier `{0}` has an empty basis")]
    EmptyBasis(String),
    #[error("program has no equality constraints")]
    Trivial,
    #[error("supply rate: {0}")]
    Supply(String),
    #[error("supply rate matrix {0} is not symmetric")]
    AsymmetricSupply(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("region: {0}")]
    Region(String),
}
