//! Local stability and dissipativity certification for nonlinear systems
//! through polynomial surrogates with certified error bounds.

pub mod approx;
pub mod cert;
pub mod expr;
pub mod pipeline;
pub mod poly;
pub mod sos;
