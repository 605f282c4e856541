//! Desk-scale Trajectory-Based Operations simulator: airline FOC planning,
//! FF-ICE style negotiation with simulated eASP validation engines, and a
//! deterministic discrete-event network.

// `!(x > 0.0)` is used deliberately throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airspace;
pub mod geo;
pub mod perf;
pub mod trajectory;
pub mod foc;
pub mod scenario;
pub mod planning;
pub mod route;
pub mod vertical;
pub mod protocol;
pub mod validator;
pub mod stats;
pub mod sim;
pub mod report;
