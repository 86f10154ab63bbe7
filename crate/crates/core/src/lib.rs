// Negated float comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnose;
pub mod models;
pub mod nuts;
pub mod ode;
pub mod predictive;
pub mod prob;
pub mod target;
