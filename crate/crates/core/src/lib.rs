//! Slow-fast IS-LM economies with liquidity-trap bends in the LM curve.
//!
//! The crate covers the behavioural model ([`model`]), the geometry of the
//! IS curve and the multivalued LM isocline ([`geometry`]), full and
//! singular-limit simulation with jump and cycle detection ([`dynamics`]),
//! fiscal and monetary interventions ([`policy`]) and file formats ([`io`]).

// `!(x > 0.0)` is how NaN gets rejected along with the rest
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod ode;
pub mod policy;
pub mod presets;
pub mod roots;
pub mod validate;

pub use error::{Error, Result};
pub use geometry::{
    find_equilibria, is_curve, lm_roots, shift_lm, trace_lm_isocline, Domain, Equilibrium,
    LmIsocline, TraceOptions,
};
pub use model::{build_three_phase_money, short_rate, IsBlock, ModelParams, ModelSpec, MoneyBlock, TrapWindow};
