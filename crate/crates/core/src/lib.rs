//! Simulated-learner curriculum experiments and a staged coaching pipeline.
//!
//! The crate has two halves:
//!
//! * inter-skill coaching: a simulated learner ([`learner`], [`population`]),
//!   Gaussian knowledge tracing ([`tracer`]), curriculum policies
//!   ([`curriculum`]) and the Monte-Carlo experiment harness ([`sim`]);
//! * intra-skill coaching: the post-episode pipeline turning frame
//!   observations into feedback and robot adjustments ([`coach`]).

pub mod coach;
pub mod curriculum;
pub mod error;
pub mod learner;
pub mod population;
pub mod sim;
pub mod tracer;

pub use error::{Error, Result};
