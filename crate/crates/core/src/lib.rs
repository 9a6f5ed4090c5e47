// `!(x > 0.0)` style checks are deliberate: they reject NaN too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Adaptive cooperative-teaching engine.
//!
//! A teacher tracks a student's per-sub-skill knowledge with a 1PL model
//! whose proficiency drifts as a Wiener process, fits it online by MAP from
//! segment performance ratios, and picks the next sub-skill to train by a
//! one-step lookahead on expected mastery gain.

pub mod envs;
pub mod error;
pub mod harness;
pub mod inference;
pub mod par;
pub mod planner;
pub mod seed;
pub mod session;
pub mod skill_model;
pub mod students;

pub use error::{Error, Result};
