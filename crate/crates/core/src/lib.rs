//! A desk-scale laboratory for model-stealing attacks and defenses.
//!
//! The crate trains small classifiers ([`nncore`]), builds the datasets each
//! party uses ([`data`]), serves predictions through a defense ([`defense`]),
//! mounts extraction attacks against that query interface ([`attacks`]) and
//! measures the resulting security/accuracy trade-off ([`eval`]).
//! [`experiment`] ties the pieces into reproducible experiment runs.

pub mod attacks;
pub mod cli;
mod codec;
pub mod data;
pub mod defense;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod nncore;
pub mod prob;
pub mod rng;

pub use error::{Error, Result};
