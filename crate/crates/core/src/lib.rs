//! Developmental visual diets for self-supervised learning.
//!
//! Curricula over color saturation and acuity ([`schedule`]), the image operators that
//! realize them ([`transforms`], [`augment`]), a corruption suite ([`corruptions`]),
//! procedural datasets ([`datasets`]), the temporal contrastive and distillation objectives
//! with their trainer ([`ssl`]), evaluation ([`eval`]) and run orchestration ([`run`]).

pub mod augment;
pub mod corruptions;
pub mod datasets;
pub mod error;
pub mod eval;
pub mod fsio;
pub mod image;
pub mod run;
pub mod schedule;
pub mod seed;
pub mod ssl;
pub mod transforms;

pub use error::{Error, Result};
