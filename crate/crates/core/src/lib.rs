//! A trapdoor pseudorandom generator and the classification task built on it.
//!
//! The pipeline: generate Blum-integer keys ([`numtheory`]), walk the squaring
//! permutation backward to produce bits ([`bbs`]), package those bits into a
//! labeled two-class dataset ([`task`]), classify records efficiently with the
//! trapdoor ([`classify`]), and measure attacks and trapdoor-free baselines
//! against the same data ([`adversary`]).

pub mod adversary;
pub mod bbs;
pub mod bits;
pub mod classify;
pub mod error;
pub mod numtheory;
pub mod rng;
pub mod task;

pub use adversary::{AttackResult, EvalReport};
pub use bits::{BitString, PackedBits};
pub use classify::{ClassifierConfig, SupportDistance};
pub use error::{Error, Result};
pub use numtheory::{BlumPrime, TrapdoorKey};
pub use task::{Dataset, LabeledSample, TaskParams};
