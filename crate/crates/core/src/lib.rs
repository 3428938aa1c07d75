//! Multi-perspective cost-effectiveness analysis on Markov cohort models.
//!
//! A run keeps direct medical, productivity and out-of-pocket costs in
//! separate ledgers, so health-system and societal results come from one
//! simulation. Around the engine sit probabilistic sensitivity analysis
//! ([`psa`]), equity weighting ([`dcea`]), value of information and value of
//! perspective ([`voi`]), one-way and Sobol sensitivity ([`sensitivity`]),
//! budget impact ([`bia`]) and the end-to-end [`pipeline`].
//!
//! The guide in `book/` covers each of these with worked examples.

pub mod bia;
pub mod cea;
pub mod config;
pub mod dcea;
pub mod error;
pub mod markov;
pub mod pipeline;
pub mod psa;
pub mod sensitivity;
pub mod voi;

pub use error::{Error, Result};

// The guide's code samples are compiled and run as doctests of these
// otherwise empty modules, one module per chapter so a failure points at
// its chapter.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/getting-started.md")]
    mod getting_started {}
    #[doc = include_str!("../../../book/src/configuration.md")]
    mod configuration {}
    #[doc = include_str!("../../../book/src/markov.md")]
    mod markov {}
    #[doc = include_str!("../../../book/src/perspectives.md")]
    mod perspectives {}
    #[doc = include_str!("../../../book/src/psa.md")]
    mod psa {}
    #[doc = include_str!("../../../book/src/equity.md")]
    mod equity {}
    #[doc = include_str!("../../../book/src/voi.md")]
    mod voi {}
    #[doc = include_str!("../../../book/src/sensitivity.md")]
    mod sensitivity {}
    #[doc = include_str!("../../../book/src/budget-impact.md")]
    mod budget_impact {}
    #[doc = include_str!("../../../book/src/results-schema.md")]
    mod results_schema {}
}
