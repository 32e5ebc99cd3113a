//! Chained polar coding for the two-receiver broadcast channel with
//! confidential messages.
//!
//! The crate is `no_std` and only needs an allocator. It contains the
//! source model, the polarization transform and successive-cancellation
//! engine, index-set construction, the k-block chained encoders and
//! decoders, a memoryless broadcast channel, and exact small-block oracles
//! for the divergence, randomness and leakage quantities of the scheme.
//! File formats, caching and the command line live in the `polarsec` crate.

#![no_std]

extern crate alloc;

pub mod chain;
pub mod channel;
pub mod error;
pub mod math;
pub mod metrics;
pub mod polar;
pub mod sets;
pub mod source;

pub use chain::{BobEstimate, ChainConfig, ChainState, EveEstimate, PublicBundle, SeedBundle, SessionMessages, Transcript};
pub use channel::BroadcastChannel;
pub use error::{ChainError, MetricsError, PolarError, SetsError, SourceError};
pub use polar::{Action, IndexRule, Layer, LayerModel, ScContext};
pub use sets::{EntropyProfile, IndexSetFamily, Method, ProfileSet, RateReport};
pub use source::{JointSource, RateTuple, Var, VarSet};
