//! Error types, one enum per concern.

use alloc::string::String;
use thiserror::Error;

use crate::polar::Layer;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("alphabet size of {var} must be {expected}, got {got}")]
    Cardinality { var: &'static str, expected: String, got: usize },
    #[error("table {table} has {got} entries, expected {expected}")]
    TableLength { table: &'static str, expected: usize, got: usize },
    #[error("table {table} entry {index} is not a finite nonnegative number ({value})")]
    BadEntry { table: &'static str, index: usize, value: f64 },
    #[error("channel row for x = {x} sums to {sum}, not 1")]
    RowSum { x: usize, sum: f64 },
    #[error("target and conditioning groups overlap")]
    OverlappingGroups,
    #[error("empty target group")]
    EmptyGroup,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PolarError {
    #[error("length {0} is not a power of two (at least 2)")]
    NotPowerOfTwo(usize),
    #[error("conditioning sequence has length {got}, expected {expected}")]
    ConditionLength { expected: usize, got: usize },
    #[error("conditioning symbol {symbol} out of range for alphabet of size {card}")]
    ConditionSymbol { symbol: u32, card: usize },
    #[error("index rule has length {got}, expected {expected}")]
    RuleLength { expected: usize, got: usize },
    #[error("prefix of length {prefix} is too long for block length {n}")]
    PrefixLength { prefix: usize, n: usize },
    #[error("prefix up to index {index} has zero probability under the model")]
    ZeroProbabilityPrefix { index: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetsError {
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error("exact profiles need N <= 16 and a domain of at most 2^26 points (N = {n}, domain 2^{log_domain:.1})")]
    ExactTooLarge { n: usize, log_domain: f64 },
    #[error("profile for layer {0:?} is missing")]
    MissingProfile(Layer),
    #[error("profiles disagree on block length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("beta must lie in (0, 0.5), got {0}")]
    BadBeta(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("common-message chaining infeasible: |I_UZ \\ I_UY| = {available} < |I_UY \\ I_UZ| = {required}")]
    InfeasibleCommon { available: usize, required: usize },
    #[error("secret chaining infeasible: |V_V|UZ| = {available} < |B_V|UY| = {required}")]
    InfeasibleSecret { available: usize, required: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error("k must be at least 1")]
    ZeroBlocks,
    #[error("block index {i} outside 1..={k}")]
    BlockIndex { i: usize, k: usize },
    #[error("index sets were built for N = {sets}, configuration uses N = {config}")]
    LengthMismatch { sets: usize, config: usize },
    #[error("{what} for block {block} has length {got}, expected {expected}")]
    MessageLength { what: &'static str, block: usize, expected: usize, got: usize },
    #[error("block {block} needs carried state `{what}` from the previous block")]
    MissingState { what: &'static str, block: usize },
    #[error("channel alphabets ({cy}, {cz}) do not match the source ({sy}, {sz})")]
    ChannelMismatch { cy: usize, cz: usize, sy: usize, sz: usize },
    #[error("expected {expected} received blocks, got {got}")]
    BlockCount { expected: usize, got: usize },
    #[error("infeasible set family: {0}")]
    Infeasible(SetsError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Polar(#[from] PolarError),
    #[error(transparent)]
    Chain(#[from] ChainError),
    #[error(transparent)]
    Sets(#[from] SetsError),
    #[error("exact law domain too large: {what} needs about 2^{log_size:.1} points (limit 2^24)")]
    DomainTooLarge { what: &'static str, log_size: f64 },
    #[error("distributions are defined on different domains")]
    DomainMismatch,
    #[error("variable {0} is not present in the law")]
    MissingVariable(String),
    #[error("at least one trial is required")]
    NoTrials,
}
