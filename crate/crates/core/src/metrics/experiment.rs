//! End-to-end error-rate experiments.

use rand::Rng;

use crate::chain::{ChainConfig, SessionMessages};
use crate::channel::BroadcastChannel;
use crate::error::MetricsError;
use crate::math::sqrt_f;

/// Error count over a number of trials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Proportion {
    pub errors: u64,
    pub trials: u64,
}

impl Proportion {
    pub fn record(&mut self, error: bool) {
        self.trials += 1;
        self.errors += u64::from(error);
    }

    pub fn merge(&mut self, other: &Proportion) {
        self.errors += other.errors;
        self.trials += other.trials;
    }

    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.errors as f64 / self.trials as f64
        }
    }

    /// Wilson score interval at normal quantile `z`.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        if self.trials == 0 {
            return (0.0, 1.0);
        }
        let n = self.trials as f64;
        let p = self.rate();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * sqrt_f(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
        ((centre - half).max(0.0), (centre + half).min(1.0))
    }
}

/// Outcome of one session.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TrialOutcome {
    pub bob_common: bool,
    pub eve_common: bool,
    pub bob_secret: bool,
    pub bob_secret_private: bool,
    pub bob_flagged: bool,
    pub eve_flagged: bool,
}

/// Error statistics per message class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorStats {
    /// `P[Ô ≠ O]`.
    pub bob_common: Proportion,
    /// `P[Ô̂ ≠ O]` (Eve).
    pub eve_common: Proportion,
    /// `P[Ŝ ≠ S]`.
    pub bob_secret: Proportion,
    /// `P[(Ŝ, M̂) ≠ (S, M)]`.
    pub bob_secret_private: Proportion,
    /// Sessions in which one of Bob's SC passes hit an impossible prefix.
    pub bob_flagged: Proportion,
    pub eve_flagged: Proportion,
}

impl ErrorStats {
    pub fn record(&mut self, t: &TrialOutcome) {
        self.bob_common.record(t.bob_common);
        self.eve_common.record(t.eve_common);
        self.bob_secret.record(t.bob_secret);
        self.bob_secret_private.record(t.bob_secret_private);
        self.bob_flagged.record(t.bob_flagged);
        self.eve_flagged.record(t.eve_flagged);
    }

    pub fn merge(&mut self, o: &ErrorStats) {
        self.bob_common.merge(&o.bob_common);
        self.eve_common.merge(&o.eve_common);
        self.bob_secret.merge(&o.bob_secret);
        self.bob_secret_private.merge(&o.bob_secret_private);
        self.bob_flagged.merge(&o.bob_flagged);
        self.eve_flagged.merge(&o.eve_flagged);
    }

    pub fn trials(&self) -> u64 {
        self.bob_common.trials
    }
}

/// Encodes random messages, sends them through `channel` and decodes at
/// both receivers.
pub fn run_trial<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    rng: &mut R,
) -> Result<TrialOutcome, MetricsError> {
    let msgs = SessionMessages::random(cfg, rng);
    let mut tr = cfg.encode_session(&msgs, rng)?;
    cfg.transmit(&mut tr, channel, rng)?;
    let ys: alloc::vec::Vec<_> = tr.blocks.iter().map(|b| b.y.clone()).collect();
    let zs: alloc::vec::Vec<_> = tr.blocks.iter().map(|b| b.z.clone()).collect();
    let bob = cfg.bob_decode(&ys, &tr.public, &tr.seed)?;
    let eve = cfg.eve_decode(&zs, &tr.public)?;
    let secret = bob.s != msgs.s;
    Ok(TrialOutcome {
        bob_common: bob.o != msgs.o,
        eve_common: eve.o != msgs.o,
        bob_secret: secret,
        bob_secret_private: secret || bob.m != msgs.m,
        bob_flagged: bob.common_failed.iter().chain(&bob.secret_failed).any(|&f| f),
        eve_flagged: eve.failed.iter().any(|&f| f),
    })
}

/// Sequential experiment over `trials` sessions.
pub fn error_rate_experiment<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    trials: usize,
    rng: &mut R,
) -> Result<ErrorStats, MetricsError> {
    if trials == 0 {
        return Err(MetricsError::NoTrials);
    }
    let mut stats = ErrorStats::default();
    for _ in 0..trials {
        stats.record(&run_trial(cfg, channel, rng)?);
    }
    Ok(stats)
}
