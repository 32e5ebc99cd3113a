//! Rate of model-sampled randomness consumed by each SC encoder.

use alloc::vec::Vec;

use rand::Rng;

use crate::chain::{ChainConfig, SessionMessages};
use crate::channel::BroadcastChannel;
use crate::error::MetricsError;
use crate::math::sqrt_f;
use crate::sets::difference;

use super::law::{exact_induced_law, LawVar};

/// The three encoders of a block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncoderLayer {
    Common,
    Secret,
    Prefix,
}

impl EncoderLayer {
    pub const ALL: [EncoderLayer; 3] = [EncoderLayer::Common, EncoderLayer::Secret, EncoderLayer::Prefix];

    pub fn tag(self) -> &'static str {
        match self {
            EncoderLayer::Common => "common",
            EncoderLayer::Secret => "secret",
            EncoderLayer::Prefix => "prefix",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// `(1/N) Σ_{j ∉ V} H(bit j | earlier bits, conditioning)` under the exact
/// induced law of block `block`.
pub fn residual_exact(cfg: &ChainConfig, layer: EncoderLayer, block: usize) -> Result<f64, MetricsError> {
    let channel = BroadcastChannel::from_source(cfg.source()).map_err(|_| MetricsError::DomainMismatch)?;
    let n = cfg.n_len();
    let sets = cfg.sets();
    let (target, cond, very_high) = match layer {
        EncoderLayer::Common => (LawVar::A(block), None, &sets.v_u),
        EncoderLayer::Secret => (LawVar::B(block), Some(LawVar::U(block)), &sets.v_v_u),
        EncoderLayer::Prefix => (LawVar::T(block), Some(LawVar::V(block)), &sets.v_x_v),
    };
    let mut vars = alloc::vec![target];
    vars.extend(cond);
    let law = exact_induced_law(cfg, &channel, &vars)?;
    let cond_vars: Vec<LawVar> = cond.into_iter().collect();
    let h = law.prefix_conditional_entropies(target, n, &cond_vars)?;
    let all: Vec<usize> = (0..n).collect();
    let sampled = difference(&all, very_high);
    Ok(0.0 + sampled.iter().map(|&j| h[j]).sum::<f64>() / n as f64)
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

impl MeanEstimate {
    pub fn from_values(values: &[f64]) -> Result<Self, MetricsError> {
        if values.is_empty() {
            return Err(MetricsError::NoTrials);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(MeanEstimate { mean, std_error: sqrt_f(var / n), samples: values.len() })
    }
}

/// Per-layer sampled-entropy rates of every block of one session.
pub fn residual_sample<R: Rng + ?Sized>(cfg: &ChainConfig, rng: &mut R) -> Result<Vec<[f64; 3]>, MetricsError> {
    let msgs = SessionMessages::random(cfg, rng);
    let tr = cfg.encode_session(&msgs, rng)?;
    let n = cfg.n_len() as f64;
    Ok(tr.blocks.iter().map(|b| b.sampled_entropy.map(|h| h / n)).collect())
}

/// Monte-Carlo estimate of the residual rate of `layer` in `block`. Each
/// session contributes `(1/N) Σ h_b(posterior)` over the sampled positions,
/// whose expectation is the exact residual rate.
pub fn residual_monte_carlo<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    layer: EncoderLayer,
    block: usize,
    sessions: usize,
    rng: &mut R,
) -> Result<MeanEstimate, MetricsError> {
    cfg.common_plan(block)?;
    let values = (0..sessions)
        .map(|_| residual_sample(cfg, rng).map(|v| v[block - 1][layer.slot()]))
        .collect::<Result<Vec<_>, _>>()?;
    MeanEstimate::from_values(&values)
}
