//! Seeded fan-out of Monte-Carlo work over rayon.
//!
//! Work is cut into fixed-size chunks whose count does not depend on the
//! thread count. Chunk `c` of a task draws from its own ChaCha8 stream, and
//! results are merged in chunk order, so output is identical for any
//! `--threads`.

use polarsec_core::metrics::{
    leakage_sample, residual_sample, run_trial, ErrorStats, LeakageEstimate, LeakageSample, ZSummary,
};
use polarsec_core::sets::{exact_profile, ProfileAccumulator};
use polarsec_core::{BroadcastChannel, ChainConfig, JointSource, Layer, Method, MetricsError, ProfileSet, SetsError};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub const PROFILE_CHUNK: usize = 250;
pub const TRIAL_CHUNK: usize = 50;

/// Generator for chunk `chunk` of the task `(label, n, k)` under `seed`.
pub fn stream(seed: u64, label: &str, n: usize, k: usize, chunk: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    h.update((n as u64).to_le_bytes());
    h.update((k as u64).to_le_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(chunk);
    rng
}

fn chunks(total: usize, size: usize) -> Vec<(u64, usize)> {
    (0..total.div_ceil(size))
        .map(|c| (c as u64, size.min(total - c * size)))
        .collect()
}

/// All eight layer profiles at block length `n`.
pub fn profiles(source: &JointSource, n: usize, method: Method, samples: usize, seed: u64) -> Result<ProfileSet, SetsError> {
    match method {
        Method::Exact => {
            let p: Result<Vec<_>, _> = Layer::ALL.par_iter().map(|&l| exact_profile(source, l, n)).collect();
            ProfileSet::new(p?)
        }
        Method::MonteCarlo => {
            if samples == 0 {
                return Err(SetsError::NoSamples);
            }
            let parts: Result<Vec<ProfileAccumulator>, SetsError> = chunks(samples, PROFILE_CHUNK)
                .into_par_iter()
                .map(|(c, count)| {
                    let mut acc = ProfileAccumulator::new(&Layer::ALL, n)?;
                    acc.accumulate(source, count, &mut stream(seed, "profile", n, 0, c));
                    Ok(acc)
                })
                .collect();
            let mut parts = parts?.into_iter();
            let mut total = parts.next().expect("at least one chunk");
            for p in parts {
                total.merge(&p);
            }
            ProfileSet::new(total.finish()?)
        }
    }
}

/// Error statistics over `trials` sessions.
pub fn error_stats(cfg: &ChainConfig, channel: &BroadcastChannel, trials: usize, seed: u64) -> Result<ErrorStats, MetricsError> {
    let (n, k) = (cfg.n_len(), cfg.k());
    let parts: Result<Vec<ErrorStats>, MetricsError> = chunks(trials, TRIAL_CHUNK)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = stream(seed, "errors", n, k, c);
            let mut stats = ErrorStats::default();
            for _ in 0..count {
                stats.record(&run_trial(cfg, channel, &mut rng)?);
            }
            Ok(stats)
        })
        .collect();
    let mut total = ErrorStats::default();
    for p in parts? {
        total.merge(&p);
    }
    Ok(total)
}

/// Plug-in leakage estimate over `trials` sessions.
pub fn leakage(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    trials: usize,
    summary: ZSummary,
    seed: u64,
) -> Result<LeakageEstimate, MetricsError> {
    let (n, k) = (cfg.n_len(), cfg.k());
    let parts: Result<Vec<Vec<LeakageSample>>, MetricsError> = chunks(trials, TRIAL_CHUNK)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = stream(seed, "leakage", n, k, c);
            (0..count).map(|_| leakage_sample(cfg, channel, summary, &mut rng)).collect()
        })
        .collect();
    let samples: Vec<LeakageSample> = parts?.into_iter().flatten().collect();
    LeakageEstimate::from_samples(&samples)
}

/// Per-session residual rates, `[block][layer]`, over `sessions` sessions.
pub fn residual_samples(cfg: &ChainConfig, sessions: usize, seed: u64) -> Result<Vec<Vec<[f64; 3]>>, MetricsError> {
    let (n, k) = (cfg.n_len(), cfg.k());
    let parts: Result<Vec<Vec<Vec<[f64; 3]>>>, MetricsError> = chunks(sessions, TRIAL_CHUNK)
        .into_par_iter()
        .map(|(c, count)| {
            let mut rng = stream(seed, "residual", n, k, c);
            (0..count).map(|_| residual_sample(cfg, &mut rng)).collect()
        })
        .collect();
    Ok(parts?.into_iter().flatten().collect())
}
