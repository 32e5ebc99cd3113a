//! Information leaked to Eve: exact at tiny `N`, plug-in estimates beyond.

use alloc::vec;
use alloc::vec::Vec;

use hashbrown::HashMap;
use rand::Rng;

use crate::chain::{ChainConfig, SessionMessages};
use crate::channel::BroadcastChannel;
use crate::error::MetricsError;
use crate::math::{entropy, ln_f, log2_f};

use super::bounds::{delta_star, BoundReport};
use super::law::{exact_induced_law, LawVar};

/// Exact leakage quantities of one configuration and channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageReport {
    pub k: usize,
    /// `I(S_{1:k}; Ψ^U_1 Φ^U_{1:k} Z_{1:k})`.
    pub total: f64,
    /// `I(S_i; Z_i Φ^U_i Ψ^U_1)` per block.
    pub per_block: Vec<f64>,
    /// `I(S_i Ψ^{V|U}_{i−1}; Z_i Φ^U_i Ψ^U_1)` for blocks `2..=k`
    /// (block 1 uses `S_1` alone).
    pub block_secrecy: Vec<f64>,
    /// `I(Ψ^{X|V}_1; Z_i Ψ^{V|U}_{i−1} S_i Φ^U_i Ψ^U_i)` for blocks `2..=k`.
    pub prefix_independence: Vec<f64>,
    /// `L̃_i = I(S_{1:k}; Ψ^U_1 Φ^U_{1:i} Z_{1:i})` for `i = 1..=k`.
    pub l_tilde: Vec<f64>,
    /// `Σ_i |S_i|`.
    pub secret_bits: usize,
    pub delta_star: f64,
}

impl LeakageReport {
    /// Hard rows: nonnegativity, the secret-length cap and per-block ≤
    /// session. Soft rows: the `δ^(*)` bounds, the step bound
    /// `L̃_{i+1} − L̃_i ≤ 3δ^(*)`, the measured step bound
    /// `L̃_{i+1} − L̃_i ≤ 2·block_secrecy + prefix_independence`, and
    /// `total ≤ Σ per_block + 3(k−1)·max measured block term`.
    pub fn bound_rows(&self) -> Vec<BoundReport> {
        let ds = self.delta_star;
        let mut rows = vec![
            BoundReport::new("leakage_nonnegative", 0, -self.total, 0.0, true),
            BoundReport::new("leakage_at_most_secret_bits", 0, self.total, self.secret_bits as f64, true),
        ];
        for (i, &b) in self.per_block.iter().enumerate() {
            rows.push(BoundReport::new("block_at_most_session", i + 1, b, self.total, true));
        }
        for (t, &v) in self.block_secrecy.iter().enumerate().skip(1) {
            rows.push(BoundReport::new("block_secrecy", t + 1, v, ds, false));
        }
        for (t, &v) in self.prefix_independence.iter().enumerate() {
            rows.push(BoundReport::new("prefix_independence", t + 2, v, ds, false));
        }
        for i in 1..self.k {
            let step = self.l_tilde[i] - self.l_tilde[i - 1];
            rows.push(BoundReport::new("leakage_step", i, step, 3.0 * ds, false));
            let measured = 2.0 * self.block_secrecy[i] + self.prefix_independence[i - 1];
            rows.push(BoundReport::new("leakage_step_measured", i, step, measured, false));
        }
        rows.push(BoundReport::new(
            "leakage_total",
            0,
            self.total,
            (3.0 * self.k as f64 - 2.0) * ds,
            false,
        ));
        let cap = self
            .block_secrecy
            .iter()
            .chain(&self.prefix_independence)
            .fold(0.0f64, |m, &v| m.max(v));
        let sum: f64 = self.per_block.iter().sum();
        rows.push(BoundReport::new(
            "session_at_most_blocks_plus_cap",
            0,
            self.total,
            sum + 3.0 * (self.k as f64 - 1.0) * cap,
            false,
        ));
        rows
    }
}

/// Computes every leakage quantity from one exact session law.
pub fn leakage_exact(cfg: &ChainConfig, channel: &BroadcastChannel) -> Result<LeakageReport, MetricsError> {
    let k = cfg.k();
    let mut vars = vec![LawVar::PsiU1, LawVar::PsiXV1];
    for i in 1..=k {
        vars.extend([LawVar::S(i), LawVar::PhiU(i), LawVar::Z(i), LawVar::PsiVU(i), LawVar::PsiU(i)]);
    }
    let law = exact_induced_law(cfg, channel, &vars)?;
    let s_all: Vec<LawVar> = (1..=k).map(LawVar::S).collect();
    let observed = |upto: usize| {
        let mut o = vec![LawVar::PsiU1];
        for i in 1..=upto {
            o.push(LawVar::PhiU(i));
            o.push(LawVar::Z(i));
        }
        o
    };
    let l_tilde = (1..=k).map(|i| law.mutual_information(&s_all, &observed(i))).collect::<Result<Vec<_>, _>>()?;
    let total = l_tilde[k - 1];
    let mut per_block = Vec::with_capacity(k);
    let mut block_secrecy = Vec::with_capacity(k);
    let mut prefix_independence = Vec::new();
    for i in 1..=k {
        let eve = [LawVar::Z(i), LawVar::PhiU(i), LawVar::PsiU1];
        let own = law.mutual_information(&[LawVar::S(i)], &eve)?;
        per_block.push(own);
        if i == 1 {
            block_secrecy.push(own);
        } else {
            block_secrecy.push(law.mutual_information(&[LawVar::S(i), LawVar::PsiVU(i - 1)], &eve)?);
            prefix_independence.push(law.mutual_information(
                &[LawVar::PsiXV1],
                &[LawVar::Z(i), LawVar::PsiVU(i - 1), LawVar::S(i), LawVar::PhiU(i), LawVar::PsiU(i)],
            )?);
        }
    }
    let secret_bits = (1..=k).map(|i| cfg.message_lengths(i).map(|l| l[1])).sum::<Result<usize, _>>()?;
    Ok(LeakageReport {
        k,
        total,
        per_block,
        block_secrecy,
        prefix_independence,
        l_tilde,
        secret_bits,
        delta_star: delta_star(cfg.n_len(), cfg.sets().delta),
    })
}

/// What Eve's observation is reduced to before histogramming.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZSummary {
    /// The full channel outputs of every block.
    Full,
    /// Eve's SC hard decisions on the secret positions, given her own
    /// common-message estimate.
    Projection,
}

impl ZSummary {
    /// Full outputs when they take at most `2^16` values, else projection.
    pub fn for_config(cfg: &ChainConfig) -> Self {
        let bits = (cfg.n_len() * cfg.k()) as f64 * log2_f(cfg.source().card_z() as f64);
        if bits <= 16.0 {
            ZSummary::Full
        } else {
            ZSummary::Projection
        }
    }
}

/// One session's secret bits and Eve's summary of it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeakageSample {
    pub secret: Vec<u8>,
    pub summary: Vec<u32>,
}

/// Runs one session and reduces Eve's view with `summary`.
pub fn leakage_sample<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    summary: ZSummary,
    rng: &mut R,
) -> Result<LeakageSample, MetricsError> {
    let msgs = SessionMessages::random(cfg, rng);
    let mut tr = cfg.encode_session(&msgs, rng)?;
    cfg.transmit(&mut tr, channel, rng)?;
    let zs: Vec<Vec<u32>> = tr.blocks.iter().map(|b| b.z.clone()).collect();
    let secret: Vec<u8> = msgs.s.concat();
    let summary = match summary {
        ZSummary::Full => zs.concat(),
        ZSummary::Projection => {
            let eve = cfg.eve_decode(&zs, &tr.public)?;
            let proj = cfg.eve_secret_projection(&zs, &eve)?;
            proj.concat().into_iter().map(u32::from).collect()
        }
    };
    Ok(LeakageSample { secret, summary })
}

/// Plug-in mutual information estimate with its Miller–Madow bias term.
#[derive(Debug, Clone, PartialEq)]
pub struct LeakageEstimate {
    pub trials: usize,
    /// Plug-in estimate in bits; biased upward at small sample sizes.
    pub plugin: f64,
    /// First-order bias of the plug-in estimate.
    pub bias: f64,
    /// `max(plugin − bias, 0)`.
    pub corrected: f64,
    /// Whether the estimate sums per-coordinate terms instead of using the
    /// joint histogram of all secret bits.
    pub per_coordinate: bool,
}

/// Secret lengths up to this many bits use the joint histogram.
pub const JOINT_HISTOGRAM_BITS: usize = 20;

fn plugin_mi<A, B>(pairs: impl Iterator<Item = (A, B)>, n: f64) -> (f64, f64)
where
    A: core::hash::Hash + Eq + Clone,
    B: core::hash::Hash + Eq + Clone,
{
    let mut ha: HashMap<A, f64> = HashMap::new();
    let mut hb: HashMap<B, f64> = HashMap::new();
    let mut hab: HashMap<(A, B), f64> = HashMap::new();
    for (a, b) in pairs {
        *ha.entry(a.clone()).or_insert(0.0) += 1.0;
        *hb.entry(b.clone()).or_insert(0.0) += 1.0;
        *hab.entry((a, b)).or_insert(0.0) += 1.0;
    }
    // Hash order varies between runs, so the counts are summed in sorted order.
    let h = |counts: &mut dyn Iterator<Item = &f64>| {
        let mut c: Vec<f64> = counts.copied().collect();
        c.sort_by(f64::total_cmp);
        entropy(c.into_iter().map(|c| c / n))
    };
    let mi = h(&mut ha.values()) + h(&mut hb.values()) - h(&mut hab.values());
    let bias = (hab.len() as f64 - ha.len() as f64 - hb.len() as f64 + 1.0) / (2.0 * n * ln_f(2.0));
    (mi.max(0.0), bias)
}

impl LeakageEstimate {
    pub fn from_samples(samples: &[LeakageSample]) -> Result<Self, MetricsError> {
        if samples.is_empty() {
            return Err(MetricsError::NoTrials);
        }
        let n = samples.len() as f64;
        let width = samples[0].secret.len();
        let (plugin, bias, per_coordinate) = if width <= JOINT_HISTOGRAM_BITS {
            let (mi, b) = plugin_mi(samples.iter().map(|s| (&s.secret, &s.summary)), n);
            (mi, b, false)
        } else {
            let paired = samples[0].summary.len() == width;
            let mut mi = 0.0;
            let mut b = 0.0;
            for j in 0..width {
                let (m, bb) = if paired {
                    plugin_mi(samples.iter().map(|s| (s.secret[j], s.summary[j])), n)
                } else {
                    plugin_mi(samples.iter().map(|s| (s.secret[j], &s.summary)), n)
                };
                mi += m;
                b += bb;
            }
            (mi, b, true)
        };
        Ok(LeakageEstimate {
            trials: samples.len(),
            plugin,
            bias,
            corrected: (plugin - bias).max(0.0),
            per_coordinate,
        })
    }
}

/// Sequential estimate over `trials` sessions.
pub fn leakage_estimate<R: Rng + ?Sized>(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    trials: usize,
    summary: ZSummary,
    rng: &mut R,
) -> Result<LeakageEstimate, MetricsError> {
    if trials == 0 {
        return Err(MetricsError::NoTrials);
    }
    let samples = (0..trials)
        .map(|_| leakage_sample(cfg, channel, summary, rng))
        .collect::<Result<Vec<_>, _>>()?;
    LeakageEstimate::from_samples(&samples)
}
