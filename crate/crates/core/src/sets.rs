//! Entropy profiles, polarization index sets and rate accounting.
//!
//! An [`EntropyProfile`] holds per-position conditional entropies
//! `H(A_i | A^{<i}, side)` of one layer, either computed exactly by
//! enumeration (small N) or estimated by averaging `h_b` of genie-aided SC
//! posteriors over samples of the true source. [`build_sets`] thresholds the
//! eight profiles at `δ_N` and `1 − δ_N` and derives the chaining sets.
//! All positions are 0-based and every set is a sorted list.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::SetsError;
use crate::math::{delta_n, log2_f, log2_len, sqrt_f};
use crate::polar::{transform_in_place, Layer, LayerModel, ScContext, ScWorkspace};
use crate::source::{JointSource, Symbol, SymbolSampler};

/// How a profile was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Exact,
    MonteCarlo,
}

impl Method {
    pub fn tag(self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::MonteCarlo => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyProfile {
    pub layer: Layer,
    pub n_len: usize,
    pub entropies: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub samples: usize,
    pub method: Method,
    /// Standard error of the block average `(1/N) Σ_i Ĥ_i`.
    pub aggregate_se: f64,
}

impl EntropyProfile {
    /// `(1/N) Σ_i Ĥ_i`.
    pub fn mean(&self) -> f64 {
        self.entropies.iter().sum::<f64>() / self.n_len as f64
    }

    pub fn above(&self, threshold: f64) -> Vec<usize> {
        self.entropies
            .iter()
            .enumerate()
            .filter(|(_, &h)| h > threshold)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Largest exact enumeration domain, `cond_card^N · 2^N`.
pub const EXACT_LOG_DOMAIN_LIMIT: f64 = 26.0;

/// Exact profile by enumeration of every conditioning sequence.
///
/// For each conditioning sequence `s`, the joint weights `P(a, s)` are
/// arranged with `a_1` as the most significant bit so prefix marginals are
/// sums of adjacent pairs. With `E_i(s) = −Σ P(a^{1:i}, s) log2 P(a^{1:i}, s)`
/// the profile is `H_i = Σ_s (E_i(s) − E_{i−1}(s))`.
pub fn exact_profile(source: &JointSource, layer: Layer, n_len: usize) -> Result<EntropyProfile, SetsError> {
    log2_len(n_len).ok_or(crate::error::PolarError::NotPowerOfTwo(n_len))?;
    let model = LayerModel::new(source, layer);
    let cond_card = model.cond_card();
    let log_domain = n_len as f64 * (log2_f(cond_card as f64) + 1.0);
    if n_len > 16 || log_domain > EXACT_LOG_DOMAIN_LIMIT {
        return Err(SetsError::ExactTooLarge { n: n_len, log_domain });
    }
    let size = 1usize << n_len;
    let perm = polar_permutation(n_len);
    let probs = model.probs();
    let mut e = vec![0.0f64; n_len + 1];
    let mut joint = vec![0.0f64; size];
    let mut table = vec![0.0f64; size];
    let mut s = vec![0usize; n_len];
    loop {
        let p_s: f64 = s.iter().map(|&c| probs[c][0] + probs[c][1]).product();
        if p_s > 0.0 {
            fill_joint(&s, probs, &mut joint);
            for (x_idx, &w) in joint.iter().enumerate() {
                table[perm[x_idx]] = w;
            }
            let mut len = size;
            for i in (0..=n_len).rev() {
                e[i] += table[..len].iter().map(|&p| xlogx(p)).sum::<f64>();
                if i > 0 {
                    len /= 2;
                    for k in 0..len {
                        table[k] = table[2 * k] + table[2 * k + 1];
                    }
                }
            }
        }
        if !advance(&mut s, cond_card) {
            break;
        }
    }
    let entropies = (1..=n_len).map(|i| (e[i] - e[i - 1]).clamp(0.0, 1.0)).collect();
    Ok(EntropyProfile {
        layer,
        n_len,
        entropies,
        std_errors: vec![0.0; n_len],
        samples: 0,
        method: Method::Exact,
        aggregate_se: 0.0,
    })
}

fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        -p * log2_f(p)
    } else {
        0.0
    }
}

/// `perm[x] = a` with `a = x·G_n`, bit `j` of a vector stored at
/// integer bit `N − 1 − j`.
pub fn polar_permutation(n_len: usize) -> Vec<usize> {
    let mut bits = vec![0u8; n_len];
    (0..1usize << n_len)
        .map(|x| {
            unpack_into(x, &mut bits);
            transform_in_place(&mut bits).expect("power of two");
            pack(&bits)
        })
        .collect()
}

/// Packs a bit vector, first bit most significant.
pub fn pack(bits: &[u8]) -> usize {
    bits.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
}

pub fn unpack_into(value: usize, bits: &mut [u8]) {
    let n = bits.len();
    for (j, b) in bits.iter_mut().enumerate() {
        *b = ((value >> (n - 1 - j)) & 1) as u8;
    }
}

fn fill_joint(s: &[usize], probs: &[[f64; 2]], joint: &mut [f64]) {
    let n = s.len();
    joint[0] = 1.0;
    let mut filled = 1;
    // Extend one position at a time; position j becomes the next lower bit.
    for &c in s.iter() {
        for k in (0..filled).rev() {
            let base = joint[k];
            joint[2 * k] = base * probs[c][0];
            joint[2 * k + 1] = base * probs[c][1];
        }
        filled *= 2;
    }
    debug_assert_eq!(filled, 1 << n);
}

fn advance(s: &mut [usize], card: usize) -> bool {
    for d in s.iter_mut().rev() {
        *d += 1;
        if *d < card {
            return true;
        }
        *d = 0;
    }
    false
}

/// Running sums for Monte-Carlo profiles of several layers. Accumulators
/// built from disjoint sample streams merge by addition.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAccumulator {
    n_len: usize,
    layers: Vec<Layer>,
    sums: Vec<Vec<f64>>,
    sq_sums: Vec<Vec<f64>>,
    block_sums: Vec<f64>,
    block_sq_sums: Vec<f64>,
    count: usize,
}

impl ProfileAccumulator {
    pub fn new(layers: &[Layer], n_len: usize) -> Result<Self, SetsError> {
        log2_len(n_len).ok_or(crate::error::PolarError::NotPowerOfTwo(n_len))?;
        let l = layers.len();
        Ok(ProfileAccumulator {
            n_len,
            layers: layers.to_vec(),
            sums: vec![vec![0.0; n_len]; l],
            sq_sums: vec![vec![0.0; n_len]; l],
            block_sums: vec![0.0; l],
            block_sq_sums: vec![0.0; l],
            count: 0,
        })
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Adds `samples` genie-aided SC passes on fresh source blocks.
    pub fn accumulate<R: Rng + ?Sized>(&mut self, source: &JointSource, samples: usize, rng: &mut R) {
        let n = self.n_len;
        let sampler = SymbolSampler::new(source);
        let models: Vec<LayerModel> = self.layers.iter().map(|&l| LayerModel::new(source, l)).collect();
        let mut ws = ScWorkspace::new(n);
        let mut block = vec![Symbol { u: 0, v: 0, x: 0, y: 0, z: 0 }; n];
        let mut cond = vec![0u32; n];
        let mut truth = vec![0u8; n];
        let mut h = vec![0.0; n];
        for _ in 0..samples {
            for sym in block.iter_mut() {
                *sym = sampler.draw(rng);
            }
            for (li, model) in models.iter().enumerate() {
                let layer = model.layer();
                for (j, sym) in block.iter().enumerate() {
                    cond[j] = symbol_cond(model, layer, sym);
                    truth[j] = target_bit(layer, sym);
                }
                transform_in_place(&mut truth).expect("power of two");
                let ctx = ScContext::new(model, &cond).expect("valid conditioning");
                ws.genie_entropies(&ctx, &truth, &mut h);
                let mut total = 0.0;
                for ((s, q), &v) in self.sums[li].iter_mut().zip(self.sq_sums[li].iter_mut()).zip(&h) {
                    *s += v;
                    *q += v * v;
                    total += v;
                }
                let avg = total / n as f64;
                self.block_sums[li] += avg;
                self.block_sq_sums[li] += avg * avg;
            }
            self.count += 1;
        }
    }

    pub fn merge(&mut self, other: &ProfileAccumulator) {
        assert_eq!(self.n_len, other.n_len);
        assert_eq!(self.layers, other.layers);
        for (a, b) in self.sums.iter_mut().zip(&other.sums) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        for (a, b) in self.sq_sums.iter_mut().zip(&other.sq_sums) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
        self.block_sums.iter_mut().zip(&other.block_sums).for_each(|(x, y)| *x += y);
        self.block_sq_sums.iter_mut().zip(&other.block_sq_sums).for_each(|(x, y)| *x += y);
        self.count += other.count;
    }

    pub fn finish(&self) -> Result<Vec<EntropyProfile>, SetsError> {
        if self.count == 0 {
            return Err(SetsError::NoSamples);
        }
        let c = self.count as f64;
        let se = |sum: f64, sq: f64| {
            if self.count < 2 {
                return 0.0;
            }
            let var = ((sq - sum * sum / c) / (c - 1.0)).max(0.0);
            sqrt_f(var / c)
        };
        Ok(self
            .layers
            .iter()
            .enumerate()
            .map(|(li, &layer)| EntropyProfile {
                layer,
                n_len: self.n_len,
                entropies: self.sums[li].iter().map(|s| (s / c).clamp(0.0, 1.0)).collect(),
                std_errors: self.sums[li].iter().zip(&self.sq_sums[li]).map(|(&s, &q)| se(s, q)).collect(),
                samples: self.count,
                method: Method::MonteCarlo,
                aggregate_se: se(self.block_sums[li], self.block_sq_sums[li]),
            })
            .collect())
    }
}

fn target_bit(layer: Layer, sym: &Symbol) -> u8 {
    match layer.target() {
        crate::source::Var::U => sym.u,
        crate::source::Var::V => sym.v,
        _ => sym.x,
    }
}

fn symbol_cond(model: &LayerModel, layer: Layer, sym: &Symbol) -> u32 {
    let mut parts = [0u32; 2];
    let mut k = 0;
    for v in layer.cond().iter() {
        parts[k] = match v {
            crate::source::Var::U => sym.u as u32,
            crate::source::Var::V => sym.v as u32,
            crate::source::Var::X => sym.x as u32,
            crate::source::Var::Y => sym.y,
            crate::source::Var::Z => sym.z,
        };
        k += 1;
    }
    model.cond_code(&parts[..k])
}

/// Profiles of several layers from one shared sample stream (Monte-Carlo)
/// or by enumeration (exact).
pub fn estimate_profiles<R: Rng + ?Sized>(
    source: &JointSource,
    layers: &[Layer],
    n_len: usize,
    method: Method,
    samples: usize,
    rng: &mut R,
) -> Result<Vec<EntropyProfile>, SetsError> {
    match method {
        Method::Exact => layers.iter().map(|&l| exact_profile(source, l, n_len)).collect(),
        Method::MonteCarlo => {
            if samples == 0 {
                return Err(SetsError::NoSamples);
            }
            let mut acc = ProfileAccumulator::new(layers, n_len)?;
            acc.accumulate(source, samples, rng);
            acc.finish()
        }
    }
}

pub fn estimate_profile<R: Rng + ?Sized>(
    source: &JointSource,
    layer: Layer,
    n_len: usize,
    method: Method,
    samples: usize,
    rng: &mut R,
) -> Result<EntropyProfile, SetsError> {
    Ok(estimate_profiles(source, &[layer], n_len, method, samples, rng)?.remove(0))
}

/// The eight layer profiles at one block length.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSet {
    pub n_len: usize,
    pub profiles: Vec<EntropyProfile>,
}

impl ProfileSet {
    pub fn new(profiles: Vec<EntropyProfile>) -> Result<Self, SetsError> {
        let n_len = profiles.first().map(|p| p.n_len).ok_or(SetsError::MissingProfile(Layer::U))?;
        if let Some(p) = profiles.iter().find(|p| p.n_len != n_len) {
            return Err(SetsError::LengthMismatch(n_len, p.n_len));
        }
        let set = ProfileSet { n_len, profiles };
        for l in Layer::ALL {
            set.get(l)?;
        }
        Ok(set)
    }

    pub fn get(&self, layer: Layer) -> Result<&EntropyProfile, SetsError> {
        self.profiles.iter().find(|p| p.layer == layer).ok_or(SetsError::MissingProfile(layer))
    }

    /// All eight profiles for `source`.
    pub fn estimate<R: Rng + ?Sized>(
        source: &JointSource,
        n_len: usize,
        method: Method,
        samples: usize,
        rng: &mut R,
    ) -> Result<Self, SetsError> {
        Self::new(estimate_profiles(source, &Layer::ALL, n_len, method, samples, rng)?)
    }
}

/// The thresholded sets before derivation.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PrimarySets {
    pub n_len: usize,
    pub h_u: Vec<usize>,
    pub v_u: Vec<usize>,
    pub h_u_y: Vec<usize>,
    pub h_u_z: Vec<usize>,
    pub v_v_u: Vec<usize>,
    pub v_v_uz: Vec<usize>,
    pub h_v_uy: Vec<usize>,
    pub v_v_uy: Vec<usize>,
    pub v_x_v: Vec<usize>,
    pub v_x_vz: Vec<usize>,
}

/// Every index set used by the chained scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexSetFamily {
    pub n_len: usize,
    pub beta: f64,
    pub delta: f64,
    pub h_u: Vec<usize>,
    pub v_u: Vec<usize>,
    pub h_u_y: Vec<usize>,
    pub h_u_z: Vec<usize>,
    pub v_v_u: Vec<usize>,
    pub v_v_uz: Vec<usize>,
    pub h_v_uy: Vec<usize>,
    pub v_v_uy: Vec<usize>,
    pub m_uvz: Vec<usize>,
    pub v_x_v: Vec<usize>,
    pub v_x_vz: Vec<usize>,
    pub i_uy: Vec<usize>,
    pub i_uz: Vec<usize>,
    pub a_uyz: Vec<usize>,
    pub b_v_uy: Vec<usize>,
    /// Positions of `Ψ^{V|U}`: `V_{V|UY} ∪ ((H_{V|UY} \ V_{V|UY}) ∩ V_{V|U})`.
    pub psi_vu: Vec<usize>,
    /// Positions of `Φ^{V|U}`: `(H_{V|UY} \ V_{V|UY}) \ V_{V|U}`.
    pub phi_vu: Vec<usize>,
    /// Positions of `Φ^U`: `(H_{U|Y} ∪ H_{U|Z}) \ V_U`.
    pub phi_u: Vec<usize>,
}

pub fn difference(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_err()).collect()
}

pub fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.binary_search(x).is_ok()).collect()
}

pub fn union(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

pub fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.iter().all(|x| b.binary_search(x).is_ok())
}

impl IndexSetFamily {
    /// Derives the chaining sets. Where a derived set cannot reach its
    /// required size it takes every eligible position; feasibility is
    /// checked separately by [`IndexSetFamily::check_feasible`].
    pub fn from_primary(p: PrimarySets, beta: f64, delta: f64) -> Self {
        let i_uy = difference(&p.v_u, &p.h_u_y);
        let i_uz = difference(&p.v_u, &p.h_u_z);
        let need_a = difference(&i_uy, &i_uz).len();
        let a_uyz: Vec<usize> = difference(&i_uz, &i_uy).into_iter().take(need_a).collect();
        let m_uvz = difference(&p.v_v_u, &p.v_v_uz);
        let h_minus_v = difference(&p.h_v_uy, &p.v_v_uy);
        let psi_vu = union(&p.v_v_uy, &intersection(&h_minus_v, &p.v_v_u));
        let phi_vu = difference(&h_minus_v, &p.v_v_u);
        let b_v_uy: Vec<usize> = p.v_v_uz.iter().copied().take(psi_vu.len()).collect();
        let phi_u = difference(&union(&p.h_u_y, &p.h_u_z), &p.v_u);
        IndexSetFamily {
            n_len: p.n_len,
            beta,
            delta,
            h_u: p.h_u,
            v_u: p.v_u,
            h_u_y: p.h_u_y,
            h_u_z: p.h_u_z,
            v_v_u: p.v_v_u,
            v_v_uz: p.v_v_uz,
            h_v_uy: p.h_v_uy,
            v_v_uy: p.v_v_uy,
            m_uvz,
            v_x_v: p.v_x_v,
            v_x_vz: p.v_x_vz,
            i_uy,
            i_uz,
            a_uyz,
            b_v_uy,
            psi_vu,
            phi_vu,
            phi_u,
        }
    }

    /// `|I_UZ \ I_UY| ≥ |I_UY \ I_UZ|` and `|V_{V|UZ}| ≥ |B_{V|UY}|`.
    pub fn check_feasible(&self) -> Result<(), SetsError> {
        let required = difference(&self.i_uy, &self.i_uz).len();
        let available = difference(&self.i_uz, &self.i_uy).len();
        if available < required {
            return Err(SetsError::InfeasibleCommon { available, required });
        }
        if self.v_v_uz.len() < self.psi_vu.len() {
            return Err(SetsError::InfeasibleSecret { available: self.v_v_uz.len(), required: self.psi_vu.len() });
        }
        Ok(())
    }

    /// Names of the structural properties that fail (empty when all hold).
    pub fn invariant_violations(&self) -> Vec<&'static str> {
        let mut bad = Vec::new();
        let mut check = |ok: bool, name: &'static str| {
            if !ok {
                bad.push(name);
            }
        };
        let all = [
            &self.h_u, &self.v_u, &self.h_u_y, &self.h_u_z, &self.v_v_u, &self.v_v_uz, &self.h_v_uy,
            &self.v_v_uy, &self.m_uvz, &self.v_x_v, &self.v_x_vz, &self.i_uy, &self.i_uz, &self.a_uyz,
            &self.b_v_uy, &self.psi_vu, &self.phi_vu, &self.phi_u,
        ];
        check(
            all.iter().all(|s| s.windows(2).all(|w| w[0] < w[1]) && s.iter().all(|&i| i < self.n_len)),
            "sets sorted and in range",
        );
        check(is_subset(&self.v_u, &self.h_u), "V_U ⊆ H_U");
        check(is_subset(&self.v_v_uy, &self.h_v_uy), "V_V|UY ⊆ H_V|UY");
        check(is_subset(&self.v_v_uz, &self.v_v_u), "V_V|UZ ⊆ V_V|U");
        check(is_subset(&self.v_x_vz, &self.v_x_v), "V_X|VZ ⊆ V_X|V");
        check(is_subset(&self.v_v_uy, &self.v_v_u), "V_V|UY ⊆ V_V|U");
        check(self.i_uy == difference(&self.v_u, &self.h_u_y), "I_UY = V_U \\ H_U|Y");
        check(self.i_uz == difference(&self.v_u, &self.h_u_z), "I_UZ = V_U \\ H_U|Z");
        check(self.m_uvz == difference(&self.v_v_u, &self.v_v_uz), "M_UVZ = V_V|U \\ V_V|UZ");
        check(is_subset(&self.a_uyz, &difference(&self.i_uz, &self.i_uy)), "A_UYZ ⊆ I_UZ \\ I_UY");
        check(
            self.a_uyz.len() == difference(&self.i_uy, &self.i_uz).len(),
            "|A_UYZ| = |I_UY \\ I_UZ|",
        );
        check(is_subset(&self.b_v_uy, &self.v_v_uz), "B_V|UY ⊆ V_V|UZ");
        check(self.b_v_uy.len() == self.psi_vu.len(), "|B_V|UY| = |Ψ^V|U|");
        bad
    }

    /// Positions of `Ψ^U_1`: `V_U \ I_UY`, or `V_U \ (I_UY ∩ I_UZ)` when `k = 1`.
    pub fn psi_u1_positions(&self, k: usize) -> Vec<usize> {
        if k == 1 {
            difference(&self.v_u, &intersection(&self.i_uy, &self.i_uz))
        } else {
            difference(&self.v_u, &self.i_uy)
        }
    }
}

/// Thresholds the eight profiles at `δ_N = 2^{-N^β}` (strict inequalities)
/// and derives the chaining sets.
///
/// Monte-Carlo noise can break the nesting that holds for exact
/// entropies, so `V_{V|UZ}`, `V_{V|UY}` and `V_{X|VZ}` are intersected with
/// `V_{V|U}` and `V_{X|V}` respectively.
pub fn build_sets(profiles: &ProfileSet, beta: f64) -> Result<IndexSetFamily, SetsError> {
    let family = build_sets_unchecked(profiles, beta)?;
    family.check_feasible()?;
    Ok(family)
}

/// [`build_sets`] without the chaining feasibility check.
pub fn build_sets_unchecked(profiles: &ProfileSet, beta: f64) -> Result<IndexSetFamily, SetsError> {
    if !(beta > 0.0 && beta < 0.5) {
        return Err(SetsError::BadBeta(beta));
    }
    let n = profiles.n_len;
    let delta = delta_n(n, beta);
    let hi = 1.0 - delta;
    let u = profiles.get(Layer::U)?;
    let v_v_u = profiles.get(Layer::VGivenU)?.above(hi);
    let v_x_v = profiles.get(Layer::XGivenV)?.above(hi);
    let vuy = profiles.get(Layer::VGivenUY)?;
    let primary = PrimarySets {
        n_len: n,
        h_u: u.above(delta),
        v_u: u.above(hi),
        h_u_y: profiles.get(Layer::UGivenY)?.above(delta),
        h_u_z: profiles.get(Layer::UGivenZ)?.above(delta),
        v_v_uz: intersection(&profiles.get(Layer::VGivenUZ)?.above(hi), &v_v_u),
        h_v_uy: vuy.above(delta),
        v_v_uy: intersection(&vuy.above(hi), &v_v_u),
        v_x_vz: intersection(&profiles.get(Layer::XGivenVZ)?.above(hi), &v_x_v),
        v_v_u,
        v_x_v,
    };
    Ok(IndexSetFamily::from_primary(primary, beta, delta))
}

/// Integer numerators behind a [`RateReport`]; every rate is
/// `numerator / (k·N)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RateCounts {
    pub n_len: usize,
    pub k: usize,
    pub common: usize,
    pub secret: usize,
    pub private: usize,
    pub randomization: usize,
    pub common_codebook: usize,
    pub secret_codebook: usize,
    pub seed_psi: usize,
    pub seed_phi: usize,
    pub public_psi: usize,
    pub public_phi: usize,
}

impl RateCounts {
    pub fn denominator(&self) -> usize {
        self.k * self.n_len
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateReport {
    pub counts: RateCounts,
    pub r_o: f64,
    pub r_s: f64,
    pub r_m: f64,
    pub r_r: f64,
    pub common_codebook_rate: f64,
    pub secret_codebook_rate: f64,
    pub seed_rate: f64,
    pub seed_psi_term: f64,
    pub seed_phi_term: f64,
    pub public_rate: f64,
    pub sum_om_s: f64,
    pub sum_m_r: f64,
}

/// Session rates of a `k`-block run.
pub fn rate_report(sets: &IndexSetFamily, k: usize) -> RateReport {
    let k = k.max(1);
    let n = sets.n_len;
    let i_both = intersection(&sets.i_uy, &sets.i_uz).len();
    let s_rest = difference(&sets.v_v_uz, &sets.b_v_uy).len();
    let r_rest = difference(&sets.v_x_v, &sets.v_x_vz).len();
    let counts = RateCounts {
        n_len: n,
        k,
        common: (k - 1) * sets.i_uy.len() + i_both,
        secret: sets.v_v_uz.len() + (k - 1) * s_rest,
        private: k * sets.m_uvz.len(),
        randomization: sets.v_x_v.len() + (k - 1) * r_rest,
        common_codebook: sets.psi_u1_positions(k).len(),
        secret_codebook: sets.psi_vu.len() + sets.phi_vu.len(),
        seed_psi: sets.psi_vu.len(),
        seed_phi: k * sets.phi_vu.len(),
        public_psi: sets.psi_u1_positions(k).len(),
        public_phi: k * sets.phi_u.len(),
    };
    let d = counts.denominator() as f64;
    let r = |x: usize| x as f64 / d;
    let (r_o, r_s, r_m) = (r(counts.common), r(counts.secret), r(counts.private));
    let r_r = r(counts.randomization);
    RateReport {
        counts,
        r_o,
        r_s,
        r_m,
        r_r,
        common_codebook_rate: r(counts.common_codebook),
        secret_codebook_rate: r(counts.secret_codebook),
        seed_rate: r(counts.seed_psi + counts.seed_phi),
        seed_psi_term: r(counts.seed_psi),
        seed_phi_term: r(counts.seed_phi),
        public_rate: r(counts.public_psi + counts.public_phi),
        sum_om_s: r(counts.common + counts.private + counts.secret),
        sum_m_r: r(counts.private + counts.randomization),
    }
}
