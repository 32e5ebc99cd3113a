//! The k-block chained encoders and the decoders of Bob and Eve.
//!
//! Every block runs three SC encoders in turn: the common layer `Ã_i`
//! (unconditioned), the secret/private layer `B̃_i` given `Ũ_i`, and the
//! channel-prefixing layer `T̃_i` given `Ṽ_i`. Blocks are tied together by
//! reused uniform bits (`Ψ^U_1`, `Ψ^{X|V}_1`), the carried common fragment
//! `o_{i,2}` placed on `A_UYZ` of the next block, and the bits
//! `Ψ^{V|U}_{i−1}` placed on `B_{V|UY}`. Bit reuse matches positions in
//! ascending order wherever two index lists are paired.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::channel::BroadcastChannel;
use crate::error::ChainError;
use crate::polar::{
    sc_decode_flagged, sc_encode_traced, transform, Action, IndexRule, Layer, LayerModel, ScContext,
};
use crate::sets::{difference, intersection, union, IndexSetFamily};
use crate::source::JointSource;

/// Layer models used by the encoders and decoders.
#[derive(Debug, Clone)]
struct Models {
    u: LayerModel,
    u_y: LayerModel,
    u_z: LayerModel,
    v_u: LayerModel,
    v_uy: LayerModel,
    v_uz: LayerModel,
    x_v: LayerModel,
}

/// Where each `V_U` position of a common block gets its bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommonPlan {
    /// Positions of the common message `O_i`.
    pub message: Vec<usize>,
    /// `A_UYZ` (blocks 2..=k); carries `o_{i−1,2}` in order.
    pub carried: Vec<usize>,
    /// `(position, index into Ψ^U_1)` for reused bits (blocks 2..=k).
    pub reused: Vec<(usize, usize)>,
    /// Block 1 only: positions of `Ψ^U_1`, drawn uniformly.
    pub fresh: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretPlan {
    /// Positions of `S_i`.
    pub secret: Vec<usize>,
    /// `B_{V|UY}` (blocks 2..=k); carries `Ψ^{V|U}_{i−1}` in order.
    pub carried: Vec<usize>,
    /// Positions of `M_i` (`M_UVZ`).
    pub private: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixPlan {
    /// `V_{X|VZ}`: uniform in block 1, copied from the previous block after.
    pub reused: Vec<usize>,
    /// Positions of the randomization sequence `R_i`.
    pub random: Vec<usize>,
}

/// A feasible set family bound to a source and a number of blocks.
#[derive(Debug, Clone)]
pub struct ChainConfig {
    source: JointSource,
    sets: IndexSetFamily,
    k: usize,
    models: Models,
    psi_u1: Vec<usize>,
    common: Vec<CommonPlan>,
    secret: [SecretPlan; 2],
    prefix: PrefixPlan,
    o2_positions: Vec<usize>,
}

impl ChainConfig {
    pub fn new(source: JointSource, sets: IndexSetFamily, k: usize) -> Result<Self, ChainError> {
        sets.check_feasible().map_err(ChainError::Infeasible)?;
        Self::new_unchecked(source, sets, k)
    }

    /// Skips the chaining feasibility check. Intended for hand-built set
    /// families; the family must still satisfy its size relations for
    /// `k ≥ 2`.
    pub fn new_unchecked(source: JointSource, sets: IndexSetFamily, k: usize) -> Result<Self, ChainError> {
        if k == 0 {
            return Err(ChainError::ZeroBlocks);
        }
        crate::math::log2_len(sets.n_len).ok_or(crate::error::PolarError::NotPowerOfTwo(sets.n_len))?;
        let models = Models {
            u: LayerModel::new(&source, Layer::U),
            u_y: LayerModel::new(&source, Layer::UGivenY),
            u_z: LayerModel::new(&source, Layer::UGivenZ),
            v_u: LayerModel::new(&source, Layer::VGivenU),
            v_uy: LayerModel::new(&source, Layer::VGivenUY),
            v_uz: LayerModel::new(&source, Layer::VGivenUZ),
            x_v: LayerModel::new(&source, Layer::XGivenV),
        };
        let psi_u1 = sets.psi_u1_positions(k);
        let common = (1..=k).map(|i| common_plan(&sets, &psi_u1, i, k)).collect();
        let secret = [
            SecretPlan { secret: sets.v_v_uz.clone(), carried: Vec::new(), private: sets.m_uvz.clone() },
            SecretPlan {
                secret: difference(&sets.v_v_uz, &sets.b_v_uy),
                carried: sets.b_v_uy.clone(),
                private: sets.m_uvz.clone(),
            },
        ];
        let prefix = PrefixPlan { reused: sets.v_x_vz.clone(), random: difference(&sets.v_x_v, &sets.v_x_vz) };
        let o2_positions = difference(&sets.i_uy, &sets.i_uz);
        Ok(ChainConfig { source, sets, k, models, psi_u1, common, secret, prefix, o2_positions })
    }

    pub fn n_len(&self) -> usize {
        self.sets.n_len
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn sets(&self) -> &IndexSetFamily {
        &self.sets
    }

    pub fn source(&self) -> &JointSource {
        &self.source
    }

    /// Positions of `Ψ^U_1`.
    pub fn psi_u1_positions(&self) -> &[usize] {
        &self.psi_u1
    }

    /// Positions `I_UY \ I_UZ` whose bits form `o_{i,2}`.
    pub fn o2_positions(&self) -> &[usize] {
        &self.o2_positions
    }

    fn check_block(&self, i: usize) -> Result<(), ChainError> {
        if i == 0 || i > self.k {
            return Err(ChainError::BlockIndex { i, k: self.k });
        }
        Ok(())
    }

    pub fn common_plan(&self, i: usize) -> Result<&CommonPlan, ChainError> {
        self.check_block(i)?;
        Ok(&self.common[i - 1])
    }

    pub fn secret_plan(&self, i: usize) -> Result<&SecretPlan, ChainError> {
        self.check_block(i)?;
        Ok(&self.secret[usize::from(i > 1)])
    }

    pub fn prefix_plan(&self) -> &PrefixPlan {
        &self.prefix
    }

    /// `(|O_i|, |S_i|, |M_i|, |R_i|)`.
    pub fn message_lengths(&self, i: usize) -> Result<[usize; 4], ChainError> {
        Ok([
            self.common_plan(i)?.message.len(),
            self.secret_plan(i)?.secret.len(),
            self.sets.m_uvz.len(),
            self.prefix.random.len(),
        ])
    }

    /// Common-layer rule. `None` leaves the message positions uniform.
    pub fn common_rule(&self, i: usize, o: Option<&[u8]>, state: &ChainState) -> Result<IndexRule, ChainError> {
        let plan = self.common_plan(i)?;
        let mut rule = IndexRule::sample_all(self.n_len());
        place(&mut rule, &plan.message, o, "common message", i)?;
        rule.set_uniform(&plan.fresh);
        if i > 1 {
            let carried = state.carried_o2.as_deref().ok_or(ChainError::MissingState { what: "o_{i-1,2}", block: i })?;
            place(&mut rule, &plan.carried, Some(carried), "carried common fragment", i)?;
            let psi = state.psi_u1.as_deref().ok_or(ChainError::MissingState { what: "Psi^U_1", block: i })?;
            for &(p, idx) in &plan.reused {
                rule.set(p, Action::Fixed(psi[idx]));
            }
        }
        Ok(rule)
    }

    /// Secret/private-layer rule. `None` leaves the message positions uniform.
    pub fn secret_rule(
        &self,
        i: usize,
        s: Option<&[u8]>,
        m: Option<&[u8]>,
        state: &ChainState,
    ) -> Result<IndexRule, ChainError> {
        let plan = self.secret_plan(i)?;
        let mut rule = IndexRule::sample_all(self.n_len());
        place(&mut rule, &plan.secret, s, "secret message", i)?;
        place(&mut rule, &plan.private, m, "private message", i)?;
        if i > 1 {
            let prev = state.psi_vu_prev.as_deref().ok_or(ChainError::MissingState { what: "Psi^V|U_{i-1}", block: i })?;
            place(&mut rule, &plan.carried, Some(prev), "carried secret fragment", i)?;
        }
        Ok(rule)
    }

    /// Prefixing rule. `None` leaves the randomization positions uniform.
    pub fn prefix_rule(&self, i: usize, r: Option<&[u8]>, state: &ChainState) -> Result<IndexRule, ChainError> {
        self.check_block(i)?;
        let mut rule = IndexRule::sample_all(self.n_len());
        place(&mut rule, &self.prefix.random, r, "randomization sequence", i)?;
        if i == 1 {
            rule.set_uniform(&self.prefix.reused);
        } else {
            let prev = state.prefix_prev.as_deref().ok_or(ChainError::MissingState { what: "T_{i-1}[V_X|VZ]", block: i })?;
            place(&mut rule, &self.prefix.reused, Some(prev), "reused prefix bits", i)?;
        }
        Ok(rule)
    }

    /// Bits of every fixed common-layer position that a receiver can
    /// rebuild from `Ψ^U_1`, the carried fragment and `Φ^U_i`.
    fn common_known(
        &self,
        i: usize,
        psi_u1: &[u8],
        carried: Option<&[u8]>,
        phi_u: &[u8],
    ) -> Vec<Option<u8>> {
        let plan = &self.common[i - 1];
        let mut known = vec![None; self.n_len()];
        for (&p, &b) in plan.fresh.iter().zip(psi_u1) {
            known[p] = Some(b);
        }
        for &(p, idx) in &plan.reused {
            known[p] = psi_u1.get(idx).copied();
        }
        if let Some(c) = carried {
            for (&p, &b) in plan.carried.iter().zip(c) {
                known[p] = Some(b);
            }
        }
        for (&p, &b) in self.sets.phi_u.iter().zip(phi_u) {
            known[p] = Some(b);
        }
        known
    }
}

fn common_plan(sets: &IndexSetFamily, psi_u1: &[usize], i: usize, k: usize) -> CommonPlan {
    let index_of = |p: usize| psi_u1.binary_search(&p).expect("reused position lies in Psi^U_1");
    if i == 1 {
        let message = if k == 1 { intersection(&sets.i_uy, &sets.i_uz) } else { sets.i_uy.clone() };
        return CommonPlan { message, carried: Vec::new(), reused: Vec::new(), fresh: psi_u1.to_vec() };
    }
    let aligned = difference(&sets.v_u, &union(&sets.i_uy, &sets.a_uyz));
    let mut reused: Vec<(usize, usize)> = aligned.iter().map(|&p| (p, index_of(p))).collect();
    let message = if i < k {
        sets.i_uy.clone()
    } else {
        // Last block: the positions I_UY \ I_UZ take the Ψ^U_1 bits that
        // block 1 holds on A_UYZ.
        let moved = difference(&sets.i_uy, &sets.i_uz);
        reused.extend(moved.iter().zip(&sets.a_uyz).map(|(&p, &a)| (p, index_of(a))));
        reused.sort_unstable();
        intersection(&sets.i_uy, &sets.i_uz)
    };
    CommonPlan { message, carried: sets.a_uyz.clone(), reused, fresh: Vec::new() }
}

fn place(
    rule: &mut IndexRule,
    positions: &[usize],
    bits: Option<&[u8]>,
    what: &'static str,
    block: usize,
) -> Result<(), ChainError> {
    match bits {
        Some(b) if b.len() != positions.len() => {
            Err(ChainError::MessageLength { what, block, expected: positions.len(), got: b.len() })
        }
        Some(b) => {
            rule.fix(positions, b);
            Ok(())
        }
        None => {
            rule.set_uniform(positions);
            Ok(())
        }
    }
}

fn gather(bits: &[u8], positions: &[usize]) -> Vec<u8> {
    positions.iter().map(|&p| bits[p]).collect()
}

fn as_symbols(bits: &[u8]) -> Vec<u32> {
    bits.iter().map(|&b| b as u32).collect()
}

/// Values threaded from one block to the next, plus per-block side outputs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainState {
    pub psi_u1: Option<Vec<u8>>,
    /// `o_{i,2}` of the last encoded block.
    pub carried_o2: Option<Vec<u8>>,
    /// `Ψ^{V|U}_i` of the last encoded block.
    pub psi_vu_prev: Option<Vec<u8>>,
    /// `t̃_i[V_{X|VZ}]` of the last encoded block.
    pub prefix_prev: Option<Vec<u8>>,
    pub psi_xv1: Option<Vec<u8>>,
    /// `Ψ^U_i = ã_i[V_U \ (I_UY ∪ A_UYZ)]` for blocks 2..=k (empty for block 1).
    pub psi_u: Vec<Vec<u8>>,
    pub phi_u: Vec<Vec<u8>>,
    pub psi_vu: Vec<Vec<u8>>,
    pub phi_vu: Vec<Vec<u8>>,
}

/// Output of one layer encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBlock {
    /// Polarized vector.
    pub polarized: Vec<u8>,
    /// `polarized · G_n`.
    pub raw: Vec<u8>,
    /// `Σ h_b` of the posteriors at model-sampled positions.
    pub sampled_entropy: f64,
}

impl ChainConfig {
    pub fn encode_common_block<R: Rng + ?Sized>(
        &self,
        i: usize,
        o: &[u8],
        state: &mut ChainState,
        rng: &mut R,
    ) -> Result<LayerBlock, ChainError> {
        let rule = self.common_rule(i, Some(o), state)?;
        let ctx = ScContext::unconditioned(&self.models.u, self.n_len())?;
        let enc = sc_encode_traced(&ctx, &rule, rng)?;
        let a = enc.bits;
        if i == 1 {
            state.psi_u1 = Some(gather(&a, &self.psi_u1));
            state.psi_u.push(Vec::new());
        } else {
            let aligned = difference(&self.sets.v_u, &union(&self.sets.i_uy, &self.sets.a_uyz));
            state.psi_u.push(gather(&a, &aligned));
        }
        state.carried_o2 = (i < self.k).then(|| gather(&a, &self.o2_positions));
        state.phi_u.push(gather(&a, &self.sets.phi_u));
        let raw = transform(&a)?;
        Ok(LayerBlock { polarized: a, raw, sampled_entropy: enc.sampled_entropy })
    }

    pub fn encode_secret_block<R: Rng + ?Sized>(
        &self,
        i: usize,
        s: &[u8],
        m: &[u8],
        u: &[u8],
        state: &mut ChainState,
        rng: &mut R,
    ) -> Result<LayerBlock, ChainError> {
        let rule = self.secret_rule(i, Some(s), Some(m), state)?;
        let ctx = ScContext::owned(&self.models.v_u, as_symbols(u))?;
        if ctx.len() != self.n_len() {
            return Err(ChainError::LengthMismatch { sets: self.n_len(), config: ctx.len() });
        }
        let enc = sc_encode_traced(&ctx, &rule, rng)?;
        let b = enc.bits;
        let psi = gather(&b, &self.sets.psi_vu);
        state.psi_vu_prev = Some(psi.clone());
        state.psi_vu.push(psi);
        state.phi_vu.push(gather(&b, &self.sets.phi_vu));
        let raw = transform(&b)?;
        Ok(LayerBlock { polarized: b, raw, sampled_entropy: enc.sampled_entropy })
    }

    pub fn encode_prefix_block<R: Rng + ?Sized>(
        &self,
        i: usize,
        r: &[u8],
        v: &[u8],
        state: &mut ChainState,
        rng: &mut R,
    ) -> Result<LayerBlock, ChainError> {
        let rule = self.prefix_rule(i, Some(r), state)?;
        let ctx = ScContext::owned(&self.models.x_v, as_symbols(v))?;
        if ctx.len() != self.n_len() {
            return Err(ChainError::LengthMismatch { sets: self.n_len(), config: ctx.len() });
        }
        let enc = sc_encode_traced(&ctx, &rule, rng)?;
        let t = enc.bits;
        let reused = gather(&t, &self.prefix.reused);
        if i == 1 {
            state.psi_xv1 = Some(reused.clone());
        }
        state.prefix_prev = Some(reused);
        let raw = transform(&t)?;
        Ok(LayerBlock { polarized: t, raw, sampled_entropy: enc.sampled_entropy })
    }
}

/// All messages of a session, one vector per block.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionMessages {
    pub o: Vec<Vec<u8>>,
    pub s: Vec<Vec<u8>>,
    pub m: Vec<Vec<u8>>,
    pub r: Vec<Vec<u8>>,
}

impl SessionMessages {
    /// Uniformly random messages of the right sizes.
    pub fn random<R: Rng + ?Sized>(config: &ChainConfig, rng: &mut R) -> Self {
        let mut out = SessionMessages::default();
        for i in 1..=config.k() {
            let [lo, ls, lm, lr] = config.message_lengths(i).expect("block in range");
            let mut draw = |n: usize| (0..n).map(|_| u8::from(rng.gen::<bool>())).collect::<Vec<u8>>();
            out.o.push(draw(lo));
            out.s.push(draw(ls));
            out.m.push(draw(lm));
            out.r.push(draw(lr));
        }
        out
    }

    fn check(&self, config: &ChainConfig) -> Result<(), ChainError> {
        let k = config.k();
        for v in [&self.o, &self.s, &self.m, &self.r] {
            if v.len() != k {
                return Err(ChainError::BlockCount { expected: k, got: v.len() });
            }
        }
        Ok(())
    }
}

/// Per-block record of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockRecord {
    pub a: Vec<u8>,
    pub u: Vec<u8>,
    pub b: Vec<u8>,
    pub v: Vec<u8>,
    pub t: Vec<u8>,
    pub x: Vec<u8>,
    pub y: Vec<u32>,
    pub z: Vec<u32>,
    /// Sampled-position entropy sums of the three layers, in bits.
    pub sampled_entropy: [f64; 3],
}

/// Sent over the public channel to Bob and Eve.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PublicBundle {
    pub psi_u1: Vec<u8>,
    pub phi_u: Vec<Vec<u8>>,
}

impl PublicBundle {
    pub fn bit_len(&self) -> usize {
        self.psi_u1.len() + self.phi_u.iter().map(Vec::len).sum::<usize>()
    }
}

/// Shared secretly between Alice and Bob.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SeedBundle {
    pub psi_vu_k: Vec<u8>,
    pub phi_vu: Vec<Vec<u8>>,
}

impl SeedBundle {
    pub fn bit_len(&self) -> usize {
        self.psi_vu_k.len() + self.phi_vu.iter().map(Vec::len).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub n_len: usize,
    pub k: usize,
    pub blocks: Vec<BlockRecord>,
    pub public: PublicBundle,
    pub seed: SeedBundle,
    pub messages: SessionMessages,
    pub psi_xv1: Vec<u8>,
    pub state: ChainState,
}

impl ChainConfig {
    /// Encodes all `k` blocks in order.
    pub fn encode_session<R: Rng + ?Sized>(
        &self,
        messages: &SessionMessages,
        rng: &mut R,
    ) -> Result<Transcript, ChainError> {
        messages.check(self)?;
        let mut state = ChainState::default();
        let mut blocks = Vec::with_capacity(self.k);
        for i in 1..=self.k {
            let a = self.encode_common_block(i, &messages.o[i - 1], &mut state, rng)?;
            let b = self.encode_secret_block(i, &messages.s[i - 1], &messages.m[i - 1], &a.raw, &mut state, rng)?;
            let t = self.encode_prefix_block(i, &messages.r[i - 1], &b.raw, &mut state, rng)?;
            blocks.push(BlockRecord {
                sampled_entropy: [a.sampled_entropy, b.sampled_entropy, t.sampled_entropy],
                a: a.polarized,
                u: a.raw,
                b: b.polarized,
                v: b.raw,
                t: t.polarized,
                x: t.raw,
                y: Vec::new(),
                z: Vec::new(),
            });
        }
        let public = PublicBundle {
            psi_u1: state.psi_u1.clone().unwrap_or_default(),
            phi_u: state.phi_u.clone(),
        };
        let seed = SeedBundle {
            psi_vu_k: state.psi_vu.last().cloned().unwrap_or_default(),
            phi_vu: state.phi_vu.clone(),
        };
        Ok(Transcript {
            n_len: self.n_len(),
            k: self.k,
            blocks,
            public,
            seed,
            messages: messages.clone(),
            psi_xv1: state.psi_xv1.clone().unwrap_or_default(),
            state,
        })
    }

    /// Sends every block of `transcript` through `channel`.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        transcript: &mut Transcript,
        channel: &BroadcastChannel,
        rng: &mut R,
    ) -> Result<(), ChainError> {
        self.check_channel(channel)?;
        for block in transcript.blocks.iter_mut() {
            let (y, z) = channel.transmit(&block.x, rng);
            block.y = y;
            block.z = z;
        }
        Ok(())
    }

    pub fn check_channel(&self, channel: &BroadcastChannel) -> Result<(), ChainError> {
        let (sy, sz) = (self.source.card_y(), self.source.card_z());
        if channel.card_y() != sy || channel.card_z() != sz {
            return Err(ChainError::ChannelMismatch { cy: channel.card_y(), cz: channel.card_z(), sy, sz });
        }
        Ok(())
    }

    fn check_received(&self, blocks: &[Vec<u32>]) -> Result<(), ChainError> {
        if blocks.len() != self.k {
            return Err(ChainError::BlockCount { expected: self.k, got: blocks.len() });
        }
        if let Some(b) = blocks.iter().find(|b| b.len() != self.n_len()) {
            return Err(ChainError::LengthMismatch { sets: self.n_len(), config: b.len() });
        }
        Ok(())
    }
}

/// Bob's estimates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BobEstimate {
    pub o: Vec<Vec<u8>>,
    pub s: Vec<Vec<u8>>,
    pub m: Vec<Vec<u8>>,
    pub a: Vec<Vec<u8>>,
    pub b: Vec<Vec<u8>>,
    /// Blocks whose common-layer decoding hit an impossible prefix.
    pub common_failed: Vec<bool>,
    /// Blocks whose secret-layer decoding hit an impossible prefix.
    pub secret_failed: Vec<bool>,
}

/// Eve's estimate of the common messages.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EveEstimate {
    pub o: Vec<Vec<u8>>,
    pub a: Vec<Vec<u8>>,
    pub failed: Vec<bool>,
}

fn frozen_rule(n: usize, frozen: &[usize], known: &[Option<u8>]) -> IndexRule {
    let mut rule = IndexRule::sample_all(n);
    for &p in frozen {
        if let Some(b) = known[p] {
            rule.set(p, Action::Fixed(b));
        }
    }
    rule
}

impl ChainConfig {
    /// Bob: common layer forward over the blocks with `H_{U|Y}` frozen,
    /// then secret layer backward from block k with `H_{V|UY}` frozen.
    pub fn bob_decode(
        &self,
        ys: &[Vec<u32>],
        public: &PublicBundle,
        seed: &SeedBundle,
    ) -> Result<BobEstimate, ChainError> {
        self.check_received(ys)?;
        let n = self.n_len();
        let k = self.k;
        let mut est = BobEstimate {
            o: vec![Vec::new(); k],
            s: vec![Vec::new(); k],
            m: vec![Vec::new(); k],
            a: vec![Vec::new(); k],
            b: vec![Vec::new(); k],
            common_failed: vec![false; k],
            secret_failed: vec![false; k],
        };
        let mut carried: Option<Vec<u8>> = None;
        for i in 1..=k {
            let phi = public.phi_u.get(i - 1).map(Vec::as_slice).unwrap_or(&[]);
            let known = self.common_known(i, &public.psi_u1, carried.as_deref(), phi);
            let rule = frozen_rule(n, &self.sets.h_u_y, &known);
            let ctx = ScContext::new(&self.models.u_y, &ys[i - 1])?;
            let d = sc_decode_flagged(&ctx, &rule)?;
            est.common_failed[i - 1] = d.failed_at.is_some();
            est.o[i - 1] = gather(&d.bits, &self.common[i - 1].message);
            carried = Some(gather(&d.bits, &self.o2_positions));
            est.a[i - 1] = d.bits;
        }
        let h_v_uy = union(&self.sets.psi_vu, &self.sets.phi_vu);
        let mut psi = seed.psi_vu_k.clone();
        for i in (1..=k).rev() {
            let mut known = vec![None; n];
            for (&p, &b) in self.sets.psi_vu.iter().zip(&psi) {
                known[p] = Some(b);
            }
            let phi = seed.phi_vu.get(i - 1).map(Vec::as_slice).unwrap_or(&[]);
            for (&p, &b) in self.sets.phi_vu.iter().zip(phi) {
                known[p] = Some(b);
            }
            let rule = frozen_rule(n, &h_v_uy, &known);
            let u_hat = as_symbols(&transform(&est.a[i - 1])?);
            let cond = self.models.v_uy.cond_sequence(&[&u_hat, &ys[i - 1]], n);
            let ctx = ScContext::owned(&self.models.v_uy, cond)?;
            let d = sc_decode_flagged(&ctx, &rule)?;
            est.secret_failed[i - 1] = d.failed_at.is_some();
            let plan = &self.secret[usize::from(i > 1)];
            est.s[i - 1] = gather(&d.bits, &plan.secret);
            est.m[i - 1] = gather(&d.bits, &plan.private);
            psi = gather(&d.bits, &plan.carried);
            est.b[i - 1] = d.bits;
        }
        Ok(est)
    }

    /// Eve: common layer backward from block k with `H_{U|Z}` frozen. The
    /// fragment `o_{j,2}` of block j is read from her estimate of block
    /// `j + 1` on `A_UYZ`.
    pub fn eve_decode(&self, zs: &[Vec<u32>], public: &PublicBundle) -> Result<EveEstimate, ChainError> {
        self.check_received(zs)?;
        let n = self.n_len();
        let k = self.k;
        let mut est = EveEstimate { o: vec![Vec::new(); k], a: vec![Vec::new(); k], failed: vec![false; k] };
        let mut next_a: Option<Vec<u8>> = None;
        for j in (1..=k).rev() {
            let phi = public.phi_u.get(j - 1).map(Vec::as_slice).unwrap_or(&[]);
            let mut known = self.common_known(j, &public.psi_u1, None, phi);
            if let Some(next) = &next_a {
                for (&p, &b) in self.o2_positions.iter().zip(next) {
                    known[p] = Some(b);
                }
            }
            let rule = frozen_rule(n, &self.sets.h_u_z, &known);
            let ctx = ScContext::new(&self.models.u_z, &zs[j - 1])?;
            let d = sc_decode_flagged(&ctx, &rule)?;
            est.failed[j - 1] = d.failed_at.is_some();
            est.o[j - 1] = gather(&d.bits, &self.common[j - 1].message);
            next_a = Some(gather(&d.bits, &self.sets.a_uyz));
            est.a[j - 1] = d.bits;
        }
        Ok(est)
    }

    /// Eve's hard decisions on the secret positions of each block, from SC
    /// on `V` given her common-layer estimate and `z` with nothing frozen.
    pub fn eve_secret_projection(&self, zs: &[Vec<u32>], eve: &EveEstimate) -> Result<Vec<Vec<u8>>, ChainError> {
        self.check_received(zs)?;
        let n = self.n_len();
        (1..=self.k)
            .map(|i| {
                let u_hat = as_symbols(&transform(&eve.a[i - 1])?);
                let cond = self.models.v_uz.cond_sequence(&[&u_hat, &zs[i - 1]], n);
                let ctx = ScContext::owned(&self.models.v_uz, cond)?;
                let d = sc_decode_flagged(&ctx, &IndexRule::sample_all(n))?;
                Ok(gather(&d.bits, &self.secret[usize::from(i > 1)].secret))
            })
            .collect()
    }
}
