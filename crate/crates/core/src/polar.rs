//! Polarization transform and the successive-cancellation (SC) engine.
//!
//! Vectors use the row convention `a = x·G_n` with
//! `G_n = [[1,0],[1,1]]^{⊗n}` over GF(2). Positions are 0-based.
//!
//! A single SC recursion serves every layer. A layer is described by the
//! per-symbol joint table `p(t, c)` of a binary target `t` and a
//! conditioning symbol `c`; the recursion runs in the log domain on pairs
//! `[ln P(…, bit = 0), ln P(…, bit = 1)]` which are exact joint
//! probabilities of the decided prefix and the side information.

use alloc::borrow::Cow;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::PolarError;
use crate::math::{exp_f, h_b, ln_prob, lse};
use crate::source::{JointSource, Var, VarSet};

/// In-place `x ← x·G_n`.
pub fn transform_in_place(x: &mut [u8]) -> Result<(), PolarError> {
    let n = x.len();
    if n < 2 || !n.is_power_of_two() {
        return Err(PolarError::NotPowerOfTwo(n));
    }
    let mut half = 1;
    while half < n {
        for block in x.chunks_exact_mut(2 * half) {
            let (lo, hi) = block.split_at_mut(half);
            for (l, h) in lo.iter_mut().zip(hi.iter()) {
                *l ^= *h;
            }
        }
        half *= 2;
    }
    Ok(())
}

/// Returns `x·G_n`.
pub fn transform(x: &[u8]) -> Result<Vec<u8>, PolarError> {
    let mut out = x.to_vec();
    transform_in_place(&mut out)?;
    Ok(out)
}

/// Polarization layer: a binary target sequence and its conditioning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Layer {
    U,
    UGivenY,
    UGivenZ,
    VGivenU,
    VGivenUY,
    VGivenUZ,
    XGivenV,
    XGivenVZ,
}

impl Layer {
    pub const ALL: [Layer; 8] = [
        Layer::U,
        Layer::UGivenY,
        Layer::UGivenZ,
        Layer::VGivenU,
        Layer::VGivenUY,
        Layer::VGivenUZ,
        Layer::XGivenV,
        Layer::XGivenVZ,
    ];

    pub fn target(self) -> Var {
        match self {
            Layer::U | Layer::UGivenY | Layer::UGivenZ => Var::U,
            Layer::VGivenU | Layer::VGivenUY | Layer::VGivenUZ => Var::V,
            Layer::XGivenV | Layer::XGivenVZ => Var::X,
        }
    }

    pub fn cond(self) -> VarSet {
        match self {
            Layer::U => VarSet::EMPTY,
            Layer::UGivenY => VarSet::of(&[Var::Y]),
            Layer::UGivenZ => VarSet::of(&[Var::Z]),
            Layer::VGivenU => VarSet::of(&[Var::U]),
            Layer::VGivenUY => VarSet::of(&[Var::U, Var::Y]),
            Layer::VGivenUZ => VarSet::of(&[Var::U, Var::Z]),
            Layer::XGivenV => VarSet::of(&[Var::V]),
            Layer::XGivenVZ => VarSet::of(&[Var::V, Var::Z]),
        }
    }

    /// Short stable tag used in file formats.
    pub fn tag(self) -> &'static str {
        match self {
            Layer::U => "U",
            Layer::UGivenY => "U|Y",
            Layer::UGivenZ => "U|Z",
            Layer::VGivenU => "V|U",
            Layer::VGivenUY => "V|UY",
            Layer::VGivenUZ => "V|UZ",
            Layer::XGivenV => "X|V",
            Layer::XGivenVZ => "X|VZ",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Layer> {
        Layer::ALL.into_iter().find(|l| l.tag() == tag)
    }
}

/// Per-symbol joint law `p(t, c)` of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerModel {
    layer: Layer,
    radices: Vec<usize>,
    probs: Vec<[f64; 2]>,
    log_probs: Vec<[f64; 2]>,
}

impl LayerModel {
    pub fn new(source: &JointSource, layer: Layer) -> Self {
        let cond = layer.cond();
        let radices: Vec<usize> = cond.iter().map(|v| source.card(v)).collect();
        let mut probs = vec![[0.0; 2]; source.group_card(cond)];
        let t = layer.target() as usize;
        for (vals, p) in source.entries() {
            probs[source.group_code(cond, &vals)][vals[t]] += p;
        }
        Self::from_table(layer, radices, probs)
    }

    /// A model from an explicit table `probs[c] = [p(0, c), p(1, c)]`.
    pub fn from_table(layer: Layer, radices: Vec<usize>, probs: Vec<[f64; 2]>) -> Self {
        let log_probs = probs.iter().map(|p| [ln_prob(p[0]), ln_prob(p[1])]).collect();
        LayerModel { layer, radices, probs, log_probs }
    }

    pub fn layer(&self) -> Layer {
        self.layer
    }

    pub fn cond_card(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[[f64; 2]] {
        &self.probs
    }

    /// Conditioning symbol from the values of the conditioning variables,
    /// listed in `U, V, X, Y, Z` order.
    pub fn cond_code(&self, parts: &[u32]) -> u32 {
        debug_assert_eq!(parts.len(), self.radices.len());
        parts
            .iter()
            .zip(&self.radices)
            .fold(0u32, |acc, (&p, &r)| acc * r as u32 + p)
    }

    /// Conditioning sequence built position-wise from per-variable sequences.
    pub fn cond_sequence(&self, parts: &[&[u32]], n: usize) -> Vec<u32> {
        let mut buf = vec![0u32; parts.len()];
        (0..n)
            .map(|j| {
                for (b, p) in buf.iter_mut().zip(parts) {
                    *b = p[j];
                }
                self.cond_code(&buf)
            })
            .collect()
    }
}

/// A layer model together with the conditioning sequence of one block.
#[derive(Debug, Clone)]
pub struct ScContext<'a> {
    model: &'a LayerModel,
    cond: Cow<'a, [u32]>,
}

impl<'a> ScContext<'a> {
    pub fn new(model: &'a LayerModel, cond: &'a [u32]) -> Result<Self, PolarError> {
        Self::checked(model, Cow::Borrowed(cond))
    }

    pub fn owned(model: &'a LayerModel, cond: Vec<u32>) -> Result<Self, PolarError> {
        Self::checked(model, Cow::Owned(cond))
    }

    /// Context for a layer without side information.
    pub fn unconditioned(model: &'a LayerModel, n: usize) -> Result<Self, PolarError> {
        Self::checked(model, Cow::Owned(vec![0; n]))
    }

    fn checked(model: &'a LayerModel, cond: Cow<'a, [u32]>) -> Result<Self, PolarError> {
        let n = cond.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(PolarError::NotPowerOfTwo(n));
        }
        if let Some(&symbol) = cond.iter().find(|&&c| c as usize >= model.cond_card()) {
            return Err(PolarError::ConditionSymbol { symbol, card: model.cond_card() });
        }
        Ok(ScContext { model, cond })
    }

    pub fn len(&self) -> usize {
        self.cond.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cond.is_empty()
    }

    pub fn model(&self) -> &LayerModel {
        self.model
    }

    pub fn cond(&self) -> &[u32] {
        &self.cond
    }
}

/// What the SC walk does at one polarized position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Fixed(u8),
    Uniform,
    Sample,
}

/// One action per position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexRule {
    actions: Vec<Action>,
}

impl IndexRule {
    /// Every position drawn from the model.
    pub fn sample_all(n: usize) -> Self {
        IndexRule { actions: vec![Action::Sample; n] }
    }

    pub fn from_actions(actions: Vec<Action>) -> Self {
        IndexRule { actions }
    }

    /// Every position fixed to the given bits.
    pub fn all_fixed(bits: &[u8]) -> Self {
        IndexRule { actions: bits.iter().map(|&b| Action::Fixed(b & 1)).collect() }
    }

    pub fn set(&mut self, pos: usize, action: Action) {
        self.actions[pos] = action;
    }

    /// Fixes `positions[t]` to `bits[t]`.
    pub fn fix(&mut self, positions: &[usize], bits: &[u8]) {
        for (&p, &b) in positions.iter().zip(bits) {
            self.actions[p] = Action::Fixed(b & 1);
        }
    }

    pub fn set_uniform(&mut self, positions: &[usize]) {
        for &p in positions {
            self.actions[p] = Action::Uniform;
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// Posterior `P(bit = 1)` from a likelihood pair, `None` if both are zero.
#[inline]
pub fn pair_posterior(pair: [f64; 2]) -> Option<f64> {
    let total = lse(pair[0], pair[1]);
    if total == f64::NEG_INFINITY {
        None
    } else {
        Some(exp_f(pair[1] - total))
    }
}

#[inline]
fn check_combine(l: [f64; 2], r: [f64; 2]) -> [f64; 2] {
    [lse(l[0] + r[0], l[1] + r[1]), lse(l[1] + r[0], l[0] + r[1])]
}

#[inline]
fn bit_combine(l: [f64; 2], r: [f64; 2], w: u8) -> [f64; 2] {
    let w = w as usize;
    [l[w] + r[0], l[w ^ 1] + r[1]]
}

/// Reusable buffers for SC walks at one block length.
#[derive(Debug, Clone)]
pub struct ScWorkspace {
    n: usize,
    leaves: Vec<[f64; 2]>,
    levels: Vec<Vec<[f64; 2]>>,
    x: Vec<u8>,
}

impl ScWorkspace {
    pub fn new(n: usize) -> Self {
        let mut levels = Vec::new();
        let mut h = n / 2;
        while h >= 1 {
            levels.push(vec![[0.0; 2]; h]);
            h /= 2;
        }
        ScWorkspace { n, leaves: vec![[0.0; 2]; n], levels, x: vec![0; n] }
    }

    /// Runs one SC pass. `decide(i, pair)` returns the bit taken at position
    /// `i`; the decided polarized vector is written to `a`, and the
    /// corresponding raw vector `a·G_n` is available from [`Self::raw`].
    pub fn walk<E, F>(&mut self, ctx: &ScContext<'_>, a: &mut [u8], mut decide: F) -> Result<(), E>
    where
        F: FnMut(usize, [f64; 2]) -> Result<u8, E>,
    {
        assert_eq!(ctx.len(), self.n, "workspace built for a different block length");
        assert_eq!(a.len(), self.n);
        let table = &ctx.model.log_probs;
        for (leaf, &c) in self.leaves.iter_mut().zip(ctx.cond.iter()) {
            *leaf = table[c as usize];
        }
        node(&self.leaves, &mut self.levels, &mut self.x, 0, a, &mut decide)
    }

    /// Raw-domain vector of the last walk.
    pub fn raw(&self) -> &[u8] {
        &self.x
    }

    /// Genie-aided pass along `truth`, writing `h_b(P(A_i = 1 | a^{<i}, c))`
    /// for every position into `out`.
    pub fn genie_entropies(&mut self, ctx: &ScContext<'_>, truth: &[u8], out: &mut [f64]) {
        let mut scratch = vec![0u8; self.n];
        let _ = self.walk::<(), _>(ctx, &mut scratch, |i, pair| {
            out[i] = pair_posterior(pair).map(h_b).unwrap_or(0.0);
            Ok(truth[i])
        });
    }
}

fn node<E, F>(
    leaves: &[[f64; 2]],
    levels: &mut [Vec<[f64; 2]>],
    x: &mut [u8],
    base: usize,
    a: &mut [u8],
    decide: &mut F,
) -> Result<(), E>
where
    F: FnMut(usize, [f64; 2]) -> Result<u8, E>,
{
    let n = leaves.len();
    if n == 1 {
        let b = decide(base, leaves[0])? & 1;
        x[0] = b;
        a[base] = b;
        return Ok(());
    }
    let h = n / 2;
    let (buf, rest) = levels.split_first_mut().expect("level buffer per stage");
    let buf = &mut buf[..h];
    let (left, right) = leaves.split_at(h);
    for ((o, &l), &r) in buf.iter_mut().zip(left).zip(right) {
        *o = check_combine(l, r);
    }
    let (xl, xr) = x.split_at_mut(h);
    node(buf, rest, xl, base, a, decide)?;
    for (((o, &l), &r), &w) in buf.iter_mut().zip(left).zip(right).zip(xl.iter()) {
        *o = bit_combine(l, r, w);
    }
    node(buf, rest, xr, base + h, a, decide)?;
    for (l, &r) in xl.iter_mut().zip(xr.iter()) {
        *l ^= r;
    }
    Ok(())
}

enum Halt {
    Posterior(f64),
    Error(PolarError),
}

/// Exact `P(A_i = 1 | a^{1:i-1}, side information)` with `i = prefix.len()`.
pub fn sc_posterior(ctx: &ScContext<'_>, prefix: &[u8]) -> Result<f64, PolarError> {
    let n = ctx.len();
    let i = prefix.len();
    if i >= n {
        return Err(PolarError::PrefixLength { prefix: i, n });
    }
    let mut ws = ScWorkspace::new(n);
    let mut a = vec![0u8; n];
    let res = ws.walk(ctx, &mut a, |idx, pair| {
        if idx < i {
            let b = prefix[idx] & 1;
            if pair[b as usize] == f64::NEG_INFINITY {
                return Err(Halt::Error(PolarError::ZeroProbabilityPrefix { index: idx }));
            }
            Ok(b)
        } else {
            Err(match pair_posterior(pair) {
                Some(p) => Halt::Posterior(p),
                None => Halt::Error(PolarError::ZeroProbabilityPrefix { index: idx }),
            })
        }
    });
    match res {
        Err(Halt::Posterior(p)) => Ok(p),
        Err(Halt::Error(e)) => Err(e),
        Ok(()) => unreachable!("walk stops at the requested index"),
    }
}

fn check_rule(ctx: &ScContext<'_>, rule: &IndexRule) -> Result<(), PolarError> {
    if rule.len() != ctx.len() {
        return Err(PolarError::RuleLength { expected: ctx.len(), got: rule.len() });
    }
    Ok(())
}

/// Result of a decoding pass that keeps going after a failure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub bits: Vec<u8>,
    /// First position at which the decided prefix became impossible.
    pub failed_at: Option<usize>,
}

/// SC decoding that flags, rather than stops at, an impossible prefix.
/// Undecidable positions resolve to 0.
pub fn sc_decode_flagged(ctx: &ScContext<'_>, rule: &IndexRule) -> Result<Decoded, PolarError> {
    check_rule(ctx, rule)?;
    let n = ctx.len();
    let mut ws = ScWorkspace::new(n);
    let mut bits = vec![0u8; n];
    let mut failed_at = None;
    let actions = rule.actions();
    let _ = ws.walk::<(), _>(ctx, &mut bits, |i, pair| {
        let b = match actions[i] {
            Action::Fixed(b) => b & 1,
            _ => u8::from(pair[1] > pair[0]),
        };
        if pair[b as usize] == f64::NEG_INFINITY && failed_at.is_none() {
            failed_at = Some(i);
        }
        Ok(b)
    });
    Ok(Decoded { bits, failed_at })
}

/// SC decoding: fixed bits are copied, other positions take the more
/// likely value with ties broken to 0.
pub fn sc_decode(ctx: &ScContext<'_>, rule: &IndexRule) -> Result<Vec<u8>, PolarError> {
    let d = sc_decode_flagged(ctx, rule)?;
    match d.failed_at {
        Some(index) => Err(PolarError::ZeroProbabilityPrefix { index }),
        None => Ok(d.bits),
    }
}

/// Output of a traced encoding pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub bits: Vec<u8>,
    /// `Σ h_b(posterior)` over the model-sampled positions.
    pub sampled_entropy: f64,
}

/// SC encoding: fixed bits are copied, uniform positions get a fair coin,
/// sampled positions are drawn from the model posterior. A posterior that
/// is undefined because the fixed prefix is impossible is replaced by 1/2.
pub fn sc_encode_traced<R: Rng + ?Sized>(
    ctx: &ScContext<'_>,
    rule: &IndexRule,
    rng: &mut R,
) -> Result<Encoded, PolarError> {
    check_rule(ctx, rule)?;
    let n = ctx.len();
    let mut ws = ScWorkspace::new(n);
    let mut bits = vec![0u8; n];
    let mut sampled_entropy = 0.0;
    let actions = rule.actions();
    let _ = ws.walk::<(), _>(ctx, &mut bits, |i, pair| {
        Ok(match actions[i] {
            Action::Fixed(b) => b & 1,
            Action::Uniform => u8::from(rng.gen::<bool>()),
            Action::Sample => {
                let p = pair_posterior(pair).unwrap_or(0.5);
                sampled_entropy += h_b(p);
                u8::from(rng.gen::<f64>() < p)
            }
        })
    });
    Ok(Encoded { bits, sampled_entropy })
}

pub fn sc_encode<R: Rng + ?Sized>(
    ctx: &ScContext<'_>,
    rule: &IndexRule,
    rng: &mut R,
) -> Result<Vec<u8>, PolarError> {
    sc_encode_traced(ctx, rule, rng).map(|e| e.bits)
}
