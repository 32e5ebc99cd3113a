//! Exact joint laws of the chained encoder at tiny block lengths.
//!
//! The enumeration walks every polarized position in ascending order.
//! Fixed positions contribute probability one, uniform positions (message
//! bits and fresh coins) one half each, and model-sampled positions the
//! true conditional `p(a_j | a^{1:j-1}, side)`, which is obtained here by
//! summing the block joint over all completions rather than through SC.
//! Blocks are chained by a dynamic program over the carried state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use hashbrown::HashMap;

use crate::chain::{ChainConfig, ChainState};
use crate::channel::BroadcastChannel;
use crate::error::MetricsError;
use crate::math::{entropy, log2_f};
use crate::polar::{transform, Action};
use crate::sets::{difference, union};
use crate::source::{JointSource, Var, VarSet};

/// Largest number of table entries an exact law may hold.
pub const LAW_DOMAIN_LIMIT: usize = 1 << 24;

/// A random variable of a session, tagged by block where relevant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LawVar {
    U(usize),
    V(usize),
    X(usize),
    Y(usize),
    Z(usize),
    A(usize),
    B(usize),
    T(usize),
    O(usize),
    S(usize),
    M(usize),
    R(usize),
    PsiU1,
    /// `Ψ^U_i`: `ã_1[Ψ^U_1 positions]` for block 1, the aligned reuse
    /// positions `V_U \ (I_UY ∪ A_UYZ)` afterwards.
    PsiU(usize),
    PhiU(usize),
    PsiVU(usize),
    PhiVU(usize),
    PsiXV1,
}

impl LawVar {
    /// Block in which the variable is produced.
    pub fn block(self) -> usize {
        use LawVar::*;
        match self {
            U(i) | V(i) | X(i) | Y(i) | Z(i) | A(i) | B(i) | T(i) | O(i) | S(i) | M(i) | R(i) | PsiU(i)
            | PhiU(i) | PsiVU(i) | PhiVU(i) => i,
            PsiU1 | PsiXV1 => 1,
        }
    }

    fn needs_y(self) -> bool {
        matches!(self, LawVar::Y(_))
    }

    fn needs_z(self) -> bool {
        matches!(self, LawVar::Z(_))
    }
}

impl fmt::Display for LawVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use LawVar::*;
        match self {
            U(i) => write!(f, "U_{i}"),
            V(i) => write!(f, "V_{i}"),
            X(i) => write!(f, "X_{i}"),
            Y(i) => write!(f, "Y_{i}"),
            Z(i) => write!(f, "Z_{i}"),
            A(i) => write!(f, "A_{i}"),
            B(i) => write!(f, "B_{i}"),
            T(i) => write!(f, "T_{i}"),
            O(i) => write!(f, "O_{i}"),
            S(i) => write!(f, "S_{i}"),
            M(i) => write!(f, "M_{i}"),
            R(i) => write!(f, "R_{i}"),
            PsiU1 => write!(f, "PsiU_1"),
            PsiU(i) => write!(f, "PsiU_{i}"),
            PhiU(i) => write!(f, "PhiU_{i}"),
            PsiVU(i) => write!(f, "PsiVU_{i}"),
            PhiVU(i) => write!(f, "PhiVU_{i}"),
            PsiXV1 => write!(f, "PsiXV_1"),
        }
    }
}

/// Bits packed least-significant first: element 0 is bit 0.
pub fn pack_bits(bits: &[u8]) -> u64 {
    bits.iter().rev().fold(0u64, |acc, &b| (acc << 1) | u64::from(b & 1))
}

/// Symbols packed in base `card`, element 0 least significant.
pub fn pack_symbols(symbols: &[u32], card: usize) -> u64 {
    symbols.iter().rev().fold(0u64, |acc, &s| acc * card as u64 + u64::from(s))
}

/// A finite joint distribution over packed variable values.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactLaw {
    vars: Vec<LawVar>,
    table: HashMap<Vec<u64>, f64>,
}

impl ExactLaw {
    pub fn from_table(vars: Vec<LawVar>, table: HashMap<Vec<u64>, f64>) -> Self {
        ExactLaw { vars, table }
    }

    pub fn vars(&self) -> &[LawVar] {
        &self.vars
    }

    /// Number of support points.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.table.values().sum()
    }

    pub fn prob(&self, key: &[u64]) -> f64 {
        self.table.get(key).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u64], f64)> + '_ {
        self.table.iter().map(|(k, &p)| (k.as_slice(), p))
    }

    fn index_of(&self, var: LawVar) -> Result<usize, MetricsError> {
        self.vars
            .iter()
            .position(|&v| v == var)
            .ok_or_else(|| MetricsError::MissingVariable(format!("{var}")))
    }

    fn indices(&self, vars: &[LawVar]) -> Result<Vec<usize>, MetricsError> {
        vars.iter().map(|&v| self.index_of(v)).collect()
    }

    pub fn marginal(&self, vars: &[LawVar]) -> Result<ExactLaw, MetricsError> {
        let idx = self.indices(vars)?;
        let mut table = HashMap::new();
        for (key, &p) in &self.table {
            let k: Vec<u64> = idx.iter().map(|&i| key[i]).collect();
            *table.entry(k).or_insert(0.0) += p;
        }
        Ok(ExactLaw { vars: vars.to_vec(), table })
    }

    /// Shannon entropy in bits.
    pub fn entropy(&self) -> f64 {
        entropy(self.table.values().copied())
    }

    fn entropy_of(&self, idx: &[usize]) -> f64 {
        if idx.is_empty() {
            return 0.0;
        }
        let mut table: HashMap<Vec<u64>, f64> = HashMap::new();
        for (key, &p) in &self.table {
            *table.entry(idx.iter().map(|&i| key[i]).collect()).or_insert(0.0) += p;
        }
        entropy(table.into_values())
    }

    pub fn joint_entropy(&self, vars: &[LawVar]) -> Result<f64, MetricsError> {
        Ok(self.entropy_of(&self.indices(vars)?))
    }

    /// `I(a; b)` in bits, clamped at zero against rounding.
    pub fn mutual_information(&self, a: &[LawVar], b: &[LawVar]) -> Result<f64, MetricsError> {
        let ia = self.indices(a)?;
        let ib = self.indices(b)?;
        let mut iab = ia.clone();
        iab.extend(&ib);
        let mi = self.entropy_of(&ia) + self.entropy_of(&ib) - self.entropy_of(&iab);
        Ok(mi.max(0.0))
    }

    /// `H(bit j of target | bits 0..j of target, cond)` for `j < width`.
    pub fn prefix_conditional_entropies(
        &self,
        target: LawVar,
        width: usize,
        cond: &[LawVar],
    ) -> Result<Vec<f64>, MetricsError> {
        let ti = self.index_of(target)?;
        let ci = self.indices(cond)?;
        let prefix_entropy = |len: usize| {
            let mask = if len >= 64 { u64::MAX } else { (1u64 << len) - 1 };
            let mut table: HashMap<Vec<u64>, f64> = HashMap::new();
            for (key, &p) in &self.table {
                let mut k = Vec::with_capacity(ci.len() + 1);
                k.push(key[ti] & mask);
                k.extend(ci.iter().map(|&i| key[i]));
                *table.entry(k).or_insert(0.0) += p;
            }
            entropy(table.into_values())
        };
        let mut prev = prefix_entropy(0);
        let mut out = Vec::with_capacity(width);
        for j in 1..=width {
            let cur = prefix_entropy(j);
            out.push((cur - prev).max(0.0));
            prev = cur;
        }
        Ok(out)
    }

    fn check_same_vars(&self, other: &ExactLaw) -> Result<(), MetricsError> {
        if self.vars != other.vars {
            return Err(MetricsError::DomainMismatch);
        }
        Ok(())
    }

    /// `D(self ‖ q)` in bits; infinite when the support of `self` is not
    /// contained in that of `q`.
    pub fn divergence_to(&self, q: &ExactLaw) -> Result<f64, MetricsError> {
        self.check_same_vars(q)?;
        let mut d = 0.0;
        for (key, &p) in &self.table {
            if p <= 0.0 {
                continue;
            }
            let qk = q.prob(key);
            if qk <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += p * log2_f(p / qk);
        }
        Ok(d.max(0.0))
    }

    /// `Σ |p − q|` over the union of supports.
    pub fn variational_distance_to(&self, q: &ExactLaw) -> Result<f64, MetricsError> {
        self.check_same_vars(q)?;
        let mut v = 0.0;
        for (key, &p) in &self.table {
            v += (p - q.prob(key)).abs();
        }
        for (key, &qk) in &q.table {
            if !self.table.contains_key(key) {
                v += qk;
            }
        }
        Ok(v)
    }
}

/// `D(p ‖ q) = Σ p log2(p/q)` over two tables on the same index set.
pub fn divergence(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DomainMismatch);
    }
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            d += a * log2_f(a / b);
        }
    }
    Ok(d)
}

/// `V(p, q) = Σ |p − q|`.
pub fn variational_distance(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DomainMismatch);
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// The i.i.d. law of `N` source symbols restricted to `vars`, tagged with
/// `block` (`U → U(block)` and so on).
pub fn source_block_law(
    source: &JointSource,
    n_len: usize,
    block: usize,
    vars: &[Var],
) -> Result<ExactLaw, MetricsError> {
    let set = VarSet::of(vars);
    let order: Vec<Var> = set.iter().collect();
    let card = source.group_card(set);
    let log_size = n_len as f64 * log2_f(card as f64);
    if log_size > 24.0 {
        return Err(MetricsError::DomainTooLarge { what: "source block law", log_size });
    }
    let marginal = source.marginal(set);
    let support: Vec<(Vec<usize>, f64)> = marginal
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(code, &p)| {
            let mut vals = vec![0usize; order.len()];
            let mut c = code;
            for (slot, v) in vals.iter_mut().zip(&order).rev() {
                let r = source.card(*v);
                *slot = c % r;
                c /= r;
            }
            (vals, p)
        })
        .collect();
    let tag = |v: Var| match v {
        Var::U => LawVar::U(block),
        Var::V => LawVar::V(block),
        Var::X => LawVar::X(block),
        Var::Y => LawVar::Y(block),
        Var::Z => LawVar::Z(block),
    };
    // Position j contributes value * card^j to each packed key.
    let mut frontier: Vec<(Vec<u64>, f64)> = vec![(vec![0; order.len()], 1.0)];
    let mut scale = vec![1u64; order.len()];
    for _ in 0..n_len {
        let mut next = Vec::with_capacity(frontier.len() * support.len());
        for (key, w) in &frontier {
            for (vals, p) in &support {
                let k: Vec<u64> = key.iter().zip(vals).zip(&scale).map(|((&k, &v), &s)| k + v as u64 * s).collect();
                next.push((k, w * p));
            }
        }
        for (s, v) in scale.iter_mut().zip(&order) {
            *s *= source.card(*v) as u64;
        }
        frontier = next;
    }
    let packed: Vec<LawVar> = order.iter().map(|&v| tag(v)).collect();
    let mut table = HashMap::with_capacity(frontier.len());
    for (k, p) in frontier {
        *table.entry(k).or_insert(0.0) += p;
    }
    let law = ExactLaw { vars: packed, table };
    // Reorder to the caller's variable order.
    let wanted: Vec<LawVar> = vars.iter().map(|&v| tag(v)).collect();
    law.marginal(&wanted)
}

/// Subtree masses of a block joint `q(c)` over `2^N` binary vectors, with
/// position 0 as the most significant index bit.
struct PrefixMasses {
    levels: Vec<Vec<f64>>,
}

impl PrefixMasses {
    fn new(n: usize, leaf: impl Fn(&[u8]) -> f64) -> Self {
        let mut bits = vec![0u8; n];
        let leaves: Vec<f64> = (0..1usize << n)
            .map(|idx| {
                for (p, b) in bits.iter_mut().enumerate() {
                    *b = ((idx >> (n - 1 - p)) & 1) as u8;
                }
                leaf(&bits)
            })
            .collect();
        let mut levels = vec![leaves];
        for _ in 0..n {
            let last = levels.last().expect("nonempty");
            let up: Vec<f64> = last.chunks(2).map(|c| c[0] + c[1]).collect();
            levels.push(up);
        }
        levels.reverse();
        PrefixMasses { levels }
    }

    /// All outcomes of running `actions` against this joint, with their
    /// probabilities. An impossible prefix at a sampled position splits
    /// evenly, as the SC encoder does.
    fn enumerate(&self, actions: &[Action]) -> Vec<(Vec<u8>, f64)> {
        let n = actions.len();
        let mut frontier: Vec<(Vec<u8>, usize, f64)> = vec![(Vec::with_capacity(n), 0, 1.0)];
        for (j, act) in actions.iter().enumerate() {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for (bits, code, w) in frontier {
                let split = match *act {
                    Action::Fixed(b) if b & 1 == 0 => [1.0, 0.0],
                    Action::Fixed(_) => [0.0, 1.0],
                    Action::Uniform => [0.5, 0.5],
                    Action::Sample => {
                        let total = self.levels[j][code];
                        if total > 0.0 {
                            let m1 = self.levels[j + 1][2 * code + 1];
                            let m0 = self.levels[j + 1][2 * code];
                            [m0 / total, m1 / total]
                        } else {
                            [0.5, 0.5]
                        }
                    }
                };
                for (b, &p) in split.iter().enumerate() {
                    if p > 0.0 {
                        let mut nb = bits.clone();
                        nb.push(b as u8);
                        next.push((nb, 2 * code + b, w * p));
                    }
                }
            }
            frontier = next;
        }
        frontier.into_iter().map(|(b, _, w)| (b, w)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
struct Carry {
    psi_u1: u64,
    o2: u64,
    psi_vu: u64,
    prefix: u64,
}

fn unpack(value: u64, len: usize) -> Vec<u8> {
    (0..len).map(|t| ((value >> t) & 1) as u8).collect()
}

fn gather(bits: &[u8], positions: &[usize]) -> u64 {
    positions.iter().rev().fold(0u64, |acc, &p| (acc << 1) | u64::from(bits[p]))
}

struct Kernel<'a> {
    cfg: &'a ChainConfig,
    channel: &'a BroadcastChannel,
    n: usize,
    p_uv: [[f64; 2]; 2],
    p_vx: [[f64; 2]; 2],
    q_a: PrefixMasses,
    q_b: HashMap<u64, PrefixMasses>,
    q_t: HashMap<u64, PrefixMasses>,
    yz: HashMap<(u64, bool, bool), Vec<(u64, u64, f64)>>,
    aligned: Vec<usize>,
}

impl<'a> Kernel<'a> {
    fn new(cfg: &'a ChainConfig, channel: &'a BroadcastChannel) -> Self {
        let s = cfg.source();
        let mu = s.marginal(VarSet::of(&[Var::U]));
        let muv = s.marginal(VarSet::of(&[Var::U, Var::V]));
        let mvx = s.marginal(VarSet::of(&[Var::V, Var::X]));
        let p_u = [mu[0], mu[1]];
        let p_uv = [[muv[0], muv[1]], [muv[2], muv[3]]];
        let p_vx = [[mvx[0], mvx[1]], [mvx[2], mvx[3]]];
        let n = cfg.n_len();
        let q_a = PrefixMasses::new(n, |a| {
            let u = transform(a).expect("power of two");
            u.iter().map(|&b| p_u[b as usize]).product()
        });
        let sets = cfg.sets();
        let aligned = difference(&sets.v_u, &union(&sets.i_uy, &sets.a_uyz));
        Kernel {
            cfg,
            channel,
            n,
            p_uv,
            p_vx,
            q_a,
            q_b: HashMap::new(),
            q_t: HashMap::new(),
            yz: HashMap::new(),
            aligned,
        }
    }

    fn state(&self, carry: &Carry) -> ChainState {
        let sets = self.cfg.sets();
        ChainState {
            psi_u1: Some(unpack(carry.psi_u1, self.cfg.psi_u1_positions().len())),
            carried_o2: Some(unpack(carry.o2, self.cfg.o2_positions().len())),
            psi_vu_prev: Some(unpack(carry.psi_vu, sets.psi_vu.len())),
            prefix_prev: Some(unpack(carry.prefix, sets.v_x_vz.len())),
            ..ChainState::default()
        }
    }

    fn channel_outcomes(&mut self, x: &[u8], want_y: bool, want_z: bool) -> Vec<(u64, u64, f64)> {
        let key = (pack_bits(x), want_y, want_z);
        if let Some(v) = self.yz.get(&key) {
            return v.clone();
        }
        let (cy, cz) = (self.channel.card_y(), self.channel.card_z());
        let mut frontier: HashMap<(u64, u64), f64> = HashMap::new();
        frontier.insert((0, 0), 1.0);
        let (mut sy, mut sz) = (1u64, 1u64);
        for &xj in x {
            let mut next: HashMap<(u64, u64), f64> = HashMap::new();
            for (&(ky, kz), &w) in &frontier {
                for y in 0..cy {
                    for z in 0..cz {
                        let p = self.channel.prob(xj as usize, y, z);
                        if p <= 0.0 {
                            continue;
                        }
                        let ny = if want_y { ky + y as u64 * sy } else { 0 };
                        let nz = if want_z { kz + z as u64 * sz } else { 0 };
                        *next.entry((ny, nz)).or_insert(0.0) += w * p;
                    }
                }
            }
            sy *= cy as u64;
            sz *= cz as u64;
            frontier = next;
        }
        let out: Vec<(u64, u64, f64)> = frontier.into_iter().map(|((y, z), p)| (y, z, p)).collect();
        self.yz.insert(key, out.clone());
        out
    }

    /// Distribution of (recorded block values, next carry) given the carry.
    fn block(&mut self, i: usize, carry: &Carry, wanted: &[LawVar]) -> Result<Vec<(Vec<u64>, Carry, f64)>, MetricsError> {
        let cfg = self.cfg;
        let sets = cfg.sets();
        let k = cfg.k();
        let state = self.state(carry);
        let want_y = wanted.iter().any(|v| v.needs_y());
        let want_z = wanted.iter().any(|v| v.needs_z());
        let rule_a = cfg.common_rule(i, None, &state)?;
        let rule_b = cfg.secret_rule(i, None, None, &state)?;
        let rule_t = cfg.prefix_rule(i, None, &state)?;
        let mut merged: HashMap<(Vec<u64>, Carry), f64> = HashMap::new();
        for (a, pa) in self.q_a.enumerate(rule_a.actions()) {
            let u = transform(&a)?;
            let uk = pack_bits(&u);
            if !self.q_b.contains_key(&uk) {
                let p_uv = self.p_uv;
                let masses = PrefixMasses::new(self.n, |b| {
                    let v = transform(b).expect("power of two");
                    v.iter().zip(&u).map(|(&vj, &uj)| p_uv[uj as usize][vj as usize]).product()
                });
                self.q_b.insert(uk, masses);
            }
            let outcomes_b = self.q_b[&uk].enumerate(rule_b.actions());
            for (b, pb) in outcomes_b {
                let v = transform(&b)?;
                let vk = pack_bits(&v);
                if !self.q_t.contains_key(&vk) {
                    let p_vx = self.p_vx;
                    let masses = PrefixMasses::new(self.n, |t| {
                        let x = transform(t).expect("power of two");
                        x.iter().zip(&v).map(|(&xj, &vj)| p_vx[vj as usize][xj as usize]).product()
                    });
                    self.q_t.insert(vk, masses);
                }
                let outcomes_t = self.q_t[&vk].enumerate(rule_t.actions());
                for (t, pt) in outcomes_t {
                    let x = transform(&t)?;
                    let next = Carry {
                        psi_u1: if i == 1 { gather(&a, cfg.psi_u1_positions()) } else { carry.psi_u1 },
                        o2: if i < k { gather(&a, cfg.o2_positions()) } else { 0 },
                        psi_vu: gather(&b, &sets.psi_vu),
                        prefix: gather(&t, &sets.v_x_vz),
                    };
                    let w = pa * pb * pt;
                    let channel = if want_y || want_z {
                        self.channel_outcomes(&x, want_y, want_z)
                    } else {
                        vec![(0, 0, 1.0)]
                    };
                    for (yk, zk, pc) in channel {
                        let record: Vec<u64> = wanted
                            .iter()
                            .map(|&var| self.value(var, i, &a, &u, &b, &v, &t, &x, yk, zk))
                            .collect();
                        *merged.entry((record, next)).or_insert(0.0) += w * pc;
                    }
                }
            }
        }
        Ok(merged.into_iter().map(|((r, c), p)| (r, c, p)).collect())
    }

    #[allow(clippy::too_many_arguments)]
    fn value(&self, var: LawVar, i: usize, a: &[u8], u: &[u8], b: &[u8], v: &[u8], t: &[u8], x: &[u8], yk: u64, zk: u64) -> u64 {
        let cfg = self.cfg;
        let sets = cfg.sets();
        let plan_a = cfg.common_plan(i).expect("block in range");
        let plan_b = cfg.secret_plan(i).expect("block in range");
        match var {
            LawVar::U(_) => pack_bits(u),
            LawVar::V(_) => pack_bits(v),
            LawVar::X(_) => pack_bits(x),
            LawVar::Y(_) => yk,
            LawVar::Z(_) => zk,
            LawVar::A(_) => pack_bits(a),
            LawVar::B(_) => pack_bits(b),
            LawVar::T(_) => pack_bits(t),
            LawVar::O(_) => gather(a, &plan_a.message),
            LawVar::S(_) => gather(b, &plan_b.secret),
            LawVar::M(_) => gather(b, &plan_b.private),
            LawVar::R(_) => gather(t, &cfg.prefix_plan().random),
            LawVar::PsiU1 => gather(a, cfg.psi_u1_positions()),
            LawVar::PsiU(j) if j == 1 => gather(a, cfg.psi_u1_positions()),
            LawVar::PsiU(_) => gather(a, &self.aligned),
            LawVar::PhiU(_) => gather(a, &sets.phi_u),
            LawVar::PsiVU(_) => gather(b, &sets.psi_vu),
            LawVar::PhiVU(_) => gather(b, &sets.phi_vu),
            LawVar::PsiXV1 => gather(t, &sets.v_x_vz),
        }
    }
}

/// Exact joint law of `vars` under the chained encoder with uniformly
/// random messages, sending every block through `channel`.
pub fn exact_induced_law(
    cfg: &ChainConfig,
    channel: &BroadcastChannel,
    vars: &[LawVar],
) -> Result<ExactLaw, MetricsError> {
    cfg.check_channel(channel)?;
    let n = cfg.n_len();
    if n > 16 {
        return Err(MetricsError::DomainTooLarge { what: "block joint", log_size: n as f64 });
    }
    if let Some(bad) = vars.iter().find(|v| v.block() == 0 || v.block() > cfg.k()) {
        return Err(MetricsError::MissingVariable(format!("{bad}")));
    }
    let mut kernel = Kernel::new(cfg, channel);
    // Record order: block by block, request order within a block.
    let mut order: Vec<usize> = Vec::with_capacity(vars.len());
    let mut dist: HashMap<(Carry, Vec<u64>), f64> = HashMap::new();
    dist.insert((Carry::default(), Vec::new()), 1.0);
    for i in 1..=cfg.k() {
        let in_block: Vec<usize> = (0..vars.len()).filter(|&t| vars[t].block() == i).collect();
        let wanted: Vec<LawVar> = in_block.iter().map(|&t| vars[t]).collect();
        order.extend(&in_block);
        let mut memo: HashMap<Carry, Vec<(Vec<u64>, Carry, f64)>> = HashMap::new();
        let mut next: HashMap<(Carry, Vec<u64>), f64> = HashMap::new();
        for ((carry, key), w) in dist {
            if !memo.contains_key(&carry) {
                let out = kernel.block(i, &carry, &wanted)?;
                memo.insert(carry, out);
            }
            for (rec, nc, p) in &memo[&carry] {
                let mut k2 = key.clone();
                k2.extend(rec);
                *next.entry((*nc, k2)).or_insert(0.0) += w * p;
            }
            if next.len() > LAW_DOMAIN_LIMIT {
                return Err(MetricsError::DomainTooLarge {
                    what: "induced session law",
                    log_size: log2_f(next.len() as f64),
                });
            }
        }
        dist = next;
    }
    let mut table: HashMap<Vec<u64>, f64> = HashMap::new();
    for ((_, rec), w) in dist {
        let mut key = vec![0u64; vars.len()];
        for (slot, &orig) in order.iter().enumerate() {
            key[orig] = rec[slot];
        }
        *table.entry(key).or_insert(0.0) += w;
    }
    Ok(ExactLaw { vars: vars.to_vec(), table })
}
