//! The discrete memoryless source `(U, V, X, Y, Z)` with `U - V - X - (Y, Z)`.
//!
//! A source is given by a table over `(u, v, x)` and a channel table of
//! `(y, z)` given `x`, so the final link of the Markov chain holds by
//! construction. `U`, `V` and `X` are binary; `Y` and `Z` have arbitrary
//! finite alphabets. All information quantities are in bits and are computed
//! by direct summation over the joint table.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;

use crate::error::SourceError;
use crate::math::{entropy, PROB_EPS};

/// One of the five source variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    U,
    V,
    X,
    Y,
    Z,
}

impl Var {
    pub const ALL: [Var; 5] = [Var::U, Var::V, Var::X, Var::Y, Var::Z];

    fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Var::U => "U",
            Var::V => "V",
            Var::X => "X",
            Var::Y => "Y",
            Var::Z => "Z",
        }
    }
}

/// A subset of `{U, V, X, Y, Z}`. Iteration order is always `U, V, X, Y, Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn of(vars: &[Var]) -> Self {
        VarSet(vars.iter().fold(0, |acc, v| acc | v.bit()))
    }

    pub fn contains(self, v: Var) -> bool {
        self.0 & v.bit() != 0
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn intersects(self, other: VarSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        Var::ALL.into_iter().filter(move |v| self.contains(*v))
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in self.iter() {
            f.write_str(v.name())?;
        }
        Ok(())
    }
}

/// Rates in bits per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RateTuple {
    pub r_o: f64,
    pub r_m: f64,
    pub r_s: f64,
    pub r_r: f64,
}

/// A constraint that a source fails.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The joint table does not sum to one.
    Normalization { sum: f64 },
    /// A row of the channel table does not sum to one.
    ChannelRow { x: usize, sum: f64 },
    /// `I(U;X|V)` is not zero, so `U - V - X` fails.
    MarkovUvx { cmi: f64 },
    /// `I(V;Y|U) - I(V;Z|U)` is not positive.
    SecrecyNonpositive { value: f64 },
    /// `I(U;Y) > I(U;Z)`.
    CommonAdvantage { i_uy: f64, i_uz: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Normalization { sum } => write!(f, "joint pmf sums to {sum}, not 1"),
            Violation::ChannelRow { x, sum } => {
                write!(f, "channel row for x = {x} sums to {sum}, not 1")
            }
            Violation::MarkovUvx { cmi } => write!(f, "U - V - X fails: I(U;X|V) = {cmi:e}"),
            Violation::SecrecyNonpositive { value } => {
                write!(f, "I(V;Y|U) - I(V;Z|U) = {value} is not positive")
            }
            Violation::CommonAdvantage { i_uy, i_uz } => {
                write!(f, "I(U;Y) = {i_uy} exceeds I(U;Z) = {i_uz}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// One draw of `(u, v, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Symbol {
    pub u: u8,
    pub v: u8,
    pub x: u8,
    pub y: u32,
    pub z: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSource {
    card_y: usize,
    card_z: usize,
    factor_uvx: [f64; 8],
    factor_yz_given_x: Vec<f64>,
    pmf: Vec<f64>,
}

const NORMALIZATION_TOL: f64 = 1e-12;
const MARKOV_TOL: f64 = 1e-10;

impl JointSource {
    /// Builds a source from `p(u,v,x)` (indexed `4u + 2v + x`) and
    /// `p(y,z|x)` (indexed `x·|Y||Z| + y·|Z| + z`).
    ///
    /// Structural problems are errors. Normalization and the standing
    /// assumptions are left to [`JointSource::validate`].
    pub fn from_factors(
        factor_uvx: &[f64],
        factor_yz_given_x: &[f64],
        card_y: usize,
        card_z: usize,
    ) -> Result<Self, SourceError> {
        if card_y == 0 {
            return Err(SourceError::Cardinality { var: "Y", expected: ">= 1".into(), got: 0 });
        }
        if card_z == 0 {
            return Err(SourceError::Cardinality { var: "Z", expected: ">= 1".into(), got: 0 });
        }
        if factor_uvx.len() != 8 {
            return Err(SourceError::TableLength {
                table: "factor_uvx",
                expected: 8,
                got: factor_uvx.len(),
            });
        }
        let yz = card_y * card_z;
        if factor_yz_given_x.len() != 2 * yz {
            return Err(SourceError::TableLength {
                table: "factor_yz_given_x",
                expected: 2 * yz,
                got: factor_yz_given_x.len(),
            });
        }
        check_entries("factor_uvx", factor_uvx)?;
        check_entries("factor_yz_given_x", factor_yz_given_x)?;
        let mut uvx = [0.0; 8];
        uvx.copy_from_slice(factor_uvx);
        let mut pmf = vec![0.0; 8 * yz];
        for (uvx_idx, &p) in uvx.iter().enumerate() {
            let x = uvx_idx & 1;
            for (k, &w) in factor_yz_given_x[x * yz..(x + 1) * yz].iter().enumerate() {
                pmf[uvx_idx * yz + k] = p * w;
            }
        }
        Ok(JointSource {
            card_y,
            card_z,
            factor_uvx: uvx,
            factor_yz_given_x: factor_yz_given_x.to_vec(),
            pmf,
        })
    }

    /// Source with independent receivers: `p(y,z|x) = bob(y|x)·eve(z|x)`,
    /// both given row-major as `x·card + symbol`.
    pub fn with_independent_channels(
        factor_uvx: &[f64],
        bob: &[f64],
        card_y: usize,
        eve: &[f64],
        card_z: usize,
    ) -> Result<Self, SourceError> {
        if bob.len() != 2 * card_y {
            return Err(SourceError::TableLength { table: "bob", expected: 2 * card_y, got: bob.len() });
        }
        if eve.len() != 2 * card_z {
            return Err(SourceError::TableLength { table: "eve", expected: 2 * card_z, got: eve.len() });
        }
        Self::from_factors(factor_uvx, &product_channel(bob, card_y, eve, card_z), card_y, card_z)
    }

    /// `U` constant, `V = X` uniform, Bob and Eve binary symmetric channels.
    pub fn bsc_example(p_bob: f64, p_eve: f64) -> Result<Self, SourceError> {
        Self::with_independent_channels(&uniform_x_uvx(), &bsc(p_bob), 2, &bsc(p_eve), 2)
    }

    /// Returns a copy with the channel table replaced.
    pub fn with_channel(
        &self,
        factor_yz_given_x: &[f64],
        card_y: usize,
        card_z: usize,
    ) -> Result<Self, SourceError> {
        Self::from_factors(&self.factor_uvx, factor_yz_given_x, card_y, card_z)
    }

    pub fn card_u(&self) -> usize {
        2
    }
    pub fn card_v(&self) -> usize {
        2
    }
    pub fn card_x(&self) -> usize {
        2
    }
    pub fn card_y(&self) -> usize {
        self.card_y
    }
    pub fn card_z(&self) -> usize {
        self.card_z
    }
    pub fn factor_uvx(&self) -> &[f64; 8] {
        &self.factor_uvx
    }
    pub fn factor_yz_given_x(&self) -> &[f64] {
        &self.factor_yz_given_x
    }
    /// Joint table indexed `((((u·2 + v)·2 + x)·|Y| + y)·|Z| + z)`.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn card(&self, v: Var) -> usize {
        match v {
            Var::Y => self.card_y,
            Var::Z => self.card_z,
            _ => 2,
        }
    }

    /// Size of the mixed-radix alphabet of a variable group.
    pub fn group_card(&self, set: VarSet) -> usize {
        set.iter().map(|v| self.card(v)).product()
    }

    fn decode_index(&self, idx: usize) -> [usize; 5] {
        let z = idx % self.card_z;
        let rest = idx / self.card_z;
        let y = rest % self.card_y;
        let uvx = rest / self.card_y;
        [uvx >> 2, (uvx >> 1) & 1, uvx & 1, y, z]
    }

    /// Nonzero entries of the joint table with their `(u, v, x, y, z)` values.
    pub fn entries(&self) -> impl Iterator<Item = ([usize; 5], f64)> + '_ {
        self.pmf
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(idx, &p)| (self.decode_index(idx), p))
    }

    /// Mixed-radix code of the values of `set` (first variable most significant).
    pub fn group_code(&self, set: VarSet, values: &[usize; 5]) -> usize {
        set.iter().fold(0, |acc, v| acc * self.card(v) + values[v as usize])
    }

    /// Marginal table over `set`, indexed by [`JointSource::group_code`].
    pub fn marginal(&self, set: VarSet) -> Vec<f64> {
        let mut out = vec![0.0; self.group_card(set)];
        for (idx, &p) in self.pmf.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let vals = self.decode_index(idx);
            out[self.group_code(set, &vals)] += p;
        }
        out
    }

    /// Joint entropy `H(set)`.
    pub fn joint_entropy(&self, set: VarSet) -> f64 {
        entropy(self.marginal(set))
    }

    /// `H(target | given)`.
    pub fn conditional_entropy(&self, target: VarSet, given: VarSet) -> Result<f64, SourceError> {
        if target.is_empty() {
            return Err(SourceError::EmptyGroup);
        }
        if target.intersects(given) {
            return Err(SourceError::OverlappingGroups);
        }
        Ok(self.joint_entropy(target.union(given)) - self.joint_entropy(given))
    }

    /// `I(a; b | given)`.
    pub fn mutual_information(&self, a: VarSet, b: VarSet, given: VarSet) -> Result<f64, SourceError> {
        if a.is_empty() || b.is_empty() {
            return Err(SourceError::EmptyGroup);
        }
        if a.intersects(b) || a.intersects(given) || b.intersects(given) {
            return Err(SourceError::OverlappingGroups);
        }
        let h = |s: VarSet| self.joint_entropy(s);
        Ok(h(a.union(given)) + h(b.union(given)) - h(a.union(b).union(given)) - h(given))
    }

    fn mi(&self, a: Var, b: Var, given: &[Var]) -> f64 {
        self.mutual_information(VarSet::of(&[a]), VarSet::of(&[b]), VarSet::of(given))
            .expect("distinct single variables")
    }

    /// Normalization, channel rows, the `U - V - X` link and the two
    /// standing assumptions on the channel advantage.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        let sum: f64 = self.pmf.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            violations.push(Violation::Normalization { sum });
        }
        let yz = self.card_y * self.card_z;
        for x in 0..2 {
            let row: f64 = self.factor_yz_given_x[x * yz..(x + 1) * yz].iter().sum();
            if (row - 1.0).abs() > NORMALIZATION_TOL {
                violations.push(Violation::ChannelRow { x, sum: row });
            }
        }
        if !violations.is_empty() {
            return ValidationReport { violations };
        }
        let cmi = self.mi(Var::U, Var::X, &[Var::V]);
        if cmi > MARKOV_TOL {
            violations.push(Violation::MarkovUvx { cmi });
        }
        let secrecy = self.mi(Var::V, Var::Y, &[Var::U]) - self.mi(Var::V, Var::Z, &[Var::U]);
        if secrecy <= 0.0 {
            violations.push(Violation::SecrecyNonpositive { value: secrecy });
        }
        let i_uy = self.mi(Var::U, Var::Y, &[]);
        let i_uz = self.mi(Var::U, Var::Z, &[]);
        if i_uy > i_uz + MARKOV_TOL {
            violations.push(Violation::CommonAdvantage { i_uy, i_uz });
        }
        ValidationReport { violations }
    }

    /// `(min[I(U;Y), I(U;Z)], I(V;Z|U), I(V;Y|U) − I(V;Z|U), I(X;Z|V))`.
    pub fn theorem1_corner(&self) -> RateTuple {
        let i_uy = self.mi(Var::U, Var::Y, &[]);
        let i_uz = self.mi(Var::U, Var::Z, &[]);
        let i_vz_u = self.mi(Var::V, Var::Z, &[Var::U]);
        let i_vy_u = self.mi(Var::V, Var::Y, &[Var::U]);
        let i_xz_v = self.mi(Var::X, Var::Z, &[Var::V]);
        RateTuple {
            r_o: i_uy.min(i_uz).max(0.0),
            r_m: i_vz_u.max(0.0),
            r_s: (i_vy_u - i_vz_u).max(0.0),
            r_r: i_xz_v.max(0.0),
        }
    }

    /// `count` i.i.d. draws of `(u, v, x, y, z)`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<Symbol> {
        let sampler = SymbolSampler::new(self);
        (0..count).map(|_| sampler.draw(rng)).collect()
    }
}

/// Inverse-CDF sampler over the joint table.
#[derive(Debug, Clone)]
pub struct SymbolSampler {
    cdf: Vec<f64>,
    decoded: Vec<Symbol>,
}

impl SymbolSampler {
    pub fn new(source: &JointSource) -> Self {
        let mut cdf = Vec::new();
        let mut decoded = Vec::new();
        let mut acc = 0.0;
        for (idx, &p) in source.pmf.iter().enumerate() {
            if p <= PROB_EPS {
                continue;
            }
            acc += p;
            cdf.push(acc);
            let [u, v, x, y, z] = source.decode_index(idx);
            decoded.push(Symbol { u: u as u8, v: v as u8, x: x as u8, y: y as u32, z: z as u32 });
        }
        SymbolSampler { cdf, decoded }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Symbol {
        let total = *self.cdf.last().expect("source has positive mass");
        let r: f64 = rng.gen::<f64>() * total;
        let k = self.cdf.partition_point(|&c| c <= r).min(self.decoded.len() - 1);
        self.decoded[k]
    }
}

fn check_entries(table: &'static str, t: &[f64]) -> Result<(), SourceError> {
    for (index, &value) in t.iter().enumerate() {
        if !value.is_finite() || value < 0.0 {
            return Err(SourceError::BadEntry { table, index, value });
        }
    }
    Ok(())
}

/// Binary symmetric channel with crossover `p`, row-major `x·2 + y`.
pub fn bsc(p: f64) -> [f64; 4] {
    [1.0 - p, p, p, 1.0 - p]
}

/// Noiseless binary channel.
pub fn identity_channel() -> [f64; 4] {
    [1.0, 0.0, 0.0, 1.0]
}

/// Binary erasure channel with erasure probability `e`; symbol 2 is the erasure.
pub fn bec(e: f64) -> [f64; 6] {
    [1.0 - e, 0.0, e, 0.0, 1.0 - e, e]
}

/// `p(u,v,x)` with `U = 0`, `V = X` uniform.
pub fn uniform_x_uvx() -> [f64; 8] {
    let mut t = [0.0; 8];
    t[0b000] = 0.5;
    t[0b011] = 0.5;
    t
}

/// `U ~ Bern(p_u)`, `V = U ⊕ Bern(a)`, `X = V ⊕ Bern(b)`.
pub fn cascade_uvx(p_u: f64, a: f64, b: f64) -> [f64; 8] {
    let mut t = [0.0; 8];
    for (idx, slot) in t.iter_mut().enumerate() {
        let (u, v, x) = (idx >> 2, (idx >> 1) & 1, idx & 1);
        let pu = if u == 1 { p_u } else { 1.0 - p_u };
        let pv = if v != u { a } else { 1.0 - a };
        let px = if x != v { b } else { 1.0 - b };
        *slot = pu * pv * px;
    }
    t
}

/// `p(y,z|x) = bob(y|x)·eve(z|x)`.
pub fn product_channel(bob: &[f64], card_y: usize, eve: &[f64], card_z: usize) -> Vec<f64> {
    let mut out = vec![0.0; 2 * card_y * card_z];
    for x in 0..2 {
        for y in 0..card_y {
            for z in 0..card_z {
                out[(x * card_y + y) * card_z + z] = bob[x * card_y + y] * eve[x * card_z + z];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::h_b;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[Var]) -> VarSet {
        VarSet::of(v)
    }

    #[test]
    fn degenerate_source_passes() {
        let s = JointSource::bsc_example(0.05, 0.25).unwrap();
        assert!(s.validate().is_valid(), "{:?}", s.validate());
    }

    #[test]
    fn scaled_pmf_fails_normalization() {
        let uvx = uniform_x_uvx().map(|p| p * 0.5);
        let chan = product_channel(&bsc(0.1), 2, &bsc(0.2), 2);
        let s = JointSource::from_factors(&uvx, &chan, 2, 2).unwrap();
        let r = s.validate();
        assert!(matches!(r.violations[0], Violation::Normalization { sum } if (sum - 0.5).abs() < 1e-12));
    }

    #[test]
    fn eve_better_fails_secrecy() {
        let s = JointSource::bsc_example(0.3, 0.05).unwrap();
        let r = s.validate();
        assert!(r.violations.iter().any(|v| matches!(v, Violation::SecrecyNonpositive { .. })));
    }

    #[test]
    fn broken_uvx_markov_is_reported() {
        // X depends on U directly while V is independent noise.
        let mut uvx = [0.0; 8];
        for u in 0..2 {
            for v in 0..2 {
                uvx[(u << 2) | (v << 1) | u] = 0.25;
            }
        }
        let s = JointSource::with_independent_channels(&uvx, &bsc(0.05), 2, &bsc(0.25), 2).unwrap();
        assert!(s.validate().violations.iter().any(|v| matches!(v, Violation::MarkovUvx { .. })));
    }

    #[test]
    fn conditional_entropy_examples() {
        let noiseless = JointSource::with_independent_channels(
            &uniform_x_uvx(),
            &identity_channel(),
            2,
            &[0.5, 0.5, 0.5, 0.5],
            2,
        )
        .unwrap();
        let hxy = noiseless.conditional_entropy(set(&[Var::X]), set(&[Var::Y])).unwrap();
        assert!(hxy.abs() < 1e-12);
        let hxz = noiseless.conditional_entropy(set(&[Var::X]), set(&[Var::Z])).unwrap();
        assert!((hxz - 1.0).abs() < 1e-12);
        let bsc01 = JointSource::bsc_example(0.1, 0.25).unwrap();
        let h = bsc01.conditional_entropy(set(&[Var::X]), set(&[Var::Y])).unwrap();
        assert!((h - 0.4690).abs() < 1e-4);
        assert!((h - h_b(0.1)).abs() < 1e-12);
    }

    #[test]
    fn overlapping_groups_rejected() {
        let s = JointSource::bsc_example(0.1, 0.2).unwrap();
        assert_eq!(
            s.conditional_entropy(set(&[Var::X, Var::Y]), set(&[Var::Y])),
            Err(SourceError::OverlappingGroups)
        );
        assert_eq!(
            s.mutual_information(set(&[Var::X]), set(&[Var::X]), VarSet::EMPTY),
            Err(SourceError::OverlappingGroups)
        );
    }

    #[test]
    fn corner_examples() {
        let s = JointSource::bsc_example(0.05, 0.25).unwrap();
        let c = s.theorem1_corner();
        assert!((c.r_s - (h_b(0.25) - h_b(0.05))).abs() < 1e-12);
        assert!((c.r_s - 0.5250).abs() < 1e-3);
        assert!(c.r_r.abs() < 1e-12);
        assert!(c.r_o.abs() < 1e-12);
        assert!((c.r_m - (1.0 - h_b(0.25))).abs() < 1e-12);

        // A constant V carries nothing; every component of the corner vanishes.
        let mut uvx = [0.0; 8];
        uvx[0] = 0.5;
        uvx[1] = 0.5;
        let constant_v = JointSource::with_independent_channels(&uvx, &bsc(0.1), 2, &[0.3, 0.7, 0.3, 0.7], 2)
            .unwrap();
        let c = constant_v.theorem1_corner();
        assert!([c.r_o, c.r_m, c.r_s, c.r_r].iter().all(|r| r.abs() < 1e-12));

        // With V = X and Eve independent of X, only the secret rate survives.
        let blind = JointSource::with_independent_channels(&uniform_x_uvx(), &bsc(0.1), 2, &[0.3, 0.7, 0.3, 0.7], 2)
            .unwrap();
        let c = blind.theorem1_corner();
        let ixy = blind.mutual_information(set(&[Var::X]), set(&[Var::Y]), VarSet::EMPTY).unwrap();
        assert!(c.r_o.abs() < 1e-12 && c.r_m.abs() < 1e-12 && c.r_r.abs() < 1e-12);
        assert!((c.r_s - ixy).abs() < 1e-12);
    }

    #[test]
    fn point_mass_samples_constant() {
        let mut uvx = [0.0; 8];
        uvx[0b101] = 1.0;
        let s = JointSource::with_independent_channels(&uvx, &identity_channel(), 2, &identity_channel(), 2)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for sym in s.sample(100, &mut rng) {
            assert_eq!(sym, Symbol { u: 1, v: 0, x: 1, y: 1, z: 1 });
        }
    }

    #[test]
    fn sampling_matches_marginal_and_is_deterministic() {
        let s = JointSource::with_independent_channels(&cascade_uvx(0.3, 0.2, 0.1), &bsc(0.1), 2, &bsc(0.2), 2)
            .unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        let a = s.sample(1000, &mut r1);
        let b = s.sample(1000, &mut r2);
        assert_eq!(a, b);

        let n = 1_000_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let ones = s.sample(n, &mut rng).iter().filter(|t| t.x == 1).count() as f64;
        let p = s.marginal(set(&[Var::X]))[1];
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((ones / n as f64 - p).abs() <= 3.0 * sigma);
    }
}
