//! Independent brute-force helpers shared by the integration tests.
#![allow(dead_code)]

use polarsec_core::sets::{IndexSetFamily, PrimarySets};
use polarsec_core::source::{bec, bsc, cascade_uvx, identity_channel, uniform_x_uvx};
use polarsec_core::JointSource;

/// `x = a G_n` from the matrix definition: `x_j = ⊕ a_i` over `i ⊇ j`.
pub fn kron_transform(a: &[u8]) -> Vec<u8> {
    let n = a.len();
    (0..n)
        .map(|j| (0..n).filter(|&i| i & j == j).fold(0u8, |acc, i| acc ^ a[i]))
        .collect()
}

pub fn bits_of(value: usize, n: usize) -> Vec<u8> {
    (0..n).map(|t| ((value >> t) & 1) as u8).collect()
}

/// Probability of the polarized vector `a` under the per-symbol joint
/// `table[c][x]` with side sequence `cond`.
pub fn block_prob(table: &[[f64; 2]], cond: &[u32], a: &[u8]) -> f64 {
    let x = kron_transform(a);
    x.iter().zip(cond).map(|(&xj, &c)| table[c as usize][xj as usize]).product()
}

/// `P(a_i = 1 | a^{1:i-1} = prefix, side)` by summing over all completions.
/// `None` when the prefix has probability zero.
pub fn brute_posterior(table: &[[f64; 2]], cond: &[u32], prefix: &[u8]) -> Option<f64> {
    let n = cond.len();
    let i = prefix.len();
    let mut mass = [0.0f64; 2];
    for rest in 0..1usize << (n - i) {
        let mut a = prefix.to_vec();
        a.extend(bits_of(rest, n - i));
        mass[a[i] as usize] += block_prob(table, cond, &a);
    }
    let total = mass[0] + mass[1];
    (total > 0.0).then(|| mass[1] / total)
}

pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// The running example: U constant, V = X uniform, Bob BSC(pb), Eve BSC(pe).
pub fn bsc_example(pb: f64, pe: f64) -> JointSource {
    JointSource::bsc_example(pb, pe).unwrap()
}

/// U constant, V = X uniform, Bob noiseless, Eve BSC(pe).
pub fn noiseless_bob(pe: f64) -> JointSource {
    JointSource::with_independent_channels(&uniform_x_uvx(), &identity_channel(), 2, &bsc(pe), 2).unwrap()
}

/// A source where every layer is nontrivial: U ~ Bern(1/2), V = U ⊕ Bern(a),
/// X = V ⊕ Bern(b), Bob BEC(e), Eve BSC(p).
pub fn cascade(a: f64, b: f64, e: f64, p: f64) -> JointSource {
    JointSource::with_independent_channels(&cascade_uvx(0.5, a, b), &bec(e), 3, &bsc(p), 2).unwrap()
}

/// A hand-placed feasible family at N = 16 in which every derived set is
/// nonempty: |I_UY \ I_UZ| = |A_UYZ| = 2, |B_V|UY| = 2, |V_X|VZ| = 4.
pub fn crafted_family() -> IndexSetFamily {
    let r = |a: usize, b: usize| (a..b).collect::<Vec<usize>>();
    let p = PrimarySets {
        n_len: 16,
        h_u: r(4, 16),
        v_u: r(6, 16),
        h_u_y: vec![4, 5, 6, 7, 8],
        h_u_z: vec![4, 5, 6, 9, 10],
        v_v_u: r(2, 16),
        v_v_uz: r(5, 16),
        h_v_uy: vec![0, 1, 2, 3],
        v_v_uy: vec![3],
        v_x_v: r(8, 16),
        v_x_vz: r(12, 16),
    };
    IndexSetFamily::from_primary(p, 0.25, polarsec_core::math::delta_n(16, 0.25))
}

/// Law of the polarized vector drawn under `actions`, enumerated over all
/// `2^N` vectors. `Fixed` positions must be absent (the caller makes
/// message bits uniform). Sampled positions use [`brute_posterior`], or a
/// fair coin when the prefix has no mass.
pub fn layer_law(table: &[[f64; 2]], cond: &[u32], actions: &[polarsec_core::polar::Action]) -> Vec<(Vec<u8>, f64)> {
    use polarsec_core::polar::Action;
    let n = cond.len();
    (0..1usize << n)
        .map(|v| {
            let a = bits_of(v, n);
            let mut p = 1.0;
            for j in 0..n {
                p *= match actions[j] {
                    Action::Fixed(b) => f64::from(u8::from(a[j] == b)),
                    Action::Uniform => 0.5,
                    Action::Sample => {
                        let q = brute_posterior(table, cond, &a[..j]).unwrap_or(0.5);
                        if a[j] == 1 { q } else { 1.0 - q }
                    }
                };
            }
            (a, p)
        })
        .filter(|(_, p)| *p > 0.0)
        .collect()
}
