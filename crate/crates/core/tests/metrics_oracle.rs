mod common;

use std::collections::HashMap;

use common::{bsc_example, cascade, h2, layer_law};
use polarsec_core::metrics::{
    divergence, error_rate_experiment, exact_induced_law, leakage_estimate, leakage_exact, pack_bits,
    pack_symbols, residual_exact, residual_monte_carlo, source_block_law, variational_distance, EncoderLayer,
    LawVar, ZSummary,
};
use polarsec_core::polar::{transform, Layer, LayerModel};
use polarsec_core::sets::{build_sets, build_sets_unchecked, IndexSetFamily, PrimarySets};
use polarsec_core::source::{bsc, identity_channel, uniform_x_uvx};
use polarsec_core::{BroadcastChannel, ChainConfig, ChainState, JointSource, Method, ProfileSet, Var};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact_config(source: JointSource, n: usize, k: usize) -> ChainConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let ps = ProfileSet::estimate(&source, n, Method::Exact, 0, &mut rng).unwrap();
    ChainConfig::new(source, build_sets(&ps, 0.25).unwrap(), k).unwrap()
}

fn empty_family(n: usize) -> IndexSetFamily {
    IndexSetFamily::from_primary(PrimarySets { n_len: n, ..Default::default() }, 0.25, 0.0)
}

fn syms(bits: &[u8]) -> Vec<u32> {
    bits.iter().map(|&b| u32::from(b)).collect()
}

/// Joint law of `(U, V, X, Y, Z)` for a single block, built layer by layer
/// from brute-force posteriors with every message left uniform.
fn brute_block_law(cfg: &ChainConfig, channel: &BroadcastChannel) -> HashMap<Vec<u64>, f64> {
    let src = cfg.source();
    let n = cfg.n_len();
    let state = ChainState::default();
    let (mu, mv, mx) = (
        LayerModel::new(src, Layer::U),
        LayerModel::new(src, Layer::VGivenU),
        LayerModel::new(src, Layer::XGivenV),
    );
    let rule_a = cfg.common_rule(1, None, &state).unwrap();
    let rule_b = cfg.secret_rule(1, None, None, &state).unwrap();
    let rule_t = cfg.prefix_rule(1, None, &state).unwrap();
    let (cy, cz) = (channel.card_y(), channel.card_z());
    let mut out: HashMap<Vec<u64>, f64> = HashMap::new();
    for (a, pa) in layer_law(mu.probs(), &vec![0; n], rule_a.actions()) {
        let u = transform(&a).unwrap();
        for (b, pb) in layer_law(mv.probs(), &mv.cond_sequence(&[&syms(&u)], n), rule_b.actions()) {
            let v = transform(&b).unwrap();
            for (t, pt) in layer_law(mx.probs(), &mx.cond_sequence(&[&syms(&v)], n), rule_t.actions()) {
                let x = transform(&t).unwrap();
                for yz in 0..(cy * cz).pow(n as u32) {
                    let mut rest = yz;
                    let (mut y, mut z) = (vec![0u32; n], vec![0u32; n]);
                    let mut p = pa * pb * pt;
                    for j in 0..n {
                        let c = rest % (cy * cz);
                        rest /= cy * cz;
                        y[j] = (c / cz) as u32;
                        z[j] = (c % cz) as u32;
                        p *= channel.prob(x[j] as usize, y[j] as usize, z[j] as usize);
                    }
                    if p > 0.0 {
                        let key = vec![pack_bits(&u), pack_bits(&v), pack_bits(&x), pack_symbols(&y, cy), pack_symbols(&z, cz)];
                        *out.entry(key).or_insert(0.0) += p;
                    }
                }
            }
        }
    }
    out
}

fn assert_law_matches(cfg: &ChainConfig) {
    let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
    let vars = [LawVar::U(1), LawVar::V(1), LawVar::X(1), LawVar::Y(1), LawVar::Z(1)];
    let law = exact_induced_law(cfg, &channel, &vars).unwrap();
    let brute = brute_block_law(cfg, &channel);
    assert!((law.total() - 1.0).abs() < 1e-12);
    for (key, p) in law.iter() {
        let q = brute.get(key).copied().unwrap_or(0.0);
        assert!((p - q).abs() < 1e-12, "{key:?}: {p} vs {q}");
    }
    for (key, q) in &brute {
        assert!((law.prob(key) - q).abs() < 1e-12);
    }
}

#[test]
fn divergence_and_variation_examples() {
    let p = [0.5, 0.5];
    let q = [0.25, 0.75];
    assert!((variational_distance(&p, &q).unwrap() - 0.5).abs() < 1e-15);
    let d = 0.5 * (0.5f64 / 0.25).log2() + 0.5 * (0.5f64 / 0.75).log2();
    assert!((divergence(&p, &q).unwrap() - d).abs() < 1e-15);
    assert!((d - 0.2075).abs() < 1e-4);
    assert_eq!(divergence(&p, &p).unwrap(), 0.0);
    assert_eq!(divergence(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), f64::INFINITY);
    assert!(divergence(&[1.0], &[0.5, 0.5]).is_err());
}

#[test]
fn induced_law_matches_brute_force_enumeration() {
    assert_law_matches(&exact_config(bsc_example(0.05, 0.25), 2, 1));
    assert_law_matches(&exact_config(bsc_example(0.1, 0.3), 4, 1));
    assert_law_matches(&exact_config(cascade(0.2, 0.1, 0.3, 0.2), 2, 1));
    assert_law_matches(&ChainConfig::new(cascade(0.2, 0.1, 0.3, 0.2), empty_family(2), 1).unwrap());
}

#[test]
fn all_sample_rules_reproduce_the_source_law() {
    for src in [cascade(0.2, 0.1, 0.3, 0.2), cascade(0.4, 0.05, 0.1, 0.4), bsc_example(0.1, 0.2)] {
        for n in [2, 4] {
            let cfg = ChainConfig::new(src.clone(), empty_family(n), 1).unwrap();
            let channel = BroadcastChannel::from_source(&src).unwrap();
            let law = exact_induced_law(&cfg, &channel, &[LawVar::U(1), LawVar::V(1), LawVar::X(1)]).unwrap();
            let reference = source_block_law(&src, n, 1, &[Var::U, Var::V, Var::X]).unwrap();
            for (key, p) in reference.iter() {
                assert!((law.prob(key) - p).abs() <= 1e-10);
            }
            for (key, p) in law.iter() {
                assert!((reference.prob(key) - p).abs() <= 1e-10);
            }
            assert!(law.divergence_to(&reference).unwrap().abs() < 1e-10);
        }
    }
}

#[test]
fn constant_layer_is_a_point_mass() {
    let cfg = exact_config(bsc_example(0.05, 0.25), 4, 2);
    let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
    let law = exact_induced_law(&cfg, &channel, &[LawVar::U(1), LawVar::U(2)]).unwrap();
    assert_eq!(law.len(), 1);
    assert!((law.prob(&[0, 0]) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn pinsker_holds_for_random_pairs(raw in prop::collection::vec((0.001f64..1.0, 0.001f64..1.0), 2..12)) {
        let sp: f64 = raw.iter().map(|r| r.0).sum();
        let sq: f64 = raw.iter().map(|r| r.1).sum();
        let p: Vec<f64> = raw.iter().map(|r| r.0 / sp).collect();
        let q: Vec<f64> = raw.iter().map(|r| r.1 / sq).collect();
        let v = variational_distance(&p, &q).unwrap();
        let d = divergence(&p, &q).unwrap();
        prop_assert!(d >= -1e-12);
        prop_assert!(v <= (2.0 * std::f64::consts::LN_2 * d).sqrt() + 1e-12);
    }
}

#[test]
fn blind_eve_learns_nothing() {
    for src in [bsc_example(0.05, 0.5), cascade(0.2, 0.1, 0.3, 0.5)] {
        let cfg = exact_config(src, 4, 2);
        let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
        let rep = leakage_exact(&cfg, &channel).unwrap();
        assert!(rep.total.abs() <= 1e-10, "{}", rep.total);
        assert!(rep.per_block.iter().all(|l| l.abs() <= 1e-10));
    }
}

/// `U` constant, `V = X` uniform and a noiseless Eve, with every position
/// of the block carrying secret bits.
fn cleartext_config(n: usize, k: usize) -> ChainConfig {
    let src = JointSource::with_independent_channels(&uniform_x_uvx(), &bsc(0.1), 2, &identity_channel(), 2).unwrap();
    let all: Vec<usize> = (0..n).collect();
    let p = PrimarySets { n_len: n, v_v_u: all.clone(), v_v_uz: all, ..Default::default() };
    ChainConfig::new_unchecked(src, IndexSetFamily::from_primary(p, 0.25, 0.0), k).unwrap()
}

#[test]
fn cleartext_secret_leaks_fully() {
    for (n, k) in [(2, 1), (2, 2), (4, 1)] {
        let cfg = cleartext_config(n, k);
        let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
        let rep = leakage_exact(&cfg, &channel).unwrap();
        assert_eq!(rep.secret_bits, n * k);
        assert!((rep.total - (n * k) as f64).abs() < 1e-10, "{}", rep.total);
    }
    let cfg = cleartext_config(4, 1);
    let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let est = leakage_estimate(&cfg, &channel, 20_000, ZSummary::for_config(&cfg), &mut rng).unwrap();
    assert!((est.corrected - 4.0).abs() < 0.05, "{est:?}");
}

#[test]
fn exact_leakage_is_bounded_by_the_secret_length() {
    for (src, n, k) in [
        (bsc_example(0.05, 0.25), 4, 2),
        (bsc_example(0.05, 0.1), 4, 2),
        (bsc_example(0.01, 0.3), 2, 3),
        (cascade(0.2, 0.1, 0.3, 0.2), 2, 2),
    ] {
        let cfg = exact_config(src, n, k);
        let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
        let rep = leakage_exact(&cfg, &channel).unwrap();
        assert!(rep.total >= 0.0);
        assert!(rep.total <= rep.secret_bits as f64 + 1e-10);
        for &l in &rep.per_block {
            assert!(l >= 0.0 && l <= rep.total + 1e-10);
        }
        for row in rep.bound_rows() {
            assert!(!row.hard || row.passes(), "{row:?}");
        }
    }
}

#[test]
fn degrading_eve_never_increases_leakage() {
    let cfg = cleartext_config(4, 1);
    let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
    let base = leakage_exact(&cfg, &channel).unwrap().total;
    let mut last = base;
    for flip in [0.05, 0.15, 0.3, 0.5] {
        let worse = channel.garble_eve(&bsc(flip), 2).unwrap();
        let l = leakage_exact(&cfg, &worse).unwrap().total;
        assert!(l <= base + 1e-10 && l <= last + 1e-10, "flip {flip}: {l} after {last}");
        last = l;
    }
    assert!(last.abs() < 1e-10);
    // A garbled alphabet of another size no longer matches the code's model.
    let erase = [0.8, 0.0, 0.2, 0.0, 0.8, 0.2];
    assert!(leakage_exact(&cfg, &channel.garble_eve(&erase, 3).unwrap()).is_err());
}

#[test]
fn noisier_eve_estimate_is_lower() {
    let cfg = cleartext_config(4, 1);
    let channel = BroadcastChannel::from_source(cfg.source()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let near = leakage_estimate(&cfg, &channel.garble_eve(&bsc(0.25), 2).unwrap(), 10_000, ZSummary::Full, &mut rng).unwrap();
    let far = leakage_estimate(&cfg, &channel.garble_eve(&bsc(0.45), 2).unwrap(), 10_000, ZSummary::Full, &mut rng).unwrap();
    let exact = 4.0 * (1.0 - h2(0.25));
    assert!((near.corrected - exact).abs() < 0.05, "{near:?} vs {exact}");
    assert!(far.corrected < near.corrected);
}

/// Residual rate from the brute-force block law of the secret layer.
fn brute_secret_residual(cfg: &ChainConfig) -> f64 {
    let src = cfg.source();
    let n = cfg.n_len();
    let state = ChainState::default();
    let (mu, mv) = (LayerModel::new(src, Layer::U), LayerModel::new(src, Layer::VGivenU));
    let rule_a = cfg.common_rule(1, None, &state).unwrap();
    let rule_b = cfg.secret_rule(1, None, None, &state).unwrap();
    // Joint of (u, b) as a list.
    let mut joint: Vec<(Vec<u8>, Vec<u8>, f64)> = Vec::new();
    for (a, pa) in layer_law(mu.probs(), &vec![0; n], rule_a.actions()) {
        let u = transform(&a).unwrap();
        for (b, pb) in layer_law(mv.probs(), &mv.cond_sequence(&[&syms(&u)], n), rule_b.actions()) {
            joint.push((u.clone(), b, pa * pb));
        }
    }
    let mut total = 0.0;
    for j in (0..n).filter(|j| !cfg.sets().v_v_u.contains(j)) {
        // H(B_j | B^{j-1}, U) = H(B^{j}, U) − H(B^{j-1}, U).
        let h = |len: usize| {
            let mut m: HashMap<(Vec<u8>, Vec<u8>), f64> = HashMap::new();
            for (u, b, p) in &joint {
                *m.entry((u.clone(), b[..len].to_vec())).or_insert(0.0) += p;
            }
            m.values().filter(|&&p| p > 0.0).map(|p| -p * p.log2()).sum::<f64>()
        };
        total += h(j + 1) - h(j);
    }
    total / n as f64
}

#[test]
fn residual_exact_matches_enumeration() {
    for src in [cascade(0.2, 0.1, 0.3, 0.2), cascade(0.3, 0.2, 0.1, 0.1)] {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ps = ProfileSet::estimate(&src, 4, Method::Exact, 0, &mut rng).unwrap();
        let cfg = ChainConfig::new_unchecked(src, build_sets_unchecked(&ps, 0.25).unwrap(), 1).unwrap();
        let exact = residual_exact(&cfg, EncoderLayer::Secret, 1).unwrap();
        let brute = brute_secret_residual(&cfg);
        assert!((exact - brute).abs() < 1e-9, "{exact} vs {brute}");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for layer in EncoderLayer::ALL {
            let e = residual_exact(&cfg, layer, 1).unwrap();
            let mc = residual_monte_carlo(&cfg, layer, 1, 20_000, &mut rng).unwrap();
            assert!((mc.mean - e).abs() <= 4.0 * mc.std_error + 1e-12, "{layer:?}: {e} vs {mc:?}");
        }
    }
}

#[test]
fn deterministic_layers_need_no_randomness() {
    let cfg = exact_config(bsc_example(0.05, 0.25), 4, 2);
    for block in 1..=2 {
        assert_eq!(residual_exact(&cfg, EncoderLayer::Common, block).unwrap(), 0.0);
        assert_eq!(residual_exact(&cfg, EncoderLayer::Prefix, block).unwrap(), 0.0);
    }
}

#[test]
fn noiseless_channels_never_err() {
    let src = JointSource::with_independent_channels(&uniform_x_uvx(), &identity_channel(), 2, &bsc(0.25), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in [1, 2, 4] {
        let ps = ProfileSet::estimate(&src, 64, Method::MonteCarlo, 1000, &mut rng).unwrap();
        let cfg = ChainConfig::new(src.clone(), build_sets(&ps, 0.25).unwrap(), k).unwrap();
        let stats = error_rate_experiment(&cfg, &BroadcastChannel::identity(), 50, &mut rng).unwrap();
        assert_eq!(stats.bob_common.errors + stats.bob_secret_private.errors + stats.eve_common.errors, 0);
        assert_eq!(stats.trials(), 50);
    }
}

#[test]
fn guessing_bob_misses_the_secret() {
    let cfg = exact_config(bsc_example(0.05, 0.25), 4, 1);
    // With a single block the seed carries Ψ^{V|U}_1, which may overlap the
    // secret positions; only the remaining secret bits must be guessed.
    let seeded = polarsec_core::sets::union(&cfg.sets().psi_vu, &cfg.sets().phi_vu);
    let s_len = polarsec_core::sets::difference(&cfg.secret_plan(1).unwrap().secret, &seeded).len();
    assert!(s_len > 0);
    let blind = BroadcastChannel::independent(&bsc(0.5), 2, &bsc(0.25), 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let trials = 4000;
    let stats = error_rate_experiment(&cfg, &blind, trials, &mut rng).unwrap();
    let expected = 1.0 - 0.5f64.powi(s_len as i32);
    let (lo, hi) = stats.bob_secret.wilson(3.29);
    assert!(lo <= expected && expected <= hi, "{:?} expected {expected}", stats.bob_secret);
}
