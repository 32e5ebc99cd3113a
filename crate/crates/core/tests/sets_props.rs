mod common;

use common::{bits_of, block_prob, bsc_example, crafted_family, noiseless_bob};
use polarsec_core::math::delta_n;
use polarsec_core::sets::{
    build_sets, difference, estimate_profile, intersection, is_subset, rate_report, union, IndexSetFamily,
};
use polarsec_core::{JointSource, Layer, Method, ProfileSet, SetsError};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-symbol table `p(c, t)` of a layer straight from the joint pmf.
/// Returns the table and the conditioning alphabet size.
fn layer_table(src: &JointSource, target: usize, cond: &[usize]) -> Vec<[f64; 2]> {
    let cards = [src.card_u(), src.card_v(), src.card_x(), src.card_y(), src.card_z()];
    let size: usize = cond.iter().map(|&c| cards[c]).product();
    let mut table = vec![[0.0; 2]; size];
    for (vals, p) in src.entries() {
        let code = cond.iter().fold(0, |acc, &c| acc * cards[c] + vals[c]);
        table[code][vals[target]] += p;
    }
    table
}

/// `H(A_j | A^{j-1}, C^N)` for every j by summing over every block.
fn brute_profile(table: &[[f64; 2]], n: usize) -> Vec<f64> {
    let card = table.len();
    let mut joint = Vec::new();
    for c_code in 0..card.pow(n as u32) {
        let mut rest = c_code;
        let cond: Vec<u32> = (0..n)
            .map(|_| {
                let c = rest % card;
                rest /= card;
                c as u32
            })
            .collect();
        for v in 0..1usize << n {
            let p = block_prob(table, &cond, &bits_of(v, n));
            if p > 0.0 {
                joint.push((c_code, bits_of(v, n), p));
            }
        }
    }
    let h = |len: usize| {
        let mut m = std::collections::HashMap::<(usize, Vec<u8>), f64>::new();
        for (c, a, p) in &joint {
            *m.entry((*c, a[..len].to_vec())).or_insert(0.0) += p;
        }
        m.values().map(|p| -p * p.log2()).sum::<f64>()
    };
    (0..n).map(|j| h(j + 1) - h(j)).collect()
}

fn above(profile: &[f64], t: f64) -> Vec<usize> {
    (0..profile.len()).filter(|&j| profile[j] > t).collect()
}

#[test]
fn exact_family_matches_exhaustive_entropies() {
    let src = bsc_example(0.05, 0.25);
    let n = 8;
    let d = delta_n(n, 0.25);
    let (u, v, x, y, z) = (0, 1, 2, 3, 4);
    let prof = |t: usize, c: &[usize]| brute_profile(&layer_table(&src, t, c), n);
    let h_u = above(&prof(u, &[]), d);
    let v_u = above(&prof(u, &[]), 1.0 - d);
    let h_u_y = above(&prof(u, &[y]), d);
    let h_u_z = above(&prof(u, &[z]), d);
    let p_vu = prof(v, &[u]);
    let v_v_u = above(&p_vu, 1.0 - d);
    let v_v_uz = intersection(&above(&prof(v, &[u, z]), 1.0 - d), &v_v_u);
    let p_vuy = prof(v, &[u, y]);
    let h_v_uy = above(&p_vuy, d);
    let v_v_uy = intersection(&above(&p_vuy, 1.0 - d), &v_v_u);
    let v_x_v = above(&prof(x, &[v]), 1.0 - d);
    let v_x_vz = intersection(&above(&prof(x, &[v, z]), 1.0 - d), &v_x_v);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let fam = build_sets(&ProfileSet::estimate(&src, n, Method::Exact, 0, &mut rng).unwrap(), 0.25).unwrap();
    assert_eq!(fam.h_u, h_u);
    assert_eq!(fam.v_u, v_u);
    assert_eq!(fam.h_u_y, h_u_y);
    assert_eq!(fam.h_u_z, h_u_z);
    assert_eq!(fam.v_v_u, v_v_u);
    assert_eq!(fam.v_v_uz, v_v_uz);
    assert_eq!(fam.h_v_uy, h_v_uy);
    assert_eq!(fam.v_v_uy, v_v_uy);
    assert_eq!(fam.v_x_v, v_x_v);
    assert_eq!(fam.v_x_vz, v_x_vz);

    let i_uy = difference(&v_u, &h_u_y);
    let i_uz = difference(&v_u, &h_u_z);
    let psi_vu = union(&v_v_uy, &intersection(&difference(&h_v_uy, &v_v_uy), &v_v_u));
    assert_eq!(fam.i_uy, i_uy);
    assert_eq!(fam.i_uz, i_uz);
    assert_eq!(fam.m_uvz, difference(&v_v_u, &v_v_uz));
    assert_eq!(fam.psi_vu, psi_vu);
    assert_eq!(fam.phi_vu, difference(&difference(&h_v_uy, &v_v_uy), &v_v_u));
    assert_eq!(fam.phi_u, difference(&union(&h_u_y, &h_u_z), &v_u));
    let need = difference(&i_uy, &i_uz).len();
    assert_eq!(fam.a_uyz, difference(&i_uz, &i_uy)[..need].to_vec());
    assert_eq!(fam.b_v_uy, v_v_uz[..psi_vu.len()].to_vec());
    // The example's secrecy layer is nontrivial at this length.
    assert!(!fam.v_v_uz.is_empty() && !fam.h_v_uy.is_empty());
}

#[test]
fn monte_carlo_profiles_match_exact() {
    let src = JointSource::bsc_example(0.1, 0.25).unwrap();
    let ex = ProfileSet::estimate(&src, 8, Method::Exact, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut z_scores = Vec::new();
    for seed in 0..4 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mc = ProfileSet::estimate(&src, 8, Method::MonteCarlo, 100_000, &mut rng).unwrap();
        for (m, e) in mc.profiles.iter().zip(&ex.profiles) {
            assert_eq!(m.layer, e.layer);
            for j in 0..8 {
                let gap = (m.entropies[j] - e.entropies[j]).abs();
                if seed == 0 {
                    assert!(gap <= 3.0 * m.std_errors[j] + 1e-12, "{} index {j}: gap {gap} se {}", m.layer.tag(), m.std_errors[j]);
                }
                if m.std_errors[j] > 0.0 {
                    z_scores.push((m.entropies[j] - e.entropies[j]) / m.std_errors[j]);
                } else {
                    assert!(gap < 1e-12);
                }
            }
        }
    }
    // Across repetitions the standardized gaps look like unit normals.
    let n = z_scores.len() as f64;
    let mean = z_scores.iter().sum::<f64>() / n;
    let var = z_scores.iter().map(|z| (z - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 3.0 / n.sqrt() && (0.5..1.6).contains(&var), "mean {mean} var {var}");
}

#[test]
fn noiseless_bob_and_blind_eve_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let src = noiseless_bob(0.25);
    let fam = build_sets(&ProfileSet::estimate(&src, 8, Method::Exact, 0, &mut rng).unwrap(), 0.25).unwrap();
    assert!(fam.h_u_y.is_empty() && fam.h_v_uy.is_empty());
    assert_eq!(fam.i_uy, fam.v_u);
    let blind = bsc_example(0.05, 0.5);
    let fam = build_sets(&ProfileSet::estimate(&blind, 8, Method::Exact, 0, &mut rng).unwrap(), 0.25).unwrap();
    assert_eq!(fam.v_v_uz, fam.v_v_u);
    assert!(fam.m_uvz.is_empty());
}

#[test]
fn bad_beta_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let ps = ProfileSet::estimate(&bsc_example(0.05, 0.25), 4, Method::Exact, 0, &mut rng).unwrap();
    assert!(build_sets(&ps, 0.5).is_err());
    assert!(build_sets(&ps, 0.0).is_err());
}

#[test]
fn high_entropy_set_size_tracks_the_conditional_entropy() {
    // |H_{X|Y}| / N approaches H(X|Y) = h(0.05); in the example X = V and U is
    // constant, so H_{X|Y} is H_{V|UY}.
    let src = bsc_example(0.05, 0.25);
    let target = common::h2(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let gaps: Vec<f64> = [256usize, 1024, 4096]
        .iter()
        .map(|&n| {
            let p = estimate_profile(&src, Layer::VGivenUY, n, Method::MonteCarlo, 2000, &mut rng).unwrap();
            let size = p.above(delta_n(n, 0.25)).len();
            (size as f64 / n as f64 - target).abs()
        })
        .collect();
    println!("gaps {gaps:?}");
    assert!(gaps[1] <= gaps[0] && gaps[2] <= gaps[1], "{gaps:?}");
}

fn check_rates(fam: &IndexSetFamily) {
    let n = fam.n_len;
    let both = intersection(&fam.i_uy, &fam.i_uz).len();
    let s_rest = difference(&fam.v_v_uz, &fam.b_v_uy).len();
    let one = rate_report(fam, 1);
    assert_eq!(one.counts.common, both);
    assert_eq!(one.r_o, both as f64 / n as f64);
    for k in [1usize, 2, 3, 8, 16] {
        let r = rate_report(fam, k);
        assert_eq!(r.counts.secret, fam.v_v_uz.len() + (k - 1) * s_rest);
        assert_eq!(r.r_s, r.counts.secret as f64 / (k * n) as f64);
        assert_eq!(r.counts.common, (k - 1) * fam.i_uy.len() + both);
        assert_eq!(r.r_m, fam.m_uvz.len() as f64 / n as f64);
        assert_eq!(r.counts.seed_psi + r.counts.seed_phi, fam.psi_vu.len() + k * fam.phi_vu.len());
        // The Ψ term of the seed halves when k doubles.
        let r2 = rate_report(fam, 2 * k);
        assert_eq!(r2.seed_psi_term * 2.0, r.seed_psi_term);
        assert_eq!(r2.seed_phi_term, r.seed_phi_term);
    }
}

#[test]
fn rate_accounting_identities() {
    check_rates(&crafted_family());
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for src in [bsc_example(0.05, 0.25), bsc_example(0.1, 0.2), noiseless_bob(0.3)] {
        for n in [4, 8] {
            let fam = build_sets(&ProfileSet::estimate(&src, n, Method::Exact, 0, &mut rng).unwrap(), 0.25).unwrap();
            assert!(fam.invariant_violations().is_empty());
            check_rates(&fam);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn monte_carlo_families_are_nested(pb in 0.01f64..0.2, pe in 0.2f64..0.45, log_n in 3u32..=7, seed in any::<u64>()) {
        let src = bsc_example(pb, pe);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = ProfileSet::estimate(&src, 1 << log_n, Method::MonteCarlo, 200, &mut rng).unwrap();
        match build_sets(&ps, 0.25) {
            Ok(fam) => {
                prop_assert!(fam.invariant_violations().is_empty(), "{:?}", fam.invariant_violations());
                prop_assert!(is_subset(&fam.m_uvz, &fam.v_v_u));
                check_rates(&fam);
            }
            Err(e) => {
                let infeasible = matches!(e, SetsError::InfeasibleCommon { .. } | SetsError::InfeasibleSecret { .. });
                prop_assert!(infeasible, "{:?}", e);
            }
        }
    }
}
