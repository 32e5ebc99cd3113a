mod common;

use polarsec_core::source::{bec, bsc, SymbolSampler};
use polarsec_core::BroadcastChannel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Every cell of the empirical `(y, z)` table given `x` lies within 3σ of
/// the channel law.
fn check_counts(channel: &BroadcastChannel, x: u8, draws: usize, seed: u64) {
    let (cy, cz) = (channel.card_y(), channel.card_z());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; cy * cz];
    let (ys, zs) = channel.transmit(&vec![x; draws], &mut rng);
    for (y, z) in ys.iter().zip(&zs) {
        counts[*y as usize * cz + *z as usize] += 1;
    }
    for y in 0..cy {
        for z in 0..cz {
            let p = channel.prob(x as usize, y, z);
            let freq = counts[y * cz + z] as f64 / draws as f64;
            let sigma = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((freq - p).abs() <= 3.0 * sigma + 1e-12, "x={x} y={y} z={z}: {freq} vs {p}");
        }
    }
}

#[test]
fn outputs_follow_the_joint_law() {
    let correlated = BroadcastChannel::new(&[0.5, 0.2, 0.1, 0.2, 0.05, 0.15, 0.3, 0.5], 2, 2).unwrap();
    let split = BroadcastChannel::independent(&bec(0.2), 3, &bsc(0.3), 2).unwrap();
    for (t, ch) in [correlated, split].iter().enumerate() {
        for x in 0..2 {
            check_counts(ch, x, 1_000_000, 10 * t as u64 + x as u64);
        }
    }
}

#[test]
fn zero_cells_are_never_drawn() {
    let ch = BroadcastChannel::independent(&bec(0.3), 3, &[1.0, 0.0, 0.0, 1.0], 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x: Vec<u8> = (0..100_000).map(|t| (t % 2) as u8).collect();
    let (y, z) = ch.transmit(&x, &mut rng);
    for t in 0..x.len() {
        assert_eq!(z[t], u32::from(x[t]));
        assert!(y[t] == 2 || y[t] == u32::from(x[t]));
    }
}

#[test]
fn garbling_composes_the_eve_marginal() {
    let ch = BroadcastChannel::independent(&bsc(0.1), 2, &bsc(0.2), 2).unwrap();
    let worse = ch.garble_eve(&bsc(0.1), 2).unwrap();
    // BSC(0.2) followed by BSC(0.1) is BSC(0.26).
    for x in 0..2 {
        for y in 0..2 {
            for z in 0..2 {
                let pb = if x == y { 0.9 } else { 0.1 };
                let pe = if x == z { 0.74 } else { 0.26 };
                assert!((worse.prob(x, y, z) - pb * pe).abs() < 1e-12);
            }
        }
    }
    assert!(ch.garble_eve(&[1.0], 1).is_err());
}

#[test]
fn malformed_tables_are_rejected() {
    assert!(BroadcastChannel::new(&[0.5, 0.5, 0.5], 1, 1).is_err());
    assert!(BroadcastChannel::new(&[1.5, -0.5, 0.5, 0.5], 2, 1).is_err());
    assert!(BroadcastChannel::new(&[0.3, 0.3, 0.5, 0.5], 2, 1).is_err());
}

#[test]
fn source_sampler_matches_pmf() {
    let src = common::cascade(0.2, 0.1, 0.3, 0.2);
    let sampler = SymbolSampler::new(&src);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let draws = 1_000_000;
    let mut counts = std::collections::HashMap::<[usize; 5], usize>::new();
    for _ in 0..draws {
        let s = sampler.draw(&mut rng);
        *counts.entry([s.u as usize, s.v as usize, s.x as usize, s.y as usize, s.z as usize]).or_insert(0) += 1;
    }
    // Pearson goodness of fit against the 0.999 quantile (Wilson–Hilferty).
    let mut seen = 0;
    let mut chi2 = 0.0;
    let mut cells = 0usize;
    for (vals, p) in src.entries() {
        let c = counts.get(&vals).copied().unwrap_or(0);
        seen += c;
        let expected = p * draws as f64;
        chi2 += (c as f64 - expected).powi(2) / expected;
        cells += 1;
    }
    let df = (cells - 1) as f64;
    let w = 2.0 / (9.0 * df);
    let critical = df * (1.0 - w + 3.09 * w.sqrt()).powi(3);
    assert!(chi2 < critical, "chi2 {chi2} over {critical} with {df} degrees of freedom");
    assert_eq!(seen, draws);
}
