//! Memoryless broadcast channel `p(y, z | x)` with jointly drawn outputs.

use alloc::vec::Vec;

use rand::Rng;

use crate::error::SourceError;
use crate::source::{product_channel, JointSource};

const ROW_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct BroadcastChannel {
    card_y: usize,
    card_z: usize,
    /// `p(y, z | x)` at `x·|Y||Z| + y·|Z| + z`.
    table: Vec<f64>,
    cdf: [Vec<f64>; 2],
}

impl BroadcastChannel {
    pub fn new(table: &[f64], card_y: usize, card_z: usize) -> Result<Self, SourceError> {
        let yz = card_y * card_z;
        if yz == 0 || table.len() != 2 * yz {
            return Err(SourceError::TableLength { table: "p(y,z|x)", expected: 2 * yz, got: table.len() });
        }
        for (index, &value) in table.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(SourceError::BadEntry { table: "p(y,z|x)", index, value });
            }
        }
        let mut cdf = [Vec::with_capacity(yz), Vec::with_capacity(yz)];
        for (x, c) in cdf.iter_mut().enumerate() {
            let mut acc = 0.0;
            for &p in &table[x * yz..(x + 1) * yz] {
                acc += p;
                c.push(acc);
            }
            if (acc - 1.0).abs() > ROW_TOL {
                return Err(SourceError::RowSum { x, sum: acc });
            }
        }
        Ok(BroadcastChannel { card_y, card_z, table: table.to_vec(), cdf })
    }

    /// The channel part of a source.
    pub fn from_source(source: &JointSource) -> Result<Self, SourceError> {
        Self::new(source.factor_yz_given_x(), source.card_y(), source.card_z())
    }

    /// Independent receivers, each given row-major as `x·card + symbol`.
    pub fn independent(bob: &[f64], card_y: usize, eve: &[f64], card_z: usize) -> Result<Self, SourceError> {
        Self::new(&product_channel(bob, card_y, eve, card_z), card_y, card_z)
    }

    /// `Y = Z = X` over binary outputs.
    pub fn identity() -> Self {
        Self::independent(&[1.0, 0.0, 0.0, 1.0], 2, &[1.0, 0.0, 0.0, 1.0], 2).expect("valid table")
    }

    /// Eve's output passed through `w(z' | z)` (row-major `z·card_out + z'`).
    pub fn garble_eve(&self, w: &[f64], card_out: usize) -> Result<Self, SourceError> {
        let (cy, cz) = (self.card_y, self.card_z);
        if w.len() != cz * card_out {
            return Err(SourceError::TableLength { table: "garbling", expected: cz * card_out, got: w.len() });
        }
        let mut out = alloc::vec![0.0; 2 * cy * card_out];
        for x in 0..2 {
            for y in 0..cy {
                for z in 0..cz {
                    let p = self.prob(x, y, z);
                    for z2 in 0..card_out {
                        out[(x * cy + y) * card_out + z2] += p * w[z * card_out + z2];
                    }
                }
            }
        }
        Self::new(&out, cy, card_out)
    }

    pub fn card_y(&self) -> usize {
        self.card_y
    }

    pub fn card_z(&self) -> usize {
        self.card_z
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn prob(&self, x: usize, y: usize, z: usize) -> f64 {
        self.table[(x * self.card_y + y) * self.card_z + z]
    }

    /// One channel use.
    pub fn use_once<R: Rng + ?Sized>(&self, x: u8, rng: &mut R) -> (u32, u32) {
        let c = &self.cdf[(x & 1) as usize];
        let r: f64 = rng.gen::<f64>() * c[c.len() - 1];
        let k = c.partition_point(|&v| v <= r).min(c.len() - 1);
        // Skip zero-probability cells that share the boundary.
        let k = (k..c.len()).find(|&j| self.table[(x as usize & 1) * c.len() + j] > 0.0).unwrap_or(k);
        ((k / self.card_z) as u32, (k % self.card_z) as u32)
    }

    /// Per-symbol i.i.d. outputs for the input block `x`.
    pub fn transmit<R: Rng + ?Sized>(&self, x: &[u8], rng: &mut R) -> (Vec<u32>, Vec<u32>) {
        x.iter().map(|&b| self.use_once(b, rng)).unzip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::bsc;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_copies_input() {
        let ch = BroadcastChannel::identity();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = [1u8, 0, 0, 1, 1, 0, 1, 1];
        let (y, z) = ch.transmit(&x, &mut rng);
        let xs: Vec<u32> = x.iter().map(|&b| b as u32).collect();
        assert_eq!(y, xs);
        assert_eq!(z, xs);
    }

    #[test]
    fn bsc_crossover_frequency() {
        let ch = BroadcastChannel::independent(&bsc(0.1), 2, &bsc(0.3), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 100_000;
        let x: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let (y, _) = ch.transmit(&x, &mut rng);
        let flips = x.iter().zip(&y).filter(|(&a, &b)| a as u32 != b).count() as f64;
        let sigma = (0.1 * 0.9 / n as f64).sqrt();
        assert!((flips / n as f64 - 0.1).abs() <= 3.0 * sigma);
    }

    #[test]
    fn same_seed_same_outputs() {
        let ch = BroadcastChannel::independent(&bsc(0.2), 2, &bsc(0.3), 2).unwrap();
        let x = [0u8, 1, 1, 0, 1, 0, 0, 1];
        let a = ch.transmit(&x, &mut ChaCha8Rng::seed_from_u64(9));
        let b = ch.transmit(&x, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn rows_must_sum_to_one() {
        assert!(matches!(
            BroadcastChannel::new(&[0.5, 0.4, 0.0, 1.0], 2, 1),
            Err(SourceError::RowSum { x: 0, .. })
        ));
    }

    #[test]
    fn garbling_composes_channels() {
        let ch = BroadcastChannel::independent(&bsc(0.1), 2, &bsc(0.2), 2).unwrap();
        let g = ch.garble_eve(&bsc(0.1), 2).unwrap();
        // BSC(0.2) followed by BSC(0.1) is BSC(0.26).
        let p_flip: f64 = (0..2).map(|y| g.prob(0, y, 1)).sum();
        assert!((p_flip - 0.26).abs() < 1e-12);
    }
}
