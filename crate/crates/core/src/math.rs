//! Scalar helpers shared by every module: binary entropy, log-domain sums
//! and the polarization threshold.

use libm::{exp, log, log1p, log2, pow, sqrt};

/// Probabilities below this are treated as exact zeros in log computations.
pub const PROB_EPS: f64 = 1e-15;

/// Binary entropy in bits. Arguments outside (0,1) contribute zero.
pub fn h_b(p: f64) -> f64 {
    if p <= PROB_EPS || p >= 1.0 - PROB_EPS {
        return 0.0;
    }
    -(p * log2(p) + (1.0 - p) * log2(1.0 - p))
}

/// `-p log2 p`, zero for negligible `p`.
pub fn plogp(p: f64) -> f64 {
    if p <= PROB_EPS {
        0.0
    } else {
        -p * log2(p)
    }
}

/// Shannon entropy in bits of an unnormalized-or-normalized weight list.
pub fn entropy<I: IntoIterator<Item = f64>>(probs: I) -> f64 {
    probs.into_iter().map(plogp).sum()
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
#[inline]
pub fn lse(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

/// Natural log that maps negligible probabilities to `-inf`.
#[inline]
pub fn ln_prob(p: f64) -> f64 {
    if p <= PROB_EPS {
        f64::NEG_INFINITY
    } else {
        log(p)
    }
}

/// `δ_N = 2^{-N^β}`.
pub fn delta_n(n_len: usize, beta: f64) -> f64 {
    pow(2.0, -pow(n_len as f64, beta))
}

pub fn sqrt_f(x: f64) -> f64 {
    sqrt(x)
}

pub fn log2_f(x: f64) -> f64 {
    log2(x)
}

pub fn ln_f(x: f64) -> f64 {
    log(x)
}

pub fn exp_f(x: f64) -> f64 {
    exp(x)
}

/// Returns `log2(n)` when `n` is a power of two of at least 2.
pub fn log2_len(n: usize) -> Option<u32> {
    if n >= 2 && n.is_power_of_two() {
        Some(n.trailing_zeros())
    } else {
        None
    }
}
