//! Shared helpers for the integration suites: seeded random fields, an
//! extended-precision dot-product oracle, and comparison utilities.

#![allow(dead_code)]

use hexfem::linalg::FieldVector;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_field(num_nodes: usize, components: usize, rng: &mut ChaCha8Rng) -> FieldVector {
    let dist = Uniform::new_inclusive(-1.0, 1.0);
    let values = (0..num_nodes * components)
        .map(|_| dist.sample(rng))
        .collect();
    FieldVector::from_values(num_nodes, components, values).unwrap()
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Max absolute difference scaled by the larger of the two magnitudes.
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = max_abs(a).max(max_abs(b)).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0f64, f64::max)
        / scale
}

// ---------------------------------------------------------------------
// Extended-precision dot product (error-free transformations)
// ---------------------------------------------------------------------

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

/// Dot product accumulated with error-free transformations (Dot2): the
/// result is accurate to roughly twice working precision and serves as the
/// "exact" reference for reduction-error comparisons.
pub fn extended_precision_dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut hi = 0.0;
    let mut lo = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let (p, pe) = two_prod(x, y);
        let (s, se) = two_sum(hi, p);
        hi = s;
        lo += se + pe;
    }
    hi + lo
}
