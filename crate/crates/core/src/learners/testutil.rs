use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{quad_form, Label, PairConstraint};

/// Similar pairs differ only along axis 2 (N(0,1)); dissimilar pairs
/// differ along axis 1 by 1.5..3 in magnitude.
pub fn axis_constraints(n: usize, seed: u64) -> Vec<PairConstraint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for k in 0..2 * n {
        let x = DVector::from_vec(vec![rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]);
        let (v, label) = if k % 2 == 0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            (DVector::from_vec(vec![0.0, z]), Label::Similar)
        } else {
            let mag = rng.random_range(1.5..3.0);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            (DVector::from_vec(vec![sign * mag, 0.0]), Label::Dissimilar)
        };
        out.push(PairConstraint { y: &x + v, x, label });
    }
    out
}

/// Fraction of (similar, dissimilar) pairs ordered correctly under `m`.
pub fn separation(m: &DMatrix<f64>, cs: &[PairConstraint]) -> (f64, bool) {
    let d = |c: &PairConstraint| quad_form(m, &c.diff());
    let sim: Vec<f64> = cs.iter().filter(|c| c.label == Label::Similar).map(d).collect();
    let dis: Vec<f64> = cs.iter().filter(|c| c.label == Label::Dissimilar).map(d).collect();
    let mut good = 0usize;
    for s in &sim {
        good += dis.iter().filter(|&&x| *s < x).count();
    }
    let frac = good as f64 / (sim.len() * dis.len()) as f64;
    (frac, frac == 1.0)
}

/// Random constraints whose labels carry signal: similar pairs are noisy
/// copies (per-axis noise scale drawn once per set), dissimilar pairs are
/// independent points.
pub fn random_set(dim: usize, n: usize, seed: u64) -> Vec<PairConstraint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scales: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05..1.5)).collect();
    (0..n)
        .map(|k| {
            let x = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
            if k % 2 == 0 {
                let y = DVector::from_fn(dim, |i, _| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    x[i] + scales[i] * z
                });
                PairConstraint { x, y, label: Label::Similar }
            } else {
                let y = DVector::from_fn(dim, |_, _| rng.random_range(-2.0..2.0));
                PairConstraint { x, y, label: Label::Dissimilar }
            }
        })
        .collect()
}
