//! Seeded random streams; every sampler derives its stream from the run seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn stream(seed: u64, label: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(label);
    r
}

/// Unit vector orthogonal to `tangents`, uniformly distributed on the normal sphere.
pub fn random_normal(r: &mut impl Rng, tangents: &[Vec<f64>]) -> Vec<f64> {
    let n = tangents.first().map_or(0, |t| t.len());
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        let basis = crate::geometry::manifold::orthonormalize(tangents);
        for b in &basis {
            let d: f64 = b.iter().zip(&v).map(|(x, y)| x * y).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
        let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if nv > 1e-8 {
            return v.iter().map(|x| x / nv).collect();
        }
    }
}
