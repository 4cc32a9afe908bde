//! Masses of axis-parallel boxes and empirical Frostman constants.
//!
//! A grid measure is treated as a piecewise-uniform density, so the mass of
//! any box is exact up to rounding: the cumulative distribution function is
//! bilinear on each cell and is read off a 2D prefix-sum table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{grid_dims, GridMeasure, Point};

/// Prefix sums `P[a][b] = μ([0, a 2^-m) × [0, b 4^-m))`.
#[derive(Clone, Debug)]
pub struct CumulativeMass {
    nx: usize,
    ns: usize,
    table: Vec<f64>,
}

impl CumulativeMass {
    pub fn new(mu: &GridMeasure) -> Self {
        let (nx, ns) = grid_dims(mu.depth());
        let w = mu.weights();
        let stride = ns + 1;
        let mut table = vec![0.0; (nx + 1) * stride];
        for a in 0..nx {
            let mut row = 0.0;
            for b in 0..ns {
                row += w[a * ns + b];
                table[(a + 1) * stride + b + 1] = table[a * stride + b + 1] + row;
            }
        }
        CumulativeMass { nx, ns, table }
    }

    /// `μ([0, x) × [0, s))` for `(x, s)` clamped to `[0, 1]^2`.
    pub fn cdf(&self, x: f64, s: f64) -> f64 {
        let fx = x.clamp(0.0, 1.0) * self.nx as f64;
        let fs = s.clamp(0.0, 1.0) * self.ns as f64;
        let a = (fx.floor() as usize).min(self.nx - 1);
        let b = (fs.floor() as usize).min(self.ns - 1);
        let (tx, ts) = (fx - a as f64, fs - b as f64);
        let stride = self.ns + 1;
        let p = |i: usize, j: usize| self.table[i * stride + j];
        let lo = p(a, b) + ts * (p(a, b + 1) - p(a, b));
        let hi = p(a + 1, b) + ts * (p(a + 1, b + 1) - p(a + 1, b));
        lo + tx * (hi - lo)
    }

    /// `μ([x0, x1] × [s0, s1])`.
    pub fn box_mass(&self, x0: f64, x1: f64, s0: f64, s1: f64) -> f64 {
        let v = self.cdf(x1, s1) - self.cdf(x0, s1) - self.cdf(x1, s0) + self.cdf(x0, s0);
        v.max(0.0)
    }

    /// Mass of the parabolic ball `[x - r, x + r] × [s - r^2, s + r^2]`.
    pub fn parabolic_ball(&self, c: Point, r: f64) -> f64 {
        self.box_mass(c.0 - r, c.0 + r, c.1 - r * r, c.1 + r * r)
    }

    /// Mass of the square `[x - r, x + r] × [s - r, s + r]`, which contains
    /// the Euclidean ball of radius `r`.
    pub fn square(&self, c: Point, r: f64) -> f64 {
        self.box_mass(c.0 - r, c.0 + r, c.1 - r, c.1 + r)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallStats {
    /// `max μ(B) / r^s` over the sampled balls.
    pub constant: f64,
    pub exponent: f64,
    pub samples: usize,
    /// Centre and radius of the maximising ball.
    pub argmax: (f64, f64, f64),
}

fn sample_balls(
    depth: u32,
    samples: usize,
    seed: u64,
    mut mass: impl FnMut(Point, f64) -> f64,
    exponent: f64,
) -> BallStats {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r_min = (-(depth as f64) - 2.0).exp2();
    let mut best = BallStats { constant: 0.0, exponent, samples, argmax: (0.0, 0.0, 1.0) };
    for _ in 0..samples {
        let c = (rng.gen::<f64>(), rng.gen::<f64>());
        let r = r_min * (1.0 / r_min).powf(rng.gen::<f64>());
        let ratio = mass(c, r) / r.powf(exponent);
        if ratio > best.constant {
            best.constant = ratio;
            best.argmax = (c.0, c.1, r);
        }
    }
    best
}

/// Empirical constant `C` in `μ(B_Π(x, r)) ≤ C r^s`, from `samples` balls with
/// uniform centres in `[0, 1)^2` and log-uniform radii in `[2^{-m-2}, 1]`.
pub fn parabolic_frostman_constant(mu: &GridMeasure, s: f64, samples: usize, seed: u64) -> BallStats {
    let cm = CumulativeMass::new(mu);
    sample_balls(mu.depth(), samples, seed, |c, r| cm.parabolic_ball(c, r), s)
}

/// Empirical constant `C` in `μ(B(x, r)) ≤ C r^t`, using the enclosing square.
pub fn euclidean_frostman_constant(mu: &GridMeasure, t: f64, samples: usize, seed: u64) -> BallStats {
    let cm = CumulativeMass::new(mu);
    sample_balls(mu.depth(), samples, seed, |c, r| cm.square(c, r), t)
}

#[cfg(test)]
mod tests {
    use super::super::{frostman, GridSet};
    use super::*;

    #[test]
    fn box_mass_of_uniform_is_area() {
        let cm = CumulativeMass::new(&GridMeasure::uniform(3).unwrap());
        let v = cm.box_mass(0.1, 0.7, 0.3, 0.35);
        assert!((v - 0.6 * 0.05).abs() < 1e-14);
        assert!((cm.parabolic_ball((0.5, 0.5), 0.1) - 0.2 * 0.02).abs() < 1e-14);
        assert!((cm.box_mass(-1.0, 2.0, -1.0, 2.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn box_mass_matches_cell_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Vec<f64> = (0..512).map(|_| rng.gen::<f64>()).collect();
        let mu = GridMeasure::new(3, w.clone()).unwrap();
        let cm = CumulativeMass::new(&mu);
        // Box aligned with cells [2,5) × [10,37).
        let direct: f64 = (2..5).flat_map(|a| (10..37).map(move |b| (a, b))).map(|(a, b)| w[a * 64 + b]).sum();
        let v = cm.box_mass(2.0 / 8.0, 5.0 / 8.0, 10.0 / 64.0, 37.0 / 64.0);
        assert!((v - direct).abs() < 1e-12);
    }

    #[test]
    fn uniform_is_parabolic_3_frostman() {
        let st = parabolic_frostman_constant(&GridMeasure::uniform(4).unwrap(), 3.0, 2000, 1);
        assert!(st.constant <= 4.0 * (1.0 + 1e-9));
    }

    /// Covering a square of side `2r` by `⌈1/r⌉` parabolic balls of radius `r`
    /// bounds its mass by `5 C r^{s-1}`, with `C` taken over those balls.
    #[test]
    fn parabolic_to_euclidean_transfer() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let k = GridSet::from_cells(4, (0..4096).filter(|_| rng.gen_bool(0.4))).unwrap();
        for s in [2.5, 2.9] {
            let mu = frostman(&k, s).unwrap();
            let cm = CumulativeMass::new(&mu);
            for _ in 0..500 {
                let c = (rng.gen::<f64>(), rng.gen::<f64>());
                let r = 0.01 + 0.5 * rng.gen::<f64>();
                let balls = (1.0 / r).ceil() as usize;
                let step = 2.0 * r / balls as f64;
                let mut local_c: f64 = 0.0;
                for i in 0..balls {
                    let centre = (c.0, c.1 - r + (i as f64 + 0.5) * step);
                    local_c = local_c.max(cm.parabolic_ball(centre, r) / r.powf(s));
                }
                let sq = cm.square(c, r);
                assert!(sq <= 5.0 * local_c * r.powf(s - 1.0) * (1.0 + 1e-12) + 1e-15);
            }
        }
    }

    /// An (Euclidean) 2-Frostman measure is a parabolic 3-Frostman measure:
    /// a parabolic ball is covered by `⌈1/r⌉` Euclidean balls of radius `r^2`.
    #[test]
    fn euclidean_to_parabolic_exponent() {
        let mu = GridMeasure::uniform(5).unwrap();
        let e = euclidean_frostman_constant(&mu, 2.0, 3000, 2);
        let p = parabolic_frostman_constant(&mu, 3.0, 3000, 3);
        assert!(p.constant <= 2.0 * e.constant * (1.0 + 1e-9));
    }
}
