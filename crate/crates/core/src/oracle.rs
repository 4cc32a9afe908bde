//! Reference implementations that share no code path with the optimised
//! kernels: explicit enumerations, plain tensor quadrature and Monte Carlo.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ffield::FieldCtx;
use crate::gapfinder::{GaussianKernel, Mollifier};
use crate::par::{self, Execution};
use crate::pgeom::{GridMeasure, GridSet, ParabolicRect};
use crate::progressions::{PointSet2, Witness};
use crate::quad::GaussLegendre;

/// Minimum over every antichain cut of the depth-`m` dyadic tree of
/// `Σ ℓ(Q)^s` over the parts meeting `K`. Cuts are listed explicitly, so this
/// is only usable for `m ≤ 2`.
pub fn exhaustive_content(k: &GridSet, s: f64) -> f64 {
    fn cuts(r: ParabolicRect, m: u32) -> Vec<Vec<ParabolicRect>> {
        let mut out = vec![vec![r]];
        if r.j < m {
            let mut acc: Vec<Vec<ParabolicRect>> = vec![Vec::new()];
            for c in r.children() {
                let sub = cuts(c, m);
                acc = acc.iter().flat_map(|a| sub.iter().map(move |b| [a.clone(), b.clone()].concat())).collect();
            }
            out.extend(acc);
        }
        out
    }
    let m = k.depth();
    assert!(m <= 2, "explicit cut enumeration is limited to depth 2");
    cuts(ParabolicRect::UNIT, m)
        .iter()
        .map(|cut| {
            // Sum generation by generation, coarse first.
            let mut counts = [0u32; 3];
            for r in cut {
                if k.cells_in(r).any(|c| k.contains(c)) {
                    counts[r.j as usize] += 1;
                }
            }
            (0..=m).map(|g| counts[g as usize] as f64 * (-(g as f64) * s).exp2()).sum::<f64>()
        })
        .fold(f64::INFINITY, f64::min)
}

fn has_configuration(ctx: &FieldCtx, pts: &[(usize, usize)], mask: u32) -> bool {
    let q = ctx.size();
    let member = |x: usize, y: usize| pts.iter().position(|&p| p == (x, y)).is_some_and(|i| mask >> i & 1 == 1);
    for (i, &(x, y)) in pts.iter().enumerate() {
        if mask >> i & 1 == 0 {
            continue;
        }
        for zi in 1..q {
            let z = ctx.element(zi);
            let nx = ctx.add(ctx.element(x), z).index();
            let ny = ctx.add(ctx.element(y), ctx.mul(z, z)).index();
            if member(nx, ny) {
                return true;
            }
        }
    }
    false
}

/// Largest avoider in `F_q^2` by checking all `2^{q^2}` subsets (`q^2 ≤ 16`).
pub fn brute_force_max_avoider_2d(ctx: &FieldCtx) -> usize {
    let q = ctx.size();
    assert!(q * q <= 16);
    let pts: Vec<(usize, usize)> = (0..q).flat_map(|x| (0..q).map(move |y| (x, y))).collect();
    (0u32..1 << pts.len())
        .filter(|&mask| !has_configuration(ctx, &pts, mask))
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// Largest subset of `F_q` with no two elements differing by a nonzero
/// square, over all `2^q` subsets (`q ≤ 20`).
pub fn brute_force_max_avoider_1d(ctx: &FieldCtx) -> usize {
    let q = ctx.size();
    assert!(q <= 20);
    let mut is_square = vec![false; q];
    for z in 1..q {
        let e = ctx.element(z);
        is_square[ctx.mul(e, e).index()] = true;
    }
    let conflict = |u: usize, w: usize| is_square[ctx.sub(ctx.element(w), ctx.element(u)).index()];
    (0u32..1 << q)
        .filter(|&mask| (0..q).all(|u| mask >> u & 1 == 0 || (0..q).all(|w| mask >> w & 1 == 0 || !conflict(u, w))))
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

/// Confirms `(x, y)` and `(x + z, y + z^2)` both lie in `A` with `z ≠ 0`.
pub fn witness_is_valid(a: &PointSet2, w: &Witness) -> bool {
    let ctx = a.ctx();
    let (x, y, z) = (ctx.element(w.x), ctx.element(w.y), ctx.element(w.z));
    !z.is_zero() && a.contains(x, y) && a.contains(ctx.add(x, z), ctx.add(y, ctx.mul(z, z)))
}

/// First dyadic rectangle `Q` (coarse to fine) with `μ(Q) > ℓ(Q)^s (1 + slack)`,
/// with masses summed cell by cell.
pub fn frostman_cap_violation(mu: &GridMeasure, s: f64, slack: f64) -> Option<(ParabolicRect, f64)> {
    (0..=mu.depth()).find_map(|j| {
        let cap = (-(j as f64) * s).exp2();
        ParabolicRect::generation(j).find_map(|q| {
            let mass: f64 = q.descendants(mu.depth() - j).map(|c| mu.weights()[c.flat()]).sum();
            (mass > cap * (1.0 + slack)).then_some((q, mass))
        })
    })
}

/// `∫_R φ` by a 2D tensor Gauss–Legendre rule on `φ(x, s)` itself.
pub fn mollifier_mass_2d(phi: &Mollifier, r: &ParabolicRect) -> f64 {
    let g = GaussLegendre::new(16);
    let xs = g.composite(r.x(), r.x() + r.ell(), 32);
    let ss = g.composite(r.s(), r.s() + r.height(), 32);
    xs.iter().map(|&(x, wx)| ss.iter().map(|&(s, ws)| wx * ws * phi.eval((x, s))).sum::<f64>()).sum()
}

/// Monte Carlo estimate of `∭ ψ_δ(x - y - w) dπ(w) dx dy` for Lebesgue
/// measure on the unit square and arclength on `{(z, z^2) : A^{-2} ≤ |z| ≤ 1}`.
/// Returns `(estimate, standard error)`. Chunks are seeded independently so
/// the result does not depend on the execution mode.
pub fn functional_monte_carlo(a: f64, delta: f64, samples: usize, seed: u64) -> (f64, f64) {
    const CHUNK: usize = 1 << 16;
    let lo = a.powi(-2);
    // Arclength of the truncated parabola, by the closed-form antiderivative.
    let arc = |z: f64| z * (1.0 + 4.0 * z * z).sqrt() / 2.0 + (2.0 * z).asinh() / 4.0;
    let length = 2.0 * (arc(1.0) - arc(lo));
    let kernel = GaussianKernel { delta };
    let density_max = 5f64.sqrt();
    let chunks = samples.div_ceil(CHUNK);
    let sums = par::map_range(Execution::default(), chunks, |c| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add((c as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)));
        let n = CHUNK.min(samples - c * CHUNK);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = loop {
                let z = lo + (1.0 - lo) * rng.gen::<f64>();
                if rng.gen::<f64>() * density_max <= (1.0 + 4.0 * z * z).sqrt() {
                    break if rng.gen::<bool>() { z } else { -z };
                }
            };
            let (x, y) = ((rng.gen::<f64>(), rng.gen::<f64>()), (rng.gen::<f64>(), rng.gen::<f64>()));
            let v = kernel.eval((x.0 - y.0 - z, x.1 - y.1 - z * z));
            s1 += v;
            s2 += v * v;
        }
        (s1, s2)
    });
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |acc, v| (acc.0 + v.0, acc.1 + v.1));
    let n = samples as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean).max(0.0);
    (length * mean, length * (var / n).sqrt())
}

/// `π (r_1^2 - r_0^2)`.
pub fn annulus_area(r0: f64, r1: f64) -> f64 {
    PI * (r1 * r1 - r0 * r0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_values() {
        let f3 = FieldCtx::parse("3").unwrap();
        assert_eq!(brute_force_max_avoider_2d(&f3), 3);
        assert_eq!(brute_force_max_avoider_1d(&f3), 1);
        assert_eq!(brute_force_max_avoider_1d(&FieldCtx::parse("9").unwrap()), 3);
        assert_eq!(brute_force_max_avoider_1d(&FieldCtx::parse("13").unwrap()), 3);
    }

    #[test]
    fn cut_enumeration_of_full_square() {
        let k = GridSet::full(2).unwrap();
        assert_eq!(exhaustive_content(&k, 2.5), 1.0);
        assert_eq!(exhaustive_content(&GridSet::empty(2).unwrap(), 2.5), 0.0);
    }

    #[test]
    fn uniform_measure_caps() {
        let mu = GridMeasure::uniform(2).unwrap();
        assert!(frostman_cap_violation(&mu, 3.0, 1e-12).is_none());
        assert!(frostman_cap_violation(&mu, 3.01, 1e-12).is_some());
        assert!(frostman_cap_violation(&mu, 2.9, 1e-12).is_none());
        let mut w = vec![0.0; 64];
        w[0] = 1.0;
        let atom = GridMeasure::new(2, w).unwrap();
        assert!(frostman_cap_violation(&atom, 2.0, 1e-12).is_some());
    }
}
