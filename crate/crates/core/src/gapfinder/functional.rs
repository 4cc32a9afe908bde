//! `F_δ(μ, π) = ∭ ψ_δ(x - y - w) dπ(w) dμ(y) dμ(x)` for grid measures.
//!
//! A grid measure is a piecewise-uniform density, so for cells `a`, `b` the
//! difference `x - y` is the cell offset plus a product of tent variables.
//! `ψ_δ` factors as `g_δ(u) g_δ(v)` with `g_δ(t) = δ^{-1} e^{-πt²/δ²}`, and
//! each factor averaged against a tent has a closed form in `erf`. The sum
//! over cell pairs collapses onto the autocorrelation of the weights.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::erf::erf;

use super::{GapError, GapParams, ParabolaMeasure};
use crate::par::{self, Execution};
use crate::pgeom::{autocorrelation, grid_dims, GridMeasure};

/// Gaussian window cut-off in units of `δ`.
const WINDOW: f64 = 8.0;

/// `∫ t_w(u) g_δ(c + u) du` with the tent `t_w(u) = (w - |u|)/w²`.
pub(crate) fn tent_gauss(c: f64, w: f64, delta: f64) -> f64 {
    if c.abs() > w + WINDOW * delta {
        return 0.0;
    }
    let k = PI / (delta * delta);
    if w < 0.01 * delta {
        let g = (-k * c * c).exp() / delta;
        return (g + w * w / 12.0 * g * (4.0 * k * k * c * c - 2.0 * k)).max(0.0);
    }
    let cdf = |t: f64| 0.5 * erf(PI.sqrt() * t / delta);
    let first = |t: f64| -(delta / (2.0 * PI)) * (-k * t * t).exp();
    let left = (w - c) * (cdf(c) - cdf(c - w)) + (first(c) - first(c - w));
    let right = (w + c) * (cdf(c + w) - cdf(c)) - (first(c + w) - first(c));
    ((left + right) / (w * w)).max(0.0)
}

pub fn convolution_functional(mu: &GridMeasure, pi: &ParabolaMeasure, delta: f64) -> Result<f64, GapError> {
    convolution_functional_with(mu, pi, delta, Execution::default())
}

/// Evaluated on the coarsest grid carrying the same density as `μ`. The
/// sum over parabola nodes is chunked and reduced in node order.
pub fn convolution_functional_with(
    mu: &GridMeasure,
    pi: &ParabolaMeasure,
    delta: f64,
    exec: Execution,
) -> Result<f64, GapError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(GapError::BadParam(format!("δ = {delta} must be positive")));
    }
    if pi.nodes.is_empty() {
        return Ok(0.0);
    }
    let mu = mu.coarsest_equivalent();
    let (nx, ns) = grid_dims(mu.depth());
    let (w, h) = (1.0 / nx as f64, 1.0 / ns as f64);
    let raw = autocorrelation(&mu, exec);
    // Dense offsets: row dx + nx - 1, column ds + ns - 1.
    let (rows, cols) = (2 * nx - 1, 2 * ns - 1);
    let mut r = vec![0.0; rows * cols];
    for i in 0..rows {
        let dx = i as i64 - (nx as i64 - 1);
        let src_row = dx.rem_euclid(2 * nx as i64) as usize * 2 * ns;
        for j in 0..cols {
            let ds = j as i64 - (ns as i64 - 1);
            r[i * cols + j] = raw[src_row + ds.rem_euclid(2 * ns as i64) as usize];
        }
    }
    let reach_s = h + WINDOW * delta;
    let value = par::sum_range(exec, pi.nodes.len(), |n| {
        let ((z, z2), weight) = pi.nodes[n];
        let lo = (((z2 - reach_s) / h).floor() as i64).max(-(ns as i64 - 1));
        let hi = (((z2 + reach_s) / h).ceil() as i64).min(ns as i64 - 1);
        if lo > hi {
            return 0.0;
        }
        let gs: Vec<f64> = (lo..=hi).map(|ds| tent_gauss(ds as f64 * h - z2, h, delta)).collect();
        let j0 = (lo + ns as i64 - 1) as usize;
        let mut acc = 0.0;
        for i in 0..rows {
            let dx = i as f64 - (nx as f64 - 1.0);
            let gx = tent_gauss(dx * w - z, w, delta);
            if gx == 0.0 {
                continue;
            }
            let row = &r[i * cols + j0..i * cols + j0 + gs.len()];
            let inner: f64 = row.iter().zip(&gs).map(|(a, b)| a * b).sum();
            acc += gx * inner;
        }
        weight * acc
    });
    Ok(value.max(0.0))
}

/// Telescoping split `F_δ = I_1 + I_2 + I_3` with `I_1 = F_{1/A}`,
/// `I_2 = F_{1/B} - F_{1/A}` and `I_3 = F_δ - F_{1/B}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScaleSplit {
    #[serde(rename = "I1")]
    pub i1: f64,
    #[serde(rename = "I2")]
    pub i2: f64,
    #[serde(rename = "I3")]
    pub i3: f64,
    pub total: f64,
    pub delta: f64,
    /// `A · I_1`, the empirical constant in `I_1 ≥ κ A^{-1}`.
    pub kappa: f64,
    /// `F_{δ/2}`, reported next to `total` as a drift check.
    pub half_delta_total: f64,
}

pub fn scale_split_diagnostics(
    mu: &GridMeasure,
    pi: &ParabolaMeasure,
    params: &GapParams,
    delta: f64,
) -> Result<ScaleSplit, GapError> {
    let limit = 1.0 / params.b;
    if !(delta > 0.0 && delta < limit) {
        return Err(GapError::BadDelta { delta, limit });
    }
    let f = |d: f64| convolution_functional(mu, pi, d);
    let fa = f(1.0 / params.a)?;
    let fb = f(limit)?;
    let total = f(delta)?;
    Ok(ScaleSplit {
        i1: fa,
        i2: fb - fa,
        i3: total - fb,
        total,
        delta,
        kappa: params.a * fa,
        half_delta_total: f(delta / 2.0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::super::PARABOLA_NODES;
    use super::*;
    use crate::gapfinder::GaussianKernel;
    use crate::quad::GaussLegendre;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tent_gauss_matches_quadrature() {
        let g = GaussLegendre::new(20);
        for (c, w, d) in [(0.0, 0.5, 0.1), (0.3, 0.125, 0.2), (-0.05, 0.01, 0.3), (0.2, 0.001, 0.3), (1.0, 0.5, 0.1)] {
            let gd = |t: f64| (-PI * t * t / (d * d)).exp() / d;
            let want: f64 =
                g.composite(-w, w, 64).iter().map(|&(u, wt)| wt * (w - u.abs()) / (w * w) * gd(c + u)).sum();
            assert!((tent_gauss(c, w, d) - want).abs() < 1e-10 * (1.0 + want), "{c} {w} {d}");
        }
    }

    /// Direct sum over cell pairs and parabola nodes with a 4D tensor
    /// quadrature of `ψ_δ` over each pair of cells.
    #[test]
    fn matches_naive_triple_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let weights: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let mu = GridMeasure::new(1, weights.iter().map(|w| w / total).collect()).unwrap();
        let pi = ParabolaMeasure::new(1.5, 12);
        let delta = 0.3;
        let kernel = GaussianKernel { delta };
        let g = GaussLegendre::new(8);
        let mut want = 0.0;
        for a in 0..8 {
            for b in 0..8 {
                let (ra, rb) = (mu.cell_rect(a), mu.cell_rect(b));
                let area = ra.ell() * ra.height();
                let mut pair = 0.0;
                for &((z, z2), pw) in &pi.nodes {
                    for (x1, w1) in g.mapped(ra.x(), ra.x() + ra.ell()) {
                        for (s1, w2) in g.mapped(ra.s(), ra.s() + ra.height()) {
                            for (x2, w3) in g.mapped(rb.x(), rb.x() + rb.ell()) {
                                for (s2, w4) in g.mapped(rb.s(), rb.s() + rb.height()) {
                                    pair += pw * w1 * w2 * w3 * w4 * kernel.eval((x1 - x2 - z, s1 - s2 - z2));
                                }
                            }
                        }
                    }
                }
                want += mu.weights()[a] * mu.weights()[b] * pair / (area * area);
            }
        }
        let got = convolution_functional(&mu, &pi, delta).unwrap();
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    #[test]
    fn reflection_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 2;
        let (nx, ns) = grid_dims(m);
        let w: Vec<f64> = (0..nx * ns).map(|_| rng.gen::<f64>()).collect();
        let mu = GridMeasure::new(m, w.clone()).unwrap();
        let mut flipped = vec![0.0; w.len()];
        let mut point = vec![0.0; w.len()];
        for a in 0..nx {
            for b in 0..ns {
                flipped[(nx - 1 - a) * ns + b] = w[a * ns + b];
                point[(nx - 1 - a) * ns + ns - 1 - b] = w[a * ns + b];
            }
        }
        let pi = ParabolaMeasure::new(2.0, 256);
        let base = convolution_functional(&mu, &pi, 0.1).unwrap();
        let f = convolution_functional(&GridMeasure::new(m, flipped).unwrap(), &pi.mirrored(), 0.1).unwrap();
        let p = convolution_functional(&GridMeasure::new(m, point).unwrap(), &pi, 0.1).unwrap();
        assert!((base - f).abs() <= 1e-12 * base);
        assert!((base - p).abs() <= 1e-12 * base);
    }

    #[test]
    fn degenerate_parabola_gives_zero() {
        let mu = GridMeasure::uniform(2).unwrap();
        assert_eq!(convolution_functional(&mu, &ParabolaMeasure::empty(2.0), 0.1).unwrap(), 0.0);
        assert_eq!(convolution_functional(&mu, &ParabolaMeasure::new(1.0, 64), 0.1).unwrap(), 0.0);
        assert!(convolution_functional(&mu, &ParabolaMeasure::new(2.0, 64), 0.0).is_err());
    }

    #[test]
    fn node_doubling_is_stable() {
        let mu = GridMeasure::uniform(3).unwrap();
        let a = convolution_functional(&mu, &ParabolaMeasure::new(2.0, PARABOLA_NODES), 0.1).unwrap();
        let b = convolution_functional(&mu, &ParabolaMeasure::new(2.0, 2 * PARABOLA_NODES), 0.1).unwrap();
        assert!((a - b).abs() < 1e-3 * a);
    }

    #[test]
    fn execution_modes_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..512).map(|_| rng.gen::<f64>()).collect();
        let mu = GridMeasure::new(3, w).unwrap();
        let pi = ParabolaMeasure::new(2.0, 1024);
        let a = convolution_functional_with(&mu, &pi, 0.05, Execution::Sequential).unwrap();
        let b = convolution_functional_with(&mu, &pi, 0.05, Execution::Parallel).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn split_telescopes() {
        let mu = GridMeasure::uniform(2).unwrap();
        let params = GapParams::new(2.0, 1.0, 4).unwrap();
        let pi = ParabolaMeasure::new(params.a, 2048);
        let d = scale_split_diagnostics(&mu, &pi, &params, 0.1).unwrap();
        assert!((d.i1 + d.i2 + d.i3 - d.total).abs() <= 1e-12 * d.total);
        assert!(d.i1 > 0.0 && d.kappa > 0.0);
        assert!(matches!(scale_split_diagnostics(&mu, &pi, &params, 1.0), Err(GapError::BadDelta { .. })));
    }
}
