//! Spectral-gap measures and the parabola convolution functional.
//!
//! * [`Mollifier`]: a smooth product bump `φ ≥ 0` on `(0, 1)^2` with `∫φ = 1`.
//! * [`GapParams`]: constants `(A, B, T)` tied by `2^{-T} B^6 ≤ A^{-3}`.
//! * [`build_gap_measure`]: a probability measure on a set `K` whose Fourier
//!   transform is close to `φ̂`, assembled from Frostman measures on the
//!   generation-`T` children of a dense dyadic rectangle.
//! * [`spectral_gap_integral`]: `∫_{A^{1/5} ≤ |ξ| ≤ B^2} |μ̂(ξ)|^2 dξ`.
//! * [`convolution_functional`]: `∭ ψ_δ(x - y - w) dπ(w) dμ(y) dμ(x)` with `π`
//!   the arclength measure on a truncated parabola.

mod functional;
mod pipeline;
mod spectral_gap;

pub use functional::{convolution_functional, convolution_functional_with, scale_split_diagnostics, ScaleSplit};
pub use pipeline::{build_gap_measure, ChildReport, GapReport, PipelineOptions};
pub use spectral_gap::{
    certify, comparison_samples, fourier_comparison, mollifier_certification_scan, mollifier_tail,
    spectral_gap_integral, spectral_gap_integral_with, CertifyReport, ComparisonReport, PolarGrid, TailReport,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::pgeom::{FourierMeasure, GeomError, ParabolicRect, Point};
use crate::quad::GaussLegendre;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GapError {
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error("parameters violate 2^-T B^6 ≤ A^-3: 2^-{t} · {b}^6 = {lhs} > {rhs}")]
    ParamViolation { t: u32, b: f64, lhs: f64, rhs: f64 },
    #[error("invalid parameter: {0}")]
    BadParam(String),
    #[error("empty frequency annulus: B^2 = {outer} ≤ A^(1/5) = {inner}")]
    BadAnnulus { inner: f64, outer: f64 },
    #[error("δ = {delta} must lie in (0, 1/B = {limit})")]
    BadDelta { delta: f64, limit: f64 },
    #[error("{} generation-T children fall below half density", .0.len())]
    ChildDensityFailure(Vec<ChildReport>),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

/// `h(u) = g(u) / (g(u) + g(1 - u))`, `g(u) = e^{-1/u}` for `u > 0`: a smooth
/// step from 0 on `u ≤ 0` to 1 on `u ≥ 1`.
fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let (a, b) = ((-1.0 / u).exp(), (-1.0 / (1.0 - u)).exp());
        a / (a + b)
    }
}

fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        let (a, b) = ((-1.0 / u).exp(), (-1.0 / (1.0 - u)).exp());
        let (da, db) = (a / (u * u), -b / ((1.0 - u) * (1.0 - u)));
        (da * b - a * db) / ((a + b) * (a + b))
    }
}

/// `φ(x, s) = b(x) b(s)` with the plateau bump
/// `b(t) = c · h(t/ε) · h((1 - t)/ε)`, equal to `c` on `[ε, 1 - ε]`.
/// Since `h(u) + h(1 - u) = 1`, `∫b = c(1 - ε)`, so `c = 1/(1 - ε)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Mollifier {
    pub eps: f64,
    pub c: f64,
}

impl Default for Mollifier {
    fn default() -> Self {
        Mollifier::new(0.25)
    }
}

impl Mollifier {
    pub fn new(eps: f64) -> Self {
        assert!(eps > 0.0 && eps <= 0.5);
        Mollifier { eps, c: 1.0 / (1.0 - eps) }
    }

    /// `b(t)`.
    pub fn profile(&self, t: f64) -> f64 {
        self.c * smooth_step(t / self.eps) * smooth_step((1.0 - t) / self.eps)
    }

    pub fn profile_derivative(&self, t: f64) -> f64 {
        let e = self.eps;
        let (u, v) = (t / e, (1.0 - t) / e);
        self.c * (smooth_step_derivative(u) * smooth_step(v) - smooth_step(u) * smooth_step_derivative(v)) / e
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.profile(p.0) * self.profile(p.1)
    }

    /// `‖φ‖_∞ = c^2`.
    pub fn sup_norm(&self) -> f64 {
        self.c * self.c
    }

    /// `∫_a^b b(t) dt`, the plateau exactly and the ramps by composite
    /// Gauss–Legendre quadrature.
    pub fn profile_integral(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(0.0), b.min(1.0));
        if b <= a {
            return 0.0;
        }
        let e = self.eps;
        let g = GaussLegendre::new(10);
        let mut acc = 0.0;
        for (lo, hi, flat) in [(0.0, e, false), (e, 1.0 - e, true), (1.0 - e, 1.0, false)] {
            let (l, h) = (a.max(lo), b.min(hi));
            if h <= l {
                continue;
            }
            if flat {
                acc += self.c * (h - l);
            } else {
                for (t, w) in g.composite(l, h, 16) {
                    acc += w * self.profile(t);
                }
            }
        }
        acc
    }

    /// `∫_Q φ`.
    pub fn rect_mass(&self, q: &ParabolicRect) -> f64 {
        self.profile_integral(q.x(), q.x() + q.ell()) * self.profile_integral(q.s(), q.s() + q.height())
    }

    /// `b̂(ξ) = e^{-πiξ} · 2 ∫_0^{1/2} b(t) cos(2πξ(t - 1/2)) dt`, using the
    /// symmetry `b(1 - t) = b(t)`.
    pub fn profile_fourier(&self, xi: f64) -> Complex64 {
        Complex64::cis(-PI * xi) * self.profile_cosine(xi)
    }

    fn profile_cosine(&self, xi: f64) -> f64 {
        let e = self.eps;
        let plateau = if xi.abs() < 1e-12 {
            self.c * (0.5 - e)
        } else {
            self.c * (PI * xi * (1.0 - 2.0 * e)).sin() / (2.0 * PI * xi)
        };
        let g = GaussLegendre::new(8);
        let panels = 8 + (xi.abs() * e * 4.0).ceil() as usize;
        let mut ramp = 0.0;
        for (t, w) in g.composite(0.0, e, panels) {
            ramp += w * self.profile(t) * (2.0 * PI * xi * (t - 0.5)).cos();
        }
        2.0 * (ramp + plateau)
    }

    /// `‖b''‖_1`, the total variation of `b'` sampled on a fine grid.
    pub fn profile_second_derivative_l1(&self) -> f64 {
        let n = 20_000;
        let mut tv = 0.0;
        let mut prev = self.profile_derivative(0.0);
        for i in 1..=n {
            let cur = self.profile_derivative(i as f64 / n as f64);
            tv += (cur - prev).abs();
            prev = cur;
        }
        tv
    }
}

impl FourierMeasure for Mollifier {
    fn fourier(&self, xi: Point) -> Complex64 {
        self.profile_fourier(xi.0) * self.profile_fourier(xi.1)
    }

    fn total_mass(&self) -> f64 {
        1.0
    }
}

/// `σ = 10/6`.
pub const SIGMA: f64 = 10.0 / 6.0;

/// Constants of the gap construction. `δ = 2^{-3T}/8` is derived.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GapParams {
    pub a: f64,
    pub b: f64,
    pub t: u32,
    pub sigma: f64,
    pub c_frost: f64,
    pub c_sigma: f64,
    pub delta: f64,
}

impl GapParams {
    /// Validates `A ≥ 1`, `B > 0`, `T ≥ 1` and `2^{-T} B^6 ≤ A^{-3}` (with
    /// relative slack `1e-12` for `B` taken at the boundary).
    pub fn new(a: f64, b: f64, t: u32) -> Result<Self, GapError> {
        if !(a.is_finite() && a >= 1.0) {
            return Err(GapError::BadParam(format!("A = {a} must be ≥ 1")));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(GapError::BadParam(format!("B = {b} must be positive")));
        }
        if t == 0 || t > 60 {
            return Err(GapError::BadParam(format!("T = {t} must lie in 1..=60")));
        }
        let lhs = (-(t as f64)).exp2() * b.powi(6);
        let rhs = a.powi(-3);
        if lhs > rhs * (1.0 + 1e-12) {
            return Err(GapError::ParamViolation { t, b, lhs, rhs });
        }
        Ok(GapParams { a, b, t, sigma: SIGMA, c_frost: 1.0, c_sigma: 1.0, delta: (-3.0 * t as f64).exp2() / 8.0 })
    }

    /// Largest admissible `B`: `(2^T A^{-3})^{1/6}`.
    pub fn with_max_b(a: f64, t: u32) -> Result<Self, GapError> {
        Self::new(a, Self::max_b(a, t), t)
    }

    pub fn max_b(a: f64, t: u32) -> f64 {
        ((t as f64).exp2() * a.powi(-3)).powf(1.0 / 6.0)
    }

    pub fn with_constants(mut self, c_frost: f64, c_sigma: f64) -> Result<Self, GapError> {
        if !(c_frost >= 1.0 && c_sigma > 0.0) {
            return Err(GapError::BadParam("C must be ≥ 1 and C_σ positive".into()));
        }
        self.c_frost = c_frost;
        self.c_sigma = c_sigma;
        Ok(self)
    }

    /// Inner and outer radius `(A^{1/5}, B^2)` of the frequency annulus.
    pub fn annulus(&self) -> (f64, f64) {
        (self.a.powf(0.2), self.b * self.b)
    }

    pub fn annulus_is_empty(&self) -> bool {
        let (i, o) = self.annulus();
        o <= i
    }
}

/// Arclength measure on `{(z, z^2) : A^{-2} ≤ |z| ≤ 1}`, discretised by the
/// trapezoid rule in `z` on each branch.
#[derive(Clone, Debug, PartialEq)]
pub struct ParabolaMeasure {
    pub a: f64,
    /// `(point, weight)`.
    pub nodes: Vec<(Point, f64)>,
}

/// Default node count of [`ParabolaMeasure`].
pub const PARABOLA_NODES: usize = 4096;

impl ParabolaMeasure {
    /// `n` nodes split evenly between the two branches.
    pub fn new(a: f64, n: usize) -> Self {
        let lo = a.powi(-2);
        let per = n / 2;
        let mut nodes = Vec::with_capacity(2 * per);
        if per >= 2 && lo < 1.0 {
            let h = (1.0 - lo) / (per - 1) as f64;
            for sign in [-1.0, 1.0] {
                for i in 0..per {
                    let z = lo + i as f64 * h;
                    let end = if i == 0 || i == per - 1 { 0.5 } else { 1.0 };
                    let w = end * h * (1.0 + 4.0 * z * z).sqrt();
                    nodes.push(((sign * z, z * z), w));
                }
            }
        }
        ParabolaMeasure { a, nodes }
    }

    pub fn empty(a: f64) -> Self {
        ParabolaMeasure { a, nodes: Vec::new() }
    }

    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.1).sum()
    }

    /// Exact arclength `2 (L(1) - L(A^{-2}))`,
    /// `L(z) = z√(1 + 4z²)/2 + asinh(2z)/4`.
    pub fn exact_length(a: f64) -> f64 {
        let l = |z: f64| z * (1.0 + 4.0 * z * z).sqrt() / 2.0 + (2.0 * z).asinh() / 4.0;
        let lo = a.powi(-2);
        if lo >= 1.0 {
            0.0
        } else {
            2.0 * (l(1.0) - l(lo))
        }
    }

    /// Mirror image under `z ↦ -z`.
    pub fn mirrored(&self) -> Self {
        ParabolaMeasure { a: self.a, nodes: self.nodes.iter().map(|&((x, s), w)| ((-x, s), w)).collect() }
    }
}

/// `ψ(x) = e^{-π|x|^2}` and `ψ_δ(x) = δ^{-2} ψ(x/δ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianKernel {
    pub delta: f64,
}

impl GaussianKernel {
    pub fn psi(x: Point) -> f64 {
        (-PI * (x.0 * x.0 + x.1 * x.1)).exp()
    }

    pub fn eval(&self, x: Point) -> f64 {
        Self::psi((x.0 / self.delta, x.1 / self.delta)) / (self.delta * self.delta)
    }

    /// Radius with `ψ(x) ≥ 1/2` exactly for `|x| ≤ c_ψ`: `√(ln 2 / π)`.
    pub fn c_psi() -> f64 {
        (std::f64::consts::LN_2 / PI).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollifier_normalisation_and_support() {
        let phi = Mollifier::default();
        let g = GaussLegendre::new(20);
        let one: f64 = g.composite(0.0, 1.0, 64).iter().map(|(t, w)| w * phi.profile(*t)).sum();
        assert!((one * one - 1.0).abs() < 1e-6);
        assert!((phi.profile_integral(0.0, 1.0) - 1.0).abs() < 1e-12);
        assert!(phi.sup_norm() <= 2.0);
        assert_eq!(phi.eval((0.0, 0.5)), 0.0);
        assert_eq!(phi.eval((0.5, 1.0)), 0.0);
        assert!((phi.eval((0.5, 0.5)) - phi.sup_norm()).abs() < 1e-15);
        let sampled = (0..=200).map(|i| phi.profile(i as f64 / 200.0)).fold(0.0, f64::max);
        assert!(sampled <= phi.c);
    }

    #[test]
    fn profile_fourier_matches_direct_quadrature() {
        let phi = Mollifier::default();
        let g = GaussLegendre::new(16);
        for xi in [0.0, 0.7, 3.0, -5.5, 20.0] {
            let direct: Complex64 = g
                .composite(0.0, 1.0, 128)
                .iter()
                .map(|&(t, w)| Complex64::cis(-2.0 * PI * xi * t) * (w * phi.profile(t)))
                .sum();
            assert!((phi.profile_fourier(xi) - direct).norm() < 1e-10, "ξ = {xi}");
        }
        assert!((phi.fourier((0.0, 0.0)).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn second_derivative_norm() {
        // b' peaks at c·h'(1/2)/ε = 2c/ε on each ramp, and b' is unimodal there.
        let phi = Mollifier::default();
        let want = 4.0 * 2.0 * phi.c / phi.eps;
        assert!((phi.profile_second_derivative_l1() - want).abs() < 1e-6 * want);
    }

    #[test]
    fn params_constraint() {
        assert!(GapParams::new(10.0, 0.3, 1).is_ok());
        assert!(matches!(GapParams::new(10.0, 0.4, 1), Err(GapError::ParamViolation { .. })));
        let p = GapParams::with_max_b(10.0, 3).unwrap();
        assert!((p.delta - 1.0 / 8.0 / 512.0).abs() < 1e-18);
        assert!(GapParams::new(0.5, 0.1, 1).is_err());
        assert!(GapParams::new(2.0, 0.1, 0).is_err());
        assert!(p.annulus_is_empty());
        assert!(!GapParams::with_max_b(1.0, 1).unwrap().annulus_is_empty());
    }

    #[test]
    fn parabola_mass() {
        for a in [1.5, 2.0, 10.0] {
            let pi = ParabolaMeasure::new(a, PARABOLA_NODES);
            let exact = ParabolaMeasure::exact_length(a);
            assert!((pi.mass() - exact).abs() <= 1e-6 * exact);
        }
        assert_eq!(ParabolaMeasure::new(1.0, 100).mass(), 0.0);
    }

    #[test]
    fn gaussian_kernel() {
        assert_eq!(GaussianKernel::psi((0.0, 0.0)), 1.0);
        let c = GaussianKernel::c_psi();
        assert!((GaussianKernel::psi((c, 0.0)) - 0.5).abs() < 1e-15);
        assert!((GaussianKernel { delta: 0.5 }.eval((0.0, 0.0)) - 4.0).abs() < 1e-15);
    }
}
