//! Annulus integrals of `|μ̂|^2`, the tail of `|φ̂|`, and `μ̂` versus `φ̂`.

use std::f64::consts::PI;

use serde::Serialize;

use super::{GapError, GapParams, Mollifier};
use crate::par::{self, Execution};
use crate::pgeom::{FourierMeasure, GridMeasure, Point};
use crate::quad::GaussLegendre;

/// Quadrature grid for the frequency annulus: `angular` midpoint nodes in
/// angle and about `per_unit` Gauss–Legendre nodes per unit radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolarGrid {
    pub angular: usize,
    pub per_unit: usize,
}

impl Default for PolarGrid {
    fn default() -> Self {
        PolarGrid { angular: 512, per_unit: 8 }
    }
}

impl PolarGrid {
    pub fn refined(self, factor: usize) -> Self {
        PolarGrid { angular: self.angular * factor, per_unit: self.per_unit * factor }
    }
}

/// `∫_{A^{1/5} ≤ |ξ| ≤ B^2} |μ̂(ξ)|^2 dξ` on the default grid.
pub fn spectral_gap_integral<M: FourierMeasure + ?Sized>(mu: &M, a: f64, b: f64) -> Result<f64, GapError> {
    spectral_gap_integral_with(mu, a, b, PolarGrid::default(), Execution::default())
}

/// The angular integral runs over a half turn and is doubled, which relies on
/// `|μ̂(-ξ)| = |μ̂(ξ)|` for real measures.
pub fn spectral_gap_integral_with<M: FourierMeasure + ?Sized>(
    mu: &M,
    a: f64,
    b: f64,
    grid: PolarGrid,
    exec: Execution,
) -> Result<f64, GapError> {
    if !(a.is_finite() && a >= 1.0) {
        return Err(GapError::BadParam(format!("A = {a} must be ≥ 1")));
    }
    if grid.angular == 0 || grid.per_unit == 0 {
        return Err(GapError::BadParam("polar grid must be non-empty".into()));
    }
    let (inner, outer) = (a.powf(0.2), b * b);
    if outer.is_nan() || outer <= inner {
        return Err(GapError::BadAnnulus { inner, outer });
    }
    let gl = GaussLegendre::new(4);
    let panels = (((outer - inner) * grid.per_unit as f64) / 4.0).ceil().max(1.0) as usize;
    let radial = gl.composite(inner, outer, panels);
    let dtheta = PI / grid.angular as f64;
    let dirs: Vec<(f64, f64)> =
        (0..grid.angular).map(|k| ((k as f64 + 0.5) * dtheta).sin_cos()).map(|(s, c)| (c, s)).collect();
    let per_radius = par::map_range(exec, radial.len(), |i| {
        let (r, w) = radial[i];
        let xis: Vec<Point> = dirs.iter().map(|&(c, s)| (r * c, r * s)).collect();
        let ring: f64 = xis.iter().map(|&xi| mu.fourier(xi).norm_sqr()).sum();
        ring * w * r
    });
    Ok(2.0 * dtheta * per_radius.iter().sum::<f64>())
}

/// `∫_{|ξ| ≥ R} |φ̂(ξ)| dξ` with `R = A^{1/5}`, split into a quadrature over
/// `[-L, L]^2` and a bound on the rest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailReport {
    pub a: f64,
    pub inner_radius: f64,
    pub truncation_radius: f64,
    /// Quadrature value inside the truncation box.
    pub tail: f64,
    /// Bound on the part outside the box, from `|b̂(ξ)| ≤ ‖b''‖_1 / (2πξ)^2`.
    pub remainder: f64,
    pub bound: f64,
    /// `A^{-3}`.
    pub target: f64,
    pub certified: bool,
}

/// Samples of `|b̂|` on `[0, L]` and their complementary cumulative integrals.
struct TailTable {
    step: f64,
    abs: Vec<f64>,
    /// `∫_{ξ_i}^L |b̂|` by the trapezoid rule.
    upper: Vec<f64>,
    beyond: f64,
    half_l1: f64,
}

const TAIL_TRUNCATION: f64 = 64.0;
const TAIL_STEPS_PER_UNIT: usize = 64;

impl TailTable {
    fn new(phi: &Mollifier) -> Self {
        let n = (TAIL_TRUNCATION as usize) * TAIL_STEPS_PER_UNIT;
        let step = 1.0 / TAIL_STEPS_PER_UNIT as f64;
        let abs: Vec<f64> =
            par::map_range(Execution::default(), n + 1, |i| phi.profile_fourier(i as f64 * step).norm());
        let mut upper = vec![0.0; n + 1];
        for i in (0..n).rev() {
            upper[i] = upper[i + 1] + 0.5 * step * (abs[i] + abs[i + 1]);
        }
        let m2 = phi.profile_second_derivative_l1();
        let beyond = m2 / (4.0 * PI * PI * TAIL_TRUNCATION);
        let half_l1 = upper[0] + beyond;
        TailTable { step, abs, upper, beyond, half_l1 }
    }

    /// `∫_y^L |b̂|`, linear between samples.
    fn upper_at(&self, y: f64) -> f64 {
        if y >= TAIL_TRUNCATION {
            return 0.0;
        }
        let f = y / self.step;
        let i = f.floor() as usize;
        let t = f - i as f64;
        self.upper[i] * (1.0 - t) + self.upper[i + 1] * t
    }

    fn report(&self, a: f64) -> TailReport {
        let r = a.powf(0.2);
        let n = self.abs.len() - 1;
        let mut quad = 0.0;
        for i in 0..=n {
            let xi = i as f64 * self.step;
            let y = (r * r - xi * xi).max(0.0).sqrt();
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            quad += w * self.abs[i] * self.upper_at(y);
        }
        let tail = 4.0 * self.step * quad;
        let remainder = 8.0 * self.beyond * self.half_l1;
        let target = a.powi(-3);
        let bound = tail + remainder;
        TailReport {
            a,
            inner_radius: r,
            truncation_radius: TAIL_TRUNCATION,
            tail,
            remainder,
            bound,
            target,
            certified: bound <= target,
        }
    }
}

/// Tail of `|φ̂|` outside the disc of radius `A^{1/5}`, with certification
/// of `tail ≤ A^{-3}`.
pub fn mollifier_tail(phi: &Mollifier, a: f64) -> Result<TailReport, GapError> {
    if !(a.is_finite() && a >= 1.0) {
        return Err(GapError::BadParam(format!("A = {a} must be ≥ 1")));
    }
    Ok(TailTable::new(phi).report(a))
}

/// Tail reports for `A = 1, 2, 4, …, 2^max_doublings` and the first
/// certified `A`, if any.
pub fn mollifier_certification_scan(phi: &Mollifier, max_doublings: u32) -> (Vec<TailReport>, Option<f64>) {
    let table = TailTable::new(phi);
    let reports: Vec<TailReport> = (0..=max_doublings).map(|k| table.report((k as f64).exp2())).collect();
    let first = reports.iter().find(|r| r.certified).map(|r| r.a);
    (reports, first)
}

/// Distance of the chosen constants from the requirements of the proof.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyReport {
    pub params: GapParams,
    /// `log2(A^{-3} / (2^{-T} B^6))`, non-negative for valid parameters.
    pub constraint_slack_log2: f64,
    pub tail: TailReport,
    /// First `A = 2^k` passing the tail test, `k ≤ 30`.
    pub a_required: Option<f64>,
    /// `(A C C_σ)^{5/(σ - 3/2)}`.
    pub b0: f64,
    pub b_ok: bool,
    pub log10_b_shortfall: f64,
}

pub fn certify(params: &GapParams, phi: &Mollifier) -> CertifyReport {
    let table = TailTable::new(phi);
    let tail = table.report(params.a);
    let a_required = (0..=30u32).map(|k| table.report((k as f64).exp2())).find(|r| r.certified).map(|r| r.a);
    let exponent = 5.0 / (params.sigma - 1.5);
    let base = params.a * params.c_frost * params.c_sigma;
    let log10_b0 = exponent * base.log10();
    let b0 = 10f64.powf(log10_b0);
    let slack = (params.a.powi(-3) / ((-(params.t as f64)).exp2() * params.b.powi(6))).log2();
    CertifyReport {
        params: *params,
        constraint_slack_log2: slack,
        tail,
        a_required,
        b0,
        b_ok: params.b >= b0,
        log10_b_shortfall: (log10_b0 - params.b.log10()).max(0.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub t: u32,
    /// `max |μ̂(ξ) - φ̂(ξ)| / (|ξ| 2^{-T})` over the samples.
    pub max_ratio: f64,
    pub argmax: Point,
    pub samples: usize,
    /// `(|ξ|, ratio)` per sample.
    pub ratios: Vec<(f64, f64)>,
}

/// `radial` radii log-spaced in `[r_min, r_max]` times `angular` directions
/// on a half turn.
pub fn comparison_samples(r_min: f64, r_max: f64, radial: usize, angular: usize) -> Vec<Point> {
    let mut out = Vec::with_capacity(radial * angular);
    for i in 0..radial {
        let t = if radial == 1 { 0.0 } else { i as f64 / (radial - 1) as f64 };
        let r = r_min * (r_max / r_min).powf(t);
        for k in 0..angular {
            let (s, c) = ((k as f64 + 0.5) * PI / angular as f64).sin_cos();
            out.push((r * c, r * s));
        }
    }
    out
}

/// Largest sampled defect ratio `|μ̂(ξ) - φ̂(ξ)| / (|ξ| 2^{-T})`. The
/// frequency `ξ = 0` is skipped.
pub fn fourier_comparison(mu: &GridMeasure, phi: &Mollifier, t: u32, xis: &[Point]) -> ComparisonReport {
    let f = mu.fourier();
    let scale = (-(t as f64)).exp2();
    let pts: Vec<Point> = xis.iter().copied().filter(|x| x.0 != 0.0 || x.1 != 0.0).collect();
    let ratios: Vec<(f64, f64)> = par::map_range(Execution::default(), pts.len(), |i| {
        let xi = pts[i];
        let r = xi.0.hypot(xi.1);
        (r, (f.fourier(xi) - phi.fourier(xi)).norm() / (r * scale))
    });
    let mut best = (0.0, (0.0, 0.0));
    for (i, &(_, v)) in ratios.iter().enumerate() {
        if v > best.0 {
            best = (v, pts[i]);
        }
    }
    ComparisonReport { t, max_ratio: best.0, argmax: best.1, samples: pts.len(), ratios }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pgeom::Atoms;

    #[test]
    fn point_mass_gives_annulus_area() {
        let d = Atoms::dirac((0.0, 0.0));
        for (a, b) in [(1.0, 2.0), (10.0, 3.0)] {
            let v = spectral_gap_integral(&d, a, b).unwrap();
            let want = PI * (b.powi(4) - a.powf(0.4));
            assert!((v - want).abs() <= 1e-3 * want);
        }
        let off = Atoms::dirac((0.3, 0.7));
        let v = spectral_gap_integral(&off, 1.0, 2.0).unwrap();
        assert!((v - PI * 15.0).abs() < 1e-9);
    }

    #[test]
    fn empty_annulus_rejected() {
        let d = Atoms::dirac((0.0, 0.0));
        assert!(matches!(spectral_gap_integral(&d, 10.0, 1.0), Err(GapError::BadAnnulus { .. })));
        assert!(spectral_gap_integral(&d, 0.5, 2.0).is_err());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let mu = GridMeasure::uniform(2).unwrap().fourier();
        let g = PolarGrid { angular: 64, per_unit: 4 };
        let a = spectral_gap_integral_with(&mu, 1.0, 2.0, g, Execution::Sequential).unwrap();
        let b = spectral_gap_integral_with(&mu, 1.0, 2.0, g, Execution::Parallel).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    /// The tail plus an independent polar quadrature of `|φ̂|` over the disc
    /// recovers `(∫|b̂|)^2`.
    #[test]
    fn tail_complements_disc() {
        let phi = Mollifier::default();
        let table = TailTable::new(&phi);
        let r = 2f64.powf(0.2 * 5.0);
        let rep = table.report(32.0);
        assert!((rep.inner_radius - r).abs() < 1e-12);
        let gl = GaussLegendre::new(12);
        let n_ang = 720;
        let mut disc = 0.0;
        for (rr, w) in gl.composite(0.0, r, 32) {
            for k in 0..n_ang {
                let th = (k as f64 + 0.5) * 2.0 * PI / n_ang as f64;
                disc += w * rr * phi.fourier((rr * th.cos(), rr * th.sin())).norm();
            }
        }
        disc *= 2.0 * PI / n_ang as f64;
        let whole = 4.0 * table.upper[0] * table.upper[0];
        assert!((rep.tail + disc - whole).abs() < 2e-3 * whole, "{} + {disc} vs {whole}", rep.tail);
    }

    #[test]
    fn tail_decreases_and_certification_fails() {
        let phi = Mollifier::default();
        let (reports, first) = mollifier_certification_scan(&phi, 30);
        for w in reports.windows(2) {
            assert!(w[1].tail <= w[0].tail);
        }
        assert!(first.is_none());
        assert!(!mollifier_tail(&phi, 10.0).unwrap().certified);
    }

    #[test]
    fn certify_reports_b0() {
        let p = GapParams::with_max_b(10.0, 20).unwrap();
        let c = certify(&p, &Mollifier::default());
        assert!((c.b0.log10() - 30.0).abs() < 1e-9);
        assert!(!c.b_ok);
        assert!(c.constraint_slack_log2.abs() < 1e-9);
    }

    #[test]
    fn comparison_skips_origin() {
        let mu = GridMeasure::uniform(1).unwrap();
        let r = fourier_comparison(&mu, &Mollifier::default(), 1, &[(0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(r.samples, 1);
        assert!(r.max_ratio.is_finite());
    }
}
