//! Riesz energies `I_σ(μ) = ∬ |x - y|^{-σ} dμ(x) dμ(y)` of grid measures.
//!
//! The double sum over cell pairs only depends on the offset between cells,
//! so it is evaluated as `Σ_offset R(offset) K(offset)` with `R` the
//! autocorrelation of the weights (computed by a zero-padded 2D FFT) and
//! `K(offset)` the pair kernel at that offset.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use serde::Serialize;

use super::fourier::{FourierMeasure, GridFourier};
use super::{grid_dims, GeomError, GridMeasure};
use crate::par::{self, Execution};
use crate::quad::GaussLegendre;

/// How two cells interact.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKernel {
    /// `|c_i - c_j|^{-σ}` between distinct cells; the same-cell term is the
    /// exact cell self-energy.
    CenterToCenter,
    /// The exact average of `|x - y|^{-σ}` over `x ∈ cell_i`, `y ∈ cell_j`:
    /// quadrature near the diagonal, second-order moment expansion beyond.
    /// The measure is first coarsened to the smallest grid carrying the
    /// same density.
    #[default]
    CellAveraged,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyOptions {
    pub kernel: PairKernel,
    /// Truncation radius of the Fourier-side diagnostic, if wanted.
    pub fourier_radius: Option<f64>,
    pub angular: usize,
    pub exec: Execution,
}

impl Default for EnergyOptions {
    fn default() -> Self {
        EnergyOptions { kernel: PairKernel::default(), fourier_radius: None, angular: 512, exec: Execution::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FourierSide {
    pub value: f64,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    pub sigma: f64,
    pub kernel: PairKernel,
    /// `cross + self_term`.
    pub direct: f64,
    pub cross: f64,
    pub self_term: f64,
    /// Depth of the grid the sum ran on.
    pub depth: u32,
    pub fourier_side: Option<FourierSide>,
}

/// Offsets with `|D| < NEAR_CELLS · 2^-m` use quadrature for the kernel.
const NEAR_CELLS: f64 = 6.0;

pub fn riesz_energy(mu: &GridMeasure, sigma: f64, opts: &EnergyOptions) -> Result<EnergyReport, GeomError> {
    if !(sigma > 0.0 && sigma < 2.0) {
        return Err(GeomError::BadExponent(sigma));
    }
    let grid = match opts.kernel {
        PairKernel::CellAveraged => mu.coarsest_equivalent(),
        PairKernel::CenterToCenter => mu.clone(),
    };
    let m = grid.depth();
    let (nx, ns) = grid_dims(m);
    let (w, h) = (1.0 / nx as f64, 1.0 / ns as f64);
    let auto = autocorrelation(&grid, opts.exec);
    let (big_x, big_s) = (2 * nx, 2 * ns);
    let offset = |i: usize, n: usize| if i < n / 2 { i as i64 } else { i as i64 - n as i64 };
    let pair = PairIntegrator::new(w, h, sigma);
    let self_term = auto[0] * pair.average(0, 0);
    let near_x = NEAR_CELLS.ceil() as i64;
    let kernel = opts.kernel;
    let cross = par::sum_range(opts.exec, big_x, |ix| {
        let dx = offset(ix, big_x);
        let mut acc = 0.0;
        for is in 0..big_s {
            let r = auto[ix * big_s + is];
            if r == 0.0 || (ix == 0 && is == 0) {
                continue;
            }
            let ds = offset(is, big_s);
            let (ux, us) = (dx as f64 * w, ds as f64 * h);
            let k = match kernel {
                PairKernel::CenterToCenter => (ux * ux + us * us).powf(-0.5 * sigma),
                PairKernel::CellAveraged => {
                    if dx.abs() <= near_x && (ux * ux + us * us).sqrt() < NEAR_CELLS * w {
                        pair.average(dx, ds)
                    } else {
                        pair.far(ux, us)
                    }
                }
            };
            acc += r * k;
        }
        acc
    });
    let fourier_side = opts.fourier_radius.map(|radius| FourierSide {
        value: fourier_energy(&mu.fourier(), sigma, radius, opts.angular, opts.exec),
        radius,
    });
    Ok(EnergyReport { sigma, kernel, direct: cross + self_term, cross, self_term, depth: m, fourier_side })
}

/// `R(dx, ds) = Σ w(a, b) w(a + dx, b + ds)` on the `2n_x × 2n_s` torus, so
/// every offset in `(-n, n)` appears without wrap-around.
pub(crate) fn autocorrelation(mu: &GridMeasure, exec: Execution) -> Vec<f64> {
    let (nx, ns) = grid_dims(mu.depth());
    let (bx, bs) = (2 * nx, 2 * ns);
    let mut data = vec![Complex64::new(0.0, 0.0); bx * bs];
    for a in 0..nx {
        for b in 0..ns {
            data[a * bs + b] = Complex64::new(mu.weights()[a * ns + b], 0.0);
        }
    }
    fft2(&mut data, bx, bs, FftDirection::Forward, exec);
    for v in data.iter_mut() {
        *v = Complex64::new(v.norm_sqr(), 0.0);
    }
    fft2(&mut data, bx, bs, FftDirection::Inverse, exec);
    let scale = 1.0 / (bx * bs) as f64;
    data.iter().map(|v| v.re * scale).collect()
}

fn fft2(data: &mut [Complex64], rows: usize, cols: usize, dir: FftDirection, exec: Execution) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(cols, dir);
    par::for_each_chunk_mut(exec, data, cols, |_, row| row_fft.process(row));
    let col_fft = planner.plan_fft(rows, dir);
    let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = data[r * cols + c];
        }
    }
    par::for_each_chunk_mut(exec, &mut t, rows, |_, col| col_fft.process(col));
    for r in 0..rows {
        for c in 0..cols {
            data[r * cols + c] = t[c * rows + r];
        }
    }
}

/// Average of `|x - y|^{-σ}` over two `w × h` cells at offset
/// `(dx w, ds h)`. The difference `x - y` has density
/// `t_w(u) t_h(v)`, `t_w(u) = (w - |u|)/w^2` on `[-w, w]`, so the average is
/// a 2D integral over four quadrants on which the density is bilinear.
struct PairIntegrator {
    w: f64,
    h: f64,
    sigma: f64,
    smooth: GaussLegendre,
    singular: GaussLegendre,
}

type Rect = (f64, f64, f64, f64);

impl PairIntegrator {
    fn new(w: f64, h: f64, sigma: f64) -> Self {
        PairIntegrator { w, h, sigma, smooth: GaussLegendre::new(6), singular: GaussLegendre::new(16) }
    }

    fn density(&self, u: f64, v: f64) -> f64 {
        (self.w - u.abs()) * (self.h - v.abs()) / (self.w * self.w * self.h * self.h)
    }

    fn average(&self, dx: i64, ds: i64) -> f64 {
        let d = (dx as f64 * self.w, ds as f64 * self.h);
        let (w, h) = (self.w, self.h);
        let quadrants = [(-w, 0.0, -h, 0.0), (0.0, w, -h, 0.0), (-w, 0.0, 0.0, h), (0.0, w, 0.0, h)];
        // The kernel is singular where (u, v) = -d, always a quadrant corner.
        let p = (-d.0, -d.1);
        quadrants.iter().map(|&r| self.integrate(r, p, d)).sum()
    }

    fn integrand(&self, u: f64, v: f64, d: (f64, f64)) -> f64 {
        let (a, b) = (d.0 + u, d.1 + v);
        self.density(u, v) * (a * a + b * b).powf(-0.5 * self.sigma)
    }

    fn integrate(&self, r: Rect, p: (f64, f64), d: (f64, f64)) -> f64 {
        let (u0, u1, v0, v1) = r;
        let (lu, lv) = (u1 - u0, v1 - v0);
        let tol = 1e-9 * lu.max(lv);
        let on = |a: f64, b: f64| (a - b).abs() <= tol;
        let corner = (on(p.0, u0) || on(p.0, u1)) && (on(p.1, v0) || on(p.1, v1));
        if corner {
            if lu > 2.0 * lv || lv > 2.0 * lu {
                return self.split(r, p, d);
            }
            return self.duffy(r, p, d);
        }
        let du = (u0 - p.0).max(p.0 - u1).max(0.0);
        let dv = (v0 - p.1).max(p.1 - v1).max(0.0);
        let dist = (du * du + dv * dv).sqrt();
        let diam = (lu * lu + lv * lv).sqrt();
        if diam > 0.7 * dist || lu > 4.0 * lv || lv > 4.0 * lu {
            return self.split(r, p, d);
        }
        let mut acc = 0.0;
        for (u, wu) in self.smooth.mapped(u0, u1) {
            for (v, wv) in self.smooth.mapped(v0, v1) {
                acc += wu * wv * self.integrand(u, v, d);
            }
        }
        acc
    }

    fn split(&self, r: Rect, p: (f64, f64), d: (f64, f64)) -> f64 {
        let (u0, u1, v0, v1) = r;
        if u1 - u0 >= v1 - v0 {
            let um = 0.5 * (u0 + u1);
            self.integrate((u0, um, v0, v1), p, d) + self.integrate((um, u1, v0, v1), p, d)
        } else {
            let vm = 0.5 * (v0 + v1);
            self.integrate((u0, u1, v0, vm), p, d) + self.integrate((u0, u1, vm, v1), p, d)
        }
    }

    /// Near-square rectangle with the singularity at corner `p`: two
    /// triangles with apex `p`, radial variable `t = τ^{1/(2-σ)}` so that
    /// `t^{1-σ} dt = dτ/(2-σ)`.
    fn duffy(&self, r: Rect, p: (f64, f64), d: (f64, f64)) -> f64 {
        let (u0, u1, v0, v1) = r;
        let corners = [(u0, v0), (u1, v0), (u1, v1), (u0, v1)];
        let k = corners
            .iter()
            .position(|c| (c.0 - p.0).abs() + (c.1 - p.1).abs() <= 1e-9 * (u1 - u0).max(v1 - v0))
            .expect("corner");
        let apex = corners[k];
        let opposite = corners[(k + 2) % 4];
        let e1 = corners[(k + 1) % 4];
        let e2 = corners[(k + 3) % 4];
        let expo = 1.0 / (2.0 - self.sigma);
        let mut acc = 0.0;
        for (a, b) in [(e1, opposite), (opposite, e2)] {
            let (ax, ay) = (a.0 - apex.0, a.1 - apex.1);
            let (bx, by) = (b.0 - a.0, b.1 - a.1);
            let jac = (ax * by - ay * bx).abs();
            for (lam, wl) in self.singular.mapped(0.0, 1.0) {
                let (ex, ey) = (ax + lam * bx, ay + lam * by);
                let e_pow = (ex * ex + ey * ey).powf(-0.5 * self.sigma);
                for (tau, wt) in self.singular.mapped(0.0, 1.0) {
                    let t = tau.powf(expo);
                    let (u, v) = (apex.0 + t * ex, apex.1 + t * ey);
                    acc += wl * wt * jac * e_pow * self.density(u, v) * expo;
                }
            }
        }
        let _ = d;
        acc
    }

    /// `K(D) + (w^2 K_xx + h^2 K_ss)/12`, the cell average to second order.
    fn far(&self, x: f64, s: f64) -> f64 {
        let r2 = x * x + s * s;
        let sig = self.sigma;
        let k = r2.powf(-0.5 * sig);
        let kxx = sig * k / r2 * ((sig + 2.0) * x * x / r2 - 1.0);
        let kss = sig * k / r2 * ((sig + 2.0) * s * s / r2 - 1.0);
        k + (self.w * self.w * kxx + self.h * self.h * kss) / 12.0
    }
}

/// `c(2, σ) = π^{σ-1} Γ(1 - σ/2) / Γ(σ/2)`.
pub fn riesz_fourier_constant(sigma: f64) -> f64 {
    use statrs::function::gamma::gamma;
    PI.powf(sigma - 1.0) * gamma(1.0 - 0.5 * sigma) / gamma(0.5 * sigma)
}

/// `c(2, σ) ∫_{|ξ| ≤ R} |μ̂(ξ)|² |ξ|^{σ-2} dξ` on a polar grid.
fn fourier_energy(mu: &GridFourier, sigma: f64, radius: f64, angular: usize, exec: Execution) -> f64 {
    let g = GaussLegendre::new(4);
    let first = radius.min(0.5);
    let mut radial: Vec<(f64, f64)> = Vec::new();
    // On [0, first] substitute r = ρ^{1/σ}: r^{σ-1} dr = dρ/σ.
    for (rho, wr) in g.mapped(0.0, first.powf(sigma)) {
        radial.push((rho.powf(1.0 / sigma), wr / sigma));
    }
    if radius > first {
        let panels = ((radius - first) / 0.5).ceil() as usize;
        for (r, wr) in g.composite(first, radius, panels) {
            radial.push((r, wr * r.powf(sigma - 1.0)));
        }
    }
    let dtheta = 2.0 * PI / angular as f64;
    let total = par::sum_range(exec, radial.len() * angular, |i| {
        let (r, wr) = radial[i / angular];
        let th = (i % angular) as f64 * dtheta;
        wr * dtheta * mu.fourier((r * th.cos(), r * th.sin())).norm_sqr()
    });
    riesz_fourier_constant(sigma) * total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct_autocorrelation(mu: &GridMeasure, dx: i64, ds: i64) -> f64 {
        let (nx, ns) = grid_dims(mu.depth());
        let w = mu.weights();
        let mut acc = 0.0;
        for a in 0..nx as i64 {
            for b in 0..ns as i64 {
                let (a2, b2) = (a + dx, b + ds);
                if a2 >= 0 && a2 < nx as i64 && b2 >= 0 && b2 < ns as i64 {
                    acc += w[(a * ns as i64 + b) as usize] * w[(a2 * ns as i64 + b2) as usize];
                }
            }
        }
        acc
    }

    #[test]
    fn fft_autocorrelation_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..512).map(|_| rng.gen::<f64>()).collect();
        let mu = GridMeasure::new(3, w).unwrap();
        let auto = autocorrelation(&mu, Execution::Parallel);
        for (dx, ds) in [(0i64, 0i64), (1, 0), (-3, 5), (7, -63), (2, 17)] {
            let ix = dx.rem_euclid(16) as usize;
            let is = ds.rem_euclid(128) as usize;
            assert!((auto[ix * 128 + is] - direct_autocorrelation(&mu, dx, ds)).abs() < 1e-10);
        }
    }

    #[test]
    fn two_cells_closed_form() {
        let mut w = vec![0.0; 512];
        w[0] = 0.5;
        w[511] = 0.5;
        let mu = GridMeasure::new(3, w).unwrap();
        let opts = EnergyOptions { kernel: PairKernel::CenterToCenter, ..Default::default() };
        let sigma = 1.2;
        let r = riesz_energy(&mu, sigma, &opts).unwrap();
        let d = ((7.0f64 / 8.0).powi(2) + (63.0f64 / 64.0).powi(2)).sqrt();
        let want = 2.0 * 0.25 * d.powf(-sigma);
        assert!((r.cross - want).abs() < 1e-12 * want);
    }

    #[test]
    fn point_mass_energy_grows_with_depth() {
        let mut prev = 0.0;
        for m in 1..=6 {
            let mut mu = GridMeasure::zero(m).unwrap();
            mu.weights_mut()[0] = 1.0;
            let r = riesz_energy(&mu, 10.0 / 6.0, &EnergyOptions::default()).unwrap();
            assert_eq!(r.cross, 0.0);
            assert!(r.direct > prev);
            prev = r.direct;
        }
    }

    /// `∬_{[0,1]^4} |x - y|^{-σ}` by Monte Carlo: the difference vector has
    /// density `(1 - |u|)(1 - |v|)`; its radius is sampled with density
    /// `∝ r^{1-σ}` on `[0, √2]`.
    fn monte_carlo_unit_square(sigma: f64, samples: usize, seed: u64) -> f64 {
        let rmax = 2f64.sqrt();
        let norm = rmax.powf(2.0 - sigma) / (2.0 - sigma);
        let chunks = 64;
        let per = samples / chunks;
        let parts = par::map_range(Execution::Parallel, chunks, |c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed + c as u64);
            let mut acc = 0.0;
            for _ in 0..per {
                let r = rmax * rng.gen::<f64>().powf(1.0 / (2.0 - sigma));
                let th = 2.0 * PI * rng.gen::<f64>();
                let (u, v) = (r * th.cos(), r * th.sin());
                if u.abs() < 1.0 && v.abs() < 1.0 {
                    acc += (1.0 - u.abs()) * (1.0 - v.abs());
                }
            }
            acc
        });
        2.0 * PI * norm * parts.iter().sum::<f64>() / (per * chunks) as f64
    }

    #[test]
    fn uniform_energy_matches_monte_carlo() {
        let sigma = 10.0 / 6.0;
        let mc = monte_carlo_unit_square(sigma, 10_000_000, 77);
        let r = riesz_energy(&GridMeasure::uniform(6).unwrap(), sigma, &EnergyOptions::default()).unwrap();
        assert!((r.direct - mc).abs() <= 0.02 * mc, "direct {} mc {mc}", r.direct);
        // The same density on an uncompressed grid, summed over every offset.
        let mut w = GridMeasure::uniform(3).unwrap();
        w.weights_mut()[0] *= 1.0 + 1e-15;
        let fine = riesz_energy(&w, sigma, &EnergyOptions::default()).unwrap();
        assert_eq!(fine.depth, 3);
        assert!((fine.direct - r.direct).abs() <= 2e-3 * r.direct, "{} vs {}", fine.direct, r.direct);
    }

    #[test]
    fn self_energy_scales() {
        // Same-cell energy of a w × h cell is w^{-σ} times that of 1 × h/w.
        let sigma = 1.3;
        let a = PairIntegrator::new(1.0, 0.25, sigma).average(0, 0);
        let b = PairIntegrator::new(0.5, 0.125, sigma).average(0, 0);
        assert!((b - a * 2f64.powf(sigma)).abs() < 1e-9 * b);
    }

    #[test]
    fn fourier_side_is_reported() {
        let mu = GridMeasure::uniform(2).unwrap();
        let opts = EnergyOptions { fourier_radius: Some(16.0), angular: 128, ..Default::default() };
        let r = riesz_energy(&mu, 1.0, &opts).unwrap();
        let f = r.fourier_side.unwrap();
        assert!(f.value > 0.0 && f.value < r.direct * 1.05);
        assert!(f.value > 0.7 * r.direct);
        assert!(matches!(riesz_energy(&mu, 2.0, &opts), Err(GeomError::BadExponent(_))));
    }
}
