//! Fourier transforms `μ̂(ξ) = ∫ e^{-2πi x·ξ} dμ(x)` of finite measures.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{grid_dims, GridMeasure, Point};
use crate::par::{self, Execution};

pub trait FourierMeasure: Sync {
    fn fourier(&self, xi: Point) -> Complex64;

    fn fourier_many(&self, xis: &[Point], exec: Execution) -> Vec<Complex64> {
        par::map_range(exec, xis.len(), |i| self.fourier(xis[i]))
    }

    fn total_mass(&self) -> f64;
}

/// `sin(πt)/(πt)`.
pub(crate) fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-8 {
        1.0 - (PI * t).powi(2) / 6.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// A grid measure read as a piecewise-uniform density: each cell
/// contributes `w e^{-2πi ξ·c} sinc(ξ₁ 2^-m) sinc(ξ₂ 4^-m)` for its centre
/// `c`. The measure is first coarsened to the smallest depth with the same
/// density, and the sum is evaluated separably in `x` and `s`.
#[derive(Clone, Debug)]
pub struct GridFourier {
    measure: GridMeasure,
    mass: f64,
}

impl GridFourier {
    pub fn new(mu: &GridMeasure) -> Self {
        GridFourier { measure: mu.coarsest_equivalent(), mass: mu.mass() }
    }

    pub fn effective_depth(&self) -> u32 {
        self.measure.depth()
    }
}

impl GridMeasure {
    pub fn fourier(&self) -> GridFourier {
        GridFourier::new(self)
    }
}

impl FourierMeasure for GridFourier {
    fn fourier(&self, xi: Point) -> Complex64 {
        let m = self.measure.depth();
        let (nx, ns) = grid_dims(m);
        let (wx, ws) = (1.0 / nx as f64, 1.0 / ns as f64);
        let phase_s: Vec<Complex64> =
            (0..ns).map(|b| Complex64::cis(-2.0 * PI * xi.1 * (b as f64 + 0.5) * ws)).collect();
        let w = self.measure.weights();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..nx {
            let row = &w[a * ns..(a + 1) * ns];
            let mut inner = Complex64::new(0.0, 0.0);
            for (v, ph) in row.iter().zip(&phase_s) {
                inner += ph * *v;
            }
            acc += inner * Complex64::cis(-2.0 * PI * xi.0 * (a as f64 + 0.5) * wx);
        }
        acc * sinc(xi.0 * wx) * sinc(xi.1 * ws)
    }

    fn total_mass(&self) -> f64 {
        self.mass
    }
}

/// Finitely many point masses.
#[derive(Clone, Debug, Default)]
pub struct Atoms {
    pub atoms: Vec<(Point, f64)>,
}

impl Atoms {
    pub fn dirac(p: Point) -> Self {
        Atoms { atoms: vec![(p, 1.0)] }
    }
}

impl FourierMeasure for Atoms {
    fn fourier(&self, xi: Point) -> Complex64 {
        self.atoms.iter().map(|&(p, w)| Complex64::cis(-2.0 * PI * (p.0 * xi.0 + p.1 * xi.1)) * w).sum()
    }

    fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}
