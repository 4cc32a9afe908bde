//! Counting configurations `{(x, y), (x + z, y + z^2)}` inside subsets of
//! `F_q^2`.
//!
//! The brute-force count over `(x, y, z) ∈ F_q^3` is exact integer arithmetic
//! and is the ground truth. The Fourier side
//!
//! ```text
//! Σ f(x,y) g(x+z, y+z²) = q^-1 (Σf)(Σg) + q^4 Σ_{(a,b)≠0} 1̂_Π(a,b) f̂(a,b) ĝ(-a,-b)
//! ```
//!
//! is evaluated independently as a cross-check and to bound the defect by
//! `q^{5/2}‖f‖₂‖g‖₂`.

use std::sync::Arc;

use fixedbitset::FixedBitSet;
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::bits::{self, BitsError};
use crate::ffield::{FieldCtx, FieldElement};
use crate::par::{self, Execution};
use crate::spectral::{self, SpectralError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgressionError {
    #[error(transparent)]
    Shape(#[from] SpectralError),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("point sets live over different fields")]
    FieldMismatch,
}

/// A subset of `F_q^2` as a dense bit array in row-major enumeration order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PointSet2 {
    ctx: Arc<FieldCtx>,
    bits: FixedBitSet,
}

impl PointSet2 {
    pub fn empty(ctx: Arc<FieldCtx>) -> Self {
        let q = ctx.size();
        PointSet2 { ctx, bits: FixedBitSet::with_capacity(q * q) }
    }

    pub fn full(ctx: Arc<FieldCtx>) -> Self {
        let mut s = Self::empty(ctx);
        s.bits.insert_range(..);
        s
    }

    pub fn from_bits(ctx: Arc<FieldCtx>, bits: FixedBitSet) -> Result<Self, BitsError> {
        let q = ctx.size();
        if bits.len() != q * q {
            return Err(BitsError::Length { expected: q * q, got: bits.len() });
        }
        Ok(PointSet2 { ctx, bits })
    }

    pub fn from_points<I>(ctx: Arc<FieldCtx>, points: I) -> Self
    where
        I: IntoIterator<Item = (FieldElement, FieldElement)>,
    {
        let mut s = Self::empty(ctx);
        for (x, y) in points {
            s.insert(x, y);
        }
        s
    }

    /// Parses the plain `0`/`1` text format (`q^2` bits, row-major).
    pub fn parse(ctx: Arc<FieldCtx>, text: &str) -> Result<Self, BitsError> {
        let q = ctx.size();
        let bits = bits::parse_plain(text, q * q)?;
        Ok(PointSet2 { ctx, bits })
    }

    /// One row of `q` bits per `x`.
    pub fn to_text(&self) -> String {
        bits::write_plain(&self.bits, self.ctx.size())
    }

    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    #[inline]
    pub fn contains(&self, x: FieldElement, y: FieldElement) -> bool {
        self.bits.contains(x.index() * self.ctx.size() + y.index())
    }

    pub fn insert(&mut self, x: FieldElement, y: FieldElement) {
        let q = self.ctx.size();
        self.bits.insert(x.index() * q + y.index());
    }

    pub fn len(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    /// Density `|A| / q^2`.
    pub fn alpha(&self) -> f64 {
        let q = self.ctx.size() as f64;
        self.len() as f64 / (q * q)
    }

    pub fn points(&self) -> impl Iterator<Item = (FieldElement, FieldElement)> + '_ {
        let q = self.ctx.size();
        self.bits.ones().map(move |i| (self.ctx.element(i / q), self.ctx.element(i % q)))
    }

    /// `A + v`.
    pub fn translate(&self, v: (FieldElement, FieldElement)) -> Self {
        let ctx = &self.ctx;
        Self::from_points(self.ctx.clone(), self.points().map(|(x, y)| (ctx.add(x, v.0), ctx.add(y, v.1))))
    }

    pub fn indicator(&self) -> Vec<Complex64> {
        let q = self.ctx.size();
        (0..q * q).map(|i| Complex64::new(if self.bits.contains(i) { 1.0 } else { 0.0 }, 0.0)).collect()
    }
}

/// A configuration `(x, y), (x + z, y + z^2)` given by enumeration indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Witness {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountReport {
    pub q: usize,
    pub size: usize,
    /// All `(x, y, z)` with both points in `A`.
    pub total: u64,
    /// The `z = 0` contribution, always `|A|`.
    pub trivial: u64,
    pub nontrivial: u64,
    /// `(α - q^{-1/2})·α·q^3`.
    pub bound: f64,
    /// Lexicographically first `(x, y, z)` with `z ≠ 0`.
    pub witness: Option<Witness>,
}

/// Lower bound `(α - q^{-1/2})·α·q^3` on the number of configurations.
pub fn count_lower_bound(size: usize, q: usize) -> f64 {
    let qf = q as f64;
    let alpha = size as f64 / (qf * qf);
    (alpha - qf.powf(-0.5)) * alpha * qf.powi(3)
}

/// `(shift_x, shift_y)` for each `z`: `x ↦ x + z` and `y ↦ y + z^2` as index
/// tables.
fn shift_tables(ctx: &FieldCtx, z: FieldElement) -> (Vec<u32>, Vec<u32>) {
    let z2 = ctx.square(z);
    let sx = ctx.enumerate().map(|x| ctx.add(x, z).index() as u32).collect();
    let sy = ctx.enumerate().map(|y| ctx.add(y, z2).index() as u32).collect();
    (sx, sy)
}

pub fn count_pairs(a: &PointSet2) -> Result<CountReport, ProgressionError> {
    count_pairs_with(a, Execution::default())
}

/// Exact brute-force count, parallel over `z`-slices.
pub fn count_pairs_with(a: &PointSet2, exec: Execution) -> Result<CountReport, ProgressionError> {
    let ctx = a.ctx();
    let q = ctx.size();
    let points: Vec<usize> = a.bits.ones().collect();
    let slices = par::map_range(exec, q, |zi| {
        let (sx, sy) = shift_tables(ctx, ctx.element(zi));
        let mut count = 0u64;
        let mut first = None;
        for &i in &points {
            let j = sx[i / q] as usize * q + sy[i % q] as usize;
            if a.bits.contains(j) {
                count += 1;
                if first.is_none() {
                    first = Some(Witness { x: i / q, y: i % q, z: zi });
                }
            }
        }
        (count, first)
    });
    let total: u64 = slices.iter().map(|s| s.0).sum();
    let trivial = slices[0].0;
    let witness = slices[1..].iter().filter_map(|s| s.1).min();
    let report = CountReport {
        q,
        size: points.len(),
        total,
        trivial,
        nontrivial: total - trivial,
        bound: count_lower_bound(points.len(), q),
        witness,
    };
    if report.trivial != report.size as u64 {
        return Err(ProgressionError::InvariantViolation(format!(
            "z = 0 slice counted {} points of {}",
            report.trivial, report.size
        )));
    }
    let slack = 1e-9 * report.bound.abs().max(1.0);
    if (report.total as f64) < report.bound - slack {
        return Err(ProgressionError::InvariantViolation(format!(
            "count {} is below the lower bound {}",
            report.total, report.bound
        )));
    }
    Ok(report)
}

/// Fourier-side value of the total count `Σ 1_A(x,y) 1_A(x+z, y+z²)`.
pub fn count_pairs_spectral(a: &PointSet2, exec: Execution) -> Result<f64, ProgressionError> {
    let ctx = a.ctx();
    let ind = a.indicator();
    let total = spectral_triple_sum(ctx, &ind, &ind, exec)?;
    Ok(total.re)
}

/// `Σ_{x,y,z} f(x,y)·g(x+z, y+z²)` by direct summation.
pub fn direct_triple_sum(
    ctx: &FieldCtx,
    f: &[Complex64],
    g: &[Complex64],
    exec: Execution,
) -> Result<Complex64, ProgressionError> {
    let q = ctx.size();
    for h in [f, g] {
        if h.len() != q * q {
            return Err(SpectralError::ShapeMismatch { expected: q * q, got: h.len() }.into());
        }
    }
    let slices = par::map_range(exec, q, |zi| {
        let (sx, sy) = shift_tables(ctx, ctx.element(zi));
        let mut acc = Complex64::new(0.0, 0.0);
        for x in 0..q {
            let row = sx[x] as usize * q;
            for y in 0..q {
                acc += f[x * q + y] * g[row + sy[y] as usize];
            }
        }
        acc
    });
    Ok(slices.into_iter().sum())
}

/// The same triple sum through the parabola spectrum: main term plus
/// `q^4 Σ_{(a,b)≠0} 1̂_Π(a,b) f̂(a,b) ĝ(-a,-b)`.
pub fn spectral_triple_sum(
    ctx: &FieldCtx,
    f: &[Complex64],
    g: &[Complex64],
    exec: Execution,
) -> Result<Complex64, ProgressionError> {
    let (main, defect) = spectral_split(ctx, f, g, exec)?;
    Ok(main + defect)
}

fn spectral_split(
    ctx: &FieldCtx,
    f: &[Complex64],
    g: &[Complex64],
    exec: Execution,
) -> Result<(Complex64, Complex64), ProgressionError> {
    let q = ctx.size();
    let fh = spectral::fourier_transform_with(ctx, f, exec)?;
    let gh = spectral::fourier_transform_with(ctx, g, exec)?;
    let pi = spectral::parabola_spectrum_with(ctx, exec);
    let neg: Vec<usize> = ctx.enumerate().map(|a| ctx.neg(a).index()).collect();
    let q4 = (q as f64).powi(4);
    let rows = par::map_range(exec, q, |a| {
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..q {
            if a == 0 && b == 0 {
                continue;
            }
            let conj_idx = neg[a] * q + neg[b];
            acc += pi.values()[a * q + b] * fh.values()[a * q + b] * gh.values()[conj_idx];
        }
        acc
    });
    let defect: Complex64 = rows.into_iter().sum::<Complex64>() * q4;
    let sf: Complex64 = f.iter().sum();
    let sg: Complex64 = g.iter().sum();
    Ok((sf * sg / q as f64, defect))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CountingDefect {
    /// `|Σ f g∘shift - q^-1 Σf Σg|` from the direct triple sum.
    pub lhs_diff: f64,
    /// The same defect evaluated on the Fourier side.
    pub spectral_diff: f64,
    /// `q^{5/2}‖f‖₂‖g‖₂`.
    pub rhs_bound: f64,
    /// `|direct - spectral| / max(|direct|, |spectral|, 1e-6·rhs_bound)`.
    pub route_discrepancy: f64,
}

/// Relative agreement required between the direct and spectral defect.
pub const ROUTE_TOLERANCE: f64 = 1e-7;

pub fn counting_error(ctx: &FieldCtx, f: &[Complex64], g: &[Complex64]) -> Result<CountingDefect, ProgressionError> {
    counting_error_with(ctx, f, g, Execution::default())
}

pub fn counting_error_with(
    ctx: &FieldCtx,
    f: &[Complex64],
    g: &[Complex64],
    exec: Execution,
) -> Result<CountingDefect, ProgressionError> {
    let q = ctx.size() as f64;
    let direct = direct_triple_sum(ctx, f, g, exec)?;
    let (main, spectral_defect) = spectral_split(ctx, f, g, exec)?;
    let direct_defect = direct - main;
    let rhs_bound = q.powf(2.5) * spectral::l2_norm(f) * spectral::l2_norm(g);
    let denom = direct_defect.norm().max(spectral_defect.norm()).max(1e-6 * rhs_bound);
    let route_discrepancy = if denom == 0.0 { 0.0 } else { (direct_defect - spectral_defect).norm() / denom };
    let report = CountingDefect {
        lhs_diff: direct_defect.norm(),
        spectral_diff: spectral_defect.norm(),
        rhs_bound,
        route_discrepancy,
    };
    if report.route_discrepancy > ROUTE_TOLERANCE {
        return Err(ProgressionError::InvariantViolation(format!(
            "direct defect {direct_defect} and spectral defect {spectral_defect} disagree"
        )));
    }
    if report.lhs_diff > report.rhs_bound * (1.0 + 1e-9) + 1e-12 {
        return Err(ProgressionError::InvariantViolation(format!(
            "defect {} exceeds q^(5/2)·‖f‖‖g‖ = {}",
            report.lhs_diff, report.rhs_bound
        )));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdVerdict {
    pub q: usize,
    pub size: usize,
    /// `2q^{3/2}`.
    pub threshold: f64,
    pub above_threshold: bool,
    pub witness: Option<Witness>,
    pub verdict: String,
}

/// Checks the `|A| ≥ 2q^{3/2}` guarantee: above it a witness must exist.
pub fn check_threshold(a: &PointSet2) -> Result<ThresholdVerdict, ProgressionError> {
    let q = a.ctx().size();
    let report = count_pairs(a)?;
    let size = report.size;
    // |A| ≥ 2 q^{3/2}  ⇔  |A|^2 ≥ 4 q^3, exactly in integers.
    let above = (size as u128).pow(2) >= 4 * (q as u128).pow(3);
    if above && report.witness.is_none() {
        return Err(ProgressionError::InvariantViolation(format!(
            "|A| = {size} ≥ 2q^(3/2) but no configuration was found"
        )));
    }
    let verdict = match (above, report.witness.is_some()) {
        (true, _) => "above threshold, witness found",
        (false, true) => "below threshold, witness found",
        (false, false) => "below threshold, none found",
    };
    Ok(ThresholdVerdict {
        q,
        size,
        threshold: 2.0 * (q as f64).powf(1.5),
        above_threshold: above,
        witness: report.witness,
        verdict: verdict.to_string(),
    })
}
