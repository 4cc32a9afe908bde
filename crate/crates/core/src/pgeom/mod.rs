//! Parabolic geometry on `[0, 1)^2`.
//!
//! Points are `(x, s)`. The parabolic metric is
//! `d((x, s), (y, t)) = max(|x - y|, |s - t|^{1/2})`; a dyadic rectangle of
//! generation `j` is `[a 2^-j, (a+1) 2^-j) × [b 4^-j, (b+1) 4^-j)` with side
//! `ℓ = 2^-j`, and splits into 2 × 4 children. Sets and measures are stored
//! on the depth-`m` grid of `8^m` such cells, flat index `ix·4^m + is`.

mod balls;
mod content;
mod energy;
mod fourier;

pub use balls::{euclidean_frostman_constant, parabolic_frostman_constant, BallStats, CumulativeMass};
pub use content::{
    content_tree, content_tree_with, dyadic_content, find_dense_rect, frostman, frostman_in, ContentTree,
};
pub(crate) use content::{ell_pow, frostman_local};
pub(crate) use energy::autocorrelation;
pub use energy::{riesz_energy, EnergyOptions, EnergyReport, FourierSide, PairKernel};
pub use fourier::{Atoms, FourierMeasure, GridFourier};

use std::fmt::Write as _;

use fixedbitset::FixedBitSet;
use serde::Serialize;
use thiserror::Error;

use crate::bits::{self, BitsError};

/// Largest supported grid depth (`8^7` cells).
pub const MAX_DEPTH: u32 = 7;
pub const DEFAULT_DEPTH: u32 = 6;

pub type Point = (f64, f64);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("grid depth {0} exceeds the cap {MAX_DEPTH}")]
    DepthTooLarge(u32),
    #[error("exponent {0} outside the admissible range")]
    BadExponent(f64),
    #[error("the measure has zero mass on {0}")]
    ZeroMass(ParabolicRect),
    #[error("the set has zero content")]
    EmptyContent,
    #[error("no rectangle of generation ≤ {max_generation} is dense enough")]
    NoDenseRect { max_generation: u32 },
    #[error("rectangle {rect} is not resolvable at depth {depth}")]
    RectTooFine { rect: ParabolicRect, depth: u32 },
    #[error("weight {index} is {value}; weights must be finite and non-negative")]
    BadWeight { index: usize, value: f64 },
    #[error("expected {expected} weights, found {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Bits(#[from] BitsError),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

/// `max(|x - y|, |s - t|^{1/2})`.
pub fn parabolic_dist(a: Point, b: Point) -> f64 {
    (a.0 - b.0).abs().max((a.1 - b.1).abs().sqrt())
}

/// `[ix 2^-j, (ix+1) 2^-j) × [is 4^-j, (is+1) 4^-j)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ParabolicRect {
    pub j: u32,
    pub ix: u64,
    pub is: u64,
}

impl std::fmt::Display for ParabolicRect {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "D{}[{}, {}]", self.j, self.ix, self.is)
    }
}

impl ParabolicRect {
    pub const UNIT: ParabolicRect = ParabolicRect { j: 0, ix: 0, is: 0 };

    /// Panics unless the rectangle lies in `[0, 1)^2`.
    pub fn new(j: u32, ix: u64, is: u64) -> Self {
        assert!(j <= 30 && ix < 1 << j && is < 1 << (2 * j), "rectangle outside [0,1)^2");
        ParabolicRect { j, ix, is }
    }

    /// Side length `ℓ = 2^-j`, which is also its parabolic diameter.
    pub fn ell(&self) -> f64 {
        (-(self.j as f64)).exp2()
    }

    pub fn height(&self) -> f64 {
        (-2.0 * self.j as f64).exp2()
    }

    pub fn x(&self) -> f64 {
        self.ix as f64 * self.ell()
    }

    pub fn s(&self) -> f64 {
        self.is as f64 * self.height()
    }

    pub fn center(&self) -> Point {
        (self.x() + 0.5 * self.ell(), self.s() + 0.5 * self.height())
    }

    /// Child `c = cx·4 + cs`, `cx ∈ {0,1}`, `cs ∈ {0,1,2,3}`.
    pub fn child(&self, c: usize) -> ParabolicRect {
        debug_assert!(c < 8);
        ParabolicRect { j: self.j + 1, ix: 2 * self.ix + (c / 4) as u64, is: 4 * self.is + (c % 4) as u64 }
    }

    pub fn children(&self) -> [ParabolicRect; 8] {
        std::array::from_fn(|c| self.child(c))
    }

    pub fn parent(&self) -> Option<ParabolicRect> {
        (self.j > 0).then(|| ParabolicRect { j: self.j - 1, ix: self.ix / 2, is: self.is / 4 })
    }

    /// All descendants of generation `self.j + k` in flat order.
    pub fn descendants(self, k: u32) -> impl Iterator<Item = ParabolicRect> {
        let (nx, ns) = (1u64 << k, 1u64 << (2 * k));
        (0..nx * ns).map(move |i| ParabolicRect { j: self.j + k, ix: self.ix * nx + i / ns, is: self.is * ns + i % ns })
    }

    pub fn contains_point(&self, p: Point) -> bool {
        let (x0, s0) = (self.x(), self.s());
        p.0 >= x0 && p.0 < x0 + self.ell() && p.1 >= s0 && p.1 < s0 + self.height()
    }

    pub fn contains_rect(&self, other: &ParabolicRect) -> bool {
        other.j >= self.j && {
            let k = other.j - self.j;
            other.ix >> k == self.ix && other.is >> (2 * k) == self.is
        }
    }

    /// All rectangles of generation `j` in flat order.
    pub fn generation(j: u32) -> impl Iterator<Item = ParabolicRect> {
        ParabolicRect::UNIT.descendants(j)
    }

    /// Flat index within its generation.
    pub fn flat(&self) -> usize {
        (self.ix as usize) << (2 * self.j) | self.is as usize
    }
}

/// `T_Q(p) = (2^j (x - x_Q), 4^j (s - s_Q))`, sending `Q` onto `[0, 1)^2`.
pub fn rescale(q: &ParabolicRect, p: Point) -> Point {
    let j = q.j as f64;
    (j.exp2() * (p.0 - q.x()), (2.0 * j).exp2() * (p.1 - q.s()))
}

/// Number of cells along x and s at depth `m`.
pub fn grid_dims(m: u32) -> (usize, usize) {
    (1usize << m, 1usize << (2 * m))
}

fn check_depth(m: u32) -> Result<(), GeomError> {
    if m > MAX_DEPTH {
        Err(GeomError::DepthTooLarge(m))
    } else {
        Ok(())
    }
}

/// A union of depth-`m` cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridSet {
    depth: u32,
    bits: FixedBitSet,
}

impl GridSet {
    pub fn empty(depth: u32) -> Result<Self, GeomError> {
        check_depth(depth)?;
        Ok(GridSet { depth, bits: FixedBitSet::with_capacity(1 << (3 * depth)) })
    }

    pub fn full(depth: u32) -> Result<Self, GeomError> {
        let mut g = Self::empty(depth)?;
        g.bits.insert_range(..);
        Ok(g)
    }

    pub fn from_bits(depth: u32, bits: FixedBitSet) -> Result<Self, GeomError> {
        check_depth(depth)?;
        if bits.len() != 1 << (3 * depth) {
            return Err(BitsError::Length { expected: 1 << (3 * depth), got: bits.len() }.into());
        }
        Ok(GridSet { depth, bits })
    }

    pub fn from_cells(depth: u32, cells: impl IntoIterator<Item = usize>) -> Result<Self, GeomError> {
        let mut g = Self::empty(depth)?;
        for c in cells {
            g.bits.insert(c);
        }
        Ok(g)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn bits(&self) -> &FixedBitSet {
        &self.bits
    }

    pub fn cells(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.bits.count_ones(..)
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_clear()
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.bits.contains(cell)
    }

    pub fn insert(&mut self, cell: usize) {
        self.bits.insert(cell);
    }

    pub fn remove(&mut self, cell: usize) {
        self.bits.set(cell, false);
    }

    pub fn cell_rect(&self, cell: usize) -> ParabolicRect {
        let (_, ns) = grid_dims(self.depth);
        ParabolicRect { j: self.depth, ix: (cell / ns) as u64, is: (cell % ns) as u64 }
    }

    pub fn cell_index(&self, r: &ParabolicRect) -> usize {
        debug_assert_eq!(r.j, self.depth);
        r.flat()
    }

    pub fn union(&self, other: &GridSet) -> GridSet {
        assert_eq!(self.depth, other.depth);
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        GridSet { depth: self.depth, bits }
    }

    pub fn is_subset(&self, other: &GridSet) -> bool {
        self.depth == other.depth && self.bits.is_subset(&other.bits)
    }

    /// Flat indices of the depth-`m` cells inside `q`.
    pub fn cells_in(&self, q: &ParabolicRect) -> impl Iterator<Item = usize> + '_ {
        let k = self.depth - q.j.min(self.depth);
        q.descendants(k).map(|r| r.flat())
    }

    /// `K ∩ Q` at the same depth.
    pub fn restrict(&self, q: &ParabolicRect) -> Result<GridSet, GeomError> {
        self.check_rect(q)?;
        let mut out = GridSet::empty(self.depth)?;
        for c in self.cells_in(q) {
            if self.bits.contains(c) {
                out.bits.insert(c);
            }
        }
        Ok(out)
    }

    /// `T_Q(K ∩ Q)` as a set of depth `m - j`.
    pub fn zoom(&self, q: &ParabolicRect) -> Result<GridSet, GeomError> {
        self.check_rect(q)?;
        let mut out = GridSet::empty(self.depth - q.j)?;
        for (i, c) in self.cells_in(q).enumerate() {
            if self.bits.contains(c) {
                out.bits.insert(i);
            }
        }
        Ok(out)
    }

    fn check_rect(&self, q: &ParabolicRect) -> Result<(), GeomError> {
        if q.j > self.depth {
            Err(GeomError::RectTooFine { rect: *q, depth: self.depth })
        } else {
            Ok(())
        }
    }

    /// `gridset <m>` followed by alternating run lengths (zeros first).
    pub fn to_text(&self) -> String {
        let runs = bits::rle_encode(&self.bits);
        let mut out = format!("gridset {}\n", self.depth);
        for (i, r) in runs.iter().enumerate() {
            if i > 0 {
                out.push(if i % 16 == 0 { '\n' } else { ' ' });
            }
            write!(out, "{r}").unwrap();
        }
        out.push('\n');
        out
    }

    pub fn parse(text: &str) -> Result<GridSet, GeomError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let header = lines.next().ok_or_else(|| GeomError::Format("empty file".into()))?;
        let depth = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["gridset", m] => m.parse::<u32>().map_err(|_| GeomError::Format(header.into()))?,
            _ => return Err(GeomError::Format(format!("bad header {header:?}"))),
        };
        check_depth(depth)?;
        let body: Vec<&str> = lines.collect();
        let runs = bits::parse_runs(&body.join(" "))?;
        let bits = bits::rle_decode(&runs, 1 << (3 * depth))?;
        GridSet::from_bits(depth, bits)
    }
}

/// Text encodings of measure weights.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightFormat {
    /// `num/den` with a power-of-two denominator; exact for every weight.
    Rational,
    /// Shortest round-trip decimal.
    Double,
}

/// Non-negative weights on the depth-`m` cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GridMeasure {
    depth: u32,
    weights: Vec<f64>,
}

impl GridMeasure {
    pub fn new(depth: u32, weights: Vec<f64>) -> Result<Self, GeomError> {
        check_depth(depth)?;
        let expected = 1usize << (3 * depth);
        if weights.len() != expected {
            return Err(GeomError::WeightCount { expected, got: weights.len() });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
            return Err(GeomError::BadWeight { index, value });
        }
        Ok(GridMeasure { depth, weights })
    }

    pub fn zero(depth: u32) -> Result<Self, GeomError> {
        check_depth(depth)?;
        Ok(GridMeasure { depth, weights: vec![0.0; 1 << (3 * depth)] })
    }

    /// Lebesgue measure on `[0, 1)^2`.
    pub fn uniform(depth: u32) -> Result<Self, GeomError> {
        check_depth(depth)?;
        let n = 1usize << (3 * depth);
        Ok(GridMeasure { depth, weights: vec![1.0 / n as f64; n] })
    }

    /// Normalised Lebesgue measure on the cells of `k`.
    pub fn uniform_on(k: &GridSet) -> Result<Self, GeomError> {
        let n = k.count();
        if n == 0 {
            return Err(GeomError::EmptyContent);
        }
        let w = 1.0 / n as f64;
        let weights = (0..k.cells()).map(|c| if k.contains(c) { w } else { 0.0 }).collect();
        GridMeasure::new(k.depth(), weights)
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn mass(&self) -> f64 {
        self.pyramid()[0][0]
    }

    pub fn cell_rect(&self, cell: usize) -> ParabolicRect {
        let (_, ns) = grid_dims(self.depth);
        ParabolicRect { j: self.depth, ix: (cell / ns) as u64, is: (cell % ns) as u64 }
    }

    /// Masses of every dyadic rectangle: `levels[j][flat]` for `j = 0..=m`,
    /// summed bottom-up over the eight children in child order.
    pub fn pyramid(&self) -> Vec<Vec<f64>> {
        let m = self.depth;
        let mut levels: Vec<Vec<f64>> = Vec::with_capacity(m as usize + 1);
        levels.push(self.weights.clone());
        for j in (0..m).rev() {
            let fine = levels.last().unwrap();
            let (nx, ns) = grid_dims(j);
            let fns = ns * 4;
            let mut coarse = vec![0.0; nx * ns];
            for (i, slot) in coarse.iter_mut().enumerate() {
                let (ix, is) = (i / ns, i % ns);
                let mut acc = 0.0;
                for c in 0..8 {
                    let (fx, fs) = (2 * ix + c / 4, 4 * is + c % 4);
                    acc += fine[fx * fns + fs];
                }
                *slot = acc;
            }
            levels.push(coarse);
        }
        levels.reverse();
        levels
    }

    /// `μ(Q)`.
    pub fn mass_of(&self, q: &ParabolicRect) -> f64 {
        let k = self.depth.saturating_sub(q.j);
        if q.j > self.depth {
            // Uniform density inside the containing cell.
            let cell =
                ParabolicRect { j: self.depth, ix: q.ix >> (q.j - self.depth), is: q.is >> (2 * (q.j - self.depth)) };
            return self.weights[cell.flat()] * (-3.0 * (q.j - self.depth) as f64).exp2();
        }
        let ns = 1usize << (2 * self.depth);
        let mut acc = 0.0;
        for r in q.descendants(k) {
            acc += self.weights[(r.ix as usize) * ns + r.is as usize];
        }
        acc
    }

    /// Restriction to `Q`, same depth.
    pub fn restrict(&self, q: &ParabolicRect) -> GridMeasure {
        let mut out = vec![0.0; self.weights.len()];
        let k = self.depth.saturating_sub(q.j);
        for r in q.descendants(k) {
            let c = r.flat();
            out[c] = self.weights[c];
        }
        GridMeasure { depth: self.depth, weights: out }
    }

    /// Pushes the measure to depth `depth ≥ m`, splitting each weight evenly.
    pub fn refine(&self, depth: u32) -> Result<GridMeasure, GeomError> {
        check_depth(depth)?;
        assert!(depth >= self.depth);
        let k = depth - self.depth;
        let split = (-3.0 * k as f64).exp2();
        let mut out = GridMeasure::zero(depth)?;
        for (c, &w) in self.weights.iter().enumerate() {
            for r in self.cell_rect(c).descendants(k) {
                out.weights[r.flat()] = w * split;
            }
        }
        Ok(out)
    }

    /// Smallest depth at which the density is constant on every cell, with
    /// the aggregated weights at that depth.
    pub fn coarsest_equivalent(&self) -> GridMeasure {
        let levels = self.pyramid();
        'depth: for d in 0..self.depth {
            let k = self.depth - d;
            for r in ParabolicRect::generation(d) {
                let mut cells = r.descendants(k).map(|c| self.weights[c.flat()]);
                let first = cells.next().unwrap();
                if cells.any(|w| w != first) {
                    continue 'depth;
                }
            }
            return GridMeasure { depth: d, weights: levels[d as usize].clone() };
        }
        self.clone()
    }

    /// Renormalised blow-up `μ^Q = μ(Q)^{-1} · T_Q(μ|_Q)`, at depth `m - j`.
    pub fn blow_up(&self, q: &ParabolicRect) -> Result<GridMeasure, GeomError> {
        if q.j > self.depth {
            return Err(GeomError::RectTooFine { rect: *q, depth: self.depth });
        }
        let total = self.mass_of(q);
        if total <= 0.0 {
            return Err(GeomError::ZeroMass(*q));
        }
        let k = self.depth - q.j;
        let weights: Vec<f64> = q.descendants(k).map(|r| self.weights[r.flat()] / total).collect();
        GridMeasure::new(k, weights)
    }

    pub fn to_text(&self, format: WeightFormat) -> Result<String, GeomError> {
        let tag = match format {
            WeightFormat::Rational => "rational",
            WeightFormat::Double => "double",
        };
        let mut out = format!("gridmeasure {} {tag}\n", self.depth);
        for &w in &self.weights {
            match format {
                WeightFormat::Double => writeln!(out, "{w}").unwrap(),
                WeightFormat::Rational => {
                    let (num, den) = dyadic_parts(w)
                        .ok_or_else(|| GeomError::Format(format!("weight {w} has no compact dyadic form")))?;
                    writeln!(out, "{num}/{den}").unwrap();
                }
            }
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<GridMeasure, GeomError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| GeomError::Format("empty file".into()))?;
        let (depth, format) = match header.split_whitespace().collect::<Vec<_>>()[..] {
            ["gridmeasure", m, f] => {
                let m = m.parse::<u32>().map_err(|_| GeomError::Format(header.into()))?;
                let f = match f {
                    "rational" => WeightFormat::Rational,
                    "double" => WeightFormat::Double,
                    _ => return Err(GeomError::Format(format!("unknown weight format {f:?}"))),
                };
                (m, f)
            }
            _ => return Err(GeomError::Format(format!("bad header {header:?}"))),
        };
        check_depth(depth)?;
        let weights =
            lines.flat_map(str::split_whitespace).map(|t| parse_weight(t, format)).collect::<Result<Vec<_>, _>>()?;
        GridMeasure::new(depth, weights)
    }
}

/// `w = num / 2^e` with `num, 2^e < 2^127`.
fn dyadic_parts(w: f64) -> Option<(u128, u128)> {
    if w == 0.0 {
        return Some((0, 1));
    }
    if !w.is_finite() || w < 0.0 {
        return None;
    }
    let bits = w.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut mant, mut e) = if exp == 0 { (frac, -1074) } else { (frac | 1 << 52, exp - 1075) };
    while mant % 2 == 0 && e < 0 {
        mant /= 2;
        e += 1;
    }
    if e >= 0 {
        let num = (mant as u128).checked_shl(e as u32)?;
        (e < 74).then_some((num, 1))
    } else {
        (e > -127).then(|| (mant as u128, 1u128 << (-e)))
    }
}

fn parse_weight(t: &str, format: WeightFormat) -> Result<f64, GeomError> {
    let bad = || GeomError::Format(format!("bad weight {t:?}"));
    match format {
        WeightFormat::Double => t.parse::<f64>().map_err(|_| bad()),
        WeightFormat::Rational => match t.split_once('/') {
            Some((n, d)) => {
                let n = n.parse::<u128>().map_err(|_| bad())?;
                let d = d.parse::<u128>().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                Ok(n as f64 / d as f64)
            }
            None => t.parse::<u128>().map(|n| n as f64).map_err(|_| bad()),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn metric_examples_and_axioms() {
        assert_eq!(parabolic_dist((0.0, 0.0), (0.0, 0.0)), 0.0);
        assert_eq!(parabolic_dist((0.0, 0.0), (0.5, 0.0)), 0.5);
        assert_eq!(parabolic_dist((0.0, 0.0), (0.0, 0.25)), 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut pt = || (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        for _ in 0..10_000 {
            let (a, b, c) = (pt(), pt(), pt());
            let ab = parabolic_dist(a, b);
            assert_eq!(ab, parabolic_dist(b, a));
            assert!(ab > 0.0);
            assert!(ab <= parabolic_dist(a, c) + parabolic_dist(c, b) + 1e-15);
        }
    }

    #[test]
    fn rescale_examples_and_similarity() {
        let q = ParabolicRect::new(1, 0, 0);
        assert_eq!(rescale(&q, (0.0, 0.0)), (0.0, 0.0));
        assert_eq!(rescale(&q, (0.25, 0.125)), (0.5, 0.5));
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let j = rng.gen_range(0..8);
            let q = ParabolicRect::new(j, rng.gen_range(0..1 << j), rng.gen_range(0..1 << (2 * j)));
            let a = (rng.gen::<f64>(), rng.gen::<f64>());
            let b = (rng.gen::<f64>(), rng.gen::<f64>());
            let lhs = parabolic_dist(rescale(&q, a), rescale(&q, b));
            let rhs = (j as f64).exp2() * parabolic_dist(a, b);
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
        }
    }

    #[test]
    fn rect_structure() {
        let q = ParabolicRect::new(2, 1, 5);
        let kids = q.children();
        assert!(kids.iter().all(|c| q.contains_rect(c) && c.parent() == Some(q)));
        let area: f64 = kids.iter().map(|c| c.ell() * c.height()).sum();
        assert_eq!(area, q.ell() * q.height());
        assert_eq!(q.descendants(2).count(), 64);
        assert!(!ParabolicRect::new(2, 0, 5).contains_rect(&kids[0]));
    }

    #[test]
    fn blow_up_uniform_and_supported_child() {
        let u = GridMeasure::uniform(4).unwrap();
        let q = ParabolicRect::new(2, 3, 9);
        let b = u.blow_up(&q).unwrap();
        assert_eq!(b, GridMeasure::uniform(2).unwrap());

        let child = q.child(6);
        let mut w = vec![0.0; 1 << 12];
        for r in child.descendants(1) {
            w[r.flat()] = 0.25;
        }
        let mu = GridMeasure::new(4, w).unwrap();
        let b = mu.blow_up(&q).unwrap();
        assert_eq!(b.mass(), 1.0);
        let image = ParabolicRect::UNIT.child(6);
        let inside: f64 = image.descendants(1).map(|r| b.weights()[r.flat()]).sum();
        assert_eq!(inside, 1.0);
        assert!(matches!(GridMeasure::zero(3).unwrap().blow_up(&q), Err(GeomError::ZeroMass(_))));
    }

    #[test]
    fn pyramid_matches_mass_of() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w: Vec<f64> = (0..512).map(|_| rng.gen_range(0..8) as f64 / 64.0).collect();
        let mu = GridMeasure::new(3, w).unwrap();
        let p = mu.pyramid();
        for j in 0..=3 {
            for r in ParabolicRect::generation(j) {
                assert_eq!(p[j as usize][r.flat()], mu.mass_of(&r));
            }
        }
    }

    #[test]
    fn file_roundtrips() {
        let mut k = GridSet::empty(2).unwrap();
        for c in [0, 5, 6, 7, 63] {
            k.insert(c);
        }
        assert_eq!(GridSet::parse(&k.to_text()).unwrap(), k);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w: Vec<f64> = (0..64).map(|_| rng.gen_range(0..1000) as f64 / 1024.0).collect();
        let mu = GridMeasure::new(2, w).unwrap();
        for f in [WeightFormat::Rational, WeightFormat::Double] {
            assert_eq!(GridMeasure::parse(&mu.to_text(f).unwrap()).unwrap(), mu);
        }
        let mu = GridMeasure::new(1, vec![0.1; 8]).unwrap();
        assert_eq!(GridMeasure::parse(&mu.to_text(WeightFormat::Rational).unwrap()).unwrap(), mu);
        assert!(GridSet::parse("gridset 9\n0").is_err());
        assert!(matches!(GridMeasure::new(1, vec![-1.0; 8]), Err(GeomError::BadWeight { index: 0, .. })));
    }

    #[test]
    fn coarsest_equivalent_compresses_piecewise_uniform() {
        let u = GridMeasure::uniform(3).unwrap().coarsest_equivalent();
        assert_eq!(u.depth(), 0);
        let mut mu = GridMeasure::uniform(1).unwrap().refine(3).unwrap();
        mu.weights_mut()[0] *= 2.0;
        assert_eq!(mu.coarsest_equivalent().depth(), 3);
    }
}
