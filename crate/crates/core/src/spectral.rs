//! Additive characters of `F_q` and `F_q^2` and the normalized Fourier
//! transform on `F_q^2`.
//!
//! The character indexed by `a` is `ξ_a(x) = exp(2πi·Tr(a·x)/p)`; characters
//! of `F_q^2` are products `ξ_a(x)·ξ_b(y)`. Functions on `F_q^2` are dense
//! slices of length `q^2` in row-major enumeration order, `f[x·q + y]`.
//!
//! Normalizations:
//!
//! ```text
//! f̂(a, b) = q^-2 Σ_{x,y} f(x, y) ξ_a(x) ξ_b(y)
//! ‖f‖₂    = (q^-2 Σ |f|²)^½          ‖f̂‖₂ = (Σ |f̂|²)^½
//! ```
//!
//! so Parseval reads `‖f‖₂ = ‖f̂‖₂`.

use std::f64::consts::TAU;
use std::io::{self, Write};

use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};
use thiserror::Error;

use crate::ffield::{FieldCtx, FieldElement};
use crate::par::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpectralError {
    #[error("expected an array of length q^2 = {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
}

/// Index of the additive character `ξ_a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CharId(pub FieldElement);

impl CharId {
    pub fn is_trivial(self) -> bool {
        self.0.is_zero()
    }
}

/// The character `(x, y) ↦ ξ_a(x)·ξ_b(y)` of `F_q^2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CharPair {
    pub a: FieldElement,
    pub b: FieldElement,
}

impl CharPair {
    pub fn index(self, q: usize) -> usize {
        self.a.index() * q + self.b.index()
    }
}

/// Powers of `ω = exp(2πi/p)`.
fn roots_of_unity(p: u32) -> Vec<Complex64> {
    (0..p).map(|k| Complex64::from_polar(1.0, TAU * k as f64 / p as f64)).collect()
}

/// `Σ_k counts[k]·ω^k`, the exact way to evaluate a character sum once the
/// trace values have been tallied.
fn sum_from_histogram(counts: &[u64], roots: &[Complex64]) -> Complex64 {
    counts.iter().zip(roots).map(|(&c, &w)| w * c as f64).sum()
}

pub fn char_eval(ctx: &FieldCtx, a: CharId, x: FieldElement) -> Complex64 {
    let k = ctx.trace(ctx.mul(a.0, x));
    Complex64::from_polar(1.0, TAU * k as f64 / ctx.p() as f64)
}

/// `Σ_{x ∈ F_q} ξ_a(x)`.
pub fn char_sum(ctx: &FieldCtx, a: CharId) -> Complex64 {
    let mut counts = vec![0u64; ctx.p() as usize];
    for x in ctx.enumerate() {
        counts[ctx.trace(ctx.mul(a.0, x)) as usize] += 1;
    }
    sum_from_histogram(&counts, &roots_of_unity(ctx.p()))
}

/// Fourier coefficients over `F_q^2`, indexed by [`CharPair::index`].
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    q: usize,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn q(&self) -> usize {
        self.q
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn get(&self, a: FieldElement, b: FieldElement) -> Complex64 {
        self.values[a.index() * self.q + b.index()]
    }

    /// `(Σ |f̂|²)^½`.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// CSV with columns `a_index,b_index,re,im,modulus`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "a_index,b_index,re,im,modulus")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{},{},{},{}", i / self.q, i % self.q, fmt12(v.re), fmt12(v.im), fmt12(v.norm()))?;
        }
        Ok(())
    }
}

/// Fixed 12-significant-digit rendering used by every text output.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    let r: f64 = format!("{x:.11e}").parse().unwrap();
    let s = if (1e-5..1e15).contains(&r.abs()) { format!("{r}") } else { format!("{r:e}") };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// `(q^-2 Σ |f|²)^½`.
pub fn l2_norm(f: &[Complex64]) -> f64 {
    if f.is_empty() {
        return 0.0;
    }
    (f.iter().map(|v| v.norm_sqr()).sum::<f64>() / f.len() as f64).sqrt()
}

fn check_shape(ctx: &FieldCtx, len: usize) -> Result<usize, SpectralError> {
    let q = ctx.size();
    if len != q * q {
        return Err(SpectralError::ShapeMismatch { expected: q * q, got: len });
    }
    Ok(q)
}

/// `trace_table[a·q + x] = Tr(a·x)`.
fn trace_table(ctx: &FieldCtx) -> Vec<u16> {
    let q = ctx.size();
    let mut t = vec![0u16; q * q];
    for a in ctx.enumerate() {
        for x in ctx.enumerate() {
            t[a.index() * q + x.index()] = ctx.trace(ctx.mul(a, x)) as u16;
        }
    }
    t
}

/// Direct `O(q^4)` evaluation of the defining sum. Reference path.
pub fn fourier_transform_naive(ctx: &FieldCtx, f: &[Complex64], exec: Execution) -> Result<Spectrum, SpectralError> {
    let q = check_shape(ctx, f.len())?;
    let p = ctx.p() as usize;
    let roots = roots_of_unity(ctx.p());
    let tt = trace_table(ctx);
    let scale = 1.0 / (q * q) as f64;
    let values = par::map_range(exec, q * q, |ab| {
        let (a, b) = (ab / q, ab % q);
        let mut acc = Complex64::new(0.0, 0.0);
        for x in 0..q {
            let tx = tt[a * q + x] as usize;
            for y in 0..q {
                let k = (tx + tt[b * q + y] as usize) % p;
                acc += f[x * q + y] * roots[k];
            }
        }
        acc * scale
    });
    Ok(Spectrum { q, values })
}

/// Transform along every base-`p` digit axis of the flat array.
///
/// `F_q^2` with the coefficient basis is `(Z_p)^{2n}`; the flat index
/// `x·q + y` has `2n` base-`p` digits and each digit is one axis of a
/// size-`p` DFT.
fn digit_axis_dft(data: &mut [Complex64], p: usize, axes: usize, dir: FftDirection, exec: Execution) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft(p, dir);
    let mut stride = 1usize;
    for _ in 0..axes {
        let block = stride * p;
        let fft = &fft;
        par::for_each_chunk_mut(exec, data, block, |_, chunk| {
            let mut line = vec![Complex64::new(0.0, 0.0); p];
            let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
            for o in 0..stride {
                for (j, v) in line.iter_mut().enumerate() {
                    *v = chunk[o + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    chunk[o + j * stride] = *v;
                }
            }
        });
        stride = block;
    }
}

/// Dual coordinates of each character index: `perm[a]` packs the digits
/// `Tr(a·t^j)`, so that `Tr(a·x) = Σ_j perm_digits(a)_j · x_j (mod p)`.
fn dual_permutation(ctx: &FieldCtx) -> Vec<usize> {
    let p = ctx.p() as usize;
    let n = ctx.n() as usize;
    let basis: Vec<FieldElement> = (0..n).map(|j| ctx.element(p.pow(j as u32))).collect();
    ctx.enumerate()
        .map(|a| basis.iter().rev().fold(0usize, |acc, &t| acc * p + ctx.trace(ctx.mul(a, t)) as usize))
        .collect()
}

/// Fast transform: a `2n`-dimensional size-`p` DFT followed by the dual
/// relabelling `a ↦ perm[a]`.
pub fn fourier_transform_with(ctx: &FieldCtx, f: &[Complex64], exec: Execution) -> Result<Spectrum, SpectralError> {
    let q = check_shape(ctx, f.len())?;
    let mut data = f.to_vec();
    // rustfft's inverse direction is the unnormalized exp(+2πi jk/p) sum.
    digit_axis_dft(&mut data, ctx.p() as usize, 2 * ctx.n() as usize, FftDirection::Inverse, exec);
    let perm = dual_permutation(ctx);
    let scale = 1.0 / (q * q) as f64;
    let values = par::map_range(exec, q * q, |ab| {
        let (a, b) = (ab / q, ab % q);
        data[perm[a] * q + perm[b]] * scale
    });
    Ok(Spectrum { q, values })
}

pub fn fourier_transform(ctx: &FieldCtx, f: &[Complex64]) -> Result<Spectrum, SpectralError> {
    fourier_transform_with(ctx, f, Execution::default())
}

/// `f(x, y) = Σ_{a,b} f̂(a, b)·conj(ξ_a(x) ξ_b(y))`.
pub fn inverse_transform(ctx: &FieldCtx, s: &Spectrum) -> Result<Vec<Complex64>, SpectralError> {
    let q = check_shape(ctx, s.values.len())?;
    let perm = dual_permutation(ctx);
    let mut data = vec![Complex64::new(0.0, 0.0); q * q];
    for a in 0..q {
        for b in 0..q {
            data[perm[a] * q + perm[b]] = s.values[a * q + b];
        }
    }
    digit_axis_dft(&mut data, ctx.p() as usize, 2 * ctx.n() as usize, FftDirection::Forward, Execution::default());
    Ok(data)
}

/// `S(a, b) = Σ_z ξ_a(z)·ξ_b(z^2)`, the unnormalized transform of the
/// parabola indicator.
pub fn parabola_raw_sum(ctx: &FieldCtx, a: CharId, b: CharId) -> Complex64 {
    let mut counts = vec![0u64; ctx.p() as usize];
    for z in ctx.enumerate() {
        let arg = ctx.add(ctx.mul(a.0, z), ctx.mul(b.0, ctx.square(z)));
        counts[ctx.trace(arg) as usize] += 1;
    }
    sum_from_histogram(&counts, &roots_of_unity(ctx.p()))
}

/// Which of the three possible moduli `|S(a, b)|` takes in odd
/// characteristic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussClass {
    /// `a = b = 0`: `S = q`.
    Trivial,
    /// `b = 0, a ≠ 0`: `S = 0` by orthogonality.
    Vanishing,
    /// `b ≠ 0`: `|S| = q^½`.
    SquareRoot,
}

impl GaussClass {
    pub fn of(a: FieldElement, b: FieldElement) -> GaussClass {
        match (a.is_zero(), b.is_zero()) {
            (true, true) => GaussClass::Trivial,
            (false, true) => GaussClass::Vanishing,
            _ => GaussClass::SquareRoot,
        }
    }

    pub fn expected_modulus(self, q: f64) -> f64 {
        match self {
            GaussClass::Trivial => q,
            GaussClass::Vanishing => 0.0,
            GaussClass::SquareRoot => q.sqrt(),
        }
    }
}

/// `S(a, b)` for every pair, indexed like a [`Spectrum`].
pub fn parabola_raw_sums(ctx: &FieldCtx, exec: Execution) -> Vec<Complex64> {
    let q = ctx.size();
    let p = ctx.p() as usize;
    let roots = roots_of_unity(ctx.p());
    let squares: Vec<FieldElement> = ctx.enumerate().map(|z| ctx.square(z)).collect();
    par::map_range(exec, q * q, |ab| {
        let (a, b) = (ctx.element(ab / q), ctx.element(ab % q));
        let mut counts = vec![0u64; p];
        for (zi, z) in ctx.enumerate().enumerate() {
            let arg = ctx.add(ctx.mul(a, z), ctx.mul(b, squares[zi]));
            counts[ctx.trace(arg) as usize] += 1;
        }
        sum_from_histogram(&counts, &roots)
    })
}

/// `1̂_Π` for the parabola `Π = {(z, z^2)}`.
pub fn parabola_spectrum_with(ctx: &FieldCtx, exec: Execution) -> Spectrum {
    let q = ctx.size();
    let scale = 1.0 / (q * q) as f64;
    let values = parabola_raw_sums(ctx, exec).into_iter().map(|s| s * scale).collect();
    Spectrum { q, values }
}

pub fn parabola_spectrum(ctx: &FieldCtx) -> Spectrum {
    parabola_spectrum_with(ctx, Execution::default())
}

/// Indicator of the parabola as a function on `F_q^2`.
pub fn parabola_indicator(ctx: &FieldCtx) -> Vec<Complex64> {
    let q = ctx.size();
    let mut f = vec![Complex64::new(0.0, 0.0); q * q];
    for z in ctx.enumerate() {
        f[z.index() * q + ctx.square(z).index()] = Complex64::new(1.0, 0.0);
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ffield::make_field;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    fn random_fn(q: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..q * q).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    }

    #[test]
    fn character_values() {
        let f5 = make_field(5, 1, None).unwrap();
        for x in f5.enumerate() {
            assert!(close(char_eval(&f5, CharId(f5.zero()), x), Complex64::new(1.0, 0.0), 1e-15));
        }
        let w = Complex64::from_polar(1.0, TAU / 5.0);
        assert!(close(char_eval(&f5, CharId(f5.one()), f5.one()), w, 1e-15));

        let f9 = make_field(3, 2, None).unwrap();
        let t = f9.from_coeffs(&[0, 1]).unwrap();
        let expect = Complex64::from_polar(1.0, TAU / 3.0);
        assert!(close(char_eval(&f9, CharId(t), t), expect, 1e-15));
    }

    #[test]
    fn characters_are_homomorphisms() {
        let f = make_field(5, 2, None).unwrap();
        for a in f.enumerate().step_by(3) {
            for x in f.enumerate() {
                for y in f.enumerate().step_by(4) {
                    let lhs = char_eval(&f, CharId(a), f.add(x, y));
                    let rhs = char_eval(&f, CharId(a), x) * char_eval(&f, CharId(a), y);
                    assert!(close(lhs, rhs, 1e-12));
                }
            }
        }
    }

    #[test]
    fn orthogonality() {
        for (p, n) in [(5, 1), (3, 2), (7, 1), (3, 3), (5, 2)] {
            let f = make_field(p, n, None).unwrap();
            let q = f.q() as f64;
            for a in f.enumerate() {
                let s = char_sum(&f, CharId(a));
                let expect = if a.is_zero() { q } else { 0.0 };
                assert!((s - Complex64::new(expect, 0.0)).norm() <= 1e-9 * q, "a = {a}");
            }
        }
    }

    #[test]
    fn transform_of_constant_and_delta() {
        let f = make_field(5, 1, None).unwrap();
        let one = vec![Complex64::new(1.0, 0.0); 25];
        let s = fourier_transform(&f, &one).unwrap();
        for (i, v) in s.values().iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!(close(*v, Complex64::new(expect, 0.0), 1e-12));
        }
        let mut delta = vec![Complex64::new(0.0, 0.0); 25];
        delta[0] = Complex64::new(1.0, 0.0);
        let s = fourier_transform(&f, &delta).unwrap();
        for v in s.values() {
            assert!(close(*v, Complex64::new(1.0 / 25.0, 0.0), 1e-15));
        }
    }

    #[test]
    fn fast_matches_naive_and_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (p, n) in [(3, 1), (5, 1), (3, 2), (7, 1), (3, 3), (5, 2)] {
            let ctx = make_field(p, n, None).unwrap();
            let q = ctx.size();
            let f = random_fn(q, &mut rng);
            let fast = fourier_transform_with(&ctx, &f, Execution::Parallel).unwrap();
            let seq = fourier_transform_with(&ctx, &f, Execution::Sequential).unwrap();
            let naive = fourier_transform_naive(&ctx, &f, Execution::Parallel).unwrap();
            assert_eq!(fast, seq);
            for (x, y) in fast.values().iter().zip(naive.values()) {
                assert!(close(*x, *y, 1e-9), "q = {q}");
            }
            let back = inverse_transform(&ctx, &fast).unwrap();
            for (x, y) in back.iter().zip(&f) {
                assert!(close(*x, *y, 1e-9));
            }
            let rel = (l2_norm(&f) - fast.l2_norm()).abs() / l2_norm(&f);
            assert!(rel <= 1e-9);
        }
    }

    #[test]
    fn parseval_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in ["9", "3^2", "5^2", "3^4"] {
            let ctx = FieldCtx::parse(spec).unwrap();
            for _ in 0..100 {
                let f = random_fn(ctx.size(), &mut rng);
                let s = fourier_transform(&ctx, &f).unwrap_or_else(|_| unreachable!());
                let rel = (l2_norm(&f) - s.l2_norm()).abs() / l2_norm(&f);
                assert!(rel <= 1e-9);
            }
        }
    }

    #[test]
    fn shape_mismatch() {
        let ctx = make_field(5, 1, None).unwrap();
        assert_eq!(
            fourier_transform(&ctx, &[Complex64::new(0.0, 0.0); 24]).unwrap_err(),
            SpectralError::ShapeMismatch { expected: 25, got: 24 }
        );
    }

    #[test]
    fn parabola_examples() {
        let f5 = make_field(5, 1, None).unwrap();
        let s = parabola_spectrum(&f5);
        assert!(close(s.get(f5.zero(), f5.zero()), Complex64::new(0.2, 0.0), 1e-15));
        for a in f5.enumerate().skip(1) {
            assert!(s.get(a, f5.zero()).norm() < 1e-15);
        }
        let f7 = make_field(7, 1, None).unwrap();
        let s7 = parabola_spectrum(&f7);
        let m = s7.get(f7.zero(), f7.one()).norm();
        assert!((m - 7f64.powf(-1.5)).abs() <= 1e-9 * 7f64.powf(-1.5));

        assert!(close(parabola_raw_sum(&f5, CharId(f5.zero()), CharId(f5.zero())), Complex64::new(5.0, 0.0), 1e-12));
        assert!(parabola_raw_sum(&f5, CharId(f5.one()), CharId(f5.zero())).norm() < 1e-12);
        let m = parabola_raw_sum(&f5, CharId(f5.zero()), CharId(f5.one())).norm();
        assert!((m - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn parabola_spectrum_matches_transform_of_indicator() {
        let ctx = make_field(3, 2, None).unwrap();
        let direct = fourier_transform_naive(&ctx, &parabola_indicator(&ctx), Execution::Sequential).unwrap();
        let s = parabola_spectrum(&ctx);
        for (x, y) in s.values().iter().zip(direct.values()) {
            assert!(close(*x, *y, 1e-12));
        }
    }

    #[test]
    fn trichotomy_small_fields() {
        for spec in ["3", "5", "7", "9", "25", "27"] {
            let ctx = FieldCtx::parse(spec).unwrap();
            let q = ctx.size();
            let sums = parabola_raw_sums(&ctx, Execution::Parallel);
            for (i, s) in sums.iter().enumerate() {
                let class = GaussClass::of(ctx.element(i / q), ctx.element(i % q));
                let expect = class.expected_modulus(q as f64);
                let err = (s.norm() - expect).abs();
                assert!(err <= 1e-8 * expect.max(1.0), "{spec}: {i} {class:?} {}", s.norm());
            }
        }
    }

    #[test]
    fn csv_dump_has_header_and_rows() {
        let ctx = make_field(3, 1, None).unwrap();
        let mut out = Vec::new();
        parabola_spectrum(&ctx).write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "a_index,b_index,re,im,modulus");
        assert_eq!(lines.len(), 10);
        assert!(lines[1].starts_with("0,0,0.333333333333"));
    }

    #[test]
    fn fmt12_is_stable() {
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(2.0f64.powi(-52)), "2.22044604925e-16");
    }
}
