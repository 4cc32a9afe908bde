//! Arithmetic in `F_{p^n}` for odd primes `p`.
//!
//! Elements are residues of polynomials over `Z_p` modulo a monic irreducible
//! polynomial of degree `n`. A [`FieldElement`] is stored as its coefficient
//! vector packed into base-`p` digits (constant term is the least significant
//! digit), so the packed value doubles as the element's position in
//! [`FieldCtx::enumerate`] order and equality is structural.
//!
//! Multiplication goes through discrete-log tables built from a primitive
//! element at construction time; addition goes through a dense table. Both are
//! cheap for the supported sizes (`q <= 4096`).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Default cap on `q = p^n`.
pub const Q_MAX: u32 = 2048;

/// Largest cap accepted by [`FieldCtx::with_cap`]; the dense addition table
/// has `q^2` entries.
pub const Q_HARD_MAX: u32 = 4096;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FieldError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("characteristic 2 is not supported (p must be an odd prime)")]
    EvenCharacteristic,
    #[error("modulus {modulus:?} is reducible over Z_{p}")]
    Reducible { p: u32, modulus: Vec<u32> },
    #[error("field size {p}^{n} exceeds the cap q <= {cap}")]
    TooLarge { p: u32, n: u32, cap: u32 },
    #[error("invalid modulus: {0}")]
    BadModulus(String),
    #[error("invalid field spec {0:?}: expected \"p\", \"p^n\" or \"p^n/c0,c1,...,1\"")]
    BadSpec(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("coefficient vector {0:?} is not a canonical element")]
    BadElement(Vec<u32>),
}

/// An element of `F_q`, packed as base-`p` coefficient digits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FieldElement(u32);

impl FieldElement {
    /// Position in enumeration order: `c0 + c1*p + ... + c_{n-1}*p^{n-1}`.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Immutable arithmetic context for `F_{p^n}`.
#[derive(Clone)]
pub struct FieldCtx {
    p: u32,
    n: u32,
    q: u32,
    modulus: Vec<u32>,
    add: Vec<u16>,
    neg: Vec<u16>,
    /// `exp[k] = g^k` for `k in 0..q-1`, `g` primitive.
    exp: Vec<u16>,
    /// `log[g^k] = k`; `log[0]` is unused.
    log: Vec<u16>,
    trace: Vec<u16>,
}

impl fmt::Debug for FieldCtx {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldCtx")
            .field("p", &self.p)
            .field("n", &self.n)
            .field("q", &self.q)
            .field("modulus", &self.modulus)
            .finish()
    }
}

impl PartialEq for FieldCtx {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.n == other.n && self.modulus == other.modulus
    }
}

impl Eq for FieldCtx {}

pub fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d.saturating_mul(d) <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

/// Builds `F_{p^n}` with the default cap [`Q_MAX`].
///
/// With `modulus = None` the lexicographically smallest monic irreducible
/// polynomial of degree `n` is used, ordering candidates by their packed
/// coefficient value (highest coefficient most significant). For `n = 1`
/// that is the polynomial `x`.
pub fn make_field(p: u32, n: u32, modulus: Option<&[u32]>) -> Result<FieldCtx, FieldError> {
    FieldCtx::with_cap(p, n, modulus, Q_MAX)
}

impl FieldCtx {
    pub fn with_cap(p: u32, n: u32, modulus: Option<&[u32]>, cap: u32) -> Result<FieldCtx, FieldError> {
        if !is_prime(p) {
            return Err(FieldError::NotPrime(p));
        }
        if p == 2 {
            return Err(FieldError::EvenCharacteristic);
        }
        if n == 0 {
            return Err(FieldError::BadModulus("extension degree must be >= 1".into()));
        }
        let cap = cap.min(Q_HARD_MAX);
        let q = (p as u64).checked_pow(n).filter(|&q| q <= cap as u64);
        let Some(q) = q else {
            return Err(FieldError::TooLarge { p, n, cap });
        };
        let q = q as u32;

        let modulus = match modulus {
            Some(m) => {
                if m.len() != n as usize + 1 {
                    return Err(FieldError::BadModulus(format!(
                        "expected {} coefficients (degree {n}), got {}",
                        n + 1,
                        m.len()
                    )));
                }
                if m[n as usize] != 1 {
                    return Err(FieldError::BadModulus("modulus must be monic".into()));
                }
                if m.iter().any(|&c| c >= p) {
                    return Err(FieldError::BadModulus(format!("coefficients must lie in [0, {p})")));
                }
                if !poly::is_irreducible(m, p) {
                    return Err(FieldError::Reducible { p, modulus: m.to_vec() });
                }
                m.to_vec()
            }
            None => poly::smallest_irreducible(n, p),
        };

        Ok(Self::build(p, n, q, modulus))
    }

    /// Parses `"p"`, `"p^n"` or `"p^n/c0,c1,...,1"`.
    pub fn parse(spec: &str) -> Result<FieldCtx, FieldError> {
        let bad = || FieldError::BadSpec(spec.to_string());
        let spec_t = spec.trim();
        let (size, modulus) = match spec_t.split_once('/') {
            Some((s, m)) => (s, Some(m)),
            None => (spec_t, None),
        };
        let (p, n) = match size.split_once('^') {
            Some((p, n)) => (p.trim().parse::<u32>().map_err(|_| bad())?, n.trim().parse::<u32>().map_err(|_| bad())?),
            None => {
                let q = size.trim().parse::<u32>().map_err(|_| bad())?;
                split_prime_power(q).unwrap_or((q, 1))
            }
        };
        let modulus = match modulus {
            Some(m) => {
                Some(m.split(',').map(|c| c.trim().parse::<u32>().map_err(|_| bad())).collect::<Result<Vec<_>, _>>()?)
            }
            None => None,
        };
        make_field(p, n, modulus.as_deref())
    }

    fn build(p: u32, n: u32, q: u32, modulus: Vec<u32>) -> FieldCtx {
        let qs = q as usize;
        let mut add = vec![0u16; qs * qs];
        let mut neg = vec![0u16; qs];
        for a in 0..q {
            let da = digits(a, p, n);
            neg[a as usize] = pack(&da.iter().map(|&c| (p - c) % p).collect::<Vec<_>>(), p) as u16;
            for b in 0..q {
                let db = digits(b, p, n);
                let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                add[a as usize * qs + b as usize] = pack(&s, p) as u16;
            }
        }

        let mul_slow = |a: u32, b: u32| -> u32 {
            let prod = poly::mul(&digits(a, p, n), &digits(b, p, n), p);
            pack(&poly::rem(&prod, &modulus, p, n as usize), p)
        };

        // Smallest primitive element by packed value.
        let order = q - 1;
        let prime_factors = factor(order);
        let pow_slow = |g: u32, mut e: u32| -> u32 {
            let mut base = g;
            let mut acc = 1u32;
            while e > 0 {
                if e & 1 == 1 {
                    acc = mul_slow(acc, base);
                }
                base = mul_slow(base, base);
                e >>= 1;
            }
            acc
        };
        let generator = (1..q)
            .find(|&g| prime_factors.iter().all(|&r| pow_slow(g, order / r) != 1))
            .expect("the multiplicative group of a field is cyclic");

        let mut exp = vec![0u16; order as usize];
        let mut log = vec![0u16; qs];
        let mut cur = 1u32;
        for k in 0..order {
            exp[k as usize] = cur as u16;
            log[cur as usize] = k as u16;
            cur = mul_slow(cur, generator);
        }
        debug_assert_eq!(cur, 1);

        let mut ctx = FieldCtx { p, n, q, modulus, add, neg, exp, log, trace: Vec::new() };
        let trace = (0..q)
            .map(|a| {
                let x = FieldElement(a);
                let mut acc = ctx.zero();
                let mut frob = x;
                for _ in 0..n {
                    acc = ctx.add(acc, frob);
                    frob = ctx.pow(frob, p as u64);
                }
                debug_assert!(acc.0 < p, "trace must land in the prime field");
                acc.0 as u16
            })
            .collect();
        ctx.trace = trace;
        ctx
    }

    #[inline]
    pub fn p(&self) -> u32 {
        self.p
    }

    #[inline]
    pub fn n(&self) -> u32 {
        self.n
    }

    #[inline]
    pub fn q(&self) -> u32 {
        self.q
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.q as usize
    }

    /// Modulus coefficients, constant term first.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    /// Canonical spec string, `p^n/c0,...,1`.
    pub fn spec_string(&self) -> String {
        let m: Vec<String> = self.modulus.iter().map(|c| c.to_string()).collect();
        format!("{}^{}/{}", self.p, self.n, m.join(","))
    }

    #[inline]
    pub fn zero(&self) -> FieldElement {
        FieldElement(0)
    }

    #[inline]
    pub fn one(&self) -> FieldElement {
        FieldElement(1)
    }

    /// Element at position `i` of [`enumerate`](Self::enumerate).
    pub fn element(&self, i: usize) -> FieldElement {
        assert!(i < self.size(), "index {i} out of range for q = {}", self.q);
        FieldElement(i as u32)
    }

    /// The image of an integer in the prime subfield.
    pub fn from_int(&self, c: i64) -> FieldElement {
        FieldElement(c.rem_euclid(self.p as i64) as u32)
    }

    pub fn from_coeffs(&self, coeffs: &[u32]) -> Result<FieldElement, FieldError> {
        if coeffs.len() > self.n as usize || coeffs.iter().any(|&c| c >= self.p) {
            return Err(FieldError::BadElement(coeffs.to_vec()));
        }
        Ok(FieldElement(pack(coeffs, self.p)))
    }

    /// Coefficient vector of length `n`, constant term first.
    pub fn coeffs(&self, a: FieldElement) -> Vec<u32> {
        digits(a.0, self.p, self.n)
    }

    /// All `q` elements in ascending packed order.
    pub fn enumerate(&self) -> impl ExactSizeIterator<Item = FieldElement> + Clone {
        (0..self.q).map(FieldElement)
    }

    #[inline]
    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.add[a.index() * self.size() + b.index()] as u32)
    }

    #[inline]
    pub fn neg(&self, a: FieldElement) -> FieldElement {
        FieldElement(self.neg[a.index()] as u32)
    }

    #[inline]
    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement(0);
        }
        let k = self.log[a.index()] as usize + self.log[b.index()] as usize;
        FieldElement(self.exp[k % self.exp.len()] as u32)
    }

    #[inline]
    pub fn square(&self, a: FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::DivisionByZero);
        }
        let order = self.exp.len();
        let k = (order - self.log[a.index()] as usize) % order;
        Ok(FieldElement(self.exp[k] as u32))
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// `a^e`, with `0^0 = 1`.
    pub fn pow(&self, a: FieldElement, e: u64) -> FieldElement {
        if e == 0 {
            return self.one();
        }
        if a.0 == 0 {
            return self.zero();
        }
        let order = self.exp.len() as u64;
        let k = (self.log[a.index()] as u64 * (e % order)) % order;
        FieldElement(self.exp[k as usize] as u32)
    }

    /// Absolute trace `a + a^p + ... + a^{p^{n-1}}` as a value in `[0, p)`.
    #[inline]
    pub fn trace(&self, a: FieldElement) -> u32 {
        self.trace[a.index()] as u32
    }
}

impl FromStr for FieldCtx {
    type Err = FieldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FieldCtx::parse(s)
    }
}

fn digits(mut v: u32, p: u32, n: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(n as usize);
    for _ in 0..n {
        out.push(v % p);
        v /= p;
    }
    out
}

fn pack(coeffs: &[u32], p: u32) -> u32 {
    coeffs.iter().rev().fold(0u32, |acc, &c| acc * p + c)
}

/// `q = p^n` with `p` prime and `n ≥ 2`, if `q` has that shape.
fn split_prime_power(q: u32) -> Option<(u32, u32)> {
    let f = factor(q);
    if f.len() != 1 || f[0] == q {
        return None;
    }
    let p = f[0];
    let (mut n, mut m) = (0, q);
    while m > 1 {
        m /= p;
        n += 1;
    }
    Some((p, n))
}

fn factor(mut m: u32) -> Vec<u32> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= m {
        if m.is_multiple_of(d) {
            out.push(d);
            while m.is_multiple_of(d) {
                m /= d;
            }
        }
        d += 1;
    }
    if m > 1 {
        out.push(m);
    }
    out
}

/// Dense polynomial helpers over `Z_p`, coefficient lists constant term first.
pub(crate) mod poly {
    pub fn trim(a: &mut Vec<u32>) {
        while a.last() == Some(&0) {
            a.pop();
        }
    }

    pub fn mul(a: &[u32], b: &[u32], p: u32) -> Vec<u32> {
        if a.is_empty() || b.is_empty() {
            return Vec::new();
        }
        let mut out = vec![0u64; a.len() + b.len() - 1];
        for (i, &x) in a.iter().enumerate() {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] = (out[i + j] + x as u64 * y as u64) % p as u64;
            }
        }
        let mut out: Vec<u32> = out.into_iter().map(|c| c as u32).collect();
        trim(&mut out);
        out
    }

    /// Remainder of `a` modulo the monic `m`, padded to `width` coefficients.
    pub fn rem(a: &[u32], m: &[u32], p: u32, width: usize) -> Vec<u32> {
        let mut r = a.to_vec();
        trim(&mut r);
        let dm = m.len() - 1;
        debug_assert_eq!(m[dm], 1);
        while r.len() > dm {
            let lead = *r.last().unwrap();
            let shift = r.len() - 1 - dm;
            for (i, &c) in m.iter().enumerate() {
                let sub = (lead as u64 * c as u64 % p as u64) as u32;
                r[shift + i] = (r[shift + i] + p - sub) % p;
            }
            trim(&mut r);
        }
        r.resize(width, 0);
        r
    }

    /// Exhaustive trial division by every monic polynomial of degree
    /// `1..=deg/2`.
    pub fn is_irreducible(m: &[u32], p: u32) -> bool {
        let deg = m.len() - 1;
        for d in 1..=deg / 2 {
            let count = (p as u64).pow(d as u32);
            for code in 0..count {
                let mut f = Vec::with_capacity(d + 1);
                let mut c = code;
                for _ in 0..d {
                    f.push((c % p as u64) as u32);
                    c /= p as u64;
                }
                f.push(1);
                let r = rem(m, &f, p, d);
                if r.iter().all(|&x| x == 0) {
                    return false;
                }
            }
        }
        true
    }

    pub fn smallest_irreducible(n: u32, p: u32) -> Vec<u32> {
        let count = (p as u64).pow(n);
        for code in 0..count {
            let mut m = Vec::with_capacity(n as usize + 1);
            let mut c = code;
            for _ in 0..n {
                m.push((c % p as u64) as u32);
                c /= p as u64;
            }
            m.push(1);
            if is_irreducible(&m, p) {
                return m;
            }
        }
        unreachable!("irreducible polynomials exist in every degree")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_field_uses_modulus_x() {
        let f = make_field(5, 1, None).unwrap();
        assert_eq!(f.q(), 5);
        assert_eq!(f.modulus(), &[0, 1]);
    }

    #[test]
    fn f9_default_modulus_is_x2_plus_1() {
        // The nine monic quadratics over Z_3 in packed order, with their
        // irreducibility decided by root search.
        let mut first = None;
        for code in 0..9u32 {
            let (c0, c1) = (code % 3, code / 3);
            let has_root = (0..3u32).any(|x| (x * x + c1 * x + c0) % 3 == 0);
            if !has_root {
                first = Some(vec![c0, c1, 1]);
                break;
            }
        }
        assert_eq!(first.as_deref(), Some(&[1, 0, 1][..]));
        let f = make_field(3, 2, None).unwrap();
        assert_eq!(f.modulus(), &[1, 0, 1]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert_eq!(make_field(2, 3, None).unwrap_err(), FieldError::EvenCharacteristic);
        assert_eq!(make_field(9, 1, None).unwrap_err(), FieldError::NotPrime(9));
        assert_eq!(make_field(1, 1, None).unwrap_err(), FieldError::NotPrime(1));
        assert!(matches!(make_field(3, 7, None), Err(FieldError::TooLarge { .. })));
        assert!(matches!(make_field(3, 2, Some(&[2, 0, 1])), Err(FieldError::Reducible { .. })));
        assert!(matches!(make_field(3, 2, Some(&[1, 0, 2])), Err(FieldError::BadModulus(_))));
    }

    #[test]
    fn parses_specs() {
        assert_eq!(FieldCtx::parse("7").unwrap().q(), 7);
        let f = FieldCtx::parse("5^2").unwrap();
        assert_eq!(f.q(), 25);
        let g = FieldCtx::parse("3^2/2,2,1").unwrap();
        assert_eq!(g.modulus(), &[2, 2, 1]);
        assert_eq!(FieldCtx::parse(&g.spec_string()).unwrap(), g);
        assert!(matches!(FieldCtx::parse("3^x"), Err(FieldError::BadSpec(_))));
        assert!(matches!(FieldCtx::parse(""), Err(FieldError::BadSpec(_))));
    }

    #[test]
    fn small_arithmetic() {
        let f5 = make_field(5, 1, None).unwrap();
        assert_eq!(f5.mul(f5.from_int(2), f5.from_int(3)), f5.from_int(1));
        let f7 = make_field(7, 1, None).unwrap();
        assert_eq!(f7.inv(f7.from_int(3)).unwrap(), f7.from_int(5));
        assert_eq!(f7.inv(f7.zero()), Err(FieldError::DivisionByZero));
        let f9 = make_field(3, 2, None).unwrap();
        let t = f9.from_coeffs(&[0, 1]).unwrap();
        assert_eq!(f9.mul(t, t), f9.from_int(2));
        assert_eq!(f9.sub(f9.from_int(1), f9.from_int(2)), f9.from_int(2));
    }

    #[test]
    fn trace_values() {
        let f9 = make_field(3, 2, None).unwrap();
        assert_eq!(f9.trace(f9.one()), 2);
        // t + t^3 computed by plain polynomial powering mod x^2 + 1.
        let m = [1, 0, 1];
        let t = [0u32, 1];
        let t3 = poly::rem(&poly::mul(&poly::mul(&t, &t, 3), &t, 3), &m, 3, 2);
        let sum: Vec<u32> = t.iter().zip(&t3).map(|(a, b)| (a + b) % 3).collect();
        assert_eq!(sum, vec![0, 0]);
        assert_eq!(f9.trace(f9.from_coeffs(&[0, 1]).unwrap()), 0);
        let f5 = make_field(5, 1, None).unwrap();
        assert_eq!(f5.trace(f5.from_int(3)), 3);
    }

    #[test]
    fn enumeration_is_positional() {
        let f3 = make_field(3, 1, None).unwrap();
        let e: Vec<_> = f3.enumerate().map(|x| f3.coeffs(x)[0]).collect();
        assert_eq!(e, vec![0, 1, 2]);
        let f9 = make_field(3, 2, None).unwrap();
        for (i, x) in f9.enumerate().enumerate() {
            let c = f9.coeffs(x);
            assert_eq!(i as u32, c[0] + 3 * c[1]);
        }
        assert_eq!(f9.enumerate().len(), 9);
    }

    #[test]
    fn field_axioms_and_trace_laws() {
        for (p, n) in [(3, 1), (5, 1), (3, 2), (5, 2), (3, 3), (7, 2), (13, 1)] {
            let f = make_field(p, n, None).unwrap();
            let els: Vec<_> = f.enumerate().collect();
            for &a in &els {
                assert_eq!(f.add(a, f.neg(a)), f.zero());
                if !a.is_zero() {
                    assert_eq!(f.pow(a, (f.q() - 1) as u64), f.one());
                    assert_eq!(f.mul(a, f.inv(a).unwrap()), f.one());
                }
                assert_eq!(f.trace(f.pow(a, p as u64)), f.trace(a));
                for &b in &els {
                    assert_eq!(f.trace(f.add(a, b)), (f.trace(a) + f.trace(b)) % p);
                    assert_eq!(f.mul(a, b), f.mul(b, a));
                }
            }
            // Distributivity on a sample.
            for &a in els.iter().take(7) {
                for &b in els.iter().rev().take(7) {
                    for &c in els.iter().step_by(3) {
                        assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                    }
                }
            }
        }
    }

    #[test]
    fn table_multiplication_matches_polynomial_multiplication() {
        let f = make_field(3, 3, None).unwrap();
        for a in f.enumerate() {
            for b in f.enumerate() {
                let prod = poly::mul(&f.coeffs(a), &f.coeffs(b), 3);
                let r = poly::rem(&prod, f.modulus(), 3, 3);
                assert_eq!(f.coeffs(f.mul(a, b)), r);
            }
        }
    }

    #[test]
    fn user_modulus_changes_representation_not_structure() {
        let a = make_field(3, 2, None).unwrap();
        let b = make_field(3, 2, Some(&[2, 1, 1])).unwrap();
        // Same multiset of traces: (q/p) elements per trace value.
        for f in [&a, &b] {
            let mut hist = [0; 3];
            for x in f.enumerate() {
                hist[f.trace(x) as usize] += 1;
            }
            assert_eq!(hist, [3, 3, 3]);
        }
    }
}
