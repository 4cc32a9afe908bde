//! Dyadic parabolic Hausdorff content and the bottom-up Frostman measure.
//!
//! Content is computed by `f(Q) = min(ℓ(Q)^s, Σ_children f(Q'))` over the
//! tree of generations `0..=m`. Each node carries the optimal cover as a
//! count of rectangles per generation, and every value is evaluated from
//! those counts as `Σ_k n_k ℓ_k^s` in ascending `k`, so equal covers give
//! bit-identical values regardless of how they were assembled.

use super::{grid_dims, GeomError, GridMeasure, GridSet, ParabolicRect, MAX_DEPTH};
use crate::par::{self, Execution};

/// `2^{-ks}`, the cost of one generation-`k` rectangle.
pub(crate) fn ell_pow(k: u32, s: f64) -> f64 {
    (-(k as f64) * s).exp2()
}

pub(crate) fn check_exponent(s: f64) -> Result<(), GeomError> {
    if s > 0.0 && s <= 3.0 {
        Ok(())
    } else {
        Err(GeomError::BadExponent(s))
    }
}

/// Per-generation rectangle counts packed into one `u128`. Generation `k`
/// uses `3k + 1` bits, enough for its `8^k` rectangles, so adding profiles of
/// disjoint subtrees never carries between fields.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub(crate) struct Profile(u128);

impl Profile {
    const fn offset(k: u32) -> u32 {
        3 * k * k.saturating_sub(1) / 2 + k
    }

    pub(crate) fn single(k: u32) -> Profile {
        Profile(1u128 << Self::offset(k))
    }

    pub(crate) fn count(self, k: u32) -> u32 {
        ((self.0 >> Self::offset(k)) & ((1u128 << (3 * k + 1)) - 1)) as u32
    }

    pub(crate) fn counts(self) -> [u32; MAX_DEPTH as usize + 1] {
        std::array::from_fn(|k| self.count(k as u32))
    }

    pub(crate) fn value(self, pows: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (k, p) in pows.iter().enumerate() {
            acc += self.count(k as u32) as f64 * p;
        }
        acc
    }
}

impl std::ops::Add for Profile {
    type Output = Profile;
    fn add(self, o: Profile) -> Profile {
        Profile(self.0 + o.0)
    }
}

/// Content values `f(Q)` for every dyadic `Q` of generation `≤ m`.
#[derive(Clone, Debug)]
pub struct ContentTree {
    s: f64,
    depth: u32,
    levels: Vec<Vec<f64>>,
    root_cover: [u32; MAX_DEPTH as usize + 1],
}

impl ContentTree {
    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Content of `K ∩ Q`.
    pub fn content_at(&self, q: &ParabolicRect) -> f64 {
        self.levels[q.j as usize][q.flat()]
    }

    pub fn total(&self) -> f64 {
        self.levels[0][0]
    }

    /// Number of rectangles per generation in the optimal cover of `K`.
    pub fn cover_counts(&self) -> &[u32] {
        &self.root_cover[..=self.depth as usize]
    }
}

pub fn content_tree(k: &GridSet, s: f64) -> Result<ContentTree, GeomError> {
    content_tree_with(k, s, Execution::default())
}

pub fn content_tree_with(k: &GridSet, s: f64, exec: Execution) -> Result<ContentTree, GeomError> {
    check_exponent(s)?;
    let m = k.depth();
    let pows: Vec<f64> = (0..=m).map(|g| ell_pow(g, s)).collect();
    let leaf = Profile::single(m);
    let mut profiles: Vec<Profile> =
        (0..k.cells()).map(|c| if k.contains(c) { leaf } else { Profile::default() }).collect();
    let mut levels = vec![Vec::new(); m as usize + 1];
    levels[m as usize] = profiles.iter().map(|p| p.value(&pows)).collect();
    for j in (0..m).rev() {
        let (_, ns) = grid_dims(j);
        let fns = 4 * ns;
        let own = Profile::single(j);
        let own_value = own.value(&pows);
        let next: Vec<Profile> = par::map_range(exec, 1 << (3 * j), |i| {
            let (ix, is) = (i / ns, i % ns);
            let mut sum = Profile::default();
            for c in 0..8 {
                sum = sum + profiles[(2 * ix + c / 4) * fns + 4 * is + c % 4];
            }
            if own_value <= sum.value(&pows) {
                own
            } else {
                sum
            }
        });
        levels[j as usize] = next.iter().map(|p| p.value(&pows)).collect();
        profiles = next;
    }
    Ok(ContentTree { s, depth: m, levels, root_cover: profiles[0].counts() })
}

/// Dyadic parabolic `s`-content of `K`, minimised over covers by dyadic
/// rectangles of generation `≤ m`.
pub fn dyadic_content(k: &GridSet, s: f64) -> Result<f64, GeomError> {
    Ok(content_tree(k, s)?.total())
}

/// First rectangle, scanning generations `0..=max_generation` in flat order,
/// with content of `K ∩ Q` at least `(1 - δ)ℓ(Q)^s`.
pub fn find_dense_rect(tree: &ContentTree, delta: f64, max_generation: u32) -> Result<ParabolicRect, GeomError> {
    if tree.total() <= 0.0 {
        return Err(GeomError::EmptyContent);
    }
    let max_generation = max_generation.min(tree.depth());
    for j in 0..=max_generation {
        let need = (1.0 - delta) * ell_pow(j, tree.s());
        if let Some(r) = ParabolicRect::generation(j).find(|r| tree.content_at(r) >= need) {
            return Ok(r);
        }
    }
    Err(GeomError::NoDenseRect { max_generation })
}

/// Bottom-up Frostman measure on `K` (see [`frostman_in`] with `Q = [0,1)^2`).
pub fn frostman(k: &GridSet, s: f64) -> Result<GridMeasure, GeomError> {
    frostman_in(k, s, &ParabolicRect::UNIT)
}

/// Frostman measure on `K ∩ Q`: weight `ℓ_m^s` on each cell, then for each
/// generation from `m - 1` up to that of `Q`, every rectangle whose mass
/// exceeds `ℓ^s` is scaled down to exactly `ℓ^s`. The result has
/// `μ(R) ≤ ℓ(R)^s` for every `R ⊆ Q`, which is checked exhaustively.
pub fn frostman_in(k: &GridSet, s: f64, q: &ParabolicRect) -> Result<GridMeasure, GeomError> {
    let local = frostman_local(k, s, q)?;
    let mut out = GridMeasure::zero(k.depth())?;
    let w = out.weights_mut();
    for (i, r) in q.descendants(k.depth() - q.j).enumerate() {
        w[r.flat()] = local[i];
    }
    check_frostman(&out, s, q)?;
    Ok(out)
}

/// Weights of [`frostman_in`] on the cells of `Q`, in `Q.descendants` order.
pub(crate) fn frostman_local(k: &GridSet, s: f64, q: &ParabolicRect) -> Result<Vec<f64>, GeomError> {
    check_exponent(s)?;
    let m = k.depth();
    if q.j > m {
        return Err(GeomError::RectTooFine { rect: *q, depth: m });
    }
    let local = k.zoom(q)?;
    let d = m - q.j;
    let leaf = ell_pow(m, s);
    // masses[L] holds capped masses at local level L; factors[L] the scalings.
    let mut masses: Vec<Vec<f64>> = vec![Vec::new(); d as usize + 1];
    let mut factors: Vec<Vec<f64>> = vec![Vec::new(); d as usize + 1];
    masses[d as usize] = (0..local.cells()).map(|c| if local.contains(c) { leaf } else { 0.0 }).collect();
    factors[d as usize] = vec![1.0; local.cells()];
    for l in (0..d).rev() {
        let cap = ell_pow(q.j + l, s);
        let (_, ns) = grid_dims(l);
        let fns = 4 * ns;
        let fine = &masses[l as usize + 1];
        let n = 1usize << (3 * l);
        let mut raw = vec![0.0; n];
        let mut fac = vec![1.0; n];
        for i in 0..n {
            let (ix, is) = (i / ns, i % ns);
            let mut acc = 0.0;
            for c in 0..8 {
                acc += fine[(2 * ix + c / 4) * fns + 4 * is + c % 4];
            }
            if acc > cap {
                fac[i] = cap / acc;
                acc = cap;
            }
            raw[i] = acc;
        }
        masses[l as usize] = raw;
        factors[l as usize] = fac;
    }
    // Push the scalings down to the leaves.
    let mut cum = vec![1.0f64];
    for l in 1..=d {
        let (_, ns) = grid_dims(l);
        let pns = ns / 4;
        let n = 1usize << (3 * l);
        cum = (0..n)
            .map(|i| {
                let parent = (i / ns / 2) * pns + (i % ns) / 4;
                cum[parent] * factors[l as usize - 1][parent]
            })
            .collect();
    }
    Ok(masses[d as usize].iter().zip(&cum).map(|(b, c)| b * c).collect())
}

/// Relative slack for `μ(R) ≤ ℓ(R)^s` after floating-point aggregation.
pub(crate) const FROSTMAN_SLACK: f64 = 1e-12;

/// Checks `μ(R) ≤ ℓ(R)^s (1 + slack)` for every dyadic `R ⊆ Q`.
pub(crate) fn check_frostman(mu: &GridMeasure, s: f64, q: &ParabolicRect) -> Result<(), GeomError> {
    let levels = mu.pyramid();
    for j in q.j..=mu.depth() {
        let cap = ell_pow(j, s) * (1.0 + FROSTMAN_SLACK);
        for r in q.descendants(j - q.j) {
            let v = levels[j as usize][r.flat()];
            if v > cap {
                return Err(GeomError::InvariantViolation(format!("μ({r}) = {v} exceeds ℓ^s = {}", ell_pow(j, s))));
            }
        }
    }
    Ok(())
}
