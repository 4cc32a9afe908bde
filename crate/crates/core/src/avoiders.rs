//! Sets avoiding `{x, x + (z, z^2)}` in `F_q^2` and `{x, x + z^2}` in `F_q`.
//!
//! Both are independent sets of Cayley graphs: the 2D graph on `F_q^2` with
//! connection set `S ∪ (-S)`, `S = {(z, z^2) : z ≠ 0}`, and the 1D graph on
//! `F_q` with connection set `{±z^2 : z ≠ 0}`.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ffield::{FieldCtx, FieldElement};
use crate::par::{self, Execution};
use crate::progressions::PointSet2;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AvoiderError {
    #[error("the 1D set is not an avoider: {a} and {b} differ by a nonzero square")]
    NotAvoiding1D { a: usize, b: usize },
    #[error("exact search over {vertices} vertices exceeds the cap of {cap}")]
    TooLarge { vertices: usize, cap: usize },
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
}

/// Default cap on `q^2` for the exact 2D search.
pub const EXACT_VERTEX_CAP: usize = 100;
/// Hard limit of the `u128` bitset solver.
pub const SOLVER_MAX_VERTICES: usize = 128;
/// Cap on `q` for the exact 1D search.
pub const EXACT_1D_CAP: usize = 49;

/// Cayley graph on `F_q^2` whose independent sets are the avoiders.
#[derive(Clone, Debug)]
pub struct AvoiderGraph {
    ctx: Arc<FieldCtx>,
    adjacency: Vec<fixedbitset::FixedBitSet>,
}

impl AvoiderGraph {
    pub fn new(ctx: Arc<FieldCtx>) -> Self {
        let q = ctx.size();
        let mut adjacency = vec![fixedbitset::FixedBitSet::with_capacity(q * q); q * q];
        for (v, row) in adjacency.iter_mut().enumerate() {
            row.extend(neighbours_2d(&ctx, v));
        }
        AvoiderGraph { ctx, adjacency }
    }

    pub fn ctx(&self) -> &Arc<FieldCtx> {
        &self.ctx
    }

    pub fn vertices(&self) -> usize {
        self.adjacency.len()
    }

    pub fn neighbours(&self, v: usize) -> &fixedbitset::FixedBitSet {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].count_ones(..)
    }

    pub fn is_independent(&self, a: &PointSet2) -> bool {
        a.bits().ones().all(|v| self.adjacency[v].is_disjoint(a.bits()))
    }
}

/// Neighbours `(x ± z, y ± z^2)`, `z ≠ 0`, of vertex `v = x·q + y`.
fn neighbours_2d(ctx: &FieldCtx, v: usize) -> impl Iterator<Item = usize> + '_ {
    let q = ctx.size();
    let (x, y) = (ctx.element(v / q), ctx.element(v % q));
    ctx.enumerate().skip(1).flat_map(move |z| {
        let z2 = ctx.square(z);
        [ctx.add(x, z).index() * q + ctx.add(y, z2).index(), ctx.sub(x, z).index() * q + ctx.sub(y, z2).index()]
    })
}

/// True iff no `(x, y) ∈ A` has `(x + z, y + z^2) ∈ A` for some `z ≠ 0`.
pub fn avoids(a: &PointSet2) -> bool {
    let ctx = a.ctx();
    let q = ctx.size();
    let squares: Vec<(FieldElement, FieldElement)> = ctx.enumerate().skip(1).map(|z| (z, ctx.square(z))).collect();
    a.bits().ones().all(|v| {
        let (x, y) = (ctx.element(v / q), ctx.element(v % q));
        squares.iter().all(|&(z, z2)| !a.contains(ctx.add(x, z), ctx.add(y, z2)))
    })
}

/// Nonzero squares of `F_q` as a membership table.
fn square_table(ctx: &FieldCtx) -> Vec<bool> {
    let mut sq = vec![false; ctx.size()];
    for z in ctx.enumerate().skip(1) {
        sq[ctx.square(z).index()] = true;
    }
    sq
}

/// True iff no two distinct elements of `a` differ by a nonzero square.
pub fn avoids_1d(ctx: &FieldCtx, a: &[FieldElement]) -> Result<(), AvoiderError> {
    let sq = square_table(ctx);
    for &u in a {
        for &w in a {
            if sq[ctx.sub(w, u).index()] {
                return Err(AvoiderError::NotAvoiding1D { a: u.index(), b: w.index() });
            }
        }
    }
    Ok(())
}

/// `F_q × A1`, which avoids the 2D configuration whenever `A1` avoids the 1D
/// one.
pub fn product_construction(ctx: Arc<FieldCtx>, a1: &[FieldElement]) -> Result<PointSet2, AvoiderError> {
    avoids_1d(&ctx, a1)?;
    let c = ctx.clone();
    let b = PointSet2::from_points(ctx, c.enumerate().flat_map(|x| a1.iter().map(move |&y| (x, y))));
    debug_assert!(avoids(&b));
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AvoiderResult {
    pub q: usize,
    pub size: usize,
    /// `2q^{3/2}`.
    pub upper_bound: f64,
    #[serde(skip)]
    pub witness: PointSet2,
}

pub fn max_avoider_exact(ctx: Arc<FieldCtx>) -> Result<AvoiderResult, AvoiderError> {
    max_avoider_exact_capped(ctx, EXACT_VERTEX_CAP)
}

/// Exact maximum independent set of the 2D graph, for `q^2 ≤ cap`.
pub fn max_avoider_exact_capped(ctx: Arc<FieldCtx>, cap: usize) -> Result<AvoiderResult, AvoiderError> {
    let q = ctx.size();
    let n = q * q;
    let cap = cap.min(SOLVER_MAX_VERTICES);
    if n > cap {
        return Err(AvoiderError::TooLarge { vertices: n, cap });
    }
    let adj: Vec<u128> = (0..n).map(|v| neighbours_2d(&ctx, v).fold(0u128, |m, u| m | 1u128 << u)).collect();
    let best = mis::maximum_independent_set(&adj, true);
    let witness =
        PointSet2::from_points(ctx.clone(), mis::bits(best).map(|v| (ctx.element(v / q), ctx.element(v % q))));
    let size = witness.len();
    let upper_bound = 2.0 * (q as f64).powf(1.5);
    if !avoids(&witness) {
        return Err(AvoiderError::InvariantViolation("exact witness is not an avoider".into()));
    }
    if size as f64 >= upper_bound {
        return Err(AvoiderError::InvariantViolation(format!(
            "avoider of size {size} reaches 2q^(3/2) = {upper_bound}"
        )));
    }
    Ok(AvoiderResult { q, size, upper_bound, witness })
}

fn adjacency_1d(ctx: &FieldCtx) -> Vec<u128> {
    let q = ctx.size();
    let sq = square_table(ctx);
    (0..q)
        .map(|u| {
            (0..q)
                .filter(|&w| {
                    let d = ctx.sub(ctx.element(w), ctx.element(u)).index();
                    sq[d] || sq[ctx.neg(ctx.element(d)).index()]
                })
                .fold(0u128, |m, w| m | 1u128 << w)
        })
        .collect()
}

/// Maximum 1D avoider, for `q ≤ 49`.
pub fn max_avoider_1d(ctx: &FieldCtx) -> Result<Vec<FieldElement>, AvoiderError> {
    let q = ctx.size();
    if q > EXACT_1D_CAP {
        return Err(AvoiderError::TooLarge { vertices: q, cap: EXACT_1D_CAP });
    }
    let best = mis::maximum_independent_set(&adjacency_1d(ctx), true);
    Ok(mis::bits(best).map(|i| ctx.element(i)).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneDimReport {
    pub q: usize,
    pub max_avoider: usize,
    pub sqrt_q: f64,
    pub witness: Vec<usize>,
}

/// Size of the largest 1D avoider. Every set strictly larger than `√q`
/// contains `{x, x + z^2}`, so the result never exceeds `√q`.
pub fn min_guaranteed_1d(ctx: &FieldCtx) -> Result<OneDimReport, AvoiderError> {
    let best = max_avoider_1d(ctx)?;
    let q = ctx.size();
    let sqrt_q = (q as f64).sqrt();
    if (best.len() * best.len()) > q {
        return Err(AvoiderError::InvariantViolation(format!("1D avoider of size {} exceeds √{q}", best.len())));
    }
    Ok(OneDimReport { q, max_avoider: best.len(), sqrt_q, witness: best.iter().map(|e| e.index()).collect() })
}

/// A large 1D avoider: exact for `q ≤ 49`, greedy in enumeration order
/// beyond.
fn good_1d_avoider(ctx: &FieldCtx) -> Vec<FieldElement> {
    if let Ok(a) = max_avoider_1d(ctx) {
        return a;
    }
    let sq = square_table(ctx);
    let mut chosen: Vec<FieldElement> = Vec::new();
    for w in ctx.enumerate() {
        if chosen.iter().all(|&u| {
            let d = ctx.sub(w, u);
            !sq[d.index()] && !sq[ctx.neg(d).index()]
        }) {
            chosen.push(w);
        }
    }
    chosen
}

/// Independent restarts run by the heuristic.
pub const HEURISTIC_RESTARTS: u64 = 8;

pub fn max_avoider_heuristic(ctx: Arc<FieldCtx>, seed: u64, iterations: usize) -> AvoiderResult {
    max_avoider_heuristic_with(ctx, seed, iterations, Execution::default())
}

/// Iterated local search with tabu perturbations. Restart 0 starts from the
/// product construction; the others start from a random greedy set. The
/// result depends only on `(q, seed, iterations)`.
pub fn max_avoider_heuristic_with(ctx: Arc<FieldCtx>, seed: u64, iterations: usize, exec: Execution) -> AvoiderResult {
    let q = ctx.size();
    let nbrs = NeighbourTable::new(&ctx);
    let warm = {
        let a1 = good_1d_avoider(&ctx);
        let b = product_construction(ctx.clone(), &a1).expect("greedy 1D set avoids");
        b.bits().ones().collect::<Vec<_>>()
    };
    let runs = par::map_range(exec, HEURISTIC_RESTARTS as usize, |r| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (r as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let start = if r == 0 { Some(warm.as_slice()) } else { None };
        local_search(&nbrs, start, iterations, &mut rng)
    });
    let best = runs
        .into_iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .map(|(_, s)| s)
        .unwrap_or_default();
    let witness = PointSet2::from_points(ctx.clone(), best.iter().map(|&v| (ctx.element(v / q), ctx.element(v % q))));
    assert!(avoids(&witness), "heuristic produced an invalid avoider");
    AvoiderResult { q, size: witness.len(), upper_bound: 2.0 * (q as f64).powf(1.5), witness }
}

/// Flat neighbour lists: `2(q - 1)` entries per vertex (with repeats when
/// `z ↦ -z` coincide, which never happens for odd `q`).
struct NeighbourTable {
    n: usize,
    deg: usize,
    list: Vec<u32>,
}

impl NeighbourTable {
    fn new(ctx: &FieldCtx) -> Self {
        let q = ctx.size();
        let n = q * q;
        let deg = 2 * (q - 1);
        let mut list = Vec::with_capacity(n * deg);
        for v in 0..n {
            list.extend(neighbours_2d(ctx, v).map(|u| u as u32));
        }
        NeighbourTable { n, deg, list }
    }

    fn of(&self, v: usize) -> &[u32] {
        &self.list[v * self.deg..(v + 1) * self.deg]
    }
}

struct SearchState<'a> {
    nb: &'a NeighbourTable,
    in_set: Vec<bool>,
    /// Number of neighbours in the set.
    tight: Vec<u32>,
    size: usize,
}

impl<'a> SearchState<'a> {
    fn new(nb: &'a NeighbourTable) -> Self {
        SearchState { nb, in_set: vec![false; nb.n], tight: vec![0; nb.n], size: 0 }
    }

    fn insert(&mut self, v: usize) {
        debug_assert!(!self.in_set[v]);
        self.in_set[v] = true;
        self.size += 1;
        for &u in self.nb.of(v) {
            self.tight[u as usize] += 1;
        }
    }

    fn remove(&mut self, v: usize) {
        debug_assert!(self.in_set[v]);
        self.in_set[v] = false;
        self.size -= 1;
        for &u in self.nb.of(v) {
            self.tight[u as usize] -= 1;
        }
    }

    fn members(&self) -> Vec<usize> {
        (0..self.nb.n).filter(|&v| self.in_set[v]).collect()
    }

    /// Adds free vertices in the given order.
    fn fill(&mut self, order: &[usize]) {
        for &v in order {
            if !self.in_set[v] && self.tight[v] == 0 {
                self.insert(v);
            }
        }
    }

    /// One pass of (1,2)-swaps: drop `x`, add two non-adjacent vertices whose
    /// only set neighbour is `x`. Returns true on improvement.
    fn two_improvement(&mut self, order: &[usize]) -> bool {
        let mut improved = false;
        for &x in order {
            if !self.in_set[x] {
                continue;
            }
            let cands: Vec<usize> = self.nb.of(x).iter().map(|&u| u as usize).filter(|&u| self.tight[u] == 1).collect();
            if cands.len() < 2 {
                continue;
            }
            'pairs: for (i, &u) in cands.iter().enumerate() {
                for &w in &cands[i + 1..] {
                    if w != u && !self.nb.of(u).contains(&(w as u32)) {
                        self.remove(x);
                        self.insert(u);
                        self.insert(w);
                        self.fill(self.nb.of(x).iter().map(|&a| a as usize).collect::<Vec<_>>().as_slice());
                        improved = true;
                        break 'pairs;
                    }
                }
            }
        }
        improved
    }
}

fn local_search(nb: &NeighbourTable, start: Option<&[usize]>, iterations: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = nb.n;
    let mut order: Vec<usize> = (0..n).collect();
    let mut st = SearchState::new(nb);
    match start {
        Some(s) => {
            for &v in s {
                st.insert(v);
            }
        }
        None => order.shuffle(rng),
    }
    st.fill(&order);
    while st.two_improvement(&order) {}
    let mut best = st.members();
    let mut tabu_until = vec![0usize; n];
    let tenure = 7;
    for it in 1..=iterations {
        // Force a random non-tabu outsider in, evicting its set neighbours.
        let mut v = rng.gen_range(0..n);
        for _ in 0..n {
            if !st.in_set[v] && tabu_until[v] <= it {
                break;
            }
            v = (v + 1) % n;
        }
        if st.in_set[v] {
            continue;
        }
        let evicted: Vec<usize> = nb.of(v).iter().map(|&u| u as usize).filter(|&u| st.in_set[u]).collect();
        for &u in &evicted {
            st.remove(u);
            tabu_until[u] = it + tenure;
        }
        st.insert(v);
        order.shuffle(rng);
        st.fill(&order);
        while st.two_improvement(&order) {}
        if st.size > best.len() {
            best = st.members();
        } else if st.size + 1 < best.len() {
            // Drifted too far: return to the incumbent.
            st = SearchState::new(nb);
            for &u in &best {
                st.insert(u);
            }
        }
    }
    best
}

/// Upper bound on the independence number from a greedy clique cover.
pub fn clique_cover_upper_bound(graph: &AvoiderGraph) -> usize {
    let n = graph.vertices();
    let mut covered = fixedbitset::FixedBitSet::with_capacity(n);
    let mut cliques = 0;
    for v in 0..n {
        if covered.contains(v) {
            continue;
        }
        cliques += 1;
        covered.insert(v);
        let mut members = vec![v];
        for u in v + 1..n {
            if !covered.contains(u) && members.iter().all(|&m| graph.neighbours(m).contains(u)) {
                covered.insert(u);
                members.push(u);
            }
        }
    }
    cliques
}

/// Maximum independent set on at most 128 vertices with `u128` bitsets.
pub(crate) mod mis {
    pub fn bits(mut m: u128) -> impl Iterator<Item = usize> {
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(i)
            }
        })
    }

    struct Solver<'a> {
        adj: &'a [u128],
        best: u128,
        best_len: u32,
    }

    /// Branch and bound. Vertices are relabelled highest-degree first; each
    /// node applies degree-0/1 and domination reductions, bounds by a greedy
    /// clique cover and branches on vertices in reverse cover order. With
    /// `transitive` the graph is assumed vertex-transitive and vertex 0 is
    /// fixed in the solution.
    pub fn maximum_independent_set(adj: &[u128], transitive: bool) -> u128 {
        let n = adj.len();
        assert!(n <= 128);
        if n == 0 {
            return 0;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(adj[v].count_ones()), v));
        let mut pos = vec![0usize; n];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let relabel = |m: u128, pos: &[usize]| bits(m).fold(0u128, |acc, v| acc | 1u128 << pos[v]);
        let radj: Vec<u128> = order.iter().map(|&v| relabel(adj[v], &pos)).collect();
        let all = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let mut s = Solver { adj: &radj, best: 0, best_len: 0 };
        if transitive {
            let v = 0usize;
            s.expand(all & !(radj[v] | 1u128 << v), 1u128 << v);
        } else {
            s.expand(all, 0);
        }
        bits(s.best).fold(0u128, |acc, v| acc | 1u128 << order[v])
    }

    impl Solver<'_> {
        fn record(&mut self, cur: u128) {
            let len = cur.count_ones();
            if len > self.best_len {
                self.best = cur;
                self.best_len = len;
            }
        }

        fn reduce(&self, mut cand: u128, mut cur: u128) -> (u128, u128) {
            loop {
                let mut changed = false;
                for v in bits(cand) {
                    if cand & 1u128 << v == 0 {
                        continue;
                    }
                    let nb = self.adj[v] & cand;
                    if nb.count_ones() <= 1 {
                        cur |= 1u128 << v;
                        cand &= !(nb | 1u128 << v);
                        changed = true;
                        continue;
                    }
                    // v is dominated by a neighbour u with N[u] ⊆ N[v]:
                    // some maximum set avoids v.
                    let closed_v = nb | 1u128 << v;
                    if bits(nb).any(|u| (self.adj[u] & cand | 1u128 << u) & !closed_v == 0) {
                        cand &= !(1u128 << v);
                        changed = true;
                    }
                }
                if !changed {
                    return (cand, cur);
                }
            }
        }

        fn expand(&mut self, cand: u128, cur: u128) {
            let (cand, cur) = self.reduce(cand, cur);
            if cand == 0 {
                self.record(cur);
                return;
            }
            // Greedy clique cover in label order.
            let mut seq: Vec<(usize, u32)> = Vec::with_capacity(cand.count_ones() as usize);
            let mut rest = cand;
            let mut k = 0;
            while rest != 0 {
                k += 1;
                let mut q = rest;
                while q != 0 {
                    let v = q.trailing_zeros() as usize;
                    seq.push((v, k));
                    rest &= !(1u128 << v);
                    q &= self.adj[v] & !(1u128 << v);
                }
            }
            let base = cur.count_ones();
            let mut p = cand;
            for &(v, k) in seq.iter().rev() {
                if base + k <= self.best_len {
                    return;
                }
                self.expand(p & !(self.adj[v] | 1u128 << v), cur | 1u128 << v);
                p &= !(1u128 << v);
            }
        }
    }
}
