//! The ten-criterion acceptance battery, shared by the `acceptance` test
//! target and the `suite` subcommand.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::avoiders::{avoids_1d, max_avoider_exact, min_guaranteed_1d};
use crate::ffield::FieldCtx;
use crate::gapfinder::{
    build_gap_measure, comparison_samples, convolution_functional, fourier_comparison, scale_split_diagnostics,
    GapError, GapParams, Mollifier, ParabolaMeasure, PipelineOptions, PARABOLA_NODES,
};
use crate::oracle;
use crate::par::Execution;
use crate::pgeom::{dyadic_content, frostman, GridMeasure, GridSet, ParabolicRect};
use crate::progressions::{check_threshold, count_pairs, counting_error_with, PointSet2};
use crate::spectral::{parabola_raw_sums, GaussClass};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SuiteOptions {
    /// Smaller sample counts for a fast smoke run.
    pub quick: bool,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] {:>2} {:<34} {:>7.2}s / {:>4.0}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.budget_seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(u8, &str, f64); 10] = [
    (1, "gauss-sum trichotomy", 30.0),
    (2, "counting defect bound", 120.0),
    (3, "progression count lower bound", 120.0),
    (4, "threshold witnesses", 180.0),
    (5, "1D threshold", 60.0),
    (6, "content DP vs cut enumeration", 60.0),
    (7, "Frostman invariants", 120.0),
    (8, "gap pipeline identities", 120.0),
    (9, "functional positivity and oracle", 120.0),
    (10, "gap monotonicity and defect scan", 120.0),
];

type Check = Result<String, String>;

fn field(q: u32) -> Arc<FieldCtx> {
    Arc::new(FieldCtx::parse(&q.to_string()).expect("acceptance fields are prime powers"))
}

fn scaled(opts: &SuiteOptions, full: usize, quick: usize) -> usize {
    if opts.quick {
        quick
    } else {
        full
    }
}

fn gauss_trichotomy(_: &SuiteOptions) -> Check {
    let mut worst = 0.0f64;
    for q in [3u32, 5, 7, 9, 13, 25, 27, 49] {
        let ctx = field(q);
        let sums = parabola_raw_sums(&ctx, Execution::default());
        let qf = q as f64;
        let mut classes = [0usize; 3];
        for (i, s) in sums.iter().enumerate() {
            let (a, b) = (ctx.element(i / q as usize), ctx.element(i % q as usize));
            let class = GaussClass::of(a, b);
            let err = (s.norm() - class.expected_modulus(qf)).abs() / qf;
            worst = worst.max(err);
            if err > 1e-8 {
                return Err(format!("q = {q}: |S({i})| = {} not {class:?}", s.norm()));
            }
            classes[class as usize] += 1;
            if class == GaussClass::Trivial && (s - Complex64::new(qf, 0.0)).norm() > 1e-8 * qf {
                return Err(format!("q = {q}: S(0, 0) = {s}"));
            }
        }
        let q = q as usize;
        if classes != [1, q - 1, q * (q - 1)] {
            return Err(format!("q = {q}: class counts {classes:?}"));
        }
    }
    Ok(format!("8 fields, worst relative error {worst:.1e}"))
}

fn random_complex(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn counting_defect(opts: &SuiteOptions) -> Check {
    let pairs = scaled(opts, 200, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 2);
    let (mut worst_ratio, mut worst_route) = (0.0f64, 0.0f64);
    for q in [5u32, 9, 13, 25] {
        let ctx = field(q);
        let n = (q * q) as usize;
        for t in 0..pairs {
            let (f, g) = (random_complex(&mut rng, n), random_complex(&mut rng, n));
            let d = counting_error_with(&ctx, &f, &g, Execution::default())
                .map_err(|e| format!("q = {q}, pair {t}: {e}"))?;
            if d.lhs_diff > d.rhs_bound {
                return Err(format!("q = {q}, pair {t}: defect {} > {}", d.lhs_diff, d.rhs_bound));
            }
            if d.route_discrepancy > 1e-7 {
                return Err(format!("q = {q}, pair {t}: routes differ by {:.2e}", d.route_discrepancy));
            }
            worst_ratio = worst_ratio.max(d.lhs_diff / d.rhs_bound);
            worst_route = worst_route.max(d.route_discrepancy);
        }
    }
    Ok(format!("{pairs} pairs × 4 fields, max defect/bound {worst_ratio:.3}, max route gap {worst_route:.1e}"))
}

fn random_subset(ctx: &Arc<FieldCtx>, rng: &mut ChaCha8Rng) -> PointSet2 {
    let q = ctx.size();
    let density: f64 = rng.gen();
    let pts: Vec<_> =
        (0..q * q).filter(|_| rng.gen_bool(density)).map(|i| (ctx.element(i / q), ctx.element(i % q))).collect();
    PointSet2::from_points(ctx.clone(), pts)
}

fn count_bound(opts: &SuiteOptions) -> Check {
    let sets = scaled(opts, 1000, 100);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 3);
    let mut tightest = f64::INFINITY;
    for q in [3u32, 5, 7, 9, 13, 25, 27] {
        let ctx = field(q);
        let qf = q as f64;
        for t in 0..sets {
            let a = random_subset(&ctx, &mut rng);
            let report = count_pairs(&a).map_err(|e| format!("q = {q}, set {t}: {e}"))?;
            let alpha = a.len() as f64 / (qf * qf);
            let bound = (alpha - qf.powf(-0.5)) * alpha * qf.powi(3);
            if (report.total as f64) < bound {
                return Err(format!("q = {q}, set {t}: count {} < {bound}", report.total));
            }
            tightest = tightest.min(report.total as f64 - bound);
        }
    }
    Ok(format!("{sets} sets × 7 fields, min slack {tightest:.2}"))
}

/// Smallest `n` with `n^2 ≥ 4q^3`, i.e. `⌈2q^{3/2}⌉`.
fn threshold_size(q: usize) -> usize {
    let target = 4 * (q as u128).pow(3);
    let mut n = (2.0 * (q as f64).powf(1.5)).floor() as u128;
    while n * n < target {
        n += 1;
    }
    while n > 0 && (n - 1) * (n - 1) >= target {
        n -= 1;
    }
    n as usize
}

fn threshold_witnesses(opts: &SuiteOptions) -> Check {
    let sets = scaled(opts, 100, 10);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 4);
    for q in [9u32, 13, 25] {
        let ctx = field(q);
        let qs = q as usize;
        let size = threshold_size(qs);
        for t in 0..sets {
            let pts = sample(&mut rng, qs * qs, size).into_iter().map(|i| (ctx.element(i / qs), ctx.element(i % qs)));
            let a = PointSet2::from_points(ctx.clone(), pts);
            let verdict = check_threshold(&a).map_err(|e| format!("q = {q}, set {t}: {e}"))?;
            match verdict.witness {
                Some(w) if oracle::witness_is_valid(&a, &w) => {}
                Some(w) => return Err(format!("q = {q}, set {t}: invalid witness {w:?}")),
                None => return Err(format!("q = {q}, set {t}: no witness at |A| = {size}")),
            }
        }
    }
    let mut sizes = Vec::new();
    for q in [3u32, 5] {
        let r = max_avoider_exact(field(q)).map_err(|e| e.to_string())?;
        if r.size as f64 >= r.upper_bound {
            return Err(format!("q = {q}: avoider of size {} ≥ {}", r.size, r.upper_bound));
        }
        sizes.push(r.size);
    }
    let brute = oracle::brute_force_max_avoider_2d(&field(3));
    if brute != sizes[0] {
        return Err(format!("q = 3: exact {} but enumeration {brute}", sizes[0]));
    }
    Ok(format!("{sets} sets × 3 fields witnessed; exact avoiders q=3: {}, q=5: {}", sizes[0], sizes[1]))
}

fn one_dim_threshold(_: &SuiteOptions) -> Check {
    let mut found = Vec::new();
    for q in [3u32, 5, 7, 9, 13, 25] {
        let ctx = field(q);
        let r = min_guaranteed_1d(&ctx).map_err(|e| e.to_string())?;
        let witness: Vec<_> = r.witness.iter().map(|&i| ctx.element(i)).collect();
        avoids_1d(&ctx, &witness).map_err(|e| format!("q = {q}: {e}"))?;
        if r.max_avoider as f64 >= r.sqrt_q + 1.0 {
            return Err(format!("q = {q}: 1D avoider of size {} ≥ √q + 1", r.max_avoider));
        }
        if q <= 13 {
            let brute = oracle::brute_force_max_avoider_1d(&ctx);
            if brute != r.max_avoider {
                return Err(format!("q = {q}: exact {} but enumeration {brute}", r.max_avoider));
            }
        }
        found.push(format!("{q}:{}", r.max_avoider));
    }
    Ok(format!("max 1D avoiders {}", found.join(" ")))
}

fn content_dp(opts: &SuiteOptions) -> Check {
    let sets = scaled(opts, 100, 20);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 6);
    for t in 0..sets {
        let density = [0.02, 0.1, 0.3, 0.7][t % 4];
        let k = GridSet::from_cells(2, (0..64).filter(|_| rng.gen_bool(density))).map_err(|e| e.to_string())?;
        for s in [2.0, 2.5, 2.9] {
            let dp = dyadic_content(&k, s).map_err(|e| e.to_string())?;
            let cut = oracle::exhaustive_content(&k, s);
            if dp != cut {
                return Err(format!("set {t}, s = {s}: DP {dp} vs enumeration {cut}"));
            }
        }
    }
    Ok(format!("{sets} sets × 3 exponents agree exactly"))
}

/// Twenty depth-5 sets: random sets of several densities, parabolic Cantor
/// sets keeping a fixed subset of the eight children at every level, and
/// full or nearly full squares.
pub fn fixture_sets(seed: u64) -> Vec<GridSet> {
    const M: u32 = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF1C5);
    let mut out = Vec::new();
    for density in [0.05, 0.2, 0.4, 0.6, 0.8, 0.9, 0.95, 0.99] {
        out.push(GridSet::from_cells(M, (0..1 << (3 * M)).filter(|_| rng.gen_bool(density))).unwrap());
    }
    for keep in [
        vec![0, 3, 5, 6],
        vec![0, 1, 2, 3, 4, 5],
        vec![1, 2, 4, 7],
        vec![0, 1, 2, 3, 4, 5, 6],
        vec![0, 2, 5, 7, 3],
        vec![0, 7],
    ] {
        let cells = ParabolicRect::generation(M).filter(|r| {
            (1..=M).all(|level| {
                let shift = M - level;
                let a = r.ix >> shift & 1;
                let b = r.is >> (2 * shift) & 3;
                keep.contains(&((a * 4 + b) as usize))
            })
        });
        out.push(GridSet::from_cells(M, cells.map(|r| r.flat()).collect::<Vec<_>>()).unwrap());
    }
    out.push(GridSet::full(M).unwrap());
    let mut holes = GridSet::full(M).unwrap();
    for _ in 0..50 {
        holes.remove(rng.gen_range(0..1 << (3 * M)));
    }
    out.push(holes);
    // Left half, a thin horizontal strip, a single child and a diagonal.
    out.push(GridSet::from_cells(M, 0..1 << (3 * M - 1)).unwrap());
    out.push(GridSet::from_cells(M, (0..32).flat_map(|a| (0..8).map(move |b| a * 1024 + 500 + b))).unwrap());
    out.push(GridSet::from_cells(M, ParabolicRect::new(1, 1, 2).descendants(4).map(|r| r.flat())).unwrap());
    out.push(GridSet::from_cells(M, (0..32).flat_map(|a| (0..32).map(move |b| a * 1024 + a * 32 + b))).unwrap());
    out
}

fn frostman_invariants(opts: &SuiteOptions) -> Check {
    let fixtures = fixture_sets(opts.seed);
    let count = scaled(opts, fixtures.len(), 5);
    for (i, k) in fixtures.iter().take(count).enumerate() {
        for s in [2.8, 2.9] {
            let mu = frostman(k, s).map_err(|e| format!("fixture {i}, s = {s}: {e}"))?;
            if let Some((q, mass)) = oracle::frostman_cap_violation(&mu, s, 1e-12) {
                return Err(format!("fixture {i}, s = {s}: μ({q}) = {mass}"));
            }
            let content = dyadic_content(k, s).map_err(|e| e.to_string())?;
            if mu.mass() < content * (1.0 - 1e-12) {
                return Err(format!("fixture {i}, s = {s}: ‖μ‖ = {} < content {content}", mu.mass()));
            }
            if (0..k.cells()).any(|c| !k.contains(c) && mu.weights()[c] != 0.0) {
                return Err(format!("fixture {i}: mass outside K"));
            }
        }
    }
    Ok(format!("{count} fixtures × 2 exponents, caps exhaustive"))
}

fn pipeline_identities(_: &SuiteOptions) -> Check {
    let k = GridSet::full(6).map_err(|e| e.to_string())?;
    let params = GapParams::with_max_b(10.0, 1).map_err(|e| e.to_string())?;
    let opts = PipelineOptions { frostman_samples: 2000, functional_nodes: 1024, ..Default::default() };
    let (mu, report) = build_gap_measure(&k, 2.9, &params, &opts).map_err(|e| e.to_string())?;
    let phi = opts.phi;
    let mut worst = 0.0f64;
    for r in ParabolicRect::generation(1) {
        worst = worst.max((mu.mass_of(&r) - oracle::mollifier_mass_2d(&phi, &r)).abs());
    }
    if worst > 1e-6 {
        return Err(format!("cell mass defect {worst:.2e}"));
    }
    if (report.total_mass - 1.0).abs() > 1e-9 {
        return Err(format!("total mass {}", report.total_mass));
    }
    let mut rejected = 0;
    for t in 1..=6 {
        for a in [1.0, 3.0, 10.0] {
            let b = GapParams::max_b(a, t);
            match GapParams::new(a, b * 1.001, t) {
                Err(GapError::ParamViolation { .. }) => rejected += 1,
                other => return Err(format!("(A, B, T) = ({a}, {}, {t}) accepted: {other:?}", b * 1.001)),
            }
            GapParams::new(a, b, t).map_err(|e| format!("boundary B rejected: {e}"))?;
        }
    }
    Ok(format!(
        "cell defect {worst:.1e}, mass error {:.1e}, {rejected} violations rejected",
        (report.total_mass - 1.0).abs()
    ))
}

fn functional_oracle(opts: &SuiteOptions) -> Check {
    let mu = GridMeasure::uniform(6).map_err(|e| e.to_string())?;
    let (a, delta) = (2.0, 0.1);
    let pi = ParabolaMeasure::new(a, PARABOLA_NODES);
    let value = convolution_functional(&mu, &pi, delta).map_err(|e| e.to_string())?;
    if value <= 0.0 {
        return Err(format!("functional {value} not positive"));
    }
    let (mc, se) = oracle::functional_monte_carlo(a, delta, 10_000_000, opts.seed ^ 9);
    let rel = (value - mc).abs() / mc;
    if rel > 0.02 {
        return Err(format!("functional {value} vs Monte Carlo {mc} ± {se}"));
    }
    let doubled =
        convolution_functional(&mu, &ParabolaMeasure::new(a, 2 * PARABOLA_NODES), delta).map_err(|e| e.to_string())?;
    let drift = (doubled - value).abs() / value;
    if drift >= 1e-3 {
        return Err(format!("node doubling moved the value by {drift:.2e}"));
    }
    let params = GapParams::with_max_b(a, 6).map_err(|e| e.to_string())?;
    let d = scale_split_diagnostics(&mu, &pi, &params, delta).map_err(|e| e.to_string())?;
    let split = (d.i1 + d.i2 + d.i3 - d.total).abs() / d.total;
    if split > 1e-6 || (d.total - value).abs() > 1e-12 * value {
        return Err(format!("split I1+I2+I3 = {} vs total {}", d.i1 + d.i2 + d.i3, d.total));
    }
    Ok(format!(
        "F = {value:.6}, MC {mc:.6} ± {se:.1e} ({:.2}%), N-doubling {drift:.1e}, κ = {:.4}",
        100.0 * rel,
        d.kappa
    ))
}

fn gap_monotonicity(_: &SuiteOptions) -> Check {
    let k = GridSet::full(6).map_err(|e| e.to_string())?;
    let opts = PipelineOptions { frostman_samples: 500, functional_nodes: 256, ..Default::default() };
    let phi = Mollifier::default();
    let (a, b) = (1.0, 2f64.powf(1.0 / 6.0));
    let mut values = Vec::new();
    for t in [1u32, 2, 4] {
        let params = GapParams::new(a, b, t).map_err(|e| e.to_string())?;
        let (_, rep) = build_gap_measure(&k, 2.9, &params, &opts).map_err(|e| e.to_string())?;
        values.push((t, rep.spectral_gap_value.ok_or("empty annulus")?));
    }
    let xis = comparison_samples(0.4, 4.0, 12, 16);
    let mut ratios = Vec::new();
    let mut defects = Vec::new();
    for t in [1u32, 2] {
        let params = GapParams::with_max_b(1.0, t).map_err(|e| e.to_string())?;
        let (mu, _) = build_gap_measure(&k, 2.9, &params, &opts).map_err(|e| e.to_string())?;
        let rep = fourier_comparison(&mu, &phi, t, &xis);
        let bound = 2.0 * std::f64::consts::PI * (1.0 + (-2.0 * t as f64).exp2()).sqrt();
        if !(rep.max_ratio.is_finite() && rep.max_ratio <= bound) {
            return Err(format!("T = {t}: defect ratio {} exceeds {bound}", rep.max_ratio));
        }
        ratios.push(rep.max_ratio);
        defects.push(rep.ratios.iter().map(|&(r, v)| v * r).fold(0.0, f64::max) * (-(t as f64)).exp2());
    }
    let halving = defects[1] / defects[0];
    let scan =
        format!("defect ratios T=1: {:.3}, T=2: {:.3}; T 1→2 max-defect ratio {halving:.3}", ratios[0], ratios[1]);
    if !(0.25..=1.0).contains(&halving) {
        return Err(format!("{scan} outside [1/4, 1]"));
    }
    let gaps: Vec<String> = values.iter().map(|(t, v)| format!("T={t}: {v:.4e}")).collect();
    for w in values.windows(2) {
        if w[1].1 > w[0].1 + 1e-9 {
            return Err(format!("gap integral increases ({}); {scan}", gaps.join(", ")));
        }
    }
    Ok(format!("gap integral {}; {scan}", gaps.join(", ")))
}

pub fn run_criterion(id: u8, opts: &SuiteOptions) -> CriterionResult {
    let (_, name, budget) = CRITERIA[(id - 1) as usize];
    let start = Instant::now();
    let outcome = match id {
        1 => gauss_trichotomy(opts),
        2 => counting_defect(opts),
        3 => count_bound(opts),
        4 => threshold_witnesses(opts),
        5 => one_dim_threshold(opts),
        6 => content_dp(opts),
        7 => frostman_invariants(opts),
        8 => pipeline_identities(opts),
        9 => functional_oracle(opts),
        10 => gap_monotonicity(opts),
        _ => Err(format!("no criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if passed && !opts.quick && seconds > budget {
        passed = false;
        detail = format!("over the {budget:.0} s budget; {detail}");
    }
    CriterionResult { id, name, passed, detail, seconds, budget_seconds: budget }
}

/// Runs every criterion in order, calling `each` as results arrive.
pub fn run_all(opts: &SuiteOptions, mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    CRITERIA
        .iter()
        .map(|&(id, _, _)| {
            let r = run_criterion(id, opts);
            each(&r);
            r
        })
        .collect()
}
