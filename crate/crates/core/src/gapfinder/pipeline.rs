//! Gap measure on a set `K`: dense rectangle, Frostman pieces on its
//! children, reweighting by the mollifier and blow-up.

use serde::Serialize;

use super::{
    functional::scale_split_diagnostics, mollifier_tail, spectral_gap_integral_with, GapError, GapParams, Mollifier,
    ParabolaMeasure, PolarGrid, ScaleSplit, PARABOLA_NODES,
};
use crate::par::{self, Execution};
use crate::pgeom::{
    content_tree, ell_pow, find_dense_rect, frostman_local, parabolic_frostman_constant, GridMeasure, GridSet,
    ParabolicRect,
};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChildReport {
    pub rect: ParabolicRect,
    /// Dyadic content of `K ∩ Q'`.
    pub content: f64,
    /// `ℓ(Q')^s / 2`.
    pub required: f64,
    /// Mass of the Frostman measure on `K ∩ Q'`.
    pub frostman_mass: f64,
    /// `∫_{T_Q(Q')} φ`.
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOptions {
    pub phi: Mollifier,
    pub frostman_samples: usize,
    pub seed: u64,
    /// Scale of the functional; `0.5 / B` when unset.
    pub functional_delta: Option<f64>,
    pub functional_nodes: usize,
    /// The functional is evaluated on `μ` aggregated to at most this depth.
    pub functional_depth: u32,
    pub grid: PolarGrid,
    pub exec: Execution,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            phi: Mollifier::default(),
            frostman_samples: 20_000,
            seed: 0,
            functional_delta: None,
            functional_nodes: PARABOLA_NODES,
            functional_depth: 4,
            grid: PolarGrid::default(),
            exec: Execution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapReport {
    pub params: GapParams,
    pub s: f64,
    pub dense_rect: ParabolicRect,
    pub child_contents: Vec<ChildReport>,
    /// `max |μ(R) - ∫_R φ|` over generation-`T` rectangles `R`.
    pub cell_mass_defect: f64,
    pub total_mass: f64,
    /// Largest sampled `μ(B_Π(x, r)) / r^s`.
    pub frostman_constant: f64,
    /// `(x, s, r)` of the ball attaining it.
    pub frostman_argmax: (f64, f64, f64),
    /// `None` when the annulus `A^{1/5} ≤ |ξ| ≤ B^2` is empty.
    pub spectral_gap_value: Option<f64>,
    /// `2^{-T} B^6` plus the certified mollifier tail bound.
    pub gap_budget: f64,
    /// `spectral_gap_value / gap_budget`.
    pub gap_constant: Option<f64>,
    pub functional_value: f64,
    pub functional_depth: u32,
    pub diagnostics: ScaleSplit,
}

/// Same measure read at depth `d ≤ m`.
fn aggregate(mu: &GridMeasure, d: u32) -> GridMeasure {
    let mu = mu.coarsest_equivalent();
    if mu.depth() <= d {
        return mu;
    }
    GridMeasure::new(d, mu.pyramid().swap_remove(d as usize)).expect("depth within range")
}

/// Position of `r ⊆ q` in the coordinates of the blown-up square.
fn relative(q: &ParabolicRect, r: &ParabolicRect) -> ParabolicRect {
    let k = r.j - q.j;
    ParabolicRect { j: k, ix: r.ix - (q.ix << k), is: r.is - (q.is << (2 * k)) }
}

pub fn build_gap_measure(
    k: &GridSet,
    s: f64,
    params: &GapParams,
    opts: &PipelineOptions,
) -> Result<(GridMeasure, GapReport), GapError> {
    let m = k.depth();
    let t = params.t;
    if t > m {
        return Err(GapError::BadParam(format!("T = {t} exceeds grid depth {m}")));
    }
    let tree = content_tree(k, s)?;
    let q = find_dense_rect(&tree, params.delta, m - t)?;

    let required = 0.5 * ell_pow(q.j + t, s);
    let children: Vec<ParabolicRect> = q.descendants(t).collect();
    let contents: Vec<f64> = children.iter().map(|c| tree.content_at(c)).collect();
    let failing: Vec<ChildReport> = children
        .iter()
        .zip(&contents)
        .filter(|(_, &c)| c < required)
        .map(|(r, &c)| ChildReport { rect: *r, content: c, required, frostman_mass: 0.0, weight: 0.0 })
        .collect();
    if !failing.is_empty() {
        return Err(GapError::ChildDensityFailure(failing));
    }

    let locals = par::map_range(opts.exec, children.len(), |i| frostman_local(k, s, &children[i]));
    let d = m - q.j;
    let mut weights = vec![0.0; 1usize << (3 * d)];
    let mut reports = Vec::with_capacity(children.len());
    for ((child, local), content) in children.iter().zip(locals).zip(contents) {
        let local = local?;
        let frostman_mass: f64 = local.iter().sum();
        if frostman_mass <= 0.0 {
            return Err(GapError::InvariantViolation(format!("Frostman measure on {child} vanishes")));
        }
        let weight = opts.phi.rect_mass(&relative(&q, child));
        let scale = weight / frostman_mass;
        for (r, v) in child.descendants(m - child.j).zip(&local) {
            weights[relative(&q, &r).flat()] = v * scale;
        }
        reports.push(ChildReport { rect: *child, content, required, frostman_mass, weight });
    }
    let mu = GridMeasure::new(d, weights)?;

    let level = mu.pyramid().swap_remove(t as usize);
    let cell_mass_defect =
        ParabolicRect::generation(t).map(|r| (level[r.flat()] - opts.phi.rect_mass(&r)).abs()).fold(0.0, f64::max);
    let total_mass = mu.mass();

    let balls = parabolic_frostman_constant(&mu, s, opts.frostman_samples, opts.seed);
    let spectral_gap_value = if params.annulus_is_empty() {
        None
    } else {
        Some(spectral_gap_integral_with(&mu.fourier(), params.a, params.b, opts.grid, opts.exec)?)
    };
    let tail = mollifier_tail(&opts.phi, params.a)?;
    let gap_budget = (-(t as f64)).exp2() * params.b.powi(6) + tail.bound;

    let delta = opts.functional_delta.unwrap_or(0.5 / params.b);
    let coarse = aggregate(&mu, opts.functional_depth);
    let pi = ParabolaMeasure::new(params.a, opts.functional_nodes);
    let diagnostics = scale_split_diagnostics(&coarse, &pi, params, delta)?;

    let report = GapReport {
        params: *params,
        s,
        dense_rect: q,
        child_contents: reports,
        cell_mass_defect,
        total_mass,
        frostman_constant: balls.constant,
        frostman_argmax: balls.argmax,
        spectral_gap_value,
        gap_budget,
        gap_constant: spectral_gap_value.map(|v| v / gap_budget),
        functional_value: diagnostics.total,
        functional_depth: coarse.depth(),
        diagnostics,
    };
    Ok((mu, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gapfinder::{comparison_samples, fourier_comparison, spectral_gap_integral};
    use crate::pgeom::dyadic_content;

    fn quick() -> PipelineOptions {
        PipelineOptions { frostman_samples: 2000, functional_nodes: 512, ..Default::default() }
    }

    #[test]
    fn full_set_reproduces_mollifier_cells() {
        let k = GridSet::full(6).unwrap();
        let params = GapParams::with_max_b(10.0, 1).unwrap();
        let (mu, rep) = build_gap_measure(&k, 2.9, &params, &quick()).unwrap();
        assert_eq!(rep.dense_rect, ParabolicRect::UNIT);
        assert_eq!(rep.child_contents.len(), 8);
        assert!(rep.cell_mass_defect < 1e-12);
        assert!((rep.total_mass - 1.0).abs() < 1e-9);
        assert_eq!(mu.depth(), 6);
        assert_eq!(mu.coarsest_equivalent().depth(), 1);
        assert!(rep.spectral_gap_value.is_none());
        assert!(rep.functional_value > 0.0);
    }

    #[test]
    fn missing_deep_cell_is_tolerated() {
        let mut k = GridSet::full(5).unwrap();
        k.remove(12_345);
        let params = GapParams::with_max_b(10.0, 1).unwrap();
        let (_, rep) = build_gap_measure(&k, 2.9, &params, &quick()).unwrap();
        for c in &rep.child_contents {
            let piece = k.restrict(&c.rect).unwrap();
            let content = dyadic_content(&piece, 2.9).unwrap();
            assert!((content - c.content).abs() < 1e-12);
            assert!(content >= c.required);
        }
        assert!(rep.cell_mass_defect < 1e-12);
    }

    #[test]
    fn sparse_children_fail() {
        // Only the left half of the square: half of the children are empty.
        let k = GridSet::from_cells(3, 0..256).unwrap();
        let params = GapParams::with_max_b(1.0, 1).unwrap();
        let mut delta_ok = params;
        delta_ok.delta = 0.9;
        match build_gap_measure(&k, 2.5, &delta_ok, &quick()) {
            Err(GapError::ChildDensityFailure(list)) => {
                assert!(!list.is_empty());
                assert!(list.iter().all(|c| c.content < c.required));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_set_has_no_content() {
        let k = GridSet::empty(3).unwrap();
        let params = GapParams::with_max_b(10.0, 1).unwrap();
        assert!(matches!(
            build_gap_measure(&k, 2.5, &params, &quick()),
            Err(GapError::Geom(crate::pgeom::GeomError::EmptyContent))
        ));
    }

    /// `|μ̂ - φ̂| ≤ 2π |ξ| diam(R)` for a measure matching `φ` on every
    /// generation-`T` rectangle `R`.
    #[test]
    fn fourier_defect_bounded() {
        let k = GridSet::full(6).unwrap();
        let phi = Mollifier::default();
        let xis = comparison_samples(0.4, 4.0, 12, 16);
        let mut defects = Vec::new();
        for t in 1..=3 {
            let params = GapParams::with_max_b(1.0, t).unwrap();
            let (mu, _) = build_gap_measure(&k, 2.9, &params, &quick()).unwrap();
            let rep = fourier_comparison(&mu, &phi, t, &xis);
            let bound = 2.0 * std::f64::consts::PI * (1.0 + (-2.0 * t as f64).exp2()).sqrt();
            assert!(rep.max_ratio <= bound, "T = {t}: {}", rep.max_ratio);
            let worst = rep.ratios.iter().map(|&(r, v)| v * r).fold(0.0, f64::max) * (-(t as f64)).exp2();
            defects.push(worst);
        }
        let first = defects[1] / defects[0];
        assert!((0.25..=1.0).contains(&first), "T = 1 → 2 ratio {first}");
        assert!(defects[2] < defects[1]);
    }

    /// With `K` full the measure is the cell average of `φ` at generation
    /// `T`: its transform approaches `φ̂` from below on low frequencies, so
    /// the annulus integral grows towards that of `φ` while the gap to `φ̂`
    /// shrinks.
    #[test]
    fn gap_integral_converges_to_mollifier() {
        let k = GridSet::full(6).unwrap();
        let phi = Mollifier::default();
        let (a, b) = (1.0, 2f64.powf(1.0 / 6.0));
        let target = spectral_gap_integral(&phi, a, b).unwrap();
        let mut prev_gap = f64::INFINITY;
        for t in [1, 2, 4] {
            let params = GapParams::new(a, b, t).unwrap();
            let (mu, rep) = build_gap_measure(&k, 2.9, &params, &quick()).unwrap();
            let v = rep.spectral_gap_value.unwrap();
            assert!(v < target);
            let diff = DifferenceMeasure { mu: mu.fourier(), phi };
            let gap = spectral_gap_integral(&diff, a, b).unwrap();
            assert!(gap < prev_gap);
            prev_gap = gap;
        }
    }

    struct DifferenceMeasure {
        mu: crate::pgeom::GridFourier,
        phi: Mollifier,
    }

    impl crate::pgeom::FourierMeasure for DifferenceMeasure {
        fn fourier(&self, xi: crate::pgeom::Point) -> num_complex::Complex64 {
            self.mu.fourier(xi) - self.phi.fourier(xi)
        }

        fn total_mass(&self) -> f64 {
            0.0
        }
    }
}
