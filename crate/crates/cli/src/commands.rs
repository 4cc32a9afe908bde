//! Subcommand bodies.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use parabola_core::avoiders::{avoids, max_avoider_exact, max_avoider_heuristic_with, min_guaranteed_1d};
use parabola_core::gapfinder::{
    build_gap_measure, certify, convolution_functional_with, scale_split_diagnostics, GapParams, ParabolaMeasure,
    PipelineOptions,
};
use parabola_core::oracle::frostman_cap_violation;
use parabola_core::pgeom::{
    content_tree_with, dyadic_content, frostman, parabolic_frostman_constant, riesz_energy, EnergyOptions, GridMeasure,
    GridSet, PairKernel, WeightFormat,
};
use parabola_core::progressions::{check_threshold, count_pairs_with, counting_error_with, PointSet2};
use parabola_core::spectral::{fmt12, parabola_raw_sums, GaussClass};
use parabola_core::suite::{run_criterion, SuiteOptions, CRITERIA};
use parabola_core::{Execution, FieldCtx};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::output::{bad, emit, emit_json, paint, read_text, to_value, use_color, write_text, CliError, CliResult};
use super::{
    AvoidArgs, AvoidMode, Command, ContentArgs, EnergyArgs, ErrorBoundArgs, FrostmanArgs, FunctionalArgs,
    GapPipelineArgs, GaussScanArgs, KernelArg, MeasureSource, SetArgs, SuiteArgs, TableFormat, WeightArg,
};

pub fn run(cmd: Command, exec: Execution) -> CliResult<()> {
    match cmd {
        Command::Count(a) => count(a, exec),
        Command::ErrorBound(a) => error_bound(a, exec),
        Command::GaussScan(a) => gauss_scan(a, exec),
        Command::Threshold(a) => threshold(a),
        Command::Avoid(a) => avoid(a, exec),
        Command::Content(a) => content(a, exec),
        Command::Frostman(a) => frostman_cmd(a),
        Command::Energy(a) => energy(a, exec),
        Command::GapPipeline(a) => gap_pipeline(a, exec),
        Command::Functional(a) => functional(a, exec),
        Command::Suite(a) => suite(a),
    }
}

fn field(spec: &str) -> CliResult<Arc<FieldCtx>> {
    Ok(Arc::new(FieldCtx::parse(spec)?))
}

fn point_set(ctx: &Arc<FieldCtx>, spec: &str, seed: u64) -> CliResult<PointSet2> {
    let q2 = ctx.size() * ctx.size();
    match spec {
        "full" => Ok(PointSet2::full(ctx.clone())),
        "empty" => Ok(PointSet2::empty(ctx.clone())),
        _ => {
            if let Some(n) = spec.strip_prefix("random:") {
                let n: usize = n.parse().map_err(|_| bad(format!("bad set size in {spec:?}")))?;
                if n > q2 {
                    return Err(bad(format!("random set size {n} exceeds q^2 = {q2}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let cells = sample(&mut rng, q2, n).into_iter().map(|i| (i / ctx.size(), i % ctx.size()));
                let points = cells.map(|(x, y)| (ctx.element(x), ctx.element(y))).collect::<Vec<_>>();
                return Ok(PointSet2::from_points(ctx.clone(), points));
            }
            Ok(PointSet2::parse(ctx.clone(), &read_text(Path::new(spec))?)?)
        }
    }
}

fn grid_set(spec: &str) -> CliResult<GridSet> {
    let depth = |s: &str| s.parse::<u32>().map_err(|_| bad(format!("bad depth in {spec:?}")));
    if let Some(m) = spec.strip_prefix("full:") {
        Ok(GridSet::full(depth(m)?)?)
    } else if let Some(m) = spec.strip_prefix("empty:") {
        Ok(GridSet::empty(depth(m)?)?)
    } else {
        Ok(GridSet::parse(&read_text(Path::new(spec))?)?)
    }
}

fn measure(src: &MeasureSource) -> CliResult<GridMeasure> {
    match (&src.measure, &src.set, src.s) {
        (Some(p), _, _) => Ok(GridMeasure::parse(&read_text(p)?)?),
        (None, Some(k), Some(s)) => Ok(frostman(&grid_set(k)?, s)?),
        (None, Some(k), None) => Ok(GridMeasure::uniform_on(&grid_set(k)?)?),
        (None, None, _) => Err(bad("one of --measure or --set is required")),
    }
}

fn count(a: SetArgs, exec: Execution) -> CliResult<()> {
    let ctx = field(&a.field)?;
    let set = point_set(&ctx, &a.set, a.seed)?;
    emit_json(to_value(&count_pairs_with(&set, exec)?)?, a.out.as_deref())
}

fn threshold(a: SetArgs) -> CliResult<()> {
    let ctx = field(&a.field)?;
    let set = point_set(&ctx, &a.set, a.seed)?;
    emit_json(to_value(&check_threshold(&set)?)?, a.out.as_deref())
}

fn error_bound(a: ErrorBoundArgs, exec: Execution) -> CliResult<()> {
    let ctx = field(&a.field)?;
    let n = ctx.size() * ctx.size();
    let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
    let mut draw = || -> Vec<Complex64> {
        (0..n).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
    };
    let mut defects = Vec::with_capacity(a.pairs);
    for _ in 0..a.pairs {
        let (f, g) = (draw(), draw());
        defects.push(counting_error_with(&ctx, &f, &g, exec)?);
    }
    let worst_ratio = defects.iter().map(|d| d.lhs_diff / d.rhs_bound).fold(0.0, f64::max);
    let worst_route = defects.iter().map(|d| d.route_discrepancy).fold(0.0, f64::max);
    let v = json!({
        "q": ctx.size(),
        "pairs": a.pairs,
        "seed": a.seed,
        "max_defect_ratio": worst_ratio,
        "max_route_discrepancy": worst_route,
        "defects": to_value(&defects)?,
    });
    emit_json(v, a.out.as_deref())
}

#[derive(Serialize)]
struct GaussRow {
    a_index: usize,
    b_index: usize,
    re: f64,
    im: f64,
    modulus: f64,
    class: GaussClass,
}

fn gauss_scan(a: GaussScanArgs, exec: Execution) -> CliResult<()> {
    let ctx = field(&a.field)?;
    let q = ctx.size();
    let rows: Vec<GaussRow> = parabola_raw_sums(&ctx, exec)
        .into_iter()
        .enumerate()
        .map(|(i, s)| GaussRow {
            a_index: i / q,
            b_index: i % q,
            re: s.re,
            im: s.im,
            modulus: s.norm(),
            class: GaussClass::of(ctx.element(i / q), ctx.element(i % q)),
        })
        .collect();
    match a.format {
        TableFormat::Json => emit_json(json!({ "q": q, "sums": to_value(&rows)? }), a.out.as_deref()),
        TableFormat::Csv => {
            let mut text = String::from("a_index,b_index,re,im,modulus\n");
            for r in &rows {
                text.push_str(&format!(
                    "{},{},{},{},{}\n",
                    r.a_index,
                    r.b_index,
                    fmt12(r.re),
                    fmt12(r.im),
                    fmt12(r.modulus)
                ));
            }
            emit(&text, a.out.as_deref())
        }
    }
}

fn avoid(a: AvoidArgs, exec: Execution) -> CliResult<()> {
    let ctx = field(&a.field)?;
    if a.mode == AvoidMode::OneDim {
        let report = min_guaranteed_1d(&ctx)?;
        if let Some(path) = &a.out {
            let mut row = vec![b'0'; ctx.size()];
            report.witness.iter().for_each(|&i| row[i] = b'1');
            row.push(b'\n');
            write_text(path, &String::from_utf8_lossy(&row))?;
        }
        let mut v = to_value(&report)?;
        v["mode"] = json!("1d");
        return emit_json(v, None);
    }
    let result = match a.mode {
        AvoidMode::Exact => max_avoider_exact(ctx.clone())?,
        _ => max_avoider_heuristic_with(ctx.clone(), a.seed, a.iterations, exec),
    };
    if !avoids(&result.witness) {
        return Err(CliError::Invariant("the returned set contains a configuration".into()));
    }
    if let Some(path) = &a.out {
        write_text(path, &result.witness.to_text())?;
    }
    let mut v = to_value(&result)?;
    v["mode"] = json!(if a.mode == AvoidMode::Exact { "exact" } else { "heuristic" });
    if a.mode == AvoidMode::Heuristic {
        v["seed"] = json!(a.seed);
        v["iterations"] = json!(a.iterations);
    }
    emit_json(v, None)
}

fn content(a: ContentArgs, exec: Execution) -> CliResult<()> {
    let k = grid_set(&a.set)?;
    let tree = content_tree_with(&k, a.s, exec)?;
    let v = json!({
        "depth": k.depth(),
        "cells": k.count(),
        "s": a.s,
        "content": tree.total(),
    });
    emit_json(v, a.out.as_deref())
}

fn frostman_cmd(a: FrostmanArgs) -> CliResult<()> {
    let k = grid_set(&a.set)?;
    let mu = frostman(&k, a.s)?;
    if let Some((q, mass)) = frostman_cap_violation(&mu, a.s, 1e-9) {
        return Err(CliError::Invariant(format!("μ({q}) = {mass} exceeds ℓ^s")));
    }
    if let Some(path) = &a.out {
        let format = match a.format {
            WeightArg::Rational => WeightFormat::Rational,
            WeightArg::Double => WeightFormat::Double,
        };
        write_text(path, &mu.to_text(format)?)?;
    }
    let stats = parabolic_frostman_constant(&mu, a.s, a.samples, a.seed);
    let v = json!({
        "depth": mu.depth(),
        "s": a.s,
        "mass": mu.mass(),
        "content": dyadic_content(&k, a.s)?,
        "frostman_constant": to_value(&stats)?,
    });
    emit_json(v, a.report.as_deref())
}

fn energy(a: EnergyArgs, exec: Execution) -> CliResult<()> {
    let mu = measure(&a.source)?;
    let opts = EnergyOptions {
        kernel: match a.kernel {
            KernelArg::Center => PairKernel::CenterToCenter,
            KernelArg::CellAveraged => PairKernel::CellAveraged,
        },
        fourier_radius: a.fourier_radius,
        exec,
        ..EnergyOptions::default()
    };
    let report = riesz_energy(&mu, a.sigma, &opts)?;
    let mut v = to_value(&report)?;
    v["mass"] = json!(mu.mass());
    emit_json(v, a.out.as_deref())
}

fn gap_pipeline(a: GapPipelineArgs, exec: Execution) -> CliResult<()> {
    let k = grid_set(&a.set)?;
    let params = match a.b.as_str() {
        "auto" => GapParams::with_max_b(a.a, a.t)?,
        b => {
            let b: f64 = b.parse().map_err(|_| bad(format!("--B must be \"auto\" or a number, got {b:?}")))?;
            GapParams::new(a.a, b, a.t)?
        }
    };
    let opts = PipelineOptions {
        frostman_samples: a.samples,
        seed: a.seed,
        functional_delta: a.delta,
        functional_depth: a.functional_depth,
        exec,
        ..PipelineOptions::default()
    };
    let (mu, report) = build_gap_measure(&k, a.s, &params, &opts)?;
    if let Some(path) = &a.measure_out {
        write_text(path, &mu.to_text(WeightFormat::Double)?)?;
    }
    let mut v = to_value(&report)?;
    if a.certify {
        v["certification"] = to_value(&certify(&params, &opts.phi))?;
    }
    emit_json(v, a.out.as_deref())
}

fn functional(a: FunctionalArgs, exec: Execution) -> CliResult<()> {
    if !(a.a.is_finite() && a.a >= 1.0) {
        return Err(bad(format!("A = {} must be ≥ 1", a.a)));
    }
    if a.nodes == 0 {
        return Err(bad("--nodes must be positive"));
    }
    let mu = measure(&a.source)?;
    let pi = ParabolaMeasure::new(a.a, a.nodes);
    let value = convolution_functional_with(&mu, &pi, a.delta, exec)?;
    let mut v = json!({
        "A": a.a,
        "delta": a.delta,
        "nodes": a.nodes,
        "depth": mu.depth(),
        "mass": mu.mass(),
        "value": value,
    });
    if let Some(b) = a.b {
        let params = GapParams::new(a.a, b, a.t)?;
        v["diagnostics"] = to_value(&scale_split_diagnostics(&mu, &pi, &params, a.delta)?)?;
    }
    emit_json(v, a.out.as_deref())
}

fn suite(a: SuiteArgs) -> CliResult<()> {
    let opts = SuiteOptions { quick: a.quick, seed: a.seed };
    let ids: Vec<u8> = if a.only.is_empty() { CRITERIA.iter().map(|c| c.0).collect() } else { a.only.clone() };
    let color = use_color();
    let mut results = Vec::with_capacity(ids.len());
    for id in ids {
        let r = run_criterion(id, &opts);
        let line = r.line();
        let (tag, rest) = line.split_at(6);
        println!("{}{rest}", paint(tag, r.passed, color));
        results.push(r);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if let Some(path) = &a.json {
        let v: Value = json!({ "quick": a.quick, "seed": a.seed, "results": to_value(&results)? });
        write_text(path, &super::output::render(v))?;
    }
    if failed > 0 {
        Err(CliError::SuiteFailed(failed))
    } else {
        Ok(())
    }
}
