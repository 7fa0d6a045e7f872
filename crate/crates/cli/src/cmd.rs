use std::path::Path;

use anyhow::{bail, Result};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use zharm_core::heat::{decay_sweep, heat_profile, SweepKind, SweepParams, ROUTE_TOLERANCE};
use zharm_core::lpaley::{calderon_quadrature, calderon_reconstruct, continuous_calderon};
use zharm_core::molec::{
    decompose_with, verify_molecule, Coefficient, CoefficientJson, DecomposeOptions, Flavor,
};
use zharm_core::multop::{
    apply_multiplier, default_t_grid, operator_norm_probe, riesz as riesz_transform, riesz_both, sobolev_condition,
    weighted_kernel_check, Route, Variant,
};
use zharm_core::spaces::{continuous_norm, continuous_quadrature, hardy_norm, HardyVariant};
use zharm_core::spectral::{Circle, DEFAULT_HALFWIDTH};
use zharm_core::symbols::{self, NamedSymbol};
use zharm_core::{family, Error as CoreError, Partition, Sequence, SpaceSpec, SpectralGrid, Symbol};

use crate::io::{self, num, CsvOut};
use crate::*;

fn ok(summary: serde_json::Value) -> Result<Outcome> {
    Ok(Outcome {
        summary,
        consistent: true,
    })
}

fn invalid(msg: impl Into<String>) -> anyhow::Error {
    CoreError::InvalidParameter(msg.into()).into()
}

fn parse_exponent(s: &str) -> Result<f64> {
    match s {
        "inf" | "infinity" => Ok(f64::INFINITY),
        _ => s.parse().map_err(|_| invalid(format!("bad exponent '{s}'"))),
    }
}

fn resolve_symbol(spec: &str) -> Result<NamedSymbol> {
    if let Some(path) = spec.strip_prefix("custom:") {
        let rows = io::read_symbol_csv(Path::new(path))?;
        return Ok(NamedSymbol::Plain(symbols::tabulated(spec, rows)?));
    }
    Ok(symbols::parse(spec)?)
}

fn plain_symbol(spec: &str) -> Result<Symbol> {
    match resolve_symbol(spec)? {
        NamedSymbol::Plain(s) => Ok(s),
        NamedSymbol::Riesz(_) => Err(invalid("the Riesz symbol is not a function of λ; use the riesz subcommand")),
    }
}

fn variant(v: VariantArg) -> Variant {
    match v {
        VariantArg::Forward => Variant::Forward,
        VariantArg::Backward => Variant::Backward,
    }
}

fn check_window(cfg: &RunConfig, f: &Sequence) -> Result<()> {
    let width = f.len();
    if 2 * (width + cfg.halfwidth) + 2 > cfg.grid {
        return Err(CoreError::Aliasing {
            required: 2 * (width + cfg.halfwidth) + 2,
            actual: cfg.grid,
        }
        .into());
    }
    Ok(())
}

/// `(seq restricted to supp f ± hw, relative ℓ² mass left outside)`.
fn windowed(full: &Sequence, f: &Sequence, hw: usize) -> (Sequence, f64) {
    let Some((lo, hi)) = f.support() else {
        return (Sequence::zero(), 0.0);
    };
    let hw = hw as i64;
    let inside = full.restrict(lo - hw, hi + hw);
    let total = full.l2_norm().powi(2);
    let tail = if total > 0.0 {
        ((total - inside.l2_norm().powi(2)) / total).max(0.0)
    } else {
        0.0
    };
    (inside, tail)
}

pub fn kernel(cfg: &RunConfig, a: &KernelArgs) -> Result<Outcome> {
    if !(a.t > 0.0 && a.t.is_finite()) {
        return Err(invalid("--t must be positive"));
    }
    let bessel = matches!(a.route, KernelRoute::Bessel | KernelRoute::Both).then(|| heat_profile(a.t, a.nmax)).transpose()?;
    let quad = if matches!(a.route, KernelRoute::Quadrature | KernelRoute::Both) {
        let grid = SpectralGrid::new(cfg.grid)?;
        Some(zharm_core::synthesize_kernel(&Symbol::heat(a.t), a.nmax, &grid, None)?)
    } else {
        None
    };
    let qv = |n: usize| quad.as_ref().map(|k| k.kernel.get(n as i64).re);
    let bv = |n: usize| bessel.as_ref().map(|b| b[n]);
    let diff = (bessel.is_some() && quad.is_some())
        .then(|| (0..=a.nmax).map(|n| (bv(n).unwrap() - qv(n).unwrap()).abs()).fold(0.0, f64::max));
    if let Some(path) = &a.out {
        let mut w = CsvOut::create(path, &["n", "bessel", "quadrature", "abs_diff"])?;
        let nm = a.nmax as i64;
        for n in -nm..=nm {
            let m = n.unsigned_abs() as usize;
            let (b, q) = (bv(m), qv(m));
            let d = b.zip(q).map(|(b, q)| (b - q).abs());
            let cell = |x: Option<f64>| x.map(num).unwrap_or_default();
            w.row(&[n.to_string(), cell(b), cell(q), cell(d)])?;
        }
        w.finish()?;
    }
    let h0 = bv(0).or(qv(0)).unwrap();
    let mass: f64 = (0..=a.nmax).map(|n| bv(n).or(qv(n)).unwrap() * if n == 0 { 1.0 } else { 2.0 }).sum();
    Ok(Outcome {
        summary: json!({
            "t": a.t,
            "nmax": a.nmax,
            "route": format!("{:?}", a.route).to_lowercase(),
            "h0": h0,
            "mass": mass,
            "max_abs_diff": diff,
            "tolerance": ROUTE_TOLERANCE,
            "quadrature_error_estimate": quad.as_ref().map(|k| k.error_estimate),
            "grid": quad.as_ref().map(|k| k.grid_size),
        }),
        consistent: diff.is_none_or(|d| d <= ROUTE_TOLERANCE),
    })
}

pub fn apply(cfg: &RunConfig, a: &ApplyArgs) -> Result<Outcome> {
    let f = io::read_sequence(&a.input)?;
    check_window(cfg, &f)?;
    let (seq, tail, grid, label) = match resolve_symbol(&a.symbol)? {
        NamedSymbol::Plain(s) => {
            let r = apply_multiplier(&s, &f, a.f0.map(|v| Complex64::new(v, 0.0)), cfg.halfwidth)?;
            (r.seq, r.tail, r.grid_size, s.label().to_string())
        }
        NamedSymbol::Riesz(v) => {
            let r = riesz_transform(&f, v, Route::Symbol)?;
            let (seq, tail) = windowed(&r.seq, &f, cfg.halfwidth);
            (seq, tail, r.circle.size, format!("riesz:{}", format!("{v:?}").to_lowercase()))
        }
    };
    if let Some(path) = &a.out {
        io::write_json(path, &seq.to_json())?;
    }
    ok(json!({
        "symbol": label,
        "f0": a.f0,
        "grid": grid,
        "halfwidth": cfg.halfwidth,
        "tail": tail,
        "l2_in": f.l2_norm(),
        "l2_out": seq.l2_norm(),
    }))
}

fn space_from_args(a: &NormArgs) -> Result<SpaceSpec> {
    if a.space.contains(':') || a.space == "h1" || a.space == "l2" {
        return Ok(SpaceSpec::parse(&a.space)?);
    }
    let q = parse_exponent(&a.q)?;
    Ok(match a.space.as_str() {
        "besov" => SpaceSpec::Besov { alpha: a.alpha, p: a.p, q },
        "tl" => SpaceSpec::Tl { alpha: a.alpha, p: a.p, q },
        "hardy" => SpaceSpec::Hardy { p: a.p, n_power: a.n_power },
        other => return Err(invalid(format!("unknown space '{other}'"))),
    })
}

pub fn norm(cfg: &RunConfig, a: &NormArgs) -> Result<Outcome> {
    let f = io::read_sequence(&a.input)?;
    let space = space_from_args(a)?;
    let part = Partition::default();
    let report = match (a.form, space) {
        (NormForm::Discrete, SpaceSpec::Hardy { p, n_power }) => {
            hardy_norm(&f, p, HardyVariant::Area { n_power }, None, true)?
        }
        (NormForm::Discrete, s) => s.norm(&part, &f, cfg.jmin)?,
        (NormForm::Continuous, SpaceSpec::Besov { alpha, p, q }) => {
            let quad = continuous_quadrature(cfg.jmin);
            continuous_norm(&part, &f, alpha, p, q, &quad, zharm_core::spaces::Flavor::Besov, None, true)?
        }
        (NormForm::Continuous, SpaceSpec::Tl { alpha, p, q }) => {
            let quad = continuous_quadrature(cfg.jmin);
            continuous_norm(&part, &f, alpha, p, q, &quad, zharm_core::spaces::Flavor::Tl, None, true)?
        }
        (NormForm::Continuous, _) => return Err(invalid("--form continuous applies to besov and tl only")),
    };
    ok(json!({
        "space": space,
        "form": format!("{:?}", a.form).to_lowercase(),
        "jmin": cfg.jmin,
        "value": report.value,
        "tail_warning": report.tail_warning,
        "refinement_delta": report.refinement_delta,
    }))
}

pub fn sweep(a: &SweepArgs) -> Result<Outcome> {
    let kind = match a.kind {
        SweepKindArg::Lem1Ht => SweepKind::Lem1Ht { order: a.n_order },
        SweepKindArg::Lem2Htk => SweepKind::Lem2Htk { ell: a.ell },
        SweepKindArg::LemHtkDiff => SweepKind::LemHtkDiff { ell: a.ell },
        SweepKindArg::LemHtkHigher => SweepKind::LemHtkHigher { k: a.k, ell: a.ell },
        SweepKindArg::Lem1Htk => SweepKind::Lem1Htk {
            ell: a.ell,
            order: a.n_order,
            alpha: a.arg_z,
        },
    };
    let mut params = if a.kind == SweepKindArg::Lem1Htk {
        SweepParams::complex_default()
    } else {
        SweepParams::default()
    };
    if let Some(v) = a.tmin {
        params.t_min = v;
    }
    if let Some(v) = a.tmax {
        params.t_max = v;
    }
    if let Some(v) = a.tsteps {
        params.t_steps = v;
    }
    if let Some(v) = a.nmin {
        params.n_min = v;
    }
    if let Some(v) = a.nmax {
        params.n_max = v;
    }
    let r = decay_sweep(kind, &params)?;
    if let Some(path) = &a.out {
        let mut w = CsvOut::create(path, &["t", "n", "quantity", "bound_shape", "ratio"])?;
        for p in &r.points {
            w.row(&[num(p.t), p.n.to_string(), num(p.quantity), num(p.bound_shape), num(p.ratio)])?;
        }
        w.finish()?;
    }
    ok(json!({
        "kind": r.label,
        "bound": r.bound,
        "params": r.params,
        "constant": r.constant,
        "argmax_t": r.argmax_t,
        "argmax_n": r.argmax_n,
        "refinement_delta": r.refinement_delta,
        "stable": r.stable,
        "excluded": r.excluded,
    }))
}

fn rel_diff(a: &Sequence, b: &Sequence) -> f64 {
    let d = (a - b).l2_norm();
    let n = a.l2_norm();
    if n > 0.0 {
        d / n
    } else {
        d
    }
}

pub fn calderon(cfg: &RunConfig, a: &CalderonArgs) -> Result<Outcome> {
    let f = io::read_sequence(&a.input)?;
    let part = Partition::default();
    let disc = calderon_reconstruct(&part, &f, cfg.jmin)?;
    let quad = calderon_quadrature(cfg.jmin, a.points_per_octave);
    let cont = continuous_calderon(&part, &f, &quad)?;
    if let Some(path) = &a.out {
        io::write_json(path, &disc.seq.to_json())?;
    }
    ok(json!({
        "jmin": cfg.jmin,
        "residual": disc.residual,
        "continuous_residual": rel_diff(&f, &cont.seq),
        "continuous_vs_discrete": rel_diff(&disc.seq, &cont.seq),
        "c_psi": cont.c_psi,
        "points_per_octave": a.points_per_octave,
        "refinement_delta": cont.refinement_delta,
    }))
}

/// On-disk result of `decompose`, read back by `verify`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CoefficientFile {
    pub options: DecomposeOptions,
    pub c: f64,
    pub nu_range: (i32, i32),
    pub dropped: usize,
    pub dropped_mass: f64,
    pub residual: f64,
    pub coefficients: Vec<CoefficientJson>,
}

pub fn decompose(cfg: &RunConfig, a: &DecomposeArgs) -> Result<Outcome> {
    let f = io::read_sequence(&a.input)?;
    let opts = DecomposeOptions {
        m: a.m,
        decay: a.decay,
        p: a.p,
        jmin: cfg.jmin,
        points_per_octave: a.points_per_octave,
        drop: a.drop,
        grid_size: cfg.grid,
    };
    let d = decompose_with(&Partition::default(), &f, &opts)?;
    let residual = d.residual(&f);
    let file = CoefficientFile {
        options: d.options.clone(),
        c: d.c,
        nu_range: d.nu_range,
        dropped: d.dropped,
        dropped_mass: d.dropped_mass,
        residual,
        coefficients: d.coefficients.iter().map(Coefficient::to_json).collect(),
    };
    if let Some(path) = &a.out {
        io::write_json(path, &file)?;
    }
    let s_max = d.coefficients.iter().map(|c| c.s).fold(0.0, f64::max);
    ok(json!({
        "count": d.coefficients.len(),
        "residual": residual,
        "nu_range": d.nu_range,
        "dropped": d.dropped,
        "dropped_mass": d.dropped_mass,
        "c": d.c,
        "s_max": s_max,
        "grid": d.circle.size,
        "points_per_octave": a.points_per_octave,
    }))
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn verify(a: &VerifyArgs) -> Result<Outcome> {
    let file: CoefficientFile = io::read_json(&a.input)?;
    let flavor = match a.flavor {
        FlavorArg::Besov => Flavor::Besov,
        FlavorArg::Hardy => Flavor::Hardy,
        FlavorArg::Diff => Flavor::Diff,
    };
    let o = &file.options;
    let coeffs: Vec<Coefficient> = file
        .coefficients
        .iter()
        .map(|j| Coefficient::from_json(j, o.m, o.decay, o.p))
        .collect::<zharm_core::Result<_>>()?;
    let reports: Vec<_> = coeffs
        .par_iter()
        .map(|c| verify_molecule(&c.molecule, flavor))
        .collect();
    if let Some(path) = &a.out {
        let mut w = CsvOut::create(path, &["nu", "k", "s", "constant", "worst_order", "worst_at"])?;
        for (c, r) in coeffs.iter().zip(&reports) {
            let i = c.interval();
            w.row(&[
                i.nu.to_string(),
                i.k.to_string(),
                num(c.s),
                num(r.constant),
                r.worst_order.to_string(),
                r.worst_at.to_string(),
            ])?;
        }
        w.finish()?;
    }
    let mut consts: Vec<f64> = reports.iter().map(|r| r.constant).collect();
    let worst = reports
        .iter()
        .zip(&coeffs)
        .max_by(|x, y| x.0.constant.total_cmp(&y.0.constant))
        .map(|(r, c)| json!({"nu": c.interval().nu, "k": c.interval().k, "constant": r.constant, "order": r.worst_order}));
    let max = consts.iter().copied().fold(0.0, f64::max);
    let min = consts.iter().copied().fold(f64::INFINITY, f64::min);
    let med = median(&mut consts);
    ok(json!({
        "flavor": flavor,
        "count": coeffs.len(),
        "max_constant": max,
        "min_constant": if coeffs.is_empty() { None } else { Some(min) },
        "median_constant": if coeffs.is_empty() { None } else { Some(med) },
        "worst": worst,
    }))
}

pub fn riesz(a: &RieszArgs) -> Result<Outcome> {
    let f = io::read_sequence(&a.input)?;
    let v = variant(a.variant);
    let name = format!("{v:?}").to_lowercase();
    match a.route {
        RieszRoute::Symbol | RieszRoute::Subordination => {
            let route = if a.route == RieszRoute::Symbol { Route::Symbol } else { Route::Subordination };
            let r = riesz_transform(&f, v, route)?;
            if let Some(path) = &a.out {
                io::write_json(path, &json!({"variant": v, "route": route, "result": r.seq.to_json()}))?;
            }
            ok(json!({
                "variant": name,
                "route": route,
                "grid": r.circle.size,
                "l2_in": f.l2_norm(),
                "l2_out": r.seq.l2_norm(),
                "tail": r.tail,
                "warning": r.warning,
            }))
        }
        RieszRoute::Both => {
            let cmp = riesz_both(&f, v, None)?;
            if let Some(path) = &a.out {
                io::write_json(
                    path,
                    &json!({
                        "variant": v,
                        "discrepancy": cmp.discrepancy,
                        "symbol": cmp.symbol.seq.to_json(),
                        "subordination": cmp.subordination.seq.to_json(),
                    }),
                )?;
            }
            Ok(Outcome {
                summary: json!({
                    "variant": name,
                    "route": "both",
                    "grid": cmp.symbol.circle.size,
                    "l2_in": f.l2_norm(),
                    "l2_symbol": cmp.symbol.seq.l2_norm(),
                    "l2_subordination": cmp.subordination.seq.l2_norm(),
                    "discrepancy": cmp.discrepancy,
                    "tolerance": a.tol,
                    "tail": cmp.symbol.tail,
                    "warning": cmp.symbol.warning,
                }),
                consistent: cmp.discrepancy <= a.tol,
            })
        }
    }
}

pub fn multiplier(cfg: &RunConfig, a: &MultiplierArgs) -> Result<Outcome> {
    let sym = plain_symbol(&a.symbol)?;
    let r = parse_exponent(&a.r)?;
    if !a.check_condition && a.kernel_check.is_none() && a.input.is_none() {
        bail!(invalid("nothing to do: give --check-condition, --kernel-check R or --in"));
    }
    let mut summary = json!({"symbol": sym.label(), "s": a.s, "r": a.r});
    let mut report = json!({"symbol": sym.label()});
    if a.check_condition {
        let eta = Partition::default().psi;
        let c = sobolev_condition(&sym, a.s, r, &default_t_grid(), &eta)?;
        summary["condition_sup"] = json!(c.sup);
        summary["condition_argmax_t"] = json!(c.argmax_t);
        summary["condition_finite"] = json!(c.values.iter().all(|v| v.is_finite()));
        summary["refinement_delta"] = json!(c.refinement_delta);
        report["condition"] = serde_json::to_value(&c)?;
    }
    if let Some(rs) = a.kernel_check {
        let k = weighted_kernel_check(&sym, rs, a.s, r, a.eps)?;
        summary["kernel_ratio_l2"] = json!(k.ratio_l2);
        summary["kernel_ratio_pointwise"] = json!(k.ratio_pointwise);
        summary["kernel_error"] = json!(k.kernel_error);
        report["kernel_check"] = serde_json::to_value(&k)?;
    }
    if let Some(path) = &a.input {
        let f = io::read_sequence(path)?;
        check_window(cfg, &f)?;
        let out = apply_multiplier(&sym, &f, a.f0.map(|v| Complex64::new(v, 0.0)), cfg.halfwidth)?;
        summary["tail"] = json!(out.tail);
        summary["l2_out"] = json!(out.seq.l2_norm());
        report["result"] = serde_json::to_value(out.seq.to_json())?;
    }
    if let Some(path) = &a.out {
        io::write_json(path, &report)?;
    }
    ok(summary)
}

pub fn probe(cfg: &RunConfig, a: &ProbeArgs) -> Result<Outcome> {
    let fam = family::by_id(&a.family, cfg.seed)?;
    let space = SpaceSpec::parse(&a.space)?;
    let v = variant(a.variant);
    let report = match a.op {
        ProbeOp::Identity => operator_norm_probe(&|f: &Sequence| Ok(f.clone()), &space, &fam)?,
        ProbeOp::Riesz => {
            operator_norm_probe(&|f: &Sequence| Ok(riesz_transform(f, v, Route::Symbol)?.seq), &space, &fam)?
        }
        ProbeOp::Multiplier => {
            let Some(spec) = &a.symbol else {
                bail!(invalid("--op multiplier needs --symbol"));
            };
            let sym = plain_symbol(spec)?;
            let op = |f: &Sequence| {
                let c = Circle::around(f, DEFAULT_HALFWIDTH);
                Ok(c.to_sequence(&c.apply(&sym, &c.embed(f))))
            };
            operator_norm_probe(&op, &space, &fam)?
        }
    };
    if let Some(path) = &a.out {
        io::write_json(path, &report)?;
    }
    ok(json!({
        "op": format!("{:?}", a.op).to_lowercase(),
        "space": space,
        "family": a.family,
        "family_size": fam.len(),
        "seed": cfg.seed,
        "value": report.value,
        "argmax": report.argmax,
        "tail_warning": report.tail_warning,
    }))
}
