//! Command implementations. Each returns a results payload and a residual report.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use mdrd_core::frl::{frl_decompose, frl_decompose_float, frl_verify, FrlDecomposition};
use mdrd_core::polymatroid::{
    all_vertices, check_contra_polymatroid, greedy_vertex, min_weighted_sum, parse_subset, permutations,
    SubsetFn,
};
use mdrd_core::prob::json::{nest, JsonEntry};
use mdrd_core::prob::{binary_entropy, expected_distortion, PmfJson, Prob};
use mdrd_core::regions::{
    egc_point, egc_star_point, egc_vertex_to_egc_star, eliminate_to_singletons, ic_weighted_sum_rate,
    ih_hierarchical_sum_rate, ih_weighted_sum_rate, optimize_weighted_sum, rate_bounds, region_bounds,
    search::write_trace_csv, vkg_eliminate_top_layer, AuxScheme, EgcVertex, Family, SearchBudget, SearchProblem,
};
use mdrd_core::scalable::total_rate::bss_source;
use mdrd_core::scalable::{
    bss_d2_star_closed_form, bss_d2_star_structured, d2_star, min_total_rate, rd_function, weak_independence,
    weak_independence_by_output, weak_independence_by_output_exact, weak_independence_exact, D2Options,
    ScalableInstance, SearchOptions,
};
use mdrd_core::strategy::{capacity_direct, capacity_strategy, strategy_from_frl};
use mdrd_core::suites::{
    bss_suite, egc_suite, elimination_suite, equivalence_suite, frl_suite, identity_suite, polymatroid_suite,
    strategy_suite, SuiteReport,
};
use mdrd_core::{Channel, DistortionMeasure, Error, JointPmf, Rational};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::input::{self, ChannelInput, FrlInput, SchemeInput, SourceInput, StateChannelInput};
use crate::{
    CliError, Cmd, CmdOutput, FrlCmd, Global, Mode, PsiCmd, RegionCmd, ScalableCmd, StrategyCmd, VerifyArgs,
    EXIT_SUITE_FAILED,
};

type Out = std::result::Result<CmdOutput, CliError>;

/// Global flags plus the bytes of every file read, for the digest.
pub struct Context {
    pub global: Global,
    pub files: Vec<Vec<u8>>,
}

impl Context {
    pub fn new(global: Global) -> Self {
        Self { global, files: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> std::result::Result<String, CliError> {
        let bytes = fs::read(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        self.files.push(bytes.clone());
        String::from_utf8(bytes)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })
    }

    fn rational(&self) -> bool {
        self.global.mode == Mode::Rational
    }
}

pub fn dispatch(ctx: &mut Context, cmd: &Cmd) -> Out {
    match cmd {
        Cmd::Frl(FrlCmd::Decompose { file, axes }) => frl_cmd(ctx, file, axes.as_deref()),
        Cmd::Psi(PsiCmd::Eval { file, subset, family }) => psi_eval(ctx, file, subset.as_deref(), family.as_deref()),
        Cmd::Psi(PsiCmd::Vertices { file, family, csv }) => psi_vertices(ctx, file, family.as_deref(), csv.as_deref()),
        Cmd::Region(RegionCmd::Eval { file, family, weights }) => {
            region_eval(ctx, file, family.as_deref(), weights.as_deref())
        }
        Cmd::Region(RegionCmd::Optimize { family, weights, distortions, cardinalities, source }) => {
            region_optimize(ctx, family, weights, distortions, cardinalities.as_deref(), source)
        }
        Cmd::Region(RegionCmd::Transform { file, vertex }) => region_transform(ctx, file, vertex.as_deref()),
        Cmd::Region(RegionCmd::Eliminate { file, pi, chain }) => region_eliminate(ctx, file, pi.as_deref(), *chain),
        Cmd::Region(RegionCmd::Weighted { file, weights, kind }) => region_weighted(ctx, file, weights, kind),
        Cmd::Scalable(ScalableCmd::Rd { source, distortion, d }) => scalable_rd(ctx, source, distortion, *d),
        Cmd::Scalable(ScalableCmd::TotalRate { source, r1, d1, d12 }) => total_rate(ctx, source, *r1, *d1, *d12),
        Cmd::Scalable(ScalableCmd::D2star { source, d1, d12, closed_form, structured, general: _, grid, cap }) => {
            d2star(ctx, source, *d1, *d12, *closed_form, *structured, *grid, *cap)
        }
        Cmd::Scalable(ScalableCmd::Weak { file }) => weak(ctx, file),
        Cmd::Strategy(StrategyCmd::Capacity { file, method }) => strategy_capacity(ctx, file, method),
        Cmd::Strategy(StrategyCmd::Frl { file }) => strategy_frl(ctx, file),
        Cmd::Verify(v) => verify(ctx, v),
    }
}

// ---- shared helpers ----

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// `{}` for the empty set, otherwise the member digits, e.g. `12`.
pub fn label(mask: u32) -> String {
    if mask == 0 {
        return "{}".into();
    }
    (0..32).filter(|i| mask >> i & 1 == 1).map(|i| (i + 1).to_string()).collect()
}

fn by_label<T: Serialize>(m: &BTreeMap<u32, T>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (label(*k), to_value(v))).collect())
}

fn subset_fn_json(f: &SubsetFn) -> Value {
    Value::Object((0..=f.full()).map(|k| (label(k), json!(f.get(k)))).collect())
}

fn pmf_json<T: Prob + JsonEntry>(p: &JointPmf<T>) -> Value {
    to_value(&PmfJson::from_pmf(p))
}

fn scheme_json<T: Prob + JsonEntry>(s: &AuxScheme<T>) -> Value {
    json!({
        "family": s.family,
        "l": s.l,
        "pmf": pmf_json(&s.joint),
        "decoders": by_label(&s.decoders),
    })
}

fn channel_json<T: Prob + JsonEntry>(ch: &Channel<T>) -> Value {
    let flat: Vec<T> = (0..ch.input_size()).flat_map(|r| ch.row(r).to_vec()).collect();
    json!({
        "inputs": ch.inputs(),
        "outputs": ch.outputs(),
        "rows": nest(&flat, &[ch.input_size(), ch.output_size()]),
    })
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>, Error> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::Parse { path: format!("--{flag}"), message: format!("cannot read `{t}`") })
        })
        .collect()
}

fn parse_family(s: &str) -> Result<Family, Error> {
    s.parse().map_err(|e: Error| Error::Parse { path: "--family".into(), message: e.to_string() })
}

fn flag_map<T: serde::de::DeserializeOwned>(flag: &str, text: &str, l: usize) -> Result<BTreeMap<u32, T>, Error> {
    let raw: BTreeMap<String, T> = input::parse(text).map_err(|e| match e {
        Error::Parse { path, message } => Error::Parse { path: format!("--{flag} {path}"), message },
        other => other,
    })?;
    raw.into_iter()
        .map(|(k, v)| {
            let m = parse_subset(&k, l)
                .map_err(|e| Error::Parse { path: format!("--{flag} $.{k}"), message: e.to_string() })?;
            Ok((m, v))
        })
        .collect()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn exact_distortions(s: &AuxScheme<Rational>, d: &DistortionMeasure) -> Result<BTreeMap<u32, Rational>, Error> {
    s.decoders.iter().map(|(&k, dec)| Ok((k, expected_distortion(&s.joint, d, dec)?))).collect()
}

fn rational_map(m: &BTreeMap<u32, Rational>) -> Value {
    Value::Object(m.iter().map(|(k, v)| (label(*k), v.to_json())).collect())
}

fn load_scheme(ctx: &mut Context, file: &Path) -> std::result::Result<SchemeInput, CliError> {
    let text = ctx.read(file)?;
    Ok(input::parse(&text)?)
}

fn load_source(ctx: &mut Context, source: &str) -> std::result::Result<(JointPmf<f64>, DistortionMeasure), CliError> {
    if source == "bss" {
        return Ok(bss_source());
    }
    let text = ctx.read(Path::new(source))?;
    let s: SourceInput = input::parse(&text)?;
    Ok(s.resolve()?)
}

fn vertices_json(f: &SubsetFn) -> Result<Value, Error> {
    Ok(Value::Array(
        permutations(f.l)
            .into_iter()
            .map(|pi| greedy_vertex(f, &pi).map(|v| json!({"permutation": v.permutation, "rates": v.rates})))
            .collect::<Result<_, _>>()?,
    ))
}

// ---- frl ----

fn frl_roles(spec: &str) -> Result<(Vec<String>, Vec<String>, Vec<String>), Error> {
    let groups: Vec<Vec<String>> = spec
        .split(',')
        .map(|g| g.split('+').map(str::trim).filter(|n| !n.is_empty() && *n != "-").map(String::from).collect())
        .collect();
    match groups.as_slice() {
        [v, w] => Ok((vec![], v.clone(), w.clone())),
        [u, v, w] => Ok((u.clone(), v.clone(), w.clone())),
        _ => Err(Error::Parse { path: "--axes".into(), message: "expected `U,V,W` or `V,W`".into() }),
    }
}

fn frl_cmd(ctx: &mut Context, file: &Path, axes: Option<&str>) -> Out {
    let text = ctx.read(file)?;
    let raw: Value = input::parse(&text)?;
    let (pmf, field, named, z) = if raw.get("pmf").is_some() {
        let f: FrlInput = input::parse(&text)?;
        let named = match (f.v, f.w) {
            (Some(v), Some(w)) => Some((vec![], v, w)),
            _ => None,
        };
        (f.pmf, "pmf", named, f.z)
    } else {
        (input::parse::<PmfJson>(&text)?, "", None, "Z".to_string())
    };
    let names: Vec<String> = pmf.axes.iter().map(|a| a.name.clone()).collect();
    let (u, v, w) = match (axes, named) {
        (Some(spec), _) => frl_roles(spec)?,
        (None, Some(r)) => r,
        (None, None) => match names.as_slice() {
            [v, w] => (vec![], vec![v.clone()], vec![w.clone()]),
            [u, v, w] => (vec![u.clone()], vec![v.clone()], vec![w.clone()]),
            _ => {
                return Err(Error::Parse {
                    path: "--axes".into(),
                    message: format!("{} axes; name the roles with --axes U,V,W", names.len()),
                }
                .into())
            }
        },
    };
    let reroot = |e: Error| if field.is_empty() { e } else { input::under(field, e) };
    let keep: Vec<String> = if axes.is_some() { u.iter().chain(&v).chain(&w).cloned().collect() } else { names };
    let (dec, report, snap_error, z_pmf): (FrlDecomposition, _, f64, Value) = if ctx.rational() {
        let p = pmf.to_exact().map_err(reroot)?.marginal_ordered(&keep)?;
        let dec = frl_decompose(&p, &v, &w, &z)?;
        let r = frl_verify(&p, &dec)?;
        let zp = Value::Array(dec.z_pmf.iter().map(JsonEntry::to_json).collect());
        (dec, r, 0.0, zp)
    } else {
        let p = pmf.to_float().map_err(reroot)?.marginal_ordered(&keep)?;
        let (dec, err) = frl_decompose_float(&p, &v, &w, &z)?;
        let r = frl_verify(&p, &dec)?;
        let zp = json!(dec.z_pmf_f64());
        (dec, r, err, zp)
    };
    let results = json!({
        "u": u,
        "v": v,
        "w": w,
        "z_size": dec.z_size(),
        "universal_bound": dec.universal_bound(),
        "z_pmf": z_pmf,
        "f": dec.f_rows(),
        "report": report,
        "snap_error": snap_error,
    });
    let residuals = json!({
        "independence_gap": report.independence_gap,
        "markov_gap": report.markov_gap,
        "reconstruction_error": report.reconstruction_error,
        "snap_error": snap_error,
    });
    Ok(CmdOutput::new(results, residuals))
}

// ---- psi ----

fn psi_of(ctx: &mut Context, file: &Path, family: Option<&str>) -> std::result::Result<SubsetFn, CliError> {
    let s = load_scheme(ctx, file)?;
    let flag = family.map(parse_family).transpose()?;
    let fam = if flag.is_none() && s.family.is_none() { Family::Vkg } else { s.family(flag)? };
    Ok(rate_bounds(&s.bare_float(fam)?)?)
}

fn psi_eval(ctx: &mut Context, file: &Path, subset: Option<&str>, family: Option<&str>) -> Out {
    let f = psi_of(ctx, file, family)?;
    let report = check_contra_polymatroid(&f, 1e-9)?;
    let mut results = json!({ "l": f.l, "psi": subset_fn_json(&f), "contra_polymatroid": report });
    if let Some(sub) = subset {
        let k = parse_subset(sub, f.l).map_err(|e| Error::Parse { path: "--subset".into(), message: e.to_string() })?;
        results["subset"] = json!(label(k));
        results["value"] = json!(f.get(k));
    }
    let residuals = json!({
        "normalization_violation": report.normalization_violation,
        "monotonicity_violation": report.monotonicity_violation,
        "supermodularity_violation": report.supermodularity_violation,
    });
    Ok(CmdOutput::new(results, residuals))
}

fn psi_vertices(ctx: &mut Context, file: &Path, family: Option<&str>, csv: Option<&Path>) -> Out {
    let f = psi_of(ctx, file, family)?;
    let verts = all_vertices(&f)?;
    let mut text = String::from("permutation");
    for k in 1..=f.l {
        text.push_str(&format!(",R{k}"));
    }
    text.push('\n');
    for v in &verts {
        let pi: Vec<String> = v.permutation.iter().map(usize::to_string).collect();
        text.push_str(&pi.join(" "));
        for r in &v.rates {
            text.push_str(&format!(",{}", crate::envelope::round_float(*r)));
        }
        text.push('\n');
    }
    if let Some(path) = csv {
        fs::write(path, &text).map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
    }
    let results = json!({ "l": f.l, "vertices": verts, "csv": text });
    let report = check_contra_polymatroid(&f, 1e-9)?;
    Ok(CmdOutput::new(results, json!({ "worst_polymatroid_violation": report.worst() })))
}

// ---- region ----

fn region_eval(ctx: &mut Context, file: &Path, family: Option<&str>, weights: Option<&str>) -> Out {
    let s = load_scheme(ctx, file)?;
    let fam = s.family(family.map(parse_family).transpose()?)?;
    let (scheme, d) = s.float_scheme(fam)?;
    let b = region_bounds(&scheme, &d)?;
    let report = check_contra_polymatroid(&b.bounds, 1e-9)?;
    let mut results = json!({
        "family": fam,
        "l": scheme.l,
        "rate_bounds": subset_fn_json(&b.bounds),
        "distortions": by_label(&b.distortions),
        "vertices": vertices_json(&b.bounds)?,
        "decoders": by_label(&scheme.decoders),
    });
    if let Some(w) = weights {
        let w: Vec<f64> = parse_list("weights", w)?;
        let (value, pi) = min_weighted_sum(&b.bounds, &w)?;
        results["weighted_sum"] = json!({ "weights": w, "value": value, "permutation": pi });
    }
    Ok(CmdOutput::new(results, json!({ "worst_polymatroid_violation": report.worst() })))
}

fn region_optimize(
    ctx: &mut Context,
    family: &str,
    weights: &str,
    distortions: &str,
    cardinalities: Option<&str>,
    source: &str,
) -> Out {
    let fam = parse_family(family)?;
    let w: Vec<f64> = parse_list("weights", weights)?;
    let l = fam.fixed_l().unwrap_or(w.len());
    fam.check_l(l)?;
    let targets: BTreeMap<u32, f64> = flag_map("distortions", distortions, l)?;
    let (src, d) = load_source(ctx, source)?;
    let mut problem = SearchProblem::new(src, d, fam, w.clone(), targets.clone());
    if let Some(c) = cardinalities {
        for (m, n) in flag_map::<usize>("cardinalities", c, l)? {
            problem = problem.with_cardinality(m, n);
        }
    }
    let g = &ctx.global;
    let budget = SearchBudget {
        restarts: g.restarts.unwrap_or(SearchBudget::default().restarts),
        iterations: g.budget.unwrap_or(SearchBudget::default().iterations),
        seed: g.seed,
    };
    let out = optimize_weighted_sum(&problem, &budget)?;
    if let Some(path) = &g.trace {
        let f = fs::File::create(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        write_trace_csv(&out.trace, f)?;
    }
    let excess: BTreeMap<u32, f64> =
        targets.iter().map(|(k, t)| (*k, (out.bounds.distortions.get(k).copied().unwrap_or(f64::INFINITY) - t).max(0.0))).collect();
    let worst = excess.values().copied().fold(0.0, f64::max);
    let results = json!({
        "value": out.value,
        "restart": out.restart,
        "weights": w,
        "targets": by_label(&targets),
        "budget": budget,
        "scheme": scheme_json(&out.scheme),
        "rate_bounds": subset_fn_json(&out.bounds.bounds),
        "distortions": by_label(&out.bounds.distortions),
    });
    Ok(CmdOutput::new(results, json!({ "distortion_excess": by_label(&excess), "max_distortion_excess": worst })))
}

fn region_transform(ctx: &mut Context, file: &Path, vertex: Option<&str>) -> Out {
    let s = load_scheme(ctx, file)?;
    let fam = if s.family.is_none() { Family::Egc } else { s.family(None)? };
    let (exact, d, snap_error) = s.exact_scheme(fam, ctx.rational())?;
    let before_rates = egc_point(&exact.to_float(), &d)?;
    let before_d = exact_distortions(&exact, &d)?;
    let which: Vec<EgcVertex> = match vertex {
        Some("v1") => vec![EgcVertex::V1],
        Some(_) => vec![EgcVertex::V2],
        None => vec![EgcVertex::V1, EgcVertex::V2],
    };
    let mut items = Vec::new();
    let (mut rate_gap, mut distortion_gap) = (0.0f64, 0.0f64);
    let mut distortions_equal = true;
    for v in which {
        let pi = if v == EgcVertex::V1 { [1, 2] } else { [2, 1] };
        let t = egc_vertex_to_egc_star(&exact, v)?;
        let after = egc_star_point(&t.to_float(), &d)?;
        let (rb, ra) = (before_rates.vertex(&pi)?.rates, after.vertex(&pi)?.rates);
        let after_d = exact_distortions(&t, &d)?;
        rate_gap = rate_gap.max(max_gap(&rb, &ra));
        distortions_equal &= after_d == before_d;
        for (k, x) in &after_d {
            if let Some(y) = before_d.get(k) {
                distortion_gap = distortion_gap.max((x.to_f64() - y.to_f64()).abs());
            }
        }
        items.push(json!({
            "vertex": v,
            "scheme": scheme_json(&t),
            "rates_before": rb,
            "rates_after": ra,
            "distortions_before": rational_map(&before_d),
            "distortions_after": rational_map(&after_d),
        }));
    }
    let residuals = json!({
        "rate_gap": rate_gap,
        "distortion_gap": distortion_gap,
        "distortions_equal": distortions_equal,
        "snap_error": snap_error,
    });
    Ok(CmdOutput::new(json!({ "transforms": items }), residuals))
}

fn region_eliminate(ctx: &mut Context, file: &Path, pi: Option<&str>, chain: bool) -> Out {
    let s = load_scheme(ctx, file)?;
    let fam = if s.family.is_none() { Family::Vkg } else { s.family(None)? };
    let (exact, d, snap_error) = s.exact_scheme(fam, ctx.rational())?;
    let before = rate_bounds(&exact.to_float())?;
    if chain {
        let e = eliminate_to_singletons(&exact)?;
        let after = rate_bounds(&e.scheme.to_float())?;
        let id: Vec<usize> = (1..=exact.l).collect();
        let (rb, ra) = (greedy_vertex(&before, &id)?.rates, greedy_vertex(&after, &id)?.rates);
        let drops = e.rate_drops();
        let corner: Vec<f64> = ra.iter().zip(&drops).map(|(a, x)| a + x).collect();
        let steps: Vec<Value> = e
            .steps
            .iter()
            .map(|st| json!({ "layer": label(st.layer), "host": st.host, "z_size": st.z_size, "dropped": st.dropped }))
            .collect();
        let results = json!({
            "scheme": scheme_json(&e.scheme),
            "steps": steps,
            "removed_decoders": e.removed_decoders.iter().map(|k| label(*k)).collect::<Vec<_>>(),
            "rates_before": rb,
            "rates_after": ra,
            "rate_drops": drops,
        });
        let residuals = json!({ "corner_identity_gap": max_gap(&rb, &corner), "snap_error": snap_error });
        return Ok(CmdOutput::new(results, residuals));
    }
    let order: Vec<usize> = match pi {
        Some(p) => parse_list("pi", p)?,
        None => (1..=exact.l).collect(),
    };
    let out = vkg_eliminate_top_layer(&exact, &order)?;
    let target = if exact.l == 2 { out.as_family(Family::Zb)? } else { out };
    let after = rate_bounds(&target.to_float())?;
    let (rb, ra) = (greedy_vertex(&before, &order)?.rates, greedy_vertex(&after, &order)?.rates);
    let (bd, ad) = (exact_distortions(&exact, &d)?, exact_distortions(&target, &d)?);
    let distortion_gap = ad
        .iter()
        .filter_map(|(k, x)| bd.get(k).map(|y| (x.to_f64() - y.to_f64()).abs()))
        .fold(0.0, f64::max);
    let results = json!({
        "permutation": order,
        "scheme": scheme_json(&target),
        "rates_before": rb,
        "rates_after": ra,
        "distortions_before": rational_map(&bd),
        "distortions_after": rational_map(&ad),
    });
    let residuals = json!({ "rate_gap": max_gap(&rb, &ra), "distortion_gap": distortion_gap, "snap_error": snap_error });
    Ok(CmdOutput::new(results, residuals))
}

fn region_weighted(ctx: &mut Context, file: &Path, weights: &str, kind: &str) -> Out {
    let s = load_scheme(ctx, file)?;
    let w: Vec<f64> = parse_list("weights", weights)?;
    let joint = input::float_pmf(&s.pmf, "pmf")?;
    let value = match kind {
        "ih" => ih_weighted_sum_rate(&joint, &w)?,
        "hierarchical" => ih_hierarchical_sum_rate(&joint, &w)?,
        "ic" => ic_weighted_sum_rate(&joint, &w, false)?,
        _ => ic_weighted_sum_rate(&joint, &w, true)?,
    };
    Ok(CmdOutput::new(json!({ "kind": kind, "weights": w, "value": value }), json!({})))
}

// ---- scalable ----

fn instance_source(
    ctx: &mut Context,
    source: &str,
    distortion: &str,
) -> std::result::Result<(JointPmf<f64>, DistortionMeasure), CliError> {
    if distortion != "hamming" {
        return Err(Error::Parse {
            path: "--distortion".into(),
            message: format!("unknown measure `{distortion}`; give a table in the source file"),
        }
        .into());
    }
    load_source(ctx, source)
}

fn scalable_rd(ctx: &mut Context, source: &str, distortion: &str, target: f64) -> Out {
    let (src, d) = instance_source(ctx, source, distortion)?;
    let p = rd_function(&src, &d, target)?;
    let mut results = json!({
        "target": p.target,
        "rate": p.rate,
        "distortion": p.distortion,
        "clamped": p.clamped,
        "test_channel": channel_json(&p.test_channel),
    });
    if source == "bss" {
        let reference = if target >= 0.5 { 0.0 } else { 1.0 - binary_entropy(target.max(0.0)) };
        results["reference"] = json!(reference);
    }
    Ok(CmdOutput::new(results, json!({ "distortion_excess": (p.distortion - target).max(0.0) })))
}

fn total_rate(ctx: &mut Context, source: &str, r1: Option<f64>, d1: f64, d12: f64) -> Out {
    let (src, d) = load_source(ctx, source)?;
    let r1 = match r1 {
        Some(r) => r,
        None => rd_function(&src, &d, d1)?.rate,
    };
    let inst = ScalableInstance::new(src, d, r1, d1, d12)?;
    let opts = SearchOptions {
        restarts: ctx.global.restarts.unwrap_or(SearchOptions::default().restarts),
        seed: ctx.global.seed,
        ..SearchOptions::default()
    };
    let t = min_total_rate(&inst, &opts)?;
    let results = json!({
        "r1": r1,
        "d1": d1,
        "d12": d12,
        "rate": t.rate,
        "restart": t.restart,
        "joint": pmf_json(&t.joint),
    });
    let residuals = json!({
        "coarse_rate": t.residuals[0],
        "coarse_distortion": t.residuals[1],
        "combined_distortion": t.residuals[2],
    });
    Ok(CmdOutput::new(results, residuals))
}

#[allow(clippy::too_many_arguments)]
fn d2star(ctx: &mut Context, source: &str, d1: f64, d12: f64, closed: bool, structured: bool, grid: f64, cap: usize) -> Out {
    if closed || structured {
        if source != "bss" {
            return Err(Error::Domain("the closed form and the structured search cover the binary source only".into()).into());
        }
        let reference = bss_d2_star_closed_form(d1, d12)?;
        if closed {
            return Ok(CmdOutput::new(
                json!({ "method": "closed-form", "value": reference, "d1": d1, "d12": d12 }),
                json!({}),
            ));
        }
        let s = bss_d2_star_structured(d1, d12, grid)?;
        let results = json!({
            "method": "structured",
            "value": s.value,
            "d1": d1,
            "d12": d12,
            "grid": grid,
            "grid_points": s.grid_points,
            "p": s.p,
            "alpha1": s.alpha1,
            "alpha4": s.alpha4,
            "closed_form": reference,
        });
        let residuals = json!({ "closed_form_gap": (s.value - reference).abs(), "formula_gap": s.formula_gap });
        return Ok(CmdOutput::new(results, residuals));
    }
    let (src, d) = load_source(ctx, source)?;
    let inst = ScalableInstance::new(src, d, 0.0, d1, d12)?;
    let opts = D2Options::new(cap, ctx.global.restarts.unwrap_or(16), ctx.global.seed);
    let r = d2_star(&inst, &opts)?;
    let mut results = json!({
        "method": "general",
        "value": r.value,
        "d1": d1,
        "d12": d12,
        "cap": cap,
        "rate_d1": r.rate_d1,
        "total_rate": r.total_rate,
        "witness": {
            "joint": pmf_json(&r.witness.joint),
            "g1": r.witness.g1,
            "g2": r.witness.g2,
        },
        "weakly_independent": r.weakly_independent,
        "weakly_independent_by_output": r.weakly_independent_by_output,
        "rigorous": r.rigorous,
        "label": if r.rigorous { "rigorous" } else { "hypothesis-unchecked" },
        "short_circuit": r.short_circuit,
        "restart": r.restart,
    });
    if source == "bss" {
        if let Ok(c) = bss_d2_star_closed_form(d1, d12) {
            results["closed_form"] = json!(c);
        }
    }
    let residuals = json!({
        "independence": r.residuals.independence,
        "coarse_rate": r.residuals.coarse_rate,
        "total_rate": r.residuals.total_rate,
        "coarse_distortion": r.residuals.coarse_distortion,
        "combined_distortion": r.residuals.combined_distortion,
    });
    Ok(CmdOutput::new(results, residuals))
}

fn weak(ctx: &mut Context, file: &Path) -> Out {
    let text = ctx.read(file)?;
    let c: ChannelInput = input::parse(&text)?;
    let (by_input, by_output) = if ctx.rational() {
        let ch = c.exact("")?;
        (weak_independence_exact(&ch), weak_independence_by_output_exact(&ch))
    } else {
        let ch = c.float("")?;
        (weak_independence(&ch), weak_independence_by_output(&ch))
    };
    Ok(CmdOutput::new(
        json!({ "weakly_independent": by_input, "weakly_independent_by_output": by_output }),
        json!({}),
    ))
}

// ---- strategy ----

fn strategy_capacity(ctx: &mut Context, file: &Path, method: &str) -> Out {
    let text = ctx.read(file)?;
    let s: StateChannelInput = input::parse(&text)?;
    let ch = s.channel()?;
    let mut results = Map::new();
    let direct = (method != "shannon").then(|| capacity_direct(&ch));
    let shannon = if method != "direct" { Some(capacity_strategy(&ch)?) } else { None };
    if let Some(d) = &direct {
        results.insert("direct".into(), to_value(d));
    }
    if let Some(s) = &shannon {
        results.insert("shannon".into(), to_value(s));
    }
    let residuals = match (&direct, &shannon) {
        (Some(d), Some(s)) => json!({ "capacity_gap": (d.value - s.value).abs() }),
        _ => json!({}),
    };
    Ok(CmdOutput::new(Value::Object(results), residuals))
}

fn strategy_frl(ctx: &mut Context, file: &Path) -> Out {
    let text = ctx.read(file)?;
    let s: StateChannelInput = input::parse(&text)?;
    let ch = s.channel()?;
    let law = match s.input_law()? {
        Some(l) => l,
        None => capacity_direct(&ch).input_channel(&ch)?,
    };
    let f = strategy_from_frl(&law, &ch)?;
    let residuals = json!({
        "rate_gap": (f.value - f.direct).abs(),
        "independence_gap": f.independence_gap,
        "snap_error": f.snap_error,
    });
    Ok(CmdOutput::new(to_value(&f), residuals))
}

// ---- verify ----

fn verify(ctx: &mut Context, v: &VerifyArgs) -> Out {
    let seed = ctx.global.seed;
    let c = |default: usize| v.cases.unwrap_or(default);
    let general = v.general.then(|| ctx.global.restarts.unwrap_or(64));
    let names: Vec<&str> = if v.suite == "all" {
        vec!["frl", "polymatroid", "equivalence", "bss", "strategy"]
    } else {
        vec![v.suite.as_str()]
    };
    let reports: Vec<SuiteReport> = names
        .into_iter()
        .map(|n| match n {
            "frl" => frl_suite(seed, c(500)),
            "polymatroid" => polymatroid_suite(seed, c(200)),
            "egc" => egc_suite(seed, c(100)),
            "elimination" => elimination_suite(seed, c(100), v.cases.map_or(20, |n| (n / 5).max(1))),
            "identity" => identity_suite(seed, c(100)),
            "equivalence" => equivalence_suite(seed),
            "bss" => bss_suite(seed, v.grid, general),
            _ => strategy_suite(seed, c(50)),
        })
        .collect();
    let failed: usize = reports.iter().map(|r| r.failed).sum();
    let passed = reports.iter().all(SuiteReport::passes);
    let mut out = CmdOutput::new(
        json!({ "passed": passed, "suites": reports }),
        json!({ "failed_cases": failed }),
    );
    if !passed {
        out.code = EXIT_SUITE_FAILED;
    }
    Ok(out)
}
