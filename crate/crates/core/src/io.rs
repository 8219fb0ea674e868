//! JSON model files, analysis reports, and certificate replay.
//!
//! Every document carries `"version": "1"`. Rational literals are strings
//! such as `"1/3"`, `"0.25"` or `"-2"`; plain JSON integers are also accepted.
//! Exact reports write rationals as `p/q`, float reports write shortest
//! round-trip decimals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::convex::{build_cp_silp, ConvexOutcome, ConvexProgram, OmegaSpec};
use crate::duality::{
    extract_dual_certificate, lift_primal, regular_duality_report, Confidence, LEstimate, ModelAnalysis, RegularBranch,
    Tri, Verdict,
};
use crate::expr::Expr;
use crate::farkas::{FarkasAnswer, FarkasCertificate, FarkasVerdict};
use crate::model::{Domain, Family, GridRule, GridSchedule, RowId, SilpModel};
use crate::scalar::{parse_rational, render_rational, Ext, Rational, Scalar};

pub const FORMAT_VERSION: &str = "1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IoError {
    #[error("parse error at line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("invalid document: {0}")]
    Invalid(String),
}

impl From<serde_json::Error> for IoError {
    fn from(e: serde_json::Error) -> Self {
        IoError::Syntax { line: e.line(), column: e.column(), msg: e.to_string() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
enum Lit {
    Int(i64),
    Text(String),
}

impl Lit {
    fn of(r: &Rational) -> Lit {
        Lit::Text(render_rational(r))
    }

    fn value(&self, ctx: &str) -> Result<Rational, IoError> {
        match self {
            Lit::Int(v) => Ok(Rational::from_integer((*v).into())),
            Lit::Text(s) => parse_rational(s).ok_or_else(|| IoError::Invalid(format!("{}: `{}` is not a rational literal", ctx, s))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Silp,
    Convex,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: String,
    kind: Kind,
    name: String,
    variables: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    objective: BTreeMap<String, Lit>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    rows: Vec<RowDto>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    families: Vec<FamilyDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<ScheduleDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    convex: Option<ConvexDto>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowDto {
    name: String,
    coeffs: BTreeMap<String, Lit>,
    rhs: Lit,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyDto {
    name: String,
    parameter: String,
    domain: DomainDto,
    coeffs: BTreeMap<String, String>,
    rhs: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum DomainDto {
    HalfLine { lo: Lit },
    Interval { lo: Lit, hi: Lit },
    Integers { start: Lit },
    Points { points: Vec<Lit> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
enum GridDto {
    Geometric { ratio: Lit, levels: u32 },
    Uniform { base: u64 },
    IntegerPrefix { base: u64 },
    IntegerRange { step: u64 },
    Explicit { points: Vec<Lit> },
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stages: Option<usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    grids: BTreeMap<String, GridDto>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    deltas: Option<Vec<Lit>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvexDto {
    objective: String,
    #[serde(default)]
    constraints: Vec<String>,
    omega: OmegaDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cap: Option<Lit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stage: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OmegaDto {
    Points { points: Vec<Vec<Lit>> },
    BoxGrid { lo: Vec<Lit>, hi: Vec<Lit>, count: usize },
}

/// A parsed model file.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelDoc {
    Silp(SilpModel),
    Convex { program: ConvexProgram, stage: usize },
}

impl ModelDoc {
    pub fn name(&self) -> &str {
        match self {
            ModelDoc::Silp(m) => &m.name,
            ModelDoc::Convex { program, .. } => &program.name,
        }
    }

    /// The semi-infinite program to analyse; for convex files the sampled program.
    pub fn silp(&self) -> crate::error::Result<SilpModel> {
        match self {
            ModelDoc::Silp(m) => Ok(m.clone()),
            ModelDoc::Convex { program, stage } => build_cp_silp(program, *stage),
        }
    }
}

fn expr(text: &str, ctx: &str) -> Result<Expr, IoError> {
    Expr::parse(text).map_err(|e| IoError::Invalid(format!("{}: {}", ctx, e)))
}

fn lits(v: &[Lit], ctx: &str) -> Result<Vec<Rational>, IoError> {
    v.iter().enumerate().map(|(i, l)| l.value(&format!("{}[{}]", ctx, i))).collect()
}

fn check_vars<'a>(vars: &[String], keys: impl Iterator<Item = &'a String>, ctx: &str) -> Result<(), IoError> {
    for k in keys {
        if !vars.contains(k) {
            return Err(IoError::Invalid(format!("{}: unknown variable `{}`", ctx, k)));
        }
    }
    Ok(())
}

pub fn parse_model(text: &str) -> Result<ModelDoc, IoError> {
    let file: ModelFile = serde_json::from_str(text)?;
    if file.version != FORMAT_VERSION {
        return Err(IoError::Invalid(format!("unsupported version `{}`", file.version)));
    }
    match file.kind {
        Kind::Silp => parse_silp(file).map(ModelDoc::Silp),
        Kind::Convex => parse_convex(file),
    }
}

fn parse_silp(file: ModelFile) -> Result<SilpModel, IoError> {
    let vars = &file.variables;
    check_vars(vars, file.objective.keys(), "objective")?;
    let objective = vars
        .iter()
        .map(|v| file.objective.get(v).map_or(Ok(Rational::from_integer(0.into())), |l| l.value("objective")))
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&str> = vars.iter().map(|s| s.as_str()).collect();
    let mut model = SilpModel::new(&file.name, &refs, objective);
    for (i, r) in file.rows.iter().enumerate() {
        let ctx = format!("rows[{}]", i);
        check_vars(vars, r.coeffs.keys(), &ctx)?;
        let coeffs = r
            .coeffs
            .iter()
            .map(|(k, l)| Ok((k.as_str(), l.value(&ctx)?)))
            .collect::<Result<Vec<_>, IoError>>()?;
        model.add_row(&r.name, &coeffs, r.rhs.value(&ctx)?).map_err(|e| IoError::Invalid(format!("{}: {}", ctx, e)))?;
    }
    for (i, f) in file.families.iter().enumerate() {
        let ctx = format!("families[{}]", i);
        check_vars(vars, f.coeffs.keys(), &ctx)?;
        let domain = match &f.domain {
            DomainDto::HalfLine { lo } => Domain::HalfLine { lo: lo.value(&ctx)? },
            DomainDto::Interval { lo, hi } => Domain::Interval { lo: lo.value(&ctx)?, hi: hi.value(&ctx)? },
            DomainDto::Integers { start } => {
                let s = start.value(&ctx)?;
                if !s.is_integer() {
                    return Err(IoError::Invalid(format!("{}: integer domain needs an integer start", ctx)));
                }
                Domain::Integers { start: s.to_integer() }
            }
            DomainDto::Points { points } => Domain::Points(lits(points, &ctx)?),
        };
        let mut coeffs = Vec::with_capacity(vars.len());
        for v in vars {
            coeffs.push(match f.coeffs.get(v) {
                Some(text) => expr(text, &format!("{}.coeffs.{}", ctx, v))?,
                None => Expr::lit(Rational::from_integer(0.into())),
            });
        }
        let fam = Family {
            name: f.name.clone(),
            parameter: f.parameter.clone(),
            domain,
            coeffs,
            rhs: expr(&f.rhs, &format!("{}.rhs", ctx))?,
        };
        model.families.push(fam);
    }
    if let Some(s) = &file.schedule {
        model.schedule = schedule_from(s)?;
    }
    model.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(model)
}

fn schedule_from(s: &ScheduleDto) -> Result<GridSchedule, IoError> {
    let mut out = GridSchedule::default();
    if let Some(n) = s.stages {
        out.stages = n;
    }
    for (name, g) in &s.grids {
        let ctx = format!("schedule.grids.{}", name);
        let rule = match g {
            GridDto::Geometric { ratio, levels } => GridRule::Geometric { ratio: ratio.value(&ctx)?, levels: *levels },
            GridDto::Uniform { base } => GridRule::Uniform { base: *base },
            GridDto::IntegerPrefix { base } => GridRule::IntegerPrefix { base: *base },
            GridDto::IntegerRange { step } => GridRule::IntegerRange { step: *step },
            GridDto::Explicit { points } => GridRule::Explicit(lits(points, &ctx)?),
        };
        out.grids.insert(name.clone(), rule);
    }
    if let Some(d) = &s.deltas {
        out.deltas = lits(d, "schedule.deltas")?;
    }
    Ok(out)
}

fn parse_convex(file: ModelFile) -> Result<ModelDoc, IoError> {
    let c = file.convex.as_ref().ok_or_else(|| IoError::Invalid("convex model without a `convex` section".into()))?;
    if !file.rows.is_empty() || !file.families.is_empty() || !file.objective.is_empty() {
        return Err(IoError::Invalid("convex models take rows from the `convex` section only".into()));
    }
    let omega = match &c.omega {
        OmegaDto::Points { points } => OmegaSpec::Points(
            points.iter().enumerate().map(|(i, p)| lits(p, &format!("convex.omega.points[{}]", i))).collect::<Result<_, _>>()?,
        ),
        OmegaDto::BoxGrid { lo, hi, count } => {
            OmegaSpec::BoxGrid { lo: lits(lo, "convex.omega.lo")?, hi: lits(hi, "convex.omega.hi")?, count: *count }
        }
    };
    let program = ConvexProgram {
        name: file.name.clone(),
        variables: file.variables.clone(),
        objective: expr(&c.objective, "convex.objective")?,
        constraints: c
            .constraints
            .iter()
            .enumerate()
            .map(|(i, g)| expr(g, &format!("convex.constraints[{}]", i)))
            .collect::<Result<_, _>>()?,
        omega,
        cap: c.cap.as_ref().map(|l| l.value("convex.cap")).transpose()?,
    };
    program.validate().map_err(|e| IoError::Invalid(e.to_string()))?;
    Ok(ModelDoc::Convex { program, stage: c.stage.unwrap_or(1) })
}

pub fn serialize_model(doc: &ModelDoc) -> String {
    let file = match doc {
        ModelDoc::Silp(m) => silp_file(m),
        ModelDoc::Convex { program, stage } => convex_file(program, *stage),
    };
    serde_json::to_string_pretty(&file).expect("model documents serialize")
}

fn silp_file(m: &SilpModel) -> ModelFile {
    let named = |vals: &[Rational]| -> BTreeMap<String, Lit> {
        m.variables.iter().zip(vals).filter(|(_, v)| !Scalar::is_zero(*v)).map(|(k, v)| (k.clone(), Lit::of(v))).collect()
    };
    let rows = m.rows.iter().map(|r| RowDto { name: r.name.clone(), coeffs: named(&r.coeffs), rhs: Lit::of(&r.rhs) }).collect();
    let families = m
        .families
        .iter()
        .map(|f| FamilyDto {
            name: f.name.clone(),
            parameter: f.parameter.clone(),
            domain: match &f.domain {
                Domain::HalfLine { lo } => DomainDto::HalfLine { lo: Lit::of(lo) },
                Domain::Interval { lo, hi } => DomainDto::Interval { lo: Lit::of(lo), hi: Lit::of(hi) },
                Domain::Integers { start } => DomainDto::Integers { start: Lit::Text(start.to_string()) },
                Domain::Points(p) => DomainDto::Points { points: p.iter().map(Lit::of).collect() },
            },
            coeffs: m
                .variables
                .iter()
                .zip(&f.coeffs)
                .filter(|(_, e)| e.as_literal().is_none_or(|v| !Scalar::is_zero(v)))
                .map(|(k, e)| (k.clone(), e.to_string()))
                .collect(),
            rhs: f.rhs.to_string(),
        })
        .collect();
    let grids = m
        .schedule
        .grids
        .iter()
        .map(|(k, g)| {
            let dto = match g {
                GridRule::Geometric { ratio, levels } => GridDto::Geometric { ratio: Lit::of(ratio), levels: *levels },
                GridRule::Uniform { base } => GridDto::Uniform { base: *base },
                GridRule::IntegerPrefix { base } => GridDto::IntegerPrefix { base: *base },
                GridRule::IntegerRange { step } => GridDto::IntegerRange { step: *step },
                GridRule::Explicit(p) => GridDto::Explicit { points: p.iter().map(Lit::of).collect() },
            };
            (k.clone(), dto)
        })
        .collect();
    ModelFile {
        version: FORMAT_VERSION.into(),
        kind: Kind::Silp,
        name: m.name.clone(),
        variables: m.variables.clone(),
        objective: named(&m.objective),
        rows,
        families,
        schedule: Some(ScheduleDto {
            stages: Some(m.schedule.stages),
            grids,
            deltas: Some(m.schedule.deltas.iter().map(Lit::of).collect()),
        }),
        convex: None,
    }
}

fn convex_file(p: &ConvexProgram, stage: usize) -> ModelFile {
    let omega = match &p.omega {
        OmegaSpec::Points(pts) => OmegaDto::Points { points: pts.iter().map(|x| x.iter().map(Lit::of).collect()).collect() },
        OmegaSpec::BoxGrid { lo, hi, count } => OmegaDto::BoxGrid {
            lo: lo.iter().map(Lit::of).collect(),
            hi: hi.iter().map(Lit::of).collect(),
            count: *count,
        },
    };
    ModelFile {
        version: FORMAT_VERSION.into(),
        kind: Kind::Convex,
        name: p.name.clone(),
        variables: p.variables.clone(),
        objective: BTreeMap::new(),
        rows: Vec::new(),
        families: Vec::new(),
        schedule: None,
        convex: Some(ConvexDto {
            objective: p.objective.to_string(),
            constraints: p.constraints.iter().map(|g| g.to_string()).collect(),
            omega,
            cap: p.cap.as_ref().map(Lit::of),
            stage: Some(stage),
        }),
    }
}

fn num<S: Scalar>(v: &S) -> Value {
    Value::String(v.render())
}

fn ext<S: Scalar>(v: &Ext<S>) -> Value {
    Value::String(v.render())
}

fn nums<S: Scalar>(v: &[S]) -> Value {
    Value::Array(v.iter().map(num).collect())
}

fn mult_map<S: Scalar>(v: &[(RowId, S)]) -> Value {
    let mut m = Map::new();
    for (id, w) in v {
        m.insert(id.label(), num(w));
    }
    Value::Object(m)
}

pub fn tri_str(t: Tri) -> &'static str {
    match t {
        Tri::Yes => "yes",
        Tri::No => "no",
        Tri::Unknown => "unknown",
    }
}

pub fn confidence_str(c: Confidence) -> &'static str {
    match c {
        Confidence::Exact => "exact",
        Confidence::Converged => "converged",
        Confidence::Inconclusive => "inconclusive",
    }
}

fn tri_v(v: &Verdict<Tri>) -> Value {
    json!({"value": tri_str(v.value), "confidence": confidence_str(v.confidence)})
}

fn ext_v<S: Scalar>(v: &Verdict<Ext<S>>) -> Value {
    json!({"value": ext(&v.value), "confidence": confidence_str(v.confidence)})
}

fn mode_str<S: Scalar>() -> &'static str {
    if S::EXACT {
        "exact"
    } else {
        "float"
    }
}

/// The full duality report for an analysed model.
pub fn analysis_report<S: Scalar>(model: &SilpModel, a: &ModelAnalysis<S>) -> Value {
    let stages: Vec<Value> = a
        .stages
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let omega: Vec<Value> =
                a.deltas.iter().zip(&a.omega_table[k]).map(|(d, w)| json!({"delta": num(d), "value": ext(w)})).collect();
            json!({
                "stage": k + 1,
                "rows": st.system.len() - 1,
                "derived_rows": st.result.rows.len(),
                "partition": {
                    "i1": st.partition.i1.len(),
                    "i2": st.partition.i2.len(),
                    "i3": st.partition.i3.len(),
                    "i4": st.partition.i4.len(),
                },
                "S": ext(&st.diagnostics.s),
                "delta2": ext(&st.diagnostics.delta2),
                "i1_max": ext(&st.diagnostics.i1_max),
                "omega": omega,
                "ell": st.result.ell(),
                "dirty": st.result.dirty.iter().map(|&k| model.variables[k].clone()).collect::<Vec<_>>(),
                "tidy": st.result.is_tidy(),
            })
        })
        .collect();
    let l = match &a.l {
        LEstimate::ExactMinusInfinity => json!({"status": "exact_minus_infinity", "value": "-inf"}),
        LEstimate::Converged { value } => json!({"status": "converged", "value": ext(value), "tol": num(&a.l_tol)}),
        LEstimate::Inconclusive { lo, hi } => json!({"status": "inconclusive", "lo": ext(lo), "hi": ext(hi)}),
    };
    let v = &a.verdicts;
    let verdicts = json!({
        "primal_feasible": tri_v(&v.primal_feasible),
        "primal_bounded": tri_v(&v.primal_bounded),
        "primal_value": ext_v(&v.primal_value),
        "primal_solvable": tri_v(&v.primal_solvable),
        "dual_feasible": tri_v(&v.dual_feasible),
        "dual_bounded": tri_v(&v.dual_bounded),
        "dual_value": ext_v(&v.dual_value),
        "dual_solvable": tri_v(&v.dual_solvable),
        "zero_gap": tri_v(&v.zero_gap),
        "strong_duality": tri_v(&v.strong_duality),
        "tidy": tri_v(&v.tidy),
    });
    let regular = regular_duality_report(a);
    let branch = match &regular.branch {
        RegularBranch::Certificate(_) => "certificate",
        RegularBranch::Sequence(_) => "sequence",
        RegularBranch::Infeasible => "infeasible",
        RegularBranch::Unresolved => "unresolved",
    };
    json!({
        "version": FORMAT_VERSION,
        "report": "analysis",
        "model": model.name,
        "provenance": {
            "mode": mode_str::<S>(),
            "stages": a.stages.len(),
            "deltas": nums(&a.deltas),
            "tool_version": env!("CARGO_PKG_VERSION"),
        },
        "stages": stages,
        "diagnostics": {
            "L": l,
            "S_sequence": a.s_seq.iter().map(ext).collect::<Vec<_>>(),
            "delta2_sequence": a.delta2_seq.iter().map(ext).collect::<Vec<_>>(),
            "S_diverging": a.s_diverging,
            "delta2_diverging": a.delta2_diverging,
            "i4_ratio_diverging": a.iv_diverging,
            "primal_value": ext(&v.primal_value.value),
            "dual_value": ext(&v.dual_value.value),
            "regular_duality": {"z_star": ext(&regular.z_star), "branch": branch},
            "invariant_violations": a.invariant_violations(),
        },
        "verdicts": verdicts,
        "certificates": analysis_certificates(a, &regular.branch),
    })
}

fn analysis_certificates<S: Scalar>(a: &ModelAnalysis<S>, branch: &RegularBranch<S>) -> Vec<Value> {
    let mut out = Vec::new();
    for (k, st) in a.stages.iter().enumerate() {
        let stage = k + 1;
        if !st.diagnostics.stage_feasible(&st.tol) {
            if let Some(pos) = st.diagnostics.i1_pos {
                let r = &st.result.rows[pos];
                let u = r.mult.without(0).scaled(&(S::one() / r.row.rhs.clone())).labelled(&st.system);
                out.push(json!({"name": format!("infeasibility@stage{}", stage), "kind": "infeasibility",
                    "stage": stage, "multiplier": mult_map(&u)}));
            }
            continue;
        }
        if let Some(c) = extract_dual_certificate(st) {
            out.push(json!({"name": format!("dual@stage{}", stage), "kind": "dual", "stage": stage,
                "row_id": c.row_id, "value": num(&c.value), "multiplier": mult_map(&c.v)}));
        }
    }
    let last = a.last();
    if last.diagnostics.stage_feasible(&last.tol) {
        if let Ok(w) = lift_primal(last, None) {
            out.push(json!({"name": format!("primal@stage{}", a.stages.len()), "kind": "primal",
                "stage": a.stages.len(), "x": nums(&w.x), "z": num(&w.z), "delta": num(&w.delta)}));
        }
    }
    if let RegularBranch::Sequence(seq) = branch {
        let c: Vec<S> = last.c.clone();
        for (m, e) in seq.elements.iter().enumerate() {
            let free = last.result.free_vars();
            let mut image = c.clone();
            for (j, &k) in free.iter().enumerate() {
                image[k] = image[k].clone() + e.coeffs[j].clone();
            }
            out.push(json!({"name": format!("sequence[{}]", m), "kind": "sequence_term", "delta": num(&e.delta),
                "row_id": e.row_id, "value": num(&e.value), "coeffs": nums(&image),
                "max_coeff": num(&e.max_coeff), "multiplier": mult_map(&e.v)}));
        }
    }
    out
}

pub fn farkas_str(v: FarkasVerdict) -> &'static str {
    match v {
        FarkasVerdict::Yes => "yes",
        FarkasVerdict::No => "no",
        FarkasVerdict::YesInLimit => "yes_in_limit",
        FarkasVerdict::YesWithinTolerance => "yes_within_tolerance",
    }
}

pub fn farkas_report<S: Scalar>(model: &SilpModel, c: &[S], d: &S, stage: usize, ans: &FarkasAnswer<S>) -> Value {
    let mut certs = Vec::new();
    match &ans.certificate {
        Some(FarkasCertificate::ExactCone { u, lambda0 }) => certs.push(json!({"name": "exact_cone", "kind": "exact_cone",
            "c": nums(c), "d": num(d), "lambda0": num(lambda0), "multiplier": mult_map(u)})),
        Some(FarkasCertificate::InfeasibleCone { u }) => {
            certs.push(json!({"name": "infeasible_cone", "kind": "infeasibility", "multiplier": mult_map(u)}))
        }
        Some(FarkasCertificate::ClosureSequence { target, target_rhs, terms }) => {
            for (m, t) in terms.iter().enumerate() {
                certs.push(json!({"name": format!("closure[{}]", m), "kind": "closure_term", "target": nums(target),
                    "target_rhs": num(target_rhs), "coeffs": nums(&t.coeffs), "value": num(&t.rhs),
                    "residual": num(&t.residual), "multiplier": mult_map(&t.u)}));
            }
        }
        None => {}
    }
    if let Some(x) = &ans.counterexample {
        certs.push(json!({"name": "counterexample", "kind": "counterexample", "stage": stage, "x": nums(x), "c": nums(c), "d": num(d)}));
    }
    json!({
        "version": FORMAT_VERSION,
        "report": "farkas",
        "model": model.name,
        "provenance": {"mode": mode_str::<S>(), "stages": stage, "tool_version": env!("CARGO_PKG_VERSION")},
        "query": {"c": nums(c), "d": num(d)},
        "verdict": farkas_str(ans.verdict),
        "z_star": ext(&ans.z_star),
        "certificates": certs,
    })
}

pub fn convex_report<S: Scalar>(out: &ConvexOutcome<S>) -> Value {
    let mut report = analysis_report(&out.model, &out.analysis);
    let lag = out.lagrangian.as_ref().map(|l| {
        json!({
            "lambda": nums(&l.lambda),
            "sigma": num(&l.sigma),
            "L_value": num(&l.l_value),
            "x_bar": nums(&l.x_bar),
            "weights": l.weights.iter().map(|(x, w)| json!({"x": x.iter().map(render_rational).collect::<Vec<_>>(), "u": num(w)})).collect::<Vec<_>>(),
        })
    });
    report["convex"] = json!({
        "slater_point": out.slater.as_ref().map(|x| x.iter().map(render_rational).collect::<Vec<_>>()),
        "slater_prediction_holds": out.slater_prediction_holds,
        "sample_scan": out.sample_scan.render(),
        "weak_duality_holds": out.weak_duality_holds,
        "lagrangian": lag,
    });
    report
}

/// Outcome of replaying one certificate.
#[derive(Clone, Debug, PartialEq)]
pub struct CertCheck {
    pub name: String,
    pub outcome: Result<(), String>,
}

struct Replay<'a> {
    model: &'a SilpModel,
    exact: bool,
}

impl Replay<'_> {
    fn close(&self, a: &Rational, b: &Rational) -> bool {
        if self.exact {
            return a == b;
        }
        let scale = a.abs().max(b.abs()).max(Rational::from_integer(1.into()));
        (a - b).abs() <= scale * Rational::new(1.into(), 1_000_000.into())
    }

    fn le(&self, a: &Rational, b: &Rational) -> bool {
        a <= b || self.close(a, b)
    }

    fn rat(v: &Value, what: &str) -> Result<Rational, String> {
        v.as_str().and_then(parse_rational).ok_or_else(|| format!("`{}` is not a rational", what))
    }

    fn vec(v: &Value, what: &str) -> Result<Vec<Rational>, String> {
        v.as_array().ok_or_else(|| format!("`{}` is not a list", what))?.iter().map(|x| Self::rat(x, what)).collect()
    }

    fn image(&self, mult: &Value) -> Result<(Vec<Rational>, Rational), String> {
        let obj = mult.as_object().ok_or("multiplier is not an object")?;
        let n = self.model.n();
        let mut coeffs = vec![Rational::from_integer(0.into()); n];
        let mut rhs = Rational::from_integer(0.into());
        for (label, w) in obj {
            let w = Self::rat(w, label)?;
            if w.is_negative() {
                return Err(format!("negative weight on {}", label));
            }
            let id = RowId::parse_label(label).ok_or_else(|| format!("bad row label {}", label))?;
            let row = self.model.row_by_id::<Rational>(&id).map_err(|e| format!("{}: {}", label, e))?;
            for k in 0..n {
                coeffs[k] += &w * &row.coeffs[k];
            }
            rhs += &w * &row.rhs;
        }
        Ok((coeffs, rhs))
    }

    fn same(&self, a: &[Rational], b: &[Rational], what: &str) -> Result<(), String> {
        if a.len() != b.len() {
            return Err(format!("{} has the wrong length", what));
        }
        for (k, (x, y)) in a.iter().zip(b).enumerate() {
            if !self.close(x, y) {
                return Err(format!("{} differs in column {}: {} vs {}", what, k, render_rational(x), render_rational(y)));
            }
        }
        Ok(())
    }

    fn point_feasible(&self, stage: usize, x: &[Rational]) -> Result<(), String> {
        let sys = self.model.instantiate_stage::<Rational>(stage).map_err(|e| e.to_string())?;
        if x.len() != self.model.n() {
            return Err("point has the wrong length".into());
        }
        for (id, row) in sys.ids.iter().zip(&sys.rows) {
            let lhs: Rational = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            if !self.le(&row.rhs, &lhs) {
                return Err(format!("point violates {}", id));
            }
        }
        Ok(())
    }

    fn check(&self, cert: &Value) -> Result<(), String> {
        let kind = cert["kind"].as_str().ok_or("missing kind")?;
        let zero = vec![Rational::from_integer(0.into()); self.model.n()];
        match kind {
            "dual" => {
                let (coeffs, rhs) = self.image(&cert["multiplier"])?;
                self.same(&coeffs, &self.model.objective, "sum v a against c")?;
                if !self.close(&rhs, &Self::rat(&cert["value"], "value")?) {
                    return Err("sum v b differs from the stated value".into());
                }
                Ok(())
            }
            "infeasibility" => {
                let (coeffs, rhs) = self.image(&cert["multiplier"])?;
                self.same(&coeffs, &zero, "sum u a")?;
                if !self.close(&rhs, &Rational::from_integer(1.into())) {
                    return Err("sum u b is not 1".into());
                }
                Ok(())
            }
            "primal" => {
                let stage = cert["stage"].as_u64().ok_or("missing stage")? as usize;
                let x = Self::vec(&cert["x"], "x")?;
                self.point_feasible(stage, &x)?;
                let cx: Rational = self.model.objective.iter().zip(&x).map(|(a, b)| a * b).sum();
                if !self.le(&cx, &Self::rat(&cert["z"], "z")?) {
                    return Err("objective exceeds z".into());
                }
                Ok(())
            }
            "sequence_term" => {
                let (coeffs, rhs) = self.image(&cert["multiplier"])?;
                self.same(&coeffs, &Self::vec(&cert["coeffs"], "coeffs")?, "sum v a")?;
                if !self.close(&rhs, &Self::rat(&cert["value"], "value")?) {
                    return Err("sum v b differs from the stated value".into());
                }
                Ok(())
            }
            "exact_cone" => {
                let (coeffs, rhs) = self.image(&cert["multiplier"])?;
                self.same(&coeffs, &Self::vec(&cert["c"], "c")?, "sum u a against c")?;
                let l0 = Self::rat(&cert["lambda0"], "lambda0")?;
                if l0.is_negative() {
                    return Err("negative slack".into());
                }
                if !self.close(&(rhs - l0), &Self::rat(&cert["d"], "d")?) {
                    return Err("sum u b - lambda0 differs from d".into());
                }
                Ok(())
            }
            "closure_term" => {
                let (coeffs, rhs) = self.image(&cert["multiplier"])?;
                let stated = Self::vec(&cert["coeffs"], "coeffs")?;
                self.same(&coeffs, &stated, "sum u a")?;
                if !self.close(&rhs, &Self::rat(&cert["value"], "value")?) {
                    return Err("sum u b differs from the stated value".into());
                }
                let target = Self::vec(&cert["target"], "target")?;
                let gap = coeffs.iter().zip(&target).map(|(a, b)| (a - b).abs()).max().unwrap_or_default();
                if !self.close(&gap, &Self::rat(&cert["residual"], "residual")?) {
                    return Err("stated residual does not match".into());
                }
                Ok(())
            }
            "counterexample" => {
                let stage = cert["stage"].as_u64().ok_or("missing stage")? as usize;
                let x = Self::vec(&cert["x"], "x")?;
                self.point_feasible(stage, &x)?;
                let c = Self::vec(&cert["c"], "c")?;
                let cx: Rational = c.iter().zip(&x).map(|(a, b)| a * b).sum();
                if cx >= Self::rat(&cert["d"], "d")? {
                    return Err("point does not violate the query".into());
                }
                Ok(())
            }
            other => Err(format!("unknown certificate kind `{}`", other)),
        }
    }
}

/// Replays every certificate in `report` against `model` by direct summation.
pub fn certify(report: &Value, model: &SilpModel) -> Result<Vec<CertCheck>, IoError> {
    if report["version"].as_str() != Some(FORMAT_VERSION) {
        return Err(IoError::Invalid("report without version \"1\"".into()));
    }
    let exact = match report["provenance"]["mode"].as_str() {
        Some("exact") => true,
        Some("float") => false,
        _ => return Err(IoError::Invalid("report provenance lacks a mode".into())),
    };
    let certs = report["certificates"].as_array().ok_or_else(|| IoError::Invalid("report has no certificate list".into()))?;
    let r = Replay { model, exact };
    let mut out = Vec::with_capacity(certs.len());
    let mut closure_prev: Option<Rational> = None;
    for (i, c) in certs.iter().enumerate() {
        let name = c["name"].as_str().map(str::to_string).unwrap_or_else(|| format!("certificate[{}]", i));
        let mut outcome = r.check(c);
        if outcome.is_ok() && c["kind"] == "closure_term" {
            let res = Replay::rat(&c["residual"], "residual").expect("checked above");
            if closure_prev.as_ref().is_some_and(|p| !r.le(&res, p)) {
                outcome = Err("residual grows along the sequence".into());
            }
            closure_prev = Some(res);
        }
        out.push(CertCheck { name, outcome });
    }
    Ok(out)
}
