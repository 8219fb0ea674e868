//! Sampled convex programs `max f(x) s.t. g_i(x) >= 0` turned into the
//! semi-infinite program over `(sigma, lambda)` whose value is the Lagrangian
//! dual bound, together with Slater scans and dual recovery.
//!
//! Concavity of `f` and every `g_i` is assumed, not checked.

use std::collections::BTreeMap;

use crate::duality::{analyze_model, extract_dual_certificate, lift_primal, AnalysisConfig, ModelAnalysis, Tri};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::{RowId, SilpModel};
use crate::scalar::{rat, render_rational, Ext, Rational, Scalar};

pub const SIGMA: &str = "sigma";

#[derive(Clone, Debug, PartialEq)]
pub enum OmegaSpec {
    Points(Vec<Vec<Rational>>),
    /// `count` evenly spaced values per axis at stage 1; stage `s` uses
    /// `(count - 1) * 2^(s-1) + 1`.
    BoxGrid { lo: Vec<Rational>, hi: Vec<Rational>, count: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexProgram {
    pub name: String,
    pub variables: Vec<String>,
    pub objective: Expr,
    pub constraints: Vec<Expr>,
    pub omega: OmegaSpec,
    pub cap: Option<Rational>,
}

pub fn lambda_name(i: usize) -> String {
    format!("lambda{}", i + 1)
}

pub fn sample_label(x: &[Rational]) -> String {
    let parts: Vec<String> = x.iter().map(render_rational).collect();
    format!("omega@({})", parts.join(","))
}

impl ConvexProgram {
    pub fn p(&self) -> usize {
        self.constraints.len()
    }

    pub fn validate(&self) -> Result<()> {
        let known = |e: &Expr| e.symbols().into_iter().find(|s| !self.variables.contains(s));
        for e in std::iter::once(&self.objective).chain(&self.constraints) {
            if let Some(s) = known(e) {
                return Err(Error::Precondition(format!("unknown symbol `{}` in `{}`", s, e)));
            }
        }
        let m = self.variables.len();
        match &self.omega {
            OmegaSpec::Points(pts) => {
                if pts.is_empty() || pts.iter().any(|p| p.len() != m) {
                    return Err(Error::Precondition("sample points must be nonempty and match the variables".into()));
                }
            }
            OmegaSpec::BoxGrid { lo, hi, count } => {
                if lo.len() != m || hi.len() != m || *count == 0 || lo.iter().zip(hi).any(|(a, b)| a > b) {
                    return Err(Error::Precondition("bad box grid".into()));
                }
            }
        }
        Ok(())
    }

    /// Sample points in input order; grids run with the first variable outermost.
    pub fn samples(&self, stage: usize) -> Vec<Vec<Rational>> {
        match &self.omega {
            OmegaSpec::Points(p) => p.clone(),
            OmegaSpec::BoxGrid { lo, hi, count } => {
                let per = if *count <= 1 { 1 } else { (count - 1) * (1usize << (stage.max(1) - 1)) + 1 };
                let axes: Vec<Vec<Rational>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| {
                        if per == 1 {
                            vec![a.clone()]
                        } else {
                            let step = (b - a) / Rational::from_integer((per as i64 - 1).into());
                            (0..per).map(|j| a + &step * Rational::from_integer((j as i64).into())).collect()
                        }
                    })
                    .collect();
                let mut out: Vec<Vec<Rational>> = vec![Vec::new()];
                for axis in &axes {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            axis.iter().map(move |v| {
                                let mut p = prefix.clone();
                                p.push(v.clone());
                                p
                            })
                        })
                        .collect();
                }
                out
            }
        }
    }

    fn eval(&self, e: &Expr, x: &[Rational]) -> Result<Rational> {
        let lookup = |s: &str| self.variables.iter().position(|v| v == s).map(|i| x[i].clone());
        Ok(e.eval::<Rational>(&lookup)?)
    }

    pub fn f_at(&self, x: &[Rational]) -> Result<Rational> {
        self.eval(&self.objective, x)
    }

    pub fn g_at(&self, x: &[Rational]) -> Result<Vec<Rational>> {
        self.constraints.iter().map(|g| self.eval(g, x)).collect()
    }

    /// The configured cap, or one more than the largest sampled `f`.
    pub fn effective_cap(&self, samples: &[Vec<Rational>]) -> Result<Rational> {
        if let Some(b) = &self.cap {
            return Ok(b.clone());
        }
        let mut best: Option<Rational> = None;
        for x in samples {
            let f = self.f_at(x)?;
            best = Some(match best {
                Some(b) if b >= f => b,
                _ => f,
            });
        }
        Ok(best.unwrap_or_else(|| rat(0, 1)) + rat(1, 1))
    }
}

/// `min sigma s.t. sigma - sum lambda_i g_i(x) >= min(f(x), B)` for every
/// sample, and `lambda >= 0`.
pub fn build_cp_silp(cp: &ConvexProgram, stage: usize) -> Result<SilpModel> {
    cp.validate()?;
    let samples = cp.samples(stage);
    let cap = cp.effective_cap(&samples)?;
    let mut names: Vec<String> = vec![SIGMA.to_string()];
    names.extend((0..cp.p()).map(lambda_name));
    let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let mut objective = vec![rat(0, 1); names.len()];
    objective[0] = rat(1, 1);
    let mut model = SilpModel::new(&cp.name, &refs, objective);
    for x in &samples {
        let f = cp.f_at(x)?;
        let rhs = if f > cap { cap.clone() } else { f };
        let g = cp.g_at(x)?;
        let mut coeffs: Vec<(&str, Rational)> = vec![(SIGMA, rat(1, 1))];
        for (i, gi) in g.iter().enumerate() {
            coeffs.push((refs[i + 1], -gi.clone()));
        }
        model.add_row(&sample_label(x), &coeffs, rhs)?;
    }
    for i in 0..cp.p() {
        model.add_row(&format!("{}>=0", lambda_name(i)), &[(refs[i + 1], rat(1, 1))], rat(0, 1))?;
    }
    Ok(model)
}

/// First sample with every `g_i` strictly positive (above `1e-6` in float mode).
pub fn slater_scan(cp: &ConvexProgram, stage: usize, exact: bool) -> Result<Option<Vec<Rational>>> {
    let eps = if exact { rat(0, 1) } else { rat(1, 1_000_000) };
    for x in cp.samples(stage) {
        if cp.g_at(&x)?.iter().all(|g| g > &eps) {
            return Ok(Some(x));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug)]
pub struct LagrangianSolution<S> {
    pub lambda: Vec<S>,
    pub sigma: S,
    /// `max_x f(x) + sum lambda_i g_i(x)` over the samples.
    pub l_value: S,
    pub x_bar: Vec<S>,
    /// Dual weights on the sample rows.
    pub weights: Vec<(Vec<Rational>, S)>,
}

/// Reads `lambda*` from an optimal point of the sampled program and the
/// primal point `x_bar = sum u(x) x` from its dual certificate.
pub fn recover_lagrangian<S: Scalar>(
    cp: &ConvexProgram,
    stage: usize,
    analysis: &ModelAnalysis<S>,
) -> Result<LagrangianSolution<S>> {
    let st = analysis.last();
    let cert = extract_dual_certificate(st).ok_or_else(|| Error::Precondition("dual infeasible".into()))?;
    let point = lift_primal(st, None)?;
    let sigma = point.x[0].clone();
    let lambda: Vec<S> = point.x[1..].to_vec();

    let samples = cp.samples(stage);
    let cap = cp.effective_cap(&samples)?;
    let by_label: BTreeMap<String, &Vec<Rational>> = samples.iter().map(|x| (sample_label(x), x)).collect();
    let mut l_value: Option<S> = None;
    for x in &samples {
        let f = cp.f_at(x)?;
        let f = if f > cap { cap.clone() } else { f };
        let g = cp.g_at(x)?;
        let mut v = S::from_rational(&f);
        for (li, gi) in lambda.iter().zip(&g) {
            v = v + li.clone() * S::from_rational(gi);
        }
        l_value = Some(match l_value {
            Some(b) => S::max_of(b, v),
            None => v,
        });
    }
    let m = cp.variables.len();
    let mut x_bar = vec![S::zero(); m];
    let mut total = S::zero();
    let mut weights = Vec::new();
    for (id, w) in &cert.v {
        let RowId::Atom(name) = id else { continue };
        let Some(x) = by_label.get(name) else { continue };
        for k in 0..m {
            x_bar[k] = x_bar[k].clone() + w.clone() * S::from_rational(&x[k]);
        }
        total = total + w.clone();
        weights.push(((*x).clone(), w.clone()));
    }
    if !total.near(&S::one(), &st.tol) {
        return Err(Error::Verification(format!("sample weights sum to {}", total)));
    }
    Ok(LagrangianSolution { lambda, sigma, l_value: l_value.unwrap_or_else(S::zero), x_bar, weights })
}

#[derive(Clone, Debug)]
pub struct ConvexOutcome<S> {
    pub model: SilpModel,
    pub analysis: ModelAnalysis<S>,
    pub slater: Option<Vec<Rational>>,
    /// With a Slater point and a feasible stage: tidy, zero gap and dual
    /// solvability all reported Yes.
    pub slater_prediction_holds: Option<bool>,
    /// Largest `f` over sampled points with every `g_i >= 0`.
    pub sample_scan: Ext<Rational>,
    pub weak_duality_holds: bool,
    pub lagrangian: Option<LagrangianSolution<S>>,
}

pub fn run_convex<S: Scalar>(cp: &ConvexProgram, stage: usize, config: &AnalysisConfig) -> Result<ConvexOutcome<S>> {
    let model = build_cp_silp(cp, stage)?;
    let analysis: ModelAnalysis<S> = analyze_model(&model, config)?;
    let slater = slater_scan(cp, stage, S::EXACT)?;
    let v = &analysis.verdicts;
    let slater_prediction_holds = match (&slater, v.primal_feasible.value) {
        (Some(_), Tri::Yes) => {
            Some(v.tidy.value == Tri::Yes && v.zero_gap.value == Tri::Yes && v.dual_solvable.value == Tri::Yes)
        }
        _ => None,
    };
    let mut sample_scan = Ext::NegInf;
    for x in cp.samples(stage) {
        if cp.g_at(&x)?.iter().all(|g| g >= &rat(0, 1)) {
            sample_scan = sample_scan.max(Ext::Finite(cp.f_at(&x)?));
        }
    }
    let weak_duality_holds = !v.dual_value.value.gt(&v.primal_value.value);
    let lagrangian = recover_lagrangian(cp, stage, &analysis).ok();
    Ok(ConvexOutcome { model, analysis, slater, slater_prediction_holds, sample_scan, weak_duality_holds, lagrangian })
}
