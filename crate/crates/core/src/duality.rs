//! Duality diagnostics from the augmented elimination.
//!
//! The objective is folded into the system as row 0, `-c x + z >= 0`, and
//! every row other than the ones built from it keeps `z` coefficient 0.
//! After elimination the final rows split into
//!
//! * `I1`: `z` coefficient 0, no free coefficients
//! * `I2`: `z` coefficient 0, some free coefficient
//! * `I3`: `z` coefficient 1, no free coefficients
//! * `I4`: `z` coefficient 1, some free coefficient
//!
//! and the verdicts follow from `S = sup_I3 b~`, `delta2 = sup_I2 b~ / sum|a~|`,
//! `omega(delta) = sup_I4 (b~ - delta sum|a~|)` and `L = lim omega(delta)`.

use crate::approx::flags_divergence;
use crate::error::{Error, Result};
use crate::fm::{back_substitute, run_elimination, EliminationOptions, EliminationResult};
use crate::feasibility::build_xdelta;
use crate::model::{FiniteSystem, LinearRow, RowId, SilpModel};
use crate::scalar::{Ext, Rational, Scalar, Sign, Tolerance};

pub fn build_augmented<S: Scalar>(system: &FiniteSystem<S>, c: &[S]) -> FiniteSystem<S> {
    let mut aug = FiniteSystem::new(system.vars.clone());
    aug.augmented = true;
    aug.push(RowId::Objective, LinearRow { coeffs: c.iter().map(|v| -v.clone()).collect(), z: S::one(), rhs: S::zero() });
    for (id, row) in system.ids.iter().zip(&system.rows) {
        aug.push(id.clone(), LinearRow { coeffs: row.coeffs.clone(), z: S::zero(), rhs: row.rhs.clone() });
    }
    aug
}

/// Positions into the final rows, each list in increasing row id.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Partition {
    pub i1: Vec<usize>,
    pub i2: Vec<usize>,
    pub i3: Vec<usize>,
    pub i4: Vec<usize>,
}

pub fn partition_indices<S: Scalar>(result: &EliminationResult<S>, tol: &Tolerance) -> Partition {
    let free = result.free_vars();
    let mut p = Partition::default();
    for (pos, r) in result.rows.iter().enumerate() {
        let scale = S::max_of(r.row.scale(), S::one());
        let has_free = free.iter().any(|&k| r.row.coeffs[k].sign(&scale, tol) != Sign::Zero);
        match (r.row.z.is_zero(), has_free) {
            (true, false) => p.i1.push(pos),
            (true, true) => p.i2.push(pos),
            (false, false) => p.i3.push(pos),
            (false, true) => p.i4.push(pos),
        }
    }
    p
}

#[derive(Clone, Debug)]
pub struct StageDiagnostics<S> {
    /// `sup_I3 b~` and its first maximiser.
    pub s: Ext<S>,
    pub s_pos: Option<usize>,
    pub delta2: Ext<S>,
    /// `max_I1 b~`; a positive value means the stage is infeasible.
    pub i1_max: Ext<S>,
    pub i1_pos: Option<usize>,
    /// `sup_I4 b~ / (sum|a~| + 1)`.
    pub iv_ratio: Ext<S>,
    /// `(b~, sum|a~|, position)` for every I4 row.
    pub omega_rows: Vec<(S, S, usize)>,
}

impl<S: Scalar> StageDiagnostics<S> {
    /// `omega(delta)` with its first maximiser (smallest row id on ties).
    pub fn omega(&self, delta: &S) -> (Ext<S>, Option<usize>) {
        let mut best = Ext::NegInf;
        let mut arg = None;
        for (b, w, pos) in &self.omega_rows {
            let v = Ext::Finite(b.clone() - delta.clone() * w.clone());
            if v.gt(&best) {
                best = v;
                arg = Some(*pos);
            }
        }
        (best, arg)
    }

    pub fn stage_feasible(&self, tol: &Tolerance) -> bool {
        match &self.i1_max {
            Ext::Finite(v) => v.sign(&S::max_of(v.abs(), S::one()), tol) != Sign::Positive,
            _ => true,
        }
    }
}

fn sup_over<S: Scalar, F: Fn(&LinearRow<S>) -> S>(
    result: &EliminationResult<S>,
    rows: &[usize],
    f: F,
) -> (Ext<S>, Option<usize>) {
    let mut best = Ext::NegInf;
    let mut arg = None;
    for &pos in rows {
        let v = Ext::Finite(f(&result.rows[pos].row));
        if v.gt(&best) {
            best = v;
            arg = Some(pos);
        }
    }
    (best, arg)
}

pub fn compute_diagnostics<S: Scalar>(result: &EliminationResult<S>, part: &Partition) -> StageDiagnostics<S> {
    let free = result.free_vars();
    let (s, s_pos) = sup_over(result, &part.i3, |r| r.rhs.clone());
    let (delta2, _) = sup_over(result, &part.i2, |r| r.rhs.clone() / r.abs_sum(&free));
    let (i1_max, i1_pos) = sup_over(result, &part.i1, |r| r.rhs.clone());
    let (iv_ratio, _) = sup_over(result, &part.i4, |r| r.rhs.clone() / (r.abs_sum(&free) + S::one()));
    let omega_rows = part
        .i4
        .iter()
        .map(|&pos| {
            let r = &result.rows[pos].row;
            (r.rhs.clone(), r.abs_sum(&free), pos)
        })
        .collect();
    StageDiagnostics { s, s_pos, delta2, i1_max, i1_pos, iv_ratio, omega_rows }
}

#[derive(Clone, Debug)]
pub struct StageAnalysis<S> {
    /// The augmented system (objective row at index 0).
    pub system: FiniteSystem<S>,
    pub c: Vec<S>,
    pub result: EliminationResult<S>,
    pub partition: Partition,
    pub diagnostics: StageDiagnostics<S>,
    pub tol: Tolerance,
}

pub fn analyze_stage<S: Scalar>(system: &FiniteSystem<S>, c: &[S], opts: &EliminationOptions) -> Result<StageAnalysis<S>> {
    if c.len() != system.n() {
        return Err(Error::Precondition(format!("objective has {} entries for {} variables", c.len(), system.n())));
    }
    let aug = build_augmented(system, c);
    let result = run_elimination(&aug, opts)?;
    let partition = partition_indices(&result, &opts.tol);
    let diagnostics = compute_diagnostics(&result, &partition);
    Ok(StageAnalysis { system: aug, c: c.to_vec(), result, partition, diagnostics, tol: opts.tol })
}

/// Value of the finite LP of one stage: `+inf` if infeasible, `-inf` if
/// unbounded, otherwise `S`.
pub fn stage_primal_value<S: Scalar>(stage: &StageAnalysis<S>) -> Ext<S> {
    if !stage.diagnostics.stage_feasible(&stage.tol) {
        Ext::PosInf
    } else {
        stage.diagnostics.s.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate<S> {
    /// Id of the maximising I3 row.
    pub row_id: usize,
    pub value: S,
    /// The row multiplier without the objective entry, over original row ids.
    pub v: Vec<(RowId, S)>,
}

/// The multiplier of the first I3 row attaining `S`, restricted to the
/// original rows. It satisfies `sum v(i) a(i) = c` and `sum v(i) b(i) = S`.
pub fn extract_dual_certificate<S: Scalar>(stage: &StageAnalysis<S>) -> Option<DualCertificate<S>> {
    let pos = stage.diagnostics.s_pos?;
    let r = &stage.result.rows[pos];
    let v = r.mult.without(0).labelled(&stage.system);
    Some(DualCertificate { row_id: r.id, value: r.row.rhs.clone(), v })
}

/// Re-sums a dual certificate against rows supplied by `row_of`.
pub fn replay_dual_certificate<S: Scalar>(
    cert: &DualCertificate<S>,
    c: &[S],
    row_of: &dyn Fn(&RowId) -> Option<LinearRow<S>>,
    tol: &Tolerance,
) -> std::result::Result<(), String> {
    let n = c.len();
    let mut lhs = vec![S::zero(); n];
    let mut value = S::zero();
    for (id, v) in &cert.v {
        if v.is_negative() {
            return Err(format!("negative weight on {}", id));
        }
        let row = row_of(id).ok_or_else(|| format!("unknown row {}", id))?;
        for k in 0..n {
            lhs[k] = lhs[k].clone() + v.clone() * row.coeffs[k].clone();
        }
        value = value + v.clone() * row.rhs.clone();
    }
    for k in 0..n {
        if !lhs[k].near(&c[k], tol) {
            return Err(format!("column {}: sum v a = {} but c = {}", k, lhs[k], c[k]));
        }
    }
    if !value.near(&cert.value, tol) {
        return Err(format!("sum v b = {} but certificate value is {}", value, cert.value));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalWitness<S> {
    pub x: Vec<S>,
    pub z: S,
    pub delta: S,
}

/// Lifts `(x(delta), z)` to a point of the augmented stage. Without a target
/// `z`, uses `S` when finite (an optimal point at a finite stage).
pub fn lift_primal<S: Scalar>(stage: &StageAnalysis<S>, z_target: Option<S>) -> Result<PrimalWitness<S>> {
    let d = &stage.diagnostics;
    if !d.stage_feasible(&stage.tol) {
        return Err(Error::Precondition("stage is infeasible".into()));
    }
    let mut delta = match &d.delta2 {
        Ext::Finite(v) => S::max_of(v.clone(), S::zero()),
        _ => S::zero(),
    };
    let z = match (z_target, &d.s) {
        (Some(z), _) => z,
        (None, Ext::Finite(s)) => s.clone(),
        (None, _) => {
            let probe = delta.clone() + S::one();
            match d.omega(&probe).0 {
                Ext::Finite(w) => w,
                _ => S::zero(),
            }
        }
    };
    if let Ext::Finite(s) = &d.s {
        if z < *s {
            return Err(Error::Precondition(format!("z = {} is below S = {}", z, s)));
        }
    }
    for (b, w, _) in &d.omega_rows {
        let need = (b.clone() - z.clone()) / w.clone();
        delta = S::max_of(delta, need);
    }
    let mut h2 = stage.partition.i2.clone();
    h2.extend(&stage.partition.i4);
    let free = build_xdelta(&stage.result, &h2, &delta);
    let x = back_substitute(&stage.result, &free, &z, &stage.tol)?;
    let bad = stage.system.violations(&x, &z, &stage.tol);
    if let Some(&i) = bad.first() {
        return Err(Error::Verification(format!("lifted point violates row {}", stage.system.ids[i])));
    }
    Ok(PrimalWitness { x, z, delta })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tri {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Confidence {
    Exact,
    Converged,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdict<T> {
    pub value: T,
    pub confidence: Confidence,
}

fn verdict<T>(value: T, confidence: Confidence) -> Verdict<T> {
    Verdict { value, confidence }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LEstimate<S> {
    /// Finite system: `omega(delta) -> -inf`.
    ExactMinusInfinity,
    Converged { value: Ext<S> },
    /// `omega_last(delta_max)` and `omega_last(delta_max / 2)`.
    Inconclusive { lo: Ext<S>, hi: Ext<S> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Verdicts<S> {
    pub primal_feasible: Verdict<Tri>,
    pub primal_bounded: Verdict<Tri>,
    pub primal_value: Verdict<Ext<S>>,
    pub primal_solvable: Verdict<Tri>,
    pub dual_feasible: Verdict<Tri>,
    pub dual_bounded: Verdict<Tri>,
    pub dual_value: Verdict<Ext<S>>,
    pub dual_solvable: Verdict<Tri>,
    pub zero_gap: Verdict<Tri>,
    pub strong_duality: Verdict<Tri>,
    pub tidy: Verdict<Tri>,
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    pub stages: usize,
    pub deltas: Vec<Rational>,
    pub elimination: EliminationOptions,
    /// Gap used by the `L` convergence test and the `S` versus `L` comparison.
    pub l_tol: Rational,
}

impl AnalysisConfig {
    pub fn for_model(model: &SilpModel, exact: bool) -> Self {
        AnalysisConfig {
            stages: if model.is_finite() { 1 } else { model.schedule.stages },
            deltas: model.schedule.deltas.clone(),
            elimination: EliminationOptions::default(),
            l_tol: if exact { crate::scalar::rat(1, 1000) } else { crate::scalar::rat(1, 1_000_000) },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelAnalysis<S> {
    pub finite: bool,
    pub stages: Vec<StageAnalysis<S>>,
    pub deltas: Vec<S>,
    pub l_tol: S,
    pub s_seq: Vec<Ext<S>>,
    pub delta2_seq: Vec<Ext<S>>,
    pub iv_seq: Vec<Ext<S>>,
    /// `omega_s(delta_m)`, indexed `[stage][m]`.
    pub omega_table: Vec<Vec<Ext<S>>>,
    pub s_diverging: bool,
    pub delta2_diverging: bool,
    pub iv_diverging: bool,
    pub l: LEstimate<S>,
    pub verdicts: Verdicts<S>,
}

impl<S: Scalar> ModelAnalysis<S> {
    pub fn last(&self) -> &StageAnalysis<S> {
        self.stages.last().expect("at least one stage")
    }

    /// Checks the partition shape, monotonicity of `omega` in `delta` and
    /// of `S_s`, `omega_s(delta)` across stages. Returns one message per failure.
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let tol = &self.l_tol;
        let le = |a: &Ext<S>, b: &Ext<S>| -> bool {
            match (a, b) {
                (Ext::Finite(x), Ext::Finite(y)) => {
                    if S::EXACT {
                        x <= y
                    } else {
                        x.clone() <= y.clone() + tol.clone()
                    }
                }
                _ => a.cmp_ext(b) != std::cmp::Ordering::Greater,
            }
        };
        for (k, st) in self.stages.iter().enumerate() {
            let p = &st.partition;
            if p.i3.is_empty() && p.i4.is_empty() {
                out.push(format!("stage {}: no row carries z", k + 1));
            }
            for &pos in p.i1.iter().chain(&p.i2) {
                if !st.result.rows[pos].mult.get(0).is_zero() {
                    out.push(format!("stage {}: z-free row uses the objective", k + 1));
                }
            }
            for &pos in p.i3.iter().chain(&p.i4) {
                let u0 = st.result.rows[pos].mult.get(0);
                if !u0.near(&S::one(), &st.tol) {
                    out.push(format!("stage {}: objective weight {} on a z row", k + 1, u0));
                }
            }
            let row = &self.omega_table[k];
            if row.windows(2).any(|w| !le(&w[1], &w[0])) {
                out.push(format!("stage {}: omega increases in delta", k + 1));
            }
        }
        // Nested stages only grow the row set; S_s is compared while the stage stays feasible.
        for k in 1..self.stages.len() {
            let feasible = self.stages[k].diagnostics.stage_feasible(&self.stages[k].tol);
            if feasible && !le(&self.s_seq[k - 1], &self.s_seq[k]) {
                out.push(format!("S decreases from stage {} to {}", k, k + 1));
            }
            for (m, d) in self.deltas.iter().enumerate() {
                if !le(&self.omega_table[k - 1][m], &self.omega_table[k][m]) {
                    out.push(format!("omega({}) decreases from stage {} to {}", d, k, k + 1));
                }
            }
        }
        out
    }

    pub fn infeasible_stage(&self) -> Option<usize> {
        self.stages.iter().position(|s| !s.diagnostics.stage_feasible(&s.tol)).map(|p| p + 1)
    }
}

fn ext_close<S: Scalar>(a: &Ext<S>, b: &Ext<S>, tol: &S) -> bool {
    match (a, b) {
        (Ext::Finite(x), Ext::Finite(y)) => (x.clone() - y.clone()).abs() <= *tol,
        (Ext::NegInf, Ext::NegInf) | (Ext::PosInf, Ext::PosInf) => true,
        _ => false,
    }
}

/// `L` from the staged omega values: converged when the last two stages agree
/// at `delta_max` and the last stage is flat between `delta_max / 2` and `delta_max`.
pub fn estimate_l<S: Scalar>(stages: &[StageAnalysis<S>], deltas: &[S], tol: &S, finite: bool) -> LEstimate<S> {
    if finite {
        return LEstimate::ExactMinusInfinity;
    }
    let Some(dmax) = deltas.last() else {
        return LEstimate::Inconclusive { lo: Ext::NegInf, hi: Ext::PosInf };
    };
    let last = &stages[stages.len() - 1].diagnostics;
    let a = last.omega(dmax).0;
    let half = last.omega(&(dmax.clone() / S::from_i64(2))).0;
    let stable = stages.len() >= 2 && ext_close(&a, &stages[stages.len() - 2].diagnostics.omega(dmax).0, tol);
    if stable && ext_close(&a, &half, tol) {
        LEstimate::Converged { value: a }
    } else {
        LEstimate::Inconclusive { lo: a, hi: half }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Compare {
    Greater,
    Equal,
    Less,
    Unknown,
}

fn compare_s_l<S: Scalar>(s: &Ext<S>, l: &LEstimate<S>, tol: &S) -> Compare {
    let cmp_value = |v: &Ext<S>| -> Compare {
        if ext_close(s, v, tol) {
            return Compare::Equal;
        }
        match (s, v) {
            (Ext::Finite(a), Ext::Finite(b)) => {
                if a.clone() > b.clone() + tol.clone() {
                    Compare::Greater
                } else {
                    Compare::Less
                }
            }
            _ => {
                if s.gt(v) {
                    Compare::Greater
                } else {
                    Compare::Less
                }
            }
        }
    };
    match l {
        LEstimate::ExactMinusInfinity => cmp_value(&Ext::NegInf),
        LEstimate::Converged { value } => cmp_value(value),
        // Stage values only bound omega from below, so a bracket decides nothing.
        LEstimate::Inconclusive { .. } => Compare::Unknown,
    }
}

pub fn analyze_model<S: Scalar>(model: &SilpModel, config: &AnalysisConfig) -> Result<ModelAnalysis<S>> {
    model.validate()?;
    let finite = model.is_finite();
    let count = if finite { 1 } else { config.stages.max(1) };
    let c: Vec<S> = model.objective_as();
    let mut stages = Vec::with_capacity(count);
    for s in 1..=count {
        let sys: FiniteSystem<S> = model.instantiate_stage(s)?;
        stages.push(analyze_stage(&sys, &c, &config.elimination)?);
    }
    let deltas: Vec<S> = config.deltas.iter().map(S::from_rational).collect();
    let l_tol = S::from_rational(&config.l_tol);
    let s_seq: Vec<Ext<S>> = stages.iter().map(|s| s.diagnostics.s.clone()).collect();
    let delta2_seq: Vec<Ext<S>> = stages.iter().map(|s| s.diagnostics.delta2.clone()).collect();
    let iv_seq: Vec<Ext<S>> = stages.iter().map(|s| s.diagnostics.iv_ratio.clone()).collect();
    let omega_table = stages.iter().map(|s| deltas.iter().map(|d| s.diagnostics.omega(d).0).collect()).collect();
    let l = estimate_l(&stages, &deltas, &l_tol, finite);
    let mut analysis = ModelAnalysis {
        finite,
        s_diverging: !finite && flags_divergence(&s_seq),
        delta2_diverging: !finite && flags_divergence(&delta2_seq),
        iv_diverging: !finite && flags_divergence(&iv_seq),
        stages,
        deltas,
        l_tol,
        s_seq,
        delta2_seq,
        iv_seq,
        omega_table,
        l,
        verdicts: placeholder_verdicts(),
    };
    analysis.verdicts = render_verdicts(&analysis);
    Ok(analysis)
}

fn placeholder_verdicts<S: Scalar>() -> Verdicts<S> {
    let u = verdict(Tri::Unknown, Confidence::Inconclusive);
    let v = verdict(Ext::NegInf, Confidence::Inconclusive);
    Verdicts {
        primal_feasible: u.clone(),
        primal_bounded: u.clone(),
        primal_value: v.clone(),
        primal_solvable: u.clone(),
        dual_feasible: u.clone(),
        dual_bounded: u.clone(),
        dual_value: v,
        dual_solvable: u.clone(),
        zero_gap: u.clone(),
        strong_duality: u.clone(),
        tidy: u,
    }
}

pub fn render_verdicts<S: Scalar>(a: &ModelAnalysis<S>) -> Verdicts<S> {
    use Confidence::*;
    let limit = if a.finite { Exact } else { Converged };
    let last = &a.last().diagnostics;
    let tol = &a.l_tol;

    let stage_infeasible = a.infeasible_stage().is_some();
    let limit_infeasible = a.s_diverging || a.delta2_diverging || a.iv_diverging;
    let primal_feasible = if stage_infeasible {
        verdict(Tri::No, Exact)
    } else if limit_infeasible {
        verdict(Tri::No, Converged)
    } else {
        verdict(Tri::Yes, limit)
    };
    let feasible = primal_feasible.value == Tri::Yes;

    let s_inf = if a.s_diverging { Ext::PosInf } else { last.s.clone() };
    let l_conf = match a.l {
        LEstimate::ExactMinusInfinity => Exact,
        LEstimate::Converged { .. } => Converged,
        LEstimate::Inconclusive { .. } => Inconclusive,
    };
    let sl_conf = if a.finite { Exact } else if l_conf == Inconclusive { Inconclusive } else { Converged };
    let cmp = compare_s_l(&s_inf, &a.l, tol);
    let l_value = match &a.l {
        LEstimate::ExactMinusInfinity => Ext::NegInf,
        LEstimate::Converged { value } => value.clone(),
        LEstimate::Inconclusive { hi, .. } => hi.clone(),
    };

    let i3_nonempty = a.stages.iter().any(|s| !s.partition.i3.is_empty());
    let primal_bounded = if i3_nonempty || matches!(l_value, Ext::Finite(_)) {
        verdict(Tri::Yes, sl_conf.min_with(limit))
    } else if l_conf == Inconclusive {
        verdict(Tri::Unknown, Inconclusive)
    } else {
        verdict(Tri::No, limit)
    };

    let primal_value = if !feasible {
        verdict(Ext::PosInf, primal_feasible.confidence)
    } else {
        match cmp {
            Compare::Greater | Compare::Equal => verdict(s_inf.clone(), sl_conf.min_with(limit)),
            Compare::Less => verdict(l_value.clone(), sl_conf),
            Compare::Unknown => verdict(s_inf.clone().max(l_value.clone()), Inconclusive),
        }
    };

    let primal_solvable = if !feasible {
        verdict(Tri::No, primal_feasible.confidence)
    } else {
        match cmp {
            Compare::Greater if s_inf.is_finite() => verdict(Tri::Yes, sl_conf),
            Compare::Equal => verdict(Tri::Unknown, sl_conf),
            Compare::Greater | Compare::Less => verdict(Tri::Unknown, sl_conf),
            Compare::Unknown => verdict(Tri::Unknown, Inconclusive),
        }
    };

    let dual_feasible = if i3_nonempty { verdict(Tri::Yes, Exact) } else { verdict(Tri::No, limit) };
    let i1_positive = stage_infeasible;
    let dual_value = if !i3_nonempty {
        verdict(Ext::NegInf, limit)
    } else if i1_positive {
        verdict(Ext::PosInf, Exact)
    } else if a.s_diverging {
        verdict(Ext::PosInf, Converged)
    } else {
        verdict(last.s.clone(), limit)
    };
    let dual_bounded = if i1_positive && i3_nonempty {
        verdict(Tri::No, Exact)
    } else if a.s_diverging {
        verdict(Tri::No, Converged)
    } else {
        verdict(Tri::Yes, limit)
    };
    let s_stable = a.finite
        || (a.s_seq.len() >= 2 && {
            let k = a.s_seq.len();
            ext_close(&a.s_seq[k - 1], &a.s_seq[k - 2], &if S::EXACT { S::zero() } else { tol.clone() })
        });
    let dual_solvable = if i1_positive && i3_nonempty {
        verdict(Tri::No, Exact)
    } else if !i3_nonempty {
        verdict(Tri::No, limit)
    } else if a.s_diverging {
        verdict(Tri::No, Converged)
    } else if s_stable {
        verdict(Tri::Yes, limit)
    } else {
        verdict(Tri::Unknown, Inconclusive)
    };

    let zero_gap = if !feasible {
        verdict(Tri::No, primal_feasible.confidence)
    } else {
        match cmp {
            Compare::Greater | Compare::Equal => verdict(Tri::Yes, sl_conf),
            Compare::Less => verdict(Tri::No, sl_conf),
            Compare::Unknown => verdict(Tri::Unknown, Inconclusive),
        }
    };

    let strong_duality = if !feasible || cmp == Compare::Less || dual_solvable.value == Tri::No {
        verdict(Tri::No, sl_conf.min_with(primal_feasible.confidence))
    } else if cmp == Compare::Greater && dual_solvable.value == Tri::Yes {
        verdict(Tri::Yes, sl_conf.min_with(dual_solvable.confidence))
    } else {
        verdict(Tri::Unknown, Inconclusive.min_with(sl_conf))
    };

    let tidy = if a.stages.iter().all(|s| s.result.is_tidy()) {
        verdict(Tri::Yes, limit)
    } else {
        verdict(Tri::No, limit)
    };

    Verdicts {
        primal_feasible,
        primal_bounded,
        primal_value,
        primal_solvable,
        dual_feasible,
        dual_bounded,
        dual_value,
        dual_solvable,
        zero_gap,
        strong_duality,
        tidy,
    }
}

impl Confidence {
    /// The weaker of two confidence tags.
    pub fn min_with(self, other: Confidence) -> Confidence {
        use Confidence::*;
        match (self, other) {
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            (Converged, _) | (_, Converged) => Converged,
            _ => Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceElement<S> {
    pub delta: S,
    pub row_id: usize,
    pub value: S,
    /// Free coefficients `a~^k(h)` of the row.
    pub coeffs: Vec<S>,
    pub max_coeff: S,
    /// Row multiplier without the objective entry.
    pub v: Vec<(RowId, S)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeasibleSequence<S> {
    pub limit: S,
    pub elements: Vec<SequenceElement<S>>,
}

impl<S: Scalar> FeasibleSequence<S> {
    /// Coefficient magnitudes and distances to the limit never increase.
    pub fn is_monotone(&self, tol: &Tolerance) -> bool {
        self.elements.windows(2).all(|w| {
            let grow = |a: &S, b: &S| b.clone() - a.clone();
            let dc = grow(&w[0].max_coeff, &w[1].max_coeff);
            let gap0 = (w[0].value.clone() - self.limit.clone()).abs();
            let gap1 = (w[1].value.clone() - self.limit.clone()).abs();
            let dg = gap1 - gap0;
            let scale = S::one();
            dc.sign(&scale, tol) != Sign::Positive && dg.sign(&scale, tol) != Sign::Positive
        })
    }
}

/// For each scheduled delta, the first I4 row of the last stage attaining
/// `omega(delta)`; repeated rows are emitted once.
pub fn extract_feasible_sequence<S: Scalar>(a: &ModelAnalysis<S>) -> Result<FeasibleSequence<S>> {
    let limit = match &a.l {
        LEstimate::Converged { value: Ext::Finite(v) } => v.clone(),
        _ => return Err(Error::Precondition("L has not converged to a finite value".into())),
    };
    let stage = a.last();
    let free = stage.result.free_vars();
    let mut elements: Vec<SequenceElement<S>> = Vec::new();
    for d in &a.deltas {
        let Some(pos) = stage.diagnostics.omega(d).1 else { continue };
        let r = &stage.result.rows[pos];
        if elements.last().map(|e| e.row_id) == Some(r.id) {
            continue;
        }
        let coeffs: Vec<S> = free.iter().map(|&k| r.row.coeffs[k].clone()).collect();
        let max_coeff = coeffs.iter().fold(S::zero(), |m, c| S::max_of(m, c.abs()));
        elements.push(SequenceElement {
            delta: d.clone(),
            row_id: r.id,
            value: r.row.rhs.clone(),
            coeffs,
            max_coeff,
            v: r.mult.without(0).labelled(&stage.system),
        });
    }
    if elements.is_empty() {
        return Err(Error::Precondition("no I4 rows at the last stage".into()));
    }
    Ok(FeasibleSequence { limit, elements })
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegularBranch<S> {
    /// `z*` equals `S`, attained by a dual certificate.
    Certificate(DualCertificate<S>),
    /// `z* = L > S`: only a sequence of finite-support multipliers approaches it.
    Sequence(FeasibleSequence<S>),
    Infeasible,
    Unresolved,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegularDualityReport<S> {
    pub z_star: Ext<S>,
    pub branch: RegularBranch<S>,
    pub zero_gap: Tri,
}

pub fn regular_duality_report<S: Scalar>(a: &ModelAnalysis<S>) -> RegularDualityReport<S> {
    let v = &a.verdicts;
    let z_star = v.primal_value.value.clone();
    let branch = if v.primal_feasible.value == Tri::No {
        RegularBranch::Infeasible
    } else {
        let s = &a.last().diagnostics.s;
        let sequence_case = compare_s_l(s, &a.l, &a.l_tol) == Compare::Less;
        if sequence_case {
            match extract_feasible_sequence(a) {
                Ok(seq) => RegularBranch::Sequence(seq),
                Err(_) => RegularBranch::Unresolved,
            }
        } else {
            match extract_dual_certificate(a.last()) {
                Some(c) => RegularBranch::Certificate(c),
                None => RegularBranch::Unresolved,
            }
        }
    };
    RegularDualityReport { z_star, branch, zero_gap: v.zero_gap.value }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Domain;
    use crate::scalar::rat;

    fn q(v: i64) -> Rational {
        rat(v, 1)
    }

    #[test]
    fn finite_lp_diagnostics() {
        // min x1 + x2 s.t. x1 >= 1, x2 >= 2, x1 + x2 >= 4
        let sys = FiniteSystem::from_dense(
            &[vec![q(1), q(0)], vec![q(0), q(1)], vec![q(1), q(1)]],
            &[q(1), q(2), q(4)],
        );
        let st = analyze_stage(&sys, &[q(1), q(1)], &EliminationOptions::default()).unwrap();
        assert_eq!(st.diagnostics.s, Ext::Finite(q(4)));
        assert!(st.result.is_tidy());
        let cert = extract_dual_certificate(&st).unwrap();
        let row_of = |id: &RowId| sys.index_of(id).map(|i| sys.rows[i].clone());
        replay_dual_certificate(&cert, &[q(1), q(1)], &row_of, &Tolerance::default()).unwrap();
        let w = lift_primal(&st, None).unwrap();
        assert!(sys.violations(&w.x, &q(0), &Tolerance::default()).is_empty());
        assert_eq!(w.x[0].clone() + w.x[1].clone(), q(4));
    }

    #[test]
    fn partition_of_augmented_rows() {
        // min x1 s.t. x1 >= 0, -x2 >= -1, x1 - x2/3 >= 0
        let sys = FiniteSystem::from_dense(
            &[vec![q(1), q(0)], vec![q(0), q(-1)], vec![q(1), rat(-1, 3)]],
            &[q(0), q(-1), q(0)],
        );
        let st = analyze_stage(&sys, &[q(1), q(0)], &EliminationOptions::default()).unwrap();
        assert_eq!(st.partition.i1.len(), 0);
        assert_eq!(st.partition.i2.len(), 1);
        assert_eq!(st.partition.i3.len(), 1);
        assert_eq!(st.partition.i4.len(), 1);
        assert_eq!(st.diagnostics.s, Ext::Finite(q(0)));
        assert_eq!(st.diagnostics.delta2, Ext::Finite(q(-1)));
        assert_eq!(st.diagnostics.omega(&q(3)).0, Ext::Finite(q(-1)));
    }

    #[test]
    fn unbounded_finite_lp() {
        let sys = FiniteSystem::from_dense(&[vec![q(1), q(1)]], &[q(0)]);
        let st = analyze_stage(&sys, &[q(1), q(0)], &EliminationOptions::default()).unwrap();
        assert_eq!(stage_primal_value(&st), Ext::NegInf);
        assert!(extract_dual_certificate(&st).is_none());
    }

    #[test]
    fn staged_lower_bound_family_diverges() {
        let mut m = SilpModel::new("lb", &["x1"], vec![q(1)]);
        m.add_family("n", "i", Domain::Integers { start: 1.into() }, &[("x1", "1")], "i").unwrap();
        m.schedule.stages = 4;
        let cfg = AnalysisConfig::for_model(&m, true);
        let a: ModelAnalysis<Rational> = analyze_model(&m, &cfg).unwrap();
        assert!(a.stages.iter().all(|s| s.partition.i1.is_empty()));
        assert_eq!(a.s_seq[3], Ext::Finite(q(128)));
        assert!(a.s_diverging);
        assert_eq!(a.verdicts.dual_bounded.value, Tri::No);
        assert_eq!(a.verdicts.primal_feasible.value, Tri::No);
    }

    #[test]
    fn l_estimate_rules() {
        let sys = FiniteSystem::from_dense(&[vec![q(1)]], &[q(0)]);
        let st = analyze_stage(&sys, &[q(1)], &EliminationOptions::default()).unwrap();
        assert_eq!(estimate_l(std::slice::from_ref(&st), &[q(2)], &rat(1, 1000), true), LEstimate::ExactMinusInfinity);
        assert_eq!(
            estimate_l(&[st.clone(), st], &[q(2)], &rat(1, 1000), false),
            LEstimate::Converged { value: Ext::NegInf }
        );
    }
}
