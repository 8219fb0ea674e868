//! Fourier-Motzkin elimination with multiplier tracking.
//!
//! Every derived row carries the nonnegative multiplier `u` over the original
//! rows that produced it, so `b~(h) = <b, u^h>` and `a~^k(h) = <a^k, u^h>` can
//! be checked independently of the elimination arithmetic.

use std::cmp::Ordering;
use std::collections::HashMap;

use thiserror::Error;

use crate::model::{FiniteSystem, LinearRow, Multiplier};
use crate::scalar::{Scalar, Sign, Tolerance};

pub const DEFAULT_ROW_BUDGET: usize = 200_000;

/// Row budget, overridable through `FMSILP_ROW_BUDGET`.
pub fn row_budget_from_env() -> usize {
    std::env::var("FMSILP_ROW_BUDGET")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_ROW_BUDGET)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FmError {
    #[error("eliminating variable {var} needs {needed} rows, budget is {budget}")]
    RowBudgetExceeded { var: usize, needed: usize, budget: usize },
    #[error("variable {var} cannot be eliminated: one of H+ / H- is empty")]
    NotEliminable { var: usize },
    #[error("back substitution found an empty interval for variable {var}")]
    EmptyInterval { var: usize },
    #[error("invalid elimination order: {0}")]
    InvalidOrder(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OrderRule {
    Input,
    /// Greedy choice minimising `|H+| |H-| - |H+| - |H-|`, ties to the lowest index.
    MinFill,
    /// Process exactly these variables in this order; the rest stay untouched.
    Explicit(Vec<usize>),
}

#[derive(Clone, Debug)]
pub struct EliminationOptions {
    pub order: OrderRule,
    pub dedup: bool,
    pub prune_dominated: bool,
    pub row_budget: usize,
    pub tol: Tolerance,
    pub keep_history: bool,
}

impl Default for EliminationOptions {
    fn default() -> Self {
        EliminationOptions {
            order: OrderRule::Input,
            dedup: true,
            prune_dominated: false,
            row_budget: row_budget_from_env(),
            tol: Tolerance::default(),
            keep_history: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Origin<S> {
    Input(usize),
    /// `sp * row(p) + sq * row(q)` by row id.
    Pair { p: usize, q: usize, sp: S, sq: S },
}

#[derive(Clone, Debug)]
pub struct DerivedRow<S> {
    pub id: usize,
    pub row: LinearRow<S>,
    pub mult: Multiplier<S>,
    pub origin: Origin<S>,
}

/// Positions (not ids) of rows by the sign of one coefficient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SignSets {
    pub plus: Vec<usize>,
    pub zero: Vec<usize>,
    pub minus: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StepKind {
    Eliminated,
    /// Single-signed column: skipped and left in the system.
    Dirty(Sign),
    /// Column identically zero: dropped and counted clean.
    Vacuous,
}

#[derive(Clone, Debug)]
pub struct Step<S> {
    pub var: usize,
    pub kind: StepKind,
    pub plus_ids: Vec<usize>,
    pub minus_ids: Vec<usize>,
    pub zero_count: usize,
    /// H+ and H- rows before the step (eliminated steps only).
    pub bounds: Vec<LinearRow<S>>,
    pub rows_after: usize,
}

#[derive(Clone, Debug)]
pub struct EliminationResult<S> {
    pub n: usize,
    pub augmented: bool,
    pub rows: Vec<DerivedRow<S>>,
    pub steps: Vec<Step<S>>,
    pub clean: Vec<usize>,
    pub dirty: Vec<usize>,
    pub untouched: Vec<usize>,
    pub history: Option<Vec<DerivedRow<S>>>,
}

impl<S: Scalar> EliminationResult<S> {
    /// Index of the first dirty variable in the canonical order (1-based).
    pub fn ell(&self) -> usize {
        self.clean.len() + 1
    }

    /// Clean variables first, then dirty ones, each in processing order.
    pub fn canonical_order(&self) -> Vec<usize> {
        self.clean.iter().chain(&self.dirty).chain(&self.untouched).copied().collect()
    }

    /// Processing order of the variables.
    pub fn processing_order(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.var).collect()
    }

    pub fn is_tidy(&self) -> bool {
        self.dirty.is_empty() && self.untouched.is_empty()
    }

    /// Variables left with nonzero coefficients in the final rows.
    pub fn free_vars(&self) -> Vec<usize> {
        self.dirty.iter().chain(&self.untouched).copied().collect()
    }

    pub fn row_by_id(&self, id: usize) -> Option<&DerivedRow<S>> {
        self.rows.binary_search_by_key(&id, |r| r.id).ok().map(|p| &self.rows[p])
    }
}

fn sign_of<S: Scalar>(row: &LinearRow<S>, var: usize, tol: &Tolerance) -> Sign {
    row.coeffs[var].sign(&row.scale(), tol)
}

pub fn classify_signs<S: Scalar>(rows: &[DerivedRow<S>], var: usize, tol: &Tolerance) -> SignSets {
    let mut sets = SignSets::default();
    for (pos, r) in rows.iter().enumerate() {
        match sign_of(&r.row, var, tol) {
            Sign::Positive => sets.plus.push(pos),
            Sign::Negative => sets.minus.push(pos),
            Sign::Zero => sets.zero.push(pos),
        }
    }
    sets
}

fn combine<S: Scalar>(
    p: &DerivedRow<S>,
    q: &DerivedRow<S>,
    var: usize,
    augmented: bool,
    tol: &Tolerance,
    id: usize,
) -> DerivedRow<S> {
    let mut sp = S::one() / p.row.coeffs[var].clone();
    let mut sq = -(S::one() / q.row.coeffs[var].clone());
    let z_raw = sp.clone() * p.row.z.clone() + sq.clone() * q.row.z.clone();
    let z = if augmented && !z_raw.is_zero() {
        sp = sp / z_raw.clone();
        sq = sq / z_raw;
        S::one()
    } else {
        S::zero()
    };
    let mut coeffs: Vec<S> = p
        .row
        .coeffs
        .iter()
        .zip(&q.row.coeffs)
        .map(|(a, b)| match (a.is_zero(), b.is_zero()) {
            (true, true) => S::zero(),
            (false, true) => sp.clone() * a.clone(),
            (true, false) => sq.clone() * b.clone(),
            (false, false) => sp.clone() * a.clone() + sq.clone() * b.clone(),
        })
        .collect();
    coeffs[var] = S::zero();
    if !S::EXACT {
        let scale = coeffs.iter().fold(z.clone(), |m, c| S::max_of(m, c.abs()));
        for c in coeffs.iter_mut() {
            if c.sign(&scale, tol) == Sign::Zero {
                *c = S::zero();
            }
        }
    }
    let rhs = sp.clone() * p.row.rhs.clone() + sq.clone() * q.row.rhs.clone();
    let mult = Multiplier::combine(&p.mult, &sp, &q.mult, &sq);
    DerivedRow { id, row: LinearRow { coeffs, z, rhs }, mult, origin: Origin::Pair { p: p.id, q: q.id, sp, sq } }
}

fn cmp_lhs<S: Scalar>(a: &LinearRow<S>, b: &LinearRow<S>) -> Ordering {
    for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
        let o = x.total_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.z.total_cmp(&b.z)
}

/// Removes exact duplicates (or, when pruning, rows whose left side repeats
/// with a rhs no larger than another's). The earliest row of a group survives.
fn reduce_rows<S: Scalar>(rows: Vec<DerivedRow<S>>, prune: bool) -> Vec<DerivedRow<S>> {
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    idx.sort_by(|&i, &j| {
        cmp_lhs(&rows[i].row, &rows[j].row)
            .then_with(|| {
                let o = rows[i].row.rhs.total_cmp(&rows[j].row.rhs);
                if prune {
                    o.reverse()
                } else {
                    o
                }
            })
            .then(i.cmp(&j))
    });
    let mut keep = vec![false; rows.len()];
    let mut last: Option<usize> = None;
    for &i in &idx {
        let same = match last {
            Some(l) => {
                cmp_lhs(&rows[l].row, &rows[i].row) == Ordering::Equal
                    && (prune || rows[l].row.rhs == rows[i].row.rhs)
            }
            None => false,
        };
        if !same {
            keep[i] = true;
            last = Some(i);
        }
    }
    rows.into_iter().zip(keep).filter(|(_, k)| *k).map(|(r, _)| r).collect()
}

/// One elimination step: H0 rows pass through, then every (p, q) pair from
/// H+ x H- in increasing id order gets a fresh id.
pub fn eliminate_variable<S: Scalar>(
    rows: &[DerivedRow<S>],
    var: usize,
    augmented: bool,
    opts: &EliminationOptions,
    next_id: &mut usize,
) -> Result<Vec<DerivedRow<S>>, FmError> {
    let sets = classify_signs(rows, var, &opts.tol);
    if sets.plus.is_empty() || sets.minus.is_empty() {
        return Err(FmError::NotEliminable { var });
    }
    let needed = sets.zero.len() + sets.plus.len() * sets.minus.len();
    if needed > opts.row_budget {
        return Err(FmError::RowBudgetExceeded { var, needed, budget: opts.row_budget });
    }
    let mut out: Vec<DerivedRow<S>> = Vec::with_capacity(needed);
    for &z in &sets.zero {
        let mut r = rows[z].clone();
        r.row.coeffs[var] = S::zero();
        out.push(r);
    }
    for &p in &sets.plus {
        for &q in &sets.minus {
            out.push(combine(&rows[p], &rows[q], var, augmented, &opts.tol, *next_id));
            *next_id += 1;
        }
    }
    if opts.dedup || opts.prune_dominated {
        out = reduce_rows(out, opts.prune_dominated);
    }
    Ok(out)
}

fn pick_min_fill<S: Scalar>(rows: &[DerivedRow<S>], remaining: &[usize], tol: &Tolerance) -> usize {
    let mut best = 0;
    let mut best_key = i128::MAX;
    for (pos, &var) in remaining.iter().enumerate() {
        let s = classify_signs(rows, var, tol);
        let (p, m) = (s.plus.len() as i128, s.minus.len() as i128);
        let key = p * m - p - m;
        if key < best_key {
            best_key = key;
            best = pos;
        }
    }
    best
}

pub fn run_elimination<S: Scalar>(
    system: &FiniteSystem<S>,
    opts: &EliminationOptions,
) -> Result<EliminationResult<S>, FmError> {
    let n = system.n();
    let mut rows: Vec<DerivedRow<S>> = system
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| DerivedRow { id: i, row: r.clone(), mult: Multiplier::unit(i), origin: Origin::Input(i) })
        .collect();
    let mut next_id = rows.len();
    let mut history = if opts.keep_history { Some(rows.clone()) } else { None };
    let mut remaining: Vec<usize> = match &opts.order {
        OrderRule::Input | OrderRule::MinFill => (0..n).collect(),
        OrderRule::Explicit(v) => {
            let mut seen = vec![false; n];
            for &k in v {
                if k >= n || seen[k] {
                    return Err(FmError::InvalidOrder(format!("variable index {} repeated or out of range", k)));
                }
                seen[k] = true;
            }
            v.clone()
        }
    };
    let untouched: Vec<usize> = (0..n).filter(|k| !remaining.contains(k)).collect();
    let mut steps = Vec::new();
    let (mut clean, mut dirty) = (Vec::new(), Vec::new());
    while !remaining.is_empty() {
        let pos = if opts.order == OrderRule::MinFill { pick_min_fill(&rows, &remaining, &opts.tol) } else { 0 };
        let var = remaining.remove(pos);
        let sets = classify_signs(&rows, var, &opts.tol);
        let plus_ids: Vec<usize> = sets.plus.iter().map(|&p| rows[p].id).collect();
        let minus_ids: Vec<usize> = sets.minus.iter().map(|&p| rows[p].id).collect();
        let (kind, bounds) = match (sets.plus.is_empty(), sets.minus.is_empty()) {
            (false, false) => {
                let bounds = sets.plus.iter().chain(&sets.minus).map(|&p| rows[p].row.clone()).collect();
                let first_new = next_id;
                rows = eliminate_variable(&rows, var, system.augmented, opts, &mut next_id)?;
                if let Some(h) = history.as_mut() {
                    h.extend(rows.iter().filter(|r| r.id >= first_new).cloned());
                    h.sort_by_key(|r| r.id);
                }
                clean.push(var);
                (StepKind::Eliminated, bounds)
            }
            (true, true) => {
                clean.push(var);
                (StepKind::Vacuous, Vec::new())
            }
            (false, true) => {
                dirty.push(var);
                (StepKind::Dirty(Sign::Positive), Vec::new())
            }
            (true, false) => {
                dirty.push(var);
                (StepKind::Dirty(Sign::Negative), Vec::new())
            }
        };
        steps.push(Step {
            var,
            kind,
            plus_ids,
            minus_ids,
            zero_count: sets.zero.len(),
            bounds,
            rows_after: rows.len(),
        });
    }
    Ok(EliminationResult { n, augmented: system.augmented, rows, steps, clean, dirty, untouched, history })
}

/// Lifts values of the free variables (and `z`) to a full point, walking the
/// eliminated steps backwards. Each variable takes the midpoint of its
/// interval, or the finite bound moved by one when the other side is open;
/// vacuous variables take 0.
pub fn back_substitute<S: Scalar>(
    result: &EliminationResult<S>,
    free_values: &[S],
    z: &S,
    tol: &Tolerance,
) -> Result<Vec<S>, FmError> {
    let mut x: Vec<S> = vec![S::zero(); result.n];
    for &k in result.free_vars().iter() {
        x[k] = free_values[k].clone();
    }
    for step in result.steps.iter().rev() {
        if step.kind != StepKind::Eliminated {
            continue;
        }
        let j = step.var;
        let mut lo: Option<S> = None;
        let mut hi: Option<S> = None;
        for row in &step.bounds {
            let a = row.coeffs[j].clone();
            let mut rest = row.rhs.clone() - row.z.clone() * z.clone();
            for (k, c) in row.coeffs.iter().enumerate() {
                if k != j && !c.is_zero() {
                    rest = rest - c.clone() * x[k].clone();
                }
            }
            let bound = rest / a.clone();
            if a.is_positive() {
                lo = Some(match lo {
                    Some(v) => S::max_of(v, bound),
                    None => bound,
                });
            } else {
                hi = Some(match hi {
                    Some(v) => S::min_of(v, bound),
                    None => bound,
                });
            }
        }
        x[j] = match (lo, hi) {
            (Some(l), Some(h)) => {
                if l > h {
                    let scale = S::max_of(S::one(), S::max_of(l.abs(), h.abs()));
                    if S::EXACT || (l.clone() - h.clone()).sign(&scale, tol) != Sign::Zero {
                        return Err(FmError::EmptyInterval { var: j });
                    }
                }
                (l + h) / S::from_i64(2)
            }
            (Some(l), None) => l + S::one(),
            (None, Some(h)) => h - S::one(),
            (None, None) => S::zero(),
        };
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct IdentityViolation {
    pub row_id: usize,
    pub detail: String,
}

/// Checks `b~ = <b,u>`, `a~^k = <a^k,u>` for every k (zero for clean k), the
/// z coefficient and `u >= 0` on every final row.
pub fn verify_multiplier_identities<S: Scalar>(
    result: &EliminationResult<S>,
    system: &FiniteSystem<S>,
    tol: &Tolerance,
) -> Result<(), IdentityViolation> {
    for r in &result.rows {
        let fail = |detail: String| Err(IdentityViolation { row_id: r.id, detail });
        if !r.mult.is_nonnegative() {
            return fail("negative multiplier entry".into());
        }
        let img = r.mult.image(system);
        if !img.rhs.near(&r.row.rhs, tol) {
            return fail(format!("rhs {} vs <b,u> {}", r.row.rhs, img.rhs));
        }
        if !img.z.near(&r.row.z, tol) {
            return fail(format!("z coefficient {} vs {}", r.row.z, img.z));
        }
        for k in 0..result.n {
            let expected = if result.clean.contains(&k) { S::zero() } else { r.row.coeffs[k].clone() };
            if !img.coeffs[k].near(&expected, tol) || (result.clean.contains(&k) && !r.row.coeffs[k].is_zero()) {
                return fail(format!("coefficient of variable {}: {} vs <a,u> {}", k, r.row.coeffs[k], img.coeffs[k]));
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct Decomposition<S> {
    /// `(final row id, lambda)` with `u_bar = sum lambda_h u^h`.
    pub terms: Vec<(usize, S)>,
    pub result: EliminationResult<S>,
}

/// Writes `u_bar` as a nonnegative combination of final-row multipliers.
///
/// `m` counts variables in canonical order whose images under `u_bar` must
/// vanish; it must cover every clean variable. Duplicate merging is disabled
/// for the internal run so every pair row exists.
pub fn decompose_multiplier<S: Scalar>(
    system: &FiniteSystem<S>,
    u_bar: &Multiplier<S>,
    m: usize,
    opts: &EliminationOptions,
) -> Result<Decomposition<S>, FmError> {
    let mut run_opts = opts.clone();
    run_opts.dedup = false;
    run_opts.prune_dominated = false;
    run_opts.keep_history = true;
    let result = run_elimination(system, &run_opts)?;
    if !u_bar.is_nonnegative() {
        return Err(FmError::Precondition("u_bar has a negative entry".into()));
    }
    if m + 1 < result.ell() || m > result.n {
        return Err(FmError::Precondition(format!("M = {} but ell - 1 = {}", m, result.ell() - 1)));
    }
    let image = u_bar.image(system);
    for &k in result.canonical_order().iter().take(m) {
        if !image.coeffs[k].near(&S::zero(), &opts.tol) {
            return Err(FmError::Precondition(format!("<a^{}, u_bar> = {} is not zero", k, image.coeffs[k])));
        }
    }
    let history = result.history.as_ref().expect("history kept");
    let mut children: HashMap<(usize, usize), usize> = HashMap::new();
    for r in history {
        if let Origin::Pair { p, q, .. } = r.origin {
            children.insert((p, q), r.id);
        }
    }
    let mut alpha: Vec<(usize, S)> = u_bar.entries.iter().filter(|e| !e.1.is_zero()).cloned().collect();
    for step in &result.steps {
        if step.kind != StepKind::Eliminated {
            continue;
        }
        let j = step.var;
        let mut supply = Vec::new();
        let mut demand = Vec::new();
        let mut next = Vec::new();
        for (id, a) in alpha {
            let row = &history[id].row;
            match sign_of(row, j, &opts.tol) {
                Sign::Positive => supply.push((id, a.clone() * row.coeffs[j].clone())),
                Sign::Negative => demand.push((id, -(a.clone() * row.coeffs[j].clone()))),
                Sign::Zero => next.push((id, a)),
            }
        }
        let (mut i, mut k) = (0, 0);
        while i < supply.len() && k < demand.len() {
            let t = S::min_of(supply[i].1.clone(), demand[k].1.clone());
            let (p, q) = (supply[i].0, demand[k].0);
            let child = *children
                .get(&(p, q))
                .ok_or_else(|| FmError::Precondition(format!("missing pair row ({}, {})", p, q)))?;
            let Origin::Pair { sp, .. } = &history[child].origin else { unreachable!() };
            let sigma = sp.clone() * history[p].row.coeffs[j].clone();
            if !t.is_zero() {
                next.push((child, t.clone() / sigma));
            }
            supply[i].1 = supply[i].1.clone() - t.clone();
            demand[k].1 = demand[k].1.clone() - t;
            let s_done = supply[i].1.sign(&S::one(), &opts.tol) != Sign::Positive;
            let d_done = demand[k].1.sign(&S::one(), &opts.tol) != Sign::Positive;
            if s_done {
                i += 1;
            }
            if d_done {
                k += 1;
            }
        }
        let leftover = supply[i.min(supply.len())..].iter().chain(&demand[k.min(demand.len())..]);
        for (_, v) in leftover {
            if v.sign(&S::one(), &opts.tol) == Sign::Positive {
                return Err(FmError::Precondition(format!("transportation imbalance at variable {}", j)));
            }
        }
        next.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, S)> = Vec::with_capacity(next.len());
        for (id, v) in next {
            match merged.last_mut() {
                Some(last) if last.0 == id => last.1 = last.1.clone() + v,
                _ => merged.push((id, v)),
            }
        }
        alpha = merged;
    }
    Ok(Decomposition { terms: alpha, result })
}

impl<S: Scalar> Decomposition<S> {
    /// `sum lambda_h u^h`, for comparison against the input multiplier.
    pub fn recombine(&self) -> Multiplier<S> {
        let mut acc = Multiplier::zero();
        for (id, lambda) in &self.terms {
            let r = self.result.row_by_id(*id).expect("final row");
            acc.add_scaled(&r.mult, lambda);
        }
        acc
    }
}
