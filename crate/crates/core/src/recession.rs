//! The homogeneous system of a stage, strict recession rays, and the two
//! decidable witnesses for whether `K ∩ N` is a subspace.

use crate::error::{Error, Result};
use crate::feasibility::{check_region_bounded, split_rows, RegionBound};
use crate::fm::{back_substitute, run_elimination, EliminationOptions, EliminationResult};
use crate::model::{dot, FiniteSystem, LinearRow, RowId};
use crate::scalar::{Scalar, Sign};

/// Same columns with zero right-hand sides, preceded by the row `-c x >= 0`.
pub fn build_recession_system<S: Scalar>(system: &FiniteSystem<S>, c: &[S]) -> FiniteSystem<S> {
    let mut out = FiniteSystem::new(system.vars.clone());
    out.push(RowId::Objective, LinearRow::new(c.iter().map(|v| -v.clone()).collect(), S::zero()));
    for (id, row) in system.ids.iter().zip(&system.rows) {
        out.push(id.clone(), LinearRow::new(row.coeffs.clone(), S::zero()));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KnCheck {
    Holds,
    Fails,
    Undecided,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StrictRay<S> {
    pub r: Vec<S>,
    /// Positions of homogeneous rows with `a r > 0`.
    pub strict_rows: Vec<usize>,
    pub objective: S,
}

#[derive(Clone, Debug)]
pub struct RecessionAnalysis<S> {
    pub system: FiniteSystem<S>,
    pub result: EliminationResult<S>,
    pub h1: Vec<usize>,
    pub h2: Vec<usize>,
    pub ray: Option<StrictRay<S>>,
    pub zero_unique_solution: bool,
    /// `c r < 0` for the returned ray.
    pub ray_outside_n: bool,
    pub kn_subspace: KnCheck,
}

impl<S: Scalar> RecessionAnalysis<S> {
    /// No final row keeps a free coefficient: every column was eliminated.
    pub fn implies_tidy(&self) -> bool {
        self.h2.is_empty()
    }
}

/// A ray obtained by setting one free variable with a nonzero final
/// coefficient to `±1` and lifting; verified against every homogeneous row.
pub fn extract_strict_ray<S: Scalar>(system: &FiniteSystem<S>, result: &EliminationResult<S>) -> Result<StrictRay<S>> {
    let tol = EliminationOptions::default().tol;
    let (_, h2) = split_rows(result, &tol);
    let free = result.free_vars();
    let pick = free.iter().copied().find(|&k| h2.iter().any(|&p| !result.rows[p].row.coeffs[k].is_zero()));
    let Some(k) = pick else {
        return Err(Error::Precondition("no final row has a free coefficient".into()));
    };
    let negative = h2.iter().any(|&p| result.rows[p].row.coeffs[k].is_negative());
    let mut values = vec![S::zero(); result.n];
    values[k] = if negative { -S::one() } else { S::one() };
    let r = back_substitute(result, &values, &S::zero(), &tol)?;
    let mut strict_rows = Vec::new();
    for (i, row) in system.rows.iter().enumerate() {
        let v = dot(&row.coeffs, &r);
        match v.sign(&S::max_of(row.scale(), S::one()), &tol) {
            Sign::Negative => {
                return Err(Error::Verification(format!("ray violates row {}", system.ids[i])));
            }
            Sign::Positive => strict_rows.push(i),
            Sign::Zero => {}
        }
    }
    if strict_rows.is_empty() {
        return Err(Error::Verification("ray is tight on every row".into()));
    }
    let objective = match system.index_of(&RowId::Objective) {
        Some(i) => -dot(&system.rows[i].coeffs, &r),
        None => S::zero(),
    };
    Ok(StrictRay { r, strict_rows, objective })
}

/// `exhaustive` marks a system that holds every constraint of the problem;
/// only then can a ray be a witness against `K ∩ N` being a subspace.
pub fn analyze_recession<S: Scalar>(
    stage: &FiniteSystem<S>,
    c: &[S],
    exhaustive: bool,
    opts: &EliminationOptions,
) -> Result<RecessionAnalysis<S>> {
    let system = build_recession_system(stage, c);
    let result = run_elimination(&system, opts)?;
    let (h1, h2) = split_rows(&result, &opts.tol);
    let zero_unique_solution = check_region_bounded(&result) == RegionBound::Bounded;
    let ray = if h2.is_empty() { None } else { Some(extract_strict_ray(&system, &result)?) };
    let ray_outside_n = ray.as_ref().is_some_and(|r| r.objective.is_negative());
    let kn_subspace = if h2.is_empty() {
        KnCheck::Holds
    } else {
        match &ray {
            Some(r) if exhaustive && r.objective.is_zero() && r.strict_rows.iter().any(|&i| i != 0) => KnCheck::Fails,
            _ => KnCheck::Undecided,
        }
    };
    Ok(RecessionAnalysis { system, result, h1, h2, ray, zero_unique_solution, ray_outside_n, kn_subspace })
}
