//! Feasibility and boundedness of finite stages, with witnesses and
//! infeasibility certificates read off the final elimination rows.

use crate::approx::{flags_divergence, growth_exponent};
use crate::error::Result;
use crate::fm::{back_substitute, run_elimination, EliminationOptions, EliminationResult, StepKind};
use crate::model::{FiniteSystem, Multiplier, SilpModel};
use crate::scalar::{Ext, Scalar, Sign, Tolerance};

/// Positions of final rows with all free coefficients zero (H1) and the rest (H2).
pub fn split_rows<S: Scalar>(result: &EliminationResult<S>, tol: &Tolerance) -> (Vec<usize>, Vec<usize>) {
    let free = result.free_vars();
    let mut h1 = Vec::new();
    let mut h2 = Vec::new();
    for (pos, r) in result.rows.iter().enumerate() {
        let scale = S::max_of(r.row.scale(), S::one());
        if free.iter().all(|&k| r.row.coeffs[k].sign(&scale, tol) == Sign::Zero) {
            h1.push(pos);
        } else {
            h2.push(pos);
        }
    }
    (h1, h2)
}

/// `sup_{h in rows} b~(h) / sum_k |a~^k(h)|` over the free variables, with the maximiser.
pub fn ratio_sup<S: Scalar>(result: &EliminationResult<S>, rows: &[usize]) -> (Ext<S>, Option<usize>) {
    let free = result.free_vars();
    let mut best: Ext<S> = Ext::NegInf;
    let mut arg = None;
    for &pos in rows {
        let r = &result.rows[pos].row;
        let v = Ext::Finite(r.rhs.clone() / r.abs_sum(&free));
        if v.gt(&best) {
            best = v;
            arg = Some(pos);
        }
    }
    (best, arg)
}

/// The point `x(delta)`: each free variable is `+delta` if its coefficient is
/// nonnegative on every row of `h2`, otherwise `-delta`. Eliminated entries are 0.
pub fn build_xdelta<S: Scalar>(result: &EliminationResult<S>, h2: &[usize], delta: &S) -> Vec<S> {
    let mut x = vec![S::zero(); result.n];
    for k in result.free_vars() {
        let nonneg = h2.iter().all(|&pos| !result.rows[pos].row.coeffs[k].is_negative());
        x[k] = if nonneg { delta.clone() } else { -delta.clone() };
    }
    x
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeasibilityOutcome<S> {
    Feasible { witness: Vec<S>, delta: S },
    /// `u` with `<a^k,u> = 0` for all k and `<b,u> = 1`.
    Infeasible { row_id: usize, certificate: Multiplier<S> },
}

#[derive(Clone, Debug)]
pub struct FeasibilityReport<S> {
    pub outcome: FeasibilityOutcome<S>,
    pub result: EliminationResult<S>,
    pub h1: Vec<usize>,
    pub h2: Vec<usize>,
    pub ratio_sup: Ext<S>,
}

impl<S: Scalar> FeasibilityReport<S> {
    pub fn is_feasible(&self) -> bool {
        matches!(self.outcome, FeasibilityOutcome::Feasible { .. })
    }
}

pub fn check_feasibility<S: Scalar>(
    system: &FiniteSystem<S>,
    opts: &EliminationOptions,
) -> Result<FeasibilityReport<S>> {
    let result = run_elimination(system, opts)?;
    let (h1, h2) = split_rows(&result, &opts.tol);
    let (ratio, _) = ratio_sup(&result, &h2);
    for &pos in &h1 {
        let r = &result.rows[pos];
        let scale = S::max_of(r.row.rhs.abs(), S::one());
        if r.row.rhs.sign(&scale, &opts.tol) == Sign::Positive {
            let certificate = r.mult.scaled(&(S::one() / r.row.rhs.clone()));
            let outcome = FeasibilityOutcome::Infeasible { row_id: r.id, certificate };
            return Ok(FeasibilityReport { outcome, result, h1, h2, ratio_sup: ratio });
        }
    }
    let delta = match &ratio {
        Ext::Finite(v) => S::max_of(v.clone(), S::zero()) + S::one(),
        _ => S::one(),
    };
    let free = build_xdelta(&result, &h2, &delta);
    let witness = back_substitute(&result, &free, &S::zero(), &opts.tol)?;
    let outcome = FeasibilityOutcome::Feasible { witness, delta };
    Ok(FeasibilityReport { outcome, result, h1, h2, ratio_sup: ratio })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionBound {
    Bounded,
    /// Some variable was dirty: a recession ray exists.
    Unbounded,
    /// Some column vanished entirely: a lineality direction may exist.
    UnboundedOrLineality,
}

/// For a feasible system the region is bounded exactly when every step had
/// both H+ and H- nonempty.
pub fn check_region_bounded<S: Scalar>(result: &EliminationResult<S>) -> RegionBound {
    if result.steps.iter().any(|s| s.kind == StepKind::Vacuous) || !result.untouched.is_empty() {
        RegionBound::UnboundedOrLineality
    } else if result.steps.iter().any(|s| matches!(s.kind, StepKind::Dirty(_))) {
        RegionBound::Unbounded
    } else {
        RegionBound::Bounded
    }
}

/// Feasibility over the nested stages of a model.
#[derive(Clone, Debug)]
pub struct StagedFeasibility<S> {
    pub stages: Vec<FeasibilityReport<S>>,
    pub family_points: Vec<usize>,
    /// H2 ratio supremum per stage.
    pub ratio_sups: Vec<Ext<S>>,
    pub ratio_diverging: bool,
    /// Empirical exponent of the ratio growth against the number of family points.
    pub ratio_growth: Option<f64>,
    /// First stage whose finite system is already infeasible.
    pub infeasible_stage: Option<usize>,
}

pub fn staged_feasibility<S: Scalar>(
    model: &SilpModel,
    stages: usize,
    opts: &EliminationOptions,
) -> Result<StagedFeasibility<S>> {
    let mut out = Vec::new();
    let mut points = Vec::new();
    for s in 1..=stages {
        let sys: FiniteSystem<S> = model.instantiate_stage(s)?;
        points.push(sys.len() - model.rows.len());
        out.push(check_feasibility(&sys, opts)?);
    }
    let ratio_sups: Vec<Ext<S>> = out.iter().map(|r| r.ratio_sup.clone()).collect();
    let infeasible_stage = out.iter().position(|r| !r.is_feasible()).map(|p| p + 1);
    let values: Vec<f64> = ratio_sups.iter().map(|v| v.to_f64()).collect();
    let sizes: Vec<f64> = points.iter().map(|&p| p as f64).collect();
    Ok(StagedFeasibility {
        ratio_diverging: flags_divergence(&ratio_sups),
        ratio_growth: growth_exponent(&values, &sizes),
        stages: out,
        family_points: points,
        ratio_sups,
        infeasible_stage,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{LinearRow, RowId};
    use crate::scalar::{rat, Rational};

    fn q(v: i64) -> Rational {
        rat(v, 1)
    }

    #[test]
    fn infeasible_pair_gives_certificate() {
        let sys = FiniteSystem::from_dense(&[vec![q(1)], vec![q(-1)]], &[q(1), q(0)]);
        let rep = check_feasibility(&sys, &EliminationOptions::default()).unwrap();
        match rep.outcome {
            FeasibilityOutcome::Infeasible { certificate, .. } => {
                let img = certificate.image(&sys);
                assert_eq!(img.coeffs, vec![q(0)]);
                assert_eq!(img.rhs, q(1));
            }
            _ => panic!("expected infeasible"),
        }
    }

    #[test]
    fn feasible_witness_satisfies_rows() {
        let sys = FiniteSystem::from_dense(&[vec![q(1), q(1)], vec![q(0), q(-1)]], &[q(2), q(-1)]);
        let rep = check_feasibility(&sys, &EliminationOptions::default()).unwrap();
        let FeasibilityOutcome::Feasible { witness, .. } = rep.outcome else { panic!() };
        assert!(sys.violations(&witness, &q(0), &Tolerance::default()).is_empty());
        assert_eq!(check_region_bounded(&rep.result), RegionBound::Unbounded);
    }

    #[test]
    fn region_bound_cases() {
        let boxed = FiniteSystem::from_dense(&[vec![q(1)], vec![q(-1)]], &[q(0), q(-1)]);
        let r = check_feasibility(&boxed, &EliminationOptions::default()).unwrap();
        assert_eq!(check_region_bounded(&r.result), RegionBound::Bounded);
        let mut free = FiniteSystem::new(vec!["x".into()]);
        free.push(RowId::Atom("t".into()), LinearRow::new(vec![q(0)], q(-1)));
        let r = check_feasibility(&free, &EliminationOptions::default()).unwrap();
        assert!(r.is_feasible());
        assert_eq!(check_region_bounded(&r.result), RegionBound::UnboundedOrLineality);
    }

    #[test]
    fn xdelta_sign_rule() {
        let sys = FiniteSystem::from_dense(&[vec![q(1), q(-2)], vec![q(3), q(-1)]], &[q(0), q(5)]);
        let rep = check_feasibility(&sys, &EliminationOptions::default()).unwrap();
        let x = build_xdelta(&rep.result, &rep.h2, &q(7));
        assert_eq!(x, vec![q(7), q(-7)]);
        assert_eq!(rep.ratio_sup, Ext::Finite(rat(5, 4)));
    }
}
