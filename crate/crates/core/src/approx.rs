//! Values of finite sub-problems and the nondecreasing sequence `v(P_n)` for
//! countably indexed models.

use crate::duality::{analyze_stage, stage_primal_value};
use crate::error::{Error, Result};
use crate::fm::EliminationOptions;
use crate::model::{Domain, FiniteSystem, RowId, SilpModel};
use crate::scalar::{Ext, Scalar};

/// Divergence heuristic for a nondecreasing stage sequence: the last three
/// increments are each at least 1, or (float mode) each step grows the value
/// by a factor of at least 1.5. A `+inf` entry counts as diverged.
pub fn flags_divergence<S: Scalar>(values: &[Ext<S>]) -> bool {
    if values.iter().any(|v| matches!(v, Ext::PosInf)) {
        return true;
    }
    if values.len() < 4 {
        return false;
    }
    let tail = &values[values.len() - 4..];
    let finite: Option<Vec<&S>> = tail.iter().map(|v| v.finite()).collect();
    let Some(f) = finite else { return false };
    let unit_steps = f.windows(2).all(|w| w[1].clone() - w[0].clone() >= S::one());
    let growth = !S::EXACT
        && f.windows(2).all(|w| w[0].is_positive() && w[1].clone() >= w[0].clone() * S::from_rational(&crate::scalar::rat(3, 2)));
    unit_steps || growth
}

/// `log(v_s / v_{s-1}) / log(m_s / m_{s-1})` for the last two entries, when
/// both values are positive and the sizes differ.
pub fn growth_exponent(values: &[f64], sizes: &[f64]) -> Option<f64> {
    let k = values.len();
    if k < 2 || sizes.len() != k {
        return None;
    }
    let (v0, v1, m0, m1) = (values[k - 2], values[k - 1], sizes[k - 2], sizes[k - 1]);
    if !(v0 > 0.0 && v1 > 0.0 && m0 > 0.0 && m1 > m0) || !v0.is_finite() || !v1.is_finite() {
        return None;
    }
    Some((v1 / v0).ln() / (m1 / m0).ln())
}

/// Optimal value of `min c x` over the rows of `system` with indices in `subset`:
/// `+inf` when infeasible, `-inf` when unbounded.
pub fn finite_subset_value<S: Scalar>(
    system: &FiniteSystem<S>,
    subset: &[usize],
    c: &[S],
    opts: &EliminationOptions,
) -> Result<Ext<S>> {
    let mut sub = FiniteSystem::new(system.vars.clone());
    for &i in subset {
        let row = system.rows.get(i).ok_or_else(|| Error::Precondition(format!("row {} out of range", i)))?;
        sub.push(system.ids[i].clone(), row.clone());
    }
    let stage = analyze_stage(&sub, c, opts)?;
    Ok(stage_primal_value(&stage))
}

/// The prefix system `P_n`: every atom row plus the first `n` points of each
/// integer-indexed family (explicit point lists contribute their first `n`).
pub fn prefix_system<S: Scalar>(model: &SilpModel, n: usize) -> Result<FiniteSystem<S>> {
    let mut sys = FiniteSystem::new(model.variables.clone());
    let full: FiniteSystem<S> = model.instantiate_stage(1)?;
    for (id, row) in full.ids.iter().zip(&full.rows) {
        if matches!(id, RowId::Atom(_)) {
            sys.push(id.clone(), row.clone());
        }
    }
    for f in &model.families {
        let points: Vec<crate::scalar::Rational> = match &f.domain {
            Domain::Integers { start } => (0..n)
                .map(|j| crate::scalar::Rational::from_integer(start + num_bigint::BigInt::from(j)))
                .collect(),
            Domain::Points(p) => p.iter().take(n).cloned().collect(),
            _ => {
                return Err(Error::Precondition(format!(
                    "family `{}` is not countably indexed",
                    f.name
                )))
            }
        };
        for t in points {
            sys.push(RowId::FamilyPoint(f.name.clone(), t.clone()), model.family_row(f, &t)?);
        }
    }
    Ok(sys)
}

#[derive(Clone, Debug)]
pub struct ValueSequence<S> {
    pub values: Vec<Ext<S>>,
    pub diverging: bool,
}

/// `v(P_1), ..., v(P_n_max)`.
pub fn value_sequence<S: Scalar>(model: &SilpModel, n_max: usize, opts: &EliminationOptions) -> Result<ValueSequence<S>> {
    let c: Vec<S> = model.objective_as();
    let mut values = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let sys: FiniteSystem<S> = prefix_system(model, n)?;
        let all: Vec<usize> = (0..sys.len()).collect();
        values.push(finite_subset_value(&sys, &all, &c, opts)?);
    }
    let diverging = flags_divergence(&values);
    Ok(ValueSequence { values, diverging })
}
