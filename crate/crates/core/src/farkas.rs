//! Is `c x >= d` implied by the rows of a model? Answers come with a cone
//! certificate, a closure sequence, or a feasible counterexample.

use crate::duality::{
    analyze_model, extract_dual_certificate, extract_feasible_sequence, lift_primal, AnalysisConfig, ModelAnalysis, Tri,
};
use crate::error::{Error, Result};
use crate::model::{dot, LinearRow, RowId, SilpModel};
use crate::scalar::{Ext, Rational, Scalar, Sign, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FarkasVerdict {
    Yes,
    No,
    YesInLimit,
    /// Float mode only: `|z* - d|` is within tolerance.
    YesWithinTolerance,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureTerm<S> {
    pub u: Vec<(RowId, S)>,
    /// `sum u(i) a(i)` and `sum u(i) b(i)`.
    pub coeffs: Vec<S>,
    pub rhs: S,
    /// `max_k |coeffs_k - target_k|`.
    pub residual: S,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FarkasCertificate<S> {
    /// `sum u a = c` and `sum u b - lambda0 = d` with `lambda0 >= 0`.
    ExactCone { u: Vec<(RowId, S)>, lambda0: S },
    /// `sum u a = 0` and `sum u b = 1`.
    InfeasibleCone { u: Vec<(RowId, S)> },
    /// Images approaching `(target; target_rhs)`.
    ClosureSequence { target: Vec<S>, target_rhs: S, terms: Vec<ClosureTerm<S>> },
}

#[derive(Clone, Debug)]
pub struct FarkasAnswer<S> {
    pub verdict: FarkasVerdict,
    pub z_star: Ext<S>,
    pub certificate: Option<FarkasCertificate<S>>,
    pub counterexample: Option<Vec<S>>,
}

fn image<S: Scalar>(u: &[(RowId, S)], n: usize, row_of: &dyn Fn(&RowId) -> Option<LinearRow<S>>) -> std::result::Result<(Vec<S>, S), String> {
    let mut coeffs = vec![S::zero(); n];
    let mut rhs = S::zero();
    for (id, w) in u {
        if w.is_negative() {
            return Err(format!("negative weight on {}", id));
        }
        let row = row_of(id).ok_or_else(|| format!("unknown row {}", id))?;
        for k in 0..n {
            coeffs[k] = coeffs[k].clone() + w.clone() * row.coeffs[k].clone();
        }
        rhs = rhs + w.clone() * row.rhs.clone();
    }
    Ok((coeffs, rhs))
}

fn max_gap<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |m, (x, y)| S::max_of(m, (x.clone() - y.clone()).abs()))
}

/// Re-sums a certificate against rows supplied by `row_of`.
pub fn replay_farkas<S: Scalar>(
    cert: &FarkasCertificate<S>,
    c: &[S],
    d: &S,
    row_of: &dyn Fn(&RowId) -> Option<LinearRow<S>>,
    tol: &Tolerance,
) -> std::result::Result<(), String> {
    let n = c.len();
    match cert {
        FarkasCertificate::ExactCone { u, lambda0 } => {
            let (coeffs, rhs) = image(u, n, row_of)?;
            if lambda0.is_negative() {
                return Err("negative slack".into());
            }
            if coeffs.iter().zip(c).any(|(a, b)| !a.near(b, tol)) {
                return Err("sum u a differs from c".into());
            }
            if !(rhs - lambda0.clone()).near(d, tol) {
                return Err("sum u b - lambda0 differs from d".into());
            }
            Ok(())
        }
        FarkasCertificate::InfeasibleCone { u } => {
            let (coeffs, rhs) = image(u, n, row_of)?;
            if coeffs.iter().any(|a| !a.near(&S::zero(), tol)) {
                return Err("sum u a is not zero".into());
            }
            if !rhs.near(&S::one(), tol) {
                return Err(format!("sum u b = {} instead of 1", rhs));
            }
            Ok(())
        }
        FarkasCertificate::ClosureSequence { target, terms, .. } => {
            if terms.is_empty() {
                return Err("empty sequence".into());
            }
            let mut prev: Option<S> = None;
            for (m, t) in terms.iter().enumerate() {
                let (coeffs, rhs) = image(&t.u, n, row_of)?;
                if coeffs.iter().zip(&t.coeffs).any(|(a, b)| !a.near(b, tol)) || !rhs.near(&t.rhs, tol) {
                    return Err(format!("term {}: stated image does not match", m));
                }
                let gap = max_gap(&coeffs, target);
                if !gap.near(&t.residual, tol) {
                    return Err(format!("term {}: stated residual does not match", m));
                }
                if let Some(p) = &prev {
                    if (gap.clone() - p.clone()).sign(&S::max_of(p.abs(), S::one()), tol) == Sign::Positive {
                        return Err(format!("term {}: residual grows", m));
                    }
                }
                prev = Some(gap);
            }
            Ok(())
        }
    }
}

fn closure_from_infeasibility<S: Scalar>(a: &ModelAnalysis<S>) -> Vec<ClosureTerm<S>> {
    let mut terms: Vec<ClosureTerm<S>> = Vec::new();
    let n = a.last().c.len();
    for st in &a.stages {
        let mut best: Option<ClosureTerm<S>> = None;
        for r in &st.result.rows {
            if !r.row.rhs.is_positive() {
                continue;
            }
            let u0 = r.mult.get(0);
            let inv = S::one() / r.row.rhs.clone();
            let coeffs: Vec<S> = (0..n).map(|k| (r.row.coeffs[k].clone() + u0.clone() * st.c[k].clone()) * inv.clone()).collect();
            let residual = coeffs.iter().fold(S::zero(), |m, v| S::max_of(m, v.abs()));
            if best.as_ref().is_none_or(|b| residual < b.residual) {
                let u = r.mult.without(0).scaled(&inv).labelled(&st.system);
                best = Some(ClosureTerm { u, coeffs, rhs: S::one(), residual });
            }
        }
        if let Some(b) = best {
            if terms.last().is_none_or(|p| b.residual <= p.residual) {
                terms.push(b);
            }
        }
    }
    terms
}

/// Decides whether `c x >= d` holds on the model's feasible set, with the
/// objective of `model` replaced by `c`.
pub fn is_consequence<S: Scalar>(model: &SilpModel, c: &[Rational], d: &Rational, config: &AnalysisConfig) -> Result<FarkasAnswer<S>> {
    let mut m = model.clone();
    m.objective = c.to_vec();
    let a: ModelAnalysis<S> = analyze_model(&m, config)?;
    let ds = S::from_rational(d);
    let cs: Vec<S> = m.objective_as();

    if let Some(k) = a.infeasible_stage() {
        let st = &a.stages[k - 1];
        let pos = st.diagnostics.i1_pos.expect("infeasible stage has an I1 row");
        let r = &st.result.rows[pos];
        let u = r.mult.without(0).scaled(&(S::one() / r.row.rhs.clone())).labelled(&st.system);
        return Ok(FarkasAnswer {
            verdict: FarkasVerdict::Yes,
            z_star: Ext::PosInf,
            certificate: Some(FarkasCertificate::InfeasibleCone { u }),
            counterexample: None,
        });
    }
    if a.verdicts.primal_feasible.value == Tri::No {
        let terms = closure_from_infeasibility(&a);
        if terms.is_empty() {
            return Err(Error::Precondition("no row supports an infeasibility sequence".into()));
        }
        let target = vec![S::zero(); cs.len()];
        return Ok(FarkasAnswer {
            verdict: FarkasVerdict::YesInLimit,
            z_star: Ext::PosInf,
            certificate: Some(FarkasCertificate::ClosureSequence { target, target_rhs: S::one(), terms }),
            counterexample: None,
        });
    }

    let z_star = a.verdicts.primal_value.value.clone();
    let near = match &z_star {
        Ext::Finite(z) => !S::EXACT && z.near(&ds, &a.last().tol),
        _ => false,
    };
    let holds = near || !Ext::Finite(ds.clone()).gt(&z_star);
    if !holds {
        let st = a.last();
        let z = match &st.diagnostics.s {
            Ext::Finite(s) => (s.clone() + ds.clone()) / S::from_i64(2),
            _ => ds.clone() - S::one(),
        };
        let w = lift_primal(st, Some(z))?;
        if !(dot(&cs, &w.x) < ds) {
            return Err(Error::Verification("counterexample does not violate the query".into()));
        }
        return Ok(FarkasAnswer { verdict: FarkasVerdict::No, z_star, certificate: None, counterexample: Some(w.x) });
    }
    let yes = if near { FarkasVerdict::YesWithinTolerance } else { FarkasVerdict::Yes };
    let s_covers = match &a.last().diagnostics.s {
        Ext::Finite(sv) => sv >= &ds || (!S::EXACT && sv.near(&ds, &a.last().tol)),
        _ => false,
    };
    if s_covers {
        let cert = extract_dual_certificate(a.last()).expect("finite S has a maximiser");
        let lambda0 = S::max_of(cert.value.clone() - ds.clone(), S::zero());
        return Ok(FarkasAnswer {
            verdict: yes,
            z_star,
            certificate: Some(FarkasCertificate::ExactCone { u: cert.v, lambda0 }),
            counterexample: None,
        });
    }
    let seq = extract_feasible_sequence(&a)?;
    let st = a.last();
    let row_of = |id: &RowId| st.system.index_of(id).map(|i| st.system.rows[i].clone());
    let mut terms = Vec::new();
    for e in seq.elements {
        let (coeffs, rhs) = image(&e.v, cs.len(), &row_of).map_err(Error::Verification)?;
        let residual = max_gap(&coeffs, &cs);
        terms.push(ClosureTerm { u: e.v, coeffs, rhs, residual });
    }
    Ok(FarkasAnswer {
        verdict: FarkasVerdict::YesInLimit,
        z_star,
        certificate: Some(FarkasCertificate::ClosureSequence { target: cs, target_rhs: seq.limit, terms }),
        counterexample: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    fn q(v: i64) -> Rational {
        rat(v, 1)
    }

    fn rows_of(m: &SilpModel) -> impl Fn(&RowId) -> Option<LinearRow<Rational>> + '_ {
        move |id| m.row_by_id(id).ok()
    }

    #[test]
    fn exact_cone_for_scaled_bound() {
        let mut m = SilpModel::new("f", &["x"], vec![q(0)]);
        m.add_row("r1", &[("x", q(1))], q(1)).unwrap();
        let cfg = AnalysisConfig::for_model(&m, true);
        let ans: FarkasAnswer<Rational> = is_consequence(&m, &[q(2)], &q(1), &cfg).unwrap();
        assert_eq!(ans.verdict, FarkasVerdict::Yes);
        let cert = ans.certificate.unwrap();
        assert_eq!(cert, FarkasCertificate::ExactCone { u: vec![(RowId::Atom("r1".into()), q(2))], lambda0: q(1) });
        replay_farkas(&cert, &[q(2)], &q(1), &rows_of(&m), &Tolerance::default()).unwrap();
    }

    #[test]
    fn infeasible_system_implies_everything() {
        let mut m = SilpModel::new("f", &["x"], vec![q(0)]);
        m.add_row("r1", &[("x", q(1))], q(1)).unwrap();
        m.add_row("r2", &[("x", q(-1))], q(0)).unwrap();
        let cfg = AnalysisConfig::for_model(&m, true);
        let ans: FarkasAnswer<Rational> = is_consequence(&m, &[q(-7)], &q(100), &cfg).unwrap();
        assert_eq!(ans.verdict, FarkasVerdict::Yes);
        let cert = ans.certificate.unwrap();
        let FarkasCertificate::InfeasibleCone { u } = &cert else { panic!() };
        assert_eq!(u, &vec![(RowId::Atom("r1".into()), q(1)), (RowId::Atom("r2".into()), q(1))]);
        replay_farkas(&cert, &[q(-7)], &q(100), &rows_of(&m), &Tolerance::default()).unwrap();
    }

    #[test]
    fn violated_query_has_counterexample() {
        let mut m = SilpModel::new("f", &["x", "y"], vec![q(0), q(0)]);
        m.add_row("r1", &[("x", q(1))], q(1)).unwrap();
        m.add_row("r2", &[("y", q(1))], q(0)).unwrap();
        let cfg = AnalysisConfig::for_model(&m, true);
        let ans: FarkasAnswer<Rational> = is_consequence(&m, &[q(1), q(1)], &q(2), &cfg).unwrap();
        assert_eq!(ans.verdict, FarkasVerdict::No);
        let x = ans.counterexample.unwrap();
        assert!(x[0] >= q(1) && x[1] >= q(0));
        assert!(x[0].clone() + x[1].clone() < q(2));
        let unb: FarkasAnswer<Rational> = is_consequence(&m, &[q(-1), q(0)], &q(0), &cfg).unwrap();
        assert_eq!(unb.verdict, FarkasVerdict::No);
    }

    #[test]
    fn tampered_certificate_is_rejected() {
        let mut m = SilpModel::new("f", &["x"], vec![q(0)]);
        m.add_row("r1", &[("x", q(1))], q(1)).unwrap();
        let cert = FarkasCertificate::ExactCone { u: vec![(RowId::Atom("r1".into()), q(3))], lambda0: q(1) };
        assert!(replay_farkas(&cert, &[q(2)], &q(1), &rows_of(&m), &Tolerance::default()).is_err());
    }
}
