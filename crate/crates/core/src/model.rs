//! Semi-infinite models, nested grid schedules and the finite stage systems
//! they instantiate.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

use crate::expr::{Expr, ExprError};
use crate::scalar::{parse_rational, render_rational, Rational, Scalar};

/// Identity of an original constraint.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RowId {
    Objective,
    Atom(String),
    FamilyPoint(String, Rational),
}

impl RowId {
    pub fn label(&self) -> String {
        match self {
            RowId::Objective => "objective".to_string(),
            RowId::Atom(name) => format!("atom:{}", name),
            RowId::FamilyPoint(fam, p) => format!("family:{}@{}", fam, render_rational(p)),
        }
    }

    pub fn parse_label(text: &str) -> Option<RowId> {
        if text == "objective" {
            return Some(RowId::Objective);
        }
        if let Some(name) = text.strip_prefix("atom:") {
            return Some(RowId::Atom(name.to_string()));
        }
        let rest = text.strip_prefix("family:")?;
        let (fam, p) = rest.rsplit_once('@')?;
        Some(RowId::FamilyPoint(fam.to_string(), parse_rational(p)?))
    }
}

impl fmt::Display for RowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `sum_k coeffs[k] x_k + z * z_var >= rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRow<S> {
    pub coeffs: Vec<S>,
    pub z: S,
    pub rhs: S,
}

impl<S: Scalar> LinearRow<S> {
    pub fn new(coeffs: Vec<S>, rhs: S) -> Self {
        LinearRow { coeffs, z: S::zero(), rhs }
    }

    pub fn lhs(&self, x: &[S], z: &S) -> S {
        let mut acc = self.z.clone() * z.clone();
        for (a, v) in self.coeffs.iter().zip(x) {
            if !a.is_zero() {
                acc = acc + a.clone() * v.clone();
            }
        }
        acc
    }

    /// Largest absolute entry among the coefficients and the z coefficient.
    pub fn scale(&self) -> S {
        let mut m = self.z.abs();
        for a in &self.coeffs {
            let v = a.abs();
            if v > m {
                m = v;
            }
        }
        m
    }

    pub fn abs_sum(&self, vars: &[usize]) -> S {
        vars.iter().fold(S::zero(), |acc, &k| acc + self.coeffs[k].abs())
    }
}

/// Nonnegative combination of original rows, stored sparsely by row index.
#[derive(Clone, Debug, PartialEq)]
pub struct Multiplier<S> {
    pub entries: Vec<(usize, S)>,
}

impl<S: Scalar> Multiplier<S> {
    pub fn unit(i: usize) -> Self {
        Multiplier { entries: vec![(i, S::one())] }
    }

    pub fn zero() -> Self {
        Multiplier { entries: Vec::new() }
    }

    pub fn get(&self, i: usize) -> S {
        match self.entries.binary_search_by_key(&i, |e| e.0) {
            Ok(pos) => self.entries[pos].1.clone(),
            Err(_) => S::zero(),
        }
    }

    pub fn scaled(&self, s: &S) -> Self {
        Multiplier { entries: self.entries.iter().map(|(i, v)| (*i, v.clone() * s.clone())).collect() }
    }

    /// `sa * a + sb * b`, merging sorted supports.
    pub fn combine(a: &Self, sa: &S, b: &Self, sb: &S) -> Self {
        let mut out = Vec::with_capacity(a.entries.len() + b.entries.len());
        let (mut i, mut j) = (0, 0);
        while i < a.entries.len() || j < b.entries.len() {
            let take_a = j >= b.entries.len() || (i < a.entries.len() && a.entries[i].0 < b.entries[j].0);
            let take_b = i >= a.entries.len() || (j < b.entries.len() && b.entries[j].0 < a.entries[i].0);
            if take_a {
                out.push((a.entries[i].0, sa.clone() * a.entries[i].1.clone()));
                i += 1;
            } else if take_b {
                out.push((b.entries[j].0, sb.clone() * b.entries[j].1.clone()));
                j += 1;
            } else {
                let v = sa.clone() * a.entries[i].1.clone() + sb.clone() * b.entries[j].1.clone();
                if !v.is_zero() {
                    out.push((a.entries[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        Multiplier { entries: out }
    }

    pub fn add_scaled(&mut self, other: &Self, s: &S) {
        *self = Multiplier::combine(self, &S::one(), other, s);
    }

    /// The row `sum_i u(i) row_i` of the system.
    pub fn image(&self, system: &FiniteSystem<S>) -> LinearRow<S> {
        let n = system.vars.len();
        let mut out = LinearRow { coeffs: vec![S::zero(); n], z: S::zero(), rhs: S::zero() };
        for (i, u) in &self.entries {
            let row = &system.rows[*i];
            for k in 0..n {
                if !row.coeffs[k].is_zero() {
                    out.coeffs[k] = out.coeffs[k].clone() + u.clone() * row.coeffs[k].clone();
                }
            }
            out.z = out.z.clone() + u.clone() * row.z.clone();
            out.rhs = out.rhs.clone() + u.clone() * row.rhs.clone();
        }
        out
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.iter().all(|(_, v)| !v.is_negative())
    }

    /// Drops the entry for row `i` (used to strip the objective row).
    pub fn without(&self, i: usize) -> Self {
        Multiplier { entries: self.entries.iter().filter(|e| e.0 != i).cloned().collect() }
    }

    pub fn labelled(&self, system: &FiniteSystem<S>) -> Vec<(RowId, S)> {
        self.entries.iter().map(|(i, v)| (system.ids[*i].clone(), v.clone())).collect()
    }
}

/// A finite linear inequality system, optionally augmented with the objective
/// row `-c x + z >= 0` at index 0.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSystem<S> {
    pub vars: Vec<String>,
    pub ids: Vec<RowId>,
    pub rows: Vec<LinearRow<S>>,
    pub augmented: bool,
}

impl<S: Scalar> FiniteSystem<S> {
    pub fn new(vars: Vec<String>) -> Self {
        FiniteSystem { vars, ids: Vec::new(), rows: Vec::new(), augmented: false }
    }

    pub fn push(&mut self, id: RowId, row: LinearRow<S>) {
        self.ids.push(id);
        self.rows.push(row);
    }

    pub fn n(&self) -> usize {
        self.vars.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn index_of(&self, id: &RowId) -> Option<usize> {
        self.ids.iter().position(|r| r == id)
    }

    /// Rows violated by `(x, z)` beyond the tolerance.
    pub fn violations(&self, x: &[S], z: &S, tol: &crate::scalar::Tolerance) -> Vec<usize> {
        let mut out = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let slack = row.lhs(x, z) - row.rhs.clone();
            let scale = S::max_of(row.scale(), row.rhs.abs());
            if slack.sign(&scale, tol) == crate::scalar::Sign::Negative {
                out.push(i);
            }
        }
        out
    }

    pub fn from_dense(a: &[Vec<S>], b: &[S]) -> Self {
        let n = a.first().map(|r| r.len()).unwrap_or(0);
        let mut sys = FiniteSystem::new((1..=n).map(|k| format!("x{}", k)).collect());
        for (i, (row, rhs)) in a.iter().zip(b).enumerate() {
            sys.push(RowId::Atom(format!("r{}", i + 1)), LinearRow::new(row.clone(), rhs.clone()));
        }
        sys
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).fold(S::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
}

/// Index set of a parametric family.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// `[lo, +inf)`
    HalfLine { lo: Rational },
    /// `[lo, hi]`
    Interval { lo: Rational, hi: Rational },
    /// `{start, start + 1, ...}`
    Integers { start: BigInt },
    /// An explicit finite index set.
    Points(Vec<Rational>),
}

/// A family `sum_k a_k(t) x_k >= b(t)` for `t` in a domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Family {
    pub name: String,
    pub parameter: String,
    pub domain: Domain,
    pub coeffs: Vec<Expr>,
    pub rhs: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AtomRow {
    pub name: String,
    pub coeffs: Vec<Rational>,
    pub rhs: Rational,
}

/// Grid refinement rule for one family; every rule yields nested grids.
#[derive(Clone, Debug, PartialEq)]
pub enum GridRule {
    /// Anchors `lo + s (r^j - 1)` for `j = 0..=levels` with `s = |lo|` (or 1 when
    /// `lo = 0`); stage `k` splits each anchor gap into `2^(k-1)` equal parts.
    Geometric { ratio: Rational, levels: u32 },
    /// `base * 2^(k-1)` equal subintervals of a bounded interval at stage `k`.
    Uniform { base: u64 },
    /// The first `base * 2^k` integers of the domain at stage `k`.
    IntegerPrefix { base: u64 },
    /// The first `step * k` integers of the domain at stage `k`.
    IntegerRange { step: u64 },
    /// The same explicit list at every stage.
    Explicit(Vec<Rational>),
}

impl GridRule {
    pub fn default_for(domain: &Domain) -> GridRule {
        match domain {
            Domain::HalfLine { .. } => GridRule::Geometric { ratio: Rational::from_integer(2.into()), levels: 12 },
            Domain::Interval { .. } => GridRule::Uniform { base: 8 },
            Domain::Integers { .. } => GridRule::IntegerPrefix { base: 8 },
            Domain::Points(p) => GridRule::Explicit(p.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSchedule {
    pub stages: usize,
    pub grids: BTreeMap<String, GridRule>,
    pub deltas: Vec<Rational>,
}

impl Default for GridSchedule {
    fn default() -> Self {
        GridSchedule { stages: 4, grids: BTreeMap::new(), deltas: default_deltas(20) }
    }
}

/// `delta_m = 2^m` for `m = 1..=count`.
pub fn default_deltas(count: u32) -> Vec<Rational> {
    (1..=count).map(|m| Rational::from_integer(BigInt::from(2).pow(m))).collect()
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("objective has {got} entries, expected {expected}")]
    ObjectiveLength { got: usize, expected: usize },
    #[error("row `{row}`: {source}")]
    Evaluation { row: String, source: ExprError },
    #[error("family `{family}` uses symbol `{symbol}` other than its parameter")]
    FreeSymbol { family: String, symbol: String },
    #[error("family `{0}` has an empty or invalid domain")]
    BadDomain(String),
    #[error("grid rule for `{0}` does not fit its domain")]
    BadGrid(String),
    #[error("stage index must be at least 1")]
    BadStage,
    #[error("delta schedule must be positive and strictly increasing")]
    BadDeltas,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SilpModel {
    pub name: String,
    pub variables: Vec<String>,
    pub objective: Vec<Rational>,
    pub rows: Vec<AtomRow>,
    pub families: Vec<Family>,
    pub schedule: GridSchedule,
}

impl SilpModel {
    pub fn new(name: &str, variables: &[&str], objective: Vec<Rational>) -> Self {
        SilpModel {
            name: name.to_string(),
            variables: variables.iter().map(|v| v.to_string()).collect(),
            objective,
            rows: Vec::new(),
            families: Vec::new(),
            schedule: GridSchedule::default(),
        }
    }

    pub fn n(&self) -> usize {
        self.variables.len()
    }

    pub fn is_finite(&self) -> bool {
        self.families.iter().all(|f| matches!(f.domain, Domain::Points(_)))
    }

    pub fn var_index(&self, name: &str) -> Result<usize, ModelError> {
        self.variables
            .iter()
            .position(|v| v == name)
            .ok_or_else(|| ModelError::UnknownVariable(name.to_string()))
    }

    pub fn add_row(&mut self, name: &str, coeffs: &[(&str, Rational)], rhs: Rational) -> Result<(), ModelError> {
        let mut dense = vec![Rational::zero(); self.n()];
        for (v, a) in coeffs {
            dense[self.var_index(v)?] = a.clone();
        }
        self.rows.push(AtomRow { name: name.to_string(), coeffs: dense, rhs });
        Ok(())
    }

    pub fn add_family(
        &mut self,
        name: &str,
        parameter: &str,
        domain: Domain,
        coeffs: &[(&str, &str)],
        rhs: &str,
    ) -> Result<(), ModelError> {
        let parse = |src: &str| {
            Expr::parse(src).map_err(|source| ModelError::Evaluation { row: name.to_string(), source })
        };
        let mut dense = vec![Expr::Lit(Rational::zero()); self.n()];
        for (v, src) in coeffs {
            dense[self.var_index(v)?] = parse(src)?;
        }
        let rhs = parse(rhs)?;
        self.families.push(Family {
            name: name.to_string(),
            parameter: parameter.to_string(),
            domain,
            coeffs: dense,
            rhs,
        });
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.n();
        let mut seen = std::collections::BTreeSet::new();
        for v in &self.variables {
            if !seen.insert(v.clone()) {
                return Err(ModelError::Duplicate(v.clone()));
            }
        }
        if self.objective.len() != n {
            return Err(ModelError::ObjectiveLength { got: self.objective.len(), expected: n });
        }
        let mut names = std::collections::BTreeSet::new();
        for r in &self.rows {
            if !names.insert(r.name.clone()) {
                return Err(ModelError::Duplicate(r.name.clone()));
            }
        }
        for f in &self.families {
            if !names.insert(f.name.clone()) {
                return Err(ModelError::Duplicate(f.name.clone()));
            }
            for e in f.coeffs.iter().chain(std::iter::once(&f.rhs)) {
                if let Some(sym) = e.symbols().into_iter().find(|s| *s != f.parameter) {
                    return Err(ModelError::FreeSymbol { family: f.name.clone(), symbol: sym });
                }
            }
            match &f.domain {
                Domain::Interval { lo, hi } if lo > hi => return Err(ModelError::BadDomain(f.name.clone())),
                Domain::Points(p) if p.is_empty() => return Err(ModelError::BadDomain(f.name.clone())),
                _ => {}
            }
            let rule = self.grid_rule(f);
            let fits = matches!(
                (&f.domain, &rule),
                (Domain::HalfLine { .. }, GridRule::Geometric { .. })
                    | (Domain::Interval { .. }, GridRule::Uniform { .. })
                    | (Domain::Integers { .. }, GridRule::IntegerPrefix { .. })
                    | (Domain::Integers { .. }, GridRule::IntegerRange { .. })
                    | (_, GridRule::Explicit(_))
            );
            if !fits {
                return Err(ModelError::BadGrid(f.name.clone()));
            }
            if let GridRule::Geometric { ratio, .. } = &rule {
                if *ratio <= Rational::one() {
                    return Err(ModelError::BadGrid(f.name.clone()));
                }
            }
        }
        let d = &self.schedule.deltas;
        if d.is_empty() || !d[0].is_positive() || d.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ModelError::BadDeltas);
        }
        Ok(())
    }

    pub fn grid_rule(&self, family: &Family) -> GridRule {
        self.schedule
            .grids
            .get(&family.name)
            .cloned()
            .unwrap_or_else(|| GridRule::default_for(&family.domain))
    }

    /// Parameter values of `family` used at `stage` (1-based), ascending.
    pub fn grid_points(&self, family: &Family, stage: usize) -> Result<Vec<Rational>, ModelError> {
        if stage == 0 {
            return Err(ModelError::BadStage);
        }
        let rule = self.grid_rule(family);
        let bad = || ModelError::BadGrid(family.name.clone());
        let pts = match (&family.domain, rule) {
            (Domain::HalfLine { lo }, GridRule::Geometric { ratio, levels }) => {
                let s = if lo.is_zero() { Rational::one() } else { lo.abs() };
                let mut anchors = Vec::new();
                let mut power = Rational::one();
                for _ in 0..=levels {
                    anchors.push(lo.clone() + s.clone() * (power.clone() - Rational::one()));
                    power *= ratio.clone();
                }
                refine(&anchors, 1u64 << (stage - 1).min(40))
            }
            (Domain::Interval { lo, hi }, GridRule::Uniform { base }) => {
                if lo == hi {
                    vec![lo.clone()]
                } else {
                    let parts = base.max(1) << (stage - 1).min(40);
                    refine(&[lo.clone(), hi.clone()], parts)
                }
            }
            (Domain::Integers { start }, GridRule::IntegerPrefix { base }) => {
                let count = base.max(1) << stage.min(40);
                (0..count).map(|j| Rational::from_integer(start + BigInt::from(j))).collect()
            }
            (Domain::Integers { start }, GridRule::IntegerRange { step }) => {
                let count = step.max(1) * stage as u64;
                (0..count).map(|j| Rational::from_integer(start + BigInt::from(j))).collect()
            }
            (domain, GridRule::Explicit(mut p)) => {
                p.sort();
                p.dedup();
                let inside = |t: &Rational| match domain {
                    Domain::HalfLine { lo } => t >= lo,
                    Domain::Interval { lo, hi } => t >= lo && t <= hi,
                    Domain::Integers { start } => t.is_integer() && t.to_integer() >= *start,
                    Domain::Points(all) => all.contains(t),
                };
                if p.is_empty() || !p.iter().all(inside) {
                    return Err(bad());
                }
                p
            }
            _ => return Err(bad()),
        };
        Ok(pts)
    }

    /// Instantiates stage `stage`: atoms first, then each family over its grid.
    pub fn instantiate_stage<S: Scalar>(&self, stage: usize) -> Result<FiniteSystem<S>, ModelError> {
        let mut sys = FiniteSystem::new(self.variables.clone());
        for r in &self.rows {
            sys.push(
                RowId::Atom(r.name.clone()),
                LinearRow::new(r.coeffs.iter().map(S::from_rational).collect(), S::from_rational(&r.rhs)),
            );
        }
        for f in &self.families {
            for t in self.grid_points(f, stage)? {
                sys.push(RowId::FamilyPoint(f.name.clone(), t.clone()), self.family_row(f, &t)?);
            }
        }
        Ok(sys)
    }

    /// Row of `family` at parameter `t`, evaluated exactly then converted.
    pub fn family_row<S: Scalar>(&self, family: &Family, t: &Rational) -> Result<LinearRow<S>, ModelError> {
        let eval = |e: &Expr| -> Result<S, ModelError> {
            let v: Rational = e.eval_at(&family.parameter, t).map_err(|source| ModelError::Evaluation {
                row: RowId::FamilyPoint(family.name.clone(), t.clone()).label(),
                source,
            })?;
            Ok(S::from_rational(&v))
        };
        let coeffs = family.coeffs.iter().map(eval).collect::<Result<Vec<_>, _>>()?;
        Ok(LinearRow::new(coeffs, eval(&family.rhs)?))
    }

    /// Evaluates a single original row by identity.
    pub fn row_by_id<S: Scalar>(&self, id: &RowId) -> Result<LinearRow<S>, ModelError> {
        match id {
            RowId::Objective => Ok(LinearRow {
                coeffs: self.objective.iter().map(|c| -S::from_rational(c)).collect(),
                z: S::one(),
                rhs: S::zero(),
            }),
            RowId::Atom(name) => {
                let r = self
                    .rows
                    .iter()
                    .find(|r| &r.name == name)
                    .ok_or_else(|| ModelError::UnknownVariable(name.clone()))?;
                Ok(LinearRow::new(r.coeffs.iter().map(S::from_rational).collect(), S::from_rational(&r.rhs)))
            }
            RowId::FamilyPoint(fam, t) => {
                let f = self
                    .families
                    .iter()
                    .find(|f| &f.name == fam)
                    .ok_or_else(|| ModelError::UnknownVariable(fam.clone()))?;
                self.family_row(f, t)
            }
        }
    }

    pub fn objective_as<S: Scalar>(&self) -> Vec<S> {
        self.objective.iter().map(S::from_rational).collect()
    }
}

fn refine(anchors: &[Rational], parts: u64) -> Vec<Rational> {
    let mut out = Vec::new();
    for w in anchors.windows(2) {
        let step = (w[1].clone() - w[0].clone()) / Rational::from_integer(BigInt::from(parts));
        for j in 0..parts {
            out.push(w[0].clone() + step.clone() * Rational::from_integer(BigInt::from(j)));
        }
    }
    if let Some(last) = anchors.last() {
        out.push(last.clone());
    }
    out
}
