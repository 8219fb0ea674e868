//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS or FAIL line; the process fails if any line fails.

mod common;

use std::time::Instant;

use common::{consequence_oracle, load, lp_oracle, random_bounded_lp, random_lp, random_lp_sized};
use fmsilp_core::approx::value_sequence;
use fmsilp_core::convex::run_convex;
use fmsilp_core::duality::{
    analyze_model, build_augmented, extract_dual_certificate, lift_primal, replay_dual_certificate, AnalysisConfig,
    LEstimate, ModelAnalysis, Tri,
};
use fmsilp_core::farkas::{is_consequence, replay_farkas, FarkasCertificate, FarkasVerdict};
use fmsilp_core::feasibility::staged_feasibility;
use fmsilp_core::fm::{
    decompose_multiplier, run_elimination, verify_multiplier_identities, EliminationOptions, EliminationResult, OrderRule,
};
use fmsilp_core::io::{parse_model, ModelDoc};
use fmsilp_core::model::{dot, FiniteSystem, LinearRow, Multiplier, RowId, SilpModel};
use fmsilp_core::scalar::{rat, Ext, Rational, Scalar, Tolerance};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criterion 1: distance of `omega(delta)` from its closed form and of `L` from 0.
const OMEGA_TOL: f64 = 1e-3;
const L_TOL: f64 = 1e-3;
/// Criterion 3: distance of the empirical growth exponent from 1.
const GROWTH_TOL: f64 = 0.05;
/// Criterion 9: the last closure residual must fall below this.
const CLOSURE_TOL: f64 = 1e-3;
/// Criterion 10: multiplier and value tolerance for the convex checks.
const CONVEX_TOL: f64 = 1e-6;

const SEED: u64 = 0x005e_edf0;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn silp(name: &str) -> SilpModel {
    parse_model(&load(name)).expect("model file").silp().expect("model")
}

fn analyze(model: &SilpModel) -> ModelAnalysis<Rational> {
    analyze_model(model, &AnalysisConfig::for_model(model, true)).expect("analysis")
}

/// Random systems use the greedy order to stay inside the row budget.
fn lp_config(model: &SilpModel) -> AnalysisConfig {
    let mut config = AnalysisConfig::for_model(model, true);
    config.elimination.order = OrderRule::MinFill;
    config
}

fn exact() -> Tolerance {
    Tolerance::default()
}

fn finite(e: &Ext<Rational>) -> Option<f64> {
    e.finite().map(|v| v.to_f64())
}

/// Every elimination seen by criteria 1 to 6, for the identity suite.
#[derive(Default)]
struct Ledger {
    checked: usize,
    failures: Vec<String>,
}

impl Ledger {
    fn record(&mut self, label: &str, result: &EliminationResult<Rational>, system: &FiniteSystem<Rational>) {
        self.checked += 1;
        if let Err(v) = verify_multiplier_identities(result, system, &exact()) {
            self.failures.push(format!("{}: row {} {}", label, v.row_id, v.detail));
        }
    }

    fn record_analysis(&mut self, label: &str, a: &ModelAnalysis<Rational>) {
        for (s, st) in a.stages.iter().enumerate() {
            self.record(&format!("{} stage {}", label, s + 1), &st.result, &st.system);
        }
    }
}

fn row_of(model: &SilpModel) -> impl Fn(&RowId) -> Option<LinearRow<Rational>> + '_ {
    move |id| model.row_by_id(id).ok()
}

fn criterion_1(ledger: &mut Ledger) -> Check {
    let m = silp("not_primal_optimal.json");
    let a = analyze(&m);
    ledger.record_analysis("not-primal-optimal", &a);
    ensure(a.stages.len() == 8, format!("{} stages", a.stages.len()))?;
    for (s, v) in a.s_seq.iter().enumerate() {
        ensure(*v == Ext::Finite(rat(0, 1)), format!("S at stage {} is {}", s + 1, v.render()))?;
    }
    let d = &a.last().diagnostics;
    for (delta, expect) in [(2, 0.25), (3, 0.125), (5, 0.0625), (9, 0.03125)] {
        let got = finite(&d.omega(&rat(delta, 1)).0).ok_or(format!("omega({}) not finite", delta))?;
        ensure((got - expect).abs() <= OMEGA_TOL, format!("omega({}) = {} vs {}", delta, got, expect))?;
    }
    match &a.l {
        LEstimate::Converged { value } => {
            let l = finite(value).ok_or("L not finite")?;
            ensure(l.abs() <= L_TOL, format!("L = {}", l))?;
        }
        other => return Err(format!("L not converged: {:?}", other)),
    }
    ensure(a.verdicts.zero_gap.value == Tri::Yes, "zero_gap")?;
    ensure(a.verdicts.primal_solvable.value == Tri::Unknown, "primal_solvable")?;
    Ok(format!("S = 0 on 8 stages, omega within {:e}, L within {:e}", OMEGA_TOL, L_TOL))
}

fn criterion_2(ledger: &mut Ledger) -> Check {
    let m = silp("primal_solvable.json");
    let a = analyze(&m);
    ledger.record_analysis("primal-solvable", &a);
    let v = &a.verdicts;
    let zero = Ext::Finite(rat(0, 1));
    ensure(v.primal_value.value == zero, format!("primal value {}", v.primal_value.value.render()))?;
    for st in &a.stages {
        ensure(st.diagnostics.s == zero && st.diagnostics.s_pos.is_some(), "S = 0 not attained")?;
    }
    ensure(v.dual_solvable.value == Tri::Yes, "dual_solvable")?;
    ensure(v.zero_gap.value == Tri::Yes, "zero_gap")?;
    let w = lift_primal(a.last(), None).map_err(|e| e.to_string())?;
    let c: Vec<Rational> = m.objective_as();
    ensure(dot(&c, &w.x) == rat(0, 1), "witness objective is not 0")?;
    ensure(w.x == vec![rat(0, 1), rat(0, 1)], format!("witness {:?}", w.x))?;
    let full: FiniteSystem<Rational> = m.instantiate_stage(a.stages.len()).map_err(|e| e.to_string())?;
    ensure(full.violations(&w.x, &rat(0, 1), &exact()).is_empty(), "witness violates a row")?;
    Ok("value 0 exact, witness (0,0) verified".into())
}

fn criterion_3(ledger: &mut Ledger) -> Check {
    let m = silp("primal_infeasible_dual_solvable.json");
    let opts = EliminationOptions::default();
    let sf = staged_feasibility::<Rational>(&m, m.schedule.stages, &opts).map_err(|e| e.to_string())?;
    for (s, st) in sf.stages.iter().enumerate() {
        let sys: FiniteSystem<Rational> = m.instantiate_stage(s + 1).unwrap();
        ledger.record(&format!("feasibility stage {}", s + 1), &st.result, &sys);
    }
    ensure(sf.ratio_diverging, "ratio sup not flagged")?;
    let g = sf.ratio_growth.ok_or("no growth exponent")?;
    ensure((g - 1.0).abs() <= GROWTH_TOL, format!("growth exponent {}", g))?;
    let a = analyze(&m);
    ledger.record_analysis("primal-infeasible", &a);
    let cert = extract_dual_certificate(a.last()).ok_or("no dual certificate")?;
    replay_dual_certificate(&cert, &m.objective_as(), &row_of(&m), &exact())?;
    let seq = value_sequence::<Rational>(&m, 8, &opts).map_err(|e| e.to_string())?;
    ensure(seq.values.iter().all(|v| *v == Ext::Finite(rat(0, 1))), format!("v(P_n) = {:?}", seq.values))?;
    Ok(format!("growth exponent {:.4} (tol {}), certificate replayed, v(P_n) = 0", g, GROWTH_TOL))
}

fn criterion_4(ledger: &mut Ledger) -> Check {
    let m = silp("lower_bound.json");
    let a = analyze(&m);
    ledger.record_analysis("lower-bound", &a);
    for (s, st) in a.stages.iter().enumerate() {
        ensure(st.partition.i1.is_empty(), format!("I1 nonempty at stage {}", s + 1))?;
        let want = Ext::Finite(rat(s as i64 + 1, 1));
        ensure(a.s_seq[s] == want, format!("S_{} = {}", s + 1, a.s_seq[s].render()))?;
    }
    ensure(a.s_diverging, "S not flagged diverging")?;
    ensure(a.verdicts.dual_bounded.value == Tri::No, "dual_bounded")?;
    Ok("I1 empty, S_s = s, dual_bounded No".into())
}

fn criterion_5(ledger: &mut Ledger) -> Check {
    let a = vec![
        vec![rat(-2, 3), rat(-1, 1)],
        vec![rat(-1, 2), rat(-1, 1)],
        vec![rat(-1, 1), rat(-1, 1)],
        vec![rat(1, 1), rat(3, 1)],
    ];
    let sys = FiniteSystem::from_dense(&a, &[rat(1, 1), rat(1, 1), rat(1, 1), rat(1, 1)]);
    let opts = EliminationOptions { order: OrderRule::Explicit(vec![0]), ..Default::default() };
    let res = run_elimination(&sys, &opts).map_err(|e| e.to_string())?;
    ledger.record("four-row", &res, &sys);
    let got: Vec<(Rational, Rational)> = res.rows.iter().map(|r| (r.row.coeffs[1].clone(), r.row.rhs.clone())).collect();
    let want = vec![(rat(3, 2), rat(5, 2)), (rat(1, 1), rat(3, 1)), (rat(2, 1), rat(2, 1))];
    ensure(got == want, format!("rows {:?}", got))?;
    Ok("(3/2, 5/2), (1, 3), (2, 2) exact".into())
}

fn criterion_6(ledger: &mut Ledger) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    for k in 0..200 {
        let (lp, value) = random_bounded_lp(&mut rng);
        let m = lp.model("lp");
        let a: ModelAnalysis<Rational> = analyze_model(&m, &lp_config(&m)).map_err(|e| format!("lp {}: {}", k, e))?;
        ledger.record_analysis(&format!("lp {}", k), &a);
        let want = Ext::Finite(value);
        let v = &a.verdicts;
        ensure(v.primal_value.value == want, format!("lp {}: primal {} vs {}", k, v.primal_value.value.render(), want.render()))?;
        ensure(v.dual_value.value == want, format!("lp {}: dual {} vs {}", k, v.dual_value.value.render(), want.render()))?;
        ensure(a.l == LEstimate::ExactMinusInfinity, format!("lp {}: L = {:?}", k, a.l))?;
        let cert = extract_dual_certificate(a.last()).ok_or(format!("lp {}: no dual certificate", k))?;
        replay_dual_certificate(&cert, &m.objective_as(), &row_of(&m), &exact()).map_err(|e| format!("lp {}: {}", k, e))?;
    }
    Ok("200 LPs match vertex enumeration exactly".into())
}

fn same(a: &Multiplier<Rational>, b: &Multiplier<Rational>) -> bool {
    let ids = a.entries.iter().chain(&b.entries).map(|e| e.0);
    ids.into_iter().all(|i| a.get(i) == b.get(i))
}

fn criterion_7(ledger: &mut Ledger) -> Check {
    ensure(ledger.failures.is_empty(), ledger.failures.join("; "))?;
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 7);
    let opts = EliminationOptions { dedup: false, ..Default::default() };
    let mut done = 0;
    while done < 50 {
        let lp = random_lp(&mut rng);
        let sys = lp.system();
        let res = run_elimination(&sys, &opts).map_err(|e| e.to_string())?;
        if res.rows.is_empty() {
            continue;
        }
        let mut u_bar = Multiplier::zero();
        for r in &res.rows {
            if rng.gen_bool(0.5) {
                u_bar.add_scaled(&r.mult, &rat(rng.gen_range(1..=4), rng.gen_range(1..=3)));
            }
        }
        let dec = decompose_multiplier(&sys, &u_bar, res.clean.len(), &opts).map_err(|e| e.to_string())?;
        ensure(dec.terms.iter().all(|t| !t.1.is_negative()), "negative lambda")?;
        ensure(same(&dec.recombine(), &u_bar), format!("round trip {} differs", done))?;
        done += 1;
    }
    Ok(format!("{} eliminations satisfy the identities, 50 decompositions round-trip", ledger.checked))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 8);
    let mut tidy_count = 0;
    for k in 0..100 {
        // arbitrary orders get no fill control, so rows stay at six
        let lp = random_lp_sized(&mut rng, 4, 6);
        let aug = build_augmented(&lp.system(), &lp.objective());
        let mut perm: Vec<usize> = (0..lp.n()).collect();
        let mut seen = None;
        for _ in 0..5 {
            perm.shuffle(&mut rng);
            let opts = EliminationOptions { order: OrderRule::Explicit(perm.clone()), ..Default::default() };
            let tidy = run_elimination(&aug, &opts).map_err(|e| e.to_string())?.is_tidy();
            match seen {
                None => {
                    seen = Some(tidy);
                    tidy_count += usize::from(tidy);
                }
                Some(t) => ensure(t == tidy, format!("system {}: order {:?} changes tidiness", k, perm))?,
            }
        }
    }
    Ok(format!("100 systems x 5 orders agree, {} tidy", tidy_count))
}

fn criterion_9() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 9);
    let mut replayed = 0;
    for k in 0..100 {
        let lp = random_lp(&mut rng);
        let d = rat(rng.gen_range(-10..=10), rng.gen_range(1..=2));
        let m = lp.model("farkas");
        let c = lp.objective();
        let ans = is_consequence::<Rational>(&m, &c, &d, &lp_config(&m)).map_err(|e| format!("triple {}: {}", k, e))?;
        let want = if consequence_oracle(&lp, &d) { FarkasVerdict::Yes } else { FarkasVerdict::No };
        ensure(ans.verdict == want, format!("triple {}: {:?} vs oracle {:?} ({:?})", k, ans.verdict, want, lp_oracle(&lp)))?;
        match &ans.certificate {
            Some(cert @ (FarkasCertificate::ExactCone { .. } | FarkasCertificate::InfeasibleCone { .. })) => {
                replay_farkas(cert, &c, &d, &row_of(&m), &exact()).map_err(|e| format!("triple {}: {}", k, e))?;
                replayed += 1;
            }
            Some(other) => return Err(format!("triple {}: unexpected certificate {:?}", k, other)),
            None => {
                let x = ans.counterexample.as_ref().ok_or(format!("triple {}: No without counterexample", k))?;
                ensure(dot(&c, x) < d, format!("triple {}: counterexample meets c x >= d", k))?;
                ensure(lp.system().violations(x, &rat(0, 1), &exact()).is_empty(), format!("triple {}: infeasible point", k))?;
            }
        }
    }
    let m = silp("not_primal_optimal_free.json");
    let c = vec![rat(1, 1), rat(0, 1)];
    let d = rat(0, 1);
    let ans = is_consequence::<Rational>(&m, &c, &d, &AnalysisConfig::for_model(&m, true)).map_err(|e| e.to_string())?;
    ensure(ans.verdict == FarkasVerdict::YesInLimit, format!("closure case gave {:?}", ans.verdict))?;
    let cert = ans.certificate.ok_or("no closure certificate")?;
    replay_farkas(&cert, &c, &d, &row_of(&m), &exact())?;
    let FarkasCertificate::ClosureSequence { terms, .. } = &cert else { return Err("not a closure sequence".into()) };
    let res: Vec<f64> = terms.iter().map(|t| t.residual.to_f64()).collect();
    ensure(res.windows(2).all(|w| w[1] <= w[0]), format!("residuals {:?}", res))?;
    let last = *res.last().ok_or("empty sequence")?;
    ensure(last <= CLOSURE_TOL, format!("last residual {}", last))?;
    Ok(format!("100 triples match, {} cone certificates replayed, closure residual {:.2e} (tol {:e})", replayed, last, CLOSURE_TOL))
}

/// `max over samples of x + lambda (1 - x)`, minimised by ternary search.
fn slater_oracle(samples: &[f64]) -> (f64, f64) {
    let l = |lam: f64| samples.iter().map(|&x| x + lam * (1.0 - x)).fold(f64::NEG_INFINITY, f64::max);
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..200 {
        let (m1, m2) = (lo + (hi - lo) / 3.0, hi - (hi - lo) / 3.0);
        if l(m1) <= l(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let lam = (lo + hi) / 2.0;
    (lam, l(lam))
}

fn criterion_10() -> Check {
    let ModelDoc::Convex { program, stage } = parse_model(&load("convex_slater.json")).map_err(|e| e.to_string())? else {
        return Err("not a convex file".into());
    };
    let model = ModelDoc::Convex { program: program.clone(), stage }.silp().map_err(|e| e.to_string())?;
    let out = run_convex::<Rational>(&program, stage, &AnalysisConfig::for_model(&model, true)).map_err(|e| e.to_string())?;
    let v = &out.analysis.verdicts;
    ensure(v.tidy.value == Tri::Yes, "tidy")?;
    ensure(v.zero_gap.value == Tri::Yes, "zero_gap")?;
    let samples: Vec<f64> = program.samples(stage).iter().map(|x| x[0].to_f64()).collect();
    let (lam_ref, val_ref) = slater_oracle(&samples);
    let lag = out.lagrangian.as_ref().ok_or("no Lagrangian solution")?;
    let lam = lag.lambda[0].to_f64();
    let val = finite(&v.primal_value.value).ok_or("value not finite")?;
    ensure((lam - lam_ref).abs() <= CONVEX_TOL, format!("lambda {} vs {}", lam, lam_ref))?;
    ensure((val - val_ref).abs() <= CONVEX_TOL, format!("value {} vs {}", val, val_ref))?;
    ensure((lag.l_value.to_f64() - val_ref).abs() <= CONVEX_TOL, "L(lambda) differs from the value")?;

    let ModelDoc::Convex { program, stage } = parse_model(&load("convex_no_slater.json")).map_err(|e| e.to_string())? else {
        return Err("not a convex file".into());
    };
    ensure(program.samples(stage).len() == 17 * 17, "sample count")?;
    let model = ModelDoc::Convex { program: program.clone(), stage }.silp().map_err(|e| e.to_string())?;
    let out = run_convex::<Rational>(&program, stage, &AnalysisConfig::for_model(&model, true)).map_err(|e| e.to_string())?;
    let a = &out.analysis;
    ensure(a.verdicts.zero_gap.value == Tri::Yes, "no-slater zero_gap")?;
    ensure(a.last().diagnostics.s == Ext::Finite(rat(0, 1)), "no-slater S")?;
    for row in &a.omega_table {
        ensure(row.iter().all(|w| w.cmp_ext(&Ext::Finite(rat(0, 1))) != std::cmp::Ordering::Greater), "omega > 0")?;
    }
    Ok(format!("lambda {:.6}, value {:.6} (tol {:e}); no-slater S = 0, omega <= 0", lam, val, CONVEX_TOL))
}

fn criterion_11() -> Check {
    let m = silp("primal_solvable.json");
    let seq = value_sequence::<Rational>(&m, 12, &EliminationOptions::default()).map_err(|e| e.to_string())?;
    let vals: Vec<Rational> = seq.values.iter().map(|v| v.finite().cloned().ok_or("v(P_n) not finite")).collect::<Result<_, _>>()?;
    ensure(vals.windows(2).all(|w| w[0] <= w[1]), format!("not nondecreasing: {:?}", vals))?;
    let limit = vals.last().unwrap().clone();
    ensure(limit == rat(0, 1), format!("limit {}", limit))?;
    let a = analyze(&m);
    ensure(a.verdicts.dual_value.value == Ext::Finite(limit), format!("dual value {}", a.verdicts.dual_value.value.render()))?;
    Ok("v(P_1..12) nondecreasing to 0 = dual value".into())
}

fn main() {
    let mut ledger = Ledger::default();
    let mut failed = 0;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut(&mut Ledger) -> Check| {
        let t = Instant::now();
        let r = f(&mut ledger);
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(msg) => println!("PASS  [{:>2}] {}: {} ({:.2}s)", n, name, msg, secs),
            Err(msg) => {
                failed += 1;
                println!("FAIL  [{:>2}] {}: {} ({:.2}s)", n, name, msg, secs);
            }
        }
    };
    run(1, "not-primal-optimal staged diagnostics", &mut criterion_1);
    run(2, "primal-solvable", &mut criterion_2);
    run(3, "primal-infeasible dual-solvable", &mut criterion_3);
    run(4, "unbounded lower-bound family", &mut criterion_4);
    run(5, "four-row elimination", &mut criterion_5);
    run(6, "finite LP strong duality", &mut criterion_6);
    run(7, "multiplier identities and decomposition", &mut criterion_7);
    run(8, "tidiness under variable permutation", &mut |_| criterion_8());
    run(9, "Farkas consequence", &mut |_| criterion_9());
    run(10, "convex programs", &mut |_| criterion_10());
    run(11, "finite approximation sequence", &mut |_| criterion_11());
    if failed > 0 {
        println!("{} criteria failed", failed);
        std::process::exit(1);
    }
}
