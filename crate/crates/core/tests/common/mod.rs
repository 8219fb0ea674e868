//! Brute-force reference solvers and random instance generators shared by the
//! integration tests. Nothing here calls into the elimination code.

#![allow(dead_code)]

use fmsilp_core::model::{FiniteSystem, SilpModel};
use fmsilp_core::scalar::{rat, Rational};
use rand::Rng;

/// `min c x` subject to `A x >= b` with small integer data.
#[derive(Clone, Debug)]
pub struct IntLp {
    pub a: Vec<Vec<i64>>,
    pub b: Vec<i64>,
    pub c: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum OracleValue {
    Infeasible,
    Unbounded,
    Optimal(Rational),
}

/// Far beyond any vertex coordinate of systems with entries in `-5..=5` and
/// at most four columns.
const BOX: i128 = 100_000;

impl IntLp {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn var_names(&self) -> Vec<String> {
        (1..=self.n()).map(|k| format!("x{}", k)).collect()
    }

    pub fn system(&self) -> FiniteSystem<Rational> {
        let a: Vec<Vec<Rational>> = self.a.iter().map(|r| r.iter().map(|&v| rat(v, 1)).collect()).collect();
        let b: Vec<Rational> = self.b.iter().map(|&v| rat(v, 1)).collect();
        FiniteSystem::from_dense(&a, &b)
    }

    pub fn objective(&self) -> Vec<Rational> {
        self.c.iter().map(|&v| rat(v, 1)).collect()
    }

    pub fn model(&self, name: &str) -> SilpModel {
        let names = self.var_names();
        let refs: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut m = SilpModel::new(name, &refs, self.objective());
        for (i, (row, rhs)) in self.a.iter().zip(&self.b).enumerate() {
            let coeffs: Vec<(&str, Rational)> = refs.iter().zip(row).map(|(v, &a)| (*v, rat(a, 1))).collect();
            m.add_row(&format!("r{}", i + 1), &coeffs, rat(*rhs, 1)).expect("row");
        }
        m
    }
}

fn det(m: &[Vec<i128>]) -> i128 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    let mut total = 0;
    for j in 0..n {
        if m[0][j] == 0 {
            continue;
        }
        let minor: Vec<Vec<i128>> =
            m[1..].iter().map(|r| r.iter().enumerate().filter(|(k, _)| *k != j).map(|(_, v)| *v).collect()).collect();
        let term = m[0][j] * det(&minor);
        total += if j % 2 == 0 { term } else { -term };
    }
    total
}

fn combinations(m: usize, k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if cur.len() == k {
        out.push(cur.clone());
        return;
    }
    for i in start..m {
        if m - i < k - cur.len() {
            break;
        }
        cur.push(i);
        combinations(m, k, i + 1, cur, out);
        cur.pop();
    }
}

/// Best vertex of the system intersected with `|x_k| <= bound`, as a reduced
/// fraction `(num, den)` with `den > 0`.
fn boxed_min(lp: &IntLp, bound: i128) -> Option<(i128, i128)> {
    let n = lp.n();
    let mut rows: Vec<(Vec<i128>, i128)> =
        lp.a.iter().zip(&lp.b).map(|(r, &b)| (r.iter().map(|&v| v as i128).collect(), b as i128)).collect();
    for k in 0..n {
        let mut e = vec![0i128; n];
        e[k] = 1;
        rows.push((e.clone(), -bound));
        e[k] = -1;
        rows.push((e, -bound));
    }
    let mut subsets = Vec::new();
    combinations(rows.len(), n, 0, &mut Vec::new(), &mut subsets);
    let mut best: Option<(i128, i128)> = None;
    for s in subsets {
        let mat: Vec<Vec<i128>> = s.iter().map(|&i| rows[i].0.clone()).collect();
        let d = det(&mat);
        if d == 0 {
            continue;
        }
        let num: Vec<i128> = (0..n)
            .map(|j| {
                let mut mj = mat.clone();
                for (r, &i) in mj.iter_mut().zip(&s) {
                    r[j] = rows[i].1;
                }
                det(&mj)
            })
            .collect();
        let (num, d) = if d < 0 { (num.iter().map(|v| -v).collect::<Vec<_>>(), -d) } else { (num, d) };
        let feasible = rows.iter().all(|(a, b)| a.iter().zip(&num).map(|(x, y)| x * y).sum::<i128>() >= b * d);
        if !feasible {
            continue;
        }
        let val: i128 = lp.c.iter().zip(&num).map(|(&c, x)| c as i128 * x).sum();
        let better = match best {
            None => true,
            Some((p, q)) => val * q < p * d,
        };
        if better {
            best = Some((val, d));
        }
    }
    best
}

/// Vertex enumeration on two nested boxes: a feasible problem is unbounded
/// exactly when doubling the box lowers the optimum.
pub fn lp_oracle(lp: &IntLp) -> OracleValue {
    let Some((p1, q1)) = boxed_min(lp, BOX) else { return OracleValue::Infeasible };
    let (p2, q2) = boxed_min(lp, 2 * BOX).expect("larger box stays feasible");
    if p2 * q1 < p1 * q2 {
        return OracleValue::Unbounded;
    }
    OracleValue::Optimal(Rational::new(p1.into(), q1.into()))
}

/// `c x >= d` on the whole feasible set.
pub fn consequence_oracle(lp: &IntLp, d: &Rational) -> bool {
    match lp_oracle(lp) {
        OracleValue::Infeasible => true,
        OracleValue::Unbounded => false,
        OracleValue::Optimal(v) => &v >= d,
    }
}

pub fn random_lp<R: Rng>(rng: &mut R) -> IntLp {
    random_lp_sized(rng, 4, 8)
}

/// Up to `max_n` columns and `max_m` rows with entries in `-5..=5`.
pub fn random_lp_sized<R: Rng>(rng: &mut R, max_n: usize, max_m: usize) -> IntLp {
    let n = rng.gen_range(1..=max_n);
    let m = rng.gen_range(1..=max_m);
    let a = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-5..=5)).collect()).collect();
    let b = (0..m).map(|_| rng.gen_range(-5..=5)).collect();
    let c = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
    IntLp { a, b, c }
}

/// Draws until the oracle reports a finite optimum.
pub fn random_bounded_lp<R: Rng>(rng: &mut R) -> (IntLp, Rational) {
    loop {
        let lp = random_lp(rng);
        if let OracleValue::Optimal(v) = lp_oracle(&lp) {
            return (lp, v);
        }
    }
}

pub fn load(name: &str) -> String {
    let path = format!("{}/../../models/{}", env!("CARGO_MANIFEST_DIR"), name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {}", path, e))
}
