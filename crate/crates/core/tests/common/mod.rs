#![allow(dead_code)]

use conecert::geometry::{Family, Generator, GeneratorSet, Provenance};
use conecert::problem::{parse_problem, Problem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Vector = Vec<f64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Generator set from raw vectors: `hull` as objective gradients, `cone` as set normals.
pub fn generator_set(hull: &[Vector], cone: &[Vector]) -> GeneratorSet {
    let grads = hull
        .iter()
        .enumerate()
        .map(|(i, v)| Generator {
            v: v.clone(),
            family: Family::Objective,
            tag: Provenance::Scenario { index: i, sign: 1 },
            dual: Vec::new(),
            block: None,
        })
        .collect();
    let na = cone
        .iter()
        .enumerate()
        .map(|(i, v)| Generator {
            v: v.clone(),
            family: Family::SetNormal,
            tag: Provenance::LowerBound { coord: i },
            dual: Vec::new(),
            block: None,
        })
        .collect();
    GeneratorSet { grads, eta: Vec::new(), na, sampled: false }
}

/// Small integer vectors, so that boundary cases of `0 ∈ D` actually occur.
pub fn random_family(rng: &mut ChaCha8Rng) -> (Vec<Vector>, Vec<Vector>) {
    let d = rng.gen_range(1..=3);
    let total = rng.gen_range(1..=6);
    let nh = rng.gen_range(1..=total);
    let mut v = || (0..d).map(|_| rng.gen_range(-3..=3) as f64).collect::<Vector>();
    let hull = (0..nh).map(|_| v()).collect();
    let cone = (nh..total).map(|_| v()).collect();
    (hull, cone)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(m: &[Vector]) -> Vector {
    let n = m.len();
    let mut a: Vec<Vector> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vector> {
    let mut m = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-scale..scale);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    m
}

fn random_atom(rng: &mut ChaCha8Rng, d: usize) -> String {
    let i = rng.gen_range(1..=d);
    let c = rng.gen_range(-2.0..2.0f64);
    match rng.gen_range(0..6) {
        0 => format!("{c:.3}*x({i})"),
        1 => format!("{c:.3}*x({i})^2"),
        2 => format!("sin({c:.3}*x({i}))"),
        3 => format!("cos(x({i}) + {c:.3})"),
        4 => format!("exp({:.3}*x({i}))", c / 2.0),
        _ => format!("x({i})*x({})", rng.gen_range(1..=d)),
    }
}

/// Random smooth expression in `x(1)..x(d)`.
pub fn random_expression(rng: &mut ChaCha8Rng, d: usize) -> String {
    let n = rng.gen_range(2..=4);
    let mut terms: Vec<String> = (0..n).map(|_| random_atom(rng, d)).collect();
    if rng.gen_bool(0.5) {
        let a = random_atom(rng, d);
        let b = random_atom(rng, d);
        terms.push(format!("({a})*({b})"));
    }
    terms.join(" + ")
}

/// Minimax or Chebyshev problem on `R^d` whose scenarios all tie at `x0`:
/// `f_i = e_i(x) − e_i(x0) + c_i` with `c_i` chosen so every scenario is active.
pub fn tied_problem(rng: &mut ChaCha8Rng, d: usize, n: usize, chebyshev: bool, x0: &[f64]) -> Problem {
    let kind = if chebyshev { "chebyshev" } else { "minimax" };
    let mut text = format!("[problem]\ndim = {d}\nkind = \"{kind}\"\n");
    let level = rng.gen_range(0.5..2.0f64);
    for _ in 0..n {
        let e = random_expression(rng, d);
        let probe = parse_problem(&format!("[problem]\ndim = {d}\n[scenario]\nf = \"{e}\"\n")).unwrap();
        let v = probe.scenario_value(0, x0).unwrap();
        if chebyshev {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            // |f − psi| = level at x0 with sign `sign`
            let psi = v - sign * level;
            text.push_str(&format!("[scenario]\nf = \"{e}\"\npsi = \"{psi:.17e}\"\n"));
        } else {
            text.push_str(&format!("[scenario]\nf = \"{e} + {:.17e}\"\n", level - v));
        }
    }
    parse_problem(&text).unwrap()
}
