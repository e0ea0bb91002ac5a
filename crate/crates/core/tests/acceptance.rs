//! Acceptance criteria: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_FAILURES` are expected to fail; their line is
//! still printed as FAIL and the reason is recorded in the decisions ledger.

mod common;

use common::*;
use conecert::firstorder::{
    directional_derivative, find_cadre, necessary_check, penalty_subdiff_check, penalty_value, prepare,
    sufficient_check, verify_alternance, CadreSearch, CheckOptions, Flavor,
};
use conecert::geometry::{project_psd_neg, project_soc, psd_neg_distance, Provenance};
use conecert::linalg::{lp_membership, norm, ray_extent, solve_positive_combination, sub};
use conecert::oracle::{fd_check, growth_probe, hull_membership_bruteforce};
use conecert::problem::{parse_problem, BlockActivity, Problem, SocState, ToleranceSet};
use conecert::registry;
use conecert::secondorder::{second_order_necessary, second_order_sufficient};
use rand::Rng;
use std::io::Write;

/// Madsen: a plain complete alternance exists, see the decisions ledger.
const KNOWN_FAILURES: &[usize] = &[3];

struct Line {
    ok: bool,
    notes: Vec<String>,
}

impl Line {
    fn new() -> Self {
        Line { ok: true, notes: Vec::new() }
    }

    fn check(&mut self, cond: bool, what: impl Into<String>) {
        let what = what.into();
        if !cond {
            self.ok = false;
            self.notes.push(format!("FAILED: {what}"));
        } else {
            self.notes.push(what);
        }
    }
}

fn load(name: &str) -> (Problem, Vec<f64>) {
    let p = registry::lookup(name, None).unwrap();
    let x = p.candidate.clone().unwrap();
    (p, x)
}

fn deltas_of(v: &[Vec<f64>]) -> Option<Vec<f64>> {
    verify_alternance(v, None, &ToleranceSet::default()).ok().map(|a| a.deltas)
}

fn active_indices(p: &Problem, x: &[f64]) -> Vec<usize> {
    let (_, act) = p.evaluate_objective(x).unwrap();
    act.iter().map(|a| a.index).collect()
}

fn criterion_1() -> Line {
    let mut l = Line::new();
    let (p, x) = load("bazaraa45");
    let v = vec![vec![176.0, 140.0], vec![-1.0, -1.0], vec![-2.0, 1.0]];
    let alt = verify_alternance(&v, None, &p.tolerances);
    l.check(alt.is_ok(), "verify_alternance accepts V");
    if let Ok(a) = alt {
        l.check(close(&a.deltas, &[-3.0, 456.0, -36.0], 1e-9), format!("Δ = {:?}", a.deltas));
        l.check(a.p == 3, "complete (p = 3)");
    }
    let s = sufficient_check(&p, &x, Flavor::Plain, &CheckOptions::default()).unwrap();
    l.check(s.radius > 0.0, format!("radius {}", s.radius));
    l
}

fn criterion_2() -> Line {
    let mut l = Line::new();
    let (p, x) = load("dem");
    l.check(active_indices(&p, &x) == vec![0, 1, 2], "W_act = {1,2,3}");
    let d = deltas_of(&[vec![5.0, 1.0], vec![-5.0, 1.0], vec![0.0, -2.0]]);
    l.check(d.as_deref().is_some_and(|d| close(d, &[10.0, -10.0, 10.0], 1e-9)), format!("Δ = {d:?}"));
    let opts = CheckOptions::default();
    let n = necessary_check(&p, &x, &opts).unwrap();
    let s = sufficient_check(&p, &x, Flavor::Plain, &opts).unwrap();
    l.check(n.zero_in_d, "0 ∈ D");
    l.check(s.zero_in_int_d, "0 ∈ int D");
    let found = s.complete_alternance.as_ref().map(|c| c.deltas.clone());
    l.check(
        found.as_deref().is_some_and(|d| close(d, &[10.0, -10.0, 10.0], 1e-9)),
        format!("searched alternance Δ = {found:?}"),
    );
    let g = growth_probe(&p, &x, 1, 1000, 0.1, 7).unwrap();
    l.check(!g.refuted && g.rho_hat > 0.0, format!("growth probe ρ̂ = {:.4}", g.rho_hat));
    l
}

fn criterion_3() -> Line {
    let mut l = Line::new();
    let (p, x) = load("madsen");
    l.check(active_indices(&p, &x) == vec![0, 1], "W_act = {1,2}");
    let paper = deltas_of(&[vec![1.0, 2.0], vec![1.0, 0.0], vec![-1.0, -1.0]]);
    l.check(paper.as_deref().is_some_and(|d| close(d, &[-1.0, 1.0, -2.0], 1e-9)), format!("Δ(V) = {paper:?}"));
    let (_, gs) = prepare(&p, &x, &CheckOptions::default()).unwrap();
    let gen = find_cadre(&gs, &CadreSearch::new(Flavor::Generalised, true), &p.tolerances).unwrap();
    l.check(
        gen.as_ref().is_some_and(|c| c.flavor == Flavor::Generalised && close(&c.deltas, &[-1.0, 1.0, -2.0], 1e-9)),
        format!("generalised search Δ = {:?}", gen.as_ref().map(|c| &c.deltas)),
    );
    let smallest = find_cadre(&gs, &CadreSearch::new(Flavor::Plain, false), &p.tolerances).unwrap();
    l.check(smallest.as_ref().is_some_and(|c| c.p == 2), "smallest plain cadre has p = 2");
    let plain = find_cadre(&gs, &CadreSearch::new(Flavor::Plain, true), &p.tolerances).unwrap();
    l.check(
        plain.is_none(),
        format!(
            "plain complete search finds nothing (found V = {:?}, Δ = {:?})",
            plain.as_ref().map(|c| &c.vectors),
            plain.as_ref().map(|c| &c.deltas)
        ),
    );
    l
}

fn criterion_4() -> Line {
    let mut l = Line::new();
    for d in 2..=4 {
        let p = registry::linf(d);
        let x = vec![0.0; d];
        let opts = CheckOptions::default();
        let (_, gs) = prepare(&p, &x, &opts).unwrap();
        let tol = &p.tolerances;
        let plain = find_cadre(&gs, &CadreSearch::new(Flavor::Plain, false), tol).unwrap();
        l.check(plain.as_ref().is_some_and(|c| c.p == 2), format!("d={d}: plain cadre p = 2"));
        let complete = find_cadre(&gs, &CadreSearch::new(Flavor::Plain, true), tol).unwrap();
        l.check(complete.is_none(), format!("d={d}: no plain complete alternance"));
        let gen = find_cadre(&gs, &CadreSearch::new(Flavor::Generalised, true), tol).unwrap();
        let mut want: Vec<f64> = (1..=d).map(|i| if (d - i) % 2 == 0 { -1.0 / d as f64 } else { 1.0 / d as f64 }).collect();
        want.push(1.0);
        l.check(
            gen.as_ref().is_some_and(|c| close(&c.deltas, &want, 1e-9)),
            format!("d={d}: generalised Δ = {:?}", gen.as_ref().map(|c| &c.deltas)),
        );
        let s = sufficient_check(&p, &x, Flavor::Generalised, &opts).unwrap();
        let bound = 1.0 / (2.0 * (d as f64).sqrt()) - 1e-6;
        l.check(s.radius >= bound, format!("d={d}: radius {:.6} ≥ {bound:.6}", s.radius));
    }
    l
}

fn criterion_5() -> Line {
    let mut l = Line::new();
    let (p, x) = load("counterexample-3-2");
    let opts = CheckOptions::default();
    let (_, gs) = prepare(&p, &x, &opts).unwrap();
    let (hull, cone) = (gs.hull_vectors(), gs.cone_vectors());
    let eps = 1e-3;
    l.check(lp_membership(&[0.0; 3], &hull, &cone).is_some(), "0 ∈ D");
    for (k, s) in [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, -1.0)] {
        let mut t = vec![0.0; 3];
        t[k] = s * eps;
        l.check(lp_membership(&t, &hull, &cone).is_some(), format!("{t:?} ∈ D"));
    }
    let ext = ray_extent(&[0.0, 0.0, 1.0], &hull, &cone);
    l.check(ext.is_some_and(|e| (e - 1.0).abs() < 1e-9), format!("extent along e3 = {ext:?}"));
    let tol = &p.tolerances;
    let gen = find_cadre(&gs, &CadreSearch::new(Flavor::Generalised, true), tol).unwrap();
    l.check(gen.is_none(), "no generalised complete alternance");
    let weak = find_cadre(&gs, &CadreSearch::new(Flavor::Weak, true), tol).unwrap();
    l.check(
        weak.as_ref().is_some_and(|c| c.flavor == Flavor::Weak && c.vectors.len() == 4 && c.residual() <= 1e-8),
        format!("weak complete alternance Δ = {:?}", weak.as_ref().map(|c| &c.deltas)),
    );
    l
}

fn criterion_6() -> Line {
    let mut l = Line::new();
    let (p, x) = load("soc-example");
    let act = p.active_sets(&x).unwrap();
    let state = |b: usize| match &act.blocks[b] {
        BlockActivity::Soc { state, .. } => Some(*state),
        _ => None,
    };
    l.check(state(0) == Some(SocState::Boundary), "I_+ = {1}");
    l.check(state(1) == Some(SocState::Vertex), "I_0 = {2}");
    let (_, gs) = prepare(&p, &x, &CheckOptions::default()).unwrap();
    let v1 = gs.grads.iter().find(|g| matches!(g.tag, Provenance::Scenario { index: 0, .. })).map(|g| g.v.clone());
    let v2 = gs.eta.iter().find(|g| matches!(g.tag, Provenance::SocBoundary { block: 0 })).map(|g| g.v.clone());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let v3 = gs
        .eta
        .iter()
        .find(|g| matches!(&g.tag, Provenance::SocVertex { block: 1, direction } if close(direction, &[-s, -s], 1e-12)))
        .map(|g| g.v.clone());
    l.check(v1.is_some() && v2.is_some() && v3.is_some(), "V1, V2, V3 present in the generator set");
    if let (Some(v1), Some(v2), Some(v3)) = (v1, v2, v3) {
        let d = deltas_of(&[v1, v2, v3]);
        l.check(
            d.as_deref().is_some_and(|d| close(d, &[s, -13.0 * s, 4.0], 1e-9)),
            format!("Δ = {d:?}"),
        );
    }
    l
}

fn criterion_7() -> Line {
    let mut l = Line::new();
    let (p, x) = load("sdp-example");
    let g0 = p.sdp_matrix(&p.blocks[0], &x).unwrap();
    let want = [[0.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 0.0]];
    l.check(g0.iter().zip(&want).all(|(r, w)| close(r, w, 1e-10)), format!("G0(x*) = {g0:?}"));
    let (_, gs) = prepare(&p, &x, &CheckOptions::default()).unwrap();
    let row = |q: [f64; 3]| {
        gs.eta
            .iter()
            .find(|g| matches!(&g.tag, Provenance::SdpNull { direction, .. }
                if close(direction, &q, 1e-10) || close(direction, &q.map(|c| -c), 1e-10)))
            .map(|g| g.v.clone())
    };
    let r1 = row([1.0, 0.0, 0.0]);
    let r3 = row([0.0, 0.0, 1.0]);
    l.check(r1.as_deref().is_some_and(|r| close(r, &[1.0, 2.0, 0.0], 1e-10)), format!("q = e1 row {r1:?}"));
    l.check(r3.as_deref().is_some_and(|r| close(r, &[2.0, -2.0, -1.0], 1e-10)), format!("q = e3 row {r3:?}"));
    let v = [vec![-3.0, -3.0, -2.0], vec![0.0, 0.0, 2.0], vec![1.0, 2.0, 0.0], vec![2.0, -2.0, -1.0]];
    let d = deltas_of(&v);
    l.check(d.as_deref().is_some_and(|d| close(d, &[-12.0, 15.0, -24.0, 6.0], 1e-8)), format!("Δ = {d:?}"));
    let s = sufficient_check(&p, &x, Flavor::Plain, &CheckOptions::default()).unwrap();
    let found = s.complete_alternance.map(|c| c.deltas);
    l.check(
        found.as_deref().is_some_and(|d| close(d, &[-12.0, 15.0, -24.0, 6.0], 1e-8)),
        format!("searched alternance Δ = {found:?}"),
    );
    l
}

fn random_basis(rng: &mut rand_chacha::ChaCha8Rng, d: usize) -> Vec<Vec<f64>> {
    loop {
        let z: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
        if conecert::linalg::det(&z).abs() > 0.1 {
            return z;
        }
    }
}

fn criterion_8() -> Line {
    let mut l = Line::new();
    let tol = ToleranceSet::default();
    let mut r = rng(8);
    let (mut disagree, mut cramer_bad, mut z_bad, mut cadres) = (0, 0, 0, 0);
    for _ in 0..500 {
        let (hull, cone) = random_family(&mut r);
        let d = hull[0].len();
        let lp = lp_membership(&vec![0.0; d], &hull, &cone).is_some();
        let gs = generator_set(&hull, &cone);
        let cadre = find_cadre(&gs, &CadreSearch::new(Flavor::Plain, false), &tol).unwrap();
        let brute = hull_membership_bruteforce(&vec![0.0; d], &hull, &cone, 40);
        if lp != cadre.is_some() || lp != brute {
            disagree += 1;
        }
        if let Some(c) = &cadre {
            cadres += 1;
            let ls = solve_positive_combination(&c.vectors, tol.eps_rank, tol.eps_pos);
            let scale = c.beta.iter().fold(1.0f64, |m, b| m.max(b.abs()));
            if !ls.as_deref().is_some_and(|b| close(b, &c.beta, 1e-8 * scale)) {
                cramer_bad += 1;
            }
        }
        // alternance verdicts under a random padding basis, on the cadre and on a raw subset
        let mut trials: Vec<Vec<Vec<f64>>> = cadre.iter().map(|c| c.vectors.clone()).collect();
        let all: Vec<Vec<f64>> = hull.iter().chain(&cone).cloned().collect();
        trials.push(all.into_iter().take(d + 1).collect());
        for v in trials {
            let z = random_basis(&mut r, d);
            let a = verify_alternance(&v, None, &tol).is_ok();
            let b = verify_alternance(&v, Some(&z), &tol).is_ok();
            if a != b {
                z_bad += 1;
            }
        }
    }
    l.check(disagree == 0, format!("triple agreement: {disagree} disagreements in 500"));
    l.check(cramer_bad == 0, format!("Cramer vs least squares: {cramer_bad} mismatches over {cadres} cadres"));
    l.check(z_bad == 0, format!("Z-invariance: {z_bad} verdict changes"));
    l
}

fn criterion_9() -> Line {
    let mut l = Line::new();
    let mut r = rng(9);
    let (mut idem, mut expand) = (0.0f64, 0);
    for _ in 0..1000 {
        let n = r.gen_range(2..=5);
        let a: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let pa = project_soc(&a);
        idem = idem.max(norm(&sub(&project_soc(&pa), &pa)));
        if norm(&sub(&pa, &project_soc(&b))) > norm(&sub(&a, &b)) + 1e-12 {
            expand += 1;
        }
    }
    l.check(idem <= 1e-12, format!("SOC idempotence error {idem:.2e}"));
    l.check(expand == 0, format!("SOC nonexpansiveness violations {expand}"));
    let (mut vi, mut dist_err) = (f64::NEG_INFINITY, 0.0f64);
    for _ in 0..100 {
        let n = r.gen_range(1..=4);
        let m = random_symmetric(&mut r, n, 3.0);
        let pm = project_psd_neg(&m);
        for _ in 0..5 {
            let b = random_symmetric(&mut r, n, 2.0);
            // Y = −B Bᵀ is negative semidefinite
            let y: Vec<Vec<f64>> = (0..n)
                .map(|i| (0..n).map(|j| -(0..n).map(|k| b[i][k] * b[j][k]).sum::<f64>()).collect())
                .collect();
            let ip: f64 = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (m[i][j] - pm[i][j]) * (y[i][j] - pm[i][j])).sum();
            vi = vi.max(ip);
        }
        let clamp = jacobi_eigenvalues(&m).iter().map(|s| s.max(0.0).powi(2)).sum::<f64>().sqrt();
        let frob = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| (m[i][j] - pm[i][j]).powi(2)).sum::<f64>().sqrt();
        dist_err = dist_err.max((psd_neg_distance(&m) - clamp).abs()).max((frob - clamp).abs());
    }
    l.check(vi <= 1e-8, format!("PSD variational inequality max {vi:.2e}"));
    l.check(dist_err <= 1e-10, format!("Frobenius distance identity error {dist_err:.2e}"));
    l
}

fn criterion_10() -> Line {
    let mut l = Line::new();
    let mut r = rng(10);
    let mut worst = 0.0f64;
    let mut cheb = 0;
    for k in 0..50 {
        let d = r.gen_range(1..=3);
        let n = r.gen_range(2..=4);
        let chebyshev = k % 2 == 1;
        cheb += chebyshev as usize;
        let x0: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let p = tied_problem(&mut r, d, n, chebyshev, &x0);
        let (_, gs) = prepare(&p, &x0, &CheckOptions::default()).unwrap();
        let mut h: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let hn = norm(&h).max(1e-3);
        h.iter_mut().for_each(|c| *c /= hn);
        let t = 1e-6;
        let y: Vec<f64> = x0.iter().zip(&h).map(|(a, b)| a + t * b).collect();
        let fd = (p.objective(&y).unwrap() - p.objective(&x0).unwrap()) / t;
        worst = worst.max((fd - directional_derivative(&gs.hull_vectors(), &h)).abs());
    }
    l.check(worst <= 1e-3, format!("max |FD − max⟨v,h⟩| = {worst:.2e} over 50 triples ({cheb} Chebyshev)"));
    l
}

fn criterion_11() -> Line {
    let mut l = Line::new();
    let (p, x) = load("bazaraa45");
    let opts = CheckOptions::default();
    let n = necessary_check(&p, &x, &opts).unwrap();
    let lambda = n.multipliers.as_ref().map_or(0.0, |m| m.l1_norm());
    l.check((lambda - 164.0).abs() < 1e-6, format!("‖λ*‖₁ = {lambda}"));
    let holds = |c: f64| penalty_subdiff_check(&p, &x, c, &opts).unwrap().holds;
    l.check(!holds(0.0), "fails at c = 0");
    for c in [lambda + 0.1, 2.0 * lambda, 10.0 * lambda] {
        l.check(holds(c), format!("holds at c = {c}"));
    }
    let grid: Vec<bool> = [0.0, 0.5, 1.0, 2.0].iter().map(|s| holds(s * lambda)).collect();
    l.check(grid.windows(2).all(|w| !w[0] || w[1]), format!("monotone on grid: {grid:?}"));
    let mut r = rng(11);
    let mut feasible = 0;
    let mut exact = true;
    for _ in 0..400 {
        let y = vec![r.gen_range(0.0..8.0), r.gen_range(0.0..8.0)];
        if p.check_feasible(&y).unwrap().feasible {
            feasible += 1;
            exact &= penalty_value(&p, &y, 37.0).unwrap() == p.objective(&y).unwrap();
        }
    }
    l.check(feasible > 0 && exact, format!("Φ_c = F exactly on {feasible} feasible points"));
    l
}

fn criterion_12() -> Line {
    let mut l = Line::new();
    let opts = CheckOptions::default();
    let saddle = parse_problem("[problem]\ndim = 2\nat = \"0, 0\"\n[scenario]\nf = \"x(1)^2 - x(2)^2\"\n").unwrap();
    let rep = second_order_necessary(&saddle, &[0.0, 0.0], 64, &opts).unwrap();
    let worst = rep.directions.iter().min_by(|a, b| a.value.total_cmp(&b.value));
    l.check(rep.refuted, "saddle refuted");
    l.check(
        worst.is_some_and(|w| w.h[1].abs() > 1.0 - 1e-9 && (w.value + 2.0).abs() < 1e-9),
        format!("worst direction {:?}", worst.map(|w| (&w.h, w.value))),
    );
    let bowl = parse_problem("[problem]\ndim = 2\n[scenario]\nf = \"x(1)^2 + x(2)^2\"\n").unwrap();
    let nec = second_order_necessary(&bowl, &[0.0, 0.0], 64, &opts).unwrap();
    let suf = second_order_sufficient(&bowl, &[0.0, 0.0], 64, &opts).unwrap();
    l.check(
        nec.holds && suf.holds && !nec.directions.is_empty() && suf.directions.iter().all(|d| d.passes),
        format!("bowl passes all {} samples", suf.directions.len()),
    );
    let mut r = rng(12);
    let mut fd_worst = 0.0f64;
    for _ in 0..200 {
        let d = r.gen_range(1..=3);
        let text = random_expression(&mut r, d);
        let e = conecert::expr::Expression::parse(&text, d).unwrap();
        let x: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let f = fd_check(&e, &x).unwrap();
        fd_worst = fd_worst.max(f.hess_error).max(f.grad_error);
    }
    l.check(fd_worst <= 1e-4, format!("AD vs FD worst relative error {fd_worst:.2e} on 200 expressions"));
    let mut mismatches = 0;
    for _ in 0..50 {
        let d = r.gen_range(1..=3);
        let n = r.gen_range(2..=5);
        let x0: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
        let p = tied_problem(&mut r, d, n, true, &x0);
        assert!(p.objective(&x0).unwrap() > 0.0);
        let sq = CheckOptions { squared: true, ..CheckOptions::default() };
        let a = (
            necessary_check(&p, &x0, &opts).unwrap().zero_in_d,
            sufficient_check(&p, &x0, Flavor::Generalised, &opts).unwrap().zero_in_int_d,
        );
        let b = (
            necessary_check(&p, &x0, &sq).unwrap().zero_in_d,
            sufficient_check(&p, &x0, Flavor::Generalised, &sq).unwrap().zero_in_int_d,
        );
        if a != b {
            mismatches += 1;
        }
    }
    l.check(mismatches == 0, format!("squared Chebyshev verdict mismatches: {mismatches} of 50"));
    l
}

#[test]
fn acceptance() {
    let criteria: [(usize, fn() -> Line); 12] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
        (12, criterion_12),
    ];
    let mut unexpected = Vec::new();
    for (id, f) in criteria {
        let start = std::time::Instant::now();
        let line = f();
        // written to the stdout handle so the lines survive output capture
        let _ = writeln!(
            std::io::stdout().lock(),
            "{} criterion {id} ({:.1}s): {}",
            if line.ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            line.notes.join("; ")
        );
        if !line.ok && !KNOWN_FAILURES.contains(&id) {
            unexpected.push(id);
        }
    }
    assert!(unexpected.is_empty(), "criteria failed: {unexpected:?}");
}
