//! Slow, independent cross-checks: growth probes by sampling, hull membership
//! by grid search and projected gradients, projections by one-dimensional search and
//! derivatives by finite differences. Nothing here uses the LP or the
//! generator machinery it is meant to check.

use crate::expr::{ExprError, Expression};
use crate::linalg::{self, Vector};
use crate::problem::{Problem, ProblemError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("only {found} feasible samples in the ball (need at least {needed})")]
    TooFewFeasibleSamples { found: usize, needed: usize },
    #[error("growth order must be 1 or 2")]
    BadOrder,
}

pub const MIN_FEASIBLE_SAMPLES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthProbe {
    pub order: u32,
    pub radius: f64,
    pub feasible_samples: usize,
    /// `min (F(y) − F(x)) / |y − x|^order` over the samples.
    pub rho_hat: f64,
    /// Some sample has `F(y) < F(x) − eps`.
    pub refuted: bool,
    pub worst: Vector,
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Removes the components of `h` along the rows of `e` (Gram–Schmidt on the rows).
fn project_out(rows: &[Vector], h: &mut Vector) {
    let mut basis: Vec<Vector> = Vec::new();
    for r in rows {
        let mut q = r.clone();
        for b in &basis {
            let c = linalg::dot(&q, b);
            linalg::axpy(-c, b, &mut q);
        }
        let n = linalg::norm(&q);
        if n > 1e-12 {
            basis.push(linalg::scaled(1.0 / n, &q));
        }
    }
    for b in &basis {
        let c = linalg::dot(h, b);
        linalg::axpy(-c, b, h);
    }
}

/// Samples feasible points uniformly in `B(x, radius)` (within the affine
/// hull of `A`'s equalities) and fits the growth constant of `F`.
pub fn growth_probe(
    p: &Problem,
    x: &[f64],
    order: u32,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Result<GrowthProbe, OracleError> {
    if order != 1 && order != 2 {
        return Err(OracleError::BadOrder);
    }
    let d = x.len();
    let fx = p.objective(x)?;
    let eps = 1e-10 * fx.abs().max(1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut found = 0;
    let mut rho = f64::INFINITY;
    let mut worst = x.to_vec();
    let mut refuted = false;
    let max_attempts = 50 * n_samples.max(MIN_FEASIBLE_SAMPLES);
    for _ in 0..max_attempts {
        if found >= n_samples {
            break;
        }
        let mut h: Vector = (0..d).map(|_| gaussian(&mut rng)).collect();
        project_out(&p.set_a.eq_rows, &mut h);
        let nh = linalg::norm(&h);
        if nh < 1e-12 {
            continue;
        }
        let r = radius * rng.gen::<f64>().powf(1.0 / d as f64);
        let y = linalg::add(x, &linalg::scaled(r / nh, &h));
        let dist = linalg::norm(&linalg::sub(&y, x));
        if dist < 1e-14 || !p.check_feasible(&y)?.feasible {
            continue;
        }
        found += 1;
        let fy = p.objective(&y)?;
        if fy < fx - eps {
            refuted = true;
        }
        let q = (fy - fx) / dist.powi(order as i32);
        if q < rho {
            rho = q;
            worst = y;
        }
    }
    if found < MIN_FEASIBLE_SAMPLES {
        return Err(OracleError::TooFewFeasibleSamples { found, needed: MIN_FEASIBLE_SAMPLES });
    }
    Ok(GrowthProbe { order, radius, feasible_samples: found, rho_hat: rho, refuted, worst })
}

/// Euclidean projection onto the probability simplex.
fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, uk) in u.iter().enumerate() {
        cum += uk;
        let t = (cum - 1.0) / (k + 1) as f64;
        if uk - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// All compositions of `k` into `m` parts.
fn simplex_grid(m: usize, k: usize, out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>) {
    if cur.len() == m - 1 {
        let used: usize = cur.iter().sum();
        let mut full = cur.clone();
        full.push(k - used);
        out.push(full);
        return;
    }
    let used: usize = cur.iter().sum();
    for i in 0..=(k - used) {
        cur.push(i);
        simplex_grid(m, k, out, cur);
        cur.pop();
    }
}

fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `target ∈ conv(hull) + cone(cone)` by a coarse grid over the convex
/// weights followed by accelerated projected gradient on the squared
/// residual. Residual threshold `1e-6`.
pub fn hull_membership_bruteforce(target: &[f64], hull: &[Vector], cone: &[Vector], grid_n: usize) -> bool {
    let (nh, nc) = (hull.len(), cone.len());
    let combine = |w: &[f64]| {
        let mut r = linalg::scaled(-1.0, target);
        for (wi, v) in w.iter().zip(hull.iter().chain(cone)) {
            linalg::axpy(*wi, v, &mut r);
        }
        r
    };
    let mut start = vec![0.0; nh + nc];
    if nh > 0 {
        let mut k = grid_n.max(1);
        while k > 1 && binom(k + nh - 1, nh - 1) > 20_000.0 {
            k -= 1;
        }
        let mut grid = Vec::new();
        simplex_grid(nh, k, &mut grid, &mut Vec::new());
        let mut best = f64::INFINITY;
        for g in grid {
            let mut w: Vec<f64> = g.iter().map(|&c| c as f64 / k as f64).collect();
            w.extend(std::iter::repeat(0.0).take(nc));
            let r = linalg::norm(&combine(&w));
            if r < best {
                best = r;
                start = w;
            }
        }
    }
    // Lipschitz constant of the gradient: largest eigenvalue of the Gram matrix.
    let gens: Vec<&Vector> = hull.iter().chain(cone).collect();
    let gram: Vec<Vector> = gens.iter().map(|a| gens.iter().map(|b| linalg::dot(a, b)).collect()).collect();
    let lip = if gram.is_empty() { 1.0 } else { linalg::sym_eigen(&gram).0[0].max(1e-12) };
    let project = |w: &mut Vec<f64>| {
        if nh > 0 {
            project_simplex(&mut w[..nh]);
        }
        w[nh..].iter_mut().for_each(|v| *v = v.max(0.0));
    };
    let mut w = start;
    let mut y = w.clone();
    let mut t = 1.0f64;
    let mut best = linalg::norm(&combine(&w));
    let mut checkpoint = best;
    for it in 0..50_000 {
        if best <= 1e-6 {
            break;
        }
        if it % 1000 == 999 {
            // stalled at a positive distance
            if checkpoint - best < 1e-10 {
                break;
            }
            checkpoint = best;
        }
        let r = combine(&y);
        let grad: Vec<f64> = gens.iter().map(|g| linalg::dot(g, &r)).collect();
        let mut next: Vec<f64> = y.iter().zip(&grad).map(|(a, g)| a - g / lip).collect();
        project(&mut next);
        let rn = linalg::norm(&combine(&next));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        if rn > best && it % 100 != 0 {
            // restart momentum
            y = w.clone();
            t = 1.0;
            continue;
        }
        y = next
            .iter()
            .zip(&w)
            .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
            .collect();
        w = next;
        t = t_next;
        best = best.min(rn);
    }
    best <= 1e-6
}

/// Projection onto `K_{l+1} = {(t, w) : |w| ≤ t}` by a grid over the axis
/// value `t` followed by golden-section refinement; for fixed `t` the best `w`
/// is `ȳ` clipped to the ball of radius `t`.
pub fn soc_projection_search(y: &[f64]) -> Vector {
    let ybar = &y[1..];
    let nb = linalg::norm(ybar);
    let point = |t: f64| {
        let mut z = vec![t];
        if nb <= t {
            z.extend_from_slice(ybar);
        } else {
            z.extend(ybar.iter().map(|v| v * t / nb));
        }
        z
    };
    let cost = |t: f64| linalg::norm(&linalg::sub(y, &point(t)));
    let hi = 2.0 * linalg::norm(y) + 1.0;
    let n = 2000;
    let mut best = 0;
    for k in 1..=n {
        if cost(hi * k as f64 / n as f64) < cost(hi * best as f64 / n as f64) {
            best = k;
        }
    }
    let step = hi / n as f64;
    let (mut a, mut b) = ((best as f64 - 1.0).max(0.0) * step, (best as f64 + 1.0) * step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) <= cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    point(0.5 * (a + b))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdReport {
    /// Max over components of `|AD − FD| / max(1, |AD|)`.
    pub grad_error: f64,
    pub hess_error: f64,
}

pub const FD_GRAD_STEP: f64 = 1e-5;
pub const FD_HESS_STEP: f64 = 1e-4;

/// Compares the AD gradient and Hessian of `e` at `x` with central differences
/// computed from plain evaluations.
pub fn fd_check(e: &Expression, x: &[f64]) -> Result<FdReport, ExprError> {
    let d = x.len();
    let ad = e.eval2(x)?;
    let at = |shifts: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for (i, s) in shifts {
            y[*i] += s;
        }
        e.eval(&y)
    };
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(1.0);
    let (hg, hh) = (FD_GRAD_STEP, FD_HESS_STEP);
    let mut grad_error = 0.0f64;
    let mut hess_error = 0.0f64;
    for i in 0..d {
        let g = (at(&[(i, hg)])? - at(&[(i, -hg)])?) / (2.0 * hg);
        grad_error = grad_error.max(rel(ad.grad[i], g));
        for j in 0..d {
            let h = (at(&[(i, hh), (j, hh)])? - at(&[(i, hh), (j, -hh)])? - at(&[(i, -hh), (j, hh)])?
                + at(&[(i, -hh), (j, -hh)])?)
                / (4.0 * hh * hh);
            hess_error = hess_error.max(rel(ad.hess[i * d + j], h));
        }
    }
    Ok(FdReport { grad_error, hess_error })
}
