//! Sampling of the linearized feasible cone and the linearized-problem spot check.

use super::{prepare, CheckError, CheckOptions};
use crate::geometry::{self, GeneratorSet, PointModel};
use crate::linalg::{self, LinearProgram, LpOutcome, Relation, Vector};
use crate::problem::Problem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// `F'(x, h) = max_v ⟨v, h⟩` over the objective generators.
pub fn directional_derivative(hull: &[Vector], h: &[f64]) -> f64 {
    hull.iter().map(|v| linalg::dot(v, h)).fold(f64::NEG_INFINITY, f64::max)
}

/// `argmax ⟨r, h⟩` over `{‖h‖_∞ ≤ 1, ⟨a, h⟩ ≤ 0 for a in rows}`.
fn polyhedral_vertex(rows: &[Vector], r: &[f64]) -> Option<Vector> {
    let d = r.len();
    let mut lp = LinearProgram::new(d);
    lp.lower = vec![-1.0; d];
    lp.upper = vec![1.0; d];
    lp.objective = r.to_vec();
    for a in rows {
        lp.add_row(a.clone(), Relation::Le, 0.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(x),
        _ => None,
    }
}

fn push_direction(out: &mut Vec<Vector>, h: Vector, n: usize) {
    let nh = linalg::norm(&h);
    if out.len() >= n || nh <= 1e-10 {
        return;
    }
    let u = linalg::scaled(1.0 / nh, &h);
    if out.iter().all(|w| linalg::norm_inf(&linalg::sub(w, &u)) > 1e-9) {
        out.push(u);
    }
}

/// Up to `n` distinct unit directions `h` with `DG(x)h ∈ T_K(G(x))`,
/// `h ∈ T_A(x)` and `⟨a, h⟩ ≤ 0` for every `a` in `extra_rows`.
///
/// Candidates are `±e_k`, vertices of the polyhedral outer model cut out by
/// the generators for random objectives, and random conic combinations of
/// those vertices; each candidate is then tested exactly.
pub fn sample_linearized_directions(
    p: &Problem,
    pm: &PointModel,
    gs: &GeneratorSet,
    extra_rows: &[Vector],
    n: usize,
    seed: u64,
) -> Vec<Vector> {
    let d = pm.dim();
    let mut rows: Vec<Vector> = gs.eta.iter().chain(&gs.na).map(|g| g.v.clone()).collect();
    rows.extend(extra_rows.iter().cloned());
    let tol = 1e-8;
    let accept = |h: &[f64]| {
        geometry::tangent_membership(p, pm, h, tol).overall
            && extra_rows.iter().all(|a| linalg::dot(a, h) <= tol * linalg::norm(h).max(1.0))
    };
    let mut out = Vec::new();
    for k in 0..d {
        for s in [1.0, -1.0] {
            let h = linalg::scaled(s, &linalg::unit(d, k));
            if accept(&h) {
                push_direction(&mut out, h, n);
            }
        }
    }
    // the outer model is {0}: nothing to sample
    let pointed = (0..d).all(|k| {
        [1.0, -1.0].iter().all(|s| {
            polyhedral_vertex(&rows, &linalg::scaled(*s, &linalg::unit(d, k)))
                .is_none_or(|h| linalg::norm_inf(&h) <= 1e-12)
        })
    });
    if pointed {
        return out;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11ea_d15c);
    let mut vertices: Vec<Vector> = Vec::new();
    let attempts = 4 * n + 8;
    let (mut last_len, mut idle) = (out.len(), 0);
    for _ in 0..attempts {
        if out.len() >= n || idle >= 256 {
            break;
        }
        if out.len() == last_len {
            idle += 1;
        } else {
            (last_len, idle) = (out.len(), 0);
        }
        let r: Vector = geometry::sample_unit_vectors(d, 1, rng.gen())[0].clone();
        if accept(&r) {
            push_direction(&mut out, r.clone(), n);
        }
        if let Some(h) = polyhedral_vertex(&rows, &r) {
            if accept(&h) {
                push_direction(&mut out, h.clone(), n);
            }
            if linalg::norm(&h) > 1e-10 {
                vertices.push(h);
            }
        }
        if vertices.len() >= 2 {
            let mut h = vec![0.0; d];
            for v in &vertices {
                let w: f64 = rng.gen();
                linalg::axpy(w * w, v, &mut h);
            }
            if accept(&h) {
                push_direction(&mut out, h, n);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheckReport {
    pub requested: usize,
    pub sampled: usize,
    /// Smallest `F'(x, h)` over the sampled directions (and the LP minimizer
    /// when it passes the exact tangent tests).
    #[serde(with = "crate::serde_util::option")]
    pub min_derivative: Option<f64>,
    pub argmin: Option<Vector>,
    /// A direction of strict descent of the linearized problem was found.
    pub refuted: bool,
    /// A nonnegative minimum is only sampled evidence.
    pub evidence_only: bool,
}

/// Margin below which a negative `F'(x, h)` refutes.
pub const REFUTE_MARGIN: f64 = 1e-7;

/// Samples the linearized feasible cone and looks for `F'(x, h) < 0`.
pub fn linearized_spot_check(
    p: &Problem,
    x: &[f64],
    n_samples: usize,
    opts: &CheckOptions,
) -> Result<SpotCheckReport, CheckError> {
    let (pm, gs) = prepare(p, x, opts)?;
    let hull = gs.hull_vectors();
    let mut dirs = sample_linearized_directions(p, &pm, &gs, &[], n_samples, opts.sampling.seed);
    if let Some(h) = min_derivative_direction(&gs) {
        if geometry::tangent_membership(p, &pm, &h, 1e-8).overall {
            dirs.push(h);
        }
    }
    let mut best: Option<(f64, Vector)> = None;
    for h in &dirs {
        let v = directional_derivative(&hull, h);
        if best.as_ref().map_or(true, |(b, _)| v < *b) {
            best = Some((v, h.clone()));
        }
    }
    let refuted = best.as_ref().is_some_and(|(v, _)| *v < -REFUTE_MARGIN);
    Ok(SpotCheckReport {
        requested: n_samples,
        sampled: dirs.len(),
        min_derivative: best.as_ref().map(|b| b.0),
        argmin: best.map(|b| b.1),
        refuted,
        evidence_only: !refuted,
    })
}

/// Minimizer of `F'(x, h)` over the polyhedral outer model intersected with
/// the unit ball of `‖·‖_∞`, normalized to unit length.
fn min_derivative_direction(gs: &GeneratorSet) -> Option<Vector> {
    let d = gs.dim();
    let mut lp = LinearProgram::new(d + 1);
    for k in 0..d {
        lp.lower[k] = -1.0;
        lp.upper[k] = 1.0;
    }
    lp.lower[d] = f64::NEG_INFINITY;
    lp.objective[d] = -1.0;
    for g in &gs.grads {
        let mut row = g.v.clone();
        row.push(-1.0);
        lp.add_row(row, Relation::Le, 0.0);
    }
    for g in gs.eta.iter().chain(&gs.na) {
        let mut row = g.v.clone();
        row.push(0.0);
        lp.add_row(row, Relation::Le, 0.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, value } if -value < 0.0 => {
            let h = x[..d].to_vec();
            let n = linalg::norm(&h);
            (n > 1e-12).then(|| linalg::scaled(1.0 / n, &h))
        }
        _ => None,
    }
}
