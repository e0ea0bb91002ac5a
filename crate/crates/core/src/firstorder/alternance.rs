//! Alternance determinants and cadre search.

use crate::geometry::{Family, Generator, GeneratorSet, Provenance};
use crate::linalg::{self, Vector};
use crate::problem::ToleranceSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    /// Vectors taken from the generator families themselves.
    Plain,
    /// Vectors from the whole sets `∂F(x)`, `N(x)`, `N_A(x)`.
    Generalised,
    /// Vectors after the objective ones taken from `N(x) + N_A(x)`.
    Weak,
}

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum AlternanceFailure {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("V_2..V_p are linearly dependent, no completion by Z exists")]
    RankDeficient,
    #[error("determinant Δ_{s} vanishes")]
    ZeroLeadingDeterminant { s: usize },
    #[error("Δ_{s} has the same sign as Δ_{}", .s - 1)]
    SignPatternViolated { s: usize },
    #[error("Δ_{s} should vanish but does not")]
    NonzeroTailDeterminant { s: usize },
    #[error("Cramer multipliers disagree with the least-squares cadre multipliers")]
    CramerMismatch,
}

/// Determinant data of a verified `p`-point alternance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alternance {
    pub p: usize,
    pub padding: Vec<Vector>,
    pub deltas: Vector,
    /// Cadre multipliers `β_i = (−1)^{i−1} Δ_i / Δ_1`.
    pub beta: Vector,
}

/// A cadre together with its alternance data and provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cadre {
    pub flavor: Flavor,
    pub p: usize,
    /// Number of objective vectors.
    pub k0: usize,
    /// Index of the last normal-cone vector (`k0` plus the number of `N(x)` vectors).
    pub i0: usize,
    pub vectors: Vec<Vector>,
    pub tags: Vec<Provenance>,
    pub padding: Vec<Vector>,
    pub deltas: Vector,
    pub beta: Vector,
}

impl Cadre {
    pub fn is_complete(&self) -> bool {
        self.vectors.first().is_some_and(|v| self.p == v.len() + 1)
    }

    /// `|Σ β_i V_i|`.
    pub fn residual(&self) -> f64 {
        let d = self.vectors.first().map_or(0, |v| v.len());
        let mut r = vec![0.0; d];
        for (b, v) in self.beta.iter().zip(&self.vectors) {
            linalg::axpy(*b, v, &mut r);
        }
        linalg::norm(&r)
    }
}

fn hadamard_scale(cols: &[Vector]) -> f64 {
    cols.iter().map(|c| linalg::norm(c)).product::<f64>().max(1.0)
}

/// Checks the determinant conditions of a `p`-point alternance for `V_1..V_p`,
/// padding with vectors of `z` (canonical basis if `None`).
pub fn verify_alternance(
    vectors: &[Vector],
    z: Option<&[Vector]>,
    tol: &ToleranceSet,
) -> Result<Alternance, AlternanceFailure> {
    let p = vectors.len();
    let Some(d) = vectors.first().map(|v| v.len()) else {
        return Err(AlternanceFailure::BadInput("no vectors".into()));
    };
    if d == 0 || p > d + 1 || vectors.iter().any(|v| v.len() != d) {
        return Err(AlternanceFailure::BadInput(format!(
            "need 1 <= p <= d+1 vectors of equal length, got p={p}, d={d}"
        )));
    }
    let canonical: Vec<Vector> = (0..d).map(|i| linalg::unit(d, i)).collect();
    let z = z.unwrap_or(&canonical);
    if z.len() != d || z.iter().any(|v| v.len() != d) || linalg::rank(z, tol.eps_rank) != d {
        return Err(AlternanceFailure::BadInput("Z must hold d independent vectors".into()));
    }
    let mut tail: Vec<Vector> = vectors[1..].to_vec();
    if linalg::rank(&tail, tol.eps_rank) < p - 1 {
        return Err(AlternanceFailure::RankDeficient);
    }
    let mut padding = Vec::new();
    for zv in z {
        if tail.len() == d {
            break;
        }
        tail.push(zv.clone());
        if linalg::rank(&tail, tol.eps_rank) == tail.len() {
            padding.push(zv.clone());
        } else {
            tail.pop();
        }
    }
    let mut cols: Vec<Vector> = vectors.to_vec();
    cols.extend(padding.iter().cloned());
    let mut deltas: Vector = Vec::with_capacity(d + 1);
    for s in 0..=d {
        let minor: Vec<Vector> = cols
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != s)
            .map(|(_, c)| c.clone())
            .collect();
        let delta = linalg::det_columns(&minor);
        let zero = delta.abs() <= tol.eps_det * hadamard_scale(&minor);
        if s < p {
            if zero {
                return Err(AlternanceFailure::ZeroLeadingDeterminant { s: s + 1 });
            }
            if s > 0 && delta.signum() == deltas[s - 1].signum() {
                return Err(AlternanceFailure::SignPatternViolated { s: s + 1 });
            }
        } else if !zero {
            return Err(AlternanceFailure::NonzeroTailDeterminant { s: s + 1 });
        }
        deltas.push(delta);
    }
    let beta: Vector = (0..p)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } * deltas[i] / deltas[0])
        .collect();
    match linalg::solve_positive_combination(vectors, tol.eps_rank, 0.0) {
        Some(b)
            if b
                .iter()
                .zip(&beta)
                .all(|(x, y)| (x - y).abs() <= 1e-8 * y.abs().max(1.0)) => {}
        _ => return Err(AlternanceFailure::CramerMismatch),
    }
    Ok(Alternance {
        p,
        padding,
        deltas,
        beta,
    })
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("cadre search stopped after {visited} subsets (budget {budget})")]
    CombinatorialBudgetExceeded { visited: u64, budget: u64 },
}

#[derive(Debug, Clone)]
pub struct CadreSearch {
    pub flavor: Flavor,
    /// Only look for `p = d + 1`.
    pub complete_only: bool,
    pub budget: u64,
    pub z: Option<Vec<Vector>>,
}

impl CadreSearch {
    pub fn new(flavor: Flavor, complete_only: bool) -> Self {
        CadreSearch {
            flavor,
            complete_only,
            budget: 1_000_000,
            z: None,
        }
    }
}

struct Enumerator<'a> {
    tol: &'a ToleranceSet,
    z: Option<&'a [Vector]>,
    budget: u64,
    visited: u64,
}

impl Enumerator<'_> {
    /// Subsets of `pool` of size `p` in lexicographic order whose first element
    /// is one of the first `n_obj` (objective) entries.
    fn search(
        &mut self,
        pool: &[Generator],
        n_obj: usize,
        p: usize,
        flavor: Flavor,
    ) -> Result<Option<Cadre>, SearchError> {
        let n = pool.len();
        if p == 0 || p > n || n_obj == 0 {
            return Ok(None);
        }
        let mut idx: Vec<usize> = (0..p).collect();
        loop {
            if idx[0] >= n_obj {
                return Ok(None);
            }
            self.visited += 1;
            if self.visited > self.budget {
                return Err(SearchError::CombinatorialBudgetExceeded {
                    visited: self.visited - 1,
                    budget: self.budget,
                });
            }
            let vs: Vec<Vector> = idx.iter().map(|&i| pool[i].v.clone()).collect();
            if linalg::solve_positive_combination(&vs, self.tol.eps_rank, self.tol.eps_pos).is_some() {
                if let Ok(alt) = verify_alternance(&vs, self.z, self.tol) {
                    return Ok(Some(make_cadre(idx.iter().map(|&i| &pool[i]), alt, flavor)));
                }
            }
            // next combination
            let mut k = p;
            loop {
                if k == 0 {
                    return Ok(None);
                }
                k -= 1;
                if idx[k] < n - p + k {
                    idx[k] += 1;
                    for j in k + 1..p {
                        idx[j] = idx[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

fn make_cadre<'a>(gens: impl Iterator<Item = &'a Generator>, alt: Alternance, flavor: Flavor) -> Cadre {
    let gens: Vec<&Generator> = gens.collect();
    let flavor = if gens.iter().any(|g| matches!(g.tag, Provenance::Combination { .. })) {
        flavor
    } else {
        Flavor::Plain
    };
    let k0 = gens.iter().filter(|g| g.family == Family::Objective).count();
    let n_normal = gens.iter().filter(|g| g.family == Family::Normal).count();
    Cadre {
        flavor,
        p: alt.p,
        k0,
        i0: k0 + n_normal,
        vectors: gens.iter().map(|g| g.v.clone()).collect(),
        tags: gens.iter().map(|g| g.tag.clone()).collect(),
        padding: alt.padding,
        deltas: alt.deltas,
        beta: alt.beta,
    }
}

const PAIR_SUM_LIMIT: usize = 24;
const CENTROID_LIMIT: usize = 64;

fn combination(parts: &[(f64, &Generator)], family: Family) -> Generator {
    let d = parts[0].1.v.len();
    let mut v = vec![0.0; d];
    for (w, g) in parts {
        linalg::axpy(*w, &g.v, &mut v);
    }
    Generator {
        v,
        family,
        tag: Provenance::Combination {
            parts: parts.iter().map(|(w, g)| (*w, g.tag.clone())).collect(),
        },
        dual: Vec::new(),
        block: None,
    }
}

fn push_unique(pool: &mut Vec<Generator>, g: Generator) {
    let scale = linalg::norm_inf(&g.v);
    if scale <= 1e-12 {
        return;
    }
    let dup = pool
        .iter()
        .any(|h| linalg::norm_inf(&linalg::sub(&h.v, &g.v)) <= 1e-12 * scale.max(1.0));
    if !dup {
        pool.push(g);
    }
}

/// Objective generators plus centroids of their subsets.
fn augmented_objective(grads: &[Generator], d: usize) -> Vec<Generator> {
    let mut pool: Vec<Generator> = grads.to_vec();
    let m = grads.len();
    let mut added = 0;
    'outer: for size in 2..=m.min(d + 1) {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let w = 1.0 / size as f64;
            let parts: Vec<(f64, &Generator)> = idx.iter().map(|&i| (w, &grads[i])).collect();
            push_unique(&mut pool, combination(&parts, Family::Objective));
            added += 1;
            if added >= CENTROID_LIMIT {
                break 'outer;
            }
            let mut k = size;
            let mut advanced = false;
            while k > 0 {
                k -= 1;
                if idx[k] < m - size + k {
                    idx[k] += 1;
                    for j in k + 1..size {
                        idx[j] = idx[j - 1] + 1;
                    }
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                break;
            }
        }
    }
    pool
}

/// `gens` followed by pairwise sums of its first few members.
fn with_pair_sums(gens: &[Generator], family: Family) -> Vec<Generator> {
    let mut pool = Vec::new();
    for g in gens {
        push_unique(&mut pool, Generator { family, ..g.clone() });
    }
    let head = &gens[..gens.len().min(PAIR_SUM_LIMIT)];
    for i in 0..head.len() {
        for j in i + 1..head.len() {
            push_unique(&mut pool, combination(&[(1.0, &head[i]), (1.0, &head[j])], family));
        }
    }
    pool
}

/// `0 ∈ int co(grads)`: the points `s e_i` and `−(s/d) 𝟙` of the hull form a
/// complete generalised alternance for the largest admissible `s`.
fn hull_interior_alternance(
    grads: &[Generator],
    en: &mut Enumerator<'_>,
) -> Option<Cadre> {
    let d = grads.first()?.v.len();
    let hull: Vec<Vector> = grads.iter().map(|g| g.v.clone()).collect();
    let mut s = f64::INFINITY;
    for i in 0..d {
        s = s.min(linalg::ray_extent(&linalg::unit(d, i), &hull, &[])?);
    }
    let minus_ones = vec![-1.0; d];
    s = s.min(d as f64 * linalg::ray_extent(&minus_ones, &hull, &[])?);
    if !(s.is_finite() && s > en.tol.eps_pos) {
        return None;
    }
    let mut points: Vec<Vector> = (0..d).map(|i| linalg::scaled(s, &linalg::unit(d, i))).collect();
    points.push(linalg::scaled(s / d as f64, &minus_ones));
    let mut gens = Vec::with_capacity(d + 1);
    for pt in &points {
        let m = linalg::lp_membership(pt, &hull, &[])?;
        let parts: Vec<(f64, &Generator)> = m
            .hull_weights
            .iter()
            .zip(grads)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, g)| (*w, g))
            .collect();
        let mut g = combination(&parts, Family::Objective);
        g.v = pt.clone();
        gens.push(g);
    }
    let vs: Vec<Vector> = gens.iter().map(|g| g.v.clone()).collect();
    let alt = verify_alternance(&vs, en.z, en.tol).ok()?;
    Some(make_cadre(gens.iter(), alt, Flavor::Generalised))
}

/// Searches for a cadre of the requested flavor: smallest `p` first (or only
/// `p = d + 1` when `complete_only`), subsets in lexicographic order.
///
/// For the generalised and weak flavors each `p` tries, in order, objective
/// gradients alone, the hull-interior construction (`p = d + 1` only) and the
/// augmented pools of combinations. A result built from plain generators only
/// is reported with flavor `Plain`.
pub fn find_cadre(
    gs: &GeneratorSet,
    search: &CadreSearch,
    tol: &ToleranceSet,
) -> Result<Option<Cadre>, SearchError> {
    let d = gs.dim();
    if d == 0 || gs.grads.is_empty() {
        return Ok(None);
    }
    let mut en = Enumerator {
        tol,
        z: search.z.as_deref(),
        budget: search.budget,
        visited: 0,
    };
    let p_range: Vec<usize> = if search.complete_only {
        vec![d + 1]
    } else {
        (1..=d + 1).collect()
    };
    if search.flavor == Flavor::Plain {
        let plain: Vec<Generator> = gs.grads.iter().chain(&gs.eta).chain(&gs.na).cloned().collect();
        for &p in &p_range {
            if let Some(c) = en.search(&plain, gs.grads.len(), p, Flavor::Plain)? {
                return Ok(Some(c));
            }
        }
        return Ok(None);
    }
    let objective = augmented_objective(&gs.grads, d);
    let mut pool = objective.clone();
    match search.flavor {
        Flavor::Generalised => {
            pool.extend(with_pair_sums(&gs.eta, Family::Normal));
            pool.extend(with_pair_sums(&gs.na, Family::SetNormal));
        }
        Flavor::Weak => {
            let mut rest: Vec<Generator> = gs.eta.clone();
            rest.extend(gs.na.iter().cloned());
            let combined = with_pair_sums(&rest, Family::Normal);
            // keep original families for the unsummed members
            let originals = rest.len();
            for (k, mut g) in combined.into_iter().enumerate() {
                if k < originals {
                    g.family = rest[k].family;
                }
                pool.push(g);
            }
        }
        Flavor::Plain => unreachable!(),
    }
    for &p in &p_range {
        if let Some(c) = en.search(&gs.grads, gs.grads.len(), p, Flavor::Plain)? {
            return Ok(Some(c));
        }
        if p == d + 1 {
            if let Some(c) = hull_interior_alternance(&gs.grads, &mut en) {
                return Ok(Some(c));
            }
        }
        if let Some(c) = en.search(&pool, objective.len(), p, search.flavor)? {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol() -> ToleranceSet {
        ToleranceSet::default()
    }

    #[test]
    fn dem_determinants() {
        let v = vec![vec![5.0, 1.0], vec![-5.0, 1.0], vec![0.0, -2.0]];
        let a = verify_alternance(&v, None, &tol()).unwrap();
        assert_eq!(a.deltas, vec![10.0, -10.0, 10.0]);
        assert_eq!(a.beta, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn failures() {
        let t = tol();
        assert_eq!(
            verify_alternance(&[vec![1.0, 0.0], vec![2.0, 0.0]], None, &t),
            Err(AlternanceFailure::SignPatternViolated { s: 2 })
        );
        assert_eq!(
            verify_alternance(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 2.0]], None, &t),
            Err(AlternanceFailure::RankDeficient)
        );
        assert_eq!(
            verify_alternance(&[vec![2.0, -1.0], vec![-1.0, 1.0]], None, &t),
            Err(AlternanceFailure::NonzeroTailDeterminant { s: 3 })
        );
        assert!(verify_alternance(&[vec![0.0, 0.0]], None, &t).is_ok());
    }

    #[test]
    fn two_point_cadre_with_padding() {
        let a = verify_alternance(&[vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]], None, &tol()).unwrap();
        assert_eq!(a.p, 2);
        assert_eq!(a.padding.len(), 2);
        assert_eq!(a.beta, vec![1.0, 1.0]);
        assert_eq!(&a.deltas[2..], &[0.0, 0.0]);
    }
}
