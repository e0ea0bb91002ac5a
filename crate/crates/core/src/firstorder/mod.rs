//! First-order certificates: multipliers, `0 ∈ D(x)` and `0 ∈ int D(x)`,
//! cadres and alternances, the exact penalty, linearized spot checks and
//! semi-infinite discretization.

mod alternance;
mod discretize;
mod linearized;
mod penalty;

pub use alternance::{
    find_cadre, verify_alternance, Alternance, AlternanceFailure, Cadre, CadreSearch, Flavor,
    SearchError,
};
pub use discretize::{semiinfinite_discretize, DiscretizeReport, DiscretizedBlock};
pub use linearized::{
    directional_derivative, linearized_spot_check, sample_linearized_directions, SpotCheckReport,
};
pub use penalty::{penalty_subdiff_check, penalty_value, PenaltyReport};

use crate::geometry::{self, Family, Generator, GeneratorSet, PointModel, Provenance, SamplingSpec};
use crate::linalg::{self, Vector};
use crate::problem::{ConeBlock, FeasibilityReport, Problem, ProblemError, ProblemKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("point is infeasible (max violation {:e})", .0.max_violation())]
    Infeasible(FeasibilityReport),
    #[error("{0}")]
    Invalid(String),
}

/// Knobs shared by the certificate checks.
#[derive(Debug, Clone)]
pub struct CheckOptions {
    pub sampling: SamplingSpec,
    /// Subset budget for cadre searches.
    pub budget: u64,
    /// Directions sampled for growth estimates and spot checks.
    pub n_samples: usize,
    /// Padding vectors `Z` (canonical basis if `None`).
    pub z: Option<Vec<Vector>>,
    /// Use the squared Chebyshev objective `F²/2` (generators `(f − ψ)∇f`).
    pub squared: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            sampling: SamplingSpec::default(),
            budget: 1_000_000,
            n_samples: 128,
            z: None,
            squared: false,
        }
    }
}

/// Feasibility check plus the local model and generator families at `x`.
pub fn prepare(p: &Problem, x: &[f64], opts: &CheckOptions) -> Result<(PointModel, GeneratorSet), CheckError> {
    let feas = p.check_feasible(x)?;
    if !feas.feasible {
        return Err(CheckError::Infeasible(feas));
    }
    let pm = PointModel::new(p, x)?;
    let mut gs = geometry::generator_set(p, &pm, &opts.sampling)?;
    if opts.squared {
        if p.kind != ProblemKind::Chebyshev {
            return Err(CheckError::Invalid("squared formulation needs a Chebyshev problem".into()));
        }
        let sq = p.squared_generators(x, &pm.act.w_act)?;
        for (g, v) in gs.grads.iter_mut().zip(sq) {
            g.v = v;
        }
    }
    Ok((pm, gs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioWeight {
    pub index: usize,
    pub sign: i8,
    pub weight: f64,
}

/// Aggregated dual element of one block in the block's own coordinates
/// (for SDP the row-major matrix `Σ w q qᵀ`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMultiplier {
    pub block: usize,
    pub kind: String,
    pub dual: Vector,
    /// Norm dual to the block norm used by the penalty.
    pub dual_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedGenerator {
    pub weight: f64,
    pub v: Vector,
    pub family: Family,
    pub tag: Provenance,
}

/// Danskin–Demyanov weights plus a Lagrange multiplier, with every nonzero
/// term kept so the stationarity residual can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierWitness {
    pub alpha: Vec<ScenarioWeight>,
    pub blocks: Vec<BlockMultiplier>,
    pub terms: Vec<WeightedGenerator>,
    pub residual: f64,
}

impl MultiplierWitness {
    /// `|Σ weight·v|` over the stored terms.
    pub fn recompute_residual(&self) -> f64 {
        let d = self.terms.first().map_or(0, |t| t.v.len());
        let mut r = vec![0.0; d];
        for t in &self.terms {
            linalg::axpy(t.weight, &t.v, &mut r);
        }
        linalg::norm(&r)
    }

    /// Norm of `λ` dual to the ℓ1-sum of block norms: the largest block dual norm.
    pub fn dual_norm(&self) -> f64 {
        self.blocks.iter().fold(0.0, |m, b| m.max(b.dual_norm))
    }

    /// Sum of absolute values of all dual entries.
    pub fn l1_norm(&self) -> f64 {
        self.blocks.iter().flat_map(|b| &b.dual).map(|v| v.abs()).sum()
    }
}

pub(crate) fn block_dual_norm(block: &ConeBlock, y: &[f64]) -> f64 {
    match block {
        ConeBlock::NlpIneq { .. } | ConeBlock::NlpEq { .. } => linalg::norm_inf(y),
        ConeBlock::Soc { .. } | ConeBlock::Sdp { .. } => linalg::norm(y),
        ConeBlock::SemiInfinite { .. } => y.iter().map(|v| v.abs()).sum(),
    }
}

fn stationarity_scale(gs: &GeneratorSet) -> f64 {
    gs.grads
        .iter()
        .chain(&gs.eta)
        .chain(&gs.na)
        .map(|g| linalg::norm_inf(&g.v))
        .fold(1.0, f64::max)
}

/// Rebuilds a multiplier witness from LP weights on `grads`, `eta ++ na`.
pub fn witness_from_weights(
    p: &Problem,
    gs: &GeneratorSet,
    hull_weights: &[f64],
    cone_weights: &[f64],
) -> MultiplierWitness {
    let mut alpha = Vec::new();
    let mut terms = Vec::new();
    for (w, g) in hull_weights.iter().zip(&gs.grads) {
        if let Provenance::Scenario { index, sign } = g.tag {
            if *w > 0.0 {
                alpha.push(ScenarioWeight { index, sign, weight: *w });
            }
        }
        if *w > 0.0 {
            terms.push(WeightedGenerator { weight: *w, v: g.v.clone(), family: g.family, tag: g.tag.clone() });
        }
    }
    let mut duals: Vec<Option<Vector>> = vec![None; p.blocks.len()];
    let cone: Vec<&Generator> = gs.eta.iter().chain(&gs.na).collect();
    for (w, g) in cone_weights.iter().zip(cone) {
        if *w <= 0.0 {
            continue;
        }
        terms.push(WeightedGenerator { weight: *w, v: g.v.clone(), family: g.family, tag: g.tag.clone() });
        if let Some(b) = g.block {
            let slot = duals[b].get_or_insert_with(|| vec![0.0; g.dual.len()]);
            linalg::axpy(*w, &g.dual, slot);
        }
    }
    let blocks = duals
        .into_iter()
        .enumerate()
        .filter_map(|(b, y)| {
            y.map(|dual| BlockMultiplier {
                block: b,
                kind: p.blocks[b].kind_name().to_string(),
                dual_norm: block_dual_norm(&p.blocks[b], &dual),
                dual,
            })
        })
        .collect();
    let mut w = MultiplierWitness { alpha, blocks, terms, residual: 0.0 };
    w.residual = w.recompute_residual();
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessaryReport {
    pub zero_in_d: bool,
    pub multipliers: Option<MultiplierWitness>,
    /// Smallest plain cadre, if the search found one.
    pub cadre: Option<Cadre>,
    pub cadre_search_exhausted_budget: bool,
    /// LP membership and the cadre search reached the same verdict.
    pub cadre_agrees: bool,
    /// Some generator family is a sampled inner approximation.
    pub generators_sampled: bool,
    /// A negative or disagreeing verdict may be an artefact of sampling.
    pub sampling_limited: bool,
    pub rcq: String,
}

/// `0 ∈ D(x)` by LP, with a reconstructed multiplier and a cadre cross-check.
pub fn necessary_check(p: &Problem, x: &[f64], opts: &CheckOptions) -> Result<NecessaryReport, CheckError> {
    let (_, gs) = prepare(p, x, opts)?;
    Ok(necessary_from_generators(p, &gs, opts))
}

pub fn necessary_from_generators(p: &Problem, gs: &GeneratorSet, opts: &CheckOptions) -> NecessaryReport {
    let d = gs.dim();
    let hull = gs.hull_vectors();
    let cone = gs.cone_vectors();
    let scale = stationarity_scale(gs);
    let multipliers = linalg::lp_membership(&vec![0.0; d], &hull, &cone)
        .map(|m| witness_from_weights(p, gs, &m.hull_weights, &m.cone_weights))
        .filter(|w| w.residual <= 1e-8 * scale);
    let mut search = CadreSearch::new(Flavor::Plain, false);
    search.budget = opts.budget;
    search.z = opts.z.clone();
    let (cadre, exhausted) = match find_cadre(gs, &search, &p.tolerances) {
        Ok(c) => (c.filter(|c| c.residual() <= 1e-8 * scale), false),
        Err(SearchError::CombinatorialBudgetExceeded { .. }) => (None, true),
    };
    let zero_in_d = multipliers.is_some();
    let cadre_agrees = zero_in_d == cadre.is_some();
    NecessaryReport {
        zero_in_d,
        multipliers,
        cadre,
        cadre_search_exhausted_budget: exhausted,
        cadre_agrees,
        generators_sampled: gs.sampled,
        sampling_limited: gs.sampled && (!zero_in_d || !cadre_agrees) || exhausted,
        rcq: "not checked".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SufficientReport {
    pub zero_in_int_d: bool,
    /// Largest `r` with `r·u ∈ D̂` for all test directions `u ∈ {±e_k, −𝟙/√d}`.
    #[serde(with = "crate::serde_util")]
    pub radius: f64,
    /// Radius of a ball around 0 guaranteed inside `D̂`.
    #[serde(with = "crate::serde_util")]
    pub ball_radius: f64,
    pub complete_alternance: Option<Cadre>,
    pub alternance_flavor: Flavor,
    pub cadre_search_exhausted_budget: bool,
    /// Sampled estimate of the first-order growth constant; `None` if no
    /// nonzero feasible direction was found.
    #[serde(with = "crate::serde_util::option")]
    pub growth_constant_estimate: Option<f64>,
    pub growth_estimate_is_sampled: bool,
    pub generators_sampled: bool,
}

/// Interior test directions `±e_k` and `−𝟙/√d`.
pub fn interior_directions(d: usize) -> Vec<Vector> {
    let mut dirs = Vec::with_capacity(2 * d + 1);
    for k in 0..d {
        dirs.push(linalg::unit(d, k));
        dirs.push(linalg::scaled(-1.0, &linalg::unit(d, k)));
    }
    dirs.push(vec![-1.0 / (d as f64).sqrt(); d]);
    dirs
}

/// Margin of `0` inside `conv(hull) + cone(cone)` along the interior test
/// directions; 0 when `0` is not in the set.
pub fn interior_radius(hull: &[Vector], cone: &[Vector]) -> f64 {
    let Some(d) = hull.first().map(|h| h.len()) else { return 0.0 };
    let mut r = f64::INFINITY;
    for u in interior_directions(d) {
        match linalg::ray_extent(&u, hull, cone) {
            Some(t) => r = r.min(t.max(0.0)),
            None => return 0.0,
        }
    }
    r
}

/// `0 ∈ int D(x)` by LP, a complete alternance of the requested flavor, and
/// a sampled growth constant.
pub fn sufficient_check(
    p: &Problem,
    x: &[f64],
    flavor: Flavor,
    opts: &CheckOptions,
) -> Result<SufficientReport, CheckError> {
    let (pm, gs) = prepare(p, x, opts)?;
    Ok(sufficient_from_generators(p, &pm, &gs, flavor, opts))
}

pub fn sufficient_from_generators(
    p: &Problem,
    pm: &PointModel,
    gs: &GeneratorSet,
    flavor: Flavor,
    opts: &CheckOptions,
) -> SufficientReport {
    let d = gs.dim();
    let hull = gs.hull_vectors();
    let cone = gs.cone_vectors();
    let radius = interior_radius(&hull, &cone);
    let mut search = CadreSearch::new(flavor, true);
    search.budget = opts.budget;
    search.z = opts.z.clone();
    let (complete_alternance, exhausted) = match find_cadre(gs, &search, &p.tolerances) {
        Ok(c) => (c, false),
        Err(SearchError::CombinatorialBudgetExceeded { .. }) => (None, true),
    };
    let dirs = sample_linearized_directions(p, pm, gs, &[], opts.n_samples, opts.sampling.seed);
    let growth_constant_estimate = dirs
        .iter()
        .map(|h| directional_derivative(&hull, h))
        .reduce(f64::min);
    SufficientReport {
        zero_in_int_d: radius > p.tolerances.eps_pos,
        radius,
        ball_radius: radius / (d as f64).sqrt(),
        complete_alternance,
        alternance_flavor: flavor,
        cadre_search_exhausted_budget: exhausted,
        growth_constant_estimate,
        growth_estimate_is_sampled: true,
        generators_sampled: gs.sampled,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn dem_first_order() {
        let p = registry::lookup("dem", None).unwrap();
        let opts = CheckOptions::default();
        let n = necessary_check(&p, &[0.0, -3.0], &opts).unwrap();
        assert!(n.zero_in_d && n.cadre_agrees);
        let w = n.multipliers.unwrap();
        for a in &w.alpha {
            assert!((a.weight - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(n.cadre.unwrap().deltas, vec![10.0, -10.0, 10.0]);
        let s = sufficient_check(&p, &[0.0, -3.0], Flavor::Generalised, &opts).unwrap();
        assert!(s.zero_in_int_d && s.radius > 0.0);
        assert!(s.complete_alternance.is_some());
        assert!(s.growth_constant_estimate.unwrap() > 0.0);
    }

    #[test]
    fn dem_at_origin_fails() {
        let p = registry::lookup("dem", None).unwrap();
        let n = necessary_check(&p, &[0.0, 0.0], &CheckOptions::default()).unwrap();
        assert!(!n.zero_in_d && n.cadre.is_none());
    }

    #[test]
    fn single_gradient_is_not_interior() {
        assert_eq!(interior_radius(&[vec![1.0, 1.0]], &[]), 0.0);
        let r = interior_radius(
            &[vec![1.0, 0.0], vec![-1.0, 0.0]],
            &[vec![0.0, 1.0], vec![0.0, -1.0]],
        );
        assert!(r > 0.0);
    }

    #[test]
    fn bazaraa_multiplier() {
        let p = registry::lookup("bazaraa45", None).unwrap();
        let n = necessary_check(&p, &[3.0, 3.0], &CheckOptions::default()).unwrap();
        let w = n.multipliers.unwrap();
        assert_eq!(w.blocks.len(), 1);
        let lam = &w.blocks[0].dual;
        let scale = w.alpha[0].weight;
        assert!((lam[0] / scale - 152.0).abs() < 1e-8 && (lam[1] / scale - 12.0).abs() < 1e-8);
    }
}
