//! Cone projections and distances, normal-cone generators `η(x)` and `n_A(x)`,
//! and tangent-cone membership tests.

use crate::expr::Dual2;
use crate::linalg::{self, Vector};
use crate::problem::{
    ActiveSets, BlockActivity, ConeBlock, PolyhedralSet, Problem, ProblemError, SocState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Euclidean projection onto `K_{l+1} = { (y0, ȳ) : y0 >= |ȳ| }`.
pub fn project_soc(y: &[f64]) -> Vector {
    let nb = linalg::norm(&y[1..]);
    if y[0] >= nb {
        return y.to_vec();
    }
    if y[0] <= -nb {
        return vec![0.0; y.len()];
    }
    let s = 0.5 * (y[0] + nb);
    let mut out = Vec::with_capacity(y.len());
    out.push(s);
    out.extend(y[1..].iter().map(|v| s * v / nb));
    out
}

pub fn soc_distance(y: &[f64]) -> f64 {
    linalg::norm(&linalg::sub(y, &project_soc(y)))
}

/// Projection onto the negative semidefinite cone: clamp eigenvalues to `min(0, σ)`.
pub fn project_psd_neg(m: &[Vector]) -> Vec<Vector> {
    let (vals, vecs) = linalg::sym_eigen(m);
    let n = m.len();
    let mut out = vec![vec![0.0; n]; n];
    for (s, q) in vals.iter().zip(&vecs) {
        let s = s.min(0.0);
        if s == 0.0 {
            continue;
        }
        for i in 0..n {
            for j in 0..n {
                out[i][j] += s * q[i] * q[j];
            }
        }
    }
    out
}

/// Frobenius distance to the negative semidefinite cone, `sqrt(Σ max(0, σ_i)²)`.
pub fn psd_neg_distance(m: &[Vector]) -> f64 {
    let (vals, _) = linalg::sym_eigen(m);
    vals.iter().map(|s| s.max(0.0).powi(2)).sum::<f64>().sqrt()
}

/// `dist(G_block(x), K_block)` in the block's own norm; semi-infinite blocks use
/// the sup norm over the grid, NLP blocks the ℓ1 norm.
pub fn block_distance(block: &ConeBlock, values: &[f64]) -> f64 {
    match block {
        ConeBlock::NlpIneq { .. } => values.iter().map(|v| v.max(0.0)).sum(),
        ConeBlock::NlpEq { .. } => values.iter().map(|v| v.abs()).sum(),
        ConeBlock::Soc { .. } => soc_distance(values),
        ConeBlock::Sdp { size, .. } => {
            let m: Vec<Vector> = values.chunks(*size).map(|r| r.to_vec()).collect();
            psd_neg_distance(&m)
        }
        ConeBlock::SemiInfinite { .. } => values.iter().fold(0.0f64, |m, v| m.max(*v)),
    }
}

/// Number and seed of sampled directions for the infinite generator families.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    pub soc_dirs: usize,
    pub sdp_dirs: usize,
    pub seed: u64,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            soc_dirs: 64,
            sdp_dirs: 64,
            seed: 0x5eed,
        }
    }
}

/// Where a generator vector came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Scenario { index: usize, sign: i8 },
    NlpIneq { block: usize, index: usize },
    NlpEq { block: usize, index: usize, sign: i8 },
    SocBoundary { block: usize },
    SocVertex { block: usize, direction: Vector },
    SdpNull { block: usize, direction: Vector },
    SemiInf { block: usize, grid_index: usize, t: f64 },
    LowerBound { coord: usize },
    UpperBound { coord: usize },
    Equality { row: usize, sign: i8 },
    /// Nonnegative combination `Σ w_k v_k` of other generators.
    Combination { parts: Vec<(f64, Provenance)> },
}

/// Which family of `D(x) = ∂F(x) + N(x) + N_A(x)` a generator belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Objective,
    Normal,
    SetNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub v: Vector,
    pub family: Family,
    pub tag: Provenance,
    /// Dual element `y*` in the block's coordinates with `v = [DG(x)]ᵀ y*`
    /// (block generators only; empty otherwise).
    pub dual: Vector,
    pub block: Option<usize>,
}

impl Generator {
    fn plain(v: Vector, family: Family, tag: Provenance) -> Self {
        Generator {
            v,
            family,
            tag,
            dual: Vec::new(),
            block: None,
        }
    }
}

/// The finite families generating `∂F(x)`, `N(x)` and `N_A(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSet {
    pub grads: Vec<Generator>,
    pub eta: Vec<Generator>,
    pub na: Vec<Generator>,
    /// True when some family is an inner approximation from sampled directions.
    pub sampled: bool,
}

impl GeneratorSet {
    pub fn dim(&self) -> usize {
        self.grads.first().map_or(0, |g| g.v.len())
    }

    pub fn hull_vectors(&self) -> Vec<Vector> {
        self.grads.iter().map(|g| g.v.clone()).collect()
    }

    pub fn cone_vectors(&self) -> Vec<Vector> {
        self.eta.iter().chain(&self.na).map(|g| g.v.clone()).collect()
    }
}

/// Everything about a point needed by the certificate checks: activity,
/// and value/gradient/Hessian of every block component.
#[derive(Debug, Clone)]
pub struct PointModel {
    pub x: Vector,
    pub act: ActiveSets,
    pub jets: Vec<Vec<Dual2>>,
}

impl PointModel {
    pub fn new(p: &Problem, x: &[f64]) -> Result<Self, ProblemError> {
        let act = p.active_sets(x)?;
        let mut jets = Vec::with_capacity(p.blocks.len());
        for block in &p.blocks {
            let jet: Vec<Dual2> = match block {
                ConeBlock::NlpIneq { g } => g.iter().map(|e| e.eval2(x)).collect::<Result<_, _>>()?,
                ConeBlock::NlpEq { b } => b.iter().map(|e| e.eval2(x)).collect::<Result<_, _>>()?,
                ConeBlock::Soc { g, .. } => g.iter().map(|e| e.eval2(x)).collect::<Result<_, _>>()?,
                ConeBlock::Sdp { entries, .. } => {
                    entries.iter().map(|e| e.eval2(x)).collect::<Result<_, _>>()?
                }
                // only active grid points are differentiated
                ConeBlock::SemiInfinite { g, grid } => {
                    let active = match &act.blocks[jets.len()] {
                        BlockActivity::SemiInfinite { active, .. } => active.clone(),
                        _ => Vec::new(),
                    };
                    let mut out = vec![Dual2::constant(0.0, x.len()); grid.len()];
                    for i in active {
                        out[i] = g.eval2_at(x, grid[i])?;
                    }
                    out
                }
            };
            jets.push(jet);
        }
        Ok(PointModel {
            x: x.to_vec(),
            act,
            jets,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// `[DG_block(x)]ᵀ y`.
    pub fn pullback(&self, block: usize, y: &[f64]) -> Vector {
        let mut v = vec![0.0; self.dim()];
        for (w, jet) in y.iter().zip(&self.jets[block]) {
            if *w != 0.0 {
                linalg::axpy(*w, &jet.grad, &mut v);
            }
        }
        v
    }

    /// `D²⟨y, G_block⟩(x)` row-major.
    pub fn dual_hessian(&self, block: usize, y: &[f64]) -> Vector {
        let d = self.dim();
        let mut h = vec![0.0; d * d];
        for (w, jet) in y.iter().zip(&self.jets[block]) {
            if *w != 0.0 {
                linalg::axpy(*w, &jet.hess, &mut h);
            }
        }
        h
    }

    /// `DG_block(x) h`.
    pub fn push_forward(&self, block: usize, h: &[f64]) -> Vector {
        self.jets[block].iter().map(|j| linalg::dot(&j.grad, h)).collect()
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// `n` deterministic unit vectors in `R^l`: evenly spaced angles with a seeded
/// rotation for `l = 2`, normalised Gaussian samples otherwise.
pub fn sample_unit_vectors(l: usize, n: usize, seed: u64) -> Vec<Vector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if l == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    if l == 2 {
        let u0: f64 = rng.gen();
        return (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * (k as f64 + u0) / n as f64;
                vec![th.cos(), th.sin()]
            })
            .collect();
    }
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let v: Vector = (0..l).map(|_| gaussian(&mut rng)).collect();
        let nv = linalg::norm(&v);
        if nv > 1e-8 {
            out.push(linalg::scaled(1.0 / nv, &v));
        }
    }
    out
}

fn canonical_pm(l: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(2 * l);
    for k in 0..l {
        out.push(linalg::unit(l, k));
        out.push(linalg::scaled(-1.0, &linalg::unit(l, k)));
    }
    out
}

fn block_seed(seed: u64, block: usize) -> u64 {
    seed ^ (block as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Unit directions `v` used for a SOC block at the vertex: user directions,
/// then `±e_k`, then sampled ones. Exact (two directions) when `l = 1`.
pub fn soc_vertex_directions(block: usize, l: usize, user: &[Vector], sampling: &SamplingSpec) -> (Vec<Vector>, bool) {
    if l == 1 {
        return (vec![vec![1.0], vec![-1.0]], false);
    }
    let mut dirs: Vec<Vector> = user
        .iter()
        .filter_map(|v| {
            let n = linalg::norm(v);
            (n > 0.0).then(|| linalg::scaled(1.0 / n, v))
        })
        .collect();
    dirs.extend(canonical_pm(l));
    dirs.extend(sample_unit_vectors(l, sampling.soc_dirs, block_seed(sampling.seed, block)));
    (dirs, true)
}

/// Unit vectors of the null space used for an SDP block: user directions lying
/// in the null space, basis vectors, pairwise `(q_i ± q_j)/√2`, then sampled
/// combinations. Exact when the null space is one-dimensional.
pub fn sdp_null_directions(
    block: usize,
    null_basis: &[Vector],
    user: &[Vector],
    sampling: &SamplingSpec,
) -> (Vec<Vector>, bool) {
    let k = null_basis.len();
    if k == 0 {
        return (Vec::new(), false);
    }
    if k == 1 {
        return (vec![null_basis[0].clone()], false);
    }
    let l = null_basis[0].len();
    let mut dirs = Vec::new();
    for q in user {
        let n = linalg::norm(q);
        if n == 0.0 {
            continue;
        }
        let mut proj = vec![0.0; l];
        for b in null_basis {
            linalg::axpy(linalg::dot(b, q), b, &mut proj);
        }
        if linalg::norm(&linalg::sub(&proj, q)) <= 1e-6 * n {
            dirs.push(linalg::scaled(1.0 / n, q));
        }
    }
    dirs.extend(null_basis.iter().cloned());
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..k {
        for j in i + 1..k {
            dirs.push(linalg::scaled(s, &linalg::add(&null_basis[i], &null_basis[j])));
            dirs.push(linalg::scaled(s, &linalg::sub(&null_basis[i], &null_basis[j])));
        }
    }
    for c in sample_unit_vectors(k, sampling.sdp_dirs, block_seed(sampling.seed, block)) {
        let mut q = vec![0.0; l];
        for (ci, b) in c.iter().zip(null_basis) {
            linalg::axpy(*ci, b, &mut q);
        }
        dirs.push(q);
    }
    (dirs, true)
}

fn outer(q: &[f64]) -> Vector {
    let l = q.len();
    let mut m = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..l {
            m[i * l + j] = q[i] * q[j];
        }
    }
    m
}

/// Generators of `N(x)` (exact for NLP/semi-infinite blocks, sampled for the
/// SOC vertex and multi-dimensional SDP null spaces). Returns the list and
/// whether any part was sampled.
pub fn eta_generators(p: &Problem, pm: &PointModel, sampling: &SamplingSpec) -> (Vec<Generator>, bool) {
    let mut out = Vec::new();
    let mut sampled = false;
    for (bi, block) in p.blocks.iter().enumerate() {
        let push = |out: &mut Vec<Generator>, tag: Provenance, dual: Vector| {
            out.push(Generator {
                v: pm.pullback(bi, &dual),
                family: Family::Normal,
                tag,
                dual,
                block: Some(bi),
            });
        };
        match (&pm.act.blocks[bi], block) {
            (BlockActivity::NlpIneq { values, active }, _) => {
                for &i in active {
                    push(&mut out, Provenance::NlpIneq { block: bi, index: i }, linalg::unit(values.len(), i));
                }
            }
            (BlockActivity::NlpEq { values }, _) => {
                for j in 0..values.len() {
                    for sign in [1i8, -1] {
                        let dual = linalg::scaled(sign as f64, &linalg::unit(values.len(), j));
                        push(&mut out, Provenance::NlpEq { block: bi, index: j, sign }, dual);
                    }
                }
            }
            (BlockActivity::Soc { value, state }, ConeBlock::Soc { dirs, .. }) => match state {
                SocState::Inactive => {}
                SocState::Boundary => {
                    let mut dual = vec![-value[0]];
                    dual.extend_from_slice(&value[1..]);
                    push(&mut out, Provenance::SocBoundary { block: bi }, dual);
                }
                SocState::Vertex => {
                    let l = value.len() - 1;
                    let (vs, s) = soc_vertex_directions(bi, l, dirs, sampling);
                    sampled |= s;
                    for v in vs {
                        let mut dual = vec![-1.0];
                        dual.extend_from_slice(&v);
                        push(&mut out, Provenance::SocVertex { block: bi, direction: v }, dual);
                    }
                }
            },
            (BlockActivity::Sdp { spectral, .. }, ConeBlock::Sdp { dirs, .. }) => {
                let (qs, s) = sdp_null_directions(bi, &spectral.null_basis, dirs, sampling);
                sampled |= s;
                for q in qs {
                    let dual = outer(&q);
                    push(&mut out, Provenance::SdpNull { block: bi, direction: q }, dual);
                }
            }
            (BlockActivity::SemiInfinite { values, active }, ConeBlock::SemiInfinite { grid, .. }) => {
                for &i in active {
                    let tag = Provenance::SemiInf { block: bi, grid_index: i, t: grid[i] };
                    push(&mut out, tag, linalg::unit(values.len(), i));
                }
            }
            _ => unreachable!("activity matches block kind"),
        }
    }
    (out, sampled)
}

/// Generators of `N_A(x)`: `−e_i` per active lower bound, `+e_i` per active
/// upper bound and `±E_r` per equality row.
pub fn na_generators(a: &PolyhedralSet, x: &[f64], eps_feas: f64) -> Result<Vec<Generator>, ProblemError> {
    let viol = a.violation(x);
    if viol > eps_feas {
        return Err(ProblemError::PointNotInSet(viol));
    }
    let d = x.len();
    let mut out = Vec::new();
    for i in 0..d {
        if (x[i] - a.lb[i]).abs() <= eps_feas {
            out.push(Generator::plain(
                linalg::scaled(-1.0, &linalg::unit(d, i)),
                Family::SetNormal,
                Provenance::LowerBound { coord: i },
            ));
        }
        if (a.ub[i] - x[i]).abs() <= eps_feas {
            out.push(Generator::plain(
                linalg::unit(d, i),
                Family::SetNormal,
                Provenance::UpperBound { coord: i },
            ));
        }
    }
    for (r, row) in a.eq_rows.iter().enumerate() {
        for sign in [1i8, -1] {
            out.push(Generator::plain(
                linalg::scaled(sign as f64, row),
                Family::SetNormal,
                Provenance::Equality { row: r, sign },
            ));
        }
    }
    Ok(out)
}

/// Objective generators at a point, tagged with their scenarios.
pub fn objective_generators(p: &Problem, pm: &PointModel) -> Result<Vec<Generator>, ProblemError> {
    let grads = p.subdifferential_generators(&pm.x, &pm.act.w_act)?;
    Ok(grads
        .into_iter()
        .zip(&pm.act.w_act)
        .map(|(v, a)| {
            Generator::plain(v, Family::Objective, Provenance::Scenario { index: a.index, sign: a.sign })
        })
        .collect())
}

/// All three generator families at `x`.
pub fn generator_set(p: &Problem, pm: &PointModel, sampling: &SamplingSpec) -> Result<GeneratorSet, ProblemError> {
    let grads = objective_generators(p, pm)?;
    let (eta, sampled) = eta_generators(p, pm, sampling);
    let na = na_generators(&p.set_a, &pm.x, p.tolerances.eps_feas)?;
    Ok(GeneratorSet { grads, eta, na, sampled })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentReport {
    pub blocks: Vec<bool>,
    pub set_a: bool,
    pub overall: bool,
}

/// Tests `DG(x) h ∈ T_K(G(x))` block by block and `h ∈ T_A(x)`.
pub fn tangent_membership(p: &Problem, pm: &PointModel, h: &[f64], tol: f64) -> TangentReport {
    let tol = tol * linalg::norm(h).max(1.0);
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for (bi, block) in p.blocks.iter().enumerate() {
        let jets = &pm.jets[bi];
        let ok = match &pm.act.blocks[bi] {
            BlockActivity::NlpIneq { active, .. } | BlockActivity::SemiInfinite { active, .. } => active
                .iter()
                .all(|&i| linalg::dot(&jets[i].grad, h) <= tol),
            BlockActivity::NlpEq { .. } => jets.iter().all(|j| linalg::dot(&j.grad, h).abs() <= tol),
            BlockActivity::Soc { value, state } => match state {
                SocState::Inactive => true,
                SocState::Boundary => {
                    let w = pm.push_forward(bi, h);
                    let nb = linalg::norm(&value[1..]);
                    let dn = linalg::dot(&value[1..], &w[1..]) / nb;
                    dn - w[0] <= tol
                }
                SocState::Vertex => {
                    let w = pm.push_forward(bi, h);
                    linalg::norm(&w[1..]) - w[0] <= tol
                }
            },
            BlockActivity::Sdp { spectral, .. } => {
                let ConeBlock::Sdp { size, .. } = block else { unreachable!() };
                let q0 = &spectral.null_basis;
                if q0.is_empty() {
                    true
                } else {
                    let dg: Vector = jets.iter().map(|j| linalg::dot(&j.grad, h)).collect();
                    let k = q0.len();
                    let m: Vec<Vector> = (0..k)
                        .map(|a| {
                            (0..k)
                                .map(|b| {
                                    let mut s = 0.0;
                                    for i in 0..*size {
                                        for j in 0..*size {
                                            s += q0[a][i] * dg[i * size + j] * q0[b][j];
                                        }
                                    }
                                    s
                                })
                                .collect()
                        })
                        .collect();
                    linalg::sym_eigen(&m).0[0] <= tol
                }
            }
        };
        blocks.push(ok);
    }
    let set_a = set_tangent(&p.set_a, &pm.x, h, p.tolerances.eps_feas, tol);
    let overall = set_a && blocks.iter().all(|b| *b);
    TangentReport { blocks, set_a, overall }
}

/// `h ∈ T_A(x)` for the box/affine set.
pub fn set_tangent(a: &PolyhedralSet, x: &[f64], h: &[f64], eps_feas: f64, tol: f64) -> bool {
    for i in 0..x.len() {
        if (x[i] - a.lb[i]).abs() <= eps_feas && h[i] < -tol {
            return false;
        }
        if (a.ub[i] - x[i]).abs() <= eps_feas && h[i] > tol {
            return false;
        }
    }
    a.eq_rows.iter().all(|r| linalg::dot(r, h).abs() <= tol)
}
