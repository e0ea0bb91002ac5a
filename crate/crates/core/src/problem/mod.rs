//! Minimax and Chebyshev problems with cone-constraint blocks and a box/affine set `A`.

mod format;

pub use format::{parse_problem, write_problem, FormatError};

use crate::expr::{Dual2, ExprError, Expression};
use crate::linalg::{self, Vector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("point has {got} coordinates, problem dimension is {dim}")]
    DimensionMismatch { got: usize, dim: usize },
    #[error("point is not in A (violation {0:e})")]
    PointNotInSet(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Minimax,
    Chebyshev,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub f: Expression,
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeBlock {
    /// `g_i(x) <= 0`
    NlpIneq { g: Vec<Expression> },
    /// `b_j(x) = 0`
    NlpEq { b: Vec<Expression> },
    /// `(g[0], g[1..]) ∈ K_{l+1}`, `g[0]` being the axis component. `dirs` are
    /// user supplied unit directions `v ∈ R^l` for the vertex case.
    Soc { g: Vec<Expression>, dirs: Vec<Vector> },
    /// `G0(x) ⪯ 0`, `entries` row-major `size × size`, symmetric. `dirs` are
    /// user supplied null-space directions `q ∈ R^size`.
    Sdp {
        size: usize,
        entries: Vec<Expression>,
        dirs: Vec<Vector>,
    },
    /// `g(x, t) <= 0` for all `t` in the grid.
    SemiInfinite { g: Expression, grid: Vec<f64> },
}

impl ConeBlock {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ConeBlock::NlpIneq { .. } => "nlp_ineq",
            ConeBlock::NlpEq { .. } => "nlp_eq",
            ConeBlock::Soc { .. } => "soc",
            ConeBlock::Sdp { .. } => "sdp",
            ConeBlock::SemiInfinite { .. } => "semiinf",
        }
    }

    /// Orthant-type blocks whose cone is polyhedral.
    pub fn is_polyhedral(&self) -> bool {
        matches!(
            self,
            ConeBlock::NlpIneq { .. } | ConeBlock::NlpEq { .. } | ConeBlock::SemiInfinite { .. }
        )
    }

    pub fn sdp_entry(&self, i: usize, j: usize) -> Option<&Expression> {
        match self {
            ConeBlock::Sdp { size, entries, .. } => entries.get(i * size + j),
            _ => None,
        }
    }
}

/// `lb <= x <= ub` and `E x = e`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralSet {
    pub lb: Vector,
    pub ub: Vector,
    pub eq_rows: Vec<Vector>,
    pub eq_rhs: Vector,
}

impl PolyhedralSet {
    pub fn whole_space(d: usize) -> Self {
        PolyhedralSet {
            lb: vec![f64::NEG_INFINITY; d],
            ub: vec![f64::INFINITY; d],
            eq_rows: Vec::new(),
            eq_rhs: Vec::new(),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        self.eq_rows.is_empty()
            && self.lb.iter().all(|v| *v == f64::NEG_INFINITY)
            && self.ub.iter().all(|v| *v == f64::INFINITY)
    }

    /// Largest bound or equality violation at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for i in 0..x.len() {
            v = v.max(self.lb[i] - x[i]).max(x[i] - self.ub[i]);
        }
        for (row, rhs) in self.eq_rows.iter().zip(&self.eq_rhs) {
            v = v.max((linalg::dot(row, x) - rhs).abs());
        }
        v
    }

    /// True if `x` lies in the interior of `A` (no equalities, no bound within `eps`).
    pub fn contains_in_interior(&self, x: &[f64], eps: f64) -> bool {
        self.eq_rows.is_empty()
            && (0..x.len()).all(|i| x[i] - self.lb[i] > eps && self.ub[i] - x[i] > eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSet {
    pub eps_active: f64,
    pub eps_rank: f64,
    pub eps_det: f64,
    pub eps_feas: f64,
    pub eps_pos: f64,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        ToleranceSet {
            eps_active: 1e-8,
            eps_rank: 1e-9,
            eps_det: 1e-9,
            eps_feas: 1e-8,
            eps_pos: 1e-9,
        }
    }
}

impl ToleranceSet {
    pub fn validate(&self) -> Result<(), ProblemError> {
        let all = [
            self.eps_active,
            self.eps_rank,
            self.eps_det,
            self.eps_feas,
            self.eps_pos,
        ];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(ProblemError::Invalid("tolerances must be positive".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    pub name: Option<String>,
    pub dim: usize,
    pub kind: ProblemKind,
    pub scenarios: Vec<Scenario>,
    pub blocks: Vec<ConeBlock>,
    pub set_a: PolyhedralSet,
    pub tolerances: ToleranceSet,
    /// Candidate point shipped with the problem, if any.
    pub candidate: Option<Vector>,
}

/// An active scenario; `sign` is `+1` for minimax, `±1` for Chebyshev.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveScenario {
    pub index: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocState {
    Inactive,
    /// `g ≠ 0` on the boundary of the cone.
    Boundary,
    /// `g = 0`, the vertex of the cone.
    Vertex,
}

/// Eigen-data of `G0(x)`, eigenvalues descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    pub eigenvalues: Vector,
    pub eigenvectors: Vec<Vector>,
    /// Basis of the (numerical) null space.
    pub null_basis: Vec<Vector>,
}

impl SpectralData {
    pub fn new(matrix: &[Vector], eps_rank: f64) -> Self {
        let (eigenvalues, eigenvectors) = linalg::sym_eigen(matrix);
        let top = eigenvalues.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        let null_basis = eigenvalues
            .iter()
            .zip(&eigenvectors)
            .filter(|(s, _)| s.abs() <= eps_rank * top)
            .map(|(_, q)| q.clone())
            .collect();
        SpectralData {
            eigenvalues,
            eigenvectors,
            null_basis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockActivity {
    NlpIneq { values: Vector, active: Vec<usize> },
    NlpEq { values: Vector },
    Soc { value: Vector, state: SocState },
    Sdp { matrix: Vec<Vector>, spectral: SpectralData },
    SemiInfinite { values: Vector, active: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActiveSets {
    pub f_value: f64,
    pub w_act: Vec<ActiveScenario>,
    pub blocks: Vec<BlockActivity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockFeasibility {
    pub block: usize,
    pub kind: String,
    pub violation: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub blocks: Vec<BlockFeasibility>,
    pub set_a_violation: f64,
    pub feasible: bool,
}

impl FeasibilityReport {
    pub fn max_violation(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.violation)
            .fold(self.set_a_violation, f64::max)
    }
}

impl Problem {
    pub fn new(dim: usize, kind: ProblemKind) -> Self {
        Problem {
            name: None,
            dim,
            kind,
            scenarios: Vec::new(),
            blocks: Vec::new(),
            set_a: PolyhedralSet::whole_space(dim),
            tolerances: ToleranceSet::default(),
            candidate: None,
        }
    }

    /// Checks the structural invariants of a problem.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let invalid = |m: &str| Err(ProblemError::Invalid(m.to_string()));
        if self.dim == 0 {
            return invalid("dimension must be at least 1");
        }
        if self.scenarios.is_empty() {
            return invalid("at least one scenario is required");
        }
        if self.kind == ProblemKind::Chebyshev && self.scenarios.iter().any(|s| s.psi.is_none()) {
            return invalid("every Chebyshev scenario needs a target psi");
        }
        for b in &self.blocks {
            match b {
                ConeBlock::Soc { g, dirs } => {
                    if g.len() < 2 {
                        return invalid("second-order cone block needs at least g0 and g1");
                    }
                    if dirs.iter().any(|v| v.len() != g.len() - 1) {
                        return invalid("SOC direction length must equal the cone dimension minus one");
                    }
                }
                ConeBlock::Sdp { size, entries, dirs } => {
                    if *size == 0 || entries.len() != size * size {
                        return invalid("SDP block needs size*size entries");
                    }
                    for i in 0..*size {
                        for j in 0..i {
                            if entries[i * size + j] != entries[j * size + i] {
                                return invalid("SDP matrix must be symmetric");
                            }
                        }
                    }
                    if dirs.iter().any(|q| q.len() != *size) {
                        return invalid("SDP direction length must equal the matrix size");
                    }
                }
                ConeBlock::SemiInfinite { grid, .. } => {
                    if grid.is_empty() {
                        return invalid("semi-infinite grid is empty");
                    }
                    if grid.windows(2).any(|w| w[0] >= w[1]) {
                        return invalid("semi-infinite grid must be sorted and duplicate-free");
                    }
                }
                ConeBlock::NlpIneq { .. } | ConeBlock::NlpEq { .. } => {}
            }
        }
        let a = &self.set_a;
        if a.lb.len() != self.dim || a.ub.len() != self.dim {
            return invalid("bounds must have one entry per coordinate");
        }
        if a.lb.iter().zip(&a.ub).any(|(l, u)| l > u) {
            return invalid("lower bound exceeds upper bound");
        }
        if !a.eq_rows.is_empty()
            && linalg::rank(&a.eq_rows, self.tolerances.eps_rank) < a.eq_rows.len()
        {
            return invalid("equality rows of A must have full row rank");
        }
        self.tolerances.validate()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.dim {
            return Err(ProblemError::DimensionMismatch {
                got: x.len(),
                dim: self.dim,
            });
        }
        Ok(())
    }

    /// Value of scenario `i` as it enters the max: `f` or `|f − ψ|`.
    pub fn scenario_value(&self, i: usize, x: &[f64]) -> Result<f64, ProblemError> {
        let s = &self.scenarios[i];
        let v = s.f.eval(x)?;
        Ok(match self.kind {
            ProblemKind::Minimax => v,
            ProblemKind::Chebyshev => (v - s.psi.unwrap_or(0.0)).abs(),
        })
    }

    /// `F(x)` only.
    pub fn objective(&self, x: &[f64]) -> Result<f64, ProblemError> {
        self.check_dim(x)?;
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.scenarios.len() {
            best = best.max(self.scenario_value(i, x)?);
        }
        Ok(best)
    }

    /// `F(x)` and the scenarios within `eps_active` of the max.
    pub fn evaluate_objective(&self, x: &[f64]) -> Result<(f64, Vec<ActiveScenario>), ProblemError> {
        self.check_dim(x)?;
        let eps = self.tolerances.eps_active;
        let raw: Vec<f64> = self
            .scenarios
            .iter()
            .map(|s| s.f.eval(x))
            .collect::<Result<_, _>>()?;
        let mut f_value = f64::NEG_INFINITY;
        let mut devs = Vec::with_capacity(raw.len());
        for (i, v) in raw.iter().enumerate() {
            let dev = match self.kind {
                ProblemKind::Minimax => *v,
                ProblemKind::Chebyshev => v - self.scenarios[i].psi.unwrap_or(0.0),
            };
            devs.push(dev);
            let val = match self.kind {
                ProblemKind::Minimax => dev,
                ProblemKind::Chebyshev => dev.abs(),
            };
            f_value = f_value.max(val);
        }
        let mut w_act = Vec::new();
        for (index, dev) in devs.iter().enumerate() {
            match self.kind {
                ProblemKind::Minimax => {
                    if f_value - dev <= eps {
                        w_act.push(ActiveScenario { index, sign: 1 });
                    }
                }
                ProblemKind::Chebyshev => {
                    if f_value - dev.abs() <= eps {
                        if dev.abs() <= eps {
                            w_act.push(ActiveScenario { index, sign: 1 });
                            w_act.push(ActiveScenario { index, sign: -1 });
                        } else {
                            let sign = if *dev > 0.0 { 1 } else { -1 };
                            w_act.push(ActiveScenario { index, sign });
                        }
                    }
                }
            }
        }
        Ok((f_value, w_act))
    }

    /// `sign · ∇f_ω(x)` for each active entry, in `w_act` order.
    pub fn subdifferential_generators(
        &self,
        x: &[f64],
        w_act: &[ActiveScenario],
    ) -> Result<Vec<Vector>, ProblemError> {
        w_act
            .iter()
            .map(|a| {
                let d = self.scenarios[a.index].f.eval2(x)?;
                Ok(linalg::scaled(a.sign as f64, &d.grad))
            })
            .collect()
    }

    /// Generators of the subdifferential of `F²/2`: `(f_ω − ψ_ω) ∇f_ω` per active entry.
    pub fn squared_generators(
        &self,
        x: &[f64],
        w_act: &[ActiveScenario],
    ) -> Result<Vec<Vector>, ProblemError> {
        if self.kind != ProblemKind::Chebyshev {
            return Err(ProblemError::Invalid(
                "squared generators are defined for Chebyshev problems".into(),
            ));
        }
        w_act
            .iter()
            .map(|a| {
                let s = &self.scenarios[a.index];
                let d = s.f.eval2(x)?;
                Ok(linalg::scaled(d.value - s.psi.unwrap_or(0.0), &d.grad))
            })
            .collect()
    }

    /// Value, gradient and Hessian of the signed scenario `sign·f_ω`.
    pub fn scenario_dual(&self, a: ActiveScenario, x: &[f64]) -> Result<Dual2, ProblemError> {
        let mut d = self.scenarios[a.index].f.eval2(x)?;
        if a.sign < 0 {
            d.value = -d.value;
            d.grad.iter_mut().for_each(|v| *v = -*v);
            d.hess.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(d)
    }

    /// Values of a block's constraint map at `x` (for SDP the matrix row-major).
    pub fn block_values(&self, block: &ConeBlock, x: &[f64]) -> Result<Vector, ProblemError> {
        Ok(match block {
            ConeBlock::NlpIneq { g } => g.iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?,
            ConeBlock::NlpEq { b } => b.iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?,
            ConeBlock::Soc { g, .. } => g.iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?,
            ConeBlock::Sdp { entries, .. } => {
                entries.iter().map(|e| e.eval(x)).collect::<Result<_, _>>()?
            }
            ConeBlock::SemiInfinite { g, grid } => grid
                .iter()
                .map(|t| g.eval_at(x, *t))
                .collect::<Result<_, _>>()?,
        })
    }

    pub fn sdp_matrix(&self, block: &ConeBlock, x: &[f64]) -> Result<Vec<Vector>, ProblemError> {
        let ConeBlock::Sdp { size, .. } = block else {
            return Err(ProblemError::Invalid("not an SDP block".into()));
        };
        let flat = self.block_values(block, x)?;
        Ok(flat.chunks(*size).map(|r| r.to_vec()).collect())
    }

    pub fn active_sets(&self, x: &[f64]) -> Result<ActiveSets, ProblemError> {
        let (f_value, w_act) = self.evaluate_objective(x)?;
        let eps = self.tolerances.eps_active;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let values = self.block_values(block, x)?;
            blocks.push(match block {
                ConeBlock::NlpIneq { .. } => {
                    let active = (0..values.len()).filter(|&i| values[i] >= -eps).collect();
                    BlockActivity::NlpIneq { values, active }
                }
                ConeBlock::NlpEq { .. } => BlockActivity::NlpEq { values },
                ConeBlock::Soc { .. } => {
                    let state = if linalg::norm(&values) <= eps {
                        SocState::Vertex
                    } else if values[0] - linalg::norm(&values[1..]) <= eps {
                        SocState::Boundary
                    } else {
                        SocState::Inactive
                    };
                    BlockActivity::Soc { value: values, state }
                }
                ConeBlock::Sdp { size, .. } => {
                    let matrix: Vec<Vector> = values.chunks(*size).map(|r| r.to_vec()).collect();
                    let spectral = SpectralData::new(&matrix, self.tolerances.eps_rank);
                    BlockActivity::Sdp { matrix, spectral }
                }
                ConeBlock::SemiInfinite { .. } => {
                    let active = (0..values.len()).filter(|&i| values[i] >= -eps).collect();
                    BlockActivity::SemiInfinite { values, active }
                }
            });
        }
        Ok(ActiveSets {
            f_value,
            w_act,
            blocks,
        })
    }

    pub fn check_feasible(&self, x: &[f64]) -> Result<FeasibilityReport, ProblemError> {
        self.check_dim(x)?;
        let eps = self.tolerances.eps_feas;
        let mut blocks = Vec::new();
        for (i, block) in self.blocks.iter().enumerate() {
            let values = self.block_values(block, x)?;
            let violation = match block {
                ConeBlock::NlpIneq { .. } | ConeBlock::SemiInfinite { .. } => {
                    values.iter().fold(0.0f64, |m, v| m.max(*v))
                }
                ConeBlock::NlpEq { .. } => values.iter().fold(0.0f64, |m, v| m.max(v.abs())),
                ConeBlock::Soc { .. } => (linalg::norm(&values[1..]) - values[0]).max(0.0),
                ConeBlock::Sdp { size, .. } => {
                    let m: Vec<Vector> = values.chunks(*size).map(|r| r.to_vec()).collect();
                    let (eig, _) = linalg::sym_eigen(&m);
                    eig[0].max(0.0)
                }
            };
            blocks.push(BlockFeasibility {
                block: i,
                kind: block.kind_name().to_string(),
                violation,
                feasible: violation <= eps,
            });
        }
        let set_a_violation = self.set_a.violation(x).max(0.0);
        let feasible = set_a_violation <= eps && blocks.iter().all(|b| b.feasible);
        Ok(FeasibilityReport {
            blocks,
            set_a_violation,
            feasible,
        })
    }

    pub fn all_blocks_polyhedral(&self) -> bool {
        self.blocks.iter().all(|b| b.is_polyhedral())
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("problem")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dem() -> Problem {
        parse_problem(
            "[problem]\ndim = 2\n[scenario]\nf = \"5*x(1) + x(2)\"\n[scenario]\nf = \"-5*x(1) + x(2)\"\n[scenario]\nf = \"x(1)^2 + x(2)^2 + 4*x(2)\"\n",
        )
        .unwrap()
    }

    #[test]
    fn dem_objective_and_generators() {
        let p = dem();
        let (f, w) = p.evaluate_objective(&[0.0, -3.0]).unwrap();
        assert_eq!(f, -3.0);
        assert_eq!(w.iter().map(|a| a.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        let g = p.subdifferential_generators(&[0.0, -3.0], &w).unwrap();
        assert_eq!(g, vec![vec![5.0, 1.0], vec![-5.0, 1.0], vec![0.0, -2.0]]);
    }

    #[test]
    fn single_scenario() {
        let p = parse_problem("[problem]\ndim=1\n[scenario]\nf=\"x(1)\"\n").unwrap();
        let (f, w) = p.evaluate_objective(&[7.0]).unwrap();
        assert_eq!(f, 7.0);
        assert_eq!(w, vec![ActiveScenario { index: 0, sign: 1 }]);
    }

    #[test]
    fn chebyshev_signs() {
        let p = parse_problem(
            "[problem]\ndim=1\nkind=chebyshev\n[scenario]\nf=\"x(1)\"\npsi=3\n[scenario]\nf=\"2*x(1)\"\npsi=0\n",
        )
        .unwrap();
        // x = 1: deviations -2 and 2
        let (f, w) = p.evaluate_objective(&[1.0]).unwrap();
        assert_eq!(f, 2.0);
        assert_eq!(
            w,
            vec![
                ActiveScenario { index: 0, sign: -1 },
                ActiveScenario { index: 1, sign: 1 }
            ]
        );
        let g = p.subdifferential_generators(&[1.0], &w).unwrap();
        assert_eq!(g, vec![vec![-1.0], vec![2.0]]);
        let sq = p.squared_generators(&[1.0], &w).unwrap();
        assert_eq!(sq, vec![vec![-2.0], vec![4.0]]);
        // zero deviation everywhere: both signs
        let (f, w) = p.evaluate_objective(&[0.0]).unwrap();
        assert_eq!(f, 3.0);
        assert_eq!(w, vec![ActiveScenario { index: 0, sign: -1 }]);
        let q = parse_problem("[problem]\ndim=1\nkind=chebyshev\n[scenario]\nf=\"x(1)\"\npsi=0\n")
            .unwrap();
        let (_, w) = q.evaluate_objective(&[0.0]).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(q.squared_generators(&[0.0], &w).unwrap(), vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn bound_violation() {
        let p = parse_problem("[problem]\ndim=1\n[scenario]\nf=\"x(1)\"\n[set]\nlb=0\n").unwrap();
        let r = p.check_feasible(&[-1.0]).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.set_a_violation, 1.0);
    }

    #[test]
    fn eps_active_monotone() {
        let mut p = dem();
        let x = [0.001, -3.0];
        let mut last = 0;
        for eps in [1e-12, 1e-4, 1e-2, 1.0] {
            p.tolerances.eps_active = eps;
            let (_, w) = p.evaluate_objective(&x).unwrap();
            assert!(w.len() >= last);
            last = w.len();
        }
        assert_eq!(last, 3);
    }
}
