//! Exact penalty `Φ_c = F + c·dist(G(x), K)` and its subdifferential test.

use super::{block_dual_norm, prepare, CheckError, CheckOptions, ScenarioWeight};
use crate::geometry::{self, Generator, Provenance};
use crate::linalg::{self, LinearProgram, LpOutcome, Relation, Vector};
use crate::problem::{BlockActivity, ConeBlock, Problem, ProblemError, SocState};
use serde::{Deserialize, Serialize};

/// `F(x) + c Σ_blocks dist(G_b(x), K_b)`, block norms as in `geometry::block_distance`.
pub fn penalty_value(p: &Problem, x: &[f64], c: f64) -> Result<f64, ProblemError> {
    let mut dist = 0.0;
    for block in &p.blocks {
        let values = p.block_values(block, x)?;
        dist += geometry::block_distance(block, &values);
    }
    Ok(p.objective(x)? + c * dist)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyTerm {
    pub weight: f64,
    pub v: Vector,
    /// Unit-dual-norm element `y*` of the block's dual space.
    pub dual: Vector,
    pub block: Option<usize>,
    pub tag: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyReport {
    pub c: f64,
    pub penalty_value: f64,
    /// `0 ∈ ∂Φ_c(x) + N_A(x)` on the (inner approximated) generator model.
    pub holds: bool,
    pub alpha: Vec<ScenarioWeight>,
    pub terms: Vec<PenaltyTerm>,
    #[serde(with = "crate::serde_util")]
    pub residual: f64,
    pub generators_sampled: bool,
}

impl PenaltyReport {
    /// `|Σ weight·v|` over the stored terms.
    pub fn recompute_residual(&self) -> f64 {
        let d = self.terms.first().map_or(0, |t| t.v.len());
        let mut r = vec![0.0; d];
        for t in &self.terms {
            linalg::axpy(t.weight, &t.v, &mut r);
        }
        linalg::norm(&r)
    }
}

/// Unit dual-norm version of a block generator.
fn normalized(p: &Problem, g: &Generator) -> Option<(Vector, Vector)> {
    let b = g.block?;
    let n = block_dual_norm(&p.blocks[b], &g.dual);
    (n > 0.0).then(|| (linalg::scaled(1.0 / n, &g.v), linalg::scaled(1.0 / n, &g.dual)))
}

/// Tests `0 ∈ co ∂F(x) + c·∂φ(x) + N_A(x)`, with `∂φ` generated by unit
/// dual elements of the normal cones (per-generator budget `c` for NLP rows,
/// a shared budget `c` per SOC/SDP/semi-infinite block).
pub fn penalty_subdiff_check(
    p: &Problem,
    x: &[f64],
    c: f64,
    opts: &CheckOptions,
) -> Result<PenaltyReport, CheckError> {
    if !(c >= 0.0) {
        return Err(CheckError::Invalid("penalty parameter must be nonnegative".into()));
    }
    let (pm, gs) = prepare(p, x, opts)?;
    let d = p.dim;
    let mut cols: Vec<(Vector, Vector, Option<usize>, Provenance)> = gs
        .eta
        .iter()
        .filter_map(|g| normalized(p, g).map(|(v, y)| (v, y, g.block, g.tag.clone())))
        .collect();
    // the SOC vertex normal cone contains the axis ray, which the normalized
    // extreme rays alone do not reach
    for (bi, block) in p.blocks.iter().enumerate() {
        if let (ConeBlock::Soc { g, .. }, BlockActivity::Soc { state: SocState::Vertex, .. }) =
            (block, &pm.act.blocks[bi])
        {
            let mut y = vec![0.0; g.len()];
            y[0] = -1.0;
            cols.push((pm.pullback(bi, &y), y, Some(bi), Provenance::SocBoundary { block: bi }));
        }
    }
    let (nh, ne, nn) = (gs.grads.len(), cols.len(), gs.na.len());
    let mut lp = LinearProgram::new(nh + ne + nn);
    for k in 0..d {
        let mut row: Vector = gs.grads.iter().map(|g| g.v[k]).collect();
        row.extend(cols.iter().map(|c| c.0[k]));
        row.extend(gs.na.iter().map(|g| g.v[k]));
        lp.add_row(row, Relation::Eq, 0.0);
    }
    let mut simplex = vec![0.0; nh + ne + nn];
    simplex[..nh].iter_mut().for_each(|v| *v = 1.0);
    lp.add_row(simplex, Relation::Eq, 1.0);
    for (bi, block) in p.blocks.iter().enumerate() {
        let members: Vec<usize> = (0..ne).filter(|&k| cols[k].2 == Some(bi)).collect();
        if members.is_empty() {
            continue;
        }
        if block.is_polyhedral() && !matches!(block, ConeBlock::SemiInfinite { .. }) {
            for k in members {
                lp.upper[nh + k] = c;
            }
        } else {
            let mut row = vec![0.0; nh + ne + nn];
            for k in members {
                row[nh + k] = 1.0;
            }
            lp.add_row(row, Relation::Le, c);
        }
    }
    let value = penalty_value(p, x, c)?;
    let scale = gs
        .grads
        .iter()
        .map(|g| linalg::norm_inf(&g.v))
        .chain(cols.iter().map(|c| linalg::norm_inf(&c.0)))
        .chain(gs.na.iter().map(|g| linalg::norm_inf(&g.v)))
        .fold(1.0, f64::max)
        * c.max(1.0);
    let mut report = PenaltyReport {
        c,
        penalty_value: value,
        holds: false,
        alpha: Vec::new(),
        terms: Vec::new(),
        residual: f64::INFINITY,
        generators_sampled: gs.sampled,
    };
    if let LpOutcome::Optimal { x: w, .. } = lp.solve() {
        let mut r = vec![0.0; d];
        for (k, g) in gs.grads.iter().enumerate() {
            linalg::axpy(w[k], &g.v, &mut r);
            if w[k] > 0.0 {
                if let Provenance::Scenario { index, sign } = g.tag {
                    report.alpha.push(ScenarioWeight { index, sign, weight: w[k] });
                }
                report.terms.push(PenaltyTerm {
                    weight: w[k],
                    v: g.v.clone(),
                    dual: Vec::new(),
                    block: None,
                    tag: g.tag.clone(),
                });
            }
        }
        for (k, col) in cols.iter().enumerate() {
            let wk = w[nh + k];
            linalg::axpy(wk, &col.0, &mut r);
            if wk > 0.0 {
                report.terms.push(PenaltyTerm {
                    weight: wk,
                    v: col.0.clone(),
                    dual: col.1.clone(),
                    block: col.2,
                    tag: col.3.clone(),
                });
            }
        }
        for (k, g) in gs.na.iter().enumerate() {
            let wk = w[nh + ne + k];
            linalg::axpy(wk, &g.v, &mut r);
            if wk > 0.0 {
                report.terms.push(PenaltyTerm {
                    weight: wk,
                    v: g.v.clone(),
                    dual: Vec::new(),
                    block: None,
                    tag: g.tag.clone(),
                });
            }
        }
        report.residual = linalg::norm(&r);
        report.holds = report.residual <= 1e-8 * scale;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn bazaraa_threshold() {
        let p = registry::lookup("bazaraa45", None).unwrap();
        let opts = CheckOptions::default();
        let x = [3.0, 3.0];
        assert!(!penalty_subdiff_check(&p, &x, 0.0, &opts).unwrap().holds);
        assert!(!penalty_subdiff_check(&p, &x, 150.0, &opts).unwrap().holds);
        assert!(penalty_subdiff_check(&p, &x, 152.5, &opts).unwrap().holds);
        assert_eq!(penalty_value(&p, &x, 10.0).unwrap(), p.objective(&x).unwrap());
    }
}
