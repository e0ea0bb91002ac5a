//! Replacing semi-infinite blocks by finitely many inequalities at active grid points.

use super::{prepare, CheckError, CheckOptions};
use crate::geometry::Provenance;
use crate::linalg;
use crate::problem::{BlockActivity, ConeBlock, Problem};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBlock {
    pub block: usize,
    /// Active grid points `T_i(x)`.
    pub active: Vec<f64>,
    pub retained: Vec<f64>,
    /// More than `d + 1` points were active and some were dropped.
    pub capped: bool,
    /// No active points; the block was removed.
    pub dropped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizeReport {
    pub blocks: Vec<DiscretizedBlock>,
    pub warnings: Vec<String>,
}

/// NLP-only problem whose semi-infinite blocks are replaced by `g(·, t) <= 0`
/// at no more than `d + 1` active grid points per block. Points carrying a
/// positive weight in a multiplier are kept first, the rest by decreasing
/// `|∇_x g(x, t)|`.
pub fn semiinfinite_discretize(
    p: &Problem,
    x: &[f64],
    opts: &CheckOptions,
) -> Result<(Problem, DiscretizeReport), CheckError> {
    let (pm, gs) = prepare(p, x, opts)?;
    let cap = p.dim + 1;
    let mut support: Vec<(usize, usize)> = Vec::new();
    if let Some(m) = linalg::lp_membership(&vec![0.0; p.dim], &gs.hull_vectors(), &gs.cone_vectors()) {
        for (w, g) in m.cone_weights.iter().zip(&gs.eta) {
            if let Provenance::SemiInf { block, grid_index, .. } = g.tag {
                if *w > 0.0 {
                    support.push((block, grid_index));
                }
            }
        }
    }
    let mut out = p.clone();
    out.blocks.clear();
    let mut report = DiscretizeReport { blocks: Vec::new(), warnings: Vec::new() };
    for (bi, block) in p.blocks.iter().enumerate() {
        let ConeBlock::SemiInfinite { g, grid } = block else {
            out.blocks.push(block.clone());
            continue;
        };
        let BlockActivity::SemiInfinite { active, .. } = &pm.act.blocks[bi] else { unreachable!() };
        let mut order = active.clone();
        let grad_norm = |i: usize| linalg::norm(&pm.jets[bi][i].grad);
        order.sort_by(|&a, &b| {
            let sa = support.contains(&(bi, a));
            let sb = support.contains(&(bi, b));
            sb.cmp(&sa).then(grad_norm(b).total_cmp(&grad_norm(a))).then(a.cmp(&b))
        });
        let capped = order.len() > cap;
        order.truncate(cap);
        order.sort_unstable();
        let entry = DiscretizedBlock {
            block: bi,
            active: active.iter().map(|&i| grid[i]).collect(),
            retained: order.iter().map(|&i| grid[i]).collect(),
            capped,
            dropped: active.is_empty(),
        };
        if entry.dropped {
            report.warnings.push(format!("block {}: no active grid points, block dropped", bi + 1));
        } else {
            if capped {
                report.warnings.push(format!(
                    "block {}: {} active grid points, {} retained",
                    bi + 1,
                    entry.active.len(),
                    entry.retained.len()
                ));
            }
            out.blocks.push(ConeBlock::NlpIneq {
                g: order.iter().map(|&i| g.substitute_param(grid[i])).collect(),
            });
        }
        report.blocks.push(entry);
    }
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::parse_problem;

    fn problem(g: &str, grid: &str) -> Problem {
        parse_problem(&format!(
            "[problem]\ndim = 2\n[scenario]\nf = \"x(1)^2 + x(2)^2\"\n[semiinf]\ng = \"{g}\"\ngrid = {grid}\n"
        ))
        .unwrap()
    }

    #[test]
    fn two_active_points() {
        let p = problem("x(1) - (t - 0.3)^2*(t - 0.7)^2", "0.3, 0.5, 0.7");
        let (q, r) = semiinfinite_discretize(&p, &[0.0, 0.0], &CheckOptions::default()).unwrap();
        assert_eq!(r.blocks[0].retained, vec![0.3, 0.7]);
        let ConeBlock::NlpIneq { g } = &q.blocks[0] else { panic!() };
        assert_eq!(g.len(), 2);
    }

    #[test]
    fn inactive_block_dropped() {
        let p = problem("x(1) - 1 - t", "0:1:5");
        let (q, r) = semiinfinite_discretize(&p, &[0.0, 0.0], &CheckOptions::default()).unwrap();
        assert!(q.blocks.is_empty() && r.blocks[0].dropped);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn capped_at_d_plus_one() {
        let p = problem("t*x(1) + (1 - t)*x(2)", "0:1:5");
        let (q, r) = semiinfinite_discretize(&p, &[0.0, 0.0], &CheckOptions::default()).unwrap();
        assert!(r.blocks[0].capped);
        assert_eq!(r.blocks[0].active.len(), 5);
        assert_eq!(r.blocks[0].retained.len(), 3);
        let ConeBlock::NlpIneq { g } = &q.blocks[0] else { panic!() };
        assert_eq!(g.len(), 3);
    }
}
