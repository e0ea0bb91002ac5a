//! Dense two-phase simplex with Bland's anti-cycling rule.

use super::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

/// `maximize objective·x` subject to `rows` and `lower <= x <= upper`
/// (bounds may be infinite).
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vector,
    pub lower: Vector,
    pub upper: Vector,
    pub rows: Vec<(Vector, Relation, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vector, value: f64 },
    Infeasible,
    Unbounded,
}

const PIVOT_TOL: f64 = 1e-9;

impl LinearProgram {
    /// `n` variables, all in `[0, inf)`, zero objective.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vector, rel: Relation, rhs: f64) {
        debug_assert_eq!(coeffs.len(), self.n());
        self.rows.push((coeffs, rel, rhs));
    }

    pub fn solve(&self) -> LpOutcome {
        // Each original variable becomes one or two nonnegative columns:
        // x = shift + sign * y  or  x = y_plus - y_minus.
        enum Map {
            Shift { col: usize, shift: f64, sign: f64 },
            Free { plus: usize, minus: usize },
        }
        let n = self.n();
        let mut maps = Vec::with_capacity(n);
        let mut ncols = 0usize;
        let mut extra_rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_finite() {
                maps.push(Map::Shift { col: ncols, shift: lo, sign: 1.0 });
                if hi.is_finite() {
                    extra_rows.push((vec![(ncols, 1.0)], Relation::Le, hi - lo));
                }
                ncols += 1;
            } else if hi.is_finite() {
                maps.push(Map::Shift { col: ncols, shift: hi, sign: -1.0 });
                ncols += 1;
            } else {
                maps.push(Map::Free { plus: ncols, minus: ncols + 1 });
                ncols += 2;
            }
        }

        let mut rows: Vec<(Vector, Relation, f64)> = Vec::new();
        for (coeffs, rel, rhs) in &self.rows {
            let mut r = vec![0.0; ncols];
            let mut b = *rhs;
            for (j, a) in coeffs.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                match maps[j] {
                    Map::Shift { col, shift, sign } => {
                        r[col] += a * sign;
                        b -= a * shift;
                    }
                    Map::Free { plus, minus } => {
                        r[plus] += a;
                        r[minus] -= a;
                    }
                }
            }
            rows.push((r, *rel, b));
        }
        for (entries, rel, b) in extra_rows {
            let mut r = vec![0.0; ncols];
            for (c, a) in entries {
                r[c] = a;
            }
            rows.push((r, rel, b));
        }
        let mut cost = vec![0.0; ncols];
        for (j, c) in self.objective.iter().enumerate() {
            match maps[j] {
                Map::Shift { col, sign, .. } => cost[col] -= c * sign,
                Map::Free { plus, minus } => {
                    cost[plus] -= c;
                    cost[minus] += c;
                }
            }
        }

        match standard_form_min(&rows, &cost, ncols) {
            StdOutcome::Infeasible => LpOutcome::Infeasible,
            StdOutcome::Unbounded => LpOutcome::Unbounded,
            StdOutcome::Optimal(y) => {
                let x: Vector = maps
                    .iter()
                    .map(|m| match *m {
                        Map::Shift { col, shift, sign } => shift + sign * y[col],
                        Map::Free { plus, minus } => y[plus] - y[minus],
                    })
                    .collect();
                let value = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum::<f64>();
                LpOutcome::Optimal { x, value }
            }
        }
    }
}

enum StdOutcome {
    Optimal(Vector),
    Infeasible,
    Unbounded,
}

struct Tableau {
    m: usize,
    width: usize,
    a: Vec<Vector>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize, obj: &mut Vector) {
        let p = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[r].clone();
        for i in 0..self.m {
            if i != r {
                let f = self.a[i][c];
                if f != 0.0 {
                    for (v, pr) in self.a[i].iter_mut().zip(&pivot_row) {
                        *v -= f * pr;
                    }
                    self.a[i][c] = 0.0;
                }
            }
        }
        let f = obj[c];
        if f != 0.0 {
            for (v, pr) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vector {
        let mut obj: Vector = cost.to_vec();
        obj.resize(self.width + 1, 0.0);
        for i in 0..self.m {
            let cb = cost.get(self.basis[i]).copied().unwrap_or(0.0);
            if cb != 0.0 {
                for (v, a) in obj.iter_mut().zip(&self.a[i]) {
                    *v -= cb * a;
                }
            }
        }
        obj
    }

    /// Minimises with Bland's rule over the columns where `allowed` is true.
    /// Returns false if unbounded.
    fn run(&mut self, obj: &mut Vector, allowed: &[bool]) -> bool {
        let rhs = self.width;
        for _ in 0..200_000 {
            let scale = obj[..self.width].iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let entering = (0..self.width).find(|&j| allowed[j] && obj[j] < -1e-10 * scale);
            let Some(c) = entering else { return true };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.a[i][c];
                if a > PIVOT_TOL {
                    let ratio = self.a[i][rhs].max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * ratio.max(br);
                            if ratio < br && !tie
                                || tie && self.basis[i] < self.basis[bi]
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = best else { return false };
            self.pivot(r, c, obj);
        }
        true
    }
}

fn standard_form_min(rows: &[(Vector, Relation, f64)], cost: &[f64], ncols: usize) -> StdOutcome {
    // Slack columns, then one artificial per row.
    let m = rows.len();
    let nslack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let nstruct = ncols + nslack;
    let width = nstruct + m;
    let mut a = Vec::with_capacity(m);
    let mut slack = ncols;
    for (i, (coeffs, rel, b)) in rows.iter().enumerate() {
        let mut row = vec![0.0; width + 1];
        row[..ncols].copy_from_slice(coeffs);
        match rel {
            Relation::Le => {
                row[slack] = 1.0;
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -1.0;
                slack += 1;
            }
            Relation::Eq => {}
        }
        row[width] = *b;
        if *b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
        }
        row[nstruct + i] = 1.0;
        a.push(row);
    }
    let bscale = rows.iter().fold(1.0f64, |s, r| s.max(r.2.abs()));
    let mut t = Tableau {
        m,
        width,
        a,
        basis: (nstruct..nstruct + m).collect(),
    };

    let mut phase1 = vec![0.0; width];
    for c in phase1.iter_mut().skip(nstruct) {
        *c = 1.0;
    }
    let mut obj = t.reduced_costs(&phase1);
    let all = vec![true; width];
    t.run(&mut obj, &all);
    let infeas: f64 = (0..m)
        .filter(|&i| t.basis[i] >= nstruct)
        .map(|i| t.a[i][width])
        .sum();
    if infeas > 1e-9 * bscale {
        return StdOutcome::Infeasible;
    }

    // Drive remaining artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.m {
        if t.basis[i] >= nstruct {
            let col = (0..nstruct)
                .filter(|&j| t.a[i][j].abs() > 1e-9)
                .max_by(|&j, &k| t.a[i][j].abs().total_cmp(&t.a[i][k].abs()));
            match col {
                Some(c) => {
                    // the artificial is zero up to round-off; keep it exactly degenerate
                    t.a[i][width] = 0.0;
                    let mut dummy = vec![0.0; width + 1];
                    t.pivot(i, c, &mut dummy);
                    i += 1;
                }
                None => {
                    t.a.remove(i);
                    t.basis.remove(i);
                    t.m -= 1;
                }
            }
        } else {
            i += 1;
        }
    }

    let mut full_cost = cost.to_vec();
    full_cost.resize(width, 0.0);
    let mut obj = t.reduced_costs(&full_cost);
    let mut allowed = vec![true; width];
    for a in allowed.iter_mut().skip(nstruct) {
        *a = false;
    }
    if !t.run(&mut obj, &allowed) {
        return StdOutcome::Unbounded;
    }
    let mut y = vec![0.0; ncols];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < ncols {
            y[b] = t.a[i][width].max(0.0);
        }
    }
    StdOutcome::Optimal(y)
}

/// Weights certifying `target ∈ conv(hull) + cone(cone)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    pub hull_weights: Vector,
    pub cone_weights: Vector,
}

/// Decides `target ∈ conv(hull) + cone(cone)`. An empty hull means pure conic
/// membership. The returned weights come from a basic solution, so at most
/// `d + 1` of them are nonzero.
pub fn lp_membership(target: &[f64], hull: &[Vector], cone: &[Vector]) -> Option<ConeMembership> {
    let d = target.len();
    let (nh, nc) = (hull.len(), cone.len());
    let mut lp = LinearProgram::new(nh + nc);
    for k in 0..d {
        let mut row: Vector = hull.iter().map(|h| h[k]).collect();
        row.extend(cone.iter().map(|c| c[k]));
        lp.add_row(row, Relation::Eq, target[k]);
    }
    if nh > 0 {
        let mut row = vec![1.0; nh];
        row.extend(std::iter::repeat(0.0).take(nc));
        lp.add_row(row, Relation::Eq, 1.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => Some(ConeMembership {
            hull_weights: x[..nh].to_vec(),
            cone_weights: x[nh..].to_vec(),
        }),
        _ => None,
    }
}

/// Largest `t` with `t·u ∈ conv(hull) + cone(cone)`; `None` if no such `t`,
/// infinite if unbounded (detected as exceeding `1e6`).
pub fn ray_extent(u: &[f64], hull: &[Vector], cone: &[Vector]) -> Option<f64> {
    const CAP: f64 = 1e6;
    let d = u.len();
    let (nh, nc) = (hull.len(), cone.len());
    let mut lp = LinearProgram::new(nh + nc + 1);
    let tcol = nh + nc;
    lp.lower[tcol] = f64::NEG_INFINITY;
    lp.upper[tcol] = CAP;
    lp.objective[tcol] = 1.0;
    for k in 0..d {
        let mut row: Vector = hull.iter().map(|h| h[k]).collect();
        row.extend(cone.iter().map(|c| c[k]));
        row.push(-u[k]);
        lp.add_row(row, Relation::Eq, 0.0);
    }
    if nh > 0 {
        let mut row = vec![1.0; nh];
        row.extend(std::iter::repeat(0.0).take(nc + 1));
        lp.add_row(row, Relation::Eq, 1.0);
    }
    match lp.solve() {
        LpOutcome::Optimal { value, .. } => Some(if value >= CAP * (1.0 - 1e-9) {
            f64::INFINITY
        } else {
            value
        }),
        LpOutcome::Unbounded => Some(f64::INFINITY),
        LpOutcome::Infeasible => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_lp() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![3.0, 5.0];
        lp.add_row(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Relation::Le, 18.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] - 2.0).abs() < 1e-10 && (x[1] - 6.0).abs() < 1e-10);
                assert!((value - 36.0).abs() < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(1);
        lp.add_row(vec![1.0], Relation::Le, -1.0);
        assert_eq!(lp.solve(), LpOutcome::Infeasible);
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![1.0, 0.0];
        lp.add_row(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp.solve(), LpOutcome::Unbounded);
    }

    #[test]
    fn free_and_bounded_variables() {
        // min x + y with x free, y in [-2, 3], x - y >= -1, x >= -5 -> x = -3, y = -2
        let mut lp = LinearProgram::new(2);
        lp.objective = vec![-1.0, -1.0];
        lp.lower = vec![f64::NEG_INFINITY, -2.0];
        lp.upper = vec![f64::INFINITY, 3.0];
        lp.add_row(vec![1.0, -1.0], Relation::Ge, -1.0);
        lp.add_row(vec![1.0, 0.0], Relation::Ge, -5.0);
        match lp.solve() {
            LpOutcome::Optimal { x, value } => {
                assert!((x[0] + 3.0).abs() < 1e-10 && (x[1] + 2.0).abs() < 1e-10, "{x:?}");
                assert!((value - 5.0).abs() < 1e-10);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's cycling example; Dantzig's rule cycles here, Bland's rule reaches 1/20.
        let mut lp = LinearProgram::new(4);
        lp.objective = vec![0.75, -150.0, 0.02, -6.0];
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        match lp.solve() {
            LpOutcome::Optimal { value, .. } => assert!((value - 0.05).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn membership_weights() {
        let hull = vec![vec![5.0, 1.0], vec![-5.0, 1.0], vec![0.0, -2.0]];
        let m = lp_membership(&[0.0, 0.0], &hull, &[]).unwrap();
        for w in &m.hull_weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!(lp_membership(&[0.0, 5.0], &hull, &[]).is_none());
        assert!(lp_membership(&[0.0, 5.0], &hull, &[vec![0.0, 1.0]]).is_some());
    }

    #[test]
    fn ray_extents() {
        // unit l1 ball in the plane
        let hull = vec![
            vec![1.0, 0.0],
            vec![-1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, -1.0],
        ];
        let t = ray_extent(&[1.0, 1.0], &hull, &[]).unwrap();
        assert!((t - 0.5).abs() < 1e-12);
        let t = ray_extent(&[1.0, 0.0], &hull, &[vec![1.0, 0.0]]).unwrap();
        assert!(t.is_infinite());
        assert!(ray_extent(&[1.0, 0.0], &[vec![1.0, 1.0]], &[]).is_none());
        let t = ray_extent(&[1.0, 0.0], &[vec![2.0, 0.0], vec![3.0, 0.0]], &[]).unwrap();
        assert!((t - 3.0).abs() < 1e-12);
    }
}
