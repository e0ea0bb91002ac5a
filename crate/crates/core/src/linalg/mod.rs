//! Small dense linear algebra: determinants, ranks, symmetric eigendecomposition,
//! least squares and a simplex LP solver. Sizes here are tiny (d <= ~10), so
//! everything is O(n^3) textbook code on `Vec<Vec<f64>>` rows.

mod lp;

pub use lp::{
    lp_membership, ray_extent, ConeMembership, LinearProgram, LpOutcome, Relation,
};

pub type Vector = Vec<f64>;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vector {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vector {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn unit(d: usize, i: usize) -> Vector {
    let mut e = vec![0.0; d];
    e[i] = 1.0;
    e
}

/// `M v` for `M` given as rows.
pub fn mat_vec(m: &[Vector], v: &[f64]) -> Vector {
    m.iter().map(|row| dot(row, v)).collect()
}

/// Quadratic form `hᵀ M h` for a row-major square matrix stored flat.
pub fn quad_form(m: &[f64], h: &[f64]) -> f64 {
    let d = h.len();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += h[i] * m[i * d + j] * h[j];
        }
    }
    s
}

pub fn transpose(m: &[Vector]) -> Vec<Vector> {
    if m.is_empty() {
        return Vec::new();
    }
    let (r, c) = (m.len(), m[0].len());
    (0..c).map(|j| (0..r).map(|i| m[i][j]).collect()).collect()
}

/// Determinant of the square matrix whose columns are `cols`, by LU with partial pivoting.
pub fn det_columns(cols: &[Vector]) -> f64 {
    det(&transpose(cols))
}

pub fn det(rows: &[Vector]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 1.0;
    }
    let mut a: Vec<Vector> = rows.to_vec();
    let mut d = 1.0;
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap_or(k);
        if a[p][k] == 0.0 {
            return 0.0;
        }
        if p != k {
            a.swap(p, k);
            d = -d;
        }
        d *= a[k][k];
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            if f != 0.0 {
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
            }
        }
    }
    d
}

/// Solves the square system `A x = b` (A as rows). `None` if singular.
pub fn solve(rows: &[Vector], b: &[f64]) -> Option<Vector> {
    let n = rows.len();
    let mut a: Vec<Vector> = rows
        .iter()
        .zip(b)
        .map(|(r, bi)| {
            let mut r = r.clone();
            r.push(*bi);
            r
        })
        .collect();
    let scale = rows.iter().map(|r| norm_inf(r)).fold(0.0, f64::max).max(1e-300);
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() <= 1e-14 * scale {
            return None;
        }
        a.swap(p, k);
        for i in 0..n {
            if i != k {
                let f = a[i][k] / a[k][k];
                if f != 0.0 {
                    for j in k..=n {
                        a[i][j] -= f * a[k][j];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
/// Returns eigenvalues in descending order and the matching unit eigenvectors.
pub fn sym_eigen(m: &[Vector]) -> (Vector, Vec<Vector>) {
    let n = m.len();
    let mut a: Vec<Vector> = m.to_vec();
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (a[i][j] + a[j][i]);
            a[i][j] = s;
            a[j][i] = s;
        }
    }
    let mut v: Vec<Vector> = (0..n).map(|i| unit(n, i)).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        let total: f64 = a.iter().flatten().map(|x| x * x).sum();
        if off <= 1e-30 * total.max(1e-300) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].total_cmp(&a[i][i]));
    let values = order.iter().map(|&i| a[i][i]).collect();
    let vectors = order
        .iter()
        .map(|&i| (0..n).map(|k| v[k][i]).collect())
        .collect();
    (values, vectors)
}

/// Singular values of the matrix with the given columns (one-sided Jacobi), descending.
pub fn singular_values(cols: &[Vector]) -> Vector {
    let mut u: Vec<Vector> = cols.to_vec();
    let k = u.len();
    for _sweep in 0..60 {
        let mut rotated = false;
        for i in 0..k {
            for j in i + 1..k {
                let alpha = dot(&u[i], &u[i]);
                let beta = dot(&u[j], &u[j]);
                let gamma = dot(&u[i], &u[j]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (ui, uj) = (u[i].clone(), u[j].clone());
                for r in 0..ui.len() {
                    u[i][r] = c * ui[r] - s * uj[r];
                    u[j][r] = s * ui[r] + c * uj[r];
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s: Vector = u.iter().map(|c| norm(c)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank: singular values above `eps * max(1, sigma_max)`.
pub fn rank(cols: &[Vector], eps: f64) -> usize {
    let s = singular_values(cols);
    let top = s.first().copied().unwrap_or(0.0);
    let thresh = eps * top.max(1.0);
    s.iter().filter(|&&v| v > thresh).count()
}

/// Least squares `min |A x - b|` for `A` given by columns, via normal equations
/// with a small Tikhonov shift when they are singular.
pub fn least_squares(cols: &[Vector], b: &[f64]) -> Vector {
    let k = cols.len();
    if k == 0 {
        return Vec::new();
    }
    let gram: Vec<Vector> = (0..k)
        .map(|i| (0..k).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect();
    let rhs: Vector = cols.iter().map(|c| dot(c, b)).collect();
    if let Some(x) = solve(&gram, &rhs) {
        return x;
    }
    let shift = 1e-12 * gram.iter().enumerate().map(|(i, r)| r[i]).fold(1.0, f64::max);
    let reg: Vec<Vector> = gram
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut r = r.clone();
            r[i] += shift;
            r
        })
        .collect();
    solve(&reg, &rhs).unwrap_or_else(|| vec![0.0; k])
}

/// Positive weights `β` with `β_1 = 1` and `Σ β_i V_i = 0`, provided
/// `rank [V_1..V_p] = p − 1`. For `p = 1` this asks for `V_1 = 0`.
pub fn solve_positive_combination(v: &[Vector], eps_rank: f64, eps_pos: f64) -> Option<Vector> {
    let p = v.len();
    if p == 0 {
        return None;
    }
    let scale = v.iter().map(|c| norm_inf(c)).fold(1.0, f64::max);
    if p == 1 {
        return (norm(&v[0]) <= 1e-9 * scale).then(|| vec![1.0]);
    }
    let rest = &v[1..];
    if rank(rest, eps_rank) != p - 1 {
        return None;
    }
    let rhs = scaled(-1.0, &v[0]);
    let b = least_squares(rest, &rhs);
    let mut r = v[0].clone();
    for (bi, c) in b.iter().zip(rest) {
        axpy(*bi, c, &mut r);
    }
    if norm(&r) > 1e-9 * scale || b.iter().any(|x| *x <= eps_pos) {
        return None;
    }
    let mut beta = vec![1.0];
    beta.extend(b);
    Some(beta)
}

/// Orthonormal basis (as vectors) of the span of `cols` padded to the whole
/// space by the standard basis, Gram-Schmidt with re-orthogonalisation.
pub fn orthonormal_basis(dim: usize, seed_vectors: &[Vector]) -> Vec<Vector> {
    let mut basis: Vec<Vector> = Vec::new();
    let candidates = seed_vectors.iter().cloned().chain((0..dim).map(|i| unit(dim, i)));
    for mut v in candidates {
        for _ in 0..2 {
            for b in &basis {
                let p = dot(&v, b);
                axpy(-p, b, &mut v);
            }
        }
        let n = norm(&v);
        if n > 1e-10 {
            basis.push(scaled(1.0 / n, &v));
        }
        if basis.len() == dim {
            break;
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_matches_cofactor_expansion() {
        let m = vec![
            vec![2.0, -1.0, 0.5],
            vec![1.0, 3.0, -2.0],
            vec![0.0, 4.0, 1.0],
        ];
        let cof = 2.0 * (3.0 * 1.0 - (-2.0) * 4.0) - (-1.0) * (1.0 * 1.0 - 0.0)
            + 0.5 * (1.0 * 4.0 - 0.0);
        assert!((det(&m) - cof).abs() < 1e-12);
        assert_eq!(det(&[vec![1.0, 2.0], vec![2.0, 4.0]]), 0.0);
    }

    #[test]
    fn eigen_reconstructs() {
        let m = vec![
            vec![4.0, 1.0, -2.0],
            vec![1.0, 2.0, 0.0],
            vec![-2.0, 0.0, 3.0],
        ];
        let (vals, vecs) = sym_eigen(&m);
        assert!(vals.windows(2).all(|w| w[0] >= w[1]));
        for (l, v) in vals.iter().zip(&vecs) {
            let mv = mat_vec(&m, v);
            for i in 0..3 {
                assert!((mv[i] - l * v[i]).abs() < 1e-12);
            }
        }
        let trace: f64 = vals.iter().sum();
        assert!((trace - 9.0).abs() < 1e-12);
    }

    #[test]
    fn rank_and_singular_values() {
        let cols = vec![vec![1.0, 0.0, 1.0], vec![2.0, 0.0, 2.0], vec![0.0, 1.0, 0.0]];
        assert_eq!(rank(&cols, 1e-9), 2);
        assert_eq!(rank(&[vec![0.0, 0.0]], 1e-9), 0);
        let s = singular_values(&[vec![3.0, 0.0], vec![0.0, -4.0]]);
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn least_squares_exact_system() {
        let cols = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        let x = least_squares(&cols, &[2.0, 3.0, 5.0]);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn positive_combinations() {
        let dem = vec![vec![5.0, 1.0], vec![-5.0, 1.0], vec![0.0, -2.0]];
        let b = solve_positive_combination(&dem, 1e-9, 1e-9).unwrap();
        assert!((b[1] - 1.0).abs() < 1e-12 && (b[2] - 1.0).abs() < 1e-12);
        let b = solve_positive_combination(&[vec![1.0, 0.0], vec![-1.0, 0.0]], 1e-9, 1e-9).unwrap();
        assert_eq!(b, vec![1.0, 1.0]);
        assert!(solve_positive_combination(&[vec![1.0, 0.0], vec![2.0, 0.0]], 1e-9, 1e-9).is_none());
        assert!(solve_positive_combination(&[vec![0.0, 0.0]], 1e-9, 1e-9).is_some());
        assert!(solve_positive_combination(&[vec![0.0, 1.0]], 1e-9, 1e-9).is_none());
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = orthonormal_basis(3, &[vec![1.0, 1.0, 0.0]]);
        assert_eq!(b.len(), 3);
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&b[i], &b[j]) - expect).abs() < 1e-12);
            }
        }
    }
}
