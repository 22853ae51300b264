//! Small dense linear algebra for k x k matrices (k is the cycle length,
//! rarely above a handful). Row-major storage throughout.

use crate::error::{Error, Result};

/// Determinant via LU with partial pivoting. Consumes the matrix.
pub(crate) fn lu_det(mut m: Vec<f64>, k: usize) -> f64 {
    debug_assert_eq!(m.len(), k * k);
    if k == 0 {
        return 1.0; // empty determinant convention
    }
    let mut det = 1.0;
    for col in 0..k {
        let mut pivot = col;
        for row in col + 1..k {
            if m[row * k + col].abs() > m[pivot * k + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * k + col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for j in 0..k {
                m.swap(col * k + j, pivot * k + j);
            }
            det = -det;
        }
        let p = m[col * k + col];
        det *= p;
        for row in col + 1..k {
            let factor = m[row * k + col] / p;
            for j in col..k {
                m[row * k + j] -= factor * m[col * k + j];
            }
        }
    }
    det
}

/// Solve `M x = rhs` via LU with partial pivoting.
pub(crate) fn lu_solve(mut m: Vec<f64>, k: usize, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
    debug_assert_eq!(m.len(), k * k);
    debug_assert_eq!(rhs.len(), k);
    for col in 0..k {
        let mut pivot = col;
        for row in col + 1..k {
            if m[row * k + col].abs() > m[pivot * k + col].abs() {
                pivot = row;
            }
        }
        if m[pivot * k + col] == 0.0 {
            return Err(Error::NumericFailure("singular linear system".into()));
        }
        if pivot != col {
            for j in 0..k {
                m.swap(col * k + j, pivot * k + j);
            }
            rhs.swap(col, pivot);
        }
        let p = m[col * k + col];
        for row in col + 1..k {
            let factor = m[row * k + col] / p;
            for j in col..k {
                m[row * k + j] -= factor * m[col * k + j];
            }
            rhs[row] -= factor * rhs[col];
        }
    }
    for col in (0..k).rev() {
        let mut acc = rhs[col];
        for j in col + 1..k {
            acc -= m[col * k + j] * rhs[j];
        }
        rhs[col] = acc / m[col * k + col];
    }
    Ok(rhs)
}

/// Determinant of the matrix with row `i` and column `j` removed.
pub(crate) fn minor_det(m: &[f64], k: usize, i: usize, j: usize) -> f64 {
    debug_assert_eq!(m.len(), k * k);
    let mut sub = Vec::with_capacity((k - 1) * (k - 1));
    for r in 0..k {
        if r == i {
            continue;
        }
        for c in 0..k {
            if c == j {
                continue;
            }
            sub.push(m[r * k + c]);
        }
    }
    lu_det(sub, k - 1)
}

pub(crate) fn mat_vec(m: &[f64], k: usize, v: &[f64]) -> Vec<f64> {
    (0..k)
        .map(|i| (0..k).map(|j| m[i * k + j] * v[j]).sum())
        .collect()
}

fn max_entry(m: &[f64]) -> f64 {
    m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()))
}

/// Dominant eigenpair of a matrix with positive entries (Perron pair), or of
/// a non-negative diagonal matrix (the `z = 0` case, handled directly).
///
/// Power iteration with sum-1 normalization, preceded by repeated squaring of
/// the matrix so that clustered subdominant eigenvalues cannot stall the
/// iteration. Returns `(rho, eigvec, residual, iterations)` with the
/// eigenvector normalized to sum 1 and
/// `residual = max_i |(A r)_i - rho r_i| <= 1e-12 * max entry`.
pub(crate) fn perron_positive(a: &[f64], k: usize) -> Result<(f64, Vec<f64>, f64, usize)> {
    debug_assert_eq!(a.len(), k * k);
    if k == 1 {
        return Ok((a[0], vec![1.0], 0.0, 0));
    }
    let off_diag_max = (0..k)
        .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
        .fold(0.0f64, |acc, (i, j)| acc.max(a[i * k + j].abs()));
    if off_diag_max == 0.0 {
        // Diagonal matrix: spectral radius is the largest diagonal entry.
        let mut rho = f64::NEG_INFINITY;
        for i in 0..k {
            rho = rho.max(a[i * k + i]);
        }
        let hits: Vec<usize> = (0..k).filter(|&i| a[i * k + i] == rho).collect();
        let mut vec = vec![0.0; k];
        for &i in &hits {
            vec[i] = 1.0 / hits.len() as f64;
        }
        return Ok((rho, vec, 0.0, 0));
    }
    if a.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NumericFailure(
            "perron solver requires positive entries".into(),
        ));
    }

    // Repeated squaring: B <- B^2 / max(B^2) collapses B toward rank one at a
    // doubly exponential rate, leaving the Perron direction in every column.
    let mut b = a.to_vec();
    let scale0 = max_entry(&b);
    for x in &mut b {
        *x /= scale0;
    }
    let mut squarings = 0usize;
    for _ in 0..60 {
        let mut sq = vec![0.0; k * k];
        for i in 0..k {
            for l in 0..k {
                let bil = b[i * k + l];
                for j in 0..k {
                    sq[i * k + j] += bil * b[l * k + j];
                }
            }
        }
        let s = max_entry(&sq);
        if !(s.is_finite() && s > 0.0) {
            break;
        }
        for x in &mut sq {
            *x /= s;
        }
        b = sq;
        squarings += 1;
        // Stop once all columns point in the same direction.
        if columns_proportional(&b, k, 1e-14) {
            break;
        }
    }

    // Dominant direction: the heaviest column, sum-normalized.
    let heavy = (0..k)
        .max_by(|&p, &q| {
            let np: f64 = (0..k).map(|i| b[i * k + p]).sum();
            let nq: f64 = (0..k).map(|i| b[i * k + q]).sum();
            np.total_cmp(&nq)
        })
        .unwrap();
    let mut r: Vec<f64> = (0..k).map(|i| b[i * k + heavy]).collect();
    let sum: f64 = r.iter().sum();
    for x in &mut r {
        *x /= sum;
    }

    // Polish against the original matrix; rho = 1^T A r for sum-1 r.
    let mut rho = 0.0;
    let mut iterations = squarings;
    let mut stable = 0;
    for _ in 0..100_000 {
        let ar = mat_vec(a, k, &r);
        let s: f64 = ar.iter().sum();
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::NumericFailure("power iteration diverged".into()));
        }
        let rho_new = s;
        r = ar.into_iter().map(|x| x / s).collect();
        iterations += 1;
        if (rho_new - rho).abs() <= 1e-14 * rho_new.max(1.0) {
            stable += 1;
            if stable >= 3 {
                rho = rho_new;
                break;
            }
        } else {
            stable = 0;
        }
        rho = rho_new;
    }

    let ar = mat_vec(a, k, &r);
    let residual = (0..k)
        .map(|i| (ar[i] - rho * r[i]).abs())
        .fold(0.0f64, f64::max);
    let gate = 1e-12 * max_entry(a).max(f64::MIN_POSITIVE);
    if residual > gate {
        return Err(Error::NumericFailure(format!(
            "perron residual {residual} exceeds {gate}"
        )));
    }
    Ok((rho, r, residual, iterations))
}

fn columns_proportional(b: &[f64], k: usize, tol: f64) -> bool {
    let norm: Vec<f64> = (0..k).map(|j| (0..k).map(|i| b[i * k + j]).sum()).collect();
    let reference: Vec<f64> = (0..k).map(|i| b[i * k] / norm[0]).collect();
    for j in 1..k {
        if norm[j] <= 0.0 {
            return false;
        }
        for i in 0..k {
            if (b[i * k + j] / norm[j] - reference[i]).abs() > tol {
                return false;
            }
        }
    }
    true
}
