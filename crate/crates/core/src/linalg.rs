//! Small dense helpers. Matrices are row-major `Vec<Vec<f64>>`; every
//! system solved here is at most a few dozen rows.

pub(crate) type Matrix = Vec<Vec<f64>>;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub(crate) fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// LU elimination with partial pivoting. Returns the determinant and, when
/// `rhs` is given, overwrites it with the solution. `None` on a singular pivot.
fn eliminate(mut a: Matrix, mut rhs: Option<&mut Vec<f64>>) -> Option<f64> {
    let n = a.len();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        if pivot != col {
            a.swap(pivot, col);
            if let Some(b) = rhs.as_deref_mut() {
                b.swap(pivot, col);
            }
            det = -det;
        }
        let p = a[col][col];
        det *= p;
        for row in col + 1..n {
            let factor = a[row][col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                a[row][c] -= factor * a[col][c];
            }
            if let Some(b) = rhs.as_deref_mut() {
                b[row] -= factor * b[col];
            }
        }
    }
    if let Some(b) = rhs {
        for row in (0..n).rev() {
            let tail: f64 = (row + 1..n).map(|c| a[row][c] * b[c]).sum();
            b[row] = (b[row] - tail) / a[row][row];
        }
    }
    Some(det)
}

pub(crate) fn determinant(a: &Matrix) -> f64 {
    eliminate(a.clone(), None).unwrap_or(0.0)
}

pub(crate) fn solve(a: &Matrix, b: &[f64]) -> Option<Vec<f64>> {
    let mut x = b.to_vec();
    eliminate(a.clone(), Some(&mut x))?;
    Some(x)
}

/// Lower-triangular `L` with `L Lᵀ = a` for a symmetric positive
/// semidefinite `a`. Zero pivots (within `tol` of the diagonal scale) give
/// zero columns; a negative pivot beyond `tol` means `a` is not PSD.
pub(crate) fn psd_factor(a: &Matrix, tol: f64) -> Result<Matrix, String> {
    let n = a.len();
    if a.iter().any(|row| row.len() != n) {
        return Err("covariance is not square".into());
    }
    for i in 0..n {
        for j in 0..i {
            let scale = a[i][j].abs().max(a[j][i].abs()).max(1.0);
            if (a[i][j] - a[j][i]).abs() > 1e-9 * scale {
                return Err(format!("covariance is not symmetric at ({i}, {j})"));
            }
        }
    }
    let scale = (0..n).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let pivot = a[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if pivot < -tol * scale {
            return Err(format!("covariance is not positive semidefinite (pivot {pivot:e})"));
        }
        if pivot <= tol * scale {
            // Remaining entries in this column must vanish for a PSD matrix.
            for i in j + 1..n {
                let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > 1e-7 * scale {
                    return Err("covariance is not positive semidefinite".into());
                }
            }
            continue;
        }
        let d = pivot.sqrt();
        l[j][j] = d;
        for i in j + 1..n {
            let r = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / d;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn determinant_and_solve() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        assert!((determinant(&a) - 5.0).abs() < 1e-12);
        let x = solve(&a, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(&vec![vec![1.0, 2.0], vec![2.0, 4.0]], &[1.0, 1.0]).is_none());
    }

    #[test]
    fn psd_factor_reconstructs() {
        let a = vec![vec![4.0, 2.0, 0.0], vec![2.0, 2.0, 0.0], vec![0.0, 0.0, 0.0]];
        let l = psd_factor(&a, 1e-12).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - a[i][j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_factor_rejects_indefinite() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0]];
        assert!(psd_factor(&a, 1e-12).is_err());
        assert!(psd_factor(&vec![vec![-1.0]], 1e-12).is_err());
    }
}
