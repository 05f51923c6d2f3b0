//! Dense inversion for basis refactorization.

/// Smallest pivot magnitude accepted while inverting a basis whose columns
/// have been equilibrated to unit max-norm.
pub(crate) const PIVOT_FLOOR: f64 = 1e-11;

/// Inverts the `m × m` row-major matrix `a` by Gauss–Jordan elimination with
/// partial pivoting. Returns the column whose pivot fell below
/// [`PIVOT_FLOOR`] on failure.
pub(crate) fn invert(m: usize, a: &[f64]) -> Result<Vec<f64>, usize> {
    let mut work = a.to_vec();
    let mut inv = vec![0.0; m * m];
    for i in 0..m {
        inv[i * m + i] = 1.0;
    }
    for col in 0..m {
        let (pivot_row, pivot_abs) = (col..m)
            .map(|r| (r, work[r * m + col].abs()))
            .fold((col, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if pivot_abs < PIVOT_FLOOR {
            return Err(col);
        }
        if pivot_row != col {
            for k in 0..m {
                work.swap(col * m + k, pivot_row * m + k);
                inv.swap(col * m + k, pivot_row * m + k);
            }
        }
        let p = work[col * m + col];
        for k in 0..m {
            work[col * m + k] /= p;
            inv[col * m + k] /= p;
        }
        for r in 0..m {
            if r == col {
                continue;
            }
            let factor = work[r * m + col];
            if factor == 0.0 {
                continue;
            }
            for k in 0..m {
                work[r * m + k] -= factor * work[col * m + k];
                inv[r * m + k] -= factor * inv[col * m + k];
            }
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverts_a_permuted_matrix() {
        let a = [0.0, 2.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 3.0];
        let inv = invert(3, &a).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let v: f64 = (0..3).map(|k| a[i * 3 + k] * inv[k * 3 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn reports_singular_column() {
        let a = [1.0, 2.0, 2.0, 4.0];
        assert_eq!(invert(2, &a), Err(1));
    }
}
