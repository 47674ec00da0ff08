use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::boundary::max_norm;
use crate::error::{Error, Result};
use crate::stencil::SparseRow;

fn fail(reason: impl Into<String>) -> Error {
    Error::LinearSolve { iteration: 0, reason: reason.into() }
}

/// Solve `A x = rhs` by sparse LU, where row `k` of `A` is `rows[k]`.
///
/// Rows may contain repeated columns; they are summed.
pub fn linear_solve(rows: &[SparseRow], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    if rhs.len() != n {
        return Err(fail(format!("matrix has {n} rows but right-hand side has {}", rhs.len())));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut triplets = Vec::with_capacity(rows.iter().map(|r| r.entries.len()).sum());
    for (k, row) in rows.iter().enumerate() {
        let row = row.clone().compact();
        if row.entries.is_empty() {
            return Err(fail(format!("row {k} is structurally zero")));
        }
        for (c, v) in row.entries {
            if c >= n {
                return Err(fail(format!("row {k} references column {c} of {n}")));
            }
            if !v.is_finite() {
                return Err(fail(format!("non-finite coefficient in row {k}")));
            }
            triplets.push(Triplet::new(k, c, v));
        }
    }
    if rhs.iter().any(|v| !v.is_finite()) {
        return Err(fail("non-finite right-hand side"));
    }
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| fail(format!("{e:?}")))?;
    let lu = a.sp_lu().map_err(|e| fail(format!("factorization failed: {e:?}")))?;
    let b = Mat::<f64>::from_fn(n, 1, |i, _| rhs[i]);
    let x = lu.solve(&b);
    let x: Vec<f64> = (0..n).map(|i| x[(i, 0)]).collect();
    if x.iter().any(|v| !v.is_finite()) {
        return Err(fail("matrix is numerically singular"));
    }
    let scale = max_norm(rhs).max(f64::MIN_POSITIVE);
    let res = rows.iter().zip(rhs).map(|(r, b)| (r.dot(&x) - b).abs()).fold(0.0, f64::max);
    if res > 1e-6 * scale {
        return Err(fail(format!("solve residual {res:e} relative to {scale:e}; matrix is close to singular")));
    }
    Ok(x)
}
