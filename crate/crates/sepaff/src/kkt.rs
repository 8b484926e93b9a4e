//! Factor once, solve many: the equality-constrained least-squares
//! projection used in every consensus update.
//!
//! The system is
//!
//! ```text
//! [ I   A' ] [ z  ]   [ v ]
//! [ A   0  ] [ nu ] = [ b ]
//! ```
//!
//! factored as LDL' with static quasi-definite regularization `+eps` / `-eps`
//! on the diagonal blocks, which makes the factorization exist for any `A`
//! and degrade gracefully under rank deficiency. The identity block makes
//! the first `n` rows of `L` trivial, so only the `m` constraint rows are
//! stored and the factorization costs `O(m n^2 + m^2 n + m^3)`, not
//! `O((n+m)^3)`. Solutions are polished by iterative refinement against the
//! unregularized system.

use crate::sap::MatrixData;

/// Default static regularization magnitude.
pub const DEFAULT_REGULARIZATION: f64 = 1e-9;

const REFINE_REL_TOL: f64 = 1e-10;
const MAX_REFINE_PASSES: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum KktError {
    #[error("KKT matrix is singular (rank-deficient constraints without regularization)")]
    SingularKkt,
}

/// Cached factorization of the projection system for one constraint matrix.
#[derive(Debug, Clone)]
pub struct KktFactor {
    n: usize,
    m: usize,
    /// Dense row-major copy of `A`, used for refinement matvecs.
    a: Vec<f64>,
    /// Rows `n..n+m` of the unit lower factor, each of length `n + m`.
    l_rows: Vec<f64>,
    /// Pivots of the constraint rows (the variable-block pivots are all
    /// `1 + eps`).
    diag: Vec<f64>,
    regularization: f64,
}

/// Factors the projection system with the default regularization.
pub fn factor(a: &MatrixData) -> Result<KktFactor, KktError> {
    factor_with_regularization(a, DEFAULT_REGULARIZATION)
}

/// Factors with an explicit regularization magnitude; `0.0` disables it, in
/// which case rank-deficient constraints fail with [`KktError::SingularKkt`].
pub fn factor_with_regularization(a: &MatrixData, eps: f64) -> Result<KktFactor, KktError> {
    let n = a.ncols();
    let m = a.nrows();
    let nn = n + m;
    let a_dense = a.to_dense_vec();
    let var_pivot = 1.0 + eps;

    let mut l_rows = vec![0.0; m * nn];
    // Scratch: the same rows scaled by the pivots, used only while
    // factoring.
    let mut w_rows = vec![0.0; m * nn];
    let mut diag = vec![0.0; m];

    for i in 0..m {
        // Variable-block columns: the dot against earlier rows vanishes
        // because those rows of L are zero there.
        for j in 0..n {
            let acc = a_dense[i * n + j];
            l_rows[i * nn + j] = acc / var_pivot;
            w_rows[i * nn + j] = acc;
        }
        // Constraint-block columns against earlier constraint rows.
        for prev in 0..i {
            let j = n + prev;
            let (li, wp) = (&l_rows[i * nn..i * nn + j], &w_rows[prev * nn..prev * nn + j]);
            let mut acc = 0.0;
            for (a, b) in li.iter().zip(wp) {
                acc += a * b;
            }
            acc = -acc;
            l_rows[i * nn + j] = acc / diag[prev];
            w_rows[i * nn + j] = acc;
        }
        // Pivot for this constraint row.
        let row_l = &l_rows[i * nn..i * nn + n + i];
        let row_w = &w_rows[i * nn..i * nn + n + i];
        let mut acc = 0.0;
        let mut scale = eps;
        for (a, b) in row_l.iter().zip(row_w) {
            acc += a * b;
            scale += (a * b).abs();
        }
        let pivot = -eps - acc;
        if pivot.abs() <= 1e-13 * (1.0 + scale) {
            return Err(KktError::SingularKkt);
        }
        diag[i] = pivot;
    }
    drop(w_rows);

    Ok(KktFactor { n, m, a: a_dense, l_rows, diag, regularization: eps })
}

impl KktFactor {
    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_constraints(&self) -> usize {
        self.m
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    /// Solves the regularized system in place; `rhs` has length `n + m`.
    fn solve_raw(&self, rhs: &mut [f64]) {
        let (n, m, nn) = (self.n, self.m, self.n + self.m);
        // Forward: the first n rows of L are trivial.
        for i in 0..m {
            let row = &self.l_rows[i * nn..i * nn + n + i];
            let mut acc = 0.0;
            for (l, r) in row.iter().zip(rhs.iter()) {
                acc += l * r;
            }
            rhs[n + i] -= acc;
        }
        let var_pivot = 1.0 + self.regularization;
        for r in rhs[..n].iter_mut() {
            *r /= var_pivot;
        }
        for i in 0..m {
            rhs[n + i] /= self.diag[i];
        }
        // Backward: saxpy with each stored row, right to left.
        for i in (0..m).rev() {
            let xj = rhs[n + i];
            if xj != 0.0 {
                let row = &self.l_rows[i * nn..i * nn + n + i];
                for (r, l) in rhs.iter_mut().zip(row.iter()) {
                    *r -= l * xj;
                }
            }
        }
    }

    /// Residual of the unregularized system: `rhs - K0 * sol`.
    fn residual(&self, sol: &[f64], v: &[f64], b: &[f64], out: &mut [f64]) {
        let (n, m) = (self.n, self.m);
        let (z, nu) = sol.split_at(n);
        for j in 0..n {
            out[j] = v[j] - z[j];
        }
        for i in 0..m {
            let row = &self.a[i * n..(i + 1) * n];
            let mut az = 0.0;
            for (a, zj) in row.iter().zip(z) {
                az += a * zj;
            }
            out[n + i] = b[i] - az;
            let nui = nu[i];
            if nui != 0.0 {
                for (o, a) in out[..n].iter_mut().zip(row.iter()) {
                    *o -= a * nui;
                }
            }
        }
    }

    /// Nearest point to `v` on `{z : A z = b}`, with iterative refinement
    /// against the unregularized system when the residual is large.
    pub fn project_affine(&self, v: &[f64], b: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.n, "v length must match variable count");
        assert_eq!(b.len(), self.m, "b length must match constraint count");
        let nn = self.n + self.m;
        let mut sol = Vec::with_capacity(nn);
        sol.extend_from_slice(v);
        sol.extend_from_slice(b);
        self.solve_raw(&mut sol);

        let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let tol = REFINE_REL_TOL * (1.0 + norm(v) + norm(b));
        let mut resid = vec![0.0; nn];
        for _ in 0..MAX_REFINE_PASSES {
            self.residual(&sol, v, b, &mut resid);
            if norm(&resid) <= tol {
                break;
            }
            let mut delta = resid.clone();
            self.solve_raw(&mut delta);
            for (s, d) in sol.iter_mut().zip(&delta) {
                *s += d;
            }
        }
        sol.truncate(self.n);
        sol
    }
}
