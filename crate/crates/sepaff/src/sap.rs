//! Separable-affine problem model: minimize a sum of univariate
//! piecewise-quadratic functions subject to `A x = b`.

use crate::pwq::{PiecewiseQuadratic, PwqError, QuadPiece};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SapError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("component {0} has an empty domain")]
    EmptyDomain(usize),
    #[error("component {0} is unbounded below")]
    Unbounded(usize),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(&'static str),
    #[error(transparent)]
    Pwq(#[from] PwqError),
}

/// Sparse matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub i: usize,
    pub j: usize,
    pub v: f64,
}

/// Constraint matrix storage: dense row-major or sorted triplets.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixData {
    Dense { nrows: usize, ncols: usize, values: Vec<f64> },
    Sparse { nrows: usize, ncols: usize, triplets: Vec<Triplet> },
}

impl MatrixData {
    pub fn dense(nrows: usize, ncols: usize, values: Vec<f64>) -> Result<Self, SapError> {
        if values.len() != nrows * ncols {
            return Err(SapError::InvalidMatrix("dense value count must be nrows * ncols"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(SapError::InvalidMatrix("matrix entries must be finite"));
        }
        Ok(MatrixData::Dense { nrows, ncols, values })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, SapError> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(SapError::InvalidMatrix("ragged rows"));
        }
        Self::dense(nrows, ncols, rows.into_iter().flatten().collect())
    }

    /// Triplets must be sorted row-major with no duplicates.
    pub fn sparse(nrows: usize, ncols: usize, triplets: Vec<Triplet>) -> Result<Self, SapError> {
        for t in &triplets {
            if t.i >= nrows || t.j >= ncols {
                return Err(SapError::InvalidMatrix("triplet index out of bounds"));
            }
            if !t.v.is_finite() {
                return Err(SapError::InvalidMatrix("matrix entries must be finite"));
            }
        }
        if triplets.windows(2).any(|w| (w[1].i, w[1].j) <= (w[0].i, w[0].j)) {
            return Err(SapError::InvalidMatrix("triplets must be sorted row-major and unique"));
        }
        Ok(MatrixData::Sparse { nrows, ncols, triplets })
    }

    pub fn nrows(&self) -> usize {
        match self {
            MatrixData::Dense { nrows, .. } | MatrixData::Sparse { nrows, .. } => *nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            MatrixData::Dense { ncols, .. } | MatrixData::Sparse { ncols, .. } => *ncols,
        }
    }

    /// Row-major dense copy.
    pub fn to_dense_vec(&self) -> Vec<f64> {
        match self {
            MatrixData::Dense { values, .. } => values.clone(),
            MatrixData::Sparse { nrows, ncols, triplets } => {
                let mut out = vec![0.0; nrows * ncols];
                for t in triplets {
                    out[t.i * ncols + t.j] = t.v;
                }
                out
            }
        }
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.ncols());
        match self {
            MatrixData::Dense { nrows, ncols, values } => {
                let mut y = vec![0.0; *nrows];
                for (i, yi) in y.iter_mut().enumerate() {
                    let row = &values[i * ncols..(i + 1) * ncols];
                    let mut acc = 0.0;
                    for (aij, xj) in row.iter().zip(x) {
                        acc += aij * xj;
                    }
                    *yi = acc;
                }
                y
            }
            MatrixData::Sparse { nrows, triplets, .. } => {
                let mut y = vec![0.0; *nrows];
                for t in triplets {
                    y[t.i] += t.v * x[t.j];
                }
                y
            }
        }
    }

    /// Rescale as `D A E` with diagonal `d`, `e`.
    fn scaled(&self, d: &[f64], e: &[f64]) -> MatrixData {
        match self {
            MatrixData::Dense { nrows, ncols, values } => {
                let mut out = values.clone();
                for i in 0..*nrows {
                    for j in 0..*ncols {
                        out[i * ncols + j] *= d[i] * e[j];
                    }
                }
                MatrixData::Dense { nrows: *nrows, ncols: *ncols, values: out }
            }
            MatrixData::Sparse { nrows, ncols, triplets } => MatrixData::Sparse {
                nrows: *nrows,
                ncols: *ncols,
                triplets: triplets
                    .iter()
                    .map(|t| Triplet { i: t.i, j: t.j, v: t.v * d[t.i] * e[t.j] })
                    .collect(),
            },
        }
    }
}

/// Positive diagonal scaling of constraints (`d`, length m) and variables
/// (`e`, length n). The scaled problem has data `D A E`, `D b`,
/// `f_i(e_i x)`; a scaled solution unscales as `x = e .* x_scaled`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    d: Vec<f64>,
    e: Vec<f64>,
}

impl Scaling {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Result<Self, SapError> {
        if d.iter().chain(e.iter()).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(SapError::DimensionMismatch(
                "scaling entries must be positive and finite".into(),
            ));
        }
        Ok(Scaling { d, e })
    }

    pub fn identity(m: usize, n: usize) -> Self {
        Scaling { d: vec![1.0; m], e: vec![1.0; n] }
    }

    pub fn d(&self) -> &[f64] {
        &self.d
    }

    pub fn e(&self) -> &[f64] {
        &self.e
    }

    /// Maps a scaled-space point back to original coordinates.
    pub fn unscale_solution(&self, x_scaled: &[f64]) -> Vec<f64> {
        x_scaled.iter().zip(&self.e).map(|(x, e)| x * e).collect()
    }

    /// Maps an original-space point into scaled coordinates.
    pub fn scale_solution(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.e).map(|(x, e)| x / e).collect()
    }
}

/// The separable-affine problem `minimize sum f_i(x_i) s.t. A x = b`.
#[derive(Debug, Clone)]
pub struct SapProblem {
    a: MatrixData,
    b: Vec<f64>,
    f: Vec<PiecewiseQuadratic>,
}

impl SapProblem {
    pub fn new(a: MatrixData, b: Vec<f64>, f: Vec<PiecewiseQuadratic>) -> Result<Self, SapError> {
        if a.ncols() != f.len() {
            return Err(SapError::DimensionMismatch(format!(
                "matrix has {} columns but {} objective components",
                a.ncols(),
                f.len()
            )));
        }
        if a.nrows() != b.len() {
            return Err(SapError::DimensionMismatch(format!(
                "matrix has {} rows but rhs has {} entries",
                a.nrows(),
                b.len()
            )));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(SapError::DimensionMismatch("rhs entries must be finite".into()));
        }
        Ok(SapProblem { a, b, f })
    }

    /// Builds a problem from raw piece lists; an empty list for component
    /// `i` reports `EmptyDomain(i)`.
    pub fn from_piece_lists(
        a: MatrixData,
        b: Vec<f64>,
        piece_lists: Vec<Vec<QuadPiece>>,
    ) -> Result<Self, SapError> {
        let mut f = Vec::with_capacity(piece_lists.len());
        for (i, pieces) in piece_lists.into_iter().enumerate() {
            if pieces.is_empty() {
                return Err(SapError::EmptyDomain(i));
            }
            f.push(PiecewiseQuadratic::new(pieces).map_err(|e| match e {
                PwqError::EmptyPieces => SapError::EmptyDomain(i),
                other => SapError::Pwq(other),
            })?);
        }
        Self::new(a, b, f)
    }

    pub fn a(&self) -> &MatrixData {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn f(&self) -> &[PiecewiseQuadratic] {
        &self.f
    }

    pub fn num_vars(&self) -> usize {
        self.f.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.b.len()
    }

    /// `sum_i f_i(x_i)`; `+inf` if any component is outside its domain.
    pub fn objective(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.num_vars());
        let mut total = 0.0;
        for (fi, xi) in self.f.iter().zip(x) {
            let v = fi.eval(*xi);
            if v == f64::INFINITY {
                return f64::INFINITY;
            }
            total += v;
        }
        total
    }

    /// Equality-constraint residual `A x - b`.
    pub fn residual(&self, x: &[f64]) -> Vec<f64> {
        let mut r = self.a.matvec(x);
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        r
    }

    pub fn residual_norm(&self, x: &[f64]) -> f64 {
        self.residual(x).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Equivalent problem with data `D A E`, `D b`, `f_i(e_i x)`.
    pub fn scale(&self, s: &Scaling) -> Result<SapProblem, SapError> {
        if s.d.len() != self.num_constraints() || s.e.len() != self.num_vars() {
            return Err(SapError::DimensionMismatch(format!(
                "scaling sized {}x{} applied to problem sized {}x{}",
                s.d.len(),
                s.e.len(),
                self.num_constraints(),
                self.num_vars()
            )));
        }
        let a = self.a.scaled(&s.d, &s.e);
        let b = self.b.iter().zip(&s.d).map(|(b, d)| b * d).collect();
        let f = self
            .f
            .iter()
            .zip(&s.e)
            .map(|(fi, e)| fi.shift_scale_arg(*e, 0.0))
            .collect::<Result<Vec<_>, _>>()?;
        SapProblem::new(a, b, f)
    }

    /// Convex relaxation: every component replaced by its convex envelope.
    /// Its optimal value is a lower bound on this problem's optimal value.
    pub fn relax(&self) -> Result<SapProblem, SapError> {
        let f = self
            .f
            .iter()
            .enumerate()
            .map(|(i, fi)| fi.envelope().map_err(|_| SapError::Unbounded(i)))
            .collect::<Result<Vec<_>, _>>()?;
        SapProblem::new(self.a.clone(), self.b.clone(), f)
    }
}

/// LP in SAP form: `f_i = c_i x_i` on `[0, inf)`.
pub fn lp_adapter(c: &[f64], a: MatrixData, b: Vec<f64>) -> Result<SapProblem, SapError> {
    let f = c
        .iter()
        .map(|ci| {
            PiecewiseQuadratic::new(vec![QuadPiece::new(0.0, *ci, 0.0, 0.0, f64::INFINITY)?])
        })
        .collect::<Result<Vec<_>, _>>()?;
    SapProblem::new(a, b, f)
}

/// Indefinite QP `min x'Px + q'x s.t. Ax = b, x >= 0` lifted to SAP form
/// over `(x, z)` with `z = F' x` from an eigendecomposition `P = F D F'`.
///
/// Negative eigenvalue directions need a compact `z` range to keep every
/// component bounded below, so finite upper bounds on `x` must be supplied
/// when `P` is not positive semidefinite; `z` ranges then come from interval
/// arithmetic over `0 <= x <= x_upper`.
pub fn iqp_adapter(
    p_mat: &[Vec<f64>],
    q: &[f64],
    a: MatrixData,
    b: Vec<f64>,
    x_upper: Option<&[f64]>,
) -> Result<SapProblem, SapError> {
    let n = q.len();
    if p_mat.len() != n || p_mat.iter().any(|row| row.len() != n) {
        return Err(SapError::DimensionMismatch("P must be n x n".into()));
    }
    if a.ncols() != n {
        return Err(SapError::DimensionMismatch("A column count must match q".into()));
    }
    for i in 0..n {
        for j in 0..i {
            if (p_mat[i][j] - p_mat[j][i]).abs() > 1e-12 * (1.0 + p_mat[i][j].abs()) {
                return Err(SapError::DimensionMismatch("P must be symmetric".into()));
            }
        }
    }
    if let Some(ub) = x_upper {
        if ub.len() != n {
            return Err(SapError::DimensionMismatch("x_upper length must match q".into()));
        }
    }

    let flat: Vec<f64> = p_mat.iter().flatten().copied().collect();
    let sym = nalgebra::DMatrix::from_row_slice(n, n, &flat);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let max_abs = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kept: Vec<usize> = (0..n)
        .filter(|&i| eig.eigenvalues[i].abs() > 1e-10 * max_abs && max_abs > 0.0)
        .collect();
    let r = kept.len();

    let m = a.nrows();
    // Lifted constraints: [[A, 0], [F', -I]].
    let ncols = n + r;
    let nrows = m + r;
    let a_dense = a.to_dense_vec();
    let mut values = vec![0.0; nrows * ncols];
    for i in 0..m {
        values[i * ncols..i * ncols + n].copy_from_slice(&a_dense[i * n..(i + 1) * n]);
    }
    for (zi, &col) in kept.iter().enumerate() {
        let row = m + zi;
        for j in 0..n {
            values[row * ncols + j] = eig.eigenvectors[(j, col)];
        }
        values[row * ncols + n + zi] = -1.0;
    }
    let lifted_a = MatrixData::dense(nrows, ncols, values)?;
    let mut lifted_b = b;
    lifted_b.extend(std::iter::repeat(0.0).take(r));

    let mut f = Vec::with_capacity(ncols);
    for (j, qj) in q.iter().enumerate() {
        let hi = x_upper.map_or(f64::INFINITY, |ub| ub[j]);
        f.push(PiecewiseQuadratic::new(vec![QuadPiece::new(0.0, *qj, 0.0, 0.0, hi)?])?);
    }
    for (zi, &col) in kept.iter().enumerate() {
        let lambda = eig.eigenvalues[col];
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        if let Some(ub) = x_upper {
            for j in 0..n {
                let w = eig.eigenvectors[(j, col)] * ub[j];
                lo += w.min(0.0);
                hi += w.max(0.0);
            }
        } else {
            lo = f64::NEG_INFINITY;
            hi = f64::INFINITY;
        }
        if lambda < 0.0 && !(lo.is_finite() && hi.is_finite()) {
            return Err(SapError::Unbounded(n + zi));
        }
        f.push(PiecewiseQuadratic::new(vec![QuadPiece::new(lambda, 0.0, 0.0, lo, hi)?])?);
    }
    SapProblem::new(lifted_a, lifted_b, f)
}

/// Diagonal equilibration of `A` by alternating row and column max-norm
/// rescaling; reduces the condition number seen by the solver.
pub fn equilibrate(a: &MatrixData) -> Scaling {
    let (m, n) = (a.nrows(), a.ncols());
    let dense = a.to_dense_vec();
    let mut d = vec![1.0; m];
    let mut e = vec![1.0; n];
    for _ in 0..3 {
        for i in 0..m {
            let mut row_max = 0.0f64;
            for j in 0..n {
                row_max = row_max.max((dense[i * n + j] * d[i] * e[j]).abs());
            }
            if row_max > 0.0 {
                d[i] /= row_max.sqrt();
            }
        }
        for j in 0..n {
            let mut col_max = 0.0f64;
            for i in 0..m {
                col_max = col_max.max((dense[i * n + j] * d[i] * e[j]).abs());
            }
            if col_max > 0.0 {
                e[j] /= col_max.sqrt();
            }
        }
    }
    Scaling { d, e }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_quad() -> PiecewiseQuadratic {
        PiecewiseQuadratic::quadratic(1.0, 0.0, 0.0).unwrap()
    }

    fn card(cost: f64, lo: f64, hi: f64) -> PiecewiseQuadratic {
        PiecewiseQuadratic::new(vec![
            QuadPiece::new(0.0, 0.0, cost, lo, 0.0).unwrap(),
            QuadPiece::new(0.0, 0.0, 0.0, 0.0, 0.0).unwrap(),
            QuadPiece::new(0.0, 0.0, cost, 0.0, hi).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn new_problem_validates_dimensions() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = SapProblem::new(a, vec![1.0], vec![unit_quad(), unit_quad()]).unwrap();
        assert_eq!(p.num_vars(), 2);
        assert_eq!(p.num_constraints(), 1);

        let a3 = MatrixData::from_rows(vec![vec![1.0, 1.0, 1.0]]).unwrap();
        assert!(matches!(
            SapProblem::new(a3, vec![1.0], vec![unit_quad(), unit_quad()]),
            Err(SapError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn empty_component_reports_index() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let err = SapProblem::from_piece_lists(
            a,
            vec![1.0],
            vec![vec![QuadPiece::new(1.0, 0.0, 0.0, 0.0, 1.0).unwrap()], vec![]],
        )
        .unwrap_err();
        assert!(matches!(err, SapError::EmptyDomain(1)));
    }

    #[test]
    fn objective_and_residual() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = SapProblem::new(a, vec![1.0], vec![unit_quad(), unit_quad()]).unwrap();
        assert_eq!(p.objective(&[0.0, 0.0]), 0.0);
        assert_eq!(p.residual_norm(&[0.0, 0.0]), 1.0);
        assert_eq!(p.residual_norm(&[0.25, 0.75]), 0.0);

        let bounded = PiecewiseQuadratic::indicator(0.0, 1.0).unwrap();
        let p2 = SapProblem::new(
            MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
            vec![1.0],
            vec![unit_quad(), bounded],
        )
        .unwrap();
        assert_eq!(p2.objective(&[0.0, 2.0]), f64::INFINITY);
    }

    #[test]
    fn residual_matches_direct_matvec_on_sparse() {
        let a = MatrixData::sparse(
            2,
            3,
            vec![
                Triplet { i: 0, j: 0, v: 2.0 },
                Triplet { i: 0, j: 2, v: -1.0 },
                Triplet { i: 1, j: 1, v: 3.0 },
            ],
        )
        .unwrap();
        let p = SapProblem::new(a, vec![1.0, 2.0], vec![unit_quad(), unit_quad(), unit_quad()])
            .unwrap();
        let x = [0.3, -0.4, 1.7];
        let r = p.residual(&x);
        assert!((r[0] - (2.0 * 0.3 - 1.7 - 1.0)).abs() < 1e-12);
        assert!((r[1] - (3.0 * -0.4 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_scaling_is_a_no_op() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = SapProblem::new(a, vec![1.0], vec![unit_quad(), unit_quad()]).unwrap();
        let s = Scaling::identity(1, 2);
        let scaled = p.scale(&s).unwrap();
        assert_eq!(scaled.a(), p.a());
        assert_eq!(scaled.b(), p.b());
        assert_eq!(scaled.f(), p.f());
    }

    #[test]
    fn variable_scaling_substitutes_into_components() {
        let f = PiecewiseQuadratic::new(vec![QuadPiece::new(1.0, 0.0, 0.0, 0.0, 2.0).unwrap()])
            .unwrap();
        let a = MatrixData::from_rows(vec![vec![1.0]]).unwrap();
        let p = SapProblem::new(a, vec![1.0], vec![f]).unwrap();
        let s = Scaling::new(vec![1.0], vec![2.0]).unwrap();
        let scaled = p.scale(&s).unwrap();
        assert_eq!(
            scaled.f()[0].pieces(),
            &[QuadPiece::new(4.0, 0.0, 0.0, 0.0, 1.0).unwrap()]
        );
        // Unscaling a scaled-space point recovers original coordinates.
        assert_eq!(s.unscale_solution(&[0.5]), vec![1.0]);
    }

    #[test]
    fn relaxation_lower_bounds_the_objective() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = SapProblem::new(a, vec![0.5], vec![card(0.4, -1.0, 1.0), unit_quad()]).unwrap();
        let relaxed = p.relax().unwrap();
        for i in 0..=20 {
            let x0 = -1.0 + 0.1 * i as f64;
            let x = [x0, 0.5 - x0];
            assert!(relaxed.objective(&x) <= p.objective(&x) + 1e-9);
        }
        // Convex problems are unchanged.
        let convex = SapProblem::new(
            MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap(),
            vec![0.5],
            vec![unit_quad(), unit_quad()],
        )
        .unwrap();
        let r = convex.relax().unwrap();
        assert_eq!(r.f(), convex.f());
    }

    #[test]
    fn lp_adapter_builds_nonnegative_linear_components() {
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let p = lp_adapter(&[1.0, 1.0], a, vec![1.0]).unwrap();
        assert_eq!(p.objective(&[0.25, 0.75]), 1.0);
        assert_eq!(p.objective(&[-0.1, 1.1]), f64::INFINITY);
    }

    #[test]
    fn iqp_adapter_identity_recovers_sum_of_squares() {
        let p_mat = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let sap = iqp_adapter(&p_mat, &[0.0, 0.0], a, vec![1.0], None).unwrap();
        assert_eq!(sap.num_vars(), 4);
        assert_eq!(sap.num_constraints(), 3);
        // x = (0.3, 0.7): z = F'x, objective must equal x'Px = 0.58.
        let x = [0.3, 0.7];
        let mut full = x.to_vec();
        let dense = sap.a().to_dense_vec();
        let ncols = sap.a().ncols();
        for zi in 0..2 {
            let row = 1 + zi;
            let z: f64 = (0..2).map(|j| dense[row * ncols + j] * x[j]).sum();
            full.push(z);
        }
        assert!((sap.objective(&full) - 0.58).abs() < 1e-10);
    }

    #[test]
    fn iqp_adapter_indefinite_needs_bounds() {
        let p_mat = vec![vec![1.0, 0.0], vec![0.0, -1.0]];
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        assert!(matches!(
            iqp_adapter(&p_mat, &[0.0, 0.0], a.clone(), vec![1.0], None),
            Err(SapError::Unbounded(_))
        ));
        let sap = iqp_adapter(&p_mat, &[0.0, 0.0], a, vec![1.0], Some(&[1.0, 1.0])).unwrap();
        let coeffs: Vec<f64> = sap.f()[2..].iter().map(|f| f.pieces()[0].p).collect();
        let mut sorted = coeffs.clone();
        sorted.sort_by(f64::total_cmp);
        assert!((sorted[0] + 1.0).abs() < 1e-9 && (sorted[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn iqp_adapter_rank_zero_reduces_to_lp() {
        let p_mat = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0]]).unwrap();
        let sap = iqp_adapter(&p_mat, &[1.0, 2.0], a.clone(), vec![1.0], None).unwrap();
        let lp = lp_adapter(&[1.0, 2.0], a, vec![1.0]).unwrap();
        assert_eq!(sap.num_vars(), lp.num_vars());
        assert_eq!(sap.f(), lp.f());
    }

    #[test]
    fn iqp_lifted_objective_matches_quadratic_form() {
        let p_mat = vec![vec![2.0, 0.5, 0.0], vec![0.5, -1.0, 0.3], vec![0.0, 0.3, 0.7]];
        let q = [0.2, -0.4, 0.9];
        let a = MatrixData::from_rows(vec![vec![1.0, 1.0, 1.0]]).unwrap();
        let ub = [2.0, 2.0, 2.0];
        let sap = iqp_adapter(&p_mat, &q, a, vec![1.0], Some(&ub)).unwrap();
        let dense = sap.a().to_dense_vec();
        let ncols = sap.a().ncols();
        let r = sap.num_vars() - 3;
        for trial in 0..10 {
            let x: Vec<f64> = (0..3).map(|j| 0.1 + 0.17 * ((trial * 3 + j) % 11) as f64).collect();
            let mut full = x.clone();
            for zi in 0..r {
                let row = 1 + zi;
                let z: f64 = (0..3).map(|j| dense[row * ncols + j] * x[j]).sum();
                full.push(z);
            }
            let direct: f64 = (0..3)
                .map(|i| (0..3).map(|j| x[i] * p_mat[i][j] * x[j]).sum::<f64>())
                .sum::<f64>()
                + q.iter().zip(&x).map(|(qi, xi)| qi * xi).sum::<f64>();
            let lifted = sap.objective(&full);
            assert!(
                (lifted - direct).abs() <= 1e-8 * (1.0 + direct.abs()),
                "trial {trial}: {lifted} vs {direct}"
            );
        }
    }

    #[test]
    fn scale_unscale_round_trip_preserves_feasibility() {
        let a = MatrixData::from_rows(vec![vec![1.0, 2.0], vec![0.5, -1.0]]).unwrap();
        let p = SapProblem::new(a, vec![1.0, 0.2], vec![unit_quad(), unit_quad()]).unwrap();
        let s = Scaling::new(vec![3.0, 0.5], vec![2.0, 4.0]).unwrap();
        let scaled = p.scale(&s).unwrap();
        // A feasible scaled point unscales to a feasible original point with
        // identical objective.
        let x = [0.7, 0.15]; // A x = b for the original problem
        let x_scaled = s.scale_solution(&x);
        assert!(scaled.residual_norm(&x_scaled) < 1e-9);
        let back = s.unscale_solution(&x_scaled);
        assert!(p.residual_norm(&back) < 1e-9);
        assert!((p.objective(&back) - scaled.objective(&x_scaled)).abs() < 1e-9);
    }

    #[test]
    fn equilibrate_balances_row_and_column_norms() {
        let a = MatrixData::from_rows(vec![vec![1000.0, 0.001], vec![0.01, 1.0]]).unwrap();
        let s = equilibrate(&a);
        let scaled = a.scaled(&s.d, &s.e);
        let dense = scaled.to_dense_vec();
        let max = dense.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let min_rowmax = (0..2)
            .map(|i| (0..2).map(|j| dense[i * 2 + j].abs()).fold(0.0f64, f64::max))
            .fold(f64::INFINITY, f64::min);
        assert!(max / min_rowmax < 50.0, "rows stay comparable: {dense:?}");
    }
}
