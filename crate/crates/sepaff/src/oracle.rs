//! Exact small-instance solvers used as ground truth: exhaustive search over
//! the feasible subspace, a gridded value-function recursion for few
//! constraint rows, and grid/hull oracles for the univariate operations.

use crate::pwq::PiecewiseQuadratic;
use crate::sap::SapProblem;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("too many degrees of freedom for exhaustive search: {0}")]
    TooManyDegreesOfFreedom(usize),
    #[error("too many constraint rows for value-function search: {0}")]
    TooManyConstraintRows(usize),
    #[error("grid budget exceeded")]
    BudgetExceeded,
    #[error("constraint system is inconsistent or has no gridded solution")]
    Infeasible,
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
}

/// Grid controls for the oracles. `bounds` apply to the free coordinates of
/// [`exhaustive`]; when absent they are derived from component domains with
/// padding.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub bounds: Option<Vec<(f64, f64)>>,
    pub step: f64,
    pub max_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { bounds: None, step: 1e-2, max_points: 4_000_000 }
    }
}

/// Bounding interval for one component derived from its breakpoints and
/// vertices, padded by a multiple of the span.
fn derive_box(f: &PiecewiseQuadratic) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for piece in f.pieces() {
        for t in [piece.a, piece.b] {
            if t.is_finite() {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        if piece.p > 0.0 {
            let vertex = -piece.q / (2.0 * piece.p);
            if vertex.is_finite() {
                lo = lo.min(vertex);
                hi = hi.max(vertex);
            }
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (lo, hi) = (0.0, 0.0);
    }
    let pad = 5.0 * (hi - lo).max(1.0);
    (lo - pad, hi + pad)
}

/// Clip a box to the component's actual domain where that domain is finite.
fn clipped_box(f: &PiecewiseQuadratic) -> (f64, f64) {
    let (lo, hi) = derive_box(f);
    let dom = f.domain();
    let dom_lo = dom.first().map(|d| d.0).unwrap_or(lo);
    let dom_hi = dom.last().map(|d| d.1).unwrap_or(hi);
    (dom_lo.max(lo), dom_hi.min(hi))
}

/// Solves the SAP by evaluating the objective on a grid over the feasible
/// subspace `{x : A x = b}`, parameterized by an orthonormal null-space
/// basis plus a particular solution. The returned value is an upper bound on
/// the optimum, accurate to the grid's modulus of continuity.
pub fn exhaustive(p: &SapProblem, g: &GridSpec) -> Result<(Vec<f64>, f64), OracleError> {
    if !(g.step > 0.0) {
        return Err(OracleError::InvalidGrid("step must be positive"));
    }
    let n = p.num_vars();
    let m = p.num_constraints();
    let a = DMatrix::from_row_slice(m, n, &p.a().to_dense_vec());
    let gram = a.transpose() * &a;
    let eig = gram.symmetric_eigen();
    let max_ev = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * max_ev.max(1e-300);
    let null_cols: Vec<usize> =
        (0..n).filter(|&j| eig.eigenvalues[j].abs() <= tol).collect();
    let range_cols: Vec<usize> =
        (0..n).filter(|&j| eig.eigenvalues[j].abs() > tol).collect();
    let free = null_cols.len();
    if free > 4 {
        return Err(OracleError::TooManyDegreesOfFreedom(free));
    }

    let atb = a.transpose() * DVector::from_column_slice(p.b());
    let mut x0 = DVector::zeros(n);
    for &j in &range_cols {
        let v = eig.eigenvectors.column(j);
        let coef = v.dot(&atb) / eig.eigenvalues[j];
        x0 += v * coef;
    }
    let bnorm = p.b().iter().map(|v| v * v).sum::<f64>().sqrt();
    let x0_vec: Vec<f64> = x0.iter().copied().collect();
    if p.residual_norm(&x0_vec) > 1e-6 * (1.0 + bnorm) {
        return Err(OracleError::Infeasible);
    }
    if free == 0 {
        let value = p.objective(&x0_vec);
        return Ok((x0_vec, value));
    }

    let bounds: Vec<(f64, f64)> = match &g.bounds {
        Some(bs) => {
            if bs.len() != free {
                return Err(OracleError::InvalidGrid("bounds must match the free coordinate count"));
            }
            bs.clone()
        }
        None => {
            let boxes: Vec<(f64, f64)> = p.f().iter().map(clipped_box).collect();
            null_cols
                .iter()
                .map(|&j| {
                    let v = eig.eigenvectors.column(j);
                    let (mut lo, mut hi) = (0.0, 0.0);
                    for i in 0..n {
                        let c1 = v[i] * (boxes[i].0 - x0[i]);
                        let c2 = v[i] * (boxes[i].1 - x0[i]);
                        lo += c1.min(c2);
                        hi += c1.max(c2);
                    }
                    (lo, hi)
                })
                .collect()
        }
    };

    let counts: Vec<usize> = bounds
        .iter()
        .map(|(lo, hi)| if hi > lo { ((hi - lo) / g.step).floor() as usize + 1 } else { 1 })
        .collect();
    let total: usize = counts.iter().try_fold(1usize, |acc, c| acc.checked_mul(*c))
        .ok_or(OracleError::BudgetExceeded)?;
    if total > g.max_points {
        return Err(OracleError::BudgetExceeded);
    }

    let basis: Vec<DVector<f64>> =
        null_cols.iter().map(|&j| eig.eigenvectors.column(j).into_owned()).collect();
    let mut idx = vec![0usize; free];
    let mut best_val = f64::INFINITY;
    let mut best_x = x0_vec.clone();
    let mut x = vec![0.0; n];
    loop {
        for i in 0..n {
            x[i] = x0[i];
        }
        for (d, basis_d) in basis.iter().enumerate() {
            let t = bounds[d].0 + idx[d] as f64 * g.step;
            for i in 0..n {
                x[i] += t * basis_d[i];
            }
        }
        let val = p.objective(&x);
        if val < best_val {
            best_val = val;
            best_x.copy_from_slice(&x);
        }
        // odometer
        let mut d = 0;
        loop {
            if d == free {
                return Ok((best_x, best_val));
            }
            idx[d] += 1;
            if idx[d] < counts[d] {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Up to two constraint axes on a shared-step grid.
#[derive(Debug, Clone, Copy)]
struct ZGrid {
    dims: usize,
    lo: [f64; 2],
    len: [usize; 2],
    step: f64,
}

impl ZGrid {
    fn total(&self) -> usize {
        self.len[0] * self.len[1]
    }

    fn index_of(&self, z: [f64; 2]) -> Option<usize> {
        let mut cells = [0usize; 2];
        for d in 0..self.dims {
            let raw = ((z[d] - self.lo[d]) / self.step).round();
            if raw < 0.0 || raw >= self.len[d] as f64 {
                return None;
            }
            cells[d] = raw as usize;
        }
        Some(cells[0] + cells[1] * self.len[0])
    }

    fn nearest_index(&self, z: [f64; 2]) -> usize {
        let mut cells = [0usize; 2];
        for d in 0..self.dims {
            let raw = ((z[d] - self.lo[d]) / self.step).round();
            cells[d] = raw.clamp(0.0, (self.len[d] - 1) as f64) as usize;
        }
        cells[0] + cells[1] * self.len[0]
    }

    fn split_index(&self, idx: usize) -> [usize; 2] {
        [idx % self.len[0], idx / self.len[0]]
    }
}

struct DpNode {
    grid: ZGrid,
    values: Vec<f64>,
    /// Leaf: the x value attaining each cell, and the component index.
    leaf: Option<(usize, Vec<f64>)>,
    /// Internal: children node ids plus the chosen left-child cell per cell.
    combine: Option<(usize, usize, Vec<usize>)>,
}

/// Value-function (divide and conquer) solve for `m <= 2` constraint rows:
/// singleton tables on a `z` grid, pairwise min-plus combines, then a
/// nearest-grid lookup at `z = b` with backtracking for the argmin.
pub fn dp_solve(p: &SapProblem, g: &GridSpec) -> Result<(Vec<f64>, f64), OracleError> {
    if !(g.step > 0.0) {
        return Err(OracleError::InvalidGrid("step must be positive"));
    }
    let m = p.num_constraints();
    let n = p.num_vars();
    if m > 2 {
        return Err(OracleError::TooManyConstraintRows(m));
    }
    if m == 0 {
        let mut x = Vec::with_capacity(n);
        let mut total = 0.0;
        for fi in p.f() {
            let (xi, vi) = fi.minimize().map_err(|_| OracleError::Infeasible)?;
            x.push(xi);
            total += vi;
        }
        return Ok((x, total));
    }
    let dims = m;
    let dense = p.a().to_dense_vec();
    let col = |k: usize| -> [f64; 2] {
        let mut c = [0.0; 2];
        for d in 0..dims {
            c[d] = dense[d * n + k];
        }
        c
    };
    let h = g.step;

    // Leaf tables: splat each component's graph onto its own z range.
    let mut nodes: Vec<DpNode> = Vec::with_capacity(2 * n);
    for k in 0..n {
        let a_col = col(k);
        let (blo, bhi) = clipped_box(&p.f()[k]);
        let mut lo = [0.0f64; 2];
        let mut hi = [0.0f64; 2];
        for d in 0..dims {
            let c1 = a_col[d] * blo;
            let c2 = a_col[d] * bhi;
            lo[d] = c1.min(c2);
            hi[d] = c1.max(c2);
        }
        let mut len = [1usize; 2];
        for d in 0..dims {
            len[d] = ((hi[d] - lo[d]) / h).ceil() as usize + 1;
        }
        let grid = ZGrid { dims, lo, len, step: h };
        if grid.total() > g.max_points {
            return Err(OracleError::BudgetExceeded);
        }
        let mut values = vec![f64::INFINITY; grid.total()];
        let mut args = vec![f64::NAN; grid.total()];
        let scale = a_col[0].abs().max(a_col[1].abs()).max(1.0);
        let dx = h / scale;
        for piece in p.f()[k].pieces() {
            let seg_lo = piece.a.max(blo);
            let seg_hi = piece.b.min(bhi);
            if seg_lo > seg_hi {
                continue;
            }
            if ((seg_hi - seg_lo) / dx) as usize > g.max_points {
                return Err(OracleError::BudgetExceeded);
            }
            let mut x = seg_lo;
            loop {
                let z = [a_col[0] * x, a_col[1] * x];
                if let Some(idx) = grid.index_of(z) {
                    let v = piece.value_at(x);
                    if v < values[idx] {
                        values[idx] = v;
                        args[idx] = x;
                    }
                }
                if x >= seg_hi {
                    break;
                }
                x = (x + dx).min(seg_hi);
            }
        }
        nodes.push(DpNode { grid, values, leaf: Some((k, args)), combine: None });
    }

    // Pairwise combines, about log2(n) rounds.
    let mut layer: Vec<usize> = (0..n).collect();
    while layer.len() > 1 {
        let mut next = Vec::with_capacity(layer.len() / 2 + 1);
        let mut it = layer.chunks_exact(2);
        for pair in it.by_ref() {
            let (li, ri) = (pair[0], pair[1]);
            let (lg, rg) = (nodes[li].grid, nodes[ri].grid);
            let mut len = [1usize; 2];
            let mut lo = [0.0f64; 2];
            for d in 0..dims {
                len[d] = lg.len[d] + rg.len[d] - 1;
                lo[d] = lg.lo[d] + rg.lo[d];
            }
            let grid = ZGrid { dims, lo, len, step: h };
            if grid.total() > g.max_points {
                return Err(OracleError::BudgetExceeded);
            }
            let mut values = vec![f64::INFINITY; grid.total()];
            let mut split = vec![usize::MAX; grid.total()];
            for (il, vl) in nodes[li].values.iter().enumerate() {
                if !vl.is_finite() {
                    continue;
                }
                let lcell = lg.split_index(il);
                for (ir, vr) in nodes[ri].values.iter().enumerate() {
                    if !vr.is_finite() {
                        continue;
                    }
                    let rcell = rg.split_index(ir);
                    let idx = (lcell[0] + rcell[0]) + (lcell[1] + rcell[1]) * grid.len[0];
                    let v = vl + vr;
                    if v < values[idx] {
                        values[idx] = v;
                        split[idx] = il;
                    }
                }
            }
            nodes.push(DpNode { grid, values, leaf: None, combine: Some((li, ri, split)) });
            next.push(nodes.len() - 1);
        }
        if let [odd] = it.remainder() {
            next.push(*odd);
        }
        layer = next;
    }

    let root = layer[0];
    let mut zb = [0.0f64; 2];
    for d in 0..dims {
        zb[d] = p.b()[d];
    }
    let idx = nodes[root].grid.nearest_index(zb);
    let value = nodes[root].values[idx];
    if !value.is_finite() {
        return Err(OracleError::Infeasible);
    }

    // Backtrack the argmin through the combine tree.
    let mut x = vec![0.0; n];
    let mut stack = vec![(root, idx)];
    while let Some((node_id, cell)) = stack.pop() {
        let node = &nodes[node_id];
        if let Some((k, args)) = &node.leaf {
            x[*k] = args[cell];
        } else if let Some((li, ri, split)) = &node.combine {
            let il = split[cell];
            let lcell = nodes[*li].grid.split_index(il);
            let cell2 = node.grid.split_index(cell);
            let rcell = [cell2[0] - lcell[0], cell2[1] - lcell[1]];
            let ir = rcell[0] + rcell[1] * nodes[*ri].grid.len[0];
            stack.push((*li, il));
            stack.push((*ri, ir));
        }
    }
    Ok((x, value))
}

/// Grid argmin of `f(x) + (x - u)^2 / 2` over a window covering all finite
/// breakpoints, the query `u`, and every per-piece regularized vertex.
pub fn prox_oracle(f: &PiecewiseQuadratic, u: f64, step: f64) -> f64 {
    let mut lo = u;
    let mut hi = u;
    for piece in f.pieces() {
        for t in [piece.a, piece.b] {
            if t.is_finite() {
                lo = lo.min(t);
                hi = hi.max(t);
            }
        }
        let p = piece.p + 0.5;
        if p > 0.0 {
            let vertex = (u - piece.q) / (2.0 * p);
            lo = lo.min(vertex);
            hi = hi.max(vertex);
        }
    }
    let pad = 1.0 + 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;

    let mut best_obj = f64::INFINITY;
    let mut best_x = u;
    for piece in f.pieces() {
        let seg_lo = piece.a.max(lo);
        let seg_hi = piece.b.min(hi);
        if seg_lo > seg_hi {
            continue;
        }
        let mut x = seg_lo;
        loop {
            let d = x - u;
            let obj = piece.value_at(x) + 0.5 * d * d;
            if obj < best_obj {
                best_obj = obj;
                best_x = x;
            }
            if x >= seg_hi {
                break;
            }
            x = (x + step).min(seg_hi);
        }
    }
    best_x
}

/// Lower convex hull of a sampled graph, the independent reference for the
/// envelope computation.
#[derive(Debug, Clone)]
pub struct LowerHull {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl LowerHull {
    /// Piecewise-linear interpolation of the hull; `+inf` outside its range.
    pub fn value(&self, x: f64) -> f64 {
        if self.xs.is_empty() || x < self.xs[0] || x > *self.xs.last().unwrap() {
            return f64::INFINITY;
        }
        let idx = self.xs.partition_point(|&t| t <= x);
        if idx == 0 {
            return self.ys[0];
        }
        if idx == self.xs.len() {
            return *self.ys.last().unwrap();
        }
        let (x0, x1) = (self.xs[idx - 1], self.xs[idx]);
        let (y0, y1) = (self.ys[idx - 1], self.ys[idx]);
        if x1 == x0 {
            return y0.min(y1);
        }
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }
}

/// Samples `f` on `[lo, hi]` (uniform grid plus every finite breakpoint) and
/// returns the lower convex hull of the sampled graph via a monotone chain.
pub fn envelope_oracle(f: &PiecewiseQuadratic, lo: f64, hi: f64, step: f64) -> LowerHull {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let count = ((hi - lo) / step).ceil() as usize;
    for i in 0..=count {
        let x = (lo + i as f64 * step).min(hi);
        let y = f.eval(x);
        if y.is_finite() {
            pts.push((x, y));
        }
    }
    for piece in f.pieces() {
        for t in [piece.a, piece.b] {
            if t.is_finite() && t >= lo && t <= hi {
                let y = f.eval(t);
                if y.is_finite() {
                    pts.push((t, y));
                }
            }
        }
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|next, kept| next.0 == kept.0); // keep the lowest y per x

    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| -> f64 {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for pt in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], pt) <= 0.0 {
            hull.pop();
        }
        hull.push(pt);
    }
    LowerHull { xs: hull.iter().map(|p| p.0).collect(), ys: hull.iter().map(|p| p.1).collect() }
}
