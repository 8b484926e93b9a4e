//! Proximal operator of a piecewise quadratic.
//!
//! The prox is computed in two steps: add the coefficients of
//! `(x - u)^2 / 2` to every piece, then take the global per-piece minimum.
//! For convex functions the minimizer is also available in closed form by a
//! binary search over the monotone breakpoint thresholds
//! `(2 p_j + 1) a_j + q_j`, `(2 p_j + 1) b_j + q_j`.

use super::{PiecewiseQuadratic, PwqError, QuadPiece};

/// Best minimizer of `piece + (x - u)^2 / 2` under the prox tie rule:
/// smallest objective, then closest to `u`, then smaller `x`.
fn piece_prox_candidate(piece: &QuadPiece, u: f64) -> (f64, f64) {
    let p = piece.p + 0.5;
    let q = piece.q - u;
    let shifted = |x: f64| (p * x + q) * x + piece.r + 0.5 * u * u;
    if piece.is_point() {
        return (piece.a, shifted(piece.a));
    }
    if p > 0.0 {
        let x = (-q / (2.0 * p)).clamp(piece.a, piece.b);
        return (x, shifted(x));
    }
    if p == 0.0 {
        if q > 0.0 {
            return (piece.a, shifted(piece.a));
        }
        if q < 0.0 {
            return (piece.b, shifted(piece.b));
        }
        // Flat after regularization: every point minimizes; take the one
        // closest to u.
        let x = u.clamp(piece.a, piece.b);
        return (x, shifted(x));
    }
    // Concave even after regularization; interval is finite by the piece
    // invariant (p < 0 forbids unbounded intervals).
    let (va, vb) = (shifted(piece.a), shifted(piece.b));
    if va < vb || (va == vb && (piece.a - u).abs() <= (piece.b - u).abs()) {
        (piece.a, va)
    } else {
        (piece.b, vb)
    }
}

impl PiecewiseQuadratic {
    /// A global minimizer of `f(x) + (x - u)^2 / 2`.
    ///
    /// When several minimizers attain the optimum the one closest to `u` is
    /// returned, ties going to the smaller `x`.
    pub fn prox(&self, u: f64) -> f64 {
        let mut best_x = f64::NAN;
        let mut best_v = f64::INFINITY;
        for piece in self.pieces() {
            let (x, v) = piece_prox_candidate(piece, u);
            let better = v < best_v
                || (v == best_v
                    && ((x - u).abs() < (best_x - u).abs()
                        || ((x - u).abs() == (best_x - u).abs() && x < best_x)));
            if better {
                best_x = x;
                best_v = v;
            }
        }
        best_x
    }

    /// Closed-form prox for convex functions via the breakpoint threshold
    /// table; agrees with [`PiecewiseQuadratic::prox`] exactly.
    pub fn prox_convex(&self, u: f64) -> Result<f64, PwqError> {
        if !self.is_convex() {
            return Err(PwqError::NotConvex);
        }
        let pieces = self.pieces();
        // Threshold pairs per piece: u = (2p + 1) x + q maps the interval
        // [a_j, b_j] to a nondecreasing range of u values.
        let lower_threshold = |piece: &QuadPiece| (2.0 * piece.p + 1.0) * piece.a + piece.q;
        let upper_threshold = |piece: &QuadPiece| (2.0 * piece.p + 1.0) * piece.b + piece.q;

        // Binary search for the first piece whose upper threshold covers u.
        let idx = pieces.partition_point(|piece| upper_threshold(piece) < u);
        if idx == pieces.len() {
            // Beyond the last threshold: clamp to the right end of the domain.
            return Ok(pieces[pieces.len() - 1].b);
        }
        let piece = &pieces[idx];
        if u < lower_threshold(piece) {
            // Between pieces (or left of the domain): the breakpoint itself.
            return Ok(piece.a);
        }
        Ok((u - piece.q) / (1.0 + 2.0 * piece.p))
    }
}
