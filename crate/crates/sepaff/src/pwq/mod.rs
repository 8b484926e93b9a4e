//! Univariate piecewise-quadratic function algebra.
//!
//! A [`PiecewiseQuadratic`] is an ordered list of quadratic pieces over
//! closed intervals, taking the value `+inf` outside every interval. Pieces
//! may touch at shared endpoints; where several pieces cover the same point
//! the function value is the minimum over the covering pieces. The stored
//! description is kept irreducible: [`PiecewiseQuadratic::simplify`] runs on
//! every constructor.

mod envelope;
mod prox;
mod serde_impl;

use std::fmt;

pub use envelope::envelope_two_piece;

/// Errors produced by piecewise-quadratic operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PwqError {
    #[error("piecewise quadratic must have at least one piece")]
    EmptyPieces,
    #[error("piece {index}: {reason}")]
    InvalidPiece { index: usize, reason: &'static str },
    #[error("pieces are not in interval order at index {0}")]
    UnorderedPieces(usize),
    #[error("domains do not intersect")]
    EmptyDomain,
    #[error("argument scale must be nonzero")]
    ZeroScale,
    #[error("function is not convex")]
    NotConvex,
    #[error("function is unbounded below")]
    Unbounded,
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
}

/// One quadratic piece `p x^2 + q x + r` on the closed interval `[a, b]`.
///
/// Endpoints may be `-inf`/`+inf`; a piece with an unbounded interval must be
/// bounded below on it. `a == b` describes a single point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPiece {
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub a: f64,
    pub b: f64,
}

impl QuadPiece {
    pub fn new(p: f64, q: f64, r: f64, a: f64, b: f64) -> Result<Self, PwqError> {
        let piece = QuadPiece { p, q, r, a, b };
        piece.validate().map_err(|reason| PwqError::InvalidPiece { index: 0, reason })?;
        Ok(piece)
    }

    /// A single point of the graph: `{(x, value)}`.
    pub fn point(x: f64, value: f64) -> Result<Self, PwqError> {
        Self::new(0.0, 0.0, value, x, x)
    }

    fn validate(&self) -> Result<(), &'static str> {
        if !(self.p.is_finite() && self.q.is_finite() && self.r.is_finite()) {
            return Err("coefficients must be finite");
        }
        if self.a.is_nan() || self.b.is_nan() || self.a > self.b {
            return Err("interval endpoints must satisfy a <= b");
        }
        if self.a == self.b && !self.a.is_finite() {
            return Err("a point piece must sit at a finite abscissa");
        }
        if self.a == f64::NEG_INFINITY && !(self.p > 0.0 || (self.p == 0.0 && self.q <= 0.0)) {
            return Err("piece unbounded below toward -inf");
        }
        if self.b == f64::INFINITY && !(self.p > 0.0 || (self.p == 0.0 && self.q >= 0.0)) {
            return Err("piece unbounded below toward +inf");
        }
        Ok(())
    }

    /// Quadratic value, ignoring the interval.
    #[inline]
    pub fn value_at(&self, x: f64) -> f64 {
        (self.p * x + self.q) * x + self.r
    }

    /// One-sided derivative `2 p x + q`, ignoring the interval.
    #[inline]
    pub fn slope_at(&self, x: f64) -> f64 {
        2.0 * self.p * x + self.q
    }

    #[inline]
    pub fn covers(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    #[inline]
    pub fn is_point(&self) -> bool {
        self.a == self.b
    }

    /// Minimum of the piece over its interval: `(argmin, value)`.
    ///
    /// Ties are broken toward the smaller argmin. Fails only when the piece
    /// violates the bounded-below invariant.
    pub fn minimize(&self) -> Result<(f64, f64), PwqError> {
        if self.is_point() {
            return Ok((self.a, self.value_at(self.a)));
        }
        if self.p > 0.0 {
            let vertex = -self.q / (2.0 * self.p);
            let x = vertex.clamp(self.a, self.b);
            return Ok((x, self.value_at(x)));
        }
        if self.p == 0.0 {
            return match self.q.partial_cmp(&0.0) {
                Some(std::cmp::Ordering::Greater) => {
                    if self.a.is_finite() {
                        Ok((self.a, self.value_at(self.a)))
                    } else {
                        Err(PwqError::Unbounded)
                    }
                }
                Some(std::cmp::Ordering::Less) => {
                    if self.b.is_finite() {
                        Ok((self.b, self.value_at(self.b)))
                    } else {
                        Err(PwqError::Unbounded)
                    }
                }
                _ => {
                    let x = if self.a.is_finite() {
                        self.a
                    } else if self.b.is_finite() {
                        self.b
                    } else {
                        0.0
                    };
                    Ok((x, self.r))
                }
            };
        }
        // Concave: minimum sits at an endpoint, both must be finite.
        if !(self.a.is_finite() && self.b.is_finite()) {
            return Err(PwqError::Unbounded);
        }
        let (va, vb) = (self.value_at(self.a), self.value_at(self.b));
        if va <= vb {
            Ok((self.a, va))
        } else {
            Ok((self.b, vb))
        }
    }

    /// Restriction of the piece to `[lo, hi] ∩ [a, b]`; `None` if empty.
    pub(crate) fn restrict(&self, lo: f64, hi: f64) -> Option<QuadPiece> {
        let a = self.a.max(lo);
        let b = self.b.min(hi);
        if a > b {
            return None;
        }
        Some(QuadPiece { a, b, ..*self })
    }
}

impl fmt::Display for QuadPiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x^2 + {}x + {} on [{}, {}]",
            self.p, self.q, self.r, self.a, self.b
        )
    }
}

/// A function given by quadratic pieces on ordered intervals, `+inf` outside.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuadratic {
    pieces: Vec<QuadPiece>,
}

impl PiecewiseQuadratic {
    /// Builds a function from pieces and normalizes the description.
    ///
    /// Pieces must be sorted by interval with disjoint interiors; a point
    /// piece lying inside the previous interval is accepted and resolved by
    /// the minimum convention.
    pub fn new(pieces: Vec<QuadPiece>) -> Result<Self, PwqError> {
        let normalized = normalize(pieces)?;
        if normalized.is_empty() {
            return Err(PwqError::EmptyPieces);
        }
        Ok(PiecewiseQuadratic { pieces: normalized })
    }

    /// Single piece `p x^2 + q x + r` on all of the real line.
    pub fn quadratic(p: f64, q: f64, r: f64) -> Result<Self, PwqError> {
        Self::new(vec![QuadPiece::new(p, q, r, f64::NEG_INFINITY, f64::INFINITY)?])
    }

    /// Zero on `[lo, hi]`, `+inf` elsewhere.
    pub fn indicator(lo: f64, hi: f64) -> Result<Self, PwqError> {
        Self::new(vec![QuadPiece::new(0.0, 0.0, 0.0, lo, hi)?])
    }

    pub fn pieces(&self) -> &[QuadPiece] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Domain of the function as maximal disjoint closed intervals.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = Vec::new();
        for piece in &self.pieces {
            match out.last_mut() {
                Some(last) if piece.a <= last.1 => last.1 = last.1.max(piece.b),
                _ => out.push((piece.a, piece.b)),
            }
        }
        out
    }

    /// Value at `x` under the minimum convention; `+inf` outside the domain.
    pub fn eval(&self, x: f64) -> f64 {
        debug_assert!(!x.is_nan());
        // First piece that starts strictly to the right of x.
        let idx = self.pieces.partition_point(|piece| piece.a <= x);
        let mut best = f64::INFINITY;
        for j in (0..idx).rev() {
            let piece = &self.pieces[j];
            if piece.b < x {
                // Earlier pieces end even further left.
                break;
            }
            best = best.min(piece.value_at(x));
        }
        best
    }

    /// Pointwise sum; the domain is the intersection of both domains.
    pub fn add(&self, other: &PiecewiseQuadratic) -> Result<PiecewiseQuadratic, PwqError> {
        let mut pieces = Vec::with_capacity(self.len() + other.len());
        let mut j_start = 0usize;
        for fp in &self.pieces {
            while j_start < other.pieces.len() && other.pieces[j_start].b < fp.a {
                j_start += 1;
            }
            let mut j = j_start;
            while j < other.pieces.len() && other.pieces[j].a <= fp.b {
                let gp = &other.pieces[j];
                let a = fp.a.max(gp.a);
                let b = fp.b.min(gp.b);
                if a <= b {
                    pieces.push(QuadPiece {
                        p: fp.p + gp.p,
                        q: fp.q + gp.q,
                        r: fp.r + gp.r,
                        a,
                        b,
                    });
                }
                j += 1;
            }
        }
        if pieces.is_empty() {
            return Err(PwqError::EmptyDomain);
        }
        PiecewiseQuadratic::new(pieces)
    }

    /// Argument substitution: returns `g` with `g(x) = f(e x + s)`.
    pub fn shift_scale_arg(&self, e: f64, s: f64) -> Result<PiecewiseQuadratic, PwqError> {
        if e == 0.0 || !e.is_finite() || !s.is_finite() {
            return Err(PwqError::ZeroScale);
        }
        let map_endpoint = |t: f64| -> f64 {
            if t.is_finite() {
                (t - s) / e
            } else if e > 0.0 {
                t
            } else {
                -t
            }
        };
        let mut pieces: Vec<QuadPiece> = self
            .pieces
            .iter()
            .map(|piece| {
                let (lo, hi) = if e > 0.0 {
                    (map_endpoint(piece.a), map_endpoint(piece.b))
                } else {
                    (map_endpoint(piece.b), map_endpoint(piece.a))
                };
                QuadPiece {
                    p: piece.p * e * e,
                    q: 2.0 * piece.p * e * s + piece.q * e,
                    r: (piece.p * s + piece.q) * s + piece.r,
                    a: lo,
                    b: hi,
                }
            })
            .collect();
        if e < 0.0 {
            pieces.reverse();
        }
        PiecewiseQuadratic::new(pieces)
    }

    /// Scales function values by a positive factor.
    pub fn scale_values(&self, factor: f64) -> Result<PiecewiseQuadratic, PwqError> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(PwqError::InvalidInput("value scale must be positive and finite"));
        }
        let pieces = self
            .pieces
            .iter()
            .map(|piece| QuadPiece {
                p: piece.p * factor,
                q: piece.q * factor,
                r: piece.r * factor,
                ..*piece
            })
            .collect();
        PiecewiseQuadratic::new(pieces)
    }

    /// Global minimum: `(argmin, value)`, ties broken toward the smaller
    /// argmin.
    pub fn minimize(&self) -> Result<(f64, f64), PwqError> {
        let mut best: Option<(f64, f64)> = None;
        for piece in &self.pieces {
            let (x, v) = piece.minimize()?;
            match best {
                Some((_, bv)) if bv <= v => {}
                _ => best = Some((x, v)),
            }
        }
        best.ok_or(PwqError::EmptyPieces)
    }

    /// Whether the function is convex: convex pieces, a connected domain,
    /// matching values and nondecreasing one-sided slopes at breakpoints.
    pub fn is_convex(&self) -> bool {
        if self.pieces.iter().any(|piece| piece.p < 0.0 && !piece.is_point()) {
            return false;
        }
        for w in self.pieces.windows(2) {
            let (left, right) = (&w[0], &w[1]);
            if left.b != right.a {
                return false;
            }
            let vl = left.value_at(left.b);
            let vr = right.value_at(right.a);
            if (vl - vr).abs() > 1e-9 * (1.0 + vl.abs().max(vr.abs())) {
                return false;
            }
            let sl = left.slope_at(left.b);
            let sr = right.slope_at(right.a);
            // Point pieces impose no slope constraint of their own.
            if !left.is_point()
                && !right.is_point()
                && sl > sr + 1e-9 * (1.0 + sl.abs().max(sr.abs()))
            {
                return false;
            }
        }
        true
    }

    /// Returns the irreducible description of the same function.
    pub fn simplify(&self) -> PiecewiseQuadratic {
        // Construction already normalizes, so this is a fixed point.
        PiecewiseQuadratic {
            pieces: normalize(self.pieces.clone()).expect("valid pieces stay valid"),
        }
    }
}

impl fmt::Display for PiecewiseQuadratic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "PiecewiseQuadratic:")?;
        for piece in &self.pieces {
            writeln!(f, "  {piece}")?;
        }
        Ok(())
    }
}

/// Validates, resolves interior point pieces, drops dominated point pieces
/// and merges mergeable neighbors. Preserves `eval` everywhere.
fn normalize(pieces: Vec<QuadPiece>) -> Result<Vec<QuadPiece>, PwqError> {
    for (index, piece) in pieces.iter().enumerate() {
        piece.validate().map_err(|reason| PwqError::InvalidPiece { index, reason })?;
    }
    for (i, w) in pieces.windows(2).enumerate() {
        if w[1].a < w[0].a {
            return Err(PwqError::UnorderedPieces(i + 1));
        }
        if w[1].a < w[0].b && !w[1].is_point() {
            return Err(PwqError::UnorderedPieces(i + 1));
        }
    }

    // Split interior point pieces out of their covering piece.
    let mut split: Vec<QuadPiece> = Vec::with_capacity(pieces.len());
    for piece in pieces {
        let canonical = if piece.is_point() {
            QuadPiece { p: 0.0, q: 0.0, r: piece.value_at(piece.a), ..piece }
        } else {
            piece
        };
        match split.last().copied() {
            Some(last) if canonical.is_point() && canonical.a < last.b => {
                let x = canonical.a;
                if canonical.r >= last.value_at(x) {
                    continue; // dominated inside the covering interval
                }
                split.pop();
                if x > last.a {
                    split.push(QuadPiece { b: x, ..last });
                }
                split.push(canonical);
                split.push(QuadPiece { a: x, ..last });
            }
            _ => split.push(canonical),
        }
    }

    // Drop dominated point pieces; merge adjacent identical pieces.
    let mut out: Vec<QuadPiece> = Vec::with_capacity(split.len());
    for (i, piece) in split.iter().enumerate() {
        if piece.is_point() {
            let x = piece.a;
            let v = piece.r;
            let dominated_by_prev = out
                .last()
                .map(|prev| prev.b == x && prev.value_at(x) <= v)
                .unwrap_or(false);
            let dominated_by_next = split[i + 1..]
                .iter()
                .take_while(|next| next.a == x)
                .any(|next| next.value_at(x) <= v);
            if dominated_by_prev || dominated_by_next {
                continue;
            }
        } else if let Some(prev) = out.last() {
            // A kept point piece is only kept when strictly below its
            // neighbors, so it never merges; identical curves do.
            if prev.b == piece.a && prev.p == piece.p && prev.q == piece.q && prev.r == piece.r {
                let merged = QuadPiece { b: piece.b, ..*prev };
                out.pop();
                out.push(merged);
                continue;
            }
            // Drop a previously kept point piece that this piece undercuts.
            if prev.is_point() && prev.a == piece.a && piece.value_at(piece.a) <= prev.r {
                out.pop();
            }
        }
        out.push(*piece);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pwq(pieces: Vec<QuadPiece>) -> PiecewiseQuadratic {
        PiecewiseQuadratic::new(pieces).unwrap()
    }

    fn piece(p: f64, q: f64, r: f64, a: f64, b: f64) -> QuadPiece {
        QuadPiece::new(p, q, r, a, b).unwrap()
    }

    /// Three-piece cardinality cost: `cost` away from zero, 0 at zero.
    fn card(cost: f64, lo: f64, hi: f64) -> PiecewiseQuadratic {
        pwq(vec![
            piece(0.0, 0.0, cost, lo, 0.0),
            piece(0.0, 0.0, 0.0, 0.0, 0.0),
            piece(0.0, 0.0, cost, 0.0, hi),
        ])
    }

    #[test]
    fn eval_single_quadratic() {
        let f = pwq(vec![piece(1.0, 0.0, 0.0, -1.0, 1.0)]);
        assert_eq!(f.eval(0.5), 0.25);
    }

    #[test]
    fn eval_min_convention_at_overlap() {
        let f = card(1.0, -1.0, 1.0);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.5), 1.0);
        assert_eq!(f.eval(-1.0), 1.0);
    }

    #[test]
    fn eval_outside_domain_is_infinite() {
        let f = pwq(vec![piece(1.0, 0.0, 0.0, 0.0, 1.0)]);
        assert_eq!(f.eval(2.0), f64::INFINITY);
        assert_eq!(f.eval(-0.001), f64::INFINITY);
    }

    #[test]
    fn eval_scans_chains_of_point_pieces() {
        let f = pwq(vec![
            piece(0.0, 0.0, 3.0, -1.0, 1.0),
            piece(0.0, 0.0, 2.0, 1.0, 1.0),
            piece(0.0, 0.0, 5.0, 1.0, 2.0),
        ]);
        assert_eq!(f.eval(1.0), 2.0);
    }

    #[test]
    fn add_intersects_intervals() {
        let f = pwq(vec![piece(1.0, 0.0, 0.0, 0.0, 2.0)]);
        let g = pwq(vec![piece(0.0, 1.0, 0.0, 1.0, 3.0)]);
        let sum = f.add(&g).unwrap();
        assert_eq!(sum.pieces(), &[piece(1.0, 1.0, 0.0, 1.0, 2.0)]);
    }

    #[test]
    fn add_indicator_restricts_domain() {
        let f = PiecewiseQuadratic::indicator(0.0, 1.0).unwrap();
        let g = PiecewiseQuadratic::quadratic(2.0, 0.0, 0.0).unwrap();
        let sum = f.add(&g).unwrap();
        assert_eq!(sum.pieces(), &[piece(2.0, 0.0, 0.0, 0.0, 1.0)]);
    }

    #[test]
    fn add_keeps_card_structure() {
        let f = card(0.7, -1.0, 1.0);
        let g = PiecewiseQuadratic::quadratic(1.0, 0.0, 0.0).unwrap();
        let sum = f.add(&g).unwrap();
        assert_eq!(sum.len(), 3);
        assert_eq!(sum.pieces()[0], piece(1.0, 0.0, 0.7, -1.0, 0.0));
        // The point piece canonicalizes to its value.
        assert_eq!(sum.pieces()[1], piece(0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(sum.pieces()[2], piece(1.0, 0.0, 0.7, 0.0, 1.0));
        assert_eq!(sum.eval(0.0), 0.0);
    }

    #[test]
    fn add_disjoint_domains_fails() {
        let f = pwq(vec![piece(0.0, 0.0, 0.0, 0.0, 1.0)]);
        let g = pwq(vec![piece(0.0, 0.0, 0.0, 2.0, 3.0)]);
        assert_eq!(f.add(&g).unwrap_err(), PwqError::EmptyDomain);
    }

    #[test]
    fn shift_scale_substitutes() {
        let f = pwq(vec![piece(1.0, 0.0, 0.0, 0.0, 2.0)]);
        let g = f.shift_scale_arg(2.0, 0.0).unwrap();
        assert_eq!(g.pieces(), &[piece(4.0, 0.0, 0.0, 0.0, 1.0)]);
    }

    #[test]
    fn shift_scale_shifts() {
        let f = pwq(vec![piece(0.0, 1.0, 0.0, 0.0, 1.0)]);
        let g = f.shift_scale_arg(1.0, -1.0).unwrap();
        assert_eq!(g.pieces(), &[piece(0.0, 1.0, -1.0, 1.0, 2.0)]);
    }

    #[test]
    fn shift_scale_reflects() {
        let f = pwq(vec![piece(1.0, 0.0, 0.0, 0.0, 1.0)]);
        let g = f.shift_scale_arg(-1.0, 0.0).unwrap();
        assert_eq!(g.pieces(), &[piece(1.0, 0.0, 0.0, -1.0, 0.0)]);
    }

    #[test]
    fn shift_scale_zero_is_error() {
        let f = PiecewiseQuadratic::quadratic(1.0, 0.0, 0.0).unwrap();
        assert_eq!(f.shift_scale_arg(0.0, 0.0).unwrap_err(), PwqError::ZeroScale);
    }

    #[test]
    fn minimize_interior_vertex() {
        let f = pwq(vec![piece(1.0, -2.0, 0.0, 0.0, 3.0)]);
        assert_eq!(f.minimize().unwrap(), (1.0, -1.0));
    }

    #[test]
    fn minimize_clipped_vertex() {
        let f = pwq(vec![piece(1.0, -2.0, 0.0, 2.0, 3.0)]);
        assert_eq!(f.minimize().unwrap(), (2.0, 0.0));
    }

    #[test]
    fn minimize_unbounded_is_defended() {
        // Bypass the constructor to exercise the defensive path.
        let bad = QuadPiece { p: 0.0, q: 1.0, r: 0.0, a: f64::NEG_INFINITY, b: 0.0 };
        assert_eq!(bad.minimize().unwrap_err(), PwqError::Unbounded);
    }

    #[test]
    fn is_convex_quadratic() {
        assert!(PiecewiseQuadratic::quadratic(1.0, 0.0, 0.0).unwrap().is_convex());
    }

    #[test]
    fn is_convex_rejects_jump() {
        assert!(!card(1.0, -1.0, 1.0).is_convex());
    }

    #[test]
    fn is_convex_abs_value() {
        let f = pwq(vec![
            piece(0.0, -1.0, 0.0, f64::NEG_INFINITY, 0.0),
            piece(0.0, 1.0, 0.0, 0.0, f64::INFINITY),
        ]);
        assert!(f.is_convex());
    }

    #[test]
    fn is_convex_rejects_decreasing_slopes() {
        let f = pwq(vec![
            piece(0.0, 1.0, 0.0, -1.0, 0.0),
            piece(0.0, -1.0, 0.0, 0.0, 1.0),
        ]);
        assert!(!f.is_convex());
    }

    #[test]
    fn is_convex_rejects_disconnected_domain() {
        let f = pwq(vec![
            piece(0.0, 0.0, 0.0, 0.0, 1.0),
            piece(0.0, 0.0, 0.0, 2.0, 3.0),
        ]);
        assert!(!f.is_convex());
    }

    #[test]
    fn simplify_merges_identical_neighbors() {
        let f = pwq(vec![
            piece(1.0, 0.0, 0.0, 0.0, 1.0),
            piece(1.0, 0.0, 0.0, 1.0, 2.0),
        ]);
        assert_eq!(f.pieces(), &[piece(1.0, 0.0, 0.0, 0.0, 2.0)]);
    }

    #[test]
    fn simplify_drops_dominated_interior_point() {
        let f = pwq(vec![
            piece(0.0, 0.0, 0.0, 0.0, 2.0),
            piece(0.0, 0.0, 5.0, 1.0, 1.0),
        ]);
        assert_eq!(f.pieces(), &[piece(0.0, 0.0, 0.0, 0.0, 2.0)]);
    }

    #[test]
    fn simplify_splits_on_interior_dip() {
        let f = pwq(vec![
            piece(0.0, 0.0, 0.0, 0.0, 2.0),
            piece(0.0, 0.0, -5.0, 1.0, 1.0),
        ]);
        assert_eq!(f.len(), 3);
        assert_eq!(f.eval(1.0), -5.0);
        assert_eq!(f.eval(0.5), 0.0);
        assert_eq!(f.eval(1.5), 0.0);
    }

    #[test]
    fn simplify_is_a_fixed_point_on_irreducible_input() {
        let f = card(0.3, -2.0, 4.0);
        assert_eq!(f.simplify(), f);
    }

    #[test]
    fn simplify_drops_dominated_boundary_point() {
        let f = pwq(vec![
            piece(0.0, 0.0, 1.0, -1.0, 0.0),
            piece(0.0, 0.0, 1.0, 0.0, 0.0),
            piece(0.0, 0.0, 1.0, 0.0, 1.0),
        ]);
        assert_eq!(f.pieces(), &[piece(0.0, 0.0, 1.0, -1.0, 1.0)]);
    }

    #[test]
    fn constructor_rejects_unordered_pieces() {
        let err = PiecewiseQuadratic::new(vec![
            piece(0.0, 0.0, 0.0, 1.0, 2.0),
            piece(0.0, 0.0, 0.0, 0.0, 1.0),
        ])
        .unwrap_err();
        assert!(matches!(err, PwqError::UnorderedPieces(_)));
    }

    #[test]
    fn constructor_rejects_unbounded_piece() {
        assert!(QuadPiece::new(0.0, 1.0, 0.0, f64::NEG_INFINITY, 0.0).is_err());
        assert!(QuadPiece::new(-1.0, 0.0, 0.0, 0.0, f64::INFINITY).is_err());
        assert!(QuadPiece::new(0.0, 0.0, 0.0, f64::INFINITY, f64::INFINITY).is_err());
    }

    #[test]
    fn domain_merges_touching_intervals() {
        let f = pwq(vec![
            piece(0.0, -1.0, 0.0, 0.0, 1.0),
            piece(1.0, 0.0, -1.0, 1.0, 2.0),
            piece(0.0, 0.0, 0.0, 3.0, 4.0),
        ]);
        assert_eq!(f.domain(), vec![(0.0, 2.0), (3.0, 4.0)]);
    }

    #[test]
    fn point_pieces_canonicalize_to_constants() {
        let f = pwq(vec![QuadPiece::new(2.0, 1.0, 1.0, 3.0, 3.0).unwrap()]);
        assert_eq!(f.pieces(), &[piece(0.0, 0.0, 22.0, 3.0, 3.0)]);
    }
}
