//! Convex envelope of a piecewise quadratic.
//!
//! The envelope is built left to right: the running envelope is a convex
//! piecewise quadratic, and each new piece is spliced on by computing the
//! envelope of a two-piece function. The splice point is found by popping
//! pieces of the running envelope from the right until the connecting bridge
//! attaches strictly inside (or at the right end of) the last piece.
//!
//! The two-piece envelope consists of a head of the left piece, a bridge
//! line `alpha x + beta`, and a tail of the right piece; some of these may be
//! degenerate. Candidate `(x1, x2, alpha, beta)` tuples come from three case
//! families (tangency point inside each piece, inside one piece and at an
//! endpoint of the other, at endpoints of both, with variants for infinite
//! endpoints), and the first candidate passing the tangency validity checks
//! wins. The valid line is unique, so the family order only affects which
//! degenerate representation is returned.

use super::{PiecewiseQuadratic, PwqError, QuadPiece};

/// Candidate bridge between the two pieces. `x1`/`x2` may be infinite.
#[derive(Debug, Clone, Copy)]
struct Bridge {
    x1: f64,
    x2: f64,
    alpha: f64,
    beta: f64,
}

/// Both roots of `a x^2 + b x + c = 0`, using the cancellation-stable
/// q-form. A slightly negative discriminant collapses to the double root.
fn solve_quadratic(a: f64, b: f64, c: f64) -> [Option<f64>; 2] {
    if a == 0.0 {
        if b == 0.0 {
            return [None, None];
        }
        return [Some(-c / b), None];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        let scale = (b * b).max((4.0 * a * c).abs());
        if disc > -1e-10 * scale.max(1e-300) {
            return [Some(-b / (2.0 * a)), None];
        }
        return [None, None];
    }
    let sq = disc.sqrt();
    let qq = -0.5 * (b + b.signum() * sq);
    if qq == 0.0 {
        return [Some(0.0), None];
    }
    [Some(qq / a), Some(c / qq)]
}

/// Snaps `x` into `[lo, hi]` when it lies within rounding distance of the
/// interval; `None` when it is genuinely outside.
fn clamp_into(x: f64, lo: f64, hi: f64) -> Option<f64> {
    if !x.is_finite() {
        return None;
    }
    let tol = 1e-9 * (1.0 + x.abs());
    if x < lo - tol || x > hi + tol {
        return None;
    }
    Some(x.clamp(lo, hi))
}

/// Tangency validity conditions for a candidate bridge: the line must lie in
/// the subdifferential of each piece at its attachment point and pass
/// through the attachment values.
fn validate(g1: &QuadPiece, g2: &QuadPiece, cand: &Bridge) -> bool {
    let Bridge { x1, x2, alpha, beta } = *cand;
    if !alpha.is_finite() || !beta.is_finite() || x1.is_nan() || x2.is_nan() || x1 > x2 {
        return false;
    }
    let tol = 1e-9 * (1.0 + alpha.abs() + beta.abs());

    if x1 == f64::NEG_INFINITY {
        // Attach "at -inf": slopes agree asymptotically and the line does
        // not exceed the piece.
        if !(g1.a == f64::NEG_INFINITY && g1.p == 0.0) {
            return false;
        }
        if (alpha - g1.q).abs() > tol || beta > g1.r + tol {
            return false;
        }
    } else {
        if x1 < g1.a || x1 > g1.b {
            return false;
        }
        let value = g1.value_at(x1);
        if (value - (alpha * x1 + beta)).abs() > tol * (1.0 + value.abs()) {
            return false;
        }
        if !g1.is_point() {
            let slope = g1.slope_at(x1);
            if x1 == g1.a {
                if alpha > slope + tol {
                    return false;
                }
            } else if x1 == g1.b {
                if alpha < slope - tol {
                    return false;
                }
            } else if (alpha - slope).abs() > tol * (1.0 + slope.abs()) {
                return false;
            }
        }
    }

    if x2 == f64::INFINITY {
        if !(g2.b == f64::INFINITY && g2.p == 0.0) {
            return false;
        }
        if (alpha - g2.q).abs() > tol || beta > g2.r + tol {
            return false;
        }
    } else {
        if x2 < g2.a || x2 > g2.b {
            return false;
        }
        let value = g2.value_at(x2);
        if (value - (alpha * x2 + beta)).abs() > tol * (1.0 + value.abs()) {
            return false;
        }
        if !g2.is_point() {
            let slope = g2.slope_at(x2);
            if x2 == g2.a {
                if alpha > slope + tol {
                    return false;
                }
            } else if x2 == g2.b {
                if alpha < slope - tol {
                    return false;
                }
            } else if (alpha - slope).abs() > tol * (1.0 + slope.abs()) {
                return false;
            }
        }
    }
    true
}

/// Assembles head, bridge and tail for a validated candidate. Zero-length
/// heads and tails are dropped: the bridge endpoints already carry their
/// values, and stray point pieces would collide at shared abscissas later.
fn assemble(g1: &QuadPiece, g2: &QuadPiece, cand: &Bridge) -> (Vec<QuadPiece>, bool) {
    let mut env = Vec::with_capacity(3);
    if cand.x1 > f64::NEG_INFINITY {
        if let Some(head) = g1.restrict(g1.a, cand.x1) {
            if head.b > head.a {
                env.push(head);
            }
        }
    }
    if cand.x2 > cand.x1 {
        env.push(QuadPiece { p: 0.0, q: cand.alpha, r: cand.beta, a: cand.x1, b: cand.x2 });
    }
    if cand.x2 < f64::INFINITY {
        if let Some(tail) = g2.restrict(cand.x2, g2.b) {
            if tail.b > tail.a {
                env.push(tail);
            }
        }
    }
    if env.is_empty() {
        // Both pieces degenerate at one abscissa: keep the lower value.
        let v = g1.value_at(cand.x1).min(g2.value_at(cand.x2));
        env.push(QuadPiece { p: 0.0, q: 0.0, r: v, a: cand.x1, b: cand.x1 });
    }
    let attaches_left = g1.is_point() || cand.x1 <= g1.a;
    (env, attaches_left)
}

/// Tangency point on `quad` of the line through the fixed graph point
/// `(x0, y0)`: roots of `p x^2 - 2 p x0 x + (y0 - r - q x0) = 0`.
fn tangency_through_point(quad: &QuadPiece, x0: f64, y0: f64) -> [Option<f64>; 2] {
    solve_quadratic(quad.p, -2.0 * quad.p * x0, y0 - quad.r - quad.q * x0)
}

/// Envelope of two convex pieces with `g1.b <= g2.a`. Returns the envelope
/// pieces and whether the bridge attaches at (or left of) `g1`'s left end.
fn envelope_pair(g1: &QuadPiece, g2: &QuadPiece) -> (Vec<QuadPiece>, bool) {
    debug_assert!(g1.b <= g2.a);
    // Coincident points: the minimum survives.
    if g1.is_point() && g2.is_point() && g1.a == g2.a {
        let v = g1.value_at(g1.a).min(g2.value_at(g2.a));
        return (vec![QuadPiece { p: 0.0, q: 0.0, r: v, a: g1.a, b: g1.a }], true);
    }
    let mut candidates: Vec<Bridge> = Vec::with_capacity(12);

    // Touching pieces that already continue convexly: degenerate bridge.
    if g1.b == g2.a {
        let alpha = if !g1.is_point() {
            g1.slope_at(g1.b)
        } else if !g2.is_point() {
            g2.slope_at(g2.a)
        } else {
            0.0
        };
        candidates.push(Bridge { x1: g1.b, x2: g2.a, alpha, beta: g1.value_at(g1.b) - alpha * g1.b });
    }

    // Midpoint-midpoint: common tangent with both tangency points interior.
    if g1.p > 0.0 && g2.p > 0.0 {
        let a = g1.p * g1.p / g2.p - g1.p;
        let b = g1.p * (g1.q - g2.q) / g2.p;
        let c = g1.r - g2.r + (g1.q - g2.q) * (g1.q - g2.q) / (4.0 * g2.p);
        for root in solve_quadratic(a, b, c).into_iter().flatten() {
            let (Some(x1), Some(x2)) = (
                clamp_into(root, g1.a, g1.b),
                clamp_into((2.0 * g1.p * root + g1.q - g2.q) / (2.0 * g2.p), g2.a, g2.b),
            ) else {
                continue;
            };
            let alpha = g1.slope_at(x1);
            candidates.push(Bridge { x1, x2, alpha, beta: g1.value_at(x1) - alpha * x1 });
        }
    }

    // Midpoint-endpoint: tangent to g1 through an endpoint of g2.
    if g1.p > 0.0 {
        let mut endpoints = vec![g2.a];
        if g2.b.is_finite() && g2.b != g2.a {
            endpoints.push(g2.b);
        }
        for e2 in endpoints {
            for root in tangency_through_point(g1, e2, g2.value_at(e2)).into_iter().flatten() {
                let Some(x1) = clamp_into(root, g1.a, g1.b) else { continue };
                let alpha = g1.slope_at(x1);
                candidates.push(Bridge { x1, x2: e2, alpha, beta: g1.value_at(x1) - alpha * x1 });
            }
        }
        // Attachment at +inf: slopes match asymptotically (g2 affine).
        if g2.b == f64::INFINITY && g2.p == 0.0 {
            let alpha = g2.q;
            let x1r = (alpha - g1.q) / (2.0 * g1.p);
            if let Some(x1) = clamp_into(x1r, g1.a, g1.b) {
                candidates.push(Bridge {
                    x1,
                    x2: f64::INFINITY,
                    alpha,
                    beta: g1.value_at(x1) - alpha * x1,
                });
            }
        }
    }

    // Endpoint-midpoint: tangent to g2 through an endpoint of g1.
    if g2.p > 0.0 {
        let mut endpoints = vec![g1.b];
        if g1.a.is_finite() && g1.a != g1.b {
            endpoints.push(g1.a);
        }
        for e1 in endpoints {
            for root in tangency_through_point(g2, e1, g1.value_at(e1)).into_iter().flatten() {
                let Some(x2) = clamp_into(root, g2.a, g2.b) else { continue };
                let alpha = g2.slope_at(x2);
                candidates.push(Bridge { x1: e1, x2, alpha, beta: g2.value_at(x2) - alpha * x2 });
            }
        }
        if g1.a == f64::NEG_INFINITY && g1.p == 0.0 {
            let alpha = g1.q;
            let x2r = (alpha - g2.q) / (2.0 * g2.p);
            if let Some(x2) = clamp_into(x2r, g2.a, g2.b) {
                candidates.push(Bridge {
                    x1: f64::NEG_INFINITY,
                    x2,
                    alpha,
                    beta: g2.value_at(x2) - alpha * x2,
                });
            }
        }
    }

    // Endpoint-endpoint: the line through two endpoint graph points.
    {
        let mut e1s = vec![g1.b];
        if g1.a.is_finite() && g1.a != g1.b {
            e1s.push(g1.a);
        }
        let mut e2s = vec![g2.a];
        if g2.b.is_finite() && g2.b != g2.a {
            e2s.push(g2.b);
        }
        for &e1 in &e1s {
            for &e2 in &e2s {
                if e1 == e2 {
                    continue; // covered by the touching candidate
                }
                let (v1, v2) = (g1.value_at(e1), g2.value_at(e2));
                let alpha = (v2 - v1) / (e2 - e1);
                candidates.push(Bridge { x1: e1, x2: e2, alpha, beta: v1 - alpha * e1 });
            }
        }
        // Asymptotic attachments paired with a finite endpoint.
        if g2.b == f64::INFINITY && g2.p == 0.0 {
            for &e1 in &e1s {
                let alpha = g2.q;
                candidates.push(Bridge {
                    x1: e1,
                    x2: f64::INFINITY,
                    alpha,
                    beta: g1.value_at(e1) - alpha * e1,
                });
            }
        }
        if g1.a == f64::NEG_INFINITY && g1.p == 0.0 {
            for &e2 in &e2s {
                let alpha = g1.q;
                candidates.push(Bridge {
                    x1: f64::NEG_INFINITY,
                    x2: e2,
                    alpha,
                    beta: g2.value_at(e2) - alpha * e2,
                });
            }
            if g2.b == f64::INFINITY && g2.p == 0.0 && (g1.q - g2.q).abs() <= 1e-12 {
                candidates.push(Bridge {
                    x1: f64::NEG_INFINITY,
                    x2: f64::INFINITY,
                    alpha: g1.q,
                    beta: g1.r.min(g2.r),
                });
            }
        }
    }

    for cand in &candidates {
        if validate(g1, g2, cand) {
            return assemble(g1, g2, cand);
        }
    }
    panic!("no envelope case matched for pieces {g1} and {g2}");
}

/// Splices `new_piece` (to the right of everything in `work`) onto the
/// running convex envelope `work`.
fn push_envelope(work: &mut Vec<QuadPiece>, new_piece: QuadPiece) {
    if work.is_empty() {
        work.push(new_piece);
        return;
    }
    loop {
        let last = work.pop().expect("loop requires nonempty work");
        let (env, attaches_left) = envelope_pair(&last, &new_piece);
        if !attaches_left || work.is_empty() {
            work.extend(env);
            return;
        }
        // The bridge consumed `last` entirely; retry from the next piece.
    }
}

/// Chord of a concave piece over its (finite) interval: its own envelope.
fn chord_of(piece: &QuadPiece) -> Result<QuadPiece, PwqError> {
    if !(piece.a.is_finite() && piece.b.is_finite()) {
        return Err(PwqError::Unbounded);
    }
    let (va, vb) = (piece.value_at(piece.a), piece.value_at(piece.b));
    let alpha = (vb - va) / (piece.b - piece.a);
    Ok(QuadPiece { p: 0.0, q: alpha, r: va - alpha * piece.a, a: piece.a, b: piece.b })
}

impl PiecewiseQuadratic {
    /// The convex envelope: the greatest convex function below `self`.
    ///
    /// Concave pieces contribute only through their chords, which leaves the
    /// envelope unchanged, so they are replaced up front and every remaining
    /// piece is convex on its interval.
    pub fn envelope(&self) -> Result<PiecewiseQuadratic, PwqError> {
        if self.is_convex() {
            return Ok(self.clone());
        }
        let mut work: Vec<QuadPiece> = Vec::with_capacity(2 * self.len());
        for piece in self.pieces() {
            let piece = if piece.p < 0.0 { chord_of(piece)? } else { *piece };
            push_envelope(&mut work, piece);
        }
        PiecewiseQuadratic::new(work)
    }
}

/// Envelope of the two-piece function `min(g1, g2)` with `g1.b <= g2.a`.
pub fn envelope_two_piece(g1: QuadPiece, g2: QuadPiece) -> Result<PiecewiseQuadratic, PwqError> {
    if g1.b > g2.a {
        return Err(PwqError::InvalidInput("piece intervals overlap interiorly"));
    }
    let canonical = |g: QuadPiece| -> QuadPiece {
        if g.is_point() {
            QuadPiece { p: 0.0, q: 0.0, r: g.value_at(g.a), ..g }
        } else {
            g
        }
    };
    let (g1, g2) = (canonical(g1), canonical(g2));
    if g1.p < 0.0 || g2.p < 0.0 {
        return Err(PwqError::InvalidInput("pieces must be convex on their intervals"));
    }
    let (env, _) = envelope_pair(&g1, &g2);
    PiecewiseQuadratic::new(env)
}
