//! Shared generators and oracles for the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepaff::sap::{MatrixData, SapProblem};
use sepaff::{PiecewiseQuadratic, QuadPiece};
use std::process::Command;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random piecewise quadratic with up to `max_pieces` pieces on a bounded
/// window of [-5, 5]: mixed convex, concave, linear, constant and point
/// pieces, with occasional domain gaps and jump discontinuities.
pub fn random_pwq(rng: &mut ChaCha8Rng, max_pieces: usize) -> PiecewiseQuadratic {
    let n_pieces = rng.gen_range(1..=max_pieces);
    let mut cuts: Vec<f64> = (0..=n_pieces).map(|_| rng.gen_range(-5.0..5.0)).collect();
    cuts.sort_by(f64::total_cmp);
    let mut pieces = Vec::with_capacity(n_pieces);
    for i in 0..n_pieces {
        let (mut a, b) = (cuts[i], cuts[i + 1]);
        match rng.gen_range(0..10) {
            0 => a = b,                          // point piece
            1 => a += 0.3 * (b - a),             // domain gap on the left
            _ => {}
        }
        let p = match rng.gen_range(0..4) {
            0 => rng.gen_range(0.05..3.0),
            1 => -rng.gen_range(0.05..3.0),
            _ => 0.0,
        };
        let q = rng.gen_range(-3.0..3.0);
        let r = rng.gen_range(-3.0..3.0);
        pieces.push(QuadPiece::new(p, q, r, a, b).expect("generated piece is valid"));
    }
    PiecewiseQuadratic::new(pieces).expect("generated pieces are ordered")
}

/// Random convex piecewise quadratic (the envelope of a random one).
pub fn random_convex_pwq(rng: &mut ChaCha8Rng, max_pieces: usize) -> PiecewiseQuadratic {
    random_pwq(rng, max_pieces).envelope().expect("bounded domains have envelopes")
}

/// Hull of the finite part of the domain.
pub fn domain_window(f: &PiecewiseQuadratic) -> (f64, f64) {
    let dom = f.domain();
    (dom.first().unwrap().0, dom.last().unwrap().1)
}

/// Random equality-constrained QP in SAP form: single strongly convex
/// quadratic per component, Gaussian-ish constraints, feasible rhs.
/// Returns the problem plus the raw `(p, q)` coefficients.
pub fn random_convex_qp(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
) -> (SapProblem, Vec<(f64, f64)>) {
    let coeffs: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(0.5..2.5), rng.gen_range(-2.0..2.0)))
        .collect();
    let f: Vec<PiecewiseQuadratic> = coeffs
        .iter()
        .map(|(p, q)| PiecewiseQuadratic::quadratic(*p, *q, 0.0).unwrap())
        .collect();
    let rows: Vec<Vec<f64>> =
        (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let x_feas: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let b: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().zip(&x_feas).map(|(a, x)| a * x).sum())
        .collect();
    let a = MatrixData::from_rows(rows).unwrap();
    (SapProblem::new(a, b, f).unwrap(), coeffs)
}

/// Direct optimum of `min sum p_i x_i^2 + q_i x_i s.t. A x = b` through the
/// stationarity system, solved with an LU factorization independent of the
/// solver's own linear algebra.
pub fn equality_qp_optimum(p: &SapProblem, coeffs: &[(f64, f64)]) -> f64 {
    use nalgebra::{DMatrix, DVector};
    let n = p.num_vars();
    let m = p.num_constraints();
    let dense = p.a().to_dense_vec();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    for i in 0..n {
        kkt[(i, i)] = 2.0 * coeffs[i].0;
    }
    for i in 0..m {
        for j in 0..n {
            kkt[(n + i, j)] = dense[i * n + j];
            kkt[(j, n + i)] = dense[i * n + j];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    for i in 0..n {
        rhs[i] = -coeffs[i].1;
    }
    for i in 0..m {
        rhs[n + i] = p.b()[i];
    }
    let sol = kkt.lu().solve(&rhs).expect("stationarity system is nonsingular");
    (0..n).map(|i| (coeffs[i].0 * sol[i] + coeffs[i].1) * sol[i]).sum()
}

/// Three-piece fixed-cost function: `cost` away from zero on `[lo, hi]`.
pub fn card_cost(cost: f64, lo: f64, hi: f64) -> PiecewiseQuadratic {
    PiecewiseQuadratic::new(vec![
        QuadPiece::new(0.0, 0.0, cost, lo, 0.0).unwrap(),
        QuadPiece::new(0.0, 0.0, 0.0, 0.0, 0.0).unwrap(),
        QuadPiece::new(0.0, 0.0, cost, 0.0, hi).unwrap(),
    ])
    .unwrap()
}

/// Runs the CLI binary; returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_sepaff"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// Serializes a SAP into the problem-file wire format.
pub fn problem_file_json(p: &SapProblem) -> String {
    let rows: Vec<Vec<f64>> = {
        let dense = p.a().to_dense_vec();
        let (m, n) = (p.num_constraints(), p.num_vars());
        (0..m).map(|i| dense[i * n..(i + 1) * n].to_vec()).collect()
    };
    let functions: Vec<&[QuadPiece]> = p.f().iter().map(|f| f.pieces()).collect();
    serde_json::json!({
        "version": 1,
        "A": rows,
        "b": p.b(),
        "functions": functions,
    })
    .to_string()
}
