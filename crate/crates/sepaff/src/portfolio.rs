//! Tax-aware mean-variance rebalancing assembled into separable-affine
//! form.
//!
//! The decision variable is `x = (h, c, y)`: asset weights, the cash
//! fraction, and factor exposures `y = C'X h` for a Cholesky factor `C` of
//! the factor covariance. The constraints are `C'X h - y = 0` and
//! `1'h + c = 1`; every cost term lands in a univariate piecewise quadratic
//! per component. The SAP minimizes the negated utility, so expected return
//! enters with a negative sign and risk with a positive one.

use crate::pwq::{PiecewiseQuadratic, PwqError, QuadPiece};
use crate::sap::{MatrixData, SapError, SapProblem};
use crate::Scaling;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum PortfolioError {
    #[error("asset {0}: tax lot weights do not sum to the initial weight")]
    LotMismatch(usize),
    #[error("integer share grid requires a finite nonnegative upper bound")]
    UnboundedInteger,
    #[error("factor covariance is not positive definite")]
    CholeskyFailure,
    #[error("asset {0}: cost terms leave an empty domain")]
    EmptyDomain(usize),
    #[error("invalid portfolio spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pwq(#[from] PwqError),
    #[error(transparent)]
    Sap(#[from] SapError),
}

/// One tax lot: a parcel of shares with a common cost basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxLot {
    /// Current weight of the lot as a fraction of portfolio value.
    pub weight: f64,
    /// Cost basis as a fraction of current value; above 1 the lot carries a
    /// loss.
    pub basis_fraction: f64,
    /// Applicable tax rate.
    pub rate: f64,
}

/// Lot selling order used by the tax liability: highest basis first
/// (tax-optimal) or the given order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LotOrder {
    Hifo,
    Fifo,
}

/// Expected-return input: an explicit vector, or the index-tracking choice
/// `alpha = 2 gamma_risk V h_bm` computed factor-wise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    Vector(Vec<f64>),
    Benchmark { benchmark_mode: bool },
}

/// Quadratic approximation controls for the 3/2-power impact cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpactConfig {
    pub d: f64,
    pub u_max: f64,
    pub segments: usize,
}

/// Per-asset cost configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetCostConfig {
    /// One-half the bid-ask spread.
    #[serde(default)]
    pub spread: f64,
    #[serde(default)]
    pub impact: Option<ImpactConfig>,
    /// Minimum trade size: trade nothing or at least this much.
    #[serde(default)]
    pub min_trade: Option<f64>,
    /// Fixed cost per nonzero trade.
    #[serde(default)]
    pub per_trade: Option<f64>,
    #[serde(default)]
    pub lots: Vec<TaxLot>,
    pub position_lb: f64,
    pub position_ub: f64,
    /// Minimum holding size: hold nothing or at least this much.
    #[serde(default)]
    pub min_holding: Option<f64>,
    /// Fixed cost per nonzero holding.
    #[serde(default)]
    pub per_asset_hold: Option<f64>,
    /// Per-share price for an integer share constraint.
    #[serde(default)]
    pub integer_shares: Option<f64>,
}

impl Default for AssetCostConfig {
    fn default() -> Self {
        AssetCostConfig {
            spread: 0.0,
            impact: None,
            min_trade: None,
            per_trade: None,
            lots: Vec::new(),
            position_lb: f64::NEG_INFINITY,
            position_ub: f64::INFINITY,
            min_holding: None,
            per_asset_hold: None,
            integer_shares: None,
        }
    }
}

/// Full rebalancing problem specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub assets: usize,
    pub factors: usize,
    pub alpha: AlphaSpec,
    /// Factor exposures, `assets x factors`.
    pub exposures: Vec<Vec<f64>>,
    /// Factor covariance, `factors x factors`, positive definite.
    pub factor_cov: Vec<Vec<f64>>,
    /// Idiosyncratic variances, all positive.
    pub idio_var: Vec<f64>,
    pub h_init: Vec<f64>,
    pub h_bm: Vec<f64>,
    pub gamma_risk: f64,
    pub gamma_trd: f64,
    pub gamma_hld: f64,
    pub gamma_sprd: f64,
    pub gamma_tax: f64,
    pub eta_lb: f64,
    pub eta_ub: f64,
    pub costs: Vec<AssetCostConfig>,
    pub lot_order: LotOrder,
}

impl PortfolioSpec {
    fn validate(&self) -> Result<(), PortfolioError> {
        let l = self.assets;
        let k = self.factors;
        let check = |ok: bool, msg: &str| {
            if ok {
                Ok(())
            } else {
                Err(PortfolioError::InvalidSpec(msg.to_string()))
            }
        };
        check(self.exposures.len() == l, "exposures must have one row per asset")?;
        check(self.exposures.iter().all(|r| r.len() == k), "exposure rows must have factor length")?;
        check(self.factor_cov.len() == k, "factor covariance must be factors x factors")?;
        check(self.factor_cov.iter().all(|r| r.len() == k), "factor covariance must be square")?;
        check(self.idio_var.len() == l, "idio_var must have one entry per asset")?;
        check(self.idio_var.iter().all(|v| *v > 0.0), "idiosyncratic variances must be positive")?;
        check(self.h_init.len() == l && self.h_bm.len() == l, "holdings must have asset length")?;
        check(self.costs.len() == l, "costs must have one entry per asset")?;
        check(self.eta_lb <= self.eta_ub, "invested-fraction bounds must be ordered")?;
        check(
            self.gamma_risk >= 0.0
                && self.gamma_trd >= 0.0
                && self.gamma_hld >= 0.0
                && self.gamma_sprd >= 0.0
                && self.gamma_tax >= 0.0,
            "tradeoff parameters must be nonnegative",
        )?;
        if let AlphaSpec::Vector(v) = &self.alpha {
            check(v.len() == l, "alpha must have asset length")?;
        }
        Ok(())
    }
}

/// Bid-ask spread cost `s |u|`.
pub fn spread_cost(s: f64) -> Result<PiecewiseQuadratic, PwqError> {
    PiecewiseQuadratic::new(vec![
        QuadPiece::new(0.0, -s, 0.0, f64::NEG_INFINITY, 0.0)?,
        QuadPiece::new(0.0, s, 0.0, 0.0, f64::INFINITY)?,
    ])
}

/// Piecewise-quadratic interpolant of the impact cost `d |u|^{3/2}` on
/// `[-u_max, u_max]`: exact at the segment knots, convex on each segment.
/// Returns the function and the maximum error against dense sampling,
/// relative to `1 + |true value|`.
pub fn impact_cost_approx(
    d: f64,
    u_max: f64,
    segments: usize,
) -> Result<(PiecewiseQuadratic, f64), PwqError> {
    if !(u_max > 0.0) || segments == 0 {
        return Err(PwqError::InvalidInput("impact approximation needs u_max > 0 and segments > 0"));
    }
    if d == 0.0 {
        return Ok((PiecewiseQuadratic::indicator(-u_max, u_max)?, 0.0));
    }
    let truth = |u: f64| d * u.abs().powf(1.5);
    let mut positive: Vec<QuadPiece> = Vec::with_capacity(segments);
    for s in 0..segments {
        let a = u_max * s as f64 / segments as f64;
        let b = u_max * (s + 1) as f64 / segments as f64;
        let mid = 0.5 * (a + b);
        // Quadratic through (a, f(a)), (mid, f(mid)), (b, f(b)).
        let (fa, fm, fb) = (truth(a), truth(mid), truth(b));
        let d1 = (fm - fa) / (mid - a);
        let d2 = (fb - fm) / (b - mid);
        let p = (d2 - d1) / (b - a);
        let q = d1 - p * (a + mid);
        let r = fa - (p * a + q) * a;
        positive.push(QuadPiece::new(p, q, r, a, b)?);
    }
    let mut pieces: Vec<QuadPiece> = positive
        .iter()
        .rev()
        .map(|piece| QuadPiece { p: piece.p, q: -piece.q, r: piece.r, a: -piece.b, b: -piece.a })
        .collect();
    pieces.extend(positive);
    let f = PiecewiseQuadratic::new(pieces)?;
    let mut max_err = 0.0f64;
    for i in 0..=2000 {
        let u = -u_max + u_max * i as f64 / 1000.0;
        let t = truth(u);
        max_err = max_err.max((f.eval(u) - t).abs() / (1.0 + t.abs()));
    }
    Ok((f, max_err))
}

/// Clips `[lo, hi]` pieces of a trade-space feasible set; empty set maps to
/// an error by the caller.
fn interval_piece(lo: f64, hi: f64) -> Option<QuadPiece> {
    if lo > hi {
        return None;
    }
    QuadPiece::new(0.0, 0.0, 0.0, lo, hi).ok()
}

/// Minimum trade size: feasible trades are `0` or `|u| >= u_min`, within
/// `bounds`.
pub fn min_trade_size(u_min: f64, bounds: (f64, f64)) -> Result<PiecewiseQuadratic, PwqError> {
    if !(u_min > 0.0) {
        return PiecewiseQuadratic::indicator(bounds.0, bounds.1);
    }
    let (lo, hi) = bounds;
    let mut pieces = Vec::new();
    if let Some(piece) = interval_piece(lo, (-u_min).min(hi)) {
        pieces.push(piece);
    }
    if lo <= 0.0 && 0.0 <= hi {
        pieces.push(QuadPiece::new(0.0, 0.0, 0.0, 0.0, 0.0)?);
    }
    if let Some(piece) = interval_piece(u_min.max(lo), hi) {
        pieces.push(piece);
    }
    PiecewiseQuadratic::new(pieces)
}

/// Fixed cost per nonzero trade: `c` away from zero, `0` at zero.
pub fn per_trade_cost(c: f64, bounds: (f64, f64)) -> Result<PiecewiseQuadratic, PwqError> {
    let (lo, hi) = bounds;
    let mut pieces = Vec::new();
    if let Some(piece) = interval_piece(lo, hi.min(0.0)) {
        pieces.push(QuadPiece { r: c, ..piece });
    }
    if lo <= 0.0 && 0.0 <= hi {
        pieces.push(QuadPiece::new(0.0, 0.0, 0.0, 0.0, 0.0)?);
    }
    if let Some(piece) = interval_piece(lo.max(0.0), hi) {
        pieces.push(QuadPiece { r: c, ..piece });
    }
    PiecewiseQuadratic::new(pieces)
}

/// Immediate tax liability of trading `u` in one asset, from its lots.
/// Piecewise affine, zero for `u >= 0`, domain `[-h_init, inf)`; sales
/// consume lots in the configured order, loss lots contributing negative
/// liability.
pub fn tax_liability(
    lots: &[TaxLot],
    h_init: f64,
    order: LotOrder,
) -> Result<PiecewiseQuadratic, PortfolioError> {
    let total: f64 = lots.iter().map(|lot| lot.weight).sum();
    if (total - h_init).abs() > 1e-9 {
        return Err(PortfolioError::LotMismatch(usize::MAX));
    }
    if lots.iter().any(|lot| lot.weight < 0.0 || lot.rate < 0.0) {
        return Err(PortfolioError::InvalidSpec("lot weights and rates must be nonnegative".into()));
    }
    let mut ordered: Vec<&TaxLot> = lots.iter().filter(|lot| lot.weight > 0.0).collect();
    if order == LotOrder::Hifo {
        ordered.sort_by(|a, b| b.basis_fraction.total_cmp(&a.basis_fraction));
    }
    // Walk sales from u = 0 leftward, then reverse into interval order.
    let count = ordered.len();
    let mut pieces: Vec<QuadPiece> = Vec::with_capacity(count + 1);
    let mut sold = 0.0; // cumulative weight sold
    let mut liability = 0.0; // cumulative tax at u = -sold
    for (j, lot) in ordered.into_iter().enumerate() {
        let slope = -lot.rate * (1.0 - lot.basis_fraction);
        // The deepest slice ends exactly at the position bound even when the
        // running weight sum rounds off by an ulp.
        let left = if j + 1 == count { h_init.max(sold) } else { sold + lot.weight };
        // Piece on [-left, -sold]; continuity pins r via L(-sold) = liability.
        let piece = QuadPiece::new(0.0, slope, liability + slope * sold, -left, -sold)
            .map_err(PortfolioError::Pwq)?;
        pieces.push(piece);
        liability += lot.rate * (1.0 - lot.basis_fraction) * lot.weight;
        sold = left;
    }
    pieces.reverse();
    pieces.push(QuadPiece::new(0.0, 0.0, 0.0, 0.0, f64::INFINITY).map_err(PortfolioError::Pwq)?);
    if pieces.len() == 1 && h_init > 0.0 {
        // No positive-weight lots but initial weight present.
        return Err(PortfolioError::LotMismatch(usize::MAX));
    }
    PiecewiseQuadratic::new(pieces).map_err(PortfolioError::Pwq)
}

/// Position limit indicator on `[h_lb, h_ub]`.
pub fn position_limits(h_lb: f64, h_ub: f64) -> Result<PiecewiseQuadratic, PwqError> {
    PiecewiseQuadratic::indicator(h_lb, h_ub)
}

/// Minimum holding size: hold nothing or at least `h_min`, within bounds.
pub fn min_holding_size(h_min: f64, bounds: (f64, f64)) -> Result<PiecewiseQuadratic, PwqError> {
    min_trade_size(h_min, bounds)
}

/// Fixed cost per nonzero holding.
pub fn per_asset_holding_cost(c: f64, bounds: (f64, f64)) -> Result<PiecewiseQuadratic, PwqError> {
    per_trade_cost(c, bounds)
}

/// Integer share constraint: weights must be whole multiples of the
/// per-share price, within `[0, h_ub]`.
pub fn integer_shares(price: f64, h_ub: f64) -> Result<PiecewiseQuadratic, PortfolioError> {
    if !(price > 0.0) || !h_ub.is_finite() || h_ub < 0.0 {
        return Err(PortfolioError::UnboundedInteger);
    }
    let count = (h_ub / price + 1e-9).floor() as usize;
    if count > 100_000 {
        return Err(PortfolioError::InvalidSpec("integer share grid too large".into()));
    }
    let pieces = (0..=count)
        .map(|j| QuadPiece::new(0.0, 0.0, 0.0, j as f64 * price, j as f64 * price))
        .collect::<Result<Vec<_>, _>>()
        .map_err(PortfolioError::Pwq)?;
    PiecewiseQuadratic::new(pieces).map_err(PortfolioError::Pwq)
}

/// Index-tracking expected returns `2 gamma_risk V h_bm`, computed
/// factor-wise without forming `V` densely.
pub fn benchmark_alpha(spec: &PortfolioSpec) -> Vec<f64> {
    let (l, k) = (spec.assets, spec.factors);
    // t = X' h_bm, s = Sigma t, alpha = 2 gamma (X s + D .* h_bm).
    let mut t = vec![0.0; k];
    for i in 0..l {
        for j in 0..k {
            t[j] += spec.exposures[i][j] * spec.h_bm[i];
        }
    }
    let mut s = vec![0.0; k];
    for j in 0..k {
        for jj in 0..k {
            s[j] += spec.factor_cov[j][jj] * t[jj];
        }
    }
    (0..l)
        .map(|i| {
            let mut xs = 0.0;
            for j in 0..k {
                xs += spec.exposures[i][j] * s[j];
            }
            2.0 * spec.gamma_risk * (xs + spec.idio_var[i] * spec.h_bm[i])
        })
        .collect()
}

/// A portfolio problem in SAP form plus the candidate recovery map.
pub struct BuiltPortfolio {
    pub problem: SapProblem,
    /// `C'X` block of the constraint matrix, row-major `factors x assets`;
    /// reused by the recovery map so the rebuilt `y` matches `A` exactly.
    cx: Vec<f64>,
    assets: usize,
    factors: usize,
}

impl BuiltPortfolio {
    /// Maps a full iterate to the feasible candidate `(h, 1 - 1'h, C'X h)`
    /// built from its `h` part.
    pub fn recover(&self, z: &[f64]) -> Vec<f64> {
        let (l, k) = (self.assets, self.factors);
        let h = &z[..l];
        let mut out = Vec::with_capacity(l + 1 + k);
        out.extend_from_slice(h);
        let sum: f64 = h.iter().sum();
        out.push(1.0 - sum);
        for j in 0..k {
            let row = &self.cx[j * l..(j + 1) * l];
            let mut y = 0.0;
            for (c, hv) in row.iter().zip(h) {
                y += c * hv;
            }
            out.push(y);
        }
        out
    }

    /// Splits a full solution vector into `(h, c, y)`.
    pub fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], f64, &'x [f64]) {
        (&x[..self.assets], x[self.assets], &x[self.assets + 1..])
    }
}

/// Assembles the spec into separable-affine form.
pub fn build_sap(spec: &PortfolioSpec) -> Result<BuiltPortfolio, PortfolioError> {
    spec.validate()?;
    let (l, k) = (spec.assets, spec.factors);
    let n = l + 1 + k;
    let m = k + 1;

    // Cholesky factor C with C C' = Sigma.
    let sigma = nalgebra::DMatrix::from_fn(k, k, |i, j| spec.factor_cov[i][j]);
    let chol = nalgebra::Cholesky::new(sigma).ok_or(PortfolioError::CholeskyFailure)?;
    let c_low = chol.l();
    // cx = C' X', factors x assets.
    let mut cx = vec![0.0; k * l];
    for j in 0..k {
        for i in 0..l {
            let mut acc = 0.0;
            for jj in j..k {
                // (C')_{j,jj} = C_{jj,j}, lower-triangular support.
                acc += c_low[(jj, j)] * spec.exposures[i][jj];
            }
            cx[j * l + i] = acc;
        }
    }

    // A = [[C'X, 0, -I], [1', 1, 0]], b = (0, 1).
    let mut values = vec![0.0; m * n];
    for j in 0..k {
        values[j * n..j * n + l].copy_from_slice(&cx[j * l..(j + 1) * l]);
        values[j * n + l + 1 + j] = -1.0;
    }
    let last = (m - 1) * n;
    for i in 0..=l {
        values[last + i] = 1.0;
    }
    let a = MatrixData::dense(m, n, values)?;
    let mut b = vec![0.0; m];
    b[m - 1] = 1.0;

    let alpha = match &spec.alpha {
        AlphaSpec::Vector(v) => v.clone(),
        AlphaSpec::Benchmark { .. } => benchmark_alpha(spec),
    };

    let mut f: Vec<PiecewiseQuadratic> = Vec::with_capacity(n);
    for i in 0..l {
        f.push(asset_component(spec, i, alpha[i]).map_err(|e| match e {
            PortfolioError::Pwq(PwqError::EmptyDomain) => PortfolioError::EmptyDomain(i),
            PortfolioError::LotMismatch(_) => PortfolioError::LotMismatch(i),
            other => other,
        })?);
    }
    f.push(PiecewiseQuadratic::indicator(1.0 - spec.eta_ub, 1.0 - spec.eta_lb)?);
    for _ in 0..k {
        f.push(PiecewiseQuadratic::quadratic(spec.gamma_risk.max(f64::MIN_POSITIVE), 0.0, 0.0)?);
    }

    let problem = SapProblem::new(a, b, f)?;
    Ok(BuiltPortfolio { problem, cx, assets: l, factors: k })
}

/// Separable objective component for one asset: negated return, specific
/// risk, trade costs in `h - h_init`, and holding costs.
fn asset_component(
    spec: &PortfolioSpec,
    i: usize,
    alpha_i: f64,
) -> Result<PiecewiseQuadratic, PortfolioError> {
    let cost = &spec.costs[i];
    let h_init = spec.h_init[i];
    let mut f = PiecewiseQuadratic::quadratic(spec.gamma_risk * spec.idio_var[i], -alpha_i, 0.0)?;

    // Trade-cost terms, built in trade space then shifted to h.
    if spec.gamma_trd > 0.0 {
        let mut trade: Option<PiecewiseQuadratic> = None;
        let push = |term: PiecewiseQuadratic,
                    acc: &mut Option<PiecewiseQuadratic>|
         -> Result<(), PwqError> {
            *acc = Some(match acc.take() {
                None => term,
                Some(existing) => existing.add(&term)?,
            });
            Ok(())
        };
        if cost.spread > 0.0 && spec.gamma_sprd > 0.0 {
            push(spread_cost(cost.spread * spec.gamma_sprd)?, &mut trade)?;
        }
        if let Some(impact) = &cost.impact {
            let (approx, _) = impact_cost_approx(impact.d, impact.u_max, impact.segments)?;
            push(approx, &mut trade)?;
        }
        if let Some(u_min) = cost.min_trade {
            push(min_trade_size(u_min, (f64::NEG_INFINITY, f64::INFINITY))?, &mut trade)?;
        }
        if let Some(c_trd) = cost.per_trade {
            push(per_trade_cost(c_trd, (f64::NEG_INFINITY, f64::INFINITY))?, &mut trade)?;
        }
        if spec.gamma_tax > 0.0 && !cost.lots.is_empty() {
            let liability = tax_liability(&cost.lots, h_init, spec.lot_order)?;
            push(liability.scale_values(spec.gamma_tax)?, &mut trade)?;
        }
        if let Some(trade) = trade {
            let scaled =
                if spec.gamma_trd != 1.0 { trade.scale_values(spec.gamma_trd)? } else { trade };
            // phi(h - h_init): substitute u = h - h_init.
            f = f.add(&scaled.shift_scale_arg(1.0, -h_init)?)?;
        }
    }

    // Holding-cost terms in h directly.
    if cost.position_lb.is_finite() || cost.position_ub.is_finite() {
        f = f.add(&position_limits(cost.position_lb, cost.position_ub)?)?;
    }
    if spec.gamma_hld > 0.0 {
        if let Some(h_min) = cost.min_holding {
            f = f.add(&min_holding_size(h_min, (f64::NEG_INFINITY, f64::INFINITY))?)?;
        }
        if let Some(c_hld) = cost.per_asset_hold {
            let card = per_asset_holding_cost(
                c_hld * spec.gamma_hld,
                (f64::NEG_INFINITY, f64::INFINITY),
            )?;
            f = f.add(&card)?;
        }
    }
    if let Some(price) = cost.integer_shares {
        let ub = if cost.position_ub.is_finite() {
            cost.position_ub
        } else {
            return Err(PortfolioError::UnboundedInteger);
        };
        f = f.add(&integer_shares(price, ub)?)?;
    }
    Ok(f)
}

/// Reference scaling for portfolio problems. The reference magnitudes
/// (100 for holdings and exposures, 3 for cash) act as per-variable step
/// weights: a weight of rho on one variable is equivalent to the variable
/// scale `e = 1 / sqrt(rho)`, since the prox of `f(e x)` at unit step
/// matches the prox of `f` at step `1 / e^2`. Mapped literally onto the
/// variable scales instead, those magnitudes stall the solver. The
/// constraint scales are uniform; they relabel the constraint rows without
/// changing the iterate path.
pub fn default_scaling(assets: usize, factors: usize) -> Scaling {
    let mut e = vec![0.1; assets];
    e.push(1.0 / 3.0f64.sqrt());
    e.extend(std::iter::repeat(0.1).take(factors));
    let d = vec![100.0; factors + 1];
    Scaling::new(d, e).expect("positive scales")
}

/// Deterministic synthetic rebalancing instance: factor exposures, a
/// positive-definite factor covariance, benchmark weights on a simplex, and
/// dispersed-basis tax lots, with the reference tradeoff parameters.
pub fn synthesize_instance(seed: u64, l: usize, k: usize, lots_per_asset: usize) -> PortfolioSpec {
    assert!(l >= 1, "need at least one asset");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Benchmark weights: normalized exponentials.
    let mut h_bm: Vec<f64> = (0..l).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let total: f64 = h_bm.iter().sum();
    for w in &mut h_bm {
        *w /= total;
    }

    // Initial holdings: a low-turnover perturbation of the benchmark with a
    // few names missing, renormalized to 98.5% invested.
    let mut h_init: Vec<f64> = h_bm
        .iter()
        .map(|w| if rng.gen::<f64>() < 0.97 { *w * rng.gen_range(0.9..1.1) } else { 0.0 })
        .collect();
    let held: f64 = h_init.iter().sum();
    if held > 0.0 {
        for w in &mut h_init {
            *w *= 0.985 / held;
        }
    }

    let exposures: Vec<Vec<f64>> = (0..l)
        .map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();

    // Factor covariance: monthly-scale variances, well conditioned.
    let w: Vec<Vec<f64>> = (0..k).map(|_| (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let mut factor_cov = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut acc = 0.0;
            for t in 0..k {
                acc += w[i][t] * w[j][t];
            }
            factor_cov[i][j] = 1.6e-3 * (0.5 * acc / k.max(1) as f64 + if i == j { 0.5 } else { 0.0 });
        }
    }

    let idio_var: Vec<f64> = (0..l).map(|_| rng.gen_range(5e-4..4e-3)).collect();

    let mut costs = Vec::with_capacity(l);
    for i in 0..l {
        let mut lots = Vec::new();
        if h_init[i] > 0.0 && lots_per_asset > 0 {
            let mut parts: Vec<f64> = (0..lots_per_asset).map(|_| rng.gen_range(0.2..1.0)).collect();
            let psum: f64 = parts.iter().sum();
            for part in &mut parts {
                *part *= h_init[i] / psum;
            }
            // Make the weights sum exactly to h_init.
            let correction: f64 = h_init[i] - parts.iter().sum::<f64>();
            parts[0] += correction;
            for part in parts {
                lots.push(TaxLot {
                    weight: part,
                    basis_fraction: rng.gen_range(0.8..1.2),
                    rate: if rng.gen::<f64>() < 0.5 { 0.25 } else { 0.40 },
                });
            }
        }
        costs.push(AssetCostConfig {
            spread: rng.gen_range(2e-4..1e-3),
            impact: None,
            min_trade: None,
            per_trade: Some(3e-5),
            lots,
            position_lb: 0.0,
            position_ub: (3.0 * h_bm[i]).max(h_init[i]),
            min_holding: None,
            per_asset_hold: Some(3e-5),
            integer_shares: None,
        });
    }

    PortfolioSpec {
        assets: l,
        factors: k,
        alpha: AlphaSpec::Benchmark { benchmark_mode: true },
        exposures,
        factor_cov,
        idio_var,
        h_init,
        h_bm,
        gamma_risk: 100.0,
        gamma_trd: 1.0,
        gamma_hld: 1.0,
        gamma_sprd: 1.0,
        gamma_tax: 1.0,
        eta_lb: 0.98,
        eta_ub: 0.99,
        costs,
        lot_order: LotOrder::Hifo,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::envelope_oracle;

    #[test]
    fn spread_cost_values() {
        let f = spread_cost(0.01).unwrap();
        assert!((f.eval(0.5) - 0.005).abs() < 1e-15);
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(-0.5), f.eval(0.5));
    }

    #[test]
    fn impact_approx_is_exact_at_knots_and_tight() {
        let (f, err) = impact_cost_approx(1.0, 1.0, 16).unwrap();
        for s in 0..=16 {
            let u = s as f64 / 16.0;
            assert!((f.eval(u) - u.powf(1.5)).abs() < 1e-12, "knot {u}");
        }
        assert!(err < 1e-3, "reported error {err}");
        let (zero, zerr) = impact_cost_approx(0.0, 1.0, 4).unwrap();
        assert_eq!(zero.eval(0.3), 0.0);
        assert_eq!(zerr, 0.0);
    }

    #[test]
    fn min_trade_size_shape() {
        let f = min_trade_size(0.1, (-1.0, 1.0)).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.05), f64::INFINITY);
        assert_eq!(f.eval(-0.1), 0.0);
        assert_eq!(f.eval(0.5), 0.0);
    }

    #[test]
    fn per_trade_cost_shape_and_envelope() {
        let c = 0.2;
        let f = per_trade_cost(c, (-1.0, 1.0)).unwrap();
        assert_eq!(f.eval(0.0), 0.0);
        assert_eq!(f.eval(0.3), c);
        // Envelope over [-M, M] is the tent c|u|/M.
        let env = f.envelope().unwrap();
        let hull = envelope_oracle(&f, -1.0, 1.0, 1e-3);
        for i in 0..=100 {
            let u = -1.0 + 0.02 * i as f64;
            assert!((env.eval(u) - c * u.abs()).abs() < 1e-9, "u={u}");
            assert!((env.eval(u) - hull.value(u)).abs() < 2e-3);
        }
    }

    #[test]
    fn tax_liability_single_lot() {
        let lots = [TaxLot { weight: 0.10, basis_fraction: 0.8, rate: 0.25 }];
        let f = tax_liability(&lots, 0.10, LotOrder::Hifo).unwrap();
        assert!((f.eval(-0.05) - 0.0025).abs() < 1e-12);
        assert_eq!(f.eval(0.02), 0.0);
        assert_eq!(f.eval(-0.2), f64::INFINITY); // beyond the position
    }

    #[test]
    fn tax_liability_basis_one_is_free() {
        let lots = [TaxLot { weight: 0.3, basis_fraction: 1.0, rate: 0.4 }];
        let f = tax_liability(&lots, 0.3, LotOrder::Hifo).unwrap();
        for u in [-0.3, -0.2, -0.1, 0.0] {
            assert!(f.eval(u).abs() < 1e-15);
        }
    }

    #[test]
    fn tax_liability_hifo_sells_loss_lot_first() {
        let lots = [
            TaxLot { weight: 0.1, basis_fraction: 0.5, rate: 0.25 },
            TaxLot { weight: 0.1, basis_fraction: 1.2, rate: 0.25 },
        ];
        let f = tax_liability(&lots, 0.2, LotOrder::Hifo).unwrap();
        // First slice sold is the basis-1.2 lot: negative liability.
        let v1 = f.eval(-0.1);
        assert!((v1 - 0.25 * (1.0 - 1.2) * 0.1).abs() < 1e-12, "loss slice {v1}");
        // Selling everything adds the gain lot's tax.
        let v2 = f.eval(-0.2);
        assert!((v2 - (v1 + 0.25 * 0.5 * 0.1)).abs() < 1e-12);
        // The function is nonconvex (the slope falls at u = 0) so the
        // envelope dips strictly below it somewhere; the dip value carries
        // over past the kink.
        assert!(!f.is_convex());
        let env = f.envelope().unwrap();
        assert!(env.eval(0.0) < -1e-6);
        assert!((env.eval(-0.1) - v1).abs() < 1e-12);
    }

    #[test]
    fn tax_liability_convex_when_gains_sold_in_decreasing_basis_order() {
        let lots = [
            TaxLot { weight: 0.1, basis_fraction: 0.9, rate: 0.25 },
            TaxLot { weight: 0.1, basis_fraction: 0.6, rate: 0.25 },
        ];
        let f = tax_liability(&lots, 0.2, LotOrder::Hifo).unwrap();
        assert!(f.is_convex());
        assert_eq!(f.envelope().unwrap(), f);
    }

    #[test]
    fn tax_liability_validates_lot_totals() {
        let lots = [TaxLot { weight: 0.1, basis_fraction: 0.8, rate: 0.25 }];
        assert!(matches!(
            tax_liability(&lots, 0.2, LotOrder::Hifo),
            Err(PortfolioError::LotMismatch(_))
        ));
    }

    #[test]
    fn position_and_holding_constructors() {
        let f = position_limits(-0.1, 0.4).unwrap();
        assert_eq!(f.eval(0.2), 0.0);
        assert_eq!(f.eval(0.5), f64::INFINITY);
        let g = position_limits(0.3, 0.3).unwrap();
        assert_eq!(g.eval(0.3), 0.0);

        let h = min_holding_size(0.05, (0.0, 1.0)).unwrap();
        assert_eq!(h.eval(0.0), 0.0);
        assert_eq!(h.eval(0.02), f64::INFINITY);
        assert_eq!(h.eval(0.05), 0.0);
        // Long-only bounds drop the negative branch.
        assert_eq!(h.eval(-0.05), f64::INFINITY);
    }

    #[test]
    fn integer_share_grid() {
        let f = integer_shares(0.3, 1.0).unwrap();
        assert_eq!(f.len(), 4); // 0, 0.3, 0.6, 0.9
        assert_eq!(f.eval(0.6), 0.0);
        assert_eq!(f.eval(0.5), f64::INFINITY);
        let g = integer_shares(2.0, 1.0).unwrap();
        assert_eq!(g.len(), 1);
        assert!(matches!(
            integer_shares(0.3, f64::INFINITY),
            Err(PortfolioError::UnboundedInteger)
        ));
    }

    #[test]
    fn benchmark_alpha_matches_dense_product() {
        let spec = synthesize_instance(5, 12, 3, 2);
        let alpha = benchmark_alpha(&spec);
        // Dense oracle: V = X Sigma X' + diag(D).
        let (l, k) = (spec.assets, spec.factors);
        for i in 0..l {
            let mut vh = spec.idio_var[i] * spec.h_bm[i];
            for j in 0..l {
                let mut xsx = 0.0;
                for a in 0..k {
                    for b in 0..k {
                        xsx += spec.exposures[i][a] * spec.factor_cov[a][b] * spec.exposures[j][b];
                    }
                }
                vh += xsx * spec.h_bm[j];
            }
            let expected = 2.0 * spec.gamma_risk * vh;
            assert!((alpha[i] - expected).abs() < 1e-10 * (1.0 + expected.abs()), "asset {i}");
        }
        let mut zero_bm = spec.clone();
        zero_bm.h_bm = vec![0.0; l];
        assert!(benchmark_alpha(&zero_bm).iter().all(|a| *a == 0.0));
    }

    #[test]
    fn build_sap_dimensions() {
        let spec = synthesize_instance(1, 2, 1, 1);
        let built = build_sap(&spec).unwrap();
        assert_eq!(built.problem.num_constraints(), 2);
        assert_eq!(built.problem.num_vars(), 4);
        assert_eq!(built.problem.b(), &[0.0, 1.0]);
    }

    #[test]
    fn constraint_matrix_factors_and_projects_accurately() {
        let spec = synthesize_instance(4, 5, 2, 1);
        let built = build_sap(&spec).unwrap();
        let factor = crate::kkt::factor(built.problem.a()).unwrap();
        let n = built.problem.num_vars();
        let v: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 - 3.0)).collect();
        let z = factor.project_affine(&v, built.problem.b());
        let r = built.problem.residual_norm(&z);
        assert!(r <= 1e-10, "projection residual {r}");
    }

    #[test]
    fn recovery_hook_is_affine_feasible() {
        let spec = synthesize_instance(3, 8, 2, 2);
        let built = build_sap(&spec).unwrap();
        let mut z = vec![0.0; built.problem.num_vars()];
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = 0.01 + 0.003 * i as f64;
        }
        let cand = built.recover(&z);
        let r = built.problem.residual_norm(&cand);
        assert!(r < 1e-14, "residual {r}");
    }

    #[test]
    fn sap_objective_equals_negated_utility() {
        let spec = synthesize_instance(7, 6, 2, 2);
        let built = build_sap(&spec).unwrap();
        let alpha = benchmark_alpha(&spec);
        let (l, k) = (spec.assets, spec.factors);
        // In-domain h: hold either zero or something within the box, and
        // keep the invested fraction inside the eta window.
        let mut h: Vec<f64> = spec.h_init.clone();
        for (i, hi) in h.iter_mut().enumerate() {
            let ub = spec.costs[i].position_ub;
            *hi = (*hi * 1.1).min(ub).max(0.0);
        }
        let sum: f64 = h.iter().sum();
        for hi in &mut h {
            *hi *= 0.985 / sum;
        }
        let x = built.recover(&h);
        let sap_obj = built.problem.objective(&x);

        // Direct negated utility with the exposure substitution.
        let mut utility = 0.0;
        for i in 0..l {
            utility += alpha[i] * h[i];
        }
        let mut risk = 0.0;
        let mut t = vec![0.0; k];
        for i in 0..l {
            for j in 0..k {
                t[j] += spec.exposures[i][j] * h[i];
            }
        }
        for a in 0..k {
            for b in 0..k {
                risk += t[a] * spec.factor_cov[a][b] * t[b];
            }
        }
        for i in 0..l {
            risk += spec.idio_var[i] * h[i] * h[i];
        }
        let mut costs = 0.0;
        for i in 0..l {
            let u = h[i] - spec.h_init[i];
            costs += spec.gamma_sprd * spec.costs[i].spread * u.abs();
            if u != 0.0 {
                costs += spec.costs[i].per_trade.unwrap_or(0.0);
            }
            if h[i] != 0.0 {
                costs += spec.costs[i].per_asset_hold.unwrap_or(0.0);
            }
            if !spec.costs[i].lots.is_empty() {
                let liability =
                    tax_liability(&spec.costs[i].lots, spec.h_init[i], spec.lot_order).unwrap();
                costs += spec.gamma_tax * liability.eval(u);
            }
        }
        let negated = -(utility - spec.gamma_risk * risk - costs);
        assert!(
            (sap_obj - negated).abs() <= 1e-8 * (1.0 + negated.abs()),
            "sap {sap_obj} vs direct {negated}"
        );
    }

    #[test]
    fn synthesize_is_deterministic() {
        let a = synthesize_instance(42, 10, 3, 2);
        let b = synthesize_instance(42, 10, 3, 2);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let c = synthesize_instance(43, 10, 3, 2);
        assert_ne!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn synthesized_defaults_match_reference_parameters() {
        let spec = synthesize_instance(0, 5, 2, 1);
        assert_eq!(spec.gamma_risk, 100.0);
        assert_eq!(spec.gamma_tax, 1.0);
        assert_eq!((spec.eta_lb, spec.eta_ub), (0.98, 0.99));
        for cost in &spec.costs {
            assert_eq!(cost.per_trade, Some(3e-5));
            assert_eq!(cost.per_asset_hold, Some(3e-5));
        }
    }

    #[test]
    fn synthesized_scale_dimensions() {
        let spec = synthesize_instance(1, 1000, 100, 2);
        let built = build_sap(&spec).unwrap();
        assert_eq!(built.problem.num_vars(), 1101);
        assert_eq!(built.problem.num_constraints(), 101);
    }

    #[test]
    fn initial_point_is_finite_for_synthesized_specs() {
        let spec = synthesize_instance(9, 15, 3, 2);
        let built = build_sap(&spec).unwrap();
        let x = built.recover(&{
            let mut z = spec.h_init.clone();
            z.resize(built.problem.num_vars(), 0.0);
            z
        });
        let obj = built.problem.objective(&x);
        assert!(obj.is_finite(), "objective at initial holdings: {obj}");
    }
}
