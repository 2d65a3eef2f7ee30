//! Firm parameters in barrier-relative coordinates, calibration from market
//! data, and asset correlation specifications.
//!
//! With `z = log(V/V0) - lambda t` the default barrier `d exp(lambda t)` becomes
//! the constant level `z_d = log(d/V0) < 0` and `z` is an arithmetic Brownian
//! motion with drift `eta = mu - sigma^2/2 - lambda - q` and volatility `sigma`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Real, SquareMatrix};

/// A rate that is either the (unspecified) risk-free rate or a number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Rate<F> {
    RiskFree,
    Value(F),
}

/// Asset drift used for the survival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftMode<F> {
    /// `mu = r`; pricing measure.
    RiskNeutral,
    /// Explicit real-world asset drift.
    RealWorld(F),
}

impl<F> DriftMode<F> {
    fn as_rate(self) -> Rate<F> {
        match self {
            DriftMode::RiskNeutral => Rate::RiskFree,
            DriftMode::RealWorld(mu) => Rate::Value(mu),
        }
    }
}

/// Raw market data for one firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketInputs<F> {
    pub ticker: String,
    /// Equity market capitalisation `S0`.
    pub market_cap: F,
    /// Present value of total debt `D0`.
    pub debt_pv: F,
    /// Annualised equity volatility.
    pub equity_vol: F,
    /// Dividend yield with respect to the asset value.
    pub dividend_yield: F,
    pub barrier_growth: Rate<F>,
    pub drift_mode: DriftMode<F>,
}

impl<F: Real> MarketInputs<F> {
    /// Risk-neutral inputs with the barrier growing at the risk-free rate.
    pub fn risk_neutral(
        ticker: impl Into<String>,
        market_cap: F,
        debt_pv: F,
        equity_vol: F,
        dividend_yield: F,
    ) -> Self {
        Self {
            ticker: ticker.into(),
            market_cap,
            debt_pv,
            equity_vol,
            dividend_yield,
            barrier_growth: Rate::RiskFree,
            drift_mode: DriftMode::RiskNeutral,
        }
    }
}

/// Per-firm model parameters after the change of variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirmParams<F> {
    ticker: String,
    sigma: F,
    d_over_v0: F,
    q: F,
    mu: Rate<F>,
    lambda: Rate<F>,
    z_d: F,
    eta: F,
}

impl<F: Real> FirmParams<F> {
    /// Risk-neutral firm whose barrier grows at the risk-free rate. The
    /// risk-free rate then cancels out of the drift.
    pub fn risk_neutral(ticker: impl Into<String>, d_over_v0: F, sigma: F, q: F) -> Result<Self> {
        Self::new(ticker, d_over_v0, sigma, q, Rate::RiskFree, Rate::RiskFree, None)
    }

    /// General constructor. `risk_free` is only consulted when exactly one of
    /// `mu` and `lambda` is [`Rate::RiskFree`].
    pub fn new(
        ticker: impl Into<String>,
        d_over_v0: F,
        sigma: F,
        q: F,
        mu: Rate<F>,
        lambda: Rate<F>,
        risk_free: Option<F>,
    ) -> Result<Self> {
        let ticker = ticker.into();
        let fail = |reason: String| Error::Calibration {
            ticker: ticker.clone(),
            reason,
        };
        if !(d_over_v0 > F::zero()) {
            return Err(fail(format!(
                "barrier fraction d/V0 must be positive, got {d_over_v0}"
            )));
        }
        if !(d_over_v0 < F::one()) {
            return Err(fail(format!(
                "firm starts at/below barrier (d/V0 = {d_over_v0})"
            )));
        }
        if !(sigma > F::zero() && sigma.is_finite()) {
            return Err(fail(format!("asset volatility must be positive, got {sigma}")));
        }
        if !q.is_finite() {
            return Err(fail("dividend yield must be finite".into()));
        }
        let mu_minus_lambda = match (mu, lambda) {
            (Rate::RiskFree, Rate::RiskFree) => F::zero(),
            (Rate::Value(m), Rate::Value(l)) => m - l,
            (Rate::RiskFree, Rate::Value(l)) => match risk_free {
                Some(r) => r - l,
                None => return Err(fail("risk-free rate required when only mu is r".into())),
            },
            (Rate::Value(m), Rate::RiskFree) => match risk_free {
                Some(r) => m - r,
                None => {
                    return Err(fail("risk-free rate required when only lambda is r".into()))
                }
            },
        };
        let eta = mu_minus_lambda - sigma * sigma * F::half() - q;
        if !eta.is_finite() {
            return Err(fail("drift is not finite".into()));
        }
        Ok(Self {
            ticker,
            sigma,
            d_over_v0,
            q,
            mu,
            lambda,
            z_d: d_over_v0.ln(),
            eta,
        })
    }

    pub fn ticker(&self) -> &str {
        &self.ticker
    }

    pub fn sigma(&self) -> F {
        self.sigma
    }

    pub fn d_over_v0(&self) -> F {
        self.d_over_v0
    }

    pub fn q(&self) -> F {
        self.q
    }

    pub fn mu(&self) -> Rate<F> {
        self.mu
    }

    pub fn lambda(&self) -> Rate<F> {
        self.lambda
    }

    /// Barrier in z-coordinates, `log(d/V0) < 0`.
    pub fn z_d(&self) -> F {
        self.z_d
    }

    /// Drift of z.
    pub fn eta(&self) -> F {
        self.eta
    }

    /// Same firm with a different ticker.
    pub fn renamed(mut self, ticker: impl Into<String>) -> Self {
        self.ticker = ticker.into();
        self
    }

    /// Whether two firms share every parameter that enters the model.
    pub fn same_dynamics(&self, other: &Self) -> bool {
        self.sigma == other.sigma && self.z_d == other.z_d && self.eta == other.eta
    }
}

/// Maps market data to model parameters: `V0 = S0 + D0`, `d/V0 = D0/V0` and
/// `sigma = (S0/V0) sigma_S`.
pub fn calibrate<F: Real>(m: &MarketInputs<F>) -> Result<FirmParams<F>> {
    let fail = |reason: &str| Error::Calibration {
        ticker: m.ticker.clone(),
        reason: reason.to_string(),
    };
    if !(m.market_cap > F::zero() && m.market_cap.is_finite()) {
        return Err(fail("market cap must be positive"));
    }
    if !(m.debt_pv >= F::zero() && m.debt_pv.is_finite()) {
        return Err(fail("debt must be non-negative"));
    }
    if !(m.equity_vol > F::zero() && m.equity_vol.is_finite()) {
        return Err(fail("equity volatility must be positive"));
    }
    if !(m.dividend_yield >= F::zero()) {
        return Err(fail("dividend yield must be non-negative"));
    }
    if m.debt_pv == F::zero() {
        return Err(fail("zero debt gives no default barrier"));
    }
    let v0 = m.market_cap + m.debt_pv;
    let d_over_v0 = m.debt_pv / v0;
    let sigma = m.market_cap / v0 * m.equity_vol;
    FirmParams::new(
        m.ticker.clone(),
        d_over_v0,
        sigma,
        m.dividend_yield,
        m.drift_mode.as_rate(),
        m.barrier_growth,
        None,
    )
}

/// A scalar correlation as a function of time (years).
pub type CorrelationFn<F> = Arc<dyn Fn(F) -> F + Send + Sync>;

/// Asset correlation structure.
#[derive(Clone)]
pub enum CorrelationSpec<F> {
    Matrix(SquareMatrix<F>),
    Equicorrelated(F),
    /// Equicorrelated with a time-varying common value.
    TimeDependent(CorrelationFn<F>),
}

impl<F: fmt::Debug> fmt::Debug for CorrelationSpec<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationSpec::Matrix(m) => f.debug_tuple("Matrix").field(m).finish(),
            CorrelationSpec::Equicorrelated(x) => f.debug_tuple("Equicorrelated").field(x).finish(),
            CorrelationSpec::TimeDependent(_) => f.write_str("TimeDependent(<fn>)"),
        }
    }
}

/// Window (years) on which a time-dependent correlation is checked when no
/// horizon is supplied.
pub const DEFAULT_VALIDATION_WINDOW: f64 = 30.0;
const VALIDATION_SAMPLES: usize = 301;

impl<F: Real> CorrelationSpec<F> {
    pub fn time_dependent(f: impl Fn(F) -> F + Send + Sync + 'static) -> Self {
        CorrelationSpec::TimeDependent(Arc::new(f))
    }

    /// `xi_ij(t)` for `i != j`; 1 on the diagonal.
    pub fn pair(&self, i: usize, j: usize, t: F) -> F {
        if i == j {
            return F::one();
        }
        match self {
            CorrelationSpec::Matrix(m) => m[(i, j)],
            CorrelationSpec::Equicorrelated(x) => *x,
            CorrelationSpec::TimeDependent(f) => f(t),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, CorrelationSpec::TimeDependent(_))
    }

    /// Full matrix at time `t`.
    pub fn matrix_at(&self, n: usize, t: F) -> SquareMatrix<F> {
        match self {
            CorrelationSpec::Matrix(m) => m.clone(),
            _ => SquareMatrix::equicorrelated(n, self.pair(0, 1, t)),
        }
    }

    /// Multiplies every off-diagonal correlation by `c`.
    pub fn scaled(&self, c: F) -> Self {
        match self {
            CorrelationSpec::Matrix(m) => {
                let n = m.dim();
                let mut out = m.clone();
                for i in 0..n {
                    for j in 0..n {
                        if i != j {
                            out[(i, j)] = m[(i, j)] * c;
                        }
                    }
                }
                CorrelationSpec::Matrix(out)
            }
            CorrelationSpec::Equicorrelated(x) => CorrelationSpec::Equicorrelated(*x * c),
            CorrelationSpec::TimeDependent(f) => {
                let f = f.clone();
                CorrelationSpec::TimeDependent(Arc::new(move |t| f(t) * c))
            }
        }
    }

    /// Restriction to the firms at `indices`.
    pub fn subset(&self, indices: &[usize]) -> Self {
        match self {
            CorrelationSpec::Matrix(m) => {
                let k = indices.len();
                let mut out = SquareMatrix::zeros(k);
                for (a, &i) in indices.iter().enumerate() {
                    for (b, &j) in indices.iter().enumerate() {
                        out[(a, b)] = m[(i, j)];
                    }
                }
                CorrelationSpec::Matrix(out)
            }
            other => other.clone(),
        }
    }
}

/// A correlation specification checked against a firm count.
#[derive(Debug, Clone)]
pub struct ValidatedCorrelation<F> {
    spec: CorrelationSpec<F>,
    n: usize,
}

impl<F: Real> ValidatedCorrelation<F> {
    pub fn spec(&self) -> &CorrelationSpec<F> {
        &self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pair(&self, i: usize, j: usize, t: F) -> F {
        self.spec.pair(i, j, t)
    }

    /// Restriction to a subset of firms; always valid when the parent is.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            spec: self.spec.subset(indices),
            n: indices.len(),
        }
    }

    /// Re-checks a time-dependent correlation on `[0, horizon]`.
    pub fn check_horizon(&self, horizon: F) -> Result<()> {
        if let CorrelationSpec::TimeDependent(f) = &self.spec {
            check_time_dependent(f.as_ref(), self.n, horizon)?;
        }
        Ok(())
    }
}

/// Lower equicorrelation bound `-1/(n-1)` for `n >= 2`.
pub fn equicorrelation_lower_bound<F: Real>(n: usize) -> F {
    if n < 2 {
        F::neg_infinity()
    } else {
        -F::one() / F::from_usize_lossy(n - 1)
    }
}

fn check_equicorrelation<F: Real>(xi: F, n: usize) -> Result<()> {
    let lo = equicorrelation_lower_bound::<F>(n);
    if !xi.is_finite() || xi < lo || xi >= F::one() {
        return Err(Error::Correlation(format!(
            "equicorrelation {xi} outside [{lo}, 1) for {n} firms"
        )));
    }
    Ok(())
}

fn check_time_dependent<F: Real>(f: &(dyn Fn(F) -> F + Send + Sync), n: usize, horizon: F) -> Result<()> {
    for k in 0..VALIDATION_SAMPLES {
        let t = horizon * F::from_usize_lossy(k) / F::from_usize_lossy(VALIDATION_SAMPLES - 1);
        check_equicorrelation(f(t), n).map_err(|e| match e {
            Error::Correlation(msg) => Error::Correlation(format!("at t = {t}: {msg}")),
            other => other,
        })?;
    }
    Ok(())
}

/// Checks a correlation specification for `n` firms: a matrix must be square,
/// symmetric with unit diagonal and positive semi-definite; an equicorrelation
/// must lie in `[-1/(n-1), 1)`, at every sampled time for the time-dependent
/// variant.
pub fn validate_correlation<F: Real>(spec: &CorrelationSpec<F>, n: usize) -> Result<ValidatedCorrelation<F>> {
    match spec {
        CorrelationSpec::Matrix(m) => {
            if m.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: m.dim(),
                });
            }
            let tol = F::lit(1e-12);
            for i in 0..n {
                if (m[(i, i)] - F::one()).abs() > tol {
                    return Err(Error::Correlation(format!(
                        "diagonal entry {i} is {} (must be 1)",
                        m[(i, i)]
                    )));
                }
                for j in 0..n {
                    if !m[(i, j)].is_finite() || m[(i, j)].abs() > F::one() {
                        return Err(Error::Correlation(format!(
                            "entry ({i}, {j}) = {} outside [-1, 1]",
                            m[(i, j)]
                        )));
                    }
                }
            }
            if m.max_asymmetry() > tol {
                return Err(Error::Correlation("matrix is not symmetric".into()));
            }
            // The largest eigenvalue of a correlation matrix is at most n.
            let psd_tol = F::lit(1e-10) * F::from_usize_lossy(n.max(1));
            if m.cholesky_semidefinite(psd_tol).is_none() {
                return Err(Error::Correlation(
                    "matrix is not positive semi-definite".into(),
                ));
            }
        }
        CorrelationSpec::Equicorrelated(xi) => check_equicorrelation(*xi, n)?,
        CorrelationSpec::TimeDependent(f) => {
            check_time_dependent(f.as_ref(), n, F::lit(DEFAULT_VALIDATION_WINDOW))?
        }
    }
    Ok(ValidatedCorrelation {
        spec: spec.clone(),
        n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wy_drift() {
        let wy = FirmParams::<f64>::risk_neutral("WY", 0.47, 0.165, 0.014).unwrap();
        assert!((wy.eta() - (-0.02761)).abs() < 1e-5);
        assert!(wy.z_d() < 0.0);
    }

    #[test]
    fn calibrate_arithmetic() {
        let m = MarketInputs::<f64>::risk_neutral("X", 100.0, 100.0, 0.4, 0.0);
        let f = calibrate(&m).unwrap();
        assert!((f.sigma() - 0.2).abs() < 1e-15);
        assert!((f.d_over_v0() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn calibrate_rejects_zero_debt_and_bad_inputs() {
        let m = MarketInputs::risk_neutral("X", 100.0, 0.0, 0.4, 0.0);
        assert!(matches!(calibrate(&m), Err(Error::Calibration { .. })));
        let m = MarketInputs::risk_neutral("X", -1.0, 10.0, 0.4, 0.0);
        assert!(calibrate(&m).is_err());
        let m = MarketInputs::risk_neutral("X", 10.0, 10.0, 0.0, 0.0);
        assert!(calibrate(&m).is_err());
    }

    #[test]
    fn barrier_at_or_above_start_is_rejected() {
        let e = FirmParams::risk_neutral("X", 1.0, 0.2, 0.0).unwrap_err();
        assert!(e.to_string().contains("at/below barrier"));
        assert!(FirmParams::risk_neutral("X", 0.0, 0.2, 0.0).is_err());
    }

    #[test]
    fn risk_free_rate_cancels() {
        let a = FirmParams::<f64>::new("A", 0.3, 0.3, 0.01, Rate::Value(0.02), Rate::Value(0.02), None).unwrap();
        let b = FirmParams::<f64>::new("A", 0.3, 0.3, 0.01, Rate::Value(0.07), Rate::Value(0.07), None).unwrap();
        let c = FirmParams::risk_neutral("A", 0.3, 0.3, 0.01).unwrap();
        assert_eq!(a.eta(), b.eta());
        assert_eq!(a.eta(), c.eta());
        assert!(FirmParams::<f64>::new("A", 0.3, 0.3, 0.0, Rate::RiskFree, Rate::Value(0.01), None).is_err());
        let d = FirmParams::<f64>::new("A", 0.3, 0.3, 0.0, Rate::RiskFree, Rate::Value(0.01), Some(0.03)).unwrap();
        assert!((d.eta() - (0.02 - 0.045)).abs() < 1e-15);
    }

    #[test]
    fn correlation_validation() {
        for n in 1..6 {
            let id = CorrelationSpec::Matrix(SquareMatrix::<f64>::identity(n));
            assert!(validate_correlation(&id, n).is_ok());
        }
        assert!(validate_correlation(&CorrelationSpec::Equicorrelated(0.3), 5).is_ok());
        assert!(validate_correlation(&CorrelationSpec::Equicorrelated(-0.25), 5).is_ok());
        let e = validate_correlation(&CorrelationSpec::Equicorrelated(-0.5), 5).unwrap_err();
        assert!(matches!(e, Error::Correlation(_)));
        assert!(validate_correlation(&CorrelationSpec::Equicorrelated(1.0), 3).is_err());
        let m = CorrelationSpec::Matrix(SquareMatrix::equicorrelated(5, -0.5));
        assert!(validate_correlation(&m, 5).is_err());
        let m = CorrelationSpec::Matrix(SquareMatrix::equicorrelated(4, 0.2));
        assert!(matches!(
            validate_correlation(&m, 5),
            Err(Error::Dimension { .. })
        ));
        let asym = SquareMatrix::from_rows(&[vec![1.0, 0.2], vec![0.3, 1.0]]).unwrap();
        assert!(validate_correlation(&CorrelationSpec::Matrix(asym), 2).is_err());
    }

    #[test]
    fn time_dependent_validation() {
        let ok = CorrelationSpec::time_dependent(|t: f64| 0.1 + 0.01 * t);
        assert!(validate_correlation(&ok, 3).is_ok());
        let spike = CorrelationSpec::time_dependent(|t: f64| if t > 20.0 { 1.0 } else { 0.2 });
        assert!(validate_correlation(&spike, 3).is_err());
    }

    #[test]
    fn calibration_is_scale_invariant() {
        let base = MarketInputs::<f64>::risk_neutral("X", 37.0, 12.5, 0.31, 0.01);
        let f0 = calibrate(&base).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e6] {
            let mut m = base.clone();
            m.market_cap = m.market_cap * c;
            m.debt_pv = m.debt_pv * c;
            let f = calibrate(&m).unwrap();
            assert!((f.sigma() - f0.sigma()).abs() < 1e-15);
            assert!((f.d_over_v0() - f0.d_over_v0()).abs() < 1e-15);
        }
    }
}
