//! Gaussian copula joint survival, matched to first-passage marginals.
//!
//! Firm `i` survives when a standard normal `X_i` exceeds its threshold
//! `chi_i = Phi^-1(1 - P_i)`, and the `X_i` share the asset correlation
//! matrix. For an equicorrelation `xi >= 0` the joint law has the one-factor
//! form `X_i = sqrt(xi) M + sqrt(1 - xi) e_i`, which reduces the n-dimensional
//! tail probability to a single integral over `M`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::firm_model::{validate_correlation, CorrelationSpec, FirmParams};
use crate::numerics::{
    integrate_adaptive, inverse_normal_cdf, std_normal_pdf, std_normal_sf, QuadratureConfig, Real,
    RngStream, SquareMatrix,
};
use crate::perturbation::PairKernels;

/// Half-width of the factor integration range, in standard deviations.
const FACTOR_RANGE: f64 = 10.0;
const FACTOR_PANELS: usize = 256;

/// Copula thresholds and the survival probabilities they reproduce.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopulaThresholds<F> {
    chi: Vec<F>,
    singles: Vec<F>,
}

impl<F: Real> CopulaThresholds<F> {
    /// Thresholds given directly, e.g. for a sweep at a quoted `chi`.
    pub fn from_chi(chi: &[F]) -> Result<Self> {
        if let Some(c) = chi.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain(format!("threshold {c} is not finite")));
        }
        Ok(Self {
            chi: chi.to_vec(),
            singles: chi.iter().map(|&c| std_normal_sf(c)).collect(),
        })
    }

    pub fn chi(&self) -> &[F] {
        &self.chi
    }

    pub fn singles(&self) -> &[F] {
        &self.singles
    }

    pub fn n(&self) -> usize {
        self.chi.len()
    }

    /// Product of the marginal survival probabilities.
    pub fn independent_joint(&self) -> F {
        self.singles.iter().fold(F::one(), |a, &b| a * b)
    }
}

/// `chi_i` with `P(X > chi_i) = P_i`, i.e. `sqrt(2) erf^-1(1 - 2 P_i)`.
pub fn thresholds_from_survival<F: Real>(singles: &[F]) -> Result<CopulaThresholds<F>> {
    let chi = singles
        .iter()
        .map(|&p| {
            if !(p > F::zero() && p < F::one()) {
                return Err(Error::domain(format!("survival probability {p} not in (0, 1)")));
            }
            // Phi^-1(1 - p) = -Phi^-1(p) keeps full precision for p near 1.
            Ok(-inverse_normal_cdf(p)?)
        })
        .collect::<Result<Vec<F>>>()?;
    Ok(CopulaThresholds {
        chi,
        singles: singles.to_vec(),
    })
}

/// Joint survival under an equicorrelation `0 <= xi < 1`:
/// `∫ phi(m) prod_i Phibar((chi_i - sqrt(xi) m) / sqrt(1 - xi)) dm`.
///
/// Negative `xi` has no one-factor form; use [`copula_joint`] or
/// [`copula_joint_general`].
pub fn copula_joint_equicorrelated<F: Real>(
    th: &CopulaThresholds<F>,
    xi: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    cfg.validate()?;
    if !(xi >= F::zero() && xi < F::one()) {
        return Err(Error::Correlation(format!(
            "one-factor copula needs 0 <= xi < 1, got {xi}"
        )));
    }
    if xi == F::zero() || th.n() == 1 {
        return Ok(th.independent_joint());
    }
    let load = xi.sqrt();
    let resid = (F::one() - xi).sqrt();
    let integrand = |m: F| {
        th.chi
            .iter()
            .fold(std_normal_pdf(m), |acc, &c| acc * std_normal_sf((c - load * m) / resid))
    };
    let r = F::lit(FACTOR_RANGE);
    integrate_adaptive(integrand, -r, r, FACTOR_PANELS / 2, cfg).map(|i| i.value)
}

/// Monte Carlo settings for the general copula path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CopulaMcConfig {
    /// Antithetic pairs in total.
    pub pairs: usize,
    /// Pairs per independent random stream.
    pub block_size: usize,
    pub seed: u64,
}

impl Default for CopulaMcConfig {
    fn default() -> Self {
        Self {
            pairs: 2_000_000,
            block_size: 10_000,
            seed: 0x5eed,
        }
    }
}

impl CopulaMcConfig {
    fn validate(&self) -> Result<()> {
        if self.pairs == 0 || self.block_size == 0 || !self.pairs.is_multiple_of(self.block_size) {
            return Err(Error::Config(format!(
                "pairs ({}) must be a positive multiple of block_size ({})",
                self.pairs, self.block_size
            )));
        }
        Ok(())
    }
}

/// A copula probability with its Monte Carlo standard error (zero when the
/// value came from quadrature or a closed form).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CopulaEstimate<F> {
    pub value: F,
    pub stderr: F,
}

/// Joint survival for a full correlation matrix by Monte Carlo with
/// antithetic variates.
pub fn copula_joint_general<F: Real>(
    th: &CopulaThresholds<F>,
    corr: &SquareMatrix<F>,
    mc: &CopulaMcConfig,
) -> Result<CopulaEstimate<F>> {
    let n = th.n();
    validate_correlation(&CorrelationSpec::Matrix(corr.clone()), n)?;
    mc.validate()?;
    if n == 1 {
        return Ok(CopulaEstimate {
            value: th.singles[0],
            stderr: F::zero(),
        });
    }
    let l = corr
        .cholesky_semidefinite(F::lit(1e-10) * F::from_usize_lossy(n))
        .ok_or_else(|| Error::Correlation("Cholesky factorisation failed".into()))?;
    let l: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| l[(i, j)].to_f64_lossy())
        .collect();
    let chi: Vec<f64> = th.chi.iter().map(|c| c.to_f64_lossy()).collect();

    let blocks = mc.pairs / mc.block_size;
    let sums: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = RngStream::new(mc.seed, b as u64);
            let mut z = vec![0.0; n];
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..mc.block_size {
                for v in z.iter_mut() {
                    *v = rng.normal();
                }
                let (mut up, mut down) = (true, true);
                for i in 0..n {
                    let x: f64 = (0..=i).map(|k| l[i * n + k] * z[k]).sum();
                    up &= x > chi[i];
                    down &= -x > chi[i];
                }
                let y = 0.5 * (up as u8 as f64 + down as u8 as f64);
                s += y;
                s2 += y * y;
            }
            (s, s2)
        })
        .collect();
    let (s, s2) = sums.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = mc.pairs as f64;
    let mean = s / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok(CopulaEstimate {
        value: F::lit(mean),
        stderr: F::lit((var / m).sqrt()),
    })
}

/// Joint survival for any constant correlation: one-factor quadrature for a
/// non-negative equicorrelation, Monte Carlo otherwise.
pub fn copula_joint<F: Real>(
    th: &CopulaThresholds<F>,
    corr: &CorrelationSpec<F>,
    cfg: &QuadratureConfig<F>,
    mc: &CopulaMcConfig,
) -> Result<CopulaEstimate<F>> {
    let n = th.n();
    match corr {
        CorrelationSpec::TimeDependent(_) => Err(Error::Correlation(
            "the copula model takes a constant correlation".into(),
        )),
        CorrelationSpec::Equicorrelated(xi) if *xi >= F::zero() => {
            validate_correlation(corr, n)?;
            Ok(CopulaEstimate {
                value: copula_joint_equicorrelated(th, *xi, cfg)?,
                stderr: F::zero(),
            })
        }
        CorrelationSpec::Matrix(m) => match common_off_diagonal(m) {
            Some(xi) if xi >= F::zero() => copula_joint(th, &CorrelationSpec::Equicorrelated(xi), cfg, mc),
            _ => copula_joint_general(th, m, mc),
        },
        _ => copula_joint_general(th, &corr.matrix_at(n, F::zero()), mc),
    }
}

/// The shared off-diagonal value of an equicorrelated matrix.
fn common_off_diagonal<F: Real>(m: &SquareMatrix<F>) -> Option<F> {
    let n = m.dim();
    if n < 2 {
        return Some(F::zero());
    }
    let xi = m[(0, 1)];
    let all_equal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == xi));
    all_equal.then_some(xi)
}

/// First-order relative correction
/// `sum_{i<j} xi_ij phi(chi_i) phi(chi_j) / (P_i P_j)`.
pub fn copula_first_order<F: Real>(th: &CopulaThresholds<F>, corr: &CorrelationSpec<F>) -> Result<F> {
    let n = th.n();
    if corr.is_time_dependent() {
        return Err(Error::Correlation(
            "the copula model takes a constant correlation".into(),
        ));
    }
    if let CorrelationSpec::Matrix(m) = corr {
        if m.dim() != n {
            return Err(Error::Dimension {
                expected: n,
                got: m.dim(),
            });
        }
    }
    let w: Vec<F> = th
        .chi
        .iter()
        .zip(&th.singles)
        .map(|(&c, &p)| std_normal_pdf(c) / p)
        .collect();
    let mut total = F::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            total = total + corr.pair(i, j, F::zero()) * w[i] * w[j];
        }
    }
    Ok(total)
}

/// Per-pair first-order coefficients of the two models.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelComparison<F> {
    pub n_pairs: usize,
    /// First-passage correction per pair per unit correlation.
    pub a_fp: F,
    /// Copula correction per pair per unit correlation.
    pub a_c: F,
    /// `(a_c - a_fp) / a_fp`.
    pub relative_gap: F,
    /// `a_fp / sigma^2` when every firm has the same volatility.
    pub a_fp_over_sigma2: Option<F>,
    pub a_c_over_sigma2: Option<F>,
    pub thresholds: CopulaThresholds<F>,
}

/// Compares the first-order corrections of the first-passage and copula
/// models. Both are linear in the correlation, so the coefficient per pair
/// does not depend on it.
pub fn compare_models<F: Real>(
    firms: &[FirmParams<F>],
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<ModelComparison<F>> {
    if firms.len() < 2 {
        return Err(Error::domain("need at least 2 firms to compare"));
    }
    let kernels = PairKernels::compute(firms, t, cfg)?;
    let th = thresholds_from_survival(kernels.singles())?;
    let n = firms.len();
    let n_pairs = n * (n - 1) / 2;
    let per_pair = F::from_usize_lossy(n_pairs);
    let a_fp = kernels.duration() / per_pair;
    let a_c = copula_first_order(&th, &CorrelationSpec::Equicorrelated(F::one()))? / per_pair;
    let s = firms[0].sigma();
    let common = firms.iter().all(|f| f.sigma() == s);
    let s2 = s * s;
    Ok(ModelComparison {
        n_pairs,
        a_fp,
        a_c,
        relative_gap: (a_c - a_fp) / a_fp,
        a_fp_over_sigma2: common.then(|| a_fp / s2),
        a_c_over_sigma2: common.then(|| a_c / s2),
        thresholds: th,
    })
}
