//! Joint survival probability to first order in the asset correlations.
//!
//! For firms `i != j` the first-order relative correction is
//!
//! ```text
//! P1/P0 = 1/2 sum_{i != j} sigma_i sigma_j / (P_i P_j) ∫_0^t xi_ij(t') A_ij(t, t') dt'
//! A_ij(t, t') = F_i(t, t') F_j(t, t')
//! F_i(t, t')  = -∫_{z_d}^∞ dU_i/dx (x; t - t') p_i(x, t') dx
//! ```
//!
//! `F_i` is the integrated-by-parts form of `∫ U_i ∂p_i/∂x dx`; the boundary
//! term vanishes because `U_i(z_d) = 0` and `p_i(∞) = 0`. The product
//! structure means one curve `F_i(t, ·)` per firm serves every pair.
//!
//! Near `t' = t` each factor vanishes like `sqrt(t - t')`, so the time integral
//! is taken in `v` with `t' = t (1 - v^2)`, which makes the integrand smooth
//! on `[0, 1]`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::firm_model::{validate_correlation, CorrelationSpec, FirmParams, ValidatedCorrelation};
use crate::numerics::{integrate_adaptive, GaussLegendre, QuadratureConfig, Real, SquareMatrix};
use crate::survival_core::{
    partial_survival_gradient_unchecked, survival_prob, transition_density_unchecked,
};

/// Which model produced a joint survival estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Perturbation,
    Copula,
    MonteCarlo,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Perturbation => "perturbation",
            Method::Copula => "copula",
            Method::MonteCarlo => "mc",
        }
    }
}

/// Time integral of one pair kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairKernelResult<F> {
    pub pair: (usize, usize),
    /// `∫_0^t A_ij(t, t') dt'`.
    pub integral: F,
    /// Difference between the last two time refinements.
    pub error: F,
    /// Gauss–Legendre panels used in the time variable.
    pub time_panels: usize,
}

/// First-order joint survival probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointSurvivalResult<F> {
    /// Product of the single-firm survival probabilities.
    pub p0: F,
    pub p1_over_p0: F,
    /// `p0 (1 + p1_over_p0)`, not clamped.
    pub joint: F,
    pub method: Method,
    /// Numerical error estimate on `joint`.
    pub error: F,
    /// Set when `joint` falls outside `[0, 1]`: the expansion has broken down.
    pub out_of_range: bool,
}

impl<F: Real> JointSurvivalResult<F> {
    fn new(p0: F, p1_over_p0: F, error: F) -> Self {
        let joint = p0 * (F::one() + p1_over_p0);
        Self {
            p0,
            p1_over_p0,
            joint,
            method: Method::Perturbation,
            error,
            out_of_range: !(joint >= F::zero() && joint <= F::one()),
        }
    }
}

/// `F(t, t') = -∫ dU/dx(x; t - t') p(x, t') dx` for one firm.
pub fn kernel_factor<F: Real>(
    f: &FirmParams<F>,
    t: F,
    t_prime: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    if !(t_prime > F::zero() && t_prime < t) {
        return Err(Error::domain(format!(
            "kernel requires 0 < t' < t, got t' = {t_prime}, t = {t}"
        )));
    }
    kernel_factor_unchecked(f, t, t_prime, cfg)
}

fn kernel_factor_unchecked<F: Real>(
    f: &FirmParams<F>,
    t: F,
    t_prime: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    let tau = t - t_prime;
    let sigma = f.sigma();
    let eta = f.eta();
    let zd = f.z_d();
    let k = cfg.truncation_sigmas;
    // p(x, t') lives within k widths of eta t'; dU/dx(x; tau) within
    // k sqrt(tau) widths (plus drift) of the barrier.
    let centre = eta * t_prime;
    let spread = k * sigma * t_prime.sqrt();
    let lo = zd.max(centre - spread);
    let hi = (centre + spread).min(zd + k * sigma * tau.sqrt() + F::two() * eta.abs() * tau);
    if !(hi > lo) {
        return Ok(F::zero());
    }
    let integral = integrate_adaptive(
        |x| partial_survival_gradient_unchecked(f, x, tau) * transition_density_unchecked(f, x, F::zero(), t_prime),
        lo,
        hi,
        cfg.space_panels,
        cfg,
    )?;
    Ok(-integral.value)
}

/// `A_ij(t, t') = F_i(t, t') F_j(t, t')`.
pub fn pair_kernel_a<F: Real>(
    fi: &FirmParams<F>,
    fj: &FirmParams<F>,
    t: F,
    t_prime: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    let a = kernel_factor(fi, t, t_prime, cfg)?;
    let b = if fi.same_dynamics(fj) {
        a
    } else {
        kernel_factor(fj, t, t_prime, cfg)?
    };
    Ok(a * b)
}

/// Factor curves of a set of firms on a shared time grid.
#[derive(Debug, Clone)]
pub struct PairKernels<F> {
    horizon: F,
    /// `(t', weight)` in the original time variable.
    nodes: Vec<(F, F)>,
    /// `curves[i][k] = F_i(t, t'_k)`.
    curves: Vec<Vec<F>>,
    singles: Vec<F>,
    sigmas: Vec<F>,
    /// Per-pair refinement differences, row-major `n x n`.
    errors: Vec<F>,
    time_panels: usize,
}

fn time_grid<F: Real>(t: F, panels: usize) -> Vec<(F, F)> {
    GaussLegendre::standard()
        .composite_points(F::zero(), F::one(), panels)
        .into_iter()
        .map(|(v, w)| (t * (F::one() - v * v), w * F::two() * t * v))
        .collect()
}

fn curves_on<F: Real>(
    firms: &[FirmParams<F>],
    t: F,
    nodes: &[(F, F)],
    cfg: &QuadratureConfig<F>,
) -> Result<Vec<Vec<F>>> {
    let mut curves: Vec<Vec<F>> = Vec::with_capacity(firms.len());
    for (i, f) in firms.iter().enumerate() {
        if let Some(j) = (0..i).find(|&j| firms[j].same_dynamics(f)) {
            let reuse = curves[j].clone();
            curves.push(reuse);
            continue;
        }
        let curve = nodes
            .par_iter()
            .map(|&(tp, _)| kernel_factor_unchecked(f, t, tp, cfg))
            .collect::<Result<Vec<F>>>()?;
        curves.push(curve);
    }
    Ok(curves)
}

fn weighted_dot<F: Real>(nodes: &[(F, F)], a: &[F], b: &[F], xi: Option<&dyn Fn(F) -> F>) -> F {
    let mut s = F::zero();
    for ((&(tp, w), &x), &y) in nodes.iter().zip(a).zip(b) {
        let weight = match xi {
            Some(g) => w * g(tp),
            None => w,
        };
        s = s + weight * (x * y);
    }
    s
}

impl<F: Real> PairKernels<F> {
    /// Computes factor curves for `firms` at horizon `t`, refining the time
    /// grid until every pair integral is converged.
    pub fn compute(firms: &[FirmParams<F>], t: F, cfg: &QuadratureConfig<F>) -> Result<Self> {
        Self::compute_weighted(firms, t, cfg, None)
    }

    /// As [`compute`](Self::compute), with convergence judged on
    /// `∫ xi(t') A_ij dt'` for a time-dependent correlation.
    pub fn compute_weighted(
        firms: &[FirmParams<F>],
        t: F,
        cfg: &QuadratureConfig<F>,
        xi: Option<&dyn Fn(F) -> F>,
    ) -> Result<Self> {
        cfg.validate()?;
        if !(t > F::zero() && t.is_finite()) {
            return Err(Error::domain(format!("horizon must be positive, got {t}")));
        }
        let n = firms.len();
        let singles = firms
            .iter()
            .map(|f| survival_prob(f, t))
            .collect::<Result<Vec<F>>>()?;
        let sigmas = firms.iter().map(|f| f.sigma()).collect();

        let mut panels = (cfg.time_panels / 2).max(1);
        let mut coarse_nodes = time_grid(t, panels);
        let mut coarse = curves_on(firms, t, &coarse_nodes, cfg)?;
        let mut worst = (F::zero(), F::zero());
        for _ in 0..crate::numerics::quadrature::MAX_DOUBLINGS {
            panels *= 2;
            let nodes = time_grid(t, panels);
            let fine = curves_on(firms, t, &nodes, cfg)?;
            let mut errors = vec![F::zero(); n * n];
            let mut converged = true;
            for i in 0..n {
                for j in i..n {
                    let a = weighted_dot(&nodes, &fine[i], &fine[j], xi);
                    let b = weighted_dot(&coarse_nodes, &coarse[i], &coarse[j], xi);
                    let err = (a - b).abs();
                    errors[i * n + j] = err;
                    errors[j * n + i] = err;
                    if !cfg.accepts(a, err) {
                        converged = false;
                        worst = (a, err);
                    }
                }
            }
            if converged {
                return Ok(Self {
                    horizon: t,
                    nodes,
                    curves: fine,
                    singles,
                    sigmas,
                    errors,
                    time_panels: panels,
                });
            }
            coarse_nodes = nodes;
            coarse = fine;
        }
        Err(Error::NonConvergence {
            a: 0.0,
            b: t.to_f64_lossy(),
            estimate: worst.0.to_f64_lossy(),
            error: worst.1.to_f64_lossy(),
        })
    }

    pub fn n(&self) -> usize {
        self.curves.len()
    }

    pub fn horizon(&self) -> F {
        self.horizon
    }

    pub fn singles(&self) -> &[F] {
        &self.singles
    }

    pub fn time_panels(&self) -> usize {
        self.time_panels
    }

    /// `∫_0^t A_ij dt'`.
    pub fn integral(&self, i: usize, j: usize) -> F {
        weighted_dot(&self.nodes, &self.curves[i], &self.curves[j], None)
    }

    /// `∫_0^t xi(t') A_ij dt'`.
    pub fn weighted_integral(&self, i: usize, j: usize, xi: &dyn Fn(F) -> F) -> F {
        weighted_dot(&self.nodes, &self.curves[i], &self.curves[j], Some(xi))
    }

    pub fn pair_result(&self, i: usize, j: usize) -> PairKernelResult<F> {
        PairKernelResult {
            pair: (i.min(j), i.max(j)),
            integral: self.integral(i, j),
            error: self.errors[i * self.n() + j],
            time_panels: self.time_panels,
        }
    }

    /// `sigma_i sigma_j ∫ xi_ij A_ij dt' / (P_i P_j)`, i.e. the contribution of
    /// the unordered pair `{i, j}` to `P1/P0`, and its error estimate.
    fn pair_term(&self, i: usize, j: usize, corr: &CorrelationSpec<F>, local: (usize, usize)) -> (F, F) {
        let scale = self.sigmas[i] * self.sigmas[j] / (self.singles[i] * self.singles[j]);
        let err = self.errors[i * self.n() + j];
        match corr {
            CorrelationSpec::TimeDependent(g) => {
                (scale * self.weighted_integral(i, j, g.as_ref()), scale * err)
            }
            _ => {
                let xi = corr.pair(local.0, local.1, F::zero());
                (scale * xi * self.integral(i, j), scale * xi.abs() * err)
            }
        }
    }

    /// First-order relative correction for the firms at `indices`, with
    /// `corr` indexed relative to `indices`. Pairs are summed in ascending
    /// `(i, j)` order.
    pub fn correction_for_subset(&self, indices: &[usize], corr: &CorrelationSpec<F>) -> (F, F) {
        let mut total = F::zero();
        let mut err = F::zero();
        for a in 0..indices.len() {
            for b in (a + 1)..indices.len() {
                let (v, e) = self.pair_term(indices[a], indices[b], corr, (a, b));
                total = total + v;
                err = err + e;
            }
        }
        (total, err)
    }

    /// First-order joint survival of the firms at `indices`.
    pub fn joint_for_subset(&self, indices: &[usize], corr: &CorrelationSpec<F>) -> JointSurvivalResult<F> {
        let p0 = indices.iter().map(|&i| self.singles[i]).fold(F::one(), |a, b| a * b);
        let (c, e) = self.correction_for_subset(indices, corr);
        JointSurvivalResult::new(p0, c, p0 * e)
    }

    /// `sum_{i<j} sigma_i sigma_j ∫ A_ij / (P_i P_j)` over all firms.
    pub fn duration(&self) -> F {
        let all: Vec<usize> = (0..self.n()).collect();
        self.correction_for_subset(&all, &CorrelationSpec::Equicorrelated(F::one())).0
    }

    /// Default correlation of firms `i` and `j` given their asset correlation.
    pub fn default_correlation(&self, i: usize, j: usize, corr: &CorrelationSpec<F>, local: (usize, usize)) -> F {
        let (pi, pj) = (self.singles[i], self.singles[j]);
        let (term, _) = self.pair_term(i, j, corr, local);
        let pij = pi * pj * (F::one() + term);
        (pij - pi * pj) / ((F::one() - pi) * pi * (F::one() - pj) * pj).sqrt()
    }
}

fn require_firms<F>(firms: &[FirmParams<F>], min: usize) -> Result<()> {
    if firms.len() < min {
        return Err(Error::domain(format!(
            "need at least {min} firms, got {}",
            firms.len()
        )));
    }
    Ok(())
}

fn check_corr<F: Real>(firms: &[FirmParams<F>], corr: &ValidatedCorrelation<F>, t: F) -> Result<()> {
    if corr.n() != firms.len() {
        return Err(Error::Dimension {
            expected: firms.len(),
            got: corr.n(),
        });
    }
    corr.check_horizon(t)
}

fn kernels_for<F: Real>(
    firms: &[FirmParams<F>],
    corr: &ValidatedCorrelation<F>,
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<PairKernels<F>> {
    match corr.spec() {
        CorrelationSpec::TimeDependent(g) => PairKernels::compute_weighted(firms, t, cfg, Some(g.as_ref())),
        _ => PairKernels::compute(firms, t, cfg),
    }
}

/// Time integral of `A_ij` for one pair of firms.
pub fn pair_kernel_integral<F: Real>(
    fi: &FirmParams<F>,
    fj: &FirmParams<F>,
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<PairKernelResult<F>> {
    let k = PairKernels::compute(&[fi.clone(), fj.clone()], t, cfg)?;
    Ok(k.pair_result(0, 1))
}

/// `P1/P0` for `n >= 2` firms.
pub fn first_order_correction<F: Real>(
    firms: &[FirmParams<F>],
    corr: &ValidatedCorrelation<F>,
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    require_firms(firms, 2)?;
    check_corr(firms, corr, t)?;
    let k = kernels_for(firms, corr, t, cfg)?;
    let all: Vec<usize> = (0..firms.len()).collect();
    Ok(k.correction_for_subset(&all, corr.spec()).0)
}

/// `P0 (1 + P1/P0)`; a single firm returns its own survival probability.
pub fn joint_survival<F: Real>(
    firms: &[FirmParams<F>],
    corr: &ValidatedCorrelation<F>,
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<JointSurvivalResult<F>> {
    require_firms(firms, 1)?;
    check_corr(firms, corr, t)?;
    if firms.len() == 1 {
        let p = survival_prob(&firms[0], t)?;
        return Ok(JointSurvivalResult::new(p, F::zero(), F::zero()));
    }
    let k = kernels_for(firms, corr, t, cfg)?;
    let all: Vec<usize> = (0..firms.len()).collect();
    Ok(k.joint_for_subset(&all, corr.spec()))
}

/// Joint survival from pairwise joint probabilities:
/// `P_1..n = P_1...P_n [1 + sum_{i<j} (P_ij/(P_i P_j) - 1)]`.
pub fn pairwise_decomposition<F: Real>(pair_joints: &SquareMatrix<F>, singles: &[F]) -> Result<F> {
    let n = singles.len();
    if pair_joints.dim() != n {
        return Err(Error::Dimension {
            expected: n,
            got: pair_joints.dim(),
        });
    }
    let in_unit = |p: F| p > F::zero() && p < F::one();
    if let Some(p) = singles.iter().find(|&&p| !in_unit(p)) {
        return Err(Error::domain(format!("survival probability {p} not in (0, 1)")));
    }
    let mut bracket = F::one();
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = pair_joints[(i, j)];
            if (pij - pair_joints[(j, i)]).abs() > F::lit(1e-12) {
                return Err(Error::domain(format!("pair joints ({i}, {j}) not symmetric")));
            }
            if !in_unit(pij) {
                return Err(Error::domain(format!("pair joint P_{i}{j} = {pij} not in (0, 1)")));
            }
            bracket = bracket + pij / (singles[i] * singles[j]) - F::one();
        }
    }
    Ok(singles.iter().fold(F::one(), |a, &b| a * b) * bracket)
}

/// First-order default correlation of two firms with asset correlation `xi`.
pub fn default_correlation<F: Real>(
    fi: &FirmParams<F>,
    fj: &FirmParams<F>,
    xi: F,
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    validate_correlation(&CorrelationSpec::Equicorrelated(xi), 2)?;
    let k = PairKernels::compute(&[fi.clone(), fj.clone()], t, cfg)?;
    Ok(k.default_correlation(0, 1, &CorrelationSpec::Equicorrelated(xi), (0, 1)))
}

/// `d log P / d xi` at zero common correlation.
pub fn correlation_duration<F: Real>(
    firms: &[FirmParams<F>],
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    require_firms(firms, 2)?;
    Ok(PairKernels::compute(firms, t, cfg)?.duration())
}

/// `E[dn_i dn_j dn_k]` for survival indicators `n`, from first-order joint
/// probabilities of every subset of `{i, j, k}`. Vanishes at this order.
pub fn third_cross_moment<F: Real>(
    firms: &[FirmParams<F>],
    corr: &ValidatedCorrelation<F>,
    (i, j, k): (usize, usize, usize),
    t: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    require_firms(firms, 3)?;
    check_corr(firms, corr, t)?;
    let n = firms.len();
    if i == j || j == k || i == k || i >= n || j >= n || k >= n {
        return Err(Error::domain(format!("need three distinct firm indices below {n}, got ({i}, {j}, {k})")));
    }
    let kernels = kernels_for(firms, corr, t, cfg)?;
    let spec = corr.spec();
    let joint = |idx: &[usize]| kernels.joint_for_subset(idx, &spec.subset(idx)).joint;
    let p = kernels.singles();
    let pijk = joint(&[i, j, k]);
    let pij = joint(&[i, j]);
    let pik = joint(&[i, k]);
    let pjk = joint(&[j, k]);
    Ok(pijk - pij * p[k] - pik * p[j] - pjk * p[i] + F::two() * p[i] * p[j] * p[k])
}
