//! Composite Gauss–Legendre quadrature with panel-doubling error control.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Real;

/// Nodes per panel of the composite rule.
pub const GL_ORDER: usize = 10;

/// Maximum number of panel doublings before giving up.
pub const MAX_DOUBLINGS: u32 = 10;

/// Panel counts, truncation width and tolerances shared by every integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureConfig<F> {
    pub time_panels: usize,
    pub space_panels: usize,
    /// Semi-infinite integrals are cut off this many Gaussian widths out.
    pub truncation_sigmas: F,
    pub rel_tol: F,
    pub abs_tol: F,
}

impl<F: Real> Default for QuadratureConfig<F> {
    fn default() -> Self {
        Self {
            time_panels: 64,
            space_panels: 128,
            truncation_sigmas: F::lit(10.0),
            rel_tol: F::lit(1e-7),
            abs_tol: F::lit(1e-12),
        }
    }
}

impl<F: Real> QuadratureConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.time_panels == 0 || self.space_panels == 0 {
            return Err(Error::Config("panel counts must be positive".into()));
        }
        let positive = |x: F| x.is_finite() && x > F::zero();
        if !positive(self.truncation_sigmas) || !positive(self.rel_tol) || !positive(self.abs_tol)
        {
            return Err(Error::Config(
                "truncation_sigmas, rel_tol and abs_tol must be positive".into(),
            ));
        }
        if self.rel_tol >= F::one() {
            return Err(Error::Config("rel_tol must be below 1".into()));
        }
        Ok(())
    }

    /// Same configuration with both tolerances scaled by `factor`.
    pub fn with_tolerance_scaled(mut self, factor: F) -> Self {
        self.rel_tol = self.rel_tol * factor;
        self.abs_tol = self.abs_tol * factor;
        self
    }

    pub(crate) fn accepts(&self, value: F, error: F) -> bool {
        error <= (self.rel_tol * value.abs()).max(self.abs_tol)
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Computes the rule by Newton iteration on the Legendre polynomial.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "Gauss-Legendre order must be positive");
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    let (_, d) = legendre_with_derivative(n, x);
                    dp = d;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// The shared rule of order [`GL_ORDER`].
    pub fn standard() -> &'static GaussLegendre {
        static RULE: OnceLock<GaussLegendre> = OnceLock::new();
        RULE.get_or_init(|| GaussLegendre::new(GL_ORDER))
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Composite rule over `panels` equal panels of `[a, b]`.
    pub fn composite<F: Real, G: FnMut(F) -> F>(&self, mut f: G, a: F, b: F, panels: usize) -> F {
        let h = (b - a) / F::from_usize_lossy(panels);
        let half_h = h * F::half();
        let mut total = F::zero();
        for k in 0..panels {
            let mid = a + h * (F::from_usize_lossy(k) + F::half());
            let mut panel = F::zero();
            for (&x, &w) in self.nodes.iter().zip(&self.weights) {
                panel = panel + F::lit(w) * f(mid + half_h * F::lit(x));
            }
            total = total + panel;
        }
        total * half_h
    }

    /// Absolute positions and weights of the composite rule on `[a, b]`.
    pub fn composite_points<F: Real>(&self, a: F, b: F, panels: usize) -> Vec<(F, F)> {
        let h = (b - a) / F::from_usize_lossy(panels);
        let half_h = h * F::half();
        let mut out = Vec::with_capacity(panels * self.order());
        for k in 0..panels {
            let mid = a + h * (F::from_usize_lossy(k) + F::half());
            for (&x, &w) in self.nodes.iter().zip(&self.weights) {
                out.push((mid + half_h * F::lit(x), F::lit(w) * half_h));
            }
        }
        out
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    if n == 0 {
        (1.0, 0.0)
    } else {
        (p1, d)
    }
}

/// An integral together with its panel-doubling error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral<F> {
    pub value: F,
    pub error: F,
    pub panels: usize,
}

/// Integrates `f` over `[a, b]`, doubling the panel count from `start_panels`
/// until two successive estimates agree to within tolerance.
pub fn integrate_adaptive<F: Real, G: FnMut(F) -> F>(
    mut f: G,
    a: F,
    b: F,
    start_panels: usize,
    cfg: &QuadratureConfig<F>,
) -> Result<Integral<F>> {
    if !(a.is_finite() && b.is_finite()) || a >= b {
        return Err(Error::domain(format!(
            "integration interval [{a}, {b}] must be finite with a < b"
        )));
    }
    let rule = GaussLegendre::standard();
    let mut panels = start_panels.max(1);
    let mut coarse = rule.composite(&mut f, a, b, panels);
    let mut error = F::infinity();
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let fine = rule.composite(&mut f, a, b, panels);
        error = (fine - coarse).abs();
        if !fine.is_finite() {
            break;
        }
        if cfg.accepts(fine, error) {
            return Ok(Integral {
                value: fine,
                error,
                panels,
            });
        }
        coarse = fine;
    }
    Err(Error::NonConvergence {
        a: a.to_f64_lossy(),
        b: b.to_f64_lossy(),
        estimate: coarse.to_f64_lossy(),
        error: error.to_f64_lossy(),
    })
}

/// `∫_a^b f(x) dx` with `cfg.space_panels` starting panels.
pub fn integrate_1d<F: Real, G: FnMut(F) -> F>(
    f: G,
    a: F,
    b: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    integrate_adaptive(f, a, b, cfg.space_panels, cfg).map(|i| i.value)
}

/// `∫_a^∞ f(x) dx` for an integrand decaying at least like a Gaussian of
/// width `scale`, truncated at `a + truncation_sigmas * scale`.
pub fn integrate_semi_infinite<F: Real, G: FnMut(F) -> F>(
    f: G,
    a: F,
    scale: F,
    cfg: &QuadratureConfig<F>,
) -> Result<F> {
    if !(scale > F::zero()) {
        return Err(Error::domain(format!("scale must be positive, got {scale}")));
    }
    integrate_1d(f, a, a + cfg.truncation_sigmas * scale, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::special::std_normal_pdf;

    fn cfg() -> QuadratureConfig<f64> {
        QuadratureConfig::default()
    }

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        let rule = GaussLegendre::new(GL_ORDER);
        for degree in 0..(2 * GL_ORDER) {
            let got = rule.composite(|x: f64| x.powi(degree as i32), 0.0, 1.0, 1);
            let exact = 1.0 / (degree as f64 + 1.0);
            assert!((got - exact).abs() <= 1e-13, "degree {degree}");
        }
        let w: f64 = rule.weights().iter().sum();
        assert!((w - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_rules_include_origin() {
        let rule = GaussLegendre::new(5);
        assert_eq!(rule.nodes()[2], 0.0);
        assert!((rule.weights()[2] - 128.0 / 225.0).abs() < 1e-15);
    }

    #[test]
    fn basic_integrals() {
        assert!((integrate_1d(|_| 1.0, 0.0, 1.0, &cfg()).unwrap() - 1.0).abs() < 1e-14);
        assert!((integrate_1d(|x| x * x, 0.0, 1.0, &cfg()).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        let gauss = integrate_1d(|x: f64| (-x * x).exp(), 0.0, 10.0, &cfg()).unwrap();
        assert!((gauss - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-10);
    }

    #[test]
    fn semi_infinite_cases() {
        let (a, s) = (0.3, 0.7);
        let half = integrate_semi_infinite(|x| std_normal_pdf((x - a) / s) / s, a, s, &cfg()).unwrap();
        assert!((half - 0.5).abs() < 1e-9);
        assert_eq!(integrate_semi_infinite(|_| 0.0, a, 1.0, &cfg()).unwrap(), 0.0);
        // Truncation at 10 widths leaves exactly e^{-10} of an exponential tail.
        let e = integrate_semi_infinite(|x: f64| (-(x - a)).exp(), a, 1.0, &cfg()).unwrap();
        assert!((e - (1.0 - (-10.0_f64).exp())).abs() < 1e-9);
    }

    #[test]
    fn invalid_intervals_and_config() {
        assert!(integrate_1d(|x| x, 1.0, 0.0, &cfg()).is_err());
        assert!(integrate_semi_infinite(|x| x, 0.0, 0.0, &cfg()).is_err());
        let mut bad = cfg();
        bad.rel_tol = 1.0;
        assert!(bad.validate().is_err());
        bad = cfg();
        bad.space_panels = 0;
        assert!(bad.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn non_convergence_is_reported() {
        // Oscillation faster than the finest grid can resolve.
        let mut tight = cfg();
        tight.space_panels = 1;
        let r = integrate_1d(|x: f64| (1e7 * x).sin() * 1e3, 0.0, 1.0, &tight);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn linear_and_additive() {
        let f = |x: f64| (x * 1.3).sin() + x * x;
        let g = |x: f64| (-x).exp();
        let c = cfg();
        let lin = integrate_1d(|x| 2.0 * f(x) - 3.0 * g(x), 0.0, 2.0, &c).unwrap();
        let sep = 2.0 * integrate_1d(f, 0.0, 2.0, &c).unwrap() - 3.0 * integrate_1d(g, 0.0, 2.0, &c).unwrap();
        assert!((lin - sep).abs() < 1e-12);
        let whole = integrate_1d(f, 0.0, 2.0, &c).unwrap();
        let parts = integrate_1d(f, 0.0, 0.7, &c).unwrap() + integrate_1d(f, 0.7, 2.0, &c).unwrap();
        assert!((whole - parts).abs() < 1e-12);
    }
}
