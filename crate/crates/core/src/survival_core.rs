//! Closed-form single-firm first-passage quantities.
//!
//! All four functions come from the method of images for a drifted Brownian
//! motion absorbed at `z_d`. The image contributions carry a weight
//! `exp(2 eta (z_d - x)/sigma^2)` that can overflow for deep barriers, so the
//! weight is always folded into the Gaussian (or `erfcx`) exponent before
//! exponentiating.

use crate::error::{Error, Result};
use crate::firm_model::FirmParams;
use crate::numerics::{erfc, erfcx, Real};

fn check_time<F: Real>(t: F, what: &str) -> Result<()> {
    if t > F::zero() && t.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} must be positive, got {t}")))
    }
}

/// Density of surviving paths at `z` after time `t`, started from 0.
pub fn survival_density<F: Real>(f: &FirmParams<F>, z: F, t: F) -> Result<F> {
    check_time(t, "time")?;
    Ok(transition_density_unchecked(f, z, F::zero(), t))
}

/// Probability that the firm has not hit its barrier by time `t`.
pub fn survival_prob<F: Real>(f: &FirmParams<F>, t: F) -> Result<F> {
    check_time(t, "time")?;
    Ok(partial_survival_unchecked(f, F::zero(), t))
}

/// Density at `z` after time `tau` of paths started at `x` that have not
/// been absorbed.
pub fn transition_density<F: Real>(f: &FirmParams<F>, z: F, x: F, tau: F) -> Result<F> {
    check_time(tau, "elapsed time")?;
    Ok(transition_density_unchecked(f, z, x, tau))
}

/// Probability of surviving a further `tau` starting from `z`.
pub fn partial_survival_u<F: Real>(f: &FirmParams<F>, z: F, tau: F) -> Result<F> {
    check_time(tau, "elapsed time")?;
    Ok(partial_survival_unchecked(f, z, tau))
}

/// Analytic `dU/dz` of [`partial_survival_u`].
pub fn partial_survival_u_gradient<F: Real>(f: &FirmParams<F>, z: F, tau: F) -> Result<F> {
    check_time(tau, "elapsed time")?;
    Ok(partial_survival_gradient_unchecked(f, z, tau))
}

/// Direct term `exp(-(z - x - eta tau)^2 / (2 sigma^2 tau))` of the
/// transition density, without normalisation.
pub(crate) fn direct_term<F: Real>(f: &FirmParams<F>, z: F, x: F, tau: F) -> F {
    let v = f.sigma() * f.sigma() * tau;
    let d = z - x - f.eta() * tau;
    (-d * d / (F::two() * v)).exp()
}

/// Image term including its weight, without normalisation.
pub(crate) fn image_term<F: Real>(f: &FirmParams<F>, z: F, x: F, tau: F) -> F {
    let s2 = f.sigma() * f.sigma();
    let v = s2 * tau;
    let zd = f.z_d();
    let d = z + x - F::two() * zd - f.eta() * tau;
    let log_weight = F::two() * f.eta() * (zd - x) / s2;
    (log_weight - d * d / (F::two() * v)).exp()
}

pub(crate) fn transition_density_unchecked<F: Real>(f: &FirmParams<F>, z: F, x: F, tau: F) -> F {
    let zd = f.z_d();
    if z <= zd || x <= zd {
        return F::zero();
    }
    let v = f.sigma() * f.sigma() * tau;
    let norm = (F::two() * F::PI() * v).sqrt();
    let value = (direct_term(f, z, x, tau) - image_term(f, z, x, tau)) / norm;
    value.max(F::zero())
}

/// With `u = z - z_d` and `a = sqrt(2 sigma^2 tau)`:
/// `U = erfc(-(u + eta tau)/a)/2 - exp(-2 eta u/sigma^2) erfc((u - eta tau)/a)/2`.
pub(crate) fn partial_survival_unchecked<F: Real>(f: &FirmParams<F>, z: F, tau: F) -> F {
    let u = z - f.z_d();
    if u <= F::zero() {
        return F::zero();
    }
    let s2 = f.sigma() * f.sigma();
    let eta = f.eta();
    let a = (F::two() * s2 * tau).sqrt();
    let direct = F::half() * erfc(-(u + eta * tau) / a);
    let b = (u - eta * tau) / a;
    let image = if b >= F::zero() {
        // exp(-2 eta u/s2 - b^2) = exp(-(u + eta tau)^2 / a^2)
        let g = (u + eta * tau) / a;
        F::half() * erfcx(b) * (-g * g).exp()
    } else {
        F::half() * (-F::two() * eta * u / s2).exp() * erfc(b)
    };
    (direct - image).max(F::zero()).min(F::one())
}

/// `dU/dz = exp(-(u + eta tau)^2/a^2) 2/(a sqrt(pi))
///        + (eta/sigma^2) exp(-2 eta u/sigma^2) erfc((u - eta tau)/a)`.
pub(crate) fn partial_survival_gradient_unchecked<F: Real>(f: &FirmParams<F>, z: F, tau: F) -> F {
    let u = z - f.z_d();
    if u < F::zero() {
        return F::zero();
    }
    let s2 = f.sigma() * f.sigma();
    let eta = f.eta();
    let a = (F::two() * s2 * tau).sqrt();
    let g = (u + eta * tau) / a;
    let gauss = (-g * g).exp();
    let peak = F::FRAC_2_SQRT_PI() / a;
    let b = (u - eta * tau) / a;
    if b >= F::zero() {
        gauss * (peak + eta / s2 * erfcx(b))
    } else {
        peak * gauss + eta / s2 * (-F::two() * eta * u / s2).exp() * erfc(b)
    }
}
