//! Scalar special functions behind every distributional computation in the
//! crate: the regularized incomplete beta function, central and noncentral F
//! distribution functions, F quantiles and the standard normal CDF/quantile.
//!
//! The incomplete beta is evaluated with the modified Lentz continued fraction,
//! switching to the complementary fraction above `u = (a+1)/(a+b+2)`. The
//! noncentral F uses the Poisson mixture of central F distributions, summed
//! outward from the modal Poisson index until the neglected tail mass on each
//! side is below [`SERIES_TAIL`].

use statrs::function::erf;
use statrs::function::gamma::ln_gamma;

use crate::error::{domain, Result};

/// Poisson tail mass allowed to be dropped from each mixture series.
pub const SERIES_TAIL: f64 = 1e-12;

const CF_MAX_ITER: usize = 20_000;
const CF_EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Degrees of freedom and noncentrality of an F law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FParams {
    pub r: f64,
    pub s: f64,
    pub delta: f64,
}

impl FParams {
    pub fn new(r: f64, s: f64, delta: f64) -> Result<Self> {
        check_df(r, s)?;
        if !(delta >= 0.0) || !delta.is_finite() {
            return domain(format!("noncentrality must be finite and >= 0, got {delta}"));
        }
        Ok(Self { r, s, delta })
    }

    pub fn central(r: f64, s: f64) -> Result<Self> {
        Self::new(r, s, 0.0)
    }

    pub fn cdf(&self, u: f64) -> Result<f64> {
        noncentral_f_cdf(u, self.r, self.s, self.delta)
    }
}

fn check_df(r: f64, s: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) || !(s > 0.0 && s.is_finite()) {
        return domain(format!("degrees of freedom must be positive, got ({r}, {s})"));
    }
    Ok(())
}

fn check_shape(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) || !(b > 0.0 && b.is_finite()) {
        return domain(format!("beta shape parameters must be positive, got ({a}, {b})"));
    }
    Ok(())
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Continued fraction for `I_u(a,b)`, modified Lentz.
fn beta_cf(a: f64, b: f64, u: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * u / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * u / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * u / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    h
}

/// Returns `(I_u(a,b), 1 - I_u(a,b))`, each computed without cancellation.
/// `u1` must equal `1 - u`; it is passed separately so callers that know the
/// complement exactly (F distribution arguments) do not lose digits.
fn beta_both(u: f64, u1: f64, a: f64, b: f64) -> (f64, f64) {
    if u <= 0.0 {
        return (0.0, 1.0);
    }
    if u1 <= 0.0 {
        return (1.0, 0.0);
    }
    let ln_front = a * u.ln() + b * u1.ln() - ln_beta(a, b);
    let front = ln_front.exp();
    if u < (a + 1.0) / (a + b + 2.0) {
        let lower = (front * beta_cf(a, b, u) / a).clamp(0.0, 1.0);
        (lower, 1.0 - lower)
    } else {
        let upper = (front * beta_cf(b, a, u1) / b).clamp(0.0, 1.0);
        (1.0 - upper, upper)
    }
}

/// Regularized incomplete beta function `I_u(a, b)`.
pub fn reg_inc_beta(u: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("incomplete beta argument must lie in [0,1], got {u}"));
    }
    Ok(beta_both(u, 1.0 - u, a, b).0)
}

/// `1 - I_u(a, b)`, accurate in the upper tail.
pub fn reg_inc_beta_complement(u: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("incomplete beta argument must lie in [0,1], got {u}"));
    }
    Ok(beta_both(u, 1.0 - u, a, b).1)
}

/// Solves `I_x(a,b) = p` for `x`, using Newton steps safeguarded by a bisection
/// bracket. Returns `x` together with `1 - x` computed from the side that
/// carries full precision.
fn beta_solve(p: f64, a: f64, b: f64) -> (f64, f64) {
    // Work on whichever side keeps the target probability <= 1/2 so that the
    // unknown near 0 is resolved to full relative precision.
    if p > 0.5 {
        let (y, y1) = beta_solve(1.0 - p, b, a);
        return (y1, y);
    }
    let lnb = ln_beta(a, b);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = (a / (a + b)).clamp(1e-3, 1.0 - 1e-3);
    for _ in 0..400 {
        let (f, _) = beta_both(x, 1.0 - x, a, b);
        let g = f - p;
        if g == 0.0 {
            break;
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lnb;
        let step = g / ln_pdf.exp();
        let mut next = x - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs() || hi - lo <= 4.0 * f64::EPSILON * hi
        {
            x = next;
            break;
        }
        x = next;
    }
    (x, 1.0 - x)
}

/// Inverse of `u -> I_u(a, b)`.
pub fn beta_quantile(p: f64, a: f64, b: f64) -> Result<f64> {
    check_shape(a, b)?;
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("probability must lie in [0,1], got {p}"));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(beta_solve(p, a, b).0)
}

/// Central F distribution function `F_{r,s}(u) = I_{ru/(ru+s)}(r/2, s/2)`.
pub fn f_cdf(u: f64, r: f64, s: f64) -> Result<f64> {
    check_df(r, s)?;
    if !(u >= 0.0) {
        return domain(format!("F argument must be nonnegative, got {u}"));
    }
    if u.is_infinite() {
        return Ok(1.0);
    }
    let ru = r * u;
    Ok(beta_both(ru / (ru + s), s / (ru + s), 0.5 * r, 0.5 * s).0)
}

/// Upper tail `1 - F_{r,s}(u)` without cancellation.
pub fn f_sf(u: f64, r: f64, s: f64) -> Result<f64> {
    check_df(r, s)?;
    if !(u >= 0.0) {
        return domain(format!("F argument must be nonnegative, got {u}"));
    }
    if u.is_infinite() {
        return Ok(0.0);
    }
    let ru = r * u;
    Ok(beta_both(ru / (ru + s), s / (ru + s), 0.5 * r, 0.5 * s).1)
}

/// Quantile of the central F law: the `u` with `F_{r,s}(u) = p`.
pub fn f_quantile(p: f64, r: f64, s: f64) -> Result<f64> {
    check_df(r, s)?;
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("quantile level must lie in (0,1), got {p}"));
    }
    let (x, x1) = beta_solve(p, 0.5 * r, 0.5 * s);
    Ok(s * x / (r * x1))
}

/// Upper quantile: the `u` with `1 - F_{r,s}(u) = q`.
pub fn f_isf(q: f64, r: f64, s: f64) -> Result<f64> {
    check_df(r, s)?;
    if !(q > 0.0 && q < 1.0) {
        return domain(format!("tail level must lie in (0,1), got {q}"));
    }
    // 1 - I_x(r/2, s/2) = q  <=>  I_{1-x}(s/2, r/2) = q
    let (y, y1) = beta_solve(q, 0.5 * s, 0.5 * r);
    Ok(s * y1 / (r * y))
}

/// Sums `sum_l Pois(lambda; l) * term(l)` outward from the modal index,
/// stopping on each side once the remaining Poisson mass is below
/// `SERIES_TAIL / 2`.
pub fn poisson_mixture<F>(lambda: f64, mut term: F) -> Result<f64>
where
    F: FnMut(u64) -> Result<f64>,
{
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return domain(format!("Poisson mean must be finite and >= 0, got {lambda}"));
    }
    if lambda == 0.0 {
        return term(0);
    }
    let half_tail = 0.5 * SERIES_TAIL;
    let mode = lambda.floor() as u64;
    let w_mode = (-lambda + mode as f64 * lambda.ln() - ln_gamma(mode as f64 + 1.0)).exp();
    let mut total = w_mode * term(mode)?;

    let mut w = w_mode;
    let mut l = mode;
    loop {
        l += 1;
        w *= lambda / l as f64;
        total += w * term(l)?;
        let rho = lambda / (l + 1) as f64;
        if rho < 1.0 && w * rho / (1.0 - rho) < half_tail {
            break;
        }
    }

    let mut w = w_mode;
    let mut l = mode;
    while l > 0 {
        let sigma = l as f64 / lambda;
        if sigma < 1.0 && w * sigma / (1.0 - sigma) < half_tail {
            break;
        }
        w *= sigma;
        l -= 1;
        total += w * term(l)?;
    }
    Ok(total)
}

/// Noncentral F distribution function, as a Poisson mixture of central F
/// laws: `sum_l Pois(delta/2; l) F_{r+2l,s}(r u / (r+2l))`.
pub fn noncentral_f_cdf(u: f64, r: f64, s: f64, delta: f64) -> Result<f64> {
    FParams::new(r, s, delta)?;
    if !(u >= 0.0) {
        return domain(format!("F argument must be nonnegative, got {u}"));
    }
    if delta == 0.0 {
        return f_cdf(u, r, s);
    }
    let v = poisson_mixture(0.5 * delta, |l| {
        let rl = r + 2.0 * l as f64;
        f_cdf(r * u / rl, rl, s)
    })?;
    Ok(v.clamp(0.0, 1.0))
}

/// Mean of the noncentral F law, defined for `s > 2`.
pub fn noncentral_f_mean(r: f64, s: f64, delta: f64) -> Result<f64> {
    FParams::new(r, s, delta)?;
    if s <= 2.0 {
        return domain(format!("F mean undefined for s <= 2 (s = {s})"));
    }
    Ok(s * (r + delta) / (r * (s - 2.0)))
}

/// Variance of the noncentral F law, defined for `s > 4`.
pub fn noncentral_f_variance(r: f64, s: f64, delta: f64) -> Result<f64> {
    FParams::new(r, s, delta)?;
    if s <= 4.0 {
        return domain(format!("F variance undefined for s <= 4 (s = {s})"));
    }
    let num = (r + delta).powi(2) + (r + 2.0 * delta) * (s - 2.0);
    Ok(2.0 * (s / r).powi(2) * num / ((s - 2.0).powi(2) * (s - 4.0)))
}

/// `(mean, variance)` of the noncentral F law; requires `s > 4`.
pub fn noncentral_f_moments(r: f64, s: f64, delta: f64) -> Result<(f64, f64)> {
    let mean = noncentral_f_mean(r, s, delta)?;
    let variance = noncentral_f_variance(r, s, delta)?;
    Ok((mean, variance))
}

/// Complementary error function: power series for `erf` below 2, continued
/// fraction above.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    let two_over_sqrt_pi = std::f64::consts::FRAC_2_SQRT_PI;
    if x < 2.0 {
        let x2 = x * x;
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        while term > 1e-17 * sum {
            k += 1.0;
            term *= 2.0 * x2 / (2.0 * k + 1.0);
            sum += term;
        }
        return 1.0 - two_over_sqrt_pi * (-x2).exp() * sum;
    }
    if x > 27.3 {
        return 0.0;
    }
    // f = x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for j in 1..500 {
        let a = 0.5 * j as f64;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = c * d;
        f *= del;
        if (del - 1.0).abs() < CF_EPS {
            break;
        }
    }
    0.5 * two_over_sqrt_pi * (-x * x).exp() / f
}

pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `1 - Phi(x)` without cancellation.
pub fn std_normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return domain(format!("quantile level must lie in (0,1), got {p}"));
    }
    let mut z = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // One Newton step against the accurate CDF.
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 {
        let err = if p < 0.5 {
            std_normal_cdf(z) - p
        } else {
            (1.0 - p) - std_normal_sf(z)
        };
        z -= err / pdf;
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_endpoints_and_closed_forms() {
        assert_eq!(reg_inc_beta(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(reg_inc_beta(1.0, 2.0, 3.0).unwrap(), 1.0);
        assert!((reg_inc_beta(0.5, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let v = reg_inc_beta(0.2, 1.0, 3.0).unwrap();
        assert!((v - 0.488).abs() < 1e-14, "{v}");
    }

    #[test]
    fn beta_rejects_bad_domain() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
        assert!(beta_quantile(1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn f_cdf_small_cases() {
        assert_eq!(f_cdf(0.0, 3.0, 7.0).unwrap(), 0.0);
        assert!((f_cdf(1.0, 1.0, 1.0).unwrap() - 0.5).abs() < 1e-14);
        let expect = 1.0 - (1.0_f64 + 2.0 / 4.0).powf(-2.0);
        assert!((f_cdf(1.0, 2.0, 4.0).unwrap() - expect).abs() < 1e-14);
        assert!(f_cdf(-1.0, 1.0, 1.0).is_err());
        assert!(f_cdf(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn f_quantile_median_and_errors() {
        assert!((f_quantile(0.5, 1.0, 1.0).unwrap() - 1.0).abs() < 1e-12);
        assert!(f_quantile(0.0, 1.0, 1.0).is_err());
        assert!(f_quantile(1.0, 1.0, 1.0).is_err());
        let q = f_quantile(0.95, 43.0, 56.0).unwrap();
        let i = f_isf(0.05, 43.0, 56.0).unwrap();
        assert!((q - i).abs() < 1e-10 * q);
    }

    #[test]
    fn f_sf_complements_cdf() {
        for &(u, r, s) in &[(0.3, 2.0, 9.0), (5.0, 10.0, 3.0), (40.0, 43.0, 56.0)] {
            let c = f_cdf(u, r, s).unwrap();
            let t = f_sf(u, r, s).unwrap();
            assert!((c + t - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn noncentral_reduces_to_central() {
        for &(u, r, s) in &[(0.7, 3.0, 12.0), (2.0, 5.0, 30.0)] {
            assert_eq!(
                noncentral_f_cdf(u, r, s, 0.0).unwrap(),
                f_cdf(u, r, s).unwrap()
            );
        }
        assert!(noncentral_f_cdf(1.0, 1.0, 1.0, -1.0).is_err());
        assert!(noncentral_f_cdf(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn noncentral_large_delta_is_finite() {
        let v = noncentral_f_cdf(3.0, 10.0, 50.0, 5_000.0).unwrap();
        assert!((0.0..1e-10).contains(&v));
        let w = noncentral_f_cdf(3000.0, 10.0, 50.0, 5_000.0).unwrap();
        assert!(w > 0.99);
    }

    #[test]
    fn moments_domain() {
        let m = noncentral_f_mean(4.0, 10.0, 0.0).unwrap();
        assert!((m - 10.0 / 8.0).abs() < 1e-15);
        assert!(noncentral_f_mean(4.0, 2.0, 0.0).is_err());
        assert!(noncentral_f_variance(4.0, 4.0, 0.0).is_err());
        assert!(noncentral_f_moments(4.0, 3.0, 0.0).is_err());
        let v = noncentral_f_variance(1.0, 10.0, 0.0).unwrap();
        assert!((v - 4.6875).abs() < 1e-12, "{v}");
    }

    #[test]
    fn normal_functions() {
        assert!((std_normal_cdf(0.0) - 0.5).abs() < 1e-16);
        assert!((std_normal_sf(1.6448536269514722) - 0.05).abs() < 1e-14);
        let z = std_normal_quantile(0.975).unwrap();
        assert!((z - 1.959963984540054).abs() < 1e-12);
        assert!(std_normal_quantile(0.0).is_err());
        // erfc(1), erfc(3) from tables
        assert!((erfc(1.0) - 0.15729920705028513).abs() < 1e-15);
        assert!((erfc(3.0) / 2.209049699858544e-05 - 1.0).abs() < 1e-14);
        assert!((erfc(-0.5) - 1.5204998778130465).abs() < 1e-15);
    }

    #[test]
    fn poisson_weights_sum_to_one() {
        for &lam in &[0.3, 4.0, 57.5, 900.0] {
            let total = poisson_mixture(lam, |_| Ok(1.0)).unwrap();
            assert!((total - 1.0).abs() < 1e-11, "lambda {lam}: {total}");
        }
    }
}
