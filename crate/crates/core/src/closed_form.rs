//! Closed-form feedback law for the single-asset problem.
//!
//! Everything here is built on the characteristic roots `gamma1 < 0 < gamma2`
//! of `x^2 + sigma^2 x - kappa sigma^2 / lambda = 0` and on the denominator
//!
//! ```text
//! D(t) = exp(gamma1 t + gamma2 T) - exp(gamma1 T + gamma2 t)
//!      = exp(gamma1 t + gamma2 T) * (1 - exp(-sqrt(Delta) (T - t)))
//! ```
//!
//! which vanishes at the horizon. The gain is `Gamma = D'/D`, so the position
//! factor `exp(int Gamma)` is just a ratio of denominators. All evaluations go
//! through the factored form above, in log space where a ratio is needed, so
//! that large `gamma2 T` never overflows and `D(T)` is exactly zero.

use crate::error::{Error, Result};

/// Weight `a` on the terminal penalty `(a/2) theta_T^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TerminalPenalty {
    /// The liquidation constraint `theta_T = 0`, reached as `a -> infinity`.
    Infinite,
    Finite(f64),
}

impl TerminalPenalty {
    pub fn finite(self) -> Option<f64> {
        match self {
            TerminalPenalty::Infinite => None,
            TerminalPenalty::Finite(a) => Some(a),
        }
    }
}

/// Market, cost and risk parameters of the single-asset problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Temporary cost on the dollar trading rate.
    pub lambda: f64,
    /// Risk aversion applied to the quadratic variation of the position.
    pub kappa: f64,
    /// Volatility per square-root time unit.
    pub sigma: f64,
    /// Liquidation horizon `T`.
    pub horizon: f64,
    /// Initial cash position in dollars.
    pub theta0: f64,
    pub penalty: TerminalPenalty,
}

impl ModelParams {
    pub fn new(lambda: f64, kappa: f64, sigma: f64, horizon: f64, theta0: f64) -> Result<Self> {
        let p = ModelParams {
            lambda,
            kappa,
            sigma,
            horizon,
            theta0,
            penalty: TerminalPenalty::Infinite,
        };
        p.validate()?;
        Ok(p)
    }

    /// `S0 = 100`, `q0 = 1000` shares, `T = 20`, `lambda = kappa = 0.2`, `sigma = 0.1`.
    pub fn canonical() -> Self {
        ModelParams {
            lambda: 0.2,
            kappa: 0.2,
            sigma: 0.1,
            horizon: 20.0,
            theta0: 1.0e5,
            penalty: TerminalPenalty::Infinite,
        }
    }

    pub fn with_penalty(mut self, a: f64) -> Self {
        self.penalty = TerminalPenalty::Finite(a);
        self
    }

    pub fn with_theta0(mut self, theta0: f64) -> Self {
        self.theta0 = theta0;
        self
    }

    /// Strict domain of the closed form: every coefficient positive.
    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("kappa", self.kappa)?;
        positive("sigma", self.sigma)?;
        positive("horizon", self.horizon)?;
        if !self.theta0.is_finite() {
            return Err(Error::param("theta0", "must be finite"));
        }
        if let TerminalPenalty::Finite(a) = self.penalty {
            positive("a", a)?;
        }
        Ok(())
    }

    /// The discrete oracles also accept the degenerate `kappa = 0`, `sigma = 0`
    /// and `a = 0` corners, but need a finite penalty.
    pub(crate) fn validate_discrete(&self) -> Result<f64> {
        positive("lambda", self.lambda)?;
        positive("horizon", self.horizon)?;
        non_negative("kappa", self.kappa)?;
        non_negative("sigma", self.sigma)?;
        if !self.theta0.is_finite() {
            return Err(Error::param("theta0", "must be finite"));
        }
        match self.penalty {
            TerminalPenalty::Infinite => Err(Error::param(
                "a",
                "the discrete recursion needs a finite terminal penalty",
            )),
            TerminalPenalty::Finite(a) => {
                non_negative("a", a)?;
                Ok(a)
            }
        }
    }
}

pub(crate) fn positive(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and > 0, got {x}"),
        ))
    }
}

pub(crate) fn non_negative(name: &'static str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must be finite and >= 0, got {x}"),
        ))
    }
}

/// Characteristic roots and discriminant, plus the horizon they are evaluated against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefBundle {
    pub gamma1: f64,
    pub gamma2: f64,
    pub delta: f64,
    pub horizon: f64,
}

/// Roots of `x^2 + sigma^2 x - kappa sigma^2 / lambda = 0`.
pub fn characteristic_roots(p: &ModelParams) -> Result<CoefBundle> {
    p.validate()?;
    let s2 = p.sigma * p.sigma;
    let delta = s2 * (s2 + 4.0 * p.kappa / p.lambda);
    let sqrt_delta = delta.sqrt();
    let gamma1 = (-s2 - sqrt_delta) / 2.0;
    // gamma2 = (-s2 + sqrt_delta) / 2 cancels badly when kappa/lambda is tiny;
    // the product of the roots gives it without subtraction.
    let gamma2 = -(p.kappa * s2 / p.lambda) / gamma1;
    Ok(CoefBundle {
        gamma1,
        gamma2,
        delta,
        horizon: p.horizon,
    })
}

/// `ln(1 - exp(-y))` for `y >= 0`.
fn ln_one_minus_exp_neg(y: f64) -> f64 {
    if y > std::f64::consts::LN_2 {
        (-(-y).exp()).ln_1p()
    } else {
        (-(-y).exp_m1()).ln()
    }
}

impl CoefBundle {
    pub fn sqrt_delta(&self) -> f64 {
        self.delta.sqrt()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.horizon {
            Err(Error::OutOfDomain {
                t,
                horizon: self.horizon,
            })
        } else {
            Ok(())
        }
    }

    fn check_before_horizon(&self, t: f64) -> Result<()> {
        self.check_time(t)?;
        if t == self.horizon {
            Err(Error::Pole { t })
        } else {
            Ok(())
        }
    }

    /// `ln D(t)`; `-inf` at the horizon.
    pub fn log_denominator(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let x = self.horizon - t;
        if x == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.gamma1 * t
            + self.gamma2 * self.horizon
            + ln_one_minus_exp_neg(self.sqrt_delta() * x))
    }

    /// `D(t) = exp(gamma1 t + gamma2 T) - exp(gamma1 T + gamma2 t)`.
    pub fn denominator(&self, t: f64) -> Result<f64> {
        Ok(self.log_denominator(t)?.exp())
    }

    /// `D'(t) = gamma1 exp(gamma1 t + gamma2 T) - gamma2 exp(gamma1 T + gamma2 t)`.
    pub fn denominator_derivative(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let x = self.horizon - t;
        let scale = (self.gamma1 * t + self.gamma2 * self.horizon).exp();
        Ok(scale * (self.gamma1 - self.gamma2 * (-self.sqrt_delta() * x).exp()))
    }

    /// `beta_inf(t) = 1 / D(t)`.
    pub fn beta_inf(&self, t: f64) -> Result<f64> {
        self.check_before_horizon(t)?;
        Ok((-self.log_denominator(t)?).exp())
    }

    /// Feedback gain `Gamma(t) = D'(t) / D(t) = gamma1 - sqrt(Delta) / expm1(sqrt(Delta) (T - t))`.
    pub fn gamma_rate(&self, t: f64) -> Result<f64> {
        self.check_before_horizon(t)?;
        let sd = self.sqrt_delta();
        Ok(self.gamma1 - sd / (sd * (self.horizon - t)).exp_m1())
    }

    /// `int_{t0}^{t1} Gamma(s) ds = ln(D(t1) / D(t0))`; `-inf` when `t1 = T`.
    pub fn integrated_gamma(&self, t0: f64, t1: f64) -> Result<f64> {
        self.check_time(t0)?;
        self.check_time(t1)?;
        if t1 < t0 {
            return Err(Error::OutOfDomain {
                t: t1,
                horizon: self.horizon,
            });
        }
        if t0 == t1 {
            return Ok(0.0);
        }
        if t1 == self.horizon {
            return Ok(f64::NEG_INFINITY);
        }
        let sd = self.sqrt_delta();
        let x0 = self.horizon - t0;
        let x1 = self.horizon - t1;
        Ok(self.gamma1 * (t1 - t0) + ln_one_minus_exp_neg(sd * x1) - ln_one_minus_exp_neg(sd * x0))
    }

    /// Deterministic part of the optimal position, `D(t) / D(0)`.
    pub fn position_factor(&self, t: f64) -> Result<f64> {
        Ok(self.integrated_gamma(0.0, t)?.exp())
    }

    /// `D'(t) / D(s)` for `s <= t`, finite up to and including `t = T`.
    ///
    /// This is the product `Gamma(t) D(t) / D(s)` without the `0 * inf` at the horizon.
    pub fn derivative_ratio(&self, t: f64, s: f64) -> Result<f64> {
        self.check_time(t)?;
        self.check_before_horizon(s)?;
        if s > t {
            return Err(Error::OutOfDomain {
                t: s,
                horizon: self.horizon,
            });
        }
        let sd = self.sqrt_delta();
        let log_scale = self.gamma1 * (t - s) - ln_one_minus_exp_neg(sd * (self.horizon - s));
        Ok(log_scale.exp() * (self.gamma1 - self.gamma2 * (-sd * (self.horizon - t)).exp()))
    }

    /// Coefficients `(c_alpha, c_exp)` with `nu(t) = c_alpha alpha_t + c_exp E[alpha_T | F_t]`.
    ///
    /// Expanding the offset and using `gamma1 + gamma2 = -sigma^2` collapses it to
    /// `c_alpha = -(Gamma(t) + sigma^2) / (kappa sigma^2)` and
    /// `c_exp = -sqrt(Delta) exp(-sigma^2 T) / (kappa sigma^2 D(t))`.
    pub fn nu_coefficients(&self, p: &ModelParams, t: f64) -> Result<(f64, f64)> {
        self.check_before_horizon(t)?;
        let s2 = p.sigma * p.sigma;
        let c = 1.0 / (p.kappa * s2);
        let sd = self.sqrt_delta();
        let x = self.horizon - t;
        let c_alpha = -c * (self.gamma_rate(t)? + s2);
        // exp(-sigma^2 T) / D(t) = exp(gamma1 x) / (1 - exp(-sqrt(Delta) x))
        let c_exp = -c * sd * (self.gamma1 * x).exp() / -(-sd * x).exp_m1();
        Ok((c_alpha, c_exp))
    }
}

/// Drift-induced offset `nu(t)` given the realised drift `alpha_t` and
/// `E^Q[alpha_T | F_t]`. Linear in both; zero when both vanish.
pub fn nu_offset(
    c: &CoefBundle,
    p: &ModelParams,
    t: f64,
    alpha_t: f64,
    exp_alpha_terminal: f64,
) -> Result<f64> {
    let (ca, ce) = c.nu_coefficients(p, t)?;
    Ok(ca * alpha_t + ce * exp_alpha_terminal)
}

/// `u*(t) = theta_t Gamma(t) + nu(t)`.
pub fn optimal_control(
    c: &CoefBundle,
    p: &ModelParams,
    t: f64,
    theta_t: f64,
    alpha_t: f64,
    exp_alpha_terminal: f64,
) -> Result<f64> {
    Ok(theta_t * c.gamma_rate(t)? + nu_offset(c, p, t, alpha_t, exp_alpha_terminal)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn canonical() -> (ModelParams, CoefBundle) {
        let p = ModelParams::canonical();
        (p, characteristic_roots(&p).unwrap())
    }

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn roots_match_bisection_on_the_characteristic_polynomial() {
        let (p, c) = canonical();
        let s2 = p.sigma * p.sigma;
        let poly = |x: f64| x * x + s2 * x - p.kappa * s2 / p.lambda;
        let neg = bisect(poly, -10.0, 0.0);
        let pos = bisect(poly, 0.0, 10.0);
        assert_relative_eq!(c.gamma1, neg, max_relative = 1e-12);
        assert_relative_eq!(c.gamma2, pos, max_relative = 1e-12);
        assert_relative_eq!(c.gamma1, -0.1051249, epsilon = 1e-7);
        assert_relative_eq!(c.gamma2, 0.0951249, epsilon = 1e-7);
        assert_relative_eq!(c.delta, 0.0401, max_relative = 1e-14);
    }

    #[test]
    fn zero_or_negative_parameters_are_rejected() {
        let mut p = ModelParams::canonical();
        p.sigma = 0.0;
        assert!(matches!(
            characteristic_roots(&p),
            Err(Error::InvalidParameter { name: "sigma", .. })
        ));
        let p = ModelParams::canonical().with_penalty(-1.0);
        assert!(matches!(
            characteristic_roots(&p),
            Err(Error::InvalidParameter { name: "a", .. })
        ));
        assert!(ModelParams::new(0.2, f64::NAN, 0.1, 20.0, 1.0).is_err());
        assert!(ModelParams::new(0.2, 0.2, 0.1, -1.0, 1.0).is_err());
    }

    #[test]
    fn denominator_vanishes_at_horizon_and_is_positive_before() {
        let (_, c) = canonical();
        assert_eq!(c.denominator(20.0).unwrap(), 0.0);
        for k in 0..200 {
            let t = 20.0 * k as f64 / 200.0;
            assert!(c.denominator(t).unwrap() > 0.0, "D({t}) <= 0");
        }
        assert!(matches!(
            c.denominator(20.5),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(
            c.denominator(-0.1),
            Err(Error::OutOfDomain { .. })
        ));
    }

    #[test]
    fn denominator_at_zero_matches_the_unfactored_expression() {
        let (_, c) = canonical();
        let direct = (c.gamma2 * 20.0).exp() - (c.gamma1 * 20.0).exp();
        assert_relative_eq!(c.denominator(0.0).unwrap(), direct, max_relative = 1e-14);
        // Reference value from extended precision.
        assert_relative_eq!(
            c.denominator(0.0).unwrap(),
            6.580_468_769_284_116,
            max_relative = 1e-14
        );
    }

    #[test]
    fn large_exponents_do_not_overflow() {
        let p = ModelParams::new(0.01, 5.0, 2.0, 400.0, 1.0).unwrap();
        let c = characteristic_roots(&p).unwrap();
        assert!(c.gamma2 * c.horizon > 500.0);
        let g = c.gamma_rate(0.0).unwrap();
        assert!(g.is_finite() && g < 0.0);
        let ig = c.integrated_gamma(0.0, 200.0).unwrap();
        assert_relative_eq!(ig, c.gamma1 * 200.0, max_relative = 1e-12);
        assert!(c.log_denominator(0.0).unwrap().is_finite());
        let (ca, ce) = c.nu_coefficients(&p, 10.0).unwrap();
        assert!(ca.is_finite() && ce.is_finite());
    }

    #[test]
    fn beta_is_reciprocal_of_denominator_with_pole_at_horizon() {
        let (_, c) = canonical();
        for t in [0.0, 1.0, 7.5, 19.0, 19.999] {
            let b = c.beta_inf(t).unwrap();
            assert!(b > 0.0);
            assert_relative_eq!(b * c.denominator(t).unwrap(), 1.0, max_relative = 1e-13);
        }
        assert_eq!(c.beta_inf(20.0), Err(Error::Pole { t: 20.0 }));
    }

    #[test]
    fn gamma_matches_the_beta_form() {
        let (_, c) = canonical();
        for t in [0.0, 3.0, 10.0, 17.0, 19.9] {
            let a = (c.gamma1 * t + c.gamma2 * 20.0).exp();
            let b = (c.gamma1 * 20.0 + c.gamma2 * t).exp();
            let direct = c.beta_inf(t).unwrap() * (c.gamma1 * a - c.gamma2 * b);
            assert_relative_eq!(c.gamma_rate(t).unwrap(), direct, max_relative = 1e-12);
            let ratio = c.denominator_derivative(t).unwrap() / c.denominator(t).unwrap();
            assert_relative_eq!(c.gamma_rate(t).unwrap(), ratio, max_relative = 1e-12);
        }
    }

    #[test]
    fn pole_law_at_horizon() {
        let (p, c) = canonical();
        let eps = 1e-6;
        assert!((eps * c.gamma_rate(20.0 - eps).unwrap() + 1.0).abs() < 1e-4);
        // Taylor expansion of D at T: eps Gamma(T - eps) = -1 - eps sigma^2 / 2 + O(eps^2).
        for eps in [1e-3, 1e-4, 1e-5] {
            let resid = (eps * c.gamma_rate(20.0 - eps).unwrap() + 1.0).abs();
            assert!(resid < p.sigma * p.sigma * eps, "eps = {eps}: {resid}");
        }
        assert_eq!(c.gamma_rate(20.0), Err(Error::Pole { t: 20.0 }));
    }

    #[test]
    fn gamma_is_close_to_gamma1_far_from_horizon() {
        let (_, c) = canonical();
        let g = c.gamma_rate(0.0).unwrap();
        assert!(g < c.gamma1);
        assert!((g - c.gamma1).abs() < 0.05 * c.gamma1.abs());
    }

    #[test]
    fn integrated_gamma_matches_adaptive_quadrature() {
        let (_, c) = canonical();
        for frac in [0.1, 0.25, 0.5, 0.75, 0.9, 0.99] {
            let t = frac * c.horizon;
            let f = |s: f64| c.gamma_rate(s).unwrap();
            let quad = adaptive_simpson(&f, 0.0, t, 1e-13);
            let exact = c.integrated_gamma(0.0, t).unwrap();
            assert!(
                ((exact - quad) / quad).abs() < 1e-8,
                "t = {t}: {exact} vs {quad}"
            );
        }
        assert_eq!(c.integrated_gamma(3.0, 3.0).unwrap(), 0.0);
        assert_eq!(c.integrated_gamma(0.0, 20.0).unwrap(), f64::NEG_INFINITY);
        assert!(c.integrated_gamma(5.0, 4.0).is_err());
    }

    #[test]
    fn nu_vanishes_without_drift() {
        let (p, c) = canonical();
        for t in [0.0, 5.0, 19.99] {
            assert_eq!(nu_offset(&c, &p, t, 0.0, 0.0).unwrap(), 0.0);
        }
        assert_eq!(
            nu_offset(&c, &p, 20.0, 0.0, 0.0),
            Err(Error::Pole { t: 20.0 })
        );
    }

    #[test]
    fn nu_agrees_with_the_unsimplified_expression() {
        let (p, c) = canonical();
        let (g1, g2, s2, tt) = (c.gamma1, c.gamma2, p.sigma * p.sigma, p.horizon);
        let ks2 = p.kappa * s2;
        for &(t, alpha, e) in &[
            (0.0, 0.05, 0.05),
            (4.0, 0.03, -0.02),
            (12.0, -0.1, 0.07),
            (19.0, 0.02, 0.01),
        ] {
            let beta = 1.0 / ((g1 * t + g2 * tt).exp() - (g1 * tt + g2 * t).exp());
            let literal = beta
                * (g1
                    * ((g1 + s2) * t).exp()
                    * (-alpha / ks2 * (g2 * tt - s2 * t).exp()
                        + (g2 * t - s2 * tt).exp() * e / ks2)
                    + g2 * ((g2 + s2) * t).exp()
                        * (alpha / ks2 * (g1 * tt - s2 * t).exp()
                            - (g1 * t - s2 * tt).exp() * e / ks2))
                - alpha / p.kappa;
            assert_relative_eq!(
                nu_offset(&c, &p, t, alpha, e).unwrap(),
                literal,
                max_relative = 1e-10
            );
        }
    }

    #[test]
    fn nu_is_linear_increasing_in_alpha_and_decreasing_in_terminal_expectation() {
        let (p, c) = canonical();
        for t in [0.0, 6.0, 15.0, 19.5] {
            let one = nu_offset(&c, &p, t, 0.04, 0.03).unwrap();
            let two = nu_offset(&c, &p, t, 0.08, 0.06).unwrap();
            assert_relative_eq!(two, 2.0 * one, max_relative = 1e-14);
            let (ca, ce) = c.nu_coefficients(&p, t).unwrap();
            assert!(ca > 0.0 && ce < 0.0);
        }
    }

    #[test]
    fn optimal_control_signs_and_scaling() {
        let (p, c) = canonical();
        assert_eq!(optimal_control(&c, &p, 3.0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        let u1 = optimal_control(&c, &p, 3.0, 1.0e5, 0.0, 0.0).unwrap();
        let u3 = optimal_control(&c, &p, 3.0, 3.0e5, 0.0, 0.0).unwrap();
        assert!(u1 < 0.0);
        assert_relative_eq!(u3, 3.0 * u1, max_relative = 1e-15);
    }

    #[test]
    fn closed_form_solves_the_expected_control_ode_system() {
        // Under Q, z(s) = E[theta_s | F_s0] and v(s) = E[u_s | F_s0] must satisfy
        // v' = (kappa sigma^2 / lambda) z, z' = sigma^2 z + v, with z(T) = 0.
        let (p, c) = canonical();
        let s2 = p.sigma * p.sigma;
        let k = p.kappa * s2 / p.lambda;
        let theta_s0 = 1.0;
        for s0 in [0.0, 5.0, 12.0] {
            let z = |s: f64| theta_s0 * (c.integrated_gamma(s0, s).unwrap() + s2 * (s - s0)).exp();
            let v = |s: f64| theta_s0 * c.derivative_ratio(s, s0).unwrap() * (s2 * (s - s0)).exp();
            let h = 1e-4;
            let mut s = s0 + 0.5;
            while s < 19.0 {
                let dv = (v(s + h) - v(s - h)) / (2.0 * h);
                let dz = (z(s + h) - z(s - h)) / (2.0 * h);
                assert!((dv - k * z(s)).abs() < 1e-6, "v' residual at {s}");
                assert!((dz - s2 * z(s) - v(s)).abs() < 1e-6, "z' residual at {s}");
                s += 0.37;
            }
            assert_eq!(z(20.0), 0.0);
            assert!(v(20.0).is_finite() && v(20.0) < 0.0);
        }
    }

    #[test]
    fn higher_risk_aversion_liquidates_faster() {
        for sigma in [0.05, 0.1, 0.4] {
            let lo = characteristic_roots(&ModelParams::new(0.2, 0.05, sigma, 20.0, 1.0).unwrap())
                .unwrap();
            let hi = characteristic_roots(&ModelParams::new(0.2, 0.8, sigma, 20.0, 1.0).unwrap())
                .unwrap();
            for k in 1..100 {
                let t = 0.2 * k as f64;
                assert!(
                    hi.integrated_gamma(0.0, t).unwrap() < lo.integrated_gamma(0.0, t).unwrap()
                );
            }
        }
    }

    #[test]
    fn higher_cost_liquidates_slower_early_on() {
        for sigma in [0.05, 0.1, 0.4] {
            for kappa in [0.05, 0.2, 0.8] {
                let cheap =
                    characteristic_roots(&ModelParams::new(0.05, kappa, sigma, 20.0, 1.0).unwrap())
                        .unwrap();
                let dear =
                    characteristic_roots(&ModelParams::new(0.8, kappa, sigma, 20.0, 1.0).unwrap())
                        .unwrap();
                for k in 1..50 {
                    let t = 0.2 * k as f64;
                    assert!(
                        dear.integrated_gamma(0.0, t).unwrap()
                            > cheap.integrated_gamma(0.0, t).unwrap()
                    );
                }
            }
        }
    }

    fn params() -> impl Strategy<Value = ModelParams> {
        (0.01f64..5.0, 0.01f64..5.0, 0.01f64..1.0, 0.1f64..50.0).prop_map(
            |(lambda, kappa, sigma, horizon)| {
                ModelParams::new(lambda, kappa, sigma, horizon, 1.0).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn vieta_identities_hold(p in params()) {
            let c = characteristic_roots(&p).unwrap();
            let s2 = p.sigma * p.sigma;
            prop_assert!(c.gamma1 < 0.0 && c.gamma2 > 0.0);
            prop_assert!(((c.gamma1 + c.gamma2) + s2).abs() <= 1e-12 * s2);
            let prod = -p.kappa * s2 / p.lambda;
            prop_assert!((c.gamma1 * c.gamma2 - prod).abs() <= 1e-12 * prod.abs());
        }

        #[test]
        fn gain_is_below_gamma1_and_decreasing(p in params(), u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let c = characteristic_roots(&p).unwrap();
            let (t1, t2) = if u < v { (u * p.horizon, v * p.horizon) } else { (v * p.horizon, u * p.horizon) };
            prop_assume!(t2 < p.horizon);
            let g1 = c.gamma_rate(t1).unwrap();
            let g2 = c.gamma_rate(t2).unwrap();
            prop_assert!(c.beta_inf(t1).unwrap() > 0.0);
            prop_assert!(g1 <= c.gamma1 && g2 <= c.gamma1);
            prop_assert!(g2 <= g1);
            // Strict once the correction is representable next to gamma1.
            let sd = c.sqrt_delta();
            if sd * (p.horizon - t1) < 30.0 {
                prop_assert!(g1 < c.gamma1);
            }
            if t1 < t2 && sd * (p.horizon - t1) < 30.0 {
                prop_assert!(g2 < g1);
            }
        }
    }
}
