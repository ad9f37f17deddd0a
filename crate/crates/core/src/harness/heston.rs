//! Semi-analytic European put under the Heston model, used as an oracle.
//!
//! With `(α, β) = (0, 1/2)` the state `σ` is the instantaneous variance,
//! `dσ = κ(θ − σ)dt + v√σ dW`. A market price of risk `λ0` shifts the
//! drift to `κ* = κ + λ0`, `θ* = κθ/κ*`. The call follows from the two
//! probability integrals with the rotation-free characteristic function,
//! and the put from parity.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{ModelParams, OptionSpec};
use crate::quadrature::integrate_adaptive;

/// Default absolute quadrature tolerance.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

struct Heston {
    kappa: f64,
    theta: f64,
    xi: f64,
    rho: f64,
    r: f64,
    tau: f64,
    var0: f64,
}

impl Heston {
    /// Characteristic function of `ln S_T` under the measure selected by
    /// `j` (1: stock numéraire, 2: bank account).
    fn cf(&self, j: u8, phi: f64, log_spot: f64) -> Complex64 {
        let i = Complex64::i();
        let (u, b) = if j == 1 {
            (0.5, self.kappa - self.rho * self.xi)
        } else {
            (-0.5, self.kappa)
        };
        let a = self.kappa * self.theta;
        let x2 = self.xi * self.xi;
        let rho_xi_iphi = self.rho * self.xi * phi * i;
        let d = ((rho_xi_iphi - b).powi(2) - x2 * (2.0 * u * phi * i - phi * phi)).sqrt();
        let minus = b - rho_xi_iphi - d;
        let g = minus / (b - rho_xi_iphi + d);
        let e = (-d * self.tau).exp();
        let c = self.r * phi * i * self.tau + a / x2 * (minus * self.tau - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
        let dd = minus / x2 * (1.0 - e) / (1.0 - g * e);
        (c + dd * self.var0 + i * phi * log_spot).exp()
    }

    fn probability(&self, j: u8, log_spot: f64, log_strike: f64, tol: f64) -> Result<f64> {
        let i = Complex64::i();
        // φ = t/(1 − t) maps [0, 1) onto [0, ∞)
        let integrand = |t: f64| {
            let phi = t / (1.0 - t);
            let jac = 1.0 / ((1.0 - t) * (1.0 - t));
            if phi > 1e8 {
                return 0.0;
            }
            let v = (-i * phi * log_strike).exp() * self.cf(j, phi, log_spot) / (i * phi);
            v.re * jac
        };
        let integral = integrate_adaptive(integrand, 0.0, 1.0, tol * PI, 4000)?;
        Ok(0.5 + integral / PI)
    }
}

/// Put price at spot `spot` and variance state `sigma`.
pub fn heston_analytic_price(spot: f64, sigma: f64, spec: &OptionSpec, params: &ModelParams, tol: f64) -> Result<f64> {
    if !params.is_heston() {
        return Err(Error::UnsupportedModel(
            "the Fourier oracle needs alpha = 0, beta = 1/2",
        ));
    }
    params.validate()?;
    spec.validate()?;
    if !(spot > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spot/sigma",
            value: spot.min(sigma),
            expected: "positive spot and variance",
        });
    }
    let kappa = params.kappa + params.lambda0;
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "kappa + lambda0",
            value: kappa,
            expected: "positive risk-neutral mean reversion",
        });
    }
    let model = Heston {
        kappa,
        theta: params.kappa * params.theta / kappa,
        xi: params.v,
        rho: params.rho,
        r: params.r,
        tau: spec.maturity,
        var0: sigma,
    };
    let (ls, lk) = (spot.ln(), spec.strike.ln());
    let p1 = model.probability(1, ls, lk, tol)?;
    let p2 = model.probability(2, ls, lk, tol)?;
    let discount = (-params.r * spec.maturity).exp();
    let call = spot * p1 - spec.strike * discount * p2;
    let put = call - spot + spec.strike * discount;
    if !put.is_finite() {
        return Err(Error::Quadrature("non-finite oracle price".into()));
    }
    Ok(put)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn heston() -> ModelParams {
        ModelParams {
            alpha: 0.0,
            beta: 0.5,
            ..ModelParams::baseline()
        }
    }

    fn spec() -> OptionSpec {
        OptionSpec::put(100.0, 1.0).unwrap()
    }

    fn norm_cdf(x: f64) -> f64 {
        0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
    }

    fn bs_put(s: f64, k: f64, r: f64, var_total: f64, t: f64) -> f64 {
        let sd = var_total.sqrt();
        let d1 = ((s / k).ln() + r * t + 0.5 * var_total) / sd;
        let d2 = d1 - sd;
        k * (-r * t).exp() * norm_cdf(-d2) - s * norm_cdf(-d1)
    }

    /// Lewis' single-integral form with an independently written
    /// characteristic function of `ln(S_T/S) − rT`.
    fn lewis_put(s: f64, var0: f64, spec: &OptionSpec, p: &ModelParams) -> f64 {
        let i = Complex64::i();
        let (kappa, theta, xi, rho, t, r) = (p.kappa, p.theta, p.v, p.rho, spec.maturity, p.r);
        let cf = |z: Complex64| {
            let beta = kappa - rho * xi * i * z;
            let d = (beta * beta + xi * xi * (z * z + i * z)).sqrt();
            let g = (beta - d) / (beta + d);
            let e = (-d * t).exp();
            let a = kappa * theta / (xi * xi) * ((beta - d) * t - 2.0 * ((1.0 - g * e) / (1.0 - g)).ln());
            let b = (beta - d) / (xi * xi) * (1.0 - e) / (1.0 - g * e);
            (a + b * var0).exp()
        };
        let k = (s / spec.strike).ln() + r * t;
        let f = |u: f64| {
            let z = Complex64::new(u, -0.5);
            ((i * u * k).exp() * cf(z)).re / (u * u + 0.25)
        };
        let integral =
            integrate_adaptive(|t| f(t / (1.0 - t)) / ((1.0 - t) * (1.0 - t)), 0.0, 1.0, 1e-12, 4000).unwrap();
        let call = s - (s * spec.strike).sqrt() * (-r * t / 2.0).exp() / PI * integral;
        call - s + spec.strike * (-r * t).exp()
    }

    #[test]
    fn agrees_with_lewis_formula() {
        let p = heston();
        for (s, var0) in [(100.0, 0.1), (80.0, 0.05), (130.0, 0.2), (100.0, 0.02)] {
            let a = heston_analytic_price(s, var0, &spec(), &p, 1e-10).unwrap();
            let b = lewis_put(s, var0, &spec(), &p);
            assert!((a - b).abs() < 1e-7, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn tends_to_black_scholes_for_small_vol_of_vol() {
        // with v → 0 the variance is deterministic
        let p = ModelParams {
            v: 1e-2,
            rho: 0.0,
            ..heston()
        };
        let var0 = 0.06;
        let t = 1.0;
        let total = p.theta * t + (var0 - p.theta) * (1.0 - (-p.kappa * t).exp()) / p.kappa;
        for s in [70.0, 100.0, 140.0] {
            let a = heston_analytic_price(s, var0, &spec(), &p, 1e-8).unwrap();
            let b = bs_put(s, 100.0, p.r, total, t);
            assert!((a - b).abs() < 1e-3, "s={s}: {a} vs {b}");
        }
    }

    #[test]
    fn bounds_and_limits() {
        let p = heston();
        let sp = spec();
        for s in [50.0, 90.0, 100.0, 110.0, 200.0] {
            let put = heston_analytic_price(s, 0.1, &sp, &p, 1e-8).unwrap();
            let lower = (sp.strike * (-p.r).exp() - s).max(0.0);
            assert!(put >= lower - 1e-9, "s={s}");
            assert!(put <= sp.strike * (-p.r).exp() + 1e-9);
        }
        assert!(heston_analytic_price(5000.0, 0.1, &sp, &p, 1e-8).unwrap().abs() < 1e-7);
    }

    #[test]
    fn market_price_of_risk_shifts_drift() {
        let with = ModelParams {
            lambda0: 0.5,
            ..heston()
        };
        let kappa = 2.5;
        let shifted = ModelParams {
            kappa,
            theta: with.kappa * with.theta / kappa,
            lambda0: 0.0,
            ..heston()
        };
        let a = heston_analytic_price(100.0, 0.1, &spec(), &with, 1e-10).unwrap();
        let b = heston_analytic_price(100.0, 0.1, &spec(), &shifted, 1e-10).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn rejects_other_models() {
        assert!(matches!(
            heston_analytic_price(100.0, 0.1, &spec(), &ModelParams::baseline(), 1e-8),
            Err(Error::UnsupportedModel(_))
        ));
    }
}
