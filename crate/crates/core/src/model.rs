//! Stochastic volatility model parameters, the change of variables to
//! log-moneyness / scaled variance / time-to-maturity, and the coefficient
//! functions of the transformed convection-diffusion equation
//!
//! ```text
//! u_τ = a_xx u_xx + a_yy u_yy + a_xy u_xy + b_x u_x + b_y u_y
//! ```
//!
//! Every coefficient depends on `y` only, which is what lets the implicit
//! operators be factored once per solve.

use crate::error::{Error, Result};

/// Shape of the variance drift.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftForm {
    /// `κ σ^α (θ − σ)`
    Linear,
    /// `κ σ^{α+1} (θ − σ)`; the "N" models use this with `α = 0`.
    Nonlinear,
}

/// Named members of the model family plus an escape hatch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelKind {
    /// Square-root model (Heston).
    Sqr,
    /// GARCH / VAR model.
    Var,
    /// 3/2 model.
    ThreeHalves,
    Sqrn,
    Varn,
    ThreeHalvesN,
    Custom {
        alpha: f64,
        beta: f64,
        drift: DriftForm,
    },
}

impl ModelKind {
    pub fn drift_form(&self) -> DriftForm {
        match self {
            ModelKind::Sqr | ModelKind::Var | ModelKind::ThreeHalves => DriftForm::Linear,
            ModelKind::Sqrn | ModelKind::Varn | ModelKind::ThreeHalvesN => DriftForm::Nonlinear,
            ModelKind::Custom { drift, .. } => *drift,
        }
    }

    /// Nominal `(α, β)` before the drift form is folded in.
    pub fn nominal_exponents(&self) -> (f64, f64) {
        match self {
            ModelKind::Sqr | ModelKind::Sqrn => (0.0, 0.5),
            ModelKind::Var | ModelKind::Varn => (0.0, 1.0),
            ModelKind::ThreeHalves | ModelKind::ThreeHalvesN => (0.0, 1.5),
            ModelKind::Custom { alpha, beta, .. } => (*alpha, *beta),
        }
    }

    /// Effective `(α, β)` for the linear-drift template `κσ^α(θ−σ)`.
    pub fn exponents(&self) -> (f64, f64) {
        let (alpha, beta) = self.nominal_exponents();
        match self.drift_form() {
            DriftForm::Linear => (alpha, beta),
            DriftForm::Nonlinear => (alpha + 1.0, beta),
        }
    }
}

/// Parameters of the variance process and the market.
///
/// `alpha` is always the effective drift exponent; see [`ModelKind::exponents`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    pub kappa: f64,
    pub theta: f64,
    /// Volatility of variance.
    pub v: f64,
    pub rho: f64,
    pub r: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Market price of volatility risk, proportional to variance.
    pub lambda0: f64,
}

impl ModelParams {
    /// Baseline parameter set:
    /// `κ=2, θ=0.1, v=0.1, ρ=−0.5, r=0.05, α=β=0.5`.
    pub fn baseline() -> Self {
        ModelParams {
            kappa: 2.0,
            theta: 0.1,
            v: 0.1,
            rho: -0.5,
            r: 0.05,
            alpha: 0.5,
            beta: 0.5,
            lambda0: 0.0,
        }
    }

    /// Replace the exponents with those of `kind`.
    pub fn with_kind(mut self, kind: ModelKind) -> Self {
        let (alpha, beta) = kind.exponents();
        self.alpha = alpha;
        self.beta = beta;
        self
    }

    pub fn is_heston(&self) -> bool {
        self.alpha == 0.0 && self.beta == 0.5
    }

    pub fn validate(&self) -> Result<()> {
        fn check(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<()> {
            if value.is_finite() && ok {
                Ok(())
            } else {
                Err(Error::InvalidParameter { name, value, expected })
            }
        }
        check("kappa", self.kappa, self.kappa >= 0.0, "kappa >= 0")?;
        check("theta", self.theta, self.theta >= 0.0, "theta >= 0")?;
        check("v", self.v, self.v > 0.0, "v > 0")?;
        check("rho", self.rho, (-1.0..=1.0).contains(&self.rho), "-1 <= rho <= 1")?;
        check("r", self.r, self.r >= 0.0, "r >= 0")?;
        check("alpha", self.alpha, self.alpha >= 0.0, "alpha >= 0")?;
        check("beta", self.beta, self.beta >= 0.0, "beta >= 0")?;
        check("lambda0", self.lambda0, true, "a finite number")?;
        Ok(())
    }

    /// Drift of the variance SDE at variance `sigma`, risk-neutral
    /// adjustment included.
    pub fn variance_drift(&self, sigma: f64) -> f64 {
        self.kappa * sigma.powf(self.alpha) * (self.theta - sigma) - self.lambda0 * sigma
    }

    /// Diffusion of the variance SDE at variance `sigma`.
    pub fn variance_diffusion(&self, sigma: f64) -> f64 {
        self.v * sigma.powf(self.beta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Put,
}

/// A European contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptionSpec {
    pub strike: f64,
    pub maturity: f64,
    pub kind: PayoffKind,
}

impl OptionSpec {
    pub fn put(strike: f64, maturity: f64) -> Result<Self> {
        let spec = OptionSpec {
            strike,
            maturity,
            kind: PayoffKind::Put,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.strike.is_finite() && self.strike > 0.0) {
            return Err(Error::InvalidParameter {
                name: "strike",
                value: self.strike,
                expected: "strike > 0",
            });
        }
        if !(self.maturity.is_finite() && self.maturity > 0.0) {
            return Err(Error::InvalidParameter {
                name: "maturity",
                value: self.maturity,
                expected: "maturity > 0",
            });
        }
        Ok(())
    }
}

/// Point in transformed coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transformed {
    pub x: f64,
    pub y: f64,
    pub tau: f64,
}

/// `(S, σ, t) ↦ (ln(S/E), σ/v, T − t)`.
pub fn transform(spot: f64, sigma: f64, t: f64, spec: &OptionSpec, params: &ModelParams) -> Result<Transformed> {
    if !(spot.is_finite() && spot > 0.0) {
        return Err(Error::InvalidParameter {
            name: "spot",
            value: spot,
            expected: "spot > 0",
        });
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma",
            value: sigma,
            expected: "sigma > 0",
        });
    }
    if !(0.0..=spec.maturity).contains(&t) {
        return Err(Error::InvalidParameter {
            name: "t",
            value: t,
            expected: "0 <= t <= maturity",
        });
    }
    Ok(Transformed {
        x: (spot / spec.strike).ln(),
        y: sigma / params.v,
        tau: spec.maturity - t,
    })
}

/// Inverse of [`transform`]: returns `(S, σ, t)`.
pub fn untransform(point: Transformed, spec: &OptionSpec, params: &ModelParams) -> (f64, f64, f64) {
    (
        spec.strike * point.x.exp(),
        point.y * params.v,
        spec.maturity - point.tau,
    )
}

/// Option value in currency from the dimensionless solution:
/// `V = E e^{−rτ} u`.
pub fn untransform_price(u: f64, tau: f64, spec: &OptionSpec, rate: f64) -> f64 {
    spec.strike * (-rate * tau).exp() * u
}

/// Put payoff in transformed variables.
pub fn payoff(x: f64) -> f64 {
    (1.0 - x.exp()).max(0.0)
}

/// Coefficients of the transformed equation at one `y`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoefficientSet {
    pub a_xx: f64,
    pub a_yy: f64,
    pub a_xy: f64,
    pub b_x: f64,
    pub b_y: f64,
}

pub fn pde_coefficients(y: f64, params: &ModelParams) -> Result<CoefficientSet> {
    check_y(y)?;
    let s = params.v * y;
    Ok(CoefficientSet {
        a_xx: 0.5 * s,
        a_yy: 0.5 * s.powf(2.0 * params.beta),
        a_xy: params.rho * s.powf(params.beta + 0.5),
        b_x: params.r - 0.5 * s,
        b_y: params.kappa * s.powf(params.alpha) * (params.theta - s) / params.v - params.lambda0 * y,
    })
}

/// `(c1, c2)` of `u_xx + c1 u_x = c2 g`, the x-part divided by `a_xx`.
pub fn implicit_ode_coefficients_x(y: f64, params: &ModelParams) -> Result<(f64, f64)> {
    check_y(y)?;
    let s = params.v * y;
    Ok((2.0 * params.r / s - 1.0, 2.0 / s))
}

/// y-direction ODE `u_yy + c1(y) u_y = c2(y) g` with the first two
/// derivatives of `c1` in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YOde {
    pub c1: f64,
    pub dc1: f64,
    pub d2c1: f64,
    pub c2: f64,
}

pub fn implicit_ode_coefficients_y(y: f64, params: &ModelParams) -> Result<YOde> {
    check_y(y)?;
    let ModelParams {
        kappa,
        theta,
        v,
        alpha,
        beta,
        lambda0,
        ..
    } = *params;
    let s = v * y;
    let p = alpha - 2.0 * beta;
    // mean-reversion part: (2κ/v) s^p (θ − s), differentiated through s = v y
    let c1_mr = 2.0 * kappa / v * s.powf(p) * (theta - s);
    let dc1_mr = 2.0 * kappa * (p * theta * s.powf(p - 1.0) - (p + 1.0) * s.powf(p));
    let d2c1_mr = 2.0 * kappa * v * (p * (p - 1.0) * theta * s.powf(p - 2.0) - p * (p + 1.0) * s.powf(p - 1.0));
    // risk-premium part: −2 λ0 v^{−2β} y^{1−2β}
    let (c1_rp, dc1_rp, d2c1_rp) = if lambda0 == 0.0 {
        (0.0, 0.0, 0.0)
    } else {
        let q = 1.0 - 2.0 * beta;
        let scale = -2.0 * lambda0 * v.powf(-2.0 * beta);
        (
            scale * y.powf(q),
            scale * q * y.powf(q - 1.0),
            scale * q * (q - 1.0) * y.powf(q - 2.0),
        )
    };
    Ok(YOde {
        c1: c1_mr + c1_rp,
        dc1: dc1_mr + dc1_rp,
        d2c1: d2c1_mr + d2c1_rp,
        c2: 2.0 / s.powf(2.0 * beta),
    })
}

fn check_y(y: f64) -> Result<()> {
    if y.is_finite() && y > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateDiffusion { y })
    }
}

/// Data of one implicit line problem `diffusion · (u'' + c1 u') = g`.
///
/// `diffusion` is `1/c2`; keeping it instead of `c2` lets a line with no
/// dynamics at all be represented without infinities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LineOde {
    pub c1: f64,
    pub dc1: f64,
    pub d2c1: f64,
    pub diffusion: f64,
}

/// What the discretisation needs from a model. All coefficients are
/// functions of `y` alone.
pub trait PdeModel: Send + Sync {
    fn coefficients(&self, y: f64) -> CoefficientSet;
    /// x-direction line data at height `y`.
    fn x_line(&self, y: f64) -> LineOde;
    /// y-direction line data at height `y`.
    fn y_line(&self, y: f64) -> LineOde;
    /// Riskless rate, which drives the Dirichlet data at `x = L1`.
    fn rate(&self) -> f64;
}

impl PdeModel for ModelParams {
    fn coefficients(&self, y: f64) -> CoefficientSet {
        pde_coefficients(y, self).expect("y validated by the grid")
    }

    fn x_line(&self, y: f64) -> LineOde {
        let (c1, c2) = implicit_ode_coefficients_x(y, self).expect("y validated by the grid");
        LineOde {
            c1,
            dc1: 0.0,
            d2c1: 0.0,
            diffusion: 1.0 / c2,
        }
    }

    fn y_line(&self, y: f64) -> LineOde {
        let ode = implicit_ode_coefficients_y(y, self).expect("y validated by the grid");
        LineOde {
            c1: ode.c1,
            dc1: ode.dc1,
            d2c1: ode.d2c1,
            diffusion: 1.0 / ode.c2,
        }
    }

    fn rate(&self) -> f64 {
        self.r
    }
}

/// A model whose generator vanishes identically; the solution never moves.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroModel;

impl PdeModel for ZeroModel {
    fn coefficients(&self, _y: f64) -> CoefficientSet {
        CoefficientSet::default()
    }

    fn x_line(&self, _y: f64) -> LineOde {
        LineOde::default()
    }

    fn y_line(&self, _y: f64) -> LineOde {
        LineOde::default()
    }

    fn rate(&self) -> f64 {
        0.0
    }
}
