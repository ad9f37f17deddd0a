//! Fourth-order payoff smoothing: the kernel `Φ4` is recovered numerically
//! from its Fourier transform and tabulated; the initial condition is the
//! convolution `ũ0(x) = ∫ Φ4(t) u0(x − h t) dt`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::grid::{GridField, UniformGrid};
use crate::quadrature::{gauss_legendre, integrate_fixed};

/// Half width of the kernel support.
pub const SUPPORT: f64 = 3.0;
/// Default table nodes per unit length (1537 nodes on `[−3, 3]`).
pub const DEFAULT_PER_UNIT: usize = 256;

/// Quadrature points per kernel-table cell in the convolution.
const CELL_POINTS: usize = 6;
/// Fourier panels have length π and this many Gauss points.
const PANEL_POINTS: usize = 24;
/// Fourier integral cut-off. Beyond `Φ̂4 < 1e−12` (ω ≈ 2272) the remaining
/// mass is still ~1e−10 near `x = 0`, so the integral is carried further.
const OMEGA_MAX: f64 = 8000.0 * PI;

/// `Φ̂4(ω) = (sin(ω/2)/(ω/2))⁴ (1 + (2/3) sin²(ω/2))`.
pub fn phi4_hat(omega: f64) -> f64 {
    let half = 0.5 * omega;
    let s = half.sin();
    let sinc = if half.abs() < 1e-4 {
        1.0 - half * half / 6.0 + half.powi(4) / 120.0
    } else {
        s / half
    };
    sinc.powi(4) * (1.0 + 2.0 / 3.0 * s * s)
}

/// Tabulated kernel on `[0, 3]` (it is even); nodes are aligned with the
/// integers so each table cell lies inside one polynomial piece.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothingKernel {
    per_unit: usize,
    values: Vec<f64>,
    /// Gauss nodes `t` and weights `w·Φ4(t)` over every table cell of
    /// `[−3, 3]`, in increasing `t`.
    quad_t: Vec<f64>,
    quad_w: Vec<f64>,
}

impl SmoothingKernel {
    pub fn build(per_unit: usize) -> Result<Self> {
        if 6 * per_unit < 1024 {
            return Err(Error::InvalidParameter {
                name: "table_resolution",
                value: (6 * per_unit + 1) as f64,
                expected: "at least 1024 table points",
            });
        }
        let xs: Vec<f64> = (0..=3 * per_unit).map(|k| k as f64 / per_unit as f64).collect();
        let values = invert_transform(&xs);
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature("kernel inversion produced non-finite values".into()));
        }
        let mut kernel = SmoothingKernel {
            per_unit,
            values,
            quad_t: Vec::new(),
            quad_w: Vec::new(),
        };
        let (gx, gw) = gauss_legendre(CELL_POINTS);
        let cell = 1.0 / per_unit as f64;
        let cells = 6 * per_unit;
        for c in 0..cells {
            let a = -SUPPORT + c as f64 * cell;
            for (x, w) in gx.iter().zip(&gw) {
                let t = a + 0.5 * cell * (1.0 + x);
                kernel.quad_t.push(t);
                kernel.quad_w.push(0.5 * cell * w * kernel.eval(t));
            }
        }
        Ok(kernel)
    }

    /// Shared kernel at the default resolution.
    pub fn shared() -> &'static SmoothingKernel {
        static KERNEL: OnceLock<SmoothingKernel> = OnceLock::new();
        KERNEL.get_or_init(|| SmoothingKernel::build(DEFAULT_PER_UNIT).expect("default kernel builds"))
    }

    pub fn step(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    /// Table values at `k / per_unit`, `k = 0..=3·per_unit`.
    pub fn table(&self) -> &[f64] {
        &self.values
    }

    /// Kernel value by cubic interpolation inside the table cell's integer
    /// piece; zero outside the support.
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        if a >= SUPPORT {
            return 0.0;
        }
        let p = self.per_unit;
        let piece = (a.floor() as usize).min(2);
        let pos = a * p as f64;
        let k0 = ((pos.floor() as usize).saturating_sub(1)).clamp(piece * p, (piece + 1) * p - 3);
        let nodes = [k0, k0 + 1, k0 + 2, k0 + 3];
        let mut sum = 0.0;
        for (r, &kr) in nodes.iter().enumerate() {
            let mut l = 1.0;
            for (q, &kq) in nodes.iter().enumerate() {
                if q != r {
                    l *= (pos - kq as f64) / (kr as f64 - kq as f64);
                }
            }
            sum += l * self.values[kr];
        }
        sum
    }

    /// `∫ Φ4` by the convolution quadrature.
    pub fn mass(&self) -> f64 {
        self.quad_w.iter().sum()
    }

    /// `∫ Φ4(t) f(x − h t) dt`, splitting the table cell that contains a
    /// kink of `f` (given in `x` coordinates).
    pub fn convolve(&self, f: &dyn Fn(f64) -> f64, kinks: &[f64], x: f64, h: f64) -> f64 {
        let cell = self.step();
        let mut split_cells: Vec<(usize, f64)> = kinks
            .iter()
            .map(|k| (x - k) / h)
            .filter(|t| t.abs() < SUPPORT)
            .filter_map(|t| {
                let c = ((t + SUPPORT) / cell).floor() as usize;
                let a = -SUPPORT + c as f64 * cell;
                // kinks on a cell edge need no split
                ((t - a).abs() > 1e-14 && (a + cell - t).abs() > 1e-14).then_some((c, t))
            })
            .collect();
        split_cells.sort_by(|a, b| a.1.total_cmp(&b.1));
        let mut total = 0.0;
        for (k, (t, w)) in self.quad_t.iter().zip(&self.quad_w).enumerate() {
            let c = k / CELL_POINTS;
            if split_cells.iter().any(|s| s.0 == c) {
                continue;
            }
            total += w * f(x - h * t);
        }
        let (gx, gw) = gauss_legendre(CELL_POINTS);
        let mut handled: Vec<usize> = Vec::new();
        for &(c, _) in &split_cells {
            if handled.contains(&c) {
                continue;
            }
            handled.push(c);
            let a = -SUPPORT + c as f64 * cell;
            let mut edges = vec![a];
            edges.extend(split_cells.iter().filter(|s| s.0 == c).map(|s| s.1));
            edges.push(a + cell);
            for e in edges.windows(2) {
                total += integrate_fixed(&gx, &gw, e[0], e[1], |t| self.eval(t) * f(x - h * t));
            }
        }
        total
    }
}

/// `Φ4(x) = (1/π) ∫₀^Ω Φ̂4(ω) cos(ωx) dω` for all `xs` at once.
fn invert_transform(xs: &[f64]) -> Vec<f64> {
    let (gx, gw) = gauss_legendre(PANEL_POINTS);
    let panels = (OMEGA_MAX / PI).round() as usize;
    let mut acc = vec![0.0; xs.len()];
    // Successive xs are equally spaced, so cos(ω x_k) follows by rotation;
    // re-anchor every few nodes to keep rounding from accumulating.
    let dx = if xs.len() > 1 { xs[1] - xs[0] } else { 0.0 };
    for p in 0..panels {
        let a = p as f64 * PI;
        for (t, w) in gx.iter().zip(&gw) {
            let omega = a + 0.5 * PI * (1.0 + t);
            let weight = 0.5 * PI * w * phi4_hat(omega);
            let (rs, rc) = (omega * dx).sin_cos();
            let (mut c, mut s) = (0.0, 0.0);
            for (k, (x, out)) in xs.iter().zip(acc.iter_mut()).enumerate() {
                if k % 16 == 0 {
                    (s, c) = (omega * x).sin_cos();
                } else {
                    (c, s) = (c * rc - s * rs, s * rc + c * rs);
                }
                *out += weight * c;
            }
        }
    }
    acc.iter().map(|v| v / PI).collect()
}

/// Evaluates the inverse transform at a single point (also outside the
/// support); used to check compactness.
pub fn invert_at(x: f64) -> f64 {
    invert_transform(&[x])[0]
}

/// Smoothed initial data on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothedInitialCondition {
    pub h: f64,
    pub field: GridField,
}

/// Smooths a y-independent payoff with step `h`. The y-convolution of a
/// y-independent function is the identity (unit mass), so only the
/// x-convolution is computed.
pub fn smooth_initial(
    kernel: &SmoothingKernel,
    u0: &dyn Fn(f64) -> f64,
    kinks: &[f64],
    grid: &UniformGrid,
    h: f64,
) -> Result<SmoothedInitialCondition> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "h",
            value: h,
            expected: "h > 0",
        });
    }
    let column: Vec<f64> = grid.xs().iter().map(|&x| kernel.convolve(u0, kinks, x, h)).collect();
    let n = grid.n;
    let values = column.iter().flat_map(|&v| std::iter::repeat_n(v, n)).collect();
    Ok(SmoothedInitialCondition {
        h,
        field: GridField::from_values(*grid, values)?,
    })
}

/// Smoothed put payoff `max(1 − eˣ, 0)` with `h = Δx` of the grid.
pub fn smoothed_put(grid: &UniformGrid) -> Result<GridField> {
    Ok(smooth_initial(SmoothingKernel::shared(), &crate::model::payoff, &[0.0], grid, grid.dx)?.field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Domain;

    /// Centred cubic B-spline.
    fn m4(x: f64) -> f64 {
        let a = x.abs();
        if a >= 2.0 {
            0.0
        } else if a >= 1.0 {
            (2.0 - a).powi(3) / 6.0
        } else {
            2.0 / 3.0 - a * a + a.powi(3) / 2.0
        }
    }

    /// Closed form: `Φ̂4 = M̂4·(4/3 − cos(ω)/3)`.
    fn phi4_exact(x: f64) -> f64 {
        4.0 / 3.0 * m4(x) - (m4(x + 1.0) + m4(x - 1.0)) / 6.0
    }

    fn kernel() -> &'static SmoothingKernel {
        SmoothingKernel::shared()
    }

    #[test]
    fn transform_value_at_pi() {
        let expected = (2.0 / PI).powi(4) * 5.0 / 3.0;
        assert!((phi4_hat(PI) - expected).abs() < 1e-15);
        assert!((expected - 0.273760).abs() < 1e-6);
        assert_eq!(phi4_hat(0.0), 1.0);
        assert!((phi4_hat(1e-5) - phi4_hat(-1e-5)).abs() < 1e-15);
    }

    #[test]
    fn table_matches_closed_form() {
        let k = kernel();
        for (i, v) in k.table().iter().enumerate() {
            let x = i as f64 * k.step();
            assert!((v - phi4_exact(x)).abs() < 1e-12, "x={x}: {v} vs {}", phi4_exact(x));
        }
        for i in 0..600 {
            let t = -3.1 + i as f64 * 0.01037;
            assert!((k.eval(t) - phi4_exact(t)).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn kernel_even_unit_mass_compact() {
        let k = kernel();
        assert!((k.mass() - 1.0).abs() < 1e-12);
        for i in 0..=3 * DEFAULT_PER_UNIT {
            let t = i as f64 * k.step();
            assert_eq!(k.eval(t), k.eval(-t));
        }
        for x in [3.0, 3.25, 3.5, 4.0, 5.5] {
            assert!(invert_at(x).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn low_resolution_rejected() {
        assert!(SmoothingKernel::build(100).is_err());
    }

    fn grid() -> UniformGrid {
        UniformGrid::new(Domain::standard(1.0), 65, 9).unwrap()
    }

    #[test]
    fn constants_and_linear_are_preserved() {
        let k = kernel();
        for x in [-1.0, 0.0, 0.7] {
            assert!((k.convolve(&|_| 2.5, &[], x, 0.1) - 2.5).abs() < 1e-12);
            let lin = |x: f64| 1.0 - 3.0 * x;
            assert!((k.convolve(&lin, &[], x, 0.1) - lin(x)).abs() < 1e-8);
        }
        let s = smooth_initial(k, &|_| 0.25, &[], &grid(), 0.2).unwrap();
        assert!(s.field.values().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn far_from_kink_matches_moment_formula() {
        // For x < −3h the payoff is 1 − eˣ on the whole stencil, and
        // ∫Φ4(t)e^{−ht}dt = (sinh(h/2)/(h/2))⁴ (4/3 − cosh(h)/3).
        let g = grid();
        let h = 0.05;
        let s = smooth_initial(kernel(), &crate::model::payoff, &[0.0], &g, h).unwrap();
        let moment = ((0.5 * h).sinh() / (0.5 * h)).powi(4) * (4.0 / 3.0 - h.cosh() / 3.0);
        for i in 0..g.m {
            let x = g.x(i);
            let expected = if x > 3.0 * h {
                0.0
            } else if x < -3.0 * h {
                1.0 - x.exp() * moment
            } else {
                continue;
            };
            assert!((s.field.get(i, 3) - expected).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn kink_error_halves_with_h() {
        let k = kernel();
        let mut errs = Vec::new();
        for p in 0..4 {
            let h = 0.01 / f64::from(1 << p);
            errs.push((k.convolve(&crate::model::payoff, &[0.0], 0.0, h) - 0.0).abs());
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1] - 2.0).abs() < 0.2, "{errs:?}");
        }
    }

    #[test]
    fn converges_to_payoff_at_sample_points() {
        let k = kernel();
        let mut last = f64::INFINITY;
        for p in 0..5 {
            let h = 0.2 / f64::from(1 << p);
            let err = [-0.3, 0.0, 0.05]
                .iter()
                .map(|&x| (k.convolve(&crate::model::payoff, &[0.0], x, h) - crate::model::payoff(x)).abs())
                .fold(0.0, f64::max);
            assert!(err < last, "h={h}");
            last = err;
        }
    }

    #[test]
    fn matches_two_dimensional_quadrature() {
        let k = kernel();
        let (gx, gw) = gauss_legendre(12);
        let h = 0.08;
        for x in [-0.5, -0.07, 0.0, 0.031, 0.2] {
            // tensor product over integer pieces in both directions,
            // x-pieces additionally split at the kink
            let mut total = 0.0;
            let tk = x / h;
            for py in -3..3 {
                let (ya, yb) = (py as f64, py as f64 + 1.0);
                for px in -3..3 {
                    let (a, b) = (px as f64, px as f64 + 1.0);
                    let mut edges = vec![a];
                    if tk > a && tk < b {
                        edges.push(tk);
                    }
                    edges.push(b);
                    for e in edges.windows(2) {
                        total += integrate_fixed(&gx, &gw, ya, yb, |s| {
                            phi4_exact(s)
                                * integrate_fixed(&gx, &gw, e[0], e[1], |t| {
                                    phi4_exact(t) * crate::model::payoff(x - h * t)
                                })
                        });
                    }
                }
            }
            let got = k.convolve(&crate::model::payoff, &[0.0], x, h);
            assert!((got - total).abs() < 1e-12, "x={x}: {got} vs {total}");
        }
    }
}
