//! Adaptive trapezoidal quadrature on circles and the scalar
//! contour-integral functions built from the schedule's generating
//! factors: the transfer symbol `f` and its inverse (behind the `R`
//! convolution kernels), the centered weights behind the `S`/`Sbar`
//! kernels, and the one-particle entries `F_n` of the transition-
//! probability determinants.
//!
//! All integer-order kernels here depend on the argument difference
//! only, so callers cache by `x - y`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ParamSchedule;

/// Hard cap on trapezoid nodes; analytic integrands converge
/// geometrically, so hitting this means the contour is misplaced.
pub const MAX_NODES: usize = 1 << 16;
/// Default quadrature tolerance.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default starting node count.
pub const START_NODES: usize = 64;

/// Circle `center + radius * e^{i theta}` with quadrature controls.
#[derive(Debug, Clone, Copy)]
pub struct ContourSpec {
    pub center: Complex64,
    pub radius: f64,
    pub nodes: usize,
    pub tol: f64,
}

impl ContourSpec {
    pub fn circle(radius: f64) -> Self {
        ContourSpec {
            center: Complex64::new(0.0, 0.0),
            radius,
            nodes: START_NODES,
            tol: DEFAULT_TOL,
        }
    }

    pub fn about(center: Complex64, radius: f64) -> Self {
        ContourSpec {
            center,
            radius,
            nodes: START_NODES,
            tol: DEFAULT_TOL,
        }
    }
}

/// `(1/2*pi*i) * contour integral of g` over the circle, by the
/// trapezoid rule with node doubling until two successive levels agree
/// to `tol * max(1, |value|)`.
pub fn contour_integral<G>(g: G, spec: &ContourSpec) -> Result<Complex64>
where
    G: Fn(Complex64) -> Complex64,
{
    let r = spec.radius;
    assert!(r > 0.0, "contour radius must be positive");
    let mut n = spec.nodes.max(4).next_power_of_two();
    let gmax = std::cell::Cell::new(0.0f64);
    let eval_at = |k: usize, n: usize| -> Complex64 {
        let theta = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
        let e = Complex64::new(theta.cos(), theta.sin());
        let t = g(spec.center + r * e) * e;
        gmax.set(gmax.get().max(t.norm()));
        t
    };
    let mut sum = Complex64::new(0.0, 0.0);
    for k in 0..n {
        sum += eval_at(k, n);
    }
    let mut value = sum * (r / n as f64);
    while n < MAX_NODES {
        // refine by inserting the odd nodes of the doubled grid
        let n2 = 2 * n;
        for k in (1..n2).step_by(2) {
            sum += eval_at(k, n2);
        }
        n = n2;
        let next = sum * (r / n as f64);
        let delta = (next - value).norm();
        value = next;
        // converged when the change is small relative to the value, or
        // once it reaches the rounding floor of the node sums
        let floor = 2e-16 * gmax.get() * r * (n as f64).sqrt();
        if delta < spec.tol * value.norm().max(1e-300) || delta <= floor {
            return Ok(value);
        }
    }
    Err(Error::NoConvergence(format!(
        "contour integral still moving at {MAX_NODES} nodes (radius {r})"
    )))
}

/// As `contour_integral`, but asserts the imaginary part is quadrature
/// noise and discards it.
pub fn contour_integral_real<G>(g: G, spec: &ContourSpec) -> Result<f64>
where
    G: Fn(Complex64) -> Complex64,
{
    let v = contour_integral(g, spec)?;
    debug_assert!(
        v.im.abs() <= 1e-10 * v.re.abs().max(1.0),
        "imaginary residue {:e} too large for |Re| = {:e}",
        v.im,
        v.re.abs()
    );
    Ok(v.re)
}

/// Which product of per-step generating factors to evaluate.
///
/// `F` is the transfer symbol of the `R` kernel (arguments in `w`);
/// `SWeight`/`SBarWeight` are the weights of the `S` and `Sbar` contour
/// kernels (arguments in `w - 1/2`, with the geometric and Bernoulli
/// blocks swapping between numerator and denominator).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolVariant {
    F,
    FInverse,
    SWeight,
    SBarWeight,
}

/// A schedule's generating product, prepared for repeated evaluation:
/// equal parameters are grouped so powers cost one complex log each.
#[derive(Debug, Clone)]
pub struct Symbol {
    variant: SymbolVariant,
    alpha_groups: Vec<(f64, i32)>,
    beta_groups: Vec<(f64, i32)>,
    gamma_t3: f64,
}

fn group(params: &[f64]) -> Vec<(f64, i32)> {
    let mut sorted = params.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut out: Vec<(f64, i32)> = Vec::new();
    for v in sorted {
        match out.last_mut() {
            Some((u, c)) if *u == v => *c += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

impl Symbol {
    pub fn new(variant: SymbolVariant, s: &ParamSchedule) -> Symbol {
        Symbol {
            variant,
            alpha_groups: group(&s.alphas),
            beta_groups: group(&s.betas),
            gamma_t3: s.gamma * s.t3,
        }
    }

    /// Log of the symbol at `w`. Branch choice is irrelevant to callers:
    /// every use exponentiates after adding integer multiples of logs.
    pub fn log_eval(&self, w: Complex64) -> Result<Complex64> {
        const GUARD: f64 = 1e-12;
        let mut acc = Complex64::new(0.0, 0.0);
        match self.variant {
            SymbolVariant::F | SymbolVariant::FInverse => {
                for &(a, c) in &self.alpha_groups {
                    if a != 0.0 {
                        let den = 1.0 - a * w;
                        if den.norm() < GUARD {
                            return Err(Error::PoleHit { dist: den.norm() });
                        }
                        acc += (c as f64) * (Complex64::from((1.0 - a).ln()) - den.ln());
                    }
                }
                for &(b, c) in &self.beta_groups {
                    if b != 0.0 {
                        let num = 1.0 + b * w;
                        if num.norm() < GUARD {
                            return Err(Error::PoleHit { dist: num.norm() });
                        }
                        acc += (c as f64) * (num.ln() - Complex64::from((1.0 + b).ln()));
                    }
                }
                acc += self.gamma_t3 * (w - 1.0);
                if self.variant == SymbolVariant::FInverse {
                    acc = -acc;
                }
            }
            SymbolVariant::SWeight | SymbolVariant::SBarWeight => {
                let sw = w - Complex64::from(0.5);
                let s_side = self.variant == SymbolVariant::SWeight;
                for &(a, c) in &self.alpha_groups {
                    if a != 0.0 {
                        let fac = 1.0 + (2.0 * a / (2.0 - a)) * if s_side { -sw } else { sw };
                        if fac.norm() < GUARD {
                            return Err(Error::PoleHit { dist: fac.norm() });
                        }
                        let l = fac.ln() * (c as f64);
                        acc += if s_side { -l } else { l };
                    }
                }
                for &(b, c) in &self.beta_groups {
                    if b != 0.0 {
                        let fac = 1.0 + (2.0 * b / (2.0 + b)) * if s_side { sw } else { -sw };
                        if fac.norm() < GUARD {
                            return Err(Error::PoleHit { dist: fac.norm() });
                        }
                        let l = fac.ln() * (c as f64);
                        acc += if s_side { l } else { -l };
                    }
                }
                acc += self.gamma_t3 * sw;
            }
        }
        Ok(acc)
    }

    pub fn eval(&self, w: Complex64) -> Result<Complex64> {
        Ok(self.log_eval(w)?.exp())
    }

    /// Modulus of the excluded pole nearest the origin (`infinity` when
    /// the symbol is entire).
    pub fn pole_radius(&self) -> f64 {
        let mut rho = f64::INFINITY;
        match self.variant {
            SymbolVariant::F => {
                // poles at w = 1/alpha_j
                for &(a, _) in &self.alpha_groups {
                    if a > 0.0 {
                        rho = rho.min(1.0 / a);
                    }
                }
            }
            SymbolVariant::FInverse => {
                // poles at w = -1/beta_j
                for &(b, _) in &self.beta_groups {
                    if b > 0.0 {
                        rho = rho.min(1.0 / b);
                    }
                }
            }
            SymbolVariant::SWeight => {
                // zeros of 1 - (2a/(2-a))(w - 1/2) sit at w = 1/alpha_j
                for &(a, _) in &self.alpha_groups {
                    if a > 0.0 {
                        rho = rho.min(1.0 / a);
                    }
                }
            }
            SymbolVariant::SBarWeight => {
                // poles at w = (1+beta_j)/beta_j
                for &(b, _) in &self.beta_groups {
                    if b > 0.0 {
                        rho = rho.min((1.0 + b) / b);
                    }
                }
            }
        }
        rho
    }
}

/// Transfer symbol `f(w, t)` of the schedule.
pub fn eval_f(w: Complex64, s: &ParamSchedule) -> Result<Complex64> {
    Symbol::new(SymbolVariant::F, s).eval(w)
}

/// Weight of the `S` kernel (`bar = false`) or of the `Sbar` kernel
/// (`bar = true`), with arguments centered at `w - 1/2`.
pub fn eval_s_weight(w: Complex64, s: &ParamSchedule, bar: bool) -> Result<Complex64> {
    let variant = if bar {
        SymbolVariant::SBarWeight
    } else {
        SymbolVariant::SWeight
    };
    Symbol::new(variant, s).eval(w)
}

/// Default radius for loops around the origin only: half the distance to
/// the nearest excluded pole, capped at 1/2 (the natural circle that
/// balances the `2^{x-y}` weights of the walk kernels).
pub fn default_origin_radius(pole_radius: f64) -> f64 {
    (0.5 * pole_radius).min(0.5)
}

/// Default radius for loops that must enclose both 0 and 1 while staying
/// inside the excluded poles at `1/alpha_j`; without a geometric block the
/// radius is capped at 2.
pub fn default_zero_one_radius(pole_radius: f64) -> Result<f64> {
    if pole_radius <= 1.0 + 1e-9 {
        return Err(Error::RadiusInfeasible(format!(
            "excluded pole at modulus {pole_radius} leaves no room outside |w| = 1"
        )));
    }
    Ok((1.0 + 0.5 * (pole_radius - 1.0)).min(2.0))
}

/// One-particle determinant entry `F_n(x, t)`: the `(-1)^n`-weighted loop
/// integral of `(1-w)^{-n} w^{-(x-n+1)} f(w, t)` around `{0, 1}`.
///
/// The loop is split by which poles actually contribute: with no pole at
/// the origin (`x - n + 1 <= 0`) only a small circle about `w = 1`
/// remains, with its radius shrunk as the argument grows so the
/// integrand never dwarfs the value.
pub fn schuetz_f(n: i64, x: i64, s: &ParamSchedule) -> Result<f64> {
    let symbol = Symbol::new(SymbolVariant::F, s);
    let rho = symbol.pole_radius();
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let expo = x - n + 1;
    let spec = if expo >= 1 {
        ContourSpec::circle(default_zero_one_radius(rho)?)
    } else if n >= 1 {
        if rho <= 1.0 + 1e-9 {
            return Err(Error::RadiusInfeasible(format!(
                "pole at modulus {rho} touches w = 1"
            )));
        }
        // balance (1 + r)^{n-1-x} against r^{-n}
        let e_mag = (-expo) as f64 + 1.0;
        let cap = (0.3f64).min(0.45 * (rho - 1.0));
        let r1 = (n as f64 / e_mag).clamp(0.02f64.min(cap), cap);
        ContourSpec::about(Complex64::new(1.0, 0.0), r1)
    } else {
        return Ok(0.0); // integrand analytic everywhere inside
    };
    let v = contour_integral_real(
        |w| {
            let lf = match symbol.log_eval(w) {
                Ok(l) => l,
                Err(_) => return Complex64::new(f64::NAN, f64::NAN),
            };
            // exponents are integers, so principal logs are exact here
            let l = -(n as f64) * (1.0 - w).ln() - (expo as f64) * w.ln() + lf;
            l.exp()
        },
        &spec,
    )?;
    Ok(sign * v)
}

/// Convolution kernel `R(x, y)` (`inverse = false`) or `R^{-1}(x, y)`:
/// `2^{-(x-y)}` times the `w^{x-y}` coefficient of `f` resp. `f^{-1}`.
/// Zero for `x < y`.
///
/// Entries decay (or grow) like `rho^{-(x-y)}` with `rho` the symbol's
/// nearest pole; the loop hugs that pole so the quadrature noise tracks
/// the entry scale even at large distances.
pub fn r_kernel(x: i64, y: i64, s: &ParamSchedule, inverse: bool) -> Result<f64> {
    let d = x - y;
    if d < 0 {
        return Ok(0.0);
    }
    let variant = if inverse {
        SymbolVariant::FInverse
    } else {
        SymbolVariant::F
    };
    let symbol = Symbol::new(variant, s);
    let radius = 0.95 * symbol.pole_radius().min(3.0);
    difference_kernel(&symbol, d, 0, radius)
}

/// `2^{-d}` times the `w^{d}` coefficient of `symbol(w) * (1-w)^{one_minus_w_pow}`,
/// evaluated on a circle of the given radius about the origin.
pub fn difference_kernel(symbol: &Symbol, d: i64, one_minus_w_pow: i64, radius: f64) -> Result<f64> {
    if d < 0 && one_minus_w_pow >= 0 {
        return Ok(0.0);
    }
    let spec = ContourSpec::circle(radius);
    let ln2 = std::f64::consts::LN_2;
    contour_integral_real(
        |w| {
            let lf = match symbol.log_eval(w) {
                Ok(l) => l,
                Err(_) => return Complex64::new(f64::NAN, f64::NAN),
            };
            let l = lf + (one_minus_w_pow as f64) * (1.0 - w).ln()
                - ((d + 1) as f64) * w.ln()
                - (d as f64) * ln2;
            l.exp()
        },
        &spec,
    )
}
