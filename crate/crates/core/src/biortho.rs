//! The biorthogonal layer behind the joint-distribution kernel: powers
//! of the geometric walk operator `Q` and its polynomial extension, the
//! `psi`/`phi` biorthogonal families, the backwards-heat-equation solver
//! for `phi`, the random-walk hitting DP, and the `S` / `Sbar` /
//! epigraph-restricted `Sbar` contour kernels with their operator
//! identities.
//!
//! Walk convention: both the leftward walk and its reversal jump by
//! `j >= 1` sites with probability `2^{-j}`, the transition law encoded
//! by `Q(x, y) = 2^{-(x-y)} 1_{x>y}` and its adjoint.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use num_rational::BigRational;

use crate::contour::{
    contour_integral_real, default_origin_radius, ContourSpec, Symbol, SymbolVariant,
};
use crate::error::{Error, Result};
use crate::model::{InitialData, ParamSchedule};
use crate::poly::{rational_to_f64, RatPoly};

const LN2: f64 = std::f64::consts::LN_2;

/// Generalized binomial coefficient `C(m, k)` for integer `m` (any sign)
/// and `k >= 0`, by the falling-factorial product.
pub fn binom_gen(m: i64, k: i64) -> f64 {
    debug_assert!(k >= 0);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc *= (m - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `Q^m(x, y)` for any integer `m`: the `m`-step transition weight of
/// the leftward geometric walk for `m >= 1`, the identity at `m = 0`,
/// and the signed inverse-power kernel for `m <= -1`.
pub fn q_pow(m: i64, x: i64, y: i64) -> f64 {
    if m == 0 {
        return if x == y { 1.0 } else { 0.0 };
    }
    if m > 0 {
        if x < y + m {
            return 0.0;
        }
        return 2f64.powi((y - x) as i32) * binom_gen(x - y - 1, m - 1);
    }
    let mm = -m;
    let d = y - x;
    if d < 0 || d > mm {
        return 0.0;
    }
    let sign = if (d + mm) % 2 == 0 { 1.0 } else { -1.0 };
    sign * 2f64.powi(d as i32) * binom_gen(mm, d)
}

/// Polynomial extension `Qbar^{(n)}(y1, y2)` of `Q^n`: the loop integral
/// of `(1+w)^{y1-y2-1} / (2^{y1-y2} w^n)`, which agrees with `Q^n`
/// whenever `y1 - y2 >= 1` and extends it polynomially in `y2`.
pub fn q_bar(n: i64, y1: i64, y2: i64) -> Result<f64> {
    assert!(n >= 1);
    let d = y1 - y2;
    // keep (1+w)^{d-1} comparable to the extracted coefficient: shrink
    // the loop as |d| grows (the only enclosed pole sits at the origin)
    let e_mag = (d - 1).unsigned_abs().max(2 * n as u64) as f64;
    let radius = (n as f64 / e_mag).clamp(0.002, 0.5);
    let spec = ContourSpec::circle(radius);
    contour_integral_real(
        |w| {
            let l = ((d - 1) as f64) * (1.0 + w).ln() - (n as f64) * w.ln()
                - (d as f64) * LN2;
            l.exp()
        },
        &spec,
    )
}

/// Shared loop-integral shape `(1/2 pi i) * contour of
/// symbol(w) (1-w)^{p} w^{-q} 2^{e}` on a circle about the origin.
fn loop_coeff(symbol: &Symbol, p: i64, q: i64, e: i64, radius: f64) -> Result<f64> {
    if q <= 0 && (p >= 0 || radius < 1.0) {
        return Ok(0.0); // integrand analytic inside the contour
    }
    let spec = ContourSpec::circle(radius);
    let shift = (e as f64) * LN2;
    contour_integral_real(
        |w| {
            let lf = match symbol.log_eval(w) {
                Ok(l) => l,
                Err(_) => return Complex64::new(f64::NAN, f64::NAN),
            };
            let l = lf + (p as f64) * (1.0 - w).ln() - (q as f64) * w.ln() + shift;
            l.exp()
        },
        &spec,
    )
}

/// `psi^n_k(x)`: loop integral of
/// `(1-w)^k f(w,t) / (2^{x - X_0(n-k)} w^{x+k+1-X_0(n-k)})`.
/// Negative `k` is allowed (then `(1-w)^k` has its pole outside the
/// contour); `n - k` must address a stored particle.
pub fn psi(n: i64, k: i64, x: i64, x0: &InitialData, s: &ParamSchedule) -> Result<f64> {
    let label = n - k;
    if label < 1 || label > x0.len() as i64 {
        return Err(Error::LabelOutOfRange {
            label: label.max(0) as usize,
            count: x0.len(),
        });
    }
    let anchor = x0.position(label as usize);
    let symbol = Symbol::new(SymbolVariant::F, s);
    // psi pairs with functions growing like 2^x, so its absolute
    // quadrature noise must track the coefficient scale: push the
    // contour toward the dominant singularity. With k < 0 the factor
    // (1-w)^k pins the radius below 1.
    let rho = symbol.pole_radius();
    let radius = if k >= 0 {
        0.85 * rho.min(2.8)
    } else {
        0.85 * rho.min(1.0)
    };
    loop_coeff(&symbol, k, x + k + 1 - anchor, anchor - x, radius)
}

/// Exact solution levels of the discrete backwards heat equation for the
/// pair `(n, k)`: `levels[l]` stores the polynomial `hhat(l, .)` with
/// `h(l, z) = 2^z * hhat(l, z)`, marched down from the constant level
/// `hhat(k, .) = 2^{-X_0(n-k)}` with a zero boundary value pinned at
/// `X_0(n-l)` for each `l < k`.
#[derive(Debug, Clone)]
pub struct BheSolution {
    pub n: usize,
    pub k: usize,
    levels: Vec<RatPoly>,
}

impl BheSolution {
    /// `hhat(l, .)` as a polynomial.
    pub fn level(&self, l: usize) -> &RatPoly {
        &self.levels[l]
    }

    /// `h(l, z) = 2^z hhat(l, z)` exactly.
    pub fn h_exact(&self, l: usize, z: i64) -> BigRational {
        self.levels[l].eval(z) * RatPoly::dyadic_constant(z)
    }

    pub fn h(&self, l: usize, z: i64) -> f64 {
        rational_to_f64(&self.h_exact(l, z))
    }
}

/// Solves the initial-boundary problem `(Q^*)^{-1} h(l, .) = h(l+1, .)`,
/// `h(k, z) = 2^{z - X_0(n-k)}`, `h(l, X_0(n-l)) = 0` for `l < k`, by
/// exact polynomial summation level by level.
pub fn bhe_solve(n: usize, k: usize, x0: &InitialData) -> BheSolution {
    assert!(k < n && n <= x0.len());
    let mut levels = vec![RatPoly::zero(); k + 1];
    levels[k] = RatPoly::constant(RatPoly::dyadic_constant(-x0.position(n - k)));
    for l in (1..=k).rev() {
        let boundary = x0.position(n - l + 1);
        levels[l - 1] = levels[l].sum_from(boundary + 1).neg();
        debug_assert!(levels[l - 1].degree().unwrap_or(0) <= k - l + 1);
    }
    BheSolution { n, k, levels }
}

/// The biorthogonal partner `phi^n_k`, prepared once per `(n, k)`.
///
/// `2^{-z} phi^n_k(z)` is the exact finite combination
/// `sum_m (Delta^m hhat)(z) * f^{-(m)}(1)/m!`; the derivative moments of
/// the inverse transfer symbol at `w = 1` are loop integrals on a small
/// circle about 1. This evaluation agrees with the defining series
/// `sum_y h(0, y) R^{-1}(y, z)` wherever that series converges and
/// extends it (Abel-style) to schedules whose Bernoulli odds exceed 1.
pub struct PhiFn {
    diffs: Vec<RatPoly>,
    moments: Vec<f64>,
}

impl PhiFn {
    pub fn new(n: usize, k: usize, x0: &InitialData, s: &ParamSchedule) -> Result<PhiFn> {
        let bhe = bhe_solve(n, k, x0);
        let mut diffs = Vec::with_capacity(k + 1);
        let mut cur = bhe.level(0).clone();
        for _ in 0..=k {
            diffs.push(cur.clone());
            cur = cur.forward_difference();
        }
        let symbol = Symbol::new(SymbolVariant::FInverse, s);
        let spec = ContourSpec::about(Complex64::new(1.0, 0.0), 0.5);
        let mut moments = Vec::with_capacity(k + 1);
        for m in 0..=k as i64 {
            let v = contour_integral_real(
                |w| {
                    let lf = match symbol.log_eval(w) {
                        Ok(l) => l,
                        Err(_) => return Complex64::new(f64::NAN, f64::NAN),
                    };
                    (lf - ((m + 1) as f64) * (w - 1.0).ln()).exp()
                },
                &spec,
            )?;
            moments.push(v);
        }
        Ok(PhiFn { diffs, moments })
    }

    pub fn eval(&self, z: i64) -> f64 {
        let mut acc = 0.0;
        for (d, mom) in self.diffs.iter().zip(&self.moments) {
            acc += d.eval_f64(z) * mom;
        }
        acc * 2f64.powi(z as i32)
    }
}

/// One-shot `phi^n_k(z)`.
pub fn phi(n: usize, k: usize, z: i64, x0: &InitialData, s: &ParamSchedule) -> Result<f64> {
    Ok(PhiFn::new(n, k, x0, s)?.eval(z))
}

/// Literal summation `sum_{y >= z} h(0, y) R^{-1}(y, z)`; converges only
/// when every Bernoulli odd is below 1. Kept as an independent route for
/// cross-checking `PhiFn`.
pub fn phi_series(
    n: usize,
    k: usize,
    z: i64,
    x0: &InitialData,
    s: &ParamSchedule,
) -> Result<f64> {
    if s.betas.iter().any(|&b| b >= 1.0) {
        return Err(Error::TruncationFailure(
            "series route needs all beta < 1".into(),
        ));
    }
    let bhe = bhe_solve(n, k, x0);
    let hhat = bhe.level(0);
    let symbol = Symbol::new(SymbolVariant::FInverse, s);
    let radius = 0.85 * symbol.pole_radius().min(2.8);
    let mut acc = 0.0f64;
    let mut peak = 0.0f64;
    let mut quiet = 0;
    for kk in 0..512i64 {
        // term = hhat(z + K) * [w^K coefficient of f^{-1}]
        let coeff = loop_coeff(&symbol, 0, kk + 1, 0, radius)?;
        let term = hhat.eval_f64(z + kk) * coeff;
        acc += term;
        peak = peak.max(term.abs());
        if term.abs() < 1e-15 * acc.abs().max(1.0) {
            quiet += 1;
            if quiet >= 16 {
                return Ok(acc * 2f64.powi(z as i32));
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::TruncationFailure(format!(
        "phi series still moving after 512 terms (peak {peak:e})"
    )))
}

/// Exact law of the epigraph hitting time: entries `(m, z, prob)` give
/// `P(tau = m, RW_tau = z)` for the leftward walk started at `start`
/// against the curve `X_0(m+1)`, `m < steps`. Mass that can no longer
/// hit (at or below `X_0(steps)`) is pooled in `dead_mass`; walkers
/// alive after the last step carry `survivor_mass`.
#[derive(Debug, Clone)]
pub struct HittingDistribution {
    pub start: i64,
    pub steps: usize,
    pub hits: Vec<(usize, i64, f64)>,
    pub survivor_mass: f64,
    pub dead_mass: f64,
}

impl HittingDistribution {
    pub fn hit_mass(&self) -> f64 {
        self.hits.iter().map(|h| h.2).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.hit_mass() + self.survivor_mass + self.dead_mass
    }
}

/// Finite exact DP for the hitting law of the strict epigraph of the
/// initial-data curve by the leftward walk (`steps = n <= N`).
pub fn hit_dp(start: i64, x0: &InitialData, n: usize) -> HittingDistribution {
    assert!(n >= 1 && n <= x0.len());
    let floor = x0.position(n); // at or below: can never hit again
    let mut hits = Vec::new();
    let mut dead = 0.0f64;

    if start > x0.position(1) {
        hits.push((0usize, start, 1.0));
        return HittingDistribution {
            start,
            steps: n,
            hits,
            survivor_mass: 0.0,
            dead_mass: 0.0,
        };
    }
    if start <= floor {
        return HittingDistribution {
            start,
            steps: n,
            hits,
            survivor_mass: 0.0,
            dead_mass: 1.0,
        };
    }

    // live[z - (floor+1)] = mass at z, floor < z <= X_0(m+1)
    let width = (x0.position(1) - floor) as usize;
    let mut live = vec![0.0f64; width];
    live[(start - floor - 1) as usize] = 1.0;

    for m in 1..n {
        let thresh = x0.position(m + 1); // hit when strictly above
        let mut next = vec![0.0f64; width];
        for (idx, &mass) in live.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let z = floor + 1 + idx as i64;
            // hits: z - j > thresh  <=>  j <= z - thresh - 1
            for j in 1..=(z - thresh - 1) {
                hits.push((m, z - j, mass * 2f64.powi(-j as i32)));
            }
            // survivors: thresh >= z - j > floor
            let j_lo = (z - thresh).max(1);
            let j_hi = z - floor - 1;
            for j in j_lo..=j_hi {
                next[(z - j - floor - 1) as usize] += mass * 2f64.powi(-j as i32);
            }
            // dead: z - j <= floor, tail mass 2^{-(z - floor - 1)}
            dead += mass * 2f64.powi(-(z - floor - 1) as i32);
        }
        live = next;
    }

    // merge duplicate (m, z) entries for compactness
    let mut merged: HashMap<(usize, i64), f64> = HashMap::new();
    for (m, z, p) in hits {
        *merged.entry((m, z)).or_insert(0.0) += p;
    }
    let mut hits: Vec<(usize, i64, f64)> = merged
        .into_iter()
        .map(|((m, z), p)| (m, z, p))
        .collect();
    hits.sort_unstable_by_key(|&(m, z, _)| (m, z));

    HittingDistribution {
        start,
        steps: n,
        hits,
        survivor_mass: live.iter().sum(),
        dead_mass: dead,
    }
}

/// `P(tau^{l,n} = k)` for the reversed (rightward) walk started at `z`
/// at time `l - 1`: the dual hitting probability that represents the
/// heat-equation solution `h^n_k(l, z)` for `z <= X_0(n-l)`.
pub fn rw_star_hit_prob(z: i64, l: usize, k: usize, n: usize, x0: &InitialData) -> f64 {
    debug_assert!(l <= k && k < n);
    // live states y <= X_0(n-m) after step m; walk moves right >= 1/step
    let mut live: HashMap<i64, f64> = HashMap::from([(z, 1.0)]);
    for m in l..=k {
        let thresh = x0.position(n - m);
        let mut next: HashMap<i64, f64> = HashMap::new();
        let mut hit_mass = 0.0;
        for (&y, &mass) in &live {
            // jump above the threshold: j >= thresh - y + 1
            let tail = 2f64.powi(-((thresh - y) as i32)); // P(j > thresh - y)
            hit_mass += mass * tail;
            if m < k {
                for j in 1..=(thresh - y) {
                    *next.entry(y + j).or_insert(0.0) += mass * 2f64.powi(-(j as i32));
                }
            }
        }
        if m == k {
            return hit_mass;
        }
        live = next;
    }
    unreachable!()
}

/// `|h^n_k(l, z) - P_{RW*_{l-1}=z}(tau^{l,n} = k)|` — the two routes to
/// the heat-equation solution.
pub fn hitting_vs_bhe_check(n: usize, k: usize, l: usize, z: i64, x0: &InitialData) -> f64 {
    let bhe = bhe_solve(n, k, x0);
    let dual = rw_star_hit_prob(z, l, k, n, x0);
    (bhe.h(l, z) - dual).abs()
}

/// `G_{0,n}(z1, z2)`: expectation of the polynomial-extended walk kernel
/// over the hitting law.
pub fn g0n(z1: i64, z2: i64, n: usize, x0: &InitialData) -> Result<f64> {
    let dist = hit_dp(z1, x0, n);
    let mut acc = 0.0;
    for &(m, z, p) in &dist.hits {
        acc += p * q_bar((n - m) as i64, z, z2)?;
    }
    Ok(acc)
}

/// The same object assembled from the heat-equation levels:
/// `sum_k Q^{n-k}(z1, X_0(n-k)) h^n_k(0, z2)`.
pub fn g0n_via_bhe(z1: i64, z2: i64, n: usize, x0: &InitialData) -> f64 {
    let mut acc = 0.0;
    for k in 0..n {
        let q = q_pow((n - k) as i64, z1, x0.position(n - k));
        if q != 0.0 {
            acc += q * bhe_solve(n, k, x0).h(0, z2);
        }
    }
    acc
}

/// Normalization constant relating the operator route to the `S`
/// kernels: `A^{-1} (R Q^{-n})^* = S` and `A Qbar^{(n)} R^{-1} = Sbar`.
/// It is exactly the ratio `f / W` of the transfer symbol to the
/// centered `S` weight (a `w`-independent constant, since each centered
/// factor is `2/(2 -/+ q)` times the plain one).
pub fn a_factor(s: &ParamSchedule) -> f64 {
    let mut a = (-s.gamma * s.t3 / 2.0).exp();
    for &al in &s.alphas {
        a *= 2.0 * (1.0 - al) / (2.0 - al);
    }
    for &b in &s.betas {
        a *= (2.0 + b) / (2.0 * (1.0 + b));
    }
    a
}

/// `(R Q^{-n})(x, y)`: difference kernel with transfer symbol
/// `f(w) ((1-w)/w)^n`.
pub fn r_qpow_neg(n: i64, x: i64, y: i64, s: &ParamSchedule) -> Result<f64> {
    let symbol = Symbol::new(SymbolVariant::F, s);
    let radius = 0.85 * symbol.pole_radius().min(2.8);
    let d = x - y;
    loop_coeff(&symbol, n, n + d + 1, -d, radius)
}

/// Which of the two contour kernels to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SVariant {
    S,
    SBar,
}

/// Cached evaluation context for the `S` family against a fixed
/// schedule and initial data. All entries are safe to share across
/// threads; caches are internally synchronized.
pub struct KernelCtx {
    schedule: ParamSchedule,
    x0: InitialData,
    sym_s: Symbol,
    sym_sbar: Symbol,
    radius_s: f64,
    radius_sbar: f64,
    s_cache: Mutex<HashMap<(i64, i64), f64>>,
    sbar_cache: Mutex<HashMap<(i64, i64), f64>>,
    hit_cache: Mutex<HashMap<(i64, usize), Arc<HittingDistribution>>>,
}

impl KernelCtx {
    pub fn new(schedule: ParamSchedule, x0: InitialData) -> KernelCtx {
        let sym_s = Symbol::new(SymbolVariant::SWeight, &schedule);
        let sym_sbar = Symbol::new(SymbolVariant::SBarWeight, &schedule);
        let radius_s = default_origin_radius(sym_s.pole_radius());
        let radius_sbar = default_origin_radius(sym_sbar.pole_radius());
        KernelCtx {
            schedule,
            x0,
            sym_s,
            sym_sbar,
            radius_s,
            radius_sbar,
            s_cache: Mutex::new(HashMap::new()),
            sbar_cache: Mutex::new(HashMap::new()),
            hit_cache: Mutex::new(HashMap::new()),
        }
    }

    /// Tighter contour than the default (the scaling propositions list
    /// extra points the loop must not enclose).
    pub fn with_radius(mut self, radius: f64) -> KernelCtx {
        self.radius_s = radius;
        self.radius_sbar = radius;
        self
    }

    pub fn schedule(&self) -> &ParamSchedule {
        &self.schedule
    }

    pub fn x0(&self) -> &InitialData {
        &self.x0
    }

    /// `S_{-t,-n}(z1, z2)`: vanishes for `z1 > z2 + n`.
    pub fn s_kernel(&self, n: i64, z1: i64, z2: i64) -> Result<f64> {
        let d = z2 - z1;
        if let Some(&v) = self.s_cache.lock().unwrap().get(&(n, d)) {
            return Ok(v);
        }
        let v = loop_coeff(&self.sym_s, n, n + 1 + d, -d, self.radius_s)?;
        self.s_cache.lock().unwrap().insert((n, d), v);
        Ok(v)
    }

    /// `Sbar_{-t,n}(z1, z2)`.
    ///
    /// When the `(1-w)` power turns large and positive (deep hits far
    /// from the evaluation point) the default circle lets the integrand
    /// dwarf the value and the quadrature returns its noise floor; the
    /// loop radius is then chosen to minimize the integrand's peak
    /// modulus, which pins the noise to the value scale.
    pub fn sbar_kernel(&self, n: i64, z1: i64, z2: i64) -> Result<f64> {
        let d = z2 - z1;
        if let Some(&v) = self.sbar_cache.lock().unwrap().get(&(n, d)) {
            return Ok(v);
        }
        let radius = if d + n - 1 > 0 {
            self.minimax_radius(d + n - 1, n, d)
        } else {
            self.radius_sbar
        };
        let v = loop_coeff(&self.sym_sbar, d + n - 1, n, d, radius)?;
        self.sbar_cache.lock().unwrap().insert((n, d), v);
        Ok(v)
    }

    /// Radius in `(0, radius_sbar]` minimizing the peak log-modulus of
    /// the `Sbar` integrand `(1-w)^p w^{-q} 2^e W(w)` over the circle.
    fn minimax_radius(&self, p: i64, q: i64, e: i64) -> f64 {
        let peak = |r: f64| -> f64 {
            let mut m = f64::NEG_INFINITY;
            for k in 0..48 {
                let th = std::f64::consts::PI * k as f64 / 47.0;
                let w = Complex64::new(r * th.cos(), r * th.sin());
                let lw = match self.sym_sbar.log_eval(w) {
                    Ok(l) => l.re,
                    Err(_) => return f64::INFINITY,
                };
                let l = (p as f64) * (1.0 - w).norm().ln() - (q as f64) * r.ln()
                    + (e as f64) * LN2
                    + lw;
                m = m.max(l);
            }
            m
        };
        let hi = self.radius_sbar;
        let mut best = (hi, peak(hi));
        let mut r = hi;
        while r > 1e-3 {
            r *= 0.72;
            let v = peak(r);
            if v < best.1 {
                best = (r, v);
            }
        }
        best.0
    }

    pub fn s_variant(&self, variant: SVariant, n: i64, z1: i64, z2: i64) -> Result<f64> {
        match variant {
            SVariant::S => self.s_kernel(n, z1, z2),
            SVariant::SBar => self.sbar_kernel(n, z1, z2),
        }
    }

    pub fn hits(&self, start: i64, n: usize) -> Arc<HittingDistribution> {
        if let Some(d) = self.hit_cache.lock().unwrap().get(&(start, n)) {
            return d.clone();
        }
        let d = Arc::new(hit_dp(start, &self.x0, n));
        self.hit_cache
            .lock()
            .unwrap()
            .insert((start, n), d.clone());
        d
    }

    /// `Sbar^{epi}_{-t,n}(z1, z2)`: the `Sbar` kernel averaged over the
    /// hitting law of the initial-data curve. Exactly zero when the walk
    /// can never reach the strict epigraph.
    pub fn sbar_epi(&self, n: usize, z1: i64, z2: i64) -> Result<f64> {
        if z1 <= self.x0.position(n) {
            return Ok(0.0);
        }
        let dist = self.hits(z1, n);
        let mut acc = 0.0;
        for &(m, z, p) in &dist.hits {
            acc += p * self.sbar_kernel((n - m) as i64, z, z2)?;
        }
        Ok(acc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParamSchedule;

    fn x0_generic() -> InitialData {
        InitialData::new(vec![2, 0, -3, -5]).unwrap()
    }

    #[test]
    fn q_pow_examples() {
        assert_eq!(q_pow(1, 1, 0), 0.5);
        // convolution oracle for Q^2(3, 0)
        let direct = q_pow(2, 3, 0);
        let conv: f64 = (-10..10).map(|z| q_pow(1, 3, z) * q_pow(1, z, 0)).sum();
        assert!((direct - 0.25).abs() < 1e-15);
        assert!((direct - conv).abs() < 1e-15);
        // inverse entries
        assert_eq!(q_pow(-1, 0, 1), 2.0);
        assert_eq!(q_pow(-1, 0, 0), -1.0);
        // Q o Q^{-1} = I on a window
        for x in -3..3i64 {
            for y in -3..3i64 {
                let comp: f64 = (-30..30).map(|z| q_pow(1, x, z) * q_pow(-1, z, y)).sum();
                let expect = if x == y { 1.0 } else { 0.0 };
                assert!((comp - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn q_pow_matches_iterated_convolution() {
        for m in 2..5i64 {
            for x in -2..6i64 {
                let mut conv = vec![(0i64, 1.0f64)];
                for _ in 0..m {
                    let mut next: HashMap<i64, f64> = HashMap::new();
                    for &(z, p) in &conv {
                        for j in 1..60 {
                            *next.entry(z - j).or_insert(0.0) += p * 2f64.powi(-j as i32);
                        }
                    }
                    conv = next.into_iter().collect();
                }
                let brute: f64 = conv.iter().filter(|&&(z, _)| z == -x).map(|&(_, p)| p).sum();
                assert!(
                    (q_pow(m, x, 0) - brute).abs() < 1e-12,
                    "m={m}, x={x}"
                );
            }
        }
    }

    #[test]
    fn q_bar_extends_q_pow() {
        assert!((q_bar(2, 3, 0).unwrap() - 0.25).abs() < 1e-12);
        for n in 1..4i64 {
            for d in 1..7i64 {
                assert!(
                    (q_bar(n, d, 0).unwrap() - q_pow(n, d, 0)).abs() < 1e-12,
                    "n={n}, d={d}"
                );
            }
            // closed form on the extended range
            for d in -6..1i64 {
                let expect = 2f64.powi(-d as i32) * binom_gen(d - 1, n - 1);
                let got = q_bar(n, d, 0).unwrap();
                assert!((got - expect).abs() < 1e-11 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn q_bar_ladder() {
        // Q^{-1} Qbar^{(n)} = Qbar^{(n-1)} pointwise; n = 1 annihilates
        for x in -4..4i64 {
            for y in -4..4i64 {
                let apply = |n: i64| -> f64 {
                    2.0 * q_bar(n, x + 1, y).unwrap() - q_bar(n, x, y).unwrap()
                };
                let target = q_bar(2, x, y).unwrap();
                let scale = target.abs().max(1.0);
                assert!((apply(3) - target).abs() < 1e-11 * scale);
                assert!(apply(1).abs() < 1e-10 * scale);
            }
        }
    }

    #[test]
    fn psi_zero_order_is_r_column() {
        let s = ParamSchedule::pure_bernoulli(0.5, 1).unwrap();
        let x0 = InitialData::new(vec![0]).unwrap();
        assert!((psi(1, 0, 0, &x0, &s).unwrap() - 0.5).abs() < 1e-12);
        assert!((psi(1, 0, 1, &x0, &s).unwrap() - 0.25).abs() < 1e-12);
        assert!(psi(1, 0, 5, &x0, &s).unwrap().abs() < 1e-12);
    }

    #[test]
    fn psi_identity_schedule() {
        let s = ParamSchedule::empty();
        let x0 = x0_generic();
        for n in 1..=4i64 {
            for x in -8..4i64 {
                let expect = if x == x0.position(n as usize) { 1.0 } else { 0.0 };
                assert!((psi(n, 0, x, &x0, &s).unwrap() - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn psi_operator_route() {
        // psi^n_k = (R Q^{-k} delta)(x) via q_pow composition
        let s = ParamSchedule::new(vec![0.4], vec![0.7], 0.5, 0.9).unwrap();
        let x0 = x0_generic();
        for (n, k) in [(2i64, 1i64), (3, 2), (4, 1), (3, -1), (2, -2)] {
            let anchor = x0.position((n - k) as usize);
            for x in anchor - 6..anchor + 6 {
                let direct = psi(n, k, x, &x0, &s).unwrap();
                let mut via = 0.0;
                for z in x - 60..=x {
                    let r = crate::contour::r_kernel(x, z, &s, false).unwrap();
                    if r != 0.0 {
                        via += r * q_pow(-k, z, anchor);
                    }
                }
                assert!((direct - via).abs() < 1e-10, "n={n} k={k} x={x}");
            }
        }
    }

    #[test]
    fn bhe_boundary_and_degree() {
        let x0 = x0_generic();
        for n in 1..=4usize {
            for k in 0..n {
                let sol = bhe_solve(n, k, &x0);
                // initial level is the pure exponential
                for z in -6..6i64 {
                    let expect = 2f64.powi((z - x0.position(n - k)) as i32);
                    assert!((sol.h(k, z) - expect).abs() < 1e-14);
                }
                // boundary: h(l, X_0(n-l)) = 1_{l=k}
                for l in 0..=k {
                    let b = sol.h(l, x0.position(n - l));
                    let expect = if l == k { 1.0 } else { 0.0 };
                    assert!((b - expect).abs() < 1e-14, "n={n} k={k} l={l}");
                }
                // top level has degree <= k
                assert!(sol.level(0).degree().unwrap_or(0) <= k);
            }
        }
    }

    #[test]
    fn bhe_satisfies_backward_recursion_exactly() {
        // (Q^*)^{-1} h(l, .) = h(l+1, .): 2 h(l, z-1) - h(l, z) = h(l+1, z)
        let x0 = x0_generic();
        let sol = bhe_solve(4, 3, &x0);
        for l in 0..3usize {
            for z in -9..7i64 {
                let lhs = sol.h_exact(l, z - 1) * RatPoly::dyadic_constant(1)
                    - sol.h_exact(l, z);
                assert_eq!(lhs, sol.h_exact(l + 1, z), "l={l} z={z}");
            }
        }
    }

    #[test]
    fn phi_single_particle() {
        // n=1, k=0: phi(z) = 2^{z - X_0(1)}, biorthogonal to psi
        let s = ParamSchedule::pure_bernoulli(0.4, 2).unwrap();
        let x0 = InitialData::new(vec![-1]).unwrap();
        let f = PhiFn::new(1, 0, &x0, &s).unwrap();
        for z in -5..5i64 {
            let expect = 2f64.powi((z + 1) as i32);
            assert!((f.eval(z) - expect).abs() < 1e-11 * expect.abs().max(1.0));
        }
        let mut dot = 0.0;
        for x in -40..60i64 {
            dot += psi(1, 0, x, &x0, &s).unwrap() * f.eval(x);
        }
        assert!((dot - 1.0).abs() < 1e-10);
    }

    #[test]
    fn phi_series_cross_check() {
        // moment route vs literal series where the series converges
        let s = ParamSchedule::new(vec![0.3], vec![0.5], 0.4, 0.7).unwrap();
        let x0 = x0_generic();
        for (n, k) in [(2usize, 1usize), (3, 2), (4, 0)] {
            let f = PhiFn::new(n, k, &x0, &s).unwrap();
            for z in -4..4i64 {
                let series = phi_series(n, k, z, &x0, &s).unwrap();
                let direct = f.eval(z);
                assert!(
                    (series - direct).abs() < 1e-9 * direct.abs().max(1.0),
                    "n={n} k={k} z={z}: {series} vs {direct}"
                );
            }
        }
    }

    #[test]
    fn phi_degree_bound() {
        let s = ParamSchedule::pure_geometric(0.5, 2).unwrap();
        let x0 = x0_generic();
        for (n, k) in [(3usize, 2usize), (4, 3), (4, 1)] {
            let f = PhiFn::new(n, k, &x0, &s).unwrap();
            // (k+1)-th finite difference of 2^{-z} phi(z) vanishes
            let g = |z: i64| f.eval(z) * 2f64.powi(-z as i32);
            let mut vals: Vec<f64> = (0..=(k as i64 + 1)).map(|j| g(j - 2)).collect();
            for _ in 0..=k {
                vals = vals.windows(2).map(|w| w[1] - w[0]).collect();
            }
            assert!(vals[0].abs() < 1e-9, "n={n} k={k}: {:?}", vals);
        }
    }

    #[test]
    fn hit_dp_trivial_cases() {
        let x0 = x0_generic();
        // immediate hit
        let d = hit_dp(5, &x0, 3);
        assert_eq!(d.hits, vec![(0, 5, 1.0)]);
        // start at or below the floor: dead
        let d = hit_dp(-3, &x0, 3);
        assert!(d.hits.is_empty());
        assert_eq!(d.dead_mass, 1.0);
        // conservation
        for start in -6..6i64 {
            for n in 1..=4usize {
                let d = hit_dp(start, &x0, n);
                assert!((d.total_mass() - 1.0).abs() < 1e-14, "start={start} n={n}");
            }
        }
    }

    #[test]
    fn hit_dp_two_step_enumeration() {
        // X_0 = (0, -2), start 0: tau = 1 iff the first jump is one site
        let x0 = InitialData::new(vec![0, -2]).unwrap();
        let d = hit_dp(0, &x0, 2);
        let p1: f64 = d
            .hits
            .iter()
            .filter(|&&(m, _, _)| m == 1)
            .map(|&(_, _, p)| p)
            .sum();
        assert!((p1 - 0.5).abs() < 1e-15);
        assert_eq!(d.hits, vec![(1, -1, 0.5)]);
    }

    #[test]
    fn dual_walk_matches_bhe() {
        let x0 = x0_generic();
        for n in 1..=4usize {
            for k in 0..n {
                for l in 0..=k {
                    let zmax = x0.position(n - l);
                    for z in zmax - 10..=zmax {
                        let r = hitting_vs_bhe_check(n, k, l, z, &x0);
                        assert!(r < 1e-12, "n={n} k={k} l={l} z={z}: {r}");
                    }
                }
            }
        }
    }

    #[test]
    fn g0n_routes_agree() {
        let x0 = x0_generic();
        for n in 1..=4usize {
            for z1 in -6..6i64 {
                for z2 in -8..4i64 {
                    let a = g0n(z1, z2, n, &x0).unwrap();
                    let b = g0n_via_bhe(z1, z2, n, &x0);
                    assert!(
                        (a - b).abs() < 1e-10 * a.abs().max(1.0),
                        "n={n} z1={z1} z2={z2}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn g0n_never_hits_is_zero() {
        let x0 = x0_generic();
        assert_eq!(g0n(-6, 0, 4, &x0).unwrap(), 0.0);
    }

    #[test]
    fn g0n_polynomial_extension_in_z2() {
        // 2^{-z2} G_{0,n}(z1, z2) fits a polynomial of degree <= n-1:
        // the n+1-th finite difference vanishes
        let x0 = x0_generic();
        let n = 3usize;
        let z1 = 1i64;
        let g = |z2: i64| g0n(z1, z2, n, &x0).unwrap() * 2f64.powi(-z2 as i32);
        let mut vals: Vec<f64> = (-3..=(n as i64 + 1) - 2).map(g).collect();
        let scale = vals.iter().fold(1.0f64, |a, b| a.max(b.abs()));
        for _ in 0..n {
            vals = vals.windows(2).map(|w| w[1] - w[0]).collect();
        }
        assert!(vals[0].abs() < 1e-9 * scale);
    }

    #[test]
    fn s_kernels_reduce_to_q_at_identity_schedule() {
        let ctx = KernelCtx::new(ParamSchedule::empty(), x0_generic());
        for n in 1..4i64 {
            for z1 in -4..4i64 {
                for z2 in -4..4i64 {
                    let s = ctx.s_kernel(n, z1, z2).unwrap();
                    let q = q_pow(-n, z2, z1);
                    assert!((s - q).abs() < 1e-11 * q.abs().max(1.0), "S n={n} {z1} {z2}");
                    let sb = ctx.sbar_kernel(n, z1, z2).unwrap();
                    let qb = q_bar(n, z1, z2).unwrap();
                    assert!((sb - qb).abs() < 1e-11 * qb.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn sbar_epi_immediate_hit_reduces_to_sbar() {
        let s = ParamSchedule::new(vec![0.3], vec![0.4], 0.6, 0.5).unwrap();
        let x0 = x0_generic();
        let ctx = KernelCtx::new(s, x0);
        for z2 in -4..4i64 {
            let a = ctx.sbar_epi(3, 4, z2).unwrap();
            let b = ctx.sbar_kernel(3, 4, z2).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(ctx.sbar_epi(3, -4, 0).unwrap(), 0.0);
    }

    #[test]
    fn proppp_s_identity() {
        // A^{-1} (R Q^{-n})^*(z1, z2) = S_{-t,-n}(z1, z2)
        for s in [
            ParamSchedule::pure_bernoulli(0.35, 2).unwrap(),
            ParamSchedule::pure_geometric(0.45, 2).unwrap(),
            ParamSchedule::new(vec![0.3], vec![0.4], 0.8, 0.6).unwrap(),
        ] {
            let a = a_factor(&s);
            let ctx = KernelCtx::new(s.clone(), x0_generic());
            for (n, z1, z2) in [(1i64, 0i64, 0i64), (2, 3, -2), (3, -1, 2), (4, 2, 2)] {
                let lhs = r_qpow_neg(n, z2, z1, &s).unwrap() / a;
                let rhs = ctx.s_kernel(n, z1, z2).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0),
                    "n={n} z1={z1} z2={z2}: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn proppp_sbar_identity() {
        // A * (Qbar^{(n)} R^{-1})(z1, z2) = Sbar_{-t,n}(z1, z2); the z-sum
        // converges for beta < 1
        for s in [
            ParamSchedule::pure_bernoulli(0.3, 2).unwrap(),
            ParamSchedule::pure_geometric(0.5, 3).unwrap(),
            ParamSchedule::new(vec![0.25], vec![0.5], 0.7, 0.4).unwrap(),
        ] {
            let a = a_factor(&s);
            let ctx = KernelCtx::new(s.clone(), x0_generic());
            for (n, z1, z2) in [(1i64, 0i64, 0i64), (2, 1, -2), (3, -2, 1)] {
                let mut lhs = 0.0;
                for z in z2..z2 + 400 {
                    let r = crate::contour::r_kernel(z, z2, &s, true).unwrap();
                    if r != 0.0 {
                        lhs += q_bar(n, z1, z).unwrap() * r;
                    }
                }
                lhs *= a;
                let rhs = ctx.sbar_kernel(n, z1, z2).unwrap();
                assert!(
                    (lhs - rhs).abs() < 1e-9 * rhs.abs().max(1.0),
                    "n={n} z1={z1} z2={z2}: {lhs} vs {rhs}"
                );
            }
        }
    }
}
