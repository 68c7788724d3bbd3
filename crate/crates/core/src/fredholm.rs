//! Joint distribution of particle positions as a Fredholm determinant:
//! kernel assembly from the `S` pair (with the biorthogonal-sum and
//! operator routes as cross-checks), finite sections with adaptive
//! windows, and a dense `det(I - K)` with a condition estimate.

use crate::biortho::{q_pow, r_qpow_neg, KernelCtx, PhiFn};
use crate::contour::r_kernel;
use crate::error::{Error, Result};
use crate::greens::dense_det;
use crate::model::{InitialData, ParamSchedule};

/// Joint query `P(X_t(n_j) > a_j, j = 1..M)` with `n_1 < ... < n_M`.
#[derive(Debug, Clone)]
pub struct JointQuery {
    pub labels: Vec<usize>,
    pub thresholds: Vec<i64>,
}

impl JointQuery {
    pub fn new(labels: Vec<usize>, thresholds: Vec<i64>) -> Result<Self> {
        if labels.is_empty() || labels.len() != thresholds.len() {
            return Err(Error::OutOfRange(
                "labels and thresholds must be equal-length and nonempty".into(),
            ));
        }
        if labels.windows(2).any(|w| w[0] >= w[1]) || labels[0] == 0 {
            return Err(Error::OutOfRange(format!(
                "labels must be strictly increasing and positive: {labels:?}"
            )));
        }
        Ok(JointQuery { labels, thresholds })
    }

    fn validate_against(&self, x0: &InitialData) -> Result<()> {
        let max = *self.labels.last().unwrap();
        if max > x0.len() {
            return Err(Error::LabelOutOfRange {
                label: max,
                count: x0.len(),
            });
        }
        Ok(())
    }
}

/// The correlation kernel `K_t(n_i, x; n_j, y)`: the walk term for
/// `n_i < n_j` plus the adjoint composition of `S` with the
/// epigraph-restricted `Sbar`. The composition index runs over the
/// exactly finite support `(X_0(n_j), x + n_i]`.
pub fn kernel_kt(ctx: &KernelCtx, ni: usize, x: i64, nj: usize, y: i64) -> Result<f64> {
    let mut acc = 0.0;
    if ni < nj {
        acc -= q_pow((nj - ni) as i64, x, y);
    }
    let lo = ctx.x0().position(nj) + 1;
    let hi = x + ni as i64;
    for v in lo..=hi {
        let s = ctx.s_kernel(ni as i64, v, x)?;
        if s != 0.0 {
            acc += s * ctx.sbar_epi(nj, v, y)?;
        }
    }
    Ok(acc)
}

/// The same kernel through the biorthogonal sum
/// `-Q^{n_j-n_i} + sum_{k=1}^{n_j} psi^{n_i}_{n_i-k} phi^{n_j}_{n_j-k}`.
pub fn kernel_kt_biortho(
    ni: usize,
    x: i64,
    nj: usize,
    y: i64,
    x0: &InitialData,
    s: &ParamSchedule,
) -> Result<f64> {
    let mut acc = 0.0;
    if ni < nj {
        acc -= q_pow((nj - ni) as i64, x, y);
    }
    for k in 1..=nj {
        let p = crate::biortho::psi(ni as i64, ni as i64 - k as i64, x, x0, s)?;
        if p != 0.0 {
            let f = PhiFn::new(nj, nj - k, x0, s)?;
            acc += p * f.eval(y);
        }
    }
    Ok(acc)
}

/// The same kernel through the operator route
/// `-Q^{n_j-n_i} + R Q^{-n_i} G_{0,n_j} R^{-1}`; the trailing sum
/// converges only for Bernoulli odds below 1.
pub fn kernel_kt_operator(
    ni: usize,
    x: i64,
    nj: usize,
    y: i64,
    x0: &InitialData,
    s: &ParamSchedule,
) -> Result<f64> {
    if s.betas.iter().any(|&b| b >= 1.0) {
        return Err(Error::TruncationFailure(
            "operator route needs all beta < 1".into(),
        ));
    }
    let mut acc = 0.0;
    if ni < nj {
        acc -= q_pow((nj - ni) as i64, x, y);
    }
    // (R Q^{-n_i})(x, v) vanishes for v > x + n_i; G_{0,n_j}(v, .) for
    // v at or below X_0(n_j)
    let lo = x0.position(nj) + 1;
    let hi = x + ni as i64;
    for v in lo..=hi {
        let rq = r_qpow_neg(ni as i64, x, v, s)?;
        if rq == 0.0 {
            continue;
        }
        // sum_z G_{0,n_j}(v, z) R^{-1}(z, y): z >= y, terms decay
        let mut inner = 0.0;
        let mut quiet = 0;
        for z in y..y + 512 {
            let r_inv = r_kernel(z, y, s, true)?;
            let term = if r_inv == 0.0 {
                0.0
            } else {
                crate::biortho::g0n(v, z, nj, x0)? * r_inv
            };
            inner += term;
            if term.abs() < 1e-15 * inner.abs().max(1.0) && z > y + 8 {
                quiet += 1;
                if quiet >= 12 {
                    break;
                }
            } else {
                quiet = 0;
            }
        }
        acc += rq * inner;
    }
    Ok(acc)
}

/// Determinant of `I - M` with an LU-based condition proxy.
#[derive(Debug, Clone, Copy)]
pub struct FredholmValue {
    pub value: f64,
    pub condition: f64,
}

/// `det(I - M)` for a dense row-major square `M`, via LU with partial
/// pivoting; errors when the pivot-ratio condition proxy passes 1e12.
pub fn fredholm_det(m: &[f64], n: usize) -> Result<FredholmValue> {
    assert_eq!(m.len(), n * n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            a[i * n + j] = (if i == j { 1.0 } else { 0.0 }) - m[i * n + j];
        }
    }
    // reuse the pivoted elimination, tracking the diagonal range
    let det = dense_det_with_cond(&mut a, n)?;
    Ok(det)
}

fn dense_det_with_cond(a: &mut [f64], n: usize) -> Result<FredholmValue> {
    if n == 0 {
        return Ok(FredholmValue {
            value: 1.0,
            condition: 1.0,
        });
    }
    let det = dense_det(a, n);
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        let d = a[i * n + i].abs();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    let condition = if dmin == 0.0 { f64::INFINITY } else { dmax / dmin };
    if condition > 1e12 {
        return Err(Error::SingularityWarning { cond: condition });
    }
    Ok(FredholmValue {
        value: det,
        condition,
    })
}

/// Finite section of `chibar K chibar`: indices `(n_j, x)` with
/// `x in [a_j - w, a_j]`, block-major in `j`.
#[derive(Debug)]
pub struct FiniteSection {
    pub width: i64,
    pub dim: usize,
    pub matrix: Vec<f64>,
}

/// Assembles the section matrix for window width `w`.
pub fn finite_section(ctx: &KernelCtx, q: &JointQuery, w: i64) -> Result<FiniteSection> {
    let m = q.labels.len();
    let block = (w + 1) as usize;
    let dim = m * block;
    let mut matrix = vec![0.0; dim * dim];
    for bi in 0..m {
        let ni = q.labels[bi];
        let ai = q.thresholds[bi];
        for bj in 0..m {
            let nj = q.labels[bj];
            let aj = q.thresholds[bj];
            // composition support over v, shared by the whole block
            let v_lo = ctx.x0().position(nj) + 1;
            let v_hi = ai + ni as i64;
            // epi factor per (v, y)
            let mut epi = vec![0.0f64; ((v_hi - v_lo + 1).max(0) as usize) * block];
            for (vi, v) in (v_lo..=v_hi).enumerate() {
                let dist = ctx.hits(v, nj);
                for (yi, y) in (aj - w..=aj).enumerate() {
                    let mut acc = 0.0;
                    for &(mm, z, p) in &dist.hits {
                        acc += p * ctx.sbar_kernel((nj - mm) as i64, z, y)?;
                    }
                    epi[vi * block + yi] = acc;
                }
            }
            for (xi, x) in (ai - w..=ai).enumerate() {
                for (yi, y) in (aj - w..=aj).enumerate() {
                    let mut val = 0.0;
                    if ni < nj {
                        val -= q_pow((nj - ni) as i64, x, y);
                    }
                    for (vi, v) in (v_lo..=v_hi.min(x + ni as i64)).enumerate() {
                        let s = ctx.s_kernel(ni as i64, v, x)?;
                        if s != 0.0 {
                            val += s * epi[vi * block + yi];
                        }
                    }
                    matrix[(bi * block + xi) * dim + (bj * block + yi)] = val;
                }
            }
        }
    }
    Ok(FiniteSection {
        width: w,
        dim,
        matrix,
    })
}

/// Result of the adaptive joint-distribution evaluation.
#[derive(Debug, Clone)]
pub struct JointDist {
    pub value: f64,
    pub width: i64,
    /// determinants per window width, for window-stability diagnostics
    pub sweep: Vec<(i64, f64)>,
}

/// `P(X_t(n_j) > a_j for all j)` as `det(I - chibar K chibar)` on finite
/// sections, doubling the window from 16 until the determinant moves
/// less than `tol` (default 1e-8), capped at width 512.
pub fn joint_dist(ctx: &KernelCtx, q: &JointQuery, tol: f64) -> Result<JointDist> {
    q.validate_against(ctx.x0())?;
    let mut sweep = Vec::new();
    let mut w = 16i64;
    let mut prev: Option<f64> = None;
    loop {
        let sec = finite_section(ctx, q, w)?;
        let det = fredholm_det(&sec.matrix, sec.dim)?.value;
        sweep.push((w, det));
        if let Some(p) = prev {
            if (det - p).abs() < tol {
                debug_assert!(
                    (-tol..=1.0 + tol).contains(&det),
                    "probability {det} outside [0,1] band"
                );
                return Ok(JointDist {
                    value: det.clamp(0.0, 1.0),
                    width: w,
                    sweep,
                });
            }
        }
        if w >= 512 {
            return Err(Error::NoConvergence(format!(
                "window grew to {w} with determinant still moving: {sweep:?}"
            )));
        }
        prev = Some(det);
        w *= 2;
    }
}
