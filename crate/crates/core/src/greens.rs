//! Transition probabilities of the mixed process as `N x N` determinants
//! of one-particle contour entries, with normalization and Kolmogorov
//! forward-equation checks usable as oracles at desk scale.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::contour::schuetz_f;
use crate::error::{Error, Result};
use crate::model::{ParamSchedule, ParticleConfig};

/// Default cap on the particle number for dense determinants.
pub const DEFAULT_SIZE_GUARD: usize = 8;

/// Transition-probability query: time-`t` positions `x`, time-0
/// positions `y`, and the schedule that carries `t`.
#[derive(Debug, Clone)]
pub struct GreensQuery<'a> {
    pub x: &'a ParticleConfig,
    pub y: &'a ParticleConfig,
    pub schedule: &'a ParamSchedule,
}

/// Evaluation context caching determinant entries by `(n, x - y)`;
/// every entry depends on its arguments through the difference only.
pub struct GreensCtx {
    schedule: ParamSchedule,
    guard: usize,
    cache: Mutex<HashMap<(i64, i64), f64>>,
}

impl GreensCtx {
    pub fn new(schedule: ParamSchedule) -> Self {
        GreensCtx {
            schedule,
            guard: DEFAULT_SIZE_GUARD,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn with_guard(schedule: ParamSchedule, guard: usize) -> Self {
        GreensCtx {
            schedule,
            guard,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn schedule(&self) -> &ParamSchedule {
        &self.schedule
    }

    fn entry(&self, n: i64, d: i64) -> Result<f64> {
        if let Some(&v) = self.cache.lock().unwrap().get(&(n, d)) {
            return Ok(v);
        }
        let v = schuetz_f(n, d, &self.schedule)?;
        self.cache.lock().unwrap().insert((n, d), v);
        Ok(v)
    }

    /// `P(X_t = x | X_0 = y)` as `det[F_{i-j}(x_{N+1-i} - y_{N+1-j}, t)]`.
    pub fn greens_det(&self, x: &ParticleConfig, y: &ParticleConfig) -> Result<f64> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::OutOfRange(format!(
                "particle counts differ: {} vs {}",
                n,
                y.len()
            )));
        }
        if n > self.guard {
            return Err(Error::SizeGuard {
                n,
                guard: self.guard,
            });
        }
        let mut m = vec![0.0; n * n];
        for i in 1..=n {
            for j in 1..=n {
                let d = x.position(n + 1 - i) - y.position(n + 1 - j);
                m[(i - 1) * n + (j - 1)] = self.entry(i as i64 - j as i64, d)?;
            }
        }
        let det = dense_det(&mut m, n);
        // a probability up to quadrature noise
        debug_assert!(
            det > -1e-9 && det < 1.0 + 1e-9,
            "transition probability {det} outside [0, 1] sanity band"
        );
        Ok(det)
    }
}

/// Plain LU determinant with partial pivoting, row-major `n x n`.
pub(crate) fn dense_det(m: &mut [f64], n: usize) -> f64 {
    let mut det = 1.0;
    for col in 0..n {
        let mut piv = col;
        for r in col + 1..n {
            if m[r * n + col].abs() > m[piv * n + col].abs() {
                piv = r;
            }
        }
        if m[piv * n + col] == 0.0 {
            return 0.0;
        }
        if piv != col {
            for c in 0..n {
                m.swap(col * n + c, piv * n + c);
            }
            det = -det;
        }
        let d = m[col * n + col];
        det *= d;
        for r in col + 1..n {
            let f = m[r * n + col] / d;
            if f != 0.0 {
                for c in col..n {
                    m[r * n + c] -= f * m[col * n + c];
                }
            }
        }
    }
    det
}

/// All strictly decreasing `x` with `y_i <= x_i <= y_i + reach_i`.
pub fn reachable_configs(y: &ParticleConfig, reach: &[i64]) -> Vec<ParticleConfig> {
    let n = y.len();
    let mut out = Vec::new();
    let mut current = vec![0i64; n];
    // enumerate label by label, rightmost first, respecting exclusion
    fn rec(
        y: &ParticleConfig,
        reach: &[i64],
        label: usize,
        current: &mut Vec<i64>,
        out: &mut Vec<ParticleConfig>,
    ) {
        let n = y.len();
        if label > n {
            out.push(ParticleConfig::new(current.clone()).unwrap());
            return;
        }
        let lo = y.position(label);
        let hi_reach = lo + reach[label - 1];
        let hi = if label == 1 {
            hi_reach
        } else {
            hi_reach.min(current[label - 2] - 1)
        };
        for pos in lo..=hi {
            current[label - 1] = pos;
            rec(y, reach, label + 1, current, out);
        }
    }
    rec(y, reach, 1, &mut current, &mut out);
    out
}

/// Result of summing the transition probability over a padded reachable
/// set: the sum and the exact probability mass the padding cuts off.
#[derive(Debug, Clone, Copy)]
pub struct Normalization {
    pub sum: f64,
    pub tail_bound: f64,
}

/// Sums `greens_det` over every configuration reachable within the pad.
/// Bernoulli schedules have finite support (`pad >= t2` suffices and the
/// tail bound is 0); geometric ones get the exact negative-binomial tail
/// mass of the cut as `tail_bound`.
pub fn normalization_check(
    ctx: &GreensCtx,
    y: &ParticleConfig,
    support_pad: i64,
) -> Result<Normalization> {
    let s = ctx.schedule();
    if s.t3 != 0.0 && s.gamma != 0.0 {
        return Err(Error::OutOfRange(
            "normalization check needs a discrete schedule (t3 = 0)".into(),
        ));
    }
    let t2 = s.t2() as i64;
    let per_particle_reach = if s.t1() == 0 {
        t2 // Bernoulli steps move at most one site each
    } else {
        support_pad + t2
    };
    let reach = vec![per_particle_reach; y.len()];
    let mut sum = 0.0;
    for x in reachable_configs(y, &reach) {
        sum += ctx.greens_det(&x, y)?;
    }
    // A particle's total geometric displacement is a sum of t1 truncated
    // geometrics, dominated by the untruncated negative binomial; the
    // union bound over particles gives the cut mass.
    let mut tail = 0.0;
    if s.t1() > 0 {
        let alphas = &s.alphas;
        let mut pmf = vec![1.0f64]; // distribution of the untruncated sum
        for &a in alphas {
            let cap = (support_pad + t2 + 1) as usize;
            let mut next = vec![0.0; pmf.len() + cap];
            for (i, &p) in pmf.iter().enumerate() {
                let mut w = 1.0 - a;
                for j in 0..cap {
                    next[i + j] += p * w;
                    w *= a;
                }
            }
            next.truncate((support_pad + t2 + 1) as usize);
            pmf = next;
        }
        let head: f64 = pmf.iter().take(per_particle_reach as usize + 1).sum();
        tail = (1.0 - head).max(0.0) * y.len() as f64;
    }
    Ok(Normalization {
        sum,
        tail_bound: tail,
    })
}

/// Residual of the Kolmogorov forward equation for one extra geometric
/// step of parameter `alpha_next` on top of the schedule in `ctx`
/// (`ctx` carries the history up to time `t`): the `2^{N-1}`-term subset
/// decomposition over blocked particles is assembled exactly, with the
/// unbounded sum of the leftmost particle truncated at `pad` and its
/// geometric tail added to the reported residual budget.
pub fn forward_equation_check_geometric(
    ctx_t: &GreensCtx,
    x: &ParticleConfig,
    y: &ParticleConfig,
    alpha_next: f64,
    pad: i64,
) -> Result<ForwardEqResidual> {
    let n = x.len();
    if n > 3 {
        return Err(Error::SizeGuard { n, guard: 3 });
    }
    let mut sched_next = ctx_t.schedule().clone();
    if sched_next.t2() > 0 || sched_next.t3 != 0.0 {
        return Err(Error::OutOfRange(
            "forward-equation check applies to pure geometric schedules".into(),
        ));
    }
    sched_next.alphas.push(alpha_next);
    let ctx_next = GreensCtx::new(sched_next);
    let lhs = ctx_next.greens_det(x, y)?;

    let a = alpha_next;
    let xs = x.positions();
    // gaps k_i = x_i - x_{i+1} for i = 1..N-1
    let gap = |i: usize| xs[i - 1] - xs[i];

    let mut rhs = 0.0;
    for mask in 0..(1usize << (n.max(1) - 1)) {
        let in_mu = |i: usize| mask & (1 << (i - 1)) != 0; // i in 1..N-1
        // weight prefactor: (1-a)^{|mu_bar| + 1} * a^{sum over mu of (k_j - 1)}
        let mut blocked_weight = 1.0f64;
        let mut feasible = true;
        for i in 1..n {
            if in_mu(i) {
                let k = gap(i);
                if k < 1 {
                    feasible = false;
                    break;
                }
                blocked_weight *= a.powi((k - 1) as i32);
            }
        }
        if !feasible {
            continue;
        }
        let free: Vec<usize> = (1..n).filter(|&i| !in_mu(i)).chain([n]).collect();
        let unblocked_factor = (1.0 - a).powi(free.len() as i32);

        // iterate over the jump vector (a_i)_{i in free}; a_N is padded
        let mut ranges: Vec<(usize, i64)> = Vec::new();
        let mut empty = false;
        for &i in &free {
            let hi = if i == n { pad } else { gap(i) - 2 };
            if hi < 0 {
                empty = true;
                break;
            }
            ranges.push((i, hi));
        }
        if empty {
            continue;
        }
        let mut jumps = vec![0i64; ranges.len()];
        'outer: loop {
            // assemble the time-t configuration for this term
            let mut xt = xs.to_vec();
            for i in 1..n {
                if in_mu(i) {
                    xt[i - 1] = xs[i] + 1;
                }
            }
            let mut a_sum = 0i64;
            for (slot, &(i, _)) in ranges.iter().enumerate() {
                xt[i - 1] = xs[i - 1] - jumps[slot];
                a_sum += jumps[slot];
            }
            if let Ok(cfg) = ParticleConfig::new(xt) {
                let g = ctx_t.greens_det(&cfg, y)?;
                rhs += unblocked_factor * blocked_weight * a.powi(a_sum as i32) * g;
            }
            // odometer increment
            for slot in (0..ranges.len()).rev() {
                jumps[slot] += 1;
                if jumps[slot] <= ranges[slot].1 {
                    continue 'outer;
                }
                jumps[slot] = 0;
                if slot == 0 {
                    break 'outer;
                }
            }
            if ranges.is_empty() {
                break;
            }
        }
    }

    // cut mass of the a_N sum: geometric tail beyond the pad
    let tail_budget = a.powi(pad as i32 + 1);
    Ok(ForwardEqResidual {
        residual: (lhs - rhs).abs(),
        tail_budget,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardEqResidual {
    pub residual: f64,
    pub tail_budget: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InitialData;

    #[test]
    fn identity_at_time_zero() {
        let ctx = GreensCtx::new(ParamSchedule::empty());
        let y = ParticleConfig::new(vec![0, -2, -5]).unwrap();
        assert!((ctx.greens_det(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        let x = ParticleConfig::new(vec![1, -2, -5]).unwrap();
        assert!(ctx.greens_det(&x, &y).unwrap().abs() < 1e-12);
    }

    #[test]
    fn two_particle_bernoulli_block_move() {
        // both particles hop: probability p^2
        let ctx = GreensCtx::new(ParamSchedule::pure_bernoulli(0.5, 1).unwrap());
        let y = ParticleConfig::new(vec![0, -1]).unwrap();
        let x = ParticleConfig::new(vec![1, 0]).unwrap();
        assert!((ctx.greens_det(&x, &y).unwrap() - 0.25).abs() < 1e-10);
    }

    #[test]
    fn two_particle_geometric_frozen_trailer() {
        // gap 1 freezes the trailing particle; the leader stays with 1 - alpha
        let ctx = GreensCtx::new(ParamSchedule::pure_geometric(0.5, 1).unwrap());
        let y = ParticleConfig::new(vec![0, -1]).unwrap();
        assert!((ctx.greens_det(&y, &y).unwrap() - 0.5).abs() < 1e-10);
    }

    #[test]
    fn bernoulli_normalization_exact() {
        let ctx = GreensCtx::new(ParamSchedule::pure_bernoulli(0.5, 1).unwrap());
        let y = ParticleConfig::new(vec![0, -1]).unwrap();
        let n = normalization_check(&ctx, &y, 0).unwrap();
        assert!((n.sum - 1.0).abs() < 1e-12, "sum = {}", n.sum);
        assert_eq!(n.tail_bound, 0.0);

        let ctx3 = GreensCtx::new(ParamSchedule::pure_bernoulli(0.3, 2).unwrap());
        let y3 = InitialData::new(vec![0, -2, -3]).unwrap().config();
        let n3 = normalization_check(&ctx3, &y3, 0).unwrap();
        assert!((n3.sum - 1.0).abs() < 1e-10, "sum = {}", n3.sum);
    }

    #[test]
    fn geometric_normalization_with_tail() {
        let ctx = GreensCtx::new(ParamSchedule::pure_geometric(0.5, 2).unwrap());
        let y = ParticleConfig::new(vec![0]).unwrap();
        let n = normalization_check(&ctx, &y, 40).unwrap();
        // NB(2, 1/2) tail past 40: sum_{j >= 41} (j+1) 2^{-(j+2)}
        let exact_tail: f64 = (41..200).map(|j| (j + 1) as f64 * 2f64.powi(-j - 2)).sum();
        assert!((1.0 - n.sum - exact_tail).abs() < 1e-11);
        assert!(n.tail_bound >= exact_tail * 0.999);
        assert!(n.tail_bound < 2f64.powi(-35));
    }

    #[test]
    fn forward_equation_single_particle() {
        let ctx = GreensCtx::new(ParamSchedule::pure_geometric(0.4, 1).unwrap());
        let y = ParticleConfig::new(vec![0]).unwrap();
        for xv in [0i64, 1, 3] {
            let x = ParticleConfig::new(vec![xv]).unwrap();
            let r = forward_equation_check_geometric(&ctx, &x, &y, 0.4, 60).unwrap();
            assert!(r.residual < 1e-10 + r.tail_budget, "x = {xv}: {:?}", r);
        }
    }

    #[test]
    fn forward_equation_adjacent_pair() {
        // x_1 = x_2 + 1 exercises the blocked term mu = {1}
        let ctx = GreensCtx::new(ParamSchedule::pure_geometric(0.5, 1).unwrap());
        let y = ParticleConfig::new(vec![1, -1]).unwrap();
        let x = ParticleConfig::new(vec![2, 1]).unwrap();
        let r = forward_equation_check_geometric(&ctx, &x, &y, 0.3, 80).unwrap();
        assert!(r.residual < 1e-9 + r.tail_budget, "{r:?}");
    }

    #[test]
    fn schedule_parameter_permutation_invariance() {
        // f is symmetric within each parameter block
        let y = ParticleConfig::new(vec![0, -2]).unwrap();
        let x = ParticleConfig::new(vec![3, 0]).unwrap();
        let a = GreensCtx::new(ParamSchedule::new(vec![0.2, 0.6], vec![0.5, 1.5], 0.0, 0.0).unwrap());
        let b = GreensCtx::new(ParamSchedule::new(vec![0.6, 0.2], vec![1.5, 0.5], 0.0, 0.0).unwrap());
        let va = a.greens_det(&x, &y).unwrap();
        let vb = b.greens_det(&x, &y).unwrap();
        assert!((va - vb).abs() < 1e-12);
    }

    #[test]
    fn size_guard_enforced() {
        let ctx = GreensCtx::with_guard(ParamSchedule::empty(), 2);
        let y = ParticleConfig::new(vec![0, -1, -2]).unwrap();
        assert!(matches!(
            ctx.greens_det(&y, &y),
            Err(Error::SizeGuard { .. })
        ));
    }
}
