//! Exact-law samplers for the three dynamics and the mixed process, plus
//! a sharded Monte Carlo estimator for joint position probabilities.
//!
//! Randomness is split per (run, label, step): each decision draws from
//! its own counter-keyed ChaCha stream, so the trajectory of labels
//! `1..=n` is bit-identical no matter how many particles trail behind
//! them, and MC totals do not depend on the shard layout.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{InitialData, ParamSchedule, ParticleConfig};

/// Root of a family of decorrelated substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        RngStream { seed, stream }
    }

    /// Child stream for a tagged coordinate (label, step, ...).
    pub fn child(&self, tag: u64, a: u64, b: u64) -> RngStream {
        RngStream {
            seed: mix(mix(mix(self.seed, tag), a), b),
            stream: self.stream,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(self.stream);
        r
    }

    fn uniform(&self) -> f64 {
        self.rng().gen::<f64>()
    }
}

/// SplitMix64 finalizer; decorrelates counter-derived seeds.
fn mix(seed: u64, v: u64) -> u64 {
    let mut z = seed ^ v.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const TAG_BERNOULLI: u64 = 1;
const TAG_GEOMETRIC: u64 = 2;
const TAG_CONTINUOUS: u64 = 3;
const TAG_MC_RUN: u64 = 4;

/// One sequential-update Bernoulli step: labels update right to left, so
/// label `i` sees the already-updated position of label `i-1`; it hops
/// with probability `p` when the site ahead is free, label 1 always is.
/// `step_index` keys the per-label random draws.
pub fn step_bernoulli(
    c: &ParticleConfig,
    p: f64,
    rng: &RngStream,
    step_index: u64,
) -> ParticleConfig {
    debug_assert!((0.0..=1.0).contains(&p));
    let mut out = Vec::with_capacity(c.len());
    for label in 1..=c.len() {
        let x = c.position(label);
        let free = label == 1 || out[label - 2] - x > 1;
        let hop = free && rng.child(TAG_BERNOULLI, step_index, label as u64).uniform() < p;
        out.push(if hop { x + 1 } else { x });
    }
    ParticleConfig::new(out).expect("sequential update preserves order")
}

/// One parallel-update geometric step: every label draws a truncated
/// geometric jump against the time-`t` gap to its predecessor,
/// independently across labels.
pub fn step_geometric(
    c: &ParticleConfig,
    alpha: f64,
    rng: &RngStream,
    step_index: u64,
) -> ParticleConfig {
    debug_assert!((0.0..1.0).contains(&alpha));
    let mut out = Vec::with_capacity(c.len());
    for label in 1..=c.len() {
        let x = c.position(label);
        let cap = if label == 1 {
            i64::MAX
        } else {
            c.position(label - 1) - x - 1
        };
        let jump = if alpha == 0.0 || cap == 0 {
            0
        } else {
            let u = rng.child(TAG_GEOMETRIC, step_index, label as u64).uniform();
            truncated_geometric(alpha, cap, u)
        };
        out.push(x + jump);
    }
    ParticleConfig::new(out).expect("parallel update respects gaps")
}

/// Inverse-CDF sample of the gap-truncated geometric law: `P(a) =
/// alpha^a (1-alpha)` for `a < cap` and `alpha^cap` at the cap itself
/// (full weight on the maximal jump).
fn truncated_geometric(alpha: f64, cap: i64, u: f64) -> i64 {
    if cap == 0 || alpha == 0.0 {
        return 0;
    }
    // P(A >= k) = alpha^k for the untruncated law
    let raw = (u.max(f64::MIN_POSITIVE).ln() / alpha.ln()).floor() as i64;
    raw.max(0).min(cap)
}

/// Continuous-time evolution for `duration` at rate `gamma`: every
/// particle carries its own exponential clock; attempts blocked by the
/// exclusion rule are discarded. Events are replayed in global time
/// order, so the law matches the generator exactly.
pub fn evolve_continuous(
    c: &ParticleConfig,
    gamma: f64,
    duration: f64,
    rng: &RngStream,
) -> ParticleConfig {
    if gamma == 0.0 || duration == 0.0 {
        return c.clone();
    }
    // collect per-particle attempt times from label-keyed streams
    let mut events: Vec<(f64, usize)> = Vec::new();
    for label in 1..=c.len() {
        let mut r = rng.child(TAG_CONTINUOUS, 0, label as u64).rng();
        let mut t = 0.0;
        loop {
            let u: f64 = r.gen::<f64>();
            t += -u.max(f64::MIN_POSITIVE).ln() / gamma;
            if t >= duration {
                break;
            }
            events.push((t, label));
        }
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut pos: Vec<i64> = c.positions().to_vec();
    for (_, label) in events {
        let i = label - 1;
        if i == 0 || pos[i - 1] - pos[i] > 1 {
            pos[i] += 1;
        }
    }
    ParticleConfig::new(pos).expect("exclusion preserves order")
}

/// Runs the mixed process: all geometric steps, then all Bernoulli
/// steps, then the continuous part, per the schedule.
pub fn run_mixed(x0: &InitialData, s: &ParamSchedule, rng: &RngStream) -> ParticleConfig {
    run_mixed_traj(x0, s, rng).pop().unwrap().1
}

/// As `run_mixed`, recording the configuration after every step.
/// Step indices: 0 is the initial data, `1..=t1+t2` the discrete steps,
/// and one final entry after the continuous part when `t3 > 0`.
pub fn run_mixed_traj(
    x0: &InitialData,
    s: &ParamSchedule,
    rng: &RngStream,
) -> Vec<(usize, ParticleConfig)> {
    let mut traj = vec![(0, x0.config())];
    let mut step = 0usize;
    for &a in &s.alphas {
        step += 1;
        let next = step_geometric(&traj.last().unwrap().1, a, rng, step as u64);
        traj.push((step, next));
    }
    for &p in &s.bernoulli_probs() {
        step += 1;
        let next = step_bernoulli(&traj.last().unwrap().1, p, rng, step as u64);
        traj.push((step, next));
    }
    if s.t3 > 0.0 && s.gamma > 0.0 {
        step += 1;
        let next = evolve_continuous(&traj.last().unwrap().1, s.gamma, s.t3, rng);
        traj.push((step, next));
    }
    traj
}

/// Monte Carlo estimate of a Bernoulli probability with its binomial
/// standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: u64,
}

impl McEstimate {
    fn from_tally(hits: u64, samples: u64) -> Self {
        let v = hits as f64 / samples as f64;
        McEstimate {
            value: v,
            stderr: (v * (1.0 - v) / samples as f64).sqrt(),
            samples,
        }
    }
}

/// Monte Carlo estimate of `P(X_t(n_j) > a_j for all j)`.
///
/// Only the first `max n_j` particles are simulated; the stream-split
/// draws make the trailing particles irrelevant to those labels. Runs
/// are keyed by their index, so the tally is independent of sharding.
pub fn mc_joint_prob(
    x0: &InitialData,
    s: &ParamSchedule,
    queries: &[(usize, i64)],
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if queries.is_empty() {
        return Err(Error::OutOfRange("empty query list".into()));
    }
    let n_max = queries.iter().map(|q| q.0).max().unwrap();
    for &(n, _) in queries {
        if n == 0 || n > x0.len() {
            return Err(Error::LabelOutOfRange {
                label: n,
                count: x0.len(),
            });
        }
    }
    let x0_prefix = InitialData::new(x0.x0[..n_max].to_vec())?;
    let root = RngStream::new(seed, 0);
    let hits = (0..samples)
        .into_par_iter()
        .map(|run| {
            let run_stream = root.child(TAG_MC_RUN, run, 0);
            let xt = run_mixed(&x0_prefix, s, &run_stream);
            let ok = queries.iter().all(|&(n, a)| xt.position(n) > a);
            ok as u64
        })
        .sum::<u64>();
    Ok(McEstimate::from_tally(hits, samples))
}
