//! Shared domain types: parameter schedules, ordered particle
//! configurations and the particle/height-function bijection.
//!
//! Particles live on `Z`, are labeled `1..=N` from right to left and keep
//! their order under all three dynamics, so a configuration is a strictly
//! decreasing vector of positions (an element of the Weyl chamber).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the mixed process: `t1` discrete steps with truncated
/// geometric jumps (parallel update), then `t2` discrete steps with
/// Bernoulli jumps (sequential update), then continuous evolution at rate
/// `gamma` for duration `t3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    /// Geometric hop parameters `alpha_1..alpha_t1`, each in `[0, 1)`.
    #[serde(default)]
    pub alphas: Vec<f64>,
    /// Bernoulli odds `beta_{t1+1}..beta_{t1+t2}`, each `>= 0`; the hop
    /// probability of step `j` is `p_j = beta_j / (1 + beta_j)`.
    #[serde(default)]
    pub betas: Vec<f64>,
    /// Continuous-time jump rate.
    #[serde(default)]
    pub gamma: f64,
    /// Continuous-time duration.
    #[serde(default)]
    pub t3: f64,
}

impl ParamSchedule {
    pub fn new(alphas: Vec<f64>, betas: Vec<f64>, gamma: f64, t3: f64) -> Result<Self> {
        validate_schedule(ParamSchedule {
            alphas,
            betas,
            gamma,
            t3,
        })
    }

    /// Schedule with no steps at all; the dynamics is the identity.
    pub fn empty() -> Self {
        ParamSchedule {
            alphas: Vec::new(),
            betas: Vec::new(),
            gamma: 0.0,
            t3: 0.0,
        }
    }

    pub fn pure_bernoulli(p: f64, steps: usize) -> Result<Self> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::OutOfRange(format!("hop probability p = {p}")));
        }
        Self::new(Vec::new(), vec![p / (1.0 - p); steps], 0.0, 0.0)
    }

    pub fn pure_geometric(alpha: f64, steps: usize) -> Result<Self> {
        Self::new(vec![alpha; steps], Vec::new(), 0.0, 0.0)
    }

    pub fn pure_continuous(gamma: f64, t3: f64) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), gamma, t3)
    }

    /// Number of geometric steps.
    pub fn t1(&self) -> usize {
        self.alphas.len()
    }

    /// Number of Bernoulli steps.
    pub fn t2(&self) -> usize {
        self.betas.len()
    }

    /// Total label time `t1 + t2 + t3`.
    pub fn total_time(&self) -> f64 {
        self.t1() as f64 + self.t2() as f64 + self.t3
    }

    /// Hop probabilities `p_j = beta_j/(1+beta_j)` of the Bernoulli steps.
    pub fn bernoulli_probs(&self) -> Vec<f64> {
        self.betas
            .iter()
            .map(|&b| if b.is_infinite() { 1.0 } else { b / (1.0 + b) })
            .collect()
    }

    /// True if the schedule has no continuous part, so the set of
    /// configurations reachable in finitely many steps is finite
    /// (Bernoulli) or has exact geometric tails.
    pub fn is_discrete(&self) -> bool {
        self.t3 == 0.0 || self.gamma == 0.0
    }
}

/// Checks every schedule invariant and hands the schedule back unchanged.
pub fn validate_schedule(s: ParamSchedule) -> Result<ParamSchedule> {
    for (j, &a) in s.alphas.iter().enumerate() {
        if !(0.0..1.0).contains(&a) {
            return Err(Error::OutOfRange(format!("alpha_{} = {a}", j + 1)));
        }
    }
    for (j, &b) in s.betas.iter().enumerate() {
        if !(b >= 0.0) {
            return Err(Error::OutOfRange(format!("beta_{} = {b}", j + 1)));
        }
    }
    if !(s.gamma >= 0.0) {
        return Err(Error::OutOfRange(format!("gamma = {}", s.gamma)));
    }
    if !(s.t3 >= 0.0) {
        return Err(Error::OutOfRange(format!("t3 = {}", s.t3)));
    }
    Ok(s)
}

/// Positions of `N` labeled particles, strictly decreasing in the label:
/// `positions[0] = X(1) > positions[1] = X(2) > ...`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticleConfig {
    positions: Vec<i64>,
}

impl ParticleConfig {
    pub fn new(positions: Vec<i64>) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::OutOfRange(format!(
                "positions not strictly decreasing: {positions:?}"
            )));
        }
        Ok(ParticleConfig { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Position of the particle with 1-based label `label`.
    pub fn position(&self, label: usize) -> i64 {
        self.positions[label - 1]
    }

    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// First `n` labels as a sub-configuration.
    pub fn prefix(&self, n: usize) -> ParticleConfig {
        ParticleConfig {
            positions: self.positions[..n].to_vec(),
        }
    }
}

/// Right-finite initial data `X_0(1) > X_0(2) > ... > X_0(N)`; labels
/// `<= 0` sit at `+infinity` and are never materialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialData {
    pub x0: Vec<i64>,
}

impl InitialData {
    pub fn new(x0: Vec<i64>) -> Result<Self> {
        if x0.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::OutOfRange(format!(
                "initial positions not strictly decreasing: {x0:?}"
            )));
        }
        Ok(InitialData { x0 })
    }

    /// Step data `X_0(j) = -j`.
    pub fn step(n: usize) -> Self {
        InitialData {
            x0: (1..=n as i64).map(|j| -j).collect(),
        }
    }

    /// Half-flat data `X_0(j) = -2j` (density 1/2 on the negative axis).
    pub fn half_flat(n: usize) -> Self {
        InitialData {
            x0: (1..=n as i64).map(|j| -2 * j).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.x0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x0.is_empty()
    }

    /// `X_0(label)` for a 1-based label.
    pub fn position(&self, label: usize) -> i64 {
        self.x0[label - 1]
    }

    pub fn config(&self) -> ParticleConfig {
        ParticleConfig {
            positions: self.x0.clone(),
        }
    }
}

/// Label of the rightmost particle at or left of `u`, i.e.
/// `min{k : X(k) <= u}`; returns the sentinel `N + 1` when no stored
/// particle sits at or left of `u`.
pub fn particle_inverse(c: &ParticleConfig, u: i64) -> usize {
    // positions are strictly decreasing, so X(k) <= u holds exactly for
    // k >= k0; partition_point finds the prefix with X(k) > u.
    c.positions.partition_point(|&x| x > u) + 1
}

/// Integer height profile on a window, with `h_0(0) = 0` fixed by the
/// reference frame of the initial data.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    pub z_lo: i64,
    pub z_hi: i64,
    pub values: Vec<i64>,
}

impl HeightField {
    pub fn value(&self, z: i64) -> i64 {
        self.values[(z - self.z_lo) as usize]
    }
}

/// Height function `h_t(z) = -2(X_t^{-1}(z-1) - X_0^{-1}(-1)) - z` on the
/// window `[z_lo, z_hi]`. `c0` fixes the frame through `X_0^{-1}(-1)`.
///
/// Fails with `WindowUnderflow` when the inverse at some window point
/// falls past the last stored particle, since labels beyond the data
/// would be needed to continue the profile.
pub fn height_from_config(
    c: &ParticleConfig,
    c0: &ParticleConfig,
    z_lo: i64,
    z_hi: i64,
) -> Result<HeightField> {
    assert!(z_lo <= z_hi);
    let frame = particle_inverse(c0, -1);
    if frame == c0.len() + 1 {
        return Err(Error::WindowUnderflow {
            available: c0.len(),
        });
    }
    let mut values = Vec::with_capacity((z_hi - z_lo + 1) as usize);
    for z in z_lo..=z_hi {
        let inv = particle_inverse(c, z - 1);
        if inv == c.len() + 1 {
            return Err(Error::WindowUnderflow { available: c.len() });
        }
        values.push(-2 * (inv as i64 - frame as i64) - z);
    }
    Ok(HeightField { z_lo, z_hi, values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_accepts_pure_bernoulli() {
        let s = ParamSchedule::new(vec![], vec![0.5], 0.0, 0.0).unwrap();
        assert_eq!(s.t1(), 0);
        assert_eq!(s.t2(), 1);
    }

    #[test]
    fn validate_rejects_alpha_one() {
        // alpha = 1 makes the geometric weight diverge.
        assert!(ParamSchedule::new(vec![1.0], vec![], 0.0, 0.0).is_err());
    }

    #[test]
    fn validate_mixed_bookkeeping() {
        let s = ParamSchedule::new(vec![0.3, 0.3], vec![1.0], 2.0, 1.5).unwrap();
        assert_eq!(s.t1(), 2);
        assert_eq!(s.t2(), 1);
        assert_eq!(s.total_time(), 2.0 + 1.0 + 1.5);
        assert_eq!(s.bernoulli_probs(), vec![0.5]);
    }

    #[test]
    fn validate_rejects_negatives() {
        assert!(ParamSchedule::new(vec![-0.1], vec![], 0.0, 0.0).is_err());
        assert!(ParamSchedule::new(vec![], vec![-1.0], 0.0, 0.0).is_err());
        assert!(ParamSchedule::new(vec![], vec![], -1.0, 0.0).is_err());
        assert!(ParamSchedule::new(vec![], vec![], 0.0, -0.5).is_err());
    }

    #[test]
    fn inverse_scans_from_right() {
        let c = ParticleConfig::new(vec![0, -2, -3]).unwrap();
        assert_eq!(particle_inverse(&c, -1), 2);
        assert_eq!(particle_inverse(&c, 0), 1);
        assert_eq!(particle_inverse(&c, -4), 4); // sentinel
        assert_eq!(particle_inverse(&c, 17), 1);
    }

    #[test]
    fn config_rejects_weak_order() {
        assert!(ParticleConfig::new(vec![0, 0]).is_err());
        assert!(ParticleConfig::new(vec![-1, 0]).is_err());
    }

    #[test]
    fn step_height_is_a_peak_at_zero() {
        // Step data occupies every site <= -1, so the profile rises to
        // h(0) = 0 from the left and falls with slope -1 to the right.
        let c0 = InitialData::step(30).config();
        let h = height_from_config(&c0, &c0, -10, 10).unwrap();
        for z in -10..=10i64 {
            assert_eq!(h.value(z), -z.abs(), "z = {z}");
        }
    }

    #[test]
    fn height_zero_at_origin_and_unit_increments() {
        let c0 = InitialData::new(vec![3, -1, -2, -5, -6, -9]).unwrap().config();
        let c = ParticleConfig::new(vec![5, 2, -2, -4, -6, -9]).unwrap();
        let h0 = height_from_config(&c0, &c0, -3, 3).unwrap();
        assert_eq!(h0.value(0), 0);
        let h = height_from_config(&c, &c0, -3, 5).unwrap();
        for z in -3..5i64 {
            let d = h.value(z + 1) - h.value(z);
            assert!(d == 1 || d == -1);
            // increment +1 exactly over occupied sites
            let occupied = c.positions().contains(&z);
            assert_eq!(d == 1, occupied, "z = {z}");
        }
    }

    #[test]
    fn height_window_underflow() {
        let c0 = InitialData::step(3).config();
        assert!(matches!(
            height_from_config(&c0, &c0, -10, 0),
            Err(Error::WindowUnderflow { .. })
        ));
    }

    #[test]
    fn height_particle_duality() {
        // particle_inverse reconstructed from the height field matches the
        // direct scan: X^{-1}(z-1) = (frame - (h(z) + z)/2).
        let c0 = InitialData::step(40).config();
        let c = ParticleConfig::new(vec![2, 1, -1, -4, -5, -6, -8, -9, -10, -11]).unwrap();
        let c_ext = {
            let mut v = c.positions().to_vec();
            v.extend((12..=40).map(|j| -j));
            ParticleConfig::new(v).unwrap()
        };
        let h = height_from_config(&c_ext, &c0, -5, 5).unwrap();
        let frame = particle_inverse(&c0, -1) as i64;
        for z in -5..=5i64 {
            let from_height = frame - (h.value(z) + z) / 2;
            assert_eq!(from_height, particle_inverse(&c_ext, z - 1) as i64);
        }
    }

    #[test]
    fn serde_round_trip_keys() {
        let s = ParamSchedule::new(vec![0.3], vec![0.5], 1.0, 2.0).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("\"alphas\"") && j.contains("\"betas\""));
        assert!(j.contains("\"gamma\"") && j.contains("\"t3\""));
        let back: ParamSchedule = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
        let x = InitialData::new(vec![0, -2]).unwrap();
        let j = serde_json::to_string(&x).unwrap();
        assert!(j.contains("\"x0\""));
    }
}
