//! Sliding-window stationarity detector and the zero-velocity pseudo-measurement.

use alloc::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linmodel::{measurement_matrix, MeasurementKind};
use crate::math::Vec3;
use crate::vehicle::gravity_direction_body;

/// How the specific-force window is compared against gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ForceStatistic {
    /// `|| mean(f) - g e_z(eta_hat) ||`
    GravityCompensated,
    /// `| ||mean(f)|| - g |`
    RawNorm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectorConfig {
    /// m/s^2
    pub delta_f: f64,
    /// m/s
    pub delta_v: f64,
    /// Samples per window.
    pub window: usize,
    /// m/s
    pub sigma_zupt: f64,
    pub statistic: ForceStatistic,
    /// At most one applied update per `window / 2` steps.
    pub rate_limit: bool,
}

impl DetectorConfig {
    pub fn strict() -> Self {
        DetectorConfig {
            delta_f: 0.2,
            delta_v: 0.05,
            window: 50,
            sigma_zupt: 0.005,
            statistic: ForceStatistic::GravityCompensated,
            rate_limit: true,
        }
    }

    pub fn permissive() -> Self {
        DetectorConfig { delta_f: 0.6, delta_v: 0.15, window: 200, ..Self::strict() }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "strict" => Some(Self::strict()),
            "permissive" => Some(Self::permissive()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.delta_f > 0.0 && self.delta_v > 0.0 && self.sigma_zupt > 0.0 && self.window >= 1;
        if ok && self.delta_f.is_finite() && self.delta_v.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig("detector thresholds must be positive and the window nonempty"))
        }
    }

    /// Minimum spacing between applied updates, in steps.
    pub fn min_spacing(&self) -> u64 {
        if self.rate_limit {
            (self.window / 2).max(1) as u64
        } else {
            1
        }
    }
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self::strict()
    }
}

/// Window buffers and trigger bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorState {
    forces: VecDeque<Vec3>,
    velocities: VecDeque<Vec3>,
    pub last_decision: bool,
    pub detections: u64,
    pub applied: u64,
    step: u64,
    last_applied: Option<u64>,
    /// Most recent force and velocity statistics.
    pub force_stat: f64,
    pub velocity_stat: f64,
}

impl DetectorState {
    pub fn new(cfg: &DetectorConfig) -> Self {
        DetectorState {
            forces: VecDeque::with_capacity(cfg.window),
            velocities: VecDeque::with_capacity(cfg.window),
            last_decision: false,
            detections: 0,
            applied: 0,
            step: 0,
            last_applied: None,
            force_stat: f64::INFINITY,
            velocity_stat: f64::INFINITY,
        }
    }

    pub fn is_warm(&self, cfg: &DetectorConfig) -> bool {
        self.forces.len() >= cfg.window
    }

    /// Pushes one sample and returns the stationarity decision for this step.
    pub fn step(&mut self, f_meas: &Vec3, v_hat: &Vec3, eta_hat: &Vec3, gravity: f64, cfg: &DetectorConfig) -> bool {
        if self.forces.len() == cfg.window {
            self.forces.pop_front();
            self.velocities.pop_front();
        }
        self.forces.push_back(*f_meas);
        self.velocities.push_back(*v_hat);
        self.step += 1;

        let decision = if self.is_warm(cfg) {
            let n = self.forces.len() as f64;
            let f_mean = self.forces.iter().sum::<Vec3>() / n;
            let v_mean = self.velocities.iter().sum::<Vec3>() / n;
            self.force_stat = match cfg.statistic {
                ForceStatistic::GravityCompensated => (f_mean - gravity_direction_body(eta_hat) * gravity).norm(),
                ForceStatistic::RawNorm => (f_mean.norm() - gravity).abs(),
            };
            self.velocity_stat = v_mean.norm();
            self.force_stat < cfg.delta_f && self.velocity_stat < cfg.delta_v
        } else {
            false
        };
        self.last_decision = decision;
        if decision {
            self.detections += 1;
        }
        decision
    }

    /// Whether a detection on this step may be applied under the rate limit; records it if so.
    pub fn take_update(&mut self, cfg: &DetectorConfig) -> bool {
        if !self.last_decision {
            return false;
        }
        let allowed = match self.last_applied {
            Some(prev) => self.step - prev >= cfg.min_spacing(),
            None => true,
        };
        if allowed {
            self.last_applied = Some(self.step);
            self.applied += 1;
        }
        allowed
    }
}

/// Functional form of [`DetectorState::step`].
pub fn detector_step(
    ds: &DetectorState,
    f_meas: &Vec3,
    v_hat: &Vec3,
    eta_hat: &Vec3,
    gravity: f64,
    cfg: &DetectorConfig,
) -> (DetectorState, bool) {
    let mut next = ds.clone();
    let d = next.step(f_meas, v_hat, eta_hat, gravity, cfg);
    (next, d)
}

/// Zero observation, velocity selector and its covariance.
pub fn zupt_measurement(cfg: &DetectorConfig) -> (DVector<f64>, DMatrix<f64>, DMatrix<f64>) {
    let c = measurement_matrix(&[MeasurementKind::Velocity]).expect("nonempty set");
    let v = DMatrix::identity(3, 3) * (cfg.sigma_zupt * cfg.sigma_zupt);
    (DVector::zeros(3), c, v)
}

/// Share of detections that happened while the true speed exceeded `delta_v`.
pub fn false_positive_rate(detections: &[bool], true_speed: &[f64], cfg: &DetectorConfig) -> Result<f64> {
    if detections.len() != true_speed.len() {
        return Err(Error::LengthMismatch { left: detections.len(), right: true_speed.len() });
    }
    let hits = detections.iter().filter(|d| **d).count();
    if hits == 0 {
        return Ok(0.0);
    }
    let false_hits = detections.iter().zip(true_speed).filter(|(d, s)| **d && **s > cfg.delta_v).count();
    Ok(false_hits as f64 / hits as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    const G: f64 = 9.81;

    fn hover_force() -> Vec3 {
        Vec3::new(0.0, 0.0, G)
    }

    fn replay(cfg: &DetectorConfig, f: &[Vec3], v: &[Vec3]) -> Vec<bool> {
        let mut ds = DetectorState::new(cfg);
        f.iter().zip(v).map(|(f, v)| ds.step(f, v, &Vec3::zeros(), G, cfg)).collect()
    }

    #[test]
    fn ideal_hover_detects_after_warmup() {
        let cfg = DetectorConfig::strict();
        let n = 120;
        let out = replay(&cfg, &alloc::vec![hover_force(); n], &alloc::vec![Vec3::zeros(); n]);
        assert!(out[..cfg.window - 1].iter().all(|d| !d));
        assert!(out[cfg.window - 1..].iter().all(|d| *d));
    }

    #[test]
    fn moving_platform_rejected() {
        let cfg = DetectorConfig::strict();
        let n = 120;
        let v = alloc::vec![Vec3::new(0.06, 0.0, 0.0); n];
        assert!(replay(&cfg, &alloc::vec![hover_force(); n], &v).iter().all(|d| !d));
    }

    #[test]
    fn raw_norm_statistic_ignores_tilt() {
        let cfg = DetectorConfig { statistic: ForceStatistic::RawNorm, ..DetectorConfig::strict() };
        let tilted = Vec3::new(G * 0.3f64.sin(), 0.0, G * 0.3f64.cos());
        let out = replay(&cfg, &alloc::vec![tilted; 60], &alloc::vec![Vec3::zeros(); 60]);
        assert!(out[59]);
        let out = replay(&DetectorConfig::strict(), &alloc::vec![tilted; 60], &alloc::vec![Vec3::zeros(); 60]);
        assert!(!out[59]);
    }

    #[test]
    fn rate_limit_spacing() {
        let cfg = DetectorConfig::strict();
        let mut ds = DetectorState::new(&cfg);
        let mut applied = Vec::new();
        for k in 0..200u64 {
            ds.step(&hover_force(), &Vec3::zeros(), &Vec3::zeros(), G, &cfg);
            if ds.take_update(&cfg) {
                applied.push(k);
            }
        }
        assert_eq!(applied[0], 49);
        assert!(applied.windows(2).all(|w| w[1] - w[0] == 25));
        assert_eq!(ds.applied as usize, applied.len());
    }

    #[test]
    fn measurement_definition() {
        let (y, c, v) = zupt_measurement(&DetectorConfig::strict());
        assert_eq!(y, DVector::zeros(3));
        assert_eq!(c[(0, 3)], 1.0);
        assert!((v[(1, 1)] - 2.5e-5).abs() < 1e-18);
    }

    #[test]
    fn false_positive_cases() {
        let cfg = DetectorConfig::strict();
        let speed: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        assert_eq!(false_positive_rate(&[true; 100], &speed, &cfg).unwrap(), 0.5);
        let perfect: Vec<bool> = speed.iter().map(|s| *s == 0.0).collect();
        assert_eq!(false_positive_rate(&perfect, &speed, &cfg).unwrap(), 0.0);
        assert_eq!(false_positive_rate(&[true; 3], &[0.0; 4], &cfg), Err(Error::LengthMismatch { left: 3, right: 4 }));
    }

    fn trace_strategy() -> impl Strategy<Value = (Vec<Vec3>, Vec<Vec3>)> {
        prop::collection::vec((-0.5f64..0.5, -0.5f64..0.5, -0.5f64..0.5, -0.2f64..0.2, -0.2f64..0.2), 80..240).prop_map(
            |rows| {
                let f = rows.iter().map(|r| Vec3::new(r.0, r.1, G + r.2)).collect();
                let v = rows.iter().map(|r| Vec3::new(r.3, r.4, 0.0)).collect();
                (f, v)
            },
        )
    }

    proptest! {
        #[test]
        fn enlarging_thresholds_never_loses_detections(
            (f, v) in trace_strategy(), df in 0.01f64..0.5, dv in 0.01f64..0.3, grow in 1.0f64..3.0
        ) {
            let base = DetectorConfig { delta_f: df, delta_v: dv, window: 20, ..DetectorConfig::strict() };
            let wider = DetectorConfig { delta_f: df * grow, delta_v: dv * grow, ..base };
            let a = replay(&base, &f, &v);
            let b = replay(&wider, &f, &v);
            prop_assert!(a.iter().zip(&b).all(|(x, y)| !x || *y));
        }

        #[test]
        fn decisions_are_causal((f, v) in trace_strategy(), cut in 30usize..80) {
            let cfg = DetectorConfig { window: 20, delta_f: 0.3, delta_v: 0.2, ..DetectorConfig::strict() };
            let full = replay(&cfg, &f, &v);
            let mut f2 = f.clone();
            let mut v2 = v.clone();
            for k in cut..f2.len() {
                f2[k] = Vec3::new(5.0, 5.0, 0.0);
                v2[k] = Vec3::new(3.0, 0.0, 0.0);
            }
            let prefix = replay(&cfg, &f2, &v2);
            prop_assert_eq!(&full[..cut], &prefix[..cut]);
        }
    }

    #[test]
    fn quiet_interval_is_found_under_strict_thresholds() {
        let cfg = DetectorConfig::strict();
        let dt = 0.001;
        let n = 3000;
        let (quiet_start, quiet_end) = (1250usize, 1750usize);
        let mut f = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        let mut speed = Vec::with_capacity(n);
        for k in 0..n {
            let t = k as f64 * dt;
            let moving = k < quiet_start || k >= quiet_end;
            let amp = if moving { 1.0 } else { 0.0 };
            // sinusoidal maneuvering outside the quiet interval
            let vel = Vec3::new(amp * (3.0 * t).sin(), amp * 0.5 * (2.0 * t).cos(), 0.0);
            let acc = Vec3::new(amp * 3.0 * (3.0 * t).cos(), -amp * (2.0 * t).sin(), 0.0);
            f.push(hover_force() + acc);
            v.push(vel);
            speed.push(vel.norm());
        }
        let det = replay(&cfg, &f, &v);
        for (k, d) in det.iter().enumerate() {
            if *d {
                assert!(k + cfg.window >= quiet_start && k < quiet_end + cfg.window, "stray detection at {k}");
            }
        }
        assert!(det[quiet_start + cfg.window..quiet_end].iter().all(|d| *d));
        let permissive = replay(&DetectorConfig::permissive(), &f, &v);
        let strict_fp = false_positive_rate(&det, &speed, &cfg).unwrap();
        let perm_fp = false_positive_rate(&permissive, &speed, &cfg).unwrap();
        assert!(perm_fp > strict_fp, "{perm_fp} vs {strict_fp}");
    }
}
