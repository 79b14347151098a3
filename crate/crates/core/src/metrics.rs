//! Run metrics: saturation fraction, normalized effort, normalized uncertainty, errors, power.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::math::{Vec12, Vec4};
use crate::riccati::Tolerances;
use crate::vehicle::wrap_angle;

/// Time fraction with a saturation flag set.
pub fn metric_u_sat(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|f| **f).count() as f64 / flags.len() as f64
}

/// Instantaneous normalized effort: thrust over its trim value, torques over their tolerances.
pub fn normalized_effort(u: &Vec4, u_e: &Vec4, tol: &Tolerances) -> f64 {
    let t = tol.input();
    let scale = [u_e[0], t[1], t[2], t[3]];
    (0..4).map(|i| (u[i] / scale[i]).powi(2)).sum::<f64>().sqrt()
}

/// Time-averaged normalized effort over a uniformly sampled input series.
pub fn metric_u_tot(inputs: &[Vec4], u_e: &Vec4, tol: &Tolerances) -> f64 {
    if inputs.is_empty() {
        return 0.0;
    }
    inputs.iter().map(|u| normalized_effort(u, u_e, tol)).sum::<f64>() / inputs.len() as f64
}

/// Covariance trace normalized by the initial trace.
pub fn metric_zeta(traces: &[f64], tr_p0: f64) -> Vec<f64> {
    traces.iter().map(|t| t / tr_p0).collect()
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v.sqrt())
}

/// Median; infinities sort last, NaN is treated as infinite.
pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v: Vec<f64> = xs.iter().map(|x| if x.is_nan() { f64::INFINITY } else { *x }).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricsReport {
    pub steps: usize,
    pub u_sat_frac: f64,
    /// Fraction of steps whose request the rotors could not realize exactly.
    pub u_unrealizable_frac: f64,
    pub u_tot: f64,
    pub zeta: Vec<f64>,
    /// Over the second half of the run.
    pub zeta_ss_mean: f64,
    pub zeta_ss_std: f64,
    /// m
    pub err_pos_final: f64,
    /// deg
    pub err_att_final: f64,
    /// Estimation error norms per block: position, velocity, attitude, rates.
    pub est_err: Vec<[f64; 4]>,
    pub diverged: bool,
    /// s
    pub diverged_at: Option<f64>,
    /// W
    pub power_avg: f64,
    /// A
    pub current_avg: f64,
    /// min
    pub t_safe_min: Option<f64>,
    /// min/Wh
    pub eta_eff: Option<f64>,
    pub position_updates: u64,
    pub zupt_detections: u64,
    pub zupt_applied: u64,
    pub final_soc: Option<f64>,
}

/// One step's contribution.
#[derive(Debug, Clone, Copy)]
pub struct StepSample {
    pub saturated: bool,
    pub unrealizable: bool,
    pub u_lqr: Vec4,
    pub tr_p: f64,
    pub tr_p_before_update: f64,
    pub estimate_error: Vec12,
    pub p_elec: f64,
    pub i_draw: f64,
    pub updated: bool,
    pub zupt: bool,
    pub pos_update: bool,
}

/// Streaming accumulator used by the simulation driver.
#[derive(Debug, Clone)]
pub struct Accumulator {
    tr_p0: f64,
    sat: u64,
    unreal: u64,
    effort: f64,
    zeta: Vec<f64>,
    est_err: Vec<[f64; 4]>,
    power: f64,
    current: f64,
    pos_updates: u64,
    n: usize,
}

impl Accumulator {
    pub fn new(steps: usize, tr_p0: f64) -> Self {
        Accumulator {
            tr_p0,
            sat: 0,
            unreal: 0,
            effort: 0.0,
            zeta: Vec::with_capacity(steps),
            est_err: Vec::with_capacity(steps),
            power: 0.0,
            current: 0.0,
            pos_updates: 0,
            n: 0,
        }
    }

    pub fn push(&mut self, s: StepSample, u_e: &Vec4, tol: &Tolerances) {
        self.n += 1;
        self.sat += s.saturated as u64;
        self.unreal += s.unrealizable as u64;
        self.effort += normalized_effort(&s.u_lqr, u_e, tol);
        self.zeta.push(s.tr_p / self.tr_p0);
        let e = &s.estimate_error;
        let blk = |o: usize| e.fixed_rows::<3>(o).norm();
        self.est_err.push([blk(0), blk(3), blk(6), blk(9)]);
        self.power += s.p_elec;
        self.current += s.i_draw;
        self.pos_updates += s.pos_update as u64;
    }

    /// Closes the run; `x` is the last true state (deviation from the origin trim).
    pub fn finish(self, x: &Vec12, diverged_at: Option<f64>, _dt: f64) -> MetricsReport {
        let n = self.n.max(1) as f64;
        let diverged = diverged_at.is_some();
        let half = self.zeta.len() / 2;
        let (zm, zs) = mean_std(&self.zeta[half..]);
        let (err_pos, err_att) = if diverged {
            (f64::INFINITY, f64::INFINITY)
        } else {
            let pos = x.fixed_rows::<3>(0).norm();
            let att = (x[6].powi(2) + x[7].powi(2) + wrap_angle(x[8]).powi(2)).sqrt();
            (pos, att.to_degrees())
        };
        MetricsReport {
            steps: self.n,
            u_sat_frac: self.sat as f64 / n,
            u_unrealizable_frac: self.unreal as f64 / n,
            u_tot: self.effort / n,
            zeta_ss_mean: if diverged { f64::INFINITY } else { zm },
            zeta_ss_std: if diverged { f64::INFINITY } else { zs },
            zeta: self.zeta,
            err_pos_final: err_pos,
            err_att_final: err_att,
            est_err: self.est_err,
            diverged,
            diverged_at,
            power_avg: self.power / n,
            current_avg: self.current / n,
            t_safe_min: None,
            eta_eff: None,
            position_updates: self.pos_updates,
            zupt_detections: 0,
            zupt_applied: 0,
            final_soc: None,
        }
    }
}
