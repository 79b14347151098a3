//! JSON summaries; non-finite numbers are written as strings ("inf").

use serde::{Serialize, Serializer};

use hoverkit_core::metrics::MetricsReport;

/// Writes finite values as numbers and everything else as "inf", "-inf" or "nan".
pub fn ser_f64<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub fn ser_opt_f64<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => ser_f64(x, s),
        None => s.serialize_str("inf"),
    }
}

/// One run without its per-step series.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub gamma: f64,
    pub seed: u64,
    pub steps: usize,
    pub diverged: bool,
    pub diverged_at: Option<f64>,
    #[serde(serialize_with = "ser_f64")]
    pub err_pos_final: f64,
    #[serde(serialize_with = "ser_f64")]
    pub err_att_final_deg: f64,
    pub u_sat_frac: f64,
    pub u_unrealizable_frac: f64,
    #[serde(serialize_with = "ser_f64")]
    pub u_tot: f64,
    #[serde(serialize_with = "ser_f64")]
    pub zeta_ss_mean: f64,
    #[serde(serialize_with = "ser_f64")]
    pub zeta_ss_std: f64,
    pub power_avg: f64,
    pub current_avg: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub t_safe_min: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub eta_eff: Option<f64>,
    pub position_updates: u64,
    pub zupt_detections: u64,
    pub zupt_applied: u64,
}

impl RunSummary {
    pub fn new(gamma: f64, seed: u64, r: &MetricsReport) -> Self {
        RunSummary {
            gamma,
            seed,
            steps: r.steps,
            diverged: r.diverged,
            diverged_at: r.diverged_at,
            err_pos_final: r.err_pos_final,
            err_att_final_deg: r.err_att_final,
            u_sat_frac: r.u_sat_frac,
            u_unrealizable_frac: r.u_unrealizable_frac,
            u_tot: r.u_tot,
            zeta_ss_mean: r.zeta_ss_mean,
            zeta_ss_std: r.zeta_ss_std,
            power_avg: r.power_avg,
            current_avg: r.current_avg,
            t_safe_min: r.t_safe_min,
            eta_eff: r.eta_eff,
            position_updates: r.position_updates,
            zupt_detections: r.zupt_detections,
            zupt_applied: r.zupt_applied,
        }
    }
}

/// Formats a table cell, printing "inf" for diverged values.
pub fn cell(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        "inf".to_string()
    }
}
