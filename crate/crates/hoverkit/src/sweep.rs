//! Monte-Carlo sweeps over the position-update ratio, paired aided/unaided comparisons
//! and endurance tables.

use rayon::prelude::*;
use serde::Serialize;

use hoverkit_core::battery::{endurance, hover_power, BatteryParams, PowerProfile};
use hoverkit_core::metrics::median;
use hoverkit_core::sim::{run_with_design, Design, ScenarioConfig};
use hoverkit_core::vehicle::{hover_rotor_speed, rad_per_sec_to_rpm};
use hoverkit_core::zupt::DetectorConfig;

use crate::report::{ser_f64, ser_opt_f64, RunSummary};
use crate::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variants {
    Unaided,
    Aided,
    Both,
}

impl Variants {
    fn flags(self) -> &'static [bool] {
        match self {
            Variants::Unaided => &[false],
            Variants::Aided => &[true],
            Variants::Both => &[false, true],
        }
    }
}

/// Aggregate of all seeds for one (gamma, variant) cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub gamma: f64,
    pub aided: bool,
    pub seeds: usize,
    pub diverged: usize,
    #[serde(serialize_with = "ser_f64")]
    pub err_pos_median: f64,
    #[serde(serialize_with = "ser_f64")]
    pub err_att_median: f64,
    #[serde(serialize_with = "ser_f64")]
    pub u_tot_median: f64,
    pub u_sat_median: f64,
    #[serde(serialize_with = "ser_f64")]
    pub zeta_ss_median: f64,
    #[serde(serialize_with = "ser_f64")]
    pub zeta_ss_mean: f64,
    /// Mean over runs that did not diverge.
    #[serde(serialize_with = "ser_opt_f64")]
    pub power_avg: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub current_avg: Option<f64>,
    pub runs: Vec<RunSummary>,
}

impl CellSummary {
    fn new(gamma: f64, aided: bool, runs: Vec<RunSummary>) -> Self {
        let col = |f: &dyn Fn(&RunSummary) -> f64| runs.iter().map(f).collect::<Vec<f64>>();
        let effort = col(&|r| if r.diverged { f64::INFINITY } else { r.u_tot });
        let zeta = col(&|r| r.zeta_ss_mean);
        let ok: Vec<&RunSummary> = runs.iter().filter(|r| !r.diverged).collect();
        let mean_ok = |f: &dyn Fn(&RunSummary) -> f64| {
            if ok.is_empty() {
                None
            } else {
                Some(ok.iter().map(|r| f(r)).sum::<f64>() / ok.len() as f64)
            }
        };
        CellSummary {
            gamma,
            aided,
            seeds: runs.len(),
            diverged: runs.len() - ok.len(),
            err_pos_median: median(&col(&|r| r.err_pos_final)),
            err_att_median: median(&col(&|r| r.err_att_final_deg)),
            u_tot_median: median(&effort),
            u_sat_median: median(&col(&|r| r.u_sat_frac)),
            zeta_ss_median: median(&zeta),
            zeta_ss_mean: zeta.iter().sum::<f64>() / zeta.len() as f64,
            power_avg: mean_ok(&|r| r.power_avg),
            current_avg: mean_ok(&|r| r.current_avg),
            runs,
        }
    }

    pub fn diverged_fraction(&self) -> f64 {
        self.diverged as f64 / self.seeds.max(1) as f64
    }
}

/// Aided over unaided on identical seeds.
#[derive(Debug, Clone, Serialize)]
pub struct PairedRatios {
    pub gamma: f64,
    #[serde(serialize_with = "ser_f64")]
    pub err_pos: f64,
    #[serde(serialize_with = "ser_f64")]
    pub u_tot: f64,
    #[serde(serialize_with = "ser_f64")]
    pub zeta_ss_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub cells: Vec<CellSummary>,
    pub ratios: Vec<PairedRatios>,
}

impl SweepTable {
    pub fn cell(&self, gamma: f64, aided: bool) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.gamma == gamma && c.aided == aided)
    }

    pub fn ratio(&self, gamma: f64) -> Option<&PairedRatios> {
        self.ratios.iter().find(|r| r.gamma == gamma)
    }
}

fn check_gammas(gammas: &[f64]) -> AppResult<()> {
    if gammas.is_empty() || !gammas.iter().all(|g| *g > 0.0 && *g <= 1.0) {
        return Err(AppError::Config("gammas must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Runs every (gamma, seed, variant) in parallel; seeds are `0..seeds` and shared across variants.
pub fn sweep_gamma(
    base: &ScenarioConfig,
    gammas: &[f64],
    seeds: u64,
    variants: Variants,
    detector: DetectorConfig,
) -> AppResult<SweepTable> {
    check_gammas(gammas)?;
    base.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let design = Design::new(base)?;
    let mut keys = Vec::new();
    for &g in gammas {
        for &aided in variants.flags() {
            for s in 0..seeds {
                keys.push((g, aided, s));
            }
        }
    }
    let runs: Vec<RunSummary> = keys
        .par_iter()
        .map(|&(g, aided, s)| {
            let mut cfg = base.clone();
            cfg.gamma = g;
            cfg.seed = s;
            cfg.detector = if aided { Some(detector) } else { None };
            let (_, r) = run_with_design(&cfg, &design)?;
            Ok(RunSummary::new(g, s, &r))
        })
        .collect::<AppResult<Vec<_>>>()?;

    let per = seeds as usize;
    let mut cells = Vec::new();
    for (i, chunk) in runs.chunks(per.max(1)).enumerate() {
        let (g, aided, _) = keys[i * per];
        cells.push(CellSummary::new(g, aided, chunk.to_vec()));
    }
    let mut ratios = Vec::new();
    if variants == Variants::Both {
        for &g in gammas {
            let base_cell = cells.iter().find(|c| c.gamma == g && !c.aided).expect("unaided cell");
            let aided_cell = cells.iter().find(|c| c.gamma == g && c.aided).expect("aided cell");
            ratios.push(PairedRatios {
                gamma: g,
                err_pos: aided_cell.err_pos_median / base_cell.err_pos_median,
                u_tot: aided_cell.u_tot_median / base_cell.u_tot_median,
                zeta_ss_mean: aided_cell.zeta_ss_mean / base_cell.zeta_ss_mean,
            });
        }
    }
    Ok(SweepTable { cells, ratios })
}

/// Power and hover time of one variant at one ratio.
#[derive(Debug, Clone, Serialize)]
pub struct PowerCell {
    #[serde(serialize_with = "ser_opt_f64")]
    pub power_avg: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub current_avg: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub t_safe_min: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub eta_eff: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EnduranceRow {
    pub gamma: f64,
    pub baseline: PowerCell,
    pub aided: PowerCell,
    /// Percent reduction of average power with aiding.
    #[serde(serialize_with = "ser_opt_f64")]
    pub power_reduction_pct: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub current_reduction_pct: Option<f64>,
    /// Minutes gained with aiding.
    #[serde(serialize_with = "ser_opt_f64")]
    pub t_safe_gain_min: Option<f64>,
}

pub fn power_cell(cell: &CellSummary, bat: &BatteryParams, dt: f64) -> AppResult<PowerCell> {
    let (t_safe, eta) = match cell.power_avg {
        Some(p) => {
            let e = endurance(PowerProfile::Constant(p), bat, 1.0, dt, 600.0)?;
            (e.minutes_to_floor, e.eta_eff)
        }
        None => (None, None),
    };
    Ok(PowerCell { power_avg: cell.power_avg, current_avg: cell.current_avg, t_safe_min: t_safe, eta_eff: eta })
}

fn pct_drop(base: Option<f64>, new: Option<f64>) -> Option<f64> {
    Some(100.0 * (1.0 - new? / base?))
}

/// Average power, current and hover time with and without aiding.
pub fn endurance_comparison(
    base: &ScenarioConfig,
    gammas: &[f64],
    seeds: u64,
    detector: DetectorConfig,
) -> AppResult<Vec<EnduranceRow>> {
    let bat = base.battery.ok_or_else(|| AppError::Config("endurance study needs the battery enabled".into()))?;
    let table = sweep_gamma(base, gammas, seeds, Variants::Both, detector)?;
    endurance_rows(&table, gammas, &bat, base.endurance_dt)
}

/// Power rows from an existing paired sweep.
pub fn endurance_rows(
    table: &SweepTable,
    gammas: &[f64],
    bat: &BatteryParams,
    dt: f64,
) -> AppResult<Vec<EnduranceRow>> {
    let mut rows = Vec::new();
    for &g in gammas {
        let missing = || AppError::Config(format!("sweep has no paired cells for gamma {g}"));
        let b = power_cell(table.cell(g, false).ok_or_else(missing)?, bat, dt)?;
        let a = power_cell(table.cell(g, true).ok_or_else(missing)?, bat, dt)?;
        rows.push(EnduranceRow {
            gamma: g,
            power_reduction_pct: pct_drop(b.power_avg, a.power_avg),
            current_reduction_pct: pct_drop(b.current_avg, a.current_avg),
            t_safe_gain_min: a.t_safe_min.zip(b.t_safe_min).map(|(x, y)| x - y),
            baseline: b,
            aided: a,
        });
    }
    Ok(rows)
}

/// Ideal hover figures from the closed-form power.
#[derive(Debug, Clone, Serialize)]
pub struct HoverBudget {
    pub rotor_speed_rpm: f64,
    pub power_w: f64,
    pub current_at_nominal_a: f64,
    pub ideal_minutes: f64,
    #[serde(serialize_with = "ser_opt_f64")]
    pub minutes_to_floor: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub minutes_to_empty: Option<f64>,
    #[serde(serialize_with = "ser_opt_f64")]
    pub eta_eff: Option<f64>,
}

pub fn hover_budget(cfg: &ScenarioConfig) -> AppResult<HoverBudget> {
    let bat = cfg.battery.ok_or_else(|| AppError::Config("hover budget needs the battery enabled".into()))?;
    let p = hover_power(&bat, &cfg.vehicle);
    let e = endurance(PowerProfile::Constant(p), &bat, 1.0, cfg.endurance_dt, 600.0)?;
    Ok(HoverBudget {
        rotor_speed_rpm: rad_per_sec_to_rpm(hover_rotor_speed(&cfg.vehicle)),
        power_w: p,
        current_at_nominal_a: p / bat.v_nom,
        ideal_minutes: 60.0 * bat.capacity_ah * bat.v_nom / p,
        minutes_to_floor: e.minutes_to_floor,
        minutes_to_empty: e.minutes_to_empty,
        eta_eff: e.eta_eff,
    })
}
