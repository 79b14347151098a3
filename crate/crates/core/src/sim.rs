//! Closed-loop hover simulation: LQR, mixer inversion, battery, rotor lag, plant, sensing and filtering.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[allow(unused_imports)]
use num_traits::Float;

use crate::actuation::{allocate_nnls, applied_wrench, clamp_speeds, ActuatorLimits, RotorLagState};
use crate::battery::{
    dae_step, electrical_power, endurance, sag_scaled_command, BatteryParams, BatteryState, PowerProfile,
};
use crate::error::{Error, Result};
use crate::kalman::{apply_gain, initial_covariance, kf_predict, kf_update_innovation, FilterState};
use crate::linmodel::{
    discretize, linearize_hover, measurement_covariance, measurement_matrix, process_covariance, EquilibriumPoint,
    MeasurementKind, NoiseConfig,
};
use crate::math::{all_finite, rk4_step, Mat12, Mat12x4, Mat4x12, Vec12, Vec3, Vec4};
use crate::metrics::{self, MetricsReport};
use crate::riccati::{bryson_weights, GainSet, Tolerances};
use crate::vehicle::{
    dynamics, hover_rotor_speed, mixer_matrix, wrap_angle, ControlInput, RotorSpeeds, StateVector, VehicleParams,
    GIMBAL_GUARD,
};
use crate::zupt::{zupt_measurement, DetectorConfig, DetectorState};

/// Norm beyond which a run is declared diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

/// How the estimator gain is obtained at each correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum GainMode {
    /// Gain from the steady-state covariance of the continuous filter.
    Frozen,
    /// Optimal gain from the propagated covariance.
    TimeVarying,
}

/// When attitude and body-rate rows are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum AttitudeAiding {
    EveryStep,
    WithPosition,
    Off,
}

/// Input used by the filter's prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PredictionInput {
    /// Wrench reconstructed from the rotor output speeds.
    Applied,
    /// Controller request before allocation.
    Commanded,
    /// Thrust and horizontal forcing from the accelerometer, torques from the sent rotor speeds.
    Imu,
}

/// Initial estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EstimateInit {
    /// True initial state plus a draw from the initial covariance.
    SampledFromPrior,
    /// The trim point.
    Equilibrium,
    /// The true initial state.
    Truth,
}

/// How process noise reaches the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DisturbanceModel {
    /// Random linear and angular accelerations held over each step.
    Force,
    /// State increments drawn from the per-step process covariance.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct DisturbanceConfig {
    pub model: DisturbanceModel,
    /// Multiplies every disturbance standard deviation.
    pub scale: f64,
}

impl Default for DisturbanceConfig {
    fn default() -> Self {
        DisturbanceConfig { model: DisturbanceModel::Force, scale: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct EstimatorConfig {
    pub gain_mode: GainMode,
    pub aiding: AttitudeAiding,
    pub prediction_input: PredictionInput,
    pub init: EstimateInit,
    /// Initial standard deviations for position, velocity, attitude and rates.
    pub p0_sigmas: [f64; 4],
    /// Multiplies the filter's process covariance.
    pub process_scale: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            gain_mode: GainMode::TimeVarying,
            aiding: AttitudeAiding::EveryStep,
            prediction_input: PredictionInput::Imu,
            init: EstimateInit::SampledFromPrior,
            p0_sigmas: [0.1, 0.1, 0.01, 0.01],
            process_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct RotorConfig {
    /// s
    pub tau_rot: f64,
    /// Speed limits as fractions of hover speed.
    pub min_fraction: f64,
    pub max_fraction: f64,
}

impl Default for RotorConfig {
    fn default() -> Self {
        RotorConfig { tau_rot: 0.02, min_fraction: 0.1, max_fraction: 1.5 }
    }
}

/// Everything one closed-loop run needs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ScenarioConfig {
    /// s
    pub dt: f64,
    /// s
    pub duration: f64,
    /// Fraction of steps carrying a position fix.
    pub gamma: f64,
    pub seed: u64,
    pub x0: StateVector,
    pub vehicle: VehicleParams,
    pub noise: NoiseConfig,
    pub detector: Option<DetectorConfig>,
    /// `None` disables the battery stage.
    pub battery: Option<BatteryParams>,
    pub initial_soc: f64,
    pub rotor: RotorConfig,
    pub estimator: EstimatorConfig,
    pub disturbance: DisturbanceConfig,
    /// Multiplies every sensor noise draw; the filter design is unaffected.
    pub sensor_noise_scale: f64,
    /// Trace decimation; every step is still used for metrics.
    pub log_every: usize,
    /// Step of the coarse endurance integration, s.
    pub endurance_dt: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let deg = core::f64::consts::PI / 180.0;
        ScenarioConfig {
            dt: 0.001,
            duration: 10.0,
            gamma: 1.0,
            seed: 0,
            x0: StateVector {
                position: Vec3::new(0.5, -0.5, 0.3),
                velocity: Vec3::zeros(),
                attitude: Vec3::new(2.0 * deg, -2.0 * deg, 5.0 * deg),
                body_rates: Vec3::zeros(),
            },
            vehicle: VehicleParams::default(),
            noise: NoiseConfig::default(),
            detector: None,
            battery: Some(BatteryParams::default()),
            initial_soc: 1.0,
            rotor: RotorConfig::default(),
            estimator: EstimatorConfig::default(),
            disturbance: DisturbanceConfig::default(),
            sensor_noise_scale: 1.0,
            log_every: 10,
            endurance_dt: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidConfig("dt must be positive"));
        }
        if !(self.duration > self.dt) {
            return Err(Error::InvalidConfig("duration must exceed dt"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig("gamma must lie in (0, 1]"));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be at least 1"));
        }
        if !(self.rotor.tau_rot > 0.0) {
            return Err(Error::InvalidConfig("rotor time constant must be positive"));
        }
        if !(0.0..=1.0).contains(&self.initial_soc) {
            return Err(Error::InvalidConfig("initial state of charge must lie in [0, 1]"));
        }
        if !(self.disturbance.scale >= 0.0)
            || !(self.sensor_noise_scale >= 0.0)
            || !(self.estimator.process_scale > 0.0)
        {
            return Err(Error::InvalidConfig("noise scales must be nonnegative"));
        }
        if !self.estimator.p0_sigmas.iter().all(|s| *s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidConfig("initial covariance sigmas must be positive"));
        }
        self.vehicle.validate()?;
        self.noise.validate()?;
        if let Some(d) = &self.detector {
            d.validate()?;
        }
        if let Some(b) = &self.battery {
            b.validate()?;
        }
        ActuatorLimits::from_hover(&self.vehicle, self.rotor.min_fraction, self.rotor.max_fraction)?;
        Ok(())
    }

    /// Steps between position fixes.
    pub fn update_period(&self) -> usize {
        ((1.0 / self.gamma).round() as usize).max(1)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// One logged step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: f64,
    pub x: Vec12,
    pub x_hat: Vec12,
    pub tr_p: f64,
    pub u_lqr: Vec4,
    pub omega_des: Vec4,
    pub omega_in: Vec4,
    pub omega_cmd: Vec4,
    pub omega_out: Vec4,
    pub u_out: Vec4,
    pub zupt: bool,
    pub pos_update: bool,
    pub soc: f64,
    pub v_term: f64,
    pub i_draw: f64,
    pub p_elec: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimTrace {
    pub records: Vec<TraceRecord>,
}

/// Synthesized controller and filter matrices shared by runs with the same model.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub gains: GainSet,
    pub ad: Mat12,
    pub bd: Mat12x4,
    pub wd: Mat12,
    pub tolerances: Tolerances,
}

impl Design {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        let p = &cfg.vehicle;
        let eq = EquilibriumPoint::hover(p, 0.0);
        let (a, b) = linearize_hover(p, &eq);
        let tolerances = Tolerances::hover(p);
        let weights = bryson_weights(&tolerances)?;
        let wd = process_covariance(&cfg.noise, cfg.dt) * cfg.estimator.process_scale;
        let c = measurement_matrix(&MeasurementKind::ALL)?;
        // continuous-time densities equivalent to the per-step covariances
        let w_c = wd / cfg.dt;
        let v_c = measurement_covariance(&MeasurementKind::ALL, &cfg.noise)? * cfg.dt;
        let gains = GainSet::synthesize(&a, &b, &weights, &c, &w_c, &v_c)?;
        let (ad, bd) = discretize(&a, &b, cfg.dt);
        Ok(Design { gains, ad, bd, wd, tolerances })
    }
}

struct Noise {
    process: ChaCha8Rng,
    sensors: ChaCha8Rng,
    imu: ChaCha8Rng,
}

impl Noise {
    fn new(seed: u64) -> Self {
        let stream = |s: u64| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(s);
            r
        };
        Noise { process: stream(1), sensors: stream(2), imu: stream(3) }
    }
}

fn gaussian3(rng: &mut ChaCha8Rng, sigma: f64) -> Vec3 {
    Vec3::from_fn(|_, _| {
        let z: f64 = StandardNormal.sample(rng);
        z * sigma
    })
}

/// Deviation of a full state from the trim (yaw wrapped).
fn deviation(x: &Vec12) -> Vec12 {
    let mut d = *x;
    d[8] = wrap_angle(d[8]);
    d
}

fn diverged(x: &Vec12) -> bool {
    let limit = core::f64::consts::FRAC_PI_2 - GIMBAL_GUARD;
    !all_finite(x) || x[6].abs() >= limit || x[7].abs() >= limit || x.norm() > DIVERGENCE_NORM
}

fn kinds_rows(kinds: &[MeasurementKind]) -> Vec<usize> {
    let mut rows = Vec::new();
    for k in kinds {
        for i in 0..3 {
            rows.push(k.offset() + i);
        }
    }
    rows
}

/// Runs one scenario; a diverged run returns partial metrics with `diverged` set.
pub fn run_closed_loop(cfg: &ScenarioConfig) -> Result<(SimTrace, MetricsReport)> {
    cfg.validate()?;
    let design = Design::new(cfg)?;
    run_with_design(cfg, &design)
}

/// [`run_closed_loop`] with a precomputed design.
pub fn run_with_design(cfg: &ScenarioConfig, design: &Design) -> Result<(SimTrace, MetricsReport)> {
    cfg.validate()?;
    let p = cfg.vehicle;
    let dt = cfg.dt;
    let steps = cfg.steps();
    let period = cfg.update_period();
    let mixer = mixer_matrix(&p);
    let limits = ActuatorLimits::from_hover(&p, cfg.rotor.min_fraction, cfg.rotor.max_fraction)?;
    let omega_hover = hover_rotor_speed(&p);
    let u_e = p.hover_input().to_vector();
    let k_gain: Mat4x12 = design.gains.k;
    let noise_cfg = cfg.noise;
    let est = cfg.estimator;

    let mut rng = Noise::new(cfg.seed);
    let mut x = cfg.x0.wrapped().to_vector();
    let p0 = initial_covariance(est.p0_sigmas);
    let x_hat0 = match est.init {
        EstimateInit::Equilibrium => Vec12::zeros(),
        EstimateInit::Truth => deviation(&x),
        EstimateInit::SampledFromPrior => {
            let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            init_rng.set_stream(4);
            let mut d = deviation(&x);
            for i in 0..12 {
                let z: f64 = StandardNormal.sample(&mut init_rng);
                d[i] += z * p0[(i, i)].sqrt();
            }
            d
        }
    };
    let mut fs = FilterState::new(x_hat0, p0);
    let tr_p0 = p0.trace();

    let mut lag = RotorLagState::new(RotorSpeeds::uniform(omega_hover), cfg.rotor.tau_rot);
    let mut bat = cfg.battery.map(|b| BatteryState::at_rest(cfg.initial_soc, &b));
    let mut detector = cfg.detector.map(|d| (d, DetectorState::new(&d)));

    // fixed measurement blocks
    let aiding_kinds = [MeasurementKind::Attitude, MeasurementKind::BodyRates];
    let frozen_gain = |c: &DMatrix<f64>, v: &DMatrix<f64>| -> Result<DMatrix<f64>> {
        let p_ss = DMatrix::from_column_slice(12, 12, design.gains.p_ss.as_slice());
        let s = c * &p_ss * c.transpose() + v;
        let s_inv = s.try_inverse().ok_or(Error::SingularInnovation)?;
        Ok(p_ss * c.transpose() * s_inv)
    };

    let mut acc = metrics::Accumulator::new(steps, tr_p0);
    let mut trace = SimTrace::default();
    let mut diverged_at = None;

    for k in 0..steps {
        let t = (k + 1) as f64 * dt;
        // control from the current estimate
        let u_lqr_vec = u_e - k_gain * fs.x_hat;
        let u_lqr = ControlInput::from_vector(&u_lqr_vec);

        // allocation, clamp, battery derating, rotor lag
        let alloc = allocate_nnls(&u_lqr, &mixer)?;
        let saturated = limits.is_saturated(&alloc.speeds);
        let realized = mixer * alloc.squared;
        let unrealizable = (realized - u_lqr_vec).norm() > 1e-9 * u_lqr_vec.norm().max(1.0);
        let omega_in = clamp_speeds(&alloc.speeds, &limits);
        let p_elec = electrical_power(&omega_in, cfg.battery.as_ref().unwrap_or(&BatteryParams::default()), &p);
        let omega_cmd = match (&mut bat, &cfg.battery) {
            (Some(bs), Some(bp)) => {
                let cmd = sag_scaled_command(&omega_in, bs, bp);
                *bs = dae_step(bs, p_elec, bp, dt)?;
                cmd
            }
            _ => omega_in,
        };
        lag.step(&omega_cmd, dt);
        let u_out = applied_wrench(&lag.omega_out, &mixer);

        // plant with disturbance
        let (lin_dist, ang_dist) = match cfg.disturbance.model {
            DisturbanceModel::Force => {
                let s = cfg.disturbance.scale / dt.sqrt();
                (
                    gaussian3(&mut rng.process, noise_cfg.sigma_f * s),
                    gaussian3(&mut rng.process, noise_cfg.sigma_omega * s),
                )
            }
            DisturbanceModel::Additive => {
                // drawn later as state increments; keep stream usage identical
                (gaussian3(&mut rng.process, 1.0), gaussian3(&mut rng.process, 1.0))
            }
        };
        let additive_extra = (gaussian3(&mut rng.process, 1.0), gaussian3(&mut rng.process, 1.0));
        let field = |xv: &Vec12, u: &ControlInput| -> Result<Vec12> {
            let mut d = dynamics(&StateVector::from_vector(xv), u, &p)?.to_vector();
            if cfg.disturbance.model == DisturbanceModel::Force {
                for i in 0..3 {
                    d[3 + i] += lin_dist[i];
                    d[9 + i] += ang_dist[i];
                }
            }
            Ok(d)
        };
        let step_result = rk4_step(field, &x, &u_out, dt);
        let mut x_next = match step_result {
            Ok(v) => v,
            Err(_) => {
                diverged_at = Some(t);
                break;
            }
        };
        let mut imu_dist = Vec3::zeros();
        match cfg.disturbance.model {
            DisturbanceModel::Force => imu_dist = lin_dist,
            DisturbanceModel::Additive => {
                let s = cfg.disturbance.scale;
                let wd = process_covariance(&noise_cfg, dt);
                for i in 0..3 {
                    x_next[i] += s * wd[(i, i)].sqrt() * additive_extra.0[i];
                    x_next[3 + i] += s * wd[(3 + i, 3 + i)].sqrt() * lin_dist[i];
                    x_next[6 + i] += s * wd[(6 + i, 6 + i)].sqrt() * additive_extra.1[i];
                    x_next[9 + i] += s * wd[(9 + i, 9 + i)].sqrt() * ang_dist[i];
                    imu_dist[i] = s * wd[(3 + i, 3 + i)].sqrt() * lin_dist[i] / dt;
                }
            }
        }
        x_next[8] = wrap_angle(x_next[8]);
        x = x_next;
        if diverged(&x) {
            diverged_at = Some(t);
            break;
        }

        // sensing; every stream is consumed each step so paired runs share realizations
        let sn = cfg.sensor_noise_scale;
        let f_meas = Vec3::new(0.0, 0.0, u_out.thrust / p.mass)
            + imu_dist
            + gaussian3(&mut rng.imu, sn * noise_cfg.sigma_f / dt.sqrt());
        let gnss = gaussian3(&mut rng.sensors, sn * noise_cfg.sigma_gnss);
        let att_noise = gaussian3(&mut rng.sensors, sn * noise_cfg.sigma_eta);
        let gyro_noise = gaussian3(&mut rng.sensors, sn * noise_cfg.sigma_gyro);

        // prediction
        let u_pred = match est.prediction_input {
            PredictionInput::Applied => u_out.to_vector(),
            PredictionInput::Commanded => u_lqr_vec,
            PredictionInput::Imu => {
                let sent = applied_wrench(&omega_cmd, &mixer).to_vector();
                Vec4::new(p.mass * f_meas.z, sent[1], sent[2], sent[3])
            }
        };
        fs = kf_predict(&fs, &(u_pred - u_e), &design.ad, &design.bd, &design.wd);
        if est.prediction_input == PredictionInput::Imu {
            fs.x_hat[3] += f_meas.x * dt;
            fs.x_hat[4] += f_meas.y * dt;
        }
        fs.x_hat[8] = wrap_angle(fs.x_hat[8]);

        // scheduled corrections
        let pos_tick = (k + 1) % period == 0;
        let mut kinds: Vec<MeasurementKind> = Vec::new();
        if pos_tick {
            kinds.push(MeasurementKind::Position);
        }
        let aid_now = match est.aiding {
            AttitudeAiding::EveryStep => true,
            AttitudeAiding::WithPosition => pos_tick,
            AttitudeAiding::Off => false,
        };
        if aid_now {
            kinds.extend_from_slice(&aiding_kinds);
        }
        let trp_before = fs.trace();
        if !kinds.is_empty() {
            let c = measurement_matrix(&kinds)?;
            let v = measurement_covariance(&kinds, &noise_cfg)?;
            let rows = kinds_rows(&kinds);
            let mut innov = DVector::zeros(rows.len());
            for (j, kind) in kinds.iter().enumerate() {
                let (truth_blk, noise_blk) = match kind {
                    MeasurementKind::Position => (x.fixed_rows::<3>(0).into_owned(), gnss),
                    MeasurementKind::Attitude => (x.fixed_rows::<3>(6).into_owned(), att_noise),
                    MeasurementKind::BodyRates => (x.fixed_rows::<3>(9).into_owned(), gyro_noise),
                    MeasurementKind::Velocity => unreachable!("velocity rows only come from the detector"),
                };
                for i in 0..3 {
                    innov[3 * j + i] = truth_blk[i] + noise_blk[i] - fs.x_hat[kind.offset() + i];
                }
                if *kind == MeasurementKind::Attitude {
                    innov[3 * j + 2] = wrap_angle(innov[3 * j + 2]);
                }
            }
            fs = match est.gain_mode {
                GainMode::TimeVarying => kf_update_innovation(&fs, &innov, &c, &v)?,
                GainMode::Frozen => {
                    let gain = frozen_gain(&c, &v)?;
                    apply_gain(&fs, &gain, &innov, &c, &v)
                }
            };
            fs.x_hat[8] = wrap_angle(fs.x_hat[8]);
        }

        // stationarity detection and zero-velocity update
        let mut zupt_applied = false;
        if let Some((dcfg, ds)) = detector.as_mut() {
            let v_hat = fs.x_hat.fixed_rows::<3>(3).into_owned();
            let eta_hat = fs.x_hat.fixed_rows::<3>(6).into_owned();
            ds.step(&f_meas, &v_hat, &eta_hat, p.gravity, dcfg);
            if ds.take_update(dcfg) {
                let (y, c, v) = zupt_measurement(dcfg);
                let innov = &y - DVector::from_column_slice(v_hat.as_slice());
                fs = match est.gain_mode {
                    GainMode::TimeVarying => kf_update_innovation(&fs, &innov, &c, &v)?,
                    GainMode::Frozen => {
                        let gain = frozen_gain(&c, &v)?;
                        apply_gain(&fs, &gain, &innov, &c, &v)
                    }
                };
                zupt_applied = true;
            }
        }

        // metrics
        let bstate = bat.unwrap_or(BatteryState {
            soc: cfg.initial_soc,
            v1: 0.0,
            v_term: cfg.battery.map(|b| b.v_nom).unwrap_or(BatteryParams::default().v_nom),
            i_draw: 0.0,
            p_elec,
        });
        let i_draw = if bat.is_some() { bstate.i_draw } else { p_elec / bstate.v_term };
        let err = deviation(&x) - fs.x_hat;
        let mut err = err;
        err[8] = wrap_angle(err[8]);
        acc.push(
            metrics::StepSample {
                saturated,
                unrealizable,
                u_lqr: u_lqr_vec,
                tr_p: fs.trace(),
                tr_p_before_update: trp_before,
                estimate_error: err,
                p_elec,
                i_draw,
                updated: pos_tick || aid_now || zupt_applied,
                zupt: zupt_applied,
                pos_update: pos_tick,
            },
            &u_e,
            &design.tolerances,
        );

        if k % cfg.log_every == 0 || k + 1 == steps {
            trace.records.push(TraceRecord {
                t,
                x,
                x_hat: fs.x_hat,
                tr_p: fs.trace(),
                u_lqr: u_lqr_vec,
                omega_des: alloc.speeds.0,
                omega_in: omega_in.0,
                omega_cmd: omega_cmd.0,
                omega_out: lag.omega_out.0,
                u_out: u_out.to_vector(),
                zupt: zupt_applied,
                pos_update: pos_tick,
                soc: bstate.soc,
                v_term: bstate.v_term,
                i_draw,
                p_elec,
            });
        }
    }

    let mut report = acc.finish(&x, diverged_at, dt);
    if let Some((_, ds)) = &detector {
        report.zupt_detections = ds.detections;
        report.zupt_applied = ds.applied;
    }
    if let Some(bp) = &cfg.battery {
        if report.power_avg > 0.0 && !report.diverged {
            let e = endurance(PowerProfile::Constant(report.power_avg), bp, 1.0, cfg.endurance_dt, 600.0)?;
            report.t_safe_min = e.minutes_to_floor;
            report.eta_eff = e.eta_eff;
        }
        if let Some(bs) = &bat {
            report.final_soc = Some(bs.soc);
        }
    }
    Ok((trace, report))
}
