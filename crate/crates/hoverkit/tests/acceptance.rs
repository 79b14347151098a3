//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! By default failing criteria are reported but do not fail the test run; set
//! `HOVERKIT_STRICT_ACCEPTANCE=1` to turn any FAIL into a test failure.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use hoverkit::sweep::{endurance_rows, sweep_gamma, SweepTable, Variants};
use hoverkit_core::actuation::{nnls, nnls_kkt};
use hoverkit_core::battery::{dae_step, electrical_power, endurance, ocv, BatteryParams, BatteryState, PowerProfile};
use hoverkit_core::kalman::{initial_covariance, kf_predict, kf_update, FilterState};
use hoverkit_core::linmodel::{
    discretize, linearize_hover, measurement_covariance, measurement_matrix, observability_rank, process_covariance,
    EquilibriumPoint, MeasurementKind, NoiseConfig,
};
use hoverkit_core::math::{Mat12, Vec12, Vec3, Vec4};
use hoverkit_core::riccati::{bryson_weights, care_residual, is_hurwitz, separation_check, solve_care, Tolerances};
use hoverkit_core::sim::{run_closed_loop, AttitudeAiding, ScenarioConfig};
use hoverkit_core::vehicle::{
    dynamics_vec, hover_rotor_speed, mixer_matrix, rad_per_sec_to_rpm, ControlInput, RotorSpeeds, VehicleParams,
};
use hoverkit_core::zupt::{DetectorConfig, DetectorState};

const GAMMAS: [f64; 5] = [1.0, 0.05, 0.01, 0.005, 0.001];
const SEEDS: u64 = 10;

struct Outcome {
    id: u32,
    pass: bool,
    detail: String,
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

fn c1() -> Outcome {
    let rpm = rad_per_sec_to_rpm(hover_rotor_speed(&VehicleParams::default()));
    Outcome { id: 1, pass: within(rpm, 5921.0, 0.02), detail: format!("hover speed {rpm:.1} rpm (target 5921 +-2%)") }
}

fn c2() -> Outcome {
    let vp = VehicleParams::default();
    let bp = BatteryParams::default();
    let p = electrical_power(&RotorSpeeds::uniform(hover_rotor_speed(&vp)), &bp, &vp);
    let i = p / 14.8;
    Outcome {
        id: 2,
        pass: within(p, 78.55, 0.02) && within(i, 5.31, 0.02),
        detail: format!("hover power {p:.2} W (78.55 +-2%), current {i:.3} A at 14.8 V (5.31 +-2%)"),
    }
}

fn c3() -> Outcome {
    let vp = VehicleParams::default();
    let bp = BatteryParams::default();
    let start = Instant::now();
    let p = electrical_power(&RotorSpeeds::uniform(hover_rotor_speed(&vp)), &bp, &vp);
    let e = endurance(PowerProfile::Constant(p), &bp, 1.0, 0.1, 120.0).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let empty = e.minutes_to_empty.unwrap_or(f64::INFINITY);
    let floor = e.minutes_to_floor.unwrap_or(f64::INFINITY);
    let v1 = ocv(1.0, &bp);
    let v03 = ocv(0.3, &bp);
    let pass = within(empty, 33.6, 0.05)
        && within(floor, 23.5, 0.05)
        && (v1 - 16.8).abs() <= 0.01
        && (v03 - 15.26).abs() <= 0.01
        && elapsed < 5.0;
    Outcome {
        id: 3,
        pass,
        detail: format!(
            "to SoC 0: {empty:.2} min (33.6 +-5%), to SoC 0.3: {floor:.2} min (23.5 +-5%), OCV {v1:.3}/{v03:.3} V, {elapsed:.2} s"
        ),
    }
}

fn c4() -> Outcome {
    let p = VehicleParams::default();
    let (a, _) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
    let rp = observability_rank(&a, &measurement_matrix(&[MeasurementKind::Position]).unwrap());
    let rv = observability_rank(&a, &measurement_matrix(&[MeasurementKind::Velocity]).unwrap());
    Outcome { id: 4, pass: rp == 10 && rv == 7, detail: format!("rank position {rp} (10), velocity {rv} (7)") }
}

fn c5() -> Outcome {
    let p = VehicleParams::default();
    let (a, b) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
    let x0 = Vec12::zeros();
    let u0 = p.hover_input();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for j in 0..12 {
        let mut xp = x0;
        let mut xm = x0;
        xp[j] += h;
        xm[j] -= h;
        let col = (dynamics_vec(&xp, &u0, &p).unwrap() - dynamics_vec(&xm, &u0, &p).unwrap()) / (2.0 * h);
        for i in 0..12 {
            worst = worst.max((col[i] - a[(i, j)]).abs());
        }
    }
    for j in 0..4 {
        let mut up = u0.to_vector();
        let mut um = u0.to_vector();
        up[j] += h;
        um[j] -= h;
        let col = (dynamics_vec(&x0, &ControlInput::from_vector(&up), &p).unwrap()
            - dynamics_vec(&x0, &ControlInput::from_vector(&um), &p).unwrap())
            / (2.0 * h);
        for i in 0..12 {
            worst = worst.max((col[i] - b[(i, j)]).abs());
        }
    }
    Outcome { id: 5, pass: worst < 1e-4, detail: format!("max |finite difference - Jacobian| = {worst:.2e} (< 1e-4)") }
}

fn c6() -> Outcome {
    let p = VehicleParams::default();
    let (a, b) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
    let w8 = bryson_weights(&Tolerances::hover(&p)).unwrap();
    let noise = NoiseConfig::default();
    let dt = 0.001;
    let a = DMatrix::from_column_slice(12, 12, a.as_slice());
    let b = DMatrix::from_column_slice(12, 4, b.as_slice());
    let q = DMatrix::from_column_slice(12, 12, w8.q.as_slice());
    let r = DMatrix::from_column_slice(4, 4, w8.r.as_slice());
    let c = measurement_matrix(&MeasurementKind::ALL).unwrap();
    let w = DMatrix::from_column_slice(12, 12, (process_covariance(&noise, dt) / dt).as_slice());
    let v = measurement_covariance(&MeasurementKind::ALL, &noise).unwrap() * dt;
    let s = solve_care(&a, &b, &q, &r).unwrap();
    let at = a.transpose();
    let ct = c.transpose();
    let pf = solve_care(&at, &ct, &w, &v).unwrap();
    let res_c = care_residual(&a, &b, &q, &r, &s);
    let res_f = care_residual(&at, &ct, &w, &v, &pf);
    let r_inv = r.clone().try_inverse().unwrap();
    let k = &r_inv * b.transpose() * &s;
    let l = &pf * &ct * v.clone().try_inverse().unwrap();
    let ctrl = is_hurwitz(&(&a - &b * &k));
    let est = is_hurwitz(&(&a - &l * &c));
    let sep = separation_check(&a, &b, &c, &k, &l);
    Outcome {
        id: 6,
        pass: res_c < 1e-8 && res_f < 1e-8 && ctrl && est && sep.max_mismatch < 1e-6,
        detail: format!(
            "residuals {res_c:.1e}/{res_f:.1e} (< 1e-8), A-BK Hurwitz {ctrl}, A-LC Hurwitz {est}, spectrum mismatch {:.1e}",
            sep.max_mismatch
        ),
    }
}

fn c7(t: &SweepTable) -> Outcome {
    let c = t.cell(1.0, false).unwrap();
    Outcome {
        id: 7,
        pass: c.err_pos_median < 0.1 && c.err_att_median < 3.0,
        detail: format!(
            "gamma 1, {} seeds: median position error {:.4} m (< 0.1), attitude error {:.3} deg (< 3)",
            c.seeds, c.err_pos_median, c.err_att_median
        ),
    }
}

fn non_decreasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

fn c8(t: &SweepTable) -> Outcome {
    let cells: Vec<_> = GAMMAS[..4].iter().map(|g| t.cell(*g, false).unwrap()).collect();
    let err: Vec<f64> = cells.iter().map(|c| c.err_pos_median).collect();
    let eff: Vec<f64> = cells.iter().map(|c| c.u_tot_median).collect();
    let zeta: Vec<f64> = cells.iter().map(|c| c.zeta_ss_median).collect();
    let div = t.cell(0.001, false).unwrap().diverged_fraction();
    let (a, b, c) = (non_decreasing(&err), non_decreasing(&eff), non_decreasing(&zeta));
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    Outcome {
        id: 8,
        pass: a && b && c && div >= 0.7,
        detail: format!(
            "err [{}] {a}; effort [{}] {b}; zeta [{}] {c}; diverged at 0.001: {:.0}% (>= 70%)",
            fmt(&err),
            fmt(&eff),
            fmt(&zeta),
            100.0 * div
        ),
    }
}

fn c9(t: &SweepTable, secs: f64) -> Outcome {
    let r = t.ratio(0.005).unwrap();
    Outcome {
        id: 9,
        pass: r.err_pos < 0.9 && r.u_tot < 0.9 && r.zeta_ss_mean < 0.95 && secs < 120.0,
        detail: format!(
            "gamma 0.005 aided/unaided: error {:.3} (< 0.9), effort {:.3} (< 0.9), zeta {:.3} (< 0.95); sweep {secs:.1} s",
            r.err_pos, r.u_tot, r.zeta_ss_mean
        ),
    }
}

fn c10(t: &SweepTable) -> Outcome {
    let bat = BatteryParams::default();
    let rows = endurance_rows(t, &[0.05, 0.005], &bat, 0.1).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for row in &rows {
        let red = row.power_reduction_pct.unwrap_or(f64::NAN);
        let gain = row.t_safe_gain_min.unwrap_or(f64::NAN);
        pass &= (2.0..=12.0).contains(&red) && gain > 0.3;
        parts.push(format!("gamma {}: power -{red:.2}% (2-12%), hover time +{gain:.3} min (> 0.3)", row.gamma));
    }
    Outcome { id: 10, pass, detail: parts.join("; ") }
}

fn psd_cycles(n: usize) -> bool {
    let p = VehicleParams::default();
    let (a, b) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
    let noise = NoiseConfig::default();
    let (ad, bd) = discretize(&a, &b, 0.001);
    let wd = process_covariance(&noise, 0.001);
    let aid = [MeasurementKind::Attitude, MeasurementKind::BodyRates];
    let full = [MeasurementKind::Position, MeasurementKind::Attitude, MeasurementKind::BodyRates];
    let (ca, va) = (measurement_matrix(&aid).unwrap(), measurement_covariance(&aid, &noise).unwrap());
    let (cf, vf) = (measurement_matrix(&full).unwrap(), measurement_covariance(&full, &noise).unwrap());
    let mut fs = FilterState::new(Vec12::zeros(), initial_covariance([0.1, 0.1, 0.01, 0.01]));
    for k in 1..=n {
        fs = kf_predict(&fs, &Vec4::zeros(), &ad, &bd, &wd);
        let (c, v) = if k % 200 == 0 { (&cf, &vf) } else { (&ca, &va) };
        fs = kf_update(&fs, &DVector::zeros(c.nrows()), c, v).unwrap();
        let shift = 1e-12 * fs.p.trace();
        if (fs.p + Mat12::identity() * shift).cholesky().is_none() {
            return false;
        }
    }
    true
}

fn sawtooth() -> bool {
    let mut cfg = ScenarioConfig { duration: 3.0, gamma: 0.01, ..ScenarioConfig::default() };
    cfg.estimator.aiding = AttitudeAiding::WithPosition;
    let (_, r) = run_closed_loop(&cfg).unwrap();
    let period = cfg.update_period();
    (1..r.zeta.len()).all(|k| {
        if (k + 1) % period == 0 {
            r.zeta[k] < r.zeta[k - 1]
        } else {
            r.zeta[k] >= r.zeta[k - 1] * (1.0 - 1e-12)
        }
    })
}

fn kkt_cases(n: usize) -> bool {
    let m = mixer_matrix(&VehicleParams::default());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let thrust = Uniform::new(-5.0, 30.0).unwrap();
    let torque = Normal::new(0.0, 0.5).unwrap();
    (0..n).all(|_| {
        let u = Vec4::new(
            thrust.sample(&mut rng),
            torque.sample(&mut rng),
            torque.sample(&mut rng),
            0.1 * torque.sample(&mut rng),
        );
        let x = nnls(&m, &u).unwrap();
        nnls_kkt(&m, &u, &x, 1e-8)
    })
}

fn detector_monotone(trials: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n01 = Normal::new(0.0, 1.0).unwrap();
    let g = 9.81;
    for _ in 0..trials {
        let scale = Uniform::new(0.01, 0.4).unwrap().sample(&mut rng);
        let f: Vec<Vec3> =
            (0..300).map(|_| Vec3::new(0.0, 0.0, g) + Vec3::from_fn(|_, _| scale * n01.sample(&mut rng))).collect();
        let v: Vec<Vec3> = (0..300).map(|_| Vec3::from_fn(|_, _| 0.3 * scale * n01.sample(&mut rng))).collect();
        let base = DetectorConfig { window: 20, delta_f: scale, delta_v: 0.2 * scale, ..DetectorConfig::strict() };
        let wider = DetectorConfig { delta_f: 1.7 * base.delta_f, delta_v: 1.7 * base.delta_v, ..base };
        let run = |cfg: &DetectorConfig| {
            let mut st = DetectorState::new(cfg);
            f.iter().zip(&v).map(|(fi, vi)| st.step(fi, vi, &Vec3::zeros(), g, cfg)).collect::<Vec<bool>>()
        };
        let (a, b) = (run(&base), run(&wider));
        if a.iter().zip(&b).any(|(x, y)| *x && !*y) {
            return false;
        }
    }
    true
}

fn battery_bookkeeping() -> (bool, f64, f64) {
    let p = BatteryParams::default();
    let mut bs = BatteryState::full(&p);
    let dt = 0.05;
    let (mut charge, mut delivered, mut demanded) = (0.0, 0.0, 0.0);
    for k in 0..20_000 {
        let power = 60.0 + 30.0 * (k as f64 * 0.01).sin();
        bs = dae_step(&bs, power, &p, dt).unwrap();
        charge += bs.i_draw * dt;
        delivered += bs.v_term * bs.i_draw * dt;
        demanded += power * dt;
    }
    let coulomb = charge / 3600.0 / p.capacity_ah;
    let e_charge = ((1.0 - bs.soc) - coulomb).abs() / coulomb;
    let e_energy = (delivered - demanded).abs() / demanded;
    (e_charge < 1e-3 && e_energy < 1e-3, e_charge, e_energy)
}

fn c11() -> Outcome {
    let psd = psd_cycles(1_000_000);
    let saw = sawtooth();
    let kkt = kkt_cases(10_000);
    let det = detector_monotone(200);
    let (bat, ec, ee) = battery_bookkeeping();
    Outcome {
        id: 11,
        pass: psd && saw && kkt && det && bat,
        detail: format!(
            "PSD 1e6 cycles {psd}; sawtooth {saw}; NNLS KKT 1e4 {kkt}; detector monotone {det}; battery charge {ec:.1e} energy {ee:.1e} (< 1e-3)"
        ),
    }
}

#[test]
fn acceptance_criteria() {
    let mut out = vec![c1(), c2(), c3(), c4(), c5(), c6()];
    let start = Instant::now();
    let table =
        sweep_gamma(&ScenarioConfig::default(), &GAMMAS, SEEDS, Variants::Both, DetectorConfig::strict()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    out.push(c7(&table));
    out.push(c8(&table));
    out.push(c9(&table, secs));
    out.push(c10(&table));
    out.push(c11());

    println!();
    for o in &out {
        println!("criterion {:>2}: {} | {}", o.id, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let passed = out.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria pass", out.len());
    if std::env::var("HOVERKIT_STRICT_ACCEPTANCE").map(|v| v == "1").unwrap_or(false) {
        assert_eq!(passed, out.len(), "strict acceptance requested");
    }
}
