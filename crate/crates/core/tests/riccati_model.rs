use hoverkit_core::linmodel::{
    linearize_hover, measurement_covariance, measurement_matrix, process_covariance, EquilibriumPoint, MeasurementKind,
    NoiseConfig,
};
use hoverkit_core::riccati::{
    bryson_weights, care_residual, is_hurwitz, separation_check, solve_care, GainSet, Tolerances,
};
use hoverkit_core::vehicle::VehicleParams;
use nalgebra::DMatrix;

struct Model {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    c: DMatrix<f64>,
    w: DMatrix<f64>,
    v: DMatrix<f64>,
}

fn hover_model() -> Model {
    let p = VehicleParams::default();
    let (a, b) = linearize_hover(&p, &EquilibriumPoint::hover(&p, 0.0));
    let weights = bryson_weights(&Tolerances::hover(&p)).unwrap();
    let noise = NoiseConfig::default();
    let dt = 0.001;
    let c = measurement_matrix(&MeasurementKind::ALL).unwrap();
    Model {
        a: DMatrix::from_column_slice(12, 12, a.as_slice()),
        b: DMatrix::from_column_slice(12, 4, b.as_slice()),
        q: DMatrix::from_column_slice(12, 12, weights.q.as_slice()),
        r: DMatrix::from_column_slice(4, 4, weights.r.as_slice()),
        c,
        w: DMatrix::from_column_slice(12, 12, (process_covariance(&noise, dt) / dt).as_slice()),
        v: measurement_covariance(&MeasurementKind::ALL, &noise).unwrap() * dt,
    }
}

#[test]
fn both_riccati_solutions_have_small_residuals() {
    let m = hover_model();
    let s = solve_care(&m.a, &m.b, &m.q, &m.r).unwrap();
    assert!(care_residual(&m.a, &m.b, &m.q, &m.r, &s) < 1e-8);
    let at = m.a.transpose();
    let ct = m.c.transpose();
    let p = solve_care(&at, &ct, &m.w, &m.v).unwrap();
    assert!(care_residual(&at, &ct, &m.w, &m.v, &p) < 1e-8);
}

#[test]
fn closed_loops_are_stable_and_separate() {
    let m = hover_model();
    let a = nalgebra::SMatrix::<f64, 12, 12>::from_column_slice(m.a.as_slice());
    let b = nalgebra::SMatrix::<f64, 12, 4>::from_column_slice(m.b.as_slice());
    let p = VehicleParams::default();
    let weights = bryson_weights(&Tolerances::hover(&p)).unwrap();
    let w = nalgebra::SMatrix::<f64, 12, 12>::from_column_slice(m.w.as_slice());
    let gains = GainSet::synthesize(&a, &b, &weights, &m.c, &w, &m.v).unwrap();
    let k = DMatrix::from_column_slice(4, 12, gains.k.as_slice());
    assert!(is_hurwitz(&(&m.a - &m.b * &k)));
    assert!(is_hurwitz(&(&m.a - &gains.l * &m.c)));
    let rep = separation_check(&m.a, &m.b, &m.c, &k, &gains.l);
    assert!(rep.stable);
    assert_eq!(rep.augmented.len(), 24);
    assert!(rep.max_mismatch < 1e-6, "{}", rep.max_mismatch);
}

#[test]
fn position_only_filter_is_not_detectable() {
    let m = hover_model();
    let c = measurement_matrix(&[MeasurementKind::Velocity]).unwrap();
    let v = DMatrix::identity(3, 3) * 1e-6;
    let at = m.a.transpose();
    assert!(solve_care(&at, &c.transpose(), &m.w, &v).is_err());
}
