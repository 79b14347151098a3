//! Continuous algebraic Riccati and Lyapunov solvers, LQR/Kalman gain synthesis and Bryson weighting.

use alloc::vec::Vec;

use nalgebra::{Complex, DMatrix};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{Mat12, Mat12x4, Mat4, Mat4x12};
use crate::vehicle::VehicleParams;

const SIGN_MAX_ITER: usize = 100;
const NEWTON_MAX_ITER: usize = 30;

/// Stabilizing solution of `A'X + XA - X B R^-1 B' X + Q = 0`.
///
/// The Hamiltonian matrix sign function gives the stable invariant subspace,
/// then Newton-Kleinman iterations polish the result.
pub fn solve_care(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || q.shape() != (n, n) || r.shape() != (b.ncols(), b.ncols()) {
        return Err(Error::InvalidConfig("Riccati operands have inconsistent shapes"));
    }
    let r_inv = r.clone().cholesky().ok_or(Error::InvalidConfig("input weight must be positive definite"))?.inverse();
    let g = b * &r_inv * b.transpose();

    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(a);
    h.view_mut((0, n), (n, n)).copy_from(&(-&g));
    h.view_mut((n, 0), (n, n)).copy_from(&(-q));
    h.view_mut((n, n), (n, n)).copy_from(&(-a.transpose()));

    let sign = matrix_sign(h)?;
    let mut lhs = DMatrix::zeros(2 * n, n);
    lhs.view_mut((0, 0), (n, n)).copy_from(&sign.view((0, n), (n, n)));
    lhs.view_mut((n, 0), (n, n)).copy_from(&(sign.view((n, n), (n, n)) + DMatrix::identity(n, n)));
    let mut rhs = DMatrix::zeros(2 * n, n);
    rhs.view_mut((0, 0), (n, n)).copy_from(&(-(sign.view((0, 0), (n, n)) + DMatrix::identity(n, n))));
    rhs.view_mut((n, 0), (n, n)).copy_from(&(-sign.view((n, 0), (n, n))));
    let x = lhs.svd(true, true).solve(&rhs, 1e-14).map_err(|_| Error::NotStabilizable)?;
    let mut x = (&x + x.transpose()) * 0.5;

    let mut best = care_residual(a, b, q, r, &x);
    for _ in 0..NEWTON_MAX_ITER {
        if best < 1e-14 {
            break;
        }
        let k = &r_inv * b.transpose() * &x;
        let ac = a - b * &k;
        let qk = q + k.transpose() * r * &k;
        let next = match solve_lyapunov(&ac.transpose(), &qk) {
            Ok(next) => next,
            Err(_) => break,
        };
        let res = care_residual(a, b, q, r, &next);
        if !(res < best) {
            break;
        }
        x = next;
        best = res;
    }

    if !x.iter().all(|v| v.is_finite()) || best > 1e-8 {
        return Err(Error::NotStabilizable);
    }
    let scale = x.norm().max(1.0);
    let min_eig = x.clone().symmetric_eigenvalues().min();
    let closed = a - b * &r_inv * b.transpose() * &x;
    if min_eig < -1e-9 * scale || max_real_eigenvalue(&closed) >= 0.0 {
        return Err(Error::NotStabilizable);
    }
    Ok(x)
}

fn matrix_sign(mut z: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = z.nrows() as f64;
    for _ in 0..SIGN_MAX_ITER {
        let lu = z.clone().lu();
        let log_det: f64 = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum();
        let inv = lu.try_inverse().ok_or(Error::NotStabilizable)?;
        let c = (log_det / dim).exp();
        if !c.is_finite() || c == 0.0 {
            return Err(Error::NotStabilizable);
        }
        let next = (&z / c + inv * c) * 0.5;
        let change = (&next - &z).norm();
        let size = next.norm();
        z = next;
        if change <= 1e-13 * size {
            return Ok(z);
        }
    }
    Err(Error::NotStabilizable)
}

/// Solves `A X + X A' + Q = 0` by a Kronecker-product linear solve.
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let op = eye.kronecker(a) + a.kronecker(&eye);
    let rhs = -DMatrix::from_column_slice(n * n, 1, q.as_slice());
    let sol = op.lu().solve(&rhs).ok_or(Error::NotStabilizable)?;
    let x = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&x + x.transpose()) * 0.5)
}

/// `||A'X + XA - X B R^-1 B' X + Q||_F / ||X||_F`.
pub fn care_residual(a: &DMatrix<f64>, b: &DMatrix<f64>, q: &DMatrix<f64>, r: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    let r_inv = match r.clone().try_inverse() {
        Some(ri) => ri,
        None => return f64::INFINITY,
    };
    let res = a.transpose() * x + x * a - x * b * r_inv * b.transpose() * x + q;
    res.norm() / x.norm().max(f64::MIN_POSITIVE)
}

/// `K = R^-1 B' S`.
pub fn lqr_gain(s: &DMatrix<f64>, b: &DMatrix<f64>, r: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r_inv = r.clone().try_inverse().ok_or(Error::InvalidConfig("input weight is singular"))?;
    Ok(r_inv * b.transpose() * s)
}

/// Steady-state estimator gain `L = P C' V^-1` from the dual Riccati equation.
pub fn kalman_gain(
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = solve_care(&a.transpose(), &c.transpose(), w, v).map_err(|e| match e {
        Error::NotStabilizable => Error::NotDetectable,
        other => other,
    })?;
    let v_inv = v.clone().try_inverse().ok_or(Error::InvalidConfig("measurement covariance is singular"))?;
    Ok((&p * c.transpose() * v_inv, p))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().cloned().collect()
}

pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    eigenvalues(m).iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn is_hurwitz(m: &DMatrix<f64>) -> bool {
    max_real_eigenvalue(m) < 0.0
}

/// Largest acceptable excursion of each state and input channel.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tolerances {
    pub position: f64,
    pub velocity: f64,
    pub attitude: f64,
    pub body_rate: f64,
    pub thrust: f64,
    pub roll_torque: f64,
    pub pitch_torque: f64,
    pub yaw_torque: f64,
}

impl Tolerances {
    /// Hover tuning: 0.1 m, 0.2 m/s, 0.1 rad, 1 rad/s, half the weight, 0.3/0.3/0.1 N m.
    pub fn hover(p: &VehicleParams) -> Self {
        Tolerances {
            position: 0.1,
            velocity: 0.2,
            attitude: 0.1,
            body_rate: 1.0,
            thrust: p.weight() / 2.0,
            roll_torque: 0.3,
            pitch_torque: 0.3,
            yaw_torque: 0.1,
        }
    }

    pub fn input(&self) -> [f64; 4] {
        [self.thrust, self.roll_torque, self.pitch_torque, self.yaw_torque]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub q: Mat12,
    pub r: Mat4,
}

/// Inverse-square weighting of the tolerances.
pub fn bryson_weights(t: &Tolerances) -> Result<CostWeights> {
    let states = [t.position, t.velocity, t.attitude, t.body_rate];
    let inputs = t.input();
    if !states.iter().chain(inputs.iter()).all(|v| v.is_finite() && *v != 0.0) {
        return Err(Error::InvalidConfig("tolerances must be finite and nonzero"));
    }
    let mut q = Mat12::zeros();
    for (blk, tol) in states.iter().enumerate() {
        for i in 0..3 {
            q[(3 * blk + i, 3 * blk + i)] = 1.0 / (tol * tol);
        }
    }
    let r = Mat4::from_diagonal(&inputs.map(|u| 1.0 / (u * u)).into());
    Ok(CostWeights { q, r })
}

/// Steady-state LQG gains with their Riccati solutions.
#[derive(Debug, Clone, PartialEq)]
pub struct GainSet {
    pub k: Mat4x12,
    pub l: DMatrix<f64>,
    pub s: Mat12,
    pub p_ss: Mat12,
}

impl GainSet {
    pub fn synthesize(
        a: &Mat12,
        b: &Mat12x4,
        weights: &CostWeights,
        c: &DMatrix<f64>,
        w: &Mat12,
        v: &DMatrix<f64>,
    ) -> Result<Self> {
        let ad = to_dyn(a);
        let bd = DMatrix::from_column_slice(12, 4, b.as_slice());
        let rd = DMatrix::from_column_slice(4, 4, weights.r.as_slice());
        let s = solve_care(&ad, &bd, &to_dyn(&weights.q), &rd)?;
        let k = lqr_gain(&s, &bd, &rd)?;
        let (l, p) = kalman_gain(&ad, c, &to_dyn(w), v)?;
        Ok(GainSet {
            k: Mat4x12::from_column_slice(k.as_slice()),
            l,
            s: Mat12::from_column_slice(s.as_slice()),
            p_ss: Mat12::from_column_slice(p.as_slice()),
        })
    }
}

pub(crate) fn to_dyn(m: &Mat12) -> DMatrix<f64> {
    DMatrix::from_column_slice(12, 12, m.as_slice())
}

/// Spectra of the controller, the estimator and the augmented error system.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparationReport {
    pub controller: Vec<Complex<f64>>,
    pub estimator: Vec<Complex<f64>>,
    pub augmented: Vec<Complex<f64>>,
    /// Largest distance from an augmented eigenvalue to its matched partner in the union.
    pub max_mismatch: f64,
    pub stable: bool,
}

/// Builds `[[A - BK, BK], [0, A - LC]]` and compares its spectrum with the two blocks'.
pub fn separation_check(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    l: &DMatrix<f64>,
) -> SeparationReport {
    let n = a.nrows();
    let ctrl = a - b * k;
    let est = a - l * c;
    let mut aug = DMatrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&ctrl);
    aug.view_mut((0, n), (n, n)).copy_from(&(b * k));
    aug.view_mut((n, n), (n, n)).copy_from(&est);

    let controller = eigenvalues(&ctrl);
    let estimator = eigenvalues(&est);
    let augmented = eigenvalues(&aug);
    let mut pool: Vec<Complex<f64>> = controller.iter().chain(estimator.iter()).cloned().collect();
    let mut max_mismatch: f64 = 0.0;
    for e in &augmented {
        let (idx, dist) = pool
            .iter()
            .enumerate()
            .map(|(i, p)| (i, (p - e).norm_sqr().sqrt()))
            .fold((usize::MAX, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if idx == usize::MAX {
            max_mismatch = f64::INFINITY;
            break;
        }
        pool.swap_remove(idx);
        max_mismatch = max_mismatch.max(dist);
    }
    let stable = augmented.iter().all(|e| e.re < 0.0);
    SeparationReport { controller, estimator, augmented, max_mismatch, stable }
}
