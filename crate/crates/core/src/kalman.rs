//! Discrete Kalman filter in deviation coordinates about hover.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math::{symmetrize, Mat12, Mat12x4, Vec12, Vec4};

/// Estimate `x_hat` (deviation from trim), covariance and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub x_hat: Vec12,
    pub p: Mat12,
    pub k: u64,
}

impl FilterState {
    pub fn new(x_hat: Vec12, p: Mat12) -> Self {
        FilterState { x_hat, p, k: 0 }
    }

    pub fn trace(&self) -> f64 {
        self.p.trace()
    }
}

/// Diagonal initial covariance from per-block standard deviations.
pub fn initial_covariance(sigmas: [f64; 4]) -> Mat12 {
    let mut p = Mat12::zeros();
    for (blk, s) in sigmas.iter().enumerate() {
        for i in 0..3 {
            p[(3 * blk + i, 3 * blk + i)] = s * s;
        }
    }
    p
}

/// `x <- Ad x + Bd u`, `P <- Ad P Ad' + Wd`; `u` is the input deviation from trim.
pub fn kf_predict(fs: &FilterState, u: &Vec4, ad: &Mat12, bd: &Mat12x4, wd: &Mat12) -> FilterState {
    FilterState { x_hat: ad * fs.x_hat + bd * u, p: symmetrize(&(ad * fs.p * ad.transpose() + wd)), k: fs.k + 1 }
}

/// Optimal update with measurement `y`.
pub fn kf_update(fs: &FilterState, y: &DVector<f64>, c: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<FilterState> {
    let innovation = y - c * DVector::from_column_slice(fs.x_hat.as_slice());
    kf_update_innovation(fs, &innovation, c, v)
}

/// Optimal update given a precomputed innovation (lets callers wrap angles).
pub fn kf_update_innovation(
    fs: &FilterState,
    innovation: &DVector<f64>,
    c: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<FilterState> {
    let p = DMatrix::from_column_slice(12, 12, fs.p.as_slice());
    let s = c * &p * c.transpose() + v;
    let s_inv = match s.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => s.try_inverse().ok_or(Error::SingularInnovation)?,
    };
    if !s_inv.iter().all(|x| x.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let gain = &p * c.transpose() * s_inv;
    Ok(apply_gain(fs, &gain, innovation, c, v))
}

/// Correction with a caller-supplied gain; the covariance uses the Joseph form,
/// which is valid for any gain.
pub fn apply_gain(
    fs: &FilterState,
    gain: &DMatrix<f64>,
    innovation: &DVector<f64>,
    c: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> FilterState {
    let p = DMatrix::from_column_slice(12, 12, fs.p.as_slice());
    let ikc = DMatrix::<f64>::identity(12, 12) - gain * c;
    let joseph = &ikc * p * ikc.transpose() + gain * v * gain.transpose();
    let dx = gain * innovation;
    FilterState {
        x_hat: fs.x_hat + Vec12::from_column_slice(dx.as_slice()),
        p: symmetrize(&Mat12::from_column_slice(joseph.as_slice())),
        k: fs.k,
    }
}
