//! Frame-free linear algebra and integration helpers.

use nalgebra::{DMatrix, Matrix3, Matrix4, SMatrix, SVector, Vector3, Vector4};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Vec4 = Vector4<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;
pub type Vec12 = SVector<f64, 12>;
pub type Mat12 = SMatrix<f64, 12, 12>;
pub type Mat12x4 = SMatrix<f64, 12, 4>;
pub type Mat4x12 = SMatrix<f64, 4, 12>;

/// Relative singular-value threshold used by [`rank_svd`] when no other is given.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Cross-product matrix: `skew(v) * w == v x w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// One classical Runge-Kutta step with the input held constant over `dt`.
pub fn rk4_step<const N: usize, U, F>(mut f: F, x: &SVector<f64, N>, u: &U, dt: f64) -> Result<SVector<f64, N>>
where
    F: FnMut(&SVector<f64, N>, &U) -> Result<SVector<f64, N>>,
{
    let half = 0.5 * dt;
    let k1 = f(x, u)?;
    let k2 = f(&(x + k1 * half), u)?;
    let k3 = f(&(x + k2 * half), u)?;
    let k4 = f(&(x + k3 * dt), u)?;
    let next = x + (k1 + (k2 + k3) * 2.0 + k4) * (dt / 6.0);
    if next.iter().all(|v| v.is_finite()) {
        Ok(next)
    } else {
        Err(Error::NonFiniteState)
    }
}

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn rank_svd(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let max = sv.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

pub(crate) fn all_finite<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub(crate) fn symmetrize<const N: usize>(m: &SMatrix<f64, N, N>) -> SMatrix<f64, N, N> {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn skew_zero_and_unit_z() {
        assert_eq!(skew(&Vec3::zeros()), Mat3::zeros());
        let s = skew(&Vec3::z());
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(s, expected);
    }

    proptest! {
        #[test]
        fn skew_matches_cross_product(
            a in prop::array::uniform3(-10.0f64..10.0),
            b in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let v = Vec3::from(a);
            let w = Vec3::from(b);
            // componentwise cross product written out
            let cross = Vec3::new(v.y * w.z - v.z * w.y, v.z * w.x - v.x * w.z, v.x * w.y - v.y * w.x);
            prop_assert!((skew(&v) * w - cross).norm() < 1e-12);
            prop_assert_eq!(skew(&v).transpose(), -skew(&v));
        }

        #[test]
        fn rank_invariant_under_row_operations(seed in 0u64..500, rank in 1usize..6) {
            // a 6x8 matrix of known rank built from random factors
            let mut rng = TestRng::new(seed);
            let left = DMatrix::from_fn(6, rank, |_, _| rng.next());
            let right = DMatrix::from_fn(rank, 8, |_, _| rng.next());
            let m = &left * &right;
            let r0 = rank_svd(&m, DEFAULT_RANK_TOL);
            prop_assert_eq!(r0, rank);

            let mut permuted = m.clone();
            permuted.swap_rows(0, 5);
            permuted.swap_rows(1, 3);
            prop_assert_eq!(rank_svd(&permuted, DEFAULT_RANK_TOL), r0);

            let q = DMatrix::from_fn(6, 6, |_, _| rng.next()).qr().q();
            prop_assert_eq!(rank_svd(&(q * &m), DEFAULT_RANK_TOL), r0);
        }
    }

    struct TestRng(u64);
    impl TestRng {
        fn new(seed: u64) -> Self {
            TestRng(seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407))
        }
        fn next(&mut self) -> f64 {
            self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        }
    }

    fn decay(x: &SVector<f64, 1>, _: &()) -> Result<SVector<f64, 1>> {
        Ok(-x)
    }

    #[test]
    fn rk4_null_field_keeps_state() {
        let x = SVector::<f64, 3>::new(1.0, -2.0, 3.0);
        let next = rk4_step(|_, _: &()| Ok(SVector::<f64, 3>::zeros()), &x, &(), 0.1).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn rk4_exponential_decay_single_step() {
        let x = SVector::<f64, 1>::new(1.0);
        let next = rk4_step(decay, &x, &(), 0.1).unwrap();
        // one step equals the degree-4 Taylor polynomial of exp(-h)
        let h = 0.1f64;
        let taylor = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        assert_abs_diff_eq!(next[0], taylor, epsilon = 1e-15);
        // local truncation error is h^5/120
        let gap = (next[0] - (-h).exp()).abs();
        assert!(gap < h.powi(5) / 120.0 * 1.01 && gap > h.powi(5) / 120.0 * 0.9);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let global_error = |steps: usize| {
            let dt = 1.0 / steps as f64;
            let mut x = SVector::<f64, 1>::new(1.0);
            for _ in 0..steps {
                x = rk4_step(decay, &x, &(), dt).unwrap();
            }
            (x[0] - (-1.0f64).exp()).abs()
        };
        for steps in [5usize, 10, 20] {
            let ratio = global_error(steps) / global_error(2 * steps);
            assert!((ratio - 16.0).abs() < 2.0, "ratio {ratio} at {steps} steps");
        }
    }

    #[test]
    fn rk4_reports_non_finite() {
        let x = SVector::<f64, 1>::new(1.0);
        let blowup = |_: &SVector<f64, 1>, _: &()| Ok(SVector::<f64, 1>::new(f64::INFINITY));
        assert_eq!(rk4_step(blowup, &x, &(), 0.1), Err(Error::NonFiniteState));
    }

    #[test]
    fn rank_of_identity_and_zero() {
        assert_eq!(rank_svd(&DMatrix::identity(12, 12), DEFAULT_RANK_TOL), 12);
        assert_eq!(rank_svd(&DMatrix::zeros(12, 12), DEFAULT_RANK_TOL), 0);
    }
}
