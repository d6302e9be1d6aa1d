//! Gain-scheduled pole-placement baseline controller.
//!
//! The error dynamics are linearized about zero error; gains are recomputed
//! every step from the instantaneous reference velocities so that the
//! closed-loop characteristic polynomial stays at
//! `(s + 2 zeta wn)(s^2 + 2 zeta wn s + wn^2)` with
//! `wn^2 = omega_R^2 + g v_R^2`.

use crate::error::{Result, WmrError};
use crate::robot::{TrackingError, VelocityCommand};
use crate::scalar::Real;
use nalgebra::{Matrix3, Matrix3x2, Matrix3x6, Matrix2x3};

/// Damping ratio and gain parameter of the baseline controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicParams<T: Real> {
    pub zeta: T,
    pub g: T,
}

impl<T: Real> ClassicParams<T> {
    pub fn new(zeta: T, g: T) -> Result<Self> {
        if zeta <= T::zero() || zeta >= T::one() {
            return Err(WmrError::InvalidSpec(
                "damping ratio must satisfy 0 < zeta < 1".into(),
            ));
        }
        if g <= T::zero() {
            return Err(WmrError::InvalidSpec("gain parameter g must be positive".into()));
        }
        Ok(Self { zeta, g })
    }
}

impl<T: Real> Default for ClassicParams<T> {
    fn default() -> Self {
        Self {
            zeta: T::of(0.6),
            g: T::of(0.1),
        }
    }
}

/// Linearization of the error dynamics about zero error.
pub fn linearized_matrices<T: Real>(v_r: T, omega_r: T) -> (Matrix3<T>, Matrix3x2<T>) {
    let z = T::zero();
    let a = Matrix3::new(
        z, omega_r, z,
        -omega_r, z, v_r,
        z, z, z,
    );
    let b = Matrix3x2::new(
        -T::one(), z,
        z, z,
        z, -T::one(),
    );
    (a, b)
}

/// Controllability matrix `[B, AB, A^2 B]` and its numerical rank.
pub fn controllability_matrix<T: Real>(
    a: &Matrix3<T>,
    b: &Matrix3x2<T>,
) -> (Matrix3x6<T>, usize) {
    let ab = a * b;
    let a2b = a * ab;
    let mut ctrb = Matrix3x6::zeros();
    ctrb.fixed_view_mut::<3, 2>(0, 0).copy_from(b);
    ctrb.fixed_view_mut::<3, 2>(0, 2).copy_from(&ab);
    ctrb.fixed_view_mut::<3, 2>(0, 4).copy_from(&a2b);
    let svd = ctrb.svd(false, false);
    let sigma_max = svd.singular_values.max();
    let tol = T::of(1e-10) * sigma_max;
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > tol)
        .count();
    (ctrb, rank)
}

/// Scheduled feedback gains `(k1, k2, k3)` for the current reference
/// velocities. `k2 = g |v_R|` keeps the gain finite as `v_R` approaches zero.
pub fn classic_gains<T: Real>(v_r: T, omega_r: T, params: &ClassicParams<T>) -> (T, T, T) {
    let wn = (omega_r * omega_r + params.g * v_r * v_r).sqrt();
    let k13 = T::of(2.0) * params.zeta * wn;
    let k2 = params.g * v_r.abs();
    (k13, k2, k13)
}

/// Feedback gain matrix so the closed loop is `A + B K`.
pub fn gain_matrix<T: Real>(v_r: T, omega_r: T, params: &ClassicParams<T>) -> Matrix2x3<T> {
    let (k1, k2, k3) = classic_gains(v_r, omega_r, params);
    let sign = if v_r < T::zero() { -T::one() } else { T::one() };
    let z = T::zero();
    Matrix2x3::new(
        k1, z, z,
        z, sign * k2, k3,
    )
}

/// Total command: feedforward `(v_R cos e_theta, omega_R)` plus scheduled
/// feedback.
pub fn classic_control<T: Real>(
    e: &TrackingError<T>,
    reference: &VelocityCommand<T>,
    params: &ClassicParams<T>,
) -> VelocityCommand<T> {
    let (k1, k2, k3) = classic_gains(reference.v, reference.omega, params);
    let sign = if reference.v < T::zero() { -T::one() } else { T::one() };
    VelocityCommand::new(
        reference.v * e.e_theta.cos() + k1 * e.e_x,
        reference.omega + sign * k2 * e.e_y + k3 * e.e_theta,
    )
}

/// Roots of the target polynomial `(s + 2 zeta wn)(s^2 + 2 zeta wn s + wn^2)`.
pub fn target_poles<T: Real>(
    v_r: T,
    omega_r: T,
    params: &ClassicParams<T>,
) -> [nalgebra::Complex<T>; 3] {
    use nalgebra::Complex;
    let wn = (omega_r * omega_r + params.g * v_r * v_r).sqrt();
    let real = Complex::new(-T::of(2.0) * params.zeta * wn, T::zero());
    let disc = params.zeta * params.zeta - T::one();
    // zeta < 1: complex pair -zeta wn +- i wn sqrt(1 - zeta^2).
    let im = wn * (-disc).sqrt();
    [
        real,
        Complex::new(-params.zeta * wn, im),
        Complex::new(-params.zeta * wn, -im),
    ]
}
