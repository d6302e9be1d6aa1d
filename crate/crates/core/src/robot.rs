//! Kinematics of the type (2,0) robot: pose, frame transforms, wheel
//! mapping, and the local-frame tracking-error dynamics.

use crate::error::{Result, WmrError};
use crate::scalar::{wrap_angle, Real};
use nalgebra::{Matrix3, Vector2, Vector3};

/// Robot configuration (x, y, theta). Heading is stored unnormalized so that
/// traces stay smooth; comparisons use the wrapped difference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    pub x: T,
    pub y: T,
    pub theta: T,
}

impl<T: Real> Pose<T> {
    pub fn new(x: T, y: T, theta: T) -> Self {
        Self { x, y, theta }
    }
}

/// Velocity command (v, omega).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand<T: Real> {
    pub v: T,
    pub omega: T,
}

impl<T: Real> VelocityCommand<T> {
    pub fn new(v: T, omega: T) -> Self {
        Self { v, omega }
    }
}

/// Local-frame tracking error (e_x, e_y, e_theta).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError<T: Real> {
    pub e_x: T,
    pub e_y: T,
    pub e_theta: T,
}

impl<T: Real> TrackingError<T> {
    pub fn new(e_x: T, e_y: T, e_theta: T) -> Self {
        Self { e_x, e_y, e_theta }
    }

    pub fn as_vector(&self) -> Vector3<T> {
        Vector3::new(self.e_x, self.e_y, self.e_theta)
    }

    pub fn norm(&self) -> T {
        self.as_vector().norm()
    }
}

/// Wheel radius and half axle width, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelGeometry<T: Real> {
    pub wheel_radius: T,
    pub half_width: T,
}

impl<T: Real> WheelGeometry<T> {
    pub fn new(wheel_radius: T, half_width: T) -> Result<Self> {
        if wheel_radius <= T::zero() {
            return Err(WmrError::InvalidSpec("wheel radius must be positive".into()));
        }
        if half_width <= T::zero() {
            return Err(WmrError::InvalidSpec("half axle width must be positive".into()));
        }
        Ok(Self {
            wheel_radius,
            half_width,
        })
    }
}

/// Rotation mapping reference-frame displacements into the local frame.
pub fn rotation_matrix<T: Real>(theta: T) -> Matrix3<T> {
    let (s, c) = (theta.sin(), theta.cos());
    Matrix3::new(
        c, s, T::zero(),
        -s, c, T::zero(),
        T::zero(), T::zero(), T::one(),
    )
}

/// Local-frame tracking error between the reference pose and the current
/// pose; the angular component is wrapped to (-pi, pi].
pub fn tracking_error<T: Real>(reference: &Pose<T>, current: &Pose<T>) -> TrackingError<T> {
    let (s, c) = (current.theta.sin(), current.theta.cos());
    let dx = reference.x - current.x;
    let dy = reference.y - current.y;
    TrackingError::new(
        c * dx + s * dy,
        -s * dx + c * dy,
        wrap_angle(reference.theta - current.theta),
    )
}

/// Invert [`tracking_error`]: the pose that exhibits error `e` against the
/// given reference pose.
pub fn pose_from_error<T: Real>(reference: &Pose<T>, e: &TrackingError<T>) -> Pose<T> {
    let theta = reference.theta - e.e_theta;
    let (s, c) = (theta.sin(), theta.cos());
    // [dx, dy] = R(theta)^T [e_x, e_y]
    Pose::new(
        reference.x - (c * e.e_x - s * e.e_y),
        reference.y - (s * e.e_x + c * e.e_y),
        theta,
    )
}

/// Unicycle kinematics: (v cos theta, v sin theta, omega).
pub fn plant_derivative<T: Real>(pose: &Pose<T>, cmd: &VelocityCommand<T>) -> Vector3<T> {
    Vector3::new(
        cmd.v * pose.theta.cos(),
        cmd.v * pose.theta.sin(),
        cmd.omega,
    )
}

/// Local-frame error dynamics under reference velocities `reference` and
/// applied command `cmd`.
pub fn error_dynamics<T: Real>(
    e: &TrackingError<T>,
    reference: &VelocityCommand<T>,
    cmd: &VelocityCommand<T>,
) -> Vector3<T> {
    Vector3::new(
        cmd.omega * e.e_y - cmd.v + reference.v * e.e_theta.cos(),
        -cmd.omega * e.e_x + reference.v * e.e_theta.sin(),
        reference.omega - cmd.omega,
    )
}

/// Forward wheel mapping: command to (right, left) wheel rates in rad/s.
pub fn wheel_speeds<T: Real>(cmd: &VelocityCommand<T>, geom: &WheelGeometry<T>) -> Vector2<T> {
    let v_r = cmd.v + geom.half_width * cmd.omega;
    let v_l = cmd.v - geom.half_width * cmd.omega;
    Vector2::new(v_r / geom.wheel_radius, v_l / geom.wheel_radius)
}

/// Inverse wheel mapping: (right, left) wheel rates back to a command.
pub fn command_from_wheels<T: Real>(
    wheels: &Vector2<T>,
    geom: &WheelGeometry<T>,
) -> VelocityCommand<T> {
    let v_r = wheels.x * geom.wheel_radius;
    let v_l = wheels.y * geom.wheel_radius;
    let half = T::of(0.5);
    VelocityCommand::new(
        half * (v_l + v_r),
        (v_r - v_l) / (T::of(2.0) * geom.half_width),
    )
}
