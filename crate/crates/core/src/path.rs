//! Cubic Bezier reference paths and the velocity profiles derived from them.
//!
//! The curve parameter `eta` doubles as the normalized time law: a sample at
//! `eta` corresponds to `t = eta * T`. Reference linear velocity is the
//! parametric speed scaled by `1/T`; reference angular velocity is the signed
//! curvature form `(x'y'' - y'x'')/(x'^2 + y'^2) / T`, the unique rate
//! consistent with `theta = atan2(y', x')` and the unicycle kinematics.

use crate::error::{Result, WmrError};
use crate::robot::Pose;
use crate::scalar::Real;
use nalgebra::{Point2, Vector2};

/// Four control points of a cubic Bezier path, in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPolygon<T: Real> {
    pub p0: Point2<T>,
    pub p1: Point2<T>,
    pub p2: Point2<T>,
    pub p3: Point2<T>,
}

impl<T: Real> ControlPolygon<T> {
    /// Build from explicit points. Fails if the endpoints coincide.
    pub fn new(p0: Point2<T>, p1: Point2<T>, p2: Point2<T>, p3: Point2<T>) -> Result<Self> {
        if p0 == p3 {
            return Err(WmrError::InvalidSpec(
                "control polygon endpoints coincide (degenerate path)".into(),
            ));
        }
        Ok(Self { p0, p1, p2, p3 })
    }

    pub fn points(&self) -> [Point2<T>; 4] {
        [self.p0, self.p1, self.p2, self.p3]
    }
}

/// Endpoint-pose parameterization of a path: interior control points are
/// placed along the departure/approach headings at distances `d_i`, `d_f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSpec<T: Real> {
    /// Start pose (x_i, y_i, theta_i).
    pub start: Pose<T>,
    /// End pose (x_f, y_f, theta_f).
    pub end: Pose<T>,
    /// Departure distance, m.
    pub d_i: T,
    /// Approach distance, m.
    pub d_f: T,
    /// Total traversal time, s.
    pub total_time: T,
}

impl<T: Real> PathSpec<T> {
    pub fn validate(&self) -> Result<()> {
        if self.d_i <= T::zero() {
            return Err(WmrError::Domain {
                name: "d_i",
                value: to_f64(self.d_i),
                domain: "(0, inf)",
            });
        }
        if self.d_f <= T::zero() {
            return Err(WmrError::Domain {
                name: "d_f",
                value: to_f64(self.d_f),
                domain: "(0, inf)",
            });
        }
        if self.total_time <= T::zero() {
            return Err(WmrError::Domain {
                name: "T",
                value: to_f64(self.total_time),
                domain: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// One sample of a [`ReferenceTrajectory`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSample<T: Real> {
    pub eta: T,
    /// Time at this sample, `eta * T`.
    pub t: T,
    /// Reference pose; heading unwrapped along the trajectory.
    pub pose: Pose<T>,
    /// Reference linear velocity, m/s.
    pub v: T,
    /// Reference angular velocity, rad/s.
    pub omega: T,
}

/// Uniformly sampled reference over `eta in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory<T: Real> {
    pub samples: Vec<ReferenceSample<T>>,
    pub total_time: T,
}

fn to_f64<T: Real>(x: T) -> f64 {
    num_traits::ToPrimitive::to_f64(&x).unwrap_or(f64::NAN)
}

fn check_eta<T: Real>(eta: T) -> Result<()> {
    if eta < T::zero() || eta > T::one() {
        return Err(WmrError::Domain {
            name: "eta",
            value: to_f64(eta),
            domain: "[0, 1]",
        });
    }
    Ok(())
}

/// Evaluate the cubic Bernstein form at `eta`.
pub fn bezier_point<T: Real>(cp: &ControlPolygon<T>, eta: T) -> Result<Point2<T>> {
    check_eta(eta)?;
    let u = T::one() - eta;
    let three = T::of(3.0);
    let b0 = u * u * u;
    let b1 = three * u * u * eta;
    let b2 = three * u * eta * eta;
    let b3 = eta * eta * eta;
    Ok(Point2::from(
        cp.p0.coords * b0 + cp.p1.coords * b1 + cp.p2.coords * b2 + cp.p3.coords * b3,
    ))
}

/// First and second derivatives of the cubic with respect to `eta`.
pub fn bezier_derivatives<T: Real>(
    cp: &ControlPolygon<T>,
    eta: T,
) -> Result<(Vector2<T>, Vector2<T>)> {
    check_eta(eta)?;
    let u = T::one() - eta;
    let three = T::of(3.0);
    let six = T::of(6.0);
    let d01 = cp.p1 - cp.p0;
    let d12 = cp.p2 - cp.p1;
    let d23 = cp.p3 - cp.p2;
    // Degree-2 Bernstein form of the hodograph.
    let first = d01 * (three * u * u)
        + d12 * (six * u * eta)
        + d23 * (three * eta * eta);
    let second = (d12 - d01) * (six * u) + (d23 - d12) * (six * eta);
    Ok((first, second))
}

/// Place the interior control points from endpoint headings and distances.
///
/// The resulting path leaves the start along `theta_i` and arrives along
/// `theta_f`.
pub fn polygon_from_spec<T: Real>(spec: &PathSpec<T>) -> Result<ControlPolygon<T>> {
    spec.validate()?;
    let p0 = Point2::new(spec.start.x, spec.start.y);
    let p3 = Point2::new(spec.end.x, spec.end.y);
    let p1 = p0 + Vector2::new(spec.start.theta.cos(), spec.start.theta.sin()) * spec.d_i;
    let p2 = p3 - Vector2::new(spec.end.theta.cos(), spec.end.theta.sin()) * spec.d_f;
    ControlPolygon::new(p0, p1, p2, p3)
}

/// Tolerance below which the parametric speed is treated as a singular tangent.
fn tangent_tol<T: Real>() -> T {
    T::of(1e-9)
}

/// Sample the reference pose/velocity profile on a uniform `eta` grid.
pub fn reference_trajectory<T: Real>(
    cp: &ControlPolygon<T>,
    total_time: T,
    n: usize,
) -> Result<ReferenceTrajectory<T>> {
    if n < 2 {
        return Err(WmrError::InvalidSpec(format!(
            "sample count {n} < 2"
        )));
    }
    if total_time <= T::zero() {
        return Err(WmrError::Domain {
            name: "T",
            value: to_f64(total_time),
            domain: "(0, inf)",
        });
    }
    let mut samples = Vec::with_capacity(n);
    let mut prev_theta = T::zero();
    for k in 0..n {
        let eta = T::from_usize(k).unwrap() / T::from_usize(n - 1).unwrap();
        let pos = bezier_point(cp, eta)?;
        let (d1, d2) = bezier_derivatives(cp, eta)?;
        let speed_sq = d1.norm_squared();
        let speed = speed_sq.sqrt();
        if speed < tangent_tol() {
            return Err(WmrError::SingularPath { eta: to_f64(eta) });
        }
        let mut theta = d1.y.atan2(d1.x);
        if k > 0 {
            // Unwrap: keep |delta theta| < pi between adjacent samples.
            let two_pi = T::two_pi();
            while theta - prev_theta > T::pi() {
                theta -= two_pi;
            }
            while theta - prev_theta < -T::pi() {
                theta += two_pi;
            }
        }
        prev_theta = theta;
        let v = speed / total_time;
        let omega = (d1.x * d2.y - d1.y * d2.x) / speed_sq / total_time;
        samples.push(ReferenceSample {
            eta,
            t: eta * total_time,
            pose: Pose::new(pos.x, pos.y, theta),
            v,
            omega,
        });
    }
    Ok(ReferenceTrajectory {
        samples,
        total_time,
    })
}

// 5-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_08,
    0.478_628_670_499_366_47,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_47,
    0.236_926_885_056_189_08,
];

/// Curve length by composite 5-point Gauss-Legendre quadrature (256 panels,
/// accurate to ~1e-7 relative even for near-cusp polygons).
pub fn arc_length<T: Real>(cp: &ControlPolygon<T>) -> T {
    arc_length_panels(cp, 256)
}

pub fn arc_length_panels<T: Real>(cp: &ControlPolygon<T>, panels: usize) -> T {
    let mut total = T::zero();
    let h = T::one() / T::from_usize(panels).unwrap();
    let half = T::of(0.5);
    for p in 0..panels {
        let a = T::from_usize(p).unwrap() * h;
        let mid = a + half * h;
        let mut panel = T::zero();
        for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            let eta = mid + half * h * T::of(*node);
            let (d1, _) = bezier_derivatives(cp, eta).expect("eta within [0,1]");
            panel += T::of(*weight) * d1.norm();
        }
        total += panel * half * h;
    }
    total
}

/// Componentwise velocity extrema over the sample grid:
/// `(v_min, v_max, omega_min, omega_max)`.
pub fn velocity_extrema<T: Real>(traj: &ReferenceTrajectory<T>) -> (T, T, T, T) {
    let mut v_min = traj.samples[0].v;
    let mut v_max = v_min;
    let mut w_min = traj.samples[0].omega;
    let mut w_max = w_min;
    for s in &traj.samples[1..] {
        v_min = v_min.min(s.v);
        v_max = v_max.max(s.v);
        w_min = w_min.min(s.omega);
        w_max = w_max.max(s.omega);
    }
    (v_min, v_max, w_min, w_max)
}

impl<T: Real> ReferenceTrajectory<T> {
    /// Reference state at time `t`: linear interpolation of pose (heading is
    /// already unwrapped) and velocities between grid samples; past the end
    /// of the path the final pose is held with zero velocities.
    pub fn sample_at(&self, t: T) -> ReferenceSample<T> {
        let last = *self.samples.last().unwrap();
        if t >= self.total_time {
            return ReferenceSample {
                eta: T::one(),
                t,
                pose: last.pose,
                v: T::zero(),
                omega: T::zero(),
            };
        }
        let t = t.max(T::zero());
        let n = self.samples.len();
        let pos = t / self.total_time * T::from_usize(n - 1).unwrap();
        let idx = to_f64(pos).floor() as usize;
        let idx = idx.min(n - 2);
        let a = &self.samples[idx];
        let b = &self.samples[idx + 1];
        let frac = (t - a.t) / (b.t - a.t);
        let lerp = |x: T, y: T| x + (y - x) * frac;
        ReferenceSample {
            eta: lerp(a.eta, b.eta),
            t,
            pose: Pose::new(
                lerp(a.pose.x, b.pose.x),
                lerp(a.pose.y, b.pose.y),
                lerp(a.pose.theta, b.pose.theta),
            ),
            v: lerp(a.v, b.v),
            omega: lerp(a.omega, b.omega),
        }
    }
}
