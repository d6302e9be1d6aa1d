//! Closed-loop simulation harness.
//!
//! The kinematic plant is integrated with classic RK4 under a zero-order-hold
//! command: the controller output computed at the step start is held constant
//! across the step. The reference is sampled from a precomputed trajectory
//! (linear interpolation, final pose held with zero velocity past the end).

use crate::classic::{classic_control, ClassicParams};
use crate::error::Result;
use crate::it2::{it2_pdc_control, IntervalBounds};
use crate::path::{PathSpec, ReferenceTrajectory};
use crate::robot::{
    plant_derivative, pose_from_error, tracking_error, Pose, TrackingError, VelocityCommand,
};
use crate::scalar::Real;
use crate::ts::{pdc_control, TsModel};
use nalgebra::{Matrix2x3, Matrix3, Vector3};

/// Controller run by the harness.
#[derive(Debug, Clone)]
pub enum Controller<T: Real> {
    Classic(ClassicParams<T>),
    Type1 {
        model: TsModel<T>,
        gains: Vec<Matrix2x3<T>>,
    },
    Type2 {
        bounds: IntervalBounds<T>,
        gains: Vec<Matrix2x3<T>>,
    },
}

impl<T: Real> Controller<T> {
    /// Label used in reports and CSV headers.
    pub fn name(&self) -> &'static str {
        match self {
            Controller::Classic(_) => "classic",
            Controller::Type1 { .. } => "type1",
            Controller::Type2 { .. } => "type2",
        }
    }
}

/// Simulation setup shared by all controllers.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<T: Real> {
    pub path: PathSpec<T>,
    pub initial_error: TrackingError<T>,
    /// Integration step.
    pub dt: T,
    /// Simulated span; may exceed the reference total time, in which case the
    /// final pose is held.
    pub horizon: T,
    /// Sample count of the precomputed reference trajectory.
    pub reference_samples: usize,
    /// Error norm beyond which the run is flagged as diverged.
    pub divergence_norm: T,
}

impl<T: Real> SimConfig<T> {
    pub fn new(path: PathSpec<T>, initial_error: TrackingError<T>) -> Self {
        Self {
            path,
            initial_error,
            dt: T::of(1e-3),
            horizon: T::of(10.0),
            reference_samples: 2001,
            divergence_norm: T::of(50.0),
        }
    }
}

/// The default benchmark path: a U-turn between two poses facing -y, one
/// second long, with unit tangent lengths (endpoint speed 3 m/s).
pub fn default_path_spec<T: Real>() -> PathSpec<T> {
    PathSpec {
        start: Pose::new(T::of(0.4), T::of(0.7), -T::frac_pi_2()),
        end: Pose::new(T::of(1.5), T::of(0.7), -T::frac_pi_2()),
        d_i: T::one(),
        d_f: T::one(),
        total_time: T::one(),
    }
}

/// One recorded step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStep<T: Real> {
    pub t: T,
    pub reference: Pose<T>,
    pub reference_cmd: VelocityCommand<T>,
    pub pose: Pose<T>,
    pub error: TrackingError<T>,
    pub command: VelocityCommand<T>,
    /// `V = e^T P e` when a Lyapunov matrix was supplied.
    pub lyapunov: Option<T>,
}

/// Full closed-loop record.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace<T: Real> {
    pub steps: Vec<SimStep<T>>,
    pub dt: T,
    /// True when the error norm crossed the divergence threshold (the trace
    /// holds the steps recorded up to that point).
    pub diverged: bool,
    /// True when the error ever left the model's validity box (fuzzy
    /// controllers only).
    pub left_error_box: bool,
}

/// One RK4 step of the plant under a held command.
pub fn rk4_step<T: Real>(pose: &Pose<T>, cmd: &VelocityCommand<T>, dt: T) -> Pose<T> {
    let f = |p: &Pose<T>| plant_derivative(p, cmd);
    let advance = |p: &Pose<T>, k: &Vector3<T>, s: T| {
        Pose::new(p.x + k.x * s, p.y + k.y * s, p.theta + k.z * s)
    };
    let half = dt * T::of(0.5);
    let k1 = f(pose);
    let k2 = f(&advance(pose, &k1, half));
    let k3 = f(&advance(pose, &k2, half));
    let k4 = f(&advance(pose, &k3, dt));
    let six = T::of(6.0);
    let incr = (k1 + k2 * T::of(2.0) + k3 * T::of(2.0) + k4) * (dt / six);
    Pose::new(pose.x + incr.x, pose.y + incr.y, pose.theta + incr.z)
}

/// Run the closed loop. The initial pose is placed so that the tracking error
/// at `t = 0` equals `config.initial_error` exactly.
pub fn run_closed_loop<T: Real>(
    config: &SimConfig<T>,
    controller: &Controller<T>,
    reference: &ReferenceTrajectory<T>,
    lyapunov_p: Option<&Matrix3<T>>,
) -> Result<SimTrace<T>> {
    let n_steps = num_traits::ToPrimitive::to_f64(&(config.horizon / config.dt))
        .unwrap()
        .round() as usize;
    let mut steps = Vec::with_capacity(n_steps + 1);
    let mut diverged = false;
    let mut left_error_box = false;

    let first = reference.sample_at(T::zero());
    let mut pose = pose_from_error(&first.pose, &config.initial_error);

    for k in 0..=n_steps {
        let t = T::from_usize(k).unwrap() * config.dt;
        let sample = reference.sample_at(t);
        let e = tracking_error(&sample.pose, &pose);
        let reference_cmd = VelocityCommand::new(sample.v, sample.omega);

        let finite = e.norm().is_finite();
        if !finite || e.norm() > config.divergence_norm {
            diverged = true;
            break;
        }

        let command = match controller {
            Controller::Classic(params) => classic_control(&e, &reference_cmd, params),
            Controller::Type1 { model, gains } => {
                if !model.error_box.contains(&e) {
                    left_error_box = true;
                }
                let firing = model.firing_at(&e, sample.v, sample.omega)?;
                pdc_control(&e, &firing.h, gains, &reference_cmd)
            }
            Controller::Type2 { bounds, gains } => {
                let firing = bounds.firing_at(&e, sample.v, sample.omega)?;
                it2_pdc_control(&e, &firing, gains, &reference_cmd)
            }
        };

        let lyapunov = lyapunov_p.map(|p| {
            let ev = e.as_vector();
            ev.dot(&(p * ev))
        });
        steps.push(SimStep {
            t,
            reference: sample.pose,
            reference_cmd,
            pose,
            error: e,
            command,
            lyapunov,
        });

        if k < n_steps {
            pose = rk4_step(&pose, &command, config.dt);
        }
    }

    Ok(SimTrace {
        steps,
        dt: config.dt,
        diverged,
        left_error_box,
    })
}

/// Scalar tracking metrics of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics<T: Real> {
    pub ise_x: T,
    pub ise_y: T,
    pub ise_theta: T,
    pub ise_total: T,
    /// Peak error norm over the run.
    pub max_error: T,
    /// First time after which the error norm stays below 5% of the initial
    /// error norm; `None` if it never settles (or re-escapes).
    pub settling_time: Option<T>,
    /// Peak command slew `max |u_{k+1} - u_k|_inf / dt`.
    pub max_cmd_rate: T,
}

/// Fraction of the initial error norm used as the settling band.
pub const SETTLING_FRACTION: f64 = 0.05;

/// Trapezoidal integrated-squared-error metrics plus peak/settling/slew
/// figures for a recorded trace.
pub fn compute_metrics<T: Real>(trace: &SimTrace<T>) -> Metrics<T> {
    let steps = &trace.steps;
    assert!(steps.len() >= 2, "metrics need at least two samples");
    let half = T::of(0.5);
    let mut ise = Vector3::<T>::zeros();
    let mut max_error = T::zero();
    let mut max_cmd_rate = T::zero();
    for w in steps.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let sq = |e: &TrackingError<T>| {
            Vector3::new(e.e_x * e.e_x, e.e_y * e.e_y, e.e_theta * e.e_theta)
        };
        ise += (sq(&a.error) + sq(&b.error)) * (half * trace.dt);
        let dv = (b.command.v - a.command.v).abs();
        let dw = (b.command.omega - a.command.omega).abs();
        max_cmd_rate = max_cmd_rate.max(dv.max(dw) / trace.dt);
    }
    for s in steps {
        max_error = max_error.max(s.error.norm());
    }

    let e0 = steps[0].error.norm();
    let band = T::of(SETTLING_FRACTION) * e0;
    let settling_time = if e0 == T::zero() {
        Some(T::zero())
    } else {
        // Last sample outside the band determines settling.
        let last_outside = steps.iter().rposition(|s| s.error.norm() >= band);
        match last_outside {
            None => Some(steps[0].t),
            Some(i) if i + 1 < steps.len() => Some(steps[i + 1].t),
            Some(_) => None,
        }
    };

    Metrics {
        ise_x: ise.x,
        ise_y: ise.y,
        ise_theta: ise.z,
        ise_total: ise.x + ise.y + ise.z,
        max_error,
        settling_time,
        max_cmd_rate,
    }
}

/// Run several controllers on the same configuration and reference.
pub fn compare_controllers<T: Real>(
    config: &SimConfig<T>,
    controllers: &[(Controller<T>, Option<Matrix3<T>>)],
    reference: &ReferenceTrajectory<T>,
) -> Result<Vec<(SimTrace<T>, Metrics<T>)>> {
    controllers
        .iter()
        .map(|(c, p)| {
            let trace = run_closed_loop(config, c, reference, p.as_ref())?;
            let metrics = compute_metrics(&trace);
            Ok((trace, metrics))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{polygon_from_spec, reference_trajectory};
    use approx::assert_relative_eq;

    fn reference() -> ReferenceTrajectory<f64> {
        let spec = default_path_spec::<f64>();
        let cp = polygon_from_spec(&spec).unwrap();
        reference_trajectory(&cp, spec.total_time, 2001).unwrap()
    }

    fn config(e0: TrackingError<f64>) -> SimConfig<f64> {
        SimConfig::new(default_path_spec(), e0)
    }

    #[test]
    fn rk4_matches_circular_motion() {
        // Constant (v, omega) drives an exact circular arc.
        let cmd = VelocityCommand::new(1.0, 1.0);
        let exact = |t: f64| Pose::new(t.sin(), 1.0 - t.cos(), t);
        let run = |dt: f64| {
            let n = (1.0 / dt).round() as usize;
            let mut p = Pose::new(0.0, 0.0, 0.0);
            for _ in 0..n {
                p = rk4_step(&p, &cmd, dt);
            }
            let e = exact(1.0);
            ((p.x - e.x).powi(2) + (p.y - e.y).powi(2) + (p.theta - e.theta).powi(2)).sqrt()
        };
        let coarse = run(1e-2);
        let fine = run(5e-3);
        let ratio = coarse / fine;
        assert!(
            (12.0..=20.0).contains(&ratio),
            "order-4 halving ratio out of range: {ratio}"
        );
    }

    #[test]
    fn initial_step_reproduces_initial_error() {
        let e0 = TrackingError::new(-0.1, -0.1, -6f64.to_radians());
        let trace = run_closed_loop(
            &config(e0),
            &Controller::Classic(ClassicParams::default()),
            &reference(),
            None,
        )
        .unwrap();
        let first = trace.steps[0].error;
        assert_relative_eq!(first.e_x, e0.e_x, epsilon = 1e-12);
        assert_relative_eq!(first.e_y, e0.e_y, epsilon = 1e-12);
        assert_relative_eq!(first.e_theta, e0.e_theta, epsilon = 1e-12);
        assert_eq!(trace.steps.len(), 10_001);
        assert!(!trace.diverged);
    }

    #[test]
    fn zero_initial_error_stays_small() {
        let trace = run_closed_loop(
            &config(TrackingError::new(0.0, 0.0, 0.0)),
            &Controller::Classic(ClassicParams::default()),
            &reference(),
            None,
        )
        .unwrap();
        let worst = trace
            .steps
            .iter()
            .map(|s| s.error.norm())
            .fold(0.0f64, f64::max);
        // Held feedforward leaves only O(dt) discretization residue.
        assert!(worst < 5e-3, "zero-error run drifted to {worst}");
    }

    #[test]
    fn classic_run_settles() {
        let e0 = TrackingError::new(-0.1, -0.1, -6f64.to_radians());
        let trace = run_closed_loop(
            &config(e0),
            &Controller::Classic(ClassicParams::default()),
            &reference(),
            None,
        )
        .unwrap();
        let m = compute_metrics(&trace);
        assert!(!trace.diverged);
        let ts = m.settling_time.expect("run should settle");
        assert!(ts < 10.0);
        assert!(m.ise_total > 0.0);
    }

    #[test]
    fn divergence_is_flagged_with_partial_trace() {
        // Positive-feedback gains destabilize the loop.
        let model = {
            use crate::ts::{build_rules, ErrorBox, LinguisticBounds, VarBounds};
            let bounds = LinguisticBounds {
                z1: VarBounds { upper: 6.0, lower: -6.0 },
                z2: VarBounds { upper: 3.0, lower: 0.66 },
                z3: VarBounds { upper: 0.2, lower: -0.2 },
                z4: VarBounds { upper: 0.2, lower: -0.2 },
            };
            build_rules(bounds, ErrorBox::default()).unwrap()
        };
        // u = -F e with B's negative input channels: positive diagonal F
        // entries flip the loop to positive feedback.
        let bad = nalgebra::Matrix2x3::new(10.0, 0.0, 0.0, 0.0, 0.0, 10.0);
        let trace = run_closed_loop(
            &config(TrackingError::new(-0.1, -0.1, -0.1)),
            &Controller::Type1 {
                model,
                gains: vec![bad; 16],
            },
            &reference(),
            None,
        )
        .unwrap();
        assert!(trace.diverged);
        assert!(trace.steps.len() < 10_001);
        assert!(!trace.steps.is_empty());
        assert!(trace.left_error_box);
    }

    #[test]
    fn metrics_on_synthetic_exponential_decay() {
        // e(t) = e0 exp(-t): closed forms for ISE and settling.
        let dt = 1e-3;
        let horizon = 8.0;
        let n = (horizon / dt) as usize;
        let e0 = TrackingError::new(0.3, -0.4, 0.5);
        let steps: Vec<SimStep<f64>> = (0..=n)
            .map(|k| {
                let t = k as f64 * dt;
                let s = (-t).exp();
                SimStep {
                    t,
                    reference: Pose::new(0.0, 0.0, 0.0),
                    reference_cmd: VelocityCommand::new(0.0, 0.0),
                    pose: Pose::new(0.0, 0.0, 0.0),
                    error: TrackingError::new(e0.e_x * s, e0.e_y * s, e0.e_theta * s),
                    command: VelocityCommand::new(s, -s),
                    lyapunov: None,
                }
            })
            .collect();
        let trace = SimTrace {
            steps,
            dt,
            diverged: false,
            left_error_box: false,
        };
        let m = compute_metrics(&trace);
        let norm0_sq = e0.e_x.powi(2) + e0.e_y.powi(2) + e0.e_theta.powi(2);
        let expected_ise = norm0_sq * (1.0 - (-2.0 * horizon).exp()) / 2.0;
        assert_relative_eq!(m.ise_total, expected_ise, max_relative = 1e-5);
        assert_relative_eq!(m.max_error, norm0_sq.sqrt(), epsilon = 1e-12);
        // ||e|| drops below 5% at t = ln 20.
        let ts = m.settling_time.unwrap();
        assert_relative_eq!(ts, 20f64.ln(), epsilon = 2.0 * dt);
        // Command rate of exp decay: |du/dt| ~ 1 at t = 0.
        assert_relative_eq!(m.max_cmd_rate, 1.0, max_relative = 1e-2);
    }

    #[test]
    fn determinism() {
        let e0 = TrackingError::new(-0.1, -0.1, -6f64.to_radians());
        let r = reference();
        let c = config(e0);
        let k = Controller::Classic(ClassicParams::default());
        let t1 = run_closed_loop(&c, &k, &r, None).unwrap();
        let t2 = run_closed_loop(&c, &k, &r, None).unwrap();
        assert_eq!(t1, t2);
    }

    #[test]
    fn lyapunov_column_is_recorded() {
        let e0 = TrackingError::new(0.1, 0.0, 0.0);
        let p = Matrix3::identity();
        let trace = run_closed_loop(
            &config(e0),
            &Controller::Classic(ClassicParams::default()),
            &reference(),
            Some(&p),
        )
        .unwrap();
        let v0 = trace.steps[0].lyapunov.unwrap();
        assert_relative_eq!(v0, 0.01, epsilon = 1e-12);
    }
}
