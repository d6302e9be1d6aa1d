//! Trajectory-tracking control toolkit for a differential-drive (type (2,0))
//! wheeled mobile robot.
//!
//! The crate covers the full pipeline: cubic Bezier reference paths with
//! velocity profiles ([`path`]), the kinematic plant and local-frame error
//! dynamics ([`robot`]), a gain-scheduled pole-placement baseline
//! ([`classic`]), an exact 16-rule Takagi-Sugeno model with PDC evaluation
//! ([`ts`]), an interval Type II extension ([`it2`]), LMI-based gain
//! synthesis with Lyapunov certification ([`lmi`]), and a closed-loop
//! simulation harness ([`sim`]).
//!
//! All numerics are generic over the scalar type through [`scalar::Real`];
//! concrete `f64` aliases live at the crate root.

pub mod classic;
pub mod error;
pub mod it2;
pub mod lmi;
pub mod path;
pub mod robot;
pub mod scalar;
pub mod sim;
pub mod ts;

pub use error::WmrError;
pub use scalar::Real;

/// Default scalar used by the CLI and the concrete aliases below.
pub type Scalar = f64;

pub type Point2 = nalgebra::Point2<Scalar>;
pub type Vec2 = nalgebra::Vector2<Scalar>;
pub type Vec3 = nalgebra::Vector3<Scalar>;
pub type Mat3 = nalgebra::Matrix3<Scalar>;

pub type ControlPolygon = path::ControlPolygon<Scalar>;
pub type PathSpec = path::PathSpec<Scalar>;
pub type ReferenceTrajectory = path::ReferenceTrajectory<Scalar>;
pub type Pose = robot::Pose<Scalar>;
pub type VelocityCommand = robot::VelocityCommand<Scalar>;
pub type TrackingError = robot::TrackingError<Scalar>;
pub type WheelGeometry = robot::WheelGeometry<Scalar>;
pub type ClassicParams = classic::ClassicParams<Scalar>;
pub type ErrorBox = ts::ErrorBox<Scalar>;
pub type LinguisticBounds = ts::LinguisticBounds<Scalar>;
pub type TsModel = ts::TsModel<Scalar>;
pub type FiringStrengths = ts::FiringStrengths<Scalar>;
pub type UncertaintyGrid = it2::UncertaintyGrid<Scalar>;
pub type IntervalBounds = it2::IntervalBounds<Scalar>;
pub type IntervalFiringStrengths = it2::IntervalFiringStrengths<Scalar>;
pub type LmiProblem = lmi::LmiProblem<Scalar>;
pub type PdcSynthesis = lmi::PdcSynthesis<Scalar>;
pub type SolverSettings = lmi::SolverSettings<Scalar>;
pub type SimConfig = sim::SimConfig<Scalar>;
pub type SimTrace = sim::SimTrace<Scalar>;
pub type Metrics = sim::Metrics<Scalar>;
