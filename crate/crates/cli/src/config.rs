//! Run configuration: a single self-describing TOML document.
//!
//! Every key has a documented default, so an empty file (or no `--config`
//! flag at all) describes the benchmark scenario. Unknown keys are rejected.
//! Angles accept either a bare number (radians) or a string with an explicit
//! `deg`/`rad` suffix, e.g. `theta = "-90 deg"`.

use serde::Deserialize;
use wmr_core::it2::UncertaintyGrid;
use wmr_core::lmi::SolverSettings;
use wmr_core::path::PathSpec;
use wmr_core::robot::{Pose, TrackingError};
use wmr_core::sim::SimConfig;
use wmr_core::ts::ErrorBox;
use wmr_core::ClassicParams;

/// Configuration error with a human-readable message.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

/// An angle given as a bare number (radians) or a tagged string.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Angle {
    Number(f64),
    Text(String),
}

impl Angle {
    pub fn radians(&self) -> Result<f64> {
        match self {
            Angle::Number(r) => Ok(*r),
            Angle::Text(s) => {
                let t = s.trim();
                let (body, scale) = if let Some(v) = t.strip_suffix("deg") {
                    (v, std::f64::consts::PI / 180.0)
                } else if let Some(v) = t.strip_suffix("rad") {
                    (v, 1.0)
                } else {
                    (t, 1.0)
                };
                body.trim()
                    .parse::<f64>()
                    .map(|x| x * scale)
                    .map_err(|_| ConfigError(format!("cannot parse angle {s:?}")))
            }
        }
    }
}

fn angle_deg(d: f64) -> Angle {
    Angle::Text(format!("{d} deg"))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseConfig {
    pub x: f64,
    pub y: f64,
    pub theta: Angle,
}

impl PoseConfig {
    fn pose(&self) -> Result<Pose<f64>> {
        Ok(Pose::new(self.x, self.y, self.theta.radians()?))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub start: PoseConfig,
    pub end: PoseConfig,
    pub d_i: f64,
    pub d_f: f64,
    pub total_time: f64,
    /// Sample count of the emitted/derived reference trajectory.
    pub samples: usize,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            start: PoseConfig {
                x: 0.4,
                y: 0.7,
                theta: angle_deg(-90.0),
            },
            end: PoseConfig {
                x: 1.5,
                y: 0.7,
                theta: angle_deg(-90.0),
            },
            d_i: 1.0,
            d_f: 1.0,
            total_time: 1.0,
            samples: 2001,
        }
    }
}

impl PathConfig {
    pub fn spec(&self) -> Result<PathSpec<f64>> {
        Ok(PathSpec {
            start: self.start.pose()?,
            end: self.end.pose()?,
            d_i: self.d_i,
            d_f: self.d_f,
            total_time: self.total_time,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Classic,
    Type1,
    Type2,
}

impl ControllerKind {
    pub fn name(self) -> &'static str {
        match self {
            ControllerKind::Classic => "classic",
            ControllerKind::Type1 => "type1",
            ControllerKind::Type2 => "type2",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassicConfig {
    pub zeta: f64,
    pub g: f64,
}

impl Default for ClassicConfig {
    fn default() -> Self {
        Self { zeta: 0.6, g: 0.1 }
    }
}

impl ClassicConfig {
    pub fn params(&self) -> Result<ClassicParams> {
        wmr_core::classic::ClassicParams::new(self.zeta, self.g)
            .map_err(|e| ConfigError(e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FuzzyConfig {
    /// Half-widths of the state box over which the model is exact.
    pub e_x_max: f64,
    pub e_y_max: f64,
    pub e_theta_max: Angle,
    /// With clamping on (the default), membership grades saturate to the
    /// nearest corner outside the zoning intervals. With clamping off, a
    /// simulation that drives any premise variable outside its interval is
    /// reported as a model-validity failure.
    pub clamp: bool,
}

impl Default for FuzzyConfig {
    fn default() -> Self {
        Self {
            e_x_max: 0.2,
            e_y_max: 0.2,
            e_theta_max: angle_deg(90.0),
            clamp: true,
        }
    }
}

impl FuzzyConfig {
    pub fn error_box(&self) -> Result<ErrorBox<f64>> {
        let b = ErrorBox {
            e_x_max: self.e_x_max,
            e_y_max: self.e_y_max,
            e_theta_max: self.e_theta_max.radians()?,
        };
        if b.e_x_max <= 0.0 || b.e_y_max <= 0.0 || b.e_theta_max <= 0.0 {
            return Err(ConfigError("error box half-widths must be positive".into()));
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Type2Config {
    /// Uncertain initial x range.
    pub x_range: [f64; 2],
    /// Uncertain initial y range.
    pub y_range: [f64; 2],
    /// Grid samples per axis.
    pub n: usize,
}

impl Default for Type2Config {
    fn default() -> Self {
        Self {
            x_range: [0.7, 1.5],
            y_range: [0.5, 0.9],
            n: 5,
        }
    }
}

impl Type2Config {
    pub fn grid(&self) -> UncertaintyGrid<f64> {
        UncertaintyGrid {
            x_range: (self.x_range[0], self.x_range[1]),
            y_range: (self.y_range[0], self.y_range[1]),
            n: self.n,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol_feas: f64,
    pub max_iter: usize,
    pub x_cap: f64,
    pub m_cap: f64,
    pub newton_steps: usize,
    pub decay_rate: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::<f64>::default();
        Self {
            tol_feas: s.tol_feas,
            max_iter: s.max_iter,
            x_cap: s.x_cap,
            m_cap: s.m_cap,
            newton_steps: s.newton_steps,
            decay_rate: s.decay_rate,
        }
    }
}

impl SolverConfig {
    pub fn settings(&self) -> SolverSettings<f64> {
        SolverSettings {
            tol_feas: self.tol_feas,
            max_iter: self.max_iter,
            x_cap: self.x_cap,
            m_cap: self.m_cap,
            newton_steps: self.newton_steps,
            decay_rate: self.decay_rate,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialErrorConfig {
    pub e_x: f64,
    pub e_y: f64,
    pub e_theta: Angle,
}

impl Default for InitialErrorConfig {
    fn default() -> Self {
        Self {
            e_x: -0.1,
            e_y: -0.1,
            e_theta: angle_deg(-6.0),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub dt: f64,
    pub t_span: f64,
    pub e0: InitialErrorConfig,
    pub divergence_norm: f64,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_span: 10.0,
            e0: InitialErrorConfig::default(),
            divergence_norm: 50.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for every emitted artifact; created if missing.
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

/// The whole run configuration.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub path: PathConfig,
    pub controller: Option<ControllerKind>,
    pub classic: ClassicConfig,
    pub fuzzy: FuzzyConfig,
    pub type2: Type2Config,
    pub solver: SolverConfig,
    pub sim: SimSection,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    /// Controller selection; `type1` when the key is absent.
    pub fn controller(&self) -> ControllerKind {
        self.controller.unwrap_or(ControllerKind::Type1)
    }

    pub fn sim_config(&self) -> Result<SimConfig<f64>> {
        let spec = self.path.spec()?;
        spec.validate().map_err(|e| ConfigError(e.to_string()))?;
        let e0 = TrackingError::new(
            self.sim.e0.e_x,
            self.sim.e0.e_y,
            self.sim.e0.e_theta.radians()?,
        );
        let mut c = SimConfig::new(spec, e0);
        if self.sim.dt <= 0.0 || self.sim.t_span <= 0.0 {
            return Err(ConfigError("sim.dt and sim.t_span must be positive".into()));
        }
        if self.path.samples < 2 {
            return Err(ConfigError("path.samples must be at least 2".into()));
        }
        c.dt = self.sim.dt;
        c.horizon = self.sim.t_span;
        c.reference_samples = self.path.samples;
        c.divergence_norm = self.sim.divergence_norm;
        Ok(c)
    }
}
