//! Interval Type II extension of the fuzzy model.
//!
//! Uncertainty in the robot's initial point is swept over a grid; each grid
//! point regenerates the reference path and its zoning bounds. The envelope
//! of those bounds yields interval membership grades, lower/upper firing
//! strengths, and an averaged (Nie-Tan style) PDC output. With a degenerate
//! grid every quantity collapses to the Type I value.

use crate::error::{Result, WmrError};
use crate::path::{polygon_from_spec, reference_trajectory, PathSpec};
use crate::robot::{TrackingError, VelocityCommand};
use crate::scalar::Real;
use crate::ts::{
    self, ErrorBox, FiringStrengths, LinguisticBounds, TsModel, TsRule, RULE_COUNT, VAR_NAMES,
};
use nalgebra::{Matrix2x3, Matrix3};

/// Ranges of the uncertain initial point and samples per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertaintyGrid<T: Real> {
    pub x_range: (T, T),
    pub y_range: (T, T),
    pub n: usize,
}

impl<T: Real> UncertaintyGrid<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(WmrError::InvalidSpec("uncertainty grid needs N >= 1".into()));
        }
        if self.x_range.1 < self.x_range.0 || self.y_range.1 < self.y_range.0 {
            return Err(WmrError::InvalidSpec("uncertainty ranges must be ordered".into()));
        }
        Ok(())
    }
}

/// Per-variable lower/upper zoning envelopes and which variables actually
/// carry uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalBounds<T: Real> {
    /// Narrowest interval seen across the grid.
    pub lower_envelope: LinguisticBounds<T>,
    /// Widest interval seen across the grid.
    pub upper_envelope: LinguisticBounds<T>,
    /// Variables whose envelopes differ by more than the detection tolerance.
    pub interval_typed: [bool; 4],
}

/// Lower and upper normalized rule weights.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalFiringStrengths<T: Real> {
    pub lower: [T; RULE_COUNT],
    pub upper: [T; RULE_COUNT],
}

/// Uniformly spaced sample points of the grid, endpoints included. `n = 1`
/// degenerates to the range start.
pub fn uncertainty_grid<T: Real>(grid: &UncertaintyGrid<T>) -> Result<Vec<(T, T)>> {
    grid.validate()?;
    let axis = |range: (T, T)| -> Vec<T> {
        if grid.n == 1 {
            return vec![range.0];
        }
        let step = (range.1 - range.0) / T::from_usize(grid.n - 1).unwrap();
        (0..grid.n)
            .map(|j| range.0 + T::from_usize(j).unwrap() * step)
            .collect()
    };
    let xs = axis(grid.x_range);
    let ys = axis(grid.y_range);
    let mut points = Vec::with_capacity(xs.len() * ys.len());
    for &x in &xs {
        for &y in &ys {
            points.push((x, y));
        }
    }
    Ok(points)
}

const ENVELOPE_TOL: f64 = 1e-9;

/// Sweep the grid, rebuilding the path with each candidate initial point,
/// and collect the per-variable zoning envelopes.
pub fn interval_bounds<T: Real>(
    grid: &UncertaintyGrid<T>,
    template: &PathSpec<T>,
    error_box: &ErrorBox<T>,
    samples: usize,
) -> Result<IntervalBounds<T>> {
    let points = uncertainty_grid(grid)?;
    let mut per_point: Vec<LinguisticBounds<T>> = Vec::with_capacity(points.len());
    for (x, y) in points {
        let mut spec = template.clone();
        spec.start.x = x;
        spec.start.y = y;
        let cp = polygon_from_spec(&spec)?;
        let traj = reference_trajectory(&cp, spec.total_time, samples)?;
        // Raw extrema: a single member may degenerate (straight path, zero
        // omega span) and still contribute valid envelope data.
        per_point.push(ts::raw_bounds(&traj, error_box));
    }

    let mut lower_envelope = per_point[0];
    let mut upper_envelope = per_point[0];
    for b in &per_point[1..] {
        let fold = |lo: &mut ts::VarBounds<T>, hi: &mut ts::VarBounds<T>, v: &ts::VarBounds<T>| {
            lo.upper = lo.upper.min(v.upper);
            lo.lower = lo.lower.max(v.lower);
            hi.upper = hi.upper.max(v.upper);
            hi.lower = hi.lower.min(v.lower);
        };
        fold(&mut lower_envelope.z1, &mut upper_envelope.z1, &b.z1);
        fold(&mut lower_envelope.z2, &mut upper_envelope.z2, &b.z2);
        fold(&mut lower_envelope.z3, &mut upper_envelope.z3, &b.z3);
        fold(&mut lower_envelope.z4, &mut upper_envelope.z4, &b.z4);
    }

    let lo_vars = lower_envelope.vars();
    let hi_vars = upper_envelope.vars();
    let mut interval_typed = [false; 4];
    for k in 0..4 {
        if lo_vars[k].upper <= lo_vars[k].lower {
            return Err(WmrError::UncertaintyTooWide {
                variable: VAR_NAMES[k],
            });
        }
        let tol = T::of(ENVELOPE_TOL);
        interval_typed[k] = (hi_vars[k].upper - lo_vars[k].upper).abs() > tol
            || (hi_vars[k].lower - lo_vars[k].lower).abs() > tol;
    }
    Ok(IntervalBounds {
        lower_envelope,
        upper_envelope,
        interval_typed,
    })
}

/// Interval membership grades: the Type I grade formula evaluated under each
/// envelope, returned as `(min, max)` per variable and label.
pub fn interval_grades<T: Real>(
    z: &[T; 4],
    bounds: &IntervalBounds<T>,
) -> [((T, T), (T, T)); 4] {
    let lo = ts::membership_grades(z, &bounds.lower_envelope);
    let hi = ts::membership_grades(z, &bounds.upper_envelope);
    let mut out = [((T::zero(), T::zero()), (T::zero(), T::zero())); 4];
    for k in 0..4 {
        out[k] = (
            (lo[k].0.min(hi[k].0), lo[k].0.max(hi[k].0)),
            (lo[k].1.min(hi[k].1), lo[k].1.max(hi[k].1)),
        );
    }
    out
}

/// Lower/upper firing strengths: rule products of lower grades and of upper
/// grades, each set normalized independently.
pub fn interval_firing<T: Real>(
    grades: &[((T, T), (T, T)); 4],
) -> Result<IntervalFiringStrengths<T>> {
    let mut w_lo = [T::zero(); RULE_COUNT];
    let mut w_hi = [T::zero(); RULE_COUNT];
    let (mut total_lo, mut total_hi) = (T::zero(), T::zero());
    for code in 0..RULE_COUNT {
        let (mut p_lo, mut p_hi) = (T::one(), T::one());
        for (var, g) in grades.iter().enumerate() {
            let label = if code >> (3 - var) & 1 == 0 { g.0 } else { g.1 };
            p_lo *= label.0;
            p_hi *= label.1;
        }
        w_lo[code] = p_lo;
        w_hi[code] = p_hi;
        total_lo += p_lo;
        total_hi += p_hi;
    }
    let floor = T::of(1e-300);
    if total_lo < floor || total_hi < floor {
        return Err(WmrError::DegenerateFiring {
            normalizer: num_traits::ToPrimitive::to_f64(&total_lo.min(total_hi)).unwrap_or(0.0),
        });
    }
    let mut lower = [T::zero(); RULE_COUNT];
    let mut upper = [T::zero(); RULE_COUNT];
    for k in 0..RULE_COUNT {
        lower[k] = w_lo[k] / total_lo;
        upper[k] = w_hi[k] / total_hi;
    }
    Ok(IntervalFiringStrengths { lower, upper })
}

impl<T: Real> IntervalBounds<T> {
    pub fn firing_at(
        &self,
        e: &TrackingError<T>,
        v_r: T,
        omega_r: T,
    ) -> Result<IntervalFiringStrengths<T>> {
        let z = ts::linguistic_values(e, v_r, omega_r);
        interval_firing(&interval_grades(&z, self))
    }
}

/// Type II PDC command: average of the lower- and upper-bound feedback terms
/// plus the common feedforward.
pub fn it2_pdc_control<T: Real>(
    e: &TrackingError<T>,
    firing: &IntervalFiringStrengths<T>,
    gains: &[Matrix2x3<T>],
    reference: &VelocityCommand<T>,
) -> VelocityCommand<T> {
    let u_lo = ts::pdc_feedback(e, &firing.lower, gains);
    let u_hi = ts::pdc_feedback(e, &firing.upper, gains);
    let u = (u_lo + u_hi) * T::of(0.5);
    VelocityCommand::new(
        reference.v * e.e_theta.cos() + u.x,
        reference.omega + u.y,
    )
}

/// Averaged closed-loop state matrix over both firing bounds, with
/// `G_ij = A_i - B_i F_j`. Analysis/test helper, not part of the runtime
/// control loop.
pub fn it2_closed_loop_matrix<T: Real>(
    firing: &IntervalFiringStrengths<T>,
    rules: &[TsRule<T>],
    gains: &[Matrix2x3<T>],
) -> Matrix3<T> {
    let g = |i: usize, j: usize| rules[i].a - rules[i].b * gains[j];
    let half = T::of(0.5);
    let mut m = Matrix3::zeros();
    for h in [&firing.upper, &firing.lower] {
        for i in 0..RULE_COUNT {
            m += g(i, i) * (half * h[i] * h[i]);
            for j in i + 1..RULE_COUNT {
                m += (g(i, j) + g(j, i)) * (half * h[i] * h[j]);
            }
        }
    }
    m
}

/// Crisp Type I strengths from one envelope, used by degeneracy checks.
pub fn type1_firing_from_envelope<T: Real>(
    z: &[T; 4],
    bounds: &LinguisticBounds<T>,
) -> Result<FiringStrengths<T>> {
    ts::firing_strengths(&ts::membership_grades(z, bounds))
}

/// Build the 16-rule model used for Type II synthesis and simulation from
/// the widest (upper) envelope, so the corner systems cover every grid path.
pub fn model_from_interval_bounds<T: Real>(
    bounds: &IntervalBounds<T>,
    error_box: ErrorBox<T>,
) -> Result<TsModel<T>> {
    ts::build_rules(bounds.upper_envelope, error_box)
}
