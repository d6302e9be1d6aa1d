//! Exact 16-rule Takagi-Sugeno model of the tracking-error dynamics and the
//! Type I PDC control law.
//!
//! The nonlinear error dynamics are rewritten over a state box as a convex
//! blend of corner systems (sector of nonlinearity). The linguistic
//! variables are `z1 = omega_R`, `z2 = v_R sinc(e_theta)`, `z3 = e_y`,
//! `z4 = e_x`; the `sinc` form makes the blend reproduce the nonlinear
//! system exactly, since the model's `A(2,3)` entry multiplies `e_theta`.

use crate::error::{Result, WmrError};
use crate::path::ReferenceTrajectory;
use crate::robot::{TrackingError, VelocityCommand};
use crate::scalar::Real;
use nalgebra::{Matrix2x3, Matrix3, Matrix3x2, Vector3};
use std::fmt;

pub const RULE_COUNT: usize = 16;

/// State box over which the model is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorBox<T: Real> {
    pub e_x_max: T,
    pub e_y_max: T,
    pub e_theta_max: T,
}

impl<T: Real> Default for ErrorBox<T> {
    fn default() -> Self {
        Self {
            e_x_max: T::of(0.2),
            e_y_max: T::of(0.2),
            e_theta_max: T::frac_pi_2(),
        }
    }
}

impl<T: Real> ErrorBox<T> {
    pub fn contains(&self, e: &TrackingError<T>) -> bool {
        e.e_x.abs() <= self.e_x_max
            && e.e_y.abs() <= self.e_y_max
            && e.e_theta.abs() <= self.e_theta_max
    }
}

/// Upper/lower pair for one linguistic variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarBounds<T: Real> {
    pub upper: T,
    pub lower: T,
}

impl<T: Real> VarBounds<T> {
    pub fn width(&self) -> T {
        self.upper - self.lower
    }
}

/// Bounds of all four linguistic variables. Following the membership-label
/// naming, `z1` spans `[e2, e1]`, `z2` spans `[f2, f1]`, `z3` spans
/// `[g2, g1]` and `z4` spans `[p2, p1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinguisticBounds<T: Real> {
    pub z1: VarBounds<T>,
    pub z2: VarBounds<T>,
    pub z3: VarBounds<T>,
    pub z4: VarBounds<T>,
}

pub const VAR_NAMES: [&str; 4] = ["z1", "z2", "z3", "z4"];

impl<T: Real> LinguisticBounds<T> {
    pub fn vars(&self) -> [VarBounds<T>; 4] {
        [self.z1, self.z2, self.z3, self.z4]
    }

    pub fn validate(&self) -> Result<()> {
        for (bounds, name) in self.vars().iter().zip(VAR_NAMES) {
            let width = bounds.width();
            if width < T::of(1e-9) {
                return Err(WmrError::DegenerateZoning {
                    variable: match name {
                        "z1" => "z1",
                        "z2" => "z2",
                        "z3" => "z3",
                        _ => "z4",
                    },
                    width: num_traits::ToPrimitive::to_f64(&width).unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }
}

/// One corner rule: the consequent linear system at a corner of the
/// linguistic box.
#[derive(Debug, Clone, PartialEq)]
pub struct TsRule<T: Real> {
    /// 1-based rule index; `index - 1` is the big-endian corner code.
    pub index: usize,
    pub a: Matrix3<T>,
    pub b: Matrix3x2<T>,
}

/// The complete 16-rule model.
#[derive(Debug, Clone, PartialEq)]
pub struct TsModel<T: Real> {
    pub bounds: LinguisticBounds<T>,
    pub rules: Vec<TsRule<T>>,
    pub error_box: ErrorBox<T>,
}

/// Raw and normalized rule weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FiringStrengths<T: Real> {
    pub w: [T; RULE_COUNT],
    pub h: [T; RULE_COUNT],
}

/// `sin(x)/x` with the removable singularity filled in.
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::of(1e-6) {
        // 1 - x^2/6; next term is x^4/120 < 1e-26 here.
        T::one() - x * x / T::of(6.0)
    } else {
        x.sin() / x
    }
}

/// Evaluate the linguistic variables at a state.
pub fn linguistic_values<T: Real>(
    e: &TrackingError<T>,
    v_r: T,
    omega_r: T,
) -> [T; 4] {
    [omega_r, v_r * sinc(e.e_theta), e.e_y, e.e_x]
}

/// Compute zoning bounds from a reference trajectory and the error box.
///
/// `z1` spans the angular-velocity extrema of the trajectory; `z2` spans
/// `v_R sinc(e_theta)` over trajectory samples crossed with the heading-error
/// box; `z3`, `z4` span the fixed error box.
pub fn compute_bounds<T: Real>(
    traj: &ReferenceTrajectory<T>,
    error_box: &ErrorBox<T>,
) -> Result<LinguisticBounds<T>> {
    let bounds = raw_bounds(traj, error_box);
    bounds.validate()?;
    Ok(bounds)
}

/// Zoning extrema without the degeneracy validation. The interval sweep uses
/// this per grid member, since a single member may degenerate (straight-line
/// path) while the envelope over all members stays usable.
pub fn raw_bounds<T: Real>(
    traj: &ReferenceTrajectory<T>,
    error_box: &ErrorBox<T>,
) -> LinguisticBounds<T> {
    let (v_min, v_max, w_min, w_max) = crate::path::velocity_extrema(traj);
    // sinc is even and decreasing on [0, pi]; over the heading-error box its
    // range is [sinc(e_theta_max), 1].
    let s_lo = sinc(error_box.e_theta_max);
    let s_hi = T::one();
    let mut f_hi = v_min * s_lo;
    let mut f_lo = f_hi;
    for v in [v_min, v_max] {
        for s in [s_lo, s_hi] {
            f_hi = f_hi.max(v * s);
            f_lo = f_lo.min(v * s);
        }
    }
    LinguisticBounds {
        z1: VarBounds {
            upper: w_max,
            lower: w_min,
        },
        z2: VarBounds {
            upper: f_hi,
            lower: f_lo,
        },
        z3: VarBounds {
            upper: error_box.e_y_max,
            lower: -error_box.e_y_max,
        },
        z4: VarBounds {
            upper: error_box.e_x_max,
            lower: -error_box.e_x_max,
        },
    }
}

/// Complementary membership grades per variable, clamped to [0, 1] so the
/// controller saturates to the nearest corner model outside the zoning
/// interval. Returns `(label1, label2)` per variable.
pub fn membership_grades<T: Real>(z: &[T; 4], bounds: &LinguisticBounds<T>) -> [(T, T); 4] {
    let vars = bounds.vars();
    let mut out = [(T::zero(), T::zero()); 4];
    for k in 0..4 {
        let g1 = ((z[k] - vars[k].lower) / vars[k].width())
            .clamp(T::zero(), T::one());
        out[k] = (g1, T::one() - g1);
    }
    out
}

/// Consequent matrices at a corner `(z1, z2, z3, z4)` value.
fn corner_matrices<T: Real>(z1: T, z2: T, z3: T, z4: T) -> (Matrix3<T>, Matrix3x2<T>) {
    let z = T::zero();
    let a = Matrix3::new(
        z, z1, z,
        -z1, z, z2,
        z, z, z,
    );
    let b = Matrix3x2::new(
        -T::one(), z3,
        z, -z4,
        z, -T::one(),
    );
    (a, b)
}

/// The direct nonlinear system matrices at a state, used as the exactness
/// oracle for the convex blend.
pub fn nonlinear_matrices<T: Real>(z: &[T; 4]) -> (Matrix3<T>, Matrix3x2<T>) {
    corner_matrices(z[0], z[1], z[2], z[3])
}

/// Build all 16 corner rules. Rule 1 takes every upper bound, rule 16 every
/// lower bound; `index - 1` is read as four big-endian bits selecting
/// (z1, z2, z3, z4) corners.
pub fn build_rules<T: Real>(
    bounds: LinguisticBounds<T>,
    error_box: ErrorBox<T>,
) -> Result<TsModel<T>> {
    bounds.validate()?;
    let vars = bounds.vars();
    let pick = |code: usize, var: usize| {
        if code >> (3 - var) & 1 == 0 {
            vars[var].upper
        } else {
            vars[var].lower
        }
    };
    let rules = (0..RULE_COUNT)
        .map(|code| {
            let (a, b) = corner_matrices(
                pick(code, 0),
                pick(code, 1),
                pick(code, 2),
                pick(code, 3),
            );
            TsRule {
                index: code + 1,
                a,
                b,
            }
        })
        .collect();
    Ok(TsModel {
        bounds,
        rules,
        error_box,
    })
}

/// Rule firing strengths from per-variable grades.
pub fn firing_strengths<T: Real>(grades: &[(T, T); 4]) -> Result<FiringStrengths<T>> {
    let mut w = [T::zero(); RULE_COUNT];
    let mut total = T::zero();
    for (code, wi) in w.iter_mut().enumerate() {
        let mut prod = T::one();
        for (var, g) in grades.iter().enumerate() {
            prod *= if code >> (3 - var) & 1 == 0 { g.0 } else { g.1 };
        }
        *wi = prod;
        total += prod;
    }
    if total < T::of(1e-300) {
        return Err(WmrError::DegenerateFiring {
            normalizer: num_traits::ToPrimitive::to_f64(&total).unwrap_or(0.0),
        });
    }
    let mut h = [T::zero(); RULE_COUNT];
    for k in 0..RULE_COUNT {
        h[k] = w[k] / total;
    }
    Ok(FiringStrengths { w, h })
}

impl<T: Real> TsModel<T> {
    /// Firing strengths at a state.
    pub fn firing_at(&self, e: &TrackingError<T>, v_r: T, omega_r: T) -> Result<FiringStrengths<T>> {
        let z = linguistic_values(e, v_r, omega_r);
        firing_strengths(&membership_grades(&z, &self.bounds))
    }
}

/// Convex blend of the rule matrices.
pub fn blended_matrices<T: Real>(
    h: &[T; RULE_COUNT],
    model: &TsModel<T>,
) -> (Matrix3<T>, Matrix3x2<T>) {
    let mut a = Matrix3::zeros();
    let mut b = Matrix3x2::zeros();
    for (hi, rule) in h.iter().zip(model.rules.iter()) {
        a += rule.a * *hi;
        b += rule.b * *hi;
    }
    (a, b)
}

/// PDC feedback `u_B = -sum h_i F_i e`.
pub fn pdc_feedback<T: Real>(
    e: &TrackingError<T>,
    h: &[T; RULE_COUNT],
    gains: &[Matrix2x3<T>],
) -> nalgebra::Vector2<T> {
    debug_assert_eq!(gains.len(), RULE_COUNT);
    let x: Vector3<T> = e.as_vector();
    let mut u = nalgebra::Vector2::zeros();
    for (hi, f) in h.iter().zip(gains.iter()) {
        u -= f * x * *hi;
    }
    u
}

/// Total Type I PDC command: feedforward plus blended feedback.
pub fn pdc_control<T: Real>(
    e: &TrackingError<T>,
    h: &[T; RULE_COUNT],
    gains: &[Matrix2x3<T>],
    reference: &VelocityCommand<T>,
) -> VelocityCommand<T> {
    let u = pdc_feedback(e, h, gains);
    VelocityCommand::new(
        reference.v * e.e_theta.cos() + u.x,
        reference.omega + u.y,
    )
}

impl<T: Real> fmt::Display for TsModel<T> {
    /// Structured-text summary: bounds then all 16 rule matrices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vars = self.bounds.vars();
        writeln!(f, "linguistic bounds:")?;
        for (b, name) in vars.iter().zip(VAR_NAMES) {
            writeln!(f, "  {name}: [{:.9e}, {:.9e}]", b.lower, b.upper)?;
        }
        for rule in &self.rules {
            writeln!(f, "rule {}:", rule.index)?;
            for r in 0..3 {
                writeln!(
                    f,
                    "  A | {:>16.9e} {:>16.9e} {:>16.9e} |   B | {:>16.9e} {:>16.9e} |",
                    rule.a[(r, 0)],
                    rule.a[(r, 1)],
                    rule.a[(r, 2)],
                    rule.b[(r, 0)],
                    rule.b[(r, 1)],
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::{polygon_from_spec, reference_trajectory, PathSpec};
    use crate::robot::Pose;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn demo_bounds() -> LinguisticBounds<f64> {
        LinguisticBounds {
            z1: VarBounds { upper: 5.0, lower: -3.0 },
            z2: VarBounds { upper: 3.0, lower: 0.7 },
            z3: VarBounds { upper: 0.2, lower: -0.2 },
            z4: VarBounds { upper: 0.2, lower: -0.2 },
        }
    }

    #[test]
    fn sinc_values() {
        assert_relative_eq!(sinc(0.0f64), 1.0);
        let x = std::f64::consts::FRAC_PI_2;
        assert_relative_eq!(sinc(x), 2.0 / std::f64::consts::PI, epsilon = 1e-15);
        assert_relative_eq!(sinc(1e-8f64), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn linguistic_value_examples() {
        let e = TrackingError::new(0.0, 0.0, 0.0);
        let z = linguistic_values(&e, 2.0, 0.5);
        assert_relative_eq!(z[1], 2.0);

        let e = TrackingError::new(0.0, 0.0, std::f64::consts::FRAC_PI_2);
        let z = linguistic_values(&e, 1.0, 0.0);
        assert_relative_eq!(z[1], 2.0 / std::f64::consts::PI, epsilon = 1e-15);

        let e = TrackingError::new(0.1, -0.05, 0.0);
        let z = linguistic_values(&e, 1.7, 3.0);
        assert_relative_eq!(z[0], 3.0);
        assert_relative_eq!(z[1], 1.7);
        assert_relative_eq!(z[2], -0.05);
        assert_relative_eq!(z[3], 0.1);
    }

    #[test]
    fn bounds_from_straight_line_are_degenerate() {
        let spec = PathSpec {
            start: Pose::new(0.0, 0.0, 0.0),
            end: Pose::new(1.0, 0.0, 0.0),
            d_i: 1.0 / 3.0,
            d_f: 1.0 / 3.0,
            total_time: 1.0,
        };
        let cp = polygon_from_spec(&spec).unwrap();
        let traj = reference_trajectory(&cp, 1.0, 101).unwrap();
        let err = compute_bounds(&traj, &ErrorBox::default());
        assert!(matches!(
            err,
            Err(WmrError::DegenerateZoning { variable: "z1", .. })
        ));
    }

    #[test]
    fn bounds_sinc_monotonicity() {
        // v in [1, 3] and heading box +-pi/2: f1 = 3, f2 = 2/pi.
        let spec = PathSpec {
            start: Pose::new(0.4, 0.7, -90f64.to_radians()),
            end: Pose::new(1.5, 0.7, -90f64.to_radians()),
            d_i: 1.0,
            d_f: 1.0,
            total_time: 1.0,
        };
        let cp = polygon_from_spec(&spec).unwrap();
        let traj = reference_trajectory(&cp, 1.0, 501).unwrap();
        let (v_min, v_max, _, _) = crate::path::velocity_extrema(&traj);
        let b = compute_bounds(&traj, &ErrorBox::default()).unwrap();
        assert_relative_eq!(b.z2.upper, v_max, epsilon = 1e-12);
        assert_relative_eq!(
            b.z2.lower,
            v_min * 2.0 / std::f64::consts::PI,
            epsilon = 1e-12
        );
        // Error-box variables come straight from the box.
        assert_relative_eq!(b.z3.upper, 0.2);
        assert_relative_eq!(b.z3.lower, -0.2);
        assert_relative_eq!(b.z4.upper, 0.2);
        assert_relative_eq!(b.z4.lower, -0.2);
    }

    #[test]
    fn grade_boundaries_and_midpoint() {
        let b = demo_bounds();
        let g = membership_grades(&[5.0, 0.7, 0.0, 0.0], &b);
        assert_relative_eq!(g[0].0, 1.0);
        assert_relative_eq!(g[0].1, 0.0);
        assert_relative_eq!(g[1].0, 0.0);
        assert_relative_eq!(g[1].1, 1.0);
        let g = membership_grades(&[1.0, 1.85, 0.0, 0.0], &b);
        assert_relative_eq!(g[0].0, 0.5);
        assert_relative_eq!(g[0].1, 0.5);
        assert_relative_eq!(g[1].0, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rule_corner_displays() {
        let b = demo_bounds();
        let model = build_rules(b, ErrorBox::default()).unwrap();
        // Rule 1: all upper bounds.
        let r1 = &model.rules[0];
        let (a, bm) = corner_matrices(5.0, 3.0, 0.2, 0.2);
        assert_eq!(r1.a, a);
        assert_eq!(r1.b, bm);
        // Rule 16: all lower bounds.
        let r16 = &model.rules[15];
        let (a, bm) = corner_matrices(-3.0, 0.7, -0.2, -0.2);
        assert_eq!(r16.a, a);
        assert_eq!(r16.b, bm);
        // All rules pairwise distinct.
        for i in 0..RULE_COUNT {
            for j in i + 1..RULE_COUNT {
                assert!(model.rules[i].a != model.rules[j].a || model.rules[i].b != model.rules[j].b);
            }
        }
    }

    #[test]
    fn degenerate_bounds_propagate() {
        let mut b = demo_bounds();
        b.z2 = VarBounds { upper: 1.0, lower: 1.0 };
        assert!(matches!(
            build_rules(b, ErrorBox::default()),
            Err(WmrError::DegenerateZoning { variable: "z2", .. })
        ));
    }

    #[test]
    fn corner_firing_is_one_hot() {
        let b = demo_bounds();
        let model = build_rules(b, ErrorBox::default()).unwrap();
        for code in 0..RULE_COUNT {
            let vars = b.vars();
            let z = [
                if code >> 3 & 1 == 0 { vars[0].upper } else { vars[0].lower },
                if code >> 2 & 1 == 0 { vars[1].upper } else { vars[1].lower },
                if code >> 1 & 1 == 0 { vars[2].upper } else { vars[2].lower },
                if code & 1 == 0 { vars[3].upper } else { vars[3].lower },
            ];
            let fs = firing_strengths(&membership_grades(&z, &b)).unwrap();
            for (i, hi) in fs.h.iter().enumerate() {
                if i == code {
                    assert_relative_eq!(*hi, 1.0, epsilon = 1e-12);
                } else {
                    assert_relative_eq!(*hi, 0.0, epsilon = 1e-12);
                }
            }
            let (a, bm) = blended_matrices(&fs.h, &model);
            assert_relative_eq!((a - model.rules[code].a).norm(), 0.0, epsilon = 1e-12);
            assert_relative_eq!((bm - model.rules[code].b).norm(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_grades_give_uniform_firing() {
        let g = [(0.5, 0.5); 4];
        let fs = firing_strengths(&g).unwrap();
        for hi in fs.h {
            assert_relative_eq!(hi, 1.0 / 16.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pdc_control_examples() {
        let gains: Vec<Matrix2x3<f64>> =
            (0..RULE_COUNT).map(|_| Matrix2x3::new(1.0, 0.0, 0.5, 0.0, 2.0, 1.0)).collect();
        let q = VelocityCommand::new(1.5, 0.3);
        let e = TrackingError::new(0.0, 0.0, 0.0);
        let h = [1.0 / 16.0; RULE_COUNT];
        let cmd = pdc_control(&e, &h, &gains, &q);
        assert_relative_eq!(cmd.v, 1.5);
        assert_relative_eq!(cmd.omega, 0.3);

        // All gains equal: u_B = -F e regardless of h.
        let e = TrackingError::new(0.1, -0.05, 0.2);
        let mut h = [0.0; RULE_COUNT];
        h[3] = 0.25;
        h[7] = 0.75;
        let cmd = pdc_control(&e, &h, &gains, &q);
        let u = -(gains[0] * e.as_vector());
        assert_relative_eq!(cmd.v, 1.5 * 0.2f64.cos() + u.x, epsilon = 1e-14);
        assert_relative_eq!(cmd.omega, 0.3 + u.y, epsilon = 1e-14);
    }

    proptest! {
        #[test]
        fn prop_partition_of_unity(
            z1 in -3.0..5.0f64, z2 in 0.7..3.0f64,
            z3 in -0.2..0.2f64, z4 in -0.2..0.2f64
        ) {
            let fs = firing_strengths(&membership_grades(&[z1, z2, z3, z4], &demo_bounds())).unwrap();
            let sum: f64 = fs.h.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(fs.h.iter().all(|&h| h >= 0.0));
        }

        #[test]
        fn prop_blend_is_exact(
            omega_r in -3.0..5.0f64,
            v_r in 0.8..2.9f64,
            ex in -0.2..0.2f64, ey in -0.2..0.2f64,
            et in -1.5..1.5f64
        ) {
            // Sector-of-nonlinearity exactness over the box.
            let b = demo_bounds();
            let model = build_rules(b, ErrorBox::default()).unwrap();
            let e = TrackingError::new(ex, ey, et);
            let z = linguistic_values(&e, v_r, omega_r);
            prop_assume!(z[1] >= b.z2.lower && z[1] <= b.z2.upper);
            let fs = firing_strengths(&membership_grades(&z, &b)).unwrap();
            let (a_blend, b_blend) = blended_matrices(&fs.h, &model);
            let (a_true, b_true) = nonlinear_matrices(&z);
            prop_assert!((a_blend - a_true).amax() <= 1e-10);
            prop_assert!((b_blend - b_true).amax() <= 1e-10);
            prop_assert!((b_blend[(0, 1)] - z[2]).abs() <= 1e-10);
            prop_assert!((b_blend[(1, 1)] + z[3]).abs() <= 1e-10);
        }
    }
}
