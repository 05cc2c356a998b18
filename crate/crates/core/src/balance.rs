//! Zero-moment-point / zero-moment-line math and the two balance rewards.
//!
//! The ZMP at plane height z follows from the Newton-Euler balance of the
//! whole body: gravity and the momentum rates determine the point where the
//! horizontal moment components vanish. Evaluating it at different heights
//! traces a line (the ZML). Dynamic balance is scored by the horizontal
//! distance between the support center and that line.

use nalgebra::{Unit, Vector2, Vector3};
use thiserror::Error;

use crate::dynamics::{MomentumState, GRAVITY};

/// Length scale of the ZMP-distance reward (m).
pub const ZMP_REWARD_SCALE: f64 = 0.05;
/// Scale of the angular-momentum reward (kg·m^2/s).
pub const ANGULAR_MOMENTUM_REWARD_SCALE: f64 = 5.0;
/// Foot force norm above which a foot counts as supporting. Strictly
/// positive in the defining equation; penalty contact produces micro-forces,
/// so a 1 N threshold rejects solver jitter.
pub const CONTACT_FORCE_THRESHOLD: f64 = 1.0;
/// Default smoothing constant of the support-center weights.
pub const DEFAULT_SUPPORT_EPSILON: f64 = 1e-6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BalanceError {
    /// |M g + P_dot_z| fell below 1e-6 Mg (near free fall); the caller marks
    /// the ZML degenerate.
    #[error("degenerate ZMP denominator (near free fall)")]
    DegenerateDenominator,
    /// Distance queried against a degenerate ZML; the caller substitutes the
    /// configured flight-phase behavior.
    #[error("degenerate zero-moment line")]
    DegenerateZml,
}

/// Horizontal ZMP coordinates at plane height `z`.
///
/// `p_x = (M g c_x + z P_dot_x - L_dot_y) / (M g + P_dot_z)`
/// `p_y = (M g c_y + z P_dot_y + L_dot_x) / (M g + P_dot_z)`
pub fn zmp_at_height(
    mass: f64,
    com: &Vector3<f64>,
    p_dot: &Vector3<f64>,
    l_dot: &Vector3<f64>,
    z: f64,
) -> Result<Vector2<f64>, BalanceError> {
    let mg = mass * GRAVITY;
    let denom = mg + p_dot.z;
    if denom.abs() <= 1e-6 * mg {
        return Err(BalanceError::DegenerateDenominator);
    }
    if *p_dot == Vector3::zeros() && *l_dot == Vector3::zeros() {
        // Static reduction is exact: the ZMP is the CoM projection.
        return Ok(Vector2::new(com.x, com.y));
    }
    Ok(Vector2::new(
        (mg * com.x + z * p_dot.x - l_dot.y) / denom,
        (mg * com.y + z * p_dot.y + l_dot.x) / denom,
    ))
}

/// The line of ZMPs across plane heights.
#[derive(Debug, Clone)]
pub struct ZmlLine {
    /// ZMP evaluated at height z = 0.
    pub anchor: Vector3<f64>,
    /// Unit direction of the line (dz > 0).
    pub direction: Unit<Vector3<f64>>,
    /// Set when the denominator is near zero; anchor and direction are then
    /// placeholders.
    pub degenerate: bool,
}

impl ZmlLine {
    /// True when the line has no horizontal component (static and
    /// zero-linear-rate cases).
    pub fn is_vertical(&self) -> bool {
        let d = self.direction.into_inner();
        d.x == 0.0 && d.y == 0.0
    }

    /// Point on the line at plane height `z`.
    pub fn at_height(&self, z: f64) -> Vector3<f64> {
        let d = self.direction.into_inner();
        self.anchor + d * (z / d.z)
    }
}

/// Fit the ZML from a momentum summary (rates included). The ZMP is affine
/// in the query height, so the anchor at z = 0 plus the per-height slope
/// determine the whole line; at zero linear momentum rate the line is
/// vertical, and with zero rates it passes through the CoM projection.
pub fn compute_zml(momentum: &MomentumState) -> ZmlLine {
    let mg = momentum.mass * GRAVITY;
    match zmp_at_height(
        momentum.mass,
        &momentum.com,
        &momentum.p_dot,
        &momentum.l_dot,
        0.0,
    ) {
        Err(BalanceError::DegenerateDenominator) | Err(BalanceError::DegenerateZml) => ZmlLine {
            anchor: Vector3::new(momentum.com.x, momentum.com.y, 0.0),
            direction: Unit::new_unchecked(Vector3::z()),
            degenerate: true,
        },
        Ok(p0) => {
            let denom = mg + momentum.p_dot.z;
            let slope = Vector3::new(momentum.p_dot.x / denom, momentum.p_dot.y / denom, 1.0);
            ZmlLine {
                anchor: Vector3::new(p0.x, p0.y, 0.0),
                direction: Unit::new_normalize(slope),
                degenerate: false,
            }
        }
    }
}

/// Approximate center of the support polygon.
#[derive(Debug, Clone)]
pub struct SupportCenter {
    pub pos: Vector3<f64>,
    /// Number of supporting feet (0, 1 or 2).
    pub contact_count: u8,
    pub epsilon: f64,
}

/// Weighted center of the supporting feet:
/// `p = (p_L (c_L + eps) + p_R (c_R + eps)) / (c_L + c_R + 2 eps)` with
/// `c = 1[|f| > threshold]`. Both feet airborne degrades to the midpoint.
pub fn support_center(
    left_sole: &Vector3<f64>,
    right_sole: &Vector3<f64>,
    left_force: &Vector3<f64>,
    right_force: &Vector3<f64>,
    epsilon: f64,
) -> SupportCenter {
    assert!(epsilon > 0.0, "support epsilon must be positive");
    let c_l = if left_force.norm() > CONTACT_FORCE_THRESHOLD {
        1.0
    } else {
        0.0
    };
    let c_r = if right_force.norm() > CONTACT_FORCE_THRESHOLD {
        1.0
    } else {
        0.0
    };
    let denom = c_l + c_r + 2.0 * epsilon;
    let pos = (left_sole * (c_l + epsilon) + right_sole * (c_r + epsilon)) / denom;
    SupportCenter {
        pos,
        contact_count: (c_l + c_r) as u8,
        epsilon,
    }
}

/// Horizontal distance between the support center and the ZML: the 2-D
/// distance from the projected point to the projected line (a point when the
/// line is vertical).
pub fn zmp_distance(csp: &SupportCenter, zml: &ZmlLine) -> Result<f64, BalanceError> {
    if zml.degenerate {
        return Err(BalanceError::DegenerateZml);
    }
    let p = Vector2::new(csp.pos.x, csp.pos.y);
    let a = Vector2::new(zml.anchor.x, zml.anchor.y);
    let d = zml.direction.into_inner();
    let d_xy = Vector2::new(d.x, d.y);
    let n = d_xy.norm();
    if n < 1e-12 {
        Ok((p - a).norm())
    } else {
        let u = d_xy / n;
        let r = p - a;
        Ok((r.x * u.y - r.y * u.x).abs())
    }
}

/// `r_zmp = exp(-distance / 0.05)`, in (0, 1], strictly decreasing.
pub fn reward_zmp(distance: f64) -> f64 {
    debug_assert!(distance >= 0.0);
    (-distance / ZMP_REWARD_SCALE).exp()
}

/// `r_AM = exp(-|L_base| / 5)`, in (0, 1], strictly decreasing.
pub fn reward_angular_momentum(l_base: &Vector3<f64>) -> f64 {
    (-l_base.norm() / ANGULAR_MOMENTUM_REWARD_SCALE).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn momentum(
        mass: f64,
        com: Vector3<f64>,
        p_dot: Vector3<f64>,
        l_dot: Vector3<f64>,
    ) -> MomentumState {
        MomentumState {
            mass,
            com,
            linear: Vector3::zeros(),
            angular_origin: Vector3::zeros(),
            angular_base: Vector3::zeros(),
            p_dot,
            l_dot,
        }
    }

    #[test]
    fn static_zmp_is_com_projection() {
        let com = Vector3::new(0.1, 0.2, 1.0);
        for z in [0.0, 0.3, 1.7] {
            let p = zmp_at_height(55.0, &com, &Vector3::zeros(), &Vector3::zeros(), z).unwrap();
            assert_eq!(p, Vector2::new(0.1, 0.2));
        }
    }

    #[test]
    fn zmp_direct_substitution_example() {
        let p = zmp_at_height(
            50.0,
            &Vector3::new(0.0, 0.0, 1.0),
            &Vector3::zeros(),
            &Vector3::new(0.0, 49.05, 0.0),
            0.0,
        )
        .unwrap();
        assert!((p.x - (-0.1)).abs() < 1e-12);
        assert!(p.y.abs() < 1e-12);
    }

    #[test]
    fn zmp_satisfies_moment_balance() {
        use rand::Rng;
        let mut rng = crate::rng::stream(5, 0);
        for _ in 0..200 {
            let mass = rng.gen_range(20.0..80.0);
            let com = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..1.5),
            );
            let p_dot = Vector3::new(
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-0.5 * mass * GRAVITY..2.0 * mass * GRAVITY),
            );
            let l_dot = Vector3::new(
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-200.0..200.0),
                rng.gen_range(-200.0..200.0),
            );
            let z = rng.gen_range(-0.5..1.5);
            let p = zmp_at_height(mass, &com, &p_dot, &l_dot, z).unwrap();
            let residual = moment_about(&Vector3::new(p.x, p.y, z), mass, &com, &p_dot, &l_dot);
            assert!(residual.x.abs() < 1e-9, "residual {residual:?}");
            assert!(residual.y.abs() < 1e-9, "residual {residual:?}");
        }
    }

    /// Independent reconstruction: ground reaction from the Newton-Euler
    /// balance, then the moment of that force about `point`.
    fn moment_about(
        point: &Vector3<f64>,
        mass: f64,
        com: &Vector3<f64>,
        p_dot: &Vector3<f64>,
        l_dot: &Vector3<f64>,
    ) -> Vector3<f64> {
        let g_vec = Vector3::new(0.0, 0.0, -GRAVITY);
        let f = p_dot - mass * g_vec;
        let tau = l_dot - com.cross(&(mass * g_vec));
        tau - point.cross(&f)
    }

    #[test]
    fn zml_points_are_collinear_across_heights() {
        use rand::Rng;
        let mut rng = crate::rng::stream(6, 0);
        for _ in 0..200 {
            let mass = rng.gen_range(20.0..80.0);
            let com = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(0.5..1.5),
            );
            let p_dot = Vector3::new(
                rng.gen_range(-150.0..150.0),
                rng.gen_range(-150.0..150.0),
                rng.gen_range(-0.5 * mass * GRAVITY..mass * GRAVITY),
            );
            let l_dot = Vector3::new(
                rng.gen_range(-150.0..150.0),
                rng.gen_range(-150.0..150.0),
                rng.gen_range(-150.0..150.0),
            );
            let m = momentum(mass, com, p_dot, l_dot);
            let zml = compute_zml(&m);
            assert!(!zml.degenerate);
            for z in [0.0, 0.25, 0.5, 0.75, 1.0] {
                let p = zmp_at_height(mass, &com, &p_dot, &l_dot, z).unwrap();
                let on_line = zml.at_height(z);
                let err = (Vector2::new(on_line.x, on_line.y) - p).norm();
                assert!(err < 1e-9, "height {z}: off line by {err}");
            }
        }
    }

    #[test]
    fn static_zml_is_vertical_through_com() {
        let com = Vector3::new(0.37, -0.12, 0.9);
        let m = momentum(45.0, com, Vector3::zeros(), Vector3::zeros());
        let zml = compute_zml(&m);
        assert!(!zml.degenerate);
        assert!(zml.is_vertical());
        assert_eq!(zml.anchor.x, com.x);
        assert_eq!(zml.anchor.y, com.y);
    }

    #[test]
    fn free_fall_marks_degenerate() {
        let mass = 45.0;
        let m = momentum(
            mass,
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.0, 0.0, -mass * GRAVITY),
            Vector3::zeros(),
        );
        assert!(compute_zml(&m).degenerate);
    }

    #[test]
    fn support_center_double_support_is_midpoint() {
        let l = Vector3::new(0.0, 0.1, 0.0);
        let r = Vector3::new(0.0, -0.1, 0.0);
        let f = Vector3::new(0.0, 0.0, 200.0);
        let c = support_center(&l, &r, &f, &f, DEFAULT_SUPPORT_EPSILON);
        assert_eq!(c.contact_count, 2);
        assert!((c.pos - Vector3::zeros()).norm() < 1e-9);
    }

    #[test]
    fn support_center_single_support_sticks_to_stance_foot() {
        let l = Vector3::new(0.2, 0.1, 0.0);
        let r = Vector3::new(-0.1, -0.1, 0.05);
        let c = support_center(
            &l,
            &r,
            &Vector3::new(0.0, 0.0, 300.0),
            &Vector3::zeros(),
            DEFAULT_SUPPORT_EPSILON,
        );
        assert_eq!(c.contact_count, 1);
        assert!((c.pos - l).norm() < 1e-5 * (r - l).norm());
    }

    #[test]
    fn support_center_airborne_is_midpoint() {
        let l = Vector3::new(0.3, 0.1, 0.2);
        let r = Vector3::new(-0.1, -0.2, 0.1);
        let c = support_center(&l, &r, &Vector3::zeros(), &Vector3::zeros(), 1e-6);
        assert_eq!(c.contact_count, 0);
        assert!((c.pos - (l + r) / 2.0).norm() < 1e-12);
    }

    #[test]
    fn distance_to_vertical_line_is_planar_euclidean() {
        let zml = ZmlLine {
            anchor: Vector3::zeros(),
            direction: Unit::new_unchecked(Vector3::z()),
            degenerate: false,
        };
        let csp = SupportCenter {
            pos: Vector3::new(0.03, 0.04, 0.0),
            contact_count: 2,
            epsilon: 1e-6,
        };
        assert!((zmp_distance(&csp, &zml).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn point_on_line_has_zero_distance() {
        let m = momentum(
            50.0,
            Vector3::new(0.2, -0.1, 1.0),
            Vector3::new(30.0, -20.0, 10.0),
            Vector3::new(5.0, 12.0, 0.0),
        );
        let zml = compute_zml(&m);
        let on = zml.at_height(0.4);
        let csp = SupportCenter {
            pos: on,
            contact_count: 2,
            epsilon: 1e-6,
        };
        assert!(zmp_distance(&csp, &zml).unwrap() < 1e-12);
    }

    #[test]
    fn slanted_line_distance_matches_sampling_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::stream(7, 0);
        for _ in 0..50 {
            let m = momentum(
                rng.gen_range(30.0..70.0),
                Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 1.0),
                Vector3::new(
                    rng.gen_range(-150.0..150.0),
                    rng.gen_range(-150.0..150.0),
                    rng.gen_range(-100.0..100.0),
                ),
                Vector3::new(
                    rng.gen_range(-100.0..100.0),
                    rng.gen_range(-100.0..100.0),
                    0.0,
                ),
            );
            let zml = compute_zml(&m);
            if zml.is_vertical() {
                continue;
            }
            let csp = SupportCenter {
                pos: Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0),
                contact_count: 2,
                epsilon: 1e-6,
            };
            let dist = zmp_distance(&csp, &zml).unwrap();
            if dist < 1e-2 {
                continue; // keep the sampling oracle well-conditioned
            }
            // Dense parametric sweep over the projected line, refined in
            // three stages down to a 1e-8 parameter grid.
            let p = Vector2::new(csp.pos.x, csp.pos.y);
            let a = Vector2::new(zml.anchor.x, zml.anchor.y);
            let d = zml.direction.into_inner();
            let u = Vector2::new(d.x, d.y).normalize();
            let sweep = |center: f64, half: f64, step: f64| {
                let mut best = (f64::INFINITY, center);
                let mut t = center - half;
                while t <= center + half {
                    let dd = (a + u * t - p).norm();
                    if dd < best.0 {
                        best = (dd, t);
                    }
                    t += step;
                }
                best
            };
            let (_, t1) = sweep(0.0, 50.0, 1e-2);
            let (_, t2) = sweep(t1, 2e-2, 1e-5);
            let (best, _) = sweep(t2, 2e-5, 1e-8);
            assert!(
                (dist - best).abs() < 1e-9,
                "analytic {dist} vs sampled {best}"
            );
        }
    }

    #[test]
    fn reward_values_at_reference_points() {
        assert_eq!(reward_zmp(0.0), 1.0);
        assert!((reward_zmp(0.05) - (-1.0f64).exp()).abs() < 1e-12);
        assert!((reward_zmp(0.5) - (-10.0f64).exp()).abs() < 1e-12);
        assert_eq!(reward_angular_momentum(&Vector3::zeros()), 1.0);
        assert!(
            (reward_angular_momentum(&Vector3::new(0.0, 5.0, 0.0)) - (-1.0f64).exp()).abs()
                < 1e-12
        );
        assert!(
            (reward_angular_momentum(&Vector3::new(0.0, 0.0, 50.0)) - (-10.0f64).exp()).abs()
                < 1e-15
        );
    }

    proptest! {
        #[test]
        fn rewards_are_bounded_and_monotone(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let (r1, r2) = (reward_zmp(d1), reward_zmp(d2));
            prop_assert!(r1 > 0.0 && r1 <= 1.0);
            prop_assert!((r1 == 1.0) == (d1 == 0.0));
            if d1 < d2 {
                prop_assert!(r1 > r2);
            }
        }

        #[test]
        fn support_center_is_convex_combination(
            ly in -1.0f64..1.0, ry in -1.0f64..1.0,
            fl in 0.0f64..500.0, fr in 0.0f64..500.0,
        ) {
            let l = Vector3::new(0.0, ly, 0.0);
            let r = Vector3::new(1.0, ry, 0.0);
            let c = support_center(
                &l, &r,
                &Vector3::new(0.0, 0.0, fl),
                &Vector3::new(0.0, 0.0, fr),
                DEFAULT_SUPPORT_EPSILON,
            );
            // x coordinate doubles as the interpolation parameter.
            prop_assert!(c.pos.x >= -1e-12 && c.pos.x <= 1.0 + 1e-12);
            let t = c.pos.x;
            let expect_y = l.y * (1.0 - t) + r.y * t;
            prop_assert!((c.pos.y - expect_y).abs() < 1e-9);
        }
    }
}
