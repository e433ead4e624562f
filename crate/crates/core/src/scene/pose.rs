//! Planar rigid poses. World frame is y-up with CCW-positive angles; the
//! render module owns the flip into row-down image coordinates.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A planar rigid pose (x, y, theta): meters and radians, theta in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Normalize an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

impl Pose2 {
    pub const IDENTITY: Pose2 = Pose2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    pub fn translation(x: f64, y: f64) -> Self {
        Pose2 { x, y, theta: 0.0 }
    }

    pub fn rotation(theta: f64) -> Self {
        Pose2::new(0.0, 0.0, theta)
    }

    /// `self` after `other`: (a.compose(b))(p) = a(b(p)).
    pub fn compose(&self, other: &Pose2) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2 {
            x: self.x + c * other.x - s * other.y,
            y: self.y + s * other.x + c * other.y,
            theta: wrap_angle(self.theta + other.theta),
        }
    }

    pub fn invert(&self) -> Pose2 {
        let (s, c) = self.theta.sin_cos();
        Pose2 {
            x: -(c * self.x + s * self.y),
            y: -(-s * self.x + c * self.y),
            theta: wrap_angle(-self.theta),
        }
    }

    /// Apply to a point: rotation then translation.
    pub fn apply(&self, pt: (f64, f64)) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (
            self.x + c * pt.0 - s * pt.1,
            self.y + s * pt.0 + c * pt.1,
        )
    }

    /// Componentwise distance to another pose (translation m, angle rad).
    pub fn delta(&self, other: &Pose2) -> (f64, f64) {
        let dt = ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt();
        (dt, wrap_angle(self.theta - other.theta).abs())
    }

    /// Bitwise equality of all three components.
    pub fn bits_eq(&self, other: &Pose2) -> bool {
        self.x.to_bits() == other.x.to_bits()
            && self.y.to_bits() == other.y.to_bits()
            && self.theta.to_bits() == other.theta.to_bits()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_apply() {
        assert_eq!(Pose2::IDENTITY.apply((0.1, 0.2)), (0.1, 0.2));
    }

    #[test]
    fn quarter_turn_ccw() {
        let p = Pose2::new(0.0, 0.0, FRAC_PI_2);
        let (x, y) = p.apply((1.0, 0.0));
        assert!((x - 0.0).abs() < 1e-12);
        assert!((y - 1.0).abs() < 1e-12);
    }

    #[test]
    fn compose_inverse_is_identity() {
        let p = Pose2::new(0.3, -0.7, 2.1);
        let id = p.compose(&p.invert());
        assert!(id.x.abs() < 1e-9 && id.y.abs() < 1e-9 && id.theta.abs() < 1e-9);
    }

    #[test]
    fn wrap_into_half_open_interval() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-9);
    }

    fn arb_pose() -> impl Strategy<Value = Pose2> {
        (
            -1.0f64..1.0,
            -1.0f64..1.0,
            -std::f64::consts::PI..std::f64::consts::PI,
        )
            .prop_map(|(x, y, t)| Pose2::new(x, y, t))
    }

    proptest! {
        #[test]
        fn group_laws(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
            // associativity
            let left = a.compose(&b).compose(&c);
            let right = a.compose(&b.compose(&c));
            prop_assert!((left.x - right.x).abs() < 1e-9);
            prop_assert!((left.y - right.y).abs() < 1e-9);
            prop_assert!(wrap_angle(left.theta - right.theta).abs() < 1e-9);
            // inverse round trip
            let id = a.compose(&a.invert());
            prop_assert!(id.x.abs() < 1e-9 && id.y.abs() < 1e-9 && id.theta.abs() < 1e-9);
            // apply agrees with compose on points
            let p = (0.37, -0.11);
            let via_compose = a.compose(&b).apply(p);
            let via_apply = a.apply(b.apply(p));
            prop_assert!((via_compose.0 - via_apply.0).abs() < 1e-9);
            prop_assert!((via_compose.1 - via_apply.1).abs() < 1e-9);
        }
    }
}
