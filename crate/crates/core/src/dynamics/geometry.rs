use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::InterfacePoints;

/// Fraction of the scaling length `l_cyl + l_pist` spanned by the actuator at the angle limits.
pub const SCALED_LENGTH_AT_MIN: f64 = 0.63;
pub const SCALED_LENGTH_AT_MAX: f64 = 0.88;

/// Joint at the origin, actuator anchored on the pillar at `anchor`, boom nodes at axial positions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub anchor: [f64; 2],
    pub points: InterfacePoints,
    pub theta_min: f64,
    pub theta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorKinematics {
    /// Pin-to-pin length.
    pub length: f64,
    /// ds / dtheta, the moment arm.
    pub rate: f64,
    /// Component of the actuator line direction normal to the boom axis.
    pub transverse: f64,
}

/// Soft margin on the angle range before a trajectory is flagged.
pub const ANGLE_MARGIN: f64 = 5.0 * std::f64::consts::PI / 180.0;

impl Geometry {
    /// Places the pillar anchor so that the actuator length is `s_lo` at `theta_min`
    /// and `s_hi` at `theta_max`.
    ///
    /// The anchor is parametrized in polar form around the joint. For a given polar
    /// angle the distance follows in closed form from the lower condition; the angle
    /// is then found by bisection on the upper condition, searching outward from
    /// straight below the joint.
    pub fn fitted(points: InterfacePoints, theta_min: f64, theta_max: f64, s_lo: f64, s_hi: f64) -> Result<Self> {
        if !(theta_min < theta_max && s_lo > 0.0 && s_lo < s_hi && points.actuator > 0.0) {
            return Err(Error::Geometry("inconsistent anchor fitting targets".into()));
        }
        let xa = points.actuator;
        let distance = |phi: f64| -> Option<f64> {
            let c = (theta_min - phi).cos();
            let disc = xa * xa * c * c + s_lo * s_lo - xa * xa;
            if disc < 0.0 {
                return None;
            }
            let d = xa * c + disc.sqrt();
            (d > 0.0).then_some(d)
        };
        let residual = |phi: f64| -> Option<f64> {
            let d = distance(phi)?;
            let s = (xa * xa + d * d - 2.0 * xa * d * (theta_max - phi).cos()).sqrt();
            Some(s - s_hi)
        };

        let start = -std::f64::consts::FRAC_PI_2;
        let step = 1e-3;
        let mut bracket = None;
        'search: for k in 0..3000 {
            for dir in [1.0, -1.0] {
                let a = start + dir * k as f64 * step;
                let b = a + dir * step;
                if let (Some(ra), Some(rb)) = (residual(a), residual(b)) {
                    if ra == 0.0 {
                        bracket = Some((a, a));
                        break 'search;
                    }
                    if ra.signum() != rb.signum() {
                        bracket = Some((a, b));
                        break 'search;
                    }
                }
            }
        }
        let (mut lo, mut hi) = bracket.ok_or_else(|| Error::Geometry("no anchor reproduces the length targets".into()))?;
        let r_lo = residual(lo).unwrap_or(0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            match residual(mid) {
                Some(r) if r.signum() == r_lo.signum() => lo = mid,
                Some(_) => hi = mid,
                None => break,
            }
        }
        let phi = 0.5 * (lo + hi);
        let d = distance(phi).ok_or_else(|| Error::Geometry("anchor fit left the feasible region".into()))?;
        let geom = Self {
            anchor: [d * phi.cos(), d * phi.sin()],
            points,
            theta_min,
            theta_max,
        };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.points;
        if !(0.0 < p.actuator && p.actuator < p.sensor && p.sensor <= p.payload) {
            return Err(Error::Geometry(format!(
                "node layout must satisfy 0 < x_a < x_s <= x_p, got {} / {} / {}",
                p.actuator, p.sensor, p.payload
            )));
        }
        if !(self.theta_min < self.theta_max) {
            return Err(Error::Geometry("theta_min must be below theta_max".into()));
        }
        // strictly monotonic actuator length over the working range
        let n = 200;
        for i in 0..=n {
            let th = self.theta_min + (self.theta_max - self.theta_min) * i as f64 / n as f64;
            if self.kinematics(th).rate <= 0.0 {
                return Err(Error::Geometry(format!(
                    "actuator length is not increasing at theta = {:.2} deg",
                    th.to_degrees()
                )));
            }
        }
        Ok(())
    }

    /// Rigid actuator kinematics; the flexible contribution to `s` is neglected.
    pub fn kinematics(&self, theta: f64) -> ActuatorKinematics {
        let (sin, cos) = theta.sin_cos();
        let xa = self.points.actuator;
        let r = [xa * cos, xa * sin];
        let d = [r[0] - self.anchor[0], r[1] - self.anchor[1]];
        let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let rate = (self.anchor[0] * r[1] - self.anchor[1] * r[0]) / length;
        let transverse = (-sin * d[0] + cos * d[1]) / length;
        ActuatorKinematics {
            length,
            rate,
            transverse,
        }
    }

    pub fn angle_in_soft_bounds(&self, theta: f64) -> bool {
        theta >= self.theta_min - ANGLE_MARGIN && theta <= self.theta_max + ANGLE_MARGIN
    }
}

/// `(s, ds/dtheta)` for the boom angle `theta`.
pub fn actuator_kinematics(theta: f64, geom: &Geometry) -> (f64, f64) {
    let k = geom.kinematics(theta);
    (k.length, k.rate)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fitted() -> Geometry {
        let ss = 1.355;
        Geometry::fitted(
            InterfacePoints::at_tip(2.5, 0.75),
            (-10f64).to_radians(),
            50f64.to_radians(),
            SCALED_LENGTH_AT_MIN * ss,
            SCALED_LENGTH_AT_MAX * ss,
        )
        .unwrap()
    }

    #[test]
    fn fitted_geometry_spans_scaled_length_range() {
        let g = fitted();
        let ss = 1.355;
        let (s_lo, _) = actuator_kinematics(g.theta_min, &g);
        let (s_hi, _) = actuator_kinematics(g.theta_max, &g);
        assert!((s_lo / ss - 0.63).abs() < 1e-9);
        assert!((s_hi / ss - 0.88).abs() < 1e-9);
        // anchor sits on the pillar below the joint
        assert!(g.anchor[1] < 0.0);
    }

    #[test]
    fn rate_matches_central_difference() {
        let g = fitted();
        for deg in [-10.0, 0.0, 17.0, 35.0, 50.0] {
            let th = f64::to_radians(deg);
            let h = 1e-6;
            let fd = (actuator_kinematics(th + h, &g).0 - actuator_kinematics(th - h, &g).0) / (2.0 * h);
            assert!((fd - actuator_kinematics(th, &g).1).abs() < 1e-9);
        }
    }

    #[test]
    fn colinear_anchor_has_zero_moment_arm() {
        // anchor on the boom axis line: joint, anchor and b2 colinear at theta = 0
        let g = Geometry {
            anchor: [-0.4, 0.0],
            points: InterfacePoints::at_tip(2.5, 0.75),
            theta_min: -0.2,
            theta_max: 0.8,
        };
        let (s, rate) = actuator_kinematics(0.0, &g);
        assert!((s - 1.15).abs() < 1e-12);
        assert!(rate.abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_layout() {
        let mut g = fitted();
        g.points.sensor = 0.5;
        assert!(g.validate().is_err());
    }
}
