//! Lumped-fluid model of a double-acting cylinder fed by a closed-center 4/3 valve.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BAR: f64 = 1e5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrictionSpec {
    pub coulomb_force: f64,
    pub static_force: f64,
    pub viscous_coeff: f64,
    pub stribeck_velocity: f64,
    pub smoothing_velocity: f64,
}

impl Default for FrictionSpec {
    fn default() -> Self {
        Self {
            coulomb_force: 200.0,
            static_force: 300.0,
            // lumped damping of valve, lines and seals
            viscous_coeff: 2.5e5,
            stribeck_velocity: 0.02,
            smoothing_velocity: 0.01,
        }
    }
}

impl FrictionSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.coulomb_force,
            self.static_force,
            self.viscous_coeff,
            self.stribeck_velocity,
            self.smoothing_velocity,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("friction parameters must be finite and >= 0".into()));
        }
        if self.static_force < self.coulomb_force {
            return Err(Error::InvalidParameter("static friction must be >= Coulomb friction".into()));
        }
        if self.smoothing_velocity <= 0.0 || self.stribeck_velocity <= 0.0 {
            return Err(Error::InvalidParameter(
                "smoothing and Stribeck velocities must be > 0".into(),
            ));
        }
        Ok(())
    }
}

/// A compliant volume hydraulically connected to a chamber (hose, accumulator, ...).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubVolume {
    pub volume: f64,
    pub bulk_modulus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HydraulicSpec {
    pub pump_pressure: f64,
    pub tank_pressure: f64,
    pub bore_diameter: f64,
    pub rod_diameter: f64,
    /// Retracted pin-to-pin length.
    pub cylinder_length: f64,
    pub stroke: f64,
    pub oil_bulk_modulus: f64,
    /// Orifice coefficient, m^3 / (s sqrt(Pa)).
    pub valve_coeff: f64,
    /// Pressure drop below which the square-root orifice law is rounded off, Pa.
    /// Zero selects the bare `sgn(dp) sqrt|dp|` law.
    pub orifice_transition: f64,
    /// Dead volume of chamber 1 and chamber 2.
    pub dead_volumes: [f64; 2],
    pub sub_volumes: Vec<SubVolume>,
    pub friction: FrictionSpec,
}

/// Dead volume as a fraction of each chamber's full-stroke volume.
pub const DEFAULT_DEAD_FRACTION: f64 = 0.05;

impl Default for HydraulicSpec {
    fn default() -> Self {
        let mut spec = Self {
            pump_pressure: 140.0 * BAR,
            tank_pressure: 1.0 * BAR,
            bore_diameter: 0.100,
            rod_diameter: 0.056,
            cylinder_length: 0.535,
            stroke: 0.820,
            oil_bulk_modulus: 1.5e9,
            // full-open extension at ~0.1 m/s mid-stroke with no load
            valve_coeff: 2.42e-7,
            orifice_transition: 1e4,
            dead_volumes: [0.0; 2],
            sub_volumes: Vec::new(),
            friction: FrictionSpec::default(),
        };
        spec.dead_volumes = spec.default_dead_volumes();
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ChamberState {
    pub p1: f64,
    pub p2: f64,
}

impl HydraulicSpec {
    pub fn piston_area(&self) -> f64 {
        std::f64::consts::PI * self.bore_diameter * self.bore_diameter / 4.0
    }

    pub fn annulus_area(&self) -> f64 {
        self.piston_area() - std::f64::consts::PI * self.rod_diameter * self.rod_diameter / 4.0
    }

    pub fn min_length(&self) -> f64 {
        self.cylinder_length
    }

    pub fn max_length(&self) -> f64 {
        self.cylinder_length + self.stroke
    }

    pub fn default_dead_volumes(&self) -> [f64; 2] {
        [
            DEFAULT_DEAD_FRACTION * self.piston_area() * self.stroke,
            DEFAULT_DEAD_FRACTION * self.annulus_area() * self.stroke,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pump_pressure", self.pump_pressure),
            ("bore_diameter", self.bore_diameter),
            ("rod_diameter", self.rod_diameter),
            ("cylinder_length", self.cylinder_length),
            ("stroke", self.stroke),
            ("oil_bulk_modulus", self.oil_bulk_modulus),
            ("valve_coeff", self.valve_coeff),
            ("dead_volume_1", self.dead_volumes[0]),
            ("dead_volume_2", self.dead_volumes[1]),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidParameter(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if !self.orifice_transition.is_finite() || self.orifice_transition < 0.0 {
            return Err(Error::InvalidParameter("orifice transition pressure must be >= 0".into()));
        }
        if !self.tank_pressure.is_finite() || self.tank_pressure < 0.0 || self.tank_pressure >= self.pump_pressure {
            return Err(Error::InvalidParameter("tank pressure must lie in [0, pump pressure)".into()));
        }
        if self.rod_diameter >= self.bore_diameter {
            return Err(Error::InvalidParameter("rod must be thinner than the bore".into()));
        }
        for sv in &self.sub_volumes {
            if !(sv.volume > 0.0 && sv.bulk_modulus > 0.0) {
                return Err(Error::InvalidParameter("sub-volumes need positive volume and bulk modulus".into()));
            }
        }
        self.friction.validate()
    }

    /// Chamber volumes at actuator length `s`.
    pub fn chamber_volumes(&self, s: f64) -> Result<(f64, f64)> {
        let v1 = self.dead_volumes[0] + self.piston_area() * (s - self.min_length());
        let v2 = self.dead_volumes[1] + self.annulus_area() * (self.max_length() - s);
        if !(v1 > 0.0 && v2 > 0.0) {
            return Err(Error::Geometry(format!(
                "non-positive chamber volume at s = {s:.4} m (V1 = {v1:.3e}, V2 = {v2:.3e})"
            )));
        }
        Ok((v1, v2))
    }
}

/// Oil stiffness softened by connected sub-volumes.
pub fn effective_bulk_modulus(spec: &HydraulicSpec, chamber_volume: f64) -> Result<f64> {
    if !(chamber_volume > 0.0) {
        return Err(Error::InvalidParameter(format!("chamber volume must be > 0, got {chamber_volume}")));
    }
    if !(spec.oil_bulk_modulus > 0.0) {
        return Err(Error::InvalidParameter("oil bulk modulus must be > 0".into()));
    }
    let mut compliance = 1.0 / spec.oil_bulk_modulus;
    for sv in &spec.sub_volumes {
        if !(sv.volume > 0.0 && sv.bulk_modulus > 0.0) {
            return Err(Error::InvalidParameter("sub-volumes need positive volume and bulk modulus".into()));
        }
        compliance += sv.volume / (chamber_volume * sv.bulk_modulus);
    }
    Ok(1.0 / compliance)
}

/// `coeff * dp / (dp^2 + p_tr^2)^(1/4)`: the turbulent law for `|dp| >> p_tr`, smooth through zero.
fn orifice(coeff: f64, dp: f64, p_tr: f64) -> f64 {
    if p_tr == 0.0 {
        coeff * dp.signum() * dp.abs().sqrt()
    } else {
        coeff * dp / (dp * dp + p_tr * p_tr).sqrt().sqrt()
    }
}

/// Valve flows, positive into each chamber. The flag reports a clamped `|U| > 1`.
pub fn valve_flow(u: f64, state: ChamberState, spec: &HydraulicSpec) -> (f64, f64, bool) {
    let clamped = u.abs() > 1.0;
    let u = u.clamp(-1.0, 1.0);
    let cv = spec.valve_coeff;
    let (pp, pt, tr) = (spec.pump_pressure, spec.tank_pressure, spec.orifice_transition);
    if u > 0.0 {
        (orifice(cv * u, pp - state.p1, tr), -orifice(cv * u, state.p2 - pt, tr), clamped)
    } else if u < 0.0 {
        let a = -u;
        (-orifice(cv * a, state.p1 - pt, tr), orifice(cv * a, pp - state.p2, tr), clamped)
    } else {
        (0.0, 0.0, clamped)
    }
}

/// Pressure build-up in both chambers for actuator length `s` and rate `s_dot`.
pub fn pressure_rates(
    state: ChamberState,
    s: f64,
    s_dot: f64,
    u: f64,
    spec: &HydraulicSpec,
) -> Result<(f64, f64)> {
    let (v1, v2) = spec.chamber_volumes(s)?;
    let (q1, q2, _) = valve_flow(u, state, spec);
    let dv1 = spec.piston_area() * s_dot;
    let dv2 = -spec.annulus_area() * s_dot;
    let b1 = effective_bulk_modulus(spec, v1)?;
    let b2 = effective_bulk_modulus(spec, v2)?;
    Ok((b1 / v1 * (-dv1 + q1), b2 / v2 * (-dv2 + q2)))
}

/// Smooth Stribeck friction, odd in the velocity.
pub fn friction_force(s_dot: f64, spec: &FrictionSpec) -> f64 {
    let stribeck = (-(s_dot / spec.stribeck_velocity).powi(2)).exp();
    (4.0 * s_dot / spec.smoothing_velocity).tanh()
        * (spec.coulomb_force + (spec.static_force - spec.coulomb_force) * stribeck)
        + spec.viscous_coeff * s_dot
}

/// Net extending force of the cylinder.
pub fn cylinder_force(state: ChamberState, s_dot: f64, spec: &HydraulicSpec) -> f64 {
    state.p1 * spec.piston_area() - state.p2 * spec.annulus_area() - friction_force(s_dot, &spec.friction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn default_areas_follow_bore_and_rod() {
        let s = HydraulicSpec::default();
        assert!(rel(s.piston_area(), 7.853_981_633_974_483e-3) < 1e-12);
        assert!(s.piston_area() > s.annulus_area() && s.annulus_area() > 0.0);
        assert_eq!(s.max_length(), 0.535 + 0.820);
        s.validate().unwrap();
    }

    #[test]
    fn bulk_modulus_cases() {
        let mut s = HydraulicSpec::default();
        s.oil_bulk_modulus = 1.5e9;
        assert_eq!(effective_bulk_modulus(&s, 1e-3).unwrap(), 1.5e9);
        s.sub_volumes = vec![SubVolume { volume: 1e-3, bulk_modulus: 1.5e9 }];
        assert!(rel(effective_bulk_modulus(&s, 1e-3).unwrap(), 0.75e9) < 1e-12);
        s.sub_volumes = vec![SubVolume { volume: 1e-4, bulk_modulus: 1.5e8 }];
        assert!(rel(effective_bulk_modulus(&s, 1e-3).unwrap(), 7.5e8) < 1e-12);
        assert!(effective_bulk_modulus(&s, 0.0).is_err());
        s.sub_volumes = vec![SubVolume { volume: -1e-4, bulk_modulus: 1.5e8 }];
        assert!(effective_bulk_modulus(&s, 1e-3).is_err());
    }

    #[test]
    fn valve_closed_center_and_orifice_value() {
        let mut s = HydraulicSpec::default();
        let st = ChamberState { p1: 4e6, p2: 2e6 };
        assert_eq!(valve_flow(0.0, st, &s), (0.0, 0.0, false));
        s.valve_coeff = 1e-8;
        s.orifice_transition = 0.0;
        let (q1, q2, _) = valve_flow(1.0, st, &s);
        assert!(rel(q1, 3.162_277_660_168_379_5e-5) < 1e-12);
        // rounding off the root only matters near zero pressure drop
        s.orifice_transition = 1e4;
        assert!(rel(valve_flow(1.0, st, &s).0, 3.162_277_660_168_379_5e-5) < 1e-6);
        let near = ChamberState { p1: s.pump_pressure - 1.0, p2: 2e6 };
        let slope = valve_flow(1.0, near, &s).0;
        assert!(slope > 0.0 && slope < s.valve_coeff / 100.0 * 1.01);
        assert!(q2 < 0.0);
        let (_, _, flagged) = valve_flow(1.3, st, &s);
        assert!(flagged);
        assert_eq!(valve_flow(1.3, st, &s).0, valve_flow(1.0, st, &s).0);
    }

    #[test]
    fn locked_piston_closed_valve_holds_pressure() {
        let s = HydraulicSpec::default();
        let st = ChamberState { p1: 3e6, p2: 1e6 };
        assert_eq!(pressure_rates(st, 1.0, 0.0, 0.0, &s).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn extension_with_closed_valve_expands_one_compresses_two() {
        let s = HydraulicSpec::default();
        let st = ChamberState { p1: 3e6, p2: 1e6 };
        let (d1, d2) = pressure_rates(st, 1.0, 0.05, 0.0, &s).unwrap();
        assert!(d1 < 0.0 && d2 > 0.0);
    }

    #[test]
    fn pressure_rate_hand_value() {
        // V1 = 1e-3 m^3 with the default bore, B = 1.5 GPa, s_dot = 0.01 m/s
        let mut s = HydraulicSpec::default();
        s.dead_volumes[0] = 1e-3;
        let st = ChamberState { p1: 1e6, p2: 1e6 };
        let (d1, _) = pressure_rates(st, s.min_length(), 0.01, 0.0, &s).unwrap();
        assert!(rel(d1, -1.5e9 / 1e-3 * s.piston_area() * 0.01) < 1e-12);
        assert!(rel(d1, -1.178e8) < 1e-3);
    }

    #[test]
    fn geometry_error_for_empty_chamber() {
        let s = HydraulicSpec::default();
        let st = ChamberState::default();
        assert!(matches!(pressure_rates(st, 0.0, 0.0, 0.0, &s), Err(Error::Geometry(_))));
    }

    #[test]
    fn cylinder_force_cases() {
        let s = HydraulicSpec::default();
        assert_eq!(cylinder_force(ChamberState::default(), 0.0, &s), 0.0);
        let f = cylinder_force(ChamberState { p1: 1.4e7, p2: 0.0 }, 0.0, &s);
        assert!(rel(f, 1.0996e5) < 1e-4);
        let p = 5e6;
        let rod = std::f64::consts::PI * 0.056 * 0.056 / 4.0;
        let f = cylinder_force(ChamberState { p1: p, p2: p }, 0.03, &s);
        assert!(rel(f, p * rod - friction_force(0.03, &s.friction)) < 1e-12);
    }

    #[test]
    fn friction_limits() {
        let f = FrictionSpec::default();
        assert_eq!(friction_force(0.0, &f), 0.0);
        let v = 2.0;
        assert!(rel(friction_force(v, &f), f.coulomb_force + f.viscous_coeff * v) < 0.01);
        let mut bad = f;
        bad.static_force = 100.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_valve_gives_tenth_meter_per_second() {
        // steady no-load extension: p1 A1 = p2 A2 and both orifices carry the piston flow
        let s = HydraulicSpec::default();
        let (a1, a2) = (s.piston_area(), s.annulus_area());
        let speed = |p1: f64| {
            let p2 = p1 * a1 / a2;
            (s.valve_coeff * (s.pump_pressure - p1).sqrt() / a1, s.valve_coeff * (p2 - s.tank_pressure).sqrt() / a2)
        };
        let (mut lo, mut hi) = (s.tank_pressure * a2 / a1 + 1.0, s.pump_pressure - 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let (v_in, v_out) = speed(mid);
            if v_in > v_out {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = speed(lo).0;
        assert!((v - 0.1).abs() < 1e-3, "{v}");
    }

    proptest! {
        #[test]
        fn friction_is_odd(v in -5.0f64..5.0) {
            let f = FrictionSpec::default();
            prop_assert_eq!(friction_force(-v, &f), -friction_force(v, &f));
        }

        #[test]
        fn friction_derivative_is_bounded(v in -0.5f64..0.5) {
            let f = FrictionSpec::default();
            let h = 1e-7;
            let d = (friction_force(v + h, &f) - friction_force(v - h, &f)) / (2.0 * h);
            prop_assert!(d.abs() <= 4.0 * f.static_force / f.smoothing_velocity + f.viscous_coeff);
        }

        #[test]
        fn valve_is_mirror_symmetric(u in -1.0f64..1.0, p1 in 0.0f64..2e7, p2 in 0.0f64..2e7) {
            let s = HydraulicSpec::default();
            let (q1, q2, _) = valve_flow(u, ChamberState { p1, p2 }, &s);
            let (m1, m2, _) = valve_flow(-u, ChamberState { p1: p2, p2: p1 }, &s);
            prop_assert!((q1 - m2).abs() <= 1e-18 + 1e-12 * q1.abs());
            prop_assert!((q2 - m1).abs() <= 1e-18 + 1e-12 * q2.abs());
        }

        #[test]
        fn valve_is_continuous_across_zero_pressure_drop(u in 0.01f64..1.0, eps in 0.0f64..1.0, bare in proptest::bool::ANY) {
            let mut s = HydraulicSpec::default();
            if bare {
                s.orifice_transition = 0.0;
            }
            let a = valve_flow(u, ChamberState { p1: s.pump_pressure - eps, p2: 1e6 }, &s).0;
            let b = valve_flow(u, ChamberState { p1: s.pump_pressure + eps, p2: 1e6 }, &s).0;
            prop_assert!((a - b).abs() <= 2.0 * s.valve_coeff * eps.sqrt() + 1e-18);
        }
    }
}
