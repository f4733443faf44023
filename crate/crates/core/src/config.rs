//! TOML configuration and assembly of the simulation models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    Actuation, BoomSystem, Geometry, Integrator, PayloadSpec, GRAVITY, SCALED_LENGTH_AT_MAX, SCALED_LENGTH_AT_MIN,
};
use crate::error::{Error, Result};
use crate::fem::{build_beam_model, modal_reduce, tune_first_mode, BeamSpec, InterfacePoints, ModalModel};
use crate::hydraulics::{FrictionSpec, HydraulicSpec, SubVolume, BAR};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FemConfig {
    pub length_m: f64,
    pub n_elements: usize,
    pub elastic_modulus_pa: f64,
    pub density_kgm3: f64,
    pub cross_area_m2: f64,
    pub second_moment_m4: f64,
    pub n_modes: usize,
    pub target_f1_hz: Option<f64>,
    pub rayleigh_alpha_per_s: f64,
    pub rayleigh_beta_s: f64,
    pub poisson_ratio: f64,
}

impl Default for FemConfig {
    fn default() -> Self {
        let b = BeamSpec::default();
        Self {
            length_m: b.length,
            n_elements: b.n_elements,
            elastic_modulus_pa: b.elastic_modulus,
            density_kgm3: b.density,
            cross_area_m2: b.cross_area,
            second_moment_m4: b.second_moment,
            n_modes: 8,
            target_f1_hz: Some(29.0),
            rayleigh_alpha_per_s: b.rayleigh_alpha,
            rayleigh_beta_s: b.rayleigh_beta,
            poisson_ratio: b.poisson_ratio,
        }
    }
}

impl FemConfig {
    pub fn beam_spec(&self) -> Result<BeamSpec> {
        let spec = BeamSpec {
            length: self.length_m,
            n_elements: self.n_elements,
            elastic_modulus: self.elastic_modulus_pa,
            density: self.density_kgm3,
            cross_area: self.cross_area_m2,
            second_moment: self.second_moment_m4,
            rayleigh_alpha: self.rayleigh_alpha_per_s,
            rayleigh_beta: self.rayleigh_beta_s,
            poisson_ratio: self.poisson_ratio,
        };
        match self.target_f1_hz {
            Some(f) => tune_first_mode(f, &spec),
            None => {
                spec.validate()?;
                Ok(spec)
            }
        }
    }
}

/// Hydraulic keys in SI units; `_bar` variants override their Pa counterparts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HydraulicsConfig {
    pub pump_pressure_pa: f64,
    pub pump_pressure_bar: Option<f64>,
    pub tank_pressure_pa: f64,
    pub tank_pressure_bar: Option<f64>,
    pub bore_diameter_m: f64,
    pub rod_diameter_m: f64,
    pub cylinder_length_m: f64,
    pub stroke_m: f64,
    pub oil_bulk_modulus_pa: f64,
    pub oil_bulk_modulus_bar: Option<f64>,
    pub valve_coeff: f64,
    pub orifice_transition_pa: f64,
    /// Defaults to a fraction of each chamber's full volume.
    pub dead_volumes_m3: Option<[f64; 2]>,
    pub sub_volumes: Vec<SubVolume>,
    pub coulomb_force_n: f64,
    pub static_force_n: f64,
    pub viscous_coeff_nspm: f64,
    pub stribeck_velocity_mps: f64,
    pub smoothing_velocity_mps: f64,
}

impl Default for HydraulicsConfig {
    fn default() -> Self {
        let h = HydraulicSpec::default();
        let f = h.friction;
        Self {
            pump_pressure_pa: h.pump_pressure,
            pump_pressure_bar: None,
            tank_pressure_pa: h.tank_pressure,
            tank_pressure_bar: None,
            bore_diameter_m: h.bore_diameter,
            rod_diameter_m: h.rod_diameter,
            cylinder_length_m: h.cylinder_length,
            stroke_m: h.stroke,
            oil_bulk_modulus_pa: h.oil_bulk_modulus,
            oil_bulk_modulus_bar: None,
            valve_coeff: h.valve_coeff,
            orifice_transition_pa: h.orifice_transition,
            dead_volumes_m3: None,
            sub_volumes: Vec::new(),
            coulomb_force_n: f.coulomb_force,
            static_force_n: f.static_force,
            viscous_coeff_nspm: f.viscous_coeff,
            stribeck_velocity_mps: f.stribeck_velocity,
            smoothing_velocity_mps: f.smoothing_velocity,
        }
    }
}

impl HydraulicsConfig {
    pub fn spec(&self) -> Result<HydraulicSpec> {
        let bar_or = |bar: Option<f64>, pa: f64| bar.map(|b| b * BAR).unwrap_or(pa);
        let mut spec = HydraulicSpec {
            pump_pressure: bar_or(self.pump_pressure_bar, self.pump_pressure_pa),
            tank_pressure: bar_or(self.tank_pressure_bar, self.tank_pressure_pa),
            bore_diameter: self.bore_diameter_m,
            rod_diameter: self.rod_diameter_m,
            cylinder_length: self.cylinder_length_m,
            stroke: self.stroke_m,
            oil_bulk_modulus: bar_or(self.oil_bulk_modulus_bar, self.oil_bulk_modulus_pa),
            valve_coeff: self.valve_coeff,
            orifice_transition: self.orifice_transition_pa,
            dead_volumes: [0.0; 2],
            sub_volumes: self.sub_volumes.clone(),
            friction: FrictionSpec {
                coulomb_force: self.coulomb_force_n,
                static_force: self.static_force_n,
                viscous_coeff: self.viscous_coeff_nspm,
                stribeck_velocity: self.stribeck_velocity_mps,
                smoothing_velocity: self.smoothing_velocity_mps,
            },
        };
        spec.dead_volumes = self.dead_volumes_m3.unwrap_or_else(|| spec.default_dead_volumes());
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    /// Pillar anchor; fitted to the actuator length range when absent.
    pub anchor_m: Option<[f64; 2]>,
    pub actuator_x_m: f64,
    pub sensor_x_m: Option<f64>,
    pub payload_x_m: Option<f64>,
    pub theta_min_deg: f64,
    pub theta_max_deg: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            anchor_m: None,
            actuator_x_m: 0.75,
            sensor_x_m: None,
            payload_x_m: None,
            theta_min_deg: -10.0,
            theta_max_deg: 50.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_s: f64,
    pub rho_inf: f64,
    pub gravity_mps2: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt_s: 5e-3,
            duration_s: 1.0,
            rho_inf: 0.8,
            gravity_mps2: GRAVITY,
        }
    }
}

impl SimConfig {
    pub fn n_steps(&self) -> usize {
        (self.duration_s / self.dt_s).round() as usize
    }

    pub fn integrator(&self) -> Result<Integrator> {
        if !(self.dt_s > 0.0) {
            return Err(Error::Config(format!("dt_s must be > 0, got {}", self.dt_s)));
        }
        Integrator::new(self.dt_s, self.rho_inf)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub fem: FemConfig,
    pub hydraulics: HydraulicsConfig,
    pub geometry: GeometryConfig,
    pub sim: SimConfig,
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn modal_model(&self) -> Result<ModalModel> {
        let beam = self.fem.beam_spec()?;
        let length = beam.length;
        let points = InterfacePoints {
            actuator: self.geometry.actuator_x_m,
            sensor: self.geometry.sensor_x_m.unwrap_or(length),
            payload: self.geometry.payload_x_m.unwrap_or(length),
        };
        let fe = build_beam_model(&beam)?;
        modal_reduce(&fe, self.fem.n_modes, points)
    }

    pub fn geometry(&self, points: InterfacePoints, hydraulics: &HydraulicSpec) -> Result<Geometry> {
        let g = &self.geometry;
        let (theta_min, theta_max) = (g.theta_min_deg.to_radians(), g.theta_max_deg.to_radians());
        match g.anchor_m {
            Some(anchor) => {
                let geom = Geometry {
                    anchor,
                    points,
                    theta_min,
                    theta_max,
                };
                geom.validate()?;
                Ok(geom)
            }
            None => {
                let scale = hydraulics.max_length();
                Geometry::fitted(
                    points,
                    theta_min,
                    theta_max,
                    SCALED_LENGTH_AT_MIN * scale,
                    SCALED_LENGTH_AT_MAX * scale,
                )
            }
        }
    }

    /// Modal model, fitted geometry and hydraulic circuit for the given payload.
    pub fn build_system(&self, payload_kg: f64) -> Result<BoomSystem> {
        let modal = self.modal_model()?;
        let hydraulics = self.hydraulics.spec()?;
        let geometry = self.geometry(modal.points, &hydraulics)?;
        Ok(BoomSystem {
            modal,
            geometry,
            hydraulics,
            payload: PayloadSpec::new(payload_kg)?,
            gravity: self.sim.gravity_mps2,
            actuation: Actuation::Hydraulic,
        })
    }
}
