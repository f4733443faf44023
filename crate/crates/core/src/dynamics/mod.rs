//! Planar floating-frame model of the hydraulically actuated flexible boom.
//!
//! Generalized coordinates are the rigid boom angle `theta` about the joint and
//! the modal amplitudes `zeta` of the clamped-root basis. Two chamber pressures
//! are carried as first-order states and integrated in the same Newton loop.

mod eom;
mod geometry;
mod integrator;

pub use eom::{assemble_eom, mechanical_energy, Eom};
pub use geometry::{
    actuator_kinematics, ActuatorKinematics, Geometry, ANGLE_MARGIN, SCALED_LENGTH_AT_MAX, SCALED_LENGTH_AT_MIN,
};
pub use integrator::{AlphaParams, Integrator, StepFlags};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ModalModel;
use crate::hydraulics::{ChamberState, HydraulicSpec};

pub const GRAVITY: f64 = 9.81;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PayloadSpec {
    pub mass: f64,
}

impl PayloadSpec {
    pub fn new(mass: f64) -> Result<Self> {
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::InvalidParameter(format!("payload mass must be >= 0, got {mass}")));
        }
        Ok(Self { mass })
    }
}

/// How the actuator force is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Actuation {
    /// Chamber pressures drive the cylinder.
    Hydraulic,
    /// Fixed actuator force; the pressures are held.
    Frozen(f64),
}

/// Everything the simulator needs, shared read-only across trajectories.
#[derive(Debug, Clone)]
pub struct BoomSystem {
    pub modal: ModalModel,
    pub geometry: Geometry,
    pub hydraulics: HydraulicSpec,
    pub payload: PayloadSpec,
    pub gravity: f64,
    pub actuation: Actuation,
}

impl BoomSystem {
    pub fn n_modes(&self) -> usize {
        self.modal.n_modes
    }

    pub fn with_payload(&self, payload: PayloadSpec) -> Self {
        Self {
            payload,
            ..self.clone()
        }
    }

    /// Actuator force for the given pressures and boom angular rate.
    pub fn actuator_force(&self, theta: f64, theta_dot: f64, chambers: ChamberState) -> f64 {
        match self.actuation {
            Actuation::Frozen(f) => f,
            Actuation::Hydraulic => {
                let kin = self.geometry.kinematics(theta);
                crate::hydraulics::cylinder_force(chambers, kin.rate * theta_dot, &self.hydraulics)
            }
        }
    }

    /// Gravity torque scale about the joint, N m.
    pub fn gravity_torque_scale(&self) -> f64 {
        self.gravity
            * (self.modal.beam_mass * self.modal.beam_cg + self.payload.mass * self.modal.points.payload)
    }
}

/// Integrator memory: true and pseudo accelerations of `[theta, zeta, p1, p2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaHistory {
    pub accel: Vec<f64>,
    pub pseudo: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub theta: f64,
    pub theta_dot: f64,
    pub zeta: Vec<f64>,
    pub zeta_dot: Vec<f64>,
    pub chambers: ChamberState,
    pub time: f64,
    pub history: Option<AlphaHistory>,
}

impl SimState {
    pub fn at_rest(theta: f64, zeta: Vec<f64>, chambers: ChamberState) -> Self {
        let n = zeta.len();
        Self {
            theta,
            theta_dot: 0.0,
            zeta,
            zeta_dot: vec![0.0; n],
            chambers,
            time: 0.0,
            history: None,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.theta.is_finite()
            && self.theta_dot.is_finite()
            && self.zeta.iter().chain(&self.zeta_dot).all(|v| v.is_finite())
            && self.chambers.p1.is_finite()
            && self.chambers.p2.is_finite()
    }

    /// Actuator length and rate.
    pub fn actuator(&self, geom: &Geometry) -> (f64, f64) {
        let kin = geom.kinematics(self.theta);
        (kin.length, kin.rate * self.theta_dot)
    }
}

/// Elastic displacement of the sensor node rotated to global axes, `(delta_x, delta_y)`.
pub fn tip_deflection(state: &SimState, modal: &ModalModel) -> (f64, f64) {
    let w: f64 = modal.tip_values.iter().zip(&state.zeta).map(|(p, z)| p * z).sum();
    let (sin, cos) = state.theta.sin_cos();
    (-w * sin, w * cos)
}

#[cfg(test)]
mod tests;
