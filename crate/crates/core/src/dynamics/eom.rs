use nalgebra::{DMatrix, DVector};

use super::BoomSystem;
use crate::error::{Error, Result};

/// Reduced mass matrix and generalized force vector over `[theta, zeta]`.
#[derive(Debug, Clone)]
pub struct Eom {
    pub mass: DMatrix<f64>,
    pub force: DVector<f64>,
}

/// Planar rotating-beam equations of motion with a point payload and a point actuator force.
pub fn assemble_eom(
    theta: f64,
    theta_dot: f64,
    zeta: &[f64],
    zeta_dot: &[f64],
    sys: &BoomSystem,
    actuator_force: f64,
) -> Result<Eom> {
    let modal = &sys.modal;
    let n = modal.n_modes;
    if zeta.len() != n || zeta_dot.len() != n {
        return Err(Error::InvalidParameter(format!(
            "state has {} / {} modal coordinates, model has {n}",
            zeta.len(),
            zeta_dot.len()
        )));
    }
    let mp = sys.payload.mass;
    let xp = modal.points.payload;
    let phi_p = &modal.payload_values;
    let phi_a = &modal.actuator_values;
    let g = sys.gravity;

    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let wp = dot(phi_p, zeta);
    let wp_dot = dot(phi_p, zeta_dot);
    let zz = dot(zeta, zeta);
    let z_zd = dot(zeta, zeta_dot);
    let gz = dot(&modal.gravity_load, zeta);

    let mut mass = DMatrix::zeros(n + 1, n + 1);
    mass[(0, 0)] = modal.beam_inertia + zz + mp * (xp * xp + wp * wp);
    for j in 0..n {
        let c = modal.coupling[j] + mp * xp * phi_p[j];
        mass[(0, j + 1)] = c;
        mass[(j + 1, 0)] = c;
        mass[(j + 1, j + 1)] = 1.0 + mp * phi_p[j] * phi_p[j];
        for i in 0..j {
            let v = mp * phi_p[i] * phi_p[j];
            mass[(i + 1, j + 1)] = v;
            mass[(j + 1, i + 1)] = v;
        }
    }

    let (sin, cos) = theta.sin_cos();
    let kin = sys.geometry.kinematics(theta);
    let omega2 = modal.omega_squared();
    let mut force = DVector::zeros(n + 1);
    force[0] = -2.0 * theta_dot * (z_zd + mp * wp * wp_dot)
        - g * cos * (modal.beam_mass * modal.beam_cg + mp * xp)
        + g * sin * (gz + mp * wp)
        + actuator_force * kin.rate;
    for j in 0..n {
        let damping: f64 = (0..n).map(|k| modal.modal_damping[(j, k)] * zeta_dot[k]).sum();
        force[j + 1] = theta_dot * theta_dot * (zeta[j] + mp * wp * phi_p[j]) - omega2[j] * zeta[j] - damping
            - g * cos * (modal.gravity_load[j] + mp * phi_p[j])
            + actuator_force * kin.transverse * phi_a[j];
    }
    Ok(Eom { mass, force })
}

/// Kinetic + gravitational + elastic energy, minus the work potential of a constant actuator force.
pub fn mechanical_energy(
    theta: f64,
    theta_dot: f64,
    zeta: &[f64],
    zeta_dot: &[f64],
    sys: &BoomSystem,
    actuator_force: f64,
) -> Result<f64> {
    let eom = assemble_eom(theta, theta_dot, zeta, zeta_dot, sys, 0.0)?;
    let modal = &sys.modal;
    let n = modal.n_modes;
    let mut v = DVector::zeros(n + 1);
    v[0] = theta_dot;
    for j in 0..n {
        v[j + 1] = zeta_dot[j];
    }
    let kinetic = 0.5 * v.dot(&(&eom.mass * &v));
    let omega2 = modal.omega_squared();
    let elastic: f64 = (0..n).map(|j| 0.5 * omega2[j] * zeta[j] * zeta[j]).sum();
    let (sin, cos) = theta.sin_cos();
    let gz: f64 = modal.gravity_load.iter().zip(zeta).map(|(a, b)| a * b).sum();
    let wp: f64 = modal.payload_values.iter().zip(zeta).map(|(a, b)| a * b).sum();
    let wa: f64 = modal.actuator_values.iter().zip(zeta).map(|(a, b)| a * b).sum();
    let mp = sys.payload.mass;
    let xp = modal.points.payload;
    let gravity = sys.gravity
        * (sin * (modal.beam_mass * modal.beam_cg + mp * xp) + cos * (gz + mp * wp));
    let kin = sys.geometry.kinematics(theta);
    let actuator = -actuator_force * (kin.length + kin.transverse * wa);
    Ok(kinetic + elastic + gravity + actuator)
}
