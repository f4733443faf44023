use nalgebra::{DMatrix, DVector};

use super::{assemble_eom, Actuation, AlphaHistory, BoomSystem, SimState};
use crate::error::{Error, Result};
use crate::hydraulics::{pressure_rates, ChamberState};

const MAX_HALVINGS: usize = 12;
const MAX_SPLITS: usize = 4;

/// Generalized-alpha coefficients for a given spectral radius at infinite frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaParams {
    pub alpha_m: f64,
    pub alpha_f: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl AlphaParams {
    pub fn from_rho_inf(rho_inf: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho_inf) {
            return Err(Error::InvalidParameter(format!("rho_inf must lie in [0, 1], got {rho_inf}")));
        }
        let alpha_m = (2.0 * rho_inf - 1.0) / (rho_inf + 1.0);
        let alpha_f = rho_inf / (rho_inf + 1.0);
        let gamma = 0.5 + alpha_f - alpha_m;
        let beta = 0.25 * (gamma + 0.5) * (gamma + 0.5);
        Ok(Self {
            alpha_m,
            alpha_f,
            gamma,
            beta,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepFlags {
    pub actuator_limit: bool,
    pub vacuum: bool,
    pub angle_bound: bool,
    pub valve_clamped: bool,
}

impl StepFlags {
    pub fn any(&self) -> bool {
        self.actuator_limit || self.vacuum || self.angle_bound || self.valve_clamped
    }

    pub fn merge(&mut self, other: StepFlags) {
        self.actuator_limit |= other.actuator_limit;
        self.vacuum |= other.vacuum;
        self.angle_bound |= other.angle_bound;
        self.valve_clamped |= other.valve_clamped;
    }

    pub fn bits(&self) -> u8 {
        (self.actuator_limit as u8) | (self.vacuum as u8) << 1 | (self.angle_bound as u8) << 2 | (self.valve_clamped as u8) << 3
    }
}

/// Fixed-step generalized-alpha integrator with monolithic pressure coupling.
///
/// The chamber pressures are treated as velocities of auxiliary coordinates, so
/// one Newton loop solves for `[theta_dd, zeta_dd, p1_dot, p2_dot]` at the end of
/// the step.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub dt: f64,
    pub params: AlphaParams,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for Integrator {
    fn default() -> Self {
        Self::new(5e-3, 0.8).expect("default integrator settings are valid")
    }
}

struct Unpacked {
    theta: f64,
    theta_dot: f64,
    zeta: Vec<f64>,
    zeta_dot: Vec<f64>,
    chambers: ChamberState,
}

impl Integrator {
    pub fn new(dt: f64, rho_inf: f64) -> Result<Self> {
        if !dt.is_finite() || dt == 0.0 {
            return Err(Error::InvalidParameter(format!("time step must be finite and nonzero, got {dt}")));
        }
        Ok(Self {
            dt,
            params: AlphaParams::from_rho_inf(rho_inf)?,
            tolerance: 1e-9,
            max_iterations: 20,
        })
    }

    /// Same settings with another step size (negative steps integrate backward).
    pub fn with_dt(&self, dt: f64) -> Self {
        Self { dt, ..self.clone() }
    }

    /// `[theta_dd, zeta_dd, p1_dot, p2_dot]` consistent with the current state.
    pub fn rates(&self, state: &SimState, u: f64, sys: &BoomSystem) -> Result<Vec<f64>> {
        let f_h = sys.actuator_force(state.theta, state.theta_dot, state.chambers);
        let eom = assemble_eom(state.theta, state.theta_dot, &state.zeta, &state.zeta_dot, sys, f_h)?;
        let qdd = eom.mass.clone().cholesky().map(|c| c.solve(&eom.force)).ok_or_else(|| Error::Numerical {
            what: "reduced mass matrix is not positive definite".into(),
            iterations: 0,
        })?;
        let (p1d, p2d) = chamber_rates(state.theta, state.theta_dot, state.chambers, u, sys)?;
        let mut out: Vec<f64> = qdd.iter().copied().collect();
        out.push(p1d);
        out.push(p2d);
        Ok(out)
    }

    /// Advances the state by one step with the valve held at `u`.
    ///
    /// A step whose Newton loop stalls is retried as two half steps, down to
    /// `1 / 2^MAX_SPLITS` of the nominal size.
    pub fn step(&self, state: &SimState, u: f64, sys: &BoomSystem) -> Result<(SimState, StepFlags)> {
        self.split_step(state, u, sys, 0)
    }

    fn split_step(&self, state: &SimState, u: f64, sys: &BoomSystem, depth: usize) -> Result<(SimState, StepFlags)> {
        match self.single_step(state, u, sys) {
            Err(Error::StepFailure { .. }) if depth < MAX_SPLITS => {
                let half = self.with_dt(0.5 * self.dt);
                let (mid, f1) = half.split_step(state, u, sys, depth + 1)?;
                let (end, mut f2) = half.split_step(&mid, u, sys, depth + 1)?;
                f2.merge(f1);
                Ok((end, f2))
            }
            other => other,
        }
    }

    fn single_step(&self, state: &SimState, u: f64, sys: &BoomSystem) -> Result<(SimState, StepFlags)> {
        let n = sys.n_modes();
        if state.zeta.len() != n || state.zeta_dot.len() != n {
            return Err(Error::InvalidParameter("state and modal model dimensions differ".into()));
        }
        if !state.is_finite() {
            return Err(self.failure(state, f64::NAN, "non-finite state"));
        }
        let nq = n + 1;
        let nw = n + 3;
        let h = self.dt;
        let AlphaParams {
            alpha_m,
            alpha_f,
            gamma,
            beta,
        } = self.params;

        let history = match &state.history {
            Some(hist) => hist.clone(),
            None => {
                let accel = self.rates(state, u, sys)?;
                AlphaHistory {
                    pseudo: accel.clone(),
                    accel,
                }
            }
        };

        let mut q0 = vec![state.theta];
        q0.extend_from_slice(&state.zeta);
        let mut v0 = vec![state.theta_dot];
        v0.extend_from_slice(&state.zeta_dot);
        v0.push(state.chambers.p1);
        v0.push(state.chambers.p2);
        let w0 = &history.accel;
        let a0 = &history.pseudo;

        let cf = (1.0 - alpha_f) / (1.0 - alpha_m);
        let a_base: Vec<f64> = (0..nw).map(|i| (alpha_f * w0[i] - alpha_m * a0[i]) / (1.0 - alpha_m)).collect();
        let unpack = |w: &[f64]| -> (Vec<f64>, Unpacked) {
            let a: Vec<f64> = (0..nw).map(|i| cf * w[i] + a_base[i]).collect();
            let v: Vec<f64> = (0..nw).map(|i| v0[i] + h * ((1.0 - gamma) * a0[i] + gamma * a[i])).collect();
            let q: Vec<f64> = (0..nq)
                .map(|i| q0[i] + h * v0[i] + h * h * ((0.5 - beta) * a0[i] + beta * a[i]))
                .collect();
            (
                a,
                Unpacked {
                    theta: q[0],
                    theta_dot: v[0],
                    zeta: q[1..].to_vec(),
                    zeta_dot: v[1..nq].to_vec(),
                    chambers: ChamberState {
                        p1: v[nq],
                        p2: v[nq + 1],
                    },
                },
            )
        };

        // row scales: mechanical rows by diag(M) g, pressure rows by p_pump / |dt|
        let eom0 = assemble_eom(state.theta, state.theta_dot, &state.zeta, &state.zeta_dot, sys, 0.0)?;
        let g_ref = sys.gravity.max(1.0);
        let p_ref = sys.hydraulics.pump_pressure / h.abs();
        let row_scale: Vec<f64> = (0..nw)
            .map(|i| if i < nq { eom0.mass[(i, i)] * g_ref } else { p_ref })
            .collect();
        let var_scale: Vec<f64> = (0..nw).map(|i| if i < nq { g_ref } else { p_ref }).collect();

        let residual = |w: &[f64]| -> Result<DVector<f64>> {
            let (_, s) = unpack(w);
            let f_h = sys.actuator_force(s.theta, s.theta_dot, s.chambers);
            let eom = assemble_eom(s.theta, s.theta_dot, &s.zeta, &s.zeta_dot, sys, f_h)?;
            let wq = DVector::from_column_slice(&w[..nq]);
            let rm = &eom.mass * wq - &eom.force;
            let (p1d, p2d) = chamber_rates(s.theta, s.theta_dot, s.chambers, u, sys)?;
            let mut r = DVector::zeros(nw);
            for i in 0..nq {
                r[i] = rm[i] / row_scale[i];
            }
            r[nq] = (w[nq] - p1d) / row_scale[nq];
            r[nq + 1] = (w[nq + 1] - p2d) / row_scale[nq + 1];
            Ok(r)
        };

        let mut w = w0.clone();
        let mut r = residual(&w)?;
        let mut norm = r.amax();
        let mut iterations = 0;
        while norm > self.tolerance {
            if iterations >= self.max_iterations {
                return Err(self.failure(state, norm, "Newton iteration did not converge"));
            }
            if !norm.is_finite() {
                return Err(self.failure(state, norm, "NaN in residual"));
            }
            let mut jac = DMatrix::zeros(nw, nw);
            for j in 0..nw {
                let dw = 1e-7 * w[j].abs().max(var_scale[j]);
                let mut wp = w.clone();
                wp[j] += dw;
                let rp = residual(&wp)?;
                for i in 0..nw {
                    jac[(i, j)] = (rp[i] - r[i]) / dw;
                }
            }
            let delta = jac
                .lu()
                .solve(&(-&r))
                .ok_or_else(|| self.failure(state, norm, "singular Newton matrix"))?;
            // backtracking keeps Newton from cycling across the orifice kink at zero pressure drop
            let mut alpha = 1.0;
            let mut trial = w.clone();
            let mut r_trial = r.clone();
            for _ in 0..MAX_HALVINGS {
                for j in 0..nw {
                    trial[j] = w[j] + alpha * delta[j];
                }
                r_trial = residual(&trial)?;
                if r_trial.amax() < (1.0 - 1e-4 * alpha) * norm {
                    break;
                }
                alpha *= 0.5;
            }
            w = trial;
            r = r_trial;
            norm = r.amax();
            iterations += 1;
        }

        let (a, s) = unpack(&w);
        let mut flags = StepFlags::default();
        let mut chambers = s.chambers;
        if sys.actuation == Actuation::Hydraulic && (chambers.p1 < 0.0 || chambers.p2 < 0.0) {
            flags.vacuum = true;
            chambers.p1 = chambers.p1.max(0.0);
            chambers.p2 = chambers.p2.max(0.0);
        }
        let kin = sys.geometry.kinematics(s.theta);
        let hyd = &sys.hydraulics;
        flags.actuator_limit = kin.length < hyd.min_length() || kin.length > hyd.max_length();
        flags.angle_bound = !sys.geometry.angle_in_soft_bounds(s.theta);
        flags.valve_clamped = u.abs() > 1.0;

        let next = SimState {
            theta: s.theta,
            theta_dot: s.theta_dot,
            zeta: s.zeta,
            zeta_dot: s.zeta_dot,
            chambers,
            time: state.time + h,
            history: Some(AlphaHistory { accel: w, pseudo: a }),
        };
        if !next.is_finite() {
            return Err(self.failure(state, norm, "NaN in state"));
        }
        Ok((next, flags))
    }

    fn failure(&self, state: &SimState, residual: f64, reason: &str) -> Error {
        Error::StepFailure {
            time: state.time,
            residual,
            reason: reason.to_string(),
        }
    }
}

fn chamber_rates(theta: f64, theta_dot: f64, chambers: ChamberState, u: f64, sys: &BoomSystem) -> Result<(f64, f64)> {
    match sys.actuation {
        Actuation::Frozen(_) => Ok((0.0, 0.0)),
        Actuation::Hydraulic => {
            let kin = sys.geometry.kinematics(theta);
            pressure_rates(chambers, kin.length, kin.rate * theta_dot, u, &sys.hydraulics)
        }
    }
}
