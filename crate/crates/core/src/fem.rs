//! Planar Euler-Bernoulli cantilever model of the boom and its modal basis.
//!
//! Two DOFs per node (transverse displacement, rotation), consistent mass,
//! root node clamped at the revolute joint. The clamped-root eigenmodes are the
//! reduction basis for the floating-frame dynamics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensionless first root of the clamped-free frequency equation.
pub const CANTILEVER_ROOT_1: f64 = 1.875_104_068_711_961;

const DOF_PER_NODE: usize = 2;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub length: f64,
    pub n_elements: usize,
    pub elastic_modulus: f64,
    pub density: f64,
    pub cross_area: f64,
    pub second_moment: f64,
    pub rayleigh_alpha: f64,
    pub rayleigh_beta: f64,
    /// Carried as material metadata only; 1D bending does not use it.
    pub poisson_ratio: f64,
}

impl Default for BeamSpec {
    fn default() -> Self {
        Self {
            length: 2.5,
            n_elements: 20,
            elastic_modulus: 2.1e11,
            density: 7850.0,
            // roughly a 150 x 150 x 7 mm box section
            cross_area: 4.2e-3,
            second_moment: 1.5e-5,
            rayleigh_alpha: 0.0,
            rayleigh_beta: 3.35e-3,
            poisson_ratio: 0.3,
        }
    }
}

impl BeamSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("length", self.length),
            ("elastic_modulus", self.elastic_modulus),
            ("density", self.density),
            ("cross_area", self.cross_area),
            ("second_moment", self.second_moment),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidSpec(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        for (name, v) in [("rayleigh_alpha", self.rayleigh_alpha), ("rayleigh_beta", self.rayleigh_beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidSpec(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.n_elements < 2 {
            return Err(Error::InvalidSpec(format!(
                "n_elements must be >= 2, got {}",
                self.n_elements
            )));
        }
        Ok(())
    }

    pub fn bending_stiffness(&self) -> f64 {
        self.elastic_modulus * self.second_moment
    }

    pub fn mass_per_length(&self) -> f64 {
        self.density * self.cross_area
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_per_length() * self.length
    }

    /// Analytic first clamped-free bending frequency in Hz.
    pub fn analytic_first_frequency(&self) -> f64 {
        let lambda2 = CANTILEVER_ROOT_1 * CANTILEVER_ROOT_1;
        lambda2 / (2.0 * std::f64::consts::PI)
            * (self.bending_stiffness() / (self.mass_per_length() * self.length.powi(4))).sqrt()
    }
}

/// Rescales the second moment of area so the analytic first mode hits `target_hz`.
pub fn tune_first_mode(target_hz: f64, spec: &BeamSpec) -> Result<BeamSpec> {
    spec.validate()?;
    if !target_hz.is_finite() || target_hz <= 0.0 {
        return Err(Error::InvalidSpec(format!("target frequency must be > 0, got {target_hz}")));
    }
    let ratio = target_hz / spec.analytic_first_frequency();
    Ok(BeamSpec {
        second_moment: spec.second_moment * ratio * ratio,
        ..*spec
    })
}

/// Element stiffness in local DOF order (w1, r1, w2, r2).
pub fn element_stiffness(ei: f64, le: f64) -> [[f64; 4]; 4] {
    let c = ei / le.powi(3);
    let l = le;
    let l2 = le * le;
    [
        [12.0 * c, 6.0 * l * c, -12.0 * c, 6.0 * l * c],
        [6.0 * l * c, 4.0 * l2 * c, -6.0 * l * c, 2.0 * l2 * c],
        [-12.0 * c, -6.0 * l * c, 12.0 * c, -6.0 * l * c],
        [6.0 * l * c, 2.0 * l2 * c, -6.0 * l * c, 4.0 * l2 * c],
    ]
}

/// Consistent element mass in local DOF order (w1, r1, w2, r2).
pub fn element_mass(rho_a: f64, le: f64) -> [[f64; 4]; 4] {
    let c = rho_a * le / 420.0;
    let l = le;
    let l2 = le * le;
    [
        [156.0 * c, 22.0 * l * c, 54.0 * c, -13.0 * l * c],
        [22.0 * l * c, 4.0 * l2 * c, 13.0 * l * c, -3.0 * l2 * c],
        [54.0 * c, 13.0 * l * c, 156.0 * c, -22.0 * l * c],
        [-13.0 * l * c, -3.0 * l2 * c, -22.0 * l * c, 4.0 * l2 * c],
    ]
}

/// Cubic Hermite shape functions at local coordinate `xi` in [0, 1].
pub fn hermite(xi: f64, le: f64) -> [f64; 4] {
    let xi2 = xi * xi;
    let xi3 = xi2 * xi;
    [
        1.0 - 3.0 * xi2 + 2.0 * xi3,
        le * (xi - 2.0 * xi2 + xi3),
        3.0 * xi2 - 2.0 * xi3,
        le * (-xi2 + xi3),
    ]
}

// Exact integrals over [0, 1] of N_i and of xi * N_i (rotation entries still
// need one factor of the element length).
const INT_N: [f64; 4] = [0.5, 1.0 / 12.0, 0.5, -1.0 / 12.0];
const INT_XI_N: [f64; 4] = [3.0 / 20.0, 1.0 / 30.0, 7.0 / 20.0, -1.0 / 20.0];

#[derive(Debug, Clone)]
pub struct FEModel {
    pub spec: BeamSpec,
    /// Unconstrained consistent mass, `n_dof x n_dof`.
    pub mass_matrix: DMatrix<f64>,
    /// Unconstrained stiffness, `n_dof x n_dof`.
    pub stiffness_matrix: DMatrix<f64>,
    pub node_positions: Vec<f64>,
}

impl FEModel {
    pub fn n_nodes(&self) -> usize {
        self.node_positions.len()
    }

    pub fn n_dof(&self) -> usize {
        self.n_nodes() * DOF_PER_NODE
    }

    /// DOFs left after clamping the root node.
    pub fn n_free(&self) -> usize {
        self.n_dof() - DOF_PER_NODE
    }

    pub fn clamped_mass(&self) -> DMatrix<f64> {
        let n = self.n_free();
        self.mass_matrix.view((DOF_PER_NODE, DOF_PER_NODE), (n, n)).into_owned()
    }

    pub fn clamped_stiffness(&self) -> DMatrix<f64> {
        let n = self.n_free();
        self.stiffness_matrix.view((DOF_PER_NODE, DOF_PER_NODE), (n, n)).into_owned()
    }

    /// C = alpha M + beta K on the unconstrained DOFs.
    pub fn damping_matrix(&self) -> DMatrix<f64> {
        &self.mass_matrix * self.spec.rayleigh_alpha + &self.stiffness_matrix * self.spec.rayleigh_beta
    }

    /// Transverse displacement field of the clamped model under a point load at the tip.
    pub fn static_tip_deflection(&self, force: f64) -> Result<f64> {
        let k = self.clamped_stiffness();
        let n = k.nrows();
        let mut f = DVector::zeros(n);
        f[n - 2] = force;
        let chol = k.cholesky().ok_or_else(|| Error::Numerical {
            what: "clamped stiffness is not positive definite".into(),
            iterations: 0,
        })?;
        Ok(chol.solve(&f)[n - 2])
    }

    /// Element index and local coordinate containing axial position `x`.
    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let ne = self.spec.n_elements;
        let le = self.spec.length / ne as f64;
        let e = ((x / le).floor() as isize).clamp(0, ne as isize - 1) as usize;
        let xi = ((x - self.node_positions[e]) / le).clamp(0.0, 1.0);
        (e, xi, le)
    }

    /// Interpolates a full-DOF field (transverse component) at axial position `x`.
    pub fn interpolate(&self, field: &[f64], x: f64) -> f64 {
        let (e, xi, le) = self.locate(x);
        let n = hermite(xi, le);
        let base = e * DOF_PER_NODE;
        (0..4).map(|i| n[i] * field[base + i]).sum()
    }

    /// Consistent load vectors for a unit line mass: `(int N, int x N)` per DOF, times rho A.
    fn mass_moment_vectors(&self) -> (DVector<f64>, DVector<f64>) {
        let rho_a = self.spec.mass_per_length();
        let ne = self.spec.n_elements;
        let le = self.spec.length / ne as f64;
        let mut g = DVector::zeros(self.n_dof());
        let mut c = DVector::zeros(self.n_dof());
        for e in 0..ne {
            let x0 = self.node_positions[e];
            for i in 0..4 {
                let lf = if i % 2 == 1 { le } else { 1.0 };
                let int_n = INT_N[i] * lf * le;
                let int_xn = (x0 * INT_N[i] + le * INT_XI_N[i]) * lf * le;
                g[e * DOF_PER_NODE + i] += rho_a * int_n;
                c[e * DOF_PER_NODE + i] += rho_a * int_xn;
            }
        }
        (g, c)
    }
}

/// Assembles the cantilever beam matrices.
pub fn build_beam_model(spec: &BeamSpec) -> Result<FEModel> {
    spec.validate()?;
    let ne = spec.n_elements;
    let le = spec.length / ne as f64;
    let n_nodes = ne + 1;
    let n_dof = n_nodes * DOF_PER_NODE;
    let ke = element_stiffness(spec.bending_stiffness(), le);
    let me = element_mass(spec.mass_per_length(), le);

    let mut k = DMatrix::zeros(n_dof, n_dof);
    let mut m = DMatrix::zeros(n_dof, n_dof);
    for e in 0..ne {
        let base = e * DOF_PER_NODE;
        for i in 0..4 {
            for j in 0..4 {
                k[(base + i, base + j)] += ke[i][j];
                m[(base + i, base + j)] += me[i][j];
            }
        }
    }
    symmetrize(&mut k);
    symmetrize(&mut m);

    Ok(FEModel {
        spec: *spec,
        mass_matrix: m,
        stiffness_matrix: k,
        node_positions: (0..n_nodes).map(|i| i as f64 * le).collect(),
    })
}

fn symmetrize(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (a[(i, j)] + a[(j, i)]);
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
    }
}

/// Axial positions on the boom where forces act or the deflection is read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfacePoints {
    pub actuator: f64,
    pub sensor: f64,
    pub payload: f64,
}

impl InterfacePoints {
    pub fn at_tip(length: f64, actuator: f64) -> Self {
        Self {
            actuator,
            sensor: length,
            payload: length,
        }
    }
}

/// Mass-normalized clamped-root modal basis.
#[derive(Debug, Clone)]
pub struct ModalModel {
    pub n_modes: usize,
    /// Hz, ascending.
    pub frequencies: Vec<f64>,
    /// Full-DOF mode shapes (root rows are zero), `n_dof x n_modes`.
    pub mode_matrix: DMatrix<f64>,
    pub tip_values: Vec<f64>,
    pub actuator_values: Vec<f64>,
    pub payload_values: Vec<f64>,
    /// c_j = int rho A x phi_j dx
    pub coupling: Vec<f64>,
    /// g_j = int rho A phi_j dx
    pub gravity_load: Vec<f64>,
    /// Phi^T C Phi
    pub modal_damping: DMatrix<f64>,
    pub points: InterfacePoints,
    pub beam_mass: f64,
    pub beam_cg: f64,
    /// Rigid rotary inertia about the joint.
    pub beam_inertia: f64,
    model: FEModel,
}

impl ModalModel {
    pub fn omega_squared(&self) -> Vec<f64> {
        self.frequencies
            .iter()
            .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
            .collect()
    }

    pub fn fe_model(&self) -> &FEModel {
        &self.model
    }

    /// Mode shapes evaluated at axial position `x`.
    pub fn shapes_at(&self, x: f64) -> Vec<f64> {
        (0..self.n_modes)
            .map(|j| {
                let col: Vec<f64> = self.mode_matrix.column(j).iter().copied().collect();
                self.model.interpolate(&col, x)
            })
            .collect()
    }

    /// Same model with all modal damping removed.
    pub fn undamped(&self) -> Self {
        let mut out = self.clone();
        out.modal_damping.fill(0.0);
        out
    }

    /// Rigid limit: no flexible coordinates.
    pub fn rigid(&self) -> Self {
        let mut out = self.clone();
        out.n_modes = 0;
        out.frequencies.clear();
        out.mode_matrix = DMatrix::zeros(self.model.n_dof(), 0);
        out.tip_values.clear();
        out.actuator_values.clear();
        out.payload_values.clear();
        out.coupling.clear();
        out.gravity_load.clear();
        out.modal_damping = DMatrix::zeros(0, 0);
        out
    }
}

/// Solves K phi = w^2 M phi on the clamped model and keeps the lowest `n_modes`.
pub fn modal_reduce(model: &FEModel, n_modes: usize, points: InterfacePoints) -> Result<ModalModel> {
    let n_free = model.n_free();
    if n_modes > n_free {
        return Err(Error::InvalidArgument(format!(
            "n_modes = {n_modes} exceeds {n_free} free DOFs"
        )));
    }
    for (name, x) in [("actuator", points.actuator), ("sensor", points.sensor), ("payload", points.payload)] {
        if !(0.0..=model.spec.length).contains(&x) {
            return Err(Error::Geometry(format!("{name} point {x} m lies outside the beam")));
        }
    }
    let m = model.clamped_mass();
    let k = model.clamped_stiffness();

    let chol = m.clone().cholesky().ok_or_else(|| Error::Numerical {
        what: "mass matrix is not positive definite".into(),
        iterations: 0,
    })?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical {
            what: "Cholesky factor is singular".into(),
            iterations: 0,
        })?;
    let mut a = &l_inv * &k * l_inv.transpose();
    symmetrize(&mut a);
    let eig = SymmetricEigen::try_new(a, 1e-14, EIGEN_MAX_ITER).ok_or_else(|| Error::Numerical {
        what: "symmetric eigen-solver did not converge".into(),
        iterations: EIGEN_MAX_ITER,
    })?;

    let mut order: Vec<usize> = (0..n_free).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let n_dof = model.n_dof();
    let mut modes = DMatrix::zeros(n_dof, n_modes);
    let mut frequencies = Vec::with_capacity(n_modes);
    let lt_inv = l_inv.transpose();
    for (col, &idx) in order.iter().take(n_modes).enumerate() {
        let lambda = eig.eigenvalues[idx];
        if lambda <= 0.0 {
            return Err(Error::Numerical {
                what: format!("non-positive eigenvalue {lambda:e} on the clamped model"),
                iterations: 0,
            });
        }
        let phi = &lt_inv * eig.eigenvectors.column(idx);
        // sign convention: positive tip displacement
        let sign = if phi[n_free - 2] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n_free {
            modes[(DOF_PER_NODE + r, col)] = sign * phi[r];
        }
        frequencies.push(lambda.sqrt() / (2.0 * std::f64::consts::PI));
    }
    if frequencies.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Numerical {
            what: "eigenfrequencies are not strictly increasing".into(),
            iterations: 0,
        });
    }

    let (gvec, cvec) = model.mass_moment_vectors();
    let gravity_load = (0..n_modes).map(|j| modes.column(j).dot(&gvec)).collect();
    let coupling = (0..n_modes).map(|j| modes.column(j).dot(&cvec)).collect();
    let modal_damping = modes.transpose() * model.damping_matrix() * &modes;

    let spec = model.spec;
    let mut out = ModalModel {
        n_modes,
        frequencies,
        mode_matrix: modes,
        tip_values: Vec::new(),
        actuator_values: Vec::new(),
        payload_values: Vec::new(),
        coupling,
        gravity_load,
        modal_damping,
        points,
        beam_mass: spec.total_mass(),
        beam_cg: 0.5 * spec.length,
        beam_inertia: spec.mass_per_length() * spec.length.powi(3) / 3.0,
        model: model.clone(),
    };
    out.tip_values = out.shapes_at(points.sensor);
    out.actuator_values = out.shapes_at(points.actuator);
    out.payload_values = out.shapes_at(points.payload);
    Ok(out)
}
