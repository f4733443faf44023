//! Randomized trajectory generation: initial angle, static equilibrium,
//! segmented control signal, simulation and the `.slid` dataset format.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::dynamics::{assemble_eom, tip_deflection, BoomSystem, Integrator, SimState, StepFlags};
use crate::error::{Error, Result};
use crate::hydraulics::ChamberState;
use crate::seeds::{derive_seed, fold_seeds, with_pool};
use crate::slide::decay_probe_signal;

pub const CHANNELS: [&str; 6] = ["U", "s", "sdot", "p1", "p2", "delta_y"];
pub const N_CHANNELS: usize = CHANNELS.len();
pub const MAX_RETRIES: u32 = 3;
const MAX_ANGLE_DRAWS: usize = 1000;
const EQUILIBRIUM_TOL: f64 = 1e-7;
const SLID_MAGIC: &[u8; 4] = b"SLID";
const SLID_VERSION: u32 = 1;

/// Uniform initial boom angle on `[theta_min, theta_max]`.
pub fn sample_initial_angle<R: Rng + ?Sized>(rng: &mut R, theta_min: f64, theta_max: f64) -> f64 {
    rng.random_range(theta_min..=theta_max)
}

/// Static configuration with the actuator locked at the angle `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub theta: f64,
    pub chambers: ChamberState,
    /// Actuator force holding the boom, N.
    pub force: f64,
    pub zeta: Vec<f64>,
    pub iterations: usize,
}

impl Equilibrium {
    pub fn state(&self) -> SimState {
        SimState::at_rest(self.theta, self.zeta.clone(), self.chambers)
    }
}

/// Splits a holding force into chamber pressures, anchoring the low side at tank pressure.
pub fn force_to_pressures(force: f64, sys: &BoomSystem) -> ChamberState {
    let h = &sys.hydraulics;
    let (a1, a2, pt) = (h.piston_area(), h.annulus_area(), h.tank_pressure);
    if force >= -pt * (a1 - a2) {
        ChamberState {
            p1: (force + pt * a2) / a1,
            p2: pt,
        }
    } else {
        ChamberState {
            p1: pt,
            p2: (pt * a1 - force) / a2,
        }
    }
}

/// Newton solve of the static balance for `[zeta; F_h]` at a locked actuator.
pub fn static_equilibrium(theta: f64, sys: &BoomSystem) -> Result<Equilibrium> {
    let geom = &sys.geometry;
    if !(theta >= geom.theta_min && theta <= geom.theta_max) {
        return Err(Error::InvalidArgument(format!(
            "initial angle {:.3} deg outside the working range",
            theta.to_degrees()
        )));
    }
    let n = sys.n_modes();
    let zero = vec![0.0; n];
    let mut zeta = vec![0.0; n];
    let mut force = 0.0;
    // the residual is affine in [zeta; F], so the Jacobian is assembled once by columns
    let residual = |zeta: &[f64], force: f64| -> Result<DVector<f64>> {
        Ok(assemble_eom(theta, 0.0, zeta, &zero, sys, force)?.force)
    };
    let r0 = residual(&zeta, force)?;
    let mut jac = DMatrix::zeros(n + 1, n + 1);
    for j in 0..n {
        let mut z = zeta.clone();
        z[j] = 1.0;
        jac.set_column(j, &(residual(&z, 0.0)? - &r0));
    }
    jac.set_column(n, &(residual(&zeta, 1.0)? - &r0));
    let lu = jac.lu();

    let mut r = r0;
    let mut iterations = 0;
    loop {
        let delta = lu.solve(&(-&r)).ok_or_else(|| Error::Numerical {
            what: "singular static balance (zero moment arm?)".into(),
            iterations,
        })?;
        for j in 0..n {
            zeta[j] += delta[j];
        }
        force += delta[n];
        iterations += 1;
        r = residual(&zeta, force)?;
        let step = (0..n).map(|j| delta[j].abs()).fold(0.0, f64::max);
        let tip_step = step * sys.modal.tip_values.iter().map(|v| v.abs()).fold(1.0, f64::max);
        if tip_step < EQUILIBRIUM_TOL && r.amax() < 1e-9 * sys.gravity_torque_scale().max(1.0) {
            break;
        }
        if iterations >= 20 || !r.amax().is_finite() {
            return Err(Error::Numerical {
                what: "static equilibrium did not converge".into(),
                iterations,
            });
        }
    }

    let chambers = force_to_pressures(force, sys);
    let pp = sys.hydraulics.pump_pressure;
    for p in [chambers.p1, chambers.p2] {
        if !(p > 0.0 && p <= pp) {
            return Err(Error::InfeasibleConfiguration {
                theta_deg: theta.to_degrees(),
                reason: format!("holding pressure {:.2} bar outside (0, {:.1}] bar", p / 1e5, pp / 1e5),
            });
        }
    }
    Ok(Equilibrium {
        theta,
        chambers,
        force,
        zeta,
        iterations,
    })
}

/// Draws angles until the static balance is feasible.
pub fn sample_equilibrium<R: Rng + ?Sized>(rng: &mut R, sys: &BoomSystem) -> Result<Equilibrium> {
    let (lo, hi) = (sys.geometry.theta_min, sys.geometry.theta_max);
    for _ in 0..MAX_ANGLE_DRAWS {
        let theta = sample_initial_angle(rng, lo, hi);
        match static_equilibrium(theta, sys) {
            Ok(eq) => return Ok(eq),
            Err(e @ Error::InfeasibleConfiguration { .. }) => log::debug!("resampling initial angle: {e}"),
            Err(e) => return Err(e),
        }
    }
    Err(Error::InfeasibleConfiguration {
        theta_deg: f64::NAN,
        reason: format!("no feasible initial angle in {MAX_ANGLE_DRAWS} draws"),
    })
}

/// Splits `total` into segment lengths of 5..=20 (shorter only if `total` < 5).
fn cut_segments<R: Rng + ?Sized>(rng: &mut R, total: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut rem = total;
    while rem > 0 {
        if rem <= 20 {
            out.push(rem);
            break;
        }
        let mut len = rng.random_range(5..=20);
        if rem - len < 5 {
            len = rem - 5;
        }
        out.push(len);
        rem -= len;
    }
    out
}

/// Linear ramp over `len` samples between -1 and +1 that never hits 0 exactly.
fn ramp(len: usize, rising: bool) -> Vec<f64> {
    let vals: Vec<f64> = if len == 1 {
        vec![1.0]
    } else if len % 2 == 0 {
        (0..len).map(|i| -1.0 + 2.0 * i as f64 / (len - 1) as f64).collect()
    } else {
        (1..=len).map(|i| -1.0 + 2.0 * i as f64 / len as f64).collect()
    };
    if rising {
        vals
    } else {
        vals.into_iter().rev().collect()
    }
}

/// Pools of zeros, +1, -1, ramps and uniform values, cut into segments and shuffled.
pub fn make_control_signal<R: Rng + ?Sized>(n_steps: usize, rng: &mut R) -> Result<Vec<f64>> {
    if n_steps < 10 {
        return Err(Error::InvalidArgument(format!("control signal needs >= 10 steps, got {n_steps}")));
    }
    let m = n_steps / 5;
    let mut segments: Vec<Vec<f64>> = Vec::new();
    for level in [0.0, 1.0, -1.0] {
        for len in cut_segments(rng, m) {
            segments.push(vec![level; len]);
        }
    }
    for len in cut_segments(rng, m) {
        let rising = rng.random_bool(0.5);
        segments.push(ramp(len, rising));
    }
    for len in cut_segments(rng, n_steps - 4 * m) {
        let mut level = 0.0;
        while level == 0.0 {
            level = rng.random_range(-1.0..1.0);
        }
        segments.push(vec![level; len]);
    }
    segments.shuffle(rng);
    Ok(segments.concat())
}

/// One simulated run, channel-major in the order of [`CHANNELS`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f32,
    pub payload: f64,
    pub theta_in: f64,
    pub seed: u64,
    pub flags: u8,
    pub channels: Vec<Vec<f32>>,
}

impl Trajectory {
    pub fn n_steps(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn channel(&self, name: &str) -> Option<&[f32]> {
        CHANNELS.iter().position(|c| *c == name).map(|i| self.channels[i].as_slice())
    }

    pub fn retries(&self) -> u8 {
        (self.flags >> 4) & 0b11
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,U,s,sdot,p1,p2,delta_y\n");
        for i in 0..self.n_steps() {
            let t = i as f64 * self.dt as f64;
            out.push_str(&format!("{t:.6}"));
            for c in &self.channels {
                out.push_str(&format!(",{}", c[i]));
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Records `n_steps` samples; sample `i` is the state at `i * dt` and the valve command held over the next step.
pub fn simulate(
    start: SimState,
    control: &[f64],
    sys: &BoomSystem,
    integ: &Integrator,
) -> Result<(Vec<Vec<f32>>, StepFlags, Vec<SimState>)> {
    let n = control.len();
    let mut channels = vec![Vec::with_capacity(n); N_CHANNELS];
    let mut flags = StepFlags::default();
    let mut state = start;
    let mut states = Vec::with_capacity(n);
    for (i, &u) in control.iter().enumerate() {
        let (s, s_dot) = state.actuator(&sys.geometry);
        let (_, dy) = tip_deflection(&state, &sys.modal);
        for (c, v) in channels
            .iter_mut()
            .zip([u, s, s_dot, state.chambers.p1, state.chambers.p2, dy])
        {
            c.push(v as f32);
        }
        states.push(state.clone());
        if i + 1 < n {
            let (next, f) = integ.step(&state, u, sys)?;
            flags.merge(f);
            state = next;
        }
    }
    Ok((channels, flags, states))
}

/// Valve command used for a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Excitation {
    /// Segmented random signal used for training data.
    Random,
    /// Valve open for the first fifth of the run, then closed.
    DecayProbe,
}

/// Context shared by all trajectories of a batch.
#[derive(Debug, Clone)]
pub struct Generator {
    pub system: BoomSystem,
    pub integrator: Integrator,
    pub n_steps: usize,
}

impl Generator {
    pub fn from_config(cfg: &Config, payload: f64) -> Result<Self> {
        Ok(Self {
            system: cfg.build_system(payload)?,
            integrator: cfg.sim.integrator()?,
            n_steps: cfg.sim.n_steps(),
        })
    }

    /// One attempt with a given seed: angle, equilibrium, random signal, simulation.
    pub fn attempt(&self, seed: u64) -> Result<(Trajectory, StepFlags)> {
        self.attempt_with(seed, Excitation::Random)
    }

    pub fn attempt_with(&self, seed: u64, excitation: Excitation) -> Result<(Trajectory, StepFlags)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let eq = sample_equilibrium(&mut rng, &self.system)?;
        let control = match excitation {
            Excitation::Random => make_control_signal(self.n_steps, &mut rng)?,
            Excitation::DecayProbe => decay_probe_signal(self.n_steps)?,
        };
        let (channels, flags, _) = simulate(eq.state(), &control, &self.system, &self.integrator)?;
        let traj = Trajectory {
            dt: self.integrator.dt as f32,
            payload: self.system.payload.mass,
            theta_in: eq.theta,
            seed,
            flags: flags.bits(),
            channels,
        };
        Ok((traj, flags))
    }

    pub fn trajectory(&self, batch_seed: u64, index: u64) -> (Result<Trajectory>, Vec<String>) {
        self.trajectory_with(batch_seed, index, Excitation::Random)
    }

    /// Trajectory `index` of a batch, regenerated with fresh seeds on failure,
    /// stroke-end contact or leaving the angle range. Vacuum clamps are only flagged.
    pub fn trajectory_with(&self, batch_seed: u64, index: u64, excitation: Excitation) -> (Result<Trajectory>, Vec<String>) {
        let base = derive_seed(batch_seed, index);
        let mut log = Vec::new();
        for retry in 0..=MAX_RETRIES {
            let seed = if retry == 0 { base } else { derive_seed(base, retry as u64) };
            match self.attempt_with(seed, excitation) {
                Ok((mut traj, flags)) if !(flags.actuator_limit || flags.angle_bound) => {
                    traj.flags |= (retry as u8) << 4;
                    return (Ok(traj), log);
                }
                Ok((_, flags)) => log.push(format!("trajectory {index} seed {seed}: flagged {:#06b}", flags.bits())),
                Err(e) => log.push(format!("trajectory {index} seed {seed}: {e}")),
            }
        }
        let msg = format!("trajectory {index} failed after {MAX_RETRIES} retries");
        (Err(Error::BatchQuality(format!("{msg}: {}", log.join("; ")))), log)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub dt: f32,
    pub payload: f64,
    pub trajectories: Vec<Trajectory>,
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub config_hash: String,
}

/// 80/20 split after a shuffle seeded by the trajectory seeds.
pub fn split_indices(seeds: &[u64]) -> (Vec<usize>, Vec<usize>) {
    let n = seeds.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(fold_seeds(seeds));
    idx.shuffle(&mut rng);
    let n_train = (n * 4).div_ceil(5);
    let (train, val) = idx.split_at(n_train);
    (train.to_vec(), val.to_vec())
}

pub fn config_hash(cfg: &Config, payload: f64, seed: u64, n: usize) -> String {
    let mut h = Sha256::new();
    h.update(cfg.to_toml_string().as_bytes());
    h.update(payload.to_le_bytes());
    h.update(seed.to_le_bytes());
    h.update((n as u64).to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

impl Batch {
    pub fn n_steps(&self) -> usize {
        self.trajectories.first().map_or(0, Trajectory::n_steps)
    }

    pub fn from_trajectories(dt: f32, payload: f64, trajectories: Vec<Trajectory>, config_hash: String) -> Self {
        let seeds: Vec<u64> = trajectories.iter().map(|t| t.seed).collect();
        let (train, validation) = split_indices(&seeds);
        Self {
            dt,
            payload,
            trajectories,
            train,
            validation,
            config_hash,
        }
    }

    pub fn train_trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.train.iter().map(|&i| &self.trajectories[i])
    }

    pub fn validation_trajectories(&self) -> impl Iterator<Item = &Trajectory> {
        self.validation.iter().map(|&i| &self.trajectories[i])
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let n_steps = self.n_steps();
        if self.trajectories.iter().any(|t| t.n_steps() != n_steps || t.channels.len() != N_CHANNELS) {
            return Err(Error::Format("ragged trajectories cannot be written".into()));
        }
        let mut buf = Vec::with_capacity(32 + self.trajectories.len() * (17 + N_CHANNELS * 4 * n_steps));
        buf.extend_from_slice(SLID_MAGIC);
        buf.extend_from_slice(&SLID_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.trajectories.len() as u32).to_le_bytes());
        buf.extend_from_slice(&(n_steps as u32).to_le_bytes());
        buf.extend_from_slice(&(N_CHANNELS as u32).to_le_bytes());
        buf.extend_from_slice(&self.dt.to_le_bytes());
        buf.extend_from_slice(&self.payload.to_le_bytes());
        for t in &self.trajectories {
            buf.extend_from_slice(&t.theta_in.to_le_bytes());
            buf.extend_from_slice(&t.seed.to_le_bytes());
            buf.push(t.flags);
            for c in &t.channels {
                for v in c {
                    buf.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != SLID_MAGIC {
            return Err(Error::Format("not a .slid file (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != SLID_VERSION {
            return Err(Error::Format(format!("unsupported .slid version {version}")));
        }
        let n_traj = cur.u32()? as usize;
        let n_steps = cur.u32()? as usize;
        let n_channels = cur.u32()? as usize;
        if n_channels != N_CHANNELS {
            return Err(Error::Format(format!("expected {N_CHANNELS} channels, found {n_channels}")));
        }
        let dt = cur.f32()?;
        let payload = cur.f64()?;
        let mut trajectories = Vec::with_capacity(n_traj);
        for _ in 0..n_traj {
            let theta_in = cur.f64()?;
            let seed = cur.u64()?;
            let flags = cur.take(1)?[0];
            let mut channels = Vec::with_capacity(N_CHANNELS);
            for _ in 0..N_CHANNELS {
                let raw = cur.take(4 * n_steps)?;
                channels.push(raw.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect());
            }
            trajectories.push(Trajectory {
                dt,
                payload,
                theta_in,
                seed,
                flags,
                channels,
            });
        }
        if cur.pos != bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
        }
        Ok(Self::from_trajectories(dt, payload, trajectories, String::new()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(std::io::BufWriter::new(file))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(std::fs::File::open(path)?)
    }

    /// One CSV per trajectory, `traj_0000.csv`, ...
    pub fn write_csv_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, t) in self.trajectories.iter().enumerate() {
            t.write_csv(&dir.join(format!("traj_{i:04}.csv")))?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Generates `n` trajectories in parallel; the result does not depend on the worker count.
pub fn generate_batch(n: usize, seed: u64, generator: &Generator, config_hash: String) -> Result<Batch> {
    if n < 5 {
        return Err(Error::InvalidArgument(format!("batch needs >= 5 trajectories, got {n}")));
    }
    let trajectories = generate_trajectories(n, seed, generator, Excitation::Random)?;
    let dt = generator.integrator.dt as f32;
    Ok(Batch::from_trajectories(dt, generator.system.payload.mass, trajectories, config_hash))
}

/// Runs trajectories `0..n` of a seeded batch, failing when any of them cannot be
/// produced within the retry budget or more than 10% of all attempts were rejected.
pub fn generate_trajectories(n: usize, seed: u64, generator: &Generator, excitation: Excitation) -> Result<Vec<Trajectory>> {
    let results: Vec<(Result<Trajectory>, Vec<String>)> = with_pool(None, || {
        (0..n as u64)
            .into_par_iter()
            .map(|i| generator.trajectory_with(seed, i, excitation))
            .collect()
    });
    let failed_attempts: usize = results.iter().map(|(_, log)| log.len()).sum();
    let mut trajectories = Vec::with_capacity(n);
    let mut errors = Vec::new();
    for (res, log) in results {
        for line in &log {
            log::info!("{line}");
        }
        match res {
            Ok(t) => trajectories.push(t),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() || failed_attempts * 10 > n {
        return Err(Error::BatchQuality(format!(
            "{failed_attempts} failed attempts over {n} trajectories; {}",
            if errors.is_empty() { "failure rate above 10%".to_string() } else { errors.join(" | ") }
        )));
    }
    Ok(trajectories)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::Actuation;

    fn system(payload: f64) -> BoomSystem {
        Config::default().build_system(payload).unwrap()
    }

    #[test]
    fn angle_draws_stay_in_range_and_are_uniform() {
        let (lo, hi) = (-10f64.to_radians(), 50f64.to_radians());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut xs: Vec<f64> = (0..100_000).map(|_| sample_initial_angle(&mut rng, lo, hi)).collect();
        assert!(xs.iter().all(|&x| (lo..=hi).contains(&x)));
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let cdf = (x - lo) / (hi - lo);
                (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS statistic {ks}");
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            assert_eq!(sample_initial_angle(&mut a, lo, hi), sample_initial_angle(&mut b, lo, hi));
        }
    }

    #[test]
    fn weightless_boom_needs_no_holding_force() {
        let sys = BoomSystem {
            gravity: 0.0,
            ..system(0.0)
        };
        let eq = static_equilibrium(0.2, &sys).unwrap();
        let h = &sys.hydraulics;
        assert!(eq.force.abs() < 1e-9);
        assert!(eq.zeta.iter().all(|z| z.abs() < 1e-15));
        assert!((eq.chambers.p1 * h.piston_area() - h.tank_pressure * h.annulus_area()).abs() < 1e-9);
    }

    #[test]
    fn rigid_boom_moment_balance() {
        let mut sys = system(100.0);
        sys.modal = sys.modal.rigid();
        let eq = static_equilibrium(0.0, &sys).unwrap();
        let m = &sys.modal;
        let (_, rate) = crate::dynamics::actuator_kinematics(0.0, &sys.geometry);
        let expected = sys.gravity * (m.beam_mass * m.beam_cg + 100.0 * 2.5) / rate;
        assert!((eq.force - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn equilibrium_residual_vanishes_with_pressure_force() {
        for payload in [0.0, 100.0] {
            let sys = system(payload);
            for deg in [-10.0, 0.0, 25.0, 50.0] {
                let eq = static_equilibrium(f64::to_radians(deg), &sys).unwrap();
                let st = eq.state();
                let f = sys.actuator_force(st.theta, 0.0, st.chambers);
                let eom = assemble_eom(st.theta, 0.0, &st.zeta, &st.zeta_dot, &sys, f).unwrap();
                assert!(eom.force.amax() < 1e-6 * sys.gravity_torque_scale());
                assert!(eq.chambers.p1 > 0.0 && eq.chambers.p2 > 0.0);
            }
        }
    }

    #[test]
    fn pulling_force_anchors_the_piston_side() {
        let sys = system(0.0);
        let h = &sys.hydraulics;
        let c = force_to_pressures(-5e3, &sys);
        assert_eq!(c.p1, h.tank_pressure);
        assert!((c.p1 * h.piston_area() - c.p2 * h.annulus_area() + 5e3).abs() < 1e-6);
    }

    #[test]
    fn infeasible_holding_pressure_is_rejected() {
        let mut sys = system(100.0);
        sys.hydraulics.pump_pressure = 2e5;
        assert!(matches!(
            static_equilibrium(0.0, &sys),
            Err(Error::InfeasibleConfiguration { .. })
        ));
    }

    #[test]
    fn equilibrium_persists_without_valve_input() {
        let sys = system(50.0);
        let integ = Integrator::default();
        let eq = static_equilibrium(0.3, &sys).unwrap();
        let (channels, flags, _) = simulate(eq.state(), &[0.0; 200], &sys, &integ).unwrap();
        let s = &channels[1];
        assert!((s[199] - s[0]).abs() < 1e-3);
        assert!((channels[3][199] - channels[3][0]).abs() < 1e5);
        assert!(!flags.any());
    }

    #[test]
    fn control_signal_pools_are_exact() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = make_control_signal(200, &mut rng).unwrap();
            assert_eq!(u.len(), 200);
            assert!(u.iter().all(|v| (-1.0..=1.0).contains(v)));
            assert_eq!(u.iter().filter(|&&v| v == 0.0).count(), 40);
            assert!(u.iter().filter(|&&v| v == 1.0).count() >= 40);
            assert!(u.iter().filter(|&&v| v == -1.0).count() >= 40);
        }
        let a = make_control_signal(200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = make_control_signal(200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let c = make_control_signal(200, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().zip(&c).any(|(x, y)| x != y));
        assert!(make_control_signal(9, &mut ChaCha8Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn ramps_span_the_range_without_zero() {
        for len in 1..30 {
            for rising in [true, false] {
                let r = ramp(len, rising);
                assert_eq!(r.len(), len);
                assert!(r.iter().all(|v| *v != 0.0 && (-1.0..=1.0).contains(v)));
            }
        }
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(&ramp(4, true), &[-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0]));
        assert!(close(&ramp(4, false), &[1.0, 1.0 / 3.0, -1.0 / 3.0, -1.0]));
    }

    #[test]
    fn segments_cover_the_pool() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for total in [0, 3, 5, 21, 40, 97] {
            let seg = cut_segments(&mut rng, total);
            assert_eq!(seg.iter().sum::<usize>(), total);
            if total >= 5 {
                assert!(seg.iter().all(|&l| (5..=20).contains(&l)));
            }
        }
    }

    #[test]
    fn slid_round_trip_and_bad_magic() {
        let gen = Generator {
            n_steps: 40,
            ..Generator::from_config(&Config::default(), 0.0).unwrap()
        };
        let batch = generate_batch(5, 11, &gen, String::new()).unwrap();
        assert_eq!(batch.train.len(), 4);
        assert_eq!(batch.validation.len(), 1);
        let mut bytes = Vec::new();
        batch.write(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 32 + 5 * (17 + 6 * 4 * 40));
        let back = Batch::read(bytes.as_slice()).unwrap();
        assert_eq!(back.trajectories, batch.trajectories);
        assert_eq!((back.train.clone(), back.validation.clone()), (batch.train.clone(), batch.validation.clone()));
        bytes[0] = b'X';
        assert!(Batch::read(bytes.as_slice()).is_err());
    }

    #[test]
    fn frozen_actuation_skips_pressure_dynamics() {
        let mut sys = system(0.0);
        sys.actuation = Actuation::Frozen(0.0);
        assert_eq!(sys.actuator_force(0.1, 1.0, ChamberState { p1: 1e7, p2: 0.0 }), 0.0);
    }
}
